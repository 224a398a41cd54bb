//! Pretraining (likelihood of ground-truth action sequences) and REINFORCE
//! fine-tuning with joint value classification.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::{EncodeCache, InputKind, Model, ModelConfig};
use crate::mdp::{
    child_rng, legal_productions, replay, rollout, Action, Domain, MdpError, Rng, SynthState, Trajectory,
};
use crate::nn::{Adam, Checkpoint, CheckpointError, Grads, Tape};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("non-finite loss {loss} at step {step}")]
    NonFiniteLoss { step: u64, loss: f64 },
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid checkpoint metadata: {0}")]
    Meta(String),
}

/// A spec with its ground-truth action sequence.
pub type Demo<D> = (Arc<<D as Domain>::Spec>, Vec<Action>);

fn sum_in_order(model: &Model, parts: Vec<(f64, Grads)>) -> (f64, Grads) {
    let mut grads = Grads::zeros_like(&model.store);
    let mut total = 0.0;
    for (loss, g) in parts {
        total += loss;
        grads.add_assign(&g);
    }
    (total, grads)
}

/// Sum of `log π(a_t | s_t)` along `states`, on one tape.
fn sequence_log_prob<'p, D: Domain>(
    model: &'p Model,
    domain: &D,
    t: &mut Tape<'p>,
    states: &[SynthState<D>],
    actions: &[Action],
    cache: &mut EncodeCache,
) -> Option<crate::nn::Var> {
    let terms: Vec<_> = actions
        .iter()
        .zip(states)
        .map(|(a, s)| {
            let legal = legal_productions(domain, s);
            let enc = model.encode_policy(t, &s.view(domain), cache);
            (model.action_log_prob(t, &enc, &legal, a), 1.0)
        })
        .collect();
    (!terms.is_empty()).then(|| t.combine(&terms))
}

/// Pretraining loss `-(1/B) Σ_episodes Σ_t log π(a_t | pp_t, spec)` and its
/// gradient. Also returns the number of actions in the batch.
pub fn pretrain_loss<D: Domain>(
    model: &Model,
    domain: &D,
    batch: &[Demo<D>],
) -> Result<(f64, usize, Grads), MdpError> {
    let scale = 1.0 / batch.len().max(1) as f64;
    let parts = batch
        .par_iter()
        .map(|(spec, actions)| {
            let states = replay(domain, Arc::clone(spec), actions)?;
            let mut t = Tape::new(&model.store);
            let mut cache = EncodeCache::default();
            let mut grads = Grads::zeros_like(&model.store);
            let Some(lp) = sequence_log_prob(model, domain, &mut t, &states, actions, &mut cache) else {
                return Ok((0.0, grads));
            };
            t.backward(lp, -scale, &mut grads);
            Ok((-scale * t.scalar(lp), grads))
        })
        .collect::<Result<Vec<_>, MdpError>>()?;
    let (loss, grads) = sum_in_order(model, parts);
    Ok((loss, batch.iter().map(|(_, a)| a.len()).sum(), grads))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PretrainStats {
    pub loss: f64,
    pub nats_per_action: f64,
}

/// One Adam step on the pretraining loss. Refuses to update on a
/// non-finite loss or gradient.
pub fn pretrain_step<D: Domain>(
    model: &mut Model,
    adam: &mut Adam,
    domain: &D,
    batch: &[Demo<D>],
    step: u64,
) -> Result<PretrainStats, LearnError> {
    let (loss, actions, grads) = pretrain_loss(model, domain, batch)?;
    if !loss.is_finite() || !grads.all_finite() {
        return Err(LearnError::NonFiniteLoss { step, loss });
    }
    adam.step(&mut model.store, &grads);
    Ok(PretrainStats { loss, nats_per_action: loss * batch.len() as f64 / actions.max(1) as f64 })
}

/// Components of the REINFORCE objective, each averaged over trajectories.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RlLoss {
    /// Negated objective; the quantity minimized.
    pub loss: f64,
    /// `R Σ_t log π(a_t | s_t)`.
    pub policy_term: f64,
    /// `R Σ_t log v(s_t) + (1 - R) Σ_t log(1 - v(s_t))`.
    pub value_term: f64,
    pub success_rate: f64,
}

/// Negated REINFORCE objective over finished rollouts and its gradient:
///
/// `J = R Σ_t log v(s_t) + (1 - R) Σ_t log(1 - v(s_t)) + R Σ_t log π(a_t | s_t)`
///
/// averaged over trajectories. The value term covers every visited state,
/// the start and final state included; there is no baseline.
pub fn reinforce_loss<D: Domain>(model: &Model, domain: &D, trajectories: &[Trajectory<D>]) -> (RlLoss, Grads) {
    let scale = 1.0 / trajectories.len().max(1) as f64;
    let parts: Vec<(f64, f64, Grads)> = trajectories
        .par_iter()
        .map(|traj| {
            let mut t = Tape::new(&model.store);
            let mut cache = EncodeCache::default();
            let mut grads = Grads::zeros_like(&model.store);
            let success = traj.reward == 1;
            let value_terms: Vec<_> = traj
                .states
                .iter()
                .map(|s| {
                    let (log_v, log_not_v) = model.value_log_probs(&mut t, &s.view(domain), &mut cache);
                    (if success { log_v } else { log_not_v }, 1.0)
                })
                .collect();
            let value = t.combine(&value_terms);
            t.backward(value, -scale, &mut grads);
            let value_j = t.scalar(value);
            let mut policy_j = 0.0;
            if success {
                let n = traj.actions.len();
                if let Some(lp) =
                    sequence_log_prob(model, domain, &mut t, &traj.states[..n], &traj.actions, &mut cache)
                {
                    t.backward(lp, -scale, &mut grads);
                    policy_j = t.scalar(lp);
                }
            }
            (policy_j, value_j, grads)
        })
        .collect();
    let mut grads = Grads::zeros_like(&model.store);
    let (mut policy_term, mut value_term) = (0.0, 0.0);
    for (p, v, g) in parts {
        policy_term += p * scale;
        value_term += v * scale;
        grads.add_assign(&g);
    }
    let successes = trajectories.iter().filter(|t| t.reward == 1).count();
    let loss = RlLoss {
        loss: -(policy_term + value_term),
        policy_term,
        value_term,
        success_rate: successes as f64 * scale,
    };
    (loss, grads)
}

/// Sample `rollouts_per_spec` policy rollouts for every spec, then take one
/// Adam step on the REINFORCE objective.
pub fn reinforce_step<D: Domain>(
    model: &mut Model,
    adam: &mut Adam,
    domain: &D,
    specs: &[Arc<D::Spec>],
    rollouts_per_spec: usize,
    seed: u64,
    step: u64,
) -> Result<RlLoss, LearnError> {
    let trajectories = sample_rollouts(model, domain, specs, rollouts_per_spec, seed)?;
    let (loss, grads) = reinforce_loss(model, domain, &trajectories);
    if !loss.loss.is_finite() || !grads.all_finite() {
        return Err(LearnError::NonFiniteLoss { step, loss: loss.loss });
    }
    adam.step(&mut model.store, &grads);
    Ok(loss)
}

/// Rollouts from the model's policy; rollout `i` uses `child_rng(seed, i)`.
pub fn sample_rollouts<D: Domain>(
    model: &Model,
    domain: &D,
    specs: &[Arc<D::Spec>],
    rollouts_per_spec: usize,
    seed: u64,
) -> Result<Vec<Trajectory<D>>, MdpError> {
    let jobs: Vec<(usize, &Arc<D::Spec>)> = specs
        .iter()
        .flat_map(|s| std::iter::repeat(s).take(rollouts_per_spec))
        .enumerate()
        .collect();
    jobs.par_iter()
        .map(|&(i, spec)| {
            let mut rng = child_rng(seed, i as u64);
            rollout(domain, model, Arc::clone(spec), domain.horizon(), &mut rng)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub pretrain_steps: u64,
    pub rl_steps: u64,
    /// Episodes per pretraining step.
    pub batch: usize,
    /// Specs per REINFORCE step.
    pub b1: usize,
    /// Rollouts per spec.
    pub b2: usize,
    pub lr: f64,
    pub clip: f64,
    pub seed: u64,
    /// Save a checkpoint every this many steps (0: only at the end).
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            pretrain_steps: 2000,
            rl_steps: 500,
            batch: 16,
            b1: 2,
            b2: 16,
            lr: 1e-3,
            clip: 5.0,
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Meta {
    domain: String,
    model: ModelConfig,
    input: InputKind,
    train: TrainConfig,
    step: u64,
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub step: u64,
    pub phase: &'static str,
    pub loss: f64,
    pub success_rate: Option<f64>,
}

impl LogRow {
    pub const HEADER: &'static str = "step,phase,loss,success_rate";

    pub fn to_csv(&self) -> String {
        let success = self.success_rate.map(|s| format!("{s:.4}")).unwrap_or_default();
        format!("{},{},{:.6},{}", self.step, self.phase, self.loss, success)
    }
}

/// Pretraining followed by REINFORCE, resumable at any step boundary.
/// Step `k` draws all its randomness from `child_rng(seed, k)`.
pub struct Trainer {
    pub model: Model,
    pub adam: Adam,
    pub config: TrainConfig,
    pub step: u64,
}

impl Trainer {
    pub fn new(model: Model, config: TrainConfig) -> Self {
        let adam = Adam::new(&model.store, config.lr, config.clip);
        Trainer { model, adam, config, step: 0 }
    }

    pub fn total_steps(&self) -> u64 {
        self.config.pretrain_steps + self.config.rl_steps
    }

    /// Run one step; `sample` draws a demonstration (spec and actions).
    pub fn step_once<D: Domain>(
        &mut self,
        domain: &D,
        sample: &(dyn Fn(&mut Rng) -> Demo<D> + Sync),
    ) -> Result<LogRow, LearnError> {
        let k = self.step;
        let mut rng = child_rng(self.config.seed, k);
        let row = if k < self.config.pretrain_steps {
            let batch: Vec<Demo<D>> = (0..self.config.batch).map(|_| sample(&mut rng)).collect();
            let stats = pretrain_step(&mut self.model, &mut self.adam, domain, &batch, k)?;
            LogRow { step: k, phase: "pretrain", loss: stats.loss, success_rate: None }
        } else {
            let specs: Vec<_> = (0..self.config.b1).map(|_| sample(&mut rng).0).collect();
            let rollout_seed = rand::Rng::gen(&mut rng);
            let stats =
                reinforce_step(&mut self.model, &mut self.adam, domain, &specs, self.config.b2, rollout_seed, k)?;
            LogRow { step: k, phase: "reinforce", loss: stats.loss, success_rate: Some(stats.success_rate) }
        };
        self.step += 1;
        Ok(row)
    }

    /// Run until `until` (or the configured total), writing CSV rows to `log`
    /// and checkpoints to `checkpoint` when given.
    pub fn run<D: Domain>(
        &mut self,
        domain: &D,
        sample: &(dyn Fn(&mut Rng) -> Demo<D> + Sync),
        until: Option<u64>,
        log: &mut dyn Write,
        checkpoint: Option<&Path>,
    ) -> Result<(), LearnError> {
        let end = until.unwrap_or(self.total_steps()).min(self.total_steps());
        while self.step < end {
            let row = self.step_once(domain, sample)?;
            writeln!(log, "{}", row.to_csv())?;
            if let Some(path) = checkpoint {
                let every = self.config.checkpoint_every;
                if every > 0 && self.step % every == 0 {
                    self.save(domain, path)?;
                }
            }
        }
        if let Some(path) = checkpoint {
            self.save(domain, path)?;
        }
        Ok(())
    }

    pub fn checkpoint<D: Domain>(&self, domain: &D) -> Checkpoint {
        let meta = Meta {
            domain: domain.name().to_string(),
            model: self.model.config.clone(),
            input: self.model.input.clone(),
            train: self.config.clone(),
            step: self.step,
        };
        Checkpoint {
            fingerprint: domain.grammar().fingerprint(),
            meta: serde_json::to_string(&meta).expect("metadata serializes"),
            params: self.model.store.clone(),
            optimizer: Some(self.adam.clone()),
        }
    }

    pub fn save<D: Domain>(&self, domain: &D, path: &Path) -> Result<(), LearnError> {
        Ok(self.checkpoint(domain).save(path)?)
    }

    /// Rebuild a trainer from a checkpoint, refusing a different grammar.
    pub fn restore<D: Domain>(domain: &D, checkpoint: &Checkpoint) -> Result<Self, LearnError> {
        checkpoint.check_fingerprint(&domain.grammar().fingerprint())?;
        let meta: Meta = serde_json::from_str(&checkpoint.meta).map_err(|e| LearnError::Meta(e.to_string()))?;
        let mut model = Model::new(domain.grammar(), meta.input, meta.model, &mut crate::mdp::rng_from_seed(0));
        model.store.load_from(&checkpoint.params)?;
        let adam = match &checkpoint.optimizer {
            Some(a) => a.clone(),
            None => Adam::new(&model.store, meta.train.lr, meta.train.clip),
        };
        Ok(Trainer { model, adam, config: meta.train, step: meta.step })
    }

    pub fn load<D: Domain>(domain: &D, path: &Path) -> Result<Self, LearnError> {
        Self::restore(domain, &Checkpoint::load(path)?)
    }
}

/// Load only the model from a checkpoint.
pub fn load_model<D: Domain>(domain: &D, path: &Path) -> Result<Model, LearnError> {
    Ok(Trainer::load(domain, path)?.model)
}
