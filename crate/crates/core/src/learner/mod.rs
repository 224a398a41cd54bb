//! Trainable policy and value networks, pretraining and REINFORCE.

mod model;
mod train;

pub use model::{sample_index, EncodeCache, Encoded, InputKind, Model, ModelConfig};
pub use train::{
    load_model, pretrain_loss, pretrain_step, reinforce_loss, reinforce_step, sample_rollouts, Demo, LearnError,
    LogRow, PretrainStats, RlLoss, TrainConfig, Trainer,
};

use crate::mdp::{legal_productions, Action, Domain, Policy, Rng, SynthState, ValueFn};

impl<D: Domain> Policy<D> for Model {
    fn sample(&self, domain: &D, state: &SynthState<D>, rng: &mut Rng) -> Option<(Action, f64)> {
        let legal = legal_productions(domain, state);
        self.sample_action(&state.view(domain), &legal, rng)
    }

    fn sample_n(&self, domain: &D, state: &SynthState<D>, n: usize, rng: &mut Rng) -> Vec<(Action, f64)> {
        let legal = legal_productions(domain, state);
        self.sample_actions(&state.view(domain), &legal, n, rng)
    }

    fn top_actions(&self, domain: &D, state: &SynthState<D>, n: usize) -> Vec<(Action, f64)> {
        let legal = legal_productions(domain, state);
        Model::top_actions(self, &state.view(domain), &legal, n)
    }
}

impl<D: Domain> ValueFn<D> for Model {
    fn log_value(&self, domain: &D, state: &SynthState<D>) -> f64 {
        self.log_value_of_view(&state.view(domain))
    }
}
