//! Goal-conditioned MDP over sets of partial programs.
//!
//! A state holds the scope `pp` of complete program trees built so far plus
//! the goal specification. An action is one grammar production with every
//! argument bound; non-terminal productions consume scope entries by index and
//! append the combined tree. Concrete languages plug in through [`Domain`].

use std::fmt;
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use smallvec::SmallVec;
use thiserror::Error;

use crate::csg::BitGrid;

/// Seeded random stream used everywhere randomness is needed.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Build a [`Rng`] from a seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}

/// Derive an independent child stream from `(seed, index)`.
pub fn child_rng(seed: u64, index: u64) -> Rng {
    use rand::SeedableRng;
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("unknown production {0}")]
    UnknownProduction(u16),
    #[error("production expects {expected} operands, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("operand index {index} out of range for scope of size {len}")]
    OperandOutOfRange { index: u16, len: usize },
    #[error("operand index {0} used twice")]
    DuplicateOperand(u16),
    #[error("production expects {expected} parameters, got {got}")]
    ParamCountMismatch { expected: usize, got: usize },
    #[error("parameter slot {slot} value {value} outside lattice of size {size}")]
    ParamOutOfRange { slot: usize, value: u16, size: usize },
    #[error("action {0} does not fit the pending expression")]
    IllegalSlot(String),
    #[error("rollouts need at least one step")]
    ZeroSteps,
    #[error("parse error: {0}")]
    Parse(String),
}

/// One bound production: "one line of code typed into the REPL".
///
/// Parameters are indices into each slot's value lattice; operands are indices
/// into the current scope. The derived ordering (production, then params, then
/// operands, lexicographically) is the canonical action order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub production: u16,
    pub params: SmallVec<[u16; 8]>,
    pub operands: SmallVec<[u16; 2]>,
}

impl Action {
    pub fn terminal(production: u16, params: &[u16]) -> Self {
        Action {
            production,
            params: params.iter().copied().collect(),
            operands: SmallVec::new(),
        }
    }

    pub fn combinator(production: u16, operands: &[u16]) -> Self {
        Action {
            production,
            params: SmallVec::new(),
            operands: operands.iter().copied().collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSlot {
    pub name: String,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Production {
    pub name: String,
    pub params: Vec<ParamSlot>,
    pub arity: usize,
}

impl Production {
    pub fn new(name: &str, params: &[(&str, usize)], arity: usize) -> Self {
        Production {
            name: name.to_string(),
            params: params
                .iter()
                .map(|&(name, size)| ParamSlot { name: name.to_string(), size })
                .collect(),
            arity,
        }
    }

    /// Number of distinct parameter bindings.
    pub fn binding_count(&self) -> u64 {
        self.params.iter().map(|p| p.size as u64).product()
    }
}

/// Enumerable action schema of a domain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grammar {
    pub name: String,
    pub productions: Vec<Production>,
}

impl Grammar {
    pub fn production(&self, id: u16) -> Option<&Production> {
        self.productions.get(id as usize)
    }

    pub fn find(&self, name: &str) -> Option<u16> {
        self.productions.iter().position(|p| p.name == name).map(|i| i as u16)
    }

    /// Hex SHA-256 over the canonical grammar description. Checkpoints store
    /// this and refuse to load against a different grammar.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.name.as_bytes());
        for p in &self.productions {
            hasher.update(format!("|{}/{}", p.name, p.arity).as_bytes());
            for slot in &p.params {
                hasher.update(format!(":{}={}", slot.name, slot.size).as_bytes());
            }
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Check the shape of `action` against the grammar and a scope of `scope_len` entries.
    pub fn check(&self, action: &Action, scope_len: usize) -> Result<(), MdpError> {
        let production = self
            .production(action.production)
            .ok_or(MdpError::UnknownProduction(action.production))?;
        if action.params.len() != production.params.len() {
            return Err(MdpError::ParamCountMismatch {
                expected: production.params.len(),
                got: action.params.len(),
            });
        }
        for (slot, (&value, schema)) in action.params.iter().zip(&production.params).enumerate() {
            if value as usize >= schema.size {
                return Err(MdpError::ParamOutOfRange { slot, value, size: schema.size });
            }
        }
        if action.operands.len() != production.arity {
            return Err(MdpError::ArityMismatch {
                expected: production.arity,
                got: action.operands.len(),
            });
        }
        for (i, &op) in action.operands.iter().enumerate() {
            if op as usize >= scope_len {
                return Err(MdpError::OperandOutOfRange { index: op, len: scope_len });
            }
            if action.operands[..i].contains(&op) {
                return Err(MdpError::DuplicateOperand(op));
            }
        }
        Ok(())
    }
}

/// Executed form of a state, as consumed by the neural encoders.
#[derive(Clone, Debug)]
pub enum ReplView {
    Grid(GridView),
    Text(TextView),
}

#[derive(Clone, Debug)]
pub struct GridView {
    pub spec: Arc<BitGrid>,
    /// One canvas per scope entry, in scope order.
    pub canvases: Vec<Arc<BitGrid>>,
    /// The action that brought each scope entry into being.
    pub origins: Vec<Action>,
}

#[derive(Clone, Debug)]
pub struct TextView {
    pub examples: Vec<ExampleView>,
    pub previous: Option<Action>,
    /// Number of actions taken so far.
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExampleView {
    pub input: Vec<u8>,
    pub output: Vec<u8>,
    pub committed: Vec<u8>,
    pub scratch: Vec<u8>,
    pub mask_consumed: Vec<bool>,
    pub mask_scratch: Vec<bool>,
}

/// The seam between the search/learning core and a concrete DSL.
///
/// Execution is deterministic: `transition` on equal inputs yields equal scopes.
pub trait Domain: Send + Sync {
    type Spec: Send + Sync + fmt::Debug;
    type Scope: Clone + Send + Sync + fmt::Debug + PartialEq;

    fn name(&self) -> &str;
    fn grammar(&self) -> &Grammar;
    /// Maximum episode length.
    fn horizon(&self) -> usize;
    fn empty_scope(&self, spec: &Self::Spec) -> Self::Scope;
    /// Number of entries in `pp` (pointer targets for operand slots).
    fn scope_len(&self, scope: &Self::Scope) -> usize;
    /// Whether `production` may fire in this scope (arity, pending-expression state).
    fn production_legal(&self, scope: &Self::Scope, production: u16) -> bool;
    /// Execute `action`; the action's shape has already been checked against the grammar.
    fn transition(
        &self,
        spec: &Self::Spec,
        scope: &Self::Scope,
        action: &Action,
    ) -> Result<Self::Scope, MdpError>;
    /// Dead branches (execution errors, prefix violations) can never reach reward 1.
    fn is_dead(&self, spec: &Self::Spec, scope: &Self::Scope) -> bool;
    fn satisfies(&self, spec: &Self::Spec, scope: &Self::Scope) -> bool;
    /// Whether the scope holds a finished program that could be submitted as
    /// the answer. Decided syntactically, without execution results.
    fn is_complete(&self, scope: &Self::Scope) -> bool {
        self.scope_len(scope) == 1
    }
    /// Best-so-far quality score; larger is better, solved states score [`Domain::max_quality`].
    fn quality(&self, spec: &Self::Spec, scope: &Self::Scope) -> f64;
    fn max_quality(&self) -> f64;
    fn view(&self, spec: &Arc<Self::Spec>, scope: &Self::Scope, previous: Option<&Action>) -> ReplView;
    fn format_action(&self, action: &Action) -> String;
    fn parse_action(&self, text: &str) -> Result<Action, MdpError>;
    /// Concrete syntax of the best program in scope.
    fn program_text(&self, spec: &Self::Spec, scope: &Self::Scope) -> String;
    fn encode_spec(&self, spec: &Self::Spec) -> String;
    fn decode_spec(&self, text: &str) -> Result<Self::Spec, MdpError>;
}

/// MDP state: the scope `pp` plus the goal specification.
pub struct SynthState<D: Domain> {
    pub scope: D::Scope,
    pub spec: Arc<D::Spec>,
    pub step_count: usize,
    pub last_action: Option<Action>,
}

impl<D: Domain> Clone for SynthState<D> {
    fn clone(&self) -> Self {
        SynthState {
            scope: self.scope.clone(),
            spec: Arc::clone(&self.spec),
            step_count: self.step_count,
            last_action: self.last_action.clone(),
        }
    }
}

impl<D: Domain> fmt::Debug for SynthState<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SynthState")
            .field("scope", &self.scope)
            .field("step_count", &self.step_count)
            .finish()
    }
}

impl<D: Domain> PartialEq for SynthState<D> {
    fn eq(&self, other: &Self) -> bool {
        self.scope == other.scope
            && Arc::ptr_eq(&self.spec, &other.spec)
            && self.step_count == other.step_count
            && self.last_action == other.last_action
    }
}

impl<D: Domain> SynthState<D> {
    pub fn view(&self, domain: &D) -> ReplView {
        domain.view(&self.spec, &self.scope, self.last_action.as_ref())
    }

    pub fn scope_len(&self, domain: &D) -> usize {
        domain.scope_len(&self.scope)
    }
}

/// The start state `({}, spec)`.
pub fn initial_state<D: Domain>(domain: &D, spec: Arc<D::Spec>) -> SynthState<D> {
    SynthState {
        scope: domain.empty_scope(&spec),
        spec,
        step_count: 0,
        last_action: None,
    }
}

/// Apply one action, returning the successor state. The input is left untouched.
pub fn apply_action<D: Domain>(
    domain: &D,
    state: &SynthState<D>,
    action: &Action,
) -> Result<SynthState<D>, MdpError> {
    domain.grammar().check(action, domain.scope_len(&state.scope))?;
    if !domain.production_legal(&state.scope, action.production) {
        return Err(MdpError::IllegalSlot(domain.format_action(action)));
    }
    let scope = domain.transition(&state.spec, &state.scope, action)?;
    Ok(SynthState {
        scope,
        spec: Arc::clone(&state.spec),
        step_count: state.step_count + 1,
        last_action: Some(action.clone()),
    })
}

/// 1 iff some program in scope satisfies the spec.
pub fn reward<D: Domain>(domain: &D, state: &SynthState<D>) -> u8 {
    u8::from(domain.satisfies(&state.spec, &state.scope))
}

/// Visit every legal action in canonical order without materializing the list.
pub fn for_each_legal_action<D: Domain>(
    domain: &D,
    state: &SynthState<D>,
    mut visit: impl FnMut(&Action),
) {
    for id in legal_productions(domain, state) {
        for_each_binding(domain, state, id, |a| {
            visit(a);
            true
        });
    }
}

/// Visit every binding of one production (params, then ordered operand
/// tuples) in canonical order until `visit` returns false.
pub fn for_each_binding<D: Domain>(
    domain: &D,
    state: &SynthState<D>,
    production: u16,
    mut visit: impl FnMut(&Action) -> bool,
) {
    let scope_len = domain.scope_len(&state.scope);
    let schema = &domain.grammar().productions[production as usize];
    let sizes: Vec<usize> = schema.params.iter().map(|p| p.size).collect();
    if sizes.contains(&0) {
        return;
    }
    let operand_tuples = ordered_tuples(scope_len, schema.arity);
    let mut params = vec![0u16; sizes.len()];
    loop {
        for operands in &operand_tuples {
            let action = Action {
                production,
                params: params.iter().copied().collect(),
                operands: operands.iter().copied().collect(),
            };
            if !visit(&action) {
                return;
            }
        }
        // odometer increment, last slot fastest
        let mut slot = sizes.len();
        loop {
            if slot == 0 {
                return;
            }
            slot -= 1;
            params[slot] += 1;
            if (params[slot] as usize) < sizes[slot] {
                break;
            }
            params[slot] = 0;
        }
    }
}

/// All legal actions in canonical order.
pub fn legal_actions<D: Domain>(domain: &D, state: &SynthState<D>) -> Vec<Action> {
    let mut out = Vec::new();
    for_each_legal_action(domain, state, |a| out.push(a.clone()));
    out
}

/// Number of legal actions, computed without enumeration.
pub fn count_legal_actions<D: Domain>(domain: &D, state: &SynthState<D>) -> u64 {
    let scope_len = domain.scope_len(&state.scope);
    domain
        .grammar()
        .productions
        .iter()
        .enumerate()
        .filter(|(id, p)| p.arity <= scope_len && domain.production_legal(&state.scope, *id as u16))
        .map(|(_, p)| p.binding_count() * falling_factorial(scope_len, p.arity))
        .sum()
}

fn falling_factorial(n: usize, k: usize) -> u64 {
    (0..k).map(|i| (n - i) as u64).product()
}

/// Ordered k-tuples of distinct indices below `n`, lexicographic.
fn ordered_tuples(n: usize, k: usize) -> Vec<Vec<u16>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(n: usize, k: usize, current: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in 0..n as u16 {
            if !current.contains(&i) {
                current.push(i);
                rec(n, k, current, out);
                current.pop();
            }
        }
    }
    rec(n, k, &mut current, &mut out);
    out
}

/// A source of actions conditioned on the executed state.
pub trait Policy<D: Domain>: Sync {
    /// Sample one legal action and its log-probability. `None` when nothing is legal.
    fn sample(&self, domain: &D, state: &SynthState<D>, rng: &mut Rng) -> Option<(Action, f64)>;

    /// `n` independent samples from one state; empty when nothing is legal.
    fn sample_n(&self, domain: &D, state: &SynthState<D>, n: usize, rng: &mut Rng) -> Vec<(Action, f64)> {
        (0..n).map_while(|_| self.sample(domain, state, rng)).collect()
    }

    /// Up to `n` most likely legal actions with log-probabilities, best first.
    fn top_actions(&self, domain: &D, state: &SynthState<D>, n: usize) -> Vec<(Action, f64)>;
}

/// A (log) estimate of the probability that continuing from a state succeeds.
pub trait ValueFn<D: Domain>: Sync {
    fn log_value(&self, domain: &D, state: &SynthState<D>) -> f64;

    /// Batched form; the default simply maps.
    fn log_values(&self, domain: &D, states: &[&SynthState<D>]) -> Vec<f64> {
        states.iter().map(|s| self.log_value(domain, s)).collect()
    }
}

/// Uniform distribution over the factored action slots: production uniform
/// over legal productions, then each parameter and operand uniform.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformPolicy;

impl<D: Domain> Policy<D> for UniformPolicy {
    fn sample(&self, domain: &D, state: &SynthState<D>, rng: &mut Rng) -> Option<(Action, f64)> {
        let scope_len = domain.scope_len(&state.scope);
        let legal: Vec<u16> = legal_productions(domain, state);
        if legal.is_empty() {
            return None;
        }
        let production = legal[rng.gen_range(0..legal.len())];
        let schema = &domain.grammar().productions[production as usize];
        let mut log_prob = -(legal.len() as f64).ln();
        let mut params = SmallVec::new();
        for slot in &schema.params {
            params.push(rng.gen_range(0..slot.size) as u16);
            log_prob -= (slot.size as f64).ln();
        }
        let mut operands: SmallVec<[u16; 2]> = SmallVec::new();
        for k in 0..schema.arity {
            let free: Vec<u16> = (0..scope_len as u16).filter(|i| !operands.contains(i)).collect();
            operands.push(free[rng.gen_range(0..free.len())]);
            log_prob -= ((scope_len - k) as f64).ln();
        }
        Some((Action { production, params, operands }, log_prob))
    }

    fn top_actions(&self, domain: &D, state: &SynthState<D>, n: usize) -> Vec<(Action, f64)> {
        // every binding of a production shares one probability
        let legal = legal_productions(domain, state);
        let scope_len = domain.scope_len(&state.scope);
        let mut ranked: Vec<(u16, f64)> = legal
            .iter()
            .map(|&id| {
                let schema = &domain.grammar().productions[id as usize];
                let lp = -(legal.len() as f64).ln()
                    - schema.params.iter().map(|s| (s.size as f64).ln()).sum::<f64>()
                    - (falling_factorial(scope_len, schema.arity) as f64).ln();
                (id, lp)
            })
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut out = Vec::with_capacity(n);
        for (id, lp) in ranked {
            if out.len() >= n {
                break;
            }
            for_each_binding(domain, state, id, |a| {
                out.push((a.clone(), lp));
                out.len() < n
            });
        }
        out
    }
}

/// Productions legal in `state`, ascending.
pub fn legal_productions<D: Domain>(domain: &D, state: &SynthState<D>) -> Vec<u16> {
    let scope_len = domain.scope_len(&state.scope);
    domain
        .grammar()
        .productions
        .iter()
        .enumerate()
        .filter(|(id, p)| p.arity <= scope_len && domain.production_legal(&state.scope, *id as u16))
        .map(|(id, _)| id as u16)
        .collect()
}

/// Replays a fixed action sequence; off the sequence it has no legal choice.
#[derive(Clone, Debug)]
pub struct ReplayPolicy {
    pub actions: Vec<Action>,
}

impl<D: Domain> Policy<D> for ReplayPolicy {
    fn sample(&self, _domain: &D, state: &SynthState<D>, _rng: &mut Rng) -> Option<(Action, f64)> {
        self.actions.get(state.step_count).map(|a| (a.clone(), 0.0))
    }

    fn top_actions(&self, _domain: &D, state: &SynthState<D>, n: usize) -> Vec<(Action, f64)> {
        self.actions
            .get(state.step_count)
            .filter(|_| n > 0)
            .map(|a| vec![(a.clone(), 0.0)])
            .unwrap_or_default()
    }
}

/// States visited by one rollout.
pub struct Trajectory<D: Domain> {
    pub states: Vec<SynthState<D>>,
    pub actions: Vec<Action>,
    pub log_probs: Vec<f64>,
    pub reward: u8,
    /// Set when the rollout ended on a dead branch or a rejected action.
    pub failure: Option<String>,
}

impl<D: Domain> Clone for Trajectory<D> {
    fn clone(&self) -> Self {
        Trajectory {
            states: self.states.clone(),
            actions: self.actions.clone(),
            log_probs: self.log_probs.clone(),
            reward: self.reward,
            failure: self.failure.clone(),
        }
    }
}

impl<D: Domain> Trajectory<D> {
    pub fn final_state(&self) -> &SynthState<D> {
        self.states.last().expect("trajectory holds the start state")
    }

    pub fn to_record(&self, domain: &D, spec_id: &str) -> TrajectoryRecord {
        TrajectoryRecord {
            spec_id: spec_id.to_string(),
            spec: Some(domain.encode_spec(&self.states[0].spec)),
            actions: self.actions.iter().map(|a| domain.format_action(a)).collect(),
            reward: self.reward,
        }
    }
}

/// Sample a trajectory from `policy`, stopping on reward 1, a dead branch,
/// or after `max_steps` actions. Execution failures end the rollout with
/// reward 0 and are recorded in [`Trajectory::failure`].
pub fn rollout<D: Domain>(
    domain: &D,
    policy: &dyn Policy<D>,
    spec: Arc<D::Spec>,
    max_steps: usize,
    rng: &mut Rng,
) -> Result<Trajectory<D>, MdpError> {
    rollout_from(domain, policy, initial_state(domain, spec), max_steps, rng)
}

/// [`rollout`] continued from an arbitrary state.
pub fn rollout_from<D: Domain>(
    domain: &D,
    policy: &dyn Policy<D>,
    start: SynthState<D>,
    max_steps: usize,
    rng: &mut Rng,
) -> Result<Trajectory<D>, MdpError> {
    if max_steps == 0 {
        return Err(MdpError::ZeroSteps);
    }
    let mut state = start;
    let mut trajectory = Trajectory {
        states: vec![state.clone()],
        actions: Vec::new(),
        log_probs: Vec::new(),
        reward: 0,
        failure: None,
    };
    if domain.satisfies(&state.spec, &state.scope) {
        trajectory.reward = 1;
        return Ok(trajectory);
    }
    for _ in 0..max_steps {
        let Some((action, log_prob)) = policy.sample(domain, &state, rng) else {
            trajectory.failure = Some("no legal action".into());
            break;
        };
        match apply_action(domain, &state, &action) {
            Ok(next) => state = next,
            Err(e) => {
                trajectory.failure = Some(e.to_string());
                break;
            }
        }
        trajectory.actions.push(action);
        trajectory.log_probs.push(log_prob);
        trajectory.states.push(state.clone());
        if domain.satisfies(&state.spec, &state.scope) {
            trajectory.reward = 1;
            break;
        }
        if domain.is_dead(&state.spec, &state.scope) {
            trajectory.failure = Some("dead branch".into());
            break;
        }
    }
    Ok(trajectory)
}

/// Replay `actions` from the start state, returning every visited state.
pub fn replay<D: Domain>(
    domain: &D,
    spec: Arc<D::Spec>,
    actions: &[Action],
) -> Result<Vec<SynthState<D>>, MdpError> {
    let mut states = vec![initial_state(domain, spec)];
    for action in actions {
        let next = apply_action(domain, states.last().unwrap(), action)?;
        states.push(next);
    }
    Ok(states)
}

/// One line of a trajectory file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub spec_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<String>,
    pub actions: Vec<String>,
    pub reward: u8,
}

impl TrajectoryRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }

    pub fn from_line(line: &str) -> Result<Self, MdpError> {
        serde_json::from_str(line).map_err(|e| MdpError::Parse(e.to_string()))
    }

    pub fn parse_actions<D: Domain>(&self, domain: &D) -> Result<Vec<Action>, MdpError> {
        self.actions.iter().map(|a| domain.parse_action(a)).collect()
    }
}
