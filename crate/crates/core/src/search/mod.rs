//! Inference-time search over the synthesis MDP: sequential Monte Carlo,
//! beam search with and without the value, policy rollouts, A*, a one-shot
//! decoder that never inspects execution results, and the anytime doubling
//! driver.
//!
//! Every strategy runs against a [`Tracker`], which owns the node budget,
//! counts REPL executions and keeps the best-so-far program and its trace.

mod oracle;
mod strategies;

pub use oracle::SubtreeOracle;
pub use strategies::{
    anytime, astar, beam, norepl_decode, rollouts, run_strategy, smc, systematic_resample, Particle, PassEnd, Strategy,
};

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::mdp::{apply_action, initial_state, Action, Domain, SynthState, ValueFn};
use std::sync::Arc;

/// A value that never prefers one state over another.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoValue;

impl<D: Domain> ValueFn<D> for NoValue {
    fn log_value(&self, _: &D, _: &SynthState<D>) -> f64 {
        0.0
    }
}

/// Limits on a search: REPL executions and/or wall-clock time.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Budget {
    pub nodes: Option<u64>,
    pub deadline: Option<Instant>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Budget::default()
    }

    pub fn nodes(n: u64) -> Self {
        Budget { nodes: Some(n), deadline: None }
    }

    pub fn timeout(t: Duration) -> Self {
        Budget { nodes: None, deadline: Some(Instant::now() + t) }
    }

    pub fn with_timeout(mut self, t: Duration) -> Self {
        self.deadline = Some(Instant::now() + t);
        self
    }

    pub fn is_bounded(&self) -> bool {
        self.nodes.is_some() || self.deadline.is_some()
    }
}

/// One improvement of the best-so-far program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub seconds: f64,
    pub nodes: u64,
    pub quality: f64,
}

/// Outcome of a search.
pub struct SearchResult<D: Domain> {
    pub best: SynthState<D>,
    pub best_quality: f64,
    pub solved: bool,
    /// REPL executions performed.
    pub nodes_expanded: u64,
    pub seconds: f64,
    /// Best quality over time; nondecreasing.
    pub trace: Vec<TracePoint>,
    /// Population size or beam width of each run, in order.
    pub runs: Vec<usize>,
    pub exhausted: bool,
}

impl<D: Domain> SearchResult<D> {
    pub fn program(&self, domain: &D) -> String {
        domain.program_text(&self.best.spec, &self.best.scope)
    }
}

/// Why a call to [`Tracker::expand`] produced no child.
pub enum Expansion<D: Domain> {
    Child(SynthState<D>),
    /// The action was rejected by the domain.
    Rejected,
    /// The budget is spent.
    Exhausted,
}

/// Node accounting and best-so-far bookkeeping shared by all strategies.
pub struct Tracker<'a, D: Domain> {
    pub domain: &'a D,
    pub spec: Arc<D::Spec>,
    start: Instant,
    budget: Budget,
    nodes: u64,
    best: SynthState<D>,
    best_quality: f64,
    solved: bool,
    trace: Vec<TracePoint>,
    runs: Vec<usize>,
    exhausted: bool,
}

impl<'a, D: Domain> Tracker<'a, D> {
    pub fn new(domain: &'a D, spec: Arc<D::Spec>, budget: Budget) -> Self {
        let root = initial_state(domain, Arc::clone(&spec));
        let q = domain.quality(&spec, &root.scope);
        Tracker {
            domain,
            spec,
            start: Instant::now(),
            budget,
            nodes: 0,
            solved: domain.satisfies(&root.spec, &root.scope),
            best: root,
            best_quality: q,
            trace: vec![TracePoint { seconds: 0.0, nodes: 0, quality: q }],
            runs: Vec::new(),
            exhausted: false,
        }
    }

    pub fn root(&self) -> SynthState<D> {
        initial_state(self.domain, Arc::clone(&self.spec))
    }

    pub fn nodes(&self) -> u64 {
        self.nodes
    }

    pub fn solved(&self) -> bool {
        self.solved
    }

    pub fn budget(&self) -> Budget {
        self.budget
    }

    /// True once the node budget or the deadline is spent.
    pub fn is_exhausted(&mut self) -> bool {
        if !self.exhausted {
            let nodes_done = self.budget.nodes.is_some_and(|n| self.nodes >= n);
            let time_done = self.budget.deadline.is_some_and(|d| Instant::now() >= d);
            self.exhausted = nodes_done || time_done;
        }
        self.exhausted
    }

    /// Execute `action` from `state`, counting one node.
    pub fn expand(&mut self, state: &SynthState<D>, action: &Action) -> Expansion<D> {
        if self.is_exhausted() {
            return Expansion::Exhausted;
        }
        self.nodes += 1;
        match apply_action(self.domain, state, action) {
            Ok(next) => {
                self.observe(&next);
                Expansion::Child(next)
            }
            Err(_) => Expansion::Rejected,
        }
    }

    /// Count one node for checking an already-built state.
    pub fn verify(&mut self, state: &SynthState<D>) -> bool {
        if self.is_exhausted() {
            return false;
        }
        self.nodes += 1;
        self.observe(state);
        true
    }

    fn observe(&mut self, state: &SynthState<D>) {
        let solved = self.domain.satisfies(&state.spec, &state.scope);
        let q = if solved { self.domain.max_quality() } else { self.domain.quality(&state.spec, &state.scope) };
        if q > self.best_quality || (solved && !self.solved) {
            self.best = state.clone();
            self.best_quality = q;
            self.solved |= solved;
            self.trace.push(TracePoint { seconds: self.start.elapsed().as_secs_f64(), nodes: self.nodes, quality: q });
        }
    }

    pub fn begin_run(&mut self, size: usize) {
        self.runs.push(size);
    }

    pub fn finish(mut self) -> SearchResult<D> {
        let exhausted = self.is_exhausted();
        SearchResult {
            best: self.best,
            best_quality: self.best_quality,
            solved: self.solved,
            nodes_expanded: self.nodes,
            seconds: self.start.elapsed().as_secs_f64(),
            trace: self.trace,
            runs: self.runs,
            exhausted,
        }
    }
}
