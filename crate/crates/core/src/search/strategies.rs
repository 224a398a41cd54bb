use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Budget, Expansion, SearchResult, Tracker};
use crate::mdp::{apply_action, child_rng, Action, Domain, Policy, Rng, SynthState, ValueFn};

/// How a single run of a strategy ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PassEnd {
    Solved,
    /// Every particle or beam entry died.
    AllDead,
    /// The run used all its steps without solving.
    Done,
    Exhausted,
}

/// A population member of the SMC sampler.
pub struct Particle<D: Domain> {
    pub state: SynthState<D>,
    /// `log v` of the current state; `-inf` marks a dead branch.
    pub log_weight: f64,
    /// No legal continuation; never extended again.
    pub finished: bool,
    /// Particles with equal ids in one pass hold identical states.
    pub node: usize,
}

impl<D: Domain> Clone for Particle<D> {
    fn clone(&self) -> Self {
        Particle { state: self.state.clone(), log_weight: self.log_weight, finished: self.finished, node: self.node }
    }
}

/// Systematic resampling: `k` ancestor indices drawn proportionally to
/// `exp(log_weights)`. Entries of `-inf` are never drawn. Returns `None`
/// when every weight is `-inf`.
pub fn systematic_resample(log_weights: &[f64], k: usize, rng: &mut Rng) -> Option<Vec<usize>> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let w: Vec<f64> = log_weights.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    let step = total / k as f64;
    let mut u = rng.gen::<f64>() * step;
    let mut out = Vec::with_capacity(k);
    let mut acc = w[0];
    let mut i = 0;
    while out.len() < k {
        while u >= acc && i + 1 < w.len() {
            i += 1;
            acc += w[i];
        }
        // skip zero-weight tails reached through rounding
        let mut j = i;
        while w[j] == 0.0 {
            j = if j == 0 { w.len() - 1 } else { j - 1 };
        }
        out.push(j);
        u += step;
    }
    Some(out)
}

fn smc_pass<D: Domain>(
    tr: &mut Tracker<'_, D>,
    policy: &dyn Policy<D>,
    value: &dyn ValueFn<D>,
    k: usize,
    t_max: usize,
    rng: &mut Rng,
) -> PassEnd {
    let domain = tr.domain;
    let root = tr.root();
    let mut particles: Vec<Particle<D>> =
        (0..k).map(|_| Particle { state: root.clone(), log_weight: 0.0, finished: false, node: 0 }).collect();
    let mut next_node = 1;
    for _ in 0..t_max {
        // copies of one state proposing the same action share one execution
        let mut children: HashMap<(usize, Action), Option<usize>> = HashMap::new();
        let mut fresh: Vec<usize> = Vec::new();
        let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
        let mut group_of: HashMap<usize, usize> = HashMap::new();
        for (i, p) in particles.iter().enumerate() {
            if p.finished || p.log_weight == f64::NEG_INFINITY {
                continue;
            }
            let g = *group_of.entry(p.node).or_insert_with(|| {
                groups.push((p.node, Vec::new()));
                groups.len() - 1
            });
            groups[g].1.push(i);
        }
        let mut proposals: Vec<(usize, Action)> = Vec::new();
        for (_, members) in &groups {
            let samples = policy.sample_n(domain, &particles[members[0]].state, members.len(), rng);
            if samples.is_empty() {
                members.iter().for_each(|&i| particles[i].finished = true);
            }
            proposals.extend(members.iter().copied().zip(samples.into_iter().map(|(a, _)| a)));
        }
        for (i, action) in proposals {
            let key = (particles[i].node, action);
            if let Some(&child) = children.get(&key) {
                match child {
                    Some(j) => {
                        let (state, log_weight) = (particles[j].state.clone(), particles[j].log_weight);
                        particles[i].state = state;
                        particles[i].log_weight = log_weight;
                        particles[i].node = particles[j].node;
                    }
                    None => particles[i].log_weight = f64::NEG_INFINITY,
                }
                continue;
            }
            match tr.expand(&particles[i].state, &key.1) {
                Expansion::Exhausted => return PassEnd::Exhausted,
                Expansion::Rejected => {
                    particles[i].log_weight = f64::NEG_INFINITY;
                    children.insert(key, None);
                }
                Expansion::Child(next) => {
                    if tr.solved() {
                        return PassEnd::Solved;
                    }
                    let p = &mut particles[i];
                    if domain.is_dead(&next.spec, &next.scope) {
                        p.log_weight = f64::NEG_INFINITY;
                        children.insert(key, None);
                    } else {
                        children.insert(key, Some(i));
                        fresh.push(i);
                    }
                    p.state = next;
                    p.node = next_node;
                    next_node += 1;
                }
            }
        }
        let states: Vec<&SynthState<D>> = fresh.iter().map(|&i| &particles[i].state).collect();
        let values: HashMap<usize, f64> =
            fresh.iter().map(|&i| particles[i].node).zip(value.log_values(domain, &states)).collect();
        for p in particles.iter_mut() {
            if let Some(&lv) = values.get(&p.node) {
                if p.log_weight > f64::NEG_INFINITY {
                    p.log_weight = lv.min(0.0);
                }
            }
        }
        let weights: Vec<f64> = particles.iter().map(|p| p.log_weight).collect();
        let Some(ancestors) = systematic_resample(&weights, k, rng) else { return PassEnd::AllDead };
        particles = ancestors.into_iter().map(|a| particles[a].clone()).collect();
        if particles.iter().all(|p| p.finished) {
            return PassEnd::Done;
        }
    }
    PassEnd::Done
}

/// Sequential Monte Carlo with `k` particles for up to `t_max` steps per
/// pass: propose from the policy, weight by the value, resample
/// systematically. With a bounded budget, passes restart with a fresh
/// population until the task is solved or the budget is spent.
pub fn smc<D: Domain>(
    domain: &D,
    policy: &dyn Policy<D>,
    value: &dyn ValueFn<D>,
    spec: Arc<D::Spec>,
    k: usize,
    t_max: usize,
    budget: Budget,
    rng: &mut Rng,
) -> SearchResult<D> {
    assert!(k >= 1, "SMC needs at least one particle");
    let mut tr = Tracker::new(domain, spec, budget);
    if tr.solved() {
        return tr.finish();
    }
    loop {
        tr.begin_run(k);
        let before = tr.nodes();
        let end = smc_pass(&mut tr, policy, value, k, t_max, rng);
        let stalled = tr.nodes() == before;
        if matches!(end, PassEnd::Solved | PassEnd::Exhausted) || !budget.is_bounded() || stalled {
            break;
        }
    }
    tr.finish()
}

struct BeamEntry<D: Domain> {
    state: SynthState<D>,
    log_prob: f64,
    score: f64,
    path: Vec<Action>,
}

fn beam_pass<D: Domain>(
    tr: &mut Tracker<'_, D>,
    policy: &dyn Policy<D>,
    value: Option<&dyn ValueFn<D>>,
    width: usize,
    t_max: usize,
) -> PassEnd {
    let domain = tr.domain;
    let mut beam = vec![BeamEntry { state: tr.root(), log_prob: 0.0, score: 0.0, path: Vec::new() }];
    for _ in 0..t_max {
        let mut next = Vec::new();
        for entry in &beam {
            for (action, lp) in policy.top_actions(domain, &entry.state, width) {
                match tr.expand(&entry.state, &action) {
                    Expansion::Exhausted => return PassEnd::Exhausted,
                    Expansion::Rejected => {}
                    Expansion::Child(child) => {
                        if tr.solved() {
                            return PassEnd::Solved;
                        }
                        if domain.is_dead(&child.spec, &child.scope) {
                            continue;
                        }
                        let mut path = entry.path.clone();
                        path.push(action);
                        let log_prob = entry.log_prob + lp;
                        next.push(BeamEntry { state: child, log_prob, score: log_prob, path });
                    }
                }
            }
        }
        if next.is_empty() {
            return PassEnd::AllDead;
        }
        if let Some(v) = value {
            let states: Vec<&SynthState<D>> = next.iter().map(|e| &e.state).collect();
            let lvs = v.log_values(domain, &states);
            for (e, lv) in next.iter_mut().zip(lvs) {
                e.score = e.log_prob + lv;
            }
        }
        next.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.path.cmp(&b.path)));
        next.truncate(width);
        beam = next;
    }
    PassEnd::Done
}

/// Beam search keeping the `width` best states per depth, scored by
/// cumulative `log π` plus, when given, `log v` of the state.
pub fn beam<D: Domain>(
    domain: &D,
    policy: &dyn Policy<D>,
    value: Option<&dyn ValueFn<D>>,
    spec: Arc<D::Spec>,
    width: usize,
    t_max: usize,
    budget: Budget,
) -> SearchResult<D> {
    assert!(width >= 1, "beam width must be positive");
    let mut tr = Tracker::new(domain, spec, budget);
    if !tr.solved() {
        tr.begin_run(width);
        beam_pass(&mut tr, policy, value, width, t_max);
    }
    tr.finish()
}

fn rollouts_run<D: Domain>(tr: &mut Tracker<'_, D>, policy: &dyn Policy<D>, count: Option<usize>, rng: &mut Rng) {
    let domain = tr.domain;
    let mut done = 0;
    while count.map_or(true, |c| done < c) {
        if tr.is_exhausted() {
            return;
        }
        let before = tr.nodes();
        let mut state = tr.root();
        for _ in 0..domain.horizon() {
            let Some((action, _)) = policy.sample(domain, &state, rng) else { break };
            match tr.expand(&state, &action) {
                Expansion::Exhausted => return,
                Expansion::Rejected => break,
                Expansion::Child(next) => {
                    if tr.solved() {
                        return;
                    }
                    if domain.is_dead(&next.spec, &next.scope) {
                        break;
                    }
                    state = next;
                }
            }
        }
        done += 1;
        if tr.nodes() == before || (count.is_none() && !tr.budget().is_bounded()) {
            return;
        }
    }
}

/// Independent policy rollouts until `count` rollouts (if given) or the
/// budget is spent, keeping the best program by quality.
pub fn rollouts<D: Domain>(
    domain: &D,
    policy: &dyn Policy<D>,
    spec: Arc<D::Spec>,
    count: Option<usize>,
    budget: Budget,
    rng: &mut Rng,
) -> SearchResult<D> {
    let mut tr = Tracker::new(domain, spec, budget);
    if !tr.solved() {
        tr.begin_run(count.unwrap_or(0));
        rollouts_run(&mut tr, policy, count, rng);
    }
    tr.finish()
}

struct AstarNode<D: Domain> {
    f: f64,
    order: u64,
    cost: f64,
    state: SynthState<D>,
}

impl<D: Domain> PartialEq for AstarNode<D> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<D: Domain> Eq for AstarNode<D> {}

impl<D: Domain> PartialOrd for AstarNode<D> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<D: Domain> Ord for AstarNode<D> {
    // max-heap: smaller f first, then earlier insertion
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.order.cmp(&self.order))
    }
}

/// Best-first search with cost-so-far `-log π` and heuristic `-log v`,
/// expanding the `m` most likely actions of each popped node.
pub fn astar<D: Domain>(
    domain: &D,
    policy: &dyn Policy<D>,
    value: &dyn ValueFn<D>,
    spec: Arc<D::Spec>,
    m: usize,
    budget: Budget,
) -> SearchResult<D> {
    assert!(budget.is_bounded(), "A* needs a node budget or a deadline");
    let mut tr = Tracker::new(domain, spec, budget);
    if tr.solved() {
        return tr.finish();
    }
    tr.begin_run(m);
    let root = tr.root();
    let mut heap = BinaryHeap::new();
    let mut order = 0;
    heap.push(AstarNode { f: -value.log_value(domain, &root), order, cost: 0.0, state: root });
    'search: while let Some(node) = heap.pop() {
        if node.state.step_count >= domain.horizon() {
            continue;
        }
        for (action, lp) in policy.top_actions(domain, &node.state, m) {
            match tr.expand(&node.state, &action) {
                Expansion::Exhausted => break 'search,
                Expansion::Rejected => {}
                Expansion::Child(child) => {
                    if tr.solved() {
                        break 'search;
                    }
                    if domain.is_dead(&child.spec, &child.scope) {
                        continue;
                    }
                    let cost = node.cost - lp;
                    let h = -value.log_value(domain, &child);
                    order += 1;
                    heap.push(AstarNode { f: cost + h, order, cost, state: child });
                }
            }
        }
    }
    tr.finish()
}

/// Decode with a beam over the policy alone, never consulting execution
/// results; only the final verification of complete candidates counts as
/// node expansions. Candidates are verified best first.
fn norepl_pass<D: Domain>(tr: &mut Tracker<'_, D>, policy: &dyn Policy<D>, width: usize) -> PassEnd {
    let domain = tr.domain;
    let mut beam = vec![(tr.root(), 0.0, Vec::<Action>::new())];
    let mut complete: Vec<(SynthState<D>, f64, Vec<Action>)> = Vec::new();
    for _ in 0..domain.horizon() {
        let mut next = Vec::new();
        for (state, lp0, path) in &beam {
            for (action, lp) in policy.top_actions(domain, state, width) {
                if let Ok(child) = apply_action(domain, state, &action) {
                    let mut p = path.clone();
                    p.push(action);
                    next.push((child, lp0 + lp, p));
                }
            }
        }
        next.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.2.cmp(&b.2)));
        next.truncate(width);
        complete.extend(next.iter().filter(|(s, _, _)| domain.is_complete(&s.scope)).cloned());
        if next.is_empty() {
            break;
        }
        beam = next;
    }
    complete.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.2.cmp(&b.2)));
    for (state, _, _) in &complete {
        if !tr.verify(state) {
            return PassEnd::Exhausted;
        }
        if tr.solved() {
            return PassEnd::Solved;
        }
    }
    PassEnd::Done
}

pub fn norepl_decode<D: Domain>(
    domain: &D,
    policy: &dyn Policy<D>,
    spec: Arc<D::Spec>,
    width: usize,
    budget: Budget,
) -> SearchResult<D> {
    let mut tr = Tracker::new(domain, spec, budget);
    if !tr.solved() {
        tr.begin_run(width);
        norepl_pass(&mut tr, policy, width);
    }
    tr.finish()
}

/// Largest population or width the doubling driver will try.
const MAX_RUN_SIZE: usize = 1 << 16;

/// Rerun `run` with sizes 1, 2, 4, ... against one shared tracker until the
/// task is solved, the budget is spent, or the size cap is reached. The
/// tracker merges the best program across runs, so its trace is monotone.
pub fn anytime<D: Domain>(
    tracker: &mut Tracker<'_, D>,
    mut run: impl FnMut(&mut Tracker<'_, D>, usize, u64) -> PassEnd,
) {
    let mut size = 1;
    let mut index = 0;
    while !tracker.solved() && !tracker.is_exhausted() && size <= MAX_RUN_SIZE {
        tracker.begin_run(size);
        if run(tracker, size, index) == PassEnd::Solved {
            break;
        }
        size *= 2;
        index += 1;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Smc,
    Beam,
    BeamNovalue,
    Rollout,
    Astar,
    Norepl,
}

impl Strategy {
    pub const ALL: [Strategy; 6] =
        [Strategy::Smc, Strategy::Beam, Strategy::BeamNovalue, Strategy::Rollout, Strategy::Astar, Strategy::Norepl];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Smc => "smc",
            Strategy::Beam => "beam",
            Strategy::BeamNovalue => "beam-novalue",
            Strategy::Rollout => "rollout",
            Strategy::Astar => "astar",
            Strategy::Norepl => "norepl",
        }
    }

    /// Whether the strategy consults the value network.
    pub fn uses_value(self) -> bool {
        matches!(self, Strategy::Smc | Strategy::Beam | Strategy::Astar)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown strategy {s:?} (expected one of smc, beam, beam-novalue, rollout, astar, norepl)"))
    }
}

/// Run one strategy under `budget`. SMC, both beams and the no-REPL decoder
/// go through the doubling driver; rollouts and A* consume the budget in a
/// single run. Run `i` of the driver draws from `child_rng(seed, i)`.
pub fn run_strategy<D: Domain>(
    domain: &D,
    policy: &dyn Policy<D>,
    value: &dyn ValueFn<D>,
    spec: Arc<D::Spec>,
    strategy: Strategy,
    budget: Budget,
    astar_m: usize,
    seed: u64,
) -> SearchResult<D> {
    if strategy == Strategy::Astar {
        return astar(domain, policy, value, spec, astar_m, budget);
    }
    let mut tr = Tracker::new(domain, spec, budget);
    if tr.solved() {
        return tr.finish();
    }
    let t_max = domain.horizon();
    match strategy {
        Strategy::Smc => anytime(&mut tr, |tr, k, i| smc_pass(tr, policy, value, k, t_max, &mut child_rng(seed, i))),
        Strategy::Beam => anytime(&mut tr, |tr, w, _| beam_pass(tr, policy, Some(value), w, t_max)),
        Strategy::BeamNovalue => anytime(&mut tr, |tr, w, _| beam_pass(tr, policy, None, w, t_max)),
        Strategy::Norepl => anytime(&mut tr, |tr, w, _| norepl_pass(tr, policy, w)),
        Strategy::Rollout => {
            tr.begin_run(0);
            rollouts_run(&mut tr, policy, None, &mut child_rng(seed, 0));
        }
        Strategy::Astar => unreachable!(),
    }
    tr.finish()
}
