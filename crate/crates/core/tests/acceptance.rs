//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test -p replsynth --test acceptance` runs everything; append
//! criterion numbers after `--` to run a subset, e.g. `-- 1 4 9`.

mod common;

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::traces::{spec_of, TRACES};
use rand::Rng as _;
use replsynth::bench::{csg_suite, results_csv, run_bench, string_suite, BenchConfig, BenchRecord, Models};
use replsynth::csg::{action_space_size, render, Angle, BitGrid, CsgConfig, CsgDomain, CsgExpr, Dim};
use replsynth::datagen::{csg_episodes, sample_csg_episode, sample_csg_task, sample_string_episode, string_episodes};
use replsynth::datagen::StringGenConfig;
use replsynth::learner::{pretrain_loss, reinforce_loss, Demo, InputKind, Model, ModelConfig, TrainConfig, Trainer};
use replsynth::mdp::{
    apply_action, child_rng, count_legal_actions, initial_state, replay, reward, rng_from_seed, rollout,
    rollout_from, Domain, Policy, Rng, Trajectory, UniformPolicy, ValueFn,
};
use replsynth::nn::Grads;
use replsynth::search::{rollouts, run_strategy, smc, Budget, NoValue, Strategy, SubtreeOracle};
use replsynth::strings::{parse_tokens, StringDomain};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

/// Trained models and bench output shared between criteria.
#[derive(Default)]
struct Shared {
    csg_model: Option<Model>,
    string_model: Option<Model>,
    csg_bench: Option<Vec<BenchRecord>>,
    string_bench: Option<Vec<BenchRecord>>,
}

fn micro() -> CsgDomain {
    CsgDomain::new(CsgConfig::micro_2d()).unwrap()
}

// ---------------------------------------------------------------------------
// 1. Rendering against a point-membership oracle

/// Exact membership of a world-space point (coordinates in `[0, 32)`) in a
/// shape. A lattice value `c` sits at world position `c + 0.5`; radii and
/// extents are world lengths. Every quantity is a small dyadic rational, so
/// the f64 arithmetic below is exact.
fn contains(e: &CsgExpr, p: [f64; 3]) -> bool {
    let at = |c: u8| f64::from(c) + 0.5;
    match *e {
        CsgExpr::Union(ref a, ref b) => contains(a, p) || contains(b, p),
        CsgExpr::Difference(ref a, ref b) => contains(a, p) && !contains(b, p),
        CsgExpr::Circle { r, x, y } => {
            let (dx, dy) = (p[0] - at(x), p[1] - at(y));
            dx * dx + dy * dy <= f64::from(r).powi(2)
        }
        CsgExpr::Quadrilateral { x, y, w, h, angle } => {
            let (dx, dy) = (p[0] - at(x), p[1] - at(y));
            let (hw, hh) = (f64::from(w) / 2.0, f64::from(h) / 2.0);
            match angle {
                Angle::Deg0 => dx.abs() <= hw && dy.abs() <= hh,
                // local axes (1, 1)/√2 and (-1, 1)/√2, compared squared
                Angle::Deg45 => (dx + dy).powi(2) / 2.0 <= hw * hw && (dy - dx).powi(2) / 2.0 <= hh * hh,
            }
        }
        CsgExpr::Sphere { r, x, y, z } => {
            let d = [p[0] - at(x), p[1] - at(y), p[2] - at(z)];
            d.iter().map(|v| v * v).sum::<f64>() <= f64::from(r).powi(2)
        }
        CsgExpr::Cube { x0, y0, z0, x1, y1, z1 } => {
            let lo = [x0, y0, z0];
            let hi = [x1, y1, z1];
            (0..3).all(|k| lo[k] < hi[k] && at(lo[k]) <= p[k] && p[k] <= at(hi[k]))
        }
        CsgExpr::Cylinder { x0, y0, z0, x1, y1, z1, r } => {
            let a = [at(x0), at(y0), at(z0)];
            let d = [at(x1) - a[0], at(y1) - a[1], at(z1) - a[2]];
            let w = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
            let dd: f64 = d.iter().map(|v| v * v).sum();
            if dd == 0.0 {
                return false;
            }
            let along: f64 = (0..3).map(|k| w[k] * d[k]).sum();
            // |w × d|² = (distance to the axis)² · |d|²
            let cross = [w[1] * d[2] - w[2] * d[1], w[2] * d[0] - w[0] * d[2], w[0] * d[1] - w[1] * d[0]];
            let cc: f64 = cross.iter().map(|v| v * v).sum();
            (0.0..=dd).contains(&along) && cc <= f64::from(r).powi(2) * dd
        }
    }
}

fn oracle_grid(e: &CsgExpr, dim: Dim, n: usize) -> BitGrid {
    let centre = |i: usize| (i as f64 + 0.5) * 32.0 / n as f64;
    let depth = if dim == Dim::Three { n } else { 1 };
    let dims: Vec<usize> = vec![n; dim.axes()];
    let mut g = BitGrid::new(&dims);
    for z in 0..depth {
        for y in 0..n {
            for x in 0..n {
                if contains(e, [centre(x), centre(y), centre(z)]) {
                    g.set(x + n * (y + n * z), true);
                }
            }
        }
    }
    g
}

fn random_primitive(dim: Dim, rng: &mut Rng) -> CsgExpr {
    let lattice = dim.lattice();
    let kind = rng.gen_range(0..3);
    let mut v = || lattice[rng.gen_range(0..lattice.len())];
    match (dim, kind) {
        (Dim::Two, 0) => CsgExpr::Circle { r: v(), x: v(), y: v() },
        (Dim::Two, k) => {
            let angle = if k == 1 { Angle::Deg0 } else { Angle::Deg45 };
            CsgExpr::Quadrilateral { x: v(), y: v(), w: v(), h: v(), angle }
        }
        (Dim::Three, 0) => CsgExpr::Sphere { r: v(), x: v(), y: v(), z: v() },
        (Dim::Three, 1) => CsgExpr::Cube { x0: v(), y0: v(), z0: v(), x1: v(), y1: v(), z1: v() },
        (Dim::Three, _) => CsgExpr::Cylinder { x0: v(), y0: v(), z0: v(), x1: v(), y1: v(), z1: v(), r: v() },
    }
}

fn random_tree(dim: Dim, leaves: usize, rng: &mut Rng) -> CsgExpr {
    if leaves == 1 {
        return random_primitive(dim, rng);
    }
    let left = rng.gen_range(1..leaves);
    let (a, b) = (random_tree(dim, left, rng), random_tree(dim, leaves - left, rng));
    if rng.gen_bool(0.5) {
        CsgExpr::union(a, b)
    } else {
        CsgExpr::difference(a, b)
    }
}

fn rendering(_: &mut Shared) -> Outcome {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    for (dim, n) in [(Dim::Two, 64), (Dim::Three, 32)] {
        let mut rng = rng_from_seed(if dim == Dim::Two { 1001 } else { 1002 });
        let mut bad = 0;
        for _ in 0..1000 {
            let leaves = rng.gen_range(1..=6);
            let e = random_tree(dim, leaves, &mut rng);
            if render(&e, n).unwrap() != oracle_grid(&e, dim, n) {
                bad += 1;
            }
        }
        mismatches.push(format!("{}D {bad}/1000 differ", dim.axes()));
    }
    let secs = start.elapsed().as_secs_f64();
    let exact = mismatches.iter().all(|m| m.contains(" 0/"));
    Outcome::new(exact && secs < 120.0, format!("{} in {secs:.1}s (limit 120s)", mismatches.join(", ")))
}

// ---------------------------------------------------------------------------
// 2. Generated episodes replay to reward 1

fn replays<D: Domain>(domain: &D, episodes: &[replsynth::datagen::Episode<D>]) -> usize {
    episodes
        .iter()
        .filter(|e| {
            replay(domain, Arc::clone(&e.spec), &e.actions)
                .map(|states| reward(domain, states.last().unwrap()) == 1)
                .unwrap_or(false)
        })
        .count()
}

fn replay_soundness(_: &mut Shared) -> Outcome {
    const N: usize = 10_000;
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut all = true;
    for config in [CsgConfig::full_2d(), CsgConfig::full_3d()] {
        let d = CsgDomain::new(config).unwrap();
        let eps = csg_episodes(&d, 13, 0..N, 2);
        let ok = replays(&d, &eps);
        all &= ok == N;
        parts.push(format!("{} {ok}/{N}", d.name()));
    }
    let sd = StringDomain::default();
    let eps = string_episodes(&StringGenConfig::default(), 0..N, 2);
    let ok = replays(&sd, &eps);
    all &= ok == N;
    parts.push(format!("strings {ok}/{N}"));
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(all && secs < 300.0, format!("{} in {secs:.1}s (limit 300s)", parts.join(", ")))
}

// ---------------------------------------------------------------------------
// 3. Published string traces

fn string_traces(_: &mut Shared) -> Outcome {
    let d = StringDomain::default();
    let mut exact = 0;
    for trace in &TRACES {
        let spec = Arc::new(spec_of(trace));
        let Ok(tokens) = parse_tokens(trace.program) else { continue };
        let actions: Vec<_> = tokens.iter().map(|t| t.to_action()).collect();
        let Ok(states) = replay(&d, spec, &actions) else { continue };
        let last = states.last().unwrap();
        let outputs_match = last.scope.committed.len() == trace.outputs.len()
            && last.scope.committed.iter().zip(trace.outputs).all(|(got, want)| got.as_slice() == want.as_bytes());
        if outputs_match && reward(&d, last) == 1 {
            exact += 1;
        }
    }
    Outcome::new(exact == TRACES.len(), format!("{exact}/{} traces reproduce their printed outputs", TRACES.len()))
}

// ---------------------------------------------------------------------------
// 4. Gradients

fn randomize(model: &mut Model, seed: u64) {
    let mut rng = rng_from_seed(seed);
    for t in &mut model.store.tensors {
        for v in &mut t.data {
            *v = rng.gen_range(-0.4..0.4);
        }
    }
}

/// Worst relative error of central differences over sampled coordinates of every tensor.
fn worst_gradient_error(model: &mut Model, loss: &dyn Fn(&Model) -> (f64, Grads), per_tensor: usize) -> f64 {
    let (_, grads) = loss(model);
    let h = 1e-5;
    let mut rng = rng_from_seed(404);
    let mut worst: f64 = 0.0;
    for k in 0..model.store.tensors.len() {
        let n = model.store.tensors[k].data.len();
        for _ in 0..per_tensor.min(n) {
            let i = rng.gen_range(0..n);
            let orig = model.store.tensors[k].data[i];
            model.store.tensors[k].data[i] = orig + h;
            let up = loss(model).0;
            model.store.tensors[k].data[i] = orig - h;
            let down = loss(model).0;
            model.store.tensors[k].data[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.data[k][i];
            worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6));
        }
    }
    worst
}

fn csg_trajectories(d: &CsgDomain, model: &Model, reward_override: Option<u8>) -> Vec<Trajectory<CsgDomain>> {
    let mut rng = rng_from_seed(405);
    let mut out = Vec::new();
    for _ in 0..3 {
        let s = sample_csg_episode(d, 2, &mut rng);
        let spec = Arc::new(s.spec);
        let mut t = rollout(d, model, Arc::clone(&spec), d.horizon(), &mut rng).unwrap();
        t.reward = reward_override.unwrap_or(t.reward);
        out.push(t);
        let states = replay(d, spec, &s.actions).unwrap();
        out.push(Trajectory {
            states,
            actions: s.actions,
            log_probs: Vec::new(),
            reward: reward_override.unwrap_or(1),
            failure: None,
        });
    }
    out
}

fn gradients(_: &mut Shared) -> Outcome {
    let d = micro();
    let sd = StringDomain::default();
    let grid = InputKind::Grid { dims: vec![8, 8] };
    let mut rng = rng_from_seed(406);
    let csg_batch: Vec<Demo<CsgDomain>> = (0..2)
        .map(|_| {
            let s = sample_csg_episode(&d, 2, &mut rng);
            (Arc::new(s.spec), s.actions)
        })
        .collect();
    let s = sample_string_episode(&StringGenConfig::micro(), &mut rng);
    let string_batch: Vec<Demo<StringDomain>> = vec![(Arc::new(s.spec), s.actions)];

    let mut errors = Vec::new();
    let mut m = Model::new(d.grammar(), grid.clone(), ModelConfig::tiny(), &mut rng_from_seed(1));
    randomize(&mut m, 2);
    errors.push((
        "pretrain/csg",
        worst_gradient_error(&mut m, &|m| {
            let (l, _, g) = pretrain_loss(m, &d, &csg_batch).unwrap();
            (l, g)
        }, 4),
    ));
    let mut m = Model::new(sd.grammar(), InputKind::Text, ModelConfig::tiny(), &mut rng_from_seed(3));
    randomize(&mut m, 4);
    errors.push((
        "pretrain/strings",
        worst_gradient_error(&mut m, &|m| {
            let (l, _, g) = pretrain_loss(m, &sd, &string_batch).unwrap();
            (l, g)
        }, 3),
    ));
    let mut m = Model::new(d.grammar(), grid.clone(), ModelConfig::tiny(), &mut rng_from_seed(5));
    randomize(&mut m, 6);
    let trajectories = csg_trajectories(&d, &m, None);
    errors.push((
        "reinforce/csg",
        worst_gradient_error(&mut m, &|m| {
            let (l, g) = reinforce_loss(m, &d, &trajectories);
            (l.loss, g)
        }, 4),
    ));

    let failures = csg_trajectories(&d, &m, Some(0));
    let (loss, grads) = reinforce_loss(&m, &d, &failures);
    let zero_policy =
        loss.policy_term == 0.0 && m.policy_tensors().iter().all(|&k| grads.data[k].iter().all(|&g| g == 0.0));

    let worst = errors.iter().map(|e| e.1).fold(0.0, f64::max);
    let listed: Vec<String> = errors.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    Outcome::new(
        worst <= 1e-3 && zero_policy,
        format!(
            "worst relative error {} (limit 1e-3); policy gradient at R=0 {}",
            listed.join(", "),
            if zero_policy { "exactly zero" } else { "NONZERO" }
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. Value semantics on the micro domain

fn train<D: Domain>(
    domain: &D,
    input: InputKind,
    config: ModelConfig,
    train: TrainConfig,
    sample: &(dyn Fn(&mut Rng) -> Demo<D> + Sync),
) -> Model {
    let model = Model::new(domain.grammar(), input, config, &mut rng_from_seed(train.seed));
    let mut trainer = Trainer::new(model, train);
    while trainer.step < trainer.total_steps() {
        trainer.step_once(domain, sample).unwrap();
    }
    trainer.model
}

fn csg_model(shared: &mut Shared) -> &Model {
    shared.csg_model.get_or_insert_with(|| {
        let d = micro();
        let cfg = TrainConfig { pretrain_steps: 5000, rl_steps: 5000, seed: 1, ..TrainConfig::default() };
        let sample = |rng: &mut Rng| {
            let s = sample_csg_episode(&d, 2, rng);
            (Arc::new(s.spec), s.actions)
        };
        train(&d, InputKind::Grid { dims: vec![8, 8] }, ModelConfig::default(), cfg, &sample)
    })
}

fn string_model(shared: &mut Shared) -> &Model {
    shared.string_model.get_or_insert_with(|| {
        let d = StringDomain::default();
        let cfg = TrainConfig { pretrain_steps: 8000, rl_steps: 3000, seed: 1, ..TrainConfig::default() };
        let gen = StringGenConfig::micro();
        let sample = |rng: &mut Rng| {
            let s = sample_string_episode(&gen, rng);
            (Arc::new(s.spec), s.actions)
        };
        train(&d, InputKind::Text, ModelConfig::small(), cfg, &sample)
    })
}

/// Average ranks, ties sharing the mean rank.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            r[k] = (i + j) as f64 / 2.0 + 1.0;
        }
        i = j + 1;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&ranks(a), &ranks(b))
}

/// Area under the ROC curve of `score` separating positives from negatives.
fn auc(scored: &[(f64, bool)]) -> f64 {
    let scores: Vec<f64> = scored.iter().map(|s| s.0).collect();
    let r = ranks(&scores);
    let pos = scored.iter().filter(|s| s.1).count() as f64;
    let neg = scored.len() as f64 - pos;
    let rank_sum: f64 = scored.iter().zip(&r).filter(|(s, _)| s.1).map(|(_, r)| r).sum();
    (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg)
}

/// Probe states `depth ∈ {1, 2}` steps into 2-object tasks. On-policy probes
/// follow the trained policy; off-policy probes take the demonstrated action
/// or a uniform one with equal odds.
fn value_probe(d: &CsgDomain, model: &Model, on_policy: bool) -> (f64, f64) {
    let (mut vs, mut success, mut scored) = (Vec::new(), Vec::new(), Vec::new());
    let mut i = 0u64;
    while vs.len() < 50 {
        i += 1;
        let mut rng = child_rng(if on_policy { 77 } else { 78 }, i);
        let task = sample_csg_episode(d, 2, &mut rng);
        let mut state = initial_state(d, Arc::new(task.spec));
        let depth = 1 + (i as usize % 2);
        for k in 0..depth {
            let action = if on_policy {
                model.sample(d, &state, &mut rng).unwrap().0
            } else if rng.gen_bool(0.5) && k < task.actions.len() {
                task.actions[k].clone()
            } else {
                UniformPolicy.sample(d, &state, &mut rng).unwrap().0
            };
            state = apply_action(d, &state, &action).unwrap();
        }
        let remaining = d.horizon() - state.step_count;
        if d.satisfies(&state.spec, &state.scope) || remaining == 0 {
            continue;
        }
        let v = model.log_value(d, &state).exp();
        let mut wins = 0;
        for r in 0..500 {
            let t = rollout_from(d, model, state.clone(), remaining, &mut child_rng(1000 + i, r)).unwrap();
            wins += usize::from(t.reward == 1);
            scored.push((v, t.reward == 1));
        }
        vs.push(v);
        success.push(wins as f64 / 500.0);
    }
    (spearman(&vs, &success), auc(&scored))
}

fn value_semantics(shared: &mut Shared) -> Outcome {
    let start = Instant::now();
    let d = micro();
    let model = csg_model(shared);
    let trained = start.elapsed().as_secs_f64();
    let (rho, area) = value_probe(&d, model, true);
    let (off_rho, off_area) = value_probe(&d, model, false);
    Outcome::new(
        rho > 0.7 && area > 0.8 && trained < 1800.0,
        format!(
            "Spearman ρ={rho:.3} (>0.7), AUC={area:.3} (>0.8) over 50 on-policy probes; training {trained:.0}s \
             (limit 1800s); off-policy probes ρ={off_rho:.3} AUC={off_area:.3} (not scored)"
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. Strategy ordering at equal node budget

const ORDERED: [Strategy; 4] = [Strategy::Smc, Strategy::Beam, Strategy::BeamNovalue, Strategy::Rollout];

fn bench_config() -> BenchConfig {
    BenchConfig { strategies: ORDERED.to_vec(), nodes: 2000, timeout: None, astar_m: 16, seed: 9 }
}

fn csg_bench(shared: &mut Shared) -> Vec<BenchRecord> {
    let d = micro();
    let model = csg_model(shared);
    run_bench(&d, &Models { policy: model, value: model, norepl: None }, &csg_suite(&d, 100, 2024), &bench_config())
}

fn string_bench(shared: &mut Shared) -> Vec<BenchRecord> {
    let d = StringDomain::default();
    let model = string_model(shared);
    let suite = string_suite(&StringGenConfig::micro(), 100, 2024);
    run_bench(&d, &Models { policy: model, value: model, norepl: None }, &suite, &bench_config())
}

fn solved(records: &[BenchRecord], s: Strategy) -> usize {
    records.iter().filter(|r| r.strategy == s && r.solved).count()
}

/// `a ≥ b` holds unless `b` leads by 5 or more points (smaller gaps are ties).
fn at_least(records: &[BenchRecord], a: Strategy, b: Strategy, total: usize, notes: &mut Vec<String>) -> bool {
    let (x, y) = (solved(records, a), solved(records, b));
    let gap = 100.0 * (y as f64 - x as f64) / total as f64;
    let verdict = if x >= y {
        "holds"
    } else if gap < 5.0 {
        "tie"
    } else {
        "VIOLATED"
    };
    notes.push(format!("{a}≥{b} {verdict}"));
    gap < 5.0
}

fn ordering(shared: &mut Shared) -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for domain in ["csg2d-micro", "strings-micro"] {
        let records = if domain == "csg2d-micro" { csg_bench(shared) } else { string_bench(shared) };
        let counts: Vec<String> = ORDERED.iter().map(|&s| format!("{s} {}", solved(&records, s))).collect();
        let mut notes = Vec::new();
        for (a, b) in [
            (Strategy::Smc, Strategy::Beam),
            (Strategy::Beam, Strategy::BeamNovalue),
            (Strategy::Smc, Strategy::Rollout),
        ] {
            pass &= at_least(&records, a, b, 100, &mut notes);
        }
        parts.push(format!("{domain}: {} [{}]", counts.join(", "), notes.join(", ")));
        if domain == "csg2d-micro" {
            shared.csg_bench = Some(records);
        } else {
            shared.string_bench = Some(records);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(pass && secs < 3600.0, format!("{} solved/100 at 2000 nodes; {secs:.0}s (limit 3600s)", parts.join("; ")))
}

// ---------------------------------------------------------------------------
// 7. Oracle-guided SMC

fn oracle_smc(_: &mut Shared) -> Outcome {
    let d = micro();
    let budget = Budget::nodes(2000);
    let (mut smc_solved, mut rollout_solved) = (0, 0);
    for seed in 0..20 {
        let task = sample_csg_task(&d, 2, &mut child_rng(700, seed));
        let spec = Arc::new(task.spec);
        let oracle = SubtreeOracle::new(&task.program, 1e-6);
        let r = smc(&d, &UniformPolicy, &oracle, Arc::clone(&spec), 64, d.horizon(), budget, &mut child_rng(701, seed));
        smc_solved += usize::from(r.solved);
        let r = rollouts(&d, &UniformPolicy, spec, None, budget, &mut child_rng(702, seed));
        rollout_solved += usize::from(r.solved);
    }
    Outcome::new(
        smc_solved >= 18 && rollout_solved < smc_solved,
        format!("SMC K=64 solved {smc_solved}/20 (need ≥18); uniform rollouts {rollout_solved}/20 at 2000 nodes each"),
    )
}

// ---------------------------------------------------------------------------
// 8. Anytime doubling

fn monotone(trace: &[replsynth::search::TracePoint]) -> bool {
    trace.windows(2).all(|w| w[0].nodes <= w[1].nodes && w[0].seconds <= w[1].seconds && w[0].quality <= w[1].quality)
}

fn anytime(shared: &mut Shared) -> Outcome {
    let d = micro();
    let sd = StringDomain::default();
    let (mut runs_ok, mut traces_ok, mut total) = (true, true, 0);
    let doubling = |runs: &[usize]| !runs.is_empty() && runs.iter().enumerate().all(|(i, &k)| k == 1 << i);
    for (i, task) in csg_suite(&d, 10, 808).into_iter().enumerate() {
        for s in [Strategy::Smc, Strategy::Beam, Strategy::BeamNovalue] {
            let r = run_strategy(&d, &UniformPolicy, &NoValue, Arc::clone(&task.spec), s, Budget::nodes(300), 16, i as u64);
            runs_ok &= doubling(&r.runs);
            traces_ok &= monotone(&r.trace);
            total += 1;
        }
    }
    for (i, task) in string_suite(&StringGenConfig::micro(), 10, 808).into_iter().enumerate() {
        for s in [Strategy::Smc, Strategy::Beam, Strategy::BeamNovalue] {
            let r = run_strategy(&sd, &UniformPolicy, &NoValue, Arc::clone(&task.spec), s, Budget::nodes(300), 16, i as u64);
            runs_ok &= doubling(&r.runs);
            traces_ok &= monotone(&r.trace);
            total += 1;
        }
    }
    // logged traces of the benchmark, when it ran
    let logged: Vec<&BenchRecord> = shared.csg_bench.iter().chain(&shared.string_bench).flatten().collect();
    let logged_ok = logged.iter().all(|r| monotone(&r.trace));
    Outcome::new(
        runs_ok && traces_ok && logged_ok,
        format!(
            "{total} searches: run sizes {} 1,2,4,…; best-so-far traces {}; {} logged bench traces {}",
            if runs_ok { "are" } else { "are NOT" },
            if traces_ok { "monotone" } else { "NOT monotone" },
            logged.len(),
            if logged_ok { "monotone" } else { "NOT monotone" }
        ),
    )
}

// ---------------------------------------------------------------------------
// 9. Branching factor of the 3D grammar

fn branching(_: &mut Shared) -> Outcome {
    let d = CsgDomain::new(CsgConfig::full_3d()).unwrap();
    let mut rng = rng_from_seed(909);
    let task = sample_csg_task(&d, 6, &mut rng);
    // the scope after placing every primitive, before any combination
    let mut state = initial_state(&d, Arc::new(task.spec));
    for a in task.actions.iter().filter(|a| a.operands.is_empty()) {
        state = apply_action(&d, &state, a).unwrap();
    }
    let scope = state.scope.len();
    let counted = count_legal_actions(&d, &state);
    let sizes: Vec<u64> = (0..=13).map(|s| action_space_size(Dim::Three, s)).collect();
    let (lo, hi) = (*sizes.iter().min().unwrap(), *sizes.iter().max().unwrap());
    let within = |x: u64| (1.3e5..=1.3e7).contains(&(x as f64));
    Outcome::new(
        within(lo) && within(hi) && counted == action_space_size(Dim::Three, scope),
        format!(
            "{lo}..{hi} actions for scopes of 0..13 entries; {counted} enumerated at a {scope}-entry scope \
             (reference 1.3e6, accepted 1.3e5..1.3e7)"
        ),
    )
}

// ---------------------------------------------------------------------------
// 10. Determinism of the benchmark

fn determinism(shared: &mut Shared) -> Outcome {
    let first_csg = match shared.csg_bench.take() {
        Some(r) => r,
        None => csg_bench(shared),
    };
    let first_str = match shared.string_bench.take() {
        Some(r) => r,
        None => string_bench(shared),
    };
    let same_csg = results_csv(&first_csg) == results_csv(&csg_bench(shared));
    let same_str = results_csv(&first_str) == results_csv(&string_bench(shared));
    Outcome::new(
        same_csg && same_str,
        format!(
            "repeated runs: csg2d-micro CSV {}, strings-micro CSV {}",
            if same_csg { "byte-identical" } else { "DIFFERS" },
            if same_str { "byte-identical" } else { "DIFFERS" }
        ),
    )
}

// ---------------------------------------------------------------------------

type Criterion = (usize, &'static str, fn(&mut Shared) -> Outcome);

const CRITERIA: [Criterion; 10] = [
    (1, "rasterizer and voxelizer match a point-membership oracle", rendering),
    (2, "generated episodes replay to reward 1", replay_soundness),
    (3, "long string programs reproduce their printed outputs", string_traces),
    (4, "loss gradients match finite differences", gradients),
    (5, "trained value tracks empirical success", value_semantics),
    (6, "SMC ≥ beam ≥ policy-only beam, SMC ≥ rollouts", ordering),
    (7, "oracle-valued SMC solves 2-object tasks", oracle_smc),
    (8, "anytime doubling and monotone traces", anytime),
    (9, "3D branching factor", branching),
    (10, "benchmark CSV is reproducible", determinism),
];

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let positional: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    let chosen: Vec<usize> = positional.iter().filter_map(|a| a.parse().ok()).collect();
    // a test-name filter that does not select this target skips it
    if chosen.is_empty() && positional.iter().any(|f| !"acceptance".contains(f.as_str())) {
        return ExitCode::SUCCESS;
    }
    let mut shared = Shared::default();
    let mut failed = 0;
    let suite_start = Instant::now();
    for (n, name, check) in CRITERIA {
        if !chosen.is_empty() && !chosen.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = check(&mut shared);
        let took = Duration::from_secs_f64(start.elapsed().as_secs_f64());
        failed += usize::from(!outcome.pass);
        println!(
            "[{n:>2}] {} {name}: {} ({:.1}s)",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail,
            took.as_secs_f64()
        );
    }
    println!("acceptance: {failed} failed, {:.0}s total", suite_start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
