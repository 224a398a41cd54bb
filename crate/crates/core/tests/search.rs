use std::sync::Arc;

use replsynth::csg::{CsgConfig, CsgDomain};
use replsynth::datagen::{sample_csg_task, sample_string_episode, StringGenConfig};
use replsynth::mdp::{rng_from_seed, Domain, ReplayPolicy, SynthState, UniformPolicy, ValueFn};
use replsynth::search::{
    astar, beam, norepl_decode, rollouts, run_strategy, smc, systematic_resample, Budget, SearchResult, Strategy,
    SubtreeOracle,
};
use replsynth::strings::StringDomain;

struct Flat;

impl<D: Domain> ValueFn<D> for Flat {
    fn log_value(&self, _: &D, _: &SynthState<D>) -> f64 {
        0.0
    }
}

fn micro() -> CsgDomain {
    CsgDomain::new(CsgConfig::micro_2d()).unwrap()
}

fn monotone<D: Domain>(r: &SearchResult<D>) -> bool {
    r.trace.windows(2).all(|w| w[1].quality >= w[0].quality && w[1].nodes >= w[0].nodes)
}

#[test]
fn resampling_never_draws_dead_particles() {
    let mut rng = rng_from_seed(3);
    let w = [f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY, (0.5f64).ln()];
    for _ in 0..200 {
        let idx = systematic_resample(&w, 7, &mut rng).unwrap();
        assert_eq!(idx.len(), 7);
        assert!(idx.iter().all(|&i| i == 1 || i == 3));
    }
    assert!(systematic_resample(&[f64::NEG_INFINITY; 3], 4, &mut rng).is_none());
}

#[test]
fn resampling_counts_track_weights() {
    let mut rng = rng_from_seed(4);
    let w: Vec<f64> = [1.0f64, 2.0, 3.0, 4.0].iter().map(|x| x.ln()).collect();
    let mut counts = [0usize; 4];
    for _ in 0..500 {
        for i in systematic_resample(&w, 10, &mut rng).unwrap() {
            counts[i] += 1;
        }
    }
    // systematic resampling gives each index floor or ceil of k * w_i
    for (i, c) in counts.iter().enumerate() {
        let expect = 500.0 * (i + 1) as f64;
        assert!((*c as f64 - expect).abs() <= 500.0, "index {i}: {c} vs {expect}");
    }
    let single = systematic_resample(&w, 10, &mut rng).unwrap();
    for (i, share) in [1usize, 2, 3, 4].iter().enumerate() {
        let n = single.iter().filter(|&&j| j == i).count();
        assert!(n == *share || n == share - 1 || n == share + 1);
    }
}

#[test]
fn replayed_demonstration_is_found_by_every_strategy() {
    let d = micro();
    let mut rng = rng_from_seed(11);
    let sample = sample_csg_task(&d, 2, &mut rng);
    let spec = Arc::new(sample.spec.clone());
    let policy = ReplayPolicy { actions: sample.actions.clone() };
    let n = sample.actions.len() as u64;

    let r = smc(&d, &policy, &Flat, Arc::clone(&spec), 1, d.horizon(), Budget::unlimited(), &mut rng);
    assert!(r.solved);
    assert_eq!(r.nodes_expanded, n);

    let r = beam(&d, &policy, Some(&Flat), Arc::clone(&spec), 4, d.horizon(), Budget::unlimited());
    assert!(r.solved);
    assert_eq!(r.nodes_expanded, n);

    let r = astar(&d, &policy, &Flat, Arc::clone(&spec), 16, Budget::nodes(100));
    assert!(r.solved);
    assert_eq!(r.nodes_expanded, n);

    let r = rollouts(&d, &policy, Arc::clone(&spec), Some(1), Budget::unlimited(), &mut rng);
    assert!(r.solved);

    // only the final check of each complete candidate is charged; every
    // single-entry prefix is itself a complete program
    let r = norepl_decode(&d, &policy, Arc::clone(&spec), 4, Budget::unlimited());
    assert!(r.solved);
    assert!(r.nodes_expanded <= n, "{} checks for {n} steps", r.nodes_expanded);
}

#[test]
fn node_budget_is_never_exceeded() {
    let d = micro();
    let mut rng = rng_from_seed(12);
    let spec = Arc::new(sample_csg_task(&d, 2, &mut rng).spec);
    for strategy in Strategy::ALL {
        for budget in [1u64, 7, 60] {
            let r = run_strategy(&d, &UniformPolicy, &Flat, Arc::clone(&spec), strategy, Budget::nodes(budget), 16, 5);
            assert!(r.nodes_expanded <= budget, "{strategy}: {} > {budget}", r.nodes_expanded);
            assert!(monotone(&r), "{strategy}");
        }
    }
}

#[test]
fn strategies_are_deterministic_given_a_seed() {
    let d = micro();
    let mut rng = rng_from_seed(13);
    let spec = Arc::new(sample_csg_task(&d, 2, &mut rng).spec);
    for strategy in Strategy::ALL {
        let run = || run_strategy(&d, &UniformPolicy, &Flat, Arc::clone(&spec), strategy, Budget::nodes(300), 16, 9);
        let (a, b) = (run(), run());
        assert_eq!(a.nodes_expanded, b.nodes_expanded, "{strategy}");
        assert_eq!(a.program(&d), b.program(&d), "{strategy}");
        assert_eq!(a.runs, b.runs);
        let qa: Vec<(u64, f64)> = a.trace.iter().map(|p| (p.nodes, p.quality)).collect();
        let qb: Vec<(u64, f64)> = b.trace.iter().map(|p| (p.nodes, p.quality)).collect();
        assert_eq!(qa, qb, "{strategy}");
    }
}

#[test]
fn anytime_doubles_population_and_keeps_best() {
    let d = micro();
    let mut rng = rng_from_seed(14);
    let spec = Arc::new(sample_csg_task(&d, 2, &mut rng).spec);
    let oracle_free = Flat;
    for strategy in [Strategy::Smc, Strategy::Beam, Strategy::BeamNovalue] {
        let r = run_strategy(&d, &UniformPolicy, &oracle_free, Arc::clone(&spec), strategy, Budget::nodes(2000), 16, 1);
        assert!(!r.runs.is_empty());
        for (i, k) in r.runs.iter().enumerate() {
            assert_eq!(*k, 1 << i, "{strategy}: {:?}", r.runs);
        }
        assert!(monotone(&r));
        if !r.solved {
            assert!(r.exhausted);
        }
    }
}

#[test]
fn oracle_value_guides_smc_to_the_target() {
    let d = micro();
    let mut solved = 0;
    for seed in 0..10 {
        let mut rng = rng_from_seed(100 + seed);
        let sample = sample_csg_task(&d, 2, &mut rng);
        let oracle = SubtreeOracle::new(&sample.program, 1e-6);
        let r = smc(&d, &UniformPolicy, &oracle, Arc::new(sample.spec), 64, d.horizon(), Budget::nodes(4000), &mut rng);
        solved += r.solved as usize;
    }
    assert!(solved >= 8, "solved {solved}/10");
}

#[test]
fn astar_with_perfect_guidance_walks_straight_to_the_goal() {
    let d = micro();
    let mut rng = rng_from_seed(15);
    let sample = sample_csg_task(&d, 1, &mut rng);
    let oracle = SubtreeOracle::new(&sample.program, 1e-9);
    let policy = ReplayPolicy { actions: sample.actions.clone() };
    let r = astar(&d, &policy, &oracle, Arc::new(sample.spec), 16, Budget::nodes(50));
    assert!(r.solved);
    assert_eq!(r.nodes_expanded, sample.actions.len() as u64);
}

#[test]
fn string_search_reports_levenshtein_quality() {
    let d = StringDomain::default();
    let mut rng = rng_from_seed(16);
    let sample = sample_string_episode(&StringGenConfig::micro(), &mut rng);
    let spec = Arc::new(sample.spec);
    let r = run_strategy(&d, &UniformPolicy, &Flat, Arc::clone(&spec), Strategy::Smc, Budget::nodes(200), 16, 2);
    assert!(r.best_quality <= 0.0);
    assert!(monotone(&r));
    let policy = ReplayPolicy { actions: sample.actions };
    let r = run_strategy(&d, &policy, &Flat, spec, Strategy::Beam, Budget::nodes(1000), 16, 2);
    assert!(r.solved);
    assert_eq!(r.best_quality, 0.0);
}

#[test]
fn strategy_names_round_trip() {
    for s in Strategy::ALL {
        assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
    }
    assert!("greedy".parse::<Strategy>().is_err());
}
