use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use replsynth::bench::{
    quality_vs_time, results_csv, run_bench, solved_vs_nodes, summarize, svg_plot, timing_csv, BenchConfig, Models,
};
use replsynth::datagen::{build_dataset, DomainKind, GenConfig};
use replsynth::learner::{load_model, LogRow, Model, ModelConfig, TrainConfig, Trainer};
use replsynth::mdp::{child_rng, replay, rng_from_seed, Domain, Policy, UniformPolicy, ValueFn};
use replsynth::search::{run_strategy, Budget, NoValue, SearchResult, Strategy, TracePoint};
use replsynth::strings::StringDomain;
use serde::Serialize;

use crate::domains::{dataset_sampler, open_csg, CliDomain};
use crate::{BenchArgs, CliError, DatagenArgs, DemoArgs, ModelSize, SynthArgs, TrainArgs};

macro_rules! with_domain {
    ($kind:expr, $max_objects:expr, |$d:ident| $body:expr) => {
        if $kind.is_csg() {
            let $d = open_csg($kind, $max_objects)?;
            $body
        } else {
            let $d = StringDomain::default();
            $body
        }
    };
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("{flag} is required")))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn is_micro(kind: DomainKind) -> bool {
    matches!(kind, DomainKind::Csg2dMicro | DomainKind::Csg3dMicro | DomainKind::StringsMicro)
}

fn timeout(kind: DomainKind, given: Option<f64>) -> Result<Duration, CliError> {
    let secs = given.unwrap_or(if is_micro(kind) { 10.0 } else { 120.0 });
    if !(secs > 0.0 && secs.is_finite()) {
        return Err(CliError::Usage(format!("--timeout must be positive, got {secs}")));
    }
    Ok(Duration::from_secs_f64(secs))
}

fn load<D: Domain>(domain: &D, path: Option<&Path>) -> Result<Option<Model>, CliError> {
    path.map(|p| load_model(domain, p).map_err(CliError::from)).transpose()
}

/// Policy and value for search: the checkpoint's networks, or a uniform
/// policy with no value when none is given.
fn search_models<'a, D: Domain>(model: Option<&'a Model>) -> (&'a dyn Policy<D>, &'a dyn ValueFn<D>) {
    match model {
        Some(m) => (m, m),
        None => (&UniformPolicy, &NoValue),
    }
}

pub fn datagen(a: DatagenArgs) -> Result<(), CliError> {
    let kind = required(a.domain, "--domain")?;
    let out = required(a.out, "--out")?;
    let mut config = GenConfig::new(kind, a.count.unwrap_or(1000), a.seed.unwrap_or(0));
    if let Some(n) = a.max_objects {
        config.max_objects = n;
    }
    if let Some(n) = a.max_expressions {
        config.max_expressions = n;
    }
    if let Some(n) = a.max_len {
        config.max_len = n;
    }
    let manifest = build_dataset(&config, &out)?;
    println!(
        "wrote {} {} episodes to {} (config {})",
        manifest.count,
        manifest.domain,
        out.join(&manifest.episodes_file).display(),
        &manifest.config_digest[..12]
    );
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<(), CliError> {
    let kind = required(a.domain, "--domain")?;
    with_domain!(kind, a.max_objects, |d| train_in(&d, kind, &a))
}

fn model_config(kind: DomainKind, size: Option<ModelSize>) -> ModelConfig {
    match size.unwrap_or(if is_micro(kind) { ModelSize::Small } else { ModelSize::Full }) {
        ModelSize::Tiny => ModelConfig::tiny(),
        ModelSize::Small => ModelConfig::small(),
        ModelSize::Full => ModelConfig::default(),
    }
}

fn train_in<D: CliDomain + 'static>(d: &D, kind: DomainKind, a: &TrainArgs) -> Result<(), CliError> {
    let out = required(a.out.clone(), "--out")?;
    let sample = match &a.data {
        Some(dir) => dataset_sampler(d, dir)?,
        None => d.generator(kind),
    };
    let resume = a.resume.unwrap_or(false);
    let mut trainer = if resume {
        let mut t = Trainer::load(d, &out)?;
        if let Some(n) = a.pretrain_steps {
            t.config.pretrain_steps = n;
        }
        if let Some(n) = a.rl_steps {
            t.config.rl_steps = n;
        }
        t
    } else {
        let defaults = TrainConfig::default();
        let config = TrainConfig {
            pretrain_steps: a.pretrain_steps.unwrap_or(defaults.pretrain_steps),
            rl_steps: a.rl_steps.unwrap_or(defaults.rl_steps),
            batch: a.batch.unwrap_or(defaults.batch),
            b1: a.b1.unwrap_or(defaults.b1),
            b2: a.b2.unwrap_or(defaults.b2),
            lr: a.lr.unwrap_or(defaults.lr),
            clip: a.clip.unwrap_or(defaults.clip),
            seed: a.seed.unwrap_or(defaults.seed),
            checkpoint_every: a.checkpoint_every.unwrap_or(defaults.checkpoint_every),
        };
        if config.batch == 0 || config.b1 == 0 || config.b2 == 0 {
            return Err(CliError::Usage("--batch, --b1 and --b2 must be positive".into()));
        }
        if !(config.lr > 0.0 && config.clip > 0.0) {
            return Err(CliError::Usage("--lr and --clip must be positive".into()));
        }
        let mut mc = model_config(kind, a.model);
        if a.no_repl.unwrap_or(false) {
            mc = mc.without_repl();
        }
        let model = Model::new(d.grammar(), d.input_kind(), mc, &mut rng_from_seed(config.seed));
        Trainer::new(model, config)
    };
    let log_path = a.log.clone().unwrap_or_else(|| {
        let mut p = out.clone().into_os_string();
        p.push(".log.csv");
        PathBuf::from(p)
    });
    let mut log = if resume && log_path.exists() {
        fs::OpenOptions::new().append(true).open(&log_path)?
    } else {
        let mut f = fs::File::create(&log_path)?;
        writeln!(f, "{}", LogRow::HEADER)?;
        f
    };
    let start = trainer.step;
    trainer.run(d, &*sample, a.until, &mut log, Some(&out))?;
    println!(
        "trained steps {start}..{} of {} ({} parameters); checkpoint {}, log {}",
        trainer.step,
        trainer.total_steps(),
        trainer.model.param_count(),
        out.display(),
        log_path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct Report<'a> {
    domain: &'a str,
    strategy: Strategy,
    program: String,
    solved: bool,
    quality: f64,
    nodes: u64,
    seconds: f64,
    runs: &'a [usize],
    trace: &'a [TracePoint],
}

fn report<D: CliDomain>(d: &D, strategy: Strategy, r: &SearchResult<D>, json: bool) {
    if json {
        let rep = Report {
            domain: d.name(),
            strategy,
            program: r.program(d),
            solved: r.solved,
            quality: r.best_quality,
            nodes: r.nodes_expanded,
            seconds: r.seconds,
            runs: &r.runs,
            trace: &r.trace,
        };
        println!("{}", serde_json::to_string(&rep).expect("report serializes"));
    } else {
        println!("program: {}", r.program(d));
        println!("solved: {}", r.solved);
        println!("quality: {:.6}", r.best_quality);
        println!("nodes: {}", r.nodes_expanded);
        println!("seconds: {:.3}", r.seconds);
        print!("{}", d.show_output(&r.best));
    }
}

pub fn synth(a: SynthArgs, norepl: bool) -> Result<(), CliError> {
    let kind = required(a.domain, "--domain")?;
    with_domain!(kind, a.max_objects, |d| synth_in(&d, kind, &a, norepl))
}

fn synth_in<D: CliDomain>(d: &D, kind: DomainKind, a: &SynthArgs, norepl: bool) -> Result<(), CliError> {
    let strategy = match (norepl, a.strategy) {
        (true, None | Some(Strategy::Norepl)) => Strategy::Norepl,
        (true, Some(s)) => return Err(CliError::Usage(format!("norepl decodes without the REPL; --strategy {s} is not allowed"))),
        (false, s) => s.unwrap_or(Strategy::Smc),
    };
    let budget = Budget { nodes: a.nodes, deadline: None }.with_timeout(timeout(kind, a.timeout)?);
    let spec = match (&a.task, &a.examples) {
        (Some(path), None) => d.read_task(&read_file(path)?)?,
        (None, Some(examples)) => d.spec_from_examples(examples)?,
        _ => return Err(CliError::Usage("give exactly one of --task or --example".into())),
    };
    let model = load(d, a.checkpoint.as_deref())?;
    match (&model, strategy) {
        (None, Strategy::Norepl) => return Err(CliError::Usage("norepl needs --checkpoint trained with --no-repl".into())),
        (Some(m), Strategy::Norepl) if m.config.repl => {
            return Err(CliError::Usage("checkpoint was trained with the REPL; retrain with --no-repl".into()))
        }
        (Some(m), s) if s != Strategy::Norepl && !m.config.repl => {
            return Err(CliError::Usage("checkpoint was trained without the REPL; use the norepl subcommand".into()))
        }
        (None, _) => eprintln!("note: no checkpoint given; searching with a uniform policy and no value"),
        _ => {}
    }
    let (policy, value) = search_models(model.as_ref());
    let r = run_strategy(d, policy, value, Arc::new(spec), strategy, budget, a.astar_m.unwrap_or(16), a.seed.unwrap_or(0));
    report(d, strategy, &r, a.json.unwrap_or(false));
    if let Some(path) = &a.render {
        write_file(path, &d.render_file(&r.best))?;
    }
    Ok(())
}

pub fn bench(a: BenchArgs) -> Result<(), CliError> {
    let kind = required(a.domain, "--domain")?;
    with_domain!(kind, a.max_objects, |d| bench_in(&d, kind, &a))
}

fn bench_in<D: CliDomain>(d: &D, kind: DomainKind, a: &BenchArgs) -> Result<(), CliError> {
    let out = required(a.out.clone(), "--out")?;
    let cap = timeout(kind, a.timeout)?;
    let tasks = match &a.suite {
        Some(path) => d.read_suite(&read_file(path)?)?,
        None => d.generated_suite(kind, a.tasks.unwrap_or(100), a.task_seed.unwrap_or(0)),
    };
    let model = load(d, a.checkpoint.as_deref())?;
    if model.as_ref().is_some_and(|m| !m.config.repl) {
        return Err(CliError::Usage("--checkpoint was trained without the REPL; pass it as --norepl-checkpoint".into()));
    }
    let norepl = load(d, a.norepl_checkpoint.as_deref())?;
    if norepl.as_ref().is_some_and(|m| m.config.repl) {
        return Err(CliError::Usage("--norepl-checkpoint was trained with the REPL".into()));
    }
    if model.is_none() {
        eprintln!("note: no checkpoint given; searching with a uniform policy and no value");
    }
    let strategies = a.strategies.clone().unwrap_or_else(|| Strategy::ALL.to_vec());
    if strategies.contains(&Strategy::Norepl) && norepl.is_none() {
        eprintln!("note: skipping norepl (no --norepl-checkpoint)");
    }
    let (policy, value) = search_models(model.as_ref());
    let models = Models { policy, value, norepl: norepl.as_ref().map(|m| m as &dyn Policy<D>) };
    let config = BenchConfig {
        strategies,
        nodes: a.nodes.unwrap_or(2000),
        timeout: Some(cap),
        astar_m: a.astar_m.unwrap_or(16),
        seed: a.seed.unwrap_or(0),
    };
    let records = run_bench(d, &models, &tasks, &config);

    fs::create_dir_all(&out)?;
    write_file(&out.join("results.csv"), &results_csv(&records))?;
    write_file(&out.join("timing.csv"), &timing_csv(&records))?;
    let title = format!("{} ({} tasks, {} nodes)", kind, tasks.len(), config.nodes);
    write_file(
        &out.join("solved_vs_nodes.svg"),
        &svg_plot(&title, "nodes expanded", "fraction solved", &solved_vs_nodes(&records)),
    )?;
    write_file(
        &out.join("quality_vs_time.svg"),
        &svg_plot(&title, "seconds", "mean best quality", &quality_vs_time(&records)),
    )?;
    let summary = summarize(&records);
    write_file(&out.join("summary.json"), &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"))?;
    println!("{:<14} {:>7} {:>9} {:>12} {:>10}", "strategy", "tasks", "solved", "mean quality", "mean nodes");
    for s in &summary {
        println!(
            "{:<14} {:>7} {:>8.1}% {:>12.4} {:>10.1}",
            s.strategy.name(),
            s.tasks,
            100.0 * s.solve_rate(),
            s.mean_quality,
            s.mean_nodes
        );
    }
    println!("results in {}", out.display());
    Ok(())
}

pub fn demo(a: DemoArgs) -> Result<(), CliError> {
    let kind = a.domain.unwrap_or(DomainKind::Csg2dMicro);
    with_domain!(kind, a.max_shapes, |d| demo_in(&d, kind, &a))
}

fn demo_in<D: CliDomain>(d: &D, kind: DomainKind, a: &DemoArgs) -> Result<(), CliError> {
    let model = load(d, a.checkpoint.as_deref())?;
    if model.as_ref().is_some_and(|m| !m.config.repl) {
        return Err(CliError::Usage("demo needs a checkpoint trained with the REPL".into()));
    }
    let (policy, value) = search_models(model.as_ref());
    let strategy = a.strategy.unwrap_or(Strategy::Smc);
    if strategy == Strategy::Norepl {
        return Err(CliError::Usage("demo runs REPL strategies; use the norepl subcommand".into()));
    }
    let sample = d.generator(kind);
    let seed = a.seed.unwrap_or(0);
    for i in 0..a.count.unwrap_or(3) {
        let (spec, actions) = sample(&mut child_rng(seed, i as u64));
        let states = replay(d, Arc::clone(&spec), &actions)?;
        let truth = states.last().expect("replay keeps the start state");
        println!("== scene {i}: {} ==", d.program_text(&spec, &truth.scope));
        print!("{}", d.show_spec(&spec));
        let budget = Budget { nodes: a.nodes, deadline: None }.with_timeout(timeout(kind, a.timeout)?);
        let r = run_strategy(d, policy, value, spec, strategy, budget, 16, seed.wrapping_add(i as u64));
        println!("-- {strategy}: solved={} quality={:.4} nodes={} --", r.solved, r.best_quality, r.nodes_expanded);
        println!("{}", r.program(d));
        print!("{}", d.show_output(&r.best));
    }
    Ok(())
}
