//! Benchmark driver: task suites, per-task records, CSV output and SVG plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csg::{BitGrid, CsgDomain};
use crate::datagen::{sample_csg_episode, sample_string_episode, StringGenConfig};
use crate::mdp::{child_rng, Domain, Policy, ValueFn};
use crate::search::{run_strategy, Budget, Strategy, TracePoint};
use crate::strings::{StringDomain, StringSpec};

/// One benchmark problem.
pub struct BenchTask<D: Domain> {
    pub id: String,
    pub spec: Arc<D::Spec>,
}

impl<D: Domain> Clone for BenchTask<D> {
    fn clone(&self) -> Self {
        BenchTask { id: self.id.clone(), spec: Arc::clone(&self.spec) }
    }
}

/// Seeded CSG scenes; task `i` depends only on `(seed, i)`.
pub fn csg_suite(domain: &CsgDomain, count: usize, seed: u64) -> Vec<BenchTask<CsgDomain>> {
    let max_objects = domain.config().max_objects;
    (0..count)
        .map(|i| {
            let s = sample_csg_episode(domain, max_objects, &mut child_rng(seed, i as u64));
            BenchTask { id: format!("csg-{i:04}"), spec: Arc::new(s.spec) }
        })
        .collect()
}

/// Seeded string-editing tasks drawn from the program generator.
pub fn string_suite(config: &StringGenConfig, count: usize, seed: u64) -> Vec<BenchTask<StringDomain>> {
    (0..count)
        .map(|i| {
            let s = sample_string_episode(config, &mut child_rng(seed, i as u64));
            BenchTask { id: format!("str-{i:04}"), spec: Arc::new(s.spec) }
        })
        .collect()
}

pub fn csg_task(id: impl Into<String>, spec: BitGrid) -> BenchTask<CsgDomain> {
    BenchTask { id: id.into(), spec: Arc::new(spec) }
}

pub fn string_task(id: impl Into<String>, spec: StringSpec) -> BenchTask<StringDomain> {
    BenchTask { id: id.into(), spec: Arc::new(spec) }
}

/// Result of one strategy on one task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub task_id: String,
    pub strategy: Strategy,
    pub quality: f64,
    pub solved: bool,
    pub nodes: u64,
    pub seconds: f64,
    pub program: String,
    pub trace: Vec<TracePoint>,
}

/// Networks available to the benchmark. `norepl` is the policy trained
/// without execution results; without it the no-REPL strategy is skipped.
pub struct Models<'a, D: Domain> {
    pub policy: &'a dyn Policy<D>,
    pub value: &'a dyn ValueFn<D>,
    pub norepl: Option<&'a dyn Policy<D>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub strategies: Vec<Strategy>,
    /// Node budget per task and strategy.
    pub nodes: u64,
    /// Wall-clock cap per task and strategy. Hitting it makes the output
    /// depend on machine speed.
    pub timeout: Option<Duration>,
    pub astar_m: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { strategies: Strategy::ALL.to_vec(), nodes: 2000, timeout: None, astar_m: 16, seed: 0 }
    }
}

/// Run every configured strategy on every task. Tasks run on the worker
/// pool, each with its own seed; records come back in task-major order.
pub fn run_bench<D: Domain>(
    domain: &D,
    models: &Models<'_, D>,
    tasks: &[BenchTask<D>],
    config: &BenchConfig,
) -> Vec<BenchRecord> {
    let per_task: Vec<Vec<BenchRecord>> = tasks
        .par_iter()
        .enumerate()
        .map(|(i, task)| {
            let mut out = Vec::new();
            for &strategy in &config.strategies {
                let policy = match strategy {
                    Strategy::Norepl => match models.norepl {
                        Some(p) => p,
                        None => continue,
                    },
                    _ => models.policy,
                };
                let mut budget = Budget::nodes(config.nodes);
                if let Some(t) = config.timeout {
                    budget = budget.with_timeout(t);
                }
                let seed = task_seed(config.seed, i);
                let r = run_strategy(domain, policy, models.value, Arc::clone(&task.spec), strategy, budget, config.astar_m, seed);
                out.push(BenchRecord {
                    task_id: task.id.clone(),
                    strategy,
                    quality: r.best_quality,
                    solved: r.solved,
                    nodes: r.nodes_expanded,
                    seconds: r.seconds,
                    program: r.program(domain),
                    trace: r.trace,
                });
            }
            out
        })
        .collect();
    per_task.into_iter().flatten().collect()
}

fn task_seed(seed: u64, task: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(task as u64)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const RESULTS_HEADER: &str = "task_id,strategy,quality,solved,nodes,program,trace";
pub const TIMING_HEADER: &str = "task_id,strategy,seconds,trace";

/// Machine-independent results: no wall-clock fields, so repeated runs
/// with a node budget produce identical bytes. The trace column lists
/// `nodes:quality` improvements separated by `;`.
pub fn results_csv(records: &[BenchRecord]) -> String {
    let mut s = String::from(RESULTS_HEADER);
    s.push('\n');
    for r in records {
        let trace: Vec<String> = r.trace.iter().map(|p| format!("{}:{:.6}", p.nodes, p.quality)).collect();
        let _ = writeln!(
            s,
            "{},{},{:.6},{},{},{},{}",
            csv_field(&r.task_id),
            r.strategy,
            r.quality,
            r.solved,
            r.nodes,
            csv_field(&r.program),
            trace.join(";")
        );
    }
    s
}

/// Wall-clock companion to [`results_csv`]; trace entries are `seconds:quality`.
pub fn timing_csv(records: &[BenchRecord]) -> String {
    let mut s = String::from(TIMING_HEADER);
    s.push('\n');
    for r in records {
        let trace: Vec<String> = r.trace.iter().map(|p| format!("{:.6}:{:.6}", p.seconds, p.quality)).collect();
        let _ = writeln!(s, "{},{},{:.6},{}", csv_field(&r.task_id), r.strategy, r.seconds, trace.join(";"));
    }
    s
}

/// Per-strategy totals.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub tasks: usize,
    pub solved: usize,
    pub mean_quality: f64,
    pub mean_nodes: f64,
}

impl StrategySummary {
    pub fn solve_rate(&self) -> f64 {
        if self.tasks == 0 {
            0.0
        } else {
            self.solved as f64 / self.tasks as f64
        }
    }
}

pub fn summarize(records: &[BenchRecord]) -> Vec<StrategySummary> {
    let mut by: BTreeMap<String, (Strategy, Vec<&BenchRecord>)> = BTreeMap::new();
    for r in records {
        by.entry(r.strategy.name().to_string()).or_insert_with(|| (r.strategy, Vec::new())).1.push(r);
    }
    let mut out: Vec<StrategySummary> = by
        .into_values()
        .map(|(strategy, rs)| {
            let n = rs.len() as f64;
            StrategySummary {
                strategy,
                tasks: rs.len(),
                solved: rs.iter().filter(|r| r.solved).count(),
                mean_quality: rs.iter().map(|r| r.quality).sum::<f64>() / n,
                mean_nodes: rs.iter().map(|r| r.nodes as f64).sum::<f64>() / n,
            }
        })
        .collect();
    out.sort_by_key(|s| Strategy::ALL.iter().position(|x| *x == s.strategy));
    out
}

fn by_strategy(records: &[BenchRecord]) -> Vec<(Strategy, Vec<&BenchRecord>)> {
    let mut out: Vec<(Strategy, Vec<&BenchRecord>)> = Vec::new();
    for s in Strategy::ALL {
        let rs: Vec<&BenchRecord> = records.iter().filter(|r| r.strategy == s).collect();
        if !rs.is_empty() {
            out.push((s, rs));
        }
    }
    out
}

/// Best quality reached at or before `at`, read through `key`.
fn quality_at(trace: &[TracePoint], at: f64, key: impl Fn(&TracePoint) -> f64) -> f64 {
    trace.iter().take_while(|p| key(p) <= at).last().or(trace.first()).map_or(0.0, |p| p.quality)
}

/// Log-spaced sample points covering `[lo, hi]`.
fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.max(1e-9).ln(), hi.max(lo * 1.0001).ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Fraction of tasks solved within `x` nodes, per strategy.
pub fn solved_vs_nodes(records: &[BenchRecord]) -> Vec<(String, Vec<(f64, f64)>)> {
    let max = records.iter().map(|r| r.nodes).max().unwrap_or(1).max(2) as f64;
    let grid = log_grid(1.0, max, 40);
    by_strategy(records)
        .into_iter()
        .map(|(s, rs)| {
            let pts = grid
                .iter()
                .map(|&x| {
                    let n = rs.iter().filter(|r| r.solved && r.nodes as f64 <= x).count();
                    (x, n as f64 / rs.len() as f64)
                })
                .collect();
            (s.name().to_string(), pts)
        })
        .collect()
}

/// Mean best-so-far quality over tasks as a function of elapsed seconds.
pub fn quality_vs_time(records: &[BenchRecord]) -> Vec<(String, Vec<(f64, f64)>)> {
    let times = records.iter().flat_map(|r| r.trace.iter().map(|p| p.seconds).chain([r.seconds]));
    let max = times.clone().fold(1e-6, f64::max);
    let min = times.filter(|&t| t > 0.0).fold(max, f64::min).min(max / 10.0);
    let grid = log_grid(min, max, 40);
    by_strategy(records)
        .into_iter()
        .map(|(s, rs)| {
            let pts = grid
                .iter()
                .map(|&t| {
                    let q: f64 = rs.iter().map(|r| quality_at(&r.trace, t, |p| p.seconds)).sum();
                    (t, q / rs.len() as f64)
                })
                .collect();
            (s.name().to_string(), pts)
        })
        .collect()
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#7f7f7f"];

/// A minimal line chart with a logarithmic x axis.
pub fn svg_plot(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let (w, h, left, right, top, bottom) = (640.0, 420.0, 70.0, 150.0, 40.0, 50.0);
    let pts = series.iter().flat_map(|(_, p)| p.iter());
    let x_lo = pts.clone().map(|p| p.0).fold(f64::INFINITY, f64::min).max(1e-9);
    let x_hi = pts.clone().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).max(x_lo * 10.0);
    let mut y_lo = pts.clone().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let mut y_hi = pts.map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if !y_lo.is_finite() {
        (y_lo, y_hi) = (0.0, 1.0);
    }
    y_lo = y_lo.min(0.0);
    if y_hi <= y_lo {
        y_hi = y_lo + 1.0;
    }
    let (pw, ph) = (w - left - right, h - top - bottom);
    let sx = |x: f64| left + (x.max(x_lo).ln() - x_lo.ln()) / (x_hi.ln() - x_lo.ln()) * pw;
    let sy = |y: f64| top + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, left + pw / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    // decades on x
    let mut decade = 10f64.powf(x_lo.log10().floor());
    while decade <= x_hi * 1.0001 {
        if decade >= x_lo * 0.9999 {
            let x = sx(decade);
            let _ = writeln!(s, r##"<line x1="{x:.1}" y1="{top}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/>"##, top + ph);
            let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, top + ph + 16.0, tick(decade));
        }
        decade *= 10.0;
    }
    for i in 0..=4 {
        let v = y_lo + (y_hi - y_lo) * i as f64 / 4.0;
        let y = sy(v);
        let _ = writeln!(s, r##"<line x1="{left}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##, left + pw);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"#, left - 6.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, left + pw / 2.0, h - 12.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(y_label)
    );
    for (i, (name, p)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = p.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, path.join(" "));
        let ly = top + 14.0 + 18.0 * i as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if (1e-3..1e5).contains(&v) {
        format!("{v}")
    } else {
        format!("{v:.0e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(task: &str, strategy: Strategy, solved: bool, nodes: u64, trace: &[(f64, u64, f64)]) -> BenchRecord {
        BenchRecord {
            task_id: task.into(),
            strategy,
            quality: trace.last().unwrap().2,
            solved,
            nodes,
            seconds: trace.last().unwrap().0,
            program: "Circle(4, 8, 8)".into(),
            trace: trace.iter().map(|&(seconds, nodes, quality)| TracePoint { seconds, nodes, quality }).collect(),
        }
    }

    #[test]
    fn csv_quotes_programs_and_omits_time() {
        let r = record("t0", Strategy::Smc, true, 12, &[(0.0, 0, 0.0), (0.25, 12, 1.0)]);
        let csv = results_csv(&[r.clone()]);
        assert_eq!(csv.lines().nth(1).unwrap(), "t0,smc,1.000000,true,12,\"Circle(4, 8, 8)\",0:0.000000;12:1.000000");
        assert!(!csv.contains("0.25"));
        assert!(timing_csv(&[r]).contains("0.250000"));
    }

    #[test]
    fn curves_and_summary() {
        let rs = vec![
            record("a", Strategy::Smc, true, 10, &[(0.0, 0, 0.0), (0.1, 10, 1.0)]),
            record("b", Strategy::Smc, false, 100, &[(0.0, 0, 0.2), (0.5, 40, 0.5)]),
            record("a", Strategy::Rollout, false, 100, &[(0.0, 0, 0.0)]),
        ];
        let sum = summarize(&rs);
        assert_eq!(sum[0].strategy, Strategy::Smc);
        assert_eq!(sum[0].solved, 1);
        assert!((sum[0].mean_quality - 0.75).abs() < 1e-12);
        let curves = solved_vs_nodes(&rs);
        let smc = &curves[0].1;
        assert_eq!(smc.first().unwrap().1, 0.0);
        assert_eq!(smc.last().unwrap().1, 0.5);
        assert!(smc.windows(2).all(|w| w[1].1 >= w[0].1));
        let q = quality_vs_time(&rs);
        assert!(q[0].1.windows(2).all(|w| w[1].1 >= w[0].1));
        let svg = svg_plot("t", "nodes", "solved", &curves);
        assert!(svg.starts_with("<svg") && svg.contains("polyline") && svg.trim_end().ends_with("</svg>"));
    }
}
