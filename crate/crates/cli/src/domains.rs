//! Per-language hooks the commands need beyond the core `Domain` trait.

use std::path::Path;
use std::sync::Arc;

use rand::Rng as _;
use replsynth::bench::{csg_suite, csg_task, string_suite, string_task, BenchTask};
use replsynth::csg::{BitGrid, CsgDomain, Dim};
use replsynth::datagen::{load_episodes, sample_csg_episode, sample_string_episode, DomainKind};
use replsynth::learner::{Demo, InputKind};
use replsynth::mdp::{Domain, Rng, SynthState};
use replsynth::strings::{Example, StringDomain, StringSpec, TaskFile};

use crate::CliError;

pub type Sampler<D> = Box<dyn Fn(&mut Rng) -> Demo<D> + Sync>;

pub trait CliDomain: Domain + Sized {
    fn input_kind(&self) -> InputKind;

    /// Fresh demonstrations from the program generator.
    fn generator(&self, kind: DomainKind) -> Sampler<Self>;

    /// Parse a task file: one encoded spec, or the first task of a task list.
    fn read_task(&self, text: &str) -> Result<Self::Spec, CliError>;

    fn spec_from_examples(&self, examples: &[String]) -> Result<Self::Spec, CliError>;

    fn generated_suite(&self, kind: DomainKind, count: usize, seed: u64) -> Vec<BenchTask<Self>>;

    fn read_suite(&self, text: &str) -> Result<Vec<BenchTask<Self>>, CliError>;

    /// Human-readable rendering of a spec.
    fn show_spec(&self, spec: &Self::Spec) -> String;

    /// What the best program produces, for the terminal.
    fn show_output(&self, state: &SynthState<Self>) -> String;

    /// File contents for `--render`.
    fn render_file(&self, state: &SynthState<Self>) -> String;
}

/// Demonstrations drawn uniformly from a stored dataset.
pub fn dataset_sampler<D: Domain + 'static>(domain: &D, dir: &Path) -> Result<Sampler<D>, CliError> {
    let episodes = load_episodes(domain, &dir.join("episodes.jsonl"))?;
    if episodes.is_empty() {
        return Err(CliError::Runtime(format!("dataset {} holds no episodes", dir.display())));
    }
    Ok(Box::new(move |rng: &mut Rng| {
        let e = &episodes[rng.gen_range(0..episodes.len())];
        (Arc::clone(&e.spec), e.actions.clone())
    }))
}

/// Open a CSG domain; `max_objects` defaults to the domain's own bound.
pub fn open_csg(kind: DomainKind, max_objects: Option<usize>) -> Result<CsgDomain, CliError> {
    let base = kind.csg_config(1).expect("CSG domain kind");
    let default = if matches!(kind, DomainKind::Csg2d | DomainKind::Csg3d) { 13 } else { 2 };
    let config = base.with_max_objects(max_objects.unwrap_or(default));
    CsgDomain::new(config).map_err(|e| CliError::Usage(e.to_string()))
}

/// Text picture of a canvas; voxel grids show their projection along z.
pub fn ascii(grid: &BitGrid) -> String {
    let dims = grid.dims();
    let (w, h) = (dims[0], dims[1]);
    let depth = dims.get(2).copied().unwrap_or(1);
    let mut out = String::new();
    for y in (0..h).rev() {
        for x in 0..w {
            let on = (0..depth).any(|z| grid.get(x + w * (y + h * z)));
            out.push_str(if on { "██" } else { "··" });
        }
        out.push('\n');
    }
    out
}

impl CliDomain for CsgDomain {
    fn input_kind(&self) -> InputKind {
        let r = self.config().resolution;
        InputKind::Grid { dims: vec![r; self.config().dim.axes()] }
    }

    fn generator(&self, _kind: DomainKind) -> Sampler<Self> {
        let domain = self.clone();
        Box::new(move |rng: &mut Rng| {
            let s = sample_csg_episode(&domain, domain.config().max_objects, rng);
            (Arc::new(s.spec), s.actions)
        })
    }

    fn read_task(&self, text: &str) -> Result<BitGrid, CliError> {
        Ok(self.decode_spec(text.trim())?)
    }

    fn spec_from_examples(&self, _examples: &[String]) -> Result<BitGrid, CliError> {
        Err(CliError::Usage("--example applies to string domains; CSG tasks come from --task".into()))
    }

    fn generated_suite(&self, _kind: DomainKind, count: usize, seed: u64) -> Vec<BenchTask<Self>> {
        csg_suite(self, count, seed)
    }

    fn read_suite(&self, text: &str) -> Result<Vec<BenchTask<Self>>, CliError> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| Ok(csg_task(format!("csg-{i:04}"), self.decode_spec(l.trim())?)))
            .collect()
    }

    fn show_spec(&self, spec: &BitGrid) -> String {
        ascii(spec)
    }

    fn show_output(&self, state: &SynthState<Self>) -> String {
        match self.best_entry(&state.spec, &state.scope) {
            Some((i, _)) => ascii(&state.scope[i].canvas),
            None => "(empty scope)\n".into(),
        }
    }

    fn render_file(&self, state: &SynthState<Self>) -> String {
        let grid = match self.best_entry(&state.spec, &state.scope) {
            Some((i, _)) => (*state.scope[i].canvas).clone(),
            None => BitGrid::new(state.spec.dims()),
        };
        match self.config().dim {
            Dim::Two => grid.to_pgm().expect("2D canvas"),
            Dim::Three => grid.to_rle() + "\n",
        }
    }
}

fn parse_example(text: &str) -> Result<Example, CliError> {
    let (input, output) = text
        .split_once("=>")
        .ok_or_else(|| CliError::Usage(format!("example {text:?} must look like INPUT=>OUTPUT")))?;
    Ok(Example::new(input, output))
}

impl CliDomain for StringDomain {
    fn input_kind(&self) -> InputKind {
        InputKind::Text
    }

    fn generator(&self, kind: DomainKind) -> Sampler<Self> {
        let gen = kind.string_config().unwrap_or_default();
        Box::new(move |rng: &mut Rng| {
            let s = sample_string_episode(&gen, rng);
            (Arc::new(s.spec), s.actions)
        })
    }

    fn read_task(&self, text: &str) -> Result<StringSpec, CliError> {
        if let Ok(file) = TaskFile::from_json(text) {
            let task = file.tasks.first().ok_or_else(|| CliError::Runtime("task file lists no tasks".into()))?;
            return Ok(task.spec()?);
        }
        Ok(self.decode_spec(text.trim())?)
    }

    fn spec_from_examples(&self, examples: &[String]) -> Result<StringSpec, CliError> {
        let examples = examples.iter().map(|e| parse_example(e)).collect::<Result<Vec<_>, _>>()?;
        StringSpec::new(examples).map_err(|e| CliError::Usage(e.to_string()))
    }

    fn generated_suite(&self, kind: DomainKind, count: usize, seed: u64) -> Vec<BenchTask<Self>> {
        string_suite(&kind.string_config().unwrap_or_default(), count, seed)
    }

    fn read_suite(&self, text: &str) -> Result<Vec<BenchTask<Self>>, CliError> {
        let file = TaskFile::from_json(text)?;
        file.tasks.iter().map(|t| Ok(string_task(t.id.clone(), t.spec()?))).collect()
    }

    fn show_spec(&self, spec: &StringSpec) -> String {
        spec.examples.iter().map(|e| format!("{:?} => {:?}\n", e.input, e.output)).collect()
    }

    fn show_output(&self, state: &SynthState<Self>) -> String {
        self.render_file(state)
    }

    fn render_file(&self, state: &SynthState<Self>) -> String {
        state
            .spec
            .examples
            .iter()
            .zip(&state.scope.committed)
            .map(|(e, out)| format!("{:?} => {:?}\n", e.input, String::from_utf8_lossy(out)))
            .collect()
    }
}
