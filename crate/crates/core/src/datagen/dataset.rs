//! Persisted episode streams: one trajectory record per line plus a manifest.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::csg::sample_csg_episode;
use super::strings::{sample_string_episode, StringGenConfig};
use crate::csg::{CsgConfig, CsgDomain};
use crate::mdp::{child_rng, Action, Domain, MdpError, TrajectoryRecord};
use crate::strings::StringDomain;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("i/o failure on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// The language instances the tools know about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    Csg2d,
    Csg3d,
    Csg2dMicro,
    Csg3dMicro,
    Strings,
    StringsMicro,
}

impl DomainKind {
    pub const ALL: [DomainKind; 6] = [
        DomainKind::Csg2d,
        DomainKind::Csg3d,
        DomainKind::Csg2dMicro,
        DomainKind::Csg3dMicro,
        DomainKind::Strings,
        DomainKind::StringsMicro,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Csg2d => "csg2d",
            DomainKind::Csg3d => "csg3d",
            DomainKind::Csg2dMicro => "csg2d-micro",
            DomainKind::Csg3dMicro => "csg3d-micro",
            DomainKind::Strings => "strings",
            DomainKind::StringsMicro => "strings-micro",
        }
    }

    pub fn is_csg(self) -> bool {
        !matches!(self, DomainKind::Strings | DomainKind::StringsMicro)
    }

    /// CSG configuration with the given object bound.
    pub fn csg_config(self, max_objects: usize) -> Option<CsgConfig> {
        let cfg = match self {
            DomainKind::Csg2d => CsgConfig::full_2d(),
            DomainKind::Csg3d => CsgConfig::full_3d(),
            DomainKind::Csg2dMicro => CsgConfig::micro_2d(),
            DomainKind::Csg3dMicro => CsgConfig::micro_3d(),
            _ => return None,
        };
        Some(cfg.with_max_objects(max_objects))
    }

    pub fn string_config(self) -> Option<StringGenConfig> {
        match self {
            DomainKind::Strings => Some(StringGenConfig::default()),
            DomainKind::StringsMicro => Some(StringGenConfig::micro()),
            _ => None,
        }
    }
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DomainKind {
    type Err = DatagenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DomainKind::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| DatagenError::Invalid(format!("unknown domain {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenConfig {
    pub domain: DomainKind,
    /// CSG only: object count is uniform over 1..=max_objects.
    pub max_objects: usize,
    /// Strings only.
    pub max_expressions: usize,
    pub max_len: usize,
    pub count: usize,
    pub seed: u64,
}

impl GenConfig {
    pub fn new(domain: DomainKind, count: usize, seed: u64) -> Self {
        let strings = domain.string_config().unwrap_or_default();
        let max_objects = match domain {
            DomainKind::Csg2dMicro | DomainKind::Csg3dMicro => 2,
            _ => 13,
        };
        GenConfig {
            domain,
            max_objects,
            max_expressions: strings.max_expressions,
            max_len: strings.max_len,
            count,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.max_objects == 0 || self.max_expressions == 0 || self.max_len == 0 {
            return Err(DatagenError::Invalid("bounds must be positive".into()));
        }
        if self.max_len > crate::strings::MAX_STRING_LEN {
            return Err(DatagenError::Invalid(format!("string length cap is {}", crate::strings::MAX_STRING_LEN)));
        }
        Ok(())
    }

    pub fn string_gen(&self) -> StringGenConfig {
        let base = self.domain.string_config().unwrap_or_default();
        StringGenConfig { max_expressions: self.max_expressions, max_len: self.max_len, ..base }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub domain: DomainKind,
    pub config_digest: String,
    pub grammar_fingerprint: String,
    pub count: usize,
    pub episodes_file: String,
    pub config: GenConfig,
}

/// A spec paired with a ground-truth action sequence reaching reward 1.
pub struct Episode<D: Domain> {
    pub spec_id: String,
    pub spec: Arc<D::Spec>,
    pub actions: Vec<Action>,
}

impl<D: Domain> Clone for Episode<D> {
    fn clone(&self) -> Self {
        Episode { spec_id: self.spec_id.clone(), spec: Arc::clone(&self.spec), actions: self.actions.clone() }
    }
}

impl<D: Domain> fmt::Debug for Episode<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Episode").field("spec_id", &self.spec_id).field("actions", &self.actions.len()).finish()
    }
}

impl<D: Domain> Episode<D> {
    pub fn to_record(&self, domain: &D) -> TrajectoryRecord {
        TrajectoryRecord {
            spec_id: self.spec_id.clone(),
            spec: Some(domain.encode_spec(&self.spec)),
            actions: self.actions.iter().map(|a| domain.format_action(a)).collect(),
            reward: 1,
        }
    }

    pub fn from_record(domain: &D, record: &TrajectoryRecord) -> Result<Self, MdpError> {
        let spec = record
            .spec
            .as_deref()
            .ok_or_else(|| MdpError::Parse(format!("record {} has no spec", record.spec_id)))?;
        Ok(Episode {
            spec_id: record.spec_id.clone(),
            spec: Arc::new(domain.decode_spec(spec)?),
            actions: record.parse_actions(domain)?,
        })
    }
}

/// Episodes `0..count` of a CSG stream; episode `i` uses child stream `i`.
pub fn csg_episodes(domain: &CsgDomain, max_objects: usize, range: std::ops::Range<usize>, seed: u64) -> Vec<Episode<CsgDomain>> {
    range
        .into_par_iter()
        .map(|i| {
            let mut rng = child_rng(seed, i as u64);
            let s = sample_csg_episode(domain, max_objects, &mut rng);
            Episode { spec_id: format!("{}-{i}", domain.name()), spec: Arc::new(s.spec), actions: s.actions }
        })
        .collect()
}

pub fn string_episodes(config: &StringGenConfig, range: std::ops::Range<usize>, seed: u64) -> Vec<Episode<StringDomain>> {
    range
        .into_par_iter()
        .map(|i| {
            let mut rng = child_rng(seed, i as u64);
            let s = sample_string_episode(config, &mut rng);
            Episode { spec_id: format!("strings-{i}"), spec: Arc::new(s.spec), actions: s.actions }
        })
        .collect()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatagenError + '_ {
    move |source| DatagenError::Io { path: path.to_path_buf(), source }
}

fn write_records(path: &Path, records: impl Iterator<Item = TrajectoryRecord>) -> Result<(), DatagenError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for r in records {
        writeln!(w, "{}", r.to_line()).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Generate `config.count` episodes into `out_dir/episodes.jsonl` and write
/// `out_dir/manifest.json`. Output bytes depend only on the configuration.
pub fn build_dataset(config: &GenConfig, out_dir: &Path) -> Result<Manifest, DatagenError> {
    config.validate()?;
    if !out_dir.is_dir() {
        return Err(DatagenError::Io {
            path: out_dir.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist"),
        });
    }
    let episodes_path = out_dir.join("episodes.jsonl");
    let fingerprint = if let Some(cfg) = config.domain.csg_config(config.max_objects) {
        let domain = CsgDomain::new(cfg).map_err(|e| DatagenError::Invalid(e.to_string()))?;
        let episodes = csg_episodes(&domain, config.max_objects, 0..config.count, config.seed);
        write_records(&episodes_path, episodes.iter().map(|e| e.to_record(&domain)))?;
        domain.grammar().fingerprint()
    } else {
        let domain = StringDomain::default();
        let episodes = string_episodes(&config.string_gen(), 0..config.count, config.seed);
        write_records(&episodes_path, episodes.iter().map(|e| e.to_record(&domain)))?;
        domain.grammar().fingerprint()
    };
    let manifest = Manifest {
        domain: config.domain,
        config_digest: config.digest(),
        grammar_fingerprint: fingerprint,
        count: config.count,
        episodes_file: "episodes.jsonl".into(),
        config: config.clone(),
    };
    let manifest_path = out_dir.join("manifest.json");
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n")
        .map_err(io_err(&manifest_path))?;
    Ok(manifest)
}

/// Read every episode of a trajectory file.
pub fn load_episodes<D: Domain>(domain: &D, path: &Path) -> Result<Vec<Episode<D>>, DatagenError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(Episode::from_record(domain, &TrajectoryRecord::from_line(&line)?)?);
    }
    Ok(out)
}
