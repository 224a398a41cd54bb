//! Named parameter tensors, gradient buffers, Adam and the checkpoint container.

use std::io::{Read, Write};

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::mdp::Rng;

pub type ParamId = usize;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("grammar fingerprint mismatch: checkpoint {found}, domain {expected}")]
    Fingerprint { expected: String, found: String },
    #[error("tensor mismatch: {0}")]
    Tensor(String),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    pub tensors: Vec<Tensor>,
}

#[derive(Clone, Copy, Debug)]
pub enum Init {
    Zeros,
    /// Gaussian with standard deviation sqrt(2 / fan_in).
    He { fan_in: usize },
    Normal(f64),
}

impl ParamStore {
    pub fn add(&mut self, name: &str, shape: &[usize], init: Init, rng: &mut Rng) -> ParamId {
        let len = shape.iter().product();
        let data = match init {
            Init::Zeros => vec![0.0; len],
            Init::He { fan_in } => {
                let dist = Normal::new(0.0, (2.0 / fan_in.max(1) as f64).sqrt()).expect("finite std");
                (0..len).map(|_| dist.sample(rng)).collect()
            }
            Init::Normal(std) => {
                let dist = Normal::new(0.0, std).expect("finite std");
                (0..len).map(|_| dist.sample(rng)).collect()
            }
        };
        self.tensors.push(Tensor { name: name.into(), shape: shape.to_vec(), data });
        self.tensors.len() - 1
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.tensors[id].data
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Copy values from `other` tensor by tensor, checking names and shapes.
    pub fn load_from(&mut self, other: &ParamStore) -> Result<(), CheckpointError> {
        if self.tensors.len() != other.tensors.len() {
            return Err(CheckpointError::Tensor(format!(
                "expected {} tensors, found {}",
                self.tensors.len(),
                other.tensors.len()
            )));
        }
        for (mine, theirs) in self.tensors.iter_mut().zip(&other.tensors) {
            if mine.name != theirs.name || mine.shape != theirs.shape {
                return Err(CheckpointError::Tensor(format!(
                    "{} {:?} vs {} {:?}",
                    mine.name, mine.shape, theirs.name, theirs.shape
                )));
            }
            mine.data.clone_from(&theirs.data);
        }
        Ok(())
    }
}

/// Gradient buffers shaped like a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct Grads {
    pub data: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Grads { data: store.tensors.iter().map(|t| vec![0.0; t.data.len()]).collect() }
    }

    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().flatten().for_each(|x| *x *= factor);
    }

    pub fn global_norm(&self) -> f64 {
        self.data.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().flatten().all(|x| x.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().flatten().all(|&x| x == 0.0)
    }
}

/// Adam with bias correction and global-norm gradient clipping.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip: f64,
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64, clip: f64) -> Self {
        let zeros = Grads::zeros_like(store).data;
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, clip, t: 0, m: zeros.clone(), v: zeros }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Grads) {
        let norm = grads.global_norm();
        let factor = if norm > self.clip { self.clip / norm } else { 1.0 };
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (k, tensor) in store.tensors.iter_mut().enumerate() {
            let (m, v, g) = (&mut self.m[k], &mut self.v[k], &grads.data[k]);
            for i in 0..tensor.data.len() {
                let gi = g[i] * factor;
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                tensor.data[i] -= self.lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + self.eps);
            }
        }
    }
}

const MAGIC: &[u8; 4] = b"RSCK";
const VERSION: u32 = 1;

/// Everything needed to restore a model and continue training.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub fingerprint: String,
    /// Free-form JSON describing the model and run configuration.
    pub meta: String,
    pub params: ParamStore,
    pub optimizer: Option<Adam>,
}

fn write_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u64).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn write_f64s(w: &mut impl Write, xs: &[f64]) -> std::io::Result<()> {
    w.write_all(&(xs.len() as u64).to_le_bytes())?;
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64, CheckpointError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_len(r: &mut impl Read) -> Result<usize, CheckpointError> {
    let n = read_u64(r)?;
    if n > (1 << 32) {
        return Err(CheckpointError::Corrupt(format!("implausible length {n}")));
    }
    Ok(n as usize)
}

fn read_str(r: &mut impl Read) -> Result<String, CheckpointError> {
    let n = read_len(r)?;
    let mut b = vec![0u8; n];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|e| CheckpointError::Corrupt(e.to_string()))
}

fn read_f64s(r: &mut impl Read) -> Result<Vec<f64>, CheckpointError> {
    let n = read_len(r)?;
    let mut out = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut b)?;
        out.push(f64::from_le_bytes(b));
    }
    Ok(out)
}

impl Checkpoint {
    pub fn write_to(&self, w: &mut impl Write) -> Result<(), CheckpointError> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        write_str(w, &self.fingerprint)?;
        write_str(w, &self.meta)?;
        w.write_all(&(self.params.tensors.len() as u64).to_le_bytes())?;
        for t in &self.params.tensors {
            write_str(w, &t.name)?;
            w.write_all(&(t.shape.len() as u64).to_le_bytes())?;
            for &d in &t.shape {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            write_f64s(w, &t.data)?;
        }
        match &self.optimizer {
            None => w.write_all(&[0])?,
            Some(adam) => {
                w.write_all(&[1])?;
                for x in [adam.lr, adam.beta1, adam.beta2, adam.eps, adam.clip] {
                    w.write_all(&x.to_le_bytes())?;
                }
                w.write_all(&adam.t.to_le_bytes())?;
                for (m, v) in adam.m.iter().zip(&adam.v) {
                    write_f64s(w, m)?;
                    write_f64s(w, v)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, CheckpointError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let mut v = [0u8; 4];
        r.read_exact(&mut v)?;
        let version = u32::from_le_bytes(v);
        if version != VERSION {
            return Err(CheckpointError::Version(version));
        }
        let fingerprint = read_str(r)?;
        let meta = read_str(r)?;
        let n = read_len(r)?;
        let mut params = ParamStore::default();
        for _ in 0..n {
            let name = read_str(r)?;
            let rank = read_len(r)?;
            let shape = (0..rank).map(|_| read_len(r)).collect::<Result<Vec<_>, _>>()?;
            let data = read_f64s(r)?;
            if data.len() != shape.iter().product::<usize>() {
                return Err(CheckpointError::Corrupt(format!("tensor {name} size differs from its shape")));
            }
            params.tensors.push(Tensor { name, shape, data });
        }
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        let optimizer = if flag[0] == 1 {
            let mut f = [0.0; 5];
            for x in f.iter_mut() {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                *x = f64::from_le_bytes(b);
            }
            let t = read_u64(r)?;
            let mut m = Vec::with_capacity(n);
            let mut v = Vec::with_capacity(n);
            for _ in 0..n {
                m.push(read_f64s(r)?);
                v.push(read_f64s(r)?);
            }
            Some(Adam { lr: f[0], beta1: f[1], beta2: f[2], eps: f[3], clip: f[4], t, m, v })
        } else {
            None
        };
        Ok(Checkpoint { fingerprint, meta, params, optimizer })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), CheckpointError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CheckpointError> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        Checkpoint::read_from(&mut r)
    }

    /// Refuse checkpoints trained against a different grammar.
    pub fn check_fingerprint(&self, expected: &str) -> Result<(), CheckpointError> {
        if self.fingerprint != expected {
            return Err(CheckpointError::Fingerprint { expected: expected.into(), found: self.fingerprint.clone() });
        }
        Ok(())
    }
}

/// Uniform in [-1, 1), handy for test inputs.
pub fn uniform_vec(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}
