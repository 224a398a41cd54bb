//! Reverse-mode automatic differentiation over f64 vectors.
//!
//! A [`Tape`] records operations against a borrowed [`ParamStore`];
//! [`Tape::backward`] accumulates parameter gradients into a [`Grads`].
//! Matrices are row-major; position-indexed feature maps are laid out
//! position-major (`[pos][channel]`).

use std::sync::Arc;

use super::params::{Grads, ParamId, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Sentinel for an out-of-bounds neighbour (zero padding).
pub const PAD: u32 = u32::MAX;

/// For each output position, the input position under each kernel tap.
#[derive(Clone, Debug, PartialEq)]
pub struct Neighbors {
    pub n_in: usize,
    pub n_out: usize,
    pub taps: usize,
    pub index: Vec<u32>,
}

impl Neighbors {
    /// Same-padded, stride-1 kernel of width `k` (odd) over a grid with `dims`.
    pub fn same(dims: &[usize], k: usize) -> Self {
        let n: usize = dims.iter().product();
        let r = (k / 2) as isize;
        let taps = k.pow(dims.len() as u32);
        let mut index = Vec::with_capacity(n * taps);
        let mut coord = vec![0isize; dims.len()];
        for p in 0..n {
            let mut rem = p;
            for (a, &d) in dims.iter().enumerate() {
                coord[a] = (rem % d) as isize;
                rem /= d;
            }
            for t in 0..taps {
                let mut rem_t = t;
                let mut q = 0usize;
                let mut stride = 1usize;
                let mut inside = true;
                for (a, &d) in dims.iter().enumerate() {
                    let off = (rem_t % k) as isize - r;
                    rem_t /= k;
                    let c = coord[a] + off;
                    if c < 0 || c >= d as isize {
                        inside = false;
                    } else {
                        q += c as usize * stride;
                    }
                    stride *= d;
                }
                index.push(if inside { q as u32 } else { PAD });
            }
        }
        Neighbors { n_in: n, n_out: n, taps, index }
    }
}

/// Non-overlapping 2-per-axis pooling windows.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolWindows {
    pub n_in: usize,
    pub out_dims: Vec<usize>,
    pub members: Vec<Vec<u32>>,
}

impl PoolWindows {
    pub fn halve(dims: &[usize]) -> Self {
        let out_dims: Vec<usize> = dims.iter().map(|&d| d.div_ceil(2)).collect();
        let n_out: usize = out_dims.iter().product();
        let n_in: usize = dims.iter().product();
        let mut members = vec![Vec::new(); n_out];
        for p in 0..n_in {
            let (mut rem, mut q, mut stride) = (p, 0, 1);
            for (a, &d) in dims.iter().enumerate() {
                q += (rem % d) / 2 * stride;
                rem /= d;
                stride *= out_dims[a];
            }
            members[q].push(p as u32);
        }
        PoolWindows { n_in, out_dims, members }
    }
}

enum Op {
    Leaf,
    Affine { x: Var, w: ParamId, b: Option<ParamId> },
    Embed { table: ParamId, row: usize },
    /// Rows of `table` at `rows` (PAD gives zeros) per position and stream,
    /// followed by constant per-position extras.
    Gather { table: ParamId, rows: Vec<u32>, streams: usize, extra: usize },
    Conv { x: Var, w: ParamId, b: ParamId, nb: Arc<Neighbors>, cin: usize },
    MaxPool { x: Var, ch: usize, argmax: Vec<u32> },
    /// Max over all positions, per channel.
    MaxRows { x: Var, argmax: Vec<u32> },
    Relu(Var),
    Add(Vec<Var>),
    Mean(Vec<Var>),
    Concat(Vec<Var>),
    Scale(Var, f64),
    Dot(Var, Var),
    /// Log-probability of `target` under a softmax restricted to `allowed`.
    LogSoftmaxPick { logits: Var, allowed: Vec<u32>, target: u32, probs: Vec<f64> },
    /// -softplus(x), elementwise.
    NegSoftplus(Var),
    /// Weighted sum of scalars.
    Combine(Vec<(Var, f64)>),
}

struct Node {
    value: Vec<f64>,
    op: Op,
}

pub struct Tape<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Log-softmax over the `allowed` entries; other entries get -inf.
pub fn masked_log_softmax(logits: &[f64], allowed: &[u32]) -> Vec<f64> {
    let mut out = vec![f64::NEG_INFINITY; logits.len()];
    let max = allowed.iter().map(|&i| logits[i as usize]).fold(f64::NEG_INFINITY, f64::max);
    let lse = max + allowed.iter().map(|&i| (logits[i as usize] - max).exp()).sum::<f64>().ln();
    for &i in allowed {
        out[i as usize] = logits[i as usize] - lse;
    }
    out
}

impl<'p> Tape<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Tape { store, nodes: Vec::with_capacity(64) }
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// `W x + b` with `W` of shape `[out, in]`.
    pub fn affine(&mut self, x: Var, w: ParamId, b: Option<ParamId>) -> Var {
        let wt = &self.store.tensors[w];
        let (rows, cols) = (wt.shape[0], wt.shape[1]);
        let xv = &self.nodes[x.0].value;
        assert_eq!(xv.len(), cols, "affine {} input width", wt.name);
        let mut y = match b {
            Some(b) => self.store.get(b).to_vec(),
            None => vec![0.0; rows],
        };
        for (r, yr) in y.iter_mut().enumerate() {
            let row = &wt.data[r * cols..(r + 1) * cols];
            *yr += row.iter().zip(xv).map(|(a, b)| a * b).sum::<f64>();
        }
        self.push(y, Op::Affine { x, w, b })
    }

    pub fn embed(&mut self, table: ParamId, row: usize) -> Var {
        let t = &self.store.tensors[table];
        let width = t.shape[1];
        let value = t.data[row * width..(row + 1) * width].to_vec();
        self.push(value, Op::Embed { table, row })
    }

    /// Per position: `streams` embedding rows then `extra` constants.
    pub fn gather(&mut self, table: ParamId, rows: Vec<u32>, streams: usize, extras: &[f64], extra: usize) -> Var {
        let t = &self.store.tensors[table];
        let width = t.shape[1];
        let n = rows.len() / streams;
        assert_eq!(extras.len(), n * extra);
        let feat = streams * width + extra;
        let mut value = vec![0.0; n * feat];
        for p in 0..n {
            for s in 0..streams {
                let r = rows[p * streams + s];
                if r != PAD {
                    let src = &t.data[r as usize * width..(r as usize + 1) * width];
                    value[p * feat + s * width..p * feat + (s + 1) * width].copy_from_slice(src);
                }
            }
            value[p * feat + streams * width..(p + 1) * feat].copy_from_slice(&extras[p * extra..(p + 1) * extra]);
        }
        self.push(value, Op::Gather { table, rows, streams, extra })
    }

    /// Convolution with weight `[cout, taps * cin]` and bias `[cout]`.
    pub fn conv(&mut self, x: Var, w: ParamId, b: ParamId, nb: &Arc<Neighbors>) -> Var {
        let wt = &self.store.tensors[w];
        let (cout, kc) = (wt.shape[0], wt.shape[1]);
        let cin = kc / nb.taps;
        let xv = &self.nodes[x.0].value;
        assert_eq!(xv.len(), nb.n_in * cin, "conv {} input size", wt.name);
        let bias = self.store.get(b);
        let mut y = vec![0.0; nb.n_out * cout];
        let mut patch = vec![0.0; kc];
        for p in 0..nb.n_out {
            fill_patch(&mut patch, xv, &nb.index[p * nb.taps..(p + 1) * nb.taps], cin);
            let yp = &mut y[p * cout..(p + 1) * cout];
            for (co, out) in yp.iter_mut().enumerate() {
                let row = &wt.data[co * kc..(co + 1) * kc];
                *out = bias[co] + row.iter().zip(&patch).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        self.push(y, Op::Conv { x, w, b, nb: Arc::clone(nb), cin })
    }

    pub fn max_pool(&mut self, x: Var, windows: &PoolWindows, ch: usize) -> Var {
        let xv = &self.nodes[x.0].value;
        assert_eq!(xv.len(), windows.n_in * ch);
        let n_out = windows.members.len();
        let mut y = vec![0.0; n_out * ch];
        let mut argmax = vec![0u32; n_out * ch];
        for (q, members) in windows.members.iter().enumerate() {
            for c in 0..ch {
                let mut best = members[0];
                for &m in &members[1..] {
                    if xv[m as usize * ch + c] > xv[best as usize * ch + c] {
                        best = m;
                    }
                }
                y[q * ch + c] = xv[best as usize * ch + c];
                argmax[q * ch + c] = best;
            }
        }
        self.push(y, Op::MaxPool { x, ch, argmax })
    }

    /// Global max over positions of a `[n][ch]` map.
    pub fn max_rows(&mut self, x: Var, ch: usize) -> Var {
        let xv = &self.nodes[x.0].value;
        let n = xv.len() / ch;
        assert!(n > 0, "max over zero positions");
        let mut y = xv[..ch].to_vec();
        let mut argmax = vec![0u32; ch];
        for p in 1..n {
            for c in 0..ch {
                if xv[p * ch + c] > y[c] {
                    y[c] = xv[p * ch + c];
                    argmax[c] = p as u32;
                }
            }
        }
        self.push(y, Op::MaxRows { x, argmax })
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let y = self.nodes[x.0].value.iter().map(|&v| v.max(0.0)).collect();
        self.push(y, Op::Relu(x))
    }

    pub fn add(&mut self, xs: &[Var]) -> Var {
        let mut y = self.nodes[xs[0].0].value.clone();
        for x in &xs[1..] {
            y.iter_mut().zip(&self.nodes[x.0].value).for_each(|(a, b)| *a += b);
        }
        self.push(y, Op::Add(xs.to_vec()))
    }

    pub fn mean(&mut self, xs: &[Var]) -> Var {
        let mut y = self.nodes[xs[0].0].value.clone();
        for x in &xs[1..] {
            y.iter_mut().zip(&self.nodes[x.0].value).for_each(|(a, b)| *a += b);
        }
        let inv = 1.0 / xs.len() as f64;
        y.iter_mut().for_each(|v| *v *= inv);
        self.push(y, Op::Mean(xs.to_vec()))
    }

    pub fn concat(&mut self, xs: &[Var]) -> Var {
        let y = xs.iter().flat_map(|x| self.nodes[x.0].value.iter().copied()).collect();
        self.push(y, Op::Concat(xs.to_vec()))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let y = self.nodes[x.0].value.iter().map(|v| v * factor).collect();
        self.push(y, Op::Scale(x, factor))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let y = av.iter().zip(bv).map(|(x, y)| x * y).sum();
        self.push(vec![y], Op::Dot(a, b))
    }

    pub fn log_softmax_pick(&mut self, logits: Var, allowed: &[u32], target: u32) -> Var {
        let lv = &self.nodes[logits.0].value;
        let logp = masked_log_softmax(lv, allowed);
        assert!(logp[target as usize].is_finite(), "target outside the allowed set");
        let probs = allowed.iter().map(|&i| logp[i as usize].exp()).collect();
        let value = vec![logp[target as usize]];
        self.push(value, Op::LogSoftmaxPick { logits, allowed: allowed.to_vec(), target, probs })
    }

    pub fn neg_softplus(&mut self, x: Var) -> Var {
        let y = self.nodes[x.0].value.iter().map(|&v| -softplus(v)).collect();
        self.push(y, Op::NegSoftplus(x))
    }

    /// Σ cᵢ·xᵢ over scalar variables.
    pub fn combine(&mut self, terms: &[(Var, f64)]) -> Var {
        let y = terms.iter().map(|(v, c)| self.nodes[v.0].value[0] * c).sum();
        self.push(vec![y], Op::Combine(terms.to_vec()))
    }

    /// Accumulate d(`output`)/d(params), scaled by `seed`, into `grads`.
    pub fn backward(&self, output: Var, seed: f64, grads: &mut Grads) {
        let mut g: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        g[output.0] = Some(vec![seed; self.nodes[output.0].value.len()]);
        for i in (0..=output.0).rev() {
            let Some(gy) = g[i].take() else { continue };
            let node = &self.nodes[i];
            let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
                let slot = g[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
                f(slot);
            };
            match &node.op {
                Op::Leaf => {}
                Op::Affine { x, w, b } => {
                    let wt = &self.store.tensors[*w];
                    let cols = wt.shape[1];
                    let xv = &self.nodes[x.0].value;
                    let gw = &mut grads.data[*w];
                    for (r, &gr) in gy.iter().enumerate() {
                        if gr != 0.0 {
                            gw[r * cols..(r + 1) * cols].iter_mut().zip(xv).for_each(|(a, b)| *a += gr * b);
                        }
                    }
                    if let Some(b) = b {
                        grads.data[*b].iter_mut().zip(&gy).for_each(|(a, b)| *a += b);
                    }
                    acc(*x, &mut |gx| {
                        for (r, &gr) in gy.iter().enumerate() {
                            if gr != 0.0 {
                                let row = &wt.data[r * cols..(r + 1) * cols];
                                gx.iter_mut().zip(row).for_each(|(a, w)| *a += gr * w);
                            }
                        }
                    });
                }
                Op::Embed { table, row } => {
                    let width = gy.len();
                    grads.data[*table][row * width..(row + 1) * width]
                        .iter_mut()
                        .zip(&gy)
                        .for_each(|(a, b)| *a += b);
                }
                Op::Gather { table, rows, streams, extra } => {
                    let width = self.store.tensors[*table].shape[1];
                    let feat = streams * width + extra;
                    let gt = &mut grads.data[*table];
                    for (k, &r) in rows.iter().enumerate() {
                        if r == PAD {
                            continue;
                        }
                        let (p, s) = (k / streams, k % streams);
                        let src = &gy[p * feat + s * width..p * feat + (s + 1) * width];
                        gt[r as usize * width..(r as usize + 1) * width]
                            .iter_mut()
                            .zip(src)
                            .for_each(|(a, b)| *a += b);
                    }
                }
                Op::Conv { x, w, b, nb, cin } => {
                    let wt = &self.store.tensors[*w];
                    let (cout, kc) = (wt.shape[0], wt.shape[1]);
                    let xv = &self.nodes[x.0].value;
                    let mut patch = vec![0.0; kc];
                    let mut gpatch = vec![0.0; kc];
                    let mut gx = vec![0.0; xv.len()];
                    {
                        let gw = &mut grads.data[*w];
                        for p in 0..nb.n_out {
                            let taps = &nb.index[p * nb.taps..(p + 1) * nb.taps];
                            fill_patch(&mut patch, xv, taps, *cin);
                            gpatch.iter_mut().for_each(|v| *v = 0.0);
                            for co in 0..cout {
                                let gyo = gy[p * cout + co];
                                if gyo == 0.0 {
                                    continue;
                                }
                                let row = &wt.data[co * kc..(co + 1) * kc];
                                let grow = &mut gw[co * kc..(co + 1) * kc];
                                for j in 0..kc {
                                    grow[j] += gyo * patch[j];
                                    gpatch[j] += gyo * row[j];
                                }
                            }
                            for (t, &q) in taps.iter().enumerate() {
                                if q != PAD {
                                    let dst = &mut gx[q as usize * cin..(q as usize + 1) * cin];
                                    dst.iter_mut().zip(&gpatch[t * cin..(t + 1) * cin]).for_each(|(a, b)| *a += b);
                                }
                            }
                        }
                    }
                    let gb = &mut grads.data[*b];
                    for p in 0..nb.n_out {
                        gb.iter_mut().zip(&gy[p * cout..(p + 1) * cout]).for_each(|(a, b)| *a += b);
                    }
                    acc(*x, &mut |dst| dst.iter_mut().zip(&gx).for_each(|(a, b)| *a += b));
                }
                Op::MaxPool { x, ch, argmax } => {
                    acc(*x, &mut |gx| {
                        for (k, &m) in argmax.iter().enumerate() {
                            gx[m as usize * ch + k % ch] += gy[k];
                        }
                    });
                }
                Op::MaxRows { x, argmax } => {
                    let ch = argmax.len();
                    acc(*x, &mut |gx| {
                        for (c, &p) in argmax.iter().enumerate() {
                            gx[p as usize * ch + c] += gy[c];
                        }
                    });
                }
                Op::Relu(x) => {
                    let y = &node.value;
                    acc(*x, &mut |gx| {
                        for k in 0..gx.len() {
                            if y[k] > 0.0 {
                                gx[k] += gy[k];
                            }
                        }
                    });
                }
                Op::Add(xs) => {
                    for x in xs {
                        acc(*x, &mut |gx| gx.iter_mut().zip(&gy).for_each(|(a, b)| *a += b));
                    }
                }
                Op::Mean(xs) => {
                    let inv = 1.0 / xs.len() as f64;
                    for x in xs {
                        acc(*x, &mut |gx| gx.iter_mut().zip(&gy).for_each(|(a, b)| *a += b * inv));
                    }
                }
                Op::Concat(xs) => {
                    let mut off = 0;
                    for x in xs {
                        let n = self.nodes[x.0].value.len();
                        acc(*x, &mut |gx| gx.iter_mut().zip(&gy[off..off + n]).for_each(|(a, b)| *a += b));
                        off += n;
                    }
                }
                Op::Scale(x, f) => {
                    acc(*x, &mut |gx| gx.iter_mut().zip(&gy).for_each(|(a, b)| *a += b * f));
                }
                Op::Dot(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let s = gy[0];
                    acc(*a, &mut |ga| ga.iter_mut().zip(bv).for_each(|(g, v)| *g += s * v));
                    acc(*b, &mut |gb| gb.iter_mut().zip(av).for_each(|(g, v)| *g += s * v));
                }
                Op::LogSoftmaxPick { logits, allowed, target, probs } => {
                    let s = gy[0];
                    acc(*logits, &mut |gl| {
                        for (&i, &p) in allowed.iter().zip(probs) {
                            gl[i as usize] -= s * p;
                        }
                        gl[*target as usize] += s;
                    });
                }
                Op::NegSoftplus(x) => {
                    let xv = &self.nodes[x.0].value;
                    acc(*x, &mut |gx| {
                        for k in 0..gx.len() {
                            gx[k] -= gy[k] * sigmoid(xv[k]);
                        }
                    });
                }
                Op::Combine(terms) => {
                    for (v, c) in terms {
                        acc(*v, &mut |gv| gv[0] += gy[0] * c);
                    }
                }
            }
        }
    }
}

fn fill_patch(patch: &mut [f64], x: &[f64], taps: &[u32], cin: usize) {
    for (t, &q) in taps.iter().enumerate() {
        let dst = &mut patch[t * cin..(t + 1) * cin];
        if q == PAD {
            dst.iter_mut().for_each(|v| *v = 0.0);
        } else {
            dst.copy_from_slice(&x[q as usize * cin..(q as usize + 1) * cin]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::rng_from_seed;
    use crate::nn::params::{uniform_vec, Init};

    #[test]
    fn neighbor_tables() {
        let nb = Neighbors::same(&[3, 3], 3);
        assert_eq!(nb.taps, 9);
        // centre tap of every position is the position itself
        for p in 0..9 {
            assert_eq!(nb.index[p * 9 + 4], p as u32);
        }
        // corner (0,0) sees 4 in-bounds cells
        assert_eq!(nb.index[..9].iter().filter(|&&q| q != PAD).count(), 4);
        let pool = PoolWindows::halve(&[4, 4]);
        assert_eq!(pool.out_dims, vec![2, 2]);
        assert_eq!(pool.members[0], vec![0, 1, 4, 5]);
        let line = Neighbors::same(&[5], 5);
        assert_eq!(&line.index[..5], &[PAD, PAD, 0, 1, 2]);
    }

    #[test]
    fn masked_softmax_normalizes() {
        let lp = masked_log_softmax(&[1.0, 2.0, 3.0], &[0, 2]);
        assert!(lp[1].is_infinite());
        assert!((lp[0].exp() + lp[2].exp() - 1.0).abs() < 1e-12);
    }

    /// Every op on one graph; compare tape gradients with central differences.
    #[test]
    fn finite_differences() {
        let mut rng = rng_from_seed(42);
        let mut store = ParamStore::default();
        let dims = [4usize, 4];
        let nb = Arc::new(Neighbors::same(&dims, 3));
        let pool = PoolWindows::halve(&dims);
        let conv_w = store.add("cw", &[3, 9 * 2], Init::Normal(0.5), &mut rng);
        let conv_b = store.add("cb", &[3], Init::Normal(0.1), &mut rng);
        let dense = store.add("dw", &[5, 12], Init::Normal(0.3), &mut rng);
        let dense_b = store.add("db", &[5], Init::Normal(0.1), &mut rng);
        let table = store.add("emb", &[6, 5], Init::Normal(0.5), &mut rng);
        let gather_t = store.add("gt", &[4, 2], Init::Normal(0.5), &mut rng);
        let seq_w = store.add("sw", &[2, 3 * 5], Init::Normal(0.5), &mut rng);
        let seq_b = store.add("sb", &[2], Init::Zeros, &mut rng);
        let line = Arc::new(Neighbors::same(&[4], 3));
        let x = uniform_vec(&mut rng, 16 * 2);
        let loss_of = |store: &ParamStore, grads: Option<&mut Grads>| -> f64 {
            let mut t = Tape::new(store);
            let xi = t.input(x.clone());
            let c = t.conv(xi, conv_w, conv_b, &nb);
            let r = t.relu(c);
            let p = t.max_pool(r, &pool, 3);
            let flat = t.affine(p, dense, Some(dense_b));
            let e = t.embed(table, 2);
            let g = t.gather(gather_t, vec![0, 3, PAD, 1, 2, 2, 1, PAD], 2, &[0.5, -0.5, 1.0, 0.0], 1);
            let s = t.conv(g, seq_w, seq_b, &line);
            let sm = t.max_rows(s, 2);
            let sum = t.add(&[flat, e]);
            let m = t.mean(&[sum, e]);
            let cat = t.concat(&[m, sm]);
            let sc = t.scale(cat, 0.7);
            let d = t.dot(sc, cat);
            let lp = t.log_softmax_pick(m, &[0, 2, 3, 4], 3);
            let ns = t.neg_softplus(d);
            let loss = t.combine(&[(lp, -1.0), (ns, 0.3), (d, 0.01)]);
            let v = t.scalar(loss);
            if let Some(gr) = grads {
                t.backward(loss, 1.0, gr);
            }
            v
        };
        let mut grads = Grads::zeros_like(&store);
        loss_of(&store, Some(&mut grads));
        let h = 1e-6;
        for k in 0..store.tensors.len() {
            for i in 0..store.tensors[k].data.len() {
                let mut s = store.clone();
                s.tensors[k].data[i] += h;
                let up = loss_of(&s, None);
                s.tensors[k].data[i] -= 2.0 * h;
                let down = loss_of(&s, None);
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads.data[k][i];
                let denom = analytic.abs().max(numeric.abs()).max(1e-4);
                assert!(
                    (analytic - numeric).abs() / denom < 1e-4,
                    "{}[{i}]: analytic {analytic} numeric {numeric}",
                    store.tensors[k].name
                );
            }
        }
    }
}
