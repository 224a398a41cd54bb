//! Policy and value networks over executed REPL views.
//!
//! Both networks share one architecture family but no parameters:
//!
//! * grid domains: a spec encoder and a (spec, canvas) encoder, two
//!   convolution + pooling stages each; the state is the spec encoding
//!   concatenated with the sum of canvas encodings, and each canvas encoding
//!   doubles as the pointer key of its scope entry;
//! * text domains: per example, five aligned character streams plus two mask
//!   bits per position, a width-5 convolution, max over positions, a dense
//!   layer, then the mean over examples, concatenated with an embedding of
//!   the previous action.
//!
//! The policy emits an action slot by slot: production, each parameter
//! (conditioned on the values already chosen), then operand pointers scored
//! by dot products against scope keys. The value head outputs
//! `log v = -softplus(z)`, so `v` lies in (0, 1] by construction.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::mdp::{Action, ExampleView, Grammar, GridView, ReplView, Rng, TextView};
use crate::nn::{masked_log_softmax, Init, Neighbors, ParamId, ParamStore, PoolWindows, Tape, Var, PAD};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Trunk width.
    pub hidden: usize,
    /// Canvas encoding width, also the pointer key width.
    pub key_width: usize,
    pub conv_channels: [usize; 2],
    pub char_width: usize,
    pub text_channels: usize,
    pub text_width: usize,
    pub action_width: usize,
    /// When false the networks never see execution results.
    pub repl: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: 128,
            key_width: 64,
            conv_channels: [8, 16],
            char_width: 20,
            text_channels: 32,
            text_width: 64,
            action_width: 32,
            repl: true,
        }
    }
}

impl ModelConfig {
    /// Width-16 model for gradient checks and fast tests.
    pub fn tiny() -> Self {
        ModelConfig {
            hidden: 16,
            key_width: 16,
            conv_channels: [4, 4],
            char_width: 6,
            text_channels: 8,
            text_width: 16,
            action_width: 8,
            repl: true,
        }
    }

    /// Mid-size model for micro-domain training on one core.
    pub fn small() -> Self {
        ModelConfig {
            hidden: 64,
            key_width: 32,
            conv_channels: [8, 8],
            char_width: 12,
            text_channels: 16,
            text_width: 32,
            action_width: 16,
            repl: true,
        }
    }

    pub fn without_repl(mut self) -> Self {
        self.repl = false;
        self
    }
}

/// Shape of the observations a model consumes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputKind {
    Grid { dims: Vec<usize> },
    Text,
}

impl InputKind {
    pub fn of_view(view: &ReplView) -> Self {
        match view {
            ReplView::Grid(g) => InputKind::Grid { dims: g.spec.dims().to_vec() },
            ReplView::Text(_) => InputKind::Text,
        }
    }
}

const CHAR_ROWS: usize = 96;
const STREAMS: usize = 5;
const MASKS: usize = 2;
const TEXT_KERNEL: usize = 5;
const STEP_ROWS: usize = 64;

fn char_row(c: u8) -> u32 {
    if (32..127).contains(&c) {
        (c - 32) as u32
    } else {
        (CHAR_ROWS - 1) as u32
    }
}

struct GridEncoder {
    c1: (ParamId, ParamId),
    c2: (ParamId, ParamId),
    dense: (ParamId, ParamId),
    nb1: Arc<Neighbors>,
    pool1: PoolWindows,
    nb2: Arc<Neighbors>,
    pool2: PoolWindows,
    channels: [usize; 2],
}

impl GridEncoder {
    fn new(store: &mut ParamStore, prefix: &str, dims: &[usize], cin: usize, cfg: &ModelConfig, rng: &mut Rng) -> Self {
        let nb1 = Arc::new(Neighbors::same(dims, 3));
        let pool1 = PoolWindows::halve(dims);
        let nb2 = Arc::new(Neighbors::same(&pool1.out_dims, 3));
        let pool2 = PoolWindows::halve(&pool1.out_dims);
        let [a, b] = cfg.conv_channels;
        let k1 = nb1.taps * cin;
        let k2 = nb2.taps * a;
        let flat = pool2.members.len() * b;
        GridEncoder {
            c1: (
                store.add(&format!("{prefix}.conv1.w"), &[a, k1], Init::He { fan_in: k1 }, rng),
                store.add(&format!("{prefix}.conv1.b"), &[a], Init::Zeros, rng),
            ),
            c2: (
                store.add(&format!("{prefix}.conv2.w"), &[b, k2], Init::He { fan_in: k2 }, rng),
                store.add(&format!("{prefix}.conv2.b"), &[b], Init::Zeros, rng),
            ),
            dense: (
                store.add(&format!("{prefix}.dense.w"), &[cfg.key_width, flat], Init::He { fan_in: flat }, rng),
                store.add(&format!("{prefix}.dense.b"), &[cfg.key_width], Init::Zeros, rng),
            ),
            nb1,
            pool1,
            nb2,
            pool2,
            channels: cfg.conv_channels,
        }
    }

    fn forward(&self, t: &mut Tape, x: Var) -> Var {
        let c = t.conv(x, self.c1.0, self.c1.1, &self.nb1);
        let c = t.relu(c);
        let c = t.max_pool(c, &self.pool1, self.channels[0]);
        let c = t.conv(c, self.c2.0, self.c2.1, &self.nb2);
        let c = t.relu(c);
        let c = t.max_pool(c, &self.pool2, self.channels[1]);
        let d = t.affine(c, self.dense.0, Some(self.dense.1));
        t.relu(d)
    }
}

/// Sum-of-token embedding of an action: one token for the production and
/// one per bound parameter value. Operands are not embedded.
struct ActionEmbedding {
    table: ParamId,
    offsets: Vec<Vec<usize>>,
    start: usize,
}

impl ActionEmbedding {
    fn new(store: &mut ParamStore, name: &str, grammar: &Grammar, width: usize, rng: &mut Rng) -> Self {
        let mut offsets = Vec::new();
        let mut next = 0;
        for p in &grammar.productions {
            let mut offs = vec![next];
            next += 1;
            for slot in &p.params {
                offs.push(next);
                next += slot.size;
            }
            offsets.push(offs);
        }
        let table = store.add(name, &[next + 1, width], Init::Normal(0.1), rng);
        ActionEmbedding { table, offsets, start: next }
    }

    fn forward(&self, t: &mut Tape, action: Option<&Action>) -> Var {
        let Some(a) = action else { return t.embed(self.table, self.start) };
        let offs = &self.offsets[a.production as usize];
        let mut parts = vec![t.embed(self.table, offs[0])];
        for (j, &v) in a.params.iter().enumerate() {
            parts.push(t.embed(self.table, offs[j + 1] + v as usize));
        }
        if parts.len() == 1 {
            parts[0]
        } else {
            t.add(&parts)
        }
    }
}

struct TextEncoder {
    chars: ParamId,
    conv: (ParamId, ParamId),
    dense: (ParamId, ParamId),
    previous: ActionEmbedding,
    /// Step-count embedding, used only without the REPL.
    steps: Option<ParamId>,
    channels: usize,
}

impl TextEncoder {
    fn new(store: &mut ParamStore, prefix: &str, grammar: &Grammar, cfg: &ModelConfig, rng: &mut Rng) -> Self {
        let feat = STREAMS * cfg.char_width + MASKS;
        let k = TEXT_KERNEL * feat;
        TextEncoder {
            chars: store.add(&format!("{prefix}.chars"), &[CHAR_ROWS, cfg.char_width], Init::Normal(0.5), rng),
            conv: (
                store.add(&format!("{prefix}.conv.w"), &[cfg.text_channels, k], Init::He { fan_in: k }, rng),
                store.add(&format!("{prefix}.conv.b"), &[cfg.text_channels], Init::Zeros, rng),
            ),
            dense: (
                store.add(
                    &format!("{prefix}.dense.w"),
                    &[cfg.text_width, cfg.text_channels],
                    Init::He { fan_in: cfg.text_channels },
                    rng,
                ),
                store.add(&format!("{prefix}.dense.b"), &[cfg.text_width], Init::Zeros, rng),
            ),
            previous: ActionEmbedding::new(store, &format!("{prefix}.previous"), grammar, cfg.action_width, rng),
            steps: (!cfg.repl).then(|| {
                store.add(&format!("{prefix}.steps"), &[STEP_ROWS, cfg.action_width], Init::Normal(0.1), rng)
            }),
            channels: cfg.text_channels,
        }
    }

    fn example(&self, t: &mut Tape, ex: &ExampleView, repl: bool) -> Var {
        let remaining = ex.output.get(ex.committed.len()..).unwrap_or(&[]);
        let n = [ex.input.len(), ex.output.len(), ex.committed.len(), ex.scratch.len()]
            .into_iter()
            .max()
            .unwrap_or(0)
            .max(1);
        let at = |s: &[u8], j: usize| s.get(j).map_or(PAD, |&c| char_row(c));
        let mut rows = Vec::with_capacity(n * STREAMS);
        let mut extras = Vec::with_capacity(n * MASKS);
        for j in 0..n {
            rows.push(at(&ex.input, j));
            rows.push(at(&ex.output, j));
            if repl {
                rows.push(at(&ex.committed, j));
                rows.push(at(&ex.scratch, j));
                rows.push(at(remaining, j));
                extras.push(f64::from(u8::from(ex.mask_consumed.get(j).copied().unwrap_or(false))));
                extras.push(f64::from(u8::from(ex.mask_scratch.get(j).copied().unwrap_or(false))));
            } else {
                rows.extend([PAD; 3]);
                extras.extend([0.0; MASKS]);
            }
        }
        let x = t.gather(self.chars, rows, STREAMS, &extras, MASKS);
        let nb = Arc::new(Neighbors::same(&[n], TEXT_KERNEL));
        let c = t.conv(x, self.conv.0, self.conv.1, &nb);
        let c = t.relu(c);
        let m = t.max_rows(c, self.channels);
        let d = t.affine(m, self.dense.0, Some(self.dense.1));
        t.relu(d)
    }

    fn forward(&self, t: &mut Tape, view: &TextView, repl: bool) -> Var {
        let per: Vec<Var> = view.examples.iter().map(|ex| self.example(t, ex, repl)).collect();
        let pooled = t.mean(&per);
        let prev = self.previous.forward(t, view.previous.as_ref());
        match self.steps {
            Some(table) => {
                let s = t.embed(table, view.steps.min(STEP_ROWS - 1));
                t.concat(&[pooled, prev, s])
            }
            None => t.concat(&[pooled, prev]),
        }
    }
}

enum Encoder {
    Grid {
        spec: GridEncoder,
        canvas: GridEncoder,
        /// Keys from creating actions, used only without the REPL.
        origin: Option<ActionEmbedding>,
    },
    Text(TextEncoder),
}

/// An encoder followed by one dense ReLU trunk layer.
struct Net {
    encoder: Encoder,
    trunk: (ParamId, ParamId),
    tag: usize,
}

/// Intermediate encodings reused across states on one tape.
#[derive(Default)]
pub struct EncodeCache {
    grids: HashMap<(usize, usize, usize), Var>,
}

/// Encoded state: trunk activation and one pointer key per scope entry.
pub struct Encoded {
    pub h: Var,
    pub keys: Vec<Var>,
}

impl Net {
    fn new(
        store: &mut ParamStore,
        prefix: &str,
        grammar: &Grammar,
        input: &InputKind,
        cfg: &ModelConfig,
        tag: usize,
        rng: &mut Rng,
    ) -> Self {
        let (encoder, width) = match input {
            InputKind::Grid { dims } => (
                Encoder::Grid {
                    spec: GridEncoder::new(store, &format!("{prefix}.spec"), dims, 1, cfg, rng),
                    canvas: GridEncoder::new(store, &format!("{prefix}.canvas"), dims, 2, cfg, rng),
                    origin: (!cfg.repl).then(|| {
                        ActionEmbedding::new(store, &format!("{prefix}.origin"), grammar, cfg.key_width, rng)
                    }),
                },
                2 * cfg.key_width,
            ),
            InputKind::Text => {
                let extra = if cfg.repl { 0 } else { cfg.action_width };
                (
                    Encoder::Text(TextEncoder::new(store, &format!("{prefix}.text"), grammar, cfg, rng)),
                    cfg.text_width + cfg.action_width + extra,
                )
            }
        };
        let trunk = (
            store.add(&format!("{prefix}.trunk.w"), &[cfg.hidden, width], Init::He { fan_in: width }, rng),
            store.add(&format!("{prefix}.trunk.b"), &[cfg.hidden], Init::Zeros, rng),
        );
        Net { encoder, trunk, tag }
    }

    fn encode(&self, t: &mut Tape, view: &ReplView, cache: &mut EncodeCache, repl: bool) -> Encoded {
        let (state, keys) = match (&self.encoder, view) {
            (Encoder::Grid { spec, canvas, origin }, ReplView::Grid(g)) => self.encode_grid(t, g, spec, canvas, origin, cache),
            (Encoder::Text(enc), ReplView::Text(v)) => (enc.forward(t, v, repl), Vec::new()),
            _ => panic!("view kind does not match the model input kind"),
        };
        let z = t.affine(state, self.trunk.0, Some(self.trunk.1));
        Encoded { h: t.relu(z), keys }
    }

    fn encode_grid(
        &self,
        t: &mut Tape,
        g: &GridView,
        spec: &GridEncoder,
        canvas: &GridEncoder,
        origin: &Option<ActionEmbedding>,
        cache: &mut EncodeCache,
    ) -> (Var, Vec<Var>) {
        let spec_ptr = Arc::as_ptr(&g.spec) as usize;
        let spec_enc = *cache.grids.entry((self.tag, spec_ptr, 0)).or_insert_with(|| {
            let x = t.input(g.spec.to_f64());
            spec.forward(t, x)
        });
        let keys: Vec<Var> = match origin {
            Some(emb) => g.origins.iter().map(|a| emb.forward(t, Some(a))).collect(),
            None => g
                .canvases
                .iter()
                .map(|c| {
                    let key = (self.tag, spec_ptr, Arc::as_ptr(c) as usize);
                    *cache.grids.entry(key).or_insert_with(|| {
                        let mut x = Vec::with_capacity(2 * c.len());
                        for i in 0..c.len() {
                            x.push(f64::from(u8::from(g.spec.get(i))));
                            x.push(f64::from(u8::from(c.get(i))));
                        }
                        let x = t.input(x);
                        canvas.forward(t, x)
                    })
                })
                .collect(),
        };
        let summed = if keys.is_empty() {
            let width = t.value(spec_enc).len();
            t.input(vec![0.0; width])
        } else {
            t.add(&keys)
        };
        (t.concat(&[spec_enc, summed]), keys)
    }
}

struct SlotHead {
    w: ParamId,
    b: ParamId,
    /// Value embeddings added to the context once the slot is filled.
    emb: ParamId,
}

struct PolicyHeads {
    production: (ParamId, ParamId),
    params: Vec<Vec<SlotHead>>,
    /// Query projections per production and operand position.
    queries: Vec<Vec<ParamId>>,
    /// Projection of the first chosen key added to later queries.
    condition: Vec<Option<ParamId>>,
}

/// Policy and value networks for one grammar and input kind.
pub struct Model {
    pub config: ModelConfig,
    pub input: InputKind,
    pub grammar: Grammar,
    pub store: ParamStore,
    policy: Net,
    heads: PolicyHeads,
    value: Net,
    value_head: (ParamId, ParamId),
}

impl Model {
    pub fn new(grammar: &Grammar, input: InputKind, config: ModelConfig, rng: &mut Rng) -> Self {
        let mut store = ParamStore::default();
        let policy = Net::new(&mut store, "policy", grammar, &input, &config, 0, rng);
        let hidden = config.hidden;
        let n = grammar.productions.len();
        let production = (
            store.add("policy.production.w", &[n, hidden], Init::Zeros, rng),
            store.add("policy.production.b", &[n], Init::Zeros, rng),
        );
        let mut params = Vec::with_capacity(n);
        let mut queries = Vec::with_capacity(n);
        let mut condition = Vec::with_capacity(n);
        for p in &grammar.productions {
            let slots = p
                .params
                .iter()
                .map(|slot| {
                    let base = format!("policy.{}.{}", p.name, slot.name);
                    SlotHead {
                        w: store.add(&format!("{base}.w"), &[slot.size, hidden], Init::Zeros, rng),
                        b: store.add(&format!("{base}.b"), &[slot.size], Init::Zeros, rng),
                        emb: store.add(&format!("{base}.emb"), &[slot.size, hidden], Init::Normal(0.1), rng),
                    }
                })
                .collect();
            params.push(slots);
            queries.push(
                (0..p.arity)
                    .map(|k| {
                        store.add(&format!("policy.{}.query{k}", p.name), &[config.key_width, hidden], Init::Zeros, rng)
                    })
                    .collect(),
            );
            condition.push((p.arity > 1).then(|| {
                store.add(
                    &format!("policy.{}.condition", p.name),
                    &[config.key_width, config.key_width],
                    Init::Zeros,
                    rng,
                )
            }));
        }
        let heads = PolicyHeads { production, params, queries, condition };
        let value = Net::new(&mut store, "value", grammar, &input, &config, 1, rng);
        let value_head = (
            store.add("value.head.w", &[1, hidden], Init::Zeros, rng),
            store.add("value.head.b", &[1], Init::Zeros, rng),
        );
        Model { config, input, grammar: grammar.clone(), store, policy, heads, value, value_head }
    }

    pub fn param_count(&self) -> usize {
        self.store.count()
    }

    /// Indices of tensors belonging to the policy network.
    pub fn policy_tensors(&self) -> Vec<usize> {
        self.tensors_with_prefix("policy.")
    }

    pub fn value_tensors(&self) -> Vec<usize> {
        self.tensors_with_prefix("value.")
    }

    fn tensors_with_prefix(&self, prefix: &str) -> Vec<usize> {
        (0..self.store.tensors.len()).filter(|&k| self.store.tensors[k].name.starts_with(prefix)).collect()
    }

    pub fn encode_policy(&self, t: &mut Tape, view: &ReplView, cache: &mut EncodeCache) -> Encoded {
        self.policy.encode(t, view, cache, self.config.repl)
    }

    pub fn encode_value(&self, t: &mut Tape, view: &ReplView, cache: &mut EncodeCache) -> Encoded {
        self.value.encode(t, view, cache, self.config.repl)
    }

    /// Pre-activation `z` of the value head; `log v = -softplus(z)`.
    pub fn value_logit(&self, t: &mut Tape, view: &ReplView, cache: &mut EncodeCache) -> Var {
        let enc = self.encode_value(t, view, cache);
        t.affine(enc.h, self.value_head.0, Some(self.value_head.1))
    }

    /// `(log v, log(1 - v))` as tape variables.
    pub fn value_log_probs(&self, t: &mut Tape, view: &ReplView, cache: &mut EncodeCache) -> (Var, Var) {
        let z = self.value_logit(t, view, cache);
        let log_v = t.neg_softplus(z);
        let neg = t.scale(z, -1.0);
        let log_not_v = t.neg_softplus(neg);
        (log_v, log_not_v)
    }

    pub fn log_value_of_view(&self, view: &ReplView) -> f64 {
        let mut t = Tape::new(&self.store);
        let (log_v, _) = self.value_log_probs(&mut t, view, &mut EncodeCache::default());
        t.scalar(log_v)
    }

    fn production_logits(&self, t: &mut Tape, h: Var) -> Var {
        t.affine(h, self.heads.production.0, Some(self.heads.production.1))
    }

    fn param_logits(&self, t: &mut Tape, ctx: Var, production: u16, slot: usize) -> Var {
        let head = &self.heads.params[production as usize][slot];
        t.affine(ctx, head.w, Some(head.b))
    }

    fn fill_slot(&self, t: &mut Tape, ctx: Var, production: u16, slot: usize, value: u16) -> Var {
        let e = t.embed(self.heads.params[production as usize][slot].emb, value as usize);
        t.add(&[ctx, e])
    }

    fn operand_logits(&self, t: &mut Tape, ctx: Var, production: u16, chosen: &[u16], keys: &[Var]) -> Var {
        let k = chosen.len();
        let mut q = t.affine(ctx, self.heads.queries[production as usize][k], None);
        if let (Some(&first), Some(w)) = (chosen.first(), self.heads.condition[production as usize]) {
            let c = t.affine(keys[first as usize], w, None);
            q = t.add(&[q, c]);
        }
        let scores: Vec<Var> = keys.iter().map(|&key| t.dot(q, key)).collect();
        t.concat(&scores)
    }

    /// `log π(action | state)` as a tape variable, given the legal productions.
    pub fn action_log_prob(&self, t: &mut Tape, enc: &Encoded, legal: &[u16], action: &Action) -> Var {
        let allowed: Vec<u32> = legal.iter().map(|&p| p as u32).collect();
        let logits = self.production_logits(t, enc.h);
        let mut terms = vec![(t.log_softmax_pick(logits, &allowed, action.production as u32), 1.0)];
        let mut ctx = enc.h;
        for (j, &v) in action.params.iter().enumerate() {
            let logits = self.param_logits(t, ctx, action.production, j);
            let size = t.value(logits).len() as u32;
            let all: Vec<u32> = (0..size).collect();
            terms.push((t.log_softmax_pick(logits, &all, v as u32), 1.0));
            ctx = self.fill_slot(t, ctx, action.production, j, v);
        }
        for k in 0..action.operands.len() {
            let chosen = &action.operands[..k];
            let logits = self.operand_logits(t, ctx, action.production, chosen, &enc.keys);
            let free: Vec<u32> = (0..enc.keys.len() as u32).filter(|i| !chosen.contains(&(*i as u16))).collect();
            terms.push((t.log_softmax_pick(logits, &free, action.operands[k] as u32), 1.0));
        }
        t.combine(&terms)
    }

    /// Sample an action slot by slot; returns the action and its log-probability.
    pub fn sample_action(&self, view: &ReplView, legal: &[u16], rng: &mut Rng) -> Option<(Action, f64)> {
        self.sample_actions(view, legal, 1, rng).pop()
    }

    /// `n` independent samples sharing one encoding of the state. Draws are
    /// tallied slot by slot, so each distinct partial action is scored once;
    /// equal actions come out adjacent.
    pub fn sample_actions(&self, view: &ReplView, legal: &[u16], n: usize, rng: &mut Rng) -> Vec<(Action, f64)> {
        if legal.is_empty() || n == 0 {
            return Vec::new();
        }
        let mut t = Tape::new(&self.store);
        let enc = self.encode_policy(&mut t, view, &mut EncodeCache::default());
        let allowed: Vec<u32> = legal.iter().map(|&p| p as u32).collect();
        let logits = self.production_logits(&mut t, enc.h);
        let lp = masked_log_softmax(t.value(logits), &allowed);
        let mut out = Vec::with_capacity(n);
        for (p, count) in tally(&lp, n, rng) {
            let partial = Partial { score: lp[p], action: Action::terminal(p as u16, &[]), ctx: enc.h };
            self.sample_rest(&mut t, &enc, partial, count, rng, &mut out);
        }
        out
    }

    fn sample_rest(
        &self,
        t: &mut Tape,
        enc: &Encoded,
        node: Partial,
        count: usize,
        rng: &mut Rng,
        out: &mut Vec<(Action, f64)>,
    ) {
        let p = node.action.production;
        let schema = &self.grammar.productions[p as usize];
        let j = node.action.params.len();
        if j < schema.params.len() {
            let logits = self.param_logits(t, node.ctx, p, j);
            let all: Vec<u32> = (0..t.value(logits).len() as u32).collect();
            let lp = masked_log_softmax(t.value(logits), &all);
            for (v, c) in tally(&lp, count, rng) {
                let mut action = node.action.clone();
                action.params.push(v as u16);
                let ctx = self.fill_slot(t, node.ctx, p, j, v as u16);
                self.sample_rest(t, enc, Partial { score: node.score + lp[v], action, ctx }, c, rng, out);
            }
        } else if node.action.operands.len() < schema.arity {
            let chosen = node.action.operands.clone();
            let logits = self.operand_logits(t, node.ctx, p, &chosen, &enc.keys);
            let free: Vec<u32> = (0..enc.keys.len() as u32).filter(|i| !chosen.contains(&(*i as u16))).collect();
            let lp = masked_log_softmax(t.value(logits), &free);
            for (i, c) in tally(&lp, count, rng) {
                let mut action = node.action.clone();
                action.operands.push(i as u16);
                self.sample_rest(t, enc, Partial { score: node.score + lp[i], action, ctx: node.ctx }, c, rng, out);
            }
        } else {
            out.extend(std::iter::repeat((node.action, node.score)).take(count));
        }
    }

    /// The `n` most likely actions, best first, found by best-first search
    /// over partially filled slots. Exact, since slot log-probabilities are
    /// nonpositive; ties go to the canonically smaller action.
    pub fn top_actions(&self, view: &ReplView, legal: &[u16], n: usize) -> Vec<(Action, f64)> {
        if legal.is_empty() || n == 0 {
            return Vec::new();
        }
        let mut t = Tape::new(&self.store);
        let enc = self.encode_policy(&mut t, view, &mut EncodeCache::default());
        let allowed: Vec<u32> = legal.iter().map(|&p| p as u32).collect();
        let logits = self.production_logits(&mut t, enc.h);
        let lp = masked_log_softmax(t.value(logits), &allowed);
        let mut heap = BinaryHeap::new();
        for &p in legal {
            heap.push(Partial { score: lp[p as usize], action: Action::terminal(p, &[]), ctx: enc.h });
        }
        let mut out = Vec::with_capacity(n);
        while let Some(node) = heap.pop() {
            let schema = &self.grammar.productions[node.action.production as usize];
            let p = node.action.production;
            let j = node.action.params.len();
            if j < schema.params.len() {
                let logits = self.param_logits(&mut t, node.ctx, p, j);
                let all: Vec<u32> = (0..t.value(logits).len() as u32).collect();
                let lp = masked_log_softmax(t.value(logits), &all);
                for v in 0..lp.len() as u16 {
                    let mut action = node.action.clone();
                    action.params.push(v);
                    let ctx = self.fill_slot(&mut t, node.ctx, p, j, v);
                    heap.push(Partial { score: node.score + lp[v as usize], action, ctx });
                }
            } else if node.action.operands.len() < schema.arity {
                let chosen = node.action.operands.clone();
                let logits = self.operand_logits(&mut t, node.ctx, p, &chosen, &enc.keys);
                let free: Vec<u32> = (0..enc.keys.len() as u32).filter(|i| !chosen.contains(&(*i as u16))).collect();
                let lp = masked_log_softmax(t.value(logits), &free);
                for &i in &free {
                    let mut action = node.action.clone();
                    action.operands.push(i as u16);
                    heap.push(Partial { score: node.score + lp[i as usize], action, ctx: node.ctx });
                }
            } else {
                out.push((node.action, node.score));
                if out.len() == n {
                    break;
                }
            }
        }
        out
    }
}

struct Partial {
    score: f64,
    action: Action,
    ctx: Var,
}

impl PartialEq for Partial {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Partial {}

impl PartialOrd for Partial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Partial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score.total_cmp(&other.score).then_with(|| other.action.cmp(&self.action))
    }
}

/// Draw an index from log-probabilities (entries of -inf are never drawn).
/// How often each index comes up in `n` draws from `log_probs`, ascending by index.
fn tally(log_probs: &[f64], n: usize, rng: &mut Rng) -> Vec<(usize, usize)> {
    let mut counts = vec![0usize; log_probs.len()];
    for _ in 0..n {
        counts[sample_index(log_probs, rng)] += 1;
    }
    counts.into_iter().enumerate().filter(|&(_, c)| c > 0).collect()
}

pub fn sample_index(log_probs: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &lp) in log_probs.iter().enumerate() {
        if lp == f64::NEG_INFINITY {
            continue;
        }
        acc += lp.exp();
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}
