//! System 2: differentiable logic over a d-dimensional embedding space.
//!
//! States and state-action contexts are embedded as logic vectors; AND/OR
//! combine an MLP branch on the concatenated operands with a convolution
//! over their Kronecker product, NOT is a residual map, and IMPLY is the
//! composition OR(NOT(v), m). Truth is a fixed random anchor `T`; falsity
//! is always the current image of `T` under NOT. A similarity
//! `sim(v, m) = sigmoid(kappa * cos(v, m))` grades how well a vector agrees
//! with an anchor, and fourteen algebraic-law residuals regularize the
//! gates toward Boolean behavior.
//!
//! During training the operands of every AND/OR application are swapped
//! with probability one half, pushing the gates toward order-independence.

use ndarray::Array1;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::nn::{bind_group, BoundIds, Mlp, MlpIds, ParamGroup};
use crate::rssm::{row, standard_normal_mat, unrow};
use crate::tape::{Mat, NodeId, Tape};

/// Point in the logic embedding space.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicVector(pub Array1<f64>);

impl LogicVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LogicConfig {
    /// Logic vector size d.
    pub d: usize,
    /// Dimension of the latent fed to the state embedder.
    pub latent: usize,
    pub action: usize,
    /// Affine layers per embedder / gate MLP branch.
    pub mlp_layers: usize,
    /// Similarity sharpness.
    pub kappa: f64,
}

impl LogicConfig {
    pub fn from_config(cfg: &RunConfig, latent: usize, action: usize) -> LogicConfig {
        LogicConfig {
            d: cfg.logic_vector_size,
            latent,
            action,
            mlp_layers: cfg.logic_mlp_layers,
            kappa: cfg.kappa,
        }
    }

    fn mlp_dims(&self, input: usize) -> Vec<usize> {
        let mut dims = vec![input];
        dims.extend(std::iter::repeat(self.d).take(self.mlp_layers));
        dims
    }
}

/// One binary gate: MLP branch plus Kronecker-convolution branch.
#[derive(Debug, Clone)]
pub struct GateParams {
    pub mlp: Mlp,
    pub kernel: Mat,
    pub bias: Mat,
}

impl GateParams {
    fn new(rng: &mut ChaCha8Rng, cfg: &LogicConfig) -> GateParams {
        GateParams {
            mlp: operand_mean_mlp(rng, cfg),
            kernel: Mat::from_shape_fn((3, 3), |_| rng.random_range(-0.3..0.3)),
            bias: Mat::zeros((1, cfg.d)),
        }
    }
}

/// Gate MLP initialized near `(v + m) / 2`, plus noise. The averaging map
/// threads the ReLU linear region via bias shifts, which puts the identity,
/// annihilator and idempotence laws close to satisfied from the start; a
/// few thousand plain-SGD steps cannot reach that region from a random
/// init because the similarity saturates.
fn operand_mean_mlp(rng: &mut ChaCha8Rng, cfg: &LogicConfig) -> Mlp {
    let d = cfg.d;
    let shift = 4.0;
    let mut mlp = Mlp::new(rng, &cfg.mlp_dims(2 * d));
    for layer in mlp.layers.iter_mut() {
        layer.w.mapv_inplace(|x| 0.05 * x);
    }
    let n = mlp.layers.len();
    for i in 0..d {
        // First layer: v + m, lifted into the positive region.
        mlp.layers[0].w[(i, i)] += 1.0;
        mlp.layers[0].w[(d + i, i)] += 1.0;
    }
    mlp.layers[0].b.fill(shift);
    // Middle layers: identity in the linear region.
    for l in 1..n - 1 {
        for i in 0..d {
            mlp.layers[l].w[(i, i)] += 1.0;
        }
    }
    // Last layer: scale by 1/2 and remove the lift.
    for i in 0..d {
        mlp.layers[n - 1].w[(i, i)] += 0.5;
    }
    mlp.layers[n - 1].b.fill(-shift / 2.0);
    mlp
}

/// NOT MLP initialized so the residual branch is close to `-2 v`, making
/// `NOT(v) = v + mlp(v)` an approximate negation. Starting at the residual
/// identity leaves the negation law with a saturated, vanishing gradient.
fn negation_mlp(rng: &mut ChaCha8Rng, cfg: &LogicConfig) -> Mlp {
    let d = cfg.d;
    let shift = 4.0;
    let mut mlp = Mlp::new(rng, &cfg.mlp_dims(d));
    for layer in mlp.layers.iter_mut() {
        layer.w.mapv_inplace(|x| 0.05 * x);
    }
    let n = mlp.layers.len();
    for i in 0..d {
        mlp.layers[0].w[(i, i)] += 1.0;
    }
    mlp.layers[0].b.fill(shift);
    for l in 1..n - 1 {
        for i in 0..d {
            mlp.layers[l].w[(i, i)] += 1.0;
        }
    }
    for i in 0..d {
        mlp.layers[n - 1].w[(i, i)] += -2.0;
    }
    mlp.layers[n - 1].b.fill(2.0 * shift);
    mlp
}

impl ParamGroup for GateParams {
    fn visit(&self, f: &mut dyn FnMut(&Mat)) {
        self.mlp.visit(f);
        f(&self.kernel);
        f(&self.bias);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Mat)) {
        self.mlp.visit_mut(f);
        f(&mut self.kernel);
        f(&mut self.bias);
    }
}

/// All trainable System 2 parameters plus the frozen truth anchor.
#[derive(Debug, Clone)]
pub struct LogicParams {
    pub cfg: LogicConfig,
    pub state_emb: Mlp,
    pub action_emb: Mlp,
    pub and_gate: GateParams,
    pub or_gate: GateParams,
    pub not_gate: Mlp,
    /// Fixed at init, never updated by gradients.
    pub truth: Mat,
}

impl LogicParams {
    pub fn new(rng: &mut ChaCha8Rng, cfg: LogicConfig) -> LogicParams {
        let state_emb = Mlp::new(rng, &cfg.mlp_dims(cfg.latent));
        let action_emb = Mlp::new(rng, &cfg.mlp_dims(cfg.latent + cfg.action));
        let and_gate = GateParams::new(rng, &cfg);
        let or_gate = GateParams::new(rng, &cfg);
        let not_gate = negation_mlp(rng, &cfg);
        // Truth anchor drawn uniformly on the unit sphere.
        let mut t = standard_normal_mat(rng, (1, cfg.d));
        let norm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
        t.mapv_inplace(|x| x / norm);
        LogicParams { cfg, state_emb, action_emb, and_gate, or_gate, not_gate, truth: t }
    }

    /// Zero-filled parameters with the right shapes, for deserialization.
    pub fn zeros(cfg: LogicConfig) -> LogicParams {
        LogicParams {
            cfg,
            state_emb: Mlp::zeros(&cfg.mlp_dims(cfg.latent)),
            action_emb: Mlp::zeros(&cfg.mlp_dims(cfg.latent + cfg.action)),
            and_gate: GateParams {
                mlp: Mlp::zeros(&cfg.mlp_dims(2 * cfg.d)),
                kernel: Mat::zeros((3, 3)),
                bias: Mat::zeros((1, cfg.d)),
            },
            or_gate: GateParams {
                mlp: Mlp::zeros(&cfg.mlp_dims(2 * cfg.d)),
                kernel: Mat::zeros((3, 3)),
                bias: Mat::zeros((1, cfg.d)),
            },
            not_gate: Mlp::zeros(&cfg.mlp_dims(cfg.d)),
            truth: Mat::zeros((1, cfg.d)),
        }
    }

    /// Bind onto a tape. The truth anchor is always bound behind a detach;
    /// with `frozen`, the trainable parameters are too.
    pub fn bind(&self, tape: &mut Tape, frozen: bool) -> (LogicIds, BoundIds) {
        let se = bind_group(tape, &self.state_emb, frozen);
        let ae = bind_group(tape, &self.action_emb, frozen);
        let and_b = bind_group(tape, &self.and_gate, frozen);
        let or_b = bind_group(tape, &self.or_gate, frozen);
        let not_b = bind_group(tape, &self.not_gate, frozen);
        let truth_leaf = tape.leaf(self.truth.clone());
        let truth = tape.detach(truth_leaf);
        let mut graph = Vec::new();
        let mut leaves = Vec::new();
        for b in [&se, &ae, &and_b, &or_b, &not_b] {
            graph.extend_from_slice(&b.graph);
            leaves.extend_from_slice(&b.leaves);
        }
        let gate_ids = |b: &BoundIds| {
            let n = b.graph.len();
            GateIds {
                mlp: MlpIds::from_bound(&b.graph[..n - 2]),
                kernel: b.graph[n - 2],
                bias: b.graph[n - 1],
            }
        };
        let ids = LogicIds {
            cfg: self.cfg,
            state_emb: MlpIds::from_bound(&se.graph),
            action_emb: MlpIds::from_bound(&ae.graph),
            and_gate: gate_ids(&and_b),
            or_gate: gate_ids(&or_b),
            not_gate: MlpIds::from_bound(&not_b.graph),
            truth,
            truth_leaf,
            groups: LogicGroupIds {
                state_emb: se,
                action_emb: ae,
                and_gate: and_b,
                or_gate: or_b,
                not_gate: not_b,
            },
        };
        (ids, BoundIds { graph, leaves })
    }
}

impl ParamGroup for LogicParams {
    // The truth anchor is deliberately excluded from the trainable set.
    fn visit(&self, f: &mut dyn FnMut(&Mat)) {
        self.state_emb.visit(f);
        self.action_emb.visit(f);
        self.and_gate.visit(f);
        self.or_gate.visit(f);
        self.not_gate.visit(f);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Mat)) {
        self.state_emb.visit_mut(f);
        self.action_emb.visit_mut(f);
        self.and_gate.visit_mut(f);
        self.or_gate.visit_mut(f);
        self.not_gate.visit_mut(f);
    }
}

#[derive(Debug, Clone)]
pub struct LogicGroupIds {
    pub state_emb: BoundIds,
    pub action_emb: BoundIds,
    pub and_gate: BoundIds,
    pub or_gate: BoundIds,
    pub not_gate: BoundIds,
}

#[derive(Debug, Clone)]
pub struct GateIds {
    pub mlp: MlpIds,
    pub kernel: NodeId,
    pub bias: NodeId,
}

/// Node-id side of [`LogicParams`] on one tape.
pub struct LogicIds {
    pub cfg: LogicConfig,
    pub state_emb: MlpIds,
    pub action_emb: MlpIds,
    pub and_gate: GateIds,
    pub or_gate: GateIds,
    pub not_gate: MlpIds,
    /// Detached truth anchor (`1 x d`).
    pub truth: NodeId,
    /// Raw leaf behind the detach, for immutability assertions.
    pub truth_leaf: NodeId,
    pub groups: LogicGroupIds,
}

/// Train/eval switch plus the operand-shuffle stream.
pub struct GateCtx {
    train: bool,
    rng: ChaCha8Rng,
}

impl GateCtx {
    pub fn eval() -> GateCtx {
        GateCtx { train: false, rng: crate::rng::stream(0, "gate-eval", 0) }
    }

    pub fn train(rng: ChaCha8Rng) -> GateCtx {
        GateCtx { train: true, rng }
    }

    fn swap(&mut self) -> bool {
        self.train && self.rng.random::<bool>()
    }

    /// Random window permutation used by chain folding (identity in eval).
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        if self.train {
            for i in (1..n).rev() {
                let j = self.rng.random_range(0..=i);
                idx.swap(i, j);
            }
        }
        idx
    }

    pub fn is_train(&self) -> bool {
        self.train
    }
}

impl LogicIds {
    pub fn embed_state(&self, tape: &mut Tape, latent: NodeId) -> NodeId {
        self.state_emb.apply(tape, latent)
    }

    pub fn embed_action(&self, tape: &mut Tape, latent: NodeId, action: NodeId) -> NodeId {
        let x = tape.concat_cols(latent, action);
        self.action_emb.apply(tape, x)
    }

    fn gate(&self, tape: &mut Tape, gate: &GateIds, v: NodeId, m: NodeId) -> NodeId {
        let x = tape.concat_cols(v, m);
        let mlp_out = gate.mlp.apply(tape, x);
        let grid = tape.pairwise_outer(v, m);
        let conv = tape.conv3x3(grid, gate.kernel, self.cfg.d);
        let red = tape.row_block_mean(conv, self.cfg.d);
        let both = tape.add(mlp_out, red);
        tape.add_row(both, gate.bias)
    }

    pub fn and(&self, tape: &mut Tape, v: NodeId, m: NodeId, ctx: &mut GateCtx) -> NodeId {
        let (a, b) = if ctx.swap() { (m, v) } else { (v, m) };
        let gate = self.and_gate.clone();
        self.gate(tape, &gate, a, b)
    }

    pub fn or(&self, tape: &mut Tape, v: NodeId, m: NodeId, ctx: &mut GateCtx) -> NodeId {
        let (a, b) = if ctx.swap() { (m, v) } else { (v, m) };
        let gate = self.or_gate.clone();
        self.gate(tape, &gate, a, b)
    }

    /// Residual negation `NOT(v) = v + mlp(v)`.
    pub fn not(&self, tape: &mut Tape, v: NodeId) -> NodeId {
        let delta = self.not_gate.apply(tape, v);
        tape.add(v, delta)
    }

    /// `IMPLY(v, m) = OR(NOT(v), m)`; no weights of its own.
    pub fn imply(&self, tape: &mut Tape, v: NodeId, m: NodeId, ctx: &mut GateCtx) -> NodeId {
        let nv = self.not(tape, v);
        self.or(tape, nv, m, ctx)
    }

    /// `sigmoid(kappa * cos(v, m))` per row, `B x 1`.
    pub fn sim(&self, tape: &mut Tape, v: NodeId, m: NodeId) -> NodeId {
        sim_node(tape, v, m, self.cfg.kappa)
    }

    /// Truth anchor tiled to `b` rows.
    pub fn truth_rows(&self, tape: &mut Tape, b: usize) -> NodeId {
        tape.tile_rows(self.truth, b)
    }

    /// Falsity: current image of the truth anchor under NOT, tiled.
    pub fn falsity_rows(&self, tape: &mut Tape, b: usize) -> NodeId {
        let f = self.not(tape, self.truth);
        tape.tile_rows(f, b)
    }
}

/// Cosine-based logic similarity as a tape node.
pub fn sim_node(tape: &mut Tape, v: NodeId, m: NodeId, kappa: f64) -> NodeId {
    let prod = tape.mul(v, m);
    let dot = tape.sum_cols(prod);
    let v2 = tape.square(v);
    let nv2 = tape.sum_cols(v2);
    let nv = tape.sqrt(nv2);
    let m2 = tape.square(m);
    let nm2 = tape.sum_cols(m2);
    let nm = tape.sqrt(nm2);
    let denom = tape.mul(nv, nm);
    let cos = tape.div(dot, denom);
    let scaled = tape.scale(cos, kappa);
    tape.sigmoid(scaled)
}

/// Per-rule residuals, `1 x 1` nodes in table order, and their mean.
pub struct RegIds {
    pub rules: [NodeId; 14],
    pub total: NodeId,
}

/// Algebraic-law residuals over a sample set `w` (`B x d`).
///
/// Rule 1 is the raw similarity `sim(NOT(w), w)` over `W` plus the anchor;
/// the rest are `1 - sim(lhs, rhs)` for double negation, the AND laws
/// (identity, annihilator, idempotence, complement), the OR laws, and the
/// implication laws built from `OR(NOT(w), .)`.
pub fn regularizer(tape: &mut Tape, ids: &LogicIds, w: NodeId, ctx: &mut GateCtx) -> RegIds {
    let b = tape.shape(w).0;
    let t_rows = ids.truth_rows(tape, b);
    let f_rows = ids.falsity_rows(tape, b);
    let not_w = ids.not(tape, w);
    let not_not_w = ids.not(tape, not_w);

    let mean_sim = |tape: &mut Tape, x: NodeId, y: NodeId| {
        let s = sim_node(tape, x, y, ids.cfg.kappa);
        tape.mean_all(s)
    };
    let one_minus_mean_sim = |tape: &mut Tape, x: NodeId, y: NodeId| {
        let s = mean_sim(tape, x, y);
        let n = tape.neg(s);
        tape.add_scalar(n, 1.0)
    };

    // Negation law runs over W plus the truth anchor itself.
    let w_and_t = tape.concat_rows(w, ids.truth);
    let not_w_and_t = ids.not(tape, w_and_t);
    let r1 = mean_sim(tape, not_w_and_t, w_and_t);

    let r2 = one_minus_mean_sim(tape, not_not_w, w);

    let and_wt = ids.and(tape, w, t_rows, ctx);
    let r3 = one_minus_mean_sim(tape, and_wt, w);
    let and_wf = ids.and(tape, w, f_rows, ctx);
    let r4 = one_minus_mean_sim(tape, and_wf, f_rows);
    let and_ww = ids.and(tape, w, w, ctx);
    let r5 = one_minus_mean_sim(tape, and_ww, w);
    let and_wn = ids.and(tape, w, not_w, ctx);
    let r6 = one_minus_mean_sim(tape, and_wn, f_rows);

    let or_wf = ids.or(tape, w, f_rows, ctx);
    let r7 = one_minus_mean_sim(tape, or_wf, w);
    let or_wt = ids.or(tape, w, t_rows, ctx);
    let r8 = one_minus_mean_sim(tape, or_wt, t_rows);
    let or_ww = ids.or(tape, w, w, ctx);
    let r9 = one_minus_mean_sim(tape, or_ww, w);
    let or_wn = ids.or(tape, w, not_w, ctx);
    let r10 = one_minus_mean_sim(tape, or_wn, t_rows);

    let or_nt = ids.or(tape, not_w, t_rows, ctx);
    let r11 = one_minus_mean_sim(tape, or_nt, t_rows);
    let or_nf = ids.or(tape, not_w, f_rows, ctx);
    let r12 = one_minus_mean_sim(tape, or_nf, not_w);
    let or_nw = ids.or(tape, not_w, w, ctx);
    let r13 = one_minus_mean_sim(tape, or_nw, t_rows);
    let or_nn = ids.or(tape, not_w, not_w, ctx);
    let r14 = one_minus_mean_sim(tape, or_nn, not_w);

    let rules = [r1, r2, r3, r4, r5, r6, r7, r8, r9, r10, r11, r12, r13, r14];
    let mut acc = rules[0];
    for r in &rules[1..] {
        acc = tape.add(acc, *r);
    }
    let total = tape.scale(acc, 1.0 / 14.0);
    RegIds { rules, total }
}

/// Sum of squared norms of the bound parameters plus any extra nodes
/// (typically the embedder outputs of the current step).
pub fn l2_penalty(tape: &mut Tape, bound: &BoundIds, extra: &[NodeId]) -> NodeId {
    let mut acc: Option<NodeId> = None;
    for id in bound.graph.iter().copied().chain(extra.iter().copied()) {
        let sq = tape.square(id);
        let s = tape.sum_all(sq);
        acc = Some(match acc {
            Some(a) => tape.add(a, s),
            None => s,
        });
    }
    acc.expect("l2 penalty over empty set")
}

// ---------------------------------------------------------------------------
// Value-level operation surface.
// ---------------------------------------------------------------------------

fn check_finite(name: &str, v: &Array1<f64>) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(name.to_string()));
    }
    Ok(())
}

pub fn embed_state(params: &LogicParams, latent: &Array1<f64>) -> Result<LogicVector> {
    check_finite("latent", latent)?;
    let mut tape = Tape::new();
    let (ids, _) = params.bind(&mut tape, true);
    let s = tape.leaf(row(latent));
    let v = ids.embed_state(&mut tape, s);
    Ok(LogicVector(unrow(tape.value(v))))
}

pub fn embed_action(
    params: &LogicParams,
    latent: &Array1<f64>,
    action: &Array1<f64>,
) -> Result<LogicVector> {
    check_finite("latent", latent)?;
    check_finite("action", action)?;
    let mut tape = Tape::new();
    let (ids, _) = params.bind(&mut tape, true);
    let s = tape.leaf(row(latent));
    let a = tape.leaf(row(action));
    let m = ids.embed_action(&mut tape, s, a);
    Ok(LogicVector(unrow(tape.value(m))))
}

enum Gate {
    And,
    Or,
    Imply,
}

fn binary_gate(
    params: &LogicParams,
    v: &LogicVector,
    m: &LogicVector,
    which: Gate,
) -> Result<LogicVector> {
    check_finite("logic vector v", &v.0)?;
    check_finite("logic vector m", &m.0)?;
    let mut tape = Tape::new();
    let (ids, _) = params.bind(&mut tape, true);
    let mut ctx = GateCtx::eval();
    let vn = tape.leaf(row(&v.0));
    let mn = tape.leaf(row(&m.0));
    let out = match which {
        Gate::And => ids.and(&mut tape, vn, mn, &mut ctx),
        Gate::Or => ids.or(&mut tape, vn, mn, &mut ctx),
        Gate::Imply => ids.imply(&mut tape, vn, mn, &mut ctx),
    };
    Ok(LogicVector(unrow(tape.value(out))))
}

pub fn gate_and(params: &LogicParams, v: &LogicVector, m: &LogicVector) -> Result<LogicVector> {
    binary_gate(params, v, m, Gate::And)
}

pub fn gate_or(params: &LogicParams, v: &LogicVector, m: &LogicVector) -> Result<LogicVector> {
    binary_gate(params, v, m, Gate::Or)
}

pub fn gate_imply(params: &LogicParams, v: &LogicVector, m: &LogicVector) -> Result<LogicVector> {
    binary_gate(params, v, m, Gate::Imply)
}

pub fn gate_not(params: &LogicParams, v: &LogicVector) -> Result<LogicVector> {
    check_finite("logic vector", &v.0)?;
    let mut tape = Tape::new();
    let (ids, _) = params.bind(&mut tape, true);
    let vn = tape.leaf(row(&v.0));
    let out = ids.not(&mut tape, vn);
    Ok(LogicVector(unrow(tape.value(out))))
}

/// Current anchors: `T` and `F = NOT(T)`.
pub fn anchors(params: &LogicParams) -> (LogicVector, LogicVector) {
    let t = LogicVector(unrow(&params.truth));
    let f = gate_not(params, &t).expect("anchor is finite");
    (t, f)
}

/// `sigmoid(kappa * cos(v, m))`. Errors on a zero-norm operand.
pub fn sim(v: &LogicVector, m: &LogicVector, kappa: f64) -> Result<f64> {
    check_finite("logic vector v", &v.0)?;
    check_finite("logic vector m", &m.0)?;
    let nv = v.0.dot(&v.0).sqrt();
    let nm = m.0.dot(&m.0).sqrt();
    if nv == 0.0 || nm == 0.0 {
        return Err(Error::InvalidInput("sim of a zero-norm logic vector".into()));
    }
    let cos = v.0.dot(&m.0) / (nv * nm);
    Ok(sigmoid_scalar(kappa * cos))
}

pub fn sigmoid_scalar(x: f64) -> f64 {
    0.5 * (1.0 + (0.5 * x).tanh())
}

/// Per-rule residual values at evaluation (no operand shuffling).
pub fn regularizer_loss(params: &LogicParams, sample: &Mat) -> Result<(f64, [f64; 14])> {
    if sample.nrows() == 0 {
        return Err(Error::InvalidInput("empty regularizer sample set".into()));
    }
    let mut tape = Tape::new();
    let (ids, _) = params.bind(&mut tape, true);
    let w = tape.leaf(sample.clone());
    let mut ctx = GateCtx::eval();
    let reg = regularizer(&mut tape, &ids, w, &mut ctx);
    let rules: Vec<f64> = reg.rules.iter().map(|&r| tape.scalar_value(r)).collect();
    Ok((tape.scalar_value(reg.total), rules.try_into().unwrap()))
}
