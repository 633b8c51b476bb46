//! Parameter containers, tape binding, and first-order optimizers.
//!
//! A parameter struct owns plain matrices. `bind` inserts them as tape leaves
//! for one graph, returning a twin struct of node ids; `visit`/`node_ids`
//! enumerate both sides in the same canonical order so gradients line up
//! with optimizer state and checkpoint blocks.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::tape::{Gradients, Mat, NodeId, Tape};

/// Canonical enumeration of a parameter group's matrices.
pub trait ParamGroup {
    fn visit(&self, f: &mut dyn FnMut(&Mat));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Mat));

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |m| n += m.len());
        n
    }

    fn matrices(&self) -> Vec<Mat> {
        let mut out = Vec::new();
        self.visit(&mut |m| out.push(m.clone()));
        out
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        self.visit(&mut |m| out.push(m.dim()));
        out
    }

    fn load_matrices(&mut self, mats: &[Mat]) -> crate::error::Result<()> {
        let mut idx = 0usize;
        let mut err = None;
        self.visit_mut(&mut |m| {
            if err.is_some() {
                return;
            }
            if idx >= mats.len() || mats[idx].dim() != m.dim() {
                err = Some(idx);
                return;
            }
            m.assign(&mats[idx]);
            idx += 1;
        });
        if let Some(i) = err {
            return Err(crate::error::Error::ShapeMismatch(format!(
                "parameter block {i} does not match the expected shape"
            )));
        }
        if idx != mats.len() {
            return Err(crate::error::Error::ShapeMismatch(format!(
                "expected {idx} parameter blocks, found {}",
                mats.len()
            )));
        }
        Ok(())
    }
}

/// Node-id side of a bound parameter group, in `visit` order. `graph` nodes
/// feed the computation; `leaves` are the raw parameter leaves, which is
/// where gradients are read (identical unless the group was bound frozen).
#[derive(Debug, Clone)]
pub struct BoundIds {
    pub graph: Vec<NodeId>,
    pub leaves: Vec<NodeId>,
}

impl BoundIds {
    pub fn grads(&self, tape: &Tape, grads: &Gradients) -> Vec<Mat> {
        self.leaves
            .iter()
            .map(|&id| grads.wrt(id, tape.shape(id)))
            .collect()
    }
}

/// Bind every matrix of a group as a tape leaf. With `frozen`, each graph
/// node is a detach of its leaf, so the leaves provably receive zero
/// gradient.
pub fn bind_group(tape: &mut Tape, group: &dyn ParamGroup, frozen: bool) -> BoundIds {
    let mut graph = Vec::new();
    let mut leaves = Vec::new();
    group.visit(&mut |m| {
        let leaf = tape.leaf(m.clone());
        leaves.push(leaf);
        graph.push(if frozen { tape.detach(leaf) } else { leaf });
    });
    BoundIds { graph, leaves }
}

fn uniform_init(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Mat {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-scale..scale))
}

/// Dense layer, `w: in x out`, `b: 1 x out`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: Mat,
    pub b: Mat,
}

impl Linear {
    pub fn new(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Self {
        let scale = (6.0 / (fan_in + fan_out) as f64).sqrt();
        Linear {
            w: uniform_init(rng, fan_in, fan_out, scale),
            b: Mat::zeros((1, fan_out)),
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Linear { w: Mat::zeros((fan_in, fan_out)), b: Mat::zeros((1, fan_out)) }
    }
}

impl ParamGroup for Linear {
    fn visit(&self, f: &mut dyn FnMut(&Mat)) {
        f(&self.w);
        f(&self.b);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Mat)) {
        f(&mut self.w);
        f(&mut self.b);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LinearIds {
    pub w: NodeId,
    pub b: NodeId,
}

impl LinearIds {
    pub fn apply(&self, tape: &mut Tape, x: NodeId) -> NodeId {
        let y = tape.matmul(x, self.w);
        tape.add_row(y, self.b)
    }
}

/// MLP of affine layers with ReLU between them (linear output).
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    /// `dims = [in, h1, ..., out]` gives `dims.len() - 1` affine layers.
    pub fn new(rng: &mut ChaCha8Rng, dims: &[usize]) -> Self {
        assert!(dims.len() >= 2);
        let layers = dims
            .windows(2)
            .map(|w| Linear::new(rng, w[0], w[1]))
            .collect();
        Mlp { layers }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let layers = dims.windows(2).map(|w| Linear::zeros(w[0], w[1])).collect();
        Mlp { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().w.ncols()
    }
}

impl ParamGroup for Mlp {
    fn visit(&self, f: &mut dyn FnMut(&Mat)) {
        for l in &self.layers {
            l.visit(f);
        }
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Mat)) {
        for l in &mut self.layers {
            l.visit_mut(f);
        }
    }
}

#[derive(Debug, Clone)]
pub struct MlpIds {
    pub layers: Vec<LinearIds>,
}

impl MlpIds {
    pub fn from_bound(ids: &[NodeId]) -> Self {
        assert!(ids.len() % 2 == 0);
        let layers = ids
            .chunks(2)
            .map(|c| LinearIds { w: c[0], b: c[1] })
            .collect();
        MlpIds { layers }
    }

    /// Forward pass with ReLU between layers and a linear last layer.
    pub fn apply(&self, tape: &mut Tape, x: NodeId) -> NodeId {
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            h = l.apply(tape, h);
            if i != last {
                h = tape.relu(h);
            }
        }
        h
    }
}

/// Gated recurrent cell: update/reset gates and a candidate state.
#[derive(Debug, Clone)]
pub struct Gru {
    pub wx_r: Mat,
    pub wh_r: Mat,
    pub b_r: Mat,
    pub wx_u: Mat,
    pub wh_u: Mat,
    pub b_u: Mat,
    pub wx_c: Mat,
    pub wh_c: Mat,
    pub b_c: Mat,
}

impl Gru {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Gru {
            wx_r: Mat::zeros((input, hidden)),
            wh_r: Mat::zeros((hidden, hidden)),
            b_r: Mat::zeros((1, hidden)),
            wx_u: Mat::zeros((input, hidden)),
            wh_u: Mat::zeros((hidden, hidden)),
            b_u: Mat::zeros((1, hidden)),
            wx_c: Mat::zeros((input, hidden)),
            wh_c: Mat::zeros((hidden, hidden)),
            b_c: Mat::zeros((1, hidden)),
        }
    }

    pub fn new(rng: &mut ChaCha8Rng, input: usize, hidden: usize) -> Self {
        let sx = (6.0 / (input + hidden) as f64).sqrt();
        let sh = (6.0 / (2 * hidden) as f64).sqrt();
        Gru {
            wx_r: uniform_init(rng, input, hidden, sx),
            wh_r: uniform_init(rng, hidden, hidden, sh),
            b_r: Mat::zeros((1, hidden)),
            wx_u: uniform_init(rng, input, hidden, sx),
            wh_u: uniform_init(rng, hidden, hidden, sh),
            b_u: Mat::zeros((1, hidden)),
            wx_c: uniform_init(rng, input, hidden, sx),
            wh_c: uniform_init(rng, hidden, hidden, sh),
            b_c: Mat::zeros((1, hidden)),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.wh_r.nrows()
    }
}

impl ParamGroup for Gru {
    fn visit(&self, f: &mut dyn FnMut(&Mat)) {
        for m in [
            &self.wx_r, &self.wh_r, &self.b_r, &self.wx_u, &self.wh_u, &self.b_u, &self.wx_c,
            &self.wh_c, &self.b_c,
        ] {
            f(m);
        }
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Mat)) {
        for m in [
            &mut self.wx_r, &mut self.wh_r, &mut self.b_r, &mut self.wx_u, &mut self.wh_u,
            &mut self.b_u, &mut self.wx_c, &mut self.wh_c, &mut self.b_c,
        ] {
            f(m);
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GruIds {
    pub wx_r: NodeId,
    pub wh_r: NodeId,
    pub b_r: NodeId,
    pub wx_u: NodeId,
    pub wh_u: NodeId,
    pub b_u: NodeId,
    pub wx_c: NodeId,
    pub wh_c: NodeId,
    pub b_c: NodeId,
}

impl GruIds {
    pub fn from_bound(ids: &[NodeId]) -> Self {
        assert_eq!(ids.len(), 9);
        GruIds {
            wx_r: ids[0],
            wh_r: ids[1],
            b_r: ids[2],
            wx_u: ids[3],
            wh_u: ids[4],
            b_u: ids[5],
            wx_c: ids[6],
            wh_c: ids[7],
            b_c: ids[8],
        }
    }

    /// One recurrent update `h' = u*h + (1-u)*c` with reset-gated candidate.
    pub fn step(&self, tape: &mut Tape, h: NodeId, x: NodeId) -> NodeId {
        let xr = tape.matmul(x, self.wx_r);
        let hr = tape.matmul(h, self.wh_r);
        let pre_r = tape.add(xr, hr);
        let pre_r = tape.add_row(pre_r, self.b_r);
        let r = tape.sigmoid(pre_r);

        let xu = tape.matmul(x, self.wx_u);
        let hu = tape.matmul(h, self.wh_u);
        let pre_u = tape.add(xu, hu);
        let pre_u = tape.add_row(pre_u, self.b_u);
        let u = tape.sigmoid(pre_u);

        let rh = tape.mul(r, h);
        let xc = tape.matmul(x, self.wx_c);
        let hc = tape.matmul(rh, self.wh_c);
        let pre_c = tape.add(xc, hc);
        let pre_c = tape.add_row(pre_c, self.b_c);
        let c = tape.tanh(pre_c);

        let uh = tape.mul(u, h);
        let one_minus_u = tape.neg(u);
        let one_minus_u = tape.add_scalar(one_minus_u, 1.0);
        let uc = tape.mul(one_minus_u, c);
        tape.add(uh, uc)
    }
}

/// Nudge every parameter (biases included) away from zero. Gradient oracles
/// use this: at the pristine init, zero biases and the zero initial state
/// park ReLU preactivations exactly on their kink, where central differences
/// straddle the nondifferentiable point.
pub fn jitter_params(group: &mut dyn ParamGroup, rng: &mut ChaCha8Rng, scale: f64) {
    group.visit_mut(&mut |m| {
        m.mapv_inplace(|x| {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            x + sign * rng.random_range(0.2 * scale..scale)
        });
    });
}

/// Rescale gradients in place when their global norm exceeds `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_grad_norm(grads: &mut [Mat], max_norm: f64) -> f64 {
    let mut sq = 0.0;
    for g in grads.iter() {
        sq += g.iter().map(|x| x * x).sum::<f64>();
    }
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            g.mapv_inplace(|x| x * s);
        }
    }
    norm
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub eps: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub t: u64,
    pub m: Vec<Mat>,
    pub v: Vec<Mat>,
}

impl Adam {
    pub fn new(lr: f64, eps: f64) -> Self {
        Adam { lr, eps, beta1: 0.9, beta2: 0.999, t: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn step(&mut self, params: &mut dyn ParamGroup, grads: &[Mat]) {
        if self.m.is_empty() {
            params.visit(&mut |p| {
                self.m.push(Mat::zeros(p.dim()));
                self.v.push(Mat::zeros(p.dim()));
            });
        }
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        let mut i = 0usize;
        params.visit_mut(&mut |p| {
            let g = &grads[i];
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            m.zip_mut_with(g, |mm, gg| *mm = self.beta1 * *mm + (1.0 - self.beta1) * gg);
            v.zip_mut_with(g, |vv, gg| *vv = self.beta2 * *vv + (1.0 - self.beta2) * gg * gg);
            for ((pp, mm), vv) in p.iter_mut().zip(m.iter()).zip(v.iter()) {
                let mhat = mm / b1t;
                let vhat = vv / b2t;
                *pp -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
            i += 1;
        });
    }
}

/// Plain stochastic gradient descent.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub lr: f64,
}

impl Sgd {
    pub fn new(lr: f64) -> Self {
        Sgd { lr }
    }

    pub fn step(&self, params: &mut dyn ParamGroup, grads: &[Mat]) {
        let mut i = 0usize;
        params.visit_mut(&mut |p| {
            p.zip_mut_with(&grads[i], |pp, gg| *pp -= self.lr * gg);
            i += 1;
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdcheck::{fd_grad_scalar, max_abs_rel_err};
    use crate::rng::stream;

    #[test]
    fn gru_step_gradients_match_finite_differences() {
        let mut rng = stream(11, "test", 0);
        let gru = Gru::new(&mut rng, 3, 4);
        let h0 = uniform_init(&mut rng, 2, 4, 0.8);
        let x0 = uniform_init(&mut rng, 2, 3, 0.8);

        let run = |mats: &[Mat]| {
            let mut g = Gru::zeros_like(&gru);
            g.load_matrices(&mats[..9]).unwrap();
            let mut t = Tape::new();
            let bound = bind_group(&mut t, &g, false);
            let ids = GruIds::from_bound(&bound.graph);
            let h = t.leaf(mats[9].clone());
            let x = t.leaf(mats[10].clone());
            let out = ids.step(&mut t, h, x);
            let s = t.square(out);
            let l = t.sum_all(s);
            t.scalar_value(l)
        };
        let mut inputs = gru.matrices();
        inputs.push(h0.clone());
        inputs.push(x0.clone());
        let fd = fd_grad_scalar(run, &inputs, 1e-5);

        let mut t = Tape::new();
        let bound = bind_group(&mut t, &gru, false);
        let ids = GruIds::from_bound(&bound.graph);
        let h = t.leaf(h0);
        let x = t.leaf(x0);
        let out = ids.step(&mut t, h, x);
        let s = t.square(out);
        let l = t.sum_all(s);
        let grads = t.backward(l);
        let got = bound.grads(&t, &grads);
        for (i, g) in got.iter().enumerate() {
            assert!(
                max_abs_rel_err(g, &fd[i]) < 1e-6,
                "gru param {i} grad mismatch"
            );
        }
        assert!(max_abs_rel_err(&grads.wrt(h, (2, 4)), &fd[9]) < 1e-6);
        assert!(max_abs_rel_err(&grads.wrt(x, (2, 3)), &fd[10]) < 1e-6);
    }

    impl Gru {
        fn zeros_like(other: &Gru) -> Gru {
            let mut g = other.clone();
            g.visit_mut(&mut |m| m.fill(0.0));
            g
        }
    }

    #[test]
    fn adam_reduces_quadratic_loss() {
        let mut lin = Linear::zeros(1, 1);
        lin.w[(0, 0)] = 5.0;
        let mut adam = Adam::new(0.1, 1e-8);
        for _ in 0..200 {
            let grads = vec![
                Mat::from_elem((1, 1), 2.0 * lin.w[(0, 0)]),
                Mat::zeros((1, 1)),
            ];
            adam.step(&mut lin, &grads);
        }
        assert!(lin.w[(0, 0)].abs() < 1e-2);
    }

    #[test]
    fn clip_rescales_only_above_threshold() {
        let mut grads = vec![Mat::from_elem((2, 2), 3.0)];
        let norm = clip_grad_norm(&mut grads, 100.0);
        assert!((norm - 6.0).abs() < 1e-12);
        assert_eq!(grads[0][(0, 0)], 3.0);
        let norm2 = clip_grad_norm(&mut grads, 3.0);
        assert!((norm2 - 6.0).abs() < 1e-12);
        assert!((grads[0][(0, 0)] - 1.5).abs() < 1e-12);
    }
}
