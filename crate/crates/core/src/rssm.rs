//! System 1: recurrent state-space model.
//!
//! A deterministic belief `h` evolves through a gated recurrent cell driven
//! by the previous stochastic state and action; a stochastic state `z` is
//! sampled from diagonal Gaussians (prior from `h` alone, posterior from
//! `h` and the encoded observation). Decoder and reward heads read `(h, z)`.
//! The loss is prediction error plus two KL terms with stop-gradients on
//! opposite sides and a free-nats floor.

use ndarray::Array1;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::nn::{bind_group, BoundIds, Gru, GruIds, Mlp, MlpIds, ParamGroup};
use crate::replay::SequenceBatch;
use crate::tape::{Mat, NodeId, Tape};

/// Floor added to the softplus of the pre-stddev.
pub const SIGMA_FLOOR: f64 = 0.1;

pub const LN_2PI: f64 = 1.8378770664093453;

/// Layer widths of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct S1Dims {
    pub obs: usize,
    pub action: usize,
    pub belief: usize,
    pub state: usize,
    pub embed: usize,
    pub hidden: usize,
}

impl S1Dims {
    pub fn from_config(cfg: &RunConfig, obs: usize, action: usize) -> S1Dims {
        S1Dims {
            obs,
            action,
            belief: cfg.belief_size,
            state: cfg.state_size,
            embed: cfg.embedding_size,
            hidden: cfg.hidden_size,
        }
    }

    pub fn latent(&self) -> usize {
        self.belief + self.state
    }
}

/// Loss weighting.
#[derive(Debug, Clone, Copy)]
pub struct S1LossCfg {
    pub free_nats: f64,
    pub dyn_weight: f64,
    pub rep_weight: f64,
    /// Normal training detaches the posterior in the dynamics term and the
    /// prior in the representation term. Finite-difference oracles disable
    /// this so both sides differentiate the same function.
    pub stop_gradients: bool,
}

impl S1LossCfg {
    pub fn from_config(cfg: &RunConfig) -> S1LossCfg {
        S1LossCfg {
            free_nats: cfg.free_nats,
            dyn_weight: cfg.dyn_loss_weight,
            rep_weight: cfg.rep_loss_weight,
            stop_gradients: true,
        }
    }
}

/// Paired deterministic/stochastic latent at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub h: Array1<f64>,
    pub z: Array1<f64>,
}

impl ModelState {
    pub fn latent(&self) -> Array1<f64> {
        let mut v = Array1::zeros(self.h.len() + self.z.len());
        v.slice_mut(ndarray::s![..self.h.len()]).assign(&self.h);
        v.slice_mut(ndarray::s![self.h.len()..]).assign(&self.z);
        v
    }
}

/// Diagonal Gaussian with a strictly positive stddev.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl DiagGaussian {
    /// Closed-form KL divergence `KL(self || other)`.
    pub fn kl(&self, other: &DiagGaussian) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.mean.len() {
            let (m1, s1) = (self.mean[i], self.std[i]);
            let (m2, s2) = (other.mean[i], other.std[i]);
            acc += (s2 / s1).ln() + (s1 * s1 + (m1 - m2) * (m1 - m2)) / (2.0 * s2 * s2) - 0.5;
        }
        acc
    }
}

/// All System 1 parameters.
#[derive(Debug, Clone)]
pub struct S1Params {
    pub dims: S1Dims,
    pub gru: Gru,
    pub encoder: Mlp,
    pub prior_head: Mlp,
    pub post_head: Mlp,
    pub decoder: Mlp,
    pub reward_head: Mlp,
}

impl S1Params {
    pub fn new(rng: &mut ChaCha8Rng, dims: S1Dims) -> S1Params {
        S1Params {
            dims,
            gru: Gru::new(rng, dims.state + dims.action, dims.belief),
            encoder: Mlp::new(rng, &[dims.obs, dims.embed, dims.embed]),
            prior_head: Mlp::new(rng, &[dims.belief, dims.hidden, 2 * dims.state]),
            post_head: Mlp::new(rng, &[dims.belief + dims.embed, dims.hidden, 2 * dims.state]),
            decoder: Mlp::new(rng, &[dims.latent(), dims.hidden, dims.hidden, dims.obs]),
            reward_head: Mlp::new(rng, &[dims.latent(), dims.hidden, dims.hidden, 1]),
        }
    }

    /// Zero-filled parameters with the right shapes, for deserialization.
    pub fn zeros(dims: S1Dims) -> S1Params {
        S1Params {
            dims,
            gru: Gru::zeros(dims.state + dims.action, dims.belief),
            encoder: Mlp::zeros(&[dims.obs, dims.embed, dims.embed]),
            prior_head: Mlp::zeros(&[dims.belief, dims.hidden, 2 * dims.state]),
            post_head: Mlp::zeros(&[dims.belief + dims.embed, dims.hidden, 2 * dims.state]),
            decoder: Mlp::zeros(&[dims.latent(), dims.hidden, dims.hidden, dims.obs]),
            reward_head: Mlp::zeros(&[dims.latent(), dims.hidden, dims.hidden, 1]),
        }
    }

    /// Bind all parameters onto a tape. With `frozen`, every leaf is
    /// detached so gradients provably stop at the boundary.
    pub fn bind(&self, tape: &mut Tape, frozen: bool) -> (S1Ids, BoundIds) {
        let gru = bind_group(tape, &self.gru, frozen);
        let enc = bind_group(tape, &self.encoder, frozen);
        let prior = bind_group(tape, &self.prior_head, frozen);
        let post = bind_group(tape, &self.post_head, frozen);
        let dec = bind_group(tape, &self.decoder, frozen);
        let rew = bind_group(tape, &self.reward_head, frozen);
        let mut graph = Vec::new();
        let mut leaves = Vec::new();
        for b in [&gru, &enc, &prior, &post, &dec, &rew] {
            graph.extend_from_slice(&b.graph);
            leaves.extend_from_slice(&b.leaves);
        }
        let ids = S1Ids {
            dims: self.dims,
            gru: GruIds::from_bound(&gru.graph),
            encoder: MlpIds::from_bound(&enc.graph),
            prior_head: MlpIds::from_bound(&prior.graph),
            post_head: MlpIds::from_bound(&post.graph),
            decoder: MlpIds::from_bound(&dec.graph),
            reward_head: MlpIds::from_bound(&rew.graph),
            groups: S1GroupIds {
                gru,
                encoder: enc,
                prior_head: prior,
                post_head: post,
                decoder: dec,
                reward_head: rew,
            },
        };
        (ids, BoundIds { graph, leaves })
    }
}

impl ParamGroup for S1Params {
    fn visit(&self, f: &mut dyn FnMut(&Mat)) {
        self.gru.visit(f);
        self.encoder.visit(f);
        self.prior_head.visit(f);
        self.post_head.visit(f);
        self.decoder.visit(f);
        self.reward_head.visit(f);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Mat)) {
        self.gru.visit_mut(f);
        self.encoder.visit_mut(f);
        self.prior_head.visit_mut(f);
        self.post_head.visit_mut(f);
        self.decoder.visit_mut(f);
        self.reward_head.visit_mut(f);
    }
}

/// Per-subnetwork bound ids, used by stop-gradient assertions.
#[derive(Debug, Clone)]
pub struct S1GroupIds {
    pub gru: BoundIds,
    pub encoder: BoundIds,
    pub prior_head: BoundIds,
    pub post_head: BoundIds,
    pub decoder: BoundIds,
    pub reward_head: BoundIds,
}

/// Node-id side of [`S1Params`] on one tape.
#[derive(Debug, Clone)]
pub struct S1Ids {
    pub dims: S1Dims,
    pub gru: GruIds,
    pub encoder: MlpIds,
    pub prior_head: MlpIds,
    pub post_head: MlpIds,
    pub decoder: MlpIds,
    pub reward_head: MlpIds,
    pub groups: S1GroupIds,
}

/// Diagonal Gaussian as tape nodes.
#[derive(Debug, Clone, Copy)]
pub struct GaussIds {
    pub mean: NodeId,
    pub std: NodeId,
}

impl GaussIds {
    pub fn detached(&self, tape: &mut Tape) -> GaussIds {
        GaussIds { mean: tape.detach(self.mean), std: tape.detach(self.std) }
    }
}

impl S1Ids {
    /// `h_t = f(h_{t-1}, z_{t-1}, a_{t-1})`.
    pub fn step_h(&self, tape: &mut Tape, h: NodeId, z: NodeId, a: NodeId) -> NodeId {
        let x = tape.concat_cols(z, a);
        self.gru.step(tape, h, x)
    }

    pub fn encode(&self, tape: &mut Tape, obs: NodeId) -> NodeId {
        self.encoder.apply(tape, obs)
    }

    fn gauss_from(&self, tape: &mut Tape, pre: NodeId) -> GaussIds {
        let n = self.dims.state;
        let mean = tape.slice_cols(pre, 0, n);
        let raw = tape.slice_cols(pre, n, 2 * n);
        let sp = tape.softplus(raw);
        let std = tape.add_scalar(sp, SIGMA_FLOOR);
        GaussIds { mean, std }
    }

    pub fn prior(&self, tape: &mut Tape, h: NodeId) -> GaussIds {
        let pre = self.prior_head.apply(tape, h);
        self.gauss_from(tape, pre)
    }

    pub fn posterior(&self, tape: &mut Tape, h: NodeId, embed: NodeId) -> GaussIds {
        let x = tape.concat_cols(h, embed);
        let pre = self.post_head.apply(tape, x);
        self.gauss_from(tape, pre)
    }

    /// Reparameterized sample `z = mean + std * eps`.
    pub fn sample(&self, tape: &mut Tape, gauss: GaussIds, eps: Mat) -> NodeId {
        let e = tape.leaf(eps);
        let scaled = tape.mul(gauss.std, e);
        tape.add(gauss.mean, scaled)
    }

    pub fn decode(&self, tape: &mut Tape, h: NodeId, z: NodeId) -> NodeId {
        let s = tape.concat_cols(h, z);
        self.decoder.apply(tape, s)
    }

    pub fn reward(&self, tape: &mut Tape, h: NodeId, z: NodeId) -> NodeId {
        let s = tape.concat_cols(h, z);
        self.reward_head.apply(tape, s)
    }
}

/// Closed-form diagonal-Gaussian KL as a `B x 1` node.
pub fn kl_diag(tape: &mut Tape, q: GaussIds, p: GaussIds) -> NodeId {
    let ln_p = tape.ln(p.std);
    let ln_q = tape.ln(q.std);
    let log_ratio = tape.sub(ln_p, ln_q);
    let var_q = tape.square(q.std);
    let dmean = tape.sub(q.mean, p.mean);
    let dmean2 = tape.square(dmean);
    let num = tape.add(var_q, dmean2);
    let var_p = tape.square(p.std);
    let denom = tape.scale(var_p, 2.0);
    let frac = tape.div(num, denom);
    let term = tape.add(log_ratio, frac);
    let term = tape.add_scalar(term, -0.5);
    tape.sum_cols(term)
}

/// Gaussian negative log-likelihood with unit variance, summed over feature
/// columns: `0.5 e^2 + 0.5 ln(2 pi)` per dimension. Returns `B x 1`.
pub fn gaussian_nll(tape: &mut Tape, pred: NodeId, target: NodeId) -> NodeId {
    let err = tape.sub(pred, target);
    let sq = tape.square(err);
    let half = tape.scale(sq, 0.5);
    let shifted = tape.add_scalar(half, 0.5 * LN_2PI);
    tape.sum_cols(shifted)
}

/// Posterior filtering pass over a sequence batch.
pub struct Rollout {
    /// Per-step observation leaves (reused by the loss).
    pub obs: Vec<NodeId>,
    pub h: Vec<NodeId>,
    pub z: Vec<NodeId>,
    pub priors: Vec<GaussIds>,
    pub posts: Vec<GaussIds>,
}

/// Run the posterior left to right. Rows flagged `is_first` restart from the
/// all-zero initial state before their step.
pub fn observe_sequence(
    tape: &mut Tape,
    ids: &S1Ids,
    batch: &SequenceBatch,
    rng: &mut ChaCha8Rng,
) -> Rollout {
    let b = batch.batch;
    let dims = ids.dims;
    let mut rollout = Rollout {
        obs: Vec::with_capacity(batch.len),
        h: Vec::with_capacity(batch.len),
        z: Vec::with_capacity(batch.len),
        priors: Vec::with_capacity(batch.len),
        posts: Vec::with_capacity(batch.len),
    };
    let mut prev_h = tape.leaf(Mat::zeros((b, dims.belief)));
    let mut prev_z = tape.leaf(Mat::zeros((b, dims.state)));
    for t in 0..batch.len {
        if t > 0 && batch.is_first[t].iter().any(|&f| f) {
            let mut mask = Mat::zeros((b, 1));
            for (row, &f) in batch.is_first[t].iter().enumerate() {
                mask[(row, 0)] = if f { 0.0 } else { 1.0 };
            }
            let keep_h = tape.leaf(mask_cols(&mask, dims.belief));
            let keep_z = tape.leaf(mask_cols(&mask, dims.state));
            prev_h = tape.mul(prev_h, keep_h);
            prev_z = tape.mul(prev_z, keep_z);
        }
        let a = tape.leaf(batch.actions[t].clone());
        let h = ids.step_h(tape, prev_h, prev_z, a);
        let obs = tape.leaf(batch.observations[t].clone());
        let embed = ids.encode(tape, obs);
        let prior = ids.prior(tape, h);
        let post = ids.posterior(tape, h, embed);
        let eps = standard_normal_mat(rng, (b, dims.state));
        let z = ids.sample(tape, post, eps);
        rollout.obs.push(obs);
        rollout.h.push(h);
        rollout.z.push(z);
        rollout.priors.push(prior);
        rollout.posts.push(post);
        prev_h = h;
        prev_z = z;
    }
    rollout
}

fn mask_cols(mask: &Mat, cols: usize) -> Mat {
    let b = mask.nrows();
    let mut out = Mat::zeros((b, cols));
    for r in 0..b {
        out.row_mut(r).fill(mask[(r, 0)]);
    }
    out
}

pub fn standard_normal_mat(rng: &mut ChaCha8Rng, dim: (usize, usize)) -> Mat {
    Mat::from_shape_fn(dim, |_| rng.sample(StandardNormal))
}

/// Scalar loss nodes returned by [`s1_loss`].
pub struct S1Losses {
    pub total: NodeId,
    pub pred: NodeId,
    pub dyn_raw: NodeId,
    pub rep_raw: NodeId,
    pub dyn_clamped: NodeId,
    pub rep_clamped: NodeId,
}

/// Prediction loss plus free-nats-clamped KL terms, with the stop-gradient
/// placement: the dynamics term detaches the posterior, the representation
/// term detaches the prior.
pub fn s1_loss(
    tape: &mut Tape,
    ids: &S1Ids,
    batch: &SequenceBatch,
    rollout: &Rollout,
    cfg: S1LossCfg,
) -> S1Losses {
    let b = batch.batch as f64;
    let l = batch.len as f64;
    let mut pred_acc: Option<NodeId> = None;
    let mut dyn_acc: Option<NodeId> = None;
    let mut rep_acc: Option<NodeId> = None;
    for t in 0..batch.len {
        let (h, z) = (rollout.h[t], rollout.z[t]);
        let obs_pred = ids.decode(tape, h, z);
        let obs_nll = gaussian_nll(tape, obs_pred, rollout.obs[t]);
        let rew_pred = ids.reward(tape, h, z);
        let rew_target = tape.leaf(batch.rewards[t].clone());
        let rew_nll = gaussian_nll(tape, rew_pred, rew_target);
        let step_pred = tape.add(obs_nll, rew_nll);
        let step_pred = tape.sum_all(step_pred);
        pred_acc = Some(match pred_acc {
            Some(acc) => tape.add(acc, step_pred),
            None => step_pred,
        });

        let post_sg = if cfg.stop_gradients {
            rollout.posts[t].detached(tape)
        } else {
            rollout.posts[t]
        };
        let dyn_t = kl_diag(tape, post_sg, rollout.priors[t]);
        let dyn_t = tape.sum_all(dyn_t);
        dyn_acc = Some(match dyn_acc {
            Some(acc) => tape.add(acc, dyn_t),
            None => dyn_t,
        });

        let prior_sg = if cfg.stop_gradients {
            rollout.priors[t].detached(tape)
        } else {
            rollout.priors[t]
        };
        let rep_t = kl_diag(tape, rollout.posts[t], prior_sg);
        let rep_t = tape.sum_all(rep_t);
        rep_acc = Some(match rep_acc {
            Some(acc) => tape.add(acc, rep_t),
            None => rep_t,
        });
    }
    let norm = 1.0 / (b * l);
    let pred = tape.scale(pred_acc.unwrap(), norm);
    let dyn_raw = tape.scale(dyn_acc.unwrap(), norm);
    let rep_raw = tape.scale(rep_acc.unwrap(), norm);
    let dyn_clamped = tape.max_scalar(dyn_raw, cfg.free_nats);
    let rep_clamped = tape.max_scalar(rep_raw, cfg.free_nats);
    let wd = tape.scale(dyn_clamped, cfg.dyn_weight);
    let wr = tape.scale(rep_clamped, cfg.rep_weight);
    let kl_sum = tape.add(wd, wr);
    let total = tape.add(pred, kl_sum);
    S1Losses { total, pred, dyn_raw, rep_raw, dyn_clamped, rep_clamped }
}

/// Latent rollout produced purely from the prior and a policy.
pub struct ImaginedNodes {
    pub h: Vec<NodeId>,
    pub z: Vec<NodeId>,
    pub actions: Vec<NodeId>,
    /// `rewards[k]` is the predicted reward on entering state `k + 1`.
    pub rewards: Vec<NodeId>,
}

/// Roll the prior forward `horizon` steps from `(start_h, start_z)` nodes,
/// querying `policy` for an action node at each state.
pub fn imagine(
    tape: &mut Tape,
    ids: &S1Ids,
    start_h: NodeId,
    start_z: NodeId,
    policy: &mut dyn FnMut(&mut Tape, NodeId) -> NodeId,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> ImaginedNodes {
    assert!(horizon >= 1, "imagination horizon must be at least 1");
    let b = tape.shape(start_h).0;
    let mut out = ImaginedNodes {
        h: vec![start_h],
        z: vec![start_z],
        actions: Vec::with_capacity(horizon),
        rewards: Vec::with_capacity(horizon),
    };
    let mut h = start_h;
    let mut z = start_z;
    for _ in 0..horizon {
        let s = tape.concat_cols(h, z);
        let a = policy(tape, s);
        let h_next = ids.step_h(tape, h, z, a);
        let prior = ids.prior(tape, h_next);
        let eps = standard_normal_mat(rng, (b, ids.dims.state));
        let z_next = ids.sample(tape, prior, eps);
        let r = ids.reward(tape, h_next, z_next);
        out.actions.push(a);
        out.rewards.push(r);
        out.h.push(h_next);
        out.z.push(z_next);
        h = h_next;
        z = z_next;
    }
    out
}

/// Value-level imagined trajectory (states `0..=H`, actions and rewards `H`).
#[derive(Debug, Clone)]
pub struct ImaginedTrajectory {
    pub states: Vec<ModelState>,
    pub actions: Vec<Array1<f64>>,
    pub rewards: Vec<f64>,
}

// ---------------------------------------------------------------------------
// Value-level operation surface (single states, no batching).
// ---------------------------------------------------------------------------

pub fn initial_state(dims: S1Dims) -> ModelState {
    ModelState { h: Array1::zeros(dims.belief), z: Array1::zeros(dims.state) }
}

pub(crate) fn row(v: &Array1<f64>) -> Mat {
    let n = v.len();
    v.clone().into_shape_with_order((1, n)).unwrap()
}

pub(crate) fn unrow(m: &Mat) -> Array1<f64> {
    m.row(0).to_owned()
}

fn check_finite(name: &str, v: &Array1<f64>) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(name.to_string()));
    }
    Ok(())
}

/// One deterministic update from a single state and action.
pub fn deterministic_step(
    params: &S1Params,
    prev: &ModelState,
    action: &Array1<f64>,
) -> Result<Array1<f64>> {
    check_finite("state h", &prev.h)?;
    check_finite("state z", &prev.z)?;
    check_finite("action", action)?;
    let mut tape = Tape::new();
    let (ids, _) = params.bind(&mut tape, true);
    let h = tape.leaf(row(&prev.h));
    let z = tape.leaf(row(&prev.z));
    let a = tape.leaf(row(action));
    let out = ids.step_h(&mut tape, h, z, a);
    Ok(unrow(tape.value(out)))
}

pub fn encode_obs(params: &S1Params, obs: &Array1<f64>) -> Result<Array1<f64>> {
    check_finite("observation", obs)?;
    let mut tape = Tape::new();
    let (ids, _) = params.bind(&mut tape, true);
    let o = tape.leaf(row(obs));
    let e = ids.encode(&mut tape, o);
    Ok(unrow(tape.value(e)))
}

pub fn prior(params: &S1Params, h: &Array1<f64>) -> Result<DiagGaussian> {
    check_finite("belief", h)?;
    let mut tape = Tape::new();
    let (ids, _) = params.bind(&mut tape, true);
    let hn = tape.leaf(row(h));
    let g = ids.prior(&mut tape, hn);
    Ok(DiagGaussian { mean: unrow(tape.value(g.mean)), std: unrow(tape.value(g.std)) })
}

pub fn posterior(params: &S1Params, h: &Array1<f64>, embed: &Array1<f64>) -> Result<DiagGaussian> {
    check_finite("belief", h)?;
    check_finite("embedding", embed)?;
    let mut tape = Tape::new();
    let (ids, _) = params.bind(&mut tape, true);
    let hn = tape.leaf(row(h));
    let en = tape.leaf(row(embed));
    let g = ids.posterior(&mut tape, hn, en);
    Ok(DiagGaussian { mean: unrow(tape.value(g.mean)), std: unrow(tape.value(g.std)) })
}

pub fn decode(params: &S1Params, state: &ModelState) -> Result<Array1<f64>> {
    let mut tape = Tape::new();
    let (ids, _) = params.bind(&mut tape, true);
    let h = tape.leaf(row(&state.h));
    let z = tape.leaf(row(&state.z));
    let o = ids.decode(&mut tape, h, z);
    Ok(unrow(tape.value(o)))
}

pub fn predict_reward(params: &S1Params, state: &ModelState) -> Result<f64> {
    let mut tape = Tape::new();
    let (ids, _) = params.bind(&mut tape, true);
    let h = tape.leaf(row(&state.h));
    let z = tape.leaf(row(&state.z));
    let r = ids.reward(&mut tape, h, z);
    Ok(tape.value(r)[(0, 0)])
}

/// Latent imagination from a single start state with a value-level policy.
pub fn imagine_trajectory(
    params: &S1Params,
    start: &ModelState,
    policy: &mut dyn FnMut(&ModelState) -> Array1<f64>,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ImaginedTrajectory> {
    assert!(horizon >= 1);
    let mut tape = Tape::new();
    let (ids, _) = params.bind(&mut tape, true);
    let mut states = vec![start.clone()];
    let mut actions = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    let mut current = start.clone();
    for _ in 0..horizon {
        let action = policy(&current);
        check_finite("policy action", &action)?;
        let h = tape.leaf(row(&current.h));
        let z = tape.leaf(row(&current.z));
        let a = tape.leaf(row(&action));
        let h_next = ids.step_h(&mut tape, h, z, a);
        let prior = ids.prior(&mut tape, h_next);
        let eps = standard_normal_mat(rng, (1, ids.dims.state));
        let z_next = ids.sample(&mut tape, prior, eps);
        let r = ids.reward(&mut tape, h_next, z_next);
        current = ModelState { h: unrow(tape.value(h_next)), z: unrow(tape.value(z_next)) };
        rewards.push(tape.value(r)[(0, 0)]);
        actions.push(action);
        states.push(current.clone());
    }
    Ok(ImaginedTrajectory { states, actions, rewards })
}
