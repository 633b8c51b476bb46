//! Decision modules over imagined rollouts: a lambda-return actor-critic
//! and a gradient-refinement planner.
//!
//! The actor maximizes lambda returns through the learned dynamics
//! (reparameterized tanh-squashed actions); the critic regresses onto
//! stop-gradiented targets. The planner samples candidate action sequences,
//! scores each by the model's predicted return, and refines them with
//! projected gradient ascent under a phased learning-rate schedule,
//! returning the best candidate.

use ndarray::Array1;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::nn::{bind_group, clip_grad_norm, Adam, BoundIds, Mlp, MlpIds, ParamGroup};
use crate::rssm::{imagine, row, standard_normal_mat, unrow, ModelState, S1Params};
use crate::tape::{Mat, NodeId, Tape};

/// Stddev floor of the action distribution before squashing.
pub const MIN_POLICY_STD: f64 = 0.3;
/// Soft bound on the pre-squash action mean, keeping tanh out of its dead
/// zone so the policy never saturates irrecoverably.
pub const POLICY_MEAN_BOUND: f64 = 1.5;
/// Offset on the pre-softplus stddev head: the action distribution starts
/// wide (near-uniform after squashing), so early imagination explores the
/// action space instead of committing to a constant push.
pub const POLICY_STD_INIT: f64 = 2.0;

/// Actor: MLP from the latent to mean and pre-stddev of a squashed Gaussian.
#[derive(Debug, Clone)]
pub struct PolicyParams {
    pub mlp: Mlp,
    pub action_dim: usize,
}

impl PolicyParams {
    pub fn new(rng: &mut ChaCha8Rng, latent: usize, hidden: usize, action_dim: usize) -> Self {
        PolicyParams { mlp: Mlp::new(rng, &[latent, hidden, hidden, 2 * action_dim]), action_dim }
    }

    pub fn bind(&self, tape: &mut Tape, frozen: bool) -> (PolicyIds, BoundIds) {
        let b = bind_group(tape, &self.mlp, frozen);
        (PolicyIds { mlp: MlpIds::from_bound(&b.graph), action_dim: self.action_dim }, b)
    }
}

impl ParamGroup for PolicyParams {
    fn visit(&self, f: &mut dyn FnMut(&Mat)) {
        self.mlp.visit(f);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Mat)) {
        self.mlp.visit_mut(f);
    }
}

#[derive(Debug, Clone)]
pub struct PolicyIds {
    pub mlp: MlpIds,
    pub action_dim: usize,
}

impl PolicyIds {
    /// Squashed-Gaussian statistics at a batch of latents.
    pub fn dist(&self, tape: &mut Tape, latent: NodeId) -> (NodeId, NodeId) {
        let pre = self.mlp.apply(tape, latent);
        let raw_mean = tape.slice_cols(pre, 0, self.action_dim);
        let scaled = tape.scale(raw_mean, 1.0 / POLICY_MEAN_BOUND);
        let squashed = tape.tanh(scaled);
        let mean = tape.scale(squashed, POLICY_MEAN_BOUND);
        let raw = tape.slice_cols(pre, self.action_dim, 2 * self.action_dim);
        let shifted = tape.add_scalar(raw, POLICY_STD_INIT);
        let sp = tape.softplus(shifted);
        let std = tape.add_scalar(sp, MIN_POLICY_STD);
        (mean, std)
    }

    /// Reparameterized sample `tanh(mean + std * eps)`.
    pub fn sample(&self, tape: &mut Tape, latent: NodeId, eps: Mat) -> NodeId {
        let (mean, std) = self.dist(tape, latent);
        let e = tape.leaf(eps);
        let noise = tape.mul(std, e);
        let pre = tape.add(mean, noise);
        tape.tanh(pre)
    }

    /// Distribution mode `tanh(mean)`.
    pub fn mode(&self, tape: &mut Tape, latent: NodeId) -> NodeId {
        let (mean, _) = self.dist(tape, latent);
        tape.tanh(mean)
    }
}

/// Critic: MLP from the latent to a scalar value.
#[derive(Debug, Clone)]
pub struct ValueParams {
    pub mlp: Mlp,
}

impl ValueParams {
    pub fn new(rng: &mut ChaCha8Rng, latent: usize, hidden: usize) -> Self {
        ValueParams { mlp: Mlp::new(rng, &[latent, hidden, hidden, 1]) }
    }

    pub fn bind(&self, tape: &mut Tape, frozen: bool) -> (ValueIds, BoundIds) {
        let b = bind_group(tape, &self.mlp, frozen);
        (ValueIds { mlp: MlpIds::from_bound(&b.graph) }, b)
    }
}

impl ParamGroup for ValueParams {
    fn visit(&self, f: &mut dyn FnMut(&Mat)) {
        self.mlp.visit(f);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Mat)) {
        self.mlp.visit_mut(f);
    }
}

#[derive(Debug, Clone)]
pub struct ValueIds {
    pub mlp: MlpIds,
}

impl ValueIds {
    pub fn value(&self, tape: &mut Tape, latent: NodeId) -> NodeId {
        self.mlp.apply(tape, latent)
    }
}

/// Lambda returns by backward recursion.
///
/// `rewards[k]` is the reward collected moving from state `k` to `k + 1`
/// (length `H`), `values[k]` estimates state `k` (length `H + 1`). Output
/// `k` is the lambda return of state `k`, `k < H`:
/// `G_H = v_H; G_k = r_k + gamma * ((1 - lambda) v_{k+1} + lambda G_{k+1})`.
pub fn lambda_returns(
    rewards: &[f64],
    values: &[f64],
    gamma: f64,
    lambda: f64,
) -> Result<Vec<f64>> {
    let h = rewards.len();
    if values.len() != h + 1 {
        return Err(Error::InvalidInput(format!(
            "lambda returns need H rewards and H+1 values, found {} and {}",
            h,
            values.len()
        )));
    }
    if !(0.0..=1.0).contains(&gamma) || !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidInput("gamma and lambda must lie in [0, 1]".into()));
    }
    let mut out = vec![0.0; h];
    let mut next = values[h];
    for k in (0..h).rev() {
        let g = rewards[k] + gamma * ((1.0 - lambda) * values[k + 1] + lambda * next);
        out[k] = g;
        next = g;
    }
    Ok(out)
}

/// Direct evaluation of the lambda-return mixture for one start index:
/// `(1 - lambda) sum_{n=1}^{H-1} lambda^{n-1} V^n + lambda^{H-1} V^H`, where
/// `V^k` is the k-step bootstrapped return saturating at the window end.
/// Independent oracle for the backward recursion.
pub fn lambda_return_direct(
    rewards: &[f64],
    values: &[f64],
    gamma: f64,
    lambda: f64,
    start: usize,
) -> f64 {
    let h = rewards.len();
    assert!(start < h);
    let k_step = |k: usize| -> f64 {
        let end = (start + k).min(h);
        let mut acc = 0.0;
        let mut disc = 1.0;
        for n in start..end {
            acc += disc * rewards[n];
            disc *= gamma;
        }
        acc + disc * values[end]
    };
    if h - start == 0 {
        return values[start];
    }
    let mut mix = 0.0;
    let mut w = 1.0 - lambda;
    for k in 1..h {
        mix += w * k_step(k);
        w *= lambda;
    }
    // The final weight closes the geometric series.
    mix + lambda.powi(h as i32 - 1) * k_step(h)
}

/// Lambda returns as tape nodes over batched rewards/values (`B x 1` each).
pub fn lambda_returns_nodes(
    tape: &mut Tape,
    rewards: &[NodeId],
    values: &[NodeId],
    gamma: f64,
    lambda: f64,
) -> Vec<NodeId> {
    let h = rewards.len();
    assert_eq!(values.len(), h + 1);
    let mut rev = Vec::with_capacity(h);
    let mut next = values[h];
    for k in (0..h).rev() {
        let v_next = tape.scale(values[k + 1], (1.0 - lambda) * gamma);
        let g_next = tape.scale(next, lambda * gamma);
        let boot = tape.add(v_next, g_next);
        let g = tape.add(rewards[k], boot);
        rev.push(g);
        next = g;
    }
    rev.reverse();
    rev
}

/// Exploration and evaluation action selection.
pub fn act(
    policy: &PolicyParams,
    state: &ModelState,
    explore: bool,
    noise_std: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Array1<f64>> {
    if state.h.iter().chain(state.z.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("model state".into()));
    }
    let mut tape = Tape::new();
    let (ids, _) = policy.bind(&mut tape, true);
    let latent = tape.leaf(row(&state.latent()));
    let action = if explore {
        let eps = standard_normal_mat(rng, (1, policy.action_dim));
        let a = ids.sample(&mut tape, latent, eps);
        let mut v = unrow(tape.value(a));
        for x in v.iter_mut() {
            let n: f64 = rng.sample(StandardNormal);
            *x = (*x + noise_std * n).clamp(-1.0, 1.0);
        }
        v
    } else {
        let a = ids.mode(&mut tape, latent);
        unrow(tape.value(a))
    };
    Ok(action)
}

/// Actor-critic pair with its optimizers.
#[derive(Debug)]
pub struct ActorCritic {
    pub policy: PolicyParams,
    pub value: ValueParams,
    pub policy_opt: Adam,
    pub value_opt: Adam,
    pub gamma: f64,
    pub lambda: f64,
    pub horizon: usize,
    pub grad_clip: f64,
}

/// Scalar diagnostics of one actor-critic update.
#[derive(Debug, Clone, Copy)]
pub struct AcMetrics {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub mean_return: f64,
}

impl ActorCritic {
    pub fn new(rng: &mut ChaCha8Rng, cfg: &RunConfig, latent: usize, action_dim: usize) -> Self {
        ActorCritic {
            policy: PolicyParams::new(rng, latent, cfg.hidden_size, action_dim),
            value: ValueParams::new(rng, latent, cfg.hidden_size),
            policy_opt: Adam::new(cfg.ac_learning_rate, cfg.ac_adam_epsilon),
            value_opt: Adam::new(cfg.ac_learning_rate, cfg.ac_adam_epsilon),
            gamma: cfg.discount,
            lambda: cfg.return_lambda,
            horizon: cfg.imagination_horizon,
            grad_clip: cfg.gradient_clipping,
        }
    }

    /// One imagination-phase update: the actor ascends the summed lambda
    /// returns through the frozen world model; the critic then regresses
    /// onto the stop-gradiented targets. Neither step touches the other's
    /// parameters or the world model.
    pub fn update(
        &mut self,
        world: &S1Params,
        start_h: &Mat,
        start_z: &Mat,
        rng: &mut ChaCha8Rng,
    ) -> AcMetrics {
        // Actor pass: world model and critic frozen.
        let mut tape = Tape::new();
        let (world_ids, _) = world.bind(&mut tape, true);
        let (policy_ids, policy_bound) = self.policy.bind(&mut tape, false);
        let (value_ids, _) = self.value.bind(&mut tape, true);
        let h0 = tape.leaf(start_h.clone());
        let z0 = tape.leaf(start_z.clone());
        let b = start_h.nrows();
        let mut eps_stream = rng.clone();
        let mut policy_fn = |t: &mut Tape, s: NodeId| {
            let eps = standard_normal_mat(&mut eps_stream, (b, policy_ids.action_dim));
            policy_ids.sample(t, s, eps)
        };
        let imagined = imagine(
            &mut tape,
            &world_ids,
            h0,
            z0,
            &mut policy_fn,
            self.horizon,
            rng,
        );
        let values: Vec<NodeId> = (0..=self.horizon)
            .map(|k| {
                let s = tape.concat_cols(imagined.h[k], imagined.z[k]);
                value_ids.value(&mut tape, s)
            })
            .collect();
        let returns =
            lambda_returns_nodes(&mut tape, &imagined.rewards, &values, self.gamma, self.lambda);
        let mut acc: Option<NodeId> = None;
        for &g in &returns {
            let m = tape.mean_all(g);
            acc = Some(match acc {
                Some(a) => tape.add(a, m),
                None => m,
            });
        }
        let sum_returns = acc.unwrap();
        let mean_return = tape.scalar_value(sum_returns) / self.horizon as f64;
        let actor_loss = tape.scale(sum_returns, -1.0 / self.horizon as f64);
        let grads = tape.backward(actor_loss);
        let mut pg = policy_bound.grads(&tape, &grads);
        clip_grad_norm(&mut pg, self.grad_clip);
        let actor_loss_v = tape.scalar_value(actor_loss);
        self.policy_opt.step(&mut self.policy, &pg);

        // Critic pass on the detached imagined states and targets.
        let states: Vec<Mat> = (0..=self.horizon)
            .map(|k| {
                let mut s = Mat::zeros((b, start_h.ncols() + start_z.ncols()));
                s.slice_mut(ndarray::s![.., ..start_h.ncols()])
                    .assign(tape.value(imagined.h[k]));
                s.slice_mut(ndarray::s![.., start_h.ncols()..])
                    .assign(tape.value(imagined.z[k]));
                s
            })
            .collect();
        let targets: Vec<Mat> = returns.iter().map(|&g| tape.value(g).clone()).collect();

        let mut vtape = Tape::new();
        let (value_ids, value_bound) = self.value.bind(&mut vtape, false);
        let mut acc: Option<NodeId> = None;
        for k in 0..self.horizon {
            let s = vtape.leaf(states[k].clone());
            let v = value_ids.value(&mut vtape, s);
            let target = vtape.leaf(targets[k].clone());
            let err = vtape.sub(v, target);
            let sq = vtape.square(err);
            let half = vtape.scale(sq, 0.5);
            let m = vtape.mean_all(half);
            acc = Some(match acc {
                Some(a) => vtape.add(a, m),
                None => m,
            });
        }
        let critic_loss = vtape.scale(acc.unwrap(), 1.0 / self.horizon as f64);
        let grads = vtape.backward(critic_loss);
        let mut vg = value_bound.grads(&vtape, &grads);
        clip_grad_norm(&mut vg, self.grad_clip);
        let critic_loss_v = vtape.scalar_value(critic_loss);
        self.value_opt.step(&mut self.value, &vg);

        AcMetrics { actor_loss: actor_loss_v, critic_loss: critic_loss_v, mean_return }
    }
}

/// Gradient-planner settings.
#[derive(Debug, Clone)]
pub struct PlanConfig {
    pub iterations: usize,
    pub candidates: usize,
    pub horizon: usize,
    /// Phased rates; phase `p` covers `iterations / len` iterations.
    pub learning_rates: Vec<f64>,
    pub init_std: f64,
}

impl PlanConfig {
    pub fn from_config(cfg: &RunConfig) -> PlanConfig {
        PlanConfig {
            iterations: cfg.mpc_iterations,
            candidates: cfg.mpc_candidates,
            horizon: cfg.mpc_horizon,
            learning_rates: cfg.mpc_learning_rates.clone(),
            init_std: 0.5,
        }
    }

    fn rate_at(&self, iter: usize) -> f64 {
        let phases = self.learning_rates.len();
        let span = self.iterations.div_ceil(phases).max(1);
        let idx = (iter / span).min(phases - 1);
        self.learning_rates[idx]
    }
}

/// Anything the gradient planner can roll candidates through: builds the
/// per-step predicted-reward nodes for a batch of candidate action nodes.
pub trait PlanModel {
    fn action_dim(&self) -> usize;
    /// `actions` has `horizon` nodes of shape `J x action_dim`; returns
    /// `horizon` reward nodes of shape `J x 1`.
    fn rollout_rewards(&self, tape: &mut Tape, actions: &[NodeId]) -> Vec<NodeId>;
}

/// World-model-backed planning problem from a fixed start state.
pub struct WorldPlanModel<'a> {
    pub world: &'a S1Params,
    pub start: ModelState,
}

impl PlanModel for WorldPlanModel<'_> {
    fn action_dim(&self) -> usize {
        self.world.dims.action
    }

    fn rollout_rewards(&self, tape: &mut Tape, actions: &[NodeId]) -> Vec<NodeId> {
        let j = tape.shape(actions[0]).0;
        let (ids, _) = self.world.bind(tape, true);
        // Candidates roll through the prior mean: deterministic propagation
        // keeps the planning objective fixed across iterations.
        let mut h = tape.leaf(tile(&self.start.h, j));
        let mut z = tape.leaf(tile(&self.start.z, j));
        let mut rewards = Vec::with_capacity(actions.len());
        for &a in actions {
            let h_next = ids.step_h(tape, h, z, a);
            let prior = ids.prior(tape, h_next);
            let z_next = prior.mean;
            rewards.push(ids.reward(tape, h_next, z_next));
            h = h_next;
            z = z_next;
        }
        rewards
    }
}

fn tile(v: &Array1<f64>, rows: usize) -> Mat {
    let mut out = Mat::zeros((rows, v.len()));
    for r in 0..rows {
        out.row_mut(r).assign(v);
    }
    out
}

/// Result of one planning call.
#[derive(Debug, Clone)]
pub struct PlanResult {
    /// Best candidate's actions, `horizon x action_dim`.
    pub actions: Mat,
    pub expected_return: f64,
    /// Best return after each iteration (index 0 is the raw samples).
    pub best_per_iteration: Vec<f64>,
}

/// Sample candidate action sequences, refine them by projected gradient
/// ascent on the predicted return, and return the best.
pub fn plan_grad_mpc(
    model: &dyn PlanModel,
    cfg: &PlanConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PlanResult> {
    if cfg.candidates == 0 || cfg.horizon == 0 {
        return Err(Error::InvalidInput("planner needs candidates and a horizon".into()));
    }
    let a_dim = model.action_dim();
    let j = cfg.candidates;
    // Candidates from N(0, init_std^2), clipped into the action box.
    let mut actions: Vec<Mat> = (0..cfg.horizon)
        .map(|_| {
            standard_normal_mat(rng, (j, a_dim)).mapv(|x| (x * cfg.init_std).clamp(-1.0, 1.0))
        })
        .collect();

    let mut best_per_iteration = Vec::with_capacity(cfg.iterations + 1);
    let mut final_returns: Vec<f64> = Vec::new();
    for iter in 0..=cfg.iterations {
        let mut tape = Tape::new();
        let nodes: Vec<NodeId> = actions.iter().map(|a| tape.leaf(a.clone())).collect();
        let rewards = model.rollout_rewards(&mut tape, &nodes);
        let mut acc = rewards[0];
        for &r in &rewards[1..] {
            acc = tape.add(acc, r);
        }
        let total = tape.sum_all(acc);
        let returns: Vec<f64> = (0..j).map(|c| tape.value(acc)[(c, 0)]).collect();
        let best = returns.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        best_per_iteration.push(best);
        if iter == cfg.iterations {
            final_returns = returns;
            break;
        }
        // Ascend the summed return; the paper's objective is a maximization.
        let grads = tape.backward(total);
        let lr = cfg.rate_at(iter);
        for (k, node) in nodes.iter().enumerate() {
            if let Some(g) = grads.get(*node) {
                actions[k].zip_mut_with(g, |a, &d| *a = (*a + lr * d).clamp(-1.0, 1.0));
            }
        }
    }

    let best_idx = final_returns
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .ok_or_else(|| Error::NonFinite("planner returns".into()))?;
    let mut best_actions = Mat::zeros((cfg.horizon, a_dim));
    for (k, a) in actions.iter().enumerate() {
        best_actions.row_mut(k).assign(&a.row(best_idx));
    }
    Ok(PlanResult {
        actions: best_actions,
        expected_return: final_returns[best_idx],
        best_per_iteration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdcheck::{fd_grad_scalar, max_abs_rel_err};
    use crate::rng::stream;

    #[test]
    fn lambda_collapse_cases_are_exact() {
        let rewards = [1.0, 2.0, 0.5, -1.0];
        let values = [0.3, 0.1, 0.7, 0.2, 5.0];
        let gamma = 0.9;

        // lambda = 0: one-step bootstrap.
        let g0 = lambda_returns(&rewards, &values, gamma, 0.0).unwrap();
        for k in 0..4 {
            let expect = rewards[k] + gamma * values[k + 1];
            assert!((g0[k] - expect).abs() < 1e-15);
        }

        // lambda = 1: pure Monte-Carlo return with a terminal bootstrap.
        let g1 = lambda_returns(&rewards, &values, gamma, 1.0).unwrap();
        for k in 0..4 {
            let mut expect = 0.0;
            let mut disc = 1.0;
            for n in k..4 {
                expect += disc * rewards[n];
                disc *= gamma;
            }
            expect += disc * values[4];
            assert!((g1[k] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn documented_two_step_example_agrees_both_ways() {
        let rewards = [1.0, 1.0];
        let values = [0.0, 0.0, 10.0];
        let g = lambda_returns(&rewards, &values, 0.9, 0.95).unwrap();
        let direct0 = lambda_return_direct(&rewards, &values, 0.9, 0.95, 0);
        assert!((g[0] - 9.55).abs() < 1e-12, "recursion {}", g[0]);
        assert!((direct0 - 9.55).abs() < 1e-12, "direct {direct0}");
        assert!((g[0] - direct0).abs() < 1e-12);
        let direct1 = lambda_return_direct(&rewards, &values, 0.9, 0.95, 1);
        assert!((g[1] - direct1).abs() < 1e-12);
    }

    #[test]
    fn recursion_matches_direct_mixture_on_random_instances() {
        let mut rng = stream(21, "lambda", 0);
        for case in 0..200 {
            let h = 1 + (case % 16);
            let rewards: Vec<f64> = (0..h).map(|_| rng.random_range(-1.0..1.0)).collect();
            let values: Vec<f64> = (0..=h).map(|_| rng.random_range(-1.0..1.0)).collect();
            let gamma = rng.random_range(0.0..1.0);
            let lambda = rng.random_range(0.0..1.0);
            let rec = lambda_returns(&rewards, &values, gamma, lambda).unwrap();
            for k in 0..h {
                let direct = lambda_return_direct(&rewards, &values, gamma, lambda, k);
                assert!(
                    (rec[k] - direct).abs() <= 1e-10,
                    "case {case} start {k}: {} vs {direct}",
                    rec[k]
                );
            }
        }
    }

    #[test]
    fn lambda_nodes_match_value_level() {
        let mut tape = Tape::new();
        let rewards = [1.0, 1.0];
        let values = [0.0, 0.0, 10.0];
        let rn: Vec<NodeId> = rewards
            .iter()
            .map(|&r| tape.leaf(Mat::from_elem((1, 1), r)))
            .collect();
        let vn: Vec<NodeId> = values
            .iter()
            .map(|&v| tape.leaf(Mat::from_elem((1, 1), v)))
            .collect();
        let g = lambda_returns_nodes(&mut tape, &rn, &vn, 0.9, 0.95);
        assert!((tape.scalar_value(g[0]) - 9.55).abs() < 1e-12);
    }

    #[test]
    fn act_is_bounded_and_deterministic_without_exploration() {
        let mut rng = stream(22, "init", 0);
        let policy = PolicyParams::new(&mut rng, 8, 16, 2);
        let state = ModelState {
            h: Array1::from_vec((0..5).map(|i| 0.3 * i as f64).collect()),
            z: Array1::from_vec(vec![0.2, -0.4, 0.6]),
        };
        let a1 = act(&policy, &state, false, 0.3, &mut stream(23, "a", 0)).unwrap();
        let a2 = act(&policy, &state, false, 0.3, &mut stream(24, "b", 0)).unwrap();
        assert_eq!(a1, a2);
        for _ in 0..20 {
            let a = act(&policy, &state, true, 0.3, &mut rng).unwrap();
            assert!(a.iter().all(|x| (-1.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn critic_loss_at_perfect_fit_is_zero_with_zero_gradient() {
        let mut vtape = Tape::new();
        let mut rng = stream(25, "init", 0);
        let value = ValueParams::new(&mut rng, 4, 8);
        let (ids, bound) = value.bind(&mut vtape, false);
        let s = vtape.leaf(standard_normal_mat(&mut rng, (3, 4)));
        let v = ids.value(&mut vtape, s);
        let target = vtape.detach(v);
        let err = vtape.sub(v, target);
        let sq = vtape.square(err);
        let loss = vtape.mean_all(sq);
        assert_eq!(vtape.scalar_value(loss), 0.0);
        let grads = vtape.backward(loss);
        for g in bound.grads(&vtape, &grads) {
            assert!(g.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn actor_gradient_matches_finite_differences_through_toy_dynamics() {
        // Frozen two-step linear dynamics: s' = s + a, reward = -|s|^2.
        // The policy's gradient flows through the reparameterized actions.
        let mut rng = stream(26, "init", 0);
        let mut policy = PolicyParams::new(&mut rng, 2, 4, 2);
        crate::nn::jitter_params(&mut policy, &mut stream(27, "j", 0), 0.1);
        let s0 = ndarray::array![[0.4, -0.3], [0.1, 0.8]];
        let eps1 = standard_normal_mat(&mut stream(28, "e", 0), (2, 2));
        let eps2 = standard_normal_mat(&mut stream(29, "e", 1), (2, 2));

        let build = |tape: &mut Tape, ids: &PolicyIds, s0n: NodeId| {
            let a1 = ids.sample(tape, s0n, eps1.clone());
            let s1 = tape.add(s0n, a1);
            let r1 = tape.square(s1);
            let a2 = ids.sample(tape, s1, eps2.clone());
            let s2 = tape.add(s1, a2);
            let r2 = tape.square(s2);
            let q = tape.add(r1, r2);
            let total = tape.sum_all(q);
            tape.scale(total, -1.0)
        };

        let eval = |mats: &[Mat]| {
            let mut p = policy.clone();
            p.load_matrices(mats).unwrap();
            let mut tape = Tape::new();
            let (ids, _) = p.bind(&mut tape, false);
            let s0n = tape.leaf(s0.clone());
            let obj = build(&mut tape, &ids, s0n);
            tape.scalar_value(obj)
        };
        let inputs = policy.matrices();
        let fd = fd_grad_scalar(eval, &inputs, 1e-5);

        let mut tape = Tape::new();
        let (ids, bound) = policy.bind(&mut tape, false);
        let s0n = tape.leaf(s0.clone());
        let obj = build(&mut tape, &ids, s0n);
        let grads = tape.backward(obj);
        let got = bound.grads(&tape, &grads);
        for (i, g) in got.iter().enumerate() {
            let err = max_abs_rel_err(g, &fd[i]);
            assert!(err < 1e-4, "policy param {i}: rel err {err}");
        }
    }

    #[test]
    fn updates_leave_the_other_side_untouched() {
        let cfg = RunConfig { imagination_horizon: 3, hidden_size: 8, ..RunConfig::desk() };
        let mut rng = stream(30, "init", 0);
        let dims = crate::rssm::S1Dims {
            obs: 3,
            action: 1,
            belief: 4,
            state: 2,
            embed: 5,
            hidden: 4,
        };
        let world = S1Params::new(&mut rng, dims);
        let mut ac = ActorCritic::new(&mut rng, &cfg, dims.latent(), dims.action);
        let policy_before = ac.policy.matrices();
        let value_before = ac.value.matrices();
        let h0 = standard_normal_mat(&mut rng, (2, dims.belief));
        let z0 = standard_normal_mat(&mut rng, (2, dims.state));
        let metrics = ac.update(&world, &h0, &z0, &mut stream(31, "up", 0));
        assert!(metrics.actor_loss.is_finite());
        assert!(metrics.critic_loss.is_finite());
        let policy_after = ac.policy.matrices();
        let value_after = ac.value.matrices();
        assert!(policy_before
            .iter()
            .zip(policy_after.iter())
            .any(|(a, b)| a != b));
        assert!(value_before
            .iter()
            .zip(value_after.iter())
            .any(|(a, b)| a != b));
    }

    struct QuadraticToy {
        dim: usize,
    }

    impl PlanModel for QuadraticToy {
        fn action_dim(&self) -> usize {
            self.dim
        }
        fn rollout_rewards(&self, tape: &mut Tape, actions: &[NodeId]) -> Vec<NodeId> {
            actions
                .iter()
                .map(|&a| {
                    let sq = tape.square(a);
                    let s = tape.sum_cols(sq);
                    tape.scale(s, -1.0)
                })
                .collect()
        }
    }

    #[test]
    fn planner_refines_toward_the_quadratic_optimum() {
        let toy = QuadraticToy { dim: 2 };
        let cfg = PlanConfig {
            iterations: 40,
            candidates: 100,
            horizon: 5,
            learning_rates: vec![0.1, 0.01, 0.005, 0.0001],
            init_std: 0.5,
        };
        let result = plan_grad_mpc(&toy, &cfg, &mut stream(32, "plan", 0)).unwrap();
        assert!(result.expected_return > -1e-2, "return {}", result.expected_return);
        assert!(result.actions.iter().all(|a| a.abs() < 0.1));
        for w in result.best_per_iteration.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "best return decreased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn zero_iterations_returns_best_raw_sample() {
        let toy = QuadraticToy { dim: 1 };
        let cfg = PlanConfig {
            iterations: 0,
            candidates: 64,
            horizon: 3,
            learning_rates: vec![0.1],
            init_std: 0.5,
        };
        let result = plan_grad_mpc(&toy, &cfg, &mut stream(33, "plan", 0)).unwrap();
        assert_eq!(result.best_per_iteration.len(), 1);
        assert!(result.expected_return <= 0.0);
    }

    #[test]
    fn phase_schedule_maps_four_rates_to_four_spans() {
        let cfg = PlanConfig {
            iterations: 40,
            candidates: 1,
            horizon: 1,
            learning_rates: vec![0.1, 0.01, 0.005, 0.0001],
            init_std: 0.5,
        };
        assert_eq!(cfg.rate_at(0), 0.1);
        assert_eq!(cfg.rate_at(9), 0.1);
        assert_eq!(cfg.rate_at(10), 0.01);
        assert_eq!(cfg.rate_at(29), 0.005);
        assert_eq!(cfg.rate_at(39), 0.0001);
    }
}
