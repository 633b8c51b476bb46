//! Hierarchical logical reasoning over trajectories.
//!
//! Per step, the state and action-context embeddings are conjoined into a
//! composition `c_t`. A depth-`alpha` implication folds the window
//! `c_{t-alpha} .. c_t` with AND and implies the next state's embedding;
//! folding all per-step implications and implying the truth anchor yields
//! the global chain. The System 2 loss sums the per-depth terms for depths
//! `0..=max_depth`, the algebraic-law residuals, and an L2 penalty on
//! embeddings and weights. Logical consistency of a trajectory is the mean
//! similarity of its implications to the truth anchor.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::logic::{
    l2_penalty, regularizer, sim, sim_node, GateCtx, LogicIds, LogicParams, LogicVector, RegIds,
};
use crate::nn::BoundIds;
use crate::rssm::row;
use crate::tape::{Mat, NodeId, Tape};

/// Mean/stddev of per-episode logical consistency.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConsistencyReport {
    pub horizon: usize,
    pub depth: usize,
    pub mean: f64,
    pub std: f64,
    pub episodes: usize,
}

/// Local composition `c_t = AND(v_t, m_t)`.
pub fn compose_local(
    tape: &mut Tape,
    logic: &LogicIds,
    v: NodeId,
    m: NodeId,
    ctx: &mut GateCtx,
) -> NodeId {
    logic.and(tape, v, m, ctx)
}

/// Inclusive window start for step `t` at depth `alpha`: early steps use
/// every composition available (effective depth `min(alpha, t)`).
pub fn window_start(t: usize, alpha: usize) -> usize {
    t.saturating_sub(alpha)
}

/// Depth-`alpha` implication: fold the window left to right with AND
/// (training permutes the window first), then imply the successor embedding.
pub fn implication_step(
    tape: &mut Tape,
    logic: &LogicIds,
    window: &[NodeId],
    v_next: NodeId,
    ctx: &mut GateCtx,
) -> NodeId {
    assert!(!window.is_empty(), "implication window must be nonempty");
    let order = ctx.permutation(window.len());
    let mut acc = window[order[0]];
    for &k in &order[1..] {
        acc = logic.and(tape, acc, window[k], ctx);
    }
    logic.imply(tape, acc, v_next, ctx)
}

/// All per-step implications of a trajectory at one depth.
/// `comps` has `T-1` entries and `states` has `T`; output has `T-1`.
pub fn chain_implications(
    tape: &mut Tape,
    logic: &LogicIds,
    comps: &[NodeId],
    state_embeds: &[NodeId],
    alpha: usize,
    ctx: &mut GateCtx,
) -> Vec<NodeId> {
    assert_eq!(state_embeds.len(), comps.len() + 1);
    let mut phis = Vec::with_capacity(comps.len());
    for t in 0..comps.len() {
        let lo = window_start(t, alpha);
        let phi = implication_step(tape, logic, &comps[lo..=t], state_embeds[t + 1], ctx);
        phis.push(phi);
    }
    phis
}

/// Global chain: AND-fold of all implications, implied toward truth.
pub fn global_chain(
    tape: &mut Tape,
    logic: &LogicIds,
    phis: &[NodeId],
    ctx: &mut GateCtx,
) -> NodeId {
    assert!(!phis.is_empty(), "global chain needs at least one implication");
    let order = ctx.permutation(phis.len());
    let mut acc = phis[order[0]];
    for &k in &order[1..] {
        acc = logic.and(tape, acc, phis[k], ctx);
    }
    let b = tape.shape(acc).0;
    let t_rows = logic.truth_rows(tape, b);
    logic.imply(tape, acc, t_rows, ctx)
}

/// Scalar nodes of the System 2 loss.
pub struct S2LossIds {
    pub total: NodeId,
    /// One logic term per depth `0..=max_depth`.
    pub per_depth: Vec<NodeId>,
    pub reg: RegIds,
    pub l2: NodeId,
    /// Diagnostic: similarity of the global chain (at `max_depth`) to truth.
    pub global_consistency: NodeId,
}

/// Weights for [`s2_loss`].
#[derive(Debug, Clone, Copy)]
pub struct S2LossCfg {
    pub max_depth: usize,
    pub reg_weight: f64,
    pub l2_weight: f64,
    /// Cap on regularizer sample rows (embedder outputs are strided down to
    /// this many rows to bound the per-step cost).
    pub reg_sample_cap: usize,
}

/// Full System 2 loss over a batch of latent trajectories.
///
/// `latents` holds `T` matrices `B x latent`, `actions` holds `T-1` matrices
/// `B x action`; both enter as constants. The per-depth logic term averages
/// `sim(phi, F) - sim(phi, T)` over steps and batch, so minimizing drives
/// implications toward the truth anchor.
pub fn s2_loss(
    tape: &mut Tape,
    logic: &LogicIds,
    bound: &BoundIds,
    latents: &[Mat],
    actions: &[Mat],
    cfg: S2LossCfg,
    ctx: &mut GateCtx,
) -> S2LossIds {
    let t_len = latents.len();
    assert!(t_len >= 2, "trajectory must contain at least two states");
    assert_eq!(actions.len(), t_len - 1);
    let b = latents[0].nrows();

    let state_nodes: Vec<NodeId> = latents.iter().map(|m| tape.leaf(m.clone())).collect();
    let action_nodes: Vec<NodeId> = actions.iter().map(|m| tape.leaf(m.clone())).collect();

    let vs: Vec<NodeId> = state_nodes
        .iter()
        .map(|&s| logic.embed_state(tape, s))
        .collect();
    let ms: Vec<NodeId> = (0..t_len - 1)
        .map(|t| logic.embed_action(tape, state_nodes[t], action_nodes[t]))
        .collect();
    let comps: Vec<NodeId> = (0..t_len - 1)
        .map(|t| compose_local(tape, logic, vs[t], ms[t], ctx))
        .collect();

    let t_rows = logic.truth_rows(tape, b);
    let f_rows = logic.falsity_rows(tape, b);

    let mut per_depth = Vec::with_capacity(cfg.max_depth + 1);
    let mut last_phis: Vec<NodeId> = Vec::new();
    for alpha in 0..=cfg.max_depth {
        let phis = chain_implications(tape, logic, &comps, &vs, alpha, ctx);
        let mut acc: Option<NodeId> = None;
        for &phi in &phis {
            let s_t = sim_node(tape, phi, t_rows, logic.cfg.kappa);
            let s_f = sim_node(tape, phi, f_rows, logic.cfg.kappa);
            let diff = tape.sub(s_f, s_t);
            let m = tape.mean_all(diff);
            acc = Some(match acc {
                Some(a) => tape.add(a, m),
                None => m,
            });
        }
        let term = tape.scale(acc.unwrap(), 1.0 / (t_len - 1) as f64);
        per_depth.push(term);
        if alpha == cfg.max_depth {
            last_phis = phis;
        }
    }

    // Regularizer sample: embedder outputs, strided to the row cap, plus the
    // anchor handled inside the rule set.
    let mut sample_rows: Vec<NodeId> = Vec::new();
    for &v in vs.iter().chain(ms.iter()) {
        sample_rows.push(v);
    }
    let total_rows = sample_rows.len() * b;
    let stride = total_rows.div_ceil(cfg.reg_sample_cap.max(1)).max(1);
    let mut w_acc: Option<NodeId> = None;
    for (i, &n) in sample_rows.iter().enumerate() {
        if i % stride != 0 {
            continue;
        }
        w_acc = Some(match w_acc {
            Some(acc) => tape.concat_rows(acc, n),
            None => n,
        });
    }
    let w = w_acc.expect("nonempty regularizer sample");
    let reg = regularizer(tape, logic, w, ctx);

    let mut extra = vs.clone();
    extra.extend_from_slice(&ms);
    let l2 = l2_penalty(tape, bound, &extra);

    let mut log_total = per_depth[0];
    for d in &per_depth[1..] {
        log_total = tape.add(log_total, *d);
    }
    let wreg = tape.scale(reg.total, cfg.reg_weight);
    let wl2 = tape.scale(l2, cfg.l2_weight);
    let partial = tape.add(log_total, wreg);
    let total = tape.add(partial, wl2);

    let chain = global_chain(tape, logic, &last_phis, ctx);
    let chain_sim = sim_node(tape, chain, t_rows, logic.cfg.kappa);
    let global_consistency = tape.mean_all(chain_sim);

    S2LossIds { total, per_depth, reg, l2, global_consistency }
}

/// Logical consistency of batched trajectories at depth `alpha`:
/// per episode, the mean over steps of `sim(phi_t, T)`; reported as
/// mean/std across episodes.
pub fn logical_consistency(
    params: &LogicParams,
    latents: &[Mat],
    actions: &[Mat],
    alpha: usize,
    horizon: usize,
) -> Result<ConsistencyReport> {
    let t_len = latents.len();
    if t_len < 2 {
        return Err(Error::InvalidInput("trajectory must contain at least two states".into()));
    }
    if actions.len() != t_len - 1 {
        return Err(Error::InvalidInput(format!(
            "{} states need {} actions, found {}",
            t_len,
            t_len - 1,
            actions.len()
        )));
    }
    let b = latents[0].nrows();
    let mut tape = Tape::new();
    let (logic, _) = params.bind(&mut tape, true);
    let mut ctx = GateCtx::eval();

    let state_nodes: Vec<NodeId> = latents.iter().map(|m| tape.leaf(m.clone())).collect();
    let action_nodes: Vec<NodeId> = actions.iter().map(|m| tape.leaf(m.clone())).collect();
    let vs: Vec<NodeId> = state_nodes
        .iter()
        .map(|&s| logic.embed_state(&mut tape, s))
        .collect();
    let ms: Vec<NodeId> = (0..t_len - 1)
        .map(|t| logic.embed_action(&mut tape, state_nodes[t], action_nodes[t]))
        .collect();
    let comps: Vec<NodeId> = (0..t_len - 1)
        .map(|t| compose_local(&mut tape, &logic, vs[t], ms[t], &mut ctx))
        .collect();
    let phis = chain_implications(&mut tape, &logic, &comps, &vs, alpha, &mut ctx);
    let t_rows = logic.truth_rows(&mut tape, b);

    let mut per_episode = vec![0.0f64; b];
    for &phi in &phis {
        let s = sim_node(&mut tape, phi, t_rows, logic.cfg.kappa);
        let v = tape.value(s);
        for e in 0..b {
            per_episode[e] += v[(e, 0)];
        }
    }
    let steps = phis.len() as f64;
    for v in per_episode.iter_mut() {
        *v /= steps;
    }
    let mean = per_episode.iter().sum::<f64>() / b as f64;
    let var = per_episode.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / b as f64;
    Ok(ConsistencyReport { horizon, depth: alpha, mean, std: var.sqrt(), episodes: b })
}

/// Pairwise logical-strength matrix for one trajectory of `n + 1` states:
/// `M[i][j] = sim(IMPLY(AND(v_i, m_j), v_n), T)`.
pub fn logic_heatmap(
    params: &LogicParams,
    states: &[Array1<f64>],
    actions: &[Array1<f64>],
) -> Result<Mat> {
    let n = actions.len();
    if n == 0 || states.len() != n + 1 {
        return Err(Error::InvalidInput(format!(
            "heatmap needs n actions and n+1 states, found {} and {}",
            actions.len(),
            states.len()
        )));
    }
    let d_latent = states[0].len();
    let mut tape = Tape::new();
    let (logic, _) = params.bind(&mut tape, true);
    let mut ctx = GateCtx::eval();

    let mut state_mat = Mat::zeros((n + 1, d_latent));
    for (i, s) in states.iter().enumerate() {
        state_mat.row_mut(i).assign(s);
    }
    let mut action_mat = Mat::zeros((n, actions[0].len()));
    for (i, a) in actions.iter().enumerate() {
        action_mat.row_mut(i).assign(a);
    }
    let states_node = tape.leaf(state_mat.clone());
    let v_all = logic.embed_state(&mut tape, states_node);
    let ctx_states = tape.leaf(state_mat.slice(ndarray::s![..n, ..]).to_owned());
    let actions_node = tape.leaf(action_mat);
    let m_all = logic.embed_action(&mut tape, ctx_states, actions_node);

    // All (i, j) pairs in one batch: row i*n + j pairs v_i with m_j.
    let d = logic.cfg.d;
    let v_vals = tape.value(v_all).clone();
    let m_vals = tape.value(m_all).clone();
    let mut v_rep = Mat::zeros((n * n, d));
    let mut m_rep = Mat::zeros((n * n, d));
    for i in 0..n {
        for j in 0..n {
            v_rep.row_mut(i * n + j).assign(&v_vals.row(i));
            m_rep.row_mut(i * n + j).assign(&m_vals.row(j));
        }
    }
    let target = v_vals.row(n).to_owned();
    let mut target_rep = Mat::zeros((n * n, d));
    for r in 0..n * n {
        target_rep.row_mut(r).assign(&target);
    }
    let v_node = tape.leaf(v_rep);
    let m_node = tape.leaf(m_rep);
    let target_node = tape.leaf(target_rep);
    let and = logic.and(&mut tape, v_node, m_node, &mut ctx);
    let imp = logic.imply(&mut tape, and, target_node, &mut ctx);
    let t_rows = logic.truth_rows(&mut tape, n * n);
    let s = sim_node(&mut tape, imp, t_rows, logic.cfg.kappa);
    let sv = tape.value(s);
    let mut out = Mat::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = sv[(i * n + j, 0)];
        }
    }
    Ok(out)
}

/// Single-trajectory consistency at value level.
pub fn consistency_single(
    params: &LogicParams,
    states: &[Array1<f64>],
    actions: &[Array1<f64>],
    alpha: usize,
) -> Result<ConsistencyReport> {
    let latents: Vec<Mat> = states.iter().map(row).collect();
    let acts: Vec<Mat> = actions.iter().map(row).collect();
    logical_consistency(params, &latents, &acts, alpha, actions.len())
}

/// Similarity of a single implication chain's vectors to truth, for tests.
pub fn sim_to_truth(params: &LogicParams, v: &LogicVector) -> Result<f64> {
    let (t, _) = crate::logic::anchors(params);
    sim(v, &t, params.cfg.kappa)
}
