//! Inter-system coupling.
//!
//! One direction: posterior latent transitions, copied out of the dynamics
//! model's graph as plain values, supervise the logic engine. The other:
//! a log logical-consistency term on latent transitions augments the
//! dynamics loss, with the logic parameters frozen so only the latents
//! (and through them the dynamics parameters) receive gradient.

use crate::error::{Error, Result};
use crate::logic::{sim_node, GateCtx, LogicIds};
use crate::replay::SequenceBatch;
use crate::rssm::{s1_loss, Rollout, S1Ids, S1LossCfg, S1Losses};
use crate::tape::{Mat, NodeId, Tape};

/// Latent trajectories detached from the dynamics graph: `latents` holds
/// `T` matrices `B x (belief + state)`, `actions` the `T - 1` actions taken
/// between them. Entries are constants w.r.t. every parameter set.
#[derive(Debug, Clone)]
pub struct LogicSupervisionBatch {
    pub latents: Vec<Mat>,
    pub actions: Vec<Mat>,
}

impl LogicSupervisionBatch {
    /// Number of `(s_t, a_t, s_{t+1})` triples.
    pub fn triple_count(&self) -> usize {
        if self.latents.is_empty() {
            0
        } else {
            self.latents[0].nrows() * (self.latents.len() - 1)
        }
    }

    /// Restrict to `rows` sequences and a time window `[t0, t0 + len)`.
    pub fn subwindow(&self, rows: &[usize], t0: usize, len: usize) -> LogicSupervisionBatch {
        let take = |m: &Mat| {
            let mut out = Mat::zeros((rows.len(), m.ncols()));
            for (i, &r) in rows.iter().enumerate() {
                out.row_mut(i).assign(&m.row(r));
            }
            out
        };
        LogicSupervisionBatch {
            latents: self.latents[t0..t0 + len].iter().map(&take).collect(),
            actions: self.actions[t0..t0 + len - 1].iter().map(&take).collect(),
        }
    }
}

/// Copy the posterior states and the actions taken after them out of a
/// filtering pass. The result carries values only, so no gradient can reach
/// the dynamics parameters through it.
pub fn s1_to_s2_batch(
    tape: &Tape,
    rollout: &Rollout,
    batch: &SequenceBatch,
) -> LogicSupervisionBatch {
    let l = rollout.h.len();
    let b = batch.batch;
    let belief = tape.shape(rollout.h[0]).1;
    let state = tape.shape(rollout.z[0]).1;
    let mut latents = Vec::with_capacity(l);
    for t in 0..l {
        let mut s = Mat::zeros((b, belief + state));
        s.slice_mut(ndarray::s![.., ..belief]).assign(tape.value(rollout.h[t]));
        s.slice_mut(ndarray::s![.., belief..]).assign(tape.value(rollout.z[t]));
        latents.push(s);
    }
    // The action taken at step t is stored alongside observation t + 1.
    let actions = (1..l).map(|t| batch.actions[t].clone()).collect();
    LogicSupervisionBatch { latents, actions }
}

/// Single-step logical-consistency term
/// `ln sim(IMPLY(AND(v_{t-1}, m_{t-1}), v_t), T)` as a `B x 1` node.
/// Finite because sim is bounded away from zero.
pub fn logic_elbo_term(
    tape: &mut Tape,
    logic: &LogicIds,
    s_prev: NodeId,
    a_prev: NodeId,
    s_cur: NodeId,
) -> NodeId {
    let mut ctx = GateCtx::eval();
    let v_prev = logic.embed_state(tape, s_prev);
    let m_prev = logic.embed_action(tape, s_prev, a_prev);
    let v_cur = logic.embed_state(tape, s_cur);
    let c = logic.and(tape, v_prev, m_prev, &mut ctx);
    let phi = logic.imply(tape, c, v_cur, &mut ctx);
    let b = tape.shape(phi).0;
    let t_rows = logic.truth_rows(tape, b);
    let s = sim_node(tape, phi, t_rows, logic.cfg.kappa);
    tape.ln(s)
}

/// Loss nodes of the guided objective.
pub struct GuidedLosses {
    pub total: NodeId,
    pub s1: S1Losses,
    /// Mean logical-consistency term; `None` when the weight is zero.
    pub logic_term: Option<NodeId>,
}

/// The dynamics loss minus `lambda_logic` times the mean single-step
/// logical-consistency term over the posterior latents. The logic
/// parameters must be bound frozen by the caller; gradient flows into the
/// dynamics parameters only, through the latents.
pub fn guided_s1_loss(
    tape: &mut Tape,
    s1: &S1Ids,
    logic: &LogicIds,
    batch: &SequenceBatch,
    rollout: &Rollout,
    cfg: S1LossCfg,
    lambda_logic: f64,
    stride: usize,
) -> Result<GuidedLosses> {
    if !lambda_logic.is_finite() || lambda_logic < 0.0 {
        return Err(Error::InvalidInput("lambda_logic must be finite and non-negative".into()));
    }
    let losses = s1_loss(tape, s1, batch, rollout, cfg);
    if lambda_logic == 0.0 {
        return Ok(GuidedLosses { total: losses.total, s1: losses, logic_term: None });
    }
    let l = rollout.h.len();
    let stride = stride.max(1);
    let mut acc: Option<NodeId> = None;
    let mut count = 0usize;
    for t in (1..l).step_by(stride) {
        let s_prev = tape.concat_cols(rollout.h[t - 1], rollout.z[t - 1]);
        let s_cur = tape.concat_cols(rollout.h[t], rollout.z[t]);
        let a_prev = tape.leaf(batch.actions[t].clone());
        let term = logic_elbo_term(tape, logic, s_prev, a_prev, s_cur);
        let m = tape.mean_all(term);
        count += 1;
        acc = Some(match acc {
            Some(a) => tape.add(a, m),
            None => m,
        });
    }
    let mean_term = tape.scale(acc.expect("sequence length >= 2"), 1.0 / count as f64);
    let weighted = tape.scale(mean_term, -lambda_logic);
    let total = tape.add(losses.total, weighted);
    Ok(GuidedLosses { total, s1: losses, logic_term: Some(mean_term) })
}
