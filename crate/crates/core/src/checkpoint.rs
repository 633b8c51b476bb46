//! Versioned binary checkpoints: a JSON manifest (config, shapes, counters)
//! followed by raw little-endian `f64` parameter blocks.
//!
//! A checkpoint captures everything training mutates — model and planner
//! parameters, optimizer moments, and step counters — so resuming a run
//! reproduces the exact steps a straight-through run would have taken
//! (per-round noise streams are re-derived from the master seed).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::logic::{LogicConfig, LogicParams};
use crate::nn::{Adam, ParamGroup};
use crate::planner::{ActorCritic, PolicyParams, ValueParams};
use crate::rssm::{S1Dims, S1Params};
use crate::tape::Mat;

const MAGIC: &[u8; 8] = b"LUCIDCKP";
pub const FORMAT_VERSION: u32 = 1;

/// Monotonic run counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    /// Dual-update rounds completed.
    pub rounds: u64,
    /// Real-environment episodes collected (including seed episodes).
    pub env_trials: u64,
    /// Real-environment decision steps times action repeat.
    pub env_steps: u64,
    /// Training episodes completed (excluding seed episodes).
    pub episodes: u64,
}

/// Full mutable training state.
#[derive(Debug)]
pub struct TrainState {
    pub config: RunConfig,
    pub s1: S1Params,
    pub s1_opt: Adam,
    pub logic: LogicParams,
    pub ac: ActorCritic,
    pub counters: Counters,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    config: RunConfig,
    dims: S1Dims,
    logic_cfg: LogicConfig,
    counters: Counters,
    adam_steps: [u64; 3],
    /// Moment-block counts per optimizer (zero until the first step).
    adam_blocks: [usize; 3],
    /// Shapes of every block, in serialization order.
    shapes: Vec<(usize, usize)>,
}

fn adam_blocks(opt: &Adam) -> Vec<Mat> {
    let mut out = opt.m.clone();
    out.extend(opt.v.clone());
    out
}

fn collect_blocks(state: &TrainState) -> Vec<Mat> {
    let mut blocks = state.s1.matrices();
    blocks.extend(adam_blocks(&state.s1_opt));
    blocks.extend(state.logic.matrices());
    blocks.push(state.logic.truth.clone());
    blocks.extend(state.ac.policy.matrices());
    blocks.extend(adam_blocks(&state.ac.policy_opt));
    blocks.extend(state.ac.value.matrices());
    blocks.extend(adam_blocks(&state.ac.value_opt));
    blocks
}

pub fn save(state: &TrainState, path: &Path) -> Result<()> {
    let blocks = collect_blocks(state);
    let manifest = Manifest {
        config: state.config.clone(),
        dims: state.s1.dims,
        logic_cfg: state.logic.cfg,
        counters: state.counters,
        adam_steps: [state.s1_opt.t, state.ac.policy_opt.t, state.ac.value_opt.t],
        adam_blocks: [
            state.s1_opt.m.len(),
            state.ac.policy_opt.m.len(),
            state.ac.value_opt.m.len(),
        ],
        shapes: blocks.iter().map(|b| b.dim()).collect(),
    };
    let manifest_bytes = serde_json::to_vec(&manifest)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(manifest_bytes.len() as u64).to_le_bytes())?;
    w.write_all(&manifest_bytes)?;
    for b in &blocks {
        for v in b.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<TrainState> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| Error::Truncated("magic bytes".into()))?;
    if &magic != MAGIC {
        return Err(Error::BadMagic {
            expected: String::from_utf8_lossy(MAGIC).into_owned(),
            found: String::from_utf8_lossy(&magic).into_owned(),
        });
    }
    let mut vbuf = [0u8; 4];
    r.read_exact(&mut vbuf).map_err(|_| Error::Truncated("format version".into()))?;
    let version = u32::from_le_bytes(vbuf);
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch { found: version, supported: FORMAT_VERSION });
    }
    let mut lbuf = [0u8; 8];
    r.read_exact(&mut lbuf).map_err(|_| Error::Truncated("manifest length".into()))?;
    let mlen = u64::from_le_bytes(lbuf) as usize;
    let mut mbytes = vec![0u8; mlen];
    r.read_exact(&mut mbytes).map_err(|_| Error::Truncated("manifest".into()))?;
    let manifest: Manifest = serde_json::from_slice(&mbytes)
        .map_err(|e| Error::Corrupt(format!("manifest: {e}")))?;

    let mut blocks = Vec::with_capacity(manifest.shapes.len());
    for &(rows, cols) in &manifest.shapes {
        let mut data = vec![0u8; rows * cols * 8];
        r.read_exact(&mut data)
            .map_err(|_| Error::Truncated("parameter block".into()))?;
        let vals: Vec<f64> = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        blocks.push(
            Mat::from_shape_vec((rows, cols), vals)
                .map_err(|e| Error::Corrupt(format!("block shape: {e}")))?,
        );
    }

    let cfg = manifest.config;
    let mut cursor = 0usize;
    let mut take = |n: usize| -> Vec<Mat> {
        let out = blocks[cursor..cursor + n].to_vec();
        cursor += n;
        out
    };

    let mut s1 = S1Params::zeros(manifest.dims);
    let n_s1 = s1.matrices().len();
    s1.load_matrices(&take(n_s1))?;
    let mut s1_opt = Adam::new(cfg.s1_learning_rate, cfg.s1_adam_epsilon);
    s1_opt.t = manifest.adam_steps[0];
    s1_opt.m = take(manifest.adam_blocks[0]);
    s1_opt.v = take(manifest.adam_blocks[0]);

    let mut logic = LogicParams::zeros(manifest.logic_cfg);
    let n_logic = logic.matrices().len();
    logic.load_matrices(&take(n_logic))?;
    let truth = take(1);
    if truth[0].dim() != logic.truth.dim() {
        return Err(Error::ShapeMismatch("truth anchor".into()));
    }
    logic.truth = truth[0].clone();

    let mut policy = PolicyParams::new(
        &mut crate::rng::stream(0, "ckpt-shape", 0),
        manifest.dims.latent(),
        cfg.hidden_size,
        manifest.dims.action,
    );
    let n_pol = policy.matrices().len();
    policy.load_matrices(&take(n_pol))?;
    let mut policy_opt = Adam::new(cfg.ac_learning_rate, cfg.ac_adam_epsilon);
    policy_opt.t = manifest.adam_steps[1];
    policy_opt.m = take(manifest.adam_blocks[1]);
    policy_opt.v = take(manifest.adam_blocks[1]);

    let mut value = ValueParams::new(
        &mut crate::rng::stream(0, "ckpt-shape", 1),
        manifest.dims.latent(),
        cfg.hidden_size,
    );
    let n_val = value.matrices().len();
    value.load_matrices(&take(n_val))?;
    let mut value_opt = Adam::new(cfg.ac_learning_rate, cfg.ac_adam_epsilon);
    value_opt.t = manifest.adam_steps[2];
    value_opt.m = take(manifest.adam_blocks[2]);
    value_opt.v = take(manifest.adam_blocks[2]);

    if cursor != blocks.len() {
        return Err(Error::Corrupt(format!(
            "checkpoint carries {} blocks, consumed {cursor}",
            blocks.len()
        )));
    }

    let ac = ActorCritic {
        policy,
        value,
        policy_opt,
        value_opt,
        gamma: cfg.discount,
        lambda: cfg.return_lambda,
        horizon: cfg.imagination_horizon,
        grad_clip: cfg.gradient_clipping,
    };
    Ok(TrainState { config: cfg, s1, s1_opt, logic, ac, counters: manifest.counters })
}
