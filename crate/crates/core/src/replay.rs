//! Episode storage and fixed-length sequence sampling.
//!
//! Stored rows follow the alignment `(o_t, a_{t-1}, r_{t-1})` with a zero
//! action and reward in row 0, so the recurrent update consumes the action
//! that preceded each observation. Values are kept as little-endian `f32`
//! in memory and on disk, which makes persist/load an exact identity.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tape::Mat;

const MAGIC: &[u8; 8] = b"LUCIDRPB";
const FORMAT_VERSION: u32 = 1;

/// One finished episode in aligned-row form. Row 0 carries the reset
/// observation with zero action/reward; `steps()` is the decision-step count.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub observations: Vec<Vec<f32>>,
    pub actions: Vec<Vec<f32>>,
    pub rewards: Vec<f32>,
}

impl Episode {
    /// Build from raw interaction logs: `obs` has one more entry than
    /// `actions`/`rewards` (the reset observation).
    pub fn from_steps(obs: Vec<Vec<f64>>, actions: Vec<Vec<f64>>, rewards: Vec<f64>) -> Result<Episode> {
        if obs.len() != actions.len() + 1 || actions.len() != rewards.len() {
            return Err(Error::InvalidInput(format!(
                "misaligned episode: {} observations, {} actions, {} rewards",
                obs.len(),
                actions.len(),
                rewards.len()
            )));
        }
        if obs.is_empty() {
            return Err(Error::InvalidInput("empty episode".into()));
        }
        let action_dim = actions.first().map(|a| a.len()).unwrap_or(0);
        let to32 = |v: &[f64]| -> Result<Vec<f32>> {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("episode data".into()));
            }
            Ok(v.iter().map(|&x| x as f32).collect())
        };
        let mut out_obs = Vec::with_capacity(obs.len());
        for o in &obs {
            out_obs.push(to32(o)?);
        }
        let mut out_act = Vec::with_capacity(obs.len());
        out_act.push(vec![0.0f32; action_dim]);
        for a in &actions {
            out_act.push(to32(a)?);
        }
        let mut out_rew = Vec::with_capacity(obs.len());
        out_rew.push(0.0f32);
        for &r in &rewards {
            if !r.is_finite() {
                return Err(Error::NonFinite("episode reward".into()));
            }
            out_rew.push(r as f32);
        }
        Ok(Episode { observations: out_obs, actions: out_act, rewards: out_rew })
    }

    /// Aligned row count (decision steps + 1).
    pub fn rows(&self) -> usize {
        self.observations.len()
    }

    /// Decision steps taken in the episode.
    pub fn steps(&self) -> usize {
        self.rows() - 1
    }
}

/// Fixed-length sequence batch: per time step, a `B x dim` matrix.
/// `is_first[t][b]` marks rows that start an episode.
#[derive(Debug, Clone)]
pub struct SequenceBatch {
    pub observations: Vec<Mat>,
    pub actions: Vec<Mat>,
    pub rewards: Vec<Mat>,
    pub is_first: Vec<Vec<bool>>,
    pub batch: usize,
    pub len: usize,
}

/// FIFO episode store with a step-count capacity.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    episodes: std::collections::VecDeque<Episode>,
    capacity_steps: usize,
    stored_steps: usize,
    obs_dim: usize,
    action_dim: usize,
}

impl ReplayBuffer {
    pub fn new(capacity_steps: usize, obs_dim: usize, action_dim: usize) -> Self {
        ReplayBuffer {
            episodes: std::collections::VecDeque::new(),
            capacity_steps,
            stored_steps: 0,
            obs_dim,
            action_dim,
        }
    }

    pub fn stored_steps(&self) -> usize {
        self.stored_steps
    }

    pub fn episode_count(&self) -> usize {
        self.episodes.len()
    }

    pub fn capacity_steps(&self) -> usize {
        self.capacity_steps
    }

    /// Append an episode, evicting the oldest ones once capacity is exceeded.
    pub fn add_episode(&mut self, episode: Episode) -> Result<()> {
        if episode.rows() < 2 {
            return Err(Error::InvalidInput("episode must contain at least one step".into()));
        }
        for o in &episode.observations {
            if o.len() != self.obs_dim {
                return Err(Error::ShapeMismatch(format!(
                    "observation dim {} != buffer dim {}",
                    o.len(),
                    self.obs_dim
                )));
            }
            if o.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("episode observation".into()));
            }
        }
        for a in &episode.actions {
            if a.len() != self.action_dim {
                return Err(Error::ShapeMismatch(format!(
                    "action dim {} != buffer dim {}",
                    a.len(),
                    self.action_dim
                )));
            }
            if a.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("episode action".into()));
            }
        }
        if episode.rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite("episode reward".into()));
        }
        self.stored_steps += episode.steps();
        self.episodes.push_back(episode);
        while self.stored_steps > self.capacity_steps && self.episodes.len() > 1 {
            if let Some(old) = self.episodes.pop_front() {
                self.stored_steps -= old.steps();
            }
        }
        Ok(())
    }

    /// All `(episode, offset)` pairs that admit a window of `len` rows.
    fn valid_starts(&self, len: usize) -> Vec<(usize, usize)> {
        let mut starts = Vec::new();
        for (e, ep) in self.episodes.iter().enumerate() {
            if ep.rows() >= len {
                for off in 0..=(ep.rows() - len) {
                    starts.push((e, off));
                }
            }
        }
        starts
    }

    /// Draw `batch` windows of `len` rows uniformly over all valid
    /// `(episode, offset)` pairs. Never straddles episode boundaries.
    pub fn sample_sequences(
        &self,
        batch: usize,
        len: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<SequenceBatch> {
        let starts = self.valid_starts(len);
        if starts.is_empty() {
            return Err(Error::NotReady(format!(
                "no stored episode is at least {len} rows long"
            )));
        }
        let mut observations = vec![Mat::zeros((batch, self.obs_dim)); len];
        let mut actions = vec![Mat::zeros((batch, self.action_dim)); len];
        let mut rewards = vec![Mat::zeros((batch, 1)); len];
        let mut is_first = vec![vec![false; batch]; len];
        for b in 0..batch {
            let (e, off) = starts[rng.random_range(0..starts.len())];
            let ep = &self.episodes[e];
            for t in 0..len {
                let row = off + t;
                for (j, &v) in ep.observations[row].iter().enumerate() {
                    observations[t][(b, j)] = v as f64;
                }
                for (j, &v) in ep.actions[row].iter().enumerate() {
                    actions[t][(b, j)] = v as f64;
                }
                rewards[t][(b, 0)] = ep.rewards[row] as f64;
                is_first[t][b] = row == 0;
            }
        }
        Ok(SequenceBatch { observations, actions, rewards, is_first, batch, len })
    }

    /// Write the buffer to disk; `load(persist(b))` equals `b` element-wise.
    pub fn persist(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.capacity_steps as u64).to_le_bytes())?;
        w.write_all(&(self.obs_dim as u32).to_le_bytes())?;
        w.write_all(&(self.action_dim as u32).to_le_bytes())?;
        w.write_all(&(self.episodes.len() as u64).to_le_bytes())?;
        for ep in &self.episodes {
            w.write_all(&(ep.rows() as u32).to_le_bytes())?;
            for row in &ep.observations {
                for v in row {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
            for row in &ep.actions {
                for v in row {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
            for v in &ep.rewards {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ReplayBuffer> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic, "magic bytes")?;
        if &magic != MAGIC {
            return Err(Error::BadMagic {
                expected: String::from_utf8_lossy(MAGIC).into_owned(),
                found: String::from_utf8_lossy(&magic).into_owned(),
            });
        }
        let version = read_u32(&mut r, "format version")?;
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch { found: version, supported: FORMAT_VERSION });
        }
        let capacity = read_u64(&mut r, "capacity")? as usize;
        let obs_dim = read_u32(&mut r, "observation dim")? as usize;
        let action_dim = read_u32(&mut r, "action dim")? as usize;
        let n_episodes = read_u64(&mut r, "episode count")? as usize;
        let mut buf = ReplayBuffer::new(capacity, obs_dim, action_dim);
        for e in 0..n_episodes {
            let rows = read_u32(&mut r, "episode length header")? as usize;
            if rows < 2 {
                return Err(Error::Corrupt(format!("episode {e} has {rows} rows")));
            }
            let mut observations = Vec::with_capacity(rows);
            for _ in 0..rows {
                observations.push(read_f32_vec(&mut r, obs_dim, "observations")?);
            }
            let mut actions = Vec::with_capacity(rows);
            for _ in 0..rows {
                actions.push(read_f32_vec(&mut r, action_dim, "actions")?);
            }
            let rewards = read_f32_vec(&mut r, rows, "rewards")?;
            let ep = Episode { observations, actions, rewards };
            buf.stored_steps += ep.steps();
            buf.episodes.push_back(ep);
        }
        Ok(buf)
    }
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|_| Error::Truncated(what.to_string()))
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f32_vec(r: &mut impl Read, n: usize, what: &str) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; n * 4];
    read_exact(r, &mut bytes, what)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
