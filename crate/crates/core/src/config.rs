//! Run configuration: every tunable with its default, a flat key=value file
//! format, and the scaled-down desk preset used by the fast experiments.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Planner {
    Ac,
    Mpc,
}

impl std::str::FromStr for Planner {
    type Err = Error;
    fn from_str(s: &str) -> Result<Planner> {
        match s {
            "ac" => Ok(Planner::Ac),
            "mpc" => Ok(Planner::Mpc),
            other => Err(Error::Config(format!("unknown planner `{other}` (use ac|mpc)"))),
        }
    }
}

impl std::fmt::Display for Planner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Planner::Ac => write!(f, "ac"),
            Planner::Mpc => write!(f, "mpc"),
        }
    }
}

/// Full run configuration. Serialized verbatim into every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub env: String,
    pub planner: Planner,
    pub seed: u64,

    // General training loop.
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub sequence_length: usize,
    pub seed_episodes: usize,
    pub training_episodes: usize,
    pub collect_interval: usize,
    pub max_episode_length: usize,
    pub exploration_noise: f64,
    pub imagination_horizon: usize,
    pub gradient_clipping: f64,

    // Latent dynamics model.
    pub embedding_size: usize,
    pub hidden_size: usize,
    pub belief_size: usize,
    pub state_size: usize,
    pub free_nats: f64,
    pub dyn_loss_weight: f64,
    pub rep_loss_weight: f64,
    pub s1_learning_rate: f64,
    pub s1_adam_epsilon: f64,

    // Logic engine.
    pub reasoning_depth: usize,
    pub logic_vector_size: usize,
    pub l2_weight: f64,
    pub regularization_weight: f64,
    pub logic_mlp_layers: usize,
    pub s2_learning_rate: f64,
    pub kappa: f64,
    pub logic_weight: f64,

    // Actor-critic.
    pub return_lambda: f64,
    pub discount: f64,
    pub ac_learning_rate: f64,
    pub ac_adam_epsilon: f64,

    // Gradient planner.
    pub mpc_iterations: usize,
    pub mpc_candidates: usize,
    pub mpc_learning_rates: Vec<f64>,
    pub mpc_horizon: usize,

    // Harness knobs (artifact plumbing, not table rows).
    /// Evaluate the guided logic term every k-th transition.
    pub logic_term_stride: usize,
    pub imagine_starts: usize,
    pub s2_batch: usize,
    pub s2_sequence_length: usize,
    pub eval_episodes: usize,
    pub eval_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            env: "pendulum-swingup".into(),
            planner: Planner::Ac,
            seed: 0,

            replay_capacity: 1_000_000,
            batch_size: 50,
            sequence_length: 64,
            seed_episodes: 5,
            training_episodes: 1000,
            collect_interval: 100,
            max_episode_length: 500,
            exploration_noise: 0.3,
            imagination_horizon: 30,
            gradient_clipping: 100.0,

            embedding_size: 1024,
            hidden_size: 200,
            belief_size: 200,
            state_size: 30,
            free_nats: 3.0,
            dyn_loss_weight: 1.0,
            rep_loss_weight: 1.0,
            s1_learning_rate: 1e-3,
            s1_adam_epsilon: 1e-4,

            reasoning_depth: 30,
            logic_vector_size: 64,
            l2_weight: 1e-5,
            regularization_weight: 1.0,
            logic_mlp_layers: 3,
            s2_learning_rate: 1e-2,
            kappa: 10.0,
            logic_weight: 0.1,

            return_lambda: 0.95,
            discount: 0.99,
            ac_learning_rate: 1e-4,
            ac_adam_epsilon: 1e-4,

            mpc_iterations: 40,
            mpc_candidates: 1000,
            mpc_learning_rates: vec![0.1, 0.01, 0.005, 0.0001],
            mpc_horizon: 30,

            logic_term_stride: 1,
            imagine_starts: 50,
            s2_batch: 16,
            s2_sequence_length: 17,
            eval_episodes: 100,
            eval_every: 20,
        }
    }
}

impl RunConfig {
    /// Scaled-down profile for commodity-CPU experiments: same algorithms,
    /// smaller widths and budgets.
    pub fn desk() -> Self {
        RunConfig {
            training_episodes: 200,
            collect_interval: 20,
            batch_size: 16,
            sequence_length: 32,
            embedding_size: 128,
            hidden_size: 96,
            belief_size: 64,
            state_size: 16,
            reasoning_depth: 2,
            logic_vector_size: 32,
            logic_term_stride: 4,
            imagine_starts: 24,
            s2_batch: 6,
            s2_sequence_length: 9,
            eval_episodes: 20,
            eval_every: 25,
            ..RunConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size),
            ("sequence_length", self.sequence_length),
            ("seed_episodes", self.seed_episodes),
            ("collect_interval", self.collect_interval),
            ("max_episode_length", self.max_episode_length),
            ("imagination_horizon", self.imagination_horizon),
            ("embedding_size", self.embedding_size),
            ("hidden_size", self.hidden_size),
            ("belief_size", self.belief_size),
            ("state_size", self.state_size),
            ("logic_vector_size", self.logic_vector_size),
            ("logic_mlp_layers", self.logic_mlp_layers),
            ("mpc_candidates", self.mpc_candidates),
            ("mpc_horizon", self.mpc_horizon),
            ("imagine_starts", self.imagine_starts),
            ("s2_batch", self.s2_batch),
            ("s2_sequence_length", self.s2_sequence_length),
            ("logic_term_stride", self.logic_term_stride),
            ("replay_capacity", self.replay_capacity),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.sequence_length < 2 {
            return Err(Error::Config("sequence_length must be at least 2".into()));
        }
        if self.s2_sequence_length < 2 {
            return Err(Error::Config("s2_sequence_length must be at least 2".into()));
        }
        if self.s2_sequence_length > self.sequence_length {
            return Err(Error::Config(
                "s2_sequence_length cannot exceed sequence_length".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.return_lambda) || !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::Config("return_lambda and discount must lie in [0, 1]".into()));
        }
        if self.mpc_learning_rates.is_empty() {
            return Err(Error::Config("mpc_learning_rates must not be empty".into()));
        }
        for (name, v) in [
            ("exploration_noise", self.exploration_noise),
            ("gradient_clipping", self.gradient_clipping),
            ("free_nats", self.free_nats),
            ("s1_learning_rate", self.s1_learning_rate),
            ("s2_learning_rate", self.s2_learning_rate),
            ("ac_learning_rate", self.ac_learning_rate),
            ("kappa", self.kappa),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and non-negative")));
            }
        }
        Ok(())
    }

    /// Parse a flat `key = value` file; `#` starts a comment.
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", lineno + 1, e)))?;
        }
        Ok(())
    }

    /// Set one field by key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn p<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse::<T>()
                .map_err(|_| Error::Config(format!("cannot parse `{v}` for key `{key}`")))
        }
        match key {
            "env" => self.env = value.to_string(),
            "planner" => self.planner = value.parse()?,
            "seed" => self.seed = p(key, value)?,
            "replay_capacity" => self.replay_capacity = p(key, value)?,
            "batch_size" => self.batch_size = p(key, value)?,
            "sequence_length" => self.sequence_length = p(key, value)?,
            "seed_episodes" => self.seed_episodes = p(key, value)?,
            "training_episodes" => self.training_episodes = p(key, value)?,
            "collect_interval" => self.collect_interval = p(key, value)?,
            "max_episode_length" => self.max_episode_length = p(key, value)?,
            "exploration_noise" => self.exploration_noise = p(key, value)?,
            "imagination_horizon" => self.imagination_horizon = p(key, value)?,
            "gradient_clipping" => self.gradient_clipping = p(key, value)?,
            "embedding_size" => self.embedding_size = p(key, value)?,
            "hidden_size" => self.hidden_size = p(key, value)?,
            "belief_size" => self.belief_size = p(key, value)?,
            "state_size" => self.state_size = p(key, value)?,
            "free_nats" => self.free_nats = p(key, value)?,
            "dyn_loss_weight" => self.dyn_loss_weight = p(key, value)?,
            "rep_loss_weight" => self.rep_loss_weight = p(key, value)?,
            "s1_learning_rate" => self.s1_learning_rate = p(key, value)?,
            "s1_adam_epsilon" => self.s1_adam_epsilon = p(key, value)?,
            "reasoning_depth" => self.reasoning_depth = p(key, value)?,
            "logic_vector_size" => self.logic_vector_size = p(key, value)?,
            "l2_weight" => self.l2_weight = p(key, value)?,
            "regularization_weight" => self.regularization_weight = p(key, value)?,
            "logic_mlp_layers" => self.logic_mlp_layers = p(key, value)?,
            "s2_learning_rate" => self.s2_learning_rate = p(key, value)?,
            "kappa" => self.kappa = p(key, value)?,
            "logic_weight" => self.logic_weight = p(key, value)?,
            "return_lambda" => self.return_lambda = p(key, value)?,
            "discount" => self.discount = p(key, value)?,
            "ac_learning_rate" => self.ac_learning_rate = p(key, value)?,
            "ac_adam_epsilon" => self.ac_adam_epsilon = p(key, value)?,
            "mpc_iterations" => self.mpc_iterations = p(key, value)?,
            "mpc_candidates" => self.mpc_candidates = p(key, value)?,
            "mpc_horizon" => self.mpc_horizon = p(key, value)?,
            "mpc_learning_rates" => {
                let rates: Result<Vec<f64>> =
                    value.split('-').map(|v| p::<f64>(key, v.trim())).collect();
                self.mpc_learning_rates = rates?;
            }
            "logic_term_stride" => self.logic_term_stride = p(key, value)?,
            "imagine_starts" => self.imagine_starts = p(key, value)?,
            "s2_batch" => self.s2_batch = p(key, value)?,
            "s2_sequence_length" => self.s2_sequence_length = p(key, value)?,
            "eval_episodes" => self.eval_episodes = p(key, value)?,
            "eval_every" => self.eval_every = p(key, value)?,
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Flat key=value rendering, keys sorted, suitable for `from_file`.
    pub fn to_flat_text(&self) -> String {
        let mut map: BTreeMap<&str, String> = BTreeMap::new();
        map.insert("env", self.env.clone());
        map.insert("planner", self.planner.to_string());
        map.insert("seed", self.seed.to_string());
        map.insert("replay_capacity", self.replay_capacity.to_string());
        map.insert("batch_size", self.batch_size.to_string());
        map.insert("sequence_length", self.sequence_length.to_string());
        map.insert("seed_episodes", self.seed_episodes.to_string());
        map.insert("training_episodes", self.training_episodes.to_string());
        map.insert("collect_interval", self.collect_interval.to_string());
        map.insert("max_episode_length", self.max_episode_length.to_string());
        map.insert("exploration_noise", self.exploration_noise.to_string());
        map.insert("imagination_horizon", self.imagination_horizon.to_string());
        map.insert("gradient_clipping", self.gradient_clipping.to_string());
        map.insert("embedding_size", self.embedding_size.to_string());
        map.insert("hidden_size", self.hidden_size.to_string());
        map.insert("belief_size", self.belief_size.to_string());
        map.insert("state_size", self.state_size.to_string());
        map.insert("free_nats", self.free_nats.to_string());
        map.insert("dyn_loss_weight", self.dyn_loss_weight.to_string());
        map.insert("rep_loss_weight", self.rep_loss_weight.to_string());
        map.insert("s1_learning_rate", self.s1_learning_rate.to_string());
        map.insert("s1_adam_epsilon", self.s1_adam_epsilon.to_string());
        map.insert("reasoning_depth", self.reasoning_depth.to_string());
        map.insert("logic_vector_size", self.logic_vector_size.to_string());
        map.insert("l2_weight", self.l2_weight.to_string());
        map.insert("regularization_weight", self.regularization_weight.to_string());
        map.insert("logic_mlp_layers", self.logic_mlp_layers.to_string());
        map.insert("s2_learning_rate", self.s2_learning_rate.to_string());
        map.insert("kappa", self.kappa.to_string());
        map.insert("logic_weight", self.logic_weight.to_string());
        map.insert("return_lambda", self.return_lambda.to_string());
        map.insert("discount", self.discount.to_string());
        map.insert("ac_learning_rate", self.ac_learning_rate.to_string());
        map.insert("ac_adam_epsilon", self.ac_adam_epsilon.to_string());
        map.insert("mpc_iterations", self.mpc_iterations.to_string());
        map.insert("mpc_candidates", self.mpc_candidates.to_string());
        map.insert(
            "mpc_learning_rates",
            self.mpc_learning_rates
                .iter()
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
                .join("-"),
        );
        map.insert("mpc_horizon", self.mpc_horizon.to_string());
        map.insert("logic_term_stride", self.logic_term_stride.to_string());
        map.insert("imagine_starts", self.imagine_starts.to_string());
        map.insert("s2_batch", self.s2_batch.to_string());
        map.insert("s2_sequence_length", self.s2_sequence_length.to_string());
        map.insert("eval_episodes", self.eval_episodes.to_string());
        map.insert("eval_every", self.eval_every.to_string());
        let mut out = String::new();
        for (k, v) in map {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }
}
