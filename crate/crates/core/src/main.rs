use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lucid::config::RunConfig;
use lucid::{checkpoint, env, harness, metrics};

#[derive(Parser)]
#[command(name = "lucid", version, about = "Latent world model with a coupled logic engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Flat key=value config file; flags below override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the scaled-down desk profile as the base instead of defaults.
    #[arg(long, default_value_t = false)]
    desk: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    env: Option<String>,
    /// Decision module: ac | mpc.
    #[arg(long)]
    planner: Option<String>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    logic_weight: Option<f64>,
    #[arg(long)]
    mpc_iters: Option<usize>,
    #[arg(long)]
    mpc_candidates: Option<usize>,
    /// Extra overrides as key=value pairs.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl ConfigArgs {
    fn build(&self) -> Result<RunConfig> {
        let mut cfg = if self.desk { RunConfig::desk() } else { RunConfig::default() };
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            cfg.apply_text(&text)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(env) = &self.env {
            cfg.env = env.clone();
        }
        if let Some(planner) = &self.planner {
            cfg.planner = planner.parse()?;
        }
        if let Some(n) = self.episodes {
            cfg.training_episodes = n;
        }
        if let Some(w) = self.logic_weight {
            cfg.logic_weight = w;
        }
        if let Some(i) = self.mpc_iters {
            cfg.mpc_iterations = i;
        }
        if let Some(j) = self.mpc_candidates {
            cfg.mpc_candidates = j;
        }
        for kv in &self.sets {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("--set expects key=value, got `{kv}`"))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the full training loop and write checkpoint, replay and metrics.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "runs/latest")]
        out_dir: PathBuf,
        /// Directory for the replay file (defaults to the run directory).
        #[arg(long)]
        replay_dir: Option<PathBuf>,
        /// Resume from this checkpoint (requires --replay).
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Replay file matching the resumed checkpoint.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Evaluate a checkpoint with deterministic actions.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
    },
    /// Logical-consistency table over imagination horizons.
    Consistency {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated horizons.
        #[arg(long, default_value = "10,30,50,100")]
        horizons: String,
        #[arg(long, default_value_t = 30)]
        depth: usize,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pairwise logic-strength heatmap over one imagined trajectory.
    Heatmap {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 30)]
        depth: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List built-in environments as JSON.
    Envs,
    /// Re-export a metrics CSV as csv or json.
    Export {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "json")]
        format: String,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train { cfg, out_dir, replay_dir, resume, replay } => {
            let outputs = match (&resume, &replay) {
                (Some(ckpt), Some(rp)) => {
                    harness::resume(ckpt, rp, &out_dir, replay_dir.as_deref())?
                }
                (Some(_), None) => bail!("--resume requires --replay"),
                _ => {
                    let config = cfg.build()?;
                    harness::train(&config, &out_dir, replay_dir.as_deref())?
                }
            };
            println!("checkpoint: {}", outputs.checkpoint_path.display());
            println!("replay:     {}", outputs.replay_path.display());
            println!("metrics:    {}", outputs.metrics_path.display());
        }
        Command::Eval { checkpoint: ckpt, episodes } => {
            let state = checkpoint::load(&ckpt)?;
            let (mean, std, _) = harness::evaluate(&state, episodes)?;
            let (rand_mean, rand_std) = harness::random_baseline(&state.config, episodes)?;
            println!("episodes:        {episodes}");
            println!("return mean:     {mean}");
            println!("return std:      {std}");
            println!("random baseline: {rand_mean} (std {rand_std})");
        }
        Command::Consistency { checkpoint: ckpt, horizons, depth, episodes, out } => {
            let state = checkpoint::load(&ckpt)?;
            let hs: Vec<usize> = horizons
                .split(',')
                .map(|h| h.trim().parse::<usize>().context("bad horizon"))
                .collect::<Result<_>>()?;
            let reports = harness::consistency_table(&state, &hs, depth, episodes)?;
            let csv = harness::consistency_csv(&state.config.env, &reports);
            match out {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Heatmap { checkpoint: ckpt, depth, out } => {
            let state = checkpoint::load(&ckpt)?;
            let m = harness::heatmap(&state, depth)?;
            let csv = harness::heatmap_csv(&m);
            match out {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Envs => {
            let specs = env::all_specs();
            println!("{}", serde_json::to_string_pretty(&specs)?);
        }
        Command::Export { metrics: src, out, format } => {
            metrics::export(&src, &out, &format)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}
