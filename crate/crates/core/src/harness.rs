//! Orchestration: the dual-system training loop, evaluation protocols,
//! consistency tables, and heatmap export.
//!
//! Per collect-interval round: one dynamics update, one logic update on
//! detached posterior transitions, one actor-critic imagination update
//! (skipped under the gradient planner), then one guided dynamics update
//! with the logic side frozen. After the rounds, one real episode is
//! collected with exploration and appended to replay.
//!
//! Every source of randomness is a stream derived from the master seed, a
//! purpose tag, and a counter, so a resumed run consumes exactly the same
//! streams a straight-through run would have.

use std::path::{Path, PathBuf};

use ndarray::Array1;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::{Counters, TrainState};
use crate::config::{Planner, RunConfig};
use crate::env::Env;
use crate::error::{Error, Result};
use crate::feedback::{guided_s1_loss, s1_to_s2_batch, LogicSupervisionBatch};
use crate::logic::{GateCtx, LogicConfig, LogicParams};
use crate::metrics::{MetricsRow, MetricsWriter};
use crate::nn::{clip_grad_norm, Adam, Sgd};
use crate::planner::{
    act, plan_grad_mpc, ActorCritic, PlanConfig, PolicyIds, WorldPlanModel,
};
use crate::reasoning::{logical_consistency, ConsistencyReport, S2LossCfg};
use crate::replay::{Episode, ReplayBuffer};
use crate::rng::{derive_u64, stream};
use crate::rssm::{
    imagine, observe_sequence, s1_loss, ModelState, S1Dims, S1LossCfg, S1Params,
};
use crate::tape::{Mat, Tape};

/// Row cap for the in-loop regularizer sample set.
const REG_ROW_CAP: usize = 48;
/// Decision steps of posterior filtering before consistency imagination.
const CONSISTENCY_WARMUP: usize = 10;

/// Scalar metrics of one dual-update round.
struct RoundMetrics {
    pred: f64,
    dyn_kl: f64,
    rep_kl: f64,
    logic_elbo: f64,
    s2_total: f64,
    rules: [f64; 14],
}

/// Build a fresh training state from a validated config.
pub fn init_state(config: &RunConfig) -> Result<TrainState> {
    config.validate()?;
    let probe = Env::make(&config.env, config.seed)?;
    let dims = S1Dims::from_config(config, probe.spec().obs_dim, probe.spec().action_dim);
    let logic_cfg = LogicConfig::from_config(config, dims.latent(), dims.action);
    let mut init_rng = stream(config.seed, "init", 0);
    let s1 = S1Params::new(&mut init_rng, dims);
    let logic = LogicParams::new(&mut init_rng, logic_cfg);
    let ac = ActorCritic::new(&mut init_rng, config, dims.latent(), dims.action);
    Ok(TrainState {
        config: config.clone(),
        s1,
        s1_opt: Adam::new(config.s1_learning_rate, config.s1_adam_epsilon),
        logic,
        ac,
        counters: Counters::default(),
    })
}

/// Artifacts of a training run.
pub struct TrainOutputs {
    pub checkpoint_path: PathBuf,
    pub replay_path: PathBuf,
    pub metrics_path: PathBuf,
}

/// Train from scratch: seed episodes, then the episode loop.
pub fn train(config: &RunConfig, out_dir: &Path, replay_dir: Option<&Path>) -> Result<TrainOutputs> {
    let mut state = init_state(config)?;
    let probe = Env::make(&config.env, config.seed)?;
    let mut buffer = ReplayBuffer::new(
        config.replay_capacity,
        probe.spec().obs_dim,
        probe.spec().action_dim,
    );
    run_training(&mut state, &mut buffer, out_dir, replay_dir)
}

/// Continue a checkpointed run until it reaches its configured episode
/// budget (bitwise identical to never having stopped).
pub fn resume(
    checkpoint_path: &Path,
    replay_path: &Path,
    out_dir: &Path,
    replay_dir: Option<&Path>,
) -> Result<TrainOutputs> {
    let mut state = crate::checkpoint::load(checkpoint_path)?;
    let mut buffer = ReplayBuffer::load(replay_path)?;
    run_training(&mut state, &mut buffer, out_dir, replay_dir)
}

fn run_training(
    state: &mut TrainState,
    buffer: &mut ReplayBuffer,
    out_dir: &Path,
    replay_dir: Option<&Path>,
) -> Result<TrainOutputs> {
    std::fs::create_dir_all(out_dir)?;
    let metrics_path = out_dir.join("metrics.csv");
    let mut metrics = MetricsWriter::create(&metrics_path)?;
    let config = state.config.clone();
    let mut env = Env::make(&config.env, config.seed)?;

    // Seed phase: random-policy episodes fill the buffer.
    while state.counters.env_trials < config.seed_episodes as u64 {
        let trial = state.counters.env_trials;
        collect_episode(state, buffer, &mut env, trial, CollectPolicy::Random)?;
    }

    while state.counters.episodes < config.training_episodes as u64 {
        for _ in 0..config.collect_interval {
            let r = state.counters.rounds;
            let m = dual_update_round(state, buffer, r)?;
            state.counters.rounds += 1;
            let row = MetricsRow {
                step: state.counters.rounds,
                env_steps: state.counters.env_steps,
                env_trials: state.counters.env_trials,
                loss_pred: Some(m.pred),
                loss_dyn: Some(m.dyn_kl),
                loss_rep: Some(m.rep_kl),
                loss_logic_elbo: Some(m.logic_elbo),
                loss_s2: Some(m.s2_total),
                rules: Some(m.rules),
                ..MetricsRow::default()
            };
            ensure_finite_row(&row, r)?;
            metrics.append(&row)?;
        }

        let trial = state.counters.env_trials;
        let mode = match config.planner {
            Planner::Ac => CollectPolicy::Actor { explore: true },
            Planner::Mpc => CollectPolicy::Mpc,
        };
        collect_episode(state, buffer, &mut env, trial, mode)?;
        state.counters.episodes += 1;

        if config.eval_every > 0 && state.counters.episodes % config.eval_every as u64 == 0 {
            let (mean, std, _) = evaluate(state, config.eval_episodes)?;
            let row = MetricsRow {
                step: state.counters.rounds,
                env_steps: state.counters.env_steps,
                env_trials: state.counters.env_trials,
                eval_return_mean: Some(mean),
                eval_return_std: Some(std),
                ..MetricsRow::default()
            };
            metrics.append(&row)?;
        }
    }

    metrics.flush()?;
    let checkpoint_path = out_dir.join("checkpoint.bin");
    crate::checkpoint::save(state, &checkpoint_path)?;
    let replay_path = replay_dir
        .map(|d| d.join("replay.bin"))
        .unwrap_or_else(|| out_dir.join("replay.bin"));
    if let Some(parent) = replay_path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    buffer.persist(&replay_path)?;
    Ok(TrainOutputs { checkpoint_path, replay_path, metrics_path })
}

fn ensure_finite_row(row: &MetricsRow, round: u64) -> Result<()> {
    let fields = [
        row.loss_pred,
        row.loss_dyn,
        row.loss_rep,
        row.loss_logic_elbo,
        row.loss_s2,
    ];
    for f in fields.into_iter().flatten() {
        if !f.is_finite() {
            return Err(Error::NonFinite(format!("loss component in round {round}")));
        }
    }
    if let Some(rules) = &row.rules {
        if rules.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite(format!("rule residual in round {round}")));
        }
    }
    Ok(())
}

/// One full dual update: dynamics, logic on detached truths, actor-critic
/// imagination, then the guided dynamics step.
fn dual_update_round(
    state: &mut TrainState,
    buffer: &ReplayBuffer,
    round: u64,
) -> Result<RoundMetrics> {
    let config = &state.config.clone();
    let seed = config.seed;
    let loss_cfg = S1LossCfg::from_config(config);

    let mut sample_rng = stream(seed, "sample", round);
    let batch = buffer.sample_sequences(config.batch_size, config.sequence_length, &mut sample_rng)?;

    // Dynamics step.
    let mut tape = Tape::new();
    let (s1_ids, s1_bound) = state.s1.bind(&mut tape, false);
    let rollout = observe_sequence(&mut tape, &s1_ids, &batch, &mut stream(seed, "model", round));
    let losses = s1_loss(&mut tape, &s1_ids, &batch, &rollout, loss_cfg);
    let grads = tape.backward(losses.total);
    let mut g = s1_bound.grads(&tape, &grads);
    clip_grad_norm(&mut g, config.gradient_clipping);
    let pred = tape.scalar_value(losses.pred);
    let dyn_kl = tape.scalar_value(losses.dyn_raw);
    let rep_kl = tape.scalar_value(losses.rep_raw);
    state.s1_opt.step(&mut state.s1, &g);

    // Logic supervision from the (pre-update) posterior pass.
    let sup = s1_to_s2_batch(&tape, &rollout, &batch);
    let sub = subsample_supervision(&sup, config, seed, round);

    // Logic step on detached truths.
    let mut s2_tape = Tape::new();
    let (logic_ids, logic_bound) = state.logic.bind(&mut s2_tape, false);
    let mut ctx = GateCtx::train(stream(seed, "shuffle", round));
    let s2_cfg = S2LossCfg {
        max_depth: config.reasoning_depth,
        reg_weight: config.regularization_weight,
        l2_weight: config.l2_weight,
        reg_sample_cap: REG_ROW_CAP,
    };
    let s2 = crate::reasoning::s2_loss(
        &mut s2_tape,
        &logic_ids,
        &logic_bound,
        &sub.latents,
        &sub.actions,
        s2_cfg,
        &mut ctx,
    );
    let s2_grads = s2_tape.backward(s2.total);
    let mut g2 = logic_bound.grads(&s2_tape, &s2_grads);
    clip_grad_norm(&mut g2, config.gradient_clipping);
    let s2_total = s2_tape.scalar_value(s2.total);
    let mut rules = [0.0; 14];
    for (i, &r) in s2.reg.rules.iter().enumerate() {
        rules[i] = s2_tape.scalar_value(r);
    }
    Sgd::new(config.s2_learning_rate).step(&mut state.logic, &g2);

    // Actor-critic step on imagined rollouts from detached start states.
    if config.planner == Planner::Ac {
        let (start_h, start_z) = imagination_starts(&sup, config, seed, round);
        state
            .ac
            .update(&state.s1, &start_h, &start_z, &mut stream(seed, "imagine", round));
    }

    // Guided dynamics step: logic frozen, consistency term active.
    let mut g_tape = Tape::new();
    let (s1_ids, s1_bound) = state.s1.bind(&mut g_tape, false);
    let (logic_ids, _) = state.logic.bind(&mut g_tape, true);
    let rollout =
        observe_sequence(&mut g_tape, &s1_ids, &batch, &mut stream(seed, "model-guided", round));
    let guided = guided_s1_loss(
        &mut g_tape,
        &s1_ids,
        &logic_ids,
        &batch,
        &rollout,
        loss_cfg,
        config.logic_weight,
        config.logic_term_stride,
    )?;
    let guided_grads = g_tape.backward(guided.total);
    let mut gg = s1_bound.grads(&g_tape, &guided_grads);
    clip_grad_norm(&mut gg, config.gradient_clipping);
    let logic_elbo = guided
        .logic_term
        .map(|n| g_tape.scalar_value(n))
        .unwrap_or(0.0);
    state.s1_opt.step(&mut state.s1, &gg);

    Ok(RoundMetrics { pred, dyn_kl, rep_kl, logic_elbo, s2_total, rules })
}

/// Pick `s2_batch` sequence rows and one `s2_sequence_length` window.
fn subsample_supervision(
    sup: &LogicSupervisionBatch,
    config: &RunConfig,
    seed: u64,
    round: u64,
) -> LogicSupervisionBatch {
    let mut rng = stream(seed, "s2-window", round);
    let b = sup.latents[0].nrows();
    let l = sup.latents.len();
    let rows: Vec<usize> = (0..config.s2_batch.min(b))
        .map(|_| rng.random_range(0..b))
        .collect();
    let win = config.s2_sequence_length.min(l);
    let t0 = rng.random_range(0..=(l - win));
    sup.subwindow(&rows, t0, win)
}

/// Gather `imagine_starts` (row, step) posterior states into start batches.
fn imagination_starts(
    sup: &LogicSupervisionBatch,
    config: &RunConfig,
    seed: u64,
    round: u64,
) -> (Mat, Mat) {
    let mut rng = stream(seed, "starts", round);
    let b = sup.latents[0].nrows();
    let l = sup.latents.len();
    let belief = config.belief_size;
    let state_dim = config.state_size;
    let n = config.imagine_starts;
    let mut start_h = Mat::zeros((n, belief));
    let mut start_z = Mat::zeros((n, state_dim));
    for i in 0..n {
        let row = rng.random_range(0..b);
        let t = rng.random_range(0..l);
        let latent = &sup.latents[t];
        for j in 0..belief {
            start_h[(i, j)] = latent[(row, j)];
        }
        for j in 0..state_dim {
            start_z[(i, j)] = latent[(row, belief + j)];
        }
    }
    (start_h, start_z)
}

enum CollectPolicy {
    Random,
    Actor { explore: bool },
    Mpc,
}

/// Posterior filter over one real episode, logging the interaction.
fn collect_episode(
    state: &mut TrainState,
    buffer: &mut ReplayBuffer,
    env: &mut Env,
    trial: u64,
    mode: CollectPolicy,
) -> Result<()> {
    let config = &state.config;
    let seed = config.seed;
    let action_dim = env.spec().action_dim;
    let repeat = env.spec().action_repeat;
    let mut explore_rng = stream(seed, "explore", trial);

    let mut obs = env.reset(derive_u64(seed, "env", trial));
    let mut obs_log = vec![obs.clone()];
    let mut act_log: Vec<Vec<f64>> = Vec::new();
    let mut rew_log: Vec<f64> = Vec::new();

    // One tape per episode; parameters bound once, frozen.
    let mut tape = Tape::new();
    let (ids, _) = state.s1.bind(&mut tape, true);
    let (policy_ids, _) = state.ac.policy.bind(&mut tape, true);
    let mut model = FilterState::initial(&mut tape, &state.s1);

    let steps = config.max_episode_length.min(env.spec().max_episode_steps);
    for t in 0..steps {
        model.advance(&mut tape, &ids, &obs, true, &mut explore_rng);
        let action: Vec<f64> = match &mode {
            CollectPolicy::Random => (0..action_dim)
                .map(|_| explore_rng.random_range(-1.0..1.0))
                .collect(),
            CollectPolicy::Actor { explore } => {
                let a = policy_action(&mut tape, &policy_ids, &model, *explore, config, &mut explore_rng);
                a.to_vec()
            }
            CollectPolicy::Mpc => {
                let start = model.state(&tape);
                let plan_cfg = PlanConfig::from_config(config);
                let plan = plan_grad_mpc(
                    &WorldPlanModel { world: &state.s1, start },
                    &plan_cfg,
                    &mut stream(seed, "plan", trial * 1_000_000 + t as u64),
                )?;
                plan.actions.row(0).to_vec()
            }
        };
        let result = env.step(&action)?;
        obs = result.observation.clone();
        obs_log.push(result.observation);
        rew_log.push(result.reward);
        act_log.push(action.clone());
        model.last_action = action;
        state.counters.env_steps += repeat as u64;
        if result.terminal {
            break;
        }
    }
    buffer.add_episode(Episode::from_steps(obs_log, act_log, rew_log)?)?;
    state.counters.env_trials += 1;
    Ok(())
}

/// Online posterior filter over a single episode.
struct FilterState {
    h: crate::tape::NodeId,
    z: crate::tape::NodeId,
    last_action: Vec<f64>,
    state_dim: usize,
}

impl FilterState {
    fn initial(tape: &mut Tape, s1: &S1Params) -> FilterState {
        FilterState {
            h: tape.leaf(Mat::zeros((1, s1.dims.belief))),
            z: tape.leaf(Mat::zeros((1, s1.dims.state))),
            last_action: vec![0.0; s1.dims.action],
            state_dim: s1.dims.state,
        }
    }

    /// `h' = f(h, z, a_prev)`, then the posterior at the new observation
    /// (sampled when exploring, mean otherwise).
    fn advance(
        &mut self,
        tape: &mut Tape,
        ids: &crate::rssm::S1Ids,
        obs: &[f64],
        sample: bool,
        rng: &mut ChaCha8Rng,
    ) {
        let a = tape.leaf(Mat::from_shape_vec((1, self.last_action.len()), self.last_action.clone()).unwrap());
        let h = ids.step_h(tape, self.h, self.z, a);
        let o = tape.leaf(Mat::from_shape_vec((1, obs.len()), obs.to_vec()).unwrap());
        let e = ids.encode(tape, o);
        let post = ids.posterior(tape, h, e);
        let z = if sample {
            let eps = crate::rssm::standard_normal_mat(rng, (1, self.state_dim));
            ids.sample(tape, post, eps)
        } else {
            post.mean
        };
        self.h = h;
        self.z = z;
    }

    fn state(&self, tape: &Tape) -> ModelState {
        ModelState {
            h: tape.value(self.h).row(0).to_owned(),
            z: tape.value(self.z).row(0).to_owned(),
        }
    }
}

fn policy_action(
    tape: &mut Tape,
    policy: &PolicyIds,
    model: &FilterState,
    explore: bool,
    config: &RunConfig,
    rng: &mut ChaCha8Rng,
) -> Array1<f64> {
    let latent = tape.concat_cols(model.h, model.z);
    if explore {
        let eps = crate::rssm::standard_normal_mat(rng, (1, policy.action_dim));
        let a = policy.sample(tape, latent, eps);
        let mut v = tape.value(a).row(0).to_owned();
        for x in v.iter_mut() {
            let n: f64 = rng.sample(rand_distr::StandardNormal);
            *x = (*x + config.exploration_noise * n).clamp(-1.0, 1.0);
        }
        v
    } else {
        let a = policy.mode(tape, latent);
        tape.value(a).row(0).to_owned()
    }
}

/// Deterministic-action evaluation episodes; per-episode streams are derived
/// from the master seed and the episode index, so aggregation is
/// order-independent.
pub fn evaluate(state: &TrainState, episodes: usize) -> Result<(f64, f64, Vec<f64>)> {
    if episodes == 0 {
        return Err(Error::InvalidInput("evaluation needs at least one episode".into()));
    }
    let config = &state.config;
    let mut returns = Vec::with_capacity(episodes);
    for e in 0..episodes {
        returns.push(eval_episode(state, e as u64)?);
    }
    let mean = returns.iter().sum::<f64>() / episodes as f64;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / episodes as f64;
    let _ = config;
    Ok((mean, var.sqrt(), returns))
}

fn eval_episode(state: &TrainState, episode: u64) -> Result<f64> {
    let config = &state.config;
    let seed = config.seed;
    let mut env = Env::make(&config.env, seed)?;
    let mut obs = env.reset(derive_u64(seed, "eval", episode));
    let mut tape = Tape::new();
    let (ids, _) = state.s1.bind(&mut tape, true);
    let (policy_ids, _) = state.ac.policy.bind(&mut tape, true);
    let mut model = FilterState::initial(&mut tape, &state.s1);
    let mut rng = stream(seed, "eval-noise", episode);
    let mut total = 0.0;
    for t in 0..config.max_episode_length {
        model.advance(&mut tape, &ids, &obs, false, &mut rng);
        let action: Vec<f64> = match config.planner {
            Planner::Ac => {
                policy_action(&mut tape, &policy_ids, &model, false, config, &mut rng).to_vec()
            }
            Planner::Mpc => {
                let start = model.state(&tape);
                let plan_cfg = PlanConfig::from_config(config);
                let plan = plan_grad_mpc(
                    &WorldPlanModel { world: &state.s1, start },
                    &plan_cfg,
                    &mut stream(seed, "eval-plan", episode * 1_000_000 + t as u64),
                )?;
                plan.actions.row(0).to_vec()
            }
        };
        let result = env.step(&action)?;
        total += result.reward;
        obs = result.observation;
        model.last_action = action;
        if result.terminal {
            break;
        }
    }
    Ok(total)
}

/// Mean/std return of a uniform-random policy, the baseline for
/// improvement ratios.
pub fn random_baseline(config: &RunConfig, episodes: usize) -> Result<(f64, f64)> {
    let mut returns = Vec::with_capacity(episodes);
    for e in 0..episodes {
        let mut env = Env::make(&config.env, config.seed)?;
        let mut rng = stream(config.seed, "random-eval", e as u64);
        env.reset(derive_u64(config.seed, "eval", e as u64));
        let mut total = 0.0;
        for _ in 0..config.max_episode_length {
            let action: Vec<f64> = (0..env.spec().action_dim)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let r = env.step(&action)?;
            total += r.reward;
            if r.terminal {
                break;
            }
        }
        returns.push(total);
    }
    let mean = returns.iter().sum::<f64>() / episodes as f64;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / episodes as f64;
    Ok((mean, var.sqrt()))
}

/// Imagined-trajectory latents from `episodes` posterior start states:
/// filter the real environment for a short warmup, then roll the prior
/// under the evaluation policy for `horizon` steps.
pub fn imagine_batch(
    state: &TrainState,
    episodes: usize,
    horizon: usize,
    tag: &str,
) -> Result<(Vec<Mat>, Vec<Mat>)> {
    let config = &state.config;
    let seed = config.seed;
    let dims = state.s1.dims;

    let mut start_h = Mat::zeros((episodes, dims.belief));
    let mut start_z = Mat::zeros((episodes, dims.state));
    for e in 0..episodes {
        let mut env = Env::make(&config.env, seed)?;
        let mut obs = env.reset(derive_u64(seed, tag, e as u64));
        let mut tape = Tape::new();
        let (ids, _) = state.s1.bind(&mut tape, true);
        let (policy_ids, _) = state.ac.policy.bind(&mut tape, true);
        let mut model = FilterState::initial(&mut tape, &state.s1);
        let mut rng = stream(seed, "warmup", e as u64);
        for _ in 0..CONSISTENCY_WARMUP {
            model.advance(&mut tape, &ids, &obs, false, &mut rng);
            let action = policy_action(&mut tape, &policy_ids, &model, false, config, &mut rng);
            let r = env.step(action.as_slice().unwrap())?;
            obs = r.observation;
            model.last_action = action.to_vec();
        }
        let s = model.state(&tape);
        start_h.row_mut(e).assign(&s.h);
        start_z.row_mut(e).assign(&s.z);
    }

    // Batched imagination under the mode policy.
    let mut tape = Tape::new();
    let (ids, _) = state.s1.bind(&mut tape, true);
    let (policy_ids, _) = state.ac.policy.bind(&mut tape, true);
    let h0 = tape.leaf(start_h);
    let z0 = tape.leaf(start_z);
    let mut policy_fn =
        |t: &mut Tape, s: crate::tape::NodeId| policy_ids.mode(t, s);
    let imagined = imagine(
        &mut tape,
        &ids,
        h0,
        z0,
        &mut policy_fn,
        horizon,
        &mut stream(seed, "imagine-eval", horizon as u64),
    );

    let mut latents = Vec::with_capacity(horizon + 1);
    for k in 0..=horizon {
        let mut s = Mat::zeros((episodes, dims.latent()));
        s.slice_mut(ndarray::s![.., ..dims.belief]).assign(tape.value(imagined.h[k]));
        s.slice_mut(ndarray::s![.., dims.belief..]).assign(tape.value(imagined.z[k]));
        latents.push(s);
    }
    let actions: Vec<Mat> = imagined.actions.iter().map(|&a| tape.value(a).clone()).collect();
    Ok((latents, actions))
}

/// Consistency of imagined trajectories at each horizon, scored by the
/// checkpoint's logic engine at reasoning depth `alpha`.
pub fn consistency_table(
    state: &TrainState,
    horizons: &[usize],
    alpha: usize,
    episodes: usize,
) -> Result<Vec<ConsistencyReport>> {
    let mut out = Vec::with_capacity(horizons.len());
    for &h in horizons {
        let (latents, actions) = imagine_batch(state, episodes, h, "consistency")?;
        out.push(logical_consistency(&state.logic, &latents, &actions, alpha, h)?);
    }
    Ok(out)
}

/// Reports serialized as `env,horizon,depth,mean,std,episodes` rows.
pub fn consistency_csv(env: &str, reports: &[ConsistencyReport]) -> String {
    let mut out = String::from("env,horizon,depth,mean,std,episodes\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            env, r.horizon, r.depth, r.mean, r.std, r.episodes
        ));
    }
    out
}

/// Pairwise logic-strength heatmap over one imagined trajectory of length
/// `alpha`, as an `alpha x alpha` matrix.
pub fn heatmap(state: &TrainState, alpha: usize) -> Result<Mat> {
    let (latents, actions) = imagine_batch(state, 1, alpha, "heatmap")?;
    let states: Vec<Array1<f64>> = latents.iter().map(|m| m.row(0).to_owned()).collect();
    let acts: Vec<Array1<f64>> = actions.iter().map(|m| m.row(0).to_owned()).collect();
    crate::reasoning::logic_heatmap(&state.logic, &states, &acts)
}

/// CSV rendering of a heatmap matrix.
pub fn heatmap_csv(m: &Mat) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Apply exploration-free filtering to produce an action, for external
/// callers that drive an environment themselves.
pub fn policy_step(
    state: &TrainState,
    model_state: &ModelState,
    explore: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Array1<f64>> {
    act(
        &state.ac.policy,
        model_state,
        explore,
        state.config.exploration_noise,
        rng,
    )
}
