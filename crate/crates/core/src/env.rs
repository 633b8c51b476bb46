//! Built-in analytic continuous-control environments.
//!
//! Three classic plants with textbook dynamics integrated by semi-implicit
//! Euler, vector observations (angles as sin/cos pairs plus velocities) and
//! per-substep rewards shaped into [0, 1]. A decision step applies the
//! clipped action for `action_repeat` physics substeps and sums the substep
//! rewards, so every decision-step reward lies in [0, action_repeat].
//! Episodes end on the step limit only; there is no failure termination.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const GRAVITY: f64 = 9.81;
/// Seconds per physics substep.
pub const DT: f64 = 0.01;
/// Decision steps per episode.
pub const MAX_EPISODE_STEPS: usize = 500;

pub const ENV_NAMES: [&str; 3] = ["pendulum-swingup", "cartpole-balance", "cartpole-swingup"];

/// Static description of an environment.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EnvSpec {
    pub name: String,
    pub obs_dim: usize,
    pub action_dim: usize,
    /// Inner physics substeps per decision step.
    pub action_repeat: usize,
    /// Decision steps before the episode terminates.
    pub max_episode_steps: usize,
    /// Seconds per physics substep.
    pub dt: f64,
}

/// Result of one decision step.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub observation: Vec<f64>,
    /// Sum of substep rewards, each in [0, 1].
    pub reward: f64,
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Pendulum,
    CartpoleBalance,
    CartpoleSwingup,
}

/// Environment handle. Single-threaded; distinct handles share no state.
#[derive(Debug, Clone)]
pub struct Env {
    kind: Kind,
    spec: EnvSpec,
    /// Pendulum: [theta, theta_dot]. Cartpole: [x, x_dot, theta, theta_dot].
    state: [f64; 4],
    steps: usize,
    done: bool,
    init_noise: f64,
    episode_rng: ChaCha8Rng,
}

// Pendulum constants: mass, length, torque limit (u in [-1,1] scales to this).
const PEND_MASS: f64 = 1.0;
const PEND_LEN: f64 = 1.0;
const PEND_TORQUE_MAX: f64 = 3.0;

// Cartpole constants (pole angle measured from upright).
const CART_MASS: f64 = 1.0;
const POLE_MASS: f64 = 0.1;
const POLE_HALF_LEN: f64 = 0.5;
const CART_FORCE_MAX: f64 = 10.0;
const CART_X_LIMIT: f64 = 2.4;

impl Env {
    /// Create an environment by name. The seed fixes the first episode's
    /// initial state; identical seeds with identical actions reproduce the
    /// episode bit for bit.
    pub fn make(name: &str, seed: u64) -> Result<Env> {
        let kind = match name {
            "pendulum-swingup" => Kind::Pendulum,
            "cartpole-balance" => Kind::CartpoleBalance,
            "cartpole-swingup" => Kind::CartpoleSwingup,
            _ => {
                return Err(Error::UnknownEnv {
                    name: name.to_string(),
                    valid: ENV_NAMES.join(", "),
                })
            }
        };
        let spec = match kind {
            Kind::Pendulum => EnvSpec {
                name: name.to_string(),
                obs_dim: 3,
                action_dim: 1,
                action_repeat: 6,
                max_episode_steps: MAX_EPISODE_STEPS,
                dt: DT,
            },
            Kind::CartpoleBalance | Kind::CartpoleSwingup => EnvSpec {
                name: name.to_string(),
                obs_dim: 5,
                action_dim: 1,
                action_repeat: 8,
                max_episode_steps: MAX_EPISODE_STEPS,
                dt: DT,
            },
        };
        let mut env = Env {
            kind,
            spec,
            state: [0.0; 4],
            steps: 0,
            done: false,
            init_noise: 0.05,
            episode_rng: rng::stream(seed, "env-episode", 0),
        };
        env.reset(seed);
        Ok(env)
    }

    /// Override the width of the uniform initial-state noise. Zero gives the
    /// exact documented initial point (pendulum: hanging down at rest).
    pub fn with_init_noise(mut self, noise: f64) -> Env {
        self.init_noise = noise;
        self
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    /// Start a fresh episode drawn from the documented initial distribution.
    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.episode_rng = rng::stream(seed, "env-episode", 0);
        self.steps = 0;
        self.done = false;
        let n = self.init_noise;
        let draw = |rng: &mut ChaCha8Rng| if n > 0.0 { rng.random_range(-n..n) } else { 0.0 };
        match self.kind {
            Kind::Pendulum => {
                // Hanging down at rest.
                self.state = [
                    std::f64::consts::PI + draw(&mut self.episode_rng),
                    draw(&mut self.episode_rng),
                    0.0,
                    0.0,
                ];
            }
            Kind::CartpoleBalance => {
                self.state = [
                    draw(&mut self.episode_rng),
                    draw(&mut self.episode_rng),
                    draw(&mut self.episode_rng),
                    draw(&mut self.episode_rng),
                ];
            }
            Kind::CartpoleSwingup => {
                self.state = [
                    draw(&mut self.episode_rng),
                    draw(&mut self.episode_rng),
                    std::f64::consts::PI + draw(&mut self.episode_rng),
                    draw(&mut self.episode_rng),
                ];
            }
        }
        self.observation()
    }

    pub fn observation(&self) -> Vec<f64> {
        match self.kind {
            Kind::Pendulum => {
                let [theta, theta_dot, _, _] = self.state;
                vec![theta.cos(), theta.sin(), theta_dot]
            }
            Kind::CartpoleBalance | Kind::CartpoleSwingup => {
                let [x, x_dot, theta, theta_dot] = self.state;
                vec![x, x_dot, theta.cos(), theta.sin(), theta_dot]
            }
        }
    }

    /// Apply the action for `action_repeat` substeps.
    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if action.len() != self.spec.action_dim {
            return Err(Error::InvalidInput(format!(
                "action has {} components, expected {}",
                action.len(),
                self.spec.action_dim
            )));
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("environment action".into()));
        }
        if self.done {
            return Err(Error::InvalidInput(
                "episode finished; call reset before stepping again".into(),
            ));
        }
        let u = action[0].clamp(-1.0, 1.0);
        let mut reward = 0.0;
        for _ in 0..self.spec.action_repeat {
            reward += self.substep(u);
        }
        self.steps += 1;
        self.done = self.steps >= self.spec.max_episode_steps;
        Ok(StepResult { observation: self.observation(), reward, terminal: self.done })
    }

    /// One semi-implicit Euler substep; returns that substep's reward.
    fn substep(&mut self, u: f64) -> f64 {
        match self.kind {
            Kind::Pendulum => {
                let torque = u * PEND_TORQUE_MAX;
                let (theta, theta_dot) =
                    pendulum_substep(self.state[0], self.state[1], torque, DT);
                self.state[0] = theta;
                self.state[1] = theta_dot;
                (theta.cos() + 1.0) / 2.0
            }
            Kind::CartpoleBalance | Kind::CartpoleSwingup => {
                let force = u * CART_FORCE_MAX;
                let [x, x_dot, theta, theta_dot] = self.state;
                let sin = theta.sin();
                let cos = theta.cos();
                let total_mass = CART_MASS + POLE_MASS;
                let temp =
                    (force + POLE_MASS * POLE_HALF_LEN * theta_dot * theta_dot * sin) / total_mass;
                let theta_acc = (GRAVITY * sin - cos * temp)
                    / (POLE_HALF_LEN * (4.0 / 3.0 - POLE_MASS * cos * cos / total_mass));
                let x_acc = temp - POLE_MASS * POLE_HALF_LEN * theta_acc * cos / total_mass;

                let new_theta_dot = theta_dot + DT * theta_acc;
                let new_x_dot = x_dot + DT * x_acc;
                let new_theta = theta + DT * new_theta_dot;
                let mut new_x = x + DT * new_x_dot;
                let mut new_x_dot = new_x_dot;
                if new_x.abs() > CART_X_LIMIT {
                    new_x = new_x.clamp(-CART_X_LIMIT, CART_X_LIMIT);
                    new_x_dot = 0.0;
                }
                self.state = [new_x, new_x_dot, new_theta, new_theta_dot];
                let upright = (new_theta.cos() + 1.0) / 2.0;
                let centered = (1.0 - (new_x / CART_X_LIMIT).powi(2)).max(0.0);
                upright * centered
            }
        }
    }

    /// Raw internal state, exposed for physics tests.
    pub fn raw_state(&self) -> [f64; 4] {
        self.state
    }

    pub fn set_raw_state(&mut self, state: [f64; 4]) {
        self.state = state;
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }
}

/// One pendulum substep with the angle measured from upright, so gravity
/// destabilizes `theta = 0`: `ml^2 theta_dd = mgl sin(theta) + torque`,
/// integrated semi-implicitly (velocity first, then position).
pub fn pendulum_substep(theta: f64, theta_dot: f64, torque: f64, dt: f64) -> (f64, f64) {
    let acc = (GRAVITY / PEND_LEN) * theta.sin() + torque / (PEND_MASS * PEND_LEN * PEND_LEN);
    let new_theta_dot = theta_dot + dt * acc;
    let new_theta = theta + dt * new_theta_dot;
    (new_theta, new_theta_dot)
}

/// Mechanical energy of the pendulum (zero hanging at rest, `2 m g l` at
/// the upright unstable point).
pub fn pendulum_energy(theta: f64, theta_dot: f64) -> f64 {
    0.5 * PEND_MASS * PEND_LEN * PEND_LEN * theta_dot * theta_dot
        + PEND_MASS * GRAVITY * PEND_LEN * (1.0 + theta.cos())
}

/// Specs of every built-in environment, for the `envs` CLI subcommand.
pub fn all_specs() -> Vec<EnvSpec> {
    ENV_NAMES
        .iter()
        .map(|n| Env::make(n, 0).expect("built-in env").spec().clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specs_match_the_documented_action_repeats() {
        let e = Env::make("pendulum-swingup", 0).unwrap();
        assert_eq!(e.spec().action_repeat, 6);
        assert_eq!(e.spec().action_dim, 1);
        assert_eq!(e.spec().obs_dim, 3);
        let e = Env::make("cartpole-swingup", 0).unwrap();
        assert_eq!(e.spec().action_repeat, 8);
        let e = Env::make("cartpole-balance", 0).unwrap();
        assert_eq!(e.spec().action_repeat, 8);
        assert_eq!(e.spec().max_episode_steps, 500);
    }

    #[test]
    fn unknown_name_lists_valid_choices() {
        let err = Env::make("walker-walk", 0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("walker-walk"));
        assert!(msg.contains("pendulum-swingup"));
        assert!(msg.contains("cartpole-balance"));
        assert!(msg.contains("cartpole-swingup"));
    }

    #[test]
    fn zero_variance_reset_hangs_down_at_rest() {
        let mut e = Env::make("pendulum-swingup", 3).unwrap().with_init_noise(0.0);
        let obs = e.reset(3);
        let [theta, theta_dot, _, _] = e.raw_state();
        assert_eq!(theta, std::f64::consts::PI);
        assert_eq!(theta_dot, 0.0);
        assert!((obs[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_seeds_give_identical_episodes() {
        let mut a = Env::make("cartpole-swingup", 9).unwrap();
        let mut b = Env::make("cartpole-swingup", 9).unwrap();
        let oa = a.reset(42);
        let ob = b.reset(42);
        assert_eq!(oa, ob);
        for i in 0..50 {
            let act = [((i as f64) * 0.37).sin()];
            let ra = a.step(&act).unwrap();
            let rb = b.step(&act).unwrap();
            assert_eq!(ra.observation, rb.observation);
            assert_eq!(ra.reward, rb.reward);
        }
    }

    #[test]
    fn reset_after_terminal_starts_fresh() {
        let mut e = Env::make("pendulum-swingup", 1).unwrap();
        e.reset(5);
        for _ in 0..e.spec().max_episode_steps {
            let r = e.step(&[0.1]).unwrap();
            if r.terminal {
                break;
            }
        }
        assert_eq!(e.steps_taken(), 500);
        assert!(e.step(&[0.0]).is_err());
        e.reset(6);
        assert_eq!(e.steps_taken(), 0);
        assert!(e.step(&[0.0]).is_ok());
    }

    #[test]
    fn upright_rest_yields_full_reward_and_hanging_zero() {
        let mut e = Env::make("pendulum-swingup", 0).unwrap().with_init_noise(0.0);
        e.reset(0);
        e.set_raw_state([0.0, 0.0, 0.0, 0.0]);
        let r = e.step(&[0.0]).unwrap();
        assert!((r.reward - 6.0).abs() < 1e-12, "got {}", r.reward);

        e.reset(0);
        // Hanging at rest: sin(pi) = 0 exactly is an equilibrium of the
        // integrator, so reward stays at cos(pi) level.
        let r = e.step(&[0.0]).unwrap();
        assert!(r.reward.abs() < 1e-9, "got {}", r.reward);
    }

    #[test]
    fn substep_matches_fine_grained_integration_oracle() {
        // Integrate one documented substep against the same dynamics run at
        // dt/100 and compare.
        let cases = [
            (std::f64::consts::PI, 0.0, 1.7),
            (2.1, -0.8, -0.4),
            (0.3, 0.9, 0.9),
        ];
        for (theta0, dot0, u) in cases {
            let torque = u * PEND_TORQUE_MAX;
            let (theta_coarse, dot_coarse) = pendulum_substep(theta0, dot0, torque, DT);
            let mut theta = theta0;
            let mut dot = dot0;
            for _ in 0..100 {
                let (t, d) = pendulum_substep(theta, dot, torque, DT / 100.0);
                theta = t;
                dot = d;
            }
            assert!(
                (theta - theta_coarse).abs() < 1e-3,
                "theta {theta} vs {theta_coarse}"
            );
            assert!((dot - dot_coarse).abs() < 1e-3, "dot {dot} vs {dot_coarse}");
        }
    }

    #[test]
    fn reward_stays_within_decision_step_bounds() {
        for name in ENV_NAMES {
            let mut e = Env::make(name, 7).unwrap();
            e.reset(7);
            let repeat = e.spec().action_repeat as f64;
            for i in 0..200 {
                let r = e.step(&[(i as f64 * 0.13).sin()]).unwrap();
                assert!(r.reward >= 0.0 && r.reward <= repeat, "{name}: {}", r.reward);
                assert!(r.observation.iter().all(|x| x.is_finite()));
            }
        }
    }

    #[test]
    fn pendulum_energy_drift_below_one_percent_over_1000_substeps() {
        // Symplectic integration bounds the energy error to a phase
        // oscillation with no secular trend. Drift is therefore measured on
        // the period-averaged energy: first-100 vs last-100 substep means.
        // (A non-symplectic integrator diverges and fails this by a wide
        // margin.)
        let mut theta = 2.0_f64;
        let mut dot = 0.0_f64;
        let e0 = pendulum_energy(theta, dot);
        let mut energies = Vec::with_capacity(1000);
        for _ in 0..1000 {
            let (t, d) = pendulum_substep(theta, dot, 0.0, DT);
            theta = t;
            dot = d;
            energies.push(pendulum_energy(theta, dot));
        }
        let head: f64 = energies[..100].iter().sum::<f64>() / 100.0;
        let tail: f64 = energies[900..].iter().sum::<f64>() / 100.0;
        let drift = (tail - head).abs();
        assert!(drift / e0 < 0.01, "relative secular drift {}", drift / e0);
        // And the instantaneous oscillation itself stays a small band.
        let band = energies.iter().fold(0.0_f64, |m, e| m.max((e - e0).abs()));
        assert!(band / e0 < 0.02, "energy oscillation band {}", band / e0);
    }

    #[test]
    fn episode_lasts_exactly_max_steps() {
        let mut e = Env::make("cartpole-balance", 2).unwrap();
        e.reset(2);
        let mut terminals = 0;
        for i in 0..500 {
            let r = e.step(&[0.0]).unwrap();
            if r.terminal {
                terminals += 1;
                assert_eq!(i, 499);
            }
        }
        assert_eq!(terminals, 1);
    }

    #[test]
    fn non_finite_action_is_rejected() {
        let mut e = Env::make("pendulum-swingup", 0).unwrap();
        e.reset(0);
        assert!(matches!(e.step(&[f64::NAN]), Err(Error::NonFinite(_))));
    }
}
