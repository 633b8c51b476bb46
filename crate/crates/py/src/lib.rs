//! Python bindings: environments, configs, training, evaluation, the logic
//! gates, and the consistency/heatmap reports.

use std::path::PathBuf;

use ndarray::Array1;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use lucid::config::RunConfig;
use lucid::logic::{self, LogicVector};
use lucid::planner::lambda_returns;
use lucid::{checkpoint, env, harness};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Environment handle.
#[pyclass(name = "Env")]
struct PyEnv {
    inner: env::Env,
}

#[pymethods]
impl PyEnv {
    #[new]
    fn new(name: &str, seed: u64) -> PyResult<Self> {
        Ok(PyEnv { inner: env::Env::make(name, seed).map_err(err)? })
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.inner.reset(seed)
    }

    fn step(&mut self, action: Vec<f64>) -> PyResult<(Vec<f64>, f64, bool)> {
        let r = self.inner.step(&action).map_err(err)?;
        Ok((r.observation, r.reward, r.terminal))
    }

    #[getter]
    fn spec(&self) -> PyResult<String> {
        serde_json::to_string(self.inner.spec()).map_err(err)
    }

    #[getter]
    fn action_repeat(&self) -> usize {
        self.inner.spec().action_repeat
    }

    #[getter]
    fn obs_dim(&self) -> usize {
        self.inner.spec().obs_dim
    }

    #[getter]
    fn action_dim(&self) -> usize {
        self.inner.spec().action_dim
    }
}

/// Run configuration.
#[pyclass(name = "Config", skip_from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    /// Paper-table defaults.
    #[staticmethod]
    fn default() -> PyConfig {
        PyConfig { inner: RunConfig::default() }
    }

    /// Scaled-down desk profile.
    #[staticmethod]
    fn desk() -> PyConfig {
        PyConfig { inner: RunConfig::desk() }
    }

    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.inner.set(key, value).map_err(err)
    }

    fn get_text(&self) -> String {
        self.inner.to_flat_text()
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(err)
    }
}

/// Frozen logic engine for gate-level experimentation.
#[pyclass(name = "LogicEngine")]
struct PyLogicEngine {
    params: logic::LogicParams,
}

#[pymethods]
impl PyLogicEngine {
    /// Fresh randomly initialized engine over `latent`-dim states.
    #[new]
    fn new(d: usize, latent: usize, action: usize, seed: u64) -> Self {
        let cfg = logic::LogicConfig { d, latent, action, mlp_layers: 3, kappa: 10.0 };
        let params = logic::LogicParams::new(&mut lucid::rng::stream(seed, "py-logic", 0), cfg);
        PyLogicEngine { params }
    }

    fn embed_state(&self, latent: Vec<f64>) -> PyResult<Vec<f64>> {
        let v = logic::embed_state(&self.params, &Array1::from_vec(latent)).map_err(err)?;
        Ok(v.0.to_vec())
    }

    fn embed_action(&self, latent: Vec<f64>, action: Vec<f64>) -> PyResult<Vec<f64>> {
        let v = logic::embed_action(
            &self.params,
            &Array1::from_vec(latent),
            &Array1::from_vec(action),
        )
        .map_err(err)?;
        Ok(v.0.to_vec())
    }

    fn gate_and(&self, v: Vec<f64>, m: Vec<f64>) -> PyResult<Vec<f64>> {
        let out = logic::gate_and(&self.params, &lv(v), &lv(m)).map_err(err)?;
        Ok(out.0.to_vec())
    }

    fn gate_or(&self, v: Vec<f64>, m: Vec<f64>) -> PyResult<Vec<f64>> {
        let out = logic::gate_or(&self.params, &lv(v), &lv(m)).map_err(err)?;
        Ok(out.0.to_vec())
    }

    fn gate_not(&self, v: Vec<f64>) -> PyResult<Vec<f64>> {
        let out = logic::gate_not(&self.params, &lv(v)).map_err(err)?;
        Ok(out.0.to_vec())
    }

    fn gate_imply(&self, v: Vec<f64>, m: Vec<f64>) -> PyResult<Vec<f64>> {
        let out = logic::gate_imply(&self.params, &lv(v), &lv(m)).map_err(err)?;
        Ok(out.0.to_vec())
    }

    fn sim(&self, v: Vec<f64>, m: Vec<f64>) -> PyResult<f64> {
        logic::sim(&lv(v), &lv(m), self.params.cfg.kappa).map_err(err)
    }

    /// `(T, F)` anchors.
    fn anchors(&self) -> (Vec<f64>, Vec<f64>) {
        let (t, f) = logic::anchors(&self.params);
        (t.0.to_vec(), f.0.to_vec())
    }

    /// Mean regularizer residual and the 14 per-rule values over a sample
    /// of row vectors.
    fn regularizer(&self, rows: Vec<Vec<f64>>) -> PyResult<(f64, Vec<f64>)> {
        let d = self.params.cfg.d;
        let mut mat = ndarray::Array2::zeros((rows.len(), d));
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(PyValueError::new_err(format!(
                    "row {i} has {} entries, expected {d}",
                    r.len()
                )));
            }
            for (j, &x) in r.iter().enumerate() {
                mat[(i, j)] = x;
            }
        }
        let (total, rules) = logic::regularizer_loss(&self.params, &mat).map_err(err)?;
        Ok((total, rules.to_vec()))
    }
}

fn lv(v: Vec<f64>) -> LogicVector {
    LogicVector(Array1::from_vec(v))
}

/// Train with the given config; returns (checkpoint, replay, metrics) paths.
#[pyfunction]
fn train(config: &PyConfig, out_dir: &str) -> PyResult<(String, String, String)> {
    let out = harness::train(&config.inner, &PathBuf::from(out_dir), None)
        .map_err(|e| PyIOError::new_err(e.to_string()))?;
    Ok((
        out.checkpoint_path.display().to_string(),
        out.replay_path.display().to_string(),
        out.metrics_path.display().to_string(),
    ))
}

/// Deterministic evaluation of a checkpoint: (mean, std, per-episode).
#[pyfunction]
fn evaluate(checkpoint_path: &str, episodes: usize) -> PyResult<(f64, f64, Vec<f64>)> {
    let state = checkpoint::load(&PathBuf::from(checkpoint_path)).map_err(err)?;
    harness::evaluate(&state, episodes).map_err(err)
}

/// Mean/std return of the uniform-random policy under a config.
#[pyfunction]
fn random_baseline(config: &PyConfig, episodes: usize) -> PyResult<(f64, f64)> {
    harness::random_baseline(&config.inner, episodes).map_err(err)
}

/// Consistency rows (horizon, depth, mean, std, episodes) for a checkpoint.
#[pyfunction]
fn consistency(
    checkpoint_path: &str,
    horizons: Vec<usize>,
    depth: usize,
    episodes: usize,
) -> PyResult<Vec<(usize, usize, f64, f64, usize)>> {
    let state = checkpoint::load(&PathBuf::from(checkpoint_path)).map_err(err)?;
    let reports = harness::consistency_table(&state, &horizons, depth, episodes).map_err(err)?;
    Ok(reports
        .into_iter()
        .map(|r| (r.horizon, r.depth, r.mean, r.std, r.episodes))
        .collect())
}

/// Pairwise logic-strength heatmap for a checkpoint, as nested lists.
#[pyfunction]
fn heatmap(checkpoint_path: &str, depth: usize) -> PyResult<Vec<Vec<f64>>> {
    let state = checkpoint::load(&PathBuf::from(checkpoint_path)).map_err(err)?;
    let m = harness::heatmap(&state, depth).map_err(err)?;
    Ok((0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect())
}

/// Lambda returns by backward recursion.
#[pyfunction(name = "lambda_returns")]
fn lambda_returns_py(
    rewards: Vec<f64>,
    values: Vec<f64>,
    gamma: f64,
    lambda: f64,
) -> PyResult<Vec<f64>> {
    lambda_returns(&rewards, &values, gamma, lambda).map_err(err)
}

/// Built-in environment specs as a JSON string.
#[pyfunction]
fn env_specs() -> PyResult<String> {
    serde_json::to_string_pretty(&env::all_specs()).map_err(err)
}

#[pymodule]
fn lucid_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEnv>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyLogicEngine>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(random_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(consistency, m)?)?;
    m.add_function(wrap_pyfunction!(heatmap, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_returns_py, m)?)?;
    m.add_function(wrap_pyfunction!(env_specs, m)?)?;
    Ok(())
}
