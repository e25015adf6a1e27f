//! Python bindings. Laws are built from the same JSON documents the CLI reads;
//! structured results come back as plain Python dicts and lists.

use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyList;
use serde::Serialize;

use smoothlab::brwre::{self, BrwLaw as CoreBrwLaw};
use smoothlab::env_model::{self, MEAN_TOL};
use smoothlab::moments::{self, MomentOptions};
use smoothlab::schema::{BrwLawDoc, LawDoc};
use smoothlab::seed::Label;
use smoothlab::smoothing::{self, FixedPointOptions, DEFAULT_HIGH, DEFAULT_LOW, DEFAULT_POINTS};
use smoothlab::{oracle, spine_walk, EnvSequence, EnvironmentLaw, ExpectationStrategy, LaplaceCurve, UGrid};

create_exception!(smoothlab_py, SmoothlabError, PyException);

fn err(e: smoothlab::Error) -> PyErr {
    SmoothlabError::new_err(format!("{}: {e}", e.kind()))
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn strategy(json: Option<&str>) -> PyResult<ExpectationStrategy> {
    match json {
        None => Ok(ExpectationStrategy::Exact),
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("strategy: {e}"))),
    }
}

fn env(ids: Vec<String>) -> EnvSequence {
    EnvSequence::from_ids(ids)
}

/// Weight environment law.
#[pyclass(frozen, module = "smoothlab_py")]
struct Law {
    inner: EnvironmentLaw,
}

#[pymethods]
impl Law {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let doc = LawDoc::from_json(text).map_err(err)?;
        Ok(Self { inner: doc.to_law().map_err(err)? })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&LawDoc::from_law(&self.inner)).expect("law documents serialize")
    }

    fn state_ids(&self) -> Vec<String> {
        self.inner.states().iter().map(|(_, s)| s.id.clone()).collect()
    }

    #[pyo3(signature = (tolerance = MEAN_TOL))]
    fn validate(&self, py: Python<'_>, tolerance: f64) -> PyResult<Py<PyAny>> {
        to_py(py, &env_model::validate_law(&self.inner, tolerance))
    }

    /// Moment conditions and the fixed-point verdict.
    #[pyo3(signature = (seed = 0, budget = None))]
    fn classify(&self, py: Python<'_>, seed: u64, budget: Option<usize>) -> PyResult<Py<PyAny>> {
        let d = MomentOptions::default();
        let opts = MomentOptions { mc_budget: budget.unwrap_or(d.mc_budget), seed, ..d };
        let verdict = py.detach(|| moments::classify_with(&self.inner, &opts));
        to_py(py, &verdict.record())
    }

    fn sample_env(&self, n: usize, seed: u64) -> Vec<String> {
        env_model::sample_env(&self.inner, n, seed).state_ids
    }

    fn drift(&self) -> PyResult<f64> {
        spine_walk::drift(&self.inner).map_err(err)
    }

    fn tail_sums(&self, py: Python<'_>, c: f64, n_max: usize) -> PyResult<Py<PyAny>> {
        let sums = py.detach(|| spine_walk::tail_sums(&self.inner, c, n_max)).map_err(err)?;
        to_py(py, &sums)
    }

    /// `φₙ` along `env` on a log-spaced grid.
    #[pyo3(signature = (env_ids, low = DEFAULT_LOW, high = DEFAULT_HIGH, points = DEFAULT_POINTS, strategy_json = None))]
    fn iterate(
        &self,
        py: Python<'_>,
        env_ids: Vec<String>,
        low: f64,
        high: f64,
        points: usize,
        strategy_json: Option<&str>,
    ) -> PyResult<Curve> {
        let strat = strategy(strategy_json)?;
        let grid = Arc::new(UGrid::log_spaced(low, high, points).map_err(err)?);
        let seq = env(env_ids);
        let curve = py.detach(|| smoothing::iterate(&self.inner, &seq, &grid, &strat)).map_err(err)?;
        Ok(Curve { inner: curve })
    }

    /// Convergence log `[{n, g_n, mean, clamp_flag}]` of the iterates along `env`.
    #[pyo3(signature = (env_ids, low = DEFAULT_LOW, high = DEFAULT_HIGH, points = DEFAULT_POINTS, strategy_json = None))]
    fn convergence_log(
        &self,
        py: Python<'_>,
        env_ids: Vec<String>,
        low: f64,
        high: f64,
        points: usize,
        strategy_json: Option<&str>,
    ) -> PyResult<Py<PyAny>> {
        let strat = strategy(strategy_json)?;
        let grid = Arc::new(UGrid::log_spaced(low, high, points).map_err(err)?);
        let seq = env(env_ids);
        let opts = FixedPointOptions { n_max: seq.len(), ..FixedPointOptions::default() };
        let run = py.detach(|| smoothing::run_fixed_point(&self.inner, &seq, &grid, &strat, &opts)).map_err(err)?;
        to_py(py, &run.log)
    }

    /// Exact `E e^(−u Wₙ)` by tree enumeration.
    fn exact_transform(&self, py: Python<'_>, env_ids: Vec<String>, u_points: Vec<f64>, n: usize) -> PyResult<Vec<f64>> {
        let seq = env(env_ids);
        let t = py.detach(|| oracle::exact_wn_transform(&self.inner, &seq, &u_points, n)).map_err(err)?;
        Ok(t.values)
    }

    fn __repr__(&self) -> String {
        format!("Law(states={:?})", self.state_ids())
    }
}

/// Laplace transform on a grid, with monotone interpolation in between.
#[pyclass(frozen, module = "smoothlab_py")]
struct Curve {
    inner: LaplaceCurve,
}

#[pymethods]
impl Curve {
    fn eval(&self, u: f64) -> PyResult<f64> {
        self.inner.eval(u).map_err(err)
    }

    fn grid(&self) -> Vec<f64> {
        self.inner.grid().points().to_vec()
    }

    fn phi_values(&self) -> Vec<f64> {
        self.inner.phi_values()
    }

    #[getter]
    fn clamp_flag(&self) -> bool {
        self.inner.clamp_flag()
    }

    fn mean_at_zero(&self) -> f64 {
        smoothing::mean_at_zero(&self.inner)
    }

    fn invariant_violations(&self) -> Vec<String> {
        self.inner.invariant_violations()
    }

    fn __len__(&self) -> usize {
        self.inner.grid().len()
    }
}

/// Branching random walk environment law.
#[pyclass(frozen, module = "smoothlab_py")]
struct BrwLaw {
    inner: CoreBrwLaw,
}

#[pymethods]
impl BrwLaw {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let doc = BrwLawDoc::from_json(text).map_err(err)?;
        Ok(Self { inner: doc.to_law().map_err(err)? })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&BrwLawDoc::from_law(&self.inner)).expect("law documents serialize")
    }

    fn kappa(&self, theta: f64) -> PyResult<f64> {
        brwre::kappa_brw(&self.inner, theta).map_err(err)
    }

    fn verdict(&self, py: Python<'_>, theta: f64) -> PyResult<Py<PyAny>> {
        let v = py.detach(|| brwre::verdict_brw(&self.inner, theta)).map_err(err)?;
        to_py(py, &v)
    }

    /// The weight law `e^(−θz)/m(θ)` induced at `theta`.
    fn induced_law(&self, theta: f64) -> PyResult<Law> {
        let inner = brwre::induce_weight_law(&self.inner, theta, brwre::DEFAULT_DELTA).map_err(err)?;
        Ok(Law { inner })
    }

    fn sample_env(&self, n: usize, seed: u64) -> Vec<String> {
        brwre::sample_brw_env(&self.inner, n, seed).state_ids
    }

    /// One tree: `{w, population, normalizer, env, seed}`.
    #[pyo3(signature = (theta, env_ids, generations, seed, cap = brwre::DEFAULT_CAP))]
    fn simulate(
        &self,
        py: Python<'_>,
        theta: f64,
        env_ids: Vec<String>,
        generations: usize,
        seed: u64,
        cap: usize,
    ) -> PyResult<Py<PyAny>> {
        let seq = env(env_ids);
        let t = py.detach(|| brwre::simulate(&self.inner, theta, &seq, generations, cap, seed)).map_err(err)?;
        to_py(py, &t)
    }

    /// Final `Wₙ` of each replica, `None` where the population cap was hit.
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (theta, env_ids, generations, master_seed, replicas, cap = brwre::DEFAULT_CAP))]
    fn final_w(
        &self,
        py: Python<'_>,
        theta: f64,
        env_ids: Vec<String>,
        generations: usize,
        master_seed: u64,
        replicas: usize,
        cap: usize,
    ) -> PyResult<Vec<Option<f64>>> {
        let seq = env(env_ids);
        let results = py.detach(|| {
            brwre::simulate_replicas(&self.inner, theta, &seq, generations, cap, master_seed, replicas)
        });
        results
            .into_iter()
            .map(|r| match r {
                Ok(t) => Ok(Some(t.final_w())),
                Err(smoothlab::Error::CapExceeded { .. }) => Ok(None),
                Err(e) => Err(err(e)),
            })
            .collect()
    }
}

/// Stream seed for `master` and a path of `str`/`int` labels.
#[pyfunction]
fn derive_seed(master: u64, labels: &Bound<'_, PyList>) -> PyResult<u64> {
    let mut path = Vec::with_capacity(labels.len());
    for item in labels.iter() {
        if let Ok(s) = item.extract::<String>() {
            path.push(Label::Str(s));
        } else if let Ok(v) = item.extract::<u64>() {
            path.push(Label::Int(v));
        } else {
            return Err(PyValueError::new_err("labels must be str or non-negative int"));
        }
    }
    Ok(smoothlab::derive_seed(master, &path))
}

#[pyfunction]
fn log_points(low: f64, high: f64, count: usize) -> Vec<f64> {
    oracle::log_points(low, high, count)
}

#[pymodule]
fn smoothlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Law>()?;
    m.add_class::<Curve>()?;
    m.add_class::<BrwLaw>()?;
    m.add_function(wrap_pyfunction!(derive_seed, m)?)?;
    m.add_function(wrap_pyfunction!(log_points, m)?)?;
    m.add("SmoothlabError", m.py().get_type::<SmoothlabError>())?;
    Ok(())
}
