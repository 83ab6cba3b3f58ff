//! Python bindings. Solver reports come back as plain dicts.

use pyo3::create_exception;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crowdprice_core::analysis;
use crowdprice_core::bonus::{self, PopulationSpec};
use crowdprice_core::cp::{self, CpOptions};
use crowdprice_core::pp::{self, BaseChoice, GkpInstance};
use crowdprice_core::scenario::{self, Scenario};
use crowdprice_core::utility::UtilitySpec;
use crowdprice_core::{suite, worker, Error, Offer, UtilityFunction, WorkerProfile};

create_exception!(
    crowdprice,
    SizeLimitError,
    PyValueError,
    "Instance too large for an exact method."
);
create_exception!(
    crowdprice,
    InvariantError,
    PyRuntimeError,
    "Internal consistency check failed."
);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Size { .. } => SizeLimitError::new_err(e.to_string()),
        Error::InvariantBreach(_) => InvariantError::new_err(e.to_string()),
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Parses a lowercase enum name through its serde form.
fn parse_name<T: DeserializeOwned>(what: &str, name: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(name.to_owned()))
        .map_err(|_| PyValueError::new_err(format!("unknown {what} {name:?}")))
}

fn build_utility(spec: &str) -> PyResult<UtilityFunction> {
    UtilitySpec::parse(spec).and_then(|s| s.build(None)).map_err(py_err)
}

/// A worker with quality `r` and opportunity cost `c`.
#[pyclass(name = "Worker", module = "crowdprice", from_py_object)]
#[derive(Clone)]
struct PyWorker {
    inner: WorkerProfile,
}

#[pymethods]
impl PyWorker {
    #[new]
    fn new(id: u64, quality: f64, cost: f64) -> PyResult<Self> {
        let inner = WorkerProfile::new(id, quality, cost);
        inner.validate(false).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn id(&self) -> u64 {
        self.inner.id
    }

    #[getter]
    fn quality(&self) -> f64 {
        self.inner.quality
    }

    #[getter]
    fn cost(&self) -> f64 {
        self.inner.cost
    }

    fn bang_per_buck(&self) -> f64 {
        self.inner.bang_per_buck()
    }

    /// Whether the worker takes `(base, bonus)`.
    fn decide(&self, base: f64, bonus: f64) -> bool {
        worker::decide(&self.inner, &Offer::new(base, bonus))
    }

    fn __repr__(&self) -> String {
        format!(
            "Worker(id={}, quality={}, cost={})",
            self.inner.id, self.inner.quality, self.inner.cost
        )
    }
}

fn profiles(workers: Vec<PyWorker>) -> Vec<WorkerProfile> {
    workers.into_iter().map(|w| w.inner).collect()
}

/// Workers from `(quality, cost)` pairs, ids from 1.
#[pyfunction]
fn workers(pairs: Vec<(f64, f64)>) -> PyResult<Vec<PyWorker>> {
    pairs
        .into_iter()
        .enumerate()
        .map(|(i, (r, c))| PyWorker::new(i as u64 + 1, r, c))
        .collect()
}

#[pyfunction]
#[pyo3(name = "bm")]
fn py_bm(s: f64, total: u32, m: u32) -> PyResult<f64> {
    bonus::bm(s, total, m).map_err(py_err)
}

#[pyfunction]
#[pyo3(name = "invert_bm")]
fn py_invert_bm(r: f64, total: u32, m: u32) -> PyResult<f64> {
    bonus::invert_bm(r, total, m).map_err(py_err)
}

/// Utility of a quality vector under `utility`.
#[pyfunction]
fn evaluate_utility(utility: &str, y: Vec<f64>) -> PyResult<f64> {
    build_utility(utility)?.evaluate(&y).map_err(py_err)
}

/// `(accepted, spent)` under a common offer.
#[pyfunction]
fn accepted_set(workers: Vec<PyWorker>, base: f64, bonus: f64) -> (Vec<bool>, f64) {
    cp::accepted_set(&profiles(workers), &Offer::new(base, bonus))
}

/// Regime label of the empirical cost-quality curve.
#[pyfunction]
fn classify_profile(workers: Vec<PyWorker>) -> PyResult<String> {
    worker::classify_profile(&profiles(workers), cp::REGIME_SAMPLES)
        .map(|r| r.to_string())
        .map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (workers, budget, utility = "additive", mode = "greedy", base = "cost"))]
fn solve_pp<'py>(
    py: Python<'py>,
    workers: Vec<PyWorker>,
    budget: f64,
    utility: &str,
    mode: &str,
    base: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let inst = GkpInstance::new(profiles(workers), budget, build_utility(utility)?).map_err(py_err)?;
    let base = match base {
        "cost" => BaseChoice::Cost,
        "zero" => BaseChoice::Zero,
        other => return Err(PyValueError::new_err(format!("unknown base {other:?}"))),
    };
    let rep = pp::solve_pp(&inst, parse_name("mode", mode)?, &base).map_err(py_err)?;
    to_py(py, &rep)
}

#[pyfunction]
#[pyo3(signature = (workers, budget, utility = "additive", regime = "auto", search = "linear", oracle_check = false))]
fn solve_cp<'py>(
    py: Python<'py>,
    workers: Vec<PyWorker>,
    budget: f64,
    utility: &str,
    regime: &str,
    search: &str,
    oracle_check: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = CpOptions {
        regime: parse_name("regime", regime)?,
        search: parse_name("search mode", search)?,
        oracle_check,
    };
    let u = build_utility(utility)?;
    let (regime, rep) = cp::solve_cp(&profiles(workers), budget, &u, &opts).map_err(py_err)?;
    let out = to_py(py, &rep)?;
    out.set_item("regime", regime.to_string())?;
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (workers, budget, utility = "additive"))]
fn cp_no_bonus<'py>(
    py: Python<'py>,
    workers: Vec<PyWorker>,
    budget: f64,
    utility: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let rep = cp::cp_no_bonus(&profiles(workers), budget, &build_utility(utility)?).map_err(py_err)?;
    to_py(py, &rep)
}

#[pyfunction]
#[pyo3(signature = (workers, budget, utility = "additive"))]
fn cp_exact_oracle<'py>(
    py: Python<'py>,
    workers: Vec<PyWorker>,
    budget: f64,
    utility: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let rep = cp::cp_exact_oracle(&profiles(workers), budget, &build_utility(utility)?).map_err(py_err)?;
    to_py(py, &rep)
}

#[pyfunction]
#[pyo3(signature = (n, c = 1.0, eps = 0.1))]
fn pob_ratio<'py>(py: Python<'py>, n: usize, c: f64, eps: f64) -> PyResult<Bound<'py, PyAny>> {
    let inst = analysis::build_pob_instance_relaxed(n, c, eps).map_err(py_err)?;
    to_py(py, &analysis::pob_ratio(&inst, None).map_err(py_err)?)
}

#[pyfunction]
fn poa_constants<'py>(py: Python<'py>, workers: Vec<PyWorker>, budget: f64) -> PyResult<Bound<'py, PyAny>> {
    to_py(
        py,
        &analysis::poa_constants(&profiles(workers), budget).map_err(py_err)?,
    )
}

#[pyfunction]
#[pyo3(signature = (workers, budget, utility = "additive"))]
fn poa_audit<'py>(py: Python<'py>, workers: Vec<PyWorker>, budget: f64, utility: &str) -> PyResult<Bound<'py, PyAny>> {
    let audit = analysis::poa_audit(&profiles(workers), budget, &build_utility(utility)?).map_err(py_err)?;
    to_py(py, &audit)
}

/// `(id, ability, cost)` triples from the seeded generator.
#[pyfunction]
fn generate_population(n: usize, seed: u64) -> PyResult<Vec<(u64, f64, f64)>> {
    let pop = bonus::generate_population(&PopulationSpec::new(n, seed)).map_err(py_err)?;
    Ok(pop.workers.iter().map(|w| (w.id, w.ability, w.cost)).collect())
}

/// Runs a scenario given as a JSON string, or the reference sweep.
#[pyfunction]
#[pyo3(signature = (config = None, seed = 1))]
fn run_scenario<'py>(py: Python<'py>, config: Option<&str>, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let s: Scenario = match config {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => Scenario::reference(seed),
    };
    let result = py.detach(|| scenario::run_scenario(&s)).map_err(py_err)?;
    to_py(py, &result)
}

/// Runs one built-in check by name or number; returns a dict.
#[pyfunction]
#[pyo3(signature = (check, seed = 1))]
fn run_check<'py>(py: Python<'py>, check: &str, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let id = suite::find_check(check).ok_or_else(|| PyValueError::new_err(format!("unknown check {check:?}")))?;
    let out = py.detach(|| suite::run_check(id, seed)).expect("id from find_check");
    to_py(py, &out)
}

#[pymodule]
fn crowdprice(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", crowdprice_core::VERSION)?;
    m.add("SizeLimitError", m.py().get_type::<SizeLimitError>())?;
    m.add("InvariantError", m.py().get_type::<InvariantError>())?;
    m.add_class::<PyWorker>()?;
    m.add_function(wrap_pyfunction!(workers, m)?)?;
    m.add_function(wrap_pyfunction!(py_bm, m)?)?;
    m.add_function(wrap_pyfunction!(py_invert_bm, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_utility, m)?)?;
    m.add_function(wrap_pyfunction!(accepted_set, m)?)?;
    m.add_function(wrap_pyfunction!(classify_profile, m)?)?;
    m.add_function(wrap_pyfunction!(solve_pp, m)?)?;
    m.add_function(wrap_pyfunction!(solve_cp, m)?)?;
    m.add_function(wrap_pyfunction!(cp_no_bonus, m)?)?;
    m.add_function(wrap_pyfunction!(cp_exact_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(pob_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(poa_constants, m)?)?;
    m.add_function(wrap_pyfunction!(poa_audit, m)?)?;
    m.add_function(wrap_pyfunction!(generate_population, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run_check, m)?)?;
    Ok(())
}
