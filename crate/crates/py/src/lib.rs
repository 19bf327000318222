//! Python bindings: model construction, protocol evaluation, full runs with
//! their ledger, and the equilibrium regime estimate.

use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use qotto::config::RunConfig as CoreConfig;
use qotto::ledger::CycleRecord;
use qotto::model::CrossLead;
use qotto::protocol::RampShape;
use qotto::study::{self, RunSummary};
use qotto::{Error, Lead};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Instability { .. } => PyArithmeticError::new_err(e.to_string()),
        Error::Io(_) | Error::Csv(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_lead(name: &str) -> PyResult<Lead> {
    match name {
        "hot" | "h" => Ok(Lead::Hot),
        "cold" | "c" => Ok(Lead::Cold),
        _ => Err(PyValueError::new_err(format!("lead must be 'hot' or 'cold', got {name:?}"))),
    }
}

fn parse_ramp(name: &str) -> PyResult<RampShape> {
    match name {
        "smoothstep" => Ok(RampShape::Smoothstep),
        "linear" => Ok(RampShape::Linear),
        _ => Err(PyValueError::new_err(format!("unknown ramp {name:?}"))),
    }
}

fn parse_cross_lead(name: &str) -> PyResult<CrossLead> {
    match name {
        "damped" => Ok(CrossLead::Damped),
        "undamped" => Ok(CrossLead::Undamped),
        "dropped" => Ok(CrossLead::Dropped),
        _ => Err(PyValueError::new_err(format!("unknown cross_lead {name:?}"))),
    }
}

/// A discretized wideband lead.
#[pyclass(name = "LeadSpec", from_py_object)]
#[derive(Clone)]
pub struct PyLeadSpec {
    inner: qotto::LeadSpec,
}

#[pymethods]
impl PyLeadSpec {
    #[new]
    #[pyo3(signature = (beta, half_bandwidth, spacing, coupling, mu = 0.0, damping = None))]
    fn new(beta: f64, half_bandwidth: f64, spacing: f64, coupling: f64, mu: f64, damping: Option<f64>) -> Self {
        let mut inner = qotto::LeadSpec::new(beta, half_bandwidth, spacing, coupling);
        inner.mu = mu;
        inner.damping = damping;
        PyLeadSpec { inner }
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }
    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }
    #[getter]
    fn coupling(&self) -> f64 {
        self.inner.coupling
    }
    #[getter]
    fn spacing(&self) -> f64 {
        self.inner.spacing
    }
    #[getter]
    fn half_bandwidth(&self) -> f64 {
        self.inner.half_bandwidth
    }
    #[getter]
    fn damping(&self) -> f64 {
        self.inner.damping()
    }
    #[getter]
    fn levels(&self) -> usize {
        self.inner.levels()
    }
    #[getter]
    fn tunneling(&self) -> f64 {
        self.inner.tunneling()
    }

    fn level_energies(&self) -> Vec<f64> {
        self.inner.level_energies()
    }

    fn __repr__(&self) -> String {
        let l = &self.inner;
        format!(
            "LeadSpec(beta={}, half_bandwidth={}, spacing={}, coupling={}, mu={}, damping={})",
            l.beta,
            l.half_bandwidth,
            l.spacing,
            l.coupling,
            l.mu,
            l.damping()
        )
    }
}

/// Four-stroke Otto schedule of the level energy and the lead contacts.
#[pyclass(name = "OttoProtocol", from_py_object)]
#[derive(Clone)]
pub struct PyOttoProtocol {
    inner: qotto::OttoProtocol,
}

#[pymethods]
impl PyOttoProtocol {
    #[new]
    #[pyo3(signature = (epsilon1 = 2.0, epsilon2 = 1.0, t1 = 20.0, t2 = 10.0, t3 = 20.0, t4 = 10.0, ramp = "smoothstep", switch_ramp = 0.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        epsilon1: f64,
        epsilon2: f64,
        t1: f64,
        t2: f64,
        t3: f64,
        t4: f64,
        ramp: &str,
        switch_ramp: f64,
    ) -> PyResult<Self> {
        let inner = qotto::OttoProtocol {
            epsilon1,
            epsilon2,
            t1,
            t2,
            t3,
            t4,
            ramp: parse_ramp(ramp)?,
            switch_ramp,
        };
        inner.validate().map_err(to_py)?;
        Ok(PyOttoProtocol { inner })
    }

    #[getter]
    fn period(&self) -> f64 {
        self.inner.period()
    }

    fn epsilon_at(&self, t: f64) -> f64 {
        self.inner.epsilon_at(t)
    }

    fn lambda_at(&self, t: f64, lead: &str) -> PyResult<f64> {
        Ok(self.inner.lambda_at(t, parse_lead(lead)?))
    }
}

/// Dot plus two leads with a driving protocol.
#[pyclass(name = "Model")]
pub struct PyModel {
    inner: qotto::Model,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (hot, cold, protocol = None, cross_lead = "damped"))]
    fn new(hot: PyLeadSpec, cold: PyLeadSpec, protocol: Option<PyOttoProtocol>, cross_lead: &str) -> PyResult<Self> {
        let protocol = protocol.map(|p| p.inner).unwrap_or_default();
        let inner = qotto::Model::new(hot.inner, cold.inner, protocol)
            .map_err(to_py)?
            .with_cross_lead(parse_cross_lead(cross_lead)?);
        Ok(PyModel { inner })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// `(energies, coupling)`: the diagonal and the dot border of H(t).
    fn hamiltonian(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let h = self.inner.build_hamiltonian(t);
        (h.energies, h.coupling)
    }

    /// Propagates `cycles` cycles and returns a [`RunResult`].
    #[pyo3(signature = (cycles = 10, dt = 0.1, dot_occupation = 0.0, sample_interval = 1.0))]
    fn run(&self, py: Python<'_>, cycles: usize, dt: f64, dot_occupation: f64, sample_interval: f64) -> PyResult<PyRunResult> {
        let opts = qotto::RunOptions {
            dt,
            cycles,
            dot_occupation,
            sample_interval,
            ..Default::default()
        };
        let model = &self.inner;
        let (traj, records) = py
            .detach(|| {
                let traj = qotto::run_cycles(model, &opts)?;
                let records = qotto::ledger::ledger(&traj, model)?;
                Ok((traj, records))
            })
            .map_err(to_py)?;
        let summary = study::summarize(&traj, &records, model.dim(), dt, false);
        Ok(PyRunResult::new(records, summary, &traj))
    }
}

/// Ledger, summary and sampled observables of one run.
#[pyclass(name = "RunResult")]
pub struct PyRunResult {
    records: Vec<CycleRecord>,
    summary: RunSummary,
    time: Vec<f64>,
    occupation: Vec<f64>,
}

impl PyRunResult {
    fn new(records: Vec<CycleRecord>, summary: RunSummary, traj: &qotto::Trajectory) -> Self {
        PyRunResult {
            records,
            summary,
            time: traj.samples.iter().map(|s| s.time).collect(),
            occupation: traj.samples.iter().map(|s| s.dot_occupation).collect(),
        }
    }
}

#[pymethods]
impl PyRunResult {
    /// One dict per cycle with keys `m, W, Qh, Qc, A, F, F0, eta, eta0, dS, Sigma, W_switch`.
    fn records<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let list = PyList::empty(py);
        for r in &self.records {
            let d = PyDict::new(py);
            d.set_item("m", r.m)?;
            d.set_item("W", r.work)?;
            d.set_item("Qh", r.heat_hot)?;
            d.set_item("Qc", r.heat_cold)?;
            d.set_item("A", r.a_term)?;
            d.set_item("F", r.residual)?;
            d.set_item("F0", r.incomplete)?;
            d.set_item("eta", r.eta)?;
            d.set_item("eta0", r.eta0)?;
            d.set_item("dS", r.entropy_change)?;
            d.set_item("Sigma", r.entropy_production)?;
            d.set_item("W_switch", r.switch_work)?;
            list.append(d)?;
        }
        Ok(list)
    }

    /// Summary as a dict (same content as `summary.json`).
    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let text = serde_json::to_string(&self.summary).map_err(|e| PyValueError::new_err(e.to_string()))?;
        py.import("json")?.call_method1("loads", (text,))
    }

    #[getter]
    fn transient_cycles(&self) -> Option<usize> {
        self.summary.transient_cycles
    }

    /// `(t, n_d)` samples.
    fn occupation(&self) -> (Vec<f64>, Vec<f64>) {
        (self.time.clone(), self.occupation.clone())
    }
}

/// Runs a TOML configuration string; returns a [`RunResult`].
#[pyfunction]
fn run_config(py: Python<'_>, toml: &str) -> PyResult<PyRunResult> {
    let cfg = CoreConfig::from_toml_str(toml).map_err(to_py)?;
    cfg.validate().map_err(to_py)?;
    let outcome = py.detach(|| study::execute(&cfg)).map_err(to_py)?;
    Ok(PyRunResult::new(outcome.records, outcome.summary, &outcome.trajectory))
}

/// The built-in reference configuration as TOML.
#[pyfunction]
fn default_config() -> PyResult<String> {
    CoreConfig::default().to_toml_string().map_err(to_py)
}

#[pyfunction]
fn equilibrium_occupation(eps_d: f64, lead: PyLeadSpec) -> PyResult<f64> {
    qotto::equilibrium_occupation(eps_d, &lead.inner).map_err(to_py)
}

#[pyfunction]
fn limit_cycle_work_estimate(eps1: f64, eps2: f64, hot: PyLeadSpec, cold: PyLeadSpec) -> PyResult<f64> {
    qotto::limit_cycle_work_estimate(eps1, eps2, &hot.inner, &cold.inner).map_err(to_py)
}

/// Estimated work on the `eps1 × eps2` grid, indexed `[i][j]`.
#[pyfunction]
fn regime_map(py: Python<'_>, eps1: Vec<f64>, eps2: Vec<f64>, hot: PyLeadSpec, cold: PyLeadSpec) -> PyResult<Vec<Vec<f64>>> {
    let grid = py
        .detach(|| qotto::engine_region_map(&eps1, &eps2, &hot.inner, &cold.inner))
        .map_err(to_py)?;
    Ok(grid.w_est)
}

#[pymodule]
pub fn pyqotto(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLeadSpec>()?;
    m.add_class::<PyOttoProtocol>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(equilibrium_occupation, m)?)?;
    m.add_function(wrap_pyfunction!(limit_cycle_work_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(regime_map, m)?)?;
    Ok(())
}
