//! Python bindings for `edca_core`.
//!
//! Access categories are passed as the strings `"VO"`, `"VI"`, `"BE"` and
//! `"BK"`, policies as `"edca"` or `"qcaaae"`. Library errors surface as
//! `ValueError`, file errors as `OSError`.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use edca_core::metrics::{export_csv, MetricsLedger, Scope};
use edca_core::policy::{self, AccessCategory, ActivityStatus, PolicyKind, QosCapabilityFlags};
use edca_core::runner::{self, ScenarioSpec, StationGroup};
use edca_core::{kernel, Error};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn category(name: &str) -> PyResult<AccessCategory> {
    name.parse().map_err(to_py)
}

fn policy_kind(name: &str) -> PyResult<PolicyKind> {
    name.parse().map_err(to_py)
}

fn scope(label: &str) -> PyResult<Scope> {
    if label == "global" {
        Ok(Scope::Global)
    } else {
        category(label).map(Scope::Ac)
    }
}

/// Returns `(cw_min, cw_max)` for `n` associated stations of one category.
#[pyfunction]
fn compute_cw(n: u64) -> PyResult<(u16, u16)> {
    policy::compute_cw(n).map_err(to_py)
}

/// AIFSN for each active category, keyed by category name.
#[pyfunction]
fn compute_aifsn(vo: bool, vi: bool, be: bool) -> BTreeMap<&'static str, u8> {
    policy::compute_aifsn(ActivityStatus { vo, vi, be })
        .into_iter()
        .map(|(ac, aifsn)| (ac.as_str(), aifsn))
        .collect()
}

#[pyclass(
    name = "EdcaParamSet",
    module = "edca_sim",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
struct PyParamSet(policy::EdcaParamSet);

#[pymethods]
impl PyParamSet {
    /// The fixed default parameters.
    #[staticmethod]
    fn default_set() -> Self {
        Self(policy::static_edca_params())
    }

    #[getter]
    fn epoch(&self) -> u64 {
        self.0.epoch
    }

    /// `(aifsn, cw_min, cw_max)` for one category.
    fn get(&self, ac: &str) -> PyResult<(u8, u16, u16)> {
        let p = self.0.get(category(ac)?);
        Ok((p.aifsn, p.cw_min, p.cw_max))
    }

    fn as_dict(&self) -> BTreeMap<&'static str, (u8, u16, u16)> {
        self.0
            .iter()
            .map(|(ac, p)| (ac.as_str(), (p.aifsn, p.cw_min, p.cw_max)))
            .collect()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }

    fn __repr__(&self) -> String {
        let body: Vec<String> = self
            .0
            .iter()
            .map(|(ac, p)| format!("{ac}=({}, {}, {})", p.aifsn, p.cw_min, p.cw_max))
            .collect();
        format!("EdcaParamSet(epoch={}, {})", self.0.epoch, body.join(", "))
    }
}

/// Per-category association counts kept by the access point.
#[pyclass(name = "AcCounters", module = "edca_sim", skip_from_py_object)]
#[derive(Clone, Default)]
struct PyCounters(policy::AcCounters);

#[pymethods]
impl PyCounters {
    #[new]
    fn new() -> Self {
        Self::default()
    }

    /// Registers a station whose QoS info octet is `qos_info`.
    fn associate(&mut self, qos_info: u8) {
        self.0 = self
            .0
            .register_association(QosCapabilityFlags::from_qos_info(qos_info));
    }

    fn disassociate(&mut self, qos_info: u8) -> PyResult<()> {
        self.0 = self
            .0
            .register_disassociation(QosCapabilityFlags::from_qos_info(qos_info))
            .map_err(to_py)?;
        Ok(())
    }

    fn count(&self, ac: &str) -> PyResult<u32> {
        Ok(self.0.count(category(ac)?))
    }

    /// `(vo, vi, be)` activity flags.
    fn activity(&self) -> (bool, bool, bool) {
        let s = self.0.activity_status();
        (s.vo, s.vi, s.be)
    }

    /// The adaptive parameter set derived from these counts.
    #[pyo3(signature = (previous=None))]
    fn param_set(&self, previous: Option<&PyParamSet>) -> PyParamSet {
        let previous = previous.map_or_else(policy::static_edca_params, |p| p.0);
        PyParamSet(policy::build_param_set(&self.0, &previous))
    }

    fn __repr__(&self) -> String {
        format!(
            "AcCounters(VO={}, VI={}, BE={})",
            self.0.count(AccessCategory::Vo),
            self.0.count(AccessCategory::Vi),
            self.0.count(AccessCategory::Be)
        )
    }
}

/// QoS info octet advertising a single category.
#[pyfunction]
fn qos_info_for(ac: &str) -> PyResult<u8> {
    Ok(QosCapabilityFlags::for_category(category(ac)?).to_qos_info())
}

#[pyclass(name = "Scenario", module = "edca_sim", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyScenario(ScenarioSpec);

#[pymethods]
impl PyScenario {
    /// Parses a TOML scenario configuration.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        runner::parse_scenario(text).map(Self).map_err(to_py)
    }

    /// Saturated stations with default payloads, e.g. `{"BE": 8, "VO": 2}`.
    #[staticmethod]
    #[pyo3(signature = (scenario_id, groups, duration=10.0, warmup=1.0))]
    fn saturated(
        scenario_id: String,
        groups: BTreeMap<String, u32>,
        duration: f64,
        warmup: f64,
    ) -> PyResult<Self> {
        let groups = groups
            .iter()
            .map(|(ac, &n)| StationGroup::saturated(category(ac)?, n).map_err(to_py))
            .collect::<PyResult<Vec<_>>>()?;
        let spec = ScenarioSpec::new(scenario_id, groups).with_duration(duration, warmup);
        spec.validate().map_err(to_py)?;
        Ok(Self(spec))
    }

    #[getter]
    fn scenario_id(&self) -> &str {
        &self.0.scenario_id
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.0.duration
    }

    #[getter]
    fn warmup(&self) -> f64 {
        self.0.warmup
    }

    fn total_stations(&self) -> u64 {
        self.0.total_stations()
    }

    /// Station count per category.
    fn stations(&self) -> BTreeMap<&'static str, u32> {
        let mut out = BTreeMap::new();
        for g in &self.0.station_groups {
            *out.entry(g.ac.as_str()).or_default() += g.count;
        }
        out
    }

    fn to_toml(&self) -> String {
        self.0.to_config()
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario({:?}, stations={})",
            self.0.scenario_id,
            self.0.total_stations()
        )
    }
}

/// The comparison grid with every population divided by `scale`.
#[pyfunction]
#[pyo3(signature = (scale=1))]
fn paper_grid(scale: u32) -> Vec<PyScenario> {
    runner::paper_grid(scale)
        .into_iter()
        .map(PyScenario)
        .collect()
}

#[pyclass(name = "RunResult", module = "edca_sim", frozen, skip_from_py_object)]
struct PyRunResult(MetricsLedger);

#[pymethods]
impl PyRunResult {
    #[getter]
    fn scenario_id(&self) -> &str {
        &self.0.info.scenario_id
    }

    #[getter]
    fn policy(&self) -> &'static str {
        self.0.info.policy.as_str()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.info.seed
    }

    /// Scope labels in CSV order.
    fn scopes(&self) -> Vec<&'static str> {
        let mut labels: Vec<_> = self.0.scopes().iter().map(Scope::label).collect();
        labels.sort_unstable();
        labels
    }

    /// Metrics and raw counts for one scope. Undefined metrics are `None`.
    #[pyo3(signature = (scope="global"))]
    fn metrics<'py>(
        &self,
        py: Python<'py>,
        scope: &str,
    ) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
        let s = self::scope(scope)?;
        let tally = self.0.tally(s).ok_or_else(|| {
            PyValueError::new_err(format!("scope {scope} not present in this run"))
        })?;
        let d = pyo3::types::PyDict::new(py);
        d.set_item(
            "normalized_throughput",
            self.0.normalized_throughput(s).ok(),
        )?;
        d.set_item("mean_delay_s", self.0.mean_access_delay(s).ok())?;
        d.set_item("retx_per_frame", self.0.retransmission_attempts(s).ok())?;
        d.set_item("generated", tally.generated_frames)?;
        d.set_item("delivered", tally.delivered_frames)?;
        d.set_item("dropped", tally.dropped_frames)?;
        d.set_item("queued", tally.queued_frames)?;
        d.set_item("collisions", tally.collision_events)?;
        Ok(d)
    }

    fn is_consistent(&self) -> bool {
        self.0.is_consistent()
    }

    fn to_csv(&self) -> PyResult<String> {
        ledgers_csv(std::slice::from_ref(&self.0))
    }
}

fn ledgers_csv(ledgers: &[MetricsLedger]) -> PyResult<String> {
    let mut out = Vec::new();
    export_csv(ledgers, &mut out).map_err(to_py)?;
    Ok(String::from_utf8(out).expect("csv is utf-8"))
}

/// Simulates one scenario. The GIL is released for the duration of the run.
#[pyfunction]
fn run(py: Python<'_>, scenario: &PyScenario, policy: &str, seed: u64) -> PyResult<PyRunResult> {
    let kind = policy_kind(policy)?;
    let spec = scenario.0.clone();
    py.detach(move || kernel::run(&spec, kind, seed))
        .map(PyRunResult)
        .map_err(to_py)
}

/// Runs every scenario under both policies for each seed in parallel.
/// Returns a dict with `results_csv`, `summary_csv` and `failures`; when
/// `out_dir` is given the three report files are also written there.
#[pyfunction]
#[pyo3(signature = (scenarios, seeds, out_dir=None))]
fn sweep<'py>(
    py: Python<'py>,
    scenarios: Vec<PyRef<'py, PyScenario>>,
    seeds: Vec<u64>,
    out_dir: Option<std::path::PathBuf>,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let grid: Vec<ScenarioSpec> = scenarios.iter().map(|s| s.0.clone()).collect();
    let report = py
        .detach(|| runner::sweep(&grid, &PolicyKind::ALL, &seeds))
        .map_err(to_py)?;
    if let Some(dir) = out_dir {
        report.write_dir(&dir).map_err(to_py)?;
    }
    let mut summary = Vec::new();
    report.write_summary_csv(&mut summary).map_err(to_py)?;
    let failures: Vec<(String, &'static str, u64, String)> = report
        .failures
        .iter()
        .map(|f| {
            (
                f.scenario_id.clone(),
                f.policy.as_str(),
                f.seed,
                f.error.clone(),
            )
        })
        .collect();
    let d = pyo3::types::PyDict::new(py);
    d.set_item("results_csv", ledgers_csv(&report.ledgers)?)?;
    d.set_item(
        "summary_csv",
        String::from_utf8(summary).expect("csv is utf-8"),
    )?;
    d.set_item("failures", failures)?;
    Ok(d)
}

#[pymodule]
pub fn edca_sim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CSV_HEADER", edca_core::metrics::CSV_HEADER)?;
    m.add("PHY_CW_MAX", policy::PHY_CW_MAX)?;
    m.add_class::<PyParamSet>()?;
    m.add_class::<PyCounters>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(compute_cw, m)?)?;
    m.add_function(wrap_pyfunction!(compute_aifsn, m)?)?;
    m.add_function(wrap_pyfunction!(qos_info_for, m)?)?;
    m.add_function(wrap_pyfunction!(paper_grid, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
