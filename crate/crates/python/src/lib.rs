//! Python bindings for `naed-core`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use naed_core::analysis::{self, Metrics};
use naed_core::experiment::{self, SiteSweep, SweepRow};
use naed_core::noise::InjectedError;
use naed_core::statevec::{BitString, Pdf};
use naed_core::{circuits, logical, noise, statevec, verify, NaedError as CoreError};

create_exception!(naed, NaedError, PyValueError);

fn err(e: CoreError) -> PyErr {
    NaedError::new_err(e.to_string())
}

fn bits(s: &str) -> PyResult<BitString> {
    s.parse().map_err(err)
}

fn pdf_to_map(pdf: &Pdf<BitString>) -> BTreeMap<String, f64> {
    pdf.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn map_to_pdf(map: BTreeMap<String, f64>) -> PyResult<Pdf<BitString>> {
    map.into_iter().map(|(k, v)| Ok((bits(&k)?, v))).collect()
}

fn model(p_gate: f64, gamma: f64, seed: u64) -> PyResult<noise::StochasticModel> {
    noise::StochasticModel::new(p_gate, gamma, seed).map_err(err)
}

/// Bit-flip code on `q` qubits; `set` lists the positions that are 1 in the logical zero.
#[pyclass(frozen, skip_from_py_object, module = "naed")]
#[derive(Clone)]
struct BitFlipCode(naed_core::BitFlipCode);

#[pymethods]
impl BitFlipCode {
    #[new]
    #[pyo3(signature = (q, set=None))]
    fn new(q: usize, set: Option<Vec<usize>>) -> PyResult<Self> {
        let set = set.unwrap_or_else(|| naed_core::default_experiment_set(q));
        naed_core::BitFlipCode::new(q, &set).map(Self).map_err(err)
    }

    /// The code used by the GHZ experiments.
    #[staticmethod]
    fn ghz(q: usize) -> PyResult<Self> {
        circuits::ghz_code(q).map(Self).map_err(err)
    }

    #[getter]
    fn q(&self) -> usize {
        self.0.q()
    }

    #[getter]
    fn set(&self) -> Vec<usize> {
        self.0.set().to_vec()
    }

    fn codeword(&self, logical_one: bool) -> String {
        self.0.codeword(logical_one).to_string()
    }

    fn encode(&self, logical: &str) -> PyResult<String> {
        Ok(self.0.encode(&bits(logical)?).map_err(err)?.to_string())
    }

    /// The decoded logical string, or `None` when some block is not a codeword.
    fn classify_shot(&self, n_logical: usize, shot: &str) -> PyResult<Option<String>> {
        Ok(match self.0.classify_shot(n_logical, &bits(shot)?).map_err(err)? {
            naed_core::ShotClassification::Accept(l) => Some(l.to_string()),
            naed_core::ShotClassification::Reject => None,
        })
    }

    fn __repr__(&self) -> String {
        format!("BitFlipCode(q={}, set={:?})", self.0.q(), self.0.set())
    }
}

#[pyclass(frozen, skip_from_py_object, module = "naed")]
#[derive(Clone)]
struct LogicalCircuit(circuits::LogicalCircuit);

#[pymethods]
impl LogicalCircuit {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        circuits::parse_dsl(text).map(Self).map_err(err)
    }

    #[staticmethod]
    fn ghz(n: usize) -> PyResult<Self> {
        circuits::ghz_logical(n).map(Self).map_err(err)
    }

    #[pyo3(signature = (code, simplify=true))]
    fn lower(&self, code: &BitFlipCode, simplify: bool) -> PyResult<PhysicalCircuit> {
        let c = logical::lower(&self.0, &code.0).map_err(err)?;
        Ok(PhysicalCircuit(if simplify { logical::simplify(&c) } else { c }))
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.0.n_qubits()
    }

    #[getter]
    fn cx_count(&self) -> usize {
        self.0.cx_count()
    }

    fn __len__(&self) -> usize {
        self.0.gates().len()
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }
}

#[pyclass(frozen, skip_from_py_object, module = "naed")]
#[derive(Clone)]
struct PhysicalCircuit(logical::PhysicalCircuit);

#[pymethods]
impl PhysicalCircuit {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        text.parse().map(Self).map_err(err)
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.0.n_qubits()
    }

    #[getter]
    fn cx_count(&self) -> usize {
        self.0.cx_count()
    }

    fn simplified(&self) -> Self {
        Self(logical::simplify(&self.0))
    }

    fn amplitudes(&self, py: Python<'_>) -> PyResult<Vec<Complex64>> {
        let state = py.detach(|| statevec::simulate(&self.0)).map_err(err)?;
        Ok(state.amplitudes().to_vec())
    }

    fn probabilities(&self, py: Python<'_>) -> PyResult<BTreeMap<String, f64>> {
        let state = py.detach(|| statevec::simulate(&self.0)).map_err(err)?;
        Ok(pdf_to_map(&state.probabilities()))
    }

    /// Measured shots under depolarizing gate noise and amplitude damping.
    #[pyo3(signature = (shots, seed=0, p_gate=0.0, gamma=0.0))]
    fn sample(&self, py: Python<'_>, shots: usize, seed: u64, p_gate: f64, gamma: f64) -> PyResult<Vec<String>> {
        let m = model(p_gate, gamma, seed)?;
        let out = py.detach(|| noise::simulate_noisy(&self.0, &m, shots, seed)).map_err(err)?;
        Ok(out.iter().map(|b| b.to_string()).collect())
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }
}

#[pyclass(frozen, module = "naed")]
struct Tally(analysis::Tally);

#[pymethods]
impl Tally {
    #[staticmethod]
    fn from_shots(shots: Vec<String>, code: &BitFlipCode, n_logical: usize) -> PyResult<Self> {
        let shots = shots.iter().map(|s| bits(s)).collect::<PyResult<Vec<_>>>()?;
        analysis::tally(&shots, &code.0, n_logical).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_counts(n_logical: usize, r0: u64, r1: u64, ra: u64, rb: u64) -> PyResult<Self> {
        analysis::Tally::from_counts(n_logical, r0, r1, ra, rb).map(Self).map_err(err)
    }

    #[getter(T)]
    fn t(&self) -> u64 {
        self.0.t
    }

    #[getter]
    fn r0(&self) -> u64 {
        self.0.r0
    }

    #[getter]
    fn r1(&self) -> u64 {
        self.0.r1
    }

    #[getter]
    fn ra(&self) -> u64 {
        self.0.ra
    }

    #[getter]
    fn rb(&self) -> u64 {
        self.0.rb
    }

    /// `{"mu_full", "mu_naed", "p_kept"}` on a 0 to 100 scale.
    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let Metrics { mu_full, mu_naed, p_kept } = analysis::metrics(&self.0).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("mu_full", mu_full)?;
        d.set_item("mu_naed", mu_naed)?;
        d.set_item("p_kept", p_kept)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        let t = &self.0;
        format!("Tally(T={}, r0={}, r1={}, ra={}, rb={})", t.t, t.r0, t.r1, t.ra, t.rb)
    }
}

fn row_dict<'py>(py: Python<'py>, r: &SweepRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("N", r.n)?;
    d.set_item("Q", r.q)?;
    d.set_item("rep", &r.rep)?;
    d.set_item("seed", r.seed)?;
    d.set_item("T", r.t)?;
    d.set_item("r0", r.r0)?;
    d.set_item("r1", r.r1)?;
    d.set_item("ra", r.ra)?;
    d.set_item("rb", r.rb)?;
    d.set_item("mu_full", r.mu_full)?;
    d.set_item("mu_naed", r.mu_naed)?;
    d.set_item("p_kept", r.p_kept)?;
    Ok(d)
}

#[pyclass(frozen, module = "naed")]
struct SweepResult(experiment::SweepResult);

#[pymethods]
impl SweepResult {
    #[getter]
    fn rows<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.0.rows.iter().map(|r| row_dict(py, r)).collect()
    }

    #[getter]
    fn aggregates<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.0.aggregates.iter().map(|r| row_dict(py, r)).collect()
    }

    fn aggregate<'py>(&self, py: Python<'py>, n: usize, q: usize) -> PyResult<Option<Bound<'py, PyDict>>> {
        self.0.aggregate(n, q).map(|r| row_dict(py, r)).transpose()
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(err)
    }

    fn to_csv(&self) -> PyResult<String> {
        self.0.to_csv().map_err(err)
    }
}

#[pyfunction]
fn build_ghz(n: usize, q: usize) -> PyResult<PhysicalCircuit> {
    circuits::build_ghz(n, q).map(PhysicalCircuit).map_err(err)
}

#[pyfunction]
fn ideal_pdf(n: usize, q: usize) -> PyResult<BTreeMap<String, f64>> {
    Ok(pdf_to_map(&circuits::ideal_pdf(n, q).map_err(err)?))
}

/// `100 - 50 * L1` between two normalized distributions.
#[pyfunction]
fn similarity(a: BTreeMap<String, f64>, b: BTreeMap<String, f64>) -> PyResult<f64> {
    analysis::similarity(&map_to_pdf(a)?, &map_to_pdf(b)?).map_err(err)
}

/// The (N, Q) grid experiment. Without noise parameters the exact noiseless
/// distribution is tallied.
#[pyfunction]
#[pyo3(signature = (
    n_list=vec![2, 3, 4, 5], q_list=vec![1, 2, 3, 4, 5], shots=8192, reps=225,
    p_gate=None, gamma=None, seed=0, simplify=true,
))]
#[allow(clippy::too_many_arguments)]
fn run_sweep(
    py: Python<'_>,
    n_list: Vec<usize>,
    q_list: Vec<usize>,
    shots: usize,
    reps: usize,
    p_gate: Option<f64>,
    gamma: Option<f64>,
    seed: u64,
    simplify: bool,
) -> PyResult<SweepResult> {
    let noise = match (p_gate, gamma) {
        (None, None) => None,
        (p, g) => Some(model(p.unwrap_or(0.0), g.unwrap_or(0.0), seed)?),
    };
    let config = experiment::SweepConfig { n_list, q_list, shots, reps, noise, master_seed: seed, simplify };
    py.detach(|| experiment::run_sweep(&config)).map(SweepResult).map_err(err)
}

/// Rejection probability of a single error at each site of the GHZ(N, Q) circuit.
/// `error` is `"X"`, `"Y"`, `"Z"` or `"phase"` (with `theta`, `phi`).
#[pyfunction]
#[pyo3(signature = (n, q, error="X", theta=0.0, phi=0.0, all_sites=false))]
fn inject_study<'py>(
    py: Python<'py>,
    n: usize,
    q: usize,
    error: &str,
    theta: f64,
    phi: f64,
    all_sites: bool,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let e = match error {
        "phase" => InjectedError::Phase { theta, phi },
        other => other.parse().map_err(err)?,
    };
    let sweep = if all_sites { SiteSweep::All } else { SiteSweep::Boundaries };
    let report = py.detach(|| experiment::inject_study(n, q, e, sweep)).map_err(err)?;
    report
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("site", r.site)?;
            d.set_item("qubit", r.qubit)?;
            d.set_item("rejection", r.rejection)?;
            d.set_item("accepted", r.accepted)?;
            d.set_item("corruption", r.corruption)?;
            d.set_item("accepted_deviation", r.accepted_deviation)?;
            Ok(d)
        })
        .collect()
}

/// Runs the built-in oracle checks: `[(name, max_residual, tolerance, passed)]`.
#[pyfunction]
#[pyo3(signature = (seed=0))]
fn run_checks(py: Python<'_>, seed: u64) -> PyResult<Vec<(String, f64, f64, bool)>> {
    let reports = py.detach(|| verify::run_all(seed)).map_err(err)?;
    Ok(reports.into_iter().map(|r| (r.name, r.max_residual, r.tolerance, r.passed)).collect())
}

#[pymodule]
fn naed(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NaedError", m.py().get_type::<NaedError>())?;
    m.add("SWEEP_SCHEMA", experiment::SWEEP_SCHEMA)?;
    m.add("CSV_COLUMNS", experiment::CSV_COLUMNS.to_vec())?;
    m.add_class::<BitFlipCode>()?;
    m.add_class::<LogicalCircuit>()?;
    m.add_class::<PhysicalCircuit>()?;
    m.add_class::<Tally>()?;
    m.add_class::<SweepResult>()?;
    m.add_function(wrap_pyfunction!(build_ghz, m)?)?;
    m.add_function(wrap_pyfunction!(ideal_pdf, m)?)?;
    m.add_function(wrap_pyfunction!(similarity, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(inject_study, m)?)?;
    m.add_function(wrap_pyfunction!(run_checks, m)?)?;
    Ok(())
}
