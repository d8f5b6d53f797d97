//! Python module `mcl`: matrices cross the boundary as nested lists of `complex`.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use mcl_core::bvp::{solve_bvp as solve_bvp_core, BvpOptions, BvpProblem, HyperbolicSystem};
use mcl_core::chern_weil;
use mcl_core::flow::{self, FlowConfig};
use mcl_core::geometry;
use mcl_core::harness::{self, ExperimentConfig, HarnessError, Status, VerificationReport};
use mcl_core::linalg::{CMat, RVec};
use mcl_core::quadrature::QuadratureSpec;
use mcl_core::spectral::{self, Classification, Flag, IndexSet, ReductionSplit, Weights, DEFAULT_KERNEL_TOL};

type Matrix = Vec<Vec<Complex64>>;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn harness_err(e: HarnessError) -> PyErr {
    match e {
        HarnessError::Config(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_cmat(rows: &Matrix) -> Result<CMat, String> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(format!("expected a non-empty square matrix, got {} rows", n));
    }
    Ok(CMat::from_fn(n, n, |i, j| rows[i][j]))
}

fn from_cmat(m: &CMat) -> Matrix {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn index_set(entries: Vec<usize>, n: usize) -> PyResult<IndexSet> {
    IndexSet::new(entries, n).map_err(value_err)
}

/// `∫₀¹ (t(1−t))^{k−1} dt`.
#[pyfunction]
fn beta_integral(k: u32) -> f64 {
    chern_weil::beta_integral(k)
}

/// Exact value of `beta_integral(k)` as `(numerator, denominator)`.
#[pyfunction]
fn beta_exact(k: u32) -> (i128, i128) {
    let r = chern_weil::beta_exact(k);
    (*r.numer(), *r.denom())
}

#[pyfunction]
fn tc_constant(k: u32) -> Complex64 {
    chern_weil::tc_constant(k)
}

#[pyfunction]
fn tch_constant(k: u32) -> Complex64 {
    chern_weil::tch_constant(k)
}

/// Integral of the degree `2k−1` trace form over the unstable manifold of `U_{k}` in `U(k)`.
#[pyfunction]
#[pyo3(signature = (k, order = 48))]
fn integrate_unstable(k: usize, order: usize) -> PyResult<Complex64> {
    geometry::integrate_unstable(k, &QuadratureSpec::GaussLegendre { order }, &Flag::standard(k)).map_err(value_err)
}

/// Morse index of the critical point `U_I` for the standard flag and weights.
#[pyfunction]
fn morse_index(entries: Vec<usize>, n: usize) -> PyResult<usize> {
    let set = index_set(entries, n)?;
    spectral::morse_index(&set, &Flag::standard(n), &Weights::standard(n)).map_err(value_err)
}

/// Critical point `U_I` for the standard flag.
#[pyfunction]
fn critical_point(entries: Vec<usize>, n: usize) -> PyResult<Matrix> {
    let set = index_set(entries, n)?;
    spectral::critical_point(&set, &Flag::standard(n)).map(|u| from_cmat(&u)).map_err(value_err)
}

/// Index set of the stratum containing `u`, or `None` if the kernel profile is not a stratum.
#[pyfunction]
fn classify(u: Matrix) -> PyResult<Option<Vec<usize>>> {
    let u = to_cmat(&u).map_err(value_err)?;
    let flag = Flag::standard(u.nrows());
    Ok(match spectral::incidence_classify(&u, &flag, DEFAULT_KERNEL_TOL).map_err(value_err)? {
        Classification::Stratum(set) => Some(set.entries().to_vec()),
        Classification::Unclassifiable(_) => None,
    })
}

fn standard_flow(u: &Matrix) -> PyResult<(FlowConfig, CMat)> {
    let u = to_cmat(u).map_err(value_err)?;
    Ok((FlowConfig::standard(u.nrows()), u))
}

#[pyfunction]
fn f_value(u: Matrix) -> PyResult<f64> {
    let (cfg, u) = standard_flow(&u)?;
    flow::f_value(&cfg, &u).map_err(value_err)
}

/// Time-`t` gradient flow of `u` for the standard weights and flag.
#[pyfunction]
fn flow_at(u: Matrix, t: f64) -> PyResult<Matrix> {
    let (cfg, u) = standard_flow(&u)?;
    flow::flow_at(&cfg, &u, t).map(|v| from_cmat(&v)).map_err(value_err)
}

/// `(index set, time, distance)` of the critical point the forward flow reaches.
#[pyfunction]
#[pyo3(signature = (u, tol = 1e-8))]
fn flow_limit(u: Matrix, tol: f64) -> PyResult<(Vec<usize>, f64, f64)> {
    let (cfg, u) = standard_flow(&u)?;
    let lim = flow::flow_limit(&cfg, &u, tol).map_err(value_err)?;
    Ok((lim.set.entries().to_vec(), lim.time, lim.distance))
}

/// Reduction of `u` along `W_m` of the standard flag; an `m×m` unitary on `W_m^⊥`.
#[pyfunction]
fn symplectic_reduce(u: Matrix, m: usize) -> PyResult<Matrix> {
    let u = to_cmat(&u).map_err(value_err)?;
    if m == 0 || m >= u.nrows() {
        return Err(value_err(format!("m must lie in 1..{}", u.nrows())));
    }
    let split = ReductionSplit::from_flag(&Flag::standard(u.nrows()), m);
    spectral::symplectic_reduce(&u, &split).map(|v| from_cmat(&v)).map_err(value_err)
}

/// Saddle system by name: `linear-diagonal`, `cubic-straightened` or `xtrans-counterexample`.
#[pyclass(name = "HyperbolicSystem", frozen)]
struct PySystem(HyperbolicSystem);

#[pymethods]
impl PySystem {
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        HyperbolicSystem::by_name(name).map(Self).ok_or_else(|| value_err(format!("unknown system {name:?}")))
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name().to_string()
    }

    /// `(stable dimension, unstable dimension)`
    #[getter]
    fn dims(&self) -> (usize, usize) {
        (self.0.s(), self.0.u())
    }

    /// Solves the boundary value problem `x(0) = x0`, `y(tau) = y1` in the `epsilon` cube.
    ///
    /// Returns `(times, xs, ys)`.
    #[pyo3(signature = (x0, y1, tau, epsilon = 0.1))]
    #[allow(clippy::type_complexity)]
    fn solve_bvp(&self, x0: Vec<f64>, y1: Vec<f64>, tau: f64, epsilon: f64) -> PyResult<(Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let problem = BvpProblem::new(RVec::from_vec(x0), RVec::from_vec(y1), tau, epsilon).map_err(value_err)?;
        let traj = solve_bvp_core(&self.0, &problem, &BvpOptions::default()).map_err(value_err)?;
        let rows = |vs: &[RVec]| vs.iter().map(|v| v.iter().copied().collect()).collect();
        Ok((traj.times.clone(), rows(&traj.xs), rows(&traj.ys)))
    }
}

#[pyclass(name = "Report", frozen)]
struct PyReport(VerificationReport);

#[pymethods]
impl PyReport {
    #[getter]
    fn experiment_id(&self) -> String {
        self.0.experiment_id.clone()
    }

    /// `PASS`, `FAIL` or `INVALID-HYPOTHESIS`
    #[getter]
    fn status(&self) -> &'static str {
        match self.0.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::InvalidHypothesis => "INVALID-HYPOTHESIS",
        }
    }

    #[getter]
    fn passed(&self) -> bool {
        self.0.passed()
    }

    /// `(name, computed, reference, tolerance, pass)` per check row.
    #[getter]
    fn rows(&self) -> Vec<(String, f64, f64, f64, bool)> {
        self.0.rows.iter().map(|r| (r.name.clone(), r.computed, r.reference, r.tolerance, r.pass)).collect()
    }

    fn canonical_hash(&self) -> String {
        self.0.canonical_hash()
    }

    fn to_json(&self) -> String {
        self.0.to_json_pretty()
    }

    fn __repr__(&self) -> String {
        format!("Report({:?}, {})", self.0.experiment_id, self.status())
    }
}

/// Runs one experiment from a JSON config string.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_json: &str) -> PyResult<PyReport> {
    let config = ExperimentConfig::from_json(config_json).map_err(harness_err)?;
    py.detach(|| harness::run_experiment(&config)).map(PyReport).map_err(harness_err)
}

/// Built-in experiment configs as JSON strings.
#[pyfunction]
fn builtin_experiments() -> Vec<String> {
    harness::builtin_experiments().iter().map(|c| serde_json::to_string(c).expect("configs serialize")).collect()
}

#[pymodule]
fn mcl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(beta_integral, m)?)?;
    m.add_function(wrap_pyfunction!(beta_exact, m)?)?;
    m.add_function(wrap_pyfunction!(tc_constant, m)?)?;
    m.add_function(wrap_pyfunction!(tch_constant, m)?)?;
    m.add_function(wrap_pyfunction!(integrate_unstable, m)?)?;
    m.add_function(wrap_pyfunction!(morse_index, m)?)?;
    m.add_function(wrap_pyfunction!(critical_point, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(f_value, m)?)?;
    m.add_function(wrap_pyfunction!(flow_at, m)?)?;
    m.add_function(wrap_pyfunction!(flow_limit, m)?)?;
    m.add_function(wrap_pyfunction!(symplectic_reduce, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_experiments, m)?)?;
    m.add_class::<PySystem>()?;
    m.add_class::<PyReport>()?;
    Ok(())
}
