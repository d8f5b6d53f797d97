//! The gradient flow of `f(U) = Re Tr(AU)` on `U(n)` and its long-time limits.
//!
//! With `A` diagonal in the flag basis the flow has the closed form
//! `Φ_t(U) = (sinh tA + cosh tA·U)(cosh tA + sinh tA·U)⁻¹`. Everything is computed
//! in flag coordinates, where `A = diag(a_1, …, a_n)`.

use rand::Rng;
use thiserror::Error;

use crate::linalg::{self, c, CMat};
use crate::spectral::{self, Flag, IndexSet, SpectralError, Weights, DEFAULT_KERNEL_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("flow step is ill-conditioned (condition number {0:.3e})")]
    NumericalBreakdown(f64),
    #[error("no critical point within tolerance by t = {t} (distance {distance:.3e})")]
    SlowConvergence { t: f64, distance: f64 },
}

pub type Result<T> = std::result::Result<T, FlowError>;

const MAX_STEP: f64 = 1.0;
const MAX_CONDITION: f64 = 1e12;
pub const DEFAULT_LIMIT_TOL: f64 = 1e-6;
pub const LIMIT_HORIZON: f64 = 200.0;
/// Looser than the spectral input check so flowed matrices can be flowed again; the
/// closed form loses a few digits of unitarity on each ill-conditioned step.
const INPUT_UNITARY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub weights: Weights,
    pub flag: Flag,
}

impl FlowConfig {
    pub fn new(weights: Weights, flag: Flag) -> Result<Self> {
        if weights.len() != flag.rank() {
            return Err(SpectralError::DimensionMismatch(format!("{} weights for rank {}", weights.len(), flag.rank())).into());
        }
        Ok(Self { weights, flag })
    }

    /// `A = diag(1, …, n)` on the standard flag.
    pub fn standard(n: usize) -> Self {
        Self { weights: Weights::standard(n), flag: Flag::standard(n) }
    }

    pub fn rank(&self) -> usize {
        self.flag.rank()
    }

    pub fn operator(&self) -> CMat {
        self.weights.operator(&self.flag)
    }

    fn check(&self, u: &CMat) -> Result<()> {
        if u.nrows() != self.rank() {
            return Err(SpectralError::DimensionMismatch(format!("{}x{} matrix for rank {}", u.nrows(), u.ncols(), self.rank())).into());
        }
        spectral::ensure_unitary_within(u, INPUT_UNITARY_TOL)?;
        Ok(())
    }
}

/// `Re Tr(AU)`
pub fn f_value(cfg: &FlowConfig, u: &CMat) -> Result<f64> {
    cfg.check(u)?;
    Ok((cfg.operator() * u).trace().re)
}

/// `A − UAU`
pub fn gradient(cfg: &FlowConfig, u: &CMat) -> Result<CMat> {
    cfg.check(u)?;
    let a = cfg.operator();
    Ok(&a - u * &a * u)
}

fn real_diag_fn(values: &[f64], f: impl Fn(f64) -> f64) -> CMat {
    linalg::real_diag(&values.iter().map(|v| f(*v)).collect::<Vec<_>>())
}

fn condition_number(m: &CMat) -> f64 {
    let s = linalg::singular_values_asc(m);
    match (s.first(), s.last()) {
        (Some(lo), Some(hi)) if *lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// One closed-form step in flag coordinates.
fn step_flag_coords(a: &[f64], m: &CMat, t: f64) -> Result<CMat> {
    let sh = real_diag_fn(a, |x| (t * x).sinh());
    let ch = real_diag_fn(a, |x| (t * x).cosh());
    let denom = &ch + &sh * m;
    let cond = condition_number(&denom);
    if !(cond <= MAX_CONDITION) {
        return Err(FlowError::NumericalBreakdown(cond));
    }
    let numer = &sh + &ch * m;
    // X·D⁻¹ = (D⁻ᵀ Xᵀ)ᵀ
    let solved = denom.transpose().lu().solve(&numer.transpose()).ok_or(FlowError::NumericalBreakdown(cond))?;
    Ok(solved.transpose())
}

/// `Φ_t(U)`, composed from steps of length at most 1.
pub fn flow_at(cfg: &FlowConfig, u: &CMat, t: f64) -> Result<CMat> {
    cfg.check(u)?;
    let steps = (t.abs() / MAX_STEP).ceil() as usize;
    if steps == 0 {
        return Ok(u.clone());
    }
    let h = t / steps as f64;
    let a = cfg.weights.values();
    let mut m = cfg.flag.to_flag_coords(u);
    for _ in 0..steps {
        m = step_flag_coords(a, &m, h)?;
    }
    Ok(cfg.flag.from_flag_coords(&m))
}

/// Frobenius-nearest critical point of a matrix in flag coordinates: `s_i = −1`
/// exactly when `Re M_ii < 0`.
fn nearest_critical(m: &CMat) -> (IndexSet, f64) {
    let n = m.nrows();
    let entries: Vec<usize> = (0..n).filter(|&i| m[(i, i)].re < 0.0).map(|i| i + 1).collect();
    let mut d = m.clone();
    for i in 0..n {
        d[(i, i)] -= c(if m[(i, i)].re < 0.0 { -1.0 } else { 1.0 }, 0.0);
    }
    (IndexSet::new(entries, n).expect("entries are in range"), linalg::frobenius(&d))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowLimit {
    pub set: IndexSet,
    pub time: f64,
    pub distance: f64,
}

/// Follows the flow until it is within `tol` (Frobenius) of a critical point.
///
/// `ker(1+Φ_t U) = e^{−tA} ker(1+U)` exactly, but a point on a lower stratum is
/// unstable under the closed form: rounding pushes it off the stratum. The flow is
/// therefore carried on the frame `[R; S] = [1+U; U−1]`, with `R ← e^{hA}R` and
/// `S ← e^{−hA}S` and `U = (R+S)(R−S)⁻¹`. The columns spanning the numerical
/// kernel of `1+U` (same tolerance as the classification) get an exactly zero `R`
/// block, which both the evolution and column-ordered Gram-Schmidt preserve.
pub fn flow_limit(cfg: &FlowConfig, u: &CMat, tol: f64) -> Result<FlowLimit> {
    flow_limit_with_kernel_tol(cfg, u, tol, DEFAULT_KERNEL_TOL)
}

pub fn flow_limit_with_kernel_tol(cfg: &FlowConfig, u: &CMat, tol: f64, kernel_tol: f64) -> Result<FlowLimit> {
    cfg.check(u)?;
    let n = cfg.rank();
    let a = cfg.weights.values();
    let m = cfg.flag.to_flag_coords(u);
    let (set, distance) = nearest_critical(&m);
    if distance < tol {
        return Ok(FlowLimit { set, time: 0.0, distance });
    }

    let one = linalg::identity(n);
    let r = &one + &m;
    let scale = linalg::singular_values_asc(&r).last().copied().unwrap_or(0.0).max(1.0);
    let kernel = linalg::null_space(&r, kernel_tol * scale);
    let mut g = kernel.clone();
    if kernel.ncols() < n {
        let rest = linalg::complement_basis(&kernel);
        g = CMat::from_columns(&kernel.column_iter().chain(rest.column_iter()).map(|c| c.into_owned()).collect::<Vec<_>>());
    }
    let k = kernel.ncols();
    let mut frame = CMat::zeros(2 * n, n);
    let mut rg = &r * &g;
    rg.columns_mut(0, k).fill(c(0.0, 0.0));
    frame.rows_mut(0, n).copy_from(&rg);
    frame.rows_mut(n, n).copy_from(&((&m - &one) * &g));
    linalg::gram_schmidt(&mut frame);

    let h = MAX_STEP;
    let grow = real_diag_fn(a, |x| (h * x).exp());
    let shrink = real_diag_fn(a, |x| (-h * x).exp());
    let mut t = 0.0;
    while t < LIMIT_HORIZON {
        let r_next = &grow * frame.rows(0, n);
        let s_next = &shrink * frame.rows(n, n);
        frame.rows_mut(0, n).copy_from(&r_next);
        frame.rows_mut(n, n).copy_from(&s_next);
        linalg::gram_schmidt(&mut frame);
        t += h;

        let (rb, sb) = (frame.rows(0, n).into_owned(), frame.rows(n, n).into_owned());
        let denom = &rb - &sb;
        let cond = condition_number(&denom);
        if !(cond <= MAX_CONDITION) {
            return Err(FlowError::NumericalBreakdown(cond));
        }
        let numer = &rb + &sb;
        let current = denom
            .transpose()
            .lu()
            .solve(&numer.transpose())
            .ok_or(FlowError::NumericalBreakdown(cond))?
            .transpose();
        let (set, distance) = nearest_critical(&current);
        if distance < tol {
            return Ok(FlowLimit { set, time: t, distance });
        }
        if t >= LIMIT_HORIZON {
            return Err(FlowError::SlowConvergence { t, distance });
        }
    }
    Err(FlowError::SlowConvergence { t, distance: f64::NAN })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct FlowDiagnostics {
    /// max of `‖(Φ_{t+h} − Φ_{t−h})/2h − grad f(Φ_t)‖`
    pub ode_residual: f64,
    /// max of `‖Φ_t Φ_t* − 1‖`
    pub unitarity_drift: f64,
    /// sampled steps where `f` decreased by more than 1e-12
    pub monotonicity_violations: usize,
}

/// Samples `Φ_t(U)` on `t = 0, dt, …, t_max` and accumulates the residuals.
pub fn flow_diagnostics(cfg: &FlowConfig, u: &CMat, t_max: f64, dt: f64, fd_step: f64) -> Result<FlowDiagnostics> {
    let mut out = FlowDiagnostics::default();
    let samples = (t_max / dt).round() as usize;
    let mut prev_f = f64::NEG_INFINITY;
    let mut current = u.clone();
    for i in 0..=samples {
        if i > 0 {
            current = flow_at(cfg, &current, dt)?;
        }
        out.unitarity_drift = out.unitarity_drift.max(linalg::unitarity_residual(&current));
        let f = f_value(cfg, &current)?;
        if f < prev_f - 1e-12 {
            out.monotonicity_violations += 1;
        }
        prev_f = f;
        let plus = flow_at(cfg, &current, fd_step)?;
        let minus = flow_at(cfg, &current, -fd_step)?;
        let derivative = (plus - minus) / c(2.0 * fd_step, 0.0);
        let residual = linalg::max_abs(&(derivative - gradient(cfg, &current)?));
        out.ode_residual = out.ode_residual.max(residual);
    }
    Ok(out)
}

/// A unitary whose `ker(1+U)` has pivot set `I` with respect to the flag (so it lies
/// on the stratum of `U_I`) when `eta = 0`. For `eta > 0` the eigenvalue `−1` is
/// replaced by `e^{i(π−η)}`, which puts the point just off the stratum, inside the
/// open dense one. Other eigenvalues stay at least 0.5 away from `−1` in angle.
pub fn stratum_seed<R: Rng + ?Sized>(set: &IndexSet, flag: &Flag, eta: f64, rng: &mut R) -> Result<CMat> {
    let n = flag.rank();
    IndexSet::new(set.entries().to_vec(), n)?;
    let k = set.len();
    let mut kernel = CMat::zeros(n, k);
    for (p, &i) in set.entries().iter().enumerate() {
        kernel[(i - 1, p)] = c(1.0, 0.0);
        for j in i..n {
            let v = linalg::random_unit_vector(1, rng)[0];
            kernel[(j, p)] = v * rng.random_range(0.2..1.0);
        }
    }
    linalg::gram_schmidt(&mut kernel);
    let rest = linalg::complement_basis(&kernel);
    let frame = CMat::from_columns(&kernel.column_iter().chain(rest.column_iter()).map(|c| c.into_owned()).collect::<Vec<_>>());
    let kernel_value = c(-(eta.cos()), eta.sin());
    let eigenvalues: Vec<_> = (0..n)
        .map(|j| {
            if j < k {
                kernel_value
            } else {
                let theta: f64 = rng.random_range(-std::f64::consts::PI + 0.5..std::f64::consts::PI - 0.5);
                c(theta.cos(), theta.sin())
            }
        })
        .collect();
    let m = linalg::from_spectrum(&eigenvalues, &frame);
    Ok(flag.from_flag_coords(&m))
}
