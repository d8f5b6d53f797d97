use std::fmt;
use std::sync::Arc;

use super::{ChernWeilError, Result, FD_STEP};
use crate::linalg::{self, c, CMat};

pub type MatrixFn = Arc<dyn Fn(&[f64]) -> CMat + Send + Sync>;
pub type DerivativeFn = Arc<dyn Fn(&[f64]) -> Vec<CMat> + Send + Sync>;
pub type Reparametrization = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

const UNITARY_TOL: f64 = 1e-9;

/// A map from chart coordinates of a `dim`-dimensional parameter domain into `U(rank)`.
#[derive(Clone)]
pub struct GaugeMap {
    name: String,
    dim: usize,
    rank: usize,
    eval: MatrixFn,
    derivative: Option<DerivativeFn>,
    fd_step: f64,
}

impl fmt::Debug for GaugeMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GaugeMap")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("rank", &self.rank)
            .field("analytic", &self.derivative.is_some())
            .field("fd_step", &self.fd_step)
            .finish()
    }
}

impl GaugeMap {
    /// Finite-difference derivative mode with step `1e-5`.
    pub fn new(name: impl Into<String>, dim: usize, rank: usize, eval: MatrixFn) -> Self {
        Self { name: name.into(), dim, rank, eval, derivative: None, fd_step: FD_STEP }
    }

    pub fn with_derivative(mut self, derivative: DerivativeFn) -> Self {
        self.derivative = Some(derivative);
        self
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    pub fn constant(dim: usize, u: CMat) -> Self {
        let n = u.nrows();
        let zero = CMat::zeros(n, n);
        let value = u.clone();
        Self::new("constant", dim, n, Arc::new(move |_| value.clone()))
            .with_derivative(Arc::new(move |_| vec![zero.clone(); dim]))
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn rank(&self) -> usize {
        self.rank
    }
    pub fn is_analytic(&self) -> bool {
        self.derivative.is_some()
    }

    pub fn value(&self, b: &[f64]) -> CMat {
        (self.eval)(b)
    }

    /// `∂_i g(b)` for every chart direction.
    pub fn partials(&self, b: &[f64]) -> Vec<CMat> {
        if let Some(d) = &self.derivative {
            return d(b);
        }
        let h = self.fd_step;
        (0..self.dim)
            .map(|i| {
                let mut p = b.to_vec();
                let mut m = b.to_vec();
                p[i] += h;
                m[i] -= h;
                ((self.eval)(&p) - (self.eval)(&m)) * c(1.0 / (2.0 * h), 0.0)
            })
            .collect()
    }

    /// `g ∘ ψ` on a new domain of dimension `dim`, in finite-difference mode.
    pub fn reparametrize(&self, dim: usize, psi: Reparametrization) -> Self {
        let inner = self.eval.clone();
        Self::new(format!("{}∘ψ", self.name), dim, self.rank, Arc::new(move |b| inner(&psi(b)))).with_fd_step(self.fd_step)
    }
}

/// `ω_i = g(b)⁻¹ ∂_i g(b)`; the inverse is the adjoint after a unitarity check.
pub fn maurer_cartan(g: &GaugeMap, b: &[f64]) -> Result<Vec<CMat>> {
    if b.len() != g.dim() {
        return Err(ChernWeilError::DimensionMismatch(format!("point of length {} for a {}-dimensional map", b.len(), g.dim())));
    }
    let u = g.value(b);
    let r = linalg::unitarity_residual(&u);
    if !(r < UNITARY_TOL) {
        return Err(ChernWeilError::NotUnitary(r));
    }
    let inv = u.adjoint();
    Ok(g.partials(b).iter().map(|d| &inv * d).collect())
}

/// `max_{i<j} ‖∂_i ω_j − ∂_j ω_i + [ω_i, ω_j]‖` with central differences of step `h`.
pub fn mc_identity_residual(g: &GaugeMap, b: &[f64], h: f64) -> Result<f64> {
    let d = g.dim();
    let omega = maurer_cartan(g, b)?;
    let mut shifted = Vec::with_capacity(d);
    for i in 0..d {
        let mut p = b.to_vec();
        let mut m = b.to_vec();
        p[i] += h;
        m[i] -= h;
        shifted.push((maurer_cartan(g, &p)?, maurer_cartan(g, &m)?));
    }
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in (i + 1)..d {
            let di_wj = (&shifted[i].0[j] - &shifted[i].1[j]) * c(1.0 / (2.0 * h), 0.0);
            let dj_wi = (&shifted[j].0[i] - &shifted[j].1[i]) * c(1.0 / (2.0 * h), 0.0);
            let bracket = &omega[i] * &omega[j] - &omega[j] * &omega[i];
            worst = worst.max(linalg::max_abs(&(di_wj - dj_wi + bracket)));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::I;

    fn winding(m: f64) -> GaugeMap {
        GaugeMap::new("winding", 1, 1, Arc::new(move |b| CMat::from_element(1, 1, (I * m * b[0]).exp())))
    }

    /// `(a, b) ↦ [[a, −b̄], [b, ā]]` on the Hopf chart of `S³`.
    fn su2() -> GaugeMap {
        GaugeMap::new(
            "su2",
            3,
            2,
            Arc::new(|p| {
                let a = (I * p[1]).exp() * p[0].cos();
                let b = (I * p[2]).exp() * p[0].sin();
                CMat::from_row_slice(2, 2, &[a, -b.conj(), b, a.conj()])
            }),
        )
    }

    #[test]
    fn constant_map_has_zero_form() {
        let g = GaugeMap::constant(2, linalg::diag(&[I, c(1.0, 0.0)]));
        let w = maurer_cartan(&g, &[0.3, 0.1]).unwrap();
        assert!(w.iter().all(|m| linalg::max_abs(m) == 0.0));
        assert_eq!(mc_identity_residual(&g, &[0.3, 0.1], 1e-4).unwrap(), 0.0);
    }

    #[test]
    fn winding_form() {
        let w = maurer_cartan(&winding(3.0), &[0.7]).unwrap();
        assert!((w[0][(0, 0)] - c(0.0, 3.0)).norm() < 1e-9);
        assert_eq!(mc_identity_residual(&winding(3.0), &[0.7], 1e-4).unwrap(), 0.0);
    }

    #[test]
    fn su2_form_is_anti_hermitian_and_flat() {
        let g = su2();
        let b = [0.6, 0.4, -1.1];
        for w in maurer_cartan(&g, &b).unwrap() {
            assert!(linalg::max_abs(&(&w + w.adjoint())) < 1e-6);
        }
        assert!(mc_identity_residual(&g, &b, 1e-4).unwrap() < 1e-5);
    }

    #[test]
    fn rejects_non_unitary_values() {
        let g = GaugeMap::new("bad", 1, 1, Arc::new(|b| CMat::from_element(1, 1, c(1.0 + b[0], 0.0))));
        assert!(matches!(maurer_cartan(&g, &[0.5]), Err(ChernWeilError::NotUnitary(_))));
    }
}
