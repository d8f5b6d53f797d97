use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{BvpError, Result};
use crate::linalg::{RMat, RVec};

pub type Nonlinearity = Arc<dyn Fn(&RVec, &RVec) -> (RVec, RVec) + Send + Sync>;
/// Jacobian of `F = (f, g)` with respect to `(x, y)`, an `(s+u) × (s+u)` matrix.
pub type Jacobian = Arc<dyn Fn(&RVec, &RVec) -> RMat + Send + Sync>;

const HYPERBOLIC_TOL: f64 = 1e-10;
const FLATNESS_TOL: f64 = 1e-8;

/// `ẋ = L⁻x + f(x,y)`, `ẏ = L⁺y + g(x,y)` near a hyperbolic equilibrium at the origin.
#[derive(Clone)]
pub struct HyperbolicSystem {
    name: String,
    lminus: RMat,
    lplus: RMat,
    nonlinearity: Nonlinearity,
    jacobian: Option<Jacobian>,
    symmetric: bool,
    straightened: bool,
    gaps: (f64, f64),
}

impl fmt::Debug for HyperbolicSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HyperbolicSystem")
            .field("name", &self.name)
            .field("s", &self.s())
            .field("u", &self.u())
            .field("lminus", &self.lminus)
            .field("lplus", &self.lplus)
            .field("symmetric", &self.symmetric)
            .field("straightened", &self.straightened)
            .field("gaps", &self.gaps)
            .finish()
    }
}

/// `λ₁ = -max Re spec(L⁻)` and `μ₁ = min Re spec(L⁺)`. An empty block yields `+∞`.
pub fn spectral_gaps(lminus: &RMat, lplus: &RMat) -> Result<(f64, f64)> {
    let re_parts = |m: &RMat| -> Vec<f64> {
        if m.nrows() == 0 {
            Vec::new()
        } else {
            m.complex_eigenvalues().iter().map(|z| z.re).collect()
        }
    };
    let minus = re_parts(lminus);
    let plus = re_parts(lplus);
    if let Some(bad) = minus.iter().chain(plus.iter()).find(|r| r.abs() < HYPERBOLIC_TOL) {
        return Err(BvpError::NotHyperbolic(format!("eigenvalue with real part {bad:.3e}")));
    }
    if let Some(bad) = minus.iter().find(|r| **r > 0.0) {
        return Err(BvpError::NotHyperbolic(format!("L⁻ has an eigenvalue with real part {bad:.3e} > 0")));
    }
    if let Some(bad) = plus.iter().find(|r| **r < 0.0) {
        return Err(BvpError::NotHyperbolic(format!("L⁺ has an eigenvalue with real part {bad:.3e} < 0")));
    }
    let lambda1 = minus.iter().map(|r| -r).fold(f64::INFINITY, f64::min);
    let mu1 = plus.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((lambda1, mu1))
}

fn is_symmetric(m: &RMat) -> bool {
    (m - m.transpose()).amax() < 1e-14
}

impl HyperbolicSystem {
    pub fn new(
        name: impl Into<String>,
        lminus: RMat,
        lplus: RMat,
        nonlinearity: Nonlinearity,
        jacobian: Option<Jacobian>,
        straightened: bool,
    ) -> Result<Self> {
        if !lminus.is_square() || !lplus.is_square() {
            return Err(BvpError::InvalidProblem("L⁻ and L⁺ must be square".into()));
        }
        let gaps = spectral_gaps(&lminus, &lplus)?;
        let symmetric = is_symmetric(&lminus) && is_symmetric(&lplus);
        let system = Self { name: name.into(), lminus, lplus, nonlinearity, jacobian, symmetric, straightened, gaps };
        system.check_flat_at_origin()?;
        Ok(system)
    }

    pub fn linear(name: impl Into<String>, lminus: RMat, lplus: RMat) -> Result<Self> {
        let (s, u) = (lminus.nrows(), lplus.nrows());
        let zero: Nonlinearity = Arc::new(move |_, _| (RVec::zeros(s), RVec::zeros(u)));
        let jac: Jacobian = Arc::new(move |_, _| RMat::zeros(s + u, s + u));
        Self::new(name, lminus, lplus, zero, Some(jac), true)
    }

    /// `s = u = 1`, `L = diag(-1; 1)`, `F = 0`.
    pub fn linear_diagonal() -> Self {
        Self::linear("linear-diagonal", DMatrix::from_element(1, 1, -1.0), DMatrix::from_element(1, 1, 1.0))
            .expect("built-in system is hyperbolic")
    }

    /// `s = u = 1`, `L = diag(-1; 1)`, `f = x y²`, `g = -y x²` (already straightened:
    /// `f = (y²)·x`, `g = (-x²)·y`).
    pub fn cubic_straightened() -> Self {
        let f: Nonlinearity = Arc::new(|x, y| {
            let (a, b) = (x[0], y[0]);
            (RVec::from_element(1, a * b * b), RVec::from_element(1, -b * a * a))
        });
        let jac: Jacobian = Arc::new(|x, y| {
            let (a, b) = (x[0], y[0]);
            RMat::from_row_slice(2, 2, &[b * b, 2.0 * a * b, -2.0 * a * b, -a * a])
        });
        Self::new(
            "cubic-straightened",
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::from_element(1, 1, 1.0),
            f,
            Some(jac),
            true,
        )
        .expect("built-in system is hyperbolic")
    }

    /// `s = 0`, `u = 2`, `L⁺ = [[1, 2], [0, 1]]`, `F = 0`: hyperbolic but tangent to
    /// every coordinate sphere along the anti-diagonal.
    pub fn xtrans_counterexample() -> Self {
        Self::linear("xtrans-counterexample", RMat::zeros(0, 0), RMat::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]))
            .expect("built-in system is hyperbolic")
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "linear-diagonal" => Some(Self::linear_diagonal()),
            "cubic-straightened" => Some(Self::cubic_straightened()),
            "xtrans-counterexample" => Some(Self::xtrans_counterexample()),
            _ => None,
        }
    }

    pub const REGISTRY: [&'static str; 3] = ["linear-diagonal", "cubic-straightened", "xtrans-counterexample"];

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn s(&self) -> usize {
        self.lminus.nrows()
    }
    pub fn u(&self) -> usize {
        self.lplus.nrows()
    }
    pub fn lminus(&self) -> &RMat {
        &self.lminus
    }
    pub fn lplus(&self) -> &RMat {
        &self.lplus
    }
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }
    pub fn is_straightened(&self) -> bool {
        self.straightened
    }
    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }
    /// `(λ₁, μ₁)`
    pub fn gaps(&self) -> (f64, f64) {
        self.gaps
    }

    pub fn nonlinearity(&self, x: &RVec, y: &RVec) -> (RVec, RVec) {
        (self.nonlinearity)(x, y)
    }

    /// Full vector field `X = (L⁻x + f, L⁺y + g)`.
    pub fn field(&self, x: &RVec, y: &RVec) -> (RVec, RVec) {
        let (f, g) = self.nonlinearity(x, y);
        (&self.lminus * x + f, &self.lplus * y + g)
    }

    /// `F` as a single `(s+u)`-vector evaluated at a stacked point.
    pub fn stacked_nonlinearity(&self, z: &RVec) -> RVec {
        let (x, y) = split(z, self.s());
        let (f, g) = self.nonlinearity(&x, &y);
        stack(&f, &g)
    }

    /// Jacobian of `F` at a stacked point: analytic when available, central
    /// differences otherwise.
    pub fn nonlinearity_jacobian(&self, z: &RVec) -> RMat {
        let s = self.s();
        if let Some(jac) = &self.jacobian {
            let (x, y) = split(z, s);
            return jac(&x, &y);
        }
        let d = z.len();
        let h = 1e-6;
        let mut out = RMat::zeros(d, d);
        for j in 0..d {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += h;
            zm[j] -= h;
            let col = (self.stacked_nonlinearity(&zp) - self.stacked_nonlinearity(&zm)) / (2.0 * h);
            out.set_column(j, &col);
        }
        out
    }

    fn check_flat_at_origin(&self) -> Result<()> {
        let d = self.s() + self.u();
        let origin = RVec::zeros(d);
        let value = self.stacked_nonlinearity(&origin).amax();
        let slope = if d == 0 { 0.0 } else { self.nonlinearity_jacobian(&origin).amax() };
        if value > FLATNESS_TOL || slope > FLATNESS_TOL {
            return Err(BvpError::NotFlat { value, slope });
        }
        Ok(())
    }
}

/// `|x, y| = max(|x|, |y|)` with Euclidean component norms.
pub fn pair_norm(x: &RVec, y: &RVec) -> f64 {
    x.norm().max(y.norm())
}

pub fn stack(x: &RVec, y: &RVec) -> RVec {
    RVec::from_iterator(x.len() + y.len(), x.iter().chain(y.iter()).copied())
}

pub fn split(z: &RVec, s: usize) -> (RVec, RVec) {
    (z.rows(0, s).into_owned(), z.rows(s, z.len() - s).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaps_of_diagonal_blocks() {
        let lm = RMat::from_diagonal(&RVec::from_vec(vec![-1.0, -2.0]));
        let lp = RMat::from_element(1, 1, 3.0);
        assert_eq!(spectral_gaps(&lm, &lp).unwrap(), (1.0, 3.0));
    }

    #[test]
    fn gaps_of_jordan_block() {
        let lp = RMat::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let (l, m) = spectral_gaps(&RMat::zeros(0, 0), &lp).unwrap();
        assert!(l.is_infinite());
        assert!((m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaps_with_empty_unstable_block() {
        let (l, m) = spectral_gaps(&RMat::from_element(1, 1, -5.0), &RMat::zeros(0, 0)).unwrap();
        assert_eq!(l, 5.0);
        assert!(m.is_infinite());
    }

    #[test]
    fn rejects_center_direction() {
        let err = spectral_gaps(&RMat::from_element(1, 1, -1e-12), &RMat::from_element(1, 1, 1.0));
        assert!(matches!(err, Err(BvpError::NotHyperbolic(_))));
    }

    #[test]
    fn rejects_nonflat_nonlinearity() {
        let f: Nonlinearity = Arc::new(|x, _| (x * 0.5, RVec::zeros(1)));
        let err = HyperbolicSystem::new("bad", RMat::from_element(1, 1, -1.0), RMat::from_element(1, 1, 1.0), f, None, false);
        assert!(matches!(err, Err(BvpError::NotFlat { .. })));
    }

    #[test]
    fn builtins_flags() {
        let cubic = HyperbolicSystem::cubic_straightened();
        assert!(cubic.is_symmetric() && cubic.is_straightened());
        let xt = HyperbolicSystem::xtrans_counterexample();
        assert!(!xt.is_symmetric());
        assert_eq!((xt.s(), xt.u()), (0, 2));
    }

    #[test]
    fn fd_jacobian_matches_analytic() {
        let cubic = HyperbolicSystem::cubic_straightened();
        let fd = HyperbolicSystem::new(
            "cubic-fd",
            cubic.lminus().clone(),
            cubic.lplus().clone(),
            cubic.nonlinearity.clone(),
            None,
            true,
        )
        .unwrap();
        let z = RVec::from_vec(vec![0.2, -0.3]);
        assert!((cubic.nonlinearity_jacobian(&z) - fd.nonlinearity_jacobian(&z)).amax() < 1e-9);
    }
}
