//! Odd Chern-Weil forms: Maurer-Cartan pullbacks, wedge traces, the exact
//! transgression constants and the two-connection transgression.

mod algebra;
mod forms;
mod gauge;
mod transgression;

use std::collections::BTreeMap;

use num_complex::Complex64;
use num_rational::Ratio;
use thiserror::Error;

use crate::linalg::CMat;
use crate::quadrature::gauss_legendre_on;

pub use algebra::{MatForm, ScalarForm};
pub use forms::{combinations, fd_exterior_derivative, mask_of, tc_form, tch_form, wedge_trace_form, FormField};
pub use gauge::{maurer_cartan, mc_identity_residual, GaugeMap};
pub use transgression::{characteristic_form, curvature, transgression_general, ConnectionFn, ConnectionPath, Polynomial};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChernWeilError {
    #[error("wedge trace needs an odd number of factors, got {0}")]
    InvalidArity(usize),
    #[error("gauge map value is not unitary (residual {0:.3e})")]
    NotUnitary(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, ChernWeilError>;

pub const FD_STEP: f64 = 1e-5;
pub const FD_STEP_NESTED: f64 = 1e-4;

/// `Σ_σ sgn(σ) tr(ω_σ(1) ⋯ ω_σ(q))` over all permutations, without normalization.
pub fn wedge_trace(omegas: &[CMat]) -> Result<Complex64> {
    let q = omegas.len();
    if q.is_multiple_of(2) {
        return Err(ChernWeilError::InvalidArity(q));
    }
    let n = omegas[0].nrows();
    if omegas.iter().any(|m| m.nrows() != n || m.ncols() != n) {
        return Err(ChernWeilError::DimensionMismatch("factors must be square of equal size".into()));
    }
    // Heap's algorithm; each swap flips the sign
    let mut perm: Vec<usize> = (0..q).collect();
    let mut counters = vec![0usize; q];
    let mut sign = 1.0;
    let product_trace = |perm: &[usize]| -> Complex64 {
        let mut acc = omegas[perm[0]].clone();
        for &p in &perm[1..] {
            acc *= &omegas[p];
        }
        acc.trace()
    };
    let mut total = product_trace(&perm);
    let mut i = 0;
    while i < q {
        if counters[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counters[i], i);
            }
            sign = -sign;
            total += product_trace(&perm) * sign;
            counters[i] += 1;
            i = 0;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    Ok(total)
}

fn factorial(n: u32) -> i128 {
    (1..=n as i128).product()
}

/// A constant of the form `coefficient · (i/2π)^k`, kept exact in the rational part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormConstant {
    pub coefficient: Ratio<i128>,
    pub power: u32,
}

impl FormConstant {
    pub fn to_complex(&self) -> Complex64 {
        let base = Complex64::new(0.0, 1.0 / (2.0 * std::f64::consts::PI));
        let c = *self.coefficient.numer() as f64 / *self.coefficient.denom() as f64;
        base.powu(self.power) * c
    }
}

/// `(tc, tch)` with `tc = (i/2π)^k [(k−1)!]²/(2k−1)!` and
/// `tch = (−1)^{k−1} (i/2π)^k (k−1)!/(2k−1)!`.
pub fn form_constants(k: u32) -> (FormConstant, FormConstant) {
    assert!((1..=16).contains(&k), "constants are tabulated for 1 <= k <= 16");
    let f = factorial(k - 1);
    let g = factorial(2 * k - 1);
    let sign = if k % 2 == 1 { 1 } else { -1 };
    (
        FormConstant { coefficient: Ratio::new(f * f, g), power: k },
        FormConstant { coefficient: Ratio::new(sign * f, g), power: k },
    )
}

pub fn tc_constant(k: u32) -> Complex64 {
    form_constants(k).0.to_complex()
}

pub fn tch_constant(k: u32) -> Complex64 {
    form_constants(k).1.to_complex()
}

/// Elementary symmetric polynomial `e_k` as a polynomial in the power sums, from
/// Newton's recursion `k e_k = Σ_j (−1)^{j−1} e_{k−j} p_j`. Monomials are sorted
/// lists of power-sum indices.
pub fn newton_expansion(k: u32) -> BTreeMap<Vec<u32>, Ratio<i128>> {
    let mut e: Vec<BTreeMap<Vec<u32>, Ratio<i128>>> = vec![BTreeMap::from([(Vec::new(), Ratio::from_integer(1))])];
    for m in 1..=k {
        let mut next: BTreeMap<Vec<u32>, Ratio<i128>> = BTreeMap::new();
        for j in 1..=m {
            let sign = if j % 2 == 1 { 1 } else { -1 };
            for (mono, coef) in &e[(m - j) as usize] {
                let mut key = mono.clone();
                key.push(j);
                key.sort_unstable();
                *next.entry(key).or_insert(Ratio::from_integer(0)) += coef * Ratio::new(sign, m as i128);
            }
        }
        next.retain(|_, v| *v != Ratio::from_integer(0));
        e.push(next);
    }
    e.pop().unwrap_or_default()
}

/// Coefficient of the single power sum `p_k` in `e_k`. Products of power sums drop
/// out of the transgression, so this ratio links `c_k` to `ch_k`.
pub fn newton_linear_coefficient(k: u32) -> Ratio<i128> {
    newton_expansion(k).get(&vec![k]).copied().unwrap_or(Ratio::from_integer(0))
}

/// `∫₀¹ (t² − t)^{k−1} dt` by Gauss-Legendre quadrature.
pub fn beta_integral(k: u32) -> f64 {
    let (x, w) = gauss_legendre_on((k as usize + 1).max(8), 0.0, 1.0);
    x.iter().zip(&w).map(|(t, wt)| wt * (t * t - t).powi(k as i32 - 1)).sum()
}

/// `(−1)^{k−1} [(k−1)!]² / (2k−1)!`
pub fn beta_exact(k: u32) -> Ratio<i128> {
    let f = factorial(k - 1);
    let sign = if k % 2 == 1 { 1 } else { -1 };
    Ratio::new(sign * f * f, factorial(2 * k - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, random_unitary};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Brute force: all index tuples with distinct entries, sign by inversion count.
    fn wedge_trace_oracle(omegas: &[CMat]) -> Complex64 {
        let q = omegas.len();
        let mut total = Complex64::new(0.0, 0.0);
        for code in 0..q.pow(q as u32) {
            let mut idx = Vec::with_capacity(q);
            let mut rest = code;
            for _ in 0..q {
                idx.push(rest % q);
                rest /= q;
            }
            let mut seen = idx.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != q {
                continue;
            }
            let inversions = (0..q).flat_map(|a| (a + 1..q).map(move |b| (a, b))).filter(|&(a, b)| idx[a] > idx[b]).count();
            let mut prod = crate::linalg::identity(omegas[0].nrows());
            for &i in &idx {
                prod *= &omegas[i];
            }
            let s = if inversions % 2 == 0 { 1.0 } else { -1.0 };
            total += prod.trace() * s;
        }
        total
    }

    #[test]
    fn wedge_trace_examples() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 2.0), c(0.0, 1.0), c(3.0, 0.0), c(-1.0, 0.5)]);
        assert_eq!(wedge_trace(std::slice::from_ref(&m)).unwrap(), m.trace());
        let s = |v: f64| CMat::from_element(1, 1, c(v, 0.0));
        assert_eq!(wedge_trace(&[s(1.0), s(2.0), s(3.0)]).unwrap(), c(0.0, 0.0));
        assert!(matches!(wedge_trace(&[m.clone(), m]), Err(ChernWeilError::InvalidArity(2))));
    }

    #[test]
    fn wedge_trace_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for q in [3, 5] {
            let ms: Vec<CMat> = (0..q).map(|_| random_unitary(2, &mut rng) * c(0.7, 0.2)).collect();
            let a = wedge_trace(&ms).unwrap();
            let b = wedge_trace_oracle(&ms);
            assert!((a - b).norm() < 1e-12 * (1.0 + b.norm()), "{a} {b}");
            let mut swapped = ms.clone();
            swapped.swap(0, 2);
            assert!((wedge_trace(&swapped).unwrap() + a).norm() < 1e-12);
        }
    }

    #[test]
    fn beta_examples() {
        assert!((beta_integral(1) - 1.0).abs() < 1e-15);
        assert!((beta_integral(2) + 1.0 / 6.0).abs() < 1e-15);
        assert!((beta_integral(3) - 1.0 / 30.0).abs() < 1e-15);
        for k in 1..=8 {
            let exact = beta_exact(k);
            let v = *exact.numer() as f64 / *exact.denom() as f64;
            assert!((beta_integral(k) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn newton_expansion_low_degree() {
        // e_2 = (p_1² − p_2)/2
        let e2 = newton_expansion(2);
        assert_eq!(e2.get(&vec![1, 1]), Some(&Ratio::new(1, 2)));
        assert_eq!(e2.get(&vec![2]), Some(&Ratio::new(-1, 2)));
        assert_eq!(e2.len(), 2);
    }

    #[test]
    fn constant_examples() {
        let pi = std::f64::consts::PI;
        assert!((tc_constant(1) - c(0.0, 1.0 / (2.0 * pi))).norm() < 1e-15);
        assert!((tc_constant(1) - c(-1.0, 0.0) / c(0.0, 2.0 * pi)).norm() < 1e-15);
        assert!((tc_constant(2) - c(-1.0 / (24.0 * pi * pi), 0.0)).norm() < 1e-15);
        for k in 1..=8u32 {
            let (tc, tch) = form_constants(k);
            let sign = if k % 2 == 1 { 1 } else { -1 };
            assert_eq!(tc.coefficient, tch.coefficient * Ratio::from_integer(sign * factorial(k - 1)));
            // c_k's p_k coefficient over ch_k's (which is 1/k!)
            assert_eq!(
                newton_linear_coefficient(k) * Ratio::from_integer(factorial(k)),
                Ratio::from_integer(sign * factorial(k - 1))
            );
        }
    }
}
