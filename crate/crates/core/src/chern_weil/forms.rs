use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use super::gauge::{maurer_cartan, GaugeMap};
use super::{tc_constant, tch_constant, wedge_trace, ChernWeilError, Result};
use crate::linalg::RMat;

pub type CoeffFn = Arc<dyn Fn(&[f64]) -> Result<Vec<Complex64>> + Send + Sync>;

/// Increasing index sets of size `q` from `0..d`, in lexicographic order.
pub fn combinations(d: usize, q: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, d: usize, q: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == q {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            cur.push(i);
            rec(i + 1, d, q, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if q <= d {
        rec(0, d, q, &mut Vec::new(), &mut out);
    }
    out
}

pub fn mask_of(set: &[usize]) -> u32 {
    set.iter().fold(0, |m, i| m | (1 << i))
}

/// A complex-valued `q`-form on a `d`-dimensional chart, stored by its coefficients
/// on `dx^J` for increasing `J` (see [`combinations`]).
#[derive(Clone)]
pub struct FormField {
    dim: usize,
    degree: usize,
    coeffs: CoeffFn,
}

impl fmt::Debug for FormField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FormField").field("dim", &self.dim).field("degree", &self.degree).finish()
    }
}

impl FormField {
    pub fn new(dim: usize, degree: usize, coeffs: CoeffFn) -> Self {
        Self { dim, degree, coeffs }
    }

    pub fn zero(dim: usize, degree: usize) -> Self {
        let len = combinations(dim, degree).len();
        Self::new(dim, degree, Arc::new(move |_| Ok(vec![Complex64::new(0.0, 0.0); len])))
    }

    /// `density(b) dx^0 ∧ … ∧ dx^{d−1}`
    pub fn top(dim: usize, density: Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>) -> Self {
        Self::new(dim, dim, Arc::new(move |b| Ok(vec![density(b)])))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coefficients(&self, b: &[f64]) -> Result<Vec<Complex64>> {
        (self.coeffs)(b)
    }

    /// Coefficient on `dx^0 ∧ … ∧ dx^{d−1}`; only meaningful when `degree == dim`.
    pub fn top_coefficient(&self, b: &[f64]) -> Result<Complex64> {
        if self.degree != self.dim {
            return Err(ChernWeilError::DimensionMismatch(format!("degree {} on a {}-dimensional chart", self.degree, self.dim)));
        }
        Ok(self.coefficients(b)?[0])
    }

    /// `α(v_1, …, v_q) = Σ_J c_J det[v_i^{J_j}]`.
    pub fn evaluate(&self, b: &[f64], vectors: &[Vec<f64>]) -> Result<Complex64> {
        if vectors.len() != self.degree || vectors.iter().any(|v| v.len() != self.dim) {
            return Err(ChernWeilError::DimensionMismatch("need degree-many tangent vectors of chart length".into()));
        }
        let cs = self.coefficients(b)?;
        let q = self.degree;
        Ok(combinations(self.dim, q)
            .iter()
            .zip(cs)
            .map(|(set, cj)| {
                let det = if q == 0 { 1.0 } else { RMat::from_fn(q, q, |i, j| vectors[i][set[j]]).determinant() };
                cj * det
            })
            .sum())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let inner = self.coeffs.clone();
        Self::new(self.dim, self.degree, Arc::new(move |b| Ok(inner(b)?.into_iter().map(|v| v * s).collect())))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim || self.degree != other.degree {
            return Err(ChernWeilError::DimensionMismatch("forms of different shape".into()));
        }
        let (a, b) = (self.coeffs.clone(), other.coeffs.clone());
        Ok(Self::new(
            self.dim,
            self.degree,
            Arc::new(move |p| Ok(a(p)?.into_iter().zip(b(p)?).map(|(x, y)| x - y).collect())),
        ))
    }
}

/// `(dα)_K = Σ_{j ∈ K} (−1)^{pos(j)} ∂_j α_{K∖j}` with central differences of step `h`.
pub fn fd_exterior_derivative(field: &FormField, h: f64) -> FormField {
    let d = field.dim;
    let q = field.degree;
    let lower: HashMap<u32, usize> = combinations(d, q).iter().enumerate().map(|(i, s)| (mask_of(s), i)).collect();
    let upper = combinations(d, q + 1);
    let inner = field.coeffs.clone();
    FormField::new(
        d,
        q + 1,
        Arc::new(move |b| {
            let mut partials = Vec::with_capacity(d);
            for j in 0..d {
                let mut p = b.to_vec();
                let mut m = b.to_vec();
                p[j] += h;
                m[j] -= h;
                let (cp, cm) = (inner(&p)?, inner(&m)?);
                partials.push(cp.iter().zip(&cm).map(|(x, y)| (x - y) / (2.0 * h)).collect::<Vec<_>>());
            }
            Ok(upper
                .iter()
                .map(|set| {
                    set.iter()
                        .enumerate()
                        .map(|(pos, &j)| {
                            let rest: Vec<usize> = set.iter().copied().filter(|&i| i != j).collect();
                            let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
                            partials[j][lower[&mask_of(&rest)]] * sign
                        })
                        .sum()
                })
                .collect())
        }),
    )
}

fn constant_times_wedge_trace(g: &GaugeMap, k: u32, constant: Complex64) -> FormField {
    let q = 2 * k as usize - 1;
    let d = g.dim();
    if d < q {
        return FormField::zero(d, q);
    }
    let sets = combinations(d, q);
    let g = g.clone();
    FormField::new(
        d,
        q,
        Arc::new(move |b| {
            let omega = maurer_cartan(&g, b)?;
            sets.iter()
                .map(|set| {
                    let factors: Vec<_> = set.iter().map(|&i| omega[i].clone()).collect();
                    Ok(wedge_trace(&factors)? * constant)
                })
                .collect()
        }),
    )
}

/// `tr(∧^{2k−1} g⁻¹dg)` without a normalizing constant.
pub fn wedge_trace_form(g: &GaugeMap, k: u32) -> FormField {
    constant_times_wedge_trace(g, k, Complex64::new(1.0, 0.0))
}

/// `Tc_k = tc(k) · tr(∧^{2k−1} g⁻¹dg)`
pub fn tc_form(g: &GaugeMap, k: u32) -> FormField {
    constant_times_wedge_trace(g, k, tc_constant(k))
}

/// `Tch_k = tch(k) · tr(∧^{2k−1} g⁻¹dg)`
pub fn tch_form(g: &GaugeMap, k: u32) -> FormField {
    constant_times_wedge_trace(g, k, tch_constant(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, CMat, I};

    #[test]
    fn combination_order() {
        assert_eq!(combinations(3, 2), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(combinations(2, 3).len(), 0);
        assert_eq!(combinations(4, 0), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn evaluation_is_alternating() {
        let f = FormField::new(
            3,
            2,
            Arc::new(|b| Ok(vec![c(b[0], 1.0), c(2.0, b[1]), c(-1.0, b[2])])),
        );
        let b = [0.3, -0.2, 0.9];
        let (u, v) = (vec![1.0, 2.0, -0.5], vec![0.3, 0.1, 2.0]);
        let uv = f.evaluate(&b, &[u.clone(), v.clone()]).unwrap();
        let vu = f.evaluate(&b, &[v, u.clone()]).unwrap();
        assert!((uv + vu).norm() < 1e-12);
        assert!(f.evaluate(&b, &[u.clone(), u]).unwrap().norm() < 1e-12);
    }

    #[test]
    fn exterior_derivative_examples() {
        let constant = FormField::new(2, 1, Arc::new(|_| Ok(vec![c(1.0, 0.0), c(3.0, 2.0)])));
        let d = fd_exterior_derivative(&constant, 1e-5);
        assert_eq!(d.coefficients(&[0.1, 0.2]).unwrap(), vec![c(0.0, 0.0)]);
        // d(x dy − y dx) = 2 dx∧dy
        let rot = FormField::new(2, 1, Arc::new(|b| Ok(vec![c(-b[1], 0.0), c(b[0], 0.0)])));
        let d = fd_exterior_derivative(&rot, 1e-5);
        assert!((d.coefficients(&[0.4, -0.7]).unwrap()[0] - c(2.0, 0.0)).norm() < 1e-9);
        // d∘d = 0 on a non-linear 0-form
        let f = FormField::new(3, 0, Arc::new(|b| Ok(vec![c((b[0] * b[1]).sin() + b[2].exp() * b[0], 0.0)])));
        let dd = fd_exterior_derivative(&fd_exterior_derivative(&f, 1e-4), 1e-4);
        for v in dd.coefficients(&[0.2, 0.5, -0.3]).unwrap() {
            assert!(v.norm() < 1e-3);
        }
    }

    #[test]
    fn tc1_of_winding_map() {
        let g = GaugeMap::new("w", 1, 1, Arc::new(|b| CMat::from_element(1, 1, (I * 2.0 * b[0]).exp())));
        let f = tc_form(&g, 1);
        let v = f.coefficients(&[1.3]).unwrap()[0];
        assert!((v - c(-2.0 / (2.0 * std::f64::consts::PI), 0.0)).norm() < 1e-9);
        assert_eq!(tc_form(&g, 2).coefficients(&[0.0]).unwrap().len(), 0);
    }

    #[test]
    fn constant_map_gives_zero_field() {
        let g = GaugeMap::constant(3, CMat::identity(2, 2));
        assert!(tc_form(&g, 2).coefficients(&[0.1, 0.2, 0.3]).unwrap().iter().all(|v| v.norm() == 0.0));
    }
}
