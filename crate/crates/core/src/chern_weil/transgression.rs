use std::sync::Arc;

use num_complex::Complex64;

use super::algebra::{MatForm, ScalarForm};
use super::forms::{combinations, mask_of, FormField};
use super::{Result, FD_STEP};
use crate::linalg::{c, CMat};
use crate::quadrature::gauss_legendre_on;

/// Coefficients `A_i(b)` of a matrix-valued connection 1-form `A = Σ A_i dx^i`.
pub type ConnectionFn = Arc<dyn Fn(&[f64]) -> Vec<CMat> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polynomial {
    /// `c_k = (i/2π)^k e_k(F)`
    Chern,
    /// `ch_k = (i/2π)^k tr(F^k)/k!`
    ChernCharacter,
}

/// The affine path `A_t = (1−t)A₀ + tA₁` between two connections on a `dim`-dimensional chart.
#[derive(Clone)]
pub struct ConnectionPath {
    pub dim: usize,
    pub a0: ConnectionFn,
    pub a1: ConnectionFn,
    pub t_order: usize,
    /// step for the central differences in `dA`
    pub fd_step: f64,
}

impl ConnectionPath {
    pub fn new(dim: usize, a0: ConnectionFn, a1: ConnectionFn) -> Self {
        Self { dim, a0, a1, t_order: 16, fd_step: FD_STEP }
    }
}

fn exterior_derivative_of_connection(a: &ConnectionFn, dim: usize, b: &[f64], h: f64, offset: u32) -> MatForm {
    let mut partials: Vec<Vec<CMat>> = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut p = b.to_vec();
        let mut m = b.to_vec();
        p[i] += h;
        m[i] -= h;
        let (ap, am) = (a(&p), a(&m));
        partials.push(ap.iter().zip(&am).map(|(x, y)| (x - y) * c(1.0 / (2.0 * h), 0.0)).collect());
    }
    let n = a(b).first().map_or(0, |m| m.nrows());
    let mut out = MatForm::zero(n);
    for i in 0..dim {
        for j in (i + 1)..dim {
            let comp = &partials[i][j] - &partials[j][i];
            out.comps.insert((1 << (offset + i as u32)) | (1 << (offset + j as u32)), comp);
        }
    }
    out
}

/// `F = dA + A∧A` at `b`.
pub fn curvature(a: &ConnectionFn, dim: usize, b: &[f64], h: f64) -> MatForm {
    let one = MatForm::one_form(&a(b), 0);
    exterior_derivative_of_connection(a, dim, b, h, 0).add(&one.wedge(&one))
}

fn apply_polynomial(f: &MatForm, p: Polynomial, k: u32) -> ScalarForm {
    let base = Complex64::new(0.0, 1.0 / (2.0 * std::f64::consts::PI)).powu(k);
    let mut power = f.clone();
    let mut sums = vec![f.trace()];
    for _ in 1..k {
        power = power.wedge(f);
        sums.push(power.trace());
    }
    match p {
        Polynomial::ChernCharacter => {
            let kfact: f64 = (1..=k).map(|v| v as f64).product();
            sums[k as usize - 1].scale(base / kfact)
        }
        Polynomial::Chern => {
            // even forms commute, so Newton's recursion applies verbatim
            let mut e = vec![ScalarForm::one()];
            for m in 1..=k as usize {
                let mut acc = ScalarForm::default();
                for j in 1..=m {
                    let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                    acc = acc.add(&e[m - j].wedge(&sums[j - 1]).scale(c(sign / m as f64, 0.0)));
                }
                e.push(acc);
            }
            e[k as usize].scale(base)
        }
    }
}

/// `P(F(∇))` for `∇ = d + A`, a `2k`-form.
pub fn characteristic_form(a: ConnectionFn, dim: usize, p: Polynomial, k: u32, h: f64) -> FormField {
    let q = 2 * k as usize;
    let sets = combinations(dim, q);
    FormField::new(
        dim,
        q,
        Arc::new(move |b| {
            let f = curvature(&a, dim, b, h);
            let form = apply_polynomial(&f, p, k);
            Ok(sets.iter().map(|s| form.get(mask_of(s))).collect())
        }),
    )
}

/// `∫₀¹` of the `dt`-component of `P(F(∇̃))` for `∇̃ = d/dt + (1−t)∇₀ + t∇₁`, where
/// `F(∇̃) = dt∧(A₁−A₀) + dA_t + A_t∧A_t`. The `dt` factor is placed first.
pub fn transgression_general(path: &ConnectionPath, p: Polynomial, k: u32) -> FormField {
    let q = 2 * k as usize - 1;
    let dim = path.dim;
    let sets = combinations(dim, q);
    let (ts, ws) = gauss_legendre_on(path.t_order, 0.0, 1.0);
    let path = path.clone();
    FormField::new(
        dim,
        q,
        Arc::new(move |b| -> Result<Vec<Complex64>> {
            let (a0, a1) = ((path.a0)(b), (path.a1)(b));
            let d0 = exterior_derivative_of_connection(&path.a0, dim, b, path.fd_step, 1);
            let d1 = exterior_derivative_of_connection(&path.a1, dim, b, path.fd_step, 1);
            let diff: Vec<CMat> = a1.iter().zip(&a0).map(|(x, y)| x - y).collect();
            let n = a0.first().map_or(0, |m| m.nrows());
            let mut dt_part = MatForm::zero(n);
            for (i, m) in diff.iter().enumerate() {
                dt_part.comps.insert(1 | (1 << (i + 1)), m.clone());
            }
            let mut out = vec![Complex64::new(0.0, 0.0); sets.len()];
            for (t, w) in ts.iter().zip(&ws) {
                let at: Vec<CMat> = a0.iter().zip(&a1).map(|(x, y)| x * c(1.0 - t, 0.0) + y * c(*t, 0.0)).collect();
                let at_form = MatForm::one_form(&at, 1);
                let ft = d0.scale(c(1.0 - t, 0.0)).add(&d1.scale(c(*t, 0.0))).add(&at_form.wedge(&at_form));
                let total = dt_part.add(&ft);
                let form = apply_polynomial(&total, p, k);
                for (slot, s) in out.iter_mut().zip(&sets) {
                    *slot += form.get(1 | (mask_of(s) << 1)) * *w;
                }
            }
            Ok(out)
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chern_weil::{fd_exterior_derivative, maurer_cartan, tc_form, GaugeMap, FD_STEP_NESTED};
    use crate::linalg::I;

    fn su2_analytic() -> GaugeMap {
        let eval = |p: &[f64]| {
            let a = (I * p[1]).exp() * p[0].cos();
            let b = (I * p[2]).exp() * p[0].sin();
            CMat::from_row_slice(2, 2, &[a, -b.conj(), b, a.conj()])
        };
        let deriv = move |p: &[f64]| {
            let (ea, eb) = ((I * p[1]).exp(), (I * p[2]).exp());
            let (ct, st) = (p[0].cos(), p[0].sin());
            let m = |a: Complex64, b: Complex64| CMat::from_row_slice(2, 2, &[a, -b.conj(), b, a.conj()]);
            vec![m(-ea * st, eb * ct), m(I * ea * ct, c(0.0, 0.0)), m(c(0.0, 0.0), I * eb * st)]
        };
        GaugeMap::new("su2", 3, 2, Arc::new(eval)).with_derivative(Arc::new(deriv))
    }

    /// Small anti-hermitian polynomial connection on a `dim`-chart.
    fn poly_connection(dim: usize, seed: f64) -> ConnectionFn {
        Arc::new(move |b: &[f64]| {
            (0..dim)
                .map(|i| {
                    let s = seed + i as f64;
                    let x: f64 = b.iter().enumerate().map(|(j, v)| v * (0.3 + 0.1 * (j as f64) * s).sin()).sum();
                    let a = c(0.0, 0.2 * (s + x).sin());
                    let z = c(0.1 * x * x + 0.05 * s, 0.15 * (x * s).cos());
                    let d = c(0.0, -0.1 * x + 0.3 * s * s * b[(i + 1) % b.len()]);
                    CMat::from_row_slice(2, 2, &[a, -z.conj(), z, d])
                })
                .collect()
        })
    }

    #[test]
    fn equal_endpoints_give_zero() {
        let a = poly_connection(3, 0.4);
        let path = ConnectionPath::new(3, a.clone(), a);
        for p in [Polynomial::Chern, Polynomial::ChernCharacter] {
            let t = transgression_general(&path, p, 2);
            assert!(t.coefficients(&[0.1, 0.2, 0.3]).unwrap().iter().all(|v| v.norm() < 1e-15));
        }
    }

    #[test]
    fn flat_path_reproduces_tc_form() {
        let g = su2_analytic();
        let g2 = g.clone();
        let a1: ConnectionFn = Arc::new(move |b| maurer_cartan(&g2, b).unwrap());
        let a0: ConnectionFn = Arc::new(|_| vec![CMat::zeros(2, 2); 3]);
        let t = transgression_general(&ConnectionPath::new(3, a0, a1), Polynomial::Chern, 2);
        let reference = tc_form(&g, 2);
        for b in [[0.5, 0.3, -0.7], [1.1, 2.0, 0.4]] {
            let (x, y) = (t.coefficients(&b).unwrap()[0], reference.coefficients(&b).unwrap()[0]);
            assert!((x - y).norm() < 1e-8, "{x} {y}");
        }
    }

    #[test]
    fn transgression_identity_c1_on_two_chart() {
        let (a0, a1) = (poly_connection(2, 0.2), poly_connection(2, 1.7));
        let t = transgression_general(&ConnectionPath::new(2, a0.clone(), a1.clone()), Polynomial::Chern, 1);
        let dt = fd_exterior_derivative(&t, FD_STEP_NESTED);
        let rhs = characteristic_form(a1, 2, Polynomial::Chern, 1, FD_STEP)
            .sub(&characteristic_form(a0, 2, Polynomial::Chern, 1, FD_STEP))
            .unwrap();
        let b = [0.3, -0.4];
        let (l, r) = (dt.coefficients(&b).unwrap()[0], rhs.coefficients(&b).unwrap()[0]);
        assert!(r.norm() > 1e-3);
        assert!((l - r).norm() < 1e-4, "{l} {r}");
    }

    #[test]
    fn transgression_identity_degree_two_on_four_chart() {
        let (a0, a1) = (poly_connection(4, 0.9), poly_connection(4, -0.6));
        for p in [Polynomial::Chern, Polynomial::ChernCharacter] {
            let t = transgression_general(&ConnectionPath::new(4, a0.clone(), a1.clone()), p, 2);
            let dt = fd_exterior_derivative(&t, FD_STEP_NESTED);
            let rhs = characteristic_form(a1.clone(), 4, p, 2, FD_STEP)
                .sub(&characteristic_form(a0.clone(), 4, p, 2, FD_STEP))
                .unwrap();
            let b = [0.2, -0.1, 0.5, 0.3];
            let (l, r) = (dt.coefficients(&b).unwrap()[0], rhs.coefficients(&b).unwrap()[0]);
            assert!((l - r).norm() < 1e-4, "{p:?}: {l} {r}");
        }
    }
}
