//! Gauge map families used by the experiments: circle loops, `S³ → U(2)`, constants.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chern_weil::GaugeMap;
use crate::linalg::{self, c, CMat, I};

fn expi(x: f64) -> Complex64 {
    (I * x).exp()
}

/// `θ ↦ V diag(e^{imθ}, 1, …, 1) V*` on the circle.
pub fn winding(m: i32, v: &CMat) -> GaugeMap {
    let n = v.nrows();
    let (v1, v2) = (v.clone(), v.clone());
    let mf = m as f64;
    let eval = move |b: &[f64]| {
        let mut d = vec![c(1.0, 0.0); n];
        d[0] = expi(mf * b[0]);
        &v1 * linalg::diag(&d) * v1.adjoint()
    };
    let deriv = move |b: &[f64]| {
        let mut d = vec![c(0.0, 0.0); n];
        d[0] = I * mf * expi(mf * b[0]);
        vec![&v2 * linalg::diag(&d) * v2.adjoint()]
    };
    GaugeMap::new(format!("winding({m})"), 1, n, Arc::new(eval)).with_derivative(Arc::new(deriv))
}

/// `θ ↦ diag(e^{i p_1 θ}, …, e^{i p_n θ})`.
pub fn diag_powers(powers: &[i32]) -> GaugeMap {
    let p: Vec<f64> = powers.iter().map(|&x| x as f64).collect();
    let q = p.clone();
    let name = format!("diag_powers({powers:?})");
    GaugeMap::new(name, 1, p.len(), Arc::new(move |b| linalg::diag(&p.iter().map(|x| expi(x * b[0])).collect::<Vec<_>>())))
        .with_derivative(Arc::new(move |b| {
            vec![linalg::diag(&q.iter().map(|x| I * x * expi(x * b[0])).collect::<Vec<_>>())]
        }))
}

/// `a + bj ↦ [[a, b], [−b̄, ā]]`, the standard matrix form of a quaternion.
fn quaternion(a: Complex64, b: Complex64) -> CMat {
    CMat::from_row_slice(2, 2, &[a, b, -b.conj(), a.conj()])
}

/// `q ↦ U₀ Q(q)` from the Hopf chart of `S³` (`a = cos η e^{iξ₁}`, `b = sin η e^{iξ₂}`) into `U(2)`.
pub fn s3_left(u0: &CMat) -> GaugeMap {
    let (u1, u2) = (u0.clone(), u0.clone());
    let eval = move |p: &[f64]| &u1 * quaternion(expi(p[1]) * p[0].cos(), expi(p[2]) * p[0].sin());
    let deriv = move |p: &[f64]| {
        let (ea, eb) = (expi(p[1]), expi(p[2]));
        let (ct, st) = (p[0].cos(), p[0].sin());
        let zero = c(0.0, 0.0);
        // Q is real-linear in (a, b)
        vec![
            &u2 * quaternion(-ea * st, eb * ct),
            &u2 * quaternion(I * ea * ct, zero),
            &u2 * quaternion(zero, I * eb * st),
        ]
    };
    GaugeMap::new("s3_left", 3, 2, Arc::new(eval)).with_derivative(Arc::new(deriv))
}

/// Haar-random unitary from a fixed seed, used as a "generic" frame.
pub fn generic_unitary(n: usize, seed: u64) -> CMat {
    linalg::random_unitary(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(g: &GaugeMap, b: &[f64]) {
        let inner = g.clone();
        let fd = GaugeMap::new("fd", g.dim(), g.rank(), Arc::new(move |p| inner.value(p)));
        for (a, f) in g.partials(b).iter().zip(&fd.partials(b)) {
            assert!(linalg::max_abs(&(a - f)) < 1e-8);
        }
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let v = generic_unitary(2, 3);
        fd_check(&winding(3, &v), &[0.7]);
        fd_check(&diag_powers(&[1, -2, 4]), &[1.9]);
        fd_check(&s3_left(&generic_unitary(2, 5)), &[0.4, 1.2, -0.8]);
    }

    #[test]
    fn values_are_unitary() {
        let g = s3_left(&generic_unitary(2, 5));
        for b in [[0.0, 0.0, 0.0], [0.3, 2.0, 5.0], [1.5, -1.0, 0.2]] {
            assert!(linalg::unitarity_residual(&g.value(&b)) < 1e-12);
        }
        assert!(linalg::unitarity_residual(&winding(-4, &generic_unitary(3, 1)).value(&[2.2])) < 1e-12);
    }
}
