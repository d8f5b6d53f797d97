//! Gauss-Legendre rules and box quadrature with a deterministic parallel reduction.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Newton on P_n from the Tricomi-style initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d.is_finite() { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (x.iter().map(|t| mid + half * t).collect(), w.iter().map(|v| v * half).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum QuadratureSpec {
    GaussLegendre { order: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<(), String> {
        match *self {
            QuadratureSpec::GaussLegendre { order } if order < 4 => Err(format!("Gauss-Legendre order {order} < 4")),
            QuadratureSpec::MonteCarlo { samples, .. } if samples < 10_000 => {
                Err(format!("Monte Carlo sample count {samples} < 10^4"))
            }
            _ => Ok(()),
        }
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec::GaussLegendre { order: 48 }
    }
}

const MC_CHUNK: usize = 4096;

/// `∫_box f` under the given rule. Work is split by the first-axis node (or by Monte
/// Carlo chunk) and the partial sums are added in index order, so the result does not
/// depend on the number of threads. Each Monte Carlo chunk draws from its own ChaCha
/// stream.
pub fn integrate_box<E, F>(lower: &[f64], upper: &[f64], spec: &QuadratureSpec, f: F) -> Result<Complex64, E>
where
    E: Send,
    F: Fn(&[f64]) -> Result<Complex64, E> + Sync,
{
    let d = lower.len();
    if d == 0 {
        return f(&[]);
    }
    match *spec {
        QuadratureSpec::GaussLegendre { order } => {
            let rules: Vec<(Vec<f64>, Vec<f64>)> =
                (0..d).map(|i| gauss_legendre_on(order, lower[i], upper[i])).collect();
            let partials: Vec<Result<Complex64, E>> = (0..order)
                .into_par_iter()
                .map(|i0| {
                    let mut point = vec![0.0; d];
                    point[0] = rules[0].0[i0];
                    let w0 = rules[0].1[i0];
                    let inner = order.pow((d - 1) as u32);
                    let mut sum = Complex64::new(0.0, 0.0);
                    for mut idx in 0..inner {
                        let mut w = w0;
                        for (axis, rule) in rules.iter().enumerate().skip(1) {
                            let j = idx % order;
                            idx /= order;
                            point[axis] = rule.0[j];
                            w *= rule.1[j];
                        }
                        sum += f(&point)? * w;
                    }
                    Ok(sum)
                })
                .collect();
            let mut total = Complex64::new(0.0, 0.0);
            for p in partials {
                total += p?;
            }
            Ok(total)
        }
        QuadratureSpec::MonteCarlo { samples, seed } => {
            let volume: f64 = lower.iter().zip(upper).map(|(a, b)| b - a).product();
            let chunks = samples.div_ceil(MC_CHUNK);
            let partials: Vec<Result<Complex64, E>> = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(c as u64);
                    let count = MC_CHUNK.min(samples - c * MC_CHUNK);
                    let mut point = vec![0.0; d];
                    let mut sum = Complex64::new(0.0, 0.0);
                    for _ in 0..count {
                        for i in 0..d {
                            point[i] = lower[i] + (upper[i] - lower[i]) * rng.random::<f64>();
                        }
                        sum += f(&point)?;
                    }
                    Ok(sum)
                })
                .collect();
            let mut total = Complex64::new(0.0, 0.0);
            for p in partials {
                total += p?;
            }
            Ok(total * (volume / samples as f64))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_order_rules() {
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
        let (x, w) = gauss_legendre(3);
        assert!(x[1].abs() < 1e-15);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15);
        assert!((x[2] - 0.6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn exact_for_high_degree_polynomials() {
        for n in [5, 16, 48, 64] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let deg = 2 * n - 2;
            let q: f64 = x.iter().zip(&w).map(|(t, wt)| wt * t.powi(deg as i32)).sum();
            assert!((q - 2.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n}");
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn box_integrals() {
        let f = |p: &[f64]| -> Result<Complex64, ()> { Ok(Complex64::new(p[0] * p[1].cos(), p[2])) };
        let lo = [0.0, 0.0, -1.0];
        let hi = [1.0, std::f64::consts::FRAC_PI_2, 1.0];
        let gl = integrate_box(&lo, &hi, &QuadratureSpec::GaussLegendre { order: 8 }, f).unwrap();
        assert!((gl - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let mc = integrate_box(&lo, &hi, &QuadratureSpec::MonteCarlo { samples: 200_000, seed: 1 }, f).unwrap();
        assert!((mc - gl).norm() < 2e-2);
        let again = integrate_box(&lo, &hi, &QuadratureSpec::MonteCarlo { samples: 200_000, seed: 1 }, f).unwrap();
        assert_eq!(mc, again);
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::GaussLegendre { order: 3 }.validate().is_err());
        assert!(QuadratureSpec::MonteCarlo { samples: 100, seed: 0 }.validate().is_err());
        assert!(QuadratureSpec::default().validate().is_ok());
    }
}
