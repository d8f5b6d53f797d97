use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, FormsParams};
use super::report::{CheckRow, Provenance, VerificationReport};
use super::{HarnessError, Result};
use crate::chern_weil::{
    beta_exact, beta_integral, fd_exterior_derivative, form_constants, maurer_cartan, tc_constant, tc_form,
    transgression_general, ConnectionFn, ConnectionPath, GaugeMap, Polynomial, FD_STEP_NESTED,
};
use crate::geometry::integrate_unstable;
use crate::linalg::{c, CMat};
use crate::maps;
use crate::spectral::Flag;

fn ratio_f64(r: Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `b ↦ U₀ q(b₀, b₁, b₂) · diag(e^{i b₃}, 1)` on a 4-dimensional chart.
fn four_parameter_map(seed: u64) -> GaugeMap {
    let s3 = maps::s3_left(&maps::generic_unitary(2, seed));
    GaugeMap::new(
        "s3-times-phase",
        4,
        2,
        Arc::new(move |b: &[f64]| {
            let mut d = CMat::identity(2, 2);
            d[(0, 0)] = c(0.0, b[3]).exp();
            s3.value(&b[..3]) * d
        }),
    )
}

/// Beta integrals, exact form-constant relations, unstable-manifold integrals, closedness
/// of the transgressed forms and the flat-path transgression.
pub fn run_forms_experiment(config: &ExperimentConfig) -> Result<VerificationReport> {
    let started = Instant::now();
    let p: FormsParams = config.params()?;
    let tol = config.tolerances(&[
        ("beta", 1e-12),
        ("unstable_1", 1e-9),
        ("unstable_2_relative", 1e-4),
        ("normalization", 1e-4),
        ("closedness", 1e-4),
        ("transgression", 1e-8),
    ])?;
    if !(1..=16).contains(&p.k_max) {
        return Err(HarnessError::Config(format!("forms: k_max must be in 1..=16, got {}", p.k_max)));
    }
    if let Some(k) = p.unstable.iter().find(|k| !(1..=2).contains(*k)) {
        return Err(HarnessError::Config(format!("forms: unstable integrals are available for k = 1, 2, not {k}")));
    }
    let mut report = VerificationReport::empty(config.experiment_id(), config.kind, config.seed);

    for k in 1..=p.k_max {
        let t = Instant::now();
        let exact = beta_exact(k);
        report.push(CheckRow::abs(format!("beta_integral_k{k}"), beta_integral(k), ratio_f64(exact), tol.get("beta"), Provenance::Paper).timed(t));
        let t = Instant::now();
        let (tc, tch) = form_constants(k);
        let factorial: i128 = (1..k as i128).product();
        let sign = if k % 2 == 1 { 1 } else { -1 };
        let related = tc.power == tch.power && tc.coefficient == tch.coefficient * Ratio::from_integer(sign * factorial);
        report.push(CheckRow::flag(format!("tc_equals_signed_factorial_tch_k{k}"), related, Provenance::Paper).timed(t));
    }

    let flag = Flag::standard(3);
    for &k in &p.unstable {
        let t = Instant::now();
        let value = integrate_unstable(k, &config.quadrature, &flag)?;
        let normalized = tc_constant(k as u32) * value;
        report.detail(&format!("unstable_{k}"), [value.re, value.im]);
        if k == 1 {
            report.push(CheckRow::abs("unstable_integral_k1_re", value.re, 0.0, tol.get("unstable_1"), Provenance::Paper).timed(t));
            report.push(CheckRow::abs("unstable_integral_k1_im", value.im, -2.0 * PI, tol.get("unstable_1"), Provenance::Paper).timed(t));
        } else {
            let target = -24.0 * PI * PI;
            report.push(CheckRow::rel("unstable_integral_k2", value.re, target, tol.get("unstable_2_relative"), Provenance::Derived).timed(t));
            report.push(CheckRow::abs("unstable_integral_k2_im", value.im, 0.0, tol.get("unstable_2_relative") * target.abs(), Provenance::Trivial).timed(t));
        }
        report.push(CheckRow::abs(format!("tc_times_unstable_k{k}"), (normalized - 1.0).norm(), 0.0, tol.get("normalization"), Provenance::Paper).timed(t));
    }

    if p.closedness_samples > 0 {
        let t = Instant::now();
        let g = four_parameter_map(config.seed);
        let d_tc = fd_exterior_derivative(&tc_form(&g, 2), FD_STEP_NESTED);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut worst: f64 = 0.0;
        for _ in 0..p.closedness_samples {
            let b: Vec<f64> = (0..4).map(|_| 0.2 + 1.2 * rng.random::<f64>()).collect();
            for coeff in d_tc.coefficients(&b)? {
                worst = worst.max(coeff.norm());
            }
        }
        report.push(CheckRow::at_most("tc2_closedness_residual", worst, 0.0, tol.get("closedness"), Provenance::Paper).timed(t));

        let t = Instant::now();
        let s3 = maps::s3_left(&maps::generic_unitary(2, config.seed));
        let g2 = s3.clone();
        let a1: ConnectionFn = Arc::new(move |b| maurer_cartan(&g2, b).expect("unitary map"));
        let a0: ConnectionFn = Arc::new(|_| vec![CMat::zeros(2, 2); 3]);
        let trans = transgression_general(&ConnectionPath::new(3, a0, a1), Polynomial::Chern, 2);
        let reference = tc_form(&s3, 2);
        let mut worst: f64 = 0.0;
        for _ in 0..p.closedness_samples {
            let b: Vec<f64> = vec![0.1 + 1.4 * rng.random::<f64>(), 6.0 * rng.random::<f64>(), 6.0 * rng.random::<f64>()];
            worst = worst.max((trans.top_coefficient(&b)? - reference.top_coefficient(&b)?).norm());
        }
        report.push(CheckRow::at_most("flat_path_transgression_vs_tc2", worst, 0.0, tol.get("transgression"), Provenance::Paper).timed(t));
    }
    report.finalize(started);
    Ok(report)
}
