//! The acceptance criteria A1–A14, each reduced to one pass/fail line. Criteria that share
//! an experiment reuse a single run of it.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use serde_json::{json, Value};

use super::config::{ExperimentConfig, ExperimentKind};
use super::report::{Status, VerificationReport};
use super::{builtin_experiments, run_experiment, Result};
use crate::chern_weil::tc_constant;
use crate::geometry::{coorientation_calibration, integrate_unstable};
use crate::linalg::c;
use crate::quadrature::QuadratureSpec;
use crate::spectral::Flag;

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: &'static str,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
    pub runtime_s: f64,
}

type Check = fn(&Cache) -> Result<(bool, String)>;

/// Runs of named experiments, shared between criteria.
#[derive(Default)]
pub struct Cache {
    runs: Mutex<HashMap<String, Arc<OnceLock<std::result::Result<Arc<VerificationReport>, String>>>>>,
}

impl Cache {
    fn run(&self, key: &str, config: impl FnOnce() -> ExperimentConfig) -> Result<Arc<VerificationReport>> {
        let cell = self.runs.lock().expect("cache lock").entry(key.to_string()).or_default().clone();
        cell.get_or_init(|| run_experiment(&config()).map(Arc::new).map_err(|e| e.to_string()))
            .clone()
            .map_err(|e| super::HarnessError::Config(format!("{key}: {e}")))
    }

    fn builtin(&self, id: &str) -> Result<Arc<VerificationReport>> {
        self.run(id, || builtin_experiments().into_iter().find(|c| c.id.as_deref() == Some(id)).expect("known builtin"))
    }
}

fn row_value(report: &VerificationReport, name: &str) -> Option<f64> {
    report.rows.iter().find(|r| r.name == name).map(|r| r.computed)
}

fn row_reference(report: &VerificationReport, name: &str) -> Option<f64> {
    report.rows.iter().find(|r| r.name == name).map(|r| r.reference)
}

/// All rows whose names start with one of `prefixes` exist and pass; the detail lists failures.
fn rows_pass(report: &VerificationReport, prefixes: &[&str]) -> (bool, Vec<String>) {
    let mut failures = Vec::new();
    for prefix in prefixes {
        let rows: Vec<_> = report.rows.iter().filter(|r| r.name.starts_with(prefix)).collect();
        if rows.is_empty() {
            failures.push(format!("{}: no row {prefix}", report.experiment_id));
        }
        failures.extend(rows.iter().filter(|r| !r.pass).map(|r| format!("{}: {} = {:e}", report.experiment_id, r.name, r.computed)));
    }
    (failures.is_empty(), failures)
}

fn forms_config(k_max: usize, unstable: Vec<usize>) -> ExperimentConfig {
    ExperimentConfig::new(ExperimentKind::Forms, json!({"k_max": k_max, "unstable": unstable, "closedness_samples": 0}))
}

fn a1(cache: &Cache) -> Result<(bool, String)> {
    let r = cache.run("forms-constants", || forms_config(8, vec![]))?;
    let worst = (1..=8).filter_map(|k| r.rows.iter().find(|row| row.name == format!("beta_integral_k{k}"))).map(|row| (row.computed - row.reference).abs()).fold(0.0, f64::max);
    let (ok, failures) = rows_pass(&r, &["beta_integral_k"]);
    let count = r.rows.iter().filter(|row| row.name.starts_with("beta_integral_k")).count();
    Ok((ok && count == 8, format!("k = 1..8, worst error {worst:.2e} (tol 1e-12) {}", failures.join("; "))))
}

fn a2(cache: &Cache) -> Result<(bool, String)> {
    let r = cache.run("forms-constants", || forms_config(8, vec![]))?;
    let (ok, failures) = rows_pass(&r, &["tc_equals_signed_factorial_tch_k"]);
    let count = r.rows.iter().filter(|row| row.name.starts_with("tc_equals_signed_factorial_tch_k")).count();
    Ok((ok && count == 8, format!("exact rational relation for k = 1..8 {}", failures.join("; "))))
}

fn a3(_: &Cache) -> Result<(bool, String)> {
    let value = integrate_unstable(1, &QuadratureSpec::default(), &Flag::standard(3))?;
    let err = (value - c(0.0, -2.0 * PI)).norm();
    Ok((err < 1e-9, format!("value {:.12} {:+.12}i, error {err:.2e} (tol 1e-9)", value.re, value.im)))
}

fn a4(_: &Cache) -> Result<(bool, String)> {
    let t = Instant::now();
    let value = integrate_unstable(2, &QuadratureSpec::GaussLegendre { order: 48 }, &Flag::standard(3))?;
    let elapsed = t.elapsed().as_secs_f64();
    let target = -24.0 * PI * PI;
    let rel = (value - c(target, 0.0)).norm() / target.abs();
    let normalized = (tc_constant(2) * value - 1.0).norm();
    let ok = rel < 1e-4 && normalized < 1e-4 && elapsed < 60.0;
    Ok((ok, format!("value {:.8}, relative error {rel:.2e}, |tc(2)·value − 1| = {normalized:.2e}, GL48 in {elapsed:.1}s", value.re)))
}

fn winding_config(m: i64) -> ExperimentConfig {
    ExperimentConfig { id: Some(format!("duality-winding{m}")), ..ExperimentConfig::new(ExperimentKind::Duality, json!({"map": {"family": "winding", "m": m}})) }
}

fn detail_f64(r: &VerificationReport, key: &str) -> f64 {
    r.details.get(key).and_then(Value::as_f64).unwrap_or(f64::NAN)
}

fn a5(cache: &Cache) -> Result<(bool, String)> {
    let calibration = coorientation_calibration();
    let mut ok = calibration == 1;
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for m in -3..=3 {
        let r = cache.run(&format!("duality-winding{m}"), || winding_config(m))?;
        let integral = detail_f64(&r, "integral_re");
        let count = r.details.get("signed_count").and_then(Value::as_i64);
        worst = worst.max((integral + m as f64).abs());
        if !((integral + m as f64).abs() < 1e-9 && count == Some(-m) && r.status == Status::Pass) {
            ok = false;
            bad.push(format!("m = {m}: integral {integral}, count {count:?}, {:?}", r.status));
        }
    }
    Ok((ok, format!("m = −3..3, worst |∫ + m| {worst:.2e} (tol 1e-9), calibration {calibration:+} {}", bad.join("; "))))
}

fn a6(cache: &Cache) -> Result<(bool, String)> {
    let t = Instant::now();
    let r = cache.builtin("duality-s3")?;
    let elapsed = t.elapsed().as_secs_f64();
    let integral = detail_f64(&r, "integral_re");
    let count = r.details.get("signed_count").and_then(Value::as_i64);
    let ok = (integral - 1.0).abs() < 1e-3 && count == Some(1) && r.status == Status::Pass && elapsed < 120.0;
    Ok((ok, format!("∫Tc₂ = {integral:.9}, signed count {}, {elapsed:.1}s, status {:?}", count.map_or("none".into(), |c| c.to_string()), r.status)))
}

fn a7(cache: &Cache) -> Result<(bool, String)> {
    let r = cache.builtin("duality-diag-control")?;
    let hits: Vec<f64> = r.details["transversality"]["forbidden_hits"]
        .as_array()
        .map(|a| a.iter().filter_map(|h| h["point"][0].as_f64()).collect())
        .unwrap_or_default();
    let near = |target: f64| hits.iter().any(|t| (t - target).abs() < 1e-6);
    let only_expected = hits.iter().all(|t| (t - PI / 2.0).abs() < 1e-6 || (t - 1.5 * PI).abs() < 1e-6);
    let ok = r.status == Status::InvalidHypothesis && near(PI / 2.0) && near(1.5 * PI) && only_expected;
    let shown: Vec<String> = hits.iter().map(|t| format!("{t:.9}")).collect();
    Ok((ok, format!("status {:?}, hits at θ = [{}]", r.status, shown.join(", "))))
}

fn a8(cache: &Cache) -> Result<(bool, String)> {
    let r = cache.builtin("flow-n3")?;
    let (ok, failures) =
        rows_pass(&r, &["unitarity_drift_max", "ode_residual_max", "monotonicity_violations", "limit_vs_classification_mismatches_random"]);
    Ok((
        ok && r.status == Status::Pass,
        format!(
            "100 U(3) seeds: drift {:.2e}, ODE residual {:.2e}, violations {}, mismatches {} {}",
            row_value(&r, "unitarity_drift_max").unwrap_or(f64::NAN),
            row_value(&r, "ode_residual_max").unwrap_or(f64::NAN),
            row_value(&r, "monotonicity_violations").unwrap_or(f64::NAN),
            row_value(&r, "limit_vs_classification_mismatches_random").unwrap_or(f64::NAN),
            failures.join("; ")
        ),
    ))
}

fn a9(cache: &Cache) -> Result<(bool, String)> {
    let mut checked = 0;
    let mut failures = Vec::new();
    for n in 1..=4usize {
        let r = cache.run(&format!("morse-n{n}"), || {
            ExperimentConfig::new(ExperimentKind::Flow, json!({"n": n, "seeds": 1, "stratum_seeds": 0, "semigroup_samples": 0, "t_max": 1.0, "morse_table": true}))
        })?;
        let rows: Vec<_> = r.rows.iter().filter(|row| row.name.starts_with("morse_index_")).collect();
        checked += rows.len();
        if rows.len() != 1 << n {
            failures.push(format!("n = {n}: {} rows", rows.len()));
        }
        failures.extend(rows.iter().filter(|row| !row.pass).map(|row| format!("{} = {}", row.name, row.computed)));
    }
    Ok((failures.is_empty(), format!("{checked} critical points for n = 1..4 {}", failures.join("; "))))
}

fn a10(cache: &Cache) -> Result<(bool, String)> {
    let linear = cache.builtin("bvp-linear-diagonal")?;
    let cubic = cache.builtin("bvp-cubic-straightened")?;
    let (ok1, f1) = rows_pass(&linear, &["closed_form_", "random_problems_unsolved", "bound_violations", "decay_slope_worst"]);
    let (ok2, f2) = rows_pass(&cubic, &["shooting_", "random_problems_unsolved", "bound_violations", "decay_slope_worst"]);
    let detail = format!(
        "closed form {:.1e}, shooting {:.1e}, bound violations {}+{} on 1000+1000 problems, worst decay slope {:.3} (bound {:.3}) {}",
        row_value(&linear, "closed_form_x_max_error").unwrap_or(f64::NAN).max(row_value(&linear, "closed_form_y_max_error").unwrap_or(f64::NAN)),
        row_value(&cubic, "shooting_trajectory_max_error").unwrap_or(f64::NAN),
        row_value(&linear, "bound_violations").unwrap_or(f64::NAN),
        row_value(&cubic, "bound_violations").unwrap_or(f64::NAN),
        row_value(&cubic, "decay_slope_worst").unwrap_or(f64::NAN),
        row_reference(&cubic, "decay_slope_worst").unwrap_or(f64::NAN),
        f1.into_iter().chain(f2).collect::<Vec<_>>().join("; ")
    );
    Ok((ok1 && ok2, detail))
}

fn a11(cache: &Cache) -> Result<(bool, String)> {
    let linear = cache.builtin("bvp-linear-diagonal")?;
    let cubic = cache.builtin("bvp-cubic-straightened")?;
    let (ok1, f1) = rows_pass(&linear, &["dulac_corner_identity", "dulac_linear_exit_point_error", "dulac_linear_exit_time_error", "dulac_stable_manifold_rejected"]);
    let (ok2, f2) = rows_pass(&cubic, &["dulac_corner_identity", "dulac_stable_manifold_rejected"]);
    let detail = format!(
        "corner identity, closed-form exit point error {:.1e} (tol 1e-6), stable-manifold input rejected {}",
        row_value(&linear, "dulac_linear_exit_point_error").unwrap_or(f64::NAN),
        f1.into_iter().chain(f2).collect::<Vec<_>>().join("; ")
    );
    Ok((ok1 && ok2, detail))
}

fn a12(cache: &Cache) -> Result<(bool, String)> {
    let linear = cache.builtin("bvp-linear-diagonal")?;
    let cubic = cache.builtin("bvp-cubic-straightened")?;
    let xtrans = cache.builtin("bvp-xtrans")?;
    let (ok1, f1) = rows_pass(&linear, &["tangencies_symmetric_system"]);
    let (ok2, f2) = rows_pass(&cubic, &["tangencies_symmetric_system"]);
    let (ok3, f3) = rows_pass(&xtrans, &["tangencies_found", "tangency_antidiagonal_max"]);
    let detail = format!(
        "symmetric systems: 0 tangencies; counterexample max |y1+y2| = {:.1e} (tol 1e-8) {}",
        row_value(&xtrans, "tangency_antidiagonal_max").unwrap_or(f64::NAN),
        f1.into_iter().chain(f2).chain(f3).collect::<Vec<_>>().join("; ")
    );
    Ok((ok1 && ok2 && ok3, detail))
}

fn a13(cache: &Cache) -> Result<(bool, String)> {
    let r = cache.builtin("reduction")?;
    let (ok, failures) = rows_pass(
        &r,
        &["reduction_unitarity_max", "identity_reduces_to_identity", "block_diagonal_reduces_to_t", "kernel_dimension_mismatches", "swap_"],
    );
    Ok((
        ok && r.status == Status::Pass,
        format!("unitarity residual {:.1e} on 1000 samples (tol 1e-9) {}", row_value(&r, "reduction_unitarity_max").unwrap_or(f64::NAN), failures.join("; ")),
    ))
}

/// Small configs of every kind, each run twice with the same seed.
fn a14(_: &Cache) -> Result<(bool, String)> {
    let configs = vec![
        ExperimentConfig::new(ExperimentKind::Duality, json!({"map": {"family": "winding", "m": 2}})),
        ExperimentConfig::new(ExperimentKind::Flow, json!({"n": 3, "seeds": 8, "stratum_seeds": 4})),
        ExperimentConfig::new(ExperimentKind::Bvp, json!({"system": "cubic-straightened", "random_problems": 50, "identity_samples": 10})),
        ExperimentConfig::new(ExperimentKind::Forms, json!({"k_max": 4, "unstable": [1], "closedness_samples": 2})),
        ExperimentConfig::new(ExperimentKind::Reduction, json!({"samples": 50, "kernel_samples": 10})),
    ];
    let mut mismatched = Vec::new();
    for mut config in configs {
        config.seed = 20_240_601;
        let a = run_experiment(&config)?;
        let b = run_experiment(&config)?;
        if a.canonical_json() != b.canonical_json() {
            mismatched.push(config.experiment_id());
        }
    }
    Ok((mismatched.is_empty(), format!("5 kinds, identical canonical reports {}", mismatched.join(", "))))
}

pub const CRITERIA: [(&str, &str, Check); 14] = [
    ("A1", "beta integrals", a1),
    ("A2", "form-constant relation", a2),
    ("A3", "unstable integral k = 1", a3),
    ("A4", "unstable integral k = 2", a4),
    ("A5", "duality on the circle", a5),
    ("A6", "duality on S^3", a6),
    ("A7", "non-transverse control", a7),
    ("A8", "flow suite", a8),
    ("A9", "Morse indices", a9),
    ("A10", "BVP suite", a10),
    ("A11", "Dulac map", a11),
    ("A12", "transversality scan", a12),
    ("A13", "symplectic reduction", a13),
    ("A14", "reproducibility", a14),
];

pub fn run_criterion(cache: &Cache, id: &'static str, title: &'static str, check: Check) -> CriterionResult {
    let t = Instant::now();
    let (pass, detail) = match check(cache) {
        Ok(outcome) => outcome,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionResult { id, title, pass, detail: detail.trim_end().to_string(), runtime_s: t.elapsed().as_secs_f64() }
}

/// Runs every criterion in order, handing each result to `on_result` as it completes.
pub fn run_acceptance(mut on_result: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    let cache = Cache::default();
    CRITERIA
        .iter()
        .map(|&(id, title, check)| {
            let r = run_criterion(&cache, id, title, check);
            on_result(&r);
            r
        })
        .collect()
}
