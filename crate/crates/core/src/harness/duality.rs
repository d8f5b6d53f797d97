use std::time::Instant;

use super::config::{DualityParams, ExperimentConfig};
use super::report::{CheckRow, Provenance, Status, VerificationReport};
use super::{HarnessError, Result};
use crate::chern_weil::tc_form;
use crate::geometry::{find_preimages, integrate_form, transversality_check, PreimageOptions, TransversalityOptions};
use crate::spectral::Flag;

/// `∫_B g*Tc_k` against the signed count of `g⁻¹(S(U_{k}))`, after a transversality pre-check.
/// A map that meets a deeper stratum yields `INVALID-HYPOTHESIS`.
pub fn run_duality_experiment(config: &ExperimentConfig) -> Result<VerificationReport> {
    let started = Instant::now();
    let p: DualityParams = config.params()?;
    let tol = config.tolerances(&[("duality", 1e-6), ("reference", 1e-9), ("imaginary", 1e-9)])?;
    let built = p.map.build()?;
    let (map, manifold) = (&built.map, &built.manifold);
    let d = manifold.dim();
    let k = p.k.unwrap_or(d.div_ceil(2));
    if k == 0 || 2 * k - 1 != d || map.dim() != d {
        return Err(HarnessError::Config(format!("Tc_{k} has degree {} but the domain has dimension {d}", 2 * k.max(1) - 1)));
    }
    if k > map.rank() {
        return Err(HarnessError::Config(format!("k = {k} exceeds the rank {}", map.rank())));
    }
    let flag = Flag::standard(map.rank());
    let mut report = VerificationReport::empty(config.experiment_id(), config.kind, config.seed);
    report.detail("map", &p.map);
    report.detail("manifold", &manifold.name);
    report.detail("k", k);

    let t = Instant::now();
    let topts = TransversalityOptions { samples: p.transversality_samples, seed: config.seed, ..Default::default() };
    let trans = transversality_check(map, manifold, &flag, &topts)?;
    report.push(CheckRow::exact("forbidden_stratum_hits", trans.forbidden_hits.len() as f64, 0.0, Provenance::Derived).timed(t));
    report.push(
        CheckRow::exact(
            "full_rank_preimages",
            trans.rank_checks.iter().filter(|r| r.rank == r.expected).count() as f64,
            trans.rank_checks.len() as f64,
            Provenance::Derived,
        )
        .timed(t),
    );
    let transversal = trans.passed;
    report.detail("transversality", &trans);

    let t = Instant::now();
    let integral = integrate_form(manifold, &tc_form(map, k as u32), &config.quadrature)?;
    let integral_time = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let popts = PreimageOptions { starts: p.preimage_starts, seed: config.seed, ..Default::default() };
    let search = find_preimages(map, manifold, &flag, k, &popts)?;
    let count = search.signed_count as f64;
    let difference = integral.re - count;

    let duality_ok = transversal && difference.abs() <= tol.get("duality");
    report.detail("integral_re", integral.re);
    report.detail("integral_im", integral.im);
    report.detail("signed_count", search.signed_count);
    report.detail("difference", difference);
    report.detail("pass", duality_ok);
    report.detail("preimages", &search);

    if !transversal {
        report.status = Status::InvalidHypothesis;
        report.finalize(started);
        return Ok(report);
    }
    let mut row = CheckRow::abs("integral_imaginary_part", integral.im, 0.0, tol.get("imaginary"), Provenance::Trivial);
    row.runtime_s = integral_time;
    report.push(row);
    report.push(CheckRow::abs("integral_vs_signed_count", integral.re, count, tol.get("duality"), Provenance::Paper).timed(t));
    // No converged start only matters when the integral says preimages should exist.
    let covered = search.warning.is_none() || integral.re.abs() < 0.5;
    report.push(CheckRow::flag("preimage_search_covered", covered, Provenance::Derived));
    if let Some(w) = &search.warning {
        report.detail("preimage_warning", w.as_str());
    }
    if let Some((expected, prov)) = built.expected {
        report.push(CheckRow::abs("integral_vs_expected", integral.re, expected, tol.get("reference"), prov));
        report.push(CheckRow::exact("signed_count_vs_expected", count, expected, prov));
    }
    report.finalize(started);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ExperimentKind;
    use serde_json::json;

    fn run(params: serde_json::Value) -> VerificationReport {
        run_duality_experiment(&ExperimentConfig::new(ExperimentKind::Duality, params)).unwrap()
    }

    #[test]
    fn constant_map_gives_zero_equals_zero() {
        let r = run(json!({"map": {"family": "constant", "n": 2}}));
        assert_eq!(r.status, Status::Pass, "{:?}", r.rows);
        assert_eq!(r.details["signed_count"], 0);
        assert!(r.details["integral_re"].as_f64().unwrap().abs() < 1e-12);
    }

    #[test]
    fn winding_three() {
        let r = run(json!({"map": {"family": "winding", "m": 3}}));
        assert_eq!(r.status, Status::Pass, "{:?}", r.rows);
        assert_eq!(r.details["signed_count"], -3);
        assert!((r.details["integral_re"].as_f64().unwrap() + 3.0).abs() < 1e-9);
        for key in ["integral_re", "integral_im", "signed_count", "difference", "pass"] {
            assert!(r.details.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn diagonal_control_is_invalid_hypothesis() {
        let r = run(json!({"map": {"family": "diag_powers", "powers": [1, 2]}}));
        assert_eq!(r.status, Status::InvalidHypothesis);
        assert_eq!(r.details["pass"], false);
        let hits = r.details["transversality"]["forbidden_hits"].as_array().unwrap();
        assert!(hits.iter().any(|h| h["locus"]["m"] == 1 && h["locus"]["j"] == 1));
    }

    #[test]
    fn degree_mismatch_is_a_config_error() {
        let cfg = ExperimentConfig::new(ExperimentKind::Duality, json!({"map": {"family": "winding", "m": 1}, "k": 2}));
        assert!(matches!(run_duality_experiment(&cfg), Err(HarnessError::Config(_))));
    }
}
