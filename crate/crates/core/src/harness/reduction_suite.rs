use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, ReductionParams};
use super::report::{CheckRow, Provenance, VerificationReport};
use super::{HarnessError, Result};
use crate::linalg::{self, c, CMat};
use crate::spectral::{symplectic_reduce, unitary_with_spectrum, Flag, ReductionSplit, SpectralError};

const KERNEL_TOL: f64 = 1e-7;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `T − Z(1+X)⁻¹Y` from the blocks of `V*UV` with `V = [W | W^⊥]`, using an explicit inverse.
fn block_formula(u: &CMat, split: &ReductionSplit) -> Option<CMat> {
    let (w, wc) = (split.w(), split.complement());
    let m = w.ncols();
    let v = CMat::from_columns(&w.column_iter().chain(wc.column_iter()).map(|c| c.into_owned()).collect::<Vec<_>>());
    let full = v.adjoint() * u * v;
    let r = full.nrows() - m;
    let x = full.view((0, 0), (m, m));
    let y = full.view((0, m), (m, r));
    let z = full.view((m, 0), (r, m));
    let t = full.view((m, m), (r, r));
    let inv = (linalg::identity(m) + x).try_inverse()?;
    Some(t - z * inv * y)
}

fn kernel_dim(u: &CMat) -> usize {
    linalg::null_space(&(linalg::identity(u.nrows()) + u), KERNEL_TOL).ncols()
}

/// Random `W` of dimension `m` in `C^n`.
fn random_split<R: Rng>(n: usize, m: usize, rng: &mut R) -> ReductionSplit {
    let frame = linalg::random_unitary(n, rng);
    ReductionSplit::new(frame.columns(0, m).into_owned(), frame.columns(m, n - m).into_owned()).expect("unitary columns")
}

/// Unitarity of `R^W` on random domain points, agreement with an independent block
/// evaluation, exact special cases, and preservation of `dim ker(1+U)`.
pub fn run_reduction_experiment(config: &ExperimentConfig) -> Result<VerificationReport> {
    let started = Instant::now();
    let p: ReductionParams = config.params()?;
    let tol = config.tolerances(&[("unitarity", 1e-9), ("block_formula", 1e-10), ("swap", 1e-14)])?;
    if !(2..=12).contains(&p.n_max) {
        return Err(HarnessError::Config(format!("reduction: n_max must be in 2..=12, got {}", p.n_max)));
    }
    let mut report = VerificationReport::empty(config.experiment_id(), config.kind, config.seed);

    let t = Instant::now();
    let samples: Vec<Result<(f64, f64, usize)>> = (0..p.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(config.seed, i as u64);
            let mut rejected = 0;
            loop {
                let n = rng.random_range(2..=p.n_max);
                let m = rng.random_range(1..n);
                let split = random_split(n, m, &mut rng);
                let u = linalg::random_unitary(n, &mut rng);
                match symplectic_reduce(&u, &split) {
                    Ok(r) => {
                        let other = block_formula(&u, &split).ok_or(SpectralError::NotInDomain(0.0))?;
                        return Ok((linalg::unitarity_residual(&r), linalg::max_abs(&(r - other)), rejected));
                    }
                    Err(SpectralError::NotInDomain(_)) => rejected += 1,
                    Err(e) => return Err(e.into()),
                }
            }
        })
        .collect();
    let samples: Vec<(f64, f64, usize)> = samples.into_iter().collect::<Result<_>>()?;
    let unitarity = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    let formula = samples.iter().map(|s| s.1).fold(0.0, f64::max);
    report.push(CheckRow::at_most("reduction_unitarity_max", unitarity, 0.0, tol.get("unitarity"), Provenance::Paper).timed(t));
    report.push(CheckRow::at_most("reduction_vs_block_formula_max", formula, 0.0, tol.get("block_formula"), Provenance::Derived).timed(t));
    report.detail("domain_rejections", samples.iter().map(|s| s.2).sum::<usize>());

    let t = Instant::now();
    let mut rng = rng_for(config.seed, 1 << 32);
    let (mut identity_ok, mut block_ok) = (true, true);
    for n in 2..=p.n_max {
        let flag = Flag::standard(n);
        for m in 1..n {
            let split = ReductionSplit::from_flag(&flag, m);
            identity_ok &= symplectic_reduce(&linalg::identity(n), &split)? == linalg::identity(m);
            let (tb, xb) = (linalg::random_unitary(m, &mut rng), linalg::random_unitary(n - m, &mut rng));
            let mut u = CMat::zeros(n, n);
            u.view_mut((0, 0), (m, m)).copy_from(&tb);
            u.view_mut((m, m), (n - m, n - m)).copy_from(&xb);
            match symplectic_reduce(&u, &split) {
                Ok(r) => block_ok &= r == tb,
                Err(SpectralError::NotInDomain(_)) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
    report.push(CheckRow::flag("identity_reduces_to_identity", identity_ok, Provenance::Trivial).timed(t));
    report.push(CheckRow::flag("block_diagonal_reduces_to_t", block_ok, Provenance::Trivial).timed(t));

    let t = Instant::now();
    let swap = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
    let e1 = CMat::from_row_slice(2, 1, &[c(1.0, 0.0), c(0.0, 0.0)]);
    let e2 = CMat::from_row_slice(2, 1, &[c(0.0, 0.0), c(1.0, 0.0)]);
    let split = ReductionSplit::new(e1, e2)?;
    let r = symplectic_reduce(&swap, &split)?;
    let independent = block_formula(&swap, &split).expect("1 + X = 1 is invertible");
    report.push(CheckRow::abs("swap_reduces_to_minus_one", (r[(0, 0)] - c(-1.0, 0.0)).norm(), 0.0, tol.get("swap"), Provenance::Derived).timed(t));
    report.push(CheckRow::abs("swap_independent_evaluation", (independent[(0, 0)] - c(-1.0, 0.0)).norm(), 0.0, tol.get("swap"), Provenance::Derived).timed(t));
    report.push(CheckRow::exact("swap_kernel_dimension", kernel_dim(&r) as f64, kernel_dim(&swap) as f64, Provenance::Derived).timed(t));

    let t = Instant::now();
    let mismatches: Vec<Result<bool>> = (0..p.kernel_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(config.seed, (1 << 33) + i as u64);
            let n = rng.random_range(2..=p.n_max);
            let j = rng.random_range(1..n);
            let m = rng.random_range(1..=n - j);
            let eigenvalues: Vec<_> = (0..n)
                .map(|a| if a < j { c(-1.0, 0.0) } else { c(0.0, rng.random_range(-2.5..2.5)).exp() })
                .collect();
            let u = unitary_with_spectrum(&eigenvalues, &linalg::random_unitary(n, &mut rng))?;
            let split = random_split(n, m, &mut rng);
            let r = symplectic_reduce(&u, &split)?;
            Ok(kernel_dim(&r) != kernel_dim(&u))
        })
        .collect();
    let mismatches = mismatches.into_iter().collect::<Result<Vec<bool>>>()?.into_iter().filter(|b| *b).count();
    report.push(CheckRow::exact("kernel_dimension_mismatches", mismatches as f64, 0.0, Provenance::Paper).timed(t));
    report.finalize(started);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ExperimentKind;
    use crate::harness::report::Status;
    use serde_json::json;

    #[test]
    fn small_suite_passes() {
        let cfg = ExperimentConfig::new(ExperimentKind::Reduction, json!({"samples": 100, "kernel_samples": 20}));
        let r = run_reduction_experiment(&cfg).unwrap();
        assert_eq!(r.status, Status::Pass, "{:#?}", r.failed_rows().collect::<Vec<_>>());
    }

    #[test]
    fn block_formula_agrees_on_a_fixed_case() {
        let mut rng = rng_for(3, 0);
        let split = random_split(4, 2, &mut rng);
        let u = linalg::random_unitary(4, &mut rng);
        let a = symplectic_reduce(&u, &split).unwrap();
        let b = block_formula(&u, &split).unwrap();
        assert!(linalg::max_abs(&(a - b)) < 1e-12);
    }
}
