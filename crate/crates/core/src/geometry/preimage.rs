use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifold::ParamManifold;
use super::{GeometryError, Result};
use crate::chern_weil::GaugeMap;
use crate::linalg::{self, CMat, RMat, RVec};
use crate::spectral::{classify_profile, Classification, kernel_profile, symplectic_reduce, Flag, IndexSet, KernelSign, ReductionSplit, DEFAULT_KERNEL_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreimageOptions {
    pub starts: usize,
    pub seed: u64,
    /// sup-norm of the defining map at an accepted root
    pub tol: f64,
    pub max_iter: usize,
    pub dedup_radius: f64,
    pub kernel_tol: f64,
}

impl Default for PreimageOptions {
    fn default() -> Self {
        Self { starts: 64, seed: 0, tol: 1e-12, max_iter: 60, dedup_radius: 1e-5, kernel_tol: DEFAULT_KERNEL_TOL }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreimageHit {
    pub point: Vec<f64>,
    pub sign: i32,
    pub residual: f64,
    /// unit vector spanning `ker(1 + g_b)`, as `(re, im)` pairs
    pub kernel_vector: Vec<(f64, f64)>,
    /// smallest singular value of the defining map's Jacobian over the largest
    pub conditioning: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreimageSearch {
    pub hits: Vec<PreimageHit>,
    pub signed_count: i64,
    pub starts: usize,
    pub converged_starts: usize,
    pub warning: Option<String>,
}

const JACOBIAN_STEP: f64 = 1e-7;

/// Local defining map of `S(U_{k})` near a point of the stratum. With `R = R^{W_k}(U)` the reduction
/// to `W_k^⊥` and `v = R e_k`, the stratum is `{v = −e_k}`; the coordinates are
/// `(Re v_1, Im v_1, …, Re v_{k−1}, Im v_{k−1}, Im v_k)` and the second value is `Re v_k`.
pub fn stratum_coordinates(u: &CMat, flag: &Flag, k: usize) -> Result<(Vec<f64>, f64)> {
    let r = symplectic_reduce(u, &ReductionSplit::from_flag(flag, k))?;
    let v = r.column(k - 1);
    let mut out = Vec::with_capacity(2 * k - 1);
    for z in v.iter().take(k - 1) {
        out.extend([z.re, z.im]);
    }
    out.push(v[k - 1].im);
    Ok((out, v[k - 1].re))
}

fn defining_map(g: &GaugeMap, flag: &Flag, k: usize, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    stratum_coordinates(&g.value(b), flag, k)
}

pub(crate) fn defining_jacobian(g: &GaugeMap, flag: &Flag, k: usize, b: &[f64]) -> Result<RMat> {
    let d = b.len();
    let mut jac = RMat::zeros(2 * k - 1, d);
    for j in 0..d {
        let (mut p, mut m) = (b.to_vec(), b.to_vec());
        p[j] += JACOBIAN_STEP;
        m[j] -= JACOBIAN_STEP;
        let (fp, _) = defining_map(g, flag, k, &p)?;
        let (fm, _) = defining_map(g, flag, k, &m)?;
        for i in 0..2 * k - 1 {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * JACOBIAN_STEP);
        }
    }
    Ok(jac)
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// `v + e_k` as `2k` real components; it vanishes exactly on the stratum.
fn full_residual(g: &GaugeMap, flag: &Flag, k: usize, b: &[f64]) -> Result<Vec<f64>> {
    let (mut f, re_last) = defining_map(g, flag, k, b)?;
    f.push(re_last + 1.0);
    Ok(f)
}

/// Damped Gauss-Newton on [`full_residual`] from `b0`; `None` when it stalls or leaves the
/// reduction's domain.
fn newton(g: &GaugeMap, manifold: &ParamManifold, flag: &Flag, k: usize, b0: Vec<f64>, opts: &PreimageOptions) -> Option<(Vec<f64>, f64)> {
    let d = b0.len();
    let mut b = b0;
    let mut f = full_residual(g, flag, k, &b).ok()?;
    for _ in 0..opts.max_iter {
        if sup(&f) < opts.tol {
            return Some((b, sup(&f)));
        }
        let mut jac = RMat::zeros(f.len(), d);
        for j in 0..d {
            let (mut p, mut m) = (b.clone(), b.clone());
            p[j] += JACOBIAN_STEP;
            m[j] -= JACOBIAN_STEP;
            let (fp, fm) = (full_residual(g, flag, k, &p).ok()?, full_residual(g, flag, k, &m).ok()?);
            for i in 0..f.len() {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * JACOBIAN_STEP);
            }
        }
        let rhs = RVec::from_iterator(f.len(), f.iter().map(|x| -x));
        let step = jac.svd(true, true).solve(&rhs, 1e-12).ok()?;
        let mut alpha = 1.0;
        loop {
            let mut trial: Vec<f64> = b.iter().zip(step.iter()).map(|(x, s)| x + alpha * s).collect();
            manifold.canonicalize(&mut trial);
            if let Ok(ft) = full_residual(g, flag, k, &trial) {
                if sup(&ft) < sup(&f) {
                    b = trial;
                    f = ft;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < 1e-4 {
                return None;
            }
        }
    }
    (sup(&f) < opts.tol).then_some((b, sup(&f)))
}

/// Sign fixing the coorientation of `S(U_{k})`: chosen once so that the reference loop
/// `θ ↦ diag(e^{iθ}, 1)` has signed count `−1 = ∫_{S¹} Tc₁`.
pub fn coorientation_calibration() -> i32 {
    static CAL: OnceLock<i32> = OnceLock::new();
    *CAL.get_or_init(|| {
        let g = crate::maps::diag_powers(&[1, 0]);
        let raw = search(&g, &ParamManifold::circle(), &Flag::standard(2), 1, &PreimageOptions::default(), 1)
            .expect("reference loop is transverse");
        assert_eq!(raw.signed_count.abs(), 1, "reference loop must meet the stratum once");
        -raw.signed_count as i32
    })
}

/// Signed points of `g⁻¹(S(U_{k}))` on a `(2k−1)`-dimensional parameter domain.
pub fn find_preimages(g: &GaugeMap, manifold: &ParamManifold, flag: &Flag, k: usize, opts: &PreimageOptions) -> Result<PreimageSearch> {
    search(g, manifold, flag, k, opts, coorientation_calibration())
}

fn search(g: &GaugeMap, manifold: &ParamManifold, flag: &Flag, k: usize, opts: &PreimageOptions, calibration: i32) -> Result<PreimageSearch> {
    if k == 0 || k > flag.rank() || g.rank() != flag.rank() {
        return Err(GeometryError::DimensionMismatch(format!("k = {k} with flag rank {} and map rank {}", flag.rank(), g.rank())));
    }
    if manifold.dim() != 2 * k - 1 || g.dim() != manifold.dim() {
        return Err(GeometryError::DimensionMismatch(format!(
            "isolated preimages of S(U_{{{k}}}) need a {}-dimensional domain, got {}",
            2 * k - 1,
            manifold.dim()
        )));
    }
    let (lo, hi) = (manifold.lower(), manifold.upper());
    let roots: Vec<Option<(Vec<f64>, f64)>> = (0..opts.starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(i as u64);
            let start: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| rng.random_range(*a..*b)).collect();
            newton(g, manifold, flag, k, start, opts)
        })
        .collect();
    let converged_starts = roots.iter().filter(|r| r.is_some()).count();
    let target = Classification::Stratum(IndexSet::singleton(k));
    let mut hits: Vec<PreimageHit> = Vec::new();
    for (point, residual) in roots.into_iter().flatten() {
        if hits.iter().any(|h| manifold.embedded_distance(&h.point, &point) < opts.dedup_radius) {
            continue;
        }
        let u = g.value(&point);
        if classify_profile(&kernel_profile(&u, flag, KernelSign::Plus, opts.kernel_tol)?) != target {
            continue;
        }
        let jac = defining_jacobian(g, flag, k, &point)?;
        let sv = jac.clone().singular_values();
        let conditioning = sv.min() / sv.max().max(f64::MIN_POSITIVE);
        let raw = jac.determinant().signum() * manifold.orientation();
        let kernel = linalg::null_space(&(linalg::identity(u.nrows()) + &u), 2.0 * opts.kernel_tol);
        if kernel.ncols() == 0 {
            continue;
        }
        let kernel_vector = kernel.column(0).iter().map(|z| (z.re, z.im)).collect();
        hits.push(PreimageHit { point, sign: raw as i32 * calibration, residual, kernel_vector, conditioning });
    }
    let signed_count = hits.iter().map(|h| h.sign as i64).sum();
    let warning = (converged_starts == 0).then(|| format!("no start out of {} converged; the count may be incomplete", opts.starts));
    Ok(PreimageSearch { hits, signed_count, starts: opts.starts, converged_starts, warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps;
    use std::f64::consts::PI;

    #[test]
    fn calibration_is_fixed_and_reference_count_is_minus_one() {
        let c = coorientation_calibration();
        assert_eq!(c, 1);
        let s = find_preimages(&maps::diag_powers(&[1, 0]), &ParamManifold::circle(), &Flag::standard(2), 1, &PreimageOptions::default()).unwrap();
        assert_eq!(s.signed_count, -1);
        assert!((s.hits[0].point[0] - PI).abs() < 1e-9);
    }

    #[test]
    fn constant_map_without_minus_one_has_no_hits() {
        let g = GaugeMap::constant(1, linalg::diag(&[linalg::c(0.0, 1.0), linalg::c(1.0, 0.0)]));
        let s = find_preimages(&g, &ParamManifold::circle(), &Flag::standard(2), 1, &PreimageOptions::default()).unwrap();
        assert!(s.hits.is_empty());
        assert_eq!(s.signed_count, 0);
    }

    #[test]
    fn winding_two_roots() {
        let v = maps::generic_unitary(2, 21);
        let s = find_preimages(&maps::winding(2, &v), &ParamManifold::circle(), &Flag::standard(2), 1, &PreimageOptions::default()).unwrap();
        let mut pts: Vec<f64> = s.hits.iter().map(|h| h.point[0]).collect();
        pts.sort_by(f64::total_cmp);
        assert_eq!(pts.len(), 2, "converged {} of {}", s.converged_starts, s.starts);
        assert!((pts[0] - PI / 2.0).abs() < 1e-9 && (pts[1] - 1.5 * PI).abs() < 1e-9, "{pts:?}");
        assert!(s.hits.iter().all(|h| h.sign == s.hits[0].sign));
        assert_eq!(s.signed_count, -2);
    }

    #[test]
    fn wrong_domain_dimension_is_rejected() {
        let g = maps::s3_left(&maps::generic_unitary(2, 1));
        assert!(find_preimages(&g, &ParamManifold::sphere3(), &Flag::standard(2), 1, &PreimageOptions::default()).is_err());
    }

    #[test]
    fn s3_single_preimage() {
        let u0 = maps::generic_unitary(2, 5);
        let g = maps::s3_left(&u0);
        let s = find_preimages(&g, &ParamManifold::sphere3(), &Flag::standard(2), 2, &PreimageOptions::default()).unwrap();
        assert_eq!(s.hits.len(), 1, "{s:?}");
        let hit = &s.hits[0];
        // U₀ Q(q) e_2 = −e_2
        let (p, i) = (&hit.point, linalg::I);
        let (a, b) = ((i * p[1]).exp() * p[0].cos(), (i * p[2]).exp() * p[0].sin());
        let col = u0 * crate::linalg::CVec::from_vec(vec![b, a.conj()]);
        assert!((col[1] + 1.0).norm() < 1e-9 && col[0].norm() < 1e-9);
        assert_eq!(s.signed_count, 1);
    }
}
