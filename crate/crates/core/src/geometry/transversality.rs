use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifold::ParamManifold;
use super::optimize::{minimize_interval, minimize_simplex};
use super::preimage::{defining_jacobian, find_preimages, PreimageOptions};
use super::Result;
use crate::chern_weil::GaugeMap;
use crate::linalg::{self, CMat};
use crate::spectral::Flag;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransversalityOptions {
    /// approximate number of grid samples on the chart box
    pub samples: usize,
    /// a refined minimum below this counts as a hit
    pub hit_tol: f64,
    /// a refined minimum below this (but not a hit) is reported as a near-hit
    pub near_tol: f64,
    /// relative singular-value floor for the Jacobian rank
    pub rank_tol: f64,
    /// grid minima refined per locus
    pub refine_limit: usize,
    pub seed: u64,
}

impl Default for TransversalityOptions {
    fn default() -> Self {
        Self { samples: 4096, hit_tol: 1e-6, near_tol: 0.05, rank_tol: 1e-6, refine_limit: 32, seed: 0 }
    }
}

/// Incidence locus `{U : dim ker(1+U) ∩ W_m ≥ j}`, of real codimension `j(2m + j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Locus {
    pub m: usize,
    pub j: usize,
    pub codim: usize,
}

pub fn incidence_loci(n: usize) -> Vec<Locus> {
    (0..n).flat_map(|m| (1..=n - m).map(move |j| Locus { m, j, codim: j * (2 * m + j) })).collect()
}

/// `σ_j((1+U)|_{W_m})`, the `j`-th smallest singular value; zero exactly on the locus.
pub fn locus_value(u: &CMat, flag: &Flag, locus: &Locus) -> f64 {
    let restricted = (linalg::identity(u.nrows()) + u) * flag.subspace(locus.m);
    linalg::singular_values_asc(&restricted)[locus.j - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocusHit {
    pub locus: Locus,
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankCheck {
    pub point: Vec<f64>,
    pub rank: usize,
    pub expected: usize,
    pub smallest_singular_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransversalityReport {
    pub dim: usize,
    pub samples: usize,
    pub passed: bool,
    /// hits of loci whose codimension exceeds `dim B`
    pub forbidden_hits: Vec<LocusHit>,
    pub near_hits: Vec<LocusHit>,
    /// Jacobian rank at the isolated preimages of the codimension-`dim B` stratum
    pub rank_checks: Vec<RankCheck>,
    /// loci of codimension `dim B` without a rank test (only `S(U_{k})` with `2k−1 = dim B` has one)
    pub unchecked: Vec<Locus>,
}

fn grid(manifold: &ParamManifold, samples: usize) -> (usize, Vec<f64>, Vec<Vec<f64>>) {
    let d = manifold.dim();
    let per = ((samples as f64).powf(1.0 / d as f64).ceil() as usize).max(2);
    let (lo, hi) = (manifold.lower(), manifold.upper());
    let spacing: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| (b - a) / per as f64).collect();
    let points = (0..per.pow(d as u32))
        .map(|mut idx| {
            (0..d)
                .map(|axis| {
                    let i = idx % per;
                    idx /= per;
                    lo[axis] + (i as f64 + 0.5) * spacing[axis]
                })
                .collect()
        })
        .collect();
    (per, spacing, points)
}

fn is_local_min(values: &[f64], idx: usize, per: usize, d: usize) -> bool {
    let mut stride = 1;
    for _ in 0..d {
        let i = (idx / stride) % per;
        if i > 0 && values[idx - stride] < values[idx] {
            return false;
        }
        if i + 1 < per && values[idx + stride] < values[idx] {
            return false;
        }
        stride *= per;
    }
    true
}

/// Scan `g` for incidence loci it must avoid or meet transversally: loci of codimension above
/// `dim B` must not be hit at all, and the preimages of the codimension-`dim B` stratum must have a
/// full-rank local defining map.
pub fn transversality_check(g: &GaugeMap, manifold: &ParamManifold, flag: &Flag, opts: &TransversalityOptions) -> Result<TransversalityReport> {
    let d = manifold.dim();
    let n = flag.rank();
    let loci = incidence_loci(n);
    let deep: Vec<Locus> = loci.iter().copied().filter(|l| l.codim > d).collect();
    let (per, spacing, points) = grid(manifold, opts.samples);
    let table: Vec<Vec<f64>> = points
        .par_iter()
        .map(|p| {
            let u = g.value(p);
            deep.iter().map(|l| locus_value(&u, flag, l)).collect()
        })
        .collect();

    let mut forbidden_hits = Vec::new();
    let mut near_hits: Vec<LocusHit> = Vec::new();
    let min_spacing = spacing.iter().copied().fold(f64::INFINITY, f64::min);
    for (li, locus) in deep.iter().enumerate() {
        let values: Vec<f64> = table.iter().map(|row| row[li]).collect();
        let mut minima: Vec<usize> = (0..values.len()).filter(|&i| is_local_min(&values, i, per, d)).collect();
        minima.sort_by(|a, b| values[*a].total_cmp(&values[*b]).then(a.cmp(b)));
        minima.truncate(opts.refine_limit);
        let f = |p: &[f64]| locus_value(&g.value(p), flag, locus);
        for idx in minima {
            let x0 = &points[idx];
            let (mut x, value) = if d == 1 {
                let (x, v) = minimize_interval(&|t| f(&[t]), x0[0] - spacing[0], x0[0] + spacing[0], x0[0], 1e-13)?;
                (vec![x], v)
            } else {
                let (x1, _) = minimize_simplex(&f, x0, 0.5 * min_spacing, 4000)?;
                minimize_simplex(&f, &x1, 1e-3 * min_spacing, 4000)?
            };
            manifold.canonicalize(&mut x);
            let list = if value < opts.hit_tol {
                &mut forbidden_hits
            } else if value < opts.near_tol {
                &mut near_hits
            } else {
                continue;
            };
            if !list.iter().any(|h: &LocusHit| h.locus == *locus && manifold.embedded_distance(&h.point, &x) < 1e-4) {
                list.push(LocusHit { locus: *locus, point: x, value });
            }
        }
    }

    let mut rank_checks = Vec::new();
    let mut unchecked = Vec::new();
    for locus in loci.iter().filter(|l| l.codim == d) {
        if locus.j == 1 && 2 * (locus.m + 1) - 1 == d {
            let k = locus.m + 1;
            let popts = PreimageOptions { seed: opts.seed, ..PreimageOptions::default() };
            for hit in find_preimages(g, manifold, flag, k, &popts)?.hits {
                let jac = defining_jacobian(g, flag, k, &hit.point)?;
                let sv = jac.singular_values();
                let floor = opts.rank_tol * sv.max().max(1.0);
                rank_checks.push(RankCheck {
                    rank: sv.iter().filter(|s| **s > floor).count(),
                    expected: d,
                    smallest_singular_value: sv.min(),
                    point: hit.point,
                });
            }
        } else {
            unchecked.push(*locus);
        }
    }
    let passed = forbidden_hits.is_empty() && rank_checks.iter().all(|r| r.rank == r.expected);
    Ok(TransversalityReport { dim: d, samples: points.len(), passed, forbidden_hits, near_hits, rank_checks, unchecked })
}
