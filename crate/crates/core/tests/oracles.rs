//! Cross-checks against independent computations: a shooting solver for the BVP, a
//! finite-difference Hessian for Morse indices, closed-form preimage sets, and homotopy
//! invariance of the duality pairing.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mcl_core::bvp::{solve_bvp, BvpOptions, BvpProblem, HyperbolicSystem};
use mcl_core::chern_weil::{tc_form, GaugeMap};
use mcl_core::flow::{f_value, FlowConfig};
use mcl_core::geometry::{find_preimages, integrate_form, transversality_check, ParamManifold, PreimageOptions, TransversalityOptions};
use mcl_core::harness::shooting::shoot;
use mcl_core::linalg::{self, c, CMat, RMat, RVec};
use mcl_core::maps;
use mcl_core::quadrature::QuadratureSpec;
use mcl_core::spectral::{critical_point, morse_index, Flag, IndexSet, Weights, anti_hermitian_basis};

fn scalar(v: f64) -> RVec {
    RVec::from_element(1, v)
}

#[test]
fn picard_matches_shooting_on_random_cubic_problems() {
    let sys = HyperbolicSystem::cubic_straightened();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let opts = BvpOptions::default();
    let mut worst: f64 = 0.0;
    for _ in 0..40 {
        let x0 = rng.random_range(-0.09..0.09);
        let y1 = rng.random_range(-0.09..0.09);
        let tau = rng.random_range(0.2..4.0);
        let traj = solve_bvp(&sys, &BvpProblem::new(scalar(x0), scalar(y1), tau, 0.1).unwrap(), &opts).unwrap();
        let oracle = shoot(&sys, &scalar(x0), &scalar(y1), tau, 1e-3).unwrap();
        assert!(oracle.residual < 1e-12);
        worst = worst.max((traj.first().1[0] - oracle.y0[0]).abs()).max((traj.last().0[0] - oracle.x1[0]).abs());
    }
    assert!(worst < 1e-8, "worst endpoint disagreement {worst:e}");
}

#[test]
fn bvp_bound_holds_on_random_problems() {
    let opts = BvpOptions { check_bound: false, ..BvpOptions::default() };
    for sys in [HyperbolicSystem::linear_diagonal(), HyperbolicSystem::cubic_straightened()] {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let (x0, y1) = (rng.random_range(-0.099..0.099), rng.random_range(-0.099..0.099));
            let tau = rng.random_range(0.0..5.0);
            let p = BvpProblem::new(scalar(x0), scalar(y1), tau, 0.1).unwrap();
            let traj = solve_bvp(&sys, &p, &opts).unwrap();
            assert!(traj.sup_norm() <= 2.0 * p.data_norm() + 1e-12, "{}: sup {} data {}", sys.name(), traj.sup_norm(), p.data_norm());
        }
    }
}

/// Ascending directions of `f` at `U_I`, counted from a central-difference Hessian of
/// `s ↦ f(U_I e^{sH})` over a basis of anti-hermitian `H`.
fn fd_morse_index(cfg: &FlowConfig, set: &IndexSet) -> usize {
    let u = critical_point(set, &cfg.flag).unwrap();
    let basis: Vec<CMat> = anti_hermitian_basis(cfg.rank()).iter().map(|h| cfg.flag.from_flag_coords(h)).collect();
    let h = 1e-3;
    let f = |x: &CMat| f_value(cfg, &(&u * linalg::expm_c(x))).unwrap();
    let f0 = f(&CMat::zeros(cfg.rank(), cfg.rank()));
    let d = basis.len();
    let mut hess = RMat::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let pp = f(&((&basis[a] + &basis[b]) * c(h, 0.0)));
            let mm = f(&((&basis[a] + &basis[b]) * c(-h, 0.0)));
            let pm = f(&((&basis[a] - &basis[b]) * c(h, 0.0)));
            let mp = f(&((&basis[a] - &basis[b]) * c(-h, 0.0)));
            let v = if a == b { (pp - 2.0 * f0 + mm) / (4.0 * h * h) } else { (pp + mm - pm - mp) / (8.0 * h * h) };
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    SymmetricEigen::new(hess).eigenvalues.iter().filter(|&&x| x > 1e-4).count()
}

#[test]
fn morse_index_matches_finite_difference_hessian() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in 1..=4 {
        let mut weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
        weights.sort_by(f64::total_cmp);
        for i in 1..n {
            if weights[i] - weights[i - 1] < 0.2 {
                weights[i] = weights[i - 1] + 0.2;
            }
        }
        let flag = Flag::new(linalg::random_unitary(n, &mut rng)).unwrap();
        let cfg = FlowConfig::new(Weights::new(weights).unwrap(), flag).unwrap();
        for set in IndexSet::all(n) {
            let exact = morse_index(&set, &cfg.flag, &cfg.weights).unwrap();
            assert_eq!(exact, fd_morse_index(&cfg, &set), "n = {n}, I = {set}");
            assert_eq!(exact, set.entries().iter().map(|i| 2 * i - 1).sum::<usize>());
        }
    }
}

#[test]
fn circle_preimages_are_the_closed_form_roots() {
    let circle = ParamManifold::circle();
    let flag = Flag::standard(2);
    for m in [-4, -3, -1, 1, 2, 5] {
        let g = maps::winding(m, &maps::generic_unitary(2, 9));
        let search = find_preimages(&g, &circle, &flag, 1, &PreimageOptions::default()).unwrap();
        // e^{imθ} = −1
        let mut expected: Vec<f64> = (0..m.abs()).map(|j| ((2 * j + 1) as f64 * PI / m as f64).rem_euclid(2.0 * PI)).collect();
        expected.sort_by(f64::total_cmp);
        let mut found: Vec<f64> = search.hits.iter().map(|h| h.point[0].rem_euclid(2.0 * PI)).collect();
        found.sort_by(f64::total_cmp);
        assert_eq!(found.len(), expected.len(), "m = {m}: {found:?}");
        for (a, b) in found.iter().zip(&expected) {
            let d = (a - b).abs();
            assert!(d.min(2.0 * PI - d) < 1e-9, "m = {m}: {a} vs {b}");
        }
        assert_eq!(search.signed_count, -(m as i64));
        assert!(search.hits.iter().all(|h| h.sign == -m.signum()));
    }
}

fn random_anti_hermitian(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> CMat {
    let a = CMat::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    (&a - a.adjoint()) * c(0.5 * scale, 0.0)
}

/// `θ ↦ winding_m(θ) · exp(t(cos θ H₁ + sin 2θ H₂))`, homotopic to the winding loop.
fn deformed_loop(m: i32, t: f64, seed: u64) -> GaugeMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h1, h2) = (random_anti_hermitian(2, 1.0, &mut rng), random_anti_hermitian(2, 1.0, &mut rng));
    let base = maps::winding(m, &maps::generic_unitary(2, seed));
    GaugeMap::new(
        "deformed-winding",
        1,
        2,
        Arc::new(move |b: &[f64]| base.value(b) * linalg::expm_c(&((&h1 * c(b[0].cos(), 0.0) + &h2 * c((2.0 * b[0]).sin(), 0.0)) * c(t, 0.0)))),
    )
}

#[test]
fn duality_pairing_is_homotopy_invariant_on_the_circle() {
    let circle = ParamManifold::circle();
    let flag = Flag::standard(2);
    let quad = QuadratureSpec::GaussLegendre { order: 96 };
    for m in [-2, 1, 3] {
        for t in [0.0, 0.3, 0.8] {
            let g = deformed_loop(m, t, 17);
            let integral = integrate_form(&circle, &tc_form(&g, 1), &quad).unwrap();
            assert!((integral.re + m as f64).abs() < 1e-6, "m = {m}, t = {t}: {integral}");
            assert!(integral.im.abs() < 1e-6);
            let trans = transversality_check(&g, &circle, &flag, &TransversalityOptions::default()).unwrap();
            if trans.passed {
                let search = find_preimages(&g, &circle, &flag, 1, &PreimageOptions::default()).unwrap();
                assert_eq!(search.signed_count, -(m as i64), "m = {m}, t = {t}");
            }
        }
    }
}

#[test]
fn s3_pairing_is_invariant_under_left_translation_and_deformation() {
    let s3 = ParamManifold::sphere3();
    let quad = QuadratureSpec::GaussLegendre { order: 32 };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for seed in 0..3 {
        let base = maps::s3_left(&maps::generic_unitary(2, seed));
        let h = random_anti_hermitian(2, 0.4, &mut rng);
        let g = GaugeMap::new(
            "deformed-s3",
            3,
            2,
            Arc::new(move |b: &[f64]| base.value(b) * linalg::expm_c(&(&h * c(b[1].sin() * b[0].cos(), 0.0)))),
        );
        let integral = integrate_form(&s3, &tc_form(&g, 2), &quad).unwrap();
        assert!((integral.re - 1.0).abs() < 1e-3, "seed {seed}: {integral}");
        let search = find_preimages(&g, &s3, &Flag::standard(2), 2, &PreimageOptions { starts: 128, ..Default::default() }).unwrap();
        assert_eq!(search.signed_count, 1, "seed {seed}: {:?}", search.hits);
    }
}

#[test]
fn winding_zero_and_constant_maps_pair_to_zero() {
    let circle = ParamManifold::circle();
    let g = maps::winding(0, &maps::generic_unitary(2, 1));
    let integral = integrate_form(&circle, &tc_form(&g, 1), &QuadratureSpec::default()).unwrap();
    assert!(integral.norm() < 1e-14);
    let u = linalg::random_unitary(3, &mut ChaCha8Rng::seed_from_u64(8));
    let constant = GaugeMap::constant(1, u);
    let integral = integrate_form(&circle, &tc_form(&constant, 1), &QuadratureSpec::default()).unwrap();
    assert!(integral.norm() < 1e-14);
}
