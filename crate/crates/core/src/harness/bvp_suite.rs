use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::config::{BvpParams, ExperimentConfig};
use super::report::{CheckRow, Provenance, Table, VerificationReport};
use super::shooting::{sample_ivp, shoot};
use super::{HarnessError, Result};
use crate::bvp::{
    dulac_continuity_table, dulac_map, endpoint_maps, estimate_constants, flow_convexity_witness, graph_closure_probe, ivp_bvp_identities, pair_norm, solve_bvp,
    transversality_scan, BvpError, BvpOptions, BvpProblem, CubeSpec, DulacOptions, HyperbolicSystem,
};
use crate::linalg::{expm, RVec};

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform sample of the Euclidean ball of radius `r` in `R^dim`.
fn random_ball<R: Rng>(dim: usize, r: f64, rng: &mut R) -> RVec {
    if dim == 0 {
        return RVec::zeros(0);
    }
    let v = RVec::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let radius = r * rng.random::<f64>().powf(1.0 / dim as f64);
    let norm = v.norm().max(f64::MIN_POSITIVE);
    v * (radius / norm)
}

/// Point on the sphere of radius `r` in `R^dim`.
fn random_sphere<R: Rng>(dim: usize, r: f64, rng: &mut R) -> RVec {
    let v = RVec::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let norm = v.norm();
    v * (r / norm)
}

/// `F ≡ 0` on a probe set of points in the cube.
fn is_linear(system: &HyperbolicSystem, eps: f64) -> bool {
    let mut rng = rng_for(0, 0);
    (0..16).all(|_| {
        let (x, y) = (random_ball(system.s(), eps, &mut rng), random_ball(system.u(), eps, &mut rng));
        let (f, g) = system.nonlinearity(&x, &y);
        f.amax() == 0.0 && g.amax() == 0.0
    })
}

fn streams(seed: u64, base: u64) -> impl Fn(usize) -> ChaCha8Rng {
    move |i| rng_for(seed, base + i as u64)
}

/// Solvability, bound, IVP/BVP identity, Dulac, transversality-scan and graph-closure suites
/// for a registry system.
pub fn run_bvp_experiment(config: &ExperimentConfig) -> Result<VerificationReport> {
    let started = Instant::now();
    let p: BvpParams = config.params()?;
    let tol = config.tolerances(&[
        ("closed_form", 1e-10),
        ("shooting", 1e-8),
        ("bound_slack", 1e-9),
        ("identity", 10.0 * BvpOptions::default().tol),
        ("dulac_closed_form", 1e-6),
        ("decay_slope_linear", 1e-3),
        ("tangency", 1e-8),
    ])?;
    let system = HyperbolicSystem::by_name(&p.system).ok_or_else(|| {
        HarnessError::Config(format!("unknown system {:?}; registry: {:?}", p.system, HyperbolicSystem::REGISTRY))
    })?;
    let [rx0, ry1, rtau, reps] = p.reference_problem;
    if !(p.epsilon > 0.0) || !(reps > 0.0) || !(rtau >= 0.0) {
        return Err(HarnessError::Config("bvp: epsilon and tau must be positive".into()));
    }
    let (s, u) = (system.s(), system.u());
    let eps = p.epsilon;
    let linear = is_linear(&system, eps.max(reps));
    let consts = estimate_constants(&system, eps, 17);
    let opts = BvpOptions { delta: Some(consts.delta), ..BvpOptions::default() };

    let mut report = VerificationReport::empty(config.experiment_id(), config.kind, config.seed);
    report.detail("system", system.name());
    report.detail("lambda1", consts.lambda1);
    report.detail("mu1", if consts.mu1.is_finite() { Some(consts.mu1) } else { None });
    report.detail("alpha", consts.alpha);
    report.detail("delta", consts.delta);
    report.detail("contraction_holds", consts.contraction_holds());

    // Reference problem: closed form for linear systems, shooting oracle otherwise.
    if s > 0 && u > 0 {
        let t = Instant::now();
        let x0 = RVec::from_element(s, rx0 / (s as f64).sqrt());
        let y1 = RVec::from_element(u, ry1 / (u as f64).sqrt());
        let problem = BvpProblem::new(x0.clone(), y1.clone(), rtau, reps)?;
        let ref_opts = BvpOptions { delta: None, ..BvpOptions::default() };
        let traj = solve_bvp(&system, &problem, &ref_opts)?;
        if linear {
            let (mut ex, mut ey): (f64, f64) = (0.0, 0.0);
            for ((t_i, x), y) in traj.times.iter().zip(&traj.xs).zip(&traj.ys) {
                ex = ex.max((x - expm(&(system.lminus() * *t_i)) * &x0).amax());
                ey = ey.max((y - expm(&(system.lplus() * (*t_i - rtau))) * &y1).amax());
            }
            report.push(CheckRow::at_most("closed_form_x_max_error", ex, 0.0, tol.get("closed_form"), Provenance::Trivial).timed(t));
            report.push(CheckRow::at_most("closed_form_y_max_error", ey, 0.0, tol.get("closed_form"), Provenance::Trivial).timed(t));
        } else {
            let oracle = shoot(&system, &x0, &y1, rtau, 1e-3)?;
            let (x1s, _) = traj.last();
            let (_, y0s) = traj.first();
            report.push(CheckRow::abs("shooting_y0star", y0s[0], oracle.y0[0], tol.get("shooting"), Provenance::Derived).timed(t));
            report.push(CheckRow::abs("shooting_x1star", x1s[0], oracle.x1[0], tol.get("shooting"), Provenance::Derived).timed(t));
            let along = sample_ivp(&system, &x0, &oracle.y0, &traj.times, 4);
            let worst = along
                .iter()
                .zip(traj.xs.iter().zip(&traj.ys))
                .map(|((xo, yo), (x, y))| pair_norm(&(x - xo), &(y - yo)))
                .fold(0.0, f64::max);
            report.push(CheckRow::at_most("shooting_trajectory_max_error", worst, 0.0, tol.get("shooting"), Provenance::Derived).timed(t));
            report.detail("shooting", serde_json::json!({"y0": oracle.y0[0], "x1": oracle.x1[0], "residual": oracle.residual}));
        }
        let t = Instant::now();
        let zero = solve_bvp(&system, &BvpProblem::new(x0.clone(), y1.clone(), 0.0, reps)?, &ref_opts)?;
        let ok = zero.first().0 == &x0 && zero.first().1 == &y1;
        report.push(CheckRow::flag("zero_tau_returns_data", ok, Provenance::Trivial).timed(t));
    }

    // Bound sup |x*, y*| ≤ 2|x0, y1| on random problems.
    if p.random_problems > 0 {
        let t = Instant::now();
        let rng = streams(config.seed, 0);
        let unchecked = BvpOptions { check_bound: false, ..opts.clone() };
        let ratios: Vec<std::result::Result<(f64, f64), String>> = (0..p.random_problems)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng(i);
                let x0 = random_ball(s, 0.999 * eps, &mut rng);
                let y1 = random_ball(u, 0.999 * eps, &mut rng);
                let tau = 4.0 * rng.random::<f64>();
                let problem = BvpProblem::new(x0, y1, tau, eps).map_err(|e| e.to_string())?;
                let traj = solve_bvp(&system, &problem, &unchecked).map_err(|e| e.to_string())?;
                Ok((traj.sup_norm(), 2.0 * problem.data_norm()))
            })
            .collect();
        let failures = ratios.iter().filter(|r| r.is_err()).count();
        let slack = tol.get("bound_slack");
        let violations = ratios.iter().flatten().filter(|(sup, bound)| *sup > bound + slack).count();
        let worst = ratios.iter().flatten().map(|(sup, bound)| sup / bound).fold(0.0, f64::max);
        report.push(CheckRow::exact("random_problems_unsolved", failures as f64, 0.0, Provenance::Paper).timed(t));
        report.push(CheckRow::exact("bound_violations", violations as f64, 0.0, Provenance::Paper).timed(t));
        report.detail("bound_worst_ratio", worst * 2.0);
    }

    // IVP/BVP identities in both directions.
    if p.identity_samples > 0 {
        let t = Instant::now();
        let rng = streams(config.seed, 1 << 20);
        let residuals: Vec<std::result::Result<f64, BvpError>> = (0..p.identity_samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng(i);
                let tau = 0.5 + 2.5 * rng.random::<f64>();
                let x0 = random_ball(s, 0.5 * eps, &mut rng);
                let y1 = random_ball(u, 0.5 * eps, &mut rng);
                let y0 = expm(&(system.lplus() * -tau)) * y1;
                Ok(ivp_bvp_identities(&system, &x0, &y0, tau, eps, &opts)?.max())
            })
            .collect();
        let failures = residuals.iter().filter(|r| r.is_err()).count();
        let worst = residuals.iter().flatten().copied().fold(0.0, f64::max);
        report.push(CheckRow::exact("identity_samples_unsolved", failures as f64, 0.0, Provenance::Paper).timed(t));
        report.push(CheckRow::at_most("ivp_bvp_identity_max", worst, 0.0, tol.get("identity"), Provenance::Paper).timed(t));
    }

    // Exit-cube structure: transversality of the walls.
    let t = Instant::now();
    let tangencies = transversality_scan(&system, eps, p.scan_grid);
    report.detail("tangencies", tangencies.iter().map(|h| (h.x.as_slice().to_vec(), h.y.as_slice().to_vec(), h.residual)).collect::<Vec<_>>());
    if system.is_symmetric() {
        report.push(CheckRow::exact("tangencies_symmetric_system", tangencies.len() as f64, 0.0, Provenance::Paper).timed(t));
    } else if s == 0 && u == 2 {
        let anti = tangencies.iter().map(|h| (h.y[0] + h.y[1]).abs()).fold(0.0, f64::max);
        report.push(CheckRow::flag("tangencies_found", !tangencies.is_empty(), Provenance::Paper).timed(t));
        report.push(CheckRow::at_most("tangency_antidiagonal_max", anti, 0.0, tol.get("tangency"), Provenance::Paper).timed(t));
    }

    if s > 0 && u > 0 && system.is_straightened() {
        decay_suite(&system, &p, config.seed, linear, &opts, &tol, &mut report)?;
        dulac_suite(&system, &p, config.seed, linear, &tol, &mut report)?;
    }
    report.finalize(started);
    Ok(report)
}

fn decay_suite(
    system: &HyperbolicSystem,
    p: &BvpParams,
    seed: u64,
    linear: bool,
    opts: &BvpOptions,
    tol: &super::Tolerances,
    report: &mut VerificationReport,
) -> Result<()> {
    if p.decay_points == 0 || p.decay_taus.len() < 2 {
        return Ok(());
    }
    let eps = p.epsilon;
    let (s, u) = (system.s(), system.u());
    let t = Instant::now();
    let rng = streams(seed, 2 << 20);
    let points: Vec<(RVec, RVec)> = (0..p.decay_points)
        .map(|i| {
            let mut rng = rng(i);
            (random_sphere(s, eps * (0.2 + 0.3 * rng.random::<f64>()), &mut rng), random_sphere(u, eps * (0.2 + 0.3 * rng.random::<f64>()), &mut rng))
        })
        .collect();
    let table = graph_closure_probe(system, eps, &points, &p.decay_taus, opts)?;
    report.detail("decay_slope_bound", table.slope_bound);
    report.push(CheckRow::at_most("decay_slope_worst", table.worst_slope(), table.slope_bound, 0.0, Provenance::Paper).timed(t));
    if linear {
        let (lambda1, _) = system.gaps();
        let worst = table.rows.iter().filter_map(|r| r.slope_x1).map(|sl| (sl + lambda1).abs()).fold(0.0, f64::max);
        report.push(CheckRow::at_most("decay_slope_linear_error", worst, 0.0, tol.get("decay_slope_linear"), Provenance::Trivial).timed(t));
    }
    let mut rows = Vec::new();
    for (i, row) in table.rows.iter().enumerate() {
        let mut plot = Vec::new();
        for (j, tau) in row.taus.iter().enumerate() {
            let (a, b) = (row.abs_x1[j], row.abs_y0[j]);
            rows.push(vec![i as f64, *tau, a, b, a.ln(), b.ln(), row.derivative_norm[j]]);
            plot.push(vec![*tau, a.ln(), b.ln()]);
        }
        report.plots.push(Table {
            name: format!("decay_p{i}"),
            columns: vec!["tau".into(), "log_abs_x1star".into(), "log_abs_y0star".into()],
            rows: plot,
        });
    }
    report.tables.push(Table {
        name: "decay".into(),
        columns: ["point", "tau", "abs_x1star", "abs_y0star", "log_abs_x1star", "log_abs_y0star", "derivative_norm"]
            .into_iter()
            .map(String::from)
            .collect(),
        rows,
    });

    let t = Instant::now();
    let y1 = RVec::from_element(u, 0.5 * eps / (u as f64).sqrt());
    let mut zero_ok = true;
    for &tau in &p.decay_taus {
        let (x1, _) = endpoint_maps(system, &BvpProblem::new(RVec::zeros(s), y1.clone(), tau, eps)?, opts)?;
        zero_ok &= x1.amax() == 0.0;
    }
    report.push(CheckRow::flag("zero_x0_gives_zero_x1star", zero_ok, Provenance::Trivial).timed(t));
    Ok(())
}

fn dulac_suite(
    system: &HyperbolicSystem,
    p: &BvpParams,
    seed: u64,
    linear: bool,
    tol: &super::Tolerances,
    report: &mut VerificationReport,
) -> Result<()> {
    let eps = p.epsilon;
    let (s, u) = (system.s(), system.u());
    let cube = CubeSpec::new(eps, 0.5 * eps)?;
    let dopts = DulacOptions::default();
    let e = |dim: usize, v: f64| {
        let mut out = RVec::zeros(dim);
        out[0] = v;
        out
    };

    let t = Instant::now();
    let (cx, cy) = (e(s, eps), e(u, -eps));
    let corner = dulac_map(system, &cube, &cx, &cy, &dopts)?;
    let ok = corner.time == 0.0 && corner.x == cx && corner.y == cy;
    report.push(CheckRow::flag("dulac_corner_identity", ok, Provenance::Paper).timed(t));
    let t = Instant::now();
    let rejected = matches!(dulac_map(system, &cube, &cx, &RVec::zeros(u), &dopts), Err(BvpError::OnStableManifold));
    report.push(CheckRow::flag("dulac_stable_manifold_rejected", rejected, Provenance::Trivial).timed(t));

    if linear && s == 1 && u == 1 {
        let t = Instant::now();
        let (lambda, mu) = (-system.lminus()[(0, 0)], system.lplus()[(0, 0)]);
        let (mut time_err, mut x_err): (f64, f64) = (0.0, 0.0);
        for y0 in [0.5, 0.1, 1e-2, 1e-4].map(|f| f * eps) {
            let exit = dulac_map(system, &cube, &e(1, eps), &e(1, y0), &dopts)?;
            time_err = time_err.max((exit.time - (eps / y0).ln() / mu).abs());
            x_err = x_err.max((exit.x[0] - eps * (y0 / eps).powf(lambda / mu)).abs());
        }
        report.push(CheckRow::at_most("dulac_linear_exit_time_error", time_err, 0.0, tol.get("dulac_closed_form"), Provenance::Derived).timed(t));
        report.push(CheckRow::at_most("dulac_linear_exit_point_error", x_err, 0.0, tol.get("dulac_closed_form"), Provenance::Derived).timed(t));
    }

    if p.dulac_samples > 0 {
        let t = Instant::now();
        let consts = estimate_constants(system, eps, 17);
        let rng = streams(seed, 3 << 20);
        let mut violations = 0;
        let mut convexity_failures = 0;
        for i in 0..p.dulac_samples {
            let mut rng = rng(i);
            let x0 = random_sphere(s, eps, &mut rng);
            let y0 = random_sphere(u, eps * 10f64.powf(-4.0 * rng.random::<f64>()), &mut rng);
            let exit = dulac_map(system, &cube, &x0, &y0, &dopts)?;
            if exit.x.norm() > x0.norm() * (-consts.rate() * exit.time).exp() + 1e-12 {
                violations += 1;
            }
            let q = (random_ball(s, eps, &mut rng), random_ball(u, eps, &mut rng));
            if !flow_convexity_witness(system, &cube, &q.0, &q.1, 2.0 * rng.random::<f64>(), 50)?.holds() {
                convexity_failures += 1;
            }
        }
        report.push(CheckRow::exact("dulac_contraction_violations", violations as f64, 0.0, Provenance::Paper).timed(t));
        report.push(CheckRow::exact("flow_convexity_failures", convexity_failures as f64, 0.0, Provenance::Paper).timed(t));
    }

    let t = Instant::now();
    let gammas = [1e-6, 1e-4, 1e-2, cube.gamma].map(|g| g * eps.min(1.0));
    let table = dulac_continuity_table(system, &cube, &gammas, 8, &dopts)?;
    let monotone = table.windows(2).all(|w| w[0].max_exit_x <= w[1].max_exit_x);
    let small = table[0].max_exit_x < cube.gamma / 10.0;
    report.push(CheckRow::flag("dulac_continuity_monotone", monotone && small, Provenance::Paper).timed(t));
    report.tables.push(Table {
        name: "dulac_continuity".into(),
        columns: vec!["gamma0".into(), "max_exit_x".into()],
        rows: table.iter().map(|r| vec![r.gamma0, r.max_exit_x]).collect(),
    });
    Ok(())
}
