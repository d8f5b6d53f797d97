use super::ivp::solve_ivp_steps;
use super::system::{pair_norm, HyperbolicSystem};
use super::{lagrange_weights, BvpError, Result, SolverStats, Trajectory};
use crate::linalg::{expm, RMat, RVec};

/// Data `x(0) = x0`, `y(τ) = y1` inside the cube of radius `epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct BvpProblem {
    pub x0: RVec,
    pub y1: RVec,
    pub tau: f64,
    pub epsilon: f64,
}

impl BvpProblem {
    pub fn new(x0: RVec, y1: RVec, tau: f64, epsilon: f64) -> Result<Self> {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(BvpError::InvalidProblem(format!("tau must be finite and nonnegative, got {tau}")));
        }
        if !(epsilon > 0.0) {
            return Err(BvpError::InvalidProblem(format!("epsilon must be positive, got {epsilon}")));
        }
        let norm = pair_norm(&x0, &y1);
        if !(norm < epsilon) {
            return Err(BvpError::InvalidProblem(format!("|x0,y1| = {norm} is not below epsilon = {epsilon}")));
        }
        Ok(Self { x0, y1, tau, epsilon })
    }

    pub fn data_norm(&self) -> f64 {
        pair_norm(&self.x0, &self.y1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BvpOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub nodes_per_unit: usize,
    /// Fail with `BoundViolated` when `sup |x*,y*| > 2|x0,y1|`.
    pub check_bound: bool,
    /// Precomputed `δ¹_{2ε}`; estimated on a coarse grid when absent.
    pub delta: Option<f64>,
}

impl Default for BvpOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 500, nodes_per_unit: 200, check_bound: true, delta: None }
    }
}

const BOUND_SLACK: f64 = 1e-9;
const HYPOTHESIS_GRID: usize = 9;

struct Propagators {
    h: f64,
    ex: RMat,
    ex_half: RMat,
    ey: RMat,
    ey_half: RMat,
    /// per interval: first node index and interpolation weights at the midpoint
    midpoint_stencils: Vec<(usize, Vec<f64>)>,
}

impl Propagators {
    fn new(system: &HyperbolicSystem, tau: f64, intervals: usize) -> Self {
        let h = tau / intervals as f64;
        let nodes = intervals + 1;
        let m = nodes.min(4);
        let midpoint_stencils = (0..intervals)
            .map(|i| {
                let j0 = i.saturating_sub(1).min(nodes - m);
                let local: Vec<f64> = (0..m).map(|k| (j0 + k) as f64).collect();
                (j0, lagrange_weights(&local, i as f64 + 0.5))
            })
            .collect();
        Self {
            h,
            ex: expm(&(system.lminus() * h)),
            ex_half: expm(&(system.lminus() * (h / 2.0))),
            ey: expm(&(system.lplus() * -h)),
            ey_half: expm(&(system.lplus() * (-h / 2.0))),
            midpoint_stencils,
        }
    }

    fn midpoint(&self, states: &[RVec], i: usize) -> RVec {
        let (j0, w) = &self.midpoint_stencils[i];
        let mut out = RVec::zeros(states[0].len());
        for (k, wk) in w.iter().enumerate() {
            out.axpy(*wk, &states[j0 + k], 1.0);
        }
        out
    }

    /// One Picard update: the nonlinearity is evaluated on the previous iterate,
    /// then `x` is swept forward from `x0` and `y` backward from `y1` with
    /// per-interval Simpson quadrature of the variation-of-constants integrals.
    fn sweep(&self, system: &HyperbolicSystem, xs: &[RVec], ys: &[RVec], x0: &RVec, y1: &RVec) -> (Vec<RVec>, Vec<RVec>) {
        let n = xs.len() - 1;
        let nodes: Vec<(RVec, RVec)> = xs.iter().zip(ys).map(|(x, y)| system.nonlinearity(x, y)).collect();
        let mids: Vec<(RVec, RVec)> =
            (0..n).map(|i| system.nonlinearity(&self.midpoint(xs, i), &self.midpoint(ys, i))).collect();
        let c = self.h / 6.0;
        let mut new_x = Vec::with_capacity(n + 1);
        new_x.push(x0.clone());
        for i in 0..n {
            let quad = &self.ex * &nodes[i].0 + &self.ex_half * &mids[i].0 * 4.0 + &nodes[i + 1].0;
            new_x.push(&self.ex * &new_x[i] + quad * c);
        }
        let mut new_y = vec![y1.clone(); n + 1];
        for i in (0..n).rev() {
            let quad = &nodes[i].1 + &self.ey_half * &mids[i].1 * 4.0 + &self.ey * &nodes[i + 1].1;
            new_y[i] = &self.ey * &new_y[i + 1] - quad * c;
        }
        (new_x, new_y)
    }
}

fn sup_distance(a: &[RVec], b: &[RVec], c: &[RVec], d: &[RVec]) -> f64 {
    a.iter()
        .zip(b)
        .zip(c.iter().zip(d))
        .map(|((x, xn), (y, yn))| pair_norm(&(x - xn), &(y - yn)))
        .fold(0.0, f64::max)
}

/// Solves the BVP by Picard iteration on its integral equations.
pub fn solve_bvp(system: &HyperbolicSystem, problem: &BvpProblem, opts: &BvpOptions) -> Result<Trajectory> {
    if problem.x0.len() != system.s() || problem.y1.len() != system.u() {
        return Err(BvpError::InvalidProblem("boundary data has the wrong dimensions".into()));
    }
    let (lambda1, mu1) = system.gaps();
    let delta = opts
        .delta
        .unwrap_or_else(|| delta_estimate(system, 2.0 * problem.epsilon, 1, HYPOTHESIS_GRID).value);
    let hypothesis_ok = Some(delta < lambda1.min(mu1));

    let tau = problem.tau;
    if tau == 0.0 {
        return Ok(Trajectory {
            times: vec![0.0],
            xs: vec![problem.x0.clone()],
            ys: vec![problem.y1.clone()],
            stats: SolverStats { hypothesis_ok, ..Default::default() },
        });
    }
    let intervals = ((opts.nodes_per_unit.max(1) as f64) * tau).ceil().max(1.0) as usize;
    let prop = Propagators::new(system, tau, intervals);

    // initial iterate: the linear solution
    let mut xs = Vec::with_capacity(intervals + 1);
    xs.push(problem.x0.clone());
    for i in 0..intervals {
        xs.push(&prop.ex * &xs[i]);
    }
    let mut ys = vec![problem.y1.clone(); intervals + 1];
    for i in (0..intervals).rev() {
        ys[i] = &prop.ey * &ys[i + 1];
    }

    let mut last_update = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let (nx, ny) = prop.sweep(system, &xs, &ys, &problem.x0, &problem.y1);
        last_update = sup_distance(&xs, &nx, &ys, &ny);
        xs = nx;
        ys = ny;
        if last_update < opts.tol {
            break;
        }
        if !last_update.is_finite() || last_update > super::BLOWUP_NORM {
            return Err(BvpError::NoConvergence { iterations, last_update });
        }
    }
    if !(last_update < opts.tol) {
        return Err(BvpError::NoConvergence { iterations, last_update });
    }

    let times = (0..=intervals).map(|i| i as f64 * prop.h).collect();
    let traj = Trajectory {
        times,
        xs,
        ys,
        stats: SolverStats { iterations, last_update, steps: intervals, hypothesis_ok },
    };
    if opts.check_bound {
        let sup = traj.sup_norm();
        let bound = 2.0 * problem.data_norm();
        if sup > bound + BOUND_SLACK {
            return Err(BvpError::BoundViolated { sup, bound });
        }
    }
    Ok(traj)
}

/// `(x₁*, y₀*) = (x*(τ), y*(0))`.
pub fn endpoint_maps(system: &HyperbolicSystem, problem: &BvpProblem, opts: &BvpOptions) -> Result<(RVec, RVec)> {
    let traj = solve_bvp(system, problem, opts)?;
    let (x1, _) = traj.last();
    let (_, y0) = traj.first();
    Ok((x1.clone(), y0.clone()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaEstimate {
    pub value: f64,
    /// grid spacing; the supremum is only resolved to this scale
    pub spacing: f64,
}

fn box_grid(dim: usize, eps: f64, n: usize) -> Vec<RVec> {
    let axis: Vec<f64> = (0..n).map(|i| -eps + 2.0 * eps * i as f64 / (n - 1) as f64).collect();
    let total = n.pow(dim as u32);
    (0..total)
        .map(|mut idx| {
            RVec::from_iterator(
                dim,
                (0..dim).map(|_| {
                    let v = axis[idx % n];
                    idx /= n;
                    v
                }),
            )
        })
        .collect()
}

/// Grid supremum over `|x,y| ≤ ε` of `Σ_{|m|≤k} |∂^m F|`, one term per multi-index.
/// First derivatives use the Jacobian (analytic or central differences), second
/// derivatives use central differences of the Jacobian.
pub fn delta_estimate(system: &HyperbolicSystem, epsilon: f64, k: u32, grid: usize) -> DeltaEstimate {
    let (s, u) = (system.s(), system.u());
    let d = s + u;
    let n = grid.max(8);
    let spacing = 2.0 * epsilon / (n - 1) as f64;
    if d == 0 {
        return DeltaEstimate { value: 0.0, spacing };
    }
    let h2 = 1e-4;
    let value = box_grid(d, epsilon, n)
        .into_iter()
        .filter(|z| {
            let (x, y) = (z.rows(0, s), z.rows(s, u));
            x.norm() <= epsilon * (1.0 + 1e-12) && y.norm() <= epsilon * (1.0 + 1e-12)
        })
        .map(|z| {
            let mut total = system.stacked_nonlinearity(&z).norm();
            if k >= 1 {
                let jac = system.nonlinearity_jacobian(&z);
                total += (0..d).map(|j| jac.column(j).norm()).sum::<f64>();
            }
            if k >= 2 {
                let hess: Vec<RMat> = (0..d)
                    .map(|l| {
                        let mut zp = z.clone();
                        let mut zm = z.clone();
                        zp[l] += h2;
                        zm[l] -= h2;
                        (system.nonlinearity_jacobian(&zp) - system.nonlinearity_jacobian(&zm)) / (2.0 * h2)
                    })
                    .collect();
                for l in 0..d {
                    for j in 0..=l {
                        total += hess[l].column(j).norm();
                    }
                }
            }
            total
        })
        .fold(0.0, f64::max);
    DeltaEstimate { value, spacing }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateConstants {
    pub lambda1: f64,
    pub mu1: f64,
    pub alpha: f64,
    pub delta: f64,
    pub spacing: f64,
}

impl EstimateConstants {
    pub fn contraction_holds(&self) -> bool {
        self.delta < self.alpha
    }

    /// The decay rate `α - δ`.
    pub fn rate(&self) -> f64 {
        self.alpha - self.delta
    }
}

/// `α = min(λ₁, μ₁)(1 - 1e-3)`, `δ = δ¹_{2ε}`.
pub fn estimate_constants(system: &HyperbolicSystem, epsilon: f64, grid: usize) -> EstimateConstants {
    let (lambda1, mu1) = system.gaps();
    let est = delta_estimate(system, 2.0 * epsilon, 1, grid);
    EstimateConstants { lambda1, mu1, alpha: lambda1.min(mu1) * (1.0 - 1e-3), delta: est.value, spacing: est.spacing }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResiduals {
    /// IVP from `(x0, y0)` against the BVP with data `(x0, y(τ))`.
    pub ivp_to_bvp: f64,
    /// BVP with data `(x0, y1)` against the IVP from `(x0, y0*)`.
    pub bvp_to_ivp: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        self.ivp_to_bvp.max(self.bvp_to_ivp)
    }
}

/// Checks that the IVP and BVP solution operators invert each other at every grid
/// time, in both directions.
pub fn ivp_bvp_identities(
    system: &HyperbolicSystem,
    x0: &RVec,
    y0: &RVec,
    tau: f64,
    epsilon: f64,
    opts: &BvpOptions,
) -> Result<IdentityResiduals> {
    let sub = 5;
    let intervals = ((opts.nodes_per_unit.max(1) as f64) * tau).ceil().max(1.0) as usize;
    let ivp_steps = if tau > 0.0 { intervals * sub } else { 0 };
    let compare = |ivp: &Trajectory, bvp: &Trajectory| -> f64 {
        bvp.xs
            .iter()
            .zip(&bvp.ys)
            .enumerate()
            .map(|(i, (x, y))| {
                let j = (i * sub).min(ivp.len() - 1);
                pair_norm(&(x - &ivp.xs[j]), &(y - &ivp.ys[j]))
            })
            .fold(0.0, f64::max)
    };
    let forward = solve_ivp_steps(system, x0, y0, tau, ivp_steps)?;
    let (_, y_tau) = forward.last();
    let bvp = solve_bvp(system, &BvpProblem::new(x0.clone(), y_tau.clone(), tau, epsilon)?, opts)?;
    let ivp_to_bvp = compare(&forward, &bvp);

    let bvp2 = solve_bvp(system, &BvpProblem::new(x0.clone(), y0.clone(), tau, epsilon)?, opts)?;
    let (_, y0_star) = bvp2.first();
    let back = solve_ivp_steps(system, x0, y0_star, tau, ivp_steps)?;
    let bvp_to_ivp = compare(&back, &bvp2);
    Ok(IdentityResiduals { ivp_to_bvp, bvp_to_ivp })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn scalar(v: f64) -> RVec {
        RVec::from_element(1, v)
    }

    #[test]
    fn linear_closed_form() {
        let sys = HyperbolicSystem::linear_diagonal();
        let p = BvpProblem::new(scalar(0.1), scalar(0.1), 2.0, 0.3).unwrap();
        let traj = solve_bvp(&sys, &p, &BvpOptions::default()).unwrap();
        for (i, t) in traj.times.iter().enumerate() {
            assert!((traj.xs[i][0] - 0.1 * (-t).exp()).abs() < 1e-10);
            assert!((traj.ys[i][0] - 0.1 * (t - 2.0).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_tau_is_boundary_data() {
        let sys = HyperbolicSystem::cubic_straightened();
        let p = BvpProblem::new(scalar(0.2), scalar(-0.1), 0.0, 0.3).unwrap();
        let traj = solve_bvp(&sys, &p, &BvpOptions::default()).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.first(), (&scalar(0.2), &scalar(-0.1)));
    }

    #[test]
    fn problem_validation() {
        assert!(BvpProblem::new(scalar(0.3), scalar(0.0), 1.0, 0.3).is_err());
        assert!(BvpProblem::new(scalar(0.1), scalar(0.0), -1.0, 0.3).is_err());
    }

    #[test]
    fn delta_of_zero_nonlinearity() {
        let sys = HyperbolicSystem::linear_diagonal();
        assert_eq!(delta_estimate(&sys, 0.5, 1, 16).value, 0.0);
    }

    #[test]
    fn delta_of_pure_cubic() {
        let f: super::super::Nonlinearity = Arc::new(|x, _| (x.map(|v| v * v * v), RVec::zeros(0)));
        let sys = HyperbolicSystem::new("cube", RMat::from_element(1, 1, -1.0), RMat::zeros(0, 0), f, None, true)
            .unwrap();
        let est = delta_estimate(&sys, 0.1, 1, 21);
        assert!((est.value - 0.031).abs() < 1e-8, "{}", est.value);
    }

    #[test]
    fn delta_of_straightened_system() {
        // symbolic oracle: the summed magnitudes
        // |xy|·sqrt(x²+y²) + sqrt(y⁴+4x²y²) + sqrt(4x²y²+x⁴)
        // increase in |x| and |y|, so the supremum sits at the corner
        let e: f64 = 0.3;
        let oracle = e * e * (2.0 * e * e).sqrt() + 2.0 * (e.powi(4) + 4.0 * e.powi(4)).sqrt();
        let sys = HyperbolicSystem::cubic_straightened();
        let est = delta_estimate(&sys, e, 1, 16);
        assert!((est.value - oracle).abs() / oracle < 0.02);
        assert!((oracle - 0.440676).abs() < 1e-6);
    }

    #[test]
    fn second_order_terms_are_added() {
        let sys = HyperbolicSystem::cubic_straightened();
        let k1 = delta_estimate(&sys, 0.3, 1, 9).value;
        let k2 = delta_estimate(&sys, 0.3, 2, 9).value;
        // at the corner the Hessian columns contribute |(0,-2y)| + |(2y,-2x)| + |(2x,0)|
        let e: f64 = 0.3;
        let extra = 2.0 * e + (8.0 * e * e).sqrt() + 2.0 * e;
        assert!((k2 - k1 - extra).abs() < 1e-6, "{k2} {k1}");
    }

    #[test]
    fn identities_hold_for_nonlinear_system() {
        let sys = HyperbolicSystem::cubic_straightened();
        let opts = BvpOptions { tol: 1e-12, ..Default::default() };
        let r = ivp_bvp_identities(&sys, &scalar(0.15), &scalar(0.01), 2.0, 0.3, &opts).unwrap();
        assert!(r.max() < 1e-9, "{r:?}");
    }
}
