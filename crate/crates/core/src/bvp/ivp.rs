use super::system::{pair_norm, split, stack, HyperbolicSystem};
use super::{BvpError, Result, SolverStats, Trajectory, BLOWUP_NORM};
use crate::linalg::RVec;

pub const DEFAULT_STEP: f64 = 1e-3;

pub(crate) fn stacked_field(system: &HyperbolicSystem, z: &RVec) -> RVec {
    let (x, y) = split(z, system.s());
    let (dx, dy) = system.field(&x, &y);
    stack(&dx, &dy)
}

/// One classical RK4 step of size `h` (negative `h` integrates backwards).
pub(crate) fn rk4_step(system: &HyperbolicSystem, z: &RVec, h: f64) -> RVec {
    let k1 = stacked_field(system, z);
    let k2 = stacked_field(system, &(z + &k1 * (h / 2.0)));
    let k3 = stacked_field(system, &(z + &k2 * (h / 2.0)));
    let k4 = stacked_field(system, &(z + &k3 * h));
    z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

pub fn solve_ivp(system: &HyperbolicSystem, x0: &RVec, y0: &RVec, t_end: f64) -> Result<Trajectory> {
    solve_ivp_with_step(system, x0, y0, t_end, DEFAULT_STEP)
}

/// Uniform RK4 from `(x0, y0)` to `t_end` with steps no longer than `step`.
pub fn solve_ivp_with_step(system: &HyperbolicSystem, x0: &RVec, y0: &RVec, t_end: f64, step: f64) -> Result<Trajectory> {
    if !(step > 0.0) || !t_end.is_finite() {
        return Err(BvpError::InvalidProblem(format!("bad step {step} or end time {t_end}")));
    }
    solve_ivp_steps(system, x0, y0, t_end, (t_end.abs() / step).ceil() as usize)
}

/// Exactly `n` RK4 steps of size `t_end / n`.
pub fn solve_ivp_steps(system: &HyperbolicSystem, x0: &RVec, y0: &RVec, t_end: f64, n: usize) -> Result<Trajectory> {
    if x0.len() != system.s() || y0.len() != system.u() {
        return Err(BvpError::InvalidProblem("initial state has the wrong dimensions".into()));
    }
    if !t_end.is_finite() {
        return Err(BvpError::InvalidProblem(format!("bad end time {t_end}")));
    }
    let h = if n == 0 { 0.0 } else { t_end / n as f64 };
    let mut times = Vec::with_capacity(n + 1);
    let mut xs = Vec::with_capacity(n + 1);
    let mut ys = Vec::with_capacity(n + 1);
    let mut z = stack(x0, y0);
    times.push(0.0);
    xs.push(x0.clone());
    ys.push(y0.clone());
    for i in 1..=n {
        z = rk4_step(system, &z, h);
        let (x, y) = split(&z, system.s());
        let t = i as f64 * h;
        if !(pair_norm(&x, &y) <= BLOWUP_NORM) {
            return Err(BvpError::Blowup { time: t });
        }
        times.push(t);
        xs.push(x);
        ys.push(y);
    }
    Ok(Trajectory { times, xs, ys, stats: SolverStats { steps: n, ..Default::default() } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{expm, RMat};

    #[test]
    fn linear_flow_matches_exponential() {
        let lm = RMat::from_row_slice(2, 2, &[-1.0, 0.3, 0.0, -2.0]);
        let lp = RMat::from_element(1, 1, 0.5);
        let sys = HyperbolicSystem::linear("lin", lm.clone(), lp.clone()).unwrap();
        let x0 = RVec::from_vec(vec![0.1, -0.2]);
        let y0 = RVec::from_vec(vec![0.05]);
        let traj = solve_ivp(&sys, &x0, &y0, 1.0).unwrap();
        let (x1, y1) = traj.last();
        assert!((x1 - expm(&lm) * &x0).amax() < 1e-10);
        assert!((y1 - expm(&lp) * &y0).amax() < 1e-10);
    }

    #[test]
    fn zero_time_returns_initial_state() {
        let sys = HyperbolicSystem::cubic_straightened();
        let x0 = RVec::from_element(1, 0.2);
        let y0 = RVec::from_element(1, -0.1);
        let traj = solve_ivp(&sys, &x0, &y0, 0.0).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.last(), (&x0, &y0));
    }

    #[test]
    fn fourth_order_convergence() {
        let sys = HyperbolicSystem::cubic_straightened();
        let x0 = RVec::from_element(1, 0.25);
        let y0 = RVec::from_element(1, 0.1);
        let reference = solve_ivp_with_step(&sys, &x0, &y0, 2.0, 1e-3).unwrap();
        let (xr, yr) = reference.last();
        let err = |h: f64| {
            let t = solve_ivp_with_step(&sys, &x0, &y0, 2.0, h).unwrap();
            let (x, y) = t.last();
            pair_norm(&(x - xr), &(y - yr))
        };
        let ratio = err(0.1) / err(0.05);
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
        assert!(err(1e-2) < 1e-8);
    }

    #[test]
    fn blowup_is_reported() {
        let sys = HyperbolicSystem::linear_diagonal();
        let err = solve_ivp(&sys, &RVec::zeros(1), &RVec::from_element(1, 1.0), 20.0);
        assert!(matches!(err, Err(BvpError::Blowup { .. })));
    }
}
