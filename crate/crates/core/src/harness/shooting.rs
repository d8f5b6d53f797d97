//! Shooting-method oracle for the hyperbolic BVP: integrate the IVP from `(x0, y0)` with its
//! own RK4 stepper and solve `y(τ; y0) = y1` for `y0` by Newton with a finite-difference
//! Jacobian. Shares nothing with the Picard solver beyond the vector field.

use crate::bvp::{BvpError, HyperbolicSystem};
use crate::linalg::{expm, RMat, RVec};

#[derive(Debug, Clone, PartialEq)]
pub struct ShootingSolution {
    pub y0: RVec,
    pub x1: RVec,
    /// `|y(τ; y0) − y1|`
    pub residual: f64,
    pub iterations: usize,
}

fn rk4(system: &HyperbolicSystem, x: &RVec, y: &RVec, h: f64) -> (RVec, RVec) {
    let f = |x: &RVec, y: &RVec| system.field(x, y);
    let (k1x, k1y) = f(x, y);
    let (k2x, k2y) = f(&(x + &k1x * (h / 2.0)), &(y + &k1y * (h / 2.0)));
    let (k3x, k3y) = f(&(x + &k2x * (h / 2.0)), &(y + &k2y * (h / 2.0)));
    let (k4x, k4y) = f(&(x + &k3x * h), &(y + &k3y * h));
    (x + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0), y + (k1y + k2y * 2.0 + k3y * 2.0 + k4y) * (h / 6.0))
}

/// States at each of `times` (increasing, starting at 0), with `substeps` RK4 steps between
/// consecutive times.
pub fn sample_ivp(system: &HyperbolicSystem, x0: &RVec, y0: &RVec, times: &[f64], substeps: usize) -> Vec<(RVec, RVec)> {
    let mut out = Vec::with_capacity(times.len());
    let (mut x, mut y) = (x0.clone(), y0.clone());
    let mut t = 0.0;
    for &target in times {
        let h = (target - t) / substeps as f64;
        if h != 0.0 {
            for _ in 0..substeps {
                (x, y) = rk4(system, &x, &y, h);
            }
        }
        t = target;
        out.push((x.clone(), y.clone()));
    }
    out
}

fn endpoint(system: &HyperbolicSystem, x0: &RVec, y0: &RVec, tau: f64, steps: usize) -> (RVec, RVec) {
    sample_ivp(system, x0, y0, &[tau], steps).pop().expect("one sample")
}

/// Solves for `y0` with `y(τ; x0, y0) = y1`, starting from the linear guess `e^{−τL⁺} y1`.
pub fn shoot(system: &HyperbolicSystem, x0: &RVec, y1: &RVec, tau: f64, step: f64) -> Result<ShootingSolution, BvpError> {
    let u = system.u();
    if x0.len() != system.s() || y1.len() != u || !(tau >= 0.0) || !(step > 0.0) {
        return Err(BvpError::InvalidProblem("shooting: bad dimensions, tau or step".into()));
    }
    let steps = ((tau / step).ceil() as usize).max(1);
    let mut y0 = expm(&(system.lplus() * -tau)) * y1;
    let h = 1e-7;
    for iteration in 0..60 {
        let (x1, yt) = endpoint(system, x0, &y0, tau, steps);
        let r = &yt - y1;
        if !r.iter().all(|v| v.is_finite()) {
            return Err(BvpError::Blowup { time: tau });
        }
        if r.norm() < 1e-14 || iteration == 59 {
            return Ok(ShootingSolution { y0, x1, residual: r.norm(), iterations: iteration });
        }
        let mut jac = RMat::zeros(u, u);
        for j in 0..u {
            let (mut yp, mut ym) = (y0.clone(), y0.clone());
            yp[j] += h;
            ym[j] -= h;
            let col = (endpoint(system, x0, &yp, tau, steps).1 - endpoint(system, x0, &ym, tau, steps).1) / (2.0 * h);
            jac.set_column(j, &col);
        }
        let delta = jac.lu().solve(&r).ok_or(BvpError::NoConvergence { iterations: iteration, last_update: r.norm() })?;
        let step_norm = delta.norm();
        y0 -= delta;
        if step_norm < 1e-16 * (1.0 + y0.norm()) {
            let (x1, yt) = endpoint(system, x0, &y0, tau, steps);
            return Ok(ShootingSolution { residual: (&yt - y1).norm(), y0, x1, iterations: iteration + 1 });
        }
    }
    unreachable!("the loop returns on its last iteration")
}
