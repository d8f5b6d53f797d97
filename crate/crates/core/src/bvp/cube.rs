use std::f64::consts::PI;

use super::ivp::{rk4_step, solve_ivp_with_step};
use super::system::{split, stack, HyperbolicSystem};
use super::{BvpError, Result};
use crate::linalg::RVec;

/// The cube `C_ε = {|x| ≤ ε, |y| ≤ ε}` together with the exit threshold `γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubeSpec {
    pub epsilon: f64,
    pub gamma: f64,
}

impl CubeSpec {
    pub fn new(epsilon: f64, gamma: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !(gamma > 0.0) || gamma > epsilon {
            return Err(BvpError::InvalidCube(format!("need 0 < gamma <= epsilon, got gamma = {gamma}, epsilon = {epsilon}")));
        }
        Ok(Self { epsilon, gamma })
    }

    pub fn contains(&self, x: &RVec, y: &RVec) -> bool {
        let lim = self.epsilon * (1.0 + 1e-12);
        x.norm() <= lim && y.norm() <= lim
    }
}

/// `Inflow` is `∂⁺C_ε = {|x| = ε}`, `Outflow` is `∂⁻C_ε = {|y| = ε}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Wall {
    Inflow,
    Outflow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DulacOptions {
    pub step: f64,
    pub time_tol: f64,
    pub t_max: f64,
}

impl Default for DulacOptions {
    fn default() -> Self {
        Self { step: 1e-3, time_tol: 1e-10, t_max: 200.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DulacExit {
    pub x: RVec,
    pub y: RVec,
    pub time: f64,
    pub wall: Wall,
}

/// Integrates forward until the trajectory leaves the cube and locates the crossing
/// by bisecting the fraction of the last RK4 step.
fn first_exit(system: &HyperbolicSystem, eps: f64, x0: &RVec, y0: &RVec, opts: &DulacOptions) -> Result<DulacExit> {
    let s = system.s();
    let crossed = |z: &RVec| {
        let (x, y) = split(z, s);
        x.norm() > eps || y.norm() >= eps
    };
    let mut z = stack(x0, y0);
    let mut t = 0.0;
    let h = opts.step;
    while t < opts.t_max {
        let next = rk4_step(system, &z, h);
        if !next.iter().all(|v| v.is_finite()) {
            return Err(BvpError::Blowup { time: t + h });
        }
        if crossed(&next) {
            let (mut lo, mut hi) = (0.0, 1.0);
            let mut hit = next;
            while (hi - lo) * h > opts.time_tol {
                let mid = 0.5 * (lo + hi);
                let zm = rk4_step(system, &z, mid * h);
                if crossed(&zm) {
                    hi = mid;
                    hit = zm;
                } else {
                    lo = mid;
                }
            }
            let (x, y) = split(&hit, s);
            let wall = if (y.norm() - eps).abs() <= (x.norm() - eps).abs() { Wall::Outflow } else { Wall::Inflow };
            return Ok(DulacExit { x, y, time: t + hi * h, wall });
        }
        z = next;
        t += h;
    }
    Err(BvpError::NoExit(opts.t_max))
}

/// First-encounter map from `∂⁺C_ε` to `∂⁻C_ε`.
pub fn dulac_map(system: &HyperbolicSystem, cube: &CubeSpec, x0: &RVec, y0: &RVec, opts: &DulacOptions) -> Result<DulacExit> {
    let eps = cube.epsilon;
    if x0.len() != system.s() || y0.len() != system.u() {
        return Err(BvpError::InvalidProblem("start point has the wrong dimensions".into()));
    }
    if (x0.norm() - eps).abs() > 1e-9 * eps || y0.norm() > eps * (1.0 + 1e-9) {
        return Err(BvpError::NotOnInflowWall(format!("|x0| = {}, |y0| = {}, eps = {eps}", x0.norm(), y0.norm())));
    }
    if y0.norm() >= eps * (1.0 - 1e-12) {
        return Ok(DulacExit { x: x0.clone(), y: y0.clone(), time: 0.0, wall: Wall::Outflow });
    }
    if y0.norm() == 0.0 {
        return Err(BvpError::OnStableManifold);
    }
    let exit = first_exit(system, eps, x0, y0, opts)?;
    match exit.wall {
        Wall::Outflow => Ok(exit),
        Wall::Inflow => Err(BvpError::ExitsUpstream),
    }
}

/// Membership in the fundamental neighborhood `V_γ^ε`: points of `V₀^ε`, or points
/// whose forward trajectory exits through `∂⁻C_ε` with `|x₁| < γ`.
pub fn fundamental_membership(
    system: &HyperbolicSystem,
    cube: &CubeSpec,
    x: &RVec,
    y: &RVec,
    opts: &DulacOptions,
) -> Result<bool> {
    if !cube.contains(x, y) {
        return Err(BvpError::InvalidProblem("point is outside the cube".into()));
    }
    if x.norm() * y.norm() < 1e-14 {
        return Ok(true);
    }
    if y.norm() >= cube.epsilon {
        return Ok(x.norm() < cube.gamma);
    }
    let exit = first_exit(system, cube.epsilon, x, y, opts)?;
    match exit.wall {
        Wall::Outflow => Ok(exit.x.norm() < cube.gamma),
        Wall::Inflow => Err(BvpError::ExitsUpstream),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tangency {
    pub wall: Wall,
    pub x: RVec,
    pub y: RVec,
    /// `|⟨X₁, x⟩|` on the inflow wall, `|⟨X₂, y⟩|` on the outflow wall
    pub residual: f64,
}

const TANGENCY_TOL: f64 = 1e-8;

/// Point on the sphere of radius `r` in `Rᵃ` from hyperspherical angles.
fn sphere_point(angles: &[f64], a: usize, r: f64) -> RVec {
    let mut v = RVec::zeros(a);
    let mut prod = r;
    for i in 0..a - 1 {
        v[i] = prod * angles[i].cos();
        prod *= angles[i].sin();
    }
    v[a - 1] = prod;
    v
}

fn cartesian(dim: usize, axis: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    out
}

/// A one-parameter family of wall points `t ↦ (sphere part, ball part)`.
struct ScanLine {
    range: (f64, f64),
    periodic: bool,
    point: Box<dyn Fn(f64) -> (RVec, RVec)>,
}

/// Lines covering `S^{a-1}_ε × B^b_ε`: along the last sphere angle when `a ≥ 2`,
/// along the first ball coordinate when `a = 1`.
fn scan_lines(a: usize, b: usize, eps: f64, grid: usize) -> Vec<ScanLine> {
    let ball_axis: Vec<f64> = (0..grid).map(|i| -eps + 2.0 * eps * i as f64 / (grid - 1) as f64).collect();
    let mut lines = Vec::new();
    if a == 0 {
        return lines;
    }
    if a >= 2 {
        let polar_axis: Vec<f64> = (0..grid).map(|i| (i as f64 + 0.5) * PI / grid as f64).collect();
        let balls: Vec<RVec> = cartesian(b, &ball_axis)
            .into_iter()
            .map(RVec::from_vec)
            .filter(|p| p.norm() <= eps * (1.0 + 1e-12))
            .collect();
        for polar in cartesian(a - 2, &polar_axis) {
            for ball in &balls {
                let (polar, ball) = (polar.clone(), ball.clone());
                lines.push(ScanLine {
                    range: (0.0, 2.0 * PI),
                    periodic: true,
                    point: Box::new(move |t| {
                        let mut angles = polar.clone();
                        angles.push(t);
                        (sphere_point(&angles, a, eps), ball.clone())
                    }),
                });
            }
        }
    } else {
        for sign in [1.0, -1.0] {
            if b == 0 {
                lines.push(ScanLine {
                    range: (0.0, 0.0),
                    periodic: false,
                    point: Box::new(move |_| (RVec::from_element(1, sign * eps), RVec::zeros(0))),
                });
                continue;
            }
            for rest in cartesian(b - 1, &ball_axis) {
                let rest = RVec::from_vec(rest);
                let r2 = eps * eps - rest.norm_squared();
                if r2 <= 0.0 {
                    continue;
                }
                let r = r2.sqrt();
                lines.push(ScanLine {
                    range: (-r, r),
                    periodic: false,
                    point: Box::new(move |t| {
                        let ball = RVec::from_iterator(b, std::iter::once(t).chain(rest.iter().copied()));
                        (RVec::from_element(1, sign * eps), ball)
                    }),
                });
            }
        }
    }
    lines
}

fn refine_root(phi: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = phi(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = phi(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Minimizes `sign·φ` on a bracket by bisecting the sign of its central-difference derivative.
fn refine_minimum(phi: &dyn Fn(f64) -> f64, sign: f64, mut lo: f64, mut hi: f64) -> f64 {
    let h = 1e-7 * (hi - lo).abs().max(1e-3);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let d = sign * (phi(mid + h) - phi(mid - h));
        if d > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Points of `∂±C_ε` where the field is tangent to the wall, i.e. zeros of `⟨X₁, x⟩`
/// on `|x| = ε` and of `⟨X₂, y⟩` on `|y| = ε`. Each wall is sampled along lines;
/// sign changes are refined by bisection and local minima of `|φ|` by bisecting
/// the derivative. Candidates with `|φ| ≥ 1e-8` are discarded.
pub fn transversality_scan(system: &HyperbolicSystem, epsilon: f64, grid: usize) -> Vec<Tangency> {
    let grid = grid.max(8);
    let (s, u) = (system.s(), system.u());
    let mut out: Vec<Tangency> = Vec::new();
    for wall in [Wall::Inflow, Wall::Outflow] {
        let (a, b) = match wall {
            Wall::Inflow => (s, u),
            Wall::Outflow => (u, s),
        };
        let to_state = |sphere: RVec, ball: RVec| match wall {
            Wall::Inflow => (sphere, ball),
            Wall::Outflow => (ball, sphere),
        };
        for line in scan_lines(a, b, epsilon, grid) {
            let state = |t: f64| {
                let (sp, bl) = (line.point)(t);
                to_state(sp, bl)
            };
            let phi = |t: f64| {
                let (x, y) = state(t);
                let (dx, dy) = system.field(&x, &y);
                match wall {
                    Wall::Inflow => dx.dot(&x),
                    Wall::Outflow => dy.dot(&y),
                }
            };
            let mut candidates = Vec::new();
            let (t0, t1) = line.range;
            if t1 == t0 {
                candidates.push(t0);
            } else {
                let n = if line.periodic { grid } else { grid + 1 };
                let step = (t1 - t0) / if line.periodic { n as f64 } else { (n - 1) as f64 };
                let ts: Vec<f64> = (0..n).map(|i| t0 + step * i as f64).collect();
                let vals: Vec<f64> = ts.iter().map(|t| phi(*t)).collect();
                let at = |i: isize| -> (f64, f64) {
                    if line.periodic {
                        let k = i.rem_euclid(n as isize) as usize;
                        (t0 + step * i as f64, vals[k])
                    } else {
                        (ts[i as usize], vals[i as usize])
                    }
                };
                let last = if line.periodic { n as isize } else { n as isize - 1 };
                for i in 0..last {
                    let (ta, fa) = at(i);
                    let (tb, fb) = at(i + 1);
                    if fa == 0.0 {
                        candidates.push(ta);
                    } else if fa * fb < 0.0 {
                        candidates.push(refine_root(&phi, ta, tb));
                    }
                }
                let (first, stop) = if line.periodic { (0, n as isize) } else { (1, n as isize - 1) };
                for i in first..stop {
                    let (tp, fp) = at(i - 1);
                    let (_, fi) = at(i);
                    let (tn, fnext) = at(i + 1);
                    if fi.abs() < fp.abs() && fi.abs() <= fnext.abs() && fp * fi > 0.0 && fi * fnext > 0.0 {
                        candidates.push(refine_minimum(&phi, fi.signum(), tp, tn));
                    }
                }
            }
            for t in candidates {
                let residual = phi(t).abs();
                if residual >= TANGENCY_TOL {
                    continue;
                }
                let (x, y) = state(t);
                let duplicate = out
                    .iter()
                    .any(|p| p.wall == wall && (&p.x - &x).norm().max((&p.y - &y).norm()) < 1e-6);
                if !duplicate {
                    out.push(Tangency { wall, x, y, residual });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ContinuityRow {
    pub gamma0: f64,
    /// max of `|x₁|` over Dulac transits started with `|y₀| ≤ γ₀`
    pub max_exit_x: f64,
}

/// Empirical modulus of continuity of the Dulac map near `S₀ = {y = 0}`. Starts are
/// `x₀ = ±ε eᵢ`, `y₀ = ±r eⱼ` with `r` log-spaced in `[1e-8 ε, max γ₀]`.
pub fn dulac_continuity_table(
    system: &HyperbolicSystem,
    cube: &CubeSpec,
    gammas: &[f64],
    samples: usize,
    opts: &DulacOptions,
) -> Result<Vec<ContinuityRow>> {
    let (s, u) = (system.s(), system.u());
    let eps = cube.epsilon;
    let top = gammas.iter().copied().fold(0.0, f64::max).min(eps);
    let bottom = 1e-8 * eps;
    let samples = samples.max(2);
    let radii: Vec<f64> =
        (0..samples).map(|i| bottom * (top / bottom).powf(i as f64 / (samples - 1) as f64)).collect();
    let mut transits: Vec<(f64, f64)> = Vec::new();
    for &r in &radii {
        for i in 0..s {
            for j in 0..u {
                for (sx, sy) in [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
                    let mut x0 = RVec::zeros(s);
                    let mut y0 = RVec::zeros(u);
                    x0[i] = sx * eps;
                    y0[j] = sy * r;
                    let exit = dulac_map(system, cube, &x0, &y0, opts)?;
                    transits.push((r, exit.x.norm()));
                }
            }
        }
    }
    let mut rows: Vec<ContinuityRow> = gammas
        .iter()
        .map(|&g| ContinuityRow {
            gamma0: g,
            max_exit_x: transits.iter().filter(|(r, _)| *r <= g * (1.0 + 1e-12)).map(|t| t.1).fold(0.0, f64::max),
        })
        .collect();
    rows.sort_by(|a, b| a.gamma0.total_cmp(&b.gamma0));
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityWitness {
    /// both endpoints of the trajectory segment lie in the cube
    pub valid_pair: bool,
    pub samples_inside: usize,
    pub samples: usize,
}

impl ConvexityWitness {
    pub fn holds(&self) -> bool {
        !self.valid_pair || self.samples_inside == self.samples
    }
}

/// For `q₂ = φ_t(q₁)`, checks that intermediate trajectory samples stay in the cube
/// whenever both endpoints do.
pub fn flow_convexity_witness(
    system: &HyperbolicSystem,
    cube: &CubeSpec,
    x: &RVec,
    y: &RVec,
    t: f64,
    samples: usize,
) -> Result<ConvexityWitness> {
    let traj = solve_ivp_with_step(system, x, y, t, 1e-3)?;
    let (x2, y2) = traj.last();
    let valid_pair = cube.contains(x, y) && cube.contains(x2, y2);
    let samples_inside = (1..=samples)
        .filter(|k| {
            let (xi, yi) = traj.at(t * *k as f64 / (samples + 1) as f64);
            cube.contains(&xi, &yi)
        })
        .count();
    Ok(ConvexityWitness { valid_pair, samples_inside, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RMat;

    fn scalar(v: f64) -> RVec {
        RVec::from_element(1, v)
    }

    fn scalar_linear(lambda: f64, mu: f64) -> HyperbolicSystem {
        HyperbolicSystem::linear("scalar", RMat::from_element(1, 1, -lambda), RMat::from_element(1, 1, mu)).unwrap()
    }

    #[test]
    fn corner_maps_to_itself() {
        let sys = HyperbolicSystem::cubic_straightened();
        let cube = CubeSpec::new(0.3, 0.1).unwrap();
        let exit = dulac_map(&sys, &cube, &scalar(0.3), &scalar(-0.3), &DulacOptions::default()).unwrap();
        assert_eq!(exit.time, 0.0);
        assert_eq!((exit.x, exit.y), (scalar(0.3), scalar(-0.3)));
    }

    #[test]
    fn scalar_linear_closed_form() {
        let (lambda, mu, eps) = (1.5, 0.7, 0.2);
        let sys = scalar_linear(lambda, mu);
        let cube = CubeSpec::new(eps, eps).unwrap();
        let y0 = 0.013;
        let exit = dulac_map(&sys, &cube, &scalar(-eps), &scalar(y0), &DulacOptions::default()).unwrap();
        let t_exit = (eps / y0).ln() / mu;
        assert!((exit.time - t_exit).abs() < 1e-8);
        assert!((exit.x[0] + eps * (y0 / eps).powf(lambda / mu)).abs() < 1e-10);
        assert!((exit.y[0] - eps).abs() < 1e-9);
    }

    #[test]
    fn stable_manifold_start_is_rejected() {
        let sys = HyperbolicSystem::cubic_straightened();
        let cube = CubeSpec::new(0.3, 0.1).unwrap();
        let err = dulac_map(&sys, &cube, &scalar(0.3), &scalar(0.0), &DulacOptions::default());
        assert_eq!(err, Err(BvpError::OnStableManifold));
        let err = dulac_map(&sys, &cube, &scalar(0.2), &scalar(0.1), &DulacOptions::default());
        assert!(matches!(err, Err(BvpError::NotOnInflowWall(_))));
    }

    #[test]
    fn membership_examples() {
        let (lambda, mu, eps, gamma) = (1.0, 1.0, 0.2, 0.05);
        let sys = scalar_linear(lambda, mu);
        let cube = CubeSpec::new(eps, gamma).unwrap();
        let opts = DulacOptions::default();
        assert!(fundamental_membership(&sys, &cube, &scalar(0.15), &scalar(0.0), &opts).unwrap());
        // exit |x1| = |x||y|/eps when λ = μ
        let y0 = 0.15;
        assert!((eps / 2.0) * (y0 / eps) > gamma);
        assert!(!fundamental_membership(&sys, &cube, &scalar(eps / 2.0), &scalar(y0), &opts).unwrap());
        assert!(fundamental_membership(&sys, &cube, &scalar(0.05), &scalar(y0), &opts).unwrap());
        assert!(CubeSpec::new(0.1, 0.2).is_err());
    }

    #[test]
    fn symmetric_definite_has_no_tangencies() {
        let sys = HyperbolicSystem::linear(
            "sym",
            RMat::from_row_slice(2, 2, &[-2.0, 0.5, 0.5, -1.0]),
            RMat::from_element(1, 1, 1.0),
        )
        .unwrap();
        assert!(transversality_scan(&sys, 0.1, 24).is_empty());
        assert!(transversality_scan(&HyperbolicSystem::linear_diagonal(), 0.1, 24).is_empty());
        assert!(transversality_scan(&HyperbolicSystem::cubic_straightened(), 0.3, 24).is_empty());
    }

    #[test]
    fn jordan_block_is_tangent_on_the_antidiagonal() {
        let sys = HyperbolicSystem::xtrans_counterexample();
        let hits = transversality_scan(&sys, 0.1, 64);
        assert_eq!(hits.len(), 2);
        for h in &hits {
            assert_eq!(h.wall, Wall::Outflow);
            assert!((h.y[0] + h.y[1]).abs() < 1e-8, "{:?}", h.y);
            assert!((h.y.norm() - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn continuity_table_is_monotone_and_shrinks() {
        let sys = HyperbolicSystem::cubic_straightened();
        let cube = CubeSpec::new(0.2, 0.05).unwrap();
        let gammas = [1e-5, 1e-4, 1e-3, 1e-2, 0.1];
        let rows = dulac_continuity_table(&sys, &cube, &gammas, 12, &DulacOptions::default()).unwrap();
        assert!(rows.windows(2).all(|w| w[0].max_exit_x <= w[1].max_exit_x));
        assert!(rows[0].max_exit_x < cube.gamma / 10.0);
    }

    #[test]
    fn convexity_witness_on_straightened_system() {
        let sys = HyperbolicSystem::cubic_straightened();
        let cube = CubeSpec::new(0.3, 0.1).unwrap();
        let w = flow_convexity_witness(&sys, &cube, &scalar(0.25), &scalar(0.02), 1.5, 50).unwrap();
        assert!(w.valid_pair && w.holds());
    }
}
