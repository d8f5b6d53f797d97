//! Thin wrappers over `argmin` for the local refinement in the transversality scan.

use argmin::core::{CostFunction, Error, Executor, State};
use argmin::solver::goldensectionsearch::GoldenSectionSearch;
use argmin::solver::neldermead::NelderMead;

use super::{GeometryError, Result};

struct Scalar<'a>(&'a dyn Fn(f64) -> f64);

impl CostFunction for Scalar<'_> {
    type Param = f64;
    type Output = f64;
    fn cost(&self, x: &f64) -> std::result::Result<f64, Error> {
        Ok((self.0)(*x))
    }
}

struct Vector<'a>(&'a dyn Fn(&[f64]) -> f64);

impl CostFunction for Vector<'_> {
    type Param = Vec<f64>;
    type Output = f64;
    fn cost(&self, x: &Vec<f64>) -> std::result::Result<f64, Error> {
        Ok((self.0)(x))
    }
}

fn wrap(e: Error) -> GeometryError {
    GeometryError::Optimizer(e.to_string())
}

/// Golden-section minimum of `f` on `[a, b]` starting from `x0`.
pub fn minimize_interval(f: &dyn Fn(f64) -> f64, a: f64, b: f64, x0: f64, tol: f64) -> Result<(f64, f64)> {
    let solver = GoldenSectionSearch::new(a, b).and_then(|s| s.with_tolerance(tol)).map_err(wrap)?;
    let res = Executor::new(Scalar(f), solver)
        .configure(|s| s.param(x0.clamp(a, b)).max_iters(500))
        .run()
        .map_err(wrap)?;
    let x = *res.state().get_best_param().ok_or_else(|| GeometryError::Optimizer("no iterate".into()))?;
    Ok((x, f(x)))
}

/// Nelder-Mead from `x0` with an axis-aligned initial simplex of edge `step`.
pub fn minimize_simplex(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, max_iter: u64) -> Result<(Vec<f64>, f64)> {
    let mut simplex = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex).with_sd_tolerance(1e-15).map_err(wrap)?;
    let res = Executor::new(Vector(f), solver).configure(|s| s.max_iters(max_iter)).run().map_err(wrap)?;
    let x = res.state().get_best_param().cloned().ok_or_else(|| GeometryError::Optimizer("no iterate".into()))?;
    let fx = f(&x);
    Ok((x, fx))
}
