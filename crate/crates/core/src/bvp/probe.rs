use super::picard::{endpoint_maps, estimate_constants, BvpOptions, BvpProblem, EstimateConstants};
use super::system::HyperbolicSystem;
use super::Result;
use crate::linalg::{RMat, RVec};

const FD_STEP: f64 = 1e-6;
const SLOPE_SLACK: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DecayRow {
    pub x0: Vec<f64>,
    pub y1: Vec<f64>,
    pub taus: Vec<f64>,
    pub abs_x1: Vec<f64>,
    pub abs_y0: Vec<f64>,
    /// Frobenius norm of `∂(x₁*, y₀*)/∂(x₀, y₁)`
    pub derivative_norm: Vec<f64>,
    /// least-squares slope of `log|x₁*|` against `τ`; `None` when `x₁* ≡ 0`
    pub slope_x1: Option<f64>,
    pub slope_y0: Option<f64>,
    pub slope_derivative: Option<f64>,
}

impl DecayRow {
    pub fn max_slope(&self) -> f64 {
        [self.slope_x1, self.slope_y0, self.slope_derivative].into_iter().flatten().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DecayTable {
    pub alpha: f64,
    pub delta: f64,
    /// `-(α - δ) + 0.05`
    pub slope_bound: f64,
    pub contraction_holds: bool,
    pub rows: Vec<DecayRow>,
}

impl DecayTable {
    pub fn worst_slope(&self) -> f64 {
        self.rows.iter().map(DecayRow::max_slope).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn passes(&self) -> bool {
        self.worst_slope() <= self.slope_bound
    }
}

pub(crate) fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn log_slope(taus: &[f64], values: &[f64]) -> Option<f64> {
    if values.iter().any(|v| *v <= 0.0) {
        return None;
    }
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    Some(least_squares_slope(taus, &logs))
}

fn endpoint_jacobian(
    system: &HyperbolicSystem,
    x0: &RVec,
    y1: &RVec,
    tau: f64,
    epsilon: f64,
    opts: &BvpOptions,
) -> Result<RMat> {
    let (s, u) = (system.s(), system.u());
    let d = s + u;
    let eval = |x: &RVec, y: &RVec| -> Result<RVec> {
        let (a, b) = endpoint_maps(system, &BvpProblem::new(x.clone(), y.clone(), tau, epsilon)?, opts)?;
        Ok(super::stack(&a, &b))
    };
    let mut jac = RMat::zeros(d, d);
    for j in 0..d {
        let (mut xp, mut yp, mut xm, mut ym) = (x0.clone(), y1.clone(), x0.clone(), y1.clone());
        if j < s {
            xp[j] += FD_STEP;
            xm[j] -= FD_STEP;
        } else {
            yp[j - s] += FD_STEP;
            ym[j - s] -= FD_STEP;
        }
        let col = (eval(&xp, &yp)? - eval(&xm, &ym)?) / (2.0 * FD_STEP);
        jac.set_column(j, &col);
    }
    Ok(jac)
}

/// Decay of the endpoint maps and their first derivatives as `τ` grows. Each row
/// records `|x₁*|`, `|y₀*|` and the derivative norm per `τ`, and the fitted
/// exponential rates, which should not exceed `-(α - δ) + 0.05`.
pub fn graph_closure_probe(
    system: &HyperbolicSystem,
    epsilon: f64,
    points: &[(RVec, RVec)],
    taus: &[f64],
    opts: &BvpOptions,
) -> Result<DecayTable> {
    let consts: EstimateConstants = estimate_constants(system, epsilon, 17);
    let opts = BvpOptions { delta: Some(consts.delta), ..opts.clone() };
    let mut rows = Vec::with_capacity(points.len());
    for (x0, y1) in points {
        let mut abs_x1 = Vec::with_capacity(taus.len());
        let mut abs_y0 = Vec::with_capacity(taus.len());
        let mut derivative_norm = Vec::with_capacity(taus.len());
        for &tau in taus {
            let (x1s, y0s) = endpoint_maps(system, &BvpProblem::new(x0.clone(), y1.clone(), tau, epsilon)?, &opts)?;
            abs_x1.push(x1s.norm());
            abs_y0.push(y0s.norm());
            derivative_norm.push(endpoint_jacobian(system, x0, y1, tau, epsilon, &opts)?.norm());
        }
        rows.push(DecayRow {
            x0: x0.iter().copied().collect(),
            y1: y1.iter().copied().collect(),
            taus: taus.to_vec(),
            slope_x1: log_slope(taus, &abs_x1),
            slope_y0: log_slope(taus, &abs_y0),
            slope_derivative: log_slope(taus, &derivative_norm),
            abs_x1,
            abs_y0,
            derivative_norm,
        });
    }
    Ok(DecayTable {
        alpha: consts.alpha,
        delta: consts.delta,
        slope_bound: -consts.rate() + SLOPE_SLACK,
        contraction_holds: consts.contraction_holds(),
        rows,
    })
}
