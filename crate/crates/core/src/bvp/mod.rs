//! Boundary value problems near a hyperbolic equilibrium.
//!
//! The system is `ẋ = L⁻x + f(x,y)`, `ẏ = L⁺y + g(x,y)` with `x ∈ Rˢ` stable and
//! `y ∈ Rᵘ` unstable. The BVP fixes `x(0) = x₀` and `y(τ) = y₁`.

mod cube;
mod ivp;
mod picard;
mod probe;
mod system;

use thiserror::Error;

use crate::linalg::RVec;

pub use cube::{
    dulac_continuity_table, dulac_map, flow_convexity_witness, fundamental_membership, transversality_scan,
    ContinuityRow, ConvexityWitness, CubeSpec, DulacExit, DulacOptions, Tangency, Wall,
};
pub use ivp::{solve_ivp, solve_ivp_steps, solve_ivp_with_step};
pub use picard::{
    delta_estimate, endpoint_maps, estimate_constants, ivp_bvp_identities, solve_bvp, BvpOptions, BvpProblem,
    DeltaEstimate, EstimateConstants, IdentityResiduals,
};
pub use probe::{graph_closure_probe, DecayRow, DecayTable};
pub use system::{pair_norm, spectral_gaps, split, stack, HyperbolicSystem, Jacobian, Nonlinearity};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BvpError {
    #[error("system is not hyperbolic: {0}")]
    NotHyperbolic(String),
    #[error("nonlinearity is not flat at the origin (|F(0)| = {value:.3e}, |dF(0)| = {slope:.3e})")]
    NotFlat { value: f64, slope: f64 },
    #[error("state norm exceeded 1e6 at t = {time}")]
    Blowup { time: f64 },
    #[error("fixed-point iteration did not contract after {iterations} iterations (last update {last_update:.3e})")]
    NoConvergence { iterations: usize, last_update: f64 },
    #[error("solution bound violated: sup |x,y| = {sup:.6e} > 2|x0,y1| = {bound:.6e}")]
    BoundViolated { sup: f64, bound: f64 },
    #[error("start point lies on the stable manifold; the trajectory never exits")]
    OnStableManifold,
    #[error("trajectory exits through the inflow wall |x| = eps")]
    ExitsUpstream,
    #[error("no wall crossing before t = {0}")]
    NoExit(f64),
    #[error("start point is not on the inflow wall: {0}")]
    NotOnInflowWall(String),
    #[error("invalid cube: {0}")]
    InvalidCube(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

pub type Result<T> = std::result::Result<T, BvpError>;

pub const BLOWUP_NORM: f64 = 1e6;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverStats {
    pub iterations: usize,
    pub last_update: f64,
    pub steps: usize,
    /// `Some(true)` when `δ¹_{2ε} < min(λ₁, μ₁)` was verified before solving.
    pub hypothesis_ok: Option<bool>,
}

/// Sampled solution on an increasing time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub xs: Vec<RVec>,
    pub ys: Vec<RVec>,
    pub stats: SolverStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn first(&self) -> (&RVec, &RVec) {
        (&self.xs[0], &self.ys[0])
    }

    pub fn last(&self) -> (&RVec, &RVec) {
        let n = self.len() - 1;
        (&self.xs[n], &self.ys[n])
    }

    /// `sup_t |x(t), y(t)|` over the stored nodes.
    pub fn sup_norm(&self) -> f64 {
        self.xs.iter().zip(&self.ys).map(|(x, y)| pair_norm(x, y)).fold(0.0, f64::max)
    }

    /// State at time `t` by cubic Lagrange interpolation on the four nearest nodes.
    pub fn at(&self, t: f64) -> (RVec, RVec) {
        let n = self.len();
        if n == 1 {
            return (self.xs[0].clone(), self.ys[0].clone());
        }
        let i = match self.times.binary_search_by(|p| p.total_cmp(&t)) {
            Ok(i) => return (self.xs[i].clone(), self.ys[i].clone()),
            Err(i) => i.clamp(1, n - 1) - 1,
        };
        let m = n.min(4);
        let j0 = i.saturating_sub(1).min(n - m);
        let nodes = &self.times[j0..j0 + m];
        let w = lagrange_weights(nodes, t);
        let mut x = RVec::zeros(self.xs[0].len());
        let mut y = RVec::zeros(self.ys[0].len());
        for (k, wk) in w.iter().enumerate() {
            x.axpy(*wk, &self.xs[j0 + k], 1.0);
            y.axpy(*wk, &self.ys[j0 + k], 1.0);
        }
        (x, y)
    }
}

pub(crate) fn lagrange_weights(nodes: &[f64], t: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|k| {
            nodes
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, tj)| (t - tj) / (nodes[k] - tj))
                .product()
        })
        .collect()
}
