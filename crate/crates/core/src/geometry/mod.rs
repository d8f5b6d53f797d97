//! Parameter manifolds, oriented integration, the unstable-manifold integral, signed
//! preimages of `S(U_{k})` and transversality auditing.

mod integrate;
mod manifold;
mod optimize;
mod preimage;
mod transversality;

use thiserror::Error;

use crate::chern_weil::ChernWeilError;
use crate::spectral::SpectralError;

pub use crate::chern_weil::fd_exterior_derivative;
pub use integrate::{integrate_form, integrate_unstable, unstable_parametrization};
pub use manifold::{Factor, ParamManifold};
pub use optimize::{minimize_interval, minimize_simplex};
pub use preimage::{coorientation_calibration, find_preimages, stratum_coordinates, PreimageHit, PreimageOptions, PreimageSearch};
pub use transversality::{
    incidence_loci, locus_value, transversality_check, Locus, LocusHit, RankCheck, TransversalityOptions, TransversalityReport,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("form of degree {degree} cannot be integrated over a {dim}-dimensional manifold")]
    DegreeMismatch { degree: usize, dim: usize },
    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid quadrature: {0}")]
    InvalidQuadrature(String),
    #[error("optimizer failed: {0}")]
    Optimizer(String),
    #[error(transparent)]
    Form(#[from] ChernWeilError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

pub type Result<T> = std::result::Result<T, GeometryError>;
