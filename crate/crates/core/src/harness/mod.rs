//! Experiment configs, runners and report emission.

pub mod acceptance;
mod bvp_suite;
pub mod config;
mod duality;
pub mod expr;
mod flow_suite;
mod forms_suite;
mod reduction_suite;
pub mod report;
pub mod shooting;

use std::path::PathBuf;

use thiserror::Error;

pub use bvp_suite::run_bvp_experiment;
pub use config::{
    BuiltMap, BvpParams, DualityParams, ExperimentConfig, ExperimentKind, FlowParams, FormsParams, MapSpec,
    ReductionParams, Tolerances,
};
pub use duality::run_duality_experiment;
pub use flow_suite::run_flow_experiment;
pub use forms_suite::run_forms_experiment;
pub use reduction_suite::run_reduction_experiment;
pub use report::{emit_report, CheckRow, Comparison, OutputFormats, Provenance, Status, Table, Timing, VerificationReport};

use crate::bvp::BvpError;
use crate::chern_weil::ChernWeilError;
use crate::flow::FlowError;
use crate::geometry::GeometryError;
use crate::spectral::SpectralError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Bvp(#[from] BvpError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Form(#[from] ChernWeilError),
}

impl HarnessError {
    /// Process exit code: 2 for config or usage problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Validates the config and dispatches to the runner for its kind.
pub fn run_experiment(config: &ExperimentConfig) -> Result<VerificationReport> {
    config.validate()?;
    match config.kind {
        ExperimentKind::Duality => run_duality_experiment(config),
        ExperimentKind::Flow => run_flow_experiment(config),
        ExperimentKind::Bvp => run_bvp_experiment(config),
        ExperimentKind::Forms => run_forms_experiment(config),
        ExperimentKind::Reduction => run_reduction_experiment(config),
    }
}

/// Built-in configs listed by `mcl list experiments`.
pub fn builtin_experiments() -> Vec<ExperimentConfig> {
    use serde_json::json;
    let named = |id: &str, kind: ExperimentKind, params: serde_json::Value| ExperimentConfig {
        id: Some(id.to_string()),
        ..ExperimentConfig::new(kind, params)
    };
    vec![
        named("duality-constant", ExperimentKind::Duality, json!({"map": {"family": "constant", "n": 2}})),
        named("duality-winding3", ExperimentKind::Duality, json!({"map": {"family": "winding", "m": 3}})),
        named("duality-diag-control", ExperimentKind::Duality, json!({"map": {"family": "diag_powers", "powers": [1, 2]}})),
        named("duality-s3", ExperimentKind::Duality, json!({"map": {"family": "s3_left"}, "transversality_samples": 2000})),
        named("flow-n3", ExperimentKind::Flow, json!({"n": 3})),
        named("flow-n2-fixed", ExperimentKind::Flow, json!({"n": 2, "seeds": 10, "stratum_seeds": 4, "fixed_point": [1]})),
        named("flow-n4-morse", ExperimentKind::Flow, json!({"n": 4, "seeds": 10, "stratum_seeds": 4, "morse_table": true})),
        named("bvp-linear-diagonal", ExperimentKind::Bvp, json!({"system": "linear-diagonal"})),
        named(
            "bvp-cubic-straightened",
            ExperimentKind::Bvp,
            json!({"system": "cubic-straightened", "reference_problem": [0.2, 0.2, 3.0, 0.3]}),
        ),
        named("bvp-xtrans", ExperimentKind::Bvp, json!({"system": "xtrans-counterexample"})),
        named("forms", ExperimentKind::Forms, json!({})),
        named("reduction", ExperimentKind::Reduction, json!({})),
    ]
}
