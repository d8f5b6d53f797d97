use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::expr::Expr;
use super::report::Provenance;
use super::HarnessError;
use crate::chern_weil::GaugeMap;
use crate::geometry::{Factor, ParamManifold};
use crate::linalg::{self, CMat};
use crate::maps;
use crate::quadrature::QuadratureSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Duality,
    Flow,
    Bvp,
    Forms,
    Reduction,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] =
        [ExperimentKind::Duality, ExperimentKind::Flow, ExperimentKind::Bvp, ExperimentKind::Forms, ExperimentKind::Reduction];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Duality => "duality",
            ExperimentKind::Flow => "flow",
            ExperimentKind::Bvp => "bvp",
            ExperimentKind::Forms => "forms",
            ExperimentKind::Reduction => "reduction",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Top-level config file: `{kind, params, tolerances, quadrature, seed}` plus an optional `id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default = "empty_object")]
    pub params: Value,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub seed: u64,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, params: Value) -> Self {
        Self { kind, id: None, params, tolerances: BTreeMap::new(), quadrature: QuadratureSpec::default(), seed: 0 }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn experiment_id(&self) -> String {
        self.id.clone().unwrap_or_else(|| format!("{}-seed{}", self.kind, self.seed))
    }

    /// Parses `params` into the kind's schema; unknown fields are rejected.
    pub fn params<P: DeserializeOwned>(&self) -> Result<P, HarnessError> {
        serde_json::from_value(self.params.clone()).map_err(|e| HarnessError::Config(format!("{} params: {e}", self.kind)))
    }

    /// Resolves tolerance overrides against the kind's defaults; unknown names are rejected.
    pub fn tolerances(&self, defaults: &[(&str, f64)]) -> Result<Tolerances, HarnessError> {
        let mut values: BTreeMap<String, f64> = defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        for (k, v) in &self.tolerances {
            match values.get_mut(k) {
                Some(slot) if v.is_finite() && *v >= 0.0 => *slot = *v,
                Some(_) => return Err(HarnessError::Config(format!("tolerance {k} must be finite and nonnegative"))),
                None => {
                    let known: Vec<&str> = defaults.iter().map(|d| d.0).collect();
                    return Err(HarnessError::Config(format!("unknown tolerance {k:?} for {}; known: {known:?}", self.kind)));
                }
            }
        }
        Ok(Tolerances(values))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.quadrature.validate().map_err(HarnessError::Config)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances(BTreeMap<String, f64>);

impl Tolerances {
    pub fn get(&self, name: &str) -> f64 {
        self.0[name]
    }
}

fn default_rank() -> usize {
    2
}

fn default_dim() -> usize {
    1
}

/// Built-in gauge-map families and the expression form for custom maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MapSpec {
    /// a fixed generic unitary on `S¹` (`dim = 1`) or `S³` (`dim = 3`)
    Constant {
        #[serde(default = "default_rank")]
        n: usize,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default)]
        seed: u64,
    },
    /// `θ ↦ V diag(e^{imθ}, 1, …) V*` with a generic `V` drawn from `frame_seed`
    Winding {
        m: i32,
        #[serde(default = "default_rank")]
        n: usize,
        #[serde(default)]
        frame_seed: u64,
    },
    /// `θ ↦ diag(e^{i p_1 θ}, …)`
    DiagPowers { powers: Vec<i32> },
    /// `q ↦ U₀ q` on `S³ ⊂ SU(2)` with a generic `U₀` drawn from `seed`
    S3Left {
        #[serde(default)]
        seed: u64,
    },
    /// entries as expressions in the chart coordinates of `manifold`
    Expr { manifold: Vec<Factor>, entries: Vec<Vec<String>> },
}

/// A gauge map with its domain and, when one is known, the expected value of `∫ g*Tc_k`.
pub struct BuiltMap {
    pub map: GaugeMap,
    pub manifold: ParamManifold,
    pub expected: Option<(f64, Provenance)>,
}

/// Chart coordinate names: `b0, b1, …` always, plus `theta` (circle), `theta, phi` (2-sphere)
/// or `eta, xi1, xi2` (3-sphere) for a single factor.
pub fn chart_variables(factors: &[Factor]) -> Vec<String> {
    let d: usize = factors.iter().map(|f| f.dim()).sum();
    let mut names: Vec<String> = (0..d).map(|j| format!("b{j}")).collect();
    if let [single] = factors {
        let alias: &[&str] = match single {
            Factor::Circle => &["theta"],
            Factor::Sphere2 => &["theta", "phi"],
            Factor::Sphere3 => &["eta", "xi1", "xi2"],
        };
        names.extend(alias.iter().map(|s| s.to_string()));
    }
    names
}

impl MapSpec {
    pub fn build(&self) -> Result<BuiltMap, HarnessError> {
        let cfg = |m: String| HarnessError::Config(m);
        Ok(match self {
            MapSpec::Constant { n, dim, seed } => {
                let manifold = match dim {
                    1 => ParamManifold::circle(),
                    3 => ParamManifold::sphere3(),
                    _ => return Err(cfg(format!("constant map: dim must be 1 or 3, got {dim}"))),
                };
                if *n == 0 {
                    return Err(cfg("constant map: n must be positive".into()));
                }
                let map = GaugeMap::constant(*dim, maps::generic_unitary(*n, *seed));
                BuiltMap { map, manifold, expected: Some((0.0, Provenance::Trivial)) }
            }
            MapSpec::Winding { m, n, frame_seed } => {
                if *n == 0 {
                    return Err(cfg("winding map: n must be positive".into()));
                }
                let map = maps::winding(*m, &maps::generic_unitary(*n, *frame_seed));
                BuiltMap { map, manifold: ParamManifold::circle(), expected: Some((-(*m as f64), Provenance::Derived)) }
            }
            MapSpec::DiagPowers { powers } => {
                if powers.is_empty() {
                    return Err(cfg("diag_powers: empty power list".into()));
                }
                let total: i32 = powers.iter().sum();
                BuiltMap {
                    map: maps::diag_powers(powers),
                    manifold: ParamManifold::circle(),
                    expected: Some((-(total as f64), Provenance::Derived)),
                }
            }
            MapSpec::S3Left { seed } => BuiltMap {
                map: maps::s3_left(&maps::generic_unitary(2, *seed)),
                manifold: ParamManifold::sphere3(),
                expected: Some((1.0, Provenance::Derived)),
            },
            MapSpec::Expr { manifold, entries } => {
                if manifold.is_empty() {
                    return Err(cfg("expr map: empty manifold".into()));
                }
                let n = entries.len();
                if n == 0 || entries.iter().any(|row| row.len() != n) {
                    return Err(cfg("expr map: entries must form a nonempty square matrix".into()));
                }
                let vars = chart_variables(manifold);
                let d: usize = manifold.iter().map(|f| f.dim()).sum();
                let var_refs: Vec<&str> = vars.iter().map(String::as_str).collect();
                let parsed: Vec<Expr> = entries
                    .iter()
                    .flatten()
                    .map(|s| Expr::parse(s, &var_refs))
                    .collect::<Result<_, _>>()
                    .map_err(|e| cfg(format!("expr map: {e}")))?;
                let aliases = vars.len() - d;
                let eval = move |b: &[f64]| {
                    let mut args = b.to_vec();
                    args.extend_from_slice(&b[..aliases]);
                    CMat::from_fn(n, n, |r, c| parsed[r * n + c].eval(&args))
                };
                let product = ParamManifold::product(manifold.clone());
                for p in [0.3, 0.7, 0.1] {
                    let point: Vec<f64> = product.upper().iter().map(|u| u * p).collect();
                    let u = eval(&point);
                    let res = linalg::unitarity_residual(&u);
                    if !(res < 1e-8) {
                        return Err(cfg(format!("expr map is not unitary at {point:?} (residual {res:.2e})")));
                    }
                }
                let map = GaugeMap::new("expr", d, n, Arc::new(eval));
                BuiltMap { map, manifold: product, expected: None }
            }
        })
    }
}

fn default_starts() -> usize {
    64
}

fn default_samples() -> usize {
    4096
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualityParams {
    pub map: MapSpec,
    /// form degree is `2k − 1`; defaults to `(dim B + 1)/2`
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_starts")]
    pub preimage_starts: usize,
    #[serde(default = "default_samples")]
    pub transversality_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowParams {
    pub n: usize,
    /// Haar-random initial conditions
    pub seeds: usize,
    /// initial conditions built on a random stratum
    pub stratum_seeds: usize,
    pub t_max: f64,
    pub dt: f64,
    pub fd_step: f64,
    pub semigroup_samples: usize,
    /// check that `U_I` is fixed by the flow
    pub fixed_point: Option<Vec<usize>>,
    /// Morse index of every critical point
    pub morse_table: bool,
    pub limit_tol: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            n: 3,
            seeds: 100,
            stratum_seeds: 20,
            t_max: 40.0,
            dt: 0.5,
            fd_step: 1e-4,
            semigroup_samples: 20,
            fixed_point: None,
            morse_table: false,
            limit_tol: crate::flow::DEFAULT_LIMIT_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BvpParams {
    pub system: String,
    /// cube radius for the random-problem, identity, decay and Dulac suites
    pub epsilon: f64,
    /// single problem `(x0, y1, tau, epsilon)` for the closed-form or shooting comparison
    pub reference_problem: [f64; 4],
    pub random_problems: usize,
    pub identity_samples: usize,
    pub decay_points: usize,
    pub decay_taus: Vec<f64>,
    pub scan_grid: usize,
    pub dulac_samples: usize,
}

impl Default for BvpParams {
    fn default() -> Self {
        Self {
            system: "linear-diagonal".into(),
            epsilon: 0.1,
            reference_problem: [0.1, 0.1, 2.0, 0.3],
            random_problems: 1000,
            identity_samples: 200,
            decay_points: 4,
            decay_taus: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            scan_grid: 64,
            dulac_samples: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FormsParams {
    /// beta integrals and constant relations for `k = 1..=k_max`
    pub k_max: u32,
    /// unstable-manifold integrals for these `k` (at most 2)
    pub unstable: Vec<usize>,
    pub closedness_samples: usize,
}

impl Default for FormsParams {
    fn default() -> Self {
        Self { k_max: 8, unstable: vec![1, 2], closedness_samples: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReductionParams {
    pub n_max: usize,
    pub samples: usize,
    pub kernel_samples: usize,
}

impl Default for ReductionParams {
    fn default() -> Self {
        Self { n_max: 6, samples: 1000, kernel_samples: 100 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let cfg = ExperimentConfig::from_json(
            r#"{"kind": "duality", "params": {"map": {"family": "winding", "m": 3}},
                "tolerances": {"duality": 1e-8}, "quadrature": {"mode": "gauss_legendre", "order": 32}, "seed": 5}"#,
        )
        .unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Duality);
        assert_eq!(cfg.seed, 5);
        let p: DualityParams = cfg.params().unwrap();
        assert_eq!(p.map, MapSpec::Winding { m: 3, n: 2, frame_seed: 0 });
        assert_eq!(p.preimage_starts, 64);
        let t = cfg.tolerances(&[("duality", 1e-6), ("reference", 1e-9)]).unwrap();
        assert_eq!((t.get("duality"), t.get("reference")), (1e-8, 1e-9));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_json(r#"{"kind": "nope"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"kind": "flow", "extra": 1}"#).is_err());
        let cfg = ExperimentConfig::from_json(r#"{"kind": "flow", "params": {"n": 2, "bogus": true}}"#).unwrap();
        assert!(cfg.params::<FlowParams>().is_err());
        let cfg = ExperimentConfig::from_json(r#"{"kind": "flow", "tolerances": {"bogus": 1}}"#).unwrap();
        assert!(cfg.tolerances(&[("ode", 1e-6)]).is_err());
        let cfg = ExperimentConfig::from_json(r#"{"kind": "forms", "quadrature": {"mode": "gauss_legendre", "order": 2}}"#)
            .unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn expr_map_matches_builtin() {
        let spec = MapSpec::Expr {
            manifold: vec![Factor::Circle],
            entries: vec![vec!["exp(2*i*theta)".into(), "0".into()], vec!["0".into(), "1".into()]],
        };
        let built = spec.build().unwrap();
        let reference = maps::diag_powers(&[2, 0]);
        for t in [0.1, 1.7, 4.0] {
            assert!(linalg::max_abs(&(built.map.value(&[t]) - reference.value(&[t]))) < 1e-14);
        }
        assert_eq!(built.manifold.dim(), 1);
        assert!(built.expected.is_none());
    }

    #[test]
    fn expr_map_rejects_non_unitary_and_bad_shapes() {
        let bad = MapSpec::Expr { manifold: vec![Factor::Circle], entries: vec![vec!["2".into()]] };
        assert!(matches!(bad.build(), Err(HarnessError::Config(_))));
        let ragged = MapSpec::Expr { manifold: vec![Factor::Circle], entries: vec![vec!["1".into(), "0".into()]] };
        assert!(ragged.build().is_err());
        let unknown = MapSpec::Expr { manifold: vec![Factor::Circle], entries: vec![vec!["exp(i*phi)".into()]] };
        assert!(unknown.build().is_err());
    }

    #[test]
    fn product_chart_variables() {
        assert_eq!(chart_variables(&[Factor::Circle, Factor::Sphere2]), vec!["b0", "b1", "b2"]);
        assert_eq!(chart_variables(&[Factor::Sphere3]), vec!["b0", "b1", "b2", "eta", "xi1", "xi2"]);
    }
}
