//! Experiment configuration: a JSON document validated on load.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use cpdsym::integrators::SgQuadrature;
use cpdsym::problems::ForceSpec;
use cpdsym::verification::{MetricWeights, UniformityMetric};
use cpdsym::{make_problem, FixedPointControls, Method, OracleConfig, Problem, ProblemId, Vec3};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

/// Which experiment `run` performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    #[default]
    Converge,
    Energy,
    Symplectic,
    SweepEps,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Converge => "converge",
            ExperimentKind::Energy => "energy",
            ExperimentKind::Symplectic => "symplectic",
            ExperimentKind::SweepEps => "sweep-eps",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A method id that (de)serializes as its canonical name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MethodId(pub Method);

impl Serialize for MethodId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.0.as_str())
    }
}

impl<'de> Deserialize<'de> for MethodId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Method::from_str(&s).map(MethodId).map_err(de::Error::custom)
    }
}

/// A built-in problem id that (de)serializes as `"P1"`, `"P2"` or `"P3"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProblemName(pub ProblemId);

impl Serialize for ProblemName {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.0.as_str())
    }
}

impl<'de> Deserialize<'de> for ProblemName {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        ProblemId::from_str(&s).map(ProblemName).map_err(de::Error::custom)
    }
}

/// Homogeneous-field problem given inline: `B`, `x₀`, `v₀` and the
/// coefficient `c` of `U = c/√(x₁² + x₂²)` (zero for a free particle).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineProblem {
    pub field: [f64; 3],
    pub x0: [f64; 3],
    pub v0: [f64; 3],
    #[serde(default)]
    pub force_coeff: f64,
}

/// Error metric written to the `metric_scaled` column and used by sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MetricConfig {
    Position,
    Velocity,
    /// `ε^x_pow·err_x + ε^v_pow·err_v`.
    Weighted { x_pow: i32, v_pow: i32 },
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig::Weighted { x_pow: 0, v_pow: 0 }
    }
}

impl MetricConfig {
    pub fn to_uniformity(self) -> UniformityMetric {
        match self {
            MetricConfig::Position => UniformityMetric::Position,
            MetricConfig::Velocity => UniformityMetric::Velocity,
            MetricConfig::Weighted { x_pow, v_pow } => {
                UniformityMetric::Weighted(MetricWeights { x_pow, v_pow })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSettings {
    /// Defaults to SC2O4 for homogeneous problems and SG1O4 otherwise.
    #[serde(default)]
    pub base: Option<MethodId>,
    #[serde(default = "default_refinement")]
    pub refinement: usize,
    #[serde(default = "default_agreement_tol")]
    pub agreement_tol: f64,
}

fn default_refinement() -> usize {
    128
}

fn default_agreement_tol() -> f64 {
    1e-10
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings {
            base: None,
            refinement: default_refinement(),
            agreement_tol: default_agreement_tol(),
        }
    }
}

impl OracleSettings {
    pub fn to_config(&self) -> OracleConfig<f64> {
        OracleConfig {
            base: self.base.map(|m| m.0),
            refinement: self.refinement,
            agreement_tol: self.agreement_tol,
            ..OracleConfig::default()
        }
    }
}

/// Fixed-point controls of the implicit stage solves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
    #[serde(default = "default_divergence_bound")]
    pub divergence_bound: f64,
}

fn default_divergence_bound() -> f64 {
    1e10
}

impl FixedPointSettings {
    pub fn tight() -> Self {
        let t = FixedPointControls::<f64>::tight();
        FixedPointSettings {
            tolerance: t.tolerance,
            max_iterations: t.max_iterations,
            divergence_bound: t.divergence_bound,
        }
    }

    pub fn to_controls(&self) -> FixedPointControls<f64> {
        FixedPointControls {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            divergence_bound: self.divergence_bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureChoice {
    #[default]
    Gauss4,
    Midpoint,
}

impl From<QuadratureChoice> for SgQuadrature {
    fn from(q: QuadratureChoice) -> Self {
        match q {
            QuadratureChoice::Gauss4 => SgQuadrature::Gauss4,
            QuadratureChoice::Midpoint => SgQuadrature::Midpoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inline_problem: Option<InlineProblem>,
    pub methods: Vec<MethodId>,
    pub h: Vec<f64>,
    pub eps: Vec<f64>,
    pub t_end: f64,
    #[serde(default)]
    pub metric: MetricConfig,
    #[serde(default)]
    pub oracle: OracleSettings,
    /// Defaults to the standard controls when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_point: Option<FixedPointSettings>,
    #[serde(default)]
    pub sg_quadrature: QuadratureChoice,
    /// Keep every `thinning`-th state of energy series.
    #[serde(default = "default_one")]
    pub thinning: usize,
    /// Phase-space samples per symplecticity cell.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

fn default_one() -> usize {
    1
}

fn default_samples() -> usize {
    3
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// A config with every optional field at its default.
    pub fn new(problem: ProblemId, methods: &[Method], h: Vec<f64>, eps: Vec<f64>, t_end: f64) -> Self {
        ExperimentConfig {
            name: None,
            experiment: ExperimentKind::default(),
            problem: Some(ProblemName(problem)),
            inline_problem: None,
            methods: methods.iter().copied().map(MethodId).collect(),
            h,
            eps,
            t_end,
            metric: MetricConfig::default(),
            oracle: OracleSettings::default(),
            fixed_point: None,
            sg_quadrature: QuadratureChoice::default(),
            thinning: 1,
            samples: default_samples(),
            seed: 0,
            out_dir: None,
        }
    }

    pub fn methods(&self) -> Vec<Method> {
        self.methods.iter().map(|m| m.0).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(HarnessError::Config(msg));
        match (&self.problem, &self.inline_problem) {
            (Some(_), Some(_)) => return fail("give either `problem` or `inline_problem`, not both".into()),
            (None, None) => return fail("missing `problem` (or `inline_problem`)".into()),
            _ => {}
        }
        if let Some(ip) = &self.inline_problem {
            let all = ip.field.iter().chain(&ip.x0).chain(&ip.v0).chain([&ip.force_coeff]);
            if all.into_iter().any(|c| !c.is_finite()) {
                return fail("`inline_problem` entries must be finite".into());
            }
        }
        if self.methods.is_empty() {
            return fail("`methods` must not be empty".into());
        }
        if self.h.is_empty() {
            return fail("`h` grid must not be empty".into());
        }
        if self.eps.is_empty() {
            return fail("`eps` grid must not be empty".into());
        }
        for (i, &h) in self.h.iter().enumerate() {
            if !(h > 0.0 && h.is_finite()) {
                return fail(format!("`h[{i}]` must be positive, got {h}"));
            }
            if self.h[..i].contains(&h) {
                return fail(format!("`h[{i}]` = {h} is a duplicate"));
            }
        }
        for (i, &e) in self.eps.iter().enumerate() {
            if !(e > 0.0 && e <= 1.0) {
                return fail(format!("`eps[{i}]` must lie in (0, 1], got {e}"));
            }
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return fail(format!("`t_end` must be positive, got {}", self.t_end));
        }
        if self.thinning == 0 {
            return fail("`thinning` must be at least 1".into());
        }
        if self.samples == 0 {
            return fail("`samples` must be at least 1".into());
        }
        self.oracle.to_config().validate().map_err(|e| HarnessError::Config(format!("`oracle`: {e}")))?;
        if let Some(fp) = &self.fixed_point {
            fp.to_controls()
                .validate()
                .map_err(|e| HarnessError::Config(format!("`fixed_point`: {e}")))?;
        }
        let homogeneous = self.inline_problem.is_some() || self.problem.map(|p| p.0) == Some(ProblemId::P1);
        if !homogeneous {
            for m in self.methods() {
                if m.requires_homogeneous() {
                    return fail(format!("{m} requires a homogeneous field"));
                }
            }
            if let Some(MethodId(m)) = self.oracle.base {
                if m.requires_homogeneous() {
                    return fail(format!("oracle base {m} requires a homogeneous field"));
                }
            }
        }
        match self.experiment {
            ExperimentKind::Energy if self.h.len() != 1 || self.eps.len() != 1 => {
                return fail("energy experiments take exactly one `h` and one `eps`".into());
            }
            ExperimentKind::Symplectic if self.problem.map(|p| p.0) == Some(ProblemId::P3) => {
                return fail("symplecticity needs a vector potential, which P3 does not provide".into());
            }
            _ => {}
        }
        Ok(())
    }

    /// The problem at a given `ε`.
    pub fn build_problem(&self, eps: f64) -> Result<Problem> {
        if let Some(ip) = &self.inline_problem {
            let p = Problem::free(
                Vec3::from_f64(ip.field),
                eps,
                Vec3::from_f64(ip.x0),
                Vec3::from_f64(ip.v0),
            )?;
            return Ok(if ip.force_coeff != 0.0 {
                p.with_force(ForceSpec::AxialInverse { coeff: ip.force_coeff })
            } else {
                p
            });
        }
        let id = self.problem.map(|p| p.0).ok_or_else(|| HarnessError::Config("missing `problem`".into()))?;
        Ok(make_problem(id, eps)?)
    }

    /// The configured stage-solve controls, else the standard ones.
    pub fn controls(&self) -> FixedPointControls<f64> {
        self.fixed_point.as_ref().map_or_else(FixedPointControls::default, FixedPointSettings::to_controls)
    }

    pub fn problem_label(&self) -> String {
        match self.problem {
            Some(p) => p.0.to_string(),
            None => "inline".to_string(),
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// JSON with object keys sorted, independent of input key order.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&value).expect("value serializes")
    }

    /// Hex SHA-256 of [`canonical_json`](Self::canonical_json).
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"problem": "P1", "methods": ["SC2O2"], "h": [0.01], "eps": [1.0], "t_end": 1.0}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Converge);
        assert_eq!(cfg.methods(), vec![Method::Sc2o2]);
        assert_eq!(cfg.metric, MetricConfig::Weighted { x_pow: 0, v_pow: 0 });
        assert_eq!(cfg.oracle, OracleSettings::default());
        assert_eq!((cfg.thinning, cfg.samples, cfg.seed), (1, 3, 0));
        assert!(cfg.fixed_point.is_none() && cfg.out_dir.is_none());
    }

    #[test]
    fn unknown_method_is_named() {
        let err = parse_config(&MINIMAL.replace("SC2O2", "SC9O9")).unwrap_err().to_string();
        assert!(err.contains("SC9O9"), "{err}");
        assert!(err.contains("line 1"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_config(&MINIMAL.replace("\"t_end\"", "\"tend\": 1, \"t_end\"")).unwrap_err();
        assert!(err.to_string().contains("tend"), "{err}");
    }

    #[test]
    fn invalid_grids_are_rejected() {
        assert!(parse_config(&MINIMAL.replace("[0.01]", "[]")).is_err());
        assert!(parse_config(&MINIMAL.replace("[1.0]", "[]")).is_err());
        assert!(parse_config(&MINIMAL.replace("[0.01]", "[0.01, 0.01]")).is_err());
        assert!(parse_config(&MINIMAL.replace("[1.0]", "[1.5]")).is_err());
        assert!(parse_config(&MINIMAL.replace("\"t_end\": 1.0", "\"t_end\": 0")).is_err());
        assert!(parse_config(&MINIMAL.replace("P1", "P2")).is_err());
    }

    #[test]
    fn round_trip_preserves_config() {
        let mut cfg = parse_config(MINIMAL).unwrap();
        cfg.metric = MetricConfig::Weighted { x_pow: 2, v_pow: 3 };
        cfg.fixed_point = Some(FixedPointSettings::tight());
        cfg.oracle.base = Some(MethodId(Method::Sg1o4));
        let back = parse_config(&cfg.to_json_pretty()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn digest_ignores_key_order() {
        let a = parse_config(MINIMAL).unwrap();
        let b = parse_config(r#"{"t_end": 1.0, "eps": [1.0], "h": [0.01], "methods": ["sc2o2"], "problem": "p1"}"#)
            .unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn inline_problem_builds() {
        let text = r#"{"inline_problem": {"field": [0, 0, 2], "x0": [1, 0, 0], "v0": [0, 1, 0]},
            "methods": ["SC1O2"], "h": [0.1], "eps": [0.5], "t_end": 1}"#;
        let cfg = parse_config(text).unwrap();
        let p = cfg.build_problem(0.5).unwrap();
        assert!(p.is_homogeneous());
        assert_eq!(p.scaled_field(Vec3::zero()), Vec3::new(0.0, 0.0, 4.0));
        assert_eq!(cfg.problem_label(), "inline");
    }
}
