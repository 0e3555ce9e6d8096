//! Experiment configuration: a TOML file with sections `offspring`,
//! `motion`, `normalization` and `experiment`.
//!
//! ```toml
//! [offspring]
//! p = [0.0, 0.0, 1.0]
//! beta = 1.0
//!
//! [motion]
//! kind = "stable"
//! alpha = 1.5
//! c1 = 1.0
//! c2 = 1.0
//! ```

use std::path::Path;

use bralev_core::branching::{extinction_probability, theta_constant};
use bralev_core::normalization::{SlowlyVarying, TailScale};
use bralev_core::rng::{replication_stream, DEFAULT_SEED};
use bralev_core::{BranchingConfig, Error, MotionSpec, OffspringLaw, ThetaMode};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Re-labels a core validation error with its position in the file.
fn locate(section: &str, err: Error) -> ConfigError {
    match err {
        Error::InvalidParameter { field, reason } => invalid(format!("{section}.{field}"), reason),
        other => invalid(section, other.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub offspring: OffspringSection,
    pub motion: MotionSection,
    #[serde(default)]
    pub normalization: NormalizationSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffspringSection {
    /// `p[k]` is the probability of `k` children.
    pub p: Vec<f64>,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_cap: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotionKind {
    Stable,
    NonsymmetricOneStable,
    Brownian,
    Composite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionSection {
    pub kind: MotionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<MotionSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlowlyVaryingKind {
    #[default]
    One,
    Log,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizationSection {
    #[serde(default)]
    pub slowly_varying: SlowlyVaryingKind,
    /// Exponent `p` in `L(x) = log(e + x)^p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_power: Option<f64>,
}

fn default_t() -> f64 {
    8.0
}
fn default_t_grid() -> Vec<f64> {
    vec![4.0, 6.0, 8.0]
}
fn default_replications() -> u64 {
    5000
}
fn default_truncation() -> f64 {
    0.05
}
fn default_limit_draws() -> u64 {
    100_000
}
fn default_cluster_draws() -> u64 {
    100_000
}
fn default_w_draws() -> u64 {
    20_000
}
fn default_front_level() -> f64 {
    0.5
}
fn default_front_replications() -> u64 {
    2000
}
fn default_gamma_fast() -> f64 {
    1.0
}
fn default_gamma_slow() -> f64 {
    0.3
}
fn default_jump_theta() -> f64 {
    1.0
}
fn default_jump_t_grid() -> Vec<f64> {
    vec![3.0, 5.0, 7.0]
}
fn default_tail_draws() -> u64 {
    10_000_000
}
fn default_tests() -> Vec<TestFunctionSection> {
    vec![
        TestFunctionSection {
            name: "ramp-1-3".into(),
            knots: vec![(1.0, 0.0), (3.0, 1.0)],
            hole: 1.0,
        },
        TestFunctionSection {
            name: "ramp-minus-3-minus-1".into(),
            knots: vec![(-3.0, 1.0), (-1.0, 0.0)],
            hole: 1.0,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunctionSection {
    pub name: String,
    pub knots: Vec<(f64, f64)>,
    pub hole: f64,
}

/// Run parameters. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_t")]
    pub t: f64,
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default = "default_replications")]
    pub replications: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Lower cut `a` for sampling the limit process.
    #[serde(default = "default_truncation")]
    pub truncation: f64,
    #[serde(default = "default_limit_draws")]
    pub limit_draws: u64,
    #[serde(default = "default_cluster_draws")]
    pub cluster_draws: u64,
    /// Conditioned `W` draws used when `W` has no closed form.
    #[serde(default = "default_w_draws")]
    pub w_draws: u64,
    #[serde(default = "default_front_level")]
    pub front_level: f64,
    #[serde(default = "default_front_replications")]
    pub front_replications: u64,
    #[serde(default = "default_gamma_fast")]
    pub gamma_fast: f64,
    #[serde(default = "default_gamma_slow")]
    pub gamma_slow: f64,
    #[serde(default = "default_jump_theta")]
    pub jump_theta: f64,
    #[serde(default = "default_jump_t_grid")]
    pub jump_t_grid: Vec<f64>,
    #[serde(default = "default_tail_draws")]
    pub tail_draws: u64,
    #[serde(default = "default_tests")]
    pub test_functions: Vec<TestFunctionSection>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        toml::from_str("").expect("all experiment fields have defaults")
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// The fully resolved config as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn seed(&self) -> u64 {
        self.experiment.seed.unwrap_or(DEFAULT_SEED)
    }
}

fn require(value: Option<f64>, field: &str) -> Result<f64, ConfigError> {
    value.ok_or_else(|| invalid(field, "required for this motion kind"))
}

impl MotionSection {
    pub fn to_spec(&self, path: &str) -> Result<MotionSpec, ConfigError> {
        let field = |name: &str| format!("{path}.{name}");
        Ok(match self.kind {
            MotionKind::Stable => {
                let c1 = require(self.c1, &field("c1"))?;
                MotionSpec::StrictlyStable {
                    alpha: require(self.alpha, &field("alpha"))?,
                    c1,
                    c2: self.c2.unwrap_or(c1),
                    a: self.a.unwrap_or(0.0),
                }
            }
            MotionKind::NonsymmetricOneStable => MotionSpec::NonSymmetricOneStable {
                c1: require(self.c1, &field("c1"))?,
                c2: require(self.c2, &field("c2"))?,
                a: self.a.unwrap_or(0.0),
            },
            MotionKind::Brownian => MotionSpec::Brownian {
                b: require(self.b, &field("b"))?,
            },
            MotionKind::Composite => MotionSpec::Composite(
                self.components
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c.to_spec(&format!("{path}.components[{i}]")))
                    .collect::<Result<_, _>>()?,
            ),
        })
    }
}

/// A validated model with its derived constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub branching: BranchingConfig,
    pub motion: MotionSpec,
    pub scale: TailScale,
    pub lambda: f64,
    /// `ϑ` (analytic route).
    pub theta: f64,
    pub extinction: f64,
}

impl Model {
    pub fn from_config(cfg: &Config) -> Result<Self, ConfigError> {
        let law = OffspringLaw::new(&cfg.offspring.p).map_err(|e| locate("offspring", e))?;
        let mut branching =
            BranchingConfig::new(law, cfg.offspring.beta).map_err(|e| locate("offspring", e))?;
        if let Some(cap) = cfg.offspring.population_cap {
            if cap == 0 {
                return Err(invalid("offspring.population_cap", "must be positive"));
            }
            branching = branching.with_population_cap(cap);
        }
        let motion = cfg.motion.to_spec("motion")?;
        motion.validate().map_err(|e| locate("motion", e))?;
        let pure = motion.tail_scale().map_err(|e| locate("motion", e))?;
        let slowly_varying = match cfg.normalization.slowly_varying {
            SlowlyVaryingKind::One => SlowlyVarying::One,
            SlowlyVaryingKind::Log => SlowlyVarying::Log {
                power: require(cfg.normalization.log_power, "normalization.log_power")?,
            },
        };
        let scale = TailScale::new(pure.alpha, pure.q1, pure.q2, slowly_varying)
            .map_err(|e| locate("normalization", e))?;
        let ex = &cfg.experiment;
        if !(ex.t >= 0.0) || !ex.t.is_finite() {
            return Err(invalid("experiment.t", "must be non-negative and finite"));
        }
        if ex.t_grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(invalid("experiment.t_grid", "times must be positive and finite"));
        }
        if ex.truncation <= 0.0 || !ex.truncation.is_finite() {
            return Err(invalid("experiment.truncation", "must be positive and finite"));
        }
        if !(ex.front_level > 0.0 && ex.front_level < 1.0) {
            return Err(invalid("experiment.front_level", "must lie in (0, 1)"));
        }
        let lambda = branching.lambda();
        let theta = theta_constant(&branching, ThetaMode::Analytic, &mut replication_stream(0, 0))
            .map_err(|e| locate("offspring", e))?
            .value;
        let extinction = extinction_probability(&branching.offspring);
        Ok(Self {
            branching,
            motion,
            scale,
            lambda,
            theta,
            extinction,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const YULE: &str = include_str!("../configs/yule.toml");

    #[test]
    fn bundled_config_resolves() {
        let cfg = Config::from_toml(YULE).unwrap();
        let model = Model::from_config(&cfg).unwrap();
        assert_eq!(model.lambda, 1.0);
        assert_eq!(model.theta, 1.0);
        assert_eq!(model.extinction, 0.0);
        assert!((model.scale.q1 - 1.0).abs() < 1e-12);
        assert_eq!(cfg.seed(), 0xB1EF);
        assert_eq!(cfg.experiment.t_grid, vec![4.0, 6.0, 8.0]);
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = Config::from_toml(YULE).unwrap();
        assert_eq!(Config::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn negative_beta_names_the_field() {
        let text = YULE.replace("beta = 1.0", "beta = -1.0");
        let err = Model::from_config(&Config::from_toml(&text).unwrap()).unwrap_err();
        assert!(err.to_string().contains("offspring.beta"), "{err}");
    }

    #[test]
    fn missing_and_unknown_fields() {
        assert!(Config::from_toml("[offspring]\np = [0, 0, 1]\n").is_err());
        let text = YULE.replace("c2 = 1.0", "c2 = 1.0\nc3 = 2.0");
        assert!(Config::from_toml(&text).is_err());
        let text = YULE.replace("alpha = 1.5\n", "");
        let err = Model::from_config(&Config::from_toml(&text).unwrap()).unwrap_err();
        assert!(err.to_string().contains("motion.alpha"), "{err}");
    }

    #[test]
    fn composite_and_log_normalization() {
        let text = r#"
[offspring]
p = [0.25, 0.0, 0.75]
beta = 2.0

[motion]
kind = "composite"

[[motion.components]]
kind = "stable"
alpha = 0.8
c1 = 1.0
c2 = 0.5

[[motion.components]]
kind = "brownian"
b = 1.0

[normalization]
slowly_varying = "log"
log_power = 1.0
"#;
        let model = Model::from_config(&Config::from_toml(text).unwrap()).unwrap();
        assert_eq!(model.scale.alpha, 0.8);
        assert!(matches!(model.scale.slowly_varying, SlowlyVarying::Log { power } if power == 1.0));
        assert!((model.extinction - 1.0 / 3.0).abs() < 1e-12);
        assert!(model.theta < 1.0 / model.lambda);
    }
}
