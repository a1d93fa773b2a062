//! Config file parsing. Files are TOML with a top-level `experiment` name
//! and a `[params]` table matching that experiment's parameter struct.
//! Unknown keys anywhere are rejected with the offending line, so typos
//! cannot silently fall back to defaults.

use colearn::experiments::{
    exp_byzantine_absolute, exp_byzantine_majority, exp_gradient_pac, exp_manipulability,
    exp_negative_example, exp_pac_curve, exp_strategyproof_1d, ByzantineAbsoluteParams,
    ByzantineMajorityParams, ExperimentError, ExperimentReport, GradientPacParams,
    ManipulabilityParams, NegativeExampleParams, PacCurveParams, Strategyproof1dParams,
};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::catalog::known_names;

#[derive(Debug)]
pub enum ConfigError {
    Parse(String),
    UnknownExperiment { got: String },
    SeedOverride(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Parse(msg) => write!(f, "{msg}"),
            ConfigError::UnknownExperiment { got } => {
                write!(f, "unknown experiment {got:?}; known experiments: {}", known_names())
            }
            ConfigError::SeedOverride(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// First pass: pull out the experiment name, ignoring everything else so
/// the second pass can report field errors against the right struct.
#[derive(Deserialize)]
struct NamePeek {
    experiment: Option<String>,
}

/// Second pass: the full file, strict. `P` is the parameter struct of the
/// named experiment; every one of them rejects unknown fields itself.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile<P> {
    #[allow(dead_code)]
    experiment: String,
    #[serde(default)]
    params: P,
}

#[derive(Debug, Clone)]
pub enum AnyParams {
    ByzantineAbsolute(ByzantineAbsoluteParams),
    ByzantineMajority(ByzantineMajorityParams),
    GradientPac(GradientPacParams),
    Manipulability(ManipulabilityParams),
    NegativeExample(NegativeExampleParams),
    PacCurve(PacCurveParams),
    Strategyproof1d(Strategyproof1dParams),
}

fn strict<P: DeserializeOwned + Default>(text: &str) -> Result<P, ConfigError> {
    toml::from_str::<ConfigFile<P>>(text)
        .map(|f| f.params)
        .map_err(|e| ConfigError::Parse(e.to_string().trim_end().to_string()))
}

impl AnyParams {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let peek: NamePeek = toml::from_str(text)
            .map_err(|e| ConfigError::Parse(e.to_string().trim_end().to_string()))?;
        let name = peek.experiment.ok_or_else(|| {
            ConfigError::Parse(
                "missing required key `experiment` (a string naming the experiment; see `list`)"
                    .to_string(),
            )
        })?;
        match name.as_str() {
            "byzantine_absolute" => Ok(AnyParams::ByzantineAbsolute(strict(text)?)),
            "byzantine_majority" => Ok(AnyParams::ByzantineMajority(strict(text)?)),
            "gradient_pac" => Ok(AnyParams::GradientPac(strict(text)?)),
            "manipulability" => Ok(AnyParams::Manipulability(strict(text)?)),
            "negative_example" => Ok(AnyParams::NegativeExample(strict(text)?)),
            "pac_curve" => Ok(AnyParams::PacCurve(strict(text)?)),
            "strategyproof_1d" => Ok(AnyParams::Strategyproof1d(strict(text)?)),
            _ => Err(ConfigError::UnknownExperiment { got: name }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AnyParams::ByzantineAbsolute(_) => "byzantine_absolute",
            AnyParams::ByzantineMajority(_) => "byzantine_majority",
            AnyParams::GradientPac(_) => "gradient_pac",
            AnyParams::Manipulability(_) => "manipulability",
            AnyParams::NegativeExample(_) => "negative_example",
            AnyParams::PacCurve(_) => "pac_curve",
            AnyParams::Strategyproof1d(_) => "strategyproof_1d",
        }
    }

    /// Replaces the seed list. Experiments without one refuse the override
    /// instead of ignoring it.
    pub fn override_seeds(&mut self, seeds: &[u64]) -> Result<(), ConfigError> {
        if seeds.is_empty() {
            return Err(ConfigError::SeedOverride(
                "seed override must list at least one seed".to_string(),
            ));
        }
        let list = seeds.to_vec();
        match self {
            AnyParams::ByzantineAbsolute(p) => p.seeds = list,
            AnyParams::ByzantineMajority(p) => p.seeds = list,
            AnyParams::GradientPac(p) => p.seeds = list,
            AnyParams::Manipulability(p) => p.seeds = list,
            AnyParams::PacCurve(p) => p.seeds = list,
            AnyParams::Strategyproof1d(p) => p.seeds = list,
            AnyParams::NegativeExample(_) => {
                return Err(ConfigError::SeedOverride(
                    "experiment negative_example is deterministic and has no seeds parameter"
                        .to_string(),
                ));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        match self {
            AnyParams::ByzantineAbsolute(p) => p.validate(),
            AnyParams::ByzantineMajority(p) => p.validate(),
            AnyParams::GradientPac(p) => p.validate(),
            AnyParams::Manipulability(p) => p.validate(),
            AnyParams::NegativeExample(p) => p.validate(),
            AnyParams::PacCurve(p) => p.validate(),
            AnyParams::Strategyproof1d(p) => p.validate(),
        }
    }

    pub fn run(&self, jobs: usize) -> Result<ExperimentReport, ExperimentError> {
        match self {
            AnyParams::ByzantineAbsolute(p) => exp_byzantine_absolute(p, jobs),
            AnyParams::ByzantineMajority(p) => exp_byzantine_majority(p, jobs),
            AnyParams::GradientPac(p) => exp_gradient_pac(p, jobs),
            AnyParams::Manipulability(p) => exp_manipulability(p, jobs),
            AnyParams::NegativeExample(p) => exp_negative_example(p, jobs),
            AnyParams::PacCurve(p) => exp_pac_curve(p, jobs),
            AnyParams::Strategyproof1d(p) => exp_strategyproof_1d(p, jobs),
        }
    }

    /// The fully resolved parameters, for the report's config echo.
    pub fn to_json(&self) -> serde_json::Value {
        let v = match self {
            AnyParams::ByzantineAbsolute(p) => serde_json::to_value(p),
            AnyParams::ByzantineMajority(p) => serde_json::to_value(p),
            AnyParams::GradientPac(p) => serde_json::to_value(p),
            AnyParams::Manipulability(p) => serde_json::to_value(p),
            AnyParams::NegativeExample(p) => serde_json::to_value(p),
            AnyParams::PacCurve(p) => serde_json::to_value(p),
            AnyParams::Strategyproof1d(p) => serde_json::to_value(p),
        };
        v.expect("parameter structs serialize")
    }
}
