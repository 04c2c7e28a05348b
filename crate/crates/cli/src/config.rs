//! Strict JSON experiment configuration.

use std::path::{Path, PathBuf};

use revolve_core::profiles::{builtin_profile, BuiltinProfile};
use revolve_core::simulator::{DiscreteDirection, EvolutionConfig, Switching};
use revolve_core::sphere::{recommended_resolution, AngleVector};
use revolve_core::RevolveError;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    VerifyOperators,
    LimitCoeffs,
    Simulate,
    Converge,
    Report,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::VerifyOperators => "verify-operators",
            Mode::LimitCoeffs => "limit-coeffs",
            Mode::Simulate => "simulate",
            Mode::Converge => "converge",
            Mode::Report => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionSpec {
    pub angles: Vec<f64>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SwitchingSpec {
    #[default]
    UniformSphere,
    Discrete { directions: Vec<DirectionSpec> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSpec {
    pub dimension: usize,
    pub epsilon: f64,
    pub profile: BuiltinProfile,
    #[serde(default = "unit_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    pub n_paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub switching: SwitchingSpec,
    #[serde(default)]
    pub initial_direction: Option<Vec<f64>>,
}

fn unit_horizon() -> f64 {
    1.0
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub mode: Option<Mode>,
    pub evolution: EvolutionSpec,
    #[serde(default)]
    pub grid_resolution: Option<usize>,
    #[serde(default)]
    pub eps_list: Vec<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "one")]
    pub replicates: usize,
}

fn schema(field: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Schema {
        field: field.into(),
        message: message.into(),
    }
}

/// Prefixes the field of a core validation error with `evolution.`.
fn nested(err: RevolveError) -> CliError {
    match err {
        RevolveError::InvalidConfig { field, message } => schema(format!("evolution.{field}"), message),
        other => CliError::from(other),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            schema(if path == "." { String::new() } else { path }, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    /// Re-checks every numeric constraint of the embedded types.
    pub fn validate(&self) -> Result<(), CliError> {
        self.evolution()?;
        if let Some(r) = self.grid_resolution {
            if r < 2 {
                return Err(schema("grid_resolution", "must be at least 2"));
            }
        }
        for (i, &e) in self.eps_list.iter().enumerate() {
            if !(e > 0.0 && e <= 1.0) {
                return Err(schema(format!("eps_list[{i}]"), format!("must lie in (0, 1], got {e}")));
            }
        }
        if self.replicates == 0 {
            return Err(schema("replicates", "must be at least 1"));
        }
        Ok(())
    }

    pub fn resolution(&self) -> usize {
        self.grid_resolution
            .unwrap_or_else(|| recommended_resolution(self.evolution.dimension))
    }

    /// The simulator configuration described by `evolution`.
    pub fn evolution(&self) -> Result<EvolutionConfig, CliError> {
        let spec = &self.evolution;
        let n = spec.dimension;
        if n < 2 {
            return Err(schema("evolution.dimension", format!("must be at least 2, got {n}")));
        }
        let profile = builtin_profile(spec.profile, n).map_err(|e| match e {
            RevolveError::InvalidConfig { message, .. } => schema("evolution.profile", message),
            other => schema("evolution.profile", other.to_string()),
        })?;
        let angles = |field: String, a: &[f64]| {
            AngleVector::new(a.to_vec()).map_err(|e| schema(field, e.to_string()))
        };
        let switching = match &spec.switching {
            SwitchingSpec::UniformSphere => Switching::UniformSphere,
            SwitchingSpec::Discrete { directions } => Switching::Discrete(
                directions
                    .iter()
                    .enumerate()
                    .map(|(i, d)| {
                        Ok(DiscreteDirection {
                            angles: angles(format!("evolution.switching.directions[{i}].angles"), &d.angles)?,
                            probability: d.probability,
                        })
                    })
                    .collect::<Result<_, CliError>>()?,
            ),
        };
        let initial_direction = match &spec.initial_direction {
            Some(a) => Some(angles("evolution.initial_direction".into(), a)?),
            None => None,
        };
        let config = EvolutionConfig {
            dimension: n,
            epsilon: spec.epsilon,
            profile,
            horizon: spec.horizon,
            x0: spec.x0.clone().unwrap_or_else(|| vec![0.0; n]),
            n_paths: spec.n_paths,
            seed: spec.seed,
            switching,
            initial_direction,
        };
        config.validate().map_err(nested)?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "evolution": {
            "dimension": 2,
            "epsilon": 0.1,
            "profile": {"kind": "msre_const", "c": 1.0},
            "n_paths": 10,
            "seed": 3
        }
    }"#;

    fn field_of(text: &str) -> String {
        match ExperimentConfig::from_json(text) {
            Err(CliError::Schema { field, .. }) => field,
            other => panic!("expected a schema error, got {other:?}"),
        }
    }

    #[test]
    fn parses_minimal_config_with_defaults() {
        let config = ExperimentConfig::from_json(BASE).unwrap();
        assert_eq!(config.replicates, 1);
        assert_eq!(config.resolution(), recommended_resolution(2));
        let evolution = config.evolution().unwrap();
        assert_eq!(evolution.x0, vec![0.0, 0.0]);
        assert_eq!(evolution.horizon, 1.0);
        assert_eq!(evolution.switching, Switching::UniformSphere);
    }

    #[test]
    fn negative_epsilon_names_the_field() {
        assert_eq!(field_of(&BASE.replace("0.1", "-0.1")), "evolution.epsilon");
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_path() {
        let text = BASE.replace("\"seed\": 3", "\"seed\": 3, \"sede\": 1");
        assert_eq!(field_of(&text), "evolution.sede");
        let text = BASE.replace("\"c\": 1.0", "\"c\": 1.0, \"c2\": 0");
        assert_eq!(field_of(&text), "evolution.profile");
        let text = BASE.replace("\"n_paths\": 10", "\"n_paths\": -10");
        assert_eq!(field_of(&text), "evolution.n_paths");
    }

    #[test]
    fn bad_discrete_law_is_reported() {
        let text = BASE.replace(
            "\"seed\": 3",
            r#""seed": 3, "switching": {"kind": "discrete", "directions": [{"angles": [7.0], "probability": 1.0}]}"#,
        );
        assert_eq!(field_of(&text), "evolution.switching.directions[0].angles");
        let text = BASE.replace(
            "\"seed\": 3",
            r#""seed": 3, "switching": {"kind": "discrete", "directions": [{"angles": [1.0], "probability": 0.5}]}"#,
        );
        assert_eq!(field_of(&text), "evolution.switching");
    }

    #[test]
    fn sin_theta1_is_rejected_in_the_plane() {
        let text = BASE.replace(r#"{"kind": "msre_const", "c": 1.0}"#, r#"{"kind": "sin_theta1"}"#);
        assert_eq!(field_of(&text), "evolution.profile");
    }

    #[test]
    fn sweep_values_are_checked() {
        let text = BASE.replacen('{', r#"{"eps_list": [0.1, 0.0],"#, 1);
        assert_eq!(field_of(&text), "eps_list[1]");
    }
}
