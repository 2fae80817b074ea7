//! Run configuration. Every field has a default, so the materialized copy
//! written next to the outputs is a complete record of the run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use skt_core::continuation::SeedSide;
use skt_core::landau::SignMapGrid;
use skt_core::{Axis, B1Reading, ContinuationSettings, DWindow, EvolveSettings, ModelParams, Perturbation, Plane};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    pub grid: GridConfig,
    pub neutral_curves: NeutralCurvesConfig,
    pub landau: LandauConfig,
    pub hopf: HopfConfig,
    pub continuation: ContinueConfig,
    pub simulate: SimulateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelParams::reference(),
            grid: GridConfig::default(),
            neutral_curves: NeutralCurvesConfig::default(),
            landau: LandauConfig::default(),
            hopf: HopfConfig::default(),
            continuation: ContinueConfig::default(),
            simulate: SimulateConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Number of nodes on `[0, ell]`, endpoints included.
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: 101 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeutralCurvesConfig {
    pub plane: Plane,
    pub modes: Vec<u32>,
    pub window: DWindow,
    /// Mode pairs whose crossing is located and marked.
    pub ddp_pairs: Vec<(u32, u32)>,
    /// Upper end of the plotted curve-value axis; the lower end is 0.
    pub y_max: f64,
}

impl Default for NeutralCurvesConfig {
    fn default() -> Self {
        Self {
            plane: Plane::D12,
            modes: (1..=6).collect(),
            window: DWindow { d_min: 1e-4, d_max: 0.05, samples: 2000 },
            ddp_pairs: vec![(1, 2)],
            y_max: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandauConfig {
    pub modes: Vec<u32>,
    /// `None` evaluates the model point itself.
    pub grid: Option<SignMapGrid>,
}

impl Default for LandauConfig {
    fn default() -> Self {
        Self { modes: vec![1, 2], grid: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HopfConfig {
    pub d21: Axis,
    pub reading: B1Reading,
}

impl Default for HopfConfig {
    fn default() -> Self {
        Self { d21: Axis { min: 0.0, max: 0.03, samples: 61 }, reading: B1Reading::ModeTwo }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinueConfig {
    pub settings: ContinuationSettings,
    /// `d` at which the homogeneous branch starts.
    pub start_d: f64,
    /// Number of leading homogeneous pitchforks to switch at. The homogeneous
    /// scan stops after this many events unless `settings.max_events` is set.
    pub switches: usize,
    pub sides: Vec<SeedSide>,
    /// Embed states in the branch JSON instead of writing a binary sidecar.
    pub embed_states: bool,
    /// Partial branch JSON is rewritten every this many accepted points.
    pub flush_every: usize,
}

impl Default for ContinueConfig {
    fn default() -> Self {
        Self {
            settings: ContinuationSettings::default(),
            start_d: 0.06,
            switches: 2,
            sides: vec![SeedSide::Plus],
            embed_states: false,
            flush_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialState {
    Homogeneous,
    /// Row `index` of a binary state file written by `continue`.
    States { path: PathBuf, index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub settings: EvolveSettings,
    pub initial: InitialState,
    pub perturbation: Option<Perturbation>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            settings: EvolveSettings::default(),
            initial: InitialState::Homogeneous,
            perturbation: Some(Perturbation::Noise { eps: 1e-4, seed: 0 }),
        }
    }
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
        path: Some(e.path().to_string()),
        message: e.into_inner().to_string(),
    })
}

pub fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
    let Some(path) = path else { return Ok(RunConfig::default()) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config { path: None, message: format!("cannot read {}: {e}", path.display()) })?;
    parse(&text)
}

pub fn to_json(config: &RunConfig) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(config).expect("config serializes");
    bytes.push(b'\n');
    bytes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        assert_eq!(parse("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn materialized_copy_round_trips() {
        let c = RunConfig::default();
        assert_eq!(parse(std::str::from_utf8(&to_json(&c)).unwrap()).unwrap(), c);
    }

    #[test]
    fn errors_carry_the_json_path() {
        let err = parse(r#"{"continuation": {"settings": {"ds_max": "big"}}}"#).unwrap_err();
        match err {
            CliError::Config { path, .. } => assert_eq!(path.as_deref(), Some("continuation.settings.ds_max")),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse(r#"{"model": {"r1": 1, "bogus": 2}}"#).unwrap_err();
        assert!(matches!(err, CliError::Config { path: Some(p), .. } if p.starts_with("model")));
    }
}
