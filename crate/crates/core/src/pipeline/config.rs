use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::RunError;
use crate::camera::BoardUpAxis;
use crate::physics::{ExperimentKind, ExperimentSpec, RegimeOptions, StdKind};
use crate::synth::{Motion, ScenarioConfig, Scenario};

pub const CONFIG_VERSION: u32 = 1;

fn default_version() -> u32 {
    CONFIG_VERSION
}

fn one() -> usize {
    1
}

fn default_model() -> String {
    "prediction".into()
}

/// One JSON document drives every batch mode; each mode reads its sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Material table JSON; the built-in table when absent.
    #[serde(default)]
    pub material_table: Option<PathBuf>,
    #[serde(default)]
    pub std: StdKind,
    #[serde(default)]
    pub regime: RegimeOptions,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Synthetic experiments for `simulate` and `validate`.
    #[serde(default)]
    pub experiments: Vec<ExperimentEntry>,
    /// Replace the true intrinsics with ones calibrated from synthetic views.
    #[serde(default)]
    pub calibration: Option<CalibrationEntry>,
    /// Recorded bundles for `estimate`.
    #[serde(default)]
    pub estimates: Vec<EstimateEntry>,
    /// Ground-truth / prediction pairs for `metrics`.
    #[serde(default)]
    pub metrics: Vec<MetricsEntry>,
    /// Synthetic intuitive-physics scenes scored by `validate`.
    #[serde(default)]
    pub scenes: Option<ScenesEntry>,
    /// Row label of the mIoU table.
    #[serde(default = "default_model")]
    pub model: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub gravity_rel: f64,
    pub friction_abs: f64,
    pub viscosity_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { gravity_rel: 0.02, friction_abs: 0.05, viscosity_rel: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExperimentEntry {
    pub material: String,
    pub scenario: ScenarioConfig,
    #[serde(default = "one")]
    pub repeats: usize,
}

fn ten() -> usize {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CalibrationEntry {
    #[serde(default = "ten")]
    pub views: usize,
    #[serde(default)]
    pub noise_px: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct EstimateEntry {
    pub material: String,
    pub bundle: PathBuf,
    pub spec: ExperimentSpec,
    #[serde(default)]
    pub object_id: Option<String>,
    #[serde(default)]
    pub intrinsics: Option<PathBuf>,
    #[serde(default)]
    pub up_axis: BoardUpAxis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct MetricsEntry {
    /// Column label, e.g. "Ball Bounce".
    pub scenario: String,
    pub gt: PathBuf,
    pub pred: PathBuf,
    /// Leading frames to skip; the ground truth's conditioning count when absent.
    #[serde(default)]
    pub skip: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum PredictionKind {
    #[default]
    Frozen,
    Dilated,
    Identity,
}

fn all_scenarios() -> Vec<Scenario> {
    Scenario::ALL.to_vec()
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ScenesEntry {
    #[serde(default = "all_scenarios")]
    pub scenarios: Vec<Scenario>,
    #[serde(default = "two")]
    pub videos: usize,
    #[serde(default)]
    pub prediction: PredictionKind,
}

/// Estimator setup implied by a synthetic scenario, and the true value.
pub fn spec_for(motion: &Motion) -> Option<(ExperimentSpec, f64)> {
    Some(match *motion {
        Motion::GravityFreefall { g } => (ExperimentSpec { g_ref: g, ..ExperimentSpec::new(ExperimentKind::GravityFreefall) }, g),
        Motion::GravityParabolic { g, .. } => {
            (ExperimentSpec { g_ref: g, ..ExperimentSpec::new(ExperimentKind::GravityParabolic) }, g)
        }
        Motion::FrictionIncline { g, mu, theta_rad } => (ExperimentSpec { g_ref: g, ..ExperimentSpec::friction(theta_rad) }, mu),
        Motion::ViscositySettling { g, eta, sphere_radius_m, rho_s, rho_f, .. } => {
            (ExperimentSpec { g_ref: g, ..ExperimentSpec::settling(sphere_radius_m, rho_s, rho_f) }, eta)
        }
        Motion::TranslatingObject { .. } | Motion::OcclusionPass { .. } => return None,
    })
}

/// Config as loaded, plus the directory relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => RunError::InputMissing(path.display().to_string()),
            _ => RunError::ConfigInvalid(format!("{}: {e}", path.display())),
        })?;
        let config: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| RunError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, base_dir })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

impl PipelineConfig {
    pub fn check_common(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::ConfigInvalid(m));
        if self.version != CONFIG_VERSION {
            return bad(format!("config version {} is not supported (expected {CONFIG_VERSION})", self.version));
        }
        if !(self.regime.threshold > 0.0) {
            return bad("regime.threshold must be positive".into());
        }
        let t = self.tolerances;
        if !(t.gravity_rel > 0.0 && t.friction_abs > 0.0 && t.viscosity_rel > 0.0) {
            return bad("tolerances must be positive".into());
        }
        for e in &self.experiments {
            if e.repeats == 0 {
                return bad(format!("experiment {:?}: repeats must be ≥ 1", e.material));
            }
            if spec_for(&e.scenario.motion).is_none() {
                return bad(format!("experiment {:?}: {} has no physical parameter", e.material, e.scenario.motion.kind_name()));
            }
            e.scenario.validate().map_err(|err| RunError::ConfigInvalid(format!("experiment {:?}: {err}", e.material)))?;
        }
        if let Some(c) = &self.calibration {
            if c.views < 3 || !(c.noise_px >= 0.0) {
                return bad("calibration needs ≥ 3 views and noise_px ≥ 0".into());
            }
        }
        if let Some(s) = &self.scenes {
            if s.scenarios.is_empty() || s.videos == 0 {
                return bad("scenes need at least one scenario and one video".into());
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the effective config.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Per-run seed derived from the base seed and the run's position.
pub fn derive_seed(base: u64, entry: u64, repeat: u64) -> u64 {
    let mut z = base ^ entry.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ repeat.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// JSON schema of [`PipelineConfig`], as published in `schema/config.schema.json`.
pub fn config_schema() -> String {
    let schema = schemars::schema_for!(PipelineConfig);
    let mut s = serde_json::to_string_pretty(&schema).expect("schema serializes");
    s.push('\n');
    s
}
