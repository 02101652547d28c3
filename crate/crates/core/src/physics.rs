//! Fitted kinematics → gravitational acceleration, kinetic friction and
//! Stokes viscosity, plus per-material aggregation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{self, FitDiagnostics, FitError, FitMethod, PolyFit};
use crate::ingest::Track3D;

pub const STEEL_DENSITY: f64 = 7850.0;
/// Speeds below this are treated as a stalled sphere (m/s).
const MIN_TERMINAL_VELOCITY: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("experiment kind {got} cannot be used for {wanted}")]
    WrongKind { wanted: &'static str, got: ExperimentKind },
    #[error("experiment is missing {0}")]
    MissingParameter(&'static str),
    #[error("invalid experiment parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("track is not in the terminal regime (velocity change {rel:.4}, quadratic gain {gain:.4})")]
    NotTerminal { rel: f64, gain: f64 },
    #[error("terminal velocity {0} m/s is too small")]
    ZeroVelocity(f64),
    #[error("no values to aggregate")]
    EmptyInput,
    #[error("unknown material {0:?}")]
    UnknownMaterial(String),
    #[error("material table: {0}")]
    Table(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    GravityFreefall,
    GravityParabolic,
    FrictionIncline,
    ViscositySettling,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExperimentKind::GravityFreefall => "gravity_freefall",
            ExperimentKind::GravityParabolic => "gravity_parabolic",
            ExperimentKind::FrictionIncline => "friction_incline",
            ExperimentKind::ViscositySettling => "viscosity_settling",
        })
    }
}

impl ExperimentKind {
    pub fn quantity(self) -> Quantity {
        match self {
            ExperimentKind::GravityFreefall | ExperimentKind::GravityParabolic => Quantity::Gravity,
            ExperimentKind::FrictionIncline => Quantity::Friction,
            ExperimentKind::ViscositySettling => Quantity::Viscosity,
        }
    }
}

/// Recovered physical quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Gravity,
    Friction,
    Viscosity,
}

impl Quantity {
    pub fn unit(self) -> &'static str {
        match self {
            Quantity::Gravity => "m/s^2",
            Quantity::Friction => "dimensionless",
            Quantity::Viscosity => "Pa.s",
        }
    }
}

fn default_g() -> f64 {
    9.81
}

/// Known setup of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Ramp angle (rad).
    #[serde(default)]
    pub theta_rad: Option<f64>,
    #[serde(default)]
    pub sphere_radius_m: Option<f64>,
    #[serde(default)]
    pub rho_s: Option<f64>,
    #[serde(default)]
    pub rho_f: Option<f64>,
    #[serde(default = "default_g")]
    pub g_ref: f64,
    #[serde(default)]
    pub fit_method: FitMethod,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind) -> Self {
        Self { kind, theta_rad: None, sphere_radius_m: None, rho_s: None, rho_f: None, g_ref: default_g(), fit_method: FitMethod::Ols }
    }

    pub fn friction(theta_rad: f64) -> Self {
        Self { theta_rad: Some(theta_rad), ..Self::new(ExperimentKind::FrictionIncline) }
    }

    pub fn settling(radius: f64, rho_s: f64, rho_f: f64) -> Self {
        Self {
            sphere_radius_m: Some(radius),
            rho_s: Some(rho_s),
            rho_f: Some(rho_f),
            ..Self::new(ExperimentKind::ViscositySettling)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GravityEstimate {
    /// Up-positive gravitational acceleration (m/s²).
    pub g: f64,
    /// Horizontal acceleration; expected ≈ 0 (m/s²).
    pub horizontal_acceleration: Option<f64>,
    pub vertical_fit: PolyFit,
}

/// Gravitational acceleration from the vertical coordinate of a falling or
/// launched object.
pub fn gravity_from_track(track: &Track3D, spec: &ExperimentSpec) -> Result<GravityEstimate, PhysicsError> {
    if spec.kind.quantity() != Quantity::Gravity {
        return Err(PhysicsError::WrongKind { wanted: "gravity", got: spec.kind });
    }
    let vertical = require_samples(track.vertical())?;
    let vertical_fit = fit::fit_poly_with(&vertical, 2, spec.fit_method)?;
    let g = -fit::acceleration_of(&vertical_fit)?;
    let horizontal_acceleration = if spec.kind == ExperimentKind::GravityParabolic {
        let fit_h = fit::fit_poly_with(&track.horizontal(), 2, spec.fit_method)?;
        Some(fit::acceleration_of(&fit_h)?)
    } else {
        None
    };
    Ok(GravityEstimate { g, horizontal_acceleration, vertical_fit })
}

fn require_samples(s: Vec<(f64, f64)>) -> Result<Vec<(f64, f64)>, PhysicsError> {
    if s.len() < 4 {
        return Err(FitError::TooFewSamples { needed: 4, got: s.len() }.into());
    }
    Ok(s)
}

/// μ = (g sin θ − a) / (g cos θ).
pub fn friction_coefficient(acceleration: f64, theta: f64, g: f64) -> f64 {
    (g * theta.sin() - acceleration) / (g * theta.cos())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrictionEstimate {
    pub mu: f64,
    /// Magnitude of the in-plane acceleration vector (m/s²).
    pub acceleration: f64,
    /// Set when a > g sin θ, i.e. μ < 0: the fit and the setup disagree.
    pub negative: bool,
}

pub fn friction_from_track(track: &Track3D, spec: &ExperimentSpec) -> Result<FrictionEstimate, PhysicsError> {
    if spec.kind != ExperimentKind::FrictionIncline {
        return Err(PhysicsError::WrongKind { wanted: "friction", got: spec.kind });
    }
    let theta = spec.theta_rad.ok_or(PhysicsError::MissingParameter("theta_rad"))?;
    if !(theta > 0.0 && theta < std::f64::consts::FRAC_PI_2) {
        return Err(PhysicsError::InvalidParameter(format!("ramp angle {theta} rad outside (0, π/2)")));
    }
    let up = require_samples(track.vertical())?;
    let across = track.horizontal();
    let a_up = fit::acceleration_of(&fit::fit_poly_with(&up, 2, spec.fit_method)?)?;
    let a_across = fit::acceleration_of(&fit::fit_poly_with(&across, 2, spec.fit_method)?)?;
    let acceleration = a_up.hypot(a_across);
    let mu = friction_coefficient(acceleration, theta, spec.g_ref);
    Ok(FrictionEstimate { mu, acceleration, negative: mu < 0.0 })
}

/// η = 2 r² (ρ_s − ρ_f) g / (9 v_t).
pub fn stokes_viscosity(radius: f64, rho_s: f64, rho_f: f64, g: f64, v_t: f64) -> f64 {
    2.0 * radius * radius * (rho_s - rho_f) * g / (9.0 * v_t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViscosityEstimate {
    pub eta: f64,
    pub terminal_velocity: f64,
    pub regime: FitDiagnostics,
    pub regime_passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default)]
pub struct RegimeOptions {
    pub threshold: f64,
    /// Estimate even if the regime check fails.
    pub allow_transient: bool,
}

impl Default for RegimeOptions {
    fn default() -> Self {
        Self { threshold: fit::DEFAULT_TERMINAL_THRESHOLD, allow_transient: false }
    }
}

pub fn viscosity_from_track(
    track: &Track3D,
    spec: &ExperimentSpec,
    opts: RegimeOptions,
) -> Result<ViscosityEstimate, PhysicsError> {
    if spec.kind != ExperimentKind::ViscositySettling {
        return Err(PhysicsError::WrongKind { wanted: "viscosity", got: spec.kind });
    }
    let r = spec.sphere_radius_m.ok_or(PhysicsError::MissingParameter("sphere_radius_m"))?;
    let rho_s = spec.rho_s.ok_or(PhysicsError::MissingParameter("rho_s"))?;
    let rho_f = spec.rho_f.ok_or(PhysicsError::MissingParameter("rho_f"))?;
    if !(r > 0.0) || !(rho_s > rho_f) {
        return Err(PhysicsError::InvalidParameter("need r > 0 and ρ_s > ρ_f".into()));
    }
    let vertical = require_samples(track.vertical())?;
    let check = fit::terminal_regime_check(&vertical, opts.threshold)?;
    if !check.passed && !opts.allow_transient {
        return Err(PhysicsError::NotTerminal {
            rel: check.diagnostics.relative_velocity_change,
            gain: check.diagnostics.quad_over_linear_gain,
        });
    }
    let line = if spec.fit_method == FitMethod::Ols {
        check.linear.clone()
    } else {
        fit::fit_poly_with(&vertical, 1, spec.fit_method)?
    };
    let v_t = fit::velocity_of(&line)?.abs();
    if v_t < MIN_TERMINAL_VELOCITY {
        return Err(PhysicsError::ZeroVelocity(v_t));
    }
    Ok(ViscosityEstimate {
        eta: stokes_viscosity(r, rho_s, rho_f, spec.g_ref, v_t),
        terminal_velocity: v_t,
        regime: check.diagnostics,
        regime_passed: check.passed,
    })
}

/// Ground-truth interval for one material. Single-valued references are
/// stored as the interval implied by their last stated digit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialEntry {
    pub quantity: Quantity,
    pub gt_low: f64,
    pub gt_high: f64,
    pub gt_nominal: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fluid_density: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialTable {
    pub materials: BTreeMap<String, MaterialEntry>,
}

impl MaterialTable {
    pub fn get(&self, name: &str) -> Result<&MaterialEntry, PhysicsError> {
        self.materials.get(name).ok_or_else(|| PhysicsError::UnknownMaterial(name.into()))
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        for (name, e) in &self.materials {
            if !(e.gt_low <= e.gt_high) || !e.gt_low.is_finite() || !e.gt_high.is_finite() {
                return Err(PhysicsError::Table(format!("{name}: gt_low must not exceed gt_high")));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PhysicsError> {
        let text = std::fs::read_to_string(path).map_err(|e| PhysicsError::Table(format!("{}: {e}", path.display())))?;
        let t: Self = serde_json::from_str(&text).map_err(|e| PhysicsError::Table(format!("{}: {e}", path.display())))?;
        t.validate()?;
        Ok(t)
    }

    /// Reference values of the physical-parameter validation set. Fluid
    /// densities are handbook values.
    pub fn builtin() -> Self {
        let entry = |quantity, lo, hi, nominal, rho: Option<f64>| MaterialEntry {
            quantity,
            gt_low: lo,
            gt_high: hi,
            gt_nominal: nominal,
            fluid_density: rho,
        };
        use Quantity::*;
        let materials = [
            ("free_fall", entry(Gravity, 9.805, 9.815, 9.81, None)),
            ("parabolic", entry(Gravity, 9.805, 9.815, 9.81, None)),
            ("glycerine", entry(Viscosity, 1.15, 1.25, 1.2, Some(1260.0))),
            ("corn_syrup", entry(Viscosity, 5.0, 7.0, 6.0, Some(1380.0))),
            ("honey", entry(Viscosity, 14.05, 14.15, 14.1, Some(1420.0))),
            ("wood", entry(Friction, 0.2, 0.5, 0.35, None)),
            ("rubber", entry(Friction, 0.5, 2.0, 1.25, None)),
            ("sandpaper_80", entry(Friction, 0.7, 1.1, 0.9, None)),
            ("sandpaper_3000", entry(Friction, 0.2, 0.5, 0.35, None)),
            ("plastic", entry(Friction, 0.05, 0.2, 0.125, None)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Self { materials }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum StdKind {
    #[default]
    Population,
    Sample,
}

/// One row of a parameter table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub material: String,
    pub quantity: Quantity,
    pub unit: String,
    pub per_video: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub gt_low: f64,
    pub gt_high: f64,
    pub gt_nominal: f64,
    pub in_range: bool,
    /// Distance from the mean to the ground-truth interval (0 inside).
    pub deviation: f64,
    /// mean − nominal ground truth.
    pub nominal_error: f64,
}

pub fn mean_std(values: &[f64], kind: StdKind) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let denom = match kind {
        StdKind::Population => n,
        StdKind::Sample if values.len() > 1 => n - 1.0,
        StdKind::Sample => 1.0,
    };
    (mean, (ss / denom).sqrt())
}

pub fn aggregate(
    values: &[f64],
    material: &str,
    table: &MaterialTable,
    std_kind: StdKind,
) -> Result<ParamEstimate, PhysicsError> {
    if values.is_empty() {
        return Err(PhysicsError::EmptyInput);
    }
    let entry = table.get(material)?;
    let (mean, std) = mean_std(values, std_kind);
    let in_range = mean >= entry.gt_low && mean <= entry.gt_high;
    let deviation = if mean < entry.gt_low {
        entry.gt_low - mean
    } else if mean > entry.gt_high {
        mean - entry.gt_high
    } else {
        0.0
    };
    Ok(ParamEstimate {
        material: material.into(),
        quantity: entry.quantity,
        unit: entry.quantity.unit().into(),
        per_video: values.to_vec(),
        mean,
        std,
        gt_low: entry.gt_low,
        gt_high: entry.gt_high,
        gt_nominal: entry.gt_nominal,
        in_range,
        deviation,
        nominal_error: mean - entry.gt_nominal,
    })
}
