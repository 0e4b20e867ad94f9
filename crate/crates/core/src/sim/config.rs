//! Scenario configuration: a human-readable TOML file with scenario knobs,
//! per-segment gain coefficients, and optional material overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::actuation::PressureLimits;
use crate::controller::GainCoefficients;
use crate::pcc::PccMode;
use crate::rod::MaterialParams;

/// Reference-trajectory family of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    #[default]
    Extension,
    Bending,
    Custom,
}

/// Configuration and parse errors, carrying the offending field where known.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config serialization error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Per-segment reference entry for custom scenarios: squared-sine offsets
/// on the configuration vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CustomReference {
    pub v_amp: [f64; 3],
    pub u_amp: [f64; 3],
}

/// Solver knobs exposed in the scenario file.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Normalized free-end residual bound for the tracking loop.
    pub residual_tol: f64,
    pub max_iters: usize,
    pub fd_epsilon: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        // The closed-loop shooting Jacobian conditioning grows like
        // exp(sum g_p L); 1e-6 sits well above the attainable f64 floor
        // while still being far below any physically meaningful force.
        Self {
            residual_tol: 1e-6,
            max_iters: 50,
            fd_epsilon: 1e-6,
        }
    }
}

/// Scenario description consumed by [`crate::sim::run_tracking`].
///
/// Segments are labeled `1..=N` counting from the free tip: segment 1 is
/// the distal segment, segment N is mounted at the base. Gain entries and
/// custom references are listed in label order.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    /// Per-segment gain coefficients in label order (1 = distal). Defaults
    /// to the tuned two-segment values when omitted.
    #[serde(default)]
    pub gains: Vec<GainCoefficients>,
    /// Per-segment custom references in label order; required for
    /// `kind = "custom"`, ignored otherwise.
    #[serde(default)]
    pub reference: Vec<CustomReference>,
    /// Material parameters; Table-defaults when omitted.
    #[serde(default = "MaterialParams::silicone_segment")]
    pub material: MaterialParams,
    #[serde(default)]
    pub limits: PressureLimits,
    #[serde(default)]
    pub solver: SolverSettings,
}

/// The `[scenario]` table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    #[serde(default)]
    pub kind: ScenarioKind,
    #[serde(default = "defaults::segments")]
    pub segments: usize,
    #[serde(default = "defaults::dt")]
    pub dt: f64,
    #[serde(default = "defaults::duration")]
    pub duration: f64,
    #[serde(default = "defaults::nodes_per_segment")]
    pub nodes_per_segment: usize,
    /// Extension amplitude (dimensionless).
    #[serde(default = "defaults::a")]
    pub a: f64,
    /// Segment-1 bending amplitude (1/m).
    #[serde(default = "defaults::b")]
    pub b: f64,
    /// Segment-2 bending amplitude (1/m).
    #[serde(default = "defaults::c")]
    pub c: f64,
    /// Angular frequency (rad/s); defaults to 2 pi / 100 for extension and
    /// 2 pi / 50 for bending scenarios.
    #[serde(default)]
    pub omega: Option<f64>,
    /// Pressure-regulator lag time constant (s); 0 disables the lag.
    #[serde(default)]
    pub lag_time_constant: f64,
    #[serde(default)]
    pub pcc_mode: PccMode,
    /// Standard deviation of the virtual tip-position measurement noise (m).
    #[serde(default)]
    pub noise_sigma: f64,
    /// Seed for the measurement-noise generator; unused when sigma is 0.
    #[serde(default)]
    pub seed: u64,
    /// Default output path for the trajectory log.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

mod defaults {
    pub fn segments() -> usize {
        2
    }
    pub fn dt() -> f64 {
        0.05
    }
    pub fn duration() -> f64 {
        150.0
    }
    pub fn nodes_per_segment() -> usize {
        10
    }
    pub fn a() -> f64 {
        0.1
    }
    pub fn b() -> f64 {
        1.5
    }
    pub fn c() -> f64 {
        -3.0
    }
}

impl Default for ScenarioSection {
    fn default() -> Self {
        toml::from_str("").expect("empty scenario section deserializes from defaults")
    }
}

impl ScenarioConfig {
    /// The extension-tracking scenario with default parameters.
    pub fn extension_default() -> Self {
        Self {
            scenario: ScenarioSection {
                kind: ScenarioKind::Extension,
                ..Default::default()
            },
            gains: Vec::new(),
            reference: Vec::new(),
            material: MaterialParams::silicone_segment(),
            limits: PressureLimits::default(),
            solver: SolverSettings::default(),
        }
    }

    /// The bending-tracking scenario with default parameters.
    pub fn bending_default() -> Self {
        let mut cfg = Self::extension_default();
        cfg.scenario.kind = ScenarioKind::Bending;
        cfg
    }

    /// Angular frequency, falling back to the scenario-family default.
    pub fn omega(&self) -> f64 {
        self.scenario.omega.unwrap_or(match self.scenario.kind {
            ScenarioKind::Extension => 2.0 * std::f64::consts::PI / 100.0,
            ScenarioKind::Bending | ScenarioKind::Custom => 2.0 * std::f64::consts::PI / 50.0,
        })
    }

    /// Gain coefficients for a 1-based segment label, falling back to the
    /// tuned defaults (segment 1 distal, others proximal).
    pub fn gains_for_label(&self, label: usize) -> GainCoefficients {
        self.gains
            .get(label - 1)
            .copied()
            .unwrap_or(if label == 1 {
                GainCoefficients::segment1()
            } else {
                GainCoefficients::segment2()
            })
    }

    /// Validates cross-field invariants.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.scenario;
        if !(s.dt > 0.0) || !s.dt.is_finite() {
            return Err(invalid("scenario.dt", format!("{} must be > 0", s.dt)));
        }
        if !(s.duration > 0.0) || !s.duration.is_finite() {
            return Err(invalid(
                "scenario.duration",
                format!("{} must be > 0", s.duration),
            ));
        }
        if s.segments < 1 {
            return Err(invalid("scenario.segments", "at least one segment"));
        }
        if s.nodes_per_segment < 2 {
            return Err(invalid(
                "scenario.nodes_per_segment",
                "at least two intervals per segment",
            ));
        }
        for (name, value) in [("a", s.a), ("b", s.b), ("c", s.c)] {
            if !value.is_finite() {
                return Err(invalid(&format!("scenario.{name}"), "must be finite"));
            }
        }
        if let Some(w) = s.omega {
            if !w.is_finite() {
                return Err(invalid("scenario.omega", "must be finite"));
            }
        }
        if s.lag_time_constant < 0.0 || !s.lag_time_constant.is_finite() {
            return Err(invalid("scenario.lag_time_constant", "must be >= 0"));
        }
        if s.noise_sigma < 0.0 || !s.noise_sigma.is_finite() {
            return Err(invalid("scenario.noise_sigma", "must be >= 0"));
        }
        if !self.gains.is_empty() && self.gains.len() != s.segments {
            return Err(invalid(
                "gains",
                format!(
                    "expected {} entries (one per segment label), found {}",
                    s.segments,
                    self.gains.len()
                ),
            ));
        }
        if s.kind == ScenarioKind::Custom && self.reference.len() != s.segments {
            return Err(invalid(
                "reference",
                format!(
                    "custom scenarios need {} per-segment reference entries, found {}",
                    s.segments,
                    self.reference.len()
                ),
            ));
        }
        if !(self.solver.residual_tol > 0.0) {
            return Err(invalid("solver.residual_tol", "must be > 0"));
        }
        if self.solver.max_iters == 0 {
            return Err(invalid("solver.max_iters", "must be >= 1"));
        }
        if !(self.limits.p_min <= self.limits.p_max) {
            return Err(invalid("limits", "p_min must not exceed p_max"));
        }
        self.material
            .validate()
            .map_err(|e| invalid("material", e.to_string()))?;
        Ok(())
    }

    /// Parses and validates a TOML scenario string.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serializes the configuration back to TOML.
    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string_pretty(self)?)
    }
}

/// Loads and validates a scenario file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ScenarioConfig::from_toml_str(&text)
}
