//! Scenario description: carrier, array settings, platform motion,
//! reflectors and LOS blockage, loaded from TOML.
//!
//! ```toml
//! carrier_freq_hz = 28.3e9
//! tx_power_dbm = -12.0
//! tx_beam_type = 3
//! rx_beam_type = 2
//! tx_boresight = { azimuth_deg = 180.0, elevation_deg = 0.0 }
//! noise_figure_db = 5.0          # omit for a noiseless run
//! averaging = 1
//! seed = 7
//!
//! [tx_trajectory]
//! waypoints = [{ t = 0.0, east = 0.0, north = 50.0, up = 2.9 }]
//!
//! [rx_trajectory]
//! heading_deg = 0.0              # optional; otherwise direction of travel
//! waypoints = [
//!     { t = 0.0, east = 0.0, north = 0.0, up = 2.0 },
//!     { t = 1.0, east = 0.0, north = 8.9, up = 2.0 },
//! ]
//!
//! [[reflectors]]
//! position = { east = 3.0, north = 20.0, up = 1.2 }
//! loss_db = 6.0
//!
//! [[los_blocked]]
//! start = 0.4
//! end = 0.6
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codebook::{BeamType, CodebookError};
use crate::geo::{Direction, Enu, Trajectory, Waypoint};
use crate::waveform::ZcConfig;

/// Maximum safe RF input level of the transmit array.
pub const MAX_TX_INPUT_DBM: f64 = -12.0;
pub const DEFAULT_FLOOR_DBM: f64 = -100.0;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("scenario parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("reading scenario: {0}")]
    Io(#[from] std::io::Error),
}

impl ScenarioError {
    fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// A point specular scatterer with a fixed reflection loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reflector {
    pub position: Enu,
    pub loss_db: f64,
}

/// Closed time interval on the scenario time base, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }
}

fn default_carrier() -> f64 {
    28.3e9
}
fn default_tx_power() -> f64 {
    MAX_TX_INPUT_DBM
}
fn default_tx_type() -> u8 {
    3
}
fn default_rx_type() -> u8 {
    2
}
fn default_averaging() -> usize {
    1
}
fn default_floor() -> f64 {
    DEFAULT_FLOOR_DBM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_carrier")]
    pub carrier_freq_hz: f64,
    /// Power at the TX array input.
    #[serde(default = "default_tx_power")]
    pub tx_power_dbm: f64,
    #[serde(default = "default_tx_type")]
    pub tx_beam_type: u8,
    /// Global pointing direction of the TX beam.
    pub tx_boresight: Direction,
    #[serde(default = "default_rx_type")]
    pub rx_beam_type: u8,
    pub tx_trajectory: Trajectory,
    pub rx_trajectory: Trajectory,
    #[serde(default)]
    pub reflectors: Vec<Reflector>,
    #[serde(default)]
    pub los_blocked: Vec<Interval>,
    /// Receiver noise figure; `None` disables thermal noise.
    #[serde(default)]
    pub noise_figure_db: Option<f64>,
    /// Sounding periods per dwell.
    #[serde(default = "default_averaging")]
    pub averaging: usize,
    #[serde(default)]
    pub calibration_offset_db: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_floor")]
    pub measurement_floor_dbm: f64,
    /// Standard deviation of the per-axis GPS position error.
    #[serde(default)]
    pub gps_noise_sigma_m: f64,
    #[serde(default)]
    pub sounding: ZcConfig,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let de = toml::Deserializer::new(text);
        let scenario: Scenario =
            serde_path_to_error::deserialize(de).map_err(|e| ScenarioError::Parse {
                path: e.path().to_string(),
                message: e.inner().message().trim().to_string(),
            })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.carrier_freq_hz > 0.0 && self.carrier_freq_hz.is_finite()) {
            return Err(ScenarioError::invalid(
                "carrier_freq_hz",
                "must be positive",
            ));
        }
        if self.tx_power_dbm > MAX_TX_INPUT_DBM {
            return Err(ScenarioError::invalid(
                "tx_power_dbm",
                format!(
                    "{} dBm exceeds the safe array input of −12 dBm",
                    self.tx_power_dbm
                ),
            ));
        }
        self.tx_beam()
            .map_err(|e| ScenarioError::invalid("tx_beam_type", e.to_string()))?;
        self.rx_beam()
            .map_err(|e| ScenarioError::invalid("rx_beam_type", e.to_string()))?;
        if self.averaging == 0 {
            return Err(ScenarioError::invalid("averaging", "must be at least 1"));
        }
        if let Some(nf) = self.noise_figure_db {
            if !nf.is_finite() || nf < 0.0 {
                return Err(ScenarioError::invalid(
                    "noise_figure_db",
                    "must be a finite value ≥ 0",
                ));
            }
        }
        if !(self.gps_noise_sigma_m >= 0.0) {
            return Err(ScenarioError::invalid("gps_noise_sigma_m", "must be ≥ 0"));
        }
        for (name, traj) in [
            ("tx_trajectory", &self.tx_trajectory),
            ("rx_trajectory", &self.rx_trajectory),
        ] {
            traj.validate()
                .map_err(|e| ScenarioError::invalid(format!("{name}.waypoints"), e.to_string()))?;
        }
        for (i, r) in self.reflectors.iter().enumerate() {
            if !(r.loss_db >= 0.0) {
                return Err(ScenarioError::invalid(
                    format!("reflectors[{i}].loss_db"),
                    "must be ≥ 0",
                ));
            }
        }
        for (i, iv) in self.los_blocked.iter().enumerate() {
            if !(iv.end >= iv.start) {
                return Err(ScenarioError::invalid(
                    format!("los_blocked[{i}]"),
                    "end precedes start",
                ));
            }
        }
        self.sounding
            .validate()
            .map_err(|e| ScenarioError::invalid("sounding", e.to_string()))?;
        Ok(())
    }

    pub fn tx_beam(&self) -> Result<BeamType, CodebookError> {
        BeamType::tx(self.tx_beam_type)
    }

    pub fn rx_beam(&self) -> Result<BeamType, CodebookError> {
        BeamType::rx(self.rx_beam_type)
    }

    pub fn is_los(&self, t: f64) -> bool {
        !self.los_blocked.iter().any(|iv| iv.contains(t))
    }

    /// Time span covered by both trajectories, seconds.
    pub fn run_span(&self) -> Result<(f64, f64), ScenarioError> {
        match (self.tx_trajectory.span(), self.rx_trajectory.span()) {
            (None, None) => Err(ScenarioError::invalid(
                "rx_trajectory.waypoints",
                "both platforms are stationary; give at least one trajectory two waypoints to bound the run",
            )),
            (Some(s), None) | (None, Some(s)) => Ok(s),
            (Some(a), Some(b)) => {
                let (start, end) = (a.0.max(b.0), a.1.min(b.1));
                if end <= start {
                    Err(ScenarioError::invalid(
                        "rx_trajectory.waypoints",
                        format!("TX span [{}, {}] and RX span [{}, {}] do not overlap", a.0, a.1, b.0, b.1),
                    ))
                } else {
                    Ok((start, end))
                }
            }
        }
    }

    /// Dwell duration in nanoseconds (`averaging` sounding periods).
    pub fn dwell_ns(&self) -> u64 {
        self.averaging as u64 * self.sounding.period_ns()
    }

    /// Anechoic-chamber twin: TX and RX 17 ft apart in boresight, noise on,
    /// TX power backed off below the safe input level.
    pub fn anechoic(tx_type: u8, rx_type: u8) -> Self {
        let separation = 17.0 * 0.3048;
        let height = 1.5;
        Self {
            carrier_freq_hz: 28.3e9,
            tx_power_dbm: -30.0,
            tx_beam_type: tx_type,
            tx_boresight: Direction::new(180.0, 0.0),
            rx_beam_type: rx_type,
            tx_trajectory: Trajectory::stationary(Enu::new(0.0, separation, height)),
            rx_trajectory: Trajectory {
                waypoints: vec![
                    Waypoint {
                        t: 0.0,
                        position: Enu::new(0.0, 0.0, height),
                    },
                    Waypoint {
                        t: 0.05,
                        position: Enu::new(0.0, 0.0, height),
                    },
                ],
                heading_override: Some(0.0),
            },
            reflectors: Vec::new(),
            los_blocked: Vec::new(),
            noise_figure_db: Some(5.0),
            averaging: 1,
            calibration_offset_db: 0.0,
            seed: 1,
            measurement_floor_dbm: DEFAULT_FLOOR_DBM,
            gps_noise_sigma_m: 0.0,
            sounding: ZcConfig::default(),
        }
    }
}
