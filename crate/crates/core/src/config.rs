//! Experiment configuration, read from a single JSON document.
//!
//! Sweep grids are given in degrees (phase) and MHz (detuning, as Δ/2π);
//! every other angle is in radians.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::DEFAULT_ESTIMATOR;
use crate::measurement::ShotConfig;
use crate::physical::{DriveConfig, PhysicalPulseSet};
use crate::pulse::{PulseErrorParams, PulseSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseGrid {
    pub start_deg: f64,
    pub stop_deg: f64,
    pub count: usize,
}

impl Default for PhaseGrid {
    fn default() -> Self {
        Self {
            start_deg: -30.0,
            stop_deg: 30.0,
            count: 13,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetuningGrid {
    pub start_mhz: f64,
    pub stop_mhz: f64,
    pub count: usize,
}

impl Default for DetuningGrid {
    /// ±5 MHz keeps every error parameter of the default 50 MHz drive well
    /// inside the model's validity range.
    fn default() -> Self {
        Self {
            start_mhz: -5.0,
            stop_mhz: 5.0,
            count: 11,
        }
    }
}

/// Evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, count: usize) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::InvalidConfig(format!("grid count {count} < 2")));
    }
    if !(start.is_finite() && stop.is_finite() && start < stop) {
        return Err(Error::InvalidConfig(format!(
            "grid needs finite start < stop, got {start}..{stop}"
        )));
    }
    let n = (count - 1) as f64;
    Ok((0..count)
        .map(|i| start + (stop - start) * i as f64 / n)
        .collect())
}

impl PhaseGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        linspace(self.start_deg, self.stop_deg, self.count)
    }
}

impl DetuningGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        linspace(self.start_mhz, self.stop_mhz, self.count)
    }
}

/// Converts a detuning in MHz (Δ/2π) to rad/s.
pub fn mhz_to_rad_s(mhz: f64) -> f64 {
    2.0 * PI * 1e6 * mhz
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QptProcess {
    Identity,
    /// The π_Y calibration pulse itself.
    #[default]
    PiY,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    #[default]
    Phase,
    Detuning,
}

impl SweepKind {
    pub fn driver_name(self) -> &'static str {
        match self {
            SweepKind::Phase => "phase",
            SweepKind::Detuning => "detuning",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QptSettings {
    #[serde(default)]
    pub process: QptProcess,
    #[serde(default)]
    pub sweep: SweepKind,
}

/// The physical or phenomenological description of the pulses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseSource {
    ErrorParams(PulseErrorParams),
    Drive(DriveConfig),
    Pulses(PhysicalPulseSet),
}

impl PulseSource {
    pub fn pulse_set(&self) -> Result<PulseSet> {
        match self {
            PulseSource::ErrorParams(p) => PulseSet::from_params(p),
            PulseSource::Drive(d) => d.pulse_configs()?.integrate(),
            PulseSource::Pulses(p) => p.integrate(),
        }
    }

    /// Physical pulse descriptions, when the source has them.
    pub fn physical(&self) -> Result<PhysicalPulseSet> {
        match self {
            PulseSource::ErrorParams(_) => Err(Error::InvalidConfig(
                "a detuning sweep needs a `drive` or `pulses` source".into(),
            )),
            PulseSource::Drive(d) => d.pulse_configs(),
            PulseSource::Pulses(p) => Ok(*p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_params: Option<PulseErrorParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulses: Option<PhysicalPulseSet>,
    /// Absent means exact signals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<ShotConfig>,
    #[serde(default)]
    pub phase_sweep: PhaseGrid,
    #[serde(default)]
    pub detuning_sweep: DetuningGrid,
    #[serde(default = "default_estimator")]
    pub estimator: String,
    #[serde(default)]
    pub qpt: QptSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_estimator() -> String {
    DEFAULT_ESTIMATOR.to_string()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            error_params: None,
            drive: None,
            pulses: None,
            shots: None,
            phase_sweep: PhaseGrid::default(),
            detuning_sweep: DetuningGrid::default(),
            estimator: default_estimator(),
            qpt: QptSettings::default(),
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn with_params(p: PulseErrorParams) -> Self {
        Self {
            error_params: Some(p),
            ..Self::default()
        }
    }

    pub fn with_drive(d: DriveConfig) -> Self {
        Self {
            drive: Some(d),
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let sources = [
            self.error_params.is_some(),
            self.drive.is_some(),
            self.pulses.is_some(),
        ]
        .iter()
        .filter(|x| **x)
        .count();
        if sources > 1 {
            return Err(Error::InvalidConfig(
                "give exactly one of `error_params`, `drive`, `pulses`".into(),
            ));
        }
        if let Some(p) = &self.error_params {
            p.validate()?;
        }
        if let Some(s) = &self.shots {
            s.validate()?;
        }
        self.phase_sweep.values()?;
        self.detuning_sweep.values()?;
        crate::estimator::estimators().get(&self.estimator)?;
        Ok(())
    }

    pub fn source(&self) -> Result<PulseSource> {
        self.validate()?;
        if let Some(p) = self.error_params {
            Ok(PulseSource::ErrorParams(p))
        } else if let Some(d) = self.drive {
            Ok(PulseSource::Drive(d))
        } else if let Some(p) = self.pulses {
            Ok(PulseSource::Pulses(p))
        } else {
            Err(Error::InvalidConfig(
                "no pulse source: give one of `error_params`, `drive`, `pulses`".into(),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grids() {
        let p = PhaseGrid::default().values().unwrap();
        assert_eq!(p.len(), 13);
        assert_eq!(p[6], 0.0);
        assert_eq!((p[0], p[12]), (-30.0, 30.0));
        let d = DetuningGrid::default().values().unwrap();
        assert_eq!(d[5], 0.0);
    }

    #[test]
    fn bad_grids_rejected() {
        assert!(linspace(0.0, 1.0, 1).is_err());
        assert!(linspace(1.0, 1.0, 3).is_err());
        assert!(linspace(2.0, 1.0, 3).is_err());
        assert!(linspace(f64::NAN, 1.0, 3).is_err());
    }

    #[test]
    fn parses_params_source() {
        let cfg = ExperimentConfig::from_json(
            r#"{"error_params": {"phi_rad": 0.01, "vp_x": -0.02}, "shots": {"shots_per_sequence": 100, "seed": 3}}"#,
        )
        .unwrap();
        match cfg.source().unwrap() {
            PulseSource::ErrorParams(p) => assert_eq!((p.phi, p.vp_x), (0.01, -0.02)),
            other => panic!("{other:?}"),
        }
        assert_eq!(cfg.estimator, "closed-form");
        assert_eq!(cfg.shots.unwrap().seed, 3);
    }

    #[test]
    fn rejects_two_sources_and_unknown_fields() {
        assert!(ExperimentConfig::from_json(r#"{"error_params": {}, "drive": {}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"error_params": {"phi": 0.1}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"estimator": "magic"}"#).is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"phase_sweep": {"start_deg": 5, "stop_deg": 5, "count": 3}}"#
        )
        .is_err());
        assert!(ExperimentConfig::default().source().is_err());
    }

    #[test]
    fn drive_source_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"drive": {"detuning_rad_s": 1e6}}"#).unwrap();
        let PulseSource::Drive(d) = cfg.source().unwrap() else {
            panic!()
        };
        assert_eq!(d.detuning, 1e6);
        assert_eq!(d.rabi_amplitude, DriveConfig::default().rabi_amplitude);
        assert!(cfg.source().unwrap().physical().is_ok());
        assert!(PulseSource::ErrorParams(PulseErrorParams::zero())
            .physical()
            .is_err());
    }

    #[test]
    fn json_round_trip() {
        let cfg = ExperimentConfig::with_params(PulseErrorParams::from_array([0.01; 12]));
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn detuning_units() {
        assert!((mhz_to_rad_s(1.0) - 6.283185307179586e6).abs() < 1e-6);
    }
}
