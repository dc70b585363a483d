//! Rotating-frame integration of a driven two-level system.
//!
//! `H(t) = (Δ/2)σz + (Ω(t)/2)(cos φ σx + sin φ σy)` with a trapezoidal
//! envelope: a linear ramp up over `edge_duration`, a flat top, and a linear
//! ramp down. The propagator is the time-ordered product of exact step
//! exponentials, with `Ω` sampled at each step midpoint.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::algebra::{rotation_unitary, AxisAngle, Unitary2};
use crate::error::{Error, Result};
use crate::pulse::{PulseId, PulseSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalPulseConfig {
    #[serde(rename = "rabi_amplitude_rad_s")]
    pub rabi_amplitude: f64,
    #[serde(rename = "detuning_rad_s", default)]
    pub detuning: f64,
    #[serde(rename = "carrier_phase_rad", default)]
    pub carrier_phase: f64,
    #[serde(rename = "flat_duration_s")]
    pub flat_duration: f64,
    #[serde(rename = "edge_duration_s", default)]
    pub edge_duration: f64,
    #[serde(rename = "time_step_s")]
    pub time_step: f64,
}

impl PhysicalPulseConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.rabi_amplitude,
            self.detuning,
            self.carrier_phase,
            self.flat_duration,
            self.edge_duration,
            self.time_step,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidPulseConfig("non-finite field".into()));
        }
        if self.flat_duration < 0.0 || self.edge_duration < 0.0 {
            return Err(Error::InvalidPulseConfig(
                "durations must be nonnegative".into(),
            ));
        }
        if self.time_step <= 0.0 {
            return Err(Error::InvalidPulseConfig(
                "time_step must be positive".into(),
            ));
        }
        if self.edge_duration > 0.0 && self.time_step > self.edge_duration / 4.0 {
            return Err(Error::InvalidPulseConfig(format!(
                "time_step {} exceeds edge_duration/4 = {}",
                self.time_step,
                self.edge_duration / 4.0
            )));
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.flat_duration + 2.0 * self.edge_duration
    }

    /// Pulse area `∫Ω dt` of the trapezoid.
    pub fn area(&self) -> f64 {
        self.rabi_amplitude * (self.flat_duration + self.edge_duration)
    }
}

/// One piecewise-constant step: evolve under `(Ω, Δ, φ)` for `dt`.
fn step(rabi: f64, detuning: f64, phase: f64, dt: f64) -> Unitary2 {
    let field = Vector3::new(rabi * phase.cos(), rabi * phase.sin(), detuning);
    let strength = field.norm();
    if strength == 0.0 || dt == 0.0 {
        return Unitary2::identity();
    }
    rotation_unitary(&AxisAngle::new(field / strength, strength * dt).expect("normalized field"))
}

/// Propagator of the trapezoidal pulse described by `c`.
pub fn integrate_pulse(c: &PhysicalPulseConfig) -> Result<Unitary2> {
    c.validate()?;
    let mut u = Unitary2::identity();
    if c.total_duration() == 0.0 {
        return Ok(u);
    }
    let mut apply = |rabi: f64, dt: f64| {
        u = step(rabi, c.detuning, c.carrier_phase, dt).then_after(&u);
    };
    let ramp_steps = (c.edge_duration / c.time_step).ceil() as usize;
    if c.edge_duration > 0.0 {
        let h = c.edge_duration / ramp_steps as f64;
        for k in 0..ramp_steps {
            apply(c.rabi_amplitude * (k as f64 + 0.5) / ramp_steps as f64, h);
        }
    }
    if c.flat_duration > 0.0 {
        let n = (c.flat_duration / c.time_step).ceil().max(1.0) as usize;
        let h = c.flat_duration / n as f64;
        for _ in 0..n {
            apply(c.rabi_amplitude, h);
        }
    }
    if c.edge_duration > 0.0 {
        let h = c.edge_duration / ramp_steps as f64;
        for k in 0..ramp_steps {
            apply(
                c.rabi_amplitude * (1.0 - (k as f64 + 0.5) / ramp_steps as f64),
                h,
            );
        }
    }
    Unitary2::with_tolerance(*u.matrix(), 1e-10)
}

/// Physical descriptions of the four calibration pulses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalPulseSet {
    pub pi_x: PhysicalPulseConfig,
    pub pi_y: PhysicalPulseConfig,
    pub half_pi_x: PhysicalPulseConfig,
    pub half_pi_y: PhysicalPulseConfig,
}

impl PhysicalPulseSet {
    pub fn get(&self, p: PulseId) -> &PhysicalPulseConfig {
        match p {
            PulseId::PiX => &self.pi_x,
            PulseId::PiY => &self.pi_y,
            PulseId::HalfPiX => &self.half_pi_x,
            PulseId::HalfPiY => &self.half_pi_y,
        }
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        for c in [
            &mut self.pi_x,
            &mut self.pi_y,
            &mut self.half_pi_x,
            &mut self.half_pi_y,
        ] {
            c.detuning = detuning;
        }
        self
    }

    pub fn integrate(&self) -> Result<PulseSet> {
        Ok(PulseSet {
            pi_x: integrate_pulse(&self.pi_x)?,
            pi_y: integrate_pulse(&self.pi_y)?,
            half_pi_x: integrate_pulse(&self.half_pi_x)?,
            half_pi_y: integrate_pulse(&self.half_pi_y)?,
        })
    }
}

/// A common drive from which all four pulses are derived, with flat-top
/// durations chosen so each pulse has its nominal area on resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    #[serde(rename = "rabi_amplitude_rad_s", default = "DriveConfig::default_rabi")]
    pub rabi_amplitude: f64,
    #[serde(rename = "detuning_rad_s", default)]
    pub detuning: f64,
    #[serde(rename = "edge_duration_s", default = "DriveConfig::default_edge")]
    pub edge_duration: f64,
    #[serde(rename = "time_step_s", default = "DriveConfig::default_step")]
    pub time_step: f64,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            rabi_amplitude: Self::default_rabi(),
            detuning: 0.0,
            edge_duration: Self::default_edge(),
            time_step: Self::default_step(),
        }
    }
}

impl DriveConfig {
    /// 2π × 50 MHz: a 5 ns π/2 pulse.
    fn default_rabi() -> f64 {
        2.0 * PI * 50e6
    }

    fn default_edge() -> f64 {
        1e-9
    }

    fn default_step() -> f64 {
        1e-11
    }

    pub fn pulse_config(&self, p: PulseId) -> Result<PhysicalPulseConfig> {
        if !self.rabi_amplitude.is_finite() || self.rabi_amplitude <= 0.0 {
            return Err(Error::InvalidPulseConfig(
                "rabi amplitude must be positive".into(),
            ));
        }
        let flat = p.nominal_angle() / self.rabi_amplitude - self.edge_duration;
        if flat < 0.0 {
            return Err(Error::InvalidPulseConfig(format!(
                "edge duration {} s too long for a {} pulse",
                self.edge_duration,
                p.name()
            )));
        }
        let carrier_phase = match p {
            PulseId::PiX | PulseId::HalfPiX => 0.0,
            PulseId::PiY | PulseId::HalfPiY => FRAC_PI_2,
        };
        let c = PhysicalPulseConfig {
            rabi_amplitude: self.rabi_amplitude,
            detuning: self.detuning,
            carrier_phase,
            flat_duration: flat,
            edge_duration: self.edge_duration,
            time_step: self.time_step,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn pulse_configs(&self) -> Result<PhysicalPulseSet> {
        Ok(PhysicalPulseSet {
            pi_x: self.pulse_config(PulseId::PiX)?,
            pi_y: self.pulse_config(PulseId::PiY)?,
            half_pi_x: self.pulse_config(PulseId::HalfPiX)?,
            half_pi_y: self.pulse_config(PulseId::HalfPiY)?,
        })
    }
}
