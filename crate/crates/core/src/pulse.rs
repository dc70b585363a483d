//! Imperfect calibration pulses and their twelve error parameters.
//!
//! Each pulse is an exact rotation `exp(-i(n·σ)(θ₀ + 2δ)/2)` where `θ₀` is the
//! nominal angle, `δ` the half-angle error, and `n` a unit axis whose two
//! off-nominal components are the axis errors. For an x-pulse
//! `n = (√(1−a²−b²), a, b)`; for a y-pulse `n = (a, √(1−a²−b²), b)`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::algebra::{axis_angle_of, dot_sigma, rotation_unitary, AxisAngle, Complex2x2, Unitary2};
use crate::error::{Error, Result};

/// Hard bound on every parameter magnitude.
pub const PARAM_LIMIT: f64 = 0.5;

/// Above this magnitude the first-order estimator is advisory only.
pub const LINEAR_REGIME_LIMIT: f64 = 0.15;

/// Maximum distance (rad) from the nominal rotation accepted by
/// [`extract_error_params`].
pub const CALIBRATION_DISTANCE_LIMIT: f64 = 0.3;

/// Parameter names in canonical vector order.
pub const PARAM_NAMES: [&str; 12] = [
    "phi", "eps_y", "eps_z", "phi_p", "epsp_y", "epsp_z", "chi", "v_x", "v_z", "chi_p", "vp_x",
    "vp_z",
];

/// Field names in files, with units on the angle errors.
pub const PARAM_FIELDS: [&str; 12] = [
    "phi_rad",
    "eps_y",
    "eps_z",
    "phi_p_rad",
    "epsp_y",
    "epsp_z",
    "chi_rad",
    "v_x",
    "v_z",
    "chi_p_rad",
    "vp_x",
    "vp_z",
];

/// Index of the gauge-fixed parameter `epsp_y`.
pub const GAUGE_INDEX: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PulseId {
    PiX,
    PiY,
    HalfPiX,
    HalfPiY,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NominalAxis {
    X,
    Y,
}

impl PulseId {
    pub const ALL: [PulseId; 4] = [
        PulseId::PiX,
        PulseId::PiY,
        PulseId::HalfPiX,
        PulseId::HalfPiY,
    ];

    pub fn nominal_axis(self) -> NominalAxis {
        match self {
            PulseId::PiX | PulseId::HalfPiX => NominalAxis::X,
            PulseId::PiY | PulseId::HalfPiY => NominalAxis::Y,
        }
    }

    pub fn nominal_angle(self) -> f64 {
        match self {
            PulseId::PiX | PulseId::PiY => PI,
            PulseId::HalfPiX | PulseId::HalfPiY => FRAC_PI_2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PulseId::PiX => "pi_X",
            PulseId::PiY => "pi_Y",
            PulseId::HalfPiX => "pi/2_X",
            PulseId::HalfPiY => "pi/2_Y",
        }
    }

    /// Positions of (angle error, first axis error, second axis error) in the
    /// canonical parameter vector.
    pub fn param_indices(self) -> [usize; 3] {
        match self {
            PulseId::PiX => [0, 1, 2],
            PulseId::HalfPiX => [3, 4, 5],
            PulseId::PiY => [6, 7, 8],
            PulseId::HalfPiY => [9, 10, 11],
        }
    }

    fn nominal_unit_axis(self) -> Vector3<f64> {
        match self.nominal_axis() {
            NominalAxis::X => Vector3::x(),
            NominalAxis::Y => Vector3::y(),
        }
    }

    /// The error-free rotation.
    pub fn ideal_unitary(self) -> Unitary2 {
        rotation_unitary(&AxisAngle::new(self.nominal_unit_axis(), self.nominal_angle()).unwrap())
    }
}

impl fmt::Display for PulseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Errors of one pulse: half-angle error and the two off-nominal axis
/// components (y,z for x-pulses; x,z for y-pulses).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PulseErrors {
    pub angle: f64,
    pub axis_a: f64,
    pub axis_b: f64,
}

/// The twelve error parameters of the four calibration pulses.
///
/// Angle errors are half the rotation-angle deviation, in radians; axis
/// errors are dimensionless components of the unit rotation axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseErrorParams {
    #[serde(rename = "phi_rad", default)]
    pub phi: f64,
    #[serde(default)]
    pub eps_y: f64,
    #[serde(default)]
    pub eps_z: f64,
    #[serde(rename = "phi_p_rad", default)]
    pub phi_p: f64,
    #[serde(default)]
    pub epsp_y: f64,
    #[serde(default)]
    pub epsp_z: f64,
    #[serde(rename = "chi_rad", default)]
    pub chi: f64,
    #[serde(default)]
    pub v_x: f64,
    #[serde(default)]
    pub v_z: f64,
    #[serde(rename = "chi_p_rad", default)]
    pub chi_p: f64,
    #[serde(default)]
    pub vp_x: f64,
    #[serde(default)]
    pub vp_z: f64,
}

impl PulseErrorParams {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_array(v: [f64; 12]) -> Self {
        Self {
            phi: v[0],
            eps_y: v[1],
            eps_z: v[2],
            phi_p: v[3],
            epsp_y: v[4],
            epsp_z: v[5],
            chi: v[6],
            v_x: v[7],
            v_z: v[8],
            chi_p: v[9],
            vp_x: v[10],
            vp_z: v[11],
        }
    }

    pub fn to_array(&self) -> [f64; 12] {
        [
            self.phi,
            self.eps_y,
            self.eps_z,
            self.phi_p,
            self.epsp_y,
            self.epsp_z,
            self.chi,
            self.v_x,
            self.v_z,
            self.chi_p,
            self.vp_x,
            self.vp_z,
        ]
    }

    pub fn pulse(&self, p: PulseId) -> PulseErrors {
        let v = self.to_array();
        let [i, j, k] = p.param_indices();
        PulseErrors {
            angle: v[i],
            axis_a: v[j],
            axis_b: v[k],
        }
    }

    pub fn set_pulse(&mut self, p: PulseId, e: PulseErrors) {
        let mut v = self.to_array();
        let [i, j, k] = p.param_indices();
        v[i] = e.angle;
        v[j] = e.axis_a;
        v[k] = e.axis_b;
        *self = Self::from_array(v);
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Checks finiteness and the hard range `|value| < 0.5`.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in PARAM_NAMES.iter().zip(self.to_array()) {
            if !value.is_finite() || value.abs() >= PARAM_LIMIT {
                return Err(Error::ParameterOutOfRange { name, value });
            }
        }
        Ok(())
    }

    /// True when any parameter exceeds the linear-regime advisory bound.
    pub fn beyond_linear_regime(&self) -> bool {
        self.max_abs() > LINEAR_REGIME_LIMIT
    }
}

/// Unit rotation axis of pulse `p` with off-nominal components `(a, b)`.
pub fn pulse_axis(p: PulseId, a: f64, b: f64) -> Vector3<f64> {
    let main = (1.0 - a * a - b * b).max(0.0).sqrt();
    match p.nominal_axis() {
        NominalAxis::X => Vector3::new(main, a, b),
        NominalAxis::Y => Vector3::new(a, main, b),
    }
}

fn off_axis_components(p: PulseId, n: &Vector3<f64>) -> (f64, f64) {
    match p.nominal_axis() {
        NominalAxis::X => (n.y, n.z),
        NominalAxis::Y => (n.x, n.z),
    }
}

/// Exact unitary of pulse `p` carrying the errors in `e`.
pub fn imperfect_unitary(p: PulseId, e: &PulseErrorParams) -> Result<Unitary2> {
    e.validate()?;
    Ok(pulse_unitary(p, &e.pulse(p)))
}

fn pulse_unitary(p: PulseId, err: &PulseErrors) -> Unitary2 {
    let axis = pulse_axis(p, err.axis_a, err.axis_b);
    let angle = p.nominal_angle() + 2.0 * err.angle;
    rotation_unitary(
        &AxisAngle::new(axis, angle).expect("off-axis components below 1 give a unit axis"),
    )
}

/// First-order generator `K` with `U ≈ U⁽⁰⁾(1 − iK)`.
pub fn error_generator(p: PulseId, e: &PulseErrorParams) -> Result<Complex2x2> {
    e.validate()?;
    let err = e.pulse(p);
    let n0 = p.nominal_unit_axis();
    let tilt = match p.nominal_axis() {
        NominalAxis::X => Vector3::new(0.0, err.axis_a, err.axis_b),
        NominalAxis::Y => Vector3::new(err.axis_a, 0.0, err.axis_b),
    };
    let (s, c) = (0.5 * p.nominal_angle()).sin_cos();
    // sin(θ₀/2)·U₀†(m·σ) = s·(c·m − s·n₀×m)·σ for m ⟂ n₀
    let transverse = (tilt * c - n0.cross(&tilt) * s) * s;
    Ok(dot_sigma(&(n0 * err.angle)) + dot_sigma(&transverse))
}

/// Recovers (angle error, axis errors) of pulse `p` from an arbitrary unitary.
pub fn extract_error_params(u: &Unitary2, p: PulseId) -> Result<PulseErrors> {
    let d = axis_angle_of(u);
    let n0 = p.nominal_unit_axis();
    let mut axis = d.axis_angle.axis();
    let mut angle = d.axis_angle.angle();
    if d.axis_indeterminate {
        return Err(Error::NotACalibrationPulse {
            pulse: p.name(),
            distance: p.nominal_angle(),
        });
    }
    if axis.dot(&n0) < 0.0 {
        axis = -axis;
        angle = 2.0 * PI - angle;
    }
    let tilt = axis.dot(&n0).clamp(-1.0, 1.0).acos();
    let distance = tilt.max((angle - p.nominal_angle()).abs());
    if distance > CALIBRATION_DISTANCE_LIMIT {
        return Err(Error::NotACalibrationPulse {
            pulse: p.name(),
            distance,
        });
    }
    let (a, b) = off_axis_components(p, &axis);
    Ok(PulseErrors {
        angle: 0.5 * (angle - p.nominal_angle()),
        axis_a: a,
        axis_b: b,
    })
}

/// Extracts all twelve parameters from a set of pulse unitaries.
pub fn extract_all(set: &PulseSet) -> Result<PulseErrorParams> {
    let mut out = PulseErrorParams::zero();
    for p in PulseId::ALL {
        out.set_pulse(p, extract_error_params(set.get(p), p)?);
    }
    Ok(out)
}

/// Rotates every pulse axis about z so the π/2_X axis has no y component.
///
/// Rotation angles are untouched. All sequence signals starting from |↑⟩ and
/// measuring σz are invariant under this map.
pub fn gauge_fix(e: &PulseErrorParams) -> PulseErrorParams {
    let half_x = e.pulse(PulseId::HalfPiX);
    let n = pulse_axis(PulseId::HalfPiX, half_x.axis_a, half_x.axis_b);
    let azimuth = n.y.atan2(n.x);
    let rot = AxisAngle::z(-azimuth).rotation_matrix();
    let mut out = *e;
    for p in PulseId::ALL {
        let err = e.pulse(p);
        let turned = rot * pulse_axis(p, err.axis_a, err.axis_b);
        let (a, b) = off_axis_components(p, &turned);
        out.set_pulse(
            p,
            PulseErrors {
                angle: err.angle,
                axis_a: a,
                axis_b: b,
            },
        );
    }
    out.epsp_y = 0.0;
    out
}

/// Unitaries of the four calibration pulses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSet {
    pub pi_x: Unitary2,
    pub pi_y: Unitary2,
    pub half_pi_x: Unitary2,
    pub half_pi_y: Unitary2,
}

impl PulseSet {
    pub fn ideal() -> Self {
        Self {
            pi_x: PulseId::PiX.ideal_unitary(),
            pi_y: PulseId::PiY.ideal_unitary(),
            half_pi_x: PulseId::HalfPiX.ideal_unitary(),
            half_pi_y: PulseId::HalfPiY.ideal_unitary(),
        }
    }

    pub fn from_params(e: &PulseErrorParams) -> Result<Self> {
        e.validate()?;
        Ok(Self {
            pi_x: pulse_unitary(PulseId::PiX, &e.pulse(PulseId::PiX)),
            pi_y: pulse_unitary(PulseId::PiY, &e.pulse(PulseId::PiY)),
            half_pi_x: pulse_unitary(PulseId::HalfPiX, &e.pulse(PulseId::HalfPiX)),
            half_pi_y: pulse_unitary(PulseId::HalfPiY, &e.pulse(PulseId::HalfPiY)),
        })
    }

    /// Pulses built from estimated parameters, which may sit slightly past
    /// the hard range; only a well-defined unit axis is required.
    pub fn from_estimate(e: &PulseErrorParams) -> Result<Self> {
        for p in PulseId::ALL {
            let err = e.pulse(p);
            let [i, j, _] = p.param_indices();
            for (k, v) in [(i, err.angle), (j, err.axis_a)] {
                if !v.is_finite() {
                    return Err(Error::ParameterOutOfRange {
                        name: PARAM_NAMES[k],
                        value: v,
                    });
                }
            }
            let off = err.axis_a.hypot(err.axis_b);
            if !off.is_finite() || off >= 1.0 {
                return Err(Error::ParameterOutOfRange {
                    name: PARAM_NAMES[j],
                    value: off,
                });
            }
        }
        Ok(Self {
            pi_x: pulse_unitary(PulseId::PiX, &e.pulse(PulseId::PiX)),
            pi_y: pulse_unitary(PulseId::PiY, &e.pulse(PulseId::PiY)),
            half_pi_x: pulse_unitary(PulseId::HalfPiX, &e.pulse(PulseId::HalfPiX)),
            half_pi_y: pulse_unitary(PulseId::HalfPiY, &e.pulse(PulseId::HalfPiY)),
        })
    }

    pub fn get(&self, p: PulseId) -> &Unitary2 {
        match p {
            PulseId::PiX => &self.pi_x,
            PulseId::PiY => &self.pi_y,
            PulseId::HalfPiX => &self.half_pi_x,
            PulseId::HalfPiY => &self.half_pi_y,
        }
    }

    pub fn get_mut(&mut self, p: PulseId) -> &mut Unitary2 {
        match p {
            PulseId::PiX => &mut self.pi_x,
            PulseId::PiY => &mut self.pi_y,
            PulseId::HalfPiX => &mut self.half_pi_x,
            PulseId::HalfPiY => &mut self.half_pi_y,
        }
    }

    /// Shifts the drive phase of pulse `p` by `phase` (rad), turning its axis
    /// about z toward +x. For π/2_Y this injects `vp_x = sin(phase)`.
    pub fn with_phase_shift(mut self, p: PulseId, phase: f64) -> Self {
        let u = self.get(p).rotated_about_z(-phase);
        *self.get_mut(p) = u;
        self
    }

    /// Conjugates every pulse by the same z rotation.
    pub fn rotated_about_z(&self, alpha: f64) -> Self {
        Self {
            pi_x: self.pi_x.rotated_about_z(alpha),
            pi_y: self.pi_y.rotated_about_z(alpha),
            half_pi_x: self.half_pi_x.rotated_about_z(alpha),
            half_pi_y: self.half_pi_y.rotated_about_z(alpha),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{max_abs_diff, operator_norm, sigma_x, C64};

    fn params(pairs: &[(&str, f64)]) -> PulseErrorParams {
        let mut v = [0.0; 12];
        for (name, value) in pairs {
            let i = PARAM_NAMES.iter().position(|n| n == name).unwrap();
            v[i] = *value;
        }
        PulseErrorParams::from_array(v)
    }

    #[test]
    fn zero_pi_x_is_minus_i_sigma_x() {
        let u = imperfect_unitary(PulseId::PiX, &PulseErrorParams::zero()).unwrap();
        let expected = sigma_x() * C64::new(0.0, -1.0);
        assert!(max_abs_diff(u.matrix(), &expected) < 1e-15);
    }

    #[test]
    fn half_pi_x_angle_error_adds_twice_phi() {
        let u = imperfect_unitary(PulseId::HalfPiX, &params(&[("phi_p", 0.05)])).unwrap();
        let expected = rotation_unitary(&AxisAngle::x(FRAC_PI_2 + 0.1));
        assert!(max_abs_diff(u.matrix(), expected.matrix()) < 1e-15);
    }

    #[test]
    fn pi_y_z_tilt_uses_unit_axis() {
        let u = imperfect_unitary(PulseId::PiY, &params(&[("v_z", 0.1)])).unwrap();
        let axis = Vector3::new(0.0, (1.0f64 - 0.01).sqrt(), 0.1);
        let expected = rotation_unitary(&AxisAngle::new(axis, PI).unwrap());
        assert!(max_abs_diff(u.matrix(), expected.matrix()) < 1e-15);
    }

    #[test]
    fn out_of_range_parameters_rejected() {
        let e = params(&[("v_x", 0.5)]);
        assert!(matches!(
            imperfect_unitary(PulseId::PiY, &e),
            Err(Error::ParameterOutOfRange { name: "v_x", .. })
        ));
        let e = params(&[("phi", f64::NAN)]);
        assert!(e.validate().is_err());
    }

    #[test]
    fn linear_regime_flag() {
        assert!(!params(&[("phi", 0.15)]).beyond_linear_regime());
        assert!(params(&[("vp_z", -0.16)]).beyond_linear_regime());
    }

    #[test]
    fn zero_generator_for_zero_params() {
        for p in PulseId::ALL {
            let k = error_generator(p, &PulseErrorParams::zero()).unwrap();
            assert_eq!(k, Complex2x2::zeros());
        }
    }

    #[test]
    fn generator_matches_paper_form_for_pi_x() {
        // U ≈ −φ − i(σx + ε_y σy + ε_z σz)
        let e = params(&[("phi", 0.01), ("eps_y", 0.02), ("eps_z", -0.03)]);
        let k = error_generator(PulseId::PiX, &e).unwrap();
        let u0 = PulseId::PiX.ideal_unitary();
        let lin = u0.matrix() * (Complex2x2::identity() - k * C64::new(0.0, 1.0));
        let expected = Complex2x2::identity() * C64::from(-0.01)
            - dot_sigma(&Vector3::new(1.0, 0.02, -0.03)) * C64::new(0.0, 1.0);
        assert!(max_abs_diff(&lin, &expected) < 1e-15);
    }

    fn linearization_defect(p: PulseId, e: &PulseErrorParams) -> f64 {
        let k = error_generator(p, e).unwrap();
        let u = imperfect_unitary(p, e).unwrap();
        let lin = p.ideal_unitary().matrix() * (Complex2x2::identity() - k * C64::new(0.0, 1.0));
        operator_norm(&(u.matrix() - lin))
    }

    #[test]
    fn generator_defect_scales_quadratically() {
        let base = [
            0.04, -0.03, 0.05, 0.02, 0.035, -0.045, -0.04, 0.03, 0.025, 0.05, -0.02, 0.03,
        ];
        for p in PulseId::ALL {
            let scaled = |s: f64| PulseErrorParams::from_array(base.map(|x| x * s));
            let d1 = linearization_defect(p, &scaled(1.0));
            let d2 = linearization_defect(p, &scaled(0.5));
            let d4 = linearization_defect(p, &scaled(0.25));
            assert!(d1 / d4 >= 12.0, "{p}: {d1} vs {d4}");
            assert!(d1 / d2 >= 3.0, "{p}: {d1} vs {d2}");
            assert!(d1 < 0.02);
        }
    }

    #[test]
    fn generator_magnitude_is_first_order() {
        let k = error_generator(PulseId::HalfPiX, &params(&[("phi_p", 0.01)])).unwrap();
        assert!((operator_norm(&k) - 0.01).abs() < 1e-12);
    }

    #[test]
    fn extract_ideal_pi_x() {
        let u = Unitary2::new(sigma_x() * C64::new(0.0, -1.0)).unwrap();
        let e = extract_error_params(&u, PulseId::PiX).unwrap();
        assert!(e.angle.abs() < 1e-15 && e.axis_a.abs() < 1e-15 && e.axis_b.abs() < 1e-15);
    }

    #[test]
    fn extract_round_trip_pi_y() {
        let e = params(&[("v_x", 0.07), ("chi", -0.02)]);
        let u = imperfect_unitary(PulseId::PiY, &e).unwrap();
        let got = extract_error_params(&u, PulseId::PiY).unwrap();
        assert!((got.angle + 0.02).abs() < 1e-10);
        assert!((got.axis_a - 0.07).abs() < 1e-10);
        assert!(got.axis_b.abs() < 1e-10);
    }

    #[test]
    fn extract_rejects_orthogonal_rotation() {
        let u = rotation_unitary(&AxisAngle::z(PI));
        assert!(matches!(
            extract_error_params(&u, PulseId::PiX),
            Err(Error::NotACalibrationPulse { .. })
        ));
        assert!(matches!(
            extract_error_params(&Unitary2::identity(), PulseId::HalfPiY),
            Err(Error::NotACalibrationPulse { .. })
        ));
    }

    #[test]
    fn extract_handles_positive_angle_error_on_pi_pulse() {
        // θ = π + 2φ > π decomposes canonically with a flipped axis
        let e = params(&[("phi", 0.04), ("eps_y", -0.03), ("eps_z", 0.02)]);
        let u = imperfect_unitary(PulseId::PiX, &e).unwrap();
        let got = extract_error_params(&u.scaled_by_phase(0.7), PulseId::PiX).unwrap();
        assert!((got.angle - 0.04).abs() < 1e-12);
        assert!((got.axis_a + 0.03).abs() < 1e-12);
        assert!((got.axis_b - 0.02).abs() < 1e-12);
    }

    #[test]
    fn gauge_fix_is_noop_when_already_fixed() {
        let e = params(&[
            ("phi", 0.02),
            ("eps_y", 0.01),
            ("v_x", -0.03),
            ("vp_z", 0.01),
        ]);
        let g = gauge_fix(&e);
        for (a, b) in e.to_array().iter().zip(g.to_array()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn gauge_fix_follows_first_order_shift_rule() {
        let e = params(&[("epsp_y", 0.04)]);
        let g = gauge_fix(&e);
        assert_eq!(g.epsp_y, 0.0);
        // first-order rule: ε_y, ε'_y shift by −α and v_x, v'_x by +α
        assert!((g.eps_y + 0.04).abs() < 0.04 * 0.04);
        assert!((g.v_x - 0.04).abs() < 0.04 * 0.04);
        assert!((g.vp_x - 0.04).abs() < 0.04 * 0.04);
        assert_eq!(g.phi_p, 0.0);
    }

    #[test]
    fn phase_shift_injects_sine_into_half_pi_y() {
        let set = PulseSet::ideal().with_phase_shift(PulseId::HalfPiY, 0.2);
        let got = extract_error_params(&set.half_pi_y, PulseId::HalfPiY).unwrap();
        assert!((got.axis_a - 0.2f64.sin()).abs() < 1e-12);
        assert!(got.angle.abs() < 1e-12 && got.axis_b.abs() < 1e-12);
    }
}
