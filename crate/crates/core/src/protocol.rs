//! The twelve bootstrap calibration sequences.
//!
//! Every sequence starts in |↑⟩ and ends with a σz measurement. Sequences
//! store their pulses in application order: the table notation
//! `π/2_X-π_X` means π_X is applied first.

use std::fmt;
use std::str::FromStr;

use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};

use crate::algebra::{apply_to_up, compose, sigma_z_expectation};
use crate::error::{Error, Result};
use crate::pulse::{PulseErrorParams, PulseId, PulseSet};

pub type DesignMatrix = SMatrix<f64, 12, 12>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SequenceId {
    B1S1,
    B1S2,
    B2S1,
    B2S2,
    B2S3,
    B2S4,
    B3S1,
    B3S2,
    B3S3,
    B3S4,
    B3S5,
    B3S6,
}

use PulseId::{HalfPiX as HX, HalfPiY as HY, PiX as PX, PiY as PY};

impl SequenceId {
    pub const ALL: [SequenceId; 12] = [
        SequenceId::B1S1,
        SequenceId::B1S2,
        SequenceId::B2S1,
        SequenceId::B2S2,
        SequenceId::B2S3,
        SequenceId::B2S4,
        SequenceId::B3S1,
        SequenceId::B3S2,
        SequenceId::B3S3,
        SequenceId::B3S4,
        SequenceId::B3S5,
        SequenceId::B3S6,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            SequenceId::B1S1 => "B1S1",
            SequenceId::B1S2 => "B1S2",
            SequenceId::B2S1 => "B2S1",
            SequenceId::B2S2 => "B2S2",
            SequenceId::B2S3 => "B2S3",
            SequenceId::B2S4 => "B2S4",
            SequenceId::B3S1 => "B3S1",
            SequenceId::B3S2 => "B3S2",
            SequenceId::B3S3 => "B3S3",
            SequenceId::B3S4 => "B3S4",
            SequenceId::B3S5 => "B3S5",
            SequenceId::B3S6 => "B3S6",
        }
    }

    pub fn block(self) -> u8 {
        match self.index() {
            0..=1 => 1,
            2..=5 => 2,
            _ => 3,
        }
    }

    /// Pulses in the order they act on the qubit.
    pub fn pulses(self) -> &'static [PulseId] {
        match self {
            SequenceId::B1S1 => &[HX],
            SequenceId::B1S2 => &[HY],
            SequenceId::B2S1 => &[PX, HX],
            SequenceId::B2S2 => &[PY, HY],
            SequenceId::B2S3 => &[HX, PY],
            SequenceId::B2S4 => &[HY, PX],
            SequenceId::B3S1 => &[HX, HY],
            SequenceId::B3S2 => &[HY, HX],
            SequenceId::B3S3 => &[HY, PX, HX],
            SequenceId::B3S4 => &[HX, PX, HY],
            SequenceId::B3S5 => &[HY, PY, HX],
            SequenceId::B3S6 => &[HX, PY, HY],
        }
    }

    /// Conventional right-to-left notation, e.g. `pi/2_X-pi_X`.
    pub fn notation(self) -> String {
        self.pulses()
            .iter()
            .rev()
            .map(|p| p.name())
            .collect::<Vec<_>>()
            .join("-")
    }

    /// First-order signal coefficients over the canonical parameter vector.
    pub fn coefficients(self) -> [f64; 12] {
        // phi eps_y eps_z phi_p epsp_y epsp_z chi v_x v_z chi_p vp_x vp_z
        match self {
            SequenceId::B1S1 => [0., 0., 0., -2., 0., 0., 0., 0., 0., 0., 0., 0.],
            SequenceId::B1S2 => [0., 0., 0., 0., 0., 0., 0., 0., 0., -2., 0., 0.],
            SequenceId::B2S1 => [2., 0., 0., 2., 0., 0., 0., 0., 0., 0., 0., 0.],
            SequenceId::B2S2 => [0., 0., 0., 0., 0., 0., 2., 0., 0., 2., 0., 0.],
            SequenceId::B2S3 => [0., 0., 0., 2., 0., 0., 0., 0., -2., 0., 0., 0.],
            SequenceId::B2S4 => [0., 0., 2., 0., 0., 0., 0., 0., 0., 2., 0., 0.],
            SequenceId::B3S1 => [0., 0., 0., 0., -1., -1., 0., 0., 0., 0., -1., -1.],
            SequenceId::B3S2 => [0., 0., 0., 0., -1., 1., 0., 0., 0., 0., -1., 1.],
            SequenceId::B3S3 => [0., 2., 0., 0., -1., 1., 0., 0., 0., 0., 1., -1.],
            SequenceId::B3S4 => [0., 2., 0., 0., -1., -1., 0., 0., 0., 0., 1., 1.],
            SequenceId::B3S5 => [0., 0., 0., 0., 1., -1., 0., 2., 0., 0., -1., 1.],
            SequenceId::B3S6 => [0., 0., 0., 0., 1., 1., 0., 2., 0., 0., -1., -1.],
        }
    }
}

impl fmt::Display for SequenceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SequenceId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SequenceId::ALL
            .iter()
            .copied()
            .find(|id| id.name() == s.trim())
            .ok_or_else(|| Error::UnknownSequence(s.to_string()))
    }
}

/// Bound on signal magnitude, allowing for rounding.
pub const SIGNAL_SLACK: f64 = 1e-9;

/// The twelve calibration signals with optional standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalVector {
    values: [f64; 12],
    stderrs: Option<[f64; 12]>,
}

impl SignalVector {
    pub fn new(values: [f64; 12]) -> Result<Self> {
        for (id, v) in SequenceId::ALL.iter().zip(values) {
            if !v.is_finite() || v.abs() > 1.0 + SIGNAL_SLACK {
                return Err(Error::SignalOutOfRange {
                    what: id.name().to_string(),
                    value: v,
                });
            }
        }
        Ok(Self {
            values,
            stderrs: None,
        })
    }

    pub fn with_stderrs(values: [f64; 12], stderrs: [f64; 12]) -> Result<Self> {
        let mut sv = Self::new(values)?;
        for (id, s) in SequenceId::ALL.iter().zip(stderrs) {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::InvalidStderr(id.name().to_string()));
            }
        }
        sv.stderrs = Some(stderrs);
        Ok(sv)
    }

    pub fn values(&self) -> &[f64; 12] {
        &self.values
    }

    pub fn stderrs(&self) -> Option<&[f64; 12]> {
        self.stderrs.as_ref()
    }

    pub fn get(&self, id: SequenceId) -> f64 {
        self.values[id.index()]
    }
}

/// Exact `⟨σz⟩` after running sequence `s` with the given pulses.
pub fn simulate_with(s: SequenceId, pulses: &PulseSet) -> f64 {
    let us: Vec<_> = s.pulses().iter().map(|p| *pulses.get(*p)).collect();
    let u = compose(&us).expect("sequences are nonempty");
    sigma_z_expectation(&apply_to_up(&u))
}

pub fn simulate_signal(s: SequenceId, e: &PulseErrorParams) -> Result<f64> {
    Ok(simulate_with(s, &PulseSet::from_params(e)?))
}

/// All twelve exact signals for a pulse set.
pub fn simulate_all(pulses: &PulseSet) -> SignalVector {
    let values = SequenceId::ALL.map(|s| simulate_with(s, pulses));
    SignalVector::new(values).expect("unitary evolution keeps signals in range")
}

/// First-order signal of sequence `s`.
pub fn linearized_signal(s: SequenceId, e: &PulseErrorParams) -> f64 {
    s.coefficients()
        .iter()
        .zip(e.to_array())
        .map(|(c, x)| c * x)
        .sum()
}

/// Rows are sequences, columns the canonical parameter order.
pub fn design_matrix() -> DesignMatrix {
    DesignMatrix::from_fn(|r, c| SequenceId::ALL[r].coefficients()[c])
}

/// Direction of the global z-rotation gauge mode in parameter space.
pub fn gauge_direction() -> [f64; 12] {
    let mut g = [0.0; 12];
    g[1] = 1.0; // eps_y
    g[4] = 1.0; // epsp_y
    g[7] = -1.0; // v_x
    g[10] = -1.0; // vp_x
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::PARAM_NAMES;

    fn params(pairs: &[(&str, f64)]) -> PulseErrorParams {
        let mut v = [0.0; 12];
        for (name, value) in pairs {
            v[PARAM_NAMES.iter().position(|n| n == name).unwrap()] = *value;
        }
        PulseErrorParams::from_array(v)
    }

    #[test]
    fn notation_reads_right_to_left() {
        assert_eq!(SequenceId::B2S1.notation(), "pi/2_X-pi_X");
        assert_eq!(SequenceId::B2S3.notation(), "pi_Y-pi/2_X");
        assert_eq!(SequenceId::B3S3.notation(), "pi/2_X-pi_X-pi/2_Y");
        let all: Vec<String> = SequenceId::ALL.iter().map(|s| s.notation()).collect();
        assert_eq!(
            all,
            [
                "pi/2_X",
                "pi/2_Y",
                "pi/2_X-pi_X",
                "pi/2_Y-pi_Y",
                "pi_Y-pi/2_X",
                "pi_X-pi/2_Y",
                "pi/2_Y-pi/2_X",
                "pi/2_X-pi/2_Y",
                "pi/2_X-pi_X-pi/2_Y",
                "pi/2_Y-pi_X-pi/2_X",
                "pi/2_X-pi_Y-pi/2_Y",
                "pi/2_Y-pi_Y-pi/2_X",
            ]
        );
        assert_eq!(SequenceId::B1S1.block(), 1);
        assert_eq!(SequenceId::B2S4.block(), 2);
        assert_eq!(SequenceId::B3S6.block(), 3);
    }

    #[test]
    fn parse_names() {
        for id in SequenceId::ALL {
            assert_eq!(id.name().parse::<SequenceId>().unwrap(), id);
        }
        assert!(matches!(
            "B4S1".parse::<SequenceId>(),
            Err(Error::UnknownSequence(_))
        ));
    }

    #[test]
    fn zero_error_signals_vanish() {
        for s in SequenceId::ALL {
            assert!(simulate_signal(s, &PulseErrorParams::zero()).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn single_half_pi_x_with_angle_error() {
        let e = params(&[("phi_p", 0.05)]);
        let exact = simulate_signal(SequenceId::B1S1, &e).unwrap();
        assert!((exact + 0.1f64.sin()).abs() < 1e-14);
        assert!((linearized_signal(SequenceId::B1S1, &e) + 0.1).abs() < 1e-15);
    }

    #[test]
    fn pi_y_z_tilt_after_half_pi_x() {
        let e = params(&[("v_z", 0.05)]);
        let exact = simulate_signal(SequenceId::B2S3, &e).unwrap();
        // π about a unit axis with n_z = v_z maps (0,−1,0) to z = −2 n_y n_z
        let expected = -2.0 * 0.05 * (1.0f64 - 0.05 * 0.05).sqrt();
        assert!((exact - expected).abs() < 1e-14);
        assert!((exact + 0.1).abs() < 1e-3);
    }

    #[test]
    fn linearized_rows_from_table() {
        let e = params(&[("epsp_z", 0.02), ("vp_x", 0.03), ("vp_z", -0.01)]);
        assert!((linearized_signal(SequenceId::B3S1, &e) + 0.04).abs() < 1e-15);
        let e = params(&[("phi", 0.03), ("phi_p", 0.01)]);
        assert!((linearized_signal(SequenceId::B2S1, &e) - 0.08).abs() < 1e-15);
        for s in SequenceId::ALL {
            assert_eq!(linearized_signal(s, &PulseErrorParams::zero()), 0.0);
        }
    }

    #[test]
    fn design_matrix_has_one_gauge_mode() {
        let m = design_matrix();
        let svd = m.svd(false, false);
        let rank = svd.singular_values.iter().filter(|s| **s > 1e-10).count();
        assert_eq!(rank, 11);
        let g = nalgebra::SVector::<f64, 12>::from(gauge_direction());
        assert!((m * g).amax() < 1e-12);

        let reduced = m.remove_column(crate::pulse::GAUGE_INDEX);
        let svd = reduced.svd(false, false);
        assert_eq!(
            svd.singular_values.iter().filter(|s| **s > 1e-10).count(),
            11
        );
    }

    #[test]
    fn signal_vector_range_checks() {
        let mut v = [0.0; 12];
        v[3] = 1.0 + 1e-10;
        assert!(SignalVector::new(v).is_ok());
        v[3] = 1.01;
        assert!(matches!(
            SignalVector::new(v),
            Err(Error::SignalOutOfRange { .. })
        ));
        let mut s = [0.0; 12];
        s[0] = -1.0;
        assert!(matches!(
            SignalVector::with_stderrs([0.0; 12], s),
            Err(Error::InvalidStderr(_))
        ));
    }
}
