//! Bootstrap calibration of systematic single-qubit pulse errors.
//!
//! Twelve short pulse sequences, each linear in the twelve error parameters
//! of the π_X, π_Y, π/2_X and π/2_Y pulses, determine eleven of those
//! parameters; the twelfth is a gauge choice. The estimated errors feed a
//! process tomography step that removes preparation and readout errors.

pub mod algebra;
pub mod config;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod io;
pub mod measurement;
pub mod physical;
pub mod protocol;
pub mod pulse;
pub mod qpt;
pub mod registry;
pub mod verify;

pub use error::{Error, Result};
pub use estimator::{estimate, estimators, EstimateReport, Estimator};
pub use protocol::{SequenceId, SignalVector};
pub use pulse::{PulseErrorParams, PulseId, PulseSet};
