use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rotation axis must be a unit vector (|n| = {0})")]
    NonUnitAxis(f64),

    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("cannot compose an empty pulse list")]
    EmptyComposition,

    #[error(
        "pulse error parameter `{name}` = {value} is outside the allowed range (|value| < 0.5)"
    )]
    ParameterOutOfRange { name: &'static str, value: f64 },

    #[error("not a calibration pulse: unitary is {distance:.3} rad away from nominal {pulse}")]
    NotACalibrationPulse { pulse: &'static str, distance: f64 },

    #[error("invalid pulse configuration: {0}")]
    InvalidPulseConfig(String),

    #[error("signal {value} for {what} lies outside [-1, 1]")]
    SignalOutOfRange { what: String, value: f64 },

    #[error("shots per sequence must be at least 1")]
    ZeroShots,

    #[error("standard error for {0} is negative or not finite")]
    InvalidStderr(String),

    #[error("unknown sequence id `{0}`")]
    UnknownSequence(String),

    #[error("duplicate sequence id `{0}`")]
    DuplicateSequence(String),

    #[error("missing sequence id `{0}`")]
    MissingSequence(String),

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("linear system is singular")]
    Singular,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
