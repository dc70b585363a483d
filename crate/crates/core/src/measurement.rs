//! Finite-shot projective readout.
//!
//! Each draw uses its own ChaCha stream keyed by `(seed, stream_id)`, so the
//! outcome does not depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{SequenceId, SignalVector, SIGNAL_SLACK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotConfig {
    pub shots_per_sequence: u64,
    #[serde(default)]
    pub seed: u64,
}

impl ShotConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shots_per_sequence == 0 {
            return Err(Error::ZeroShots);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub sequence: SequenceId,
    pub shots: u64,
    pub up_counts: u64,
    pub signal_estimate: f64,
    /// Binomial standard error `2·sqrt(p̂(1−p̂)/shots)`; zero when p̂ ∈ {0, 1}.
    pub stderr: f64,
}

impl MeasurementRecord {
    pub fn from_counts(sequence: SequenceId, shots: u64, up_counts: u64) -> Result<Self> {
        if shots == 0 {
            return Err(Error::ZeroShots);
        }
        if up_counts > shots {
            return Err(Error::InvalidConfig(format!(
                "{sequence}: up_counts {up_counts} exceeds shots {shots}"
            )));
        }
        let n = shots as f64;
        let p = up_counts as f64 / n;
        Ok(Self {
            sequence,
            shots,
            up_counts,
            signal_estimate: 2.0 * p - 1.0,
            stderr: 2.0 * (p * (1.0 - p) / n).sqrt(),
        })
    }

    /// Standard error floored at `1/shots`, used as an estimator weight.
    pub fn weight_stderr(&self) -> f64 {
        self.stderr.max(1.0 / self.shots as f64)
    }
}

/// The random stream used for `stream_id` under `seed`.
pub fn stream_rng(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Number of "up" outcomes in `config.shots_per_sequence` projective σz
/// measurements of a state with `⟨σz⟩ = expectation`.
pub fn sample_counts(expectation: f64, config: &ShotConfig, stream_id: u64) -> Result<u64> {
    config.validate()?;
    let p_up = (0.5 * (1.0 + expectation)).clamp(0.0, 1.0);
    let dist = Binomial::new(config.shots_per_sequence, p_up)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(dist.sample(&mut stream_rng(config.seed, stream_id)))
}

/// Draws `shots` projective σz outcomes for a state with `⟨σz⟩ = true_signal`.
pub fn sample_signal(
    sequence: SequenceId,
    true_signal: f64,
    config: &ShotConfig,
    stream_id: u64,
) -> Result<MeasurementRecord> {
    config.validate()?;
    if !true_signal.is_finite() || true_signal.abs() > 1.0 + SIGNAL_SLACK {
        return Err(Error::SignalOutOfRange {
            what: sequence.name().to_string(),
            value: true_signal,
        });
    }
    let up = sample_counts(true_signal, config, stream_id)?;
    MeasurementRecord::from_counts(sequence, config.shots_per_sequence, up)
}

/// Samples all twelve sequences. Sequence `k` uses stream `base_stream + k`.
pub fn sample_all(
    truth: &SignalVector,
    config: &ShotConfig,
    base_stream: u64,
) -> Result<Vec<MeasurementRecord>> {
    SequenceId::ALL
        .iter()
        .map(|s| sample_signal(*s, truth.get(*s), config, base_stream + s.index() as u64))
        .collect()
}

/// Signal vector with floored standard errors, in sequence order.
pub fn records_to_signals(records: &[MeasurementRecord]) -> Result<SignalVector> {
    let mut values = [f64::NAN; 12];
    let mut stderrs = [0.0; 12];
    for r in records {
        values[r.sequence.index()] = r.signal_estimate;
        stderrs[r.sequence.index()] = r.weight_stderr();
    }
    if let Some(i) = values.iter().position(|v| v.is_nan()) {
        return Err(Error::MissingSequence(
            SequenceId::ALL[i].name().to_string(),
        ));
    }
    SignalVector::with_stderrs(values, stderrs)
}
