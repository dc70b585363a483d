//! File formats: the signals table (CSV) and the estimate report (JSON).

use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::EstimateReport;
use crate::measurement::MeasurementRecord;
use crate::protocol::{SequenceId, SignalVector};
use crate::pulse::{PulseErrorParams, PARAM_FIELDS};

/// Largest allowed mismatch between `signal` and `2·up_counts/shots − 1`.
const COUNT_TOL: f64 = 1e-9;

/// One row of the signals table. `shots = 0` marks an exact signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignalRow {
    pub sequence: SequenceId,
    pub shots: u64,
    pub up_counts: u64,
    pub signal: f64,
    pub stderr: f64,
}

#[derive(Deserialize)]
struct RawRow {
    sequence: String,
    shots: u64,
    up_counts: u64,
    signal: f64,
    stderr: f64,
}

impl SignalRow {
    pub fn exact(sequence: SequenceId, signal: f64) -> Self {
        Self {
            sequence,
            shots: 0,
            up_counts: 0,
            signal,
            stderr: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let name = self.sequence.name();
        if !self.signal.is_finite() || self.signal.abs() > 1.0 + crate::protocol::SIGNAL_SLACK {
            return Err(Error::SignalOutOfRange {
                what: name.to_string(),
                value: self.signal,
            });
        }
        if !self.stderr.is_finite() || self.stderr < 0.0 {
            return Err(Error::InvalidStderr(name.to_string()));
        }
        if self.shots > 0 {
            if self.up_counts > self.shots {
                return Err(Error::InvalidConfig(format!(
                    "{name}: up_counts {} exceeds shots {}",
                    self.up_counts, self.shots
                )));
            }
            let implied = 2.0 * self.up_counts as f64 / self.shots as f64 - 1.0;
            if (implied - self.signal).abs() > COUNT_TOL {
                return Err(Error::InvalidConfig(format!(
                    "{name}: signal {} does not match counts {}/{}",
                    self.signal, self.up_counts, self.shots
                )));
            }
        }
        Ok(())
    }

    /// Standard error used for weighting; sampled rows are floored at `1/shots`.
    fn weight_stderr(&self) -> f64 {
        if self.shots > 0 {
            self.stderr.max(1.0 / self.shots as f64)
        } else {
            self.stderr
        }
    }
}

impl From<&MeasurementRecord> for SignalRow {
    fn from(r: &MeasurementRecord) -> Self {
        Self {
            sequence: r.sequence,
            shots: r.shots,
            up_counts: r.up_counts,
            signal: r.signal_estimate,
            stderr: r.stderr,
        }
    }
}

pub fn exact_rows(sv: &SignalVector) -> Vec<SignalRow> {
    SequenceId::ALL
        .iter()
        .map(|s| SignalRow::exact(*s, sv.get(*s)))
        .collect()
}

pub fn write_signals<W: Write>(rows: &[SignalRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_signals<R: Read>(input: R) -> Result<Vec<SignalRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows = Vec::new();
    for raw in rdr.deserialize::<RawRow>() {
        let raw = raw?;
        let row = SignalRow {
            sequence: raw.sequence.parse()?,
            shots: raw.shots,
            up_counts: raw.up_counts,
            signal: raw.signal,
            stderr: raw.stderr,
        };
        row.validate()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Assembles the twelve rows into a signal vector.
///
/// Standard errors are attached only when every row has one (sampled rows
/// always do, through the `1/shots` floor).
pub fn rows_to_signals(rows: &[SignalRow]) -> Result<SignalVector> {
    let mut seen = BTreeSet::new();
    let mut values = [0.0; 12];
    let mut stderrs = [0.0; 12];
    for r in rows {
        if !seen.insert(r.sequence) {
            return Err(Error::DuplicateSequence(r.sequence.name().to_string()));
        }
        values[r.sequence.index()] = r.signal;
        stderrs[r.sequence.index()] = r.weight_stderr();
    }
    if let Some(missing) = SequenceId::ALL.iter().find(|s| !seen.contains(s)) {
        return Err(Error::MissingSequence(missing.name().to_string()));
    }
    if stderrs.iter().all(|s| *s > 0.0) {
        SignalVector::with_stderrs(values, stderrs)
    } else {
        SignalVector::new(values)
    }
}

/// On-disk form of an [`EstimateReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateReportFile {
    pub estimator: String,
    pub params: PulseErrorParams,
    pub stderrs: PulseErrorParams,
    /// Row and column order of `covariance`.
    pub parameter_order: Vec<String>,
    pub covariance: Vec<[f64; 12]>,
    pub consistency_residual: f64,
    pub model_inconsistent: bool,
    pub beyond_linear_regime: bool,
}

impl From<&EstimateReport> for EstimateReportFile {
    fn from(r: &EstimateReport) -> Self {
        Self {
            estimator: r.estimator.to_string(),
            params: r.params,
            stderrs: PulseErrorParams::from_array(r.stderrs()),
            parameter_order: PARAM_FIELDS.iter().map(|s| s.to_string()).collect(),
            covariance: (0..12)
                .map(|i| std::array::from_fn(|j| r.covariance[(i, j)]))
                .collect(),
            consistency_residual: r.consistency_residual,
            model_inconsistent: r.model_inconsistent,
            beyond_linear_regime: r.beyond_linear_regime,
        }
    }
}

pub fn report_to_json(r: &EstimateReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(&EstimateReportFile::from(r))?)
}
