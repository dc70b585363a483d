//! End-to-end runs: simulate, analyze, parameter sweeps and corrected QPT.
//!
//! Sweep points are independent and run in parallel. Every random draw is
//! keyed by the point index and the measurement setting, so results do not
//! depend on scheduling.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{mhz_to_rad_s, ExperimentConfig, PulseSource, QptProcess, SweepKind};
use crate::error::Result;
use crate::estimator::{estimators, EstimateReport};
use crate::io::{exact_rows, rows_to_signals, SignalRow};
use crate::measurement::{sample_all, sample_counts, ShotConfig};
use crate::protocol::simulate_all;
use crate::pulse::{PulseId, PulseSet, PARAM_FIELDS};
use crate::qpt::{
    chi_of_unitary, hs_distance, predict_signals, process_fidelity, qpt_reconstruct, ChiMatrix,
    PrepReadoutModel, QptData, N_SETTINGS,
};
use crate::registry::{Named, Registry};

/// Random stream for `channel` at sweep point `point` (0 is the reference).
fn stream_id(point: usize, channel: u64) -> u64 {
    ((point as u64) << 8) | channel
}

const BOOTSTRAP_CHANNEL: u64 = 0;
const QPT_CHANNEL: u64 = 0x20;

/// A one-dimensional family of pulse sets.
pub trait SweepDriver: Named + Send + Sync {
    /// Header of the swept-value column.
    fn column(&self) -> &'static str;
    /// Sweep values, in the units of [`SweepDriver::column`].
    fn grid(&self, cfg: &ExperimentConfig) -> Result<Vec<f64>>;
    /// The true pulses at sweep value `value`.
    fn pulses_at(&self, source: &PulseSource, value: f64) -> Result<PulseSet>;
}

/// Drive-phase offset of the π/2_Y pulse, in degrees.
pub struct PhaseSweep;

impl Named for PhaseSweep {
    fn name(&self) -> &'static str {
        "phase"
    }
}

impl SweepDriver for PhaseSweep {
    fn column(&self) -> &'static str {
        "phase_deg"
    }

    fn grid(&self, cfg: &ExperimentConfig) -> Result<Vec<f64>> {
        cfg.phase_sweep.values()
    }

    fn pulses_at(&self, source: &PulseSource, value: f64) -> Result<PulseSet> {
        Ok(source
            .pulse_set()?
            .with_phase_shift(PulseId::HalfPiY, value.to_radians()))
    }
}

/// Common detuning of all four physical pulses, in MHz.
pub struct DetuningSweep;

impl Named for DetuningSweep {
    fn name(&self) -> &'static str {
        "detuning"
    }
}

impl SweepDriver for DetuningSweep {
    fn column(&self) -> &'static str {
        "detuning_mhz"
    }

    fn grid(&self, cfg: &ExperimentConfig) -> Result<Vec<f64>> {
        cfg.detuning_sweep.values()
    }

    fn pulses_at(&self, source: &PulseSource, value: f64) -> Result<PulseSet> {
        source
            .physical()?
            .with_detuning(mhz_to_rad_s(value))
            .integrate()
    }
}

pub fn sweep_drivers() -> Registry<dyn SweepDriver> {
    let mut r: Registry<dyn SweepDriver> = Registry::new("sweep");
    r.register(Box::new(PhaseSweep))
        .register(Box::new(DetuningSweep));
    r
}

/// Bootstrap signals for `pulses`: exact, or sampled on the given stream base.
pub fn acquire(
    pulses: &PulseSet,
    shots: Option<&ShotConfig>,
    base_stream: u64,
) -> Result<Vec<SignalRow>> {
    let truth = simulate_all(pulses);
    match shots {
        None => Ok(exact_rows(&truth)),
        Some(c) => Ok(sample_all(&truth, c, base_stream)?
            .iter()
            .map(SignalRow::from)
            .collect()),
    }
}

pub fn run_simulate(cfg: &ExperimentConfig) -> Result<Vec<SignalRow>> {
    let pulses = cfg.source()?.pulse_set()?;
    acquire(&pulses, cfg.shots.as_ref(), stream_id(0, BOOTSTRAP_CHANNEL))
}

pub fn run_analyze(rows: &[SignalRow], estimator: &str) -> Result<EstimateReport> {
    let signals = rows_to_signals(rows)?;
    estimators().get(estimator)?.estimate(&signals)
}

fn estimate_point(
    cfg: &ExperimentConfig,
    pulses: &PulseSet,
    point: usize,
) -> Result<EstimateReport> {
    let rows = acquire(
        pulses,
        cfg.shots.as_ref(),
        stream_id(point, BOOTSTRAP_CHANNEL),
    )?;
    run_analyze(&rows, &cfg.estimator)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub report: EstimateReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub column: &'static str,
    pub points: Vec<SweepPoint>,
}

pub fn run_sweep(cfg: &ExperimentConfig, kind: SweepKind) -> Result<SweepTable> {
    let registry = sweep_drivers();
    let driver = registry.get(kind.driver_name())?;
    let source = cfg.source()?;
    let grid = driver.grid(cfg)?;
    let points = grid
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let pulses = driver.pulses_at(&source, *v)?;
            Ok(SweepPoint {
                value: *v,
                report: estimate_point(cfg, &pulses, i + 1)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        column: driver.column(),
        points,
    })
}

/// Plain shortest round-trip formatting, so files are reproducible.
fn num(x: f64) -> String {
    format!("{x}")
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![self.column.to_string()];
        header.extend(PARAM_FIELDS.iter().map(|f| f.to_string()));
        header.extend(PARAM_FIELDS.iter().map(|f| format!("stderr_{f}")));
        header.push("consistency_residual".into());
        header.push("model_inconsistent".into());
        w.write_record(&header)?;
        for p in &self.points {
            let mut rec = vec![num(p.value)];
            rec.extend(p.report.params.to_array().iter().map(|x| num(*x)));
            rec.extend(p.report.stderrs().iter().map(|x| num(*x)));
            rec.push(num(p.report.consistency_residual));
            rec.push(p.report.model_inconsistent.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn any_inconsistent(&self) -> bool {
        self.points.iter().any(|p| p.report.model_inconsistent)
    }
}

/// Raw and corrected reconstructions of one tomography run.
#[derive(Debug, Clone, PartialEq)]
pub struct QptMeasurement {
    pub raw: ChiMatrix,
    pub corrected: ChiMatrix,
    pub raw_min_eigenvalue: f64,
    pub corrected_min_eigenvalue: f64,
    pub bootstrap: EstimateReport,
}

fn sample_qpt(data: QptData, shots: &ShotConfig, point: usize) -> Result<QptData> {
    let n = shots.shots_per_sequence as f64;
    let mut values = [0.0; N_SETTINGS];
    let mut stderrs = [0.0; N_SETTINGS];
    for (k, v) in data.values.iter().enumerate() {
        let up = sample_counts(*v, shots, stream_id(point, QPT_CHANNEL + k as u64))?;
        let p = up as f64 / n;
        values[k] = 2.0 * p - 1.0;
        stderrs[k] = 2.0 * (p * (1.0 - p) / n).sqrt();
    }
    Ok(QptData {
        values,
        stderrs: Some(stderrs),
    })
}

/// Bootstraps the pulses, then tomographs `process` through the same pulses
/// and reconstructs with both the ideal and the estimated pulse model.
pub fn measure_process(
    cfg: &ExperimentConfig,
    truth: &PulseSet,
    process: QptProcess,
    point: usize,
) -> Result<QptMeasurement> {
    let bootstrap = estimate_point(cfg, truth, point)?;
    let estimated = PulseSet::from_estimate(&bootstrap.params)?;

    let process_chi = match process {
        QptProcess::Identity => chi_of_unitary(&crate::algebra::Unitary2::identity()),
        QptProcess::PiY => chi_of_unitary(&truth.pi_y),
    };
    let mut data = predict_signals(&process_chi, &PrepReadoutModel::from_pulses(truth));
    if let Some(s) = &cfg.shots {
        data = sample_qpt(data, s, point)?;
    }
    let raw = qpt_reconstruct(&data, &PrepReadoutModel::ideal(), true)?;
    let corrected = qpt_reconstruct(&data, &PrepReadoutModel::from_pulses(&estimated), true)?;
    Ok(QptMeasurement {
        raw_min_eigenvalue: raw.min_eigenvalue,
        corrected_min_eigenvalue: corrected.min_eigenvalue,
        raw: raw.chi,
        corrected: corrected.chi,
        bootstrap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QptPoint {
    pub value: f64,
    pub f_raw: f64,
    pub f_corrected: f64,
    pub hs_raw: f64,
    pub hs_corrected: f64,
    pub min_eigenvalue_raw: f64,
    pub min_eigenvalue_corrected: f64,
    pub chi_raw: Vec<[f64; 2]>,
    pub chi_corrected: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QptRun {
    pub process: QptProcess,
    pub sweep: SweepKind,
    pub column: &'static str,
    /// Reference for the raw curve: the raw χ at zero sweep value for the
    /// π_Y process, the ideal χ for the identity.
    pub reference_raw: Vec<[f64; 2]>,
    pub reference_corrected: Vec<[f64; 2]>,
    pub points: Vec<QptPoint>,
}

pub fn run_qpt(cfg: &ExperimentConfig) -> Result<QptRun> {
    let registry = sweep_drivers();
    let driver = registry.get(cfg.qpt.sweep.driver_name())?;
    let source = cfg.source()?;
    let process = cfg.qpt.process;

    let (ref_raw, ref_corrected) = match process {
        QptProcess::Identity => {
            let id = chi_of_unitary(&crate::algebra::Unitary2::identity());
            (id, id)
        }
        QptProcess::PiY => {
            let m = measure_process(cfg, &driver.pulses_at(&source, 0.0)?, process, 0)?;
            (m.raw, m.corrected)
        }
    };

    let grid = driver.grid(cfg)?;
    let points = grid
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let truth = driver.pulses_at(&source, *v)?;
            let m = measure_process(cfg, &truth, process, i + 1)?;
            Ok(QptPoint {
                value: *v,
                f_raw: process_fidelity(&ref_raw, &m.raw),
                f_corrected: process_fidelity(&ref_corrected, &m.corrected),
                hs_raw: hs_distance(&ref_raw, &m.raw),
                hs_corrected: hs_distance(&ref_corrected, &m.corrected),
                min_eigenvalue_raw: m.raw_min_eigenvalue,
                min_eigenvalue_corrected: m.corrected_min_eigenvalue,
                chi_raw: m.raw.to_pairs(),
                chi_corrected: m.corrected.to_pairs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(QptRun {
        process,
        sweep: cfg.qpt.sweep,
        column: driver.column(),
        reference_raw: ref_raw.to_pairs(),
        reference_corrected: ref_corrected.to_pairs(),
        points,
    })
}

impl QptRun {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            self.column,
            "f_raw",
            "f_corrected",
            "hs_raw",
            "hs_corrected",
        ])?;
        for p in &self.points {
            w.write_record([
                num(p.value),
                num(p.f_raw),
                num(p.f_corrected),
                num(p.hs_raw),
                num(p.hs_corrected),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn point_at(&self, value: f64) -> Option<&QptPoint> {
        self.points.iter().find(|p| p.value == value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physical::DriveConfig;
    use crate::pulse::PulseErrorParams;

    fn small_params() -> PulseErrorParams {
        PulseErrorParams::from_array([
            0.01, 0.005, -0.008, -0.012, 0.0, 0.004, 0.007, -0.01, 0.009, 0.011, 0.0, 0.003,
        ])
    }

    #[test]
    fn zero_params_simulate_to_zero_rows() {
        let rows = run_simulate(&ExperimentConfig::with_params(PulseErrorParams::zero())).unwrap();
        assert_eq!(rows.len(), 12);
        assert!(rows.iter().all(|r| r.signal.abs() <= 1e-12 && r.shots == 0));
    }

    #[test]
    fn sampled_simulation_is_reproducible() {
        let mut cfg = ExperimentConfig::with_params(small_params());
        cfg.shots = Some(ShotConfig {
            shots_per_sequence: 10_000,
            seed: 9,
        });
        assert_eq!(run_simulate(&cfg).unwrap(), run_simulate(&cfg).unwrap());
    }

    #[test]
    fn drive_source_matches_integrated_pulses() {
        let d = DriveConfig {
            detuning: mhz_to_rad_s(2.0),
            ..DriveConfig::default()
        };
        let rows = run_simulate(&ExperimentConfig::with_drive(d)).unwrap();
        let expect = simulate_all(&d.pulse_configs().unwrap().integrate().unwrap());
        for r in rows {
            assert_eq!(r.signal, expect.get(r.sequence));
        }
    }

    #[test]
    fn phase_sweep_rows_ordered() {
        let t = run_sweep(
            &ExperimentConfig::with_params(small_params()),
            SweepKind::Phase,
        )
        .unwrap();
        assert_eq!(t.points.len(), 13);
        assert!(t.points.windows(2).all(|w| w[0].value < w[1].value));
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("phase_deg,phi_rad,eps_y"));
        assert_eq!(text.lines().count(), 14);
    }

    #[test]
    fn detuning_sweep_needs_physical_source() {
        let cfg = ExperimentConfig::with_params(small_params());
        assert!(run_sweep(&cfg, SweepKind::Detuning).is_err());
    }

    #[test]
    fn identity_qpt_on_resonance_is_perfect() {
        let mut cfg = ExperimentConfig::with_drive(DriveConfig::default());
        cfg.qpt.process = QptProcess::Identity;
        cfg.qpt.sweep = SweepKind::Detuning;
        cfg.detuning_sweep.count = 3;
        let run = run_qpt(&cfg).unwrap();
        let mid = run.point_at(0.0).unwrap();
        assert!(mid.f_raw > 0.9999 && mid.f_corrected > 0.9999);
        let edge = &run.points[0];
        // raw inversion can leave the physical set (F above 1), so compare
        // distances rather than fidelities
        assert!(edge.hs_corrected < edge.hs_raw / 5.0);
        assert!(edge.f_corrected > 0.99);
    }
}
