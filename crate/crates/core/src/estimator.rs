//! Inversion of the twelve calibration signals into pulse error parameters.
//!
//! All estimators report parameters in the gauge where the π/2_X axis has no
//! y component (`epsp_y = 0`), with a zero covariance row and column for it.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::protocol::{design_matrix, simulate_all, SequenceId, SignalVector};
use crate::pulse::{PulseErrorParams, PulseSet, GAUGE_INDEX, PARAM_NAMES};
use crate::registry::{Named, Registry};

pub type Covariance = SMatrix<f64, 12, 12>;
type Reduced = SMatrix<f64, 12, 11>;
type LeftInverse = SMatrix<f64, 11, 12>;

/// `|r|` above which data are flagged as inconsistent with the error model.
pub const INCONSISTENCY_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub params: PulseErrorParams,
    pub covariance: Covariance,
    /// `(S9 − S10) + (S11 − S12)`; vanishes to first order.
    pub consistency_residual: f64,
    pub model_inconsistent: bool,
    pub beyond_linear_regime: bool,
    pub estimator: &'static str,
}

impl EstimateReport {
    pub fn stderrs(&self) -> [f64; 12] {
        std::array::from_fn(|i| self.covariance[(i, i)].max(0.0).sqrt())
    }

    fn assemble(
        params: [f64; 12],
        covariance: Covariance,
        signals: &SignalVector,
        estimator: &'static str,
    ) -> Result<Self> {
        // Estimates are not held to the hard range of simulation inputs: a
        // true value near the edge can land just past it. The advisory flag
        // reports this instead.
        if let Some(i) = params.iter().position(|x| !x.is_finite()) {
            return Err(Error::ParameterOutOfRange {
                name: PARAM_NAMES[i],
                value: params[i],
            });
        }
        let params = PulseErrorParams::from_array(params);
        let r = consistency_residual(signals);
        Ok(Self {
            params,
            covariance,
            consistency_residual: r,
            model_inconsistent: r.abs() > INCONSISTENCY_THRESHOLD,
            beyond_linear_regime: params.beyond_linear_regime(),
            estimator,
        })
    }
}

pub fn consistency_residual(sv: &SignalVector) -> f64 {
    use SequenceId::*;
    (sv.get(B3S3) - sv.get(B3S4)) + (sv.get(B3S5) - sv.get(B3S6))
}

/// A signal-to-parameter inversion strategy.
pub trait Estimator: Named + Send + Sync {
    fn estimate(&self, signals: &SignalVector) -> Result<EstimateReport>;
}

/// Block-by-block closed-form solution.
pub fn closed_form(s: &[f64; 12]) -> [f64; 12] {
    let [s1, s2, s3, s4, s5, s6, s7, s8, s9, s10, s11, s12] = *s;
    // block 1: angle errors of the π/2 pulses
    let phi_p = -s1 / 2.0;
    let chi_p = -s2 / 2.0;
    // block 2: π angle errors and z tilts
    let phi = s3 / 2.0 - phi_p;
    let chi = s4 / 2.0 - chi_p;
    let v_z = phi_p - s5 / 2.0;
    let eps_z = s6 / 2.0 - chi_p;
    // block 3: transverse tilts, with epsp_y = 0
    let vp_x = -(s7 + s8) / 2.0;
    let epsp_z = ((s8 - s7) + (s9 - s10)) / 4.0;
    let vp_z = ((s8 - s7) - (s9 - s10)) / 4.0;
    let eps_y = (s9 + s10 - 2.0 * vp_x) / 4.0;
    let v_x = (s11 + s12 + 2.0 * vp_x) / 4.0;
    [
        phi, eps_y, eps_z, phi_p, 0.0, epsp_z, chi, v_x, v_z, chi_p, vp_x, vp_z,
    ]
}

/// Jacobian of [`closed_form`] with respect to the signals.
pub fn closed_form_jacobian() -> Covariance {
    let mut j = Covariance::zeros();
    for k in 0..12 {
        let mut unit = [0.0; 12];
        unit[k] = 1.0;
        let col = closed_form(&unit);
        for (i, v) in col.iter().enumerate() {
            j[(i, k)] = *v;
        }
    }
    j
}

fn propagate(jac: &Covariance, stderrs: Option<&[f64; 12]>) -> Covariance {
    match stderrs {
        Some(s) => {
            let var = SMatrix::<f64, 12, 12>::from_diagonal(&SVector::from(s.map(|x| x * x)));
            let c = jac * var * jac.transpose();
            (c + c.transpose()) * 0.5
        }
        None => Covariance::zeros(),
    }
}

/// Design matrix without the gauge column.
pub fn reduced_design() -> Reduced {
    design_matrix().remove_column(GAUGE_INDEX)
}

/// Weighted left inverse `(AᵀWA)⁻¹AᵀW` of the reduced design matrix.
///
/// Weights are `1/σ²` when every standard error is positive, uniform otherwise.
pub fn weighted_left_inverse(stderrs: Option<&[f64; 12]>) -> Result<LeftInverse> {
    weighted_left_inverse_of(&reduced_design(), stderrs)
}

fn weighted_left_inverse_of(a: &Reduced, stderrs: Option<&[f64; 12]>) -> Result<LeftInverse> {
    let w: [f64; 12] = match stderrs {
        Some(s) if s.iter().all(|x| *x > 0.0) => s.map(|x| 1.0 / (x * x)),
        _ => [1.0; 12],
    };
    let w = SMatrix::<f64, 12, 12>::from_diagonal(&SVector::from(w));
    let normal = a.transpose() * w * a;
    let inv = normal.try_inverse().ok_or(Error::Singular)?;
    Ok(inv * a.transpose() * w)
}

/// Expands an 11-parameter vector or left inverse back to 12 rows.
fn expand_rows(m: &LeftInverse) -> Covariance {
    let mut out = Covariance::zeros();
    for r in 0..11 {
        let target = if r < GAUGE_INDEX { r } else { r + 1 };
        out.set_row(target, &m.row(r));
    }
    out
}

pub struct ClosedForm;

impl Named for ClosedForm {
    fn name(&self) -> &'static str {
        "closed-form"
    }
}

impl Estimator for ClosedForm {
    fn estimate(&self, signals: &SignalVector) -> Result<EstimateReport> {
        let params = closed_form(signals.values());
        let cov = propagate(&closed_form_jacobian(), signals.stderrs());
        EstimateReport::assemble(params, cov, signals, self.name())
    }
}

/// Weighted least squares through the reduced design matrix.
pub struct LeastSquares;

impl Named for LeastSquares {
    fn name(&self) -> &'static str {
        "least-squares"
    }
}

impl Estimator for LeastSquares {
    fn estimate(&self, signals: &SignalVector) -> Result<EstimateReport> {
        let g = expand_rows(&weighted_left_inverse(signals.stderrs())?);
        let p = g * SVector::from(*signals.values());
        let cov = propagate(&g, signals.stderrs());
        EstimateReport::assemble(p.into(), cov, signals, self.name())
    }
}

/// Gauss-Newton fit of the exact (nonlinear) signal model, started from the
/// closed form. Removes the second-order bias of the linear estimators.
pub struct Refit;

const REFIT_MAX_ITER: usize = 20;
const REFIT_STEP_TOL: f64 = 1e-13;
const JACOBIAN_STEP: f64 = 1e-6;

fn simulate_params(p: &[f64; 12]) -> Result<SVector<f64, 12>> {
    let set = PulseSet::from_estimate(&PulseErrorParams::from_array(*p))?;
    Ok(SVector::from(*simulate_all(&set).values()))
}

/// Central-difference Jacobian of the exact signals in the 11 free parameters.
fn local_design(p: &[f64; 12]) -> Result<Reduced> {
    let mut j = Reduced::zeros();
    for c in 0..11 {
        let k = if c < GAUGE_INDEX { c } else { c + 1 };
        let (mut hi, mut lo) = (*p, *p);
        hi[k] += JACOBIAN_STEP;
        lo[k] -= JACOBIAN_STEP;
        let d = (simulate_params(&hi)? - simulate_params(&lo)?) / (2.0 * JACOBIAN_STEP);
        j.set_column(c, &d);
    }
    Ok(j)
}

fn refit_step(
    p: &[f64; 12],
    target: &SVector<f64, 12>,
    stderrs: Option<&[f64; 12]>,
) -> Result<(SVector<f64, 11>, LeftInverse)> {
    let g = weighted_left_inverse_of(&local_design(p)?, stderrs)?;
    Ok((g * (target - simulate_params(p)?), g))
}

impl Named for Refit {
    fn name(&self) -> &'static str {
        "refit"
    }
}

impl Estimator for Refit {
    fn estimate(&self, signals: &SignalVector) -> Result<EstimateReport> {
        let target = SVector::from(*signals.values());
        let mut p = closed_form(signals.values());
        let mut g = weighted_left_inverse_of(&reduced_design(), signals.stderrs())?;
        for _ in 0..REFIT_MAX_ITER {
            // Newton from a start outside the model's domain: keep the last
            // valid iterate
            let Ok((step, local)) = refit_step(&p, &target, signals.stderrs()) else {
                break;
            };
            g = local;
            for c in 0..11 {
                p[if c < GAUGE_INDEX { c } else { c + 1 }] += step[c];
            }
            if step.amax() < REFIT_STEP_TOL {
                break;
            }
        }
        p[GAUGE_INDEX] = 0.0;
        let cov = propagate(&expand_rows(&g), signals.stderrs());
        EstimateReport::assemble(p, cov, signals, self.name())
    }
}

/// Registry holding the built-in estimators.
pub fn estimators() -> Registry<dyn Estimator> {
    let mut r: Registry<dyn Estimator> = Registry::new("estimator");
    r.register(Box::new(ClosedForm))
        .register(Box::new(LeastSquares))
        .register(Box::new(Refit));
    r
}

pub const DEFAULT_ESTIMATOR: &str = "closed-form";

/// Closed-form estimate; covariance is zero unless stderrs are attached.
pub fn estimate(signals: &SignalVector) -> Result<EstimateReport> {
    ClosedForm.estimate(signals)
}

/// Closed-form estimate with the signal errors propagated to the parameters.
pub fn estimate_with_uncertainty(signals: &SignalVector) -> Result<EstimateReport> {
    if signals.stderrs().is_none() {
        return Err(Error::InvalidStderr("all sequences (none supplied)".into()));
    }
    ClosedForm.estimate(signals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::linearized_signal;
    use crate::pulse::gauge_fix;

    fn lin_signals(e: &PulseErrorParams) -> SignalVector {
        SignalVector::new(SequenceId::ALL.map(|s| linearized_signal(s, e))).unwrap()
    }

    fn sample_params() -> PulseErrorParams {
        PulseErrorParams::from_array([
            0.011, -0.02, 0.013, -0.007, 0.0, 0.019, 0.004, 0.017, -0.012, 0.009, -0.015, 0.006,
        ])
    }

    #[test]
    fn zero_signals_give_zero_estimate() {
        let r = estimate(&SignalVector::new([0.0; 12]).unwrap()).unwrap();
        assert_eq!(r.params, PulseErrorParams::zero());
        assert_eq!(r.consistency_residual, 0.0);
        assert!(!r.model_inconsistent);
    }

    #[test]
    fn linear_signals_invert_exactly() {
        let e = sample_params();
        let r = estimate(&lin_signals(&e)).unwrap();
        for (a, b) in r.params.to_array().iter().zip(e.to_array()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(r.consistency_residual.abs() < 1e-15);
    }

    #[test]
    fn closed_form_agrees_with_pseudo_inverse() {
        let sv = lin_signals(&sample_params());
        let a = ClosedForm.estimate(&sv).unwrap().params.to_array();
        let b = LeastSquares.estimate(&sv).unwrap().params.to_array();
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-12);
        }
        // and with heterogeneous weights
        let s: [f64; 12] = std::array::from_fn(|i| 0.001 * (1.0 + i as f64));
        let sv = SignalVector::with_stderrs(*sv.values(), s).unwrap();
        let b = LeastSquares.estimate(&sv).unwrap().params.to_array();
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_is_a_left_inverse_of_the_design() {
        let j = closed_form_jacobian();
        let m = design_matrix();
        let jm = j * m;
        for i in 0..12 {
            for k in 0..12 {
                let expected = if i == GAUGE_INDEX || k == GAUGE_INDEX {
                    continue;
                } else if i == k {
                    1.0
                } else {
                    0.0
                };
                assert!((jm[(i, k)] - expected).abs() < 1e-14, "({i},{k})");
            }
        }
    }

    #[test]
    fn ungauged_input_returns_gauge_fixed_estimate() {
        let mut e = sample_params();
        e.epsp_y = 0.03;
        let r = estimate(&lin_signals(&e)).unwrap();
        let g = gauge_fix(&e);
        assert_eq!(r.params.epsp_y, 0.0);
        for (a, b) in r.params.to_array().iter().zip(g.to_array()) {
            assert!((a - b).abs() < 4.0 * 0.03 * 0.03);
        }
        assert!((r.params.eps_y - (e.eps_y - 0.03)).abs() < 1e-12);
    }

    #[test]
    fn covariance_from_single_stderr() {
        let mut s = [0.0; 12];
        s[0] = 0.01;
        let r =
            estimate_with_uncertainty(&SignalVector::with_stderrs([0.0; 12], s).unwrap()).unwrap();
        assert!((r.covariance[(3, 3)] - 0.01f64.powi(2) / 4.0).abs() < 1e-18);
    }

    #[test]
    fn covariance_with_uniform_stderr() {
        let s = 0.02;
        let r = estimate_with_uncertainty(&SignalVector::with_stderrs([0.0; 12], [s; 12]).unwrap())
            .unwrap();
        // ε_y = (S7 + S8 + S9 + S10)/4
        assert!((r.covariance[(1, 1)] - s * s / 4.0).abs() < 1e-18);
        // φ' = −S1/2
        assert!((r.covariance[(3, 3)] - s * s / 4.0).abs() < 1e-18);
        // φ = S3/2 + S1/2
        assert!((r.covariance[(0, 0)] - s * s / 2.0).abs() < 1e-18);
        for k in 0..12 {
            assert_eq!(r.covariance[(GAUGE_INDEX, k)], 0.0);
        }
        let eig = r.covariance.symmetric_eigenvalues();
        assert!(eig.iter().all(|l| *l > -1e-18));
    }

    #[test]
    fn zero_stderrs_give_zero_covariance() {
        let r =
            estimate_with_uncertainty(&SignalVector::with_stderrs([0.0; 12], [0.0; 12]).unwrap())
                .unwrap();
        assert_eq!(r.covariance, Covariance::zeros());
        assert!(estimate_with_uncertainty(&SignalVector::new([0.0; 12]).unwrap()).is_err());
    }

    #[test]
    fn inconsistent_data_flagged() {
        let mut v = [0.0; 12];
        v[SequenceId::B3S3.index()] = 0.2;
        let r = estimate(&SignalVector::new(v).unwrap()).unwrap();
        assert!((r.consistency_residual - 0.2).abs() < 1e-15);
        assert!(r.model_inconsistent);
    }

    #[test]
    fn refit_recovers_exact_parameters() {
        let e = gauge_fix(&PulseErrorParams::from_array(
            sample_params().to_array().map(|x| 4.0 * x),
        ));
        let sv = simulate_all(&PulseSet::from_params(&e).unwrap());
        let err = |r: &EstimateReport| {
            r.params
                .to_array()
                .iter()
                .zip(e.to_array())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        };
        let single = err(&ClosedForm.estimate(&sv).unwrap());
        let refit = err(&Refit.estimate(&sv).unwrap());
        assert!(
            refit < 1e-9 && refit < single / 100.0,
            "{refit} vs {single}"
        );
    }

    #[test]
    fn registry_lists_builtins() {
        let r = estimators();
        assert_eq!(r.names(), vec!["closed-form", "least-squares", "refit"]);
        assert_eq!(r.get(DEFAULT_ESTIMATOR).unwrap().name(), "closed-form");
        assert!(r.get("bayes").is_err());
    }
}
