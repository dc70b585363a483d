//! Single-qubit process tomography in the Pauli operator basis.
//!
//! A process acts as `E(ρ) = Σₘₙ χₘₙ Eₘ ρ Eₙ†` with `E = (I, σx, σy, σz)`.
//! Data are twelve σz expectations: four state preparations (no pulse, π_X,
//! π/2_X, π/2_Y) times three readout rotations (no pulse, π/2_X, π/2_Y).
//! Reconstruction is plain linear inversion; positivity is reported, never
//! imposed.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use crate::algebra::{pauli_basis, sigma_z, Complex2x2, Unitary2, C64};
use crate::error::{Error, Result};
use crate::pulse::{PulseErrorParams, PulseSet};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-6;
pub const N_PREPS: usize = 4;
pub const N_READOUTS: usize = 3;
pub const N_SETTINGS: usize = N_PREPS * N_READOUTS;

/// Relative singular-value cutoff for the rank of the inversion system.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiMatrix(Matrix4<C64>);

impl ChiMatrix {
    /// Wraps `m` after checking it is Hermitian to [`HERMITIAN_TOL`].
    pub fn new(m: Matrix4<C64>) -> Result<Self> {
        let dev = (m - m.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev > HERMITIAN_TOL || !dev.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "chi matrix is not Hermitian (deviation {dev:.3e})"
            )));
        }
        Ok(Self(m))
    }

    /// Also requires unit trace, as for a trace-preserving process.
    pub fn new_trace_preserving(m: Matrix4<C64>) -> Result<Self> {
        let chi = Self::new(m)?;
        let tr = chi.0.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidConfig(format!("chi trace {tr} is not 1")));
        }
        Ok(chi)
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Row-major `(re, im)` pairs.
    pub fn to_pairs(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(16);
        for r in 0..4 {
            for c in 0..4 {
                let z = self.0[(r, c)];
                out.push([z.re, z.im]);
            }
        }
        out
    }

    pub fn from_pairs(pairs: &[[f64; 2]]) -> Result<Self> {
        if pairs.len() != 16 {
            return Err(Error::InvalidConfig(format!(
                "chi needs 16 entries, got {}",
                pairs.len()
            )));
        }
        Self::new(Matrix4::from_fn(|r, c| {
            let [re, im] = pairs[4 * r + c];
            C64::new(re, im)
        }))
    }

    /// `E(ρ)` for a 2×2 density matrix.
    pub fn apply(&self, rho: &Complex2x2) -> Complex2x2 {
        apply_chi(&self.0, rho)
    }
}

fn apply_chi(chi: &Matrix4<C64>, rho: &Complex2x2) -> Complex2x2 {
    let e = pauli_basis();
    let mut out = Matrix2::zeros();
    for m in 0..4 {
        let left = e[m] * rho;
        for n in 0..4 {
            let c = chi[(m, n)];
            if c != C64::new(0.0, 0.0) {
                out += left * e[n].adjoint() * c;
            }
        }
    }
    out
}

/// `χ = a·a†` with `aₘ = Tr(Eₘ†U)/2`.
pub fn chi_of_unitary(u: &Unitary2) -> ChiMatrix {
    let a: Vec<C64> = pauli_basis()
        .iter()
        .map(|e| (e.adjoint() * u.matrix()).trace() * 0.5)
        .collect();
    ChiMatrix(Matrix4::from_fn(|m, n| a[m] * a[n].conj()))
}

/// Preparation and readout unitaries of the tomography scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrepReadoutModel {
    /// No pulse, π_X, π/2_X, π/2_Y.
    pub preps: [Unitary2; N_PREPS],
    /// No pulse, π/2_X, π/2_Y.
    pub readouts: [Unitary2; N_READOUTS],
}

impl PrepReadoutModel {
    pub fn ideal() -> Self {
        Self::from_pulses(&PulseSet::ideal())
    }

    pub fn from_pulses(p: &PulseSet) -> Self {
        let id = Unitary2::identity();
        Self {
            preps: [id, p.pi_x, p.half_pi_x, p.half_pi_y],
            readouts: [id, p.half_pi_x, p.half_pi_y],
        }
    }

    pub fn from_params(e: &PulseErrorParams) -> Result<Self> {
        Ok(Self::from_pulses(&PulseSet::from_params(e)?))
    }
}

/// Twelve tomography signals, indexed `prep * 3 + readout`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QptData {
    pub values: [f64; N_SETTINGS],
    #[serde(default)]
    pub stderrs: Option<[f64; N_SETTINGS]>,
}

impl QptData {
    pub fn new(values: [f64; N_SETTINGS]) -> Result<Self> {
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() || v.abs() > 1.0 + 1e-9 {
                return Err(Error::SignalOutOfRange {
                    what: format!("qpt setting {i}"),
                    value: *v,
                });
            }
        }
        Ok(Self {
            values,
            stderrs: None,
        })
    }

    pub fn setting(prep: usize, readout: usize) -> usize {
        prep * N_READOUTS + readout
    }
}

fn predict_raw(chi: &Matrix4<C64>, model: &PrepReadoutModel) -> [f64; N_SETTINGS] {
    let up = Matrix2::new(
        C64::new(1.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
    );
    let z = sigma_z();
    let mut out = [0.0; N_SETTINGS];
    for (i, prep) in model.preps.iter().enumerate() {
        let rho_in = prep.matrix() * up * prep.matrix().adjoint();
        let rho_out = apply_chi(chi, &rho_in);
        for (r, read) in model.readouts.iter().enumerate() {
            let rotated = read.matrix() * rho_out * read.matrix().adjoint();
            out[QptData::setting(i, r)] = (z * rotated).trace().re;
        }
    }
    out
}

/// Signals the process `chi` would produce under `model`.
pub fn predict_signals(chi: &ChiMatrix, model: &PrepReadoutModel) -> QptData {
    QptData {
        values: predict_raw(&chi.0, model),
        stderrs: None,
    }
}

/// Hermitian basis used for the 16 real unknowns of χ.
fn hermitian_basis() -> Vec<Matrix4<C64>> {
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let mut out = Vec::with_capacity(16);
    for k in 0..4 {
        let mut m = Matrix4::zeros();
        m[(k, k)] = one;
        out.push(m);
    }
    for r in 0..4 {
        for c in (r + 1)..4 {
            let mut re = Matrix4::zeros();
            re[(r, c)] = one;
            re[(c, r)] = one;
            out.push(re);
            let mut im = Matrix4::zeros();
            im[(r, c)] = -i;
            im[(c, r)] = i;
            out.push(im);
        }
    }
    out
}

/// Pauli components of `Σ χₘₙ Eₙ†Eₘ`; `(1, 0, 0, 0)` for a TP process.
fn tp_components(chi: &Matrix4<C64>) -> [f64; 4] {
    let e = pauli_basis();
    let mut t = Matrix2::zeros();
    for m in 0..4 {
        for n in 0..4 {
            t += e[n].adjoint() * e[m] * chi[(m, n)];
        }
    }
    std::array::from_fn(|k| (e[k] * t).trace().re * 0.5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QptReconstruction {
    pub chi: ChiMatrix,
    /// Euclidean norm of the unexplained part of the data (and TP equations).
    pub residual: f64,
    pub null_space_dim: usize,
    /// Set when the system did not determine χ uniquely.
    pub rank_deficient: bool,
    pub min_eigenvalue: f64,
}

/// Linear inversion of `data` assuming the preparation/readout `model`.
///
/// With `trace_preserving` the four TP equations are appended to the twelve
/// data equations; otherwise the minimum-norm solution is returned.
pub fn qpt_reconstruct(
    data: &QptData,
    model: &PrepReadoutModel,
    trace_preserving: bool,
) -> Result<QptReconstruction> {
    let basis = hermitian_basis();
    let rows = if trace_preserving {
        N_SETTINGS + 4
    } else {
        N_SETTINGS
    };
    let mut a = DMatrix::<f64>::zeros(rows, basis.len());
    for (k, b) in basis.iter().enumerate() {
        for (r, v) in predict_raw(b, model).iter().enumerate() {
            a[(r, k)] = *v;
        }
        if trace_preserving {
            for (r, v) in tp_components(b).iter().enumerate() {
                a[(N_SETTINGS + r, k)] = *v;
            }
        }
    }
    let mut rhs = DVector::<f64>::zeros(rows);
    for (r, v) in data.values.iter().enumerate() {
        rhs[r] = *v;
    }
    if trace_preserving {
        rhs[N_SETTINGS] = 1.0;
    }

    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = RANK_TOL * smax.max(1.0);
    let rank = svd.singular_values.iter().filter(|s| **s > cutoff).count();
    let x = svd.solve(&rhs, cutoff).map_err(|_| Error::Singular)?;
    let residual = (&a * &x - &rhs).norm();

    let mut m = Matrix4::zeros();
    for (coef, b) in x.iter().zip(&basis) {
        m += b * C64::from(*coef);
    }
    let chi = ChiMatrix::new(m)?;
    let null_space_dim = basis.len() - rank;
    Ok(QptReconstruction {
        min_eigenvalue: chi.min_eigenvalue(),
        chi,
        residual,
        null_space_dim,
        rank_deficient: null_space_dim > 0,
    })
}

/// `Re Tr(a·b)`.
pub fn process_fidelity(a: &ChiMatrix, b: &ChiMatrix) -> f64 {
    (a.0 * b.0).trace().re
}

/// Frobenius norm of `a − b`.
pub fn hs_distance(a: &ChiMatrix, b: &ChiMatrix) -> f64 {
    (a.0 - b.0).norm()
}
