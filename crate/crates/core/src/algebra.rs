//! Exact 2×2 complex algebra for a single qubit.
//!
//! Rotations follow `U = exp(-iθ(n·σ)/2)`, which acts on the Bloch sphere as a
//! right-handed rotation by `θ` about `n`. Sequences of pulses are composed
//! with the first-applied pulse rightmost.

use nalgebra::{Complex, Matrix2, Matrix3, Vector3};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type Complex2x2 = Matrix2<C64>;

/// Tolerance used when validating unit vectors and unitarity.
pub const UNITARY_TOL: f64 = 1e-12;

/// Below this distance from ±I the rotation axis is treated as undefined.
pub const IDENTITY_TOL: f64 = 1e-9;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I_UNIT: C64 = C64::new(0.0, 1.0);

pub fn identity() -> Complex2x2 {
    Complex2x2::identity()
}

pub fn sigma_x() -> Complex2x2 {
    Complex2x2::new(ZERO, ONE, ONE, ZERO)
}

pub fn sigma_y() -> Complex2x2 {
    Complex2x2::new(ZERO, -I_UNIT, I_UNIT, ZERO)
}

pub fn sigma_z() -> Complex2x2 {
    Complex2x2::new(ONE, ZERO, ZERO, -ONE)
}

/// The Pauli operator basis `[I, σx, σy, σz]`.
pub fn pauli_basis() -> [Complex2x2; 4] {
    [identity(), sigma_x(), sigma_y(), sigma_z()]
}

/// `n·σ` for a real 3-vector.
pub fn dot_sigma(n: &Vector3<f64>) -> Complex2x2 {
    sigma_x() * C64::from(n.x) + sigma_y() * C64::from(n.y) + sigma_z() * C64::from(n.z)
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &Complex2x2, b: &Complex2x2) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Spectral norm of a 2×2 complex matrix.
pub fn operator_norm(m: &Complex2x2) -> f64 {
    let gram = m.adjoint() * m;
    // Gram matrix is Hermitian PSD; its largest eigenvalue is the squared norm.
    let a = gram[(0, 0)].re;
    let d = gram[(1, 1)].re;
    let b = gram[(0, 1)].norm();
    let half_trace = 0.5 * (a + d);
    let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    (half_trace + disc).max(0.0).sqrt()
}

/// A 2×2 unitary matrix. Global phase is physically irrelevant and not fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary2(Complex2x2);

impl Unitary2 {
    /// Wraps `m` after checking `U†U = I` and `|det U| = 1` to [`UNITARY_TOL`].
    pub fn new(m: Complex2x2) -> Result<Self> {
        let dev = unitarity_defect(&m);
        if dev > UNITARY_TOL || !dev.is_finite() {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Self(m))
    }

    /// Wraps `m` checking unitarity against a caller-chosen tolerance.
    pub fn with_tolerance(m: Complex2x2, tol: f64) -> Result<Self> {
        let dev = unitarity_defect(&m);
        if dev > tol || !dev.is_finite() {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Complex2x2::identity())
    }

    pub fn matrix(&self) -> &Complex2x2 {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// `self · other`, i.e. `other` is applied first.
    pub fn then_after(&self, other: &Unitary2) -> Self {
        Self(self.0 * other.0)
    }

    pub fn scaled_by_phase(&self, alpha: f64) -> Self {
        Self(self.0 * C64::from_polar(1.0, alpha))
    }

    /// Conjugates by a rotation about z: `Rz(α) U Rz(-α)`.
    pub fn rotated_about_z(&self, alpha: f64) -> Self {
        let rz = rotation_unitary(&AxisAngle::z(alpha));
        Self(rz.0 * self.0 * rz.0.adjoint())
    }

    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.0)
    }
}

fn unitarity_defect(m: &Complex2x2) -> f64 {
    let gram_dev = max_abs_diff(&(m.adjoint() * m), &Complex2x2::identity());
    let det_dev = (m.determinant().norm() - 1.0).abs();
    gram_dev.max(det_dev)
}

/// Rotation axis and angle. The axis is a unit vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisAngle {
    axis: Vector3<f64>,
    angle: f64,
}

impl AxisAngle {
    pub fn new(axis: Vector3<f64>, angle: f64) -> Result<Self> {
        let norm = axis.norm();
        if (norm - 1.0).abs() > UNITARY_TOL || !angle.is_finite() {
            return Err(Error::NonUnitAxis(norm));
        }
        Ok(Self { axis, angle })
    }

    /// Normalizes `axis` before constructing.
    pub fn from_direction(axis: Vector3<f64>, angle: f64) -> Result<Self> {
        let norm = axis.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NonUnitAxis(norm));
        }
        Self::new(axis / norm, angle)
    }

    pub fn x(angle: f64) -> Self {
        Self {
            axis: Vector3::x(),
            angle,
        }
    }

    pub fn y(angle: f64) -> Self {
        Self {
            axis: Vector3::y(),
            angle,
        }
    }

    pub fn z(angle: f64) -> Self {
        Self {
            axis: Vector3::z(),
            angle,
        }
    }

    pub fn axis(&self) -> Vector3<f64> {
        self.axis
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    /// The SO(3) matrix of this rotation (Rodrigues' formula).
    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        let n = self.axis;
        let k = Matrix3::new(0.0, -n.z, n.y, n.z, 0.0, -n.x, -n.y, n.x, 0.0);
        let (s, c) = self.angle.sin_cos();
        Matrix3::identity() + k * s + k * k * (1.0 - c)
    }
}

/// Result of decomposing a unitary into axis and angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub axis_angle: AxisAngle,
    /// Set when `U` is within [`IDENTITY_TOL`] of `±I`; the axis is then
    /// arbitrary (reported as `z`) and the angle is the small residual.
    pub axis_indeterminate: bool,
}

/// `cos(θ/2)·I − i·sin(θ/2)·(n·σ)`.
pub fn rotation_unitary(aa: &AxisAngle) -> Unitary2 {
    let (s, c) = (0.5 * aa.angle).sin_cos();
    let m = Complex2x2::identity() * C64::from(c) - dot_sigma(&aa.axis) * C64::new(0.0, s);
    Unitary2(m)
}

/// Pauli coefficients of `U`, with the global phase chosen so that the
/// identity coefficient is real and nonnegative. Returns `(cos(θ/2), sin(θ/2)·n)`.
fn phase_fixed_components(u: &Unitary2) -> (f64, Vector3<f64>) {
    let m = u.matrix();
    let a0 = m.trace() * 0.5;
    // U = a0 I + Σ a_k σ_k, with a_k = −i e^{iα} sin(θ/2) n_k, so i·a_k carries the axis.
    let ia = [
        I_UNIT * (sigma_x() * m).trace() * 0.5,
        I_UNIT * (sigma_y() * m).trace() * 0.5,
        I_UNIT * (sigma_z() * m).trace() * 0.5,
    ];
    let phase = if a0.norm() > 1e-8 {
        a0.arg()
    } else {
        let big = ia
            .iter()
            .copied()
            .max_by(|p, q| p.norm().total_cmp(&q.norm()))
            .unwrap_or(ONE);
        big.arg()
    };
    let unphase = C64::from_polar(1.0, -phase);
    let c = (a0 * unphase).re.max(0.0);
    let s = Vector3::new(
        (ia[0] * unphase).re,
        (ia[1] * unphase).re,
        (ia[2] * unphase).re,
    );
    (c, s)
}

/// Canonical axis-angle form of `U` with `θ ∈ [0, π]`.
pub fn axis_angle_of(u: &Unitary2) -> Decomposition {
    let (c, s) = phase_fixed_components(u);
    let sn = s.norm();
    let angle = 2.0 * sn.atan2(c);
    if sn < IDENTITY_TOL {
        return Decomposition {
            axis_angle: AxisAngle::z(angle),
            axis_indeterminate: true,
        };
    }
    Decomposition {
        axis_angle: AxisAngle {
            axis: s / sn,
            angle,
        },
        axis_indeterminate: false,
    }
}

/// A Bloch vector `(⟨σx⟩, ⟨σy⟩, ⟨σz⟩)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector(pub Vector3<f64>);

impl BlochVector {
    pub fn up() -> Self {
        Self(Vector3::z())
    }

    pub fn x(&self) -> f64 {
        self.0.x
    }

    pub fn y(&self) -> f64 {
        self.0.y
    }

    pub fn z(&self) -> f64 {
        self.0.z
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

/// Bloch vector of `U|↑⟩`.
pub fn apply_to_up(u: &Unitary2) -> BlochVector {
    let m = u.matrix();
    let (a, b) = (m[(0, 0)], m[(1, 0)]);
    let cross = a.conj() * b;
    BlochVector(Vector3::new(
        2.0 * cross.re,
        2.0 * cross.im,
        a.norm_sqr() - b.norm_sqr(),
    ))
}

/// Measured signal `⟨σz⟩`.
pub fn sigma_z_expectation(v: &BlochVector) -> f64 {
    v.0.z
}

/// Product of `us` in application order: `us[0]` acts first.
pub fn compose(us: &[Unitary2]) -> Result<Unitary2> {
    let (first, rest) = us.split_first().ok_or(Error::EmptyComposition)?;
    Ok(rest.iter().fold(*first, |acc, u| u.then_after(&acc)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    fn close(a: &Complex2x2, b: &Complex2x2, tol: f64) -> bool {
        max_abs_diff(a, b) <= tol
    }

    #[test]
    fn pi_about_x_is_minus_i_sigma_x() {
        let u = rotation_unitary(&AxisAngle::x(PI));
        assert!(close(u.matrix(), &(sigma_x() * C64::new(0.0, -1.0)), 1e-15));
    }

    #[test]
    fn zero_angle_is_identity() {
        let u = rotation_unitary(&AxisAngle::z(0.0));
        assert!(close(u.matrix(), &identity(), 0.0));
    }

    #[test]
    fn half_pi_about_y_by_hand() {
        let u = rotation_unitary(&AxisAngle::y(FRAC_PI_2));
        let h = FRAC_1_SQRT_2;
        let expected = Complex2x2::new(C64::from(h), C64::from(-h), C64::from(h), C64::from(h));
        assert!(close(u.matrix(), &expected, 1e-15));
    }

    #[test]
    fn non_unit_axis_rejected() {
        assert!(matches!(
            AxisAngle::new(Vector3::new(1.0, 0.1, 0.0), 1.0),
            Err(Error::NonUnitAxis(_))
        ));
    }

    #[test]
    fn decompose_minus_i_sigma_x() {
        let u = Unitary2::new(sigma_x() * C64::new(0.0, -1.0)).unwrap();
        let d = axis_angle_of(&u);
        assert!(!d.axis_indeterminate);
        assert!((d.axis_angle.axis() - Vector3::x()).norm() < 1e-15);
        assert!((d.axis_angle.angle() - PI).abs() < 1e-15);
    }

    #[test]
    fn decompose_round_trip_oblique() {
        let aa = AxisAngle::new(Vector3::new(0.6, 0.8, 0.0), 1.0).unwrap();
        let d = axis_angle_of(&rotation_unitary(&aa));
        assert!((d.axis_angle.axis() - aa.axis()).norm() < 1e-10);
        assert!((d.axis_angle.angle() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn identity_is_axis_indeterminate() {
        let d = axis_angle_of(&Unitary2::identity());
        assert!(d.axis_indeterminate);
        assert_eq!(d.axis_angle.angle(), 0.0);
        let minus = Unitary2::identity().scaled_by_phase(PI);
        let d = axis_angle_of(&minus);
        assert!(d.axis_indeterminate);
        assert!(d.axis_angle.angle().abs() < 1e-12);
    }

    #[test]
    fn angle_beyond_pi_flips_axis() {
        let u = rotation_unitary(&AxisAngle::x(PI + 0.2));
        let d = axis_angle_of(&u);
        assert!((d.axis_angle.angle() - (PI - 0.2)).abs() < 1e-12);
        assert!((d.axis_angle.axis() + Vector3::x()).norm() < 1e-12);
    }

    #[test]
    fn bloch_vectors_of_simple_rotations() {
        assert_eq!(apply_to_up(&Unitary2::identity()).0, Vector3::z());
        let v = apply_to_up(&rotation_unitary(&AxisAngle::x(FRAC_PI_2)));
        assert!((v.0 - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-15);
        let flip = Unitary2::new(sigma_x() * C64::new(0.0, -1.0)).unwrap();
        assert!((apply_to_up(&flip).0 - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn sigma_z_reads_z_component() {
        assert_eq!(sigma_z_expectation(&BlochVector::up()), 1.0);
        assert_eq!(
            sigma_z_expectation(&BlochVector(Vector3::new(0.0, -1.0, 0.0))),
            0.0
        );
        // π_Y with v_z = 0.05 after an ideal π/2_X, first-order Bloch vector
        let v = BlochVector(Vector3::new(0.0, -1.0, -2.0 * 0.05));
        assert!((sigma_z_expectation(&v) + 0.1).abs() < 1e-15);
    }

    #[test]
    fn compose_orders_first_applied_rightmost() {
        let id = Unitary2::identity();
        assert!(close(
            compose(&[id, id]).unwrap().matrix(),
            &identity(),
            0.0
        ));

        let rx = |t| rotation_unitary(&AxisAngle::x(t));
        let u = compose(&[rx(FRAC_PI_2), rx(PI)]).unwrap();
        assert!(close(u.matrix(), rx(1.5 * PI).matrix(), 1e-15));

        let ry = rotation_unitary(&AxisAngle::y(PI));
        let u = compose(&[rx(FRAC_PI_2), ry]).unwrap();
        assert!(sigma_z_expectation(&apply_to_up(&u)).abs() < 1e-15);
        assert!(matches!(compose(&[]), Err(Error::EmptyComposition)));
    }

    #[test]
    fn rejects_non_unitary() {
        let m = identity() * C64::from(1.1);
        assert!(matches!(Unitary2::new(m), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn operator_norm_of_paulis() {
        assert!((operator_norm(&sigma_y()) - 1.0).abs() < 1e-15);
        assert!((operator_norm(&(sigma_x() * C64::from(0.3))) - 0.3).abs() < 1e-15);
    }
}
