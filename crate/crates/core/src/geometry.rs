//! Minimal SO(3) / SE(3) kernel.
//!
//! Rotations are stored as 3×3 matrices. Exponential and logarithm switch to
//! series expansions below [`SMALL_ANGLE`].

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3, SVD};

use crate::error::GeometryError;

/// Angle below which exp/log use their Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-8;

/// Tolerance on ‖mᵀm − I‖_F and |det m − 1| accepted by [`Rotation::from_matrix`].
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Singular values at or below this are treated as zero by [`project_to_so3`].
pub const RANK_TOLERANCE: f64 = 1e-12;

pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// An element of SO(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Validates orthonormality and orientation within [`ROTATION_TOLERANCE`].
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        Self::from_matrix_with_tolerance(m, ROTATION_TOLERANCE)
    }

    pub fn from_matrix_with_tolerance(m: Matrix3<f64>, tol: f64) -> Result<Self, GeometryError> {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(GeometryError::NotARotation("non-finite entry".into()));
        }
        let ortho = (m.transpose() * m - Matrix3::identity()).norm();
        if ortho > tol {
            return Err(GeometryError::NotARotation(format!(
                "‖mᵀm − I‖ = {ortho:e}"
            )));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > tol {
            return Err(GeometryError::NotARotation(format!("det = {det}")));
        }
        Ok(Rotation(m))
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    /// Row-major entries.
    pub fn from_row_major(rows: &[f64; 9]) -> Result<Self, GeometryError> {
        Self::from_matrix(Matrix3::from_row_slice(rows))
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Rodrigues formula.
    pub fn exp(axis_angle: &Vector3<f64>) -> Self {
        let theta = axis_angle.norm();
        let k = hat(axis_angle);
        let m = if theta < SMALL_ANGLE {
            Matrix3::identity() + k + 0.5 * k * k
        } else {
            let (s, c) = theta.sin_cos();
            Matrix3::identity() + (s / theta) * k + ((1.0 - c) / (theta * theta)) * k * k
        };
        Rotation(m)
    }

    /// Axis-angle vector with norm in [0, π].
    pub fn log(&self) -> Vector3<f64> {
        let m = &self.0;
        let w = vee(&(m - m.transpose()));
        let sin_theta = 0.5 * w.norm();
        let cos_theta = (0.5 * (m.trace() - 1.0)).clamp(-1.0, 1.0);
        let theta = sin_theta.atan2(cos_theta);

        if theta < SMALL_ANGLE {
            return 0.5 * w;
        }
        if PI - theta > 1e-3 {
            return (theta / (2.0 * sin_theta)) * w;
        }

        // Near a half turn the skew part vanishes; read the axis off the
        // symmetric part (R + Rᵀ)/2 = cosθ I + (1 − cosθ) u uᵀ.
        let sym = 0.5 * (m + m.transpose());
        let uu = (sym - Matrix3::identity() * cos_theta) / (1.0 - cos_theta);
        let col = (0..3)
            .max_by(|&a, &b| uu[(a, a)].total_cmp(&uu[(b, b)]))
            .unwrap_or(0);
        let mut axis = uu.column(col).into_owned();
        let n = axis.norm();
        if n > 0.0 {
            axis /= n;
        }
        if axis.dot(&w) < 0.0 {
            axis = -axis;
        }
        theta * axis
    }

    /// Rotation angle in [0, π].
    pub fn angle(&self) -> f64 {
        let m = &self.0;
        let sin_theta = 0.5 * vee(&(m - m.transpose())).norm();
        let cos_theta = (0.5 * (m.trace() - 1.0)).clamp(-1.0, 1.0);
        sin_theta.atan2(cos_theta)
    }

    pub fn inverse(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<&Rotation> for &Rotation {
    type Output = Rotation;
    fn mul(self, rhs: &Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

pub fn exp_so3(axis_angle: &Vector3<f64>) -> Rotation {
    Rotation::exp(axis_angle)
}

pub fn log_so3(r: &Rotation) -> Vector3<f64> {
    r.log()
}

/// Angle of r1ᵀr2, i.e. arccos((tr(r1ᵀr2) − 1)/2) in [0, π].
///
/// Evaluated through atan2 of the skew and trace parts, which agrees with the
/// clamped arccos form but keeps full precision near 0 and π.
pub fn geodesic_distance(r1: &Rotation, r2: &Rotation) -> f64 {
    Rotation(r1.0.transpose() * r2.0).angle()
}

/// Rotation closest to `m` in Frobenius norm.
pub fn project_to_so3(m: &Matrix3<f64>) -> Result<Rotation, GeometryError> {
    let svd = SVD::new(*m, true, true);
    let sigma_min = svd.singular_values[2];
    if !(sigma_min > RANK_TOLERANCE) {
        return Err(GeometryError::RankDeficient { sigma_min });
    }
    Ok(Rotation(orthogonal_factor(&svd)))
}

/// U·diag(1, 1, det(U)det(V))·Vᵀ from an SVD with descending singular values.
pub(crate) fn orthogonal_factor(svd: &SVD<f64, nalgebra::U3, nalgebra::U3>) -> Matrix3<f64> {
    let u = svd.u.expect("SVD computed with U");
    let v_t = svd.v_t.expect("SVD computed with Vᵀ");
    let d = (u.determinant() * v_t.determinant()).signum();
    u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * v_t
}

/// Unit-norm 3-vector, used for surface normals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVector3(Vector3<f64>);

impl UnitVector3 {
    pub const TOLERANCE: f64 = 1e-9;

    pub fn new(v: Vector3<f64>) -> Result<Self, GeometryError> {
        let n = v.norm();
        if !n.is_finite() || (n - 1.0).abs() > Self::TOLERANCE {
            return Err(GeometryError::NotUnit(n));
        }
        Ok(UnitVector3(v))
    }

    pub fn new_normalize(v: Vector3<f64>) -> Result<Self, GeometryError> {
        let n = v.norm();
        if !n.is_finite() || n < 1e-12 {
            return Err(GeometryError::NotUnit(n));
        }
        Ok(UnitVector3(v / n))
    }

    pub fn as_vector(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn dot(&self, other: &UnitVector3) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn rotated(&self, r: &Rotation) -> UnitVector3 {
        UnitVector3(r.rotate(&self.0))
    }
}

/// Rigid body transformation x ↦ R x + t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: Rotation, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Rotation::identity(), Vector3::zeros())
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate(p) + self.translation
    }

    pub fn inverse(&self) -> Self {
        let r_inv = self.rotation.inverse();
        Self::new(r_inv, -r_inv.rotate(&self.translation))
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self::new(
            self.rotation * other.rotation,
            self.rotation.rotate(&other.translation) + self.translation,
        )
    }
}
