//! Rigid transforms, pinhole projection, Euler-angle deltas and the
//! sign-invariant normal-matrix orientation encoding.
//!
//! Units: millimeters for lengths, radians for angles, pixels for image
//! coordinates.

use nalgebra::{Matrix3, Matrix4, Rotation3, Vector2, Vector3};
use serde::de::{DeserializeOwned, Error as _};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("point has non-positive depth (z = {0})")]
    NonPositiveDepth(f64),
    #[error("rotation is not orthonormal (|R^T R - I|_F = {0:e})")]
    NotOrthonormal(f64),
    #[error("rotation determinant is {0}, expected 1")]
    ImproperRotation(f64),
    #[error("euler angle about axis {axis} is {angle} rad, outside (-pi/2, pi/2)")]
    EulerOutOfRange { axis: usize, angle: f64 },
    #[error("vector norm {0} is not 1")]
    NotUnitVector(f64),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Rotation plus translation, mapping points from a source frame into a
/// target frame: `p_target = R p_source + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform<T: Real> {
    rotation: Matrix3<T>,
    translation: Vector3<T>,
}

impl<T: Real> RigidTransform<T> {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Validates orthonormality and handedness of `rotation`.
    pub fn new(rotation: Matrix3<T>, translation: Vector3<T>) -> Result<Self, GeometryError> {
        if rotation.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("rigid transform"));
        }
        let tol = T::structural_tolerance();
        let ortho = orthonormality_residual(&rotation);
        if ortho >= tol {
            return Err(GeometryError::NotOrthonormal(ortho.as_f64()));
        }
        let det = rotation.determinant();
        if (det - T::one()).abs() >= tol {
            return Err(GeometryError::ImproperRotation(det.as_f64()));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Builds a transform from a rotation produced by this crate's own
    /// constructions (exponential map, Euler composition, SVD projection).
    pub(crate) fn from_parts_unchecked(rotation: Matrix3<T>, translation: Vector3<T>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<T>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation from an axis-angle vector followed by a translation.
    pub fn from_scaled_axis(axis_angle: Vector3<T>, translation: Vector3<T>) -> Self {
        Self {
            rotation: exp_rotation(&axis_angle),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<T> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<T> {
        &self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rotation * p + self.translation
    }

    pub fn to_homogeneous(&self) -> Matrix4<T> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Left-multiplicative update used by the refinement: the rotation is
    /// pre-multiplied by `exp(rotation_step)`, the translation shifted by
    /// `translation_step`.
    pub fn perturbed(&self, translation_step: &Vector3<T>, rotation_step: &Vector3<T>) -> Self {
        Self {
            rotation: exp_rotation(rotation_step) * self.rotation,
            translation: self.translation + translation_step,
        }
    }

    /// Geodesic angle of `self.rotation^T other.rotation`.
    pub fn rotation_angle_to(&self, other: &Self) -> T {
        rotation_angle(&(self.rotation.transpose() * other.rotation))
    }

    /// Converts the scalar type.
    pub fn cast<U: Real>(&self) -> RigidTransform<U> {
        RigidTransform {
            rotation: self.rotation.map(|v| U::lit(v.as_f64())),
            translation: self.translation.map(|v| U::lit(v.as_f64())),
        }
    }
}

impl<T: Real> Default for RigidTransform<T> {
    fn default() -> Self {
        Self::identity()
    }
}

/// `|R^T R - I|_F`.
pub fn orthonormality_residual<T: Real>(r: &Matrix3<T>) -> T {
    (r.transpose() * r - Matrix3::identity()).norm()
}

/// Rodrigues' formula.
pub fn exp_rotation<T: Real>(w: &Vector3<T>) -> Matrix3<T> {
    Rotation3::new(*w).into_inner()
}

/// Angle of a rotation matrix in `[0, pi]`.
pub fn rotation_angle<T: Real>(r: &Matrix3<T>) -> T {
    let c = (r.trace() - T::one()) / T::lit(2.0);
    let c = c.clamp(-T::one(), T::one());
    // acos loses precision near zero; recover from the skew part instead.
    let s = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    )
    .norm()
        / T::lit(2.0);
    s.atan2(c)
}

/// Closest rotation matrix in Frobenius norm (polar decomposition via SVD).
pub fn nearest_rotation<T: Real>(m: &Matrix3<T>) -> Matrix3<T> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < T::zero() {
        d[(2, 2)] = -T::one();
    }
    u * d * v_t
}

/// Chordal mean of a set of poses: arithmetic mean of the translations and
/// the projection of the summed rotation matrices back onto SO(3).
pub fn mean_pose<T: Real>(poses: &[RigidTransform<T>]) -> Option<RigidTransform<T>> {
    if poses.is_empty() {
        return None;
    }
    let n = T::from_usize(poses.len()).expect("pose count");
    let mut rot_sum = Matrix3::zeros();
    let mut t_sum = Vector3::zeros();
    for p in poses {
        rot_sum += p.rotation;
        t_sum += p.translation;
    }
    Some(RigidTransform::from_parts_unchecked(
        nearest_rotation(&rot_sum),
        t_sum / n,
    ))
}

/// `Rx(a) Ry(b) Rz(c)`: intrinsic rotations about X, then the new Y, then
/// the new Z.
pub fn rotation_from_euler_xyz<T: Real>(angles: &Vector3<T>) -> Matrix3<T> {
    let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), angles[0]);
    let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), angles[1]);
    let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), angles[2]);
    (rx * ry * rz).into_inner()
}

/// Inverse of [`rotation_from_euler_xyz`], restricted to `|angle| < pi/2`
/// on every axis.
pub fn euler_xyz_from_rotation<T: Real>(r: &Matrix3<T>) -> Result<Vector3<T>, GeometryError> {
    let sb = r[(0, 2)].clamp(-T::one(), T::one());
    let b = sb.asin();
    let a = (-r[(1, 2)]).atan2(r[(2, 2)]);
    let c = (-r[(0, 1)]).atan2(r[(0, 0)]);
    let angles = Vector3::new(a, b, c);
    for (axis, angle) in angles.iter().enumerate() {
        if angle.abs() >= T::frac_pi_2() {
            return Err(GeometryError::EulerOutOfRange {
                axis,
                angle: angle.as_f64(),
            });
        }
    }
    Ok(angles)
}

/// Identifier carried next to every serialized deformation vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum EulerConvention {
    #[default]
    #[serde(rename = "XYZ-intrinsic")]
    XyzIntrinsic,
}

/// Six-dimensional pose change of the plate relative to its no-contact
/// reference: translation deltas (mm) in the reference frame followed by
/// intrinsic X-Y-Z Euler angles (rad) of the relative rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformationVector<T: Real> {
    pub dl_x: T,
    pub dl_y: T,
    pub dl_z: T,
    pub dtheta_x: T,
    pub dtheta_y: T,
    pub dtheta_z: T,
}

impl<T: Real> DeformationVector<T> {
    pub fn zeros() -> Self {
        Self::from_array_unchecked([T::zero(); 6])
    }

    /// Validated constructor: components finite, every angle within
    /// `(-pi/2, pi/2)`.
    pub fn from_array(v: [T; 6]) -> Result<Self, GeometryError> {
        let d = Self::from_array_unchecked(v);
        d.validate()?;
        Ok(d)
    }

    pub(crate) fn from_array_unchecked(v: [T; 6]) -> Self {
        Self {
            dl_x: v[0],
            dl_y: v[1],
            dl_z: v[2],
            dtheta_x: v[3],
            dtheta_y: v[4],
            dtheta_z: v[5],
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.to_array().iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("deformation vector"));
        }
        for (axis, angle) in self.angles().iter().enumerate() {
            if angle.abs() >= T::frac_pi_2() {
                return Err(GeometryError::EulerOutOfRange {
                    axis,
                    angle: angle.as_f64(),
                });
            }
        }
        Ok(())
    }

    pub fn to_array(&self) -> [T; 6] {
        [
            self.dl_x,
            self.dl_y,
            self.dl_z,
            self.dtheta_x,
            self.dtheta_y,
            self.dtheta_z,
        ]
    }

    pub fn translation(&self) -> Vector3<T> {
        Vector3::new(self.dl_x, self.dl_y, self.dl_z)
    }

    pub fn angles(&self) -> Vector3<T> {
        Vector3::new(self.dtheta_x, self.dtheta_y, self.dtheta_z)
    }

    pub fn component(&self, i: usize) -> T {
        self.to_array()[i]
    }
}

impl<T: Real + Serialize> Serialize for DeformationVector<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de, T: Real + DeserializeOwned> Deserialize<'de> for DeformationVector<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = <[T; 6]>::deserialize(d)?;
        Self::from_array(v).map_err(D::Error::custom)
    }
}

/// A deformation vector together with its Euler convention tag, the form
/// written to files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + DeserializeOwned"))]
pub struct TaggedDeformation<T: Real> {
    pub delta: DeformationVector<T>,
    pub euler_convention: EulerConvention,
}

impl<T: Real> From<DeformationVector<T>> for TaggedDeformation<T> {
    fn from(delta: DeformationVector<T>) -> Self {
        Self {
            delta,
            euler_convention: EulerConvention::XyzIntrinsic,
        }
    }
}

/// Pose change of `current` relative to `reference`.
pub fn delta_from_poses<T: Real>(
    reference: &RigidTransform<T>,
    current: &RigidTransform<T>,
) -> Result<DeformationVector<T>, GeometryError> {
    let r_ref_t = reference.rotation.transpose();
    let dt = r_ref_t * (current.translation - reference.translation);
    let angles = euler_xyz_from_rotation(&(r_ref_t * current.rotation))?;
    Ok(DeformationVector::from_array_unchecked([
        dt.x, dt.y, dt.z, angles.x, angles.y, angles.z,
    ]))
}

/// Inverse of [`delta_from_poses`]: `reference ∘ delta`.
pub fn apply_delta<T: Real>(
    reference: &RigidTransform<T>,
    delta: &DeformationVector<T>,
) -> RigidTransform<T> {
    let local = RigidTransform::from_parts_unchecked(
        rotation_from_euler_xyz(&delta.angles()),
        delta.translation(),
    );
    reference.compose(&local)
}

/// Ideal pinhole camera without distortion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinholeCamera<T: Real> {
    fx: T,
    fy: T,
    cx: T,
    cy: T,
    image_width: T,
    image_height: T,
}

impl<T: Real> PinholeCamera<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T, image_width: T, image_height: T) -> Result<Self, GeometryError> {
        let all = [fx, fy, cx, cy, image_width, image_height];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("camera intrinsics"));
        }
        if fx <= T::zero() || fy <= T::zero() {
            return Err(GeometryError::InvalidCamera(
                "focal lengths must be positive".into(),
            ));
        }
        if cx < T::zero() || cx > image_width || cy < T::zero() || cy > image_height {
            return Err(GeometryError::InvalidCamera(
                "principal point outside the image".into(),
            ));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            image_width,
            image_height,
        })
    }

    /// Square-pixel camera with the principal point at the image center and
    /// the given horizontal field of view.
    pub fn from_horizontal_fov(fov_rad: T, image_width: T, image_height: T) -> Result<Self, GeometryError> {
        let half = image_width / T::lit(2.0);
        let f = half / (fov_rad / T::lit(2.0)).tan();
        Self::new(f, f, half, image_height / T::lit(2.0), image_width, image_height)
    }

    pub fn fx(&self) -> T {
        self.fx
    }
    pub fn fy(&self) -> T {
        self.fy
    }
    pub fn cx(&self) -> T {
        self.cx
    }
    pub fn cy(&self) -> T {
        self.cy
    }
    pub fn image_width(&self) -> T {
        self.image_width
    }
    pub fn image_height(&self) -> T {
        self.image_height
    }

    pub fn project(&self, p: &Vector3<T>) -> Result<Vector2<T>, GeometryError> {
        if p.z <= T::zero() {
            return Err(GeometryError::NonPositiveDepth(p.z.as_f64()));
        }
        Ok(Vector2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }

    pub fn contains(&self, uv: &Vector2<T>) -> bool {
        uv.x >= T::zero() && uv.x <= self.image_width && uv.y >= T::zero() && uv.y <= self.image_height
    }
}

impl<T: Real> Default for PinholeCamera<T> {
    /// 120° horizontal field of view on a 256 × 256 sensor (fx = fy ≈ 73.9 px).
    fn default() -> Self {
        Self::from_horizontal_fov(T::lit(120f64.to_radians()), T::lit(256.0), T::lit(256.0))
            .expect("default camera is valid")
    }
}

#[derive(Serialize, Deserialize)]
struct CameraFile<T> {
    fx: T,
    fy: T,
    cx: T,
    cy: T,
    image_width: T,
    image_height: T,
}

impl<T: Real + Serialize> Serialize for PinholeCamera<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        CameraFile {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            image_width: self.image_width,
            image_height: self.image_height,
        }
        .serialize(s)
    }
}

impl<'de, T: Real + DeserializeOwned> Deserialize<'de> for PinholeCamera<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let c = CameraFile::<T>::deserialize(d)?;
        Self::new(c.fx, c.fy, c.cx, c.cy, c.image_width, c.image_height).map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct TransformFile<T> {
    rotation: [[T; 3]; 3],
    translation: [T; 3],
}

impl<T: Real + Serialize> Serialize for RigidTransform<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let r = &self.rotation;
        TransformFile {
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            translation: [self.translation.x, self.translation.y, self.translation.z],
        }
        .serialize(s)
    }
}

impl<'de, T: Real + DeserializeOwned> Deserialize<'de> for RigidTransform<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let f = TransformFile::<T>::deserialize(d)?;
        let rows = f.rotation;
        let rotation = Matrix3::new(
            rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2], rows[2][0],
            rows[2][1], rows[2][2],
        );
        let t = f.translation;
        Self::new(rotation, Vector3::new(t[0], t[1], t[2])).map_err(D::Error::custom)
    }
}

/// Upper-triangular entries `(m00, m01, m02, m11, m12, m22)` of `M = n nᵀ`.
///
/// Encodes the orientation of an axis without its sign: `n` and `-n` give
/// bit-identical entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalMatrix6<T: Real> {
    pub m00: T,
    pub m01: T,
    pub m02: T,
    pub m11: T,
    pub m12: T,
    pub m22: T,
}

impl<T: Real> NormalMatrix6<T> {
    pub fn from_unit_vector(n: &Vector3<T>) -> Result<Self, GeometryError> {
        let norm = n.norm();
        if !norm.is_finite() || (norm - T::one()).abs() > T::unit_tolerance() {
            return Err(GeometryError::NotUnitVector(norm.as_f64()));
        }
        // `+ 0` folds a signed zero from e.g. (-1)·(+0) into +0.
        let z = T::zero();
        Ok(Self {
            m00: n.x * n.x + z,
            m01: n.x * n.y + z,
            m02: n.x * n.z + z,
            m11: n.y * n.y + z,
            m12: n.y * n.z + z,
            m22: n.z * n.z + z,
        })
    }

    pub fn to_array(&self) -> [T; 6] {
        [self.m00, self.m01, self.m02, self.m11, self.m12, self.m22]
    }

    pub fn trace(&self) -> T {
        self.m00 + self.m11 + self.m22
    }

    /// Full symmetric matrix.
    pub fn to_matrix(&self) -> Matrix3<T> {
        Matrix3::new(
            self.m00, self.m01, self.m02, self.m01, self.m11, self.m12, self.m02, self.m12, self.m22,
        )
    }
}

/// `‖p̂ − p‖₁ + ‖M̂ − M‖₁` over position and the six normal-matrix entries.
pub fn l1_object_loss<T: Real>(
    pred_pos: &Vector3<T>,
    true_pos: &Vector3<T>,
    pred_m6: &NormalMatrix6<T>,
    true_m6: &NormalMatrix6<T>,
) -> T {
    let pos: T = pred_pos
        .iter()
        .zip(true_pos.iter())
        .fold(T::zero(), |acc, (a, b)| acc + (*a - *b).abs());
    let orient = pred_m6
        .to_array()
        .iter()
        .zip(true_m6.to_array().iter())
        .fold(T::zero(), |acc, (a, b)| acc + (*a - *b).abs());
    pos + orient
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cam() -> PinholeCamera<f64> {
        PinholeCamera::new(300.0, 300.0, 128.0, 96.0, 256.0, 192.0).unwrap()
    }

    #[test]
    fn project_principal_point_and_offset() {
        let c = cam();
        assert_eq!(c.project(&Vector3::new(0.0, 0.0, 10.0)).unwrap(), Vector2::new(128.0, 96.0));
        assert_eq!(c.project(&Vector3::new(1.0, 0.0, 10.0)).unwrap(), Vector2::new(158.0, 96.0));
    }

    #[test]
    fn project_rejects_points_behind() {
        let c = cam();
        assert!(matches!(
            c.project(&Vector3::new(0.0, 0.0, 0.0)),
            Err(GeometryError::NonPositiveDepth(_))
        ));
        assert!(c.project(&Vector3::new(1.0, 1.0, -2.0)).is_err());
    }

    #[test]
    fn default_camera_focal_length() {
        let c = PinholeCamera::<f64>::default();
        assert_relative_eq!(c.fx(), 128.0 / 60f64.to_radians().tan(), epsilon = 1e-12);
        assert!((c.fx() - 73.9).abs() < 0.01);
    }

    #[test]
    fn camera_validation() {
        assert!(PinholeCamera::new(0.0, 1.0, 1.0, 1.0, 2.0, 2.0).is_err());
        assert!(PinholeCamera::new(1.0, 1.0, 3.0, 1.0, 2.0, 2.0).is_err());
    }

    #[test]
    fn compose_identity_and_inverse() {
        let t = RigidTransform::from_scaled_axis(Vector3::new(0.1, -0.2, 0.3), Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(RigidTransform::identity().compose(&t), t);
        let e = t.compose(&t.inverse());
        assert!((e.rotation() - Matrix3::identity()).norm() < 1e-9);
        assert!(e.translation().norm() < 1e-9);
    }

    #[test]
    fn rejects_non_orthonormal_rotation() {
        let m = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(
            RigidTransform::new(m, Vector3::zeros()),
            Err(GeometryError::NotOrthonormal(_))
        ));
        let reflect = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(matches!(
            RigidTransform::new(reflect, Vector3::zeros()),
            Err(GeometryError::ImproperRotation(_))
        ));
    }

    #[test]
    fn delta_of_identical_poses_is_zero() {
        let r = RigidTransform::<f64>::from_scaled_axis(Vector3::new(0.05, 0.02, -0.4), Vector3::new(0.3, 0.1, 10.0));
        let d = delta_from_poses(&r, &r).unwrap();
        for v in d.to_array() {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn delta_of_translation_along_reference_z() {
        let r = RigidTransform::<f64>::from_scaled_axis(Vector3::new(0.3, -0.1, 0.2), Vector3::new(0.0, 0.0, 10.0));
        let shift = RigidTransform::from_translation(Vector3::new(0.0, 0.0, -0.1));
        let d = delta_from_poses(&r, &r.compose(&shift)).unwrap();
        let expected = [0.0, 0.0, -0.1, 0.0, 0.0, 0.0];
        for (a, b) in d.to_array().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn euler_guard_rejects_large_rotation() {
        let r = RigidTransform::<f64>::identity();
        let c = RigidTransform::from_scaled_axis(Vector3::new(2.0, 0.0, 0.0), Vector3::zeros());
        assert!(matches!(
            delta_from_poses(&r, &c),
            Err(GeometryError::EulerOutOfRange { axis: 0, .. })
        ));
        assert!(DeformationVector::from_array([0.0, 0.0, 0.0, 0.0, 1.6, 0.0]).is_err());
        assert!(DeformationVector::from_array([f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn apply_zero_delta_is_identity() {
        let r = RigidTransform::from_scaled_axis(Vector3::new(0.1, 0.2, 0.3), Vector3::new(1.0, 2.0, 10.0));
        let out = apply_delta(&r, &DeformationVector::zeros());
        assert!((out.rotation() - r.rotation()).norm() < 1e-15);
        assert_eq!(out.translation(), r.translation());
    }

    #[test]
    fn euler_composition_order() {
        // Intrinsic X-Y-Z equals the product Rx Ry Rz.
        let a = Vector3::new(0.3, -0.2, 0.1);
        let r = rotation_from_euler_xyz(&a);
        let back = euler_xyz_from_rotation(&r).unwrap();
        assert_relative_eq!(back, a, epsilon = 1e-14);
        let rx = exp_rotation(&Vector3::new(0.3, 0.0, 0.0));
        let ry = exp_rotation(&Vector3::new(0.0, -0.2, 0.0));
        let rz = exp_rotation(&Vector3::new(0.0, 0.0, 0.1));
        assert_relative_eq!(r, rx * ry * rz, epsilon = 1e-14);
    }

    #[test]
    fn normal_matrix_examples() {
        let z = NormalMatrix6::from_unit_vector(&Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(z.to_array(), [0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let px = NormalMatrix6::from_unit_vector(&Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let nx = NormalMatrix6::from_unit_vector(&Vector3::new(-1.0, 0.0, 0.0)).unwrap();
        assert_eq!(px.to_array(), [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(px.to_array().map(f64::to_bits), nx.to_array().map(f64::to_bits));
        let n = Vector3::new(0.48, -0.6, 0.64);
        let a = NormalMatrix6::from_unit_vector(&n).unwrap();
        let b = NormalMatrix6::from_unit_vector(&-n).unwrap();
        assert_eq!(a.to_array().map(f64::to_bits), b.to_array().map(f64::to_bits));
        let s = 0.5f64.sqrt();
        let d = NormalMatrix6::from_unit_vector(&Vector3::new(s, s, 0.0)).unwrap();
        for (a, b) in d.to_array().iter().zip([0.5, 0.5, 0.0, 0.5, 0.0, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(matches!(
            NormalMatrix6::from_unit_vector(&Vector3::new(1.0, 1.0, 0.0)),
            Err(GeometryError::NotUnitVector(_))
        ));
    }

    #[test]
    fn l1_loss_examples() {
        let p = Vector3::new(1.0, 2.0, 3.0);
        let m = NormalMatrix6::from_unit_vector(&Vector3::new(0.0, 0.6, 0.8)).unwrap();
        assert_eq!(l1_object_loss(&p, &p, &m, &m), 0.0);
        let q = p + Vector3::new(1.0, 0.0, 0.0);
        assert_eq!(l1_object_loss(&q, &p, &m, &m), 1.0);
    }

    #[test]
    fn serde_layouts() {
        let t = RigidTransform::from_translation(Vector3::new(1.0, 2.0, 3.0));
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(
            s,
            r#"{"rotation":[[1.0,0.0,0.0],[0.0,1.0,0.0],[0.0,0.0,1.0]],"translation":[1.0,2.0,3.0]}"#
        );
        let back: RigidTransform<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        let bad = r#"{"rotation":[[2.0,0.0,0.0],[0.0,1.0,0.0],[0.0,0.0,1.0]],"translation":[0,0,0]}"#;
        assert!(serde_json::from_str::<RigidTransform<f64>>(bad).is_err());

        let d = TaggedDeformation::from(DeformationVector::from_array([0.1, 0.0, -0.2, 0.01, 0.0, 0.0]).unwrap());
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, r#"{"delta":[0.1,0.0,-0.2,0.01,0.0,0.0],"euler_convention":"XYZ-intrinsic"}"#);
    }

    #[test]
    fn works_in_single_precision() {
        let c = PinholeCamera::<f32>::default();
        let uv = c.project(&Vector3::new(0.0, 0.0, 10.0)).unwrap();
        assert_eq!(uv, Vector2::new(128.0f32, 128.0));
        let r = RigidTransform::<f32>::from_scaled_axis(Vector3::new(0.01, 0.02, 0.03), Vector3::new(0.0, 0.0, 10.0));
        let d = DeformationVector::from_array([0.01f32, -0.02, 0.03, 0.01, 0.02, -0.03]).unwrap();
        let back = delta_from_poses(&r, &apply_delta(&r, &d)).unwrap();
        for (a, b) in back.to_array().iter().zip(d.to_array()) {
            assert!((a - b).abs() < 1e-5);
        }
    }
}
