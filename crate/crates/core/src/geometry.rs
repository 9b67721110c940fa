//! Core 3D types: point clouds, rigid transforms, Euler angles.
//!
//! Conventions used throughout the crate:
//! - coordinates are meters, `f64`;
//! - Euler angles are degrees, composed extrinsically x → y → z,
//!   i.e. `R = R_z(γ) · R_y(β) · R_x(α)`;
//! - transforms act as `p ↦ R·p + t` and are kept as an (R, t) pair.

use nalgebra::{Matrix3, Point3, Vector3};

use crate::error::{Error, Result};

/// Per-entry tolerance for the SO(3) membership checks.
pub const ROTATION_TOL: f64 = 1e-9;

/// An ordered, immutable set of finite 3D points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
}

impl PointCloud {
    /// Builds a cloud, rejecting NaN/Inf coordinates. Empty clouds are
    /// representable; operations that need points fail with `EmptyCloud`.
    pub fn new(points: Vec<Point3<f64>>) -> Result<Self> {
        for (index, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::NonFinite { index });
            }
        }
        Ok(Self { points })
    }

    pub fn from_coords(coords: impl IntoIterator<Item = [f64; 3]>) -> Result<Self> {
        Self::new(
            coords
                .into_iter()
                .map(|[x, y, z]| Point3::new(x, y, z))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn iter(&self) -> impl Iterator<Item = &Point3<f64>> {
        self.points.iter()
    }

    /// Sub-cloud from a set of indices, order preserved.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
        }
    }

    pub fn translated(&self, shift: &Vector3<f64>) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| p + shift).collect(),
        }
    }

    pub fn rotated(&self, rotation: &Matrix3<f64>) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| rotation * p).collect(),
        }
    }

    /// Per-axis minimum. Errors on an empty cloud.
    pub fn min_corner(&self) -> Result<Vector3<f64>> {
        self.fold_axes(f64::min)
    }

    /// Per-axis maximum. Errors on an empty cloud.
    pub fn max_corner(&self) -> Result<Vector3<f64>> {
        self.fold_axes(f64::max)
    }

    fn fold_axes(&self, f: fn(f64, f64) -> f64) -> Result<Vector3<f64>> {
        let first = self.points.first().ok_or(Error::EmptyCloud)?;
        let mut acc = first.coords;
        for p in &self.points[1..] {
            for a in 0..3 {
                acc[a] = f(acc[a], p[a]);
            }
        }
        Ok(acc)
    }

    pub(crate) fn require_non_empty(&self) -> Result<()> {
        if self.points.is_empty() {
            Err(Error::EmptyCloud)
        } else {
            Ok(())
        }
    }
}

/// Euler angles in degrees. Ranges are the caller's contract.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub alpha_deg: f64,
    pub beta_deg: f64,
    pub gamma_deg: f64,
}

impl EulerAngles {
    pub fn new(alpha_deg: f64, beta_deg: f64, gamma_deg: f64) -> Self {
        Self {
            alpha_deg,
            beta_deg,
            gamma_deg,
        }
    }
}

fn rot_x(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_y(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_z(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Rotation matrix for extrinsic x → y → z Euler angles:
/// `R = R_z(γ) · R_y(β) · R_x(α)`.
pub fn euler_to_matrix(angles: EulerAngles) -> Matrix3<f64> {
    rot_z(angles.gamma_deg) * rot_y(angles.beta_deg) * rot_x(angles.alpha_deg)
}

/// Largest deviation of `m` from SO(3): max of |mᵀm − I| entries and |det − 1|.
pub fn so3_deviation(m: &Matrix3<f64>) -> f64 {
    let gram = m.transpose() * m;
    let mut dev: f64 = (m.determinant() - 1.0).abs();
    for r in 0..3 {
        for c in 0..3 {
            let target = if r == c { 1.0 } else { 0.0 };
            dev = dev.max((gram[(r, c)] - target).abs());
        }
    }
    dev
}

pub(crate) fn validate_rotation(m: &Matrix3<f64>) -> Result<()> {
    let dev = so3_deviation(m);
    if !dev.is_finite() || dev > ROTATION_TOL {
        return Err(Error::NonRotation(format!(
            "matrix deviates from SO(3) by {dev:.3e} (tolerance {ROTATION_TOL:.0e})"
        )));
    }
    Ok(())
}

/// Rotation + translation pair, validated to be a proper rigid motion.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        validate_rotation(&rotation)?;
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { index: 0 });
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Row-major 4×4 homogeneous form, for I/O only.
    pub fn to_matrix4_row_major(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
            0.0,
            0.0,
            0.0,
            1.0,
        ]
    }

    pub fn from_matrix4_row_major(m: &[f64; 16]) -> Result<Self> {
        let rotation = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        let translation = Vector3::new(m[3], m[7], m[11]);
        if m[12] != 0.0 || m[13] != 0.0 || m[14] != 0.0 || m[15] != 1.0 {
            return Err(Error::InvalidParameter(
                "bottom row of a rigid 4x4 matrix must be [0 0 0 1]".into(),
            ));
        }
        Self::new(rotation, translation)
    }
}

/// Arithmetic mean of the points; subtracting it re-centers the cloud at
/// the origin.
pub fn center_of_mass_shift(pc: &PointCloud) -> Result<Vector3<f64>> {
    pc.require_non_empty()?;
    let mut sum = Vector3::zeros();
    for p in pc.iter() {
        sum += p.coords;
    }
    Ok(sum / pc.len() as f64)
}

/// Negated per-axis minimum; adding it makes every coordinate ≥ 0 with the
/// minimum exactly 0 on each axis.
pub fn positive_shift(pc: &PointCloud) -> Result<Vector3<f64>> {
    Ok(-pc.min_corner()?)
}

pub fn apply_transform(pc: &PointCloud, transform: &RigidTransform) -> PointCloud {
    PointCloud {
        points: pc.iter().map(|p| transform.apply_point(p)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::UnitQuaternion;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
        let axis = nalgebra::Unit::new_normalize(Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ));
        UnitQuaternion::from_axis_angle(&axis, rng.random_range(-3.0..3.0))
            .to_rotation_matrix()
            .into_inner()
    }

    #[test]
    fn euler_identity() {
        let m = euler_to_matrix(EulerAngles::new(0.0, 0.0, 0.0));
        assert_relative_eq!(m, Matrix3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn euler_quarter_turn_about_x() {
        let m = euler_to_matrix(EulerAngles::new(90.0, 0.0, 0.0));
        let mapped = m * Vector3::new(0.0, 1.0, 0.0);
        assert_relative_eq!(mapped, Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn euler_matches_quaternion_composition_oracle() {
        // Independent route: compose unit quaternions about the fixed axes
        // in the same extrinsic order and compare entrywise.
        let angles = EulerAngles::new(15.0, 30.0, 45.0);
        let qx = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), 15f64.to_radians());
        let qy = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), 30f64.to_radians());
        let qz = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 45f64.to_radians());
        let oracle = (qz * qy * qx).to_rotation_matrix().into_inner();
        let m = euler_to_matrix(angles);
        for r in 0..3 {
            for c in 0..3 {
                assert!(
                    (m[(r, c)] - oracle[(r, c)]).abs() < 1e-12,
                    "entry ({r},{c}): {} vs {}",
                    m[(r, c)],
                    oracle[(r, c)]
                );
            }
        }
    }

    #[test]
    fn euler_output_is_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let m = euler_to_matrix(EulerAngles::new(
                rng.random_range(-180.0..180.0),
                rng.random_range(-180.0..180.0),
                rng.random_range(-180.0..180.0),
            ));
            assert!(so3_deviation(&m) < ROTATION_TOL);
        }
    }

    #[test]
    fn center_of_mass_examples() {
        let pc = PointCloud::from_coords([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]).unwrap();
        assert_eq!(
            center_of_mass_shift(&pc).unwrap(),
            Vector3::new(1.0, 0.0, 0.0)
        );

        let single = PointCloud::from_coords([[1.0, 1.0, 1.0]]).unwrap();
        assert_eq!(
            center_of_mass_shift(&single).unwrap(),
            Vector3::new(1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn center_of_mass_matches_summation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<[f64; 3]> = (0..100)
            .map(|_| {
                [
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                ]
            })
            .collect();
        // Oracle: independent per-axis accumulation.
        let mut oracle = [0.0f64; 3];
        for p in &pts {
            for a in 0..3 {
                oracle[a] += p[a];
            }
        }
        for v in oracle.iter_mut() {
            *v /= pts.len() as f64;
        }
        let pc = PointCloud::from_coords(pts).unwrap();
        let com = center_of_mass_shift(&pc).unwrap();
        for a in 0..3 {
            assert!((com[a] - oracle[a]).abs() < 1e-12);
        }
    }

    #[test]
    fn center_of_mass_empty_errors() {
        let pc = PointCloud::new(vec![]).unwrap();
        assert!(matches!(
            center_of_mass_shift(&pc),
            Err(Error::EmptyCloud)
        ));
    }

    #[test]
    fn positive_shift_examples() {
        let pc = PointCloud::from_coords([[-1.0, -2.0, -3.0], [1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(positive_shift(&pc).unwrap(), Vector3::new(1.0, 2.0, 3.0));

        let octant = PointCloud::from_coords([[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(positive_shift(&octant).unwrap(), Vector3::zeros());
    }

    #[test]
    fn positive_shift_zeroes_minima() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<[f64; 3]> = (0..64)
            .map(|_| {
                [
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-5.0..5.0),
                ]
            })
            .collect();
        let pc = PointCloud::from_coords(pts).unwrap();
        let shift = positive_shift(&pc).unwrap();
        let shifted = pc.translated(&shift);
        let min = shifted.min_corner().unwrap();
        for a in 0..3 {
            assert!(min[a].abs() < 1e-15, "axis {a} min {}", min[a]);
            assert!(min[a] >= 0.0);
        }
    }

    #[test]
    fn center_of_mass_is_linear_under_shift() {
        let pc = PointCloud::from_coords([[0.5, -0.25, 2.0], [1.5, 0.25, -1.0], [0.0, 0.0, 0.0]])
            .unwrap();
        let base = center_of_mass_shift(&pc).unwrap();
        let offset = Vector3::new(0.3, -0.7, 1.1);
        let moved = center_of_mass_shift(&pc.translated(&offset)).unwrap();
        assert_relative_eq!(moved, base + offset, epsilon = 1e-12);
    }

    #[test]
    fn apply_transform_identity_and_axis_mapping() {
        let pc = PointCloud::from_coords([[1.0, 0.0, 0.0]]).unwrap();
        let same = apply_transform(&pc, &RigidTransform::identity());
        assert_eq!(same, pc);

        let quarter = RigidTransform::new(
            euler_to_matrix(EulerAngles::new(0.0, 0.0, 90.0)),
            Vector3::zeros(),
        )
        .unwrap();
        let mapped = apply_transform(&pc, &quarter);
        assert_relative_eq!(
            mapped.points()[0],
            Point3::new(0.0, 1.0, 0.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn apply_transform_round_trips_through_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pts: Vec<[f64; 3]> = (0..50)
            .map(|_| {
                [
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                ]
            })
            .collect();
        let pc = PointCloud::from_coords(pts).unwrap();
        let t = RigidTransform::new(
            random_rotation(&mut rng),
            Vector3::new(0.4, -1.2, 2.5),
        )
        .unwrap();
        let back = apply_transform(&apply_transform(&pc, &t), &t.inverse());
        for (a, b) in pc.iter().zip(back.iter()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn apply_transform_preserves_pairwise_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<[f64; 3]> = (0..20)
            .map(|_| {
                [
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ]
            })
            .collect();
        let pc = PointCloud::from_coords(pts).unwrap();
        let t = RigidTransform::new(random_rotation(&mut rng), Vector3::new(3.0, -2.0, 0.5))
            .unwrap();
        let moved = apply_transform(&pc, &t);
        for i in 0..pc.len() {
            for j in (i + 1)..pc.len() {
                let d0 = (pc.points()[i] - pc.points()[j]).norm();
                let d1 = (moved.points()[i] - moved.points()[j]).norm();
                assert!((d0 - d1).abs() <= 1e-9 * d0.max(1.0));
            }
        }
    }

    #[test]
    fn non_finite_points_rejected() {
        let err = PointCloud::from_coords([[0.0, f64::NAN, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 0 }));
    }

    #[test]
    fn rigid_transform_rejects_non_rotation() {
        let scaled = Matrix3::identity() * 2.0;
        assert!(RigidTransform::new(scaled, Vector3::zeros()).is_err());
        let reflection = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(RigidTransform::new(reflection, Vector3::zeros()).is_err());
    }

    #[test]
    fn matrix4_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = RigidTransform::new(random_rotation(&mut rng), Vector3::new(1.0, 2.0, 3.0))
            .unwrap();
        let m = t.to_matrix4_row_major();
        let back = RigidTransform::from_matrix4_row_major(&m).unwrap();
        assert_eq!(t, back);
    }
}
