use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use super::MetricPoint;
use crate::error::{Error, Result};

/// Rotation plus translation in meters, stamped with a capture time.
///
/// Applying a pose maps coordinates of the pose's own frame into its parent
/// frame: `p_parent = R * p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    pub timestamp: f64,
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl RigidPose {
    /// Builds a pose from a `(qw, qx, qy, qz)` quaternion, normalizing it
    /// unless it is already unit length to within 1e-12 (so stored poses
    /// reload bit-identically).
    pub fn new(timestamp: f64, quat_wxyz: [f64; 4], translation: [f64; 3]) -> Result<Self> {
        let [w, x, y, z] = quat_wxyz;
        let q = Quaternion::new(w, x, y, z);
        let norm = q.norm();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(Error::invalid(
                "rotation",
                format!("quaternion norm {norm} cannot be normalized"),
            ));
        }
        if translation.iter().any(|v| !v.is_finite()) || !timestamp.is_finite() {
            return Err(Error::invalid(
                "translation",
                "components and timestamp must be finite",
            ));
        }
        let rotation = if (norm - 1.0).abs() <= 1e-12 {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::from_quaternion(q)
        };
        Ok(RigidPose {
            timestamp,
            rotation,
            translation: Vector3::from(translation),
        })
    }

    pub fn identity() -> Self {
        RigidPose {
            timestamp: 0.0,
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(tx: f64, ty: f64, tz: f64) -> Self {
        RigidPose {
            translation: Vector3::new(tx, ty, tz),
            ..Self::identity()
        }
    }

    pub fn at(mut self, timestamp: f64) -> Self {
        self.timestamp = timestamp;
        self
    }

    /// Quaternion components as `(qw, qx, qy, qz)`.
    pub fn quat_wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn inverse(&self) -> Self {
        let rot = self.rotation.inverse();
        RigidPose {
            timestamp: self.timestamp,
            rotation: rot,
            translation: -(rot * self.translation),
        }
    }
}

pub fn apply_pose(pose: &RigidPose, p: MetricPoint) -> MetricPoint {
    MetricPoint::from_vector(pose.rotation * p.to_vector() + pose.translation)
}

/// `outer ∘ inner`: applying the result equals applying `inner` then `outer`.
/// The timestamp of `inner` is kept.
pub fn compose(outer: &RigidPose, inner: &RigidPose) -> RigidPose {
    RigidPose {
        timestamp: inner.timestamp,
        rotation: outer.rotation * inner.rotation,
        translation: outer.rotation * inner.translation + outer.translation,
    }
}

/// `a⁻¹ ∘ b`: maps coordinates of frame `b` into frame `a`, so that
/// `apply_pose(a, apply_pose(relative_pose(a, b), p)) == apply_pose(b, p)`.
pub fn relative_pose(a: &RigidPose, b: &RigidPose) -> RigidPose {
    compose(&a.inverse(), b)
}

/// Pose at time `t` along a trajectory: linear in translation, spherical
/// linear in rotation, clamped to the first/last sample outside the range.
pub fn interpolate_pose(trajectory: &[RigidPose], t: f64) -> Result<RigidPose> {
    let first = trajectory.first().ok_or(Error::EmptyTrajectory)?;
    if let Some(i) = trajectory
        .windows(2)
        .position(|w| !(w[1].timestamp > w[0].timestamp))
    {
        return Err(Error::UnorderedTrajectory(i + 1));
    }
    let last = trajectory[trajectory.len() - 1];
    if t <= first.timestamp {
        return Ok(*first);
    }
    if t >= last.timestamp {
        return Ok(last);
    }
    // first index with timestamp > t; 1 <= upper < len here
    let upper = trajectory.partition_point(|p| p.timestamp <= t);
    let (p0, p1) = (&trajectory[upper - 1], &trajectory[upper]);
    if p0.timestamp == t {
        return Ok(*p0);
    }
    let alpha = (t - p0.timestamp) / (p1.timestamp - p0.timestamp);
    Ok(RigidPose {
        timestamp: t,
        rotation: slerp(&p0.rotation, &p1.rotation, alpha),
        translation: p0.translation.lerp(&p1.translation, alpha),
    })
}

fn slerp(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>, alpha: f64) -> UnitQuaternion<f64> {
    let qa = a.quaternion();
    let mut qb = *b.quaternion();
    let mut dot = qa.dot(&qb);
    // shortest arc
    if dot < 0.0 {
        qb = -qb;
        dot = -dot;
    }
    if dot > 0.9995 {
        let q = qa * (1.0 - alpha) + qb * alpha;
        return UnitQuaternion::from_quaternion(q);
    }
    let theta = dot.min(1.0).acos();
    let sin_theta = theta.sin();
    let wa = ((1.0 - alpha) * theta).sin() / sin_theta;
    let wb = (alpha * theta).sin() / sin_theta;
    UnitQuaternion::from_quaternion(qa * wa + qb * wb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    /// Rotation via explicit matrix built from quaternion components.
    fn rotate_by_matrix(q: [f64; 4], p: [f64; 3]) -> [f64; 3] {
        let [w, x, y, z] = q;
        let m = [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ];
        let mut out = [0.0; 3];
        for (o, row) in out.iter_mut().zip(m.iter()) {
            *o = row[0] * p[0] + row[1] * p[1] + row[2] * p[2];
        }
        out
    }

    fn close(a: MetricPoint, b: MetricPoint, tol: f64) -> bool {
        (a.x - b.x).abs() <= tol && (a.y - b.y).abs() <= tol && (a.z - b.z).abs() <= tol
    }

    #[test]
    fn identity_and_translation() {
        let p = MetricPoint::new(1.0, 2.0, 3.0);
        assert_eq!(apply_pose(&RigidPose::identity(), p), p);
        let moved = apply_pose(&RigidPose::from_translation(0.1, 0.0, 0.0), p);
        assert!(close(moved, MetricPoint::new(1.1, 2.0, 3.0), 1e-15));
    }

    #[test]
    fn quarter_turn_about_z() {
        let pose = RigidPose::new(0.0, [FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2], [0.0; 3]).unwrap();
        let out = apply_pose(&pose, MetricPoint::new(1.0, 0.0, 0.0));
        assert!(
            close(out, MetricPoint::new(0.0, 1.0, 0.0), 1e-12),
            "{out:?}"
        );
    }

    #[test]
    fn quaternion_is_normalized_on_construction() {
        let pose = RigidPose::new(0.0, [2.0, 0.0, 0.0, 2.0], [0.0; 3]).unwrap();
        let [w, x, y, z] = pose.quat_wxyz();
        assert!(((w * w + x * x + y * y + z * z).sqrt() - 1.0).abs() < 1e-12);
        assert!(RigidPose::new(0.0, [0.0; 4], [0.0; 3]).is_err());
    }

    #[test]
    fn relative_pose_conventions() {
        let b = RigidPose::from_translation(0.3, -0.2, 1.0);
        let rel = relative_pose(&b, &b);
        assert!(rel.rotation.angle() < 1e-12);
        assert!(rel.translation.norm() < 1e-12);

        let rel = relative_pose(
            &RigidPose::identity(),
            &RigidPose::from_translation(0.0, 0.0, 1.0),
        );
        assert_eq!(rel.translation, Vector3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn interpolation_midpoints() {
        let traj = [
            RigidPose::identity().at(0.0),
            RigidPose::from_translation(1.0, 0.0, 0.0).at(1.0),
        ];
        let mid = interpolate_pose(&traj, 0.5).unwrap();
        assert!((mid.translation - Vector3::new(0.5, 0.0, 0.0)).norm() < 1e-15);

        let quarter =
            RigidPose::new(1.0, [FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2], [0.0; 3]).unwrap();
        let traj = [RigidPose::identity().at(0.0), quarter];
        let mid = interpolate_pose(&traj, 0.5).unwrap();
        // half of 90° about +Z: (cos 22.5°, 0, 0, sin 22.5°)
        let [w, x, y, z] = mid.quat_wxyz();
        assert!((w - 0.9238795325112867).abs() < 1e-12);
        assert!((z - 0.3826834323650898).abs() < 1e-12);
        assert!(x.abs() < 1e-15 && y.abs() < 1e-15);

        let both_identity = [RigidPose::identity().at(0.0), RigidPose::identity().at(2.0)];
        let p = interpolate_pose(&both_identity, 1.3).unwrap();
        assert!(p.rotation.angle() < 1e-15 && p.translation.norm() == 0.0);
    }

    #[test]
    fn interpolation_clamps_and_hits_samples() {
        let a = RigidPose::from_translation(0.0, 1.0, 0.0).at(1.0);
        let b = RigidPose::new(2.0, [0.9, 0.1, 0.2, 0.3], [1.0, 2.0, 3.0]).unwrap();
        let c = RigidPose::from_translation(5.0, 1.0, 0.0).at(4.0);
        let traj = [a, b, c];
        assert_eq!(interpolate_pose(&traj, -3.0).unwrap(), a);
        assert_eq!(interpolate_pose(&traj, 9.0).unwrap(), c);
        assert_eq!(interpolate_pose(&traj, 2.0).unwrap(), b);
        assert_eq!(interpolate_pose(&traj, 1.0).unwrap(), a);
        assert_eq!(interpolate_pose(&[], 0.0), Err(Error::EmptyTrajectory));
        assert_eq!(
            interpolate_pose(&[b, a], 0.0),
            Err(Error::UnorderedTrajectory(1))
        );
    }

    #[test]
    fn slerp_takes_shortest_arc() {
        let q = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 0.4);
        let flipped = UnitQuaternion::new_unchecked(-*q.quaternion());
        let mid = slerp(&UnitQuaternion::identity(), &flipped, 0.5);
        assert!((mid.angle() - 0.2).abs() < 1e-12);
    }

    fn arb_pose() -> impl Strategy<Value = RigidPose> {
        (
            prop::array::uniform4(-1.0f64..1.0),
            prop::array::uniform3(-5.0f64..5.0),
        )
            .prop_filter_map("degenerate quaternion", |(q, t)| {
                RigidPose::new(0.0, q, t).ok()
            })
    }

    proptest! {
        #[test]
        fn apply_matches_rotation_matrix(pose in arb_pose(), p in prop::array::uniform3(-10.0f64..10.0)) {
            let r = rotate_by_matrix(pose.quat_wxyz(), p);
            let expected = MetricPoint::new(
                r[0] + pose.translation.x,
                r[1] + pose.translation.y,
                r[2] + pose.translation.z,
            );
            let got = apply_pose(&pose, MetricPoint::new(p[0], p[1], p[2]));
            prop_assert!(close(got, expected, 1e-12));
        }

        #[test]
        fn relative_pose_round_trip(a in arb_pose(), b in arb_pose(), p in prop::array::uniform3(-10.0f64..10.0)) {
            let p = MetricPoint::new(p[0], p[1], p[2]);
            let rel = relative_pose(&a, &b);
            let lhs = apply_pose(&a, apply_pose(&rel, p));
            let rhs = apply_pose(&b, p);
            prop_assert!(close(lhs, rhs, 1e-9));
        }

        #[test]
        fn unit_norm_after_interpolation(a in arb_pose(), b in arb_pose(), t in 0.0f64..1.0) {
            let traj = [a.at(0.0), b.at(1.0)];
            let p = interpolate_pose(&traj, t).unwrap();
            prop_assert!((p.rotation.quaternion().norm() - 1.0).abs() < 1e-9);
        }
    }
}
