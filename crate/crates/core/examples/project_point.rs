//! Projects a few camera-frame points through a distorted pinhole model and
//! interpolates a device pose between two trajectory samples.
//!
//!     cargo run --example project_point

use rgbd_measure::camera::{
    apply_pose, interpolate_pose, project, CameraIntrinsics, MetricPoint, RigidPose,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pinhole = CameraIntrinsics::new(1920, 1080, 1400.0, 1400.0, 960.0, 540.0)?;
    let distorted = pinhole.with_distortion(0.1, -0.02, 0.001)?;

    for p in [
        MetricPoint::new(0.0, 0.0, 1.0),
        MetricPoint::new(0.1, 0.05, 0.56),
        MetricPoint::new(-0.4, 0.2, 1.3),
    ] {
        let a = project(p, &pinhole)?;
        let b = project(p, &distorted)?;
        println!(
            "({:+.2}, {:+.2}, {:.2}) -> pinhole ({:8.2}, {:7.2})  distorted ({:8.2}, {:7.2})",
            p.x, p.y, p.z, a.x, a.y, b.x, b.y
        );
    }

    let trajectory = vec![
        RigidPose::new(0.0, [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0])?,
        RigidPose::new(
            1.0,
            [0.9238795325112867, 0.0, 0.3826834323650898, 0.0],
            [0.2, 0.0, 0.0],
        )?,
    ];
    let mid = interpolate_pose(&trajectory, 0.5)?;
    let moved = apply_pose(&mid, MetricPoint::new(0.0, 0.0, 1.0));
    println!(
        "pose at t=0.5: q(wxyz) = {:?}, t = {:?}",
        mid.quat_wxyz(),
        mid.translation.as_slice()
    );
    println!(
        "(0, 0, 1) at t=0.5 -> ({:.4}, {:.4}, {:.4})",
        moved.x, moved.y, moved.z
    );
    Ok(())
}
