//! Densifies a sparse grid sampled from a slanted plane and compares the
//! nearest-neighbor and bilinear reconstructions against the true plane.
//!
//!     cargo run --release --example densify

use rgbd_measure::camera::{CameraIntrinsics, MetricPoint, PixelCoord};
use rgbd_measure::densify::{densify, DensifyConfig, SparseEntry, SparsePixelCloud};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let intr = CameraIntrinsics::new(320, 240, 300.0, 300.0, 160.0, 120.0)?;
    let depth_at = |x: f64, y: f64| 1.0 + 0.002 * x + 0.001 * y;
    let point_at = |x: f64, y: f64| {
        let z = depth_at(x, y);
        MetricPoint::new((x - intr.cx) / intr.fx * z, (y - intr.cy) / intr.fy * z, z)
    };

    let mut entries = Vec::new();
    for y in (3..240).step_by(8) {
        for x in (5..320).step_by(8) {
            let (x, y) = (x as f64, y as f64);
            entries.push(SparseEntry {
                pixel: PixelCoord::new(x, y),
                point: point_at(x, y),
            });
        }
    }
    let sparse = SparsePixelCloud::new(intr, entries)?;
    println!("{} sparse samples for {} pixels", sparse.len(), 320 * 240);

    for (name, cfg) in [
        ("nn", DensifyConfig::nearest()),
        ("bilinear", DensifyConfig::bilinear()),
    ] {
        let metric = densify(&sparse, &cfg)?;
        let (mut sum, mut worst) = (0.0, 0.0f64);
        for y in 10..230 {
            for x in 10..310 {
                let err = (metric.get(x, y).z - depth_at(x as f64, y as f64)).abs();
                sum += err;
                worst = worst.max(err);
            }
        }
        println!(
            "{name:>8}: mean |dZ| {:.5} m, max {:.5} m",
            sum / (220.0 * 300.0),
            worst
        );
    }
    Ok(())
}
