//! Splits a synthetic depth image into background, object and no-data with
//! depth k-means, over the whole frame and inside a detection box.
//!
//!     cargo run --release --example segment_scene

use rgbd_measure::camera::MetricPoint;
use rgbd_measure::densify::MetricImage;
use rgbd_measure::segment::{
    kmeans_scalar, segment_bbox, segment_frame, DetectionBox, KMeansParams,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (w, h) = (160, 120);
    let mut metric = MetricImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let z = if (40..100).contains(&x) && (30..90).contains(&y) {
                0.5
            } else {
                1.3
            };
            // a strip without depth, as left by sensor dropout
            if x >= 150 {
                continue;
            }
            metric.set(
                x,
                y,
                MetricPoint::new(x as f64 * 0.001, y as f64 * 0.001, z),
            );
        }
    }
    let params = KMeansParams::default();

    let model = kmeans_scalar(&metric.depths(), 3, &params)?;
    println!(
        "centers {:?} after {} iterations, sizes {:?}",
        model.centers,
        model.iterations,
        model.cluster_sizes()
    );

    let frame = segment_frame(&metric, &params)?;
    println!(
        "full frame: {} foreground pixels (expected {})",
        frame.foreground_count(),
        60 * 60
    );

    let det = DetectionBox::new("box", 0.9, 30.0, 20.0, 110.0, 100.0);
    let boxed = segment_bbox(&metric, &det, &params)?;
    println!(
        "inside {:?}: {} foreground pixels",
        boxed.region,
        boxed.foreground_count()
    );
    Ok(())
}
