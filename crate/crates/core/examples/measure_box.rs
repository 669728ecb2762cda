//! Measures a synthetic box from a hand-built metric image, showing how the
//! percentile setting trims a stray outlier.
//!
//!     cargo run --example measure_box

use rgbd_measure::camera::MetricPoint;
use rgbd_measure::densify::MetricImage;
use rgbd_measure::measure::measure_extent;
use rgbd_measure::segment::{segment_frame, KMeansParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (w, h) = (200, 150);
    let (fx, cx, cy) = (200.0, 100.0, 75.0);
    let mut metric = MetricImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let inside = (60..140).contains(&x) && (15..135).contains(&y);
            let z = if inside { 0.5 } else { 1.3 };
            metric.set(
                x,
                y,
                MetricPoint::new((x as f64 - cx) / fx * z, (y as f64 - cy) / fx * z, z),
            );
        }
    }
    // one corrupted pixel on the object
    let p = metric.get(100, 70);
    metric.set(100, 70, MetricPoint::new(p.x, p.y + 0.4, p.z));

    let mask = segment_frame(&metric, &KMeansParams::default())?;
    for percentiles in [(0.0, 1.0), (0.01, 0.99)] {
        let m = measure_extent(&mask, &metric, percentiles)?;
        println!(
            "percentiles {percentiles:?}: height {:.4} m, width {:.4} m, mean depth {:.3} m over {} px",
            m.height, m.width, m.mean_depth, m.pixel_count
        );
    }
    Ok(())
}
