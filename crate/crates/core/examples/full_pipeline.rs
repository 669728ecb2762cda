//! Generates the reference box scene and measures it with both densifiers,
//! with and without the depth-edge gate.
//!
//!     cargo run --release --example full_pipeline

use rgbd_measure::densify::DensifyConfig;
use rgbd_measure::pipeline::{run_pipeline, PipelineConfig};
use rgbd_measure::synth::{generate, SceneObject, SceneSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SceneSpec::new(vec![SceneObject::new("box", (0.0, 0.0), (0.20, 0.30), 0.5)]);
    let (bundle, truth) = generate(&spec)?;
    let obj = &truth.objects[0];
    println!(
        "truth: height {:.4} m, width {:.4} m",
        obj.height, obj.width
    );

    let variants = [
        ("nn", DensifyConfig::nearest()),
        (
            "bilinear, gate 0.15 m",
            DensifyConfig::bilinear().with_edge_threshold(0.15),
        ),
        ("bilinear, no gate", DensifyConfig::bilinear()),
    ];
    for (name, densify) in variants {
        let cfg = PipelineConfig {
            densify,
            percentiles: (0.0, 1.0),
            ..PipelineConfig::default()
        };
        let out = run_pipeline(&bundle, &cfg)?;
        let t = &out.report.timings_ms;
        match out.report.measurements.first() {
            Some(m) => println!(
                "{name:>22}: height {:.4} ({:+.2}%), width {:.4} ({:+.2}%), depth {:.3}, {} px, {:.0} ms",
                m.height,
                100.0 * (m.height - obj.height) / obj.height,
                m.width,
                100.0 * (m.width - obj.width) / obj.width,
                m.mean_depth,
                m.pixel_count,
                t.project + t.densify + t.segment + t.measure,
            ),
            None => println!("{name:>22}: {:?}", out.report.errors),
        }
    }
    Ok(())
}
