//! End-to-end measurement of a [`FrameBundle`]: pose alignment, projection,
//! densification, depth segmentation and extent measurement, with per-stage
//! timings and a JSON report.

use std::time::Instant;

use serde::{Deserialize, Serialize, Serializer};

use crate::bundle::FrameBundle;
use crate::camera::{compose, interpolate_pose, relative_pose, PixelCoord, RigidPose};
use crate::densify::{
    densify_pixel, densify_with, project_cloud, DensifyConfig, DensifyMethod, MetricImage,
    ProjectionStats, SparsePixelCloud,
};
use crate::error::{Error, Result};
use crate::measure::{
    measure_extent, validate_percentiles, Measurement, ObjectOutcome, SCENE_OBJECT_LABEL,
};
use crate::ppm::RgbImage;
use crate::segment::{segment_bbox, segment_frame, KMeansParams, SegmentMask};
use crate::spatial::{KdTree, LinearScan};

pub const REPORT_VERSION: u32 = 1;

/// Depth discontinuity gate used by the pipeline unless overridden.
pub const DEFAULT_EDGE_THRESHOLD: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub densify: DensifyConfig,
    pub percentiles: (f64, f64),
    pub kmeans: KMeansParams,
    /// Also time the linear-scan densifier and report the speedup.
    pub bench: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            densify: DensifyConfig::bilinear().with_edge_threshold(DEFAULT_EDGE_THRESHOLD),
            percentiles: (0.01, 0.99),
            kmeans: KMeansParams::default(),
            bench: false,
        }
    }
}

fn sig9<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(round_sig9(*v))
}

fn sig9_opt<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.serialize_some(&round_sig9(*v)),
        None => s.serialize_none(),
    }
}

fn sig9_pair<S: Serializer>(v: &(f64, f64), s: S) -> std::result::Result<S::Ok, S::Error> {
    (round_sig9(v.0), round_sig9(v.1)).serialize(s)
}

/// Rounds to 9 significant decimal digits.
pub fn round_sig9(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.8e}").parse().unwrap_or(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub interp: String,
    #[serde(serialize_with = "sig9_opt")]
    pub edge_thresh: Option<f64>,
    #[serde(serialize_with = "sig9_opt")]
    pub max_radius: Option<f64>,
    #[serde(serialize_with = "sig9_pair")]
    pub percentiles: (f64, f64),
    pub kmeans_max_iter: usize,
    #[serde(serialize_with = "sig9")]
    pub kmeans_tol: f64,
}

/// A [`Measurement`] as written to the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub label: String,
    #[serde(serialize_with = "sig9")]
    pub height: f64,
    #[serde(serialize_with = "sig9")]
    pub width: f64,
    #[serde(serialize_with = "sig9")]
    pub mean_depth: f64,
    pub pixel_count: usize,
    #[serde(serialize_with = "sig9_pair")]
    pub extent_percentiles: (f64, f64),
}

impl From<&Measurement> for MeasurementRecord {
    fn from(m: &Measurement) -> Self {
        MeasurementRecord {
            label: m.label.clone(),
            height: m.height,
            width: m.width,
            mean_depth: m.mean_depth,
            pixel_count: m.pixel_count,
            extent_percentiles: m.extent_percentiles,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectError {
    /// Detection index, or 0 for the whole-frame object.
    pub index: usize,
    pub label: String,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    #[serde(serialize_with = "sig9")]
    pub project: f64,
    #[serde(serialize_with = "sig9")]
    pub densify: f64,
    #[serde(serialize_with = "sig9")]
    pub segment: f64,
    #[serde(serialize_with = "sig9")]
    pub measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub interp: String,
    /// Pixels densified by each method (a subset of rows).
    pub pixels: usize,
    pub sparse_points: usize,
    #[serde(serialize_with = "sig9")]
    pub tree_ms: f64,
    #[serde(serialize_with = "sig9")]
    pub linear_ms: f64,
    #[serde(serialize_with = "sig9")]
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    #[serde(flatten)]
    pub stats: ProjectionStats,
    pub dropped_cloud_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format_version: u32,
    pub scheme: String,
    pub config: ConfigEcho,
    pub projection: ProjectionReport,
    pub measurements: Vec<MeasurementRecord>,
    pub errors: Vec<ObjectError>,
    pub timings_ms: Timings,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bench: Option<BenchReport>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Everything produced by a pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: Report,
    pub sparse: SparsePixelCloud,
    pub metric: MetricImage,
    pub objects: Vec<ObjectOutcome>,
}

impl PipelineOutput {
    pub fn masks(&self) -> impl Iterator<Item = &SegmentMask> {
        self.objects
            .iter()
            .filter_map(|o| o.result.as_ref().ok().map(|(_, m)| m))
    }
}

/// Pose taking depth-camera points at `t_depth` into the color-camera frame at `t_rgb`.
pub fn align_to_color(bundle: &FrameBundle) -> Result<RigidPose> {
    let at_rgb = interpolate_pose(&bundle.trajectory, bundle.t_rgb)?;
    let at_depth = interpolate_pose(&bundle.trajectory, bundle.t_depth)?;
    Ok(compose(
        &relative_pose(&at_rgb, &at_depth),
        &bundle.depth_to_color,
    ))
}

fn interp_name(method: DensifyMethod) -> &'static str {
    match method {
        DensifyMethod::NearestNeighbor => "nn",
        DensifyMethod::Bilinear => "bilinear",
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::NonPositiveDepth(_) => "NonPositiveDepth",
        Error::EmptyTrajectory => "EmptyTrajectory",
        Error::UnorderedTrajectory(_) => "UnorderedTrajectory",
        Error::EmptySparseCloud => "EmptySparseCloud",
        Error::DegenerateInput(_) => "DegenerateInput",
        Error::EmptyRegion => "EmptyRegion",
        Error::InsufficientForeground(_) => "InsufficientForeground",
        Error::InvalidParameter { .. } => "InvalidParameter",
        Error::SpecInvalid(_) => "SpecInvalid",
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Times tree-backed and linear-scan densification on the same rows,
/// single-threaded. Rows are spaced so that about `target_rows` are used.
pub fn benchmark_densify(
    sparse: &SparsePixelCloud,
    cfg: &DensifyConfig,
    target_rows: usize,
) -> Result<BenchReport> {
    cfg.validate()?;
    if sparse.is_empty() {
        return Err(Error::EmptySparseCloud);
    }
    let width = sparse.intrinsics().width as usize;
    let height = sparse.intrinsics().height as usize;
    let step = (height / target_rows.max(1)).max(1);
    let rows: Vec<usize> = (0..height).step_by(step).collect();
    let run = |index: &dyn crate::spatial::NeighborIndex| {
        let mut checksum = 0.0;
        for &y in &rows {
            for x in 0..width {
                checksum +=
                    densify_pixel(index, sparse, cfg, PixelCoord::new(x as f64, y as f64)).z;
            }
        }
        checksum
    };

    let start = Instant::now();
    let tree = KdTree::build(sparse.indexed_points());
    let tree_sum = run(&tree);
    let tree_ms = elapsed_ms(start);

    let start = Instant::now();
    let scan = LinearScan::new(sparse.indexed_points());
    let scan_sum = run(&scan);
    let linear_ms = elapsed_ms(start);
    debug_assert_eq!(tree_sum, scan_sum);

    Ok(BenchReport {
        interp: interp_name(cfg.method).to_string(),
        pixels: rows.len() * width,
        sparse_points: sparse.len(),
        tree_ms,
        linear_ms,
        speedup: linear_ms / tree_ms.max(1e-9),
    })
}

/// Runs every stage on one bundle.
///
/// Alignment, projection and densification failures abort the run; failures
/// segmenting or measuring an individual object are recorded in the report.
pub fn run_pipeline(bundle: &FrameBundle, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.densify.validate()?;
    validate_percentiles(cfg.percentiles)?;
    let mut timings = Timings::default();

    let start = Instant::now();
    let to_color = align_to_color(bundle)?;
    let (sparse, stats) = project_cloud(&bundle.cloud, &to_color, &bundle.intrinsics)?;
    timings.project = elapsed_ms(start);

    let start = Instant::now();
    let tree = sparse.build_index();
    let metric = densify_with(&tree, &sparse, &cfg.densify)?;
    timings.densify = elapsed_ms(start);

    let targets: Vec<(String, Option<crate::segment::DetectionBox>)> = match &bundle.detections {
        None => vec![(SCENE_OBJECT_LABEL.to_string(), None)],
        Some(dets) => dets
            .iter()
            .map(|d| (d.label.clone(), Some(d.clone())))
            .collect(),
    };
    let mut objects = Vec::with_capacity(targets.len());
    for (label, detection) in targets {
        let start = Instant::now();
        let mask = match &detection {
            None => segment_frame(&metric, &cfg.kmeans),
            Some(d) => segment_bbox(&metric, d, &cfg.kmeans),
        };
        timings.segment += elapsed_ms(start);
        let start = Instant::now();
        let result = mask.and_then(|mask| {
            let mut m = measure_extent(&mask, &metric, cfg.percentiles)?;
            m.label = label.clone();
            Ok((m, mask))
        });
        timings.measure += elapsed_ms(start);
        objects.push(ObjectOutcome {
            label,
            detection,
            result,
        });
    }

    let bench = if cfg.bench {
        Some(benchmark_densify(&sparse, &cfg.densify, 16)?)
    } else {
        None
    };

    let mut measurements = Vec::new();
    let mut errors = Vec::new();
    for (index, o) in objects.iter().enumerate() {
        match &o.result {
            Ok((m, _)) => measurements.push(MeasurementRecord::from(m)),
            Err(e) => errors.push(ObjectError {
                index,
                label: o.label.clone(),
                kind: error_kind(e).to_string(),
                message: e.to_string(),
            }),
        }
    }
    let report = Report {
        format_version: REPORT_VERSION,
        scheme: if bundle.detections.is_some() {
            "detection-boxes"
        } else {
            "full-frame"
        }
        .to_string(),
        config: ConfigEcho {
            interp: interp_name(cfg.densify.method).to_string(),
            edge_thresh: cfg.densify.edge_threshold,
            max_radius: cfg.densify.max_radius,
            percentiles: cfg.percentiles,
            kmeans_max_iter: cfg.kmeans.max_iter,
            kmeans_tol: cfg.kmeans.tol,
        },
        projection: ProjectionReport {
            stats,
            dropped_cloud_rows: bundle.dropped_cloud_rows,
        },
        measurements,
        errors,
        timings_ms: timings,
        bench,
    };
    Ok(PipelineOutput {
        report,
        sparse,
        metric,
        objects,
    })
}

/// Tint colors, one per object in order.
pub const OVERLAY_PALETTE: [[u8; 3]; 6] = [
    [255, 0, 255],
    [0, 255, 255],
    [255, 255, 0],
    [255, 128, 0],
    [0, 255, 0],
    [255, 0, 0],
];

/// Tints every foreground pixel of each segmented object and outlines each
/// detection box, one palette color per object.
pub fn render_overlay(rgb: &RgbImage, objects: &[ObjectOutcome]) -> RgbImage {
    let mut out = rgb.clone();
    for (i, obj) in objects.iter().enumerate() {
        let color = OVERLAY_PALETTE[i % OVERLAY_PALETTE.len()];
        if let Ok((_, mask)) = &obj.result {
            for (x, y) in mask.foreground_pixels() {
                if x < out.width() && y < out.height() {
                    out.put(x, y, tint(rgb.get(x, y), color));
                }
            }
        }
        if let Some(det) = &obj.detection {
            if let Ok(region) = det.clip(out.width(), out.height()) {
                let (x0, y0) = (region.x, region.y);
                let (x1, y1) = (region.x + region.width - 1, region.y + region.height - 1);
                for x in x0..=x1 {
                    out.put(x, y0, color);
                    out.put(x, y1, color);
                }
                for y in y0..=y1 {
                    out.put(x0, y, color);
                    out.put(x1, y, color);
                }
            }
        }
    }
    out
}

/// Halfway blend towards `color`; always differs from `src` unless equal.
fn tint(src: [u8; 3], color: [u8; 3]) -> [u8; 3] {
    let mut out = [0u8; 3];
    for c in 0..3 {
        let (s, t) = (i16::from(src[c]), i16::from(color[c]));
        let mut v = (s + t) / 2;
        if v == s && s != t {
            v += (t - s).signum();
        }
        out[c] = v as u8;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::{DetectionBox, Region};

    #[test]
    fn sig9_rounding() {
        assert_eq!(round_sig9(0.123456789123), 0.123456789);
        assert_eq!(round_sig9(1234567891.0), 1234567890.0);
        assert_eq!(round_sig9(0.0), 0.0);
        assert_eq!(round_sig9(-2.5e-7), -2.5e-7);
    }

    #[test]
    fn tint_changes_every_channel_that_differs() {
        assert_eq!(tint([255, 255, 255], [255, 0, 255]), [255, 127, 255]);
        assert_eq!(tint([10, 11, 12], [11, 11, 11]), [11, 11, 11]);
        assert_ne!(tint([0, 0, 0], [1, 0, 0]), [0, 0, 0]);
    }

    #[test]
    fn overlay_of_nothing_is_a_copy() {
        let img = RgbImage::filled(5, 4, [10, 20, 30]);
        assert_eq!(render_overlay(&img, &[]), img);
    }

    #[test]
    fn overlay_full_frame_mask_tints_everything() {
        let img = RgbImage::filled(5, 4, [10, 20, 30]);
        let mask = SegmentMask::from_flags(Region::full(5, 4), vec![true; 20]).unwrap();
        let m = Measurement {
            label: "x".into(),
            height: 1.0,
            width: 1.0,
            mean_depth: 1.0,
            pixel_count: 20,
            extent_percentiles: (0.0, 1.0),
        };
        let obj = ObjectOutcome {
            label: "x".into(),
            detection: None,
            result: Ok((m, mask)),
        };
        let out = render_overlay(&img, &[obj]);
        for y in 0..4 {
            for x in 0..5 {
                assert_ne!(out.get(x, y), img.get(x, y));
            }
        }
    }

    #[test]
    fn overlay_outlines_boxes_of_failed_objects() {
        let img = RgbImage::filled(8, 8, [0, 0, 0]);
        let obj = ObjectOutcome {
            label: "b".into(),
            detection: Some(DetectionBox::new("b", 0.5, 2.0, 2.0, 5.0, 6.0)),
            result: Err(Error::DegenerateInput("flat".into())),
        };
        let out = render_overlay(&img, &[obj]);
        assert_eq!(out.get(2, 2), OVERLAY_PALETTE[0]);
        assert_eq!(out.get(4, 5), OVERLAY_PALETTE[0]);
        assert_eq!(out.get(3, 3), [0, 0, 0]);
        assert_eq!(out.get(6, 6), [0, 0, 0]);
    }
}
