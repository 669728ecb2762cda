//! Metric extents of segmented objects.
//!
//! Height is the spread of `Y` and width the spread of `X` over the
//! foreground pixels' metric points, both along the color-camera axes. The
//! spread is taken between a low and a high percentile (nearest-rank), so
//! `(0, 1)` gives the literal extreme points and e.g. `(0.01, 0.99)` trims
//! outliers.

use serde::{Deserialize, Serialize};

use crate::densify::MetricImage;
use crate::error::{Error, Result};
use crate::segment::{segment_bbox, segment_frame, DetectionBox, KMeansParams, SegmentMask};

pub const SCENE_OBJECT_LABEL: &str = "scene-object";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub label: String,
    pub height: f64,
    pub width: f64,
    pub mean_depth: f64,
    pub pixel_count: usize,
    pub extent_percentiles: (f64, f64),
}

/// Nearest-rank percentile of an ascending slice; `p` in `[0, 1]`.
pub fn percentile_nearest_rank(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    let rank = (p * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

pub fn validate_percentiles(percentiles: (f64, f64)) -> Result<()> {
    let (lo, hi) = percentiles;
    if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(Error::invalid(
            "percentiles",
            format!("need 0 <= low <= high <= 1, got ({lo}, {hi})"),
        ));
    }
    Ok(())
}

/// Extent of the foreground of `mask` in meters. The label is
/// [`SCENE_OBJECT_LABEL`]; callers with a detection relabel the result.
pub fn measure_extent(
    mask: &SegmentMask,
    metric: &MetricImage,
    percentiles: (f64, f64),
) -> Result<Measurement> {
    validate_percentiles(percentiles)?;
    let mut xs = Vec::with_capacity(mask.foreground_count());
    let mut ys = Vec::with_capacity(mask.foreground_count());
    let mut depth_sum = 0.0;
    for (x, y) in mask.foreground_pixels() {
        if x >= metric.width() || y >= metric.height() {
            continue;
        }
        let p = metric.get(x, y);
        if p.is_empty() || !(p.z > 0.0) || !p.is_finite() {
            continue;
        }
        xs.push(p.x);
        ys.push(p.y);
        depth_sum += p.z;
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientForeground(xs.len()));
    }
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (lo, hi) = percentiles;
    let spread =
        |v: &[f64]| (percentile_nearest_rank(v, hi) - percentile_nearest_rank(v, lo)).max(0.0);
    Ok(Measurement {
        label: SCENE_OBJECT_LABEL.to_string(),
        height: spread(&ys),
        width: spread(&xs),
        mean_depth: depth_sum / xs.len() as f64,
        pixel_count: xs.len(),
        extent_percentiles: percentiles,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureConfig {
    pub percentiles: (f64, f64),
    pub kmeans: KMeansParams,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig {
            percentiles: (0.01, 0.99),
            kmeans: KMeansParams::default(),
        }
    }
}

/// Result for one object: a detection box, or the whole frame when no
/// detections were supplied.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectOutcome {
    pub label: String,
    pub detection: Option<DetectionBox>,
    pub result: Result<(Measurement, SegmentMask)>,
}

/// Measures the whole frame (no detections) or every detection box.
pub fn measure_scene(
    metric: &MetricImage,
    detections: Option<&[DetectionBox]>,
    cfg: &MeasureConfig,
) -> Vec<ObjectOutcome> {
    let measure = |mask: Result<SegmentMask>, label: &str| {
        mask.and_then(|mask| {
            let mut m = measure_extent(&mask, metric, cfg.percentiles)?;
            m.label = label.to_string();
            Ok((m, mask))
        })
    };
    match detections {
        None => vec![ObjectOutcome {
            label: SCENE_OBJECT_LABEL.to_string(),
            detection: None,
            result: measure(segment_frame(metric, &cfg.kmeans), SCENE_OBJECT_LABEL),
        }],
        Some(boxes) => boxes
            .iter()
            .map(|b| ObjectOutcome {
                label: b.label.clone(),
                detection: Some(b.clone()),
                result: measure(segment_bbox(metric, b, &cfg.kmeans), &b.label),
            })
            .collect(),
    }
}
