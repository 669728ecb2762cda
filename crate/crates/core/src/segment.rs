//! Depth-only segmentation.
//!
//! Pixels are clustered on their scalar depth with Lloyd's algorithm. When the
//! region contains pixels without depth (stored as 0) three clusters are used
//! (no-data, foreground, background) and the middle one is the foreground;
//! otherwise two clusters are used and the nearer one is the foreground.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::densify::MetricImage;
use crate::error::{Error, Result};

const SUM_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthSample {
    pub x: u32,
    pub y: u32,
    /// Meters; 0 means no data.
    pub depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub max_iter: usize,
    /// Convergence threshold on center movement, in meters. Depths closer
    /// than this are also considered indistinct.
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams {
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub k: usize,
    /// Cluster depths in meters, ascending.
    pub centers: Vec<f64>,
    /// Cluster index per input sample.
    pub assignment: Vec<u8>,
    pub iterations: usize,
    /// Within-cluster sum of squares after each center update.
    pub sse_history: Vec<f64>,
}

impl ClusterModel {
    pub fn sse(&self) -> f64 {
        self.sse_history.last().copied().unwrap_or(0.0)
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignment {
            sizes[a as usize] += 1;
        }
        sizes
    }
}

#[inline]
fn nearest_center(v: f64, centers: &[f64]) -> u8 {
    let mut best = 0;
    let mut best_d = (v - centers[0]).abs();
    for (i, &c) in centers.iter().enumerate().skip(1) {
        let d = (v - c).abs();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best as u8
}

/// Pairwise reduction over fixed-size chunk partials, so the result does
/// not depend on thread scheduling.
fn pairwise_sum(mut parts: Vec<[f64; 4]>, k: usize) -> [f64; 4] {
    if parts.is_empty() {
        return [0.0; 4];
    }
    while parts.len() > 1 {
        parts = parts
            .chunks(2)
            .map(|pair| {
                let mut acc = pair[0];
                if let Some(other) = pair.get(1) {
                    for c in 0..k {
                        acc[c] += other[c];
                    }
                }
                acc
            })
            .collect();
    }
    parts[0]
}

/// Per-cluster (sum, count) with the given assignment.
fn cluster_sums(values: &[f64], assignment: &[u8], k: usize) -> ([f64; 4], [f64; 4]) {
    let partials: Vec<([f64; 4], [f64; 4])> = values
        .par_chunks(SUM_CHUNK)
        .zip(assignment.par_chunks(SUM_CHUNK))
        .map(|(vs, asg)| {
            let mut sums = [0.0; 4];
            let mut counts = [0.0; 4];
            for (&v, &a) in vs.iter().zip(asg) {
                sums[a as usize] += v;
                counts[a as usize] += 1.0;
            }
            (sums, counts)
        })
        .collect();
    let (sums, counts): (Vec<_>, Vec<_>) = partials.into_iter().unzip();
    (pairwise_sum(sums, k), pairwise_sum(counts, k))
}

fn sse(values: &[f64], assignment: &[u8], centers: &[f64]) -> f64 {
    let partials: Vec<[f64; 4]> = values
        .par_chunks(SUM_CHUNK)
        .zip(assignment.par_chunks(SUM_CHUNK))
        .map(|(vs, asg)| {
            let mut acc = 0.0;
            for (&v, &a) in vs.iter().zip(asg) {
                let d = v - centers[a as usize];
                acc += d * d;
            }
            [acc, 0.0, 0.0, 0.0]
        })
        .collect();
    pairwise_sum(partials, 1)[0]
}

fn assign(values: &[f64], centers: &[f64], out: &mut [u8]) {
    out.par_chunks_mut(SUM_CHUNK)
        .zip(values.par_chunks(SUM_CHUNK))
        .for_each(|(asg, vs)| {
            for (a, &v) in asg.iter_mut().zip(vs) {
                *a = nearest_center(v, centers);
            }
        });
}

const SEED_PERCENTILES: (f64, f64) = (0.01, 0.99);

/// Nearest-rank seed percentiles of `values`, if they differ by more than `tol`.
fn trimmed_extremes(mut values: Vec<f64>, tol: f64) -> Option<(f64, f64)> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let rank = |p: f64| ((p * n as f64).ceil() as usize).clamp(1, n) - 1;
    let (_, &mut lo, _) = values.select_nth_unstable_by(rank(SEED_PERCENTILES.0), f64::total_cmp);
    let (_, &mut hi, _) = values.select_nth_unstable_by(rank(SEED_PERCENTILES.1), f64::total_cmp);
    (hi - lo > tol).then_some((lo, hi))
}

/// Lloyd's algorithm on scalar depths with deterministic seeding.
///
/// For `k = 2` the seeds are the 1st and 99th nearest-rank percentiles of
/// the values. For `k = 3` the lowest seed is the minimum and the other two
/// are those percentiles of the values above it; with zero-depth pixels
/// present that is `(0, p1, p99)` of the nonzero depths. Trimming keeps a
/// handful of stray depths from claiming a cluster of their own; below 100
/// values the percentiles are simply the extremes. Values closer than
/// `params.tol` count as the same depth when checking for at least `k`
/// distinct values.
pub fn kmeans_scalar(values: &[f64], k: usize, params: &KMeansParams) -> Result<ClusterModel> {
    if !(k == 2 || k == 3) {
        return Err(Error::invalid("k", format!("must be 2 or 3, got {k}")));
    }
    if params.max_iter == 0 {
        return Err(Error::invalid("max_iter", "must be > 0"));
    }
    if !(params.tol >= 0.0) {
        return Err(Error::invalid("tol", "must be >= 0"));
    }
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid("depth", "depths must be finite and >= 0"));
    }
    let tol = params.tol;
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if values.is_empty() || max - min <= tol {
        return Err(Error::DegenerateInput(format!(
            "fewer than {k} distinct depths"
        )));
    }
    let mut centers = if k == 2 {
        let (lo, hi) = trimmed_extremes(values.to_vec(), tol).unwrap_or((min, max));
        vec![lo, hi]
    } else {
        let upper: Vec<f64> = values.iter().copied().filter(|&v| v - min > tol).collect();
        let (lo, hi) = match trimmed_extremes(upper, tol) {
            Some(seeds) => seeds,
            None => {
                let middle = values
                    .iter()
                    .copied()
                    .filter(|&v| v - min > tol && max - v > tol)
                    .fold(f64::INFINITY, f64::min);
                if !middle.is_finite() {
                    return Err(Error::DegenerateInput(format!(
                        "fewer than {k} distinct depths"
                    )));
                }
                (middle, max)
            }
        };
        vec![min, lo, hi]
    };

    let mut assignment = vec![0u8; values.len()];
    let mut sse_history = Vec::new();
    let mut iterations = 0;
    while iterations < params.max_iter {
        iterations += 1;
        assign(values, &centers, &mut assignment);
        let (sums, counts) = cluster_sums(values, &assignment, k);
        let updated: Vec<f64> = (0..k)
            .map(|c| {
                if counts[c] > 0.0 {
                    sums[c] / counts[c]
                } else {
                    centers[c]
                }
            })
            .collect();
        sse_history.push(sse(values, &assignment, &updated));
        let movement = centers
            .iter()
            .zip(&updated)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        centers = updated;
        if movement < tol {
            break;
        }
    }

    // relabel to ascending centers and make the assignment consistent with them
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]));
    let centers: Vec<f64> = order.iter().map(|&i| centers[i]).collect();
    assign(values, &centers, &mut assignment);
    let final_sse = sse(values, &assignment, &centers);
    if sse_history.last().is_none_or(|&last| final_sse != last) {
        sse_history.push(final_sse);
    }
    Ok(ClusterModel {
        k,
        centers,
        assignment,
        iterations,
        sse_history,
    })
}

pub fn kmeans_depth(
    samples: &[DepthSample],
    k: usize,
    params: &KMeansParams,
) -> Result<ClusterModel> {
    let depths: Vec<f64> = samples.iter().map(|s| s.depth).collect();
    kmeans_scalar(&depths, k, params)
}

/// Index of the foreground cluster: the second-nearest center when a
/// no-data cluster exists (`k = 3`), the nearest otherwise.
pub fn select_foreground(model: &ClusterModel) -> usize {
    if model.k == 3 {
        1
    } else {
        0
    }
}

/// Object detection supplied by an external detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionBox {
    pub label: String,
    pub score: f64,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl DetectionBox {
    pub fn new(
        label: impl Into<String>,
        score: f64,
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
    ) -> Self {
        DetectionBox {
            label: label.into(),
            score,
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    /// Checks ordering and score range; image intersection is checked when
    /// the box is clipped.
    pub fn validate(&self) -> Result<()> {
        let finite = [self.score, self.x_min, self.y_min, self.x_max, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid(
                "detection",
                "coordinates and score must be finite",
            ));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::invalid(
                "score",
                format!("must lie in [0, 1], got {}", self.score),
            ));
        }
        if !(self.x_min < self.x_max) {
            return Err(Error::invalid("x_min", "must be < x_max"));
        }
        if !(self.y_min < self.y_max) {
            return Err(Error::invalid("y_min", "must be < y_max"));
        }
        Ok(())
    }

    /// Integer pixel region covered by the box, clipped to the image.
    pub fn clip(&self, width: usize, height: usize) -> Result<Region> {
        self.validate()?;
        let x0 = self.x_min.floor().max(0.0);
        let y0 = self.y_min.floor().max(0.0);
        let x1 = self.x_max.ceil().min(width as f64);
        let y1 = self.y_max.ceil().min(height as f64);
        if x0 >= x1 || y0 >= y1 {
            return Err(Error::EmptyRegion);
        }
        Ok(Region {
            x: x0 as usize,
            y: y0 as usize,
            width: (x1 - x0) as usize,
            height: (y1 - y0) as usize,
        })
    }
}

/// Rectangle of whole pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Region {
    pub fn full(width: usize, height: usize) -> Self {
        Region {
            x: 0,
            y: 0,
            width,
            height,
        }
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.width && y >= self.y && y < self.y + self.height
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMask {
    pub region: Region,
    /// Row-major over `region`.
    flags: Vec<bool>,
    count: usize,
    /// Cluster centers that produced the mask, ascending.
    pub centers: Vec<f64>,
    pub foreground_cluster: usize,
}

impl SegmentMask {
    pub fn from_flags(region: Region, flags: Vec<bool>) -> Result<Self> {
        if flags.len() != region.area() {
            return Err(Error::invalid("flags", "length must equal region area"));
        }
        let count = flags.iter().filter(|&&f| f).count();
        Ok(SegmentMask {
            region,
            flags,
            count,
            centers: Vec::new(),
            foreground_cluster: 0,
        })
    }

    pub fn foreground_count(&self) -> usize {
        self.count
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    /// Foreground test in image coordinates.
    pub fn is_foreground(&self, x: usize, y: usize) -> bool {
        self.region.contains(x, y)
            && self.flags[(y - self.region.y) * self.region.width + (x - self.region.x)]
    }

    /// Image coordinates of every foreground pixel, row-major.
    pub fn foreground_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let r = self.region;
        self.flags
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(move |(i, _)| (r.x + i % r.width, r.y + i / r.width))
    }
}

/// Clusters the depths inside `region` and returns the foreground mask.
pub fn segment_region(
    depth: &MetricImage,
    region: Region,
    params: &KMeansParams,
) -> Result<SegmentMask> {
    if region.area() == 0
        || region.x + region.width > depth.width()
        || region.y + region.height > depth.height()
    {
        return Err(Error::EmptyRegion);
    }
    let mut values = Vec::with_capacity(region.area());
    for y in region.y..region.y + region.height {
        for x in region.x..region.x + region.width {
            values.push(depth.get(x, y).z);
        }
    }
    let k = if values.contains(&0.0) { 3 } else { 2 };
    let model = kmeans_scalar(&values, k, params)?;
    let fg = select_foreground(&model) as u8;
    let flags: Vec<bool> = model
        .assignment
        .iter()
        .zip(&values)
        .map(|(&a, &v)| a == fg && v > 0.0)
        .collect();
    let count = flags.iter().filter(|&&f| f).count();
    Ok(SegmentMask {
        region,
        flags,
        count,
        centers: model.centers,
        foreground_cluster: fg as usize,
    })
}

/// Whole-frame segmentation.
pub fn segment_frame(depth: &MetricImage, params: &KMeansParams) -> Result<SegmentMask> {
    segment_region(depth, Region::full(depth.width(), depth.height()), params)
}

/// Segmentation restricted to a detection box clipped to the image.
pub fn segment_bbox(
    depth: &MetricImage,
    detection: &DetectionBox,
    params: &KMeansParams,
) -> Result<SegmentMask> {
    let region = detection.clip(depth.width(), depth.height())?;
    segment_region(depth, region, params)
}
