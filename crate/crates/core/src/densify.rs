//! Projection of a depth-frame point cloud into the color image and dense
//! per-pixel metric reconstruction.
//!
//! Two densifiers are provided. Nearest-neighbor copies the metric point of
//! the closest projected sample. Bilinear finds the closest sample in each
//! of the four quadrants around the pixel, interpolates along the upper pair
//! (`p0`, `p1`) and lower pair (`p3`, `p2`) to the auxiliary points `m` and
//! `n` on the pixel's column, then interpolates between `m` and `n`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{apply_pose, project, CameraIntrinsics, MetricPoint, PixelCoord, RigidPose};
use crate::error::{Error, Result};
use crate::spatial::{IndexedPoint, KdTree, NeighborIndex, QuadrantNeighbors};

/// Horizontal separation below which a quadrant pair is treated as collinear
/// with the query column and the stencil is abandoned for inverse-distance weighting.
pub const COLLINEAR_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseEntry {
    pub pixel: PixelCoord,
    pub point: MetricPoint,
}

/// Projected samples, each tied to a metric point in the color-camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePixelCloud {
    entries: Vec<SparseEntry>,
    intrinsics: CameraIntrinsics,
}

impl SparsePixelCloud {
    pub fn new(intrinsics: CameraIntrinsics, entries: Vec<SparseEntry>) -> Result<Self> {
        intrinsics.validate()?;
        for (i, e) in entries.iter().enumerate() {
            if !intrinsics.contains(e.pixel) {
                return Err(Error::invalid(
                    "entries",
                    format!("entry {i} lies outside the image"),
                ));
            }
            if !(e.point.z > 0.0) || !e.point.is_finite() {
                return Err(Error::invalid(
                    "entries",
                    format!("entry {i} has invalid metric point"),
                ));
            }
        }
        Ok(SparsePixelCloud {
            entries,
            intrinsics,
        })
    }

    pub fn entries(&self) -> &[SparseEntry] {
        &self.entries
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Pixel positions tagged with their entry index, ready for indexing.
    pub fn indexed_points(&self) -> Vec<IndexedPoint> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| IndexedPoint {
                position: e.pixel,
                payload_id: i,
            })
            .collect()
    }

    pub fn build_index(&self) -> KdTree {
        KdTree::build(self.indexed_points())
    }
}

/// Counts of what happened to each input point during projection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionStats {
    pub input: usize,
    pub kept: usize,
    pub behind_camera: usize,
    pub out_of_frame: usize,
    /// Dropped because a closer point landed on the same integer pixel.
    pub occluded: usize,
}

/// Transforms depth-frame points into the color frame and projects them.
///
/// Points behind the camera or outside the image are dropped. When several
/// points fall on the same integer pixel the one with the smallest `Z` wins
/// (first in input order on equal `Z`). Kept entries preserve input order.
pub fn project_cloud(
    cloud: &[MetricPoint],
    depth_to_color: &RigidPose,
    intr: &CameraIntrinsics,
) -> Result<(SparsePixelCloud, ProjectionStats)> {
    intr.validate()?;
    let mut stats = ProjectionStats {
        input: cloud.len(),
        ..Default::default()
    };
    let mut candidates: Vec<(usize, SparseEntry)> = Vec::with_capacity(cloud.len());
    for &p in cloud {
        let point = apply_pose(depth_to_color, p);
        if !(point.z > 0.0) || !point.is_finite() {
            stats.behind_camera += 1;
            continue;
        }
        let pixel = project(point, intr)?;
        if !intr.contains(pixel) {
            stats.out_of_frame += 1;
            continue;
        }
        let bucket = pixel.y.floor() as usize * intr.width as usize + pixel.x.floor() as usize;
        candidates.push((bucket, SparseEntry { pixel, point }));
    }

    // winner per bucket: smallest Z, then earliest
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        candidates[a]
            .0
            .cmp(&candidates[b].0)
            .then(candidates[a].1.point.z.total_cmp(&candidates[b].1.point.z))
            .then(a.cmp(&b))
    });
    let mut keep = vec![false; candidates.len()];
    let mut last_bucket = None;
    for &i in &order {
        if last_bucket != Some(candidates[i].0) {
            keep[i] = true;
            last_bucket = Some(candidates[i].0);
        }
    }
    let entries: Vec<SparseEntry> = candidates
        .iter()
        .zip(&keep)
        .filter_map(|((_, e), &k)| k.then_some(*e))
        .collect();
    stats.occluded = candidates.len() - entries.len();
    stats.kept = entries.len();
    Ok((
        SparsePixelCloud {
            entries,
            intrinsics: *intr,
        },
        stats,
    ))
}

/// Dense raster of metric points; `(0, 0, 0)` marks "no data".
#[derive(Debug, Clone, PartialEq)]
pub struct MetricImage {
    width: usize,
    height: usize,
    data: Vec<MetricPoint>,
}

impl MetricImage {
    pub fn new(width: usize, height: usize) -> Self {
        MetricImage {
            width,
            height,
            data: vec![MetricPoint::ZERO; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<MetricPoint>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(
                "data",
                format!("expected {} pixels, got {}", width * height, data.len()),
            ));
        }
        if let Some(i) = data.iter().position(|p| !p.is_empty() && !(p.z > 0.0)) {
            return Err(Error::invalid(
                "data",
                format!("pixel {i} is non-empty with Z <= 0"),
            ));
        }
        Ok(MetricImage {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> MetricPoint {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, p: MetricPoint) {
        self.data[y * self.width + x] = p;
    }

    pub fn pixels(&self) -> &[MetricPoint] {
        &self.data
    }

    /// Per-pixel depth in meters (0 where there is no data).
    pub fn depths(&self) -> Vec<f64> {
        self.data.iter().map(|p| p.z).collect()
    }

    pub fn filled(&self) -> usize {
        self.data.iter().filter(|p| !p.is_empty()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensifyMethod {
    NearestNeighbor,
    Bilinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensifyConfig {
    pub method: DensifyMethod,
    /// Neighbors whose depth differs from the neighbor median by more than
    /// this many meters are ignored by the bilinear stencil.
    pub edge_threshold: Option<f64>,
    /// Pixels farther than this from every sample stay empty.
    pub max_radius: Option<f64>,
}

impl DensifyConfig {
    pub fn nearest() -> Self {
        DensifyConfig {
            method: DensifyMethod::NearestNeighbor,
            edge_threshold: None,
            max_radius: None,
        }
    }

    pub fn bilinear() -> Self {
        DensifyConfig {
            method: DensifyMethod::Bilinear,
            ..Self::nearest()
        }
    }

    pub fn with_edge_threshold(mut self, meters: f64) -> Self {
        self.edge_threshold = Some(meters);
        self
    }

    pub fn with_max_radius(mut self, pixels: f64) -> Self {
        self.max_radius = Some(pixels);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.edge_threshold {
            if !(t > 0.0) {
                return Err(Error::invalid("edge_threshold", "must be > 0"));
            }
        }
        if let Some(r) = self.max_radius {
            if !(r > 0.0) {
                return Err(Error::invalid("max_radius", "must be > 0"));
            }
        }
        Ok(())
    }
}

/// One projected sample participating in a stencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilCorner {
    pub pixel: PixelCoord,
    pub point: MetricPoint,
}

/// Intermediate quantities of the four-quadrant interpolation at one pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilinearStencil {
    pub query: PixelCoord,
    pub corners: [StencilCorner; 4],
    /// Auxiliary point on the `p0`-`p1` segment at the query column.
    pub m: PixelCoord,
    /// Auxiliary point on the `p3`-`p2` segment at the query column.
    pub n: PixelCoord,
    /// `d[i]`: distance from `m` (i = 0, 1) or `n` (i = 2, 3) to corner `i`.
    pub d: [f64; 4],
    pub d_m: f64,
    pub d_n: f64,
    pub value_m: MetricPoint,
    pub value_n: MetricPoint,
}

impl BilinearStencil {
    /// `None` when either corner pair is vertically aligned with the query.
    pub fn compute(query: PixelCoord, corners: [StencilCorner; 4]) -> Option<Self> {
        let [c0, c1, c2, c3] = corners;
        let (p0, p1, p2, p3) = (c0.pixel, c1.pixel, c2.pixel, c3.pixel);
        if (p1.x - p0.x).abs() < COLLINEAR_EPS || (p2.x - p3.x).abs() < COLLINEAR_EPS {
            return None;
        }
        let x = query.x;
        let m = PixelCoord::new(x, p0.y + (x - p0.x) * (p1.y - p0.y) / (p1.x - p0.x));
        let n = PixelCoord::new(x, p3.y + (x - p3.x) * (p2.y - p3.y) / (p2.x - p3.x));
        let d = [
            m.distance(&p0),
            m.distance(&p1),
            n.distance(&p2),
            n.distance(&p3),
        ];
        let value_m = blend(c0.point, c1.point, d[0], d[1]);
        let value_n = blend(c3.point, c2.point, d[3], d[2]);
        let d_m = query.distance(&m);
        let d_n = query.distance(&n);
        Some(BilinearStencil {
            query,
            corners,
            m,
            n,
            d,
            d_m,
            d_n,
            value_m,
            value_n,
        })
    }

    pub fn value(&self) -> MetricPoint {
        blend(self.value_m, self.value_n, self.d_m, self.d_n)
    }
}

/// `(d_b * a + d_a * b) / (d_a + d_b)`, where `d_a` is the distance to `a`.
///
/// Evaluated as a clamped lerp so equal endpoints reproduce exactly and the
/// result never leaves `[min(a, b), max(a, b)]` componentwise.
fn blend(a: MetricPoint, b: MetricPoint, d_a: f64, d_b: f64) -> MetricPoint {
    let total = d_a + d_b;
    let w = if total > 0.0 { d_a / total } else { 0.5 };
    let lerp = |u: f64, v: f64| (u + w * (v - u)).clamp(u.min(v), u.max(v));
    MetricPoint::new(lerp(a.x, b.x), lerp(a.y, b.y), lerp(a.z, b.z))
}

fn inverse_distance(corners: &[(StencilCorner, f64)]) -> MetricPoint {
    let mut acc = [0.0; 3];
    let mut total = 0.0;
    for (c, d) in corners {
        let w = 1.0 / d;
        acc[0] += w * c.point.x;
        acc[1] += w * c.point.y;
        acc[2] += w * c.point.z;
        total += w;
    }
    MetricPoint::new(acc[0] / total, acc[1] / total, acc[2] / total)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn nearest_of_quadrants(quads: &QuadrantNeighbors) -> Option<(usize, f64)> {
    if let Some(hit) = quads.exact_hit {
        return Some((hit.payload_id, 0.0));
    }
    quads
        .quadrants
        .iter()
        .flatten()
        .map(|n| (n.point.payload_id, n.distance))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
}

/// Densified value of a single pixel using any neighbor index.
pub fn densify_pixel<I: NeighborIndex + ?Sized>(
    index: &I,
    sparse: &SparsePixelCloud,
    cfg: &DensifyConfig,
    q: PixelCoord,
) -> MetricPoint {
    let entries = sparse.entries();
    let within = |d: f64| cfg.max_radius.is_none_or(|r| d <= r);
    match cfg.method {
        DensifyMethod::NearestNeighbor => match index.nearest(q) {
            Some(n) if within(n.distance) => entries[n.point.payload_id].point,
            _ => MetricPoint::ZERO,
        },
        DensifyMethod::Bilinear => {
            let quads = index.nearest_per_quadrant(q);
            if let Some(hit) = quads.exact_hit {
                return entries[hit.payload_id].point;
            }
            let mut corners: [Option<(StencilCorner, f64)>; 4] = quads.quadrants.map(|slot| {
                slot.filter(|n| within(n.distance)).map(|n| {
                    let e = entries[n.point.payload_id];
                    (
                        StencilCorner {
                            pixel: e.pixel,
                            point: e.point,
                        },
                        n.distance,
                    )
                })
            });
            if let Some(threshold) = cfg.edge_threshold {
                let mut zs: Vec<f64> = corners.iter().flatten().map(|(c, _)| c.point.z).collect();
                if !zs.is_empty() {
                    let med = median(&mut zs);
                    for slot in corners.iter_mut() {
                        if slot.is_some_and(|(c, _)| (c.point.z - med).abs() > threshold) {
                            *slot = None;
                        }
                    }
                }
            }
            if let [Some(a), Some(b), Some(c), Some(d)] = corners {
                let stencil = BilinearStencil::compute(q, [a.0, b.0, c.0, d.0]);
                return match stencil {
                    Some(s) => s.value(),
                    None => inverse_distance(&[a, b, c, d]),
                };
            }
            match nearest_of_quadrants(&quads) {
                Some((id, d)) if within(d) => entries[id].point,
                _ => MetricPoint::ZERO,
            }
        }
    }
}

/// Densifies every pixel of the image against `index`, rows in parallel.
pub fn densify_with<I: NeighborIndex + ?Sized>(
    index: &I,
    sparse: &SparsePixelCloud,
    cfg: &DensifyConfig,
) -> Result<MetricImage> {
    cfg.validate()?;
    if sparse.is_empty() {
        return Err(Error::EmptySparseCloud);
    }
    let width = sparse.intrinsics().width as usize;
    let height = sparse.intrinsics().height as usize;
    let mut image = MetricImage::new(width, height);
    image
        .data
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(y, row)| {
            for (x, out) in row.iter_mut().enumerate() {
                *out = densify_pixel(index, sparse, cfg, PixelCoord::new(x as f64, y as f64));
            }
        });
    Ok(image)
}

/// Nearest-neighbor densification; `cfg.method` is ignored.
pub fn densify_nearest(sparse: &SparsePixelCloud, cfg: &DensifyConfig) -> Result<MetricImage> {
    let cfg = DensifyConfig {
        method: DensifyMethod::NearestNeighbor,
        ..*cfg
    };
    densify_with(&sparse.build_index(), sparse, &cfg)
}

/// Four-quadrant bilinear densification; `cfg.method` is ignored.
pub fn densify_bilinear(sparse: &SparsePixelCloud, cfg: &DensifyConfig) -> Result<MetricImage> {
    let cfg = DensifyConfig {
        method: DensifyMethod::Bilinear,
        ..*cfg
    };
    densify_with(&sparse.build_index(), sparse, &cfg)
}

/// Dispatches on `cfg.method`.
pub fn densify(sparse: &SparsePixelCloud, cfg: &DensifyConfig) -> Result<MetricImage> {
    densify_with(&sparse.build_index(), sparse, cfg)
}
