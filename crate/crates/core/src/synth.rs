//! Synthetic RGB-D captures with analytic ground truth.
//!
//! A scene is a fronto-parallel background plane plus axis-aligned
//! rectangular objects facing the color camera. Depth is sampled on a
//! regular pixel grid, back-projected along each pixel's ray, optionally
//! perturbed along the ray and randomly dropped, then expressed in the depth
//! camera frame so that the full alignment path is exercised.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bundle::FrameBundle;
use crate::camera::{
    apply_pose, compose, interpolate_pose, relative_pose, CameraIntrinsics, MetricPoint, RigidPose,
};
use crate::error::{Error, Result};
use crate::ppm::RgbImage;
use crate::segment::DetectionBox;

pub const BACKGROUND_COLOR: [u8; 3] = [96, 96, 104];

const OBJECT_COLORS: [[u8; 3]; 6] = [
    [200, 60, 50],
    [60, 160, 70],
    [50, 90, 200],
    [220, 180, 40],
    [150, 60, 170],
    [40, 170, 180],
];

/// Axis-aligned rectangle facing the camera, in color-camera coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub label: String,
    pub center_x: f64,
    pub center_y: f64,
    pub width: f64,
    pub height: f64,
    /// Distance from the camera along the optical axis.
    pub depth: f64,
}

impl SceneObject {
    pub fn new(label: impl Into<String>, center: (f64, f64), size: (f64, f64), depth: f64) -> Self {
        SceneObject {
            label: label.into(),
            center_x: center.0,
            center_y: center.1,
            width: size.0,
            height: size.1,
            depth,
        }
    }

    /// Whether the normalized ray `(u, v, 1)` hits this rectangle.
    fn hit(&self, u: f64, v: f64) -> bool {
        (u * self.depth - self.center_x).abs() <= 0.5 * self.width
            && (v * self.depth - self.center_y).abs() <= 0.5 * self.height
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub intrinsics: CameraIntrinsics,
    pub background_depth: f64,
    pub objects: Vec<SceneObject>,
    /// Pixels between depth samples along each axis.
    pub sample_stride: u32,
    /// Fraction of grid samples removed.
    pub dropout: f64,
    /// Standard deviation of range noise, meters.
    pub noise_sigma: f64,
    pub rng_seed: u64,
    /// Render every pixel white, objects included.
    pub white_rgb: bool,
    /// Emit one detection per visible object (footprint bbox plus margin).
    pub emit_detections: bool,
    pub detection_margin: f64,
    /// Device-to-world poses of the color camera.
    pub trajectory: Vec<RigidPose>,
    pub depth_to_color: RigidPose,
    pub t_rgb: f64,
    pub t_depth: f64,
}

impl SceneSpec {
    /// 1920x1080 capture with one data point per 10x10 pixels, a moving
    /// device (depth lagging color by 0.1 s) and a 12.5 mm depth/color baseline.
    pub fn new(objects: Vec<SceneObject>) -> Self {
        let intrinsics = CameraIntrinsics::new(1920, 1080, 1400.0, 1400.0, 960.0, 540.0)
            .expect("default intrinsics are valid");
        SceneSpec {
            intrinsics,
            background_depth: 1.3,
            objects,
            sample_stride: 10,
            dropout: 0.0,
            noise_sigma: 0.0,
            rng_seed: 0,
            white_rgb: false,
            emit_detections: false,
            detection_margin: 20.0,
            trajectory: default_trajectory(),
            depth_to_color: RigidPose::new(
                0.0,
                [0.99999, 0.002, -0.001, 0.0015],
                [0.0125, 0.001, -0.002],
            )
            .expect("valid extrinsic"),
            t_rgb: 0.1,
            t_depth: 0.2,
        }
    }

    /// Same layout at a smaller resolution (focal length scaled with width).
    pub fn with_resolution(mut self, width: u32, height: u32) -> Self {
        let scale = f64::from(width) / f64::from(self.intrinsics.width);
        self.intrinsics = CameraIntrinsics {
            width,
            height,
            fx: self.intrinsics.fx * scale,
            fy: self.intrinsics.fy * scale,
            cx: f64::from(width) / 2.0,
            cy: f64::from(height) / 2.0,
            ..self.intrinsics
        };
        self
    }

    /// Static device with identity extrinsics.
    pub fn without_motion(mut self) -> Self {
        self.trajectory = vec![RigidPose::identity()];
        self.depth_to_color = RigidPose::identity();
        self.t_rgb = 0.0;
        self.t_depth = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::SpecInvalid(m));
        self.intrinsics
            .validate()
            .map_err(|e| Error::SpecInvalid(format!("intrinsics: {e}")))?;
        if !(self.background_depth > 0.0 && self.background_depth.is_finite()) {
            return invalid("background depth must be positive".into());
        }
        for o in &self.objects {
            if !(o.depth > 0.0 && o.depth < self.background_depth) {
                return invalid(format!(
                    "object `{}` must lie between camera and background",
                    o.label
                ));
            }
            if !(o.width > 0.0 && o.height > 0.0)
                || !o.center_x.is_finite()
                || !o.center_y.is_finite()
            {
                return invalid(format!(
                    "object `{}` needs positive size and finite center",
                    o.label
                ));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return invalid(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return invalid("noise_sigma must be >= 0".into());
        }
        if self.sample_stride == 0 {
            return invalid("sample_stride must be >= 1".into());
        }
        if self.trajectory.is_empty()
            || self
                .trajectory
                .windows(2)
                .any(|w| w[1].timestamp <= w[0].timestamp)
        {
            return invalid("trajectory must be non-empty with increasing timestamps".into());
        }
        Ok(())
    }
}

fn default_trajectory() -> Vec<RigidPose> {
    let pose = |t: f64, q: [f64; 4], tr: [f64; 3]| {
        RigidPose::new(t, q, tr).expect("valid trajectory pose")
    };
    vec![
        pose(0.0, [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0]),
        pose(0.2, [0.99998, 0.004, -0.003, 0.002], [0.012, -0.004, 0.003]),
        pose(0.4, [0.99992, 0.009, -0.005, 0.006], [0.025, -0.006, 0.004]),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectTruth {
    pub label: String,
    pub width: f64,
    pub height: f64,
    pub depth: f64,
    /// Visible pixels, row-major over the whole frame.
    pub footprint: Vec<bool>,
    pub pixel_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub width: usize,
    pub height: usize,
    pub objects: Vec<ObjectTruth>,
    /// Grid samples emitted into the cloud, as `(pixel x, pixel y)`.
    pub sample_pixels: Vec<(u32, u32)>,
}

/// Normalized ray `(u, v)` through a pixel, inverting the radial distortion
/// with Newton iterations.
pub fn pixel_ray(intr: &CameraIntrinsics, x: f64, y: f64) -> (f64, f64) {
    let xd = (x - intr.cx) / intr.fx;
    let yd = (y - intr.cy) / intr.fy;
    if intr.is_undistorted() {
        return (xd, yd);
    }
    let rd = xd.hypot(yd);
    if rd < 1e-15 {
        return (xd, yd);
    }
    let mut ru = rd;
    for _ in 0..50 {
        let r2 = ru * ru;
        let f = intr.distort_radius(ru) - rd;
        let df = 1.0 + r2 * (3.0 * intr.k1 + r2 * (5.0 * intr.k2 + r2 * 7.0 * intr.k3));
        let step = f / df;
        ru -= step;
        if step.abs() < 1e-16 {
            break;
        }
    }
    (xd * ru / rd, yd * ru / rd)
}

/// Index of the nearest object whose rectangle the ray hits.
fn first_hit(objects: &[SceneObject], order: &[usize], u: f64, v: f64) -> Option<usize> {
    order.iter().copied().find(|&i| objects[i].hit(u, v))
}

/// Transform taking color-frame points at `t_rgb` into the depth frame at `t_depth`.
pub fn color_to_depth(spec: &SceneSpec) -> Result<RigidPose> {
    let at_rgb = interpolate_pose(&spec.trajectory, spec.t_rgb)?;
    let at_depth = interpolate_pose(&spec.trajectory, spec.t_depth)?;
    let depth_to_color_now = compose(&relative_pose(&at_rgb, &at_depth), &spec.depth_to_color);
    Ok(depth_to_color_now.inverse())
}

pub fn generate(spec: &SceneSpec) -> Result<(FrameBundle, GroundTruth)> {
    spec.validate()?;
    let intr = &spec.intrinsics;
    let (w, h) = (intr.width as usize, intr.height as usize);
    let mut order: Vec<usize> = (0..spec.objects.len()).collect();
    order.sort_by(|&a, &b| spec.objects[a].depth.total_cmp(&spec.objects[b].depth));

    // rendering and footprints
    let mut rgb = RgbImage::new(w, h);
    let mut owner: Vec<Option<usize>> = vec![None; w * h];
    for y in 0..h {
        for x in 0..w {
            let (u, v) = pixel_ray(intr, x as f64, y as f64);
            let hit = first_hit(&spec.objects, &order, u, v);
            owner[y * w + x] = hit;
            let color = if spec.white_rgb {
                [255, 255, 255]
            } else {
                hit.map_or(BACKGROUND_COLOR, |i| OBJECT_COLORS[i % OBJECT_COLORS.len()])
            };
            rgb.put(x, y, color);
        }
    }

    let to_depth = color_to_depth(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let stride = spec.sample_stride as usize;
    let mut cloud = Vec::new();
    let mut sample_pixels = Vec::new();
    for y in (0..h).step_by(stride) {
        for x in (0..w).step_by(stride) {
            // draw both variates for every sample so the stream is layout-stable
            let keep: f64 = rng.random();
            let noise: f64 = rng.sample(StandardNormal);
            if keep < spec.dropout {
                continue;
            }
            let (u, v) = pixel_ray(intr, x as f64, y as f64);
            let surface = owner[y * w + x].map_or(spec.background_depth, |i| spec.objects[i].depth);
            let z = surface + spec.noise_sigma * noise;
            if z <= 0.0 {
                continue;
            }
            let in_depth = apply_pose(&to_depth, MetricPoint::new(u * z, v * z, z));
            if !(in_depth.z > 0.0) {
                continue;
            }
            cloud.push(in_depth);
            sample_pixels.push((x as u32, y as u32));
        }
    }

    let objects: Vec<ObjectTruth> = spec
        .objects
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let footprint: Vec<bool> = owner.iter().map(|&own| own == Some(i)).collect();
            let pixel_count = footprint.iter().filter(|&&f| f).count();
            ObjectTruth {
                label: o.label.clone(),
                width: o.width,
                height: o.height,
                depth: o.depth,
                footprint,
                pixel_count,
            }
        })
        .collect();

    let detections = spec.emit_detections.then(|| {
        objects
            .iter()
            .filter_map(|o| footprint_bbox(&o.footprint, w).map(|b| (o, b)))
            .map(|(o, (x0, y0, x1, y1))| {
                let m = spec.detection_margin;
                DetectionBox::new(
                    o.label.clone(),
                    0.9,
                    (x0 as f64 - m).max(0.0),
                    (y0 as f64 - m).max(0.0),
                    (x1 as f64 + 1.0 + m).min(w as f64),
                    (y1 as f64 + 1.0 + m).min(h as f64),
                )
            })
            .collect()
    });

    let bundle = FrameBundle {
        intrinsics: *intr,
        rgb,
        cloud,
        trajectory: spec.trajectory.clone(),
        depth_to_color: spec.depth_to_color,
        t_rgb: spec.t_rgb,
        t_depth: spec.t_depth,
        detections,
        dropped_cloud_rows: 0,
    };
    let truth = GroundTruth {
        width: w,
        height: h,
        objects,
        sample_pixels,
    };
    Ok((bundle, truth))
}

/// Inclusive pixel bounds `(x0, y0, x1, y1)` of a full-frame mask.
pub fn footprint_bbox(mask: &[bool], width: usize) -> Option<(usize, usize, usize, usize)> {
    let mut bounds: Option<(usize, usize, usize, usize)> = None;
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        let (x, y) = (i % width, i / width);
        bounds = Some(match bounds {
            None => (x, y, x, y),
            Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
        });
    }
    bounds
}
