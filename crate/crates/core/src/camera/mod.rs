//! Pinhole camera with three-coefficient radial distortion, plus rigid poses
//! used to bring depth-camera points into the color-camera frame.
//!
//! Pixel coordinates are continuous: `x` grows rightward, `y` downward, and
//! integer values address pixel centers. Metric points live in a camera frame
//! with `Z` along the optical axis (positive in front of the camera).

mod pose;

pub use pose::{apply_pose, compose, interpolate_pose, relative_pose, RigidPose};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this normalized radius the distortion factor `rd / ru` is replaced
/// by its analytic limit of 1.
pub const EPS_AXIS: f64 = 1e-12;

/// A point in meters in some camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl MetricPoint {
    pub const ZERO: MetricPoint = MetricPoint {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        MetricPoint { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// `(0, 0, 0)` marks a pixel without depth data.
    pub fn is_empty(&self) -> bool {
        self.x == 0.0 && self.y == 0.0 && self.z == 0.0
    }

    pub(crate) fn to_vector(self) -> nalgebra::Vector3<f64> {
        nalgebra::Vector3::new(self.x, self.y, self.z)
    }

    pub(crate) fn from_vector(v: nalgebra::Vector3<f64>) -> Self {
        MetricPoint::new(v.x, v.y, v.z)
    }
}

/// Continuous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PixelCoord {
    pub x: f64,
    pub y: f64,
}

impl PixelCoord {
    pub const fn new(x: f64, y: f64) -> Self {
        PixelCoord { x, y }
    }

    pub fn distance(&self, other: &PixelCoord) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Undistorted (`ru`) and distorted (`rd`) normalized radial distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialTerms {
    pub ru: f64,
    pub rd: f64,
}

/// Pinhole intrinsics with radial distortion coefficients `k1..k3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl CameraIntrinsics {
    /// Undistorted intrinsics; use [`CameraIntrinsics::with_distortion`] to add coefficients.
    pub fn new(width: u32, height: u32, fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        let intr = CameraIntrinsics {
            width,
            height,
            fx,
            fy,
            cx,
            cy,
            k1: 0.0,
            k2: 0.0,
            k3: 0.0,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn with_distortion(mut self, k1: f64, k2: f64, k3: f64) -> Result<Self> {
        self.k1 = k1;
        self.k2 = k2;
        self.k3 = k3;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 {
            return Err(Error::invalid("width", "must be > 0"));
        }
        if self.height == 0 {
            return Err(Error::invalid("height", "must be > 0"));
        }
        if !(self.fx > 0.0 && self.fx.is_finite()) {
            return Err(Error::invalid(
                "fx",
                format!("must be finite and > 0, got {}", self.fx),
            ));
        }
        if !(self.fy > 0.0 && self.fy.is_finite()) {
            return Err(Error::invalid(
                "fy",
                format!("must be finite and > 0, got {}", self.fy),
            ));
        }
        if !(self.cx >= 0.0 && self.cx < f64::from(self.width)) {
            return Err(Error::invalid(
                "cx",
                format!("must lie in [0, width), got {}", self.cx),
            ));
        }
        if !(self.cy >= 0.0 && self.cy < f64::from(self.height)) {
            return Err(Error::invalid(
                "cy",
                format!("must lie in [0, height), got {}", self.cy),
            ));
        }
        for (name, k) in [("k1", self.k1), ("k2", self.k2), ("k3", self.k3)] {
            if !k.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        Ok(())
    }

    pub fn is_undistorted(&self) -> bool {
        self.k1 == 0.0 && self.k2 == 0.0 && self.k3 == 0.0
    }

    /// `rd` as a function of `ru`.
    pub fn distort_radius(&self, ru: f64) -> f64 {
        let ru2 = ru * ru;
        let ru3 = ru2 * ru;
        let ru5 = ru3 * ru2;
        let ru7 = ru5 * ru2;
        ru + self.k1 * ru3 + self.k2 * ru5 + self.k3 * ru7
    }

    /// Whether a continuous pixel coordinate falls inside `[0, width) x [0, height)`.
    pub fn contains(&self, px: PixelCoord) -> bool {
        px.x >= 0.0 && px.x < f64::from(self.width) && px.y >= 0.0 && px.y < f64::from(self.height)
    }
}

pub fn radial_terms(p: MetricPoint, intr: &CameraIntrinsics) -> Result<RadialTerms> {
    if !(p.z > 0.0) {
        return Err(Error::NonPositiveDepth(p.z));
    }
    let ru = ((p.x * p.x + p.y * p.y) / (p.z * p.z)).sqrt();
    Ok(RadialTerms {
        ru,
        rd: intr.distort_radius(ru),
    })
}

/// Projects a color-camera-frame point onto the image plane.
pub fn project(p: MetricPoint, intr: &CameraIntrinsics) -> Result<PixelCoord> {
    let RadialTerms { ru, rd } = radial_terms(p, intr)?;
    let factor = if ru < EPS_AXIS { 1.0 } else { rd / ru };
    Ok(PixelCoord {
        x: p.x / p.z * intr.fx * factor + intr.cx,
        y: p.y / p.z * intr.fy * factor + intr.cy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hd(k1: f64) -> CameraIntrinsics {
        CameraIntrinsics::new(1920, 1080, 1000.0, 1000.0, 960.0, 540.0)
            .unwrap()
            .with_distortion(k1, 0.0, 0.0)
            .unwrap()
    }

    #[test]
    fn radial_terms_on_axis() {
        let intr = hd(0.3).with_distortion(0.3, -0.1, 0.05).unwrap();
        let t = radial_terms(MetricPoint::new(0.0, 0.0, 2.0), &intr).unwrap();
        assert_eq!(t, RadialTerms { ru: 0.0, rd: 0.0 });
    }

    #[test]
    fn radial_terms_zero_distortion_identity() {
        let t = radial_terms(MetricPoint::new(0.6, 0.8, 1.0), &hd(0.0)).unwrap();
        assert_eq!(t.ru, 1.0);
        assert_eq!(t.rd, 1.0);
    }

    #[test]
    fn radial_polynomial() {
        // ru = 0.1, k1 = 0.2 -> 0.1 + 0.2 * 0.001
        let t = radial_terms(MetricPoint::new(0.1, 0.0, 1.0), &hd(0.2)).unwrap();
        assert_close!(t.ru, 0.1, 1e-15);
        assert_close!(t.rd, 0.1002, 1e-15);
    }

    #[test]
    fn nonpositive_depth_rejected() {
        let intr = hd(0.0);
        assert_eq!(
            radial_terms(MetricPoint::new(1.0, 0.0, 0.0), &intr),
            Err(Error::NonPositiveDepth(0.0))
        );
        assert!(matches!(
            project(MetricPoint::new(1.0, 0.0, -1.0), &intr),
            Err(Error::NonPositiveDepth(_))
        ));
    }

    #[test]
    fn principal_point_projection() {
        let intr = hd(0.0).with_distortion(0.2, -0.3, 0.1).unwrap();
        let px = project(MetricPoint::new(0.0, 0.0, 1.5), &intr).unwrap();
        assert_eq!(px, PixelCoord::new(960.0, 540.0));
    }

    #[test]
    fn projection_reference_values() {
        let px = project(MetricPoint::new(0.5, 0.25, 2.0), &hd(0.0)).unwrap();
        assert_close!(px.x, 1210.0, 1e-9);
        assert_close!(px.y, 665.0, 1e-9);

        let px = project(MetricPoint::new(0.5, 0.25, 2.0), &hd(0.1)).unwrap();
        assert_close!(px.x, 1211.953125, 1e-9);
        assert_close!(px.y, 665.9765625, 1e-9);
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0, 10, 1.0, 1.0, 0.0, 0.0).is_err());
        assert!(CameraIntrinsics::new(10, 10, 0.0, 1.0, 0.0, 0.0).is_err());
        assert!(CameraIntrinsics::new(10, 10, 1.0, -1.0, 0.0, 0.0).is_err());
        assert!(CameraIntrinsics::new(10, 10, 1.0, 1.0, 10.0, 0.0).is_err());
        assert!(CameraIntrinsics::new(10, 10, 1.0, 1.0, 0.0, -0.5).is_err());
        assert!(CameraIntrinsics::new(10, 10, 1.0, 1.0, 9.9, 9.9).is_ok());
        assert!(hd(0.0).with_distortion(f64::NAN, 0.0, 0.0).is_err());
    }

    #[test]
    fn contains_is_half_open() {
        let intr = CameraIntrinsics::new(4, 3, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(intr.contains(PixelCoord::new(0.0, 0.0)));
        assert!(intr.contains(PixelCoord::new(3.999, 2.999)));
        assert!(!intr.contains(PixelCoord::new(4.0, 1.0)));
        assert!(!intr.contains(PixelCoord::new(1.0, -1e-12)));
    }
}
