//! Object size estimation from an RGB frame and a sparse depth point cloud.
//!
//! The crate covers the whole path from a capture bundle to metric object
//! dimensions:
//!
//! - [`camera`]: pinhole projection with radial distortion and rigid poses,
//! - [`spatial`]: a 2-d k-d tree answering nearest and per-quadrant queries,
//! - [`densify`]: projection of the cloud and per-pixel metric reconstruction,
//! - [`segment`]: depth k-means segmentation of a frame or a detection box,
//! - [`measure`]: extents in meters of a segmented pixel set,
//! - [`synth`]: synthetic captures with analytic ground truth,
//! - [`bundle`], [`ppm`], [`pipeline`]: file formats and orchestration.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b): (f64, f64) = ($a, $b);
        assert!((a - b).abs() <= $tol, "{} vs {} (tol {})", a, b, $tol);
    }};
}

pub mod bundle;
pub mod camera;
pub mod densify;
pub mod error;
pub mod measure;
pub mod pipeline;
pub mod ppm;
pub mod segment;
pub mod spatial;
pub mod synth;

pub use error::{BundleError, Error, Result};
