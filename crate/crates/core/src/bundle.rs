//! On-disk frame bundle: one capture as a directory of plain files.
//!
//! ```text
//! bundle/
//!   intrinsics.json   {"width","height","fx","fy","cx","cy","k1","k2","k3"}
//!   rgb.ppm           binary P6, maxval 255
//!   cloud.csv         header "X,Y,Z", one depth-frame point per line
//!   poses.json        {"trajectory":[{"t","tx","ty","tz","qw","qx","qy","qz"},...],
//!                      "depth_to_color":{"tx","ty","tz","qw","qx","qy","qz"}}
//!   meta.json         {"format_version":1,"t_rgb","t_depth"}
//!   detections.json   optional [{"label","score","x_min","y_min","x_max","y_max"}]
//! ```
//!
//! Trajectory poses are device-to-world; the device frame is the color
//! camera. `depth_to_color` maps depth-camera coordinates into the color
//! camera frame.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, MetricPoint, RigidPose};
use crate::error::BundleError;
use crate::ppm::RgbImage;
use crate::segment::DetectionBox;

pub const FORMAT_VERSION: u32 = 1;

pub const INTRINSICS_FILE: &str = "intrinsics.json";
pub const RGB_FILE: &str = "rgb.ppm";
pub const CLOUD_FILE: &str = "cloud.csv";
pub const POSES_FILE: &str = "poses.json";
pub const META_FILE: &str = "meta.json";
pub const DETECTIONS_FILE: &str = "detections.json";

/// Everything needed to measure objects in one RGB capture.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBundle {
    pub intrinsics: CameraIntrinsics,
    pub rgb: RgbImage,
    /// Sparse cloud in the depth-camera frame at `t_depth`.
    pub cloud: Vec<MetricPoint>,
    pub trajectory: Vec<RigidPose>,
    pub depth_to_color: RigidPose,
    pub t_rgb: f64,
    pub t_depth: f64,
    pub detections: Option<Vec<DetectionBox>>,
    /// Cloud rows with `Z <= 0` skipped while loading.
    pub dropped_cloud_rows: usize,
}

#[derive(Serialize, Deserialize)]
struct TrajectorySample {
    t: f64,
    tx: f64,
    ty: f64,
    tz: f64,
    qw: f64,
    qx: f64,
    qy: f64,
    qz: f64,
}

#[derive(Serialize, Deserialize)]
struct Extrinsic {
    tx: f64,
    ty: f64,
    tz: f64,
    qw: f64,
    qx: f64,
    qy: f64,
    qz: f64,
}

#[derive(Serialize, Deserialize)]
struct PosesFile {
    trajectory: Vec<TrajectorySample>,
    depth_to_color: Extrinsic,
}

#[derive(Serialize, Deserialize)]
struct MetaFile {
    #[serde(default = "default_version")]
    format_version: u32,
    t_rgb: f64,
    t_depth: f64,
}

fn default_version() -> u32 {
    FORMAT_VERSION
}

fn sample_of(p: &RigidPose) -> TrajectorySample {
    let [qw, qx, qy, qz] = p.quat_wxyz();
    TrajectorySample {
        t: p.timestamp,
        tx: p.translation.x,
        ty: p.translation.y,
        tz: p.translation.z,
        qw,
        qx,
        qy,
        qz,
    }
}

fn pose_of(t: f64, q: [f64; 4], tr: [f64; 3], field: &str) -> Result<RigidPose, BundleError> {
    RigidPose::new(t, q, tr).map_err(|e| BundleError::invariant(field, e.to_string()))
}

fn io_err(path: &Path, source: std::io::Error) -> BundleError {
    BundleError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_required(dir: &Path, name: &str) -> Result<Vec<u8>, BundleError> {
    let path = dir.join(name);
    match fs::read(&path) {
        Ok(bytes) => Ok(bytes),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(BundleError::MissingFile(name.to_string()))
        }
        Err(e) => Err(io_err(&path, e)),
    }
}

fn parse_json<T: DeserializeOwned>(bytes: &[u8], name: &str) -> Result<T, BundleError> {
    serde_json::from_slice(bytes).map_err(|e| BundleError::parse(name, e.line(), e.to_string()))
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("bundle types serialize");
    out.push(b'\n');
    out
}

/// Parses `cloud.csv`. Rows with `Z <= 0` are skipped and counted.
pub fn parse_cloud(text: &str) -> Result<(Vec<MetricPoint>, usize), BundleError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "X,Y,Z" => {}
        _ => return Err(BundleError::parse(CLOUD_FILE, 1, "expected header `X,Y,Z`")),
    }
    let mut points = Vec::new();
    let mut dropped = 0;
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = [0.0; 3];
        let mut parts = line.split(',');
        for (slot, name) in fields.iter_mut().zip(["X", "Y", "Z"]) {
            let raw = parts.next().ok_or_else(|| {
                BundleError::parse(CLOUD_FILE, line_no, format!("missing {name} column"))
            })?;
            *slot = raw
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    BundleError::parse(CLOUD_FILE, line_no, format!("invalid {name} value `{raw}`"))
                })?;
        }
        if parts.next().is_some() {
            return Err(BundleError::parse(
                CLOUD_FILE,
                line_no,
                "expected exactly three columns",
            ));
        }
        if fields[2] <= 0.0 {
            dropped += 1;
            continue;
        }
        points.push(MetricPoint::new(fields[0], fields[1], fields[2]));
    }
    Ok((points, dropped))
}

pub fn format_cloud(points: &[MetricPoint]) -> String {
    let mut out = String::with_capacity(points.len() * 48 + 6);
    out.push_str("X,Y,Z\n");
    for p in points {
        writeln!(out, "{},{},{}", p.x, p.y, p.z).expect("write to String");
    }
    out
}

impl FrameBundle {
    /// Checks the cross-file invariants of a bundle.
    pub fn validate(&self) -> Result<(), BundleError> {
        self.intrinsics
            .validate()
            .map_err(|e| BundleError::invariant("intrinsics", e.to_string()))?;
        if self.rgb.width() != self.intrinsics.width as usize
            || self.rgb.height() != self.intrinsics.height as usize
        {
            return Err(BundleError::invariant(
                "rgb",
                format!(
                    "image is {}x{} but intrinsics say {}x{}",
                    self.rgb.width(),
                    self.rgb.height(),
                    self.intrinsics.width,
                    self.intrinsics.height
                ),
            ));
        }
        if self.trajectory.is_empty() {
            return Err(BundleError::invariant(
                "trajectory",
                "must contain at least one pose",
            ));
        }
        if let Some(i) = self
            .trajectory
            .windows(2)
            .position(|w| !(w[1].timestamp > w[0].timestamp))
        {
            return Err(BundleError::invariant(
                "trajectory",
                format!("timestamps must be strictly increasing (index {})", i + 1),
            ));
        }
        for (name, t) in [("t_rgb", self.t_rgb), ("t_depth", self.t_depth)] {
            if !t.is_finite() {
                return Err(BundleError::invariant(name, "must be finite"));
            }
        }
        if let Some(i) = self
            .cloud
            .iter()
            .position(|p| !p.is_finite() || !(p.z > 0.0))
        {
            return Err(BundleError::invariant(
                "cloud",
                format!("point {i} must be finite with Z > 0"),
            ));
        }
        for (i, det) in self.detections.iter().flatten().enumerate() {
            det.validate()
                .map_err(|e| BundleError::invariant("detections", format!("box {i}: {e}")))?;
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<(), BundleError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let write = |name: &str, bytes: &[u8]| {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| io_err(&path, e))
        };
        write(INTRINSICS_FILE, &to_json(&self.intrinsics))?;
        write(RGB_FILE, &self.rgb.encode())?;
        write(CLOUD_FILE, format_cloud(&self.cloud).as_bytes())?;
        let e = &self.depth_to_color;
        let [qw, qx, qy, qz] = e.quat_wxyz();
        let poses = PosesFile {
            trajectory: self.trajectory.iter().map(sample_of).collect(),
            depth_to_color: Extrinsic {
                tx: e.translation.x,
                ty: e.translation.y,
                tz: e.translation.z,
                qw,
                qx,
                qy,
                qz,
            },
        };
        write(POSES_FILE, &to_json(&poses))?;
        let meta = MetaFile {
            format_version: FORMAT_VERSION,
            t_rgb: self.t_rgb,
            t_depth: self.t_depth,
        };
        write(META_FILE, &to_json(&meta))?;
        let det_path = dir.join(DETECTIONS_FILE);
        match &self.detections {
            Some(dets) => write(DETECTIONS_FILE, &to_json(dets))?,
            None if det_path.exists() => {
                fs::remove_file(&det_path).map_err(|e| io_err(&det_path, e))?
            }
            None => {}
        }
        Ok(())
    }
}

/// Reads and validates a bundle directory.
pub fn load_bundle(dir: &Path) -> Result<FrameBundle, BundleError> {
    if !dir.is_dir() {
        return Err(io_err(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "bundle directory not found"),
        ));
    }
    let intrinsics: CameraIntrinsics =
        parse_json(&read_required(dir, INTRINSICS_FILE)?, INTRINSICS_FILE)?;
    let rgb = RgbImage::decode(&read_required(dir, RGB_FILE)?, RGB_FILE)?;
    let cloud_bytes = read_required(dir, CLOUD_FILE)?;
    let cloud_text = std::str::from_utf8(&cloud_bytes)
        .map_err(|_| BundleError::parse(CLOUD_FILE, 1, "file is not UTF-8"))?;
    let (cloud, dropped_cloud_rows) = parse_cloud(cloud_text)?;
    let poses: PosesFile = parse_json(&read_required(dir, POSES_FILE)?, POSES_FILE)?;
    let meta: MetaFile = parse_json(&read_required(dir, META_FILE)?, META_FILE)?;
    if meta.format_version != FORMAT_VERSION {
        return Err(BundleError::invariant(
            "format_version",
            format!(
                "unsupported version {}, expected {FORMAT_VERSION}",
                meta.format_version
            ),
        ));
    }
    let detections = match fs::read(dir.join(DETECTIONS_FILE)) {
        Ok(bytes) => Some(parse_json::<Vec<DetectionBox>>(&bytes, DETECTIONS_FILE)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(io_err(&dir.join(DETECTIONS_FILE), e)),
    };

    let trajectory = poses
        .trajectory
        .iter()
        .enumerate()
        .map(|(i, s)| {
            pose_of(
                s.t,
                [s.qw, s.qx, s.qy, s.qz],
                [s.tx, s.ty, s.tz],
                &format!("trajectory[{i}]"),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let e = &poses.depth_to_color;
    let depth_to_color = pose_of(
        0.0,
        [e.qw, e.qx, e.qy, e.qz],
        [e.tx, e.ty, e.tz],
        "depth_to_color",
    )?;

    let bundle = FrameBundle {
        intrinsics,
        rgb,
        cloud,
        trajectory,
        depth_to_color,
        t_rgb: meta.t_rgb,
        t_depth: meta.t_depth,
        detections,
        dropped_cloud_rows,
    };
    bundle.validate()?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_bundle() -> FrameBundle {
        let intrinsics = CameraIntrinsics::new(4, 3, 10.0, 10.0, 2.0, 1.5).unwrap();
        FrameBundle {
            intrinsics,
            rgb: RgbImage::filled(4, 3, [9, 8, 7]),
            cloud: vec![
                MetricPoint::new(0.1, -0.2, 1.0),
                MetricPoint::new(-0.0, 1e-17, 2.5),
            ],
            trajectory: vec![
                RigidPose::identity().at(0.0),
                RigidPose::new(0.2, [0.99, 0.01, 0.02, 0.03], [0.01, 0.0, -0.02]).unwrap(),
            ],
            depth_to_color: RigidPose::from_translation(0.0125, 0.0, 0.0),
            t_rgb: 0.1,
            t_depth: 0.2,
            detections: Some(vec![DetectionBox::new("box", 0.9, 0.0, 0.0, 2.0, 2.0)]),
            dropped_cloud_rows: 0,
        }
    }

    #[test]
    fn save_load_save_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = tiny_bundle();
        bundle.save(dir.path()).unwrap();
        let loaded = load_bundle(dir.path()).unwrap();
        assert_eq!(loaded, bundle);
        let first: Vec<Vec<u8>> = [
            INTRINSICS_FILE,
            RGB_FILE,
            CLOUD_FILE,
            POSES_FILE,
            META_FILE,
            DETECTIONS_FILE,
        ]
        .iter()
        .map(|f| fs::read(dir.path().join(f)).unwrap())
        .collect();
        let dir2 = tempfile::tempdir().unwrap();
        loaded.save(dir2.path()).unwrap();
        for (f, bytes) in [
            INTRINSICS_FILE,
            RGB_FILE,
            CLOUD_FILE,
            POSES_FILE,
            META_FILE,
            DETECTIONS_FILE,
        ]
        .iter()
        .zip(first)
        {
            assert_eq!(fs::read(dir2.path().join(f)).unwrap(), bytes, "{f}");
        }
    }

    #[test]
    fn missing_intrinsics() {
        let dir = tempfile::tempdir().unwrap();
        tiny_bundle().save(dir.path()).unwrap();
        fs::remove_file(dir.path().join(INTRINSICS_FILE)).unwrap();
        match load_bundle(dir.path()) {
            Err(BundleError::MissingFile(f)) => assert_eq!(f, "intrinsics.json"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn detections_are_optional() {
        let dir = tempfile::tempdir().unwrap();
        let mut bundle = tiny_bundle();
        bundle.detections = None;
        bundle.save(dir.path()).unwrap();
        assert_eq!(load_bundle(dir.path()).unwrap().detections, None);
    }

    #[test]
    fn cloud_rows_with_nonpositive_depth_are_dropped() {
        let (points, dropped) = parse_cloud("X,Y,Z\n0,0,1\n1,1,0\n2,2,-3\n0.5,0.5,2\n").unwrap();
        assert_eq!(points.len(), 2);
        assert_eq!(dropped, 2);
    }

    #[test]
    fn cloud_parse_errors_carry_line_numbers() {
        match parse_cloud("X,Y,Z\n0,0,1\n0,abc,1\n") {
            Err(BundleError::Parse { file, line, .. }) => {
                assert_eq!(file, "cloud.csv");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_cloud("x,y,z\n").is_err());
        assert!(parse_cloud("X,Y,Z\n1,2\n").is_err());
        assert!(parse_cloud("X,Y,Z\n1,2,3,4\n").is_err());
    }

    #[test]
    fn json_errors_and_invariants() {
        let dir = tempfile::tempdir().unwrap();
        tiny_bundle().save(dir.path()).unwrap();
        fs::write(
            dir.path().join(META_FILE),
            "{\n  \"t_rgb\": 0.1,\n  \"t_depth\": oops\n}\n",
        )
        .unwrap();
        match load_bundle(dir.path()) {
            Err(BundleError::Parse { file, line, .. }) => {
                assert_eq!(file, "meta.json");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other:?}"),
        }

        let mut bad = tiny_bundle();
        bad.rgb = RgbImage::filled(5, 3, [0, 0, 0]);
        bad.save(dir.path()).unwrap();
        assert!(matches!(
            load_bundle(dir.path()),
            Err(BundleError::InvariantViolation { ref field, .. }) if field == "rgb"
        ));

        let mut bad = tiny_bundle();
        bad.intrinsics.fx = -1.0;
        bad.save(dir.path()).unwrap();
        assert!(matches!(
            load_bundle(dir.path()),
            Err(BundleError::InvariantViolation { ref field, .. }) if field == "intrinsics"
        ));

        let mut bad = tiny_bundle();
        bad.trajectory.reverse();
        bad.save(dir.path()).unwrap();
        assert!(matches!(
            load_bundle(dir.path()),
            Err(BundleError::InvariantViolation { ref field, .. }) if field == "trajectory"
        ));
    }
}
