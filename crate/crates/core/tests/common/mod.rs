#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use rgbd_measure::camera::{MetricPoint, PixelCoord};
use rgbd_measure::densify::SparsePixelCloud;
use rgbd_measure::segment::SegmentMask;
use rgbd_measure::synth::{SceneObject, SceneSpec};
use serde_json::Value;

/// 0.30 m tall, 0.20 m wide box at 0.5 m in front of a 1.3 m background.
pub fn box_spec() -> SceneSpec {
    SceneSpec::new(vec![SceneObject::new("box", (0.0, 0.0), (0.20, 0.30), 0.5)])
}

/// Two boxes at different depths, side by side. As with [`box_spec`], every
/// box edge lands on the 10 px sampling grid, so extreme points are sampled.
pub fn two_box_spec() -> SceneSpec {
    let mut spec = SceneSpec::new(vec![
        SceneObject::new("near", (-0.15, 0.0), (0.20, 0.30), 0.5),
        SceneObject::new("far", (0.20, 0.01), (0.30, 0.40), 0.7),
    ]);
    spec.emit_detections = true;
    spec
}

/// Half resolution with a 5 px grid: same angular sampling and cloud size.
pub fn half_res(spec: SceneSpec) -> SceneSpec {
    let mut spec = spec.with_resolution(960, 540);
    spec.sample_stride = 5;
    spec
}

pub fn rel_err(measured: f64, truth: f64) -> f64 {
    (measured - truth).abs() / truth
}

pub fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rgbd-measure"))
        .args(args)
        .output()
        .expect("spawn rgbd-measure")
}

pub fn measure_cli(bundle: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "measure",
        "--bundle",
        bundle.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    cli(&args)
}

pub fn read_report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Report without the fields that legitimately vary between runs.
pub fn without_timings(mut report: Value) -> Value {
    let obj = report.as_object_mut().unwrap();
    obj.remove("timings_ms");
    obj.remove("bench");
    report
}

/// Intersection over union of a segment mask against a full-frame footprint.
pub fn iou(mask: &SegmentMask, footprint: &[bool], width: usize) -> f64 {
    let mut inter = 0usize;
    let mut union = 0usize;
    for (i, &truth) in footprint.iter().enumerate() {
        let got = mask.is_foreground(i % width, i / width);
        inter += usize::from(got && truth);
        union += usize::from(got || truth);
    }
    inter as f64 / union as f64
}

fn side(q: PixelCoord, p: PixelCoord) -> Option<usize> {
    let (dx, dy) = (p.x - q.x, p.y - q.y);
    if dx == 0.0 && dy == 0.0 {
        None
    } else if dx > 0.0 && dy >= 0.0 {
        Some(0)
    } else if dx <= 0.0 && dy > 0.0 {
        Some(1)
    } else if dx < 0.0 {
        Some(2)
    } else {
        Some(3)
    }
}

fn dist(a: PixelCoord, b: PixelCoord) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
}

/// Brute-force reference for ungated, unbounded bilinear densification,
/// written directly from the interpolation formulas.
pub fn oracle_bilinear_pixel(sparse: &SparsePixelCloud, x: f64, y: f64) -> MetricPoint {
    let q = PixelCoord::new(x, y);
    let e = sparse.entries();
    if let Some(hit) = e.iter().find(|s| s.pixel.x == x && s.pixel.y == y) {
        return hit.point;
    }
    let mut best: [Option<(f64, usize)>; 4] = [None; 4];
    let mut overall: Option<(f64, usize)> = None;
    for (i, s) in e.iter().enumerate() {
        let d = dist(q, s.pixel);
        let quad = side(q, s.pixel).unwrap();
        if best[quad].is_none_or(|(bd, _)| d < bd) {
            best[quad] = Some((d, i));
        }
        if overall.is_none_or(|(bd, _)| d < bd) {
            overall = Some((d, i));
        }
    }
    let [Some(c0), Some(c1), Some(c2), Some(c3)] = best else {
        return e[overall.unwrap().1].point;
    };
    let (p0, p1, p2, p3) = (e[c0.1].pixel, e[c1.1].pixel, e[c2.1].pixel, e[c3.1].pixel);
    let (v0, v1, v2, v3) = (e[c0.1].point, e[c1.1].point, e[c2.1].point, e[c3.1].point);
    if (p1.x - p0.x).abs() < 1e-9 || (p2.x - p3.x).abs() < 1e-9 {
        let ws = [1.0 / c0.0, 1.0 / c1.0, 1.0 / c2.0, 1.0 / c3.0];
        let vs = [v0, v1, v2, v3];
        let total: f64 = ws.iter().sum();
        let comp = |f: fn(&MetricPoint) -> f64| {
            ws.iter().zip(&vs).map(|(w, v)| w * f(v)).sum::<f64>() / total
        };
        return MetricPoint::new(comp(|p| p.x), comp(|p| p.y), comp(|p| p.z));
    }
    let ym = p0.y + (x - p0.x) * (p1.y - p0.y) / (p1.x - p0.x);
    let yn = p3.y + (x - p3.x) * (p2.y - p3.y) / (p2.x - p3.x);
    let m = PixelCoord::new(x, ym);
    let n = PixelCoord::new(x, yn);
    let (d0, d1, d2, d3) = (dist(m, p0), dist(m, p1), dist(n, p2), dist(n, p3));
    let lin = |a: f64, b: f64, da: f64, db: f64| {
        if da + db == 0.0 {
            0.5 * (a + b)
        } else {
            (db * a + da * b) / (da + db)
        }
    };
    let vm = MetricPoint::new(
        lin(v0.x, v1.x, d0, d1),
        lin(v0.y, v1.y, d0, d1),
        lin(v0.z, v1.z, d0, d1),
    );
    let vn = MetricPoint::new(
        lin(v3.x, v2.x, d3, d2),
        lin(v3.y, v2.y, d3, d2),
        lin(v3.z, v2.z, d3, d2),
    );
    let (dm, dn) = (dist(q, m), dist(q, n));
    MetricPoint::new(
        lin(vm.x, vn.x, dm, dn),
        lin(vm.y, vn.y, dm, dn),
        lin(vm.z, vn.z, dm, dn),
    )
}
