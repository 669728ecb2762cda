//! Builds a k-d tree over random pixel positions and runs nearest and
//! per-quadrant queries, checking them against a linear scan.
//!
//!     cargo run --release --example kdtree_queries

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rgbd_measure::camera::PixelCoord;
use rgbd_measure::spatial::{IndexedPoint, KdTree, LinearScan, NeighborIndex};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let points: Vec<IndexedPoint> = (0..20_000)
        .map(|i| IndexedPoint {
            position: PixelCoord::new(rng.random_range(0.0..1920.0), rng.random_range(0.0..1080.0)),
            payload_id: i,
        })
        .collect();
    let queries: Vec<PixelCoord> = (0..5_000)
        .map(|_| PixelCoord::new(rng.random_range(0.0..1920.0), rng.random_range(0.0..1080.0)))
        .collect();

    let tree = KdTree::build(points.clone());
    let scan = LinearScan::new(points);

    let start = Instant::now();
    let tree_hits: Vec<_> = queries
        .iter()
        .map(|&q| tree.nearest_per_quadrant(q))
        .collect();
    let tree_time = start.elapsed();
    let start = Instant::now();
    let scan_hits: Vec<_> = queries
        .iter()
        .map(|&q| scan.nearest_per_quadrant(q))
        .collect();
    let scan_time = start.elapsed();

    assert_eq!(tree_hits, scan_hits);
    let q = queries[0];
    let nearest = tree.nearest(q).expect("non-empty tree");
    println!(
        "query ({:.1}, {:.1}): nearest id {} at {:.3} px",
        q.x, q.y, nearest.point.payload_id, nearest.distance
    );
    for (i, n) in tree_hits[0].quadrants.iter().enumerate() {
        if let Some(n) = n {
            println!(
                "  quadrant {i}: id {} at {:.3} px",
                n.point.payload_id, n.distance
            );
        }
    }
    println!(
        "{} quadrant queries: tree {:?}, linear scan {:?} ({:.0}x)",
        queries.len(),
        tree_time,
        scan_time,
        scan_time.as_secs_f64() / tree_time.as_secs_f64()
    );
}
