//! Static 2-d k-d tree over projected pixel positions.
//!
//! Besides plain nearest-neighbor lookup the tree answers "nearest point in
//! each of the four quadrants around a query", which is what the bilinear
//! densifier needs. Quadrants are half-open so that every point other than
//! the query itself belongs to exactly one of them (offsets are
//! `dx = p.x - q.x`, `dy = p.y - q.y`):
//!
//! | quadrant | condition           |
//! |----------|---------------------|
//! | 0        | `dx > 0,  dy >= 0`  |
//! | 1        | `dx <= 0, dy > 0`   |
//! | 2        | `dx < 0,  dy <= 0`  |
//! | 3        | `dx >= 0, dy < 0`   |
//!
//! All queries break distance ties by the lowest `payload_id`, so results are
//! fully deterministic and comparable against a linear scan.

use crate::camera::PixelCoord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexedPoint {
    pub position: PixelCoord,
    /// Index into the sparse cloud this point was taken from.
    pub payload_id: usize,
}

impl IndexedPoint {
    pub fn new(x: f64, y: f64, payload_id: usize) -> Self {
        IndexedPoint {
            position: PixelCoord::new(x, y),
            payload_id,
        }
    }

    #[inline]
    fn coord(&self, axis: usize) -> f64 {
        if axis == 0 {
            self.position.x
        } else {
            self.position.y
        }
    }
}

/// A query result: the stored point and its Euclidean pixel distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub point: IndexedPoint,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuadrantNeighbors {
    /// Stored point coinciding with the query (lowest payload id among
    /// duplicates). Such a point belongs to no quadrant.
    pub exact_hit: Option<IndexedPoint>,
    pub quadrants: [Option<Neighbor>; 4],
}

impl QuadrantNeighbors {
    pub fn populated(&self) -> usize {
        self.quadrants.iter().filter(|q| q.is_some()).count()
    }
}

/// Quadrant of `p` relative to `q`, or `None` when they coincide.
#[inline]
pub fn quadrant_of(q: PixelCoord, p: PixelCoord) -> Option<usize> {
    let dx = p.x - q.x;
    let dy = p.y - q.y;
    if dx > 0.0 && dy >= 0.0 {
        Some(0)
    } else if dx <= 0.0 && dy > 0.0 {
        Some(1)
    } else if dx < 0.0 && dy <= 0.0 {
        Some(2)
    } else if dx >= 0.0 && dy < 0.0 {
        Some(3)
    } else {
        None
    }
}

/// Nearest-neighbor queries shared by the k-d tree and the linear-scan baseline.
pub trait NeighborIndex: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn nearest(&self, q: PixelCoord) -> Option<Neighbor>;

    fn nearest_per_quadrant(&self, q: PixelCoord) -> QuadrantNeighbors;
}

#[inline]
fn dist2(a: PixelCoord, b: PixelCoord) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    dx * dx + dy * dy
}

/// Best-so-far slot ordered by `(squared distance, payload_id)`.
#[derive(Clone, Copy)]
struct Best {
    d2: f64,
    point: Option<IndexedPoint>,
}

impl Best {
    const EMPTY: Best = Best {
        d2: f64::INFINITY,
        point: None,
    };

    #[inline]
    fn offer(&mut self, p: &IndexedPoint, d2: f64) {
        let better = match self.point {
            None => true,
            Some(cur) => d2 < self.d2 || (d2 == self.d2 && p.payload_id < cur.payload_id),
        };
        if better {
            self.d2 = d2;
            self.point = Some(*p);
        }
    }

    fn into_neighbor(self) -> Option<Neighbor> {
        self.point.map(|point| Neighbor {
            point,
            distance: self.d2.sqrt(),
        })
    }
}

/// Brute-force index: every query scans every point.
#[derive(Debug, Clone, Default)]
pub struct LinearScan {
    points: Vec<IndexedPoint>,
}

impl LinearScan {
    pub fn new(points: Vec<IndexedPoint>) -> Self {
        LinearScan { points }
    }
}

impl NeighborIndex for LinearScan {
    fn len(&self) -> usize {
        self.points.len()
    }

    fn nearest(&self, q: PixelCoord) -> Option<Neighbor> {
        let mut best = Best::EMPTY;
        for p in &self.points {
            best.offer(p, dist2(q, p.position));
        }
        best.into_neighbor()
    }

    fn nearest_per_quadrant(&self, q: PixelCoord) -> QuadrantNeighbors {
        let mut slots = [Best::EMPTY; 4];
        let mut exact = Best::EMPTY;
        for p in &self.points {
            match quadrant_of(q, p.position) {
                Some(i) => slots[i].offer(p, dist2(q, p.position)),
                None => exact.offer(p, 0.0),
            }
        }
        QuadrantNeighbors {
            exact_hit: exact.point,
            quadrants: slots.map(Best::into_neighbor),
        }
    }
}

/// Axis-aligned closed bounds of a subtree.
#[derive(Debug, Clone, Copy)]
struct Bounds {
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Bounds {
    fn split(self, axis: usize, value: f64) -> (Bounds, Bounds) {
        let mut left = self;
        let mut right = self;
        left.hi[axis] = value;
        right.lo[axis] = value;
        (left, right)
    }

    /// Squared distance from `q` to the part of the box inside quadrant
    /// `quadrant`, or `None` when they do not intersect.
    #[inline]
    fn quadrant_lower_bound(&self, q: PixelCoord, quadrant: usize) -> Option<f64> {
        let dx_lo = self.lo[0] - q.x;
        let dx_hi = self.hi[0] - q.x;
        let dy_lo = self.lo[1] - q.y;
        let dy_hi = self.hi[1] - q.y;
        // (x positive side?, x strict?, y positive side?, y strict?)
        let (x_pos, x_strict, y_pos, y_strict) = match quadrant {
            0 => (true, true, true, false),
            1 => (false, false, true, true),
            2 => (false, true, false, false),
            _ => (true, false, false, true),
        };
        let mx = side_gap(dx_lo, dx_hi, x_pos, x_strict)?;
        let my = side_gap(dy_lo, dy_hi, y_pos, y_strict)?;
        Some(mx * mx + my * my)
    }

    #[inline]
    fn contains(&self, q: PixelCoord) -> bool {
        self.lo[0] <= q.x && q.x <= self.hi[0] && self.lo[1] <= q.y && q.y <= self.hi[1]
    }
}

/// Smallest |offset| within `[lo, hi]` restricted to one side of zero.
#[inline]
fn side_gap(lo: f64, hi: f64, positive: bool, strict: bool) -> Option<f64> {
    if positive {
        let feasible = if strict { hi > 0.0 } else { hi >= 0.0 };
        feasible.then(|| lo.max(0.0))
    } else {
        let feasible = if strict { lo < 0.0 } else { lo <= 0.0 };
        feasible.then(|| (-hi).max(0.0))
    }
}

/// Balanced, immutable 2-d tree in implicit layout: the median of each
/// sub-slice is its root, left and right halves are its children.
#[derive(Debug, Clone)]
pub struct KdTree {
    nodes: Vec<IndexedPoint>,
    bounds: Bounds,
}

impl KdTree {
    /// Median-split build with alternating axes (x at even depths). Points
    /// are ordered by `(coordinate, payload_id)` so the layout depends only
    /// on the input list.
    pub fn build(points: Vec<IndexedPoint>) -> Self {
        let mut nodes = points;
        let mut bounds = Bounds {
            lo: [f64::INFINITY; 2],
            hi: [f64::NEG_INFINITY; 2],
        };
        for p in &nodes {
            for axis in 0..2 {
                bounds.lo[axis] = bounds.lo[axis].min(p.coord(axis));
                bounds.hi[axis] = bounds.hi[axis].max(p.coord(axis));
            }
        }
        build_recursive(&mut nodes, 0);
        KdTree { nodes, bounds }
    }

    /// Points in tree layout order.
    pub fn nodes(&self) -> &[IndexedPoint] {
        &self.nodes
    }

    /// Visits every stored point by walking the tree from the root.
    pub fn traverse(&self, mut visit: impl FnMut(&IndexedPoint)) {
        fn walk(nodes: &[IndexedPoint], visit: &mut impl FnMut(&IndexedPoint)) {
            if nodes.is_empty() {
                return;
            }
            let mid = nodes.len() / 2;
            visit(&nodes[mid]);
            walk(&nodes[..mid], visit);
            walk(&nodes[mid + 1..], visit);
        }
        walk(&self.nodes, &mut visit);
    }

    fn nearest_in(&self, nodes: &[IndexedPoint], depth: usize, q: PixelCoord, best: &mut Best) {
        if nodes.is_empty() {
            return;
        }
        let mid = nodes.len() / 2;
        let node = &nodes[mid];
        best.offer(node, dist2(q, node.position));
        let axis = depth % 2;
        let diff = q_coord(q, axis) - node.coord(axis);
        let (near, far) = if diff < 0.0 {
            (&nodes[..mid], &nodes[mid + 1..])
        } else {
            (&nodes[mid + 1..], &nodes[..mid])
        };
        self.nearest_in(near, depth + 1, q, best);
        // ties must still be explored for the payload_id tie-break
        if diff * diff <= best.d2 {
            self.nearest_in(far, depth + 1, q, best);
        }
    }

    fn quadrants_in(
        &self,
        nodes: &[IndexedPoint],
        depth: usize,
        bounds: Bounds,
        q: PixelCoord,
        slots: &mut [Best; 4],
        exact: &mut Best,
    ) {
        if nodes.is_empty() {
            return;
        }
        let needed = (0..4).any(|i| {
            bounds
                .quadrant_lower_bound(q, i)
                .is_some_and(|lb| lb <= slots[i].d2)
        }) || bounds.contains(q);
        if !needed {
            return;
        }
        let mid = nodes.len() / 2;
        let node = &nodes[mid];
        match quadrant_of(q, node.position) {
            Some(i) => slots[i].offer(node, dist2(q, node.position)),
            None => exact.offer(node, 0.0),
        }
        let axis = depth % 2;
        let split = node.coord(axis);
        let (left_bounds, right_bounds) = bounds.split(axis, split);
        let left = &nodes[..mid];
        let right = &nodes[mid + 1..];
        if q_coord(q, axis) < split {
            self.quadrants_in(left, depth + 1, left_bounds, q, slots, exact);
            self.quadrants_in(right, depth + 1, right_bounds, q, slots, exact);
        } else {
            self.quadrants_in(right, depth + 1, right_bounds, q, slots, exact);
            self.quadrants_in(left, depth + 1, left_bounds, q, slots, exact);
        }
    }
}

#[inline]
fn q_coord(q: PixelCoord, axis: usize) -> f64 {
    if axis == 0 {
        q.x
    } else {
        q.y
    }
}

fn build_recursive(nodes: &mut [IndexedPoint], depth: usize) {
    if nodes.len() <= 1 {
        return;
    }
    let axis = depth % 2;
    nodes.sort_unstable_by(|a, b| {
        a.coord(axis)
            .total_cmp(&b.coord(axis))
            .then(a.payload_id.cmp(&b.payload_id))
    });
    let mid = nodes.len() / 2;
    let (left, rest) = nodes.split_at_mut(mid);
    build_recursive(left, depth + 1);
    build_recursive(&mut rest[1..], depth + 1);
}

impl NeighborIndex for KdTree {
    fn len(&self) -> usize {
        self.nodes.len()
    }

    fn nearest(&self, q: PixelCoord) -> Option<Neighbor> {
        let mut best = Best::EMPTY;
        self.nearest_in(&self.nodes, 0, q, &mut best);
        best.into_neighbor()
    }

    fn nearest_per_quadrant(&self, q: PixelCoord) -> QuadrantNeighbors {
        let mut slots = [Best::EMPTY; 4];
        let mut exact = Best::EMPTY;
        self.quadrants_in(&self.nodes, 0, self.bounds, q, &mut slots, &mut exact);
        QuadrantNeighbors {
            exact_hit: exact.point,
            quadrants: slots.map(Best::into_neighbor),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64, span: f64) -> Vec<IndexedPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| IndexedPoint::new(rng.random_range(0.0..span), rng.random_range(0.0..span), i))
            .collect()
    }

    /// Coarse integer grid so that distance ties are frequent.
    fn grid_points(n: usize, seed: u64) -> Vec<IndexedPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                IndexedPoint::new(
                    f64::from(rng.random_range(0..20)),
                    f64::from(rng.random_range(0..20)),
                    i,
                )
            })
            .collect()
    }

    // Independent brute-force oracle; deliberately does not reuse `Best` or `quadrant_of`.
    fn brute_nearest(points: &[IndexedPoint], q: PixelCoord) -> Option<(usize, f64)> {
        let mut out: Option<(usize, f64)> = None;
        for p in points {
            let d = (p.position.x - q.x).powi(2) + (p.position.y - q.y).powi(2);
            out = match out {
                Some((id, bd)) if bd < d || (bd == d && id < p.payload_id) => Some((id, bd)),
                _ => Some((p.payload_id, d)),
            };
        }
        out
    }

    fn brute_quadrant(
        points: &[IndexedPoint],
        q: PixelCoord,
        quadrant: usize,
    ) -> Option<(usize, f64)> {
        let inside: Vec<IndexedPoint> = points
            .iter()
            .copied()
            .filter(|p| {
                let dx = p.position.x - q.x;
                let dy = p.position.y - q.y;
                match quadrant {
                    0 => dx > 0.0 && dy >= 0.0,
                    1 => dx <= 0.0 && dy > 0.0,
                    2 => dx < 0.0 && dy <= 0.0,
                    _ => dx >= 0.0 && dy < 0.0,
                }
            })
            .collect();
        brute_nearest(&inside, q)
    }

    fn check_against_brute(points: Vec<IndexedPoint>, queries: &[PixelCoord]) {
        let tree = KdTree::build(points.clone());
        for &q in queries {
            let got = tree
                .nearest(q)
                .map(|n| (n.point.payload_id, n.distance * n.distance));
            let want = brute_nearest(&points, q);
            assert_eq!(got.map(|g| g.0), want.map(|w| w.0), "query {q:?}");
            let quads = tree.nearest_per_quadrant(q);
            for i in 0..4 {
                let got = quads.quadrants[i].map(|n| n.point.payload_id);
                let want = brute_quadrant(&points, q, i).map(|w| w.0);
                assert_eq!(got, want, "quadrant {i} of query {q:?}");
            }
        }
    }

    #[test]
    fn empty_tree() {
        let tree = KdTree::build(Vec::new());
        assert_eq!(tree.len(), 0);
        assert!(tree.nearest(PixelCoord::new(1.0, 1.0)).is_none());
        assert_eq!(
            tree.nearest_per_quadrant(PixelCoord::new(0.0, 0.0)),
            QuadrantNeighbors::default()
        );
    }

    #[test]
    fn single_point() {
        let tree = KdTree::build(vec![IndexedPoint::new(3.0, 4.0, 7)]);
        let n = tree.nearest(PixelCoord::new(0.0, 0.0)).unwrap();
        assert_eq!(n.point.payload_id, 7);
        assert_eq!(n.distance, 5.0);
        let hit = tree.nearest(PixelCoord::new(3.0, 4.0)).unwrap();
        assert_eq!(hit.distance, 0.0);
    }

    #[test]
    fn traversal_reaches_every_point() {
        let points = random_points(1000, 1, 100.0);
        let tree = KdTree::build(points);
        let mut seen = vec![false; 1000];
        let mut count = 0;
        tree.traverse(|p| {
            count += 1;
            seen[p.payload_id] = true;
        });
        assert_eq!(count, 1000);
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn build_is_deterministic() {
        let points = grid_points(500, 3);
        let a = KdTree::build(points.clone());
        let b = KdTree::build(points);
        assert_eq!(a.nodes(), b.nodes());
    }

    #[test]
    fn symmetric_quadrants() {
        let tree = KdTree::build(vec![
            IndexedPoint::new(1.0, 1.0, 0),
            IndexedPoint::new(-1.0, 1.0, 1),
            IndexedPoint::new(-1.0, -1.0, 2),
            IndexedPoint::new(1.0, -1.0, 3),
        ]);
        let quads = tree.nearest_per_quadrant(PixelCoord::new(0.0, 0.0));
        assert!(quads.exact_hit.is_none());
        for (i, slot) in quads.quadrants.iter().enumerate() {
            let n = slot.expect("every quadrant populated");
            assert_eq!(n.point.payload_id, i);
            assert!((n.distance - 2f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn one_sided_cloud_leaves_three_quadrants_empty() {
        let points: Vec<_> = (0..10)
            .map(|i| IndexedPoint::new(5.0 + i as f64, 6.0, i))
            .collect();
        let quads = KdTree::build(points).nearest_per_quadrant(PixelCoord::new(0.0, 0.0));
        assert_eq!(quads.populated(), 1);
        assert_eq!(quads.quadrants[0].unwrap().point.payload_id, 0);
    }

    #[test]
    fn boundary_membership() {
        let q = PixelCoord::new(0.0, 0.0);
        assert_eq!(quadrant_of(q, PixelCoord::new(1.0, 0.0)), Some(0));
        assert_eq!(quadrant_of(q, PixelCoord::new(0.0, 1.0)), Some(1));
        assert_eq!(quadrant_of(q, PixelCoord::new(-1.0, 0.0)), Some(2));
        assert_eq!(quadrant_of(q, PixelCoord::new(0.0, -1.0)), Some(3));
        assert_eq!(quadrant_of(q, q), None);
    }

    #[test]
    fn exact_hit_prefers_lowest_payload() {
        let tree = KdTree::build(vec![
            IndexedPoint::new(2.0, 2.0, 9),
            IndexedPoint::new(2.0, 2.0, 4),
            IndexedPoint::new(3.0, 2.0, 1),
        ]);
        let quads = tree.nearest_per_quadrant(PixelCoord::new(2.0, 2.0));
        assert_eq!(quads.exact_hit.unwrap().payload_id, 4);
        assert_eq!(quads.quadrants[0].unwrap().point.payload_id, 1);
        assert_eq!(
            tree.nearest(PixelCoord::new(2.0, 2.0))
                .unwrap()
                .point
                .payload_id,
            4
        );
    }

    #[test]
    fn random_instances_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let queries: Vec<_> = (0..100)
            .map(|_| {
                PixelCoord::new(
                    rng.random_range(-10.0..110.0),
                    rng.random_range(-10.0..110.0),
                )
            })
            .collect();
        check_against_brute(random_points(1000, 2, 100.0), &queries);
        check_against_brute(random_points(500, 5, 100.0), &queries[..50]);
    }

    #[test]
    fn tie_heavy_instances_match_brute_force() {
        let queries: Vec<_> = (0..22)
            .flat_map(|x| (0..22).map(move |y| PixelCoord::new(x as f64 - 1.0, y as f64 - 1.0)))
            .collect();
        check_against_brute(grid_points(300, 7), &queries);
        let half: Vec<_> = queries
            .iter()
            .map(|q| PixelCoord::new(q.x + 0.5, q.y))
            .collect();
        check_against_brute(grid_points(300, 8), &half);
    }

    #[test]
    fn linear_scan_agrees_with_tree() {
        let points = grid_points(400, 9);
        let tree = KdTree::build(points.clone());
        let scan = LinearScan::new(points);
        for x in 0..20 {
            for y in 0..20 {
                let q = PixelCoord::new(x as f64 + 0.25, y as f64);
                assert_eq!(tree.nearest(q), scan.nearest(q));
                assert_eq!(tree.nearest_per_quadrant(q), scan.nearest_per_quadrant(q));
            }
        }
    }
}
