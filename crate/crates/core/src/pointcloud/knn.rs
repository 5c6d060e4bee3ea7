use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::geometry::Vec3;
use crate::math::sqrt;

/// Below this many points every query is a linear scan.
const BRUTE_FORCE_BELOW: usize = 2000;
/// Points per k-d tree leaf.
const LEAF_SIZE: usize = 16;

/// Exact k-nearest-neighbor queries over a fixed point set.
///
/// Large sets go into a k-d tree split at the median of the widest axis;
/// a subtree is skipped only when its splitting plane is farther than the
/// current k-th candidate.
#[derive(Debug, Clone)]
pub struct KnnIndex<'a> {
    points: &'a [Vec3],
    tree: Option<KdTree>,
}

#[derive(Debug, Clone)]
struct KdTree {
    /// Point indices, permuted so every node owns a contiguous range.
    order: Vec<u32>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { axis: u8, value: f64, left: u32, right: u32 },
}

#[derive(PartialEq)]
struct Candidate(f64);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Bounded max-heap keeping the `k` smallest squared distances.
struct Best {
    k: usize,
    heap: BinaryHeap<Candidate>,
}

impl Best {
    fn new(k: usize) -> Self {
        Best {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    #[inline]
    fn offer(&mut self, d2: f64) {
        if self.heap.len() < self.k {
            self.heap.push(Candidate(d2));
        } else if let Some(top) = self.heap.peek() {
            if d2 < top.0 {
                self.heap.pop();
                self.heap.push(Candidate(d2));
            }
        }
    }

    fn full(&self) -> bool {
        self.heap.len() == self.k
    }

    fn worst(&self) -> f64 {
        self.heap.peek().map_or(f64::INFINITY, |c| c.0)
    }

    fn mean_distance(self) -> f64 {
        let n = self.heap.len();
        if n == 0 {
            return 0.0;
        }
        let mut d: Vec<f64> = self.heap.into_iter().map(|c| sqrt(c.0)).collect();
        d.sort_unstable_by(f64::total_cmp);
        crate::math::pairwise_sum(&d) / n as f64
    }
}

impl<'a> KnnIndex<'a> {
    /// Indexes `points`.
    pub fn build(points: &'a [Vec3]) -> Self {
        let tree = (points.len() >= BRUTE_FORCE_BELOW).then(|| KdTree::build(points));
        KnnIndex { points, tree }
    }

    #[allow(missing_docs)]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[allow(missing_docs)]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Mean Euclidean distance from point `i` to its `k` nearest other
    /// points (fewer if the set is smaller).
    pub fn mean_knn_distance(&self, i: usize, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let mut best = Best::new(k);
        match &self.tree {
            None => {
                let q = self.points[i];
                for (j, p) in self.points.iter().enumerate() {
                    if j != i {
                        best.offer(q.distance_squared(*p));
                    }
                }
            }
            Some(t) => t.query(self.points, 0, i, &mut best),
        }
        best.mean_distance()
    }
}

impl KdTree {
    fn build(points: &[Vec3]) -> KdTree {
        let mut tree = KdTree {
            order: (0..points.len() as u32).collect(),
            nodes: Vec::new(),
        };
        tree.split(points, 0, points.len());
        tree
    }

    /// Builds the node for `order[start..end]` and returns its index.
    fn split(&mut self, points: &[Vec3], start: usize, end: usize) -> u32 {
        let id = self.nodes.len() as u32;
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf {
                start: start as u32,
                end: end as u32,
            });
            return id;
        }
        let range = &mut self.order[start..end];
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &j in range.iter() {
            let p = points[j as usize];
            for a in 0..3 {
                lo[a] = lo[a].min(p.axis(a));
                hi[a] = hi[a].max(p.axis(a));
            }
        }
        let axis = (0..3).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).unwrap_or(0);
        let mid = range.len() / 2;
        range.select_nth_unstable_by(mid, |&x, &y| {
            points[x as usize].axis(axis).total_cmp(&points[y as usize].axis(axis))
        });
        let value = points[range[mid] as usize].axis(axis);
        // placeholder, children are pushed after this node
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.split(points, start, start + mid);
        let right = self.split(points, start + mid, end);
        self.nodes[id as usize] = Node::Split {
            axis: axis as u8,
            value,
            left,
            right,
        };
        id
    }

    fn query(&self, points: &[Vec3], node: u32, i: usize, best: &mut Best) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                let q = points[i];
                for &j in &self.order[start as usize..end as usize] {
                    if j as usize != i {
                        best.offer(q.distance_squared(points[j as usize]));
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                // left holds coordinates ≤ value, right ≥ value
                let diff = points[i].axis(axis as usize) - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.query(points, near, i, best);
                if !best.full() || diff * diff < best.worst() {
                    self.query(points, far, i, best);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &[Vec3], i: usize, k: usize) -> f64 {
        let mut d: Vec<f64> = points
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, p)| points[i].distance(*p))
            .collect();
        d.sort_unstable_by(f64::total_cmp);
        let d = &d[..k.min(d.len())];
        d.iter().sum::<f64>() / d.len() as f64
    }

    #[test]
    fn tree_queries_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // a noisy plane, a dense blob and a few far strays
        let mut pts: Vec<Vec3> = (0..4000)
            .map(|_| Vec3::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(-0.05..0.05)))
            .collect();
        pts.extend((0..800).map(|_| Vec3::new(rng.random_range(3.0..3.5), rng.random_range(3.0..3.5), rng.random_range(0.0..0.5))));
        pts.extend((0..10).map(|i| Vec3::new(100.0 + i as f64 * 37.0, -300.0, 40.0)));
        pts.push(pts[17]); // a duplicate
        let index = KnnIndex::build(&pts);
        assert!(index.tree.is_some());
        for k in [1, 8, 20] {
            for i in (0..pts.len()).step_by(97).chain(pts.len() - 12..pts.len()) {
                let got = index.mean_knn_distance(i, k);
                let want = brute(&pts, i, k);
                assert!((got - want).abs() <= 1e-12 * want.max(1.0), "i={i} k={k}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn all_duplicates() {
        let pts = alloc::vec![Vec3::new(1.0, 2.0, 3.0); 2500];
        let index = KnnIndex::build(&pts);
        assert_eq!(index.mean_knn_distance(0, 5), 0.0);
    }

    #[test]
    fn fewer_points_than_k() {
        let pts = [Vec3::ZERO, Vec3::new(3.0, 4.0, 0.0)];
        assert_eq!(KnnIndex::build(&pts).mean_knn_distance(0, 8), 5.0);
    }
}
