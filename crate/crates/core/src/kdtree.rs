//! Exact nearest-neighbour search over a fixed point set.
//!
//! Ties are resolved towards the smallest point index, both in the tree and
//! in the linear-scan fallback, so the two always agree bit for bit.

use alloc::vec::Vec;

const LEAF_SIZE: usize = 8;

/// Squared Euclidean distance. Every distance comparison in the crate goes
/// through this function so that tree and scan see identical values.
#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
fn better(d: f64, i: usize, best_d: f64, best_i: usize) -> bool {
    d < best_d || (d == best_d && i < best_i)
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    points: Vec<f64>,
    /// Point indices, permuted so that every leaf owns a contiguous range.
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    /// Builds a tree over `points`, stored row-major with `dim` coordinates each.
    pub fn new(dim: usize, points: Vec<f64>) -> Self {
        assert!(dim > 0);
        assert_eq!(points.len() % dim, 0);
        let n = points.len() / dim;
        let mut tree = KdTree {
            dim,
            points,
            order: (0..n).collect(),
            nodes: Vec::new(),
        };
        if n > 0 {
            tree.build(0, n);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        // split on the widest coordinate
        let mut dim = 0;
        let mut widest = -1.0;
        for d in 0..self.dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.order[start..end] {
                let v = self.points[i * self.dim + d];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > widest {
                widest = hi - lo;
                dim = d;
            }
        }
        if widest <= 0.0 {
            // all points coincide in every coordinate
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let (points, d) = (&self.points, self.dim);
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a * d + dim].total_cmp(&points[b * d + dim])
        });
        let value = self.points[self.order[mid] * self.dim + dim];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            dim,
            value,
            left,
            right,
        };
        id
    }

    /// Index of the closest point; ties go to the smallest index.
    pub fn nearest(&self, query: &[f64]) -> Option<(usize, f64)> {
        debug_assert_eq!(query.len(), self.dim);
        if self.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, usize::MAX);
        self.nearest_rec(0, query, &mut best);
        Some((best.1, best.0))
    }

    fn nearest_rec(&self, node: usize, q: &[f64], best: &mut (f64, usize)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = dist2(self.point(i), q);
                    if better(d, i, best.0, best.1) {
                        *best = (d, i);
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.nearest_rec(near, q, best);
                // `<=` keeps equidistant points with smaller indices reachable
                if diff * diff <= best.0 {
                    self.nearest_rec(far, q, best);
                }
            }
        }
    }

    /// The `k` closest points sorted by (distance, index).
    pub fn k_nearest(&self, query: &[f64], k: usize) -> Vec<(usize, f64)> {
        let k = k.min(self.len());
        let mut found: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        if k > 0 {
            self.knn_rec(0, query, k, &mut found);
        }
        found.into_iter().map(|(d, i)| (i, d)).collect()
    }

    fn knn_rec(&self, node: usize, q: &[f64], k: usize, found: &mut Vec<(f64, usize)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = dist2(self.point(i), q);
                    if found.len() == k {
                        let (wd, wi) = found[k - 1];
                        if !better(d, i, wd, wi) {
                            continue;
                        }
                        found.pop();
                    }
                    let pos = found
                        .iter()
                        .position(|&(fd, fi)| better(d, i, fd, fi))
                        .unwrap_or(found.len());
                    found.insert(pos, (d, i));
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.knn_rec(near, q, k, found);
                if found.len() < k || diff * diff <= found[k - 1].0 {
                    self.knn_rec(far, q, k, found);
                }
            }
        }
    }
}

/// Linear-scan reference for [`KdTree::nearest`].
pub fn nearest_linear(dim: usize, points: &[f64], query: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in points.chunks_exact(dim).enumerate() {
        let d = dist2(p, query);
        match best {
            Some((bi, bd)) if !better(d, i, bd, bi) => {}
            _ => best = Some((i, d)),
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tree_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(n, dim) in &[(1, 1), (7, 2), (50, 3), (200, 6), (120, 4)] {
            let pts: Vec<f64> = (0..n * dim).map(|_| rng.random::<f64>()).collect();
            let tree = KdTree::new(dim, pts.clone());
            for _ in 0..300 {
                let q: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 1.2 - 0.1).collect();
                assert_eq!(tree.nearest(&q), nearest_linear(dim, &pts, &q));
            }
        }
    }

    #[test]
    fn ties_resolve_to_smallest_index() {
        let tree = KdTree::new(1, vec![1.0, 0.0]);
        assert_eq!(tree.nearest(&[0.5]).unwrap().0, 0);
        // many duplicates of one point plus lattice ties
        let pts: Vec<f64> = (0..40).map(|i| (i % 4) as f64).collect();
        let tree = KdTree::new(1, pts.clone());
        for q in [0.5, 1.5, 2.0, 3.0, -1.0] {
            assert_eq!(tree.nearest(&[q]), nearest_linear(1, &pts, &[q]));
        }
    }

    #[test]
    fn k_nearest_is_sorted_and_contains_self() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<f64> = (0..60).map(|_| rng.random::<f64>()).collect();
        let tree = KdTree::new(2, pts.clone());
        for i in 0..30 {
            let q = tree.point(i).to_vec();
            let nn = tree.k_nearest(&q, 5);
            assert_eq!(nn[0].0, i);
            let mut brute: Vec<(f64, usize)> = pts
                .chunks_exact(2)
                .enumerate()
                .map(|(j, p)| (dist2(p, &q), j))
                .collect();
            brute.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let expect: Vec<usize> = brute.iter().take(5).map(|x| x.1).collect();
            let got: Vec<usize> = nn.iter().map(|x| x.0).collect();
            assert_eq!(got, expect);
        }
    }
}
