//! Exact nearest-neighbour search over a k-d tree.
//!
//! Nodes live in an arena and each node owns one point. The split axis cycles
//! with depth. Points carry a caller-supplied sequence id which breaks distance
//! ties (smallest id wins).

use super::EeclError;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node {
    point: u32,
    axis: u16,
    left: u32,
    right: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub point: Vec<f64>,
    pub id: u64,
    pub distance: f64,
}

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    coords: Vec<f64>,
    ids: Vec<u64>,
    nodes: Vec<Node>,
    root: u32,
}

/// Squared Euclidean distance, summed in coordinate order.
#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KdTree {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
            ids: Vec::new(),
            nodes: Vec::new(),
            root: NONE,
        }
    }

    /// Median-balanced build. Points receive ids `0..points.len()` in input
    /// order.
    pub fn build(dim: usize, points: &[Vec<f64>]) -> Result<Self, EeclError> {
        Self::build_with_ids(
            dim,
            points
                .iter()
                .enumerate()
                .map(|(i, p)| (i as u64, p.as_slice())),
        )
    }

    pub fn build_with_ids<'a, I>(dim: usize, points: I) -> Result<Self, EeclError>
    where
        I: IntoIterator<Item = (u64, &'a [f64])>,
    {
        let mut tree = Self::new(dim);
        for (id, p) in points {
            tree.check_dim(p)?;
            tree.coords.extend_from_slice(p);
            tree.ids.push(id);
        }
        tree.rebuild();
        Ok(tree)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn check_dim(&self, p: &[f64]) -> Result<(), EeclError> {
        if p.len() != self.dim {
            return Err(EeclError::DimensionMismatch {
                expected: self.dim,
                actual: p.len(),
            });
        }
        Ok(())
    }

    fn coord(&self, point: u32, axis: usize) -> f64 {
        self.coords[point as usize * self.dim + axis]
    }

    fn point(&self, point: u32) -> &[f64] {
        let start = point as usize * self.dim;
        &self.coords[start..start + self.dim]
    }

    /// Discards the node structure and rebuilds it balanced over the stored
    /// points.
    pub fn rebuild(&mut self) {
        self.nodes.clear();
        self.nodes.reserve(self.ids.len());
        let mut order: Vec<u32> = (0..self.ids.len() as u32).collect();
        self.root = self.build_range(&mut order, 0);
    }

    fn build_range(&mut self, items: &mut [u32], depth: usize) -> u32 {
        if items.is_empty() {
            return NONE;
        }
        let axis = depth % self.dim.max(1);
        // Stable sort on (coordinate, id) fixes the median among ties.
        items.sort_by(|&a, &b| {
            self.coord(a, axis)
                .total_cmp(&self.coord(b, axis))
                .then(self.ids[a as usize].cmp(&self.ids[b as usize]))
        });
        let mid = items.len() / 2;
        let node = self.nodes.len() as u32;
        self.nodes.push(Node {
            point: items[mid],
            axis: axis as u16,
            left: NONE,
            right: NONE,
        });
        let (lo, rest) = items.split_at_mut(mid);
        let left = self.build_range(lo, depth + 1);
        let right = self.build_range(&mut rest[1..], depth + 1);
        self.nodes[node as usize].left = left;
        self.nodes[node as usize].right = right;
        node
    }

    /// Inserts without rebalancing. Points equal to a node's split coordinate
    /// go right.
    pub fn insert(&mut self, id: u64, p: &[f64]) -> Result<(), EeclError> {
        self.check_dim(p)?;
        let point = self.ids.len() as u32;
        self.coords.extend_from_slice(p);
        self.ids.push(id);
        let new = self.nodes.len() as u32;
        if self.root == NONE {
            self.nodes.push(Node {
                point,
                axis: 0,
                left: NONE,
                right: NONE,
            });
            self.root = new;
            return Ok(());
        }
        let mut cur = self.root;
        loop {
            let node = &self.nodes[cur as usize];
            let axis = node.axis as usize;
            let go_left = p[axis] < self.coord(node.point, axis);
            let next = if go_left { node.left } else { node.right };
            if next == NONE {
                let child_axis = ((axis + 1) % self.dim.max(1)) as u16;
                self.nodes.push(Node {
                    point,
                    axis: child_axis,
                    left: NONE,
                    right: NONE,
                });
                let node = &mut self.nodes[cur as usize];
                if go_left {
                    node.left = new;
                } else {
                    node.right = new;
                }
                return Ok(());
            }
            cur = next;
        }
    }

    /// Exact nearest neighbour; ties go to the smallest id.
    pub fn nearest(&self, query: &[f64]) -> Result<Option<Neighbor>, EeclError> {
        self.check_dim(query)?;
        if self.root == NONE {
            return Ok(None);
        }
        let mut best = (f64::INFINITY, u64::MAX, NONE);
        self.search(self.root, query, &mut best);
        let (d2, id, point) = best;
        Ok(Some(Neighbor {
            point: self.point(point).to_vec(),
            id,
            distance: d2.sqrt(),
        }))
    }

    fn search(&self, node: u32, query: &[f64], best: &mut (f64, u64, u32)) {
        let n = &self.nodes[node as usize];
        let d2 = squared_distance(query, self.point(n.point));
        let id = self.ids[n.point as usize];
        if d2 < best.0 || (d2 == best.0 && id < best.1) {
            *best = (d2, id, n.point);
        }
        let axis = n.axis as usize;
        let diff = query[axis] - self.coord(n.point, axis);
        let (near, far) = if diff < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        if near != NONE {
            self.search(near, query, best);
        }
        // Equality still descends so that tied points with smaller ids are seen.
        if far != NONE && diff * diff <= best.0 {
            self.search(far, query, best);
        }
    }

    /// In-order traversal of `(id, point)` pairs.
    pub fn in_order(&self) -> Vec<(u64, Vec<f64>)> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = Vec::new();
        let mut cur = self.root;
        while cur != NONE || !stack.is_empty() {
            while cur != NONE {
                stack.push(cur);
                cur = self.nodes[cur as usize].left;
            }
            let n = stack.pop().expect("non-empty");
            let node = &self.nodes[n as usize];
            out.push((
                self.ids[node.point as usize],
                self.point(node.point).to_vec(),
            ));
            cur = node.right;
        }
        out
    }

    /// Checks the partition invariant on every node. Used by tests.
    pub fn is_partitioned(&self) -> bool {
        fn walk(t: &KdTree, node: u32, bounds: &mut Vec<(usize, f64, bool)>) -> bool {
            if node == NONE {
                return true;
            }
            let n = &t.nodes[node as usize];
            let ok = bounds.iter().all(|&(axis, split, left)| {
                let c = t.coord(n.point, axis);
                if left {
                    c <= split
                } else {
                    c >= split
                }
            });
            if !ok {
                return false;
            }
            let axis = n.axis as usize;
            let split = t.coord(n.point, axis);
            bounds.push((axis, split, true));
            let l = walk(t, n.left, bounds);
            bounds.pop();
            bounds.push((axis, split, false));
            let r = walk(t, n.right, bounds);
            bounds.pop();
            l && r
        }
        walk(self, self.root, &mut Vec::new())
    }

    /// The point stored at the root, if any.
    pub fn root_point(&self) -> Option<&[f64]> {
        (self.root != NONE).then(|| self.point(self.nodes[self.root as usize].point))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear_scan(points: &[Vec<f64>], q: &[f64]) -> (f64, usize) {
        let mut best = (f64::INFINITY, usize::MAX);
        for (i, p) in points.iter().enumerate() {
            let d2 = squared_distance(q, p);
            if d2 < best.0 {
                best = (d2, i);
            }
        }
        (best.0.sqrt(), best.1)
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn empty_tree_has_no_neighbor() {
        let t = KdTree::build(2, &[]).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.nearest(&[0.0, 0.0]).unwrap(), None);
    }

    #[test]
    fn root_is_axis_zero_median() {
        let t = KdTree::build(2, &[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!(t.root_point(), Some(&[1.0, 1.0][..]));
    }

    #[test]
    fn mixed_dimensions_rejected() {
        assert!(matches!(
            KdTree::build(2, &[vec![0.0, 0.0], vec![1.0]]),
            Err(EeclError::DimensionMismatch {
                expected: 2,
                actual: 1
            })
        ));
        let t = KdTree::build(2, &[vec![0.0, 0.0]]).unwrap();
        assert!(t.nearest(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn three_four_five() {
        let t = KdTree::build(2, &[vec![0.0, 0.0]]).unwrap();
        let n = t.nearest(&[3.0, 4.0]).unwrap().unwrap();
        assert_eq!(n.distance, 5.0);
        let n = t.nearest(&[0.0, 0.0]).unwrap().unwrap();
        assert_eq!(n.distance, 0.0);
    }

    #[test]
    fn in_order_enumerates_input_multiset() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = random_points(&mut rng, 500, 8);
        let t = KdTree::build(8, &pts).unwrap();
        let mut got: Vec<(u64, Vec<f64>)> = t.in_order();
        got.sort_by_key(|(id, _)| *id);
        assert_eq!(got.len(), 500);
        for (i, (id, p)) in got.iter().enumerate() {
            assert_eq!(*id, i as u64);
            assert_eq!(p, &pts[i]);
        }
        assert!(t.is_partitioned());
    }

    #[test]
    fn nearest_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let pts = random_points(&mut rng, 1000, 16);
        let t = KdTree::build(16, &pts).unwrap();
        for q in random_points(&mut rng, 100, 16) {
            let n = t.nearest(&q).unwrap().unwrap();
            let (d, i) = linear_scan(&pts, &q);
            assert_eq!(n.distance, d);
            assert_eq!(n.id, i as u64);
        }
    }

    #[test]
    fn ties_prefer_earliest_id() {
        // Lattice points with many equidistant neighbours.
        let mut pts = Vec::new();
        for x in 0..6 {
            for y in 0..6 {
                pts.push(vec![x as f64, y as f64]);
            }
        }
        pts.push(vec![2.0, 2.0]);
        let t = KdTree::build(2, &pts).unwrap();
        for q in [[2.5, 2.5], [0.5, 0.0], [2.0, 2.0], [5.5, 5.5]] {
            let n = t.nearest(&q).unwrap().unwrap();
            let (d, i) = linear_scan(&pts, &q);
            assert_eq!((n.distance, n.id), (d, i as u64), "query {q:?}");
        }
    }

    #[test]
    fn incremental_inserts_stay_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = random_points(&mut rng, 300, 3);
        let mut t = KdTree::new(3);
        for (i, p) in pts.iter().enumerate() {
            t.insert(i as u64, p).unwrap();
        }
        assert!(t.is_partitioned());
        for q in random_points(&mut rng, 50, 3) {
            let n = t.nearest(&q).unwrap().unwrap();
            let (d, i) = linear_scan(&pts, &q);
            assert_eq!((n.distance, n.id), (d, i as u64));
        }
    }
}
