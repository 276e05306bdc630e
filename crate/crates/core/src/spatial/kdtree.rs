//! Exact nearest-neighbour search.

const LEAF_SIZE: usize = 8;
/// Below this many points the tree is a single leaf, i.e. a linear scan.
const BRUTE_FORCE_BELOW: usize = 64;
const LEAF: usize = usize::MAX;

#[derive(Clone, Debug)]
struct Node {
    start: usize,
    end: usize,
    axis: usize,
    left: usize,
    right: usize,
}

/// Static k-d tree over a flat coordinate array.
///
/// Queries return the lexicographically smallest `(squared distance, index)`
/// pair, so ties resolve to the smallest original index.
#[derive(Clone, Debug)]
pub struct KdTree {
    dim: usize,
    /// Coordinates reordered to tree order.
    pts: Vec<f64>,
    /// Original index of each reordered point.
    orig: Vec<usize>,
    nodes: Vec<Node>,
    /// Tight bounding box of each node's points: `lo` then `hi`, `2 * dim` per node.
    bounds: Vec<f64>,
}

impl KdTree {
    pub fn build(dim: usize, coords: &[f64]) -> Self {
        let n = coords.len() / dim;
        let mut perm: Vec<usize> = (0..n).collect();
        let mut tree = KdTree {
            dim,
            pts: Vec::with_capacity(coords.len()),
            orig: Vec::new(),
            nodes: Vec::with_capacity(2 * n / LEAF_SIZE + 1),
            bounds: Vec::with_capacity(2 * dim * (2 * n / LEAF_SIZE + 1)),
        };
        let leaf_size = if n < BRUTE_FORCE_BELOW { n.max(1) } else { LEAF_SIZE };
        tree.build_rec(coords, &mut perm, 0, n, leaf_size);
        for &i in &perm {
            tree.pts.extend_from_slice(&coords[i * dim..(i + 1) * dim]);
        }
        tree.orig = perm;
        tree
    }

    /// Nearest point with squared distance at most `best.0`, skipping index `skip`.
    ///
    /// `best` seeds the search (e.g. with a hint point) and receives the result.
    pub fn search(&self, q: &[f64], skip: usize, best: &mut (f64, usize)) {
        if self.orig.is_empty() {
            return;
        }
        self.search_node(0, q, skip, best);
    }

    /// Squared distance from `q` to the bounding box of `node`.
    #[inline]
    fn box_dist2(&self, node: usize, q: &[f64]) -> f64 {
        let d = self.dim;
        let b = &self.bounds[2 * d * node..2 * d * (node + 1)];
        let mut s = 0.0;
        for j in 0..d {
            let t = if q[j] < b[j] {
                b[j] - q[j]
            } else if q[j] > b[d + j] {
                q[j] - b[d + j]
            } else {
                0.0
            };
            s += t * t;
        }
        s
    }

    fn search_node(&self, node: usize, q: &[f64], skip: usize, best: &mut (f64, usize)) {
        let n = &self.nodes[node];
        if n.axis == LEAF {
            let d = self.dim;
            for k in n.start..n.end {
                let p = &self.pts[k * d..(k + 1) * d];
                let mut d2 = 0.0;
                for j in 0..d {
                    let t = q[j] - p[j];
                    d2 += t * t;
                }
                if d2 <= best.0 {
                    let id = self.orig[k];
                    if id != skip && (d2 < best.0 || id < best.1) {
                        *best = (d2, id);
                    }
                }
            }
            return;
        }
        let (dl, dr) = (self.box_dist2(n.left, q), self.box_dist2(n.right, q));
        let ((near, dn), (far, df)) = if dl <= dr {
            ((n.left, dl), (n.right, dr))
        } else {
            ((n.right, dr), (n.left, dl))
        };
        // prune only on strict excess so equidistant points are still seen
        if dn <= best.0 {
            self.search_node(near, q, skip, best);
        }
        if df <= best.0 {
            self.search_node(far, q, skip, best);
        }
    }

    fn build_rec(&mut self, coords: &[f64], perm: &mut [usize], start: usize, end: usize, leaf_size: usize) -> usize {
        let dim = self.dim;
        let id = self.nodes.len();
        self.nodes.push(Node {
            start,
            end,
            axis: LEAF,
            left: 0,
            right: 0,
        });
        let slice = &mut perm[start..end];
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for &i in slice.iter() {
            for axis in 0..dim {
                let v = coords[i * dim + axis];
                lo[axis] = lo[axis].min(v);
                hi[axis] = hi[axis].max(v);
            }
        }
        self.bounds.extend_from_slice(&lo);
        self.bounds.extend_from_slice(&hi);
        if end - start <= leaf_size {
            return id;
        }
        // split along the axis of largest spread
        let mut best_axis = 0;
        let mut best_spread = -1.0;
        for axis in 0..dim {
            if hi[axis] - lo[axis] > best_spread {
                best_spread = hi[axis] - lo[axis];
                best_axis = axis;
            }
        }
        if best_spread <= 0.0 {
            // all points coincide
            return id;
        }
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            coords[a * dim + best_axis].total_cmp(&coords[b * dim + best_axis])
        });
        let left = self.build_rec(coords, perm, start, start + mid, leaf_size);
        let right = self.build_rec(coords, perm, start + mid, end, leaf_size);
        let n = &mut self.nodes[id];
        n.axis = best_axis;
        n.left = left;
        n.right = right;
        id
    }
}
