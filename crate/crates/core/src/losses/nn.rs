//! Exact nearest-neighbor queries over 3D point sets: a kd-tree with median
//! splits on the widest axis. Results equal a brute-force scan; the tree only
//! accelerates.

use crate::geometry::Vec3;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub struct KdTree {
    points: Vec<Vec3>,
    // Implicit tree over a permutation of point indices.
    order: Vec<u32>,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy)]
struct Node {
    // Range into `order`.
    start: u32,
    end: u32,
    axis: u8,
    split: f64,
    left: i32,
    right: i32,
}

const LEAF: usize = 16;

impl KdTree {
    pub fn build(points: &[Vec3]) -> KdTree {
        assert!(!points.is_empty(), "kd-tree needs at least one point");
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::new();
        build_node(points, &mut order, 0, points.len(), &mut nodes);
        KdTree {
            points: points.to_vec(),
            order,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and squared distance of the nearest point to `q`.
    pub fn nearest(&self, q: Vec3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, q, &mut best);
        best
    }

    fn search(&self, node_idx: usize, q: Vec3, best: &mut (usize, f64)) {
        let node = self.nodes[node_idx];
        if node.left < 0 {
            for &pi in &self.order[node.start as usize..node.end as usize] {
                let d = q.dist_sq(self.points[pi as usize]);
                if d < best.1 {
                    *best = (pi as usize, d);
                }
            }
            return;
        }
        let delta = q.component(node.axis as usize) - node.split;
        let (near, far) = if delta <= 0.0 {
            (node.left as usize, node.right as usize)
        } else {
            (node.right as usize, node.left as usize)
        };
        self.search(near, q, best);
        if delta * delta < best.1 {
            self.search(far, q, best);
        }
    }
}

fn build_node(points: &[Vec3], order: &mut [u32], start: usize, end: usize, nodes: &mut Vec<Node>) -> i32 {
    let idx = nodes.len();
    nodes.push(Node {
        start: start as u32,
        end: end as u32,
        axis: 0,
        split: 0.0,
        left: -1,
        right: -1,
    });
    let slice = &mut order[start..end];
    if slice.len() <= LEAF {
        return idx as i32;
    }
    // Widest axis of the bounding box.
    let mut lo = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &pi in slice.iter() {
        let p = points[pi as usize];
        lo = Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
        hi = Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
    }
    let ext = hi - lo;
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        let ca = points[a as usize].component(axis);
        let cb = points[b as usize].component(axis);
        ca.partial_cmp(&cb).unwrap().then(a.cmp(&b))
    });
    let split = points[slice[mid] as usize].component(axis);
    let left = build_node(points, order, start, start + mid, nodes);
    let right = build_node(points, order, start + mid, end, nodes);
    let node = &mut nodes[idx];
    node.axis = axis as u8;
    node.split = split;
    node.left = left;
    node.right = right;
    idx as i32
}

/// Nearest neighbor of each query, in query order.
pub fn nearest_all(tree: &KdTree, queries: &[Vec3]) -> Vec<(usize, f64)> {
    #[cfg(feature = "parallel")]
    {
        queries.par_iter().map(|&q| tree.nearest(q)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        queries.iter().map(|&q| tree.nearest(q)).collect()
    }
}

/// Sequential twin of [`nearest_all`].
pub fn nearest_all_seq(tree: &KdTree, queries: &[Vec3]) -> Vec<(usize, f64)> {
    queries.iter().map(|&q| tree.nearest(q)).collect()
}

/// Brute-force reference: first index attaining the minimum squared distance.
pub fn nearest_bruteforce(points: &[Vec3], q: Vec3) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for (i, &p) in points.iter().enumerate() {
        let d = q.dist_sq(p);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}
