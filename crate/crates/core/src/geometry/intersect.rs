//! Triangle-triangle intersection tests, a face-AABB bounding volume
//! hierarchy, and the self-intersecting-face fraction built on both.

use super::mesh::TriMesh;
use super::vec3::Vec3;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Aabb {
        Aabb {
            min: Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn of_points(points: &[Vec3]) -> Aabb {
        let mut b = Aabb::empty();
        for &p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: Vec3) {
        self.min = Vec3::new(self.min.x.min(p.x), self.min.y.min(p.y), self.min.z.min(p.z));
        self.max = Vec3::new(self.max.x.max(p.x), self.max.y.max(p.y), self.max.z.max(p.z));
    }

    pub fn merge(&mut self, other: &Aabb) {
        self.grow(other.min);
        self.grow(other.max);
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
            && self.min.z <= other.max.z
            && other.min.z <= self.max.z
    }

    pub fn dist_sq_to_point(&self, p: Vec3) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        let dz = (self.min.z - p.z).max(0.0).max(p.z - self.max.z);
        dx * dx + dy * dy + dz * dz
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }
}

enum BvhNode {
    Leaf {
        aabb: Aabb,
        faces: Vec<usize>,
    },
    Inner {
        aabb: Aabb,
        left: Box<BvhNode>,
        right: Box<BvhNode>,
    },
}

/// Bounding volume hierarchy over mesh faces: median split on the longest
/// axis of the centroid bounds.
pub struct FaceBvh {
    root: BvhNode,
    face_aabbs: Vec<Aabb>,
}

const LEAF_SIZE: usize = 4;

impl FaceBvh {
    pub fn build(mesh: &TriMesh) -> FaceBvh {
        let face_aabbs: Vec<Aabb> = (0..mesh.face_count())
            .map(|f| {
                let [a, b, c] = mesh.face_vertices(f);
                Aabb::of_points(&[a, b, c])
            })
            .collect();
        let mut indices: Vec<usize> = (0..mesh.face_count()).collect();
        let root = Self::build_node(&face_aabbs, &mut indices);
        FaceBvh { root, face_aabbs }
    }

    fn build_node(face_aabbs: &[Aabb], indices: &mut [usize]) -> BvhNode {
        let mut aabb = Aabb::empty();
        for &f in indices.iter() {
            aabb.merge(&face_aabbs[f]);
        }
        if indices.len() <= LEAF_SIZE {
            return BvhNode::Leaf {
                aabb,
                faces: indices.to_vec(),
            };
        }
        let mut centroid_bounds = Aabb::empty();
        for &f in indices.iter() {
            centroid_bounds.grow(face_aabbs[f].center());
        }
        let ext = centroid_bounds.max - centroid_bounds.min;
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = indices.len() / 2;
        indices.select_nth_unstable_by(mid, |&a, &b| {
            let ca = face_aabbs[a].center().component(axis);
            let cb = face_aabbs[b].center().component(axis);
            ca.partial_cmp(&cb).unwrap().then(a.cmp(&b))
        });
        let (lo, hi) = indices.split_at_mut(mid);
        BvhNode::Inner {
            aabb,
            left: Box::new(Self::build_node(face_aabbs, lo)),
            right: Box::new(Self::build_node(face_aabbs, hi)),
        }
    }

    pub fn face_aabb(&self, f: usize) -> &Aabb {
        &self.face_aabbs[f]
    }

    /// Collects faces whose AABB overlaps the query box, in sorted order.
    pub fn overlapping(&self, query: &Aabb) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![&self.root];
        while let Some(node) = stack.pop() {
            match node {
                BvhNode::Leaf { aabb, faces } => {
                    if aabb.overlaps(query) {
                        for &f in faces {
                            if self.face_aabbs[f].overlaps(query) {
                                out.push(f);
                            }
                        }
                    }
                }
                BvhNode::Inner { aabb, left, right } => {
                    if aabb.overlaps(query) {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Closest point on the mesh surface to `p` (branch and bound).
    pub fn closest_point(&self, mesh: &TriMesh, p: Vec3) -> (Vec3, usize) {
        let mut best = (Vec3::default(), usize::MAX);
        let mut best_d = f64::INFINITY;
        self.closest_point_rec(&self.root, mesh, p, &mut best, &mut best_d);
        best
    }

    fn closest_point_rec(
        &self,
        node: &BvhNode,
        mesh: &TriMesh,
        p: Vec3,
        best: &mut (Vec3, usize),
        best_d: &mut f64,
    ) {
        match node {
            BvhNode::Leaf { faces, .. } => {
                for &f in faces {
                    let [a, b, c] = mesh.face_vertices(f);
                    let q = closest_point_on_triangle(p, a, b, c);
                    let d = p.dist_sq(q);
                    if d < *best_d {
                        *best_d = d;
                        *best = (q, f);
                    }
                }
            }
            BvhNode::Inner { left, right, .. } => {
                let (la, ra) = (node_aabb(left), node_aabb(right));
                let dl = la.dist_sq_to_point(p);
                let dr = ra.dist_sq_to_point(p);
                let (first, second, d_first, d_second) = if dl <= dr {
                    (left, right, dl, dr)
                } else {
                    (right, left, dr, dl)
                };
                if d_first < *best_d {
                    self.closest_point_rec(first, mesh, p, best, best_d);
                }
                if d_second < *best_d {
                    self.closest_point_rec(second, mesh, p, best, best_d);
                }
            }
        }
    }
}

fn node_aabb(node: &BvhNode) -> &Aabb {
    match node {
        BvhNode::Leaf { aabb, .. } => aabb,
        BvhNode::Inner { aabb, .. } => aabb,
    }
}

/// Closest point on triangle (a, b, c) to p (Ericson, Real-Time Collision
/// Detection, 5.1.5).
pub fn closest_point_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Proper intersection test for two triangles: true when the intersection has
/// positive length (or positive area when coplanar). Touching at a point or
/// along a shared boundary does not count.
pub fn triangles_intersect(t1: [Vec3; 3], t2: [Vec3; 3]) -> bool {
    let n2 = (t2[1] - t2[0]).cross(t2[2] - t2[0]);
    let d1: Vec<f64> = t1.iter().map(|&v| n2.dot(v - t2[0])).collect();
    if d1.iter().all(|&d| d > 0.0) || d1.iter().all(|&d| d < 0.0) {
        return false;
    }
    let n1 = (t1[1] - t1[0]).cross(t1[2] - t1[0]);
    let d2: Vec<f64> = t2.iter().map(|&v| n1.dot(v - t1[0])).collect();
    if d2.iter().all(|&d| d > 0.0) || d2.iter().all(|&d| d < 0.0) {
        return false;
    }
    if d1.iter().all(|&d| d == 0.0) {
        return coplanar_overlap(t1, t2, n2);
    }
    if d2.iter().all(|&d| d == 0.0) {
        return coplanar_overlap(t1, t2, n1);
    }
    // Intersection line direction; project onto its dominant axis.
    let dir = n1.cross(n2);
    let axis = if dir.x.abs() >= dir.y.abs() && dir.x.abs() >= dir.z.abs() {
        0
    } else if dir.y.abs() >= dir.z.abs() {
        1
    } else {
        2
    };
    let i1 = line_interval(&t1, &d1, axis);
    let i2 = line_interval(&t2, &d2, axis);
    match (i1, i2) {
        (Some((a0, a1)), Some((b0, b1))) => a0.max(b0) < a1.min(b1),
        _ => false,
    }
}

/// Interval a triangle occupies along the plane-intersection line, projected
/// onto `axis`. None when the triangle does not reach the other plane.
fn line_interval(tri: &[Vec3; 3], dist: &[f64], axis: usize) -> Option<(f64, f64)> {
    let mut ts: Vec<f64> = Vec::with_capacity(3);
    for i in 0..3 {
        if dist[i] == 0.0 {
            ts.push(tri[i].component(axis));
        }
    }
    for i in 0..3 {
        let j = (i + 1) % 3;
        if dist[i] * dist[j] < 0.0 {
            let t = dist[i] / (dist[i] - dist[j]);
            let p = tri[i] + (tri[j] - tri[i]) * t;
            ts.push(p.component(axis));
        }
    }
    if ts.is_empty() {
        return None;
    }
    let lo = ts.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Some((lo, hi))
}

/// Positive-area overlap of coplanar triangles via separating axes in the
/// shared plane.
fn coplanar_overlap(t1: [Vec3; 3], t2: [Vec3; 3], n: Vec3) -> bool {
    fn axes(t: [Vec3; 3], n: Vec3) -> impl Iterator<Item = Vec3> {
        (0..3).map(move |i| {
            let e = t[(i + 1) % 3] - t[i];
            n.cross(e)
        })
    }
    for axis in axes(t1, n).chain(axes(t2, n)) {
        if axis.norm_sq() == 0.0 {
            continue;
        }
        let proj = |t: &[Vec3; 3]| {
            let ps: Vec<f64> = t.iter().map(|&v| axis.dot(v)).collect();
            (
                ps.iter().cloned().fold(f64::INFINITY, f64::min),
                ps.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            )
        };
        let (a0, a1) = proj(&t1);
        let (b0, b1) = proj(&t2);
        if a0.max(b0) >= a1.min(b1) {
            return false; // separated or merely touching on this axis
        }
    }
    true
}

fn faces_share_vertex(a: &[usize; 3], b: &[usize; 3]) -> bool {
    a.iter().any(|v| b.contains(v))
}

/// Per-face flags: does this face properly intersect any non-adjacent face?
/// BVH-accelerated; identical to the all-pairs scan.
pub fn self_intersecting_faces(mesh: &TriMesh) -> Vec<bool> {
    let bvh = FaceBvh::build(mesh);
    let check = |fi: usize| -> bool {
        let f = mesh.faces[fi];
        let tri = mesh.face_vertices(fi);
        bvh.overlapping(bvh.face_aabb(fi)).into_iter().any(|fj| {
            fj != fi
                && !faces_share_vertex(&f, &mesh.faces[fj])
                && triangles_intersect(tri, mesh.face_vertices(fj))
        })
    };
    #[cfg(feature = "parallel")]
    {
        (0..mesh.face_count()).into_par_iter().map(check).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..mesh.face_count()).map(check).collect()
    }
}

/// Sequential twin of [`self_intersecting_faces`].
pub fn self_intersecting_faces_seq(mesh: &TriMesh) -> Vec<bool> {
    let bvh = FaceBvh::build(mesh);
    (0..mesh.face_count())
        .map(|fi| {
            let f = mesh.faces[fi];
            let tri = mesh.face_vertices(fi);
            bvh.overlapping(bvh.face_aabb(fi)).into_iter().any(|fj| {
                fj != fi
                    && !faces_share_vertex(&f, &mesh.faces[fj])
                    && triangles_intersect(tri, mesh.face_vertices(fj))
            })
        })
        .collect()
}

/// Fraction of faces that properly intersect at least one non-adjacent face.
pub fn self_intersection_fraction(mesh: &TriMesh) -> f64 {
    if mesh.face_count() == 0 {
        return 0.0;
    }
    let flags = self_intersecting_faces(mesh);
    flags.iter().filter(|&&b| b).count() as f64 / mesh.face_count() as f64
}

/// Exhaustive all-pairs reference for [`self_intersection_fraction`].
pub fn self_intersection_fraction_bruteforce(mesh: &TriMesh) -> f64 {
    let n = mesh.face_count();
    if n == 0 {
        return 0.0;
    }
    let mut flags = vec![false; n];
    for i in 0..n {
        for j in 0..n {
            if i == j || faces_share_vertex(&mesh.faces[i], &mesh.faces[j]) {
                continue;
            }
            if triangles_intersect(mesh.face_vertices(i), mesh.face_vertices(j)) {
                flags[i] = true;
                break;
            }
        }
    }
    flags.iter().filter(|&&b| b).count() as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::icosphere;
    use crate::geometry::vec3::Vec3;

    fn merge(a: &TriMesh, b: &TriMesh) -> TriMesh {
        let offset = a.vertices.len();
        let mut vertices = a.vertices.clone();
        vertices.extend_from_slice(&b.vertices);
        let mut faces = a.faces.clone();
        faces.extend(b.faces.iter().map(|f| [f[0] + offset, f[1] + offset, f[2] + offset]));
        TriMesh { vertices, faces }
    }

    #[test]
    fn crossing_triangles_intersect() {
        let t1 = [
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 2.0, 0.0),
        ];
        let t2 = [
            Vec3::new(0.0, 1.0, -1.0),
            Vec3::new(0.0, 1.0, 1.0),
            Vec3::new(0.0, -2.0, 0.0),
        ];
        assert!(triangles_intersect(t1, t2));
        assert!(triangles_intersect(t2, t1));
    }

    #[test]
    fn disjoint_and_touching_triangles_do_not_intersect() {
        let t1 = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let far = [
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(1.0, 0.0, 1.0),
            Vec3::new(0.0, 1.0, 1.0),
        ];
        assert!(!triangles_intersect(t1, far));
        // Touching at a single vertex, not crossing.
        let touch = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(-1.0, 0.0, 1.0),
            Vec3::new(-1.0, 1.0, 1.0),
        ];
        assert!(!triangles_intersect(t1, touch));
    }

    #[test]
    fn coplanar_overlap_detected() {
        let t1 = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(0.0, 2.0, 0.0),
        ];
        let t2 = [
            Vec3::new(0.5, 0.5, 0.0),
            Vec3::new(2.5, 0.5, 0.0),
            Vec3::new(0.5, 2.5, 0.0),
        ];
        assert!(triangles_intersect(t1, t2));
        // Coplanar but disjoint.
        let t3 = [
            Vec3::new(5.0, 5.0, 0.0),
            Vec3::new(6.0, 5.0, 0.0),
            Vec3::new(5.0, 6.0, 0.0),
        ];
        assert!(!triangles_intersect(t1, t3));
    }

    #[test]
    fn icosphere_has_no_self_intersections() {
        let mesh = icosphere(2).unwrap();
        assert_eq!(self_intersection_fraction(&mesh), 0.0);
    }

    #[test]
    fn interpenetrating_spheres_match_bruteforce() {
        let a = icosphere(1).unwrap();
        let b = icosphere(1).unwrap().translated(Vec3::new(0.8, 0.1, 0.05));
        let mesh = merge(&a, &b);
        let fast = self_intersection_fraction(&mesh);
        let brute = self_intersection_fraction_bruteforce(&mesh);
        assert!(fast > 0.0);
        assert_eq!(fast, brute);
        assert_eq!(
            self_intersecting_faces(&mesh),
            self_intersecting_faces_seq(&mesh)
        );
    }

    #[test]
    fn fraction_is_bounded() {
        let a = icosphere(0).unwrap();
        let b = icosphere(0).unwrap().scaled(0.9);
        let mesh = merge(&a, &b);
        let f = self_intersection_fraction(&mesh);
        assert!((0.0..=1.0).contains(&f));
    }

    #[test]
    fn closest_point_on_triangle_regions() {
        let a = Vec3::new(0.0, 0.0, 0.0);
        let b = Vec3::new(1.0, 0.0, 0.0);
        let c = Vec3::new(0.0, 1.0, 0.0);
        // Interior projection.
        let q = closest_point_on_triangle(Vec3::new(0.2, 0.2, 3.0), a, b, c);
        assert!(q.dist(Vec3::new(0.2, 0.2, 0.0)) < 1e-12);
        // Vertex region.
        let q = closest_point_on_triangle(Vec3::new(-1.0, -1.0, 0.0), a, b, c);
        assert!(q.dist(a) < 1e-12);
        // Edge region.
        let q = closest_point_on_triangle(Vec3::new(0.5, -2.0, 0.0), a, b, c);
        assert!(q.dist(Vec3::new(0.5, 0.0, 0.0)) < 1e-12);
    }

    #[test]
    fn bvh_closest_point_matches_linear_scan() {
        let mesh = icosphere(2).unwrap();
        let bvh = FaceBvh::build(&mesh);
        let queries = [
            Vec3::new(2.0, 0.3, -0.2),
            Vec3::new(0.1, 0.1, 0.1),
            Vec3::new(-0.9, 0.4, 0.6),
        ];
        for p in queries {
            let (q_bvh, _) = bvh.closest_point(&mesh, p);
            let mut best = f64::INFINITY;
            let mut q_lin = Vec3::default();
            for f in 0..mesh.face_count() {
                let [a, b, c] = mesh.face_vertices(f);
                let q = closest_point_on_triangle(p, a, b, c);
                if p.dist_sq(q) < best {
                    best = p.dist_sq(q);
                    q_lin = q;
                }
            }
            assert!((p.dist(q_bvh) - p.dist(q_lin)).abs() < 1e-12);
        }
    }
}
