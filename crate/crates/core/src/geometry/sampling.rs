use rand::Rng;

use super::mesh::TriMesh;
use super::vec3::Vec3;
use crate::{Error, Result};

/// A point on a mesh surface with its differentiable parents: the face index
/// and the barycentric weights of the three face vertices.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceSample {
    pub point: Vec3,
    pub face: usize,
    pub bary: [f64; 3],
}

/// Oriented plane { x : normal . x = offset } with unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vec3,
    pub offset: f64,
}

impl Plane {
    pub fn new(normal: Vec3, offset: f64) -> Result<Plane> {
        let n = normal.norm();
        if n <= 0.0 || !normal.is_finite() {
            return Err(Error::InvalidArgument("plane normal must be nonzero".into()));
        }
        Ok(Plane {
            normal: normal / n,
            offset: offset / n,
        })
    }

    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// A point sampled on a mesh-plane intersection segment.
///
/// The point is p = r*x1 + (1-r)*x2 where x1, x2 are the segment endpoints
/// expressed in barycentric coordinates of the host face, so the gradient
/// of p with respect to the face vertices is the fixed linear map with
/// weights r*bary1 + (1-r)*bary2.
#[derive(Debug, Clone, Copy)]
pub struct SliceSample {
    pub point: Vec3,
    pub face: usize,
    pub bary1: [f64; 3],
    pub bary2: [f64; 3],
    pub r: f64,
}

impl SliceSample {
    /// Combined barycentric weights of the sample point itself.
    pub fn weights(&self) -> [f64; 3] {
        [
            self.r * self.bary1[0] + (1.0 - self.r) * self.bary2[0],
            self.r * self.bary1[1] + (1.0 - self.r) * self.bary2[1],
            self.r * self.bary1[2] + (1.0 - self.r) * self.bary2[2],
        ]
    }
}

/// Draws `n` points uniformly over the surface: faces chosen with probability
/// proportional to area, positions uniform within each face.
pub fn sample_surface(mesh: &TriMesh, n: usize, rng: &mut impl Rng) -> Result<Vec<SurfaceSample>> {
    let cumulative = area_cumulative(mesh)?;
    let total = *cumulative.last().unwrap();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rng.gen::<f64>() * total;
        let face = partition_point_or_last(&cumulative, u);
        // Uniform barycentric via the square-root trick.
        let r1: f64 = rng.gen();
        let r2: f64 = rng.gen();
        let s = r1.sqrt();
        let bary = [1.0 - s, s * (1.0 - r2), s * r2];
        let [a, b, c] = mesh.face_vertices(face);
        let point = a * bary[0] + b * bary[1] + c * bary[2];
        out.push(SurfaceSample { point, face, bary });
    }
    Ok(out)
}

/// Like [`sample_surface`] but returns bare points.
pub fn sample_surface_points(mesh: &TriMesh, n: usize, rng: &mut impl Rng) -> Result<Vec<Vec3>> {
    Ok(sample_surface(mesh, n, rng)?.iter().map(|s| s.point).collect())
}

fn area_cumulative(mesh: &TriMesh) -> Result<Vec<f64>> {
    let mut cumulative = Vec::with_capacity(mesh.face_count());
    let mut acc = 0.0;
    for f in 0..mesh.face_count() {
        acc += mesh.face_area(f);
        cumulative.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::Degenerate("mesh has zero total area".into()));
    }
    Ok(cumulative)
}

/// First index whose cumulative value exceeds u; clamps to the last index so
/// u == total never falls off the end.
fn partition_point_or_last(cumulative: &[f64], u: f64) -> usize {
    let idx = cumulative.partition_point(|&c| c <= u);
    idx.min(cumulative.len() - 1)
}

/// One mesh-plane intersection segment within a single face.
#[derive(Debug, Clone, Copy)]
pub struct SliceSegment {
    pub face: usize,
    pub x1: Vec3,
    pub x2: Vec3,
    pub bary1: [f64; 3],
    pub bary2: [f64; 3],
    pub length: f64,
}

/// Intersects every face with the plane.
///
/// Degenerate cases are skipped: a face lying entirely in the plane and a
/// face touching it at a single vertex contribute nothing.
pub fn plane_mesh_segments(mesh: &TriMesh, plane: &Plane) -> Vec<SliceSegment> {
    let mut segments = Vec::new();
    for (fi, f) in mesh.faces.iter().enumerate() {
        let verts = [mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]];
        let d = [
            plane.signed_distance(verts[0]),
            plane.signed_distance(verts[1]),
            plane.signed_distance(verts[2]),
        ];
        let mut points: Vec<(Vec3, [f64; 3])> = Vec::with_capacity(2);
        let on = |i: usize| d[i] == 0.0;
        let n_on = (0..3).filter(|&i| on(i)).count();
        if n_on == 3 {
            continue; // face lies in the plane
        }
        for i in 0..3 {
            if on(i) {
                let mut bary = [0.0; 3];
                bary[i] = 1.0;
                points.push((verts[i], bary));
            }
        }
        for i in 0..3 {
            let j = (i + 1) % 3;
            if d[i] * d[j] < 0.0 {
                let t = d[i] / (d[i] - d[j]);
                let p = verts[i] + (verts[j] - verts[i]) * t;
                let mut bary = [0.0; 3];
                bary[i] = 1.0 - t;
                bary[j] = t;
                points.push((p, bary));
            }
        }
        if points.len() != 2 {
            continue; // single-vertex touch or no crossing
        }
        let (x1, bary1) = points[0];
        let (x2, bary2) = points[1];
        segments.push(SliceSegment {
            face: fi,
            x1,
            x2,
            bary1,
            bary2,
            length: x1.dist(x2),
        });
    }
    segments
}

/// Samples `m` points on the mesh-plane intersection, uniform along the total
/// intersection length: segments drawn proportional to length, the position
/// within a segment drawn as r ~ U(0,1).
///
/// An empty intersection yields an empty vector.
pub fn plane_mesh_intersection_samples(
    mesh: &TriMesh,
    plane: &Plane,
    m: usize,
    rng: &mut impl Rng,
) -> Vec<SliceSample> {
    let segments = plane_mesh_segments(mesh, plane);
    if segments.is_empty() {
        return Vec::new();
    }
    let mut cumulative = Vec::with_capacity(segments.len());
    let mut acc = 0.0;
    for s in &segments {
        acc += s.length;
        cumulative.push(acc);
    }
    if !(acc > 0.0) {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let u = rng.gen::<f64>() * acc;
        let seg = &segments[partition_point_or_last(&cumulative, u)];
        let r: f64 = rng.gen();
        out.push(SliceSample {
            point: seg.x1 * r + seg.x2 * (1.0 - r),
            face: seg.face,
            bary1: seg.bary1,
            bary2: seg.bary2,
            r,
        });
    }
    out
}
