use std::collections::BTreeMap;

use super::vec3::{Rotation, Vec3};
use crate::{Error, Result};

/// Watertight triangulated surface: vertices plus index triples.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<TriMesh> {
        let mesh = TriMesh { vertices, faces };
        mesh.validate_indices()?;
        Ok(mesh)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn validate_indices(&self) -> Result<()> {
        for (fi, f) in self.faces.iter().enumerate() {
            for &v in f {
                if v >= self.vertices.len() {
                    return Err(Error::InvalidArgument(format!(
                        "face {fi} references vertex {v} but mesh has {} vertices",
                        self.vertices.len()
                    )));
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::Degenerate(format!("face {fi} repeats a vertex index")));
            }
        }
        Ok(())
    }

    /// Undirected edges, each listed once with (lo, hi) ordering.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut set = std::collections::BTreeSet::new();
        for f in &self.faces {
            for k in 0..3 {
                let a = f[k];
                let b = f[(k + 1) % 3];
                set.insert((a.min(b), a.max(b)));
            }
        }
        set.into_iter().collect()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count() as i64 - self.edges().len() as i64 + self.face_count() as i64
    }

    /// Checks that every undirected edge borders exactly two faces and every
    /// directed edge appears exactly once (closed 2-manifold with consistent
    /// orientation).
    pub fn is_watertight(&self) -> bool {
        let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let a = f[k];
                let b = f[(k + 1) % 3];
                *directed.entry((a, b)).or_insert(0) += 1;
            }
        }
        directed.iter().all(|(&(a, b), &count)| {
            count == 1 && directed.get(&(b, a)).copied() == Some(1)
        })
    }

    /// Sorted neighbor lists, one per vertex.
    pub fn vertex_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj: Vec<std::collections::BTreeSet<usize>> =
            vec![std::collections::BTreeSet::new(); self.vertices.len()];
        for f in &self.faces {
            for k in 0..3 {
                let a = f[k];
                let b = f[(k + 1) % 3];
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
        adj.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    pub fn face_vertices(&self, fi: usize) -> [Vec3; 3] {
        let f = self.faces[fi];
        [self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]]
    }

    pub fn face_area(&self, fi: usize) -> f64 {
        let [u, v, w] = self.face_vertices(fi);
        0.5 * (v - u).cross(w - u).norm()
    }

    pub fn face_normal(&self, fi: usize) -> Vec3 {
        let [u, v, w] = self.face_vertices(fi);
        (v - u).cross(w - u).normalized()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    pub fn mean_edge_length(&self) -> f64 {
        let edges = self.edges();
        if edges.is_empty() {
            return 0.0;
        }
        let total: f64 = edges
            .iter()
            .map(|&(a, b)| self.vertices[a].dist(self.vertices[b]))
            .sum();
        total / edges.len() as f64
    }

    pub fn centroid(&self) -> Vec3 {
        let mut c = super::vec3::ZERO;
        for &v in &self.vertices {
            c += v;
        }
        c / self.vertices.len().max(1) as f64
    }

    /// Signed volume via the divergence theorem; positive for outward-oriented
    /// closed surfaces.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let u = self.vertices[f[0]];
                let v = self.vertices[f[1]];
                let w = self.vertices[f[2]];
                u.dot(v.cross(w)) / 6.0
            })
            .sum()
    }

    pub fn rotated(&self, r: &Rotation) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|&v| r.apply(v)).collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn translated(&self, t: Vec3) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|&v| v + t).collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn scaled(&self, s: f64) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|&v| v * s).collect(),
            faces: self.faces.clone(),
        }
    }
}

/// Centers a mesh on its vertex centroid and scales it into the unit sphere.
///
/// Returns the normalized mesh plus the (centroid, scale) pair that inverts
/// the transform: original = normalized * scale + centroid.
pub fn normalize_shape(mesh: &TriMesh) -> Result<(TriMesh, Vec3, f64)> {
    if mesh.vertices.is_empty() {
        return Err(Error::EmptyPointSet("normalize_shape needs >= 1 vertex"));
    }
    let centroid = mesh.centroid();
    let scale = mesh
        .vertices
        .iter()
        .map(|&v| (v - centroid).norm())
        .fold(0.0_f64, f64::max);
    if scale <= 0.0 {
        return Err(Error::Degenerate(
            "all vertices identical; zero normalization scale".into(),
        ));
    }
    let vertices = mesh.vertices.iter().map(|&v| (v - centroid) / scale).collect();
    Ok((
        TriMesh {
            vertices,
            faces: mesh.faces.clone(),
        },
        centroid,
        scale,
    ))
}

/// Inverse of [`normalize_shape`]: maps a normalized mesh back to world units.
pub fn denormalize_shape(mesh: &TriMesh, centroid: Vec3, scale: f64) -> TriMesh {
    TriMesh {
        vertices: mesh.vertices.iter().map(|&v| v * scale + centroid).collect(),
        faces: mesh.faces.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::icosphere;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    #[test]
    fn normalized_icosphere_is_identity_transform() {
        let sphere = icosphere(1).unwrap();
        let (out, c, s) = normalize_shape(&sphere).unwrap();
        assert!(c.norm() < 1e-12);
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(out.vertices.len(), sphere.vertices.len());
    }

    #[test]
    fn shifted_mesh_recovers_centroid() {
        let sphere = icosphere(1).unwrap();
        let shifted = sphere.translated(Vec3::new(5.0, 0.0, 0.0));
        let (norm, c, s) = normalize_shape(&shifted).unwrap();
        assert!((c - Vec3::new(5.0, 0.0, 0.0)).norm() < 1e-12);
        let back = denormalize_shape(&norm, c, s);
        for (a, b) in back.vertices.iter().zip(shifted.vertices.iter()) {
            assert!(a.dist(*b) < 1e-12);
        }
    }

    #[test]
    fn normalize_round_trip_on_random_mesh() {
        let mut rng = rng_from_seed(11);
        let mut mesh = icosphere(2).unwrap();
        for v in &mut mesh.vertices {
            *v = *v * (1.0 + rng.gen::<f64>()) + Vec3::new(3.0, -2.0, 0.5);
        }
        let (norm, c, s) = normalize_shape(&mesh).unwrap();
        assert!(norm.centroid().norm() < 1e-12);
        let max_norm = norm.vertices.iter().map(|v| v.norm()).fold(0.0_f64, f64::max);
        assert!((max_norm - 1.0).abs() < 1e-12);
        let back = denormalize_shape(&norm, c, s);
        for (a, b) in back.vertices.iter().zip(mesh.vertices.iter()) {
            assert!(a.dist(*b) < 1e-10);
        }
    }

    #[test]
    fn identical_vertices_error() {
        let mesh = TriMesh {
            vertices: vec![Vec3::new(1.0, 1.0, 1.0); 4],
            faces: vec![[0, 1, 2]],
        };
        assert!(normalize_shape(&mesh).is_err());
    }
}
