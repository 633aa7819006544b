use std::collections::HashMap;

use super::mesh::TriMesh;
use super::vec3::Vec3;
use crate::{Error, Result};

/// Unit-sphere template: an icosahedron subdivided `subdivisions` times with
/// every vertex re-projected to the sphere. V = 10*4^k + 2, F = 20*4^k.
pub fn icosphere(subdivisions: u32) -> Result<TriMesh> {
    if subdivisions > 7 {
        return Err(Error::InvalidArgument(format!(
            "icosphere subdivision {subdivisions} exceeds the memory guard (max 7)"
        )));
    }
    let mut mesh = icosahedron();
    for _ in 0..subdivisions {
        mesh = subdivide_once(&mesh);
    }
    for v in &mut mesh.vertices {
        *v = v.normalized();
    }
    Ok(mesh)
}

fn icosahedron() -> TriMesh {
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let raw = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ];
    let vertices = raw
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalized())
        .collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    TriMesh { vertices, faces }
}

fn subdivide_once(mesh: &TriMesh) -> TriMesh {
    let mut vertices = mesh.vertices.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut faces = Vec::with_capacity(mesh.faces.len() * 4);

    let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
        let key = (a.min(b), a.max(b));
        if let Some(&idx) = midpoint.get(&key) {
            return idx;
        }
        let m = ((vertices[a] + vertices[b]) * 0.5).normalized();
        let idx = vertices.len();
        vertices.push(m);
        midpoint.insert(key, idx);
        idx
    };

    for f in &mesh.faces {
        let [a, b, c] = *f;
        let ab = mid(a, b, &mut vertices);
        let bc = mid(b, c, &mut vertices);
        let ca = mid(c, a, &mut vertices);
        faces.push([a, ab, ca]);
        faces.push([b, bc, ab]);
        faces.push([c, ca, bc]);
        faces.push([ab, bc, ca]);
    }
    TriMesh { vertices, faces }
}
