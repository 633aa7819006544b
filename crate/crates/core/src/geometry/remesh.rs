//! Isotropic remeshing: per iteration, split edges longer than 4/3 of the
//! target length, collapse edges shorter than 4/5, flip edges toward valence
//! 6, then relax vertices tangentially and project them back onto the input
//! surface.

use std::collections::{BTreeMap, BTreeSet};

use super::intersect::FaceBvh;
use super::mesh::TriMesh;
use super::vec3::{Vec3, ZERO};
use crate::{Error, Result};

const SPLIT_FACTOR: f64 = 4.0 / 3.0;
const COLLAPSE_FACTOR: f64 = 4.0 / 5.0;
const SMOOTH_LAMBDA: f64 = 0.5;
const TARGET_VALENCE: i64 = 6;

/// Botsch-Kobbelt isotropic remeshing of a closed manifold mesh.
///
/// Collapses that would break manifoldness are skipped. The output is again
/// watertight with Euler characteristic 2.
pub fn isotropic_remesh(mesh: &TriMesh, target_edge_length: f64, iterations: usize) -> Result<TriMesh> {
    if !(target_edge_length > 0.0) {
        return Err(Error::InvalidArgument(
            "target edge length must be positive".into(),
        ));
    }
    if !mesh.is_watertight() {
        return Err(Error::NonManifold("isotropic_remesh needs a watertight mesh".into()));
    }
    if iterations == 0 {
        return Ok(mesh.clone());
    }

    let reference = mesh.clone();
    let bvh = FaceBvh::build(&reference);
    let mut vertices = mesh.vertices.clone();
    let mut faces = mesh.faces.clone();
    let high = SPLIT_FACTOR * target_edge_length;
    let low = COLLAPSE_FACTOR * target_edge_length;

    for _ in 0..iterations {
        split_long_edges(&mut vertices, &mut faces, high);
        collapse_short_edges(&mut vertices, &mut faces, low, high);
        flip_for_valence(&vertices, &mut faces);
        tangential_relax(&mut vertices, &faces, &reference, &bvh);
    }

    let out = compact(vertices, faces);
    if !out.is_watertight() || out.euler_characteristic() != 2 {
        return Err(Error::NonManifold(
            "remeshing produced a non-watertight mesh".into(),
        ));
    }
    Ok(out)
}

fn sorted_edge(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn edge_face_map(faces: &[[usize; 3]]) -> BTreeMap<(usize, usize), Vec<usize>> {
    let mut map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (fi, f) in faces.iter().enumerate() {
        for k in 0..3 {
            map.entry(sorted_edge(f[k], f[(k + 1) % 3]))
                .or_default()
                .push(fi);
        }
    }
    map
}

fn neighbor_map(faces: &[[usize; 3]], n: usize) -> Vec<BTreeSet<usize>> {
    let mut adj = vec![BTreeSet::new(); n];
    for f in faces {
        for k in 0..3 {
            let a = f[k];
            let b = f[(k + 1) % 3];
            adj[a].insert(b);
            adj[b].insert(a);
        }
    }
    adj
}

fn split_long_edges(vertices: &mut Vec<Vec3>, faces: &mut Vec<[usize; 3]>, high: f64) {
    loop {
        let edge_faces = edge_face_map(faces);
        let mut long: Vec<((usize, usize), f64)> = edge_faces
            .keys()
            .map(|&(a, b)| ((a, b), vertices[a].dist(vertices[b])))
            .filter(|&(_, len)| len > high)
            .collect();
        if long.is_empty() {
            break;
        }
        // Longest first; ties broken by index for determinism.
        long.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
        let mut touched = vec![false; faces.len()];
        let mut replacements: Vec<[usize; 3]> = Vec::new();
        let mut dead: Vec<usize> = Vec::new();
        let mut split_any = false;
        for ((a, b), _) in long {
            let fs = &edge_faces[&(a, b)];
            if fs.iter().any(|&f| touched[f]) {
                continue;
            }
            let mid = vertices.len();
            vertices.push((vertices[a] + vertices[b]) * 0.5);
            for &fi in fs {
                touched[fi] = true;
                dead.push(fi);
                let f = faces[fi];
                // Rotate so the split edge is (f[0], f[1]) in face order.
                let k = (0..3)
                    .find(|&k| sorted_edge(f[k], f[(k + 1) % 3]) == (a, b))
                    .unwrap();
                let (p, q, r) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
                replacements.push([p, mid, r]);
                replacements.push([mid, q, r]);
            }
            split_any = true;
        }
        if !split_any {
            break;
        }
        remove_faces(faces, &mut dead);
        faces.extend(replacements);
    }
}

fn remove_faces(faces: &mut Vec<[usize; 3]>, dead: &mut Vec<usize>) {
    dead.sort_unstable();
    dead.dedup();
    for &fi in dead.iter().rev() {
        faces.swap_remove(fi);
    }
}

fn collapse_short_edges(vertices: &mut [Vec3], faces: &mut Vec<[usize; 3]>, low: f64, high: f64) {
    loop {
        let adj = neighbor_map(faces, vertices.len());
        let edge_faces = edge_face_map(faces);
        let mut short: Vec<((usize, usize), f64)> = edge_faces
            .keys()
            .map(|&(a, b)| ((a, b), vertices[a].dist(vertices[b])))
            .filter(|&(_, len)| len < low)
            .collect();
        if short.is_empty() {
            break;
        }
        short.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap().then(x.0.cmp(&y.0)));
        let mut locked = vec![false; vertices.len()];
        let mut collapsed_any = false;
        for ((a, b), _) in short {
            if locked[a] || locked[b] {
                continue;
            }
            if !collapse_is_safe(vertices, &adj, a, b, high) {
                continue;
            }
            let mid = (vertices[a] + vertices[b]) * 0.5;
            vertices[a] = mid;
            for f in faces.iter_mut() {
                for v in f.iter_mut() {
                    if *v == b {
                        *v = a;
                    }
                }
            }
            faces.retain(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2]);
            locked[a] = true;
            locked[b] = true;
            for &v in adj[a].union(&adj[b]) {
                locked[v] = true;
            }
            collapsed_any = true;
        }
        if !collapsed_any {
            break;
        }
    }
}

fn collapse_is_safe(
    vertices: &[Vec3],
    adj: &[BTreeSet<usize>],
    a: usize,
    b: usize,
    high: f64,
) -> bool {
    // Link condition on a closed manifold: the endpoints share exactly the
    // two opposite vertices of the incident faces.
    let common: Vec<usize> = adj[a].intersection(&adj[b]).copied().collect();
    if common.len() != 2 {
        return false;
    }
    // A valence-3 opposite vertex would drop to valence 2.
    if common.iter().any(|&v| adj[v].len() <= 3) {
        return false;
    }
    // Keep the result collapsible into the target band: no resulting edge may
    // exceed the split threshold.
    let mid = (vertices[a] + vertices[b]) * 0.5;
    adj[a]
        .union(&adj[b])
        .filter(|&&v| v != a && v != b)
        .all(|&v| mid.dist(vertices[v]) <= high)
}

fn flip_for_valence(vertices: &[Vec3], faces: &mut Vec<[usize; 3]>) {
    for _round in 0..10 {
        let adj = neighbor_map(faces, vertices.len());
        let edge_faces = edge_face_map(faces);
        let valence = |v: usize, delta: i64| (adj[v].len() as i64 + delta - TARGET_VALENCE).abs();
        let mut touched = vec![false; faces.len()];
        let mut improved = false;
        for (&(a, b), fs) in &edge_faces {
            if fs.len() != 2 || fs.iter().any(|&f| touched[f]) {
                continue;
            }
            let (f1, f2) = (fs[0], fs[1]);
            let c = opposite_vertex(&faces[f1], a, b);
            let d = opposite_vertex(&faces[f2], a, b);
            if c == d || adj[c].contains(&d) {
                continue;
            }
            if adj[a].len() <= 3 || adj[b].len() <= 3 {
                continue;
            }
            let before = valence(a, 0) + valence(b, 0) + valence(c, 0) + valence(d, 0);
            let after = valence(a, -1) + valence(b, -1) + valence(c, 1) + valence(d, 1);
            if after >= before {
                continue;
            }
            // Orientation-aware rewrite: the face holding directed edge a->b
            // becomes (a, d, c); the twin becomes (d, b, c).
            let (fa, fb) = if has_directed_edge(&faces[f1], a, b) {
                (f1, f2)
            } else {
                (f2, f1)
            };
            let cc = opposite_vertex(&faces[fa], a, b);
            let dd = opposite_vertex(&faces[fb], a, b);
            faces[fa] = [a, dd, cc];
            faces[fb] = [dd, b, cc];
            touched[fa] = true;
            touched[fb] = true;
            improved = true;
        }
        if !improved {
            break;
        }
    }
}

fn opposite_vertex(f: &[usize; 3], a: usize, b: usize) -> usize {
    *f.iter().find(|&&v| v != a && v != b).unwrap()
}

fn has_directed_edge(f: &[usize; 3], a: usize, b: usize) -> bool {
    (0..3).any(|k| f[k] == a && f[(k + 1) % 3] == b)
}

fn tangential_relax(vertices: &mut [Vec3], faces: &[[usize; 3]], reference: &TriMesh, bvh: &FaceBvh) {
    let n = vertices.len();
    let mut normals = vec![ZERO; n];
    for f in faces {
        let area_normal = (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]);
        for &v in f {
            normals[v] += area_normal;
        }
    }
    let adj = neighbor_map(faces, n);
    let mut relaxed = vertices.to_vec();
    for (v, neighbors) in adj.iter().enumerate() {
        if neighbors.is_empty() {
            continue;
        }
        let mut centroid = ZERO;
        for &u in neighbors {
            centroid += vertices[u];
        }
        centroid = centroid / neighbors.len() as f64;
        let normal = normals[v].normalized();
        let d = centroid - vertices[v];
        let tangential = d - normal * normal.dot(d);
        relaxed[v] = vertices[v] + tangential * SMOOTH_LAMBDA;
    }
    for (v, p) in relaxed.iter().enumerate() {
        let (q, _) = bvh.closest_point(reference, *p);
        vertices[v] = q;
    }
}

fn compact(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> TriMesh {
    let mut used = vec![false; vertices.len()];
    for f in &faces {
        for &v in f {
            used[v] = true;
        }
    }
    let mut remap = vec![usize::MAX; vertices.len()];
    let mut out_vertices = Vec::new();
    for (i, v) in vertices.into_iter().enumerate() {
        if used[i] {
            remap[i] = out_vertices.len();
            out_vertices.push(v);
        }
    }
    let out_faces = faces
        .into_iter()
        .map(|f| [remap[f[0]], remap[f[1]], remap[f[2]]])
        .collect();
    TriMesh {
        vertices: out_vertices,
        faces: out_faces,
    }
}
