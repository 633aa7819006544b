//! Mesh voxelization: a voxel is foreground iff its center is inside the
//! watertight mesh, decided by ray-crossing parity. Rays that graze a
//! triangle (near-zero determinant, barycentric coordinates on an edge, or a
//! crossing that lands on a voxel center) are retried with small
//! deterministic transverse offsets.

use super::grid::VoxelGrid;
use crate::geometry::{TriMesh, Vec3};
use crate::{Error, Result};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

const DET_EPS: f64 = 1e-12;
const BARY_EPS: f64 = 1e-10;
const CENTER_EPS: f64 = 1e-10;
const JITTER: [(f64, f64); 8] = [
    (0.0, 0.0),
    (1.3e-4, 0.7e-4),
    (-2.1e-4, 1.9e-4),
    (3.4e-4, -2.6e-4),
    (-4.7e-4, -3.8e-4),
    (5.9e-4, 4.2e-4),
    (-6.6e-4, 5.5e-4),
    (7.8e-4, -6.9e-4),
];

pub fn voxelize(mesh: &TriMesh, dims: [usize; 3], spacing: [f64; 3], origin: Vec3) -> Result<VoxelGrid> {
    voxelize_along_axis(mesh, dims, spacing, origin, 0)
}

/// Sequential twin of [`voxelize`].
pub fn voxelize_seq(mesh: &TriMesh, dims: [usize; 3], spacing: [f64; 3], origin: Vec3) -> Result<VoxelGrid> {
    voxelize_impl(mesh, dims, spacing, origin, 0, false)
}

/// Parity test with rays along the chosen axis (0 = x, 1 = y, 2 = z). All
/// axes agree on watertight input; the cross-axis check is a test oracle.
pub fn voxelize_along_axis(
    mesh: &TriMesh,
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: Vec3,
    axis: usize,
) -> Result<VoxelGrid> {
    voxelize_impl(mesh, dims, spacing, origin, axis, cfg!(feature = "parallel"))
}

fn voxelize_impl(
    mesh: &TriMesh,
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: Vec3,
    axis: usize,
    parallel: bool,
) -> Result<VoxelGrid> {
    if !mesh.is_watertight() {
        return Err(Error::NonManifold("voxelize needs a watertight mesh".into()));
    }
    let mut grid = VoxelGrid::zeros(dims, spacing, origin)?;
    let (u_axis, v_axis) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    // Per-face transverse AABBs for cheap ray filtering.
    let face_bounds: Vec<[f64; 4]> = mesh
        .faces
        .iter()
        .map(|f| {
            let vs = [mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]];
            let us: Vec<f64> = vs.iter().map(|p| p.component(u_axis)).collect();
            let ws: Vec<f64> = vs.iter().map(|p| p.component(v_axis)).collect();
            [
                us.iter().cloned().fold(f64::INFINITY, f64::min),
                us.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                ws.iter().cloned().fold(f64::INFINITY, f64::min),
                ws.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            ]
        })
        .collect();

    let n_axis = dims[axis];
    let n_u = dims[u_axis];
    let n_v = dims[v_axis];
    let ray_start = origin.component(axis) - spacing[axis];
    let centers_along: Vec<f64> = (0..n_axis)
        .map(|t| origin.component(axis) + (t as f64 + 0.5) * spacing[axis])
        .collect();

    let column = |ju: usize, jv: usize| -> Vec<bool> {
        let cu = origin.component(u_axis) + (ju as f64 + 0.5) * spacing[u_axis];
        let cv = origin.component(v_axis) + (jv as f64 + 0.5) * spacing[v_axis];
        for (dju, djv) in JITTER {
            let pu = cu + dju * spacing[u_axis];
            let pv = cv + djv * spacing[v_axis];
            if let Some(crossings) = column_crossings(
                mesh,
                &face_bounds,
                axis,
                u_axis,
                v_axis,
                pu,
                pv,
                ray_start,
                &centers_along,
            ) {
                return parity_fill(&crossings, &centers_along, ray_start);
            }
        }
        // Every jitter grazed; fall back to strict comparisons on the last try.
        let crossings = column_crossings_lenient(
            mesh,
            &face_bounds,
            axis,
            u_axis,
            v_axis,
            cu + JITTER[7].0 * spacing[u_axis],
            cv + JITTER[7].1 * spacing[v_axis],
            ray_start,
        );
        parity_fill(&crossings, &centers_along, ray_start)
    };

    let columns: Vec<(usize, usize)> = (0..n_v)
        .flat_map(|jv| (0..n_u).map(move |ju| (ju, jv)))
        .collect();
    let compute = |&(ju, jv): &(usize, usize)| ((ju, jv), column(ju, jv));
    let results: Vec<((usize, usize), Vec<bool>)> = if parallel {
        #[cfg(feature = "parallel")]
        {
            columns.par_iter().map(compute).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            columns.iter().map(compute).collect()
        }
    } else {
        columns.iter().map(compute).collect()
    };
    for ((ju, jv), bits) in results {
        for (t, inside) in bits.into_iter().enumerate() {
            let mut ijk = [0usize; 3];
            ijk[axis] = t;
            ijk[u_axis] = ju;
            ijk[v_axis] = jv;
            if inside {
                grid.set(ijk[0], ijk[1], ijk[2], 1.0);
            }
        }
    }
    Ok(grid)
}

/// Crossing parameters (distance from ray start) for one ray, or None if any
/// intersection is numerically grazing and the ray should be jittered.
#[allow(clippy::too_many_arguments)]
fn column_crossings(
    mesh: &TriMesh,
    face_bounds: &[[f64; 4]],
    axis: usize,
    u_axis: usize,
    v_axis: usize,
    pu: f64,
    pv: f64,
    ray_start: f64,
    centers_along: &[f64],
) -> Option<Vec<f64>> {
    let mut crossings = Vec::new();
    for (fi, f) in mesh.faces.iter().enumerate() {
        let b = &face_bounds[fi];
        if pu < b[0] - 1e-9 || pu > b[1] + 1e-9 || pv < b[2] - 1e-9 || pv > b[3] + 1e-9 {
            continue;
        }
        let tri = [mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]];
        match ray_triangle(tri, axis, u_axis, v_axis, pu, pv, ray_start) {
            RayHit::Miss => {}
            RayHit::Hit(t) => crossings.push(t),
            RayHit::Grazing => return None,
        }
    }
    // A crossing landing on a voxel center is ambiguous; jitter instead.
    for &t in &crossings {
        for &c in centers_along {
            if (t - (c - ray_start)).abs() < CENTER_EPS {
                return None;
            }
        }
    }
    crossings.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(crossings)
}

#[allow(clippy::too_many_arguments)]
fn column_crossings_lenient(
    mesh: &TriMesh,
    face_bounds: &[[f64; 4]],
    axis: usize,
    u_axis: usize,
    v_axis: usize,
    pu: f64,
    pv: f64,
    ray_start: f64,
) -> Vec<f64> {
    let mut crossings = Vec::new();
    for (fi, f) in mesh.faces.iter().enumerate() {
        let b = &face_bounds[fi];
        if pu < b[0] - 1e-9 || pu > b[1] + 1e-9 || pv < b[2] - 1e-9 || pv > b[3] + 1e-9 {
            continue;
        }
        let tri = [mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]];
        if let Some(t) = ray_triangle_lenient(tri, axis, u_axis, v_axis, pu, pv, ray_start) {
            crossings.push(t);
        }
    }
    crossings.sort_by(|a, b| a.partial_cmp(b).unwrap());
    crossings
}

enum RayHit {
    Miss,
    Hit(f64),
    Grazing,
}

/// Axis-aligned ray vs triangle in 2D barycentric form. The ray runs along
/// `axis` from `ray_start`, through the transverse point (pu, pv).
fn ray_triangle(
    tri: [Vec3; 3],
    axis: usize,
    u_axis: usize,
    v_axis: usize,
    pu: f64,
    pv: f64,
    ray_start: f64,
) -> RayHit {
    let (a, b, c) = (tri[0], tri[1], tri[2]);
    let (au, av) = (a.component(u_axis), a.component(v_axis));
    let (bu, bv) = (b.component(u_axis), b.component(v_axis));
    let (cu, cv) = (c.component(u_axis), c.component(v_axis));
    // Solve [bu-au, cu-au; bv-av, cv-av] * (beta, gamma) = (pu-au, pv-av).
    let m00 = bu - au;
    let m01 = cu - au;
    let m10 = bv - av;
    let m11 = cv - av;
    let det = m00 * m11 - m01 * m10;
    let scale = m00.abs().max(m01.abs()).max(m10.abs()).max(m11.abs());
    if det.abs() <= DET_EPS * scale.max(1e-30) * scale.max(1e-30) {
        // The triangle is (nearly) parallel to the ray. If the transverse
        // point is well outside its bounds it simply misses.
        return RayHit::Grazing;
    }
    let ru = pu - au;
    let rv = pv - av;
    let beta = (ru * m11 - rv * m01) / det;
    let gamma = (m00 * rv - m10 * ru) / det;
    let alpha = 1.0 - beta - gamma;
    let min_bary = alpha.min(beta).min(gamma);
    if min_bary < -BARY_EPS {
        return RayHit::Miss;
    }
    if min_bary <= BARY_EPS {
        return RayHit::Grazing; // on an edge or vertex
    }
    let hit_axis = alpha * a.component(axis) + beta * b.component(axis) + gamma * c.component(axis);
    RayHit::Hit(hit_axis - ray_start)
}

fn ray_triangle_lenient(
    tri: [Vec3; 3],
    axis: usize,
    u_axis: usize,
    v_axis: usize,
    pu: f64,
    pv: f64,
    ray_start: f64,
) -> Option<f64> {
    let (a, b, c) = (tri[0], tri[1], tri[2]);
    let m00 = b.component(u_axis) - a.component(u_axis);
    let m01 = c.component(u_axis) - a.component(u_axis);
    let m10 = b.component(v_axis) - a.component(v_axis);
    let m11 = c.component(v_axis) - a.component(v_axis);
    let det = m00 * m11 - m01 * m10;
    if det == 0.0 {
        return None;
    }
    let ru = pu - a.component(u_axis);
    let rv = pv - a.component(v_axis);
    let beta = (ru * m11 - rv * m01) / det;
    let gamma = (m00 * rv - m10 * ru) / det;
    let alpha = 1.0 - beta - gamma;
    if alpha < 0.0 || beta < 0.0 || gamma < 0.0 {
        return None;
    }
    let hit_axis = alpha * a.component(axis) + beta * b.component(axis) + gamma * c.component(axis);
    Some(hit_axis - ray_start)
}

fn parity_fill(crossings: &[f64], centers_along: &[f64], ray_start: f64) -> Vec<bool> {
    centers_along
        .iter()
        .map(|&c| {
            let t_center = c - ray_start;
            let count = crossings.iter().filter(|&&t| t < t_center).count();
            count % 2 == 1
        })
        .collect()
}
