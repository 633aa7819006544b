//! Exact Euclidean distance transform via the separable lower-envelope
//! algorithm (Felzenszwalb-Huttenlocher), spacing-aware, one pass per axis.

use super::grid::VoxelGrid;
use crate::{Error, Result};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Unsigned distance (model units) from every voxel center to the nearest
/// boundary voxel center.
///
/// The boundary is defined symmetrically with 6-adjacency: any voxel with a
/// face neighbor of the opposite class is a boundary voxel, on both sides of
/// the surface. This makes the transform invariant under mask complement.
pub fn unsigned_distance_transform(mask: &VoxelGrid) -> Result<VoxelGrid> {
    let fg = mask.foreground_count();
    if fg == 0 || fg == mask.len() {
        return Err(Error::Grid(
            "distance transform needs both foreground and background voxels".into(),
        ));
    }
    let boundary = boundary_voxels(mask);
    let mut sq = VoxelGrid::zeros(mask.dims, mask.spacing, mask.origin)?;
    for (v, &b) in sq.values.iter_mut().zip(&boundary) {
        *v = if b { 0.0 } else { f64::INFINITY };
    }
    distance_passes(&mut sq);
    for v in sq.values.iter_mut() {
        *v = v.sqrt();
    }
    Ok(sq)
}

/// Squared-distance passes over x, then y, then z.
fn distance_passes(sq: &mut VoxelGrid) {
    let [w, h, d] = sq.dims;
    let spacing = sq.spacing;

    // Pass along x: lines are contiguous runs of length w.
    {
        let wgt = spacing[0] * spacing[0];
        let body = |line: &mut [f64]| {
            let out = dt_line(line, wgt);
            line.copy_from_slice(&out);
        };
        #[cfg(feature = "parallel")]
        sq.values.par_chunks_mut(w).for_each(body);
        #[cfg(not(feature = "parallel"))]
        sq.values.chunks_mut(w).for_each(body);
    }

    // Passes along y and z: gather strided lines, transform, scatter back.
    for (axis, stride_mul) in [(1usize, w), (2usize, w * h)] {
        let wgt = spacing[axis] * spacing[axis];
        let n = sq.dims[axis];
        let line_starts: Vec<usize> = match axis {
            1 => (0..d).flat_map(|k| (0..w).map(move |i| i + w * h * k)).collect(),
            _ => (0..h).flat_map(|j| (0..w).map(move |i| i + w * j)).collect(),
        };
        let values = &mut sq.values;
        let compute = |&start: &usize| -> (usize, Vec<f64>) {
            let mut line = Vec::with_capacity(n);
            for t in 0..n {
                line.push(values[start + t * stride_mul]);
            }
            (start, dt_line(&line, wgt))
        };
        #[cfg(feature = "parallel")]
        let results: Vec<(usize, Vec<f64>)> = line_starts.par_iter().map(compute).collect();
        #[cfg(not(feature = "parallel"))]
        let results: Vec<(usize, Vec<f64>)> = line_starts.iter().map(compute).collect();
        for (start, line) in results {
            for (t, v) in line.into_iter().enumerate() {
                values[start + t * stride_mul] = v;
            }
        }
    }
}

/// 1D lower envelope: out[p] = min_q weight*(p-q)^2 + f[q], with infinite
/// entries ignored as parabola sources.
fn dt_line(f: &[f64], weight: f64) -> Vec<f64> {
    let n = f.len();
    let sources: Vec<usize> = (0..n).filter(|&q| f[q].is_finite()).collect();
    if sources.is_empty() {
        return f.to_vec();
    }
    let mut hull: Vec<usize> = Vec::with_capacity(sources.len());
    let mut breaks: Vec<f64> = Vec::with_capacity(sources.len() + 1);
    hull.push(sources[0]);
    breaks.push(f64::NEG_INFINITY);
    breaks.push(f64::INFINITY);
    let intersect = |q: usize, v: usize| -> f64 {
        let (qf, vf) = (q as f64, v as f64);
        ((f[q] + weight * (qf * qf)) - (f[v] + weight * (vf * vf)))
            / (2.0 * weight * (qf - vf))
    };
    for &q in &sources[1..] {
        loop {
            let v = *hull.last().unwrap();
            let s = intersect(q, v);
            if s <= breaks[hull.len() - 1] && hull.len() > 1 {
                hull.pop();
                breaks.pop();
            } else {
                breaks.pop();
                breaks.push(s);
                breaks.push(f64::INFINITY);
                hull.push(q);
                break;
            }
        }
    }
    let mut out = Vec::with_capacity(n);
    let mut k = 0usize;
    for p in 0..n {
        while breaks[k + 1] < p as f64 {
            k += 1;
        }
        let v = hull[k];
        let dp = p as f64 - v as f64;
        out.push(weight * (dp * dp) + f[v]);
    }
    out
}

/// Both-sided boundary: the voxel has a 6-neighbor of opposite class.
pub fn boundary_voxels(mask: &VoxelGrid) -> Vec<bool> {
    let [w, h, d] = mask.dims;
    let mut out = vec![false; mask.len()];
    for k in 0..d {
        for j in 0..h {
            for i in 0..w {
                let me = mask.get(i, j, k) > 0.5;
                let mut differs = false;
                let neighbors: [(i64, i64, i64); 6] = [
                    (-1, 0, 0),
                    (1, 0, 0),
                    (0, -1, 0),
                    (0, 1, 0),
                    (0, 0, -1),
                    (0, 0, 1),
                ];
                for (di, dj, dk) in neighbors {
                    let (ni, nj, nk) = (i as i64 + di, j as i64 + dj, k as i64 + dk);
                    if ni < 0 || nj < 0 || nk < 0 || ni >= w as i64 || nj >= h as i64 || nk >= d as i64 {
                        continue;
                    }
                    if (mask.get(ni as usize, nj as usize, nk as usize) > 0.5) != me {
                        differs = true;
                        break;
                    }
                }
                out[mask.index(i, j, k)] = differs;
            }
        }
    }
    out
}

/// O(n^2) reference: per voxel, scan every boundary voxel. Term association
/// matches the pass order of the separable transform so results agree
/// exactly.
pub fn unsigned_distance_transform_bruteforce(mask: &VoxelGrid) -> Result<VoxelGrid> {
    let fg = mask.foreground_count();
    if fg == 0 || fg == mask.len() {
        return Err(Error::Grid(
            "distance transform needs both foreground and background voxels".into(),
        ));
    }
    let boundary = boundary_voxels(mask);
    let [w, h, d] = mask.dims;
    let (wx, wy, wz) = (
        mask.spacing[0] * mask.spacing[0],
        mask.spacing[1] * mask.spacing[1],
        mask.spacing[2] * mask.spacing[2],
    );
    let boundary_coords: Vec<(usize, usize, usize)> = (0..d)
        .flat_map(|k| (0..h).flat_map(move |j| (0..w).map(move |i| (i, j, k))))
        .filter(|&(i, j, k)| boundary[mask.index(i, j, k)])
        .collect();
    let mut out = VoxelGrid::zeros(mask.dims, mask.spacing, mask.origin)?;
    for k in 0..d {
        for j in 0..h {
            for i in 0..w {
                let mut best = f64::INFINITY;
                for &(bi, bj, bk) in &boundary_coords {
                    let dx = i as f64 - bi as f64;
                    let dy = j as f64 - bj as f64;
                    let dz = k as f64 - bk as f64;
                    let sq = wz * (dz * dz) + (wy * (dy * dy) + wx * (dx * dx));
                    if sq < best {
                        best = sq;
                    }
                }
                out.set(i, j, k, best.sqrt());
            }
        }
    }
    Ok(out)
}
