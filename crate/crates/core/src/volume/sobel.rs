//! 3D Sobel gradient image: derivative kernel [-1, 0, 1] along the axis,
//! smoothing kernel [1, 2, 1] (x) [1, 2, 1] transverse, replicate padding at
//! the borders. Normalized by 32 and by the axis spacing so a unit-slope ramp
//! yields gradient 1 in value-per-model-unit.

use super::grid::{GradientGrid, VoxelGrid};
use crate::{Error, Result};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

const DERIV: [f64; 3] = [-1.0, 0.0, 1.0];
const SMOOTH: [f64; 3] = [1.0, 2.0, 1.0];

pub fn sobel_gradient(u: &VoxelGrid) -> Result<GradientGrid> {
    if u.dims.iter().any(|&d| d < 3) {
        return Err(Error::Grid(format!(
            "sobel_gradient needs dims >= 3 on every axis, got {:?}",
            u.dims
        )));
    }
    Ok(GradientGrid {
        gx: sobel_axis(u, 0),
        gy: sobel_axis(u, 1),
        gz: sobel_axis(u, 2),
    })
}

/// Sequential twin of [`sobel_gradient`].
pub fn sobel_gradient_seq(u: &VoxelGrid) -> Result<GradientGrid> {
    if u.dims.iter().any(|&d| d < 3) {
        return Err(Error::Grid(format!(
            "sobel_gradient needs dims >= 3 on every axis, got {:?}",
            u.dims
        )));
    }
    Ok(GradientGrid {
        gx: sobel_axis_impl(u, 0, false),
        gy: sobel_axis_impl(u, 1, false),
        gz: sobel_axis_impl(u, 2, false),
    })
}

fn sobel_axis(u: &VoxelGrid, axis: usize) -> VoxelGrid {
    sobel_axis_impl(u, axis, cfg!(feature = "parallel"))
}

fn sobel_axis_impl(u: &VoxelGrid, axis: usize, parallel: bool) -> VoxelGrid {
    let [w, h, d] = u.dims;
    let mut out = VoxelGrid::zeros(u.dims, u.spacing, u.origin).unwrap();
    let norm = 1.0 / (32.0 * u.spacing[axis]);
    let clamp = |v: i64, hi: usize| -> usize { v.clamp(0, hi as i64 - 1) as usize };
    let slab = w * h;
    let body = |(k, chunk): (usize, &mut [f64])| {
        for j in 0..h {
            for i in 0..w {
                let mut acc = 0.0;
                for (dk, wk) in kernel(axis, 2) {
                    for (dj, wj) in kernel(axis, 1) {
                        for (di, wi) in kernel(axis, 0) {
                            let ii = clamp(i as i64 + di, w);
                            let jj = clamp(j as i64 + dj, h);
                            let kk = clamp(k as i64 + dk, d);
                            acc += wi * wj * wk * u.get(ii, jj, kk);
                        }
                    }
                }
                chunk[i + w * j] = acc * norm;
            }
        }
    };
    if parallel {
        #[cfg(feature = "parallel")]
        out.values.par_chunks_mut(slab).enumerate().for_each(body);
        #[cfg(not(feature = "parallel"))]
        out.values.chunks_mut(slab).enumerate().for_each(body);
    } else {
        out.values.chunks_mut(slab).enumerate().for_each(body);
    }
    out
}

/// Kernel taps along one grid dimension: the derivative stencil on the
/// differentiated axis, the smoothing stencil elsewhere.
fn kernel(deriv_axis: usize, dim: usize) -> impl Iterator<Item = (i64, f64)> {
    let taps = if deriv_axis == dim { DERIV } else { SMOOTH };
    (-1i64..=1).zip(taps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    #[test]
    fn constant_grid_has_zero_gradient() {
        let mut g = VoxelGrid::zeros([4, 4, 4], [1.0, 1.0, 1.0], Vec3::default()).unwrap();
        for v in g.values.iter_mut() {
            *v = 3.7;
        }
        let grad = sobel_gradient(&g).unwrap();
        assert!(grad.gx.values.iter().all(|&v| v.abs() < 1e-12));
        assert!(grad.gy.values.iter().all(|&v| v.abs() < 1e-12));
        assert!(grad.gz.values.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn ramp_has_unit_gradient_in_the_interior() {
        let spacing = [0.5, 1.0, 2.0];
        let mut g = VoxelGrid::zeros([6, 5, 4], spacing, Vec3::default()).unwrap();
        for k in 0..4 {
            for j in 0..5 {
                for i in 0..6 {
                    g.set(i, j, k, i as f64 * spacing[0]);
                }
            }
        }
        let grad = sobel_gradient(&g).unwrap();
        for k in 1..3 {
            for j in 1..4 {
                for i in 1..5 {
                    assert!((grad.gx.get(i, j, k) - 1.0).abs() < 1e-12);
                    assert!(grad.gy.get(i, j, k).abs() < 1e-12);
                    assert!(grad.gz.get(i, j, k).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sobel_is_linear() {
        let mut rng = crate::rng::rng_from_seed(90);
        use rand::Rng;
        let mut u = VoxelGrid::zeros([5, 4, 4], [1.0, 1.0, 1.0], Vec3::default()).unwrap();
        let mut v = u.clone();
        for x in u.values.iter_mut() {
            *x = rng.gen();
        }
        for x in v.values.iter_mut() {
            *x = rng.gen();
        }
        let (a, b) = (2.5, -1.25);
        let mut combo = u.clone();
        for (c, (&uu, &vv)) in combo.values.iter_mut().zip(u.values.iter().zip(&v.values)) {
            *c = a * uu + b * vv;
        }
        let gu = sobel_gradient(&u).unwrap();
        let gv = sobel_gradient(&v).unwrap();
        let gc = sobel_gradient(&combo).unwrap();
        for idx in 0..combo.len() {
            let expect = a * gu.gx.values[idx] + b * gv.gx.values[idx];
            assert!((gc.gx.values[idx] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn undersized_grid_is_rejected() {
        let g = VoxelGrid::zeros([2, 4, 4], [1.0, 1.0, 1.0], Vec3::default()).unwrap();
        assert!(sobel_gradient(&g).is_err());
    }

    #[test]
    fn parallel_matches_sequential() {
        let mut rng = crate::rng::rng_from_seed(91);
        use rand::Rng;
        let mut u = VoxelGrid::zeros([7, 6, 5], [0.5, 1.0, 0.75], Vec3::default()).unwrap();
        for x in u.values.iter_mut() {
            *x = rng.gen();
        }
        let a = sobel_gradient(&u).unwrap();
        let b = sobel_gradient_seq(&u).unwrap();
        assert_eq!(a, b);
    }
}
