//! Dirichlet energy of the latent field over the mesh graph and the smoothing
//! update used during fitting.
//!
//! The energy is Tr(Z^T L^p Z), evaluated with repeated sparse products so
//! L^p is never materialized. For a symmetric L and even p this equals the
//! squared Frobenius norm of L^(p/2) Z. The fitting update is
//! Z <- Z - step * L^p Z with the row-normalized flavor: one gradient step
//! equals p sweeps of uniform Laplacian smoothing.

use crate::decoder::LatentField;
use crate::diffcore::Tensor;
use crate::geometry::LaplacianMatrix;
use crate::{Error, Result};

fn check_dims(field: &LatentField, lap: &LaplacianMatrix, context: &'static str) -> Result<()> {
    if field.rows() != lap.n {
        return Err(Error::shape_mismatch(
            context,
            format!("{} rows", lap.n),
            format!("{}", field.rows()),
        ));
    }
    Ok(())
}

/// Tr(Z^T L^p Z) with p >= 1, computed as the elementwise product of
/// L^floor(p/2) Z and L^ceil(p/2) Z.
pub fn dirichlet_energy(field: &LatentField, lap: &LaplacianMatrix, p: usize) -> Result<f64> {
    if p == 0 {
        return Err(Error::InvalidArgument("dirichlet power p must be >= 1".into()));
    }
    check_dims(field, lap, "dirichlet_energy")?;
    let d = field.dim();
    let half = p / 2;
    let mut lo = field.tensor().data().to_vec();
    for _ in 0..half {
        lo = lap.apply(&lo, d);
    }
    let mut hi = lo.clone();
    for _ in 0..(p - 2 * half) {
        hi = lap.apply(&hi, d);
    }
    Ok(lo.iter().zip(&hi).map(|(a, b)| a * b).sum())
}

/// Z - step * L^p Z, applied as p repeated sparse multiplications.
pub fn laplacian_smooth_step(
    field: &LatentField,
    lap: &LaplacianMatrix,
    p: usize,
    step: f64,
) -> Result<LatentField> {
    if p == 0 {
        return Err(Error::InvalidArgument("dirichlet power p must be >= 1".into()));
    }
    check_dims(field, lap, "laplacian_smooth_step")?;
    let d = field.dim();
    let mut update = field.tensor().data().to_vec();
    for _ in 0..p {
        update = lap.apply(&update, d);
    }
    let mut out = field.tensor().data().to_vec();
    for (o, u) in out.iter_mut().zip(&update) {
        *o -= step * u;
    }
    Ok(LatentField::from_tensor(Tensor::from_vec(field.rows(), d, out)))
}
