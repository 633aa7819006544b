use super::mesh::TriMesh;
use crate::{Error, Result};

/// Which uniform graph Laplacian to build.
///
/// `Combinatorial` is D - A: symmetric, integer-valued, the flavor used when
/// the latent Dirichlet energy must be a true quadratic form.
/// `RowNormalized` is I - D^-1 A: unit diagonal, each application is one step
/// of uniform Laplacian smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaplacianFlavor {
    Combinatorial,
    RowNormalized,
}

/// Sparse V x V uniform Laplacian in CSR form. Rows sum to zero.
#[derive(Debug, Clone)]
pub struct LaplacianMatrix {
    pub n: usize,
    pub flavor: LaplacianFlavor,
    row_offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// Builds the uniform Laplacian of the mesh connectivity.
///
/// Fails if any edge is not shared by exactly two faces (non-manifold input).
pub fn uniform_laplacian(mesh: &TriMesh, flavor: LaplacianFlavor) -> Result<LaplacianMatrix> {
    if !mesh.is_watertight() {
        return Err(Error::NonManifold(
            "uniform_laplacian requires a closed manifold mesh".into(),
        ));
    }
    let adj = mesh.vertex_adjacency();
    let n = mesh.vertex_count();
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_offsets.push(0);
    for (i, neighbors) in adj.iter().enumerate() {
        let deg = neighbors.len() as f64;
        // Entries kept in sorted column order: neighbors below i, the
        // diagonal, neighbors above i.
        let (diag, off) = match flavor {
            LaplacianFlavor::Combinatorial => (deg, -1.0),
            LaplacianFlavor::RowNormalized => (1.0, -1.0 / deg),
        };
        let mut placed_diag = false;
        for &j in neighbors {
            if j > i && !placed_diag {
                cols.push(i);
                vals.push(diag);
                placed_diag = true;
            }
            cols.push(j);
            vals.push(off);
        }
        if !placed_diag {
            cols.push(i);
            vals.push(diag);
        }
        row_offsets.push(cols.len());
    }
    Ok(LaplacianMatrix {
        n,
        flavor,
        row_offsets,
        cols,
        vals,
    })
}

impl LaplacianMatrix {
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        self.cols[lo..hi]
            .iter()
            .copied()
            .zip(self.vals[lo..hi].iter().copied())
    }

    /// Applies L to a row-major n x d field.
    pub fn apply(&self, field: &[f64], d: usize) -> Vec<f64> {
        assert_eq!(field.len(), self.n * d, "field size must be n*d");
        let mut out = vec![0.0; self.n * d];
        for i in 0..self.n {
            let row_out = &mut out[i * d..(i + 1) * d];
            for (j, w) in self.row(i) {
                let row_in = &field[j * d..(j + 1) * d];
                for (o, x) in row_out.iter_mut().zip(row_in) {
                    *o += w * x;
                }
            }
        }
        out
    }

    /// Dense representation, for small-matrix tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            for (j, w) in self.row(i) {
                m[i][j] = w;
            }
        }
        m
    }
}
