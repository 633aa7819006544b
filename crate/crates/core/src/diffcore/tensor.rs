//! Dense rank-2 tensors (64-bit) and the forward kernels shared by the tape
//! and by untaped evaluation paths. The matmul kernel is the hot loop of both
//! training and fitting; it is parallelized over output rows, which keeps
//! results bitwise identical to the sequential kernel for any thread count.

use rand::Rng;

use crate::{Error, Result};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Row-major matrix of f64. Scalars are 1x1, row vectors 1xN.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Tensor {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
        assert_eq!(data.len(), rows * cols, "data length must equal rows*cols");
        Tensor { rows, cols, data }
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor::from_vec(1, 1, vec![v])
    }

    /// Fan-in-scaled uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    pub fn fan_in_uniform(rows: usize, cols: usize, fan_in: usize, rng: &mut impl Rng) -> Tensor {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        Tensor { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() needs a scalar tensor");
        self.data[0]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_finite(&self, context: &str) -> Result<()> {
        if self.all_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(context.to_string()))
        }
    }

    pub fn shape_string(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }
}

fn assert_same_shape(a: &Tensor, b: &Tensor, context: &'static str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape_mismatch(context, a.shape_string(), b.shape_string()));
    }
    Ok(())
}

/// C = A * B, parallel over rows of A.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.cols != b.rows {
        return Err(Error::shape_mismatch(
            "matmul",
            format!("inner dims to agree ({}x{})", a.rows, a.cols),
            b.shape_string(),
        ));
    }
    let mut out = Tensor::zeros(a.rows, b.cols);
    let n = b.cols;
    let kdim = a.cols;
    let bd = &b.data;
    let body = |(i, out_row): (usize, &mut [f64])| {
        let a_row = &a.data[i * kdim..(i + 1) * kdim];
        for (k, &aik) in a_row.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            let b_row = &bd[k * n..(k + 1) * n];
            for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                *o += aik * bkj;
            }
        }
    };
    #[cfg(feature = "parallel")]
    {
        out.data.par_chunks_mut(n).enumerate().for_each(body);
    }
    #[cfg(not(feature = "parallel"))]
    {
        out.data.chunks_mut(n).enumerate().for_each(body);
    }
    Ok(out)
}

/// Sequential twin of [`matmul`]; bitwise-identical output.
pub fn matmul_seq(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.cols != b.rows {
        return Err(Error::shape_mismatch(
            "matmul",
            format!("inner dims to agree ({}x{})", a.rows, a.cols),
            b.shape_string(),
        ));
    }
    let mut out = Tensor::zeros(a.rows, b.cols);
    let n = b.cols;
    for i in 0..a.rows {
        let a_row = a.row(i);
        let out_row = &mut out.data[i * n..(i + 1) * n];
        for (k, &aik) in a_row.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            let b_row = &b.data[k * n..(k + 1) * n];
            for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                *o += aik * bkj;
            }
        }
    }
    Ok(out)
}

/// A^T * B without materializing the transpose.
pub fn matmul_transpose_a(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rows != b.rows {
        return Err(Error::shape_mismatch(
            "matmul_transpose_a",
            format!("leading dims to agree ({}x{})", a.rows, a.cols),
            b.shape_string(),
        ));
    }
    // (A^T B)[i, j] = sum_r A[r, i] * B[r, j]: accumulate rank-1 updates.
    let mut out = Tensor::zeros(a.cols, b.cols);
    let n = b.cols;
    for r in 0..a.rows {
        let a_row = a.row(r);
        let b_row = b.row(r);
        for (i, &ari) in a_row.iter().enumerate() {
            if ari == 0.0 {
                continue;
            }
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for (o, &brj) in out_row.iter_mut().zip(b_row) {
                *o += ari * brj;
            }
        }
    }
    Ok(out)
}

/// A * B^T without materializing the transpose.
pub fn matmul_transpose_b(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.cols != b.cols {
        return Err(Error::shape_mismatch(
            "matmul_transpose_b",
            format!("trailing dims to agree ({}x{})", a.rows, a.cols),
            b.shape_string(),
        ));
    }
    let mut out = Tensor::zeros(a.rows, b.rows);
    let n = b.rows;
    let kdim = a.cols;
    let body = |(i, out_row): (usize, &mut [f64])| {
        let a_row = &a.data[i * kdim..(i + 1) * kdim];
        for j in 0..n {
            let b_row = &b.data[j * kdim..(j + 1) * kdim];
            let mut acc = 0.0;
            for (&x, &y) in a_row.iter().zip(b_row) {
                acc += x * y;
            }
            out_row[j] = acc;
        }
    };
    #[cfg(feature = "parallel")]
    {
        out.data.par_chunks_mut(n).enumerate().for_each(body);
    }
    #[cfg(not(feature = "parallel"))]
    {
        out.data.chunks_mut(n).enumerate().for_each(body);
    }
    Ok(out)
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    assert_same_shape(a, b, "add")?;
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect();
    Ok(Tensor {
        rows: a.rows,
        cols: a.cols,
        data,
    })
}

/// Adds a 1xN bias row to every row of an MxN tensor.
pub fn add_row_broadcast(a: &Tensor, bias: &Tensor) -> Result<Tensor> {
    if bias.rows != 1 || bias.cols != a.cols {
        return Err(Error::shape_mismatch(
            "add_row_broadcast",
            format!("1x{}", a.cols),
            bias.shape_string(),
        ));
    }
    let mut out = a.clone();
    for r in 0..out.rows {
        let row = &mut out.data[r * out.cols..(r + 1) * out.cols];
        for (o, &b) in row.iter_mut().zip(&bias.data) {
            *o += b;
        }
    }
    Ok(out)
}

pub fn concat_cols(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rows != b.rows {
        return Err(Error::shape_mismatch(
            "concat_cols",
            format!("{} rows", a.rows),
            format!("{} rows", b.rows),
        ));
    }
    let cols = a.cols + b.cols;
    let mut data = Vec::with_capacity(a.rows * cols);
    for r in 0..a.rows {
        data.extend_from_slice(a.row(r));
        data.extend_from_slice(b.row(r));
    }
    Ok(Tensor {
        rows: a.rows,
        cols,
        data,
    })
}

pub fn relu(a: &Tensor) -> Tensor {
    let data = a.data.iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect();
    Tensor {
        rows: a.rows,
        cols: a.cols,
        data,
    }
}

pub fn scale(a: &Tensor, c: f64) -> Tensor {
    let data = a.data.iter().map(|&x| c * x).collect();
    Tensor {
        rows: a.rows,
        cols: a.cols,
        data,
    }
}

pub fn sum(a: &Tensor) -> Tensor {
    Tensor::scalar(a.data.iter().sum())
}

pub fn squared_norm(a: &Tensor) -> Tensor {
    Tensor::scalar(a.data.iter().map(|&x| x * x).sum())
}

/// Tiles a 1xN row into an MxN tensor.
pub fn repeat_rows(a: &Tensor, m: usize) -> Result<Tensor> {
    if a.rows != 1 {
        return Err(Error::shape_mismatch("repeat_rows", "1 row", a.shape_string()));
    }
    let mut data = Vec::with_capacity(m * a.cols);
    for _ in 0..m {
        data.extend_from_slice(&a.data);
    }
    Ok(Tensor {
        rows: m,
        cols: a.cols,
        data,
    })
}

/// Per-row normalization over the feature axis, with learnable gain and bias:
/// (x - mean) / sqrt(var + eps) * gain + bias. Also returns the per-row mean
/// and inverse standard deviation for the backward pass.
pub fn layer_norm(a: &Tensor, gain: &Tensor, bias: &Tensor, eps: f64) -> Result<(Tensor, Vec<f64>, Vec<f64>)> {
    for (t, name) in [(gain, "gain"), (bias, "bias")] {
        if t.rows != 1 || t.cols != a.cols {
            return Err(Error::shape_mismatch(
                "layer_norm",
                format!("1x{} {name}", a.cols),
                t.shape_string(),
            ));
        }
    }
    let n = a.cols as f64;
    let mut out = Tensor::zeros(a.rows, a.cols);
    let mut means = Vec::with_capacity(a.rows);
    let mut inv_stds = Vec::with_capacity(a.rows);
    for r in 0..a.rows {
        let row = a.row(r);
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let inv_std = 1.0 / (var + eps).sqrt();
        let out_row = &mut out.data[r * a.cols..(r + 1) * a.cols];
        for (j, (&x, o)) in row.iter().zip(out_row.iter_mut()).enumerate() {
            *o = (x - mean) * inv_std * gain.data[j] + bias.data[j];
        }
        means.push(mean);
        inv_stds.push(inv_std);
    }
    Ok((out, means, inv_stds))
}

/// Sparse row mixing: out\[j\] = sum_k w\[j\]\[k\].1 * a\[w\[j\]\[k\].0\].
/// Used to turn surface/slice samples into differentiable points.
pub fn blend_rows(a: &Tensor, weights: &[Vec<(usize, f64)>]) -> Tensor {
    let mut out = Tensor::zeros(weights.len(), a.cols);
    for (j, combo) in weights.iter().enumerate() {
        let out_row = &mut out.data[j * a.cols..(j + 1) * a.cols];
        for &(src, w) in combo {
            let src_row = &a.data[src * a.cols..(src + 1) * a.cols];
            for (o, &x) in out_row.iter_mut().zip(src_row) {
                *o += w * x;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn matmul_small_known_values() {
        let a = Tensor::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Tensor::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
        assert_eq!(matmul_seq(&a, &b).unwrap().data(), c.data());
    }

    #[test]
    fn parallel_and_sequential_matmul_are_bitwise_equal() {
        let mut rng = rng_from_seed(12);
        let a = Tensor::fan_in_uniform(37, 53, 53, &mut rng);
        let b = Tensor::fan_in_uniform(53, 29, 29, &mut rng);
        let p = matmul(&a, &b).unwrap();
        let s = matmul_seq(&a, &b).unwrap();
        assert_eq!(p.data(), s.data());
    }

    #[test]
    fn transpose_variants_match_explicit_transpose() {
        let mut rng = rng_from_seed(13);
        let a = Tensor::fan_in_uniform(5, 7, 7, &mut rng);
        let b = Tensor::fan_in_uniform(5, 4, 4, &mut rng);
        let at_b = matmul_transpose_a(&a, &b).unwrap();
        let mut at = Tensor::zeros(7, 5);
        for i in 0..5 {
            for j in 0..7 {
                at.set(j, i, a.get(i, j));
            }
        }
        let expected = matmul(&at, &b).unwrap();
        for (x, y) in at_b.data().iter().zip(expected.data()) {
            assert!((x - y).abs() < 1e-14);
        }

        let c = Tensor::fan_in_uniform(6, 7, 7, &mut rng);
        let a_ct = matmul_transpose_b(&a, &c).unwrap();
        let mut ct = Tensor::zeros(7, 6);
        for i in 0..6 {
            for j in 0..7 {
                ct.set(j, i, c.get(i, j));
            }
        }
        let expected = matmul(&a, &ct).unwrap();
        for (x, y) in a_ct.data().iter().zip(expected.data()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn layer_norm_of_constant_row_is_bias() {
        let a = Tensor::from_vec(2, 4, vec![3.0; 8]);
        let gain = Tensor::from_vec(1, 4, vec![2.0, 2.0, 2.0, 2.0]);
        let bias = Tensor::from_vec(1, 4, vec![0.5, -0.5, 1.0, 0.0]);
        let (out, _, _) = layer_norm(&a, &gain, &bias, 1e-5).unwrap();
        for r in 0..2 {
            for j in 0..4 {
                assert!((out.get(r, j) - bias.get(0, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn blend_rows_mixes_sparsely() {
        let a = Tensor::from_vec(3, 2, vec![1.0, 0.0, 0.0, 1.0, 2.0, 2.0]);
        let w = vec![vec![(0, 0.5), (2, 0.5)], vec![(1, 1.0)]];
        let out = blend_rows(&a, &w);
        assert_eq!(out.data(), &[1.5, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = Tensor::zeros(2, 3);
        let b = Tensor::zeros(2, 3);
        assert!(matmul(&a, &b).is_err());
        assert!(add(&a, &Tensor::zeros(3, 2)).is_err());
    }
}
