//! The pointwise shape decoder: an MLP mapping a latent vector concatenated
//! with a template-sphere point to a vertex offset, plus the mesh deformation
//! map built from it.
//!
//! Architecture: (3+d) -> 724 -> 724 -> 362 -> 3, layer normalization before
//! each ReLU, no activation on the output layer. The output layer starts at
//! zero so the untrained decoder is the identity deformation.

pub mod checkpoint;

use rand::Rng;

use crate::diffcore::{tensor, Tape, Tensor, VarId};
use crate::geometry::{Rotation, TriMesh, Vec3};
use crate::{Error, Result};

pub use checkpoint::Checkpoint;

pub const HIDDEN: [usize; 3] = [724, 724, 362];
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Decoder weights: three hidden layers with layer-norm gain/bias, one linear
/// output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    pub latent_dim: usize,
    pub w1: Tensor,
    pub b1: Tensor,
    pub ln1_gain: Tensor,
    pub ln1_bias: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
    pub ln2_gain: Tensor,
    pub ln2_bias: Tensor,
    pub w3: Tensor,
    pub b3: Tensor,
    pub ln3_gain: Tensor,
    pub ln3_bias: Tensor,
    pub w4: Tensor,
    pub b4: Tensor,
}

impl DecoderParams {
    /// Hidden layers get fan-in-scaled uniform weights; the output layer is
    /// zero-initialized so decode(z, x) == 0 before training.
    pub fn init(latent_dim: usize, rng: &mut impl Rng) -> DecoderParams {
        assert!(latent_dim > 0, "latent dimension must be positive");
        let d_in = 3 + latent_dim;
        let [h1, h2, h3] = HIDDEN;
        DecoderParams {
            latent_dim,
            w1: Tensor::fan_in_uniform(d_in, h1, d_in, rng),
            b1: Tensor::fan_in_uniform(1, h1, d_in, rng),
            ln1_gain: Tensor::from_vec(1, h1, vec![1.0; h1]),
            ln1_bias: Tensor::zeros(1, h1),
            w2: Tensor::fan_in_uniform(h1, h2, h1, rng),
            b2: Tensor::fan_in_uniform(1, h2, h1, rng),
            ln2_gain: Tensor::from_vec(1, h2, vec![1.0; h2]),
            ln2_bias: Tensor::zeros(1, h2),
            w3: Tensor::fan_in_uniform(h2, h3, h2, rng),
            b3: Tensor::fan_in_uniform(1, h3, h2, rng),
            ln3_gain: Tensor::from_vec(1, h3, vec![1.0; h3]),
            ln3_bias: Tensor::zeros(1, h3),
            w4: Tensor::zeros(h3, 3),
            b4: Tensor::zeros(1, 3),
        }
    }

    pub fn input_dim(&self) -> usize {
        3 + self.latent_dim
    }

    /// Named tensors in a fixed order (checkpoint layout, optimizer slots).
    pub fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        vec![
            ("w1", &self.w1),
            ("b1", &self.b1),
            ("ln1_gain", &self.ln1_gain),
            ("ln1_bias", &self.ln1_bias),
            ("w2", &self.w2),
            ("b2", &self.b2),
            ("ln2_gain", &self.ln2_gain),
            ("ln2_bias", &self.ln2_bias),
            ("w3", &self.w3),
            ("b3", &self.b3),
            ("ln3_gain", &self.ln3_gain),
            ("ln3_bias", &self.ln3_bias),
            ("w4", &self.w4),
            ("b4", &self.b4),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![
            ("w1", &mut self.w1),
            ("b1", &mut self.b1),
            ("ln1_gain", &mut self.ln1_gain),
            ("ln1_bias", &mut self.ln1_bias),
            ("w2", &mut self.w2),
            ("b2", &mut self.b2),
            ("ln2_gain", &mut self.ln2_gain),
            ("ln2_bias", &mut self.ln2_bias),
            ("w3", &mut self.w3),
            ("b3", &mut self.b3),
            ("ln3_gain", &mut self.ln3_gain),
            ("ln3_bias", &mut self.ln3_bias),
            ("w4", &mut self.w4),
            ("b4", &mut self.b4),
        ]
    }
}

/// V x d matrix of per-vertex latent vectors. During training every row for a
/// shape is the same broadcast vector; fitting lets rows differ.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentField {
    data: Tensor,
}

impl LatentField {
    pub fn from_tensor(data: Tensor) -> LatentField {
        LatentField { data }
    }

    /// All rows set to one latent vector.
    pub fn broadcast(z: &[f64], rows: usize) -> LatentField {
        let mut data = Vec::with_capacity(rows * z.len());
        for _ in 0..rows {
            data.extend_from_slice(z);
        }
        LatentField {
            data: Tensor::from_vec(rows, z.len(), data),
        }
    }

    pub fn rows(&self) -> usize {
        self.data.rows()
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    pub fn tensor(&self) -> &Tensor {
        &self.data
    }

    pub fn tensor_mut(&mut self) -> &mut Tensor {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.data.row(i)
    }

    pub fn mean_row(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim()];
        for r in 0..self.rows() {
            for (m, &v) in mean.iter_mut().zip(self.data.row(r)) {
                *m += v;
            }
        }
        let n = self.rows().max(1) as f64;
        for m in &mut mean {
            *m /= n;
        }
        mean
    }

    /// Largest absolute difference between any row and the first row.
    pub fn max_row_spread(&self) -> f64 {
        if self.rows() == 0 {
            return 0.0;
        }
        let first = self.row(0).to_vec();
        let mut worst: f64 = 0.0;
        for r in 1..self.rows() {
            for (a, b) in self.row(r).iter().zip(&first) {
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }
}

/// Decoder parameter handles registered on a tape.
#[derive(Debug, Clone, Copy)]
pub struct DecoderVars {
    pub w1: VarId,
    pub b1: VarId,
    pub ln1_gain: VarId,
    pub ln1_bias: VarId,
    pub w2: VarId,
    pub b2: VarId,
    pub ln2_gain: VarId,
    pub ln2_bias: VarId,
    pub w3: VarId,
    pub b3: VarId,
    pub ln3_gain: VarId,
    pub ln3_bias: VarId,
    pub w4: VarId,
    pub b4: VarId,
}

impl DecoderVars {
    /// Registers every parameter tensor on the tape, as trainable leaves or as
    /// frozen constants.
    pub fn register(tape: &mut Tape, params: &DecoderParams, trainable: bool) -> DecoderVars {
        let mut reg = |t: &Tensor| {
            if trainable {
                tape.param(t.clone())
            } else {
                tape.constant(t.clone())
            }
        };
        DecoderVars {
            w1: reg(&params.w1),
            b1: reg(&params.b1),
            ln1_gain: reg(&params.ln1_gain),
            ln1_bias: reg(&params.ln1_bias),
            w2: reg(&params.w2),
            b2: reg(&params.b2),
            ln2_gain: reg(&params.ln2_gain),
            ln2_bias: reg(&params.ln2_bias),
            w3: reg(&params.w3),
            b3: reg(&params.b3),
            ln3_gain: reg(&params.ln3_gain),
            ln3_bias: reg(&params.ln3_bias),
            w4: reg(&params.w4),
            b4: reg(&params.b4),
        }
    }

    /// Parameter VarIds in the same order as `DecoderParams::tensors`.
    pub fn ids(&self) -> Vec<VarId> {
        vec![
            self.w1,
            self.b1,
            self.ln1_gain,
            self.ln1_bias,
            self.w2,
            self.b2,
            self.ln2_gain,
            self.ln2_bias,
            self.w3,
            self.b3,
            self.ln3_gain,
            self.ln3_bias,
            self.w4,
            self.b4,
        ]
    }

    /// MLP body on the tape: input rows (x | z) to offset rows.
    pub fn forward(&self, tape: &mut Tape, input: VarId) -> Result<VarId> {
        let mut h = input;
        for (w, b, gain, bias) in [
            (self.w1, self.b1, self.ln1_gain, self.ln1_bias),
            (self.w2, self.b2, self.ln2_gain, self.ln2_bias),
            (self.w3, self.b3, self.ln3_gain, self.ln3_bias),
        ] {
            h = tape.matmul(h, w)?;
            h = tape.add_row_broadcast(h, b)?;
            h = tape.layer_norm(h, gain, bias, LAYER_NORM_EPS)?;
            h = tape.relu(h);
        }
        let out = tape.matmul(h, self.w4)?;
        tape.add_row_broadcast(out, self.b4)
    }
}

/// Untaped forward pass; runs the same kernels as the tape, so values are
/// bitwise identical.
pub fn forward_values(params: &DecoderParams, input: &Tensor) -> Result<Tensor> {
    let mut h = input.clone();
    for (w, b, gain, bias) in [
        (&params.w1, &params.b1, &params.ln1_gain, &params.ln1_bias),
        (&params.w2, &params.b2, &params.ln2_gain, &params.ln2_bias),
        (&params.w3, &params.b3, &params.ln3_gain, &params.ln3_bias),
    ] {
        h = tensor::matmul(&h, w)?;
        h = tensor::add_row_broadcast(&h, b)?;
        h = tensor::layer_norm(&h, gain, bias, LAYER_NORM_EPS)?.0;
        h = tensor::relu(&h);
    }
    let out = tensor::matmul(&h, &params.w4)?;
    tensor::add_row_broadcast(&out, &params.b4)
}

/// Template vertex positions as a V x 3 tensor.
pub fn vertices_tensor(mesh: &TriMesh) -> Tensor {
    let mut data = Vec::with_capacity(mesh.vertex_count() * 3);
    for v in &mesh.vertices {
        data.extend_from_slice(&[v.x, v.y, v.z]);
    }
    Tensor::from_vec(mesh.vertex_count(), 3, data)
}

pub fn tensor_rows_to_points(t: &Tensor) -> Vec<Vec3> {
    assert_eq!(t.cols(), 3);
    (0..t.rows())
        .map(|r| {
            let row = t.row(r);
            Vec3::new(row[0], row[1], row[2])
        })
        .collect()
}

/// Decodes one offset for a single (latent, position) pair.
pub fn decode(params: &DecoderParams, z: &[f64], x: Vec3) -> Result<Vec3> {
    if z.len() != params.latent_dim {
        return Err(Error::shape_mismatch(
            "decode",
            format!("latent of dim {}", params.latent_dim),
            format!("{}", z.len()),
        ));
    }
    let mut input = Vec::with_capacity(3 + z.len());
    input.extend_from_slice(&[x.x, x.y, x.z]);
    input.extend_from_slice(z);
    let out = forward_values(params, &Tensor::from_vec(1, input.len(), input))?;
    let row = out.row(0);
    Ok(Vec3::new(row[0], row[1], row[2]))
}

/// Batched decode over all template vertices: output vertex v is
/// template vertex v plus decode(params, Z\[v\], x_v). Faces are unchanged.
pub fn deform_mesh(params: &DecoderParams, latents: &LatentField, template: &TriMesh) -> Result<TriMesh> {
    if latents.rows() != template.vertex_count() {
        return Err(Error::shape_mismatch(
            "deform_mesh",
            format!("{} latent rows", template.vertex_count()),
            format!("{}", latents.rows()),
        ));
    }
    if latents.dim() != params.latent_dim {
        return Err(Error::shape_mismatch(
            "deform_mesh",
            format!("latent dim {}", params.latent_dim),
            format!("{}", latents.dim()),
        ));
    }
    let xs = vertices_tensor(template);
    let input = tensor::concat_cols(&xs, latents.tensor())?;
    let offsets = forward_values(params, &input)?;
    let vertices = template
        .vertices
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let o = offsets.row(i);
            v + Vec3::new(o[0], o[1], o[2])
        })
        .collect();
    Ok(TriMesh {
        vertices,
        faces: template.faces.clone(),
    })
}

/// Rotates the template; connectivity and vertex norms are untouched.
pub fn rotate_template(template: &TriMesh, rotation: &Rotation) -> TriMesh {
    template.rotated(rotation)
}

/// Taped twin of [`deform_mesh`]: deformed vertex rows are the template rows
/// plus the decoded offsets. `template_verts` is a V x 3 tape value (usually
/// a constant), `latent_rows` a V x d tape value.
pub fn deform_on_tape(
    tape: &mut Tape,
    vars: &DecoderVars,
    template_verts: VarId,
    latent_rows: VarId,
) -> Result<VarId> {
    let input = tape.concat_cols(template_verts, latent_rows)?;
    let offsets = vars.forward(tape, input)?;
    tape.add(template_verts, offsets)
}
