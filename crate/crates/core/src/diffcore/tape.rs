//! Reverse-mode differentiation tape.
//!
//! Each primitive records its inputs and whatever it needs for the backward
//! pass; `backward` walks the record in exact reverse order, accumulating
//! gradients into every use of a value. Loss-specific operations (Chamfer,
//! triangle quality, grid potentials) plug in through [`CustomGrad`] so the
//! tape stays free of geometry.

use std::rc::Rc;

use super::tensor::{self, Tensor};
use crate::{Error, Result};

/// Handle to a value on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarId(usize);

/// Backward rule for an operation the tape does not know about.
///
/// `backward` receives the forward input values and the gradient of the loss
/// with respect to the op's output, and returns one gradient per input (same
/// shapes as the inputs).
pub trait CustomGrad {
    fn backward(&self, inputs: &[&Tensor], output_grad: &Tensor) -> Vec<Tensor>;
}

enum Node {
    Leaf,
    MatMul {
        a: VarId,
        b: VarId,
    },
    Add {
        a: VarId,
        b: VarId,
    },
    AddRowBroadcast {
        a: VarId,
        bias: VarId,
    },
    ConcatCols {
        a: VarId,
        b: VarId,
    },
    Relu {
        a: VarId,
    },
    LayerNorm {
        a: VarId,
        gain: VarId,
        bias: VarId,
        means: Vec<f64>,
        inv_stds: Vec<f64>,
    },
    Scale {
        a: VarId,
        c: f64,
    },
    Sum {
        a: VarId,
    },
    SquaredNorm {
        a: VarId,
    },
    RepeatRows {
        a: VarId,
    },
    BlendRows {
        a: VarId,
        weights: Rc<Vec<Vec<(usize, f64)>>>,
    },
    Custom {
        inputs: Vec<VarId>,
        op: Rc<dyn CustomGrad>,
    },
}

pub struct Tape {
    nodes: Vec<Node>,
    values: Vec<Tensor>,
    needs_grad: Vec<bool>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Tape {
        Tape {
            nodes: Vec::new(),
            values: Vec::new(),
            needs_grad: Vec::new(),
        }
    }

    pub fn value(&self, id: VarId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, node: Node, value: Tensor, needs_grad: bool) -> VarId {
        debug_assert!(value.all_finite(), "non-finite primitive output");
        self.nodes.push(node);
        self.values.push(value);
        self.needs_grad.push(needs_grad);
        VarId(self.nodes.len() - 1)
    }

    fn wants(&self, id: VarId) -> bool {
        self.needs_grad[id.0]
    }

    /// Leaf whose gradient will be computed (a trainable parameter).
    pub fn param(&mut self, value: Tensor) -> VarId {
        self.push(Node::Leaf, value, true)
    }

    /// Leaf treated as a constant: no gradient is computed through it.
    pub fn constant(&mut self, value: Tensor) -> VarId {
        self.push(Node::Leaf, value, false)
    }

    pub fn matmul(&mut self, a: VarId, b: VarId) -> Result<VarId> {
        let v = tensor::matmul(self.value(a), self.value(b))?;
        let ng = self.wants(a) || self.wants(b);
        Ok(self.push(Node::MatMul { a, b }, v, ng))
    }

    pub fn add(&mut self, a: VarId, b: VarId) -> Result<VarId> {
        let v = tensor::add(self.value(a), self.value(b))?;
        let ng = self.wants(a) || self.wants(b);
        Ok(self.push(Node::Add { a, b }, v, ng))
    }

    pub fn add_row_broadcast(&mut self, a: VarId, bias: VarId) -> Result<VarId> {
        let v = tensor::add_row_broadcast(self.value(a), self.value(bias))?;
        let ng = self.wants(a) || self.wants(bias);
        Ok(self.push(Node::AddRowBroadcast { a, bias }, v, ng))
    }

    pub fn concat_cols(&mut self, a: VarId, b: VarId) -> Result<VarId> {
        let v = tensor::concat_cols(self.value(a), self.value(b))?;
        let ng = self.wants(a) || self.wants(b);
        Ok(self.push(Node::ConcatCols { a, b }, v, ng))
    }

    pub fn relu(&mut self, a: VarId) -> VarId {
        let v = tensor::relu(self.value(a));
        let ng = self.wants(a);
        self.push(Node::Relu { a }, v, ng)
    }

    pub fn layer_norm(&mut self, a: VarId, gain: VarId, bias: VarId, eps: f64) -> Result<VarId> {
        let (v, means, inv_stds) = tensor::layer_norm(self.value(a), self.value(gain), self.value(bias), eps)?;
        let ng = self.wants(a) || self.wants(gain) || self.wants(bias);
        Ok(self.push(
            Node::LayerNorm {
                a,
                gain,
                bias,
                means,
                inv_stds,
            },
            v,
            ng,
        ))
    }

    pub fn scale(&mut self, a: VarId, c: f64) -> VarId {
        let v = tensor::scale(self.value(a), c);
        let ng = self.wants(a);
        self.push(Node::Scale { a, c }, v, ng)
    }

    pub fn sum(&mut self, a: VarId) -> VarId {
        let v = tensor::sum(self.value(a));
        let ng = self.wants(a);
        self.push(Node::Sum { a }, v, ng)
    }

    pub fn squared_norm(&mut self, a: VarId) -> VarId {
        let v = tensor::squared_norm(self.value(a));
        let ng = self.wants(a);
        self.push(Node::SquaredNorm { a }, v, ng)
    }

    pub fn repeat_rows(&mut self, a: VarId, m: usize) -> Result<VarId> {
        let v = tensor::repeat_rows(self.value(a), m)?;
        let ng = self.wants(a);
        Ok(self.push(Node::RepeatRows { a }, v, ng))
    }

    pub fn blend_rows(&mut self, a: VarId, weights: Rc<Vec<Vec<(usize, f64)>>>) -> VarId {
        let v = tensor::blend_rows(self.value(a), &weights);
        let ng = self.wants(a);
        self.push(Node::BlendRows { a, weights }, v, ng)
    }

    /// Records an externally computed operation with its backward rule.
    pub fn custom(&mut self, inputs: Vec<VarId>, value: Tensor, op: Rc<dyn CustomGrad>) -> VarId {
        let ng = inputs.iter().any(|&i| self.wants(i));
        self.push(Node::Custom { inputs, op }, value, ng)
    }

    /// Reverse pass from a scalar loss. Returns gradients for every node that
    /// requires them; leaves off the path to the loss get zero gradients.
    pub fn backward(&self, loss: VarId) -> Result<Gradients> {
        if self.value(loss).shape() != (1, 1) {
            return Err(Error::shape_mismatch(
                "backward",
                "scalar loss (1x1)",
                self.value(loss).shape_string(),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            if !self.needs_grad[i] {
                continue;
            }
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            match &self.nodes[i] {
                Node::Leaf => {
                    grads[i] = Some(g);
                    continue;
                }
                Node::MatMul { a, b } => {
                    if self.wants(*a) {
                        let da = tensor::matmul_transpose_b(&g, self.value(*b))?;
                        accumulate(&mut grads, *a, da);
                    }
                    if self.wants(*b) {
                        let db = tensor::matmul_transpose_a(self.value(*a), &g)?;
                        accumulate(&mut grads, *b, db);
                    }
                }
                Node::Add { a, b } => {
                    if self.wants(*a) {
                        accumulate(&mut grads, *a, g.clone());
                    }
                    if self.wants(*b) {
                        accumulate(&mut grads, *b, g.clone());
                    }
                }
                Node::AddRowBroadcast { a, bias } => {
                    if self.wants(*a) {
                        accumulate(&mut grads, *a, g.clone());
                    }
                    if self.wants(*bias) {
                        accumulate(&mut grads, *bias, column_sums(&g));
                    }
                }
                Node::ConcatCols { a, b } => {
                    let ca = self.value(*a).cols();
                    let cb = self.value(*b).cols();
                    if self.wants(*a) {
                        accumulate(&mut grads, *a, slice_cols(&g, 0, ca));
                    }
                    if self.wants(*b) {
                        accumulate(&mut grads, *b, slice_cols(&g, ca, cb));
                    }
                }
                Node::Relu { a } => {
                    let x = self.value(*a);
                    let mut da = g.clone();
                    for (d, &xv) in da.data_mut().iter_mut().zip(x.data()) {
                        if xv <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Node::LayerNorm {
                    a,
                    gain,
                    bias,
                    means,
                    inv_stds,
                } => {
                    let x = self.value(*a);
                    let gn = self.value(*gain);
                    let (rows, cols) = x.shape();
                    let n = cols as f64;
                    let mut da = Tensor::zeros(rows, cols);
                    let mut dgain = Tensor::zeros(1, cols);
                    let mut dbias = Tensor::zeros(1, cols);
                    for r in 0..rows {
                        let xr = x.row(r);
                        let gr = g.row(r);
                        let inv_std = inv_stds[r];
                        let mean = means[r];
                        let mut mean_dxhat = 0.0;
                        let mut mean_dxhat_xhat = 0.0;
                        for j in 0..cols {
                            let xhat = (xr[j] - mean) * inv_std;
                            let dxhat = gr[j] * gn.get(0, j);
                            mean_dxhat += dxhat;
                            mean_dxhat_xhat += dxhat * xhat;
                        }
                        mean_dxhat /= n;
                        mean_dxhat_xhat /= n;
                        for j in 0..cols {
                            let xhat = (xr[j] - mean) * inv_std;
                            let dxhat = gr[j] * gn.get(0, j);
                            da.set(r, j, inv_std * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat));
                            dgain.set(0, j, dgain.get(0, j) + gr[j] * xhat);
                            dbias.set(0, j, dbias.get(0, j) + gr[j]);
                        }
                    }
                    if self.wants(*a) {
                        accumulate(&mut grads, *a, da);
                    }
                    if self.wants(*gain) {
                        accumulate(&mut grads, *gain, dgain);
                    }
                    if self.wants(*bias) {
                        accumulate(&mut grads, *bias, dbias);
                    }
                }
                Node::Scale { a, c } => {
                    accumulate(&mut grads, *a, tensor::scale(&g, *c));
                }
                Node::Sum { a } => {
                    let (rows, cols) = self.value(*a).shape();
                    let gv = g.item();
                    accumulate(&mut grads, *a, Tensor::from_vec(rows, cols, vec![gv; rows * cols]));
                }
                Node::SquaredNorm { a } => {
                    let gv = g.item();
                    let da = tensor::scale(self.value(*a), 2.0 * gv);
                    accumulate(&mut grads, *a, da);
                }
                Node::RepeatRows { a } => {
                    accumulate(&mut grads, *a, column_sums(&g));
                }
                Node::BlendRows { a, weights } => {
                    let cols = self.value(*a).cols();
                    let mut da = Tensor::zeros(self.value(*a).rows(), cols);
                    for (j, combo) in weights.iter().enumerate() {
                        let g_row = g.row(j);
                        for &(src, w) in combo {
                            let dst = &mut da.data_mut()[src * cols..(src + 1) * cols];
                            for (d, &gv) in dst.iter_mut().zip(g_row) {
                                *d += w * gv;
                            }
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Node::Custom { inputs, op } => {
                    let input_values: Vec<&Tensor> = inputs.iter().map(|&v| self.value(v)).collect();
                    let input_grads = op.backward(&input_values, &g);
                    assert_eq!(
                        input_grads.len(),
                        inputs.len(),
                        "custom op must return one gradient per input"
                    );
                    for (&input, grad) in inputs.iter().zip(input_grads) {
                        if self.wants(input) {
                            accumulate(&mut grads, input, grad);
                        }
                    }
                }
            }
        }

        // Any reachable leaf that never received a contribution gets zeros.
        for i in 0..self.nodes.len() {
            if matches!(self.nodes[i], Node::Leaf) && self.needs_grad[i] && grads[i].is_none() {
                let (r, c) = self.values[i].shape();
                grads[i] = Some(Tensor::zeros(r, c));
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], id: VarId, contribution: Tensor) {
    match &mut grads[id.0] {
        Some(existing) => {
            debug_assert_eq!(existing.shape(), contribution.shape());
            for (e, c) in existing.data_mut().iter_mut().zip(contribution.data()) {
                *e += c;
            }
        }
        slot @ None => *slot = Some(contribution),
    }
}

fn column_sums(g: &Tensor) -> Tensor {
    let (rows, cols) = g.shape();
    let mut out = Tensor::zeros(1, cols);
    for r in 0..rows {
        let row = g.row(r);
        for (o, &v) in out.data_mut().iter_mut().zip(row) {
            *o += v;
        }
    }
    out
}

fn slice_cols(g: &Tensor, start: usize, width: usize) -> Tensor {
    let rows = g.rows();
    let mut out = Tensor::zeros(rows, width);
    for r in 0..rows {
        let src = &g.row(r)[start..start + width];
        out.data_mut()[r * width..(r + 1) * width].copy_from_slice(src);
    }
    out
}

/// Result of a backward pass.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: VarId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }

    pub fn take(&mut self, id: VarId) -> Option<Tensor> {
        self.grads[id.0].take()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    /// Central finite-difference gradient of a scalar-valued tape program.
    fn finite_diff_grad<F>(input: &Tensor, mut eval: F, h: f64) -> Tensor
    where
        F: FnMut(&Tensor) -> f64,
    {
        let mut grad = Tensor::zeros(input.rows(), input.cols());
        for i in 0..input.len() {
            let mut plus = input.clone();
            plus.data_mut()[i] += h;
            let mut minus = input.clone();
            minus.data_mut()[i] -= h;
            grad.data_mut()[i] = (eval(&plus) - eval(&minus)) / (2.0 * h);
        }
        grad
    }

    fn max_rel_err(analytic: &Tensor, numeric: &Tensor) -> f64 {
        analytic
            .data()
            .iter()
            .zip(numeric.data())
            .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
            .fold(0.0, f64::max)
    }

    #[test]
    fn relu_backward_known_values() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::from_vec(1, 2, vec![-1.0, 2.0]));
        let y = tape.relu(x);
        let loss = tape.sum(y);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[0.0, 1.0]);
    }

    #[test]
    fn squared_norm_gradient_is_two_z() {
        let mut tape = Tape::new();
        let z = tape.param(Tensor::from_vec(1, 3, vec![1.0, -2.0, 0.5]));
        let loss = tape.squared_norm(z);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(z).unwrap().data(), &[2.0, -4.0, 1.0]);
    }

    #[test]
    fn reused_tensor_accumulates_gradients() {
        // loss = sum(x + x): gradient is 2 everywhere.
        let mut tape = Tape::new();
        let x = tape.param(Tensor::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]));
        let doubled = tape.add(x, x).unwrap();
        let loss = tape.sum(doubled);
        let grads = tape.backward(loss).unwrap();
        assert!(grads.get(x).unwrap().data().iter().all(|&g| g == 2.0));
    }

    #[test]
    fn leaf_off_the_loss_path_gets_zero_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::from_vec(1, 2, vec![1.0, 2.0]));
        let unused = tape.param(Tensor::from_vec(1, 2, vec![5.0, 6.0]));
        let loss = tape.squared_norm(x);
        let grads = tape.backward(loss).unwrap();
        assert!(grads.get(unused).unwrap().data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::zeros(2, 2));
        let y = tape.relu(x);
        assert!(tape.backward(y).is_err());
    }

    #[test]
    fn every_primitive_matches_finite_differences() {
        let mut rng = rng_from_seed(41);
        let base = Tensor::from_vec(
            5,
            7,
            (0..35).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>(),
        );
        let weight = Tensor::from_vec(
            7,
            4,
            (0..28).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>(),
        );
        let gain = Tensor::from_vec(1, 7, (0..7).map(|_| rng.gen_range(0.5..1.5)).collect::<Vec<f64>>());
        let bias = Tensor::from_vec(1, 7, (0..7).map(|_| rng.gen_range(-0.5..0.5)).collect::<Vec<f64>>());
        let other = Tensor::from_vec(
            5,
            7,
            (0..35).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>(),
        );
        let blend: Vec<Vec<(usize, f64)>> = vec![
            vec![(0, 0.25), (3, 0.5), (4, 0.25)],
            vec![(1, 1.0)],
            vec![(2, 0.6), (0, 0.4)],
        ];
        let blend = Rc::new(blend);

        // Shift inputs away from relu kinks so finite differences are valid.
        let programs: Vec<(&str, Box<dyn Fn(&mut Tape, VarId) -> VarId>)> = vec![
            ("matmul", {
                let weight = weight.clone();
                Box::new(move |tape: &mut Tape, x: VarId| {
                    let w = tape.constant(weight.clone());
                    let y = tape.matmul(x, w).unwrap();
                    tape.squared_norm(y)
                })
            }),
            ("add", {
                let other = other.clone();
                Box::new(move |tape: &mut Tape, x: VarId| {
                    let o = tape.constant(other.clone());
                    let y = tape.add(x, o).unwrap();
                    tape.squared_norm(y)
                })
            }),
            ("add_row_broadcast", {
                let bias = bias.clone();
                Box::new(move |tape: &mut Tape, x: VarId| {
                    let b = tape.constant(bias.clone());
                    let y = tape.add_row_broadcast(x, b).unwrap();
                    tape.squared_norm(y)
                })
            }),
            ("concat_cols", {
                let other = other.clone();
                Box::new(move |tape: &mut Tape, x: VarId| {
                    let o = tape.constant(other.clone());
                    let y = tape.concat_cols(x, o).unwrap();
                    tape.squared_norm(y)
                })
            }),
            ("relu", {
                Box::new(move |tape: &mut Tape, x: VarId| {
                    let y = tape.relu(x);
                    tape.squared_norm(y)
                })
            }),
            ("layer_norm", {
                let gain = gain.clone();
                let bias = bias.clone();
                Box::new(move |tape: &mut Tape, x: VarId| {
                    let g = tape.constant(gain.clone());
                    let b = tape.constant(bias.clone());
                    let y = tape.layer_norm(x, g, b, 1e-5).unwrap();
                    tape.squared_norm(y)
                })
            }),
            ("scale", {
                Box::new(move |tape: &mut Tape, x: VarId| {
                    let y = tape.scale(x, -1.7);
                    tape.squared_norm(y)
                })
            }),
            ("sum", {
                Box::new(move |tape: &mut Tape, x: VarId| {
                    let y = tape.sum(x);
                    tape.squared_norm(y)
                })
            }),
            ("blend_rows", {
                let blend = blend.clone();
                Box::new(move |tape: &mut Tape, x: VarId| {
                    let y = tape.blend_rows(x, blend.clone());
                    tape.squared_norm(y)
                })
            }),
        ];

        for (name, program) in &programs {
            let eval = |input: &Tensor| {
                let mut tape = Tape::new();
                let x = tape.param(input.clone());
                let loss = program(&mut tape, x);
                tape.value(loss).item()
            };
            let mut tape = Tape::new();
            let x = tape.param(base.clone());
            let loss = program(&mut tape, x);
            let grads = tape.backward(loss).unwrap();
            let analytic = grads.get(x).unwrap();
            let numeric = finite_diff_grad(&base, eval, 1e-6);
            let err = max_rel_err(analytic, &numeric);
            assert!(err < 1e-6, "{name}: max rel err {err}");
        }
    }

    #[test]
    fn layer_norm_gain_bias_gradients_match_finite_differences() {
        let mut rng = rng_from_seed(43);
        let x = Tensor::from_vec(
            4,
            6,
            (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>(),
        );
        let gain0 = Tensor::from_vec(1, 6, (0..6).map(|_| rng.gen_range(0.5..1.5)).collect::<Vec<f64>>());
        let bias0 = Tensor::from_vec(1, 6, (0..6).map(|_| rng.gen_range(-0.5..0.5)).collect::<Vec<f64>>());

        let eval = |gain: &Tensor, bias: &Tensor| {
            let mut tape = Tape::new();
            let xv = tape.constant(x.clone());
            let g = tape.param(gain.clone());
            let b = tape.param(bias.clone());
            let y = tape.layer_norm(xv, g, b, 1e-5).unwrap();
            let loss = tape.squared_norm(y);
            tape.value(loss).item()
        };

        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let g = tape.param(gain0.clone());
        let b = tape.param(bias0.clone());
        let y = tape.layer_norm(xv, g, b, 1e-5).unwrap();
        let loss = tape.squared_norm(y);
        let grads = tape.backward(loss).unwrap();

        let numeric_gain = finite_diff_grad(&gain0, |gv| eval(gv, &bias0), 1e-6);
        let numeric_bias = finite_diff_grad(&bias0, |bv| eval(&gain0, bv), 1e-6);
        assert!(max_rel_err(grads.get(g).unwrap(), &numeric_gain) < 1e-6);
        assert!(max_rel_err(grads.get(b).unwrap(), &numeric_bias) < 1e-6);
    }

    #[test]
    fn toy_mlp_composite_gradient_matches_finite_differences() {
        // 4-unit MLP: x(1x3) -> 4 -> 1 with layer norm and relu in between.
        let mut rng = rng_from_seed(44);
        let x = Tensor::from_vec(1, 3, vec![0.3, -0.6, 0.9]);
        let w1 = Tensor::from_vec(3, 4, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>());
        let b1 = Tensor::from_vec(1, 4, (0..4).map(|_| rng.gen_range(-0.3..0.3)).collect::<Vec<f64>>());
        let g1 = Tensor::from_vec(1, 4, vec![1.0, 0.9, 1.1, 1.2]);
        let n1 = Tensor::from_vec(1, 4, vec![0.0, 0.1, -0.1, 0.05]);
        let w2 = Tensor::from_vec(4, 1, (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>());

        let run = |w1v: &Tensor| {
            let mut tape = Tape::new();
            let xv = tape.constant(x.clone());
            let w1id = tape.param(w1v.clone());
            let b1id = tape.constant(b1.clone());
            let g1id = tape.constant(g1.clone());
            let n1id = tape.constant(n1.clone());
            let w2id = tape.constant(w2.clone());
            let h = tape.matmul(xv, w1id).unwrap();
            let h = tape.add_row_broadcast(h, b1id).unwrap();
            let h = tape.layer_norm(h, g1id, n1id, 1e-5).unwrap();
            let h = tape.relu(h);
            let out = tape.matmul(h, w2id).unwrap();
            let loss = tape.squared_norm(out);
            (tape, w1id, loss)
        };

        let (tape, w1id, loss) = run(&w1);
        let grads = tape.backward(loss).unwrap();
        let numeric = finite_diff_grad(&w1, |w| {
            let (tape, _, loss) = run(w);
            tape.value(loss).item()
        }, 1e-6);
        let err = max_rel_err(grads.get(w1id).unwrap(), &numeric);
        assert!(err < 1e-5, "composite mlp grad err {err}");
    }

    #[test]
    fn forward_values_are_deterministic() {
        let mut rng = rng_from_seed(45);
        let x = Tensor::from_vec(3, 3, (0..9).map(|_| rng.gen::<f64>()).collect::<Vec<f64>>());
        let run = || {
            let mut tape = Tape::new();
            let a = tape.param(x.clone());
            let b = tape.matmul(a, a).unwrap();
            let c = tape.relu(b);
            let l = tape.squared_norm(c);
            let g = tape.backward(l).unwrap();
            (
                tape.value(l).item(),
                g.get(a).unwrap().data().to_vec(),
            )
        };
        let (l1, g1) = run();
        let (l2, g2) = run();
        assert_eq!(l1.to_bits(), l2.to_bits());
        assert_eq!(g1, g2);
    }
}
