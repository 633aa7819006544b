use super::tensor::Tensor;
use crate::{Error, Result};

/// ADAM hyperparameters. lr 0.002, beta1 0.9, beta2 0.999.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected ADAM state over a fixed set of parameter tensors.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
    step_count: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[&Tensor]) -> AdamState {
        AdamState {
            config,
            first_moment: params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect(),
            second_moment: params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect(),
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One update: m and v decay toward the gradient statistics, parameters
    /// move by -lr * m_hat / (sqrt(v_hat) + eps). Fails fast on a non-finite
    /// gradient.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::shape_mismatch(
                "adam_step",
                format!("{} parameter tensors", self.first_moment.len()),
                format!("{} params / {} grads", params.len(), grads.len()),
            ));
        }
        for (i, g) in grads.iter().enumerate() {
            if !g.all_finite() {
                return Err(Error::NonFinite(format!("gradient tensor {i} in adam_step")));
            }
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
        {
            debug_assert_eq!(param.shape(), grad.shape());
            let pd = param.data_mut();
            for (((p, &g), m), v) in pd
                .iter_mut()
                .zip(grad.data())
                .zip(m.data_mut().iter_mut())
                .zip(v.data_mut().iter_mut())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
