//! Adam updates with bias correction.

use crate::error::{Error, Result};
use crate::numcore::{Gradients, Matrix, ParamSet};

/// Optimizer hyperparameters. Defaults are the usual ones; all configurable.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment accumulators plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    config: AdamConfig,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet, config: AdamConfig) -> Self {
        let zeros: Vec<Matrix> = (0..params.num_tensors())
            .map(|i| {
                let m = params.tensor(i);
                Matrix::zeros(m.rows(), m.cols())
            })
            .collect();
        AdamState {
            config,
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// One Adam update over every parameter tensor.
    ///
    /// Rejects non-finite gradients so the caller can abort training with a
    /// diagnostic instead of silently corrupting the parameters.
    pub fn update(&mut self, params: &mut ParamSet, grads: &Gradients) -> Result<()> {
        if params.num_tensors() != self.first.len() || grads.num_tensors() != self.first.len() {
            return Err(Error::Shape(
                "optimizer state does not match parameter set".into(),
            ));
        }
        for t in 0..grads.num_tensors() {
            if let Some(pos) = grads.tensor(t).data().iter().position(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite gradient in tensor {t} at entry {pos}"
                )));
            }
        }
        self.step += 1;
        let c = self.config;
        let bias1 = 1.0 - c.beta1.powi(self.step as i32);
        let bias2 = 1.0 - c.beta2.powi(self.step as i32);
        for t in 0..self.first.len() {
            let g = grads.tensor(t).data();
            let m = self.first[t].data_mut();
            let v = self.second[t].data_mut();
            let p = params.tensor_mut(t).data_mut();
            for i in 0..g.len() {
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                p[i] -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn one_param(v: f64) -> ParamSet {
        let mut p = ParamSet::new();
        p.add(Matrix::from_vec(1, 1, vec![v]).unwrap());
        p
    }

    #[test]
    fn zero_gradient_from_fresh_state_leaves_parameter_unchanged() {
        let mut params = one_param(0.7);
        let mut state = AdamState::new(&params, AdamConfig::default());
        let grads = Gradients::zeros_like(&params);
        state.update(&mut params, &grads).unwrap();
        assert_eq!(params.tensor(0).data()[0], 0.7);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn first_step_with_unit_gradient_moves_by_learning_rate() {
        let mut params = one_param(0.0);
        let mut state = AdamState::new(&params, AdamConfig::default());
        let mut grads = Gradients::zeros_like(&params);
        grads.tensor_mut(0).data_mut()[0] = 1.0;
        state.update(&mut params, &grads).unwrap();
        // closed form: -lr * g / (|g| + eps) for the first step
        assert_relative_eq!(
            params.tensor(0).data()[0],
            -1e-3 / (1.0 + 1e-8),
            max_relative = 1e-12
        );
    }

    #[test]
    fn constant_gradient_drives_parameter_against_its_sign() {
        let mut params = one_param(0.0);
        let mut state = AdamState::new(&params, AdamConfig::default());
        let mut grads = Gradients::zeros_like(&params);
        grads.tensor_mut(0).data_mut()[0] = 0.3;
        for _ in 0..50 {
            state.update(&mut params, &grads).unwrap();
        }
        assert!(params.tensor(0).data()[0] < -0.01);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut params = one_param(0.0);
        let mut state = AdamState::new(&params, AdamConfig::default());
        let mut grads = Gradients::zeros_like(&params);
        grads.tensor_mut(0).data_mut()[0] = f64::NAN;
        assert!(matches!(
            state.update(&mut params, &grads),
            Err(Error::Numeric(_))
        ));
    }
}
