//! Adaptive-moment (Adam) updates for the embedding table.

use super::{EncoderParams, ParamGradient};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub decay1: f64,
    pub decay2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            decay1: 0.9,
            decay2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, v) in [("decay1", self.decay1), ("decay2", self.decay2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    pub step_count: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    shape: (usize, usize),
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, params: &EncoderParams) -> Self {
        let len = params.table.len();
        Self {
            config,
            step_count: 0,
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            shape: (params.vocab_size, params.dim),
        }
    }
}

/// One bias-corrected Adam step, in place.
pub fn optimizer_step(
    params: &mut EncoderParams,
    state: &mut OptimizerState,
    grads: &ParamGradient,
) -> Result<()> {
    let shape = (params.vocab_size, params.dim);
    for actual in [state.shape, (grads.vocab_size, grads.dim)] {
        if actual != shape {
            return Err(Error::ShapeMismatch {
                expected: shape,
                actual,
            });
        }
    }
    let OptimizerConfig {
        learning_rate,
        decay1,
        decay2,
        epsilon,
    } = state.config;
    state.step_count += 1;
    let t = state.step_count as i32;
    let correction1 = 1.0 - decay1.powi(t);
    let correction2 = 1.0 - decay2.powi(t);

    for (((w, g), m), v) in params
        .table
        .iter_mut()
        .zip(&grads.values)
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        *m = decay1 * *m + (1.0 - decay1) * g;
        *v = decay2 * *v + (1.0 - decay2) * g * g;
        let m_hat = *m / correction1;
        let v_hat = *v / correction2;
        *w -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
    }
    Ok(())
}
