//! Rectified Adam with a LookAhead wrapper.

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;

use super::TrainingError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for RadamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl RadamConfig {
    pub fn validate(&self) -> Result<(), TrainingError> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if !ok {
            return Err(TrainingError::InvalidConfig(format!("optimizer settings {self:?}")));
        }
        Ok(())
    }
}

/// Moment estimates and step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct RadamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
}

impl RadamState {
    pub fn new(params: &[Tensor]) -> Self {
        let zeros: Vec<Tensor> = params
            .iter()
            .map(|p| Tensor::new(p.shape().to_vec(), vec![0.0; p.len()]).expect("shape of existing tensor"))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

/// Length of the approximated simple moving average at step `t`.
pub fn rectification_rho(beta2: f64, t: u64) -> f64 {
    let rho_inf = 2.0 / (1.0 - beta2) - 1.0;
    let b2t = beta2.powi(t as i32);
    rho_inf - 2.0 * t as f64 * b2t / (1.0 - b2t)
}

/// One RAdam update. The adaptive term is used only once the variance
/// rectification is defined (`rho_t > 4`); before that the update is plain
/// bias-corrected momentum.
pub fn radam_step(
    params: &mut [Tensor],
    grads: &[Tensor],
    state: &mut RadamState,
    config: &RadamConfig,
) -> Result<(), TrainingError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(TrainingError::ShapeMismatch {
            tensor: params.len().min(grads.len()),
        });
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[i].shape() {
            return Err(TrainingError::ShapeMismatch { tensor: i });
        }
        if !g.is_finite() {
            return Err(TrainingError::NonFiniteGradient { tensor: i });
        }
    }
    state.step += 1;
    let t = state.step;
    let RadamConfig {
        learning_rate: lr,
        beta1: b1,
        beta2: b2,
        eps,
    } = *config;
    let bias1 = 1.0 - b1.powi(t as i32);
    let bias2 = 1.0 - b2.powi(t as i32);
    let rho_inf = 2.0 / (1.0 - b2) - 1.0;
    let rho_t = rectification_rho(b2, t);
    let rect = if rho_t > 4.0 {
        Some(((rho_t - 4.0) * (rho_t - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t)).sqrt())
    } else {
        None
    };
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        let p = p.data_mut();
        for j in 0..p.len() {
            let gj = g.data()[j];
            m[j] = b1 * m[j] + (1.0 - b1) * gj;
            v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
            let m_hat = m[j] / bias1;
            p[j] -= match rect {
                Some(r) => lr * r * m_hat * bias2.sqrt() / (v[j].sqrt() + eps),
                None => lr * m_hat,
            };
        }
    }
    Ok(())
}

/// Slow-weight synchronisation: `slow <- (1 - a) slow + a fast; fast <- slow`.
pub fn lookahead_step(fast: &mut [Tensor], slow: &mut [Tensor], alpha: f64) {
    for (f, s) in fast.iter_mut().zip(slow.iter_mut()) {
        for (fj, sj) in f.data_mut().iter_mut().zip(s.data_mut()) {
            *sj = (1.0 - alpha) * *sj + alpha * *fj;
            *fj = *sj;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LookaheadConfig {
    /// Inner steps between synchronisations.
    pub k: usize,
    pub alpha: f64,
}

impl Default for LookaheadConfig {
    fn default() -> Self {
        Self { k: 5, alpha: 0.5 }
    }
}

/// RAdam state plus LookAhead slow weights.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub radam: RadamState,
    pub slow: Vec<Tensor>,
    pub inner_steps: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Optimizer {
    pub radam: RadamConfig,
    /// `None` runs bare RAdam.
    pub lookahead: Option<LookaheadConfig>,
}

impl Optimizer {
    pub fn validate(&self) -> Result<(), TrainingError> {
        self.radam.validate()?;
        if let Some(la) = self.lookahead {
            if la.k == 0 || !(la.alpha >= 0.0 && la.alpha <= 1.0) {
                return Err(TrainingError::InvalidConfig(format!("lookahead settings {la:?}")));
            }
        }
        Ok(())
    }

    pub fn init(&self, params: &[Tensor]) -> OptimizerState {
        OptimizerState {
            radam: RadamState::new(params),
            slow: params.to_vec(),
            inner_steps: 0,
        }
    }

    pub fn step(&self, params: &mut [Tensor], grads: &[Tensor], state: &mut OptimizerState) -> Result<(), TrainingError> {
        radam_step(params, grads, &mut state.radam, &self.radam)?;
        state.inner_steps += 1;
        if let Some(la) = self.lookahead {
            if state.inner_steps.is_multiple_of(la.k as u64) {
                lookahead_step(params, &mut state.slow, la.alpha);
            }
        }
        Ok(())
    }
}
