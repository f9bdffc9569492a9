//! RMSprop and plain SGD.
//!
//! RMSprop follows the usual uncentered, momentum-free form:
//! `s <- alpha * s + (1 - alpha) * g^2`, `theta <- theta - lr * g / (sqrt(s) + eps)`.

use serde::{Deserialize, Serialize};

use super::{ParamSet, Real, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    RmsProp,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub alpha: f64,
    pub eps: f64,
}

impl OptimizerConfig {
    pub const DEFAULT_LR: f64 = 4e-4;
    pub const SLOW_LR: f64 = 4e-6;
    pub const SGD_LR: f64 = 40.0;

    pub fn rmsprop(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::RmsProp,
            learning_rate,
            alpha: 0.99,
            eps: 1e-8,
        }
    }

    pub fn sgd(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            learning_rate,
            alpha: 0.99,
            eps: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(format!("alpha must lie in [0, 1), got {}", self.alpha));
        }
        Ok(())
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::rmsprop(Self::DEFAULT_LR)
    }
}

/// Per-parameter running state. Empty until the first step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizerState<F> {
    square_avg: Vec<Vec<F>>,
    steps: u64,
}

impl<F: Real> OptimizerState<F> {
    pub fn new() -> Self {
        Self {
            square_avg: Vec::new(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn is_fresh(&self) -> bool {
        self.steps == 0 && self.square_avg.iter().all(|s| s.iter().all(|v| v.is_zero()))
    }

    pub fn square_avg(&self) -> &[Vec<F>] {
        &self.square_avg
    }

    /// Applies one update using the gradients stored in `params`.
    pub fn step(&mut self, cfg: &OptimizerConfig, params: &mut ParamSet<F>) -> Result<(), TensorError> {
        let lr = F::of(cfg.learning_rate);
        match cfg.kind {
            OptimizerKind::Sgd => {
                for p in params.iter_mut() {
                    check_grad_len(&p.name, p.value.len(), p.grad.len())?;
                    for (v, g) in p.value.iter_mut().zip(&p.grad) {
                        *v = *v - lr * *g;
                    }
                }
            }
            OptimizerKind::RmsProp => {
                if self.square_avg.is_empty() {
                    self.square_avg = params.iter().map(|p| vec![F::zero(); p.len()]).collect();
                }
                if self.square_avg.len() != params.len() {
                    return Err(TensorError::ShapeMismatch {
                        index: 0,
                        op: "rmsprop",
                        detail: format!(
                            "state for {} tensors, model has {}",
                            self.square_avg.len(),
                            params.len()
                        ),
                    });
                }
                let alpha = F::of(cfg.alpha);
                let one_minus = F::one() - alpha;
                let eps = F::of(cfg.eps);
                for (p, s) in params.iter_mut().zip(self.square_avg.iter_mut()) {
                    check_grad_len(&p.name, p.value.len(), p.grad.len())?;
                    check_grad_len(&p.name, p.value.len(), s.len())?;
                    for ((v, g), sq) in p.value.iter_mut().zip(&p.grad).zip(s.iter_mut()) {
                        *sq = alpha * *sq + one_minus * *g * *g;
                        *v = *v - lr * *g / (sq.sqrt() + eps);
                    }
                }
            }
        }
        self.steps += 1;
        Ok(())
    }
}

fn check_grad_len(name: &str, n: usize, m: usize) -> Result<(), TensorError> {
    if n != m {
        return Err(TensorError::ShapeMismatch {
            index: 0,
            op: "optimizer",
            detail: format!("{name}: {n} values, {m} gradient/state entries"),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Param;

    fn single(value: f64, grad: f64) -> ParamSet<f64> {
        let mut set = ParamSet::new();
        let mut p = Param::zeros("p", &[1]);
        p.value[0] = value;
        p.grad[0] = grad;
        set.push(p);
        set
    }

    fn value(set: &ParamSet<f64>) -> f64 {
        set.iter().next().unwrap().value[0]
    }

    #[test]
    fn sgd_step_is_lr_times_grad() {
        let mut set = single(1.0, 0.01);
        let mut st = OptimizerState::new();
        st.step(&OptimizerConfig::sgd(40.0), &mut set).unwrap();
        assert!((value(&set) - (1.0 - 0.4)).abs() < 1e-12);
    }

    #[test]
    fn rmsprop_first_step() {
        let mut set = single(0.0, 1.0);
        let mut st = OptimizerState::new();
        st.step(&OptimizerConfig::rmsprop(4e-4), &mut set).unwrap();
        // s = 0.01, delta = -4e-4 / (0.1 + 1e-8)
        let expected = -4e-4 / (0.01f64.sqrt() + 1e-8);
        assert!((value(&set) - expected).abs() < 1e-15);
        assert!((value(&set) + 4.0e-3).abs() < 1e-9);
        assert_eq!(st.steps(), 1);
    }

    #[test]
    fn rmsprop_state_persists() {
        let mut set = single(0.0, 1.0);
        let mut st = OptimizerState::new();
        let cfg = OptimizerConfig::rmsprop(4e-4);
        st.step(&cfg, &mut set).unwrap();
        st.step(&cfg, &mut set).unwrap();
        let s2 = 0.99 * 0.01 + 0.01;
        assert!((st.square_avg()[0][0] - s2).abs() < 1e-15);
        let expected = -4e-4 / (0.1 + 1e-8) - 4e-4 / (s2.sqrt() + 1e-8);
        assert!((value(&set) - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        for cfg in [OptimizerConfig::rmsprop(4e-4), OptimizerConfig::sgd(40.0)] {
            let mut set = single(0.75, 0.0);
            let mut st = OptimizerState::new();
            st.step(&cfg, &mut set).unwrap();
            assert_eq!(value(&set), 0.75);
        }
    }

    #[test]
    fn mismatched_state_is_rejected() {
        let mut set = single(0.0, 1.0);
        let mut st = OptimizerState::new();
        st.step(&OptimizerConfig::default(), &mut set).unwrap();
        let mut other = single(0.0, 1.0);
        other.push(Param::zeros("q", &[2]));
        assert!(st.step(&OptimizerConfig::default(), &mut other).is_err());
    }

    #[test]
    fn rejects_nonpositive_learning_rate() {
        assert!(OptimizerConfig::rmsprop(0.0).validate().is_err());
        assert!(OptimizerConfig::rmsprop(4e-4).validate().is_ok());
    }
}
