//! SGD and Adam updates over named parameter tensors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::Parameters;
use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Optional global-gradient-norm clip applied before each update.
    pub clip_norm: Option<f64>,
    /// Stop after this many epochs without a dev-accuracy improvement.
    pub patience: Option<usize>,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            optimizer: OptimizerKind::adam(),
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 5,
            seed: 0,
            clip_norm: Some(5.0),
            patience: None,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Adam moments per tensor name plus the shared step counter.
#[derive(Debug, Clone, Default)]
pub struct OptState {
    step: u64,
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
}

/// Applies one update from accumulated gradients. Gradients are checked
/// for NaN/Inf first; the offending tensor is named in the error. With
/// clipping enabled the global norm over all gradients is bounded before
/// any parameter moves.
pub fn optimizer_step(
    params: &mut Parameters,
    grads: &BTreeMap<String, Vec<f64>>,
    state: &mut OptState,
    hyper: &TrainHyper,
) -> Result<()> {
    for (name, g) in grads {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient(name.clone()));
        }
    }
    let scale = match hyper.clip_norm {
        Some(clip) => {
            let sq: f64 = grads.values().flat_map(|g| g.iter().map(|v| v * v)).sum();
            let norm = sq.sqrt();
            if norm > clip {
                clip / norm
            } else {
                1.0
            }
        }
        None => 1.0,
    };
    state.step += 1;
    for (name, g) in grads {
        let tensor = params.get_mut(name)?;
        match hyper.optimizer {
            OptimizerKind::Sgd => {
                for (p, gv) in tensor.values_mut().iter_mut().zip(g) {
                    *p -= hyper.learning_rate * scale * gv;
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let m = state.m.entry(name.clone()).or_insert_with(|| vec![0.0; g.len()]);
                let v = state.v.entry(name.clone()).or_insert_with(|| vec![0.0; g.len()]);
                let bc1 = 1.0 - beta1.powi(state.step as i32);
                let bc2 = 1.0 - beta2.powi(state.step as i32);
                for (i, p) in tensor.values_mut().iter_mut().enumerate() {
                    let gv = g[i] * scale;
                    m[i] = beta1 * m[i] + (1.0 - beta1) * gv;
                    v[i] = beta2 * v[i] + (1.0 - beta2) * gv * gv;
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    *p -= hyper.learning_rate * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
    Ok(())
}

/// SGD on a sparse set of weight rows plus the bias, for the linear
/// baselines whose feature spaces are too wide for dense updates.
pub fn sgd_sparse_rows(
    w: &mut Tensor,
    row_grads: &BTreeMap<u32, Vec<f64>>,
    b: &mut Tensor,
    bias_grad: &[f64],
    learning_rate: f64,
) -> Result<()> {
    let classes = w.shape()[1];
    for (&row, g) in row_grads {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient(format!("linear.w row {row}")));
        }
        let start = row as usize * classes;
        for (p, gv) in w.values_mut()[start..start + classes].iter_mut().zip(g) {
            *p -= learning_rate * gv;
        }
    }
    for (p, gv) in b.values_mut().iter_mut().zip(bias_grad) {
        *p -= learning_rate * gv;
    }
    Ok(())
}
