//! First-order parameter updates.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Debug)]
pub enum Optimizer<T> {
    Sgd { lr: T },
    Adam { lr: T, params: AdamParams, m: Vec<T>, v: Vec<T>, t: i32 },
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, lr: f64, n_params: usize, params: AdamParams) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr: T::lit(lr) },
            OptimizerKind::Adam => Optimizer::Adam {
                lr: T::lit(lr),
                params,
                m: vec![T::zero(); n_params],
                v: vec![T::zero(); n_params],
                t: 0,
            },
        }
    }

    /// `θ ← θ − step(grad)`.
    pub fn step(&mut self, theta: &mut [T], grad: &[T]) {
        match self {
            Optimizer::Sgd { lr } => {
                for (p, &g) in theta.iter_mut().zip(grad) {
                    *p = *p - *lr * g;
                }
            }
            Optimizer::Adam { lr, params, m, v, t } => {
                *t += 1;
                let (b1, b2) = (T::lit(params.beta1), T::lit(params.beta2));
                let c1 = T::one() - b1.powi(*t);
                let c2 = T::one() - b2.powi(*t);
                let eps = T::lit(params.eps);
                for i in 0..theta.len() {
                    let g = grad[i];
                    m[i] = b1 * m[i] + (T::one() - b1) * g;
                    v[i] = b2 * v[i] + (T::one() - b2) * g * g;
                    let mhat = m[i] / c1;
                    let vhat = v[i] / c2;
                    theta[i] = theta[i] - *lr * mhat / (vhat.sqrt() + eps);
                }
            }
        }
    }
}

/// Rescale `grad` in place so its L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_norm<T: Scalar>(grad: &mut [T], max_norm: T) -> T {
    let norm = grad.iter().map(|&g| g * g).sum::<T>().sqrt();
    if norm > max_norm && norm > T::zero() {
        let k = max_norm / norm;
        grad.iter_mut().for_each(|g| *g = *g * k);
    }
    norm
}
