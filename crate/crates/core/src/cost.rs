//! Parametric non-negative transition costs `c_θ(x, u)` over hand-built
//! binary features, with exact parameter gradients.
//!
//! Features are one-hot blocks, so they are kept sparse (list of active
//! indices). Layout, for an `H × W` map:
//!
//! | block            | size    |
//! |------------------|---------|
//! | agent position   | `H·W`   |
//! | direction        | 4       |
//! | carried object   | 4       |
//! | control          | 6       |
//! | 3×3 egocentric window, one-hot cell code | 9·8 |
//! | indicators (faces key / closed door / open door / goal / wall, carrying key) | 6 |
//! | bias             | 1       |

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::{Carried, Cell, Control, GridState};
use crate::scalar::{sigmoid, softplus, Scalar};

const WINDOW: usize = 9 * Cell::COUNT;
const INDICATORS: usize = 6;
const FIXED: usize = 4 + 4 + Control::COUNT + WINDOW + INDICATORS + 1;

pub const MLP_HIDDEN: [usize; 2] = [32, 16];
pub const DEFAULT_EPSILON_FLOOR: f64 = 1e-3;

pub fn feature_dim(height: usize, width: usize) -> usize {
    height * width + FIXED
}

/// Active (value 1) feature indices of `φ(x, u)`.
pub fn features(x: &GridState, u: Control) -> Vec<u32> {
    let (h, w) = (x.height(), x.width());
    let (row, col) = x.pos();
    let mut idx = Vec::with_capacity(20);
    let mut base = 0usize;
    idx.push((row * w + col) as u32);
    base += h * w;
    idx.push((base + x.dir() as usize) as u32);
    base += 4;
    idx.push((base + x.carried() as usize) as u32);
    base += 4;
    idx.push((base + u.id()) as u32);
    base += Control::COUNT;

    let (fr, fc) = x.dir().delta();
    let (rr, rc) = x.dir().right().delta();
    for ahead in -1isize..=1 {
        for lateral in -1isize..=1 {
            let slot = ((ahead + 1) * 3 + (lateral + 1)) as usize;
            let cell = x.cell_offset(ahead * fr + lateral * rr, ahead * fc + lateral * rc);
            idx.push((base + slot * Cell::COUNT + cell.code() as usize) as u32);
        }
    }
    base += WINDOW;

    let front = x.front();
    let flags = [
        front == Cell::Key,
        front == Cell::DoorClosed,
        front == Cell::DoorOpen,
        front == Cell::Goal,
        front == Cell::Wall,
        x.carried() == Carried::Key,
    ];
    for (i, on) in flags.into_iter().enumerate() {
        if on {
            idx.push((base + i) as u32);
        }
    }
    base += INDICATORS;
    idx.push(base as u32);
    idx
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    /// `softplus(θ·φ) + ε`
    Linear,
    /// `softplus(MLP(φ)) + ε`, two rectified hidden layers.
    Mlp,
}

impl CostKind {
    pub fn parse(name: &str) -> Option<CostKind> {
        match name {
            "linear" => Some(CostKind::Linear),
            "mlp" => Some(CostKind::Mlp),
            _ => None,
        }
    }
}

/// Cost parameters. For [`CostKind::Mlp`] `theta` is laid out as
/// `W1 (d×32, input-major) | b1 | W2 (32×16, input-major) | b2 | w3 (16) | b3`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostModel<T> {
    pub kind: CostKind,
    pub feature_dim: usize,
    pub theta: Vec<T>,
    pub epsilon_floor: T,
}

fn param_count(kind: CostKind, d: usize) -> usize {
    let [h1, h2] = MLP_HIDDEN;
    match kind {
        CostKind::Linear => d,
        CostKind::Mlp => d * h1 + h1 + h1 * h2 + h2 + h2 + 1,
    }
}

struct MlpActivations<T> {
    z1: Vec<T>,
    a1: Vec<T>,
    z2: Vec<T>,
    a2: Vec<T>,
    z3: T,
}

impl<T: Scalar> CostModel<T> {
    /// Linear models start at θ = 0 (every transition costs `ln 2 + ε`);
    /// MLPs draw θ uniformly from `[-0.1, 0.1]`.
    pub fn init(kind: CostKind, feature_dim: usize, seed: u64) -> Self {
        let n = param_count(kind, feature_dim);
        let theta = match kind {
            CostKind::Linear => vec![T::zero(); n],
            CostKind::Mlp => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n).map(|_| T::lit(rng.gen_range(-0.1..0.1))).collect()
            }
        };
        CostModel { kind, feature_dim, theta, epsilon_floor: T::lit(DEFAULT_EPSILON_FLOOR) }
    }

    pub fn for_state(kind: CostKind, x: &GridState, seed: u64) -> Self {
        Self::init(kind, feature_dim(x.height(), x.width()), seed)
    }

    pub fn num_params(&self) -> usize {
        self.theta.len()
    }

    pub fn layers(&self) -> Vec<usize> {
        match self.kind {
            CostKind::Linear => vec![self.feature_dim, 1],
            CostKind::Mlp => vec![self.feature_dim, MLP_HIDDEN[0], MLP_HIDDEN[1], 1],
        }
    }

    fn offsets(&self) -> [usize; 6] {
        let d = self.feature_dim;
        let [h1, h2] = MLP_HIDDEN;
        let w1 = 0;
        let b1 = w1 + d * h1;
        let w2 = b1 + h1;
        let b2 = w2 + h1 * h2;
        let w3 = b2 + h2;
        let b3 = w3 + h2;
        [w1, b1, w2, b2, w3, b3]
    }

    fn forward(&self, active: &[u32]) -> MlpActivations<T> {
        let [h1, h2] = MLP_HIDDEN;
        let [w1, b1, w2, b2, w3, b3] = self.offsets();
        let th = &self.theta;
        let mut z1: Vec<T> = th[b1..b1 + h1].to_vec();
        for &i in active {
            let col = &th[w1 + i as usize * h1..w1 + (i as usize + 1) * h1];
            for (z, &wt) in z1.iter_mut().zip(col) {
                *z = *z + wt;
            }
        }
        let a1: Vec<T> = z1.iter().map(|&z| z.max(T::zero())).collect();
        let mut z2: Vec<T> = th[b2..b2 + h2].to_vec();
        for (j, &a) in a1.iter().enumerate() {
            if a == T::zero() {
                continue;
            }
            let row = &th[w2 + j * h2..w2 + (j + 1) * h2];
            for (z, &wt) in z2.iter_mut().zip(row) {
                *z = *z + a * wt;
            }
        }
        let a2: Vec<T> = z2.iter().map(|&z| z.max(T::zero())).collect();
        let z3 = th[b3] + a2.iter().zip(&th[w3..w3 + h2]).map(|(&a, &wt)| a * wt).sum::<T>();
        MlpActivations { z1, a1, z2, a2, z3 }
    }

    /// Pre-softplus output for the active features.
    fn logit(&self, active: &[u32]) -> T {
        match self.kind {
            CostKind::Linear => active.iter().map(|&i| self.theta[i as usize]).sum(),
            CostKind::Mlp => self.forward(active).z3,
        }
    }

    pub fn cost_of_features(&self, active: &[u32]) -> T {
        softplus(self.logit(active)) + self.epsilon_floor
    }

    pub fn cost(&self, x: &GridState, u: Control) -> T {
        self.cost_of_features(&features(x, u))
    }

    /// `grad += scale · ∂c/∂θ` at the given features.
    pub fn accumulate_grad_features(&self, active: &[u32], scale: T, grad: &mut [T]) {
        debug_assert_eq!(grad.len(), self.theta.len());
        match self.kind {
            CostKind::Linear => {
                let g = scale * sigmoid(self.logit(active));
                for &i in active {
                    grad[i as usize] = grad[i as usize] + g;
                }
            }
            CostKind::Mlp => {
                let [h1, h2] = MLP_HIDDEN;
                let [w1, b1, w2, b2, w3, b3] = self.offsets();
                let act = self.forward(active);
                let g3 = scale * sigmoid(act.z3);
                grad[b3] = grad[b3] + g3;
                let mut dz2 = vec![T::zero(); h2];
                for k in 0..h2 {
                    grad[w3 + k] = grad[w3 + k] + g3 * act.a2[k];
                    if act.z2[k] > T::zero() {
                        dz2[k] = g3 * self.theta[w3 + k];
                    }
                }
                let mut dz1 = vec![T::zero(); h1];
                for j in 0..h1 {
                    let mut da1 = T::zero();
                    for k in 0..h2 {
                        let idx = w2 + j * h2 + k;
                        grad[idx] = grad[idx] + act.a1[j] * dz2[k];
                        da1 = da1 + self.theta[idx] * dz2[k];
                    }
                    if act.z1[j] > T::zero() {
                        dz1[j] = da1;
                    }
                }
                for k in 0..h2 {
                    grad[b2 + k] = grad[b2 + k] + dz2[k];
                }
                for j in 0..h1 {
                    grad[b1 + j] = grad[b1 + j] + dz1[j];
                }
                for &i in active {
                    let base = w1 + i as usize * h1;
                    for j in 0..h1 {
                        grad[base + j] = grad[base + j] + dz1[j];
                    }
                }
            }
        }
    }

    pub fn accumulate_grad(&self, x: &GridState, u: Control, scale: T, grad: &mut [T]) {
        self.accumulate_grad_features(&features(x, u), scale, grad);
    }

    /// Dense `∂c_θ(x, u)/∂θ`.
    pub fn cost_grad(&self, x: &GridState, u: Control) -> Vec<T> {
        let mut g = vec![T::zero(); self.theta.len()];
        self.accumulate_grad(x, u, T::one(), &mut g);
        g
    }
}

#[derive(Debug, Error)]
pub enum CostFileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("invalid cost model: {0}")]
    Invalid(String),
}

#[derive(Serialize, Deserialize)]
struct CostFile {
    kind: CostKind,
    feature_dim: usize,
    theta: Vec<f64>,
    layers: Vec<usize>,
}

impl<T: Scalar> CostModel<T> {
    pub fn to_json(&self) -> String {
        let file = CostFile {
            kind: self.kind,
            feature_dim: self.feature_dim,
            theta: self.theta.iter().map(|t| t.as_f64()).collect(),
            layers: self.layers(),
        };
        serde_json::to_string_pretty(&file).expect("cost model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CostFileError> {
        let file: CostFile = serde_json::from_str(text)?;
        let expected = param_count(file.kind, file.feature_dim);
        if file.theta.len() != expected {
            return Err(CostFileError::Invalid(format!(
                "{} parameters, expected {expected}",
                file.theta.len()
            )));
        }
        if file.theta.iter().any(|t| !t.is_finite()) {
            return Err(CostFileError::Invalid("non-finite parameter".into()));
        }
        Ok(CostModel {
            kind: file.kind,
            feature_dim: file.feature_dim,
            theta: file.theta.into_iter().map(T::lit).collect(),
            epsilon_floor: T::lit(DEFAULT_EPSILON_FLOOR),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CostFileError> {
        let mut text = self.to_json();
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CostFileError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
