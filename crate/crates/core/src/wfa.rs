//! Weighted finite automata: scoring, compression-aware hidden-state
//! stepping, acceptance, and the JSON model file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::{dot, Scalar};
use crate::word::{Symbol, Word};

/// `ψ = (α0, β, {W_σ})` plus the acceptance threshold it is used with.
#[derive(Clone, Debug, PartialEq)]
pub struct Wfa<T> {
    pub alpha0: Vec<T>,
    pub beta: Vec<T>,
    /// Symbols absent from the map behave as the zero matrix.
    pub transitions: BTreeMap<Symbol, Matrix<T>>,
    pub xi: T,
    pub ap_count: usize,
}

/// Hidden state `α_t` and the last symbol consumed.
#[derive(Clone, Debug, PartialEq)]
pub struct WfaState<T> {
    pub alpha: Vec<T>,
    pub last_symbol: Option<Symbol>,
}

impl<T: Scalar> Wfa<T> {
    /// Build from row-major transition buffers.
    pub fn from_parts(
        alpha0: Vec<T>,
        beta: Vec<T>,
        transitions: Vec<(Symbol, Vec<T>)>,
        xi: f64,
        ap_count: usize,
    ) -> Self {
        let m = alpha0.len();
        assert_eq!(beta.len(), m, "alpha0 and beta lengths differ");
        let transitions = transitions
            .into_iter()
            .map(|(s, data)| (s, Matrix::from_row_major(m, m, data)))
            .collect();
        Wfa { alpha0, beta, transitions, xi: T::lit(xi), ap_count }
    }

    pub fn num_states(&self) -> usize {
        self.alpha0.len()
    }

    pub fn initial_state(&self) -> WfaState<T> {
        WfaState { alpha: self.alpha0.clone(), last_symbol: None }
    }

    /// `α ↦ W_σᵀ α`, ignoring the compression rule.
    pub fn advance(&self, alpha: &[T], sigma: Symbol) -> Vec<T> {
        match self.transitions.get(&sigma) {
            Some(w) => w.transpose_mul_vec(alpha),
            None => vec![T::zero(); alpha.len()],
        }
    }

    /// Compression-aware step: repeating the previous symbol is a no-op.
    pub fn step(&self, state: &WfaState<T>, sigma: Symbol) -> WfaState<T> {
        if state.last_symbol == Some(sigma) {
            return state.clone();
        }
        WfaState { alpha: self.advance(&state.alpha, sigma), last_symbol: Some(sigma) }
    }

    pub fn run(&self, word: &Word) -> WfaState<T> {
        word.symbols().iter().fold(self.initial_state(), |s, &sigma| self.step(&s, sigma))
    }

    pub fn value(&self, state: &WfaState<T>) -> T {
        dot(&state.alpha, &self.beta)
    }

    /// `h_ψ(w) = α0ᵀ W_{σ0} … W_{σT} β` on the compressed word.
    pub fn score(&self, word: &Word) -> T {
        let mut alpha = self.alpha0.clone();
        for &sigma in word.compress().symbols() {
            alpha = self.advance(&alpha, sigma);
        }
        dot(&alpha, &self.beta)
    }

    pub fn accepts(&self, state: &WfaState<T>) -> bool {
        accepts(state, self, self.xi)
    }

    /// Mean squared error of the scores against the demonstration labels.
    pub fn fit_loss<'a>(&self, words: impl IntoIterator<Item = (&'a Word, f64)>) -> f64 {
        let mut n = 0usize;
        let mut total = 0.0;
        for (w, s) in words {
            let r = self.score(w).as_f64() - s;
            total += r * r;
            n += 1;
        }
        if n == 0 {
            0.0
        } else {
            total / n as f64
        }
    }

    pub fn convert<U: Scalar>(&self) -> Wfa<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::lit(x.as_f64())).collect::<Vec<U>>();
        Wfa {
            alpha0: conv(&self.alpha0),
            beta: conv(&self.beta),
            transitions: self
                .transitions
                .iter()
                .map(|(&s, m)| (s, Matrix::from_row_major(m.rows(), m.cols(), conv(m.as_slice()))))
                .collect(),
            xi: U::lit(self.xi.as_f64()),
            ap_count: self.ap_count,
        }
    }
}

/// `αᵀβ ≥ ξ` (inclusive).
pub fn accepts<T: Scalar>(state: &WfaState<T>, wfa: &Wfa<T>, xi: T) -> bool {
    wfa.value(state) >= xi
}

#[derive(Debug, Error)]
pub enum WfaFileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("invalid model: {0}")]
    Invalid(String),
}

#[derive(Serialize, Deserialize)]
struct WfaFile {
    rank: usize,
    alpha0: Vec<f64>,
    beta: Vec<f64>,
    #[serde(rename = "W")]
    w: BTreeMap<u8, Vec<f64>>,
    xi: f64,
    ap_count: usize,
}

impl<T: Scalar> Wfa<T> {
    pub fn to_json(&self) -> String {
        let f = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<f64>>();
        let file = WfaFile {
            rank: self.num_states(),
            alpha0: f(&self.alpha0),
            beta: f(&self.beta),
            w: self.transitions.iter().map(|(s, m)| (s.bits(), f(m.as_slice()))).collect(),
            xi: self.xi.as_f64(),
            ap_count: self.ap_count,
        };
        serde_json::to_string_pretty(&file).expect("wfa serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, WfaFileError> {
        let file: WfaFile = serde_json::from_str(text)?;
        let m = file.rank;
        if file.alpha0.len() != m || file.beta.len() != m {
            return Err(WfaFileError::Invalid(format!("rank {m} but vectors of length {} / {}", file.alpha0.len(), file.beta.len())));
        }
        let mut transitions = Vec::new();
        for (bits, data) in file.w {
            let sym = Symbol::new(bits as u32, file.ap_count)
                .map_err(|e| WfaFileError::Invalid(e.to_string()))?;
            if data.len() != m * m {
                return Err(WfaFileError::Invalid(format!("W[{bits}] has {} entries, expected {}", data.len(), m * m)));
            }
            transitions.push((sym, data.into_iter().map(T::lit).collect()));
        }
        let all = file.alpha0.iter().chain(&file.beta);
        if all.clone().any(|x| !x.is_finite()) {
            return Err(WfaFileError::Invalid("non-finite weight".into()));
        }
        Ok(Wfa::from_parts(
            file.alpha0.into_iter().map(T::lit).collect(),
            file.beta.into_iter().map(T::lit).collect(),
            transitions,
            file.xi,
            file.ap_count,
        ))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), WfaFileError> {
        let mut text = self.to_json();
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, WfaFileError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
