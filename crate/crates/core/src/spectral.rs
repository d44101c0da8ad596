//! Spectral extraction of a WFA from Hankel blocks.
//!
//! `H_B ≈ U_m Λ_m V_mᵀ`, `P = U_m`, `S = Λ_m V_mᵀ`, then
//! `α0ᵀ = P(λ,:)`, `β = S(:,λ)` and `W_σ = P⁺ H_σ S⁺`.

use thiserror::Error;

use crate::hankel::HankelBlocks;
use crate::linalg::{pinv, svd, Matrix, Svd};
use crate::scalar::Scalar;
use crate::wfa::Wfa;
use crate::word::Word;

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralConfig {
    pub rank: usize,
    /// Singular values below this are dropped (their directions zeroed).
    pub singular_value_floor: f64,
    /// Acceptance threshold stored in the learned model.
    pub xi: f64,
    pub ap_count: usize,
}

impl SpectralConfig {
    pub fn new(rank: usize, ap_count: usize) -> Self {
        SpectralConfig { rank, singular_value_floor: 1e-10, xi: 0.5, ap_count }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("rank {rank} must be in 1..={max} for a {rows}x{cols} Hankel block")]
    Rank { rank: usize, max: usize, rows: usize, cols: usize },
    #[error("basis must contain the empty word as prefix and suffix")]
    MissingEmptyWord,
    #[error("Hankel block is identically zero")]
    Degenerate,
}

/// Learned model plus the spectrum it was cut from.
#[derive(Clone, Debug)]
pub struct SpectralFit<T> {
    pub wfa: Wfa<T>,
    pub singular_values: Vec<T>,
    /// Number of kept singular values above the floor.
    pub effective_rank: usize,
}

pub fn spectral_learn<T: Scalar>(
    blocks: &HankelBlocks<T>,
    cfg: &SpectralConfig,
) -> Result<Wfa<T>, SpectralError> {
    spectral_fit(blocks, cfg).map(|f| f.wfa)
}

pub fn spectral_fit<T: Scalar>(
    blocks: &HankelBlocks<T>,
    cfg: &SpectralConfig,
) -> Result<SpectralFit<T>, SpectralError> {
    spectral_fit_with(blocks, &svd(&blocks.hb), cfg)
}

/// As [`spectral_fit`], reusing a precomputed `svd(&blocks.hb)` so several
/// ranks can be cut from one decomposition.
pub fn spectral_fit_with<T: Scalar>(
    blocks: &HankelBlocks<T>,
    dec: &Svd<T>,
    cfg: &SpectralConfig,
) -> Result<SpectralFit<T>, SpectralError> {
    let (rows, cols) = (blocks.hb.rows(), blocks.hb.cols());
    let max = rows.min(cols);
    if cfg.rank == 0 || cfg.rank > max {
        return Err(SpectralError::Rank { rank: cfg.rank, max, rows, cols });
    }
    let lambda_row = blocks.basis.prefix_index(&Word::empty()).ok_or(SpectralError::MissingEmptyWord)?;
    let lambda_col = blocks.basis.suffix_index(&Word::empty()).ok_or(SpectralError::MissingEmptyWord)?;
    if blocks.hb.is_all_zero() {
        return Err(SpectralError::Degenerate);
    }

    let m = cfg.rank;
    let floor = T::lit(cfg.singular_value_floor);
    let mut p = Matrix::zeros(rows, m);
    let mut s = Matrix::zeros(m, cols);
    let mut effective_rank = 0;
    for k in 0..m {
        let sigma = dec.singular_values[k];
        if sigma < floor {
            continue;
        }
        effective_rank += 1;
        // sign convention: largest-magnitude entry of each U column positive
        let mut best = 0;
        for r in 1..rows {
            if dec.u[(r, k)].abs() > dec.u[(best, k)].abs() {
                best = r;
            }
        }
        let sign = if dec.u[(best, k)] < T::zero() { -T::one() } else { T::one() };
        for r in 0..rows {
            p[(r, k)] = sign * dec.u[(r, k)];
        }
        for c in 0..cols {
            s[(k, c)] = sign * sigma * dec.v[(c, k)];
        }
    }

    let p_pinv = pinv(&p, floor);
    let s_pinv = pinv(&s, floor);
    let alpha0 = p.row(lambda_row).to_vec();
    let beta = s.column(lambda_col);
    let transitions = blocks
        .h_sigma
        .iter()
        .map(|(&sym, h)| (sym, p_pinv.matmul(h).matmul(&s_pinv)))
        .collect();
    let wfa = Wfa { alpha0, beta, transitions, xi: T::lit(cfg.xi), ap_count: cfg.ap_count };
    Ok(SpectralFit { wfa, singular_values: dec.singular_values.clone(), effective_rank })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hankel::{build_hankel, select_basis, Basis, ScoredWord};
    use crate::wfa::tests::random_wfa;
    use crate::word::Symbol;

    fn all_words(n_symbols: u8, max_len: usize) -> Vec<Word> {
        let mut out = vec![Word::empty()];
        let mut frontier = vec![Word::empty()];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for w in &frontier {
                for b in 0..n_symbols {
                    let mut x = w.clone();
                    x.push(Symbol::from_bits(b));
                    next.push(x);
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }

    /// Hankel blocks filled directly from a generating WFA over a complete
    /// basis (raw, uncompressed words).
    fn exact_blocks(target: &Wfa<f64>, n_symbols: u8, len: usize) -> HankelBlocks<f64> {
        let words = all_words(n_symbols, len);
        let basis = Basis::new(words.clone(), words.clone());
        let raw = |w: &Word| {
            let mut a = target.alpha0.clone();
            for &s in w.symbols() {
                a = target.advance(&a, s);
            }
            crate::scalar::dot(&a, &target.beta)
        };
        let (np, ns) = (basis.prefixes().len(), basis.suffixes().len());
        let mut hb = Matrix::zeros(np, ns);
        let mut h_sigma = std::collections::BTreeMap::new();
        for b in 0..n_symbols {
            h_sigma.insert(Symbol::from_bits(b), Matrix::zeros(np, ns));
        }
        for (i, u) in basis.prefixes().iter().enumerate() {
            for (j, v) in basis.suffixes().iter().enumerate() {
                hb[(i, j)] = raw(&u.concat(v));
                for b in 0..n_symbols {
                    let mid = Word::from_bits(&[b]);
                    h_sigma.get_mut(&Symbol::from_bits(b)).unwrap()[(i, j)] = raw(&u.concat(&mid).concat(v));
                }
            }
        }
        HankelBlocks {
            basis,
            counts_b: Matrix::filled(np, ns, 1),
            counts_sigma: h_sigma.keys().map(|&k| (k, Matrix::filled(np, ns, 1))).collect(),
            hb,
            h_sigma,
        }
    }

    fn raw_score(w: &Wfa<f64>, word: &Word) -> f64 {
        let mut a = w.alpha0.clone();
        for &s in word.symbols() {
            a = w.advance(&a, s);
        }
        crate::scalar::dot(&a, &w.beta)
    }

    #[test]
    fn recovers_random_rank_two_wfa() {
        let target = random_wfa(2, 2, 11);
        let blocks = exact_blocks(&target, 2, 3);
        let learned = spectral_learn(&blocks, &SpectralConfig::new(2, 3)).unwrap();
        for w in all_words(2, 6) {
            assert!((raw_score(&learned, &w) - raw_score(&target, &w)).abs() < 1e-6, "{w}");
        }
    }

    #[test]
    fn single_demo() {
        // H_B = [[0, 1], [1, 0]] has two equal singular values, so only the
        // full-rank factorization reproduces h([a]) = 1; any rank-1 cut gives
        // u_λ² v_λ² ≤ 1/4.
        let words = [ScoredWord::new(&Word::from_bits(&[1]), 1.0)];
        let basis = select_basis(&words, 1, 1);
        let blocks: HankelBlocks<f64> = build_hankel(&words, &basis);
        let a = Word::from_bits(&[1]);
        let full = spectral_learn(&blocks, &SpectralConfig::new(2, 1)).unwrap();
        assert!((full.score(&a) - 1.0).abs() < 1e-9);
        assert!(full.score(&Word::empty()).abs() < 1e-9);
        let cut = spectral_learn(&blocks, &SpectralConfig::new(1, 1)).unwrap();
        assert!(cut.score(&a) <= 0.25 + 1e-12);
    }

    #[test]
    fn extra_rank_is_a_zero_direction() {
        let target = random_wfa(2, 2, 12);
        let blocks = exact_blocks(&target, 2, 2);
        let a = spectral_fit(&blocks, &SpectralConfig::new(2, 3)).unwrap();
        let b = spectral_fit(&blocks, &SpectralConfig::new(3, 3)).unwrap();
        assert_eq!(b.effective_rank, 2);
        for w in all_words(2, 4) {
            assert!((raw_score(&a.wfa, &w) - raw_score(&b.wfa, &w)).abs() < 1e-8);
        }
    }

    #[test]
    fn rank_out_of_range_is_rejected() {
        let words = [ScoredWord::new(&Word::from_bits(&[1]), 1.0)];
        let basis = select_basis(&words, 1, 1);
        let blocks: HankelBlocks<f64> = build_hankel(&words, &basis);
        assert!(matches!(spectral_learn(&blocks, &SpectralConfig::new(3, 1)), Err(SpectralError::Rank { .. })));
        assert!(matches!(spectral_learn(&blocks, &SpectralConfig::new(0, 1)), Err(SpectralError::Rank { .. })));
    }

    #[test]
    fn all_zero_block_is_degenerate() {
        let words = [ScoredWord::new(&Word::from_bits(&[1]), 0.0)];
        let basis = select_basis(&words, 1, 1);
        let blocks: HankelBlocks<f64> = build_hankel(&words, &basis);
        assert_eq!(spectral_learn(&blocks, &SpectralConfig::new(1, 1)).unwrap_err(), SpectralError::Degenerate);
    }

    #[test]
    fn sign_convention_is_deterministic() {
        let target = random_wfa(2, 2, 13);
        let blocks = exact_blocks(&target, 2, 2);
        let a = spectral_learn(&blocks, &SpectralConfig::new(2, 3)).unwrap();
        let b = spectral_learn(&blocks, &SpectralConfig::new(2, 3)).unwrap();
        assert_eq!(a, b);
    }
}
