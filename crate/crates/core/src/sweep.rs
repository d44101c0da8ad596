//! Grid search over spectral hyperparameters (rank, prefix and suffix
//! length caps) scored by held-out squared error.

use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::hankel::{build_hankel, select_basis, ScoredWord};
use crate::linalg::svd;
use crate::scalar::Scalar;
use crate::spectral::{spectral_fit_with, SpectralConfig, SpectralError};
use crate::wfa::Wfa;

pub const HELDOUT_FRACTION: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepRanges {
    pub rank: RangeInclusive<usize>,
    pub rows: RangeInclusive<usize>,
    pub cols: RangeInclusive<usize>,
}

impl Default for SweepRanges {
    fn default() -> Self {
        SweepRanges { rank: 2..=10, rows: 2..=8, cols: 2..=8 }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SweepError {
    #[error("bad sweep spec `{0}`: expected rank=A..B,rows=A..B,cols=A..B")]
    Spec(String),
    #[error("no words to fit")]
    NoWords,
    #[error("no configuration in the ranges produced a model")]
    NoValidConfig,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

fn parse_range(text: &str) -> Option<RangeInclusive<usize>> {
    match text.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (a.trim().parse().ok()?, b.trim().trim_start_matches('=').parse().ok()?);
            (a <= b).then_some(a..=b)
        }
        None => text.trim().parse().ok().map(|v| v..=v),
    }
}

impl SweepRanges {
    /// Parse `rank=2..10,rows=2..8,cols=2..8`; omitted keys keep defaults
    /// and a bare number means a single value.
    pub fn parse(spec: &str) -> Result<Self, SweepError> {
        let err = || SweepError::Spec(spec.to_string());
        let mut out = SweepRanges::default();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(err)?;
            let range = parse_range(value).ok_or_else(err)?;
            match key.trim() {
                "rank" => out.rank = range,
                "rows" => out.rows = range,
                "cols" => out.cols = range,
                _ => return Err(err()),
            }
        }
        if *out.rank.start() == 0 {
            return Err(err());
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct SpectralParams {
    pub rank: usize,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(flatten)]
    pub params: SpectralParams,
    /// `None` when the rank exceeds the Hankel block size.
    pub heldout_loss: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SweepResult<T> {
    pub best: SpectralParams,
    pub best_loss: f64,
    pub table: Vec<SweepRow>,
    /// Refit of the best configuration on all words.
    pub wfa: Wfa<T>,
}

/// Deterministic `(train, held-out)` split with 20% held out.
pub fn split_words(words: &[ScoredWord], seed: u64) -> (Vec<ScoredWord>, Vec<ScoredWord>) {
    let mut idx: Vec<usize> = (0..words.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_held = if words.len() < 2 { 0 } else { ((words.len() as f64 * HELDOUT_FRACTION).round() as usize).max(1) };
    let (held, train) = idx.split_at(n_held);
    let pick = |ix: &[usize]| {
        let mut ix = ix.to_vec();
        ix.sort_unstable();
        ix.into_iter().map(|i| words[i].clone()).collect::<Vec<_>>()
    };
    (pick(train), pick(held))
}

pub fn heldout_loss<T: Scalar>(wfa: &Wfa<T>, words: &[ScoredWord]) -> f64 {
    wfa.fit_loss(words.iter().map(|w| (&w.word, w.score)))
}

/// Fit with fixed hyperparameters.
pub fn fit<T: Scalar>(words: &[ScoredWord], params: SpectralParams, xi: f64, ap_count: usize) -> Result<Wfa<T>, SpectralError> {
    let basis = select_basis(words, params.rows, params.cols);
    let blocks = build_hankel::<T>(words, &basis);
    let mut cfg = SpectralConfig::new(params.rank, ap_count);
    cfg.xi = xi;
    spectral_fit_with(&blocks, &svd(&blocks.hb), &cfg).map(|f| f.wfa)
}

/// Grid search; the best configuration has the lowest held-out loss, ties
/// going to the smallest `(rank, rows, cols)`.
pub fn sweep<T: Scalar>(
    words: &[ScoredWord],
    ranges: &SweepRanges,
    xi: f64,
    ap_count: usize,
    seed: u64,
) -> Result<SweepResult<T>, SweepError> {
    if words.is_empty() {
        return Err(SweepError::NoWords);
    }
    let (train, held) = split_words(words, seed);
    let scored = if held.is_empty() { &train } else { &held };
    let mut table = Vec::new();
    for rows in ranges.rows.clone() {
        for cols in ranges.cols.clone() {
            let basis = select_basis(&train, rows, cols);
            let blocks = build_hankel::<T>(&train, &basis);
            let dec = svd(&blocks.hb);
            for rank in ranges.rank.clone() {
                let mut cfg = SpectralConfig::new(rank, ap_count);
                cfg.xi = xi;
                let loss = match spectral_fit_with(&blocks, &dec, &cfg) {
                    Ok(f) => Some(heldout_loss(&f.wfa, scored)),
                    Err(SpectralError::Rank { .. }) | Err(SpectralError::Degenerate) => None,
                    Err(e) => return Err(e.into()),
                };
                table.push(SweepRow { params: SpectralParams { rank, rows, cols }, heldout_loss: loss });
            }
        }
    }
    table.sort_by_key(|r| r.params);
    let (best, best_loss) = table
        .iter()
        .filter_map(|r| r.heldout_loss.filter(|l| l.is_finite()).map(|l| (r.params, l)))
        .fold(None, |acc: Option<(SpectralParams, f64)>, (p, l)| match acc {
            Some((bp, bl)) if bl < l || (bl == l && bp < p) => Some((bp, bl)),
            _ => Some((p, l)),
        })
        .ok_or(SweepError::NoValidConfig)?;
    let wfa = fit(words, best, xi, ap_count)?;
    Ok(SweepResult { best, best_loss, table, wfa })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::word::Word;

    fn toy_words() -> Vec<ScoredWord> {
        let mut v = Vec::new();
        for i in 0..20u8 {
            v.push(ScoredWord::new(&Word::from_bits(&[0, 1, 3, 7]), 1.0));
            v.push(ScoredWord::new(&Word::from_bits(&[0, (i % 3) + 1, 0]), 0.0));
        }
        v
    }

    #[test]
    fn parse_ranges() {
        let r = SweepRanges::parse("rank=2..10,rows=2..8,cols=2..8").unwrap();
        assert_eq!(r, SweepRanges::default());
        let r = SweepRanges::parse("rank=3,rows=1..2").unwrap();
        assert_eq!(r.rank, 3..=3);
        assert_eq!(r.rows, 1..=2);
        assert!(SweepRanges::parse("rank=5..2").is_err());
        assert!(SweepRanges::parse("depth=1").is_err());
        assert!(SweepRanges::parse("rank=0").is_err());
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let words: Vec<_> = (0..10u8).map(|i| ScoredWord::new(&Word::from_bits(&[i % 8]), i as f64)).collect();
        let (a, b) = split_words(&words, 4);
        assert_eq!((a.len(), b.len()), (8, 2));
        assert_eq!(split_words(&words, 4), (a.clone(), b.clone()));
        for w in &b {
            assert!(!a.contains(w));
        }
    }

    #[test]
    fn single_config_is_returned() {
        let ranges = SweepRanges { rank: 2..=2, rows: 3..=3, cols: 3..=3 };
        let r = sweep::<f64>(&toy_words(), &ranges, 0.5, 3, 0).unwrap();
        assert_eq!(r.best, SpectralParams { rank: 2, rows: 3, cols: 3 });
        assert_eq!(r.table.len(), 1);
    }

    #[test]
    fn ties_go_to_smallest_config() {
        // all words identical, so every valid config predicts perfectly
        let words = vec![ScoredWord::new(&Word::from_bits(&[1]), 1.0); 10];
        let ranges = SweepRanges { rank: 1..=2, rows: 1..=2, cols: 1..=2 };
        let r = sweep::<f64>(&words, &ranges, 0.5, 3, 0).unwrap();
        let best_loss = r.best_loss;
        let smallest = r.table.iter().filter(|row| row.heldout_loss == Some(best_loss)).map(|row| row.params).min().unwrap();
        assert_eq!(r.best, smallest);
    }

    #[test]
    fn invalid_ranks_are_skipped() {
        let ranges = SweepRanges { rank: 1..=50, rows: 4..=4, cols: 4..=4 };
        let r = sweep::<f64>(&toy_words(), &ranges, 0.5, 3, 0).unwrap();
        assert!(r.table.iter().any(|row| row.heldout_loss.is_none()));
        assert!(r.best.rank <= 10);
    }

    #[test]
    fn toy_sweep_separates_classes() {
        let r = sweep::<f64>(&toy_words(), &SweepRanges { rank: 1..=6, rows: 1..=4, cols: 1..=4 }, 0.5, 3, 1).unwrap();
        assert!(r.best_loss < 0.05, "{}", r.best_loss);
        assert!(r.wfa.score(&Word::from_bits(&[0, 1, 3, 7])) >= 0.5);
        assert!(r.wfa.score(&Word::from_bits(&[0, 2, 0])) < 0.5);
    }
}
