//! Empirical Hankel sub-blocks over a prefix/suffix basis.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap;

use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::word::{Symbol, Word};

/// Scored word used for Hankel estimation. Words are compressed on entry.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredWord {
    pub word: Word,
    pub score: f64,
}

impl ScoredWord {
    pub fn new(word: &Word, score: f64) -> Self {
        ScoredWord { word: word.compress(), score }
    }
}

impl From<&crate::demo::Demonstration> for ScoredWord {
    fn from(d: &crate::demo::Demonstration) -> Self {
        ScoredWord::new(&d.word, d.score)
    }
}

/// Prefix set `P` and suffix set `S`, both containing `λ` first.
#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    prefixes: Vec<Word>,
    suffixes: Vec<Word>,
    prefix_index: FxHashMap<Word, usize>,
    suffix_index: FxHashMap<Word, usize>,
}

fn canonical_order(a: &Word, b: &Word) -> std::cmp::Ordering {
    a.len().cmp(&b.len()).then_with(|| a.symbols().cmp(b.symbols()))
}

impl Basis {
    /// Build from arbitrary word lists; `λ` is added, duplicates dropped and
    /// the canonical order (length, then symbols) applied.
    pub fn new(prefixes: impl IntoIterator<Item = Word>, suffixes: impl IntoIterator<Item = Word>) -> Self {
        let prep = |words: &mut dyn Iterator<Item = Word>| {
            let mut v: Vec<Word> = std::iter::once(Word::empty()).chain(words).collect();
            v.sort_by(canonical_order);
            v.dedup();
            let index = v.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
            (v, index)
        };
        let (prefixes, prefix_index) = prep(&mut prefixes.into_iter());
        let (suffixes, suffix_index) = prep(&mut suffixes.into_iter());
        Basis { prefixes, suffixes, prefix_index, suffix_index }
    }

    pub fn prefixes(&self) -> &[Word] {
        &self.prefixes
    }

    pub fn suffixes(&self) -> &[Word] {
        &self.suffixes
    }

    pub fn prefix_index(&self, w: &Word) -> Option<usize> {
        self.prefix_index.get(w).copied()
    }

    pub fn suffix_index(&self, w: &Word) -> Option<usize> {
        self.suffix_index.get(w).copied()
    }
}

/// All prefixes/suffixes of the (compressed) words up to the length caps.
pub fn select_basis(words: &[ScoredWord], max_prefix_len: usize, max_suffix_len: usize) -> Basis {
    let mut prefixes = Vec::new();
    let mut suffixes = Vec::new();
    for sw in words {
        let w = &sw.word;
        for len in 1..=w.len().min(max_prefix_len) {
            prefixes.push(w.prefix(len));
        }
        for len in 1..=w.len().min(max_suffix_len) {
            suffixes.push(w.suffix_from(w.len() - len));
        }
    }
    Basis::new(prefixes, suffixes)
}

/// `H_B` and `{H_σ}` with per-cell contribution counts.
#[derive(Clone, Debug)]
pub struct HankelBlocks<T> {
    pub basis: Basis,
    pub hb: Matrix<T>,
    pub h_sigma: BTreeMap<Symbol, Matrix<T>>,
    pub counts_b: Matrix<u32>,
    pub counts_sigma: BTreeMap<Symbol, Matrix<u32>>,
}

impl<T: Scalar> HankelBlocks<T> {
    pub fn symbols(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.h_sigma.keys().copied()
    }
}

/// Mean-aggregated Hankel estimate: each split `w = u·v` (resp. `u·σ·v`)
/// with `u ∈ P`, `v ∈ S` contributes the word's score to cell `(u, v)`.
pub fn build_hankel<T: Scalar>(words: &[ScoredWord], basis: &Basis) -> HankelBlocks<T> {
    let (np, ns) = (basis.prefixes.len(), basis.suffixes.len());
    let mut sum_b = Matrix::<f64>::zeros(np, ns);
    let mut counts_b = Matrix::<u32>::filled(np, ns, 0);
    let mut sum_sigma: BTreeMap<Symbol, Matrix<f64>> = BTreeMap::new();
    let mut counts_sigma: BTreeMap<Symbol, Matrix<u32>> = BTreeMap::new();

    for sw in words {
        let w = sw.word.symbols();
        // prefix index of w[..i] for every i, if present
        let pidx: Vec<Option<usize>> =
            (0..=w.len()).map(|i| basis.prefix_index(&Word::new(w[..i].to_vec()))).collect();
        let sidx: Vec<Option<usize>> =
            (0..=w.len()).map(|i| basis.suffix_index(&Word::new(w[i..].to_vec()))).collect();
        for i in 0..=w.len() {
            if let (Some(p), Some(s)) = (pidx[i], sidx[i]) {
                sum_b[(p, s)] += sw.score;
                counts_b[(p, s)] += 1;
            }
        }
        for i in 0..w.len() {
            if let (Some(p), Some(s)) = (pidx[i], sidx[i + 1]) {
                let sigma = w[i];
                sum_sigma.entry(sigma).or_insert_with(|| Matrix::zeros(np, ns))[(p, s)] += sw.score;
                counts_sigma.entry(sigma).or_insert_with(|| Matrix::filled(np, ns, 0))[(p, s)] += 1;
            }
        }
    }

    let mean = |sum: &Matrix<f64>, counts: &Matrix<u32>| {
        let data = sum
            .as_slice()
            .iter()
            .zip(counts.as_slice())
            .map(|(&s, &n)| if n == 0 { T::zero() } else { T::lit(s / n as f64) })
            .collect();
        Matrix::from_row_major(sum.rows(), sum.cols(), data)
    };
    let hb = mean(&sum_b, &counts_b);
    let h_sigma = sum_sigma.iter().map(|(&k, s)| (k, mean(s, &counts_sigma[&k]))).collect();
    HankelBlocks { basis: basis.clone(), hb, h_sigma, counts_b, counts_sigma }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wfa::Wfa;
    use proptest::prelude::*;

    fn w(bits: &[u8]) -> Word {
        Word::from_bits(bits)
    }

    fn sw(bits: &[u8], s: f64) -> ScoredWord {
        ScoredWord::new(&w(bits), s)
    }

    #[test]
    fn basis_enumerates_prefixes_and_suffixes() {
        let b = select_basis(&[sw(&[1, 2], 1.0)], 2, 2);
        assert_eq!(b.prefixes(), &[w(&[]), w(&[1]), w(&[1, 2])]);
        assert_eq!(b.suffixes(), &[w(&[]), w(&[2]), w(&[1, 2])]);
        let b0 = select_basis(&[sw(&[1, 2], 1.0)], 0, 0);
        assert_eq!(b0.prefixes(), &[w(&[])]);
        assert_eq!(b0.suffixes(), &[w(&[])]);
    }

    #[test]
    fn shared_prefixes_are_not_duplicated() {
        let b = select_basis(&[sw(&[1, 2, 3], 1.0), sw(&[1, 2, 4], 0.0)], 3, 1);
        assert_eq!(b.prefixes(), &[w(&[]), w(&[1]), w(&[1, 2]), w(&[1, 2, 3]), w(&[1, 2, 4])]);
        assert_eq!(b.suffixes(), &[w(&[]), w(&[3]), w(&[4])]);
    }

    #[test]
    fn words_are_compressed_before_use() {
        let b = select_basis(&[sw(&[1, 1, 2, 2], 1.0)], 4, 4);
        assert_eq!(b.prefixes().len(), 3);
    }

    #[test]
    fn single_demo_entries() {
        let words = [sw(&[1, 2], 1.0)];
        let basis = select_basis(&words, 2, 2);
        let h: HankelBlocks<f64> = build_hankel(&words, &basis);
        let p = |x: &[u8]| basis.prefix_index(&w(x)).unwrap();
        let s = |x: &[u8]| basis.suffix_index(&w(x)).unwrap();
        assert_eq!(h.hb[(p(&[]), s(&[1, 2]))], 1.0);
        assert_eq!(h.hb[(p(&[1]), s(&[2]))], 1.0);
        assert_eq!(h.hb[(p(&[1, 2]), s(&[]))], 1.0);
        assert_eq!(h.h_sigma[&Symbol::from_bits(1)][(p(&[]), s(&[2]))], 1.0);
        assert_eq!(h.h_sigma[&Symbol::from_bits(2)][(p(&[1]), s(&[]))], 1.0);
        // untouched cells stay zero
        assert_eq!(h.hb[(p(&[]), s(&[]))], 0.0);
        assert_eq!(h.counts_b[(p(&[]), s(&[]))], 0);
        let total: f64 = h.hb.as_slice().iter().sum();
        assert_eq!(total, 3.0);
    }

    #[test]
    fn empty_demo_set_gives_zero_blocks() {
        let basis = Basis::new(vec![w(&[1])], vec![w(&[1])]);
        let h: HankelBlocks<f64> = build_hankel(&[], &basis);
        assert!(h.hb.is_all_zero());
        assert!(h.h_sigma.is_empty());
    }

    #[test]
    fn conflicting_scores_average() {
        let words = [sw(&[1, 2], 1.0), sw(&[1, 2], 0.0)];
        let basis = select_basis(&words, 2, 2);
        let h: HankelBlocks<f64> = build_hankel(&words, &basis);
        let p = basis.prefix_index(&w(&[1])).unwrap();
        let s = basis.suffix_index(&w(&[2])).unwrap();
        assert_eq!(h.hb[(p, s)], 0.5);
        assert_eq!(h.counts_b[(p, s)], 2);
    }

    /// Exact scores from a known WFA land in every populated cell.
    #[test]
    fn cells_match_generating_wfa() {
        let wfa = Wfa::<f64>::from_parts(
            vec![1.0, 0.5],
            vec![0.3, -1.0],
            vec![
                (Symbol::from_bits(1), vec![0.2, 0.7, -0.4, 0.1]),
                (Symbol::from_bits(2), vec![0.5, 0.0, 0.3, 0.9]),
            ],
            0.5,
            2,
        );
        let mut words = Vec::new();
        for bits in [vec![1u8], vec![2], vec![1, 2], vec![2, 1], vec![1, 2, 1], vec![2, 1, 2]] {
            let word = w(&bits);
            words.push(ScoredWord::new(&word, wfa.score(&word)));
        }
        let basis = select_basis(&words, 3, 3);
        let h: HankelBlocks<f64> = build_hankel(&words, &basis);
        for (i, u) in basis.prefixes().iter().enumerate() {
            for (j, v) in basis.suffixes().iter().enumerate() {
                if h.counts_b[(i, j)] > 0 {
                    assert!((h.hb[(i, j)] - wfa.score(&u.concat(v))).abs() < 1e-15);
                }
            }
        }
    }

    fn words_strategy() -> impl Strategy<Value = Vec<(Vec<u8>, f64)>> {
        prop::collection::vec((prop::collection::vec(0u8..3, 0..6), 0.0f64..1.0), 0..12)
    }

    proptest! {
        #[test]
        fn equal_concatenations_share_values(raw in words_strategy()) {
            let words: Vec<ScoredWord> = raw.iter().map(|(b, s)| sw(b, *s)).collect();
            let basis = select_basis(&words, 3, 3);
            let h: HankelBlocks<f64> = build_hankel(&words, &basis);
            let mut seen: FxHashMap<Word, f64> = FxHashMap::default();
            for (i, u) in basis.prefixes().iter().enumerate() {
                for (j, v) in basis.suffixes().iter().enumerate() {
                    let uv = u.concat(v);
                    if h.counts_b[(i, j)] == 0 {
                        prop_assert_eq!(h.hb[(i, j)], 0.0);
                        continue;
                    }
                    if let Some(&prev) = seen.get(&uv) {
                        prop_assert!((prev - h.hb[(i, j)]).abs() < 1e-12);
                    } else {
                        seen.insert(uv, h.hb[(i, j)]);
                    }
                }
            }
        }

        #[test]
        fn aggregation_ignores_demo_order(raw in words_strategy(), seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let words: Vec<ScoredWord> = raw.iter().map(|(b, s)| sw(b, *s)).collect();
            let mut shuffled = words.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let basis = select_basis(&words, 3, 3);
            let a: HankelBlocks<f64> = build_hankel(&words, &basis);
            let b: HankelBlocks<f64> = build_hankel(&shuffled, &basis);
            for (x, y) in a.hb.as_slice().iter().zip(b.hb.as_slice()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
