//! Small dense linear algebra: a row-major matrix, a one-sided Jacobi SVD
//! and the Moore–Penrose pseudo-inverse built on it.
//!
//! Matrices here are at most a few hundred rows (Hankel blocks over a
//! desk-scale basis), so clarity wins over blocking or SIMD.

use std::ops::{Index, IndexMut};

use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> Matrix<T> {
    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major buffer has wrong length");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::filled(self.cols, self.rows, T::default());
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)];
            }
        }
        out
    }
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, T::zero())
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let rhs_row = rhs.row(k);
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o = *o + a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ · v`.
    pub fn transpose_mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len());
        let mut out = vec![T::zero(); self.cols];
        for (r, &vr) in v.iter().enumerate() {
            if vr == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(r)) {
                *o = *o + a * vr;
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|r| crate::scalar::dot(self.row(r), v)).collect()
    }

    pub fn is_all_zero(&self) -> bool {
        self.data.iter().all(|x| *x == T::zero())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Thin SVD `A = U diag(s) Vᵀ` with singular values in non-increasing order.
#[derive(Clone, Debug)]
pub struct Svd<T> {
    /// `rows × k`, `k = min(rows, cols)`.
    pub u: Matrix<T>,
    pub singular_values: Vec<T>,
    /// `cols × k`.
    pub v: Matrix<T>,
}

const MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD.
///
/// Columns of `U` belonging to exactly-zero singular values are zero.
pub fn svd<T: Scalar>(a: &Matrix<T>) -> Svd<T> {
    if a.rows() < a.cols() {
        let t = svd(&a.transpose());
        return Svd { u: t.v, singular_values: t.singular_values, v: t.u };
    }
    let (m, n) = (a.rows(), a.cols());
    // column-major working copies
    let mut cols: Vec<Vec<T>> = (0..n).map(|c| a.column(c)).collect();
    let mut vcols: Vec<Vec<T>> = (0..n)
        .map(|c| (0..n).map(|r| if r == c { T::one() } else { T::zero() }).collect())
        .collect();
    let eps = T::epsilon();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (&cols[p], &cols[q]);
                    let mut alpha = T::zero();
                    let mut beta = T::zero();
                    let mut gamma = T::zero();
                    for i in 0..m {
                        alpha = alpha + cp[i] * cp[i];
                        beta = beta + cq[i] * cq[i];
                        gamma = gamma + cp[i] * cq[i];
                    }
                    (alpha, beta, gamma)
                };
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let two = T::lit(2.0);
                let zeta = (beta - alpha) / (two * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<T> = cols.iter().map(|c| c.iter().map(|&x| x * x).sum::<T>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps index order among ties
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));

    let mut u = Matrix::zeros(m, n);
    let mut v = Matrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        let sigma = norms[j];
        singular_values.push(sigma);
        if sigma > T::zero() {
            for i in 0..m {
                u[(i, k)] = cols[j][i] / sigma;
            }
        }
        for i in 0..n {
            v[(i, k)] = vcols[j][i];
        }
    }
    Svd { u, singular_values, v }
}

fn rotate<T: Scalar>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (left, right) = cols.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    for (xp, xq) in cp.iter_mut().zip(cq.iter_mut()) {
        let (bp, bq) = (*xp, *xq);
        *xp = c * bp - s * bq;
        *xq = s * bp + c * bq;
    }
}

/// Moore–Penrose pseudo-inverse. Singular values at or below
/// `max(floor, σ_max · ε · max(rows, cols))` are treated as zero.
pub fn pinv<T: Scalar>(a: &Matrix<T>, floor: T) -> Matrix<T> {
    let Svd { u, singular_values, v } = svd(a);
    let smax = singular_values.first().copied().unwrap_or_else(T::zero);
    let cutoff = floor.max(smax * T::epsilon() * T::lit(a.rows().max(a.cols()) as f64));
    let mut out = Matrix::zeros(a.cols(), a.rows());
    for (k, &sigma) in singular_values.iter().enumerate() {
        if sigma <= cutoff {
            continue;
        }
        let inv = T::one() / sigma;
        for i in 0..a.cols() {
            let vik = v[(i, k)] * inv;
            if vik == T::zero() {
                continue;
            }
            for j in 0..a.rows() {
                out[(i, j)] = out[(i, j)] + vik * u[(j, k)];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
        let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Matrix::from_row_major(rows, cols, data)
    }

    fn reconstruct(s: &Svd<f64>) -> Matrix<f64> {
        let k = s.singular_values.len();
        let mut us = s.u.clone();
        for r in 0..us.rows() {
            for c in 0..k {
                us[(r, c)] *= s.singular_values[c];
            }
        }
        us.matmul(&s.v.transpose())
    }

    fn max_diff(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
        a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn svd_reconstructs_tall_and_wide() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(r, c) in &[(7, 3), (3, 7), (5, 5), (1, 4), (4, 1)] {
            let a = random(r, c, &mut rng);
            let s = svd(&a);
            assert!(max_diff(&reconstruct(&s), &a) < 1e-12, "{r}x{c}");
            assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
            // orthonormal U columns
            let utu = s.u.transpose().matmul(&s.u);
            assert!(max_diff(&utu, &Matrix::identity(utu.rows())) < 1e-12);
        }
    }

    #[test]
    fn singular_values_agree_with_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let a = random(6, 4, &mut rng);
            let ours = svd(&a).singular_values;
            let na = nalgebra::DMatrix::from_row_slice(6, 4, a.as_slice());
            let mut theirs: Vec<f64> = na.singular_values().iter().copied().collect();
            theirs.sort_by(|x, y| y.partial_cmp(x).unwrap());
            for (x, y) in ours.iter().zip(&theirs) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rank_deficient_matrix_has_zero_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(6, 2, &mut rng).matmul(&random(2, 5, &mut rng));
        let s = svd(&a);
        assert!(s.singular_values[2] < 1e-12);
        assert!(max_diff(&reconstruct(&s), &a) < 1e-12);
    }

    #[test]
    fn pinv_satisfies_penrose_conditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random(6, 3, &mut rng).matmul(&random(3, 4, &mut rng));
        let p = pinv(&a, 1e-10);
        assert!(max_diff(&a.matmul(&p).matmul(&a), &a) < 1e-10);
        assert!(max_diff(&p.matmul(&a).matmul(&p), &p) < 1e-10);
        let ap = a.matmul(&p);
        assert!(max_diff(&ap, &ap.transpose()) < 1e-10);
    }

    #[test]
    fn pinv_of_zero_is_zero() {
        let z = Matrix::<f64>::zeros(3, 2);
        assert!(pinv(&z, 1e-10).is_all_zero());
    }

    #[test]
    fn works_in_single_precision() {
        let a = Matrix::from_row_major(2, 2, vec![3.0f32, 0.0, 0.0, -2.0]);
        let s = svd(&a);
        assert!((s.singular_values[0] - 3.0).abs() < 1e-6);
        assert!((s.singular_values[1] - 2.0).abs() < 1e-6);
    }
}
