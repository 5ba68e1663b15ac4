//! Banded symmetric positive-definite storage and factorization, plus a few
//! dense helpers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Reciprocal condition estimate below which a Gram matrix is refused.
pub const RCOND_TOL: f64 = 1e-12;

/// Symmetric matrix with `A[i][j] = 0` whenever `|i - j| > bandwidth`.
/// Only the lower band is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    // row-major: data[i * (bw + 1) + k] = A[i][i - k]
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        let bw = bw.min(n.saturating_sub(1));
        BandedSym { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Adds `v` to entry `(i, j)` with `i >= j`.
    #[inline]
    pub fn add_lower(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i >= j && i - j <= self.bw);
        self.data[i * (self.bw + 1) + (i - j)] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[i * (self.bw + 1) + (i - j)]
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    /// Accumulates `c * r r'` for a sparse vector with sorted indices.
    pub fn add_outer(&mut self, idx: &[usize], val: &[f64], c: f64) {
        for a in 0..idx.len() {
            for b in 0..=a {
                self.add_lower(idx[a], idx[b], c * val[a] * val[b]);
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let hi = (i + self.bw + 1).min(self.n);
            y[i] = (lo..hi).map(|j| self.get(i, j) * x[j]).sum();
        }
        y
    }

    /// Banded Cholesky factorization `A = L L'`.
    pub fn cholesky(&self) -> Result<BandedCholesky, CholeskyFailure> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        for j in 0..n {
            let jlo = j.saturating_sub(bw);
            for i in j..(j + w).min(n) {
                let ilo = i.saturating_sub(bw);
                let mut sum = self.data[i * w + (i - j)];
                for k in ilo.max(jlo)..j {
                    sum -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                if i == j {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return Err(CholeskyFailure { pivot: j });
                    }
                    l[j * w] = sum.sqrt();
                } else {
                    l[i * w + (i - j)] = sum / l[j * w];
                }
            }
        }
        Ok(BandedCholesky { n, bw, l })
    }
}

/// Index of the first non-positive pivot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CholeskyFailure {
    pub pivot: usize,
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Squared ratio of the smallest to the largest pivot of `L`, a cheap
    /// reciprocal condition estimate for `A`.
    pub fn rcond_estimate(&self) -> f64 {
        let w = self.bw + 1;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for j in 0..self.n {
            let d = self.l[j * w];
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo / hi).powi(2)
    }

    /// Position of the smallest pivot.
    pub fn weakest_pivot(&self) -> usize {
        let w = self.bw + 1;
        (0..self.n)
            .min_by(|&a, &b| self.l[a * w].total_cmp(&self.l[b * w]))
            .unwrap_or(0)
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * w + (i - k)] * b[k];
            }
            b[i] = s / self.l[i * w];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..(i + w).min(n) {
                s -= self.l[k * w + (k - i)] * b[k];
            }
            b[i] = s / self.l[i * w];
        }
    }

    /// `b'A⁻¹b` for `b` zero outside `start..start + vals.len()`, via the
    /// forward half of the solve only.
    pub fn quad_form_sparse(&self, start: usize, vals: &[f64]) -> f64 {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut z = vec![0.0; n - start];
        let mut acc = 0.0;
        for i in start..n {
            let mut s = if i - start < vals.len() { vals[i - start] } else { 0.0 };
            for k in i.saturating_sub(bw).max(start)..i {
                s -= self.l[i * w + (i - k)] * z[k - start];
            }
            let zi = s / self.l[i * w];
            z[i - start] = zi;
            acc += zi * zi;
        }
        acc
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        for mut col in x.column_iter_mut() {
            self.solve_in_place(col.as_mut_slice());
        }
        x
    }
}

/// Dense least squares via SVD. Fails if the design is rank deficient
/// relative to `RCOND_TOL`.
pub fn lstsq(x: &DMatrix<f64>, y: &DVector<f64>, block: &str) -> Result<DVector<f64>> {
    if x.nrows() <= x.ncols() {
        return Err(Error::SampleSize { n: x.nrows(), required: x.ncols() });
    }
    // column scaling keeps the rank test meaningful for mixed units
    let scales: Vec<f64> = x
        .column_iter()
        .map(|c| {
            let s = c.norm();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let mut xs = x.clone();
    for (k, mut c) in xs.column_iter_mut().enumerate() {
        c /= scales[k];
    }
    let svd = xs.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * RCOND_TOL.sqrt()) {
        return Err(Error::Singular {
            block: block.to_string(),
            detail: format!("design is rank deficient (singular value ratio {:.3e})", smin / smax),
        });
    }
    let beta = svd
        .solve(y, 0.0)
        .map_err(|e| Error::Singular { block: block.to_string(), detail: e.to_string() })?;
    Ok(DVector::from_iterator(beta.len(), beta.iter().zip(&scales).map(|(b, s)| b / s)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn random_spd(n: usize, bw: usize, seed: u64) -> BandedSym {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut a = BandedSym::zeros(n, bw);
        // sum of banded outer products plus a ridge
        for start in 0..n {
            let len = (bw + 1).min(n - start);
            let idx: Vec<usize> = (start..start + len).collect();
            let val: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            a.add_outer(&idx, &val, 1.0);
        }
        for i in 0..n {
            a.add_lower(i, i, 0.1);
        }
        a
    }

    #[test]
    fn banded_solve_matches_dense() {
        for &(n, bw) in &[(1, 0), (5, 0), (9, 2), (20, 3), (12, 11)] {
            let a = random_spd(n, bw, n as u64);
            let chol = a.cholesky().unwrap();
            let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let x = chol.solve(&b);
            let dense = a.to_dense().cholesky().unwrap().solve(&DVector::from_vec(b.clone()));
            for i in 0..n {
                assert_relative_eq!(x[i], dense[i], max_relative = 1e-10, epsilon = 1e-12);
            }
            let back = a.mul_vec(&x);
            for i in 0..n {
                assert_relative_eq!(back[i], b[i], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn singular_matrix_fails() {
        let mut a = BandedSym::zeros(3, 1);
        a.add_outer(&[0, 1], &[1.0, 1.0], 1.0);
        assert_eq!(a.cholesky().unwrap_err().pivot, 1);
    }

    #[test]
    fn lstsq_recovers_line() {
        let x = DMatrix::from_fn(10, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y = DVector::from_fn(10, |i, _| 2.0 + 3.0 * i as f64);
        let b = lstsq(&x, &y, "test").unwrap();
        assert_relative_eq!(b[0], 2.0, epsilon = 1e-10);
        assert_relative_eq!(b[1], 3.0, epsilon = 1e-10);
    }

    #[test]
    fn lstsq_rank_deficient() {
        let x = DMatrix::from_fn(10, 2, |_, _| 1.0);
        let y = DVector::from_element(10, 1.0);
        assert!(matches!(lstsq(&x, &y, "w"), Err(Error::Singular { .. })));
    }
}
