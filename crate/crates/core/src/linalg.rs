//! Banded LU factorisation without pivoting.
//!
//! The penalised systems are five-point stencils ordered so that the
//! half-bandwidth equals the shorter grid axis. Row operations stay inside the
//! band and work on contiguous slices, and the elimination order is fixed, so
//! the result is bitwise reproducible.

use crate::{Error, Real, Result};

#[derive(Debug, Clone)]
pub struct BandedMatrix<T> {
    n: usize,
    lower: usize,
    upper: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Real> BandedMatrix<T> {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        let width = lower + upper + 1;
        Self { n, lower, upper, width, data: vec![T::zero(); n * width] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.lower >= i && j <= i + self.upper, "({i}, {j}) outside band");
        i * self.width + (j + self.lower - i)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        if j + self.lower < i || j > i + self.upper {
            return T::zero();
        }
        self.data[self.offset(i, j)]
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let o = self.offset(i, j);
        self.data[o] = self.data[o] + v;
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let o = self.offset(i, j);
        self.data[o] = v;
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.lower);
                let hi = (i + self.upper + 1).min(self.n);
                (lo..hi).map(|j| self.data[self.offset(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// Doolittle elimination in place; the unit lower factor overwrites the
    /// sub-diagonal band.
    pub fn factor(mut self) -> Result<BandedLu<T>> {
        let (n, p, q, w) = (self.n, self.lower, self.upper, self.width);
        for k in 0..n {
            let pivot = self.data[k * w + p];
            if pivot == T::zero() || !pivot.is_finite() {
                return Err(Error::LinearSolve(format!("zero or non-finite pivot at row {k}")));
            }
            let row_end = (k + q + 1).min(n);
            let len = row_end - (k + 1);
            let (head, tail) = self.data.split_at_mut((k + 1) * w);
            let pivot_row = &head[k * w + p + 1..k * w + p + 1 + len];
            for i in (k + 1)..(k + p + 1).min(n) {
                let base = (i - k - 1) * w;
                let col_k = base + (k + p - i);
                let l = tail[col_k] / pivot;
                if l == T::zero() {
                    continue;
                }
                tail[col_k] = l;
                let start = col_k + 1;
                let target = &mut tail[start..start + len];
                for (t, &u) in target.iter_mut().zip(pivot_row) {
                    *t = *t - l * u;
                }
            }
        }
        Ok(BandedLu { m: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu<T> {
    m: BandedMatrix<T>,
}

impl<T: Real> BandedLu<T> {
    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let m = &self.m;
        let (n, p, q, w) = (m.n, m.lower, m.upper, m.width);
        for i in 0..n {
            let lo = i.saturating_sub(p);
            let row = &m.data[i * w..(i + 1) * w];
            let mut s = b[i];
            for j in lo..i {
                s = s - row[j + p - i] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + q + 1).min(n);
            let row = &m.data[i * w..(i + 1) * w];
            let mut s = b[i];
            for j in (i + 1)..hi {
                s = s - row[j + p - i] * b[j];
            }
            b[i] = s / row[p];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.to_vec();
        let mut x = b.to_vec();
        for k in 0..n {
            let piv = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
            m.swap(k, piv);
            x.swap(k, piv);
            for i in k + 1..n {
                let l = m[i][k] / m[k][k];
                for j in k..n {
                    m[i][j] -= l * m[k][j];
                }
                x[i] -= l * x[k];
            }
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
            x[i] = (x[i] - s) / m[i][i];
        }
        x
    }

    proptest! {
        #[test]
        fn matches_dense_pivoted_solve(
            n in 3usize..40,
            p in 1usize..5,
            q in 1usize..5,
            seed in any::<u64>(),
        ) {
            let mut state = seed | 1;
            let mut next = || {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                (state % 2001) as f64 / 1000.0 - 1.0
            };
            let mut band = BandedMatrix::zeros(n, p, q);
            let mut dense = vec![vec![0.0; n]; n];
            for i in 0..n {
                let lo = i.saturating_sub(p);
                let hi = (i + q + 1).min(n);
                let mut off = 0.0;
                for j in lo..hi {
                    if j != i {
                        let v = next();
                        off += v.abs();
                        band.set(i, j, v);
                        dense[i][j] = v;
                    }
                }
                let d = off + 0.5 + next().abs();
                band.set(i, i, d);
                dense[i][i] = d;
            }
            let b: Vec<f64> = (0..n).map(|_| next()).collect();
            let mut x = b.clone();
            let ax = band.mul_vec(&dense_solve(&dense, &b));
            for (l, r) in ax.iter().zip(&b) {
                prop_assert!((l - r).abs() < 1e-9);
            }
            band.factor().unwrap().solve_in_place(&mut x);
            let reference = dense_solve(&dense, &b);
            for (l, r) in x.iter().zip(&reference) {
                prop_assert!((l - r).abs() < 1e-9 * (1.0 + r.abs()));
            }
        }
    }

    #[test]
    fn zero_pivot_is_an_error() {
        let m = BandedMatrix::<f64>::zeros(3, 1, 1);
        assert!(matches!(m.factor(), Err(Error::LinearSolve(_))));
    }
}
