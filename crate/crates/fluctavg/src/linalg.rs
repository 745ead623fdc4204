//! LU factorization without pivoting that skips structural zeros.
//!
//! Storage is dense; elimination only touches rows and columns that are
//! nonzero in the current pivot column and row. On periodic band matrices the
//! fill stays confined to the band plus a border of width equal to the band,
//! which makes full inversion roughly `O(N^2 b)` instead of `O(N^3)`.
//!
//! Pivoting is omitted on purpose: the matrices factored here are either
//! `H - z` with `Im z > 0` (every Schur complement keeps imaginary part
//! `<= -Im z`, so `|pivot| >= Im z`) or `1 - m^2 S` with `|m| < 1` and `S`
//! stochastic (strictly diagonally dominant).

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("zero or non-finite pivot {pivot:e} at step {step}")]
    Singular { step: usize, pivot: f64 },
}

#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    /// Strictly lower part by column: `(row, l_rk)`.
    lower: Vec<Vec<(usize, Complex64)>>,
    /// Strictly upper part by row: `(col, u_kc)`.
    upper: Vec<Vec<(usize, Complex64)>>,
    diag: Vec<Complex64>,
}

impl SparseLu {
    pub fn factor(a: &DMatrix<Complex64>) -> Result<Self, LinalgError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(LinalgError::NotSquare {
                rows: n,
                cols: a.ncols(),
            });
        }
        let zero = Complex64::new(0.0, 0.0);
        let mut w: Vec<Complex64> = vec![zero; n * n];
        for i in 0..n {
            for j in 0..n {
                w[i * n + j] = a[(i, j)];
            }
        }
        let mut lower = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n);
        let mut diag = Vec::with_capacity(n);
        let mut rows: Vec<usize> = Vec::new();
        let mut cols: Vec<usize> = Vec::new();
        for k in 0..n {
            let p = w[k * n + k];
            let mag = p.norm();
            if !(mag.is_finite() && mag > 1e-300) {
                return Err(LinalgError::Singular { step: k, pivot: mag });
            }
            cols.clear();
            cols.extend((k + 1..n).filter(|&c| w[k * n + c] != zero));
            rows.clear();
            rows.extend((k + 1..n).filter(|&r| w[r * n + k] != zero));
            let inv = p.inv();
            let mut lcol = Vec::with_capacity(rows.len());
            let (head, tail) = w.split_at_mut((k + 1) * n);
            let pivot_row = &head[k * n..(k + 1) * n];
            for &r in &rows {
                let row = &mut tail[(r - k - 1) * n..(r - k) * n];
                let l = row[k] * inv;
                row[k] = l;
                for &c in &cols {
                    row[c] -= l * pivot_row[c];
                }
                lcol.push((r, l));
            }
            lower.push(lcol);
            upper.push(cols.iter().map(|&c| (c, pivot_row[c])).collect());
            diag.push(p);
        }
        Ok(SparseLu {
            n,
            lower,
            upper,
            diag,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        self.forward(b, 0);
        self.backward(b);
    }

    fn forward(&self, y: &mut [Complex64], start: usize) {
        for k in start..self.n {
            let yk = y[k];
            if yk.re == 0.0 && yk.im == 0.0 {
                continue;
            }
            for &(r, l) in &self.lower[k] {
                y[r] -= l * yk;
            }
        }
    }

    fn backward(&self, y: &mut [Complex64]) {
        for k in (0..self.n).rev() {
            let mut acc = y[k];
            for &(c, u) in &self.upper[k] {
                acc -= u * y[c];
            }
            y[k] = acc / self.diag[k];
        }
    }

    /// Solves `A^T x = b` in place.
    pub fn solve_transpose_in_place(&self, b: &mut [Complex64]) {
        for k in 0..self.n {
            let wk = b[k] / self.diag[k];
            b[k] = wk;
            for &(c, u) in &self.upper[k] {
                b[c] -= u * wk;
            }
        }
        for k in (0..self.n).rev() {
            let mut acc = b[k];
            for &(r, l) in &self.lower[k] {
                acc -= l * b[r];
            }
            b[k] = acc;
        }
    }

    /// Column `j` of `A^{-1}`.
    pub fn inverse_column(&self, j: usize) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        y[j] = Complex64::new(1.0, 0.0);
        self.forward(&mut y, j);
        self.backward(&mut y);
        y
    }

    /// Row `i` of `A^{-1}`.
    pub fn inverse_row(&self, i: usize) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        y[i] = Complex64::new(1.0, 0.0);
        self.solve_transpose_in_place(&mut y);
        y
    }

    pub fn inverse(&self) -> DMatrix<Complex64> {
        let n = self.n;
        let mut out = DMatrix::<Complex64>::zeros(n, n);
        for j in 0..n {
            let col = self.inverse_column(j);
            out.column_mut(j).copy_from_slice(&col);
        }
        out
    }
}

/// `max_i sum_j |a_ij|`, the operator norm on `l^inf`.
pub fn inf_norm(a: &DMatrix<Complex64>) -> f64 {
    (0..a.nrows())
        .map(|i| a.row(i).iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &DMatrix<Complex64>) -> f64 {
    a.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn two_by_two_inverse() {
        let a = DMatrix::from_row_slice(2, 2, &[c(2.0, -1.0), c(1.0, 0.0), c(0.5, 0.0), c(3.0, -1.0)]);
        let inv = SparseLu::factor(&a).unwrap().inverse();
        let id = &a * &inv;
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - c(want, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(SparseLu::factor(&a), Err(LinalgError::Singular { step: 0, .. })));
    }

    #[test]
    fn transpose_solve_matches_rows() {
        let n = 5;
        let a = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                c(4.0, -1.0)
            } else {
                c(((i * 3 + j) % 4) as f64 * 0.2, (i as f64 - j as f64) * 0.1)
            }
        });
        let lu = SparseLu::factor(&a).unwrap();
        let inv = lu.inverse();
        for i in 0..n {
            let row = lu.inverse_row(i);
            for j in 0..n {
                assert!((row[j] - inv[(i, j)]).norm() < 1e-13);
            }
        }
    }
}
