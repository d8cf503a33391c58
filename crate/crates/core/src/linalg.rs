//! Small dense linear algebra: LU factorization with partial pivoting and a
//! 1-norm condition estimate.
//!
//! The systems solved here are tiny (one row per simultaneously active link,
//! bounded by half the node count), so the inverse needed for the condition
//! number is computed explicitly.

use thiserror::Error;

use crate::scalar::Float;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is singular (zero pivot at column {0})")]
    Singular(usize),
    #[error("dimension mismatch")]
    Dimension,
}

/// Row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<F: Float = f64> {
    n: usize,
    data: Vec<F>,
}

impl<F: Float> Matrix<F> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![F::zero(); n * n],
        }
    }

    pub fn from_rows(rows: &[&[F]]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n);
            for (c, &v) in row.iter().enumerate() {
                m.set(r, c, v);
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> F {
        self.data[r * self.n + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: F) {
        self.data[r * self.n + c] = v;
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> F {
        let mut best = F::zero();
        for c in 0..self.n {
            let mut s = F::zero();
            for r in 0..self.n {
                s += self.at(r, c).abs();
            }
            if s > best {
                best = s;
            }
        }
        best
    }
}

/// LU factors of a square matrix, `P*A = L*U`, stored packed.
pub struct Lu<F: Float = f64> {
    lu: Matrix<F>,
    perm: Vec<usize>,
}

/// Factors `a` with partial pivoting. A pivot of exactly zero reports
/// singularity; near-singular systems surface through [`condition_one`].
pub fn factor<F: Float>(a: &Matrix<F>) -> Result<Lu<F>, LinalgError> {
    let n = a.n();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_mag = lu.at(col, col).abs();
        for r in (col + 1)..n {
            let mag = lu.at(r, col).abs();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = r;
            }
        }
        if pivot_mag == F::zero() {
            return Err(LinalgError::Singular(col));
        }
        if pivot_row != col {
            for c in 0..n {
                let tmp = lu.at(col, c);
                lu.set(col, c, lu.at(pivot_row, c));
                lu.set(pivot_row, c, tmp);
            }
            perm.swap(col, pivot_row);
        }
        let pivot = lu.at(col, col);
        for r in (col + 1)..n {
            let factor = lu.at(r, col) / pivot;
            lu.set(r, col, factor);
            for c in (col + 1)..n {
                let v = lu.at(r, c) - factor * lu.at(col, c);
                lu.set(r, c, v);
            }
        }
    }
    Ok(Lu { lu, perm })
}

impl<F: Float> Lu<F> {
    pub fn n(&self) -> usize {
        self.lu.n()
    }

    /// Solves `A x = b` given the factorization.
    pub fn solve(&self, b: &[F]) -> Vec<F> {
        let n = self.n();
        assert_eq!(b.len(), n);
        let mut x: Vec<F> = self.perm.iter().map(|&p| b[p]).collect();
        // Forward substitution (unit lower triangle).
        for r in 1..n {
            let mut acc = x[r];
            for c in 0..r {
                acc -= self.lu.at(r, c) * x[c];
            }
            x[r] = acc;
        }
        // Back substitution.
        for r in (0..n).rev() {
            let mut acc = x[r];
            for c in (r + 1)..n {
                acc -= self.lu.at(r, c) * x[c];
            }
            x[r] = acc / self.lu.at(r, r);
        }
        x
    }

    /// 1-norm of the inverse, computed column by column.
    pub fn inverse_one_norm(&self) -> F {
        let n = self.n();
        let mut best = F::zero();
        let mut e = vec![F::zero(); n];
        for c in 0..n {
            e[c] = F::one();
            let col = self.solve(&e);
            e[c] = F::zero();
            let s: F = col.iter().map(|v| v.abs()).sum();
            if s > best {
                best = s;
            }
        }
        best
    }
}

/// Solves `A x = b` directly.
pub fn solve<F: Float>(a: &Matrix<F>, b: &[F]) -> Result<Vec<F>, LinalgError> {
    if b.len() != a.n() {
        return Err(LinalgError::Dimension);
    }
    Ok(factor(a)?.solve(b))
}

/// 1-norm condition number `||A||_1 * ||A^-1||_1`.
pub fn condition_one<F: Float>(a: &Matrix<F>, lu: &Lu<F>) -> F {
    a.one_norm() * lu.inverse_one_norm()
}
