//! Tridiagonal factorisation and solves for the implicit sweeps.
//!
//! The Thomas algorithm is the normal path. When it meets a pivot that is
//! too small relative to the matrix norm, the system is refactored densely
//! with partial pivoting instead.

use crate::error::{Error, Result};

/// Relative pivot threshold against the max-abs entry norm.
const PIVOT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalMatrix {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl TridiagonalMatrix {
    pub fn new(sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        for len in [sub.len(), sup.len()] {
            if len != n - 1 {
                return Err(Error::DimensionMismatch {
                    expected: n - 1,
                    got: len,
                });
            }
        }
        Ok(TridiagonalMatrix { sub, diag, sup })
    }

    pub fn identity(n: usize) -> Self {
        TridiagonalMatrix {
            sub: vec![0.0; n.saturating_sub(1)],
            diag: vec![1.0; n],
            sup: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn norm_max(&self) -> f64 {
        self.sub
            .iter()
            .chain(&self.diag)
            .chain(&self.sup)
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.sup[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.len();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = self.diag[i];
            if i + 1 < n {
                a[i * n + i + 1] = self.sup[i];
                a[(i + 1) * n + i] = self.sub[i];
            }
        }
        a
    }
}

/// Factors of a [`TridiagonalMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub enum TridiagonalLU {
    /// `L` unit lower bidiagonal with multipliers `lower`, `U` upper
    /// bidiagonal with diagonal `pivots` and the original superdiagonal.
    Thomas {
        lower: Vec<f64>,
        pivots: Vec<f64>,
        sup: Vec<f64>,
    },
    /// Dense `PA = LU` fallback, row-major, with row permutation.
    Dense { n: usize, lu: Vec<f64>, perm: Vec<usize> },
}

impl TridiagonalLU {
    pub fn len(&self) -> usize {
        match self {
            TridiagonalLU::Thomas { pivots, .. } => pivots.len(),
            TridiagonalLU::Dense { n, .. } => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_fallback(&self) -> bool {
        matches!(self, TridiagonalLU::Dense { .. })
    }

    /// Solves in place.
    pub fn solve_in_place(&self, rhs: &mut [f64]) -> Result<()> {
        if rhs.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: rhs.len(),
            });
        }
        match self {
            TridiagonalLU::Thomas { lower, pivots, sup } => {
                let n = pivots.len();
                for i in 1..n {
                    rhs[i] -= lower[i - 1] * rhs[i - 1];
                }
                rhs[n - 1] /= pivots[n - 1];
                for i in (0..n - 1).rev() {
                    rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / pivots[i];
                }
            }
            TridiagonalLU::Dense { n, lu, perm } => {
                let n = *n;
                let mut x: Vec<f64> = perm.iter().map(|&p| rhs[p]).collect();
                for i in 0..n {
                    let row = &lu[i * n..i * n + i];
                    let s: f64 = row.iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
                    x[i] -= s;
                }
                for i in (0..n).rev() {
                    let row = &lu[i * n + i + 1..(i + 1) * n];
                    let s: f64 = row.iter().zip(&x[i + 1..]).map(|(a, b)| a * b).sum();
                    x[i] = (x[i] - s) / lu[i * n + i];
                }
                rhs.copy_from_slice(&x);
            }
        }
        Ok(())
    }
}

/// LU factorisation; Thomas first, dense partial pivoting on pivot failure.
pub fn factor(m: &TridiagonalMatrix) -> Result<TridiagonalLU> {
    let threshold = PIVOT_TOL * m.norm_max();
    match thomas(m, threshold) {
        Ok(lu) => Ok(lu),
        Err(Error::Singular { row }) => {
            log::warn!("tridiagonal pivot failure at row {row}; using dense partial pivoting");
            dense(m, threshold)
        }
        Err(e) => Err(e),
    }
}

/// False for NaN as well as for small pivots.
fn usable(pivot: f64, threshold: f64) -> bool {
    pivot.abs() > threshold
}

fn thomas(m: &TridiagonalMatrix, threshold: f64) -> Result<TridiagonalLU> {
    let n = m.len();
    let mut lower = Vec::with_capacity(n.saturating_sub(1));
    let mut pivots = Vec::with_capacity(n);
    let mut pivot = m.diag[0];
    if !usable(pivot, threshold) {
        return Err(Error::Singular { row: 0 });
    }
    pivots.push(pivot);
    for i in 1..n {
        let l = m.sub[i - 1] / pivot;
        pivot = m.diag[i] - l * m.sup[i - 1];
        if !usable(pivot, threshold) {
            return Err(Error::Singular { row: i });
        }
        lower.push(l);
        pivots.push(pivot);
    }
    Ok(TridiagonalLU::Thomas {
        lower,
        pivots,
        sup: m.sup.clone(),
    })
}

fn dense(m: &TridiagonalMatrix, threshold: f64) -> Result<TridiagonalLU> {
    let n = m.len();
    let mut a = m.to_dense();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&r, &s| a[r * n + k].abs().total_cmp(&a[s * n + k].abs()))
            .unwrap_or(k);
        if !usable(a[p * n + k], threshold) {
            return Err(Error::Singular { row: k });
        }
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
            perm.swap(k, p);
        }
        let pivot = a[k * n + k];
        for r in k + 1..n {
            let l = a[r * n + k] / pivot;
            if l == 0.0 {
                continue;
            }
            a[r * n + k] = l;
            for c in k + 1..n {
                a[r * n + c] -= l * a[k * n + c];
            }
        }
    }
    Ok(TridiagonalLU::Dense { n, lu: a, perm })
}

/// Convenience wrapper returning a new vector.
pub fn solve(lu: &TridiagonalLU, rhs: &[f64]) -> Result<Vec<f64>> {
    let mut x = rhs.to_vec();
    lu.solve_in_place(&mut x)?;
    Ok(x)
}
