//! Named test matrices.

use crate::error::{Error, Result};
use crate::tridiag::{mob_scale, TridiagonalMatrix, UNIT_ROUNDOFF};

/// Legendre-Galerkin mass-type matrix, first kind.
pub fn build_m1(n: usize) -> Result<TridiagonalMatrix> {
    legendre(n, |i| {
        let b = 2.0 / ((4.0 * i - 3.0) * (4.0 * i + 1.0));
        let a = -1.0 / (((4.0 * i + 3.0) * (4.0 * i - 1.0)).sqrt() * (4.0 * i + 1.0));
        (b, a)
    })
}

/// Legendre-Galerkin mass-type matrix, second kind.
pub fn build_m2(n: usize) -> Result<TridiagonalMatrix> {
    legendre(n, |i| {
        let b = 2.0 / ((4.0 * i - 1.0) * (4.0 * i + 3.0));
        let a = -1.0 / (((4.0 * i + 5.0) * (4.0 * i + 1.0)).sqrt() * (4.0 * i + 3.0));
        (b, a)
    })
}

// entry(i) returns (b_i, a_{i+1})
fn legendre(n: usize, entry: impl Fn(f64) -> (f64, f64)) -> Result<TridiagonalMatrix> {
    if n == 0 {
        return Err(Error::DimensionMismatch("matrix order must be positive".into()));
    }
    let (diag, off): (Vec<f64>, Vec<f64>) = (1..=n).map(|i| entry(i as f64)).unzip();
    TridiagonalMatrix::symmetric(diag, off[..n - 1].to_vec())
}

/// `tridiag(-1, 2, -1) / 4`, the second-difference matrix with spectrum in (0, 1).
pub fn build_poisson(n: usize) -> Result<TridiagonalMatrix> {
    TridiagonalMatrix::constant(n, -0.25, 0.5, -0.25)
}

/// Rescale so that `max |b_i ± (|a_i| + |a_{i+1}|)|` sits just below 1.
pub fn scale_into_conditions(t: &TridiagonalMatrix) -> TridiagonalMatrix {
    let s = mob_scale(t);
    if s == 0.0 {
        return t.clone();
    }
    t.scaled(1.0 / (s * (1.0 + 16.0 * UNIT_ROUNDOFF)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixKind {
    M1,
    M2,
    Poisson,
}

impl MatrixKind {
    pub fn build(self, n: usize) -> Result<TridiagonalMatrix> {
        match self {
            MatrixKind::M1 => build_m1(n),
            MatrixKind::M2 => build_m2(n),
            MatrixKind::Poisson => build_poisson(n),
        }
    }
}
