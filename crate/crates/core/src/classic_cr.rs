//! Classic block cyclic reduction for the five-point Poisson system
//! `u_{j-1} + A u_j + u_{j+1} = g_j` with `A = tridiag(1, -4, 1)`.
//!
//! The level matrices obey `A^(r+1) = 2I - (A^(r))²` and factor as
//! `A^(r) = ±∏ (A - λ_i^(r) I)` over the Chebyshev-type zeros
//! `λ_i^(r) = -2cos((2i-1)π / 2^(r+1))`, so neither `A^(r)` nor its inverse is
//! ever formed.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tridiag::{solve_shifted, TridiagonalMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct PoissonBlockSystem {
    m: usize,
    k: u32,
    g: Vec<Vec<f64>>,
}

impl PoissonBlockSystem {
    /// `g` must hold `2^(k+1) - 1` blocks of length `m`.
    pub fn new(m: usize, k: u32, g: Vec<Vec<f64>>) -> Result<Self> {
        let n = (1usize << (k + 1)) - 1;
        if m == 0 {
            return Err(Error::DimensionMismatch("block order must be positive".into()));
        }
        if g.len() != n {
            return Err(Error::BadBlockCount(g.len()));
        }
        if g.iter().any(|v| v.len() != m) {
            return Err(Error::DimensionMismatch(format!("every block needs length {m}")));
        }
        Ok(Self { m, k, g })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn g(&self) -> &[Vec<f64>] {
        &self.g
    }

    /// The diagonal block `tridiag(1, -4, 1)`.
    pub fn block(&self) -> TridiagonalMatrix {
        poisson_block(self.m)
    }
}

pub fn poisson_block(m: usize) -> TridiagonalMatrix {
    TridiagonalMatrix::constant(m, 1.0, -4.0, 1.0).expect("positive order")
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChebyshevZeroSet {
    pub r: u32,
    pub zeros: Vec<f64>,
}

pub fn cheb_zeros(r: u32) -> ChebyshevZeroSet {
    let count = 1usize << r;
    let den = (1u64 << (r + 1)) as f64;
    ChebyshevZeroSet {
        r,
        zeros: (1..=count)
            .map(|i| -2.0 * ((2 * i - 1) as f64 * PI / den).cos())
            .collect(),
    }
}

fn level_sign(r: u32) -> f64 {
    if r == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `A^(r) v` as `2^r` shifted tridiagonal products.
pub fn apply_ar(m: usize, r: u32, v: &[f64]) -> Vec<f64> {
    let a = poisson_block(m);
    let s = level_sign(r);
    let mut z = v.to_vec();
    for lam in cheb_zeros(r).zeros {
        z = a.shifted_matvec(lam, &z);
    }
    z.iter_mut().for_each(|x| *x *= s);
    z
}

/// `(A^(r))⁻¹ b` as `2^r` shifted tridiagonal solves.
pub fn apply_ar_inverse(m: usize, r: u32, b: &[f64]) -> Result<Vec<f64>> {
    let a = poisson_block(m);
    let mut z = b.to_vec();
    for lam in cheb_zeros(r).zeros {
        z = solve_shifted(&a, lam, &z)?;
    }
    let s = level_sign(r);
    z.iter_mut().for_each(|x| *x *= s);
    Ok(z)
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn cr_solve(sys: &PoissonBlockSystem) -> Result<Vec<Vec<f64>>> {
    let m = sys.m();
    let k = sys.k();
    // levels[r][j - 1] = g_j^(r), j = 1 ..= 2^(k+1-r) - 1
    let mut levels = vec![sys.g().to_vec()];
    for r in 0..k {
        let prev = &levels[r as usize];
        let next: Vec<Vec<f64>> = (1..=prev.len() / 2)
            .into_par_iter()
            .map(|j| {
                let ag = apply_ar(m, r, &prev[2 * j - 1]);
                let s = add(&prev[2 * j - 2], &prev[2 * j]);
                s.iter().zip(&ag).map(|(x, y)| x - y).collect()
            })
            .collect();
        levels.push(next);
    }

    let n = sys.n();
    let zero = vec![0.0; m];
    let mut u: Vec<Option<Vec<f64>>> = vec![None; n + 2];
    for r in (0..=k).rev() {
        let step = 1usize << r;
        let g = &levels[r as usize];
        let solved: Vec<(usize, Vec<f64>)> = (1..=g.len())
            .step_by(2)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|j| {
                let i = j * step;
                let left = u[i - step].as_deref().unwrap_or(&zero);
                let right = u[i + step].as_deref().unwrap_or(&zero);
                let rhs: Vec<f64> = g[j - 1]
                    .iter()
                    .zip(left.iter().zip(right))
                    .map(|(g, (l, r))| g - l - r)
                    .collect();
                Ok((i, apply_ar_inverse(m, r, &rhs)?))
            })
            .collect::<Result<_>>()?;
        for (i, v) in solved {
            u[i] = Some(v);
        }
    }
    Ok(u[1..=n]
        .iter_mut()
        .map(|v| v.take().expect("every block solved"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn dense_block(m: usize) -> DMatrix<f64> {
        poisson_block(m).to_dense()
    }

    fn dense_level(m: usize, r: u32) -> DMatrix<f64> {
        let mut a = dense_block(m);
        for _ in 0..r {
            a = DMatrix::identity(m, m) * 2.0 - &a * &a;
        }
        a
    }

    fn dense_solve(sys: &PoissonBlockSystem) -> Vec<f64> {
        let (m, n) = (sys.m(), sys.n());
        let a = dense_block(m);
        let big = DMatrix::from_fn(m * n, m * n, |row, col| {
            let (i, p) = (row / m, row % m);
            let (j, q) = (col / m, col % m);
            if i == j {
                a[(p, q)]
            } else if i.abs_diff(j) == 1 && p == q {
                1.0
            } else {
                0.0
            }
        });
        let y = DVector::from_iterator(m * n, sys.g().iter().flatten().copied());
        big.lu().solve(&y).unwrap().as_slice().to_vec()
    }

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        (num / den).sqrt()
    }

    #[test]
    fn zero_sets() {
        assert!(cheb_zeros(0).zeros[0].abs() < 1e-15);
        let z = cheb_zeros(1).zeros;
        let s = 2f64.sqrt();
        assert!((z[0] + s).abs() < 1e-15 && (z[1] - s).abs() < 1e-15);
        let z = cheb_zeros(2).zeros;
        for i in 0..4 {
            assert!((z[i] + z[3 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn level_inverse_matches_dense() {
        let b = [1.0, -2.0];
        let want = dense_level(2, 1).lu().solve(&DVector::from_column_slice(&b)).unwrap();
        let got = apply_ar_inverse(2, 1, &b).unwrap();
        assert!(rel(&got, want.as_slice()) < 1e-14);

        let b: Vec<f64> = (0..8).map(|i| (i as f64).sin() + 0.5).collect();
        let want = dense_level(8, 2).lu().solve(&DVector::from_column_slice(&b)).unwrap();
        assert!(rel(&apply_ar_inverse(8, 2, &b).unwrap(), want.as_slice()) < 1e-10);
        assert_eq!(apply_ar_inverse(3, 0, &[-4.0, 1.0, 0.0]).unwrap().len(), 3);
    }

    #[test]
    fn solves_match_dense() {
        for (k, m) in [(0, 3), (1, 2), (2, 5), (3, 16)] {
            let n = (1usize << (k + 1)) - 1;
            let g: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..m).map(|p| ((i * 7 + p * 3) as f64).cos()).collect())
                .collect();
            let sys = PoissonBlockSystem::new(m, k, g).unwrap();
            let u: Vec<f64> = cr_solve(&sys).unwrap().concat();
            assert!(rel(&u, &dense_solve(&sys)) < 1e-9, "k={k} m={m}");
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            PoissonBlockSystem::new(2, 1, vec![vec![0.0; 2]; 4]),
            Err(Error::BadBlockCount(4))
        ));
        assert!(PoissonBlockSystem::new(2, 0, vec![vec![0.0; 3]]).is_err());
    }
}
