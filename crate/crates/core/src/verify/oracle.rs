//! Reference computations that share no code path with the solver: dense
//! Kronecker elimination, Jacobi eigenvalues, and double-double chain
//! evaluation.

use nalgebra::DMatrix;
use twofloat::TwoFloat;

use crate::ecr::{SeparableSystem, Solution};
use crate::error::{Error, Result};
use crate::tridiag::TridiagonalMatrix;
use crate::zeros::PairedChain;

/// Largest `m·n` accepted by [`dense_kron_solve`].
pub const DENSE_CAP: usize = 4096;

/// Largest order accepted by [`dense_eigen`].
pub const JACOBI_CAP: usize = 256;

const JACOBI_SWEEPS: usize = 100;

/// `B ⊗ I + I ⊗ Rₙ` as a dense matrix, block row `i` holding `x_i`.
pub fn dense_kron_matrix(sys: &SeparableSystem) -> DMatrix<f64> {
    let (m, n) = (sys.m(), sys.n());
    let b = sys.b().to_dense();
    let rn = sys.rn().to_dense();
    DMatrix::from_fn(m * n, m * n, |row, col| {
        let (i, p) = (row / m, row % m);
        let (j, q) = (col / m, col % m);
        let mut v = if p == q { rn[(i, j)] } else { 0.0 };
        if i == j {
            v += b[(p, q)];
        }
        v
    })
}

pub fn dense_kron_solve(sys: &SeparableSystem) -> Result<Solution> {
    dense_kron_solve_capped(sys, DENSE_CAP)
}

/// Partially pivoted LU on the assembled Kronecker matrix.
pub fn dense_kron_solve_capped(sys: &SeparableSystem, cap: usize) -> Result<Solution> {
    let (m, n) = (sys.m(), sys.n());
    if m * n > cap {
        return Err(Error::DimensionMismatch(format!(
            "dense oracle limited to {cap} unknowns, got {}",
            m * n
        )));
    }
    let a = dense_kron_matrix(sys);
    let y = nalgebra::DVector::from_iterator(m * n, sys.rhs().iter().flatten().copied());
    let x = a.lu().solve(&y).ok_or(Error::Singular)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    Ok(Solution {
        x: x.as_slice().chunks(m).map(<[f64]>::to_vec).collect(),
    })
}

/// Ascending eigenvalues by cyclic Jacobi rotations.
pub fn dense_eigen(t: &TridiagonalMatrix) -> Result<Vec<f64>> {
    if !t.is_symmetric() {
        return Err(Error::DimensionMismatch("Jacobi oracle needs a symmetric matrix".into()));
    }
    if t.order() > JACOBI_CAP {
        return Err(Error::DimensionMismatch(format!(
            "Jacobi oracle limited to order {JACOBI_CAP}"
        )));
    }
    let mut a = t.to_dense();
    let tol = 1e-13 * a.norm();
    for _ in 0..JACOBI_SWEEPS {
        if off_norm(&a) <= tol {
            sweep(&mut a);
            let mut d: Vec<f64> = a.diagonal().iter().copied().collect();
            d.sort_by(f64::total_cmp);
            return Ok(d);
        }
        sweep(&mut a);
    }
    Err(Error::NoConvergence(JACOBI_SWEEPS))
}

fn off_norm(a: &DMatrix<f64>) -> f64 {
    let q = a.nrows();
    let mut s = 0.0;
    for i in 0..q {
        for j in 0..q {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

fn sweep(a: &mut DMatrix<f64>) {
    let q = a.nrows();
    for p in 0..q {
        for r in p + 1..q {
            let apr = a[(p, r)];
            if apr == 0.0 {
                continue;
            }
            let theta = (a[(r, r)] - a[(p, p)]) / (2.0 * apr);
            let t = if theta.abs() > 1e150 {
                0.5 / theta
            } else {
                theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
            };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..q {
                let (x, y) = (a[(k, p)], a[(k, r)]);
                a[(k, p)] = c * x - s * y;
                a[(k, r)] = s * x + c * y;
            }
            for k in 0..q {
                let (x, y) = (a[(p, k)], a[(r, k)]);
                a[(p, k)] = c * x - s * y;
                a[(r, k)] = s * x + c * y;
            }
        }
    }
}

/// `∏ (B - s I)` expanded densely.
pub fn dense_polynomial(b: &TridiagonalMatrix, shifts: &[f64]) -> DMatrix<f64> {
    let bd = b.to_dense();
    let q = b.order();
    let mut p = DMatrix::identity(q, q);
    for &s in shifts {
        p = &p * (&bd - DMatrix::identity(q, q) * s);
    }
    p
}

fn dd(v: f64) -> TwoFloat {
    TwoFloat::from_f64(v)
}

fn to_f64(v: TwoFloat) -> f64 {
    v.hi() + v.lo()
}

/// `(B - σ I) v` in double-double.
fn dd_shifted_matvec(b: &TridiagonalMatrix, sigma: f64, v: &[TwoFloat]) -> Vec<TwoFloat> {
    let q = b.order();
    (0..q)
        .map(|j| {
            let mut s = (dd(b.diag()[j]) - dd(sigma)) * v[j];
            if j > 0 {
                s += dd(b.sub()[j - 1]) * v[j - 1];
            }
            if j + 1 < q {
                s += dd(b.sup()[j]) * v[j + 1];
            }
            s
        })
        .collect()
}

/// Thomas elimination for `(B - σ I) x = v` in double-double.
fn dd_solve_shifted(b: &TridiagonalMatrix, sigma: f64, v: &[TwoFloat]) -> Result<Vec<TwoFloat>> {
    let q = b.order();
    let mut piv = Vec::with_capacity(q);
    let mut y = Vec::with_capacity(q);
    for j in 0..q {
        let mut d = dd(b.diag()[j]) - dd(sigma);
        let mut r = v[j];
        if j > 0 {
            let l = dd(b.sub()[j - 1]) / piv[j - 1];
            d -= l * dd(b.sup()[j - 1]);
            r -= l * y[j - 1];
        }
        if to_f64(d) == 0.0 {
            return Err(Error::ZeroPivot {
                index: j + 1,
                pivot: 0.0,
            });
        }
        piv.push(d);
        y.push(r);
    }
    let mut x = vec![dd(0.0); q];
    for j in (0..q).rev() {
        let mut r = y[j];
        if j + 1 < q {
            r -= dd(b.sup()[j]) * x[j + 1];
        }
        x[j] = r / piv[j];
    }
    Ok(x)
}

fn dd_paired(b: &TridiagonalMatrix, pairs: &[(f64, f64)], z: Vec<TwoFloat>) -> Result<Vec<TwoFloat>> {
    pairs.iter().try_fold(z, |z, &(theta, phi)| {
        dd_solve_shifted(b, theta, &dd_shifted_matvec(b, phi, &z))
    })
}

/// Reference for the paired steps `(B - θ_j I) z_{j+1} = (B - φ_j I) z_j`.
pub fn dd_paired_steps(b: &TridiagonalMatrix, pairs: &[(f64, f64)], rhs: &[f64]) -> Result<Vec<f64>> {
    let z = dd_paired(b, pairs, rhs.iter().map(|&v| dd(v)).collect())?;
    Ok(z.into_iter().map(to_f64).collect())
}

/// Reference for a full rational chain.
pub fn dd_rational_chain(b: &TridiagonalMatrix, chain: &PairedChain, rhs: &[f64]) -> Result<Vec<f64>> {
    let z = dd_paired(b, &chain.pairs, rhs.iter().map(|&v| dd(v)).collect())?;
    let z = dd_solve_shifted(b, chain.final_shift, &z)?;
    Ok(z.into_iter().map(to_f64).collect())
}

/// Reference for the interleaved scaled inverse chain.
pub fn dd_scaled_inverse_chain(
    b: &TridiagonalMatrix,
    xi: &[f64],
    factors: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    if xi.len() != factors.len() {
        return Err(Error::LengthMismatch {
            expected: xi.len(),
            found: factors.len(),
        });
    }
    let mut x: Vec<TwoFloat> = rhs.iter().map(|&v| dd(v)).collect();
    for (&f, &shift) in factors.iter().zip(xi.iter().rev()) {
        x.iter_mut().for_each(|v| *v *= dd(f));
        x = dd_solve_shifted(b, shift, &x)?;
    }
    Ok(x.into_iter().map(to_f64).collect())
}
