//! Forward-error constants for shifted solves and solve chains.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tridiag::UNIT_ROUNDOFF;

/// Working-precision model: unit roundoff `u`, zero tolerance `ε = 7.5u`,
/// input perturbation `δ`, and the exponent `e` in `λ_min ≥ u^(1-e)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorModel {
    pub u: f64,
    pub eps: f64,
    pub delta: f64,
    pub condition_exponent: f64,
}

impl ErrorModel {
    pub fn new(u: f64) -> Self {
        Self {
            u,
            eps: 7.5 * u,
            delta: 0.0,
            condition_exponent: 0.5,
        }
    }

    pub fn double() -> Self {
        Self::new(UNIT_ROUNDOFF)
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    /// `(4u + 3u² + u³) / (1 - u)`.
    pub fn g(&self) -> f64 {
        let u = self.u;
        (4.0 * u + 3.0 * u * u + u * u * u) / (1.0 - u)
    }

    /// Smallest admissible eigenvalue, `u^(1-e)`.
    pub fn lambda_floor(&self) -> f64 {
        self.u.powf(1.0 - self.condition_exponent)
    }
}

/// `g κ₂ / (1 - g κ₂)`.
pub fn bound_xi(cond: f64, em: &ErrorModel) -> Result<f64> {
    let g = em.g();
    let den = 1.0 - g * cond;
    if den <= 0.0 {
        return Err(Error::BoundOverflow(den));
    }
    Ok(g * cond / den)
}

/// Solve error for `B - αI` with `α < 0` shifted by a zero carrying error ε.
pub fn bound_q(lambda_max: f64, lambda_min: f64, alpha: f64, em: &ErrorModel) -> Result<f64> {
    let s = alpha.abs();
    let eps = em.eps;
    let g = em.g();
    let lo = lambda_min + s - eps;
    if lo <= 0.0 {
        return Err(Error::BoundOverflow(lo));
    }
    let hi = lambda_max + s + eps;
    let den = lo - g * hi;
    if den <= 0.0 {
        return Err(Error::BoundOverflow(den));
    }
    Ok(g * hi * (lambda_min + s) / lo / den + eps / lo)
}

/// `(|μ - λ| + 2ε) [δ + (‖b‖ + δ) u] + 2ε ‖b‖`, the right-hand-side error of
/// one paired step.
pub fn bound_rhs(mu: f64, lambda: f64, b_norm: f64, em: &ErrorModel) -> f64 {
    let d = em.delta;
    ((mu - lambda).abs() + 2.0 * em.eps) * (d + (b_norm + d) * em.u) + 2.0 * em.eps * b_norm
}

/// Error of one paired step `(B - μI) x = (B - λI) b`:
/// `(|μ - λ| + |μ|)/|μ| · δ + 77u ‖b‖ / |μ|`.
pub fn single_pair_bound(mu: f64, lambda: f64, b_norm: f64, em: &ErrorModel) -> f64 {
    let m = mu.abs();
    ((mu - lambda).abs() + m) / m * em.delta + 77.0 * em.u * b_norm / m
}

/// `Σ_{ℓ≥2} 1/|μ_ℓ|` over descending zeros.
pub fn chain_c1(mu: &[f64]) -> f64 {
    mu.iter().skip(1).map(|m| 1.0 / m.abs()).sum()
}

/// Paired-step chain error `|μ_L|/|μ_1| · (δ + 77u C₁ ‖b‖)`.
pub fn paired_chain_bound(mu: &[f64], b_norm: f64, em: &ErrorModel) -> f64 {
    let (Some(first), Some(last)) = (mu.first(), mu.last()) else {
        return em.delta;
    };
    last.abs() / first.abs() * (em.delta + 77.0 * em.u * chain_c1(mu) * b_norm)
}

/// `(C₂, C₃) = (∏ |f_j|/|ξ_j|, Σ 1/|ξ_j|)`.
pub fn chain_c2_c3(xi: &[f64], factors: &[f64]) -> Result<(f64, f64)> {
    if xi.len() != factors.len() {
        return Err(Error::LengthMismatch {
            expected: xi.len(),
            found: factors.len(),
        });
    }
    let c2 = xi.iter().zip(factors).map(|(x, f)| f.abs() / x.abs()).product();
    let c3 = xi.iter().map(|x| 1.0 / x.abs()).sum();
    Ok((c2, c3))
}

/// Scaled inverse chain error `C₂ (δ + 41u C₃ ‖b‖)`.
pub fn scaled_inverse_bound(xi: &[f64], factors: &[f64], b_norm: f64, em: &ErrorModel) -> Result<f64> {
    let (c2, c3) = chain_c2_c3(xi, factors)?;
    Ok(c2 * (em.delta + 41.0 * em.u * c3 * b_norm))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xi_examples() {
        let exact = ErrorModel::new(0.0);
        assert_eq!(bound_xi(10.0, &exact).unwrap(), 0.0);
        let em = ErrorModel::double();
        let x = bound_xi(1.0, &em).unwrap();
        assert!((x / (4.0 * em.u) - 1.0).abs() < 1e-12);
        let mid = 1.0 / (2.0 * em.g());
        assert!((bound_xi(mid, &em).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(bound_xi(2.0 / em.g(), &em), Err(Error::BoundOverflow(_))));
    }

    #[test]
    fn q_examples() {
        assert_eq!(bound_q(1.0, 1.0, -1.0, &ErrorModel::new(0.0)).unwrap(), 0.0);
        let em = ErrorModel::double();
        let q = bound_q(1.0, 1.0, -1.0, &em).unwrap();
        let g = em.g();
        let lo = 2.0 - em.eps;
        let want = g * (2.0 + em.eps) * 2.0 / lo / (lo - g * (2.0 + em.eps)) + em.eps / lo;
        assert!((q - want).abs() <= 1e-15 * want);
        assert!(q < 5.0 * bound_xi(1.0, &em).unwrap());
        assert!(bound_q(1.0, 0.0, -1e-20, &em).is_err());
    }

    #[test]
    fn chain_constants() {
        let em = ErrorModel::double().with_delta(1e-10);
        assert_eq!(chain_c1(&[-1.0]), 0.0);
        assert_eq!(paired_chain_bound(&[-1.0], 1.0, &em), 1e-10);
        assert_eq!(chain_c2_c3(&[-1.0, -1.0], &[1.0, 1.0]).unwrap(), (1.0, 2.0));
        assert!(chain_c2_c3(&[-1.0], &[]).is_err());
        assert_eq!(chain_c1(&[-0.5, -1.0, -2.0]), 1.5);
        let b = single_pair_bound(-1.0, -0.5, 1.0, &ErrorModel::double());
        assert_eq!(b, 77.0 * UNIT_ROUNDOFF);
    }
}
