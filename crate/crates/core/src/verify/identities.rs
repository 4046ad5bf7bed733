//! Numeric checks of the determinant identities behind the zero tables.
//!
//! Windows are written as inclusive 1-based ranges of `Rₙ`; `det[lo..hi]` at
//! `x` means `det(xI + Rₙ[lo..=hi])`, and an empty range has determinant 1.

use std::collections::HashMap;

use rand::{RngExt, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::error::{Error, Result};
use crate::tridiag::{detgtri, eigenvalues_bisect, EigenRequest, SubmatrixWindow, TridiagonalMatrix};
use crate::zeros::{window_for, CouplingCoefficients};

const TINY: f64 = 1e-300;

fn rel(lhs: f64, rhs: f64, scale: f64) -> f64 {
    (lhs - rhs).abs() / scale.max(lhs.abs()).max(rhs.abs()).max(TINY)
}

fn det_window(rn: &TridiagonalMatrix, lo: usize, hi: usize, x: f64) -> Result<f64> {
    if lo > hi {
        return Ok(1.0);
    }
    let w = SubmatrixWindow::new(lo, hi, rn.order())?;
    detgtri(&rn.window(w).shifted(x))
}

/// Grid points `(r, i)` whose window lies inside `Rₙ`: all multiples of `2^r`
/// from `2^r` to `n + 1 - 2^r`.
fn grid(k: u32) -> impl Iterator<Item = (u32, usize)> {
    let n = (1usize << k) - 1;
    (0..k).flat_map(move |r| {
        let step = 1usize << r;
        (step..=n + 1 - step).step_by(step).map(move |i| (r, i))
    })
}

/// Worst relative gap between the scalar preprocessing recurrence and
/// `(-1)^r det(xI + Rₙ[window])` over all grid points and samples.
pub fn check_main_identity(rn: &TridiagonalMatrix, k: u32, xs: &[f64]) -> Result<f64> {
    if rn.order() != (1usize << k) - 1 {
        return Err(Error::BadBlockCount(rn.order()));
    }
    let coup = CouplingCoefficients::new(rn, k);
    let mut worst = 0.0f64;
    for &x in xs {
        let mut beta: HashMap<(u32, usize), f64> = HashMap::new();
        for (r, i) in grid(k) {
            let v = if r == 0 {
                x + rn.b(i)
            } else {
                let h = 1usize << (r - 1);
                let at = |lvl: u32, j: usize| beta[&(lvl, j)];
                let (lo2, hi2, left3, right3, d) = if r == 1 {
                    (1.0, 1.0, 1.0, 1.0, 1.0)
                } else {
                    let q = h / 2;
                    let (l, rr) = (at(r - 2, i - q), at(r - 2, i + q));
                    (l, rr, at(r - 2, i - 3 * q), at(r - 2, i + 3 * q), l * rr)
                };
                let (bl, bc, br) = (at(r - 1, i - h), at(r - 1, i), at(r - 1, i + h));
                let t1 = coup.alpha(r - 1, i) * coup.gamma(r - 1, i - h) * hi2 * left3 * br;
                let t2 = bl * bc * br;
                let t3 = coup.alpha(r - 1, i + h) * coup.gamma(r - 1, i) * lo2 * right3 * bl;
                (t1 - t2 + t3) / d
            };
            beta.insert((r, i), v);
            let w = window_for(r, i, rn.order())?;
            let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
            let det = sign * detgtri(&rn.window(w).shifted(x))?;
            worst = worst.max(rel(v, det, 0.0));
        }
    }
    Ok(worst)
}

/// `det(F_{q-1}) det(L_q) - det(F_q) det(L_{q-1})` against `∏ a_{i+1} c_i`,
/// where `F_j = Rₙ[1..j]` and `L_j = Rₙ[2..j]`. The gap is measured relative
/// to the larger of the two products on the left, since the difference
/// cancels.
pub fn check_det_lemma(rn: &TridiagonalMatrix) -> Result<f64> {
    let q = rn.order();
    if q < 2 {
        return Err(Error::DimensionMismatch("determinant lemma needs order ≥ 2".into()));
    }
    let p1 = det_window(rn, 1, q - 1, 0.0)? * det_window(rn, 2, q, 0.0)?;
    let p2 = det_window(rn, 1, q, 0.0)? * det_window(rn, 2, q - 1, 0.0)?;
    let rhs: f64 = (1..q).map(|i| rn.a(i + 1) * rn.c(i)).product();
    Ok(rel(p1 - p2, rhs, p1.abs().max(p2.abs())))
}

/// Both cancellation identities used in the induction step, at every level
/// `t ≥ 2` and sample `x`. Returns `(left, right)` worst gaps.
pub fn check_appendix_identities(rn: &TridiagonalMatrix, k: u32, xs: &[f64]) -> Result<(f64, f64)> {
    let n = rn.order();
    if n != (1usize << k) - 1 {
        return Err(Error::BadBlockCount(n));
    }
    let mut left = 0.0f64;
    let mut right = 0.0f64;
    for &x in xs {
        let det = |lo: usize, hi: usize| det_window(rn, lo, hi, x);
        for t in 2..k {
            let s = 1usize << t;
            let h = s / 2;
            for i in (s..=n + 1 - s).step_by(s) {
                let p1 = det(i + 1 - s, i - 1)? * det(i + 1 - h, i - 2)?;
                let p2 = det(i + 1 - h, i - 1)? * det(i + 1 - s, i - 2)?;
                let coupling: f64 = (i - h..=i - 2).map(|j| rn.a(j + 1) * rn.c(j)).product();
                let rhs = -det(i + 1 - s, i - h - 1)? * coupling;
                left = left.max(rel(p1 - p2, rhs, p1.abs().max(p2.abs())));

                let p1 = det(i + 1, i + s - 1)? * det(i + 2, i + h - 1)?;
                let p2 = det(i + 1, i + h - 1)? * det(i + 2, i + s - 1)?;
                let coupling: f64 = (i + 1..i + h).map(|j| rn.a(j + 1) * rn.c(j)).product();
                let rhs = -det(i + h + 1, i + s - 1)? * coupling;
                right = right.max(rel(p1 - p2, rhs, p1.abs().max(p2.abs())));
            }
        }
    }
    Ok((left, right))
}

/// `count` points in `[lo, hi]` kept at least `gap` away from every negated
/// eigenvalue of the level windows of a symmetric `Rₙ`.
pub fn sample_points(
    rn: &TridiagonalMatrix,
    k: u32,
    (lo, hi): (f64, f64),
    count: usize,
    seed: u64,
    gap: f64,
) -> Result<Vec<f64>> {
    let mut poles = Vec::new();
    for (r, i) in grid(k) {
        let w = window_for(r, i, rn.order())?;
        poles.extend(
            eigenvalues_bisect(&rn.window(w), &EigenRequest::default())
                .into_iter()
                .map(|e| -e),
        );
    }
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(count);
    let mut tries = 0;
    while xs.len() < count {
        tries += 1;
        if tries > 1000 * count.max(1) {
            return Err(Error::NoConvergence(tries));
        }
        let x = rng.random_range(lo..=hi);
        if poles.iter().all(|p| (x - p).abs() > gap) {
            xs.push(x);
        }
    }
    Ok(xs)
}

/// Ratio hypothesis of the determinant lower bound on the window `[t..=r]`:
/// `b_{j+1}/|a_{j+1}| - |a_{j+1}|/|a_j| > 1` for `j = t..r-1`, with `a_t := b_t`.
pub fn det_bound_hypothesis(rn: &TridiagonalMatrix, window: SubmatrixWindow) -> Result<()> {
    let t = window.lo;
    let a = |j: usize| if j == t { rn.b(t) } else { rn.a(j) };
    for j in t..window.hi {
        let ratio = rn.b(j + 1) / a(j + 1).abs() - a(j + 1).abs() / a(j).abs();
        if !(ratio > 1.0) {
            return Err(Error::HypothesisFailed(j));
        }
    }
    Ok(())
}

/// Whether `det(Rₙ[t..=r]) > b_t ∏_{i=t+1}^{r} |a_i|`, evaluated directly.
pub fn check_det_bound(rn: &TridiagonalMatrix, window: SubmatrixWindow) -> Result<bool> {
    if window.len() < 3 {
        return Err(Error::DimensionMismatch("window order must be at least 3".into()));
    }
    Ok(window_det(rn, window)? > det_floor(rn, window))
}

/// The relaxed bound `det > b_t ∏ |a_i| / 1.1`, evaluated directly.
pub fn check_relaxed_det_bound(rn: &TridiagonalMatrix, window: SubmatrixWindow) -> Result<bool> {
    Ok(window_det(rn, window)? > det_floor(rn, window) / 1.1)
}

fn window_det(rn: &TridiagonalMatrix, w: SubmatrixWindow) -> Result<f64> {
    detgtri(&rn.window(w))
}

fn det_floor(rn: &TridiagonalMatrix, w: SubmatrixWindow) -> f64 {
    rn.b(w.lo) * (w.lo + 1..=w.hi).map(|i| rn.a(i).abs()).product::<f64>()
}
