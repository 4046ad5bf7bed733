//! Tridiagonal storage and the scalar kernels everything else is built on:
//! shifted solves by elimination without pivoting, pivot-product
//! determinants, Sturm counts and eigenvalues by bisection.
//!
//! Indexing follows the usual three-sequence layout. For a matrix of order
//! `q` the diagonal holds `b_1..b_q`, `sub[j]` is the entry in row `j + 2`
//! left of the diagonal (`a_{j+2}`) and `sup[j]` is the entry in row `j + 1`
//! right of the diagonal (`c_{j+1}`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit roundoff of IEEE double precision, `2^-53`.
pub const UNIT_ROUNDOFF: f64 = f64::EPSILON / 2.0;

/// Relative breakdown threshold for pivots in [`solve_shifted`], in units of
/// `‖T - σI‖∞`.
pub const DEFAULT_BREAKDOWN: f64 = UNIT_ROUNDOFF * UNIT_ROUNDOFF;

const MAX_BISECTION_STEPS: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TridiagonalFile", into = "TridiagonalFile")]
pub struct TridiagonalMatrix {
    diag: Vec<f64>,
    sub: Vec<f64>,
    sup: Vec<f64>,
}

/// On-disk layout of a tridiagonal matrix.
#[derive(Serialize, Deserialize)]
struct TridiagonalFile {
    order: usize,
    diag: Vec<f64>,
    sub: Vec<f64>,
    #[serde(rename = "super")]
    sup: Vec<f64>,
}

impl TryFrom<TridiagonalFile> for TridiagonalMatrix {
    type Error = Error;

    fn try_from(f: TridiagonalFile) -> Result<Self> {
        if f.diag.len() != f.order {
            return Err(Error::DimensionMismatch(format!(
                "order {} but diag has {} entries",
                f.order,
                f.diag.len()
            )));
        }
        TridiagonalMatrix::new(f.diag, f.sub, f.sup)
    }
}

impl From<TridiagonalMatrix> for TridiagonalFile {
    fn from(t: TridiagonalMatrix) -> Self {
        TridiagonalFile {
            order: t.order(),
            diag: t.diag,
            sub: t.sub,
            sup: t.sup,
        }
    }
}

impl TridiagonalMatrix {
    pub fn new(diag: Vec<f64>, sub: Vec<f64>, sup: Vec<f64>) -> Result<Self> {
        let q = diag.len();
        if q == 0 {
            return Err(Error::DimensionMismatch("empty tridiagonal matrix".into()));
        }
        if sub.len() != q - 1 || sup.len() != q - 1 {
            return Err(Error::DimensionMismatch(format!(
                "order {q} needs {} off-diagonal entries, got sub={} super={}",
                q - 1,
                sub.len(),
                sup.len()
            )));
        }
        Ok(Self { diag, sub, sup })
    }

    /// Symmetric matrix from its diagonal and off-diagonal.
    pub fn symmetric(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        Self::new(diag, off.clone(), off)
    }

    /// Constant-coefficient matrix `tridiag(sub, diag, sup)` of order `q`.
    pub fn constant(q: usize, sub: f64, diag: f64, sup: f64) -> Result<Self> {
        let off = q.saturating_sub(1);
        Self::new(vec![diag; q], vec![sub; off], vec![sup; off])
    }

    pub fn diagonal(values: Vec<f64>) -> Result<Self> {
        let off = values.len().saturating_sub(1);
        Self::new(values, vec![0.0; off], vec![0.0; off])
    }

    pub fn identity(q: usize) -> Result<Self> {
        Self::constant(q, 0.0, 1.0, 0.0)
    }

    pub fn order(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn sub(&self) -> &[f64] {
        &self.sub
    }

    pub fn sup(&self) -> &[f64] {
        &self.sup
    }

    pub fn is_symmetric(&self) -> bool {
        self.sub == self.sup
    }

    /// Diagonal entry `b_i`, 1-based.
    pub fn b(&self, i: usize) -> f64 {
        self.diag[i - 1]
    }

    /// Sub-diagonal entry `a_i` of row `i` (1-based), with `a_1 = 0`.
    pub fn a(&self, i: usize) -> f64 {
        if i <= 1 || i > self.order() {
            0.0
        } else {
            self.sub[i - 2]
        }
    }

    /// Super-diagonal entry `c_i` of row `i` (1-based), with `c_q = 0`.
    pub fn c(&self, i: usize) -> f64 {
        if i == 0 || i >= self.order() {
            0.0
        } else {
            self.sup[i - 1]
        }
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.order())
            .map(|j| {
                let mut s = self.diag[j].abs();
                if j > 0 {
                    s += self.sub[j - 1].abs();
                }
                if j + 1 < self.order() {
                    s += self.sup[j].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    /// Principal submatrix on `window`.
    pub fn window(&self, window: SubmatrixWindow) -> TridiagonalMatrix {
        let (lo, hi) = (window.lo - 1, window.hi);
        TridiagonalMatrix {
            diag: self.diag[lo..hi].to_vec(),
            sub: self.sub[lo..hi - 1].to_vec(),
            sup: self.sup[lo..hi - 1].to_vec(),
        }
    }

    /// `T + s I`.
    pub fn shifted(&self, s: f64) -> TridiagonalMatrix {
        TridiagonalMatrix {
            diag: self.diag.iter().map(|d| d + s).collect(),
            sub: self.sub.clone(),
            sup: self.sup.clone(),
        }
    }

    pub fn scaled(&self, f: f64) -> TridiagonalMatrix {
        TridiagonalMatrix {
            diag: self.diag.iter().map(|d| d * f).collect(),
            sub: self.sub.iter().map(|d| d * f).collect(),
            sup: self.sup.iter().map(|d| d * f).collect(),
        }
    }

    pub fn negated(&self) -> TridiagonalMatrix {
        self.scaled(-1.0)
    }

    /// `y = (T - σI) x`.
    pub fn shifted_matvec(&self, shift: f64, x: &[f64]) -> Vec<f64> {
        let q = self.order();
        (0..q)
            .map(|j| {
                let mut s = (self.diag[j] - shift) * x[j];
                if j > 0 {
                    s += self.sub[j - 1] * x[j - 1];
                }
                if j + 1 < q {
                    s += self.sup[j] * x[j + 1];
                }
                s
            })
            .collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.shifted_matvec(0.0, x)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let q = self.order();
        let mut m = nalgebra::DMatrix::zeros(q, q);
        for j in 0..q {
            m[(j, j)] = self.diag[j];
            if j + 1 < q {
                m[(j + 1, j)] = self.sub[j];
                m[(j, j + 1)] = self.sup[j];
            }
        }
        m
    }
}

/// Inclusive 1-based index range of a principal submatrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubmatrixWindow {
    pub lo: usize,
    pub hi: usize,
}

impl SubmatrixWindow {
    pub fn new(lo: usize, hi: usize, parent_order: usize) -> Result<Self> {
        if lo < 1 || lo > hi || hi > parent_order {
            return Err(Error::DimensionMismatch(format!(
                "window [{lo}, {hi}] outside 1..={parent_order}"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn len(&self) -> usize {
        self.hi + 1 - self.lo
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Which eigenvalues a bisection run should produce.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EigenSelection {
    All,
    /// Zero-based ascending indices `start..end`.
    Range(usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenRequest {
    /// Bisection stopping width κ.
    pub tolerance: f64,
    pub which: EigenSelection,
}

impl Default for EigenRequest {
    fn default() -> Self {
        Self {
            tolerance: UNIT_ROUNDOFF,
            which: EigenSelection::All,
        }
    }
}

impl EigenRequest {
    pub fn with_tolerance(tolerance: f64) -> Self {
        Self {
            tolerance,
            ..Self::default()
        }
    }
}

/// Solves `(T - σI) x = rhs` by Gaussian elimination without pivoting.
pub fn solve_shifted(t: &TridiagonalMatrix, shift: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let mut x = rhs.to_vec();
    let mut scratch = vec![0.0; t.order()];
    solve_shifted_in_place(t, shift, &mut x, &mut scratch, DEFAULT_BREAKDOWN)?;
    Ok(x)
}

/// In-place variant of [`solve_shifted`]: `x` holds the right-hand side on
/// entry and the solution on return. `scratch` needs `T.order()` slots.
/// A pivot below `breakdown * ‖T - σI‖∞` in magnitude is a `ZeroPivot`.
pub fn solve_shifted_in_place(
    t: &TridiagonalMatrix,
    shift: f64,
    x: &mut [f64],
    scratch: &mut [f64],
    breakdown: f64,
) -> Result<()> {
    let q = t.order();
    if x.len() != q || scratch.len() < q {
        return Err(Error::DimensionMismatch(format!(
            "order {q} solve with rhs of length {} and scratch {}",
            x.len(),
            scratch.len()
        )));
    }
    let limit = breakdown * shifted_norm_inf(t, shift);
    let check = |index: usize, pivot: f64| -> Result<()> {
        if pivot == 0.0 || !pivot.is_finite() || pivot.abs() < limit {
            Err(Error::ZeroPivot { index, pivot })
        } else {
            Ok(())
        }
    };

    let (d, lo, up) = (&t.diag, &t.sub, &t.sup);
    let mut w = d[0] - shift;
    check(1, w)?;
    x[0] /= w;
    for j in 1..q {
        scratch[j - 1] = up[j - 1] / w;
        w = (d[j] - shift) - lo[j - 1] * scratch[j - 1];
        check(j + 1, w)?;
        x[j] = (x[j] - lo[j - 1] * x[j - 1]) / w;
    }
    for j in (0..q - 1).rev() {
        x[j] -= scratch[j] * x[j + 1];
    }
    Ok(())
}

fn shifted_norm_inf(t: &TridiagonalMatrix, shift: f64) -> f64 {
    let q = t.order();
    (0..q)
        .map(|j| {
            let mut s = (t.diag[j] - shift).abs();
            if j > 0 {
                s += t.sub[j - 1].abs();
            }
            if j + 1 < q {
                s += t.sup[j].abs();
            }
            s
        })
        .fold(0.0, f64::max)
}

/// The DETGTRI pivot sequence `g_1 = b_1`, `g_i = b_i - a_i c_{i-1} / g_{i-1}`.
pub fn detgtri_pivots(t: &TridiagonalMatrix) -> Result<Vec<f64>> {
    let mut g = Vec::with_capacity(t.order());
    let mut prev = t.diag[0];
    if prev == 0.0 {
        return Err(Error::PivotBreakdown { index: 1 });
    }
    g.push(prev);
    for j in 1..t.order() {
        prev = t.diag[j] - t.sub[j - 1] * t.sup[j - 1] / prev;
        if prev == 0.0 {
            return Err(Error::PivotBreakdown { index: j + 1 });
        }
        g.push(prev);
    }
    Ok(g)
}

/// Determinant as the product of the DETGTRI pivots, O(order).
///
/// An exactly zero pivot (including a zero last pivot, i.e. a singular
/// matrix) is reported as `PivotBreakdown` rather than continued symbolically.
pub fn detgtri(t: &TridiagonalMatrix) -> Result<f64> {
    Ok(detgtri_pivots(t)?.iter().product())
}

/// Number of eigenvalues of `T` strictly below `x`.
///
/// Counts negative pivots of `T - xI`; a pivot smaller than `u·‖T‖∞` in
/// magnitude is replaced by `±u·‖T‖∞` (`+` when exactly zero).
pub fn sturm_count(t: &TridiagonalMatrix, x: f64) -> usize {
    let pert = (UNIT_ROUNDOFF * t.norm_inf()).max(f64::MIN_POSITIVE);
    sturm_count_with(t, x, pert)
}

fn sturm_count_with(t: &TridiagonalMatrix, x: f64, pert: f64) -> usize {
    let guard = |d: f64| -> f64 {
        if d.abs() < pert {
            if d < 0.0 {
                -pert
            } else {
                pert
            }
        } else {
            d
        }
    };
    let mut d = guard(t.diag[0] - x);
    let mut count = usize::from(d < 0.0);
    for j in 1..t.order() {
        d = guard((t.diag[j] - x) - t.sub[j - 1] * t.sup[j - 1] / d);
        count += usize::from(d < 0.0);
    }
    count
}

/// Row-sum Gershgorin interval `[min(b_i - r_i), max(b_i + r_i)]`.
pub fn gershgorin_bounds(t: &TridiagonalMatrix) -> (f64, f64) {
    let q = t.order();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for j in 0..q {
        let r = radius(t, j);
        lo = lo.min(t.diag[j] - r);
        hi = hi.max(t.diag[j] + r);
    }
    (lo, hi)
}

fn radius(t: &TridiagonalMatrix, j: usize) -> f64 {
    let mut r = 0.0;
    if j > 0 {
        r += t.sub[j - 1].abs();
    }
    if j + 1 < t.order() {
        r += t.sup[j].abs();
    }
    r
}

/// `max_i |b_i ± (|a_i| + |a_{i+1}|)|`, the scale in the bisection error bound.
pub fn mob_scale(t: &TridiagonalMatrix) -> f64 {
    (0..t.order())
        .map(|j| {
            let r = radius(t, j);
            (t.diag[j] + r).abs().max((t.diag[j] - r).abs())
        })
        .fold(0.0, f64::max)
}

/// A-priori bisection error `(15/2)·κ·mob_scale(T)`.
pub fn mob_error_bound(t: &TridiagonalMatrix, kappa: f64) -> f64 {
    7.5 * kappa * mob_scale(t)
}

/// Eigenvalues of a symmetric tridiagonal matrix by bisection, ascending.
pub fn eigenvalues_bisect(t: &TridiagonalMatrix, req: &EigenRequest) -> Vec<f64> {
    eigenvalues_bisect_counted(t, req).0
}

/// [`eigenvalues_bisect`] that also returns the number of pivot updates
/// spent, a machine-independent cost measure.
pub fn eigenvalues_bisect_counted(t: &TridiagonalMatrix, req: &EigenRequest) -> (Vec<f64>, u64) {
    let q = t.order();
    let (start, end) = match req.which {
        EigenSelection::All => (0, q),
        EigenSelection::Range(s, e) => (s.min(q), e.min(q)),
    };
    let (glo, ghi) = gershgorin_bounds(t);
    let pad = 2.0 * UNIT_ROUNDOFF * (glo.abs() + ghi.abs()) * q as f64 + f64::MIN_POSITIVE;
    let (glo, ghi) = (glo - pad, ghi + pad);
    let pert = (UNIT_ROUNDOFF * t.norm_inf()).max(f64::MIN_POSITIVE);
    let kappa = req.tolerance.max(0.0);

    let mut work = 0u64;
    let values = (start..end)
        .map(|j| {
            let (mut lo, mut hi) = (glo, ghi);
            for _ in 0..MAX_BISECTION_STEPS {
                if hi - lo <= kappa.max(2.0 * UNIT_ROUNDOFF * (lo.abs() + hi.abs())) {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                work += q as u64;
                if sturm_count_with(t, mid, pert) > j {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect();
    (values, work)
}

/// Diagonal similarity `S = D⁻¹ T D` making `T` symmetric, for
/// `a_{i+1} c_i > 0`. Returns the scaling `d` (with `d_1 = 1`) and `S`.
pub fn symmetrize_similarity(t: &TridiagonalMatrix) -> Result<(Vec<f64>, TridiagonalMatrix)> {
    let q = t.order();
    if t.is_symmetric() {
        return Ok((vec![1.0; q], t.clone()));
    }
    let mut d = Vec::with_capacity(q);
    d.push(1.0);
    let mut off = Vec::with_capacity(q - 1);
    for j in 0..q - 1 {
        let (a, c) = (t.sub[j], t.sup[j]);
        let p = a * c;
        if p <= 0.0 || !p.is_finite() {
            return Err(Error::NotSymmetrizable { index: j + 2 });
        }
        let prev = d[j];
        d.push((a / c).sqrt() * prev);
        off.push(a.signum() * p.sqrt());
    }
    let s = TridiagonalMatrix::symmetric(t.diag.clone(), off)?;
    Ok((d, s))
}
