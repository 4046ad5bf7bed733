//! Extended cyclic reduction for `(B ⊗ I + I ⊗ Rₙ) X = Y`.
//!
//! The block rows are `a_i x_{i-1} + (B + b_i I) x_i + c_i x_{i+1} = y_i`.
//! After `r` reduction steps, row `i` (a multiple of `2^r`) reads
//!
//! ```text
//! α_i^(r) (B_{i-h}^(r-1))⁻¹ x_{i-2^r} + D⁻¹ B_i^(r) x_i + γ_i^(r) (B_{i+h}^(r-1))⁻¹ x_{i+2^r} = p_i^(r)
//! ```
//!
//! with `h = 2^(r-1)` and `D = B_{i-h}^(r-1) B_{i+h}^(r-1)`. Every polynomial
//! in `B` is kept in factored form through the zero table, and every
//! application of one is a sequence of shifted tridiagonal solves.
//!
//! Sign convention: `B_i^(r) = (-1)^r ∏ (B - μ_j I)`, so the chains below are
//! unsigned and the driver folds the `(-1)^r` factors in.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tridiag::{solve_shifted_in_place, TridiagonalMatrix, DEFAULT_BREAKDOWN, UNIT_ROUNDOFF};
use crate::verify::{certify, ErrorModel, ErrorReport};
use crate::zeros::{build_zero_table, level_count, CouplingCoefficients, PairedChain, ZeroTable};

#[derive(Clone, Debug, PartialEq)]
pub struct SeparableSystem {
    b: TridiagonalMatrix,
    rn: TridiagonalMatrix,
    rhs: Vec<Vec<f64>>,
    k: u32,
}

impl SeparableSystem {
    pub fn new(b: TridiagonalMatrix, rn: TridiagonalMatrix, rhs: Vec<Vec<f64>>) -> Result<Self> {
        let k = level_count(rn.order())?;
        if !b.is_symmetric() {
            return Err(Error::DimensionMismatch("B must be symmetric".into()));
        }
        if rhs.len() != rn.order() {
            return Err(Error::DimensionMismatch(format!(
                "{} right-hand-side blocks for {} block rows",
                rhs.len(),
                rn.order()
            )));
        }
        if let Some(bad) = rhs.iter().position(|y| y.len() != b.order()) {
            return Err(Error::DimensionMismatch(format!(
                "rhs block {} has length {}, expected {}",
                bad + 1,
                rhs[bad].len(),
                b.order()
            )));
        }
        Ok(Self { b, rn, rhs, k })
    }

    pub fn b(&self) -> &TridiagonalMatrix {
        &self.b
    }

    pub fn rn(&self) -> &TridiagonalMatrix {
        &self.rn
    }

    pub fn rhs(&self) -> &[Vec<f64>] {
        &self.rhs
    }

    /// Block size.
    pub fn m(&self) -> usize {
        self.b.order()
    }

    /// Block count, `2^k - 1`.
    pub fn n(&self) -> usize {
        self.rn.order()
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn with_rhs(&self, rhs: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(self.b.clone(), self.rn.clone(), rhs)
    }

    /// Block operator applied to `x`.
    pub fn apply(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.n();
        (1..=n)
            .map(|i| {
                let mut y = self.b.shifted_matvec(-self.rn.b(i), &x[i - 1]);
                if i > 1 {
                    let a = self.rn.a(i);
                    y.iter_mut().zip(&x[i - 2]).for_each(|(y, v)| *y += a * v);
                }
                if i < n {
                    let c = self.rn.c(i);
                    y.iter_mut().zip(&x[i]).for_each(|(y, v)| *y += c * v);
                }
                y
            })
            .collect()
    }

    /// `‖A X - Y‖₂ / ‖Y‖₂` (absolute when `Y = 0`).
    pub fn residual_rel(&self, x: &[Vec<f64>]) -> f64 {
        let ax = self.apply(x);
        let mut num = 0.0;
        let mut den = 0.0;
        for (r, y) in ax.iter().zip(&self.rhs) {
            for (a, b) in r.iter().zip(y) {
                num += (a - b) * (a - b);
                den += b * b;
            }
        }
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub x: Vec<Vec<f64>>,
}

impl Solution {
    pub fn flatten(&self) -> Vec<f64> {
        self.x.iter().flatten().copied().collect()
    }
}

/// Scratch buffers for one chain evaluation, reused across calls.
#[derive(Clone, Debug)]
pub struct ChainWorkspace {
    delta: Vec<f64>,
    lu: Vec<f64>,
    breakdown: f64,
}

impl ChainWorkspace {
    pub fn new(m: usize) -> Self {
        Self {
            delta: vec![0.0; m],
            lu: vec![0.0; m],
            breakdown: DEFAULT_BREAKDOWN,
        }
    }

    pub fn with_breakdown(mut self, breakdown: f64) -> Self {
        self.breakdown = breakdown;
        self
    }
}

/// `∏(B - μ_j I)⁻¹ ∏(B - λ_j I) b` via the paired δ-steps and one final solve.
pub fn apply_rational_chain(
    b: &TridiagonalMatrix,
    chain: &PairedChain,
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let mut z = rhs.to_vec();
    let mut ws = ChainWorkspace::new(b.order());
    apply_rational_chain_in_place(b, chain, &mut z, &mut ws)?;
    Ok(z)
}

pub fn apply_rational_chain_in_place(
    b: &TridiagonalMatrix,
    chain: &PairedChain,
    z: &mut [f64],
    ws: &mut ChainWorkspace,
) -> Result<()> {
    apply_paired_steps_in_place(b, &chain.pairs, z, ws)?;
    solve_shifted_in_place(b, chain.final_shift, z, &mut ws.lu, ws.breakdown)
}

/// Only the paired steps `(B - θ_j I) z_{j+1} = (B - φ_j I) z_j`, each done as
/// `(B - θ_j I) δ = (θ_j - φ_j) z_j`, `z_{j+1} = z_j + δ`.
pub fn apply_paired_steps(
    b: &TridiagonalMatrix,
    pairs: &[(f64, f64)],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let mut z = rhs.to_vec();
    let mut ws = ChainWorkspace::new(b.order());
    apply_paired_steps_in_place(b, pairs, &mut z, &mut ws)?;
    Ok(z)
}

pub fn apply_paired_steps_in_place(
    b: &TridiagonalMatrix,
    pairs: &[(f64, f64)],
    z: &mut [f64],
    ws: &mut ChainWorkspace,
) -> Result<()> {
    let ChainWorkspace {
        delta,
        lu,
        breakdown,
    } = ws;
    for &(theta, phi) in pairs {
        if theta == phi {
            continue;
        }
        let w = theta - phi;
        delta.iter_mut().zip(z.iter()).for_each(|(d, v)| *d = w * v);
        solve_shifted_in_place(b, theta, delta, lu, *breakdown)?;
        z.iter_mut().zip(delta.iter()).for_each(|(v, d)| *v += d);
    }
    Ok(())
}

/// `(∏ f_j) ∏(B - ξ_j I)⁻¹ b`, interleaving each scalar factor with one solve.
///
/// Step `j` solves `(B - ξ_{L-j+1} I) x_j = f_j x_{j-1}`: the most negative
/// zero goes first.
pub fn apply_scaled_inverse_chain(
    b: &TridiagonalMatrix,
    xi: &[f64],
    factors: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let mut x = rhs.to_vec();
    let mut ws = ChainWorkspace::new(b.order());
    apply_scaled_inverse_chain_in_place(b, xi, factors, &mut x, &mut ws)?;
    Ok(x)
}

pub fn apply_scaled_inverse_chain_in_place(
    b: &TridiagonalMatrix,
    xi: &[f64],
    factors: &[f64],
    x: &mut [f64],
    ws: &mut ChainWorkspace,
) -> Result<()> {
    if xi.len() != factors.len() {
        return Err(Error::LengthMismatch {
            expected: xi.len(),
            found: factors.len(),
        });
    }
    for (f, shift) in factors.iter().zip(xi.iter().rev()) {
        x.iter_mut().for_each(|v| *v *= f);
        solve_shifted_in_place(b, *shift, x, &mut ws.lu, ws.breakdown)?;
    }
    Ok(())
}

/// Right-hand sides `p_i^(r)` for every level.
#[derive(Clone, Debug)]
pub struct Reduction {
    levels: Vec<Vec<Vec<f64>>>,
}

impl Reduction {
    /// `p_i^(r)`; `i` must be a multiple of `2^r`.
    pub fn p(&self, r: u32, i: usize) -> &[f64] {
        &self.levels[r as usize][(i >> r) - 1]
    }

    pub fn levels(&self) -> usize {
        self.levels.len()
    }

    /// The single vector `p_{2^(k-1)}^(k-1)` left after the last reduction.
    pub fn final_p(&self) -> &[f64] {
        &self.levels.last().expect("at least one level")[0]
    }
}

/// The solver bound to one system and its preprocessing.
pub struct EcrSolver<'a> {
    sys: &'a SeparableSystem,
    table: &'a ZeroTable,
    coupling: CouplingCoefficients,
    breakdown: f64,
}

fn sign(r: u32) -> f64 {
    if r.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

impl<'a> EcrSolver<'a> {
    pub fn new(sys: &'a SeparableSystem, table: &'a ZeroTable) -> Result<Self> {
        if table.k() != sys.k() {
            return Err(Error::DimensionMismatch(format!(
                "zero table has {} levels, system needs {}",
                table.k(),
                sys.k()
            )));
        }
        Ok(Self {
            sys,
            table,
            coupling: CouplingCoefficients::new(sys.rn(), sys.k()),
            breakdown: DEFAULT_BREAKDOWN,
        })
    }

    pub fn coupling(&self) -> &CouplingCoefficients {
        &self.coupling
    }

    fn workspace(&self) -> ChainWorkspace {
        ChainWorkspace::new(self.sys.m()).with_breakdown(self.breakdown)
    }

    /// `(B_i^(r))⁻¹ B_{i-h}^(r-1) B_{i+h}^(r-1) v`, in place.
    pub fn q_term(&self, r: u32, i: usize, v: &mut [f64], ws: &mut ChainWorkspace) -> Result<()> {
        let chain = self.table.chain(r, i)?;
        apply_rational_chain_in_place(self.sys.b(), &chain, v, ws)?;
        if r % 2 == 1 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        Ok(())
    }

    /// `α_i^(r) (B_{i-h}^(r-1))⁻¹ v`, or `None` when `α_i^(r) = 0`.
    pub fn alpha_term(
        &self,
        r: u32,
        i: usize,
        v: &[f64],
        ws: &mut ChainWorkspace,
    ) -> Result<Option<Vec<f64>>> {
        if self.coupling.alpha(r, i) == 0.0 {
            return Ok(None);
        }
        let lead = self.coupling.a(i);
        let mut out = v.to_vec();
        if r > 0 {
            let len = 1usize << r;
            let xi = self.table.get(r - 1, i - len / 2)?;
            let factors: Vec<f64> = (i + 1 - len..i).map(|j| self.coupling.a(j)).collect();
            apply_scaled_inverse_chain_in_place(self.sys.b(), xi, &factors, &mut out, ws)?;
        }
        let s = if r == 0 { lead } else { sign(r + 1) * lead };
        out.iter_mut().for_each(|x| *x *= s);
        Ok(Some(out))
    }

    /// `γ_i^(r) (B_{i+h}^(r-1))⁻¹ v`, or `None` when `γ_i^(r) = 0`.
    pub fn gamma_term(
        &self,
        r: u32,
        i: usize,
        v: &[f64],
        ws: &mut ChainWorkspace,
    ) -> Result<Option<Vec<f64>>> {
        if self.coupling.gamma(r, i) == 0.0 {
            return Ok(None);
        }
        let lead = self.coupling.c(i);
        let mut out = v.to_vec();
        if r > 0 {
            let len = 1usize << r;
            let xi = self.table.get(r - 1, i + len / 2)?;
            let factors: Vec<f64> = (i + 1..i + len).rev().map(|j| self.coupling.c(j)).collect();
            apply_scaled_inverse_chain_in_place(self.sys.b(), xi, &factors, &mut out, ws)?;
        }
        let s = if r == 0 { lead } else { sign(r + 1) * lead };
        out.iter_mut().for_each(|x| *x *= s);
        Ok(Some(out))
    }

    /// Reduction phase: all `p_i^(r)` for `r = 0..k-1`.
    pub fn reduce(&self) -> Result<Reduction> {
        let k = self.sys.k();
        let mut levels = vec![self.sys.rhs().to_vec()];
        for r in 0..k.saturating_sub(1) {
            let prev = &levels[r as usize];
            let step = 1usize << r;
            // q at the odd multiples of 2^r, indexed by their position in `prev`
            let q: Vec<Vec<f64>> = (0..prev.len())
                .step_by(2)
                .collect::<Vec<_>>()
                .into_par_iter()
                .map_init(
                    || self.workspace(),
                    |ws, j| {
                        let mut v = prev[j].clone();
                        self.q_term(r, (j + 1) * step, &mut v, ws)?;
                        Ok(v)
                    },
                )
                .collect::<Result<_>>()?;
            let next: Vec<Vec<f64>> = (1..prev.len())
                .step_by(2)
                .collect::<Vec<_>>()
                .into_par_iter()
                .map_init(
                    || self.workspace(),
                    |ws, j| {
                        let i = (j + 1) * step;
                        let left = self.alpha_term(r, i, &q[j / 2], ws)?;
                        let right = self.gamma_term(r, i, &q[j / 2 + 1], ws)?;
                        let mut p = match (left, right) {
                            (Some(mut l), Some(rr)) => {
                                l.iter_mut().zip(&rr).for_each(|(a, b)| *a += b);
                                l
                            }
                            (Some(l), None) => l,
                            (None, Some(rr)) => rr,
                            (None, None) => vec![0.0; self.sys.m()],
                        };
                        p.iter_mut().zip(&prev[j]).for_each(|(a, b)| *a -= b);
                        Ok(p)
                    },
                )
                .collect::<Result<_>>()?;
            levels.push(next);
        }
        Ok(Reduction { levels })
    }

    /// Back-substitution phase, top level first, with `x_0 = x_{n+1} = 0`.
    pub fn back_substitute(&self, red: &Reduction) -> Result<Solution> {
        let n = self.sys.n();
        let k = self.sys.k();
        let zero = vec![0.0; self.sys.m()];
        let mut x: Vec<Option<Vec<f64>>> = vec![None; n + 2];
        for r in (0..k).rev() {
            let step = 1usize << r;
            let solved: Vec<(usize, Vec<f64>)> = (step..=n)
                .step_by(2 * step)
                .collect::<Vec<_>>()
                .into_par_iter()
                .map_init(
                    || self.workspace(),
                    |ws, i| {
                        let mut v = red.p(r, i).to_vec();
                        let left = x[i - step].as_deref().unwrap_or(&zero);
                        if i > step {
                            if let Some(t) = self.alpha_term(r, i, left, ws)? {
                                v.iter_mut().zip(&t).for_each(|(a, b)| *a -= b);
                            }
                        }
                        if i + step <= n {
                            let right = x[i + step].as_deref().unwrap_or(&zero);
                            if let Some(t) = self.gamma_term(r, i, right, ws)? {
                                v.iter_mut().zip(&t).for_each(|(a, b)| *a -= b);
                            }
                        }
                        self.q_term(r, i, &mut v, ws)?;
                        Ok((i, v))
                    },
                )
                .collect::<Result<_>>()?;
            for (i, v) in solved {
                x[i] = Some(v);
            }
        }
        Ok(Solution {
            x: x[1..=n]
                .iter_mut()
                .map(|v| v.take().expect("every block solved"))
                .collect(),
        })
    }

    pub fn solve(&self) -> Result<Solution> {
        let red = self.reduce()?;
        self.back_substitute(&red)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    /// Bisection tolerance κ for the zero table.
    pub kappa: f64,
    /// Check the certification conditions and compute error bounds.
    pub certify: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            kappa: UNIT_ROUNDOFF,
            certify: false,
        }
    }
}

/// Preprocess, reduce and back-substitute.
pub fn solve(sys: &SeparableSystem, opts: &SolveOptions) -> Result<(Solution, ErrorReport)> {
    let table = build_zero_table(sys.rn(), sys.k(), opts.kappa)?;
    solve_with_table(sys, &table, opts)
}

/// [`solve`] with a precomputed zero table.
pub fn solve_with_table(
    sys: &SeparableSystem,
    table: &ZeroTable,
    opts: &SolveOptions,
) -> Result<(Solution, ErrorReport)> {
    let em = ErrorModel::double();
    let mut report = if opts.certify {
        let report = certify(sys, table, &em)?;
        if !report.conditions_ok {
            return Err(Error::ConditionViolation(report.diagnostics.join("; ")));
        }
        report
    } else {
        ErrorReport::default()
    };
    let solution = EcrSolver::new(sys, table)?.solve()?;
    report.residual_rel = Some(sys.residual_rel(&solution.x));
    Ok((solution, report))
}
