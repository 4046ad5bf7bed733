//! Oracles, identity checks and forward-error certification.

pub mod bounds;
pub mod identities;
pub mod oracle;

use rand::{RngExt, SeedableRng};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use serde::Serialize;

pub use bounds::{
    bound_q, bound_rhs, bound_xi, chain_c1, chain_c2_c3, paired_chain_bound, scaled_inverse_bound,
    single_pair_bound, ErrorModel,
};
pub use identities::{
    check_appendix_identities, check_det_bound, check_det_lemma, check_main_identity,
    check_relaxed_det_bound, det_bound_hypothesis, sample_points,
};
pub use oracle::{dense_eigen, dense_kron_solve};

use crate::ecr::{apply_paired_steps, apply_scaled_inverse_chain, SeparableSystem};
use crate::error::Result;
use crate::tridiag::{eigenvalues_bisect, mob_scale, EigenRequest, EigenSelection, TridiagonalMatrix};
use crate::zeros::{required_entries, CouplingCoefficients, ZeroTable};

/// Computed constants, measured errors and the certification verdict.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ErrorReport {
    pub residual_rel: Option<f64>,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub g: Option<f64>,
    pub xi: Option<f64>,
    pub bound_q_max: Option<f64>,
    pub bound_rhs_max: Option<f64>,
    pub bound_c1: Option<f64>,
    pub bound_c2: Option<f64>,
    pub bound_c3: Option<f64>,
    /// Worst measured chain error divided by its bound.
    pub chain_error_ratio: Option<f64>,
    pub q_below_5xi: Option<bool>,
    pub conditions_ok: bool,
    pub certified: bool,
    pub diagnostics: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionReport {
    pub ok: bool,
    pub diagnostics: Vec<String>,
    /// `(λ_min, λ_max)` of `B`.
    pub b_range: (f64, f64),
    /// `(λ_min, λ_max)` of `Rₙ`, NaN when `Rₙ` is not symmetric.
    pub rn_range: (f64, f64),
}

fn extremes(t: &TridiagonalMatrix) -> (f64, f64) {
    let q = t.order();
    let pick = |j| {
        eigenvalues_bisect(
            t,
            &EigenRequest {
                which: EigenSelection::Range(j, j + 1),
                ..EigenRequest::default()
            },
        )[0]
    };
    (pick(0), pick(q - 1))
}

/// Both matrices symmetric positive definite with spectra in `[u^(1-e), 1]`,
/// `max |b_i ± (|a_i| + |a_{i+1}|)| ≤ 1` for `Rₙ`, and no zero coupling in `Rₙ`.
/// Extremes come from bisection at `κ = u`.
pub fn check_conditions(sys: &SeparableSystem, em: &ErrorModel) -> ConditionReport {
    let mut diag = Vec::new();
    let floor = em.lambda_floor();
    let mut range_check = |name: &str, (lo, hi): (f64, f64)| {
        if hi > 1.0 {
            diag.push(format!("λ_max({name}) = {hi:e} exceeds 1"));
        }
        if !(lo >= floor) {
            diag.push(format!("λ_min({name}) = {lo:e} is below {floor:e}"));
        }
    };
    let b_range = extremes(sys.b());
    range_check("B", b_range);
    let rn = sys.rn();
    let rn_range = if rn.is_symmetric() {
        let r = extremes(rn);
        range_check("Rn", r);
        r
    } else {
        (f64::NAN, f64::NAN)
    };
    if !rn.is_symmetric() {
        diag.push("Rn is not symmetric".into());
    }
    if let Some(j) = rn.sub().iter().position(|&v| v == 0.0) {
        diag.push(format!("Rn has a zero off-diagonal at row {}", j + 2));
    }
    let s = mob_scale(rn);
    if s > 1.0 {
        diag.push(format!("max |b_i ± (|a_i|+|a_i+1|)| of Rn = {s:e} exceeds 1"));
    }
    ConditionReport {
        ok: diag.is_empty(),
        diagnostics: diag,
        b_range,
        rn_range,
    }
}

/// Unit-norm probe vector for chain error measurements.
pub fn probe_vector(m: usize, seed: u64) -> Vec<f64> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let v: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let n = norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Default)]
struct Audit {
    xi: f64,
    q: f64,
    rhs: f64,
    c1: f64,
    c2: f64,
    c3: f64,
    ratio: f64,
    q_ok: bool,
}

impl Audit {
    fn merge(self, o: Audit) -> Audit {
        Audit {
            xi: self.xi.max(o.xi),
            q: self.q.max(o.q),
            rhs: self.rhs.max(o.rhs),
            c1: self.c1.max(o.c1),
            c2: self.c2.max(o.c2),
            c3: self.c3.max(o.c3),
            ratio: self.ratio.max(o.ratio),
            q_ok: self.q_ok && o.q_ok,
        }
    }

    fn empty() -> Audit {
        Audit {
            q_ok: true,
            ..Audit::default()
        }
    }
}

/// Check the conditions and, when they hold, compute every bound constant
/// and measure each solve chain against a double-double reference.
pub fn certify(sys: &SeparableSystem, table: &ZeroTable, em: &ErrorModel) -> Result<ErrorReport> {
    let cond = check_conditions(sys, em);
    let mut report = ErrorReport {
        eps: Some(em.eps),
        delta: Some(em.delta),
        g: Some(em.g()),
        conditions_ok: cond.ok,
        diagnostics: cond.diagnostics.clone(),
        ..ErrorReport::default()
    };
    if !cond.ok {
        return Ok(report);
    }
    let b = sys.b();
    let (lmin, lmax) = cond.b_range;
    let probe = probe_vector(sys.m(), 0x5eed);

    let paired = required_entries(table.k())
        .into_par_iter()
        .map(|(r, i)| -> Result<Audit> {
            let mu = table.get(r, i)?;
            let chain = table.chain(r, i)?;
            let mut a = Audit::empty();
            for &m in mu {
                let q = bound_q(lmax, lmin, m, em)?;
                let x = bound_xi((lmax + m.abs()) / (lmin + m.abs()), em)?;
                a.q = a.q.max(q);
                a.xi = a.xi.max(x);
                a.q_ok &= q < 5.0 * x;
            }
            for &(theta, phi) in &chain.pairs {
                a.rhs = a.rhs.max(bound_rhs(theta, phi, 1.0, em));
            }
            a.c1 = chain_c1(mu);
            let got = apply_paired_steps(b, &chain.pairs, &probe)?;
            let want = oracle::dd_paired_steps(b, &chain.pairs, &probe)?;
            a.ratio = dist(&got, &want) / paired_chain_bound(mu, 1.0, em);
            Ok(a)
        })
        .try_reduce(Audit::empty, |x, y| Ok(x.merge(y)))?;

    let coupling = CouplingCoefficients::new(sys.rn(), sys.k());
    let n = sys.n();
    let mut scaled_jobs = Vec::new();
    for r in 1..sys.k() {
        let len = 1usize << r;
        for i in (len..=n).step_by(len) {
            if coupling.alpha(r, i) != 0.0 {
                let f: Vec<f64> = (i + 1 - len..i).map(|j| coupling.a(j)).collect();
                scaled_jobs.push((r - 1, i - len / 2, f));
            }
            if coupling.gamma(r, i) != 0.0 {
                let f: Vec<f64> = (i + 1..i + len).rev().map(|j| coupling.c(j)).collect();
                scaled_jobs.push((r - 1, i + len / 2, f));
            }
        }
    }
    let scaled = scaled_jobs
        .into_par_iter()
        .map(|(r, j, f)| -> Result<Audit> {
            let xi = table.get(r, j)?;
            let (c2, c3) = chain_c2_c3(xi, &f)?;
            let got = apply_scaled_inverse_chain(b, xi, &f, &probe)?;
            let want = oracle::dd_scaled_inverse_chain(b, xi, &f, &probe)?;
            let bound = scaled_inverse_bound(xi, &f, 1.0, em)?;
            let err = dist(&got, &want);
            Ok(Audit {
                c2,
                c3,
                ratio: if bound > 0.0 { err / bound } else if err == 0.0 { 0.0 } else { f64::INFINITY },
                ..Audit::empty()
            })
        })
        .try_reduce(Audit::empty, |x, y| Ok(x.merge(y)))?;

    let all = paired.merge(scaled);
    report.xi = Some(all.xi);
    report.bound_q_max = Some(all.q);
    report.bound_rhs_max = Some(all.rhs);
    report.bound_c1 = Some(all.c1);
    report.bound_c2 = Some(all.c2);
    report.bound_c3 = Some(all.c3);
    report.chain_error_ratio = Some(all.ratio);
    report.q_below_5xi = Some(all.q_ok);
    if !all.q_ok {
        report.diagnostics.push("Q ≥ 5ξ for some shift".into());
    }
    if all.ratio > 1.0 {
        report
            .diagnostics
            .push(format!("measured chain error exceeds its bound (ratio {:e})", all.ratio));
    }
    report.certified = all.ratio <= 1.0;
    Ok(report)
}
