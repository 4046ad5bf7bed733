//! Zeros of the reduction polynomials `B_i^(r)` and the shift chains built
//! from them.
//!
//! Each `B_i^(r)` is, up to the sign `(-1)^r`, the characteristic polynomial
//! of the principal submatrix `-Rₙ[i-(2^r-1) ..= i+(2^r-1)]`, so its zeros are
//! negated window eigenvalues and are computed directly by bisection on the
//! window. No level-to-level recurrence is involved.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tridiag::{
    eigenvalues_bisect_counted, symmetrize_similarity, EigenRequest, SubmatrixWindow,
    TridiagonalMatrix,
};

/// Level count `k` with `n = 2^k - 1`, or `BadBlockCount`.
pub fn level_count(n: usize) -> Result<u32> {
    let k = (n + 1).trailing_zeros();
    if n == 0 || (n + 1) != 1usize << k {
        return Err(Error::BadBlockCount(n));
    }
    Ok(k)
}

/// Window of `Rₙ` whose negated eigenvalues are the zeros of `B_i^(r)`.
pub fn window_for(r: u32, i: usize, n: usize) -> Result<SubmatrixWindow> {
    let step = 1usize << r;
    if i == 0 || i > n || !i.is_multiple_of(step) {
        return Err(Error::IndexOutOfGrid { r, i, n });
    }
    let half = step - 1;
    let lo = i.saturating_sub(half).max(1);
    let hi = (i + half).min(n);
    SubmatrixWindow::new(lo, hi, n)
}

/// The `(r, i)` pairs the solver consumes: odd multiples of `2^r` at every
/// level `0 ≤ r < k`.
pub fn required_entries(k: u32) -> Vec<(u32, usize)> {
    let n = (1usize << k) - 1;
    let mut keys = Vec::new();
    for r in 0..k {
        let step = 1usize << r;
        keys.extend((step..=n).step_by(2 * step).map(|i| (r, i)));
    }
    keys
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZeroTable {
    k: u32,
    entries: BTreeMap<(u32, usize), Vec<f64>>,
    work: u64,
}

impl ZeroTable {
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn n(&self) -> usize {
        (1usize << self.k) - 1
    }

    /// Zeros of `B_i^(r)`, sorted descending (closest to zero first).
    pub fn get(&self, r: u32, i: usize) -> Result<&[f64]> {
        self.entries
            .get(&(r, i))
            .map(Vec::as_slice)
            .ok_or(Error::MissingZeros { r, i })
    }

    pub fn entries(&self) -> impl Iterator<Item = ((u32, usize), &[f64])> {
        self.entries.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Pivot updates spent by bisection while building the table.
    pub fn work(&self) -> u64 {
        self.work
    }

    /// Zeros of the product `B_{i-2^(r-1)}^(r-1) B_{i+2^(r-1)}^(r-1)`; empty at
    /// `r = 0` where both factors are the identity.
    pub fn product_zeros(&self, r: u32, i: usize) -> Result<Vec<f64>> {
        if r == 0 {
            return Ok(Vec::new());
        }
        let h = 1usize << (r - 1);
        let left = self.get(r - 1, i - h)?;
        let right = self.get(r - 1, i + h)?;
        Ok(merge_product_zeros(left, right))
    }

    /// The paired-shift chain realizing `(B_i^(r))⁻¹ D` up to sign.
    pub fn chain(&self, r: u32, i: usize) -> Result<PairedChain> {
        pair_shifts(self.get(r, i)?, &self.product_zeros(r, i)?)
    }

    /// JSON object keyed `"r:i"`, each value the descending zero list.
    pub fn to_json(&self) -> Result<String> {
        let map: BTreeMap<String, &Vec<f64>> = self
            .entries
            .iter()
            .map(|((r, i), v)| (format!("{r}:{i}"), v))
            .collect();
        Ok(serde_json::to_string_pretty(&map)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let map: BTreeMap<String, Vec<f64>> = serde_json::from_str(text)?;
        let mut entries = BTreeMap::new();
        for (key, zeros) in map {
            let parsed = key.split_once(':').and_then(|(r, i)| {
                Some((r.trim().parse::<u32>().ok()?, i.trim().parse::<usize>().ok()?))
            });
            let Some(key) = parsed else {
                return Err(Error::Parse {
                    line: 0,
                    column: 0,
                    msg: format!("zero-table key {key:?} is not of the form \"r:i\""),
                });
            };
            entries.insert(key, zeros);
        }
        let k = entries.keys().map(|(r, _)| r + 1).max().unwrap_or(0);
        if k == 0 {
            return Err(Error::Parse {
                line: 0,
                column: 0,
                msg: "empty zero table".into(),
            });
        }
        let n = (1usize << k) - 1;
        for (r, i) in required_entries(k) {
            let zeros = entries.get(&(r, i)).ok_or(Error::MissingZeros { r, i })?;
            let expected = window_for(r, i, n)?.len();
            if zeros.len() != expected {
                return Err(Error::LengthMismatch {
                    expected,
                    found: zeros.len(),
                });
            }
        }
        Ok(Self {
            k,
            entries,
            work: 0,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Bisection-computed zeros of every `B_i^(r)` the solver needs.
///
/// A non-symmetric `Rₙ` is first symmetrized by a diagonal similarity, which
/// leaves every principal window's spectrum unchanged.
pub fn build_zero_table(rn: &TridiagonalMatrix, k: u32, kappa: f64) -> Result<ZeroTable> {
    let n = rn.order();
    if level_count(n)? != k {
        return Err(Error::DimensionMismatch(format!(
            "Rn of order {n} does not have 2^{k} - 1 rows"
        )));
    }
    let (_, sym) = symmetrize_similarity(rn)?;
    let req = EigenRequest::with_tolerance(kappa);
    let computed: Vec<_> = required_entries(k)
        .into_par_iter()
        .map(|(r, i)| {
            let w = window_for(r, i, n)?;
            let (ev, work) = eigenvalues_bisect_counted(&sym.window(w), &req);
            let zeros: Vec<f64> = ev.into_iter().map(|l| -l).collect();
            Ok(((r, i), zeros, work))
        })
        .collect::<Result<_>>()?;
    let mut entries = BTreeMap::new();
    let mut work = 0;
    for (key, zeros, w) in computed {
        entries.insert(key, zeros);
        work += w;
    }
    Ok(ZeroTable { k, entries, work })
}

/// Multiset union of two descending zero lists, still descending.
pub fn merge_product_zeros(left: &[f64], right: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(left.len() + right.len());
    let (mut a, mut b) = (left.iter().peekable(), right.iter().peekable());
    loop {
        match (a.peek(), b.peek()) {
            (Some(&&x), Some(&&y)) => {
                if x >= y {
                    out.push(x);
                    a.next();
                } else {
                    out.push(y);
                    b.next();
                }
            }
            (Some(_), None) => out.extend(a.by_ref()),
            (None, Some(_)) => out.extend(b.by_ref()),
            (None, None) => break,
        }
    }
    out
}

/// Shift pairs `(θ_j, φ_j) = (μ_{j+1}, λ_j)` plus the unpaired `μ_1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedChain {
    pub pairs: Vec<(f64, f64)>,
    pub final_shift: f64,
}

impl PairedChain {
    /// Largest-magnitude `θ` over the chain, i.e. `μ_L`; `μ_1` when unpaired.
    pub fn last_mu(&self) -> f64 {
        self.pairs.last().map_or(self.final_shift, |p| p.0)
    }
}

pub fn pair_shifts(mu: &[f64], lambda: &[f64]) -> Result<PairedChain> {
    if mu.len() != lambda.len() + 1 {
        return Err(Error::LengthMismatch {
            expected: lambda.len() + 1,
            found: mu.len(),
        });
    }
    Ok(PairedChain {
        pairs: mu[1..].iter().copied().zip(lambda.iter().copied()).collect(),
        final_shift: mu[0],
    })
}

/// The scalar couplings `α_i^(r) = ∏_{j=i-2^r+1}^{i} a_j` and
/// `γ_i^(r) = ∏_{j=i}^{i+2^r-1} c_j` with `a_1 = c_n = 0`.
#[derive(Clone, Debug)]
pub struct CouplingCoefficients {
    a: Vec<f64>,
    c: Vec<f64>,
    alpha: BTreeMap<(u32, usize), f64>,
    gamma: BTreeMap<(u32, usize), f64>,
}

impl CouplingCoefficients {
    pub fn new(rn: &TridiagonalMatrix, k: u32) -> Self {
        let n = rn.order();
        let a: Vec<f64> = (0..=n).map(|j| rn.a(j)).collect();
        let c: Vec<f64> = (0..=n).map(|j| rn.c(j)).collect();
        let mut alpha = BTreeMap::new();
        let mut gamma = BTreeMap::new();
        for r in 0..k {
            let len = 1usize << r;
            for i in 1..=n {
                let al = if i >= len {
                    a[i + 1 - len..=i].iter().product()
                } else {
                    0.0
                };
                let ga = if i + len - 1 <= n {
                    c[i..i + len].iter().product()
                } else {
                    0.0
                };
                alpha.insert((r, i), al);
                gamma.insert((r, i), ga);
            }
        }
        Self { a, c, alpha, gamma }
    }

    pub fn alpha(&self, r: u32, i: usize) -> f64 {
        self.alpha.get(&(r, i)).copied().unwrap_or(0.0)
    }

    pub fn gamma(&self, r: u32, i: usize) -> f64 {
        self.gamma.get(&(r, i)).copied().unwrap_or(0.0)
    }

    /// `a_j`, zero outside `2..=n`.
    pub fn a(&self, j: usize) -> f64 {
        self.a.get(j).copied().unwrap_or(0.0)
    }

    /// `c_j`, zero outside `1..n`.
    pub fn c(&self, j: usize) -> f64 {
        self.c.get(j).copied().unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_examples() {
        assert_eq!(window_for(0, 5, 7).unwrap(), SubmatrixWindow { lo: 5, hi: 5 });
        assert_eq!(window_for(1, 2, 7).unwrap(), SubmatrixWindow { lo: 1, hi: 3 });
        assert_eq!(window_for(2, 4, 7).unwrap(), SubmatrixWindow { lo: 1, hi: 7 });
        assert_eq!(
            window_for(1, 3, 7).unwrap_err(),
            Error::IndexOutOfGrid { r: 1, i: 3, n: 7 }
        );
        assert!(window_for(0, 8, 7).is_err());
    }

    #[test]
    fn required_windows_are_interior() {
        for k in 1..7 {
            let n = (1usize << k) - 1;
            for (r, i) in required_entries(k) {
                assert_eq!(window_for(r, i, n).unwrap().len(), (1usize << (r + 1)) - 1);
            }
        }
    }

    #[test]
    fn level_count_rejects_bad_sizes() {
        assert_eq!(level_count(7).unwrap(), 3);
        assert_eq!(level_count(1).unwrap(), 1);
        assert_eq!(level_count(6), Err(Error::BadBlockCount(6)));
        assert_eq!(level_count(0), Err(Error::BadBlockCount(0)));
    }

    #[test]
    fn diagonal_rn_gives_negated_entries() {
        let b: Vec<f64> = (1..=7).map(|j| j as f64 * 0.1).collect();
        let rn = TridiagonalMatrix::diagonal(b.clone()).unwrap();
        let table = build_zero_table(&rn, 3, 1e-15).unwrap();
        for i in (1..=7).step_by(2) {
            let z = table.get(0, i).unwrap();
            assert_eq!(z.len(), 1);
            assert!((z[0] + b[i - 1]).abs() < 1e-14);
        }
    }

    #[test]
    fn three_by_three_window_zeros() {
        let rn = TridiagonalMatrix::constant(3, -1.0, 2.0, -1.0).unwrap();
        let table = build_zero_table(&rn, 2, 1e-15).unwrap();
        let s = std::f64::consts::SQRT_2;
        let want = [-(2.0 - s), -2.0, -(2.0 + s)];
        for (g, w) in table.get(1, 2).unwrap().iter().zip(want) {
            assert!((g - w).abs() < 1e-13);
        }
    }

    #[test]
    fn non_symmetric_rn_is_symmetrized() {
        let rn = TridiagonalMatrix::new(vec![2.0; 3], vec![-0.5, -2.0], vec![-2.0, -0.5]).unwrap();
        let table = build_zero_table(&rn, 2, 1e-15).unwrap();
        let z = table.get(1, 2).unwrap();
        // products a_{i+1}c_i are both 1, so the spectrum matches tridiag(-1,2,-1)
        assert!((z[1] + 2.0).abs() < 1e-13);
        let bad = TridiagonalMatrix::new(vec![2.0; 3], vec![0.5, -2.0], vec![-2.0, -0.5]).unwrap();
        assert!(matches!(build_zero_table(&bad, 2, 1e-15), Err(Error::NotSymmetrizable { .. })));
    }

    #[test]
    fn merge_examples() {
        assert_eq!(merge_product_zeros(&[-1.0, -3.0], &[-2.0]), vec![-1.0, -2.0, -3.0]);
        assert_eq!(merge_product_zeros(&[], &[-4.0]), vec![-4.0]);
        assert_eq!(merge_product_zeros(&[-1.0, -2.0], &[-1.0]), vec![-1.0, -1.0, -2.0]);
    }

    #[test]
    fn pair_examples() {
        let c = pair_shifts(&[-1.0, -2.0, -3.0], &[-1.5, -2.5]).unwrap();
        assert_eq!(c.pairs, vec![(-2.0, -1.5), (-3.0, -2.5)]);
        assert_eq!(c.final_shift, -1.0);
        let c = pair_shifts(&[-5.0], &[]).unwrap();
        assert!(c.pairs.is_empty());
        assert_eq!(c.final_shift, -5.0);
        assert_eq!(
            pair_shifts(&[-1.0], &[-1.0]).unwrap_err(),
            Error::LengthMismatch { expected: 2, found: 1 }
        );
    }

    #[test]
    fn coupling_recursion_matches_product_formula() {
        let n = 15;
        let sub: Vec<f64> = (0..n - 1).map(|j| 0.3 + 0.05 * j as f64).collect();
        let sup: Vec<f64> = (0..n - 1).map(|j| -0.7 + 0.02 * j as f64).collect();
        let rn = TridiagonalMatrix::new(vec![1.0; n], sub, sup).unwrap();
        let cc = CouplingCoefficients::new(&rn, 4);
        assert_eq!(cc.alpha(0, 1), 0.0);
        assert_eq!(cc.gamma(0, n), 0.0);
        for r in 1..4u32 {
            let h = 1usize << (r - 1);
            for i in 1..=n {
                if i > h {
                    let rec = cc.alpha(r - 1, i) * cc.alpha(r - 1, i - h);
                    let direct = cc.alpha(r, i);
                    assert!((rec - direct).abs() <= 1e-12 * direct.abs().max(1e-300));
                }
                if i + h <= n {
                    let rec = cc.gamma(r - 1, i) * cc.gamma(r - 1, i + h);
                    let direct = cc.gamma(r, i);
                    assert!((rec - direct).abs() <= 1e-12 * direct.abs().max(1e-300));
                }
            }
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let rn = TridiagonalMatrix::constant(7, -0.3, 1.0, -0.3).unwrap();
        let table = build_zero_table(&rn, 3, 1e-16).unwrap();
        let back = ZeroTable::from_json(&table.to_json().unwrap()).unwrap();
        for ((key, z), (key2, z2)) in table.entries().zip(back.entries()) {
            assert_eq!(key, key2);
            let bits: Vec<u64> = z.iter().map(|v| v.to_bits()).collect();
            let bits2: Vec<u64> = z2.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits, bits2);
        }
        assert!(ZeroTable::from_json(r#"{"0:1": [-1.0]}"#).is_ok());
        assert!(ZeroTable::from_json(r#"{"1:2": [-1.0]}"#).is_err());
        assert!(ZeroTable::from_json(r#"{"x": [-1.0]}"#).is_err());
    }
}
