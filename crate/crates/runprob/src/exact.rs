//! Exact-arithmetic evaluators for the no-run probability `z_n`.
//!
//! Three independent routes produce bit-identical rationals:
//!
//! * [`z_closed_form`] — the alternating binomial sum
//!   `beta_{n,r} = sum_{l=0}^{[n/(r+1)]} (-1)^l C(n-lr, l) (q p^r)^l`
//!   assembled as `z_n = beta_{n,r} - p^r beta_{n-r,r}`;
//! * [`z_recurrence`] — the difference equation
//!   `z_{m+1} = z_m - q p^r z_{m-r}` iterated from its seeds;
//! * [`series_coefficients`] — formal long division of
//!   `U(x) = 1 - p^r x^r` by `V(x) = 1 - x + q p^r x^{r+1}`.
//!
//! Seeds everywhere: `z_0 = ... = z_{r-1} = 1` and `z_r = 1 - p^r`, the values
//! forced by the power-series expansion of `U/V`. Negative-index `beta` is 0
//! by convention so the closed form holds verbatim for `n < r`.

use crate::core::{binomial_exact, Error, Method, MethodResult, Result, RunQuery};
use num::{BigInt, BigRational, One, Signed, Zero};

fn check_params(r: u32, p: &BigRational) -> Result<()> {
    if r < 1 {
        return Err(Error::Domain("run length r must be at least 1".into()));
    }
    if p.is_negative() || p > &BigRational::one() {
        return Err(Error::Domain(format!("p = {p} outside [0, 1]")));
    }
    Ok(())
}

/// `beta_{n,r}`: the coefficient of `x^n` in `1 / (1 - x + q p^r x^{r+1})`.
///
/// Evaluated as the alternating sum over all index pairs `(l, k)` with
/// `r*l + k = n`, `0 <= l <= k`; the summation stops at `l = [n/(r+1)]`.
/// Returns 1 for `n = 0` and 0 for `n < 0` (empty-series convention).
pub fn beta_exact(n: i64, r: u32, p: &BigRational) -> Result<BigRational> {
    check_params(r, p)?;
    if n < 0 {
        return Ok(BigRational::zero());
    }
    Ok(beta_unsigned(n as u64, r, p))
}

fn beta_unsigned(n: u64, r: u32, p: &BigRational) -> BigRational {
    let w = (BigRational::one() - p) * num::pow::pow(p.clone(), r as usize);
    let l_max = n / (r as u64 + 1);
    // Accumulate the numerator over the common denominator d^l_max, so the
    // whole sum needs a single gcd reduction at the end.
    let c = w.numer();
    let d = w.denom();
    let mut d_pow = num::pow::pow(d.clone(), l_max as usize);
    let denom = d_pow.clone();
    let mut c_pow = BigInt::one();
    let mut sum = BigInt::zero();
    for l in 0..=l_max {
        let k = n - l * r as u64;
        let term = binomial_exact(k, l) * &c_pow * &d_pow;
        if l % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        if l < l_max {
            c_pow *= c;
            d_pow /= d; // exact: d_pow is a power of d
        }
    }
    BigRational::new(sum, denom)
}

/// `z_n = beta_{n,r} - p^r beta_{n-r,r}`, the closed-form route.
pub fn z_closed_form(query: &RunQuery) -> Result<MethodResult> {
    let n = query.n();
    let r = query.r();
    let beta_n = beta_unsigned(n, r, query.p());
    let z = match n.checked_sub(r as u64) {
        Some(m) => beta_n - query.p_pow_r() * beta_unsigned(m, r, query.p()),
        None => beta_n,
    };
    Ok(MethodResult::exact(Method::ClosedForm, z))
}

/// `z_n` by iterating the difference equation from its seeds, keeping an
/// O(r) window of scaled numerators.
pub fn z_recurrence(query: &RunQuery) -> Result<MethodResult> {
    let z = ScaledRecurrence::new_z(query.p(), query.r()).nth(query.n());
    Ok(MethodResult::exact(Method::Recurrence, z))
}

/// The sequence `z_0 ... z_{n_max}` from formal long division of `U` by `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesCache {
    coefficients: Vec<BigRational>,
    p: BigRational,
    r: u32,
}

impl SeriesCache {
    pub fn coefficients(&self) -> &[BigRational] {
        &self.coefficients
    }

    pub fn z(&self, m: u64) -> &BigRational {
        &self.coefficients[m as usize]
    }

    pub fn n_max(&self) -> u64 {
        self.coefficients.len() as u64 - 1
    }

    pub fn p(&self) -> &BigRational {
        &self.p
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    /// Result view of one cached coefficient.
    pub fn result_at(&self, m: u64) -> MethodResult {
        MethodResult::exact(Method::Series, self.z(m).clone())
    }
}

/// Expand `G(x) = U(x)/V(x)` to order `n_max`.
///
/// The long-division step `z_m = u_m + z_{m-1} - q p^r z_{m-r-1}` reproduces
/// the difference equation once the numerator coefficients `u_m` are
/// exhausted, so the whole row costs O(n_max * r) big-integer work.
pub fn series_coefficients(p: &BigRational, r: u32, n_max: u64) -> Result<SeriesCache> {
    check_params(r, p)?;
    let coefficients = ScaledRecurrence::new_z(p, r).row(n_max);
    debug_assert!(coefficients
        .windows(2)
        .all(|w| w[1] <= w[0] && !w[1].is_negative()));
    Ok(SeriesCache { coefficients, p: p.clone(), r })
}

/// Coefficients of `1/V(x)` to order `n_max`; index `m` equals
/// `beta_exact(m, r, p)`.
pub fn beta_series_coefficients(p: &BigRational, r: u32, n_max: u64) -> Result<Vec<BigRational>> {
    check_params(r, p)?;
    Ok(ScaledRecurrence::new_beta(p, r).row(n_max))
}

/// Shared engine for the order-(r+1) linear recurrence
/// `e_m = b * e_{m-1} - (b-a) a^r * e_{m-r-1}`
/// over scaled integer numerators `e_m = value_m * b^(m+r)`, where `p = a/b`
/// in lowest terms. Keeping integers avoids a gcd per step; the division by
/// `b^(m+r)` happens once per extracted value.
struct ScaledRecurrence {
    base: BigInt,
    mult: BigInt,
    /// Window of the last r+1 numerators, oldest first:
    /// `window[0] = e_{m-r}, ..., window[r] = e_m`.
    window: Vec<BigInt>,
    /// Index of the most recently produced value.
    m: u64,
    denom_scale: u32,
}

impl ScaledRecurrence {
    /// Seeds for the z-sequence: `z_0..z_{r-1} = 1`, `z_r = 1 - p^r`.
    fn new_z(p: &BigRational, r: u32) -> Self {
        let mut engine = Self::with_unit_seeds(p, r);
        let a = p.numer();
        let b = p.denom();
        // e_r = b^r * (b^r - a^r)
        let b_r = num::pow::pow(b.clone(), r as usize);
        let a_r = num::pow::pow(a.clone(), r as usize);
        *engine.window.last_mut().unwrap() = &b_r * (&b_r - &a_r);
        engine
    }

    /// Seeds for the beta-sequence: `beta_0..beta_r = 1`.
    fn new_beta(p: &BigRational, r: u32) -> Self {
        Self::with_unit_seeds(p, r)
    }

    /// Window filled with `e_m = b^(m+r)` for `m = 0..=r` (all values 1).
    fn with_unit_seeds(p: &BigRational, r: u32) -> Self {
        let a = p.numer().clone();
        let b = p.denom().clone();
        let mult = (&b - &a) * num::pow::pow(a, r as usize);
        let mut window = Vec::with_capacity(r as usize + 1);
        let mut e = num::pow::pow(b.clone(), r as usize);
        for _ in 0..=r {
            window.push(e.clone());
            e *= &b;
        }
        ScaledRecurrence { base: b, mult, window, m: r as u64, denom_scale: r }
    }

    fn value_at(&self, m: u64, numerator: BigInt) -> BigRational {
        let denom = num::pow::pow(self.base.clone(), (m + self.denom_scale as u64) as usize);
        BigRational::new(numerator, denom)
    }

    fn current(&self) -> BigRational {
        self.value_at(self.m, self.window.last().unwrap().clone())
    }

    fn step(&mut self) {
        let next = &self.base * self.window.last().unwrap() - &self.mult * &self.window[0];
        self.window.remove(0);
        self.window.push(next);
        self.m += 1;
    }

    /// Value at index `n`, seeds included. Consumes the engine: the window
    /// only moves forward.
    fn nth(mut self, n: u64) -> BigRational {
        if n < self.denom_scale as u64 {
            return BigRational::one();
        }
        while self.m < n {
            self.step();
        }
        self.current()
    }

    /// Values at indices `0..=n_max`.
    fn row(mut self, n_max: u64) -> Vec<BigRational> {
        let r = self.denom_scale as u64;
        let mut out = Vec::with_capacity(n_max as usize + 1);
        for m in 0..=n_max {
            if m < r {
                out.push(BigRational::one());
            } else {
                while self.m < m {
                    self.step();
                }
                out.push(self.current());
            }
        }
        out
    }
}

/// One term of the expanded beta sum, for inspection and testing.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaTerm {
    pub l: u64,
    pub k: u64,
    pub value: BigRational,
}

/// The fully enumerated beta sum: every index pair `(l, k)` with
/// `r*l + k = n`, `0 <= l <= k`, together with its term value.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaExpansion {
    pub n: u64,
    pub r: u32,
    pub l_max: u64,
    pub terms: Vec<BetaTerm>,
}

impl BetaExpansion {
    pub fn new(n: u64, r: u32, p: &BigRational) -> Result<Self> {
        check_params(r, p)?;
        let w = (BigRational::one() - p) * num::pow::pow(p.clone(), r as usize);
        let l_max = n / (r as u64 + 1);
        let mut w_pow = BigRational::one();
        let mut terms = Vec::with_capacity(l_max as usize + 1);
        for l in 0..=l_max {
            let k = n - l * r as u64;
            let mut value = BigRational::from(binomial_exact(k, l)) * &w_pow;
            if l % 2 == 1 {
                value = -value;
            }
            terms.push(BetaTerm { l, k, value });
            if l < l_max {
                w_pow *= &w;
            }
        }
        Ok(BetaExpansion { n, r, l_max, terms })
    }

    pub fn value(&self) -> BigRational {
        self.terms.iter().map(|t| &t.value).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::parse_probability;
    use num::ToPrimitive;

    fn rat(s: &str) -> BigRational {
        parse_probability(s).unwrap()
    }

    fn query(p: &str, r: u32, n: u64) -> RunQuery {
        RunQuery::parse(p, r, n).unwrap()
    }

    fn z_cf(p: &str, r: u32, n: u64) -> BigRational {
        z_closed_form(&query(p, r, n))
            .unwrap()
            .z
            .exact()
            .unwrap()
            .clone()
    }

    #[test]
    fn beta_examples() {
        assert_eq!(beta_exact(3, 2, &rat("1/2")).unwrap(), rat("7/8"));
        assert_eq!(beta_exact(1, 2, &rat("1/2")).unwrap(), BigRational::one());
        assert_eq!(beta_exact(-1, 3, &rat("1/3")).unwrap(), BigRational::zero());
        assert_eq!(beta_exact(0, 4, &rat("2/3")).unwrap(), BigRational::one());
        assert!(beta_exact(3, 0, &rat("1/2")).is_err());
        assert!(beta_exact(3, 2, &rat("3/2")).is_err());
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(z_cf("1/2", 2, 3), rat("5/8"));
        assert_eq!(z_cf("1/2", 3, 4), rat("13/16"));
        assert_eq!(z_cf("2/3", 2, 3), rat("11/27"));
        assert_eq!(z_cf("1/2", 5, 5), rat("31/32"));
        // extra points frozen from exhaustive enumeration
        assert_eq!(z_cf("1/3", 2, 5), rat("164/243"));
        assert_eq!(z_cf("9/10", 3, 7), rat("325441/10000000"));
        assert_eq!(z_cf("1/10", 2, 6), rat("954261/1000000"));
    }

    #[test]
    fn closed_form_below_and_at_run_length() {
        assert_eq!(z_cf("1/2", 4, 0), BigRational::one());
        assert_eq!(z_cf("1/2", 4, 3), BigRational::one());
        assert_eq!(z_cf("1/2", 4, 4), rat("15/16"));
        // degenerate endpoints flow through the general formula unchanged
        assert_eq!(z_cf("0", 2, 9), BigRational::one());
        assert_eq!(z_cf("1", 3, 2), BigRational::one());
        assert_eq!(z_cf("1", 3, 3), BigRational::zero());
    }

    #[test]
    fn recurrence_examples() {
        let z = |p: &str, r, n| {
            z_recurrence(&query(p, r, n))
                .unwrap()
                .z
                .exact()
                .unwrap()
                .clone()
        };
        assert_eq!(z("1/2", 2, 3), rat("5/8"));
        assert_eq!(z("1/2", 2, 1), BigRational::one());
        assert_eq!(z("1/2", 2, 4), rat("1/2"));
        assert_eq!(z("1/2", 2, 2), rat("3/4"));
        assert_eq!(z("1", 1, 5), BigRational::zero());
    }

    #[test]
    fn series_examples() {
        let row = |p: &str, r, n_max| {
            series_coefficients(&rat(p), r, n_max)
                .unwrap()
                .coefficients()
                .to_vec()
        };
        assert_eq!(
            row("1/2", 2, 4),
            ["1", "1", "3/4", "5/8", "1/2"].map(rat)
        );
        assert_eq!(row("1", 1, 2), ["1", "0", "0"].map(rat));
        assert_eq!(row("0", 3, 2), ["1", "1", "1"].map(rat));
        assert_eq!(
            row("1/2", 2, 10),
            ["1", "1", "3/4", "5/8", "1/2", "13/32", "21/64", "17/64", "55/256", "89/512", "9/64"]
                .map(rat)
        );
    }

    #[test]
    fn beta_series_examples_and_agreement() {
        let row = beta_series_coefficients(&rat("1/2"), 2, 3).unwrap();
        assert_eq!(row, ["1", "1", "1", "7/8"].map(rat));
        assert_eq!(
            beta_series_coefficients(&rat("0"), 2, 3).unwrap(),
            ["1", "1", "1", "1"].map(rat)
        );
        assert_eq!(
            beta_series_coefficients(&rat("1"), 1, 3).unwrap(),
            ["1", "1", "1", "1"].map(rat)
        );
        for (p, r) in [("1/2", 2), ("1/3", 3), ("9/10", 4), ("2/3", 1)] {
            let p = rat(p);
            let row = beta_series_coefficients(&p, r, 60).unwrap();
            for (m, val) in row.iter().enumerate() {
                assert_eq!(val, &beta_exact(m as i64, r, &p).unwrap(), "p={p} r={r} m={m}");
            }
        }
    }

    #[test]
    fn three_routes_agree_bit_exactly() {
        for p in ["1/3", "9/10", "1/10"] {
            for r in [1u32, 3] {
                let cache = series_coefficients(&rat(p), r, 40).unwrap();
                for n in 0..=40u64 {
                    let a = z_cf(p, r, n);
                    let b = z_recurrence(&query(p, r, n)).unwrap();
                    assert_eq!(&a, b.z.exact().unwrap(), "p={p} r={r} n={n}");
                    assert_eq!(&a, cache.z(n), "p={p} r={r} n={n}");
                }
            }
        }
    }

    #[test]
    fn closed_form_matches_series_at_large_n() {
        for (p, r) in [("1/2", 2), ("9/10", 10), ("2/3", 5)] {
            let cache = series_coefficients(&rat(p), r, 2000).unwrap();
            for n in [500u64, 1000, 2000] {
                assert_eq!(&z_cf(p, r, n), cache.z(n), "p={p} r={r} n={n}");
            }
        }
    }

    #[test]
    fn difference_equation_residual_is_zero() {
        for (p, r) in [("1/2", 2u32), ("1/3", 1), ("9/10", 5)] {
            let w = query(p, r, 0).qpr();
            // build the row from the closed form so the residual check is a
            // genuine identity test, not an echo of the series engine
            let row: Vec<BigRational> = (0..=40).map(|n| z_cf(p, r, n)).collect();
            for m in r as usize..40 {
                let residual = &row[m + 1] - &row[m] + &w * &row[m - r as usize];
                assert!(residual.is_zero(), "p={p} r={r} m={m}");
            }
        }
    }

    #[test]
    fn generating_identity_truncated_product() {
        // (1 - x + q p^r x^{r+1}) * sum z_m x^m  ==  1 - p^r x^r through n_max
        for (p, r) in [("1/2", 2u32), ("2/3", 3), ("1/10", 1)] {
            let pr = rat(p);
            let n_max = 60u64;
            let cache = series_coefficients(&pr, r, n_max).unwrap();
            let w = query(p, r, 0).qpr();
            let p_r = num::pow::pow(pr.clone(), r as usize);
            for j in 0..=n_max as usize {
                let mut c = cache.coefficients()[j].clone();
                if j >= 1 {
                    c -= &cache.coefficients()[j - 1];
                }
                if j >= r as usize + 1 {
                    c += &w * &cache.coefficients()[j - r as usize - 1];
                }
                let expected = if j == 0 {
                    BigRational::one()
                } else if j == r as usize {
                    -p_r.clone()
                } else {
                    BigRational::zero()
                };
                assert_eq!(c, expected, "p={p} r={r} coeff {j}");
            }
        }
    }

    #[test]
    fn theorem_assembly_termwise() {
        // z_m == beta_m - p^r beta_{m-r} for every m, from the series rows
        for (p, r) in [("1/2", 2u32), ("1/3", 4)] {
            let pr = rat(p);
            let zs = series_coefficients(&pr, r, 50).unwrap();
            let bs = beta_series_coefficients(&pr, r, 50).unwrap();
            let p_r = num::pow::pow(pr.clone(), r as usize);
            for m in 0..=50usize {
                let expect = if m >= r as usize {
                    &bs[m] - &p_r * &bs[m - r as usize]
                } else {
                    bs[m].clone()
                };
                assert_eq!(zs.coefficients()[m], expect, "p={p} r={r} m={m}");
            }
        }
    }

    #[test]
    fn fibonacci_specialization() {
        // for p=1/2, r=2: z_n * 2^n is the Fibonacci number F(n+2)
        let mut fib = vec![BigInt::zero(), BigInt::one()];
        for i in 2..=70 {
            let next = &fib[i - 1] + &fib[i - 2];
            fib.push(next);
        }
        assert_eq!(fib[62].to_u64(), Some(4052739537881));
        let cache = series_coefficients(&rat("1/2"), 2, 60).unwrap();
        for n in 0..=60usize {
            let scaled = &cache.coefficients()[n] * BigRational::from(BigInt::from(2u32).pow(n as u32));
            assert_eq!(scaled, BigRational::from(fib[n + 2].clone()), "n={n}");
        }
    }

    #[test]
    fn series_row_monotone_and_in_range() {
        for (p, r) in [("1/10", 1u32), ("9/10", 2), ("1/2", 6)] {
            let cache = series_coefficients(&rat(p), r, 120).unwrap();
            let cs = cache.coefficients();
            assert_eq!(cs[0], BigRational::one());
            for m in 0..cs.len() {
                assert!(!cs[m].is_negative() && cs[m] <= BigRational::one());
                if m > 0 {
                    assert!(cs[m] <= cs[m - 1], "not monotone at {m}");
                }
            }
        }
    }

    #[test]
    fn expansion_enumerates_exact_pair_set() {
        for (n, r) in [(17u64, 2u32), (30, 4), (9, 9), (0, 3), (5, 1)] {
            let exp = BetaExpansion::new(n, r, &rat("1/3")).unwrap();
            assert_eq!(exp.l_max, n / (r as u64 + 1));
            assert_eq!(exp.terms.len() as u64, exp.l_max + 1);
            for (i, t) in exp.terms.iter().enumerate() {
                assert_eq!(t.l, i as u64);
                assert_eq!(t.l * r as u64 + t.k, n, "pair constraint");
                assert!(t.l <= t.k, "l <= k");
            }
            assert_eq!(exp.value(), beta_exact(n as i64, r, &rat("1/3")).unwrap());
        }
    }

    #[test]
    fn excluded_pair_contributes_zero() {
        // the pair (l, k) = (n, 0) would add (-1)^n C(0, n) w^n, which is 0
        for n in 1..=6u64 {
            assert!(binomial_exact(0, n).is_zero());
        }
    }
}
