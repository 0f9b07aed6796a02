//! Domain types and exact-arithmetic primitives shared by every evaluator.
//!
//! Probabilities are carried as arbitrary-precision rationals so that the
//! exact evaluators can agree bit-for-bit. A query is the triple `(p, r, n)`:
//! success probability `p`, required run length `r`, number of trials `n`.
//! Throughout the crate `y_n` is the probability that a run of at least `r`
//! consecutive successes occurs somewhere in `n` trials, and `z_n = 1 - y_n`
//! its complement.

use num::bigint::Sign;
use num::{BigInt, BigRational, BigUint, One, Signed, Zero};
use std::fmt;
use std::str::FromStr;

/// Slack admitted on float-mode results before a value is rejected as out of
/// range. Float methods may legitimately land a few ulp outside [0,1]; a
/// value further out is reported as an error, never clamped.
pub const RANGE_SLACK: f64 = 1e-9;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("root iteration did not converge within {sweeps} sweeps (worst residual {residual:.3e})")]
    Convergence { sweeps: u32, residual: f64 },
    #[error("kernel polynomial degenerates for p in {{0, 1}}; use an exact method instead")]
    DegenerateKernel,
    #[error("kernel roots too close for partial fractions (min separation {min_separation:.3e}); fall back to recurrence or matrix_power")]
    IllConditioned { min_separation: f64 },
    #[error("dominant root modulus gap {gap:.3e} too small for a one-term estimate; fall back to spectral or recurrence")]
    Dominance { gap: f64 },
    #[error("n = {n} exceeds the exhaustive enumeration cap {cap}; fall back to closed_form")]
    CapExceeded { n: u64, cap: u64 },
    #[error("computed value {0} lies outside [0, 1]")]
    OutOfRange(f64),
    #[error("imaginary residue {0:.3e} of the spectral sum exceeds tolerance")]
    ImaginaryResidue(f64),
    #[error("float accuracy not certifiable: {0}")]
    PrecisionLoss(String),
}

impl Error {
    fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

/// Parse a probability given either as an exact rational (`"1/2"`) or as a
/// decimal literal (`"0.35"`), converted exactly as a power-of-ten fraction.
///
/// Range is not checked here; [`RunQuery::new`] rejects values outside [0, 1].
pub fn parse_probability(s: &str) -> Result<BigRational> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::domain("empty probability literal"));
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = BigInt::from_str(num.trim())
            .map_err(|_| Error::domain(format!("bad rational numerator in {s:?}")))?;
        let den = BigInt::from_str(den.trim())
            .map_err(|_| Error::domain(format!("bad rational denominator in {s:?}")))?;
        if den.is_zero() {
            return Err(Error::domain("zero denominator"));
        }
        return Ok(BigRational::new(num, den));
    }
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(Error::domain(format!("bad decimal literal {s:?}")));
    }
    let digits: String = int_part.chars().chain(frac_part.chars()).collect();
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::domain(format!("bad decimal literal {s:?}")));
    }
    let num = BigInt::parse_bytes(digits.as_bytes(), 10)
        .ok_or_else(|| Error::domain(format!("bad decimal literal {s:?}")))?;
    let den = BigInt::from(10u32).pow(frac_part.len() as u32);
    Ok(BigRational::new(BigInt::from(sign) * num, den))
}

/// Convert an exact rational to the nearest `f64`, within a couple of ulp.
///
/// Works for arbitrarily large numerators and denominators: the quotient is
/// first reduced to a 64-bit significand and a binary exponent. Values below
/// the subnormal range flush to signed zero; values beyond the range give
/// signed infinity.
pub fn to_f64_lossy(x: &BigRational) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let negative = x.numer().sign() == Sign::Minus;
    let num = x.numer().magnitude();
    let den = x.denom().magnitude();
    let exp_estimate = num.bits() as i64 - den.bits() as i64;
    let signed = |v: f64| if negative { -v } else { v };
    if exp_estimate > 1100 {
        return signed(f64::INFINITY);
    }
    if exp_estimate < -1100 {
        return signed(0.0);
    }
    // Shift so the integer quotient keeps ~64 significant bits, then scale back.
    let shift = 64 - exp_estimate;
    let q: BigUint = if shift >= 0 {
        (num << shift as u64) / den
    } else {
        num / (den << (-shift) as u64)
    };
    let mut v = match q.to_u64_digits().as_slice() {
        [] => 0.0,
        digits => {
            let mut acc = 0.0;
            for &d in digits.iter().rev() {
                acc = acc * 18446744073709551616.0 + d as f64;
            }
            acc
        }
    };
    v = ldexp(v, -shift);
    signed(v)
}

/// `x * 2^e` with `e` allowed outside the single-step `powi` range.
fn ldexp(mut x: f64, mut e: i64) -> f64 {
    while e > 0 {
        let step = e.min(1000);
        x *= 2f64.powi(step as i32);
        e -= step;
        if x.is_infinite() {
            return x;
        }
    }
    while e < 0 {
        let step = (-e).min(1000);
        x *= 2f64.powi(-(step as i32));
        e += step;
        if x == 0.0 {
            return x;
        }
    }
    x
}

/// Exact binomial coefficient C(a, b); zero when `b > a`.
pub fn binomial_exact(a: u64, b: u64) -> BigInt {
    if b > a {
        return BigInt::zero();
    }
    let b = b.min(a - b);
    let mut acc = BigInt::one();
    for i in 1..=b {
        // The running product of i consecutive integers is divisible by i!.
        acc = acc * BigInt::from(a - b + i) / BigInt::from(i);
    }
    acc
}

/// Which evaluator produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    ClosedForm,
    Recurrence,
    Series,
    Spectral,
    Asymptotic,
    MatrixPower,
    BruteForce,
    MonteCarlo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::Recurrence => "recurrence",
            Method::Series => "series",
            Method::Spectral => "spectral",
            Method::Asymptotic => "asymptotic",
            Method::MatrixPower => "matrix_power",
            Method::BruteForce => "brute_force",
            Method::MonteCarlo => "monte_carlo",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "closed_form" => Method::ClosedForm,
            "recurrence" => Method::Recurrence,
            "series" => Method::Series,
            "spectral" => Method::Spectral,
            "asymptotic" => Method::Asymptotic,
            "matrix_power" => Method::MatrixPower,
            "brute_force" => Method::BruteForce,
            "monte_carlo" => Method::MonteCarlo,
            other => return Err(Error::domain(format!("unknown method {other:?}"))),
        })
    }
}

/// Arithmetic mode of a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Exact,
    Float,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Exact => "exact",
            Mode::Float => "float",
        })
    }
}

/// A probability carried either exactly or in double precision.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbabilityValue {
    Exact(BigRational),
    Float(f64),
}

impl ProbabilityValue {
    pub fn as_f64(&self) -> f64 {
        match self {
            ProbabilityValue::Exact(v) => to_f64_lossy(v),
            ProbabilityValue::Float(v) => *v,
        }
    }

    pub fn exact(&self) -> Option<&BigRational> {
        match self {
            ProbabilityValue::Exact(v) => Some(v),
            ProbabilityValue::Float(_) => None,
        }
    }
}

/// A computed `(z_n, y_n)` pair tagged with the method and arithmetic mode
/// that produced it.
///
/// `y + z = 1` exactly in `Exact` mode and to ulp scale in `Float` mode;
/// out-of-range float values are rejected at construction, never clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub z: ProbabilityValue,
    pub y: ProbabilityValue,
    pub method: Method,
    pub mode: Mode,
    /// Absolute error bound, when the method can state one. Exact results
    /// and methods without a bound leave this empty.
    pub error_bound: Option<f64>,
}

impl MethodResult {
    pub fn exact(method: Method, z: BigRational) -> Self {
        debug_assert!(!z.is_negative() && z <= BigRational::one(), "exact z out of range");
        let y = BigRational::one() - &z;
        MethodResult {
            z: ProbabilityValue::Exact(z),
            y: ProbabilityValue::Exact(y),
            method,
            mode: Mode::Exact,
            error_bound: None,
        }
    }

    pub fn try_float(method: Method, z: f64, error_bound: Option<f64>) -> Result<Self> {
        if !z.is_finite() || z < -RANGE_SLACK || z > 1.0 + RANGE_SLACK {
            return Err(Error::OutOfRange(z));
        }
        Ok(MethodResult {
            z: ProbabilityValue::Float(z),
            y: ProbabilityValue::Float(1.0 - z),
            method,
            mode: Mode::Float,
            error_bound,
        })
    }

    pub fn z_f64(&self) -> f64 {
        self.z.as_f64()
    }

    pub fn y_f64(&self) -> f64 {
        self.y.as_f64()
    }
}

/// One problem instance: success probability `p`, run length `r`, trials `n`.
///
/// Construction validates `0 <= p <= 1` and `r >= 1`; instances are immutable
/// afterwards, so every evaluator can trust the invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct RunQuery {
    p: BigRational,
    r: u32,
    n: u64,
}

impl RunQuery {
    pub fn new(p: BigRational, r: u32, n: u64) -> Result<Self> {
        if p.is_negative() || p > BigRational::one() {
            return Err(Error::domain(format!("p = {p} outside [0, 1]")));
        }
        if r < 1 {
            return Err(Error::domain("run length r must be at least 1"));
        }
        Ok(RunQuery { p, r, n })
    }

    /// Convenience constructor parsing `p` from a string literal.
    pub fn parse(p: &str, r: u32, n: u64) -> Result<Self> {
        RunQuery::new(parse_probability(p)?, r, n)
    }

    pub fn p(&self) -> &BigRational {
        &self.p
    }

    /// Failure probability `q = 1 - p`.
    pub fn q(&self) -> BigRational {
        BigRational::one() - &self.p
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// `p^r`, exactly.
    pub fn p_pow_r(&self) -> BigRational {
        num::pow::pow(self.p.clone(), self.r as usize)
    }

    /// The recurrence coefficient `q * p^r`.
    pub fn qpr(&self) -> BigRational {
        self.q() * self.p_pow_r()
    }

    /// Same query at a different trial count.
    pub fn with_n(&self, n: u64) -> RunQuery {
        RunQuery { p: self.p.clone(), r: self.r, n }
    }
}

/// Short-circuit value for the degenerate probabilities.
///
/// `p = 0` makes a run impossible (`z_n = 1`); `p = 1` makes it certain as
/// soon as `n >= r`. Returns `None` for interior `p`, where the general
/// formulas apply.
pub fn degenerate_z(query: &RunQuery) -> Option<BigRational> {
    if query.p().is_zero() {
        Some(BigRational::one())
    } else if query.p() == &BigRational::one() {
        if query.n() < query.r() as u64 {
            Some(BigRational::one())
        } else {
            Some(BigRational::zero())
        }
    } else {
        None
    }
}
