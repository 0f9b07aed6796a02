//! Floating-point evaluators: stable closed form, spectral partial fractions
//! over the kernel roots, the one-term dominant-root asymptotic, and a
//! companion-matrix fast power for very large `n`.
//!
//! Everything here is double precision. The closed form certifies its own
//! accuracy with an a-priori error bound and transparently re-evaluates in
//! exact arithmetic when the alternating sum is too ill-conditioned for
//! doubles; the spectral and asymptotic paths refuse outright (with a
//! dedicated error) when the kernel roots are too close for partial
//! fractions to be trustworthy.

pub mod stable;

mod roots;

use crate::core::{degenerate_z, to_f64_lossy, Error, Method, MethodResult, Result, RunQuery};
use crate::exact;
use num::complex::Complex64;
use stable::{cpow_u64, ln_choose, pow_u64, KahanSum};

const EPS: f64 = f64::EPSILON;

/// Roots closer than this fraction of the largest root modulus are treated
/// as (near-)multiple: partial fractions with simple poles no longer apply.
pub const SEPARATION_THRESHOLD: f64 = 1e-6;

/// Fast-path results are accepted only when the error bound certifies this
/// many digits of headroom against the result itself.
const CERTIFY_RATIO: f64 = 1e-11;

/// Largest `n` for which the closed-form evaluator will fall back to exact
/// arithmetic when doubles cannot certify the target accuracy.
const ESCALATION_MAX_N: u64 = 50_000;

/// Below this `n` an escalated evaluation uses the beta sum directly;
/// above it, the (identical-valued) scaled recurrence is far cheaper.
const ESCALATION_DIRECT_MAX_N: u64 = 600;

/// Float coefficient vectors for `U(x) = 1 - p^r x^r` (numerator) and
/// `V(x) = 1 - x + q p^r x^{r+1}` (kernel), lowest degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelPolynomials {
    u_coeffs: Vec<f64>,
    v_coeffs: Vec<f64>,
    p: f64,
    q: f64,
    r: u32,
}

impl KernelPolynomials {
    /// Build from a validated query; `p` must be interior (the kernel
    /// degenerates to lower degree at `p = 0` and `p = 1`).
    pub fn from_query(query: &RunQuery) -> Result<Self> {
        if degenerate_z(query).is_some() {
            return Err(Error::DegenerateKernel);
        }
        Self::from_parts(to_f64_lossy(query.p()), query.r())
    }

    pub fn from_parts(p: f64, r: u32) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::DegenerateKernel);
        }
        if r < 1 {
            return Err(Error::Domain("run length r must be at least 1".into()));
        }
        let q = 1.0 - p;
        let p_r = pow_u64(p, r as u64);
        let w = q * p_r;
        let mut u_coeffs = vec![0.0; r as usize + 1];
        u_coeffs[0] = 1.0;
        u_coeffs[r as usize] = -p_r;
        let mut v_coeffs = vec![0.0; r as usize + 2];
        v_coeffs[0] = 1.0;
        v_coeffs[1] += -1.0; // += so that r = 1 keeps both contributions visible
        v_coeffs[r as usize + 1] += w;
        Ok(KernelPolynomials { u_coeffs, v_coeffs, p, q, r })
    }

    pub fn u_coeffs(&self) -> &[f64] {
        &self.u_coeffs
    }

    pub fn v_coeffs(&self) -> &[f64] {
        &self.v_coeffs
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    /// The recurrence coefficient `q p^r`.
    pub fn w(&self) -> f64 {
        self.v_coeffs[self.r as usize + 1]
    }

    fn kernel(&self) -> roots::Kernel {
        roots::Kernel { r: self.r, p_r: -self.u_coeffs[self.r as usize], w: self.w() }
    }
}

/// Conditioning verdict on the root set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionFlag {
    WellSeparated,
    NearMultiple,
}

impl std::fmt::Display for ConditionFlag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ConditionFlag::WellSeparated => "well_separated",
            ConditionFlag::NearMultiple => "near_multiple",
        })
    }
}

/// The r+1 kernel roots (ascending modulus; modulus ties broken by ascending
/// argument) with their partial-fraction residues
/// `rho_k = -U(x_k) / V'(x_k)` and conditioning diagnostics.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    roots: Vec<Complex64>,
    residues: Vec<Complex64>,
    min_root_separation: f64,
    condition_flag: ConditionFlag,
    r: u32,
}

impl SpectralDecomposition {
    pub fn roots(&self) -> &[Complex64] {
        &self.roots
    }

    pub fn residues(&self) -> &[Complex64] {
        &self.residues
    }

    pub fn min_root_separation(&self) -> f64 {
        self.min_root_separation
    }

    pub fn condition_flag(&self) -> ConditionFlag {
        self.condition_flag
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    #[cfg(test)]
    fn from_raw(roots: Vec<Complex64>, residues: Vec<Complex64>, r: u32) -> Self {
        let min_root_separation = min_pairwise_distance(&roots);
        SpectralDecomposition {
            roots,
            residues,
            min_root_separation,
            condition_flag: ConditionFlag::WellSeparated,
            r,
        }
    }
}

fn min_pairwise_distance(roots: &[Complex64]) -> f64 {
    let mut min = f64::INFINITY;
    for i in 0..roots.len() {
        for j in i + 1..roots.len() {
            min = min.min((roots[i] - roots[j]).norm());
        }
    }
    min
}

/// Solve `V(x) = 0` for all r+1 roots and attach residues.
///
/// Near-multiple root sets are returned (the diagnostics are still useful)
/// but flagged, and the evaluators that need simple poles refuse them.
pub fn solve_kernel_roots(k: &KernelPolynomials) -> Result<SpectralDecomposition> {
    let kernel = k.kernel();
    let mut roots = roots::solve(&kernel)?;
    let max_modulus = roots.iter().map(|x| x.norm()).fold(0.0, f64::max);

    // Roots of a real-coefficient polynomial: snap stray imaginary dust to
    // the axis, then average almost-conjugate pairs so the pair is exactly
    // conjugate and the modulus sort below is deterministic.
    for x in roots.iter_mut() {
        if x.im != 0.0 && x.im.abs() <= 1e-9 * max_modulus {
            *x = Complex64::new(x.re, 0.0);
        }
    }
    pair_conjugates(&mut roots, max_modulus);
    recenter_root_clusters(&mut roots, max_modulus, k);
    roots.sort_by(|a, b| {
        (a.norm(), a.arg())
            .partial_cmp(&(b.norm(), b.arg()))
            .expect("kernel roots are finite")
    });

    let residues: Vec<Complex64> = roots
        .iter()
        .map(|&x| -kernel.u(x) / kernel.v_prime(x))
        .collect();
    let min_root_separation = min_pairwise_distance(&roots);
    let condition_flag = if min_root_separation < SEPARATION_THRESHOLD * max_modulus {
        ConditionFlag::NearMultiple
    } else {
        ConditionFlag::WellSeparated
    };

    for x in &roots {
        let scale = pow_u64(x.norm(), k.r as u64 + 1).max(1.0);
        if !(kernel.v(*x).norm() <= 1e-10 * scale) {
            return Err(Error::Convergence {
                sweeps: roots::MAX_SWEEPS,
                residual: kernel.v(*x).norm() / scale,
            });
        }
    }
    // Partial-fraction sanity: the residues must rebuild z_0 = 1.
    let recon: Complex64 = roots
        .iter()
        .zip(&residues)
        .map(|(x, rho)| rho / x)
        .sum();
    if !((recon.re - 1.0).abs() <= 1e-6 && recon.im.abs() <= 1e-6) {
        return Err(Error::PrecisionLoss(format!(
            "partial fractions rebuild z_0 = {recon} instead of 1"
        )));
    }

    Ok(SpectralDecomposition { roots, residues, min_root_separation, condition_flag, r: k.r })
}

fn pair_conjugates(roots: &mut [Complex64], max_modulus: f64) {
    let n = roots.len();
    let mut used = vec![false; n];
    for i in 0..n {
        if used[i] || roots[i].im <= 0.0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if j == i || used[j] || roots[j].im >= 0.0 {
                continue;
            }
            let dist = (roots[j] - roots[i].conj()).norm();
            if best.map_or(true, |(_, d)| dist < d) {
                best = Some((j, dist));
            }
        }
        if let Some((j, dist)) = best {
            if dist <= 1e-6 * max_modulus {
                let avg = 0.5 * (roots[i] + roots[j].conj());
                roots[i] = avg;
                roots[j] = avg.conj();
                used[i] = true;
                used[j] = true;
            }
        }
    }
}

/// Members of a nearly-multiple real pair each carry convergence noise of
/// order sqrt(eps), and the pair can drift to one side of the true double
/// root. The centroid, however, is pinned by Newton's identity: the sum of
/// all roots equals `-c_r / c_{r+1}` exactly. Moving the cluster so the
/// total matches that identity restores machine accuracy to aggregate
/// quantities (root product, coefficient reconstruction); well-separated
/// roots are left untouched.
fn recenter_root_clusters(roots: &mut [Complex64], max_modulus: f64, k: &KernelPolynomials) {
    let n = roots.len();
    let mut clustered: Vec<usize> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if (roots[i] - roots[j]).norm() <= 1e-4 * max_modulus {
                for idx in [i, j] {
                    if !clustered.contains(&idx) {
                        clustered.push(idx);
                    }
                }
            }
        }
    }
    if clustered.is_empty() {
        return;
    }
    let deg = k.r as usize + 1;
    let exact_sum = -k.v_coeffs()[deg - 1] / k.v_coeffs()[deg];
    let computed_sum: f64 = roots.iter().map(|x| x.re).sum();
    let shift = (exact_sum - computed_sum) / clustered.len() as f64;
    for &idx in &clustered {
        roots[idx] += shift; // real shift, so conjugate pairs stay conjugate
    }
    // equalize real pairs about the (now accurate) midpoint
    for a in 0..clustered.len() {
        for b in a + 1..clustered.len() {
            let (i, j) = (clustered[a], clustered[b]);
            if roots[i].im == 0.0
                && roots[j].im == 0.0
                && (roots[i].re - roots[j].re).abs() <= 1e-4 * max_modulus
            {
                let mid = 0.5 * (roots[i].re + roots[j].re);
                let half = 0.5 * (roots[i].re - roots[j].re).abs();
                roots[i] = Complex64::new(mid + half, 0.0);
                roots[j] = Complex64::new(mid - half, 0.0);
            }
        }
    }
}

/// `z_n` as the real part of `sum_k rho_k / x_k^{n+1}`.
///
/// Requires well-separated roots; the conjugate structure makes the
/// imaginary part cancel, and a leftover above 1e-9 is reported as an error
/// rather than discarded.
pub fn z_spectral(query: &RunQuery, s: &SpectralDecomposition) -> Result<MethodResult> {
    debug_assert_eq!(query.r(), s.r, "decomposition built for a different r");
    if s.condition_flag == ConditionFlag::NearMultiple {
        return Err(Error::IllConditioned { min_separation: s.min_root_separation });
    }
    let n = query.n();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut abs_sum = 0.0;
    for (x, rho) in s.roots.iter().zip(&s.residues) {
        let term = rho * cpow_u64(x.finv(), n + 1);
        sum += term;
        abs_sum += term.norm();
    }
    if sum.im.abs() > 1e-9 {
        return Err(Error::ImaginaryResidue(sum.im));
    }
    // Root and residue relative errors are machine-level; raising to the
    // (n+1)-th power scales them by about n+1.
    let bound = (n as f64 + 11.0) * 1e-15 * abs_sum;
    MethodResult::try_float(Method::Spectral, sum.re, Some(bound))
}

/// One-term estimate `z_n ~ rho_1 / x_1^{n+1}` from the dominant root alone.
///
/// The error bound is the truncation bound `r * max_{k>=2} |rho_k| / |x_2|^{n+1}`;
/// all discarded terms decay at least that fast.
pub fn z_asymptotic(query: &RunQuery, s: &SpectralDecomposition) -> Result<MethodResult> {
    debug_assert_eq!(query.r(), s.r, "decomposition built for a different r");
    if s.condition_flag == ConditionFlag::NearMultiple {
        return Err(Error::IllConditioned { min_separation: s.min_root_separation });
    }
    let x1 = s.roots[0];
    if x1.im != 0.0 || x1.re <= 1.0 {
        return Err(Error::PrecisionLoss(format!(
            "dominant kernel root {x1} is not real and greater than 1"
        )));
    }
    let gap = s.roots[1].norm() - x1.norm();
    if gap < 1e-9 {
        return Err(Error::Dominance { gap });
    }
    let n = query.n();
    let z = s.residues[0].re / pow_u64(x1.re, n + 1);
    let max_subdominant = s.residues[1..]
        .iter()
        .map(|rho| rho.norm())
        .fold(0.0, f64::max);
    let bound = s.r as f64 * max_subdominant / pow_u64(s.roots[1].norm(), n + 1);
    MethodResult::try_float(Method::Asymptotic, z, Some(bound))
}

/// `z_n` via the companion matrix of the difference equation raised to the
/// (n - r)-th power by repeated squaring: O(r^3 log n) flops, no iteration
/// over n, so it stays cheap for astronomically many trials.
pub fn z_matrix_power(query: &RunQuery) -> Result<MethodResult> {
    if let Some(z) = degenerate_z(query) {
        return MethodResult::try_float(Method::MatrixPower, to_f64_lossy(&z), None);
    }
    let r = query.r();
    let n = query.n();
    let p = to_f64_lossy(query.p());
    let p_r = pow_u64(p, r as u64);
    if n < r as u64 {
        return MethodResult::try_float(Method::MatrixPower, 1.0, None);
    }
    if n == r as u64 {
        return MethodResult::try_float(Method::MatrixPower, 1.0 - p_r, None);
    }
    let w = (1.0 - p) * p_r;
    let transition = SquareMatrix::companion(r as usize, w);
    let power = transition.pow(n - r as u64);
    // seed state (z_r, z_{r-1}, ..., z_0)
    let mut seed = vec![1.0; r as usize + 1];
    seed[0] = 1.0 - p_r;
    let z = power.row_dot(0, &seed);
    MethodResult::try_float(Method::MatrixPower, z, None)
}

#[derive(Debug, Clone)]
struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    fn identity(dim: usize) -> Self {
        let mut m = SquareMatrix { dim, data: vec![0.0; dim * dim] };
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    /// Companion matrix of `z_{m+1} = z_m - w z_{m-r}` acting on the state
    /// `(z_m, z_{m-1}, ..., z_{m-r})`.
    fn companion(r: usize, w: f64) -> Self {
        let dim = r + 1;
        let mut m = SquareMatrix { dim, data: vec![0.0; dim * dim] };
        m.data[0] = 1.0;
        m.data[r] = -w;
        for i in 1..dim {
            m.data[i * dim + i - 1] = 1.0;
        }
        m
    }

    fn mul(&self, other: &SquareMatrix) -> SquareMatrix {
        let dim = self.dim;
        let mut out = SquareMatrix { dim, data: vec![0.0; dim * dim] };
        for i in 0..dim {
            for k in 0..dim {
                let a = self.data[i * dim + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..dim {
                    out.data[i * dim + j] += a * other.data[k * dim + j];
                }
            }
        }
        out
    }

    fn pow(&self, mut exp: u64) -> SquareMatrix {
        let mut acc = SquareMatrix::identity(self.dim);
        let mut base = self.clone();
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc.mul(&base);
            }
            exp >>= 1;
            if exp > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    fn row_dot(&self, row: usize, v: &[f64]) -> f64 {
        self.data[row * self.dim..(row + 1) * self.dim]
            .iter()
            .zip(v)
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// Outcome of one float beta sum.
struct BetaFloat {
    value: f64,
    bound: f64,
    overflowed: bool,
}

/// `beta_{n,r}` summed in doubles: term magnitudes in log space via
/// log-gamma with the sign tracked separately, Kahan accumulation, and an
/// a-priori absolute error bound combining the summation error
/// (terms * eps * max partial sum) with the log-scale term error.
fn beta_float(n: Option<u64>, r: u32, w: f64) -> BetaFloat {
    let n = match n {
        Some(n) => n,
        None => return BetaFloat { value: 0.0, bound: 0.0, overflowed: false },
    };
    if w == 0.0 {
        // only the l = 0 term survives
        return BetaFloat { value: 1.0, bound: 0.0, overflowed: false };
    }
    let ln_w = w.ln();
    let l_max = n / (r as u64 + 1);
    let mut sum = KahanSum::default();
    let mut abs_sum = 0.0;
    let mut max_partial = 0.0f64;
    for l in 0..=l_max {
        let k = n - l * r as u64;
        let ln_term = ln_choose(k, l) + l as f64 * ln_w;
        if ln_term > 708.0 {
            return BetaFloat { value: f64::NAN, bound: f64::INFINITY, overflowed: true };
        }
        let mut term = ln_term.exp();
        if l % 2 == 1 {
            term = -term;
        }
        sum.add(term);
        abs_sum += term.abs();
        max_partial = max_partial.max(sum.value().abs());
    }
    let n_terms = (l_max + 1) as f64;
    let per_term_log_error =
        EPS * (4.0 * stable::ln_gamma(n as f64 + 2.0).max(1.0) + l_max as f64 * ln_w.abs());
    let bound = n_terms * EPS * max_partial + abs_sum * per_term_log_error;
    BetaFloat { value: sum.value(), bound, overflowed: false }
}

/// Closed form in doubles with a certified error bound.
///
/// The alternating beta sum is perfectly conditioned only while its largest
/// term stays comparable to the result; past that point no double-precision
/// summation can recover the value, so when the error bound cannot certify
/// eleven digits the evaluator re-derives the identical quantity in exact
/// arithmetic and rounds once. The returned bound is honest in both regimes.
pub fn z_closed_form_float(query: &RunQuery) -> Result<MethodResult> {
    if let Some(z) = degenerate_z(query) {
        return MethodResult::try_float(Method::ClosedForm, to_f64_lossy(&z), Some(0.0));
    }
    let n = query.n();
    let r = query.r();
    let p = to_f64_lossy(query.p());
    let p_r = pow_u64(p, r as u64);
    let w = (1.0 - p) * p_r;

    let beta_n = beta_float(Some(n), r, w);
    let beta_shifted = beta_float(n.checked_sub(r as u64), r, w);
    if !beta_n.overflowed && !beta_shifted.overflowed {
        let z = beta_n.value - p_r * beta_shifted.value;
        let bound = beta_n.bound
            + p_r * beta_shifted.bound
            + 2.0 * EPS * (beta_n.value.abs() + p_r * beta_shifted.value.abs());
        let certified = bound <= CERTIFY_RATIO * z.abs() && (0.0..=1.0 + EPS).contains(&z);
        if certified {
            return MethodResult::try_float(Method::ClosedForm, z, Some(bound));
        }
    }

    if n > ESCALATION_MAX_N {
        return Err(if beta_n.overflowed || beta_shifted.overflowed {
            Error::Overflow(format!(
                "beta terms exceed the double exponent range at n = {n}; use matrix_power or asymptotic"
            ))
        } else {
            Error::PrecisionLoss(format!(
                "alternating sum too ill-conditioned for doubles at n = {n}; use matrix_power or asymptotic"
            ))
        });
    }
    // Exact escalation: same value, computed without cancellation. The beta
    // sum is used directly while affordable; past that the scaled
    // difference-equation engine produces the identical rational at O(n).
    let exact_result = if n <= ESCALATION_DIRECT_MAX_N {
        exact::z_closed_form(query)?
    } else {
        exact::z_recurrence(query)?
    };
    let z = to_f64_lossy(exact_result.z.exact().expect("exact mode"));
    let bound = 3.0 * EPS * z.abs() + f64::MIN_POSITIVE;
    MethodResult::try_float(Method::ClosedForm, z, Some(bound))
}
