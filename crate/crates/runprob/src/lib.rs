//! Probability of a success run: five mutually verifying evaluators.
//!
//! For independent Bernoulli trials with success probability `p`, this crate
//! computes the probability `y_n` that a run of at least `r` consecutive
//! successes occurs within `n` trials, together with its complement
//! `z_n = 1 - y_n`, by several routes that check one another:
//!
//! * exact closed form (alternating binomial sum),
//! * exact difference-equation iteration,
//! * exact power-series expansion of the rational generating function,
//! * floating-point closed form with a certified error bound,
//! * spectral partial fractions over the kernel roots, with a one-term
//!   dominant-root asymptotic,
//! * companion-matrix exponentiation for very large `n`,
//! * ground-truth oracles: exhaustive enumeration and seeded Monte Carlo.
//!
//! The exact routes agree bit-for-bit; the float routes carry error bounds
//! and refuse to answer rather than degrade silently.

pub mod core;
pub mod exact;
pub mod numeric;
pub mod oracle;

pub use crate::core::{
    binomial_exact, degenerate_z, parse_probability, to_f64_lossy, Error, Method, MethodResult,
    Mode, ProbabilityValue, Result, RunQuery,
};
pub use crate::exact::{
    beta_exact, beta_series_coefficients, series_coefficients, z_closed_form, z_recurrence,
    BetaExpansion, SeriesCache,
};
pub use crate::numeric::{
    solve_kernel_roots, z_asymptotic, z_closed_form_float, z_matrix_power, z_spectral,
    ConditionFlag, KernelPolynomials, SpectralDecomposition,
};
pub use crate::oracle::{mc_estimate, z_bruteforce, McEstimate, BRUTE_FORCE_CAP};
