//! Simultaneous root iteration for the kernel polynomial
//! `V(x) = 1 - x + w x^{r+1}`.
//!
//! Aberth–Ehrlich updates on all r+1 roots at once, started on a circle of
//! radius `w^(-1/(r+1))` (the geometric mean of the root moduli, by the
//! constant and leading coefficients), followed by Newton polishing. The
//! degree here is tiny, so robustness is worth more than speed.

use crate::core::{Error, Result};
use num::complex::Complex64;

/// Sweep cap for the simultaneous iteration.
pub const MAX_SWEEPS: u32 = 200;

/// Residual target: |V(x)| relative to the coefficient-magnitude scale at x.
const RESIDUAL_TOL: f64 = 1e-13;

/// Sparse evaluation of the kernel and its derivative.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Kernel {
    pub r: u32,
    /// p^r
    pub p_r: f64,
    /// q p^r
    pub w: f64,
}

impl Kernel {
    pub fn v(&self, x: Complex64) -> Complex64 {
        let xr1 = super::stable::cpow_u64(x, self.r as u64 + 1);
        Complex64::new(1.0, 0.0) - x + self.w * xr1
    }

    pub fn v_prime(&self, x: Complex64) -> Complex64 {
        let xr = super::stable::cpow_u64(x, self.r as u64);
        (self.r as f64 + 1.0) * self.w * xr - Complex64::new(1.0, 0.0)
    }

    pub fn u(&self, x: Complex64) -> Complex64 {
        let xr = super::stable::cpow_u64(x, self.r as u64);
        Complex64::new(1.0, 0.0) - self.p_r * xr
    }

    /// Sum of |coefficient| * |x|^degree, the natural backward-error scale.
    pub fn v_scale(&self, x_norm: f64) -> f64 {
        1.0 + x_norm + self.w * super::stable::pow_u64(x_norm, self.r as u64 + 1)
    }
}

/// All r+1 roots of `V`, unsorted. Requires `0 < w` (interior p).
pub(crate) fn solve(kernel: &Kernel) -> Result<Vec<Complex64>> {
    let degree = kernel.r as usize + 1;
    let radius = kernel.w.powf(-1.0 / degree as f64);
    let mut roots: Vec<Complex64> = (0..degree)
        .map(|j| {
            // fixed angular offset so no guess starts on the real axis
            let theta = std::f64::consts::TAU * j as f64 / degree as f64 + 0.25;
            radius * Complex64::new(theta.cos(), theta.sin())
        })
        .collect();

    let mut worst_residual = f64::INFINITY;
    for _sweep in 0..MAX_SWEEPS {
        for i in 0..degree {
            let x = roots[i];
            let v = kernel.v(x);
            if v.norm() <= RESIDUAL_TOL * kernel.v_scale(x.norm()) {
                continue;
            }
            let newton = v / kernel.v_prime(x);
            let repulsion: Complex64 = (0..degree)
                .filter(|&j| j != i)
                .map(|j| (x - roots[j]).finv())
                .sum();
            let denom = Complex64::new(1.0, 0.0) - newton * repulsion;
            let mut delta = newton / denom;
            if !delta.is_finite() {
                delta = newton;
            }
            if !delta.is_finite() {
                // derivative vanished exactly; nudge deterministically
                delta = Complex64::new(1e-3 * radius, 1e-3 * radius);
            }
            roots[i] = x - delta;
        }
        worst_residual = roots
            .iter()
            .map(|x| kernel.v(*x).norm() / kernel.v_scale(x.norm()))
            .fold(0.0, f64::max);
        if worst_residual <= RESIDUAL_TOL {
            polish(kernel, &mut roots);
            return Ok(roots);
        }
    }
    Err(Error::Convergence { sweeps: MAX_SWEEPS, residual: worst_residual })
}

/// A few Newton steps per root, kept only while the residual improves.
fn polish(kernel: &Kernel, roots: &mut [Complex64]) {
    for x in roots.iter_mut() {
        for _ in 0..3 {
            let v = kernel.v(*x);
            let vp = kernel.v_prime(*x);
            let candidate = *x - v / vp;
            if !candidate.is_finite() {
                break;
            }
            if kernel.v(candidate).norm() < v.norm() {
                *x = candidate;
            } else {
                break;
            }
        }
    }
}
