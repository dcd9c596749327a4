//! Core model quantities: single-spin flip rates, the static rate function of
//! the Curie-Weiss measure, the mean-field equation and the deterministic drift
//! of the magnetization.
//!
//! Everything is written in the exponential form with
//! `D(m) = (1 + m) + e^{2 beta' m} (1 - m)`; the hyperbolic forms appear only in
//! tests.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Half-width of the excluded boundary layer of the magnetization strip.
pub const STRIP_DELTA: f64 = 1e-9;

/// Default relative tolerance of the adaptive integrator.
pub const DEFAULT_RTOL: f64 = 1e-10;
/// Default absolute tolerance of the adaptive integrator.
pub const DEFAULT_ATOL: f64 = 1e-12;

/// A single Ising spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn sign(self) -> f64 {
        match self {
            Spin::Up => 1.0,
            Spin::Down => -1.0,
        }
    }

    pub fn flipped(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }
}

/// The ambient parameter point: initial inverse temperature `beta`, dynamical
/// inverse temperature `beta_prime`, horizon `t`, and the integrator tolerances
/// used by every routine that solves the Euler-Lagrange flow.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelParams {
    pub beta: f64,
    pub beta_prime: f64,
    pub t: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl ModelParams {
    /// `beta = f64::INFINITY` is accepted as the zero-temperature limit; generic
    /// numerics reject it (see [`ModelParams::finite_beta`]).
    pub fn new(beta: f64, beta_prime: f64, t: f64) -> Result<Self> {
        if beta.is_nan() || beta <= 0.0 {
            return Err(Error::Domain { what: "beta", value: beta });
        }
        if !beta_prime.is_finite() || beta_prime < 0.0 {
            return Err(Error::Domain { what: "beta_prime", value: beta_prime });
        }
        if !t.is_finite() || t < 0.0 {
            return Err(Error::Domain { what: "t", value: t });
        }
        Ok(ModelParams { beta, beta_prime, t, rtol: DEFAULT_RTOL, atol: DEFAULT_ATOL })
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn with_t(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn is_zero_temperature(&self) -> bool {
        self.beta.is_infinite()
    }

    /// Returns `beta`, or a domain error in the zero-temperature limit.
    pub fn finite_beta(&self) -> Result<f64> {
        if self.beta.is_finite() {
            Ok(self.beta)
        } else {
            Err(Error::Domain { what: "beta (zero-temperature limit)", value: self.beta })
        }
    }
}

#[inline]
pub(crate) fn check_closed(m: f64) -> Result<()> {
    if m.is_nan() || m.abs() > 1.0 {
        Err(Error::Domain { what: "magnetization", value: m })
    } else {
        Ok(())
    }
}

#[inline]
pub(crate) fn check_open(m: f64) -> Result<()> {
    if m.is_nan() || m.abs() >= 1.0 {
        Err(Error::Domain { what: "magnetization", value: m })
    } else {
        Ok(())
    }
}

#[inline]
pub(crate) fn check_strip(m: f64) -> Result<()> {
    if m.is_nan() || m.abs() > 1.0 - STRIP_DELTA {
        Err(Error::Domain { what: "magnetization (outside strip)", value: m })
    } else {
        Ok(())
    }
}

/// `D(m) = (1 + m) + e^{2 beta' m}(1 - m)`, the common denominator.
#[inline]
pub(crate) fn denom(m: f64, beta_prime: f64) -> f64 {
    (1.0 + m) + math::exp(2.0 * beta_prime * m) * (1.0 - m)
}

/// Glauber flip rate `c(sigma, m)` of a spin in state `sigma` when the rest of
/// the system has magnetization `m`. The Curie-Weiss measure at `beta'` is
/// reversible, and the magnetization chain has unit total jump intensity:
/// `(1-m)/2 c(-,m) + (1+m)/2 c(+,m) = 1`.
pub fn flip_rate(sigma: Spin, m: f64, beta_prime: f64) -> Result<f64> {
    check_closed(m)?;
    let d = denom(m, beta_prime);
    Ok(match sigma {
        Spin::Up => 2.0 / d,
        Spin::Down => 2.0 * math::exp(2.0 * beta_prime * m) / d,
    })
}

/// Spin Hamiltonian per site, `H(m) = -beta m^2 / 2`.
pub fn spin_energy(m: f64, beta: f64) -> f64 {
    -0.5 * beta * m * m
}

/// Bernoulli rate function `I(m)` with `0 ln 0 = 0`.
pub fn entropy_rate(m: f64) -> Result<f64> {
    check_closed(m)?;
    Ok(0.5 * (math::xlogx(1.0 + m) + math::xlogx(1.0 - m)))
}

/// `H'(m) + I'(m) = -beta m + artanh(m)`, the slope of the static rate.
pub fn static_rate_slope(m: f64, beta: f64) -> Result<f64> {
    check_open(m)?;
    Ok(-beta * m + math::atanh(m))
}

/// Static large-deviation rate `H(m) + I(m)` of the initial magnetization.
pub fn static_rate(m: f64, beta: f64) -> Result<f64> {
    Ok(spin_energy(m, beta) + entropy_rate(m)?)
}

/// Nonnegative solutions of `m = tanh(beta m)` in `[0, 1)`, ascending.
pub fn mean_field_roots(beta: f64) -> Vec<f64> {
    if !(beta > 1.0) {
        return vec![0.0];
    }
    if beta.is_infinite() {
        return vec![0.0, 1.0];
    }
    let h = |m: f64| math::tanh(beta * m) - m;
    // Small-root expansion m* ~ sqrt(3 (beta - 1) / beta^3); half of it is a
    // safe lower bracket close to the tangency.
    let approx = math::sqrt(3.0 * (beta - 1.0) / (beta * beta * beta));
    let mut lo = (0.5 * approx).min(1e-6);
    if !(h(lo) > 0.0) {
        lo = 0.5 * approx;
    }
    let mut hi = 1.0 - 1e-12;
    if !(h(lo) > 0.0) || !(h(hi) < 0.0) {
        // Root is numerically indistinguishable from a bracket end.
        return vec![0.0, if h(hi) >= 0.0 { hi } else { lo }];
    }
    // Bisect down to adjacent floats: the root is a hyperbolic equilibrium of
    // the optimal-path flow, so every last bit matters there.
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    vec![0.0, 0.5 * (lo + hi)]
}

/// Largest nonnegative mean-field root.
pub fn largest_root(beta: f64) -> f64 {
    *mean_field_roots(beta).last().unwrap_or(&0.0)
}

/// Zero-cost velocity of the magnetization,
/// `2 (e^{2 beta' m}(1 - m) - (1 + m)) / D(m)`.
pub fn drift(m: f64, beta_prime: f64) -> Result<f64> {
    check_closed(m)?;
    let e = math::exp(2.0 * beta_prime * m);
    Ok(2.0 * (e * (1.0 - m) - (1.0 + m)) / ((1.0 + m) + e * (1.0 - m)))
}
