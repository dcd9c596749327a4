//! Large-deviation densities of the magnetization jump process.
//!
//! The magnetization makes jumps of `+-2/N` with total intensity `N`; a jump is
//! upward with probability `p(m)` ([`jump_bias`]). The path cost density
//! `j(m, v)` is the Legendre transform of the governing Hamiltonian
//! `h(m, lambda) = p (e^{2 lambda} - 1) + (1 - p)(e^{-2 lambda} - 1)`, which has
//! the closed-form maximizer `lambda* = ln((v + S) / (4p)) / 2` with
//! `S = sqrt(v^2 + 16 p (1 - p))`. That route is the one used everywhere; the
//! long printed closed form is kept in [`lagrangian_printed`] as a reference.

use crate::error::{Error, Result};
use crate::math;
use crate::model::{check_open, check_strip};

/// Largest momentum accepted by [`hamiltonian`] before `e^{2 lambda}` is
/// considered an overflow risk.
pub const MOMENTUM_CAP: f64 = 30.0;

/// Cost density together with its Legendre data at the evaluation point.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LagrangianEval {
    /// `j(m, v) >= 0`.
    pub value: f64,
    /// The maximizing momentum `lambda*`, equal to `dj/dv`.
    pub momentum: f64,
    /// `h(m, lambda*)`, the generalized energy.
    pub energy: f64,
}

/// Probability that a jump of the magnetization chain goes up.
pub fn jump_bias(m: f64, beta_prime: f64) -> Result<f64> {
    check_open(m)?;
    Ok(bias_unchecked(m, beta_prime))
}

#[inline]
pub(crate) fn bias_unchecked(m: f64, beta_prime: f64) -> f64 {
    let e = math::exp(2.0 * beta_prime * m) * (1.0 - m);
    e / (e + (1.0 + m))
}

/// `p (1 - p)` computed without forming `1 - p`.
#[inline]
pub(crate) fn bias_product(m: f64, beta_prime: f64) -> f64 {
    let e = math::exp(2.0 * beta_prime * m);
    let d = (1.0 + m) + e * (1.0 - m);
    e * (1.0 - m) * (1.0 + m) / (d * d)
}

/// `v + sqrt(v^2 + 16 pq)` without cancellation for negative `v`.
#[inline]
fn v_plus_root(v: f64, pq16: f64) -> (f64, f64) {
    let s = math::sqrt(v * v + pq16);
    let sum = if v >= 0.0 { v + s } else { pq16 / (s - v) };
    (sum, s)
}

/// Rate function of the compound Poisson process with jumps `+-2`, unit
/// intensity and up-probability `p`.
pub fn cp_rate(v: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain { what: "jump probability", value: p });
    }
    let (sum, s) = v_plus_root(v, 16.0 * p * (1.0 - p));
    let log_term = if v == 0.0 { 0.0 } else { 0.5 * v * math::ln(sum / (4.0 * p)) };
    Ok(log_term - 0.5 * s + 1.0)
}

/// Governing Hamiltonian `h(m, lambda)`.
pub fn hamiltonian(m: f64, lambda: f64, beta_prime: f64) -> Result<f64> {
    check_open(m)?;
    if lambda.abs() > MOMENTUM_CAP {
        return Err(Error::Range { what: "momentum", value: lambda, limit: MOMENTUM_CAP });
    }
    let p = bias_unchecked(m, beta_prime);
    Ok(p * math::exp(2.0 * lambda) + (1.0 - p) * math::exp(-2.0 * lambda) - 1.0)
}

/// `dh/dlambda`, the velocity generated by momentum `lambda`.
pub fn hamiltonian_velocity(m: f64, lambda: f64, beta_prime: f64) -> Result<f64> {
    check_open(m)?;
    if lambda.abs() > MOMENTUM_CAP {
        return Err(Error::Range { what: "momentum", value: lambda, limit: MOMENTUM_CAP });
    }
    let p = bias_unchecked(m, beta_prime);
    Ok(2.0 * p * math::exp(2.0 * lambda) - 2.0 * (1.0 - p) * math::exp(-2.0 * lambda))
}

/// Unique maximizer of `lambda v - h(m, lambda)`.
pub fn optimal_momentum(m: f64, v: f64, beta_prime: f64) -> Result<f64> {
    check_open(m)?;
    Ok(momentum_unchecked(m, v, beta_prime))
}

#[inline]
pub(crate) fn momentum_unchecked(m: f64, v: f64, beta_prime: f64) -> f64 {
    let p = bias_unchecked(m, beta_prime);
    let (sum, _) = v_plus_root(v, 16.0 * bias_product(m, beta_prime));
    0.5 * math::ln(sum / (4.0 * p))
}

/// Cost density `j(m, v)` with its momentum and energy. Requires `m` inside
/// the admissible strip `|m| <= 1 - 1e-9`.
pub fn lagrangian(m: f64, v: f64, beta_prime: f64) -> Result<LagrangianEval> {
    check_strip(m)?;
    Ok(lagrangian_unchecked(m, v, beta_prime))
}

#[inline]
pub(crate) fn lagrangian_unchecked(m: f64, v: f64, beta_prime: f64) -> LagrangianEval {
    let p = bias_unchecked(m, beta_prime);
    let (sum, s) = v_plus_root(v, 16.0 * bias_product(m, beta_prime));
    let momentum = 0.5 * math::ln(sum / (4.0 * p));
    let energy = 0.5 * s - 1.0;
    let value = if v == 0.0 { -energy } else { momentum * v - energy };
    LagrangianEval { value, momentum, energy }
}

/// The fully expanded closed form of `j(m, v)` as a direct formula in `m`,
/// `v` and `beta'`. Reference only: its logarithm arguments lose precision
/// near `v = 0`.
pub fn lagrangian_printed(m: f64, v: f64, beta_prime: f64) -> Result<f64> {
    check_strip(m)?;
    let e2 = math::exp(2.0 * beta_prime * m);
    let e4 = e2 * e2;
    let den = 1.0 - e2 * (m - 1.0) + m;
    let q = (e4 * (m - 1.0) * (m - 1.0) * v * v + (1.0 + m) * (1.0 + m) * v * v
        - 2.0 * e2 * (m * m - 1.0) * (8.0 + v * v))
        / (den * den);
    let s = math::sqrt(q);
    let (t1, t2) = if v == 0.0 {
        (0.0, 0.0)
    } else {
        (
            v * math::ln((-1.0 + e2 * (m - 1.0) - m) / (e2 * 4.0 * (m - 1.0))),
            v * math::ln(v + s),
        )
    };
    Ok(0.5 * (2.0 - s + t1 + t2))
}

/// The independent-dynamics (`beta' = 0`) density in its own closed form.
pub fn lagrangian_independent(m: f64, v: f64) -> Result<f64> {
    check_strip(m)?;
    let s = math::sqrt(4.0 - 4.0 * m * m + v * v);
    let log_term = if v == 0.0 { 0.0 } else { v * math::ln((v + s) / (2.0 - 2.0 * m)) };
    Ok(0.5 * (2.0 - s + log_term))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{drift, mean_field_roots};
    use proptest::prelude::*;

    /// Golden-section maximization of `lambda v - h` on a bracket.
    fn golden_sup(m: f64, v: f64, bp: f64, mut a: f64, mut b: f64) -> f64 {
        let phi = |l: f64| l * v - hamiltonian(m, l, bp).unwrap();
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        while b - a > 1e-10 {
            if phi(c) > phi(d) {
                b = d;
            } else {
                a = c;
            }
            c = b - r * (b - a);
            d = a + r * (b - a);
        }
        phi(0.5 * (a + b))
    }

    /// Dense scan on [-20, 20] followed by local refinement.
    fn legendre_sup(m: f64, v: f64, bp: f64) -> (f64, f64) {
        let n = 4000;
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..=n {
            let l = -20.0 + 40.0 * i as f64 / n as f64;
            let val = l * v - hamiltonian(m, l, bp).unwrap();
            if val > best.0 {
                best = (val, l);
            }
        }
        let h = 40.0 / n as f64;
        (golden_sup(m, v, bp, best.1 - h, best.1 + h), best.1)
    }

    #[test]
    fn jump_bias_examples() {
        for bp in [0.0, 1.0, 5.0] {
            assert_eq!(jump_bias(0.0, bp).unwrap(), 0.5);
        }
        for m in [-0.7, 0.1, 0.9] {
            assert!((jump_bias(m, 0.0).unwrap() - 0.5 * (1.0 - m)).abs() < 1e-15);
        }
        // e^{0.9} 0.7 / (e^{0.9} 0.7 + 1.3), evaluated at 30 digits.
        assert!((jump_bias(0.3, 1.5).unwrap() - 0.569_781_759_042_376_2).abs() < 1e-15);
        assert!(jump_bias(1.0, 0.0).is_err());
    }

    #[test]
    fn cp_rate_examples() {
        assert!(cp_rate(0.0, 0.5).unwrap().abs() < 1e-16);
        for p in [0.1f64, 0.3, 0.7, 0.95] {
            let expected = 1.0 - 2.0 * (p * (1.0 - p)).sqrt();
            assert!((cp_rate(0.0, p).unwrap() - expected).abs() < 1e-15);
            assert!(expected > 0.0);
            // Zero at the mean velocity 2p - 2(1 - p): the quadratic
            // 2p x^2 - v x - 2(1-p) = 0 has root x = 1 there.
            let vbar = 2.0 * (2.0 * p - 1.0);
            let x = (vbar + (vbar * vbar + 16.0 * p * (1.0 - p)).sqrt()) / (4.0 * p);
            assert!((x - 1.0).abs() < 1e-14);
            assert!(cp_rate(vbar, p).unwrap().abs() < 1e-14);
        }
        assert!(cp_rate(1.0, 0.0).is_err());
        assert!(cp_rate(1.0, 1.0).is_err());
    }

    #[test]
    fn hamiltonian_examples() {
        assert_eq!(hamiltonian(0.4, 0.0, 1.3).unwrap(), 0.0);
        for l in [-3.0, -0.2, 0.5, 2.0] {
            let h = hamiltonian(0.0, l, 0.8).unwrap();
            assert!((h - ((2.0 * l).cosh() - 1.0)).abs() < 1e-12 * h.abs().max(1.0));
        }
        assert!(hamiltonian(0.0, 31.0, 0.0).is_err());
        // dh/dlambda at 0 equals the drift, checked by central differences.
        for (m, bp) in [(0.3, 0.0), (-0.6, 1.5), (0.8, 0.7)] {
            let h = 1e-6;
            let fd = (hamiltonian(m, h, bp).unwrap() - hamiltonian(m, -h, bp).unwrap()) / (2.0 * h);
            assert!((fd - drift(m, bp).unwrap()).abs() < 1e-8);
            assert!((hamiltonian_velocity(m, 0.0, bp).unwrap() - drift(m, bp).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn optimal_momentum_examples() {
        for (m, bp) in [(0.3, 0.0), (-0.6, 1.5), (0.8, 0.7)] {
            let v = drift(m, bp).unwrap();
            assert!(optimal_momentum(m, v, bp).unwrap().abs() < 1e-14);
        }
        assert_eq!(optimal_momentum(0.0, 0.0, 2.0).unwrap(), 0.0);
        let p = jump_bias(0.2, 1.5).unwrap();
        let closed = 0.5 * ((1.0 + (1.0 + 16.0 * p * (1.0 - p)).sqrt()) / (4.0 * p)).ln();
        let got = optimal_momentum(0.2, 1.0, 1.5).unwrap();
        assert!((got - closed).abs() < 1e-14);
        // The golden-section argmax lands on the same momentum.
        let phi = |l: f64| l - hamiltonian(0.2, l, 1.5).unwrap();
        let (mut a, mut b) = (-5.0f64, 5.0f64);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        while b - a > 1e-9 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if phi(c) > phi(d) { b = d } else { a = c }
        }
        assert!((0.5 * (a + b) - got).abs() < 1e-8);
        assert!((hamiltonian_velocity(0.2, got, 1.5).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn lagrangian_examples() {
        for bp in [0.0, 0.5, 1.5] {
            for i in 0..=38 {
                let m = -0.95 + 0.05 * i as f64;
                let v = drift(m, bp).unwrap();
                assert!(lagrangian(m, v, bp).unwrap().value.abs() < 1e-14);
            }
        }
        // Zero velocity costs nothing exactly at the mean-field roots.
        for bp in [1.2, 1.5, 2.5] {
            for r in mean_field_roots(bp) {
                assert!(lagrangian(r, 0.0, bp).unwrap().value.abs() < 1e-12);
                assert!(lagrangian(-r, 0.0, bp).unwrap().value.abs() < 1e-12);
            }
            assert!(lagrangian(0.3, 0.0, bp).unwrap().value > 1e-6);
        }
        for i in 0..=18 {
            let m = -0.9 + 0.1 * i as f64;
            for k in 0..=16 {
                let v = -4.0 + 0.5 * k as f64;
                let a = lagrangian(m, v, 0.0).unwrap().value;
                let b = lagrangian_independent(m, v).unwrap();
                assert!((a - b).abs() < 1e-12, "m={m} v={v}");
            }
        }
        assert!(lagrangian(1.0 - 1e-10, 0.0, 0.0).is_err());
    }

    #[test]
    fn legendre_consistency_grid() {
        for bp in [0.0, 0.8, 1.5, 3.0] {
            for i in 0..=19 {
                let m = -0.95 + 0.1 * i as f64;
                for k in 0..=16 {
                    let v = -4.0 + 0.5 * k as f64;
                    let eval = lagrangian(m, v, bp).unwrap();
                    let (sup, _) = legendre_sup(m, v, bp);
                    assert!((eval.value - sup).abs() < 1e-8, "m={m} v={v} bp={bp}");
                    assert!((eval.value - (eval.momentum * v - eval.energy)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn printed_form_agrees() {
        for bp in [0.0, 0.6, 1.5, 2.5] {
            for i in 0..=38 {
                let m = -0.95 + 0.05 * i as f64;
                for k in 0..=32 {
                    let v = -4.0 + 0.25 * k as f64;
                    let a = lagrangian(m, v, bp).unwrap().value;
                    let b = lagrangian_printed(m, v, bp).unwrap();
                    assert!((a - b).abs() < 1e-9, "m={m} v={v} bp={bp}: {a} vs {b}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn nonnegative_convex_and_composed(m in -0.99f64..0.99, v in -4.0f64..4.0, bp in 0.0f64..3.0) {
            let eval = lagrangian(m, v, bp).unwrap();
            prop_assert!(eval.value >= -1e-14);
            let composed = cp_rate(v, jump_bias(m, bp).unwrap()).unwrap();
            prop_assert!((eval.value - composed).abs() < 1e-12);
            let h = 1e-3;
            let second = lagrangian(m, v + h, bp).unwrap().value - 2.0 * eval.value
                + lagrangian(m, v - h, bp).unwrap().value;
            prop_assert!(second / (h * h) >= -1e-8);
            let h = 1e-5;
            let dv = (lagrangian(m, v + h, bp).unwrap().value
                - lagrangian(m, v - h, bp).unwrap().value) / (2.0 * h);
            prop_assert!((dv - eval.momentum).abs() < 1e-6);
        }
    }
}
