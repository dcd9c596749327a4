//! Limiting single-site kernel.
//!
//! Conditioned on the final magnetization `m'`, a tagged spin evolves as a
//! two-state chain with flip rates `c(sigma, m(s))` along the optimal history
//! `m(s)`, and starts with law `e^{sigma beta m0} / (2 cosh(beta m0))`. The
//! kernel is `gamma(+|m') = sum_sigma e^{sigma beta m0} P[sigma][+] / (2 cosh(beta m0))`
//! with `P' = P Q(s)`, `P(0) = I`.

use crate::acc::{acc_curve, transport, TransportGrid, TransportedCurve};
use crate::cost::{branch_costs, TIE_TOL};
use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::flow::{self, IndependentPath, IntegrateOptions, PhasePoint, Trajectory};
use crate::math;
use crate::model::{check_open, denom, ModelParams};
use crate::ode;

/// A magnetization path `s -> m(s)`.
pub trait PathSource {
    fn m_at(&self, s: f64) -> f64;
}

impl PathSource for Trajectory {
    fn m_at(&self, s: f64) -> f64 {
        self.point_at(s).m
    }
}

impl PathSource for IndependentPath {
    fn m_at(&self, s: f64) -> f64 {
        self.m(s)
    }
}

/// The constant path `m(s) = m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPath(pub f64);

impl PathSource for ConstantPath {
    fn m_at(&self, _s: f64) -> f64 {
        self.0
    }
}

/// A path given by a closure.
pub struct FnPath<F: Fn(f64) -> f64>(pub F);

impl<F: Fn(f64) -> f64> PathSource for FnPath<F> {
    fn m_at(&self, s: f64) -> f64 {
        (self.0)(s)
    }
}

/// `(c(+, m), c(-, m))`, the flip rates of a plus and a minus spin.
#[inline]
fn rates(m: f64, bp: f64) -> (f64, f64) {
    let d = denom(m, bp);
    (2.0 / d, 2.0 * math::exp(2.0 * bp * m) / d)
}

/// Transition matrix `P[sigma][eta]` of the tagged spin over `[0, t]`, index 0
/// for `+` and 1 for `-`.
pub fn transition_matrix<P: PathSource + ?Sized>(
    path: &P,
    t: f64,
    beta_prime: f64,
    rtol: f64,
    atol: f64,
) -> Result<[[f64; 2]; 2]> {
    if !(t >= 0.0) {
        return Err(Error::Domain { what: "t", value: t });
    }
    let sys = |s: f64, y: &[f64; 4], dy: &mut [f64; 4]| {
        let m = path.m_at(s);
        if !(m.abs() <= 1.0) {
            return false;
        }
        let (a, b) = rates(m, beta_prime);
        // (P Q) with Q = [[-a, a], [b, -b]].
        dy[0] = -a * y[0] + b * y[1];
        dy[1] = a * y[0] - b * y[1];
        dy[2] = -a * y[2] + b * y[3];
        dy[3] = a * y[2] - b * y[3];
        true
    };
    let y = ode::integrate(&sys, 0.0, [1.0, 0.0, 0.0, 1.0], t, &ode::Options::new(rtol, atol), |_| Ok(()))?;
    Ok([[y[0], y[1]], [y[2], y[3]]])
}

/// Two-state closed form of `exp(t Q(m))` for a constant magnetization.
pub fn constant_path_matrix(m: f64, t: f64, beta_prime: f64) -> Result<[[f64; 2]; 2]> {
    check_open(m)?;
    let (a, b) = rates(m, beta_prime);
    let e = math::exp(-(a + b) * t);
    let s = a + b;
    Ok([[(b + a * e) / s, a * (1.0 - e) / s], [b * (1.0 - e) / s, (a + b * e) / s]])
}

/// `gamma(+|m')` from the optimal initial point and the transition matrix.
pub fn gamma_plus(m0: f64, p: &[[f64; 2]; 2], beta: f64) -> f64 {
    let x = beta * m0;
    // Weights e^{+-x} / (2 cosh x), written without overflow.
    let wp = 0.5 * (1.0 + math::tanh(x));
    let wm = 0.5 * (1.0 - math::tanh(x));
    wp * p[0][0] + wm * p[1][0]
}

/// Kernel value together with the history it was computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KernelEval {
    pub m_end: f64,
    pub m0_star: f64,
    pub gamma_plus: f64,
    pub p: [[f64; 2]; 2],
}

/// Kernel along the history that starts on the allowed curve at `m0`.
pub fn history_kernel(m0: f64, params: &ModelParams) -> Result<KernelEval> {
    let beta = params.finite_beta()?;
    let opts = IntegrateOptions::from_params(params);
    let g = acc_curve(m0, params)?;
    let tr = flow::integrate(PhasePoint::new(m0, g), params.t, params.beta_prime, &opts)?;
    let p = transition_matrix(&tr, params.t, params.beta_prime, params.rtol, params.atol)?;
    Ok(KernelEval { m_end: tr.end().point.m, m0_star: m0, gamma_plus: gamma_plus(m0, &p, beta), p })
}

/// Side of a one-sided limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Below,
    Above,
}

/// Kernel evaluator that reuses one transported curve for many `m'`.
pub struct KernelSolver {
    pub params: ModelParams,
    pub curve: TransportedCurve,
}

impl KernelSolver {
    pub fn new<E: Executor>(params: &ModelParams, grid: &TransportGrid, exec: &E) -> Result<Self> {
        Ok(KernelSolver { params: *params, curve: transport(params, grid, exec)? })
    }

    /// Kernel at a continuity point: fails with [`Error::AmbiguousMinimizer`]
    /// when two histories tie.
    pub fn kernel(&self, m_end: f64) -> Result<KernelEval> {
        check_open(m_end)?;
        let mut costs = branch_costs(&self.curve, m_end)?;
        if costs.is_empty() {
            return Err(Error::Unreachable { m_end });
        }
        costs.sort_by(|a, b| a.cost.total_cmp(&b.cost));
        if costs.len() > 1 && costs[1].cost - costs[0].cost <= TIE_TOL && (costs[1].m0 - costs[0].m0).abs() > 1e-9 {
            return Err(Error::AmbiguousMinimizer {
                m0_a: costs[0].m0.min(costs[1].m0),
                m0_b: costs[0].m0.max(costs[1].m0),
                gap: costs[1].cost - costs[0].cost,
            });
        }
        let mut k = history_kernel(costs[0].m0, &self.params)?;
        k.m_end = m_end;
        Ok(k)
    }

    /// Limit of the kernel as `m'` approaches `m_end` from one side: the
    /// history is the one that is optimal just beside `m_end`, followed to
    /// `m_end` itself.
    pub fn kernel_one_sided(&self, m_end: f64, side: Side) -> Result<KernelEval> {
        check_open(m_end)?;
        let probe = match side {
            Side::Below => m_end - 1e-7,
            Side::Above => m_end + 1e-7,
        };
        let mut near = branch_costs(&self.curve, probe)?;
        near.sort_by(|a, b| a.cost.total_cmp(&b.cost));
        let best = near.first().ok_or(Error::Unreachable { m_end: probe })?;
        let at = branch_costs(&self.curve, m_end)?;
        let same = at.iter().find(|c| c.piece == best.piece).ok_or(Error::Unreachable { m_end })?;
        let mut k = history_kernel(same.m0, &self.params)?;
        k.m_end = m_end;
        Ok(k)
    }

    /// `|gamma(+| m + eps) - gamma(+| m - eps)|`.
    pub fn kernel_jump(&self, m_bad: f64, eps: f64) -> Result<f64> {
        let hi = self.kernel(m_bad + eps)?;
        let lo = self.kernel(m_bad - eps)?;
        Ok((hi.gamma_plus - lo.gamma_plus).abs())
    }
}

/// Kernel at a continuity point with default transport settings.
pub fn kernel(m_end: f64, params: &ModelParams) -> Result<KernelEval> {
    KernelSolver::new(params, &TransportGrid::default(), &Sequential)?.kernel(m_end)
}

/// One-sided kernel limit with default transport settings.
pub fn kernel_one_sided(m_end: f64, params: &ModelParams, side: Side) -> Result<KernelEval> {
    KernelSolver::new(params, &TransportGrid::default(), &Sequential)?.kernel_one_sided(m_end, side)
}

/// Kernel jump across `m_bad` with default transport settings.
pub fn kernel_jump(m_bad: f64, params: &ModelParams, eps: f64) -> Result<f64> {
    KernelSolver::new(params, &TransportGrid::default(), &Sequential)?.kernel_jump(m_bad, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::closed_form_path_b0;
    use proptest::prelude::*;

    #[test]
    fn independent_rates_give_closed_form() {
        let path = FnPath(|s: f64| 0.7 * (-2.0 * s).exp());
        for t in [0.1, 0.5, 2.0] {
            let p = transition_matrix(&path, t, 0.0, 1e-12, 1e-14).unwrap();
            assert!((p[0][0] - 0.5 * (1.0 + (-2.0 * t).exp())).abs() < 1e-9);
            assert!((p[1][1] - p[0][0]).abs() < 1e-12);
        }
        let p = transition_matrix(&ConstantPath(0.3), 0.0, 1.5, 1e-10, 1e-12).unwrap();
        assert_eq!(p, [[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn constant_path_matches_exponential() {
        for (m, bp, t) in [(0.3, 1.5, 0.8), (-0.6, 0.7, 2.0), (0.0, 2.0, 0.3)] {
            let a = transition_matrix(&ConstantPath(m), t, bp, 1e-12, 1e-14).unwrap();
            let b = constant_path_matrix(m, t, bp).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((a[i][j] - b[i][j]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn independent_kernel_closed_form() {
        let params = ModelParams::new(1.25, 0.0, 0.3).unwrap();
        let solver = KernelSolver::new(&params, &TransportGrid::default(), &Sequential).unwrap();
        for m_end in [-0.4, 0.1, 0.5] {
            let k = solver.kernel(m_end).unwrap();
            let expect = 0.5 * (1.0 + (1.25 * k.m0_star).tanh() * (-0.6f64).exp());
            assert!((k.gamma_plus - expect).abs() < 1e-9);
        }
        let zero = solver.kernel(0.0).unwrap();
        assert!((zero.gamma_plus - 0.5).abs() < 1e-12);
    }

    #[test]
    fn time_zero_is_static_kernel() {
        let params = ModelParams::new(1.7, 0.9, 0.0).unwrap();
        let solver = KernelSolver::new(&params, &TransportGrid::default(), &Sequential).unwrap();
        for m_end in [-0.5, 0.2, 0.8] {
            let k = solver.kernel(m_end).unwrap();
            let x = 1.7 * m_end;
            assert!((k.gamma_plus - x.exp() / (2.0 * x.cosh())).abs() < 1e-12);
        }
    }

    #[test]
    fn ambiguity_and_jump_at_symmetric_bad_point() {
        let params = ModelParams::new(1.25, 0.0, 0.45).unwrap();
        let solver = KernelSolver::new(&params, &TransportGrid::default(), &Sequential).unwrap();
        assert!(matches!(solver.kernel(0.0), Err(Error::AmbiguousMinimizer { .. })));
        let above = solver.kernel_one_sided(0.0, Side::Above).unwrap();
        let below = solver.kernel_one_sided(0.0, Side::Below).unwrap();
        assert!(above.m0_star > 0.0 && below.m0_star < 0.0);
        let limit = (above.gamma_plus - below.gamma_plus).abs();
        let expect = (1.25 * above.m0_star).tanh() * (-0.9f64).exp();
        assert!((limit - expect).abs() < 1e-9);
        let mut prev: Option<f64> = None;
        for eps in [1e-3, 1e-4, 1e-5] {
            let j = solver.kernel_jump(0.0, eps).unwrap();
            assert!((j - limit).abs() < 0.05 * limit);
            if let Some(p) = prev {
                assert!((j - limit).abs() <= (p - limit).abs() + 1e-12);
            }
            prev = Some(j);
        }
        let cont = solver.kernel_jump(0.4, 1e-5).unwrap();
        assert!(cont < 1e-3 * limit);
    }

    #[test]
    fn closed_form_path_kernel() {
        let path = closed_form_path_b0(0.2, 0.5, 1.0).unwrap();
        let p = transition_matrix(&path, 1.0, 0.0, 1e-12, 1e-14).unwrap();
        assert!((p[0][0] - 0.5 * (1.0 + (-2.0f64).exp())).abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn stochastic_and_flip_symmetric(m0 in -0.8f64..0.8, slope in -1.0f64..1.0, bp in 0.0f64..2.0, t in 0.0f64..2.0) {
            let f = |s: f64| (m0 + 0.1 * slope * s).clamp(-0.95, 0.95);
            let p = transition_matrix(&FnPath(f), t, bp, 1e-11, 1e-13).unwrap();
            let q = transition_matrix(&FnPath(|s: f64| -f(s)), t, bp, 1e-11, 1e-13).unwrap();
            for i in 0..2 {
                prop_assert!((p[i][0] + p[i][1] - 1.0).abs() < 1e-10);
                for j in 0..2 {
                    prop_assert!((-1e-12..=1.0 + 1e-12).contains(&p[i][j]));
                    prop_assert!((p[i][j] - q[1 - i][1 - j]).abs() < 1e-9);
                }
            }
        }
    }
}
