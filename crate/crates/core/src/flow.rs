//! Euler-Lagrange phase flow of the path rate function.
//!
//! Optimal paths solve `m'' = f(m)` with `f(m) = -8 d(pq)/dm`, where `p`, `q`
//! are the up and down jump probabilities. In closed form
//! `f(m) = 16 E A B / D^3` with `E = e^{2 beta' m}`, `A = (1+m) - E(1-m)`,
//! `B = 1 + (m^2 - 1) beta'` and `D = (1+m) + E(1-m)`. The first integral is
//! `C = v^2 + 16 pq`, and the separatrix is the level `C = 4`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ldp::{bias_product, lagrangian_unchecked};
use crate::math;
use crate::model::{check_open, denom, ModelParams, DEFAULT_ATOL, DEFAULT_RTOL, STRIP_DELTA};
use crate::ode::{self, DenseStep};

/// Dimension of the augmented state `[m, v, J11, J12, J21, J22, action]`.
pub const STATE_DIM: usize = 7;

/// Position and velocity in the Euler-Lagrange phase plane.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhasePoint {
    pub m: f64,
    pub v: f64,
}

impl PhasePoint {
    pub fn new(m: f64, v: f64) -> Self {
        PhasePoint { m, v }
    }

    pub fn negated(self) -> Self {
        PhasePoint { m: -self.m, v: -self.v }
    }
}

/// Phase point together with the Jacobian `d(m, v) / d(m0, v0)` of the flow.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SensitivityState {
    pub point: PhasePoint,
    pub jac: [[f64; 2]; 2],
}

impl SensitivityState {
    pub fn initial(point: PhasePoint) -> Self {
        SensitivityState { point, jac: [[1.0, 0.0], [0.0, 1.0]] }
    }

    pub fn det(&self) -> f64 {
        self.jac[0][0] * self.jac[1][1] - self.jac[0][1] * self.jac[1][0]
    }

    fn from_state(y: &[f64; STATE_DIM]) -> Self {
        SensitivityState { point: PhasePoint { m: y[0], v: y[1] }, jac: [[y[2], y[3]], [y[4], y[5]]] }
    }
}

/// Branch of the separatrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Branch {
    Plus,
    Minus,
}

/// `(f, f', f'')` at `m`, analytic.
pub(crate) fn force_derivs(m: f64, bp: f64) -> (f64, f64, f64) {
    let e = math::exp(2.0 * bp * m);
    let a = (1.0 + m) - e * (1.0 - m);
    let b = 1.0 + (m * m - 1.0) * bp;
    let d = (1.0 + m) + e * (1.0 - m);
    let a1 = 1.0 + e - 2.0 * bp * e * (1.0 - m);
    let a2 = 4.0 * bp * e - 4.0 * bp * bp * e * (1.0 - m);
    let b1 = 2.0 * bp * m;
    let b2 = 2.0 * bp;
    let d1 = 1.0 - e + 2.0 * bp * e * (1.0 - m);
    let d2 = -a2;
    let p0 = a * b;
    let p1 = a1 * b + a * b1;
    let p2 = a2 * b + 2.0 * a1 * b1 + a * b2;
    let n0 = e * p0;
    let n1 = e * (2.0 * bp * p0 + p1);
    let n2 = e * (4.0 * bp * bp * p0 + 4.0 * bp * p1 + p2);
    let di = 1.0 / d;
    let di3 = di * di * di;
    let f = 16.0 * n0 * di3;
    let f1 = 16.0 * di3 * (n1 - 3.0 * n0 * d1 * di);
    let f2 = 16.0 * di3 * (n2 - 6.0 * n1 * d1 * di - 3.0 * n0 * d2 * di + 12.0 * n0 * d1 * d1 * di * di);
    (f, f1, f2)
}

#[inline]
pub(crate) fn force_unchecked(m: f64, bp: f64) -> f64 {
    let e = math::exp(2.0 * bp * m);
    let a = (1.0 + m) - e * (1.0 - m);
    let b = 1.0 + (m * m - 1.0) * bp;
    let d = (1.0 + m) + e * (1.0 - m);
    16.0 * e * a * b / (d * d * d)
}

/// Euler-Lagrange vector field `(v, f(m))`.
pub fn el_field(p: PhasePoint, beta_prime: f64) -> Result<(f64, f64)> {
    check_open(p.m)?;
    Ok((p.v, force_unchecked(p.m, beta_prime)))
}

/// `f'(m)`, the coefficient of the variational equation.
pub fn el_force_slope(m: f64, beta_prime: f64) -> Result<f64> {
    check_open(m)?;
    Ok(force_derivs(m, beta_prime).1)
}

/// `f''(m)`.
pub fn el_force_curvature(m: f64, beta_prime: f64) -> Result<f64> {
    check_open(m)?;
    Ok(force_derivs(m, beta_prime).2)
}

#[inline]
pub(crate) fn energy_unchecked(m: f64, v: f64, bp: f64) -> f64 {
    v * v + 16.0 * bias_product(m, bp)
}

/// First integral `C = v^2 + 16 e^{2 beta' m}(1 - m^2) / D^2`.
pub fn energy(p: PhasePoint, beta_prime: f64) -> Result<f64> {
    check_open(p.m)?;
    Ok(energy_unchecked(p.m, p.v, beta_prime))
}

/// The first integral in its expanded rational form.
pub fn energy_expanded(p: PhasePoint, beta_prime: f64) -> Result<f64> {
    check_open(p.m)?;
    let (m, v) = (p.m, p.v);
    let e2 = math::exp(2.0 * beta_prime * m);
    let d = denom(m, beta_prime);
    Ok((e2 * e2 * (1.0 - m) * (1.0 - m) * v * v
        + (1.0 + m) * (1.0 + m) * v * v
        + 2.0 * e2 * (1.0 - m * m) * (8.0 + v * v))
        / (d * d))
}

/// `C - 4` computed as `(v - drift)(v + drift)`, accurate near the separatrix.
pub fn energy_excess(p: PhasePoint, beta_prime: f64) -> Result<f64> {
    check_open(p.m)?;
    let w = separatrix_unchecked(p.m, beta_prime);
    Ok((p.v - w) * (p.v + w))
}

#[inline]
fn separatrix_unchecked(m: f64, bp: f64) -> f64 {
    let e = math::exp(2.0 * bp * m);
    2.0 * ((1.0 + m) - e * (1.0 - m)) / ((1.0 + m) + e * (1.0 - m))
}

/// Separatrix branch `f_+-(m) = +-2((1 + m) - e^{2 beta' m}(1 - m)) / D`.
/// `f_-` coincides with the drift.
pub fn separatrix(m: f64, branch: Branch, beta_prime: f64) -> Result<f64> {
    check_open(m)?;
    let w = separatrix_unchecked(m, beta_prime);
    Ok(match branch {
        Branch::Plus => w,
        Branch::Minus => -w,
    })
}

/// Integrator settings for the Euler-Lagrange flow.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Allowed first-integral drift per unit time, relative to `1 + |C0|`.
    pub energy_tol: f64,
    /// Number of retries at 100x tighter tolerance after an energy violation.
    pub max_retries: u32,
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            rtol: DEFAULT_RTOL,
            atol: DEFAULT_ATOL,
            energy_tol: 1e-8,
            max_retries: 2,
            max_steps: 200_000,
        }
    }
}

impl IntegrateOptions {
    pub fn from_params(p: &ModelParams) -> Self {
        IntegrateOptions { rtol: p.rtol, atol: p.atol, ..Default::default() }
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    fn ode(&self) -> ode::Options {
        let mut o = ode::Options::new(self.rtol, self.atol);
        o.max_steps = self.max_steps;
        o
    }
}

struct ElSystem {
    bp: f64,
}

impl ode::System<STATE_DIM> for ElSystem {
    fn rhs(&self, _s: f64, y: &[f64; STATE_DIM], dy: &mut [f64; STATE_DIM]) -> bool {
        let m = y[0];
        if !(m.abs() <= 1.0 - STRIP_DELTA) {
            return false;
        }
        let (f, f1, _) = force_derivs(m, self.bp);
        dy[0] = y[1];
        dy[1] = f;
        dy[2] = y[4];
        dy[3] = y[5];
        dy[4] = f1 * y[2];
        dy[5] = f1 * y[3];
        dy[6] = lagrangian_unchecked(m, y[1], self.bp).value;
        true
    }
}

/// Final state of a flow run without stored samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowEnd {
    pub state: SensitivityState,
    pub action: f64,
    pub energy0: f64,
    pub energy: f64,
}

fn check_start(start: PhasePoint, horizon: f64) -> Result<()> {
    if !(start.m.abs() <= 1.0 - STRIP_DELTA) {
        return Err(Error::Domain { what: "initial magnetization (outside strip)", value: start.m });
    }
    if !start.v.is_finite() {
        return Err(Error::Domain { what: "initial velocity", value: start.v });
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::Domain { what: "horizon", value: horizon });
    }
    Ok(())
}

fn initial_state(start: PhasePoint) -> [f64; STATE_DIM] {
    [start.m, start.v, 1.0, 0.0, 0.0, 1.0, 0.0]
}

/// Runs the flow with energy monitoring, retrying at tighter tolerances when
/// the first integral drifts. `sink` sees every accepted step of the final
/// (successful) attempt only; `None` marks the start of each attempt.
fn run_monitored<F>(
    start: PhasePoint,
    horizon: f64,
    bp: f64,
    opts: &IntegrateOptions,
    mut sink: F,
) -> Result<(FlowEnd, f64)>
where
    F: FnMut(Option<(&DenseStep<STATE_DIM>, f64)>),
{
    check_start(start, horizon)?;
    let sys = ElSystem { bp };
    let e0 = energy_unchecked(start.m, start.v, bp);
    let mut o = *opts;
    let mut attempt = 0;
    loop {
        sink(None);
        let mut worst = 0.0f64;
        let mut violated = false;
        let y = ode::integrate(&sys, 0.0, initial_state(start), horizon, &o.ode(), |st| {
            let y1 = st.end();
            let e = energy_unchecked(y1[0], y1[1], bp);
            let allowed = o.energy_tol * (1.0 + e0.abs()) * st.s1().max(1.0);
            let drift = (e - e0).abs();
            worst = worst.max(drift / ((1.0 + e0.abs()) * st.s1().max(1.0)));
            if drift > allowed {
                violated = true;
                return Err(Error::EnergyDrift { drift, tolerance: allowed });
            }
            sink(Some((st, e)));
            Ok(())
        });
        match y {
            Ok(y) => {
                let end = FlowEnd {
                    state: SensitivityState::from_state(&y),
                    action: y[6],
                    energy0: e0,
                    energy: energy_unchecked(y[0], y[1], bp),
                };
                return Ok((end, worst));
            }
            Err(err) if violated && attempt < o.max_retries && o.rtol > 1e-13 => {
                let _ = err;
                attempt += 1;
                o.rtol = (o.rtol * 0.01).max(1e-13);
                o.atol = (o.atol * 0.01).max(1e-15);
            }
            Err(err) => return Err(err),
        }
    }
}

/// Integrates the flow with sensitivities and action, returning only the
/// final state.
pub fn flow_end(start: PhasePoint, horizon: f64, beta_prime: f64, opts: &IntegrateOptions) -> Result<FlowEnd> {
    run_monitored(start, horizon, beta_prime, opts, |_| {}).map(|(e, _)| e)
}

/// Time-sampled solution with dense output.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub beta_prime: f64,
    /// Sample times, starting at 0 and strictly increasing.
    pub times: Vec<f64>,
    pub states: Vec<SensitivityState>,
    /// Accumulated action at each sample.
    pub action: Vec<f64>,
    /// First integral at each sample.
    pub energy: Vec<f64>,
    pub energy0: f64,
    /// Largest observed energy drift per unit time, relative to `1 + |C0|`.
    pub max_energy_drift: f64,
    steps: Vec<DenseStep<STATE_DIM>>,
}

impl Trajectory {
    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn end(&self) -> SensitivityState {
        *self.states.last().expect("trajectory has at least one sample")
    }

    pub fn total_action(&self) -> f64 {
        *self.action.last().unwrap_or(&0.0)
    }

    /// Dense-output state `(state, action)` at `s` in `[0, horizon]`.
    pub fn eval(&self, s: f64) -> (SensitivityState, f64) {
        let y = self.eval_raw(s);
        (SensitivityState::from_state(&y), y[6])
    }

    /// Position and velocity at `s`.
    pub fn point_at(&self, s: f64) -> PhasePoint {
        let y = self.eval_raw(s);
        PhasePoint { m: y[0], v: y[1] }
    }

    fn eval_raw(&self, s: f64) -> [f64; STATE_DIM] {
        if self.steps.is_empty() {
            let st = self.states[0];
            return [st.point.m, st.point.v, 1.0, 0.0, 0.0, 1.0, 0.0];
        }
        let s = s.clamp(0.0, self.horizon());
        let idx = self.steps.partition_point(|st| st.s1() < s).min(self.steps.len() - 1);
        self.steps[idx].eval(s)
    }
}

/// Integrates the Euler-Lagrange flow from `start` for time `horizon`,
/// carrying the flow Jacobian and the action `int j ds`.
///
/// Leaving the strip `|m| <= 1 - 1e-9` ends the run with
/// [`Error::BoundaryHit`]. The first integral is monitored, never projected.
pub fn integrate(start: PhasePoint, horizon: f64, beta_prime: f64, opts: &IntegrateOptions) -> Result<Trajectory> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut action = Vec::new();
    let mut en = Vec::new();
    let mut steps = Vec::new();
    let e0 = energy_unchecked(start.m, start.v, beta_prime);
    let (_, worst) = run_monitored(
        start,
        horizon,
        beta_prime,
        opts,
        |event| match event {
            None => {
                times.clear();
                states.clear();
                action.clear();
                en.clear();
                steps.clear();
                times.push(0.0);
                states.push(SensitivityState::initial(start));
                action.push(0.0);
                en.push(e0);
            }
            Some((st, e)) => {
                let y = st.end();
                times.push(st.s1());
                states.push(SensitivityState::from_state(&y));
                action.push(y[6]);
                en.push(e);
                steps.push(st.clone());
            }
        },
    )?;
    Ok(Trajectory {
        beta_prime,
        times,
        states,
        action,
        energy: en,
        energy0: e0,
        max_energy_drift: worst,
        steps,
    })
}

/// Two-point path of the independent dynamics (`beta' = 0`), where the flow
/// is `m'' = 4m`: `m(s) = c1 e^{-2s} + c2 e^{2s}`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IndependentPath {
    pub c1: f64,
    pub c2: f64,
    pub t: f64,
}

impl IndependentPath {
    pub fn m(&self, s: f64) -> f64 {
        self.c1 * math::exp(-2.0 * s) + self.c2 * math::exp(2.0 * s)
    }

    pub fn v(&self, s: f64) -> f64 {
        2.0 * (self.c2 * math::exp(2.0 * s) - self.c1 * math::exp(-2.0 * s))
    }
}

/// The `beta' = 0` path joining `m_start` at time 0 to `m_end` at time `t`.
pub fn closed_form_path_b0(m_start: f64, m_end: f64, t: f64) -> Result<IndependentPath> {
    check_open(m_start)?;
    check_open(m_end)?;
    if !(t >= 0.0) {
        return Err(Error::Domain { what: "t", value: t });
    }
    if t == 0.0 {
        return if m_start == m_end {
            Ok(IndependentPath { c1: m_start, c2: 0.0, t })
        } else {
            Err(Error::Degenerate("zero horizon with distinct endpoints"))
        };
    }
    let (ep, em) = (math::exp(2.0 * t), math::exp(-2.0 * t));
    let w = ep - em;
    Ok(IndependentPath { c1: (m_start * ep - m_end) / w, c2: (m_end - m_start * em) / w, t })
}

/// Flow of the linearization at the origin, `m'' = 4(1 - beta')^2 m`. Exact
/// for `beta' = 0`.
pub fn linear_flow(start: PhasePoint, s: f64, beta_prime: f64) -> PhasePoint {
    let w = 2.0 * (1.0 - beta_prime).abs();
    if w == 0.0 {
        return PhasePoint { m: start.m + start.v * s, v: start.v };
    }
    let (c, sh) = (math::cosh(w * s), math::sinh(w * s));
    PhasePoint { m: start.m * c + start.v * sh / w, v: start.m * w * sh + start.v * c }
}
