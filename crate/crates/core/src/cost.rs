//! Conditioned-history costs and bad magnetizations.
//!
//! The cost of reaching `m'` at time `t` from `m0` is
//! `E_{m'}(m0) = H(m0) + I(m0) + inf { action of paths m0 -> m' }`. Its
//! stationary points in `m0` are exactly the points of the allowed curve that
//! the flow carries to `m'`, so the global minimizer is found among the
//! monotone pieces of the transported curve. A final magnetization is bad when
//! two pieces tie for the global minimum.
//!
//! A second, independent route minimizes `E_{m'}` directly by shooting; it is
//! used to cross-check bad points.

use alloc::vec;
use alloc::vec::Vec;

use crate::acc::{pre_bad_intervals, transport, transport_point, AccSample, Piece, PreBadInterval, TransportGrid, TransportedCurve};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::flow::{flow_end, IntegrateOptions, PhasePoint};
use crate::gamma::history_kernel;
use crate::math;
use crate::model::{check_open, check_strip, static_rate, ModelParams};
use crate::roots::{bisect, golden_min};

/// Two normalized costs closer than this count as a tie.
pub const TIE_TOL: f64 = 1e-7;

/// A solution of the two-point problem.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShootRoot {
    pub v0: f64,
    pub action: f64,
    pub residual: f64,
}

/// Number of initial velocities in the shooting scan.
pub const SHOOT_SCAN: usize = 401;

fn endpoint(m_start: f64, v0: f64, params: &ModelParams) -> Result<(f64, f64, f64)> {
    let opts = IntegrateOptions::from_params(params);
    let e = flow_end(PhasePoint::new(m_start, v0), params.t, params.beta_prime, &opts)?;
    Ok((e.state.point.m, e.state.jac[0][1], e.action))
}

/// Residual `m(t) - m_end`; trajectories leaving the strip count as having
/// overshot toward the side they left on.
fn residual(m_start: f64, v0: f64, m_end: f64, params: &ModelParams) -> f64 {
    match endpoint(m_start, v0, params) {
        Ok((m, _, _)) => m - m_end,
        Err(Error::BoundaryHit { m, .. }) => 2.0 * m.signum(),
        Err(_) => f64::NAN,
    }
}

/// Safeguarded Newton on a sign-changing bracket `[a, b]` of the residual.
fn polish(m_start: f64, m_end: f64, params: &ModelParams, mut a: f64, mut b: f64) -> Option<ShootRoot> {
    let mut ra = residual(m_start, a, m_end, params);
    let rb = residual(m_start, b, m_end, params);
    if ra.is_nan() || rb.is_nan() || ra.signum() == rb.signum() {
        return None;
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let (r, d, action) = match endpoint(m_start, x, params) {
            Ok((m, d, act)) => (m - m_end, d, act),
            Err(Error::BoundaryHit { m, .. }) => (2.0 * m.signum(), f64::NAN, f64::NAN),
            Err(_) => return None,
        };
        if r.abs() < 1e-12 && action.is_finite() {
            return Some(ShootRoot { v0: x, action, residual: r });
        }
        if r.signum() == ra.signum() {
            a = x;
            ra = r;
        } else {
            b = x;
        }
        if (b - a).abs() < 1e-15 * x.abs().max(1.0) {
            return if r.abs() < 1e-9 && action.is_finite() {
                Some(ShootRoot { v0: x, action, residual: r })
            } else {
                None
            };
        }
        let newton = x - r / d;
        let (lo, hi) = (a.min(b), a.max(b));
        x = if d.is_finite() && d != 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (a + b) };
    }
    None
}

/// All initial velocities joining `m_start` to `m_end` in time `t`, sorted by
/// velocity, each with its action.
pub fn shoot(m_start: f64, m_end: f64, params: &ModelParams) -> Result<Vec<ShootRoot>> {
    check_strip(m_start)?;
    check_strip(m_end)?;
    if !(params.t > 0.0) {
        return Err(Error::Degenerate("shooting needs a positive horizon"));
    }
    let pq16 = 16.0 * crate::ldp::bias_product(m_start, params.beta_prime);
    // Energy 4x the separatrix level, widened for fast transfers.
    let v_max = math::sqrt(16.0 - pq16).max(4.0 + 2.0 * ((m_end - m_start).abs() + 0.1) / params.t);
    let n = SHOOT_SCAN;
    let vs: Vec<f64> = (0..n).map(|i| -v_max + 2.0 * v_max * i as f64 / (n - 1) as f64).collect();
    let rs: Vec<f64> = vs.iter().map(|&v| residual(m_start, v, m_end, params)).collect();
    let mut roots: Vec<ShootRoot> = Vec::new();
    for i in 0..n - 1 {
        let (r0, r1) = (rs[i], rs[i + 1]);
        if r0.is_nan() || r1.is_nan() {
            continue;
        }
        let cand = if r0 == 0.0 {
            polish(m_start, m_end, params, vs[i] - 1e-9, vs[i] + 1e-9).or_else(|| {
                endpoint(m_start, vs[i], params)
                    .ok()
                    .map(|(_, _, action)| ShootRoot { v0: vs[i], action, residual: 0.0 })
            })
        } else if r0.signum() != r1.signum() && r1 != 0.0 {
            polish(m_start, m_end, params, vs[i], vs[i + 1])
        } else {
            None
        };
        if let Some(c) = cand {
            if !roots.iter().any(|r| (r.v0 - c.v0).abs() < 1e-9) {
                roots.push(c);
            }
        }
    }
    if roots.is_empty() {
        return Err(Error::NoConnection { m_start, m_end });
    }
    roots.sort_by(|a, b| a.v0.total_cmp(&b.v0));
    Ok(roots)
}

/// Two-point solution near a velocity guess, by Newton continuation with a
/// full scan as fallback.
pub fn shoot_near(m_start: f64, m_end: f64, params: &ModelParams, v_guess: f64) -> Result<ShootRoot> {
    check_strip(m_start)?;
    check_strip(m_end)?;
    let mut v = v_guess;
    for _ in 0..40 {
        match endpoint(m_start, v, params) {
            Ok((m, d, action)) => {
                let r = m - m_end;
                if r.abs() < 1e-12 {
                    return Ok(ShootRoot { v0: v, action, residual: r });
                }
                if d == 0.0 || !d.is_finite() {
                    break;
                }
                let step = r / d;
                v -= step.clamp(-0.5, 0.5);
            }
            Err(_) => break,
        }
    }
    let roots = shoot(m_start, m_end, params)?;
    Ok(*roots
        .iter()
        .min_by(|a, b| (a.v0 - v_guess).abs().total_cmp(&(b.v0 - v_guess).abs()))
        .expect("shoot returns at least one root"))
}

/// Least action among all two-point solutions.
pub fn min_action(m_start: f64, m_end: f64, params: &ModelParams) -> Result<ShootRoot> {
    let roots = shoot(m_start, m_end, params)?;
    Ok(*roots.iter().min_by(|a, b| a.action.total_cmp(&b.action)).expect("nonempty"))
}

/// `E_{m'}(m0)` by shooting, unnormalized.
pub fn history_cost(m0: f64, m_end: f64, params: &ModelParams) -> Result<f64> {
    let beta = params.finite_beta()?;
    Ok(static_rate(m0, beta)? + min_action(m0, m_end, params)?.action)
}

/// Closed-form `E_{m'}(m0)` for independent dynamics (`beta' = 0`), including
/// `H(m0) + I(m0)`.
pub fn cost_independent(m0: f64, m_end: f64, beta: f64, t: f64) -> Result<f64> {
    check_open(m0)?;
    check_open(m_end)?;
    if !(t > 0.0) {
        return Err(Error::Degenerate("closed-form cost needs a positive horizon"));
    }
    let (m, mp) = (m0, m_end);
    let (ep, em) = (math::exp(2.0 * t), math::exp(-2.0 * t));
    let w = ep - em;
    let c1 = (m * ep - mp) / w;
    let c2 = (mp - m * em) / w;
    let r = math::sqrt(1.0 - 4.0 * c1 * c2);
    let log_ratio = math::ln((1.0 - mp * mp) / (1.0 - m * m));
    let end_term = if mp == 0.0 { 0.0 } else { mp * math::ln((r - c1 * em + c2 * ep) / (1.0 - mp)) };
    let start_term = if m == 0.0 { 0.0 } else { m * math::ln((r - c1 + c2) / (1.0 - m)) };
    let frac = ((1.0 - r - 2.0 * c1 * mp * em) / (1.0 + r - 2.0 * c1 * mp * em))
        * ((1.0 + r - 2.0 * c1 * m) / (1.0 - r - 2.0 * c1 * m));
    let integral = 0.25 * (4.0 * t + log_ratio + 2.0 * (end_term - start_term) + math::ln(frac));
    Ok(static_rate(m, beta)? + integral)
}

/// Sampled cost profile `m0 -> E_{m'}(m0)`, normalized to minimum 0.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CostProfile {
    pub m_end: f64,
    /// `(m0, normalized cost)`; unreachable points carry `+inf`.
    pub samples: Vec<(f64, f64)>,
    /// Refined local minimizers `(m0*, normalized cost)`, sorted by `m0*`.
    pub minima: Vec<(f64, f64)>,
    /// Indices into `minima` of the global minimizers within [`TIE_TOL`].
    pub global: Vec<usize>,
    /// The subtracted constant.
    pub offset: f64,
}

/// Cost profile over `m0_grid` (sorted ascending).
pub fn cost_profile<E: Executor>(m_end: f64, params: &ModelParams, m0_grid: &[f64], exec: &E) -> Result<CostProfile> {
    let beta = params.finite_beta()?;
    check_strip(m_end)?;
    if params.t == 0.0 {
        let samples = m0_grid
            .iter()
            .map(|&m0| (m0, if m0 == m_end { 0.0 } else { f64::INFINITY }))
            .collect();
        return Ok(CostProfile {
            m_end,
            samples,
            minima: vec![(m_end, 0.0)],
            global: vec![0],
            offset: static_rate(m_end, beta)?,
        });
    }
    let evals: Vec<Option<(f64, f64)>> = exec.map(m0_grid, |&m0| {
        let root = min_action(m0, m_end, params).ok()?;
        Some((static_rate(m0, beta).ok()? + root.action, root.v0))
    });
    let raw: Vec<f64> = evals.iter().map(|e| e.map_or(f64::INFINITY, |e| e.0)).collect();
    let mut idx = Vec::new();
    for i in 1..m0_grid.len().saturating_sub(1) {
        if raw[i].is_finite() && raw[i] <= raw[i - 1] && raw[i] <= raw[i + 1] {
            idx.push(i);
        }
    }
    let refined: Vec<(f64, f64)> = exec.map(&idx, |&i| {
        let v_guess = evals[i].map(|e| e.1).unwrap_or(0.0);
        let cell = core::cell::Cell::new(v_guess);
        let f = |m0: f64| match shoot_near(m0, m_end, params, cell.get()) {
            Ok(r) => {
                cell.set(r.v0);
                static_rate(m0, beta).unwrap_or(f64::INFINITY) + r.action
            }
            Err(_) => f64::INFINITY,
        };
        golden_min(f, m0_grid[i - 1], m0_grid[i + 1], 1e-8)
    });
    let mut minima: Vec<(f64, f64)> = refined.into_iter().filter(|m| m.1.is_finite()).collect();
    minima.sort_by(|a, b| a.0.total_cmp(&b.0));
    let offset = minima
        .iter()
        .map(|m| m.1)
        .chain(raw.iter().copied())
        .fold(f64::INFINITY, f64::min);
    if !offset.is_finite() {
        return Err(Error::Unreachable { m_end });
    }
    for m in &mut minima {
        m.1 -= offset;
    }
    let global = minima.iter().enumerate().filter(|(_, m)| m.1 <= TIE_TOL).map(|(i, _)| i).collect();
    let samples = m0_grid.iter().zip(&raw).map(|(&m0, &c)| (m0, c - offset)).collect();
    Ok(CostProfile { m_end, samples, minima, global, offset })
}

/// Exact cost of the history on one monotone piece that ends at `m_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BranchCost {
    /// Index of the piece in [`TransportedCurve::pieces`].
    pub piece: usize,
    pub m0: f64,
    /// Unnormalized `H(m0) + I(m0) + action`.
    pub cost: f64,
}

/// Solves `m(t; m0) = m_end` on a monotone piece.
fn solve_on_piece(curve: &TransportedCurve, piece: &Piece, m_end: f64) -> Result<AccSample> {
    let s = &curve.samples[piece.first..=piece.last];
    let sign = if piece.increasing { 1.0 } else { -1.0 };
    // r(m0) = sign (m(t) - m_end) is increasing along the piece.
    let k = s.partition_point(|x| sign * (x.end.m - m_end) < 0.0);
    if k < s.len() && s[k].end.m == m_end {
        return Ok(s[k]);
    }
    if k == 0 || k == s.len() {
        return Err(Error::Unreachable { m_end });
    }
    let (mut a, mut b) = (s[k - 1].m0, s[k].m0);
    let mut best = if (s[k - 1].end.m - m_end).abs() < (s[k].end.m - m_end).abs() { s[k - 1] } else { s[k] };
    let mut x = a + (b - a) * (m_end - s[k - 1].end.m) / (s[k].end.m - s[k - 1].end.m);
    if !(x > a && x < b) {
        x = 0.5 * (a + b);
    }
    for _ in 0..100 {
        let p = transport_point(x, &curve.params)?;
        let r = sign * (p.end.m - m_end);
        if (p.end.m - m_end).abs() <= (best.end.m - m_end).abs() {
            best = p;
        }
        if r.abs() < 1e-13 || b - a < 4.0 * f64::EPSILON * x.abs().max(1e-300) {
            return Ok(best);
        }
        if r < 0.0 {
            a = x;
        } else {
            b = x;
        }
        let newton = x - (p.end.m - m_end) / p.f;
        x = if p.f != 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
    }
    Ok(best)
}

/// Costs of all pieces of the transported curve that reach `m_end`.
pub fn branch_costs(curve: &TransportedCurve, m_end: f64) -> Result<Vec<BranchCost>> {
    let beta = curve.params.finite_beta()?;
    let mut out = Vec::new();
    for (i, piece) in curve.pieces().iter().enumerate() {
        if !piece.covers(m_end) {
            continue;
        }
        match solve_on_piece(curve, piece, m_end) {
            Ok(s) => out.push(BranchCost { piece: i, m0: s.m0, cost: s.cost(beta) }),
            Err(Error::Unreachable { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// A bad magnetization with its competing histories.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BadPoint {
    pub m: f64,
    /// Competing optimal initial points, `m0_a < m0_b`.
    pub m0_a: f64,
    pub m0_b: f64,
    /// Cost difference of the two histories at `m`.
    pub gap: f64,
    /// `|gamma(+|m)|` difference between the two histories.
    pub jump: f64,
}

/// Pre-bad intervals and bad points at one parameter point.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BadPointReport {
    pub params: ModelParams,
    pub pre_bad: Vec<PreBadInterval>,
    pub bad: Vec<BadPoint>,
    /// Number of curve samples whose trajectories left the strip.
    pub quarantined: usize,
}

impl BadPointReport {
    pub fn contains_zero(&self) -> bool {
        self.bad.iter().any(|b| b.m.abs() < 1e-6)
    }
}

/// Scan settings for [`classify_bad`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BadScan {
    /// Global `m'` grid size on `[lo, hi]`.
    pub grid_points: usize,
    pub lo: f64,
    pub hi: f64,
    /// Extra uniform points inside each pre-bad interval.
    pub interval_points: usize,
    pub transport: TransportGrid,
}

impl Default for BadScan {
    fn default() -> Self {
        BadScan { grid_points: 2001, lo: -0.99, hi: 0.99, interval_points: 64, transport: TransportGrid::default() }
    }
}

fn argmin(costs: &[BranchCost]) -> Option<BranchCost> {
    costs.iter().copied().min_by(|a, b| a.cost.total_cmp(&b.cost))
}

/// Pre-bad intervals and bad magnetizations at `params`.
pub fn classify_bad<E: Executor>(params: &ModelParams, scan: &BadScan, exec: &E) -> Result<BadPointReport> {
    params.finite_beta()?;
    if params.t == 0.0 {
        return Ok(BadPointReport { params: *params, pre_bad: Vec::new(), bad: Vec::new(), quarantined: 0 });
    }
    let curve = transport(params, &scan.transport, exec)?;
    let pre_bad = pre_bad_intervals(&curve);
    let mut bad: Vec<BadPoint> = Vec::new();
    for iv in &pre_bad {
        let mut pts: Vec<f64> = (0..scan.grid_points)
            .map(|i| scan.lo + (scan.hi - scan.lo) * i as f64 / (scan.grid_points - 1) as f64)
            .filter(|&m| m > iv.lo && m < iv.hi)
            .collect();
        for i in 1..=scan.interval_points {
            pts.push(iv.lo + (iv.hi - iv.lo) * i as f64 / (scan.interval_points + 1) as f64);
        }
        if iv.lo < 0.0 && iv.hi > 0.0 {
            pts.push(0.0);
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let costs: Vec<Result<Vec<BranchCost>>> = exec.map(&pts, |&m| branch_costs(&curve, m));
        let mut winners = Vec::with_capacity(pts.len());
        for c in costs {
            winners.push(argmin(&c?));
        }
        let mut cells = Vec::new();
        for i in 0..pts.len().saturating_sub(1) {
            if let (Some(a), Some(b)) = (winners[i], winners[i + 1]) {
                if a.piece != b.piece {
                    cells.push((pts[i], pts[i + 1], a.piece, b.piece));
                }
            }
        }
        let found: Vec<Result<Option<BadPoint>>> =
            exec.map(&cells, |&(lo, hi, pa, pb)| locate_switch(&curve, lo, hi, pa, pb, 0));
        for f in found {
            if let Some(b) = f? {
                bad.push(b);
            }
        }
    }
    // Symmetric shortcut: 0 is bad when its global minimizer is off-center.
    if pre_bad.iter().any(|iv| iv.lo < 0.0 && iv.hi > 0.0) {
        if let Some(best) = argmin(&branch_costs(&curve, 0.0)?) {
            if best.m0.abs() > 1e-9 {
                bad.retain(|b| b.m.abs() >= 1e-6);
                bad.push(BadPoint { m: 0.0, m0_a: -best.m0.abs(), m0_b: best.m0.abs(), gap: 0.0, jump: f64::NAN });
            }
        }
    }
    bad.sort_by(|a, b| a.m.total_cmp(&b.m));
    bad.dedup_by(|a, b| (a.m - b.m).abs() < 1e-6);
    let jumps: Vec<Result<f64>> = exec.map(&bad, |b| {
        let ka = history_kernel(b.m0_a, params)?;
        let kb = history_kernel(b.m0_b, params)?;
        Ok((ka.gamma_plus - kb.gamma_plus).abs())
    });
    for (b, j) in bad.iter_mut().zip(jumps) {
        b.jump = j?;
    }
    Ok(BadPointReport { params: *params, pre_bad, bad, quarantined: curve.quarantine.len() })
}

/// Finds where the optimal piece switches from `pa` (at `lo`) to `pb` (at
/// `hi`). Returns `None` when the switch is not a tie of two coexisting
/// histories.
fn locate_switch(curve: &TransportedCurve, lo: f64, hi: f64, pa: usize, pb: usize, depth: u32) -> Result<Option<BadPoint>> {
    let pieces = curve.pieces();
    let (a, b) = (&pieces[pa], &pieces[pb]);
    let both = |m: f64| a.covers(m) && b.covers(m);
    if !(both(lo) && both(hi)) {
        if depth >= 4 {
            return Ok(None);
        }
        let n = 8;
        let pts: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
        let mut prev: Option<BranchCost> = None;
        for (k, &m) in pts.iter().enumerate() {
            let w = argmin(&branch_costs(curve, m)?);
            if let (Some(p), Some(w)) = (prev, w) {
                if p.piece != w.piece {
                    return locate_switch(curve, pts[k - 1], m, p.piece, w.piece, depth + 1);
                }
            }
            prev = w;
        }
        return Ok(None);
    }
    let beta = curve.params.finite_beta()?;
    let cost_on = |p: &Piece, m: f64| solve_on_piece(curve, p, m).map(|s| (s.m0, s.cost(beta)));
    let delta = |m: f64| match (cost_on(a, m), cost_on(b, m)) {
        (Ok(x), Ok(y)) => x.1 - y.1,
        _ => f64::NAN,
    };
    let m = bisect(delta, lo, hi, 1e-8)?;
    let (ma, ca) = cost_on(a, m)?;
    let (mb, cb) = cost_on(b, m)?;
    // The tie must be global.
    if let Some(w) = argmin(&branch_costs(curve, m)?) {
        if w.cost < ca.min(cb) - TIE_TOL {
            return Ok(None);
        }
    }
    Ok(Some(BadPoint { m, m0_a: ma.min(mb), m0_b: ma.max(mb), gap: (ca - cb).abs(), jump: f64::NAN }))
}

/// Lowest cost over `m0` in `[lo, hi]` by shooting with continuation, a
/// coarse scan and golden-section refinement. Returns `(m0*, cost)`.
pub fn profile_minimum(m_end: f64, params: &ModelParams, lo: f64, hi: f64, points: usize) -> Result<(f64, f64)> {
    let beta = params.finite_beta()?;
    let grid: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
    let mut v = min_action(grid[0], m_end, params)?.v0;
    let mut vals = Vec::with_capacity(points);
    for &m0 in &grid {
        let r = shoot_near(m0, m_end, params, v)?;
        v = r.v0;
        vals.push((static_rate(m0, beta)? + r.action, r.v0));
    }
    let i = (0..points).min_by(|&a, &b| vals[a].0.total_cmp(&vals[b].0)).unwrap_or(0);
    let (a, b) = (grid[i.saturating_sub(1)], grid[(i + 1).min(points - 1)]);
    let cell = core::cell::Cell::new(vals[i].1);
    let f = |m0: f64| match shoot_near(m0, m_end, params, cell.get()) {
        Ok(r) => {
            cell.set(r.v0);
            static_rate(m0, beta).unwrap_or(f64::INFINITY) + r.action
        }
        Err(_) => f64::INFINITY,
    };
    Ok(golden_min(f, a, b, 1e-9))
}

/// Bad point near `m_guess` located by the shooting route alone: the cost
/// difference between the best history starting below `split` and the best
/// starting above it is bisected in `m'` over `[m_guess - width, m_guess + width]`.
pub fn profile_bad_point(params: &ModelParams, m_guess: f64, width: f64, split: f64) -> Result<f64> {
    let lo_win = (-0.98, split);
    let hi_win = (split, 0.98);
    let delta = |m: f64| -> f64 {
        match (profile_minimum(m, params, lo_win.0, lo_win.1, 49), profile_minimum(m, params, hi_win.0, hi_win.1, 49)) {
            (Ok(a), Ok(b)) => a.1 - b.1,
            _ => f64::NAN,
        }
    };
    bisect(delta, m_guess - width, m_guess + width, 1e-8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::flow::closed_form_path_b0;

    fn params(beta: f64, bp: f64, t: f64) -> ModelParams {
        ModelParams::new(beta, bp, t).unwrap()
    }

    #[test]
    fn fixed_point_shoot() {
        let r = crate::model::largest_root(1.5);
        let roots = shoot(r, r, &params(1.0, 1.5, 0.5)).unwrap();
        let zero = roots.iter().find(|x| x.v0.abs() < 1e-8).expect("root at v0 = 0");
        assert!(zero.action.abs() < 1e-10);
    }

    #[test]
    fn independent_shoot_matches_closed_form() {
        let p = params(1.0, 0.0, 0.8);
        let roots = shoot(0.3, -0.2, &p).unwrap();
        assert_eq!(roots.len(), 1);
        let path = closed_form_path_b0(0.3, -0.2, 0.8).unwrap();
        assert!((roots[0].v0 - path.v(0.0)).abs() < 1e-9);
        let cost = static_rate(0.3, 1.0).unwrap() + roots[0].action;
        assert!((cost - cost_independent(0.3, -0.2, 1.0, 0.8).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn periodic_lobe_has_several_windings() {
        // Small lobe oscillations have period 2 pi / 1.427 ~ 4.4, so t = 3 is
        // still inside the first period and has a single connection.
        let roots = shoot(0.3, 0.3, &params(1.0, 1.5, 3.0)).unwrap();
        assert_eq!(roots.len(), 1, "{roots:?}");
        let roots = shoot(0.3, 0.3, &params(1.0, 1.5, 6.0)).unwrap();
        assert!(roots.len() >= 2, "{roots:?}");
    }

    #[test]
    fn symmetric_profile_has_two_global_minima() {
        let p = params(1.25, 0.0, 0.45);
        let grid: Vec<f64> = (0..=80).map(|i| -0.9 + 1.8 * i as f64 / 80.0).collect();
        let prof = cost_profile(0.0, &p, &grid, &Sequential).unwrap();
        assert_eq!(prof.global.len(), 2, "{:?}", prof.minima);
        let (a, b) = (prof.minima[prof.global[0]].0, prof.minima[prof.global[1]].0);
        assert!((a + b).abs() < 1e-6 && a < 0.0);
        for (i, &(m0, c)) in prof.samples.iter().enumerate() {
            let mirror = prof.samples[prof.samples.len() - 1 - i];
            assert!((m0 + mirror.0).abs() < 1e-12);
            assert!((c - mirror.1).abs() < 1e-8);
        }
        // The profile's minimizers are the transported-curve stationary points.
        let curve = transport(&p, &TransportGrid::default(), &Sequential).unwrap();
        let mut bc = branch_costs(&curve, 0.0).unwrap();
        bc.sort_by(|x, y| x.cost.total_cmp(&y.cost));
        assert!((bc[0].m0.abs() - b).abs() < 1e-6);
    }

    #[test]
    fn regime_2a_bad_set() {
        let p = params(1.25, 0.0, 0.45);
        let rep = classify_bad(&p, &BadScan::default(), &Sequential).unwrap();
        assert_eq!(rep.bad.len(), 1, "{:?}", rep.bad);
        let b = rep.bad[0];
        assert_eq!(b.m, 0.0);
        assert!((b.m0_a + b.m0_b).abs() < 1e-9 && b.m0_b > 0.0);
        let expect = (1.25 * b.m0_b).tanh() * (-0.9f64).exp();
        assert!((b.jump - expect).abs() < 1e-8);
        let before = classify_bad(&p.with_t(0.3), &BadScan::default(), &Sequential).unwrap();
        assert!(before.pre_bad.is_empty() && before.bad.is_empty());
        let zero = classify_bad(&p.with_t(0.0), &BadScan::default(), &Sequential).unwrap();
        assert!(zero.bad.is_empty());
    }
}
