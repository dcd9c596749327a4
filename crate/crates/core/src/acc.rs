//! Curve of allowed initial configurations and its transport by the flow.
//!
//! An optimal conditioned history must leave its initial point `m0` with the
//! velocity `g(m0)` fixed by the free-end condition
//! `lambda*(m0, g(m0)) = -beta m0 + artanh(m0)`. Solving for the velocity gives
//! `g(m) = 2 (e^{2(beta' - beta) m}(1 + m) - e^{2 beta m}(1 - m)) / D(m)`.
//! Transporting the curve `{(m0, g(m0))}` for time `t` and projecting onto `m`
//! yields the candidate endpoints; overhangs of that projection (several `m0`
//! reaching the same `m'`) are the pre-bad magnetizations. They are born in
//! folds, where `F = dm(t)/dm0` and `dF/dm0` vanish together.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::flow::{self, force_derivs, FlowEnd, IntegrateOptions, PhasePoint};
use crate::math;
use crate::model::{check_open, largest_root, mean_field_roots, static_rate, ModelParams, STRIP_DELTA};
use crate::ode;

/// Which algebraic form of the curve to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum AccForm {
    /// Solution of the free-end condition (the default and the one that is
    /// transported).
    #[default]
    FreeEnd,
    /// `2 e^{2 beta' m}((1 + m) - e^{2m(beta - beta')}(1 - m)) / D`, kept only
    /// for comparison. It does not satisfy the free-end condition.
    Printed,
}

/// `(g, g', g'')` of the free-end curve.
pub(crate) fn curve_derivs(m: f64, beta: f64, bp: f64) -> (f64, f64, f64) {
    let a = 2.0 * (bp - beta);
    let b = 2.0 * beta;
    let (ea, eb) = (math::exp(a * m), math::exp(b * m));
    let u = ea * (1.0 + m) - eb * (1.0 - m);
    let u1 = ea * (a * (1.0 + m) + 1.0) - eb * (b * (1.0 - m) - 1.0);
    let u2 = ea * (a * a * (1.0 + m) + 2.0 * a) - eb * (b * b * (1.0 - m) - 2.0 * b);
    let e = math::exp(2.0 * bp * m);
    let d = (1.0 + m) + e * (1.0 - m);
    let d1 = 1.0 - e + 2.0 * bp * e * (1.0 - m);
    let d2 = 4.0 * bp * bp * e * (1.0 - m) - 4.0 * bp * e;
    let di = 1.0 / d;
    let g = 2.0 * u * di;
    let g1 = 2.0 * (u1 * d - u * d1) * di * di;
    let g2 = 2.0 * (u2 * di - 2.0 * u1 * d1 * di * di - u * d2 * di * di + 2.0 * u * d1 * d1 * di * di * di);
    (g, g1, g2)
}

/// Initial velocity `g(m0)` of an optimal history starting at `m0`.
pub fn acc_curve(m0: f64, params: &ModelParams) -> Result<f64> {
    acc_curve_with(m0, params, AccForm::FreeEnd)
}

pub fn acc_curve_with(m0: f64, params: &ModelParams, form: AccForm) -> Result<f64> {
    check_open(m0)?;
    let beta = params.finite_beta()?;
    let bp = params.beta_prime;
    Ok(match form {
        AccForm::FreeEnd => curve_derivs(m0, beta, bp).0,
        AccForm::Printed => {
            let e = math::exp(2.0 * bp * m0);
            let d = (1.0 + m0) + e * (1.0 - m0);
            2.0 * e * ((1.0 + m0) - math::exp(2.0 * m0 * (beta - bp)) * (1.0 - m0)) / d
        }
    })
}

/// `g'(m0)`.
pub fn acc_slope(m0: f64, params: &ModelParams) -> Result<f64> {
    check_open(m0)?;
    Ok(curve_derivs(m0, params.finite_beta()?, params.beta_prime).1)
}

/// `g''(m0)`.
pub fn acc_curvature(m0: f64, params: &ModelParams) -> Result<f64> {
    check_open(m0)?;
    Ok(curve_derivs(m0, params.finite_beta()?, params.beta_prime).2)
}

/// `g'(0) = 2 - 4 beta + 2 beta'`.
pub fn acc_slope_origin(params: &ModelParams) -> f64 {
    2.0 - 4.0 * params.beta + 2.0 * params.beta_prime
}

/// Whether the curve enters the open periodic region of the flow: some
/// `0 < m < m*(beta')` with `|g(m)| < |drift(m)|`, i.e. first integral below
/// the separatrix level 4.
pub fn enters_periodic_region(params: &ModelParams) -> Result<bool> {
    let beta = params.finite_beta()?;
    let bp = params.beta_prime;
    let r = largest_root(bp);
    if r == 0.0 {
        return Ok(false);
    }
    let n = 4000;
    for i in 1..n {
        let m = r * i as f64 / n as f64;
        let g = curve_derivs(m, beta, bp).0;
        if flow::energy_excess(PhasePoint::new(m, g), bp)? < 0.0 {
            return Ok(true);
        }
    }
    Ok(false)
}

/// A point of the transported curve.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AccSample {
    pub m0: f64,
    pub v0: f64,
    pub end: PhasePoint,
    /// `dm(t)/dm0` along the curve.
    pub f: f64,
    pub action: f64,
}

impl AccSample {
    /// Total cost `H(m0) + I(m0) + action` of the history.
    pub fn cost(&self, beta: f64) -> f64 {
        static_rate(self.m0, beta).unwrap_or(f64::INFINITY) + self.action
    }
}

/// Sampling of the `m0` axis for [`transport`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransportGrid {
    pub points: usize,
    pub lo: f64,
    pub hi: f64,
    /// Refinement stops at this spacing.
    pub min_spacing: f64,
    /// Neighbors whose `F` differs by more than this are bisected.
    pub refine_jump: f64,
    /// Soft cap on the number of samples for jump-driven refinement. Sign
    /// changes of `F` are always refined.
    pub max_samples: usize,
}

impl Default for TransportGrid {
    fn default() -> Self {
        TransportGrid { points: 401, lo: -0.999, hi: 0.999, min_spacing: 1e-12, refine_jump: 0.5, max_samples: 20_000 }
    }
}

impl TransportGrid {
    pub fn with_points(mut self, points: usize) -> Self {
        self.points = points;
        self
    }

    pub fn with_window(mut self, lo: f64, hi: f64) -> Self {
        self.lo = lo;
        self.hi = hi;
        self
    }
}

/// A start point whose trajectory failed, kept for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct Quarantined {
    pub m0: f64,
    pub error: Error,
}

/// The transported curve, sorted by `m0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportedCurve {
    pub params: ModelParams,
    pub samples: Vec<AccSample>,
    pub quarantine: Vec<Quarantined>,
}

/// Runs the curve point at `m0` through the flow for time `params.t`.
pub fn transport_point(m0: f64, params: &ModelParams) -> Result<AccSample> {
    let beta = params.finite_beta()?;
    let (g, g1, _) = curve_derivs(m0, beta, params.beta_prime);
    let opts = IntegrateOptions::from_params(params);
    let end: FlowEnd = flow::flow_end(PhasePoint::new(m0, g), params.t, params.beta_prime, &opts)?;
    let j = end.state.jac;
    Ok(AccSample { m0, v0: g, end: end.state.point, f: j[0][0] + j[0][1] * g1, action: end.action })
}

/// Transports the curve over the grid with `F`-driven refinement.
///
/// The mean-field roots of `beta` are always sampled: their histories are the
/// typical ones and survive for all `t`, even when the band of `m0` around
/// them that stays in the strip is far narrower than the grid spacing. Any
/// block of surviving samples that holds fewer than a quarter of the grid
/// points is laid out again on its own window (at most ten levels deep), with
/// the minimal spacing scaled down accordingly.
pub fn transport<E: Executor>(params: &ModelParams, grid: &TransportGrid, exec: &E) -> Result<TransportedCurve> {
    let beta = params.finite_beta()?;
    if grid.points < 2 || !(grid.lo < grid.hi) || grid.lo <= -1.0 + STRIP_DELTA || grid.hi >= 1.0 - STRIP_DELTA {
        return Err(Error::Domain { what: "transport grid", value: grid.points as f64 });
    }
    let seeds: Vec<f64> = mean_field_roots(beta)
        .into_iter()
        .flat_map(|m| [-m, m])
        .filter(|m| m.abs() < 1.0 - STRIP_DELTA)
        .collect();
    let lo = seeds.iter().copied().fold(grid.lo, f64::min);
    let hi = seeds.iter().copied().fold(grid.hi, f64::max);
    let all = resolve_window(params, grid, lo, hi, grid.min_spacing, &seeds, 0, exec);
    let mut samples = Vec::new();
    let mut quarantine = Vec::new();
    for (m0, r) in all {
        match r {
            Ok(s) => samples.push(s),
            Err(error) => quarantine.push(Quarantined { m0, error }),
        }
    }
    Ok(TransportedCurve { params: *params, samples, quarantine })
}

type Sampled = Vec<(f64, Result<AccSample>)>;

#[allow(clippy::too_many_arguments)]
fn resolve_window<E: Executor>(
    params: &ModelParams,
    grid: &TransportGrid,
    lo: f64,
    hi: f64,
    min_spacing: f64,
    seeds: &[f64],
    depth: u32,
    exec: &E,
) -> Sampled {
    let mut all = transport_window(params, grid, lo, hi, min_spacing, seeds, exec);
    if depth >= 10 {
        return all;
    }
    let (wlo, whi) = (all[0].0, all[all.len() - 1].0);
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < all.len() {
        if all[i].1.is_err() {
            i += 1;
            continue;
        }
        let a = i;
        while i + 1 < all.len() && all[i + 1].1.is_ok() {
            i += 1;
        }
        blocks.push((a, i));
        i += 1;
    }
    let mut windows = Vec::new();
    for (a, b) in blocks {
        if (b - a + 1) * 4 >= grid.points {
            continue;
        }
        let new_lo = if a > 0 { all[a - 1].0 } else { all[a].0 };
        let new_hi = if b + 1 < all.len() { all[b + 1].0 } else { all[b].0 };
        if new_hi - new_lo < 0.5 * (whi - wlo) && new_hi > new_lo {
            windows.push((new_lo, new_hi));
        }
    }
    for (nlo, nhi) in windows {
        let spacing = min_spacing * (nhi - nlo) / (whi - wlo);
        let sub = resolve_window(params, grid, nlo, nhi, spacing, seeds, depth + 1, exec);
        all.retain(|(m, _)| *m < nlo || *m > nhi);
        all.extend(sub);
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    all
}

fn transport_window<E: Executor>(
    params: &ModelParams,
    grid: &TransportGrid,
    lo: f64,
    hi: f64,
    min_spacing: f64,
    seeds: &[f64],
    exec: &E,
) -> Sampled {
    let n = grid.points;
    let mut m0s: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    m0s.extend(seeds.iter().copied().filter(|s| lo < *s && *s < hi));
    m0s.sort_by(f64::total_cmp);
    m0s.dedup();
    let mut all: Sampled =
        m0s.iter().copied().zip(exec.map(&m0s, |&m| transport_point(m, params))).collect();
    loop {
        let mut forced = Vec::new();
        let mut optional = Vec::new();
        for w in all.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if b.0 - a.0 <= min_spacing {
                continue;
            }
            let mid = 0.5 * (a.0 + b.0);
            match (&a.1, &b.1) {
                (Ok(sa), Ok(sb)) => {
                    if (sa.f >= 0.0) != (sb.f >= 0.0) {
                        forced.push(mid);
                    } else if (sa.f - sb.f).abs() > grid.refine_jump {
                        optional.push(mid);
                    }
                }
                // Pin down where trajectories start leaving the strip.
                (Ok(_), Err(_)) | (Err(_), Ok(_)) => forced.push(mid),
                _ => {}
            }
        }
        let room = grid.max_samples.saturating_sub(all.len() + forced.len());
        if optional.len() > room {
            optional.clear();
        }
        let mut new = forced;
        new.extend(optional);
        if new.is_empty() {
            break;
        }
        new.sort_by(f64::total_cmp);
        let res = exec.map(&new, |&m| transport_point(m, params));
        all.extend(new.into_iter().zip(res));
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    all
}

/// A maximal run of samples on which `m(t)` is monotone in `m0`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Piece {
    /// Index range `[first, last]` into the curve samples.
    pub first: usize,
    pub last: usize,
    pub increasing: bool,
    pub m0_lo: f64,
    pub m0_hi: f64,
    pub m_lo: f64,
    pub m_hi: f64,
}

impl Piece {
    pub fn covers(&self, m: f64) -> bool {
        self.m_lo <= m && m <= self.m_hi
    }
}

impl TransportedCurve {
    /// Splits the samples into monotone pieces at sign changes of `F` and at
    /// quarantined gaps.
    pub fn pieces(&self) -> Vec<Piece> {
        let s = &self.samples;
        let mut out = Vec::new();
        if s.is_empty() {
            return out;
        }
        let mut q = 0;
        let mut first = 0;
        for i in 1..=s.len() {
            let split = if i == s.len() {
                true
            } else {
                while q < self.quarantine.len() && self.quarantine[q].m0 < s[i - 1].m0 {
                    q += 1;
                }
                let gap = q < self.quarantine.len() && self.quarantine[q].m0 < s[i].m0;
                gap || (s[i].f >= 0.0) != (s[i - 1].f >= 0.0)
            };
            if split {
                let (a, b) = (s[first].end.m, s[i - 1].end.m);
                out.push(Piece {
                    first,
                    last: i - 1,
                    increasing: s[first].f >= 0.0,
                    m0_lo: s[first].m0,
                    m0_hi: s[i - 1].m0,
                    m_lo: a.min(b),
                    m_hi: a.max(b),
                });
                first = i;
            }
        }
        out
    }

    /// Smallest `F` over the samples.
    pub fn min_f(&self) -> f64 {
        self.samples.iter().map(|s| s.f).fold(f64::INFINITY, f64::min)
    }
}

/// Maximal range of final magnetizations reached by at least two pieces.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PreBadInterval {
    pub lo: f64,
    pub hi: f64,
    /// Pieces overlapping the interval.
    pub branches: Vec<Piece>,
}

/// Pre-bad intervals of a transported curve.
pub fn pre_bad_intervals(curve: &TransportedCurve) -> Vec<PreBadInterval> {
    let pieces = curve.pieces();
    let mut events: Vec<(f64, i32)> = Vec::with_capacity(2 * pieces.len());
    for p in &pieces {
        if p.m_hi > p.m_lo {
            events.push((p.m_lo, 1));
            events.push((p.m_hi, -1));
        }
    }
    // Closing events first at equal coordinates: touching pieces do not overlap.
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out: Vec<PreBadInterval> = Vec::new();
    let mut depth = 0;
    let mut open = None;
    for (x, d) in events {
        let before = depth;
        depth += d;
        if before < 2 && depth >= 2 {
            open = Some(x);
        } else if before >= 2 && depth < 2 {
            let lo = open.take().unwrap_or(x);
            if x > lo {
                let branches =
                    pieces.iter().copied().filter(|p| p.m_lo < x && p.m_hi > lo).collect();
                out.push(PreBadInterval { lo, hi: x, branches });
            }
        }
    }
    out
}

/// State of the curve tangent system at time `t`: position, first and second
/// derivatives of `(m, v)` with respect to `m0` along the curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveJet {
    pub m: f64,
    pub v: f64,
    /// `F = dm/dm0`.
    pub m1: f64,
    /// `dF/dt`.
    pub v1: f64,
    /// `dF/dm0`.
    pub m2: f64,
    /// `d^2 F / dt dm0`.
    pub v2: f64,
}

struct JetSystem {
    bp: f64,
}

impl ode::System<6> for JetSystem {
    fn rhs(&self, _s: f64, y: &[f64; 6], dy: &mut [f64; 6]) -> bool {
        if !(y[0].abs() <= 1.0 - STRIP_DELTA) {
            return false;
        }
        let (f, f1, f2) = force_derivs(y[0], self.bp);
        dy[0] = y[1];
        dy[1] = f;
        dy[2] = y[3];
        dy[3] = f1 * y[2];
        dy[4] = y[5];
        dy[5] = f1 * y[4] + f2 * y[2] * y[2];
        true
    }
}

fn jet_start(m0: f64, beta: f64, bp: f64) -> [f64; 6] {
    let (g, g1, g2) = curve_derivs(m0, beta, bp);
    [m0, g, 1.0, g1, 0.0, g2]
}

fn jet_from(y: &[f64; 6]) -> CurveJet {
    CurveJet { m: y[0], v: y[1], m1: y[2], v1: y[3], m2: y[4], v2: y[5] }
}

/// Second-order jet of the transported curve at `(t, m0)`.
pub fn curve_jet(m0: f64, t: f64, beta: f64, beta_prime: f64, opts: &ode::Options) -> Result<CurveJet> {
    check_open(m0)?;
    let y = ode::integrate(&JetSystem { bp: beta_prime }, 0.0, jet_start(m0, beta, beta_prime), t, opts, |_| Ok(()))?;
    Ok(jet_from(&y))
}

/// A fold of the transported curve.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Fold {
    pub t: f64,
    pub m0: f64,
}

/// Coarse-scan resolution of [`fold_times`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldScan {
    pub time_rows: usize,
    pub m0_columns: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for FoldScan {
    fn default() -> Self {
        FoldScan { time_rows: 200, m0_columns: 400, lo: -0.999, hi: 0.999 }
    }
}

/// All folds `F = dF/dm0 = 0` with `t <= t_max`, sorted by time. The time of
/// `params` is ignored.
pub fn fold_times<E: Executor>(params: &ModelParams, t_max: f64, scan: &FoldScan, exec: &E) -> Result<Vec<Fold>> {
    let beta = params.finite_beta()?;
    let bp = params.beta_prime;
    if !(t_max > 0.0) {
        return Err(Error::Domain { what: "t_max", value: t_max });
    }
    let mut o = ode::Options::new(params.rtol, params.atol);
    o.max_steps = 200_000;
    let rows = scan.time_rows;
    let cols = scan.m0_columns;
    // Quadratic spacing: folds at large beta appear within t ~ 1e-2.
    let times: Vec<f64> = (0..=rows).map(|k| {
        let x = k as f64 / rows as f64;
        t_max * x * x
    }).collect();
    let m0s: Vec<f64> =
        (0..cols).map(|j| scan.lo + (scan.hi - scan.lo) * j as f64 / (cols - 1) as f64).collect();
    // F(t_k, m0_j); NaN once the trajectory has left the strip.
    let columns: Vec<Vec<f64>> = exec.map(&m0s, |&m0| {
        let mut col = vec![f64::NAN; rows + 1];
        col[0] = 1.0;
        let mut k = 1;
        let _ = ode::integrate(&JetSystem { bp }, 0.0, jet_start(m0, beta, bp), t_max, &o, |st| {
            while k <= rows && times[k] <= st.s1() {
                col[k] = st.eval(times[k])[2];
                k += 1;
            }
            Ok(())
        });
        col
    });
    let f = |k: usize, j: usize| columns[j][k];
    let mut seeds = Vec::new();
    for k in 1..=rows {
        for j in 1..cols - 1 {
            let (c, l, r) = (f(k, j), f(k, j - 1), f(k, j + 1));
            if c.is_nan() || l.is_nan() || r.is_nan() {
                continue;
            }
            let prev = (j.saturating_sub(2)..=(j + 2).min(cols - 1)).map(|jj| f(k - 1, jj));
            let is_min = c <= l && c <= r;
            let is_max = c >= l && c >= r;
            let born = is_min && c < 0.0 && prev.clone().all(|x| x > 0.0);
            let merged = is_max && c > 0.0 && prev.clone().all(|x| x < 0.0);
            if born || merged {
                seeds.push(Fold { t: 0.5 * (times[k - 1] + times[k]), m0: m0s[j] });
            }
        }
    }
    let refined: Vec<Option<Fold>> = exec.map(&seeds, |s| refine_fold(*s, beta, bp, t_max, scan, &o).ok());
    let mut folds: Vec<Fold> = Vec::new();
    for fd in refined.into_iter().flatten() {
        if !folds.iter().any(|g| (g.t - fd.t).abs() < 1e-6 && (g.m0 - fd.m0).abs() < 1e-6) {
            folds.push(fd);
        }
    }
    folds.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.m0.total_cmp(&b.m0)));
    if folds.is_empty() {
        return Err(Error::NoFold { t_max });
    }
    Ok(folds)
}

/// Newton iteration on `(F, dF/dm0) = 0` in `(t, m0)`.
fn refine_fold(seed: Fold, beta: f64, bp: f64, t_max: f64, scan: &FoldScan, o: &ode::Options) -> Result<Fold> {
    let (mut t, mut m0) = (seed.t, seed.m0);
    let h = 1e-5;
    for _ in 0..60 {
        let c = curve_jet(m0, t, beta, bp, o)?;
        let cp = curve_jet(m0 + h, t, beta, bp, o)?;
        let cm = curve_jet(m0 - h, t, beta, bp, o)?;
        let g_m0 = (cp.m2 - cm.m2) / (2.0 * h);
        // [[dF/dt, dF/dm0], [dG/dt, dG/dm0]]
        let (a, b, cc, d) = (c.v1, c.m2, c.v2, g_m0);
        let det = a * d - b * cc;
        if det == 0.0 || !det.is_finite() {
            return Err(Error::NoConvergence("singular fold Jacobian"));
        }
        let dt = (d * c.m1 - b * c.m2) / det;
        let dm = (a * c.m2 - cc * c.m1) / det;
        let mut lam = 1.0;
        while (t - lam * dt <= 0.0 || t - lam * dt > 1.05 * t_max || (m0 - lam * dm).abs() >= scan.hi.max(-scan.lo))
            && lam > 1e-6
        {
            lam *= 0.5;
        }
        t -= lam * dt;
        m0 -= lam * dm;
        if (lam * dt).abs() < 1e-12 * t.max(1.0) && (lam * dm).abs() < 1e-12 {
            if t <= t_max {
                return Ok(Fold { t, m0 });
            }
            return Err(Error::NoFold { t_max });
        }
    }
    Err(Error::NoConvergence("fold Newton iteration"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::flow::{separatrix, Branch};
    use crate::ldp::optimal_momentum;
    use crate::model::{drift, static_rate_slope};
    use proptest::prelude::*;

    fn params(beta: f64, bp: f64, t: f64) -> ModelParams {
        ModelParams::new(beta, bp, t).unwrap()
    }

    #[test]
    fn curve_examples() {
        assert_eq!(acc_curve(0.0, &params(1.3, 0.7, 1.0)).unwrap(), 0.0);
        for beta in [0.5, 1.25, 2.5] {
            let p = params(beta, 0.0, 0.0);
            for i in 0..=38 {
                let m = -0.95 + 0.05 * i as f64;
                let expect = (-2.0 * beta * m).exp() * (1.0 + m) - (2.0 * beta * m).exp() * (1.0 - m);
                assert!((acc_curve(m, &p).unwrap() - expect).abs() < 1e-13);
            }
        }
        for bp in [0.5, 1.2, 2.0] {
            let p = params(bp, bp, 0.0);
            for i in 0..=38 {
                let m = -0.95 + 0.05 * i as f64;
                let a = acc_curve(m, &p).unwrap();
                assert!((a - separatrix(m, Branch::Plus, bp).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn free_end_residual() {
        for (beta, bp) in [(0.5, 0.0), (1.25, 0.0), (2.5, 0.0), (1.2, 1.5), (3.0, 0.7), (0.3, 2.0)] {
            let p = params(beta, bp, 0.0);
            for i in 0..=98 {
                let m = -0.98 + 0.02 * i as f64;
                let g = acc_curve(m, &p).unwrap();
                let r = optimal_momentum(m, g, bp).unwrap() - static_rate_slope(m, beta).unwrap();
                assert!(r.abs() < 1e-10, "beta={beta} bp={bp} m={m} r={r}");
            }
        }
        // The printed form violates it away from beta = beta'.
        let p = params(1.25, 0.0, 0.0);
        let g = acc_curve_with(0.4, &p, AccForm::Printed).unwrap();
        assert!((optimal_momentum(0.4, g, 0.0).unwrap() - static_rate_slope(0.4, 1.25).unwrap()).abs() > 1e-3);
    }

    #[test]
    fn slope_examples() {
        assert_eq!(acc_slope_origin(&params(1.0, 1.0, 0.0)), 0.0);
        assert_eq!(acc_slope_origin(&params(1.5, 0.0, 0.0)), 2.0 - 6.0);
        let mut seed = 12345u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..20 {
            let p = params(0.1 + 3.0 * next(), 3.0 * next(), 0.0);
            let h = 1e-6;
            let fd = (acc_curve(h, &p).unwrap() - acc_curve(-h, &p).unwrap()) / (2.0 * h);
            assert!((fd - acc_slope_origin(&p)).abs() < 1e-8);
            assert!((acc_slope(0.0, &p).unwrap() - acc_slope_origin(&p)).abs() < 1e-13);
        }
    }

    #[test]
    fn curve_derivatives_match_differences() {
        for (beta, bp) in [(1.25, 0.0), (2.5, 0.5), (1.1, 1.5)] {
            let p = params(beta, bp, 0.0);
            for i in 0..=18 {
                let m = -0.9 + 0.1 * i as f64;
                let h = 1e-5;
                let g = |x: f64| acc_curve(x, &p).unwrap();
                let d1 = (g(m + h) - g(m - h)) / (2.0 * h);
                let d2 = (g(m + h) - 2.0 * g(m) + g(m - h)) / (h * h);
                let (_, g1, g2) = curve_derivs(m, beta, bp);
                assert!((d1 - g1).abs() < 1e-7 * (1.0 + g1.abs()));
                assert!((d2 - g2).abs() < 1e-3 * (1.0 + g2.abs()));
            }
        }
    }

    #[test]
    fn transport_at_time_zero_is_identity() {
        let p = params(1.25, 0.0, 0.0);
        let c = transport(&p, &TransportGrid::default(), &Sequential).unwrap();
        // Grid plus the mean-field roots -m*, 0, m*.
        assert_eq!(c.samples.len(), 404);
        for s in &c.samples {
            assert_eq!(s.end.m, s.m0);
            assert_eq!(s.end.v, s.v0);
            assert!((s.f - 1.0).abs() < 1e-15);
        }
        assert!(pre_bad_intervals(&c).is_empty());
    }

    #[test]
    fn transported_curve_is_odd() {
        let p = params(1.6, 0.8, 0.7);
        let c = transport(&p, &TransportGrid::default().with_points(101), &Sequential).unwrap();
        let n = c.samples.len();
        for i in 0..n {
            let (a, b) = (c.samples[i], c.samples[n - 1 - i]);
            assert!((a.m0 + b.m0).abs() < 1e-15);
            assert!((a.end.m + b.end.m).abs() < 1e-9);
            assert!((a.end.v + b.end.v).abs() < 1e-8 * (1.0 + a.end.v.abs()));
        }
    }

    #[test]
    fn diagonal_curve_is_invariant() {
        for bp in [1.2, 1.5] {
            let p = params(bp, bp, 1.0);
            let grid = TransportGrid::default().with_points(81).with_window(-0.95, 0.95);
            let c = transport(&p, &grid, &Sequential).unwrap();
            for s in &c.samples {
                let w = separatrix(s.end.m, Branch::Plus, bp).unwrap();
                assert!((s.end.v - w).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn fold_indicator_matches_differences() {
        let tight = ModelParams::new(1.25, 0.0, 0.6).unwrap().with_tolerances(1e-13, 1e-15);
        for m0 in [-0.4, 0.05, 0.3] {
            let s = transport_point(m0, &tight).unwrap();
            let h = 1e-6;
            let fd = (transport_point(m0 + h, &tight).unwrap().end.m - transport_point(m0 - h, &tight).unwrap().end.m)
                / (2.0 * h);
            assert!((fd - s.f).abs() < 1e-3 * s.f.abs().max(1e-2));
            let jet = curve_jet(m0, 0.6, 1.25, 0.0, &ode::Options::new(1e-13, 1e-15)).unwrap();
            assert!((jet.m1 - s.f).abs() < 1e-9);
        }
    }

    #[test]
    fn symmetric_fold_time() {
        let p = params(1.25, 0.0, 0.0);
        let folds = fold_times(&p, 1.0, &FoldScan::default(), &Sequential).unwrap();
        let first = folds[0];
        assert!((first.t - 0.25 * 5f64.ln()).abs() < 1e-6, "{folds:?}");
        assert!(first.m0.abs() < 1e-6);
    }

    #[test]
    fn broken_symmetry_fold() {
        let p = params(2.5, 0.0, 0.0);
        let folds = fold_times(&p, 0.5, &FoldScan::default(), &Sequential).unwrap();
        assert!(folds[0].m0.abs() > 1e-3, "{folds:?}");
        // Folds come in mirror pairs.
        assert!(folds.iter().any(|f| (f.t - folds[0].t).abs() < 1e-8 && (f.m0 + folds[0].m0).abs() < 1e-6));
    }

    #[test]
    fn high_temperature_has_no_fold() {
        let p = params(0.8, 0.0, 0.0);
        let scan = FoldScan { time_rows: 50, m0_columns: 100, ..Default::default() };
        assert!(matches!(fold_times(&p, 5.0, &scan, &Sequential), Err(Error::NoFold { .. })));
    }

    #[test]
    fn symmetric_overhang() {
        let p = params(1.25, 0.0, 0.45);
        let c = transport(&p, &TransportGrid::default(), &Sequential).unwrap();
        assert!(c.min_f() < 0.0);
        let iv = pre_bad_intervals(&c);
        assert_eq!(iv.len(), 1);
        assert!((iv[0].lo + iv[0].hi).abs() < 1e-9);
        assert!(iv[0].lo < 0.0 && iv[0].hi > 0.0);
        assert_eq!(iv[0].branches.len(), 3);
        let before = transport(&p.with_t(0.35), &TransportGrid::default(), &Sequential).unwrap();
        assert!(before.min_f() > 0.0);
        assert!(pre_bad_intervals(&before).is_empty());
    }

    #[test]
    fn long_horizon_zooms_onto_surviving_band() {
        let p = params(0.6, 0.0, 10.0);
        let c = transport(&p, &TransportGrid::default(), &Sequential).unwrap();
        assert!(c.samples.len() >= 100, "{}", c.samples.len());
        let (lo, hi) = (c.samples[0].end.m, c.samples.last().unwrap().end.m);
        assert!(lo < -0.9 && hi > 0.9);
        assert!(c.samples.iter().all(|s| s.f > 0.0 && s.m0.abs() < 1e-7));
        assert!(pre_bad_intervals(&c).is_empty());
    }

    #[test]
    fn lobe_predicate() {
        for bp in [1.2, 1.5, 2.0] {
            for i in 0..20 {
                let beta = 0.5 + 2.0 * i as f64 / 19.0;
                if (beta - 1.0).abs() < 1e-3 || (beta - bp).abs() < 1e-3 {
                    continue;
                }
                let got = enters_periodic_region(&params(beta, bp, 0.0)).unwrap();
                assert_eq!(got, 1.0 < beta && beta < bp, "beta={beta} bp={bp}");
            }
        }
        assert!(!enters_periodic_region(&params(1.5, 0.8, 0.0)).unwrap());
        let _ = drift;
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn curve_is_odd(m in -0.99f64..0.99, beta in 0.1f64..3.0, bp in 0.0f64..3.0) {
            let p = params(beta, bp, 0.0);
            let a = acc_curve(m, &p).unwrap();
            let b = acc_curve(-m, &p).unwrap();
            prop_assert!((a + b).abs() < 1e-12 * (1.0 + a.abs()));
        }
    }
}
