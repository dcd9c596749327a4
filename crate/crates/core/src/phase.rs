//! Gibbs/non-Gibbs thresholds and phase diagrams.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::acc::{acc_slope, fold_times, FoldScan};
use crate::cost::{classify_bad, BadPointReport, BadScan};
use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::math;
use crate::model::ModelParams;

/// Time at which the transported curve folds at the origin,
/// `ln((beta' - beta) / (1 - beta)) / (4 (1 - beta'))`, positive only for
/// `beta > 1` and `beta > beta'`. At `beta' = 1` the limit `1 / (4 (beta - 1))`
/// is returned.
pub fn t_ngs_closed(beta: f64, beta_prime: f64) -> Result<f64> {
    if !(beta > 1.0) || !beta.is_finite() {
        return Err(Error::OutOfRegime("fold at the origin needs 1 < beta"));
    }
    if !(beta > beta_prime) {
        return Err(Error::OutOfRegime("fold at the origin needs beta' < beta"));
    }
    let k = 1.0 - beta_prime;
    if k.abs() < 1e-12 {
        return Ok(1.0 / (4.0 * (beta - 1.0)));
    }
    let x = (beta_prime - beta) / (1.0 - beta);
    let t = math::ln(x) / (4.0 * k);
    if !(t > 0.0) {
        return Err(Error::OutOfRegime("non-positive fold time"));
    }
    Ok(t)
}

/// Fold time of the linearized flow for a curve slope `g'(m0)`:
/// `ln((g' - 2(1 - beta')) / (g' + 2(1 - beta'))) / (4 (1 - beta'))`.
/// Exact at `m0 = 0`.
pub fn fold_time_at(m0: f64, beta: f64, beta_prime: f64) -> Result<f64> {
    let p = ModelParams::new(beta, beta_prime, 0.0)?;
    let g1 = acc_slope(m0, &p)?;
    let k = 1.0 - beta_prime;
    if k.abs() < 1e-12 {
        return if g1 < 0.0 { Ok(-1.0 / g1) } else { Err(Error::OutOfRegime("no linear fold")) };
    }
    let x = (g1 - 2.0 * k) / (g1 + 2.0 * k);
    if !(x > 0.0) {
        return Err(Error::OutOfRegime("log argument of the linear fold time is not positive"));
    }
    let t = math::ln(x) / (4.0 * k);
    if !(t > 0.0) {
        return Err(Error::OutOfRegime("non-positive linear fold time"));
    }
    Ok(t)
}

/// The symmetry-breaking cubic
/// `4 b^3 + 12 b beta' - 6 b^2 (1 + beta') - beta'(3 + 3 beta' - beta'^2)`.
pub fn sb_cubic(beta: f64, beta_prime: f64) -> f64 {
    let bp = beta_prime;
    4.0 * beta * beta * beta + 12.0 * beta * bp - 6.0 * beta * beta * (1.0 + bp) - bp * (3.0 + 3.0 * bp - bp * bp)
}

/// Largest real root of [`sb_cubic`]: above it the first fold of the curve
/// leaves the origin.
pub fn beta_sb(beta_prime: f64) -> f64 {
    let bp = beta_prime;
    // Monic form b^3 + a b^2 + c1 b + c0, then b = x - a/3.
    let a = -1.5 * (1.0 + bp);
    let c1 = 3.0 * bp;
    let c0 = -0.25 * bp * (3.0 + 3.0 * bp - bp * bp);
    let p = c1 - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * c1 / 3.0 + c0;
    let disc = q * q / 4.0 + p * p * p / 27.0;
    let x = if p < 0.0 && disc <= 0.0 {
        let r = math::sqrt(-p / 3.0);
        let arg = (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0);
        2.0 * r * math::cos(math::acos(arg) / 3.0)
    } else {
        let s = math::sqrt(disc.max(0.0));
        math::cbrt(-q / 2.0 + s) + math::cbrt(-q / 2.0 - s)
    };
    let mut b = x - a / 3.0;
    for _ in 0..8 {
        let f = sb_cubic(b, bp);
        let df = 12.0 * b * b + 12.0 * bp - 12.0 * b * (1.0 + bp);
        if df == 0.0 {
            break;
        }
        let step = f / df;
        b -= step;
        if step.abs() < 1e-15 * b.abs().max(1.0) {
            break;
        }
    }
    b
}

/// Numerically located thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Thresholds {
    /// First fold of the transported curve.
    pub t_fold: Option<f64>,
    /// First time the bad set is nonempty.
    pub t0: Option<f64>,
    /// First time 0 is bad.
    pub t1: Option<f64>,
    /// First bad time in the cooling regime `1 < beta < beta'`.
    pub t_per: Option<f64>,
}

/// Bisection tolerance in `t` for thresholds.
pub const T_TOL: f64 = 1e-3;

/// First `t` in `[a, b]` where `pred` holds, by a uniform scan with step at
/// most `step` and bisection to [`T_TOL`]. `pred(a)` is not evaluated.
pub fn first_time<F: FnMut(f64) -> Result<bool>>(mut pred: F, a: f64, b: f64, step: f64) -> Result<Option<f64>> {
    if !(b > a) {
        return Ok(None);
    }
    let n = (-math::floor(-(b - a) / step)).max(1.0) as usize;
    let mut lo = a;
    for k in 1..=n {
        let t = a + (b - a) * k as f64 / n as f64;
        if pred(t)? {
            let mut hi = t;
            while hi - lo > T_TOL {
                let mid = 0.5 * (lo + hi);
                if pred(mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(Some(0.5 * (lo + hi)));
        }
        lo = t;
    }
    Ok(None)
}

/// Thresholds `t0`, `t1` and `t_per` up to `t_max`, defined through the bad
/// set of [`classify_bad`]. Each is bracketed by a scan of `steps` uniform
/// times after the first fold and then bisected.
pub fn thresholds_numeric<E: Executor>(
    beta: f64,
    beta_prime: f64,
    t_max: f64,
    steps: usize,
    scan: &BadScan,
    exec: &E,
) -> Result<Thresholds> {
    let base = ModelParams::new(beta, beta_prime, 0.0)?;
    let t_fold = match fold_times(&base, t_max, &FoldScan::default(), exec) {
        Ok(f) => Some(f[0].t),
        Err(Error::NoFold { .. }) => None,
        Err(e) => return Err(e),
    };
    let mut out = Thresholds { t_fold, ..Default::default() };
    // Without a detected fold the scan still runs for beta > 1: at large beta
    // the first fold can sit outside the fold scan window.
    let tf = match t_fold {
        Some(t) => t,
        None if beta > 1.0 => 0.0,
        None => return Ok(out),
    };
    let step = ((t_max - tf) / steps.max(1) as f64).max(2.0 * T_TOL);
    let start = (tf - T_TOL).max(0.0);
    let bad = |t: f64| classify_bad(&base.with_t(t), scan, exec);
    out.t0 = first_time(|t| Ok(!bad(t)?.bad.is_empty()), start, t_max, step)?;
    if let Some(t0) = out.t0 {
        out.t1 = first_time(|t| Ok(bad(t)?.contains_zero()), (t0 - T_TOL).max(0.0), t_max, step)?;
        if 1.0 < beta && beta < beta_prime {
            out.t_per = Some(t0);
        }
    }
    Ok(out)
}

/// Label of a diagram cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RegionLabel {
    Gibbs,
    /// Bad set `{0}`.
    NonGibbsSymmetric,
    /// Nonempty bad set without 0.
    NonGibbsBroken,
    /// Bad set containing 0 and other points.
    NonGibbsMixed,
    /// Numerical failure.
    Unknown,
}

impl RegionLabel {
    pub fn of(report: &BadPointReport) -> Self {
        let zero = report.contains_zero();
        match (report.bad.len(), zero) {
            (0, _) => RegionLabel::Gibbs,
            (1, true) => RegionLabel::NonGibbsSymmetric,
            (_, false) => RegionLabel::NonGibbsBroken,
            _ => RegionLabel::NonGibbsMixed,
        }
    }

    pub fn is_gibbs(self) -> bool {
        self == RegionLabel::Gibbs
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RegionLabel::Gibbs => "gibbs",
            RegionLabel::NonGibbsSymmetric => "non_gibbs_symmetric",
            RegionLabel::NonGibbsBroken => "non_gibbs_broken",
            RegionLabel::NonGibbsMixed => "non_gibbs_mixed",
            RegionLabel::Unknown => "unknown",
        }
    }
}

/// Lattice and numerics of a diagram sweep.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiagramSpec {
    pub beta_inv: Vec<f64>,
    pub times: Vec<f64>,
    pub scan: BadScan,
    /// Trace the Gibbs/non-Gibbs boundary per column by bisection.
    pub trace_boundary: bool,
}

impl DiagramSpec {
    /// Uniform lattice `beta_inv in [lo, hi]`, `t in (0, t_max]`.
    pub fn uniform(beta_inv_lo: f64, beta_inv_hi: f64, columns: usize, t_max: f64, rows: usize) -> Self {
        let beta_inv = (0..columns)
            .map(|i| {
                if columns == 1 {
                    beta_inv_lo
                } else {
                    beta_inv_lo + (beta_inv_hi - beta_inv_lo) * i as f64 / (columns - 1) as f64
                }
            })
            .collect();
        let times = (1..=rows).map(|k| t_max * k as f64 / rows as f64).collect();
        let mut scan = BadScan::default();
        scan.grid_points = 401;
        scan.interval_points = 32;
        scan.transport.points = 201;
        DiagramSpec { beta_inv, times, scan, trace_boundary: true }
    }
}

/// Boundary point of one column.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundaryPoint {
    pub beta_inv: f64,
    /// First non-Gibbs time in the column, if any.
    pub t: Option<f64>,
    /// Closed-form fold time at the origin where it applies.
    pub t_closed: Option<f64>,
}

/// A failed cell.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UnknownCell {
    pub beta_inv: f64,
    pub t: f64,
    pub reason: String,
}

/// Labelled `(beta_inv, t)` lattice at fixed `beta'`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseDiagram {
    pub beta_prime: f64,
    pub beta_inv: Vec<f64>,
    pub times: Vec<f64>,
    /// `labels[i][k]` for `beta_inv[i]` and `times[k]`.
    pub labels: Vec<Vec<RegionLabel>>,
    pub boundary: Vec<BoundaryPoint>,
    pub unknown: Vec<UnknownCell>,
    /// Cells labelled Gibbs above a non-Gibbs cell of the same column.
    pub monotonicity_violations: Vec<(f64, f64)>,
}

impl PhaseDiagram {
    pub fn unknown_fraction(&self) -> f64 {
        let total = self.beta_inv.len() * self.times.len();
        if total == 0 {
            0.0
        } else {
            self.unknown.len() as f64 / total as f64
        }
    }
}

/// Sweeps the lattice of `spec`, labelling each cell by its bad set.
pub fn diagram<E: Executor>(beta_prime: f64, spec: &DiagramSpec, exec: &E) -> Result<PhaseDiagram> {
    if !(beta_prime >= 0.0) {
        return Err(Error::Domain { what: "beta_prime", value: beta_prime });
    }
    let cells: Vec<(usize, usize)> =
        (0..spec.beta_inv.len()).flat_map(|i| (0..spec.times.len()).map(move |k| (i, k))).collect();
    let results: Vec<core::result::Result<RegionLabel, String>> = exec.map(&cells, |&(i, k)| {
        let p = ModelParams::new(1.0 / spec.beta_inv[i], beta_prime, spec.times[k]).map_err(|e| e.to_string())?;
        classify_bad(&p, &spec.scan, &Sequential).map(|r| RegionLabel::of(&r)).map_err(|e| e.to_string())
    });
    let mut labels = alloc::vec![alloc::vec![RegionLabel::Unknown; spec.times.len()]; spec.beta_inv.len()];
    let mut unknown = Vec::new();
    for (&(i, k), r) in cells.iter().zip(results) {
        match r {
            Ok(l) => labels[i][k] = l,
            Err(reason) => unknown.push(UnknownCell { beta_inv: spec.beta_inv[i], t: spec.times[k], reason }),
        }
    }
    let mut violations = Vec::new();
    for (i, col) in labels.iter().enumerate() {
        let mut seen_non_gibbs = false;
        for (k, l) in col.iter().enumerate() {
            match l {
                RegionLabel::Gibbs if seen_non_gibbs => violations.push((spec.beta_inv[i], spec.times[k])),
                RegionLabel::Gibbs | RegionLabel::Unknown => {}
                _ => seen_non_gibbs = true,
            }
        }
    }
    let columns: Vec<usize> = (0..spec.beta_inv.len()).collect();
    let boundary: Vec<BoundaryPoint> = exec.map(&columns, |&i| {
        let bi = spec.beta_inv[i];
        let beta = 1.0 / bi;
        let t_closed = t_ngs_closed(beta, beta_prime).ok();
        let col = &labels[i];
        let first = col.iter().position(|l| !l.is_gibbs() && *l != RegionLabel::Unknown);
        let t = match first {
            None => None,
            Some(k) if !spec.trace_boundary => Some(spec.times[k]),
            Some(k) => {
                let lo = if k == 0 { 0.0 } else { spec.times[k - 1] };
                let hi = spec.times[k];
                let p = ModelParams::new(beta, beta_prime, 0.0).ok();
                p.and_then(|p| {
                    first_time(
                        |t| Ok(!classify_bad(&p.with_t(t), &spec.scan, &Sequential)?.bad.is_empty()),
                        lo,
                        hi,
                        hi - lo,
                    )
                    .ok()
                    .flatten()
                })
                .or(Some(hi))
            }
        };
        BoundaryPoint { beta_inv: bi, t, t_closed }
    });
    Ok(PhaseDiagram {
        beta_prime,
        beta_inv: spec.beta_inv.clone(),
        times: spec.times.clone(),
        labels,
        boundary,
        unknown,
        monotonicity_violations: violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;

    #[test]
    fn closed_form_examples() {
        assert!((t_ngs_closed(2.0, 0.0).unwrap() - 0.25 * 2f64.ln()).abs() < 1e-15);
        assert!((t_ngs_closed(1.25, 0.0).unwrap() - 0.25 * 5f64.ln()).abs() < 1e-15);
        for beta in [1.1, 1.5, 3.0] {
            let t = t_ngs_closed(beta, 0.0).unwrap();
            assert!((t - 0.25 * (beta / (beta - 1.0)).ln()).abs() < 1e-14);
            assert!((t + 0.25 * (1.0 - 1.0 / beta).ln()).abs() < 1e-14);
        }
        assert!(matches!(t_ngs_closed(0.9, 0.0), Err(Error::OutOfRegime(_))));
        assert!(matches!(t_ngs_closed(1.2, 1.5), Err(Error::OutOfRegime(_))));
        assert!((t_ngs_closed(1.5, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let near = t_ngs_closed(1.5, 1.0 + 1e-7).unwrap();
        assert!((near - 0.5).abs() < 1e-6);
    }

    #[test]
    fn linear_fold_time() {
        for (beta, bp) in [(2.0, 0.0), (1.25, 0.0), (1.25, 0.5), (2.0, 1.5)] {
            let a = fold_time_at(0.0, beta, bp).unwrap();
            assert!((a - t_ngs_closed(beta, bp).unwrap()).abs() < 1e-14);
        }
        assert!((fold_time_at(0.0, 2.0, 0.0).unwrap() - 0.25 * 2f64.ln()).abs() < 1e-15);
        // d^2 t / dm0^2 at 0 changes sign at the symmetry-breaking beta.
        for bp in [0.0, 0.5] {
            let bsb = beta_sb(bp);
            let curv = |beta: f64| {
                let h = 1e-3;
                let f = |m: f64| fold_time_at(m, beta, bp).unwrap();
                (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h)
            };
            assert!(curv(bsb - 0.05) * curv(bsb + 0.05) < 0.0);
            assert!(curv(bsb).abs() < 1e-4 * curv(bsb + 0.05).abs());
        }
    }

    #[test]
    fn symmetry_breaking_root() {
        assert!((beta_sb(0.0) - 1.5).abs() < 1e-12);
        for i in 0..=40 {
            let bp = 2.0 * i as f64 / 40.0;
            let b = beta_sb(bp);
            assert!(sb_cubic(b, bp).abs() < 1e-10, "bp={bp}");
            assert!(b >= 1.0);
            // No larger root: the cubic is increasing beyond b.
            assert!(sb_cubic(b + 1e-3, bp) > 0.0);
        }
        for bp in [0.5, 1.0, 1.5] {
            assert!(1.0 / beta_sb(bp) < 1.0 / bp);
        }
    }

    #[test]
    fn regime_2a_thresholds() {
        let th = thresholds_numeric(1.25, 0.0, 0.6, 20, &BadScan::default(), &Sequential).unwrap();
        let tc = 0.25 * 5f64.ln();
        assert!((th.t0.unwrap() - tc).abs() < 1e-3, "{th:?}");
        assert!((th.t1.unwrap() - tc).abs() < 1e-3, "{th:?}");
        assert!(th.t_per.is_none());
    }

    #[test]
    fn labels() {
        let p = ModelParams::new(1.25, 0.0, 0.45).unwrap();
        let r = classify_bad(&p, &BadScan::default(), &Sequential).unwrap();
        assert_eq!(RegionLabel::of(&r), RegionLabel::NonGibbsSymmetric);
    }
}
