//! The subcommands. Each one writes a primary CSV and a JSON summary.

use std::path::{Path, PathBuf};

use cwflow_core::acc::{acc_curve, transport, TransportGrid};
use cwflow_core::cost::{classify_bad, cost_profile, BadScan};
use cwflow_core::flow::{self, energy, IntegrateOptions, PhasePoint};
use cwflow_core::gamma::{kernel, KernelSolver, Side};
use cwflow_core::ldp::lagrangian;
use cwflow_core::mcsim::{default_window, estimate_kernel, replica_rng, simulate, InitialSampler};
use cwflow_core::phase::{self, beta_sb, t_ngs_closed, thresholds_numeric, DiagramSpec, RegionLabel};
use cwflow_core::{Error, Executor, ModelParams};
use serde_json::{json, Value};

use crate::config::*;
use crate::error::CliError;
use crate::exec::Pool;
use crate::output::{with_ext, write_csv, write_json, Table};

/// Product of one command before it is written.
pub struct Report {
    pub table: Table,
    pub summary: Value,
    /// Additional CSV files, written as `stem.<suffix>.csv`.
    pub extra: Vec<(&'static str, Table)>,
    /// Raised after all files are written.
    pub failure: Option<CliError>,
}

impl Report {
    fn new(table: Table, summary: Value) -> Self {
        Report { table, summary, extra: Vec::new(), failure: None }
    }
}

fn opt(x: Option<f64>) -> f64 {
    x.unwrap_or(f64::NAN)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn need(cond: bool, msg: &str) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::usage(msg))
    }
}

fn model(beta: f64, beta_prime: f64, t: f64, tol: &Tolerances) -> Result<ModelParams, CliError> {
    need(tol.rtol > 0.0 && tol.rtol < 1.0, "--rtol must lie in (0, 1)")?;
    need(tol.atol > 0.0, "--atol must be positive")?;
    Ok(ModelParams::new(beta, beta_prime, t)?.with_tolerances(tol.rtol, tol.atol))
}

fn open_unit(x: f64, flag: &str) -> Result<(), CliError> {
    need(x.is_finite() && x.abs() < 1.0, &format!("{flag} must lie in (-1, 1)"))
}

fn cmd_lagrangian(a: &LagrangianArgs) -> Result<Report, CliError> {
    let points: Vec<(f64, f64)> = match (a.m, a.v) {
        (Some(m), Some(v)) => vec![(m, v)],
        _ => {
            need(a.grid >= 2, "--grid must be at least 2")?;
            need(a.m_max > 0.0 && a.m_max < 1.0, "--m-max must lie in (0, 1)")?;
            need(a.v_max > 0.0 && a.v_max.is_finite(), "--v-max must be positive")?;
            let ms = linspace(-a.m_max, a.m_max, a.grid);
            let vs = linspace(-a.v_max, a.v_max, a.grid);
            ms.iter().flat_map(|&m| vs.iter().map(move |&v| (m, v))).collect()
        }
    };
    let mut table = Table::new(&["m", "v", "j", "lambda", "hamiltonian"]);
    let mut min_j = f64::INFINITY;
    for &(m, v) in &points {
        let e = lagrangian(m, v, a.beta_prime)?;
        min_j = min_j.min(e.value);
        table.push(vec![m.into(), v.into(), e.value.into(), e.momentum.into(), e.energy.into()]);
    }
    let summary = if points.len() == 1 {
        let r = &table.rows[0];
        json!({ "points": 1, "j": r[2], "lambda": r[3], "hamiltonian": r[4] })
    } else {
        json!({ "points": points.len(), "min_j": min_j })
    };
    Ok(Report::new(table, summary))
}

fn cmd_trajectory(a: &TrajectoryArgs) -> Result<Report, CliError> {
    let p = model(a.beta, a.beta_prime, a.t, &a.tol)?;
    open_unit(a.m0, "--m0")?;
    need(a.grid >= 2, "--grid must be at least 2")?;
    let v0 = match a.v0 {
        Some(v) => v,
        None => acc_curve(a.m0, &p)?,
    };
    let tr = flow::integrate(PhasePoint::new(a.m0, v0), a.t, a.beta_prime, &IntegrateOptions::from_params(&p))?;
    let mut table = Table::new(&["s", "m", "v", "action", "energy"]);
    for s in linspace(0.0, a.t, a.grid) {
        let (st, action) = tr.eval(s);
        let e = energy(st.point, a.beta_prime)?;
        table.push(vec![s.into(), st.point.m.into(), st.point.v.into(), action.into(), e.into()]);
    }
    let end = tr.end().point;
    let summary = json!({
        "v0": v0,
        "m_end": end.m,
        "v_end": end.v,
        "action": tr.total_action(),
        "energy0": tr.energy0,
        "max_energy_drift": tr.max_energy_drift,
    });
    Ok(Report::new(table, summary))
}

fn cmd_transport<E: Executor>(a: &TransportArgs, exec: &E) -> Result<Report, CliError> {
    let p = model(a.beta, a.beta_prime, a.t, &a.tol)?;
    need(a.grid >= 2, "--grid must be at least 2")?;
    let curve = transport(&p, &TransportGrid::default().with_points(a.grid), exec)?;
    let mut table = Table::new(&["m0", "v0", "m_end", "v_end", "f", "cost"]);
    for s in &curve.samples {
        table.push(vec![s.m0.into(), s.v0.into(), s.end.m.into(), s.end.v.into(), s.f.into(), s.cost(a.beta).into()]);
    }
    let pre: Vec<Value> = cwflow_core::acc::pre_bad_intervals(&curve)
        .iter()
        .map(|iv| json!({ "lo": iv.lo, "hi": iv.hi, "branches": iv.branches.len() }))
        .collect();
    let summary = json!({
        "samples": curve.samples.len(),
        "quarantined": curve.quarantine.len(),
        "min_f": curve.min_f(),
        "pieces": curve.pieces(),
        "pre_bad": pre,
    });
    Ok(Report::new(table, summary))
}

fn cmd_cost<E: Executor>(a: &CostArgs, exec: &E) -> Result<Report, CliError> {
    let p = model(a.beta, a.beta_prime, a.t, &a.tol)?;
    open_unit(a.m_prime, "--m-prime")?;
    need(a.grid >= 3, "--grid must be at least 3")?;
    need(a.m0_max > 0.0 && a.m0_max < 1.0, "--m0-max must lie in (0, 1)")?;
    let grid = linspace(-a.m0_max, a.m0_max, a.grid);
    let prof = cost_profile(a.m_prime, &p, &grid, exec)?;
    let mut table = Table::new(&["m0", "cost"]);
    for &(m0, c) in &prof.samples {
        table.push(vec![m0.into(), c.into()]);
    }
    let global: Vec<f64> = prof.global.iter().map(|&i| prof.minima[i].0).collect();
    let summary = json!({
        "offset": prof.offset,
        "minima": prof.minima,
        "global_minimizers": global,
    });
    Ok(Report::new(table, summary))
}

fn cmd_bad<E: Executor>(a: &BadArgs, exec: &E) -> Result<Report, CliError> {
    let p = model(a.beta, a.beta_prime, a.t, &a.tol)?;
    need(a.grid >= 3, "--grid must be at least 3")?;
    need(a.transport_points >= 2, "--transport-points must be at least 2")?;
    let scan = BadScan {
        grid_points: a.grid,
        transport: TransportGrid::default().with_points(a.transport_points),
        ..BadScan::default()
    };
    let rep = classify_bad(&p, &scan, exec)?;
    let mut table = Table::new(&["m", "m0_a", "m0_b", "gap", "jump"]);
    for b in &rep.bad {
        table.push(vec![b.m.into(), b.m0_a.into(), b.m0_b.into(), b.gap.into(), b.jump.into()]);
    }
    let pre: Vec<Value> = rep
        .pre_bad
        .iter()
        .map(|iv| json!({ "lo": iv.lo, "hi": iv.hi, "branches": iv.branches.len() }))
        .collect();
    let summary = json!({
        "label": RegionLabel::of(&rep).as_str(),
        "bad": rep.bad.iter().map(|b| b.m).collect::<Vec<_>>(),
        "bad_points": rep.bad,
        "pre_bad": pre,
        "quarantined": rep.quarantined,
    });
    Ok(Report::new(table, summary))
}

fn cmd_gamma<E: Executor>(a: &GammaArgs, exec: &E) -> Result<Report, CliError> {
    let p = model(a.beta, a.beta_prime, a.t, &a.tol)?;
    let ms = match a.m_prime {
        Some(m) => {
            open_unit(m, "--m-prime")?;
            vec![m]
        }
        None => {
            need(a.grid >= 2, "--grid must be at least 2")?;
            linspace(-0.95, 0.95, a.grid)
        }
    };
    let solver = KernelSolver::new(&p, &TransportGrid::default().with_points(a.transport_points), exec)?;
    // (gamma, m0*, below, above); one-sided limits only where the minimizer is ambiguous.
    let rows = exec.map(&ms, |&m| -> Result<[f64; 4], Error> {
        match solver.kernel(m) {
            Ok(k) => Ok([k.gamma_plus, k.m0_star, f64::NAN, f64::NAN]),
            Err(Error::AmbiguousMinimizer { .. }) => {
                let lo = solver.kernel_one_sided(m, Side::Below)?;
                let hi = solver.kernel_one_sided(m, Side::Above)?;
                Ok([f64::NAN, f64::NAN, lo.gamma_plus, hi.gamma_plus])
            }
            Err(e) => Err(e),
        }
    });
    let mut table = Table::new(&["m_prime", "gamma_plus", "m0_star", "gamma_below", "gamma_above"]);
    let mut ambiguous = Vec::new();
    for (&m, r) in ms.iter().zip(rows) {
        let r = r?;
        if r[0].is_nan() {
            ambiguous.push(m);
        }
        table.push(vec![m.into(), r[0].into(), r[1].into(), r[2].into(), r[3].into()]);
    }
    let summary = if ms.len() == 1 {
        let r = &table.rows[0];
        json!({ "m_prime": ms[0], "gamma_plus": r[1], "m0_star": r[2], "gamma_below": r[3], "gamma_above": r[4] })
    } else {
        json!({ "points": ms.len(), "ambiguous": ambiguous })
    };
    Ok(Report::new(table, summary))
}

fn cmd_thresholds<E: Executor>(a: &ThresholdArgs, exec: &E) -> Result<Report, CliError> {
    ModelParams::new(a.beta, a.beta_prime, 0.0)?;
    need(a.t_max > 0.0 && a.t_max.is_finite(), "--t-max must be positive")?;
    need(a.steps >= 1, "--steps must be at least 1")?;
    need(a.grid >= 3, "--grid must be at least 3")?;
    let scan = BadScan { grid_points: a.grid, ..BadScan::default() };
    let th = thresholds_numeric(a.beta, a.beta_prime, a.t_max, a.steps, &scan, exec)?;
    let closed = t_ngs_closed(a.beta, a.beta_prime).ok();
    let mut table = Table::new(&["beta", "beta_prime", "t_fold", "t0", "t1", "t_per", "t_ngs_closed", "beta_sb"]);
    let bsb = beta_sb(a.beta_prime);
    table.push(vec![
        a.beta.into(),
        a.beta_prime.into(),
        opt(th.t_fold).into(),
        opt(th.t0).into(),
        opt(th.t1).into(),
        opt(th.t_per).into(),
        opt(closed).into(),
        bsb.into(),
    ]);
    let summary = json!({ "thresholds": th, "t_ngs_closed": closed, "beta_sb": bsb, "tolerance": phase::T_TOL });
    Ok(Report::new(table, summary))
}

fn cmd_diagram<E: Executor>(a: &DiagramArgs, exec: &E) -> Result<Report, CliError> {
    need(a.beta_prime >= 0.0 && a.beta_prime.is_finite(), "--beta-prime must be nonnegative")?;
    need(a.beta_inv_min > 0.0 && a.beta_inv_max >= a.beta_inv_min, "need 0 < --beta-inv-min <= --beta-inv-max")?;
    need(a.columns >= 1 && a.grid >= 1, "--columns and --grid must be positive")?;
    need(a.t_max > 0.0 && a.t_max.is_finite(), "--t-max must be positive")?;
    need(a.bad_grid >= 3, "--bad-grid must be at least 3")?;
    let mut spec = DiagramSpec::uniform(a.beta_inv_min, a.beta_inv_max, a.columns, a.t_max, a.grid);
    spec.scan.grid_points = a.bad_grid;
    spec.trace_boundary = a.trace;
    let d = phase::diagram(a.beta_prime, &spec, exec)?;
    let mut table = Table::new(&["beta_inv", "t", "label"]);
    for (i, col) in d.labels.iter().enumerate() {
        for (k, l) in col.iter().enumerate() {
            table.push(vec![d.beta_inv[i].into(), d.times[k].into(), l.as_str().into()]);
        }
    }
    let mut boundary = Table::new(&["beta_inv", "t_boundary", "t_ngs_closed"]);
    for b in &d.boundary {
        boundary.push(vec![b.beta_inv.into(), opt(b.t).into(), opt(b.t_closed).into()]);
    }
    let frac = d.unknown_fraction();
    let summary = json!({
        "beta_sb": beta_sb(a.beta_prime),
        "boundary": d.boundary,
        "unknown": d.unknown,
        "unknown_fraction": frac,
        "monotonicity_violations": d.monotonicity_violations,
    });
    let mut report = Report::new(table, summary);
    report.extra.push(("boundary", boundary));
    if frac > a.max_unknown {
        report.failure = Some(CliError::Numerical(format!(
            "{} of {} cells failed (fraction {frac:.3} > --max-unknown {})",
            d.unknown.len(),
            d.beta_inv.len() * d.times.len(),
            a.max_unknown
        )));
    }
    Ok(report)
}

fn cmd_mc<E: Executor>(a: &McArgs, exec: &E) -> Result<Report, CliError> {
    let p = ModelParams::new(a.beta, a.beta_prime, a.t)?;
    p.finite_beta()?;
    need(a.n >= 2, "--n must be at least 2")?;
    need(a.replicas >= 1, "--replicas must be positive")?;
    match a.mode {
        McMode::Kernel => {
            let m = a.m_prime.ok_or_else(|| CliError::usage("--m-prime is required in kernel mode"))?;
            open_unit(m, "--m-prime")?;
            let window = a.window.unwrap_or_else(|| default_window(a.n));
            need(window > 0.0, "--window must be positive")?;
            let est = estimate_kernel(a.n, &p, m, window, a.replicas, a.seed, exec)?;
            let limit = if a.t > 0.0 { kernel(m, &p).ok().map(|k| k.gamma_plus) } else { None };
            let mut table = Table::new(&["m_prime", "window", "replicas", "accepted", "plus", "estimate", "lo", "hi", "limit"]);
            table.push(vec![
                m.into(),
                window.into(),
                a.replicas.into(),
                est.accepted.into(),
                est.plus.into(),
                est.estimate.into(),
                est.lo.into(),
                est.hi.into(),
                opt(limit).into(),
            ]);
            let summary = json!({ "estimate": est, "limit": limit, "seed": a.seed });
            Ok(Report::new(table, summary))
        }
        McMode::Path => {
            need(a.grid >= 1, "--grid must be positive")?;
            let k0_fixed = match a.m0 {
                Some(m0) => {
                    need(m0.abs() <= 1.0, "--m0 must lie in [-1, 1]")?;
                    Some(((1.0 + m0) * a.n as f64 / 2.0).round() as usize)
                }
                None => None,
            };
            let sampler = InitialSampler::new(a.n, p.beta)?;
            let times = linspace(0.0, a.t, a.grid.max(2));
            let runs: Vec<u64> = (0..a.replicas as u64).collect();
            let paths = exec.map(&runs, |&i| {
                let mut rng = replica_rng(a.seed, i);
                let k0 = k0_fixed.unwrap_or_else(|| sampler.sample(&mut rng));
                simulate(a.n, &p, k0, &times, &mut rng)
            });
            let mut table = Table::new(&["run", "s", "m"]);
            let (mut jumps, mut rate, mut m_end) = (0.0, 0.0, 0.0);
            for (i, path) in paths.into_iter().enumerate() {
                let path = path?;
                jumps += path.jumps as f64;
                rate += path.rate_integral;
                m_end += *path.m.last().unwrap_or(&f64::NAN);
                for (s, m) in path.times.iter().zip(&path.m) {
                    table.push(vec![i.into(), (*s).into(), (*m).into()]);
                }
            }
            let r = a.replicas as f64;
            let summary = json!({
                "runs": a.replicas,
                "mean_jumps": jumps / r,
                "mean_rate_integral": rate / r,
                "mean_final_m": m_end / r,
                "seed": a.seed,
            });
            Ok(Report::new(table, summary))
        }
    }
}

/// Runs `config` on `exec` and returns the report without writing it.
pub fn execute(config: &RunConfig, exec: &Pool) -> Result<Report, CliError> {
    match &config.command {
        Command::Lagrangian(a) => cmd_lagrangian(a),
        Command::Trajectory(a) => cmd_trajectory(a),
        Command::Transport(a) => cmd_transport(a, exec),
        Command::Cost(a) => cmd_cost(a, exec),
        Command::Bad(a) => cmd_bad(a, exec),
        Command::Gamma(a) => cmd_gamma(a, exec),
        Command::Thresholds(a) => cmd_thresholds(a, exec),
        Command::Diagram(a) => cmd_diagram(a, exec),
        Command::Mc(a) => cmd_mc(a, exec),
    }
}

/// Runs and writes `stem.csv`, `stem.json` and any extra tables. Returns the
/// written paths.
pub fn run(config: &RunConfig, stem: &Path, exec: &Pool) -> Result<Vec<PathBuf>, CliError> {
    let report = execute(config, exec)?;
    let mut written = Vec::new();
    let csv = with_ext(stem, "csv");
    write_csv(&csv, config, &report.table)?;
    written.push(csv);
    for (suffix, table) in &report.extra {
        let path = with_ext(stem, &format!("{suffix}.csv"));
        write_csv(&path, config, table)?;
        written.push(path);
    }
    let js = with_ext(stem, "json");
    write_json(&js, config, &report.summary)?;
    written.push(js);
    match report.failure {
        Some(e) => Err(e),
        None => Ok(written),
    }
}

/// Entry point behind `main`.
pub fn main_with(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let config = match (&cli.config, cli.command) {
        (Some(path), None) => RunConfig::load(path)?,
        (None, Some(cmd)) => RunConfig::new(cmd),
        (Some(_), Some(_)) => return Err(CliError::usage("give either --config or a subcommand, not both")),
        (None, None) => return Err(CliError::usage("no subcommand given (see --help)")),
    };
    let pool = Pool::resolve(cli.threads)?;
    let stem = cli.out.unwrap_or_else(|| PathBuf::from(format!("cwflow-{}", config.command.name())));
    run(&config, &stem, &pool)
}
