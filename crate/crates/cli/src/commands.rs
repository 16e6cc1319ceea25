use std::path::Path;

use rayon::prelude::*;
use robin_cde::verify::{danckwerts_error, danckwerts_solve, eigenvalue_table, fd_solve, mass_balance, FdGrid};
use robin_cde::{Evaluation, LiftKind, SeriesSolution, SmoothFn, TruncationPolicy};
use serde::Serialize;

use crate::config::{ColumnConfig, RunConfig};
use crate::error::{CliError, CliResult, Context};
use crate::output::{describe, ensure_dir, Cell, CsvOut, Manifest, SolveSummary};

/// `n` evenly spaced points from `lo` to `hi`, hitting `hi` exactly.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect()
}

fn policy(cfg: &RunConfig) -> TruncationPolicy {
    cfg.policy.into()
}

struct Report {
    quiet: bool,
}

impl Report {
    fn line(&self, text: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", text.as_ref());
        }
    }
}

/// Builds the Robin series for one column and writes profile.csv and
/// breakthrough.csv into `dir`.
fn solve_column(
    cfg: &RunConfig,
    column: &ColumnConfig,
    g: SmoothFn,
    dir: &Path,
    label: &str,
) -> CliResult<(SeriesSolution, SolveSummary)> {
    let data = cfg.problem(column, g)?;
    let sol = SeriesSolution::build(&data, LiftKind::Robin, policy(cfg), column.t_end)
        .context(|| format!("{label}: building the series solution"))?;
    ensure_dir(dir)?;

    let xs = linspace(0.0, column.ell, cfg.grid.nx);
    let ts = linspace(column.t0, column.t_end, cfg.grid.nt);
    let rows: Vec<Vec<Evaluation>> = ts
        .par_iter()
        .map(|&t| sol.profile(t, &xs))
        .collect::<robin_cde::Result<_>>()
        .context(|| format!("{label}: evaluating the profile"))?;

    let mut profile = CsvOut::create(&dir.join("profile.csv"), &["t", "x", "C"])?;
    for (t, row) in ts.iter().zip(&rows) {
        for (x, e) in xs.iter().zip(row) {
            profile.row(&[Cell::Num(*t), Cell::Num(*x), Cell::Num(e.value)])?;
        }
    }
    profile.finish()?;

    let mut bt = CsvOut::create(&dir.join("breakthrough.csv"), &["t", "C_exit", "C_flux_exit"])?;
    for (t, row) in ts.iter().zip(&rows) {
        let exit = sol.exit_value(*t).context(|| format!("{label}: exit concentration at t = {t}"))?;
        bt.row(&[Cell::Num(*t), Cell::Num(row[row.len() - 1].value), Cell::Num(exit)])?;
    }
    bt.finish()?;

    let all = rows.iter().flatten();
    let summary = SolveSummary {
        modes_min: all.clone().map(|e| e.modes).min().unwrap_or(0),
        modes_max: all.clone().map(|e| e.modes).max().unwrap_or(0),
        max_tail: all.map(|e| e.tail).fold(0.0, f64::max),
        memo_defect: sol.memo().map(|m| m.defect),
    };
    Ok((sol, summary))
}

fn report_solve(report: &Report, label: &str, s: &SolveSummary) {
    report.line(format!(
        "{label}: {}..{} modes, tail bound ≤ {:.3e}{}",
        s.modes_min,
        s.modes_max,
        s.max_tail,
        s.memo_defect
            .map(|d| format!(", exit table defect {d:.3e}"))
            .unwrap_or_default()
    ));
}

pub fn solve(cfg: &RunConfig, quiet: bool) -> CliResult<SolveSummary> {
    let report = Report { quiet };
    let column = cfg.require_column()?;
    let dir = &cfg.output_dir;
    let (_, summary) = solve_column(cfg, column, cfg.smooth(&cfg.g), dir, "solve")?;
    Manifest::new("solve", cfg, &summary, &["profile.csv", "breakthrough.csv"]).write(dir)?;
    report_solve(&report, "solve", &summary);
    report.line(format!("wrote {}", dir.display()));
    Ok(summary)
}

/// Results of `verify`.
#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub solve: SolveSummary,
    pub balance_relative_integrated: f64,
    pub balance_max_relative: f64,
    pub balance_tol: f64,
    pub balance_pass: bool,
    pub fd_nx: usize,
    pub fd_steps: usize,
    pub fd_relative_l2: f64,
    pub fd_tol: f64,
    pub fd_pass: bool,
}

impl VerifySummary {
    pub fn pass(&self) -> bool {
        self.balance_pass && self.fd_pass
    }
}

/// Relative L² distance of `b` from `a`; absolute when `a` vanishes.
pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        num += (x - y) * (x - y);
        den += x * x;
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        (num / a.len().max(1) as f64).sqrt()
    }
}

pub fn verify(cfg: &RunConfig, quiet: bool) -> CliResult<VerifySummary> {
    let report = Report { quiet };
    let column = cfg.require_column()?;
    let dir = &cfg.output_dir;
    let data = cfg.problem(column, cfg.smooth(&cfg.g))?;
    let sol = SeriesSolution::build(&data, LiftKind::Robin, policy(cfg), column.t_end)
        .context(|| "verify: building the series solution".into())?;
    ensure_dir(dir)?;

    let xs = linspace(0.0, column.ell, cfg.grid.nx);
    let ts = linspace(column.t0, column.t_end, cfg.grid.nt);
    let rows: Vec<Vec<Evaluation>> = ts
        .par_iter()
        .map(|&t| sol.profile(t, &xs))
        .collect::<robin_cde::Result<_>>()
        .context(|| "verify: evaluating the series".into())?;
    let all = rows.iter().flatten();
    let solve_summary = SolveSummary {
        modes_min: all.clone().map(|e| e.modes).min().unwrap_or(0),
        modes_max: all.clone().map(|e| e.modes).max().unwrap_or(0),
        max_tail: all.map(|e| e.tail).fold(0.0, f64::max),
        memo_defect: sol.memo().map(|m| m.defect),
    };

    // The start time is skipped: incompatible start data make the mass
    // derivative singular there.
    let balance = mass_balance(&sol, &ts[1..]).context(|| "verify: mass balance".into())?;
    let mut out = CsvOut::create(
        &dir.join("balance.csv"),
        &["t", "accumulation", "inflow", "outflow", "reaction", "residual", "relative_residual"],
    )?;
    for s in &balance.samples {
        out.row(&[
            Cell::Num(s.t),
            Cell::Num(s.accumulation),
            Cell::Num(s.inflow),
            Cell::Num(s.outflow),
            Cell::Num(s.reaction),
            Cell::Num(s.residual),
            Cell::Num(s.relative_residual),
        ])?;
    }
    out.finish()?;

    // The oracle runs on a refined grid that contains every sampling node.
    let (rx, rt) = (cfg.grid.refine_x, cfg.grid.refine_t);
    let fd_grid = FdGrid::new((cfg.grid.nx - 1) * rx + 1, (cfg.grid.nt - 1) * rt, column.t_end);
    let fd = fd_solve(sol.data(), &fd_grid).context(|| "verify: finite-difference oracle".into())?;
    let mut series = Vec::with_capacity(xs.len() * ts.len());
    let mut oracle = Vec::with_capacity(series.capacity());
    let mut out = CsvOut::create(&dir.join("fd_compare.csv"), &["t", "x", "C_series", "C_fd", "difference"])?;
    for (k, (t, row)) in ts.iter().zip(&rows).enumerate() {
        for (i, (x, e)) in xs.iter().zip(row).enumerate() {
            let c = fd.c[k * rt][i * rx];
            out.row(&[Cell::Num(*t), Cell::Num(*x), Cell::Num(e.value), Cell::Num(c), Cell::Num(e.value - c)])?;
            series.push(e.value);
            oracle.push(c);
        }
    }
    out.finish()?;
    let fd_rel = relative_l2(&series, &oracle);

    let summary = VerifySummary {
        solve: solve_summary,
        balance_relative_integrated: balance.relative_integrated,
        balance_max_relative: balance.max_relative,
        balance_tol: cfg.verify.balance_tol,
        balance_pass: balance.relative_integrated <= cfg.verify.balance_tol,
        fd_nx: fd_grid.nx,
        fd_steps: fd_grid.nt,
        fd_relative_l2: fd_rel,
        fd_tol: cfg.verify.fd_tol,
        fd_pass: fd_rel <= cfg.verify.fd_tol,
    };
    Manifest::new("verify", cfg, &summary, &["balance.csv", "fd_compare.csv"]).write(dir)?;

    let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
    report_solve(&report, "series", &summary.solve);
    report.line(format!(
        "{} mass balance: integrated relative residual {:.3e} (tolerance {:.1e}), worst sample {:.3e}",
        verdict(summary.balance_pass),
        summary.balance_relative_integrated,
        summary.balance_tol,
        summary.balance_max_relative
    ));
    report.line(format!(
        "{} finite differences: relative L2 {:.3e} (tolerance {:.1e}) on {}x{} nodes, oracle {} nodes x {} steps",
        verdict(summary.fd_pass),
        summary.fd_relative_l2,
        summary.fd_tol,
        cfg.grid.nx,
        cfg.grid.nt,
        summary.fd_nx,
        summary.fd_steps
    ));
    if !summary.pass() {
        return Err(CliError::Verification(format!(
            "balance {:.3e} (tol {:.1e}), FD L2 {:.3e} (tol {:.1e}); series truncated at {} modes leaves a tail bound of {:.3e}",
            summary.balance_relative_integrated,
            summary.balance_tol,
            summary.fd_relative_l2,
            summary.fd_tol,
            summary.solve.modes_max,
            summary.solve.max_tail
        )));
    }
    Ok(summary)
}

/// E_D at the final time for one column length.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrendPoint {
    pub ell: f64,
    pub robin_exit: f64,
    pub danckwerts_exit: f64,
    pub error: f64,
}

/// Results of `compare-danckwerts`.
#[derive(Debug, Clone, Serialize)]
pub struct CompareSummary {
    /// γ/μ when μ > 0.
    pub bound: Option<f64>,
    pub final_error: f64,
    pub max_error: f64,
    pub eigen_rows: usize,
    pub all_bracketed: bool,
    pub trend: Vec<TrendPoint>,
}

pub fn compare_danckwerts(cfg: &RunConfig, quiet: bool) -> CliResult<CompareSummary> {
    let report = Report { quiet };
    let column = cfg.require_column()?;
    let dir = &cfg.output_dir;
    let pol = policy(cfg);
    ensure_dir(dir)?;

    let pair = |column: &ColumnConfig| -> CliResult<(SeriesSolution, SeriesSolution)> {
        let data = cfg.problem(column, cfg.smooth(&cfg.g))?;
        let robin = SeriesSolution::build(&data, LiftKind::Robin, pol, column.t_end)
            .context(|| format!("ell = {}: Robin solution", column.ell))?;
        let dk = danckwerts_solve(robin.data(), pol, column.t_end)
            .context(|| format!("ell = {}: Neumann-exit solution", column.ell))?;
        Ok((robin, dk))
    };
    let (robin, dk) = pair(column)?;

    let ts = linspace(column.t0, column.t_end, cfg.grid.nt);
    let rows = ts
        .par_iter()
        .map(|&t| danckwerts_error(&robin, &dk, t, 0.0))
        .collect::<robin_cde::Result<Vec<_>>>()
        .context(|| "compare: exit concentrations".into())?;
    let mut out = CsvOut::create(&dir.join("compare.csv"), &["t", "C_exit", "C_exit_danckwerts", "E_D"])?;
    for r in &rows {
        out.row(&[Cell::Num(r.t), Cell::Num(r.robin_exit), Cell::Num(r.danckwerts_exit), Cell::Num(r.error)])?;
    }
    out.finish()?;

    let params = column.params().context(|| "compare: parameters".into())?;
    let eig = eigenvalue_table(&params, cfg.eigen_rows).context(|| "compare: eigenvalue table".into())?;
    let mut out = CsvOut::create(
        &dir.join("eigenvalues.csv"),
        &["n", "lambda", "lambda_D", "lower", "upper", "residual", "ratio", "bracketed"],
    )?;
    for e in &eig {
        out.row(&[
            Cell::Int(e.n),
            Cell::Num(e.robin),
            Cell::Num(e.danckwerts),
            Cell::Num(e.lower),
            Cell::Num(e.upper),
            Cell::Num(e.residual),
            Cell::Num(e.ratio),
            Cell::Text(if e.bracketed() { "true" } else { "false" }),
        ])?;
    }
    out.finish()?;

    let trend = cfg
        .compare_lengths
        .par_iter()
        .map(|&ell| {
            let col = ColumnConfig { ell, ..column.clone() };
            let (robin, dk) = pair(&col)?;
            let e = danckwerts_error(&robin, &dk, col.t_end, 0.0).context(|| format!("ell = {ell}: exit gap"))?;
            Ok(TrendPoint {
                ell,
                robin_exit: e.robin_exit,
                danckwerts_exit: e.danckwerts_exit,
                error: e.error,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut files = vec!["compare.csv", "eigenvalues.csv"];
    if !trend.is_empty() {
        let mut out = CsvOut::create(&dir.join("trend.csv"), &["ell", "C_exit", "C_exit_danckwerts", "E_D"])?;
        for p in &trend {
            out.row(&[Cell::Num(p.ell), Cell::Num(p.robin_exit), Cell::Num(p.danckwerts_exit), Cell::Num(p.error)])?;
        }
        out.finish()?;
        files.push("trend.csv");
    }

    let summary = CompareSummary {
        bound: rows[0].lower_bound,
        final_error: rows[rows.len() - 1].error,
        max_error: rows.iter().map(|r| r.error).fold(0.0, f64::max),
        eigen_rows: eig.len(),
        all_bracketed: eig.iter().all(|e| e.bracketed()),
        trend,
    };
    Manifest::new("compare-danckwerts", cfg, &summary, &files).write(dir)?;

    report.line(format!(
        "exit gap E_D: {:.6e} at t = {}, largest {:.6e}",
        summary.final_error, column.t_end, summary.max_error
    ));
    match summary.bound {
        Some(b) => report.line(format!("steady-state gap gamma/mu = {b:.6e}")),
        None => report.line("mu = 0: no steady-state gap bound"),
    }
    for p in &summary.trend {
        report.line(format!("  ell = {:<10} E_D = {:.6e}", p.ell, p.error));
    }
    report.line(format!(
        "eigenvalues: {} rows, {}",
        summary.eigen_rows,
        if summary.all_bracketed { "all bracketed" } else { "BRACKET VIOLATED" }
    ));
    if !summary.all_bracketed {
        return Err(CliError::Verification("a Neumann-exit eigenvalue left its bracket".into()));
    }
    Ok(summary)
}

/// One segment of a chain run.
#[derive(Debug, Clone, Serialize)]
pub struct SegmentSummary {
    pub index: usize,
    pub dir: String,
    pub solve: SolveSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainSummary {
    pub segments: Vec<SegmentSummary>,
    /// Largest interpolation defect of a hand-off table.
    pub max_defect: f64,
}

pub fn segment_dir(index: usize) -> String {
    format!("segment-{index}")
}

pub fn chain(cfg: &RunConfig, quiet: bool) -> CliResult<ChainSummary> {
    let report = Report { quiet };
    if cfg.segments.is_empty() {
        return Err(CliError::config(&cfg.source, "chain needs [chain] and at least one [[segment]]"));
    }
    let dir = &cfg.output_dir;
    ensure_dir(dir)?;

    // Each segment's inlet is its upstream neighbour's exit, so segments run
    // in order; time samples within a segment run in parallel.
    let mut g = cfg.smooth(&cfg.g);
    let mut sols = Vec::with_capacity(cfg.segments.len());
    let mut segments = Vec::with_capacity(cfg.segments.len());
    for (i, seg) in cfg.segments.iter().enumerate() {
        let index = i + 1;
        let label = format!("segment {index}");
        let sub = segment_dir(index);
        let (sol, summary) = solve_column(cfg, seg, g, &dir.join(&sub), &label)?;
        Manifest::new("chain", cfg, &SegmentSummary { index, dir: sub.clone(), solve: summary.clone() }, &[
            "profile.csv",
            "breakthrough.csv",
        ])
        .write(&dir.join(&sub))?;
        report_solve(&report, &label, &summary);
        g = sol
            .data()
            .exit_fn()
            .context(|| format!("{label}: exit concentration"))?
            .clone();
        segments.push(SegmentSummary {
            index,
            dir: sub,
            solve: summary,
        });
        sols.push(sol);
    }

    let last = &cfg.segments[cfg.segments.len() - 1];
    let ts = linspace(last.t0, last.t_end, cfg.grid.nt);
    let mut header = vec!["t".to_owned(), "C_in".to_owned()];
    header.extend((1..=sols.len()).map(|i| format!("C_flux_exit_{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut out = CsvOut::create(&dir.join("chain_breakthrough.csv"), &header)?;
    let inlet = cfg.smooth(&cfg.g);
    for &t in &ts {
        let mut cells = vec![Cell::Num(t), Cell::Num(inlet.eval(t))];
        for (i, sol) in sols.iter().enumerate() {
            let e = sol.exit_value(t).context(|| format!("segment {}: exit at t = {t}", i + 1))?;
            cells.push(Cell::Num(e));
        }
        out.row(&cells)?;
    }
    out.finish()?;

    let summary = ChainSummary {
        max_defect: segments
            .iter()
            .filter_map(|s| s.solve.memo_defect)
            .fold(0.0, f64::max),
        segments,
    };
    Manifest::new("chain", cfg, &summary, &["chain_breakthrough.csv"]).write(dir)?;
    report.line(format!(
        "chain of {} segments, inlet {}, largest hand-off defect {:.3e}",
        summary.segments.len(),
        describe(&cfg.g),
        summary.max_defect
    ));
    report.line(format!("wrote {}", dir.display()));
    Ok(summary)
}
