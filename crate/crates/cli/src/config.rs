//! Run configuration in TOML.
//!
//! ```toml
//! [params]
//! R = 1.0
//! D = 0.1
//! v = 1.0
//! ell = 1.0
//! t_end = 2.0
//!
//! [g]
//! kind = "pulse"
//! start = 0.0
//! stop = 0.5
//! level = 1.0
//!
//! [exit]
//! kind = "computed"
//! ```

use std::path::{Path, PathBuf};

use robin_cde::{ExitSpec, ProblemData, SmoothFn, Table, TransportParams, TruncationPolicy};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    params: Option<RawParams>,
    phi: Option<FnSpec>,
    g: Option<FnSpec>,
    exit: Option<FnSpec>,
    #[serde(default)]
    policy: RawPolicy,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    verify: RawVerify,
    #[serde(default)]
    compare: RawCompare,
    chain: Option<RawHorizon>,
    #[serde(default)]
    segment: Vec<RawSegment>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    #[serde(rename = "R")]
    retardation: f64,
    #[serde(rename = "D")]
    dispersion: f64,
    v: f64,
    #[serde(default)]
    mu: f64,
    #[serde(default)]
    gamma: f64,
    ell: f64,
    #[serde(default)]
    t0: f64,
    t_end: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHorizon {
    #[serde(default)]
    t0: f64,
    t_end: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSegment {
    #[serde(rename = "R")]
    retardation: f64,
    #[serde(rename = "D")]
    dispersion: f64,
    v: f64,
    #[serde(default)]
    mu: f64,
    #[serde(default)]
    gamma: f64,
    ell: f64,
    t0: Option<f64>,
    t_end: Option<f64>,
    phi: Option<FnSpec>,
}

/// A function of time (or of position, for φ).
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FnSpec {
    Constant {
        value: f64,
    },
    /// Step up at `start` and down at `stop`, smoothed over `ramp`
    /// (default 1% of the pulse length).
    Pulse {
        start: f64,
        stop: f64,
        level: f64,
        ramp: Option<f64>,
    },
    Sinusoid {
        mean: f64,
        amplitude: f64,
        period: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Two-column CSV (argument, value), strictly increasing arguments.
    Table {
        file: PathBuf,
    },
    /// Exit only: take C_E from the half-line flux problem.
    Computed,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RawPolicy {
    pub n_max: Option<usize>,
    pub tail_tol: Option<f64>,
    pub time_quad_tol: Option<f64>,
    pub memo_intervals: Option<usize>,
}

impl Default for RawPolicy {
    fn default() -> Self {
        Self {
            n_max: None,
            tail_tol: None,
            time_quad_tol: None,
            memo_intervals: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    nx: Option<usize>,
    nt: Option<usize>,
    refine_x: Option<usize>,
    refine_t: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVerify {
    balance_tol: Option<f64>,
    fd_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCompare {
    lengths: Option<Vec<f64>>,
    eigen_rows: Option<usize>,
}

/// Sampling grid for outputs and the oracle comparison. The FD oracle runs
/// on a grid refined by `refine_x` in space and `refine_t` in time whose
/// nodes include every sampling node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub nx: usize,
    pub nt: usize,
    pub refine_x: usize,
    pub refine_t: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyTolerances {
    pub balance_tol: f64,
    pub fd_tol: f64,
}

/// Parameters of one column, as configured.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnConfig {
    #[serde(rename = "R")]
    pub retardation: f64,
    #[serde(rename = "D")]
    pub dispersion: f64,
    pub v: f64,
    pub mu: f64,
    pub gamma: f64,
    pub ell: f64,
    pub t0: f64,
    pub t_end: f64,
    pub phi: FnSpec,
}

impl ColumnConfig {
    pub fn params(&self) -> robin_cde::Result<TransportParams> {
        TransportParams::new(self.retardation, self.dispersion, self.v, self.mu, self.gamma, self.ell)
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    #[serde(skip)]
    pub source: PathBuf,
    pub column: Option<ColumnConfig>,
    pub g: FnSpec,
    pub exit: FnSpec,
    pub policy: TruncationPolicySpec,
    pub grid: Grid,
    #[serde(skip)]
    pub output_dir: PathBuf,
    pub verify: VerifyTolerances,
    pub compare_lengths: Vec<f64>,
    pub eigen_rows: usize,
    pub segments: Vec<ColumnConfig>,
    /// Table files loaded at parse time, keyed by their configured path.
    #[serde(skip)]
    tables: Vec<(PathBuf, Table)>,
}

/// Truncation policy as recorded in manifests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationPolicySpec {
    pub n_max: usize,
    pub tail_tol: f64,
    pub time_quad_tol: f64,
    pub memo_intervals: usize,
}

impl From<TruncationPolicySpec> for TruncationPolicy {
    fn from(p: TruncationPolicySpec) -> Self {
        TruncationPolicy {
            n_max: p.n_max,
            tail_tol: p.tail_tol,
            time_quad_tol: p.time_quad_tol,
            memo_intervals: p.memo_intervals,
        }
    }
}

/// Command-line overrides applied after parsing.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub nx: Option<usize>,
    pub nt: Option<usize>,
    pub modes: Option<usize>,
    pub tail_tol: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(path, format!("cannot read file: {e}")))?;
        Self::parse(&text, path, overrides)
    }

    /// Parses `text`; relative table paths resolve against `path`'s directory.
    pub fn parse(text: &str, path: &Path, overrides: &Overrides) -> CliResult<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::config(path, e.to_string()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let err = |msg: String| CliError::config(path, msg);

        let defaults = TruncationPolicy::default();
        let policy = TruncationPolicySpec {
            n_max: overrides.modes.or(raw.policy.n_max).unwrap_or(defaults.n_max),
            tail_tol: overrides.tail_tol.or(raw.policy.tail_tol).unwrap_or(defaults.tail_tol),
            time_quad_tol: raw.policy.time_quad_tol.unwrap_or(defaults.time_quad_tol),
            memo_intervals: raw.policy.memo_intervals.unwrap_or(defaults.memo_intervals),
        };
        TruncationPolicy::from(policy)
            .validate()
            .map_err(|e| err(format!("[policy]: {e}")))?;

        let grid = Grid {
            nx: overrides.nx.or(raw.grid.nx).unwrap_or(101),
            nt: overrides.nt.or(raw.grid.nt).unwrap_or(101),
            refine_x: raw.grid.refine_x.unwrap_or(4),
            refine_t: raw.grid.refine_t.unwrap_or(16),
        };
        if grid.nx < 11 || grid.nt < 11 {
            return Err(err(format!(
                "[grid]: nx and nt must be at least 11, got nx = {}, nt = {}",
                grid.nx, grid.nt
            )));
        }
        if grid.refine_x == 0 || grid.refine_t == 0 {
            return Err(err("[grid]: refine_x and refine_t must be positive".into()));
        }

        let verify = VerifyTolerances {
            balance_tol: raw.verify.balance_tol.unwrap_or(1e-4),
            fd_tol: raw.verify.fd_tol.unwrap_or(1e-3),
        };
        for (name, v) in [("balance_tol", verify.balance_tol), ("fd_tol", verify.fd_tol)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(err(format!("[verify].{name}: must be positive, got {v}")));
            }
        }

        let mut tables = Vec::new();
        let mut load = |spec: &FnSpec, section: &str| -> CliResult<()> {
            if let FnSpec::Table { file } = spec {
                let resolved = if file.is_absolute() { file.clone() } else { base.join(file) };
                let table = read_table(&resolved).map_err(|m| err(format!("[{section}].file {}: {m}", file.display())))?;
                tables.push((file.clone(), table));
            }
            Ok(())
        };

        let g = raw.g.clone().unwrap_or(FnSpec::Constant { value: 0.0 });
        check_spec(&g, "g", &[]).map_err(&err)?;
        load(&g, "g")?;

        let column = match &raw.params {
            Some(p) => {
                let phi = raw.phi.clone().unwrap_or(FnSpec::Constant { value: 0.0 });
                check_spec(&phi, "phi", &["pulse", "sinusoid"]).map_err(&err)?;
                load(&phi, "phi")?;
                let c = ColumnConfig {
                    retardation: p.retardation,
                    dispersion: p.dispersion,
                    v: p.v,
                    mu: p.mu,
                    gamma: p.gamma,
                    ell: p.ell,
                    t0: p.t0,
                    t_end: p.t_end,
                    phi,
                };
                check_column(&c, "params").map_err(&err)?;
                Some(c)
            }
            None => {
                if raw.phi.is_some() {
                    return Err(err("[phi] given without [params]".into()));
                }
                None
            }
        };

        let exit = raw.exit.clone().unwrap_or(FnSpec::Computed);
        check_spec(&exit, "exit", &["pulse", "sinusoid"]).map_err(&err)?;
        load(&exit, "exit")?;

        let mut segments = Vec::with_capacity(raw.segment.len());
        if !raw.segment.is_empty() {
            let horizon = raw
                .chain
                .as_ref()
                .ok_or_else(|| err("[[segment]] entries need a [chain] section with t0 and t_end".into()))?;
            for (i, s) in raw.segment.iter().enumerate() {
                let label = format!("segment {}", i + 1);
                let phi = s.phi.clone().unwrap_or(FnSpec::Constant { value: 0.0 });
                check_spec(&phi, &label, &["pulse", "sinusoid"]).map_err(&err)?;
                load(&phi, &label)?;
                let c = ColumnConfig {
                    retardation: s.retardation,
                    dispersion: s.dispersion,
                    v: s.v,
                    mu: s.mu,
                    gamma: s.gamma,
                    ell: s.ell,
                    t0: s.t0.unwrap_or(horizon.t0),
                    t_end: s.t_end.unwrap_or(horizon.t_end),
                    phi,
                };
                check_column(&c, &label).map_err(&err)?;
                if let Some(up) = segments.last() {
                    let up: &ColumnConfig = up;
                    if c.t0 < up.t0 || c.t_end > up.t_end {
                        return Err(err(format!(
                            "{label}: horizon [{}, {}] is not inside the upstream horizon [{}, {}]",
                            c.t0, c.t_end, up.t0, up.t_end
                        )));
                    }
                }
                segments.push(c);
            }
        } else if raw.chain.is_some() {
            return Err(err("[chain] given without any [[segment]]".into()));
        }

        let compare_lengths = raw.compare.lengths.clone().unwrap_or_default();
        if compare_lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(err("[compare].lengths: every length must be positive".into()));
        }

        Ok(Self {
            source: path.to_path_buf(),
            column,
            g,
            exit,
            policy,
            grid,
            output_dir: overrides
                .out
                .clone()
                .or(raw.output.dir.clone().map(|d| if d.is_absolute() { d } else { base.join(d) }))
                .unwrap_or_else(|| PathBuf::from("out")),
            verify,
            compare_lengths,
            eigen_rows: raw.compare.eigen_rows.unwrap_or(20),
            segments,
            tables,
        })
    }

    pub fn require_column(&self) -> CliResult<&ColumnConfig> {
        self.column
            .as_ref()
            .ok_or_else(|| CliError::config(&self.source, "missing [params] section"))
    }

    pub fn smooth(&self, spec: &FnSpec) -> SmoothFn {
        match spec {
            FnSpec::Constant { value } => SmoothFn::Constant(*value),
            FnSpec::Pulse {
                start,
                stop,
                level,
                ramp,
            } => SmoothFn::Pulse {
                level: *level,
                start: *start,
                stop: *stop,
                ramp: ramp.unwrap_or(0.01 * (stop - start)),
            },
            FnSpec::Sinusoid {
                mean,
                amplitude,
                period,
                phase,
            } => SmoothFn::Sinusoid {
                mean: *mean,
                amplitude: *amplitude,
                period: *period,
                phase: *phase,
            },
            FnSpec::Table { file } => {
                let table = self
                    .tables
                    .iter()
                    .find(|(p, _)| p == file)
                    .map(|(_, t)| t.clone())
                    .expect("tables are loaded while parsing");
                SmoothFn::Table(table)
            }
            FnSpec::Computed => unreachable!("computed exits are resolved by the solver"),
        }
    }

    /// Problem data of a column with this config's inlet and exit.
    pub fn problem(&self, column: &ColumnConfig, g: SmoothFn) -> CliResult<ProblemData> {
        let params = column.params().map_err(|e| CliError::config(&self.source, e.to_string()))?;
        let exit = match &self.exit {
            FnSpec::Computed => ExitSpec::Computed,
            spec => ExitSpec::Measured(self.smooth(spec)),
        };
        ProblemData::new(params, self.smooth(&column.phi), g, exit, column.t0)
            .map_err(|e| CliError::config(&self.source, e.to_string()))
    }

    /// Table contents for the manifest, so runs are reproducible from it.
    pub fn table_data(&self) -> Vec<(String, Vec<f64>, Vec<f64>)> {
        self.tables
            .iter()
            .map(|(p, t)| (p.display().to_string(), t.knots().to_vec(), t.values().to_vec()))
            .collect()
    }
}

fn check_spec(spec: &FnSpec, section: &str, forbidden: &[&str]) -> Result<(), String> {
    let name = match spec {
        FnSpec::Constant { value } => {
            if !value.is_finite() {
                return Err(format!("[{section}].value: must be finite"));
            }
            "constant"
        }
        FnSpec::Pulse {
            start,
            stop,
            level,
            ramp,
        } => {
            if !(start.is_finite() && stop.is_finite() && level.is_finite() && stop > start) {
                return Err(format!("[{section}]: pulse needs finite start < stop and a finite level"));
            }
            if let Some(r) = ramp {
                if !(r.is_finite() && *r >= 0.0 && *r <= stop - start) {
                    return Err(format!("[{section}].ramp: must lie in [0, stop - start], got {r}"));
                }
            }
            "pulse"
        }
        FnSpec::Sinusoid {
            mean,
            amplitude,
            period,
            phase,
        } => {
            if !(mean.is_finite() && amplitude.is_finite() && phase.is_finite() && period.is_finite() && *period > 0.0)
            {
                return Err(format!("[{section}]: sinusoid needs finite values and a positive period"));
            }
            "sinusoid"
        }
        FnSpec::Table { .. } => "table",
        FnSpec::Computed => {
            if section != "exit" {
                return Err(format!("[{section}].kind: \"computed\" is only valid for [exit]"));
            }
            "computed"
        }
    };
    if forbidden.contains(&name) {
        return Err(format!("[{section}].kind: \"{name}\" is not supported here"));
    }
    Ok(())
}

fn check_column(c: &ColumnConfig, section: &str) -> Result<(), String> {
    c.params().map_err(|e| format!("[{section}]: {e}"))?;
    if !(c.t0.is_finite() && c.t_end.is_finite() && c.t_end > c.t0) {
        return Err(format!("[{section}]: need finite t0 < t_end, got t0 = {}, t_end = {}", c.t0, c.t_end));
    }
    Ok(())
}

/// Reads a two-column CSV; a non-numeric first row is taken as a header
/// and lines starting with `#` are skipped.
pub fn read_table(path: &Path) -> Result<Table, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_path(path)
        .map_err(|e| e.to_string())?;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        if rec.len() != 2 {
            return Err(format!("row {}: expected 2 columns, found {}", i + 1, rec.len()));
        }
        let parsed = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
        match parsed {
            (Ok(x), Ok(y)) => {
                xs.push(x);
                ys.push(y);
            }
            _ if i == 0 => continue,
            _ => return Err(format!("row {}: cannot parse numbers", i + 1)),
        }
    }
    if let Some(w) = xs.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(format!("arguments must be strictly increasing ({} then {})", w[0], w[1]));
    }
    Table::pchip(xs, ys).map_err(|e| e.to_string())
}
