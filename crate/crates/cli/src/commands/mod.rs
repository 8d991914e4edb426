//! Subcommands. Each writes its tables into an [`OutputDir`] and returns the
//! checks it evaluated; gated failures turn into exit code 4 after the
//! manifest has been written.

pub mod drift_demo;
pub mod multi;
pub mod oracle_check;
pub mod paths;
pub mod sweep;

use liquidex_core::closed_form::characteristic_roots;
use liquidex_core::multi_asset::{solve_feedback_gain, MultiAssetParams};
use nalgebra::DMatrix;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::{fmt_num, OutputDir, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Reported for inspection; never affects the exit code.
    Info,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: String,
    pub status: Status,
}

impl Check {
    /// Gated check passing when `value < tolerance`.
    pub fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance: format!("< {}", fmt_num(tolerance)),
            status: if value < tolerance {
                Status::Pass
            } else {
                Status::Fail
            },
        }
    }

    pub fn holds(
        name: impl Into<String>,
        value: f64,
        ok: bool,
        tolerance: impl Into<String>,
    ) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance: tolerance.into(),
            status: if ok { Status::Pass } else { Status::Fail },
        }
    }

    pub fn info(name: impl Into<String>, value: f64, note: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance: note.into(),
            status: Status::Info,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {} = {} ({})",
            self.status.as_str(),
            self.name,
            fmt_num(self.value),
            self.tolerance
        )
    }
}

pub fn checks_table(checks: &[Check]) -> Table {
    let mut t = Table::new(&["check", "value", "tolerance", "status"]);
    for c in checks {
        t.push(vec![
            c.name.clone(),
            fmt_num(c.value),
            c.tolerance.clone(),
            c.status.as_str().to_string(),
        ]);
    }
    t
}

/// Print every check and fail with exit code 4 if a gated one failed.
pub fn report(checks: &[Check]) -> CliResult<()> {
    for c in checks {
        println!("{}", c.line());
    }
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| c.status == Status::Fail)
        .map(|c| c.name.clone())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Tolerance(failed))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Paths,
    Sweep,
    OracleCheck,
    Multi,
    DriftDemo,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Paths => "paths",
            CommandKind::Sweep => "sweep",
            CommandKind::OracleCheck => "oracle-check",
            CommandKind::Multi => "multi",
            CommandKind::DriftDemo => "drift-demo",
        }
    }
}

/// Run one command, write its checks table and manifest, then report.
pub fn execute(kind: CommandKind, cfg: &ExperimentConfig, out: OutputDir) -> CliResult<Vec<Check>> {
    let mut out = out;
    let checks = match kind {
        CommandKind::Paths => paths::run(cfg, &mut out)?,
        CommandKind::Sweep => sweep::run(cfg, &mut out)?,
        CommandKind::OracleCheck => oracle_check::run(cfg, &mut out)?,
        CommandKind::Multi => multi::run(cfg, &mut out)?,
        CommandKind::DriftDemo => drift_demo::run(cfg, &mut out)?,
    };
    let file = format!("{}_checks.csv", kind.name().replace('-', "_"));
    out.write_table(&file, &checks_table(&checks))?;
    out.finish(kind.name(), cfg)?;
    report(&checks)?;
    Ok(checks)
}

/// Equicorrelated portfolio with the model's cost and risk parameters.
pub fn portfolio(
    cfg: &ExperimentConfig,
    sigmas: &[f64],
    rho: f64,
    a: f64,
    theta0: &[f64],
) -> CliResult<MultiAssetParams> {
    let n = sigmas.len();
    let corr = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { rho });
    MultiAssetParams::new(
        sigmas.to_vec(),
        corr,
        cfg.model.lambda,
        cfg.model.kappa,
        cfg.model.horizon,
        a,
        theta0.to_vec(),
    )
    .map_err(|e| CliError::Config(format!("portfolio with rho={}: {e}", fmt_num(rho))))
}

/// Worst relative gap between the one-asset boundary-value gain at `a = 1e8`
/// and the closed-form gain at `t in {0, T/4, T/2, 3T/4, 0.95 T}`.
pub fn single_asset_reduction(cfg: &ExperimentConfig) -> CliResult<f64> {
    let p = cfg.model.params()?;
    let c = characteristic_roots(&p)?;
    let mp = portfolio(cfg, &[p.sigma], 0.0, 1e8, &[p.theta0])?;
    let mut worst = 0.0f64;
    for frac in [0.0, 0.25, 0.5, 0.75, 0.95] {
        let t = frac * p.horizon;
        let g = solve_feedback_gain(&mp, t)?.gain[(0, 0)];
        let gamma = c.gamma_rate(t)?;
        worst = worst.max(((g - gamma) / gamma).abs());
    }
    Ok(worst)
}

/// Largest off-diagonal gain magnitude of an uncorrelated portfolio.
pub fn decoupling_gap(cfg: &ExperimentConfig, sigmas: &[f64], a: f64) -> CliResult<f64> {
    let theta0 = vec![cfg.model.theta0(); sigmas.len()];
    let mp = portfolio(cfg, sigmas, 0.0, a, &theta0)?;
    let mut worst = 0.0f64;
    for frac in [0.0, 0.5, 0.9] {
        let g = solve_feedback_gain(&mp, frac * cfg.model.horizon)?.gain;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                if i != j {
                    worst = worst.max(g[(i, j)].abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Entrywise worst relative gap `|A - B| / |B|`.
pub fn max_rel_entry_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| ((x - y) / y).abs())
        .fold(0.0, f64::max)
}

/// A gnuplot script drawing `(file, x column, y column, title)` series.
pub fn gnuplot_script(
    title: &str,
    ylabel: &str,
    series: &[(String, usize, usize, String)],
) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str(&format!(
        "set title '{title}'\nset xlabel 't'\nset ylabel '{ylabel}'\n"
    ));
    let plots: Vec<String> = series
        .iter()
        .map(|(file, x, y, t)| format!("'{file}' every ::1 using {x}:{y} with lines title '{t}'"))
        .collect();
    s.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    s
}
