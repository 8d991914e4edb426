use liquidex_core::multi_asset::{
    asset_seeds, correlated_increments, simulate_multi, solve_feedback_gain, GainSchedule,
};
use liquidex_core::oracle::matrix_riccati;
use liquidex_core::TimeGrid;
use rayon::prelude::*;

use super::{decoupling_gap, max_rel_entry_gap, portfolio, single_asset_reduction, Check};
use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::output::{fmt_num, label, OutputDir, Table};

pub fn run(cfg: &ExperimentConfig, out: &mut OutputDir) -> CliResult<Vec<Check>> {
    let m = &cfg.multi;
    let n_assets = m.sigmas.len();
    let a = m
        .terminal_penalty
        .unwrap_or(1e8 * cfg.model.lambda / cfg.model.horizon);
    let theta0 = m
        .theta0
        .clone()
        .unwrap_or_else(|| vec![cfg.model.theta0(); n_assets]);
    let grid = TimeGrid::new(m.n_steps, cfg.model.horizon)?;
    let mut checks = Vec::new();
    let mut terminal = Table::new(&["rho", "asset", "mean_abs_terminal [$]", "initial [$]"]);

    for &rho in &m.correlations {
        let mp = portfolio(cfg, &m.sigmas, rho, a, &theta0)?;
        let sched = GainSchedule::compute(&mp, &grid)?;

        let mut header = vec!["t [time]".to_string()];
        for i in 1..=n_assets {
            for j in 1..=n_assets {
                header.push(format!("G_{i}_{j} [1/time]"));
            }
        }
        let mut gains = Table::new(&header);
        for (k, g) in sched.gains.iter().enumerate() {
            let mut row = vec![grid.time(k)];
            row.extend(g.transpose().iter());
            gains.push_numbers(&row);
        }
        out.write_table(&format!("multi_gain_rho_{}.csv", label(rho)), &gains)?;

        let paths = (0..cfg.monte_carlo.n_paths as u64)
            .into_par_iter()
            .map(|i| {
                let dw =
                    correlated_increments(&mp.rho, &grid, &asset_seeds(cfg.seed, i, n_assets))?;
                simulate_multi(&mp, &sched, &dw)
            })
            .collect::<Result<Vec<_>, _>>()?;

        let mut header = vec!["t [time]".to_string()];
        header.extend((1..=n_assets).map(|i| format!("theta_{i} [$]")));
        header.extend((1..=n_assets).map(|i| format!("u_{i} [$/time]")));
        let mut path_table = Table::new(&header);
        let first = &paths[0];
        for k in 0..=m.n_steps {
            let mut row = vec![fmt_num(grid.time(k))];
            row.extend(first.theta[k].iter().map(|&x| fmt_num(x)));
            match first.u.get(k) {
                Some(u) => row.extend(u.iter().map(|&x| fmt_num(x))),
                None => row.extend(std::iter::repeat_n(String::new(), n_assets)),
            }
            path_table.push(row);
        }
        out.write_table(&format!("multi_path_rho_{}.csv", label(rho)), &path_table)?;

        for i in 0..n_assets {
            let mean = paths.iter().map(|p| p.terminal_abs()[i]).sum::<f64>() / paths.len() as f64;
            terminal.push(vec![
                fmt_num(rho),
                (i + 1).to_string(),
                fmt_num(mean),
                fmt_num(theta0[i]),
            ]);
        }

        let ric = matrix_riccati(
            &mp.with_penalty(cfg.oracle.multi_penalty),
            cfg.oracle.multi_riccati_steps,
        )?;
        let bvp = solve_feedback_gain(&mp.with_penalty(cfg.oracle.multi_penalty), 0.0)?.gain;
        checks.push(Check::info(
            format!("boundary gain vs matrix recursion rho={}", fmt_num(rho)),
            max_rel_entry_gap(&bvp, &ric.g[0]),
            "diagnostic, 1% target",
        ));
    }
    out.write_table("multi_terminal.csv", &terminal)?;

    checks.push(Check::below(
        "one-asset boundary gain vs closed form",
        single_asset_reduction(cfg)?,
        1e-6,
    ));
    checks.push(Check::below(
        "uncorrelated off-diagonal gain",
        decoupling_gap(cfg, &m.sigmas, a)?,
        1e-10,
    ));
    if n_assets >= 2 {
        let off = |rho: f64| -> CliResult<f64> {
            let mp = portfolio(cfg, &m.sigmas, rho, a, &theta0)?;
            Ok(solve_feedback_gain(&mp, 0.0)?.gain[(0, 1)])
        };
        let (pos, neg) = (off(0.5)?, off(-0.5)?);
        checks.push(Check::holds(
            "off-diagonal sign flips between rho=0.5 and rho=-0.5",
            pos * neg,
            pos * neg < 0.0,
            "product < 0",
        ));
    }

    if cfg.gnuplot && n_assets >= 2 {
        let series: Vec<_> = m
            .correlations
            .iter()
            .map(|&r| {
                (
                    format!("multi_gain_rho_{}.csv", label(r)),
                    1,
                    3,
                    format!("G_1_2 rho={}", label(r)),
                )
            })
            .collect();
        out.write_bytes(
            "multi.gp",
            super::gnuplot_script("cross gain", "G_1_2", &series).as_bytes(),
        )?;
    }
    Ok(checks)
}
