use liquidex_core::closed_form::{ModelParams, TerminalPenalty};
use liquidex_core::multi_asset::solve_feedback_gain;
use liquidex_core::oracle::{
    binomial_tree_dp, brute_force_one_step, drift_offset_error, fitted_order,
    gain_convergence_report, matrix_riccati, scalar_riccati, ConvergenceRow,
};
use liquidex_core::DriftSpec;
use rayon::prelude::*;

use super::{decoupling_gap, max_rel_entry_gap, portfolio, single_asset_reduction, Check};
use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::output::{fmt_num, OutputDir, Table};

fn convergence_cell(p: &ModelParams, n: usize, a: f64) -> CliResult<ConvergenceRow> {
    Ok(gain_convergence_report(p, &[n], a)?.rows[0])
}

pub fn run(cfg: &ExperimentConfig, out: &mut OutputDir) -> CliResult<Vec<Check>> {
    let o = &cfg.oracle;
    let p = cfg.model.params()?;
    let mut checks = Vec::new();

    let mut steps = o.steps.clone();
    steps.sort_unstable();
    steps.dedup();
    let cells: Vec<(f64, usize)> = o
        .penalties
        .iter()
        .flat_map(|&a| steps.iter().map(move |&n| (a, n)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(a, n)| convergence_cell(&p, n, a))
        .collect::<CliResult<Vec<_>>>()?;
    let mut table = Table::new(&["a [1]", "n [steps]", "max_rel_error [1]", "t_at_max [time]"]);
    for r in &rows {
        table.push_numbers(&[r.a, r.n as f64, r.max_rel_error, r.t_at_max]);
    }
    out.write_table("oracle_convergence.csv", &table)?;
    let mut orders = Table::new(&["a [1]", "fitted_order [1]"]);
    for &a in &o.penalties {
        let of_a: Vec<ConvergenceRow> = rows.iter().filter(|r| r.a == a).copied().collect();
        orders.push_numbers(&[a, fitted_order(&of_a)]);
    }
    out.write_table("oracle_orders.csv", &orders)?;

    let headline = convergence_cell(&p, o.headline_steps, o.headline_penalty)?;
    checks.push(Check::below(
        format!(
            "gain error n={} a={}",
            o.headline_steps,
            fmt_num(o.headline_penalty)
        ),
        headline.max_rel_error,
        o.tolerance,
    ));
    let refinement: Vec<ConvergenceRow> = steps
        .iter()
        .filter(|&&n| n <= o.headline_steps)
        .map(|&n| convergence_cell(&p, n, o.headline_penalty))
        .collect::<CliResult<_>>()?;
    let increases = refinement
        .windows(2)
        .filter(|w| w[1].max_rel_error >= w[0].max_rel_error)
        .count();
    checks.push(Check::holds(
        "gain error decreases with n",
        increases as f64,
        increases == 0,
        "non-decreasing steps = 0",
    ));

    let offset = drift_offset_error(
        &p,
        o.headline_steps,
        o.headline_penalty,
        &DriftSpec::constant(o.drift_alpha),
    )?;
    checks.push(Check::below(
        "drift offset error",
        offset.rel_error,
        o.tolerance,
    ));

    let one_step = p.with_penalty(o.headline_penalty);
    let exact = scalar_riccati(&one_step, 1, &DriftSpec::Zero)?.g[0] * one_step.theta0;
    let searched = brute_force_one_step(&one_step)?;
    checks.push(Check::below(
        "one-step gain vs grid minimiser",
        ((searched - exact) / exact).abs(),
        1e-6,
    ));

    let degenerate = ModelParams {
        kappa: 0.0,
        penalty: TerminalPenalty::Finite(0.0),
        ..p
    };
    let sol = scalar_riccati(&degenerate, o.headline_steps, &DriftSpec::Zero)?;
    let largest = sol.g.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    checks.push(Check::holds(
        "kappa=0 a=0 gains",
        largest,
        largest == 0.0,
        "all zero",
    ));

    let mut tree_gap = 0.0f64;
    for &a in &o.penalties {
        for drift in [DriftSpec::Zero, DriftSpec::constant(o.drift_alpha)] {
            let q = p.with_penalty(a);
            let tree = binomial_tree_dp(&q, o.tree_depth, &drift)?.value;
            let rec = scalar_riccati(&q, o.tree_depth, &drift)?.value(q.theta0);
            tree_gap = tree_gap.max(((tree - rec) / rec).abs());
        }
    }
    checks.push(Check::below(
        format!("binomial tree vs recursion depth {}", o.tree_depth),
        tree_gap,
        1e-12,
    ));

    checks.push(Check::below(
        "one-asset boundary gain vs closed form",
        single_asset_reduction(cfg)?,
        1e-6,
    ));
    checks.push(Check::below(
        "uncorrelated off-diagonal gain",
        decoupling_gap(cfg, &cfg.multi.sigmas, o.multi_penalty)?,
        1e-10,
    ));

    let theta0 = vec![cfg.model.theta0(); cfg.multi.sigmas.len()];
    for &rho in &cfg.multi.correlations {
        let mp = portfolio(cfg, &cfg.multi.sigmas, rho, o.multi_penalty, &theta0)?;
        let bvp = solve_feedback_gain(&mp, 0.0)?.gain;
        let ric = matrix_riccati(&mp, o.multi_riccati_steps)?;
        checks.push(Check::info(
            format!("boundary gain vs matrix recursion rho={}", fmt_num(rho)),
            max_rel_entry_gap(&bvp, &ric.g[0]),
            "diagnostic, 1% target",
        ));
    }

    if cfg.gnuplot {
        let mut script = String::from(
            "set datafile separator ','\nset logscale xy\nset xlabel 'n'\nset ylabel 'max relative gain error'\nplot ",
        );
        let parts: Vec<String> = o
            .penalties
            .iter()
            .map(|a| {
                format!(
                    "'oracle_convergence.csv' every ::1 using ($1=={} ? $2 : 1/0):3 with linespoints title 'a={}'",
                    fmt_num(*a),
                    fmt_num(*a)
                )
            })
            .collect();
        script.push_str(&parts.join(", \\\n     "));
        script.push('\n');
        out.write_bytes("oracle_check.gp", script.as_bytes())?;
    }
    Ok(checks)
}
