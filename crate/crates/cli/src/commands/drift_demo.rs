use std::sync::Arc;

use liquidex_core::closed_form::{characteristic_roots, nu_offset, ModelParams};
use liquidex_core::oracle::{
    evaluate_affine_policy, scalar_riccati, unsimplified_riccati, PositionDrift,
};
use liquidex_core::path::{
    path_seed, sample_brownian, simulate_optimal, standard_normals, OptimalStrategy, Strategy,
};
use liquidex_core::{DriftPath, DriftSpec, TimeGrid};

use super::{gnuplot_script, Check};
use crate::config::{ExperimentConfig, MeanRevertingConfig};
use crate::error::CliResult;
use crate::output::{fmt_num, OutputDir, Table};

/// Stream index reserved for the scripted drift noise, disjoint from Brownian path indices.
const DRIFT_STREAM: u64 = u64::MAX;

fn interpolate(table: &[[f64; 2]], t: f64) -> f64 {
    if t <= table[0][0] {
        return table[0][1];
    }
    for w in table.windows(2) {
        if t <= w[1][0] {
            let s = (t - w[0][0]) / (w[1][0] - w[0][0]);
            return w[0][1] + s * (w[1][1] - w[0][1]);
        }
    }
    table[table.len() - 1][1]
}

fn mean_reverting(cfg: &MeanRevertingConfig, grid: &TimeGrid, seed: u64) -> DriftSpec {
    let dt = grid.dt();
    let z = standard_normals(path_seed(seed, DRIFT_STREAM), grid.n_steps());
    let mut alpha = vec![cfg.alpha0];
    for zk in z {
        let a = *alpha.last().unwrap_or(&cfg.alpha0);
        alpha.push(a + cfg.speed * (cfg.mean - a) * dt + cfg.vol * dt.sqrt() * zk);
    }
    let mean = cfg.mean;
    let horizon = grid.horizon();
    let cond_exp_terminal: liquidex_core::drift::CondExpFn = match &cfg.cond_exp_table {
        Some(table) => {
            let table = table.clone();
            Arc::new(move |t, a| mean + interpolate(&table, t) * (a - mean))
        }
        None => DriftSpec::mean_reverting_cond_exp(cfg.speed, mean, horizon),
    };
    DriftSpec::Scripted {
        alpha_path: alpha,
        cond_exp_terminal,
    }
}

fn preset_table(
    p: &ModelParams,
    grid: &TimeGrid,
    w: &[f64],
    s: &[f64],
    drift: &DriftPath,
    bump: f64,
) -> CliResult<(Table, Vec<f64>, Vec<f64>)> {
    let c = characteristic_roots(p)?;
    let strategy = OptimalStrategy::new(*p, grid, drift)?;
    let path = strategy.run(grid, w)?;
    let nu = strategy.nu();
    let n = grid.n_steps();
    let mut table = Table::new(&[
        "t [time]",
        "alpha [1/time]",
        "cond_exp_terminal [1/time]",
        "nu [$/time]",
        "theta [$]",
        "u [$/time]",
        "q [shares]",
        "dnu_dalpha [$]",
        "dnu_dcond_exp [$]",
    ]);
    let mut d_alpha = Vec::with_capacity(n);
    let mut d_exp = Vec::with_capacity(n);
    for k in 0..=n {
        let (a, e) = (drift.alpha[k], drift.cond_exp_terminal[k]);
        let mut row: Vec<String> = [
            grid.time(k),
            a,
            e,
            nu[k],
            path.theta[k],
            path.control[k],
            path.theta[k] / s[k],
        ]
        .iter()
        .map(|&x| fmt_num(x))
        .collect();
        if k < n {
            let t = grid.time(k);
            let base = nu_offset(&c, p, t, a, e)?;
            let da = (nu_offset(&c, p, t, a + bump, e)? - base) / bump;
            let de = (nu_offset(&c, p, t, a, e + bump)? - base) / bump;
            row.push(fmt_num(da));
            row.push(fmt_num(de));
            d_alpha.push(da);
            d_exp.push(de);
        } else {
            row.extend([String::new(), String::new()]);
        }
        table.push(row);
    }
    Ok((table, d_alpha, d_exp))
}

/// Constant-drift strategy of the closed form against the optimum when the
/// position also grows at the price drift. Reported only.
fn simplification(
    cfg: &ExperimentConfig,
    p: &ModelParams,
    out: &mut OutputDir,
) -> CliResult<Vec<Check>> {
    let (n, a) = (cfg.oracle.headline_steps, cfg.oracle.headline_penalty);
    let q = p.with_penalty(a);
    let c = characteristic_roots(p)?;
    let mut table = Table::new(&[
        "alpha [1/time]",
        "u0_closed_form [$/time]",
        "u0_neglected [$/time]",
        "u0_included [$/time]",
        "control_gap [1]",
        "value_loss [1]",
    ]);
    let mut checks = Vec::new();
    for &alpha in &cfg.drift.simplification_alphas {
        let drift = DriftSpec::constant(alpha);
        let closed = c.gamma_rate(0.0)? * p.theta0 + nu_offset(&c, p, 0.0, alpha, alpha)?;
        let neglected = scalar_riccati(&q, n, &drift)?;
        let included = unsimplified_riccati(&q, n, &drift)?;
        let u_neg = neglected.g[0] * q.theta0 + neglected.h[0];
        let u_inc = included.g[0] * q.theta0 + included.h[0];
        let best = included.value(q.theta0);
        let used = evaluate_affine_policy(
            &q,
            &drift,
            PositionDrift::Included,
            &neglected.g,
            &neglected.h,
        )?;
        let gap = ((u_neg - u_inc) / u_inc).abs();
        let loss = (best - used) / best.abs();
        table.push_numbers(&[alpha, closed, u_neg, u_inc, gap, loss]);
        checks.push(Check::info(
            format!(
                "neglected position drift, control gap alpha={}",
                fmt_num(alpha)
            ),
            gap,
            "no claim",
        ));
        checks.push(Check::info(
            format!(
                "neglected position drift, value loss alpha={}",
                fmt_num(alpha)
            ),
            loss,
            "no claim",
        ));
    }
    out.write_table("drift_simplification.csv", &table)?;
    Ok(checks)
}

pub fn run(cfg: &ExperimentConfig, out: &mut OutputDir) -> CliResult<Vec<Check>> {
    let d = &cfg.drift;
    let p = cfg.model.params()?;
    let n = cfg.grid.n_steps;
    let grid = TimeGrid::new(n, p.horizon)?;
    let w = sample_brownian(&grid, cfg.seed);
    let zero_path = simulate_optimal(&p, cfg.model.s0, &grid, cfg.seed, &DriftPath::zero(n))?;
    let s = &zero_path.s;

    let presets = [
        ("zero", DriftSpec::Zero),
        ("constant", DriftSpec::constant(d.constant_alpha)),
        (
            "linear",
            DriftSpec::linear(d.linear_start, d.linear_end, p.horizon),
        ),
        (
            "mean_reverting",
            mean_reverting(&d.mean_reverting, &grid, cfg.seed),
        ),
    ];
    let mut checks = Vec::new();
    let mut min_da = f64::INFINITY;
    let mut max_de = f64::NEG_INFINITY;
    for (name, preset) in &presets {
        let drift = preset.realize(&grid)?;
        let (table, da, de) = preset_table(&p, &grid, &w, s, &drift, d.bump)?;
        out.write_table(&format!("drift_{name}.csv"), &table)?;
        if *name == "zero" {
            let strategy = OptimalStrategy::new(p, &grid, &drift)?;
            let path = strategy.run(&grid, &w)?;
            let same = path.theta == zero_path.theta && path.control == zero_path.u;
            checks.push(Check::holds(
                "zero preset reproduces the zero-drift path",
                if same { 0.0 } else { 1.0 },
                same,
                "bit-identical",
            ));
        } else {
            min_da = da.iter().copied().fold(min_da, f64::min);
            max_de = de.iter().copied().fold(max_de, f64::max);
        }
    }
    checks.push(Check::holds("min dnu/dalpha", min_da, min_da > 0.0, "> 0"));
    checks.push(Check::holds(
        "max dnu/dE[alpha_T]",
        max_de,
        max_de < 0.0,
        "< 0",
    ));

    let flat = p.with_theta0(0.0);
    let constant = DriftSpec::constant(d.constant_alpha).realize(&grid)?;
    let trip = OptimalStrategy::new(flat, &grid, &constant)?.run(&grid, &w)?;
    let mut table = Table::new(&["t [time]", "theta [$]", "u [$/time]"]);
    for k in 0..=n {
        table.push_numbers(&[grid.time(k), trip.theta[k], trip.control[k]]);
    }
    out.write_table("drift_round_trip.csv", &table)?;
    let peak = trip.theta.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    checks.push(Check::holds(
        "round-trip peak position",
        peak,
        peak > 0.0,
        "> 0",
    ));
    checks.push(Check::holds(
        "round-trip terminal position",
        trip.theta[n].abs(),
        trip.theta[n].abs() <= 1e-10 * peak,
        "<= 1e-10 peak",
    ));

    checks.extend(simplification(cfg, &p, out)?);

    if cfg.gnuplot {
        let series: Vec<_> = presets
            .iter()
            .map(|(name, _)| (format!("drift_{name}.csv"), 1, 5, name.to_string()))
            .collect();
        out.write_bytes(
            "drift_demo.gp",
            gnuplot_script("cash position under drift", "theta [$]", &series).as_bytes(),
        )?;
    }
    Ok(checks)
}
