use liquidex_core::path::{
    gatheral_benchmark, objective_mc, simulate_optimal, GatheralStrategy, LinearCashStrategy,
    OptimalStrategy, Strategy,
};
use liquidex_core::{DriftPath, TimeGrid};

use super::{gnuplot_script, Check};
use crate::config::{ExperimentConfig, ModelConfig};
use crate::error::CliResult;
use crate::output::{fmt_num, label, OutputDir, Table};

pub const PATH_HEADER: [&str; 7] = [
    "t [time]",
    "W [time^1/2]",
    "S [$]",
    "theta [$]",
    "u [$/time]",
    "q [shares]",
    "q_gatheral [shares]",
];

pub fn path_file(sigma: f64) -> String {
    format!("paths_sigma_{}.csv", label(sigma))
}

pub fn run(cfg: &ExperimentConfig, out: &mut OutputDir) -> CliResult<Vec<Check>> {
    let mut checks = Vec::new();
    let mut objectives = Table::new(&[
        "sigma [time^-1/2]",
        "strategy",
        "mean [$]",
        "std_error [$]",
        "n_paths",
    ]);
    let n = cfg.grid.n_steps;
    let zero = DriftPath::zero(n);
    for &sigma in &cfg.paths.sigmas {
        let model = ModelConfig {
            sigma,
            ..cfg.model.clone()
        };
        let p = model.params()?;
        let grid = TimeGrid::new(n, p.horizon)?;
        let b = simulate_optimal(&p, model.s0, &grid, cfg.seed, &zero)?;
        let q_gat = gatheral_benchmark(model.q0, p.kappa, &grid, &b.s)?;

        let mut table = Table::new(&PATH_HEADER);
        for k in 0..=n {
            table.push_numbers(&[
                grid.time(k),
                b.w[k],
                b.s[k],
                b.theta[k],
                b.u[k],
                b.q[k],
                q_gat[k],
            ]);
        }
        out.write_table(&path_file(sigma), &table)?;

        let tag = format!("sigma={}", label(sigma));
        checks.push(Check::holds(
            format!("terminal position {tag}"),
            b.theta[n].abs() / p.theta0.abs(),
            b.theta[n].abs() <= 1e-10 * p.theta0.abs(),
            "|theta_T| <= 1e-10 theta0",
        ));
        let min_theta = b.theta[..n].iter().copied().fold(f64::INFINITY, f64::min);
        checks.push(Check::holds(
            format!("positive position {tag}"),
            min_theta,
            min_theta > 0.0,
            "theta > 0 before T",
        ));
        let min_gat = q_gat.iter().copied().fold(f64::INFINITY, f64::min);
        checks.push(Check::info(
            format!("min gatheral shares {tag}"),
            min_gat,
            "negative values are possible",
        ));

        let strategies: [(&str, Box<dyn Strategy>); 3] = [
            ("optimal", Box::new(OptimalStrategy::new(p, &grid, &zero)?)),
            (
                "linear_cash",
                Box::new(LinearCashStrategy {
                    theta0: p.theta0,
                    sigma,
                }),
            ),
            (
                "gatheral",
                Box::new(GatheralStrategy {
                    s0: model.s0,
                    q0: model.q0,
                    kappa: p.kappa,
                    sigma,
                }),
            ),
        ];
        let mut estimates = Vec::new();
        for (name, s) in &strategies {
            let est = objective_mc(
                &p,
                s.as_ref(),
                &grid,
                cfg.monte_carlo.n_paths,
                cfg.seed,
                &zero,
            )?;
            objectives.push(vec![
                fmt_num(sigma),
                name.to_string(),
                fmt_num(est.mean),
                fmt_num(est.std_error),
                est.n.to_string(),
            ]);
            estimates.push(est);
        }
        for (i, name) in [(1, "linear_cash"), (2, "gatheral")] {
            let margin = (estimates[0].mean - estimates[i].mean)
                / estimates[0].pooled_std_error(&estimates[i]);
            checks.push(Check::info(
                format!("optimal minus {name} {tag}"),
                margin,
                "pooled standard errors",
            ));
        }
    }
    out.write_table("objectives.csv", &objectives)?;

    if cfg.gnuplot {
        let series: Vec<_> = cfg
            .paths
            .sigmas
            .iter()
            .map(|&s| (path_file(s), 1, 4, format!("sigma={}", label(s))))
            .collect();
        out.write_bytes(
            "paths.gp",
            gnuplot_script("cash position", "theta [$]", &series).as_bytes(),
        )?;
    }
    Ok(checks)
}
