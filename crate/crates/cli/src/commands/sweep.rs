use liquidex_core::closed_form::characteristic_roots;
use liquidex_core::path::simulate_optimal;
use liquidex_core::{DriftPath, TimeGrid};

use super::Check;
use crate::config::{ExperimentConfig, SweepParameter};
use crate::error::CliResult;
use crate::output::{fmt_num, OutputDir, Table};

struct Series {
    value: f64,
    factor: Vec<f64>,
    u0: f64,
}

pub fn run(cfg: &ExperimentConfig, out: &mut OutputDir) -> CliResult<Vec<Check>> {
    let param = cfg.sweep.parameter;
    let mut values = cfg
        .sweep
        .values
        .clone()
        .unwrap_or_else(|| param.default_values());
    values.sort_by(f64::total_cmp);
    let n = cfg.grid.n_steps;
    let grid = TimeGrid::new(n, cfg.model.horizon)?;

    let mut table = Table::new(&[
        "value",
        "t [time]",
        "deterministic_factor [1]",
        "theta [$]",
        "u [$/time]",
        "q [shares]",
    ]);
    let mut summary = Table::new(&["value", "u0 [$/time]", "factor_mid [1]", "theta_T [$]"]);
    let mut series = Vec::new();
    for &value in &values {
        let mut model = cfg.model.clone();
        match param {
            SweepParameter::Sigma => model.sigma = value,
            SweepParameter::Lambda => model.lambda = value,
            SweepParameter::Kappa => model.kappa = value,
        }
        let p = model.params()?;
        let c = characteristic_roots(&p)?;
        let b = simulate_optimal(&p, model.s0, &grid, cfg.seed, &DriftPath::zero(n))?;
        let factor = (0..=n)
            .map(|k| c.position_factor(grid.time(k)))
            .collect::<Result<Vec<_>, _>>()?;
        for k in 0..=n {
            table.push_numbers(&[value, grid.time(k), factor[k], b.theta[k], b.u[k], b.q[k]]);
        }
        summary.push_numbers(&[value, b.u[0], factor[n / 2], b.theta[n]]);
        series.push(Series {
            value,
            factor,
            u0: b.u[0],
        });
    }
    let name = param.name();
    out.write_table(&format!("sweep_{name}.csv"), &table)?;
    out.write_table(&format!("sweep_{name}_summary.csv"), &summary)?;

    let mut checks = Vec::new();
    match param {
        SweepParameter::Kappa => {
            let violations = series
                .windows(2)
                .map(|w| (1..n).filter(|&k| w[1].factor[k] >= w[0].factor[k]).count())
                .sum::<usize>();
            checks.push(Check::holds(
                "deterministic factor decreasing in kappa",
                violations as f64,
                violations == 0,
                "violations on interior grid times = 0",
            ));
        }
        SweepParameter::Lambda => {
            let violations = series
                .windows(2)
                .filter(|w| w[1].u0.abs() >= w[0].u0.abs())
                .count();
            checks.push(Check::holds(
                "|u(0)| decreasing in lambda",
                violations as f64,
                violations == 0,
                "violations = 0",
            ));
        }
        SweepParameter::Sigma => {
            for s in &series {
                checks.push(Check::info(
                    format!("u(0) at sigma={}", fmt_num(s.value)),
                    s.u0,
                    "no claim",
                ));
            }
        }
    }

    if cfg.gnuplot {
        let script = format!(
            "set datafile separator ','\nset title 'deterministic factor, {name} sweep'\n\
             plot for [v in '{}'] 'sweep_{name}.csv' every ::1 using ($1==v ? $2 : 1/0):3 with lines title '{name}='.v\n",
            values.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(" ")
        );
        out.write_bytes(&format!("sweep_{name}.gp"), script.as_bytes())?;
    }
    Ok(checks)
}
