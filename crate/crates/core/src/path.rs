//! Pathwise simulation of the optimal strategy and its benchmarks.
//!
//! Zero-drift positions use the exact multiplicative scheme
//! `theta_k = theta0 * D(t_k)/D(0) * exp(sigma W_k - sigma^2 t_k / 2)`, so there
//! is no time-stepping error and `theta_n` is exactly zero. With a drift the
//! variation-of-constants integral is accumulated step by step with the
//! trapezoid rule, using only ratios `H_{k+1}/H_k` so nothing blows up near the
//! horizon.
//!
//! Every path draws from its own ChaCha stream keyed by
//! [`path_seed`]`(master, index)`; Monte-Carlo loops run in parallel but reduce
//! in index order, so results do not depend on the thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::closed_form::{
    characteristic_roots, nu_offset, CoefBundle, ModelParams, TerminalPenalty,
};
use crate::drift::DriftPath;
use crate::error::{Error, Result};

/// Uniform grid `t_k = k T / n`, `k = 0..=n`, with `t_n = T` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    n_steps: usize,
    horizon: f64,
}

impl TimeGrid {
    pub fn new(n_steps: usize, horizon: f64) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::param("n_steps", "must be at least 1"));
        }
        crate::closed_form::positive("horizon", horizon)?;
        Ok(TimeGrid { n_steps, horizon })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            self.horizon * k as f64 / self.n_steps as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }

    fn check_len(&self, what: &'static str, len: usize) -> Result<()> {
        if len != self.n_steps + 1 {
            return Err(Error::LengthMismatch {
                what,
                expected: self.n_steps + 1,
                got: len,
            });
        }
        Ok(())
    }
}

/// Derive an independent stream seed for path `index` under `master`.
pub fn path_seed(master: u64, index: u64) -> u64 {
    // splitmix64 finaliser over a Weyl-sequence combination of the two inputs
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Standard normal draws from the stream identified by `seed`.
pub fn standard_normals(seed: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect()
}

/// Brownian motion sampled on the grid, `W[0] = 0`.
pub fn sample_brownian(grid: &TimeGrid, seed: u64) -> Vec<f64> {
    let sd = grid.dt().sqrt();
    let mut w = Vec::with_capacity(grid.n_steps() + 1);
    w.push(0.0);
    let mut acc = 0.0;
    for z in standard_normals(seed, grid.n_steps()) {
        acc += sd * z;
        w.push(acc);
    }
    w
}

/// `S_k = S0 exp(sigma W_k - sigma^2 t_k / 2)`.
pub fn gbm_price_path(s0: f64, sigma: f64, grid: &TimeGrid, w: &[f64]) -> Result<Vec<f64>> {
    crate::closed_form::positive("s0", s0)?;
    grid.check_len("Brownian path", w.len())?;
    Ok(w.iter()
        .enumerate()
        .map(|(k, &wk)| s0 * (sigma * wk - 0.5 * sigma * sigma * grid.time(k)).exp())
        .collect())
}

fn exp_martingale(sigma: f64, t: f64, w: f64) -> f64 {
    (sigma * w - 0.5 * sigma * sigma * t).exp()
}

/// Exact zero-drift optimal position.
pub fn optimal_position_path(
    c: &CoefBundle,
    p: &ModelParams,
    grid: &TimeGrid,
    w: &[f64],
) -> Result<Vec<f64>> {
    grid.check_len("Brownian path", w.len())?;
    let s = p.sigma;
    (0..=grid.n_steps())
        .map(|k| {
            let t = grid.time(k);
            Ok(p.theta0 * (c.integrated_gamma(0.0, t)? + s * w[k] - 0.5 * s * s * t).exp())
        })
        .collect()
}

/// `nu(t_k)` on the grid. `nu` has a removable singularity at the horizon when
/// `alpha_t - E[alpha_T | F_t]` vanishes linearly; the last entry is the linear
/// extrapolation `2 nu_{n-1} - nu_{n-2}`.
pub fn nu_path(
    c: &CoefBundle,
    p: &ModelParams,
    grid: &TimeGrid,
    drift: &DriftPath,
) -> Result<Vec<f64>> {
    grid.check_len("drift path", drift.len())?;
    let n = grid.n_steps();
    let mut nu = (0..n)
        .map(|k| {
            nu_offset(
                c,
                p,
                grid.time(k),
                drift.alpha[k],
                drift.cond_exp_terminal[k],
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let last = if n >= 2 {
        2.0 * nu[n - 1] - nu[n - 2]
    } else {
        nu[n - 1]
    };
    nu.push(last);
    Ok(nu)
}

/// Optimal position with drift, `theta_t = H_t (theta0 + int_0^t H_s^{-1} nu_s ds)`
/// where `H_t = D(t)/D(0) exp(sigma W_t - sigma^2 t / 2)`.
///
/// The `theta0` term is the zero-drift path; the integral term is accumulated
/// as `P_{k+1} = r_k P_k + dt/2 (r_k nu_k + nu_{k+1})` with `r_k = H_{k+1}/H_k`.
/// `H_T = 0`, so the position is exactly zero at the horizon.
pub fn optimal_position_path_drift(
    c: &CoefBundle,
    p: &ModelParams,
    grid: &TimeGrid,
    nu: &[f64],
    w: &[f64],
) -> Result<Vec<f64>> {
    grid.check_len("nu path", nu.len())?;
    let mut theta = optimal_position_path(c, p, grid, w)?;
    let n = grid.n_steps();
    let dt = grid.dt();
    let s = p.sigma;
    let mut particular = 0.0;
    for k in 0..n {
        if k + 1 == n {
            particular = 0.0;
        } else {
            let ratio = (c.integrated_gamma(grid.time(k), grid.time(k + 1))?
                + s * (w[k + 1] - w[k])
                - 0.5 * s * s * dt)
                .exp();
            particular = ratio * particular + 0.5 * dt * (ratio * nu[k] + nu[k + 1]);
        }
        theta[k + 1] += particular;
    }
    Ok(theta)
}

/// `u_k = theta_k Gamma(t_k) + nu_k` for `k < n`.
///
/// At the horizon `Gamma theta` is `0 * inf`; it is evaluated instead as
/// `D'(T)/D(t_{n-1}) * M_n/M_{n-1} * (theta_{n-1} + dt nu_{n-1})`, the last
/// step of the variation-of-constants formula. Without drift this is
/// `theta0 D'(T)/D(0) M_n`.
pub fn optimal_control_path(
    c: &CoefBundle,
    p: &ModelParams,
    grid: &TimeGrid,
    w: &[f64],
    theta: &[f64],
    nu: &[f64],
) -> Result<Vec<f64>> {
    grid.check_len("Brownian path", w.len())?;
    grid.check_len("position path", theta.len())?;
    grid.check_len("nu path", nu.len())?;
    let n = grid.n_steps();
    let mut u = (0..n)
        .map(|k| Ok(theta[k] * c.gamma_rate(grid.time(k))? + nu[k]))
        .collect::<Result<Vec<_>>>()?;
    let s = p.sigma;
    let t_prev = grid.time(n - 1);
    let step = (s * (w[n] - w[n - 1]) - 0.5 * s * s * grid.dt()).exp();
    let carried = theta[n - 1] + grid.dt() * nu[n - 1];
    u.push(c.derivative_ratio(grid.horizon(), t_prev)? * step * carried + nu[n]);
    Ok(u)
}

/// Euler-Maruyama for `d theta = (nu + Gamma theta) dt + sigma theta dW`.
pub fn euler_position_path(
    c: &CoefBundle,
    p: &ModelParams,
    grid: &TimeGrid,
    w: &[f64],
    nu: &[f64],
) -> Result<Vec<f64>> {
    grid.check_len("Brownian path", w.len())?;
    grid.check_len("nu path", nu.len())?;
    let dt = grid.dt();
    let mut theta = Vec::with_capacity(w.len());
    theta.push(p.theta0);
    for k in 0..grid.n_steps() {
        let th = theta[k];
        let g = c.gamma_rate(grid.time(k))?;
        theta.push(th + (nu[k] + g * th) * dt + p.sigma * th * (w[k + 1] - w[k]));
    }
    Ok(theta)
}

/// Share trajectory `q_t = (T - t)/T (q0 - kappa T/4 int_0^t S_u du)` of the
/// GBM benchmark with risk linear in the trading rate.
pub fn gatheral_benchmark(q0: f64, kappa: f64, grid: &TimeGrid, s: &[f64]) -> Result<Vec<f64>> {
    grid.check_len("price path", s.len())?;
    let horizon = grid.horizon();
    let dt = grid.dt();
    let mut integral = 0.0;
    let mut q = Vec::with_capacity(s.len());
    for k in 0..=grid.n_steps() {
        if k > 0 {
            integral += 0.5 * dt * (s[k - 1] + s[k]);
        }
        let t = grid.time(k);
        q.push((horizon - t) / horizon * (q0 - 0.25 * kappa * horizon * integral));
    }
    Ok(q)
}

/// Position and dollar trading rate of one strategy along one path.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyPath {
    pub theta: Vec<f64>,
    pub control: Vec<f64>,
}

/// Convert a share trajectory to cash, `theta = q S`, recovering the control
/// from the residual `u_k = (theta_{k+1} - theta_k - sigma theta_k dW_k) / dt`.
/// This is first-order accurate in `dt`; the last control repeats `u_{n-1}`.
pub fn cash_from_shares(
    q: &[f64],
    s: &[f64],
    w: &[f64],
    sigma: f64,
    grid: &TimeGrid,
) -> Result<StrategyPath> {
    grid.check_len("share path", q.len())?;
    grid.check_len("price path", s.len())?;
    grid.check_len("Brownian path", w.len())?;
    let theta: Vec<f64> = q.iter().zip(s).map(|(q, s)| q * s).collect();
    let dt = grid.dt();
    let mut control: Vec<f64> = (0..grid.n_steps())
        .map(|k| (theta[k + 1] - theta[k] - sigma * theta[k] * (w[k + 1] - w[k])) / dt)
        .collect();
    control.push(control[grid.n_steps() - 1]);
    Ok(StrategyPath { theta, control })
}

/// A trading rule that can be replayed on any Brownian path.
pub trait Strategy: Sync {
    fn name(&self) -> &str;
    fn run(&self, grid: &TimeGrid, w: &[f64]) -> Result<StrategyPath>;
}

/// The closed-form optimum, with a deterministic drift fixed on the grid.
#[derive(Debug, Clone)]
pub struct OptimalStrategy {
    params: ModelParams,
    coefs: CoefBundle,
    nu: Vec<f64>,
    zero_drift: bool,
}

impl OptimalStrategy {
    pub fn new(params: ModelParams, grid: &TimeGrid, drift: &DriftPath) -> Result<Self> {
        let coefs = characteristic_roots(&params)?;
        let nu = nu_path(&coefs, &params, grid, drift)?;
        Ok(OptimalStrategy {
            params,
            coefs,
            nu,
            zero_drift: drift.is_zero(),
        })
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }
}

impl Strategy for OptimalStrategy {
    fn name(&self) -> &str {
        "optimal"
    }

    fn run(&self, grid: &TimeGrid, w: &[f64]) -> Result<StrategyPath> {
        let theta = if self.zero_drift {
            optimal_position_path(&self.coefs, &self.params, grid, w)?
        } else {
            optimal_position_path_drift(&self.coefs, &self.params, grid, &self.nu, w)?
        };
        let control = optimal_control_path(&self.coefs, &self.params, grid, w, &theta, &self.nu)?;
        Ok(StrategyPath { theta, control })
    }
}

/// Feedback `u = -theta / (T - t)`, whose position is `theta0 (1 - t/T) M_t`.
#[derive(Debug, Clone, Copy)]
pub struct LinearCashStrategy {
    pub theta0: f64,
    pub sigma: f64,
}

impl Strategy for LinearCashStrategy {
    fn name(&self) -> &str {
        "linear_cash"
    }

    fn run(&self, grid: &TimeGrid, w: &[f64]) -> Result<StrategyPath> {
        grid.check_len("Brownian path", w.len())?;
        let horizon = grid.horizon();
        let mut theta = Vec::with_capacity(w.len());
        let mut control = Vec::with_capacity(w.len());
        for (k, &wk) in w.iter().enumerate() {
            let t = grid.time(k);
            let m = exp_martingale(self.sigma, t, wk);
            theta.push(self.theta0 * (1.0 - t / horizon) * m);
            control.push(-self.theta0 / horizon * m);
        }
        Ok(StrategyPath { theta, control })
    }
}

/// Share benchmark converted to cash with [`cash_from_shares`].
#[derive(Debug, Clone, Copy)]
pub struct GatheralStrategy {
    pub s0: f64,
    pub q0: f64,
    pub kappa: f64,
    pub sigma: f64,
}

impl Strategy for GatheralStrategy {
    fn name(&self) -> &str {
        "gatheral"
    }

    fn run(&self, grid: &TimeGrid, w: &[f64]) -> Result<StrategyPath> {
        let s = gbm_price_path(self.s0, self.sigma, grid, w)?;
        let q = gatheral_benchmark(self.q0, self.kappa, grid, &s)?;
        cash_from_shares(&q, &s, w, self.sigma, grid)
    }
}

/// No trading: `u = 0`, `theta = theta0 M_t`.
#[derive(Debug, Clone, Copy)]
pub struct HoldStrategy {
    pub theta0: f64,
    pub sigma: f64,
}

impl Strategy for HoldStrategy {
    fn name(&self) -> &str {
        "hold"
    }

    fn run(&self, grid: &TimeGrid, w: &[f64]) -> Result<StrategyPath> {
        grid.check_len("Brownian path", w.len())?;
        let theta = w
            .iter()
            .enumerate()
            .map(|(k, &wk)| self.theta0 * exp_martingale(self.sigma, grid.time(k), wk))
            .collect();
        Ok(StrategyPath {
            theta,
            control: vec![0.0; w.len()],
        })
    }
}

/// Pathwise objective
/// `int_0^T alpha theta - (lambda/2) u^2 - (kappa sigma^2/2) theta^2 dt - (a/2) theta_T^2`
/// with the trapezoid rule. An infinite penalty requires `theta_T = 0` exactly.
pub fn path_objective(
    p: &ModelParams,
    grid: &TimeGrid,
    path: &StrategyPath,
    alpha: &[f64],
) -> Result<f64> {
    grid.check_len("position path", path.theta.len())?;
    grid.check_len("control path", path.control.len())?;
    grid.check_len("drift path", alpha.len())?;
    let risk = 0.5 * p.kappa * p.sigma * p.sigma;
    let f = |k: usize| {
        let th = path.theta[k];
        let u = path.control[k];
        alpha[k] * th - 0.5 * p.lambda * u * u - risk * th * th
    };
    let n = grid.n_steps();
    let interior: f64 = (1..n).map(f).sum();
    let running = grid.dt() * (0.5 * f(0) + interior + 0.5 * f(n));
    let terminal = path.theta[n];
    let penalty = match p.penalty {
        TerminalPenalty::Finite(a) => 0.5 * a * terminal * terminal,
        TerminalPenalty::Infinite if terminal == 0.0 => 0.0,
        TerminalPenalty::Infinite => return Err(Error::Inadmissible { terminal }),
    };
    Ok(running - penalty)
}

/// Mean and standard error of a Monte-Carlo sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        McEstimate {
            mean,
            std_error: (var / n as f64).sqrt(),
            n,
        }
    }

    /// `sqrt(se_a^2 + se_b^2)`, ignoring the positive correlation that common
    /// random numbers induce.
    pub fn pooled_std_error(&self, other: &McEstimate) -> f64 {
        self.std_error.hypot(other.std_error)
    }
}

/// Per-path objective values; path `i` uses the Brownian stream `path_seed(master_seed, i)`,
/// so two strategies evaluated with the same seed share their noise.
pub fn objective_samples(
    p: &ModelParams,
    strategy: &dyn Strategy,
    grid: &TimeGrid,
    n_paths: usize,
    master_seed: u64,
    alpha: &[f64],
) -> Result<Vec<f64>> {
    (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let w = sample_brownian(grid, path_seed(master_seed, i as u64));
            let path = strategy.run(grid, &w)?;
            path_objective(p, grid, &path, alpha)
        })
        .collect()
}

pub fn objective_mc(
    p: &ModelParams,
    strategy: &dyn Strategy,
    grid: &TimeGrid,
    n_paths: usize,
    master_seed: u64,
    drift: &DriftPath,
) -> Result<McEstimate> {
    let xs = objective_samples(p, strategy, grid, n_paths, master_seed, &drift.alpha)?;
    Ok(McEstimate::from_samples(&xs))
}

/// Everything simulated along one path of the optimal strategy.
#[derive(Debug, Clone)]
pub struct PathBundle {
    pub grid: TimeGrid,
    pub seed: u64,
    pub w: Vec<f64>,
    pub s: Vec<f64>,
    pub theta: Vec<f64>,
    pub u: Vec<f64>,
    pub q: Vec<f64>,
    pub nu: Vec<f64>,
}

pub fn simulate_optimal(
    p: &ModelParams,
    s0: f64,
    grid: &TimeGrid,
    seed: u64,
    drift: &DriftPath,
) -> Result<PathBundle> {
    let w = sample_brownian(grid, seed);
    let s = gbm_price_path(s0, p.sigma, grid, &w)?;
    let strategy = OptimalStrategy::new(*p, grid, drift)?;
    let StrategyPath { theta, control } = strategy.run(grid, &w)?;
    let q = theta.iter().zip(&s).map(|(th, s)| th / s).collect();
    Ok(PathBundle {
        grid: *grid,
        seed,
        w,
        s,
        theta,
        u: control,
        q,
        nu: strategy.nu,
    })
}
