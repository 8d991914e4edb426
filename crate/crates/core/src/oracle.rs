//! Discrete-time dynamic programming for the liquidation problem.
//!
//! Dynamics `theta_{k+1} = theta_k (1 + sigma dW_k) + u_k dt` and per-step reward
//! `dt (alpha_k theta_k - (lambda/2) u_k^2 - (kappa sigma^2/2) theta_k^2)`, with
//! terminal reward `-(a/2) theta_n^2`. The value function is
//! `V_k(theta) = -p_k theta^2/2 + b_k theta + c_k`. Maximising
//! `reward + E[V_{k+1}(theta_{k+1})]`, using `E[dW] = 0` and `E[dW^2] = dt`,
//! gives `u_k = g_k theta + h_k` with
//!
//! ```text
//! g_k = -p_{k+1} / (lambda + p_{k+1} dt)          h_k = b_{k+1} / (lambda + p_{k+1} dt)
//! p_k = kappa sigma^2 dt + p_{k+1} (1 + sigma^2 dt) + g_k p_{k+1} dt
//! b_k = alpha_k dt + b_{k+1} (1 + g_k dt)
//! c_k = c_{k+1} + b_{k+1} h_k dt / 2
//! ```
//!
//! and `p_n = a`, `b_n = c_n = 0`. Only first and second moments of `dW` enter,
//! so the binomial tree with `dW = +-sqrt(dt)` solves the same problem.
//!
//! With [`PositionDrift::Included`] the position also grows at the price drift,
//! `theta_{k+1} = theta_k (1 + alpha_k dt + sigma dW_k) + u_k dt`. Writing
//! `m_k = 1 + alpha_k dt`, the same argument gives `g_k = -m_k p_{k+1} / (lambda + p_{k+1} dt)`,
//! `p_k = kappa sigma^2 dt + m_k^2 p_{k+1} + p_{k+1} sigma^2 dt + m_k g_k p_{k+1} dt` and
//! `b_k = alpha_k dt + b_{k+1} (m_k + g_k dt)`.

use nalgebra::DMatrix;

use crate::closed_form::{characteristic_roots, nu_offset, ModelParams, TerminalPenalty};
use crate::drift::{DriftPath, DriftSpec};
use crate::error::{Error, Result};
use crate::multi_asset::MultiAssetParams;
use crate::path::TimeGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub n: usize,
    pub dt: f64,
    pub p: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

impl OracleSolution {
    /// Optimal expected reward from `theta0` at `k = 0`.
    pub fn value(&self, theta0: f64) -> f64 {
        -0.5 * self.p[0] * theta0 * theta0 + self.b[0] * theta0 + self.c[0]
    }
}

fn deterministic_alpha(drift: &DriftSpec, grid: &TimeGrid) -> Result<Vec<f64>> {
    match drift {
        DriftSpec::Scripted { .. } => Err(Error::param(
            "drift",
            "the dynamic-programming oracle needs a deterministic drift",
        )),
        _ => Ok(drift.realize(grid)?.alpha),
    }
}

/// Whether the price drift also moves the cash position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionDrift {
    /// `theta_{k+1} = theta_k (1 + sigma dW_k) + u_k dt`; the closed forms solve this problem.
    Neglected,
    /// `theta_{k+1} = theta_k (1 + alpha_k dt + sigma dW_k) + u_k dt`.
    Included,
}

fn growth(alpha: &[f64], dt: f64, mode: PositionDrift) -> Vec<f64> {
    match mode {
        PositionDrift::Neglected => vec![1.0; alpha.len()],
        PositionDrift::Included => alpha.iter().map(|a| 1.0 + a * dt).collect(),
    }
}

fn riccati(
    p: &ModelParams,
    n: usize,
    drift: &DriftSpec,
    mode: PositionDrift,
) -> Result<OracleSolution> {
    let a = p.validate_discrete()?;
    let grid = TimeGrid::new(n, p.horizon)?;
    let alpha = deterministic_alpha(drift, &grid)?;
    let dt = grid.dt();
    let m = growth(&alpha, dt, mode);
    let s2 = p.sigma * p.sigma;
    let mut pv = vec![0.0; n + 1];
    let mut bv = vec![0.0; n + 1];
    let mut cv = vec![0.0; n + 1];
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    pv[n] = a;
    for k in (0..n).rev() {
        let (pn, bn) = (pv[k + 1], bv[k + 1]);
        let den = p.lambda + pn * dt;
        g[k] = -(m[k] * pn) / den;
        h[k] = bn / den;
        pv[k] = s2 * (p.kappa * dt) + m[k] * m[k] * pn + (pn * s2) * dt + m[k] * (pn * g[k]) * dt;
        bv[k] = alpha[k] * dt + bn * (m[k] + g[k] * dt);
        cv[k] = cv[k + 1] + 0.5 * bn * h[k] * dt;
    }
    Ok(OracleSolution {
        n,
        dt,
        p: pv,
        b: bv,
        c: cv,
        g,
        h,
    })
}

pub fn scalar_riccati(p: &ModelParams, n: usize, drift: &DriftSpec) -> Result<OracleSolution> {
    riccati(p, n, drift, PositionDrift::Neglected)
}

/// Optimum of the problem whose position also grows at the price drift.
pub fn unsimplified_riccati(
    p: &ModelParams,
    n: usize,
    drift: &DriftSpec,
) -> Result<OracleSolution> {
    riccati(p, n, drift, PositionDrift::Included)
}

/// Expected reward from `p.theta0` of the affine feedback `u_k = g_k theta + h_k`
/// under the chosen dynamics, by backward policy evaluation.
pub fn evaluate_affine_policy(
    p: &ModelParams,
    drift: &DriftSpec,
    mode: PositionDrift,
    g: &[f64],
    h: &[f64],
) -> Result<f64> {
    let a = p.validate_discrete()?;
    let n = g.len();
    if h.len() != n {
        return Err(Error::LengthMismatch {
            what: "policy offsets",
            expected: n,
            got: h.len(),
        });
    }
    let grid = TimeGrid::new(n, p.horizon)?;
    let alpha = deterministic_alpha(drift, &grid)?;
    let dt = grid.dt();
    let m = growth(&alpha, dt, mode);
    let s2 = p.sigma * p.sigma;
    let (mut pq, mut b, mut c) = (a, 0.0, 0.0);
    for k in (0..n).rev() {
        let r = m[k] + g[k] * dt;
        let (pn, bn, cn) = (pq, b, c);
        pq = dt * (p.lambda * g[k] * g[k] + p.kappa * s2) + pn * (r * r + s2 * dt);
        b = dt * (alpha[k] - p.lambda * g[k] * h[k]) - pn * r * h[k] * dt + bn * r;
        c = cn - 0.5 * p.lambda * h[k] * h[k] * dt - 0.5 * pn * h[k] * h[k] * dt * dt
            + bn * h[k] * dt;
    }
    let th = p.theta0;
    Ok(-0.5 * pq * th * th + b * th + c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixOracleSolution {
    pub n: usize,
    pub dt: f64,
    pub p: Vec<DMatrix<f64>>,
    pub g: Vec<DMatrix<f64>>,
}

/// Matrix recursion for the portfolio problem with running risk
/// `(kappa/2) theta' Sigma theta`. The noise term contributes
/// `E[(sigma o theta o dW)' P (sigma o theta o dW)] = dt theta' (P o Sigma) theta`:
///
/// ```text
/// G_k = -(lambda I + P_{k+1} dt)^{-1} P_{k+1}
/// P_k = kappa Sigma dt + P_{k+1} + dt (P_{k+1} o Sigma) + dt P_{k+1} G_k
/// ```
pub fn matrix_riccati(mp: &MultiAssetParams, n: usize) -> Result<MatrixOracleSolution> {
    mp.validate()?;
    let grid = TimeGrid::new(n, mp.horizon)?;
    let dt = grid.dt();
    let dim = mp.n_assets();
    let cov = mp.covariance();
    let id = DMatrix::<f64>::identity(dim, dim);
    let mut ps = vec![DMatrix::zeros(dim, dim); n + 1];
    let mut gs = vec![DMatrix::zeros(dim, dim); n];
    ps[n] = &id * mp.a;
    for k in (0..n).rev() {
        let pn = &ps[k + 1];
        let den = &id * mp.lambda + pn * dt;
        let g = den
            .lu()
            .solve(&(-pn))
            .ok_or(Error::NotPositiveDefinite { step: k })?;
        let next = &cov * (mp.kappa * dt) + pn + pn.component_mul(&cov) * dt + (pn * &g) * dt;
        if next.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite { step: k });
        }
        ps[k] = next;
        gs[k] = g;
    }
    Ok(MatrixOracleSolution {
        n,
        dt,
        p: ps,
        g: gs,
    })
}

/// Exact backward induction on the binary tree `dW = +-sqrt(dt)`.
///
/// `controls[k][j]` and `theta[k][j]` belong to node `j` of level `k`, whose
/// children are `2j` (up) and `2j + 1` (down).
#[derive(Debug, Clone, PartialEq)]
pub struct TreeSolution {
    pub depth: usize,
    pub value: f64,
    pub theta: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy)]
struct NodeQuadratic {
    p: f64,
    b: f64,
    c: f64,
    g: f64,
    h: f64,
}

pub fn binomial_tree_dp(p: &ModelParams, depth: usize, drift: &DriftSpec) -> Result<TreeSolution> {
    let a = p.validate_discrete()?;
    let grid = TimeGrid::new(depth, p.horizon)?;
    let alpha = deterministic_alpha(drift, &grid)?;
    let dt = grid.dt();
    let sq = dt.sqrt();
    let (uf, df) = (1.0 + p.sigma * sq, 1.0 - p.sigma * sq);
    let risk = p.kappa * p.sigma * p.sigma * dt;

    let leaf = NodeQuadratic {
        p: a,
        b: 0.0,
        c: 0.0,
        g: 0.0,
        h: 0.0,
    };
    let mut levels: Vec<Vec<NodeQuadratic>> = vec![Vec::new(); depth + 1];
    levels[depth] = vec![leaf; 1 << depth];
    for k in (0..depth).rev() {
        let children = &levels[k + 1];
        let nodes = (0..1usize << k)
            .map(|j| {
                let up = children[2 * j];
                let dn = children[2 * j + 1];
                let den = p.lambda + 0.5 * (up.p + dn.p) * dt;
                let g = -0.5 * (up.p * uf + dn.p * df) / den;
                let h = 0.5 * (up.b + dn.b) / den;
                let (eu, ed) = (uf + g * dt, df + g * dt);
                let pk = p.lambda * dt * g * g + risk + 0.5 * up.p * eu * eu + 0.5 * dn.p * ed * ed;
                let bk = -p.lambda * dt * g * h
                    + alpha[k] * dt
                    + 0.5 * (-up.p * eu * h * dt + up.b * eu)
                    + 0.5 * (-dn.p * ed * h * dt + dn.b * ed);
                let ck = -0.5 * p.lambda * dt * h * h
                    + 0.5 * (-0.5 * up.p * h * h * dt * dt + up.b * h * dt + up.c)
                    + 0.5 * (-0.5 * dn.p * h * h * dt * dt + dn.b * h * dt + dn.c);
                NodeQuadratic {
                    p: pk,
                    b: bk,
                    c: ck,
                    g,
                    h,
                }
            })
            .collect();
        levels[k] = nodes;
    }

    let root = levels[0][0];
    let value = -0.5 * root.p * p.theta0 * p.theta0 + root.b * p.theta0 + root.c;
    let mut theta = vec![vec![p.theta0]];
    let mut controls = Vec::with_capacity(depth);
    for k in 0..depth {
        let u: Vec<f64> = theta[k]
            .iter()
            .zip(&levels[k])
            .map(|(th, q)| q.g * th + q.h)
            .collect();
        let next = tree_children(&theta[k], &u, uf, df, dt);
        controls.push(u);
        theta.push(next);
    }
    Ok(TreeSolution {
        depth,
        value,
        theta,
        controls,
    })
}

fn tree_children(theta: &[f64], u: &[f64], uf: f64, df: f64, dt: f64) -> Vec<f64> {
    theta
        .iter()
        .zip(u)
        .flat_map(|(th, u)| [th * uf + u * dt, th * df + u * dt])
        .collect()
}

/// Expected reward of an arbitrary adapted control tree (same layout as
/// [`TreeSolution::controls`]), by enumerating all `2^depth` paths.
pub fn evaluate_tree_policy(
    p: &ModelParams,
    drift: &DriftSpec,
    controls: &[Vec<f64>],
) -> Result<f64> {
    let a = p.validate_discrete()?;
    let depth = controls.len();
    for (k, level) in controls.iter().enumerate() {
        if level.len() != 1 << k {
            return Err(Error::LengthMismatch {
                what: "control tree level",
                expected: 1 << k,
                got: level.len(),
            });
        }
    }
    let grid = TimeGrid::new(depth, p.horizon)?;
    let alpha = deterministic_alpha(drift, &grid)?;
    let dt = grid.dt();
    let sq = dt.sqrt();
    let (uf, df) = (1.0 + p.sigma * sq, 1.0 - p.sigma * sq);
    let risk = 0.5 * p.kappa * p.sigma * p.sigma;

    let mut theta = vec![p.theta0];
    let mut total = 0.0;
    let mut weight = 1.0;
    for (k, u) in controls.iter().enumerate() {
        let level: f64 = theta
            .iter()
            .zip(u)
            .map(|(th, u)| dt * (alpha[k] * th - 0.5 * p.lambda * u * u - risk * th * th))
            .sum();
        total += weight * level;
        theta = tree_children(&theta, u, uf, df, dt);
        weight *= 0.5;
    }
    let terminal: f64 = theta.iter().map(|th| 0.5 * a * th * th).sum();
    Ok(total - weight * terminal)
}

/// One-step problem minimised by grid search: the cost
/// `(lambda/2) u^2 dt + (a/2) E[(theta0 (1 + sigma dW) + u dt)^2]` over
/// `10^7` points of `u in [-10|theta0|/dt, 10|theta0|/dt]`, followed by local
/// zooming around the best point.
pub fn brute_force_one_step(p: &ModelParams) -> Result<f64> {
    let a = p.validate_discrete()?;
    let dt = p.horizon;
    let th = p.theta0;
    let cost = |u: f64| {
        let mean = th + u * dt;
        0.5 * p.lambda * u * u * dt + 0.5 * a * (mean * mean + th * th * p.sigma * p.sigma * dt)
    };
    let scan = |lo: f64, hi: f64, points: usize| {
        let step = (hi - lo) / (points - 1) as f64;
        let best = (0..points)
            .map(|i| lo + step * i as f64)
            .min_by(|x, y| cost(*x).total_cmp(&cost(*y)))
            .unwrap_or(lo);
        (best, step)
    };
    let half_width = 10.0 * th.abs().max(f64::MIN_POSITIVE) / dt;
    let (mut best, mut step) = scan(-half_width, half_width, 10_000_001);
    for _ in 0..4 {
        (best, step) = scan(best - 2.0 * step, best + 2.0 * step, 1001);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub a: f64,
    /// `max |g_k - Gamma(t_k)| / |Gamma(t_k)|` over `t_k <= 0.9 T`.
    pub max_rel_error: f64,
    pub t_at_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `-log(error)` against `log(n)`.
    pub fitted_order: f64,
}

/// Fraction of the horizon over which discrete and continuous gains are compared.
pub const COMPARISON_WINDOW: f64 = 0.9;

fn gain_error(p: &ModelParams, n: usize, a: f64) -> Result<ConvergenceRow> {
    let cont = ModelParams {
        penalty: TerminalPenalty::Infinite,
        ..*p
    };
    let coefs = characteristic_roots(&cont)?;
    let sol = scalar_riccati(&p.with_penalty(a), n, &DriftSpec::Zero)?;
    let grid = TimeGrid::new(n, p.horizon)?;
    let mut worst = (0.0, 0.0);
    for k in 0..n {
        let t = grid.time(k);
        if t > COMPARISON_WINDOW * p.horizon {
            break;
        }
        let gamma = coefs.gamma_rate(t)?;
        let err = ((sol.g[k] - gamma) / gamma).abs();
        if err > worst.0 {
            worst = (err, t);
        }
    }
    Ok(ConvergenceRow {
        n,
        a,
        max_rel_error: worst.0,
        t_at_max: worst.1,
    })
}

pub fn fitted_order(rows: &[ConvergenceRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.max_rel_error > 0.0)
        .map(|r| ((r.n as f64).ln(), -r.max_rel_error.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let m = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / m,
        pts.iter().map(|p| p.1).sum::<f64>() / m,
    );
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn gain_convergence_report(p: &ModelParams, ns: &[usize], a: f64) -> Result<ConvergenceReport> {
    let rows = ns
        .iter()
        .map(|&n| gain_error(p, n, a))
        .collect::<Result<Vec<_>>>()?;
    let fitted_order = fitted_order(&rows);
    Ok(ConvergenceReport { rows, fitted_order })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetComparison {
    pub h0: f64,
    pub nu0: f64,
    pub rel_error: f64,
}

/// Discrete offset `h_0` against the closed-form `nu(0)` for a deterministic drift.
pub fn drift_offset_error(
    p: &ModelParams,
    n: usize,
    a: f64,
    drift: &DriftSpec,
) -> Result<OffsetComparison> {
    let cont = ModelParams {
        penalty: TerminalPenalty::Infinite,
        ..*p
    };
    let coefs = characteristic_roots(&cont)?;
    let sol = scalar_riccati(&p.with_penalty(a), n, drift)?;
    let grid = TimeGrid::new(n, p.horizon)?;
    let path: DriftPath = drift.realize(&grid)?;
    let nu0 = nu_offset(&coefs, &cont, 0.0, path.alpha[0], path.cond_exp_terminal[0])?;
    Ok(OffsetComparison {
        h0: sol.h[0],
        nu0,
        rel_error: ((sol.h[0] - nu0) / nu0).abs(),
    })
}
