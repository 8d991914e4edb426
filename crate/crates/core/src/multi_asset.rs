//! Portfolio liquidation with correlated assets and a finite terminal penalty.
//!
//! The optimality conditions reduce to a constant-coefficient linear system in
//! the packed state `(v, z, z^{i,j})` of dimension `N^2 + N`:
//!
//! ```text
//! v'^i     = (kappa sigma_i^2 / lambda) z^i + (kappa / lambda) sum_{j != i} rho_ij sigma_i sigma_j z^{i,j}
//! z'^i     = sigma_i^2 z^i + v^i
//! z'^{i,j} = sigma_i sigma_j rho_ij z^{i,j} + v^j
//! ```
//!
//! with `z^i(t0) = theta^i`, `z^{i,j}(t0) = theta^j` and `v(T) = -(a/lambda) z(T)`.
//! The control at `t0` is `u = v(t0) = G(t0) theta(t0)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::closed_form::{non_negative, positive};
use crate::error::{Error, Result};
use crate::expm::matrix_exponential;
use crate::path::{path_seed, standard_normals, TimeGrid};

/// Largest tolerated condition estimate of the reduced boundary system.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiAssetParams {
    pub sigma: Vec<f64>,
    pub rho: DMatrix<f64>,
    pub lambda: f64,
    pub kappa: f64,
    pub horizon: f64,
    /// Finite terminal penalty.
    pub a: f64,
    /// Initial dollar positions.
    pub theta0: Vec<f64>,
}

impl MultiAssetParams {
    pub fn new(
        sigma: Vec<f64>,
        rho: DMatrix<f64>,
        lambda: f64,
        kappa: f64,
        horizon: f64,
        a: f64,
        theta0: Vec<f64>,
    ) -> Result<Self> {
        let mp = MultiAssetParams {
            sigma,
            rho,
            lambda,
            kappa,
            horizon,
            a,
            theta0,
        };
        mp.validate()?;
        Ok(mp)
    }

    /// `a = 1e8 lambda / T`.
    pub fn default_penalty(lambda: f64, horizon: f64) -> f64 {
        1e8 * lambda / horizon
    }

    pub fn n_assets(&self) -> usize {
        self.sigma.len()
    }

    pub fn with_penalty(&self, a: f64) -> Self {
        MultiAssetParams { a, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.sigma.len();
        if n == 0 {
            return Err(Error::param("sigma", "need at least one asset"));
        }
        for &s in &self.sigma {
            positive("sigma", s)?;
        }
        positive("lambda", self.lambda)?;
        non_negative("kappa", self.kappa)?;
        positive("horizon", self.horizon)?;
        positive("a", self.a)?;
        if self.theta0.len() != n {
            return Err(Error::LengthMismatch {
                what: "theta0",
                expected: n,
                got: self.theta0.len(),
            });
        }
        if self.theta0.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("theta0", "must be finite"));
        }
        if self.rho.shape() != (n, n) {
            return Err(Error::param(
                "rho",
                format!("expected {n}x{n}, got {:?}", self.rho.shape()),
            ));
        }
        for i in 0..n {
            if self.rho[(i, i)] != 1.0 {
                return Err(Error::param("rho", format!("diagonal entry {i} is not 1")));
            }
            for j in 0..n {
                let r = self.rho[(i, j)];
                if !(-1.0..=1.0).contains(&r) {
                    return Err(Error::param(
                        "rho",
                        format!("entry ({i},{j}) = {r} outside [-1, 1]"),
                    ));
                }
                if r != self.rho[(j, i)] {
                    return Err(Error::param("rho", "not symmetric"));
                }
            }
        }
        if self.covariance().cholesky().is_none() {
            return Err(Error::param("rho", "covariance is singular"));
        }
        Ok(())
    }

    /// `Sigma_ij = sigma_i sigma_j rho_ij`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.n_assets();
        DMatrix::from_fn(n, n, |i, j| {
            self.sigma[i] * self.sigma[j] * self.rho[(i, j)]
        })
    }
}

/// Index map of the packed state: `v^i` at `i`, `z^i` at `N + i`, and
/// `z^{i,j}` (`j != i`) at `2N + i (N - 1) + j'` where `j'` skips `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OdeIndex {
    n: usize,
}

impl OdeIndex {
    pub fn new(n: usize) -> Self {
        OdeIndex { n }
    }

    pub fn dim(&self) -> usize {
        self.n * self.n + self.n
    }

    pub fn v(&self, i: usize) -> usize {
        i
    }

    pub fn z(&self, i: usize) -> usize {
        self.n + i
    }

    pub fn zx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i != j);
        let col = if j < i { j } else { j - 1 };
        2 * self.n + i * (self.n - 1) + col
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeState {
    pub v: Vec<f64>,
    pub z: Vec<f64>,
    /// `zx[i][j']` holds `z^{i,j}` with `j'` the index of `j` among `j != i`.
    pub zx: Vec<Vec<f64>>,
}

impl OdeState {
    pub fn pack(&self) -> DVector<f64> {
        let n = self.v.len();
        let idx = OdeIndex::new(n);
        let mut x = DVector::zeros(idx.dim());
        for i in 0..n {
            x[idx.v(i)] = self.v[i];
            x[idx.z(i)] = self.z[i];
            for (col, j) in (0..n).filter(|&j| j != i).enumerate() {
                x[idx.zx(i, j)] = self.zx[i][col];
            }
        }
        x
    }

    pub fn unpack(x: &DVector<f64>, n: usize) -> Result<Self> {
        let idx = OdeIndex::new(n);
        if x.len() != idx.dim() {
            return Err(Error::LengthMismatch {
                what: "packed state",
                expected: idx.dim(),
                got: x.len(),
            });
        }
        Ok(OdeState {
            v: (0..n).map(|i| x[idx.v(i)]).collect(),
            z: (0..n).map(|i| x[idx.z(i)]).collect(),
            zx: (0..n)
                .map(|i| {
                    (0..n)
                        .filter(|&j| j != i)
                        .map(|j| x[idx.zx(i, j)])
                        .collect()
                })
                .collect(),
        })
    }
}

pub fn build_system_matrix(mp: &MultiAssetParams) -> Result<DMatrix<f64>> {
    mp.validate()?;
    let n = mp.n_assets();
    let idx = OdeIndex::new(n);
    let ratio = mp.kappa / mp.lambda;
    let cov = mp.covariance();
    let mut m = DMatrix::zeros(idx.dim(), idx.dim());
    for i in 0..n {
        m[(idx.v(i), idx.z(i))] = ratio * cov[(i, i)];
        m[(idx.z(i), idx.z(i))] = cov[(i, i)];
        m[(idx.z(i), idx.v(i))] = 1.0;
        for j in (0..n).filter(|&j| j != i) {
            m[(idx.v(i), idx.zx(i, j))] = ratio * cov[(i, j)];
            m[(idx.zx(i, j), idx.zx(i, j))] = cov[(i, j)];
            m[(idx.zx(i, j), idx.v(j))] = 1.0;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix {
    pub t: f64,
    pub gain: DMatrix<f64>,
}

/// Columns mapping `theta(t0)` to the known part `(z, z^{i,j})(t0)` of the state.
fn initial_embedding(idx: &OdeIndex, n: usize) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(idx.dim(), n);
    for i in 0..n {
        e[(idx.z(i), i)] = 1.0;
        for j in (0..n).filter(|&j| j != i) {
            e[(idx.zx(i, j), j)] = 1.0;
        }
    }
    e
}

fn singular_value_condition(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn solve_boundary(mp: &MultiAssetParams, system: &DMatrix<f64>, t0: f64) -> Result<DMatrix<f64>> {
    if !(0.0..mp.horizon).contains(&t0) {
        return Err(Error::OutOfDomain {
            t: t0,
            horizon: mp.horizon,
        });
    }
    let n = mp.n_assets();
    let idx = OdeIndex::new(n);
    let e = matrix_exponential(system, mp.horizon - t0)?;
    // Rows of v(T) + (a/lambda) z(T).
    let penalty = mp.a / mp.lambda;
    let row = |r: usize, c: usize| e[(idx.v(r), c)] + penalty * e[(idx.z(r), c)];
    let reduced = DMatrix::from_fn(n, n, |r, c| row(r, idx.v(c)));
    let embed = initial_embedding(&idx, n);
    let known = DMatrix::from_fn(n, idx.dim(), row) * embed;
    let condition = singular_value_condition(&reduced);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { t: t0, condition });
    }
    reduced
        .lu()
        .solve(&(-known))
        .ok_or(Error::IllConditioned { t: t0, condition })
}

/// `G(t0)` from the boundary-value system, one solve against all `N` unit vectors.
pub fn solve_feedback_gain(mp: &MultiAssetParams, t0: f64) -> Result<GainMatrix> {
    let system = build_system_matrix(mp)?;
    Ok(GainMatrix {
        t: t0,
        gain: solve_boundary(mp, &system, t0)?,
    })
}

/// Packed state at `t0` for the position `theta`, with `v(t0) = G(t0) theta`.
pub fn initial_state(mp: &MultiAssetParams, t0: f64, theta: &[f64]) -> Result<DVector<f64>> {
    let n = mp.n_assets();
    if theta.len() != n {
        return Err(Error::LengthMismatch {
            what: "theta",
            expected: n,
            got: theta.len(),
        });
    }
    let idx = OdeIndex::new(n);
    let th = DVector::from_column_slice(theta);
    let g = solve_feedback_gain(mp, t0)?;
    let mut x = initial_embedding(&idx, n) * &th;
    let v = g.gain * th;
    for i in 0..n {
        x[idx.v(i)] = v[i];
    }
    Ok(x)
}

/// The solved state `exp(M (t - t0)) x(t0)` at each of `times`.
pub fn bvp_trajectory(
    mp: &MultiAssetParams,
    t0: f64,
    theta: &[f64],
    times: &[f64],
) -> Result<Vec<DVector<f64>>> {
    let system = build_system_matrix(mp)?;
    let x0 = initial_state(mp, t0, theta)?;
    times
        .iter()
        .map(|&t| Ok(matrix_exponential(&system, t - t0)? * &x0))
        .collect()
}

/// `G(t_k)` for `k < n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSchedule {
    pub grid: TimeGrid,
    pub gains: Vec<DMatrix<f64>>,
}

impl GainSchedule {
    pub fn compute(mp: &MultiAssetParams, grid: &TimeGrid) -> Result<Self> {
        if grid.horizon() != mp.horizon {
            return Err(Error::param(
                "grid",
                "horizon differs from the model horizon",
            ));
        }
        let system = build_system_matrix(mp)?;
        let gains = (0..grid.n_steps())
            .into_par_iter()
            .map(|k| solve_boundary(mp, &system, grid.time(k)))
            .collect::<Result<Vec<_>>>()?;
        Ok(GainSchedule { grid: *grid, gains })
    }
}

/// Increments with covariance `rho dt` (unit volatility). Asset `i` draws its
/// independent normals from the stream `seeds[i]`, then the streams are mixed
/// by the Cholesky factor of `rho`.
pub fn correlated_increments(
    rho: &DMatrix<f64>,
    grid: &TimeGrid,
    seeds: &[u64],
) -> Result<Vec<DVector<f64>>> {
    let n = rho.nrows();
    if seeds.len() != n {
        return Err(Error::LengthMismatch {
            what: "seeds",
            expected: n,
            got: seeds.len(),
        });
    }
    let l = rho
        .clone()
        .cholesky()
        .ok_or_else(|| Error::param("rho", "not positive definite"))?
        .unpack();
    let sd = grid.dt().sqrt();
    let streams: Vec<Vec<f64>> = seeds
        .iter()
        .map(|&s| standard_normals(s, grid.n_steps()))
        .collect();
    Ok((0..grid.n_steps())
        .map(|k| {
            let z = DVector::from_fn(n, |i, _| streams[i][k]);
            &l * z * sd
        })
        .collect())
}

/// Per-asset seeds for path `index` under `master`.
pub fn asset_seeds(master: u64, index: u64, n_assets: usize) -> Vec<u64> {
    let base = path_seed(master, index);
    (0..n_assets as u64).map(|i| path_seed(base, i)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiPath {
    /// `theta[k]` is the position vector at `t_k`, `k = 0..=n`.
    pub theta: Vec<DVector<f64>>,
    /// `u[k] = G(t_k) theta[k]`, `k < n`.
    pub u: Vec<DVector<f64>>,
}

impl MultiPath {
    pub fn terminal_abs(&self) -> Vec<f64> {
        self.theta
            .last()
            .map(|x| x.iter().map(|v| v.abs()).collect())
            .unwrap_or_default()
    }
}

/// Euler-Maruyama, `theta_{k+1} = theta_k + G_k theta_k dt + sigma o theta_k o dW_k`.
pub fn simulate_multi(
    mp: &MultiAssetParams,
    schedule: &GainSchedule,
    dw: &[DVector<f64>],
) -> Result<MultiPath> {
    let n_steps = schedule.grid.n_steps();
    if schedule.gains.len() != n_steps {
        return Err(Error::LengthMismatch {
            what: "gain schedule",
            expected: n_steps,
            got: schedule.gains.len(),
        });
    }
    if dw.len() != n_steps {
        return Err(Error::LengthMismatch {
            what: "Brownian increments",
            expected: n_steps,
            got: dw.len(),
        });
    }
    let n = mp.n_assets();
    let dt = schedule.grid.dt();
    let sigma = DVector::from_column_slice(&mp.sigma);
    let mut theta = Vec::with_capacity(n_steps + 1);
    let mut u = Vec::with_capacity(n_steps);
    theta.push(DVector::from_column_slice(&mp.theta0));
    for k in 0..n_steps {
        if dw[k].len() != n {
            return Err(Error::LengthMismatch {
                what: "Brownian increment",
                expected: n,
                got: dw[k].len(),
            });
        }
        let th = &theta[k];
        let uk = &schedule.gains[k] * th;
        let noise = sigma.component_mul(th).component_mul(&dw[k]);
        theta.push(th + &uk * dt + noise);
        u.push(uk);
    }
    Ok(MultiPath { theta, u })
}
