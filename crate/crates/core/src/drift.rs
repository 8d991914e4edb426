//! Drift models for the return process.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::path::TimeGrid;

pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// `(t, alpha_t) -> E^Q[alpha_T | F_t]`.
pub type CondExpFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum DriftSpec {
    Zero,
    /// Known function of time; its terminal expectation is `alpha(T)` at every `t`.
    Deterministic(TimeFn),
    /// A realised drift path on a grid together with the conditional expectation map.
    Scripted {
        alpha_path: Vec<f64>,
        cond_exp_terminal: CondExpFn,
    },
}

impl fmt::Debug for DriftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftSpec::Zero => f.write_str("Zero"),
            DriftSpec::Deterministic(_) => f.write_str("Deterministic(..)"),
            DriftSpec::Scripted { alpha_path, .. } => f
                .debug_struct("Scripted")
                .field("len", &alpha_path.len())
                .finish_non_exhaustive(),
        }
    }
}

impl DriftSpec {
    pub fn constant(alpha: f64) -> Self {
        DriftSpec::Deterministic(Arc::new(move |_| alpha))
    }

    /// Linear interpolation from `start` at `t = 0` to `end` at `t = horizon`.
    pub fn linear(start: f64, end: f64, horizon: f64) -> Self {
        DriftSpec::Deterministic(Arc::new(move |t| start + (end - start) * t / horizon))
    }

    /// Ornstein-Uhlenbeck conditional expectation `m + (alpha_t - m) exp(-k (T - t))`.
    pub fn mean_reverting_cond_exp(speed: f64, mean: f64, horizon: f64) -> CondExpFn {
        Arc::new(move |t, alpha| mean + (alpha - mean) * (-speed * (horizon - t)).exp())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, DriftSpec::Zero)
    }

    /// Evaluate `alpha_t` and `E^Q[alpha_T | F_t]` on every grid time.
    pub fn realize(&self, grid: &TimeGrid) -> Result<DriftPath> {
        let times = grid.times();
        let horizon = grid.horizon();
        match self {
            DriftSpec::Zero => Ok(DriftPath::zero(grid.n_steps())),
            DriftSpec::Deterministic(f) => {
                let terminal = f(horizon);
                Ok(DriftPath {
                    alpha: times.iter().map(|&t| f(t)).collect(),
                    cond_exp_terminal: vec![terminal; times.len()],
                })
            }
            DriftSpec::Scripted {
                alpha_path,
                cond_exp_terminal,
            } => {
                if alpha_path.len() != times.len() {
                    return Err(Error::LengthMismatch {
                        what: "scripted drift path",
                        expected: times.len(),
                        got: alpha_path.len(),
                    });
                }
                Ok(DriftPath {
                    alpha: alpha_path.clone(),
                    cond_exp_terminal: times
                        .iter()
                        .zip(alpha_path)
                        .map(|(&t, &a)| cond_exp_terminal(t, a))
                        .collect(),
                })
            }
        }
    }
}

/// Drift realised on a grid: `alpha[k]` and `cond_exp_terminal[k] = E^Q[alpha_T | F_{t_k}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftPath {
    pub alpha: Vec<f64>,
    pub cond_exp_terminal: Vec<f64>,
}

impl DriftPath {
    pub fn zero(n_steps: usize) -> Self {
        DriftPath {
            alpha: vec![0.0; n_steps + 1],
            cond_exp_terminal: vec![0.0; n_steps + 1],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.alpha
            .iter()
            .chain(&self.cond_exp_terminal)
            .all(|&x| x == 0.0)
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_terminal_expectation_is_terminal_value() {
        let grid = TimeGrid::new(10, 5.0).unwrap();
        let d = DriftSpec::linear(0.1, 0.0, 5.0).realize(&grid).unwrap();
        assert!(d.cond_exp_terminal.iter().all(|&e| e == 0.0));
        assert_eq!(d.alpha[0], 0.1);
        assert!(d.alpha[10].abs() < 1e-15);
    }

    #[test]
    fn zero_mode_is_identically_zero() {
        let grid = TimeGrid::new(4, 1.0).unwrap();
        assert!(DriftSpec::Zero.realize(&grid).unwrap().is_zero());
    }

    #[test]
    fn scripted_length_is_checked() {
        let grid = TimeGrid::new(4, 1.0).unwrap();
        let scripted = DriftSpec::Scripted {
            alpha_path: vec![0.0; 3],
            cond_exp_terminal: DriftSpec::mean_reverting_cond_exp(1.0, 0.0, 1.0),
        };
        assert!(matches!(
            scripted.realize(&grid),
            Err(Error::LengthMismatch {
                expected: 5,
                got: 3,
                ..
            })
        ));
    }

    #[test]
    fn mean_reverting_expectation_is_exact_at_horizon() {
        let f = DriftSpec::mean_reverting_cond_exp(0.7, 0.01, 3.0);
        assert_eq!(f(3.0, 0.2), 0.2);
        assert!(f(0.0, 0.2) < 0.2 && f(0.0, 0.2) > 0.01);
    }
}
