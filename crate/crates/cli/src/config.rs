//! JSON experiment configuration. Every field has a default, unknown keys are
//! rejected, and the resolved configuration is written to each run manifest.

use std::path::Path;

use liquidex_core::closed_form::{ModelParams, TerminalPenalty};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub monte_carlo: MonteCarloConfig,
    pub paths: PathsConfig,
    pub sweep: SweepConfig,
    pub oracle: OracleConfig,
    pub multi: MultiConfig,
    pub drift: DriftConfig,
    /// Also write a gnuplot script next to the CSV files.
    pub gnuplot: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 2024,
            model: ModelConfig::default(),
            grid: GridConfig::default(),
            monte_carlo: MonteCarloConfig::default(),
            paths: PathsConfig::default(),
            sweep: SweepConfig::default(),
            oracle: OracleConfig::default(),
            multi: MultiConfig::default(),
            drift: DriftConfig::default(),
            gnuplot: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Initial price [$].
    pub s0: f64,
    /// Initial holding [shares].
    pub q0: f64,
    /// Horizon [time].
    pub horizon: f64,
    /// Temporary impact [$^-1 time].
    pub lambda: f64,
    /// Risk aversion.
    pub kappa: f64,
    /// Volatility [time^-1/2].
    pub sigma: f64,
    /// Terminal penalty `a`; `null` is the liquidation constraint.
    pub terminal_penalty: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            s0: 100.0,
            q0: 1000.0,
            horizon: 20.0,
            lambda: 0.2,
            kappa: 0.2,
            sigma: 0.1,
            terminal_penalty: None,
        }
    }
}

impl ModelConfig {
    pub fn theta0(&self) -> f64 {
        self.q0 * self.s0
    }

    pub fn params(&self) -> CliResult<ModelParams> {
        let mut p = ModelParams::new(
            self.lambda,
            self.kappa,
            self.sigma,
            self.horizon,
            self.theta0(),
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(a) = self.terminal_penalty {
            p.penalty = TerminalPenalty::Finite(a);
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n_steps: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n_steps: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub n_paths: usize,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig { n_paths: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub sigmas: Vec<f64>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            sigmas: vec![0.05, 0.1, 0.2, 0.4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    Sigma,
    Lambda,
    Kappa,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Sigma => "sigma",
            SweepParameter::Lambda => "lambda",
            SweepParameter::Kappa => "kappa",
        }
    }

    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepParameter::Sigma => vec![0.05, 0.1, 0.2, 0.4],
            SweepParameter::Lambda | SweepParameter::Kappa => vec![0.05, 0.2, 0.8],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    /// `null` selects the parameter's default grid.
    pub values: Option<Vec<f64>>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            parameter: SweepParameter::Kappa,
            values: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub steps: Vec<usize>,
    pub penalties: Vec<f64>,
    pub headline_steps: usize,
    pub headline_penalty: f64,
    /// Relative tolerance on the headline gain error and the drift offset.
    pub tolerance: f64,
    pub drift_alpha: f64,
    pub tree_depth: usize,
    pub multi_riccati_steps: usize,
    pub multi_penalty: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            steps: vec![500, 1000, 2500, 5000, 10000],
            penalties: vec![1e4, 1e6, 1e8],
            headline_steps: 5000,
            headline_penalty: 1e8,
            tolerance: 0.01,
            drift_alpha: 0.05,
            tree_depth: 12,
            multi_riccati_steps: 5000,
            multi_penalty: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiConfig {
    pub sigmas: Vec<f64>,
    /// Common off-diagonal correlation of each demo portfolio.
    pub correlations: Vec<f64>,
    /// Initial dollar positions; `null` puts `q0 S0` in every asset.
    pub theta0: Option<Vec<f64>>,
    /// `null` selects `1e8 lambda / T`.
    pub terminal_penalty: Option<f64>,
    pub n_steps: usize,
}

impl Default for MultiConfig {
    fn default() -> Self {
        MultiConfig {
            sigmas: vec![0.1, 0.2],
            correlations: vec![0.5, -0.5, 0.0],
            theta0: None,
            terminal_penalty: None,
            n_steps: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftConfig {
    pub constant_alpha: f64,
    pub linear_start: f64,
    pub linear_end: f64,
    pub mean_reverting: MeanRevertingConfig,
    /// Step for the finite differences of `nu` in `alpha_t` and `E[alpha_T]`.
    pub bump: f64,
    /// Constant drifts for the comparison against dynamics where the position also grows at `alpha`.
    pub simplification_alphas: Vec<f64>,
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig {
            constant_alpha: 0.05,
            linear_start: 0.05,
            linear_end: 0.0,
            mean_reverting: MeanRevertingConfig::default(),
            bump: 1e-3,
            simplification_alphas: vec![0.01, 0.02, 0.05, 0.1],
        }
    }
}

/// Scripted drift `d alpha = speed (mean - alpha) dt + vol dB` on its own seed.
/// `cond_exp_table` lists `[t, w(t)]` with `E[alpha_T | F_t] = mean + w(t) (alpha_t - mean)`,
/// interpolated linearly; `null` uses `w(t) = exp(-speed (T - t))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeanRevertingConfig {
    pub alpha0: f64,
    pub mean: f64,
    pub speed: f64,
    pub vol: f64,
    pub cond_exp_table: Option<Vec<[f64; 2]>>,
}

impl Default for MeanRevertingConfig {
    fn default() -> Self {
        MeanRevertingConfig {
            alpha0: 0.05,
            mean: 0.0,
            speed: 0.2,
            vol: 0.01,
            cond_exp_table: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let cfg = match path {
            None => ExperimentConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
        };
        Ok(cfg)
    }

    /// Fill `null` defaults and check ranges.
    pub fn resolve(mut self) -> CliResult<Self> {
        if self.sweep.values.is_none() {
            self.sweep.values = Some(self.sweep.parameter.default_values());
        }
        if self.multi.terminal_penalty.is_none() {
            self.multi.terminal_penalty = Some(1e8 * self.model.lambda / self.model.horizon);
        }
        if self.multi.theta0.is_none() {
            self.multi.theta0 = Some(vec![self.model.theta0(); self.multi.sigmas.len()]);
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        self.model.params()?;
        if self.model.s0 <= 0.0 || !self.model.s0.is_finite() {
            return bad("model.s0 must be positive".into());
        }
        if self.grid.n_steps < 2 {
            return bad("grid.n_steps must be at least 2".into());
        }
        if self.monte_carlo.n_paths < 2 {
            return bad("monte_carlo.n_paths must be at least 2".into());
        }
        if self.paths.sigmas.is_empty() || self.paths.sigmas.iter().any(|&s| !(s > 0.0)) {
            return bad("paths.sigmas must be non-empty and positive".into());
        }
        let values = self.sweep.values.as_deref().unwrap_or_default();
        if values.len() < 2 || values.iter().any(|&v| !(v > 0.0)) {
            return bad("sweep.values needs at least two positive values".into());
        }
        if self.oracle.steps.is_empty() || self.oracle.steps.contains(&0) {
            return bad("oracle.steps must be non-empty and positive".into());
        }
        if self.oracle.tree_depth == 0 || self.oracle.tree_depth > 20 {
            return bad("oracle.tree_depth must be in 1..=20".into());
        }
        if self.multi.sigmas.is_empty() || self.multi.n_steps < 2 {
            return bad("multi.sigmas must be non-empty and multi.n_steps at least 2".into());
        }
        if self.multi.theta0.as_ref().map(Vec::len) != Some(self.multi.sigmas.len()) {
            return bad("multi.theta0 must have one entry per asset".into());
        }
        if let Some(table) = &self.drift.mean_reverting.cond_exp_table {
            if table.is_empty() || table.windows(2).any(|w| w[1][0] <= w[0][0]) {
                return bad("drift.mean_reverting.cond_exp_table needs increasing times".into());
            }
        }
        if self
            .drift
            .simplification_alphas
            .iter()
            .any(|a| !a.is_finite())
        {
            return bad("drift.simplification_alphas must be finite".into());
        }
        if !(self.drift.bump > 0.0) {
            return bad("drift.bump must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        let cfg: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"model": {"sigmaa": 0.3}}"#).is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"extra": 1}"#).is_err());
    }

    #[test]
    fn resolution_fills_defaults() {
        let cfg = ExperimentConfig::default().resolve().unwrap();
        assert_eq!(cfg.sweep.values, Some(vec![0.05, 0.2, 0.8]));
        assert_eq!(cfg.multi.terminal_penalty, Some(1e6));
        assert_eq!(cfg.multi.theta0, Some(vec![1e5, 1e5]));
        assert_eq!(cfg.model.theta0(), 1e5);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let mut cfg = ExperimentConfig::default();
        cfg.model.sigma = 0.0;
        assert!(matches!(cfg.resolve(), Err(CliError::Config(_))));
        let mut cfg = ExperimentConfig::default();
        cfg.sweep.values = Some(vec![0.1]);
        assert!(matches!(cfg.resolve(), Err(CliError::Config(_))));
    }
}
