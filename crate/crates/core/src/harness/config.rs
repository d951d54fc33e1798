use serde::{Deserialize, Serialize};

use crate::dist::{DistLiteral, StepDistribution, ValueDistribution};
use crate::error::{Error, Result};
use crate::learners::{BanditParams, FullFeedbackLearner};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Pacer given the true competing-bid law.
    KnownF,
    FullFeedback,
    Bandit,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Self::KnownF => "known_f",
            Self::FullFeedback => "full_feedback",
            Self::Bandit => "bandit",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scoring {
    /// Expected reward and payment under the true law.
    Expected,
    /// Realized coin flips; noisy, meant for demonstration plots.
    Realized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub competing: DistLiteral,
    #[serde(default = "default_values")]
    pub values: DistLiteral,
}

fn default_values() -> DistLiteral {
    DistLiteral::Uniform(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FullFeedbackConfig {
    /// Multiplies `ln(N)/√N`.
    pub epsilon_scale: f64,
    /// Law used before any competing bid is observed.
    pub prior: DistLiteral,
}

impl Default for FullFeedbackConfig {
    fn default() -> Self {
        Self {
            epsilon_scale: 1.0,
            prior: DistLiteral::Grid(101),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BanditConfig {
    /// `c` in `ε = √(c·ln T / (2M))`.
    pub epsilon_scale: f64,
    /// Grid count; `⌈T^{1/4}⌉` when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Rounds per grid point; `⌈√T⌉` when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Fixed optimism shift, overriding the formula.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl Default for BanditConfig {
    fn default() -> Self {
        Self {
            epsilon_scale: 1.0,
            k: None,
            m: None,
            epsilon: None,
        }
    }
}

impl BanditConfig {
    pub fn params_for(&self, horizon: usize) -> BanditParams {
        let auto = BanditParams::for_horizon(horizon, self.epsilon_scale);
        let k = self.k.unwrap_or(auto.k);
        let m = self.m.unwrap_or(auto.m);
        let epsilon = self
            .epsilon
            .unwrap_or_else(|| crate::learners::bandit_epsilon(horizon, m, self.epsilon_scale));
        BanditParams { k, m, epsilon }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub horizons: Vec<usize>,
    pub regret_slope_max: f64,
    pub violation_slope_max: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            horizons: vec![1 << 10, 1 << 12, 1 << 14, 1 << 16],
            regret_slope_max: 0.6,
            violation_slope_max: 0.65,
        }
    }
}

/// Everything needed to reproduce a run or a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub horizon: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_scoring")]
    pub scoring: Scoring,
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub full_feedback: FullFeedbackConfig,
    #[serde(default)]
    pub bandit: BanditConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn default_seeds() -> Vec<u64> {
    (1..=20).collect()
}

fn default_scoring() -> Scoring {
    Scoring::Expected
}

/// Distributions resolved from their literals.
#[derive(Clone, Debug, PartialEq)]
pub struct Environment {
    pub competing: StepDistribution,
    pub values: ValueDistribution,
}

impl ExperimentConfig {
    pub fn new(algorithm: Algorithm, horizon: usize, competing: DistLiteral) -> Self {
        Self {
            algorithm,
            horizon,
            seeds: default_seeds(),
            scoring: Scoring::Expected,
            environment: EnvironmentConfig {
                competing,
                values: default_values(),
            },
            full_feedback: FullFeedbackConfig::default(),
            bandit: BanditConfig::default(),
            sweep: SweepConfig::default(),
        }
    }

    pub fn with_horizon(&self, horizon: usize) -> Self {
        Self {
            horizon,
            ..self.clone()
        }
    }

    pub fn environment(&self) -> Result<Environment> {
        let competing = self
            .environment
            .competing
            .to_step()
            .map_err(|e| Error::Config(format!("environment.competing: {e}")))?;
        if !competing.is_proper() {
            return Err(Error::Config(
                "environment.competing: CDF must end at 1".into(),
            ));
        }
        let values = self
            .environment
            .values
            .to_value()
            .map_err(|e| Error::Config(format!("environment.values: {e}")))?;
        Ok(Environment { competing, values })
    }

    /// Checks the run-level fields for `self.horizon`.
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon: must be at least 1".into()));
        }
        self.environment()?;
        match self.algorithm {
            Algorithm::KnownF => {}
            Algorithm::FullFeedback => {
                let prior = self
                    .full_feedback
                    .prior
                    .to_step()
                    .map_err(|e| Error::Config(format!("full_feedback.prior: {e}")))?;
                FullFeedbackLearner::new(self.horizon, prior, self.full_feedback.epsilon_scale)
                    .map_err(|e| Error::Config(format!("full_feedback: {}", inner(&e))))?;
            }
            Algorithm::Bandit => {
                self.bandit
                    .params_for(self.horizon)
                    .validate(self.horizon)
                    .map_err(|e| {
                        Error::Config(format!("bandit (horizon {}): {}", self.horizon, inner(&e)))
                    })?;
            }
        }
        Ok(())
    }

    /// Checks the sweep block; every horizon must be runnable.
    pub fn validate_sweep(&self) -> Result<()> {
        if self.sweep.horizons.len() < 3 {
            return Err(Error::Config(format!(
                "sweep.horizons: need at least 3 horizons to fit a slope, got {}",
                self.sweep.horizons.len()
            )));
        }
        if self.seeds.len() < 5 {
            return Err(Error::Config(format!(
                "seeds: a sweep needs at least 5 seeds, got {}",
                self.seeds.len()
            )));
        }
        for &t in &self.sweep.horizons {
            self.with_horizon(t).validate()?;
        }
        Ok(())
    }
}

/// Message of a nested error without a repeated `invalid configuration` prefix.
fn inner(e: &Error) -> String {
    match e {
        Error::Config(msg) => msg.clone(),
        other => other.to_string(),
    }
}

/// Hyperparameters actually used by a run, written next to every result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub algorithm: Algorithm,
    pub horizon: usize,
    /// Step size of the (first) pacer.
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandit: Option<BanditParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_feedback_epsilon_scale: Option<f64>,
}

impl ResolvedParams {
    pub fn of(config: &ExperimentConfig) -> Self {
        let t = config.horizon;
        match config.algorithm {
            Algorithm::KnownF => Self {
                algorithm: config.algorithm,
                horizon: t,
                alpha: 1.0 / (t as f64).sqrt(),
                bandit: None,
                full_feedback_epsilon_scale: None,
            },
            Algorithm::FullFeedback => Self {
                algorithm: config.algorithm,
                horizon: t,
                alpha: 1.0,
                bandit: None,
                full_feedback_epsilon_scale: Some(config.full_feedback.epsilon_scale),
            },
            Algorithm::Bandit => {
                let p = config.bandit.params_for(t);
                let exploit = t.saturating_sub(p.exploration_rounds()).max(1);
                Self {
                    algorithm: config.algorithm,
                    horizon: t,
                    alpha: 1.0 / (exploit as f64).sqrt(),
                    bandit: Some(p),
                    full_feedback_epsilon_scale: None,
                }
            }
        }
    }
}
