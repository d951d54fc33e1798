use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_episode, Algorithm, ExperimentConfig, RoundLog};
use crate::benchmark::Metrics;
use crate::error::{Error, Result};

/// Values at or below zero are replaced by this before taking logs.
pub const FIT_FLOOR: f64 = 1e-6;

/// Per-round sanity checks folded over an episode's log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundChecks {
    /// Rounds in which a pacer made the decision.
    pub pacer_rounds: usize,
    /// Smallest multiplier seen; `None` when no pacer round happened.
    pub min_lambda: Option<f64>,
    /// Rounds where `g` left `[max(−1, −1/λ), v·F_conv(b̃)]` by more than 1e-12.
    pub g_bound_violations: usize,
}

impl RoundChecks {
    pub fn of(rounds: &[RoundLog]) -> Self {
        let mut checks = Self {
            pacer_rounds: 0,
            min_lambda: None,
            g_bound_violations: 0,
        };
        for r in rounds {
            let (Some(lambda), Some(g), Some(y)) = (r.lambda, r.g, r.model_win) else {
                continue;
            };
            checks.pacer_rounds += 1;
            checks.min_lambda = Some(checks.min_lambda.map_or(lambda, |m: f64| m.min(lambda)));
            let lower = (-1.0f64).max(-1.0 / lambda) - 1e-12;
            let upper = r.value * y + 1e-12;
            if !(lambda > 0.0 && g >= lower && g <= upper) {
                checks.g_bound_violations += 1;
            }
        }
        checks
    }

    pub fn all_hold(&self) -> bool {
        self.g_bound_violations == 0 && self.min_lambda.is_none_or(|l| l > 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub seed: u64,
    pub metrics: Metrics,
    pub checks: RoundChecks,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonStats {
    pub horizon: usize,
    pub n_seeds: usize,
    pub mean_regret: f64,
    pub stderr_regret: f64,
    /// Mean of `payment − reward`, sign included.
    pub mean_violation: f64,
    pub stderr_violation: f64,
    /// Mean of `max(payment − reward, 0)`; this is what the violation slope fits.
    pub mean_violation_positive: f64,
    pub stderr_violation_positive: f64,
    pub mean_reward: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// Indices of input points that were floored before the fit.
    pub floored: Vec<usize>,
}

/// Ordinary least squares of `ln(value)` on `ln(T)`.
pub fn fit_scaling_exponent(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::Precondition(format!(
            "a scaling fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    let mut floored = Vec::new();
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for (i, &(t, v)) in points.iter().enumerate() {
        if !(t > 0.0) || !t.is_finite() || !v.is_finite() {
            return Err(Error::Precondition(format!(
                "scaling fit point {i} = ({t}, {v}) is not usable"
            )));
        }
        let v = if v <= 0.0 {
            floored.push(i);
            FIT_FLOOR
        } else {
            v.max(FIT_FLOOR)
        };
        xs.push(t.ln());
        ys.push(v.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Precondition(
            "scaling fit needs at least two distinct horizons".into(),
        ));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(ScalingFit {
        slope,
        intercept: my - slope * mx,
        floored,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub algorithm: Algorithm,
    pub horizons: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Sorted by `(horizon, seed)`.
    pub episodes: Vec<EpisodeSummary>,
    pub per_horizon: Vec<HorizonStats>,
    pub regret_fit: ScalingFit,
    pub violation_fit: ScalingFit,
}

impl SweepResult {
    pub fn all_checks_hold(&self) -> bool {
        self.episodes.iter().all(|e| e.checks.all_hold())
    }
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn horizon_stats(horizon: usize, eps: &[&EpisodeSummary]) -> HorizonStats {
    let pick = |f: fn(&Metrics) -> f64| eps.iter().map(|e| f(&e.metrics)).collect::<Vec<_>>();
    let (mean_regret, stderr_regret) = mean_stderr(&pick(|m| m.regret));
    let (mean_violation, stderr_violation) = mean_stderr(&pick(|m| m.roi_violation));
    let (mean_violation_positive, stderr_violation_positive) =
        mean_stderr(&pick(|m| m.roi_violation_positive));
    HorizonStats {
        horizon,
        n_seeds: eps.len(),
        mean_regret,
        stderr_regret,
        mean_violation,
        stderr_violation,
        mean_violation_positive,
        stderr_violation_positive,
        mean_reward: mean_stderr(&pick(|m| m.reward)).0,
    }
}

/// Runs every `(T, seed)` pair of `config.sweep.horizons × config.seeds`.
///
/// Episodes run on rayon's pool; `threads` builds a dedicated pool of that
/// size. Results do not depend on the thread count.
pub fn run_sweep(config: &ExperimentConfig, threads: Option<usize>) -> Result<SweepResult> {
    config.validate_sweep()?;
    let jobs: Vec<(usize, u64)> = config
        .sweep
        .horizons
        .iter()
        .flat_map(|&t| config.seeds.iter().map(move |&s| (t, s)))
        .collect();
    let run_all = || -> Result<Vec<EpisodeSummary>> {
        jobs.par_iter()
            .map(|&(t, seed)| {
                run_episode(&config.with_horizon(t), seed)
                    .map(|r| r.summary())
                    .map_err(|e| Error::Sweep {
                        horizon: t,
                        seed,
                        source: Box::new(e),
                    })
            })
            .collect()
    };
    let mut episodes = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("threads: {e}")))?
            .install(run_all)?,
        None => run_all()?,
    };
    episodes.sort_by_key(|e| (e.horizon, e.seed));

    let mut horizons = config.sweep.horizons.clone();
    horizons.sort_unstable();
    horizons.dedup();
    let per_horizon: Vec<HorizonStats> = horizons
        .iter()
        .map(|&t| {
            let eps: Vec<&EpisodeSummary> = episodes.iter().filter(|e| e.horizon == t).collect();
            horizon_stats(t, &eps)
        })
        .collect();
    let regret_fit = fit_scaling_exponent(
        &per_horizon
            .iter()
            .map(|h| (h.horizon as f64, h.mean_regret))
            .collect::<Vec<_>>(),
    )?;
    let violation_fit = fit_scaling_exponent(
        &per_horizon
            .iter()
            .map(|h| (h.horizon as f64, h.mean_violation_positive))
            .collect::<Vec<_>>(),
    )?;
    Ok(SweepResult {
        algorithm: config.algorithm,
        horizons,
        seeds: config.seeds.clone(),
        episodes,
        per_horizon,
        regret_fit,
        violation_fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DistLiteral;

    #[test]
    fn fit_examples() {
        let ts = [100.0, 400.0, 1600.0, 6400.0];
        let sqrt: Vec<_> = ts.iter().map(|&t: &f64| (t, t.sqrt())).collect();
        assert!((fit_scaling_exponent(&sqrt).unwrap().slope - 0.5).abs() < 1e-9);
        let p34: Vec<_> = ts.iter().map(|&t: &f64| (t, t.powf(0.75))).collect();
        assert!((fit_scaling_exponent(&p34).unwrap().slope - 0.75).abs() < 1e-9);
        let fit = fit_scaling_exponent(&[(100.0, 10.0), (400.0, 20.0), (1600.0, 40.0)]).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-12);
        assert!(fit.floored.is_empty());
    }

    #[test]
    fn fit_floors_and_rejects() {
        let fit = fit_scaling_exponent(&[(10.0, 0.0), (100.0, -3.0), (1000.0, 1e-6)]).unwrap();
        assert_eq!(fit.floored, vec![0, 1]);
        assert!(fit.slope.abs() < 1e-12);
        assert!(fit_scaling_exponent(&[(10.0, 1.0), (100.0, 2.0)]).is_err());
    }

    fn small_sweep(algorithm: Algorithm, competing: &str) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(algorithm, 64, competing.parse().unwrap());
        c.seeds = (1..=5).collect();
        c.sweep.horizons = vec![64, 128, 256];
        c
    }

    #[test]
    fn free_wins_have_no_regret() {
        let r = run_sweep(&small_sweep(Algorithm::KnownF, "[(0.0, 1.0)]"), Some(2)).unwrap();
        assert_eq!(r.episodes.len(), 15);
        for h in &r.per_horizon {
            assert!(h.mean_regret.abs() < 1e-9, "{h:?}");
        }
        assert!(r.all_checks_hold());
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let c = small_sweep(
            Algorithm::FullFeedback,
            "[(0.0, 0.5), (0.6, 0.7), (1.0, 1.0)]",
        );
        let a = run_sweep(&c, Some(1)).unwrap();
        let b = run_sweep(&c, Some(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_preconditions() {
        let mut c = small_sweep(Algorithm::KnownF, "[(0.0, 1.0)]");
        c.seeds = vec![1, 2];
        assert!(run_sweep(&c, None).is_err());
        let mut c = small_sweep(Algorithm::Bandit, "[(0.0, 1.0)]");
        c.environment.values = DistLiteral::PointMass(0.5);
        c.sweep.horizons = vec![16, 4096, 8192];
        c.bandit.k = Some(4);
        c.bandit.m = Some(4);
        let err = run_sweep(&c, None).unwrap_err().to_string();
        assert!(err.contains("16"), "{err}");
    }
}
