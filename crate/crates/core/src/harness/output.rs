//! Flat CSV views and the slopes summary written next to sweep results.
//!
//! Floats use Rust's shortest round-trip formatting so files are
//! byte-for-byte reproducible.

use serde::{Deserialize, Serialize};

use super::{Algorithm, EpisodeResult, SweepResult};
use crate::error::{Error, Result};

pub const SWEEP_CSV_HEADER: [&str; 7] = [
    "algorithm",
    "T",
    "seed",
    "reward",
    "payment",
    "regret",
    "roi_violation",
];

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Precondition(format!("csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Precondition(format!("csv utf-8: {e}")))
}

fn rows<I, R>(header: &[&str], records: I) -> Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = writer();
    let err = |e: csv::Error| Error::Precondition(format!("csv write: {e}"));
    w.write_record(header).map_err(err)?;
    for r in records {
        w.write_record(r.into_iter().collect::<Vec<_>>())
            .map_err(err)?;
    }
    finish(w)
}

/// `t, cum_reward, cum_payment, lambda`, one row per round.
pub fn trajectory_csv(result: &EpisodeResult) -> Result<String> {
    rows(
        &["t", "cum_reward", "cum_payment", "lambda"],
        result.trajectory.iter().map(|p| {
            [
                p.t.to_string(),
                p.cum_reward.to_string(),
                p.cum_payment.to_string(),
                p.lambda.to_string(),
            ]
        }),
    )
}

/// One row per `(T, seed)` episode.
pub fn sweep_csv(sweep: &SweepResult) -> Result<String> {
    rows(
        &SWEEP_CSV_HEADER,
        sweep.episodes.iter().map(|e| {
            [
                e.algorithm.name().to_string(),
                e.horizon.to_string(),
                e.seed.to_string(),
                e.metrics.reward.to_string(),
                e.metrics.payment.to_string(),
                e.metrics.regret.to_string(),
                e.metrics.roi_violation.to_string(),
            ]
        }),
    )
}

/// Per-horizon means and standard errors for plotting.
pub fn regret_vs_t_csv(sweep: &SweepResult) -> Result<String> {
    rows(
        &[
            "T",
            "mean_regret",
            "stderr_regret",
            "mean_violation",
            "stderr_violation",
            "mean_violation_positive",
            "stderr_violation_positive",
            "n_seeds",
        ],
        sweep.per_horizon.iter().map(|h| {
            [
                h.horizon.to_string(),
                h.mean_regret.to_string(),
                h.stderr_regret.to_string(),
                h.mean_violation.to_string(),
                h.stderr_violation.to_string(),
                h.mean_violation_positive.to_string(),
                h.stderr_violation_positive.to_string(),
                h.n_seeds.to_string(),
            ]
        }),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopesReport {
    pub algorithm: Algorithm,
    pub regret_slope: f64,
    pub violation_slope: f64,
    pub horizons: Vec<usize>,
    pub n_seeds: usize,
    pub regret_intercept: f64,
    pub violation_intercept: f64,
    /// Horizons whose mean was floored before the fit.
    pub regret_floored: Vec<usize>,
    pub violation_floored: Vec<usize>,
}

impl SlopesReport {
    pub fn of(sweep: &SweepResult) -> Self {
        let at = |idx: &[usize]| idx.iter().map(|&i| sweep.per_horizon[i].horizon).collect();
        Self {
            algorithm: sweep.algorithm,
            regret_slope: sweep.regret_fit.slope,
            violation_slope: sweep.violation_fit.slope,
            horizons: sweep.horizons.clone(),
            n_seeds: sweep.seeds.len(),
            regret_intercept: sweep.regret_fit.intercept,
            violation_intercept: sweep.violation_fit.intercept,
            regret_floored: at(&sweep.regret_fit.floored),
            violation_floored: at(&sweep.violation_fit.floored),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_episode, run_sweep, ExperimentConfig};

    #[test]
    fn csv_shapes() {
        let mut c = ExperimentConfig::new(
            Algorithm::KnownF,
            50,
            "[(0.0, 0.5), (1.0, 1.0)]".parse().unwrap(),
        );
        let ep = run_episode(&c, 1).unwrap();
        let traj = trajectory_csv(&ep).unwrap();
        assert!(traj.starts_with("t,cum_reward,cum_payment,lambda\n1,"));
        assert_eq!(traj.lines().count(), 51);
        assert!(!traj.contains('\r'));

        c.seeds = (1..=5).collect();
        c.sweep.horizons = vec![20, 40, 80];
        let s = run_sweep(&c, Some(1)).unwrap();
        let table = sweep_csv(&s).unwrap();
        assert_eq!(table.lines().count(), 16);
        assert_eq!(
            table.lines().next().unwrap(),
            "algorithm,T,seed,reward,payment,regret,roi_violation"
        );
        assert_eq!(regret_vs_t_csv(&s).unwrap().lines().count(), 4);
        let slopes = serde_json::to_value(SlopesReport::of(&s)).unwrap();
        for key in [
            "algorithm",
            "regret_slope",
            "violation_slope",
            "horizons",
            "n_seeds",
        ] {
            assert!(slopes.get(key).is_some(), "{key}");
        }
    }
}
