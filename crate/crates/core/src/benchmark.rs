//! Hindsight-optimal benchmark and the regret / ROI-violation metrics.
//!
//! The best randomized strategy for a known law and a realized value sequence
//! solves
//!
//! ```text
//! max Σ v_t·Ĝ(x_t)   s.t.   Σ x_t ≤ Σ v_t·Ĝ(x_t),   x_t ∈ [0, 1]
//! ```
//!
//! where `Ĝ` is the concave hull of the allocation–payment curve (including
//! the chord to the origin, i.e. mixing with a losing bid). With multiplier
//! `μ` the Lagrangian separates per round into the same vertex rule the pacer
//! uses, with threshold `κ / v_t` for `κ = μ/(1+μ)`. The ROI slack is
//! non-decreasing in `κ`, so the critical `κ` is found by bisection and the
//! tied rounds are then moved along their segments to make the constraint bind.

use serde::{Deserialize, Serialize};

use crate::dist::StepDistribution;
use crate::envelope::{ConcaveEnvelope, CurvePoint};
use crate::error::{check_unit, Error, Result};

const BISECTION_WIDTH: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HindsightSolution {
    pub opt_reward: f64,
    pub opt_payment: f64,
    /// Critical ROI multiplier; zero when the unconstrained optimum is feasible.
    pub lambda_star: f64,
    pub per_round_payments: Vec<f64>,
    pub per_round_wins: Vec<f64>,
}

impl HindsightSolution {
    pub fn horizon(&self) -> usize {
        self.per_round_payments.len()
    }
}

fn round_point(env: &ConcaveEnvelope, v: f64, kappa: f64) -> CurvePoint {
    if v <= 0.0 {
        return env.tangent_point(f64::INFINITY);
    }
    env.tangent_point(kappa / v)
}

/// `Σ v_t·y_t − x_t` for the per-round Lagrangian choices at `κ`.
pub fn roi_slack(env: &ConcaveEnvelope, values: &[f64], kappa: f64) -> f64 {
    values
        .iter()
        .map(|&v| {
            let p = round_point(env, v, kappa);
            v * p.y - p.x
        })
        .sum()
}

pub fn hindsight_optimal(dist: &StepDistribution, values: &[f64]) -> Result<HindsightSolution> {
    if values.is_empty() {
        return Err(Error::Precondition(
            "hindsight benchmark needs at least one round".into(),
        ));
    }
    for &v in values {
        check_unit("value", v)?;
    }
    let env = ConcaveEnvelope::of(dist)?;
    let points_at = |kappa: f64| -> Vec<CurvePoint> {
        values
            .iter()
            .map(|&v| round_point(&env, v, kappa))
            .collect()
    };
    let slack_of =
        |pts: &[CurvePoint]| -> f64 { pts.iter().zip(values).map(|(p, &v)| v * p.y - p.x).sum() };

    let free = points_at(0.0);
    if slack_of(&free) >= 0.0 {
        return Ok(assemble(&free, &free, 0.0, values, 0.0));
    }

    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        if roi_slack(&env, values, mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let at_hi = points_at(hi);
    let at_lo = points_at(lo);
    let slack_hi = slack_of(&at_hi);
    let slack_lo = slack_of(&at_lo);
    debug_assert!(slack_hi >= 0.0 && slack_lo < 0.0);
    // Both endpoint solutions maximize the Lagrangian at κ*; mixing them with
    // weight f on the low side makes the slack exactly zero.
    let f = if slack_hi > slack_lo {
        slack_hi / (slack_hi - slack_lo)
    } else {
        0.0
    };
    let lambda_star = if hi < 1.0 {
        hi / (1.0 - hi)
    } else {
        f64::INFINITY
    };
    Ok(assemble(&at_hi, &at_lo, f, values, lambda_star))
}

fn assemble(
    base: &[CurvePoint],
    toward: &[CurvePoint],
    f: f64,
    values: &[f64],
    lambda_star: f64,
) -> HindsightSolution {
    let mut per_round_payments = Vec::with_capacity(values.len());
    let mut per_round_wins = Vec::with_capacity(values.len());
    let (mut reward, mut payment) = (0.0, 0.0);
    for ((a, b), &v) in base.iter().zip(toward).zip(values) {
        let x = a.x + f * (b.x - a.x);
        let y = a.y + f * (b.y - a.y);
        reward += v * y;
        payment += x;
        per_round_payments.push(x);
        per_round_wins.push(y);
    }
    HindsightSolution {
        opt_reward: reward,
        opt_payment: payment,
        lambda_star,
        per_round_payments,
        per_round_wins,
    }
}

/// Largest instance the exhaustive oracle accepts.
pub const BRUTE_FORCE_MAX_ROUNDS: usize = 4;
pub const BRUTE_FORCE_MAX_GRID: usize = 201;

/// Exhaustive search over per-round lotteries mixing two bids from
/// `{0} ∪ support` with probabilities on a `grid_n`-point grid.
pub fn brute_force_optimal(dist: &StepDistribution, values: &[f64], grid_n: usize) -> Result<f64> {
    if values.is_empty() || values.len() > BRUTE_FORCE_MAX_ROUNDS {
        return Err(Error::Precondition(format!(
            "brute force handles 1..={BRUTE_FORCE_MAX_ROUNDS} rounds, got {}",
            values.len()
        )));
    }
    if !(2..=BRUTE_FORCE_MAX_GRID).contains(&grid_n) {
        return Err(Error::Precondition(format!(
            "brute force grid must have 2..={BRUTE_FORCE_MAX_GRID} points, got {grid_n}"
        )));
    }
    for &v in values {
        check_unit("value", v)?;
    }
    let options = lottery_options(dist, grid_n);
    let (head, last) = values.split_at(values.len() - 1);
    let table = LastRound::new(&options, last[0]);
    let mut best = f64::NEG_INFINITY;
    search(&options, head, 0.0, 0.0, &table, &mut best);
    Ok(best)
}

/// Pareto-undominated `(payment, win)` pairs reachable by two-bid mixtures.
fn lottery_options(dist: &StepDistribution, grid_n: usize) -> Vec<(f64, f64)> {
    let mut bids = vec![0.0];
    bids.extend(dist.support().iter().copied().filter(|&b| b > 0.0));
    let pts: Vec<(f64, f64)> = bids
        .iter()
        .map(|&b| (b * dist.eval(b), dist.eval(b)))
        .collect();
    let mut all = Vec::new();
    for i in 0..pts.len() {
        all.push(pts[i]);
        for j in i + 1..pts.len() {
            for k in 1..grid_n - 1 {
                let q = k as f64 / (grid_n - 1) as f64;
                all.push((
                    (1.0 - q) * pts[i].0 + q * pts[j].0,
                    (1.0 - q) * pts[i].1 + q * pts[j].1,
                ));
            }
        }
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    let mut front: Vec<(f64, f64)> = Vec::new();
    for p in all {
        if front.last().is_none_or(|l| p.1 > l.1) {
            front.push(p);
        }
    }
    front
}

/// Best last-round reward given the slack accumulated so far.
struct LastRound {
    keys: Vec<f64>,
    best_win: Vec<f64>,
    value: f64,
}

impl LastRound {
    fn new(options: &[(f64, f64)], value: f64) -> Self {
        let mut keyed: Vec<(f64, f64)> = options.iter().map(|&(x, y)| (value * y - x, y)).collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut best = f64::NEG_INFINITY;
        let best_win = keyed
            .iter()
            .map(|&(_, y)| {
                best = best.max(y);
                best
            })
            .collect();
        Self {
            keys: keyed.iter().map(|k| k.0).collect(),
            best_win,
            value,
        }
    }

    fn best(&self, slack: f64) -> Option<f64> {
        let n = self.keys.partition_point(|&k| k + slack >= -1e-12);
        (n > 0).then(|| self.value * self.best_win[n - 1])
    }
}

fn search(
    options: &[(f64, f64)],
    values: &[f64],
    reward: f64,
    slack: f64,
    last: &LastRound,
    best: &mut f64,
) {
    match values.split_first() {
        None => {
            if let Some(r) = last.best(slack) {
                *best = best.max(reward + r);
            }
        }
        Some((&v, rest)) => {
            for &(x, y) in options {
                search(options, rest, reward + v * y, slack + v * y - x, last, best);
            }
        }
    }
}

/// Expected (or realized) reward and payment of one round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub reward: f64,
    pub payment: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub reward: f64,
    pub payment: f64,
    pub regret: f64,
    /// `payment − reward`; negative when the ROI constraint has slack.
    pub roi_violation: f64,
    pub roi_violation_positive: f64,
}

pub fn score_episode(opt: &HindsightSolution, logs: &[RoundOutcome]) -> Result<Metrics> {
    if logs.is_empty() {
        return Err(Error::Precondition("cannot score an empty episode".into()));
    }
    if logs.len() != opt.horizon() {
        return Err(Error::Protocol(format!(
            "episode has {} rounds but the benchmark covers {}",
            logs.len(),
            opt.horizon()
        )));
    }
    let reward: f64 = logs.iter().map(|r| r.reward).sum();
    let payment: f64 = logs.iter().map(|r| r.payment).sum();
    let roi_violation = payment - reward;
    Ok(Metrics {
        reward,
        payment,
        regret: opt.opt_reward - reward,
        roi_violation,
        roi_violation_positive: roi_violation.max(0.0),
    })
}
