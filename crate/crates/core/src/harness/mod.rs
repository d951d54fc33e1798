//! Episode simulation plus multi-seed sweeps over horizons.
//!
//! Each episode seeds ChaCha8 from its seed and splits it into separate
//! streams (see the `*_STREAM` constants). Within a round the value is drawn
//! first, then the lottery draw, then the competing bid. Because the bidder
//! has its own stream, algorithm choice never shifts the environment's draws.

mod config;
mod output;
mod sweep;

pub use config::{
    Algorithm, BanditConfig, Environment, EnvironmentConfig, ExperimentConfig, FullFeedbackConfig,
    ResolvedParams, Scoring, SweepConfig,
};
pub use output::{regret_vs_t_csv, sweep_csv, trajectory_csv, SlopesReport, SWEEP_CSV_HEADER};
pub use sweep::{
    fit_scaling_exponent, run_sweep, EpisodeSummary, HorizonStats, RoundChecks, ScalingFit,
    SweepResult,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::benchmark::{
    hindsight_optimal, score_episode, HindsightSolution, Metrics, RoundOutcome,
};
use crate::envelope::RandomizedBid;
use crate::error::{Error, Result};
use crate::learners::{
    BanditLearner, Bidder, Feedback, FeedbackKind, FullFeedbackLearner, ModelPacer,
};

const VALUE_STREAM: u64 = 1;
const BID_STREAM: u64 = 2;
const LOTTERY_STREAM: u64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub t: usize,
    pub value: f64,
    pub lottery: RandomizedBid,
    pub bid: f64,
    pub competing: f64,
    pub won: bool,
    pub expected_reward: f64,
    pub expected_payment: f64,
    pub feedback: Feedback,
    /// Multiplier used this round; `None` while the bandit learner explores.
    pub lambda: Option<f64>,
    pub g: Option<f64>,
    pub tilde_b: Option<f64>,
    /// `F_conv(b̃)` under the bidder's model.
    pub model_win: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: usize,
    pub cum_reward: f64,
    pub cum_payment: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub seed: u64,
    pub scoring: Scoring,
    pub params: ResolvedParams,
    pub opt_reward: f64,
    pub opt_payment: f64,
    pub lambda_star: f64,
    pub metrics: Metrics,
    pub trajectory: Vec<TrajectoryPoint>,
    pub rounds: Vec<RoundLog>,
}

impl EpisodeResult {
    pub fn summary(&self) -> EpisodeSummary {
        EpisodeSummary {
            algorithm: self.algorithm,
            horizon: self.horizon,
            seed: self.seed,
            metrics: self.metrics,
            checks: RoundChecks::of(&self.rounds),
        }
    }
}

/// Builds the bidder a config asks for.
pub fn make_bidder(config: &ExperimentConfig, env: &Environment) -> Result<Box<dyn Bidder>> {
    let t = config.horizon;
    Ok(match config.algorithm {
        Algorithm::KnownF => Box::new(ModelPacer::new(env.competing.clone(), t)?),
        Algorithm::FullFeedback => {
            let prior = config.full_feedback.prior.to_step()?;
            Box::new(FullFeedbackLearner::new(
                t,
                prior,
                config.full_feedback.epsilon_scale,
            )?)
        }
        Algorithm::Bandit => Box::new(BanditLearner::new(t, config.bandit.params_for(t))?),
    })
}

/// Runs one seeded episode of `config`.
pub fn run_episode(config: &ExperimentConfig, seed: u64) -> Result<EpisodeResult> {
    config.validate()?;
    let env = config.environment()?;
    let mut bidder = make_bidder(config, &env)?;
    let mut result = run_with_bidder(&env, bidder.as_mut(), config.horizon, seed, config.scoring)?;
    result.algorithm = config.algorithm;
    result.params = ResolvedParams::of(config);
    Ok(result)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Episode loop against an arbitrary bidder. `algorithm` and `params` in the
/// result describe a known-F pacer until the caller overwrites them.
pub fn run_with_bidder(
    env: &Environment,
    bidder: &mut dyn Bidder,
    horizon: usize,
    seed: u64,
    scoring: Scoring,
) -> Result<EpisodeResult> {
    if horizon == 0 {
        return Err(Error::Config("horizon: must be at least 1".into()));
    }
    let mut value_rng = stream(seed, VALUE_STREAM);
    let mut bid_rng = stream(seed, BID_STREAM);
    let mut lottery_rng = stream(seed, LOTTERY_STREAM);
    let f = &env.competing;
    let kind = bidder.feedback_kind();

    let mut rounds = Vec::with_capacity(horizon);
    let mut values = Vec::with_capacity(horizon);
    let mut outcomes = Vec::with_capacity(horizon);
    let mut trajectory = Vec::with_capacity(horizon);
    let (mut cum_reward, mut cum_payment) = (0.0, 0.0);
    let mut last_lambda = 1.0;

    for t in 1..=horizon {
        let at = |source: Error| Error::Round {
            round: t,
            source: Box::new(source),
        };
        let v = env.values.sample(&mut value_rng);
        let plan = bidder.bid(v).map_err(at)?;
        let bid = plan.lottery.realize(lottery_rng.gen());
        let d = f.sample(&mut bid_rng);
        let won = bid >= d;
        let feedback = match kind {
            FeedbackKind::None => Feedback::None,
            FeedbackKind::Full => Feedback::Full { d },
            FeedbackKind::Bandit => Feedback::Bandit { won },
        };
        bidder.observe(feedback).map_err(at)?;

        let expected_reward = v * plan.lottery.win_probability(f);
        let expected_payment = plan.lottery.expected_payment(f);
        let outcome = match scoring {
            Scoring::Expected => RoundOutcome {
                reward: expected_reward,
                payment: expected_payment,
            },
            Scoring::Realized => RoundOutcome {
                reward: if won { v } else { 0.0 },
                payment: if won { bid } else { 0.0 },
            },
        };
        cum_reward += outcome.reward;
        cum_payment += outcome.payment;
        if let Some(p) = &plan.pacer {
            last_lambda = p.lambda;
        }
        trajectory.push(TrajectoryPoint {
            t,
            cum_reward,
            cum_payment,
            lambda: last_lambda,
        });
        rounds.push(RoundLog {
            t,
            value: v,
            lottery: plan.lottery,
            bid,
            competing: d,
            won,
            expected_reward,
            expected_payment,
            feedback,
            lambda: plan.pacer.map(|p| p.lambda),
            g: plan.pacer.map(|p| p.g),
            tilde_b: plan.pacer.map(|p| p.tilde_b),
            model_win: plan.pacer.map(|p| p.y_target),
        });
        values.push(v);
        outcomes.push(outcome);
    }

    let opt: HindsightSolution = hindsight_optimal(f, &values)?;
    let metrics = score_episode(&opt, &outcomes)?;
    Ok(EpisodeResult {
        algorithm: Algorithm::KnownF,
        horizon,
        seed,
        scoring,
        params: ResolvedParams {
            algorithm: Algorithm::KnownF,
            horizon,
            alpha: 1.0 / (horizon as f64).sqrt(),
            bandit: None,
            full_feedback_epsilon_scale: None,
        },
        opt_reward: opt.opt_reward,
        opt_payment: opt.opt_payment,
        lambda_star: opt.lambda_star,
        metrics,
        trajectory,
        rounds,
    })
}
