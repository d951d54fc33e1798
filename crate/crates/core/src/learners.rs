//! Online bidders driven by the harness through an emit → observe protocol.
//!
//! * [`ModelPacer`]: the pacer run against a fixed law (the true one for the
//!   known-distribution setting).
//! * [`FullFeedbackLearner`]: doubling stages. Each stage runs a fresh pacer on
//!   the empirical law of all competing bids seen so far, shifted up by `ε`.
//! * [`BanditLearner`]: explore a `K`-point bid grid for `M` rounds per point,
//!   then run the pacer on the conservatively shifted estimate and bid one grid
//!   step higher than it asks.

use serde::{Deserialize, Serialize};

use crate::dist::{
    bandit_empirical_cdf, conservative_shift_cdf, empirical_cdf, optimistic_cdf, shift_up_on_grid,
    BanditBlockOutcomes, StepDistribution,
};
use crate::envelope::RandomizedBid;
use crate::error::{Error, Result};
use crate::pacing::{Pacer, PacerDecision};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackKind {
    /// The bidder ignores feedback.
    None,
    Full,
    Bandit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    None,
    Full { d: f64 },
    Bandit { won: bool },
}

impl Feedback {
    pub fn kind(&self) -> FeedbackKind {
        match self {
            Self::None => FeedbackKind::None,
            Self::Full { .. } => FeedbackKind::Full,
            Self::Bandit { .. } => FeedbackKind::Bandit,
        }
    }
}

/// What a bidder submits for one round.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BidPlan {
    /// Lottery over the bids actually submitted.
    pub lottery: RandomizedBid,
    /// The pacer's decision, absent during bandit exploration.
    pub pacer: Option<PacerDecision>,
}

pub trait Bidder {
    fn feedback_kind(&self) -> FeedbackKind;

    fn bid(&mut self, value: f64) -> Result<BidPlan>;

    fn observe(&mut self, feedback: Feedback) -> Result<()>;
}

/// Tracks the strict bid/observe alternation shared by every bidder.
#[derive(Clone, Copy, Debug, Default)]
struct Turn {
    awaiting_feedback: bool,
    rounds: usize,
}

impl Turn {
    fn begin(&mut self, horizon: usize) -> Result<()> {
        if self.awaiting_feedback {
            return Err(Error::Protocol(format!(
                "bid requested in round {} before feedback for the previous bid",
                self.rounds + 1
            )));
        }
        if self.rounds >= horizon {
            return Err(Error::EpisodeExhausted {
                round: self.rounds + 1,
                horizon,
            });
        }
        self.awaiting_feedback = true;
        Ok(())
    }

    fn end(&mut self, feedback: &Feedback, expected: FeedbackKind) -> Result<()> {
        if !self.awaiting_feedback {
            return Err(Error::Protocol(format!(
                "feedback delivered in round {} without an outstanding bid",
                self.rounds + 1
            )));
        }
        if expected != FeedbackKind::None && feedback.kind() != expected {
            return Err(Error::Protocol(format!(
                "expected {expected:?} feedback, got {:?}",
                feedback.kind()
            )));
        }
        self.awaiting_feedback = false;
        self.rounds += 1;
        Ok(())
    }
}

/// Pacer running on a fixed model law for the whole horizon.
#[derive(Clone, Debug)]
pub struct ModelPacer {
    pacer: Pacer,
    turn: Turn,
}

impl ModelPacer {
    pub fn new(model: StepDistribution, horizon: usize) -> Result<Self> {
        Ok(Self {
            pacer: Pacer::new(model, horizon)?,
            turn: Turn::default(),
        })
    }

    pub fn pacer(&self) -> &Pacer {
        &self.pacer
    }
}

impl Bidder for ModelPacer {
    fn feedback_kind(&self) -> FeedbackKind {
        FeedbackKind::None
    }

    fn bid(&mut self, value: f64) -> Result<BidPlan> {
        self.turn.begin(self.pacer.state().horizon)?;
        let decision = self.pacer.step(value)?;
        Ok(BidPlan {
            lottery: decision.lottery,
            pacer: Some(decision),
        })
    }

    fn observe(&mut self, feedback: Feedback) -> Result<()> {
        self.turn.end(&feedback, FeedbackKind::None)
    }
}

/// Stage lengths `1, 2, 4, …`, the last one truncated so they sum to `horizon`.
pub fn stage_lengths(horizon: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut remaining = horizon;
    let mut len = 1usize;
    while remaining > 0 {
        let l = len.min(remaining);
        out.push(l);
        remaining -= l;
        len = len.saturating_mul(2);
    }
    out
}

/// `ε = scale · ln(N) / √N`.
pub fn full_feedback_epsilon(n: usize, scale: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    scale * n.ln() / n.sqrt()
}

/// Record of one stage's estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageInfo {
    pub index: usize,
    pub length: usize,
    /// Observations the stage's estimate was built from.
    pub samples: usize,
    pub epsilon: f64,
}

#[derive(Clone, Debug)]
pub struct FullFeedbackLearner {
    horizon: usize,
    epsilon_scale: f64,
    observations: Vec<f64>,
    stages: Vec<StageInfo>,
    stage_pos: usize,
    pacer: Pacer,
    turn: Turn,
}

impl FullFeedbackLearner {
    /// `prior` drives stage 1, before any competing bid has been seen.
    pub fn new(horizon: usize, prior: StepDistribution, epsilon_scale: f64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Config("horizon must be positive".into()));
        }
        if !(epsilon_scale >= 0.0) {
            return Err(Error::Config(format!(
                "epsilon scale must be non-negative, got {epsilon_scale}"
            )));
        }
        Ok(Self {
            horizon,
            epsilon_scale,
            observations: Vec::with_capacity(horizon),
            stages: vec![StageInfo {
                index: 1,
                length: 1,
                samples: 0,
                epsilon: 0.0,
            }],
            stage_pos: 0,
            pacer: Pacer::new(prior, 1)?,
            turn: Turn::default(),
        })
    }

    pub fn stages(&self) -> &[StageInfo] {
        &self.stages
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    /// Law the current stage's pacer believes in.
    pub fn model(&self) -> &StepDistribution {
        self.pacer.model()
    }

    fn start_next_stage(&mut self) -> Result<()> {
        let prev = self.stages.last().expect("stage 1 exists");
        let index = prev.index + 1;
        let length = (1usize << (index - 1).min(62)).min(self.horizon - self.turn.rounds);
        let samples = self.observations.len();
        let epsilon = full_feedback_epsilon(samples, self.epsilon_scale);
        let optimistic = optimistic_cdf(&empirical_cdf(&self.observations)?, epsilon)?;
        self.pacer = Pacer::new(optimistic, length)?;
        self.stages.push(StageInfo {
            index,
            length,
            samples,
            epsilon,
        });
        self.stage_pos = 0;
        Ok(())
    }
}

impl Bidder for FullFeedbackLearner {
    fn feedback_kind(&self) -> FeedbackKind {
        FeedbackKind::Full
    }

    fn bid(&mut self, value: f64) -> Result<BidPlan> {
        self.turn.begin(self.horizon)?;
        if self.stage_pos == self.stages.last().unwrap().length {
            self.start_next_stage()?;
        }
        let decision = self.pacer.step(value)?;
        Ok(BidPlan {
            lottery: decision.lottery,
            pacer: Some(decision),
        })
    }

    fn observe(&mut self, feedback: Feedback) -> Result<()> {
        self.turn.end(&feedback, FeedbackKind::Full)?;
        if let Feedback::Full { d } = feedback {
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::Domain {
                    what: "competing bid",
                    value: d,
                });
            }
            self.observations.push(d);
        }
        self.stage_pos += 1;
        Ok(())
    }
}

/// Exploration and exploitation settings for [`BanditLearner`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BanditParams {
    pub k: usize,
    pub m: usize,
    pub epsilon: f64,
}

impl BanditParams {
    /// `M = ⌈√T⌉`, `K = ⌈T^{1/4}⌉`, `ε = √(c·ln T / (2M))`.
    pub fn for_horizon(horizon: usize, epsilon_scale: f64) -> Self {
        let m = ceil_root(horizon, 2);
        let k = ceil_root(horizon, 4);
        Self {
            k,
            m,
            epsilon: bandit_epsilon(horizon, m, epsilon_scale),
        }
    }

    pub fn exploration_rounds(&self) -> usize {
        self.k * self.m
    }

    pub fn validate(&self, horizon: usize) -> Result<()> {
        if self.k == 0 || self.m == 0 {
            return Err(Error::Config(format!(
                "bandit grid K={} and block size M={} must be positive",
                self.k, self.m
            )));
        }
        if self.exploration_rounds() >= horizon {
            return Err(Error::Config(format!(
                "K·M = {}·{} = {} leaves no exploitation rounds at T = {horizon}",
                self.k,
                self.m,
                self.exploration_rounds()
            )));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::Config(format!(
                "bandit epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

pub fn bandit_epsilon(horizon: usize, m: usize, scale: f64) -> f64 {
    (scale * (horizon as f64).ln() / (2.0 * m as f64)).sqrt()
}

/// Smallest `r` with `r^root >= n`.
pub fn ceil_root(n: usize, root: u32) -> usize {
    let mut r = (n as f64).powf(1.0 / root as f64).floor() as usize;
    while (r as u128).pow(root) < n as u128 {
        r += 1;
    }
    while r > 0 && ((r - 1) as u128).pow(root) >= n as u128 {
        r -= 1;
    }
    r
}

#[derive(Clone, Debug)]
enum BanditPhase {
    Explore { blocks: BanditBlockOutcomes },
    Exploit(Box<Exploit>),
}

#[derive(Clone, Debug)]
struct Exploit {
    blocks: BanditBlockOutcomes,
    optimistic: StepDistribution,
    pacer: Pacer,
}

#[derive(Clone, Debug)]
pub struct BanditLearner {
    horizon: usize,
    params: BanditParams,
    phase: BanditPhase,
    turn: Turn,
}

impl BanditLearner {
    pub fn new(horizon: usize, params: BanditParams) -> Result<Self> {
        params.validate(horizon)?;
        Ok(Self {
            horizon,
            params,
            phase: BanditPhase::Explore {
                blocks: BanditBlockOutcomes::zeroed(params.k, params.m)?,
            },
            turn: Turn::default(),
        })
    }

    pub fn params(&self) -> &BanditParams {
        &self.params
    }

    pub fn is_exploring(&self) -> bool {
        matches!(self.phase, BanditPhase::Explore { .. })
    }

    pub fn blocks(&self) -> &BanditBlockOutcomes {
        match &self.phase {
            BanditPhase::Explore { blocks } => blocks,
            BanditPhase::Exploit(e) => &e.blocks,
        }
    }

    /// `F̄`, available once exploitation started.
    pub fn optimistic(&self) -> Option<&StepDistribution> {
        match &self.phase {
            BanditPhase::Exploit(e) => Some(&e.optimistic),
            BanditPhase::Explore { .. } => None,
        }
    }

    /// `F̄ᶜ`, available once exploitation started.
    pub fn conservative(&self) -> Option<&StepDistribution> {
        match &self.phase {
            BanditPhase::Exploit(e) => Some(e.pacer.model()),
            BanditPhase::Explore { .. } => None,
        }
    }

    fn start_exploit(&mut self) -> Result<()> {
        let BanditPhase::Explore { blocks } = &self.phase else {
            return Ok(());
        };
        let blocks = blocks.clone();
        let estimate = bandit_empirical_cdf(&blocks);
        let optimistic = optimistic_cdf(&estimate, self.params.epsilon)?;
        let conservative = conservative_shift_cdf(&optimistic, self.params.k)?;
        let pacer = Pacer::new(
            conservative,
            self.horizon - self.params.exploration_rounds(),
        )?;
        self.phase = BanditPhase::Exploit(Box::new(Exploit {
            blocks,
            optimistic,
            pacer,
        }));
        Ok(())
    }
}

/// Bid actually submitted for a conservative-pacer bid: one grid step up, capped at 1.
pub fn conservative_bid(bc: f64, k: usize) -> f64 {
    shift_up_on_grid(bc, k)
}

impl Bidder for BanditLearner {
    fn feedback_kind(&self) -> FeedbackKind {
        FeedbackKind::Bandit
    }

    fn bid(&mut self, value: f64) -> Result<BidPlan> {
        self.turn.begin(self.horizon)?;
        let round = self.turn.rounds;
        let BanditParams { k, m, .. } = self.params;
        if round < k * m {
            let block = round / m;
            return Ok(BidPlan {
                lottery: RandomizedBid::deterministic(block as f64 / k as f64),
                pacer: None,
            });
        }
        self.start_exploit()?;
        let BanditPhase::Exploit(e) = &mut self.phase else {
            unreachable!("exploitation starts after K·M rounds");
        };
        let decision = e.pacer.step(value)?;
        Ok(BidPlan {
            lottery: decision.lottery.map_bids(|b| conservative_bid(b, k)),
            pacer: Some(decision),
        })
    }

    fn observe(&mut self, feedback: Feedback) -> Result<()> {
        let round = self.turn.rounds;
        self.turn.end(&feedback, FeedbackKind::Bandit)?;
        if let (BanditPhase::Explore { blocks }, Feedback::Bandit { won: true }) =
            (&mut self.phase, feedback)
        {
            blocks.record_win(round / self.params.m)?;
        }
        Ok(())
    }
}
