//! Dual mirror-descent pacer for a known (or assumed) competing-bid law.
//!
//! Each round picks the envelope point maximizing `(1+λ)·v·G_conv(x) − λ·x`,
//! turns it into a two-bid lottery, and moves the multiplier with
//! `λ ← λ·exp(−α·g)` where `g = v·F_conv(b̃) − b̃·F_conv(b̃)`.

use serde::{Deserialize, Serialize};

use crate::dist::StepDistribution;
use crate::envelope::{decompose_bid, ConcaveEnvelope, RandomizedBid};
use crate::error::{Error, Result};

/// Multipliers past this bound indicate a runaway dual in debug builds.
pub const LAMBDA_GUARD: f64 = 5.184_705_528_587_072e21; // exp(50)

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub lambda: f64,
    pub alpha: f64,
    pub t: usize,
    pub horizon: usize,
}

impl DualState {
    /// `λ = 1`, `α = 1/√T`.
    pub fn new(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Precondition("pacer horizon must be positive".into()));
        }
        Ok(Self {
            lambda: 1.0,
            alpha: 1.0 / (horizon as f64).sqrt(),
            t: 0,
            horizon,
        })
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn is_exhausted(&self) -> bool {
        self.t >= self.horizon
    }
}

pub fn dual_update(state: &DualState, g: f64) -> DualState {
    DualState {
        lambda: state.lambda * (-state.alpha * g).exp(),
        t: state.t + 1,
        ..*state
    }
}

/// Envelope-optimal deterministic choice for one round.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    /// Envelope payment `b̃·F_conv(b̃)`.
    pub x: f64,
    /// `F_conv(b̃)`.
    pub y: f64,
    pub tilde_b: f64,
}

/// Maximizes `(1+λ)·v·G_conv(x) − λ·x`. The objective is concave piecewise
/// linear, so the optimum is the vertex where the hull slope crosses
/// `λ / ((1+λ)·v)`; exact ties take the larger payment.
pub fn best_response(env: &ConcaveEnvelope, v: f64, lambda: f64) -> BestResponse {
    debug_assert!(lambda > 0.0);
    let threshold = if v > 0.0 {
        lambda / ((1.0 + lambda) * v)
    } else {
        f64::INFINITY
    };
    let p = env.tangent_point(threshold);
    BestResponse {
        x: p.x,
        y: p.y,
        tilde_b: p.bid,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PacerDecision {
    pub tilde_b: f64,
    pub x_target: f64,
    pub y_target: f64,
    pub lottery: RandomizedBid,
    /// Multiplier used for this round's decision (before the update).
    pub lambda: f64,
    /// Model-side ROI surplus `v·F_conv(b̃) − b̃·F_conv(b̃)`.
    pub g: f64,
}

/// One pacer round: best response, lottery against `dist_for_decomposition`,
/// then the dual step. The caller realizes the lottery.
pub fn pacer_step(
    state: &DualState,
    env: &ConcaveEnvelope,
    dist_for_decomposition: &StepDistribution,
    v: f64,
) -> Result<(PacerDecision, DualState)> {
    if state.is_exhausted() {
        return Err(Error::EpisodeExhausted {
            round: state.t + 1,
            horizon: state.horizon,
        });
    }
    if cfg!(debug_assertions) && state.lambda > LAMBDA_GUARD {
        return Err(Error::Precondition(format!(
            "dual multiplier overflow: λ = {:e}",
            state.lambda
        )));
    }
    let br = best_response(env, v, state.lambda);
    let lottery = decompose_bid(env, dist_for_decomposition, br.x)?;
    let g = v * br.y - br.x;
    debug_assert!(
        g >= (-1.0f64).max(-1.0 / state.lambda) - 1e-12 && g <= v * br.y + 1e-12,
        "g = {g} outside its bounds at λ = {}",
        state.lambda
    );
    let decision = PacerDecision {
        tilde_b: br.tilde_b,
        x_target: br.x,
        y_target: br.y,
        lottery,
        lambda: state.lambda,
        g,
    };
    Ok((decision, dual_update(state, g)))
}

/// Pacer bundled with the law it believes in.
#[derive(Clone, Debug)]
pub struct Pacer {
    model: StepDistribution,
    envelope: ConcaveEnvelope,
    state: DualState,
}

impl Pacer {
    pub fn new(model: StepDistribution, horizon: usize) -> Result<Self> {
        let envelope = ConcaveEnvelope::of(&model)?;
        Ok(Self {
            model,
            envelope,
            state: DualState::new(horizon)?,
        })
    }

    pub fn step(&mut self, v: f64) -> Result<PacerDecision> {
        let (decision, next) = pacer_step(&self.state, &self.envelope, &self.model, v)?;
        self.state = next;
        Ok(decision)
    }

    pub fn state(&self) -> &DualState {
        &self.state
    }

    pub fn model(&self) -> &StepDistribution {
        &self.model
    }

    pub fn envelope(&self) -> &ConcaveEnvelope {
        &self.envelope
    }
}
