//! ROI-constrained autobidding in repeated first-price auctions.
//!
//! The crate is organized bottom-up:
//!
//! * [`dist`] holds step CDFs and their estimators.
//! * [`envelope`] builds the concave allocation–payment envelope and splits
//!   envelope points into two-bid lotteries.
//! * [`pacing`] runs the dual multiplicative pacer on a fixed law.
//! * [`learners`] wraps the pacer with full-feedback and one-bit estimation.
//! * [`benchmark`] solves the hindsight optimum and scores episodes.
//! * [`harness`] simulates episodes and multi-seed sweeps.

// `!(x >= 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod dist;
pub mod envelope;
pub mod error;
pub mod harness;
pub mod learners;
pub mod pacing;

pub use benchmark::{
    brute_force_optimal, hindsight_optimal, score_episode, HindsightSolution, Metrics, RoundOutcome,
};
pub use dist::{DistLiteral, StepDistribution, ValueDistribution};
pub use envelope::{decompose_bid, ConcaveEnvelope, RandomizedBid};
pub use error::{Error, Result};
pub use harness::{
    run_episode, run_sweep, Algorithm, EpisodeResult, ExperimentConfig, Scoring, SweepResult,
};
pub use learners::{BanditLearner, Bidder, Feedback, FullFeedbackLearner, ModelPacer};
pub use pacing::{Pacer, PacerDecision};
