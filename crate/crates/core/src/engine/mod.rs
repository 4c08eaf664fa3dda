//! Match state, transitions, and the Monte Carlo / exact evaluators.
//!
//! Batting evaluation is bowler-agnostic and bowling evaluation is
//! batsman-agnostic. Both share the same ball-by-ball machinery: the absolute
//! over and the position within it are derived from the balls remaining, the
//! phase follows from the over, and the innings stops as soon as the target is
//! reached, the balls run out, or the wickets run out.

mod batch;
pub mod batting;
pub mod bowling;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::outcome::{Outcome, Phase};

pub use batting::{exact_batting_value, simulate_batting, BattingScenario, Batsman, InitialStriker};
pub use bowling::{
    exact_bowling_value, is_feasible, simulate_bowling, Bowler, BowlingPlan, BowlingScenario,
};

/// Legal balls in a T20 innings.
pub const INNINGS_BALLS: u32 = 120;

/// Default limit on `runs x balls x crease states` for the exact evaluators.
pub const DEFAULT_STATE_BUDGET: u64 = 50_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid batting order: {0}")]
    InvalidOrder(String),
    #[error("infeasible bowling plan: {0}")]
    InfeasiblePlan(String),
    #[error("exact evaluation needs {needed} states, over the budget of {budget}")]
    Capacity { needed: u64, budget: u64 },
    #[error("transition applied to a terminal state {0:?}")]
    TerminalState(MatchState),
    #[error("n_sims must be at least 1")]
    NoSimulations,
}

/// `(runs remaining, legal balls remaining, wickets)`.
///
/// `w` is wickets in hand from the batting side's view and wickets taken
/// since the intervention from the bowling side's view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatchState {
    pub r: i32,
    pub b: u32,
    pub w: u32,
}

impl MatchState {
    pub fn new(r: i32, b: u32, w: u32) -> Self {
        debug_assert!(b <= INNINGS_BALLS);
        MatchState { r, b, w }
    }

    /// Balls already bowled in the innings.
    pub fn bowled(&self) -> u32 {
        INNINGS_BALLS - self.b
    }

    /// 0-indexed over containing the next ball.
    pub fn absolute_over(&self) -> u32 {
        self.bowled() / 6
    }

    /// Position of the next ball within its over, 0..=5.
    pub fn over_ball(&self) -> u32 {
        self.bowled() % 6
    }

    pub fn phase(&self) -> Phase {
        Phase::of_over_unchecked(self.absolute_over())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Perspective {
    Batting,
    Bowling,
}

/// Applies one outcome. Callers decide termination; this only refuses states
/// with no ball left or a target already reached.
pub fn transition(state: MatchState, outcome: Outcome, perspective: Perspective) -> Result<MatchState, EngineError> {
    if state.b == 0 || state.r <= 0 {
        return Err(EngineError::TerminalState(state));
    }
    if perspective == Perspective::Batting && state.w == 0 {
        return Err(EngineError::TerminalState(state));
    }
    let b = state.b - 1;
    Ok(match (outcome, perspective) {
        (Outcome::Wicket, Perspective::Batting) => MatchState { r: state.r, b, w: state.w - 1 },
        (Outcome::Wicket, Perspective::Bowling) => MatchState { r: state.r, b, w: state.w + 1 },
        (o, _) => MatchState { r: state.r - o.runs() as i32, b, w: state.w },
    })
}

/// Strike changes on odd runs or at the end of an over; both together cancel.
pub fn rotate_strike<T>(striker: T, non_striker: T, outcome: Outcome, over_ball: u32) -> (T, T) {
    debug_assert!(over_ball <= 5);
    if swaps_strike(outcome, over_ball) {
        (non_striker, striker)
    } else {
        (striker, non_striker)
    }
}

#[inline]
pub(crate) fn swaps_strike(outcome: Outcome, over_ball: u32) -> bool {
    (outcome.runs() % 2 == 1) != (over_ball == 5)
}

/// Binomial standard error of a Monte Carlo proportion.
pub fn standard_error(v_hat: f64, n_sims: u64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&v_hat) && n_sims >= 1);
    (v_hat * (1.0 - v_hat) / n_sims as f64).sqrt()
}

/// Estimated probability with its Monte Carlo evidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub v_hat: f64,
    pub n_sims: u64,
    pub se: f64,
    pub seed: u64,
}

impl EvalResult {
    pub fn from_successes(successes: u64, n_sims: u64, seed: u64) -> Self {
        let v_hat = successes as f64 / n_sims as f64;
        EvalResult { v_hat, n_sims, se: standard_error(v_hat, n_sims), seed }
    }

    /// Exact value for a state that is already decided before any ball.
    pub(crate) fn certain(v: bool, n_sims: u64, seed: u64) -> Self {
        EvalResult { v_hat: if v { 1.0 } else { 0.0 }, n_sims, se: 0.0, seed }
    }

    /// The `1 / (2 sqrt(N))` ceiling on the standard error.
    pub fn se_bound(&self) -> f64 {
        0.5 / (self.n_sims as f64).sqrt()
    }
}

/// Picks an outcome from a cumulative table with a uniform draw in `[0, 1)`.
#[inline]
pub(crate) fn sample_outcome(cdf: &[f64; 7], u: f64) -> Outcome {
    for (i, &c) in cdf.iter().enumerate().take(6) {
        if u < c {
            return Outcome::ALL[i];
        }
    }
    Outcome::Six
}
