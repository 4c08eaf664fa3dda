//! Ball-synchronous batched trajectory driver.
//!
//! Trajectories are processed in fixed-size batches. Within a batch every
//! live trajectory advances one ball per step and finished ones drop out of
//! the live set. Batches run in parallel; each trajectory owns its random
//! stream, so totals are identical for any thread count.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::MatchState;
use crate::outcome::Phase;
use crate::rng::trajectory_rng;

const BATCH: u64 = 2048;

/// Shared context of the ball about to be bowled.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BallCtx {
    pub over: u32,
    pub over_ball: u32,
    pub phase: Phase,
}

pub(crate) enum Step {
    Continue,
    Finished { success: bool },
}

pub(crate) trait Innings: Sync {
    type State: Send;

    fn start(&self) -> Self::State;
    fn balls(&self) -> u32;
    fn step(&self, state: &mut Self::State, ctx: &BallCtx, u: f64) -> Step;
    /// Outcome for a trajectory still alive after the last ball.
    fn success_when_balls_run_out(&self) -> bool;
    fn runs_and_balls(&self, state: &Self::State) -> (u64, u64);
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct Tally {
    pub successes: u64,
    pub runs: u64,
    pub balls: u64,
}

impl Tally {
    fn merge(self, o: Tally) -> Tally {
        Tally { successes: self.successes + o.successes, runs: self.runs + o.runs, balls: self.balls + o.balls }
    }
}

pub(crate) fn run<I: Innings>(innings: &I, n_sims: u64, seed: u64) -> Tally {
    let batches = n_sims.div_ceil(BATCH);
    (0..batches)
        .into_par_iter()
        .map(|bi| {
            let lo = bi * BATCH;
            let hi = (lo + BATCH).min(n_sims);
            run_batch(innings, lo, hi, seed)
        })
        .reduce(Tally::default, Tally::merge)
}

fn run_batch<I: Innings>(innings: &I, lo: u64, hi: u64, seed: u64) -> Tally {
    let mut states: Vec<I::State> = (lo..hi).map(|_| innings.start()).collect();
    let mut rngs: Vec<ChaCha8Rng> = (lo..hi).map(|t| trajectory_rng(seed, t)).collect();
    let mut live: Vec<usize> = (0..states.len()).collect();
    let mut tally = Tally::default();

    let b0 = innings.balls();
    for b in (1..=b0).rev() {
        if live.is_empty() {
            break;
        }
        let s = MatchState::new(0, b, 0);
        let ctx = BallCtx { over: s.absolute_over(), over_ball: s.over_ball(), phase: s.phase() };
        live.retain(|&i| {
            let u: f64 = rngs[i].random();
            match innings.step(&mut states[i], &ctx, u) {
                Step::Continue => true,
                Step::Finished { success } => {
                    finish(innings, &states[i], success, &mut tally);
                    false
                }
            }
        });
    }
    let leftover = innings.success_when_balls_run_out();
    for &i in &live {
        finish(innings, &states[i], leftover, &mut tally);
    }
    tally
}

fn finish<I: Innings>(innings: &I, state: &I::State, success: bool, tally: &mut Tally) {
    let (runs, balls) = innings.runs_and_balls(state);
    tally.successes += success as u64;
    tally.runs += runs;
    tally.balls += balls;
}
