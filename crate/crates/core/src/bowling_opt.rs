//! Simulated annealing over feasible bowling plans.
//!
//! Each step reassigns one over to a bowler with quota left who does not
//! bowl an adjacent over. Candidate plans are scored with a cheap Monte Carlo
//! run; the best few are then re-scored at higher precision. All plans in a
//! pass share one set of trajectory streams, so two plans that differ in a
//! few overs are compared on the same simulated balls.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{simulate_bowling, BowlingPlan, BowlingScenario, EngineError, EvalResult};
use crate::outcome::Phase;
use crate::rng::{chain_rng, derive_seed};

const STREAM_CHAIN: u64 = 1;
const STREAM_FAST: u64 = 2;
const STREAM_REFINE: u64 = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BowlingSearchError {
    #[error("invalid annealing config: {0}")]
    Config(String),
    #[error("no feasible plan: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaConfig {
    pub t0: f64,
    pub epsilon: f64,
    pub steps: usize,
    pub n_fast: u64,
    pub n_refine: u64,
    pub top_k: usize,
    pub seed: u64,
}

impl Default for SaConfig {
    fn default() -> Self {
        SaConfig { t0: 0.05, epsilon: 1e-6, steps: 8_000, n_fast: 5_000, n_refine: 30_000, top_k: 10, seed: 0 }
    }
}

impl SaConfig {
    pub fn validate(&self) -> Result<(), BowlingSearchError> {
        let bad = |m: &str| Err(BowlingSearchError::Config(m.into()));
        if !(self.t0.is_finite() && self.t0 >= 0.0) {
            return bad("t0 must be finite and >= 0");
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad("epsilon must be finite and > 0");
        }
        if self.n_fast == 0 || self.n_refine == 0 {
            return bad("n_fast and n_refine must be >= 1");
        }
        if self.top_k == 0 {
            return bad("top_k must be >= 1");
        }
        Ok(())
    }
}

/// Linear cooling, floored at `epsilon`.
pub fn sa_temperature(step: usize, config: &SaConfig) -> f64 {
    let frac = if config.steps == 0 { 1.0 } else { step as f64 / config.steps as f64 };
    config.t0 * (1.0 - frac).max(0.0) + config.epsilon
}

/// Metropolis rule for a maximisation problem.
pub fn sa_accept(delta: f64, temperature: f64, u: f64) -> bool {
    delta >= 0.0 || u < (delta / temperature).exp()
}

/// Bowlers who could take slot `k` of `plan` without breaking a quota or
/// bowling back-to-back overs, in index order.
pub fn candidate_set(scenario: &BowlingScenario, plan: &BowlingPlan, k: usize) -> Vec<usize> {
    let a = &plan.assignment;
    let before = if k == 0 { scenario.prev_bowler } else { Some(a[k - 1]) };
    let after = a.get(k + 1).copied();
    (0..scenario.bowlers.len())
        .filter(|&j| {
            j != a[k] && plan.usage(j) < scenario.bowlers[j].quota && Some(j) != before && Some(j) != after
        })
        .collect()
}

/// Result of one proposal attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Move {
    /// Slot `slot` reassigned from one bowler to another.
    Reassign { slot: usize, from: usize, to: usize },
    /// Bowlers of two slots exchanged.
    Swap { a: usize, b: usize },
    /// The chosen slot had no alternative bowler.
    Empty { slot: usize },
}

/// Proposes a neighbour of `plan`. Falls back to a two-slot exchange once
/// `empty_streak` reaches the number of slots. `plan` stays feasible.
pub fn propose_neighbor(
    scenario: &BowlingScenario,
    plan: &mut BowlingPlan,
    empty_streak: usize,
    rng: &mut ChaCha8Rng,
) -> Move {
    let n = plan.len();
    if empty_streak >= n {
        let swaps = feasible_swaps(scenario, plan);
        if !swaps.is_empty() {
            let (a, b) = swaps[rng.random_range(0..swaps.len())];
            plan.assignment.swap(a, b);
            return Move::Swap { a, b };
        }
    }
    let slot = rng.random_range(0..n);
    let cands = candidate_set(scenario, plan, slot);
    if cands.is_empty() {
        return Move::Empty { slot };
    }
    let to = cands[rng.random_range(0..cands.len())];
    let from = std::mem::replace(&mut plan.assignment[slot], to);
    Move::Reassign { slot, from, to }
}

fn undo(plan: &mut BowlingPlan, mv: &Move) {
    match *mv {
        Move::Reassign { slot, from, .. } => plan.assignment[slot] = from,
        Move::Swap { a, b } => plan.assignment.swap(a, b),
        Move::Empty { .. } => {}
    }
}

fn feasible_swaps(scenario: &BowlingScenario, plan: &BowlingPlan) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut trial = plan.clone();
    for a in 0..plan.len() {
        for b in a + 1..plan.len() {
            if plan.assignment[a] == plan.assignment[b] {
                continue;
            }
            trial.assignment.swap(a, b);
            if scenario.violation(&trial).is_none() {
                out.push((a, b));
            }
            trial.assignment.swap(a, b);
        }
    }
    out
}

/// Economy rate of bowler `j` in `phase`.
fn economy(scenario: &BowlingScenario, j: usize, phase: Phase) -> f64 {
    6.0 * scenario.bowlers[j].profile.phase(phase).expected_runs()
}

/// Cheapest-first assignment, backtracking when a greedy choice strands a
/// later over. Deterministic; ties go to the lower index.
pub fn greedy_initial_plan(scenario: &BowlingScenario) -> Result<BowlingPlan, BowlingSearchError> {
    scenario.validate().map_err(|e| match e {
        EngineError::InfeasiblePlan(m) => BowlingSearchError::Infeasible(m),
        other => BowlingSearchError::Engine(other),
    })?;
    let orderings: Vec<Vec<usize>> = scenario
        .slots
        .iter()
        .map(|&o| {
            let phase = Phase::of_over_unchecked(o);
            let mut js: Vec<usize> = (0..scenario.bowlers.len()).collect();
            js.sort_by(|&a, &b| economy(scenario, a, phase).total_cmp(&economy(scenario, b, phase)).then(a.cmp(&b)));
            js
        })
        .collect();
    let mut used = vec![0u32; scenario.bowlers.len()];
    let mut plan = Vec::with_capacity(scenario.slots.len());
    if fill(scenario, &orderings, &mut used, &mut plan) {
        Ok(BowlingPlan::new(plan))
    } else {
        Err(BowlingSearchError::Infeasible(
            "no-consecutive: quotas cannot be spread so that no bowler takes two overs in a row".into(),
        ))
    }
}

fn fill(scenario: &BowlingScenario, orderings: &[Vec<usize>], used: &mut [u32], plan: &mut Vec<usize>) -> bool {
    let k = plan.len();
    if k == orderings.len() {
        return true;
    }
    let remaining = (orderings.len() - k) as u32;
    let before = if k == 0 { scenario.prev_bowler } else { Some(plan[k - 1]) };
    for &j in &orderings[k] {
        if used[j] >= scenario.bowlers[j].quota || Some(j) == before {
            continue;
        }
        // A bowler needs a gap between overs, so one can cover at most
        // ceil(r / 2) of the last r slots.
        used[j] += 1;
        let after = remaining - 1;
        let room: u32 = scenario
            .bowlers
            .iter()
            .enumerate()
            .map(|(i, b)| (b.quota - used[i]).min(if i == j { after / 2 } else { after.div_ceil(2) }))
            .sum();
        if room >= after {
            plan.push(j);
            if fill(scenario, orderings, used, plan) {
                return true;
            }
            plan.pop();
        }
        used[j] -= 1;
    }
    false
}

/// Every feasible plan, in lexicographic order. Exponential; for small
/// scenarios and tests.
pub fn enumerate_feasible_plans(scenario: &BowlingScenario, limit: usize) -> Result<Vec<BowlingPlan>, BowlingSearchError> {
    scenario.validate()?;
    let mut out = Vec::new();
    let mut used = vec![0u32; scenario.bowlers.len()];
    let mut cur = Vec::with_capacity(scenario.slots.len());
    let ok = enumerate_rec(scenario, &mut used, &mut cur, &mut out, limit);
    if !ok {
        return Err(BowlingSearchError::Config(format!("more than {limit} feasible plans")));
    }
    Ok(out)
}

fn enumerate_rec(
    scenario: &BowlingScenario,
    used: &mut [u32],
    cur: &mut Vec<usize>,
    out: &mut Vec<BowlingPlan>,
    limit: usize,
) -> bool {
    if cur.len() == scenario.slots.len() {
        if out.len() == limit {
            return false;
        }
        out.push(BowlingPlan::new(cur.clone()));
        return true;
    }
    let before = if cur.is_empty() { scenario.prev_bowler } else { cur.last().copied() };
    for j in 0..scenario.bowlers.len() {
        if used[j] >= scenario.bowlers[j].quota || Some(j) == before {
            continue;
        }
        used[j] += 1;
        cur.push(j);
        let ok = enumerate_rec(scenario, used, cur, out, limit);
        cur.pop();
        used[j] -= 1;
        if !ok {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanCandidate {
    pub plan: BowlingPlan,
    pub fast: EvalResult,
    pub refined: EvalResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaProgress {
    pub step: usize,
    pub best_fast: f64,
    pub current_fast: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaResult {
    /// Refined candidates, best first.
    pub ranked: Vec<PlanCandidate>,
    pub initial: BowlingPlan,
    pub accepted: usize,
    pub empty_proposals: usize,
    pub distinct_plans: usize,
    pub total_sims: u64,
}

impl SaResult {
    pub fn best(&self) -> &PlanCandidate {
        &self.ranked[0]
    }
}

struct FastCache<'a> {
    scenario: &'a BowlingScenario,
    config: &'a SaConfig,
    /// Shared by every plan, so comparisons use common random numbers.
    seed: u64,
    values: HashMap<BowlingPlan, EvalResult>,
    sims: u64,
}

impl FastCache<'_> {
    fn eval(&mut self, plan: &BowlingPlan) -> Result<EvalResult, EngineError> {
        if let Some(v) = self.values.get(plan) {
            return Ok(*v);
        }
        let v = simulate_bowling(self.scenario, plan, self.config.n_fast, self.seed)?;
        self.sims += self.config.n_fast;
        self.values.insert(plan.clone(), v);
        Ok(v)
    }
}

pub fn optimize_bowling(scenario: &BowlingScenario, config: &SaConfig) -> Result<SaResult, BowlingSearchError> {
    optimize_bowling_with_progress(scenario, config, 0, |_| {})
}

/// Runs the annealer, calling `progress` every `every` steps (never if 0).
pub fn optimize_bowling_with_progress(
    scenario: &BowlingScenario,
    config: &SaConfig,
    every: usize,
    mut progress: impl FnMut(SaProgress),
) -> Result<SaResult, BowlingSearchError> {
    config.validate()?;
    let initial = greedy_initial_plan(scenario)?;
    let fast_seed = derive_seed(config.seed, &[STREAM_FAST]);
    let mut cache = FastCache { scenario, config, seed: fast_seed, values: HashMap::new(), sims: 0 };
    let mut rng = chain_rng(config.seed, STREAM_CHAIN);

    let mut current = initial.clone();
    let mut current_v = cache.eval(&current)?.v_hat;
    let mut best_v = current_v;
    let (mut accepted, mut empties, mut streak) = (0, 0, 0);

    if !current.is_empty() {
        for step in 0..config.steps {
            let mv = propose_neighbor(scenario, &mut current, streak, &mut rng);
            let u: f64 = rng.random();
            match mv {
                Move::Empty { .. } => {
                    empties += 1;
                    streak += 1;
                }
                _ => {
                    streak = 0;
                    debug_assert!(scenario.violation(&current).is_none());
                    let v = cache.eval(&current)?.v_hat;
                    if sa_accept(v - current_v, sa_temperature(step, config), u) {
                        current_v = v;
                        best_v = best_v.max(v);
                        accepted += 1;
                    } else {
                        undo(&mut current, &mv);
                    }
                }
            }
            if every > 0 && (step + 1) % every == 0 {
                progress(SaProgress { step: step + 1, best_fast: best_v, current_fast: current_v });
            }
        }
    }

    let mut screened: Vec<(&BowlingPlan, &EvalResult)> = cache.values.iter().collect();
    screened.sort_by(|a, b| b.1.v_hat.total_cmp(&a.1.v_hat).then_with(|| a.0.cmp(b.0)));
    let mut finalists: BTreeSet<BowlingPlan> = screened.iter().take(config.top_k).map(|(p, _)| (*p).clone()).collect();
    finalists.insert(initial.clone());

    let mut ranked = Vec::with_capacity(finalists.len());
    let mut total_sims = cache.sims;
    for plan in finalists {
        let refined = refined_value(scenario, &plan, config)?;
        total_sims += config.n_refine;
        ranked.push(PlanCandidate { fast: cache.values[&plan], plan, refined });
    }
    ranked.sort_by(|a, b| b.refined.v_hat.total_cmp(&a.refined.v_hat).then_with(|| a.plan.cmp(&b.plan)));

    Ok(SaResult {
        ranked,
        initial,
        accepted,
        empty_proposals: empties,
        distinct_plans: cache.values.len(),
        total_sims,
    })
}

/// High-precision estimate on the refinement streams shared by all plans.
pub fn refined_value(scenario: &BowlingScenario, plan: &BowlingPlan, config: &SaConfig) -> Result<EvalResult, EngineError> {
    simulate_bowling(scenario, plan, config.n_refine, derive_seed(config.seed, &[STREAM_REFINE]))
}

/// Gap between two independent estimates in units of their pooled
/// standard error, `gap / (sqrt(2) se)`.
pub fn audit_z_score(gap: f64, se: f64) -> f64 {
    gap / (std::f64::consts::SQRT_2 * se)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{exact_bowling_value, Bowler};
    use crate::profiles::{OutcomeVector, PhaseVectors};

    fn bowler(id: &str, quota: u32, w: f64, six: f64) -> Bowler {
        let v = OutcomeVector::new([w, 0.5 - w, 0.3, 0.1, 0.0, 0.1 - six, six]).unwrap();
        Bowler { id: id.into(), quota, profile: PhaseVectors::uniform_across_phases(v) }
    }

    fn scenario(quotas: &[u32], overs: u32, prev: Option<usize>) -> BowlingScenario {
        BowlingScenario {
            runs_to_defend: 8 * overs as i32,
            balls: 6 * overs,
            wickets_to_take: 6,
            slots: (20 - overs..20).collect(),
            bowlers: quotas
                .iter()
                .enumerate()
                .map(|(i, &q)| bowler(&format!("B{i}"), q, 0.03 + 0.01 * i as f64, 0.02 * i as f64))
                .collect(),
            prev_bowler: prev,
            batting_proxy: None,
        }
    }

    #[test]
    fn temperature_schedule() {
        let c = SaConfig::default();
        assert!((sa_temperature(0, &c) - (0.05 + 1e-6)).abs() < 1e-15);
        assert!((sa_temperature(4000, &c) - (0.025 + 1e-6)).abs() < 1e-15);
        assert!((sa_temperature(8000, &c) - 1e-6).abs() < 1e-15);
    }

    #[test]
    fn metropolis_rule() {
        assert!(sa_accept(0.0, 1e-6, 0.999));
        assert!(sa_accept(0.01, 1e-6, 0.999));
        // exp(-0.01 / 0.05) = 0.8187
        assert!(sa_accept(-0.01, 0.05, 0.81));
        assert!(!sa_accept(-0.01, 0.05, 0.82));
        assert!(!sa_accept(-0.001, 1e-6, 0.0 + 1e-300));
    }

    #[test]
    fn candidate_set_respects_neighbours_and_quota() {
        let sc = scenario(&[2, 2, 1, 1], 4, Some(3));
        let plan = BowlingPlan::new(vec![0, 1, 0, 1]);
        // slot 0: not 0 (current), not 3 (previous over), not 1 (next slot)
        assert_eq!(candidate_set(&sc, &plan, 0), vec![2]);
        // slot 2: 0 current, 1 on both sides; 2 and 3 have quota
        assert_eq!(candidate_set(&sc, &plan, 2), vec![2, 3]);
        let full = BowlingPlan::new(vec![0, 2, 0, 3]);
        assert_eq!(candidate_set(&sc, &full, 1), vec![1]);
    }

    #[test]
    fn greedy_picks_cheapest_feasible() {
        let sc = scenario(&[4, 4, 4], 4, None);
        let plan = greedy_initial_plan(&sc).unwrap();
        assert!(sc.violation(&plan).is_none());
        // B0 is cheapest everywhere, so it alternates with B1
        assert_eq!(plan.assignment, vec![0, 1, 0, 1]);
    }

    #[test]
    fn greedy_backtracks_out_of_dead_ends() {
        // B0 cheapest with quota 2; B1 must fill the rest but cannot go twice in a row
        let sc = scenario(&[2, 2, 1], 5, None);
        let plan = greedy_initial_plan(&sc).unwrap();
        assert!(sc.violation(&plan).is_none(), "{plan:?}");
    }

    #[test]
    fn infeasible_scenarios_name_the_constraint() {
        let short = scenario(&[1, 1], 3, None);
        let err = greedy_initial_plan(&short).unwrap_err().to_string();
        assert!(err.contains("quota"), "{err}");
        let lumpy = scenario(&[3, 1], 4, None);
        let err = greedy_initial_plan(&lumpy).unwrap_err().to_string();
        assert!(err.contains("no-consecutive"), "{err}");
    }

    #[test]
    fn moves_preserve_feasibility() {
        let sc = scenario(&[4, 3, 2, 2, 1], 10, Some(2));
        let mut plan = greedy_initial_plan(&sc).unwrap();
        let mut rng = chain_rng(5, 0);
        let mut streak = 0;
        for _ in 0..5_000 {
            match propose_neighbor(&sc, &mut plan, streak, &mut rng) {
                Move::Empty { .. } => streak += 1,
                _ => streak = 0,
            }
            assert!(sc.violation(&plan).is_none(), "{plan:?}");
        }
    }

    #[test]
    fn swap_escape_fires_after_empty_streak() {
        // Every quota is used up, so single-slot moves have no candidates.
        let sc = scenario(&[2, 1, 1], 4, None);
        let mut plan = BowlingPlan::new(vec![0, 1, 0, 2]);
        let mut rng = chain_rng(1, 0);
        assert!(matches!(propose_neighbor(&sc, &mut plan, 0, &mut rng), Move::Empty { .. }));
        let mv = propose_neighbor(&sc, &mut plan, 4, &mut rng);
        assert!(matches!(mv, Move::Swap { a: 1, b: 3 } | Move::Swap { a: 2, b: 3 }), "{mv:?}");
        assert!(sc.violation(&plan).is_none());
    }

    #[test]
    fn enumeration_counts() {
        let sc = scenario(&[2, 2], 4, None);
        let plans = enumerate_feasible_plans(&sc, 100).unwrap();
        assert_eq!(plans.iter().map(|p| p.assignment.clone()).collect::<Vec<_>>(), vec![vec![0, 1, 0, 1], vec![1, 0, 1, 0]]);
        let sc = scenario(&[1, 1, 1], 3, Some(0));
        assert_eq!(enumerate_feasible_plans(&sc, 100).unwrap().len(), 4);
        assert!(enumerate_feasible_plans(&scenario(&[4, 4, 4], 6, None), 3).is_err());
    }

    #[test]
    fn annealer_finds_exact_optimum_on_small_case() {
        let sc = scenario(&[2, 2, 2, 1], 4, Some(3));
        let plans = enumerate_feasible_plans(&sc, 10_000).unwrap();
        let best = plans
            .iter()
            .map(|p| (exact_bowling_value(&sc, p).unwrap(), p))
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap();
        let cfg = SaConfig { steps: 400, n_fast: 4_000, n_refine: 40_000, top_k: 5, seed: 9, ..SaConfig::default() };
        let res = optimize_bowling(&sc, &cfg).unwrap();
        let got = exact_bowling_value(&sc, &res.best().plan).unwrap();
        assert!(best.0 - got < 0.01, "best {} got {}", best.0, got);
        assert!(res.ranked.iter().any(|c| c.plan == res.initial));
    }

    #[test]
    fn progress_and_determinism() {
        let sc = scenario(&[3, 3, 2, 2], 8, None);
        let cfg = SaConfig { steps: 200, n_fast: 500, n_refine: 2_000, top_k: 3, seed: 21, ..SaConfig::default() };
        let mut seen = Vec::new();
        let a = optimize_bowling_with_progress(&sc, &cfg, 50, |p| seen.push(p.step)).unwrap();
        assert_eq!(seen, vec![50, 100, 150, 200]);
        let b = optimize_bowling(&sc, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.ranked.len() <= 4);
        assert!(a.ranked.windows(2).all(|w| w[0].refined.v_hat >= w[1].refined.v_hat));
    }

    #[test]
    fn z_score_example() {
        assert!((audit_z_score(0.052, 0.00187) - 19.66).abs() < 0.01);
    }
}
