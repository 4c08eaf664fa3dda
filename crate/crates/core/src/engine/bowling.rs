//! Bowling side: defend probability of a fixed over-by-over plan.

use serde::{Deserialize, Serialize};

use super::batch::{self, BallCtx, Innings, Step};
use super::{
    sample_outcome, transition, Batsman, BattingScenario, EngineError, EvalResult, InitialStriker, MatchState,
    Perspective, DEFAULT_STATE_BUDGET, INNINGS_BALLS,
};
use crate::outcome::Outcome;
use crate::profiles::PhaseVectors;

/// Maximum overs per bowler in an innings.
pub const MAX_QUOTA: u32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bowler {
    pub id: String,
    /// Overs this bowler may still bowl.
    pub quota: u32,
    pub profile: PhaseVectors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowlingScenario {
    pub runs_to_defend: i32,
    pub balls: u32,
    /// Batting wickets in hand at the intervention; taking this many ends the innings.
    pub wickets_to_take: u32,
    /// 0-indexed overs to assign, consecutive and ending at over 19.
    pub slots: Vec<u32>,
    pub bowlers: Vec<Bowler>,
    /// Bowler of the over just before the first slot (finishes a part-bowled over).
    #[serde(default)]
    pub prev_bowler: Option<usize>,
    /// Opposition vectors for duality and sensitivity harnesses only.
    #[serde(default)]
    pub batting_proxy: Option<PhaseVectors>,
}

/// One bowler index per slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BowlingPlan {
    pub assignment: Vec<usize>,
}

impl BowlingPlan {
    pub fn new(assignment: Vec<usize>) -> Self {
        BowlingPlan { assignment }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Overs given to bowler `j`.
    pub fn usage(&self, j: usize) -> u32 {
        self.assignment.iter().filter(|&&b| b == j).count() as u32
    }
}

impl BowlingScenario {
    /// First over whose balls are still to come, and whether it is part-bowled.
    fn current_over(&self) -> (u32, bool) {
        let bowled = INNINGS_BALLS - self.balls;
        (bowled / 6, !bowled.is_multiple_of(6))
    }

    /// Overs that must be covered by `slots` for the balls remaining.
    pub fn required_slots(&self) -> Vec<u32> {
        if self.balls == 0 {
            return Vec::new();
        }
        let (over, partial) = self.current_over();
        (over + partial as u32..20).collect()
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::InvalidScenario(m));
        if self.balls > INNINGS_BALLS {
            return bad(format!("balls remaining must be in 0..=120, got {}", self.balls));
        }
        if !(1..=10).contains(&self.wickets_to_take) {
            return bad(format!("wickets in hand must be in 1..=10, got {}", self.wickets_to_take));
        }
        if self.bowlers.is_empty() {
            return bad("no bowlers".into());
        }
        for b in &self.bowlers {
            if b.quota > MAX_QUOTA {
                return bad(format!("quota of {} is {}, above {MAX_QUOTA}", b.id, b.quota));
            }
        }
        let required = self.required_slots();
        if self.slots != required {
            return bad(format!("slots {:?} must be the remaining overs {:?}", self.slots, required));
        }
        if let Some(p) = self.prev_bowler {
            if p >= self.bowlers.len() {
                return bad(format!("prev_bowler index {p} out of range"));
            }
        } else if self.current_over().1 && self.balls > 0 {
            return bad("a part-bowled current over needs prev_bowler to finish it".into());
        }
        let total: u32 = self.bowlers.iter().map(|b| b.quota).sum();
        if (total as usize) < self.slots.len() {
            return Err(EngineError::InfeasiblePlan(format!(
                "quota: total remaining quota {total} is below the {} overs to bowl",
                self.slots.len()
            )));
        }
        Ok(())
    }

    /// Names the first constraint `plan` breaks, if any.
    pub fn violation(&self, plan: &BowlingPlan) -> Option<String> {
        if plan.len() != self.slots.len() {
            return Some(format!("plan has {} overs, scenario has {} slots", plan.len(), self.slots.len()));
        }
        if let Some(&j) = plan.assignment.iter().find(|&&j| j >= self.bowlers.len()) {
            return Some(format!("bowler index {j} out of range"));
        }
        for (j, b) in self.bowlers.iter().enumerate() {
            let used = plan.usage(j);
            if used > b.quota {
                return Some(format!("quota: {} bowls {used} overs with {} left", b.id, b.quota));
            }
        }
        if let (Some(prev), Some(&first)) = (self.prev_bowler, plan.assignment.first()) {
            if prev == first {
                return Some(format!(
                    "no-consecutive: {} bowled the previous over and cannot open the plan",
                    self.bowlers[prev].id
                ));
            }
        }
        for (k, pair) in plan.assignment.windows(2).enumerate() {
            if pair[0] == pair[1] {
                return Some(format!(
                    "no-consecutive: {} assigned to overs {} and {}",
                    self.bowlers[pair[0]].id,
                    self.slots[k],
                    self.slots[k + 1]
                ));
            }
        }
        None
    }

    /// Identical batsmen drawn from `batting_proxy`, with the same wickets and
    /// target, for complement checks against the bowling value.
    pub fn proxy_batting_scenario(&self) -> Option<BattingScenario> {
        let proxy = self.batting_proxy?;
        let batsman = |i: usize| Batsman { id: format!("proxy-{i}"), profile: proxy };
        Some(BattingScenario {
            runs_required: self.runs_to_defend,
            balls: self.balls,
            wickets: self.wickets_to_take,
            pool: (1..=self.wickets_to_take as usize).map(batsman).collect(),
            non_striker: batsman(0),
            initial_striker: InitialStriker::NewBatsman,
            tail: None,
        })
    }

    /// Per-ball outcome probabilities for each remaining over, from the
    /// current over through over 19.
    fn over_probs(&self, plan: &BowlingPlan) -> Vec<[f64; 7]> {
        let (over, _) = self.current_over();
        (over..20)
            .map(|o| {
                let bowler = match self.slots.first() {
                    Some(&first) if o >= first => plan.assignment[(o - first) as usize],
                    _ => self.prev_bowler.expect("validated: part-bowled over has a bowler"),
                };
                let phase = crate::outcome::Phase::of_over_unchecked(o);
                *self.bowlers[bowler].profile.phase(phase).probs()
            })
            .collect()
    }

    fn checked(&self, plan: &BowlingPlan) -> Result<(), EngineError> {
        self.validate()?;
        match self.violation(plan) {
            Some(v) => Err(EngineError::InfeasiblePlan(v)),
            None => Ok(()),
        }
    }
}

/// True iff `plan` respects quotas and the no-consecutive-overs rule,
/// including the bowler of the previous over.
pub fn is_feasible(plan: &BowlingPlan, scenario: &BowlingScenario) -> bool {
    scenario.violation(plan).is_none()
}

struct BowlingInnings<'a> {
    scenario: &'a BowlingScenario,
    first_over: u32,
    cdfs: Vec<[f64; 7]>,
}

struct BowlState {
    state: MatchState,
    runs: u32,
    balls: u32,
}

impl Innings for BowlingInnings<'_> {
    type State = BowlState;

    fn start(&self) -> BowlState {
        BowlState {
            state: MatchState::new(self.scenario.runs_to_defend, self.scenario.balls, 0),
            runs: 0,
            balls: 0,
        }
    }

    fn balls(&self) -> u32 {
        self.scenario.balls
    }

    #[inline]
    fn step(&self, st: &mut BowlState, ctx: &BallCtx, u: f64) -> Step {
        let o = sample_outcome(&self.cdfs[(ctx.over - self.first_over) as usize], u);
        st.state = match transition(st.state, o, Perspective::Bowling) {
            Ok(s) => s,
            Err(_) => unreachable!("live trajectories are never terminal"),
        };
        st.balls += 1;
        if o == Outcome::Wicket {
            if st.state.w == self.scenario.wickets_to_take {
                return Step::Finished { success: true };
            }
        } else {
            st.runs += o.runs();
            if st.state.r <= 0 {
                return Step::Finished { success: false };
            }
        }
        Step::Continue
    }

    fn success_when_balls_run_out(&self) -> bool {
        true
    }

    fn runs_and_balls(&self, st: &BowlState) -> (u64, u64) {
        (st.runs as u64, st.balls as u64)
    }
}

/// Monte Carlo defend probability of a feasible plan.
pub fn simulate_bowling(
    scenario: &BowlingScenario,
    plan: &BowlingPlan,
    n_sims: u64,
    seed: u64,
) -> Result<EvalResult, EngineError> {
    scenario.checked(plan)?;
    if n_sims == 0 {
        return Err(EngineError::NoSimulations);
    }
    if scenario.runs_to_defend <= 0 || scenario.balls == 0 {
        return Ok(EvalResult::certain(scenario.runs_to_defend > 0, n_sims, seed));
    }
    let probs = scenario.over_probs(plan);
    let innings = BowlingInnings {
        scenario,
        first_over: scenario.current_over().0,
        cdfs: probs
            .iter()
            .map(|p| crate::profiles::OutcomeVector::new(*p).map(|v| v.cumulative()))
            .collect::<Result<_, _>>()
            .map_err(|e| EngineError::InvalidScenario(e.to_string()))?,
    };
    let tally = batch::run(&innings, n_sims, seed);
    Ok(EvalResult::from_successes(tally.successes, n_sims, seed))
}

/// Exact defend probability by backward induction over `(runs, balls, wickets taken)`.
pub fn exact_bowling_value(scenario: &BowlingScenario, plan: &BowlingPlan) -> Result<f64, EngineError> {
    exact_bowling_value_with_budget(scenario, plan, DEFAULT_STATE_BUDGET)
}

pub fn exact_bowling_value_with_budget(
    scenario: &BowlingScenario,
    plan: &BowlingPlan,
    budget: u64,
) -> Result<f64, EngineError> {
    scenario.checked(plan)?;
    if scenario.runs_to_defend <= 0 {
        return Ok(0.0);
    }
    if scenario.balls == 0 {
        return Ok(1.0);
    }
    let d0 = scenario.runs_to_defend as usize;
    let wmax = scenario.wickets_to_take as usize;
    let needed = d0 as u64 * wmax as u64 * scenario.balls as u64;
    if needed > budget {
        return Err(EngineError::Capacity { needed, budget });
    }
    let probs = scenario.over_probs(plan);
    let first_over = scenario.current_over().0;

    // table[d * wmax + w], d in 1..=d0 (row 0 unused: target reached)
    let mut prev = vec![1.0f64; (d0 + 1) * wmax];
    let mut cur = vec![0.0f64; (d0 + 1) * wmax];
    for t in 1..=scenario.balls {
        let ball = MatchState::new(0, t, 0);
        let p = &probs[(ball.absolute_over() - first_over) as usize];
        for d in 1..=d0 {
            for w in 0..wmax {
                let mut v = p[Outcome::Wicket.index()] * if w + 1 == wmax { 1.0 } else { prev[d * wmax + w + 1] };
                for o in &Outcome::ALL[1..] {
                    let runs = o.runs() as usize;
                    if runs < d {
                        v += p[o.index()] * prev[(d - runs) * wmax + w];
                    }
                }
                cur[d * wmax + w] = v;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[d0 * wmax])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::OutcomeVector;

    fn bowler(id: &str, quota: u32, v: OutcomeVector) -> Bowler {
        Bowler { id: id.into(), quota, profile: PhaseVectors::uniform_across_phases(v) }
    }

    fn two_over_scenario(d: i32, wmax: u32, v: OutcomeVector) -> BowlingScenario {
        BowlingScenario {
            runs_to_defend: d,
            balls: 12,
            wickets_to_take: wmax,
            slots: vec![18, 19],
            bowlers: vec![bowler("A", 2, v), bowler("B", 2, v)],
            prev_bowler: None,
            batting_proxy: None,
        }
    }

    #[test]
    fn all_wickets_defends() {
        let sc = two_over_scenario(5, 1, OutcomeVector::point_mass(Outcome::Wicket));
        let plan = BowlingPlan::new(vec![0, 1]);
        assert_eq!(simulate_bowling(&sc, &plan, 500, 1).unwrap().v_hat, 1.0);
        assert_eq!(exact_bowling_value(&sc, &plan).unwrap(), 1.0);
    }

    #[test]
    fn all_sixes_loses() {
        let sc = two_over_scenario(72, 10, OutcomeVector::point_mass(Outcome::Six));
        let plan = BowlingPlan::new(vec![0, 1]);
        assert_eq!(simulate_bowling(&sc, &plan, 500, 1).unwrap().v_hat, 0.0);
        assert_eq!(exact_bowling_value(&sc, &plan).unwrap(), 0.0);
    }

    #[test]
    fn terminal_starts() {
        let v = OutcomeVector::uniform();
        let mut sc = two_over_scenario(0, 3, v);
        let plan = BowlingPlan::new(vec![0, 1]);
        assert_eq!(exact_bowling_value(&sc, &plan).unwrap(), 0.0);
        sc.runs_to_defend = 10;
        sc.balls = 0;
        sc.slots.clear();
        assert_eq!(exact_bowling_value(&sc, &BowlingPlan::new(vec![])).unwrap(), 1.0);
    }

    #[test]
    fn feasibility_rules() {
        let v = OutcomeVector::uniform();
        let sc = BowlingScenario {
            runs_to_defend: 30,
            balls: 18,
            wickets_to_take: 5,
            slots: vec![17, 18, 19],
            bowlers: vec![bowler("A", 2, v), bowler("B", 1, v), bowler("C", 2, v)],
            prev_bowler: Some(2),
            batting_proxy: None,
        };
        assert!(!is_feasible(&BowlingPlan::new(vec![0, 0, 1]), &sc));
        assert!(!is_feasible(&BowlingPlan::new(vec![1, 0, 1]), &sc));
        assert!(!is_feasible(&BowlingPlan::new(vec![2, 0, 1]), &sc));
        assert!(!is_feasible(&BowlingPlan::new(vec![0, 1]), &sc));
        assert!(is_feasible(&BowlingPlan::new(vec![0, 1, 0]), &sc));
        let err = simulate_bowling(&sc, &BowlingPlan::new(vec![0, 0, 1]), 10, 1).unwrap_err();
        assert!(err.to_string().contains("no-consecutive"), "{err}");
    }

    #[test]
    fn scenario_validation() {
        let v = OutcomeVector::uniform();
        let mut sc = two_over_scenario(10, 2, v);
        sc.slots = vec![19];
        assert!(matches!(sc.validate(), Err(EngineError::InvalidScenario(_))));
        let mut sc = two_over_scenario(10, 2, v);
        sc.bowlers[0].quota = 0;
        sc.bowlers[1].quota = 1;
        assert!(matches!(sc.validate(), Err(EngineError::InfeasiblePlan(m)) if m.starts_with("quota")));
        let mut sc = two_over_scenario(10, 2, v);
        sc.balls = 10;
        sc.slots = vec![19];
        assert!(sc.validate().is_err(), "part-bowled over without prev_bowler");
        sc.prev_bowler = Some(0);
        assert!(sc.validate().is_ok());
    }

    #[test]
    fn part_bowled_over_uses_previous_bowler() {
        // prev bowler only takes wickets; 4 balls left in over 18, then over 19 by a six-hitter
        let wk = OutcomeVector::point_mass(Outcome::Wicket);
        let six = OutcomeVector::point_mass(Outcome::Six);
        let sc = BowlingScenario {
            runs_to_defend: 6,
            balls: 10,
            wickets_to_take: 10,
            slots: vec![19],
            bowlers: vec![bowler("W", 1, wk), bowler("S", 1, six)],
            prev_bowler: Some(0),
            batting_proxy: None,
        };
        let plan = BowlingPlan::new(vec![1]);
        // four wickets, then the first ball of over 19 goes for six
        assert_eq!(exact_bowling_value(&sc, &plan).unwrap(), 0.0);
        let mut sc4 = sc.clone();
        sc4.wickets_to_take = 4;
        assert_eq!(exact_bowling_value(&sc4, &plan).unwrap(), 1.0);
        assert_eq!(simulate_bowling(&sc4, &plan, 100, 5).unwrap().v_hat, 1.0);
    }

    #[test]
    fn capacity_guard() {
        let sc = two_over_scenario(200, 10, OutcomeVector::uniform());
        assert!(matches!(
            exact_bowling_value_with_budget(&sc, &BowlingPlan::new(vec![0, 1]), 100),
            Err(EngineError::Capacity { .. })
        ));
    }
}
