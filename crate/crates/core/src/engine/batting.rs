//! Batting side: win probability of a chase under a fixed batting order.

use serde::{Deserialize, Serialize};

use super::batch::{self, BallCtx, Innings, Step, Tally};
use super::{
    sample_outcome, swaps_strike, transition, EngineError, EvalResult, MatchState, Perspective,
    DEFAULT_STATE_BUDGET, INNINGS_BALLS,
};
use crate::outcome::{Outcome, Phase};
use crate::profiles::PhaseVectors;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batsman {
    pub id: String,
    pub profile: PhaseVectors,
}

/// Who faces the first ball after the intervention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialStriker {
    #[default]
    NewBatsman,
    FixedNonStriker,
}

/// A chase from an intervention point.
///
/// The first pool member in the order walks in immediately; each later wicket
/// brings in the next one. Once the pool is used up, further replacements come
/// from `tail` if present, otherwise the innings ends at that wicket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BattingScenario {
    pub runs_required: i32,
    pub balls: u32,
    /// Wickets in hand at the intervention.
    pub wickets: u32,
    pub pool: Vec<Batsman>,
    pub non_striker: Batsman,
    #[serde(default)]
    pub initial_striker: InitialStriker,
    /// Profile used for every batsman after the pool.
    #[serde(default)]
    pub tail: Option<PhaseVectors>,
}

impl BattingScenario {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.runs_required < 1 {
            return Err(EngineError::InvalidScenario(format!(
                "runs required must be >= 1, got {}",
                self.runs_required
            )));
        }
        self.validate_resources()
    }

    fn validate_resources(&self) -> Result<(), EngineError> {
        if self.pool.is_empty() {
            return Err(EngineError::InvalidScenario("batting pool is empty".into()));
        }
        if !(1..=INNINGS_BALLS).contains(&self.balls) {
            return Err(EngineError::InvalidScenario(format!(
                "balls remaining must be in 1..=120, got {}",
                self.balls
            )));
        }
        if !(1..=10).contains(&self.wickets) {
            return Err(EngineError::InvalidScenario(format!(
                "wickets in hand must be in 1..=10, got {}",
                self.wickets
            )));
        }
        Ok(())
    }

    pub fn check_order(&self, order: &[usize]) -> Result<(), EngineError> {
        let n = self.pool.len();
        if order.len() != n {
            return Err(EngineError::InvalidOrder(format!("order has {} entries, pool has {n}", order.len())));
        }
        let mut seen = vec![false; n];
        for &i in order {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(EngineError::InvalidOrder(format!("{order:?} is not a permutation of 0..{n}")));
            }
        }
        Ok(())
    }

    /// Wickets that can fall before the innings ends, after pool exhaustion.
    pub fn usable_wickets(&self) -> u32 {
        if self.tail.is_some() {
            self.wickets
        } else {
            self.wickets.min(self.pool.len() as u32)
        }
    }

    fn lineup(&self, order: &[usize]) -> Lineup {
        let usable = self.usable_wickets() as usize;
        let mut members: Vec<&PhaseVectors> = Vec::with_capacity(usable + 1);
        members.push(&self.non_striker.profile);
        members.extend(order.iter().take(usable).map(|&i| &self.pool[i].profile));
        if let Some(tail) = &self.tail {
            while members.len() < usable + 1 {
                members.push(tail);
            }
        }
        Lineup {
            probs: members.iter().map(|pv| Phase::ALL.map(|ph| *pv.phase(ph).probs())).collect(),
            cdfs: members.iter().map(|pv| Phase::ALL.map(|ph| pv.phase(ph).cumulative())).collect(),
            usable_wickets: usable as u32,
        }
    }

    fn opening_pair(&self) -> (u16, u16) {
        match self.initial_striker {
            InitialStriker::NewBatsman => (1, 0),
            InitialStriker::FixedNonStriker => (0, 1),
        }
    }
}

/// Index 0 is the fixed non-striker; index 1 walks in now; later indices are
/// replacements in order.
struct Lineup {
    probs: Vec<[[f64; 7]; 3]>,
    cdfs: Vec<[[f64; 7]; 3]>,
    usable_wickets: u32,
}

struct BattingInnings<'a> {
    scenario: &'a BattingScenario,
    lineup: Lineup,
}

struct BatState {
    state: MatchState,
    striker: u16,
    non_striker: u16,
    next_in: u16,
    runs: u32,
    balls: u32,
}

impl Innings for BattingInnings<'_> {
    type State = BatState;

    fn start(&self) -> BatState {
        let (striker, non_striker) = self.scenario.opening_pair();
        BatState {
            state: MatchState::new(self.scenario.runs_required, self.scenario.balls, self.lineup.usable_wickets),
            striker,
            non_striker,
            next_in: 2,
            runs: 0,
            balls: 0,
        }
    }

    fn balls(&self) -> u32 {
        self.scenario.balls
    }

    #[inline]
    fn step(&self, st: &mut BatState, ctx: &BallCtx, u: f64) -> Step {
        let o = sample_outcome(&self.lineup.cdfs[st.striker as usize][ctx.phase.index()], u);
        st.state = match transition(st.state, o, Perspective::Batting) {
            Ok(s) => s,
            Err(_) => unreachable!("live trajectories are never terminal"),
        };
        st.balls += 1;
        if o == Outcome::Wicket {
            if st.state.w == 0 {
                return Step::Finished { success: false };
            }
            st.striker = st.next_in;
            st.next_in += 1;
        } else {
            st.runs += o.runs();
            if st.state.r <= 0 {
                return Step::Finished { success: true };
            }
        }
        if swaps_strike(o, ctx.over_ball) {
            std::mem::swap(&mut st.striker, &mut st.non_striker);
        }
        Step::Continue
    }

    fn success_when_balls_run_out(&self) -> bool {
        false
    }

    fn runs_and_balls(&self, st: &BatState) -> (u64, u64) {
        (st.runs as u64, st.balls as u64)
    }
}

pub(crate) fn simulate_batting_tally(
    scenario: &BattingScenario,
    order: &[usize],
    n_sims: u64,
    seed: u64,
) -> Result<Tally, EngineError> {
    scenario.validate_resources()?;
    scenario.check_order(order)?;
    if n_sims == 0 {
        return Err(EngineError::NoSimulations);
    }
    if scenario.runs_required <= 0 {
        return Ok(Tally { successes: n_sims, runs: 0, balls: 0 });
    }
    let innings = BattingInnings { scenario, lineup: scenario.lineup(order) };
    Ok(batch::run(&innings, n_sims, seed))
}

/// Monte Carlo win probability of `order` (indices into the pool).
pub fn simulate_batting(
    scenario: &BattingScenario,
    order: &[usize],
    n_sims: u64,
    seed: u64,
) -> Result<EvalResult, EngineError> {
    let tally = simulate_batting_tally(scenario, order, n_sims, seed)?;
    if scenario.runs_required <= 0 {
        return Ok(EvalResult::certain(true, n_sims, seed));
    }
    Ok(EvalResult::from_successes(tally.successes, n_sims, seed))
}

/// Mean bat runs per legal ball faced across `n_sims` trajectories.
pub fn simulated_runs_per_ball(
    scenario: &BattingScenario,
    order: &[usize],
    n_sims: u64,
    seed: u64,
) -> Result<f64, EngineError> {
    let t = simulate_batting_tally(scenario, order, n_sims, seed)?;
    Ok(if t.balls == 0 { 0.0 } else { t.runs as f64 / t.balls as f64 })
}

/// Exact win probability by backward induction over
/// `(runs, balls, wickets fallen, striker, non-striker)`.
pub fn exact_batting_value(scenario: &BattingScenario, order: &[usize]) -> Result<f64, EngineError> {
    exact_batting_value_with_budget(scenario, order, DEFAULT_STATE_BUDGET)
}

pub fn exact_batting_value_with_budget(
    scenario: &BattingScenario,
    order: &[usize],
    budget: u64,
) -> Result<f64, EngineError> {
    scenario.validate_resources()?;
    scenario.check_order(order)?;
    if scenario.runs_required <= 0 {
        return Ok(1.0);
    }
    let lineup = scenario.lineup(order);
    let r0 = scenario.runs_required as usize;
    let b0 = scenario.balls;
    let wickets = lineup.usable_wickets as usize;

    // crease layouts for k wickets fallen: (striker, non-striker) in 0..k+2, squared grid
    let mut offsets = Vec::with_capacity(wickets + 1);
    let mut width = 0usize;
    for k in 0..wickets {
        offsets.push(width);
        width += (k + 2) * (k + 2);
    }
    let needed = r0 as u64 * width as u64 * b0 as u64;
    if needed > budget {
        return Err(EngineError::Capacity { needed, budget });
    }
    let slot = |k: usize, s: usize, ns: usize| offsets[k] + s * (k + 2) + ns;

    // layer[r * width + slot] for r in 1..=r0; index 0 unused (r <= 0 wins)
    let mut prev = vec![0.0f64; (r0 + 1) * width];
    let mut cur = vec![0.0f64; (r0 + 1) * width];
    for t in 1..=b0 {
        let ball = MatchState::new(0, t, 0);
        let (phase, last_ball) = (ball.phase().index(), ball.over_ball() == 5);
        for k in 0..wickets {
            let dim = k + 2;
            for s in 0..dim {
                for ns in 0..dim {
                    if s == ns {
                        continue;
                    }
                    let p = &lineup.probs[s][phase];
                    let idx = slot(k, s, ns);
                    for r in 1..=r0 {
                        let mut v = 0.0;
                        if k + 1 < wickets {
                            let (a, c) = if last_ball { (ns, k + 2) } else { (k + 2, ns) };
                            v += p[Outcome::Wicket.index()] * prev[r * width + slot(k + 1, a, c)];
                        }
                        for o in &Outcome::ALL[1..] {
                            let runs = o.runs() as usize;
                            let q = p[o.index()];
                            if runs >= r {
                                v += q;
                            } else {
                                let (a, c) = if swaps_strike(*o, ball.over_ball()) { (ns, s) } else { (s, ns) };
                                v += q * prev[(r - runs) * width + slot(k, a, c)];
                            }
                        }
                        cur[r * width + idx] = v;
                    }
                }
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let (s0, ns0) = scenario.opening_pair();
    Ok(prev[r0 * width + slot(0, s0 as usize, ns0 as usize)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::OutcomeVector;

    fn batsman(id: &str, v: OutcomeVector) -> Batsman {
        Batsman { id: id.into(), profile: PhaseVectors::uniform_across_phases(v) }
    }

    fn mix(p6: f64) -> OutcomeVector {
        OutcomeVector::new([0.0, 1.0 - p6, 0.0, 0.0, 0.0, 0.0, p6]).unwrap()
    }

    fn scenario(r: i32, b: u32, striker: OutcomeVector) -> BattingScenario {
        BattingScenario {
            runs_required: r,
            balls: b,
            wickets: 1,
            pool: vec![batsman("S", striker)],
            non_striker: batsman("N", OutcomeVector::point_mass(Outcome::Dot)),
            initial_striker: InitialStriker::NewBatsman,
            tail: None,
        }
    }

    #[test]
    fn point_mass_six_wins_single_ball() {
        let sc = scenario(6, 1, OutcomeVector::point_mass(Outcome::Six));
        assert_eq!(simulate_batting(&sc, &[0], 1000, 1).unwrap().v_hat, 1.0);
        assert_eq!(exact_batting_value(&sc, &[0]).unwrap(), 1.0);
    }

    #[test]
    fn point_mass_wicket_never_wins() {
        let mut sc = scenario(6, 30, OutcomeVector::point_mass(Outcome::Wicket));
        sc.wickets = 3;
        sc.non_striker = batsman("N", OutcomeVector::point_mass(Outcome::Wicket));
        let r = simulate_batting(&sc, &[0], 1000, 1).unwrap();
        assert_eq!((r.v_hat, r.se), (0.0, 0.0));
        assert_eq!(exact_batting_value(&sc, &[0]).unwrap(), 0.0);
    }

    #[test]
    fn single_ball_bernoulli() {
        let q = 0.3;
        let sc = scenario(6, 1, mix(q));
        assert!((exact_batting_value(&sc, &[0]).unwrap() - q).abs() < 1e-15);
        let r = simulate_batting(&sc, &[0], 50_000, 99).unwrap();
        assert!((r.v_hat - q).abs() <= 3.0 * r.se, "{r:?}");
    }

    #[test]
    fn target_already_reached() {
        let sc = scenario(0, 10, mix(0.1));
        assert_eq!(exact_batting_value(&sc, &[0]).unwrap(), 1.0);
        assert_eq!(simulate_batting(&sc, &[0], 10, 1).unwrap().v_hat, 1.0);
        assert!(sc.validate().is_err());
    }

    #[test]
    fn order_and_scenario_validation() {
        let mut sc = scenario(10, 6, mix(0.2));
        sc.pool.push(batsman("T", mix(0.2)));
        assert!(matches!(simulate_batting(&sc, &[0], 10, 1), Err(EngineError::InvalidOrder(_))));
        assert!(matches!(simulate_batting(&sc, &[0, 0], 10, 1), Err(EngineError::InvalidOrder(_))));
        assert!(matches!(simulate_batting(&sc, &[0, 2], 10, 1), Err(EngineError::InvalidOrder(_))));
        assert!(matches!(simulate_batting(&sc, &[1, 0], 0, 1), Err(EngineError::NoSimulations)));
        sc.pool.clear();
        assert!(matches!(sc.validate(), Err(EngineError::InvalidScenario(_))));
    }

    #[test]
    fn capacity_guard() {
        let sc = scenario(100, 120, mix(0.2));
        assert!(matches!(
            exact_batting_value_with_budget(&sc, &[0], 1000),
            Err(EngineError::Capacity { .. })
        ));
    }

    #[test]
    fn pool_exhaustion_ends_innings_without_tail() {
        let w = OutcomeVector::new([0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5]).unwrap();
        let mut sc = scenario(6, 2, w);
        sc.wickets = 5;
        // one pool member: a first-ball wicket ends the chase
        assert!((exact_batting_value(&sc, &[0]).unwrap() - 0.5).abs() < 1e-15);
        // with a tail the replacement gets the second ball
        sc.tail = Some(PhaseVectors::uniform_across_phases(w));
        assert!((exact_batting_value(&sc, &[0]).unwrap() - 0.75).abs() < 1e-15);
        let r = simulate_batting(&sc, &[0], 40_000, 3).unwrap();
        assert!((r.v_hat - 0.75).abs() <= 3.0 * r.se, "{r:?}");
    }
}
