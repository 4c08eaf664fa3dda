//! JSON reports shared by the command line and the HTTP service.
//!
//! Every report echoes the seed, the search configuration and the hashes of
//! its inputs so it can be reproduced bit for bit. Percentages are rounded to
//! one decimal; raw probabilities are kept alongside at full precision.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::batting_opt::{self, BattingSearchConfig, BattingSearchError};
use crate::bowling_opt::{self, BowlingSearchError, SaConfig, SaProgress};
use crate::engine::{self, BowlingPlan, EngineError, EvalResult};
use crate::outcome::Phase;
use crate::rng::{derive_seed, fingerprint};
use crate::scenario::{LoadedScenario, ScenarioError};

const STREAM_EVAL: u64 = 10;
const STREAM_ACTUAL_PLAN: u64 = 11;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Batting(#[from] BattingSearchError),
    #[error(transparent)]
    Bowling(#[from] BowlingSearchError),
    #[error("{0}")]
    Request(String),
}

impl ReportError {
    /// True when the request was well formed but no plan can satisfy it.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            ReportError::Scenario(ScenarioError::Infeasible(_))
                | ReportError::Engine(EngineError::InfeasiblePlan(_))
                | ReportError::Bowling(BowlingSearchError::Infeasible(_))
                | ReportError::Bowling(BowlingSearchError::Engine(EngineError::InfeasiblePlan(_)))
        )
    }
}

/// Rounds a probability to percentage points with one decimal.
pub fn pp(p: f64) -> f64 {
    (p * 1000.0).round() / 10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub scenario_hash: String,
    pub corpus_hash: Option<String>,
    pub engine_version: String,
}

impl Provenance {
    fn new(seed: u64, s: &LoadedScenario) -> Self {
        Provenance {
            seed,
            scenario_hash: s.scenario_hash.clone(),
            corpus_hash: s.corpus_hash.clone(),
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: String,
    /// Batting order or one bowler per remaining over.
    pub decision: Vec<String>,
    pub result: EvalResult,
    pub v_hat_pp: f64,
    pub se_pp: f64,
    pub n_sims: u64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRow {
    pub rank: usize,
    pub order: Vec<String>,
    pub v_hat: f64,
    pub se: f64,
    pub n_sims: u64,
    /// 2 when refined, 1 when only screened.
    pub pass: u8,
    pub v_hat_pp: f64,
    pub actual: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BattingReport {
    pub kind: String,
    pub config: BattingSearchConfig,
    pub ranked: Vec<OrderRow>,
    pub total_sims: u64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverCell {
    pub over: u32,
    pub phase: Phase,
    pub bowler: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRow {
    pub rank: usize,
    pub grid: Vec<OverCell>,
    pub fast_v_hat: f64,
    pub fast_se: f64,
    pub refined_v_hat: f64,
    pub refined_se: f64,
    pub refined_pp: f64,
    pub actual: bool,
    pub initial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowlingReport {
    pub kind: String,
    pub config: SaConfig,
    pub ranked: Vec<PlanRow>,
    pub accepted_moves: usize,
    pub empty_proposals: usize,
    pub distinct_plans: usize,
    pub total_sims: u64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SearchConfig {
    Batting(BattingSearchConfig),
    Bowling(SaConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RankedTable {
    Orders(Vec<OrderRow>),
    Plans(Vec<PlanRow>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub kind: String,
    pub actual_decision: Vec<String>,
    pub optimal_decision: Vec<String>,
    pub actual: EvalResult,
    pub optimal: EvalResult,
    /// `optimal.v_hat - actual.v_hat`.
    pub gap: f64,
    pub gap_pp: f64,
    pub actual_pp: f64,
    pub optimal_pp: f64,
    /// Gap over the pooled standard error of the two estimates.
    pub z: f64,
    pub ranked: RankedTable,
    pub config: SearchConfig,
    pub provenance: Provenance,
}

fn batting_case(s: &LoadedScenario) -> Result<&crate::scenario::BattingCase, ReportError> {
    s.batting().ok_or_else(|| ReportError::Request("scenario kind is bowling, expected batting".into()))
}

fn bowling_case(s: &LoadedScenario) -> Result<&crate::scenario::BowlingCase, ReportError> {
    s.bowling().ok_or_else(|| ReportError::Request("scenario kind is batting, expected bowling".into()))
}

fn order_names(s: &LoadedScenario, order: &[usize]) -> Vec<String> {
    let pool = &s.batting().expect("batting scenario").scenario.pool;
    order.iter().map(|&i| pool[i].id.clone()).collect()
}

fn plan_names(s: &LoadedScenario, plan: &BowlingPlan) -> Vec<String> {
    let bowlers = &s.bowling().expect("bowling scenario").scenario.bowlers;
    plan.assignment.iter().map(|&j| bowlers[j].id.clone()).collect()
}

fn grid(s: &LoadedScenario, plan: &BowlingPlan) -> Vec<OverCell> {
    let sc = &s.bowling().expect("bowling scenario").scenario;
    sc.slots
        .iter()
        .zip(plan_names(s, plan))
        .map(|(&over, bowler)| OverCell { over, phase: Phase::of_over_unchecked(over), bowler })
        .collect()
}

/// Evaluates a batting order, or the scenario's actual order when `order` is `None`.
pub fn evaluate_batting(
    s: &LoadedScenario,
    order: Option<&[String]>,
    n_sims: u64,
    seed: u64,
) -> Result<EvalReport, ReportError> {
    let case = batting_case(s)?;
    let order = match order {
        Some(ids) => s.order_from_ids(ids)?,
        None => case
            .actual_order
            .clone()
            .ok_or_else(|| ReportError::Request("no order given and the scenario has no actual_decision".into()))?,
    };
    let result = engine::simulate_batting(&case.scenario, &order, n_sims, derive_seed(seed, &[STREAM_EVAL]))?;
    Ok(EvalReport {
        kind: "batting".into(),
        decision: order_names(s, &order),
        v_hat_pp: pp(result.v_hat),
        se_pp: pp(result.se),
        n_sims,
        result,
        provenance: Provenance::new(seed, s),
    })
}

/// Evaluates a bowling plan, or the scenario's actual plan when `plan` is `None`.
pub fn evaluate_bowling(
    s: &LoadedScenario,
    plan: Option<&[String]>,
    n_sims: u64,
    seed: u64,
) -> Result<EvalReport, ReportError> {
    let case = bowling_case(s)?;
    let plan = match plan {
        Some(ids) => s.plan_from_ids(ids)?,
        None => case
            .actual_plan
            .clone()
            .ok_or_else(|| ReportError::Request("no plan given and the scenario has no actual_decision".into()))?,
    };
    let result = engine::simulate_bowling(&case.scenario, &plan, n_sims, derive_seed(seed, &[STREAM_EVAL]))?;
    Ok(EvalReport {
        kind: "bowling".into(),
        decision: plan_names(s, &plan),
        v_hat_pp: pp(result.v_hat),
        se_pp: pp(result.se),
        n_sims,
        result,
        provenance: Provenance::new(seed, s),
    })
}

fn order_rows(
    s: &LoadedScenario,
    actual: Option<&Vec<usize>>,
    res: &batting_opt::BattingSearchResult,
) -> Vec<OrderRow> {
    res.ranked
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let v = c.value();
            OrderRow {
                rank: i + 1,
                order: order_names(s, &c.order),
                v_hat: v.v_hat,
                se: v.se,
                n_sims: v.n_sims,
                pass: if c.pass2.is_some() { 2 } else { 1 },
                v_hat_pp: pp(v.v_hat),
                actual: actual == Some(&c.order),
            }
        })
        .collect()
}

fn plan_rows(s: &LoadedScenario, actual: Option<&BowlingPlan>, res: &bowling_opt::SaResult) -> Vec<PlanRow> {
    res.ranked
        .iter()
        .enumerate()
        .map(|(i, c)| PlanRow {
            rank: i + 1,
            grid: grid(s, &c.plan),
            fast_v_hat: c.fast.v_hat,
            fast_se: c.fast.se,
            refined_v_hat: c.refined.v_hat,
            refined_se: c.refined.se,
            refined_pp: pp(c.refined.v_hat),
            actual: actual == Some(&c.plan),
            initial: c.plan == res.initial,
        })
        .collect()
}

pub fn optimize_batting(s: &LoadedScenario, config: &BattingSearchConfig) -> Result<BattingReport, ReportError> {
    let case = batting_case(s)?;
    let res = batting_opt::optimize_batting(&case.scenario, config)?;
    Ok(BattingReport {
        kind: "batting".into(),
        config: *config,
        ranked: order_rows(s, case.actual_order.as_ref(), &res),
        total_sims: res.total_sims,
        provenance: Provenance::new(config.seed, s),
    })
}

pub fn optimize_bowling(
    s: &LoadedScenario,
    config: &SaConfig,
    every: usize,
    progress: impl FnMut(SaProgress),
) -> Result<BowlingReport, ReportError> {
    let case = bowling_case(s)?;
    let res = bowling_opt::optimize_bowling_with_progress(&case.scenario, config, every, progress)?;
    let ranked = plan_rows(s, case.actual_plan.as_ref(), &res);
    Ok(BowlingReport {
        kind: "bowling".into(),
        config: *config,
        ranked,
        accepted_moves: res.accepted,
        empty_proposals: res.empty_proposals,
        distinct_plans: res.distinct_plans,
        total_sims: res.total_sims,
        provenance: Provenance::new(config.seed, s),
    })
}

fn pooled_z(gap: f64, a: &EvalResult, b: &EvalResult) -> f64 {
    let se = ((a.se * a.se + b.se * b.se) / 2.0).sqrt();
    if se == 0.0 {
        return 0.0;
    }
    bowling_opt::audit_z_score(gap, se)
}

pub fn audit_batting(s: &LoadedScenario, config: &BattingSearchConfig) -> Result<AuditReport, ReportError> {
    let case = batting_case(s)?;
    let actual_order = case
        .actual_order
        .clone()
        .ok_or_else(|| ReportError::Request("audit needs actual_decision in the scenario".into()))?;
    let res = batting_opt::optimize_batting(&case.scenario, config)?;
    let optimal = *res.best().value();
    let actual = batting_opt::evaluate_actual_order(&case.scenario, &actual_order, config)?;
    let gap = optimal.v_hat - actual.v_hat;
    Ok(AuditReport {
        kind: "batting".into(),
        actual_decision: order_names(s, &actual_order),
        optimal_decision: order_names(s, &res.best().order),
        gap,
        gap_pp: pp(gap),
        actual_pp: pp(actual.v_hat),
        optimal_pp: pp(optimal.v_hat),
        z: pooled_z(gap, &actual, &optimal),
        actual,
        optimal,
        ranked: RankedTable::Orders(order_rows(s, Some(&actual_order), &res)),
        config: SearchConfig::Batting(*config),
        provenance: Provenance::new(config.seed, s),
    })
}

pub fn audit_bowling(s: &LoadedScenario, config: &SaConfig) -> Result<AuditReport, ReportError> {
    let case = bowling_case(s)?;
    let actual_plan = case
        .actual_plan
        .clone()
        .ok_or_else(|| ReportError::Request("audit needs actual_decision in the scenario".into()))?;
    let res = bowling_opt::optimize_bowling(&case.scenario, config)?;
    let best = res.best();
    let seed = derive_seed(config.seed, &[STREAM_ACTUAL_PLAN, fingerprint(&actual_plan.assignment)]);
    let actual = engine::simulate_bowling(&case.scenario, &actual_plan, config.n_refine, seed)?;
    let optimal = best.refined;
    let gap = optimal.v_hat - actual.v_hat;
    let ranked = plan_rows(s, Some(&actual_plan), &res);
    Ok(AuditReport {
        kind: "bowling".into(),
        actual_decision: plan_names(s, &actual_plan),
        optimal_decision: plan_names(s, &best.plan),
        gap,
        gap_pp: pp(gap),
        actual_pp: pp(actual.v_hat),
        optimal_pp: pp(optimal.v_hat),
        z: pooled_z(gap, &actual, &optimal),
        actual,
        optimal,
        ranked: RankedTable::Plans(ranked),
        config: SearchConfig::Bowling(*config),
        provenance: Provenance::new(config.seed, s),
    })
}
