//! Scenario files: a match state at an intervention point, the players
//! available, and optionally the decision actually taken.
//!
//! Player profiles are given inline, either as full outcome vectors or as
//! published summaries (strike rate or economy rate plus dismissal
//! probability) completed against per-phase population shapes, or are looked
//! up in a profile store by id.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    BattingScenario, Batsman, Bowler, BowlingPlan, BowlingScenario, EngineError, InitialStriker,
};
use crate::ingest::Role;
use crate::outcome::Phase;
use crate::profiles::{corpus_hash, derive_stats, fit_profile_from_summary, OutcomeVector, PhaseVectors, ProfileStore};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    /// Schema violation; `field` is a JSON path such as `batting.pool[2].phases.MI.sr`.
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("{field}: unknown player {id:?}")]
    UnknownPlayer { field: String, id: String },
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
}

impl ScenarioError {
    fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Field { field: field.into(), message: message.into() }
    }

    /// JSON path of the offending field, when there is one.
    pub fn field_path(&self) -> Option<&str> {
        match self {
            ScenarioError::Field { field, .. } | ScenarioError::UnknownPlayer { field, .. } => Some(field),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Batting,
    Bowling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intervention {
    /// Runs the batting side still needs (the bowling side's runs to defend).
    pub runs: i32,
    /// Legal balls remaining.
    pub balls: u32,
    /// Wickets in hand for the batting side.
    pub wickets: u32,
}

/// One phase of an inline profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum PhaseInput {
    Vector { vector: [f64; 7] },
    StrikeRate { sr: f64, p_w: f64 },
    Economy { er: f64, p_w: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerInput {
    pub id: String,
    /// Take every phase from the profile store.
    #[serde(default)]
    pub from_store: bool,
    /// Inline phases; a missing phase uses the population shape.
    #[serde(default)]
    pub phases: BTreeMap<Phase, PhaseInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowlerInput {
    #[serde(flatten)]
    pub player: PlayerInput,
    pub quota: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailSpec {
    /// Population shape of each phase.
    Population,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BattingBlock {
    pub pool: Vec<PlayerInput>,
    pub non_striker: PlayerInput,
    #[serde(default)]
    pub initial_striker: InitialStriker,
    #[serde(default)]
    pub tail: Option<TailSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BowlingBlock {
    pub slots: Vec<u32>,
    pub bowlers: Vec<BowlerInput>,
    #[serde(default)]
    pub prev_bowler: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ActualDecision {
    Order(Vec<String>),
    Plan(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub kind: ScenarioKind,
    #[serde(default)]
    pub name: Option<String>,
    pub intervention: Intervention,
    /// Population outcome shape per phase, used to complete summaries.
    #[serde(default)]
    pub shapes: BTreeMap<Phase, OutcomeVector>,
    #[serde(default)]
    pub batting: Option<BattingBlock>,
    #[serde(default)]
    pub bowling: Option<BowlingBlock>,
    #[serde(default)]
    pub actual_decision: Option<ActualDecision>,
}

/// How well a fitted vector reproduces its published summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub player: String,
    pub phase: Phase,
    pub target_rate: f64,
    pub fitted_rate: f64,
    pub target_p_w: f64,
    pub fitted_p_w: f64,
    /// Largest absolute difference across rate and p_w.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BattingCase {
    pub scenario: BattingScenario,
    pub actual_order: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowlingCase {
    pub scenario: BowlingScenario,
    pub actual_plan: Option<BowlingPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Case {
    Batting(BattingCase),
    Bowling(BowlingCase),
}

/// A validated scenario with every profile resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadedScenario {
    pub name: Option<String>,
    pub case: Case,
    pub fits: Vec<FitRecord>,
    /// SHA-256 of the compact JSON form of the scenario.
    pub scenario_hash: String,
    /// SHA-256 of the corpus behind the store, when the store was used.
    pub corpus_hash: Option<String>,
}

impl LoadedScenario {
    pub fn batting(&self) -> Option<&BattingCase> {
        match &self.case {
            Case::Batting(c) => Some(c),
            Case::Bowling(_) => None,
        }
    }

    pub fn bowling(&self) -> Option<&BowlingCase> {
        match &self.case {
            Case::Bowling(c) => Some(c),
            Case::Batting(_) => None,
        }
    }

    /// Resolves player ids to a batting order.
    pub fn order_from_ids(&self, ids: &[String]) -> Result<Vec<usize>, ScenarioError> {
        let c = self.batting().ok_or_else(|| ScenarioError::field("kind", "scenario is not a batting scenario"))?;
        let pool: Vec<&str> = c.scenario.pool.iter().map(|b| b.id.as_str()).collect();
        let order = resolve_ids(ids, &pool, "order")?;
        c.scenario.check_order(&order).map_err(|e| ScenarioError::field("order", e.to_string()))?;
        Ok(order)
    }

    /// Resolves player ids to a bowling plan and checks it is feasible.
    pub fn plan_from_ids(&self, ids: &[String]) -> Result<BowlingPlan, ScenarioError> {
        let c = self.bowling().ok_or_else(|| ScenarioError::field("kind", "scenario is not a bowling scenario"))?;
        let names: Vec<&str> = c.scenario.bowlers.iter().map(|b| b.id.as_str()).collect();
        let plan = BowlingPlan::new(resolve_ids(ids, &names, "plan")?);
        if let Some(v) = c.scenario.violation(&plan) {
            return Err(ScenarioError::Infeasible(v));
        }
        Ok(plan)
    }
}

fn resolve_ids(ids: &[String], names: &[&str], field: &str) -> Result<Vec<usize>, ScenarioError> {
    ids.iter()
        .enumerate()
        .map(|(k, id)| {
            names.iter().position(|n| n == id).ok_or_else(|| ScenarioError::UnknownPlayer {
                field: format!("{field}[{k}]"),
                id: id.clone(),
            })
        })
        .collect()
}

pub fn load_scenario(path: &Path, store: Option<&ProfileStore>) -> Result<LoadedScenario, ScenarioError> {
    let bytes = std::fs::read(path)?;
    parse_scenario(&bytes, store)
}

pub fn parse_scenario(bytes: &[u8], store: Option<&ProfileStore>) -> Result<LoadedScenario, ScenarioError> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| ScenarioError::field("$", format!("not valid JSON: {e}")))?;
    scenario_from_value(value, store)
}

/// Parses an already-decoded JSON document. The hash is taken over its
/// compact serialization, so formatting and key order do not affect it.
pub fn scenario_from_value(value: serde_json::Value, store: Option<&ProfileStore>) -> Result<LoadedScenario, ScenarioError> {
    let canonical = serde_json::to_vec(&value).expect("JSON values always serialize");
    let file: ScenarioFile = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        ScenarioError::field(if path == "." { "$".to_string() } else { path }, e.into_inner().to_string())
    })?;
    let mut loaded = resolve_scenario(&file, store)?;
    loaded.scenario_hash = corpus_hash(&canonical);
    Ok(loaded)
}

/// Builds engine scenarios from an already-parsed file.
pub fn resolve_scenario(file: &ScenarioFile, store: Option<&ProfileStore>) -> Result<LoadedScenario, ScenarioError> {
    let mut r = Resolver { shapes: &file.shapes, store, fits: Vec::new(), used_store: false };
    let iv = &file.intervention;
    let case = match file.kind {
        ScenarioKind::Batting => {
            let block = file.batting.as_ref().ok_or_else(|| ScenarioError::field("batting", "required for kind batting"))?;
            if file.bowling.is_some() {
                return Err(ScenarioError::field("bowling", "not allowed for kind batting"));
            }
            Case::Batting(r.batting(iv, block, file.actual_decision.as_ref())?)
        }
        ScenarioKind::Bowling => {
            let block = file.bowling.as_ref().ok_or_else(|| ScenarioError::field("bowling", "required for kind bowling"))?;
            if file.batting.is_some() {
                return Err(ScenarioError::field("batting", "not allowed for kind bowling"));
            }
            Case::Bowling(r.bowling(iv, block, file.actual_decision.as_ref())?)
        }
    };
    Ok(LoadedScenario {
        name: file.name.clone(),
        case,
        corpus_hash: r.used_store.then(|| store.map(|s| s.meta.corpus_hash.clone())).flatten(),
        fits: r.fits,
        scenario_hash: String::new(),
    })
}

struct Resolver<'a> {
    shapes: &'a BTreeMap<Phase, OutcomeVector>,
    store: Option<&'a ProfileStore>,
    fits: Vec<FitRecord>,
    used_store: bool,
}

impl Resolver<'_> {
    fn batting(
        &mut self,
        iv: &Intervention,
        block: &BattingBlock,
        actual: Option<&ActualDecision>,
    ) -> Result<BattingCase, ScenarioError> {
        if block.pool.is_empty() {
            return Err(ScenarioError::field("batting.pool", "must name at least one batsman"));
        }
        let pool = block
            .pool
            .iter()
            .enumerate()
            .map(|(i, p)| {
                Ok(Batsman { id: p.id.clone(), profile: self.player(p, Role::Batsman, &format!("batting.pool[{i}]"))? })
            })
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        let non_striker = Batsman {
            id: block.non_striker.id.clone(),
            profile: self.player(&block.non_striker, Role::Batsman, "batting.non_striker")?,
        };
        check_unique(pool.iter().map(|b| b.id.as_str()).chain([non_striker.id.as_str()]), "batting.pool")?;
        let tail = match block.tail {
            Some(TailSpec::Population) => Some(self.population("batting.tail")?),
            None => None,
        };
        let scenario = BattingScenario {
            runs_required: iv.runs,
            balls: iv.balls,
            wickets: iv.wickets,
            pool,
            non_striker,
            initial_striker: block.initial_striker,
            tail,
        };
        scenario.validate().map_err(|e| engine_error("intervention", e))?;
        let actual_order = match actual {
            None => None,
            Some(ActualDecision::Order(ids)) => {
                let names: Vec<&str> = scenario.pool.iter().map(|b| b.id.as_str()).collect();
                let order = resolve_ids(ids, &names, "actual_decision.order")?;
                scenario.check_order(&order).map_err(|e| ScenarioError::field("actual_decision.order", e.to_string()))?;
                Some(order)
            }
            Some(ActualDecision::Plan(_)) => {
                return Err(ScenarioError::field("actual_decision", "a batting scenario takes an order, not a plan"))
            }
        };
        Ok(BattingCase { scenario, actual_order })
    }

    fn bowling(
        &mut self,
        iv: &Intervention,
        block: &BowlingBlock,
        actual: Option<&ActualDecision>,
    ) -> Result<BowlingCase, ScenarioError> {
        if block.bowlers.is_empty() {
            return Err(ScenarioError::field("bowling.bowlers", "must name at least one bowler"));
        }
        let bowlers = block
            .bowlers
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let field = format!("bowling.bowlers[{i}]");
                Ok(Bowler { id: b.player.id.clone(), quota: b.quota, profile: self.player(&b.player, Role::Bowler, &field)? })
            })
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        check_unique(bowlers.iter().map(|b| b.id.as_str()), "bowling.bowlers")?;
        let owned: Vec<String> = bowlers.iter().map(|b| b.id.clone()).collect();
        let names: Vec<&str> = owned.iter().map(String::as_str).collect();
        let prev_bowler = match &block.prev_bowler {
            Some(id) => Some(names.iter().position(|n| n == id).ok_or_else(|| ScenarioError::UnknownPlayer {
                field: "bowling.prev_bowler".into(),
                id: id.clone(),
            })?),
            None => None,
        };
        let scenario = BowlingScenario {
            runs_to_defend: iv.runs,
            balls: iv.balls,
            wickets_to_take: iv.wickets,
            slots: block.slots.clone(),
            bowlers,
            prev_bowler,
            batting_proxy: None,
        };
        if scenario.runs_to_defend < 1 {
            return Err(ScenarioError::field("intervention.runs", "must be >= 1"));
        }
        scenario.validate().map_err(|e| engine_error("bowling", e))?;
        let actual_plan = match actual {
            None => None,
            Some(ActualDecision::Plan(ids)) => {
                let plan = BowlingPlan::new(resolve_ids(ids, &names, "actual_decision.plan")?);
                if let Some(v) = scenario.violation(&plan) {
                    return Err(ScenarioError::field("actual_decision.plan", v));
                }
                Some(plan)
            }
            Some(ActualDecision::Order(_)) => {
                return Err(ScenarioError::field("actual_decision", "a bowling scenario takes a plan, not an order"))
            }
        };
        Ok(BowlingCase { scenario, actual_plan })
    }

    fn population(&self, field: &str) -> Result<PhaseVectors, ScenarioError> {
        let mut out = Vec::with_capacity(3);
        for phase in Phase::ALL {
            let v = self
                .shapes
                .get(&phase)
                .ok_or_else(|| ScenarioError::field(format!("shapes.{phase}"), format!("needed by {field}")))?;
            out.push(*v);
        }
        Ok(PhaseVectors { pp: out[0], mi: out[1], de: out[2] })
    }

    fn player(&mut self, entry: &PlayerInput, role: Role, field: &str) -> Result<PhaseVectors, ScenarioError> {
        if entry.from_store {
            if !entry.phases.is_empty() {
                return Err(ScenarioError::field(format!("{field}.phases"), "not allowed with from_store"));
            }
            let store = self
                .store
                .ok_or_else(|| ScenarioError::field(format!("{field}.from_store"), "no profile store is loaded"))?;
            let set = store.role(role);
            if !set.contains_player(&entry.id) {
                return Err(ScenarioError::UnknownPlayer { field: format!("{field}.id"), id: entry.id.clone() });
            }
            self.used_store = true;
            return set
                .phase_vectors(&entry.id)
                .ok_or_else(|| ScenarioError::field(format!("{field}.id"), "store lacks a population for some phase"));
        }
        let mut out = Vec::with_capacity(3);
        for phase in Phase::ALL {
            let pfield = format!("{field}.phases.{phase}");
            let shape = self.shapes.get(&phase);
            let v = match entry.phases.get(&phase) {
                None => *shape.ok_or_else(|| {
                    ScenarioError::field(&pfield, format!("missing, and shapes.{phase} is not given to fall back on"))
                })?,
                Some(PhaseInput::Vector { vector }) => {
                    OutcomeVector::new(*vector).map_err(|e| ScenarioError::field(format!("{pfield}.vector"), e.to_string()))?
                }
                Some(PhaseInput::StrikeRate { sr, p_w }) => self.fit(&entry.id, phase, &pfield, *sr, *p_w, 1.0, shape)?,
                Some(PhaseInput::Economy { er, p_w }) => self.fit(&entry.id, phase, &pfield, *er, *p_w, 6.0 / 100.0, shape)?,
            };
            out.push(v);
        }
        Ok(PhaseVectors { pp: out[0], mi: out[1], de: out[2] })
    }

    /// Fits a summary whose rate is `scale` times the strike rate.
    #[allow(clippy::too_many_arguments)]
    fn fit(
        &mut self,
        player: &str,
        phase: Phase,
        field: &str,
        rate: f64,
        p_w: f64,
        scale: f64,
        shape: Option<&OutcomeVector>,
    ) -> Result<OutcomeVector, ScenarioError> {
        let shape =
            shape.ok_or_else(|| ScenarioError::field(field, format!("fitting a summary needs shapes.{phase}")))?;
        let v = fit_profile_from_summary(rate / scale, p_w, shape).map_err(|e| ScenarioError::field(field, e.to_string()))?;
        let s = derive_stats(&v);
        let fitted_rate = s.sr * scale;
        self.fits.push(FitRecord {
            player: player.to_string(),
            phase,
            target_rate: rate,
            fitted_rate,
            target_p_w: p_w,
            fitted_p_w: s.p_w,
            residual: (fitted_rate - rate).abs().max((s.p_w - p_w).abs()),
        });
        Ok(v)
    }
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>, field: &str) -> Result<(), ScenarioError> {
    let mut seen = std::collections::BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(ScenarioError::field(field, format!("player {id:?} listed twice")));
        }
    }
    Ok(())
}

fn engine_error(field: &str, e: EngineError) -> ScenarioError {
    match e {
        EngineError::InfeasiblePlan(m) => ScenarioError::Infeasible(m),
        other => ScenarioError::field(field, other.to_string()),
    }
}
