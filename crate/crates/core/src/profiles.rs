//! Phase-specific per-ball outcome distributions.
//!
//! Raw counts are add-one smoothed, then shrunk toward the population average
//! of the same phase and role with weight `n / (n + 50)`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::ops::Index;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ingest::{self, AttributedOutcome, Delivery, Role};
use crate::outcome::{Outcome, Phase};

/// Pseudo-count threshold of the shrinkage weight.
pub const N_MIN: f64 = 50.0;

const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("invalid outcome vector: {0}")]
    InvalidVector(String),
    #[error("no {role:?} data in phase {phase}")]
    EmptyPhase { role: Role, phase: Phase },
    #[error("cannot fit profile: {0}")]
    Infeasible(String),
    #[error("profile store: {0}")]
    Store(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
}

/// Probability distribution over the seven outcomes, indexed by [`Outcome`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct OutcomeVector([f64; 7]);

impl OutcomeVector {
    /// Validates and renormalizes. Entries must be finite and non-negative
    /// and sum to 1 within 1e-9 (so 12-digit round trips are accepted).
    pub fn new(p: [f64; 7]) -> Result<Self, ProfileError> {
        if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(ProfileError::InvalidVector(format!(
                "p({}) = {v} is not a non-negative number",
                Outcome::ALL[i]
            )));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(ProfileError::InvalidVector(format!("entries sum to {sum}, not 1")));
        }
        Ok(OutcomeVector(p.map(|v| v / sum)))
    }

    pub fn point_mass(o: Outcome) -> Self {
        let mut p = [0.0; 7];
        p[o.index()] = 1.0;
        OutcomeVector(p)
    }

    pub fn uniform() -> Self {
        OutcomeVector([1.0 / 7.0; 7])
    }

    pub fn probs(&self) -> &[f64; 7] {
        &self.0
    }

    pub fn get(&self, o: Outcome) -> f64 {
        self.0[o.index()]
    }

    /// Expected bat runs per ball.
    pub fn expected_runs(&self) -> f64 {
        Outcome::ALL.iter().map(|o| self.0[o.index()] * o.runs() as f64).sum()
    }

    /// Cumulative distribution in [`Outcome::ALL`] order, last entry pinned to 1.
    pub fn cumulative(&self) -> [f64; 7] {
        let mut acc = 0.0;
        let mut cdf = self.0.map(|v| {
            acc += v;
            acc
        });
        cdf[6] = 1.0;
        cdf
    }
}

impl Index<Outcome> for OutcomeVector {
    type Output = f64;

    fn index(&self, o: Outcome) -> &f64 {
        &self.0[o.index()]
    }
}

impl<'de> Deserialize<'de> for OutcomeVector {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let raw = <[f64; 7]>::deserialize(de)?;
        OutcomeVector::new(raw).map_err(serde::de::Error::custom)
    }
}

/// One vector per phase for a single player (or a population).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseVectors {
    #[serde(rename = "PP")]
    pub pp: OutcomeVector,
    #[serde(rename = "MI")]
    pub mi: OutcomeVector,
    #[serde(rename = "DE")]
    pub de: OutcomeVector,
}

impl PhaseVectors {
    pub fn uniform_across_phases(v: OutcomeVector) -> Self {
        PhaseVectors { pp: v, mi: v, de: v }
    }

    pub fn from_fn(mut f: impl FnMut(Phase) -> OutcomeVector) -> Self {
        PhaseVectors { pp: f(Phase::PP), mi: f(Phase::MI), de: f(Phase::DE) }
    }

    pub fn phase(&self, phase: Phase) -> &OutcomeVector {
        match phase {
            Phase::PP => &self.pp,
            Phase::MI => &self.mi,
            Phase::DE => &self.de,
        }
    }
}

pub type OutcomeCounts = [u64; 7];

/// Raw outcome counts per (player, phase) for one role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    pub role: Role,
    cells: BTreeMap<(String, Phase), OutcomeCounts>,
}

impl CountTable {
    pub fn new(role: Role) -> Self {
        CountTable { role, cells: BTreeMap::new() }
    }

    pub fn record(&mut self, player: &str, phase: Phase, outcome: Outcome) {
        let cell = self.cells.entry((player.to_string(), phase)).or_insert([0; 7]);
        cell[outcome.index()] += 1;
    }

    pub fn cell(&self, player: &str, phase: Phase) -> Option<&OutcomeCounts> {
        self.cells.get(&(player.to_string(), phase))
    }

    /// Legal deliveries observed for the cell (0 when absent).
    pub fn n(&self, player: &str, phase: Phase) -> u64 {
        self.cell(player, phase).map_or(0, |c| c.iter().sum())
    }

    pub fn cells(&self) -> impl Iterator<Item = (&str, Phase, &OutcomeCounts)> {
        self.cells.iter().map(|((p, ph), c)| (p.as_str(), *ph, c))
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }
}

/// Folds attributed outcomes into a count table. Outcomes carrying a
/// different role are ignored.
pub fn accumulate<'a, I>(outcomes: I, role: Role) -> CountTable
where
    I: IntoIterator<Item = &'a AttributedOutcome>,
{
    let mut table = CountTable::new(role);
    for o in outcomes.into_iter().filter(|o| o.role == role) {
        table.record(&o.player, o.phase, o.outcome);
    }
    table
}

/// Add-one smoothing: `(c + 1) / (n + 7)`.
pub fn laplace_smooth(cell: &OutcomeCounts) -> OutcomeVector {
    let total = cell.iter().sum::<u64>() as f64 + 7.0;
    OutcomeVector(cell.map(|c| (c as f64 + 1.0) / total))
}

/// Ratio of summed smoothed counts across every player with data in `phase`.
pub fn population_average(table: &CountTable, phase: Phase) -> Result<OutcomeVector, ProfileError> {
    let mut num = [0.0f64; 7];
    let mut any = false;
    for (_, ph, cell) in table.cells() {
        if ph != phase {
            continue;
        }
        any = true;
        for (acc, c) in num.iter_mut().zip(cell) {
            *acc += *c as f64 + 1.0;
        }
    }
    if !any {
        return Err(ProfileError::EmptyPhase { role: table.role, phase });
    }
    let den: f64 = num.iter().sum();
    Ok(OutcomeVector(num.map(|v| v / den)))
}

pub fn blend_weight(n: u64) -> f64 {
    let n = n as f64;
    n / (n + N_MIN)
}

/// Convex combination `lambda * individual + (1 - lambda) * population`.
pub fn blend(individual: &OutcomeVector, population: &OutcomeVector, lambda: f64) -> OutcomeVector {
    debug_assert!((0.0..=1.0).contains(&lambda));
    let mut p = [0.0; 7];
    for (i, slot) in p.iter_mut().enumerate() {
        *slot = lambda * individual.0[i] + (1.0 - lambda) * population.0[i];
    }
    OutcomeVector(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedStats {
    /// Runs per 100 balls.
    pub sr: f64,
    /// Runs per over.
    pub er: f64,
    pub p_w: f64,
    pub p_dot: f64,
}

pub fn derive_stats(v: &OutcomeVector) -> DerivedStats {
    let sr = 100.0 * v.expected_runs();
    DerivedStats { sr, er: 0.06 * sr, p_w: v[Outcome::Wicket], p_dot: v[Outcome::Dot] }
}

const SCORING: [Outcome; 5] = [Outcome::One, Outcome::Two, Outcome::Three, Outcome::Four, Outcome::Six];

/// Completes a published (strike rate, dismissal probability) pair into a full
/// vector. The scoring outcomes keep the proportions of `shape`; the dot ball
/// absorbs whatever probability is left.
pub fn fit_profile_from_summary(
    sr_target: f64,
    p_w_target: f64,
    shape: &OutcomeVector,
) -> Result<OutcomeVector, ProfileError> {
    if !(0.0..1.0).contains(&p_w_target) {
        return Err(ProfileError::Infeasible(format!("p_w {p_w_target} must lie in [0, 1)")));
    }
    if !(sr_target.is_finite() && sr_target >= 0.0) {
        return Err(ProfileError::Infeasible(format!("strike rate {sr_target} must be >= 0")));
    }
    let shape_mass: f64 = SCORING.iter().map(|&o| shape[o]).sum();
    let shape_runs: f64 = SCORING.iter().map(|&o| shape[o] * o.runs() as f64).sum();
    let runs_per_ball = sr_target / 100.0;

    let mut p = [0.0; 7];
    p[Outcome::Wicket.index()] = p_w_target;
    let scoring_mass = if runs_per_ball == 0.0 {
        0.0
    } else {
        if shape_mass <= 0.0 {
            return Err(ProfileError::Infeasible(
                "scoring mass >= 0: shape has no scoring outcomes to scale".into(),
            ));
        }
        // scale s on the normalized scoring shape: s * (shape_runs / shape_mass) = runs_per_ball
        let s = runs_per_ball * shape_mass / shape_runs;
        for &o in &SCORING {
            p[o.index()] = s * shape[o] / shape_mass;
        }
        s
    };
    let dot = 1.0 - p_w_target - scoring_mass;
    if dot < -1e-12 {
        return Err(ProfileError::Infeasible(format!(
            "dot mass >= 0 violated: strike rate {sr_target} with p_w {p_w_target} needs scoring mass {scoring_mass:.6}, leaving {dot:.6} for dots"
        )));
    }
    p[Outcome::Dot.index()] = dot.max(0.0);
    Ok(OutcomeVector(p))
}

/// Blended profile of one player in one phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerPhaseProfile {
    pub player: String,
    pub phase: Phase,
    pub n: u64,
    pub lambda: f64,
    pub vector: OutcomeVector,
    pub sr: f64,
    pub er: f64,
    pub p_w: f64,
    pub p_dot: f64,
}

impl PlayerPhaseProfile {
    fn new(player: &str, phase: Phase, n: u64, lambda: f64, vector: OutcomeVector) -> Self {
        let s = derive_stats(&vector);
        PlayerPhaseProfile {
            player: player.to_string(),
            phase,
            n,
            lambda,
            vector,
            sr: s.sr,
            er: s.er,
            p_w: s.p_w,
            p_dot: s.p_dot,
        }
    }
}

/// Immutable set of blended profiles for one role, plus the per-phase
/// population averages used for players with no data.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    pub role: Role,
    pub population: BTreeMap<Phase, OutcomeVector>,
    profiles: BTreeMap<(String, Phase), PlayerPhaseProfile>,
}

impl ProfileSet {
    pub fn from_counts(table: &CountTable) -> Self {
        let population: BTreeMap<Phase, OutcomeVector> = Phase::ALL
            .iter()
            .filter_map(|&ph| population_average(table, ph).ok().map(|v| (ph, v)))
            .collect();
        let mut profiles = BTreeMap::new();
        for (player, phase, cell) in table.cells() {
            let n: u64 = cell.iter().sum();
            let lambda = blend_weight(n);
            let vector = blend(&laplace_smooth(cell), &population[&phase], lambda);
            profiles.insert(
                (player.to_string(), phase),
                PlayerPhaseProfile::new(player, phase, n, lambda, vector),
            );
        }
        ProfileSet { role: table.role, population, profiles }
    }

    pub fn get(&self, player: &str, phase: Phase) -> Option<&PlayerPhaseProfile> {
        self.profiles.get(&(player.to_string(), phase))
    }

    pub fn contains_player(&self, player: &str) -> bool {
        Phase::ALL.iter().any(|&ph| self.get(player, ph).is_some())
    }

    pub fn iter(&self) -> impl Iterator<Item = &PlayerPhaseProfile> {
        self.profiles.values()
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    /// Vectors for all three phases; a phase without data falls back to the
    /// population average (weight 0 on the individual).
    pub fn phase_vectors(&self, player: &str) -> Option<PhaseVectors> {
        if !self.contains_player(player) {
            return None;
        }
        let mut missing = false;
        let pv = PhaseVectors::from_fn(|ph| match self.get(player, ph) {
            Some(p) => p.vector,
            None => match self.population.get(&ph) {
                Some(v) => *v,
                None => {
                    missing = true;
                    OutcomeVector::uniform()
                }
            },
        });
        (!missing).then_some(pv)
    }

    /// Profile record for a player, including the λ = 0 population fallback.
    pub fn profile_or_population(&self, player: &str, phase: Phase) -> Option<PlayerPhaseProfile> {
        match self.get(player, phase) {
            Some(p) => Some(p.clone()),
            None => self
                .population
                .get(&phase)
                .map(|v| PlayerPhaseProfile::new(player, phase, 0, 0.0, *v)),
        }
    }
}

/// Batsman and bowler profile sets built from one corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileStore {
    pub batsmen: ProfileSet,
    pub bowlers: ProfileSet,
    pub meta: StoreMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub corpus_hash: String,
    pub exclude: Vec<String>,
    pub n_min: f64,
    pub deliveries: usize,
    pub legal_deliveries: usize,
    pub dropped_five_runs: usize,
    pub row_errors: usize,
    pub population: BTreeMap<Role, BTreeMap<Phase, OutcomeVector>>,
}

pub fn corpus_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl ProfileStore {
    /// Builds both role profile sets from raw CSV bytes.
    pub fn build(corpus: &[u8], exclude: &[String]) -> Result<Self, ProfileError> {
        let parsed = ingest::parse_deliveries(corpus)?;
        let row_errors = parsed.errors.len();
        let deliveries = ingest::exclude_matches(parsed.deliveries, exclude);
        Ok(Self::from_deliveries(&deliveries, corpus_hash(corpus), exclude, row_errors))
    }

    pub fn from_deliveries(
        deliveries: &[Delivery],
        corpus_hash: String,
        exclude: &[String],
        row_errors: usize,
    ) -> Self {
        let legal: Vec<&Delivery> = deliveries.iter().filter(|d| ingest::is_legal(d)).collect();
        let bat: Vec<AttributedOutcome> = legal.iter().filter_map(|d| ingest::attribute_batsman(d)).collect();
        let bowl: Vec<AttributedOutcome> = legal.iter().filter_map(|d| ingest::attribute_bowler(d)).collect();
        let batsmen = ProfileSet::from_counts(&accumulate(&bat, Role::Batsman));
        let bowlers = ProfileSet::from_counts(&accumulate(&bowl, Role::Bowler));
        let meta = StoreMeta {
            corpus_hash,
            exclude: exclude.to_vec(),
            n_min: N_MIN,
            deliveries: deliveries.len(),
            legal_deliveries: legal.len(),
            dropped_five_runs: legal.iter().filter(|d| d.runs_batsman == 5).count(),
            row_errors,
            population: BTreeMap::from([
                (Role::Batsman, batsmen.population.clone()),
                (Role::Bowler, bowlers.population.clone()),
            ]),
        };
        ProfileStore { batsmen, bowlers, meta }
    }

    pub fn role(&self, role: Role) -> &ProfileSet {
        match role {
            Role::Batsman => &self.batsmen,
            Role::Bowler => &self.bowlers,
        }
    }

    /// Writes `batsmen.csv`, `bowlers.csv` and `store.json` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), ProfileError> {
        fs::create_dir_all(dir)?;
        write_profile_csv(&self.batsmen, &dir.join("batsmen.csv"))?;
        write_profile_csv(&self.bowlers, &dir.join("bowlers.csv"))?;
        let mut f = fs::File::create(dir.join("store.json"))?;
        serde_json::to_writer_pretty(&mut f, &self.meta)?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self, ProfileError> {
        let meta: StoreMeta = serde_json::from_slice(&fs::read(dir.join("store.json"))?)?;
        let pop = |role: Role| meta.population.get(&role).cloned().unwrap_or_default();
        let batsmen = read_profile_csv(&dir.join("batsmen.csv"), Role::Batsman, pop(Role::Batsman))?;
        let bowlers = read_profile_csv(&dir.join("bowlers.csv"), Role::Bowler, pop(Role::Bowler))?;
        Ok(ProfileStore { batsmen, bowlers, meta })
    }
}

const STORE_HEADER: [&str; 11] = ["player", "phase", "n", "lambda", "pW", "p0", "p1", "p2", "p3", "p4", "p6"];

fn sig12(v: f64) -> String {
    format!("{v:.11e}")
}

fn write_profile_csv(set: &ProfileSet, path: &Path) -> Result<(), ProfileError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(STORE_HEADER)?;
    for p in set.iter() {
        let mut row = vec![p.player.clone(), p.phase.to_string(), p.n.to_string(), sig12(p.lambda)];
        row.extend(p.vector.probs().iter().map(|&v| sig12(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn read_profile_csv(
    path: &Path,
    role: Role,
    population: BTreeMap<Phase, OutcomeVector>,
) -> Result<ProfileSet, ProfileError> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.iter().ne(STORE_HEADER) {
        return Err(ProfileError::Store(format!("{} has an unexpected header", path.display())));
    }
    let mut profiles = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        let bad = |what: &str| ProfileError::Store(format!("{}: bad {what} in {:?}", path.display(), rec));
        let phase: Phase = rec[1].parse().map_err(|_| bad("phase"))?;
        let n: u64 = rec[2].parse().map_err(|_| bad("n"))?;
        let lambda: f64 = rec[3].parse().map_err(|_| bad("lambda"))?;
        let mut p = [0.0; 7];
        for (i, slot) in p.iter_mut().enumerate() {
            *slot = rec[4 + i].parse().map_err(|_| bad("probability"))?;
        }
        let vector = OutcomeVector::new(p)?;
        let player = rec[0].to_string();
        profiles.insert(
            (player.clone(), phase),
            PlayerPhaseProfile::new(&player, phase, n, lambda, vector),
        );
    }
    Ok(ProfileSet { role, population, profiles })
}
