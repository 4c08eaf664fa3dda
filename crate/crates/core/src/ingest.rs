//! Ball-by-ball CSV ingestion, legality filtering, phase assignment and
//! outcome attribution.
//!
//! Attribution differs by role. A batsman is charged with a wicket only when
//! they are the player out, so a run-out of the non-striker leaves the striker
//! with a runs outcome. A bowler is credited with every dismissal except a
//! run-out.

use std::collections::HashSet;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::outcome::{Outcome, Phase};

pub const REQUIRED_COLUMNS: [&str; 12] = [
    "match_id",
    "innings",
    "over",
    "ball",
    "batsman",
    "non_striker",
    "bowler",
    "runs_batsman",
    "extras",
    "extra_kind",
    "wicket_player_out",
    "dismissal_type",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtraKind {
    None,
    Wide,
    NoBall,
    Bye,
    LegBye,
}

impl ExtraKind {
    fn parse(raw: &str) -> Option<ExtraKind> {
        let key: String = raw
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|c| c.is_ascii_alphabetic())
            .collect();
        match key.as_str() {
            "" | "none" => Some(ExtraKind::None),
            "wide" | "wides" => Some(ExtraKind::Wide),
            "noball" | "noballs" => Some(ExtraKind::NoBall),
            "bye" | "byes" => Some(ExtraKind::Bye),
            "legbye" | "legbyes" => Some(ExtraKind::LegBye),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DismissalType {
    Bowled,
    Caught,
    Lbw,
    Stumped,
    RunOut,
    Other,
}

impl DismissalType {
    fn parse(raw: &str) -> DismissalType {
        match raw.trim().to_ascii_lowercase().as_str() {
            "bowled" => DismissalType::Bowled,
            "caught" | "caught and bowled" => DismissalType::Caught,
            "lbw" => DismissalType::Lbw,
            "stumped" => DismissalType::Stumped,
            "run out" | "run_out" | "runout" => DismissalType::RunOut,
            _ => DismissalType::Other,
        }
    }
}

/// One ball-by-ball record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delivery {
    pub match_id: String,
    pub innings: u8,
    pub over_idx: u32,
    pub ball_in_over: u32,
    pub batsman: String,
    pub non_striker: String,
    pub bowler: String,
    pub runs_batsman: u32,
    pub extras: u32,
    pub extra_kind: ExtraKind,
    pub wicket_player_out: Option<String>,
    pub dismissal_type: Option<DismissalType>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Batsman,
    Bowler,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttributedOutcome {
    pub player: String,
    pub role: Role,
    pub phase: Phase,
    pub outcome: Outcome,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("CSV header is missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("could not read CSV header: {0}")]
    Header(#[source] csv::Error),
    #[error("over index {0} is outside 0..=19")]
    OverOutOfRange(u32),
}

/// A data row that could not be turned into a [`Delivery`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowError {
    /// 1-based line number in the source, header included.
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedCorpus {
    pub deliveries: Vec<Delivery>,
    pub errors: Vec<RowError>,
}

/// Parses a ball-by-ball CSV. Unknown columns are ignored; malformed rows are
/// collected in [`ParsedCorpus::errors`] with their line numbers.
pub fn parse_deliveries<R: Read>(source: R) -> Result<ParsedCorpus, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader.headers().map_err(IngestError::Header)?.clone();
    let mut cols = [0usize; 12];
    for (slot, name) in cols.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or(IngestError::MissingColumn(name))?;
    }

    let mut out = ParsedCorpus::default();
    for record in reader.records() {
        match record {
            Ok(rec) => {
                let line = rec.position().map(|p| p.line()).unwrap_or(0);
                match parse_row(&rec, &cols) {
                    Ok(d) => out.deliveries.push(d),
                    Err(message) => out.errors.push(RowError { line, message }),
                }
            }
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                out.errors.push(RowError { line, message: e.to_string() });
            }
        }
    }
    Ok(out)
}

fn parse_row(rec: &csv::StringRecord, cols: &[usize; 12]) -> Result<Delivery, String> {
    let field = |i: usize| -> Result<&str, String> {
        rec.get(cols[i])
            .ok_or_else(|| format!("row has no value for `{}`", REQUIRED_COLUMNS[i]))
    };
    let int = |i: usize| -> Result<u32, String> {
        let raw = field(i)?;
        raw.parse::<u32>()
            .map_err(|_| format!("`{}` is not a non-negative integer: {raw:?}", REQUIRED_COLUMNS[i]))
    };
    let name = |i: usize| -> Result<String, String> {
        let raw = field(i)?;
        if raw.is_empty() {
            Err(format!("`{}` is empty", REQUIRED_COLUMNS[i]))
        } else {
            Ok(raw.to_string())
        }
    };
    let optional = |i: usize| -> Result<Option<String>, String> {
        let raw = field(i)?;
        Ok((!raw.is_empty()).then(|| raw.to_string()))
    };

    let match_id = name(0)?;
    let innings = int(1)?;
    if !(1..=2).contains(&innings) {
        return Err(format!("innings must be 1 or 2, got {innings}"));
    }
    let over_idx = int(2)?;
    if over_idx > 19 {
        return Err(format!("over {over_idx} is outside 0..=19"));
    }
    let ball_in_over = int(3)?;
    let batsman = name(4)?;
    let non_striker = name(5)?;
    if batsman == non_striker {
        return Err(format!("batsman and non_striker are both {batsman:?}"));
    }
    let bowler = name(6)?;
    let runs_batsman = int(7)?;
    if runs_batsman > 6 {
        return Err(format!("runs_batsman {runs_batsman} exceeds 6"));
    }
    let extras = int(8)?;
    let raw_kind = field(9)?;
    let extra_kind = ExtraKind::parse(raw_kind)
        .ok_or_else(|| format!("unknown extra_kind {raw_kind:?}"))?;
    let wicket_player_out = optional(10)?;
    let dismissal_type = optional(11)?.map(|d| DismissalType::parse(&d));
    if wicket_player_out.is_some() != dismissal_type.is_some() {
        return Err("wicket_player_out and dismissal_type must be both present or both empty".into());
    }

    Ok(Delivery {
        match_id,
        innings: innings as u8,
        over_idx,
        ball_in_over,
        batsman,
        non_striker,
        bowler,
        runs_batsman,
        extras,
        extra_kind,
        wicket_player_out,
        dismissal_type,
    })
}

/// Wides and no-balls are not legal deliveries; byes and leg-byes are.
pub fn is_legal(d: &Delivery) -> bool {
    !matches!(d.extra_kind, ExtraKind::Wide | ExtraKind::NoBall)
}

pub fn phase_of_over(over_idx: u32) -> Result<Phase, IngestError> {
    if over_idx > 19 {
        return Err(IngestError::OverOutOfRange(over_idx));
    }
    Ok(Phase::of_over_unchecked(over_idx))
}

/// Batsman-side outcome for a legal delivery. `None` for illegal deliveries
/// and for all-run fives, which are dropped from the counts.
pub fn attribute_batsman(d: &Delivery) -> Option<AttributedOutcome> {
    if !is_legal(d) {
        return None;
    }
    let phase = phase_of_over(d.over_idx).ok()?;
    let outcome = if d.wicket_player_out.as_deref() == Some(d.batsman.as_str()) {
        Outcome::Wicket
    } else {
        Outcome::from_runs(d.runs_batsman)?
    };
    Some(AttributedOutcome { player: d.batsman.clone(), role: Role::Batsman, phase, outcome })
}

/// Bowler-side outcome for a legal delivery; run-outs are not credited.
pub fn attribute_bowler(d: &Delivery) -> Option<AttributedOutcome> {
    if !is_legal(d) {
        return None;
    }
    let phase = phase_of_over(d.over_idx).ok()?;
    let bowler_wicket = d.wicket_player_out.is_some()
        && !matches!(d.dismissal_type, Some(DismissalType::RunOut));
    let outcome = if bowler_wicket {
        Outcome::Wicket
    } else {
        Outcome::from_runs(d.runs_batsman)?
    };
    Some(AttributedOutcome { player: d.bowler.clone(), role: Role::Bowler, phase, outcome })
}

/// Drops deliveries from excluded matches (look-ahead protection).
pub fn exclude_matches(deliveries: Vec<Delivery>, exclude: &[String]) -> Vec<Delivery> {
    if exclude.is_empty() {
        return deliveries;
    }
    let set: HashSet<&str> = exclude.iter().map(String::as_str).collect();
    deliveries.into_iter().filter(|d| !set.contains(d.match_id.as_str())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "match_id,innings,over,ball,batsman,non_striker,bowler,runs_batsman,extras,extra_kind,wicket_player_out,dismissal_type\n";

    fn delivery() -> Delivery {
        Delivery {
            match_id: "m1".into(),
            innings: 2,
            over_idx: 7,
            ball_in_over: 2,
            batsman: "A".into(),
            non_striker: "B".into(),
            bowler: "X".into(),
            runs_batsman: 0,
            extras: 0,
            extra_kind: ExtraKind::None,
            wicket_player_out: None,
            dismissal_type: None,
        }
    }

    #[test]
    fn header_only_is_empty() {
        let parsed = parse_deliveries(HEADER.as_bytes()).unwrap();
        assert!(parsed.deliveries.is_empty());
        assert!(parsed.errors.is_empty());
    }

    #[test]
    fn missing_column_is_fatal() {
        let src = "match_id,innings,over,ball,batsman,non_striker,bowler,runs_batsman,extras,extra_kind,wicket_player_out\n";
        match parse_deliveries(src.as_bytes()) {
            Err(IngestError::MissingColumn(c)) => assert_eq!(c, "dismissal_type"),
            other => panic!("expected missing column, got {other:?}"),
        }
    }

    #[test]
    fn wide_row_parses_then_fails_legality() {
        let src = format!("{HEADER}m1,1,3,2,A,B,X,0,1,wide,,\n");
        let parsed = parse_deliveries(src.as_bytes()).unwrap();
        assert_eq!(parsed.deliveries.len(), 1);
        let d = &parsed.deliveries[0];
        assert_eq!(d.extra_kind, ExtraKind::Wide);
        assert!(!is_legal(d));
        assert!(attribute_batsman(d).is_none());
        assert!(attribute_bowler(d).is_none());
    }

    #[test]
    fn malformed_rows_are_collected_with_line_numbers() {
        let src = format!(
            "{HEADER}m1,1,3,2,A,B,X,0,0,,,\nm1,1,three,2,A,B,X,0,0,,,\nm1,1,3,3,A,A,X,0,0,,,\nm1,1,3,4,A,B,X,0,0,,A,\nm1,1,3,5,A,B,X,1,0,,,\n"
        );
        let parsed = parse_deliveries(src.as_bytes()).unwrap();
        assert_eq!(parsed.deliveries.len(), 2);
        let lines: Vec<u64> = parsed.errors.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![3, 4, 5]);
    }

    #[test]
    fn extra_columns_and_quotes_are_accepted() {
        let src = "venue,match_id,innings,over,ball,batsman,non_striker,bowler,runs_batsman,extras,extra_kind,wicket_player_out,dismissal_type\n\"Wankhede, Mumbai\",m9,2,19,5,\"Smith, J\",B,X,6,0,,,\n";
        let parsed = parse_deliveries(src.as_bytes()).unwrap();
        assert!(parsed.errors.is_empty());
        assert_eq!(parsed.deliveries[0].batsman, "Smith, J");
        assert_eq!(parsed.deliveries[0].runs_batsman, 6);
    }

    #[test]
    fn legality() {
        let mut d = delivery();
        assert!(is_legal(&d));
        d.extra_kind = ExtraKind::NoBall;
        assert!(!is_legal(&d));
        d.extra_kind = ExtraKind::Bye;
        assert!(is_legal(&d));
        d.extra_kind = ExtraKind::LegBye;
        assert!(is_legal(&d));
    }

    #[test]
    fn phase_boundaries() {
        assert_eq!(phase_of_over(0).unwrap(), Phase::PP);
        assert_eq!(phase_of_over(5).unwrap(), Phase::PP);
        assert_eq!(phase_of_over(6).unwrap(), Phase::MI);
        assert_eq!(phase_of_over(14).unwrap(), Phase::MI);
        assert_eq!(phase_of_over(15).unwrap(), Phase::DE);
        assert_eq!(phase_of_over(19).unwrap(), Phase::DE);
        assert!(matches!(phase_of_over(20), Err(IngestError::OverOutOfRange(20))));
        let counts = Phase::ALL.map(|p| (0..20).filter(|&o| phase_of_over(o).unwrap() == p).count());
        assert_eq!(counts, [6, 9, 5]);
    }

    #[test]
    fn bowled_striker_is_a_wicket_for_both() {
        let mut d = delivery();
        d.wicket_player_out = Some("A".into());
        d.dismissal_type = Some(DismissalType::Bowled);
        let bat = attribute_batsman(&d).unwrap();
        assert_eq!((bat.player.as_str(), bat.outcome), ("A", Outcome::Wicket));
        let bowl = attribute_bowler(&d).unwrap();
        assert_eq!((bowl.player.as_str(), bowl.outcome), ("X", Outcome::Wicket));
    }

    #[test]
    fn non_striker_run_out_is_runs_for_striker_and_bowler() {
        let mut d = delivery();
        d.runs_batsman = 1;
        d.wicket_player_out = Some("B".into());
        d.dismissal_type = Some(DismissalType::RunOut);
        assert_eq!(attribute_batsman(&d).unwrap().outcome, Outcome::One);
        assert_eq!(attribute_bowler(&d).unwrap().outcome, Outcome::One);
    }

    #[test]
    fn striker_run_out_charges_batsman_not_bowler() {
        let mut d = delivery();
        d.wicket_player_out = Some("A".into());
        d.dismissal_type = Some(DismissalType::RunOut);
        assert_eq!(attribute_batsman(&d).unwrap().outcome, Outcome::Wicket);
        assert_eq!(attribute_bowler(&d).unwrap().outcome, Outcome::Dot);
    }

    #[test]
    fn caught_credits_bowler() {
        let mut d = delivery();
        d.wicket_player_out = Some("A".into());
        d.dismissal_type = Some(DismissalType::Caught);
        let bowl = attribute_bowler(&d).unwrap();
        assert_eq!(bowl.role, Role::Bowler);
        assert_eq!(bowl.outcome, Outcome::Wicket);
        assert_eq!(bowl.phase, Phase::MI);
    }

    #[test]
    fn boundary_and_dot() {
        let mut d = delivery();
        assert_eq!(attribute_bowler(&d).unwrap().outcome, Outcome::Dot);
        d.runs_batsman = 4;
        assert_eq!(attribute_batsman(&d).unwrap().outcome, Outcome::Four);
    }

    #[test]
    fn byes_leave_batsman_outcome_at_bat_runs() {
        let mut d = delivery();
        d.extra_kind = ExtraKind::Bye;
        d.extras = 4;
        assert_eq!(attribute_batsman(&d).unwrap().outcome, Outcome::Dot);
        assert_eq!(attribute_bowler(&d).unwrap().outcome, Outcome::Dot);
    }

    #[test]
    fn five_runs_are_dropped() {
        let mut d = delivery();
        d.runs_batsman = 5;
        assert!(attribute_batsman(&d).is_none());
        assert!(attribute_bowler(&d).is_none());
    }

    #[test]
    fn exclusion_list_filters_matches() {
        let mut other = delivery();
        other.match_id = "m2".into();
        let kept = exclude_matches(vec![delivery(), other], &["m1".to_string()]);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].match_id, "m2");
    }
}
