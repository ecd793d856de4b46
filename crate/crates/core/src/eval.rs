//! Evaluation metrics replayed from verdict logs and benchmark files.
//!
//! * passing rate: share of candidates a verifier labels safe;
//! * precision / recall with `safe` as the positive class, plus the positive
//!   ratio (ground-truth and verifier-deemed variants);
//! * ranking right / false / other rates over four-candidate queries.
//!
//! All percentages are integers rounded half up.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::proposal::TabuAction;
use crate::verifier::VerdictLabel;

/// Schema tag of benchmark files.
pub const BENCHMARK_SCHEMA: &str = "ELSS-B1";

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no log entries match strategy {strategy:?} and model {model:?}")]
    NoMatchingEntries { strategy: Strategy, model: String },
    #[error("entry {candidate_id} has no ground-truth label")]
    MissingGroundTruth { candidate_id: String },
    #[error("{metric} is undefined: zero denominator")]
    UndefinedMetric { metric: &'static str },
    #[error("schema violation at line {line}: {message}")]
    LogSchema { line: usize, message: String },
    #[error("schema violation in query {query_id}: {field}")]
    SchemaViolation { query_id: String, field: String },
    #[error("query {query_id} has {count} candidates, expected 4")]
    NotFourCandidates { query_id: String, count: usize },
    #[error("outcomes and queries do not align: {0}")]
    IdMismatch(String),
    #[error("I/O error: {0}")]
    Io(String),
}

/// `round_half_up(100 · num / den)` in exact integer arithmetic.
pub fn percent(num: usize, den: usize) -> u32 {
    debug_assert!(den > 0);
    ((200 * num + den) / (2 * den)) as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Random,
    Semantic,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(Self::Random),
            "semantic" => Ok(Self::Semantic),
            other => Err(format!("unknown strategy {other:?}")),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Random => "random",
            Self::Semantic => "semantic",
        })
    }
}

/// One verifier decision; optional fields mirror the proposal trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictLogEntry {
    pub candidate_id: String,
    pub strategy: Strategy,
    pub verdict: VerdictLabel,
    pub model_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_label: Option<VerdictLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iteration: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_px: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<TabuAction>,
}

impl VerdictLogEntry {
    pub fn new(candidate_id: impl Into<String>, strategy: Strategy, verdict: VerdictLabel, model_name: impl Into<String>) -> Self {
        Self {
            candidate_id: candidate_id.into(),
            strategy,
            verdict,
            model_name: model_name.into(),
            gt_label: None,
            iteration: None,
            center_px: None,
            response: None,
            reason: None,
            action: None,
        }
    }

    pub fn with_gt(mut self, gt: VerdictLabel) -> Self {
        self.gt_label = Some(gt);
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerdictLog {
    entries: Vec<VerdictLogEntry>,
}

impl VerdictLog {
    /// Builds a log, rejecting duplicate candidate ids within one
    /// (strategy, model) group.
    pub fn new(entries: Vec<VerdictLogEntry>) -> Result<Self, EvalError> {
        let mut seen = HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            if !seen.insert((e.strategy, e.model_name.as_str(), e.candidate_id.as_str())) {
                return Err(EvalError::LogSchema {
                    line: i + 1,
                    message: format!(
                        "duplicate candidate_id {:?} for {:?}/{}",
                        e.candidate_id, e.strategy, e.model_name
                    ),
                });
            }
        }
        Ok(Self { entries })
    }

    /// Line-delimited JSON; blank lines are skipped, line numbers are 1-based.
    pub fn parse_jsonl(text: &str) -> Result<Self, EvalError> {
        let mut entries = Vec::new();
        let mut lines = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: VerdictLogEntry = serde_json::from_str(line).map_err(|e| EvalError::LogSchema {
                line: i + 1,
                message: e.to_string(),
            })?;
            entries.push(entry);
            lines.push(i + 1);
        }
        Self::new(entries).map_err(|e| match e {
            EvalError::LogSchema { line, message } => EvalError::LogSchema {
                line: lines[line - 1],
                message,
            },
            other => other,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
        Self::parse_jsonl(&text)
    }

    pub fn to_jsonl(&self) -> String {
        self.entries
            .iter()
            .map(|e| serde_json::to_string(e).expect("entry serializes") + "\n")
            .collect()
    }

    pub fn entries(&self) -> &[VerdictLogEntry] {
        &self.entries
    }

    pub fn filter(&self, strategy: Option<Strategy>, model: Option<&str>) -> VerdictLog {
        VerdictLog {
            entries: self
                .entries
                .iter()
                .filter(|e| strategy.is_none_or(|s| e.strategy == s))
                .filter(|e| model.is_none_or(|m| e.model_name == m))
                .cloned()
                .collect(),
        }
    }

    /// Distinct (strategy, model) groups present in the log.
    pub fn groups(&self) -> BTreeSet<(Strategy, String)> {
        self.entries
            .iter()
            .map(|e| (e.strategy, e.model_name.clone()))
            .collect()
    }
}

pub fn passing_rate(log: &VerdictLog, strategy: Strategy, model: &str) -> Result<u32, EvalError> {
    let matching = log.filter(Some(strategy), Some(model));
    let total = matching.entries.len();
    if total == 0 {
        return Err(EvalError::NoMatchingEntries {
            strategy,
            model: model.to_string(),
        });
    }
    let safe = matching.entries.iter().filter(|e| e.verdict.is_safe()).count();
    Ok(percent(safe, total))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn from_log(log: &VerdictLog) -> Result<Self, EvalError> {
        let mut c = Self::default();
        for e in &log.entries {
            let gt = e.gt_label.ok_or_else(|| EvalError::MissingGroundTruth {
                candidate_id: e.candidate_id.clone(),
            })?;
            match (e.verdict.is_safe(), gt.is_safe()) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterQuality {
    pub precision: u32,
    pub recall: u32,
    /// Share of candidates that are ground-truth safe.
    pub positive_ratio: u32,
    /// Share of candidates the verifier deemed safe.
    pub predicted_positive_ratio: u32,
    pub counts: ConfusionCounts,
}

pub fn precision_recall_posratio(log: &VerdictLog) -> Result<FilterQuality, EvalError> {
    let c = ConfusionCounts::from_log(log)?;
    let ratio = |num: usize, den: usize, metric: &'static str| {
        if den == 0 {
            Err(EvalError::UndefinedMetric { metric })
        } else {
            Ok(percent(num, den))
        }
    };
    Ok(FilterQuality {
        precision: ratio(c.tp, c.tp + c.fp, "precision")?,
        recall: ratio(c.tp, c.tp + c.fn_, "recall")?,
        positive_ratio: ratio(c.tp + c.fn_, c.total(), "positive_ratio")?,
        predicted_positive_ratio: ratio(c.tp + c.fp, c.total(), "predicted_positive_ratio")?,
        counts: c,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkPoi {
    pub category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub position: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCandidate {
    pub id: String,
    pub image: String,
    /// `[min_x, min_y, max_x, max_y]`.
    pub bbox: [f64; 4],
    #[serde(default)]
    pub pois: Vec<BenchmarkPoi>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub best: String,
    pub worst: String,
    pub labels: BTreeMap<String, VerdictLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkQuery {
    pub query_id: String,
    pub region: String,
    pub candidates: Vec<BenchmarkCandidate>,
    pub ground_truth: GroundTruth,
}

impl BenchmarkQuery {
    pub fn validate(&self) -> Result<(), EvalError> {
        let violation = |field: String| EvalError::SchemaViolation {
            query_id: self.query_id.clone(),
            field,
        };
        if self.candidates.len() != 4 {
            return Err(EvalError::NotFourCandidates {
                query_id: self.query_id.clone(),
                count: self.candidates.len(),
            });
        }
        let ids: BTreeSet<&str> = self.candidates.iter().map(|c| c.id.as_str()).collect();
        if ids.len() != 4 {
            return Err(violation("candidates.id: duplicate candidate ids".into()));
        }
        let gt = &self.ground_truth;
        if gt.best == gt.worst {
            return Err(violation("ground_truth: best and worst must differ".into()));
        }
        for (field, id) in [("ground_truth.best", &gt.best), ("ground_truth.worst", &gt.worst)] {
            if !ids.contains(id.as_str()) {
                return Err(violation(format!("{field}: {id:?} is not a candidate id")));
            }
        }
        if let Some(bad) = gt.labels.keys().find(|k| !ids.contains(k.as_str())) {
            return Err(violation(format!("ground_truth.labels: {bad:?} is not a candidate id")));
        }
        Ok(())
    }

    fn has_candidate(&self, id: &str) -> bool {
        self.candidates.iter().any(|c| c.id == id)
    }
}

/// Parses and validates an `ELSS-B1` benchmark document, keeping file order.
pub fn parse_benchmark(text: &str) -> Result<Vec<BenchmarkQuery>, EvalError> {
    let doc: serde_json::Value = serde_json::from_str(text).map_err(|e| EvalError::SchemaViolation {
        query_id: "-".into(),
        field: e.to_string(),
    })?;
    let top = |field: &str| EvalError::SchemaViolation {
        query_id: "-".into(),
        field: field.into(),
    };
    match doc.get("schema").and_then(|s| s.as_str()) {
        Some(BENCHMARK_SCHEMA) => {}
        Some(other) => return Err(top(&format!("schema: unsupported tag {other:?}"))),
        None => return Err(top("schema: missing")),
    }
    let queries = doc
        .get("queries")
        .and_then(|q| q.as_array())
        .ok_or_else(|| top("queries: missing or not an array"))?;
    queries
        .iter()
        .enumerate()
        .map(|(i, raw)| {
            let id = raw
                .get("query_id")
                .and_then(|v| v.as_str())
                .map_or_else(|| format!("#{i}"), str::to_string);
            let q: BenchmarkQuery = serde_json::from_value(raw.clone()).map_err(|e| EvalError::SchemaViolation {
                query_id: id,
                field: e.to_string(),
            })?;
            q.validate()?;
            Ok(q)
        })
        .collect()
}

pub fn load_benchmark(path: impl AsRef<Path>) -> Result<Vec<BenchmarkQuery>, EvalError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    parse_benchmark(&text)
}

pub fn benchmark_to_json(queries: &[BenchmarkQuery]) -> String {
    serde_json::to_string_pretty(&serde_json::json!({
        "schema": BENCHMARK_SCHEMA,
        "queries": queries,
    }))
    .expect("benchmark serializes")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingOutcome {
    pub query_id: String,
    #[serde(default)]
    pub predicted_best: Option<String>,
    #[serde(default)]
    pub predicted_worst: Option<String>,
    #[serde(default)]
    pub abstained: bool,
}

impl RankingOutcome {
    pub fn decided(query_id: impl Into<String>, best: impl Into<String>, worst: impl Into<String>) -> Self {
        Self {
            query_id: query_id.into(),
            predicted_best: Some(best.into()),
            predicted_worst: Some(worst.into()),
            abstained: false,
        }
    }

    pub fn abstain(query_id: impl Into<String>) -> Self {
        Self {
            query_id: query_id.into(),
            predicted_best: None,
            predicted_worst: None,
            abstained: true,
        }
    }
}

/// Line-delimited JSON outcomes.
pub fn parse_outcomes(text: &str) -> Result<Vec<RankingOutcome>, EvalError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EvalError::LogSchema {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn load_outcomes(path: impl AsRef<Path>) -> Result<Vec<RankingOutcome>, EvalError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    parse_outcomes(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingClass {
    Right,
    False,
    Other,
}

/// Right: both extremes identified. False: the predicted best is the true
/// worst or the predicted worst is the true best. Everything else, including
/// abstentions, is Other.
pub fn classify_outcome(outcome: &RankingOutcome, query: &BenchmarkQuery) -> RankingClass {
    if outcome.abstained {
        return RankingClass::Other;
    }
    let gt = &query.ground_truth;
    let best = outcome.predicted_best.as_deref();
    let worst = outcome.predicted_worst.as_deref();
    if best == Some(gt.best.as_str()) && worst == Some(gt.worst.as_str()) {
        RankingClass::Right
    } else if best == Some(gt.worst.as_str()) || worst == Some(gt.best.as_str()) {
        RankingClass::False
    } else {
        RankingClass::Other
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingMetrics {
    pub right_rate: u32,
    pub false_rate: u32,
    pub other: u32,
    pub right: usize,
    #[serde(rename = "false")]
    pub false_: usize,
    pub other_count: usize,
}

pub fn ranking_metrics(outcomes: &[RankingOutcome], queries: &[BenchmarkQuery]) -> Result<RankingMetrics, EvalError> {
    let by_id: BTreeMap<&str, &BenchmarkQuery> = queries.iter().map(|q| (q.query_id.as_str(), q)).collect();
    if by_id.len() != queries.len() {
        return Err(EvalError::IdMismatch("duplicate query ids in benchmark".into()));
    }
    if outcomes.len() != queries.len() {
        return Err(EvalError::IdMismatch(format!(
            "{} outcomes for {} queries",
            outcomes.len(),
            queries.len()
        )));
    }
    let mut seen = HashSet::new();
    let (mut right, mut false_, mut other) = (0, 0, 0);
    for o in outcomes {
        let q = by_id
            .get(o.query_id.as_str())
            .ok_or_else(|| EvalError::IdMismatch(format!("outcome for unknown query {:?}", o.query_id)))?;
        if !seen.insert(o.query_id.as_str()) {
            return Err(EvalError::IdMismatch(format!("duplicate outcome for {:?}", o.query_id)));
        }
        if o.abstained && (o.predicted_best.is_some() || o.predicted_worst.is_some()) {
            return Err(EvalError::IdMismatch(format!(
                "abstained outcome {:?} carries predictions",
                o.query_id
            )));
        }
        for id in [&o.predicted_best, &o.predicted_worst].into_iter().flatten() {
            if !q.has_candidate(id) {
                return Err(EvalError::IdMismatch(format!(
                    "query {:?} has no candidate {id:?}",
                    o.query_id
                )));
            }
        }
        match classify_outcome(o, q) {
            RankingClass::Right => right += 1,
            RankingClass::False => false_ += 1,
            RankingClass::Other => other += 1,
        }
    }
    let n = outcomes.len();
    if n == 0 {
        return Err(EvalError::UndefinedMetric { metric: "right_rate" });
    }
    Ok(RankingMetrics {
        right_rate: percent(right, n),
        false_rate: percent(false_, n),
        other: percent(other, n),
        right,
        false_,
        other_count: other,
    })
}
