//! Study statistics: intention points, per-group summaries, concern by
//! argument-type selection tables and Pearson chi-square tests comparing
//! the baseline and strategic chatbots.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialogue::{harvest_count, Session, Variant};
use crate::kb::{ArgumentType, Concern, ConcernLabel, KnowledgeBase, Policy, Scope};
use crate::stats::chi_square_sf;

pub use crate::dialogue::intention_points;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("session `{0}` is not complete")]
    IncompleteSession(String),
    #[error("unknown counterargument `{0}`")]
    UnknownCounter(String),
    #[error("contingency table must be at least 2x2 and rectangular")]
    Shape,
    #[error("contingency table has a zero marginal (row or column sum)")]
    ZeroMarginal,
    #[error("cannot parse table `{0}`")]
    Parse(String),
    #[error("unknown grouping `{0}`; use variant, policy or concern")]
    GroupBy(String),
    #[error("missing counts for variant {variant} {policy} {concern}")]
    MissingCounts { variant: Variant, policy: Policy, concern: Concern },
}

/// Per-session outcome used by every aggregate below.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub session_id: String,
    pub variant: Variant,
    pub policy: Policy,
    pub concern: Concern,
    pub intention_points: i8,
    pub harvested: usize,
    pub disagreements: u32,
}

impl SessionOutcome {
    pub fn from_session(s: &Session) -> Result<Self, AnalysisError> {
        let incomplete = || AnalysisError::IncompleteSession(s.id.clone());
        let summary = s.done_summary().ok_or_else(incomplete)?;
        Ok(Self {
            session_id: s.id.clone(),
            variant: s.config.variant,
            policy: s.config.policy,
            concern: s.concern.ok_or_else(incomplete)?,
            intention_points: summary.intention_points,
            harvested: harvest_count(s).map_err(|_| incomplete())?,
            disagreements: s.disagreements,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n_participants: usize,
    pub sum_intention_points: i64,
    pub avg_intention_points: f64,
    pub n_harvested: usize,
    pub total_disagreed: u64,
    pub avg_disagreed: f64,
    pub n_better: usize,
    pub n_worse: usize,
}

impl GroupSummary {
    pub fn from_outcomes<'a>(outcomes: impl IntoIterator<Item = &'a SessionOutcome>) -> Self {
        let mut n = 0usize;
        let mut sum = 0i64;
        let mut harvested = 0usize;
        let mut disagreed = 0u64;
        let (mut better, mut worse) = (0usize, 0usize);
        for o in outcomes {
            n += 1;
            sum += i64::from(o.intention_points);
            harvested += o.harvested;
            disagreed += u64::from(o.disagreements);
            if o.intention_points > 0 {
                better += 1;
            } else if o.intention_points < 0 {
                worse += 1;
            }
        }
        let avg = |x: f64| if n == 0 { 0.0 } else { x / n as f64 };
        Self {
            n_participants: n,
            sum_intention_points: sum,
            avg_intention_points: avg(sum as f64),
            n_harvested: harvested,
            total_disagreed: disagreed,
            avg_disagreed: avg(disagreed as f64),
            n_better: better,
            n_worse: worse,
        }
    }

    /// Renders "sum (avg)" with the average to two decimals, e.g. `32 (0.64)`.
    pub fn points_cell(&self) -> String {
        format!("{} ({:.2})", self.sum_intention_points, self.avg_intention_points)
    }
}

/// Which dimensions to group sessions by; all false pools everything.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupBy {
    pub variant: bool,
    pub policy: bool,
    pub concern: bool,
}

impl GroupBy {
    pub fn parse(spec: &str) -> Result<Self, AnalysisError> {
        let mut g = GroupBy::default();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "variant" => g.variant = true,
                "policy" => g.policy = true,
                "concern" => g.concern = true,
                other => return Err(AnalysisError::GroupBy(other.to_owned())),
            }
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupKey {
    pub variant: Option<Variant>,
    pub policy: Option<Policy>,
    pub concern: Option<Concern>,
}

impl GroupKey {
    fn of(o: &SessionOutcome, by: GroupBy) -> Self {
        Self {
            variant: by.variant.then_some(o.variant),
            policy: by.policy.then_some(o.policy),
            concern: by.concern.then_some(o.concern),
        }
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(v) = self.variant {
            parts.push(format!("variant {v}"));
        }
        if let Some(p) = self.policy {
            parts.push(p.to_string());
        }
        if let Some(c) = self.concern {
            parts.push(c.to_string());
        }
        if parts.is_empty() {
            f.write_str("all")
        } else {
            f.write_str(&parts.join(" / "))
        }
    }
}

pub fn summarize_outcomes(outcomes: &[SessionOutcome], by: GroupBy) -> BTreeMap<GroupKey, GroupSummary> {
    let mut groups: BTreeMap<GroupKey, Vec<&SessionOutcome>> = BTreeMap::new();
    for o in outcomes {
        groups.entry(GroupKey::of(o, by)).or_default().push(o);
    }
    groups
        .into_iter()
        .map(|(k, v)| (k, GroupSummary::from_outcomes(v)))
        .collect()
}

/// Summaries per group; fails if any session is unfinished.
pub fn summarize(sessions: &[Session], by: GroupBy) -> Result<BTreeMap<GroupKey, GroupSummary>, AnalysisError> {
    let outcomes = sessions
        .iter()
        .map(SessionOutcome::from_session)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize_outcomes(&outcomes, by))
}

/// Counterarguments one survey participant selected, with their concern label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantSelection {
    pub concern: ConcernLabel,
    pub selected: Vec<String>,
}

/// Selected counterarguments per (concern label, type), plus group sizes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcernTypeTable {
    pub counts: BTreeMap<ConcernLabel, BTreeMap<ArgumentType, u64>>,
    pub participants: BTreeMap<ConcernLabel, u64>,
}

/// Arguments of each type shown to every survey participant.
pub const SHOWN_PER_TYPE: u64 = 3;

impl ConcernTypeTable {
    pub fn from_counts(rows: &[(ConcernLabel, [(ArgumentType, u64); 6], u64)]) -> Self {
        let mut t = ConcernTypeTable::default();
        for (label, cells, m) in rows {
            t.counts.insert(*label, cells.iter().copied().collect());
            t.participants.insert(*label, *m);
        }
        t
    }

    pub fn count(&self, label: ConcernLabel, t: ArgumentType) -> u64 {
        self.counts.get(&label).and_then(|r| r.get(&t)).copied().unwrap_or(0)
    }

    /// Types that speak to a concern label: personal consequences for
    /// health, impersonal for environment, all four for both.
    pub fn matched_types(label: ConcernLabel) -> Vec<ArgumentType> {
        let scope = match label {
            ConcernLabel::Health => Some(Scope::Personal),
            ConcernLabel::Environment => Some(Scope::Impersonal),
            ConcernLabel::Both => None,
            ConcernLabel::Unlabeled => return Vec::new(),
        };
        ArgumentType::CONSEQUENTIAL
            .into_iter()
            .filter(|t| scope.is_none_or(|s| t.scope() == Some(s)))
            .collect()
    }

    /// Selected vs. available for matched types and for the rest:
    /// `(matched_selected, matched_available, other_selected, other_available)`.
    pub fn matched_vs_rest(&self, label: ConcernLabel) -> Option<(u64, u64, u64, u64)> {
        let matched = Self::matched_types(label);
        if matched.is_empty() {
            return None;
        }
        let m = self.participants.get(&label).copied().unwrap_or(0);
        let (mut sel_m, mut sel_o) = (0, 0);
        for t in ArgumentType::ALL {
            if matched.contains(&t) {
                sel_m += self.count(label, t);
            } else {
                sel_o += self.count(label, t);
            }
        }
        let avail_m = SHOWN_PER_TYPE * matched.len() as u64 * m;
        let avail_o = SHOWN_PER_TYPE * (ArgumentType::ALL.len() - matched.len()) as u64 * m;
        Some((sel_m, avail_m, sel_o, avail_o))
    }

    /// 2x2 table `[[selected, not], [selected, not]]` for matched types vs. the rest.
    pub fn contingency(&self, label: ConcernLabel) -> Option<ContingencyTable> {
        let (sm, am, so, ao) = self.matched_vs_rest(label)?;
        ContingencyTable::new(vec![vec![sm, am.saturating_sub(sm)], vec![so, ao.saturating_sub(so)]]).ok()
    }
}

/// Tallies survey selections by concern label and argument type.
pub fn concern_type_table(selections: &[ParticipantSelection], kb: &KnowledgeBase) -> Result<ConcernTypeTable, AnalysisError> {
    let index = kb.counter_index();
    let mut t = ConcernTypeTable::default();
    for p in selections {
        *t.participants.entry(p.concern).or_insert(0) += 1;
        let row = t.counts.entry(p.concern).or_default();
        for id in &p.selected {
            let c = index
                .get(id.as_str())
                .ok_or_else(|| AnalysisError::UnknownCounter(id.clone()))?;
            *row.entry(c.arg_type).or_insert(0) += 1;
        }
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u64>>", into = "Vec<Vec<u64>>")]
pub struct ContingencyTable {
    rows: Vec<Vec<u64>>,
}

impl TryFrom<Vec<Vec<u64>>> for ContingencyTable {
    type Error = AnalysisError;

    fn try_from(rows: Vec<Vec<u64>>) -> Result<Self, Self::Error> {
        Self::new(rows)
    }
}

impl From<ContingencyTable> for Vec<Vec<u64>> {
    fn from(t: ContingencyTable) -> Self {
        t.rows
    }
}

impl ContingencyTable {
    pub fn new(rows: Vec<Vec<u64>>) -> Result<Self, AnalysisError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.len() < 2 || cols < 2 || rows.iter().any(|r| r.len() != cols) {
            return Err(AnalysisError::Shape);
        }
        Ok(Self { rows })
    }

    pub fn from_2x2(a: u64, b: u64, c: u64, d: u64) -> Self {
        Self { rows: vec![vec![a, b], vec![c, d]] }
    }

    /// Parses `"5,22;17,9"`: rows separated by `;`, cells by `,`.
    pub fn parse(s: &str) -> Result<Self, AnalysisError> {
        let err = || AnalysisError::Parse(s.to_owned());
        let rows = s
            .split(';')
            .map(|r| {
                r.split(',')
                    .map(|c| c.trim().parse::<u64>().map_err(|_| err()))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(rows)
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.rows
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows.len(), self.rows[0].len())
    }

    pub fn scaled(&self, k: u64) -> Self {
        Self { rows: self.rows.iter().map(|r| r.iter().map(|x| x * k).collect()).collect() }
    }

    pub fn transposed(&self) -> Self {
        let (r, c) = self.dims();
        Self { rows: (0..c).map(|j| (0..r).map(|i| self.rows[i][j]).collect()).collect() }
    }
}

impl fmt::Display for ContingencyTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .rows
            .iter()
            .map(|r| r.iter().map(u64::to_string).collect::<Vec<_>>().join(","))
            .collect();
        f.write_str(&rows.join(";"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
}

/// Pearson chi-square test of independence.
///
/// Expected counts come from the row and column marginals. With `yates`,
/// 2x2 tables use the continuity correction `(|O − E| − 0.5)²/E`; the
/// default is uncorrected.
pub fn chi_square_with(table: &ContingencyTable, yates: bool) -> Result<ChiSquareResult, AnalysisError> {
    let (r, c) = table.dims();
    let rows = table.rows();
    let row_sums: Vec<f64> = rows.iter().map(|row| row.iter().sum::<u64>() as f64).collect();
    let col_sums: Vec<f64> = (0..c).map(|j| rows.iter().map(|row| row[j]).sum::<u64>() as f64).collect();
    if row_sums.iter().chain(&col_sums).any(|s| *s == 0.0) {
        return Err(AnalysisError::ZeroMarginal);
    }
    let total: f64 = row_sums.iter().sum();
    let correct = yates && r == 2 && c == 2;
    let mut statistic = 0.0;
    for (i, row) in rows.iter().enumerate() {
        for (j, &obs) in row.iter().enumerate() {
            let expected = row_sums[i] * col_sums[j] / total;
            let mut diff = (obs as f64 - expected).abs();
            if correct {
                diff = (diff - 0.5).max(0.0);
            }
            statistic += diff * diff / expected;
        }
    }
    let df = ((r - 1) * (c - 1)) as u32;
    Ok(ChiSquareResult { statistic, df, p_value: chi_square_sf(statistic, df) })
}

pub fn chi_square(table: &ContingencyTable) -> Result<ChiSquareResult, AnalysisError> {
    chi_square_with(table, false)
}

/// Display convention for p-values: three decimals, or `<0.001`.
pub fn format_p(p: f64) -> String {
    if p < 0.001 {
        "<0.001".to_owned()
    } else {
        format!("{p:.3}")
    }
}

/// Participants in one chatbot arm and how their intention moved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmCounts {
    pub variant: Variant,
    pub policy: Policy,
    pub concern: Concern,
    pub participants: u64,
    pub better: u64,
    pub worse: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyCounts {
    pub arms: Vec<ArmCounts>,
}

impl StudyCounts {
    pub fn from_outcomes(outcomes: &[SessionOutcome]) -> Self {
        let by = GroupBy { variant: true, policy: true, concern: true };
        let arms = summarize_outcomes(outcomes, by)
            .into_iter()
            .map(|(k, s)| ArmCounts {
                variant: k.variant.expect("grouped by variant"),
                policy: k.policy.expect("grouped by policy"),
                concern: k.concern.expect("grouped by concern"),
                participants: s.n_participants as u64,
                better: s.n_better as u64,
                worse: s.n_worse as u64,
            })
            .collect();
        let mut counts = Self { arms };
        // Arms nobody landed in are zeros, not missing data.
        for variant in Variant::ALL {
            if !counts.arms.iter().any(|a| a.variant == variant) {
                continue;
            }
            for policy in Policy::ALL {
                for concern in Concern::ALL {
                    if counts.get(variant, policy, concern).is_none() {
                        counts.arms.push(ArmCounts { variant, policy, concern, participants: 0, better: 0, worse: 0 });
                    }
                }
            }
        }
        counts
    }

    pub fn get(&self, variant: Variant, policy: Policy, concern: Concern) -> Option<&ArmCounts> {
        self.arms
            .iter()
            .find(|a| a.variant == variant && a.policy == policy && a.concern == concern)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceEntry {
    pub variant: Variant,
    /// Health, Environment, or Both (the two concern arms pooled).
    pub group: ConcernLabel,
    /// `[[baseline better, baseline not], [strategic better, strategic not]]`.
    pub table: ContingencyTable,
    /// `None` when a row or column is empty, as happens with small samples.
    pub result: Option<ChiSquareResult>,
}

/// Baseline-vs-strategic significance of "changed intention for the better"
/// for each variant, per concern arm and pooled.
pub fn intention_change_significance(counts: &StudyCounts) -> Result<Vec<SignificanceEntry>, AnalysisError> {
    let test = |table: &ContingencyTable| match chi_square(table) {
        Ok(r) => Ok(Some(r)),
        Err(AnalysisError::ZeroMarginal) => Ok(None),
        Err(e) => Err(e),
    };
    let mut out = Vec::new();
    for variant in Variant::ALL {
        if !counts.arms.iter().any(|a| a.variant == variant) {
            continue;
        }
        let cell = |policy: Policy, concern: Concern| {
            counts
                .get(variant, policy, concern)
                .map(|a| (a.better, a.participants.saturating_sub(a.better)))
                .ok_or(AnalysisError::MissingCounts { variant, policy, concern })
        };
        let mut pooled = [[0u64; 2]; 2];
        for concern in Concern::ALL {
            let (bb, bn) = cell(Policy::Baseline, concern)?;
            let (sb, sn) = cell(Policy::Strategic, concern)?;
            pooled[0][0] += bb;
            pooled[0][1] += bn;
            pooled[1][0] += sb;
            pooled[1][1] += sn;
            let table = ContingencyTable::from_2x2(bb, bn, sb, sn);
            let result = test(&table)?;
            out.push(SignificanceEntry { variant, group: concern.into(), table, result });
        }
        let table = ContingencyTable::from_2x2(pooled[0][0], pooled[0][1], pooled[1][0], pooled[1][1]);
        let result = test(&table)?;
        out.push(SignificanceEntry { variant, group: ConcernLabel::Both, table, result });
    }
    Ok(out)
}

/// A plain-text table with left-aligned first column and right-aligned rest.
pub fn render_table(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (i, cell) in r.iter().enumerate().take(cols) {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: &[String], out: &mut String| {
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            if i == 0 {
                let _ = write!(out, "{cell:<w$}", w = widths[i]);
            } else {
                let _ = write!(out, "{cell:>w$}", w = widths[i]);
            }
        }
        out.push('\n');
    };
    line(header, &mut out);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(&rule, &mut out);
    for r in rows {
        line(r, &mut out);
    }
    out
}

/// One row of the machine-readable report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub report: String,
    pub variant: Option<Variant>,
    pub policy: Option<Policy>,
    pub group: Option<ConcernLabel>,
    pub values: BTreeMap<String, serde_json::Value>,
}

/// Intention/harvest summary per variant: one column per (policy, concern)
/// plus a total per policy.
pub fn intention_report(outcomes: &[SessionOutcome]) -> (String, Vec<ReportRecord>) {
    let mut text = String::new();
    let mut records = Vec::new();
    let full = summarize_outcomes(outcomes, GroupBy { variant: true, policy: true, concern: true });
    let totals = summarize_outcomes(outcomes, GroupBy { variant: true, policy: true, concern: false });
    for variant in Variant::ALL {
        if !outcomes.iter().any(|o| o.variant == variant) {
            continue;
        }
        let mut header = vec![format!("Variant {variant}")];
        let mut cols: Vec<(Policy, Option<Concern>, GroupSummary)> = Vec::new();
        for policy in Policy::ALL {
            for concern in Concern::ALL {
                let key = GroupKey { variant: Some(variant), policy: Some(policy), concern: Some(concern) };
                let s = full.get(&key).cloned().unwrap_or_else(|| GroupSummary::from_outcomes([]));
                header.push(format!("{policy} {concern}"));
                cols.push((policy, Some(concern), s));
            }
            let key = GroupKey { variant: Some(variant), policy: Some(policy), concern: None };
            let s = totals.get(&key).cloned().unwrap_or_else(|| GroupSummary::from_outcomes([]));
            header.push(format!("{policy} total/avg"));
            cols.push((policy, None, s));
        }
        let row = |label: &str, f: &dyn Fn(&GroupSummary) -> String| {
            std::iter::once(label.to_owned()).chain(cols.iter().map(|(_, _, s)| f(s))).collect::<Vec<_>>()
        };
        let rows = vec![
            row("No of participants", &|s| s.n_participants.to_string()),
            row("Sum of intention points", &|s| s.points_cell()),
            row("No of harvested arguments", &|s| s.n_harvested.to_string()),
            row("Avg No of disagreed CAs (out of 12)", &|s| format!("{:.2}", s.avg_disagreed)),
        ];
        text.push_str(&render_table(&header, &rows));
        text.push('\n');
        for (policy, concern, s) in &cols {
            let mut values = BTreeMap::new();
            values.insert("summary".into(), serde_json::to_value(s).expect("serializable"));
            records.push(ReportRecord {
                report: "intention".into(),
                variant: Some(variant),
                policy: Some(*policy),
                group: Some(concern.map_or(ConcernLabel::Both, ConcernLabel::from)),
                values,
            });
        }
    }
    (text, records)
}

/// Better/worse counts per arm.
pub fn change_report(counts: &StudyCounts) -> (String, Vec<ReportRecord>) {
    let mut header = vec!["Participants that changed intention".to_owned()];
    for policy in Policy::ALL {
        for concern in Concern::ALL {
            header.push(format!("{policy} {concern} worse"));
            header.push(format!("{policy} {concern} better"));
        }
    }
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for variant in Variant::ALL {
        let mut row = vec![format!("Variant {variant}")];
        for policy in Policy::ALL {
            for concern in Concern::ALL {
                let a = counts.get(variant, policy, concern);
                row.push(a.map_or("-".into(), |a| a.worse.to_string()));
                row.push(a.map_or("-".into(), |a| a.better.to_string()));
                if let Some(a) = a {
                    let mut values = BTreeMap::new();
                    values.insert("participants".into(), a.participants.into());
                    values.insert("better".into(), a.better.into());
                    values.insert("worse".into(), a.worse.into());
                    records.push(ReportRecord {
                        report: "intention_change".into(),
                        variant: Some(variant),
                        policy: Some(policy),
                        group: Some(concern.into()),
                        values,
                    });
                }
            }
        }
        rows.push(row);
    }
    (render_table(&header, &rows), records)
}

/// p-values of baseline vs. strategic per variant and concern group.
pub fn significance_report(entries: &[SignificanceEntry]) -> (String, Vec<ReportRecord>) {
    let mut header = vec!["Chatbot".to_owned()];
    let mut row = vec!["p-value Chi-Square".to_owned()];
    let mut records = Vec::new();
    for e in entries {
        header.push(format!("Variant {} {}", e.variant, e.group.as_str()));
        let display = e.result.as_ref().map_or_else(|| "n/a".to_owned(), |r| format_p(r.p_value));
        row.push(display.clone());
        let mut values = BTreeMap::new();
        values.insert("table".into(), serde_json::to_value(&e.table).expect("serializable"));
        if let Some(r) = &e.result {
            values.insert("statistic".into(), r.statistic.into());
            values.insert("df".into(), r.df.into());
            values.insert("p_value".into(), r.p_value.into());
        }
        values.insert("display".into(), display.into());
        records.push(ReportRecord {
            report: "significance".into(),
            variant: Some(e.variant),
            policy: None,
            group: Some(e.group),
            values,
        });
    }
    (render_table(&header, &[row]), records)
}

/// Counts of how often each counter was scheduled, keyed by type; handy for
/// sanity-checking simulated corpora.
pub fn scheduled_type_counts(sessions: &[Session], kb: &KnowledgeBase) -> HashMap<ArgumentType, usize> {
    let index = kb.counter_index();
    let mut out = HashMap::new();
    for s in sessions {
        for id in &s.schedule {
            if let Some(c) = index.get(id.as_str()) {
                *out.entry(c.arg_type).or_insert(0) += 1;
            }
        }
    }
    out
}
