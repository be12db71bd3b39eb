//! Argument typology, concern tagging and the knowledge base the dialogue
//! engine draws counterarguments from.
//!
//! The on-disk format is line-delimited JSON: a header line carrying
//! `schema_version`, followed by one `popular_argument` or
//! `counter_argument` record per line. Fields this crate does not know
//! about are kept and written back out unchanged.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub const SCHEMA_VERSION: u64 = 1;

/// Counters required per consequential type for each policy.
pub const STRATEGIC_PER_TYPE: usize = 6;
pub const BASELINE_PER_TYPE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArgumentType {
    /// Direct counterargument: negates a specific popular argument.
    #[serde(rename = "DIR")]
    Direct,
    /// Suggestion on how to change the behaviour.
    #[serde(rename = "SUG")]
    Suggestion,
    #[serde(rename = "NPC")]
    NegativePersonal,
    #[serde(rename = "NIC")]
    NegativeImpersonal,
    #[serde(rename = "PPC")]
    PositivePersonal,
    #[serde(rename = "PIC")]
    PositiveImpersonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Personal,
    Impersonal,
}

impl ArgumentType {
    pub const ALL: [ArgumentType; 6] = [
        ArgumentType::Direct,
        ArgumentType::Suggestion,
        ArgumentType::NegativeImpersonal,
        ArgumentType::NegativePersonal,
        ArgumentType::PositiveImpersonal,
        ArgumentType::PositivePersonal,
    ];

    pub const CONSEQUENTIAL: [ArgumentType; 4] = [
        ArgumentType::PositivePersonal,
        ArgumentType::NegativePersonal,
        ArgumentType::PositiveImpersonal,
        ArgumentType::NegativeImpersonal,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ArgumentType::Direct => "DIR",
            ArgumentType::Suggestion => "SUG",
            ArgumentType::NegativePersonal => "NPC",
            ArgumentType::NegativeImpersonal => "NIC",
            ArgumentType::PositivePersonal => "PPC",
            ArgumentType::PositiveImpersonal => "PIC",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.code().eq_ignore_ascii_case(code.trim()))
    }

    pub fn consequence(polarity: Polarity, scope: Scope) -> Self {
        match (polarity, scope) {
            (Polarity::Positive, Scope::Personal) => ArgumentType::PositivePersonal,
            (Polarity::Negative, Scope::Personal) => ArgumentType::NegativePersonal,
            (Polarity::Positive, Scope::Impersonal) => ArgumentType::PositiveImpersonal,
            (Polarity::Negative, Scope::Impersonal) => ArgumentType::NegativeImpersonal,
        }
    }

    pub fn polarity(self) -> Option<Polarity> {
        match self {
            ArgumentType::PositivePersonal | ArgumentType::PositiveImpersonal => {
                Some(Polarity::Positive)
            }
            ArgumentType::NegativePersonal | ArgumentType::NegativeImpersonal => {
                Some(Polarity::Negative)
            }
            ArgumentType::Direct | ArgumentType::Suggestion => None,
        }
    }

    pub fn scope(self) -> Option<Scope> {
        match self {
            ArgumentType::PositivePersonal | ArgumentType::NegativePersonal => {
                Some(Scope::Personal)
            }
            ArgumentType::PositiveImpersonal | ArgumentType::NegativeImpersonal => {
                Some(Scope::Impersonal)
            }
            ArgumentType::Direct | ArgumentType::Suggestion => None,
        }
    }

    pub fn is_consequential(self) -> bool {
        self.scope().is_some()
    }
}

impl fmt::Display for ArgumentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// The concern a persuadee declares during the dialogue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Concern {
    Health,
    Environment,
}

impl Concern {
    pub const ALL: [Concern; 2] = [Concern::Health, Concern::Environment];

    /// Health is a personal concern, the environment an impersonal one.
    pub fn scope(self) -> Scope {
        match self {
            Concern::Health => Scope::Personal,
            Concern::Environment => Scope::Impersonal,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Concern::Health => "health",
            Concern::Environment => "environment",
        }
    }
}

impl fmt::Display for Concern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Concern assigned to a free-text explanation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcernLabel {
    Health,
    Environment,
    Both,
    Unlabeled,
}

impl ConcernLabel {
    pub const ALL: [ConcernLabel; 4] = [
        ConcernLabel::Health,
        ConcernLabel::Environment,
        ConcernLabel::Both,
        ConcernLabel::Unlabeled,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConcernLabel::Health => "health",
            ConcernLabel::Environment => "environment",
            ConcernLabel::Both => "both",
            ConcernLabel::Unlabeled => "unlabeled",
        }
    }
}

impl From<Concern> for ConcernLabel {
    fn from(c: Concern) -> Self {
        match c {
            Concern::Health => ConcernLabel::Health,
            Concern::Environment => ConcernLabel::Environment,
        }
    }
}

/// Which concern an argument type speaks to, if any.
pub fn concern_of(arg_type: ArgumentType) -> Option<Concern> {
    arg_type.scope().map(|scope| match scope {
        Scope::Personal => Concern::Health,
        Scope::Impersonal => Concern::Environment,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuthorGroup {
    MeatEater,
    Vegetarian,
}

/// Counterargument selection policy of the chatbot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Baseline,
    Strategic,
}

impl Policy {
    pub const ALL: [Policy; 2] = [Policy::Baseline, Policy::Strategic];

    pub fn per_type_requirement(self) -> usize {
        match self {
            Policy::Baseline => BASELINE_PER_TYPE,
            Policy::Strategic => STRATEGIC_PER_TYPE,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Baseline => "baseline",
            Policy::Strategic => "strategic",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopularArgument {
    pub id: String,
    pub cluster_name: String,
    pub text: String,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl PopularArgument {
    pub fn new(id: impl Into<String>, cluster_name: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            cluster_name: cluster_name.into(),
            text: text.into(),
            extra: Map::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterArgument {
    pub id: String,
    pub text: String,
    pub arg_type: ArgumentType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_cluster: Option<String>,
    pub source_group: AuthorGroup,
    #[serde(default)]
    pub votes_me: u32,
    #[serde(default)]
    pub votes_veg: u32,
    pub rank: u32,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl CounterArgument {
    /// A generic (non-direct) counter with zero votes.
    pub fn generic(id: impl Into<String>, text: impl Into<String>, arg_type: ArgumentType, rank: u32) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            arg_type,
            target_cluster: None,
            source_group: AuthorGroup::Vegetarian,
            votes_me: 0,
            votes_veg: 0,
            rank,
            extra: Map::new(),
        }
    }

    pub fn direct(id: impl Into<String>, text: impl Into<String>, target: impl Into<String>, rank: u32) -> Self {
        Self {
            target_cluster: Some(target.into()),
            ..Self::generic(id, text, ArgumentType::Direct, rank)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct KnowledgeBase {
    pub popular_args: Vec<PopularArgument>,
    pub counters: Vec<CounterArgument>,
    pub metadata: BTreeMap<String, Value>,
}

/// A single invariant violation, naming the offending record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateId { id: String },
    EmptyText { id: String },
    MissingTarget { id: String },
    UnexpectedTarget { id: String },
    DanglingTarget { id: String, target: String },
    ZeroRank { id: String },
    RankGap { arg_type: ArgumentType, target: Option<String>, ranks: Vec<u32> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId { id } => write!(f, "duplicate id `{id}`"),
            Violation::EmptyText { id } => write!(f, "record `{id}` has empty text"),
            Violation::MissingTarget { id } => {
                write!(f, "direct counter `{id}` has no target_cluster")
            }
            Violation::UnexpectedTarget { id } => {
                write!(f, "non-direct counter `{id}` carries a target_cluster")
            }
            Violation::DanglingTarget { id, target } => {
                write!(f, "counter `{id}` targets unknown popular argument `{target}`")
            }
            Violation::ZeroRank { id } => write!(f, "counter `{id}` has rank 0"),
            Violation::RankGap { arg_type, target, ranks } => write!(
                f,
                "ranks for group ({arg_type}, {}) are not 1..{}: {ranks:?}",
                target.as_deref().unwrap_or("-"),
                ranks.len()
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("knowledge base invalid: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("{policy} policy unavailable: {missing}")]
    PolicyUnavailable { policy: Policy, missing: String },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Which dialogue policies a knowledge base has enough counters for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyReport {
    pub per_type: BTreeMap<ArgumentType, usize>,
}

impl PolicyReport {
    pub fn shortfalls(&self, policy: Policy) -> Vec<(ArgumentType, usize)> {
        let need = policy.per_type_requirement();
        ArgumentType::CONSEQUENTIAL
            .into_iter()
            .filter_map(|t| {
                let have = self.per_type.get(&t).copied().unwrap_or(0);
                (have < need).then_some((t, have))
            })
            .collect()
    }

    pub fn supports(&self, policy: Policy) -> bool {
        self.shortfalls(policy).is_empty()
    }

    pub fn available(&self) -> Vec<Policy> {
        Policy::ALL.into_iter().filter(|p| self.supports(*p)).collect()
    }
}

impl KnowledgeBase {
    /// Collects every invariant violation; empty means the KB is well-formed.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();

        let mut seen = HashSet::new();
        for p in &self.popular_args {
            if !seen.insert(p.id.as_str()) {
                out.push(Violation::DuplicateId { id: p.id.clone() });
            }
            if p.text.trim().is_empty() {
                out.push(Violation::EmptyText { id: p.id.clone() });
            }
        }
        let popular: HashSet<&str> = self.popular_args.iter().map(|p| p.id.as_str()).collect();

        let mut seen = HashSet::new();
        let mut groups: BTreeMap<(ArgumentType, Option<&str>), Vec<u32>> = BTreeMap::new();
        for c in &self.counters {
            if !seen.insert(c.id.as_str()) {
                out.push(Violation::DuplicateId { id: c.id.clone() });
            }
            if c.text.trim().is_empty() {
                out.push(Violation::EmptyText { id: c.id.clone() });
            }
            match (c.arg_type, &c.target_cluster) {
                (ArgumentType::Direct, None) => {
                    out.push(Violation::MissingTarget { id: c.id.clone() })
                }
                (ArgumentType::Direct, Some(t)) if !popular.contains(t.as_str()) => {
                    out.push(Violation::DanglingTarget { id: c.id.clone(), target: t.clone() })
                }
                (t, Some(_)) if t != ArgumentType::Direct => {
                    out.push(Violation::UnexpectedTarget { id: c.id.clone() })
                }
                _ => {}
            }
            if c.rank == 0 {
                out.push(Violation::ZeroRank { id: c.id.clone() });
            }
            groups
                .entry((c.arg_type, c.target_cluster.as_deref()))
                .or_default()
                .push(c.rank);
        }

        for ((arg_type, target), mut ranks) in groups {
            ranks.sort_unstable();
            let dense = ranks.iter().enumerate().all(|(i, r)| *r as usize == i + 1);
            if !dense {
                out.push(Violation::RankGap {
                    arg_type,
                    target: target.map(str::to_owned),
                    ranks,
                });
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), KbError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(KbError::Invalid(v))
        }
    }

    pub fn policy_report(&self) -> PolicyReport {
        let mut per_type = BTreeMap::new();
        for t in ArgumentType::CONSEQUENTIAL {
            per_type.insert(t, 0);
        }
        for c in &self.counters {
            *per_type.entry(c.arg_type).or_insert(0) += 1;
        }
        PolicyReport { per_type }
    }

    pub fn require_policy(&self, policy: Policy) -> Result<(), KbError> {
        let short = self.policy_report().shortfalls(policy);
        if short.is_empty() {
            return Ok(());
        }
        let need = policy.per_type_requirement();
        let missing = short
            .iter()
            .map(|(t, have)| format!("{t} has {have} of {need}"))
            .collect::<Vec<_>>()
            .join(", ");
        Err(KbError::PolicyUnavailable { policy, missing })
    }

    pub fn popular(&self, id: &str) -> Option<&PopularArgument> {
        self.popular_args.iter().find(|p| p.id == id)
    }

    pub fn counter(&self, id: &str) -> Option<&CounterArgument> {
        self.counters.iter().find(|c| c.id == id)
    }

    /// Index of counters by id, for callers doing many lookups.
    pub fn counter_index(&self) -> HashMap<&str, &CounterArgument> {
        self.counters.iter().map(|c| (c.id.as_str(), c)).collect()
    }

    /// Generic counters of one type ordered by rank.
    pub fn ranked(&self, arg_type: ArgumentType) -> Vec<&CounterArgument> {
        let mut v: Vec<_> = self
            .counters
            .iter()
            .filter(|c| c.arg_type == arg_type && c.target_cluster.is_none())
            .collect();
        v.sort_by_key(|c| c.rank);
        v
    }

    pub fn parse(input: &str) -> Result<Self, KbError> {
        parse_records(input.lines().map(|l| Ok(l.to_owned())))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut header = Map::new();
        header.insert("kind".into(), Value::from("header"));
        header.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
        header.insert(
            "metadata".into(),
            Value::Object(self.metadata.clone().into_iter().collect()),
        );
        push_line(&mut out, Value::Object(header));
        for p in &self.popular_args {
            push_line(&mut out, tagged("popular_argument", p));
        }
        for c in &self.counters {
            push_line(&mut out, tagged("counter_argument", c));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), KbError> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }
}

fn tagged<T: Serialize>(kind: &str, record: &T) -> Value {
    let mut v = serde_json::to_value(record).expect("record serializes");
    if let Value::Object(map) = &mut v {
        map.insert("kind".into(), Value::from(kind));
    }
    v
}

fn push_line(out: &mut String, v: Value) {
    out.push_str(&v.to_string());
    out.push('\n');
}

fn parse_records<I>(lines: I) -> Result<KnowledgeBase, KbError>
where
    I: Iterator<Item = std::io::Result<String>>,
{
    let mut kb = KnowledgeBase::default();
    let mut saw_header = false;
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let perr = |message: String| KbError::Parse { line: line_no, message };
        let mut value: Value = serde_json::from_str(&line).map_err(|e| perr(e.to_string()))?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| perr("record is not an object".into()))?;
        let kind = match obj.remove("kind") {
            Some(Value::String(k)) => k,
            _ => return Err(perr("missing `kind`".into())),
        };
        match kind.as_str() {
            "header" => {
                if saw_header {
                    return Err(perr("duplicate header".into()));
                }
                let version = obj.get("schema_version").and_then(Value::as_u64);
                if version != Some(SCHEMA_VERSION) {
                    return Err(perr(format!(
                        "unsupported schema_version {:?}, expected {SCHEMA_VERSION}",
                        obj.get("schema_version")
                    )));
                }
                if let Some(Value::Object(meta)) = obj.remove("metadata") {
                    kb.metadata = meta.into_iter().collect();
                }
                saw_header = true;
            }
            "popular_argument" => kb.popular_args.push(
                serde_json::from_value(value).map_err(|e| perr(e.to_string()))?,
            ),
            "counter_argument" => kb.counters.push(
                serde_json::from_value(value).map_err(|e| perr(e.to_string()))?,
            ),
            other => return Err(perr(format!("unknown record kind `{other}`"))),
        }
        if !saw_header {
            return Err(perr("first record must be the header".into()));
        }
    }
    if !saw_header {
        return Err(KbError::Parse { line: 0, message: "empty knowledge base file".into() });
    }
    Ok(kb)
}

/// Reads and validates a knowledge base file.
pub fn load_kb(path: impl AsRef<Path>) -> Result<KnowledgeBase, KbError> {
    let file = fs::File::open(path)?;
    let kb = parse_records(BufReader::new(file).lines())?;
    kb.validate()?;
    Ok(kb)
}

/// Parses and validates knowledge base text.
pub fn load_kb_str(input: &str) -> Result<KnowledgeBase, KbError> {
    let kb = KnowledgeBase::parse(input)?;
    kb.validate()?;
    Ok(kb)
}
