//! Harvested-argument pipeline: text normalization, greedy clustering,
//! representative selection, vote tallying, ranking and concern labels.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::kb::{ArgumentType, AuthorGroup, ConcernLabel, CounterArgument};

pub const DEFAULT_THRESHOLD: f64 = 0.4;

static STOPWORDS_RAW: &str = include_str!("../data/stopwords_en.txt");

fn stopwords() -> &'static HashSet<String> {
    static SET: OnceLock<HashSet<String>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_RAW
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|w| strip_apostrophes(&w.to_lowercase()))
            .collect()
    })
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '\u{2018}' | '`')
}

fn strip_apostrophes(s: &str) -> String {
    s.chars().filter(|c| !is_apostrophe(*c)).collect()
}

pub fn is_stopword(token: &str) -> bool {
    stopwords().contains(token)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("threshold {0} outside [0, 1]")]
    Threshold(String),
    #[error("clusters overlap on members {0:?}")]
    Overlap(Vec<String>),
    #[error("cluster has no members")]
    EmptyCluster,
    #[error("unknown argument id `{0}`")]
    UnknownArgument(String),
    #[error("duplicate argument id `{0}`")]
    DuplicateArgument(String),
    #[error("argument `{0}` has empty text")]
    EmptyText(String),
    #[error("vote sheet references unknown counterargument `{0}`")]
    UnknownCounter(String),
    #[error("counterargument `{id}` selected {count} times by {n_voters} voters")]
    CountExceedsVoters { id: String, count: u32, n_voters: u32 },
    #[error("vote sheet has no voters")]
    NoVoters,
    #[error("k must be at least 1")]
    ZeroK,
}

/// Text normalization settings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Normalizer {
    /// Apply English Snowball stemming after stopword removal.
    #[serde(default)]
    pub stem: bool,
}

impl Normalizer {
    pub fn stemming() -> Self {
        Self { stem: true }
    }

    /// Lowercases, drops apostrophes, turns other punctuation into
    /// whitespace, splits on whitespace and removes stopwords.
    pub fn normalize(&self, text: &str) -> Vec<String> {
        let cleaned: String = text
            .to_lowercase()
            .chars()
            .filter(|c| !is_apostrophe(*c))
            .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
            .collect();
        let tokens = cleaned
            .split_whitespace()
            .filter(|t| !is_stopword(t))
            .map(str::to_owned);
        if self.stem {
            let stemmer = Stemmer::create(Algorithm::English);
            tokens.map(|t| stemmer.stem(&t).into_owned()).collect()
        } else {
            tokens.collect()
        }
    }
}

/// Normalizes with the default settings (no stemming).
pub fn normalize(text: &str) -> Vec<String> {
    Normalizer::default().normalize(text)
}

fn term_frequencies<S: AsRef<str>>(tokens: &[S]) -> HashMap<&str, f64> {
    let mut tf = HashMap::new();
    for t in tokens {
        *tf.entry(t.as_ref()).or_insert(0.0) += 1.0;
    }
    tf
}

fn cosine(a: &HashMap<&str, f64>, b: &HashMap<&str, f64>) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small
        .iter()
        .filter_map(|(k, v)| large.get(k).map(|w| v * w))
        .sum();
    let na: f64 = a.values().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|v| v * v).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(0.0, 1.0)
}

/// Cosine similarity of term-frequency vectors; 0 if either side is empty.
pub fn similarity<S: AsRef<str>>(a: &[S], b: &[S]) -> f64 {
    cosine(&term_frequencies(a), &term_frequencies(b))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawArgument {
    pub id: String,
    pub text: String,
    pub author_group: AuthorGroup,
}

impl RawArgument {
    pub fn new(id: impl Into<String>, text: impl Into<String>, author_group: AuthorGroup) -> Self {
        Self { id: id.into(), text: text.into(), author_group }
    }
}

/// A corpus with cached normalized tokens and an id index.
#[derive(Debug, Clone)]
pub struct Corpus {
    args: Vec<RawArgument>,
    tokens: Vec<Vec<String>>,
    index: HashMap<String, usize>,
    normalizer: Normalizer,
}

impl Corpus {
    pub fn new(args: Vec<RawArgument>) -> Result<Self, CorpusError> {
        Self::with_normalizer(args, Normalizer::default())
    }

    pub fn with_normalizer(args: Vec<RawArgument>, normalizer: Normalizer) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(args.len());
        for (i, a) in args.iter().enumerate() {
            if a.text.trim().is_empty() {
                return Err(CorpusError::EmptyText(a.id.clone()));
            }
            if index.insert(a.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateArgument(a.id.clone()));
            }
        }
        let tokens = args.iter().map(|a| normalizer.normalize(&a.text)).collect();
        Ok(Self { args, tokens, index, normalizer })
    }

    pub fn len(&self) -> usize {
        self.args.len()
    }

    pub fn is_empty(&self) -> bool {
        self.args.is_empty()
    }

    pub fn args(&self) -> &[RawArgument] {
        &self.args
    }

    pub fn normalizer(&self) -> Normalizer {
        self.normalizer
    }

    pub fn get(&self, id: &str) -> Option<&RawArgument> {
        self.index.get(id).map(|&i| &self.args[i])
    }

    pub fn tokens(&self, id: &str) -> Option<&[String]> {
        self.index.get(id).map(|&i| self.tokens[i].as_slice())
    }

    fn position(&self, id: &str) -> Result<usize, CorpusError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| CorpusError::UnknownArgument(id.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub name: String,
    pub members: Vec<String>,
    pub representative: String,
}

impl Cluster {
    /// Builds a cluster, computing its name and representative.
    pub fn from_members(members: Vec<String>, corpus: &Corpus, seed: u64) -> Result<Self, CorpusError> {
        if members.is_empty() {
            return Err(CorpusError::EmptyCluster);
        }
        for m in &members {
            corpus.position(m)?;
        }
        let name = cluster_name(&members, corpus);
        let mut c = Cluster { name, members, representative: String::new() };
        c.representative = representative(&c, corpus, seed)?;
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Word counts over the normalized members, with first-seen order kept for
/// deterministic tie-breaking.
fn word_counts<'a>(members: &[String], corpus: &'a Corpus) -> Vec<(&'a str, usize)> {
    let mut order: Vec<(&str, usize)> = Vec::new();
    let mut pos: HashMap<&str, usize> = HashMap::new();
    for m in members {
        for t in corpus.tokens(m).unwrap_or_default() {
            match pos.get(t.as_str()) {
                Some(&i) => order[i].1 += 1,
                None => {
                    pos.insert(t, order.len());
                    order.push((t, 1));
                }
            }
        }
    }
    order
}

/// Most frequent non-stopword among the members; first seen wins ties.
fn cluster_name(members: &[String], corpus: &Corpus) -> String {
    let counts = word_counts(members, corpus);
    let mut best: Option<(&str, usize)> = None;
    for (w, n) in counts {
        if best.is_none_or(|(_, b)| n > b) {
            best = Some((w, n));
        }
    }
    best.map(|(w, _)| w.to_owned()).unwrap_or_default()
}

/// The cluster's most common words: those whose frequency equals the maximum.
pub fn top_words(c: &Cluster, corpus: &Corpus) -> Vec<String> {
    let counts = word_counts(&c.members, corpus);
    let max = counts.iter().map(|(_, n)| *n).max().unwrap_or(0);
    counts
        .into_iter()
        .filter(|(_, n)| *n == max && max > 0)
        .map(|(w, _)| w.to_owned())
        .collect()
}

/// Number of distinct top words a member contains.
pub fn member_score(member: &str, top: &[String], corpus: &Corpus) -> usize {
    let toks: HashSet<&str> = corpus
        .tokens(member)
        .unwrap_or_default()
        .iter()
        .map(String::as_str)
        .collect();
    top.iter().filter(|w| toks.contains(w.as_str())).count()
}

/// Picks a member containing the most top words, uniformly at random among ties.
pub fn representative(c: &Cluster, corpus: &Corpus, seed: u64) -> Result<String, CorpusError> {
    if c.members.is_empty() {
        return Err(CorpusError::EmptyCluster);
    }
    let top = top_words(c, corpus);
    let scores: Vec<usize> = c.members.iter().map(|m| member_score(m, &top, corpus)).collect();
    let best = *scores.iter().max().expect("non-empty");
    let ties: Vec<&String> = c
        .members
        .iter()
        .zip(&scores)
        .filter(|(_, s)| **s == best)
        .map(|(m, _)| m)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(ties[rng.gen_range(0..ties.len())].clone())
}

/// Unions two disjoint clusters and recomputes name and representative.
pub fn merge_clusters(a: &Cluster, b: &Cluster, corpus: &Corpus, seed: u64) -> Result<Cluster, CorpusError> {
    if a.members.is_empty() || b.members.is_empty() {
        return Err(CorpusError::EmptyCluster);
    }
    let left: HashSet<&String> = a.members.iter().collect();
    let overlap: Vec<String> = b.members.iter().filter(|m| left.contains(m)).cloned().collect();
    if !overlap.is_empty() {
        return Err(CorpusError::Overlap(overlap));
    }
    let members = a.members.iter().chain(&b.members).cloned().collect();
    Cluster::from_members(members, corpus, seed)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    pub clusters: Vec<Cluster>,
    pub unclustered: Vec<String>,
}

struct Building {
    members: Vec<usize>,
    centroid: HashMap<String, f64>,
}

impl Building {
    fn absorb(&mut self, idx: usize, tokens: &[String]) {
        self.members.push(idx);
        for t in tokens {
            *self.centroid.entry(t.clone()).or_insert(0.0) += 1.0;
        }
    }

    fn similarity(&self, tf: &HashMap<&str, f64>) -> f64 {
        let centroid: HashMap<&str, f64> = self.centroid.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        cosine(tf, &centroid)
    }
}

/// Greedy single-pass centroid clustering in corpus order.
///
/// Each argument joins the cluster whose centroid is most similar, provided
/// the similarity reaches `threshold`; otherwise it opens a new cluster.
/// Singletons whose best similarity to any other cluster stays below the
/// threshold are reported as unclustered.
pub fn cluster(corpus: &Corpus, threshold: f64, seed: u64) -> Result<Clustering, CorpusError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CorpusError::Threshold(threshold.to_string()));
    }
    let mut building: Vec<Building> = Vec::new();
    for (idx, tokens) in corpus.tokens.iter().enumerate() {
        let tf = term_frequencies(tokens);
        let mut best: Option<(usize, f64)> = None;
        for (ci, b) in building.iter().enumerate() {
            let s = b.similarity(&tf);
            if s >= threshold && best.is_none_or(|(_, bs)| s > bs) {
                best = Some((ci, s));
            }
        }
        match best {
            Some((ci, _)) => building[ci].absorb(idx, tokens),
            None => {
                let mut b = Building { members: Vec::new(), centroid: HashMap::new() };
                b.absorb(idx, tokens);
                building.push(b);
            }
        }
    }

    let mut keep = vec![true; building.len()];
    for (ci, b) in building.iter().enumerate() {
        if b.members.len() != 1 {
            continue;
        }
        let tf = term_frequencies(&corpus.tokens[b.members[0]]);
        let best = building
            .iter()
            .enumerate()
            .filter(|(oi, _)| *oi != ci)
            .map(|(_, o)| o.similarity(&tf))
            .fold(0.0_f64, f64::max);
        // An empty-token singleton has no similarity to anything.
        if best < threshold || tf.is_empty() {
            keep[ci] = false;
        }
    }

    let mut clusters = Vec::new();
    let mut unclustered = Vec::new();
    for (ci, b) in building.into_iter().enumerate() {
        let ids: Vec<String> = b.members.iter().map(|&i| corpus.args[i].id.clone()).collect();
        if keep[ci] {
            let c_seed = seed.wrapping_add(clusters.len() as u64);
            clusters.push(Cluster::from_members(ids, corpus, c_seed)?);
        } else {
            unclustered.extend(ids);
        }
    }
    Ok(Clustering { clusters, unclustered })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteSheet {
    pub voter_group: AuthorGroup,
    pub selections: BTreeMap<String, u32>,
    pub n_voters: u32,
}

/// A counterargument submitted for voting, before it has a rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub text: String,
    pub arg_type: ArgumentType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_cluster: Option<String>,
    pub source_group: AuthorGroup,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Candidate {
    pub fn new(id: impl Into<String>, arg_type: ArgumentType, source_group: AuthorGroup) -> Self {
        let id = id.into();
        Self {
            text: format!("counterargument {id}"),
            id,
            arg_type,
            target_cluster: None,
            source_group,
            extra: Map::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupVotes {
    pub meat_eater: u64,
    pub vegetarian: u64,
}

impl GroupVotes {
    pub fn add(&mut self, group: AuthorGroup, n: u64) {
        match group {
            AuthorGroup::MeatEater => self.meat_eater += n,
            AuthorGroup::Vegetarian => self.vegetarian += n,
        }
    }

    pub fn get(&self, group: AuthorGroup) -> u64 {
        match group {
            AuthorGroup::MeatEater => self.meat_eater,
            AuthorGroup::Vegetarian => self.vegetarian,
        }
    }

    pub fn total(&self) -> u64 {
        self.meat_eater + self.vegetarian
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub per_argument: BTreeMap<String, GroupVotes>,
    pub per_type: BTreeMap<ArgumentType, GroupVotes>,
    pub per_source: BTreeMap<AuthorGroup, GroupVotes>,
}

/// Sums selections per counterargument and voter group, then aggregates by
/// argument type and by the group that authored the counterargument.
pub fn tally(sheets: &[VoteSheet], candidates: &[Candidate]) -> Result<Tally, CorpusError> {
    let known: HashMap<&str, &Candidate> = candidates.iter().map(|c| (c.id.as_str(), c)).collect();
    let mut t = Tally::default();
    for c in candidates {
        t.per_argument.insert(c.id.clone(), GroupVotes::default());
        t.per_type.entry(c.arg_type).or_default();
        t.per_source.entry(c.source_group).or_default();
    }
    for sheet in sheets {
        if sheet.n_voters == 0 {
            return Err(CorpusError::NoVoters);
        }
        for (id, &count) in &sheet.selections {
            let cand = known
                .get(id.as_str())
                .ok_or_else(|| CorpusError::UnknownCounter(id.clone()))?;
            if count > sheet.n_voters {
                return Err(CorpusError::CountExceedsVoters {
                    id: id.clone(),
                    count,
                    n_voters: sheet.n_voters,
                });
            }
            let n = u64::from(count);
            t.per_argument.get_mut(id).expect("seeded above").add(sheet.voter_group, n);
            t.per_type.get_mut(&cand.arg_type).expect("seeded").add(sheet.voter_group, n);
            t.per_source.get_mut(&cand.source_group).expect("seeded").add(sheet.voter_group, n);
        }
    }
    Ok(t)
}

/// Whose votes order the candidates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankBy {
    #[default]
    MeatEater,
    Vegetarian,
    Combined,
}

impl RankBy {
    pub fn score(self, v: &GroupVotes) -> u64 {
        match self {
            RankBy::MeatEater => v.meat_eater,
            RankBy::Vegetarian => v.vegetarian,
            RankBy::Combined => v.total(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedGroup {
    pub arg_type: ArgumentType,
    pub target_cluster: Option<String>,
    pub counters: Vec<CounterArgument>,
    /// How many short of `k` the group was, if any.
    pub shortfall: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub groups: Vec<RankedGroup>,
}

impl Ranking {
    pub fn warnings(&self) -> Vec<String> {
        self.groups
            .iter()
            .filter(|g| g.shortfall > 0)
            .map(|g| {
                format!(
                    "group ({}, {}) has only {} candidates, {} short of k",
                    g.arg_type,
                    g.target_cluster.as_deref().unwrap_or("-"),
                    g.counters.len(),
                    g.shortfall
                )
            })
            .collect()
    }

    pub fn counters(&self) -> impl Iterator<Item = &CounterArgument> {
        self.groups.iter().flat_map(|g| g.counters.iter())
    }
}

/// Keeps the `k` best-voted candidates per (type, target) group.
///
/// Votes are sorted descending with a stable sort, so ties keep input order.
/// Groups appear in order of their first candidate.
pub fn top_k(tally: &Tally, candidates: &[Candidate], k: usize, rank_by: RankBy) -> Result<Ranking, CorpusError> {
    if k == 0 {
        return Err(CorpusError::ZeroK);
    }
    let mut order: Vec<(ArgumentType, Option<String>)> = Vec::new();
    let mut grouped: HashMap<(ArgumentType, Option<String>), Vec<&Candidate>> = HashMap::new();
    for c in candidates {
        let key = (c.arg_type, c.target_cluster.clone());
        let entry = grouped.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        entry.push(c);
    }

    let votes = |id: &str| tally.per_argument.get(id).copied().unwrap_or_default();
    let groups = order
        .into_iter()
        .map(|key| {
            let mut members = grouped.remove(&key).expect("grouped");
            members.sort_by(|a, b| rank_by.score(&votes(&b.id)).cmp(&rank_by.score(&votes(&a.id))));
            let shortfall = k.saturating_sub(members.len());
            let counters = members
                .into_iter()
                .take(k)
                .enumerate()
                .map(|(i, c)| {
                    let v = votes(&c.id);
                    CounterArgument {
                        id: c.id.clone(),
                        text: c.text.clone(),
                        arg_type: c.arg_type,
                        target_cluster: c.target_cluster.clone(),
                        source_group: c.source_group,
                        votes_me: v.meat_eater.try_into().unwrap_or(u32::MAX),
                        votes_veg: v.vegetarian.try_into().unwrap_or(u32::MAX),
                        rank: i as u32 + 1,
                        extra: c.extra.clone(),
                    }
                })
                .collect();
            RankedGroup { arg_type: key.0, target_cluster: key.1, counters, shortfall }
        })
        .collect();
    Ok(Ranking { groups })
}

/// Keyword concern label: "health" marks Health; "animal", "environment" or
/// "planet" mark Environment. Matching is case-insensitive on substrings.
pub fn label_concern(explanation: &str) -> ConcernLabel {
    let lower = explanation.to_lowercase();
    let health = lower.contains("health");
    let env = ["animal", "environment", "planet"].iter().any(|k| lower.contains(k));
    match (health, env) {
        (true, true) => ConcernLabel::Both,
        (true, false) => ConcernLabel::Health,
        (false, true) => ConcernLabel::Environment,
        (false, false) => ConcernLabel::Unlabeled,
    }
}
