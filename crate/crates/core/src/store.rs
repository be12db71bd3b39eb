//! Append-only session persistence and deterministic replay.
//!
//! Each session is one line-delimited file: a header line with the session
//! id, knowledge-base id and dialogue configuration, then one line per
//! event. The events produced by a single input are written with one
//! `write_all`, so a log never ends between a user event and the bot's
//! answer to it.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{GroupSummary, SessionOutcome};
use crate::dialogue::{
    Actor, BotMove, DialogueConfig, DialogueEngine, DialogueError, DialogueState, Event, Prompt, Session,
    Variant,
};
use crate::kb::Policy;

pub const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub session_id: String,
    pub kb_id: String,
    pub config: DialogueConfig,
    pub schema_version: u32,
}

/// One event line: the session id plus the event fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub session_id: String,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
enum LogLine {
    Header { header: SessionHeader },
    Event(EventRecord),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionLog {
    pub header: SessionHeader,
    pub events: Vec<Event>,
}

impl SessionLog {
    pub fn from_session(kb_id: &str, s: &Session) -> Self {
        Self {
            header: SessionHeader {
                session_id: s.id.clone(),
                kb_id: kb_id.to_owned(),
                config: s.config,
                schema_version: LOG_SCHEMA_VERSION,
            },
            events: s.events.clone(),
        }
    }

    pub fn header_line(&self) -> String {
        serde_json::to_string(&LogLine::Header { header: self.header.clone() }).expect("header serializes")
    }

    pub fn event_lines<'a>(session_id: &str, events: impl IntoIterator<Item = &'a Event>) -> String {
        let mut out = String::new();
        for e in events {
            let rec = EventRecord { session_id: session_id.to_owned(), event: e.clone() };
            out.push_str(&serde_json::to_string(&rec).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = self.header_line();
        out.push('\n');
        out.push_str(&Self::event_lines(&self.header.session_id, &self.events));
        out
    }

    pub fn parse(input: &str) -> Result<Self, ReplayError> {
        let mut header = None;
        let mut events = Vec::new();
        for (i, line) in input.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: LogLine = serde_json::from_str(line)
                .map_err(|e| ReplayError::Parse { line: i + 1, message: e.to_string() })?;
            match parsed {
                LogLine::Header { header: h } => {
                    if header.is_some() {
                        return Err(ReplayError::Parse { line: i + 1, message: "duplicate header".into() });
                    }
                    header = Some(h);
                }
                LogLine::Event(rec) => {
                    let h: &SessionHeader = header.as_ref().ok_or_else(|| ReplayError::Parse {
                        line: i + 1,
                        message: "event before header".into(),
                    })?;
                    if rec.session_id != h.session_id {
                        return Err(ReplayError::Parse {
                            line: i + 1,
                            message: format!("event for session `{}` in log of `{}`", rec.session_id, h.session_id),
                        });
                    }
                    events.push(rec.event);
                }
            }
        }
        let header = header.ok_or(ReplayError::Parse { line: 0, message: "missing header".into() })?;
        Ok(Self { header, events })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ReplayError> {
        Self::parse(&fs::read_to_string(path).map_err(|e| ReplayError::Io(e.to_string()))?)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
    #[error("sequence gap: expected seq {expected}, found {found}")]
    Gap { expected: u64, found: u64 },
    #[error("replay diverged at seq {seq}: {detail}")]
    Divergence { seq: u64, detail: String },
    #[error("unknown knowledge base `{0}`")]
    UnknownKb(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub session: Session,
    /// Bot move returned for each user input, in order.
    pub moves: Vec<(String, BotMove)>,
    pub summary: Option<SessionOutcome>,
}

fn describe(e: &Event) -> String {
    format!("{:?} {:?} `{}` -> {}", e.actor, e.kind, e.payload, e.state_after)
}

/// Feeds the logged user inputs through a fresh session and checks that
/// every event, bot and user, comes out identical (timestamps aside).
pub fn replay(log: &SessionLog, engine: &DialogueEngine) -> Result<ReplayOutcome, ReplayError> {
    for (i, e) in log.events.iter().enumerate() {
        if e.seq != i as u64 {
            return Err(ReplayError::Gap { expected: i as u64, found: e.seq });
        }
    }
    let mut session = engine
        .new_session(log.header.session_id.clone(), log.header.config)
        .map_err(|e| ReplayError::Divergence { seq: 0, detail: e.to_string() })?;
    let mut moves = Vec::new();
    for (k, logged) in log.events.iter().enumerate() {
        if k == session.events.len() {
            if logged.actor != Actor::User {
                return Err(ReplayError::Divergence {
                    seq: k as u64,
                    detail: format!("log has bot event {} but engine awaits input", describe(logged)),
                });
            }
            let mv = engine
                .apply(&mut session, &logged.payload)
                .map_err(|e| ReplayError::Divergence { seq: k as u64, detail: e.to_string() })?;
            moves.push((logged.payload.clone(), mv));
        }
        let produced = &session.events[k];
        if !produced.same_as(logged) {
            return Err(ReplayError::Divergence {
                seq: k as u64,
                detail: format!("logged {} but engine produced {}", describe(logged), describe(produced)),
            });
        }
        session.events[k].timestamp_ms = logged.timestamp_ms;
    }
    if session.events.len() > log.events.len() {
        let k = log.events.len();
        return Err(ReplayError::Divergence {
            seq: k as u64,
            detail: format!("log ends but engine produced {}", describe(&session.events[k])),
        });
    }
    let summary = if session.is_done() { SessionOutcome::from_session(&session).ok() } else { None };
    Ok(ReplayOutcome { session, moves, summary })
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown knowledge base `{0}`")]
    UnknownKb(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error(transparent)]
    Dialogue(#[from] DialogueError),
    #[error("input seq {got} does not match next expected seq {expected}")]
    SeqMismatch { expected: u64, got: u64, allowed: Vec<String> },
    #[error("session `{0}` is not complete")]
    NotDone(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to restore `{path}`: {source}")]
    Restore { path: PathBuf, source: ReplayError },
}

impl StoreError {
    /// Allowed input values when the error is about the current state.
    pub fn allowed(&self) -> Option<&[String]> {
        match self {
            StoreError::Dialogue(DialogueError::InvalidInput { allowed, .. }) => Some(allowed),
            StoreError::SeqMismatch { allowed, .. } => Some(allowed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub session_id: String,
    pub kb_id: String,
    pub config: DialogueConfig,
    pub status: SessionStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputReply {
    pub seq: u64,
    #[serde(flatten)]
    pub reply: BotMove,
}

struct Slot {
    kb_id: String,
    session: Session,
    /// (input value, reply) for every accepted input; index = input seq.
    replies: Vec<(String, BotMove)>,
}

/// Defaults applied to new sessions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionDefaults {
    pub expand_min_words: usize,
    pub max_expand_prompts: usize,
    pub seed: u64,
}

impl Default for SessionDefaults {
    fn default() -> Self {
        let c = DialogueConfig::new(Variant::I, Policy::Baseline);
        Self { expand_min_words: c.expand_min_words, max_expand_prompts: c.max_expand_prompts, seed: 0 }
    }
}

/// Sessions keyed by id, optionally persisted under a directory.
///
/// Inputs to one session are serialized by a per-session lock; distinct
/// sessions proceed independently.
pub struct SessionStore {
    dir: Option<PathBuf>,
    engines: BTreeMap<String, DialogueEngine>,
    defaults: SessionDefaults,
    slots: RwLock<HashMap<String, Arc<Mutex<Slot>>>>,
    counter: Mutex<u64>,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn stamp(events: &mut [Event]) {
    let t = now_ms();
    for e in events {
        e.timestamp_ms.get_or_insert(t);
    }
}

impl SessionStore {
    pub fn in_memory(engines: BTreeMap<String, DialogueEngine>, defaults: SessionDefaults) -> Self {
        Self { dir: None, engines, defaults, slots: RwLock::new(HashMap::new()), counter: Mutex::new(0) }
    }

    /// Opens (creating if needed) a persistent store and restores every
    /// session log found in `dir` by replaying it.
    pub fn open(
        dir: impl Into<PathBuf>,
        engines: BTreeMap<String, DialogueEngine>,
        defaults: SessionDefaults,
    ) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let store = Self { dir: Some(dir.clone()), ..Self::in_memory(engines, defaults) };
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        let mut slots = store.slots.write();
        for path in paths {
            let restore = |source| StoreError::Restore { path: path.clone(), source };
            let log = SessionLog::load(&path).map_err(restore)?;
            let engine = store
                .engines
                .get(&log.header.kb_id)
                .ok_or_else(|| restore(ReplayError::UnknownKb(log.header.kb_id.clone())))?;
            let out = replay(&log, engine).map_err(restore)?;
            slots.insert(
                log.header.session_id.clone(),
                Arc::new(Mutex::new(Slot { kb_id: log.header.kb_id.clone(), session: out.session, replies: out.moves })),
            );
        }
        *store.counter.lock() = slots.len() as u64;
        drop(slots);
        Ok(store)
    }

    pub fn kb_ids(&self) -> impl Iterator<Item = &str> {
        self.engines.keys().map(String::as_str)
    }

    pub fn engine(&self, kb_id: &str) -> Option<&DialogueEngine> {
        self.engines.get(kb_id)
    }

    fn log_path(&self, id: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{id}.jsonl")))
    }

    fn next_id(&self) -> String {
        let mut c = self.counter.lock();
        loop {
            *c += 1;
            let id = format!("s{:06}", *c);
            if !self.slots.read().contains_key(&id) {
                return id;
            }
        }
    }

    /// Starts a session and returns its id with the opening prompt.
    pub fn create_session(&self, kb_id: &str, variant: Variant, policy: Policy) -> Result<(String, Prompt), StoreError> {
        let engine = self.engines.get(kb_id).ok_or_else(|| StoreError::UnknownKb(kb_id.to_owned()))?;
        let id = self.next_id();
        let config = DialogueConfig {
            variant,
            policy,
            expand_min_words: self.defaults.expand_min_words,
            max_expand_prompts: self.defaults.max_expand_prompts,
            seed: self.defaults.seed,
            shuffle: false,
        };
        let mut session = engine.new_session(id.clone(), config)?;
        stamp(&mut session.events);
        if let Some(path) = self.log_path(&id) {
            let log = SessionLog::from_session(kb_id, &session);
            let mut f = OpenOptions::new().create_new(true).append(true).open(path)?;
            f.write_all(log.to_jsonl().as_bytes())?;
            f.sync_data()?;
        }
        let prompt = engine.current_prompt(&session).expect("fresh session has a prompt");
        self.slots.write().insert(
            id.clone(),
            Arc::new(Mutex::new(Slot { kb_id: kb_id.to_owned(), session, replies: Vec::new() })),
        );
        Ok((id, prompt))
    }

    fn slot(&self, id: &str) -> Result<Arc<Mutex<Slot>>, StoreError> {
        self.slots.read().get(id).cloned().ok_or_else(|| StoreError::UnknownSession(id.to_owned()))
    }

    /// Applies the input numbered `seq` (0-based count of earlier inputs).
    ///
    /// Resending an already-accepted `(seq, value)` returns the original
    /// reply without appending anything. A different value for an
    /// accepted seq, or a seq from the future, is rejected.
    pub fn post_input(&self, id: &str, seq: u64, value: &str) -> Result<BotMove, StoreError> {
        let slot = self.slot(id)?;
        let mut slot = slot.lock();
        let engine = self.engines.get(&slot.kb_id).ok_or_else(|| StoreError::UnknownKb(slot.kb_id.clone()))?;
        let expected = slot.replies.len() as u64;
        let allowed = || engine.current_prompt(&slot.session).map(|p| p.option_values()).unwrap_or_default();
        if seq < expected {
            let (prev, reply) = &slot.replies[seq as usize];
            if prev == value {
                return Ok(reply.clone());
            }
            return Err(StoreError::SeqMismatch { expected, got: seq, allowed: allowed() });
        }
        if seq > expected {
            return Err(StoreError::SeqMismatch { expected, got: seq, allowed: allowed() });
        }
        let mut next = slot.session.clone();
        let before = next.events.len();
        let mv = engine.apply(&mut next, value)?;
        stamp(&mut next.events[before..]);
        if let Some(path) = self.log_path(id) {
            let lines = SessionLog::event_lines(id, &next.events[before..]);
            let mut f = OpenOptions::new().append(true).open(path)?;
            f.write_all(lines.as_bytes())?;
            f.sync_data()?;
        }
        slot.session = next;
        slot.replies.push((value.to_owned(), mv.clone()));
        Ok(mv)
    }

    pub fn session(&self, id: &str) -> Result<Session, StoreError> {
        Ok(self.slot(id)?.lock().session.clone())
    }

    /// Knowledge-base id and session state, read under one lock.
    pub fn snapshot(&self, id: &str) -> Result<(String, Session), StoreError> {
        let slot = self.slot(id)?;
        let slot = slot.lock();
        Ok((slot.kb_id.clone(), slot.session.clone()))
    }

    pub fn current_prompt(&self, id: &str) -> Result<Option<Prompt>, StoreError> {
        let slot = self.slot(id)?;
        let slot = slot.lock();
        let engine = self.engines.get(&slot.kb_id).ok_or_else(|| StoreError::UnknownKb(slot.kb_id.clone()))?;
        Ok(engine.current_prompt(&slot.session))
    }

    pub fn log(&self, id: &str) -> Result<SessionLog, StoreError> {
        let slot = self.slot(id)?;
        let slot = slot.lock();
        Ok(SessionLog::from_session(&slot.kb_id, &slot.session))
    }

    /// A one-participant summary for a finished session.
    pub fn summary(&self, id: &str) -> Result<GroupSummary, StoreError> {
        let s = self.session(id)?;
        let outcome = SessionOutcome::from_session(&s).map_err(|_| StoreError::NotDone(id.to_owned()))?;
        Ok(GroupSummary::from_outcomes([&outcome]))
    }

    pub fn index(&self) -> Vec<IndexEntry> {
        let slots = self.slots.read();
        let mut out: Vec<IndexEntry> = slots
            .iter()
            .map(|(id, slot)| {
                let slot = slot.lock();
                IndexEntry {
                    session_id: id.clone(),
                    kb_id: slot.kb_id.clone(),
                    config: slot.session.config,
                    status: if slot.session.state == DialogueState::Done {
                        SessionStatus::Done
                    } else {
                        SessionStatus::Active
                    },
                }
            })
            .collect();
        out.sort_by(|a, b| a.session_id.cmp(&b.session_id));
        out
    }
}

/// Number of user events in a log, which is the seq the next input must carry.
pub fn next_input_seq(events: &[Event]) -> u64 {
    events.iter().filter(|e| e.actor == Actor::User).count() as u64
}
