//! Persuasion dialogue state machine.
//!
//! A session walks through a fixed protocol: the persuadee states an initial
//! intention, picks a concern and a main reason for eating meat, then hears
//! twelve counterarguments. After each one they agree or disagree; disagreeing
//! (and, in variant II, agreeing) prompts for a free-text reason that is
//! harvested. The session ends by asking for the intention again.
//!
//! The engine never interprets free text beyond counting its words, so bot
//! moves depend only on choices, word counts and the configuration.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::kb::{ArgumentType, Concern, KbError, KnowledgeBase, Polarity, Policy};

pub const COUNTERS_TOTAL: usize = 12;

pub const INTENTION_PROMPT: &str = "Would you consider reducing your meat consumption?";
pub const FINAL_INTENTION_PROMPT: &str =
    "Thank you for chatting. Would you now consider reducing your meat consumption?";
pub const CONCERN_PROMPT: &str = "What are you more concerned about: the impact meat consumption has on your health, or the impact it has on the environment and animals?";
pub const MAIN_ARGUMENT_PROMPT: &str = "What is your main reason for eating meat?";
pub const WHY_PROMPT: &str = "Why?";
pub const WHY_EAT_MEAT_PROMPT: &str = "Why do you eat meat then?";
pub const EXPAND_PROMPT: &str = "Could you expand on that?";
pub const OTHER_ARGUMENT: &str = "other";

/// Five-point intention scale, ordered from least to most willing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentionLevel {
    DefinitelyWouldnt,
    ProbablyWouldnt,
    Might,
    ProbablyWould,
    DefinitelyWould,
}

impl IntentionLevel {
    pub const ALL: [IntentionLevel; 5] = [
        IntentionLevel::DefinitelyWouldnt,
        IntentionLevel::ProbablyWouldnt,
        IntentionLevel::Might,
        IntentionLevel::ProbablyWould,
        IntentionLevel::DefinitelyWould,
    ];

    pub fn ordinal(self) -> u8 {
        self as u8
    }

    pub fn from_ordinal(n: u8) -> Option<Self> {
        Self::ALL.get(n as usize).copied()
    }

    /// Moves `delta` steps along the scale, clamped at both ends.
    pub fn shifted(self, delta: i32) -> Self {
        let n = (i32::from(self.ordinal()) + delta).clamp(0, 4);
        Self::ALL[n as usize]
    }

    pub fn value(self) -> &'static str {
        match self {
            IntentionLevel::DefinitelyWouldnt => "definitely_wouldnt",
            IntentionLevel::ProbablyWouldnt => "probably_wouldnt",
            IntentionLevel::Might => "might",
            IntentionLevel::ProbablyWould => "probably_would",
            IntentionLevel::DefinitelyWould => "definitely_would",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            IntentionLevel::DefinitelyWouldnt => "definitely wouldn't",
            IntentionLevel::ProbablyWouldnt => "probably wouldn't",
            IntentionLevel::Might => "might",
            IntentionLevel::ProbablyWould => "probably would",
            IntentionLevel::DefinitelyWould => "definitely would",
        }
    }

    pub fn from_value(v: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.value() == v)
    }
}

/// Signed change on the intention scale from `initial` to `final_`.
pub fn intention_points(initial: IntentionLevel, final_: IntentionLevel) -> i8 {
    final_.ordinal() as i8 - initial.ordinal() as i8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Agreeing moves straight on to the next counterargument.
    #[serde(rename = "I")]
    I,
    /// Agreeing is followed by "Why do you eat meat then?".
    #[serde(rename = "II")]
    II,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::I, Variant::II];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::I => "I",
            Variant::II => "II",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_expand_min_words() -> usize {
    4
}

fn default_max_expand_prompts() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueConfig {
    pub variant: Variant,
    pub policy: Policy,
    /// Replies shorter than this many words get an expand prompt.
    #[serde(default = "default_expand_min_words")]
    pub expand_min_words: usize,
    #[serde(default = "default_max_expand_prompts")]
    pub max_expand_prompts: usize,
    #[serde(default)]
    pub seed: u64,
    /// Shuffle the counterargument schedule instead of alternating polarity.
    #[serde(default)]
    pub shuffle: bool,
}

impl DialogueConfig {
    pub fn new(variant: Variant, policy: Policy) -> Self {
        Self {
            variant,
            policy,
            expand_min_words: default_expand_min_words(),
            max_expand_prompts: default_max_expand_prompts(),
            seed: 0,
            shuffle: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DialogueState {
    AwaitInitialIntention,
    AwaitConcern,
    AwaitMainArgument,
    PresentCounter(usize),
    AwaitStance(usize),
    AwaitWhy(usize),
    AwaitExpand(usize),
    AwaitWhyEatMeat(usize),
    AwaitFinalIntention,
    Done,
}

impl DialogueState {
    pub fn counter_index(self) -> Option<usize> {
        match self {
            DialogueState::PresentCounter(i)
            | DialogueState::AwaitStance(i)
            | DialogueState::AwaitWhy(i)
            | DialogueState::AwaitExpand(i)
            | DialogueState::AwaitWhyEatMeat(i) => Some(i),
            _ => None,
        }
    }

    pub fn accepts_free_text(self) -> bool {
        matches!(
            self,
            DialogueState::AwaitWhy(_) | DialogueState::AwaitExpand(_) | DialogueState::AwaitWhyEatMeat(_)
        )
    }
}

impl fmt::Display for DialogueState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DialogueState::AwaitInitialIntention => f.write_str("AwaitInitialIntention"),
            DialogueState::AwaitConcern => f.write_str("AwaitConcern"),
            DialogueState::AwaitMainArgument => f.write_str("AwaitMainArgument"),
            DialogueState::PresentCounter(i) => write!(f, "PresentCounter({i})"),
            DialogueState::AwaitStance(i) => write!(f, "AwaitStance({i})"),
            DialogueState::AwaitWhy(i) => write!(f, "AwaitWhy({i})"),
            DialogueState::AwaitExpand(i) => write!(f, "AwaitExpand({i})"),
            DialogueState::AwaitWhyEatMeat(i) => write!(f, "AwaitWhyEatMeat({i})"),
            DialogueState::AwaitFinalIntention => f.write_str("AwaitFinalIntention"),
            DialogueState::Done => f.write_str("Done"),
        }
    }
}

impl FromStr for DialogueState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let simple = match s {
            "AwaitInitialIntention" => Some(DialogueState::AwaitInitialIntention),
            "AwaitConcern" => Some(DialogueState::AwaitConcern),
            "AwaitMainArgument" => Some(DialogueState::AwaitMainArgument),
            "AwaitFinalIntention" => Some(DialogueState::AwaitFinalIntention),
            "Done" => Some(DialogueState::Done),
            _ => None,
        };
        if let Some(st) = simple {
            return Ok(st);
        }
        let bad = || format!("unknown dialogue state `{s}`");
        let (name, rest) = s.split_once('(').ok_or_else(bad)?;
        let i: usize = rest.strip_suffix(')').ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if !(1..=COUNTERS_TOTAL).contains(&i) {
            return Err(bad());
        }
        Ok(match name {
            "PresentCounter" => DialogueState::PresentCounter(i),
            "AwaitStance" => DialogueState::AwaitStance(i),
            "AwaitWhy" => DialogueState::AwaitWhy(i),
            "AwaitExpand" => DialogueState::AwaitExpand(i),
            "AwaitWhyEatMeat" => DialogueState::AwaitWhyEatMeat(i),
            _ => return Err(bad()),
        })
    }
}

impl Serialize for DialogueState {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DialogueState {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Bot,
    User,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Prompt,
    Choice,
    Counterargument,
    Stance,
    FreeText,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub actor: Actor,
    pub kind: EventKind,
    pub payload: String,
    pub state_after: DialogueState,
    /// Wall-clock stamp added by the store; never compared on replay.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp_ms: Option<u64>,
}

impl Event {
    /// Equality on everything except the timestamp.
    pub fn same_as(&self, other: &Event) -> bool {
        self.seq == other.seq
            && self.actor == other.actor
            && self.kind == other.kind
            && self.payload == other.payload
            && self.state_after == other.state_after
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stance {
    Agree,
    Disagree,
}

impl Stance {
    pub fn as_str(self) -> &'static str {
        match self {
            Stance::Agree => "agree",
            Stance::Disagree => "disagree",
        }
    }
}

/// A free-text argument collected from the persuadee.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Harvested {
    pub text: String,
    /// Position of the counterargument (1..=12) that prompted it.
    pub index: usize,
    pub counter_id: String,
    pub stance: Stance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub config: DialogueConfig,
    pub state: DialogueState,
    pub concern: Option<Concern>,
    /// Popular argument id, or `"other"`.
    pub main_argument: Option<String>,
    pub initial_intention: Option<IntentionLevel>,
    pub final_intention: Option<IntentionLevel>,
    pub schedule: Vec<String>,
    pub events: Vec<Event>,
    pub harvested: Vec<Harvested>,
    pub disagreements: u32,
    #[serde(default)]
    pending: Option<String>,
    #[serde(default)]
    expands_used: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceOption {
    pub value: String,
    pub label: String,
}

impl ChoiceOption {
    fn new(value: impl Into<String>, label: impl Into<String>) -> Self {
        Self { value: value.into(), label: label.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InputSpec {
    Choice { options: Vec<ChoiceOption> },
    FreeText,
}

/// What the bot currently asks of the persuadee.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub state: DialogueState,
    pub text: String,
    pub input: InputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counter_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arg_type: Option<ArgumentType>,
}

impl Prompt {
    pub fn option_values(&self) -> Vec<String> {
        match &self.input {
            InputSpec::Choice { options } => options.iter().map(|o| o.value.clone()).collect(),
            InputSpec::FreeText => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoneSummary {
    pub initial_intention: IntentionLevel,
    pub final_intention: IntentionLevel,
    pub intention_points: i8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BotMove {
    Prompt(Prompt),
    Done(DoneSummary),
}

#[derive(Debug, Error)]
pub enum DialogueError {
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error("insufficient {arg_type} counterarguments: need {needed}, have {available}")]
    InsufficientCounters { arg_type: ArgumentType, needed: usize, available: usize },
    #[error("input `{input}` not valid in state {state}; expected {}", expected(.allowed))]
    InvalidInput { state: DialogueState, input: String, allowed: Vec<String> },
    #[error("session is already done")]
    SessionDone,
    #[error("session is not done (state {0})")]
    NotDone(DialogueState),
}

fn expected(allowed: &[String]) -> String {
    if allowed.is_empty() {
        "non-empty text".to_owned()
    } else {
        format!("one of {}", allowed.join(", "))
    }
}

/// Orders the twelve counterarguments for a session.
///
/// Strategic sessions draw six positive and six negative counters from the
/// scope matching the concern; baseline sessions take three of each
/// consequential type. Counters are taken by ascending rank and alternate
/// positive then negative; `shuffle` replaces that order with a seeded
/// permutation.
pub fn schedule_counters(
    policy: Policy,
    concern: Concern,
    kb: &KnowledgeBase,
    seed: u64,
    shuffle: bool,
) -> Result<Vec<String>, DialogueError> {
    let types: Vec<ArgumentType> = match policy {
        Policy::Strategic => vec![
            ArgumentType::consequence(Polarity::Positive, concern.scope()),
            ArgumentType::consequence(Polarity::Negative, concern.scope()),
        ],
        Policy::Baseline => ArgumentType::CONSEQUENTIAL.to_vec(),
    };
    let per_type = COUNTERS_TOTAL / types.len();
    let mut lists = Vec::with_capacity(types.len());
    for t in types {
        let ranked = kb.ranked(t);
        if ranked.len() < per_type {
            return Err(DialogueError::InsufficientCounters {
                arg_type: t,
                needed: per_type,
                available: ranked.len(),
            });
        }
        lists.push(ranked[..per_type].iter().map(|c| c.id.clone()).collect::<Vec<_>>());
    }
    let mut schedule = Vec::with_capacity(COUNTERS_TOTAL);
    for r in 0..per_type {
        for list in &lists {
            schedule.push(list[r].clone());
        }
    }
    if shuffle {
        schedule.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    Ok(schedule)
}

/// Runs sessions against one shared, immutable knowledge base.
#[derive(Debug, Clone)]
pub struct DialogueEngine {
    kb: Arc<KnowledgeBase>,
}

impl DialogueEngine {
    pub fn new(kb: Arc<KnowledgeBase>) -> Self {
        Self { kb }
    }

    pub fn kb(&self) -> &Arc<KnowledgeBase> {
        &self.kb
    }

    pub fn new_session(&self, id: impl Into<String>, config: DialogueConfig) -> Result<Session, DialogueError> {
        self.kb.require_policy(config.policy)?;
        let mut s = Session {
            id: id.into(),
            config,
            state: DialogueState::AwaitInitialIntention,
            concern: None,
            main_argument: None,
            initial_intention: None,
            final_intention: None,
            schedule: Vec::new(),
            events: Vec::new(),
            harvested: Vec::new(),
            disagreements: 0,
            pending: None,
            expands_used: 0,
        };
        s.push(Actor::Bot, EventKind::Prompt, INTENTION_PROMPT, DialogueState::AwaitInitialIntention);
        Ok(s)
    }

    /// The prompt for the session's current state, or `None` once done.
    pub fn current_prompt(&self, s: &Session) -> Option<Prompt> {
        let state = s.state;
        let free = |text: &str| Prompt {
            state,
            text: text.to_owned(),
            input: InputSpec::FreeText,
            counter_id: None,
            arg_type: None,
        };
        let choice = |text: &str, options: Vec<ChoiceOption>| Prompt {
            state,
            text: text.to_owned(),
            input: InputSpec::Choice { options },
            counter_id: None,
            arg_type: None,
        };
        Some(match state {
            DialogueState::AwaitInitialIntention => choice(INTENTION_PROMPT, intention_options()),
            DialogueState::AwaitFinalIntention => choice(FINAL_INTENTION_PROMPT, intention_options()),
            DialogueState::AwaitConcern => choice(CONCERN_PROMPT, concern_options()),
            DialogueState::AwaitMainArgument => choice(MAIN_ARGUMENT_PROMPT, self.main_argument_options()),
            DialogueState::PresentCounter(i) | DialogueState::AwaitStance(i) => {
                let id = &s.schedule[i - 1];
                let counter = self.kb.counter(id);
                Prompt {
                    state,
                    text: counter.map(|c| c.text.clone()).unwrap_or_default(),
                    input: InputSpec::Choice { options: stance_options() },
                    counter_id: Some(id.clone()),
                    arg_type: counter.map(|c| c.arg_type),
                }
            }
            DialogueState::AwaitWhy(_) => free(WHY_PROMPT),
            DialogueState::AwaitWhyEatMeat(_) => free(WHY_EAT_MEAT_PROMPT),
            DialogueState::AwaitExpand(_) => free(EXPAND_PROMPT),
            DialogueState::Done => return None,
        })
    }

    fn main_argument_options(&self) -> Vec<ChoiceOption> {
        self.kb
            .popular_args
            .iter()
            .map(|p| ChoiceOption::new(p.id.clone(), p.text.clone()))
            .chain(std::iter::once(ChoiceOption::new(OTHER_ARGUMENT, "Other")))
            .collect()
    }

    /// Applies one persuadee input. On error the session is left untouched.
    pub fn apply(&self, session: &mut Session, input: &str) -> Result<BotMove, DialogueError> {
        if session.state == DialogueState::Done {
            return Err(DialogueError::SessionDone);
        }
        let mut next = session.clone();
        let mv = self.step(&mut next, input)?;
        *session = next;
        Ok(mv)
    }

    fn step(&self, s: &mut Session, input: &str) -> Result<BotMove, DialogueError> {
        let prompt = self.current_prompt(s).ok_or(DialogueError::SessionDone)?;
        match s.state {
            DialogueState::AwaitInitialIntention => {
                let value = resolve_choice(&prompt, input)?;
                s.initial_intention = IntentionLevel::from_value(&value);
                s.push(Actor::User, EventKind::Choice, &value, DialogueState::AwaitConcern);
                Ok(s.ask(self, CONCERN_PROMPT, DialogueState::AwaitConcern))
            }
            DialogueState::AwaitConcern => {
                let value = resolve_choice(&prompt, input)?;
                s.concern = Concern::ALL.into_iter().find(|c| c.as_str() == value);
                s.push(Actor::User, EventKind::Choice, &value, DialogueState::AwaitMainArgument);
                Ok(s.ask(self, MAIN_ARGUMENT_PROMPT, DialogueState::AwaitMainArgument))
            }
            DialogueState::AwaitMainArgument => {
                let value = resolve_choice(&prompt, input)?;
                let concern = s.concern.expect("concern chosen before main argument");
                let cfg = s.config;
                s.schedule = schedule_counters(cfg.policy, concern, &self.kb, cfg.seed, cfg.shuffle)?;
                s.main_argument = Some(value.clone());
                s.push(Actor::User, EventKind::Choice, &value, DialogueState::PresentCounter(1));
                Ok(s.present_counter(self, 1))
            }
            DialogueState::AwaitStance(i) => {
                let value = resolve_choice(&prompt, input)?;
                if value == Stance::Disagree.as_str() {
                    s.disagreements += 1;
                    s.push(Actor::User, EventKind::Stance, &value, DialogueState::AwaitWhy(i));
                    return Ok(s.ask(self, WHY_PROMPT, DialogueState::AwaitWhy(i)));
                }
                match s.config.variant {
                    Variant::I => {
                        s.push(Actor::User, EventKind::Stance, &value, after_counter(i));
                        Ok(s.advance(self, i))
                    }
                    Variant::II => {
                        s.push(Actor::User, EventKind::Stance, &value, DialogueState::AwaitWhyEatMeat(i));
                        Ok(s.ask(self, WHY_EAT_MEAT_PROMPT, DialogueState::AwaitWhyEatMeat(i)))
                    }
                }
            }
            DialogueState::AwaitWhy(i) | DialogueState::AwaitWhyEatMeat(i) | DialogueState::AwaitExpand(i) => {
                let text = input.trim();
                if text.is_empty() {
                    return Err(DialogueError::InvalidInput {
                        state: s.state,
                        input: input.to_owned(),
                        allowed: Vec::new(),
                    });
                }
                let combined = match s.pending.take() {
                    Some(p) => format!("{p} {text}"),
                    None => {
                        s.expands_used = 0;
                        text.to_owned()
                    }
                };
                let cfg = s.config;
                if word_count(&combined) < cfg.expand_min_words && s.expands_used < cfg.max_expand_prompts {
                    s.expands_used += 1;
                    s.pending = Some(combined);
                    s.push(Actor::User, EventKind::FreeText, text, DialogueState::AwaitExpand(i));
                    return Ok(s.ask(self, EXPAND_PROMPT, DialogueState::AwaitExpand(i)));
                }
                s.expands_used = 0;
                let stance = s.last_stance().unwrap_or(Stance::Disagree);
                s.harvested.push(Harvested {
                    text: combined,
                    index: i,
                    counter_id: s.schedule[i - 1].clone(),
                    stance,
                });
                s.push(Actor::User, EventKind::FreeText, text, after_counter(i));
                Ok(s.advance(self, i))
            }
            DialogueState::AwaitFinalIntention => {
                let value = resolve_choice(&prompt, input)?;
                let fin = IntentionLevel::from_value(&value).expect("validated option");
                s.final_intention = Some(fin);
                s.push(Actor::User, EventKind::Choice, &value, DialogueState::Done);
                s.state = DialogueState::Done;
                Ok(BotMove::Done(s.done_summary().expect("done session has both intentions")))
            }
            DialogueState::PresentCounter(_) | DialogueState::Done => Err(DialogueError::SessionDone),
        }
    }
}

fn after_counter(i: usize) -> DialogueState {
    if i >= COUNTERS_TOTAL {
        DialogueState::AwaitFinalIntention
    } else {
        DialogueState::PresentCounter(i + 1)
    }
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

fn intention_options() -> Vec<ChoiceOption> {
    IntentionLevel::ALL
        .into_iter()
        .map(|l| ChoiceOption::new(l.value(), l.label()))
        .collect()
}

fn concern_options() -> Vec<ChoiceOption> {
    vec![
        ChoiceOption::new("health", "health"),
        ChoiceOption::new("environment", "environment/animals"),
    ]
}

fn stance_options() -> Vec<ChoiceOption> {
    vec![ChoiceOption::new("agree", "agree"), ChoiceOption::new("disagree", "disagree")]
}

/// Matches input against an option value or label, case-insensitively.
fn resolve_choice(prompt: &Prompt, input: &str) -> Result<String, DialogueError> {
    let wanted = input.trim();
    let options = match &prompt.input {
        InputSpec::Choice { options } => options,
        InputSpec::FreeText => unreachable!("choice resolution on free-text prompt"),
    };
    options
        .iter()
        .find(|o| o.value.eq_ignore_ascii_case(wanted) || o.label.eq_ignore_ascii_case(wanted))
        .map(|o| o.value.clone())
        .ok_or_else(|| DialogueError::InvalidInput {
            state: prompt.state,
            input: input.to_owned(),
            allowed: prompt.option_values(),
        })
}

impl Session {
    fn push(&mut self, actor: Actor, kind: EventKind, payload: &str, state_after: DialogueState) {
        self.events.push(Event {
            seq: self.events.len() as u64,
            actor,
            kind,
            payload: payload.to_owned(),
            state_after,
            timestamp_ms: None,
        });
    }

    fn ask(&mut self, engine: &DialogueEngine, text: &str, state: DialogueState) -> BotMove {
        self.state = state;
        self.push(Actor::Bot, EventKind::Prompt, text, state);
        BotMove::Prompt(engine.current_prompt(self).expect("non-terminal state"))
    }

    fn present_counter(&mut self, engine: &DialogueEngine, i: usize) -> BotMove {
        let id = self.schedule[i - 1].clone();
        self.state = DialogueState::AwaitStance(i);
        self.push(Actor::Bot, EventKind::Counterargument, &id, DialogueState::AwaitStance(i));
        BotMove::Prompt(engine.current_prompt(self).expect("non-terminal state"))
    }

    fn advance(&mut self, engine: &DialogueEngine, i: usize) -> BotMove {
        if i >= COUNTERS_TOTAL {
            self.ask(engine, FINAL_INTENTION_PROMPT, DialogueState::AwaitFinalIntention)
        } else {
            self.present_counter(engine, i + 1)
        }
    }

    fn last_stance(&self) -> Option<Stance> {
        self.events
            .iter()
            .rev()
            .find(|e| e.kind == EventKind::Stance)
            .map(|e| if e.payload == "agree" { Stance::Agree } else { Stance::Disagree })
    }

    pub fn is_done(&self) -> bool {
        self.state == DialogueState::Done
    }

    pub fn done_summary(&self) -> Option<DoneSummary> {
        let (i, f) = (self.initial_intention?, self.final_intention?);
        Some(DoneSummary {
            initial_intention: i,
            final_intention: f,
            intention_points: intention_points(i, f),
        })
    }

    /// Payloads of user events, in order; feeding them to a fresh engine
    /// recreates the session.
    pub fn user_inputs(&self) -> impl Iterator<Item = &str> {
        self.events
            .iter()
            .filter(|e| e.actor == Actor::User)
            .map(|e| e.payload.as_str())
    }

    pub fn bot_events(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.actor == Actor::Bot)
    }

    /// Recomputes harvested texts and the disagreement count from the
    /// event log alone.
    pub fn derive_from_events(&self) -> (Vec<String>, u32) {
        let mut harvested = Vec::new();
        let mut pending: Option<String> = None;
        let mut disagreements = 0;
        for e in self.events.iter().filter(|e| e.actor == Actor::User) {
            match e.kind {
                EventKind::Stance if e.payload == "disagree" => disagreements += 1,
                EventKind::FreeText => {
                    let text = match pending.take() {
                        Some(p) => format!("{p} {}", e.payload),
                        None => e.payload.clone(),
                    };
                    if matches!(e.state_after, DialogueState::AwaitExpand(_)) {
                        pending = Some(text);
                    } else {
                        harvested.push(text);
                    }
                }
                _ => {}
            }
        }
        (harvested, disagreements)
    }
}

/// Number of arguments harvested in a finished session.
pub fn harvest_count(session: &Session) -> Result<usize, DialogueError> {
    if !session.is_done() {
        return Err(DialogueError::NotDone(session.state));
    }
    Ok(session.harvested.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::kb::concern_of;

    fn engine() -> DialogueEngine {
        DialogueEngine::new(Arc::new(fixtures::reference_kb()))
    }

    fn start(e: &DialogueEngine, variant: Variant, policy: Policy, concern: &str) -> Session {
        let mut s = e.new_session("t", DialogueConfig::new(variant, policy)).unwrap();
        e.apply(&mut s, "probably_wouldnt").unwrap();
        e.apply(&mut s, concern).unwrap();
        e.apply(&mut s, "taste").unwrap();
        s
    }

    fn types_of(e: &DialogueEngine, s: &Session) -> Vec<ArgumentType> {
        s.schedule.iter().map(|id| e.kb().counter(id).unwrap().arg_type).collect()
    }

    #[test]
    fn new_session_starts_with_intention_prompt() {
        let e = engine();
        let s = e.new_session("a", DialogueConfig::new(Variant::I, Policy::Strategic)).unwrap();
        assert_eq!(s.state, DialogueState::AwaitInitialIntention);
        assert_eq!(s.events.len(), 1);
        assert_eq!(s.events[0].actor, Actor::Bot);
        assert_eq!(s.events[0].kind, EventKind::Prompt);
        let p = e.current_prompt(&s).unwrap();
        let labels: Vec<_> = match &p.input {
            InputSpec::Choice { options } => options.iter().map(|o| o.label.clone()).collect(),
            _ => panic!(),
        };
        assert_eq!(
            labels,
            ["definitely wouldn't", "probably wouldn't", "might", "probably would", "definitely would"]
        );
    }

    #[test]
    fn strategic_needs_six_per_type() {
        let mut kb = fixtures::reference_kb();
        kb.counters.retain(|c| !(c.arg_type == ArgumentType::PositivePersonal && c.rank == 6));
        let e = DialogueEngine::new(Arc::new(kb));
        let err = e.new_session("x", DialogueConfig::new(Variant::I, Policy::Strategic)).unwrap_err();
        assert!(err.to_string().contains("strategic policy unavailable"), "{err}");
        assert!(e.new_session("x", DialogueConfig::new(Variant::I, Policy::Baseline)).is_ok());
    }

    #[test]
    fn schedule_compositions() {
        let kb = fixtures::reference_kb();
        let count = |ids: &[String], t: ArgumentType| {
            ids.iter().filter(|id| kb.counter(id).unwrap().arg_type == t).count()
        };
        let h = schedule_counters(Policy::Strategic, Concern::Health, &kb, 0, false).unwrap();
        assert_eq!(h.len(), 12);
        assert_eq!(count(&h, ArgumentType::PositivePersonal), 6);
        assert_eq!(count(&h, ArgumentType::NegativePersonal), 6);
        assert_eq!(h[..4], ["ppc-1", "npc-1", "ppc-2", "npc-2"]);

        let env = schedule_counters(Policy::Strategic, Concern::Environment, &kb, 0, false).unwrap();
        assert!(env.iter().all(|id| kb.counter(id).unwrap().arg_type.scope() == Some(crate::kb::Scope::Impersonal)));

        for concern in Concern::ALL {
            let b = schedule_counters(Policy::Baseline, concern, &kb, 0, false).unwrap();
            for t in ArgumentType::CONSEQUENTIAL {
                assert_eq!(count(&b, t), 3);
            }
            assert!(b.iter().all(|id| kb.counter(id).unwrap().rank <= 3));
        }

        let shuffled = schedule_counters(Policy::Strategic, Concern::Health, &kb, 9, true).unwrap();
        let mut a = shuffled.clone();
        let mut b = h.clone();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        assert_eq!(shuffled, schedule_counters(Policy::Strategic, Concern::Health, &kb, 9, true).unwrap());

        let small = fixtures::baseline_only_kb();
        assert!(matches!(
            schedule_counters(Policy::Strategic, Concern::Health, &small, 0, false),
            Err(DialogueError::InsufficientCounters { needed: 6, available: 3, .. })
        ));
    }

    #[test]
    fn same_seed_same_schedule() {
        let e = engine();
        let mut cfg = DialogueConfig::new(Variant::I, Policy::Strategic).with_seed(5);
        cfg.shuffle = true;
        let run = || {
            let mut s = e.new_session("a", cfg).unwrap();
            for i in ["might", "health", "easy"] {
                e.apply(&mut s, i).unwrap();
            }
            s.schedule
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn disagree_asks_why_and_agree_variant_ii_asks_why_eat_meat() {
        let e = engine();
        let mut s = start(&e, Variant::II, Policy::Strategic, "health");
        let BotMove::Prompt(p) = e.apply(&mut s, "disagree").unwrap() else { panic!() };
        assert_eq!(p.text, WHY_PROMPT);
        assert_eq!(s.state, DialogueState::AwaitWhy(1));
        e.apply(&mut s, "because I like the taste of it").unwrap();
        e.apply(&mut s, "agree").unwrap();
        e.apply(&mut s, "it is what I grew up with").unwrap();
        let BotMove::Prompt(p) = e.apply(&mut s, "agree").unwrap() else { panic!() };
        assert_eq!(s.state, DialogueState::AwaitWhyEatMeat(3));
        assert_eq!(p.text, WHY_EAT_MEAT_PROMPT);
        assert_eq!(s.events.last().unwrap().payload, WHY_EAT_MEAT_PROMPT);
    }

    #[test]
    fn variant_i_agree_at_twelve_asks_final_intention() {
        let e = engine();
        let mut s = start(&e, Variant::I, Policy::Baseline, "environment");
        for _ in 0..11 {
            e.apply(&mut s, "agree").unwrap();
        }
        assert_eq!(s.state, DialogueState::AwaitStance(12));
        let BotMove::Prompt(p) = e.apply(&mut s, "agree").unwrap() else { panic!() };
        assert_eq!(s.state, DialogueState::AwaitFinalIntention);
        assert_eq!(p.text, FINAL_INTENTION_PROMPT);
        let BotMove::Done(d) = e.apply(&mut s, "might").unwrap() else { panic!() };
        assert_eq!(d.intention_points, 1);
        assert_eq!(harvest_count(&s).unwrap(), 0);
        assert!(matches!(e.apply(&mut s, "might"), Err(DialogueError::SessionDone)));
    }

    #[test]
    fn invalid_input_leaves_session_unchanged() {
        let e = engine();
        let mut s = start(&e, Variant::I, Policy::Strategic, "health");
        let before = s.clone();
        match e.apply(&mut s, "maybe").unwrap_err() {
            DialogueError::InvalidInput { allowed, .. } => assert_eq!(allowed, ["agree", "disagree"]),
            other => panic!("{other:?}"),
        }
        assert_eq!(s, before);
        e.apply(&mut s, "disagree").unwrap();
        let before = s.clone();
        assert!(matches!(e.apply(&mut s, "   "), Err(DialogueError::InvalidInput { .. })));
        assert_eq!(s, before);
    }

    #[test]
    fn choice_accepts_labels() {
        let e = engine();
        let mut s = e.new_session("a", DialogueConfig::new(Variant::I, Policy::Baseline)).unwrap();
        e.apply(&mut s, "Probably Wouldn't").unwrap();
        e.apply(&mut s, "environment/animals").unwrap();
        e.apply(&mut s, "other").unwrap();
        assert_eq!(s.initial_intention, Some(IntentionLevel::ProbablyWouldnt));
        assert_eq!(s.concern, Some(Concern::Environment));
        assert_eq!(s.main_argument.as_deref(), Some("other"));
        assert_eq!(s.events[1].payload, "probably_wouldnt");
    }

    #[test]
    fn short_reply_triggers_single_expand() {
        let e = engine();
        let mut s = start(&e, Variant::I, Policy::Strategic, "health");
        e.apply(&mut s, "disagree").unwrap();
        let BotMove::Prompt(p) = e.apply(&mut s, "tasty").unwrap() else { panic!() };
        assert_eq!(p.text, EXPAND_PROMPT);
        assert_eq!(s.state, DialogueState::AwaitExpand(1));
        e.apply(&mut s, "ok").unwrap();
        assert_eq!(s.state, DialogueState::AwaitStance(2));
        assert_eq!(s.harvested.len(), 1);
        assert_eq!(s.harvested[0].text, "tasty ok");
        assert_eq!(s.harvested[0].counter_id, s.schedule[0]);

        // long enough: no expand
        e.apply(&mut s, "disagree").unwrap();
        e.apply(&mut s, "meat is part of my culture").unwrap();
        assert_eq!(s.state, DialogueState::AwaitStance(3));
        let (texts, dis) = s.derive_from_events();
        assert_eq!(texts, s.harvested.iter().map(|h| h.text.clone()).collect::<Vec<_>>());
        assert_eq!(dis, s.disagreements);
    }

    #[test]
    fn expand_disabled_when_cap_zero() {
        let e = engine();
        let mut cfg = DialogueConfig::new(Variant::I, Policy::Strategic);
        cfg.max_expand_prompts = 0;
        let mut s = e.new_session("a", cfg).unwrap();
        for i in ["might", "health", "nutrition", "disagree", "no"] {
            e.apply(&mut s, i).unwrap();
        }
        assert_eq!(s.state, DialogueState::AwaitStance(2));
    }

    #[test]
    fn harvest_count_requires_done() {
        let e = engine();
        let s = start(&e, Variant::II, Policy::Strategic, "health");
        assert!(matches!(harvest_count(&s), Err(DialogueError::NotDone(_))));
    }

    #[test]
    fn scripted_variant_i_five_disagreements() {
        let e = engine();
        let mut s = start(&e, Variant::I, Policy::Strategic, "environment");
        let script = [true, false, false, true, true, false, false, false, true, false, true, false];
        for (i, dis) in script.iter().enumerate() {
            if *dis {
                e.apply(&mut s, "disagree").unwrap();
                e.apply(&mut s, &format!("reply number {i} with words")).unwrap();
            } else {
                e.apply(&mut s, "agree").unwrap();
            }
        }
        e.apply(&mut s, "definitely_would").unwrap();
        let expected = script.iter().filter(|d| **d).count();
        assert_eq!(expected, 5);
        assert_eq!(harvest_count(&s).unwrap(), expected);
        assert_eq!(s.disagreements as usize, expected);
        assert!(types_of(&e, &s).iter().all(|t| concern_of(*t) == Some(Concern::Environment)));
    }

    #[test]
    fn state_strings_round_trip() {
        let states = [
            DialogueState::AwaitInitialIntention,
            DialogueState::AwaitConcern,
            DialogueState::AwaitMainArgument,
            DialogueState::PresentCounter(1),
            DialogueState::AwaitStance(12),
            DialogueState::AwaitWhy(3),
            DialogueState::AwaitExpand(4),
            DialogueState::AwaitWhyEatMeat(5),
            DialogueState::AwaitFinalIntention,
            DialogueState::Done,
        ];
        for st in states {
            assert_eq!(st.to_string().parse::<DialogueState>().unwrap(), st);
        }
        assert!("AwaitStance(13)".parse::<DialogueState>().is_err());
        assert!("Nope".parse::<DialogueState>().is_err());
    }

    #[test]
    fn intention_scale() {
        assert_eq!(IntentionLevel::ALL.len(), 5);
        assert!(IntentionLevel::DefinitelyWouldnt < IntentionLevel::DefinitelyWould);
        assert_eq!(intention_points(IntentionLevel::ProbablyWouldnt, IntentionLevel::Might), 1);
        assert_eq!(intention_points(IntentionLevel::Might, IntentionLevel::ProbablyWouldnt), -1);
        assert_eq!(intention_points(IntentionLevel::DefinitelyWouldnt, IntentionLevel::DefinitelyWould), 4);
        assert_eq!(IntentionLevel::ProbablyWould.shifted(5), IntentionLevel::DefinitelyWould);
        assert_eq!(IntentionLevel::Might.shifted(-9), IntentionLevel::DefinitelyWouldnt);
        assert_eq!(IntentionLevel::from_ordinal(2), Some(IntentionLevel::Might));
        assert_eq!(IntentionLevel::from_ordinal(5), None);
    }
}
