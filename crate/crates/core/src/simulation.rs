//! Synthetic persuadees and a batch experiment runner.
//!
//! The persuadee model is a test harness, not a model of human behaviour:
//! it agrees with a counterargument with one probability when the
//! counterargument speaks to its concern and another when it does not, and
//! raises its intention one level for every few concern-matched agreements.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialogue::{
    DialogueConfig, DialogueEngine, DialogueError, DialogueState, InputSpec, IntentionLevel, Session, Variant,
};
use crate::kb::{concern_of, Concern, Policy};

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Dialogue(#[from] DialogueError),
    #[error("invalid persuadee model: {0}")]
    InvalidModel(String),
    #[error("dialogue did not finish within {0} moves")]
    Runaway(usize),
}

pub fn default_reply_bank() -> Vec<String> {
    [
        "I really enjoy the taste of meat",
        "Meat is part of most meals I grew up with",
        "It is the easiest thing to cook after work",
        "I need the protein for my training",
        "My family would not eat vegetarian food",
        "I do not think that applies to me",
    ]
    .into_iter()
    .map(str::to_owned)
    .collect()
}

/// Replies below the default expand threshold.
pub fn terse_reply_bank() -> Vec<String> {
    ["tasty", "habit", "no idea", "convenience"].into_iter().map(str::to_owned).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersuadeeModel {
    pub concern: Concern,
    pub initial_intention: IntentionLevel,
    pub p_agree_matched: f64,
    pub p_agree_unmatched: f64,
    /// Concern-matched agreements needed per one-level intention increase.
    pub agreements_per_level: u32,
    pub reply_bank: Vec<String>,
    pub seed: u64,
}

impl PersuadeeModel {
    pub fn reference(concern: Concern, initial_intention: IntentionLevel, seed: u64) -> Self {
        Self {
            concern,
            initial_intention,
            p_agree_matched: 0.8,
            p_agree_unmatched: 0.5,
            agreements_per_level: 4,
            reply_bank: default_reply_bank(),
            seed,
        }
    }

    fn validate(&self) -> Result<(), SimulationError> {
        for (name, p) in [("p_agree_matched", self.p_agree_matched), ("p_agree_unmatched", self.p_agree_unmatched)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimulationError::InvalidModel(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if self.agreements_per_level == 0 {
            return Err(SimulationError::InvalidModel("agreements_per_level must be positive".into()));
        }
        if self.reply_bank.iter().all(|r| r.trim().is_empty()) {
            return Err(SimulationError::InvalidModel("reply bank has no usable replies".into()));
        }
        Ok(())
    }

    pub fn final_intention(&self, matched_agreements: u32) -> IntentionLevel {
        let steps = (matched_agreements / self.agreements_per_level) as i32;
        self.initial_intention.shifted(steps)
    }
}

/// Drives one session to completion with a synthetic persuadee.
pub fn run_dialogue(
    model: &PersuadeeModel,
    config: DialogueConfig,
    engine: &DialogueEngine,
    session_id: &str,
) -> Result<Session, SimulationError> {
    model.validate()?;
    let replies: Vec<&String> = model.reply_bank.iter().filter(|r| !r.trim().is_empty()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let mut session = engine.new_session(session_id, config)?;
    let mut matched_agreements = 0u32;
    // 3 setup choices + 12 x (stance + reply + expand) + final, with slack.
    let max_moves = 64;
    for _ in 0..max_moves {
        let Some(prompt) = engine.current_prompt(&session) else {
            return Ok(session);
        };
        let input: String = match session.state {
            DialogueState::AwaitInitialIntention => model.initial_intention.value().to_owned(),
            DialogueState::AwaitConcern => model.concern.as_str().to_owned(),
            DialogueState::AwaitMainArgument => match &prompt.input {
                InputSpec::Choice { options } => options.choose(&mut rng).expect("options").value.clone(),
                InputSpec::FreeText => unreachable!(),
            },
            DialogueState::AwaitStance(_) => {
                let matched = prompt.arg_type.and_then(concern_of) == Some(model.concern);
                let p = if matched { model.p_agree_matched } else { model.p_agree_unmatched };
                if rng.gen_bool(p) {
                    if matched {
                        matched_agreements += 1;
                    }
                    "agree".to_owned()
                } else {
                    "disagree".to_owned()
                }
            }
            DialogueState::AwaitWhy(_) | DialogueState::AwaitWhyEatMeat(_) | DialogueState::AwaitExpand(_) => {
                (*replies.choose(&mut rng).expect("non-empty bank")).clone()
            }
            DialogueState::AwaitFinalIntention => model.final_intention(matched_agreements).value().to_owned(),
            DialogueState::PresentCounter(_) | DialogueState::Done => unreachable!("not a resting state"),
        };
        engine.apply(&mut session, &input)?;
    }
    if session.is_done() {
        Ok(session)
    } else {
        Err(SimulationError::Runaway(max_moves))
    }
}

/// Produces a persuadee for each simulated participant.
pub trait PersuadeeSampler: Sync {
    fn sample(&self, rng: &mut ChaCha8Rng, seed: u64) -> PersuadeeModel;
}

/// Population of reference persuadees: concern and initial intention are
/// drawn per participant, the response parameters are shared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub p_agree_matched: f64,
    pub p_agree_unmatched: f64,
    pub agreements_per_level: u32,
    /// Probability a participant is health-concerned.
    pub health_share: f64,
    /// Relative weights over the five initial intention levels.
    pub initial_weights: [f64; 5],
    #[serde(default = "default_reply_bank")]
    pub reply_bank: Vec<String>,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        Self {
            p_agree_matched: 0.8,
            p_agree_unmatched: 0.5,
            agreements_per_level: 4,
            health_share: 0.55,
            initial_weights: [0.2, 0.3, 0.25, 0.2, 0.05],
            reply_bank: default_reply_bank(),
        }
    }
}

impl PersuadeeSampler for PopulationSpec {
    fn sample(&self, rng: &mut ChaCha8Rng, seed: u64) -> PersuadeeModel {
        let concern = if rng.gen_bool(self.health_share.clamp(0.0, 1.0)) {
            Concern::Health
        } else {
            Concern::Environment
        };
        let total: f64 = self.initial_weights.iter().sum();
        let mut x = rng.gen::<f64>() * total;
        let mut level = IntentionLevel::DefinitelyWould;
        for (w, l) in self.initial_weights.iter().zip(IntentionLevel::ALL) {
            if x < *w {
                level = l;
                break;
            }
            x -= w;
        }
        PersuadeeModel {
            concern,
            initial_intention: level,
            p_agree_matched: self.p_agree_matched,
            p_agree_unmatched: self.p_agree_unmatched,
            agreements_per_level: self.agreements_per_level,
            reply_bank: self.reply_bank.clone(),
            seed,
        }
    }
}

/// The four chatbots: both variants under both policies.
pub fn all_arms() -> Vec<DialogueConfig> {
    Variant::ALL
        .into_iter()
        .flat_map(|v| Policy::ALL.into_iter().map(move |p| DialogueConfig::new(v, p)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmRun {
    pub config: DialogueConfig,
    pub sessions: Vec<Session>,
}

impl ArmRun {
    pub fn label(&self) -> String {
        arm_label(&self.config)
    }
}

pub fn arm_label(config: &DialogueConfig) -> String {
    format!("{}-{}", config.variant, config.policy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub arms: Vec<ArmRun>,
}

impl Experiment {
    pub fn sessions(&self) -> impl Iterator<Item = &Session> {
        self.arms.iter().flat_map(|a| a.sessions.iter())
    }
}

/// SplitMix64 finalizer; decorrelates derived seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one session, a function of (experiment seed, arm, index) only.
pub fn session_seed(seed: u64, arm: usize, index: usize) -> u64 {
    mix(mix(mix(seed) ^ arm as u64) ^ index as u64)
}

/// Runs `n_per_arm` simulated sessions for every arm.
///
/// Sessions run in parallel; each draws from its own derived seed so the
/// result does not depend on scheduling.
pub fn run_experiment(
    n_per_arm: usize,
    sampler: &dyn PersuadeeSampler,
    arms: &[DialogueConfig],
    engine: &DialogueEngine,
    seed: u64,
) -> Result<Experiment, SimulationError> {
    if n_per_arm == 0 {
        return Err(SimulationError::InvalidModel("n_per_arm must be at least 1".into()));
    }
    let arms = arms
        .iter()
        .enumerate()
        .map(|(ai, cfg)| {
            let sessions = (0..n_per_arm)
                .into_par_iter()
                .map(|i| {
                    let s = session_seed(seed, ai, i);
                    let mut rng = ChaCha8Rng::seed_from_u64(s);
                    let model_seed = rng.gen();
                    let model = sampler.sample(&mut rng, model_seed);
                    let config = DialogueConfig { seed: s, ..*cfg };
                    let id = format!("{}-{i:04}", arm_label(cfg));
                    run_dialogue(&model, config, engine, &id)
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ArmRun { config: *cfg, sessions })
        })
        .collect::<Result<Vec<_>, SimulationError>>()?;
    Ok(Experiment { arms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialogue::harvest_count;
    use crate::fixtures;
    use std::sync::Arc;

    fn engine() -> DialogueEngine {
        DialogueEngine::new(Arc::new(fixtures::reference_kb()))
    }

    #[test]
    fn always_agree_matched() {
        let e = engine();
        let mut m = PersuadeeModel::reference(Concern::Health, IntentionLevel::ProbablyWouldnt, 1);
        m.p_agree_matched = 1.0;
        let s = run_dialogue(&m, DialogueConfig::new(Variant::I, Policy::Strategic), &e, "s").unwrap();
        assert!(s.is_done());
        assert_eq!(s.disagreements, 0);
        assert_eq!(harvest_count(&s).unwrap(), 0);
        // 12 matched agreements -> +3 levels
        assert_eq!(s.final_intention, Some(IntentionLevel::DefinitelyWould));
    }

    #[test]
    fn never_agree() {
        let e = engine();
        let mut m = PersuadeeModel::reference(Concern::Environment, IntentionLevel::Might, 3);
        m.p_agree_matched = 0.0;
        m.p_agree_unmatched = 0.0;
        for policy in Policy::ALL {
            let s = run_dialogue(&m, DialogueConfig::new(Variant::I, policy), &e, "s").unwrap();
            assert_eq!(s.disagreements, 12);
            assert_eq!(harvest_count(&s).unwrap(), 12);
            assert_eq!(s.final_intention, Some(IntentionLevel::Might));
        }
    }

    #[test]
    fn reference_model_is_deterministic() {
        let e = engine();
        let m = PersuadeeModel::reference(Concern::Health, IntentionLevel::ProbablyWouldnt, 7);
        for cfg in all_arms() {
            let a = run_dialogue(&m, cfg, &e, "s").unwrap();
            let b = run_dialogue(&m, cfg, &e, "s").unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn terse_bank_exercises_expand() {
        let e = engine();
        let mut m = PersuadeeModel::reference(Concern::Health, IntentionLevel::Might, 11);
        m.reply_bank = terse_reply_bank();
        m.p_agree_matched = 0.0;
        let s = run_dialogue(&m, DialogueConfig::new(Variant::II, Policy::Strategic), &e, "s").unwrap();
        assert!(s.events.iter().any(|ev| ev.payload == crate::dialogue::EXPAND_PROMPT));
        assert_eq!(harvest_count(&s).unwrap(), 12);
    }

    #[test]
    fn invalid_models_rejected() {
        let e = engine();
        let cfg = DialogueConfig::new(Variant::I, Policy::Baseline);
        let mut m = PersuadeeModel::reference(Concern::Health, IntentionLevel::Might, 0);
        m.p_agree_matched = 1.5;
        assert!(matches!(run_dialogue(&m, cfg, &e, "s"), Err(SimulationError::InvalidModel(_))));
        let mut m = PersuadeeModel::reference(Concern::Health, IntentionLevel::Might, 0);
        m.reply_bank = vec![" ".into()];
        assert!(matches!(run_dialogue(&m, cfg, &e, "s"), Err(SimulationError::InvalidModel(_))));
        let mut m = PersuadeeModel::reference(Concern::Health, IntentionLevel::Might, 0);
        m.agreements_per_level = 0;
        assert!(run_dialogue(&m, cfg, &e, "s").is_err());
    }

    #[test]
    fn experiment_shape() {
        let e = engine();
        let spec = PopulationSpec::default();
        let x = run_experiment(1, &spec, &all_arms(), &e, 3).unwrap();
        assert_eq!(x.arms.len(), 4);
        assert!(x.arms.iter().all(|a| a.sessions.len() == 1));
        assert!(run_experiment(0, &spec, &all_arms(), &e, 3).is_err());
    }

    #[test]
    fn final_intention_rule_caps() {
        let m = PersuadeeModel::reference(Concern::Health, IntentionLevel::ProbablyWould, 0);
        assert_eq!(m.final_intention(3), IntentionLevel::ProbablyWould);
        assert_eq!(m.final_intention(4), IntentionLevel::DefinitelyWould);
        assert_eq!(m.final_intention(12), IntentionLevel::DefinitelyWould);
    }
}
