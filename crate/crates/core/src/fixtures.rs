//! Bundled sample data: a small knowledge base with six popular arguments
//! and enough ranked counterarguments for both dialogue policies.

use crate::kb::{ArgumentType, KnowledgeBase, Policy};

pub const REFERENCE_KB: &str = include_str!("../data/reference_kb.jsonl");

pub fn reference_kb() -> KnowledgeBase {
    crate::kb::load_kb_str(REFERENCE_KB).expect("bundled knowledge base is valid")
}

/// The reference KB cut down to the top three counters of each generic type.
pub fn baseline_only_kb() -> KnowledgeBase {
    let mut kb = reference_kb();
    let keep = Policy::Baseline.per_type_requirement() as u32;
    kb.counters
        .retain(|c| c.arg_type == ArgumentType::Direct || c.rank <= keep);
    kb
}

pub const STUDY_COUNTS: &str = include_str!("../data/study_counts.json");

/// Participant counts and better/worse changes for the four chatbots of the
/// published study.
pub fn study_counts() -> crate::analysis::StudyCounts {
    serde_json::from_str(STUDY_COUNTS).expect("bundled study counts are valid")
}
