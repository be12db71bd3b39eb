//! Concern-aware persuasion chatbot: argument knowledge base, harvesting
//! pipeline, dialogue engine, persuadee simulation, session store and
//! the statistics used to compare dialogue policies.

pub mod analysis;
pub mod corpus;
pub mod dialogue;
pub mod fixtures;
pub mod kb;
pub mod records;
pub mod simulation;
pub mod stats;
pub mod store;

pub use kb::{
    concern_of, load_kb, ArgumentType, AuthorGroup, Concern, ConcernLabel, CounterArgument,
    KbError, KnowledgeBase, Policy, PopularArgument,
};
