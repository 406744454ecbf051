//! Skill co-occurrence embeddings for recruitment corpora.
//!
//! The pipeline: a [`lexicon`] of canonical skills drives [`extractor`],
//! which turns each job description into its set of skills; [`corpus`]
//! builds the training vocabulary and emits every ordered skill pair per
//! document (the whole document is the context window); [`trainer`] fits
//! skip-gram vectors by SGD; [`vectorstore`] persists them and answers
//! nearest-neighbor and analogy queries; [`eval`] scores neighbor relevance
//! against human labels or a planted-cluster oracle.
//!
//! The `skillforge` binary wires these together; see [`cli`].

pub mod cli;
pub mod corpus;
pub mod eval;
pub mod extractor;
pub mod lexicon;
pub mod manifest;
pub mod rng;
pub mod trainer;
pub mod vectorstore;

pub use lexicon::{Lexicon, Normalizer, SkillId};
pub use vectorstore::EmbeddingStore;
