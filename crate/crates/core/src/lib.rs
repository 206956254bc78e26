//! Length-controlled long-term memory for dialogue agents.
//!
//! A memory is an ordered list of short natural-language sentences. Each
//! incoming user-info sentence is routed through one of three operations:
//! append it as a new entry, pass (drop it), or replace the entry it
//! supersedes. The crate bundles the memory model itself, a curation
//! pipeline that turns sentence-inference pairs into balanced training
//! examples for that routing decision, baseline predictors, and a
//! simulation / evaluation harness.

pub mod curation;
pub mod harness;
pub mod memory;
pub mod predictor;
pub mod text;

mod mix;

pub use memory::{
    Applied, CoreConfig, CoreError, EntryId, Memory, MemoryEntry, OpKind, Operation, Source,
    Speaker, UserInfo,
};
