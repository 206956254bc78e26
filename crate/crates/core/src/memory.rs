//! The ordered memory store and the three operations that edit it.
//!
//! Entries keep their position for their whole life: APPEND adds at the end,
//! REPLACE swaps the sentence at a position in place, PASS changes nothing.
//! Entry ids are allocated from a monotone counter and never reused, so the
//! full edit history stays reconstructible through `replaced_from`.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use thiserror::Error;

use crate::text::normalize_key;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("replace target {target_index} out of range for memory of size {size}")]
    ReplaceOutOfRange { target_index: usize, size: usize },
    #[error("info text is empty after trimming")]
    EmptyInfo,
    #[error("malformed snapshot: {0}")]
    MalformedSnapshot(String),
}

/// Stable identity of one memory entry. Ids grow monotonically per memory
/// and survive snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntryId(pub u64);

impl fmt::Display for EntryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    User,
    Bot,
    Seed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    User,
    Bot,
}

impl From<Speaker> for Source {
    fn from(speaker: Speaker) -> Self {
        match speaker {
            Speaker::User => Source::User,
            Speaker::Bot => Source::Bot,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub id: EntryId,
    pub text: String,
    pub source: Source,
    pub created_turn: u32,
    pub replaced_from: Option<EntryId>,
}

/// One extracted user-info sentence, as handed to predictors and `apply`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserInfo {
    pub text: String,
    pub source_turn: Option<u32>,
    pub speaker: Speaker,
}

impl UserInfo {
    pub fn new(text: impl Into<String>, speaker: Speaker, source_turn: Option<u32>) -> Self {
        UserInfo { text: text.into(), source_turn, speaker }
    }

    /// Info spoken by the user with no turn attribution.
    pub fn user(text: impl Into<String>) -> Self {
        UserInfo::new(text, Speaker::User, None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Append,
    Pass,
    Replace,
}

impl OpKind {
    pub const ALL: [OpKind; 3] = [OpKind::Append, OpKind::Pass, OpKind::Replace];

    pub fn as_str(&self) -> &'static str {
        match self {
            OpKind::Append => "append",
            OpKind::Pass => "pass",
            OpKind::Replace => "replace",
        }
    }

    pub fn parse(s: &str) -> Option<OpKind> {
        match s {
            "append" => Some(OpKind::Append),
            "pass" => Some(OpKind::Pass),
            "replace" => Some(OpKind::Replace),
            _ => None,
        }
    }

    /// Fixed row/column position in confusion matrices.
    pub fn index(&self) -> usize {
        match self {
            OpKind::Append => 0,
            OpKind::Pass => 1,
            OpKind::Replace => 2,
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A memory operation. The replace target is a 0-based position into the
/// entry list at the time the operation is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operation {
    Append,
    Pass,
    Replace { target_index: usize },
}

impl Operation {
    pub fn kind(&self) -> OpKind {
        match self {
            Operation::Append => OpKind::Append,
            Operation::Pass => OpKind::Pass,
            Operation::Replace { .. } => OpKind::Replace,
        }
    }

    pub fn target_index(&self) -> Option<usize> {
        match self {
            Operation::Replace { target_index } => Some(*target_index),
            _ => None,
        }
    }

    /// Rebuilds an operation from its wire form. `target` must be present
    /// exactly when the kind is replace.
    pub fn from_parts(kind: OpKind, target: Option<usize>) -> Option<Operation> {
        match (kind, target) {
            (OpKind::Append, None) => Some(Operation::Append),
            (OpKind::Pass, None) => Some(Operation::Pass),
            (OpKind::Replace, Some(target_index)) => Some(Operation::Replace { target_index }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CoreConfig {
    /// When set, APPEND of a sentence already present (under normalization)
    /// behaves as PASS and the application reports `deduped`.
    #[serde(default)]
    pub dedup_on_append: bool,
}

/// Result of applying an operation without mutating the input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Applied {
    pub memory: Memory,
    pub deduped: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Memory {
    entries: Vec<MemoryEntry>,
    next_id: u64,
}

impl Memory {
    pub fn new() -> Self {
        Memory { entries: Vec::new(), next_id: 0 }
    }

    /// Seeds a memory from plain sentences (source `seed`, turn 0).
    pub fn from_texts<I, S>(texts: I) -> Result<Self, CoreError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut memory = Memory::new();
        for text in texts {
            let text = text.as_ref().trim();
            if text.is_empty() {
                return Err(CoreError::EmptyInfo);
            }
            let id = memory.alloc_id();
            memory.entries.push(MemoryEntry {
                id,
                text: text.to_owned(),
                source: Source::Seed,
                created_turn: 0,
                replaced_from: None,
            });
        }
        Ok(memory)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.text.as_str())
    }

    fn alloc_id(&mut self) -> EntryId {
        let id = EntryId(self.next_id);
        self.next_id += 1;
        id
    }

    /// Applies an operation, returning the edited copy. PASS returns a value
    /// equal to the input; APPEND grows the entry list by exactly one;
    /// REPLACE swaps the targeted entry in place under a fresh id.
    pub fn apply(
        &self,
        op: &Operation,
        info: &UserInfo,
        turn: u32,
        config: &CoreConfig,
    ) -> Result<Applied, CoreError> {
        let mut memory = self.clone();
        let deduped = memory.apply_in_place(op, info, turn, config)?;
        Ok(Applied { memory, deduped })
    }

    /// In-place variant of [`Memory::apply`]. Returns the dedup flag.
    pub fn apply_in_place(
        &mut self,
        op: &Operation,
        info: &UserInfo,
        turn: u32,
        config: &CoreConfig,
    ) -> Result<bool, CoreError> {
        let text = info.text.trim();
        if text.is_empty() {
            return Err(CoreError::EmptyInfo);
        }
        match *op {
            Operation::Pass => Ok(false),
            Operation::Append => {
                if config.dedup_on_append {
                    let key = normalize_key(text);
                    if self.entries.iter().any(|e| normalize_key(&e.text) == key) {
                        return Ok(true);
                    }
                }
                let id = self.alloc_id();
                self.entries.push(MemoryEntry {
                    id,
                    text: text.to_owned(),
                    source: info.speaker.into(),
                    created_turn: turn,
                    replaced_from: None,
                });
                Ok(false)
            }
            Operation::Replace { target_index } => {
                let size = self.entries.len();
                if target_index >= size {
                    return Err(CoreError::ReplaceOutOfRange { target_index, size });
                }
                let id = self.alloc_id();
                let old_id = self.entries[target_index].id;
                self.entries[target_index] = MemoryEntry {
                    id,
                    text: text.to_owned(),
                    source: info.speaker.into(),
                    created_turn: turn,
                    replaced_from: Some(old_id),
                };
                Ok(false)
            }
        }
    }

    /// Serializes to the single-object snapshot form.
    pub fn snapshot(&self) -> String {
        serde_json::to_string(self).expect("memory serializes")
    }

    /// Parses and validates a snapshot produced by [`Memory::snapshot`].
    pub fn restore(snapshot: &str) -> Result<Memory, CoreError> {
        let memory: Memory = serde_json::from_str(snapshot)
            .map_err(|e| CoreError::MalformedSnapshot(e.to_string()))?;
        memory.validate().map_err(CoreError::MalformedSnapshot)?;
        Ok(memory)
    }

    /// Structural integrity check: trimmed non-empty texts, unique ids, and
    /// no id at or above `next_id`.
    pub fn validate(&self) -> Result<(), String> {
        let mut seen = HashSet::with_capacity(self.entries.len());
        for (position, entry) in self.entries.iter().enumerate() {
            if entry.text.trim().is_empty() {
                return Err(format!("entry {position} has empty text"));
            }
            if entry.text.trim() != entry.text {
                return Err(format!("entry {position} text is not trimmed"));
            }
            if !seen.insert(entry.id) {
                return Err(format!("duplicate entry id {}", entry.id));
            }
            if entry.id.0 >= self.next_id {
                return Err(format!(
                    "entry id {} not below next_id {}",
                    entry.id, self.next_id
                ));
            }
            if let Some(old) = entry.replaced_from {
                if old.0 >= self.next_id {
                    return Err(format!(
                        "replaced_from {} not below next_id {}",
                        old, self.next_id
                    ));
                }
            }
        }
        Ok(())
    }
}
