//! Operation predictors: the token-overlap heuristic baseline, the
//! append-only floor, an eval-only oracle, and a client for a remote model.
//!
//! Predictors validate their own replace targets, so any operation they
//! return applies cleanly to the memory it was computed for.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::Duration;
use thiserror::Error;

use crate::curation::{normalize, MmExample};
use crate::memory::{Memory, Operation, UserInfo};
use crate::text::{default_stopwords, is_negation, jaccard, tokenize};

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("bad response: {0}")]
    BadResponse(String),
    #[error("remote replace target {target_index} out of range for memory of size {size}")]
    InvalidTarget { target_index: usize, size: usize },
}

pub trait Predictor: Send + Sync {
    fn name(&self) -> &str;
    fn predict(&self, memory: &Memory, info: &UserInfo) -> Result<Operation, PredictError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    Oracle,
    Heuristic,
    AppendOnly,
    Remote,
}

impl PredictorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PredictorKind::Oracle => "oracle",
            PredictorKind::Heuristic => "heuristic",
            PredictorKind::AppendOnly => "append_only",
            PredictorKind::Remote => "remote",
        }
    }
}

impl fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PredictorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(PredictorKind::Oracle),
            "heuristic" => Ok(PredictorKind::Heuristic),
            "append_only" => Ok(PredictorKind::AppendOnly),
            "remote" => Ok(PredictorKind::Remote),
            other => Err(format!("unknown predictor {other:?}")),
        }
    }
}

/// Returns the gold operation attached to a curated example. Usable only
/// where gold labels exist; it is the evaluation ceiling, not a predictor
/// you can deploy.
pub fn oracle_predict(example: &MmExample) -> Operation {
    example.op
}

/// Appends every sentence. The unmanaged growth floor other predictors are
/// compared against.
#[derive(Debug, Clone, Copy, Default)]
pub struct AppendOnlyPredictor;

impl Predictor for AppendOnlyPredictor {
    fn name(&self) -> &str {
        "append_only"
    }

    fn predict(&self, _memory: &Memory, _info: &UserInfo) -> Result<Operation, PredictError> {
        Ok(Operation::Append)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicConfig {
    /// Non-negated-token Jaccard at or above which an entry with opposite
    /// polarity counts as contradicted.
    pub theta_c: f64,
    pub stopwords: HashSet<String>,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig { theta_c: 0.5, stopwords: default_stopwords().clone() }
    }
}

/// Deterministic rule cascade over content-token sets:
///
/// 1. empty memory: APPEND;
/// 2. some entry is contradicted (polarity flip with enough non-negated
///    overlap, or the entry's tokens are a strict subset of the info's):
///    REPLACE the highest-scoring one, ties to the lowest index;
/// 3. some entry's tokens cover the info's: PASS;
/// 4. the info's tokens strictly cover some entry's: REPLACE the lowest
///    such index;
/// 5. otherwise APPEND.
#[derive(Debug, Clone, Default)]
pub struct HeuristicPredictor {
    config: HeuristicConfig,
}

impl HeuristicPredictor {
    pub fn new(config: HeuristicConfig) -> Self {
        HeuristicPredictor { config }
    }
}

fn strict_subset(a: &BTreeSet<String>, b: &BTreeSet<String>) -> bool {
    a.len() < b.len() && a.is_subset(b)
}

fn without_negations(tokens: &BTreeSet<String>) -> BTreeSet<String> {
    tokens.iter().filter(|t| !is_negation(t)).cloned().collect()
}

fn has_negation(raw: &str) -> bool {
    tokenize(raw).iter().any(|t| is_negation(t))
}

impl Predictor for HeuristicPredictor {
    fn name(&self) -> &str {
        "heuristic"
    }

    fn predict(&self, memory: &Memory, info: &UserInfo) -> Result<Operation, PredictError> {
        if memory.is_empty() {
            return Ok(Operation::Append);
        }
        let stop = &self.config.stopwords;
        let info_tokens = normalize(&info.text, stop);
        let info_plain = without_negations(&info_tokens);
        let info_negated = has_negation(&info.text);

        let mut contradicted: Option<(usize, f64)> = None;
        let mut covers_info = false;
        let mut covered_by_info: Option<usize> = None;

        for (index, entry) in memory.entries().iter().enumerate() {
            let entry_tokens = normalize(&entry.text, stop);
            let entry_plain = without_negations(&entry_tokens);
            let score = jaccard(&entry_plain, &info_plain);
            let polarity_flip = has_negation(&entry.text) != info_negated;
            let contradictory = (score >= self.config.theta_c && polarity_flip)
                || strict_subset(&entry_tokens, &info_tokens);
            if contradictory && contradicted.map_or(true, |(_, best)| score > best) {
                contradicted = Some((index, score));
            }
            if info_tokens.is_subset(&entry_tokens) {
                covers_info = true;
            }
            if covered_by_info.is_none() && strict_subset(&entry_tokens, &info_tokens) {
                covered_by_info = Some(index);
            }
        }

        if let Some((target_index, _)) = contradicted {
            return Ok(Operation::Replace { target_index });
        }
        if covers_info {
            return Ok(Operation::Pass);
        }
        // unreachable while the contradiction cue covers strict reverse entailment
        if let Some(target_index) = covered_by_info {
            return Ok(Operation::Replace { target_index });
        }
        Ok(Operation::Append)
    }
}

/// Wire settings for [`RemotePredictor`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    /// Whole-request timeout in seconds.
    #[serde(default = "RemoteConfig::default_timeout_secs")]
    pub timeout_secs: u64,
    /// Extra attempts after a transport failure.
    #[serde(default)]
    pub retries: u32,
}

impl RemoteConfig {
    fn default_timeout_secs() -> u64 {
        10
    }

    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            timeout_secs: Self::default_timeout_secs(),
            retries: 0,
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    memory: Vec<&'a str>,
    info: &'a str,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireResponse {
    op: String,
    #[serde(default)]
    target_index: Option<usize>,
}

/// POSTs `{"memory": [...], "info": ...}` to `<endpoint>/predict` and
/// expects `{"op": ..., "target_index": ...}` back, with `target_index`
/// present exactly when the op is replace. Out-of-range targets are
/// reported, never clamped.
pub struct RemotePredictor {
    config: RemoteConfig,
    agent: ureq::Agent,
}

impl RemotePredictor {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build();
        RemotePredictor { config, agent }
    }

    pub fn endpoint(&self) -> &str {
        &self.config.endpoint
    }

    fn call(&self, request: &WireRequest<'_>) -> Result<WireResponse, PredictError> {
        let url = format!("{}/predict", self.config.endpoint.trim_end_matches('/'));
        let body = serde_json::to_value(request)
            .map_err(|e| PredictError::Transport(e.to_string()))?;
        let response = self
            .agent
            .post(&url)
            .send_json(body)
            .map_err(|e| match e {
                ureq::Error::Status(code, _) => {
                    PredictError::Transport(format!("http status {code}"))
                }
                ureq::Error::Transport(t) => PredictError::Transport(t.to_string()),
            })?;
        response
            .into_json::<WireResponse>()
            .map_err(|e| PredictError::BadResponse(e.to_string()))
    }
}

impl Predictor for RemotePredictor {
    fn name(&self) -> &str {
        "remote"
    }

    fn predict(&self, memory: &Memory, info: &UserInfo) -> Result<Operation, PredictError> {
        let request = WireRequest { memory: memory.texts().collect(), info: &info.text };
        let mut attempt = 0;
        let response = loop {
            match self.call(&request) {
                Ok(response) => break response,
                Err(PredictError::Transport(reason)) if attempt < self.config.retries => {
                    attempt += 1;
                    let _ = reason;
                }
                Err(e) => return Err(e),
            }
        };
        match response.op.as_str() {
            "append" | "pass" => {
                if response.target_index.is_some() {
                    return Err(PredictError::BadResponse(format!(
                        "target_index not allowed with op {:?}",
                        response.op
                    )));
                }
                Ok(if response.op == "append" { Operation::Append } else { Operation::Pass })
            }
            "replace" => {
                let target_index = response.target_index.ok_or_else(|| {
                    PredictError::BadResponse("replace without target_index".to_owned())
                })?;
                let size = memory.len();
                if target_index >= size {
                    return Err(PredictError::InvalidTarget { target_index, size });
                }
                Ok(Operation::Replace { target_index })
            }
            other => Err(PredictError::BadResponse(format!("unknown op {other:?}"))),
        }
    }
}

/// Builds the text-only view predictors see during dataset evaluation.
pub fn example_inputs(example: &MmExample) -> Result<(Memory, UserInfo), PredictError> {
    let memory = Memory::from_texts(&example.memory)
        .map_err(|e| PredictError::BadResponse(format!("unusable example memory: {e}")))?;
    Ok((memory, UserInfo::user(&example.info)))
}
