//! Builds balanced memory-operation training data out of sentence-inference
//! pairs.
//!
//! Input records carry two persona sentences and an inference label
//! (positive / negative / neutral). The pipeline reinterprets each label as
//! the memory operation a well-behaved agent should take when `sentence2`
//! arrives while `sentence1` is already stored:
//!
//! * positive pairs are sub-classified with a token-overlap heuristic into
//!   "s1 entails s2" (PASS), "s2 entails s1" (REPLACE s1), and
//!   "almost identical" (APPEND);
//! * negative pairs become REPLACE s1;
//! * neutral pairs become APPEND.
//!
//! Each kept pair is wrapped in a synthetic memory: random distractor
//! sentences drawn from the neutral pool plus `sentence1` at a random
//! position. Pools are downsampled so the three operations come out exactly
//! equally distributed. The whole build is a pure function of
//! (input bytes, config, seed); per-record RNG streams are derived from the
//! global seed and the record's position in the input, so output bytes do
//! not depend on assembly order.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use thiserror::Error;

use crate::memory::{OpKind, Operation};
use crate::mix;
use crate::text::{self, normalize_key};

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("positive triple relabeled without a subtype")]
    MissingSubtype,
    #[error("distractor pool exhausted: needed {needed}, only {available} usable")]
    PoolExhausted { needed: usize, available: usize },
    #[error("cannot balance dataset: the {pool} pool is empty")]
    InsufficientData { pool: OpKind },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DnliLabel {
    Positive,
    Negative,
    Neutral,
}

impl DnliLabel {
    fn parse(s: &str) -> Option<DnliLabel> {
        match s {
            "positive" => Some(DnliLabel::Positive),
            "negative" => Some(DnliLabel::Negative),
            "neutral" => Some(DnliLabel::Neutral),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositiveSubtype {
    S1EntailsS2,
    S2EntailsS1,
    AlmostIdentical,
}

impl fmt::Display for PositiveSubtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PositiveSubtype::S1EntailsS2 => "s1_entails_s2",
            PositiveSubtype::S2EntailsS1 => "s2_entails_s1",
            PositiveSubtype::AlmostIdentical => "almost_identical",
        };
        f.write_str(s)
    }
}

/// One parsed input pair. `origin_index` is the 0-based line position in the
/// source file and keys the record's RNG stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DnliTriple {
    pub s1: String,
    pub s2: String,
    pub label: DnliLabel,
    pub origin_index: usize,
}

/// Operation each (label, subtype) combination maps to. REPLACE always
/// targets s1's slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpMapping {
    pub s1_entails_s2: OpKind,
    pub s2_entails_s1: OpKind,
    pub almost_identical: OpKind,
    pub negative: OpKind,
    pub neutral: OpKind,
}

impl Default for OpMapping {
    fn default() -> Self {
        OpMapping {
            s1_entails_s2: OpKind::Pass,
            s2_entails_s1: OpKind::Replace,
            almost_identical: OpKind::Append,
            negative: OpKind::Replace,
            neutral: OpKind::Append,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CurationConfig {
    pub seed: u64,
    /// Requested dataset size; truncated down to a multiple of 3.
    pub target_size: usize,
    /// Distractor count per example is drawn from Uniform{0..=max_distractors}.
    pub max_distractors: usize,
    /// Jaccard at or above which a positive pair counts as almost identical.
    pub identity_jaccard: f64,
    pub mapping: OpMapping,
    pub stopwords: HashSet<String>,
    /// Abort on the first malformed input line instead of skip-and-count.
    pub strict_parse: bool,
}

impl Default for CurationConfig {
    fn default() -> Self {
        CurationConfig {
            seed: 0,
            target_size: 90_000,
            max_distractors: 9,
            identity_jaccard: 0.9,
            mapping: OpMapping::default(),
            stopwords: text::default_stopwords().clone(),
            strict_parse: false,
        }
    }
}

#[derive(Debug, Default)]
pub struct ParsedDnli {
    pub triples: Vec<DnliTriple>,
    pub malformed_lines: usize,
    pub skipped_labels: usize,
}

#[derive(Deserialize)]
struct RawRecord {
    sentence1: String,
    sentence2: String,
    label: String,
}

/// Reads line-delimited JSON records with `sentence1`, `sentence2`, `label`
/// keys. Unknown labels are counted and skipped. Malformed lines are counted
/// and skipped unless `strict`, in which case the first one aborts the parse.
pub fn parse_dnli<R: BufRead>(reader: R, strict: bool) -> Result<ParsedDnli, CurationError> {
    let mut parsed = ParsedDnli::default();
    for (origin_index, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut bad = |reason: String| -> Result<(), CurationError> {
            if strict {
                Err(CurationError::MalformedRecord { line: origin_index + 1, reason })
            } else {
                parsed.malformed_lines += 1;
                Ok(())
            }
        };
        let record: RawRecord = match serde_json::from_str(&line) {
            Ok(record) => record,
            Err(e) => {
                bad(e.to_string())?;
                continue;
            }
        };
        let s1 = record.sentence1.trim();
        let s2 = record.sentence2.trim();
        if s1.is_empty() || s2.is_empty() {
            bad("empty sentence".to_owned())?;
            continue;
        }
        let Some(label) = DnliLabel::parse(record.label.trim()) else {
            parsed.skipped_labels += 1;
            continue;
        };
        parsed.triples.push(DnliTriple {
            s1: s1.to_owned(),
            s2: s2.to_owned(),
            label,
            origin_index,
        });
    }
    Ok(parsed)
}

/// Content-token normalization: lowercase, strip punctuation, split, drop
/// stopwords.
pub fn normalize(sentence: &str, stopwords: &HashSet<String>) -> BTreeSet<String> {
    text::content_tokens(sentence, stopwords)
}

fn strict_subset(a: &BTreeSet<String>, b: &BTreeSet<String>) -> bool {
    a.len() < b.len() && a.is_subset(b)
}

/// Token-overlap stand-in for directional entailment between the two
/// sentences of a positive pair.
pub fn classify_positive(s1: &str, s2: &str, config: &CurationConfig) -> PositiveSubtype {
    let t1 = normalize(s1, &config.stopwords);
    let t2 = normalize(s2, &config.stopwords);
    if text::jaccard(&t1, &t2) >= config.identity_jaccard {
        return PositiveSubtype::AlmostIdentical;
    }
    if strict_subset(&t2, &t1) {
        return PositiveSubtype::S1EntailsS2;
    }
    if strict_subset(&t1, &t2) {
        return PositiveSubtype::S2EntailsS1;
    }
    match t1.len().cmp(&t2.len()) {
        std::cmp::Ordering::Greater => PositiveSubtype::S1EntailsS2,
        std::cmp::Ordering::Less => PositiveSubtype::S2EntailsS1,
        std::cmp::Ordering::Equal => PositiveSubtype::AlmostIdentical,
    }
}

/// Maps a label (and, for positives, its subtype) to the operation the
/// emitted example is tagged with.
pub fn relabel(
    label: DnliLabel,
    subtype: Option<PositiveSubtype>,
    mapping: &OpMapping,
) -> Result<OpKind, CurationError> {
    match label {
        DnliLabel::Negative => Ok(mapping.negative),
        DnliLabel::Neutral => Ok(mapping.neutral),
        DnliLabel::Positive => match subtype.ok_or(CurationError::MissingSubtype)? {
            PositiveSubtype::S1EntailsS2 => Ok(mapping.s1_entails_s2),
            PositiveSubtype::S2EntailsS1 => Ok(mapping.s2_entails_s1),
            PositiveSubtype::AlmostIdentical => Ok(mapping.almost_identical),
        },
    }
}

/// Distractor sentences harvested from neutral pairs, deduplicated by
/// normalized key in first-seen order.
#[derive(Debug, Clone, Default)]
pub struct DistractorPool {
    sentences: Vec<String>,
    keys: Vec<String>,
    by_key: HashMap<String, usize>,
}

impl DistractorPool {
    pub fn from_neutral(triples: &[DnliTriple]) -> Self {
        let mut pool = DistractorPool::default();
        for triple in triples.iter().filter(|t| t.label == DnliLabel::Neutral) {
            for sentence in [&triple.s1, &triple.s2] {
                let key = normalize_key(sentence);
                if key.is_empty() || pool.by_key.contains_key(&key) {
                    continue;
                }
                pool.by_key.insert(key.clone(), pool.sentences.len());
                pool.keys.push(key);
                pool.sentences.push(sentence.clone());
            }
        }
        pool
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    fn contains_key(&self, key: &str) -> bool {
        self.by_key.contains_key(key)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleMeta {
    pub source_label: DnliLabel,
    pub subtype: Option<PositiveSubtype>,
    pub origin_index: usize,
    pub seed: u64,
}

/// One emitted training example: a synthetic memory, the incoming sentence,
/// and the operation a perfect model should answer. `memory[s1_index]` is
/// the sentence the incoming one was paired with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MmExample {
    pub memory: Vec<String>,
    pub info: String,
    pub op: Operation,
    pub s1_index: usize,
    pub meta: ExampleMeta,
}

/// Wraps a relabeled pair in a synthetic memory. Distractors are drawn
/// without replacement, never normalized-equal to s1, s2, or each other;
/// s1 lands at a uniformly random position. The record's RNG stream is
/// seeded with `seed` alone.
pub fn assemble_example(
    triple: &DnliTriple,
    op: OpKind,
    subtype: Option<PositiveSubtype>,
    pool: &DistractorPool,
    seed: u64,
    config: &CurationConfig,
) -> Result<MmExample, CurationError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(0..=config.max_distractors);

    let key1 = normalize_key(&triple.s1);
    let key2 = normalize_key(&triple.s2);
    let mut collisions = 0;
    if pool.contains_key(&key1) {
        collisions += 1;
    }
    if key2 != key1 && pool.contains_key(&key2) {
        collisions += 1;
    }
    let available = pool.len() - collisions;
    if available < k {
        return Err(CurationError::PoolExhausted { needed: k, available });
    }

    // k + collisions distinct draws always survive the collision filter.
    let draws = (k + collisions).min(pool.len());
    let picked = sample(&mut rng, pool.len(), draws);
    let mut memory: Vec<String> = picked
        .iter()
        .filter(|&i| pool.keys[i] != key1 && pool.keys[i] != key2)
        .take(k)
        .map(|i| pool.sentences[i].clone())
        .collect();
    debug_assert_eq!(memory.len(), k);

    let s1_index = rng.gen_range(0..=k);
    memory.insert(s1_index, triple.s1.clone());

    let op = match op {
        OpKind::Append => Operation::Append,
        OpKind::Pass => Operation::Pass,
        OpKind::Replace => Operation::Replace { target_index: s1_index },
    };
    Ok(MmExample {
        memory,
        info: triple.s2.clone(),
        op,
        s1_index,
        meta: ExampleMeta {
            source_label: triple.label,
            subtype,
            origin_index: triple.origin_index,
            seed,
        },
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub input_neutral: usize,
    pub input_negative: usize,
    pub input_positive: usize,
    pub malformed_lines: usize,
    pub skipped_labels: usize,
    pub subtype_s1_entails_s2: usize,
    pub subtype_s2_entails_s1: usize,
    pub subtype_almost_identical: usize,
    pub pool_append: usize,
    pub pool_pass: usize,
    pub pool_replace: usize,
    pub distractor_pool_size: usize,
    pub target_size: usize,
    pub target_truncated: bool,
    pub emitted_append: usize,
    pub emitted_pass: usize,
    pub emitted_replace: usize,
    pub total_emitted: usize,
}

/// Full pipeline: parse, sub-classify, relabel, balance by downsampling each
/// operation pool to the smallest of (target/3, pool sizes), assemble, and
/// emit sorted by origin position. Fails with `InsufficientData` if any
/// operation pool comes out empty.
pub fn build_dataset<R: BufRead>(
    reader: R,
    config: &CurationConfig,
) -> Result<(Vec<MmExample>, BuildStats), CurationError> {
    let parsed = parse_dnli(reader, config.strict_parse)?;
    let pool = DistractorPool::from_neutral(&parsed.triples);

    let mut stats = BuildStats {
        malformed_lines: parsed.malformed_lines,
        skipped_labels: parsed.skipped_labels,
        distractor_pool_size: pool.len(),
        target_size: config.target_size,
        target_truncated: config.target_size % 3 != 0,
        ..BuildStats::default()
    };

    let mut pools: [Vec<(&DnliTriple, Option<PositiveSubtype>)>; 3] =
        [Vec::new(), Vec::new(), Vec::new()];
    for triple in &parsed.triples {
        let subtype = match triple.label {
            DnliLabel::Positive => {
                stats.input_positive += 1;
                let subtype = classify_positive(&triple.s1, &triple.s2, config);
                match subtype {
                    PositiveSubtype::S1EntailsS2 => stats.subtype_s1_entails_s2 += 1,
                    PositiveSubtype::S2EntailsS1 => stats.subtype_s2_entails_s1 += 1,
                    PositiveSubtype::AlmostIdentical => stats.subtype_almost_identical += 1,
                }
                Some(subtype)
            }
            DnliLabel::Negative => {
                stats.input_negative += 1;
                None
            }
            DnliLabel::Neutral => {
                stats.input_neutral += 1;
                None
            }
        };
        let op = relabel(triple.label, subtype, &config.mapping)?;
        pools[op.index()].push((triple, subtype));
    }
    stats.pool_append = pools[OpKind::Append.index()].len();
    stats.pool_pass = pools[OpKind::Pass.index()].len();
    stats.pool_replace = pools[OpKind::Replace.index()].len();

    for kind in OpKind::ALL {
        if pools[kind.index()].is_empty() {
            return Err(CurationError::InsufficientData { pool: kind });
        }
    }

    let per_op = OpKind::ALL
        .iter()
        .map(|k| pools[k.index()].len())
        .min()
        .unwrap_or(0)
        .min(config.target_size / 3);

    let mut examples = Vec::with_capacity(per_op * 3);
    for kind in OpKind::ALL {
        let bucket = &mut pools[kind.index()];
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(mix::derive_seed(
            config.seed,
            mix::STREAM_POOL_SHUFFLE,
            kind.index() as u64,
        ));
        bucket.shuffle(&mut shuffle_rng);
        for (triple, subtype) in bucket.iter().take(per_op) {
            let record_seed = mix::derive_seed(
                config.seed,
                mix::STREAM_ASSEMBLE,
                triple.origin_index as u64,
            );
            let example = assemble_example(triple, kind, *subtype, &pool, record_seed, config)?;
            examples.push(example);
        }
    }
    examples.sort_by_key(|e| e.meta.origin_index);

    stats.emitted_append = per_op;
    stats.emitted_pass = per_op;
    stats.emitted_replace = per_op;
    stats.total_emitted = examples.len();
    Ok((examples, stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    /// One JSON object per example, loadable with [`load_examples`].
    AnalysisJsonl,
    /// `input<TAB>target` lines with 1-based replace targets.
    Seq2seqText,
}

#[derive(Serialize, Deserialize)]
struct ExampleRecord {
    memory: Vec<String>,
    info: String,
    op: OpKind,
    target_index: Option<usize>,
    s1_index: usize,
    meta: ExampleMeta,
}

impl From<&MmExample> for ExampleRecord {
    fn from(example: &MmExample) -> Self {
        ExampleRecord {
            memory: example.memory.clone(),
            info: example.info.clone(),
            op: example.op.kind(),
            target_index: example.op.target_index(),
            s1_index: example.s1_index,
            meta: example.meta.clone(),
        }
    }
}

fn seq2seq_line(example: &MmExample) -> String {
    let memory = example
        .memory
        .iter()
        .enumerate()
        .map(|(i, m)| format!("{}: {}", i + 1, m))
        .collect::<Vec<_>>()
        .join(" | ");
    let target = match example.op {
        Operation::Append => "append".to_owned(),
        Operation::Pass => "pass".to_owned(),
        Operation::Replace { target_index } => format!("replace {}", target_index + 1),
    };
    format!("memory: {} new: {}\t{}", memory, example.info, target)
}

pub fn export<W: Write>(
    examples: &[MmExample],
    format: ExportFormat,
    mut out: W,
) -> Result<(), CurationError> {
    for example in examples {
        match format {
            ExportFormat::AnalysisJsonl => {
                let record = ExampleRecord::from(example);
                serde_json::to_writer(&mut out, &record)
                    .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e))?;
            }
            ExportFormat::Seq2seqText => {
                out.write_all(seq2seq_line(example).as_bytes())?;
            }
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads the analysis_jsonl form back into examples, re-checking the
/// structural invariants (target present iff replace, indices in range,
/// replace target equal to s1's slot, non-blank sentences).
pub fn load_examples<R: BufRead>(reader: R) -> Result<Vec<MmExample>, CurationError> {
    let mut examples = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| CurationError::MalformedRecord { line: index + 1, reason };
        let record: ExampleRecord =
            serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let op = Operation::from_parts(record.op, record.target_index)
            .ok_or_else(|| bad("target_index must be present exactly for replace".to_owned()))?;
        if record.s1_index >= record.memory.len() {
            return Err(bad(format!(
                "s1_index {} out of range for memory of {}",
                record.s1_index,
                record.memory.len()
            )));
        }
        if let Operation::Replace { target_index } = op {
            if target_index != record.s1_index {
                return Err(bad(format!(
                    "replace target {} does not match s1_index {}",
                    target_index, record.s1_index
                )));
            }
        }
        if record.info.trim().is_empty() || record.memory.iter().any(|m| m.trim().is_empty()) {
            return Err(bad("blank sentence".to_owned()));
        }
        examples.push(MmExample {
            memory: record.memory,
            info: record.info,
            op,
            s1_index: record.s1_index,
            meta: record.meta,
        });
    }
    Ok(examples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::BufReader;

    fn cfg() -> CurationConfig {
        CurationConfig::default()
    }

    #[test]
    fn parse_collects_triples_and_counts_problems() {
        let input = concat!(
            r#"{"sentence1":"i like tea","sentence2":"i own a dog","label":"neutral"}"#, "\n",
            "not json\n",
            r#"{"sentence1":"a","sentence2":"b","label":"sarcastic"}"#, "\n",
            r#"{"sentence1":"  ","sentence2":"b","label":"neutral"}"#, "\n",
            r#"{"sentence1":"i ski","sentence2":"i do not ski","label":"negative","extra":1}"#, "\n",
        );
        let parsed = parse_dnli(BufReader::new(input.as_bytes()), false).unwrap();
        assert_eq!(parsed.triples.len(), 2);
        assert_eq!(parsed.malformed_lines, 2);
        assert_eq!(parsed.skipped_labels, 1);
        assert_eq!(parsed.triples[0].origin_index, 0);
        assert_eq!(parsed.triples[1].origin_index, 4);
        assert_eq!(parsed.triples[1].label, DnliLabel::Negative);
    }

    #[test]
    fn strict_parse_aborts_with_line_number() {
        let input = "{\"sentence1\":\"a\",\"sentence2\":\"b\",\"label\":\"neutral\"}\nnot json\n";
        let err = parse_dnli(BufReader::new(input.as_bytes()), true).unwrap_err();
        match err {
            CurationError::MalformedRecord { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn classify_positive_covers_all_branches() {
        let config = cfg();
        assert_eq!(
            classify_positive("i have two dogs and a cat", "i have a cat", &config),
            PositiveSubtype::S1EntailsS2
        );
        assert_eq!(
            classify_positive("i have a cat", "i have two dogs and a cat", &config),
            PositiveSubtype::S2EntailsS1
        );
        assert_eq!(
            classify_positive("i like tea", "i like tea", &config),
            PositiveSubtype::AlmostIdentical
        );
        // disjoint token sets fall through to the size comparison
        assert_eq!(
            classify_positive("i adore fresh mountain air", "i ski", &config),
            PositiveSubtype::S1EntailsS2
        );
        assert_eq!(
            classify_positive("i ski", "i adore fresh mountain air", &config),
            PositiveSubtype::S2EntailsS1
        );
        assert_eq!(
            classify_positive("i like cats", "i like dogs", &config),
            PositiveSubtype::AlmostIdentical
        );
    }

    #[test]
    fn relabel_follows_the_mapping_table() {
        let mapping = OpMapping::default();
        let cases = [
            (DnliLabel::Positive, Some(PositiveSubtype::S1EntailsS2), OpKind::Pass),
            (DnliLabel::Positive, Some(PositiveSubtype::S2EntailsS1), OpKind::Replace),
            (DnliLabel::Positive, Some(PositiveSubtype::AlmostIdentical), OpKind::Append),
            (DnliLabel::Negative, None, OpKind::Replace),
            (DnliLabel::Neutral, None, OpKind::Append),
        ];
        for (label, subtype, want) in cases {
            assert_eq!(relabel(label, subtype, &mapping).unwrap(), want, "{label:?} {subtype:?}");
        }
        assert!(matches!(
            relabel(DnliLabel::Positive, None, &mapping),
            Err(CurationError::MissingSubtype)
        ));
    }

    fn neutral_triples(n: usize) -> Vec<DnliTriple> {
        (0..n)
            .map(|i| DnliTriple {
                s1: format!("i collect stamps from country {i}"),
                s2: format!("my friend number {i} lives far away"),
                label: DnliLabel::Neutral,
                origin_index: i,
            })
            .collect()
    }

    #[test]
    fn pool_dedupes_by_normalized_key() {
        let mut triples = neutral_triples(3);
        triples.push(DnliTriple {
            s1: "I collect stamps from country 0!".to_owned(),
            s2: "something genuinely new".to_owned(),
            label: DnliLabel::Neutral,
            origin_index: 9,
        });
        let pool = DistractorPool::from_neutral(&triples);
        assert_eq!(pool.len(), 7);
    }

    #[test]
    fn assemble_respects_structure() {
        let pool = DistractorPool::from_neutral(&neutral_triples(40));
        let triple = DnliTriple {
            s1: "i play the violin".to_owned(),
            s2: "i play no instrument".to_owned(),
            label: DnliLabel::Negative,
            origin_index: 77,
        };
        let config = cfg();
        for seed in 0..200 {
            let ex =
                assemble_example(&triple, OpKind::Replace, None, &pool, seed, &config).unwrap();
            assert!(ex.memory.len() >= 1 && ex.memory.len() <= config.max_distractors + 1);
            assert_eq!(ex.memory[ex.s1_index], triple.s1);
            assert_eq!(ex.op, Operation::Replace { target_index: ex.s1_index });
            assert_eq!(ex.info, triple.s2);
            assert_eq!(ex.meta.seed, seed);
            // no duplicate sentences under normalization, info never equals a distractor
            let keys: Vec<String> = ex.memory.iter().map(|m| normalize_key(m)).collect();
            let unique: HashSet<&String> = keys.iter().collect();
            assert_eq!(unique.len(), keys.len());
            let info_key = normalize_key(&ex.info);
            for (i, key) in keys.iter().enumerate() {
                if i != ex.s1_index {
                    assert_ne!(*key, info_key);
                }
            }
        }
    }

    #[test]
    fn assemble_is_deterministic_per_seed() {
        let pool = DistractorPool::from_neutral(&neutral_triples(40));
        let triple = DnliTriple {
            s1: "i bake bread".to_owned(),
            s2: "i bake sourdough bread".to_owned(),
            label: DnliLabel::Positive,
            origin_index: 3,
        };
        let a = assemble_example(
            &triple,
            OpKind::Replace,
            Some(PositiveSubtype::S2EntailsS1),
            &pool,
            42,
            &cfg(),
        )
        .unwrap();
        let b = assemble_example(
            &triple,
            OpKind::Replace,
            Some(PositiveSubtype::S2EntailsS1),
            &pool,
            42,
            &cfg(),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn assemble_reports_pool_exhaustion() {
        let pool = DistractorPool::from_neutral(&neutral_triples(2));
        let triple = DnliTriple {
            s1: "i sail".to_owned(),
            s2: "i sail boats".to_owned(),
            label: DnliLabel::Positive,
            origin_index: 0,
        };
        let config = cfg();
        let mut saw_exhausted = false;
        for seed in 0..50 {
            match assemble_example(
                &triple,
                OpKind::Pass,
                Some(PositiveSubtype::S1EntailsS2),
                &pool,
                seed,
                &config,
            ) {
                Ok(ex) => assert!(ex.memory.len() <= 5),
                Err(CurationError::PoolExhausted { available, .. }) => {
                    assert_eq!(available, 4);
                    saw_exhausted = true;
                }
                Err(other) => panic!("unexpected {other:?}"),
            }
        }
        assert!(saw_exhausted, "k never exceeded the tiny pool");
    }

    #[test]
    fn export_seq2seq_shape() {
        let example = MmExample {
            memory: vec!["i like tea".into(), "i own a dog".into()],
            info: "i hate tea".into(),
            op: Operation::Replace { target_index: 0 },
            s1_index: 0,
            meta: ExampleMeta {
                source_label: DnliLabel::Negative,
                subtype: None,
                origin_index: 0,
                seed: 1,
            },
        };
        let mut out = Vec::new();
        export(&[example], ExportFormat::Seq2seqText, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "memory: 1: i like tea | 2: i own a dog new: i hate tea\treplace 1\n"
        );
    }

    #[test]
    fn analysis_jsonl_round_trips() {
        let example = MmExample {
            memory: vec!["i swim daily".into(), "i like tea".into()],
            info: "i like green tea".into(),
            op: Operation::Replace { target_index: 1 },
            s1_index: 1,
            meta: ExampleMeta {
                source_label: DnliLabel::Positive,
                subtype: Some(PositiveSubtype::S2EntailsS1),
                origin_index: 12,
                seed: 99,
            },
        };
        let mut out = Vec::new();
        export(std::slice::from_ref(&example), ExportFormat::AnalysisJsonl, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let value: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(value["op"], "replace");
        assert_eq!(value["target_index"], 1);
        assert_eq!(value["meta"]["subtype"], "s2_entails_s1");
        assert_eq!(value["meta"]["source_label"], "positive");

        let loaded = load_examples(BufReader::new(text.as_bytes())).unwrap();
        assert_eq!(loaded, vec![example]);
    }

    #[test]
    fn load_rejects_incoherent_records() {
        let no_target = r#"{"memory":["a b c"],"info":"x y","op":"replace","target_index":null,"s1_index":0,"meta":{"source_label":"negative","subtype":null,"origin_index":0,"seed":0}}"#;
        assert!(load_examples(BufReader::new(no_target.as_bytes())).is_err());
        let spurious = r#"{"memory":["a b c"],"info":"x y","op":"pass","target_index":0,"s1_index":0,"meta":{"source_label":"positive","subtype":"s1_entails_s2","origin_index":0,"seed":0}}"#;
        assert!(load_examples(BufReader::new(spurious.as_bytes())).is_err());
        let mismatched = r#"{"memory":["a b","c d"],"info":"x y","op":"replace","target_index":0,"s1_index":1,"meta":{"source_label":"negative","subtype":null,"origin_index":0,"seed":0}}"#;
        assert!(load_examples(BufReader::new(mismatched.as_bytes())).is_err());
    }
}
