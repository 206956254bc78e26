//! Trace simulation, op-level scoring, and predictor comparison.
//!
//! The central measurement is memory growth per 100 conversation turns.
//! Every turn counts toward the rate, both speakers, whether or not it
//! carried an info sentence; reports say so in `turn_accounting`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;
use thiserror::Error;

use crate::curation::MmExample;
use crate::memory::{CoreConfig, CoreError, Memory, OpKind, Operation, Speaker, UserInfo};
use crate::predictor::{example_inputs, oracle_predict, PredictError, Predictor};
use crate::text::is_negation;

pub const TURN_ACCOUNTING: &str = "all turns counted, both speakers";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("malformed trace at line {line}: {reason}")]
    MalformedTrace { line: usize, reason: String },
    #[error("cannot score an empty dataset")]
    EmptyDataset,
    #[error("reports do not cover the same traces: {0}")]
    MismatchedTraces(String),
    #[error("example {index} is unusable: {reason}")]
    InvalidExample { index: usize, reason: String },
    #[error("predictor failed on example {index}: {source}")]
    ExamplePredict {
        index: usize,
        #[source]
        source: PredictError,
    },
    #[error("predictor failed at turn {turn} of trace {trace_id}: {source}")]
    TracePredict {
        trace_id: String,
        turn: usize,
        #[source]
        source: PredictError,
    },
    #[error("apply failed at turn {turn} of trace {trace_id}: {source}")]
    TraceApply {
        trace_id: String,
        turn: usize,
        #[source]
        source: CoreError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub utterance: String,
    /// Pre-extracted info sentence; `None` marks a turn with nothing worth
    /// remembering.
    #[serde(default)]
    pub info: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationTrace {
    pub trace_id: String,
    pub turns: Vec<Turn>,
}

/// Reads line-delimited trace records, rejecting structurally broken ones
/// with their line number.
pub fn load_traces<R: BufRead>(reader: R) -> Result<Vec<ConversationTrace>, HarnessError> {
    let mut traces = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| HarnessError::MalformedTrace { line: index + 1, reason };
        let trace: ConversationTrace =
            serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        if trace.trace_id.trim().is_empty() {
            return Err(bad("blank trace_id".to_owned()));
        }
        if trace.turns.is_empty() {
            return Err(bad("trace has no turns".to_owned()));
        }
        if let Some(turn) = trace
            .turns
            .iter()
            .position(|t| matches!(&t.info, Some(info) if info.trim().is_empty()))
        {
            return Err(bad(format!("turn {turn} carries blank info")));
        }
        traces.push(trace);
    }
    Ok(traces)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub append: usize,
    pub pass: usize,
    pub replace: usize,
}

impl OpCounts {
    pub fn record(&mut self, kind: OpKind) {
        match kind {
            OpKind::Append => self.append += 1,
            OpKind::Pass => self.pass += 1,
            OpKind::Replace => self.replace += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.append + self.pass + self.replace
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub turn: usize,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub trace_id: String,
    pub predictor: String,
    pub total_turns: usize,
    pub info_turns: usize,
    /// Memory size after each info-bearing turn, in turn order.
    pub per_turn_sizes: Vec<usize>,
    pub op_counts: OpCounts,
    pub final_memory: Memory,
    pub entries_per_100_turns: f64,
    /// Memory size at whole-hundred turn counts (100, 200, ...).
    pub checkpoint_sizes: Vec<Checkpoint>,
    pub turn_accounting: String,
}

/// Feeds a trace through a predictor turn by turn. Turns without info leave
/// the memory untouched but still count toward the growth rate.
pub fn run_trace(
    trace: &ConversationTrace,
    predictor: &dyn Predictor,
    config: &CoreConfig,
) -> Result<SimulationReport, HarnessError> {
    let mut memory = Memory::new();
    let mut per_turn_sizes = Vec::new();
    let mut op_counts = OpCounts::default();
    let mut checkpoints = Vec::new();

    for (turn, record) in trace.turns.iter().enumerate() {
        if let Some(text) = &record.info {
            let info = UserInfo::new(text.clone(), record.speaker, Some(turn as u32));
            let op = predictor.predict(&memory, &info).map_err(|source| {
                HarnessError::TracePredict { trace_id: trace.trace_id.clone(), turn, source }
            })?;
            memory
                .apply_in_place(&op, &info, turn as u32, config)
                .map_err(|source| HarnessError::TraceApply {
                    trace_id: trace.trace_id.clone(),
                    turn,
                    source,
                })?;
            op_counts.record(op.kind());
            per_turn_sizes.push(memory.len());
        }
        if (turn + 1) % 100 == 0 {
            checkpoints.push(Checkpoint { turn: turn + 1, size: memory.len() });
        }
    }

    let total_turns = trace.turns.len();
    let entries_per_100_turns = if total_turns == 0 {
        0.0
    } else {
        100.0 * memory.len() as f64 / total_turns as f64
    };
    Ok(SimulationReport {
        trace_id: trace.trace_id.clone(),
        predictor: predictor.name().to_owned(),
        total_turns,
        info_turns: per_turn_sizes.len(),
        per_turn_sizes,
        op_counts,
        final_memory: memory,
        entries_per_100_turns,
        checkpoint_sizes: checkpoints,
        turn_accounting: TURN_ACCOUNTING.to_owned(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PerClass {
    pub append: ClassMetrics,
    pub pass: ClassMetrics,
    pub replace: ClassMetrics,
}

/// Dataset-level scoring of predicted against gold operations.
///
/// `confusion[gold][predicted]` uses the fixed class order append, pass,
/// replace. Zero denominators yield 0.0 for precision/recall/F1; the two
/// replace accuracies are 1.0 when the dataset has no gold replace at all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpMetrics {
    pub total: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: PerClass,
    pub confusion: [[u64; 3]; 3],
    /// Gold-replace examples answered with replace at the right index.
    pub strict_replace_accuracy: f64,
    /// Gold-replace examples answered with replace at any index.
    pub lenient_replace_accuracy: f64,
}

impl fmt::Display for OpMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>10} {:>10} {:>10}", "class", "precision", "recall", "f1")?;
        for (kind, m) in [
            (OpKind::Append, self.per_class.append),
            (OpKind::Pass, self.per_class.pass),
            (OpKind::Replace, self.per_class.replace),
        ] {
            writeln!(
                f,
                "{:<10} {:>10.4} {:>10.4} {:>10.4}",
                kind.as_str(),
                m.precision,
                m.recall,
                m.f1
            )?;
        }
        writeln!(f, "{:<10} {:>10.4}", "accuracy", self.accuracy)?;
        writeln!(f, "{:<10} {:>10.4}", "macro_f1", self.macro_f1)?;
        writeln!(f, "replace accuracy: strict {:.4}, lenient {:.4}", self.strict_replace_accuracy, self.lenient_replace_accuracy)?;
        write!(f, "examples: {}", self.total)
    }
}

fn ratio(numerator: u64, denominator: u64) -> f64 {
    if denominator == 0 {
        0.0
    } else {
        numerator as f64 / denominator as f64
    }
}

fn class_metrics(confusion: &[[u64; 3]; 3], class: usize) -> ClassMetrics {
    let tp = confusion[class][class];
    let predicted: u64 = (0..3).map(|g| confusion[g][class]).sum();
    let gold: u64 = confusion[class].iter().sum();
    let precision = ratio(tp, predicted);
    let recall = ratio(tp, gold);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassMetrics { precision, recall, f1 }
}

/// Scores a predict function over a labeled dataset.
pub fn evaluate_ops<F>(examples: &[MmExample], mut predict: F) -> Result<OpMetrics, HarnessError>
where
    F: FnMut(&MmExample) -> Result<Operation, PredictError>,
{
    if examples.is_empty() {
        return Err(HarnessError::EmptyDataset);
    }
    let mut confusion = [[0u64; 3]; 3];
    let mut gold_replace = 0u64;
    let mut strict_hits = 0u64;
    for (index, example) in examples.iter().enumerate() {
        if example.s1_index >= example.memory.len() {
            return Err(HarnessError::InvalidExample {
                index,
                reason: "s1_index out of range".to_owned(),
            });
        }
        let predicted = predict(example)
            .map_err(|source| HarnessError::ExamplePredict { index, source })?;
        confusion[example.op.kind().index()][predicted.kind().index()] += 1;
        if let Operation::Replace { target_index } = example.op {
            gold_replace += 1;
            if predicted == (Operation::Replace { target_index }) {
                strict_hits += 1;
            }
        }
    }
    let total = examples.len();
    let trace: u64 = (0..3).map(|i| confusion[i][i]).sum();
    let per_class = PerClass {
        append: class_metrics(&confusion, 0),
        pass: class_metrics(&confusion, 1),
        replace: class_metrics(&confusion, 2),
    };
    let macro_f1 = (per_class.append.f1 + per_class.pass.f1 + per_class.replace.f1) / 3.0;
    let lenient_hits: u64 = confusion[OpKind::Replace.index()][OpKind::Replace.index()];
    let (strict_replace_accuracy, lenient_replace_accuracy) = if gold_replace == 0 {
        (1.0, 1.0)
    } else {
        (ratio(strict_hits, gold_replace), ratio(lenient_hits, gold_replace))
    };
    Ok(OpMetrics {
        total,
        accuracy: trace as f64 / total as f64,
        macro_f1,
        per_class,
        confusion,
        strict_replace_accuracy,
        lenient_replace_accuracy,
    })
}

/// Scores the gold labels against themselves. The ceiling every model is
/// under.
pub fn evaluate_oracle(examples: &[MmExample]) -> Result<OpMetrics, HarnessError> {
    evaluate_ops(examples, |example| Ok(oracle_predict(example)))
}

/// Scores a live predictor by rebuilding each example's memory view.
pub fn evaluate_predictor(
    examples: &[MmExample],
    predictor: &dyn Predictor,
) -> Result<OpMetrics, HarnessError> {
    evaluate_ops(examples, |example| {
        let (memory, info) = example_inputs(example)?;
        predictor.predict(&memory, &info)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub predictor: String,
    pub traces: usize,
    pub total_turns: usize,
    pub final_entries: usize,
    pub entries_per_100_turns: f64,
    /// Percent fewer final entries than append_only over the same traces.
    pub reduction_vs_append_only: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<14} {:>7} {:>8} {:>8} {:>15} {:>12}",
            "predictor", "traces", "turns", "final", "per-100-turns", "reduction"
        )?;
        for (i, row) in self.rows.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            let reduction = match row.reduction_vs_append_only {
                Some(r) => format!("{r:.1}%"),
                None => "n/a".to_owned(),
            };
            write!(
                f,
                "{:<14} {:>7} {:>8} {:>8} {:>15.1} {:>12}",
                row.predictor,
                row.traces,
                row.total_turns,
                row.final_entries,
                row.entries_per_100_turns,
                reduction
            )?;
        }
        Ok(())
    }
}

/// Aggregates per-trace reports into one row per predictor and sizes each
/// against the append_only baseline when present.
///
/// Panics if a managed predictor ends up with more entries than append_only
/// over the same traces; the apply semantics make that impossible, so it
/// can only mean a harness bug.
pub fn compare(reports: &[SimulationReport]) -> Result<ComparisonTable, HarnessError> {
    if reports.is_empty() {
        return Err(HarnessError::EmptyDataset);
    }
    let mut order: Vec<&str> = Vec::new();
    let mut traces_by_predictor: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for report in reports {
        if !order.contains(&report.predictor.as_str()) {
            order.push(&report.predictor);
        }
        traces_by_predictor
            .entry(&report.predictor)
            .or_default()
            .push(&report.trace_id);
    }
    let mut reference: Vec<&str> = traces_by_predictor[order[0]].clone();
    reference.sort_unstable();
    for (predictor, trace_ids) in &traces_by_predictor {
        let mut sorted = trace_ids.clone();
        sorted.sort_unstable();
        if sorted != reference {
            return Err(HarnessError::MismatchedTraces(format!(
                "{predictor} covers {} traces, {} covers {}",
                sorted.len(),
                order[0],
                reference.len()
            )));
        }
    }

    let mut rows: Vec<ComparisonRow> = order
        .iter()
        .map(|name| {
            let relevant = reports.iter().filter(|r| r.predictor == *name);
            let (mut traces, mut turns, mut finals) = (0usize, 0usize, 0usize);
            for report in relevant {
                traces += 1;
                turns += report.total_turns;
                finals += report.final_memory.len();
            }
            ComparisonRow {
                predictor: (*name).to_owned(),
                traces,
                total_turns: turns,
                final_entries: finals,
                entries_per_100_turns: if turns == 0 {
                    0.0
                } else {
                    100.0 * finals as f64 / turns as f64
                },
                reduction_vs_append_only: None,
            }
        })
        .collect();

    let baseline = rows
        .iter()
        .find(|r| r.predictor == "append_only")
        .map(|r| r.final_entries);
    if let Some(baseline) = baseline {
        for row in &mut rows {
            assert!(
                row.final_entries <= baseline,
                "{} ended with {} entries, above the append_only baseline {}",
                row.predictor,
                row.final_entries,
                baseline
            );
            row.reduction_vs_append_only = if baseline == 0 {
                None
            } else {
                Some(100.0 * (1.0 - row.final_entries as f64 / baseline as f64))
            };
        }
    }
    Ok(ComparisonTable { rows })
}

/// Flips the polarity of a synthetic info sentence: drops the first
/// negation word if one is present, otherwise inserts one.
pub fn negate_sentence(sentence: &str) -> String {
    let words: Vec<&str> = sentence.split_whitespace().collect();
    if let Some(position) = words
        .iter()
        .position(|w| crate::text::tokenize(w).iter().any(|t| is_negation(t)))
    {
        let mut kept = words.clone();
        kept.remove(position);
        return kept.join(" ");
    }
    if let Some(rest) = sentence.strip_prefix("i am ") {
        return format!("i am not {rest}");
    }
    if let Some(rest) = sentence.strip_prefix("i ") {
        return format!("i do not {rest}");
    }
    format!("it is not true that {sentence}")
}

/// Sentence bank for synthetic traces.
pub fn default_synth_pool() -> Vec<String> {
    [
        "i like green tea",
        "i own a golden retriever",
        "i play chess on sundays",
        "i work as a nurse",
        "i grew up near the coast",
        "i collect vinyl records",
        "i ride my bike to work",
        "i bake sourdough bread",
        "i speak a little spanish",
        "i volunteer at the library",
        "i run five miles most mornings",
        "i paint with watercolors",
        "i keep a vegetable garden",
        "i love thunderstorms",
        "i read mystery novels",
        "i sing in a choir",
        "i fix old radios",
        "i drink my coffee black",
        "i climb at the local gym",
        "i play the banjo",
        "i watch soccer every weekend",
        "i knit scarves in winter",
        "i drive a pickup truck",
        "i study marine biology",
        "i practice yoga at dawn",
        "i brew my own cider",
        "i take photos of birds",
        "i ski every february",
        "i cook curry on fridays",
        "i tutor math after school",
        "i sail on the lake",
        "i carve wooden spoons",
        "i follow formula one",
        "i grow orchids indoors",
        "i juggle at parties",
        "i camp in the mountains",
        "i write short stories",
        "i dance salsa on thursdays",
        "i restore antique clocks",
        "i feed the neighborhood cats",
    ]
    .into_iter()
    .map(str::to_owned)
    .collect()
}

/// Generates a deterministic synthetic trace. Each turn carries exactly one
/// info sentence: fresh from the pool with probability
/// `1 - contradiction_rate`, otherwise a negation or verbatim repeat of an
/// earlier one. Fresh sentences get a running ordinal so they never repeat
/// even when the pool cycles.
///
/// `pool` must be non-empty and `contradiction_rate` within [0, 1].
pub fn synth_trace(
    seed: u64,
    n_turns: usize,
    contradiction_rate: f64,
    pool: &[String],
) -> ConversationTrace {
    assert!(!pool.is_empty(), "synthetic trace needs a sentence pool");
    assert!(
        (0.0..=1.0).contains(&contradiction_rate),
        "contradiction_rate {contradiction_rate} outside [0, 1]"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history: Vec<String> = Vec::new();
    let mut fresh = 0usize;
    let mut turns = Vec::with_capacity(n_turns);
    for turn in 0..n_turns {
        let text = if !history.is_empty() && rng.gen_bool(contradiction_rate) {
            let earlier = &history[rng.gen_range(0..history.len())];
            if rng.gen_bool(0.5) {
                negate_sentence(earlier)
            } else {
                earlier.clone()
            }
        } else {
            let base = &pool[fresh % pool.len()];
            fresh += 1;
            format!("{base} {fresh}")
        };
        history.push(text.clone());
        turns.push(Turn {
            speaker: if turn % 2 == 0 { Speaker::User } else { Speaker::Bot },
            utterance: text.clone(),
            info: Some(text),
        });
    }
    ConversationTrace {
        trace_id: format!("synth-s{seed}-n{n_turns}-c{contradiction_rate}"),
        turns,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curation::{DnliLabel, ExampleMeta};
    use crate::predictor::{AppendOnlyPredictor, HeuristicPredictor};
    use std::io::BufReader;

    fn example(memory: &[&str], info: &str, op: Operation, s1_index: usize) -> MmExample {
        MmExample {
            memory: memory.iter().map(|m| m.to_string()).collect(),
            info: info.to_owned(),
            op,
            s1_index,
            meta: ExampleMeta {
                source_label: DnliLabel::Neutral,
                subtype: None,
                origin_index: 0,
                seed: 0,
            },
        }
    }

    #[test]
    fn load_traces_accepts_wire_form() {
        let input = concat!(
            r#"{"trace_id":"t1","turns":[{"speaker":"user","utterance":"hi there","info":"i like tea"},{"speaker":"bot","utterance":"noted"}]}"#,
            "\n"
        );
        let traces = load_traces(BufReader::new(input.as_bytes())).unwrap();
        assert_eq!(traces.len(), 1);
        assert_eq!(traces[0].turns.len(), 2);
        assert_eq!(traces[0].turns[0].info.as_deref(), Some("i like tea"));
        assert_eq!(traces[0].turns[1].info, None);
    }

    #[test]
    fn load_traces_rejects_broken_records() {
        for (line, input) in [
            "not json",
            r#"{"trace_id":"t","turns":[]}"#,
            r#"{"trace_id":"t","turns":[{"speaker":"user","utterance":"x","info":"  "}]}"#,
            r#"{"trace_id":"  ","turns":[{"speaker":"user","utterance":"x"}]}"#,
        ]
        .into_iter()
        .enumerate()
        {
            let err = load_traces(BufReader::new(input.as_bytes())).unwrap_err();
            match err {
                HarnessError::MalformedTrace { line: got, .. } => {
                    assert_eq!(got, 1, "case {line}")
                }
                other => panic!("case {line}: unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn run_trace_skips_infoless_turns_but_counts_them() {
        let trace = ConversationTrace {
            trace_id: "t".to_owned(),
            turns: vec![
                Turn {
                    speaker: Speaker::User,
                    utterance: "hello".to_owned(),
                    info: None,
                },
                Turn {
                    speaker: Speaker::User,
                    utterance: "i like tea".to_owned(),
                    info: Some("i like tea".to_owned()),
                },
                Turn {
                    speaker: Speaker::Bot,
                    utterance: "ok".to_owned(),
                    info: None,
                },
                Turn {
                    speaker: Speaker::User,
                    utterance: "i own a dog".to_owned(),
                    info: Some("i own a dog".to_owned()),
                },
            ],
        };
        let report = run_trace(&trace, &AppendOnlyPredictor, &CoreConfig::default()).unwrap();
        assert_eq!(report.total_turns, 4);
        assert_eq!(report.info_turns, 2);
        assert_eq!(report.per_turn_sizes, vec![1, 2]);
        assert_eq!(report.op_counts.append, 2);
        assert_eq!(report.op_counts.total(), 2);
        assert_eq!(report.final_memory.len(), 2);
        assert_eq!(report.entries_per_100_turns, 50.0);
        assert!(report.checkpoint_sizes.is_empty());
        assert_eq!(report.final_memory.entries()[1].created_turn, 3);
    }

    #[test]
    fn run_trace_checkpoints_every_hundred_turns() {
        let pool = default_synth_pool();
        let trace = synth_trace(3, 250, 0.0, &pool);
        let report = run_trace(&trace, &AppendOnlyPredictor, &CoreConfig::default()).unwrap();
        assert_eq!(
            report.checkpoint_sizes,
            vec![
                Checkpoint { turn: 100, size: 100 },
                Checkpoint { turn: 200, size: 200 }
            ]
        );
        assert_eq!(report.entries_per_100_turns, 100.0);
    }

    #[test]
    fn oracle_scores_perfectly() {
        let examples = vec![
            example(&["a b"], "c d", Operation::Append, 0),
            example(&["a b"], "a b", Operation::Pass, 0),
            example(&["a b"], "a b c", Operation::Replace { target_index: 0 }, 0),
        ];
        let metrics = evaluate_oracle(&examples).unwrap();
        assert_eq!(metrics.accuracy, 1.0);
        assert_eq!(metrics.macro_f1, 1.0);
        assert_eq!(metrics.strict_replace_accuracy, 1.0);
        assert_eq!(metrics.lenient_replace_accuracy, 1.0);
        assert_eq!(metrics.confusion[0][0], 1);
        assert_eq!(metrics.confusion[1][1], 1);
        assert_eq!(metrics.confusion[2][2], 1);
    }

    #[test]
    fn confusion_rows_are_gold_and_trace_is_accuracy() {
        let examples = vec![
            example(&["x y"], "p q", Operation::Append, 0),
            example(&["x y"], "p q", Operation::Pass, 0),
            example(&["x y"], "p q", Operation::Replace { target_index: 0 }, 0),
        ];
        let metrics = evaluate_predictor(&examples, &AppendOnlyPredictor).unwrap();
        assert_eq!(metrics.confusion[0], [1, 0, 0]);
        assert_eq!(metrics.confusion[1], [1, 0, 0]);
        assert_eq!(metrics.confusion[2], [1, 0, 0]);
        let total: u64 = metrics.confusion.iter().flatten().sum();
        assert_eq!(total as usize, metrics.total);
        assert!((metrics.accuracy - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(metrics.strict_replace_accuracy, 0.0);
        assert_eq!(metrics.lenient_replace_accuracy, 0.0);
    }

    #[test]
    fn strict_and_lenient_replace_differ_on_wrong_targets() {
        let examples = vec![example(
            &["i like tea", "i own a dog"],
            "i do not like tea",
            Operation::Replace { target_index: 1 },
            1,
        )];
        // heuristic replaces index 0, gold says 1: lenient credits, strict does not
        let metrics = evaluate_predictor(&examples, &HeuristicPredictor::default()).unwrap();
        assert_eq!(metrics.lenient_replace_accuracy, 1.0);
        assert_eq!(metrics.strict_replace_accuracy, 0.0);
        assert_eq!(metrics.accuracy, 1.0);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        assert!(matches!(evaluate_oracle(&[]), Err(HarnessError::EmptyDataset)));
    }

    #[test]
    fn metrics_are_permutation_invariant() {
        let mut examples = vec![
            example(&["a b"], "c d", Operation::Append, 0),
            example(&["e f"], "e f", Operation::Pass, 0),
            example(&["g h"], "g h i", Operation::Replace { target_index: 0 }, 0),
            example(&["j k"], "l m", Operation::Append, 0),
        ];
        let forward = evaluate_predictor(&examples, &HeuristicPredictor::default()).unwrap();
        examples.reverse();
        let backward = evaluate_predictor(&examples, &HeuristicPredictor::default()).unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn compare_reduction_matches_hand_arithmetic() {
        let pool = default_synth_pool();
        let trace = synth_trace(1, 100, 0.0, &pool);
        let mut managed = run_trace(&trace, &HeuristicPredictor::default(), &CoreConfig::default()).unwrap();
        let mut baseline = run_trace(&trace, &AppendOnlyPredictor, &CoreConfig::default()).unwrap();
        // pin the sizes the derived arithmetic uses
        managed.final_memory = Memory::from_texts((0..70).map(|i| format!("entry {i}"))).unwrap();
        baseline.final_memory = Memory::from_texts((0..117).map(|i| format!("entry {i}"))).unwrap();
        let table = compare(&[managed, baseline]).unwrap();
        let row = &table.rows[0];
        assert_eq!(row.predictor, "heuristic");
        let reduction = row.reduction_vs_append_only.unwrap();
        assert!((reduction - 40.17094017094017).abs() < 1e-9);
        assert_eq!(format!("{reduction:.1}%"), "40.2%");
        assert_eq!(
            table.rows[1].reduction_vs_append_only,
            Some(0.0)
        );
    }

    #[test]
    fn compare_rejects_mismatched_trace_sets() {
        let pool = default_synth_pool();
        let t1 = synth_trace(1, 10, 0.0, &pool);
        let t2 = synth_trace(2, 10, 0.0, &pool);
        let config = CoreConfig::default();
        let reports = vec![
            run_trace(&t1, &HeuristicPredictor::default(), &config).unwrap(),
            run_trace(&t1, &AppendOnlyPredictor, &config).unwrap(),
            run_trace(&t2, &AppendOnlyPredictor, &config).unwrap(),
        ];
        assert!(matches!(
            compare(&reports),
            Err(HarnessError::MismatchedTraces(_))
        ));
    }

    #[test]
    fn negate_sentence_round_trips_polarity() {
        assert_eq!(negate_sentence("i like tea"), "i do not like tea");
        assert_eq!(negate_sentence("i do not like tea"), "i do like tea");
        assert_eq!(negate_sentence("i am a nurse"), "i am not a nurse");
        assert_eq!(negate_sentence("winters are long"), "it is not true that winters are long");
    }

    #[test]
    fn synth_trace_is_deterministic_and_fresh_when_rate_zero() {
        let pool = default_synth_pool();
        let a = synth_trace(11, 120, 0.0, &pool);
        let b = synth_trace(11, 120, 0.0, &pool);
        assert_eq!(a, b);
        let infos: Vec<&String> = a.turns.iter().filter_map(|t| t.info.as_ref()).collect();
        assert_eq!(infos.len(), 120);
        let unique: std::collections::HashSet<&String> = infos.iter().copied().collect();
        assert_eq!(unique.len(), 120, "rate-0 traces must never repeat a sentence");
    }

    #[test]
    fn synth_trace_single_sentence_pool_stays_flat() {
        // with one pool sentence and full contradiction rate, every turn after
        // the first is a repeat or negation of it; a managed memory never
        // needs a second slot (checked by hand for any turn count up to 6)
        let pool = vec!["i like tea".to_owned()];
        for n in 1..=6 {
            let trace = synth_trace(5, n, 1.0, &pool);
            let report =
                run_trace(&trace, &HeuristicPredictor::default(), &CoreConfig::default()).unwrap();
            assert_eq!(report.per_turn_sizes, vec![1; n]);
        }
    }
}
