//! memctl: build memory-op datasets, replay conversations against
//! predictors, score operation accuracy, serve the session API, and poke at
//! a memory by hand.

mod config;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use memctl_core::curation::{build_dataset, load_examples, ExportFormat};
use memctl_core::harness::{
    compare, default_synth_pool, evaluate_oracle, evaluate_predictor, load_traces, run_trace,
    synth_trace, ConversationTrace, SimulationReport,
};
use memctl_core::predictor::{
    AppendOnlyPredictor, HeuristicPredictor, Predictor, PredictorKind, RemotePredictor,
};
use memctl_core::{Memory, Operation, UserInfo};
use memctl_service::{serve, AppCore, ServiceConfig};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use config::FileConfig;

#[derive(Parser)]
#[command(name = "memctl", version, about = "Sentence-memory management toolkit")]
struct Cli {
    /// TOML config file; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Root seed for everything random.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Debug-level logging on stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a balanced operation dataset from labeled sentence pairs.
    BuildDataset(BuildDatasetArgs),
    /// Replay conversation traces against one or more predictors.
    Simulate(SimulateArgs),
    /// Score a predictor against a labeled dataset.
    EvalOps(EvalOpsArgs),
    /// Run the session-memory HTTP service.
    Serve(ServeArgs),
    /// Feed sentences interactively and watch the memory evolve.
    Repl(ReplArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    #[value(name = "analysis_jsonl", alias = "analysis-jsonl")]
    AnalysisJsonl,
    #[value(name = "seq2seq_text", alias = "seq2seq-text")]
    Seq2seqText,
}

impl From<FormatArg> for ExportFormat {
    fn from(value: FormatArg) -> Self {
        match value {
            FormatArg::AnalysisJsonl => ExportFormat::AnalysisJsonl,
            FormatArg::Seq2seqText => ExportFormat::Seq2seqText,
        }
    }
}

#[derive(Args)]
struct BuildDatasetArgs {
    /// Line-delimited JSON pairs: {"sentence1", "sentence2", "label"}.
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    #[arg(long, value_name = "PATH")]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "analysis_jsonl")]
    format: FormatArg,
    #[arg(long)]
    target_size: Option<usize>,
    #[arg(long)]
    max_distractors: Option<usize>,
    /// Abort on the first malformed input line instead of skipping it.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["traces", "synth"]))]
struct SimulateArgs {
    /// Trace file, one JSON conversation per line.
    #[arg(long, value_name = "PATH")]
    traces: Option<PathBuf>,
    /// Generate synthetic traces of this many turns instead.
    #[arg(long, value_name = "N_TURNS")]
    synth: Option<usize>,
    /// How many synthetic traces to generate.
    #[arg(long, default_value_t = 1, value_name = "COUNT")]
    synth_count: usize,
    /// Probability a synthetic turn contradicts or repeats an earlier one.
    #[arg(long, default_value_t = 0.3, value_name = "RATE")]
    contradiction_rate: f64,
    /// Sentence pool for synthetic traces, one per line.
    #[arg(long, value_name = "PATH")]
    pool: Option<PathBuf>,
    /// Comma-separated predictors to run.
    #[arg(long, default_value = "heuristic,append_only", value_name = "LIST")]
    predictors: String,
    /// Write per-trace reports here (JSONL); the comparison table then goes
    /// to stdout instead of stderr.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalOpsArgs {
    /// Dataset in the analysis_jsonl format.
    #[arg(long, value_name = "PATH")]
    dataset: PathBuf,
    #[arg(long, default_value = "heuristic")]
    predictor: String,
}

#[derive(Args)]
struct ServeArgs {
    /// Listen address, host:port.
    #[arg(long, value_name = "ADDR")]
    bind: Option<String>,
    /// Directory for per-session snapshots.
    #[arg(long, value_name = "PATH")]
    persist_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReplArgs {
    #[arg(long, default_value = "heuristic")]
    predictor: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Debug } else { log::LevelFilter::Info })
        .format_timestamp(None)
        .parse_default_env()
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let seed = file.resolve_seed(cli.seed);
    match cli.command {
        Command::BuildDataset(args) => cmd_build_dataset(file, seed, args),
        Command::Simulate(args) => cmd_simulate(file, seed, args),
        Command::EvalOps(args) => cmd_eval_ops(file, seed, args),
        Command::Serve(args) => cmd_serve(file, seed, args),
        Command::Repl(args) => cmd_repl(file, seed, args),
    }
}

fn log_resolved(file: &FileConfig, seed: u64) {
    match serde_json::to_string(file) {
        Ok(json) => log::info!("resolved config: seed={seed} {json}"),
        Err(e) => log::warn!("resolved config not serializable: {e}"),
    }
}

fn open_input(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
    ))
}

fn cmd_build_dataset(mut file: FileConfig, seed: u64, args: BuildDatasetArgs) -> Result<()> {
    if let Some(target_size) = args.target_size {
        file.curation.target_size = target_size;
    }
    if let Some(max_distractors) = args.max_distractors {
        file.curation.max_distractors = max_distractors;
    }
    if args.strict {
        file.curation.strict_parse = true;
    }
    log_resolved(&file, seed);
    let config = file.curation_config(seed);

    let reader = open_input(&args.input)?;
    let (examples, stats) = build_dataset(reader, &config)
        .with_context(|| format!("building from {}", args.input.display()))?;

    if stats.target_truncated {
        log::warn!(
            "target_size {} is not divisible by 3; emitting {}",
            stats.target_size,
            stats.total_emitted
        );
    }
    if stats.total_emitted < stats.target_size - stats.target_size % 3 {
        log::warn!(
            "pools only support {} examples of the requested {} (append {}, pass {}, replace {})",
            stats.total_emitted,
            stats.target_size,
            stats.pool_append,
            stats.pool_pass,
            stats.pool_replace
        );
    }

    let out = File::create(&args.output)
        .with_context(|| format!("cannot create {}", args.output.display()))?;
    let mut out = BufWriter::new(out);
    memctl_core::curation::export(&examples, args.format.into(), &mut out)?;
    out.flush()?;

    let stats_path = sidecar_stats_path(&args.output);
    let mut stats_json = serde_json::to_string_pretty(&stats)?;
    stats_json.push('\n');
    std::fs::write(&stats_path, stats_json)
        .with_context(|| format!("cannot write {}", stats_path.display()))?;

    log::info!(
        "wrote {} examples to {} (stats: {})",
        stats.total_emitted,
        args.output.display(),
        stats_path.display()
    );
    Ok(())
}

fn sidecar_stats_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".stats.json");
    output.with_file_name(name)
}

fn parse_predictor_list(list: &str) -> Result<Vec<PredictorKind>> {
    let mut kinds = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let kind: PredictorKind = name.parse().map_err(|e: String| anyhow::anyhow!(e))?;
        if kind == PredictorKind::Oracle {
            bail!("the oracle predictor reads gold labels and cannot run on traces");
        }
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    if kinds.is_empty() {
        bail!("no predictors requested");
    }
    Ok(kinds)
}

fn build_predictor(kind: PredictorKind, file: &FileConfig) -> Result<Box<dyn Predictor>> {
    match kind {
        PredictorKind::Heuristic => {
            Ok(Box::new(HeuristicPredictor::new(file.heuristic_config())))
        }
        PredictorKind::AppendOnly => Ok(Box::new(AppendOnlyPredictor)),
        PredictorKind::Remote => {
            let remote = file
                .predictor
                .remote
                .clone()
                .context("remote predictor needs [predictor.remote] endpoint in the config")?;
            Ok(Box::new(RemotePredictor::new(remote)))
        }
        PredictorKind::Oracle => bail!("the oracle predictor only works in eval-ops"),
    }
}

fn load_pool(path: Option<&Path>) -> Result<Vec<String>> {
    let Some(path) = path else { return Ok(default_synth_pool()) };
    let pool: Vec<String> = open_input(path)?
        .lines()
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|l| l.trim().to_owned())
        .filter(|l| !l.is_empty())
        .collect();
    if pool.is_empty() {
        bail!("pool file {} has no sentences", path.display());
    }
    Ok(pool)
}

fn cmd_simulate(file: FileConfig, seed: u64, args: SimulateArgs) -> Result<()> {
    log_resolved(&file, seed);
    let kinds = parse_predictor_list(&args.predictors)?;

    let traces: Vec<ConversationTrace> = if let Some(path) = &args.traces {
        load_traces(open_input(path)?)
            .with_context(|| format!("loading traces from {}", path.display()))?
    } else {
        let n_turns = args.synth.unwrap();
        if !(0.0..=1.0).contains(&args.contradiction_rate) {
            bail!("--contradiction-rate must be within [0, 1]");
        }
        if args.synth_count == 0 {
            bail!("--synth-count must be at least 1");
        }
        let pool = load_pool(args.pool.as_deref())?;
        (0..args.synth_count)
            .map(|i| synth_trace(seed.wrapping_add(i as u64), n_turns, args.contradiction_rate, &pool))
            .collect()
    };
    if traces.is_empty() {
        bail!("no traces to simulate");
    }

    let core_config = file.core_config();
    let mut reports: Vec<SimulationReport> = Vec::new();
    for kind in &kinds {
        let predictor = build_predictor(*kind, &file)?;
        for trace in &traces {
            reports.push(run_trace(trace, predictor.as_ref(), &core_config)?);
        }
    }
    let table = compare(&reports)?;

    let stdout = std::io::stdout();
    if let Some(path) = &args.out {
        let mut out = BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        );
        for report in &reports {
            serde_json::to_writer(&mut out, report)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        let mut lock = stdout.lock();
        writeln!(lock, "{table}")?;
        log::info!("wrote {} reports to {}", reports.len(), path.display());
    } else {
        let mut lock = stdout.lock();
        for report in &reports {
            serde_json::to_writer(&mut lock, report)?;
            lock.write_all(b"\n")?;
        }
        eprintln!("{table}");
    }
    Ok(())
}

fn cmd_eval_ops(file: FileConfig, seed: u64, args: EvalOpsArgs) -> Result<()> {
    log_resolved(&file, seed);
    let examples = load_examples(open_input(&args.dataset)?)
        .with_context(|| format!("loading dataset from {}", args.dataset.display()))?;
    let kind: PredictorKind =
        args.predictor.parse().map_err(|e: String| anyhow::anyhow!(e))?;
    let metrics = match kind {
        PredictorKind::Oracle => evaluate_oracle(&examples)?,
        other => {
            let predictor = build_predictor(other, &file)?;
            evaluate_predictor(&examples, predictor.as_ref())?
        }
    };
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    eprintln!("{} on {}:", kind, args.dataset.display());
    eprintln!("{metrics}");
    Ok(())
}

fn cmd_serve(file: FileConfig, seed: u64, args: ServeArgs) -> Result<()> {
    let mut file = file;
    if let Some(bind) = args.bind {
        file.service.bind = bind;
    }
    if let Some(dir) = args.persist_dir {
        file.service.persist_dir = Some(dir);
    }
    log_resolved(&file, seed);

    let service_config = ServiceConfig {
        persist_dir: file.service.persist_dir.clone(),
        remote: file.predictor.remote.clone(),
        heuristic: file.heuristic_config(),
        core: file.core_config(),
    };
    let app = Arc::new(AppCore::new(service_config)?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&file.service.bind)
            .await
            .with_context(|| format!("cannot bind {}", file.service.bind))?;
        log::info!("listening on {}", listener.local_addr()?);
        serve(listener, app).await?;
        Ok::<(), anyhow::Error>(())
    })?;
    Ok(())
}

fn print_memory<W: Write>(out: &mut W, memory: &Memory) -> Result<()> {
    if memory.is_empty() {
        writeln!(out, "(empty)")?;
        return Ok(());
    }
    for (index, text) in memory.texts().enumerate() {
        writeln!(out, "  {}. {}", index + 1, text)?;
    }
    Ok(())
}

fn cmd_repl(file: FileConfig, seed: u64, args: ReplArgs) -> Result<()> {
    log_resolved(&file, seed);
    let kind: PredictorKind =
        args.predictor.parse().map_err(|e: String| anyhow::anyhow!(e))?;
    let predictor = build_predictor(kind, &file)?;
    let core_config = file.core_config();

    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut memory = Memory::new();
    let mut turn: u32 = 0;

    for line in stdin.lock().lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match line {
            ":quit" => break,
            ":mem" => print_memory(&mut out, &memory)?,
            ":reset" => {
                memory = Memory::new();
                turn = 0;
                writeln!(out, "memory cleared")?;
            }
            command if command.starts_with(':') => {
                eprintln!("unknown command {command}; known: :mem :reset :quit");
            }
            info_text => {
                let info = UserInfo::new(info_text, memctl_core::Speaker::User, Some(turn));
                let op = predictor.predict(&memory, &info)?;
                memory.apply_in_place(&op, &info, turn, &core_config)?;
                turn += 1;
                match op {
                    Operation::Append => writeln!(out, "APPEND")?,
                    Operation::Pass => writeln!(out, "PASS")?,
                    Operation::Replace { target_index } => {
                        writeln!(out, "REPLACE {}", target_index + 1)?
                    }
                }
                print_memory(&mut out, &memory)?;
            }
        }
        out.flush()?;
    }
    Ok(())
}
