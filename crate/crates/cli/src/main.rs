use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use npiscan::bench::{run_bench, BenchOptions, Preprocessing, Scanner};
use npiscan::checkpoint::{peek_engine, Checkpoint};
use npiscan::cnn::{Cnn, CnnConfig};
use npiscan::columnar::{aggregate_document, load_columns, predict_columns};
use npiscan::datagen::{
    build_columnar_training_set, generate_structured_corpus, generate_unstructured_corpus, GeneratorConfig,
    StructuredConfig, Table, WordDistribution,
};
use npiscan::document::{load_jsonl, write_jsonl};
use npiscan::eval::{render_report, score_documents, ReportFormat};
use npiscan::manifest::{DatasetKind, DatasetManifest};
use npiscan::ngram::{NgramCrf, NgramCrfConfig};
use npiscan::regex_baseline::PatternRegistry;
use npiscan::rng::stream_rng;
use npiscan::tagger::{Engine, TrainReport};
use npiscan::LabeledDocument;

#[derive(Parser)]
#[command(name = "npiscan", version, about = "Character-level sensitive data tagging")]
struct Cli {
    /// Root seed for every random choice.
    #[arg(long, global = true, env = "NPISCAN_SEED")]
    seed: Option<u64>,

    /// Worker threads for document processing.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset and its manifest.
    Generate(GenerateArgs),
    /// Train a model and write a checkpoint plus a training report.
    Train(TrainArgs),
    /// Tag documents and write labeled JSON lines.
    Scan(ScanArgs),
    /// Score predicted documents against gold documents.
    Eval(EvalArgs),
    /// Predict one entity per column of a CSV or JSON-lines table.
    ColumnScan(ColumnScanArgs),
    /// Measure tagging throughput in GB per hour.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Unstructured,
    MultiColumn,
    SingleColumn,
    ColumnarAggregate,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "unstructured")]
    kind: Kind,
    /// Generator config JSON; missing fields keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Labeled documents, JSON lines. The manifest goes to `<output>.manifest.json`.
    #[arg(long)]
    output: PathBuf,
    /// Also write every structured table here as CSV and JSON lines.
    #[arg(long)]
    tables_dir: Option<PathBuf>,
    /// Word frequency list replacing the bundled one.
    #[arg(long)]
    words: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    aggregate_size: usize,
    /// Entity values drawn for columnar aggregates.
    #[arg(long, default_value_t = 75_000)]
    num_values: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainEngine {
    NgramCrf,
    Cnn,
    CnnCrf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    engine: TrainEngine,
    /// Training documents, JSON lines.
    #[arg(long)]
    input: PathBuf,
    /// Held-out documents scored after every CNN epoch.
    #[arg(long)]
    heldout: Option<PathBuf>,
    /// Model config JSON; missing fields keep the engine defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: PathBuf,
    /// Training report JSON, default `<model>.report.json`.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    max_length: Option<usize>,
    /// Pretrained character embeddings for the CNN engines.
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_parser = parse_engine)]
    engine: Engine,
    /// Checkpoint, required by every engine except regex.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Pattern file replacing the bundled regex patterns.
    #[arg(long)]
    patterns: Option<PathBuf>,
    /// Chunk length override for the trained engines.
    #[arg(long)]
    max_length: Option<usize>,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Documents as JSON lines, or plain text with one document per line.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Gold documents, JSON lines.
    #[arg(long)]
    gold: PathBuf,
    /// Predicted documents, JSON lines, in the same order as the gold file.
    #[arg(long)]
    input: PathBuf,
    /// Report destination, stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Score non-sensitive entities too.
    #[arg(long)]
    include_nonsensitive: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct ColumnScanArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Table as CSV with a header row, or JSON-lines records.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 5)]
    aggregate_size: usize,
    #[arg(long, default_value_t = npiscan::columnar::DEFAULT_RESAMPLES)]
    resamples: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum PreprocessingArg {
    Flatten,
    PerSample,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    input: PathBuf,
    /// Results are appended here as JSON lines.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "flatten")]
    preprocessing: PreprocessingArg,
    #[arg(long, default_value_t = 256)]
    batch_docs: usize,
    #[arg(long, default_value_t = 1)]
    warmup_batches: usize,
    #[arg(long, default_value_t = 1)]
    passes: usize,
}

/// Error in the invocation itself rather than in the work.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn parse_engine(s: &str) -> std::result::Result<Engine, String> {
    s.parse().map_err(|e: npiscan::Error| e.to_string())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 2;
        }
        if let Some(npiscan::Error::Config(_)) = cause.downcast_ref::<npiscan::Error>() {
            return 2;
        }
    }
    1
}

fn require_file(path: &Path) -> Result<()> {
    if !path.exists() || path.is_dir() {
        return Err(usage(format!("input file {} does not exist", path.display())));
    }
    Ok(())
}

fn require_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => {
            Err(usage(format!("output directory {} does not exist", p.display())))
        }
        _ => Ok(()),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// `default` overlaid with the keys of the JSON object in `path`.
fn load_config<T: Serialize + DeserializeOwned>(path: Option<&Path>, default: T) -> Result<T> {
    let Some(path) = path else { return Ok(default) };
    require_file(path)?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let overlay: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    let serde_json::Value::Object(overlay) = overlay else {
        return Err(usage(format!("config {} must be a JSON object", path.display())));
    };
    let mut value = serde_json::to_value(default)?;
    let obj = value.as_object_mut().expect("configs serialize as objects");
    obj.extend(overlay);
    serde_json::from_value(value).map_err(|e| usage(format!("config {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn save_documents(path: &Path, docs: &[LabeledDocument]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    write_jsonl(&mut w, docs)?;
    w.flush()?;
    Ok(())
}

fn load_documents(path: &Path) -> Result<Vec<LabeledDocument>> {
    require_file(path)?;
    let docs = if path.extension().is_some_and(|e| e == "txt") {
        fs::read_to_string(path)?
            .lines()
            .enumerate()
            .map(|(i, l)| LabeledDocument::unlabeled(format!("line{}", i + 1), l))
            .collect()
    } else {
        load_jsonl(path).with_context(|| format!("reading {}", path.display()))?
    };
    Ok(docs)
}

fn word_distribution(path: Option<&Path>) -> Result<WordDistribution> {
    match path {
        Some(p) => {
            require_file(p)?;
            Ok(WordDistribution::load(p)?)
        }
        None => Ok(WordDistribution::bundled()),
    }
}

fn write_tables(dir: &Path, tables: &[(String, &Table)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut gold = serde_json::Map::new();
    for (name, t) in tables {
        t.write_csv(BufWriter::new(File::create(dir.join(format!("{name}.csv")))?))?;
        t.write_jsonl(BufWriter::new(File::create(dir.join(format!("{name}.jsonl")))?))?;
        gold.insert(name.clone(), serde_json::to_value(&t.columns)?);
    }
    write_json(&dir.join("gold.json"), &gold)
}

fn cmd_generate(args: &GenerateArgs, seed: Option<u64>) -> Result<()> {
    require_parent(&args.output)?;
    let dist = word_distribution(args.words.as_deref())?;
    let (kind, docs, seed, digest_config) = match args.kind {
        Kind::Unstructured => {
            let mut config = load_config(args.config.as_deref(), GeneratorConfig::default())?;
            if let Some(s) = seed {
                config.seed = s;
            }
            config.validate()?;
            let docs = generate_unstructured_corpus(&config, &dist)?;
            (DatasetKind::Unstructured, docs, config.seed, serde_json::to_value(&config)?)
        }
        Kind::MultiColumn | Kind::SingleColumn => {
            let mut config = load_config(args.config.as_deref(), StructuredConfig::train())?;
            if let Some(s) = seed {
                config.seed = s;
            }
            let kind = if matches!(args.kind, Kind::MultiColumn) {
                config.single_column_tables = 0;
                DatasetKind::MultiColumn
            } else {
                config.multi_column_tables = 0;
                DatasetKind::SingleColumn
            };
            let corpus = generate_structured_corpus(&config, &dist)?;
            if let Some(dir) = &args.tables_dir {
                let named: Vec<(String, &Table)> = corpus
                    .multi_column
                    .iter()
                    .enumerate()
                    .map(|(i, t)| (format!("multi{i}"), t))
                    .chain(corpus.single_column.iter().enumerate().map(|(i, t)| (format!("single{i}"), t)))
                    .collect();
                write_tables(dir, &named)?;
            }
            (kind, corpus.documents, config.seed, serde_json::to_value(&config)?)
        }
        Kind::ColumnarAggregate => {
            if args.config.is_some() {
                return Err(usage("--config is not used by columnar-aggregate; use --aggregate-size and --num-values"));
            }
            let seed = seed.unwrap_or(0);
            let mut rng = stream_rng(seed, "columnar-aggregate", 0);
            let aggs = build_columnar_training_set(args.num_values, args.aggregate_size, &dist, &mut rng)?;
            let docs = aggs
                .iter()
                .enumerate()
                .map(|(i, a)| aggregate_document(a, format!("a{i}")))
                .collect::<npiscan::Result<Vec<_>>>()?;
            let config = serde_json::json!({
                "aggregate_size": args.aggregate_size,
                "num_values": args.num_values,
                "seed": seed,
            });
            (DatasetKind::ColumnarAggregate, docs, seed, config)
        }
    };
    save_documents(&args.output, &docs)?;
    let manifest = DatasetManifest::for_documents(kind, &docs, seed, &digest_config)?;
    manifest.save(&with_suffix(&args.output, ".manifest.json"))?;
    log::info!("wrote {} documents to {}", docs.len(), args.output.display());
    Ok(())
}

fn cmd_train(args: &TrainArgs, seed: Option<u64>, workers: Option<usize>) -> Result<()> {
    require_file(&args.input)?;
    if let Some(h) = &args.heldout {
        require_file(h)?;
    }
    require_parent(&args.model)?;
    let seed = seed.unwrap_or(0);
    let report_path = args.report.clone().unwrap_or_else(|| with_suffix(&args.model, ".report.json"));
    let docs = load_documents(&args.input)?;
    let heldout = args.heldout.as_deref().map(load_documents).transpose()?;
    let (ck, report): (Checkpoint, TrainReport) = match args.engine {
        TrainEngine::NgramCrf => {
            if args.embeddings.is_some() {
                return Err(usage("--embeddings applies to the CNN engines only"));
            }
            let mut config = load_config(args.config.as_deref(), NgramCrfConfig::default())?;
            config.max_length = args.max_length.unwrap_or(config.max_length);
            config.workers = workers.unwrap_or(config.workers);
            config.validate()?;
            let (m, report) = NgramCrf::train(&docs, config, seed)?;
            (m.to_checkpoint()?, report)
        }
        TrainEngine::Cnn | TrainEngine::CnnCrf => {
            let default = match args.engine {
                TrainEngine::CnnCrf => CnnConfig::crf(),
                _ => CnnConfig::default(),
            };
            let mut config = load_config(args.config.as_deref(), default)?;
            config.max_length = args.max_length.unwrap_or(config.max_length);
            config.workers = workers.unwrap_or(config.workers);
            config.validate()?;
            let mut m = Cnn::<f32>::init(config, seed)?;
            if let Some(p) = &args.embeddings {
                require_file(p)?;
                let n = m.load_embedding_file(p)?;
                log::info!("loaded {n} pretrained embedding rows");
            }
            let report = m.fit(&docs, heldout.as_deref(), seed)?;
            (m.to_checkpoint()?, report)
        }
    };
    ck.save(&args.model)?;
    write_json(&report_path, &report)?;
    log::info!("saved {} model to {}", report.engine, args.model.display());
    Ok(())
}

fn load_scanner(args: &ModelArgs, workers: Option<usize>) -> Result<Box<dyn Scanner>> {
    if args.engine == Engine::Regex {
        if args.model.is_some() {
            return Err(usage("the regex engine takes --patterns, not --model"));
        }
        let reg = match &args.patterns {
            Some(p) => {
                require_file(p)?;
                PatternRegistry::compile_file(p)?
            }
            None => PatternRegistry::bundled()?,
        };
        return Ok(Box::new(reg));
    }
    let Some(model) = &args.model else {
        return Err(usage(format!("engine {} requires --model", args.engine)));
    };
    require_file(model)?;
    let stored = peek_engine(model)?;
    if stored != args.engine.name() {
        return Err(usage(format!(
            "{} holds a {stored} model, not {}",
            model.display(),
            args.engine
        )));
    }
    let ck = Checkpoint::load(model)?;
    Ok(match args.engine {
        Engine::NgramCrf => {
            let mut m = NgramCrf::from_checkpoint(&ck)?;
            m.config.max_length = args.max_length.unwrap_or(m.config.max_length);
            m.config.workers = workers.unwrap_or(1);
            m.config.validate()?;
            Box::new(m)
        }
        _ => {
            let mut m = Cnn::<f32>::from_checkpoint(&ck)?;
            m.config.max_length = args.max_length.unwrap_or(m.config.max_length);
            m.config.workers = workers.unwrap_or(1);
            m.config.validate()?;
            Box::new(m)
        }
    })
}

fn cmd_scan(args: &ScanArgs, workers: Option<usize>) -> Result<()> {
    require_file(&args.input)?;
    require_parent(&args.output)?;
    let scanner = load_scanner(&args.model, workers)?;
    let docs = load_documents(&args.input)?;
    let labels = scanner.tag(&docs)?;
    let out = docs
        .iter()
        .zip(labels)
        .map(|(d, l)| LabeledDocument::from_labels(d.source_id(), d.text(), l))
        .collect::<npiscan::Result<Vec<_>>>()?;
    save_documents(&args.output, &out)
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let gold = load_documents(&args.gold)?;
    let pred = load_documents(&args.input)?;
    if let Some(p) = &args.output {
        require_parent(p)?;
    }
    if gold.len() != pred.len() {
        bail!("{} gold documents but {} predicted", gold.len(), pred.len());
    }
    if let Some((g, p)) = gold.iter().zip(&pred).find(|(g, p)| g.source_id() != p.source_id()) {
        bail!("document order differs: gold {:?} against predicted {:?}", g.source_id(), p.source_id());
    }
    let labels: Vec<&[npiscan::EntityLabel]> = pred.iter().map(|d| d.labels()).collect();
    let report = score_documents(&gold, &labels, args.include_nonsensitive)?;
    let format = match args.format {
        Format::Text => ReportFormat::Text,
        Format::Json => ReportFormat::Json,
    };
    let text = render_report(&report, format)?;
    match &args.output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_column_scan(args: &ColumnScanArgs, seed: Option<u64>, workers: Option<usize>) -> Result<()> {
    require_file(&args.input)?;
    require_parent(&args.output)?;
    if !(1..=10).contains(&args.aggregate_size) {
        return Err(usage(format!("--aggregate-size must be in [1, 10], got {}", args.aggregate_size)));
    }
    if args.resamples == 0 {
        return Err(usage("--resamples must be positive"));
    }
    let scanner = load_scanner(&args.model, workers)?;
    let columns = load_columns(&args.input)?;
    let pred = predict_columns(&columns, scanner.as_ref(), args.aggregate_size, args.resamples, seed.unwrap_or(0))?;
    write_json(&args.output, &pred)
}

fn cmd_bench(args: &BenchArgs, workers: Option<usize>) -> Result<()> {
    require_file(&args.input)?;
    require_parent(&args.output)?;
    let scanner = load_scanner(&args.model, workers)?;
    let docs = load_documents(&args.input)?;
    let options = BenchOptions {
        preprocessing: match args.preprocessing {
            PreprocessingArg::Flatten => Preprocessing::Flatten,
            PreprocessingArg::PerSample => Preprocessing::PerSample,
        },
        batch_docs: args.batch_docs,
        warmup_batches: args.warmup_batches,
        passes: args.passes,
        workers: workers.unwrap_or(1),
    };
    let result = run_bench(scanner.as_ref(), &docs, &options)?;
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&args.output)
        .with_context(|| format!("opening {}", args.output.display()))?;
    npiscan::bench::write_jsonl(BufWriter::new(file), std::slice::from_ref(&result))?;
    println!(
        "{} {:.3} GB/hr over {} bytes ({:.2} codes per byte)",
        result.engine, result.gb_per_hour, result.bytes, result.padded_char_overhead
    );
    if let Some(e) = result.error {
        bail!("benchmark stopped early: {e}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if cli.workers == Some(0) {
        return Err(usage("--workers must be positive"));
    }
    match &cli.command {
        Command::Generate(a) => cmd_generate(a, cli.seed),
        Command::Train(a) => cmd_train(a, cli.seed, cli.workers),
        Command::Scan(a) => cmd_scan(a, cli.workers),
        Command::Eval(a) => cmd_eval(a),
        Command::ColumnScan(a) => cmd_column_scan(a, cli.seed, cli.workers),
        Command::Bench(a) => cmd_bench(a, cli.workers),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
