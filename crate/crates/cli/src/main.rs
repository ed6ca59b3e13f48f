use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use triage_core::metrics::{CvReport, REPORT_COLUMNS};
use triage_core::pipeline::{
    self, check_compatible, evaluate, read_records, train, Manifest, PipelineConfig, Resources,
    TrainedModels,
};
use triage_core::textprep::TextPipeline;
use triage_core::Error;

#[derive(Parser)]
#[command(
    name = "triage",
    version,
    about = "Validate and route free-text vehicle service reports"
)]
struct Cli {
    /// TOML pipeline configuration; defaults apply when absent.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Plain-text baseline instead of domain text processing.
    #[arg(long, global = true)]
    ablate_domain_nlp: bool,
    /// Skip claim validation and route every record.
    #[arg(long, global = true)]
    no_validation: bool,
    /// Output directory (synth, train, eval).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Console output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    JsonLines,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled corpus: records.jsonl and truth.tsv.
    Synth {
        /// Overrides synth.n_records.
        #[arg(long, value_name = "N")]
        records: Option<usize>,
    },
    /// Train the validator and router on a labeled corpus.
    Train {
        #[arg(long, value_name = "PATH")]
        corpus: PathBuf,
    },
    /// Cross-validate both stages and write reports and ROC curves.
    Eval {
        #[arg(long, value_name = "PATH")]
        corpus: PathBuf,
        /// Model directory written by `train`.
        #[arg(long, value_name = "DIR")]
        models: PathBuf,
    },
    /// Validate and route a record stream, one decision per line.
    Route {
        #[arg(long, value_name = "DIR")]
        models: PathBuf,
        /// Record file; standard input when absent.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
    /// Summarize the lexicon, or show how it processes the given text.
    InspectLexicon { text: Vec<String> },
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::Numeric(_) => 3,
        Error::Input(_)
        | Error::Parse { .. }
        | Error::Mismatch(_)
        | Error::Io(_)
        | Error::Json(_) => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if cli.ablate_domain_nlp {
        config.domain_nlp = false;
    }
    if cli.no_validation {
        config.validation = false;
    }
    Ok(config)
}

fn out_dir(cli: &Cli) -> Result<&Path, Failure> {
    cli.out
        .as_deref()
        .ok_or_else(|| Failure::Usage("--out DIR is required for this command".into()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    match &cli.command {
        Command::Synth { records } => {
            let mut config = load_config(&cli)?;
            if let Some(n) = records {
                config.synth.n_records = *n;
            }
            let dir = out_dir(&cli)?;
            let (records_text, truth_text, truth) = pipeline::synth(&config)?;
            pipeline::write_atomic(&dir.join("records.jsonl"), records_text.as_bytes())?;
            pipeline::write_atomic(&dir.join("truth.tsv"), truth_text.as_bytes())?;
            let n = truth.entries.len();
            match cli.format {
                Format::Text => writeln!(out, "wrote {n} records to {}", dir.display())?,
                Format::JsonLines => writeln!(
                    out,
                    "{}",
                    json!({"records": n, "out": dir, "seed": config.seed})
                )?,
            }
        }
        Command::Train { corpus } => {
            let config = load_config(&cli)?;
            let dir = out_dir(&cli)?;
            let resources = Resources::load(&config)?;
            let records = read_records(corpus)?;
            let models = train(&config, &resources, &records)?;
            let manifest = models.save(dir)?;
            match cli.format {
                Format::Text => {
                    writeln!(out, "config_fingerprint\t{}", manifest.config_fingerprint)?;
                    writeln!(out, "models_fingerprint\t{}", manifest.models_fingerprint)?;
                    write!(out, "{}", models.train_report)?;
                }
                Format::JsonLines => writeln!(
                    out,
                    "{}",
                    json!({
                        "config_fingerprint": manifest.config_fingerprint,
                        "models_fingerprint": manifest.models_fingerprint,
                        "seed": manifest.seed,
                        "records": manifest.records,
                        "routing_records": manifest.routing_records,
                    })
                )?,
            }
        }
        Command::Eval { corpus, models } => {
            let config = load_config(&cli)?;
            let dir = out_dir(&cli)?;
            let resources = Resources::load(&config)?;
            let records = read_records(corpus)?;
            let manifest = Manifest::load(models)?;
            check_compatible(&manifest, &config, &resources, &records)?;
            let report = evaluate(&config, &resources, &records)?;
            report.write(dir)?;
            for r in report
                .validation
                .iter()
                .chain(std::iter::once(&report.routing))
            {
                print_summary(&mut out, r, cli.format)?;
            }
        }
        Command::Route { models, input } => {
            let models = TrainedModels::load(models)?;
            let mut text = String::new();
            match input {
                Some(path) => {
                    text = std::fs::read_to_string(path)
                        .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?
                }
                None => {
                    io::stdin().read_to_string(&mut text)?;
                }
            }
            for d in models.route_lines(&text) {
                match cli.format {
                    Format::Text => writeln!(out, "{}", d.to_text())?,
                    Format::JsonLines => writeln!(out, "{}", d.to_json())?,
                }
            }
        }
        Command::InspectLexicon { text } => {
            let config = load_config(&cli)?;
            let resources = Resources::load(&config)?;
            inspect(
                &mut out,
                &resources.text_pipeline(&config),
                text,
                cli.format,
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

fn print_summary(out: &mut impl Write, r: &CvReport, format: Format) -> io::Result<()> {
    let summary = r.summary();
    match format {
        Format::Text => {
            writeln!(
                out,
                "{} ({} records, {} folds)",
                r.stage,
                r.confusion.total(),
                r.folds.len()
            )?;
            for (name, (mean, std)) in REPORT_COLUMNS.iter().zip(summary) {
                writeln!(out, "  {name:<12}{mean:.4} ± {std:.4}")?;
            }
        }
        Format::JsonLines => {
            let metrics: serde_json::Map<String, serde_json::Value> = REPORT_COLUMNS
                .iter()
                .zip(summary)
                .map(|(name, (mean, std))| (name.to_string(), json!({"mean": mean, "std": std})))
                .collect();
            writeln!(
                out,
                "{}",
                json!({"stage": r.stage, "records": r.confusion.total(), "folds": r.folds.len(), "metrics": metrics})
            )?;
        }
    }
    Ok(())
}

fn inspect(
    out: &mut impl Write,
    text: &TextPipeline,
    words: &[String],
    format: Format,
) -> io::Result<()> {
    if words.is_empty() {
        let lex = &text.lexicon;
        let counts = [
            ("abbreviations", lex.abbreviations().len()),
            ("multiword_expressions", lex.mwe_patterns().len()),
            ("pos_overrides", lex.pos_overrides().len()),
            ("stop_words", lex.stop_words().len()),
            ("stop_exceptions", lex.stop_exceptions().len()),
            ("vague_phrases", lex.vague_phrases().len()),
        ];
        match format {
            Format::Text => {
                for (k, v) in counts {
                    writeln!(out, "{k}\t{v}")?;
                }
            }
            Format::JsonLines => {
                let obj: serde_json::Map<String, serde_json::Value> = counts
                    .iter()
                    .map(|(k, v)| (k.to_string(), json!(v)))
                    .collect();
                writeln!(out, "{}", serde_json::Value::Object(obj))?;
            }
        }
        return Ok(());
    }
    let doc = text.analyze(&words.join(" "));
    match format {
        Format::Text => {
            for (i, seg) in doc.segments.iter().enumerate() {
                let toks: Vec<String> = seg
                    .iter()
                    .map(|t| format!("{}/{}", t.lemma, t.tag))
                    .collect();
                writeln!(out, "segment {}\t{}", i + 1, toks.join(" "))?;
            }
            if doc.vague {
                writeln!(out, "vague")?;
            }
        }
        Format::JsonLines => {
            let segments: Vec<Vec<serde_json::Value>> = doc
                .segments
                .iter()
                .map(|s| {
                    s.iter()
                        .map(|t| json!({"text": t.text, "lemma": t.lemma, "tag": t.tag.code()}))
                        .collect()
                })
                .collect();
            writeln!(out, "{}", json!({"segments": segments, "vague": doc.vague}))?;
        }
    }
    Ok(())
}
