use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use vid2kg_cli::query::QueryPattern;
use vid2kg_cli::{classify, commands, pipeline, DataError};
use vid2kg_core::dataset::BuildConfig;
use vid2kg_core::factmodel::{Ablation, ModelConfig};
use vid2kg_core::metrics::{report_table, Aggregation};
use vid2kg_core::semparse::ExtractionMode;

#[derive(Parser)]
#[command(name = "vid2kg", version, about = "Build, learn and query knowledge graphs of video captions")]
struct Cli {
    /// Worker threads for parallel stages (outputs do not depend on it).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract atoms from CoNLL-U captions into per-caption KG JSONL.
    Parse {
        #[arg(long)]
        conllu: PathBuf,
        /// TSV of `sentence_index<TAB>video_id` (0-based indices).
        #[arg(long)]
        video_map: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "repaired")]
        mode: ExtractionMode,
    },
    /// Link parsed atoms to ontology synsets.
    Link {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        ontology: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge, filter and add negatives to produce a training dataset.
    Build {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        /// TOML file with build settings; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        min_count: Option<usize>,
        #[arg(long)]
        negatives_per_fact: Option<usize>,
        /// Comma-separated verbs to drop from the vocabulary.
        #[arg(long, value_delimiter = ',')]
        exclude_verbs: Option<Vec<String>>,
    },
    /// Print corpus statistics of a dataset or KG file.
    Stats {
        #[arg(long)]
        input: PathBuf,
        /// Also write the statistics as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the fact prediction model.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        features: Option<PathBuf>,
        /// TOML file with model settings; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Word vectors used to initialise individual vectors.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        ablation: Option<Ablation>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        /// Write the per-epoch loss trace as JSON.
        #[arg(long)]
        loss_trace: Option<PathBuf>,
    },
    /// Predict individuals and facts for each video.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        features: Option<PathBuf>,
        /// Predict for the videos of this dataset instead of every feature row.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Add facts inferred from the ontology to each graph.
    Infer {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        ontology: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Keep only inferred facts over the graph's own individuals.
        #[arg(long)]
        restrict: bool,
    },
    /// Score predictions against a dataset.
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "micro")]
        aggregation: Aggregation,
        /// Count predictions outside T and F as false positives.
        #[arg(long)]
        strict: bool,
    },
    /// Find facts matching a pattern such as `change(male,?x)`.
    Query {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        pattern: String,
        /// Match against inferred facts too.
        #[arg(long, requires = "ontology")]
        with_closure: bool,
        #[arg(long)]
        ontology: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every stage from a TOML or JSON run configuration.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Reads a TOML settings file and fills in the seed from the command line.
fn settings<T: DeserializeOwned>(path: Option<&Path>, seed: u64) -> Result<T> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            toml::from_str::<toml::Table>(&text).with_context(|| format!("in {}", p.display()))?
        }
        None => toml::Table::new(),
    };
    table.insert("rng_seed".into(), toml::Value::Integer(seed as i64));
    table
        .try_into()
        .map_err(|e: toml::de::Error| DataError(format!("invalid settings: {e}")).into())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    match cli.command {
        Command::Parse { conllu, video_map, out, mode } => {
            let entries = commands::parse(&conllu, &video_map, mode, &out)?;
            eprintln!("{} captions written to {}", entries.len(), out.display());
        }
        Command::Link { input, ontology, embeddings, out } => {
            commands::link(&input, &ontology, &embeddings, &out)?;
        }
        Command::Build { input, out, seed, config, min_count, negatives_per_fact, exclude_verbs } => {
            let mut cfg: BuildConfig = settings(config.as_deref(), seed)?;
            if let Some(n) = min_count {
                cfg.min_count = n;
            }
            if let Some(n) = negatives_per_fact {
                cfg.negatives_per_fact = n;
            }
            if let Some(verbs) = exclude_verbs {
                cfg.excluded_verbs = verbs.into_iter().filter(|v| !v.is_empty()).collect();
            }
            let stats = commands::build(&input, &cfg, &out)?;
            eprint!("{stats}");
        }
        Command::Stats { input, out } => {
            let stats = commands::stats(&input)?;
            print!("{stats}");
            if let Some(p) = out {
                emit(Some(&p), &(serde_json::to_string_pretty(&stats)? + "\n"))?;
            }
        }
        Command::Train {
            dataset,
            out,
            seed,
            features,
            config,
            embeddings,
            ablation,
            epochs,
            learning_rate,
            loss_trace,
        } => {
            let mut cfg: ModelConfig = settings(config.as_deref(), seed)?;
            if let Some(n) = epochs {
                cfg.epochs = n;
            }
            if let Some(lr) = learning_rate {
                cfg.learning_rate = lr;
            }
            let outcome = commands::train(&dataset, features.as_deref(), &cfg, embeddings.as_deref(), ablation, &out)?;
            if let Some(p) = loss_trace {
                emit(Some(&p), &(serde_json::to_string(&outcome.loss_trace)? + "\n"))?;
            }
            if let Some(last) = outcome.loss_trace.last() {
                eprintln!("final loss {last:.6}");
            }
        }
        Command::Predict { model, out, features, dataset } => {
            commands::predict_file(&model, features.as_deref(), dataset.as_deref(), &out)?;
        }
        Command::Infer { input, ontology, out, restrict } => {
            commands::infer(&input, &ontology, restrict, &out)?;
        }
        Command::Eval { predictions, dataset, out, aggregation, strict } => {
            let report = commands::eval(&predictions, &dataset, aggregation, strict, &out)?;
            print!("{}", report_table(&report.overall));
        }
        Command::Query { store, pattern, with_closure, ontology, out } => {
            let pattern: QueryPattern = pattern.parse()?;
            let ontology = if with_closure { ontology } else { None };
            let matches = commands::query(&store, &pattern, ontology.as_deref())?;
            let text: String = matches.iter().map(|m| format!("{m}\n")).collect();
            emit(out.as_deref(), &text)?;
        }
        Command::Pipeline { config } => {
            let (manifest, dir) = pipeline::run(&config)?;
            for s in &manifest.stages {
                println!("{:<8} {}  {}", s.stage, s.output.sha256, dir.join(&s.output.file).display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err) as u8)
        }
    }
}
