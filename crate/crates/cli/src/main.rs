use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;

use config::EngineConfig;

#[derive(Debug, Parser)]
#[command(name = "humgeo", version, about = "Toponym geocoding against a GeoNames gazetteer")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalOpts {
    /// Engine configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for randomized tie-breaking; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; overrides the config.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// FeatureRank, SearchFeatureRank, BM or Chen; overrides the config.
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Only geocode toponyms inside the first 4000 characters of each document.
    #[arg(long = "truncate-4000", global = true)]
    truncate_4000: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load the GeoNames dumps and write the binary store cache.
    BuildIndex {
        /// Cache path; defaults to gazetteer.cache from the config.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Write the load report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Resolve toponym spans to gazetteer entries.
    Geocode {
        /// Span records (JSON lines), or a toponym list with --toponyms.
        #[arg(long)]
        input: PathBuf,
        /// Resolution records (JSON lines).
        #[arg(long)]
        output: PathBuf,
        /// Read the input as one toponym per line, optionally `doc_id<TAB>toponym`.
        #[arg(long)]
        toponyms: bool,
        /// Write the run summary as JSON.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Score geocoding runs against a gold table.
    Evaluate {
        /// Gold table with lead_id, toponym, match, geonames_id columns.
        #[arg(long)]
        gold: PathBuf,
        /// Resolution records, as PATH or LABEL=PATH. Repeatable.
        #[arg(long = "predictions", required = true)]
        predictions: Vec<String>,
        /// Write the reports as JSON.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Overrides max_key_mismatch from the config.
        #[arg(long)]
        max_key_mismatch: Option<f64>,
    },
    /// Per-country and per-HDI-band counts of resolved toponyms.
    Audit {
        /// Resolution records, as PATH or LABEL=PATH. Repeatable.
        #[arg(long = "run", required = true)]
        runs: Vec<String>,
        /// HDI band table; defaults to the bundled snapshot.
        #[arg(long)]
        hdi: Option<PathBuf>,
        /// Write the report as JSON.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score predicted toponym spans against gold spans.
    ScoreSpans {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Only score spans with this label.
        #[arg(long)]
        label: Option<LabelArg>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Union two span files, collapsing overlapping spans.
    MergeSpans {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Document texts (JSON lines with doc_id and text) to re-slice merged spans.
        #[arg(long)]
        documents: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LabelArg {
    Literal,
    Associative,
}

fn engine_config(global: &GlobalOpts) -> anyhow::Result<EngineConfig> {
    let mut cfg = match &global.config {
        Some(path) => EngineConfig::load(path)?,
        None => EngineConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = global.workers {
        cfg.workers = Some(workers);
    }
    if let Some(mode) = &global.mode {
        cfg.mode = mode.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = engine_config(&cli.global)?;
    match cli.command {
        Command::BuildIndex { output, report } => commands::build_index(&cfg, output, report),
        Command::Geocode {
            input,
            output,
            toponyms,
            summary,
        } => commands::geocode(&cfg, &input, &output, toponyms, cli.global.truncate_4000, summary),
        Command::Evaluate {
            gold,
            predictions,
            output,
            max_key_mismatch,
        } => commands::evaluate(&cfg, &gold, &predictions, output, max_key_mismatch),
        Command::Audit { runs, hdi, output } => commands::audit(&runs, hdi, output),
        Command::ScoreSpans {
            gold,
            pred,
            label,
            output,
        } => {
            let label = label.map(|l| match l {
                LabelArg::Literal => humgeo::records::SpanLabel::Literal,
                LabelArg::Associative => humgeo::records::SpanLabel::Associative,
            });
            commands::score_spans(&gold, &pred, label, output)
        }
        Command::MergeSpans { a, b, documents, output } => commands::merge_spans(&a, &b, documents, &output),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<commands::MissingInput>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
