//! Command-line entry points.
//!
//! Settings resolve as: command-line flags, then the `--config` file, then
//! built-in defaults. Exit codes: 0 success, 1 internal error, 2 invalid
//! configuration, 3 article not found, 4 backend failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};

use crate::centrality::FilterOrder;
use crate::evaluation::{self, compare_variants, EvalConfig, EvalReport, RankedResult};
use crate::pipeline::{self, document_json, open_source, PipelineError, RankBy, RunConfig};
use crate::ranking::LayerWeights;
use crate::source::{FixtureCorpus, Source};
use crate::store::Store;

#[derive(Debug, Parser)]
#[command(name = "galaxysearch", version, about = "Topic link graphs from Wikipedia: build, rank, map over time, evaluate")]
pub struct Cli {
    /// `live` for the Wikipedia API, or a fixture corpus directory.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    /// Persistent revision cache directory.
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    /// Maximum live API requests per second.
    #[arg(long, global = true, default_value_t = 5.0)]
    pub rate: f64,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Candidate seed titles for a search term.
    Search {
        term: String,
        #[arg(long, default_value_t = 10)]
        limit: usize,
    },
    /// Build, rank and filter a topic graph.
    Build {
        #[command(flatten)]
        run: RunFlags,
        /// Output directory for graph.json, degree.tsv and betweenness.tsv;
        /// the graph document goes to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a WikiMap series at several timestamps.
    Map {
        #[command(flatten)]
        run: RunFlags,
        /// Comma-separated RFC 3339 timestamps or YYYY-MM-DD dates.
        #[arg(long, required = true)]
        timestamps: String,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// nDCG@k table for result lists against graded judgments.
    Eval {
        /// Result files: one key per line, or graph documents.
        #[arg(required = true)]
        results: Vec<PathBuf>,
        /// Judgment file: query<TAB>item<TAB>rating lines.
        #[arg(long)]
        judgments: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        log_base: Option<f64>,
        /// Query to score against; required when the judgment file has several.
        #[arg(long)]
        query: Option<String>,
        /// Also write the machine-readable report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Move cached revisions to and from fixture corpora.
    Store {
        #[command(subcommand)]
        action: StoreAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum StoreAction {
    /// Write every cached revision as a fixture corpus.
    Export {
        #[arg(long)]
        out: PathBuf,
    },
    /// Load a fixture corpus into the cache.
    Import { corpus: PathBuf },
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    /// Seed article titles.
    #[arg(long, num_args = 1..)]
    pub seeds: Vec<String>,
    /// Layer weights as bid,imp,qua,act.
    #[arg(long)]
    pub weights: Option<LayerWeights>,
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub max_nodes: Option<usize>,
    #[arg(long)]
    pub window_days: Option<u32>,
    #[arg(long, value_parser = pipeline::parse_timestamp)]
    pub as_of: Option<DateTime<Utc>>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub include_web: Option<bool>,
    #[arg(long)]
    pub frontier_depth: Option<usize>,
    /// degree, betweenness or combined.
    #[arg(long)]
    pub rank_by: Option<RankBy>,
    #[arg(long, value_parser = parse_filter_order)]
    pub filter_order: Option<FilterOrder>,
}

fn parse_filter_order(s: &str) -> Result<FilterOrder, String> {
    match s {
        "distance-first" | "distance_first" => Ok(FilterOrder::DistanceFirst),
        "indegree-first" | "indegree_first" => Ok(FilterOrder::IndegreeFirst),
        other => Err(format!("unknown filter order {other:?}")),
    }
}

impl RunFlags {
    /// Overlays the flags that were given onto `cfg`.
    pub fn apply(&self, mut cfg: RunConfig) -> RunConfig {
        if !self.seeds.is_empty() {
            cfg.seeds = self.seeds.clone();
        }
        macro_rules! overlay {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { cfg.$field = v; } )* };
        }
        overlay!(weights, threshold, max_nodes, window_days, include_web, frontier_depth, rank_by, filter_order);
        if self.as_of.is_some() {
            cfg.as_of = self.as_of;
        }
        cfg
    }
}

fn io_err(path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::Internal(format!("{}: {e}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, PipelineError> {
    match path {
        Some(p) => RunConfig::from_toml(&fs::read_to_string(p).map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?),
        None => Ok(RunConfig::default()),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

/// Newline-separated titles.
pub fn cmd_search(source: &Source, term: &str, limit: usize) -> Result<String, PipelineError> {
    let doc = pipeline::run_search(source, term, limit)?;
    Ok(doc.titles.iter().map(|t| format!("{t}\n")).collect())
}

/// Runs the build and, with `out`, writes `graph.json`, `degree.tsv` and
/// `betweenness.tsv` there. Returns the graph document text.
pub fn cmd_build(source: &Source, cfg: &RunConfig, out: Option<&Path>) -> Result<String, PipelineError> {
    let result = pipeline::run_build(source, cfg)?;
    let json = document_json(&result.document);
    if let Some(dir) = out {
        write_file(&dir.join("graph.json"), &json)?;
        write_file(&dir.join("degree.tsv"), &result.degree.to_tsv())?;
        write_file(&dir.join("betweenness.tsv"), &result.betweenness.to_tsv())?;
    }
    Ok(json)
}

/// Returns the series document text, also written to `out` when given.
pub fn cmd_map(
    source: &Source,
    cfg: &RunConfig,
    timestamps: &[DateTime<Utc>],
    out: Option<&Path>,
) -> Result<String, PipelineError> {
    let json = document_json(&pipeline::run_series(source, cfg, timestamps)?);
    if let Some(path) = out {
        write_file(path, &json)?;
    }
    Ok(json)
}

/// Scores each result file (named by its file stem) and returns the report.
pub fn cmd_eval(
    results: &[PathBuf],
    judgments: &Path,
    cfg: &EvalConfig,
    query: Option<&str>,
) -> Result<EvalReport, PipelineError> {
    cfg.validate()?;
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())));
    let sets = evaluation::parse_judgments(&read(judgments)?).map_err(|e| PipelineError::Config(e.to_string()))?;
    let set = match query {
        Some(q) => sets.get(q.trim()).ok_or_else(|| PipelineError::Config(format!("no judgments for query {q:?}")))?,
        None if sets.len() == 1 => sets.values().next().expect("one entry"),
        None => return Err(PipelineError::Config(format!("{} queries judged; choose one with --query", sets.len()))),
    };
    let mut variants: BTreeMap<String, RankedResult> = BTreeMap::new();
    for path in results {
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let result = evaluation::parse_results(&read(path)?)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        if variants.insert(name.clone(), result).is_some() {
            return Err(PipelineError::Config(format!("two result files named {name:?}")));
        }
    }
    let rows = compare_variants(&variants, set, cfg).map_err(|e| PipelineError::Config(e.to_string()))?;
    Ok(EvalReport::new(&set.query, cfg, rows))
}

fn resolve_source(cli: &Cli, cfg: &RunConfig) -> Result<Source, PipelineError> {
    let backend = cli
        .backend
        .as_deref()
        .or(cfg.backend.as_deref())
        .ok_or_else(|| PipelineError::Config("no backend given; pass --backend live or a fixture directory".into()))?;
    open_source(backend, cli.store.as_deref(), cli.rate)
}

fn execute(cli: &Cli) -> Result<(), PipelineError> {
    let file_cfg = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Search { term, limit } => {
            let source = resolve_source(cli, &file_cfg)?;
            print!("{}", cmd_search(&source, term, *limit)?);
        }
        Command::Build { run, out } => {
            let cfg = run.apply(file_cfg);
            cfg.validate()?;
            let source = resolve_source(cli, &cfg)?;
            let json = cmd_build(&source, &cfg, out.as_deref())?;
            if out.is_none() {
                print!("{json}");
            }
        }
        Command::Map { run, timestamps, out } => {
            let cfg = run.apply(file_cfg);
            cfg.validate()?;
            let stamps = pipeline::parse_timestamps(timestamps)?;
            let source = resolve_source(cli, &cfg)?;
            let json = cmd_map(&source, &cfg, &stamps, out.as_deref())?;
            if out.is_none() {
                print!("{json}");
            }
        }
        Command::Eval { results, judgments, k, log_base, query, out } => {
            let mut eval = file_cfg.eval;
            eval.k = k.unwrap_or(eval.k);
            eval.log_base = log_base.unwrap_or(eval.log_base);
            let report = cmd_eval(results, judgments, &eval, query.as_deref())?;
            print!("{}", report.to_table());
            if let Some(path) = out {
                write_file(path, &document_json(&report))?;
            }
        }
        Command::Serve { addr } => {
            let source = Arc::new(resolve_source(cli, &file_cfg)?);
            let runtime = tokio::runtime::Runtime::new().map_err(|e| PipelineError::Internal(e.to_string()))?;
            runtime
                .block_on(crate::service::serve(*addr, source))
                .map_err(|e| PipelineError::Internal(format!("server: {e}")))?;
        }
        Command::Store { action } => {
            let dir = cli.store.as_deref().ok_or_else(|| PipelineError::Config("--store is required".into()))?;
            let store = Store::open(dir)?;
            match action {
                StoreAction::Export { out } => {
                    let corpus = store.export_fixture()?;
                    corpus.save(out).map_err(|e| PipelineError::Internal(e.to_string()))?;
                    eprintln!("exported {} articles to {}", corpus.len(), out.display());
                }
                StoreAction::Import { corpus } => {
                    let corpus = FixtureCorpus::load(corpus)?;
                    let n = store.import_fixture(&corpus, Utc::now())?;
                    eprintln!("imported {n} revisions");
                }
            }
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let _ = tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
