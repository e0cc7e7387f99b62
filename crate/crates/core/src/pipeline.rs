//! The end-to-end operations shared by the CLI and the HTTP service, their
//! configuration and the documents they emit.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::centrality::{
    betweenness_centrality, degree_centrality, CentralityError, CentralityReport, Direction, FilterConfig,
    FilterOrder,
};
use crate::evaluation::{EvalConfig, EvalError};
use crate::graph::{
    build_graph, ExportEdge, ExportNode, GraphError, GraphExport, Layer, NodeId, NodeKind, Scope, SemanticGraph, GRAPH_SCHEMA,
};
use crate::ranking::{combine_layers, rank_nodes, score_layers, LayerWeights, RankingError};
use crate::source::{
    FixtureBackend, FixtureError, MediaWikiBackend, MediaWikiConfig, Source, SourceError, TimeWindow,
};
use crate::store::{Store, StoreError};
use crate::timeline::{build_series, collect_candidates, export_series, SeriesExport, SnapshotConfig, TimelineError};
use crate::wikitext;

pub const SEEDS_SCHEMA: &str = "galaxysearch.seeds/v1";

/// Failure classes, each with its own exit code and HTTP status.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("backend error: {0}")]
    Backend(String),
    #[error("{0}")]
    Internal(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Internal(_) => 1,
            PipelineError::Config(_) => 2,
            PipelineError::NotFound(_) => 3,
            PipelineError::Backend(_) => 4,
        }
    }

    pub fn http_status(&self) -> u16 {
        match self {
            PipelineError::Config(_) => 400,
            PipelineError::NotFound(_) => 404,
            PipelineError::Backend(_) => 502,
            PipelineError::Internal(_) => 500,
        }
    }
}

impl From<SourceError> for PipelineError {
    fn from(e: SourceError) -> Self {
        match e {
            SourceError::ArticleNotFound(_) | SourceError::NoRevisionBefore { .. } => {
                PipelineError::NotFound(e.to_string())
            }
            SourceError::BackendUnavailable(_) => PipelineError::Backend(e.to_string()),
            SourceError::EmptyQuery | SourceError::InvalidArgument(_) | SourceError::InvalidWindow { .. } => {
                PipelineError::Config(e.to_string())
            }
            SourceError::Store(_) => PipelineError::Internal(e.to_string()),
        }
    }
}

impl From<TimelineError> for PipelineError {
    fn from(e: TimelineError) -> Self {
        match e {
            TimelineError::Source(s) => s.into(),
            TimelineError::Filter(f) => f.into(),
            TimelineError::AtTimestamp { at, source } => match PipelineError::from(*source) {
                PipelineError::Config(m) => PipelineError::Config(format!("snapshot at {at}: {m}")),
                PipelineError::NotFound(m) => PipelineError::NotFound(format!("snapshot at {at}: {m}")),
                PipelineError::Backend(m) => PipelineError::Backend(format!("snapshot at {at}: {m}")),
                PipelineError::Internal(m) => PipelineError::Internal(format!("snapshot at {at}: {m}")),
            },
            TimelineError::SeedNotFound(_) => PipelineError::NotFound(e.to_string()),
            TimelineError::NoSeeds | TimelineError::NoTimestamps | TimelineError::NotIncreasing { .. } => {
                PipelineError::Config(e.to_string())
            }
            TimelineError::SeedMismatch | TimelineError::Graph(_) => PipelineError::Internal(e.to_string()),
        }
    }
}

impl From<CentralityError> for PipelineError {
    fn from(e: CentralityError) -> Self {
        match e {
            CentralityError::SeedNotInGraph(_) => PipelineError::NotFound(e.to_string()),
            _ => PipelineError::Config(e.to_string()),
        }
    }
}

impl From<RankingError> for PipelineError {
    fn from(e: RankingError) -> Self {
        match e {
            RankingError::InvalidWeights(_) => PipelineError::Config(e.to_string()),
            RankingError::Source(s) => s.into(),
        }
    }
}

impl From<GraphError> for PipelineError {
    fn from(e: GraphError) -> Self {
        PipelineError::Internal(e.to_string())
    }
}

impl From<EvalError> for PipelineError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::InvalidConfig(_) => PipelineError::Config(e.to_string()),
            _ => PipelineError::Internal(e.to_string()),
        }
    }
}

impl From<StoreError> for PipelineError {
    fn from(e: StoreError) -> Self {
        PipelineError::Internal(e.to_string())
    }
}

impl From<FixtureError> for PipelineError {
    fn from(e: FixtureError) -> Self {
        PipelineError::Config(e.to_string())
    }
}

/// Which metric orders the `ranking` list of a graph document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankBy {
    #[default]
    Degree,
    Betweenness,
    Combined,
}

impl std::str::FromStr for RankBy {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "degree" => Ok(RankBy::Degree),
            "betweenness" => Ok(RankBy::Betweenness),
            "combined" => Ok(RankBy::Combined),
            other => Err(PipelineError::Config(format!("unknown rank metric {other:?}"))),
        }
    }
}

/// Everything one build or map run needs. Missing fields take defaults;
/// unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seeds: Vec<String>,
    /// Bidirectional, importance, quality, actuality.
    pub weights: LayerWeights,
    /// Minimum combined score relative to the weight total, in `[0, 1]`.
    pub threshold: f64,
    pub max_nodes: usize,
    /// Length of the actuality window, ending at `as_of`.
    pub window_days: u32,
    pub include_web: bool,
    pub frontier_depth: usize,
    /// Build as of this time; latest revisions when absent.
    pub as_of: Option<DateTime<Utc>>,
    pub rank_by: RankBy,
    pub filter_order: FilterOrder,
    pub eval: EvalConfig,
    /// `live` or a fixture directory. Only the CLI reads this.
    pub backend: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seeds: Vec::new(),
            weights: LayerWeights::equal(),
            threshold: 0.1,
            max_nodes: 50,
            window_days: 14,
            include_web: true,
            frontier_depth: 1,
            as_of: None,
            rank_by: RankBy::Degree,
            filter_order: FilterOrder::DistanceFirst,
            eval: EvalConfig::default(),
            backend: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Checked before any backend request is made.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        for s in &self.seeds {
            if wikitext::normalize_title(s).is_err() {
                return bad(format!("invalid seed title {s:?}"));
            }
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold must lie in [0, 1], got {}", self.threshold));
        }
        if self.max_nodes == 0 {
            return bad("max_nodes must be at least 1".into());
        }
        if self.window_days == 0 {
            return bad("window_days must be at least 1".into());
        }
        if self.frontier_depth > 2 {
            return bad("frontier_depth must be 0, 1 or 2".into());
        }
        let distinct: BTreeSet<String> = self.seeds.iter().filter_map(|s| wikitext::normalize_title(s).ok()).collect();
        if distinct.len() > self.max_nodes {
            return bad(format!("{} seeds exceed max_nodes = {}", distinct.len(), self.max_nodes));
        }
        self.eval.validate()?;
        Ok(())
    }

    pub fn snapshot_config(&self) -> SnapshotConfig {
        SnapshotConfig {
            filter: FilterConfig { max_nodes: self.max_nodes, order: self.filter_order },
            frontier_depth: self.frontier_depth,
            include_web: self.include_web,
        }
    }
}

/// Opens a backend by name (`live` or a fixture directory) with an optional
/// persistent store.
pub fn open_source(backend: &str, store: Option<&Path>, rate: f64) -> Result<Source, PipelineError> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(PipelineError::Config(format!("request rate must be positive, got {rate}")));
    }
    let store = Arc::new(match store {
        Some(dir) => Store::open(dir)?,
        None => Store::in_memory(),
    });
    if backend == "live" {
        let config = MediaWikiConfig { requests_per_second: rate, ..MediaWikiConfig::default() };
        Ok(Source::with_store(MediaWikiBackend::live(&config), store))
    } else {
        Ok(Source::with_store(FixtureBackend::load(backend)?, store))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedsDocument {
    pub schema: String,
    pub query: String,
    pub titles: Vec<String>,
}

pub fn run_search(source: &Source, term: &str, limit: usize) -> Result<SeedsDocument, PipelineError> {
    let titles = source.search_seeds(term, limit)?;
    Ok(SeedsDocument { schema: SEEDS_SCHEMA.into(), query: term.trim().into(), titles })
}

/// The graph export with run metadata and a result ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub schema: String,
    pub seeds: Vec<String>,
    /// The reference time the run was evaluated at.
    pub as_of: String,
    pub weights: LayerWeights,
    pub threshold: f64,
    pub rank_by: RankBy,
    /// Weighted layers that were constant and so contributed nothing.
    pub degenerate_layers: Vec<Layer>,
    /// Node ids, best first.
    pub ranking: Vec<String>,
    pub nodes: Vec<ExportNode>,
    pub edges: Vec<ExportEdge>,
}

impl GraphDocument {
    /// The graph the document describes. Centrality and combined scores
    /// are not layers and are dropped.
    pub fn graph(&self) -> Result<SemanticGraph, GraphError> {
        SemanticGraph::from_export(&GraphExport {
            schema: self.schema.clone(),
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
        })
    }
}

pub struct BuildOutput {
    pub document: GraphDocument,
    pub degree: CentralityReport,
    pub betweenness: CentralityReport,
}

/// Collect, score, combine, threshold, cap, measure.
pub fn run_build(source: &Source, cfg: &RunConfig) -> Result<BuildOutput, PipelineError> {
    cfg.validate()?;
    let at = cfg.as_of.unwrap_or_else(|| source.reference_time());
    let records = collect_candidates(source, &cfg.seeds, cfg.as_of, cfg.frontier_depth)?;
    let scope = if cfg.include_web { Scope::IncludeWebNodes } else { Scope::CandidateSetOnly };
    let graph = build_graph(records.iter().map(Arc::as_ref), scope)?;
    let window = TimeWindow::trailing_days(at, cfg.window_days)?;
    let layered = score_layers(source, &graph, &window)?;
    let combined = combine_layers(&layered, &cfg.weights);

    let mut layers = cfg.weights.active_layers();
    layers.push(Layer::Mention);
    let kinds: &[NodeKind] = if cfg.include_web { &[NodeKind::Article, NodeKind::Web] } else { &[NodeKind::Article] };
    let projected = layered.project(&layers, kinds);

    let seeds: BTreeSet<NodeId> = cfg.seeds.iter().map(|s| NodeId::article(s)).collect();
    let relative = combined.relative();
    let passes = |n: &NodeId| seeds.contains(n) || relative.get(n).copied().unwrap_or(0.0) >= cfg.threshold;
    let kept = projected.retain_nodes(passes);

    let order = rank_nodes(&kept, &combined);
    let room = cfg.max_nodes.saturating_sub(seeds.len());
    let capped: BTreeSet<NodeId> =
        seeds.iter().cloned().chain(order.iter().filter(|n| !seeds.contains(n)).take(room).cloned()).collect();
    let final_graph = kept.retain_nodes(|n| capped.contains(n));

    let degree = degree_centrality(&final_graph, Direction::UndirectedProjection);
    let betweenness = betweenness_centrality(&final_graph, Direction::UndirectedProjection);

    let position: BTreeMap<&NodeId, usize> = order.iter().enumerate().map(|(i, n)| (n, i)).collect();
    let metric = |n: &NodeId| match cfg.rank_by {
        RankBy::Degree => degree.values[n],
        RankBy::Betweenness => betweenness.values[n],
        RankBy::Combined => 0.0,
    };
    let mut ranking: Vec<&NodeId> = final_graph.nodes().collect();
    ranking.sort_by(|a, b| metric(b).total_cmp(&metric(a)).then(position[a].cmp(&position[b])));

    let mut export = final_graph.export();
    for node in &mut export.nodes {
        let id = NodeId::parse_export_id(&node.id).expect("export ids round-trip");
        node.scores.insert("combined".into(), combined.scores[&id]);
        node.scores.insert("degree".into(), degree.values[&id]);
        node.scores.insert("betweenness".into(), betweenness.values[&id]);
    }
    let document = GraphDocument {
        schema: GRAPH_SCHEMA.into(),
        seeds: seeds.iter().map(|s| s.key.clone()).collect(),
        as_of: at.to_rfc3339_opts(SecondsFormat::Secs, true),
        weights: cfg.weights,
        threshold: cfg.threshold,
        rank_by: cfg.rank_by,
        degenerate_layers: combined.degenerate.clone(),
        ranking: ranking.into_iter().map(NodeId::export_id).collect(),
        nodes: export.nodes,
        edges: export.edges,
    };
    Ok(BuildOutput { document, degree, betweenness })
}

/// A WikiMap series over `timestamps`.
pub fn run_series(source: &Source, cfg: &RunConfig, timestamps: &[DateTime<Utc>]) -> Result<SeriesExport, PipelineError> {
    cfg.validate()?;
    let series = build_series(source, &cfg.seeds, timestamps, &cfg.snapshot_config())?;
    Ok(export_series(&series))
}

/// Pretty JSON with a trailing newline; the one serialization used for
/// every emitted document.
pub fn document_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

/// Parses a comma-separated list of RFC 3339 timestamps or dates
/// (`YYYY-MM-DD`, read as midnight UTC).
pub fn parse_timestamps(text: &str) -> Result<Vec<DateTime<Utc>>, PipelineError> {
    text.split(',').map(str::trim).filter(|s| !s.is_empty()).map(parse_timestamp).collect()
}

pub fn parse_timestamp(s: &str) -> Result<DateTime<Utc>, PipelineError> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map(|d| d.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc())
        .map_err(|_| PipelineError::Config(format!("invalid timestamp {s:?}")))
}

/// Reads a series request body: a run config plus a `timestamps` array.
pub fn parse_series_request(body: &str) -> Result<(RunConfig, Vec<DateTime<Utc>>), PipelineError> {
    let mut value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| PipelineError::Config(format!("request body: {e}")))?;
    let stamps = value
        .as_object_mut()
        .ok_or_else(|| PipelineError::Config("request body must be a JSON object".into()))?
        .remove("timestamps")
        .ok_or_else(|| PipelineError::Config("missing timestamps".into()))?;
    let stamps: Vec<String> =
        serde_json::from_value(stamps).map_err(|e| PipelineError::Config(format!("timestamps: {e}")))?;
    let stamps = stamps.iter().map(|s| parse_timestamp(s)).collect::<Result<Vec<_>, _>>()?;
    let cfg = serde_json::from_value(value).map_err(|e| PipelineError::Config(e.to_string()))?;
    Ok((cfg, stamps))
}
