//! Filtered topic graphs at chosen timestamps, for animating how a topic
//! network evolves.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::{DateTime, SecondsFormat, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::centrality::{wikimap_filter, CentralityError, FilterConfig};
use crate::graph::{build_graph, Edge, GraphError, GraphExport, Layer, NodeId, Scope, SemanticGraph};
use crate::ranking::build_bidirectional_layer;
use crate::source::{ArticleRecord, Source, SourceError};
use crate::wikitext;

pub const SERIES_SCHEMA: &str = "galaxysearch.series/v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimelineError {
    #[error("seed article {0:?} not found")]
    SeedNotFound(String),
    #[error("at least one seed is required")]
    NoSeeds,
    #[error("at least one timestamp is required")]
    NoTimestamps,
    #[error("timestamps must be strictly increasing ({prev} then {next})")]
    NotIncreasing { prev: DateTime<Utc>, next: DateTime<Utc> },
    #[error("snapshots have different seed sets")]
    SeedMismatch,
    #[error("snapshot at {at}: {source}")]
    AtTimestamp { at: DateTime<Utc>, source: Box<TimelineError> },
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Filter(#[from] CentralityError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotConfig {
    pub filter: FilterConfig,
    /// Outlink hops collected around the seeds.
    pub frontier_depth: usize,
    pub include_web: bool,
}

impl Default for SnapshotConfig {
    fn default() -> Self {
        SnapshotConfig { filter: FilterConfig::default(), frontier_depth: 1, include_web: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub at: DateTime<Utc>,
    pub graph: SemanticGraph,
    /// Canonical seed titles, sorted.
    pub seeds: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSeries {
    pub seeds: Vec<String>,
    pub snapshots: Vec<Snapshot>,
}

fn canonical_seeds(seeds: &[String]) -> Result<Vec<String>, TimelineError> {
    if seeds.is_empty() {
        return Err(TimelineError::NoSeeds);
    }
    let set: BTreeSet<String> = seeds
        .iter()
        .map(|s| wikitext::normalize_title(s).map_err(|_| TimelineError::SeedNotFound(s.clone())))
        .collect::<Result<_, _>>()?;
    Ok(set.into_iter().collect())
}

/// The seeds plus everything within `depth` outlink hops, each read at the
/// newest revision not after `at` (latest when `None`). Frontier articles
/// that do not exist, or did not exist yet, are skipped.
pub fn collect_candidates(
    source: &Source,
    seeds: &[String],
    at: Option<DateTime<Utc>>,
    depth: usize,
) -> Result<Vec<Arc<ArticleRecord>>, TimelineError> {
    let seeds = canonical_seeds(seeds)?;
    let mut records: BTreeMap<String, Arc<ArticleRecord>> = BTreeMap::new();
    for seed in &seeds {
        let record = source.fetch_article(seed, at).map_err(|e| match e {
            SourceError::ArticleNotFound(_) => TimelineError::SeedNotFound(seed.clone()),
            other => TimelineError::Source(other),
        })?;
        records.insert(record.title.clone(), record);
    }
    let mut visited: BTreeSet<String> = records.keys().cloned().collect();
    let mut frontier: Vec<String> = records.keys().cloned().collect();
    for _ in 0..depth {
        let next: BTreeSet<String> = frontier
            .iter()
            .filter_map(|t| records.get(t))
            .flat_map(|r| r.outlinks.iter())
            .filter(|t| !visited.contains(*t))
            .cloned()
            .collect();
        let fetched: Vec<Result<Option<Arc<ArticleRecord>>, SourceError>> = next
            .par_iter()
            .map(|t| match source.fetch_article(t, at) {
                Ok(r) => Ok(Some(r)),
                Err(SourceError::ArticleNotFound(_) | SourceError::NoRevisionBefore { .. }) => Ok(None),
                Err(e) => Err(e),
            })
            .collect();
        visited.extend(next.iter().cloned());
        frontier.clear();
        for r in fetched {
            if let Some(r) = r? {
                frontier.push(r.title.clone());
                records.entry(r.title.clone()).or_insert(r);
            }
        }
    }
    Ok(records.into_values().collect())
}

fn snapshot_graph(
    source: &Source,
    seeds: &[String],
    at: Option<DateTime<Utc>>,
    cfg: &SnapshotConfig,
) -> Result<SemanticGraph, TimelineError> {
    let records = collect_candidates(source, seeds, at, cfg.frontier_depth)?;
    let scope = if cfg.include_web { Scope::IncludeWebNodes } else { Scope::CandidateSetOnly };
    let graph = build_graph(records.iter().map(Arc::as_ref), scope)?;
    let graph = build_bidirectional_layer(&graph);
    Ok(wikimap_filter(&graph, seeds, &cfg.filter)?)
}

/// Candidate collection as of `at`, the Bidirectional layer, then the
/// WikiMap filter.
pub fn build_snapshot(
    source: &Source,
    seeds: &[String],
    at: DateTime<Utc>,
    cfg: &SnapshotConfig,
) -> Result<Snapshot, TimelineError> {
    let seeds = canonical_seeds(seeds)?;
    let graph = snapshot_graph(source, &seeds, Some(at), cfg)?;
    Ok(Snapshot { at, graph, seeds })
}

/// The same graph from the latest revisions, without a time cut.
pub fn build_current(source: &Source, seeds: &[String], cfg: &SnapshotConfig) -> Result<SemanticGraph, TimelineError> {
    let seeds = canonical_seeds(seeds)?;
    snapshot_graph(source, &seeds, None, cfg)
}

/// One snapshot per timestamp, built in parallel and returned in order.
/// Revisions shared between snapshots are fetched once through the
/// source's store.
pub fn build_series(
    source: &Source,
    seeds: &[String],
    timestamps: &[DateTime<Utc>],
    cfg: &SnapshotConfig,
) -> Result<SnapshotSeries, TimelineError> {
    if timestamps.is_empty() {
        return Err(TimelineError::NoTimestamps);
    }
    for w in timestamps.windows(2) {
        if w[0] >= w[1] {
            return Err(TimelineError::NotIncreasing { prev: w[0], next: w[1] });
        }
    }
    let seeds = canonical_seeds(seeds)?;
    let results: Vec<Result<Snapshot, TimelineError>> = timestamps
        .par_iter()
        .map(|at| {
            build_snapshot(source, &seeds, *at, cfg)
                .map_err(|e| TimelineError::AtTimestamp { at: *at, source: Box::new(e) })
        })
        .collect();
    let snapshots = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(SnapshotSeries { seeds, snapshots })
}

/// Exact differences between two snapshots. Applying it to the first
/// graph yields the second, scores included.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GraphDelta {
    pub nodes_added: BTreeSet<NodeId>,
    pub nodes_removed: BTreeSet<NodeId>,
    /// New edges, and edges whose weight changed, with their new weight.
    pub edges_added: BTreeMap<Edge, f64>,
    pub edges_removed: BTreeSet<Edge>,
    /// Full score maps of added nodes and of nodes whose scores changed.
    pub scores_changed: BTreeMap<NodeId, BTreeMap<Layer, f64>>,
}

impl GraphDelta {
    pub fn between(a: &SemanticGraph, b: &SemanticGraph) -> GraphDelta {
        let mut delta = GraphDelta::default();
        for n in b.nodes() {
            if !a.contains(n) {
                delta.nodes_added.insert(n.clone());
            }
            if a.scores(n) != b.scores(n) {
                delta.scores_changed.insert(n.clone(), b.scores(n).cloned().unwrap_or_default());
            }
        }
        delta.nodes_removed = a.nodes().filter(|n| !b.contains(n)).cloned().collect();
        for (s, d, l, w) in b.edges() {
            if a.edge_weight(s, d, l) != Some(w) {
                delta.edges_added.insert((s.clone(), d.clone(), l), w);
            }
        }
        for (s, d, l, _) in a.edges() {
            if !b.has_edge(s, d, l) {
                delta.edges_removed.insert((s.clone(), d.clone(), l));
            }
        }
        delta
    }

    pub fn is_empty(&self) -> bool {
        self.nodes_added.is_empty()
            && self.nodes_removed.is_empty()
            && self.edges_added.is_empty()
            && self.edges_removed.is_empty()
            && self.scores_changed.is_empty()
    }

    pub fn apply(&self, graph: &SemanticGraph) -> SemanticGraph {
        let mut g = graph.clone();
        for (s, d, l) in &self.edges_removed {
            g.remove_edge(s, d, *l);
        }
        for n in &self.nodes_removed {
            g.remove_node(n);
        }
        for n in &self.nodes_added {
            g.add_node(n.clone());
        }
        for ((s, d, l), w) in &self.edges_added {
            g.add_edge(s.clone(), d.clone(), *l, *w);
        }
        for (n, scores) in &self.scores_changed {
            g.set_scores(n, scores.clone());
        }
        g
    }
}

pub fn diff_snapshots(a: &Snapshot, b: &Snapshot) -> Result<GraphDelta, TimelineError> {
    if a.seeds != b.seeds {
        return Err(TimelineError::SeedMismatch);
    }
    Ok(GraphDelta::between(&a.graph, &b.graph))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesExport {
    pub schema: String,
    pub seeds: Vec<String>,
    pub frames: Vec<Frame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// RFC 3339, second precision.
    pub at: String,
    pub graph: GraphExport,
}

pub fn export_series(series: &SnapshotSeries) -> SeriesExport {
    SeriesExport {
        schema: SERIES_SCHEMA.into(),
        seeds: series.seeds.clone(),
        frames: series
            .snapshots
            .iter()
            .map(|s| Frame { at: s.at.to_rfc3339_opts(SecondsFormat::Secs, true), graph: s.graph.export() })
            .collect(),
    }
}
