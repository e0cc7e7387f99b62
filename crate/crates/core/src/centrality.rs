//! Degree and betweenness centrality, top-k selection and the WikiMap
//! node-reduction filter.
//!
//! Metrics see the graph as a simple graph: parallel edges from different
//! layers between the same two nodes count once.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NodeId, NodeKind, SemanticGraph};
use crate::wikitext;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CentralityError {
    #[error("seed {0:?} is not an article in the graph")]
    SeedNotInGraph(String),
    #[error("{seeds} seeds do not fit in max_nodes = {max_nodes}")]
    TooManySeeds { seeds: usize, max_nodes: usize },
    #[error("{0} must be at least 1")]
    NotPositive(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Degree,
    Betweenness,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Degree => "degree",
            Metric::Betweenness => "betweenness",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Directed,
    #[default]
    UndirectedProjection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralityReport {
    pub metric: Metric,
    pub direction: Direction,
    pub values: BTreeMap<NodeId, f64>,
}

impl CentralityReport {
    /// `node<TAB>metric<TAB>value` lines under a header, in node order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("node\tmetric\tvalue\n");
        for (n, v) in &self.values {
            writeln!(out, "{}\t{}\t{}", n.export_id(), self.metric.as_str(), v).unwrap();
        }
        out
    }
}

/// Nodes in key order with adjacency lists of indices.
struct Adjacency {
    nodes: Vec<NodeId>,
    out: Vec<Vec<usize>>,
}

impl Adjacency {
    fn new(graph: &SemanticGraph, direction: Direction) -> Self {
        let nodes: Vec<NodeId> = graph.nodes().cloned().collect();
        let index: BTreeMap<&NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (n, i)).collect();
        let mut sets = vec![BTreeSet::new(); nodes.len()];
        for (s, d, _, _) in graph.edges() {
            let (i, j) = (index[s], index[d]);
            sets[i].insert(j);
            if direction == Direction::UndirectedProjection {
                sets[j].insert(i);
            }
        }
        Adjacency { nodes, out: sets.into_iter().map(|s| s.into_iter().collect()).collect() }
    }

    fn report(self, metric: Metric, direction: Direction, values: Vec<f64>) -> CentralityReport {
        CentralityReport { metric, direction, values: self.nodes.into_iter().zip(values).collect() }
    }
}

/// Directed: out-neighbours plus in-neighbours. Undirected: distinct
/// neighbours.
pub fn degree_centrality(graph: &SemanticGraph, direction: Direction) -> CentralityReport {
    let adj = Adjacency::new(graph, direction);
    let mut deg: Vec<f64> = adj.out.iter().map(|o| o.len() as f64).collect();
    if direction == Direction::Directed {
        for targets in &adj.out {
            for &t in targets {
                deg[t] += 1.0;
            }
        }
    }
    adj.report(Metric::Degree, direction, deg)
}

const SOURCES_PER_TASK: usize = 32;

/// Unnormalized betweenness over ordered pairs with unit edge lengths,
/// accumulated per source in O(V·E).
pub fn betweenness_centrality(graph: &SemanticGraph, direction: Direction) -> CentralityReport {
    let adj = Adjacency::new(graph, direction);
    let n = adj.nodes.len();
    let sources: Vec<usize> = (0..n).collect();
    // Fixed chunking and an in-order reduction keep float sums reproducible.
    let partials: Vec<Vec<f64>> = sources
        .par_chunks(SOURCES_PER_TASK)
        .map(|chunk| {
            let mut acc = vec![0.0; n];
            let mut scratch = Scratch::new(n);
            for &s in chunk {
                scratch.accumulate(&adj.out, s, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; n];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    adj.report(Metric::Betweenness, direction, total)
}

struct Scratch {
    order: Vec<usize>,
    preds: Vec<Vec<usize>>,
    sigma: Vec<f64>,
    dist: Vec<i64>,
    delta: Vec<f64>,
    queue: VecDeque<usize>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            order: Vec::with_capacity(n),
            preds: vec![Vec::new(); n],
            sigma: vec![0.0; n],
            dist: vec![-1; n],
            delta: vec![0.0; n],
            queue: VecDeque::new(),
        }
    }

    fn accumulate(&mut self, out: &[Vec<usize>], s: usize, acc: &mut [f64]) {
        self.order.clear();
        for v in 0..out.len() {
            self.preds[v].clear();
            self.sigma[v] = 0.0;
            self.dist[v] = -1;
            self.delta[v] = 0.0;
        }
        self.sigma[s] = 1.0;
        self.dist[s] = 0;
        self.queue.push_back(s);
        while let Some(v) = self.queue.pop_front() {
            self.order.push(v);
            for &w in &out[v] {
                if self.dist[w] < 0 {
                    self.dist[w] = self.dist[v] + 1;
                    self.queue.push_back(w);
                }
                if self.dist[w] == self.dist[v] + 1 {
                    self.sigma[w] += self.sigma[v];
                    self.preds[w].push(v);
                }
            }
        }
        while let Some(w) = self.order.pop() {
            for &v in &self.preds[w] {
                self.delta[v] += self.sigma[v] / self.sigma[w] * (1.0 + self.delta[w]);
            }
            if w != s {
                acc[w] += self.delta[w];
            }
        }
    }
}

/// Highest values first, ties by key; at most `k` entries.
pub fn top_k(
    report: &CentralityReport,
    k: usize,
    kind: Option<NodeKind>,
) -> Result<Vec<(NodeId, f64)>, CentralityError> {
    if k == 0 {
        return Err(CentralityError::NotPositive("k"));
    }
    let mut entries: Vec<(NodeId, f64)> = report
        .values
        .iter()
        .filter(|(n, _)| kind.is_none_or(|k| n.kind == k))
        .map(|(n, v)| (n.clone(), *v))
        .collect();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    entries.truncate(k);
    Ok(entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterOrder {
    /// Hop distance to the nearest seed, then indegree.
    #[default]
    DistanceFirst,
    /// Indegree, then hop distance.
    IndegreeFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub max_nodes: usize,
    pub order: FilterOrder,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig { max_nodes: 50, order: FilterOrder::DistanceFirst }
    }
}

/// Keeps the seeds and the best-ranked nodes reachable from them, up to
/// `max_nodes`, and returns the induced subgraph. Nodes are ranked by
/// undirected hop distance to the nearest seed, within-graph indegree
/// (descending) and key, with the first two swapped under
/// [`FilterOrder::IndegreeFirst`].
pub fn wikimap_filter(
    graph: &SemanticGraph,
    seeds: &[String],
    cfg: &FilterConfig,
) -> Result<SemanticGraph, CentralityError> {
    if cfg.max_nodes == 0 {
        return Err(CentralityError::NotPositive("max_nodes"));
    }
    let mut seed_ids = BTreeSet::new();
    for s in seeds {
        let id = wikitext::normalize_title(s)
            .map(|key| NodeId { key, kind: NodeKind::Article })
            .ok()
            .filter(|id| graph.contains(id))
            .ok_or_else(|| CentralityError::SeedNotInGraph(s.clone()))?;
        seed_ids.insert(id);
    }
    if seed_ids.len() > cfg.max_nodes {
        return Err(CentralityError::TooManySeeds { seeds: seed_ids.len(), max_nodes: cfg.max_nodes });
    }

    let adj = Adjacency::new(graph, Direction::UndirectedProjection);
    let mut dist = vec![usize::MAX; adj.nodes.len()];
    let mut queue = VecDeque::new();
    for (i, n) in adj.nodes.iter().enumerate() {
        if seed_ids.contains(n) {
            dist[i] = 0;
            queue.push_back(i);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &w in &adj.out[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }

    let indegree = graph.indegree();
    let mut candidates: Vec<(usize, u64, &NodeId)> = adj
        .nodes
        .iter()
        .enumerate()
        .filter(|(i, n)| dist[*i] != usize::MAX && !seed_ids.contains(n))
        .map(|(i, n)| (dist[i], indegree[n], n))
        .collect();
    candidates.sort_by(|a, b| {
        let by_dist = a.0.cmp(&b.0);
        let by_indegree = b.1.cmp(&a.1);
        match cfg.order {
            FilterOrder::DistanceFirst => by_dist.then(by_indegree),
            FilterOrder::IndegreeFirst => by_indegree.then(by_dist),
        }
        .then_with(|| a.2.cmp(b.2))
    });
    let mut keep = seed_ids;
    let room = cfg.max_nodes - keep.len();
    keep.extend(candidates.into_iter().take(room).map(|c| c.2.clone()));
    Ok(graph.retain_nodes(|n| keep.contains(n)))
}
