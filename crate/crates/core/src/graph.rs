//! The multi-layer semantic network.
//!
//! Nodes are either Wikipedia articles or external web pages. Every edge is
//! tagged with the [`Layer`] that produced it, and every node carries one
//! score per layer. Graphs are plain values: operations return new graphs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::source::ArticleRecord;
use crate::wikitext;

pub const GRAPH_SCHEMA: &str = "galaxysearch.graph/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Article,
    Web,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Article => "article",
            NodeKind::Web => "web",
        }
    }
}

/// Ordered by key first so that sorted listings read alphabetically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub key: String,
    pub kind: NodeKind,
}

impl NodeId {
    /// Canonicalizes `title`; panics on an empty title.
    pub fn article(title: &str) -> Self {
        let key = wikitext::normalize_title(title).expect("article title must be non-empty");
        NodeId { key, kind: NodeKind::Article }
    }

    /// Normalizes `url`; panics if it is not an http(s) URL.
    pub fn web(url: &str) -> Self {
        let key = wikitext::normalize_url(url).expect("web node key must be an http(s) URL");
        NodeId { key, kind: NodeKind::Web }
    }

    pub fn is_article(&self) -> bool {
        self.kind == NodeKind::Article
    }

    /// Stable textual id, `article:<title>` or `web:<url>`.
    pub fn export_id(&self) -> String {
        format!("{}:{}", self.kind.as_str(), self.key)
    }

    pub fn parse_export_id(id: &str) -> Option<NodeId> {
        let (kind, key) = id.split_once(':')?;
        let kind = match kind {
            "article" => NodeKind::Article,
            "web" => NodeKind::Web,
            _ => return None,
        };
        Some(NodeId { key: key.to_string(), kind })
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.export_id())
    }
}

/// `Link` holds raw article hyperlinks; the others are produced by ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Link,
    Bidirectional,
    Importance,
    Quality,
    Actuality,
    Mention,
}

impl Layer {
    pub const ALL: [Layer; 6] =
        [Layer::Link, Layer::Bidirectional, Layer::Importance, Layer::Quality, Layer::Actuality, Layer::Mention];
    /// The four weighted ranking layers, in weight-vector order.
    pub const RANKING: [Layer; 4] = [Layer::Bidirectional, Layer::Importance, Layer::Quality, Layer::Actuality];

    pub fn as_str(self) -> &'static str {
        match self {
            Layer::Link => "link",
            Layer::Bidirectional => "bidirectional",
            Layer::Importance => "importance",
            Layer::Quality => "quality",
            Layer::Actuality => "actuality",
            Layer::Mention => "mention",
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    CandidateSetOnly,
    IncludeWebNodes,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("duplicate article title {0:?}")]
    DuplicateTitle(String),
    #[error("no article records given")]
    NoRecords,
    #[error("invalid graph: {0}")]
    Invalid(String),
}

pub type Edge = (NodeId, NodeId, Layer);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SemanticGraph {
    nodes: BTreeMap<NodeId, BTreeMap<Layer, f64>>,
    edges: BTreeMap<Edge, f64>,
}

impl SemanticGraph {
    pub fn new() -> Self {
        SemanticGraph::default()
    }

    pub fn add_node(&mut self, id: NodeId) {
        self.nodes.entry(id).or_default();
    }

    /// Inserts or overwrites an edge; both endpoints are added if missing.
    ///
    /// # Panics
    /// On a self-loop or a negative/non-finite weight.
    pub fn add_edge(&mut self, src: NodeId, dst: NodeId, layer: Layer, weight: f64) {
        assert!(src != dst, "self-loop on {src}");
        assert!(weight.is_finite() && weight >= 0.0, "bad edge weight {weight}");
        self.add_node(src.clone());
        self.add_node(dst.clone());
        self.edges.insert((src, dst, layer), weight);
    }

    pub fn set_score(&mut self, node: &NodeId, layer: Layer, value: f64) {
        if let Some(scores) = self.nodes.get_mut(node) {
            scores.insert(layer, value);
        }
    }

    /// Replaces all of `node`'s scores.
    pub fn set_scores(&mut self, node: &NodeId, scores: BTreeMap<Layer, f64>) {
        if let Some(slot) = self.nodes.get_mut(node) {
            *slot = scores;
        }
    }

    /// Removes `node` and its incident edges. Does not touch web nodes that
    /// lose their last citation.
    pub fn remove_node(&mut self, node: &NodeId) {
        if self.nodes.remove(node).is_some() {
            self.edges.retain(|(s, d, _), _| s != node && d != node);
        }
    }

    pub fn remove_edge(&mut self, src: &NodeId, dst: &NodeId, layer: Layer) -> Option<f64> {
        self.edges.remove(&(src.clone(), dst.clone(), layer))
    }

    pub fn edge_weight(&self, src: &NodeId, dst: &NodeId, layer: Layer) -> Option<f64> {
        self.edges.get(&(src.clone(), dst.clone(), layer)).copied()
    }

    pub fn score(&self, node: &NodeId, layer: Layer) -> Option<f64> {
        self.nodes.get(node)?.get(&layer).copied()
    }

    pub fn scores(&self, node: &NodeId) -> Option<&BTreeMap<Layer, f64>> {
        self.nodes.get(node)
    }

    pub fn contains(&self, node: &NodeId) -> bool {
        self.nodes.contains_key(node)
    }

    pub fn has_edge(&self, src: &NodeId, dst: &NodeId, layer: Layer) -> bool {
        self.edges.contains_key(&(src.clone(), dst.clone(), layer))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.keys()
    }

    pub fn articles(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.keys().filter(|n| n.is_article())
    }

    pub fn edges(&self) -> impl Iterator<Item = (&NodeId, &NodeId, Layer, f64)> {
        self.edges.iter().map(|((s, d, l), w)| (s, d, *l, *w))
    }

    pub fn edges_in(&self, layer: Layer) -> impl Iterator<Item = (&NodeId, &NodeId, f64)> {
        self.edges().filter(move |e| e.2 == layer).map(|(s, d, _, w)| (s, d, w))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn remove_layer(&mut self, layer: Layer) {
        self.edges.retain(|(_, _, l), _| *l != layer);
        for scores in self.nodes.values_mut() {
            scores.remove(&layer);
        }
    }

    /// Number of distinct in-neighbours, over all layers.
    pub fn indegree(&self) -> BTreeMap<NodeId, u64> {
        let mut sources: BTreeMap<&NodeId, BTreeSet<&NodeId>> = self.nodes.keys().map(|n| (n, BTreeSet::new())).collect();
        for (s, d, _, _) in self.edges() {
            sources.get_mut(d).expect("edge endpoint is a node").insert(s);
        }
        sources.into_iter().map(|(n, s)| (n.clone(), s.len() as u64)).collect()
    }

    /// Checks the four structural invariants.
    pub fn validate(&self) -> Result<(), GraphError> {
        let mut mentioned = BTreeSet::new();
        for ((s, d, layer), w) in &self.edges {
            let invalid = |msg: &str| Err(GraphError::Invalid(format!("{msg}: {s} -> {d} ({layer})")));
            if s == d {
                return invalid("self-loop");
            }
            if !self.nodes.contains_key(s) || !self.nodes.contains_key(d) {
                return invalid("dangling edge");
            }
            if !w.is_finite() || *w < 0.0 {
                return invalid("bad weight");
            }
            if s.kind == NodeKind::Web {
                return invalid("edge leaving a web node");
            }
            match (d.kind, *layer) {
                (NodeKind::Web, Layer::Mention) => {
                    mentioned.insert(d);
                }
                (NodeKind::Web, _) => return invalid("web node reached by a non-mention edge"),
                (NodeKind::Article, Layer::Mention) => return invalid("mention edge into an article"),
                (NodeKind::Article, _) => {}
            }
        }
        // (src, dst, layer) uniqueness is structural: edges are map keys.
        if let Some(orphan) = self.nodes.keys().find(|n| n.kind == NodeKind::Web && !mentioned.contains(n)) {
            return Err(GraphError::Invalid(format!("web node {orphan} has no mention edge")));
        }
        Ok(())
    }

    /// The subgraph induced by `layers` and `kinds`. Web nodes whose last
    /// mention edge is dropped are removed too.
    pub fn project(&self, layers: &[Layer], kinds: &[NodeKind]) -> SemanticGraph {
        let keep_node = |n: &NodeId| kinds.contains(&n.kind);
        let mut out = SemanticGraph::new();
        for (id, scores) in &self.nodes {
            if keep_node(id) {
                let scores = scores.iter().filter(|(l, _)| layers.contains(l)).map(|(l, v)| (*l, *v)).collect();
                out.nodes.insert(id.clone(), scores);
            }
        }
        for ((s, d, l), w) in &self.edges {
            if layers.contains(l) && keep_node(s) && keep_node(d) {
                out.edges.insert((s.clone(), d.clone(), *l), *w);
            }
        }
        out.drop_orphan_web_nodes();
        out
    }

    /// The subgraph induced by `keep`, with orphaned web nodes removed.
    pub fn retain_nodes(&self, keep: impl Fn(&NodeId) -> bool) -> SemanticGraph {
        let mut out = self.clone();
        out.nodes.retain(|n, _| keep(n));
        let nodes = &out.nodes;
        out.edges.retain(|(s, d, _), _| nodes.contains_key(s) && nodes.contains_key(d));
        out.drop_orphan_web_nodes();
        out
    }

    fn drop_orphan_web_nodes(&mut self) {
        let mentioned: BTreeSet<NodeId> = self.edges_in(Layer::Mention).map(|(_, d, _)| d.clone()).collect();
        self.nodes.retain(|n, _| n.kind == NodeKind::Article || mentioned.contains(n));
    }

    /// Serializable form with deterministic ordering.
    pub fn export(&self) -> GraphExport {
        let indegree = self.indegree();
        GraphExport {
            schema: GRAPH_SCHEMA.to_string(),
            nodes: self
                .nodes
                .iter()
                .map(|(id, scores)| ExportNode {
                    id: id.export_id(),
                    kind: id.kind,
                    key: id.key.clone(),
                    scores: scores.iter().map(|(l, v)| (l.as_str().to_string(), *v)).collect(),
                    indegree: indegree[id],
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|((s, d, l), w)| ExportEdge { src: s.export_id(), dst: d.export_id(), layer: *l, weight: *w })
                .collect(),
        }
    }

    /// Rebuilds a graph from its export, validating the result.
    pub fn from_export(doc: &GraphExport) -> Result<SemanticGraph, GraphError> {
        let parse = |id: &str| NodeId::parse_export_id(id).ok_or_else(|| GraphError::Invalid(format!("bad node id {id:?}")));
        let mut g = SemanticGraph::new();
        for node in &doc.nodes {
            let id = parse(&node.id)?;
            let mut scores = BTreeMap::new();
            for (name, v) in &node.scores {
                if let Some(layer) = Layer::ALL.iter().find(|l| l.as_str() == name) {
                    scores.insert(*layer, *v);
                }
            }
            g.nodes.insert(id, scores);
        }
        for e in &doc.edges {
            let (s, d) = (parse(&e.src)?, parse(&e.dst)?);
            if !g.contains(&s) || !g.contains(&d) {
                return Err(GraphError::Invalid(format!("edge {} -> {} has a missing endpoint", e.src, e.dst)));
            }
            g.edges.insert((s, d, e.layer), e.weight);
        }
        g.validate()?;
        Ok(g)
    }
}

/// One article node per record, `Link` edges for outlinks inside the
/// candidate set and, with [`Scope::IncludeWebNodes`], a web node per
/// distinct URL with a `Mention` edge from each citing article.
pub fn build_graph<'a>(
    records: impl IntoIterator<Item = &'a ArticleRecord>,
    scope: Scope,
) -> Result<SemanticGraph, GraphError> {
    let records: Vec<&ArticleRecord> = records.into_iter().collect();
    if records.is_empty() {
        return Err(GraphError::NoRecords);
    }
    let mut g = SemanticGraph::new();
    let mut titles = BTreeSet::new();
    for r in &records {
        let id = NodeId::article(&r.title);
        if !titles.insert(id.key.clone()) {
            return Err(GraphError::DuplicateTitle(id.key));
        }
        g.add_node(id);
    }
    for r in &records {
        let src = NodeId::article(&r.title);
        for target in &r.outlinks {
            let Ok(key) = wikitext::normalize_title(target) else { continue };
            if key != src.key && titles.contains(&key) {
                g.add_edge(src.clone(), NodeId { key, kind: NodeKind::Article }, Layer::Link, 1.0);
            }
        }
        if scope == Scope::IncludeWebNodes {
            for url in &r.extlinks {
                if let Ok(key) = wikitext::normalize_url(url) {
                    g.add_edge(src.clone(), NodeId { key, kind: NodeKind::Web }, Layer::Mention, 1.0);
                }
            }
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphExport {
    pub schema: String,
    pub nodes: Vec<ExportNode>,
    pub edges: Vec<ExportEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportNode {
    pub id: String,
    pub kind: NodeKind,
    pub key: String,
    pub scores: BTreeMap<String, f64>,
    pub indegree: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportEdge {
    pub src: String,
    pub dst: String,
    pub layer: Layer,
    pub weight: f64,
}
