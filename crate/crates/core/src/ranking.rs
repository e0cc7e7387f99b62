//! Node and edge scoring: indegree, bidirectional links, assessment
//! ratings and edit actuality, plus their weighted combination.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Layer, NodeId, NodeKind, SemanticGraph};
use crate::source::{AssessmentRating, ImportanceClass, QualityClass, Source, SourceError, TimeWindow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankingError {
    #[error("invalid layer weights: {0}")]
    InvalidWeights(String),
    #[error(transparent)]
    Source(#[from] SourceError),
}

/// Weights of the four ranking layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct LayerWeights {
    pub bidirectional: f64,
    pub importance: f64,
    pub quality: f64,
    pub actuality: f64,
}

impl LayerWeights {
    pub fn new(bidirectional: f64, importance: f64, quality: f64, actuality: f64) -> Result<Self, RankingError> {
        let w = LayerWeights { bidirectional, importance, quality, actuality };
        let all = w.as_array();
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(RankingError::InvalidWeights("weights must be finite and non-negative".into()));
        }
        if all.iter().all(|v| *v == 0.0) {
            return Err(RankingError::InvalidWeights("at least one weight must be positive".into()));
        }
        Ok(w)
    }

    pub fn equal() -> Self {
        LayerWeights { bidirectional: 1.0, importance: 1.0, quality: 1.0, actuality: 1.0 }
    }

    /// In [`Layer::RANKING`] order.
    pub fn as_array(&self) -> [f64; 4] {
        [self.bidirectional, self.importance, self.quality, self.actuality]
    }

    pub fn get(&self, layer: Layer) -> f64 {
        match layer {
            Layer::Bidirectional => self.bidirectional,
            Layer::Importance => self.importance,
            Layer::Quality => self.quality,
            Layer::Actuality => self.actuality,
            Layer::Link | Layer::Mention => 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.as_array().iter().sum()
    }

    /// Ranking layers with a positive weight.
    pub fn active_layers(&self) -> Vec<Layer> {
        Layer::RANKING.into_iter().filter(|l| self.get(*l) > 0.0).collect()
    }

    pub fn scaled(&self, c: f64) -> Result<Self, RankingError> {
        let [b, i, q, a] = self.as_array();
        LayerWeights::new(b * c, i * c, q * c, a * c)
    }
}

impl Default for LayerWeights {
    fn default() -> Self {
        LayerWeights::equal()
    }
}

impl TryFrom<[f64; 4]> for LayerWeights {
    type Error = RankingError;

    fn try_from([b, i, q, a]: [f64; 4]) -> Result<Self, Self::Error> {
        LayerWeights::new(b, i, q, a)
    }
}

impl From<LayerWeights> for [f64; 4] {
    fn from(w: LayerWeights) -> Self {
        w.as_array()
    }
}

/// Parses `bid,imp,qua,act`, e.g. `1,0,0,0`.
impl FromStr for LayerWeights {
    type Err = RankingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(RankingError::InvalidWeights(format!("expected 4 comma-separated values, got {s:?}")));
        }
        let mut v = [0.0; 4];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p.parse().map_err(|_| RankingError::InvalidWeights(format!("not a number: {p:?}")))?;
        }
        LayerWeights::try_from(v)
    }
}

impl fmt::Display for LayerWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [b, i, q, a] = self.as_array();
        write!(f, "{b},{i},{q},{a}")
    }
}

#[derive(Clone, Copy)]
pub enum IndegreeMode<'a> {
    /// Backlinks across the whole wiki, via the source.
    WikiWide(&'a Source),
    /// Distinct in-neighbours inside the graph.
    WithinCandidates,
}

pub fn score_indegree(graph: &SemanticGraph, mode: IndegreeMode<'_>) -> Result<BTreeMap<NodeId, u64>, RankingError> {
    match mode {
        IndegreeMode::WithinCandidates => Ok(graph.indegree()),
        IndegreeMode::WikiWide(source) => {
            let nodes: Vec<&NodeId> = graph.nodes().collect();
            nodes
                .par_iter()
                .map(|n| {
                    let count = match n.kind {
                        NodeKind::Article => source.fetch_backlink_count(&n.key)?,
                        NodeKind::Web => source.fetch_url_citation_count(&n.key)?,
                    };
                    Ok(((*n).clone(), count))
                })
                .collect()
        }
    }
}

/// Replaces the Bidirectional layer: one edge each way for every mutually
/// linked article pair, and each article scored by its number of mutual
/// partners.
pub fn build_bidirectional_layer(graph: &SemanticGraph) -> SemanticGraph {
    let mut out = graph.clone();
    out.remove_layer(Layer::Bidirectional);
    let mut partners: BTreeMap<NodeId, usize> = graph.articles().map(|n| (n.clone(), 0)).collect();
    for (a, b, _) in graph.edges_in(Layer::Link) {
        if a.is_article() && b.is_article() && graph.has_edge(b, a, Layer::Link) {
            out.add_edge(a.clone(), b.clone(), Layer::Bidirectional, 1.0);
            *partners.get_mut(a).expect("article") += 1;
        }
    }
    for (n, count) in partners {
        out.set_score(&n, Layer::Bidirectional, count as f64);
    }
    out
}

pub fn score_quality(rating: AssessmentRating) -> u32 {
    match rating.quality {
        QualityClass::Unrated => 0,
        QualityClass::List => 1,
        QualityClass::Stub => 2,
        QualityClass::Start => 3,
        QualityClass::C => 4,
        QualityClass::B => 5,
        QualityClass::GA => 6,
        QualityClass::A => 7,
        QualityClass::FL => 8,
        QualityClass::FA => 9,
    }
}

pub fn score_importance(rating: AssessmentRating) -> u32 {
    match rating.importance {
        ImportanceClass::Unrated => 0,
        ImportanceClass::Low => 1,
        ImportanceClass::Mid => 2,
        ImportanceClass::High => 3,
        ImportanceClass::Top => 4,
    }
}

/// Revision count inside `window` for each title.
pub fn score_actuality<'a>(
    source: &Source,
    titles: impl IntoIterator<Item = &'a str>,
    window: &TimeWindow,
) -> Result<BTreeMap<String, u64>, SourceError> {
    let titles: Vec<&str> = titles.into_iter().collect();
    titles.par_iter().map(|t| Ok((t.to_string(), source.fetch_revision_count(t, window)?))).collect()
}

/// For each web node, the sum of `article_scores` over the articles citing
/// it. Articles absent from `article_scores` contribute 0.
pub fn score_urls(graph: &SemanticGraph, article_scores: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let mut out: BTreeMap<String, f64> =
        graph.nodes().filter(|n| n.kind == NodeKind::Web).map(|n| (n.key.clone(), 0.0)).collect();
    for (a, u, _) in graph.edges_in(Layer::Mention) {
        *out.get_mut(&u.key).expect("mention target is a web node") += article_scores.get(&a.key).copied().unwrap_or(0.0);
    }
    out
}

/// Writes one rating layer into `graph`: article scores, web node scores
/// summed over citing articles, and an edge `a -> b` weighted by b's score
/// for every article link whose endpoints both score above zero.
pub fn apply_layer(graph: &mut SemanticGraph, layer: Layer, article_scores: &BTreeMap<String, f64>) {
    graph.remove_layer(layer);
    let articles: Vec<NodeId> = graph.articles().cloned().collect();
    for a in &articles {
        graph.set_score(a, layer, article_scores.get(&a.key).copied().unwrap_or(0.0));
    }
    for (url, v) in score_urls(graph, article_scores) {
        graph.set_score(&NodeId { key: url, kind: NodeKind::Web }, layer, v);
    }
    let links: Vec<(NodeId, NodeId)> = graph.edges_in(Layer::Link).map(|(a, b, _)| (a.clone(), b.clone())).collect();
    for (a, b) in links {
        let (sa, sb) = (article_scores.get(&a.key).copied().unwrap_or(0.0), article_scores.get(&b.key).copied().unwrap_or(0.0));
        if sa > 0.0 && sb > 0.0 {
            graph.add_edge(a, b, layer, sb);
        }
    }
}

/// Computes all four ranking layers on a graph built from `source`. Web
/// node Bidirectional scores are summed from their citing articles like the
/// other layers.
pub fn score_layers(source: &Source, graph: &SemanticGraph, window: &TimeWindow) -> Result<SemanticGraph, RankingError> {
    let mut g = build_bidirectional_layer(graph);
    let bid: BTreeMap<String, f64> =
        g.articles().map(|n| (n.key.clone(), g.score(n, Layer::Bidirectional).unwrap_or(0.0))).collect();
    for (url, v) in score_urls(&g, &bid) {
        g.set_score(&NodeId { key: url, kind: NodeKind::Web }, Layer::Bidirectional, v);
    }

    let titles: Vec<String> = g.articles().map(|n| n.key.clone()).collect();
    let pages = titles
        .par_iter()
        .map(|t| source.page(t).map(|p| (t.clone(), p.assessment)))
        .collect::<Result<BTreeMap<_, _>, _>>()?;
    let quality = pages.iter().map(|(t, r)| (t.clone(), f64::from(score_quality(*r)))).collect();
    let importance = pages.iter().map(|(t, r)| (t.clone(), f64::from(score_importance(*r)))).collect();
    let actuality = score_actuality(source, titles.iter().map(String::as_str), window)?
        .into_iter()
        .map(|(t, c)| (t, c as f64))
        .collect();
    apply_layer(&mut g, Layer::Quality, &quality);
    apply_layer(&mut g, Layer::Importance, &importance);
    apply_layer(&mut g, Layer::Actuality, &actuality);
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedScores {
    /// Σ weight · normalized layer score.
    pub scores: BTreeMap<NodeId, f64>,
    /// Weighted layers that were constant across all nodes; they contribute 0.
    pub degenerate: Vec<Layer>,
    pub weight_total: f64,
}

impl CombinedScores {
    /// Scores divided by the weight total, so they lie in `[0, 1]`.
    pub fn relative(&self) -> BTreeMap<NodeId, f64> {
        self.scores.iter().map(|(n, v)| (n.clone(), v / self.weight_total)).collect()
    }
}

/// Min-max normalization of one layer's node scores. Missing scores count
/// as 0. Returns `None` for a constant layer.
pub fn normalize_layer(graph: &SemanticGraph, layer: Layer) -> Option<BTreeMap<NodeId, f64>> {
    let raw: Vec<(&NodeId, f64)> = graph.nodes().map(|n| (n, graph.score(n, layer).unwrap_or(0.0))).collect();
    let min = raw.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let max = raw.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    if raw.is_empty() || max <= min {
        return None;
    }
    Some(raw.into_iter().map(|(n, v)| (n.clone(), (v - min) / (max - min))).collect())
}

pub fn combine_layers(graph: &SemanticGraph, weights: &LayerWeights) -> CombinedScores {
    let mut scores: BTreeMap<NodeId, f64> = graph.nodes().map(|n| (n.clone(), 0.0)).collect();
    let mut degenerate = Vec::new();
    for layer in weights.active_layers() {
        match normalize_layer(graph, layer) {
            Some(norm) => {
                for (n, v) in norm {
                    *scores.get_mut(&n).expect("same node set") += weights.get(layer) * v;
                }
            }
            None => degenerate.push(layer),
        }
    }
    CombinedScores { scores, degenerate, weight_total: weights.total() }
}

/// Nodes best first: relative combined score (compared at 1e-12), then
/// Bidirectional score, then key.
pub fn rank_nodes(graph: &SemanticGraph, combined: &CombinedScores) -> Vec<NodeId> {
    let quantized = |n: &NodeId| (combined.scores.get(n).copied().unwrap_or(0.0) / combined.weight_total * 1e12).round() as i64;
    let bid = |n: &NodeId| graph.score(n, Layer::Bidirectional).unwrap_or(0.0);
    let mut nodes: Vec<NodeId> = graph.nodes().cloned().collect();
    nodes.sort_by(|a, b| {
        quantized(b).cmp(&quantized(a)).then(bid(b).total_cmp(&bid(a))).then_with(|| a.cmp(b))
    });
    nodes
}

/// Removes nodes scoring below `theta` (missing scores count as 0), then
/// any web node left without a citing article.
pub fn apply_threshold(graph: &SemanticGraph, scores: &BTreeMap<NodeId, f64>, theta: f64) -> SemanticGraph {
    assert!(!theta.is_nan(), "threshold must not be NaN");
    graph.retain_nodes(|n| scores.get(n).copied().unwrap_or(0.0) >= theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn a(t: &str) -> NodeId {
        NodeId::article(t)
    }

    fn links(edges: &[(&str, &str)]) -> SemanticGraph {
        let mut g = SemanticGraph::new();
        for (s, d) in edges {
            g.add_edge(a(s), a(d), Layer::Link, 1.0);
        }
        g
    }

    #[test]
    fn weights_parse_and_validate() {
        let w: LayerWeights = "1, 0, 0.5,0".parse().unwrap();
        assert_eq!(w.as_array(), [1.0, 0.0, 0.5, 0.0]);
        assert_eq!(w.to_string().parse::<LayerWeights>().unwrap(), w);
        assert!("0,0,0,0".parse::<LayerWeights>().is_err());
        assert!("1,-1,0,0".parse::<LayerWeights>().is_err());
        assert!("1,1,1".parse::<LayerWeights>().is_err());
        assert!(serde_json::from_str::<LayerWeights>("[0,0,0,0]").is_err());
    }

    #[test]
    fn indegree_within_candidates() {
        let g = links(&[("A", "B"), ("B", "C")]);
        let d = score_indegree(&g, IndegreeMode::WithinCandidates).unwrap();
        assert_eq!(d.values().copied().collect::<Vec<_>>(), vec![0, 1, 1]);
        assert!(score_indegree(&SemanticGraph::new(), IndegreeMode::WithinCandidates).unwrap().is_empty());
    }

    #[test]
    fn bidirectional_examples() {
        let g = build_bidirectional_layer(&links(&[("A", "B"), ("B", "A"), ("A", "C")]));
        let bid: Vec<_> = g.edges_in(Layer::Bidirectional).map(|(s, d, _)| (s.key.clone(), d.key.clone())).collect();
        assert_eq!(bid, vec![("A".into(), "B".into()), ("B".into(), "A".into())]);
        assert_eq!(g.score(&a("C"), Layer::Bidirectional), Some(0.0));

        let names = ["A", "B", "C", "D"];
        let clique: Vec<(&str, &str)> =
            names.iter().flat_map(|x| names.iter().filter(move |y| *y != x).map(move |y| (*x, *y))).collect();
        let g = build_bidirectional_layer(&links(&clique));
        assert!(names.iter().all(|n| g.score(&a(n), Layer::Bidirectional) == Some(3.0)));

        let g = build_bidirectional_layer(&links(&[("A", "B"), ("B", "C"), ("A", "C")]));
        assert_eq!(g.edges_in(Layer::Bidirectional).count(), 0);
    }

    #[test]
    fn rating_scales() {
        let r = |q, i| AssessmentRating { quality: q, importance: i };
        assert_eq!(score_quality(r(QualityClass::FA, ImportanceClass::Top)), 9);
        assert_eq!(score_quality(r(QualityClass::GA, ImportanceClass::Top)), 6);
        assert_eq!(score_quality(AssessmentRating::default()), 0);
        assert_eq!(score_importance(AssessmentRating::default()), 0);
        assert_eq!(score_importance(r(QualityClass::FA, ImportanceClass::Top)), 4);
    }

    fn cited() -> SemanticGraph {
        let mut g = SemanticGraph::new();
        for (art, url) in [("A", "http://u.org/"), ("B", "http://u.org/"), ("C", "http://v.org/")] {
            g.add_edge(a(art), NodeId::web(url), Layer::Mention, 1.0);
        }
        g
    }

    #[test]
    fn url_sums() {
        let scores = BTreeMap::from([("A".to_string(), 6.0), ("B".to_string(), 9.0)]);
        let u = score_urls(&cited(), &scores);
        assert_eq!(u["http://u.org"], 15.0);
        assert_eq!(u["http://v.org"], 0.0);
    }

    #[test]
    fn combination() {
        let mut g = build_bidirectional_layer(&links(&[("A", "B"), ("B", "A"), ("B", "C"), ("C", "B"), ("D", "C")]));
        apply_layer(&mut g, Layer::Quality, &BTreeMap::from([("D".into(), 9.0), ("A".into(), 1.0)]));
        let w = LayerWeights::new(1.0, 0.0, 0.0, 0.0).unwrap();
        let c = combine_layers(&g, &w);
        let order: Vec<String> = rank_nodes(&g, &c).into_iter().map(|n| n.key).collect();
        assert_eq!(order, vec!["B", "A", "C", "D"]);
        assert!(c.degenerate.is_empty());

        let c = combine_layers(&g, &LayerWeights::equal());
        assert_eq!(c.degenerate, vec![Layer::Importance, Layer::Actuality]);
        assert_eq!(g.edges_in(Layer::Quality).count(), 0);
    }

    #[test]
    fn constant_layers_tie() {
        let mut g = links(&[("A", "B"), ("C", "D")]);
        for l in Layer::RANKING {
            apply_layer(&mut g, l, &["A", "B", "C", "D"].iter().map(|t| (t.to_string(), 2.0)).collect());
        }
        let c = combine_layers(&g, &LayerWeights::equal());
        assert!(c.scores.values().all(|v| *v == 0.0));
        assert_eq!(c.degenerate.len(), 4);
    }

    #[test]
    fn threshold_examples() {
        let g = cited();
        let scores = BTreeMap::from([(a("A"), 0.5), (a("B"), 0.2), (a("C"), 0.9)]);
        let mut with_web = scores.clone();
        with_web.insert(NodeId::web("http://u.org/"), 1.0);
        with_web.insert(NodeId::web("http://v.org/"), 1.0);
        assert_eq!(apply_threshold(&g, &with_web, f64::NEG_INFINITY), g);
        assert!(apply_threshold(&g, &with_web, 2.0).is_empty());
        let t = apply_threshold(&g, &with_web, 0.2);
        assert_eq!(t, g, "score equal to the threshold is kept");
        let t = apply_threshold(&g, &with_web, 0.6);
        assert!(!t.contains(&NodeId::web("http://u.org/")));
        assert!(t.contains(&NodeId::web("http://v.org/")));
        t.validate().unwrap();
    }

    fn arb_scored_graph() -> impl Strategy<Value = SemanticGraph> {
        let names = ["A", "B", "C", "D", "E", "F", "G"];
        (
            proptest::collection::vec((0..7usize, 0..7usize), 0..25),
            proptest::collection::vec((0..4usize, 0..7usize, 0.0..10.0f64), 0..40),
        )
            .prop_map(move |(edges, scores)| {
                let mut g = SemanticGraph::new();
                for n in names {
                    g.add_node(a(n));
                }
                for (s, d) in edges {
                    if s != d {
                        g.add_edge(a(names[s]), a(names[d]), Layer::Link, 1.0);
                    }
                }
                for (l, n, v) in scores {
                    g.set_score(&a(names[n]), Layer::RANKING[l], v.round());
                }
                g
            })
    }

    proptest! {
        #[test]
        fn scaling_weights_keeps_order(g in arb_scored_graph(), w in proptest::array::uniform4(0.0..5.0f64), c in 0.01..100.0f64) {
            prop_assume!(w.iter().any(|v| *v > 0.01));
            let w = LayerWeights::try_from(w).unwrap();
            let base = rank_nodes(&g, &combine_layers(&g, &w));
            let scaled = rank_nodes(&g, &combine_layers(&g, &w.scaled(c).unwrap()));
            prop_assert_eq!(base, scaled);
        }

        #[test]
        fn url_sums_are_linear(x in proptest::collection::vec(0.0..10.0f64, 3), y in proptest::collection::vec(0.0..10.0f64, 3)) {
            let g = cited();
            let m = |v: &[f64]| -> BTreeMap<String, f64> { ["A", "B", "C"].iter().map(|s| s.to_string()).zip(v.iter().copied()).collect() };
            let sum: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p + q).collect();
            let (ux, uy, us) = (score_urls(&g, &m(&x)), score_urls(&g, &m(&y)), score_urls(&g, &m(&sum)));
            for k in us.keys() {
                prop_assert!((us[k] - (ux[k] + uy[k])).abs() < 1e-9);
            }
        }

        #[test]
        fn threshold_monotone_and_idempotent(g in arb_scored_graph(), t1 in 0.0..10.0f64, t2 in 0.0..10.0f64) {
            let scores: BTreeMap<NodeId, f64> = g.nodes().map(|n| (n.clone(), g.score(n, Layer::Quality).unwrap_or(0.0))).collect();
            let (lo, hi) = (t1.min(t2), t1.max(t2));
            let once = apply_threshold(&g, &scores, lo);
            prop_assert_eq!(apply_threshold(&once, &scores, lo), once.clone());
            prop_assert!(apply_threshold(&g, &scores, hi).nodes().all(|n| once.contains(n)));
        }
    }
}
