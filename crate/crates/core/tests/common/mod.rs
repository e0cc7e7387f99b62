//! Shared helpers and independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::PathBuf;
use std::sync::Arc;

use galaxysearch::graph::{Layer, NodeId, SemanticGraph};
use galaxysearch::source::{FixtureBackend, Source};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn tests_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join(name)
}

pub fn fixture_backend(name: &str) -> FixtureBackend {
    FixtureBackend::load(fixture_dir(name)).expect("fixture corpus loads")
}

pub fn fixture_source(name: &str) -> Arc<Source> {
    Arc::new(Source::new(fixture_backend(name)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// G(n, p) on nodes `n0..n{n-1}`: each ordered pair gets a Link edge with
/// probability `p`.
pub fn random_directed(rng: &mut impl Rng, n: usize, p: f64) -> SemanticGraph {
    let mut g = SemanticGraph::new();
    for i in 0..n {
        g.add_node(node(i));
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.gen_bool(p) {
                g.add_edge(node(i), node(j), Layer::Link, 1.0);
            }
        }
    }
    g
}

pub fn node(i: usize) -> NodeId {
    NodeId::article(&format!("N{i:02}"))
}

/// Betweenness by explicit enumeration of every shortest path between every
/// ordered pair `(s, t)`. Each path is walked node by node; an inner node
/// `v` earns `1 / (number of shortest s-t paths)` per path through it.
pub fn brute_force_betweenness(n: usize, adj: &[BTreeSet<usize>]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for s in 0..n {
        let dist = bfs(n, adj, s);
        for (t, &d) in dist.iter().enumerate() {
            if s == t || d == usize::MAX {
                continue;
            }
            let mut paths = Vec::new();
            let mut current = vec![s];
            walk(adj, t, d, &mut current, &mut paths);
            let total = paths.len() as f64;
            for path in &paths {
                for &v in &path[1..path.len() - 1] {
                    out[v] += 1.0 / total;
                }
            }
        }
    }
    out
}

fn bfs(n: usize, adj: &[BTreeSet<usize>], s: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; n];
    dist[s] = 0;
    let mut q = VecDeque::from([s]);
    while let Some(v) = q.pop_front() {
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                q.push_back(w);
            }
        }
    }
    dist
}

/// Depth-limited search for all paths of exactly `len` edges ending at `t`;
/// at that length every such simple path is a shortest one.
fn walk(adj: &[BTreeSet<usize>], t: usize, len: usize, current: &mut Vec<usize>, paths: &mut Vec<Vec<usize>>) {
    let last = *current.last().unwrap();
    if current.len() - 1 == len {
        if last == t {
            paths.push(current.clone());
        }
        return;
    }
    for &w in &adj[last] {
        if !current.contains(&w) {
            current.push(w);
            walk(adj, t, len, current, paths);
            current.pop();
        }
    }
}

/// Undirected adjacency of `g` over all layers, indexed in `nodes` order.
pub fn undirected_adjacency(g: &SemanticGraph) -> (Vec<NodeId>, Vec<BTreeSet<usize>>) {
    let nodes: Vec<NodeId> = g.nodes().cloned().collect();
    let index: BTreeMap<&NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (n, i)).collect();
    let mut adj = vec![BTreeSet::new(); nodes.len()];
    for (a, b, _, _) in g.edges() {
        let (i, j) = (index[a], index[b]);
        adj[i].insert(j);
        adj[j].insert(i);
    }
    (nodes, adj)
}

/// nDCG written out term by term with natural logs: gain `2^r - 1`,
/// discount `ln 2 / ln(1 + position)`, divided by the same sum over the
/// ideal profile (`n_hr` twos, `n_r` ones, zeros after).
pub fn scripted_ndcg(ratings: &[u32], n_hr: usize, n_r: usize, k: usize) -> f64 {
    let dcg = |rs: &[u32]| -> f64 {
        let mut total = 0.0;
        for (i, &r) in rs.iter().take(k).enumerate() {
            let gain = ((1u64 << r) - 1) as f64;
            total += gain * std::f64::consts::LN_2 / ((i + 2) as f64).ln();
        }
        total
    };
    let mut ideal = vec![2u32; n_hr];
    ideal.extend(std::iter::repeat_n(1, n_r));
    ideal.resize(k.max(ideal.len()), 0);
    dcg(ratings) / dcg(&ideal)
}
