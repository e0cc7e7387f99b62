mod common;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Datelike, TimeZone, Utc};

use galaxysearch::graph::{Layer, NodeId, SemanticGraph};
use galaxysearch::source::{Backend, Source};
use galaxysearch::timeline::{build_current, build_series, build_snapshot, export_series, GraphDelta, SnapshotConfig};

use common::*;

fn monthly(from: (i32, u32), to: (i32, u32)) -> Vec<DateTime<Utc>> {
    let mut out = Vec::new();
    let (mut y, mut m) = from;
    while (y, m) <= to {
        out.push(Utc.with_ymd_and_hms(y, m, 15, 0, 0, 0).unwrap());
        (y, m) = if m == 12 { (y + 1, 1) } else { (y, m + 1) };
    }
    out
}

/// Connected components of the undirected graph left after removing the
/// seeds: the topical clusters hanging off them.
fn clusters(g: &SemanticGraph, seeds: &[String]) -> usize {
    let seeds: BTreeSet<NodeId> = seeds.iter().map(|s| NodeId::article(s)).collect();
    let nodes: Vec<&NodeId> = g.nodes().filter(|n| !seeds.contains(n)).collect();
    let mut parent: BTreeMap<&NodeId, &NodeId> = nodes.iter().map(|n| (*n, *n)).collect();
    fn root<'a>(p: &BTreeMap<&'a NodeId, &'a NodeId>, mut n: &'a NodeId) -> &'a NodeId {
        while p[n] != n {
            n = p[n];
        }
        n
    }
    for (a, b, _, _) in g.edges() {
        if parent.contains_key(a) && parent.contains_key(b) {
            let (ra, rb) = (root(&parent, a), root(&parent, b));
            parent.insert(ra, rb);
        }
    }
    nodes.iter().map(|n| root(&parent, n)).collect::<BTreeSet<_>>().len()
}

#[test]
fn topic_map_grows_a_second_cluster() {
    let source = fixture_source("dsk");
    let seeds = vec!["Dominique Strauss-Kahn".to_string()];
    let stamps = monthly((2010, 10), (2011, 7));
    assert_eq!(stamps.len(), 10);
    let series = build_series(&source, &seeds, &stamps, &SnapshotConfig::default()).unwrap();
    let counts: Vec<usize> = series.snapshots.iter().map(|s| clusters(&s.graph, &seeds)).collect();
    assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
    assert!(counts.last() > counts.first(), "{counts:?}");

    let first = &series.snapshots[0].graph;
    let last = &series.snapshots[9].graph;
    assert!(!first.contains(&NodeId::article("Rikers Island")));
    assert!(last.contains(&NodeId::article("Rikers Island")));
    let may = stamps.iter().position(|t| t.month() == 5 && t.year() == 2011).unwrap();
    assert_eq!(counts[may], counts[0], "the legal cluster appears after May 16");
    assert!(counts[may + 1] > counts[0]);
}

#[test]
fn deltas_round_trip_on_every_fixture_series() {
    type Case<'a> = (&'a str, &'a [&'a str], (i32, u32), (i32, u32));
    let cases: [Case; 4] = [
        ("dsk", &["Dominique Strauss-Kahn"], (2010, 6), (2011, 8)),
        ("dated-link", &["Alpha"], (2011, 1), (2011, 5)),
        ("abortion", &["Abortion", "Roe v. Wade"], (2011, 3), (2011, 10)),
        ("bias", &["Jazz"], (2011, 5), (2011, 6)),
    ];
    for (fixture, seeds, from, to) in cases {
        let source = fixture_source(fixture);
        let seeds: Vec<String> = seeds.iter().map(|s| s.to_string()).collect();
        let stamps = monthly(from, to);
        let cfg = SnapshotConfig { include_web: true, ..SnapshotConfig::default() };
        let series = build_series(&source, &seeds, &stamps, &cfg).unwrap();
        let empty = SemanticGraph::new();
        let mut previous = &empty;
        for snap in &series.snapshots {
            let delta = GraphDelta::between(previous, &snap.graph);
            assert_eq!(delta.apply(previous), snap.graph, "{fixture} at {}", snap.at);
            previous = &snap.graph;
        }
        let doc = export_series(&series);
        assert_eq!(doc.frames.len(), stamps.len());
        for (frame, snap) in doc.frames.iter().zip(&series.snapshots) {
            assert_eq!(SemanticGraph::from_export(&frame.graph).unwrap(), snap.graph);
        }
    }
}

#[test]
fn snapshot_at_reference_time_equals_current_graph() {
    for (fixture, seed) in [("abortion", "Abortion"), ("dsk", "Dominique Strauss-Kahn"), ("bias", "Jazz")] {
        let backend = fixture_backend(fixture);
        let now = backend.reference_time();
        let source = Source::new(backend);
        let seeds = vec![seed.to_string()];
        let cfg = SnapshotConfig::default();
        let snap = build_snapshot(&source, &seeds, now, &cfg).unwrap();
        assert_eq!(snap.graph, build_current(&source, &seeds, &cfg).unwrap(), "{fixture}");
    }
}

#[test]
fn dated_link_edge_appears_only_after_insertion() {
    let source = fixture_source("dated-link");
    let seeds = vec!["Alpha".to_string()];
    let cfg = SnapshotConfig::default();
    let edge = |at: DateTime<Utc>| {
        build_snapshot(&source, &seeds, at, &cfg).unwrap().graph.has_edge(
            &NodeId::article("Beta"),
            &NodeId::article("Gamma"),
            Layer::Link,
        )
    };
    assert!(!edge(Utc.with_ymd_and_hms(2011, 2, 28, 23, 59, 59).unwrap()));
    assert!(edge(Utc.with_ymd_and_hms(2011, 3, 1, 0, 0, 0).unwrap()));
}

#[test]
fn seed_missing_before_creation_is_an_error() {
    let source = fixture_source("dsk");
    let early = Utc.with_ymd_and_hms(2009, 6, 1, 0, 0, 0).unwrap();
    let err = build_snapshot(&source, &["Dominique Strauss-Kahn".into()], early, &SnapshotConfig::default());
    assert!(err.is_err());
}
