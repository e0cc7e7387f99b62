//! Topic-centred link graphs from Wikipedia.
//!
//! Starting from a few seed articles, galaxysearch collects the surrounding
//! articles and the web pages they cite, scores them on four layers
//! (mutual links, assessed importance, assessed quality and recent edit
//! activity), combines the layers with user weights and ranks the result by
//! graph centrality. The same machinery rebuilds the graph at past
//! timestamps so a topic's evolution can be animated, and an nDCG harness
//! compares ranking variants against graded judgments.
//!
//! ```
//! use galaxysearch::graph::{build_graph, Layer, NodeId, Scope};
//! use galaxysearch::ranking::build_bidirectional_layer;
//! # use galaxysearch::source::ArticleRecord;
//! # fn record(title: &str, outlinks: &[&str]) -> ArticleRecord {
//! #     ArticleRecord {
//! #         title: title.into(), page_id: 1, as_of: chrono::Utc::now(), rev_id: 1,
//! #         outlinks: outlinks.iter().map(|s| s.to_string()).collect(),
//! #         extlinks: vec![], assessment: Default::default(), revisions: vec![],
//! #     }
//! # }
//!
//! let records = [record("Jazz", &["Blues", "Swing"]), record("Blues", &["Jazz"]), record("Swing", &[])];
//! let graph = build_bidirectional_layer(&build_graph(&records, Scope::CandidateSetOnly).unwrap());
//! assert_eq!(graph.score(&NodeId::article("Jazz"), Layer::Bidirectional), Some(1.0));
//! assert_eq!(graph.score(&NodeId::article("Swing"), Layer::Bidirectional), Some(0.0));
//! ```

pub mod centrality;
pub mod cli;
pub mod evaluation;
pub mod graph;
pub mod pipeline;
pub mod ranking;
pub mod service;
pub mod source;
pub mod store;
pub mod timeline;
pub mod wikitext;
