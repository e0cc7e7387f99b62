//! The guide in `book/`, one module per chapter, so that every Rust snippet
//! in it runs under `cargo test --doc`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../book/src/fixtures.md")]
pub mod fixtures {}
#[doc = include_str!("../../../book/src/wikitext.md")]
pub mod wikitext {}
#[doc = include_str!("../../../book/src/graph.md")]
pub mod graph {}
#[doc = include_str!("../../../book/src/ranking.md")]
pub mod ranking {}
#[doc = include_str!("../../../book/src/centrality.md")]
pub mod centrality {}
#[doc = include_str!("../../../book/src/timeline.md")]
pub mod timeline {}
#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}
#[doc = include_str!("../../../book/src/store.md")]
pub mod store {}
#[doc = include_str!("../../../book/src/http.md")]
pub mod http {}
