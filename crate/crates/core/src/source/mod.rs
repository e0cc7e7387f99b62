//! Article acquisition.
//!
//! A [`Backend`] answers a handful of primitive questions (page metadata and
//! history, revision text, backlink counts, search). [`Source`] sits on top of
//! it, derives [`ArticleRecord`]s from revision wikitext and memoizes every
//! answer, persisting revision text in a [`Store`] so that a repeated fetch
//! never reaches the backend twice.

mod fixture;
mod mediawiki;
pub mod mock;
mod ratelimit;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::{CacheEntry, RevisionPayload, Store, StoreError};
use crate::wikitext;

pub use fixture::{FixtureArticle, FixtureBackend, FixtureCorpus, FixtureError, FixtureRevision};
pub use mediawiki::{HttpResponse, MediaWikiBackend, MediaWikiConfig, Transport, TransportError, UreqTransport};
pub use ratelimit::{Backoff, Clock, ManualClock, RateLimiter, SystemClock};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SourceError {
    #[error("search term is empty")]
    EmptyQuery,
    #[error("article not found: {0}")]
    ArticleNotFound(String),
    #[error("{title} has no revision at or before {as_of}")]
    NoRevisionBefore { title: String, as_of: DateTime<Utc> },
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("invalid time window: start {start} is not before end {end}")]
    InvalidWindow { start: DateTime<Utc>, end: DateTime<Utc> },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// WikiProject quality class, ordered from lowest to highest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub enum QualityClass {
    #[default]
    Unrated,
    List,
    Stub,
    Start,
    C,
    B,
    GA,
    A,
    FL,
    FA,
}

/// WikiProject importance class, ordered from lowest to highest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub enum ImportanceClass {
    #[default]
    Unrated,
    Low,
    Mid,
    High,
    Top,
}

impl QualityClass {
    /// Lenient parse of an assessment label; anything unknown is `Unrated`.
    pub fn from_label(label: &str) -> Self {
        label.parse().unwrap_or_default()
    }
}

impl ImportanceClass {
    pub fn from_label(label: &str) -> Self {
        label.parse().unwrap_or_default()
    }
}

impl FromStr for QualityClass {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "list" => QualityClass::List,
            "stub" => QualityClass::Stub,
            "start" => QualityClass::Start,
            "c" => QualityClass::C,
            "b" => QualityClass::B,
            "ga" => QualityClass::GA,
            "a" => QualityClass::A,
            "fl" => QualityClass::FL,
            "fa" => QualityClass::FA,
            "unrated" | "unassessed" | "" => QualityClass::Unrated,
            _ => return Err(()),
        })
    }
}

impl FromStr for ImportanceClass {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "low" => ImportanceClass::Low,
            "mid" => ImportanceClass::Mid,
            "high" => ImportanceClass::High,
            "top" => ImportanceClass::Top,
            "unrated" | "unknown" | "na" | "" => ImportanceClass::Unrated,
            _ => return Err(()),
        })
    }
}

impl fmt::Display for QualityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl fmt::Display for ImportanceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct AssessmentRating {
    pub quality: QualityClass,
    pub importance: ImportanceClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RevisionStamp {
    pub rev_id: u64,
    pub timestamp: DateTime<Utc>,
    pub size_bytes: u64,
}

/// One article as of one revision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleRecord {
    pub title: String,
    pub page_id: u64,
    /// Timestamp of the revision the links were read from.
    pub as_of: DateTime<Utc>,
    pub rev_id: u64,
    pub outlinks: Vec<String>,
    pub extlinks: Vec<String>,
    pub assessment: AssessmentRating,
    /// History up to and including the revision used, oldest first.
    pub revisions: Vec<RevisionStamp>,
}

/// Half-open interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeWindow {
    start: DateTime<Utc>,
    end: DateTime<Utc>,
}

impl TimeWindow {
    pub fn new(start: DateTime<Utc>, end: DateTime<Utc>) -> Result<Self, SourceError> {
        if start < end {
            Ok(TimeWindow { start, end })
        } else {
            Err(SourceError::InvalidWindow { start, end })
        }
    }

    /// The `days`-long window ending (exclusively) at `end`.
    pub fn trailing_days(end: DateTime<Utc>, days: u32) -> Result<Self, SourceError> {
        TimeWindow::new(end - Duration::days(i64::from(days)), end)
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.end
    }

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.start <= t && t < self.end
    }
}

/// Page-level facts: identity, current assessment and full revision history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageMeta {
    pub title: String,
    pub page_id: u64,
    pub assessment: AssessmentRating,
    /// Oldest first.
    pub revisions: Vec<RevisionStamp>,
}

impl PageMeta {
    /// Newest revision with `timestamp <= as_of`, or the latest one.
    pub fn revision_at(&self, as_of: Option<DateTime<Utc>>) -> Result<&RevisionStamp, SourceError> {
        let found = match as_of {
            None => self.revisions.last(),
            Some(t) => self.revisions.iter().rev().find(|r| r.timestamp <= t),
        };
        found.ok_or_else(|| match as_of {
            Some(t) => SourceError::NoRevisionBefore { title: self.title.clone(), as_of: t },
            None => SourceError::ArticleNotFound(self.title.clone()),
        })
    }

    pub fn revisions_in(&self, window: &TimeWindow) -> usize {
        self.revisions.iter().filter(|r| window.contains(r.timestamp)).count()
    }
}

/// Primitive queries against an article corpus. Each call is one logical
/// backend request.
pub trait Backend: Send + Sync {
    /// Titles in the backend's relevance order, at most `limit`.
    fn search(&self, term: &str, limit: usize) -> Result<Vec<String>, SourceError>;

    fn page(&self, title: &str) -> Result<PageMeta, SourceError>;

    fn revision_text(&self, title: &str, rev_id: u64) -> Result<String, SourceError>;

    /// Distinct articles anywhere in the corpus linking to `title`.
    fn backlink_count(&self, title: &str) -> Result<u64, SourceError>;

    /// Distinct articles anywhere in the corpus citing `url`.
    fn url_citation_count(&self, url: &str) -> Result<u64, SourceError>;

    /// The backend's notion of "now".
    fn reference_time(&self) -> DateTime<Utc>;
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn search(&self, term: &str, limit: usize) -> Result<Vec<String>, SourceError> {
        (**self).search(term, limit)
    }
    fn page(&self, title: &str) -> Result<PageMeta, SourceError> {
        (**self).page(title)
    }
    fn revision_text(&self, title: &str, rev_id: u64) -> Result<String, SourceError> {
        (**self).revision_text(title, rev_id)
    }
    fn backlink_count(&self, title: &str) -> Result<u64, SourceError> {
        (**self).backlink_count(title)
    }
    fn url_citation_count(&self, url: &str) -> Result<u64, SourceError> {
        (**self).url_citation_count(url)
    }
    fn reference_time(&self) -> DateTime<Utc> {
        (**self).reference_time()
    }
}

/// Backend wrapper that counts requests and logs which revision texts were
/// read.
pub struct Instrumented<B> {
    inner: B,
    requests: AtomicU64,
    texts: Mutex<Vec<(String, u64)>>,
}

impl<B: Backend> Instrumented<B> {
    pub fn new(inner: B) -> Self {
        Instrumented { inner, requests: AtomicU64::new(0), texts: Mutex::new(Vec::new()) }
    }

    pub fn requests(&self) -> u64 {
        self.requests.load(Ordering::SeqCst)
    }

    /// `(title, rev_id)` of every revision text fetched, in call order.
    pub fn texts_fetched(&self) -> Vec<(String, u64)> {
        self.texts.lock().unwrap().clone()
    }

    pub fn reset(&self) {
        self.requests.store(0, Ordering::SeqCst);
        self.texts.lock().unwrap().clear();
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    fn tick(&self) {
        self.requests.fetch_add(1, Ordering::SeqCst);
    }
}

impl<B: Backend> Backend for Instrumented<B> {
    fn search(&self, term: &str, limit: usize) -> Result<Vec<String>, SourceError> {
        self.tick();
        self.inner.search(term, limit)
    }
    fn page(&self, title: &str) -> Result<PageMeta, SourceError> {
        self.tick();
        self.inner.page(title)
    }
    fn revision_text(&self, title: &str, rev_id: u64) -> Result<String, SourceError> {
        self.tick();
        self.texts.lock().unwrap().push((title.to_string(), rev_id));
        self.inner.revision_text(title, rev_id)
    }
    fn backlink_count(&self, title: &str) -> Result<u64, SourceError> {
        self.tick();
        self.inner.backlink_count(title)
    }
    fn url_citation_count(&self, url: &str) -> Result<u64, SourceError> {
        self.tick();
        self.inner.url_citation_count(url)
    }
    fn reference_time(&self) -> DateTime<Utc> {
        self.inner.reference_time()
    }
}

/// Per-key memo: concurrent callers asking for the same key wait for the
/// first one instead of issuing duplicate requests. Errors are not cached.
struct Memo<K, V> {
    slots: Mutex<HashMap<K, Arc<Mutex<Option<V>>>>>,
}

impl<K: Eq + Hash, V: Clone> Memo<K, V> {
    fn new() -> Self {
        Memo { slots: Mutex::new(HashMap::new()) }
    }

    fn get_or_try<E>(&self, key: K, fetch: impl FnOnce() -> Result<V, E>) -> Result<V, E> {
        let slot = self.slots.lock().unwrap().entry(key).or_default().clone();
        let mut guard = slot.lock().unwrap();
        if let Some(v) = guard.as_ref() {
            return Ok(v.clone());
        }
        let v = fetch()?;
        *guard = Some(v.clone());
        Ok(v)
    }
}

/// Caching front end over a [`Backend`]. Shareable across threads.
pub struct Source {
    backend: Arc<dyn Backend>,
    store: Arc<Store>,
    pages: Memo<String, Arc<PageMeta>>,
    records: Memo<(String, u64), Arc<ArticleRecord>>,
    backlinks: Memo<String, u64>,
    citations: Memo<String, u64>,
}

impl Source {
    /// A source with a process-local, in-memory store.
    pub fn new(backend: impl Backend + 'static) -> Self {
        Source::with_store(backend, Arc::new(Store::in_memory()))
    }

    pub fn with_store(backend: impl Backend + 'static, store: Arc<Store>) -> Self {
        Source::from_arc(Arc::new(backend), store)
    }

    pub fn from_arc(backend: Arc<dyn Backend>, store: Arc<Store>) -> Self {
        Source {
            backend,
            store,
            pages: Memo::new(),
            records: Memo::new(),
            backlinks: Memo::new(),
            citations: Memo::new(),
        }
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn reference_time(&self) -> DateTime<Utc> {
        self.backend.reference_time()
    }

    pub fn search_seeds(&self, term: &str, limit: usize) -> Result<Vec<String>, SourceError> {
        let term = term.trim();
        if term.is_empty() {
            return Err(SourceError::EmptyQuery);
        }
        if limit == 0 {
            return Err(SourceError::InvalidArgument("limit must be positive".into()));
        }
        let mut seen = BTreeSet::new();
        let titles = self
            .backend
            .search(term, limit)?
            .into_iter()
            .filter_map(|t| wikitext::normalize_title(&t).ok())
            .filter(|t| seen.insert(t.clone()))
            .take(limit)
            .collect();
        Ok(titles)
    }

    pub fn page(&self, title: &str) -> Result<Arc<PageMeta>, SourceError> {
        let title = canonical(title)?;
        self.pages.get_or_try(title.clone(), || self.backend.page(&title).map(Arc::new))
    }

    /// The article as of the newest revision at or before `as_of` (the latest
    /// revision when `as_of` is `None`).
    pub fn fetch_article(
        &self,
        title: &str,
        as_of: Option<DateTime<Utc>>,
    ) -> Result<Arc<ArticleRecord>, SourceError> {
        let page = self.page(title)?;
        let stamp = *page.revision_at(as_of)?;
        self.records.get_or_try((page.title.clone(), stamp.rev_id), || {
            let wikitext = self.revision_text(&page, &stamp)?;
            let links = wikitext::LinkExtraction::from_wikitext(&wikitext);
            let outlinks = links.internal.into_iter().filter(|t| *t != page.title).collect();
            Ok(Arc::new(ArticleRecord {
                title: page.title.clone(),
                page_id: page.page_id,
                as_of: stamp.timestamp,
                rev_id: stamp.rev_id,
                outlinks,
                extlinks: links.external,
                assessment: page.assessment,
                revisions: page.revisions.iter().filter(|r| r.rev_id <= stamp.rev_id).copied().collect(),
            }))
        })
    }

    pub fn fetch_backlink_count(&self, title: &str) -> Result<u64, SourceError> {
        let page = self.page(title)?;
        self.backlinks.get_or_try(page.title.clone(), || self.backend.backlink_count(&page.title))
    }

    pub fn fetch_url_citation_count(&self, url: &str) -> Result<u64, SourceError> {
        let url = wikitext::normalize_url(url).map_err(|e| SourceError::InvalidArgument(e.to_string()))?;
        self.citations.get_or_try(url.clone(), || self.backend.url_citation_count(&url))
    }

    /// Revisions with `window.start <= timestamp < window.end`.
    pub fn fetch_revision_count(&self, title: &str, window: &TimeWindow) -> Result<u64, SourceError> {
        Ok(self.page(title)?.revisions_in(window) as u64)
    }

    fn revision_text(&self, page: &PageMeta, stamp: &RevisionStamp) -> Result<String, SourceError> {
        if let Some(entry) = self.store.get_revision(&page.title, stamp.rev_id)? {
            return Ok(entry.payload.wikitext);
        }
        let wikitext = self.backend.revision_text(&page.title, stamp.rev_id)?;
        self.store.put(CacheEntry {
            title: page.title.clone(),
            rev_id: stamp.rev_id,
            fetched_at: Utc::now(),
            payload: RevisionPayload {
                page_id: page.page_id,
                assessment: page.assessment,
                revision: *stamp,
                wikitext: wikitext.clone(),
            },
        })?;
        Ok(wikitext)
    }
}

fn canonical(title: &str) -> Result<String, SourceError> {
    wikitext::normalize_title(title).map_err(|_| SourceError::ArticleNotFound(title.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn ts(day: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2011, 5, day, 0, 0, 0).unwrap()
    }

    #[test]
    fn window_is_half_open() {
        let w = TimeWindow::new(ts(1), ts(15)).unwrap();
        assert!(w.contains(ts(1)));
        assert!(w.contains(ts(14)));
        assert!(!w.contains(ts(15)));
        assert!(TimeWindow::new(ts(2), ts(2)).is_err());
        assert_eq!(TimeWindow::trailing_days(ts(15), 14).unwrap().start(), ts(1));
    }

    #[test]
    fn assessment_labels() {
        assert_eq!(QualityClass::from_label("ga"), QualityClass::GA);
        assert_eq!(QualityClass::from_label("FA"), QualityClass::FA);
        assert_eq!(QualityClass::from_label("Redirect"), QualityClass::Unrated);
        assert_eq!(ImportanceClass::from_label("Top"), ImportanceClass::Top);
        assert_eq!(ImportanceClass::from_label("bogus"), ImportanceClass::Unrated);
        assert!(QualityClass::Unrated < QualityClass::List);
        assert!(ImportanceClass::Unrated < ImportanceClass::Low);
    }

    #[test]
    fn revision_resolution() {
        let stamp = |rev_id, day| RevisionStamp { rev_id, timestamp: ts(day), size_bytes: 0 };
        let page = PageMeta {
            title: "X".into(),
            page_id: 1,
            assessment: AssessmentRating::default(),
            revisions: vec![stamp(10, 3), stamp(11, 7)],
        };
        assert_eq!(page.revision_at(None).unwrap().rev_id, 11);
        assert_eq!(page.revision_at(Some(ts(7))).unwrap().rev_id, 11);
        assert_eq!(page.revision_at(Some(ts(6))).unwrap().rev_id, 10);
        assert!(matches!(page.revision_at(Some(ts(2))), Err(SourceError::NoRevisionBefore { .. })));
    }
}
