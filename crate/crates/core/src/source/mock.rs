//! An in-process stand-in for the MediaWiki API, answering the queries
//! [`MediaWikiBackend`](super::MediaWikiBackend) issues from a fixture corpus.
//! Responses are paged (small page size by default) so continuation handling
//! is exercised, and failures can be scripted to test backoff.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde_json::{json, Value};

use super::mediawiki::{HttpResponse, Transport, TransportError};
use super::ratelimit::Clock;
use super::{Backend, FixtureBackend, ImportanceClass, QualityClass, SourceError};

/// Arrival time and query parameters of one request.
pub type LoggedRequest = (Duration, Vec<(String, String)>);

pub struct FixtureApiTransport {
    backend: Arc<FixtureBackend>,
    page_size: usize,
    clock: Option<Arc<dyn Clock>>,
    scripted: Mutex<VecDeque<u16>>,
    log: Mutex<Vec<LoggedRequest>>,
}

impl FixtureApiTransport {
    pub fn new(backend: Arc<FixtureBackend>) -> Self {
        FixtureApiTransport {
            backend,
            page_size: 2,
            clock: None,
            scripted: Mutex::new(VecDeque::new()),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn with_page_size(mut self, page_size: usize) -> Self {
        self.page_size = page_size.max(1);
        self
    }

    /// Timestamps each logged request with `clock`.
    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = Some(clock);
        self
    }

    /// The next `statuses.len()` requests fail with these HTTP statuses.
    pub fn fail_next(&self, statuses: impl IntoIterator<Item = u16>) {
        self.scripted.lock().unwrap().extend(statuses);
    }

    /// Every request received, with its arrival time (zero without a clock).
    pub fn requests(&self) -> Vec<LoggedRequest> {
        self.log.lock().unwrap().clone()
    }

    fn respond(&self, q: &HashMap<&str, &str>) -> Value {
        let result = match (q.get("list").copied(), q.get("prop").copied()) {
            (Some("search"), _) => self.search(q),
            (Some("backlinks"), _) => self.backlinks(q),
            (Some("exturlusage"), _) => self.exturlusage(q),
            (None, Some(_)) if q.contains_key("revids") => self.content(q),
            (None, Some(_)) if q.contains_key("titles") => self.page(q),
            _ => Ok(json!({"error": {"code": "badrequest", "info": "unsupported query"}})),
        };
        result.unwrap_or_else(|e| match e {
            SourceError::ArticleNotFound(t) => json!({"error": {"code": "missingtitle", "info": t}}),
            other => json!({"error": {"code": "internal", "info": other.to_string()}}),
        })
    }

    fn offset(q: &HashMap<&str, &str>, key: &str) -> usize {
        q.get(key).and_then(|v| v.parse().ok()).unwrap_or(0)
    }

    fn paged(&self, items: Vec<Value>, offset: usize, list: &str, token: &str) -> Value {
        let end = (offset + self.page_size).min(items.len());
        let mut body = json!({"batchcomplete": true, "query": {list: items[offset.min(end)..end]}});
        if end < items.len() {
            body["continue"] = json!({token: end.to_string(), "continue": "-||"});
        }
        body
    }

    fn search(&self, q: &HashMap<&str, &str>) -> Result<Value, SourceError> {
        let limit = q.get("srlimit").and_then(|v| v.parse().ok()).unwrap_or(10);
        let titles = self.backend.search(q.get("srsearch").copied().unwrap_or(""), limit)?;
        let hits: Vec<Value> = titles.iter().map(|t| json!({"ns": 0, "title": t})).collect();
        Ok(json!({"batchcomplete": true, "query": {"search": hits}}))
    }

    fn backlinks(&self, q: &HashMap<&str, &str>) -> Result<Value, SourceError> {
        let title = q.get("bltitle").copied().unwrap_or("");
        let items = self.backend.backlinks(title).into_iter().map(|t| json!({"ns": 0, "title": t})).collect();
        Ok(self.paged(items, Self::offset(q, "blcontinue"), "backlinks", "blcontinue"))
    }

    fn exturlusage(&self, q: &HashMap<&str, &str>) -> Result<Value, SourceError> {
        let url = format!("{}://{}", q.get("euprotocol").unwrap_or(&"http"), q.get("euquery").unwrap_or(&""));
        let items = self
            .backend
            .citing_articles(&url)
            .into_iter()
            .map(|t| json!({"ns": 0, "title": t, "url": url}))
            .collect();
        Ok(self.paged(items, Self::offset(q, "euoffset"), "exturlusage", "euoffset"))
    }

    fn content(&self, q: &HashMap<&str, &str>) -> Result<Value, SourceError> {
        let rev_id: u64 = q.get("revids").and_then(|v| v.parse().ok()).unwrap_or(0);
        let owner = self.backend.corpus().articles().find(|a| a.revisions.iter().any(|r| r.rev_id == rev_id));
        let Some(article) = owner else {
            return Ok(json!({"query": {"badrevids": {rev_id.to_string(): {"revid": rev_id, "missing": true}}}}));
        };
        let text = self.backend.revision_text(&article.title, rev_id)?;
        Ok(json!({"query": {"pages": [{
            "pageid": article.page_id,
            "ns": 0,
            "title": article.title,
            "revisions": [{"slots": {"main": {"contentmodel": "wikitext", "content": text}}}]
        }]}}))
    }

    fn page(&self, q: &HashMap<&str, &str>) -> Result<Value, SourceError> {
        let title = q.get("titles").copied().unwrap_or("");
        let meta = match self.backend.page(title) {
            Ok(meta) => meta,
            Err(SourceError::ArticleNotFound(_)) => {
                return Ok(json!({"query": {"pages": [{"ns": 0, "title": title, "missing": true}]}}));
            }
            Err(e) => return Err(e),
        };
        let offset = Self::offset(q, "rvcontinue");
        let end = (offset + self.page_size).min(meta.revisions.len());
        let revisions: Vec<Value> = meta.revisions[offset..end]
            .iter()
            .map(|r| {
                json!({
                    "revid": r.rev_id,
                    "timestamp": r.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                    "size": r.size_bytes,
                })
            })
            .collect();
        let mut page = json!({"pageid": meta.page_id, "ns": 0, "title": meta.title, "revisions": revisions});
        if offset == 0 {
            let class = match meta.assessment.quality {
                QualityClass::Unrated => String::new(),
                q => q.to_string(),
            };
            let importance = match meta.assessment.importance {
                ImportanceClass::Unrated => "Unknown".to_string(),
                i => i.to_string(),
            };
            page["pageassessments"] = json!({"Fixture": {"class": class, "importance": importance}});
        }
        let mut body = json!({"query": {"pages": [page]}});
        if end < meta.revisions.len() {
            body["continue"] = json!({"rvcontinue": end.to_string(), "continue": "||"});
        }
        Ok(body)
    }
}

impl Transport for FixtureApiTransport {
    fn get(&self, params: &[(String, String)]) -> Result<HttpResponse, TransportError> {
        let at = self.clock.as_ref().map_or(Duration::ZERO, |c| c.now());
        self.log.lock().unwrap().push((at, params.to_vec()));
        if let Some(status) = self.scripted.lock().unwrap().pop_front() {
            return Ok(HttpResponse { status, body: String::new(), retry_after: None });
        }
        let q: HashMap<&str, &str> = params.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        let body = self.respond(&q);
        Ok(HttpResponse { status: 200, body: body.to_string(), retry_after: None })
    }
}
