//! Live backend over the MediaWiki action API.
//!
//! Every request goes through a shared [`RateLimiter`]; throttled (429) and
//! server-error (5xx) responses are retried with exponential backoff. Page
//! metadata, assessments and revision history come back in one continued
//! query, so a cold article costs one history request plus one content
//! request per distinct revision.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde_json::Value;
use thiserror::Error;

use super::ratelimit::{Backoff, Clock, RateLimiter, SystemClock};
use super::{AssessmentRating, Backend, ImportanceClass, PageMeta, QualityClass, RevisionStamp, SourceError};
use crate::wikitext::normalize_url;

const MAX_CONTINUATIONS: usize = 10_000;

#[derive(Debug, Clone)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
    pub retry_after: Option<Duration>,
}

#[derive(Debug, Error)]
#[error("transport error: {0}")]
pub struct TransportError(pub String);

/// Issues one GET against the API endpoint with the given query parameters.
pub trait Transport: Send + Sync {
    fn get(&self, params: &[(String, String)]) -> Result<HttpResponse, TransportError>;
}

impl<T: Transport + ?Sized> Transport for Arc<T> {
    fn get(&self, params: &[(String, String)]) -> Result<HttpResponse, TransportError> {
        (**self).get(params)
    }
}

pub struct UreqTransport {
    agent: ureq::Agent,
    endpoint: String,
    user_agent: String,
}

impl UreqTransport {
    pub fn new(endpoint: impl Into<String>, user_agent: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        UreqTransport { agent, endpoint: endpoint.into(), user_agent: user_agent.into() }
    }
}

impl Transport for UreqTransport {
    fn get(&self, params: &[(String, String)]) -> Result<HttpResponse, TransportError> {
        let mut response = self
            .agent
            .get(&self.endpoint)
            .header("User-Agent", &self.user_agent)
            .query_pairs(params.iter().map(|(k, v)| (k.as_str(), v.as_str())))
            .call()
            .map_err(|e| TransportError(e.to_string()))?;
        let status = response.status().as_u16();
        let retry_after = response
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|s| s.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let body = response.body_mut().read_to_string().map_err(|e| TransportError(e.to_string()))?;
        Ok(HttpResponse { status, body, retry_after })
    }
}

#[derive(Debug, Clone)]
pub struct MediaWikiConfig {
    pub endpoint: String,
    pub user_agent: String,
    pub requests_per_second: f64,
    pub backoff: Backoff,
}

impl Default for MediaWikiConfig {
    fn default() -> Self {
        MediaWikiConfig {
            endpoint: "https://en.wikipedia.org/w/api.php".into(),
            user_agent: concat!("galaxysearch/", env!("CARGO_PKG_VERSION"), " (link-graph research fetcher)").into(),
            requests_per_second: 5.0,
            backoff: Backoff::default(),
        }
    }
}

pub struct MediaWikiBackend {
    transport: Box<dyn Transport>,
    limiter: RateLimiter,
    clock: Arc<dyn Clock>,
    backoff: Backoff,
    reference_time: Option<DateTime<Utc>>,
}

impl MediaWikiBackend {
    pub fn new(
        transport: impl Transport + 'static,
        requests_per_second: f64,
        backoff: Backoff,
        clock: Arc<dyn Clock>,
    ) -> Self {
        MediaWikiBackend {
            transport: Box::new(transport),
            limiter: RateLimiter::new(requests_per_second),
            clock,
            backoff,
            reference_time: None,
        }
    }

    /// Pins the backend's "now" instead of reading the system clock.
    pub fn with_reference_time(mut self, at: DateTime<Utc>) -> Self {
        self.reference_time = Some(at);
        self
    }

    pub fn live(config: &MediaWikiConfig) -> Self {
        MediaWikiBackend::new(
            UreqTransport::new(&config.endpoint, &config.user_agent),
            config.requests_per_second,
            config.backoff,
            Arc::new(SystemClock::new()),
        )
    }

    fn request(&self, params: &[(String, String)]) -> Result<Value, SourceError> {
        let mut attempt = 0;
        loop {
            self.limiter.acquire(self.clock.as_ref());
            let (retryable, hint, failure) = match self.transport.get(params) {
                Ok(resp) if resp.status == 200 => return parse_api_body(&resp.body),
                Ok(resp) if resp.status == 429 || resp.status >= 500 => {
                    (true, resp.retry_after, format!("HTTP {}", resp.status))
                }
                Ok(resp) => (false, None, format!("HTTP {}", resp.status)),
                Err(e) => (true, None, e.to_string()),
            };
            if !retryable || attempt >= self.backoff.max_retries {
                return Err(SourceError::BackendUnavailable(failure));
            }
            let delay = self.backoff.delay(attempt).max(hint.unwrap_or_default());
            tracing::debug!(attempt, ?delay, %failure, "retrying API request");
            self.clock.sleep(delay);
            attempt += 1;
        }
    }

    /// Runs a query and follows `continue` tokens until exhausted.
    fn query_all(
        &self,
        base: &[(String, String)],
        mut each: impl FnMut(&Value) -> Result<(), SourceError>,
    ) -> Result<(), SourceError> {
        let mut params = base.to_vec();
        for _ in 0..MAX_CONTINUATIONS {
            let body = self.request(&params)?;
            each(&body)?;
            let Some(cont) = body.get("continue").and_then(Value::as_object) else {
                return Ok(());
            };
            params = base.to_vec();
            for (k, v) in cont {
                let v = v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string());
                params.push((k.clone(), v));
            }
        }
        Err(SourceError::BackendUnavailable("continuation did not terminate".into()))
    }
}

fn params(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    out.push(("format".into(), "json".into()));
    out.push(("formatversion".into(), "2".into()));
    out
}

fn parse_api_body(body: &str) -> Result<Value, SourceError> {
    let value: Value = serde_json::from_str(body)
        .map_err(|e| SourceError::BackendUnavailable(format!("malformed API response: {e}")))?;
    if let Some(err) = value.get("error") {
        let code = err.get("code").and_then(Value::as_str).unwrap_or("unknown");
        let info = err.get("info").and_then(Value::as_str).unwrap_or("");
        return Err(match code {
            "missingtitle" | "invalidtitle" | "nosuchrevid" => SourceError::ArticleNotFound(info.to_string()),
            _ => SourceError::BackendUnavailable(format!("API error {code}: {info}")),
        });
    }
    Ok(value)
}

fn malformed(what: &str) -> SourceError {
    SourceError::BackendUnavailable(format!("malformed API response: missing {what}"))
}

fn first_page(body: &Value, title: &str) -> Result<Option<Value>, SourceError> {
    let Some(page) = body.pointer("/query/pages/0") else {
        return Ok(None);
    };
    if page.get("missing").is_some() || page.get("invalid").is_some() {
        return Err(SourceError::ArticleNotFound(title.to_string()));
    }
    Ok(Some(page.clone()))
}

impl Backend for MediaWikiBackend {
    fn search(&self, term: &str, limit: usize) -> Result<Vec<String>, SourceError> {
        let limit = limit.clamp(1, 500).to_string();
        let body = self.request(&params(&[
            ("action", "query"),
            ("list", "search"),
            ("srsearch", term),
            ("srlimit", &limit),
            ("srnamespace", "0"),
            ("srprop", ""),
        ]))?;
        let hits = body.pointer("/query/search").and_then(Value::as_array).ok_or_else(|| malformed("query.search"))?;
        Ok(hits.iter().filter_map(|h| h.get("title")?.as_str().map(str::to_string)).collect())
    }

    fn page(&self, title: &str) -> Result<PageMeta, SourceError> {
        let base = params(&[
            ("action", "query"),
            ("prop", "info|pageassessments|revisions"),
            ("titles", title),
            ("rvprop", "ids|timestamp|size"),
            ("rvlimit", "max"),
            ("rvdir", "newer"),
            ("palimit", "max"),
        ]);
        let mut meta: Option<PageMeta> = None;
        self.query_all(&base, |body| {
            let Some(page) = first_page(body, title)? else {
                return Ok(());
            };
            let meta = match &mut meta {
                Some(m) => m,
                None => {
                    let page_id = page.get("pageid").and_then(Value::as_u64).ok_or_else(|| malformed("pageid"))?;
                    let canonical = page.get("title").and_then(Value::as_str).unwrap_or(title).to_string();
                    meta.insert(PageMeta {
                        title: canonical,
                        page_id,
                        assessment: AssessmentRating::default(),
                        revisions: Vec::new(),
                    })
                }
            };
            if let Some(projects) = page.get("pageassessments").and_then(Value::as_object) {
                for rating in projects.values() {
                    let label = |k: &str| rating.get(k).and_then(Value::as_str).unwrap_or("");
                    meta.assessment.quality = meta.assessment.quality.max(QualityClass::from_label(label("class")));
                    meta.assessment.importance =
                        meta.assessment.importance.max(ImportanceClass::from_label(label("importance")));
                }
            }
            for rev in page.get("revisions").and_then(Value::as_array).into_iter().flatten() {
                let rev_id = rev.get("revid").and_then(Value::as_u64).ok_or_else(|| malformed("revid"))?;
                let timestamp = rev
                    .get("timestamp")
                    .and_then(Value::as_str)
                    .and_then(|s| DateTime::parse_from_rfc3339(s).ok())
                    .ok_or_else(|| malformed("timestamp"))?
                    .with_timezone(&Utc);
                let size_bytes = rev.get("size").and_then(Value::as_u64).unwrap_or(0);
                meta.revisions.push(RevisionStamp { rev_id, timestamp, size_bytes });
            }
            Ok(())
        })?;
        let mut meta = meta.ok_or_else(|| SourceError::ArticleNotFound(title.to_string()))?;
        meta.revisions.sort_by_key(|r| r.rev_id);
        meta.revisions.dedup_by_key(|r| r.rev_id);
        Ok(meta)
    }

    fn revision_text(&self, title: &str, rev_id: u64) -> Result<String, SourceError> {
        let rev = rev_id.to_string();
        let body = self.request(&params(&[
            ("action", "query"),
            ("prop", "revisions"),
            ("revids", &rev),
            ("rvprop", "content"),
            ("rvslots", "main"),
        ]))?;
        if body.pointer("/query/badrevids").is_some() {
            return Err(SourceError::ArticleNotFound(format!("{title} (revision {rev_id})")));
        }
        body.pointer("/query/pages/0/revisions/0/slots/main/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| malformed("revision content"))
    }

    fn backlink_count(&self, title: &str) -> Result<u64, SourceError> {
        let base = params(&[
            ("action", "query"),
            ("list", "backlinks"),
            ("bltitle", title),
            ("blnamespace", "0"),
            ("bllimit", "max"),
            ("blfilterredir", "nonredirects"),
        ]);
        let mut titles = BTreeSet::new();
        self.query_all(&base, |body| {
            for link in body.pointer("/query/backlinks").and_then(Value::as_array).into_iter().flatten() {
                if let Some(t) = link.get("title").and_then(Value::as_str) {
                    titles.insert(t.to_string());
                }
            }
            Ok(())
        })?;
        Ok(titles.len() as u64)
    }

    fn url_citation_count(&self, url: &str) -> Result<u64, SourceError> {
        let (protocol, rest) = url.split_once("://").ok_or_else(|| SourceError::InvalidArgument(url.to_string()))?;
        let base = params(&[
            ("action", "query"),
            ("list", "exturlusage"),
            ("euprotocol", protocol),
            ("euquery", rest),
            ("eunamespace", "0"),
            ("eulimit", "max"),
            ("euprop", "title|url"),
        ]);
        // The API matches by prefix; keep exact matches only.
        let mut titles = BTreeSet::new();
        self.query_all(&base, |body| {
            for hit in body.pointer("/query/exturlusage").and_then(Value::as_array).into_iter().flatten() {
                let same = hit.get("url").and_then(Value::as_str).and_then(|u| normalize_url(u).ok());
                if same.as_deref() == Some(url) {
                    if let Some(t) = hit.get("title").and_then(Value::as_str) {
                        titles.insert(t.to_string());
                    }
                }
            }
            Ok(())
        })?;
        Ok(titles.len() as u64)
    }

    fn reference_time(&self) -> DateTime<Utc> {
        self.reference_time.unwrap_or_else(Utc::now)
    }
}
