//! On-disk article corpora with the same semantics as the live backend.
//!
//! A corpus directory holds one JSON document per article:
//!
//! ```json
//! {
//!   "title": "Abortion",
//!   "page_id": 1,
//!   "assessment": { "quality": "GA", "importance": "Top" },
//!   "revisions": [
//!     { "rev_id": 101, "timestamp": "2011-09-01T10:00:00Z", "wikitext": "..." }
//!   ]
//! }
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AssessmentRating, Backend, ImportanceClass, PageMeta, QualityClass, RevisionStamp, SourceError};
use crate::wikitext::{self, LinkExtraction};

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("cannot read fixture {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed fixture {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("fixture article {0:?}: {1}")]
    Invalid(String, String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRevision {
    pub rev_id: u64,
    pub timestamp: DateTime<Utc>,
    pub wikitext: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureArticle {
    pub title: String,
    pub page_id: u64,
    #[serde(default)]
    pub assessment: AssessmentRating,
    pub revisions: Vec<FixtureRevision>,
}

impl FixtureArticle {
    fn stamps(&self) -> Vec<RevisionStamp> {
        self.revisions
            .iter()
            .map(|r| RevisionStamp { rev_id: r.rev_id, timestamp: r.timestamp, size_bytes: r.wikitext.len() as u64 })
            .collect()
    }
}

/// A validated set of fixture articles keyed by canonical title.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FixtureCorpus {
    articles: BTreeMap<String, FixtureArticle>,
}

impl FixtureCorpus {
    pub fn from_articles(articles: impl IntoIterator<Item = FixtureArticle>) -> Result<Self, FixtureError> {
        let mut map = BTreeMap::new();
        let mut page_ids = BTreeSet::new();
        let mut rev_ids = BTreeSet::new();
        for mut article in articles {
            let canonical = wikitext::normalize_title(&article.title)
                .map_err(|e| FixtureError::Invalid(article.title.clone(), e.to_string()))?;
            if canonical != article.title {
                return Err(FixtureError::Invalid(article.title, format!("title is not canonical (expected {canonical:?})")));
            }
            if article.page_id == 0 || !page_ids.insert(article.page_id) {
                return Err(FixtureError::Invalid(article.title, "page_id must be positive and unique".into()));
            }
            if article.revisions.is_empty() {
                return Err(FixtureError::Invalid(article.title, "no revisions".into()));
            }
            article.revisions.sort_by_key(|r| r.rev_id);
            let ordered = article
                .revisions
                .windows(2)
                .all(|w| w[0].rev_id < w[1].rev_id && w[0].timestamp < w[1].timestamp);
            if !ordered || article.revisions[0].rev_id == 0 {
                return Err(FixtureError::Invalid(
                    article.title,
                    "rev_ids must be positive and strictly increasing with timestamp".into(),
                ));
            }
            if !article.revisions.iter().all(|r| rev_ids.insert(r.rev_id)) {
                return Err(FixtureError::Invalid(article.title, "rev_id reused across articles".into()));
            }
            let title = article.title.clone();
            if map.insert(title.clone(), article).is_some() {
                return Err(FixtureError::Invalid(title, "duplicate title".into()));
            }
        }
        Ok(FixtureCorpus { articles: map })
    }

    /// Loads every `*.json` document in `dir`.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, FixtureError> {
        let dir = dir.as_ref();
        let io_err = |path: &Path, source| FixtureError::Io { path: path.to_path_buf(), source };
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| io_err(dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
            .collect();
        paths.sort();
        let mut articles = Vec::with_capacity(paths.len());
        for path in paths {
            let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
            let article = serde_json::from_str(&text).map_err(|source| FixtureError::Parse { path: path.clone(), source })?;
            articles.push(article);
        }
        FixtureCorpus::from_articles(articles)
    }

    /// Writes one document per article into `dir`, creating it if needed.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), FixtureError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|source| FixtureError::Io { path: dir.to_path_buf(), source })?;
        for article in self.articles.values() {
            let path = dir.join(format!("{}.json", file_stem(&article.title)));
            let mut text = serde_json::to_string_pretty(article).expect("fixture article serializes");
            text.push('\n');
            fs::write(&path, text).map_err(|source| FixtureError::Io { path, source })?;
        }
        Ok(())
    }

    pub fn get(&self, title: &str) -> Option<&FixtureArticle> {
        self.articles.get(title)
    }

    pub fn articles(&self) -> impl Iterator<Item = &FixtureArticle> {
        self.articles.values()
    }

    pub fn titles(&self) -> impl Iterator<Item = &str> {
        self.articles.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    /// Deterministic synthetic corpus of `n` articles for scale tests.
    ///
    /// Articles are grouped into topical clusters of about 30. Each article
    /// links to a few cluster mates (often reciprocated), occasionally to an
    /// article in another cluster, and to a handful of global hubs.
    pub fn synthetic(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let title = |i: usize| format!("Synthetic article {i:04}");
        let cluster_size = 30;
        let hubs: Vec<usize> = (0..n.min(5)).collect();
        let mut links: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for i in 0..n {
            let cluster_start = (i / cluster_size) * cluster_size;
            let cluster_end = (cluster_start + cluster_size).min(n);
            for _ in 0..rng.gen_range(2..6) {
                let j = rng.gen_range(cluster_start..cluster_end);
                if j != i {
                    links[i].insert(j);
                    if rng.gen_bool(0.4) {
                        links[j].insert(i);
                    }
                }
            }
            if rng.gen_bool(0.3) {
                let j = rng.gen_range(0..n);
                if j != i {
                    links[i].insert(j);
                }
            }
            if let Some(&hub) = hubs.choose(&mut rng) {
                if hub != i && rng.gen_bool(0.5) {
                    links[i].insert(hub);
                }
            }
        }
        let base = Utc.with_ymd_and_hms(2010, 1, 1, 0, 0, 0).unwrap();
        let qualities = [
            QualityClass::Unrated,
            QualityClass::Stub,
            QualityClass::Start,
            QualityClass::C,
            QualityClass::B,
            QualityClass::GA,
            QualityClass::FA,
        ];
        let importances = [
            ImportanceClass::Unrated,
            ImportanceClass::Low,
            ImportanceClass::Mid,
            ImportanceClass::High,
            ImportanceClass::Top,
        ];
        let articles = (0..n).map(|i| {
            let mut text = format!("'''{}''' is a synthetic article.\n", title(i));
            for &j in &links[i] {
                text.push_str(&format!("* [[{}]]\n", title(j)));
            }
            if rng.gen_bool(0.5) {
                text.push_str(&format!("<ref>[http://example.org/s/{} Source]</ref>\n", i % 97));
            }
            let revs = rng.gen_range(1..4u64);
            let revisions = (0..revs)
                .map(|r| FixtureRevision {
                    rev_id: (i as u64 + 1) * 10 + r,
                    timestamp: base + Duration::hours((i as i64) * 3 + (r as i64) * 24 * 7),
                    wikitext: if r + 1 == revs { text.clone() } else { format!("'''{}''' draft {r}.", title(i)) },
                })
                .collect();
            FixtureArticle {
                title: title(i),
                page_id: i as u64 + 1,
                assessment: AssessmentRating {
                    quality: *qualities.choose(&mut rng).unwrap(),
                    importance: *importances.choose(&mut rng).unwrap(),
                },
                revisions,
            }
        });
        let articles: Vec<_> = articles.collect();
        FixtureCorpus::from_articles(articles).expect("synthetic corpus is valid")
    }
}

/// Filesystem-safe stem for an article title.
fn file_stem(title: &str) -> String {
    title
        .chars()
        .map(|c| if c.is_alphanumeric() || matches!(c, '-' | '.' | '(' | ')') { c } else { '_' })
        .collect()
}

/// Offline [`Backend`] over a [`FixtureCorpus`].
pub struct FixtureBackend {
    corpus: FixtureCorpus,
    latest: HashMap<String, LinkExtraction>,
    reference_time: DateTime<Utc>,
}

impl FixtureBackend {
    pub fn new(corpus: FixtureCorpus) -> Self {
        let latest = corpus
            .articles()
            .map(|a| {
                let text = &a.revisions.last().expect("validated non-empty").wikitext;
                let mut links = LinkExtraction::from_wikitext(text);
                links.internal.retain(|t| *t != a.title);
                (a.title.clone(), links)
            })
            .collect();
        let reference_time = corpus
            .articles()
            .filter_map(|a| a.revisions.last().map(|r| r.timestamp))
            .max()
            .map_or_else(|| Utc.timestamp_opt(0, 0).unwrap(), |t| t + Duration::seconds(1));
        FixtureBackend { corpus, latest, reference_time }
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, FixtureError> {
        Ok(FixtureBackend::new(FixtureCorpus::load(dir)?))
    }

    pub fn corpus(&self) -> &FixtureCorpus {
        &self.corpus
    }

    fn article(&self, title: &str) -> Result<&FixtureArticle, SourceError> {
        self.corpus.get(title).ok_or_else(|| SourceError::ArticleNotFound(title.to_string()))
    }

    /// Titles of articles whose latest revision links to `title`.
    pub fn backlinks(&self, title: &str) -> Vec<String> {
        self.corpus
            .titles()
            .filter(|t| self.latest[*t].internal.iter().any(|l| l == title))
            .map(str::to_string)
            .collect()
    }

    /// Titles of articles whose latest revision cites `url`.
    pub fn citing_articles(&self, url: &str) -> Vec<String> {
        self.corpus
            .titles()
            .filter(|t| self.latest[*t].external.iter().any(|u| u == url))
            .map(str::to_string)
            .collect()
    }
}

impl Backend for FixtureBackend {
    /// Relevance order: exact title match, title prefix, title substring, then
    /// articles whose latest text mentions the term (most mentions first).
    /// Ties are broken by title.
    fn search(&self, term: &str, limit: usize) -> Result<Vec<String>, SourceError> {
        let needle = term.trim().to_lowercase();
        if needle.is_empty() {
            return Err(SourceError::EmptyQuery);
        }
        let mut hits: Vec<(u8, usize, &str)> = self
            .corpus
            .articles()
            .filter_map(|a| {
                let title = a.title.to_lowercase();
                let text = a.revisions.last()?.wikitext.to_lowercase();
                let mentions = text.matches(&needle).count();
                let tier = if title == needle {
                    0
                } else if title.starts_with(&needle) {
                    1
                } else if title.contains(&needle) {
                    2
                } else if mentions > 0 {
                    3
                } else {
                    return None;
                };
                Some((tier, mentions, a.title.as_str()))
            })
            .collect();
        hits.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(b.2)));
        Ok(hits.into_iter().take(limit).map(|h| h.2.to_string()).collect())
    }

    fn page(&self, title: &str) -> Result<PageMeta, SourceError> {
        let a = self.article(title)?;
        Ok(PageMeta { title: a.title.clone(), page_id: a.page_id, assessment: a.assessment, revisions: a.stamps() })
    }

    fn revision_text(&self, title: &str, rev_id: u64) -> Result<String, SourceError> {
        self.article(title)?
            .revisions
            .iter()
            .find(|r| r.rev_id == rev_id)
            .map(|r| r.wikitext.clone())
            .ok_or_else(|| SourceError::ArticleNotFound(format!("{title} (revision {rev_id})")))
    }

    fn backlink_count(&self, title: &str) -> Result<u64, SourceError> {
        self.article(title)?;
        Ok(self.backlinks(title).len() as u64)
    }

    fn url_citation_count(&self, url: &str) -> Result<u64, SourceError> {
        Ok(self.citing_articles(url).len() as u64)
    }

    fn reference_time(&self) -> DateTime<Utc> {
        self.reference_time
    }
}
