//! nDCG@k for comparing ranking variants against graded judgments.
//!
//! Ratings are 0 (not relevant), 1 (relevant) and 2 (highly relevant). The
//! gain of a hit is `2^r - 1`, discounted by `log(1 + p)` at position `p`,
//! and the sum is divided by the same quantity for the ideal ordering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wikitext;

pub const EVAL_SCHEMA: &str = "galaxysearch.eval/v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("invalid relevance label {0} (expected 0, 1 or 2)")]
    InvalidLabel(i64),
    #[error("no relevant items judged for query {0:?}")]
    NoRelevantItems(String),
    #[error("result list is empty")]
    EmptyResult,
    #[error("duplicate result key {0:?}")]
    DuplicateKey(String),
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Canonical form of an item key: URLs are normalized, titles canonicalized,
/// and `article:`/`web:` export prefixes stripped.
pub fn canonical_item(key: &str) -> String {
    let key = key.trim();
    let key = key.strip_prefix("article:").or_else(|| key.strip_prefix("web:")).unwrap_or(key);
    if let Ok(url) = wikitext::normalize_url(key) {
        return url;
    }
    wikitext::normalize_title(key).unwrap_or_else(|_| key.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct JudgmentSet {
    pub query: String,
    pub labels: BTreeMap<String, u8>,
}

impl JudgmentSet {
    pub fn new(query: impl Into<String>) -> Self {
        JudgmentSet { query: query.into(), labels: BTreeMap::new() }
    }

    pub fn insert(&mut self, item: &str, rating: i64) -> Result<(), EvalError> {
        let r = reward(rating)?;
        self.labels.insert(canonical_item(item), r as u8);
        Ok(())
    }

    pub fn label(&self, item: &str) -> u8 {
        self.labels.get(&canonical_item(item)).copied().unwrap_or(0)
    }

    /// Highly relevant items (rating 2).
    pub fn n_hr(&self) -> usize {
        self.labels.values().filter(|r| **r == 2).count()
    }

    /// Relevant items (rating 1).
    pub fn n_r(&self) -> usize {
        self.labels.values().filter(|r| **r == 1).count()
    }
}

/// An ordered result list without duplicates, keys canonicalized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedResult(Vec<String>);

impl RankedResult {
    pub fn new<S: AsRef<str>>(keys: impl IntoIterator<Item = S>) -> Result<Self, EvalError> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for k in keys {
            let k = canonical_item(k.as_ref());
            if !seen.insert(k.clone()) {
                return Err(EvalError::DuplicateKey(k));
            }
            out.push(k);
        }
        if out.is_empty() {
            return Err(EvalError::EmptyResult);
        }
        Ok(RankedResult(out))
    }

    pub fn keys(&self) -> &[String] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub k: usize,
    pub log_base: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { k: 10, log_base: 2.0 }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.k == 0 {
            return Err(EvalError::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.log_base.is_finite() && self.log_base > 1.0) {
            return Err(EvalError::InvalidConfig(format!("log base must exceed 1, got {}", self.log_base)));
        }
        Ok(())
    }
}

pub fn reward(label: i64) -> Result<u32, EvalError> {
    match label {
        0..=2 => Ok(label as u32),
        other => Err(EvalError::InvalidLabel(other)),
    }
}

/// The ratings of an ideal ordering: `n_hr` twos, then `n_r` ones, then
/// zeros, cut at `k`.
pub fn ideal_profile(n_hr: usize, n_r: usize, k: usize) -> Vec<u32> {
    (1..=k)
        .map(|p| {
            if p <= n_hr {
                2
            } else if p <= n_hr + n_r {
                1
            } else {
                0
            }
        })
        .collect()
}

fn discounted_gain(ratings: impl IntoIterator<Item = u32>, log_base: f64) -> f64 {
    ratings
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let p = (i + 1) as f64;
            (2f64.powi(r as i32) - 1.0) / (1.0 + p).log(log_base)
        })
        .sum()
}

/// Discounted gain of the ideal profile.
pub fn normalizer(n_hr: usize, n_r: usize, k: usize, log_base: f64) -> Result<f64, EvalError> {
    if n_hr + n_r == 0 {
        return Err(EvalError::NoRelevantItems(String::new()));
    }
    Ok(discounted_gain(ideal_profile(n_hr, n_r, k), log_base))
}

pub fn ndcg_at_k(result: &RankedResult, judgments: &JudgmentSet, cfg: &EvalConfig) -> Result<f64, EvalError> {
    cfg.validate()?;
    let norm = normalizer(judgments.n_hr(), judgments.n_r(), cfg.k, cfg.log_base)
        .map_err(|_| EvalError::NoRelevantItems(judgments.query.clone()))?;
    let ratings = result.keys().iter().take(cfg.k).map(|key| u32::from(judgments.labels.get(key).copied().unwrap_or(0)));
    Ok(discounted_gain(ratings, cfg.log_base) / norm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantScore {
    pub variant: String,
    pub ndcg: f64,
}

/// Scores every variant, best first (ties by name).
pub fn compare_variants(
    variants: &BTreeMap<String, RankedResult>,
    judgments: &JudgmentSet,
    cfg: &EvalConfig,
) -> Result<Vec<VariantScore>, EvalError> {
    let mut rows: Vec<VariantScore> = variants
        .par_iter()
        .map(|(name, result)| Ok(VariantScore { variant: name.clone(), ndcg: ndcg_at_k(result, judgments, cfg)? }))
        .collect::<Result<_, EvalError>>()?;
    rows.sort_by(|a, b| b.ndcg.total_cmp(&a.ndcg).then_with(|| a.variant.cmp(&b.variant)));
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub query: String,
    pub k: usize,
    pub log_base: f64,
    pub rows: Vec<VariantScore>,
}

impl EvalReport {
    pub fn new(query: &str, cfg: &EvalConfig, rows: Vec<VariantScore>) -> Self {
        EvalReport { schema: EVAL_SCHEMA.into(), query: query.into(), k: cfg.k, log_base: cfg.log_base, rows }
    }

    /// Two aligned columns: variant name and nDCG@k to six decimals.
    pub fn to_table(&self) -> String {
        let header = format!("nDCG@{}", self.k);
        let width = self.rows.iter().map(|r| r.variant.len()).chain(["variant".len()]).max().unwrap_or(0);
        let mut out = format!("{:<width$}  {header}\n", "variant");
        for r in &self.rows {
            writeln!(out, "{:<width$}  {:.6}", r.variant, r.ndcg).unwrap();
        }
        out
    }
}

/// Parses `query<TAB>item<TAB>rating` lines; `#` starts a comment line.
pub fn parse_judgments(text: &str) -> Result<BTreeMap<String, JudgmentSet>, EvalError> {
    let mut sets: BTreeMap<String, JudgmentSet> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let err = |message: String| EvalError::Parse { line: i + 1, message };
        let fields: Vec<&str> = line.split('\t').collect();
        let [query, item, rating] = fields[..] else {
            return Err(err(format!("expected 3 tab-separated fields, got {}", fields.len())));
        };
        let rating: i64 = rating.trim().parse().map_err(|_| err(format!("bad rating {rating:?}")))?;
        let query = query.trim();
        let set = sets.entry(query.to_string()).or_insert_with(|| JudgmentSet::new(query));
        let key = canonical_item(item);
        if let Some(prev) = set.labels.get(&key) {
            if i64::from(*prev) != rating {
                return Err(err(format!("conflicting ratings for {key:?}")));
            }
        }
        set.insert(item, rating).map_err(|e| err(e.to_string()))?;
    }
    Ok(sets)
}

/// Parses a result list: either one key per line (`#` comments allowed) or
/// a JSON document carrying a `ranking` array of keys.
pub fn parse_results(text: &str) -> Result<RankedResult, EvalError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        #[derive(Deserialize)]
        struct WithRanking {
            ranking: Vec<String>,
        }
        let doc: WithRanking =
            serde_json::from_str(trimmed).map_err(|e| EvalError::Parse { line: e.line(), message: e.to_string() })?;
        return RankedResult::new(doc.ranking);
    }
    RankedResult::new(text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')))
}
