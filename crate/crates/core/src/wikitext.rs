//! Link extraction from raw wikitext.
//!
//! Historical graphs are rebuilt from stored revision text, so this module is
//! the only place that decides what counts as an article→article link or an
//! article→URL citation. It is a scanner, not a parser: templates are never
//! expanded, and malformed markup degrades to best-effort extraction.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::{Position, Url};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TitleError {
    #[error("title is empty")]
    EmptyTitle,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UrlError {
    #[error("not an http(s) URL: {0:?}")]
    NotAUrl(String),
}

/// Namespaces whose pages never become article nodes.
const EXCLUDED_NAMESPACES: &[&str] = &[
    "file",
    "image",
    "media",
    "category",
    "wikipedia",
    "wp",
    "project",
    "template",
    "help",
    "portal",
    "talk",
    "user",
    "special",
    "mediawiki",
    "module",
    "draft",
    "book",
    "timedtext",
    "education program",
    "gadget",
    "gadget definition",
];

/// Interwiki prefixes that are not two- or three-letter language codes.
const INTERWIKI_PREFIXES: &[&str] = &[
    "simple",
    "w",
    "wikt",
    "wiktionary",
    "wikibooks",
    "b",
    "wikiquote",
    "q",
    "wikisource",
    "s",
    "wikinews",
    "n",
    "wikiversity",
    "v",
    "wikivoyage",
    "voy",
    "commons",
    "c",
    "meta",
    "m",
    "species",
    "wikispecies",
    "mw",
    "d",
    "wikidata",
    "phab",
    "foundation",
    "wmf",
    "incubator",
    "outreach",
];

/// Internal and external links found in one piece of wikitext.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkExtraction {
    pub internal: Vec<String>,
    pub external: Vec<String>,
}

impl LinkExtraction {
    pub fn from_wikitext(wikitext: &str) -> Self {
        let visible = strip_hidden(wikitext);
        LinkExtraction {
            internal: internal_links(&visible, None),
            external: external_urls(&visible),
        }
    }
}

/// Canonical article title: underscores become spaces, whitespace runs are
/// collapsed, the anchor fragment is dropped and the first character is
/// uppercased.
pub fn normalize_title(raw: &str) -> Result<String, TitleError> {
    let without_anchor = match raw.find('#') {
        Some(pos) => &raw[..pos],
        None => raw,
    };
    let mut out = String::with_capacity(without_anchor.len());
    for word in without_anchor
        .split(|c: char| c == '_' || c.is_whitespace())
        .filter(|w| !w.is_empty())
    {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    let mut chars = out.chars();
    let first = chars.next().ok_or(TitleError::EmptyTitle)?;
    let mut title: String = first.to_uppercase().collect();
    title.push_str(chars.as_str());
    Ok(title)
}

/// Normalized http/https URL: lowercased scheme and host, no default port,
/// no fragment, and no trailing slash when the path is empty.
pub fn normalize_url(raw: &str) -> Result<String, UrlError> {
    let not_a_url = || UrlError::NotAUrl(raw.to_string());
    let mut url = Url::parse(raw.trim()).map_err(|_| not_a_url())?;
    if !matches!(url.scheme(), "http" | "https") {
        return Err(not_a_url());
    }
    match url.host_str() {
        Some(h) if !h.is_empty() => {}
        _ => return Err(not_a_url()),
    }
    url.set_fragment(None);
    if url.path() == "/" {
        return Ok(format!("{}{}", &url[..Position::AfterPort], &url[Position::AfterPath..]));
    }
    Ok(url.into())
}

/// Canonical titles of `[[...]]` links in first-occurrence order.
pub fn extract_internal_links(wikitext: &str) -> Vec<String> {
    internal_links(&strip_hidden(wikitext), None)
}

/// Like [`extract_internal_links`], but never returns `own_title`.
pub fn extract_outlinks(wikitext: &str, own_title: &str) -> Vec<String> {
    internal_links(&strip_hidden(wikitext), Some(own_title))
}

/// Normalized URLs from bracketed external links and bare URLs.
pub fn extract_external_urls(wikitext: &str) -> Vec<String> {
    external_urls(&strip_hidden(wikitext))
}

/// Replaces HTML comments and nowiki/pre spans with a single space each.
fn strip_hidden(text: &str) -> String {
    let lower = text.to_ascii_lowercase();
    let mut out = String::with_capacity(text.len());
    let mut pos = 0;
    while pos < text.len() {
        let rest = &lower[pos..];
        let skip_to = if rest.starts_with("<!--") {
            Some(find_from(&lower, pos + 4, "-->").map_or(text.len(), |e| e + 3))
        } else if rest.starts_with("<nowiki") || rest.starts_with("<pre") {
            let tag = if rest.starts_with("<nowiki") { "nowiki" } else { "pre" };
            let after_name = pos + 1 + tag.len();
            let boundary = lower[after_name..].chars().next();
            if matches!(boundary, Some('>' | '/' | ' ' | '\t' | '\n')) {
                let open_end = find_from(&lower, pos, ">").map_or(text.len(), |e| e + 1);
                if lower[..open_end].ends_with("/>") {
                    Some(open_end)
                } else {
                    let close = format!("</{tag}");
                    Some(match find_from(&lower, open_end, &close) {
                        Some(c) => find_from(&lower, c, ">").map_or(text.len(), |e| e + 1),
                        None => text.len(),
                    })
                }
            } else {
                None
            }
        } else {
            None
        };
        match skip_to {
            Some(end) => {
                out.push(' ');
                pos = end;
            }
            None => {
                let ch = text[pos..].chars().next().expect("pos is on a char boundary");
                out.push(ch);
                pos += ch.len_utf8();
            }
        }
    }
    out
}

fn find_from(haystack: &str, from: usize, needle: &str) -> Option<usize> {
    haystack.get(from..)?.find(needle).map(|i| i + from)
}

fn internal_links(text: &str, own_title: Option<&str>) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut search_from = 0;
    while let Some(open) = find_from(text, search_from, "[[") {
        search_from = open + 2;
        let Some(raw_target) = link_target(&text[open + 2..]) else {
            continue;
        };
        let Some(title) = classify_target(raw_target) else {
            continue;
        };
        if own_title == Some(title.as_str()) {
            continue;
        }
        if seen.insert(title.clone()) {
            out.push(title);
        }
    }
    out
}

/// The raw target of a link whose body starts at `body`, or `None` when the
/// link is not closed before markup that cannot appear in a title.
fn link_target(body: &str) -> Option<&str> {
    for (i, ch) in body.char_indices() {
        match ch {
            '|' => return Some(&body[..i]),
            ']' => return body[i..].starts_with("]]").then(|| &body[..i]),
            '[' | '{' | '}' | '<' | '>' | '\n' => return None,
            _ => {}
        }
    }
    None
}

fn classify_target(raw: &str) -> Option<String> {
    let target = raw.trim();
    let target = target.strip_prefix(':').unwrap_or(target).trim_start();
    if target.is_empty() || target.starts_with('#') {
        return None;
    }
    if let Some(colon) = target.find(':') {
        let prefix = target[..colon].trim().replace('_', " ").to_lowercase();
        let is_talk = prefix.ends_with(" talk");
        if is_talk
            || EXCLUDED_NAMESPACES.contains(&prefix.as_str())
            || INTERWIKI_PREFIXES.contains(&prefix.as_str())
            || is_language_code(&prefix)
        {
            return None;
        }
    }
    normalize_title(target).ok()
}

fn is_language_code(prefix: &str) -> bool {
    let mut parts = prefix.split('-');
    let head = parts.next().unwrap_or("");
    (2..=3).contains(&head.len())
        && head.chars().all(|c| c.is_ascii_lowercase())
        && parts.all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_alphanumeric()))
}

fn external_urls(text: &str) -> Vec<String> {
    let lower = text.to_ascii_lowercase();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut search_from = 0;
    while let Some(start) = find_from(&lower, search_from, "http") {
        search_from = start + 4;
        let rest = &lower[start..];
        if !(rest.starts_with("http://") || rest.starts_with("https://")) {
            continue;
        }
        let preceding = text[..start].chars().next_back();
        if preceding.is_some_and(|c| c.is_alphanumeric() || c == '/' || c == '.') {
            continue;
        }
        let bracketed = preceding == Some('[');
        let end = text[start..]
            .char_indices()
            .find(|&(_, c)| ends_url(c, bracketed))
            .map_or(text.len(), |(i, _)| start + i);
        let mut candidate = &text[start..end];
        if !bracketed {
            candidate = candidate.trim_end_matches([')', '.', ',', ';', ':', '!', '?', ']', '\'']);
        }
        search_from = start + candidate.len().max(4);
        if let Ok(url) = normalize_url(candidate) {
            if seen.insert(url.clone()) {
                out.push(url);
            }
        }
    }
    out
}

fn ends_url(c: char, bracketed: bool) -> bool {
    c.is_whitespace()
        || matches!(c, '<' | '>' | '"' | '[' | ']' | '{' | '}' | '|')
        || (!bracketed && c == '\u{a0}')
}
