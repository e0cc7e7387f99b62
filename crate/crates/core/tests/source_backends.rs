mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Duration;

use galaxysearch::source::mock::FixtureApiTransport;
use galaxysearch::source::{
    Backend, Backoff, Clock, FixtureBackend, ManualClock, MediaWikiBackend, Source, SourceError, TimeWindow,
};
use galaxysearch::wikitext::{extract_external_urls, extract_outlinks};

use common::*;

fn mediawiki_over(backend: Arc<FixtureBackend>, rate: f64) -> (MediaWikiBackend, Arc<FixtureApiTransport>, Arc<ManualClock>) {
    let clock = Arc::new(ManualClock::new());
    let transport = Arc::new(FixtureApiTransport::new(Arc::clone(&backend)).with_clock(clock.clone()));
    let mw = MediaWikiBackend::new(Arc::clone(&transport), rate, Backoff::default(), clock.clone())
        .with_reference_time(backend.reference_time());
    (mw, transport, clock)
}

/// Outlinks of every article's latest revision, read straight from the files.
fn latest_outlinks(backend: &FixtureBackend) -> BTreeMap<String, Vec<String>> {
    backend
        .corpus()
        .articles()
        .map(|a| (a.title.clone(), extract_outlinks(&a.revisions.last().unwrap().wikitext, &a.title)))
        .collect()
}

#[test]
fn search_examples() {
    let source = fixture_source("abortion");
    assert_eq!(source.search_seeds("abortion", 1).unwrap(), vec!["Abortion"]);
    assert!(source.search_seeds("zzz-no-such-topic", 5).unwrap().is_empty());
    assert!(matches!(source.search_seeds("   ", 5), Err(SourceError::EmptyQuery)));
    let several = source.search_seeds("abortion", 10).unwrap();
    assert_eq!(&several[..3], ["Abortion", "Abortion debate", "Abortion law"]);
}

#[test]
fn latest_record_has_expected_outlinks() {
    let source = fixture_source("abortion");
    let record = source.fetch_article("Abortion", None).unwrap();
    assert!(record.outlinks.iter().any(|l| l == "Abortion debate"));
    assert_eq!(record.revisions.len(), 14);
    assert_eq!(record.rev_id, record.revisions.last().unwrap().rev_id);
}

#[test]
fn backlink_counts_match_a_corpus_scan() {
    for name in ["abortion", "bias", "dsk", "dated-link"] {
        let backend = fixture_backend(name);
        let outlinks = latest_outlinks(&backend);
        let source = Source::new(backend);
        for title in outlinks.keys() {
            let scan = outlinks.values().filter(|links| links.contains(title)).count() as u64;
            assert_eq!(source.fetch_backlink_count(title).unwrap(), scan, "{name}: {title}");
        }
    }
    let source = fixture_source("abortion");
    assert_eq!(source.fetch_backlink_count("Abortion debate").unwrap(), 3);
}

#[test]
fn url_citation_counts_match_a_corpus_scan() {
    let backend = fixture_backend("abortion");
    let cited: Vec<BTreeSet<String>> = backend
        .corpus()
        .articles()
        .map(|a| extract_external_urls(&a.revisions.last().unwrap().wikitext).into_iter().collect())
        .collect();
    let all: BTreeSet<&String> = cited.iter().flatten().collect();
    let source = Source::new(fixture_backend("abortion"));
    let mut singles = 0;
    let mut shared = 0;
    for url in all {
        let scan = cited.iter().filter(|c| c.contains(url)).count() as u64;
        assert_eq!(source.fetch_url_citation_count(url).unwrap(), scan, "{url}");
        if scan == 1 {
            singles += 1;
        } else {
            shared += 1;
        }
    }
    assert!(singles > 0 && shared > 0);
}

#[test]
fn revision_counts_in_window() {
    let backend = fixture_backend("abortion");
    let window = TimeWindow::trailing_days(backend.reference_time(), 14).unwrap();
    let scan: BTreeMap<String, u64> = backend
        .corpus()
        .articles()
        .map(|a| {
            let n = a.revisions.iter().filter(|r| r.timestamp >= window.start() && r.timestamp < window.end()).count();
            (a.title.clone(), n as u64)
        })
        .collect();
    let source = Source::new(backend);
    for (title, n) in &scan {
        assert_eq!(source.fetch_revision_count(title, &window).unwrap(), *n, "{title}");
    }
    assert_eq!(scan["Abortion"], 12);
    assert_eq!(scan["Abortion debate"], 5);
}

#[test]
fn fixture_and_api_backends_agree() {
    for name in ["abortion", "bias", "dsk", "dated-link"] {
        let fixture = Arc::new(fixture_backend(name));
        let (api, _, _) = mediawiki_over(Arc::clone(&fixture), 1000.0);
        for term in ["a", "abortion", "jazz", "united", "strauss", "zzz"] {
            assert_eq!(fixture.search(term, 5).unwrap(), api.search(term, 5).unwrap(), "{name}: search {term}");
        }
        let mut urls = BTreeSet::new();
        for article in fixture.corpus().articles() {
            let title = &article.title;
            assert_eq!(fixture.page(title).unwrap(), api.page(title).unwrap(), "{name}: page {title}");
            for rev in &article.revisions {
                assert_eq!(
                    fixture.revision_text(title, rev.rev_id).unwrap(),
                    api.revision_text(title, rev.rev_id).unwrap()
                );
                urls.extend(extract_external_urls(&rev.wikitext));
            }
            assert_eq!(fixture.backlink_count(title).unwrap(), api.backlink_count(title).unwrap(), "{title}");
        }
        for url in &urls {
            assert_eq!(fixture.url_citation_count(url).unwrap(), api.url_citation_count(url).unwrap(), "{url}");
        }
        assert!(matches!(api.page("No such article"), Err(SourceError::ArticleNotFound(_))));
        assert!(matches!(fixture.page("No such article"), Err(SourceError::ArticleNotFound(_))));
    }
}

#[test]
fn requests_respect_the_rate_ceiling() {
    for rate in [2.0, 5.0, 7.5] {
        let fixture = Arc::new(fixture_backend("abortion"));
        let (api, transport, _) = mediawiki_over(Arc::clone(&fixture), rate);
        let source = Source::new(api);
        source.fetch_article("Abortion", None).unwrap();
        source.fetch_backlink_count("Roe v. Wade").unwrap();
        let times: Vec<Duration> = transport.requests().into_iter().map(|(t, _)| t).collect();
        assert!(times.len() > 10, "only {} requests", times.len());
        for (i, &t) in times.iter().enumerate() {
            let in_window = times[i..].iter().take_while(|&&u| u < t + Duration::from_secs(1)).count();
            assert!(in_window as f64 <= f64::ceil(rate), "rate {rate}: {in_window} requests within one second");
        }
    }
}

#[test]
fn throttling_backs_off_then_succeeds() {
    let fixture = Arc::new(fixture_backend("abortion"));
    let (api, transport, clock) = mediawiki_over(Arc::clone(&fixture), 1000.0);
    transport.fail_next([429, 503]);
    assert_eq!(api.backlink_count("Abortion debate").unwrap(), 3);
    let sleeps = clock.sleeps();
    assert!(sleeps.contains(&Duration::from_millis(500)));
    assert!(sleeps.contains(&Duration::from_secs(1)));

    transport.fail_next([500; 5]);
    let before = clock.now();
    assert!(matches!(api.backlink_count("Abortion"), Err(SourceError::BackendUnavailable(_))));
    assert!(clock.now() - before >= Duration::from_millis(500 + 1000 + 2000 + 4000));

    transport.fail_next([404]);
    assert!(matches!(api.page("Abortion"), Err(SourceError::BackendUnavailable(_))));
}

#[test]
fn memoized_source_does_not_refetch() {
    let backend = Arc::new(galaxysearch::source::Instrumented::new(fixture_backend("abortion")));
    let source = Source::new(Arc::clone(&backend));
    let first = source.fetch_article("Roe v. Wade", None).unwrap();
    let after_first = backend.requests();
    let second = source.fetch_article("Roe v. Wade", None).unwrap();
    assert_eq!(first, second);
    assert_eq!(backend.requests(), after_first);
}
