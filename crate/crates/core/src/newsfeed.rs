//! Agriculture news from RSS/Atom feeds, keyword-filtered and cached.
//!
//! Readers get an `Arc` snapshot and never wait on a refresh; at most one
//! refresh runs at a time. A failed refresh keeps the previous articles and
//! marks the snapshot stale.

use std::collections::HashSet;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

pub const USER_AGENT: &str = concat!(
    "agroml-newsfeed/",
    env!("CARGO_PKG_VERSION"),
    " (+agriculture news reader)"
);
pub const DEFAULT_KEYWORDS: [&str; 4] = ["agriculture", "farming", "crop", "farmer"];
pub const DEFAULT_TTL: Duration = Duration::from_secs(900);
/// Upper bound on cached articles.
pub const MAX_ARTICLES: usize = 200;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NewsError {
    #[error("fetching {url} failed: {message}")]
    FetchFailed { url: String, message: String },
    #[error("parsing {url} failed: {message}")]
    ParseFailed { url: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub title: String,
    /// Absolute URL.
    pub link: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub published: Option<DateTime<Utc>>,
    pub source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
}

/// Case-insensitive substring match on title or summary. An empty keyword
/// list keeps everything.
pub fn matches_keywords(article: &Article, keywords: &[String]) -> bool {
    if keywords.is_empty() {
        return true;
    }
    let title = article.title.to_lowercase();
    let summary = article.summary.as_deref().unwrap_or("").to_lowercase();
    keywords.iter().any(|k| {
        let k = k.to_lowercase();
        title.contains(&k) || summary.contains(&k)
    })
}

/// Parses an RSS 2.0 or Atom document. Entries without a title or without a
/// resolvable absolute link are dropped.
pub fn parse_feed(
    bytes: &[u8],
    feed_url: &str,
    keywords: &[String],
) -> Result<Vec<Article>, NewsError> {
    let feed = feed_rs::parser::parse(bytes).map_err(|e| NewsError::ParseFailed {
        url: feed_url.to_string(),
        message: e.to_string(),
    })?;
    let base = Url::parse(feed_url).ok();
    let source = feed
        .title
        .as_ref()
        .map(|t| t.content.trim().to_string())
        .filter(|t| !t.is_empty())
        .or_else(|| base.as_ref().and_then(|u| u.host_str().map(str::to_string)))
        .unwrap_or_else(|| feed_url.to_string());

    let mut out = Vec::new();
    for entry in feed.entries {
        let Some(title) = entry
            .title
            .map(|t| t.content.trim().to_string())
            .filter(|t| !t.is_empty())
        else {
            continue;
        };
        let link = entry.links.iter().find_map(|l| {
            Url::parse(&l.href)
                .ok()
                .or_else(|| base.as_ref().and_then(|b| b.join(&l.href).ok()))
        });
        let Some(link) = link else { continue };
        let article = Article {
            title,
            link: link.to_string(),
            published: entry.published.or(entry.updated),
            source: source.clone(),
            summary: entry
                .summary
                .map(|s| s.content.trim().to_string())
                .filter(|s| !s.is_empty()),
        };
        if matches_keywords(&article, keywords) {
            out.push(article);
        }
    }
    Ok(out)
}

/// Source of raw feed documents.
pub trait FeedFetcher: Send + Sync {
    fn fetch(&self, url: &str) -> Result<Vec<u8>, NewsError>;
}

/// Plain HTTP GET with a fixed user-agent.
#[derive(Debug, Clone)]
pub struct HttpFetcher {
    client: reqwest::blocking::Client,
}

impl HttpFetcher {
    pub fn new(timeout: Duration) -> Result<Self, NewsError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent(USER_AGENT)
            .build()
            .map_err(|e| NewsError::FetchFailed {
                url: String::new(),
                message: e.to_string(),
            })?;
        Ok(Self { client })
    }
}

impl FeedFetcher for HttpFetcher {
    fn fetch(&self, url: &str) -> Result<Vec<u8>, NewsError> {
        let failed = |message: String| NewsError::FetchFailed {
            url: url.to_string(),
            message,
        };
        let resp = self
            .client
            .get(url)
            .send()
            .map_err(|e| failed(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(failed(format!("status {}", resp.status())));
        }
        Ok(resp.bytes().map_err(|e| failed(e.to_string()))?.to_vec())
    }
}

pub fn fetch_feed(
    fetcher: &dyn FeedFetcher,
    url: &str,
    keywords: &[String],
) -> Result<Vec<Article>, NewsError> {
    let bytes = fetcher.fetch(url)?;
    parse_feed(&bytes, url, keywords)
}

/// Merges `incoming` into `existing`: one article per link (the incoming copy
/// wins), newest first, undated last, capped at [`MAX_ARTICLES`].
pub fn merge_articles(existing: &[Article], incoming: Vec<Article>) -> Vec<Article> {
    let mut seen = HashSet::new();
    let mut merged: Vec<Article> = incoming
        .into_iter()
        .chain(existing.iter().cloned())
        .filter(|a| seen.insert(a.link.clone()))
        .collect();
    // stable: equal timestamps keep feed order
    merged.sort_by(|a, b| match (a.published, b.published) {
        (Some(x), Some(y)) => y.cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    merged.truncate(MAX_ARTICLES);
    merged
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedConfig {
    pub urls: Vec<String>,
    pub keywords: Vec<String>,
    pub ttl: Duration,
    /// Minimum spacing between attempts after a failed refresh.
    pub retry_interval: Duration,
}

impl Default for FeedConfig {
    fn default() -> Self {
        Self {
            urls: Vec::new(),
            keywords: DEFAULT_KEYWORDS.iter().map(|s| s.to_string()).collect(),
            ttl: DEFAULT_TTL,
            retry_interval: Duration::from_secs(60),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct FeedSnapshot {
    pub articles: Vec<Article>,
    /// Last refresh in which at least one feed succeeded.
    pub refreshed_at: Option<DateTime<Utc>>,
    pub last_attempt: Option<DateTime<Utc>>,
    pub last_error: Option<String>,
    /// Serving articles older than the TTL because refresh failed.
    pub stale: bool,
}

pub struct NewsFeed {
    config: FeedConfig,
    fetcher: Box<dyn FeedFetcher>,
    snapshot: RwLock<Arc<FeedSnapshot>>,
    refreshing: Mutex<()>,
}

impl std::fmt::Debug for NewsFeed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NewsFeed")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl NewsFeed {
    pub fn new(mut config: FeedConfig, fetcher: Box<dyn FeedFetcher>) -> Self {
        for k in &mut config.keywords {
            *k = k.to_lowercase();
        }
        Self {
            config,
            fetcher,
            snapshot: RwLock::new(Arc::new(FeedSnapshot::default())),
            refreshing: Mutex::new(()),
        }
    }

    pub fn config(&self) -> &FeedConfig {
        &self.config
    }

    /// Current snapshot without refreshing.
    pub fn snapshot(&self) -> Arc<FeedSnapshot> {
        self.snapshot
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
    }

    fn is_fresh(&self, snap: &FeedSnapshot, now: DateTime<Utc>) -> bool {
        let within = |t: Option<DateTime<Utc>>, d: Duration| {
            t.is_some_and(|t| {
                now.signed_duration_since(t)
                    .to_std()
                    .map_or(true, |age| age <= d)
            })
        };
        within(snap.refreshed_at, self.config.ttl)
            || (snap.last_error.is_some() && within(snap.last_attempt, self.config.retry_interval))
    }

    /// Serves the cache, refreshing first when it is older than the TTL.
    /// Never fails; if another thread is refreshing, returns the current
    /// snapshot immediately.
    pub fn get_articles(&self, now: DateTime<Utc>) -> Arc<FeedSnapshot> {
        let current = self.snapshot();
        if self.is_fresh(&current, now) {
            return current;
        }
        let Ok(_guard) = self.refreshing.try_lock() else {
            return current;
        };
        // another thread may have refreshed while we waited for the lock
        let current = self.snapshot();
        if self.is_fresh(&current, now) {
            return current;
        }
        let next = Arc::new(self.refresh(&current, now));
        *self.snapshot.write().unwrap_or_else(|e| e.into_inner()) = next.clone();
        next
    }

    fn refresh(&self, current: &FeedSnapshot, now: DateTime<Utc>) -> FeedSnapshot {
        let mut fresh = Vec::new();
        let mut errors = Vec::new();
        let mut any_ok = false;
        for url in &self.config.urls {
            match fetch_feed(self.fetcher.as_ref(), url, &self.config.keywords) {
                Ok(articles) => {
                    any_ok = true;
                    fresh.extend(articles);
                }
                Err(e) => errors.push(e.to_string()),
            }
        }
        let last_error = (!errors.is_empty()).then(|| errors.join("; "));
        if any_ok || self.config.urls.is_empty() {
            FeedSnapshot {
                articles: merge_articles(&current.articles, fresh),
                refreshed_at: Some(now),
                last_attempt: Some(now),
                last_error,
                stale: false,
            }
        } else {
            FeedSnapshot {
                articles: current.articles.clone(),
                refreshed_at: current.refreshed_at,
                last_attempt: Some(now),
                last_error,
                stale: true,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;
    use std::sync::atomic::{AtomicUsize, Ordering};

    const RSS: &str = r#"<?xml version="1.0"?>
<rss version="2.0"><channel><title>Farm Wire</title><link>https://news.example.org/</link>
<item><title>Crop prices rise</title><link>https://news.example.org/a</link><pubDate>Tue, 10 Jun 2025 09:00:00 GMT</pubDate></item>
<item><title>Football results</title><link>https://news.example.org/b</link><pubDate>Wed, 11 Jun 2025 09:00:00 GMT</pubDate></item>
<item><title>New CROP insurance</title><description>details</description><link>/c</link></item>
</channel></rss>"#;

    const ATOM: &str = r#"<?xml version="1.0" encoding="utf-8"?>
<feed xmlns="http://www.w3.org/2005/Atom"><title>Agri Atom</title><id>urn:x</id><updated>2025-06-12T00:00:00Z</updated>
<entry><title>Farmer cooperative expands</title><id>urn:1</id><link href="https://atom.example.org/1"/><updated>2025-06-12T00:00:00Z</updated></entry>
</feed>"#;

    const U1: &str = "https://news.example.org/rss";
    const U2: &str = "https://atom.example.org/feed";

    fn kw(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    struct MapFetcher {
        docs: Mutex<HashMap<String, Result<String, ()>>>,
        calls: AtomicUsize,
    }

    impl MapFetcher {
        fn new(pairs: &[(&str, Result<&str, ()>)]) -> Arc<Self> {
            Arc::new(Self {
                docs: Mutex::new(
                    pairs
                        .iter()
                        .map(|(u, d)| (u.to_string(), d.map(str::to_string)))
                        .collect(),
                ),
                calls: AtomicUsize::new(0),
            })
        }

        fn set(&self, url: &str, doc: Result<&str, ()>) {
            self.docs
                .lock()
                .unwrap()
                .insert(url.into(), doc.map(str::to_string));
        }
    }

    impl FeedFetcher for Arc<MapFetcher> {
        fn fetch(&self, url: &str) -> Result<Vec<u8>, NewsError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            match self.docs.lock().unwrap().get(url) {
                Some(Ok(d)) => Ok(d.clone().into_bytes()),
                _ => Err(NewsError::FetchFailed {
                    url: url.into(),
                    message: "connection refused".into(),
                }),
            }
        }
    }

    fn feed(fetcher: &Arc<MapFetcher>, urls: &[&str]) -> NewsFeed {
        let config = FeedConfig {
            urls: urls.iter().map(|s| s.to_string()).collect(),
            keywords: kw(&["Crop", "farmer"]),
            ..Default::default()
        };
        NewsFeed::new(config, Box::new(fetcher.clone()))
    }

    fn at(secs: i64) -> DateTime<Utc> {
        DateTime::from_timestamp(1_750_000_000 + secs, 0).unwrap()
    }

    #[test]
    fn keyword_filter_and_relative_links() {
        let articles = parse_feed(
            RSS.as_bytes(),
            "https://news.example.org/rss",
            &kw(&["crop"]),
        )
        .unwrap();
        assert_eq!(articles.len(), 2);
        assert_eq!(articles[1].link, "https://news.example.org/c");
        assert_eq!(articles[0].source, "Farm Wire");
        assert_eq!(
            parse_feed(RSS.as_bytes(), "https://x/", &[]).unwrap().len(),
            3
        );
    }

    #[test]
    fn atom_and_empty_and_malformed() {
        let a = parse_feed(
            ATOM.as_bytes(),
            "https://atom.example.org/feed",
            &kw(&["farmer"]),
        )
        .unwrap();
        assert_eq!(a.len(), 1);
        assert!(a[0].published.is_some());
        let empty = r#"<rss version="2.0"><channel><title>t</title></channel></rss>"#;
        assert!(parse_feed(empty.as_bytes(), "https://x/", &[])
            .unwrap()
            .is_empty());
        assert!(matches!(
            parse_feed(b"<rss><channel><item>", "https://x/", &[]),
            Err(NewsError::ParseFailed { .. })
        ));
    }

    #[test]
    fn merge_orders_and_dedups() {
        let a = parse_feed(RSS.as_bytes(), "https://news.example.org/rss", &[]).unwrap();
        let once = merge_articles(&[], a.clone());
        assert_eq!(merge_articles(&once, a), once);
        let links: Vec<&str> = once.iter().map(|a| a.link.as_str()).collect();
        assert_eq!(
            links,
            [
                "https://news.example.org/b",
                "https://news.example.org/a",
                "https://news.example.org/c"
            ]
        );
    }

    #[test]
    fn fresh_cache_skips_network() {
        let f = MapFetcher::new(&[(U1, Ok(RSS))]);
        let news = feed(&f, &[U1]);
        assert_eq!(news.get_articles(at(0)).articles.len(), 2);
        assert_eq!(news.get_articles(at(899)).articles.len(), 2);
        assert_eq!(f.calls.load(Ordering::SeqCst), 1);
        news.get_articles(at(901));
        assert_eq!(f.calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn stale_cache_survives_failure() {
        let f = MapFetcher::new(&[(U1, Ok(RSS))]);
        let news = feed(&f, &[U1]);
        news.get_articles(at(0));
        f.set(U1, Err(()));
        let snap = news.get_articles(at(1000));
        assert!(snap.stale);
        assert_eq!(snap.articles.len(), 2);
        assert!(snap
            .last_error
            .as_deref()
            .unwrap()
            .contains("connection refused"));
        // failed attempts are spaced by the retry interval
        news.get_articles(at(1030));
        assert_eq!(f.calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn cold_cache_failure_is_empty_and_stale() {
        let f = MapFetcher::new(&[]);
        let snap = feed(&f, &[U1]).get_articles(at(0));
        assert!(snap.stale && snap.articles.is_empty() && snap.last_error.is_some());
    }

    #[test]
    fn working_refresh_merges() {
        let f = MapFetcher::new(&[(U1, Ok(RSS)), (U2, Err(()))]);
        let news = feed(&f, &[U1, U2]);
        let first = news.get_articles(at(0));
        assert!(!first.stale && first.last_error.is_some());
        f.set(U2, Ok(ATOM));
        let snap = news.get_articles(at(2000));
        assert_eq!(snap.articles.len(), 3);
        assert!(snap.last_error.is_none());
        let links: HashSet<&str> = snap.articles.iter().map(|a| a.link.as_str()).collect();
        assert_eq!(links.len(), 3);
    }
}
