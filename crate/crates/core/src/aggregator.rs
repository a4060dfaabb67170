//! TimeMap fan-out over archive endpoints, full and routed aggregation, and
//! the routing success metric.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use chrono::Utc;
use futures::stream::{self, StreamExt};
use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::memento_model::{merge_timemaps, parse_link_format, ArchiveId, OriginalUri, TimeMap};
use crate::profiler::{LookupOutcome, LookupResult};
use crate::router::ArchiveRanking;
use crate::sampler::fnv1a;
use crate::simarchive::{serve_timemap, SimCorpus};
use crate::uri_tools::hostify;

/// RFC 3986 unreserved characters pass through; everything else is escaped.
const URI_COMPONENT: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'.').remove(b'_').remove(b'~');

/// Seeded fault injection for simulated endpoints. Each (archive, URI) pair
/// draws once; the outcome is stable across runs.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FaultInjection {
    pub timeout_rate: f64,
    pub error_rate: f64,
    pub seed: u64,
}

impl FaultInjection {
    fn draw(&self, archive: &ArchiveId, uri: &OriginalUri) -> Option<LookupOutcome> {
        if self.timeout_rate <= 0.0 && self.error_rate <= 0.0 {
            return None;
        }
        let h = fnv1a(format!("{}\u{1}{}", archive, uri).as_bytes());
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ h);
        let u: f64 = rng.random();
        if u < self.timeout_rate {
            Some(LookupOutcome::Timeout)
        } else if u < self.timeout_rate + self.error_rate {
            Some(LookupOutcome::Error("injected fault".into()))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone)]
pub enum Transport {
    Http,
    Sim {
        corpus: Arc<SimCorpus>,
        faults: FaultInjection,
    },
}

#[derive(Debug, Clone)]
pub struct ArchiveEndpoint {
    pub archive: ArchiveId,
    pub display_name: String,
    pub timemap_uri_template: String,
    pub timeout: Duration,
    pub transport: Transport,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EndpointError {
    #[error("{archive}: template must contain exactly one {{uri}} placeholder: {template:?}")]
    BadTemplate { archive: String, template: String },
}

impl ArchiveEndpoint {
    pub fn new(
        archive: ArchiveId,
        display_name: impl Into<String>,
        template: impl Into<String>,
        timeout: Duration,
        transport: Transport,
    ) -> Result<Self, EndpointError> {
        let template = template.into();
        if template.matches("{uri}").count() != 1 {
            return Err(EndpointError::BadTemplate {
                archive: archive.to_string(),
                template,
            });
        }
        Ok(ArchiveEndpoint {
            archive,
            display_name: display_name.into(),
            timemap_uri_template: template,
            timeout,
            transport,
        })
    }

    /// A simulated endpoint over an in-memory corpus.
    pub fn sim(corpus: Arc<SimCorpus>, faults: FaultInjection) -> Self {
        let archive = corpus.archive().clone();
        ArchiveEndpoint {
            display_name: archive.to_string(),
            timemap_uri_template: format!("sim://{archive}/timemap/link/{{uri}}"),
            timeout: Duration::from_secs(1),
            transport: Transport::Sim { corpus, faults },
            archive,
        }
    }

    /// The TimeMap URL for `uri`, percent-encoded into the placeholder.
    pub fn timemap_url(&self, uri: &OriginalUri) -> String {
        let enc = utf8_percent_encode(uri.as_str(), URI_COMPONENT).to_string();
        self.timemap_uri_template.replacen("{uri}", &enc, 1)
    }
}

fn result(ep: &ArchiveEndpoint, uri: &OriginalUri, timemap: Option<TimeMap>, outcome: LookupOutcome) -> LookupResult {
    LookupResult {
        archive: ep.archive.clone(),
        original: uri.clone(),
        timemap,
        fetched_at: Utc::now(),
        outcome,
    }
}

async fn fetch_http(client: &reqwest::Client, ep: &ArchiveEndpoint, uri: &OriginalUri) -> LookupResult {
    let url = ep.timemap_url(uri);
    let request = async {
        let resp = client
            .get(&url)
            .header(reqwest::header::ACCEPT, "application/link-format")
            .send()
            .await?;
        let status = resp.status();
        let body = resp.bytes().await?;
        Ok::<_, reqwest::Error>((status, body))
    };
    match tokio::time::timeout(ep.timeout, request).await {
        Err(_) => result(ep, uri, None, LookupOutcome::Timeout),
        Ok(Err(e)) if e.is_timeout() => result(ep, uri, None, LookupOutcome::Timeout),
        Ok(Err(e)) => result(ep, uri, None, LookupOutcome::Error(e.to_string())),
        Ok(Ok((status, _))) if status == reqwest::StatusCode::NOT_FOUND => {
            result(ep, uri, None, LookupOutcome::NotFound)
        }
        Ok(Ok((status, body))) if status.is_success() => match parse_link_format(&body, &ep.archive) {
            Ok(tm) if same_resource(tm.original(), uri) => {
                let outcome = if tm.is_empty() {
                    LookupOutcome::NotFound
                } else {
                    LookupOutcome::Ok
                };
                result(ep, uri, Some(tm), outcome)
            }
            Ok(tm) => result(
                ep,
                uri,
                None,
                LookupOutcome::Error(format!("TimeMap is for {}, not {uri}", tm.original())),
            ),
            Err(e) => result(ep, uri, None, LookupOutcome::Error(e.to_string())),
        },
        Ok(Ok((status, _))) => result(ep, uri, None, LookupOutcome::Error(format!("HTTP {status}"))),
    }
}

fn same_resource(a: &OriginalUri, b: &OriginalUri) -> bool {
    if a == b {
        return true;
    }
    match (hostify(a.as_str()), hostify(b.as_str())) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

/// Looks up one URI in one archive. Failures become outcomes on the result.
pub async fn fetch_timemap(client: &reqwest::Client, ep: &ArchiveEndpoint, uri: &OriginalUri) -> LookupResult {
    match &ep.transport {
        Transport::Http => fetch_http(client, ep, uri).await,
        Transport::Sim { corpus, faults } => {
            if let Some(outcome) = faults.draw(&ep.archive, uri) {
                return result(ep, uri, None, outcome);
            }
            match serve_timemap(corpus, uri) {
                Some(tm) => result(ep, uri, Some(tm), LookupOutcome::Ok),
                None => result(ep, uri, None, LookupOutcome::NotFound),
            }
        }
    }
}

/// Fans TimeMap lookups out over a set of endpoints.
#[derive(Debug, Clone)]
pub struct Aggregator {
    endpoints: Vec<ArchiveEndpoint>,
    concurrency: usize,
    client: reqwest::Client,
}

impl Aggregator {
    pub fn new(endpoints: Vec<ArchiveEndpoint>, concurrency: usize) -> Self {
        Aggregator {
            endpoints,
            concurrency: concurrency.max(1),
            client: reqwest::Client::new(),
        }
    }

    pub fn endpoints(&self) -> &[ArchiveEndpoint] {
        &self.endpoints
    }

    pub fn archives(&self) -> Vec<ArchiveId> {
        self.endpoints.iter().map(|e| e.archive.clone()).collect()
    }

    /// Queries every endpoint for `uri`, at most `concurrency` at a time.
    /// Results come back in endpoint order whatever order they finish in.
    pub async fn lookup(&self, uri: &OriginalUri) -> Vec<LookupResult> {
        let mut out: Vec<(usize, LookupResult)> = stream::iter(self.endpoints.iter().enumerate())
            .map(|(i, ep)| async move { (i, fetch_timemap(&self.client, ep, uri).await) })
            .buffer_unordered(self.concurrency)
            .collect()
            .await;
        out.sort_by_key(|(i, _)| *i);
        out.into_iter().map(|(_, r)| r).collect()
    }

    /// Looks up many URIs, `jobs` URIs in flight at once. Output is ordered
    /// by URI (input order), then endpoint.
    pub async fn lookup_batch(&self, uris: &[OriginalUri], jobs: usize) -> Vec<LookupResult> {
        let mut out: Vec<(usize, Vec<LookupResult>)> = stream::iter(uris.iter().enumerate())
            .map(|(i, u)| async move { (i, self.lookup(u).await) })
            .buffer_unordered(jobs.max(1))
            .collect()
            .await;
        out.sort_by_key(|(i, _)| *i);
        out.into_iter().flat_map(|(_, r)| r).collect()
    }

    /// Looks up `uri` everywhere and aggregates against `ranking`.
    pub async fn aggregate_uri(
        &self,
        uri: &OriginalUri,
        ranking: &ArchiveRanking,
        exclude: &BTreeSet<ArchiveId>,
    ) -> Result<AggregationResult, AggregateError> {
        let lookups = self.lookup(uri).await;
        aggregate(uri, &lookups, ranking, exclude)
    }
}

/// Routed mementos over full mementos, kept as exact counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Success {
    pub routed: u64,
    pub full: u64,
}

impl Success {
    /// An empty full TimeMap counts as complete.
    pub fn value(self) -> f64 {
        if self.full == 0 {
            1.0
        } else {
            self.routed as f64 / self.full as f64
        }
    }

    pub fn is_vacuous(self) -> bool {
        self.full == 0
    }

    pub fn is_complete(self) -> bool {
        self.routed == self.full
    }

    /// Hundredths, rounded half up.
    pub fn hundredths(self) -> u64 {
        if self.full == 0 {
            return 100;
        }
        (self.routed * 200 + self.full) / (2 * self.full)
    }

    /// Index of the equal-width bin (out of `bins`) holding this value; 1.0
    /// falls in the last bin.
    pub fn bin(self, bins: u64) -> usize {
        if self.full == 0 {
            return bins as usize - 1;
        }
        ((self.routed * bins / self.full).min(bins - 1)) as usize
    }
}

impl fmt::Display for Success {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = self.hundredths();
        write!(f, "{}.{:02}", h / 100, h % 100)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArchiveOutcome {
    pub archive: ArchiveId,
    pub outcome: LookupOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregationResult {
    pub uri: OriginalUri,
    pub full: TimeMap,
    pub routed: TimeMap,
    pub outcomes: Vec<ArchiveOutcome>,
    pub success: Success,
    pub vacuous: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AggregateError {
    #[error("every archive failed for {0}")]
    AllArchivesFailed(String),
}

/// Builds the full TimeMap (all non-excluded archives that answered) and
/// the routed one (the ranking's chosen archives only). Lookups are merged
/// in archive-id order, so the result does not depend on arrival order.
pub fn aggregate(
    uri: &OriginalUri,
    lookups: &[LookupResult],
    ranking: &ArchiveRanking,
    exclude: &BTreeSet<ArchiveId>,
) -> Result<AggregationResult, AggregateError> {
    let mut relevant: Vec<&LookupResult> = lookups
        .iter()
        .filter(|r| !exclude.contains(&r.archive) && same_resource(&r.original, uri))
        .collect();
    relevant.sort_by(|a, b| a.archive.cmp(&b.archive));
    relevant.dedup_by(|a, b| a.archive == b.archive);
    if relevant.iter().all(|r| r.outcome.is_failure()) {
        return Err(AggregateError::AllArchivesFailed(uri.to_string()));
    }

    let found = |r: &&&LookupResult| r.found();
    let merge = |rs: Vec<&TimeMap>| {
        if rs.is_empty() {
            TimeMap::empty(uri.clone())
        } else {
            merge_timemaps(rs).expect("lookups share the original")
        }
    };
    let full = merge(
        relevant
            .iter()
            .filter(found)
            .filter_map(|r| r.timemap.as_ref())
            .collect(),
    );
    let routed = merge(
        relevant
            .iter()
            .filter(found)
            .filter(|r| ranking.chosen.contains(&r.archive))
            .filter_map(|r| r.timemap.as_ref())
            .collect(),
    );
    let success = Success {
        routed: routed.len() as u64,
        full: full.len() as u64,
    };
    Ok(AggregationResult {
        uri: uri.clone(),
        outcomes: relevant
            .iter()
            .map(|r| ArchiveOutcome {
                archive: r.archive.clone(),
                outcome: r.outcome.clone(),
            })
            .collect(),
        vacuous: success.is_vacuous(),
        full,
        routed,
        success,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memento_model::MementoRecord;
    use crate::router::RankedArchive;
    use crate::simarchive::parse_corpus;
    use chrono::TimeZone;

    fn a(id: &str) -> ArchiveId {
        ArchiveId::new(id).unwrap()
    }

    fn uri() -> OriginalUri {
        OriginalUri::parse("http://a.org").unwrap()
    }

    fn tm(archive: &str, n: usize) -> TimeMap {
        TimeMap::new(
            uri(),
            (0..n).map(|i| {
                MementoRecord::new(
                    format!("sim://{archive}/{i}"),
                    Utc.with_ymd_and_hms(2001, 1, 1, 0, 0, i as u32).unwrap(),
                    a(archive),
                )
            }),
        )
    }

    fn ok(archive: &str, n: usize) -> LookupResult {
        LookupResult {
            archive: a(archive),
            original: uri(),
            timemap: Some(tm(archive, n)),
            fetched_at: Utc::now(),
            outcome: LookupOutcome::Ok,
        }
    }

    fn failed(archive: &str) -> LookupResult {
        LookupResult {
            archive: a(archive),
            original: uri(),
            timemap: None,
            fetched_at: Utc::now(),
            outcome: LookupOutcome::Timeout,
        }
    }

    fn ranking(chosen: &[&str]) -> ArchiveRanking {
        ArchiveRanking {
            uri: uri(),
            tld: None,
            ranked: chosen
                .iter()
                .map(|c| RankedArchive {
                    archive: a(c),
                    score: 1.0,
                })
                .collect(),
            chosen: chosen.iter().map(|c| a(c)).collect(),
            fallback: false,
        }
    }

    #[test]
    fn success_display_rounds_half_up() {
        let s = Success { routed: 10, full: 15 };
        assert_eq!(s.to_string(), "0.67");
        assert_eq!(Success { routed: 1, full: 8 }.to_string(), "0.13");
        assert_eq!(Success { routed: 3, full: 3 }.to_string(), "1.00");
        assert_eq!(Success { routed: 0, full: 0 }.to_string(), "1.00");
    }

    #[test]
    fn ten_of_fifteen() {
        let lookups = vec![ok("IA", 10), ok("PO", 5)];
        let r = aggregate(&uri(), &lookups, &ranking(&["IA"]), &BTreeSet::new()).unwrap();
        assert_eq!(r.success, Success { routed: 10, full: 15 });
        assert!((r.success.value() - 2.0 / 3.0).abs() < 1e-15);
        assert!(!r.vacuous);
    }

    #[test]
    fn routed_equals_full() {
        let lookups = vec![ok("IA", 4), ok("PO", 0)];
        let r = aggregate(&uri(), &lookups, &ranking(&["IA"]), &BTreeSet::new()).unwrap();
        assert_eq!(r.success.value(), 1.0);
        assert!(r.success.is_complete());
    }

    #[test]
    fn vacuous_full() {
        let lookups = vec![ok("IA", 0), ok("PO", 0)];
        let r = aggregate(&uri(), &lookups, &ranking(&["IA"]), &BTreeSet::new()).unwrap();
        assert!(r.vacuous);
        assert_eq!(r.success.value(), 1.0);
    }

    #[test]
    fn all_failed() {
        let lookups = vec![failed("IA"), failed("PO")];
        assert!(aggregate(&uri(), &lookups, &ranking(&["IA"]), &BTreeSet::new()).is_err());
        let lookups = vec![failed("IA"), ok("PO", 2)];
        let r = aggregate(&uri(), &lookups, &ranking(&["IA"]), &BTreeSet::new()).unwrap();
        assert_eq!(r.success, Success { routed: 0, full: 2 });
    }

    #[test]
    fn exclusion_removes_archive_from_full() {
        let lookups = vec![ok("IA", 10), ok("PO", 5)];
        let ex = BTreeSet::from([a("IA")]);
        let r = aggregate(&uri(), &lookups, &ranking(&["PO"]), &ex).unwrap();
        assert_eq!(r.success, Success { routed: 5, full: 5 });
    }

    #[test]
    fn arrival_order_does_not_matter() {
        let mut shared = ok("PO", 2);
        shared.timemap = Some(TimeMap::new(
            uri(),
            tm("IA", 1).mementos().iter().map(|m| MementoRecord {
                archive: a("PO"),
                ..m.clone()
            }),
        ));
        let x = vec![ok("IA", 3), shared.clone(), ok("CZ", 1)];
        let y = vec![ok("CZ", 1), shared, ok("IA", 3)];
        let rx = aggregate(&uri(), &x, &ranking(&["IA"]), &BTreeSet::new()).unwrap();
        let ry = aggregate(&uri(), &y, &ranking(&["IA"]), &BTreeSet::new()).unwrap();
        assert_eq!(rx, ry);
        assert_eq!(rx.full.len(), 4);
    }

    #[test]
    fn template_validation_and_encoding() {
        assert!(ArchiveEndpoint::new(
            a("IA"),
            "IA",
            "http://x/{uri}/{uri}",
            Duration::from_secs(1),
            Transport::Http
        )
        .is_err());
        assert!(ArchiveEndpoint::new(a("IA"), "IA", "http://x/", Duration::from_secs(1), Transport::Http).is_err());
        let ep = ArchiveEndpoint::new(
            a("IA"),
            "IA",
            "http://x/timemap/link/{uri}",
            Duration::from_secs(1),
            Transport::Http,
        )
        .unwrap();
        assert_eq!(ep.timemap_url(&uri()), "http://x/timemap/link/http%3A%2F%2Fa.org");
    }

    #[tokio::test]
    async fn sim_transport_and_faults() {
        let text = "http://a.org\tsim://IA/1\tMon, 01 Jan 2001 00:00:00 GMT\n";
        let corpus = Arc::new(parse_corpus(a("IA"), text.as_bytes(), "t").unwrap());
        let client = reqwest::Client::new();
        let ep = ArchiveEndpoint::sim(corpus.clone(), FaultInjection::default());
        let r = fetch_timemap(&client, &ep, &uri()).await;
        assert_eq!(r.outcome, LookupOutcome::Ok);
        assert_eq!(r.timemap.unwrap().len(), 1);
        let r = fetch_timemap(&client, &ep, &OriginalUri::parse("http://b.org").unwrap()).await;
        assert_eq!(r.outcome, LookupOutcome::NotFound);

        let faulty = ArchiveEndpoint::sim(
            corpus,
            FaultInjection {
                timeout_rate: 1.0,
                error_rate: 0.0,
                seed: 1,
            },
        );
        let r = fetch_timemap(&client, &faulty, &uri()).await;
        assert_eq!(r.outcome, LookupOutcome::Timeout);
        assert!(r.timemap.is_none());
    }
}
