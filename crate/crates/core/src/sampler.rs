//! URI sample construction: random and controlled directory samples,
//! fulltext-search result ingestion, and access-log sampling.
//!
//! Every sample holds unique hostified URIs. Inputs are deduplicated and
//! sorted before any random draw, so a sample depends only on the set of
//! inputs and the seed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memento_model::{ArchiveId, OriginalUri};
use crate::uri_tools::{hostify, TldExtractor, TldLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    DirectoryRandom,
    DirectoryTld,
    DirectoryLanguage,
    Fulltext,
    WaybackLog,
    AggregatorLog,
}

impl SourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::DirectoryRandom => "directory_random",
            SourceKind::DirectoryTld => "directory_tld",
            SourceKind::DirectoryLanguage => "directory_language",
            SourceKind::Fulltext => "fulltext",
            SourceKind::WaybackLog => "wayback_log",
            SourceKind::AggregatorLog => "aggregator_log",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "directory_random" => SourceKind::DirectoryRandom,
            "directory_tld" => SourceKind::DirectoryTld,
            "directory_language" => SourceKind::DirectoryLanguage,
            "fulltext" => SourceKind::Fulltext,
            "wayback_log" => SourceKind::WaybackLog,
            "aggregator_log" => SourceKind::AggregatorLog,
            other => return Err(format!("unknown sample source kind {other:?}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SampleEntry {
    pub uri: OriginalUri,
    pub tld: Option<TldLabel>,
    pub lang: Option<String>,
    pub source_archive: Option<ArchiveId>,
}

impl SampleEntry {
    pub fn new(uri: OriginalUri) -> Self {
        SampleEntry {
            uri,
            tld: None,
            lang: None,
            source_archive: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UriSample {
    pub name: String,
    pub source_kind: SourceKind,
    entries: Vec<SampleEntry>,
}

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("universe is empty after hostification and deduplication")]
    EmptyUniverse,
    #[error("no memento or TimeMap requests found in the log records")]
    NoExtractableRequests,
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("sample entry {0} is not hostified")]
    NotHostified(String),
    #[error("duplicate host {0} in sample")]
    DuplicateHost(String),
    #[error("invalid sample spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl UriSample {
    /// Validates that entries are hostified and unique, then sorts them by URI.
    pub fn new(
        name: impl Into<String>,
        source_kind: SourceKind,
        mut entries: Vec<SampleEntry>,
    ) -> Result<Self, SampleError> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            match hostify(e.uri.as_str()) {
                Ok(h) if h == e.uri => {}
                _ => return Err(SampleError::NotHostified(e.uri.to_string())),
            }
            if !seen.insert(e.uri.clone()) {
                return Err(SampleError::DuplicateHost(e.uri.to_string()));
            }
        }
        entries.sort();
        Ok(UriSample {
            name: name.into(),
            source_kind,
            entries,
        })
    }

    pub fn entries(&self) -> &[SampleEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn uris(&self) -> impl Iterator<Item = &OriginalUri> {
        self.entries.iter().map(|e| &e.uri)
    }

    pub fn get(&self, uri: &OriginalUri) -> Option<&SampleEntry> {
        self.entries
            .binary_search_by(|e| e.uri.cmp(uri))
            .ok()
            .map(|i| &self.entries[i])
    }

    /// Writes `uri<TAB>tld<TAB>lang<TAB>source_archive` rows.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.entries {
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                e.uri,
                e.tld.as_ref().map(TldLabel::as_str).unwrap_or(""),
                e.lang.as_deref().unwrap_or(""),
                e.source_archive.as_ref().map(ArchiveId::as_str).unwrap_or("")
            )?;
        }
        Ok(())
    }

    /// Reads the sample TSV format. A bare URI per line is also accepted;
    /// `#` lines are comments. URIs are hostified on read.
    pub fn read_tsv<R: BufRead>(name: impl Into<String>, source_kind: SourceKind, r: R) -> Result<Self, SampleError> {
        let mut by_uri: BTreeMap<OriginalUri, SampleEntry> = BTreeMap::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let raw = cols.next().unwrap_or("");
            let uri = hostify(raw).map_err(|e| SampleError::MalformedRow {
                line: lineno,
                reason: e.to_string(),
            })?;
            let field = |c: Option<&str>| c.map(str::trim).filter(|s| !s.is_empty()).map(str::to_owned);
            let tld = field(cols.next()).map(TldLabel::new);
            let lang = field(cols.next());
            let source_archive = match field(cols.next()) {
                Some(a) => Some(ArchiveId::new(a).map_err(|e| SampleError::MalformedRow {
                    line: lineno,
                    reason: e.to_string(),
                })?),
                None => None,
            };
            by_uri.entry(uri.clone()).or_insert(SampleEntry {
                uri,
                tld,
                lang,
                source_archive,
            });
        }
        UriSample::new(name, source_kind, by_uri.into_values().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSpec {
    pub rng_seed: u64,
    pub tld_fraction: f64,
    pub tld_floor: usize,
    pub per_language_count: usize,
}

impl SampleSpec {
    pub fn with_seed(rng_seed: u64) -> Self {
        SampleSpec {
            rng_seed,
            tld_fraction: 0.02,
            tld_floor: 100,
            per_language_count: 100,
        }
    }

    pub fn validate(&self) -> Result<(), SampleError> {
        if !(self.tld_fraction > 0.0 && self.tld_fraction <= 1.0) {
            return Err(SampleError::InvalidSpec(format!(
                "tld_fraction must be in (0, 1], got {}",
                self.tld_fraction
            )));
        }
        if self.tld_floor < 1 {
            return Err(SampleError::InvalidSpec("tld_floor must be at least 1".into()));
        }
        Ok(())
    }

    /// Hosts drawn from a TLD with `available` hosts:
    /// `min(available, max(ceil(fraction * available), floor))`.
    pub fn tld_quota(&self, available: usize) -> usize {
        let exact = self.tld_fraction * available as f64;
        // 0.02 * 5000 must give 100, not 101, despite binary rounding
        let share = if (exact - exact.round()).abs() <= 1e-9 * exact.max(1.0) {
            exact.round()
        } else {
            exact.ceil()
        } as usize;
        available.min(share.max(self.tld_floor))
    }

    fn rng(&self, stream: &str) -> ChaCha8Rng {
        // independent deterministic stream per stratum
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.rng_seed.to_le_bytes());
        let h = fnv1a(stream.as_bytes());
        seed[8..16].copy_from_slice(&h.to_le_bytes());
        ChaCha8Rng::from_seed(seed)
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Uniform sample without replacement of `min(n, len)` items, returned in
/// input order.
fn choose<T: Clone>(items: &[T], n: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    let n = n.min(items.len());
    let mut picked = index::sample(rng, items.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| items[i].clone()).collect()
}

/// Hostifies and dedups, silently dropping URIs without a usable host.
fn unique_hosts<'a, I: IntoIterator<Item = &'a str>>(universe: I) -> Vec<OriginalUri> {
    universe
        .into_iter()
        .filter_map(|u| hostify(u).ok())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

pub fn sample_random(
    name: &str,
    universe: &[OriginalUri],
    n: usize,
    spec: &SampleSpec,
) -> Result<UriSample, SampleError> {
    let hosts = unique_hosts(universe.iter().map(OriginalUri::as_str));
    if hosts.is_empty() {
        return Err(SampleError::EmptyUniverse);
    }
    let picked = choose(&hosts, n, &mut spec.rng("random"));
    UriSample::new(
        name,
        SourceKind::DirectoryRandom,
        picked.into_iter().map(SampleEntry::new).collect(),
    )
}

#[derive(Debug, Clone)]
pub struct TldSampleOutcome {
    pub sample: UriSample,
    /// `(tld, available, selected)` per requested TLD present in the universe.
    pub per_tld: Vec<(TldLabel, usize, usize)>,
    /// Requested TLDs with no host in the universe.
    pub unknown_tlds: Vec<TldLabel>,
}

pub fn sample_controlled_tld(
    name: &str,
    universe: &[OriginalUri],
    tlds: &[TldLabel],
    spec: &SampleSpec,
    extractor: &TldExtractor,
) -> Result<TldSampleOutcome, SampleError> {
    spec.validate()?;
    let hosts = unique_hosts(universe.iter().map(OriginalUri::as_str));
    if hosts.is_empty() {
        return Err(SampleError::EmptyUniverse);
    }
    let mut by_tld: BTreeMap<TldLabel, Vec<OriginalUri>> = BTreeMap::new();
    for h in hosts {
        if let Ok(t) = extractor.extract_uri(&h) {
            by_tld.entry(t).or_default().push(h);
        }
    }
    let wanted: BTreeSet<&TldLabel> = tlds.iter().collect();
    let mut entries = Vec::new();
    let mut per_tld = Vec::new();
    let mut unknown_tlds = Vec::new();
    for tld in wanted {
        let Some(avail) = by_tld.get(tld) else {
            unknown_tlds.push(tld.clone());
            continue;
        };
        let quota = spec.tld_quota(avail.len());
        let picked = choose(avail, quota, &mut spec.rng(&format!("tld:{tld}")));
        per_tld.push((tld.clone(), avail.len(), picked.len()));
        entries.extend(picked.into_iter().map(|uri| SampleEntry {
            tld: Some(tld.clone()),
            ..SampleEntry::new(uri)
        }));
    }
    Ok(TldSampleOutcome {
        sample: UriSample::new(name, SourceKind::DirectoryTld, entries)?,
        per_tld,
        unknown_tlds,
    })
}

/// Per-language sample. A host listed under several languages is kept only
/// under the lexicographically smallest one.
pub fn sample_controlled_language(
    name: &str,
    universe: &[(OriginalUri, String)],
    spec: &SampleSpec,
) -> Result<UriSample, SampleError> {
    let mut host_lang: BTreeMap<OriginalUri, String> = BTreeMap::new();
    for (uri, lang) in universe {
        let Ok(h) = hostify(uri.as_str()) else { continue };
        let lang = lang.trim().to_ascii_lowercase();
        if lang.is_empty() {
            continue;
        }
        host_lang
            .entry(h)
            .and_modify(|l| {
                if lang < *l {
                    *l = lang.clone()
                }
            })
            .or_insert(lang);
    }
    if host_lang.is_empty() {
        return Err(SampleError::EmptyUniverse);
    }
    let mut by_lang: BTreeMap<String, Vec<OriginalUri>> = BTreeMap::new();
    for (h, l) in host_lang {
        by_lang.entry(l).or_default().push(h);
    }
    let mut entries = Vec::new();
    for (lang, hosts) in &by_lang {
        let picked = choose(hosts, spec.per_language_count, &mut spec.rng(&format!("lang:{lang}")));
        entries.extend(picked.into_iter().map(|uri| SampleEntry {
            lang: Some(lang.clone()),
            ..SampleEntry::new(uri)
        }));
    }
    UriSample::new(name, SourceKind::DirectoryLanguage, entries)
}

/// One row of an archive fulltext-search result file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FulltextRow {
    pub archive: ArchiveId,
    pub query: String,
    pub rank: u32,
    pub uri: String,
}

impl FulltextRow {
    pub fn parse(line: &str) -> Result<Self, String> {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(format!("expected 4 tab-separated fields, got {}", cols.len()));
        }
        let archive = ArchiveId::new(cols[0].trim()).map_err(|e| e.to_string())?;
        let rank: u32 = cols[2].trim().parse().map_err(|_| format!("bad rank {:?}", cols[2]))?;
        if !(1..=10).contains(&rank) {
            return Err(format!("rank {rank} outside 1..=10"));
        }
        Ok(FulltextRow {
            archive,
            query: cols[1].to_owned(),
            rank,
            uri: cols[3].trim().to_owned(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct RowWarning {
    pub source: String,
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for RowWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.source, self.line, self.reason)
    }
}

#[derive(Debug, Clone)]
pub struct FulltextIngest {
    /// All hosts; each tagged with the first archive (in input order) that returned it.
    pub combined: UriSample,
    /// One sample per source archive, for cross-coverage.
    pub per_archive: BTreeMap<ArchiveId, UriSample>,
    pub warnings: Vec<RowWarning>,
}

impl FulltextIngest {
    pub fn counts_by_archive(&self) -> BTreeMap<ArchiveId, usize> {
        self.per_archive.iter().map(|(a, s)| (a.clone(), s.len())).collect()
    }
}

/// Ingests `(source name, reader)` pairs of fulltext result files. Malformed
/// rows, and rows whose URI has no usable host, are skipped with a warning.
pub fn ingest_fulltext_results<R: BufRead>(name: &str, files: Vec<(String, R)>) -> Result<FulltextIngest, SampleError> {
    let mut first_source: BTreeMap<OriginalUri, ArchiveId> = BTreeMap::new();
    let mut per: BTreeMap<ArchiveId, BTreeSet<OriginalUri>> = BTreeMap::new();
    let mut warnings = Vec::new();
    for (source, reader) in files {
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let warn = |reason: String| RowWarning {
                source: source.clone(),
                line: i + 1,
                reason,
            };
            let row = match FulltextRow::parse(&line) {
                Ok(r) => r,
                Err(reason) => {
                    warnings.push(warn(reason));
                    continue;
                }
            };
            let host = match hostify(&row.uri) {
                Ok(h) => h,
                Err(e) => {
                    warnings.push(warn(e.to_string()));
                    continue;
                }
            };
            first_source.entry(host.clone()).or_insert_with(|| row.archive.clone());
            per.entry(row.archive).or_default().insert(host);
        }
    }
    let combined = UriSample::new(
        name,
        SourceKind::Fulltext,
        first_source
            .into_iter()
            .map(|(uri, a)| SampleEntry {
                source_archive: Some(a),
                ..SampleEntry::new(uri)
            })
            .collect(),
    )?;
    let mut per_archive = BTreeMap::new();
    for (a, hosts) in per {
        let entries = hosts
            .into_iter()
            .map(|uri| SampleEntry {
                source_archive: Some(a.clone()),
                ..SampleEntry::new(uri)
            })
            .collect();
        per_archive.insert(
            a.clone(),
            UriSample::new(format!("{name}:{a}"), SourceKind::Fulltext, entries)?,
        );
    }
    Ok(FulltextIngest {
        combined,
        per_archive,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    Memento,
    TimeMap,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessLogRecord {
    pub timestamp: DateTime<Utc>,
    pub request_path: String,
    pub kind: RequestKind,
    /// Original resource embedded in the path, for memento/TimeMap requests.
    pub original: Option<String>,
}

/// Regular expressions classifying request paths. Each must have a capture
/// group named `uri` holding the embedded original resource.
#[derive(Debug, Clone)]
pub struct LogPatterns {
    pub memento: Vec<Regex>,
    pub timemap: Vec<Regex>,
}

pub const DEFAULT_MEMENTO_PATTERNS: &[&str] = &[r"^(?:/web)?/\d{14}(?:[a-z]{2}_)?/(?P<uri>.+)$"];
pub const DEFAULT_TIMEMAP_PATTERNS: &[&str] = &[r"^(?:/web)?/timemap/(?:link/)?(?P<uri>.+)$"];

impl Default for LogPatterns {
    fn default() -> Self {
        LogPatterns::new(DEFAULT_MEMENTO_PATTERNS, DEFAULT_TIMEMAP_PATTERNS).expect("built-in patterns compile")
    }
}

impl LogPatterns {
    pub fn new<S: AsRef<str>>(memento: &[S], timemap: &[S]) -> Result<Self, regex::Error> {
        let compile =
            |ps: &[S]| -> Result<Vec<Regex>, regex::Error> { ps.iter().map(|p| Regex::new(p.as_ref())).collect() };
        Ok(LogPatterns {
            memento: compile(memento)?,
            timemap: compile(timemap)?,
        })
    }

    pub fn classify(&self, path: &str) -> (RequestKind, Option<String>) {
        let grab = |res: &[Regex]| {
            res.iter().find_map(|re| {
                re.captures(path)
                    .and_then(|c| c.name("uri").map(|m| m.as_str().to_owned()))
            })
        };
        if let Some(u) = grab(&self.memento) {
            return (RequestKind::Memento, Some(u));
        }
        if let Some(u) = grab(&self.timemap) {
            return (RequestKind::TimeMap, Some(u));
        }
        (RequestKind::Other, None)
    }
}

/// Parses one common/combined log format line:
/// `host ident user [22/Feb/2012:00:00:00 +0000] "GET /path HTTP/1.1" status size ...`
pub fn parse_log_line(line: &str, patterns: &LogPatterns) -> Result<AccessLogRecord, String> {
    let open = line.find('[').ok_or("missing '[' timestamp")?;
    let close = line[open..].find(']').ok_or("unterminated timestamp")? + open;
    let timestamp = DateTime::parse_from_str(&line[open + 1..close], "%d/%b/%Y:%H:%M:%S %z")
        .map_err(|e| format!("bad timestamp: {e}"))?
        .with_timezone(&Utc);
    let rest = &line[close + 1..];
    let q1 = rest.find('"').ok_or("missing request line")?;
    let q2 = rest[q1 + 1..].find('"').ok_or("unterminated request line")? + q1 + 1;
    let request = &rest[q1 + 1..q2];
    let mut parts = request.split_whitespace();
    let _method = parts.next().ok_or("empty request line")?;
    let request_path = parts.next().ok_or("request line without a path")?.to_owned();
    let (kind, original) = patterns.classify(&request_path);
    Ok(AccessLogRecord {
        timestamp,
        request_path,
        kind,
        original,
    })
}

/// Extracts originals from memento/TimeMap requests, hostifies, dedups, and
/// samples `n` hosts uniformly.
pub fn sample_from_logs<I>(
    name: &str,
    kind: SourceKind,
    records: I,
    n: usize,
    spec: &SampleSpec,
) -> Result<UriSample, SampleError>
where
    I: IntoIterator<Item = AccessLogRecord>,
{
    let hosts: BTreeSet<OriginalUri> = records
        .into_iter()
        .filter(|r| r.kind != RequestKind::Other)
        .filter_map(|r| r.original)
        .filter_map(|u| hostify(&u).ok())
        .collect();
    if hosts.is_empty() {
        return Err(SampleError::NoExtractableRequests);
    }
    let hosts: Vec<_> = hosts.into_iter().collect();
    let picked = choose(&hosts, n, &mut spec.rng("logs"));
    UriSample::new(name, kind, picked.into_iter().map(SampleEntry::new).collect())
}

/// Reads a universe file: one URI per line, `#` comments.
pub fn read_universe<R: BufRead>(r: R) -> Result<Vec<OriginalUri>, SampleError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.split('\t').next().unwrap_or("").trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let uri = hostify(t).map_err(|e| SampleError::MalformedRow {
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(uri);
    }
    Ok(out)
}

/// Reads a language universe file: `uri<TAB>lang` per line. Extra middle
/// columns are ignored, so `uri<TAB>tld<TAB>lang` files load too.
pub fn read_language_universe<R: BufRead>(r: R) -> Result<Vec<(OriginalUri, String)>, SampleError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| SampleError::MalformedRow { line: i + 1, reason };
        let (u, l) = line
            .split_once('\t')
            .map(|(u, rest)| (u, rest.rsplit('\t').next().unwrap_or(rest)))
            .ok_or_else(|| bad("expected uri<TAB>lang".into()))?;
        let uri = hostify(u).map_err(|e| bad(e.to_string()))?;
        out.push((uri, l.trim().to_owned()));
    }
    Ok(out)
}
