//! Memento domain types and the `application/link-format` TimeMap codec.
//!
//! A [`TimeMap`] lists every known memento (URI-M plus Memento-Datetime) for
//! one original resource (URI-R). Records are kept sorted by datetime, ties
//! broken by the byte order of the memento URI, and memento URIs are unique.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Short archive token such as `IA` or `PO`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ArchiveId(String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid archive id {0:?}: expected [A-Za-z0-9_-]+")]
pub struct InvalidArchiveId(pub String);

impl ArchiveId {
    pub fn new(id: impl Into<String>) -> Result<Self, InvalidArchiveId> {
        let id = id.into();
        let ok = !id.is_empty() && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-');
        if ok {
            Ok(ArchiveId(id))
        } else {
            Err(InvalidArchiveId(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ArchiveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ArchiveId {
    type Err = InvalidArchiveId;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ArchiveId::new(s)
    }
}

impl TryFrom<String> for ArchiveId {
    type Error = InvalidArchiveId;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        ArchiveId::new(s)
    }
}

impl From<ArchiveId> for String {
    fn from(id: ArchiveId) -> String {
        id.0
    }
}

/// An archive id together with its human readable name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchiveInfo {
    pub id: ArchiveId,
    pub display_name: String,
}

/// Absolute URI of an original (live web) resource. Always carries a host.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct OriginalUri(String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("not an absolute URI with a host: {0:?}")]
pub struct InvalidOriginalUri(pub String);

impl OriginalUri {
    pub fn parse(value: impl Into<String>) -> Result<Self, InvalidOriginalUri> {
        let value = value.into();
        match url::Url::parse(&value) {
            Ok(u) if u.host_str().is_some_and(|h| !h.is_empty()) => Ok(OriginalUri(value)),
            _ => Err(InvalidOriginalUri(value)),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Host component as written (not lowercased for non-special schemes).
    pub fn host(&self) -> String {
        url::Url::parse(&self.0)
            .ok()
            .and_then(|u| u.host_str().map(str::to_owned))
            .unwrap_or_default()
    }
}

impl fmt::Display for OriginalUri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for OriginalUri {
    type Err = InvalidOriginalUri;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OriginalUri::parse(s)
    }
}

impl TryFrom<String> for OriginalUri {
    type Error = InvalidOriginalUri;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        OriginalUri::parse(s)
    }
}

impl From<OriginalUri> for String {
    fn from(u: OriginalUri) -> String {
        u.0
    }
}

/// One archived snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MementoRecord {
    pub uri_m: String,
    pub datetime: DateTime<Utc>,
    pub archive: ArchiveId,
}

impl MementoRecord {
    /// Builds a record, truncating the datetime to whole seconds.
    pub fn new(uri_m: impl Into<String>, datetime: DateTime<Utc>, archive: ArchiveId) -> Self {
        MementoRecord {
            uri_m: uri_m.into(),
            datetime: datetime.trunc_subsecs(0),
            archive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TimeMap {
    original: OriginalUri,
    mementos: Vec<MementoRecord>,
}

impl TimeMap {
    /// Builds a TimeMap from records in arbitrary order. Records with an
    /// already seen `uri_m` are dropped (first occurrence wins), the rest are
    /// sorted by `(datetime, uri_m)`. Empty `uri_m` values are dropped.
    pub fn new(original: OriginalUri, records: impl IntoIterator<Item = MementoRecord>) -> Self {
        let mut seen = HashSet::new();
        let mut mementos: Vec<MementoRecord> = records
            .into_iter()
            .filter(|r| !r.uri_m.is_empty() && seen.insert(r.uri_m.clone()))
            .collect();
        mementos.sort_by(|a, b| {
            a.datetime
                .cmp(&b.datetime)
                .then_with(|| a.uri_m.as_bytes().cmp(b.uri_m.as_bytes()))
        });
        TimeMap { original, mementos }
    }

    pub fn empty(original: OriginalUri) -> Self {
        TimeMap {
            original,
            mementos: Vec::new(),
        }
    }

    pub fn original(&self) -> &OriginalUri {
        &self.original
    }

    pub fn mementos(&self) -> &[MementoRecord] {
        &self.mementos
    }

    pub fn len(&self) -> usize {
        self.mementos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mementos.is_empty()
    }

    pub fn contains_uri_m(&self, uri_m: &str) -> bool {
        self.mementos.iter().any(|m| m.uri_m == uri_m)
    }
}

/// A UTC calendar month, written `YYYY-MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Option<Self> {
        (1..=12).contains(&month).then_some(YearMonth { year, month })
    }

    pub fn of(dt: &DateTime<Utc>) -> Self {
        YearMonth {
            year: dt.year(),
            month: dt.month(),
        }
    }

    /// Months since year 0, for arithmetic.
    pub fn index(self) -> i64 {
        i64::from(self.year) * 12 + i64::from(self.month) - 1
    }

    pub fn from_index(i: i64) -> Self {
        YearMonth {
            year: i.div_euclid(12) as i32,
            month: i.rem_euclid(12) as u32 + 1,
        }
    }

    pub fn add_months(self, n: i64) -> Self {
        YearMonth::from_index(self.index() + n)
    }

    /// Inclusive range of months from `self` to `end`.
    pub fn through(self, end: YearMonth) -> impl Iterator<Item = YearMonth> {
        (self.index()..=end.index()).map(YearMonth::from_index)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("expected YYYY-MM, got {s:?}");
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        let year = y.parse().map_err(|_| bad())?;
        let month = m.parse().map_err(|_| bad())?;
        YearMonth::new(year, month).ok_or_else(bad)
    }
}

impl TryFrom<String> for YearMonth {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<YearMonth> for String {
    fn from(m: YearMonth) -> String {
        m.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinkFormatError {
    #[error("malformed link at byte {offset}: {reason}")]
    MalformedLink { offset: usize, reason: String },
    #[error("no link with rel=\"original\"")]
    MissingOriginal,
    #[error("memento link <{uri_m}> has unparseable datetime {value:?}")]
    BadDatetime { uri_m: String, value: String },
}

const RFC1123: &str = "%a, %d %b %Y %H:%M:%S GMT";

/// Formats an instant as an RFC 1123 date in GMT.
pub fn format_http_date(dt: &DateTime<Utc>) -> String {
    dt.format(RFC1123).to_string()
}

/// Parses an RFC 1123 date (`Mon, 01 Jan 2001 00:00:00 GMT`).
pub fn parse_http_date(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    let naive = NaiveDateTime::parse_from_str(s, RFC1123).ok()?;
    let dt = naive.and_utc();
    // chrono does not cross-check the weekday for this format.
    if dt.format("%a").to_string() != s[..3] {
        return None;
    }
    Some(dt)
}

struct RawLink {
    offset: usize,
    target: String,
    params: Vec<(String, Option<String>)>,
}

impl RawLink {
    fn param(&self, name: &str) -> Option<&Option<String>> {
        self.params
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v)
    }

    fn rels(&self) -> Vec<String> {
        match self.param("rel") {
            Some(Some(v)) => v.split_ascii_whitespace().map(str::to_ascii_lowercase).collect(),
            _ => Vec::new(),
        }
    }
}

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.s[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn err(&self, reason: impl Into<String>) -> LinkFormatError {
        LinkFormatError::MalformedLink {
            offset: self.pos,
            reason: reason.into(),
        }
    }

    fn token(&mut self) -> &'a str {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if is_tchar(c)) {
            self.bump();
        }
        &self.s[start..self.pos]
    }

    fn quoted(&mut self) -> Result<String, LinkFormatError> {
        // opening quote already consumed
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(self.err("unterminated quoted string")),
                Some('"') => return Ok(out),
                Some('\\') => match self.bump() {
                    Some(c) => out.push(c),
                    None => return Err(self.err("dangling escape")),
                },
                Some(c) => out.push(c),
            }
        }
    }
}

fn is_tchar(c: char) -> bool {
    c.is_ascii_alphanumeric() || "!#$%&'*+-.^_`|~/:".contains(c)
}

fn parse_links(body: &str) -> Result<Vec<RawLink>, LinkFormatError> {
    let mut cur = Cursor { s: body, pos: 0 };
    let mut links = Vec::new();
    cur.skip_ws();
    if cur.peek().is_none() {
        return Ok(links);
    }
    loop {
        cur.skip_ws();
        let offset = cur.pos;
        if cur.bump() != Some('<') {
            return Err(LinkFormatError::MalformedLink {
                offset,
                reason: "expected '<'".into(),
            });
        }
        let start = cur.pos;
        let end = match body[start..].find('>') {
            Some(i) => start + i,
            None => return Err(cur.err("unterminated link target")),
        };
        let target = body[start..end].trim().to_string();
        if target.is_empty() {
            return Err(cur.err("empty link target"));
        }
        if target.contains('<') {
            return Err(cur.err("'<' inside link target"));
        }
        cur.pos = end + 1;
        let mut params = Vec::new();
        loop {
            cur.skip_ws();
            match cur.peek() {
                Some(';') => {
                    cur.bump();
                    cur.skip_ws();
                    let name = cur.token();
                    if name.is_empty() {
                        return Err(cur.err("expected parameter name"));
                    }
                    let name = name.to_ascii_lowercase();
                    cur.skip_ws();
                    let value = if cur.peek() == Some('=') {
                        cur.bump();
                        cur.skip_ws();
                        if cur.peek() == Some('"') {
                            cur.bump();
                            Some(cur.quoted()?)
                        } else {
                            let v = cur.token();
                            if v.is_empty() {
                                return Err(cur.err("expected parameter value"));
                            }
                            Some(v.to_string())
                        }
                    } else {
                        None
                    };
                    params.push((name, value));
                }
                Some(',') | None => break,
                Some(c) => return Err(cur.err(format!("unexpected character {c:?}"))),
            }
        }
        links.push(RawLink { offset, target, params });
        cur.skip_ws();
        match cur.bump() {
            None => break,
            Some(',') => {
                cur.skip_ws();
                if cur.peek().is_none() {
                    return Err(cur.err("trailing comma"));
                }
            }
            Some(_) => unreachable!("loop above stops only at ',' or end"),
        }
    }
    Ok(links)
}

/// Parses a link-format TimeMap body.
///
/// Mementos carry the `archive` link parameter when present (as emitted by
/// [`serialize_link_format`]); otherwise they are attributed to `archive`.
pub fn parse_link_format(body: &[u8], archive: &ArchiveId) -> Result<TimeMap, LinkFormatError> {
    let text = std::str::from_utf8(body).map_err(|e| LinkFormatError::MalformedLink {
        offset: e.valid_up_to(),
        reason: "body is not UTF-8".into(),
    })?;
    let links = parse_links(text)?;

    let mut original: Option<OriginalUri> = None;
    let mut records = Vec::new();
    for link in &links {
        let rels = link.rels();
        if rels.iter().any(|r| r == "original") {
            if original.is_some() {
                return Err(LinkFormatError::MalformedLink {
                    offset: link.offset,
                    reason: "more than one rel=\"original\" link".into(),
                });
            }
            let uri = OriginalUri::parse(link.target.clone()).map_err(|e| LinkFormatError::MalformedLink {
                offset: link.offset,
                reason: e.to_string(),
            })?;
            original = Some(uri);
        }
        if rels.iter().any(|r| r.contains("memento")) {
            let raw = match link.param("datetime") {
                Some(Some(v)) => v.clone(),
                _ => String::new(),
            };
            let datetime = parse_http_date(&raw).ok_or_else(|| LinkFormatError::BadDatetime {
                uri_m: link.target.clone(),
                value: raw.clone(),
            })?;
            let attributed = match link.param("archive") {
                Some(Some(v)) => ArchiveId::new(v.clone()).map_err(|e| LinkFormatError::MalformedLink {
                    offset: link.offset,
                    reason: e.to_string(),
                })?,
                _ => archive.clone(),
            };
            records.push(MementoRecord::new(link.target.clone(), datetime, attributed));
        }
    }
    let original = original.ok_or(LinkFormatError::MissingOriginal)?;
    Ok(TimeMap::new(original, records))
}

/// Emits the original link followed by one memento link per record, in
/// TimeMap order, separated by `,\n`. Output ends with a newline.
pub fn serialize_link_format(tm: &TimeMap) -> Vec<u8> {
    let mut out = format!("<{}>; rel=\"original\"", tm.original);
    for m in &tm.mementos {
        out.push_str(&format!(
            ",\n<{}>; rel=\"memento\"; datetime=\"{}\"; archive=\"{}\"",
            m.uri_m,
            format_http_date(&m.datetime),
            m.archive
        ));
    }
    out.push('\n');
    out.into_bytes()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MergeError {
    #[error("nothing to merge")]
    Empty,
    #[error("TimeMaps disagree on the original resource: {first} vs {other}")]
    MixedOriginals { first: String, other: String },
}

/// Key used to decide whether two originals denote the same resource.
fn original_key(uri: &OriginalUri) -> String {
    crate::uri_tools::hostify(uri.as_str())
        .map(|u| u.as_str().to_owned())
        .unwrap_or_else(|_| uri.as_str().to_owned())
}

/// Unions TimeMaps for the same original. On a shared `uri_m`, the record
/// from the earliest map in `maps` wins. The result's original is taken from
/// the first map.
pub fn merge_timemaps<'a, I>(maps: I) -> Result<TimeMap, MergeError>
where
    I: IntoIterator<Item = &'a TimeMap>,
{
    let mut iter = maps.into_iter();
    let first = iter.next().ok_or(MergeError::Empty)?;
    let key = original_key(&first.original);
    let mut records: Vec<MementoRecord> = first.mementos.clone();
    for tm in iter {
        if original_key(&tm.original) != key {
            return Err(MergeError::MixedOriginals {
                first: first.original.to_string(),
                other: tm.original.to_string(),
            });
        }
        records.extend(tm.mementos.iter().cloned());
    }
    Ok(TimeMap::new(first.original.clone(), records))
}
