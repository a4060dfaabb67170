//! File-backed simulated archives and a seeded synthetic corpus generator.
//!
//! Corpus files hold one memento per line: `uri_r<TAB>uri_m<TAB>datetime`,
//! with the datetime in RFC 1123 form.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use chrono::{TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memento_model::{
    format_http_date, parse_http_date, ArchiveId, MementoRecord, OriginalUri, TimeMap, YearMonth,
};
use crate::sampler::fnv1a;
use crate::uri_tools::{hostify, TldExtractor, TldLabel};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}:{line}: {reason}")]
    MalformedRow { path: String, line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusRecord {
    pub uri_r: OriginalUri,
    pub uri_m: String,
    pub datetime: chrono::DateTime<Utc>,
}

/// One archive's holdings, indexed by original URI.
#[derive(Debug, Clone)]
pub struct SimCorpus {
    archive: ArchiveId,
    records: Vec<CorpusRecord>,
    index: HashMap<OriginalUri, Vec<usize>>,
}

impl SimCorpus {
    /// Builds a corpus; `uri_m` values must be unique and `uri_r` hostified.
    pub fn new(archive: ArchiveId, records: Vec<CorpusRecord>) -> Result<Self, String> {
        let mut seen = HashSet::with_capacity(records.len());
        let mut index: HashMap<OriginalUri, Vec<usize>> = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            if !seen.insert(r.uri_m.as_str()) {
                return Err(format!("duplicate uri_m {}", r.uri_m));
            }
            index.entry(r.uri_r.clone()).or_default().push(i);
        }
        Ok(SimCorpus {
            archive,
            records,
            index,
        })
    }

    pub fn archive(&self) -> &ArchiveId {
        &self.archive
    }

    pub fn records(&self) -> &[CorpusRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct original URIs held.
    pub fn originals(&self) -> impl Iterator<Item = &OriginalUri> {
        self.index.keys()
    }

    pub fn holds(&self, uri: &OriginalUri) -> bool {
        self.index.contains_key(uri)
    }

    /// Writes rows sorted by `(uri_r, datetime, uri_m)`.
    pub fn write<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut rows: Vec<&CorpusRecord> = self.records.iter().collect();
        rows.sort_by(|a, b| {
            (a.uri_r.as_str(), a.datetime, a.uri_m.as_str()).cmp(&(b.uri_r.as_str(), b.datetime, b.uri_m.as_str()))
        });
        for r in rows {
            writeln!(w, "{}\t{}\t{}", r.uri_r, r.uri_m, format_http_date(&r.datetime))?;
        }
        Ok(())
    }
}

/// Parses corpus rows. Any malformed row is fatal.
pub fn parse_corpus<R: BufRead>(archive: ArchiveId, reader: R, source: &str) -> Result<SimCorpus, CorpusError> {
    let mut records = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| CorpusError::Io {
            path: source.to_owned(),
            source: e,
        })?;
        if line.is_empty() {
            continue;
        }
        let bad = |reason: String| CorpusError::MalformedRow {
            path: source.to_owned(),
            line: lineno,
            reason,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(bad(format!("expected 3 tab-separated fields, got {}", cols.len())));
        }
        let uri_r = OriginalUri::parse(cols[0]).map_err(|e| bad(e.to_string()))?;
        match hostify(uri_r.as_str()) {
            Ok(h) if h == uri_r => {}
            _ => return Err(bad(format!("uri_r {uri_r} is not hostified"))),
        }
        if cols[1].is_empty() {
            return Err(bad("empty uri_m".into()));
        }
        let datetime = parse_http_date(cols[2]).ok_or_else(|| bad(format!("bad datetime {:?}", cols[2])))?;
        if let Some(prev) = seen.insert(cols[1].to_owned(), lineno) {
            return Err(bad(format!("duplicate uri_m {} (first on line {prev})", cols[1])));
        }
        records.push(CorpusRecord {
            uri_r,
            uri_m: cols[1].to_owned(),
            datetime,
        });
    }
    SimCorpus::new(archive, records).map_err(|reason| CorpusError::MalformedRow {
        path: source.to_owned(),
        line: 0,
        reason,
    })
}

pub fn load_corpus(path: &Path, archive: ArchiveId) -> Result<SimCorpus, CorpusError> {
    let file = fs::File::open(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_corpus(archive, io::BufReader::new(file), &path.display().to_string())
}

/// All records for `uri` as a TimeMap, or `None` when the archive has none.
pub fn serve_timemap(corpus: &SimCorpus, uri: &OriginalUri) -> Option<TimeMap> {
    let idx = corpus.index.get(uri)?;
    Some(TimeMap::new(
        uri.clone(),
        idx.iter().map(|&i| {
            let r = &corpus.records[i];
            MementoRecord::new(r.uri_m.clone(), r.datetime, corpus.archive.clone())
        }),
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UniverseEntry {
    pub uri: OriginalUri,
    pub tld: TldLabel,
    pub lang: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthArchive {
    pub id: ArchiveId,
    pub display_name: String,
    /// Inclusion probability per TLD.
    pub tld_affinity: BTreeMap<TldLabel, f64>,
    /// Inclusion probability for TLDs missing from `tld_affinity`.
    pub default_affinity: f64,
    pub start_month: YearMonth,
    /// No URI is first captured after this month; mementos continue.
    #[serde(default)]
    pub last_new_uri_month: Option<YearMonth>,
    pub mementos_per_uri: f64,
}

impl SynthArchive {
    pub fn affinity(&self, tld: &TldLabel) -> f64 {
        self.tld_affinity.get(tld).copied().unwrap_or(self.default_affinity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub rng_seed: u64,
    pub end_month: YearMonth,
    /// Use `sim://shared/...` memento URIs and archive-independent capture
    /// times so archives holding the same URI share memento URIs.
    #[serde(default)]
    pub collision_mode: bool,
    pub archives: Vec<SynthArchive>,
    #[serde(skip)]
    pub universe: Vec<UniverseEntry>,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut ids = HashSet::new();
        for a in &self.archives {
            if !ids.insert(&a.id) {
                return Err(CorpusError::InvalidSpec(format!("duplicate archive {}", a.id)));
            }
            let probs = a.tld_affinity.values().chain(std::iter::once(&a.default_affinity));
            for p in probs {
                if !(0.0..=1.0).contains(p) {
                    return Err(CorpusError::InvalidSpec(format!(
                        "{}: affinity {p} outside [0,1]",
                        a.id
                    )));
                }
            }
            if a.mementos_per_uri.is_nan() || a.mementos_per_uri < 1.0 {
                return Err(CorpusError::InvalidSpec(format!(
                    "{}: mementos_per_uri must be >= 1",
                    a.id
                )));
            }
            if a.start_month > self.end_month {
                return Err(CorpusError::InvalidSpec(format!(
                    "{}: start_month after end_month",
                    a.id
                )));
            }
        }
        for u in &self.universe {
            match hostify(u.uri.as_str()) {
                Ok(h) if h == u.uri => {}
                _ => {
                    return Err(CorpusError::InvalidSpec(format!(
                        "universe entry {} not hostified",
                        u.uri
                    )))
                }
            }
        }
        Ok(())
    }
}

fn stream(seed: u64, parts: &[&str]) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut h = 0u64;
    for (i, p) in parts.iter().enumerate() {
        h ^= fnv1a(p.as_bytes()).rotate_left(i as u32 * 17);
        h = h.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    }
    key[8..16].copy_from_slice(&h.to_le_bytes());
    key[16..24].copy_from_slice(&fnv1a(parts.join("\u{1}").as_bytes()).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Generates one corpus per archive. Each (archive, URI) pair draws from its
/// own seeded stream, so output does not depend on universe order.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Vec<SimCorpus>, CorpusError> {
    spec.validate()?;
    let global_start = spec
        .archives
        .iter()
        .map(|a| a.start_month)
        .min()
        .unwrap_or(spec.end_month);
    let mut out = Vec::with_capacity(spec.archives.len());
    for a in &spec.archives {
        let mut records = Vec::new();
        for u in &spec.universe {
            let mut incl = stream(spec.rng_seed, &["incl", a.id.as_str(), u.uri.as_str()]);
            if incl.random::<f64>() >= a.affinity(&u.tld) {
                continue;
            }
            let extra = if a.mementos_per_uri > 1.0 {
                Poisson::new(a.mementos_per_uri - 1.0)
                    .expect("positive rate")
                    .sample(&mut incl) as i64
            } else {
                0
            };
            let count = 1 + extra;

            let (mut dt, first_lo, first_hi) = if spec.collision_mode {
                (
                    stream(spec.rng_seed, &["dt", u.uri.as_str()]),
                    global_start,
                    spec.end_month,
                )
            } else {
                let cap = a.last_new_uri_month.map_or(spec.end_month, |m| m.min(spec.end_month));
                (
                    stream(spec.rng_seed, &["dt", a.id.as_str(), u.uri.as_str()]),
                    a.start_month,
                    cap,
                )
            };
            if first_hi < first_lo {
                continue;
            }
            let first = first_lo.add_months(dt.random_range(0..=first_hi.index() - first_lo.index()));
            let step = dt.random_range(1..=6i64);
            let mut seen = HashSet::new();
            for j in 0..count {
                let month = first.add_months(j * step).min(spec.end_month);
                let day = dt.random_range(1..=28u32);
                let (h, m, s) = (
                    dt.random_range(0..24u32),
                    dt.random_range(0..60u32),
                    dt.random_range(0..60u32),
                );
                let mut when = Utc
                    .with_ymd_and_hms(month.year, month.month, day, h, m, s)
                    .single()
                    .expect("day <= 28 is always valid");
                let prefix = if spec.collision_mode {
                    "shared".to_owned()
                } else {
                    a.id.to_string()
                };
                while !seen.insert(when) {
                    when += chrono::Duration::seconds(1);
                }
                records.push(CorpusRecord {
                    uri_r: u.uri.clone(),
                    uri_m: format!("sim://{prefix}/{}/{}", when.format("%Y%m%d%H%M%S"), u.uri),
                    datetime: when,
                });
            }
        }
        out.push(SimCorpus::new(a.id.clone(), records).map_err(CorpusError::InvalidSpec)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub rng_seed: u64,
    pub end_month: YearMonth,
    pub collision_mode: bool,
    pub archives: Vec<SynthArchive>,
    pub universe_file: String,
    pub universe_size: usize,
    /// Archive id to corpus file name, relative to the manifest.
    pub corpora: BTreeMap<ArchiveId, String>,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

/// Writes `<ID>.tsv` per archive, `universe.tsv`, and `manifest.json` into `dir`.
pub fn write_synthetic(spec: &SynthSpec, corpora: &[SimCorpus], dir: &Path) -> Result<PathBuf, CorpusError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files = BTreeMap::new();
    for c in corpora {
        let name = format!("{}.tsv", c.archive());
        let path = dir.join(&name);
        let mut buf = Vec::new();
        c.write(&mut buf).expect("write to Vec");
        fs::write(&path, buf).map_err(io_err(&path))?;
        files.insert(c.archive().clone(), name);
    }
    let upath = dir.join("universe.tsv");
    let mut ubuf = Vec::new();
    write_universe(&spec.universe, &mut ubuf).expect("write to Vec");
    fs::write(&upath, ubuf).map_err(io_err(&upath))?;

    let manifest = Manifest {
        rng_seed: spec.rng_seed,
        end_month: spec.end_month,
        collision_mode: spec.collision_mode,
        archives: spec.archives.clone(),
        universe_file: "universe.tsv".into(),
        universe_size: spec.universe.len(),
        corpora: files,
    };
    let mpath = dir.join("manifest.json");
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    fs::write(&mpath, json).map_err(io_err(&mpath))?;
    Ok(mpath)
}

/// Rebuilds the [`SynthSpec`] recorded in a manifest written by [`write_synthetic`].
pub fn read_manifest(path: &Path) -> Result<(Manifest, SynthSpec), CorpusError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| CorpusError::MalformedRow {
        path: path.display().to_string(),
        line: e.line(),
        reason: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let upath = base.join(&manifest.universe_file);
    let file = fs::File::open(&upath).map_err(io_err(&upath))?;
    let universe = read_universe(io::BufReader::new(file), &upath.display().to_string())?;
    let spec = SynthSpec {
        rng_seed: manifest.rng_seed,
        end_month: manifest.end_month,
        collision_mode: manifest.collision_mode,
        archives: manifest.archives.clone(),
        universe,
    };
    Ok((manifest, spec))
}

/// Loads every corpus listed in a manifest, in manifest (archive id) order.
pub fn load_manifest_corpora(path: &Path) -> Result<Vec<SimCorpus>, CorpusError> {
    let (manifest, _) = read_manifest(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    manifest
        .corpora
        .iter()
        .map(|(id, file)| load_corpus(&base.join(file), id.clone()))
        .collect()
}

/// `uri<TAB>tld<TAB>lang` rows.
pub fn write_universe<W: Write>(universe: &[UniverseEntry], mut w: W) -> io::Result<()> {
    for u in universe {
        writeln!(w, "{}\t{}\t{}", u.uri, u.tld, u.lang.as_deref().unwrap_or(""))?;
    }
    Ok(())
}

pub fn read_universe<R: BufRead>(r: R, source: &str) -> Result<Vec<UniverseEntry>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::Io {
            path: source.to_owned(),
            source: e,
        })?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| CorpusError::MalformedRow {
            path: source.to_owned(),
            line: i + 1,
            reason,
        };
        let mut cols = line.split('\t');
        let uri = hostify(cols.next().unwrap_or("")).map_err(|e| bad(e.to_string()))?;
        let tld = match cols.next().filter(|s| !s.is_empty()) {
            Some(t) => TldLabel::new(t),
            None => TldExtractor::default()
                .extract_uri(&uri)
                .map_err(|e| bad(e.to_string()))?,
        };
        let lang = cols.next().filter(|s| !s.is_empty()).map(str::to_owned);
        out.push(UniverseEntry { uri, tld, lang });
    }
    Ok(out)
}

const DEFAULT_TLD_MIX: &[(&str, usize, &str)] = &[
    ("com", 500, "eng"),
    ("org", 250, "eng"),
    ("net", 150, "eng"),
    ("uk", 150, "eng"),
    ("ca", 100, "eng"),
    ("pt", 120, "por"),
    ("cat", 80, "cat"),
    ("hr", 80, "hrv"),
    ("cz", 100, "cze"),
    ("tw", 80, "chi"),
    ("is", 80, "ice"),
    ("de", 80, "ger"),
    ("fr", 60, "fre"),
    ("jp", 60, "jpn"),
    ("cn", 50, "chi"),
    ("gov", 60, "eng"),
];

/// A universe of `size` hosts spread over sixteen TLDs in fixed proportions
/// (2,000 hosts at the reference size). Every fifth `.ca` host is French.
pub fn default_universe(size: usize) -> Vec<UniverseEntry> {
    let total: usize = DEFAULT_TLD_MIX.iter().map(|(_, n, _)| n).sum();
    let mut out = Vec::with_capacity(size);
    let mut i = 0usize;
    for (k, (tld, share, lang)) in DEFAULT_TLD_MIX.iter().enumerate() {
        let n = if k + 1 == DEFAULT_TLD_MIX.len() {
            size - out.len().min(size)
        } else {
            share * size / total
        };
        for j in 0..n {
            let lang = if *tld == "ca" && j % 5 == 4 { "fre" } else { lang };
            out.push(UniverseEntry {
                uri: OriginalUri::parse(format!("http://www.site{i:05}.{tld}")).expect("valid"),
                tld: TldLabel::new(*tld),
                lang: Some((*lang).to_owned()),
            });
            i += 1;
        }
    }
    out
}

fn ym(s: &str) -> YearMonth {
    s.parse().expect("valid literal month")
}

fn archive(
    id: &str,
    name: &str,
    default_affinity: f64,
    affinities: &[(&str, f64)],
    start: &str,
    last_new: Option<&str>,
    mean: f64,
) -> SynthArchive {
    SynthArchive {
        id: ArchiveId::new(id).expect("valid literal id"),
        display_name: name.to_owned(),
        tld_affinity: affinities.iter().map(|(t, p)| (TldLabel::new(*t), *p)).collect(),
        default_affinity,
        start_month: ym(start),
        last_new_uri_month: last_new.map(ym),
        mementos_per_uri: mean,
    }
}

/// Twelve archives: one generalist holding most of everything, a smaller
/// general-purpose service archive, and national archives with strong
/// affinity for their own TLDs.
pub fn default_archives() -> Vec<SynthArchive> {
    vec![
        archive(
            "IA",
            "Internet Archive",
            0.92,
            &[
                ("cat", 0.45),
                ("is", 0.5),
                ("hr", 0.5),
                ("cz", 0.55),
                ("pt", 0.55),
                ("tw", 0.4),
            ],
            "1996-10",
            None,
            6.0,
        ),
        archive(
            "LoC",
            "Library of Congress",
            0.02,
            &[("gov", 0.5), ("com", 0.05), ("org", 0.05)],
            "2000-06",
            Some("2008-12"),
            2.0,
        ),
        archive(
            "IC",
            "Icelandic Web Archive",
            0.06,
            &[("is", 0.9)],
            "2004-01",
            None,
            3.0,
        ),
        archive(
            "CAN",
            "Library & Archives Canada",
            0.0,
            &[("ca", 0.6)],
            "2005-06",
            Some("2009-12"),
            2.0,
        ),
        archive("BL", "British Library", 0.03, &[("uk", 0.55)], "2007-01", None, 3.0),
        archive("UK", "UK Gov. Web Archive", 0.08, &[("uk", 0.6)], "2003-01", None, 3.0),
        archive(
            "PO",
            "Portuguese Web Archive",
            0.07,
            &[("pt", 0.85)],
            "1996-01",
            None,
            3.0,
        ),
        archive(
            "CAT",
            "Web Archive of Catalonia",
            0.02,
            &[("cat", 0.8)],
            "2005-01",
            Some("2010-12"),
            3.0,
        ),
        archive("CR", "Croatian Web Archive", 0.0, &[("hr", 0.75)], "2004-06", None, 2.0),
        archive(
            "CZ",
            "Archive of the Czech Web",
            0.03,
            &[("cz", 0.8)],
            "2000-01",
            Some("2010-06"),
            3.0,
        ),
        archive(
            "TW",
            "National Taiwan University",
            0.01,
            &[("tw", 0.7), ("cn", 0.2), ("jp", 0.15)],
            "2007-01",
            None,
            2.0,
        ),
        archive(
            "AIT",
            "Archive-It",
            0.12,
            &[("com", 0.2), ("org", 0.2)],
            "2006-01",
            None,
            3.0,
        ),
    ]
}

/// The bundled reference spec: [`default_archives`] over a 2,000-host
/// [`default_universe`], captures through 2013-06.
pub fn default_spec(rng_seed: u64) -> SynthSpec {
    SynthSpec {
        rng_seed,
        end_month: ym("2013-06"),
        collision_mode: false,
        archives: default_archives(),
        universe: default_universe(2_000),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memento_model::{parse_link_format, serialize_link_format};

    fn small_spec(affinity: f64) -> SynthSpec {
        SynthSpec {
            rng_seed: 9,
            end_month: ym("2010-12"),
            collision_mode: false,
            archives: vec![archive("A", "A", affinity, &[], "2000-01", None, 3.0)],
            universe: default_universe(200),
        }
    }

    #[test]
    fn load_three_rows() {
        let text = "http://a.org\tsim://A/1\tMon, 01 Jan 2001 00:00:00 GMT\n\
                    http://a.org\tsim://A/2\tTue, 02 Jan 2001 00:00:00 GMT\n\
                    http://b.org\tsim://A/3\tTue, 02 Jan 2001 00:00:00 GMT\n";
        let c = parse_corpus(ArchiveId::new("A").unwrap(), text.as_bytes(), "t").unwrap();
        assert_eq!(c.len(), 3);
        let tm = serve_timemap(&c, &OriginalUri::parse("http://a.org").unwrap()).unwrap();
        assert_eq!(tm.len(), 2);
        let back = parse_link_format(&serialize_link_format(&tm), c.archive()).unwrap();
        assert_eq!(back, tm);
        assert!(serve_timemap(&c, &OriginalUri::parse("http://zzz.org").unwrap()).is_none());
    }

    #[test]
    fn duplicate_uri_m_is_fatal() {
        let text = "http://a.org\tsim://A/1\tMon, 01 Jan 2001 00:00:00 GMT\n\
                    http://b.org\tsim://A/1\tMon, 01 Jan 2001 00:00:00 GMT\n";
        match parse_corpus(ArchiveId::new("A").unwrap(), text.as_bytes(), "t") {
            Err(CorpusError::MalformedRow { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_rows_report_line() {
        for (text, line) in [
            ("http://a.org\tsim://A/1\n", 1),
            ("http://a.org\tsim://A/1\tMon, 01 Jan 2001 00:00:00 GMT\nhttp://a.org/x\tsim://A/2\tMon, 01 Jan 2001 00:00:00 GMT\n", 2),
            ("http://a.org\tsim://A/1\t2001-01-01\n", 1),
        ] {
            match parse_corpus(ArchiveId::new("A").unwrap(), text.as_bytes(), "t") {
                Err(CorpusError::MalformedRow { line: l, .. }) => assert_eq!(l, line),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let c = parse_corpus(ArchiveId::new("A").unwrap(), &b""[..], "t").unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn affinity_extremes() {
        let full = generate_synthetic(&small_spec(1.0)).unwrap();
        assert_eq!(full[0].originals().count(), 200);
        let none = generate_synthetic(&small_spec(0.0)).unwrap();
        assert!(none[0].is_empty());
    }

    #[test]
    fn generation_is_deterministic_and_prefixed() {
        let a = generate_synthetic(&small_spec(0.5)).unwrap();
        let b = generate_synthetic(&small_spec(0.5)).unwrap();
        let bytes = |c: &SimCorpus| {
            let mut v = Vec::new();
            c.write(&mut v).unwrap();
            v
        };
        assert_eq!(bytes(&a[0]), bytes(&b[0]));
        assert!(a[0].records().iter().all(|r| r.uri_m.starts_with("sim://A/")));
        let mut other = small_spec(0.5);
        other.rng_seed = 10;
        assert_ne!(bytes(&a[0]), bytes(&generate_synthetic(&other).unwrap()[0]));
    }

    #[test]
    fn last_new_uri_month_caps_first_captures() {
        let mut spec = small_spec(1.0);
        spec.archives[0].last_new_uri_month = Some(ym("2003-12"));
        let c = &generate_synthetic(&spec).unwrap()[0];
        let mut first: HashMap<&OriginalUri, YearMonth> = HashMap::new();
        for r in c.records() {
            let m = YearMonth::of(&r.datetime);
            first.entry(&r.uri_r).and_modify(|f| *f = (*f).min(m)).or_insert(m);
        }
        assert!(first.values().all(|m| *m <= ym("2003-12")));
        assert!(c.records().iter().any(|r| YearMonth::of(&r.datetime) > ym("2003-12")));
    }

    #[test]
    fn collision_mode_shares_uri_m() {
        let mut spec = small_spec(1.0);
        spec.collision_mode = true;
        spec.archives.push(archive("B", "B", 1.0, &[], "2000-01", None, 3.0));
        let cs = generate_synthetic(&spec).unwrap();
        let a: HashSet<&str> = cs[0].records().iter().map(|r| r.uri_m.as_str()).collect();
        let shared = cs[1].records().iter().filter(|r| a.contains(r.uri_m.as_str())).count();
        assert!(shared > 0);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = small_spec(1.5);
        assert!(generate_synthetic(&s).is_err());
        s = small_spec(0.5);
        s.archives[0].mementos_per_uri = 0.5;
        assert!(generate_synthetic(&s).is_err());
    }

    #[test]
    fn default_universe_shape() {
        let u = default_universe(2_000);
        assert_eq!(u.len(), 2_000);
        let uniq: HashSet<_> = u.iter().map(|e| &e.uri).collect();
        assert_eq!(uniq.len(), 2_000);
        assert_eq!(u.iter().filter(|e| e.tld.as_str() == "cat").count(), 80);
    }
}
