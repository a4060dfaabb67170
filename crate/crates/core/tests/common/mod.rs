//! Brute-force recounts straight from the fixture files. Nothing here goes
//! through the library's parsers, lookups, or profile code.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Datelike, Utc};
use serde_json::{json, Map, Value};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn synth_dir() -> PathBuf {
    fixtures().join("synth42")
}

pub fn manifest_path() -> PathBuf {
    synth_dir().join("manifest.json")
}

#[derive(Debug, Clone)]
pub struct Capture {
    pub when: DateTime<Utc>,
    pub uri_m: String,
}

pub struct Oracle {
    /// Manifest order.
    pub archives: Vec<String>,
    /// archive -> uri_r -> captures, sorted by time.
    pub holdings: BTreeMap<String, BTreeMap<String, Vec<Capture>>>,
    /// (uri, tld, lang) in file order.
    pub universe: Vec<(String, String, String)>,
}

impl Oracle {
    pub fn load(dir: &Path) -> Oracle {
        let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
        let archives: Vec<String> = manifest["archives"]
            .as_array()
            .unwrap()
            .iter()
            .map(|a| a["id"].as_str().unwrap().to_string())
            .collect();
        let mut holdings = BTreeMap::new();
        for a in &archives {
            let file = manifest["corpora"][a.as_str()].as_str().unwrap();
            let mut per: BTreeMap<String, Vec<Capture>> = BTreeMap::new();
            for line in fs::read_to_string(dir.join(file)).unwrap().lines() {
                let f: Vec<&str> = line.split('\t').collect();
                assert_eq!(f.len(), 3, "{line}");
                let when = DateTime::parse_from_rfc2822(f[2]).unwrap().with_timezone(&Utc);
                per.entry(f[0].to_string()).or_default().push(Capture {
                    when,
                    uri_m: f[1].to_string(),
                });
            }
            for caps in per.values_mut() {
                caps.sort_by(|x, y| (x.when, &x.uri_m).cmp(&(y.when, &y.uri_m)));
            }
            holdings.insert(a.clone(), per);
        }
        let ufile = manifest["universe_file"].as_str().unwrap();
        let universe = fs::read_to_string(dir.join(ufile))
            .unwrap()
            .lines()
            .map(|l| {
                let f: Vec<&str> = l.split('\t').collect();
                (f[0].to_string(), f[1].to_string(), f[2].to_string())
            })
            .collect();
        Oracle {
            archives,
            holdings,
            universe,
        }
    }

    pub fn fixture() -> Oracle {
        Oracle::load(&synth_dir())
    }

    pub fn holds(&self, archive: &str, uri: &str) -> bool {
        self.holdings[archive].contains_key(uri)
    }

    pub fn holders(&self, uri: &str) -> BTreeSet<String> {
        self.archives.iter().filter(|a| self.holds(a, uri)).cloned().collect()
    }

    pub fn universe_uris(&self) -> Vec<String> {
        self.universe.iter().map(|u| u.0.clone()).collect()
    }

    pub fn coverage(&self, uris: &[String]) -> BTreeMap<String, u64> {
        self.archives
            .iter()
            .map(|a| (a.clone(), uris.iter().filter(|u| self.holds(a, u)).count() as u64))
            .collect()
    }

    /// Found URIs per archive per rightmost host label.
    pub fn tld_counts(&self, uris: &[String]) -> BTreeMap<String, BTreeMap<String, u64>> {
        let mut out = BTreeMap::new();
        for a in &self.archives {
            let mut per: BTreeMap<String, u64> = BTreeMap::new();
            for u in uris.iter().filter(|u| self.holds(a, u)) {
                *per.entry(tld_of(u)).or_default() += 1;
            }
            out.insert(a.clone(), per);
        }
        out
    }

    /// archive -> lang -> (found, sampled) over the given (uri, lang) pairs.
    pub fn language(&self, entries: &[(String, String)]) -> BTreeMap<String, BTreeMap<String, (u64, u64)>> {
        let mut out = BTreeMap::new();
        for a in &self.archives {
            let mut per: BTreeMap<String, (u64, u64)> = BTreeMap::new();
            for (u, l) in entries {
                let c = per.entry(l.clone()).or_default();
                c.1 += 1;
                if self.holds(a, u) {
                    c.0 += 1;
                }
            }
            out.insert(a.clone(), per);
        }
        out
    }

    /// archive -> "YYYY-MM" -> (new URIs, mementos), for found URIs only.
    pub fn growth(&self, uris: &[String]) -> BTreeMap<String, BTreeMap<String, (u64, u64)>> {
        let mut out = BTreeMap::new();
        for a in &self.archives {
            let mut per: BTreeMap<String, (u64, u64)> = BTreeMap::new();
            for u in uris {
                let Some(caps) = self.holdings[a].get(u) else { continue };
                for c in caps {
                    per.entry(month(&c.when)).or_default().1 += 1;
                }
                per.entry(month(&caps[0].when)).or_default().0 += 1;
            }
            out.insert(a.clone(), per);
        }
        out
    }

    /// Cross-coverage cells: (source, target) -> (found, sampled).
    pub fn cross(&self, sources: &BTreeMap<String, BTreeSet<String>>) -> BTreeMap<(String, String), (u64, u64)> {
        let mut out = BTreeMap::new();
        for (s, hosts) in sources {
            for t in &self.archives {
                let found = hosts.iter().filter(|h| self.holds(t, h)).count() as u64;
                out.insert((s.clone(), t.clone()), (found, hosts.len() as u64));
            }
        }
        out
    }

    /// The profile interchange document for a sample, built by hand.
    pub fn profiles_json(&self, entries: &[(String, String)]) -> Value {
        let uris: Vec<String> = entries.iter().map(|e| e.0.clone()).collect();
        let lang = self.language(entries);
        let growth = self.growth(&uris);
        let mut docs = Vec::new();
        for a in &self.archives {
            let mut tld: BTreeMap<String, (u64, u64)> = BTreeMap::new();
            for u in &uris {
                let c = tld.entry(tld_of(u)).or_default();
                c.1 += 1;
                if self.holds(a, u) {
                    c.0 += 1;
                }
            }
            let age = uris
                .iter()
                .filter_map(|u| self.holdings[a].get(u).map(|c| c[0].when))
                .min()
                .map(|d| Value::String(d.format("%Y-%m-%dT%H:%M:%SZ").to_string()))
                .unwrap_or(Value::Null);
            let pairs = |m: &BTreeMap<String, (u64, u64)>, k1: &str, k2: &str| {
                Value::Object(
                    m.iter()
                        .map(|(k, (x, y))| (k.clone(), json!({ k1: x, k2: y })))
                        .collect::<Map<String, Value>>(),
                )
            };
            docs.push(json!({
                "id": a,
                "age_start": age,
                "tld_coverage": pairs(&tld, "found", "sampled"),
                "language_coverage": pairs(&lang[a], "found", "sampled"),
                "growth": pairs(&growth[a], "new_uris", "mementos"),
            }));
        }
        json!({ "archives": docs })
    }
}

pub fn tld_of(uri: &str) -> String {
    uri.rsplit('.').next().unwrap().to_ascii_lowercase()
}

pub fn month(d: &DateTime<Utc>) -> String {
    format!("{:04}-{:02}", d.year(), d.month())
}

/// `http://<lowercased host>` from a raw URI, by plain string handling.
pub fn host_only(raw: &str) -> Option<String> {
    let rest = raw.split_once("://").map_or(raw, |(_, r)| r);
    let host: String = rest
        .chars()
        .take_while(|c| !matches!(c, '/' | ':' | '?' | '#'))
        .collect();
    if host.is_empty() {
        None
    } else {
        Some(format!("http://{}", host.to_ascii_lowercase()))
    }
}

/// archive -> hosts, from fulltext result files; rows that are not exactly
/// four fields with rank 1..=10 are dropped.
pub fn fulltext_hosts(dir: &Path) -> BTreeMap<String, BTreeSet<String>> {
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut files: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    for f in files {
        for line in fs::read_to_string(&f).unwrap().lines() {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                continue;
            }
            match cols[2].parse::<u32>() {
                Ok(r) if (1..=10).contains(&r) => {}
                _ => continue,
            }
            if let Some(h) = host_only(cols[3]) {
                out.entry(cols[0].to_string()).or_default().insert(h);
            }
        }
    }
    out
}

/// Exact rational comparison a/b vs c/d, with x/0 read as 0.
pub fn cmp_rate(a: (u64, u64), b: (u64, u64)) -> std::cmp::Ordering {
    let l = if a.1 == 0 { 0 } else { a.0 as u128 * b.1.max(1) as u128 };
    let r = if b.1 == 0 { 0 } else { b.0 as u128 * a.1.max(1) as u128 };
    l.cmp(&r)
}

/// Training counts for top-k routing: per TLD and overall, each archive's
/// (found, sampled) over the training URIs.
pub struct TrainingCounts {
    pub by_tld: BTreeMap<String, BTreeMap<String, (u64, u64)>>,
    pub global: BTreeMap<String, (u64, u64)>,
}

pub fn training_counts(o: &Oracle, train: &[String]) -> TrainingCounts {
    let mut by_tld: BTreeMap<String, BTreeMap<String, (u64, u64)>> = BTreeMap::new();
    let mut global: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for u in train {
        let t = tld_of(u);
        for a in &o.archives {
            let held = u64::from(o.holds(a, u));
            let c = by_tld.entry(t.clone()).or_default().entry(a.clone()).or_default();
            c.0 += held;
            c.1 += 1;
            let g = global.entry(a.clone()).or_default();
            g.0 += held;
            g.1 += 1;
        }
    }
    TrainingCounts { by_tld, global }
}

/// Top-k routing recomputed from scratch for `uri`.
pub fn oracle_top_k(
    o: &Oracle,
    counts: &TrainingCounts,
    uri: &str,
    k: usize,
    exclude: &BTreeSet<String>,
) -> Vec<String> {
    let t = tld_of(uri);
    type Row = (String, (u64, u64), (u64, u64));
    let mut rows: Vec<Row> = o
        .archives
        .iter()
        .filter(|a| !exclude.contains(*a))
        .map(|a| {
            let tld_rate = counts.by_tld.get(&t).and_then(|m| m.get(a)).copied().unwrap_or((0, 0));
            (a.clone(), tld_rate, counts.global.get(a).copied().unwrap_or((0, 0)))
        })
        .collect();
    rows.sort_by(|x, y| {
        cmp_rate(y.1, x.1)
            .then_with(|| cmp_rate(y.2, x.2))
            .then_with(|| x.0.cmp(&y.0))
    });
    rows.into_iter().take(k).map(|r| r.0).collect()
}

/// True when `chosen` covers every non-excluded archive holding `uri`
/// (an unheld URI is trivially complete).
pub fn complete(o: &Oracle, uri: &str, chosen: &BTreeSet<String>, exclude: &BTreeSet<String>) -> bool {
    o.holders(uri)
        .iter()
        .filter(|a| !exclude.contains(*a))
        .all(|a| chosen.contains(a))
}
