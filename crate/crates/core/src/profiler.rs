//! Archive profiles computed from TimeMap lookups: coverage, cross-coverage,
//! TLD and language distributions, growth, and age.
//!
//! A URI counts as *found* in an archive when the lookup returned a TimeMap
//! with at least one memento. Duplicate lookups of the same (archive, URI)
//! pair are collapsed to the first one seen. Failed lookups (timeouts and
//! errors) count as misses for coverage but are left out of the training
//! counts stored in a profile, since they say nothing about the holdings.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{self, Write};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memento_model::{ArchiveId, OriginalUri, TimeMap, YearMonth};
use crate::sampler::UriSample;
use crate::uri_tools::{hostify, TldExtractor, TldLabel};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "detail")]
pub enum LookupOutcome {
    Ok,
    NotFound,
    Timeout,
    Error(String),
}

impl LookupOutcome {
    pub fn is_failure(&self) -> bool {
        matches!(self, LookupOutcome::Timeout | LookupOutcome::Error(_))
    }
}

impl fmt::Display for LookupOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LookupOutcome::Ok => f.write_str("ok"),
            LookupOutcome::NotFound => f.write_str("not-found"),
            LookupOutcome::Timeout => f.write_str("timeout"),
            LookupOutcome::Error(e) => write!(f, "error: {e}"),
        }
    }
}

/// One archive's answer for one original URI.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupResult {
    pub archive: ArchiveId,
    pub original: OriginalUri,
    pub timemap: Option<TimeMap>,
    pub fetched_at: DateTime<Utc>,
    pub outcome: LookupOutcome,
}

impl LookupResult {
    pub fn found(&self) -> bool {
        self.timemap.as_ref().is_some_and(|t| !t.is_empty())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProfileError {
    #[error("lookup result for {0} which is not in the sample")]
    SampleMismatch(String),
    #[error("sample entry {0} has no language label")]
    MissingLanguageLabels(String),
    #[error("no lookup results for archive {0}")]
    NoData(String),
}

/// Found/sampled pair. The ratio of an empty pair is 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoundSampled {
    pub found: u64,
    pub sampled: u64,
}

impl FoundSampled {
    pub fn ratio(&self) -> f64 {
        if self.sampled == 0 {
            0.0
        } else {
            self.found as f64 / self.sampled as f64
        }
    }

    fn add(&mut self, found: bool) {
        self.sampled += 1;
        self.found += u64::from(found);
    }
}

fn key(uri: &OriginalUri) -> OriginalUri {
    hostify(uri.as_str()).unwrap_or_else(|_| uri.clone())
}

/// First lookup per (archive, normalized URI).
fn collapse<'a, I>(results: I) -> BTreeMap<(ArchiveId, OriginalUri), &'a LookupResult>
where
    I: IntoIterator<Item = &'a LookupResult>,
{
    let mut out = BTreeMap::new();
    for r in results {
        out.entry((r.archive.clone(), key(&r.original))).or_insert(r);
    }
    out
}

/// Archive order: `archives` first, then any other archive seen in results.
fn archive_order<'a>(archives: &[ArchiveId], seen: impl Iterator<Item = &'a ArchiveId>) -> Vec<ArchiveId> {
    let mut out: Vec<ArchiveId> = archives.to_vec();
    let known: HashSet<ArchiveId> = archives.iter().cloned().collect();
    let extra: BTreeSet<ArchiveId> = seen.filter(|a| !known.contains(*a)).cloned().collect();
    out.extend(extra);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArchiveCoverage {
    pub archive: ArchiveId,
    pub found: u64,
    pub size: u64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub sample: String,
    pub rows: Vec<ArchiveCoverage>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl CoverageReport {
    pub fn get(&self, archive: &ArchiveId) -> Option<&ArchiveCoverage> {
        self.rows.iter().find(|r| &r.archive == archive)
    }

    /// `archive<TAB>found<TAB>size<TAB>coverage`.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "archive\tfound\tsize\tcoverage")?;
        for r in &self.rows {
            writeln!(w, "{}\t{}\t{}\t{:.6}", r.archive, r.found, r.size, r.coverage)?;
        }
        Ok(())
    }
}

/// Share of the sample found in each archive.
pub fn compute_coverage(
    sample: &UriSample,
    archives: &[ArchiveId],
    results: &[LookupResult],
) -> Result<CoverageReport, ProfileError> {
    let members: HashSet<&OriginalUri> = sample.uris().collect();
    let collapsed = collapse(results);
    let mut found: HashMap<&ArchiveId, u64> = HashMap::new();
    let mut looked: HashSet<&ArchiveId> = HashSet::new();
    for ((archive, uri), r) in &collapsed {
        if !members.contains(uri) {
            return Err(ProfileError::SampleMismatch(uri.to_string()));
        }
        looked.insert(archive);
        if r.found() {
            *found.entry(archive).or_default() += 1;
        }
    }
    let size = sample.len() as u64;
    let mut warnings = Vec::new();
    let rows = archive_order(archives, collapsed.keys().map(|(a, _)| a))
        .into_iter()
        .map(|archive| {
            if !looked.contains(&archive) {
                warnings.push(format!("archive {archive} has no lookups for sample {}", sample.name));
            }
            let f = found.get(&archive).copied().unwrap_or(0);
            ArchiveCoverage {
                coverage: if size == 0 { 0.0 } else { f as f64 / size as f64 },
                archive,
                found: f,
                size,
            }
        })
        .collect();
    Ok(CoverageReport {
        sample: sample.name.clone(),
        rows,
        warnings,
    })
}

/// Coverage of each source archive's fulltext sample (rows) when looked up
/// in each target archive (columns).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCoverageMatrix {
    pub sources: Vec<ArchiveId>,
    pub targets: Vec<ArchiveId>,
    /// `cells[i][j]` for `sources[i]`, `targets[j]`.
    pub cells: Vec<Vec<FoundSampled>>,
}

impl CrossCoverageMatrix {
    pub fn cell(&self, source: &ArchiveId, target: &ArchiveId) -> Option<FoundSampled> {
        let i = self.sources.iter().position(|s| s == source)?;
        let j = self.targets.iter().position(|t| t == target)?;
        Some(self.cells[i][j])
    }

    pub fn diagonal(&self, archive: &ArchiveId) -> Option<FoundSampled> {
        self.cell(archive, archive)
    }

    /// Rows labeled by source, columns by target, coverage in percent.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "source")?;
        for t in &self.targets {
            write!(w, "\t{t}")?;
        }
        writeln!(w)?;
        for (s, row) in self.sources.iter().zip(&self.cells) {
            write!(w, "{s}")?;
            for c in row {
                write!(w, "\t{:.2}", c.ratio() * 100.0)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub fn compute_cross_coverage(
    samples_by_source: &BTreeMap<ArchiveId, UriSample>,
    archives: &[ArchiveId],
    results: &[LookupResult],
) -> Result<CrossCoverageMatrix, ProfileError> {
    let all: HashSet<&OriginalUri> = samples_by_source.values().flat_map(|s| s.uris()).collect();
    let collapsed = collapse(results);
    for (_, uri) in collapsed.keys() {
        if !all.contains(uri) {
            return Err(ProfileError::SampleMismatch(uri.to_string()));
        }
    }
    let targets = archive_order(archives, collapsed.keys().map(|(a, _)| a));
    let sources: Vec<ArchiveId> = samples_by_source.keys().cloned().collect();
    let cells = samples_by_source
        .values()
        .map(|sample| {
            targets
                .iter()
                .map(|t| {
                    let found = sample
                        .uris()
                        .filter(|u| collapsed.get(&(t.clone(), (*u).clone())).is_some_and(|r| r.found()))
                        .count() as u64;
                    FoundSampled {
                        found,
                        sampled: sample.len() as u64,
                    }
                })
                .collect()
        })
        .collect();
    Ok(CrossCoverageMatrix {
        sources,
        targets,
        cells,
    })
}

/// Per archive, how its found URIs split across TLDs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TldDistribution {
    pub counts: BTreeMap<ArchiveId, BTreeMap<TldLabel, u64>>,
}

impl TldDistribution {
    pub fn total(&self, archive: &ArchiveId) -> u64 {
        self.counts.get(archive).map_or(0, |m| m.values().sum())
    }

    pub fn ratio(&self, archive: &ArchiveId, tld: &TldLabel) -> f64 {
        let total = self.total(archive);
        if total == 0 {
            return 0.0;
        }
        let n = self.counts.get(archive).and_then(|m| m.get(tld)).copied().unwrap_or(0);
        n as f64 / total as f64
    }

    pub fn ratios(&self, archive: &ArchiveId) -> BTreeMap<TldLabel, f64> {
        let total = self.total(archive);
        self.counts
            .get(archive)
            .map(|m| m.iter().map(|(t, n)| (t.clone(), *n as f64 / total as f64)).collect())
            .unwrap_or_default()
    }

    /// The TLD with the most found URIs; ties go to the smaller label.
    pub fn modal_tld(&self, archive: &ArchiveId) -> Option<&TldLabel> {
        self.counts
            .get(archive)?
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(t, _)| t)
    }

    /// Archives as rows, every observed TLD as a column, ratios as cells.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let tlds: BTreeSet<&TldLabel> = self.counts.values().flat_map(|m| m.keys()).collect();
        write!(w, "archive")?;
        for t in &tlds {
            write!(w, "\t{t}")?;
        }
        writeln!(w)?;
        for a in self.counts.keys() {
            write!(w, "{a}")?;
            for t in &tlds {
                write!(w, "\t{:.6}", self.ratio(a, t))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Counts found URIs by TLD. URIs without a TLD are skipped.
pub fn compute_tld_distribution(results: &[LookupResult], extractor: &TldExtractor) -> TldDistribution {
    let mut counts: BTreeMap<ArchiveId, BTreeMap<TldLabel, u64>> = BTreeMap::new();
    for ((archive, uri), r) in collapse(results) {
        let per = counts.entry(archive).or_default();
        if !r.found() {
            continue;
        }
        if let Ok(t) = extractor.extract_uri(&uri) {
            *per.entry(t).or_default() += 1;
        }
    }
    TldDistribution { counts }
}

/// Per (archive, language): found over the size of that language's slice.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LanguageDistribution {
    pub cells: BTreeMap<ArchiveId, BTreeMap<String, FoundSampled>>,
}

impl LanguageDistribution {
    pub fn ratio(&self, archive: &ArchiveId, lang: &str) -> f64 {
        self.cells
            .get(archive)
            .and_then(|m| m.get(lang))
            .map_or(0.0, FoundSampled::ratio)
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let langs: BTreeSet<&String> = self.cells.values().flat_map(|m| m.keys()).collect();
        write!(w, "archive")?;
        for l in &langs {
            write!(w, "\t{l}")?;
        }
        writeln!(w)?;
        for a in self.cells.keys() {
            write!(w, "{a}")?;
            for l in &langs {
                write!(w, "\t{:.6}", self.ratio(a, l))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub fn compute_language_distribution(
    sample: &UriSample,
    archives: &[ArchiveId],
    results: &[LookupResult],
) -> Result<LanguageDistribution, ProfileError> {
    let mut slice: BTreeMap<&str, u64> = BTreeMap::new();
    let mut lang_of: HashMap<&OriginalUri, &str> = HashMap::new();
    for e in sample.entries() {
        let lang = e
            .lang
            .as_deref()
            .ok_or_else(|| ProfileError::MissingLanguageLabels(e.uri.to_string()))?;
        *slice.entry(lang).or_default() += 1;
        lang_of.insert(&e.uri, lang);
    }
    let collapsed = collapse(results);
    let mut cells: BTreeMap<ArchiveId, BTreeMap<String, FoundSampled>> = BTreeMap::new();
    for a in archive_order(archives, collapsed.keys().map(|(a, _)| a)) {
        let row = slice
            .iter()
            .map(|(l, n)| ((*l).to_owned(), FoundSampled { found: 0, sampled: *n }))
            .collect();
        cells.insert(a, row);
    }
    for ((archive, uri), r) in &collapsed {
        let lang = lang_of
            .get(uri)
            .ok_or_else(|| ProfileError::SampleMismatch(uri.to_string()))?;
        if r.found() {
            cells
                .get_mut(archive)
                .and_then(|m| m.get_mut(*lang))
                .expect("row created above")
                .found += 1;
        }
    }
    Ok(LanguageDistribution { cells })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthBucket {
    pub new_uris: u64,
    pub mementos: u64,
}

/// One point of the accumulated, normalized growth curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthPoint {
    pub month: YearMonth,
    pub uris: f64,
    pub mementos: f64,
}

/// Monthly growth buckets per archive. A URI is new in the month of its
/// earliest memento in that archive.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GrowthSeries {
    pub archives: BTreeMap<ArchiveId, BTreeMap<YearMonth, GrowthBucket>>,
}

/// Accumulates buckets over every month from the first to the last bucket
/// and divides by the totals. Empty input gives an empty curve.
pub fn cumulative(buckets: &BTreeMap<YearMonth, GrowthBucket>) -> Vec<GrowthPoint> {
    let (Some(first), Some(last)) = (buckets.keys().next(), buckets.keys().next_back()) else {
        return Vec::new();
    };
    let total_u: u64 = buckets.values().map(|b| b.new_uris).sum();
    let total_m: u64 = buckets.values().map(|b| b.mementos).sum();
    let norm = |n: u64, total: u64| if total == 0 { 0.0 } else { n as f64 / total as f64 };
    let (mut acc_u, mut acc_m) = (0u64, 0u64);
    first
        .through(*last)
        .map(|month| {
            let b = buckets.get(&month).copied().unwrap_or_default();
            acc_u += b.new_uris;
            acc_m += b.mementos;
            GrowthPoint {
                month,
                uris: norm(acc_u, total_u),
                mementos: norm(acc_m, total_m),
            }
        })
        .collect()
}

impl GrowthSeries {
    pub fn cumulative(&self, archive: &ArchiveId) -> Vec<GrowthPoint> {
        self.archives.get(archive).map(cumulative).unwrap_or_default()
    }

    /// `archive<TAB>month<TAB>new_uris<TAB>mementos<TAB>cum_uris<TAB>cum_mementos`.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "archive\tmonth\tnew_uris\tmementos\tcum_uris\tcum_mementos")?;
        for (a, buckets) in &self.archives {
            for p in cumulative(buckets) {
                let b = buckets.get(&p.month).copied().unwrap_or_default();
                writeln!(
                    w,
                    "{a}\t{}\t{}\t{}\t{:.6}\t{:.6}",
                    p.month, b.new_uris, b.mementos, p.uris, p.mementos
                )?;
            }
        }
        Ok(())
    }
}

fn growth_buckets<'a>(found: impl Iterator<Item = &'a TimeMap>) -> BTreeMap<YearMonth, GrowthBucket> {
    let mut buckets: BTreeMap<YearMonth, GrowthBucket> = BTreeMap::new();
    for tm in found {
        for m in tm.mementos() {
            buckets.entry(YearMonth::of(&m.datetime)).or_default().mementos += 1;
        }
        if let Some(first) = tm.mementos().first() {
            buckets.entry(YearMonth::of(&first.datetime)).or_default().new_uris += 1;
        }
    }
    buckets
}

pub fn compute_growth(results: &[LookupResult]) -> GrowthSeries {
    let mut per: BTreeMap<ArchiveId, Vec<&TimeMap>> = BTreeMap::new();
    for ((archive, _), r) in collapse(results) {
        let list = per.entry(archive).or_default();
        if let Some(tm) = r.timemap.as_ref().filter(|t| !t.is_empty()) {
            list.push(tm);
        }
    }
    GrowthSeries {
        archives: per
            .into_iter()
            .map(|(a, tms)| (a, growth_buckets(tms.into_iter())))
            .collect(),
    }
}

/// What an archive holds, as seen through a set of lookups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveProfile {
    #[serde(rename = "id")]
    pub archive: ArchiveId,
    /// Earliest Memento-Datetime seen; absent when nothing was found.
    pub age_start: Option<DateTime<Utc>>,
    pub tld_coverage: BTreeMap<TldLabel, FoundSampled>,
    pub language_coverage: BTreeMap<String, FoundSampled>,
    pub growth: BTreeMap<YearMonth, GrowthBucket>,
}

impl ArchiveProfile {
    /// Found over sampled, summed over all TLDs.
    pub fn global_coverage(&self) -> FoundSampled {
        self.tld_coverage
            .values()
            .fold(FoundSampled::default(), |acc, c| FoundSampled {
                found: acc.found + c.found,
                sampled: acc.sampled + c.sampled,
            })
    }

    pub fn tld(&self, tld: &TldLabel) -> FoundSampled {
        self.tld_coverage.get(tld).copied().unwrap_or_default()
    }
}

/// Builds one archive's profile from the lookups addressed to it.
/// `languages` maps hostified URIs to language labels; it may be empty.
pub fn build_profile<'a, I>(
    archive: &ArchiveId,
    results: I,
    extractor: &TldExtractor,
    languages: &HashMap<OriginalUri, String>,
) -> Result<ArchiveProfile, ProfileError>
where
    I: IntoIterator<Item = &'a LookupResult>,
{
    let collapsed = collapse(results.into_iter().filter(|r| &r.archive == archive));
    if collapsed.is_empty() {
        return Err(ProfileError::NoData(archive.to_string()));
    }
    let mut tld_coverage: BTreeMap<TldLabel, FoundSampled> = BTreeMap::new();
    let mut language_coverage: BTreeMap<String, FoundSampled> = BTreeMap::new();
    let mut age_start: Option<DateTime<Utc>> = None;
    let mut found_maps = Vec::new();
    for ((_, uri), r) in &collapsed {
        if r.outcome.is_failure() {
            continue;
        }
        let found = r.found();
        if let Ok(t) = extractor.extract_uri(uri) {
            tld_coverage.entry(t).or_default().add(found);
        }
        if let Some(lang) = languages.get(uri) {
            language_coverage.entry(lang.clone()).or_default().add(found);
        }
        if found {
            let tm = r.timemap.as_ref().expect("found implies a TimeMap");
            let first = tm.mementos()[0].datetime;
            age_start = Some(age_start.map_or(first, |a| a.min(first)));
            found_maps.push(tm);
        }
    }
    Ok(ArchiveProfile {
        archive: archive.clone(),
        age_start,
        tld_coverage,
        language_coverage,
        growth: growth_buckets(found_maps.into_iter()),
    })
}

/// Profiles for a set of archives, in the interchange JSON shape
/// `{"archives": [...]}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileSet {
    pub archives: Vec<ArchiveProfile>,
}

impl ProfileSet {
    pub fn get(&self, archive: &ArchiveId) -> Option<&ArchiveProfile> {
        self.archives.iter().find(|p| &p.archive == archive)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("profiles serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

pub fn build_profiles<'a, I>(
    archives: &[ArchiveId],
    results: I,
    extractor: &TldExtractor,
    languages: &HashMap<OriginalUri, String>,
) -> Result<ProfileSet, ProfileError>
where
    I: IntoIterator<Item = &'a LookupResult>,
{
    let mut by_archive: HashMap<&ArchiveId, Vec<&LookupResult>> = HashMap::new();
    for r in results {
        by_archive.entry(&r.archive).or_default().push(r);
    }
    let archives = archives
        .iter()
        .map(|a| {
            let rs = by_archive.get(a).map(Vec::as_slice).unwrap_or(&[]);
            build_profile(a, rs.iter().copied(), extractor, languages)
        })
        .collect::<Result<_, _>>()?;
    Ok(ProfileSet { archives })
}
