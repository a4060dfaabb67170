//! Ten-fold cross-validated evaluation of routing policies over a fixed set
//! of lookup results.
//!
//! For every fold, profiles are built from the lookups of the other nine
//! folds only; each URI of the held-out fold is then ranked, aggregated and
//! scored. Reports are plain data and serialize to stable JSON.

use std::collections::{BTreeSet, HashMap};
use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::aggregator::{aggregate, Success};
use crate::memento_model::{ArchiveId, OriginalUri};
use crate::profiler::{build_profiles, ArchiveProfile, LookupResult, ProfileError};
use crate::router::{rank_archives, ArchiveRanking, RankedArchive, RouteError, RoutingPolicy};
use crate::sampler::{fnv1a, UriSample};
use crate::uri_tools::{hostify, TldExtractor};

pub const FOLDS: usize = 10;
pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least {FOLDS} URIs for ten-fold evaluation, got {0}")]
    SampleTooSmall(usize),
    #[error("fold {fold}: {source}")]
    Profile { fold: usize, source: ProfileError },
    #[error(transparent)]
    Route(#[from] RouteError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldAssignment {
    pub rng_seed: u64,
    pub folds: Vec<Vec<OriginalUri>>,
}

impl FoldAssignment {
    pub fn fold_of(&self, uri: &OriginalUri) -> Option<usize> {
        self.folds.iter().position(|f| f.contains(uri))
    }
}

/// Seeded shuffle of the sample, then round-robin into ten folds. Fold
/// sizes differ by at most one.
pub fn ten_fold_split(sample: &UriSample, seed: u64) -> Result<FoldAssignment, EvalError> {
    if sample.len() < FOLDS {
        return Err(EvalError::SampleTooSmall(sample.len()));
    }
    let mut uris: Vec<OriginalUri> = sample.uris().cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    uris.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); FOLDS];
    for (i, u) in uris.into_iter().enumerate() {
        folds[i % FOLDS].push(u);
    }
    for f in &mut folds {
        f.sort();
    }
    Ok(FoldAssignment { rng_seed: seed, folds })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Top k by TLD profile.
    Profile,
    /// k archives drawn uniformly at random per URI.
    Random,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalConfig {
    pub k: usize,
    pub exclude: BTreeSet<ArchiveId>,
    pub strategy: Strategy,
    pub seed: u64,
    /// Folds evaluated in parallel.
    pub jobs: usize,
}

impl EvalConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        EvalConfig {
            k,
            exclude: BTreeSet::new(),
            strategy: Strategy::Profile,
            seed,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UriOutcome {
    pub uri: OriginalUri,
    pub fold: usize,
    pub chosen: Vec<ArchiveId>,
    pub fallback: bool,
    /// `None` when every archive failed for this URI.
    pub success: Option<Success>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    /// URIs that produced a usable full TimeMap.
    pub evaluated: u64,
    pub complete: u64,
    pub vacuous: u64,
    /// URIs for which every archive failed; not in the means.
    pub failed: u64,
    pub mean_success: f64,
    pub complete_fraction: f64,
}

impl Summary {
    fn of<'a>(outcomes: impl IntoIterator<Item = &'a UriOutcome>) -> Self {
        let mut s = Summary {
            evaluated: 0,
            complete: 0,
            vacuous: 0,
            failed: 0,
            mean_success: 0.0,
            complete_fraction: 0.0,
        };
        let mut total = 0.0;
        for o in outcomes {
            match o.success {
                None => s.failed += 1,
                Some(x) => {
                    s.evaluated += 1;
                    s.complete += u64::from(x.is_complete());
                    s.vacuous += u64::from(x.is_vacuous());
                    total += x.value();
                }
            }
        }
        if s.evaluated > 0 {
            s.mean_success = total / s.evaluated as f64;
            s.complete_fraction = s.complete as f64 / s.evaluated as f64;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldStats {
    pub fold: usize,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub k: usize,
    pub excluded: Vec<ArchiveId>,
    pub strategy: Strategy,
    pub seed: u64,
    pub folds: Vec<FoldStats>,
    pub aggregate: Summary,
    /// Success values in equal-width bins over [0, 1], normalized over
    /// evaluated URIs.
    pub histogram: Vec<HistogramBin>,
    pub uris: Vec<UriOutcome>,
}

impl EvaluationReport {
    fn excluded_label(&self) -> String {
        if self.excluded.is_empty() {
            "-".to_string()
        } else {
            self.excluded
                .iter()
                .map(ArchiveId::as_str)
                .collect::<Vec<_>>()
                .join(",")
        }
    }

    /// `k<TAB>excluded<TAB>fold<TAB>mean_success<TAB>complete_fraction`
    /// rows for each fold, then an `all` row. No header.
    pub fn write_summary_rows<W: Write>(&self, mut w: W) -> io::Result<()> {
        let ex = self.excluded_label();
        for f in &self.folds {
            writeln!(
                w,
                "{}\t{}\t{}\t{:.6}\t{:.6}",
                self.k, ex, f.fold, f.summary.mean_success, f.summary.complete_fraction
            )?;
        }
        writeln!(
            w,
            "{}\t{}\tall\t{:.6}\t{:.6}",
            self.k, ex, self.aggregate.mean_success, self.aggregate.complete_fraction
        )
    }

    /// `k<TAB>excluded<TAB>bin_lo<TAB>bin_hi<TAB>count<TAB>fraction` rows.
    pub fn write_histogram_rows<W: Write>(&self, mut w: W) -> io::Result<()> {
        let ex = self.excluded_label();
        for b in &self.histogram {
            writeln!(
                w,
                "{}\t{}\t{:.2}\t{:.2}\t{}\t{:.6}",
                self.k, ex, b.lo, b.hi, b.count, b.fraction
            )?;
        }
        Ok(())
    }
}

pub const SUMMARY_HEADER: &str = "k\texcluded\tfold\tmean_success\tcomplete_fraction";
pub const HISTOGRAM_HEADER: &str = "k\texcluded\tbin_lo\tbin_hi\tcount\tfraction";

fn key(uri: &OriginalUri) -> OriginalUri {
    hostify(uri.as_str()).unwrap_or_else(|_| uri.clone())
}

fn random_ranking(
    uri: &OriginalUri,
    archives: &[ArchiveId],
    policy: &RoutingPolicy,
    seed: u64,
) -> Result<ArchiveRanking, RouteError> {
    let eligible: Vec<&ArchiveId> = archives.iter().filter(|a| !policy.exclude.contains(*a)).collect();
    if policy.k == 0 || policy.k > eligible.len() {
        return Err(RouteError::InvalidK {
            k: policy.k,
            available: eligible.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(uri.as_str().as_bytes()));
    let mut order = eligible;
    order.shuffle(&mut rng);
    let ranked: Vec<RankedArchive> = order
        .into_iter()
        .map(|a| RankedArchive {
            archive: a.clone(),
            score: 0.0,
        })
        .collect();
    Ok(ArchiveRanking {
        uri: uri.clone(),
        tld: None,
        chosen: ranked.iter().take(policy.k).map(|r| r.archive.clone()).collect(),
        ranked,
        fallback: false,
    })
}

fn histogram(outcomes: &[UriOutcome]) -> Vec<HistogramBin> {
    let mut counts = [0u64; HISTOGRAM_BINS];
    let mut n = 0u64;
    for s in outcomes.iter().filter_map(|o| o.success) {
        counts[s.bin(HISTOGRAM_BINS as u64)] += 1;
        n += 1;
    }
    let width = 1.0 / HISTOGRAM_BINS as f64;
    counts
        .iter()
        .enumerate()
        .map(|(i, &count)| HistogramBin {
            lo: i as f64 * width,
            hi: (i + 1) as f64 * width,
            count,
            fraction: if n == 0 { 0.0 } else { count as f64 / n as f64 },
        })
        .collect()
}

fn parallel_folds<T, F>(jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let jobs = jobs.clamp(1, FOLDS);
    if jobs == 1 {
        return (0..FOLDS).map(f).collect();
    }
    let folds: Vec<usize> = (0..FOLDS).collect();
    std::thread::scope(|s| {
        let f = &f;
        let handles: Vec<_> = folds
            .chunks(FOLDS.div_ceil(jobs))
            .map(|chunk| s.spawn(move || chunk.iter().map(|&i| f(i)).collect::<Vec<T>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("fold worker panicked"))
            .collect()
    })
}

/// Fold assignment and per-fold training profiles for one sample, shared by
/// every policy evaluated on it.
pub struct Evaluator<'a> {
    archives: &'a [ArchiveId],
    extractor: &'a TldExtractor,
    folds: FoldAssignment,
    by_uri: HashMap<OriginalUri, Vec<&'a LookupResult>>,
    profiles: Vec<Vec<ArchiveProfile>>,
    jobs: usize,
}

impl<'a> Evaluator<'a> {
    /// Splits the sample with `seed` and builds, for each fold, profiles
    /// from the lookups of the other nine folds. `archives` lists every
    /// configured archive; `lookups` should hold a result for each
    /// (archive, sample URI) pair.
    pub fn new(
        sample: &UriSample,
        archives: &'a [ArchiveId],
        lookups: &'a [LookupResult],
        seed: u64,
        jobs: usize,
        extractor: &'a TldExtractor,
    ) -> Result<Self, EvalError> {
        let folds = ten_fold_split(sample, seed)?;
        let mut by_uri: HashMap<OriginalUri, Vec<&LookupResult>> = HashMap::new();
        for r in lookups {
            by_uri.entry(key(&r.original)).or_default().push(r);
        }
        let languages = HashMap::new();
        let profiles = parallel_folds(jobs, |f| {
            let training = folds
                .folds
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, uris)| uris.iter())
                .flat_map(|u| by_uri.get(u).into_iter().flatten().copied());
            build_profiles(archives, training, extractor, &languages)
                .map(|p| p.archives)
                .map_err(|source| EvalError::Profile { fold: f + 1, source })
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
        Ok(Evaluator {
            archives,
            extractor,
            folds,
            by_uri,
            profiles,
            jobs,
        })
    }

    pub fn folds(&self) -> &FoldAssignment {
        &self.folds
    }

    /// Training profiles used to rank the URIs of fold `fold` (0-based).
    pub fn profiles(&self, fold: usize) -> &[ArchiveProfile] {
        &self.profiles[fold]
    }

    pub fn seed(&self) -> u64 {
        self.folds.rng_seed
    }

    pub fn run(
        &self,
        k: usize,
        exclude: &BTreeSet<ArchiveId>,
        strategy: Strategy,
    ) -> Result<EvaluationReport, EvalError> {
        let mut policy = RoutingPolicy::top(k);
        policy.exclude = exclude.clone();
        let seed = self.seed();
        let per_fold = parallel_folds(self.jobs, |f| -> Result<Vec<UriOutcome>, EvalError> {
            let mut out = Vec::with_capacity(self.folds.folds[f].len());
            for uri in &self.folds.folds[f] {
                let ranking = match strategy {
                    Strategy::Profile => rank_archives(uri, &self.profiles[f], &policy, self.extractor)?,
                    Strategy::Random => random_ranking(uri, self.archives, &policy, seed)?,
                };
                let own: Vec<LookupResult> = self
                    .by_uri
                    .get(uri)
                    .into_iter()
                    .flatten()
                    .map(|r| (*r).clone())
                    .collect();
                let success = aggregate(uri, &own, &ranking, exclude).ok().map(|a| a.success);
                out.push(UriOutcome {
                    uri: uri.clone(),
                    fold: f + 1,
                    chosen: ranking.chosen,
                    fallback: ranking.fallback,
                    success,
                });
            }
            Ok(out)
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

        let folds = per_fold
            .iter()
            .enumerate()
            .map(|(f, outs)| FoldStats {
                fold: f + 1,
                summary: Summary::of(outs),
            })
            .collect();
        let uris: Vec<UriOutcome> = per_fold.into_iter().flatten().collect();
        Ok(EvaluationReport {
            k,
            excluded: exclude.iter().cloned().collect(),
            strategy,
            seed,
            folds,
            aggregate: Summary::of(&uris),
            histogram: histogram(&uris),
            uris,
        })
    }
}

/// Runs one policy over the sample.
pub fn run_evaluation(
    sample: &UriSample,
    archives: &[ArchiveId],
    lookups: &[LookupResult],
    config: &EvalConfig,
    extractor: &TldExtractor,
) -> Result<EvaluationReport, EvalError> {
    Evaluator::new(sample, archives, lookups, config.seed, config.jobs, extractor)?.run(
        config.k,
        &config.exclude,
        config.strategy,
    )
}

/// All reports of one evaluation run: each k with and without the
/// exclusion set, for profile routing and the random baseline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationSuite {
    pub seed: u64,
    pub archives: Vec<ArchiveId>,
    pub sample_size: usize,
    pub reports: Vec<EvaluationReport>,
}

impl EvaluationSuite {
    pub fn find(&self, k: usize, excluded: &[ArchiveId], strategy: Strategy) -> Option<&EvaluationReport> {
        self.reports
            .iter()
            .find(|r| r.k == k && r.excluded == excluded && r.strategy == strategy)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    fn write_rows<W: Write>(&self, mut w: W, strategy: Strategy, histogram: bool) -> io::Result<()> {
        writeln!(w, "{}", if histogram { HISTOGRAM_HEADER } else { SUMMARY_HEADER })?;
        for r in self.reports.iter().filter(|r| r.strategy == strategy) {
            if histogram {
                r.write_histogram_rows(&mut w)?;
            } else {
                r.write_summary_rows(&mut w)?;
            }
        }
        Ok(())
    }

    pub fn write_summary_tsv<W: Write>(&self, w: W, strategy: Strategy) -> io::Result<()> {
        self.write_rows(w, strategy, false)
    }

    pub fn write_histogram_tsv<W: Write>(&self, w: W, strategy: Strategy) -> io::Result<()> {
        self.write_rows(w, strategy, true)
    }
}

pub fn run_suite(
    evaluator: &Evaluator<'_>,
    ks: &[usize],
    exclude: &BTreeSet<ArchiveId>,
    sample_size: usize,
) -> Result<EvaluationSuite, EvalError> {
    let mut variants = vec![BTreeSet::new()];
    if !exclude.is_empty() {
        variants.push(exclude.clone());
    }
    let mut reports = Vec::new();
    for strategy in [Strategy::Profile, Strategy::Random] {
        for ex in &variants {
            for &k in ks {
                reports.push(evaluator.run(k, ex, strategy)?);
            }
        }
    }
    Ok(EvaluationSuite {
        seed: evaluator.seed(),
        archives: evaluator.archives.to_vec(),
        sample_size,
        reports,
    })
}
