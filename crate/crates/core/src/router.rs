//! Ranks archives for a URI from their TLD profiles and picks the top k.
//!
//! The default score is the archive's coverage rate for the URI's TLD
//! (found over sampled in training). Ties go to the archive with the higher
//! overall coverage rate, then to the smaller archive id. Rates are compared
//! as exact fractions.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::memento_model::{ArchiveId, OriginalUri};
use crate::profiler::{ArchiveProfile, FoundSampled};
use crate::uri_tools::{TldExtractor, TldLabel};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingPolicy {
    pub k: usize,
    pub exclude: BTreeSet<ArchiveId>,
    /// Order used when no archive has seen the URI's TLD. Empty means
    /// overall-coverage order.
    pub fallback_order: Vec<ArchiveId>,
}

impl RoutingPolicy {
    pub fn top(k: usize) -> Self {
        RoutingPolicy {
            k,
            exclude: BTreeSet::new(),
            fallback_order: Vec::new(),
        }
    }

    pub fn excluding(mut self, archives: impl IntoIterator<Item = ArchiveId>) -> Self {
        self.exclude.extend(archives);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RouteError {
    #[error("k = {k} but only {available} archives are eligible")]
    InvalidK { k: usize, available: usize },
}

/// An exact non-negative fraction. `0/0` is treated as zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rate {
    pub num: u64,
    pub den: u64,
}

impl Rate {
    pub fn zero() -> Self {
        Rate { num: 0, den: 1 }
    }

    pub fn of(c: FoundSampled) -> Self {
        if c.sampled == 0 {
            Rate::zero()
        } else {
            Rate {
                num: c.found,
                den: c.sampled,
            }
        }
    }

    pub fn value(self) -> f64 {
        if self.den == 0 {
            0.0
        } else {
            self.num as f64 / self.den as f64
        }
    }
}

impl PartialOrd for Rate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rate {
    fn cmp(&self, other: &Self) -> Ordering {
        let l = u128::from(self.num) * u128::from(other.den.max(1));
        let r = u128::from(other.num) * u128::from(self.den.max(1));
        l.cmp(&r)
    }
}

/// Scores one archive for a TLD. Implementations must be pure.
pub trait ArchiveScorer {
    fn score(&self, profile: &ArchiveProfile, tld: &TldLabel) -> Rate;
}

/// Coverage rate of the archive for the TLD.
#[derive(Debug, Clone, Copy, Default)]
pub struct TldCoverageScorer;

impl ArchiveScorer for TldCoverageScorer {
    fn score(&self, profile: &ArchiveProfile, tld: &TldLabel) -> Rate {
        Rate::of(profile.tld(tld))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedArchive {
    pub archive: ArchiveId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArchiveRanking {
    pub uri: OriginalUri,
    pub tld: Option<TldLabel>,
    /// Eligible archives, best first. Excluded archives are not listed.
    pub ranked: Vec<RankedArchive>,
    pub chosen: Vec<ArchiveId>,
    /// Set when the order came from the fallback rule (no TLD, or no archive
    /// with any observation of it).
    pub fallback: bool,
}

impl ArchiveRanking {
    /// `uri<TAB>tld<TAB>rank<TAB>archive<TAB>score`, one row per ranked archive.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let tld = self.tld.as_ref().map(TldLabel::as_str).unwrap_or("");
        for (i, r) in self.ranked.iter().enumerate() {
            writeln!(w, "{}\t{}\t{}\t{}\t{:.6}", self.uri, tld, i + 1, r.archive, r.score)?;
        }
        Ok(())
    }
}

pub fn rank_archives(
    uri: &OriginalUri,
    profiles: &[ArchiveProfile],
    policy: &RoutingPolicy,
    extractor: &TldExtractor,
) -> Result<ArchiveRanking, RouteError> {
    rank_archives_with(&TldCoverageScorer, uri, profiles, policy, extractor)
}

pub fn rank_archives_with<S: ArchiveScorer>(
    scorer: &S,
    uri: &OriginalUri,
    profiles: &[ArchiveProfile],
    policy: &RoutingPolicy,
    extractor: &TldExtractor,
) -> Result<ArchiveRanking, RouteError> {
    let eligible: Vec<&ArchiveProfile> = profiles
        .iter()
        .filter(|p| !policy.exclude.contains(&p.archive))
        .collect();
    if policy.k == 0 || policy.k > eligible.len() {
        return Err(RouteError::InvalidK {
            k: policy.k,
            available: eligible.len(),
        });
    }
    let tld = extractor.extract_uri(uri).ok();

    let mut scored: Vec<(&ArchiveProfile, Rate, Rate)> = eligible
        .iter()
        .map(|p| {
            let s = tld.as_ref().map_or(Rate::zero(), |t| scorer.score(p, t));
            (*p, s, Rate::of(p.global_coverage()))
        })
        .collect();
    let observed = tld
        .as_ref()
        .is_some_and(|t| eligible.iter().any(|p| p.tld(t).sampled > 0));
    let fallback = !observed || scored.iter().all(|(_, s, _)| s.num == 0);

    scored.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then_with(|| b.2.cmp(&a.2))
            .then_with(|| a.0.archive.cmp(&b.0.archive))
    });
    if fallback && !policy.fallback_order.is_empty() {
        // stable: archives missing from the fallback list keep their
        // overall-coverage order after the listed ones
        let pos = |a: &ArchiveId| policy.fallback_order.iter().position(|x| x == a).unwrap_or(usize::MAX);
        scored.sort_by_key(|(p, _, _)| pos(&p.archive));
    }

    let ranked: Vec<RankedArchive> = scored
        .iter()
        .map(|(p, s, _)| RankedArchive {
            archive: p.archive.clone(),
            score: s.value(),
        })
        .collect();
    let chosen = ranked.iter().take(policy.k).map(|r| r.archive.clone()).collect();
    Ok(ArchiveRanking {
        uri: uri.clone(),
        tld,
        ranked,
        chosen,
        fallback,
    })
}
