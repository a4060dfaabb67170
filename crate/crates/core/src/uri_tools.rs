//! Hostname reduction and top-level-domain extraction.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memento_model::OriginalUri;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UriError {
    #[error("URI has no hostname: {0:?}")]
    NoHost(String),
    #[error("invalid hostname {0:?}")]
    InvalidHost(String),
    #[error("hostname {0:?} has no top-level domain")]
    NoTld(String),
}

/// A lowercase DNS hostname. Internationalized names are held in punycode.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Hostname {
    labels: Vec<String>,
}

impl Hostname {
    pub fn parse(host: &str) -> Result<Self, UriError> {
        let lower = host.trim_end_matches('.').to_ascii_lowercase();
        let labels: Vec<String> = lower.split('.').map(str::to_owned).collect();
        let valid = |l: &String| {
            (1..=63).contains(&l.len())
                && l.bytes()
                    .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
        };
        if lower.is_empty() || !labels.iter().all(valid) {
            return Err(UriError::InvalidHost(host.to_owned()));
        }
        Ok(Hostname { labels })
    }

    /// Hostname of an original URI.
    pub fn of(uri: &OriginalUri) -> Result<Self, UriError> {
        let h = hostify(uri.as_str())?;
        Hostname::parse(&h.as_str()["http://".len()..])
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    fn is_ipv4(&self) -> bool {
        self.labels.len() == 4 && self.labels.iter().all(|l| l.bytes().all(|b| b.is_ascii_digit()))
    }
}

impl fmt::Display for Hostname {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.labels.join("."))
    }
}

/// Lowercase TLD key, e.g. `uk`, or a compound suffix such as `gc.ca` when
/// compound extraction is enabled.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TldLabel(String);

impl TldLabel {
    pub fn new(value: impl Into<String>) -> Self {
        TldLabel(value.into().trim_start_matches('.').to_ascii_lowercase())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TldLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Reduces a URI to `http://<host>`: lowercase host; scheme, userinfo,
/// port, path, query, and fragment dropped. Bare hostnames such as
/// `example.org/a` are accepted as if prefixed with `http://`.
pub fn hostify(input: &str) -> Result<OriginalUri, UriError> {
    let input = input.trim();
    let parsed = match url::Url::parse(input) {
        // `example.org:8080` parses with `example.org` as the scheme
        Ok(u) if u.scheme().contains('.') && u.host().is_none() => {
            url::Url::parse(&format!("http://{input}")).map_err(|_| UriError::NoHost(input.to_owned()))?
        }
        Ok(u) => u,
        Err(url::ParseError::RelativeUrlWithoutBase) => {
            url::Url::parse(&format!("http://{input}")).map_err(|_| UriError::NoHost(input.to_owned()))?
        }
        Err(_) => return Err(UriError::NoHost(input.to_owned())),
    };
    let host = match parsed.host() {
        Some(url::Host::Domain(d)) if !d.is_empty() => d.to_owned(),
        Some(url::Host::Ipv4(ip)) => ip.to_string(),
        Some(url::Host::Ipv6(_)) => return Err(UriError::InvalidHost(input.to_owned())),
        _ => return Err(UriError::NoHost(input.to_owned())),
    };
    let host = Hostname::parse(&host)?;
    Ok(OriginalUri::parse(format!("http://{host}")).expect("http://<valid host> is an absolute URI"))
}

/// How TLD keys are derived from hostnames.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum TldMode {
    /// The single rightmost label.
    #[default]
    RightmostLabel,
    /// The longest matching multi-label suffix from the list, falling back
    /// to the rightmost label.
    Compound(SuffixList),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SuffixList {
    suffixes: BTreeSet<String>,
}

/// A handful of second-level registrations, used when no list file is given.
pub const DEFAULT_SUFFIXES: &[&str] = &[
    "gc.ca", "co.uk", "ac.uk", "gov.uk", "org.uk", "ltd.uk", "co.jp", "ac.jp", "go.jp", "com.au", "edu.au", "gov.au",
    "com.br", "gov.br", "com.cn", "edu.cn", "gov.cn", "com.tw", "edu.tw", "gov.tw", "co.nz", "co.za", "com.pt",
    "gov.pt",
];

impl SuffixList {
    pub fn builtin() -> Self {
        Self::parse(&DEFAULT_SUFFIXES.join("\n"))
    }

    /// One suffix per line; `#` and `//` start comments; wildcard and
    /// exception rules of the public suffix list syntax are skipped.
    pub fn parse(text: &str) -> Self {
        let suffixes = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty() && !l.starts_with("//"))
            .filter(|l| !l.starts_with('*') && !l.starts_with('!'))
            .map(|l| l.trim_start_matches('.').to_ascii_lowercase())
            .collect();
        SuffixList { suffixes }
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn len(&self) -> usize {
        self.suffixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.suffixes.is_empty()
    }

    fn longest_match(&self, host: &Hostname) -> Option<String> {
        let labels = host.labels();
        (0..labels.len())
            .map(|i| labels[i..].join("."))
            .find(|s| s.contains('.') && self.suffixes.contains(s))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TldExtractor {
    mode: TldMode,
}

impl TldExtractor {
    pub fn new(mode: TldMode) -> Self {
        TldExtractor { mode }
    }

    pub fn compound(list: SuffixList) -> Self {
        TldExtractor {
            mode: TldMode::Compound(list),
        }
    }

    pub fn extract(&self, host: &Hostname) -> Result<TldLabel, UriError> {
        if host.labels().len() < 2 || host.is_ipv4() {
            return Err(UriError::NoTld(host.to_string()));
        }
        if let TldMode::Compound(list) = &self.mode {
            if let Some(s) = list.longest_match(host) {
                return Ok(TldLabel(s));
            }
        }
        Ok(TldLabel(host.labels().last().cloned().expect("non-empty")))
    }

    pub fn extract_uri(&self, uri: &OriginalUri) -> Result<TldLabel, UriError> {
        self.extract(&Hostname::of(uri)?)
    }
}

/// Rightmost-label TLD of a hostname.
pub fn extract_tld(host: &Hostname) -> Result<TldLabel, UriError> {
    TldExtractor::default().extract(host)
}
