//! The `mprof` command line.
//!
//! Exit codes: 0 on success, 2 on usage or input errors, 3 when the run
//! completed but some archive lookups failed.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::ffi::OsString;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use thiserror::Error;

use crate::aggregator::{Aggregator, ArchiveEndpoint, FaultInjection, Transport};
use crate::eval::{run_suite, Evaluator, Strategy};
use crate::memento_model::{ArchiveId, OriginalUri};
use crate::profiler::{
    build_profiles, compute_coverage, compute_cross_coverage, compute_growth, compute_language_distribution,
    compute_tld_distribution, LookupResult, ProfileSet,
};
use crate::router::{rank_archives, RoutingPolicy};
use crate::sampler::{
    ingest_fulltext_results, parse_log_line, read_language_universe, read_universe, sample_controlled_language,
    sample_controlled_tld, sample_from_logs, sample_random, LogPatterns, SampleSpec, SourceKind, UriSample,
};
use crate::simarchive::{
    default_spec, default_universe, generate_synthetic, load_corpus, read_manifest, write_synthetic, SimCorpus,
};
use crate::uri_tools::{hostify, SuffixList, TldExtractor, TldLabel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

impl CliError {
    fn input(e: impl std::fmt::Display) -> Self {
        CliError::Input(e.to_string())
    }
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "mprof",
    version,
    about = "Profile web archives and route Memento TimeMap lookups"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a URI sample.
    #[command(subcommand)]
    Sample(SampleCommand),
    /// Generate a synthetic set of archive corpora.
    Synth(SynthArgs),
    /// Look up a sample in every archive and write profiles and reports.
    Profile(ProfileArgs),
    /// Rank archives for one URI using a profile file.
    Route(RouteArgs),
    /// Ten-fold evaluation of TLD routing against a random baseline.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct TldArgs {
    /// Multi-label suffix list (one suffix per line). Implies --compound.
    #[arg(long)]
    pub suffix_list: Option<PathBuf>,
    /// Use compound TLDs such as gc.ca, from the built-in list unless
    /// --suffix-list is given.
    #[arg(long)]
    pub compound: bool,
}

impl TldArgs {
    fn extractor(&self) -> CliResult<TldExtractor> {
        make_extractor(self.suffix_list.as_deref(), self.compound)
    }
}

fn make_extractor(suffix_list: Option<&Path>, compound: bool) -> CliResult<TldExtractor> {
    match suffix_list {
        Some(p) => Ok(TldExtractor::compound(SuffixList::load(p).map_err(io_at(p))?)),
        None if compound => Ok(TldExtractor::compound(SuffixList::builtin())),
        None => Ok(TldExtractor::default()),
    }
}

#[derive(Debug, Subcommand)]
pub enum SampleCommand {
    /// Uniform sample of hosts from a universe file.
    Random {
        universe: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "random")]
        name: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Per-TLD sample: a fraction of each TLD's hosts, at least the floor,
    /// at most all of them.
    Tld {
        universe: PathBuf,
        /// TLDs to sample; defaults to every TLD in the universe.
        #[arg(long, value_delimiter = ',')]
        tlds: Vec<String>,
        #[arg(long, default_value_t = 0.02)]
        fraction: f64,
        #[arg(long, default_value_t = 100)]
        floor: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "tld")]
        name: String,
        #[command(flatten)]
        tld: TldArgs,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Fixed number of hosts per language from a `uri<TAB>lang` file.
    Language {
        universe: PathBuf,
        #[arg(long, default_value_t = 100)]
        per_language: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "language")]
        name: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Hosts from archive fulltext-search result files.
    Fulltext {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value = "fulltext")]
        name: String,
        /// Receives `combined.tsv` and one `<ARCHIVE>.tsv` per source archive.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Hosts from memento and TimeMap requests in access logs.
    Logs {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = LogKind::Wayback)]
        kind: LogKind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "logs")]
        name: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LogKind {
    Wayback,
    Aggregator,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub seed: u64,
    /// Hosts in the generated universe.
    #[arg(long, default_value_t = 2000)]
    pub size: usize,
    /// Let archives share URI-Ms for the same capture.
    #[arg(long)]
    pub collision: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct SourceArgs {
    /// TOML configuration listing archive endpoints.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Synthetic manifest; every corpus becomes a simulated archive.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Matrix {
    Coverage,
    Cross,
    Tld,
    Language,
    Growth,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub sample: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "coverage")]
    pub matrix: Vec<Matrix>,
    /// Directory of per-archive samples (`<ARCHIVE>.tsv`) for `--matrix cross`.
    /// A `combined.tsv` there is ignored.
    #[arg(long)]
    pub sources: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct RouteArgs {
    pub uri: String,
    #[arg(long)]
    pub profiles: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long, value_delimiter = ',')]
    pub exclude: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub fallback_order: Vec<String>,
    #[command(flatten)]
    pub tld: TldArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Defaults to the manifest's universe.
    #[arg(long)]
    pub sample: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "3,6,9")]
    pub k: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub exclude: Vec<String>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Do not print the per-report summary.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportKind {
    Http,
    Sim,
}

fn default_timeout_ms() -> u64 {
    10_000
}

fn default_concurrency() -> usize {
    8
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchiveConfig {
    pub id: ArchiveId,
    pub name: Option<String>,
    pub transport: TransportKind,
    /// Corpus TSV for `sim` archives.
    pub corpus: Option<PathBuf>,
    /// TimeMap URL with one `{uri}` placeholder, for `http` archives.
    pub template: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub timeout_rate: f64,
    #[serde(default)]
    pub error_rate: f64,
}

/// The `--config` file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    pub output_dir: Option<PathBuf>,
    pub suffix_list: Option<PathBuf>,
    #[serde(default)]
    pub compound_tlds: bool,
    /// Synthetic manifest whose corpora are added as `sim` archives.
    pub manifest: Option<PathBuf>,
    #[serde(default)]
    pub archives: Vec<ArchiveConfig>,
}

impl Config {
    /// Parses and validates a config. Relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> CliResult<Self> {
        let mut c: Config = toml::from_str(text).map_err(|e| CliError::Input(format!("config: {e}")))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        c.suffix_list.as_mut().map(resolve);
        c.output_dir.as_mut().map(resolve);
        c.manifest.as_mut().map(resolve);
        for a in &mut c.archives {
            a.corpus.as_mut().map(resolve);
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(io_at(path))?;
        Config::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn validate(&self) -> CliResult<()> {
        let mut ids = HashSet::new();
        for a in &self.archives {
            if !ids.insert(&a.id) {
                return Err(CliError::Input(format!("config: duplicate archive id {}", a.id)));
            }
            for (what, r) in [("timeout_rate", a.timeout_rate), ("error_rate", a.error_rate)] {
                if !(0.0..=1.0).contains(&r) {
                    return Err(CliError::Input(format!("config: {}: {what} must be in [0, 1]", a.id)));
                }
            }
            match a.transport {
                TransportKind::Sim => match &a.corpus {
                    None => return Err(CliError::Input(format!("config: {}: sim archive needs a corpus", a.id))),
                    Some(p) if !p.exists() => {
                        return Err(CliError::Input(format!(
                            "config: {}: no such corpus {}",
                            a.id,
                            p.display()
                        )))
                    }
                    _ => {}
                },
                TransportKind::Http => {
                    if a.template.is_none() {
                        return Err(CliError::Input(format!(
                            "config: {}: http archive needs a template",
                            a.id
                        )));
                    }
                }
            }
        }
        for p in [&self.suffix_list, &self.manifest].into_iter().flatten() {
            if !p.exists() {
                return Err(CliError::Input(format!("config: no such file {}", p.display())));
            }
        }
        if self.archives.is_empty() && self.manifest.is_none() {
            return Err(CliError::Input("config: no archives configured".into()));
        }
        Ok(())
    }

    fn from_manifest(path: &Path) -> CliResult<Self> {
        if !path.exists() {
            return Err(CliError::Input(format!("no such manifest {}", path.display())));
        }
        Ok(Config {
            seed: None,
            concurrency: default_concurrency(),
            output_dir: None,
            suffix_list: None,
            compound_tlds: false,
            manifest: Some(path.to_path_buf()),
            archives: Vec::new(),
        })
    }

    pub fn extractor(&self) -> CliResult<TldExtractor> {
        make_extractor(self.suffix_list.as_deref(), self.compound_tlds)
    }

    /// Endpoints in configuration order: explicit archives, then manifest
    /// archives in manifest order.
    pub fn endpoints(&self) -> CliResult<Vec<ArchiveEndpoint>> {
        let mut out = Vec::new();
        for (i, a) in self.archives.iter().enumerate() {
            let timeout = Duration::from_millis(a.timeout_ms);
            let name = a.name.clone().unwrap_or_else(|| a.id.to_string());
            let ep = match a.transport {
                TransportKind::Http => ArchiveEndpoint::new(
                    a.id.clone(),
                    name,
                    a.template.clone().unwrap_or_default(),
                    timeout,
                    Transport::Http,
                )
                .map_err(CliError::input)?,
                TransportKind::Sim => {
                    let path = a.corpus.as_ref().expect("validated");
                    let corpus = load_corpus(path, a.id.clone()).map_err(CliError::input)?;
                    let mut ep = ArchiveEndpoint::sim(
                        Arc::new(corpus),
                        FaultInjection {
                            timeout_rate: a.timeout_rate,
                            error_rate: a.error_rate,
                            seed: self.seed.unwrap_or(0) ^ i as u64,
                        },
                    );
                    ep.display_name = name;
                    ep.timeout = timeout;
                    ep
                }
            };
            out.push(ep);
        }
        if let Some(m) = &self.manifest {
            for c in manifest_corpora(m)? {
                if out.iter().any(|e| &e.archive == c.archive()) {
                    return Err(CliError::Input(format!("config: duplicate archive id {}", c.archive())));
                }
                out.push(ArchiveEndpoint::sim(Arc::new(c), FaultInjection::default()));
            }
        }
        Ok(out)
    }
}

/// Corpora of a manifest in the order its archives are listed.
fn manifest_corpora(path: &Path) -> CliResult<Vec<SimCorpus>> {
    let (manifest, _) = read_manifest(path).map_err(CliError::input)?;
    let base = path.parent().unwrap_or(Path::new("."));
    manifest
        .archives
        .iter()
        .map(|a| {
            let file = manifest
                .corpora
                .get(&a.id)
                .ok_or_else(|| CliError::Input(format!("manifest lists no corpus for {}", a.id)))?;
            load_corpus(&base.join(file), a.id.clone()).map_err(CliError::input)
        })
        .collect()
}

fn load_source(s: &SourceArgs) -> CliResult<Config> {
    match (&s.config, &s.manifest) {
        (Some(c), _) => Config::load(c),
        (None, Some(m)) => Config::from_manifest(m),
        (None, None) => Err(CliError::Input("one of --config or --manifest is required".into())),
    }
}

fn open(path: &Path) -> CliResult<BufReader<fs::File>> {
    fs::File::open(path).map(BufReader::new).map_err(io_at(path))
}

fn write_out(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, bytes).map_err(io_at(p)),
        None => io::stdout().write_all(bytes).map_err(|e| CliError::Io {
            path: "stdout".into(),
            source: e,
        }),
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> CliResult<()> {
    let p = dir.join(name);
    fs::write(&p, bytes).map_err(io_at(&p))
}

fn sample_bytes(s: &UriSample) -> Vec<u8> {
    let mut buf = Vec::new();
    s.write_tsv(&mut buf).expect("write to Vec");
    buf
}

fn archive_ids(list: &[String]) -> CliResult<Vec<ArchiveId>> {
    list.iter()
        .map(|s| ArchiveId::new(s.trim()).map_err(CliError::input))
        .collect()
}

fn read_sample(path: &Path) -> CliResult<UriSample> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    UriSample::read_tsv(name, SourceKind::DirectoryRandom, open(path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn runtime() -> CliResult<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Io {
            path: "runtime".into(),
            source: e,
        })
}

fn lookup_all(agg: &Aggregator, uris: &[OriginalUri], jobs: usize) -> CliResult<Vec<LookupResult>> {
    Ok(runtime()?.block_on(agg.lookup_batch(uris, jobs)))
}

fn report_failures(results: &[LookupResult]) -> i32 {
    let failed: Vec<&LookupResult> = results.iter().filter(|r| r.outcome.is_failure()).collect();
    if failed.is_empty() {
        return EXIT_OK;
    }
    eprintln!("warning: {} of {} lookups failed", failed.len(), results.len());
    for r in failed.iter().take(10) {
        eprintln!("  {} {}: {}", r.archive, r.original, r.outcome);
    }
    EXIT_PARTIAL
}

pub fn cmd_sample(cmd: &SampleCommand) -> CliResult<i32> {
    match cmd {
        SampleCommand::Random {
            universe,
            n,
            seed,
            name,
            out,
        } => {
            let u = read_universe(open(universe)?).map_err(CliError::input)?;
            let s = sample_random(name, &u, *n, &SampleSpec::with_seed(*seed)).map_err(CliError::input)?;
            write_out(out.as_deref(), &sample_bytes(&s))?;
        }
        SampleCommand::Tld {
            universe,
            tlds,
            fraction,
            floor,
            seed,
            name,
            tld,
            out,
        } => {
            let extractor = tld.extractor()?;
            let u = read_universe(open(universe)?).map_err(CliError::input)?;
            let wanted: Vec<TldLabel> = if tlds.is_empty() {
                u.iter()
                    .filter_map(|x| extractor.extract_uri(x).ok())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect()
            } else {
                tlds.iter().map(TldLabel::new).collect()
            };
            let spec = SampleSpec {
                tld_fraction: *fraction,
                tld_floor: *floor,
                ..SampleSpec::with_seed(*seed)
            };
            let r = sample_controlled_tld(name, &u, &wanted, &spec, &extractor).map_err(CliError::input)?;
            for (t, avail, picked) in &r.per_tld {
                eprintln!("{t}\t{avail}\t{picked}");
            }
            for t in &r.unknown_tlds {
                eprintln!("warning: no hosts for TLD {t}");
            }
            write_out(out.as_deref(), &sample_bytes(&r.sample))?;
        }
        SampleCommand::Language {
            universe,
            per_language,
            seed,
            name,
            out,
        } => {
            let u = read_language_universe(open(universe)?).map_err(CliError::input)?;
            let spec = SampleSpec {
                per_language_count: *per_language,
                ..SampleSpec::with_seed(*seed)
            };
            let s = sample_controlled_language(name, &u, &spec).map_err(CliError::input)?;
            write_out(out.as_deref(), &sample_bytes(&s))?;
        }
        SampleCommand::Fulltext { files, name, out_dir } => {
            let mut inputs = Vec::new();
            for f in files {
                inputs.push((f.display().to_string(), open(f)?));
            }
            let r = ingest_fulltext_results(name, inputs).map_err(CliError::input)?;
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            fs::create_dir_all(out_dir).map_err(io_at(out_dir))?;
            write_file(out_dir, "combined.tsv", &sample_bytes(&r.combined))?;
            for (a, s) in &r.per_archive {
                write_file(out_dir, &format!("{a}.tsv"), &sample_bytes(s))?;
            }
        }
        SampleCommand::Logs {
            files,
            kind,
            n,
            seed,
            name,
            out,
        } => {
            let patterns = LogPatterns::default();
            let mut records = Vec::new();
            for f in files {
                for (i, line) in open(f)?.lines().enumerate() {
                    let line = line.map_err(io_at(f))?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    match parse_log_line(&line, &patterns) {
                        Ok(r) => records.push(r),
                        Err(e) => eprintln!("warning: {}:{}: {e}", f.display(), i + 1),
                    }
                }
            }
            let kind = match kind {
                LogKind::Wayback => SourceKind::WaybackLog,
                LogKind::Aggregator => SourceKind::AggregatorLog,
            };
            let s =
                sample_from_logs(name, kind, records, *n, &SampleSpec::with_seed(*seed)).map_err(CliError::input)?;
            write_out(out.as_deref(), &sample_bytes(&s))?;
        }
    }
    Ok(EXIT_OK)
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult<i32> {
    let mut spec = default_spec(args.seed);
    spec.universe = default_universe(args.size);
    spec.collision_mode = args.collision;
    let corpora = generate_synthetic(&spec).map_err(CliError::input)?;
    let manifest = write_synthetic(&spec, &corpora, &args.out).map_err(CliError::input)?;
    println!("{}", manifest.display());
    Ok(EXIT_OK)
}

pub fn cmd_profile(args: &ProfileArgs) -> CliResult<i32> {
    let config = load_source(&args.source)?;
    let extractor = config.extractor()?;
    let sample = read_sample(&args.sample)?;
    if sample.is_empty() {
        return Err(CliError::Input(format!("{}: sample is empty", args.sample.display())));
    }
    let want = |m: Matrix| args.matrix.contains(&m);
    let mut sources = std::collections::BTreeMap::new();
    if want(Matrix::Cross) {
        let dir = args
            .sources
            .as_ref()
            .ok_or_else(|| CliError::Input("--matrix cross needs --sources".into()))?;
        let mut entries: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io_at(dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "tsv"))
            .filter(|p| p.file_stem().is_some_and(|s| s != "combined"))
            .collect();
        entries.sort();
        for p in entries {
            let stem = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let Ok(id) = ArchiveId::new(&stem) else { continue };
            sources.insert(id, read_sample(&p)?);
        }
    }

    let endpoints = config.endpoints()?;
    let archives: Vec<ArchiveId> = endpoints.iter().map(|e| e.archive.clone()).collect();
    let agg = Aggregator::new(endpoints, config.concurrency);
    let mut uris: BTreeSet<OriginalUri> = sample.uris().cloned().collect();
    for s in sources.values() {
        uris.extend(s.uris().cloned());
    }
    let uris: Vec<OriginalUri> = uris.into_iter().collect();
    let all = lookup_all(&agg, &uris, args.jobs)?;
    let in_sample: Vec<LookupResult> = all
        .iter()
        .filter(|r| sample.get(&r.original).is_some())
        .cloned()
        .collect();

    let languages: HashMap<OriginalUri, String> = sample
        .entries()
        .iter()
        .filter_map(|e| e.lang.clone().map(|l| (e.uri.clone(), l)))
        .collect();
    let profiles = build_profiles(&archives, &in_sample, &extractor, &languages).map_err(CliError::input)?;
    fs::create_dir_all(&args.out).map_err(io_at(&args.out))?;
    write_file(&args.out, "profiles.json", profiles.to_json().as_bytes())?;

    let mut buf = Vec::new();
    for m in &args.matrix {
        buf.clear();
        let name = match m {
            Matrix::Coverage => {
                let r = compute_coverage(&sample, &archives, &in_sample).map_err(CliError::input)?;
                r.write_tsv(&mut buf)
                    .and_then(|_| {
                        r.warnings
                            .iter()
                            .try_for_each(|w| writeln!(io::stderr(), "warning: {w}"))
                    })
                    .expect("write to Vec");
                "coverage.tsv"
            }
            Matrix::Cross => {
                let wanted: HashSet<&OriginalUri> = sources.values().flat_map(|s| s.uris()).collect();
                let in_sources: Vec<LookupResult> =
                    all.iter().filter(|r| wanted.contains(&r.original)).cloned().collect();
                compute_cross_coverage(&sources, &archives, &in_sources)
                    .map_err(CliError::input)?
                    .write_tsv(&mut buf)
                    .expect("write to Vec");
                "cross.tsv"
            }
            Matrix::Tld => {
                compute_tld_distribution(&in_sample, &extractor)
                    .write_tsv(&mut buf)
                    .expect("write to Vec");
                "tld.tsv"
            }
            Matrix::Language => {
                compute_language_distribution(&sample, &archives, &in_sample)
                    .map_err(CliError::input)?
                    .write_tsv(&mut buf)
                    .expect("write to Vec");
                "language.tsv"
            }
            Matrix::Growth => {
                compute_growth(&in_sample).write_tsv(&mut buf).expect("write to Vec");
                "growth.tsv"
            }
        };
        write_file(&args.out, name, &buf)?;
    }
    Ok(report_failures(&all))
}

pub fn cmd_route(args: &RouteArgs) -> CliResult<i32> {
    let text = fs::read_to_string(&args.profiles).map_err(io_at(&args.profiles))?;
    let profiles =
        ProfileSet::from_json(&text).map_err(|e| CliError::Input(format!("{}: {e}", args.profiles.display())))?;
    let uri = hostify(&args.uri).map_err(|e| CliError::Input(format!("{}: {e}", args.uri)))?;
    let mut policy = RoutingPolicy::top(args.k).excluding(archive_ids(&args.exclude)?);
    policy.fallback_order = archive_ids(&args.fallback_order)?;
    let ranking = rank_archives(&uri, &profiles.archives, &policy, &args.tld.extractor()?).map_err(CliError::input)?;
    let mut buf = format!("fallback\t{}\n", ranking.fallback).into_bytes();
    ranking.write_tsv(&mut buf).expect("write to Vec");
    write_out(None, &buf)?;
    Ok(EXIT_OK)
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<i32> {
    let config = load_source(&args.source)?;
    let extractor = config.extractor()?;
    let sample = match (&args.sample, &config.manifest) {
        (Some(p), _) => read_sample(p)?,
        (None, Some(m)) => {
            let (manifest, _) = read_manifest(m).map_err(CliError::input)?;
            let base = m.parent().unwrap_or(Path::new("."));
            read_sample(&base.join(&manifest.universe_file))?
        }
        (None, None) => return Err(CliError::Input("--sample is required without a manifest".into())),
    };
    let exclude: BTreeSet<ArchiveId> = archive_ids(&args.exclude)?.into_iter().collect();
    let endpoints = config.endpoints()?;
    let archives: Vec<ArchiveId> = endpoints.iter().map(|e| e.archive.clone()).collect();
    if let Some(x) = exclude.iter().find(|x| !archives.contains(x)) {
        return Err(CliError::Input(format!("--exclude: unknown archive {x}")));
    }
    let eligible = archives.len() - exclude.len();
    for &k in &args.k {
        let limit = if exclude.is_empty() { archives.len() } else { eligible };
        if k == 0 || k > limit {
            return Err(CliError::Input(format!("--k {k}: must be between 1 and {limit}")));
        }
    }

    let agg = Aggregator::new(endpoints, config.concurrency);
    let uris: Vec<OriginalUri> = sample.uris().cloned().collect();
    let lookups = lookup_all(&agg, &uris, args.jobs)?;
    let evaluator =
        Evaluator::new(&sample, &archives, &lookups, args.seed, args.jobs, &extractor).map_err(CliError::input)?;
    let suite = run_suite(&evaluator, &args.k, &exclude, sample.len()).map_err(CliError::input)?;

    fs::create_dir_all(&args.out).map_err(io_at(&args.out))?;
    write_file(&args.out, "report.json", suite.to_json().as_bytes())?;
    for (strategy, prefix) in [(Strategy::Profile, ""), (Strategy::Random, "baseline_")] {
        let mut buf = Vec::new();
        suite.write_summary_tsv(&mut buf, strategy).expect("write to Vec");
        write_file(&args.out, &format!("{prefix}summary.tsv"), &buf)?;
        buf.clear();
        suite.write_histogram_tsv(&mut buf, strategy).expect("write to Vec");
        write_file(&args.out, &format!("{prefix}histogram.tsv"), &buf)?;
    }
    let mut stdout = io::stdout().lock();
    for r in suite.reports.iter().filter(|_| !args.quiet) {
        let ex = if r.excluded.is_empty() {
            "-".to_string()
        } else {
            r.excluded.iter().map(ArchiveId::as_str).collect::<Vec<_>>().join(",")
        };
        let _ = writeln!(
            stdout,
            "{:?}\tk={}\texcluded={}\tmean_success={:.4}\tcomplete_fraction={:.4}",
            r.strategy, r.k, ex, r.aggregate.mean_success, r.aggregate.complete_fraction
        );
    }
    Ok(report_failures(&lookups))
}

pub fn execute(cli: &Cli) -> CliResult<i32> {
    match &cli.command {
        Command::Sample(c) => cmd_sample(c),
        Command::Synth(a) => cmd_synth(a),
        Command::Profile(a) => cmd_profile(a),
        Command::Route(a) => cmd_route(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("mprof: {e}");
            EXIT_INPUT
        }
    }
}
