mod common;

use std::fs;
use std::path::Path;

use memento_profiles::cli::{run, Config, EXIT_INPUT, EXIT_OK, EXIT_PARTIAL};
use serde_json::Value;

fn mprof(args: &[&str]) -> i32 {
    run(std::iter::once("mprof").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn lines(p: &Path) -> Vec<String> {
    fs::read_to_string(p).unwrap().lines().map(str::to_owned).collect()
}

#[test]
fn sample_random_writes_n_hosts() {
    let tmp = tempfile::tempdir().unwrap();
    let universe = common::synth_dir().join("universe.tsv");
    let out = tmp.path().join("s.tsv");
    assert_eq!(
        mprof(&[
            "sample",
            "random",
            s(&universe),
            "--n",
            "300",
            "--seed",
            "1",
            "-o",
            s(&out)
        ]),
        EXIT_OK
    );
    let first = lines(&out);
    assert_eq!(first.len(), 300);
    assert_eq!(
        mprof(&[
            "sample",
            "random",
            s(&universe),
            "--n",
            "300",
            "--seed",
            "1",
            "-o",
            s(&out)
        ]),
        EXIT_OK
    );
    assert_eq!(lines(&out), first);
}

#[test]
fn sample_tld_applies_fraction_and_floor() {
    let tmp = tempfile::tempdir().unwrap();
    let universe = tmp.path().join("u.txt");
    let mut text = String::new();
    for i in 0..10_000 {
        text.push_str(&format!("http://h{i}.com/page\n"));
    }
    for i in 0..50 {
        text.push_str(&format!("http://h{i}.is\n"));
    }
    fs::write(&universe, text).unwrap();
    let out = tmp.path().join("t.tsv");
    let code = mprof(&[
        "sample",
        "tld",
        s(&universe),
        "--fraction",
        "0.02",
        "--floor",
        "100",
        "--seed",
        "3",
        "-o",
        s(&out),
    ]);
    assert_eq!(code, EXIT_OK);
    let rows = lines(&out);
    assert_eq!(rows.iter().filter(|r| r.split('\t').nth(1) == Some("com")).count(), 200);
    assert_eq!(rows.iter().filter(|r| r.split('\t').nth(1) == Some("is")).count(), 50);
}

#[test]
fn sample_language_and_logs() {
    let tmp = tempfile::tempdir().unwrap();
    let universe = common::synth_dir().join("universe.tsv");
    let out = tmp.path().join("l.tsv");
    assert_eq!(
        mprof(&[
            "sample",
            "language",
            s(&universe),
            "--per-language",
            "10",
            "--seed",
            "2",
            "-o",
            s(&out)
        ]),
        EXIT_OK
    );
    let rows = lines(&out);
    let fre = rows.iter().filter(|r| r.split('\t').nth(2) == Some("fre")).count();
    assert_eq!(fre, 10);

    let log = tmp.path().join("access.log");
    fs::write(
        &log,
        "1.2.3.4 - - [22/Feb/2012:10:00:00 +0000] \"GET /web/20090101000000/http://www.bbc.co.uk/news HTTP/1.1\" 200 10\n\
         1.2.3.4 - - [22/Feb/2012:10:00:01 +0000] \"GET /timemap/link/http://example.org/ HTTP/1.1\" 200 10\n\
         1.2.3.4 - - [22/Feb/2012:10:00:02 +0000] \"GET /static/logo.png HTTP/1.1\" 200 10\n\
         garbage line\n",
    )
    .unwrap();
    let out = tmp.path().join("logs.tsv");
    assert_eq!(
        mprof(&["sample", "logs", s(&log), "--n", "10", "--seed", "1", "-o", s(&out)]),
        EXIT_OK
    );
    let rows = lines(&out);
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("http://example.org\t"));
    assert!(rows[1].starts_with("http://www.bbc.co.uk\t"));
}

#[test]
fn missing_input_is_exit_2() {
    assert_eq!(
        mprof(&[
            "sample",
            "random",
            "/nonexistent/universe.txt",
            "--n",
            "5",
            "--seed",
            "1"
        ]),
        EXIT_INPUT
    );
    assert_eq!(
        mprof(&["sample", "random", "x.txt", "--n", "5"]),
        EXIT_INPUT,
        "--seed is mandatory"
    );
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        mprof(&[
            "evaluate",
            "--manifest",
            "/nonexistent/manifest.json",
            "--seed",
            "1",
            "--out",
            s(tmp.path())
        ]),
        EXIT_INPUT
    );
}

#[test]
fn profile_matches_golden_and_writes_matrices() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("prof");
    let fulltext = tmp.path().join("ft");
    let mut args = vec!["sample".to_string(), "fulltext".into()];
    let mut files: Vec<_> = fs::read_dir(common::fixtures().join("fulltext"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    args.extend(files.iter().map(|p| p.display().to_string()));
    args.extend(["--out-dir".into(), fulltext.display().to_string()]);
    assert_eq!(run(std::iter::once("mprof".to_string()).chain(args)), EXIT_OK);
    assert_eq!(lines(&fulltext.join("CAT.tsv")).len(), 52);

    let code = mprof(&[
        "profile",
        "--manifest",
        s(&common::manifest_path()),
        "--sample",
        s(&common::synth_dir().join("universe.tsv")),
        "--out",
        s(&out),
        "--matrix",
        "coverage,cross,tld,language,growth",
        "--sources",
        s(&fulltext),
    ]);
    assert_eq!(code, EXIT_OK);
    let ours: Value = serde_json::from_str(&fs::read_to_string(out.join("profiles.json")).unwrap()).unwrap();
    let golden: Value =
        serde_json::from_str(&fs::read_to_string(common::fixtures().join("golden/profiles.json")).unwrap()).unwrap();
    assert_eq!(ours, golden);

    let cross = lines(&out.join("cross.tsv"));
    assert_eq!(cross.len(), 13);
    assert!(cross[0].starts_with("source\tIA\tLoC\t"));
    let cat = cross.iter().find(|r| r.starts_with("CAT\t")).unwrap();
    let header: Vec<&str> = cross[0].split('\t').collect();
    let col = header.iter().position(|h| *h == "CAT").unwrap();
    assert_eq!(cat.split('\t').nth(col), Some("76.92"));
    for f in ["coverage.tsv", "tld.tsv", "language.tsv", "growth.tsv"] {
        assert!(fs::read_to_string(out.join(f)).unwrap().ends_with('\n'));
    }
}

#[test]
fn empty_sample_is_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty.tsv");
    fs::write(&empty, "# nothing\n").unwrap();
    let code = mprof(&[
        "profile",
        "--manifest",
        s(&common::manifest_path()),
        "--sample",
        s(&empty),
        "--out",
        s(&tmp.path().join("p")),
    ]);
    assert_eq!(code, EXIT_INPUT);
}

#[test]
fn route_against_fixture_profile() {
    let golden = common::fixtures().join("golden/profiles.json");
    assert_eq!(
        mprof(&[
            "route",
            "http://www.example.cat/x",
            "--profiles",
            s(&golden),
            "--k",
            "3"
        ]),
        EXIT_OK
    );
    assert_eq!(
        mprof(&["route", "http://example.zz", "--profiles", s(&golden), "--k", "3"]),
        EXIT_OK
    );
    assert_eq!(
        mprof(&["route", "http://example.cat", "--profiles", s(&golden), "--k", "13"]),
        EXIT_INPUT
    );
    assert_eq!(
        mprof(&["route", "http://example.cat", "--profiles", s(&golden), "--k", "0"]),
        EXIT_INPUT
    );
}

#[test]
fn route_output_shape() {
    let bin = env!("CARGO_BIN_EXE_mprof");
    let golden = common::fixtures().join("golden/profiles.json");
    let out = std::process::Command::new(bin)
        .args([
            "route",
            "http://www.example.cat/x",
            "--profiles",
            s(&golden),
            "--k",
            "3",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "fallback\tfalse");
    assert!(
        rows[1].starts_with("http://www.example.cat\tcat\t1\tCAT\t"),
        "{}",
        rows[1]
    );
    assert_eq!(rows.len(), 13);

    let out = std::process::Command::new(bin)
        .args(["route", "http://example.zz", "--profiles", s(&golden), "--k", "3"])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("fallback\ttrue\n"));
    // no archive has seen .zz: overall coverage order, IA first
    assert!(text.lines().nth(1).unwrap().contains("\t1\tIA\t"));
}

#[test]
fn config_validation() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = common::synth_dir().join("CAT.tsv");
    let good = format!(
        "seed = 1\nconcurrency = 4\n\n[[archives]]\nid = \"CAT\"\ntransport = \"sim\"\ncorpus = \"{}\"\n\n\
         [[archives]]\nid = \"WEB\"\nname = \"Remote\"\ntransport = \"http\"\ntemplate = \"http://localhost:1/timemap/link/{{uri}}\"\ntimeout_ms = 50\n",
        corpus.display()
    );
    let c = Config::parse(&good, tmp.path()).unwrap();
    assert_eq!(c.archives.len(), 2);
    assert_eq!(c.endpoints().unwrap().len(), 2);

    let dup = good.replace("id = \"WEB\"", "id = \"CAT\"");
    assert!(Config::parse(&dup, tmp.path()).is_err());
    let missing = good.replace("CAT.tsv", "NOPE.tsv");
    assert!(Config::parse(&missing, tmp.path()).is_err());
    let no_template = good.replace("template = ", "# template = ");
    assert!(Config::parse(&no_template, tmp.path()).is_err());
    let bad_placeholder = good.replace("{uri}", "");
    let c = Config::parse(&bad_placeholder, tmp.path()).unwrap();
    assert!(c.endpoints().is_err());
    assert!(Config::parse("bogus = 1\n", tmp.path()).is_err());
}

#[test]
fn relative_paths_resolve_against_config_dir() {
    let tmp = tempfile::tempdir().unwrap();
    fs::copy(common::synth_dir().join("IC.tsv"), tmp.path().join("IC.tsv")).unwrap();
    let path = tmp.path().join("mprof.toml");
    fs::write(
        &path,
        "[[archives]]\nid = \"IC\"\ntransport = \"sim\"\ncorpus = \"IC.tsv\"\n",
    )
    .unwrap();
    let c = Config::load(&path).unwrap();
    assert_eq!(
        c.archives[0].corpus.as_deref(),
        Some(tmp.path().join("IC.tsv").as_path())
    );
}

#[test]
fn failing_archives_give_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let synth = common::synth_dir();
    let mut cfg = String::from("seed = 5\n");
    for (id, rate) in [("IA", 0.0), ("CAT", 0.0), ("IC", 0.3)] {
        cfg.push_str(&format!(
            "[[archives]]\nid = \"{id}\"\ntransport = \"sim\"\ncorpus = \"{}\"\nerror_rate = {rate}\n",
            synth.join(format!("{id}.tsv")).display()
        ));
    }
    let path = tmp.path().join("c.toml");
    fs::write(&path, cfg).unwrap();
    let code = mprof(&[
        "evaluate",
        "--config",
        s(&path),
        "--sample",
        s(&synth.join("universe.tsv")),
        "--k",
        "1,2",
        "--seed",
        "9",
        "--out",
        s(&tmp.path().join("ev")),
        "--quiet",
    ]);
    assert_eq!(code, EXIT_PARTIAL);
    let summary = lines(&tmp.path().join("ev/summary.tsv"));
    assert_eq!(summary[0], "k\texcluded\tfold\tmean_success\tcomplete_fraction");
    assert_eq!(summary.len(), 1 + 2 * 11);
}

#[test]
fn evaluate_with_exclusion_writes_both_variants() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ev");
    let code = mprof(&[
        "evaluate",
        "--manifest",
        s(&common::manifest_path()),
        "--k",
        "3",
        "--exclude",
        "IA",
        "--seed",
        "42",
        "--out",
        s(&out),
        "--quiet",
    ]);
    assert_eq!(code, EXIT_OK);
    let summary = lines(&out.join("summary.tsv"));
    assert!(summary.iter().any(|r| r.starts_with("3\t-\tall\t")));
    assert!(summary.iter().any(|r| r.starts_with("3\tIA\tall\t")));
    let hist = lines(&out.join("histogram.tsv"));
    assert_eq!(hist.len(), 1 + 2 * 20);
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["reports"].as_array().unwrap().len(), 4);
    assert_eq!(
        mprof(&[
            "evaluate",
            "--manifest",
            s(&common::manifest_path()),
            "--k",
            "12",
            "--exclude",
            "IA",
            "--seed",
            "1",
            "--out",
            s(&out)
        ]),
        EXIT_INPUT
    );
}

#[test]
fn synth_round_trips_through_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        mprof(&["synth", "--seed", "3", "--size", "200", "--out", s(tmp.path())]),
        EXIT_OK
    );
    let manifest: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["universe_size"], 200);
    assert_eq!(manifest["corpora"].as_object().unwrap().len(), 12);
}
