mod common;

use std::fs;

use memento_profiles::simarchive::{generate_synthetic, read_manifest, write_synthetic};

#[test]
fn bundled_corpora_regenerate_byte_for_byte() {
    let (manifest, spec) = read_manifest(&common::manifest_path()).unwrap();
    let corpora = generate_synthetic(&spec).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    write_synthetic(&spec, &corpora, tmp.path()).unwrap();
    let dir = common::synth_dir();
    let mut names: Vec<&String> = manifest.corpora.values().collect();
    names.push(&manifest.universe_file);
    let manifest_file = "manifest.json".to_string();
    names.push(&manifest_file);
    for name in names {
        let want = fs::read(dir.join(name)).unwrap();
        let got = fs::read(tmp.path().join(name)).unwrap();
        assert!(want == got, "{name} differs from the bundled copy");
    }
}
