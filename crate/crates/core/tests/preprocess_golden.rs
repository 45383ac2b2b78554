//! The fixture corpus must reproduce the committed weekly dataset byte for
//! byte. Regenerate both with `tests/fixtures/preprocess/make_fixture.py`.

use std::path::PathBuf;

use epipinn_core::data::{preprocess_dir, write_dataset, Channel, PreprocessOptions, DEFAULT_CUTOFF_WEEK};

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/preprocess")
}

#[test]
fn fixture_corpus_matches_golden_files() {
    let (ds, summary) = preprocess_dir(
        &fixture().join("raw"),
        PreprocessOptions {
            cutoff_week: DEFAULT_CUTOFF_WEEK,
        },
    )
    .unwrap();
    assert!(summary.weeks_available > 110);
    assert_eq!(ds.weeks(), 110);
    assert_eq!(ds.channel(Channel::Hosp).start_week, 21);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dataset.csv");
    write_dataset(&out, &ds).unwrap();
    for name in ["dataset.csv", "dataset.scaling.csv", "dataset.meta.toml"] {
        let got = std::fs::read(dir.path().join(name)).unwrap();
        let want = std::fs::read(fixture().join("golden").join(name)).unwrap();
        assert!(got == want, "{name} differs from the golden file");
    }
}
