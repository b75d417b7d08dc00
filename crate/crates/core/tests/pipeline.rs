use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use sar_narrator::config::{ConfigError, Overrides, PipelineConfig};
use sar_narrator::corpus::Method;
use sar_narrator::ingest::Task;
use sar_narrator::pipeline::{
    Pipeline, PipelineError, MANIFEST_FILE, STATS_FILE, TEST_FILE, TRAIN_FILE,
};

fn mini_config(out: &Path) -> PipelineConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/mini/pipeline.toml");
    let flags = Overrides {
        output_dir: Some(out.to_owned()),
        ..Overrides::default()
    };
    PipelineConfig::load_with_env(&path, &flags, |_| None).unwrap()
}

#[test]
fn ingest_reads_every_fixture_source() {
    let out = tempfile::tempdir().unwrap();
    let report = Pipeline::new(mini_config(out.path())).ingest().unwrap();
    assert_eq!(report.samples.len(), 20);
    assert_eq!(report.dropped(), 0);
    let count = |task| report.samples.iter().filter(|s| s.task() == task).count();
    assert_eq!(count(Task::Detection), 8);
    assert_eq!(count(Task::Segmentation), 6);
    assert_eq!(count(Task::Paired), 6);
    assert!(out.path().join("samples.jsonl").exists());
}

#[test]
fn stages_from_disk_match_run_all() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let summary = Pipeline::new(mini_config(a.path())).run_all().unwrap();
    assert_eq!(summary.manifest.len(), 18);
    assert_eq!(summary.duplicates_dropped, 2);
    assert_eq!(summary.train + summary.test, 18);

    let staged = Pipeline::new(mini_config(b.path()));
    staged.ingest().unwrap();
    staged.caption_from_disk().unwrap();
    staged.rewrite_from_disk().unwrap();
    staged.dedup_from_disk().unwrap();
    staged.assemble_from_disk().unwrap();
    staged.stats_from_disk().unwrap();
    staged.split_from_disk().unwrap();

    for name in [
        MANIFEST_FILE,
        STATS_FILE,
        TRAIN_FILE,
        TEST_FILE,
        "manifest.header.json",
    ] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn replay_uses_the_cassette_without_fallback() {
    let out = tempfile::tempdir().unwrap();
    let summary = Pipeline::new(mini_config(out.path())).run_all().unwrap();
    let records = &summary.manifest.records;
    assert!(records.iter().all(|r| !r.fallback_used));
    let fused: Vec<_> = records
        .iter()
        .filter(|r| r.method == Method::Sa2cFused)
        .collect();
    assert_eq!(fused.len(), 6);
    assert!(fused.iter().all(|r| r.raw_caption.is_some()));
    assert_eq!(summary.manifest.header.created, 0);
}

#[test]
fn live_mode_without_key_is_refused() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/mini/pipeline.toml");
    let env: HashMap<&str, &str> = [("SAR_NARRATOR_MODE", "live")].into();
    let err = PipelineConfig::load_with_env(&path, &Overrides::default(), |k| {
        env.get(k).map(|v| (*v).to_owned())
    })
    .unwrap_err();
    assert!(matches!(err, ConfigError::MissingApiKey));
    assert_eq!(PipelineError::from(err).exit_code(), 2);
}

fn png(path: &Path, shade: u8) {
    image::RgbImage::from_pixel(32, 32, image::Rgb([shade, shade, shade]))
        .save(path)
        .unwrap();
}

/// Two sources; one paired image is not a PNG at all.
fn corrupt_fixture(dir: &Path) -> PathBuf {
    fs::create_dir_all(dir.join("images")).unwrap();
    fs::create_dir_all(dir.join("pairs")).unwrap();
    png(&dir.join("images/a.png"), 40);
    png(&dir.join("pairs/p0.png"), 90);
    fs::write(dir.join("pairs/p1.png"), b"not an image").unwrap();
    fs::write(
        dir.join("coco.json"),
        r#"{"images": [{"id": 1, "file_name": "images/a.png", "width": 32, "height": 32}],
            "annotations": [{"id": 1, "image_id": 1, "category_id": 1, "bbox": [2, 2, 8, 8]}],
            "categories": [{"id": 1, "name": "ship"}]}"#,
    )
    .unwrap();
    fs::write(
        dir.join("pairs.tsv"),
        "p0\tA ship beside a pier.\np1\tA bridge over a river.\n",
    )
    .unwrap();
    fs::write(dir.join("cassette.jsonl"), "").unwrap();
    let store = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/icl_examples.jsonl");
    let config = dir.join("pipeline.toml");
    fs::write(
        &config,
        format!(
            r#"seed = 1

[[sources]]
name = "det"
task = "detection"
adapter = "coco"
paths = ["coco.json"]

[[sources]]
name = "pairs"
task = "paired"
adapter = "paired_tsv"
paths = ["pairs.tsv"]
image_dir = "pairs"

[rewrite]
cassette = "cassette.jsonl"
icl_store = {:?}
"#,
            store.display().to_string()
        ),
    )
    .unwrap();
    config
}

#[test]
fn corrupt_image_is_dropped_and_logged() {
    let dir = tempfile::tempdir().unwrap();
    let path = corrupt_fixture(dir.path());
    let config = PipelineConfig::load_with_env(&path, &Overrides::default(), |_| None).unwrap();
    let pipeline = Pipeline::new(config);
    let report = pipeline.ingest().unwrap();
    assert_eq!(report.samples.len(), 2);
    assert_eq!(report.dropped(), 1);
    let ledger = fs::read_to_string(pipeline.artifact("validation.jsonl")).unwrap();
    let dropped: Vec<&str> = ledger.lines().filter(|l| l.contains("\"drop\"")).collect();
    assert_eq!(dropped.len(), 1);
    assert!(dropped[0].contains("pairs/p1") && dropped[0].contains("corrupted_image"));
}

#[test]
fn cassette_miss_falls_back_to_rules() {
    let dir = tempfile::tempdir().unwrap();
    let path = corrupt_fixture(dir.path());
    let config = PipelineConfig::load_with_env(&path, &Overrides::default(), |_| None).unwrap();
    let pipeline = Pipeline::new(config);
    let samples = pipeline.ingest().unwrap().samples;
    let captions = pipeline.caption(&samples).unwrap();
    let rewritten = pipeline.rewrite(&captions, &samples).unwrap();
    let paired: Vec<_> = rewritten
        .iter()
        .filter(|r| r.method == Method::PairedRewritten)
        .collect();
    assert_eq!(paired.len(), 1);
    assert!(paired[0].fallback_used);
    assert_eq!(paired[0].caption, "A ship beside a pier.");
}
