mod common;

use std::fs;
use std::path::Path;

use common::write_dataset;
use qads::config::LoadedConfig;
use qads::mixture::Strategy;
use qads::pipeline::{is_fresh, meta_path, read_meta, run_mix, RunContext, EMBEDDINGS_FILE, QUALITY_FILE};
use qads::Error;
use serde_json::{json, Value};

fn config(dir: &Path, ratios: Value, seed: u64) -> LoadedConfig {
    write_dataset(dir, "data/big.jsonl", "big", 60);
    write_dataset(dir, "data/mid.jsonl", "mid", 25);
    write_dataset(dir, "data/small.jsonl", "small", 8);
    write_dataset(dir, "data/test.jsonl", "test", 12);
    let cfg = json!({
        "name": "t",
        "seed": seed,
        "provider": {"kind": "mock", "mock_seed": 5, "mock_dim": 6, "parallelism": 3},
        "quality": {"n1": 15, "n2": 4, "test_datasets": ["test"]},
        "ratios": ratios,
        "datasets": [
            {"name": "big", "path": "data/big.jsonl", "strategy": "qads"},
            {"name": "mid", "path": "data/mid.jsonl", "strategy": "kcenter"},
            {"name": "small", "path": "data/small.jsonl", "strategy": "random"},
            {"name": "test", "path": "data/test.jsonl", "strategy": "keep-all"}
        ],
        "output_dir": "out"
    });
    let path = dir.join("cfg.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    LoadedConfig::load(&path).unwrap()
}

fn with_ratios(mut c: LoadedConfig, ratios: &[f64]) -> LoadedConfig {
    for (d, r) in c.config.datasets.iter_mut().zip(ratios) {
        if d.strategy != Strategy::KeepAll {
            d.ratio = Some(*r);
        }
    }
    c
}

fn read_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect()
}

#[test]
fn explicit_mix_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let c = with_ratios(config(dir.path(), json!({"mode": "explicit"}), 7), &[0.25, 0.4, 0.5]);
    let ctx = RunContext::new(c, None, None, "mix").unwrap();
    let out = run_mix(&ctx).unwrap();
    let budgets: Vec<(String, usize)> = out
        .manifest
        .entries
        .iter()
        .map(|e| (e.dataset.clone(), e.budget))
        .collect();
    assert_eq!(
        budgets,
        [
            ("big".into(), 15),
            ("mid".into(), 10),
            ("small".into(), 4),
            ("test".into(), 12)
        ]
    );
    assert_eq!(out.manifest.total, 41);
    // big is scored; only samples not drawn as prompts are missing
    assert_eq!(out.manifest.entries[0].missing_quality, 60 - 15);
    let mixture = fs::read_to_string(dir.path().join("out/mixture.jsonl")).unwrap();
    assert_eq!(mixture.lines().count(), 41);
    for f in ["mixture.jsonl", "plan.json", "quality.jsonl", "embeddings.qemb"] {
        let meta = read_meta(&dir.path().join("out").join(f)).unwrap();
        assert_eq!(meta.seed, Some(7));
        assert_eq!(meta.config_hash, ctx.config().hash());
        assert_eq!(meta.provider, "mock:seed=5:dim=6");
    }
}

#[test]
fn reruns_reuse_caches_and_match_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let c = with_ratios(config(dir.path(), json!({"mode": "explicit"}), 7), &[0.25, 0.4, 0.5]);
    let ctx = RunContext::new(c, None, None, "mix").unwrap();
    let first = run_mix(&ctx).unwrap();
    assert!(!first.embeddings_cached && !first.quality_cached);
    let bytes = read_outputs(&ctx.out_dir);
    let second = run_mix(&ctx).unwrap();
    assert!(second.embeddings_cached && second.quality_cached);
    assert_eq!(read_outputs(&ctx.out_dir), bytes);

    // restartable: deleted artifacts come back identical
    fs::remove_file(ctx.out_dir.join(QUALITY_FILE)).unwrap();
    fs::remove_file(ctx.out_dir.join(EMBEDDINGS_FILE)).unwrap();
    let third = run_mix(&ctx).unwrap();
    assert!(!third.embeddings_cached && !third.quality_cached);
    assert_eq!(read_outputs(&ctx.out_dir), bytes);

    // a tampered artifact is not trusted
    fs::write(ctx.out_dir.join(QUALITY_FILE), "").unwrap();
    let meta = read_meta(&ctx.out_dir.join(QUALITY_FILE)).unwrap();
    assert!(!is_fresh(&ctx.out_dir.join(QUALITY_FILE), &meta.stage_key));
    run_mix(&ctx).unwrap();
    assert_eq!(read_outputs(&ctx.out_dir), bytes);
    assert!(meta_path(&ctx.out_dir.join(QUALITY_FILE)).exists());
}

#[test]
fn seed_changes_selection() {
    let dir = tempfile::tempdir().unwrap();
    let c = with_ratios(config(dir.path(), json!({"mode": "explicit"}), 7), &[0.25, 0.4, 0.5]);
    let a = run_mix(&RunContext::new(c.clone(), None, Some(dir.path().join("a")), "mix").unwrap()).unwrap();
    let b = run_mix(&RunContext::new(c, Some(8), Some(dir.path().join("b")), "mix").unwrap()).unwrap();
    assert_ne!(a.manifest.entries, b.manifest.entries);
    assert_ne!(a.manifest.config_hash, b.manifest.config_hash);
}

#[test]
fn balanced_mix() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path(), json!({"mode": "balanced", "low": 5, "upp": 40}), 1);
    let out = run_mix(&RunContext::new(c, None, None, "mix").unwrap()).unwrap();
    // mean of {25, 8, 12} = 15 for the one dataset at or above 40
    let e = &out.plan.entries[0];
    assert_eq!((e.dataset.as_str(), e.budget), ("big", 15));
    assert!(out.plan.entries[1..].iter().all(|e| e.budget == e.n));
}

#[test]
fn quality_ratio_mix() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path(), json!({"mode": "quality", "qs_max": 5}), 3);
    let ctx = RunContext::new(c, None, None, "mix").unwrap();
    let out = run_mix(&ctx).unwrap();
    let table = qads::jsonl::load_quality(ctx.out_dir.join(QUALITY_FILE)).unwrap();
    let corpus = qads::jsonl::load_corpus(&ctx.loaded.dataset_inputs()).unwrap();
    for e in out.plan.entries.iter().filter(|e| e.dataset != "test") {
        let labels: Vec<f64> = corpus
            .dataset(&e.dataset)
            .unwrap()
            .iter()
            .filter_map(|s| table.label(&s.id).map(f64::from))
            .collect();
        let avg = labels.iter().sum::<f64>() / labels.len() as f64;
        assert!((e.ratio - avg / 5.0).abs() < 1e-12 || (avg == 5.0 && e.ratio == 1.0));
        assert_eq!(e.budget, (e.n as f64 * avg / 5.0).round() as usize);
    }
}

#[test]
fn validation_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(dir.path(), json!({"mode": "explicit"}), 7);
    c.config.seed = None;
    c.config.provider.kind = qads::provider::ProviderKind::Http;
    c.config.provider.url = None;
    c.config.datasets[0].path = "nope.jsonl".into();
    match RunContext::new(c, None, None, "mix") {
        Err(Error::Config(problems)) => {
            let all = problems.join("\n");
            for needle in ["seed", "nope.jsonl", "datasets.big.ratio", "provider.url"] {
                assert!(all.contains(needle), "{needle} not in {all}");
            }
        }
        other => panic!("{other:?}"),
    }
}
