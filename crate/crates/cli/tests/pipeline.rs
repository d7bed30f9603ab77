use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use factlens_cli::config::PipelineConfig;
use factlens_cli::manifest::{Manifest, CONFIG_ECHO_FILE};
use factlens_cli::pipeline::Stage;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/pipeline")
}

/// Copy of the pipeline fixtures in a scratch directory.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixtures(), dir.path());
    let _ = std::fs::remove_dir_all(dir.path().join("out"));
    dir
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}

fn factlens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_factlens"))
        .args(args)
        .env("FACTLENS_LOG", "warn")
        .output()
        .unwrap()
}

fn run(config: &Path, stages: Option<&str>) -> Output {
    let config = config.to_str().unwrap();
    let mut args = vec!["pipeline", "run", "--config", config];
    if let Some(s) = stages {
        args.extend(["--stages", s]);
    }
    factlens(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifests(out: &Path) -> Vec<Manifest> {
    Stage::ALL
        .iter()
        .map(|s| Manifest::read(&out.join(s.as_str())).unwrap())
        .collect()
}

#[test]
fn full_toy_config_writes_every_manifest_and_reruns_identically() {
    let ws = workspace();
    let config = ws.path().join("pipeline.toml");
    let first = run(&config, None);
    assert!(first.status.success(), "{}", stderr(&first));
    let out = ws.path().join("out");

    let loaded = PipelineConfig::load(&config).unwrap();
    let before = manifests(&out);
    for (stage, m) in Stage::ALL.iter().zip(&before) {
        let dir = out.join(stage.as_str());
        assert_eq!(m.stage, stage.as_str());
        assert!(!m.outputs.is_empty(), "{stage} wrote nothing");
        let echo = std::fs::read_to_string(dir.join(CONFIG_ECHO_FILE)).unwrap();
        assert_eq!(PipelineConfig::parse(&echo).unwrap(), loaded);
        let recomputed = Manifest::build(stage.as_str(), m.seed, &[], &dir).unwrap();
        assert_eq!(
            recomputed.outputs_hash, m.outputs_hash,
            "{stage} outputs changed after hashing"
        );
    }
    assert_eq!(before[4].seed, loaded.explainer.seed);
    assert_eq!(before[7].seed, loaded.metric.model.seed);
    assert_eq!(before[2].seed, loaded.seed);
    assert!(before[1].inputs.keys().any(|k| k.starts_with("raw/")));

    let second = run(&config, None);
    assert!(second.status.success(), "{}", stderr(&second));
    assert_eq!(manifests(&out), before);
    assert_eq!(
        String::from_utf8_lossy(&first.stdout),
        String::from_utf8_lossy(&second.stdout)
    );
}

#[test]
fn missing_train_artifacts_name_the_producer() {
    let ws = workspace();
    let config = ws.path().join("pipeline.toml");
    let ingest = run(&config, Some("ingest"));
    assert!(ingest.status.success(), "{}", stderr(&ingest));

    let o = run(&config, Some("build,score"));
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("run the `train-explainer` stage first"), "{err}");
    assert!(err.contains("predictions.jsonl"), "{err}");
    assert!(
        !ws.path().join("out/build").exists(),
        "nothing runs when inputs are missing"
    );

    let fresh = workspace();
    let o = run(&fresh.path().join("pipeline.toml"), Some("score,build"));
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(
        err.contains("`ingest`") && err.contains("`train-explainer`"),
        "{err}"
    );
}

#[test]
fn configuration_errors_exit_with_two() {
    let ws = workspace();
    let config = ws.path().join("pipeline.toml");
    let text = std::fs::read_to_string(&config).unwrap();

    std::fs::write(&config, text.replace("ratio = 0.5", "ratio = 0.5\nratoi = 1")).unwrap();
    let o = run(&config, None);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    std::fs::write(&config, text.replace("ratio = 0.5", "ratio = 1.5")).unwrap();
    assert_eq!(run(&config, None).status.code(), Some(2));

    std::fs::write(&config, text.replace("judgments = \"judgments.jsonl\"\n", "")).unwrap();
    let o = run(&config, Some("aggregate"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("annotation.judgments"));

    assert_eq!(run(&ws.path().join("absent.toml"), None).status.code(), Some(2));
    assert_eq!(factlens(&["pipeline", "run"]).status.code(), Some(2));
    assert_eq!(
        factlens(&["pipeline", "run", "--config", "x", "--stages", "nope"])
            .status
            .code(),
        Some(2)
    );
    assert!(!ws.path().join("out").exists());
}

#[test]
fn standalone_commands_match_pipeline_stages() {
    let ws = workspace();
    let config = ws.path().join("pipeline.toml");
    let o = run(&config, Some("ingest,build,split"));
    assert!(o.status.success(), "{}", stderr(&o));
    let out = ws.path().join("out");
    let path = |p: &Path| p.to_str().unwrap().to_string();

    let split_dir = ws.path().join("split-cli");
    let o = factlens(&[
        "split",
        "--dataset",
        &path(&out.join("build/dataset.jsonl")),
        "--ratio",
        "0.5",
        "--seed",
        "13",
        "--out",
        &path(&split_dir),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["train.jsonl", "test.jsonl", "split.json"] {
        assert_eq!(
            std::fs::read(split_dir.join(f)).unwrap(),
            std::fs::read(out.join("split").join(f)).unwrap(),
            "{f}"
        );
    }

    let dataset = ws.path().join("dataset-cli.jsonl");
    let o = factlens(&[
        "build-dataset",
        "--raw",
        &path(&out.join("ingest/raw")),
        "--articles",
        &path(&out.join("ingest/articles.jsonl")),
        "--out",
        &path(&dataset),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(&dataset).unwrap(),
        std::fs::read(out.join("build/dataset.jsonl")).unwrap()
    );

    let bad = factlens(&[
        "split",
        "--dataset",
        &path(&dataset),
        "--ratio",
        "1.0",
        "--out",
        &path(&split_dir),
    ]);
    assert_eq!(bad.status.code(), Some(1));

    let missing = factlens(&[
        "build-dataset",
        "--raw",
        &path(&ws.path().join("no-raw")),
        "--articles",
        &path(&out.join("ingest/articles.jsonl")),
        "--out",
        &path(&ws.path().join("empty.jsonl")),
    ]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).contains("not a directory"));
    assert!(!ws.path().join("empty.jsonl").exists());
}

#[test]
fn scoring_and_comparison_commands() {
    let ws = workspace();
    let preds = ws.path().join("a.jsonl");
    let lines = [
        r#"{"id":"1","claim":"c","prediction":"the cat sat on the mat","reference":"the cat sat on the mat"}"#,
        r#"{"id":"2","claim":"c","prediction":"a dog ran","reference":"the dog ran home"}"#,
        r#"{"id":"3","claim":"c","prediction":"nothing","reference":"something else"}"#,
    ];
    std::fs::write(&preds, lines.join("\n") + "\n").unwrap();
    let o = factlens(&["score", "--pred", preds.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    // per-example ROUGE-1 F1: 1, 2*(2/3*2/4)/(2/3+2/4) = 4/7, 0
    let expected = (1.0 + 4.0 / 7.0) / 3.0 * 100.0;
    assert!((report["rouge1"].as_f64().unwrap() - expected).abs() < 1e-9);
    assert_eq!(report["n"], 3);

    let other = ws.path().join("b.jsonl");
    let reversed: Vec<&str> = lines.iter().rev().copied().collect();
    std::fs::write(&other, reversed.join("\n") + "\n").unwrap();
    let o = factlens(&[
        "compare",
        "--pred-a",
        preds.to_str().unwrap(),
        "--pred-b",
        other.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cmp: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(cmp["n"], 3);
    assert_eq!(cmp["alternative"], "two_sided");
    // pairing is by id, so reordered identical predictions differ by zero
    assert_eq!(cmp["tests"]["rouge1"]["result"]["t_statistic"], 0.0);
    assert_eq!(cmp["tests"]["rouge1"]["result"]["p_value"], 1.0);

    let partial = ws.path().join("c.jsonl");
    std::fs::write(&partial, lines[..2].join("\n") + "\n").unwrap();
    let o = factlens(&[
        "compare",
        "--pred-a",
        preds.to_str().unwrap(),
        "--pred-b",
        partial.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("same example ids"));
}

#[test]
fn export_judgments_from_an_empty_store() {
    let ws = workspace();
    let db = ws.path().join("a.db");
    let out = ws.path().join("j.jsonl");
    let o = factlens(&[
        "export-judgments",
        "--db",
        db.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(out).unwrap(), "");
}
