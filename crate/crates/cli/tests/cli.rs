//! The `smelldata` binary: exit codes, staged runs and reports.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use smelldata_core::pipeline;
use smelldata_core::sample::{Label, Smell};
use smelldata_core::store::{compute_stats, DatasetStats};

fn demo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus/demo/src").canonicalize().unwrap()
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let p = dir.join("smelldata.toml");
    let text = format!(
        "seed = 7\n{extra}\n[output]\ndir = \"out\"\n\n[[corpus]]\nproject_id = \"demo\"\nroot_dirs = [{:?}]\nrole = \"TRAIN\"\n",
        demo_root().display().to_string()
    );
    std::fs::write(&p, text).unwrap();
    p
}

fn smelldata(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smelldata")).arg("-c").arg(config).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    assert_eq!(code(&smelldata(&cfg, &["--threshold", "lm_max", "ingest"])), 2);
    assert_eq!(code(&smelldata(&cfg, &["--threshold", "nope=3", "ingest"])), 2);
    assert_eq!(code(&smelldata(&cfg, &["--threshold", "lm_min=40", "ingest"])), 2, "min above max");

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "seed = \"seven\"\n").unwrap();
    let o = smelldata(&bad, &["ingest"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("configuration"));

    let unseeded = dir.path().join("unseeded.toml");
    std::fs::write(&unseeded, std::fs::read_to_string(&cfg).unwrap().replace("seed = 7", "balance = true")).unwrap();
    assert_eq!(code(&smelldata(&unseeded, &["run"])), 2);
}

#[test]
fn missing_inputs_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&smelldata(&dir.path().join("absent.toml"), &["run"])), 3);
    let cfg = write_config(dir.path(), "");
    for stage in ["generate", "group", "export", "validate", "stats"] {
        assert_eq!(code(&smelldata(&cfg, &[stage])), 3, "{stage} before its input exists");
    }
    let gone = dir.path().join("gone.toml");
    std::fs::write(&gone, std::fs::read_to_string(&cfg).unwrap().replace(&demo_root().display().to_string(), "/no/such/dir")).unwrap();
    assert_eq!(code(&smelldata(&gone, &["ingest"])), 3);
}

#[test]
fn staged_run_matches_one_shot_run_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    for stage in ["ingest", "generate", "group", "export"] {
        let o = smelldata(&cfg, &[stage]);
        assert_eq!(code(&o), 0, "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let staged = std::fs::read(dir.path().join("out/dataset.jsonl")).unwrap();
    let o = smelldata(&cfg, &["validate"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("ok:"));

    let o = smelldata(&cfg, &["--out", dir.path().join("again").to_str().unwrap(), "run"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("exported dataset:"));
    assert_eq!(std::fs::read(dir.path().join("again/dataset.jsonl")).unwrap(), staged);
}

#[test]
fn stats_agree_with_the_validator_recount() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    assert_eq!(code(&smelldata(&cfg, &["run"])), 0);
    let o = smelldata(&cfg, &["stats", "--json"]);
    assert_eq!(code(&o), 0);
    let reported: DatasetStats = serde_json::from_str(&stdout(&o)).unwrap();
    let records = pipeline::read_dataset(&dir.path().join("out/dataset.jsonl")).unwrap();
    assert_eq!(reported, compute_stats(&records));
    let file: DatasetStats =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/stats.json")).unwrap()).unwrap();
    assert_eq!(file, reported);
    let text = stdout(&smelldata(&cfg, &["stats"]));
    assert_eq!(text, std::fs::read_to_string(dir.path().join("out/stats.txt")).unwrap());
}

#[test]
fn tampered_dataset_fails_validation_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    assert_eq!(code(&smelldata(&cfg, &["run"])), 0);
    let path = dir.path().join("out/dataset.jsonl");
    let text = std::fs::read_to_string(&path).unwrap();
    let first = text.lines().next().unwrap();
    // the same record twice
    std::fs::write(&path, format!("{text}{first}\n")).unwrap();
    let o = smelldata(&cfg, &["validate"]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("duplicate id"));

    std::fs::write(&path, format!("{text}{{\"id\": ")).unwrap();
    assert_eq!(code(&smelldata(&cfg, &["validate"])), 1, "unparseable dataset");
}

#[test]
fn threshold_override_moves_the_positive_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let o = smelldata(&cfg, &["--threshold", "lm_max=20", "run"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let records = pipeline::read_dataset(&dir.path().join("out/dataset.jsonl")).unwrap();
    let lm_pos: Vec<_> = records.iter().filter(|r| r.smell == Smell::LongMethod && r.label == Some(Label::Positive)).collect();
    assert!(!lm_pos.is_empty());
    assert!(lm_pos.iter().all(|r| r.metrics.loc > 20));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/dataset.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["thresholds"]["lm_max"], 20);
}
