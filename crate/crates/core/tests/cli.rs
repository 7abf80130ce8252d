//! The `bitraj` binary end to end on the shipped configs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn bitraj(verb: &str, config: &Path, out: &Path, extra: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bitraj"));
    cmd.arg(verb).arg("--config").arg(config).arg("--out").arg(out).args(extra);
    cmd.env_remove("BITRAJ_MAX_TABLE");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn report(out: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn every_shipped_config_passes() {
    let shipped = [
        ("table", "table_qutrit.json", "table.csv"),
        ("verify", "verify_zx.json", ""),
        ("coarse", "coarse_witness.json", "coarse.csv"),
        ("compose", "compose_xy.json", ""),
        ("compose", "compose_coupled.json", ""),
        ("markov", "markov_fine.json", ""),
        ("markov", "markov_coarse.json", ""),
        ("zeno", "zeno.json", "zeno.csv"),
        ("uncertainty", "uncertainty_mub.json", "uncertainty.csv"),
        ("map-compare", "map_dephasing.json", "map.csv"),
        ("map-compare", "map_spin_boson.json", "map.csv"),
        ("sample", "sample_zx.json", "sample.csv"),
        ("classical", "classical_commuting.json", "classical.csv"),
    ];
    for (verb, file, artifact) in shipped {
        let dir = tempfile::tempdir().unwrap();
        let out = bitraj(verb, &configs().join(file), dir.path(), &[], &[]);
        assert!(out.status.success(), "{verb} {file}: {}", String::from_utf8_lossy(&out.stdout));
        let r = report(dir.path());
        assert_eq!(r["verb"], verb);
        assert_eq!(r["pass"], true);
        assert_eq!(r["schema_version"], 1);
        assert!(r["config_digest"].as_str().unwrap().len() == 64);
        if !artifact.is_empty() {
            assert!(dir.path().join(artifact).exists(), "{file}: missing {artifact}");
        }
    }
}

#[test]
fn zeno_report_carries_closed_form_survival() {
    let dir = tempfile::tempdir().unwrap();
    assert!(bitraj("zeno", &configs().join("zeno.json"), dir.path(), &[], &[]).status.success());
    let r = report(dir.path());
    let text = r["results"].to_string();
    assert!(text.contains("0.78054606978"), "{text}");
}

#[test]
fn missing_field_is_a_usage_error_with_a_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"schema_version": 1, "system": {}, "devices": [], "schedule": []}"#).unwrap();
    let out = bitraj("table", &cfg, dir.path(), &[], &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/system/dim"), "{err}");
}

#[test]
fn verb_must_match_config_command() {
    let dir = tempfile::tempdir().unwrap();
    let out = bitraj("zeno", &configs().join("table_qutrit.json"), dir.path(), &[], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn size_guard_from_env_and_force_large() {
    let cfg = configs().join("table_qutrit.json");
    let dir = tempfile::tempdir().unwrap();
    let guarded = bitraj("table", &cfg, dir.path(), &[], &[("BITRAJ_MAX_TABLE", "100")]);
    assert_eq!(guarded.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&guarded.stderr).contains("100"));
    let forced = bitraj("table", &cfg, dir.path(), &["--force-large"], &[("BITRAJ_MAX_TABLE", "100")]);
    assert!(forced.status.success());
}

#[test]
fn thread_count_does_not_change_samples() {
    let cfg = configs().join("sample_zx.json");
    let runs: Vec<Vec<u8>> = ["1", "3"]
        .iter()
        .map(|t| {
            let dir = tempfile::tempdir().unwrap();
            assert!(bitraj("sample", &cfg, dir.path(), &["--threads", t], &[]).status.success());
            std::fs::read(dir.path().join("sample.csv")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}
