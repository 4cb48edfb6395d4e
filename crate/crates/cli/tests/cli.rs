//! The binary end to end: exit codes, output schemas, determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

/// A bundled config with `edit` applied, written into `dir`.
fn edited_config(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut value: Value = serde_json::from_str(&std::fs::read_to_string(config_path(name)).unwrap()).unwrap();
    edit(&mut value);
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(&value).unwrap()).unwrap();
    path
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rank-surfaces")).args(args).env_remove("RANK_SURFACES_JOBS").output().unwrap()
}

fn run_ok(command: &str, config: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec![command, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let output = cli(&args);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let header = reader.headers().unwrap().iter().map(String::from).collect();
    let rows = reader.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn a_run_at_the_initial_size_writes_one_trace_row() {
    let tmp = tempfile::tempdir().unwrap();
    let config = edited_config(tmp.path(), "toy1d.json", |v| v["designer"]["budget"] = 10.into());
    let out = tmp.path().join("out");
    run_ok("run", &config, &out, &[]);
    let (header, rows) = read_csv(&out.join("trace.csv"));
    assert_eq!(header, ["step", "empirical_loss", "true_loss", "error_prob"]);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "10");
    let (header, rows) = read_csv(&out.join("design.csv"));
    assert_eq!(header, ["step", "x1", "surface", "sample_mean", "noise_var", "batch_size"]);
    assert_eq!(rows.len(), 10);
    let (header, rows) = read_csv(&out.join("classifier.csv"));
    assert_eq!(header, ["point", "x1", "chosen", "m_gap", "p_best"]);
    assert_eq!(rows.len(), 1000);
}

#[test]
fn toy_gap_sur_run_favours_the_noisier_surface() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok("run", &config_path("toy1d.json"), tmp.path(), &[]);
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    let d1 = summary["counts"][0].as_u64().unwrap();
    assert!((120..=175).contains(&d1), "D_1 = {d1}");
    assert_eq!(summary["final"]["k"], 200);
    assert_eq!(summary["config"]["problem"]["name"], "toy1d");
    assert!(summary["version"].as_str().unwrap().starts_with(env!("CARGO_PKG_VERSION")));
    assert!(summary["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn same_seed_gives_identical_csv_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let config = edited_config(tmp.path(), "toy1d.json", |v| v["designer"]["budget"] = 40.into());
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    run_ok("run", &config, &a, &["--seed", "9"]);
    run_ok("run", &config, &b, &["--seed", "9"]);
    run_ok("run", &config, &c, &["--seed", "10"]);
    for file in ["design.csv", "trace.csv", "classifier.csv"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }
    assert_ne!(std::fs::read(a.join("design.csv")).unwrap(), std::fs::read(c.join("design.csv")).unwrap());
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = edited_config(tmp.path(), "toy1d.json", |v| {
        v.as_object_mut().unwrap().remove("problem");
    });
    let output = cli(&["run", "--config", missing.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("problem"));

    let unknown = edited_config(tmp.path(), "sir.json", |v| v["designer"]["budgte"] = 3.into());
    let output = cli(&["sir", "--config", unknown.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("line"));

    let wrong_problem = cli(&["sir", "--config", config_path("toy1d.json").to_str().unwrap()]);
    assert_eq!(wrong_problem.status.code(), Some(2));

    // known-gap UCB needs true means, which the epidemic model lacks
    let truthless =
        edited_config(tmp.path(), "sir.json", |v| v["designer"]["acquisition"]["method"] = "known_gap_ucb".into());
    assert_eq!(cli(&["sir", "--config", truthless.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn bench_writes_one_row_per_method_and_replicate() {
    let tmp = tempfile::tempdir().unwrap();
    let config = edited_config(tmp.path(), "toy1d.json", |v| {
        v["designer"]["budget"] = 30.into();
        v["replication"]["count"] = 3.into();
        v["replication"]["base_seed"] = 40.into();
        v["replication"]["methods"] = serde_json::json!([
            {"acquisition": {"method": "gap_sur"}},
            {"label": "random", "acquisition": {"method": "uniform"}}
        ]);
    });
    let out = tmp.path().join("bench");
    run_ok("bench", &config, &out, &["--jobs", "2"]);
    let (header, rows) = read_csv(&out.join("bench.csv"));
    assert_eq!(
        header,
        ["method", "replicate", "seed", "failed", "empirical_loss", "true_loss", "error_prob", "d_1", "d_2", "message"]
    );
    assert_eq!(rows.len(), 6);
    let seeds: Vec<&str> = rows.iter().map(|r| r[2].as_str()).collect();
    assert_eq!(seeds, ["40", "41", "42", "40", "41", "42"]);
    assert!(rows.iter().all(|r| r[3] == "false"));

    // the summary's mean and SE recompute bit-exactly from the per-replicate column
    let (header, summary) = read_csv(&out.join("bench_summary.csv"));
    assert_eq!(&header[..5], ["method", "completed", "failed", "empirical_loss", "empirical_loss_se"]);
    for (method, line) in ["gap_sur", "random"].iter().zip(&summary) {
        assert_eq!(&line[0], method);
        let values: Vec<f64> = rows.iter().filter(|r| r[0] == *method).map(|r| r[4].parse().unwrap()).collect();
        let stat = rank_surfaces_cli::commands::Stat::of(&values).unwrap();
        assert_eq!(line[3].parse::<f64>().unwrap(), stat.mean);
        assert_eq!(line[4].parse::<f64>().unwrap(), stat.se.unwrap());
    }

    // worker count does not change results
    let serial = tmp.path().join("serial");
    run_ok("bench", &config, &serial, &["--jobs", "1"]);
    assert_eq!(std::fs::read(out.join("bench.csv")).unwrap(), std::fs::read(serial.join("bench.csv")).unwrap());
}

#[test]
fn jobs_fall_back_to_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let config = edited_config(tmp.path(), "toy1d.json", |v| {
        v["designer"]["budget"] = 12.into();
        v["replication"]["count"] = 2.into();
        v["replication"]["methods"] = serde_json::json!([]);
    });
    let output = Command::new(env!("CARGO_BIN_EXE_rank-surfaces"))
        .args(["bench", "--config", config.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()])
        .env("RANK_SURFACES_JOBS", "2")
        .output()
        .unwrap();
    assert!(output.status.success());
    let (_, rows) = read_csv(&tmp.path().join("bench.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "gap_sur");

    let bad = Command::new(env!("CARGO_BIN_EXE_rank-surfaces"))
        .args(["bench", "--config", config.to_str().unwrap()])
        .env("RANK_SURFACES_JOBS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn sir_command_writes_noise_surfaces_and_boundary() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok("sir", &config_path("sir.json"), tmp.path(), &[]);
    let (header, rows) = read_csv(&tmp.path().join("noise_surfaces.csv"));
    assert_eq!(header, ["s", "i", "sd_no_action", "sd_action"]);
    assert_eq!(rows.len(), 13 * 11);
    for row in &rows {
        let sd: Vec<f64> = row[2..].iter().map(|v| v.parse().unwrap()).collect();
        assert!(sd.iter().all(|v| *v >= 0.0));
        if row[1] == "0" {
            assert_eq!(sd, [0.0, 0.0], "no infecteds means no randomness");
        }
    }
    let (_, classifier) = read_csv(&tmp.path().join("classifier.csv"));
    // an outbreak with no infecteds costs nothing, so acting never pays
    for row in classifier.iter().filter(|r| r[2] == "0") {
        assert_eq!(row[3], "0", "at s = {}", row[1]);
    }
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["surfaces"], serde_json::json!(["no_action", "action"]));
    assert_eq!(summary["checkpoints"][0]["chosen_name"], "action");
    assert_eq!(summary["checkpoints"][1]["chosen_name"], "no_action");
    assert!(summary["final"]["true_loss"].is_null());
}

#[test]
fn relative_weight_files_resolve_against_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let weights: String = (0..11).map(|i| format!("{}\n", if i < 5 { 1.0 } else { 0.0 })).collect();
    std::fs::write(tmp.path().join("w.txt"), format!("weight\n{weights}")).unwrap();
    let config = edited_config(tmp.path(), "toy1d.json", |v| {
        v["designer"]["budget"] = 12.into();
        v["metrics"] = serde_json::json!({"grid": {"kind": "regular", "per_axis": [11]}, "weights": {"file": "w.txt"}});
    });
    run_ok("run", &config, &tmp.path().join("out"), &[]);

    let short = edited_config(tmp.path(), "toy1d.json", |v| {
        v["metrics"] = serde_json::json!({"grid": {"kind": "regular", "per_axis": [12]}, "weights": {"file": "w.txt"}});
    });
    assert_eq!(cli(&["run", "--config", short.to_str().unwrap()]).status.code(), Some(2));
}
