use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nahas_core::accel::baseline_config;
use nahas_core::nas::{build_space, decode, SpaceName};
use nahas_core::oracle::{CostModel, SimulatorCostModel};
use nahas_core::perf::network_latency;
use nahas_core::search::{ControllerKind, SearchConfig};
use nahas_core::RewardSpec;
use serde_json::Value;

fn nahas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nahas")).args(args).env_remove("NAHAS_SEED").output().expect("spawn nahas")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, budget: u64) -> PathBuf {
    let mut cfg = SearchConfig::new(SpaceName::S1MobileNetV2, ControllerKind::Reinforce, budget, RewardSpec::hard(0.3, 1.0));
    cfg.seed = 7;
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn search_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 20);
    let out = dir.path().join("run");
    let o = nahas(&["search", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["manifest.json", "trials.jsonl", "frontier.csv", "best.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let trials = std::fs::read_to_string(out.join("trials.jsonl")).unwrap();
    assert_eq!(trials.lines().count(), 20);
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert!(manifest["finished_unix_s"].is_number());
}

#[test]
fn search_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 40);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(nahas(&["search", "--config", s(&cfg), "--out", s(&a)]).status.success());
    assert!(nahas(&["--workers", "3", "search", "--config", s(&cfg), "--out", s(&b)]).status.success());
    let read = |d: &Path| std::fs::read(d.join("trials.jsonl")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(std::fs::read(a.join("frontier.csv")).unwrap(), std::fs::read(b.join("frontier.csv")).unwrap());
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 10);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(nahas(&["search", "--config", s(&cfg), "--out", s(&a)]).status.success());
    assert!(nahas(&["search", "--config", s(&cfg), "--out", s(&b), "--seed", "8"]).status.success());
    assert_ne!(std::fs::read(a.join("trials.jsonl")).unwrap(), std::fs::read(b.join("trials.jsonl")).unwrap());
}

#[test]
fn unknown_controller_is_a_schema_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 10);
    let text = std::fs::read_to_string(&cfg).unwrap().replace("\"reinforce\",", "\"bogus\",");
    std::fs::write(&cfg, text).unwrap();
    let o = nahas(&["search", "--config", s(&cfg), "--out", s(&dir.path().join("run"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("controller"), "{}", stderr(&o));
}

#[test]
fn invalid_budget_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 0);
    let o = nahas(&["search", "--config", s(&cfg), "--out", s(&dir.path().join("run"))]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn existing_outputs_need_force() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 5);
    let out = dir.path().join("run");
    assert!(nahas(&["search", "--config", s(&cfg), "--out", s(&out)]).status.success());
    let before = std::fs::read(out.join("trials.jsonl")).unwrap();
    let o = nahas(&["search", "--config", s(&cfg), "--out", s(&out), "--seed", "99"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(std::fs::read(out.join("trials.jsonl")).unwrap(), before);
    assert!(nahas(&["--force", "search", "--config", s(&cfg), "--out", s(&out), "--seed", "99"]).status.success());
    assert_ne!(std::fs::read(out.join("trials.jsonl")).unwrap(), before);
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(nahas(&["search", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(nahas(&["--help"]).status.code(), Some(0));
}

#[test]
fn default_config_round_trips() {
    let o = nahas(&["search", "--print-default-config"]);
    assert!(o.status.success());
    let cfg: SearchConfig = serde_json::from_slice(&o.stdout).unwrap();
    cfg.validate().unwrap();
}

#[test]
fn simulate_matches_library() {
    let def = build_space(SpaceName::S1MobileNetV2);
    let d = def.template_decisions().unwrap();
    let o = nahas(&["simulate", "--space", "S1", "--decisions", &serde_json::to_string(&d).unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let sim = SimulatorCostModel::default();
    let arch = decode(&def, &d).unwrap();
    let lat = network_latency(&arch, &baseline_config(), &sim.perf).unwrap();
    assert!((v["latency_ms"].as_f64().unwrap() - lat).abs() <= 1e-12 * lat);
    assert!((v["area"].as_f64().unwrap() - sim.area(&baseline_config())).abs() < 1e-12);
    assert_eq!(v["valid"], true);
}

#[test]
fn pareto_drops_the_dominated_trial() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 3);
    let out = dir.path().join("run");
    assert!(nahas(&["search", "--config", s(&cfg), "--out", s(&out)]).status.success());
    let text = std::fs::read_to_string(out.join("trials.jsonl")).unwrap();
    let metrics = [(0.70, 0.30), (0.75, 0.40), (0.60, 0.50)];
    let edited: Vec<String> = text
        .lines()
        .zip(metrics)
        .map(|(line, (acc, lat))| {
            let mut t: Value = serde_json::from_str(line).unwrap();
            t["eval"] = serde_json::json!({
                "accuracy": acc, "latency_ms": lat, "energy_mj": 1.0, "area": 1.0, "valid": true, "invalid_reasons": []
            });
            t.to_string()
        })
        .collect();
    let log = dir.path().join("edited.jsonl");
    std::fs::write(&log, edited.join("\n") + "\n").unwrap();
    let csv_path = dir.path().join("front.csv");
    let o = nahas(&["pareto", "--trials", s(&log), "--out", s(&csv_path)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(&csv_path).unwrap();
    let ids: Vec<String> = rdr.records().map(|r| r.unwrap()[0].to_string()).collect();
    assert_eq!(ids, ["0", "1"]);
}

#[test]
fn bad_trial_log_line_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("t.jsonl");
    std::fs::write(&log, "{}\n").unwrap();
    let o = nahas(&["pareto", "--trials", s(&log), "--out", s(&dir.path().join("f.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 1"), "{}", stderr(&o));
}

#[test]
fn cost_model_pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.jsonl");
    let model = dir.path().join("model.json");
    let o = nahas(&["cost-model", "generate", "--n", "300", "--seed", "1", "--out", s(&data)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&data).unwrap().lines().count(), 300);
    let o = nahas(&["cost-model", "train", "--data", s(&data), "--out", s(&model), "--steps", "200"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["held_out"]["samples"], 30);
    let o = nahas(&["cost-model", "eval", "--model", s(&model), "--data", s(&data)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = nahas(&["cost-model", "predict", "--model", s(&model)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["area"].as_f64().unwrap() > 0.0 && v["latency_ms"].as_f64().unwrap() > 0.0);

    let cfg_path = write_config(dir.path(), 5);
    let mut cfg: Value = serde_json::from_str(&std::fs::read_to_string(&cfg_path).unwrap()).unwrap();
    cfg["evaluator_kind"] = "surrogate".into();
    cfg["surrogate_model"] = s(&model).into();
    std::fs::write(&cfg_path, cfg.to_string()).unwrap();
    let out = dir.path().join("run");
    let o = nahas(&["search", "--config", s(&cfg_path), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(std::fs::read_to_string(out.join("trials.jsonl")).unwrap().contains("\"surrogate\""));
}

#[test]
fn bruteforce_enumerates_a_small_space() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = SearchConfig::new(SpaceName::S1MobileNetV2, ControllerKind::Random, 1, RewardSpec::hard(0.3, 1.0));
    cfg.arch_points = Some(vec!["block3.kernel".into()]);
    cfg.hw_knobs = Some(vec![nahas_core::HwKnob::SimdUnits]);
    let path = dir.path().join("bf.json");
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = dir.path().join("bf");
    let o = nahas(&["bruteforce", "--config", s(&path), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(out.join("trials.jsonl")).unwrap().lines().count(), 12);
    let o = nahas(&["bruteforce", "--config", s(&path), "--out", s(&dir.path().join("bf2")), "--cap", "10"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn dump_arch_prints_the_reference_network() {
    let o = nahas(&["dump-arch", "--reference", "mobilenet-v2"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["blocks"].as_array().is_some_and(|l| !l.is_empty()));
}
