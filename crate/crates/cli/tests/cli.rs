use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use l0qubo::harness::CompiledInstance;
use l0qubo::qubo::{read_qubo, write_qubo, BuildParams};
use l0qubo::scenarios::{
    gen_single_instance, gen_sparse_signal, steering_matrix_arcsin, GenConfig, InstanceData, InstanceDocument,
    ValueDistribution,
};
use l0qubo::solvers::{solve_exhaustive, DEFAULT_MAX_BITS};
use l0qubo::{Quantizer, SparseInstance, SparseSignal};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_l0qubo")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const MINIMAL: &str = r#"{
  "schema_version": 1,
  "scenario": "single",
  "sweep": {"k": [1, 2], "trials": 2},
  "problem": {"m": 8, "n": 4},
  "quantizer": {"bits": 2},
  "solver": "exhaustive",
  "methods": ["qubo", "omp"]
}"#;

#[test]
fn experiment_writes_one_row_per_k_and_method() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", MINIMAL);
    let out = dir.path().join("curve.csv");
    let o = run(&["experiment", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], l0qubo::harness::CSV_HEADER);
    assert_eq!(lines.len(), 1 + 2 * 2);
    assert!(lines[1].starts_with("1,qubo,") && lines[2].starts_with("1,omp,"));
    assert!(lines[3].starts_with("2,qubo,") && lines[4].starts_with("2,omp,"));
    // only the csv remains; no temporary files
    let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 2);
}

#[test]
fn experiment_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", &MINIMAL.replace("\"exhaustive\"", "\"sa\""));
    let mut outs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let o = run(&["experiment", "--config", cfg.to_str().unwrap(), "--seed", "5", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        outs.push(fs::read(out).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn experiment_jsonl_has_one_record_per_trial() {
    let dir = tempfile::tempdir().unwrap();
    let jsonl = dir.path().join("trials.jsonl");
    let body = MINIMAL.replace(
        "\"methods\"",
        &format!("\"output\": {{\"jsonl\": {}}},\n  \"methods\"", serde_json::to_string(&jsonl).unwrap()),
    );
    let cfg = write(dir.path(), "cfg.json", &body);
    let o = run(&["experiment", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("sweep_k,method"));
    let text = fs::read_to_string(&jsonl).unwrap();
    let records: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 4);
    assert_eq!(records[0]["sweep_k"], 1);
    assert_eq!(records[3]["trial"], 1);
}

#[test]
fn missing_key_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", r#"{"schema_version": 1, "scenario": "single"}"#);
    let o = run(&["experiment", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sweep"), "{}", stderr(&o));
}

#[test]
fn unknown_key_and_bad_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "u.json", &MINIMAL.replace("\"solver\"", "\"solvr\": 1, \"solver\""));
    let o = run(&["experiment", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("solvr"));
    let cfg = write(dir.path(), "v.json", &MINIMAL.replace("\"bits\": 2", "\"bits\": 0"));
    let o = run(&["experiment", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("quantizer"), "{}", stderr(&o));
}

#[test]
fn io_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let o = run(&["experiment", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let cfg = write(dir.path(), "cfg.json", MINIMAL);
    let out = dir.path().join("no/such/dir/curve.csv");
    let o = run(&["experiment", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn printed_config_reloads_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", MINIMAL);
    let o = run(&["experiment", "--config", cfg.to_str().unwrap(), "--seed", "42", "--print-config"]);
    assert!(o.status.success());
    let printed = String::from_utf8(o.stdout).unwrap();
    let first = l0qubo::harness::ExperimentConfig::from_json(&printed).unwrap();
    assert_eq!(first.seed, 42);
    let again = write(dir.path(), "again.json", &printed);
    let o = run(&["experiment", "--config", again.to_str().unwrap(), "--print-config"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), printed);
}

fn instance_doc(m: usize, k: usize, zero: bool) -> (InstanceDocument<f64>, InstanceData<f64>) {
    let a = steering_matrix_arcsin::<f64>(4, m).unwrap();
    let data = if zero {
        let obs = vec![Complex::new(0.0, 0.0); 4];
        InstanceData::Single(SparseInstance::new(a, obs.clone(), SparseSignal::zeros(m), obs).unwrap())
    } else {
        let cfg = GenConfig {
            m,
            n: 4,
            k,
            values: ValueDistribution::GridExact { bits: 2 },
            sigma: 0.0,
            shots: 1,
            rho: 0.0,
            seed: 1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = gen_sparse_signal(&cfg, &mut rng).unwrap();
        InstanceData::Single(gen_single_instance(&a, &z, 0.0, &mut rng).unwrap())
    };
    (InstanceDocument::new(data.clone()), data)
}

fn solve_config(dir: &Path, doc: &InstanceDocument<f64>, extra: &str) -> PathBuf {
    fs::write(dir.join("inst.json"), doc.to_json().unwrap()).unwrap();
    write(
        dir,
        "solve.json",
        &format!(r#"{{"schema_version": 1, "instance_path": "inst.json", "quantizer": {{"bits": 2}}{extra}}}"#),
    )
}

fn solve_json(args: &[&str]) -> Value {
    let o = run(args);
    assert!(o.status.success(), "{}", stderr(&o));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn solve_zero_observation_gives_zero_signal() {
    let dir = tempfile::tempdir().unwrap();
    let (doc, _) = instance_doc(6, 0, true);
    let cfg = solve_config(dir.path(), &doc, "");
    let v = solve_json(&["solve", "--config", cfg.to_str().unwrap(), "--solver", "exhaustive"]);
    assert!(v["signal"].as_array().unwrap().iter().all(|c| c[0] == 0.0 && c[1] == 0.0));
    assert_eq!(v["violations"], 0);
    assert_eq!(v["energy"].as_f64().unwrap(), 0.0);
    assert_eq!(v["objective"].as_f64().unwrap(), 0.0);
}

#[test]
fn solve_exhaustive_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let (doc, data) = instance_doc(6, 2, false);
    let cfg = solve_config(dir.path(), &doc, r#", "solver": "exhaustive""#);
    let v = solve_json(&["solve", "--config", cfg.to_str().unwrap()]);
    let compiled = CompiledInstance::compile(
        &data,
        &Quantizer::unsigned(2).unwrap(),
        &BuildParams::default(),
        2,
    )
    .unwrap();
    let lib = solve_exhaustive(&compiled.model, DEFAULT_MAX_BITS).unwrap();
    let report = compiled.report(&lib.best, 0.02).unwrap();
    assert_eq!(v["energy"].as_f64().unwrap(), lib.best_energy);
    assert_eq!(v["num_vars"], compiled.model.num_vars());
    let values: Vec<f64> = v["decoded"]["values"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(values, report.decoded.values);
}

#[test]
fn solve_seed_controls_reads() {
    let dir = tempfile::tempdir().unwrap();
    let (doc, _) = instance_doc(6, 2, false);
    let cfg = solve_config(dir.path(), &doc, r#", "anneal": {"reads": 8, "sweeps": 1}"#);
    let c = cfg.to_str().unwrap();
    let a = solve_json(&["solve", "--config", c, "--seed", "1"]);
    let b = solve_json(&["solve", "--config", c, "--seed", "1"]);
    let other = solve_json(&["solve", "--config", c, "--seed", "2"]);
    assert_eq!(a, b);
    assert_eq!(a["seed"], 1);
    assert_ne!(a["read_energies"], other["read_energies"]);
}

#[test]
fn malformed_instance_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "inst.json", r#"{"schema_version": 1, "instance": {"kind": "single", "operator": 3}}"#);
    let cfg = write(dir.path(), "solve.json", r#"{"schema_version": 1, "instance_path": "inst.json"}"#);
    let o = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let cfg = write(dir.path(), "both.json", r#"{"schema_version": 1}"#);
    let o = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn export_round_trip_and_decode() {
    let dir = tempfile::tempdir().unwrap();
    let a = steering_matrix_arcsin::<f64>(8, 32).unwrap();
    let cfg = GenConfig {
        m: 32,
        n: 8,
        k: 3,
        values: ValueDistribution::Uniform,
        sigma: 0.0,
        shots: 1,
        rho: 0.0,
        seed: 3,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let z = gen_sparse_signal(&cfg, &mut rng).unwrap();
    let doc = InstanceDocument::new(InstanceData::Single(gen_single_instance(&a, &z, 0.0, &mut rng).unwrap()));
    fs::write(dir.path().join("inst.json"), doc.to_json().unwrap()).unwrap();
    let cfg = write(dir.path(), "export.json", r#"{"schema_version": 1, "instance_path": "inst.json"}"#);
    let out = dir.path().join("model.qubo");
    let o = run(&["export-qubo", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));

    let text = fs::read_to_string(&out).unwrap();
    assert!(text.lines().any(|l| l.starts_with("p qubo 192 ")), "32·4 + 32·2 variables");
    let (model, _) = read_qubo::<f64, _>(text.as_bytes()).unwrap();
    let mut again = Vec::new();
    write_qubo(&model, None, &mut again).unwrap();
    assert_eq!(String::from_utf8(again).unwrap(), text);

    let sidecar = dir.path().join("model.qubo.registry.json");
    assert!(sidecar.exists());
    let zeros = write(dir.path(), "zeros.txt", &vec!["0"; 192].join(" "));
    let v = solve_json(&[
        "decode",
        "--config",
        sidecar.to_str().unwrap(),
        "--assignment",
        zeros.to_str().unwrap(),
        "--qubo",
        out.to_str().unwrap(),
    ]);
    assert!(v["signal"].as_array().unwrap().iter().all(|c| c[0] == 0.0 && c[1] == 0.0));
    assert_eq!(v["energy"].as_f64().unwrap(), model.offset());
    assert!(v["support"].as_array().unwrap().is_empty());
}

#[test]
fn decode_rejects_wrong_length() {
    let dir = tempfile::tempdir().unwrap();
    let (doc, _) = instance_doc(6, 1, false);
    let cfg = solve_config(dir.path(), &doc, "");
    let out = dir.path().join("m.qubo");
    let o = run(&["export-qubo", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bits = write(dir.path(), "bits.json", "[1, 0, true]");
    let o = run(&[
        "decode",
        "--config",
        dir.path().join("m.qubo.registry.json").to_str().unwrap(),
        "--assignment",
        bits.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
