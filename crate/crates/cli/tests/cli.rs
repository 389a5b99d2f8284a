use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SAMPLE: &str = r#"{
  "field": {"omega": 0.7, "q": [0.1, 0.05, 0.2], "q4": 0.37,
            "standing_wave_preset": {"amplitudes": [[0.05, 0.0], [0.03, 0.01], [0.0, 0.04]]}},
  "model": {"p": 1},
  "seed": 3
}"#;

const FREE_P0: &str = r#"{
  "field": {"omega": 1.0, "q": [0.0, 0.0, 0.04], "q4": 1.0007996802557444},
  "model": {"p": 0}
}"#;

const REPORTS: [&str; 4] = ["solution.estc", "clusters.csv", "verification.json", "observables.json"];

fn estc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_estc"))
        .args(args)
        .env_remove("ESTC_THREADS")
        .env_remove("ESTC_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json_out(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}\n{}", stdout(out), String::from_utf8_lossy(&out.stderr))
    })
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn run(config: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", config, "--output-dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    estc(&args)
}

#[test]
fn index_conversions() {
    assert_eq!(stdout(&estc(&["index", "--point", "0,0,2,2"])).trim(), "68");
    assert_eq!(stdout(&estc(&["index", "--index", "68"])).trim(), "0,0,2,2");
    assert_eq!(
        stdout(&estc(&["index", "--dump", "3"])),
        "i,n1,n2,n3,n4\n0,0,0,0,0\n1,0,0,-1,-1\n2,0,-1,0,-1\n"
    );
    assert_eq!(code(&estc(&["index", "--point", "1,0,0,0"])), 4);
    assert_eq!(code(&estc(&["index", "--index", "-1"])), 4);
    assert_eq!(code(&estc(&["index"])), 4);
}

#[test]
fn schedule_outputs() {
    let verify = estc(&["schedule", "--verify"]);
    assert_eq!(code(&verify), 0);
    let v = json_out(&verify);
    assert_eq!(v["separation"]["violations"], 0);
    assert_eq!(v["tables_ok"], true);
    assert_eq!(v["lattices"], 2222);

    let lattices = stdout(&estc(&["schedule", "--dump-lattices"]));
    let lines: Vec<&str> = lattices.lines().collect();
    assert_eq!(lines.len(), 2223);
    assert_eq!(lines[43], "43,35,2,1,-1,2,1,4,12,4,4,12");

    let model = stdout(&estc(&["schedule", "--model", "1"]));
    assert_eq!(model.lines().count(), 999);
    assert!(model.starts_with("k,i,n1,n2,n3,n4\n0,0,0,0,0,0\n"));
}

#[test]
fn pipeline_is_deterministic_and_digests_match() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", SAMPLE);
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    assert_eq!(code(&run(&cfg, &a, &[])), 0);
    assert_eq!(code(&run(&cfg, &b, &[])), 0);
    assert_eq!(code(&run(&cfg, &c, &["--threads", "1"])), 0);
    for name in REPORTS {
        let first = std::fs::read(a.join(name)).unwrap();
        assert_eq!(first, std::fs::read(b.join(name)).unwrap(), "{name} differs between reruns");
        assert_eq!(first, std::fs::read(c.join(name)).unwrap(), "{name} differs across thread counts");
    }

    let manifest = read_json(&a.join("manifest.json"));
    for name in REPORTS {
        let bytes = std::fs::read(a.join(name)).unwrap();
        let digest = {
            use sha2::Digest;
            hex::encode(sha2::Sha256::digest(&bytes))
        };
        assert_eq!(manifest["files"][name], digest.as_str());
    }
    assert_eq!(manifest["verification_passed"], true);
    assert_eq!(manifest["clusters"]["equations"], 998);
    assert_eq!(manifest["clusters"]["final_clusters"], 284);
    assert_eq!(read_json(&c.join("manifest.json"))["threads"], 1);

    let verification = read_json(&a.join("verification.json"));
    for key in ["max_trace_deviation", "max_idempotency_defect", "max_pair_overlap"] {
        assert!(verification["projector"][key].as_f64().unwrap() <= 1e-9, "{key}");
    }
    assert!(verification["residual"]["max_relative_on_model"].as_f64().unwrap() <= 1e-8);

    let obs = read_json(&a.join("observables.json"));
    assert_eq!(obs["a0_source"], "best");
    assert_eq!(obs["probes"]["bound_holds"], true);
    assert_eq!(obs["r"], obs["best"]["r_min"]);
}

#[test]
fn resume_reobserves_or_recomputes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", SAMPLE);
    let dir = tmp.path().join("out");
    let d = dir.to_str().unwrap();
    assert_eq!(code(&run(&cfg, &dir, &[])), 0);
    let before = read_json(&dir.join("manifest.json"));
    let solution_mtime = std::fs::metadata(dir.join("solution.estc")).unwrap().modified().unwrap();

    let out = estc(&["resume", "--output-dir", d, "--a0", "1,0,0,0,0,1,0,0", "--grid", "9"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let m = json_out(&out);
    assert_eq!(m["resume"], "observe-only");
    assert_eq!(m["stages_run"], serde_json::json!(["observe"]));
    assert_eq!(m["files"]["solution.estc"], before["files"]["solution.estc"]);
    assert_ne!(m["files"]["observables.json"], before["files"]["observables.json"]);
    assert_eq!(std::fs::metadata(dir.join("solution.estc")).unwrap().modified().unwrap(), solution_mtime);
    let obs = read_json(&dir.join("observables.json"));
    assert_eq!(obs["a0_source"], "given");
    assert_eq!(obs["a0"][2], serde_json::json!([0.0, 1.0]));
    assert!(obs["grid"]["u_e_relative_error"].as_f64().unwrap() <= 1e-6);
    assert!(obs["r"].as_f64().unwrap() >= obs["best"]["r_min"].as_f64().unwrap());

    let changed = write_config(tmp.path(), "changed.json", &SAMPLE.replace("0.37", "0.41"));
    let out = estc(&["resume", "--output-dir", d, "--config", &changed]);
    assert_eq!(code(&out), 0);
    let m = json_out(&out);
    assert_eq!(m["resume"], "full-recompute");
    assert_ne!(m["files"]["solution.estc"], before["files"]["solution.estc"]);
    assert_eq!(read_json(&dir.join("manifest.json"))["config"]["field"]["q4"], 0.41);
}

#[test]
fn corrupted_solution_is_a_digest_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", SAMPLE);
    let dir = tmp.path().join("out");
    assert_eq!(code(&run(&cfg, &dir, &[])), 0);
    let path = dir.join("solution.estc");
    let mut bytes = std::fs::read(&path).unwrap();
    let last = bytes.len() - 3;
    bytes[last] ^= 0x40;
    std::fs::write(&path, bytes).unwrap();
    let out = estc(&["resume", "--output-dir", dir.to_str().unwrap(), "--best"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("digest mismatch for solution.estc"));
}

#[test]
fn exit_codes_for_config_rank_and_verification_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    for bad in [
        r#"{"field": {"omega": -1.0}}"#,
        r#"{"field": {"omega": 1.0}, "tolerances": {"residual": 0.0}}"#,
        r#"{"field": {"omega": 1.0}, "model": {"k_list": [1, 2]}}"#,
        r#"{"field": {"omega": 1.0}, "model": {"k_list": [0, 5000]}}"#,
        r#"{"field": {"omega": 1.0}, "unknown": true}"#,
    ] {
        let cfg = write_config(tmp.path(), "bad.json", bad);
        assert_eq!(code(&run(&cfg, &out_dir, &[])), 4, "{bad}");
    }
    assert_eq!(code(&estc(&["run", "--bogus"])), 4);

    let free = write_config(tmp.path(), "free.json", FREE_P0);
    let out = run(&free, &out_dir, &[]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("rank 2"));

    let strict = SAMPLE.replace(r#""seed": 3"#, r#""seed": 3, "tolerances": {"projector": 1e-30}"#);
    let cfg = write_config(tmp.path(), "strict.json", &strict);
    let dir = tmp.path().join("strict");
    assert_eq!(code(&run(&cfg, &dir, &[])), 2);
    let manifest = read_json(&dir.join("manifest.json"));
    assert_eq!(manifest["verification_passed"], false);
    let verification = read_json(&dir.join("verification.json"));
    assert_eq!(verification["passed"], false);
    assert!(!verification["failures"].as_array().unwrap().is_empty());
}

#[test]
fn free_space_rank_deficient_run_reaches_zero_residual() {
    let tmp = tempfile::tempdir().unwrap();
    let text = FREE_P0.replace(r#""model": {"p": 0}"#, r#""model": {"p": 0}, "allow_rank_deficient": true"#);
    let cfg = write_config(tmp.path(), "free.json", &text);
    let dir = tmp.path().join("out");
    let out = run(&cfg, &dir, &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let obs = read_json(&dir.join("observables.json"));
    assert!(obs["best"]["r_min"].as_f64().unwrap() <= 1e-10);
    assert_eq!(obs["best"]["u_e_rank"], 2);
}

#[test]
fn output_dir_and_threads_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", SAMPLE);
    let dir = tmp.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_estc"))
        .args(["run", "--config", &cfg])
        .env("ESTC_OUTPUT_DIR", &dir)
        .env("ESTC_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(read_json(&dir.join("manifest.json"))["threads"], 2);
    assert_eq!(code(&estc(&["run", "--config", &cfg])), 4, "no output directory anywhere");
}

#[test]
fn solve_verify_observe_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", SAMPLE);
    let sol = tmp.path().join("s.estc");
    let s = sol.to_str().unwrap();

    let out = estc(&["solve", "--config", &cfg, "--k-list", "0,1,2,3", "--out", s]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json_out(&out);
    assert!(summary["projector"]["max_idempotency_defect"].as_f64().unwrap() <= 1e-9);

    let out = estc(&["verify", "--solution", s, "--k-list", "0,1,2,3"]);
    assert_eq!(code(&out), 0);
    let v = json_out(&out);
    assert!(v["residual"]["max_relative_on_model"].as_f64().unwrap() <= 1e-8);
    assert!(v["dual_path"]["relative_difference"].as_f64().unwrap() <= 1e-8);

    let out = estc(&["solve", "--config", &cfg, "--model", "1", "--out", s, "--compact"]);
    assert_eq!(code(&out), 0);
    assert!(json_out(&out)["projector"].is_null());
    let out = estc(&["verify", "--solution", s]);
    assert_eq!(code(&out), 0);
    assert_eq!(json_out(&out)["equations"], 998);
    let out = estc(&["verify", "--config", &cfg, "--k-list", "0,1"]);
    assert_eq!(code(&out), 0);
    assert!(json_out(&out)["projector"]["records"].as_u64().unwrap() > 0);

    let best = json_out(&estc(&["observe", "--solution", s, "--best"]));
    let given = json_out(&estc(&["observe", "--solution", s, "--a0", "2,0,0,0,0,0,0,-1"]));
    assert_eq!(best["u_e"], given["u_e"]);
    assert!(given["r"].as_f64().unwrap() >= best["best"]["r_min"].as_f64().unwrap());
    assert_eq!(code(&estc(&["observe", "--solution", s, "--a0", "1,2,3"])), 4);
    assert_eq!(code(&estc(&["observe", "--solution", s, "--a0", "0,0,0,0,0,0,0,0"])), 1);
}

#[test]
fn scan_emits_one_row_per_q4() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", SAMPLE);
    let out = estc(&["scan", "--config", &cfg, "--k-list", "0,1,2,3", "--q4", "0.3:0.4:0.05"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "q4,R_min");
    let q4: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(q4, ["0.3", "0.35", "0.4"]);
    assert!(lines[1..].iter().all(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap() >= 0.0));
    assert_eq!(code(&estc(&["scan", "--config", &cfg, "--q4", "0.4:0.3:0.1"])), 4);
}
