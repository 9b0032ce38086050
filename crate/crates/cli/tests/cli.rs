mod common;

use std::fs;

use common::*;
use hls_lab_core::experiment::{build_session, Choice, Phase, ResponseRecord};
use hls_lab_core::stimuli::{leq, set_leq, speech_shaped_noise};
use hls_lab_core::wav::read_wav;
use rand::Rng;
use serde_json::Value;
use tempfile::TempDir;

#[test]
fn decompose_prints_table_rows() {
    let o = hls_lab(&["decompose", "--alphas", "1,0.5,0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<Vec<&str>> = out.lines().skip(3).map(|l| l.split_whitespace().skip(1).collect()).collect();
    assert_eq!(rows[0], ["0+8", "0+8", "0+9", "0+10", "0+19", "0+43", "0+59"]);
    assert_eq!(rows[1], ["8+0", "8+0", "9+0", "10+0", "19+0", "27+16", "27+32"]);
    assert_eq!(rows[2], ["8+0", "8+0", "9+0", "10+0", "19+0", "43+0", "44+15"]);
}

#[test]
fn decompose_rejects_bad_profile() {
    let o = hls_lab(&["decompose", "--profile", "/no/such/profile.json"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("profile"));
}

fn level_change(out: &str) -> f64 {
    let line = out.lines().find(|l| l.starts_with("level change:")).expect("level change line");
    line.split_whitespace().nth(2).unwrap().parse().unwrap()
}

#[test]
fn simulate_sine_drops_by_ten_db() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("sine.wav");
    write_f32(&input, &set_leq(&sine(1000.0, 1.0), 70.0, 30.0).unwrap());
    for method in ["dtvf", "fbas"] {
        let output = dir.path().join(format!("out_{method}.wav"));
        let o = hls_lab(&["simulate", input.to_str().unwrap(), output.to_str().unwrap(), "--method", method]);
        assert!(o.status.success(), "{}", stderr(&o));
        let d = level_change(&stdout(&o));
        assert!((d + 10.0).abs() <= 1.0, "{method}: {d}");
        let y = read_wav::<f64>(&output).unwrap();
        assert!((70.0 - leq(&y.samples, 30.0).unwrap() - 10.0).abs() <= 1.0);
        assert!(stdout(&o).contains("clipped samples: 0"));
    }
}

#[test]
fn simulate_verify_linear() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("ssn.wav");
    write_f32(&input, &set_leq(&speech_shaped_noise::<f64>(FS as usize, FS, 4), 70.0, 30.0).unwrap());
    let out = dir.path().join("o.wav");
    let o = hls_lab(&["simulate", input.to_str().unwrap(), out.to_str().unwrap(), "--verify-linear"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = stdout(&o).lines().find(|l| l.starts_with("linear residual")).unwrap().to_string();
    let rel: f64 = line.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!(rel <= -50.0, "{line}");
    // Level-dependent settings cannot be verified this way.
    let o = hls_lab(&["simulate", input.to_str().unwrap(), out.to_str().unwrap(), "--verify-linear", "--alpha", "0"]);
    assert!(!o.status.success());
}

#[test]
fn simulate_silence_is_silence() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("zero.wav");
    write_f32(&input, &vec![0.0; 4800]);
    let out = dir.path().join("o.wav");
    let o = hls_lab(&["simulate", input.to_str().unwrap(), out.to_str().unwrap(), "--alpha", "0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(read_wav::<f64>(&out).unwrap().samples.iter().all(|&v| v == 0.0));
    assert!(stdout(&o).contains("output Leq: silent"));
}

#[test]
fn inconsistent_flags_write_nothing() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("s.wav");
    write_f32(&input, &sine(500.0, 0.1));
    let out = dir.path().join("o.wav");
    for bad in [["--alpha", "1.2"], ["--fir-len", "4096"], ["--hop-ms", "-1"]] {
        let o = hls_lab(&["simulate", input.to_str().unwrap(), out.to_str().unwrap(), bad[0], bad[1]]);
        assert!(!o.status.success(), "{bad:?}");
        assert!(!out.exists());
    }
    let o = hls_lab(&["simulate", "/no/such.wav", out.to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn show_config_lists_defaults() {
    let o = hls_lab(&["--show-config", "--seed", "42"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["seed"], 42);
    assert_eq!(v["alpha"], 1.0);
    assert_eq!(v["cal_offset"], 30.0);
    assert_eq!(v["synthesis"]["fir_len"], 128);
    assert_eq!(v["synthesis"]["hop_ms"], 1.0);
}

const CONDITIONS: &str = r#"[
  {"label": "NH", "method": "dtvf", "profile": "normal"},
  {"label": "D1", "method": "dtvf", "alpha": 1.0},
  {"label": "F0", "method": "fbas", "alpha": 0.0}
]"#;

/// prepare -> session-build -> enroll on two short items.
fn prepared_store(dir: &TempDir) -> std::path::PathBuf {
    let conds = dir.path().join("conditions.json");
    fs::write(&conds, CONDITIONS).unwrap();
    let mut items = Vec::new();
    for (i, name) in ["w1", "w2", "w3"].iter().enumerate() {
        let p = dir.path().join(format!("{name}.wav"));
        write_f32(&p, &speech_shaped_noise::<f64>(FS as usize / 4, FS, i as u64));
        items.push(p.to_str().unwrap().to_string());
    }
    let out = dir.path().join("prepared");
    let mut args = vec!["prepare", "--conditions", conds.to_str().unwrap(), "--out", out.to_str().unwrap(), "--reference", "NH", "--seed", "17"];
    args.extend(items.iter().map(String::as_str));
    let o = hls_lab(&args);
    assert!(o.status.success(), "{}", stderr(&o));

    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 17);
    for item in manifest["items"].as_array().unwrap() {
        let outs = item["outputs"].as_array().unwrap();
        let reference = outs[0]["leq_db"].as_f64().unwrap();
        for o in outs {
            assert!((o["leq_db"].as_f64().unwrap() - reference).abs() <= 0.01);
            let wav = read_wav::<f64>(out.join(o["file"].as_str().unwrap())).unwrap();
            assert!((leq(&wav.samples, 30.0).unwrap() - reference).abs() <= 0.01);
        }
    }

    let design = dir.path().join("design.json");
    fs::write(
        &design,
        r#"{"training_conditions": ["D1", "F0"], "training_items": ["w1", "w2"], "practice_items": ["w3"], "practice_limit": 2, "main_items": ["w1", "w2", "w3"], "pass_threshold": {"required": 7, "out_of": 8}}"#,
    )
    .unwrap();
    let store = dir.path().join("store");
    let o = hls_lab(&["session-build", "--manifest", out.join("manifest.json").to_str().unwrap(), "--design", design.to_str().unwrap(), "--store", store.to_str().unwrap(), "--seed", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("conditions: 3 (6 ordered pairs)"), "{text}");
    assert!(text.contains("training trials: 8"));
    assert!(text.contains("main trials: 18"));
    store
}

#[test]
fn prepare_build_enroll_serve() {
    let dir = TempDir::new().unwrap();
    let store = prepared_store(&dir);
    let s = store.to_str().unwrap();
    let o = hls_lab(&["enroll", "P7", "--store", s]);
    assert!(o.status.success(), "{}", stderr(&o));
    let e: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(e["training"], "P7-training");
    assert!(!hls_lab(&["enroll", "P7", "--store", s]).status.success());
    // Store flag can come from the environment.
    let o = std::process::Command::new(env!("CARGO_BIN_EXE_hls-lab"))
        .args(["enroll", "P8"])
        .env("HLS_LAB_STORE", s)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));

    let server = Server::start(&store, free_port());
    let (status, body) = server.get("/api/session/P7-training");
    assert_eq!(status, 200);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["n_trials"], 8);
    let (status, body) = server.get("/api/progress/P7");
    assert_eq!(status, 200, "{body}");
    let (status, _) = server.post(
        "/api/response",
        r#"{"session_id":"P7-training","participant_id":"P7","trial_index":0,"choice":"first"}"#,
    );
    assert_eq!(status, 201);
    let url = v["trials"][0]["first"].as_str().unwrap();
    let (status, _) = server.get(url);
    assert_eq!(status, 200);
}

#[test]
fn session_build_needs_store() {
    let o = hls_lab(&["session-build", "--manifest", "m.json", "--design", "d.json"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("HLS_LAB_STORE"));
}

fn write_log(path: &std::path::Path, listeners: usize, seed: u64) {
    let conds: Vec<String> = ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect();
    let items: Vec<String> = (0..6).map(|i| format!("i{i}")).collect();
    let mut g = hls_lab_testkit::rng(seed);
    let mut text = String::new();
    for l in 0..listeners {
        let plan = build_session(&format!("L{l}-main"), &items, &conds, Phase::Main, seed + l as u64).unwrap();
        for (k, t) in plan.trials.iter().enumerate() {
            let r = ResponseRecord {
                session_id: plan.session_id.clone(),
                participant_id: format!("L{l}"),
                trial_index: k,
                item: t.item.clone(),
                pair: (t.first.clone(), t.second.clone()),
                choice: if g.random_bool(0.5) { Choice::First } else { Choice::Second },
                timestamp: 1_700_000_000_000 + k as u64,
                phase: Phase::Main,
            };
            text.push_str(&serde_json::to_string(&r).unwrap());
            text.push('\n');
        }
    }
    fs::write(path, text).unwrap();
}

#[test]
fn score_uniform_choices_stay_within_ci_of_zero() {
    let dir = TempDir::new().unwrap();
    let log = dir.path().join("log.jsonl");
    write_log(&log, 8, 3);
    let report = dir.path().join("report.json");
    let o = hls_lab(&["score", log.to_str().unwrap(), "--out", report.to_str().unwrap(), "--q-crit", "4.0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).is_empty(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let means = v["means"].as_array().unwrap();
    let hw = v["ci"]["half_widths"].as_array().unwrap();
    for (m, h) in means.iter().zip(hw) {
        assert!(m.as_f64().unwrap().abs() <= h.as_f64().unwrap(), "{m} vs ±{h}");
    }
    assert!(v["hsd"]["pairs"].as_array().unwrap().len() == 6);
    assert!(stdout(&o).contains("99% CI"));
}

#[test]
fn score_single_listener_warns_and_omits_ci() {
    let dir = TempDir::new().unwrap();
    let log = dir.path().join("log.jsonl");
    write_log(&log, 1, 9);
    let o = hls_lab(&["score", log.to_str().unwrap(), "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("only one listener"));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["ci"].is_null());
    assert_eq!(v["means"].as_array().unwrap().len(), 4);
}

#[test]
fn score_reports_malformed_line_numbers() {
    let dir = TempDir::new().unwrap();
    let log = dir.path().join("log.jsonl");
    write_log(&log, 2, 1);
    let mut text = fs::read_to_string(&log).unwrap();
    text.insert_str(0, "{\"broken\": true}\n");
    fs::write(&log, text).unwrap();
    let o = hls_lab(&["score", log.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 1"), "{}", stderr(&o));
}
