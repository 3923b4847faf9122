use std::path::Path;
use std::process::{Command, Output};

fn mchaos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mchaos")).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn theory_commands() {
    let out = mchaos(&["theory", "d-gamma", "--gamma", "0.5", "--d", "1"]);
    assert!(out.status.success());
    assert!((json(&out)["d_gamma"].as_f64().unwrap() - 0.75).abs() < 1e-12);

    let out = mchaos(&["theory", "chi-bound", "--chi", "0.5"]);
    assert!((json(&out)["bound"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    let out = mchaos(&["theory", "chi-bound", "--chi", "0.5", "--a", "0.5"]);
    assert!((json(&out)["bound"].as_f64().unwrap() - 0.875).abs() < 1e-12);

    let out = mchaos(&["theory", "lf", "--model", "gmc", "--gamma", "0.5"]);
    assert!((json(&out)["value"].as_f64().unwrap() - 0.75).abs() < 1e-9);

    let law = r#"{"kind":"discrete","values":[0.5,1.5],"probs":[0.5,0.5]}"#;
    let out = mchaos(&["theory", "cascade-bound", "--law", law]);
    let v = json(&out)["value"].as_f64().unwrap();
    assert!((v - (1.0 - 1.25f64.log2())).abs() < 1e-9, "{v}");

    let out = mchaos(&["theory", "d-sigma", "--sigma", "0.5"]);
    assert!(out.status.success());
}

#[test]
fn exit_codes() {
    assert_eq!(mchaos(&["nonsense"]).status.code(), Some(1));
    assert_eq!(mchaos(&["theory", "d-gamma"]).status.code(), Some(1));
    // supercritical gamma is an argument error
    assert_eq!(mchaos(&["theory", "d-gamma", "--gamma", "3"]).status.code(), Some(1));
    assert_eq!(mchaos(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{\n  \"model\": ,\n}");
    let out = mchaos(&["run", &bad]);
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("line 2") && msg.contains("column"), "{msg}");
}

#[test]
fn verify_kernel_report() {
    let out = mchaos(&["verify", "kernel", "--kind", "exact-log", "--alpha0", "0.5"]);
    let r = json(&out);
    assert_eq!(r["pass"], true);
    for c in ["h1", "h2", "h2_sharp", "h3", "bounds"] {
        assert!(r[c]["worst_value"].is_number(), "{c}");
        assert!(r[c]["worst_location"].is_string(), "{c}");
    }
    let out = mchaos(&["verify", "kernel", "--kind", "exact-log", "--alpha0", "1"]);
    let r = json(&out);
    assert_eq!(r["pass"], false);
    assert_eq!(r["h3"]["pass"], false);
}

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_string_lossy().into_owned();
    let out = mchaos(&[
        "simulate",
        "mrc",
        "--lambda",
        r#"{"builtin":{"canonical_alpha":0.5}}"#,
        "--m",
        "10",
        "--samples",
        "4",
        "--seed",
        "3",
        "--out",
        &d,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["masses"].as_array().unwrap().len(), 4);
    let fields: Vec<String> = (0..4).map(|i| format!("{d}/field_{i:05}.json")).collect();
    let masks: Vec<String> = (0..4).map(|i| format!("{d}/mask_{i:05}.json")).collect();

    let mut args = vec!["estimate", "fourier"];
    args.extend(fields.iter().map(String::as_str));
    let out = mchaos(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(&out);
    for k in ["slope", "stderr", "bands", "method"] {
        assert!(!s[k].is_null(), "{k}");
    }
    args.extend(["--format", "csv"]);
    let out = mchaos(&args);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("band,log_freq,log_stat,n_points\n"), "{text}");

    let mut args = vec!["estimate", "boxdim"];
    args.extend(masks.iter().map(String::as_str));
    assert!(mchaos(&args).status.success());
}

#[test]
fn run_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "gmc.json",
        r#"{"model":{"kind":"gmc","gamma":0.5},"grid":{"d":1,"b":2,"m":10},
            "ensemble":{"samples":16,"master_seed":7},"estimators":[{"kind":"fourier"}]}"#,
    );
    let out_dir = dir.path().join("out");
    let o = out_dir.to_string_lossy().into_owned();
    let out = mchaos(&["run", &cfg, "--out", &o, "--threads", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["record.json", "bands.csv", "timing.json"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let record: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("record.json")).unwrap()).unwrap();
    assert_eq!(record["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(record["samples"].as_array().unwrap().len(), 16);

    let rec = out_dir.join("record.json").to_string_lossy().into_owned();
    let out = mchaos(&["compare", &rec]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = json(&out);
    let rows = rows.as_array().unwrap();
    let status = |name: &str| rows.iter().find(|r| r["estimator"] == name).unwrap()["status"].clone();
    assert_eq!(status("fourier-ensemble"), "pass");
    assert_eq!(status("corrdim"), "not-run");

    // an impossible prediction must fail the comparison with exit code 3
    let mut doctored = record.clone();
    doctored["predictions"][0]["value"] = serde_json::json!(5.0);
    let path = write(dir.path(), "doctored.json", &doctored.to_string());
    assert_eq!(mchaos(&["compare", &path]).status.code(), Some(3));
}

#[test]
fn degenerate_covering_warns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "mrc.json",
        r#"{"model":{"kind":"mrc","lambda":{"builtin":{"canonical_alpha":1.5}}},"grid":{"d":1,"b":2,"m":6},
            "ensemble":{"samples":2,"master_seed":1},"estimators":[]}"#,
    );
    let o = dir.path().join("out");
    let out = mchaos(&["run", &cfg, "--out", &o.to_string_lossy()]);
    assert!(out.status.success());
    let record: serde_json::Value = serde_json::from_slice(&std::fs::read(o.join("record.json")).unwrap()).unwrap();
    let w = record["warnings"].as_array().unwrap();
    assert!(w.iter().any(|w| w.as_str().unwrap().contains("degenerate regime")));
}

#[test]
fn failed_run_leaves_nothing() {
    let dir = tempfile::tempdir().unwrap();
    // one band is too few to fit
    let cfg = write(
        dir.path(),
        "tiny.json",
        r#"{"model":{"kind":"gmc","gamma":0.5},"grid":{"d":1,"b":2,"m":3},
            "ensemble":{"samples":2,"master_seed":1},"estimators":[{"kind":"fourier"}]}"#,
    );
    let o = dir.path().join("out");
    let out = mchaos(&["run", &cfg, "--out", &o.to_string_lossy()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fourier"));
    assert!(!o.join("record.json").exists());
}
