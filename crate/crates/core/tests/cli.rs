use std::path::Path;
use std::process::{Command, Output};

fn icechain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icechain"))
        .args(args)
        .env_remove("ICECHAIN_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = icechain(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn exact_report_on_torus() {
    let dir = tempfile::tempdir().unwrap();
    let g = path(dir.path(), "g.json");
    ok(&["gen", "--family", "torus", "--rows", "2", "--cols", "2", "--out", &g]);
    let report = ok(&["exact", "--in", &g, "--b", "1/2", "--report"]);
    assert!(report.contains("|Ω| = 7"));
    assert!(report.contains("Z = 17/8"));
    assert!(report.contains("detailed balance residual = 0"));
    assert!(report.contains("irreducible and aperiodic = true"));

    let curve = path(dir.path(), "curve.csv");
    ok(&["exact", "--in", &g, "--b", "0.5", "--tmax", "50", "--out", &curve]);
    let text = std::fs::read_to_string(&curve).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,delta_max"));
    assert_eq!(lines.count(), 51);
}

#[test]
fn windable_verdicts() {
    let v: serde_json::Value = serde_json::from_str(&ok(&["windable", "--fn", "fstar", "--b", "1"])).unwrap();
    assert_eq!(v["verdict"], "unwindable");
    let v: serde_json::Value = serde_json::from_str(&ok(&["windable", "--fn", "fstar", "--b", "0"])).unwrap();
    assert_eq!(v["verdict"], "windable");

    let dir = tempfile::tempdir().unwrap();
    let f = path(dir.path(), "f.json");
    std::fs::write(&f, r#"{"arity":4,"table":{"0011":"1","1100":"1","0101":"1","1010":"1","0110":"1","1001":"1"}}"#).unwrap();
    let v: serde_json::Value = serde_json::from_str(&ok(&["windable", "--fn-file", &f])).unwrap();
    assert_eq!(v["verdict"], "windable");
}

#[test]
fn exit_codes() {
    assert_eq!(icechain(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(icechain(&["sample", "--bogus"]).status.code(), Some(2));
    assert_eq!(icechain(&["windable"]).status.code(), Some(2));
    assert_eq!(icechain(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let bad = path(dir.path(), "bad.json");
    std::fs::write(&bad, r#"{"vertices":1,"edges":[{"id":0,"a":{"v":0,"slot":5},"b":{"v":0,"slot":1}}]}"#).unwrap();
    let out = icechain(&["decompose", "--in", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("slot"));

    let g = path(dir.path(), "g.json");
    ok(&["gen", "--family", "chain", "--k", "1", "--out", &g]);
    assert_eq!(icechain(&["sample", "--in", &g, "--b", "1", "--steps", "3"]).status.code(), Some(1));
    assert_eq!(icechain(&["exact", "--in", &g, "--b", "-1"]).status.code(), Some(2));
    assert_eq!(icechain(&["gen", "--family", "torus", "--rows", "1"]).status.code(), Some(1));
}

#[test]
fn outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let g = path(dir.path(), "g.json");
    ok(&["gen", "--family", "chain", "--k", "5", "--out", &g]);
    let runs: Vec<Vec<String>> = (0..2)
        .map(|_| {
            vec![
                ok(&["decompose", "--in", &g]),
                ok(&["sample", "--in", &g, "--b", "1/3", "--steps", "200", "--burn-in", "50", "--seed", "9"]),
                ok(&["couple", "--in", &g, "--b", "1/3", "--mode", "coalesce", "--trials", "20", "--seed", "4"]),
                ok(&["couple", "--in", &g, "--b", "1/3", "--mode", "drift"]),
                ok(&["estimate-z", "--in", &g, "--b", "1/3", "--eps", "0.2", "--seed", "5"]),
                ok(&["gen", "--family", "random", "--vertices", "5", "--seed", "3"]),
            ]
        })
        .collect();
    assert_eq!(runs[0], runs[1]);

    let env_seeded = Command::new(env!("CARGO_BIN_EXE_icechain"))
        .args(["sample", "--in", &g, "--b", "1/3", "--steps", "200", "--burn-in", "50"])
        .env("ICECHAIN_SEED", "9")
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(env_seeded.stdout).unwrap(), runs[0][1]);
}

#[test]
fn sample_lines() {
    let dir = tempfile::tempdir().unwrap();
    let g = path(dir.path(), "g.json");
    let s = path(dir.path(), "samples.jsonl");
    ok(&["gen", "--family", "torus", "--out", &g]);
    ok(&["sample", "--in", &g, "--b", "1/2", "--steps", "10", "--thinning", "2", "--seed", "1", "--out", &s]);
    let text = std::fs::read_to_string(&s).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0]["step"], 2);
    assert_eq!(lines[0]["sigma"].as_str().unwrap().len(), 4);
}

#[test]
fn piped_workflow_on_every_family() {
    let dir = tempfile::tempdir().unwrap();
    let families: [&[&str]; 5] = [
        &["--family", "theta"],
        &["--family", "fig2"],
        &["--family", "torus", "--rows", "2", "--cols", "3"],
        &["--family", "chain", "--k", "4"],
        &["--family", "random", "--vertices", "4", "--seed", "2"],
    ];
    for (k, fam) in families.iter().enumerate() {
        let g = path(dir.path(), &format!("g{k}.json"));
        let mut args = vec!["gen"];
        args.extend_from_slice(fam);
        args.extend_from_slice(&["--out", &g]);
        ok(&args);
        let d: serde_json::Value = serde_json::from_str(&ok(&["decompose", "--in", &g])).unwrap();
        assert_eq!(d["flags"]["coherent"], true);
        let samples = ok(&["sample", "--in", &g, "--b", "1/4", "--steps", "20", "--seed", "1"]);
        assert_eq!(samples.lines().count(), 20);
        let est: serde_json::Value =
            serde_json::from_str(&ok(&["estimate-z", "--in", &g, "--b", "1/4", "--eps", "0.2", "--seed", "1"])).unwrap();
        assert!(est["z"].as_f64().unwrap() >= 1.0);
    }

    // instance on standard input
    let gen = icechain(&["gen", "--family", "fig2"]);
    let mut child = Command::new(env!("CARGO_BIN_EXE_icechain"))
        .args(["decompose", "--in", "-", "--convention", "neighbor"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    use std::io::Write;
    child.stdin.take().unwrap().write_all(&gen.stdout).unwrap();
    let out = child.wait_with_output().unwrap();
    let d: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(d["delta"], serde_json::json!([1, 1]));
}

#[test]
fn couple_bound_modes() {
    let dir = tempfile::tempdir().unwrap();
    let g = path(dir.path(), "g.json");
    ok(&["gen", "--family", "torus", "--out", &g]);
    let v: serde_json::Value =
        serde_json::from_str(&ok(&["couple", "--in", &g, "--b", "1/2", "--mode", "bound", "--eps", "0.01"])).unwrap();
    assert!((v["tau"].as_f64().unwrap() - 133.69).abs() < 0.01);
    assert_eq!(v["beta"], "19/20");
    let v: serde_json::Value = serde_json::from_str(&ok(&["couple", "--in", &g, "--b", "1", "--mode", "bound"])).unwrap();
    assert!(v["tau"].is_null());
    assert!(v["outside_proven_region"].as_str().unwrap().contains("1/δ"));
}
