use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use prae::io::{frame_to_string, parse_ensemble};
use prae::rng;
use prae::{FieldTag, Frame};
use serde_json::Value;
use tempfile::TempDir;

fn prae(args: &[&str]) -> Output {
    prae_with(args, None)
}

fn prae_with(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_prae"));
    cmd.args(args).env_remove("PRAE_THREADS");
    if let Some(t) = threads {
        cmd.env("PRAE_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn ok(args: &[&str]) -> Output {
    let o = prae(args);
    assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn write_frame(dir: &TempDir, name: &str, field: FieldTag, d: usize, n: usize, seed: u64) -> PathBuf {
    let m = rng::gaussian_matrix(&mut rng::substream(seed, 70, 0), field, d, n);
    let f = match field {
        FieldTag::Real => Frame::from_real_matrix(&m.map(|v| v.re)).unwrap(),
        FieldTag::Complex => Frame::from_complex_matrix(&m).unwrap(),
    };
    let p = path(dir, name);
    fs::write(&p, frame_to_string(&f)).unwrap();
    p
}

#[test]
fn hankel_example_has_four_symmetric_matrices() {
    let dir = TempDir::new().unwrap();
    let h4 = path(&dir, "h4.json");
    ok(&["construct", "--family", "hankel", "--d", "4", "--out", s(&h4)]);
    let e = parse_ensemble(&fs::read_to_string(&h4).unwrap()).unwrap();
    assert_eq!(e.len(), 4);
    for a in e.matrices() {
        assert_eq!(a.entries(), &a.entries().transpose());
    }
    // Only the output file is left behind.
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn hankel_certifies_likely_pr_ae() {
    let dir = TempDir::new().unwrap();
    let h4 = path(&dir, "h4.json");
    let rep = path(&dir, "rep.json");
    ok(&["construct", "--family", "hankel", "--d", "4", "--out", s(&h4)]);
    ok(&["certify", "--ensemble", s(&h4), "--method", "montecarlo", "--trials", "200", "--seed", "1", "--json", s(&rep)]);
    let v = json(&rep);
    assert_eq!(v["verdict"], "LIKELY_PR_AE");
    assert_eq!(v["stats"]["seed"], 1);
    for key in ["method", "witnesses", "tolerances"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}

#[test]
fn gram_collision_writes_a_valid_witness() {
    let dir = TempDir::new().unwrap();
    let w = path(&dir, "w.json");
    ok(&["collide", "--frame", "gram", "--d", "3", "--seed", "2", "--json", s(&w)]);
    let v = json(&w);
    assert_eq!(v["valid"], true);
    assert_eq!(v["seed"], 2);
    assert_eq!(v["x"].as_array().unwrap().len(), 3);
    assert!(v["residual"].as_f64().unwrap() < 1e-10);
    assert!(v["separation"].as_f64().unwrap() > 1e-3);
}

#[test]
fn every_family_constructs_and_validates() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "e.json");
    for d in 1..=16usize {
        let dd = d.to_string();
        let (n1, n2, half) = ((d + 1).to_string(), (2 * d).to_string(), d.div_ceil(2).to_string());
        let rf = write_frame(&dir, "rf.json", FieldTag::Real, d, d + 1, d as u64);
        let cf = write_frame(&dir, "cf.json", FieldTag::Complex, d, 2 * d, d as u64);
        let cases: Vec<Vec<&str>> = vec![
            vec!["--family", "hankel", "--d", &dd],
            vec!["--family", "minimal-complex", "--d", &dd],
            vec!["--family", "random", "--field", "r", "--d", &dd, "--n", &n1],
            vec!["--family", "random", "--field", "c", "--d", &dd, "--n", &n2, "--rank", &half],
            vec!["--family", "random", "--field", "c", "--d", &dd, "--n", &n2, "--kind", "projection"],
            vec!["--family", "random", "--field", "r", "--d", &dd, "--n", &n1, "--kind", "projection", "--rank", &half],
            vec!["--family", "frame", "--frame", s(&rf)],
            vec!["--family", "frame", "--frame", s(&cf)],
        ];
        for case in cases {
            let mut args = vec!["construct"];
            args.extend(&case);
            args.extend(["--seed", "5", "--out", s(&out)]);
            ok(&args);
            let o = ok(&["validate", "--ensemble", s(&out)]);
            let report: Value = serde_json::from_slice(&o.stdout).unwrap();
            assert_eq!(report["pass"], true, "{case:?}");
        }
    }
}

#[test]
fn measure_then_recover_round_trip() {
    let dir = TempDir::new().unwrap();
    let (e, x, m, r) = (path(&dir, "e.json"), path(&dir, "x.json"), path(&dir, "m.json"), path(&dir, "r.json"));
    ok(&["construct", "--family", "random", "--field", "c", "--d", "3", "--n", "8", "--seed", "4", "--out", s(&e)]);
    ok(&["measure", "--ensemble", s(&e), "--random", "--seed", "9", "--save-signal", s(&x), "--out", s(&m)]);
    assert_eq!(json(&m).as_array().unwrap().len(), 8);
    ok(&["recover", "--ensemble", s(&e), "--measurements", s(&m), "--truth", s(&x), "--seed", "3", "--json", s(&r)]);
    let v = json(&r);
    assert_eq!(v["converged"], true);
    assert!(v["phase_error"].as_f64().unwrap() < 1e-6, "{v}");

    // Measuring the saved signal reproduces the measurement file byte for byte.
    let again = ok(&["measure", "--ensemble", s(&e), "--signal", s(&x)]);
    assert_eq!(again.stdout, fs::read(&m).unwrap());
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = TempDir::new().unwrap();
    let (pr, not, bad) = (path(&dir, "pr.json"), path(&dir, "not.json"), path(&dir, "bad.json"));
    ok(&["construct", "--family", "hankel", "--d", "3", "--out", s(&pr)]);
    ok(&["construct", "--family", "random", "--d", "4", "--n", "3", "--seed", "1", "--out", s(&not)]);

    let certify = |file: &Path, expect: &str| {
        code(&prae(&["certify", "--ensemble", s(file), "--method", "survey", "--trials", "20", "--expect", expect]))
    };
    // A full-rank survey is inconclusive, which never fails an expectation.
    let o = prae(&["certify", "--ensemble", s(&pr), "--method", "survey", "--trials", "20", "--expect", "not-pr-ae"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("INCONCLUSIVE"));
    assert_eq!(certify(&not, "pr-ae"), 1);
    assert_eq!(certify(&not, "not-pr-ae"), 0);
    let mc = |expect: &str| code(&prae(&["certify", "--ensemble", s(&pr), "--trials", "40", "--expect", expect]));
    assert_eq!(mc("pr-ae"), 0);
    assert_eq!(mc("not-pr-ae"), 1);

    // Exact checks on frames.
    let basis = path(&dir, "basis.json");
    fs::write(&basis, r#"{"field":"R","d":2,"N":2,"columns":[[1,0],[0,1]]}"#).unwrap();
    assert_eq!(code(&prae(&["certify", "--frame", s(&basis), "--method", "exact-rank-one", "--expect", "pr-ae"])), 1);

    fs::write(&bad, r#"{"field":"R","d":2,"N":1,"matrices":[[[0,1],[0,0]]]}"#).unwrap();
    assert_eq!(code(&prae(&["validate", "--ensemble", s(&bad)])), 1);
    assert_eq!(code(&prae(&["certify", "--ensemble", s(&bad)])), 2);
    assert_eq!(code(&prae(&["collide", "--ensemble", s(&pr), "--method", "kernel"])), 1);

    assert_eq!(code(&prae(&[])), 2);
    assert_eq!(code(&prae(&["construct", "--family", "nope"])), 2);
    assert_eq!(code(&prae(&["construct", "--family", "hankel"])), 2);
    assert_eq!(code(&prae(&["certify", "--ensemble", s(&pr), "--method", "guess"])), 2);
    assert_eq!(code(&prae(&["validate", "--ensemble", s(&path(&dir, "missing.json"))])), 2);
    assert_eq!(code(&prae_with(&["construct", "--family", "hankel", "--d", "2"], Some("zero"))), 2);
    fs::write(&bad, "{ not json").unwrap();
    let o = prae(&["validate", "--ensemble", s(&bad)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.json"));
}

#[test]
fn outputs_are_deterministic_across_runs_and_thread_counts() {
    let dir = TempDir::new().unwrap();
    let e = path(&dir, "e.json");
    let f = write_frame(&dir, "f.json", FieldTag::Real, 3, 5, 1);
    ok(&["construct", "--family", "random", "--field", "c", "--d", "3", "--n", "6", "--seed", "8", "--out", s(&e)]);
    let m = path(&dir, "m.json");
    ok(&["measure", "--ensemble", s(&e), "--random", "--seed", "2", "--out", s(&m)]);
    let pipelines: Vec<Vec<&str>> = vec![
        vec!["construct", "--family", "random", "--field", "c", "--d", "4", "--n", "8", "--seed", "3"],
        vec!["measure", "--ensemble", s(&e), "--random", "--seed", "6"],
        vec!["certify", "--ensemble", s(&e), "--trials", "30", "--seed", "5"],
        vec!["certify", "--ensemble", s(&e), "--method", "survey", "--trials", "30"],
        vec!["certify", "--frame", s(&f), "--method", "exact-rank-one"],
        vec!["collide", "--frame", "gram", "--d", "4", "--seed", "7"],
        vec!["recover", "--ensemble", s(&e), "--measurements", s(&m), "--seed", "1"],
        vec!["sweep", "--field", "r", "--d", "3", "--n", "2..5", "--trials", "6", "--seed", "4"],
        vec!["validate", "--ensemble", s(&e)],
    ];
    for args in pipelines {
        let base = prae_with(&args, Some("1"));
        assert_eq!(code(&base), 0, "{args:?}");
        assert_eq!(prae_with(&args, Some("1")).stdout, base.stdout, "{args:?} rerun");
        assert_eq!(prae_with(&args, Some("4")).stdout, base.stdout, "{args:?} 4 threads");
        assert_eq!(prae_with(&args, None).stdout, base.stdout, "{args:?} default threads");
    }
}

#[test]
fn sweep_accepts_lists_and_writes_csv() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "s.csv");
    ok(&["sweep", "--field", "c", "--d", "2", "--n", "3,4", "--kind", "projection", "--trials", "4", "--seed", "11", "--out", s(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "field,d,N,kind,trials,success_rate,seed");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("C,2,3,projection,4,") && lines[1].ends_with(",11"));
    assert_eq!(code(&prae(&["sweep", "--field", "r", "--d", "2", "--n", "5..3"])), 2);
}

#[test]
fn gram_frames_from_files_must_start_with_the_identity() {
    let dir = TempDir::new().unwrap();
    let good = path(&dir, "g.json");
    fs::write(&good, r#"{"field":"C","d":2,"N":3,"columns":[[[1,0],[0,0]],[[0,0],[1,0]],[[1,0],[1,0]]]}"#).unwrap();
    let o = ok(&["collide", "--frame", s(&good), "--method", "gram"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["valid"], true);
    let bad = path(&dir, "b.json");
    fs::write(&bad, r#"{"field":"C","d":2,"N":3,"columns":[[[2,0],[0,0]],[[0,0],[1,0]],[[1,0],[1,0]]]}"#).unwrap();
    assert_eq!(code(&prae(&["collide", "--frame", s(&bad), "--method", "gram"])), 2);
}
