use std::fs;
use std::process::{Command, Output};

use serde_json::Value;
use tokennet::lambda::{alpha_eq, parse};

const OMEGA: &str = "(\\w.w w) (\\w.w w)";

fn tokennet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tokennet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json_lines(out: &Output) -> Vec<Value> {
    stdout(out)
        .lines()
        .map(|l| serde_json::from_str(l).expect("valid JSON line"))
        .collect()
}

#[test]
fn reduce_prints_the_normal_form() {
    let out = tokennet(&["reduce", "(\\x.x) y"]);
    assert_eq!((code(&out), stdout(&out).as_str()), (0, "y\n"));
    let out = tokennet(&["reduce", &format!("(\\x.z) ({OMEGA})"), "--fuel", "100000"]);
    assert_eq!((code(&out), stdout(&out).as_str()), (0, "z\n"));
}

#[test]
fn reduce_exit_codes() {
    assert_eq!(code(&tokennet(&["reduce", OMEGA, "--fuel", "100000"])), 1);
    assert_eq!(
        code(&tokennet(&[
            "reduce",
            "(\\x.x) y",
            "--disable-rule",
            "Call~Hold"
        ])),
        2
    );
    assert_eq!(code(&tokennet(&["reduce", "(\\x"])), 3);
    assert_eq!(
        code(&tokennet(&["reduce", "y", "--disable-rule", "CallHold"])),
        3
    );
}

#[test]
fn reduce_reports_stats_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let out = tokennet(&[
        "reduce",
        "(\\x.x x) (\\y.y)",
        "--strategy",
        "random",
        "--seed",
        "4",
        "--stats",
        "--debug-checks",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("\\v0.v0"));
    let report: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(report["result"]["kind"], "normal");
    assert_eq!(report["strategy"], "random:4");
    assert_eq!(report["seed"], 4);
    let total = report["stats"]["total"].as_u64().unwrap();
    let per_rule: u64 = report["stats"]["perRule"]
        .as_object()
        .unwrap()
        .values()
        .map(|v| v.as_u64().unwrap())
        .sum();
    assert_eq!(total, per_rule);
    assert_eq!(report["stats"]["beta"], 2);

    let steps: Vec<Value> = fs::read_to_string(&trace)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(steps.len() as u64, total);
    assert_eq!(steps[0]["step"], 1);
    assert!(steps
        .iter()
        .all(|s| s["rule"].as_str().unwrap().contains('~')));
    assert!(steps
        .iter()
        .any(|s| s["rule"] == "App~Lam" && s["li"].is_i64()));
}

#[test]
fn oracle_command() {
    let out = tokennet(&["oracle", "(\\x.x) y"]);
    assert_eq!((code(&out), stdout(&out).as_str()), (0, "y\n"));
    let out = tokennet(&["oracle", "(\\f.\\x.f (f x)) (\\f.\\x.f (f x))"]);
    let four = parse(stdout(&out).trim()).unwrap();
    assert!(alpha_eq(&four, &parse("\\f x.f (f (f (f x)))").unwrap()));
    let out = tokennet(&["oracle", OMEGA, "--fuel", "500"]);
    assert_eq!((code(&out), stdout(&out).as_str()), (1, "DIVERGES(500)\n"));
    assert_eq!(code(&tokennet(&["oracle", ")"])), 3);
}

#[test]
fn diff_on_the_default_corpus() {
    let out = tokennet(&["diff", "--seeds", "3"]);
    assert_eq!(code(&out), 0);
    let records = json_lines(&out);
    assert!(records.len() >= 30);
    assert!(records
        .iter()
        .all(|r| r["verdict"] == "match" || r["verdict"] == "both-diverge"));
    assert_eq!(records[0]["engine"].as_array().unwrap().len(), 5);
    let indices: Vec<u64> = records
        .iter()
        .map(|r| r["index"].as_u64().unwrap())
        .collect();
    assert!(indices.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn diff_verdicts_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let omega = dir.path().join("omega.txt");
    fs::write(&omega, format!("# only divergence\n{OMEGA}\n")).unwrap();
    let out = tokennet(&[
        "diff",
        "--corpus",
        omega.to_str().unwrap(),
        "--fuel",
        "10000",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(json_lines(&out)[0]["verdict"], "both-diverge");

    let out = tokennet(&["diff", "--seeds", "1", "--disable-rule", "Read~Lam"]);
    assert_eq!(code(&out), 4);

    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "\\x.x\n(\\x\n").unwrap();
    assert_eq!(
        code(&tokennet(&["diff", "--corpus", bad.to_str().unwrap()])),
        3
    );
    assert_eq!(
        code(&tokennet(&["diff", "--corpus", "/nonexistent/corpus.txt"])),
        3
    );
}

#[test]
fn fuzz_campaigns() {
    let out = tokennet(&["fuzz", "--count", "0", "--size", "12", "--seed", "1"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).is_empty());
    let out = tokennet(&[
        "fuzz", "--count", "200", "--size", "12", "--seed", "1", "--fuel", "100000",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(json_lines(&out).len(), 200);
}

#[test]
fn failing_fuzz_cases_replay_identically() {
    let dir = tempfile::tempdir().unwrap();
    let save = dir.path().join("cases");
    let args = ["--disable-rule", "Top~Atom"];
    let out = tokennet(
        &[
            &[
                "fuzz",
                "--count",
                "3",
                "--size",
                "6",
                "--seed",
                "2",
                "--save",
                save.to_str().unwrap(),
            ],
            &args[..],
        ]
        .concat(),
    );
    assert_eq!(code(&out), 4);
    let case = fs::read_dir(&save).unwrap().next().unwrap().unwrap().path();
    let saved: Value = serde_json::from_str(&fs::read_to_string(&case).unwrap()).unwrap();
    assert_eq!(saved["verdict"], "engine-stuck");
    assert!(!saved["trace"].as_array().unwrap().is_empty());

    let out = tokennet(&[&["replay", case.to_str().unwrap()], &args[..]].concat());
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("reproduced: true"));
    assert_eq!(json_lines(&out)[0]["verdict"], "engine-stuck");
}

#[test]
fn encode_command() {
    let out = tokennet(&["encode", "y"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("Atom{y}"));
    let out = tokennet(&["encode", "\\x.x"]);
    assert_eq!(stdout(&out).matches("Lam_0").count(), 1);
    let term = "(\\x.x x) (\\f y.f (f y))";
    assert_eq!(
        stdout(&tokennet(&["encode", term])),
        stdout(&tokennet(&["encode", term]))
    );
    assert_eq!(code(&tokennet(&["encode", "\\."])), 3);
}
