use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn corpus(name: &str, file: &str) -> String {
    root().join("corpus").join(name).join(file).display().to_string()
}

fn eraser(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eraser")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// `eraser run` on a corpus design; returns exit code and parsed report.
fn run(dir: &TempDir, design: &str, tag: &str, extra: &[&str]) -> (i32, Value) {
    let out = dir.path().join(format!("{design}-{tag}.json"));
    let (d, s) = (corpus(design, "design.v"), corpus(design, "stim.txt"));
    let mut args = vec!["run", "-d", &d, "-s", &s, "-o", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = eraser(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    (code(&o), json(&out))
}

fn detected(rep: &Value) -> Vec<bool> {
    rep["faults"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["detected"].as_bool().unwrap())
        .collect()
}

#[test]
fn report_matches_schema() {
    let dir = TempDir::new().unwrap();
    let schema = json(&root().join("docs/report.schema.json"));
    let v = jsonschema::validator_for(&schema).unwrap();
    for (tag, extra) in [
        ("plain", &[][..]),
        ("verify", &["--verify-redundancy", "--no-drop"][..]),
    ] {
        let (_, rep) = run(&dir, "mux_ff", tag, extra);
        let errors: Vec<String> = v.iter_errors(&rep).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{errors:#?}");
    }
    let out = dir.path().join("oracle.json");
    let (d, s) = (corpus("alu4", "design.v"), corpus("alu4", "stim.txt"));
    assert_eq!(
        code(&eraser(&["oracle", "-d", &d, "-s", &s, "-o", out.to_str().unwrap()])),
        0
    );
    assert!(v.is_valid(&json(&out)));
}

#[test]
fn mux_ff_coverage() {
    let dir = TempDir::new().unwrap();
    let (_, rep) = run(&dir, "mux_ff", "cov", &[]);
    assert_eq!(rep["coverage"]["percent"], 80.0);
    assert_eq!(rep["totals"]["faults"], 10);
    assert_eq!(rep["mode"], "full");
    let c = &rep["counters"];
    assert_eq!(
        c["activations"].as_u64(),
        Some(
            c["explicit_skips"].as_u64().unwrap()
                + c["implicit_skips"].as_u64().unwrap()
                + c["executions"].as_u64().unwrap()
        )
    );
}

#[test]
fn diff_between_modes() {
    let dir = TempDir::new().unwrap();
    run(&dir, "fig5", "none", &["--mode", "none"]);
    run(&dir, "fig5", "full", &["--mode", "full"]);
    let a = dir.path().join("fig5-none.json");
    let b = dir.path().join("fig5-full.json");
    let (a, b) = (a.to_str().unwrap(), b.to_str().unwrap());
    assert_eq!(code(&eraser(&["diff", a, b, "--detected-only"])), 0);
    let full = eraser(&["diff", a, b]);
    assert_eq!(code(&full), 1);
    let d: Value = serde_json::from_slice(&full.stdout).unwrap();
    assert!(d["status"].as_array().unwrap().is_empty());
    assert!(!d["counters"].as_array().unwrap().is_empty());
    assert_eq!(code(&eraser(&["diff", a, a])), 0);
}

#[test]
fn oracle_agrees_with_run() {
    let dir = TempDir::new().unwrap();
    let (_, rep) = run(&dir, "counter8", "run", &[]);
    let out = dir.path().join("oracle.json");
    let (d, s) = (corpus("counter8", "design.v"), corpus("counter8", "stim.txt"));
    assert_eq!(
        code(&eraser(&["oracle", "-d", &d, "-s", &s, "-o", out.to_str().unwrap()])),
        0
    );
    let o = json(&out);
    assert_eq!(o["kind"], "oracle");
    assert_eq!(detected(&o), detected(&rep));
    let run_path = dir.path().join("counter8-run.json");
    assert_eq!(
        code(&eraser(&[
            "diff",
            run_path.to_str().unwrap(),
            out.to_str().unwrap(),
            "--detected-only"
        ])),
        0
    );
}

#[test]
fn oracle_limit() {
    let (d, s) = (corpus("alu4", "design.v"), corpus("alu4", "stim.txt"));
    let o = eraser(&["oracle", "-d", &d, "-s", &s, "--limit", "3"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("oracle limit of 3"), "{}", stderr(&o));
}

#[test]
fn lint_reports_location_and_rule() {
    let dir = TempDir::new().unwrap();
    let v = dir.path().join("loop.v");
    fs::write(
        &v,
        "module top(input clk, output reg [3:0] q);\n  always @(posedge clk)\n    while (q != 0) q <= q - 1;\nendmodule\n",
    )
    .unwrap();
    let o = eraser(&["lint", "-d", v.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(
        err.contains(&format!("{}:3:5: no-unbounded-loop", v.display())),
        "{err}"
    );
    assert_eq!(code(&eraser(&["lint", "-d", &corpus("pipe_acc", "design.v")])), 0);
}

#[test]
fn parse_error_exits_2() {
    let dir = TempDir::new().unwrap();
    let v = dir.path().join("delay.v");
    fs::write(&v, "module top(input a, output y);\n  assign #1 y = a;\nendmodule\n").unwrap();
    let o = eraser(&["run", "-d", v.to_str().unwrap(), "-s", &corpus("mux_ff", "stim.txt")]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains(&format!("{}:2:", v.display())), "{}", stderr(&o));
}

#[test]
fn unknown_stimulus_port_exits_2() {
    let dir = TempDir::new().unwrap();
    let s = dir.path().join("stim.txt");
    fs::write(&s, "@0\ns = 0\n@5\nbogus = 1\n").unwrap();
    let o = eraser(&["run", "-d", &corpus("mux_ff", "design.v"), "-s", s.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains(&format!("{}:4: stimulus:", s.display())), "{err}");
    assert!(err.contains("bogus"), "{err}");
}

#[test]
fn max_cycles_bound() {
    let o = eraser(&[
        "run",
        "-d",
        &corpus("mux_ff", "design.v"),
        "-s",
        &corpus("mux_ff", "stim.txt"),
        "--max-cycles",
        "5",
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--max-cycles"));
}

#[test]
fn explicit_fault_list() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("faults.txt");
    fs::write(&f, "# one fault\ntop.q sa1\n").unwrap();
    let (_, rep) = run(&dir, "mux_ff", "one", &["--faults", f.to_str().unwrap()]);
    let faults = rep["faults"].as_array().unwrap();
    assert_eq!(faults.len(), 1);
    assert_eq!(faults[0]["signal"], "top.q");
    assert_eq!(faults[0]["stuck"], "sa1");

    fs::write(&f, "top.q sa2\n").unwrap();
    let o = eraser(&[
        "run",
        "-d",
        &corpus("mux_ff", "design.v"),
        "-s",
        &corpus("mux_ff", "stim.txt"),
        "--faults",
        f.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains(&format!("{}:1: fault-list:", f.display())));
}

#[test]
fn empty_fault_list_warns() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("none.txt");
    fs::write(&f, "# nothing\n").unwrap();
    let out = dir.path().join("r.json");
    let o = eraser(&[
        "run",
        "-d",
        &corpus("mux_ff", "design.v"),
        "-s",
        &corpus("mux_ff", "stim.txt"),
        "--faults",
        f.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("warning: empty fault list"));
    let rep = json(&out);
    assert_eq!(rep["totals"]["faults"], 0);
    assert_eq!(rep["coverage"]["warning"], "empty fault list");
}

#[test]
fn verify_stats_present() {
    let dir = TempDir::new().unwrap();
    let (_, rep) = run(&dir, "pipe_acc", "verify", &["--verify-redundancy"]);
    assert_eq!(rep["verify"]["violations"], 0);
    let c = &rep["counters"];
    assert_eq!(
        rep["verify"]["checked"].as_u64(),
        Some(c["explicit_skips"].as_u64().unwrap() + c["implicit_skips"].as_u64().unwrap())
    );
    let (_, plain) = run(&dir, "pipe_acc", "plain", &[]);
    assert!(plain.get("verify").is_none());
}

#[test]
fn dumps_are_json() {
    let d = corpus("pipe_acc", "design.v");
    let g: Value = serde_json::from_slice(&eraser(&["dump-graph", "-d", &d]).stdout).unwrap();
    assert!(g.is_object());
    let v: Value = serde_json::from_slice(&eraser(&["dump-vdg", "-d", &d]).stdout).unwrap();
    let blocks = v["blocks"].as_array().unwrap();
    assert!(!blocks.is_empty());
    assert_eq!(code(&eraser(&["dump-vdg", "-d", &d, "--block", "no_such_block"])), 2);
}

#[test]
fn vcd_and_csv_outputs() {
    let dir = TempDir::new().unwrap();
    let vcd = dir.path().join("w.vcd");
    let csv = dir.path().join("r.csv");
    let (_, rep) = run(
        &dir,
        "mux_ff",
        "out",
        &["--vcd", vcd.to_str().unwrap(), "--csv", csv.to_str().unwrap()],
    );
    let w = fs::read_to_string(&vcd).unwrap();
    assert!(w.contains("$scope module top $end"));
    assert!(w.contains("$enddefinitions"));
    assert!(w.trim_end().ends_with("#80"));
    let rows = fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), 1 + rep["faults"].as_array().unwrap().len());
}

#[test]
fn jobs_do_not_change_report() {
    let dir = TempDir::new().unwrap();
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("timing");
        v
    };
    let (_, a) = run(&dir, "alu4", "j1", &["--jobs", "1"]);
    let (_, b) = run(&dir, "alu4", "j4", &["--jobs", "4"]);
    assert_eq!(strip(a), strip(b));
}
