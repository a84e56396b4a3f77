//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test -p eraser-cli --test acceptance`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use eraser_core::elab::elaborate;
use eraser_core::fault::enumerate_faults;
use eraser_core::frontend::parse_design_named;
use eraser_core::kernel::{simulate, Design, Mode, Options};
use eraser_core::stimulus::parse_stimulus;
use eraser_core::vdg::{brute_force_soundness, Soundness};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::Value;

const DESIGNS: [&str; 6] = ["mux_ff", "alu4", "counter8", "pipe_acc", "fig5", "deep_branch"];
const MODES: [&str; 3] = ["none", "explicit", "full"];

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

struct Scratch(tempfile::TempDir);

impl Scratch {
    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }
}

/// Run the binary; returns the report it wrote.
fn eraser(args: &[&str], report: &Path) -> Result<Value, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_eraser"))
        .args(args)
        .arg("-o")
        .arg(report)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "eraser {} exited with {}: {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    let text = std::fs::read_to_string(report).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn design_args(name: &str) -> (String, String) {
    let dir = corpus(name);
    (
        dir.join("design.v").display().to_string(),
        dir.join("stim.txt").display().to_string(),
    )
}

fn run(s: &Scratch, name: &str, mode: &str, extra: &[&str], tag: &str) -> Result<Value, String> {
    let (d, st) = design_args(name);
    let mut args = vec!["run", "-d", &d, "-s", &st, "--mode", mode];
    args.extend_from_slice(extra);
    eraser(&args, &s.path(&format!("{name}-{mode}-{tag}.json")))
}

/// Detection time per fault, `None` when undetected.
fn detected(rep: &Value) -> Vec<Option<u64>> {
    rep["faults"]
        .as_array()
        .expect("faults array")
        .iter()
        .map(|f| f["time"].as_u64())
        .collect()
}

fn counters(v: &Value) -> [u64; 4] {
    ["activations", "explicit_skips", "implicit_skips", "executions"].map(|k| v[k].as_u64().unwrap_or(u64::MAX))
}

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn(&Scratch) -> Outcome);

fn oracle_equivalence(s: &Scratch) -> Outcome {
    let mut detail = String::new();
    for name in DESIGNS {
        let camp = run(s, name, "full", &[], "oracle-eq")?;
        let (d, st) = design_args(name);
        let fresh = eraser(
            &["oracle", "-d", &d, "-s", &st],
            &s.path(&format!("{name}-oracle.json")),
        )?;
        let golden: Value = serde_json::from_str(
            &std::fs::read_to_string(corpus(name).join("expected.json")).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        for (what, o) in [("oracle", &fresh), ("golden", &golden)] {
            if detected(&camp) != detected(o) {
                return Err(format!("{name}: detected set differs from {what}"));
            }
            if camp["coverage"]["percent"] != o["coverage"]["percent"] {
                return Err(format!("{name}: coverage differs from {what}"));
            }
        }
        write!(detail, "{name} {}% ", camp["coverage"]["percent"]).unwrap();
    }
    Ok(detail.trim_end().to_string())
}

fn mode_equivalence(s: &Scratch) -> Outcome {
    for name in DESIGNS {
        let sets: Vec<Vec<Option<u64>>> = MODES
            .iter()
            .map(|m| run(s, name, m, &[], "modes").map(|r| detected(&r)))
            .collect::<Result<_, _>>()?;
        if sets.iter().any(|x| *x != sets[0]) {
            return Err(format!("{name}: detected sets differ across modes"));
        }
    }
    Ok(format!("{} designs x {} modes", DESIGNS.len(), MODES.len()))
}

fn redundancy_soundness(s: &Scratch) -> Outcome {
    let mut checked = 0;
    for name in DESIGNS {
        for mode in MODES {
            for (tag, extra) in [
                ("verify", &["--verify-redundancy"][..]),
                ("verify-nodrop", &["--verify-redundancy", "--no-drop"][..]),
            ] {
                let r = run(s, name, mode, extra, tag)?;
                let v = r["verify"]["violations"].as_u64().ok_or("missing verify stats")?;
                if v != 0 {
                    return Err(format!("{name} {mode}: {v} violations"));
                }
                checked += r["verify"]["checked"].as_u64().unwrap_or(0);
            }
        }
    }
    Ok(format!("0 violations over {checked} skipped activations"))
}

fn load(name: &str) -> Result<Design, String> {
    let path = corpus(name).join("design.v");
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let unit = parse_design_named(&path.display().to_string(), &text).map_err(|e| e.to_string())?;
    Ok(Design::new(elaborate(&[unit], None).map_err(|e| e.to_string())?))
}

fn vdg_soundness(_: &Scratch) -> Outcome {
    let (mut checked, mut skipped, mut assignments) = (0, 0, 0);
    let start = Instant::now();
    for name in DESIGNS {
        let d = load(name)?;
        for (i, b) in d.graph.blocks.iter().enumerate() {
            match brute_force_soundness(&d.cfgs[i], &d.vdgs[i], &d.graph.signals, 12) {
                Soundness::Holds(n) => {
                    checked += 1;
                    assignments += n;
                }
                Soundness::TooWide(_) => skipped += 1,
                Soundness::Counterexample(c) => return Err(format!("{name} block {}: {c}", b.name)),
            }
        }
    }
    if checked == 0 {
        return Err("no block small enough to enumerate".into());
    }
    if start.elapsed() > Duration::from_secs(300) {
        return Err(format!("took {:?}", start.elapsed()));
    }
    Ok(format!(
        "{checked} blocks, {assignments} assignments, {skipped} blocks over 12 input bits"
    ))
}

fn counter_structure(s: &Scratch) -> Outcome {
    let c: Vec<[u64; 4]> = MODES
        .iter()
        .map(|m| run(s, "deep_branch", m, &[], "counters").map(|r| counters(&r["counters"])))
        .collect::<Result<_, _>>()?;
    let (none, explicit, full) = (c[0], c[1], c[2]);
    let share = full[2] as f64 / full[0] as f64;
    let detail = format!(
        "implicit {:.2}% of {} activations; executions none {} > explicit {} > full {}",
        share * 100.0,
        full[0],
        none[3],
        explicit[3],
        full[3]
    );
    if share >= 0.5 && full[3] < explicit[3] && explicit[3] < none[3] {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn counter_identity(s: &Scratch) -> Outcome {
    let mut runs = 0;
    for name in DESIGNS {
        for mode in MODES {
            for (tag, extra) in [("id", &[][..]), ("id-nodrop", &["--no-drop"][..])] {
                let r = run(s, name, mode, extra, tag)?;
                let mut rows = vec![counters(&r["counters"])];
                rows.extend(r["faults"].as_array().unwrap().iter().map(|f| counters(&f["counters"])));
                if let Some(bad) = rows.iter().find(|c| c[1] + c[2] + c[3] != c[0]) {
                    return Err(format!("{name} {mode}: {bad:?}"));
                }
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} runs, totals and every fault"))
}

fn strip_timing(mut v: Value) -> String {
    v.as_object_mut().unwrap().remove("timing");
    serde_json::to_string(&v).unwrap()
}

fn determinism(s: &Scratch) -> Outcome {
    for name in DESIGNS {
        let a = strip_timing(run(s, name, "full", &["--jobs", "1"], "det-a")?);
        let b = strip_timing(run(s, name, "full", &["--jobs", "1"], "det-b")?);
        let c = strip_timing(run(s, name, "full", &["--jobs", "4"], "det-c")?);
        if a != b {
            return Err(format!("{name}: two runs differ"));
        }
        if a != c {
            return Err(format!("{name}: --jobs 1 and --jobs 4 differ"));
        }
    }
    Ok(format!("{} designs, repeat and --jobs 1 vs 4", DESIGNS.len()))
}

/// Deep-branch stimulus of `cycles` clock cycles with the same structure as
/// the bundled one.
fn long_stimulus(cycles: u64) -> String {
    let mut rng = StdRng::seed_from_u64(1);
    let mut s = String::from("clock clk period 10\n@0\nmode = 2'd2\nsub = 2'd1\n");
    for c in 0..cycles {
        if c > 0 {
            writeln!(s, "@{}", c * 10 + 3).unwrap();
        }
        for lane in ["a", "b", "c", "d"] {
            writeln!(s, "din_{lane} = 16'h{:04x}", rng.random::<u16>()).unwrap();
        }
    }
    writeln!(s, "end {}", cycles * 10 + 10).unwrap();
    s
}

fn performance(_: &Scratch) -> Outcome {
    let cycles = 10_000;
    let d = load("deep_branch")?;
    let stim = parse_stimulus(&long_stimulus(cycles))
        .map_err(|e| e.to_string())?
        .resolve(&d.graph)
        .map_err(|e| e.to_string())?;
    let faults = enumerate_faults(&d.graph);
    let time = |mode: Mode| -> Result<Duration, String> {
        let o = Options {
            mode,
            ..Options::default()
        };
        let t = Instant::now();
        simulate(&d, faults.clone(), &stim, &o, None).map_err(|e| e.to_string())?;
        Ok(t.elapsed())
    };
    // best of three, interleaved
    let (mut none, mut full) = (Duration::MAX, Duration::MAX);
    for _ in 0..3 {
        none = none.min(time(Mode::None)?);
        full = full.min(time(Mode::Full)?);
    }
    let ratio = none.as_secs_f64() / full.as_secs_f64();
    let detail = format!("{cycles} cycles: none {none:.2?}, full {full:.2?}, ratio {ratio:.2}");
    if ratio >= 1.2 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let s = Scratch(tempfile::tempdir().expect("temporary directory"));
    let criteria: [Criterion; 8] = [
        ("oracle-equivalence", oracle_equivalence),
        ("mode-equivalence", mode_equivalence),
        ("redundancy-soundness", redundancy_soundness),
        ("vdg-soundness", vdg_soundness),
        ("counter-structure", counter_structure),
        ("counter-identity", counter_identity),
        ("determinism", determinism),
        ("performance", performance),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let t = Instant::now();
        match check(&s) {
            Ok(d) => println!("PASS {name}: {d} ({:.1?})", t.elapsed()),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d} ({:.1?})", t.elapsed());
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
