//! Campaign and oracle reports: JSON, CSV and structured comparison.

use std::io;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::fault::{Counters, Fault, FaultId, FaultStatus, StuckAt};
use crate::kernel::{Design, Mode, Options, SimResult, VerifyStats};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportKind {
    Campaign,
    Oracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub drop: bool,
    pub observe_on_bad: bool,
    pub verify_redundancy: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub faults: usize,
    pub detected: usize,
    pub undetected: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    /// Detected over total, in percent, rounded to two decimals.
    pub percent: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterTable {
    pub activations: u64,
    pub explicit_skips: u64,
    pub implicit_skips: u64,
    pub executions: u64,
    /// Skips as a share of all faulty activations.
    pub explicit_percent: f64,
    pub implicit_percent: f64,
    pub eliminated_percent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultRecord {
    pub id: FaultId,
    pub name: String,
    pub signal: String,
    /// Declared bit index.
    pub bit: u32,
    pub stuck: StuckAt,
    pub detected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub port: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub good: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bad: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counters: Option<Counters>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_ms: f64,
    pub frontend_ms: f64,
    pub rtl_ms: f64,
    pub behavioral_ms: f64,
    /// Behavioral share of simulation time.
    pub behavioral_percent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub kind: ReportKind,
    pub top: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    pub options: RunOptions,
    pub steps: u64,
    pub totals: Totals,
    pub coverage: Coverage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counters: Option<CounterTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyStats>,
    pub faults: Vec<FaultRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn percent(part: u64, whole: u64) -> f64 {
    if whole == 0 {
        0.0
    } else {
        round2(part as f64 * 100.0 / whole as f64)
    }
}

fn ms(d: Duration) -> f64 {
    (d.as_secs_f64() * 1e6).round() / 1e3
}

pub fn coverage(status: &[FaultStatus]) -> Coverage {
    let detected = status.iter().filter(|s| s.is_detected()).count() as u64;
    Coverage {
        percent: percent(detected, status.len() as u64),
        warning: status.is_empty().then(|| "empty fault list".to_string()),
    }
}

pub fn counter_table(c: &Counters) -> CounterTable {
    CounterTable {
        activations: c.activations,
        explicit_skips: c.explicit_skips,
        implicit_skips: c.implicit_skips,
        executions: c.executions,
        explicit_percent: percent(c.explicit_skips, c.activations),
        implicit_percent: percent(c.implicit_skips, c.activations),
        eliminated_percent: percent(c.explicit_skips + c.implicit_skips, c.activations),
    }
}

fn record(d: &Design, id: usize, f: &Fault, status: FaultStatus) -> FaultRecord {
    let s = d.graph.signal(f.signal);
    FaultRecord {
        id: id as FaultId,
        name: f.name(&d.graph),
        signal: s.name.clone(),
        bit: s.lsb + u32::from(f.bit),
        stuck: f.stuck,
        detected: status.is_detected(),
        time: match status {
            FaultStatus::Detected { time } => Some(time),
            FaultStatus::Undetected => None,
        },
        port: None,
        good: None,
        bad: None,
        counters: None,
    }
}

fn totals(status: &[FaultStatus]) -> Totals {
    let detected = status.iter().filter(|s| s.is_detected()).count();
    Totals {
        faults: status.len(),
        detected,
        undetected: status.len() - detected,
    }
}

/// Simulation phases plus the frontend time measured by the caller.
pub fn timing(r: &SimResult, frontend: Duration, wall: Duration) -> Timing {
    let sim = r.timing.rtl + r.timing.behavioral;
    Timing {
        wall_ms: ms(wall),
        frontend_ms: ms(frontend),
        rtl_ms: ms(r.timing.rtl),
        behavioral_ms: ms(r.timing.behavioral),
        behavioral_percent: if sim.is_zero() {
            0.0
        } else {
            round2(r.timing.behavioral.as_secs_f64() * 100.0 / sim.as_secs_f64())
        },
    }
}

pub fn campaign_report(d: &Design, r: &SimResult, opts: &Options, timing: Option<Timing>) -> Report {
    let mut faults: Vec<FaultRecord> =
        r.db.faults
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let mut rec = record(d, i, f, r.db.status[i]);
                rec.counters = Some(r.db.counters[i]);
                rec
            })
            .collect();
    for det in &r.detections {
        let rec = &mut faults[det.fault as usize];
        if rec.time == Some(det.time) && rec.port.is_none() {
            rec.port = Some(d.graph.signal(det.port).name.clone());
            rec.good = Some(det.good.to_string());
            rec.bad = Some(det.bad.to_string());
        }
    }
    Report {
        kind: ReportKind::Campaign,
        top: d.graph.top.clone(),
        mode: Some(opts.mode),
        options: RunOptions {
            drop: opts.drop,
            observe_on_bad: opts.observe_on_bad,
            verify_redundancy: opts.verify,
        },
        steps: r.steps,
        totals: totals(&r.db.status),
        coverage: coverage(&r.db.status),
        counters: Some(counter_table(&r.db.totals())),
        verify: opts.verify.then_some(r.verify),
        faults,
        timing,
    }
}

pub fn oracle_report(d: &Design, faults: &[Fault], status: &[FaultStatus], steps: u64, observe_on_bad: bool) -> Report {
    Report {
        kind: ReportKind::Oracle,
        top: d.graph.top.clone(),
        mode: None,
        options: RunOptions {
            drop: false,
            observe_on_bad,
            verify_redundancy: false,
        },
        steps,
        totals: totals(status),
        coverage: coverage(status),
        counters: None,
        verify: None,
        faults: faults
            .iter()
            .zip(status)
            .enumerate()
            .map(|(i, (f, s))| record(d, i, f, *s))
            .collect(),
        timing: None,
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    id: FaultId,
    fault: &'a str,
    signal: &'a str,
    bit: u32,
    stuck: StuckAt,
    status: &'a str,
    time: Option<u64>,
    port: Option<&'a str>,
    good: Option<&'a str>,
    bad: Option<&'a str>,
    activations: Option<u64>,
    explicit_skips: Option<u64>,
    implicit_skips: Option<u64>,
    executions: Option<u64>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Report> {
        serde_json::from_str(text)
    }

    /// One row per fault.
    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for f in &self.faults {
            w.serialize(CsvRow {
                id: f.id,
                fault: &f.name,
                signal: &f.signal,
                bit: f.bit,
                stuck: f.stuck,
                status: if f.detected { "detected" } else { "undetected" },
                time: f.time,
                port: f.port.as_deref(),
                good: f.good.as_deref(),
                bad: f.bad.as_deref(),
                activations: f.counters.map(|c| c.activations),
                explicit_skips: f.counters.map(|c| c.explicit_skips),
                implicit_skips: f.counters.map(|c| c.implicit_skips),
                executions: f.counters.map(|c| c.executions),
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatusChange {
    pub id: FaultId,
    pub name: String,
    /// Detection time on each side, absent when undetected.
    pub a: Option<u64>,
    pub b: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CounterChange {
    pub id: FaultId,
    pub name: String,
    pub a: Counters,
    pub b: Counters,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportDiff {
    pub coverage: (f64, f64),
    /// Faults whose detection or detection time differs.
    pub status: Vec<StatusChange>,
    /// Faults whose counters differ; only when both reports carry counters.
    pub counters: Vec<CounterChange>,
}

impl ReportDiff {
    pub fn is_empty(&self) -> bool {
        self.status.is_empty() && self.counters.is_empty()
    }

    pub fn detected_sets_equal(&self) -> bool {
        self.status.iter().all(|c| c.a.is_some() == c.b.is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DiffError {
    #[error("reports cover different designs ('{0}' vs '{1}')")]
    Top(String, String),
    #[error("fault lists differ at position {index} ({a} vs {b})")]
    FaultList { index: usize, a: String, b: String },
    #[error("fault lists differ in length ({0} vs {1})")]
    Length(usize, usize),
}

pub fn diff_reports(a: &Report, b: &Report) -> Result<ReportDiff, DiffError> {
    if a.top != b.top {
        return Err(DiffError::Top(a.top.clone(), b.top.clone()));
    }
    if a.faults.len() != b.faults.len() {
        return Err(DiffError::Length(a.faults.len(), b.faults.len()));
    }
    let mut diff = ReportDiff {
        coverage: (a.coverage.percent, b.coverage.percent),
        status: Vec::new(),
        counters: Vec::new(),
    };
    for (i, (fa, fb)) in a.faults.iter().zip(&b.faults).enumerate() {
        if fa.name != fb.name {
            return Err(DiffError::FaultList {
                index: i,
                a: fa.name.clone(),
                b: fb.name.clone(),
            });
        }
        if fa.time != fb.time || fa.detected != fb.detected {
            diff.status.push(StatusChange {
                id: fa.id,
                name: fa.name.clone(),
                a: fa.time,
                b: fb.time,
            });
        }
        if let (Some(ca), Some(cb)) = (fa.counters, fb.counters) {
            if ca != cb {
                diff.counters.push(CounterChange {
                    id: fa.id,
                    name: fa.name.clone(),
                    a: ca,
                    b: cb,
                });
            }
        }
    }
    Ok(diff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elab::elaborate;
    use crate::fault::enumerate_faults;
    use crate::frontend::parse_design;
    use crate::kernel::simulate;
    use crate::oracle::run_oracle;
    use crate::stimulus::parse_stimulus;
    use proptest::prelude::*;

    fn mux_ff() -> (Design, crate::stimulus::Stimulus) {
        let src = "module top(input clk, input s, input a, input b, output reg q);
                     always @(posedge clk) if (s) q <= a; else q <= b;
                   endmodule";
        let d = Design::new(elaborate(&[parse_design(src).unwrap()], None).unwrap());
        let st = parse_stimulus(
            "clock clk period 10\n@0\ns = 0\na = 0\nb = 0\n@12\nb = 1\n@22\na = 1\n@32\ns = 1\n@42\na = 0\nend 60\n",
        )
        .unwrap()
        .resolve(&d.graph)
        .unwrap();
        (d, st)
    }

    #[test]
    fn coverage_rounding_and_empty_warning() {
        let det = FaultStatus::Detected { time: 0 };
        let un = FaultStatus::Undetected;
        let mut v = vec![det; 9];
        v.push(un);
        assert_eq!(coverage(&v).percent, 90.0);
        assert_eq!(coverage(&[un, un]).percent, 0.0);
        assert_eq!(coverage(&[det, un, un]).percent, 33.33);
        assert_eq!(coverage(&[det, det, un]).percent, 66.67);
        let empty = coverage(&[]);
        assert_eq!(empty.percent, 0.0);
        assert!(empty.warning.is_some());
    }

    #[test]
    fn counter_percentages() {
        let c = Counters {
            activations: 8,
            explicit_skips: 2,
            implicit_skips: 3,
            executions: 3,
        };
        let t = counter_table(&c);
        assert_eq!(
            (t.explicit_percent, t.implicit_percent, t.eliminated_percent),
            (25.0, 37.5, 62.5)
        );
        assert_eq!(counter_table(&Counters::default()).implicit_percent, 0.0);
    }

    #[test]
    fn json_round_trip_and_self_diff() {
        let (d, st) = mux_ff();
        let faults = enumerate_faults(&d.graph);
        let r = simulate(&d, faults, &st, &Options::default(), None).unwrap();
        let rep = campaign_report(&d, &r, &Options::default(), None);
        let back = Report::from_json(&rep.to_json()).unwrap();
        assert_eq!(back, rep);
        assert!(diff_reports(&rep, &back).unwrap().is_empty());
        let detected = rep.faults.iter().filter(|f| f.detected).count();
        assert_eq!(detected, rep.totals.detected);
        assert!(rep
            .faults
            .iter()
            .filter(|f| f.detected)
            .all(|f| f.port.as_deref() == Some("top.q")));
    }

    #[test]
    fn modes_differ_only_in_counters() {
        let (d, st) = mux_ff();
        let faults = enumerate_faults(&d.graph);
        let reps: Vec<Report> = [Mode::None, Mode::Full]
            .into_iter()
            .map(|mode| {
                let o = Options {
                    mode,
                    ..Options::default()
                };
                campaign_report(&d, &simulate(&d, faults.clone(), &st, &o, None).unwrap(), &o, None)
            })
            .collect();
        let diff = diff_reports(&reps[0], &reps[1]).unwrap();
        assert!(diff.status.is_empty());
        assert_eq!(diff.coverage.0, diff.coverage.1);
        assert!(!diff.counters.is_empty());
    }

    #[test]
    fn campaign_against_oracle() {
        let (d, st) = mux_ff();
        let faults = enumerate_faults(&d.graph);
        let r = simulate(&d, faults.clone(), &st, &Options::default(), None).unwrap();
        let camp = campaign_report(&d, &r, &Options::default(), None);
        let status = run_oracle(&d, &faults, &st, false, 1000, 1).unwrap();
        let orc = oracle_report(&d, &faults, &status, r.steps, false);
        let diff = diff_reports(&camp, &orc).unwrap();
        assert!(diff.is_empty(), "{diff:?}");
        assert_eq!(camp.coverage, orc.coverage);
    }

    #[test]
    fn mismatched_fault_lists_are_rejected() {
        let (d, st) = mux_ff();
        let faults = enumerate_faults(&d.graph);
        let r = simulate(&d, faults.clone(), &st, &Options::default(), None).unwrap();
        let a = campaign_report(&d, &r, &Options::default(), None);
        let mut b = a.clone();
        b.faults.pop();
        assert!(matches!(diff_reports(&a, &b), Err(DiffError::Length(10, 9))));
        let mut c = a.clone();
        c.faults.swap(0, 1);
        assert!(matches!(
            diff_reports(&a, &c),
            Err(DiffError::FaultList { index: 0, .. })
        ));
    }

    #[test]
    fn csv_has_one_row_per_fault() {
        let (d, st) = mux_ff();
        let faults = enumerate_faults(&d.graph);
        let r = simulate(&d, faults, &st, &Options::default(), None).unwrap();
        let rep = campaign_report(&d, &r, &Options::default(), None);
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let mut rd = csv::Reader::from_reader(buf.as_slice());
        assert_eq!(rd.headers().unwrap().get(1), Some("fault"));
        let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 10);
        assert_eq!(&rows[0][1], "top.clk[0] sa0");
    }

    proptest! {
        #[test]
        fn coverage_matches_ratio(detected in 0usize..500, extra in 0usize..500) {
            let mut v = vec![FaultStatus::Detected { time: 1 }; detected];
            v.extend(vec![FaultStatus::Undetected; extra]);
            let c = coverage(&v);
            if v.is_empty() {
                prop_assert!(c.warning.is_some());
            } else {
                let exact = detected as f64 * 100.0 / v.len() as f64;
                prop_assert!((c.percent - exact).abs() <= 0.005 + 1e-9);
                prop_assert!(c.warning.is_none());
            }
        }
    }
}
