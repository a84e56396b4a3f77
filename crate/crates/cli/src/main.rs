use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use eraser_core::elab::elaborate;
use eraser_core::fault::{enumerate_faults, parse_fault_list, Fault};
use eraser_core::frontend::{lint_units, parse_design_named, SourceUnit};
use eraser_core::kernel::{simulate, Design, Mode, Options};
use eraser_core::oracle::run_oracle;
use eraser_core::report::{self, diff_reports, Report};
use eraser_core::run_campaign;
use eraser_core::stimulus::{parse_stimulus, Stimulus};
use eraser_core::wave::WaveWriter;

#[derive(Parser)]
#[command(name = "eraser", version, about = "Concurrent RTL stuck-at fault simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a fault campaign with the concurrent kernel.
    Run(RunArgs),
    /// Serial per-fault resimulation, for cross-checking `run`.
    Oracle(OracleArgs),
    /// Compare two reports; exits 1 when they differ.
    Diff(DiffArgs),
    /// Write the elaborated RTL graph as JSON.
    DumpGraph(DumpArgs),
    /// Write the visibility dependency graph of each always block as JSON.
    DumpVdg(DumpVdgArgs),
    /// Check designs against the supported subset.
    Lint(DesignArgs),
}

#[derive(Args)]
struct DesignArgs {
    /// Design source files.
    #[arg(short = 'd', long = "design", required = true, num_args = 1..)]
    design: Vec<PathBuf>,
    /// Top module; inferred when exactly one module is never instantiated.
    #[arg(long)]
    top: Option<String>,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    design: DesignArgs,
    /// Stimulus file.
    #[arg(short = 's', long = "stimulus")]
    stimulus: PathBuf,
    /// Fault list file; every bit of every signal when absent.
    #[arg(long)]
    faults: Option<PathBuf>,
    /// Kernel instances over disjoint fault partitions.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
    /// Upper bound on stimulus time steps.
    #[arg(long, default_value_t = 1_000_000)]
    max_cycles: u64,
    /// Commit rounds allowed within one time step.
    #[arg(long, default_value_t = 1000)]
    delta_limit: u32,
    /// Also observe output changes caused only by a fault.
    #[arg(long)]
    observe_on_bad: bool,
    /// JSON report path; stdout when absent.
    #[arg(short = 'o', long = "report")]
    report: Option<PathBuf>,
    /// CSV report path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, default_value_t = Mode::Full)]
    mode: Mode,
    /// Re-execute every skipped activation and count mismatches.
    #[arg(long)]
    verify_redundancy: bool,
    /// Keep simulating faults after their first detection.
    #[arg(long)]
    no_drop: bool,
    /// Good-network waveform in VCD format.
    #[arg(long)]
    vcd: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    sim: SimArgs,
    /// Refuse fault lists longer than this.
    #[arg(long, default_value_t = 20_000)]
    limit: usize,
}

#[derive(Args)]
struct DiffArgs {
    a: PathBuf,
    b: PathBuf,
    /// Only detected-fault membership decides the exit code.
    #[arg(long)]
    detected_only: bool,
}

#[derive(Args)]
struct DumpArgs {
    #[command(flatten)]
    design: DesignArgs,
    /// Output path; stdout when absent.
    #[arg(short = 'o', long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DumpVdgArgs {
    #[command(flatten)]
    dump: DumpArgs,
    /// Only the block with this name.
    #[arg(long)]
    block: Option<String>,
}

/// Diagnostics were already printed; only the exit code remains.
#[derive(Debug)]
struct Reported;

impl std::fmt::Display for Reported {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("errors reported above")
    }
}

impl std::error::Error for Reported {}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn parse_units(paths: &[PathBuf]) -> Result<Vec<SourceUnit>> {
    let mut units = Vec::new();
    let mut failed = false;
    for p in paths {
        let text = read(p)?;
        let name = p.display().to_string();
        match parse_design_named(&name, &text) {
            Ok(u) => units.push(u),
            Err(e) => {
                let lines = eraser_core::frontend::LineMap::new(&text);
                eprintln!("{}", e.to_diagnostic().render(&name, &lines));
                failed = true;
            }
        }
    }
    if failed {
        return Err(Reported.into());
    }
    Ok(units)
}

fn load_design(args: &DesignArgs) -> Result<Design> {
    let units = parse_units(&args.design)?;
    let graph = match elaborate(&units, args.top.as_deref()) {
        Ok(g) => g,
        Err(e) => {
            for line in e.render(&units) {
                eprintln!("{line}");
            }
            return Err(Reported.into());
        }
    };
    for (u, w) in &graph.warnings {
        eprintln!("warning: {}", w.render(&units[*u].file, &units[*u].lines));
    }
    Ok(Design::new(graph))
}

fn load_stimulus(path: &Path, d: &Design, max_cycles: u64) -> Result<Stimulus> {
    let text = read(path)?;
    let at = |line: usize| match line {
        0 => path.display().to_string(),
        l => format!("{}:{l}", path.display()),
    };
    let file = parse_stimulus(&text).map_err(|e| anyhow!("{}: stimulus: {}", at(e.line), e.message))?;
    let stim = file
        .resolve(&d.graph)
        .map_err(|e| anyhow!("{}: stimulus: {}", at(e.line), e.message))?;
    if stim.step_count() > max_cycles {
        bail!(
            "stimulus has {} time steps, more than --max-cycles {max_cycles}",
            stim.step_count()
        );
    }
    Ok(stim)
}

fn load_faults(path: Option<&Path>, d: &Design) -> Result<Vec<Fault>> {
    match path {
        None => Ok(enumerate_faults(&d.graph)),
        Some(p) => parse_fault_list(&read(p)?, &d.graph)
            .map_err(|e| anyhow!("{}:{}: fault-list: {}", p.display(), e.line, e.message)),
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn write_reports(rep: &Report, sim: &SimArgs) -> Result<()> {
    write_out(sim.report.as_deref(), &rep.to_json())?;
    if let Some(p) = &sim.csv {
        let f = fs::File::create(p).with_context(|| format!("cannot write {}", p.display()))?;
        rep.write_csv(BufWriter::new(f))?;
    }
    Ok(())
}

fn summary(rep: &Report) {
    eprintln!(
        "coverage {:.2}% ({}/{} detected)",
        rep.coverage.percent, rep.totals.detected, rep.totals.faults
    );
    if let Some(w) = &rep.coverage.warning {
        eprintln!("warning: {w}");
    }
    if let Some(c) = &rep.counters {
        eprintln!(
            "activations {} explicit {} ({:.2}%) implicit {} ({:.2}%) executed {}",
            c.activations, c.explicit_skips, c.explicit_percent, c.implicit_skips, c.implicit_percent, c.executions
        );
    }
}

fn cmd_run(a: &RunArgs) -> Result<ExitCode> {
    let start = Instant::now();
    let d = load_design(&a.sim.design)?;
    let frontend = start.elapsed();
    let stim = load_stimulus(&a.sim.stimulus, &d, a.sim.max_cycles)?;
    let faults = load_faults(a.sim.faults.as_deref(), &d)?;
    let opts = Options {
        mode: a.mode,
        drop: !a.no_drop,
        verify: a.verify_redundancy,
        observe_on_bad: a.sim.observe_on_bad,
        max_cycles: a.sim.max_cycles,
        delta_limit: a.sim.delta_limit,
    };
    log::info!(
        "{} faults, {} time steps, {} jobs",
        faults.len(),
        stim.step_count(),
        a.sim.jobs
    );
    let r = run_campaign(&d, &faults, &stim, &opts, a.sim.jobs as usize)?;
    if let Some(p) = &a.vcd {
        let f = fs::File::create(p).with_context(|| format!("cannot write {}", p.display()))?;
        let mut w = WaveWriter::new(BufWriter::new(f), &d.graph)?;
        let mut err = None;
        let mut hook = |t: u64, v: &dyn Fn(_) -> _| {
            if let Err(e) = w.sample(t, v) {
                err.get_or_insert(e);
            }
        };
        simulate(&d, Vec::new(), &stim, &opts, Some(&mut hook))?;
        if let Some(e) = err {
            return Err(e.into());
        }
        w.finish(stim.end)?;
    }
    let timing = report::timing(&r, frontend, start.elapsed());
    let rep = report::campaign_report(&d, &r, &opts, Some(timing));
    write_reports(&rep, &a.sim)?;
    summary(&rep);
    if r.verify.violations > 0 {
        eprintln!(
            "error: {} of {} skipped activations changed results",
            r.verify.violations, r.verify.checked
        );
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(a: &OracleArgs) -> Result<ExitCode> {
    let d = load_design(&a.sim.design)?;
    let stim = load_stimulus(&a.sim.stimulus, &d, a.sim.max_cycles)?;
    let faults = load_faults(a.sim.faults.as_deref(), &d)?;
    if faults.len() > a.limit {
        bail!(
            "{} faults exceed the oracle limit of {} (see --limit)",
            faults.len(),
            a.limit
        );
    }
    let status = run_oracle(
        &d,
        &faults,
        &stim,
        a.sim.observe_on_bad,
        a.sim.delta_limit,
        a.sim.jobs as usize,
    )?;
    let rep = report::oracle_report(&d, &faults, &status, stim.step_count(), a.sim.observe_on_bad);
    write_reports(&rep, &a.sim)?;
    summary(&rep);
    Ok(ExitCode::SUCCESS)
}

fn load_report(p: &Path) -> Result<Report> {
    Report::from_json(&read(p)?).with_context(|| format!("{} is not a report", p.display()))
}

fn cmd_diff(a: &DiffArgs) -> Result<ExitCode> {
    let diff = diff_reports(&load_report(&a.a)?, &load_report(&a.b)?)?;
    let mut text = serde_json::to_string_pretty(&diff)?;
    text.push('\n');
    io::stdout().write_all(text.as_bytes())?;
    let same = if a.detected_only {
        diff.detected_sets_equal()
    } else {
        diff.is_empty()
    };
    Ok(if same { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_dump_graph(a: &DumpArgs) -> Result<ExitCode> {
    let d = load_design(&a.design)?;
    let mut text = serde_json::to_string_pretty(&d.graph.to_json())?;
    text.push('\n');
    write_out(a.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_dump_vdg(a: &DumpVdgArgs) -> Result<ExitCode> {
    let d = load_design(&a.dump.design)?;
    let g = &d.graph;
    let blocks: Vec<_> = g
        .blocks
        .iter()
        .enumerate()
        .filter(|(_, b)| a.block.as_ref().is_none_or(|n| *n == b.name))
        .map(|(i, b)| d.vdgs[i].to_json(g, &b.name, &d.cfgs[i]))
        .collect();
    if let (Some(n), true) = (&a.block, blocks.is_empty()) {
        bail!("no always block named '{n}'");
    }
    let mut text = serde_json::to_string_pretty(&json!({ "top": g.top, "blocks": blocks }))?;
    text.push('\n');
    write_out(a.dump.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_lint(a: &DesignArgs) -> Result<ExitCode> {
    let units = parse_units(&a.design)?;
    let diags = lint_units(&units);
    for (u, d) in &diags {
        eprintln!("{}", d.render(&units[*u].file, &units[*u].lines));
    }
    Ok(if diags.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Oracle(a) => cmd_oracle(a),
        Cmd::Diff(a) => cmd_diff(a),
        Cmd::DumpGraph(a) => cmd_dump_graph(a),
        Cmd::DumpVdg(a) => cmd_dump_vdg(a),
        Cmd::Lint(a) => cmd_lint(a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            if e.downcast_ref::<Reported>().is_none() {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(2)
        }
    }
}
