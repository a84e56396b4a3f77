//! Serial reference simulation: one machine per fault, every combinational
//! node swept in topological order each delta, no divergence lists.

use crate::cfg::{execute, Effects};
use crate::elab::{BlockId, Driver, NodeKind, SignalId, Trigger};
use crate::fault::{Fault, FaultStatus};
use crate::kernel::{edge_fires, Design, SimError};
use crate::logic::{eval_op, LogicVec};
use crate::stimulus::Stimulus;

pub struct SerialSim<'d> {
    d: &'d Design,
    fault: Option<Fault>,
    val: Vec<LogicVec>,
    prev: Vec<Vec<LogicVec>>,
    out_changed: Vec<bool>,
    /// Output position per node.
    out_index: Vec<Option<usize>>,
    delta_limit: u32,
}

impl<'d> SerialSim<'d> {
    pub fn new(d: &'d Design, fault: Option<Fault>, delta_limit: u32) -> Self {
        let g = &d.graph;
        let val = g
            .nodes
            .iter()
            .map(|n| {
                let w = match &n.kind {
                    NodeKind::Const(v) => v.width(),
                    NodeKind::Op { width, .. } => *width,
                    NodeKind::Signal(s) => g.signal(*s).width,
                    NodeKind::Behavioral(_) => 1,
                };
                LogicVec::all_x(w)
            })
            .collect();
        let prev = g
            .blocks
            .iter()
            .map(|b| match &b.trigger {
                Trigger::Edge(items) => items.iter().map(|(_, s)| LogicVec::all_x(g.signal(*s).width)).collect(),
                Trigger::Comb => Vec::new(),
            })
            .collect();
        let mut out_index = vec![None; g.nodes.len()];
        for (i, s) in g.outputs.iter().enumerate() {
            out_index[g.signal(*s).node.idx()] = Some(i);
        }
        let mut sim = SerialSim {
            d,
            fault,
            val,
            prev,
            out_changed: vec![false; g.outputs.len()],
            out_index,
            delta_limit,
        };
        if let Some(f) = fault {
            let n = g.signal(f.signal).node.idx();
            sim.val[n] = f.clamp_value(sim.val[n]);
        }
        sim
    }

    pub fn value(&self, s: SignalId) -> LogicVec {
        self.val[self.d.graph.signal(s).node.idx()]
    }

    fn write(&mut self, s: SignalId, v: LogicVec) -> bool {
        let v = match self.fault {
            Some(f) if f.signal == s => f.clamp_value(v),
            _ => v,
        };
        let n = self.d.graph.signal(s).node.idx();
        self.put(n, v)
    }

    fn put(&mut self, n: usize, v: LogicVec) -> bool {
        if self.val[n] == v {
            return false;
        }
        self.val[n] = v;
        if let Some(i) = self.out_index[n] {
            self.out_changed[i] = true;
        }
        true
    }

    fn exec(&self, b: BlockId) -> Effects {
        execute(
            &self.d.cfgs[b.idx()],
            &self.d.graph.signals,
            &mut |s| self.value(s),
            None,
            self.fault.map(|f| f.as_clamp()),
        )
    }

    /// Apply one time step; returns which outputs changed during it.
    pub fn step(&mut self, time: u64, drives: &[(SignalId, LogicVec)]) -> Result<Vec<bool>, SimError> {
        let d = self.d;
        let g = &d.graph;
        self.out_changed.iter_mut().for_each(|c| *c = false);
        for (s, v) in drives {
            self.write(*s, *v);
        }
        let mut deltas = 0;
        loop {
            let mut pending: Vec<(BlockId, Effects)> = Vec::new();
            for &n in &g.comb_order {
                match &g.nodes[n.idx()].kind {
                    NodeKind::Const(v) => {
                        self.put(n.idx(), *v);
                    }
                    NodeKind::Op { op, width } => {
                        let args: Vec<LogicVec> = g.nodes[n.idx()].fanin.iter().map(|i| self.val[i.idx()]).collect();
                        self.put(n.idx(), eval_op(*op, *width, &args));
                    }
                    NodeKind::Signal(s) => {
                        if let Driver::Node(src) = g.signal(*s).driver {
                            let v = self.val[src.idx()].resize(g.signal(*s).width);
                            self.write(*s, v);
                        }
                    }
                    NodeKind::Behavioral(b) => {
                        let fx = self.exec(*b);
                        for w in &fx.blocking {
                            let old = self.value(w.signal);
                            self.write(w.signal, w.apply(old));
                        }
                        if !fx.nba.is_empty() {
                            pending.push((*b, fx));
                        }
                    }
                }
            }
            for (i, blk) in g.blocks.iter().enumerate() {
                let Trigger::Edge(items) = &blk.trigger else {
                    continue;
                };
                let cur: Vec<LogicVec> = items.iter().map(|(_, s)| self.value(*s)).collect();
                let fires = items
                    .iter()
                    .zip(self.prev[i].iter().zip(&cur))
                    .any(|((e, _), (p, c))| edge_fires(*e, p, c));
                self.prev[i] = cur;
                if fires {
                    pending.push((BlockId(i as u32), self.exec(BlockId(i as u32))));
                }
            }
            let mut changed = false;
            for (b, fx) in pending {
                let comb = g.block(b).is_comb();
                for w in fx.nba.iter().chain(fx.blocking.iter().filter(|_| !comb)) {
                    let old = self.value(w.signal);
                    changed |= self.write(w.signal, w.apply(old));
                }
            }
            if !changed {
                break;
            }
            deltas += 1;
            if deltas > self.delta_limit {
                return Err(SimError::DeltaLimit {
                    time,
                    limit: self.delta_limit,
                });
            }
        }
        Ok(self.out_changed.clone())
    }
}

/// Output values and change flags of the fault-free machine, per step.
pub struct GoodTrace {
    pub steps: Vec<(u64, Vec<bool>, Vec<LogicVec>)>,
}

/// The stimulus as a list of steps, with time 0 always present.
fn steps_of(stim: &Stimulus) -> Vec<(u64, &[(SignalId, LogicVec)])> {
    let mut v: Vec<(u64, &[(SignalId, LogicVec)])> = stim.steps.iter().map(|(t, d)| (*t, d.as_slice())).collect();
    if v.first().is_none_or(|s| s.0 != 0) {
        v.insert(0, (0, &[]));
    }
    v
}

pub fn good_trace(d: &Design, stim: &Stimulus, delta_limit: u32) -> Result<GoodTrace, SimError> {
    let mut sim = SerialSim::new(d, None, delta_limit);
    let mut steps = Vec::new();
    for (t, drives) in steps_of(stim) {
        let ch = sim.step(t, drives)?;
        let vals = d.graph.outputs.iter().map(|s| sim.value(*s)).collect();
        steps.push((t, ch, vals));
    }
    Ok(GoodTrace { steps })
}

/// Simulate one fault from scratch and report its first detection.
pub fn oracle_fault(
    d: &Design,
    fault: Fault,
    stim: &Stimulus,
    good: &GoodTrace,
    observe_on_bad: bool,
    delta_limit: u32,
) -> Result<FaultStatus, SimError> {
    let mut sim = SerialSim::new(d, Some(fault), delta_limit);
    for ((t, drives), (_, good_ch, good_vals)) in steps_of(stim).into_iter().zip(&good.steps) {
        let ch = sim.step(t, drives)?;
        for (i, s) in d.graph.outputs.iter().enumerate() {
            let observed = good_ch[i] || (observe_on_bad && ch[i]);
            if observed && good_vals[i].known_diff(&sim.value(*s)) != 0 {
                return Ok(FaultStatus::Detected { time: t });
            }
        }
    }
    Ok(FaultStatus::Undetected)
}

/// Serial simulation of every fault, split over `jobs` threads.
pub fn run_oracle(
    d: &Design,
    faults: &[Fault],
    stim: &Stimulus,
    observe_on_bad: bool,
    delta_limit: u32,
    jobs: usize,
) -> Result<Vec<FaultStatus>, SimError> {
    let good = good_trace(d, stim, delta_limit)?;
    let jobs = jobs.max(1);
    let chunk = faults.len().div_ceil(jobs).max(1);
    let parts: Vec<Result<Vec<FaultStatus>, SimError>> = std::thread::scope(|sc| {
        let handles: Vec<_> = faults
            .chunks(chunk)
            .map(|part| {
                let good = &good;
                sc.spawn(move || {
                    part.iter()
                        .map(|f| oracle_fault(d, *f, stim, good, observe_on_bad, delta_limit))
                        .collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("oracle worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(faults.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}
