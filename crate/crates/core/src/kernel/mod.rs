//! Concurrent fault simulation: good values per node, per-fault divergence
//! lists, region-ordered scheduling and gated faulty block execution.

pub mod queue;
mod redundancy;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::cfg::{build_cfg, execute, Cfg, Effects, Trace, Write};
use crate::elab::{BlockId, Driver, NodeId, NodeKind, RtlGraph, SignalId, Trigger};
use crate::fault::{Counters, Fault, FaultDb, FaultId, FaultStatus};
use crate::frontend::ast::Edge;
use crate::logic::{eval_op, LogicVec};
use crate::stimulus::Stimulus;
use crate::vdg::{build_vdg, Vdg};

pub use queue::{Batch, Ctx, Event, EventQueue, PastEvent, Region};
pub use redundancy::{is_explicit_redundant, is_implicit_redundant, FaultView};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Execute every faulty activation.
    None,
    /// Skip activations whose inputs and state match the good context.
    Explicit,
    /// Also skip activations whose differing inputs lie off the good path.
    #[default]
    Full,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::None => "none",
            Mode::Explicit => "explicit",
            Mode::Full => "full",
        })
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Mode::None),
            "explicit" => Ok(Mode::Explicit),
            "full" => Ok(Mode::Full),
            _ => Err(format!("unknown mode '{s}' (none, explicit, full)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Options {
    pub mode: Mode,
    pub drop: bool,
    pub verify: bool,
    pub observe_on_bad: bool,
    /// Upper bound on stimulus time steps.
    pub max_cycles: u64,
    /// Commit rounds allowed within one time step.
    pub delta_limit: u32,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            mode: Mode::Full,
            drop: true,
            verify: false,
            observe_on_bad: false,
            max_cycles: 1_000_000,
            delta_limit: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Schedule(#[from] PastEvent),
    #[error("no stable state after {limit} delta cycles at time {time}")]
    DeltaLimit { time: u64, limit: u32 },
    #[error("stimulus has {steps} time steps, more than the limit of {limit}")]
    MaxCycles { steps: u64, limit: u64 },
}

/// Posedge on 0->1, 0->x, x->1; negedge mirrored. Multi-bit signals use bit 0.
pub fn edge_fires(edge: Edge, prev: &LogicVec, cur: &LogicVec) -> bool {
    let (p, c) = (prev.get_bit(0), cur.get_bit(0));
    match edge {
        Edge::Posedge => matches!((p, c), (Some(false), Some(true) | None) | (None, Some(true))),
        Edge::Negedge => matches!((p, c), (Some(true), Some(false) | None) | (None, Some(false))),
    }
}

/// Immutable per-design tables shared by every kernel instance.
#[derive(Debug)]
pub struct Design {
    pub graph: RtlGraph,
    pub cfgs: Vec<Cfg>,
    pub vdgs: Vec<Vdg>,
    /// Per block: signals assigned with `=`.
    pub blocking_writes: Vec<BTreeSet<SignalId>>,
    /// Per node: nodes to evaluate in the Active region when it changes.
    active_fanout: Vec<Vec<NodeId>>,
    /// Per node: edge-triggered blocks listing it in their sensitivity.
    edge_fanout: Vec<Vec<BlockId>>,
    is_output: Vec<bool>,
    width: Vec<u8>,
}

impl Design {
    pub fn new(graph: RtlGraph) -> Self {
        let cfgs: Vec<Cfg> = graph.blocks.iter().map(|b| build_cfg(b, &graph.signals)).collect();
        let vdgs = cfgs.iter().map(build_vdg).collect();
        let blocking_writes = cfgs
            .iter()
            .map(|c| {
                c.blocks
                    .iter()
                    .flat_map(|bb| bb.assigns.iter())
                    .filter(|a| a.blocking)
                    .flat_map(|a| a.lhs.iter().map(|p| p.signal))
                    .collect()
            })
            .collect();
        let n = graph.nodes.len();
        let mut active_fanout = vec![Vec::new(); n];
        let mut edge_fanout = vec![Vec::new(); n];
        for (i, node) in graph.nodes.iter().enumerate() {
            for &m in &node.fanout {
                match &graph.nodes[m.idx()].kind {
                    NodeKind::Behavioral(b) => {
                        let blk = graph.block(*b);
                        if blk.is_comb() {
                            active_fanout[i].push(m);
                        } else if let NodeKind::Signal(s) = node.kind {
                            if blk.sensitivity.contains(&s) {
                                edge_fanout[i].push(*b);
                            }
                        }
                    }
                    NodeKind::Signal(s) => {
                        if matches!(graph.signal(*s).driver, Driver::Node(_)) {
                            active_fanout[i].push(m);
                        }
                    }
                    _ => active_fanout[i].push(m),
                }
            }
        }
        let mut is_output = vec![false; n];
        for s in &graph.outputs {
            is_output[graph.signal(*s).node.idx()] = true;
        }
        let width = graph
            .nodes
            .iter()
            .map(|node| match &node.kind {
                NodeKind::Const(v) => v.width(),
                NodeKind::Op { width, .. } => *width,
                NodeKind::Signal(s) => graph.signal(*s).width,
                NodeKind::Behavioral(_) => 1,
            })
            .collect();
        Design {
            graph,
            cfgs,
            vdgs,
            blocking_writes,
            active_fanout,
            edge_fanout,
            is_output,
            width,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Detection {
    pub fault: FaultId,
    pub time: u64,
    pub port: SignalId,
    pub good: LogicVec,
    pub bad: LogicVec,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyStats {
    pub checked: u64,
    pub violations: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PhaseTiming {
    pub rtl: Duration,
    pub behavioral: Duration,
}

#[derive(Clone, Debug)]
pub struct SimResult {
    pub db: FaultDb,
    pub detections: Vec<Detection>,
    pub verify: VerifyStats,
    pub timing: PhaseTiming,
    pub steps: u64,
}

/// Block results waiting for their commit.
#[derive(Debug, Default)]
struct Pending {
    good: Option<Effects>,
    executed: Vec<(FaultId, Effects)>,
    /// Sorted; contexts that follow the good writes.
    skipped: Vec<FaultId>,
    /// Sorted; contexts whose edge did not fire while the good one did.
    pinned: Vec<FaultId>,
}

pub type WaveHook<'h> = &'h mut dyn FnMut(u64, &dyn Fn(SignalId) -> LogicVec);

pub struct Kernel<'d> {
    d: &'d Design,
    opts: Options,
    faults: Vec<Fault>,
    good: Vec<LogicVec>,
    bad: Vec<Vec<(FaultId, LogicVec)>>,
    dropped: Vec<bool>,
    status: Vec<FaultStatus>,
    counters: Vec<Counters>,
    queue: EventQueue,
    prev_good: Vec<Vec<LogicVec>>,
    prev_bad: Vec<BTreeMap<FaultId, Vec<LogicVec>>>,
    pending: Vec<Option<Pending>>,
    now: u64,
    detections: Vec<Detection>,
    verify: VerifyStats,
    timing: PhaseTiming,
}

impl FaultView for Kernel<'_> {
    fn value(&self, s: SignalId, f: FaultId) -> LogicVec {
        self.value_at(self.d.graph.signal(s).node, f)
    }

    fn visible(&self, s: SignalId, f: FaultId) -> bool {
        let n = self.d.graph.signal(s).node.idx();
        match self.bad[n].binary_search_by_key(&f, |e| e.0) {
            Ok(i) => self.bad[n][i].1 != self.good[n],
            Err(_) => false,
        }
    }
}

impl<'d> Kernel<'d> {
    pub fn new(d: &'d Design, faults: Vec<Fault>, opts: Options) -> Self {
        let g = &d.graph;
        let n = g.nodes.len();
        let good: Vec<LogicVec> = d.width.iter().map(|w| LogicVec::all_x(*w)).collect();
        let mut bad = vec![Vec::new(); n];
        for (i, f) in faults.iter().enumerate() {
            let node = g.signal(f.signal).node.idx();
            bad[node].push((i as FaultId, f.clamp_value(good[node])));
        }
        let prev_good = g
            .blocks
            .iter()
            .map(|b| match &b.trigger {
                Trigger::Edge(items) => items.iter().map(|(_, s)| LogicVec::all_x(g.signal(*s).width)).collect(),
                Trigger::Comb => Vec::new(),
            })
            .collect();
        let nf = faults.len();
        Kernel {
            d,
            opts,
            faults,
            good,
            bad,
            dropped: vec![false; nf],
            status: vec![FaultStatus::Undetected; nf],
            counters: vec![Counters::default(); nf],
            queue: EventQueue::new(),
            prev_good,
            prev_bad: vec![BTreeMap::new(); g.blocks.len()],
            pending: (0..g.blocks.len()).map(|_| None).collect(),
            now: 0,
            detections: Vec::new(),
            verify: VerifyStats::default(),
            timing: PhaseTiming::default(),
        }
    }

    pub fn good_value(&self, s: SignalId) -> LogicVec {
        self.good[self.d.graph.signal(s).node.idx()]
    }

    /// Fault `f`'s effective value of signal `s`.
    pub fn fault_value(&self, s: SignalId, f: FaultId) -> LogicVec {
        FaultView::value(self, s, f)
    }

    /// Bad-list entries of signal `s`.
    pub fn bad_list(&self, s: SignalId) -> &[(FaultId, LogicVec)] {
        &self.bad[self.d.graph.signal(s).node.idx()]
    }

    fn value_at(&self, node: NodeId, f: FaultId) -> LogicVec {
        let list = &self.bad[node.idx()];
        match list.binary_search_by_key(&f, |e| e.0) {
            Ok(i) => list[i].1,
            Err(_) => self.good[node.idx()],
        }
    }

    /// Invisible entries exist only on fault targets, every target holds
    /// its clamp, lists are sorted and dropped faults are gone.
    pub fn check_hygiene(&self) -> Result<(), String> {
        for (n, list) in self.bad.iter().enumerate() {
            let sig = match self.d.graph.nodes[n].kind {
                NodeKind::Signal(s) => Some(s),
                _ => None,
            };
            if !list.windows(2).all(|w| w[0].0 < w[1].0) {
                return Err(format!("bad list of node {n} is not sorted"));
            }
            for (f, v) in list {
                let fault = &self.faults[*f as usize];
                let target = sig == Some(fault.signal);
                if self.dropped[*f as usize] {
                    return Err(format!("dropped fault {f} still listed on node {n}"));
                }
                if !target && *v == self.good[n] {
                    return Err(format!("invisible entry for fault {f} on node {n}"));
                }
                if target && fault.clamp_value(*v) != *v {
                    return Err(format!("fault {f} violates its clamp"));
                }
            }
        }
        for (i, f) in self.faults.iter().enumerate() {
            if self.dropped[i] {
                continue;
            }
            let n = self.d.graph.signal(f.signal).node.idx();
            if self.bad[n].binary_search_by_key(&(i as FaultId), |e| e.0).is_err() {
                return Err(format!("fault {i} lost its target entry"));
            }
        }
        Ok(())
    }

    pub fn run(mut self, stim: &Stimulus, mut wave: Option<WaveHook>) -> Result<SimResult, SimError> {
        let steps = stim.step_count();
        if steps > self.opts.max_cycles {
            return Err(SimError::MaxCycles {
                steps,
                limit: self.opts.max_cycles,
            });
        }
        self.queue.enter(0);
        let d = self.d;
        let g = &d.graph;
        for &n in &g.comb_order {
            self.schedule(n, Region::Active, Ctx::Good)?;
        }
        for b in &g.blocks {
            if !b.is_comb() {
                self.schedule(b.node, Region::EventNodeEval, Ctx::Good)?;
            }
        }
        let mut rest = stim.steps.as_slice();
        if let Some((0, drives)) = rest.first() {
            self.apply_drives(drives)?;
            rest = &rest[1..];
        }
        self.settle()?;
        if let Some(w) = wave.as_deref_mut() {
            w(0, &|s| self.good_value(s));
        }
        for (t, drives) in rest {
            self.now = *t;
            self.queue.enter(*t);
            self.apply_drives(drives)?;
            self.settle()?;
            if let Some(w) = wave.as_deref_mut() {
                w(*t, &|s| self.good_value(s));
            }
        }
        Ok(SimResult {
            db: FaultDb {
                faults: self.faults,
                status: self.status,
                counters: self.counters,
            },
            detections: self.detections,
            verify: self.verify,
            timing: self.timing,
            steps,
        })
    }

    fn apply_drives(&mut self, drives: &[(SignalId, LogicVec)]) -> Result<(), SimError> {
        let t0 = Instant::now();
        for (s, v) in drives {
            let node = self.d.graph.signal(*s).node;
            let computed: Vec<(FaultId, LogicVec)> = self.bad[node.idx()].iter().map(|(f, _)| (*f, *v)).collect();
            self.store(node, Some(*v), computed)?;
        }
        self.timing.rtl += t0.elapsed();
        Ok(())
    }

    /// Process the current time step until no events remain.
    fn settle(&mut self) -> Result<(), SimError> {
        let t = self.now;
        let mut deltas = 0u32;
        let mut after_commit = false;
        while let Some(ev) = self.queue.peek().copied() {
            debug_assert_eq!(ev.time, t);
            match ev.region {
                Region::Active | Region::EventNodeEval => {
                    if after_commit {
                        after_commit = false;
                        deltas += 1;
                        if deltas > self.opts.delta_limit {
                            return Err(SimError::DeltaLimit {
                                time: t,
                                limit: self.opts.delta_limit,
                            });
                        }
                    }
                    let b = self.queue.pop_batch().unwrap();
                    self.dispatch(b)?;
                }
                Region::NbaCommit => {
                    let t0 = Instant::now();
                    let d = self.d;
                    for b in self.queue.drain_region(t, Region::NbaCommit) {
                        let NodeKind::Behavioral(bid) = d.graph.nodes[b.node.idx()].kind else {
                            unreachable!("commit events name behavioral nodes")
                        };
                        if let Some(p) = self.pending[bid.idx()].take() {
                            let blk = d.graph.block(bid);
                            let sigs: Vec<SignalId> = blk
                                .writes
                                .iter()
                                .copied()
                                .filter(|s| !blk.is_comb() || !d.blocking_writes[bid.idx()].contains(s))
                                .collect();
                            self.commit(&p, &sigs)?;
                        }
                    }
                    after_commit = true;
                    self.timing.rtl += t0.elapsed();
                }
                Region::Observe => {
                    let b = self.queue.pop_batch().unwrap();
                    self.observe(b);
                }
            }
        }
        debug_assert_eq!(self.check_hygiene(), Ok(()));
        Ok(())
    }

    fn dispatch(&mut self, mut b: Batch) -> Result<(), SimError> {
        b.faults.retain(|f| !self.dropped[*f as usize]);
        let node = b.node;
        let d = self.d;
        let g = &d.graph;
        match &g.nodes[node.idx()].kind {
            NodeKind::Behavioral(bid) => {
                let t0 = Instant::now();
                let r = if g.block(*bid).is_comb() {
                    self.comb_block(*bid, b.good, &b.faults)
                } else {
                    self.edge_block(*bid)
                };
                self.timing.behavioral += t0.elapsed();
                r
            }
            NodeKind::Const(v) => {
                let v = *v;
                if b.good {
                    self.store(node, Some(v), Vec::new())?;
                }
                Ok(())
            }
            NodeKind::Op { op, width } => {
                let (op, width) = (*op, *width);
                let t0 = Instant::now();
                let r = self.eval_node(node, b.good, &b.faults, &|args| eval_op(op, width, args));
                self.timing.rtl += t0.elapsed();
                r
            }
            NodeKind::Signal(s) => {
                if !matches!(g.signal(*s).driver, Driver::Node(_)) {
                    return Ok(());
                }
                let w = g.signal(*s).width;
                let t0 = Instant::now();
                let r = self.eval_node(node, b.good, &b.faults, &|args| args[0].resize(w));
                self.timing.rtl += t0.elapsed();
                r
            }
        }
    }

    /// Re-evaluate a combinational node for the good context (when `good`)
    /// plus every fault that could differ from it.
    fn eval_node(
        &mut self,
        node: NodeId,
        good: bool,
        faults: &[FaultId],
        f: &dyn Fn(&[LogicVec]) -> LogicVec,
    ) -> Result<(), SimError> {
        let fanin = &self.d.graph.nodes[node.idx()].fanin;
        let ctxs: Vec<FaultId> = if good {
            let mut c: Vec<FaultId> = faults.to_vec();
            for i in fanin.iter().chain(std::iter::once(&node)) {
                c.extend(self.bad[i.idx()].iter().map(|e| e.0));
            }
            c.sort_unstable();
            c.dedup();
            c
        } else {
            faults.to_vec()
        };
        let mut args = Vec::with_capacity(fanin.len());
        let new_good = if good {
            args.extend(fanin.iter().map(|i| self.good[i.idx()]));
            Some(f(&args))
        } else {
            None
        };
        let mut computed = Vec::with_capacity(ctxs.len());
        for c in ctxs {
            args.clear();
            args.extend(fanin.iter().map(|i| self.value_at(*i, c)));
            computed.push((c, f(&args)));
        }
        self.store(node, new_good, computed)
    }

    /// Install new values on a node and schedule its fanout. `computed`
    /// must be sorted by fault id; entries not listed keep their value.
    fn store(
        &mut self,
        node: NodeId,
        new_good: Option<LogicVec>,
        computed: Vec<(FaultId, LogicVec)>,
    ) -> Result<(), SimError> {
        let n = node.idx();
        let sig = match self.d.graph.nodes[n].kind {
            NodeKind::Signal(s) => Some(s),
            _ => None,
        };
        let g0 = self.good[n];
        let g1 = new_good.unwrap_or(g0);
        self.good[n] = g1;
        let old = std::mem::take(&mut self.bad[n]);
        let mut out = Vec::with_capacity(old.len() + computed.len());
        let mut changed = Vec::new();
        let mut oi = old.into_iter().peekable();
        let keep = |out: &mut Vec<(FaultId, LogicVec)>, f: FaultId, v: LogicVec, faults: &[Fault]| {
            let target = sig == Some(faults[f as usize].signal);
            if target || v != g1 {
                out.push((f, v));
            }
        };
        for (f, mut e1) in computed {
            while let Some(&(of, ov)) = oi.peek() {
                if of >= f {
                    break;
                }
                keep(&mut out, of, ov, &self.faults);
                oi.next();
            }
            let e0 = match oi.peek() {
                Some(&(of, ov)) if of == f => {
                    oi.next();
                    ov
                }
                _ => g0,
            };
            let fault = &self.faults[f as usize];
            if sig == Some(fault.signal) {
                e1 = fault.clamp_value(e1);
            }
            keep(&mut out, f, e1, &self.faults);
            // a context that tracks good on both sides rides the good event
            if e1 != e0 && (e0 != g0 || e1 != g1) {
                changed.push(f);
            }
        }
        for (of, ov) in oi {
            keep(&mut out, of, ov, &self.faults);
        }
        self.bad[n] = out;
        if g1 != g0 {
            self.fanout(node, Ctx::Good)?;
        }
        for f in changed {
            self.fanout(node, Ctx::Fault(f))?;
        }
        Ok(())
    }

    fn schedule(&mut self, node: NodeId, region: Region, ctx: Ctx) -> Result<(), SimError> {
        let order = match region {
            Region::Active => self.d.graph.nodes[node.idx()].rank,
            _ => node.0,
        };
        self.queue.schedule(Event {
            time: self.now,
            region,
            order,
            node,
            ctx,
        })?;
        Ok(())
    }

    fn fanout(&mut self, node: NodeId, ctx: Ctx) -> Result<(), SimError> {
        let d = self.d;
        for &m in &d.active_fanout[node.idx()] {
            self.schedule(m, Region::Active, ctx)?;
        }
        for &b in &d.edge_fanout[node.idx()] {
            self.schedule(d.graph.block(b).node, Region::EventNodeEval, ctx)?;
        }
        if d.is_output[node.idx()] && (ctx == Ctx::Good || self.opts.observe_on_bad) {
            self.schedule(node, Region::Observe, ctx)?;
        }
        Ok(())
    }

    /// Faults with an entry on any of `sigs`, sorted.
    fn faults_on<'a>(&self, sigs: impl Iterator<Item = &'a SignalId>) -> Vec<FaultId> {
        let mut v = Vec::new();
        for s in sigs {
            v.extend(self.bad_list(*s).iter().map(|e| e.0));
        }
        v.sort_unstable();
        v.dedup();
        v
    }

    fn exec_good(&self, b: BlockId) -> (Effects, Trace) {
        let mut trace = Trace::default();
        let fx = execute(
            &self.d.cfgs[b.idx()],
            &self.d.graph.signals,
            &mut |s| self.good_value(s),
            Some(&mut trace),
            None,
        );
        (fx, trace)
    }

    fn exec_fault(&self, b: BlockId, f: FaultId) -> Effects {
        execute(
            &self.d.cfgs[b.idx()],
            &self.d.graph.signals,
            &mut |s| self.fault_value(s, f),
            None,
            Some(self.faults[f as usize].as_clamp()),
        )
    }

    /// Decide one faulty activation that accompanies a good one.
    fn activate(&mut self, b: BlockId, f: FaultId, good: &(Effects, Trace), p: &mut Pending) {
        let d = self.d;
        let blk = d.graph.block(b);
        let fault = self.faults[f as usize];
        let bw = &d.blocking_writes[b.idx()];
        self.counters[f as usize].activations += 1;
        let skip = match self.opts.mode {
            Mode::None => None,
            Mode::Explicit | Mode::Full => {
                if is_explicit_redundant(self, blk, bw, &fault, f) {
                    Some(true)
                } else if self.opts.mode == Mode::Full
                    && is_implicit_redundant(self, blk, bw, &d.vdgs[b.idx()], &good.0, &good.1, &fault, f)
                {
                    Some(false)
                } else {
                    None
                }
            }
        };
        match skip {
            Some(explicit) => {
                let c = &mut self.counters[f as usize];
                if explicit {
                    c.explicit_skips += 1;
                } else {
                    c.implicit_skips += 1;
                }
                if self.opts.verify {
                    self.verify_skip(b, f, &good.0);
                }
                p.skipped.push(f);
            }
            None => {
                self.counters[f as usize].executions += 1;
                let fx = self.exec_fault(b, f);
                p.executed.push((f, fx));
            }
        }
    }

    /// Execute a skipped activation anyway and compare what it would commit.
    fn verify_skip(&mut self, b: BlockId, f: FaultId, good: &Effects) {
        let fx = self.exec_fault(b, f);
        let fault = self.faults[f as usize];
        let d = self.d;
        self.verify.checked += 1;
        for s in &d.graph.block(b).writes {
            let e0 = self.fault_value(*s, f);
            let fin = |w: Option<&Write>| {
                let v = w.map_or(e0, |w| w.apply(e0));
                if fault.signal == *s {
                    fault.clamp_value(v)
                } else {
                    v
                }
            };
            if fin(fx.get(*s)) != fin(good.get(*s)) {
                self.verify.violations += 1;
                log::warn!(
                    "redundancy violation: block '{}' fault '{}' signal '{}' at t={}",
                    d.graph.block(b).name,
                    fault.name(&d.graph),
                    d.graph.signal(*s).name,
                    self.now
                );
                return;
            }
        }
    }

    fn comb_block(&mut self, b: BlockId, good: bool, events: &[FaultId]) -> Result<(), SimError> {
        let d = self.d;
        let blk = d.graph.block(b);
        let mut p = Pending::default();
        if good {
            let ge = self.exec_good(b);
            let mut present = self.faults_on(blk.reads.iter().chain(&blk.writes).chain(&blk.sensitivity));
            present.extend_from_slice(events);
            present.sort_unstable();
            present.dedup();
            for f in present {
                self.activate(b, f, &ge, &mut p);
            }
            p.good = Some(ge.0);
        } else {
            for &f in events {
                let c = &mut self.counters[f as usize];
                c.activations += 1;
                c.executions += 1;
                let fx = self.exec_fault(b, f);
                p.executed.push((f, fx));
            }
        }
        let bw = &d.blocking_writes[b.idx()];
        let now: Vec<SignalId> = blk.writes.iter().copied().filter(|s| bw.contains(s)).collect();
        let later = now.len() < blk.writes.len();
        self.commit(&p, &now)?;
        if later {
            self.pending[b.idx()] = Some(p);
            self.schedule(blk.node, Region::NbaCommit, Ctx::Good)?;
        }
        Ok(())
    }

    fn edge_block(&mut self, b: BlockId) -> Result<(), SimError> {
        let d = self.d;
        let blk = d.graph.block(b);
        let Trigger::Edge(items) = &blk.trigger else {
            unreachable!("edge_block on a combinational block")
        };
        let cur_good: Vec<LogicVec> = items.iter().map(|(_, s)| self.good_value(*s)).collect();
        let fires = |prev: &[LogicVec], cur: &[LogicVec]| {
            items
                .iter()
                .zip(prev.iter().zip(cur))
                .any(|((e, _), (p, c))| edge_fires(*e, p, c))
        };
        let good_fires = fires(&self.prev_good[b.idx()], &cur_good);
        let mut checked = self.faults_on(blk.sensitivity.iter());
        checked.extend(self.prev_bad[b.idx()].keys().copied());
        checked.sort_unstable();
        checked.dedup();
        checked.retain(|f| !self.dropped[*f as usize]);
        let mut fired = Vec::new();
        let mut pinned = Vec::new();
        let mut new_prev = BTreeMap::new();
        for &f in &checked {
            let cur: Vec<LogicVec> = items.iter().map(|(_, s)| self.fault_value(*s, f)).collect();
            let prev = self.prev_bad[b.idx()].get(&f).unwrap_or(&self.prev_good[b.idx()]);
            let f_fires = fires(prev, &cur);
            if f_fires && !good_fires {
                fired.push(f);
            } else if !f_fires && good_fires {
                pinned.push(f);
            }
            if cur != cur_good {
                new_prev.insert(f, cur);
            }
        }
        self.prev_good[b.idx()] = cur_good;
        self.prev_bad[b.idx()] = new_prev;

        let mut p = Pending::default();
        if good_fires {
            let ge = self.exec_good(b);
            let mut present = self.faults_on(blk.reads.iter().chain(&blk.writes).chain(&blk.sensitivity));
            present.extend(checked.iter().copied());
            present.sort_unstable();
            present.dedup();
            for f in present {
                if pinned.binary_search(&f).is_err() {
                    self.activate(b, f, &ge, &mut p);
                }
            }
            p.good = Some(ge.0);
            p.pinned = pinned;
        } else {
            if fired.is_empty() {
                return Ok(());
            }
            for f in fired {
                let c = &mut self.counters[f as usize];
                c.activations += 1;
                c.executions += 1;
                let fx = self.exec_fault(b, f);
                p.executed.push((f, fx));
            }
        }
        self.pending[b.idx()] = Some(p);
        self.schedule(blk.node, Region::NbaCommit, Ctx::Good)
    }

    /// Apply a block's results to `sigs`.
    fn commit(&mut self, p: &Pending, sigs: &[SignalId]) -> Result<(), SimError> {
        for &s in sigs {
            let node = self.d.graph.signal(s).node;
            let gw = p.good.as_ref().and_then(|fx| fx.get(s));
            let g0 = self.good[node.idx()];
            let new_good = p.good.as_ref().map(|_| gw.map_or(g0, |w| w.apply(g0)));
            let mut ctxs: Vec<FaultId> = self.bad[node.idx()].iter().map(|e| e.0).collect();
            ctxs.extend(p.executed.iter().map(|e| e.0));
            ctxs.extend(p.skipped.iter().copied());
            ctxs.extend(p.pinned.iter().copied());
            ctxs.sort_unstable();
            ctxs.dedup();
            let mut computed = Vec::with_capacity(ctxs.len());
            for f in ctxs {
                if self.dropped[f as usize] {
                    continue;
                }
                let e0 = self.value_at(node, f);
                let e1 = if let Ok(i) = p.executed.binary_search_by_key(&f, |e| e.0) {
                    p.executed[i].1.get(s).map_or(e0, |w| w.apply(e0))
                } else if p.pinned.binary_search(&f).is_ok() || p.good.is_none() {
                    e0
                } else {
                    gw.map_or(e0, |w| w.apply(e0))
                };
                computed.push((f, e1));
            }
            self.store(node, new_good, computed)?;
        }
        Ok(())
    }

    fn observe(&mut self, b: Batch) {
        let n = b.node.idx();
        let NodeKind::Signal(port) = self.d.graph.nodes[n].kind else {
            unreachable!("observation points are signals")
        };
        let good = self.good[n];
        let cands: Vec<(FaultId, LogicVec)> = self.bad[n]
            .iter()
            .filter(|(f, _)| b.good || b.faults.binary_search(f).is_ok())
            .copied()
            .collect();
        for (f, v) in cands {
            if self.dropped[f as usize] || self.status[f as usize].is_detected() {
                continue;
            }
            if good.known_diff(&v) != 0 {
                self.status[f as usize] = FaultStatus::Detected { time: self.now };
                self.detections.push(Detection {
                    fault: f,
                    time: self.now,
                    port,
                    good,
                    bad: v,
                });
                if self.opts.drop {
                    self.drop_fault(f);
                }
            }
        }
    }

    fn drop_fault(&mut self, f: FaultId) {
        self.dropped[f as usize] = true;
        for list in &mut self.bad {
            if let Ok(i) = list.binary_search_by_key(&f, |e| e.0) {
                list.remove(i);
            }
        }
        for m in &mut self.prev_bad {
            m.remove(&f);
        }
    }
}

/// Run one campaign over `faults`.
pub fn simulate(
    d: &Design,
    faults: Vec<Fault>,
    stim: &Stimulus,
    opts: &Options,
    wave: Option<WaveHook>,
) -> Result<SimResult, SimError> {
    Kernel::new(d, faults, opts.clone()).run(stim, wave)
}
