//! Control flow graphs of behavioral blocks and the interpreter that runs
//! them.

use std::collections::BTreeSet;

use crate::elab::{Block, CaseArm, Expr, LPart, Sel, Signal, SignalId, Stmt};
use crate::logic::{width_mask, LogicVec};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub id: u32,
    pub lhs: Vec<LPart>,
    pub rhs: Expr,
    pub blocking: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Cond {
    /// Arms: `[then, else]`.
    If(Expr),
    /// Arms: one per case item, then the default.
    Case { subject: Expr, labels: Vec<Vec<LogicVec>> },
}

impl Cond {
    pub fn arm_count(&self) -> usize {
        match self {
            Cond::If(_) => 2,
            Cond::Case { labels, .. } => labels.len() + 1,
        }
    }

    pub fn reads(&self) -> BTreeSet<SignalId> {
        match self {
            Cond::If(e) => e.signals(),
            Cond::Case { subject, .. } => subject.signals(),
        }
    }

    /// Pick an arm. The flag is set when the choice was forced by X (X
    /// conditions take the else/default arm).
    pub fn select(&self, value: &mut dyn FnMut(SignalId) -> LogicVec) -> (usize, bool) {
        match self {
            Cond::If(e) => match e.eval(value).truth() {
                Some(true) => (0, false),
                Some(false) => (1, false),
                None => (1, true),
            },
            Cond::Case { subject, labels } => {
                let v = subject.eval(value);
                if v.has_x() {
                    return (labels.len(), true);
                }
                let arm = labels.iter().position(|ls| ls.contains(&v)).unwrap_or(labels.len());
                (arm, false)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Terminator {
    Goto(usize),
    Branch { cond: Cond, targets: Vec<usize> },
    Exit,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasicBlock {
    pub assigns: Vec<Assignment>,
    pub term: Terminator,
    /// Upward-exposed reads of `assigns` given the must-defined set on entry.
    pub dep_reads: BTreeSet<SignalId>,
    /// Upward-exposed reads of the branch condition.
    pub cond_reads: BTreeSet<SignalId>,
}

/// Block 0 is the entry. Every edge goes from a lower to a higher index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cfg {
    pub blocks: Vec<BasicBlock>,
}

pub fn build_cfg(block: &Block, signals: &[Signal]) -> Cfg {
    build_cfg_from(&block.body, signals)
}

pub fn build_cfg_from(body: &[Stmt], signals: &[Signal]) -> Cfg {
    let mut b = Builder { blocks: Vec::new() };
    let entry = b.new_block();
    let end = b.stmts(body, entry);
    b.blocks[end].term = Terminator::Exit;
    let mut cfg = Cfg { blocks: b.blocks };
    cfg.compute_reads(signals);
    cfg
}

struct Builder {
    blocks: Vec<BasicBlock>,
}

impl Builder {
    fn new_block(&mut self) -> usize {
        self.blocks.push(BasicBlock {
            assigns: Vec::new(),
            term: Terminator::Exit,
            dep_reads: BTreeSet::new(),
            cond_reads: BTreeSet::new(),
        });
        self.blocks.len() - 1
    }

    fn stmts(&mut self, body: &[Stmt], mut cur: usize) -> usize {
        for s in body {
            match s {
                Stmt::Assign { id, lhs, rhs, blocking } => self.blocks[cur].assigns.push(Assignment {
                    id: *id,
                    lhs: lhs.clone(),
                    rhs: rhs.clone(),
                    blocking: *blocking,
                }),
                Stmt::If { cond, then, els } => {
                    cur = self.branch(cur, Cond::If(cond.clone()), &[then, els]);
                }
                Stmt::Case { subject, arms, default } => {
                    let cond = Cond::Case {
                        subject: subject.clone(),
                        labels: arms.iter().map(|a: &CaseArm| a.labels.clone()).collect(),
                    };
                    let mut bodies: Vec<&Vec<Stmt>> = arms.iter().map(|a| &a.body).collect();
                    bodies.push(default);
                    cur = self.branch(cur, cond, &bodies);
                }
            }
        }
        cur
    }

    fn branch(&mut self, cur: usize, cond: Cond, bodies: &[&Vec<Stmt>]) -> usize {
        let targets: Vec<usize> = bodies.iter().map(|_| self.new_block()).collect();
        self.blocks[cur].term = Terminator::Branch {
            cond,
            targets: targets.clone(),
        };
        let ends: Vec<usize> = bodies.iter().zip(&targets).map(|(b, t)| self.stmts(b, *t)).collect();
        let join = self.new_block();
        for e in ends {
            self.blocks[e].term = Terminator::Goto(join);
        }
        join
    }
}

impl Cfg {
    pub fn successors(&self, b: usize) -> Vec<usize> {
        match &self.blocks[b].term {
            Terminator::Goto(t) => vec![*t],
            Terminator::Branch { targets, .. } => targets.clone(),
            Terminator::Exit => Vec::new(),
        }
    }

    fn compute_reads(&mut self, signals: &[Signal]) {
        let n = self.blocks.len();
        // must-defined on entry; None stands for "every signal" until a
        // predecessor has been seen
        let mut def_in: Vec<Option<BTreeSet<SignalId>>> = vec![None; n];
        def_in[0] = Some(BTreeSet::new());
        for b in 0..n {
            let mut defined = def_in[b].clone().unwrap_or_default();
            let mut exposed = BTreeSet::new();
            for a in &self.blocks[b].assigns {
                assignment_reads(a, signals, &defined, &mut exposed);
                if a.blocking {
                    defined.extend(a.lhs.iter().map(|p| p.signal));
                }
            }
            let cond_reads = match &self.blocks[b].term {
                Terminator::Branch { cond, .. } => cond.reads().into_iter().filter(|s| !defined.contains(s)).collect(),
                _ => BTreeSet::new(),
            };
            self.blocks[b].dep_reads = exposed;
            self.blocks[b].cond_reads = cond_reads;
            for s in self.successors(b) {
                def_in[s] = Some(match def_in[s].take() {
                    None => defined.clone(),
                    Some(d) => d.intersection(&defined).copied().collect(),
                });
            }
        }
    }

    pub fn branch_count(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| matches!(b.term, Terminator::Branch { .. }))
            .count()
    }
}

fn assignment_reads(
    a: &Assignment,
    signals: &[Signal],
    defined: &BTreeSet<SignalId>,
    exposed: &mut BTreeSet<SignalId>,
) {
    let mut add = |id: SignalId| {
        if !defined.contains(&id) {
            exposed.insert(id);
        }
    };
    a.rhs.for_each_signal(&mut add);
    for p in &a.lhs {
        if let Sel::Dynamic { index } = &p.sel {
            index.for_each_signal(&mut add);
        }
        if p.is_partial(signals[p.signal.idx()].width) {
            add(p.signal);
        }
    }
}

/// A stuck-at clamp applied to blocking writes of a faulty execution so
/// later reads in the same activation see the forced bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Clamp {
    pub signal: SignalId,
    pub bit: u8,
    pub value: bool,
}

/// A write to one signal: bits in `mask` take `value`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Write {
    pub signal: SignalId,
    pub mask: u64,
    pub value: LogicVec,
}

impl Write {
    pub fn apply(&self, old: LogicVec) -> LogicVec {
        old.merge(self.mask, &self.value)
    }
}

/// Outcome of one execution of a block.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Effects {
    /// Final local values of blocking-assigned signals, sorted by signal.
    pub blocking: Vec<Write>,
    /// Accumulated nonblocking writes, sorted by signal.
    pub nba: Vec<Write>,
}

impl Effects {
    /// Every write, blocking first. A signal appears in at most one list
    /// (mixing is rejected by lint).
    pub fn all(&self) -> impl Iterator<Item = &Write> {
        self.blocking.iter().chain(self.nba.iter())
    }

    pub fn get(&self, s: SignalId) -> Option<&Write> {
        self.all().find(|w| w.signal == s)
    }

    pub fn written(&self) -> impl Iterator<Item = SignalId> + '_ {
        self.all().map(|w| w.signal)
    }
}

/// One decision taken during execution.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TraceStep {
    pub block: u32,
    pub arm: u16,
    pub x: bool,
    /// Condition operands that held local (blocking-assigned) values.
    pub locals: Vec<(SignalId, LogicVec)>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
    /// CFG blocks visited, in order.
    pub path: Vec<u32>,
}

fn upsert(list: &mut Vec<Write>, s: SignalId, mask: u64, v: LogicVec, base: LogicVec) {
    match list.iter_mut().find(|w| w.signal == s) {
        Some(w) => {
            w.value = w.value.merge(mask, &v);
            w.mask |= mask;
        }
        None => list.push(Write {
            signal: s,
            mask,
            value: base.merge(mask, &v),
        }),
    }
}

/// Execute the block. `read` supplies pre-execution signal values; when
/// `trace` is given every decision is recorded.
pub fn execute(
    cfg: &Cfg,
    signals: &[Signal],
    read: &mut dyn FnMut(SignalId) -> LogicVec,
    mut trace: Option<&mut Trace>,
    clamp: Option<Clamp>,
) -> Effects {
    let mut fx = Effects::default();
    let mut b = 0usize;
    loop {
        let bb = &cfg.blocks[b];
        if let Some(t) = trace.as_deref_mut() {
            t.path.push(b as u32);
        }
        for a in &bb.assigns {
            exec_assign(a, signals, read, &mut fx, clamp);
        }
        match &bb.term {
            Terminator::Exit => break,
            Terminator::Goto(n) => b = *n,
            Terminator::Branch { cond, targets } => {
                let mut value = |s: SignalId| local_or(&fx.blocking, s, read);
                let (arm, x) = cond.select(&mut value);
                if let Some(t) = trace.as_deref_mut() {
                    let locals = cond
                        .reads()
                        .into_iter()
                        .filter_map(|s| fx.blocking.iter().find(|w| w.signal == s).map(|w| (s, w.value)))
                        .collect();
                    t.steps.push(TraceStep {
                        block: b as u32,
                        arm: arm as u16,
                        x,
                        locals,
                    });
                }
                b = targets[arm];
            }
        }
    }
    fx.blocking.sort_by_key(|w| w.signal);
    fx.nba.sort_by_key(|w| w.signal);
    fx
}

fn local_or(locals: &[Write], s: SignalId, read: &mut dyn FnMut(SignalId) -> LogicVec) -> LogicVec {
    match locals.iter().find(|w| w.signal == s) {
        Some(w) => w.value,
        None => read(s),
    }
}

fn exec_assign(
    a: &Assignment,
    signals: &[Signal],
    read: &mut dyn FnMut(SignalId) -> LogicVec,
    fx: &mut Effects,
    clamp: Option<Clamp>,
) {
    let mut value = |s: SignalId| local_or(&fx.blocking, s, read);
    let rhs = a.rhs.eval(&mut value);
    let mut lo: u32 = a.lhs.iter().map(|p| p.width as u32).sum();
    let mut targets = Vec::with_capacity(a.lhs.len());
    for p in &a.lhs {
        lo -= p.width as u32;
        let part = rhs.slice(lo as u8, p.width);
        let sw = signals[p.signal.idx()].width;
        let (shift, ok) = match &p.sel {
            Sel::Full => (0u32, true),
            Sel::Static { lo } => (*lo as u32, true),
            Sel::Dynamic { index } => match index.eval(&mut value).to_u64() {
                Some(i) if i < sw as u64 => (i as u32, true),
                _ => (0, false),
            },
        };
        if ok {
            let mask = width_mask(p.width) << shift;
            let aligned = LogicVec::new(sw, part.bits() << shift, part.xmask() << shift);
            targets.push((p.signal, sw, mask, aligned));
        }
    }
    for (s, sw, mask, v) in targets {
        if a.blocking {
            let base = local_or(&fx.blocking, s, read);
            upsert(&mut fx.blocking, s, mask, v, base);
            if let Some(c) = clamp.filter(|c| c.signal == s) {
                let w = fx.blocking.iter_mut().find(|w| w.signal == s).unwrap();
                w.value = w.value.force_bit(c.bit, c.value);
            }
        } else {
            let base = LogicVec::all_x(sw);
            upsert(&mut fx.nba, s, mask, v, base);
        }
    }
}
