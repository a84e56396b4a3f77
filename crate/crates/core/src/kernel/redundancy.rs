//! Deciding whether a faulty activation can reuse the good one's results.

use std::collections::BTreeSet;

use crate::cfg::{Effects, Trace};
use crate::elab::{Block, SignalId};
use crate::fault::{Fault, FaultId};
use crate::logic::LogicVec;
use crate::vdg::{Vdg, VdgNode};

/// Read access to a fault context's signal values.
pub trait FaultView {
    /// Effective value: the bad entry if one exists, otherwise good.
    fn value(&self, s: SignalId, f: FaultId) -> LogicVec;
    /// The fault's value differs from the good one.
    fn visible(&self, s: SignalId, f: FaultId) -> bool;
}

/// The clamp also forces local blocking writes, so a block that assigns the
/// target with `=` and reads it can diverge with every input equal.
fn clamp_reaches_reads(blk: &Block, blocking_writes: &BTreeSet<SignalId>, fault: &Fault) -> bool {
    blk.reads.contains(&fault.signal) && blocking_writes.contains(&fault.signal)
}

/// No read of the block and no signal it writes differs for `f`.
pub fn is_explicit_redundant(
    view: &dyn FaultView,
    blk: &Block,
    blocking_writes: &BTreeSet<SignalId>,
    fault: &Fault,
    f: FaultId,
) -> bool {
    !clamp_reaches_reads(blk, blocking_writes, fault)
        && !blk.reads.iter().any(|s| view.visible(*s, f))
        && !blk.writes.iter().any(|s| view.visible(*s, f))
}

/// Walk the VDG along the good path: every decision must pick the good arm
/// under the fault's values and every dependency read must match good.
#[allow(clippy::too_many_arguments)]
pub fn is_implicit_redundant(
    view: &dyn FaultView,
    blk: &Block,
    blocking_writes: &BTreeSet<SignalId>,
    vdg: &Vdg,
    good: &Effects,
    trace: &Trace,
    fault: &Fault,
    f: FaultId,
) -> bool {
    if clamp_reaches_reads(blk, blocking_writes, fault) {
        return false;
    }
    if good.written().any(|s| view.visible(s, f)) {
        return false;
    }
    let mut at = vdg.entry;
    let mut step = 0;
    while let Some(i) = at {
        match &vdg.nodes[i] {
            VdgNode::Dependency { reads, next, .. } => {
                if reads.iter().any(|s| view.visible(*s, f)) {
                    return false;
                }
                at = *next;
            }
            VdgNode::Decision { cond, arms, .. } => {
                let taken = &trace.steps[step];
                step += 1;
                if taken.x {
                    return false;
                }
                // Locals on the path so far saw only matching reads, so
                // they equal the good run's.
                let mut value = |s: SignalId| match taken.locals.iter().find(|l| l.0 == s) {
                    Some(l) => l.1,
                    None => view.value(s, f),
                };
                let (arm, x) = cond.select(&mut value);
                if x || arm != taken.arm as usize {
                    return false;
                }
                at = arms[arm];
            }
        }
    }
    true
}
