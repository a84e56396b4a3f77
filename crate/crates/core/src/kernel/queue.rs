//! Time- and region-ordered event queue.

use std::collections::BTreeSet;

use crate::elab::NodeId;
use crate::fault::FaultId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Region {
    /// Combinational evaluation: RTL nodes and combinational blocks.
    Active,
    /// Edge detection and execution of edge-triggered blocks.
    EventNodeEval,
    NbaCommit,
    Observe,
}

/// Good sorts before every fault context.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ctx {
    Good,
    Fault(FaultId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Event {
    pub time: u64,
    pub region: Region,
    /// Topological rank for Active events, node id elsewhere.
    pub order: u32,
    pub node: NodeId,
    pub ctx: Ctx,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("event for t={time} {region:?} scheduled while at t={now} {now_region:?}")]
pub struct PastEvent {
    pub time: u64,
    pub region: Region,
    pub now: u64,
    pub now_region: Region,
}

/// All contexts of one node pending at the same instant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub time: u64,
    pub region: Region,
    pub node: NodeId,
    pub good: bool,
    pub faults: Vec<FaultId>,
}

#[derive(Debug, Default)]
pub struct EventQueue {
    set: BTreeSet<Event>,
    now: (u64, Option<Region>),
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    /// Duplicate events collapse. Only NbaCommit may reopen earlier regions
    /// of its own time step.
    pub fn schedule(&mut self, ev: Event) -> Result<(), PastEvent> {
        if let (now, Some(region)) = self.now {
            let past = (ev.time, ev.region) < (now, region);
            let reopen = region == Region::NbaCommit && ev.time == now;
            if past && !reopen {
                return Err(PastEvent {
                    time: ev.time,
                    region: ev.region,
                    now,
                    now_region: region,
                });
            }
        }
        self.set.insert(ev);
        Ok(())
    }

    pub fn peek(&self) -> Option<&Event> {
        self.set.first()
    }

    /// Pop every context pending for the first (time, region, order, node).
    pub fn pop_batch(&mut self) -> Option<Batch> {
        let first = *self.set.first()?;
        let mut batch = Batch {
            time: first.time,
            region: first.region,
            node: first.node,
            good: false,
            faults: Vec::new(),
        };
        while let Some(ev) = self.set.first() {
            if (ev.time, ev.region, ev.order, ev.node) != (first.time, first.region, first.order, first.node) {
                break;
            }
            match ev.ctx {
                Ctx::Good => batch.good = true,
                Ctx::Fault(f) => batch.faults.push(f),
            }
            self.set.pop_first();
        }
        self.now = (first.time, Some(first.region));
        Some(batch)
    }

    /// Pop every batch of `region` at `time`, leaving the cursor there so
    /// events scheduled meanwhile follow the reopening rule.
    pub fn drain_region(&mut self, time: u64, region: Region) -> Vec<Batch> {
        let mut out = Vec::new();
        while let Some(ev) = self.set.first() {
            if ev.time != time || ev.region != region {
                break;
            }
            out.push(self.pop_batch().unwrap());
        }
        out
    }

    /// Advance the cursor to the start of `time` without popping.
    pub fn enter(&mut self, time: u64) {
        self.now = (time, None);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(time: u64, region: Region, node: u32, ctx: Ctx) -> Event {
        Event {
            time,
            region,
            order: node,
            node: NodeId(node),
            ctx,
        }
    }

    #[test]
    fn good_before_bad_same_node() {
        let mut q = EventQueue::new();
        q.schedule(ev(0, Region::Active, 3, Ctx::Fault(7))).unwrap();
        q.schedule(ev(0, Region::Active, 3, Ctx::Good)).unwrap();
        q.schedule(ev(0, Region::Active, 3, Ctx::Fault(2))).unwrap();
        let b = q.pop_batch().unwrap();
        assert!(b.good);
        assert_eq!(b.faults, vec![2, 7]);
        assert!(q.is_empty());
    }

    #[test]
    fn regions_drain_in_order() {
        let mut q = EventQueue::new();
        q.schedule(ev(0, Region::NbaCommit, 1, Ctx::Good)).unwrap();
        q.schedule(ev(0, Region::EventNodeEval, 1, Ctx::Good)).unwrap();
        q.schedule(ev(0, Region::Active, 9, Ctx::Good)).unwrap();
        let order: Vec<Region> = std::iter::from_fn(|| q.pop_batch().map(|b| b.region)).collect();
        assert_eq!(order, vec![Region::Active, Region::EventNodeEval, Region::NbaCommit]);
    }

    #[test]
    fn past_region_rejected() {
        let mut q = EventQueue::new();
        q.schedule(ev(5, Region::EventNodeEval, 1, Ctx::Good)).unwrap();
        q.pop_batch();
        assert!(q.schedule(ev(5, Region::Active, 2, Ctx::Good)).is_err());
        assert!(q.schedule(ev(4, Region::Observe, 2, Ctx::Good)).is_err());
        assert!(q.schedule(ev(5, Region::NbaCommit, 2, Ctx::Good)).is_ok());
    }

    #[test]
    fn nba_commit_reopens_active() {
        let mut q = EventQueue::new();
        q.schedule(ev(5, Region::NbaCommit, 1, Ctx::Good)).unwrap();
        q.schedule(ev(5, Region::Observe, 1, Ctx::Good)).unwrap();
        q.drain_region(5, Region::NbaCommit);
        q.schedule(ev(5, Region::Active, 2, Ctx::Good)).unwrap();
        assert_eq!(q.pop_batch().unwrap().region, Region::Active);
        assert!(q.schedule(ev(4, Region::Active, 2, Ctx::Good)).is_err());
    }
}
