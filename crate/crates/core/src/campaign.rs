//! Fault-partitioned campaigns: independent kernels over disjoint fault
//! ranges, merged after all of them finish.

use std::time::Duration;

use crate::fault::{Fault, FaultDb, FaultId};
use crate::kernel::{simulate, Design, Options, PhaseTiming, SimError, SimResult, VerifyStats};
use crate::stimulus::Stimulus;

/// Contiguous fault ranges, at most `jobs` of them, never empty unless
/// there are no faults.
pub fn partition(n: usize, jobs: usize) -> Vec<std::ops::Range<usize>> {
    let jobs = jobs.clamp(1, n.max(1));
    let (base, extra) = (n / jobs, n % jobs);
    let mut out = Vec::with_capacity(jobs);
    let mut start = 0;
    for j in 0..jobs {
        let len = base + usize::from(j < extra);
        out.push(start..start + len);
        start += len;
    }
    out
}

/// Simulate `faults` with `jobs` kernel instances. Fault ids in the result
/// are positions in `faults`. Phase timings are averaged over workers.
pub fn run_campaign(
    d: &Design,
    faults: &[Fault],
    stim: &Stimulus,
    opts: &Options,
    jobs: usize,
) -> Result<SimResult, SimError> {
    let parts = partition(faults.len(), jobs);
    let results: Vec<Result<SimResult, SimError>> = if parts.len() == 1 {
        vec![simulate(d, faults.to_vec(), stim, opts, None)]
    } else {
        std::thread::scope(|sc| {
            let handles: Vec<_> = parts
                .iter()
                .map(|r| {
                    let part = faults[r.clone()].to_vec();
                    sc.spawn(move || simulate(d, part, stim, opts, None))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("kernel worker panicked"))
                .collect()
        })
    };
    let workers = results.len() as u32;
    let mut merged = SimResult {
        db: FaultDb::new(Vec::new()),
        detections: Vec::new(),
        verify: VerifyStats::default(),
        timing: PhaseTiming::default(),
        steps: 0,
    };
    let mut rtl = Duration::ZERO;
    let mut behavioral = Duration::ZERO;
    for (range, r) in parts.iter().zip(results) {
        let r = r?;
        let base = range.start as FaultId;
        merged.db.faults.extend(r.db.faults);
        merged.db.status.extend(r.db.status);
        merged.db.counters.extend(r.db.counters);
        merged.detections.extend(r.detections.into_iter().map(|mut det| {
            det.fault += base;
            det
        }));
        merged.verify.checked += r.verify.checked;
        merged.verify.violations += r.verify.violations;
        rtl += r.timing.rtl;
        behavioral += r.timing.behavioral;
        merged.steps = r.steps;
    }
    merged.detections.sort_by_key(|det| (det.time, det.fault));
    merged.timing = PhaseTiming {
        rtl: rtl / workers.max(1),
        behavioral: behavioral / workers.max(1),
    };
    Ok(merged)
}
