//! Stuck-at faults: enumeration, fault-list files and the value clamp.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cfg::Clamp;
use crate::elab::{RtlGraph, SignalId};
use crate::logic::LogicVec;

pub type FaultId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StuckAt {
    Sa0,
    Sa1,
}

impl fmt::Display for StuckAt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StuckAt::Sa0 => "sa0",
            StuckAt::Sa1 => "sa1",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fault {
    pub signal: SignalId,
    pub bit: u8,
    pub stuck: StuckAt,
}

impl Fault {
    pub fn clamp_value(&self, v: LogicVec) -> LogicVec {
        v.force_bit(self.bit, self.stuck == StuckAt::Sa1)
    }

    pub fn as_clamp(&self) -> Clamp {
        Clamp {
            signal: self.signal,
            bit: self.bit,
            value: self.stuck == StuckAt::Sa1,
        }
    }

    /// `top.q[3] sa1`, using the declared bit index.
    pub fn name(&self, g: &RtlGraph) -> String {
        format!("{} {}", g.signal(self.signal).bit_name(self.bit), self.stuck)
    }
}

/// Force the fault's bit; other bits are untouched.
pub fn clamp(value: LogicVec, fault: &Fault) -> LogicVec {
    fault.clamp_value(value)
}

/// Two faults per bit of every signal, in signal declaration order, bit 0
/// first, sa0 before sa1.
pub fn enumerate_faults(g: &RtlGraph) -> Vec<Fault> {
    let mut out = Vec::new();
    for (i, s) in g.signals.iter().enumerate() {
        for bit in 0..s.width {
            for stuck in [StuckAt::Sa0, StuckAt::Sa1] {
                out.push(Fault {
                    signal: SignalId(i as u32),
                    bit,
                    stuck,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct FaultListError {
    pub line: usize,
    pub message: String,
}

/// Parse a fault list: one `<hier-signal>[bit] <sa0|sa1>` per line, `#`
/// starts a comment. The bit index may be omitted for 1-bit signals.
pub fn parse_fault_list(text: &str, g: &RtlGraph) -> Result<Vec<Fault>, FaultListError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| FaultListError { line: ln + 1, message };
        let mut parts = line.split_whitespace();
        let (Some(target), Some(pol), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(err(format!("expected '<signal>[bit] <sa0|sa1>', got '{line}'")));
        };
        let stuck = match pol.to_ascii_lowercase().as_str() {
            "sa0" => StuckAt::Sa0,
            "sa1" => StuckAt::Sa1,
            other => return Err(err(format!("unknown polarity '{other}'"))),
        };
        let (name, index) = match target.find('[') {
            Some(p) => {
                let idx = target[p + 1..]
                    .strip_suffix(']')
                    .and_then(|d| d.parse::<u32>().ok())
                    .ok_or_else(|| err(format!("malformed bit index in '{target}'")))?;
                (&target[..p], Some(idx))
            }
            None => (target, None),
        };
        let sid = g
            .signal_by_name(name)
            .ok_or_else(|| err(format!("unknown signal '{name}'")))?;
        let sig = g.signal(sid);
        let bit = match index {
            Some(i) if i >= sig.lsb && i - sig.lsb < sig.width as u32 => (i - sig.lsb) as u8,
            Some(i) => return Err(err(format!("bit {i} is outside '{name}'"))),
            None if sig.width == 1 => 0,
            None => return Err(err(format!("'{name}' is {} bits wide; give a bit index", sig.width))),
        };
        let f = Fault {
            signal: sid,
            bit,
            stuck,
        };
        if !seen.insert(f) {
            return Err(err(format!("duplicate fault '{}'", f.name(g))));
        }
        out.push(f);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum FaultStatus {
    Undetected,
    Detected { time: u64 },
}

impl FaultStatus {
    pub fn is_detected(&self) -> bool {
        matches!(self, FaultStatus::Detected { .. })
    }

    /// Merge results for the same fault from two runs: detected wins and
    /// the earliest time is kept.
    pub fn union(self, other: FaultStatus) -> FaultStatus {
        match (self, other) {
            (FaultStatus::Detected { time: a }, FaultStatus::Detected { time: b }) => {
                FaultStatus::Detected { time: a.min(b) }
            }
            (d @ FaultStatus::Detected { .. }, _) | (_, d @ FaultStatus::Detected { .. }) => d,
            _ => FaultStatus::Undetected,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub activations: u64,
    pub explicit_skips: u64,
    pub implicit_skips: u64,
    pub executions: u64,
}

impl Counters {
    pub fn add(&mut self, o: &Counters) {
        self.activations += o.activations;
        self.explicit_skips += o.explicit_skips;
        self.implicit_skips += o.implicit_skips;
        self.executions += o.executions;
    }

    pub fn identity_holds(&self) -> bool {
        self.explicit_skips + self.implicit_skips + self.executions == self.activations
    }
}

/// Per-fault results of a simulation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FaultDb {
    pub faults: Vec<Fault>,
    pub status: Vec<FaultStatus>,
    pub counters: Vec<Counters>,
}

impl FaultDb {
    pub fn new(faults: Vec<Fault>) -> Self {
        let n = faults.len();
        FaultDb {
            faults,
            status: vec![FaultStatus::Undetected; n],
            counters: vec![Counters::default(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.faults.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faults.is_empty()
    }

    pub fn detected(&self) -> usize {
        self.status.iter().filter(|s| s.is_detected()).count()
    }

    pub fn totals(&self) -> Counters {
        let mut t = Counters::default();
        for c in &self.counters {
            t.add(c);
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elab::elaborate;
    use crate::frontend::parse_design;
    use proptest::prelude::*;

    fn mux_ff() -> RtlGraph {
        let src = "module top(input clk, input s, input a, input b, output reg q);
                     always @(posedge clk) q <= s ? a : b;
                   endmodule";
        elaborate(&[parse_design(src).unwrap()], None).unwrap()
    }

    #[test]
    fn mux_ff_has_ten_faults() {
        let g = mux_ff();
        let f = enumerate_faults(&g);
        assert_eq!(f.len(), 10);
        assert_eq!(f[0].name(&g), "top.clk[0] sa0");
        assert_eq!(f[9].name(&g), "top.q[0] sa1");
    }

    #[test]
    fn bus_faults() {
        let src = "module t(input [3:0] a, output [3:0] w); assign w = a; endmodule";
        let g = elaborate(&[parse_design(src).unwrap()], None).unwrap();
        let w = g.signal_by_name("t.w").unwrap();
        let n = enumerate_faults(&g).iter().filter(|f| f.signal == w).count();
        assert_eq!(n, 8);
    }

    #[test]
    fn fault_file() {
        let g = mux_ff();
        let f = parse_fault_list("# one fault\ntop.q sa1\n", &g).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].stuck, StuckAt::Sa1);
        let e = parse_fault_list("top.nope[0] sa0", &g).unwrap_err();
        assert!(e.message.contains("unknown signal"), "{e}");
        let e = parse_fault_list("top.q[0] sa1\ntop.q[0] sa1", &g).unwrap_err();
        assert_eq!(e.line, 2);
        assert!(parse_fault_list("top.q[1] sa0", &g).is_err());
    }

    #[test]
    fn clamp_examples() {
        let f = Fault {
            signal: SignalId(0),
            bit: 1,
            stuck: StuckAt::Sa0,
        };
        assert_eq!(
            f.clamp_value(LogicVec::from_u64(4, 0b1011)),
            LogicVec::from_u64(4, 0b1001)
        );
        assert_eq!(
            f.clamp_value(LogicVec::from_u64(4, 0b1001)),
            LogicVec::from_u64(4, 0b1001)
        );
        let x = f.clamp_value(LogicVec::all_x(4));
        assert_eq!(x.get_bit(1), Some(false));
        assert_eq!(x.get_bit(0), None);
    }

    #[test]
    fn status_union() {
        let d = |t| FaultStatus::Detected { time: t };
        assert_eq!(d(5).union(d(3)), d(3));
        assert_eq!(FaultStatus::Undetected.union(d(7)), d(7));
        assert_eq!(
            FaultStatus::Undetected.union(FaultStatus::Undetected),
            FaultStatus::Undetected
        );
    }

    proptest! {
        #[test]
        fn clamp_is_idempotent(w in 1u8..=64, bits in any::<u64>(), x in any::<u64>(),
                               bit in any::<u8>(), one in any::<bool>()) {
            let f = Fault {
                signal: SignalId(0),
                bit: bit % w,
                stuck: if one { StuckAt::Sa1 } else { StuckAt::Sa0 },
            };
            let v = LogicVec::new(w, bits, x);
            let c = f.clamp_value(v);
            prop_assert_eq!(f.clamp_value(c), c);
            prop_assert_eq!(c.get_bit(f.bit), Some(one));
            let others = !(1u64 << f.bit);
            prop_assert_eq!(c.bits() & others, v.bits() & others);
            prop_assert_eq!(c.xmask() & others, v.xmask() & others);
        }
    }
}
