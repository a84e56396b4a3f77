//! Value-change dump of the good network.

use std::io;

use vcd::{IdCode, TimescaleUnit, Value};

use crate::elab::{RtlGraph, SignalId};
use crate::logic::LogicVec;

pub struct WaveWriter<W: io::Write> {
    w: vcd::Writer<W>,
    ids: Vec<IdCode>,
    last: Vec<Option<LogicVec>>,
}

fn to_values(v: &LogicVec) -> Vec<Value> {
    (0..v.width())
        .rev()
        .map(|i| match v.get_bit(i) {
            Some(true) => Value::V1,
            Some(false) => Value::V0,
            None => Value::X,
        })
        .collect()
}

impl<W: io::Write> WaveWriter<W> {
    /// Write the header with one scope per hierarchy level.
    pub fn new(out: W, g: &RtlGraph) -> io::Result<Self> {
        let mut w = vcd::Writer::new(out);
        w.timescale(1, TimescaleUnit::NS)?;
        let mut order: Vec<(Vec<&str>, usize)> = g
            .signals
            .iter()
            .enumerate()
            .map(|(i, s)| (s.name.split('.').collect(), i))
            .collect();
        order.sort();
        let mut ids = vec![IdCode::FIRST; g.signals.len()];
        let mut stack: Vec<&str> = Vec::new();
        for (path, i) in &order {
            let (leaf, scopes) = path.split_last().expect("signal names are non-empty");
            let common = stack.iter().zip(scopes).take_while(|(a, b)| a == b).count();
            while stack.len() > common {
                w.upscope()?;
                stack.pop();
            }
            for s in &scopes[common..] {
                w.add_module(s)?;
                stack.push(s);
            }
            let sig = &g.signals[*i];
            let ty = if sig.is_reg {
                vcd::VarType::Reg
            } else {
                vcd::VarType::Wire
            };
            ids[*i] = w.add_var(ty, u32::from(sig.width), leaf, None)?;
        }
        for _ in stack {
            w.upscope()?;
        }
        w.enddefinitions()?;
        Ok(WaveWriter {
            w,
            last: vec![None; ids.len()],
            ids,
        })
    }

    /// Record every signal that changed since the previous sample.
    pub fn sample(&mut self, time: u64, value: &dyn Fn(SignalId) -> LogicVec) -> io::Result<()> {
        let mut stamped = false;
        for i in 0..self.ids.len() {
            let v = value(SignalId(i as u32));
            if self.last[i] == Some(v) {
                continue;
            }
            if !stamped {
                self.w.timestamp(time)?;
                stamped = true;
            }
            if v.width() == 1 {
                self.w.change_scalar(self.ids[i], to_values(&v)[0])?;
            } else {
                self.w.change_vector(self.ids[i], to_values(&v))?;
            }
            self.last[i] = Some(v);
        }
        Ok(())
    }

    pub fn finish(mut self, end: u64) -> io::Result<()> {
        self.w.timestamp(end)?;
        self.w.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elab::elaborate;
    use crate::frontend::parse_design;

    #[test]
    fn nested_scopes_and_changes() {
        let src = "module leaf(input i, output o); assign o = ~i; endmodule
                   module top(input [1:0] a, output y);
                     leaf u(.i(a[0]), .o(y));
                   endmodule";
        let g = elaborate(&[parse_design(src).unwrap()], Some("top")).unwrap();
        let mut buf = Vec::new();
        let mut w = WaveWriter::new(&mut buf, &g).unwrap();
        let a = g.signal_by_name("top.a").unwrap();
        w.sample(0, &|s| {
            if s == a {
                LogicVec::from_u64(2, 1)
            } else {
                LogicVec::all_x(g.signal(s).width)
            }
        })
        .unwrap();
        w.sample(5, &|s| {
            if s == a {
                LogicVec::from_u64(2, 1)
            } else {
                LogicVec::all_x(g.signal(s).width)
            }
        })
        .unwrap();
        w.finish(10).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("$scope module top $end"));
        assert!(text.contains("$scope module u $end"));
        assert!(text.contains("b01 "));
        // nothing changed at t=5
        assert!(!text.contains("#5"));
        assert!(text.trim_end().ends_with("#10"));
    }
}
