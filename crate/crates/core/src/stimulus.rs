//! Stimulus files: timed input assignments plus clock sugar.
//!
//! ```text
//! clock clk period 10
//! @0
//! rst = 1
//! a = 4'b1010
//! @20
//! rst = 0
//! end 200
//! ```

use std::collections::BTreeMap;

use crate::elab::{RtlGraph, SignalId};
use crate::frontend::ast::Direction;
use crate::logic::LogicVec;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct StimulusError {
    /// 0 when the error is not tied to a line.
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> StimulusError {
    StimulusError {
        line,
        message: message.into(),
    }
}

/// A literal as written; width is `None` for unsized forms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Literal {
    pub width: Option<u8>,
    pub bits: u64,
    pub xmask: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Drive {
    pub line: usize,
    pub time: u64,
    pub port: String,
    pub value: Literal,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clock {
    pub line: usize,
    pub port: String,
    pub period: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StimulusFile {
    pub drives: Vec<Drive>,
    pub clocks: Vec<Clock>,
    pub end: Option<u64>,
}

/// Input values to apply, grouped by time.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Stimulus {
    pub steps: Vec<(u64, Vec<(SignalId, LogicVec)>)>,
    pub end: u64,
}

impl Stimulus {
    /// Simulated time steps; time 0 is always one.
    pub fn step_count(&self) -> u64 {
        self.steps.len() as u64 + u64::from(self.steps.first().is_none_or(|s| s.0 != 0))
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Parse `4'b10x1`, `8'hff`, `'d12`, `0x1f`, `0b101`, `42` or `x`.
pub fn parse_literal(text: &str) -> Option<Literal> {
    let t: String = text.chars().filter(|c| *c != '_').collect();
    let t = t.to_ascii_lowercase();
    if t == "x" {
        return Some(Literal {
            width: None,
            bits: 0,
            xmask: u64::MAX,
        });
    }
    let (width, radix, digits) = if let Some(p) = t.find('\'') {
        let width = if p == 0 {
            None
        } else {
            let w: u32 = t[..p].parse().ok()?;
            if w == 0 || w > 64 {
                return None;
            }
            Some(w as u8)
        };
        let rest = &t[p + 1..];
        let mut chars = rest.chars();
        let radix = match chars.next()? {
            'b' => 2,
            'o' => 8,
            'd' => 10,
            'h' => 16,
            _ => return None,
        };
        (width, radix, chars.as_str().to_string())
    } else if let Some(h) = t.strip_prefix("0x") {
        (None, 16, h.to_string())
    } else if let Some(b) = t.strip_prefix("0b") {
        (None, 2, b.to_string())
    } else {
        (None, 10, t.clone())
    };
    if digits.is_empty() {
        return None;
    }
    let bits_per = match radix {
        2 => 1,
        8 => 3,
        16 => 4,
        _ => 0,
    };
    let (mut bits, mut xmask) = (0u64, 0u64);
    if radix == 10 {
        bits = digits.parse().ok()?;
    } else {
        let digit_mask = (1u64 << bits_per) - 1;
        for c in digits.chars() {
            if (bits | xmask) >> (64 - bits_per) != 0 {
                return None;
            }
            bits <<= bits_per;
            xmask <<= bits_per;
            if c == 'x' {
                xmask |= digit_mask;
            } else {
                bits |= c.to_digit(radix)? as u64;
            }
        }
    }
    let lit = Literal { width, bits, xmask };
    if let Some(w) = width {
        let m = crate::logic::width_mask(w);
        if (bits | xmask) & !m != 0 {
            return None;
        }
    }
    Some(lit)
}

impl Literal {
    /// Fit to `width` bits; `None` when known bits would be lost. An unsized
    /// `x` fills the whole width.
    pub fn to_logic(&self, width: u8) -> Option<LogicVec> {
        let m = crate::logic::width_mask(width);
        if self.width.is_none() && self.xmask == u64::MAX {
            return Some(LogicVec::all_x(width));
        }
        if self.bits & !m != 0 || self.xmask & !m != 0 {
            return None;
        }
        Some(LogicVec::new(width, self.bits, self.xmask))
    }
}

pub fn parse_stimulus(text: &str) -> Result<StimulusFile, StimulusError> {
    let mut out = StimulusFile::default();
    let mut time: Option<u64> = None;
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(t) = line.strip_prefix('@') {
            let t: u64 = t.trim().parse().map_err(|_| err(ln, format!("bad time '{t}'")))?;
            if let Some(prev) = time {
                if t < prev {
                    return Err(err(ln, format!("time {t} goes backwards from {prev}")));
                }
            }
            time = Some(t);
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["clock", port, "period", n] => {
                let period: u64 = n.parse().map_err(|_| err(ln, format!("bad clock period '{n}'")))?;
                if period < 2 || !period.is_multiple_of(2) {
                    return Err(err(ln, "clock period must be an even number >= 2"));
                }
                out.clocks.push(Clock {
                    line: ln,
                    port: port.to_string(),
                    period,
                });
            }
            ["end", n] => {
                let t: u64 = n.parse().map_err(|_| err(ln, format!("bad end time '{n}'")))?;
                if out.end.is_some() {
                    return Err(err(ln, "duplicate 'end'"));
                }
                out.end = Some(t);
            }
            _ => {
                let Some((lhs, rhs)) = line.split_once('=') else {
                    return Err(err(ln, format!("expected '<port> = <value>', got '{line}'")));
                };
                let port = lhs.trim();
                if port.is_empty() || port.contains(char::is_whitespace) {
                    return Err(err(ln, format!("bad port name '{port}'")));
                }
                let value =
                    parse_literal(rhs.trim()).ok_or_else(|| err(ln, format!("bad literal '{}'", rhs.trim())))?;
                let time = time.ok_or_else(|| err(ln, "assignment before the first '@<time>'"))?;
                out.drives.push(Drive {
                    line: ln,
                    time,
                    port: port.to_string(),
                    value,
                });
            }
        }
    }
    Ok(out)
}

/// Resolve a port name: the bare name or the hierarchical `top.name`.
fn input_port(g: &RtlGraph, name: &str, line: usize) -> Result<SignalId, StimulusError> {
    let full = if name.contains('.') {
        name.to_string()
    } else {
        format!("{}.{name}", g.top)
    };
    let id = g
        .signal_by_name(&full)
        .ok_or_else(|| err(line, format!("unknown port '{name}'")))?;
    if g.signal(id).port != Some(Direction::Input) {
        return Err(err(line, format!("'{name}' is not an input port")));
    }
    Ok(id)
}

impl StimulusFile {
    pub fn end_time(&self) -> u64 {
        self.end
            .unwrap_or_else(|| self.drives.iter().map(|d| d.time).max().unwrap_or(0))
    }

    /// Bind port names and expand clocks up to the end time.
    pub fn resolve(&self, g: &RtlGraph) -> Result<Stimulus, StimulusError> {
        let end = self.end_time();
        let mut steps: BTreeMap<u64, BTreeMap<SignalId, LogicVec>> = BTreeMap::new();
        let mut clocked = BTreeMap::new();
        for c in &self.clocks {
            let id = input_port(g, &c.port, c.line)?;
            if clocked.insert(id, c.line).is_some() {
                return Err(err(c.line, format!("clock '{}' declared twice", c.port)));
            }
            let w = g.signal(id).width;
            let half = c.period / 2;
            let mut t = 0;
            let mut level = false;
            while t <= end {
                steps
                    .entry(t)
                    .or_default()
                    .insert(id, LogicVec::from_u64(w, level as u64));
                level = !level;
                t += half;
            }
        }
        for d in &self.drives {
            if d.time > end {
                return Err(err(d.line, format!("assignment at {} is after end {end}", d.time)));
            }
            let id = input_port(g, &d.port, d.line)?;
            if let Some(cl) = clocked.get(&id) {
                return Err(err(d.line, format!("'{}' is driven by the clock on line {cl}", d.port)));
            }
            let w = g.signal(id).width;
            let v = d
                .value
                .to_logic(w)
                .ok_or_else(|| err(d.line, format!("value does not fit the {w}-bit port '{}'", d.port)))?;
            if steps.entry(d.time).or_default().insert(id, v).is_some() {
                return Err(err(d.line, format!("'{}' assigned twice at time {}", d.port, d.time)));
            }
        }
        Ok(Stimulus {
            steps: steps.into_iter().map(|(t, m)| (t, m.into_iter().collect())).collect(),
            end,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elab::elaborate;
    use crate::frontend::parse_design;

    fn graph() -> RtlGraph {
        let src = "module top(input clk, input [3:0] a, output [3:0] y);
                     assign y = a;
                   endmodule";
        elaborate(&[parse_design(src).unwrap()], None).unwrap()
    }

    #[test]
    fn literals() {
        let l = parse_literal("4'b1010").unwrap();
        assert_eq!((l.width, l.bits, l.xmask), (Some(4), 10, 0));
        assert_eq!(parse_literal("8'hff").unwrap().bits, 255);
        assert_eq!(parse_literal("0x1F").unwrap().bits, 31);
        assert_eq!(parse_literal("0b101").unwrap().bits, 5);
        assert_eq!(parse_literal("42").unwrap().bits, 42);
        assert_eq!(parse_literal("'d7").unwrap().bits, 7);
        let x = parse_literal("4'b1x0x").unwrap();
        assert_eq!((x.bits, x.xmask), (0b1000, 0b0101));
        assert!(parse_literal("2'b111").is_none());
        assert!(parse_literal("4'q1").is_none());
        assert!(parse_literal("").is_none());
        assert_eq!(parse_literal("x").unwrap().to_logic(3), Some(LogicVec::all_x(3)));
        assert_eq!(parse_literal("16").unwrap().to_logic(4), None);
    }

    #[test]
    fn clock_expansion() {
        let f = parse_stimulus("clock clk period 10\n@0\na = 3\n@12\na = 4'b0111\nend 20\n").unwrap();
        let s = f.resolve(&graph()).unwrap();
        let times: Vec<u64> = s.steps.iter().map(|(t, _)| *t).collect();
        assert_eq!(times, vec![0, 5, 10, 12, 15, 20]);
        assert_eq!(s.steps[0].1.len(), 2);
        let clk = |i: usize| s.steps[i].1[0].1.to_u64();
        assert_eq!((clk(0), clk(1), clk(2)), (Some(0), Some(1), Some(0)));
    }

    #[test]
    fn errors() {
        let g = graph();
        let e = parse_stimulus("@0\nb = 1\n").unwrap().resolve(&g).unwrap_err();
        assert!(e.message.contains("unknown port"), "{e}");
        let e = parse_stimulus("@0\ny = 1\n").unwrap().resolve(&g).unwrap_err();
        assert!(e.message.contains("not an input"), "{e}");
        let e = parse_stimulus("@0\na = 5'd16\n").unwrap().resolve(&g).unwrap_err();
        assert!(e.message.contains("does not fit"), "{e}");
        assert_eq!(parse_stimulus("a = 1\n").unwrap_err().line, 1);
        assert!(parse_stimulus("@5\n@3\n").is_err());
        let e = parse_stimulus("clock clk period 4\n@2\nclk = 1\n")
            .unwrap()
            .resolve(&g)
            .unwrap_err();
        assert_eq!(e.line, 3);
    }

    #[test]
    fn hierarchical_port_names() {
        let s = parse_stimulus("@0\ntop.a = 1\n").unwrap().resolve(&graph()).unwrap();
        assert_eq!(s.steps.len(), 1);
    }
}
