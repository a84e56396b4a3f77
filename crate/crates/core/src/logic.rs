//! Three-valued (0/1/X) bit vectors of up to 64 bits and the operator
//! semantics shared by RTL nodes and the behavioral interpreter.

use std::fmt;

use serde::{Deserialize, Serialize};

pub const MAX_WIDTH: u8 = 64;

/// A logic vector. Bit `i` is X when `xmask` bit `i` is set; in that case
/// the corresponding `bits` bit is always 0.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LogicVec {
    width: u8,
    bits: u64,
    xmask: u64,
}

#[inline]
pub fn width_mask(width: u8) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

impl LogicVec {
    pub fn new(width: u8, bits: u64, xmask: u64) -> Self {
        assert!((1..=MAX_WIDTH).contains(&width), "width {width} out of range");
        let m = width_mask(width);
        let xmask = xmask & m;
        LogicVec {
            width,
            bits: bits & m & !xmask,
            xmask,
        }
    }

    pub fn from_u64(width: u8, bits: u64) -> Self {
        Self::new(width, bits, 0)
    }

    pub fn all_x(width: u8) -> Self {
        Self::new(width, 0, u64::MAX)
    }

    pub fn zero(width: u8) -> Self {
        Self::new(width, 0, 0)
    }

    pub fn bit(b: bool) -> Self {
        Self::from_u64(1, b as u64)
    }

    pub fn width(&self) -> u8 {
        self.width
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn xmask(&self) -> u64 {
        self.xmask
    }

    pub fn mask(&self) -> u64 {
        width_mask(self.width)
    }

    pub fn has_x(&self) -> bool {
        self.xmask != 0
    }

    pub fn is_known(&self) -> bool {
        self.xmask == 0
    }

    /// Known value, if no bit is X.
    pub fn to_u64(&self) -> Option<u64> {
        self.is_known().then_some(self.bits)
    }

    /// Value of bit `i`: `Some(bool)` or `None` for X.
    pub fn get_bit(&self, i: u8) -> Option<bool> {
        if i >= self.width || (self.xmask >> i) & 1 == 1 {
            None
        } else {
            Some((self.bits >> i) & 1 == 1)
        }
    }

    /// Truthiness as used by `if` and `?:`: `Some(true)` if any known bit
    /// is 1, `Some(false)` if all bits are known 0, else `None`.
    pub fn truth(&self) -> Option<bool> {
        if self.bits != 0 {
            Some(true)
        } else if self.xmask == 0 {
            Some(false)
        } else {
            None
        }
    }

    /// Zero-extend or truncate.
    pub fn resize(&self, width: u8) -> Self {
        Self::new(width, self.bits, self.xmask)
    }

    pub fn slice(&self, lo: u8, width: u8) -> Self {
        if lo >= 64 {
            return Self::zero(width);
        }
        Self::new(width, self.bits >> lo, self.xmask >> lo)
    }

    /// Replace the bits selected by `mask` with those of `value`
    /// (both aligned to bit 0 of `self`).
    pub fn merge(&self, mask: u64, value: &LogicVec) -> Self {
        let mask = mask & self.mask();
        Self::new(
            self.width,
            (self.bits & !mask) | (value.bits & mask),
            (self.xmask & !mask) | (value.xmask & mask),
        )
    }

    /// Force bit `bit` to `value`.
    pub fn force_bit(&self, bit: u8, value: bool) -> Self {
        let m = 1u64 << bit;
        Self::new(
            self.width,
            if value { self.bits | m } else { self.bits & !m },
            self.xmask & !m,
        )
    }

    /// Bits where both sides are known and differ.
    pub fn known_diff(&self, other: &LogicVec) -> u64 {
        let known = !(self.xmask | other.xmask) & self.mask();
        (self.bits ^ other.bits) & known
    }

    /// Parse a Verilog-ish literal without size prefix semantics:
    /// plain binary digits (`0101`), or hex with `h`/`0x` handled by callers.
    pub fn from_digits(width: u8, radix: u32, digits: &str) -> Option<Self> {
        let digits: String = digits.chars().filter(|c| *c != '_').collect();
        if digits.is_empty() {
            return None;
        }
        let v = u128::from_str_radix(&digits, radix).ok()?;
        if v > width_mask(width) as u128 {
            return None;
        }
        Some(Self::from_u64(width, v as u64))
    }
}

impl fmt::Debug for LogicVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}'b{}", self.width, self)
    }
}

/// Binary digits, MSB first, `x` for unknown bits.
impl fmt::Display for LogicVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in (0..self.width).rev() {
            let c = match self.get_bit(i) {
                None => 'x',
                Some(true) => '1',
                Some(false) => '0',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Operators of the RTL graph and the elaborated expression tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Not,
    Neg,
    And,
    Or,
    Xor,
    Xnor,
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Shl,
    Shr,
    LogNot,
    LogAnd,
    LogOr,
    RedAnd,
    RedOr,
    RedXor,
    /// `cond ? then : else`
    Mux,
    /// Arguments MSB first.
    Concat,
    /// Static part-select starting at `lo`; result width is the op width.
    Slice {
        lo: u8,
    },
    /// Dynamic single-bit select: `base[index]`.
    Index,
    /// Zero-extend or truncate to the op width.
    Resize,
}

impl OpKind {
    /// Number of operands, `None` for variadic (concat).
    pub fn arity(&self) -> Option<usize> {
        use OpKind::*;
        match self {
            Not | Neg | LogNot | RedAnd | RedOr | RedXor | Slice { .. } | Resize => Some(1),
            Mux => Some(3),
            Concat => None,
            _ => Some(2),
        }
    }

    pub fn symbol(&self) -> &'static str {
        use OpKind::*;
        match self {
            Not => "~",
            Neg => "-",
            And => "&",
            Or => "|",
            Xor => "^",
            Xnor => "~^",
            Add => "+",
            Sub => "-",
            Mul => "*",
            Eq => "==",
            Ne => "!=",
            Lt => "<",
            Le => "<=",
            Gt => ">",
            Ge => ">=",
            Shl => "<<",
            Shr => ">>",
            LogNot => "!",
            LogAnd => "&&",
            LogOr => "||",
            RedAnd => "&",
            RedOr => "|",
            RedXor => "^",
            Mux => "?:",
            Concat => "{}",
            Slice { .. } => "[:]",
            Index => "[]",
            Resize => "resize",
        }
    }
}

fn x_bit() -> LogicVec {
    LogicVec::all_x(1)
}

fn compare(a: &LogicVec, b: &LogicVec, f: impl Fn(u64, u64) -> bool) -> LogicVec {
    if a.has_x() || b.has_x() {
        x_bit()
    } else {
        LogicVec::bit(f(a.bits, b.bits))
    }
}

/// Evaluate `op` producing a `width`-bit result. Operands are expected to
/// be already sized by elaboration for context-determined operators;
/// mismatched widths are tolerated by zero-extension.
pub fn eval_op(op: OpKind, width: u8, args: &[LogicVec]) -> LogicVec {
    use OpKind::*;
    let arith = |f: &dyn Fn(u64, u64) -> u64| {
        let (a, b) = (&args[0], &args[1]);
        if a.has_x() || b.has_x() {
            LogicVec::all_x(width)
        } else {
            LogicVec::from_u64(width, f(a.bits, b.bits))
        }
    };
    match op {
        Not => {
            let a = args[0].resize(width);
            LogicVec::new(width, !a.bits, a.xmask)
        }
        Neg => {
            let a = &args[0];
            if a.has_x() {
                LogicVec::all_x(width)
            } else {
                LogicVec::from_u64(width, a.bits.wrapping_neg())
            }
        }
        And => {
            let (a, b) = (args[0].resize(width), args[1].resize(width));
            // a known 0 on either side dominates X
            let zero_a = !a.bits & !a.xmask;
            let zero_b = !b.bits & !b.xmask;
            let x = (a.xmask | b.xmask) & !(zero_a | zero_b);
            LogicVec::new(width, a.bits & b.bits, x)
        }
        Or => {
            let (a, b) = (args[0].resize(width), args[1].resize(width));
            let one = a.bits | b.bits;
            let x = (a.xmask | b.xmask) & !one;
            LogicVec::new(width, one, x)
        }
        Xor | Xnor => {
            let (a, b) = (args[0].resize(width), args[1].resize(width));
            let x = a.xmask | b.xmask;
            let v = a.bits ^ b.bits;
            LogicVec::new(width, if op == Xnor { !v } else { v }, x)
        }
        Add => arith(&|a, b| a.wrapping_add(b)),
        Sub => arith(&|a, b| a.wrapping_sub(b)),
        Mul => arith(&|a, b| a.wrapping_mul(b)),
        Eq | Ne => {
            let (a, b) = (&args[0], &args[1]);
            let w = a.width.max(b.width);
            let (a, b) = (a.resize(w), b.resize(w));
            let eq = if a.known_diff(&b) != 0 {
                Some(false)
            } else if a.has_x() || b.has_x() {
                None
            } else {
                Some(true)
            };
            match eq {
                None => x_bit(),
                Some(e) => LogicVec::bit(if op == Eq { e } else { !e }),
            }
        }
        Lt => compare(&args[0], &args[1], |a, b| a < b),
        Le => compare(&args[0], &args[1], |a, b| a <= b),
        Gt => compare(&args[0], &args[1], |a, b| a > b),
        Ge => compare(&args[0], &args[1], |a, b| a >= b),
        Shl | Shr => {
            let (a, n) = (args[0].resize(width), &args[1]);
            match n.to_u64() {
                None => LogicVec::all_x(width),
                Some(n) if n >= 64 => LogicVec::zero(width),
                Some(n) => {
                    if op == Shl {
                        LogicVec::new(width, a.bits << n, a.xmask << n)
                    } else {
                        LogicVec::new(width, a.bits >> n, a.xmask >> n)
                    }
                }
            }
        }
        LogNot => match args[0].truth() {
            None => x_bit(),
            Some(t) => LogicVec::bit(!t),
        },
        LogAnd => match (args[0].truth(), args[1].truth()) {
            (Some(false), _) | (_, Some(false)) => LogicVec::bit(false),
            (Some(true), Some(true)) => LogicVec::bit(true),
            _ => x_bit(),
        },
        LogOr => match (args[0].truth(), args[1].truth()) {
            (Some(true), _) | (_, Some(true)) => LogicVec::bit(true),
            (Some(false), Some(false)) => LogicVec::bit(false),
            _ => x_bit(),
        },
        RedAnd => {
            let a = &args[0];
            let zeros = !a.bits & !a.xmask & a.mask();
            if zeros != 0 {
                LogicVec::bit(false)
            } else if a.has_x() {
                x_bit()
            } else {
                LogicVec::bit(true)
            }
        }
        RedOr => match args[0].truth() {
            None => x_bit(),
            Some(t) => LogicVec::bit(t),
        },
        RedXor => {
            let a = &args[0];
            if a.has_x() {
                x_bit()
            } else {
                LogicVec::bit(a.bits.count_ones() % 2 == 1)
            }
        }
        Mux => {
            let (t, e) = (args[1].resize(width), args[2].resize(width));
            match args[0].truth() {
                Some(true) => t,
                Some(false) => e,
                None => {
                    // bits that agree and are known survive
                    let same = !(t.bits ^ e.bits) & !t.xmask & !e.xmask;
                    LogicVec::new(width, t.bits, !same)
                }
            }
        }
        Concat => {
            let mut bits = 0u64;
            let mut xmask = 0u64;
            for a in args {
                let w = a.width as u32;
                bits = bits.checked_shl(w).unwrap_or(0) | a.bits;
                xmask = xmask.checked_shl(w).unwrap_or(0) | a.xmask;
            }
            LogicVec::new(width, bits, xmask)
        }
        Slice { lo } => args[0].slice(lo, width),
        Index => {
            let (a, i) = (&args[0], &args[1]);
            match i.to_u64() {
                Some(i) if i < a.width as u64 => match a.get_bit(i as u8) {
                    Some(b) => LogicVec::bit(b).resize(width),
                    None => LogicVec::all_x(width),
                },
                // out-of-range read yields X as in Verilog
                _ => LogicVec::all_x(width),
            }
        }
        Resize => args[0].resize(width),
    }
}
