//! Parser and linter for the synthesizable HDL subset accepted by the
//! simulator. The grammar is documented in `docs/subset.md`.

pub mod ast;
mod lexer;
mod lint;
mod parser;
pub mod pretty;

use std::fmt;

pub use ast::{LineMap, SourceUnit, Span};
pub use lint::{lint_subset, lint_units};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{rule}: {message}")]
pub struct ParseError {
    pub rule: &'static str,
    pub message: String,
    pub span: Span,
}

impl ParseError {
    pub fn new(rule: &'static str, message: impl Into<String>, span: Span) -> Self {
        ParseError {
            rule,
            message: message.into(),
            span,
        }
    }

    pub fn to_diagnostic(&self) -> Diagnostic {
        Diagnostic {
            rule: self.rule.to_string(),
            message: self.message.clone(),
            span: self.span,
        }
    }
}

/// A located message produced by parsing, linting or elaboration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub rule: String,
    pub message: String,
    pub span: Span,
}

impl Diagnostic {
    pub fn new(rule: &str, message: impl Into<String>, span: Span) -> Self {
        Diagnostic {
            rule: rule.to_string(),
            message: message.into(),
            span,
        }
    }

    /// `file:line:col: rule-id: message`
    pub fn render(&self, file: &str, lines: &LineMap) -> String {
        let (line, col) = lines.line_col(self.span.start);
        format!("{file}:{line}:{col}: {}: {}", self.rule, self.message)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule, self.message)
    }
}

/// Parse source text into a syntax tree. No semantic checks are made.
pub fn parse_design(source: &str) -> Result<SourceUnit, ParseError> {
    parse_design_named("<input>", source)
}

pub fn parse_design_named(file: &str, source: &str) -> Result<SourceUnit, ParseError> {
    parse_with(file, source, true)
}

/// Parse with every span zeroed; used to compare trees structurally.
pub fn parse_design_without_spans(source: &str) -> Result<SourceUnit, ParseError> {
    parse_with("<input>", source, false)
}

fn parse_with(file: &str, source: &str, keep_spans: bool) -> Result<SourceUnit, ParseError> {
    let mut p = parser::Parser::new(source, keep_spans)?;
    let modules = p.source_unit()?;
    Ok(SourceUnit {
        file: file.to_string(),
        modules,
        lines: LineMap::new(source),
    })
}

/// Evaluate a constant expression. `lookup` resolves parameter and loop
/// variable names; anything else is an error.
pub fn const_eval(e: &ast::Expr, lookup: &dyn Fn(&str) -> Option<u64>) -> Result<u64, Diagnostic> {
    use ast::{BinaryOp as B, Expr, UnaryOp as U};
    let rec = |x: &Expr| const_eval(x, lookup);
    Ok(match e {
        Expr::Number(n) => n.value,
        Expr::Ident(i) => lookup(&i.name)
            .ok_or_else(|| Diagnostic::new("not-constant", format!("'{}' is not a constant", i.name), i.span))?,
        Expr::Unary { op, arg, .. } => {
            let a = rec(arg)?;
            match op {
                U::Not => !a,
                U::LogNot => (a == 0) as u64,
                U::Neg => a.wrapping_neg(),
                U::Plus => a,
                U::RedAnd => (a == u64::MAX) as u64,
                U::RedOr => (a != 0) as u64,
                U::RedXor => (a.count_ones() % 2) as u64,
            }
        }
        Expr::Binary { op, lhs, rhs, .. } => {
            let (a, b) = (rec(lhs)?, rec(rhs)?);
            match op {
                B::Add => a.wrapping_add(b),
                B::Sub => a.wrapping_sub(b),
                B::Mul => a.wrapping_mul(b),
                B::And => a & b,
                B::Or => a | b,
                B::Xor => a ^ b,
                B::Xnor => !(a ^ b),
                B::LogAnd => (a != 0 && b != 0) as u64,
                B::LogOr => (a != 0 || b != 0) as u64,
                B::Eq => (a == b) as u64,
                B::Ne => (a != b) as u64,
                B::Lt => (a < b) as u64,
                B::Le => (a <= b) as u64,
                B::Gt => (a > b) as u64,
                B::Ge => (a >= b) as u64,
                B::Shl => a.checked_shl(b as u32).unwrap_or(0),
                B::Shr => a.checked_shr(b as u32).unwrap_or(0),
            }
        }
        Expr::Ternary { cond, then, els, .. } => {
            if rec(cond)? != 0 {
                rec(then)?
            } else {
                rec(els)?
            }
        }
        other => {
            return Err(Diagnostic::new(
                "not-constant",
                "expression is not a supported constant expression",
                other.span(),
            ))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::ast::*;
    use super::*;

    #[test]
    fn minimal_unit() {
        let u = parse_design("module t(input a, output w); assign w = ~a; endmodule").unwrap();
        assert_eq!(u.modules.len(), 1);
        let m = &u.modules[0];
        let assigns = m.items.iter().filter(|i| matches!(i, Item::Assign(_))).count();
        assert_eq!(assigns, 1);
    }

    #[test]
    fn delay_is_rejected() {
        let e = parse_design("module t; always #5 clk = ~clk; endmodule").unwrap_err();
        assert_eq!(e.rule, "delay-not-in-subset");
    }

    #[test]
    fn nested_branches_parse() {
        let src = "module t(input clk, input s, input b, input c, input g, input k, \
                   input a, input r, output reg q);
            always @(posedge clk) begin
              if (s) begin
                case (b)
                  1'b1: q <= c ^ g;
                  default: q <= k;
                endcase
              end else if (a) q <= r;
            end
          endmodule";
        let u = parse_design(src).unwrap();
        let Item::Always(blk) = &u.modules[0].items[0] else {
            panic!("expected always block");
        };
        let Stmt::Block { stmts, .. } = &blk.body else {
            panic!("expected begin/end");
        };
        let Stmt::If { then, els, .. } = &stmts[0] else {
            panic!("expected if");
        };
        assert!(matches!(**then, Stmt::Block { .. }));
        assert!(matches!(els.as_deref(), Some(Stmt::If { .. })));
    }

    #[test]
    fn errors_carry_positions() {
        let src = "module t;\n  wire a\nendmodule";
        let e = parse_design(src).unwrap_err();
        let lines = LineMap::new(src);
        let d = e.to_diagnostic().render("t.v", &lines);
        assert!(d.starts_with("t.v:3:1: syntax:"), "{d}");
    }

    #[test]
    fn unterminated_module() {
        let e = parse_design("module t(input a);\n assign b = a;\n").unwrap_err();
        assert_eq!(e.rule, "unterminated");
        let e = parse_design("module t; always @(*) begin a = 1; endmodule").unwrap_err();
        assert_eq!(e.rule, "unterminated");
        let e = parse_design("module t; /* open").unwrap_err();
        assert_eq!(e.rule, "unterminated");
    }

    #[test]
    fn xz_literals_rejected() {
        let e = parse_design("module t(output w); assign w = 1'bx; endmodule").unwrap_err();
        assert_eq!(e.rule, "no-xz-literal");
    }

    #[test]
    fn const_eval_with_params() {
        let u = parse_design("module t; localparam W = (4 << 1) - 1; endmodule").unwrap();
        let Item::Param(p) = &u.modules[0].items[0] else {
            panic!()
        };
        assert_eq!(const_eval(&p.value, &|_| None).unwrap(), 7);
    }

    #[test]
    fn precedence() {
        let u = parse_design_without_spans("module t(output w); assign w = a | b & c == d + e * f; endmodule").unwrap();
        let Item::Assign(a) = &u.modules[0].items[0] else {
            panic!()
        };
        assert_eq!(pretty::print_expr(&a.rhs), "a | (b & (c == (d + (e * f))))");
    }
}
