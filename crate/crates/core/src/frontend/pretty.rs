//! Canonical source printer. Re-parsing its output yields a structurally
//! identical tree.

use std::fmt::Write;

use super::ast::*;

pub fn print_unit(unit: &SourceUnit) -> String {
    let mut p = Printer::default();
    for (i, m) in unit.modules.iter().enumerate() {
        if i > 0 {
            p.out.push('\n');
        }
        p.module(m);
    }
    p.out
}

pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    expr(&mut s, e);
    s
}

pub fn print_stmt(s: &Stmt) -> String {
    let mut p = Printer::default();
    p.stmt(s);
    p.out
}

#[derive(Default)]
struct Printer {
    out: String,
    indent: usize,
}

impl Printer {
    fn line(&mut self, text: &str) {
        for _ in 0..self.indent {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn module(&mut self, m: &ModuleDecl) {
        let mut head = format!("module {}", m.name);
        if !m.params.is_empty() {
            let ps: Vec<String> = m
                .params
                .iter()
                .map(|p| {
                    format!(
                        "{} {} = {}",
                        if p.local { "localparam" } else { "parameter" },
                        p.name,
                        print_expr(&p.value)
                    )
                })
                .collect();
            let _ = write!(head, " #({})", ps.join(", "));
        }
        match &m.ports {
            PortList::Names(names) => {
                let ns: Vec<&str> = names.iter().map(|n| n.name.as_str()).collect();
                let _ = write!(head, "({});", ns.join(", "));
            }
            PortList::Ansi(decls) => {
                let ds: Vec<String> = decls.iter().map(port_decl).collect();
                let _ = write!(head, "({});", ds.join(", "));
            }
        }
        self.line(&head);
        self.indent += 1;
        for item in &m.items {
            self.item(item);
        }
        self.indent -= 1;
        self.line("endmodule");
    }

    fn item(&mut self, item: &Item) {
        match item {
            Item::Port(p) => self.line(&format!("{};", port_decl(p))),
            Item::Net(n) => {
                let names: Vec<String> = n
                    .names
                    .iter()
                    .map(|(id, init)| match init {
                        Some(e) => format!("{id} = {}", print_expr(e)),
                        None => id.name.clone(),
                    })
                    .collect();
                let kind = match n.kind {
                    NetKind::Wire => "wire",
                    NetKind::Reg => "reg",
                };
                self.line(&format!("{kind}{} {};", range(&n.range), names.join(", ")));
            }
            Item::Integer(names, _) => {
                let ns: Vec<&str> = names.iter().map(|n| n.name.as_str()).collect();
                self.line(&format!("integer {};", ns.join(", ")));
            }
            Item::Param(p) => self.line(&format!(
                "{} {} = {};",
                if p.local { "localparam" } else { "parameter" },
                p.name,
                print_expr(&p.value)
            )),
            Item::Assign(a) => self.line(&format!("assign {} = {};", lvalue(&a.lhs), print_expr(&a.rhs))),
            Item::Always(a) => {
                let sens = match &a.sensitivity {
                    Sensitivity::Star => "*".to_string(),
                    Sensitivity::List(items) => items
                        .iter()
                        .map(|it| match it.edge {
                            Some(Edge::Posedge) => format!("posedge {}", it.signal),
                            Some(Edge::Negedge) => format!("negedge {}", it.signal),
                            None => it.signal.name.clone(),
                        })
                        .collect::<Vec<_>>()
                        .join(" or "),
                };
                self.line(&format!("always @({sens})"));
                self.indent += 1;
                self.stmt(&a.body);
                self.indent -= 1;
            }
            Item::Initial(s, _) => {
                self.line("initial");
                self.indent += 1;
                self.stmt(s);
                self.indent -= 1;
            }
            Item::Instance(inst) => {
                let mut s = inst.module.name.clone();
                if !inst.params.is_empty() {
                    let ps: Vec<String> = inst
                        .params
                        .iter()
                        .map(|(n, e)| match n {
                            Some(n) => format!(".{n}({})", print_expr(e)),
                            None => print_expr(e),
                        })
                        .collect();
                    let _ = write!(s, " #({})", ps.join(", "));
                }
                let conns = match &inst.conns {
                    Connections::Named(c) => c
                        .iter()
                        .map(|(p, e)| format!(".{p}({})", e.as_ref().map(print_expr).unwrap_or_default()))
                        .collect::<Vec<_>>(),
                    Connections::Ordered(c) => c.iter().map(print_expr).collect(),
                };
                let _ = write!(s, " {}({});", inst.name, conns.join(", "));
                self.line(&s);
            }
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match s {
            Stmt::Block { label, stmts, .. } => {
                match label {
                    Some(l) => self.line(&format!("begin : {l}")),
                    None => self.line("begin"),
                }
                self.indent += 1;
                for st in stmts {
                    self.stmt(st);
                }
                self.indent -= 1;
                self.line("end");
            }
            Stmt::If { cond, then, els, .. } => {
                self.line(&format!("if ({})", print_expr(cond)));
                self.nested(then);
                if let Some(e) = els {
                    self.line("else");
                    self.nested(e);
                }
            }
            Stmt::Case {
                subject,
                items,
                default,
                ..
            } => {
                self.line(&format!("case ({})", print_expr(subject)));
                self.indent += 1;
                for it in items {
                    let ls: Vec<String> = it.labels.iter().map(print_expr).collect();
                    self.line(&format!("{}:", ls.join(", ")));
                    self.nested(&it.body);
                }
                if let Some(d) = default {
                    self.line("default:");
                    self.nested(d);
                }
                self.indent -= 1;
                self.line("endcase");
            }
            Stmt::For {
                var,
                init,
                cond,
                step,
                body,
                ..
            } => {
                self.line(&format!(
                    "for ({var} = {}; {}; {var} = {})",
                    print_expr(init),
                    print_expr(cond),
                    print_expr(step)
                ));
                self.nested(body);
            }
            Stmt::While { cond, body, .. } => {
                self.line(&format!("while ({})", print_expr(cond)));
                self.nested(body);
            }
            Stmt::Assign { lhs, rhs, blocking, .. } => {
                let op = if *blocking { "=" } else { "<=" };
                self.line(&format!("{} {op} {};", lvalue(lhs), print_expr(rhs)));
            }
            Stmt::SystemTask { name, args, .. } => {
                if args.is_empty() {
                    self.line(&format!("${name};"));
                } else {
                    let a: Vec<String> = args.iter().map(print_expr).collect();
                    self.line(&format!("${name}({});", a.join(", ")));
                }
            }
            Stmt::Null(_) => self.line(";"),
        }
    }

    fn nested(&mut self, s: &Stmt) {
        self.indent += 1;
        self.stmt(s);
        self.indent -= 1;
    }
}

fn port_decl(p: &PortDecl) -> String {
    let dir = match p.dir {
        Direction::Input => "input",
        Direction::Output => "output",
    };
    let kind = match p.kind {
        Some(NetKind::Wire) => " wire",
        Some(NetKind::Reg) => " reg",
        None => "",
    };
    let names: Vec<&str> = p.names.iter().map(|n| n.name.as_str()).collect();
    format!("{dir}{kind}{} {}", range(&p.range), names.join(", "))
}

fn range(r: &Option<Range>) -> String {
    match r {
        Some(r) => format!(" [{}:{}]", print_expr(&r.msb), print_expr(&r.lsb)),
        None => String::new(),
    }
}

fn lvalue(l: &LValue) -> String {
    match l {
        LValue::Ident(i) => i.name.clone(),
        LValue::Select { base, msb, lsb, .. } => match lsb {
            Some(lsb) => format!("{base}[{}:{}]", print_expr(msb), print_expr(lsb)),
            None => format!("{base}[{}]", print_expr(msb)),
        },
        LValue::Concat(parts, _) => {
            let ps: Vec<String> = parts.iter().map(lvalue).collect();
            format!("{{{}}}", ps.join(", "))
        }
    }
}

fn number(n: &Number) -> String {
    let size = n.size.map(|s| s.to_string()).unwrap_or_default();
    match n.base {
        None => n.value.to_string(),
        Some(NumBase::Dec) => format!("{size}'d{}", n.value),
        Some(NumBase::Bin) => format!("{size}'b{:b}", n.value),
        Some(NumBase::Oct) => format!("{size}'o{:o}", n.value),
        Some(NumBase::Hex) => format!("{size}'h{:x}", n.value),
    }
}

/// Operands that are themselves operators get parentheses so that the
/// printed text re-parses into the same tree regardless of precedence.
fn operand(out: &mut String, e: &Expr) {
    match e {
        Expr::Unary { .. } | Expr::Binary { .. } | Expr::Ternary { .. } => {
            out.push('(');
            expr(out, e);
            out.push(')');
        }
        _ => expr(out, e),
    }
}

fn expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Number(n) => out.push_str(&number(n)),
        Expr::Ident(i) => out.push_str(&i.name),
        Expr::Select { base, msb, lsb, .. } => {
            let _ = write!(out, "{base}[");
            expr(out, msb);
            if let Some(l) = lsb {
                out.push(':');
                expr(out, l);
            }
            out.push(']');
        }
        Expr::Unary { op, arg, .. } => {
            out.push_str(op.symbol());
            operand(out, arg);
        }
        Expr::Binary { op, lhs, rhs, .. } => {
            operand(out, lhs);
            let _ = write!(out, " {} ", op.symbol());
            operand(out, rhs);
        }
        Expr::Ternary { cond, then, els, .. } => {
            operand(out, cond);
            out.push_str(" ? ");
            operand(out, then);
            out.push_str(" : ");
            operand(out, els);
        }
        Expr::Concat(items, _) => {
            out.push('{');
            for (i, it) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                expr(out, it);
            }
            out.push('}');
        }
        Expr::Replicate { count, items, .. } => {
            out.push('{');
            operand(out, count);
            out.push('{');
            for (i, it) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                expr(out, it);
            }
            out.push_str("}}");
        }
    }
}
