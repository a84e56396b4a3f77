use std::collections::{BTreeMap, HashMap, HashSet};

use super::ast::*;
use super::{const_eval, Diagnostic};
use crate::logic::MAX_WIDTH;

#[derive(Clone, Copy, PartialEq, Eq)]
enum DeclKind {
    Net(NetKind),
    Port(Direction, Option<NetKind>),
    Param,
    Integer,
}

struct ModScope<'a> {
    decls: HashMap<String, (DeclKind, Span)>,
    params: HashMap<String, &'a Expr>,
}

/// Report every construct outside the supported subset. An empty result
/// means the unit can be elaborated (modulo width and loop errors that
/// need parameter values).
pub fn lint_subset(unit: &SourceUnit) -> Vec<Diagnostic> {
    lint_units(std::slice::from_ref(unit))
        .into_iter()
        .map(|(_, d)| d)
        .collect()
}

/// Lint a multi-file design. Each diagnostic is tagged with the index of
/// the unit it belongs to.
pub fn lint_units(units: &[SourceUnit]) -> Vec<(usize, Diagnostic)> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (ui, u) in units.iter().enumerate() {
        for m in &u.modules {
            if !seen.insert(m.name.name.as_str()) {
                out.push((
                    ui,
                    Diagnostic::new(
                        "duplicate-module",
                        format!("module '{}' is defined more than once", m.name),
                        m.name.span,
                    ),
                ));
            }
        }
    }
    let ports_of: HashMap<&str, Vec<String>> = units
        .iter()
        .flat_map(|u| &u.modules)
        .map(|m| (m.name.name.as_str(), port_names(m)))
        .collect();
    for (ui, u) in units.iter().enumerate() {
        for m in &u.modules {
            let mut diags = Vec::new();
            lint_module(m, &ports_of, &mut diags);
            out.extend(diags.into_iter().map(|d| (ui, d)));
        }
    }
    out.sort_by_key(|(u, d)| (*u, d.span.start, d.rule.clone()));
    out
}

fn port_names(m: &ModuleDecl) -> Vec<String> {
    match &m.ports {
        PortList::Ansi(decls) => decls
            .iter()
            .flat_map(|d| d.names.iter().map(|n| n.name.clone()))
            .collect(),
        PortList::Names(n) => n.iter().map(|n| n.name.clone()).collect(),
    }
}

fn lint_module(m: &ModuleDecl, ports_of: &HashMap<&str, Vec<String>>, out: &mut Vec<Diagnostic>) {
    let mut scope = ModScope {
        decls: HashMap::new(),
        params: HashMap::new(),
    };
    let declare = |scope: &mut ModScope<'_>, out: &mut Vec<Diagnostic>, name: &Ident, kind| {
        let key = name.name.clone();
        match scope.decls.get(&key).copied() {
            None => {
                scope.decls.insert(key, (kind, name.span));
            }
            // non-ANSI style: `output q; reg q;`
            Some((DeclKind::Port(d, None), sp)) if matches!(kind, DeclKind::Net(_)) => {
                let DeclKind::Net(k) = kind else { unreachable!() };
                scope.decls.insert(key, (DeclKind::Port(d, Some(k)), sp));
            }
            Some((DeclKind::Net(k), sp)) if matches!(kind, DeclKind::Port(_, None)) => {
                let DeclKind::Port(d, _) = kind else { unreachable!() };
                scope.decls.insert(key, (DeclKind::Port(d, Some(k)), sp));
            }
            Some(_) => out.push(Diagnostic::new(
                "duplicate-declaration",
                format!("'{}' is declared more than once", name),
                name.span,
            )),
        }
    };

    for p in &m.params {
        declare(&mut scope, out, &p.name, DeclKind::Param);
        scope.params.insert(p.name.name.clone(), &p.value);
    }
    if let PortList::Ansi(decls) = &m.ports {
        for d in decls {
            check_range(&d.range, &scope, out);
            for n in &d.names {
                declare(&mut scope, out, n, DeclKind::Port(d.dir, d.kind));
            }
        }
    }
    for item in &m.items {
        match item {
            Item::Port(d) => {
                check_range(&d.range, &scope, out);
                for n in &d.names {
                    declare(&mut scope, out, n, DeclKind::Port(d.dir, d.kind));
                }
            }
            Item::Net(n) => {
                check_range(&n.range, &scope, out);
                for (id, _) in &n.names {
                    declare(&mut scope, out, id, DeclKind::Net(n.kind));
                }
            }
            Item::Integer(names, _) => {
                for n in names {
                    declare(&mut scope, out, n, DeclKind::Integer);
                }
            }
            Item::Param(p) => {
                declare(&mut scope, out, &p.name, DeclKind::Param);
                scope.params.insert(p.name.name.clone(), &p.value);
            }
            _ => {}
        }
    }
    if let PortList::Names(names) = &m.ports {
        for n in names {
            if !matches!(scope.decls.get(n.name.as_str()), Some((DeclKind::Port(..), _))) {
                out.push(Diagnostic::new(
                    "port-not-declared",
                    format!("port '{n}' has no direction declaration"),
                    n.span,
                ));
            }
        }
        for item in &m.items {
            if let Item::Port(d) = item {
                for n in &d.names {
                    if !names.iter().any(|h| h.name == n.name) {
                        out.push(Diagnostic::new(
                            "port-not-declared",
                            format!("'{n}' is declared as a port but missing from the port list"),
                            n.span,
                        ));
                    }
                }
            }
        }
    }

    // per-signal writers: (is_continuous, always index, blocking)
    let mut writers: BTreeMap<String, Vec<(Option<usize>, bool, Span)>> = BTreeMap::new();
    let mut cx = Ctx {
        scope: &scope,
        out,
        loop_vars: Vec::new(),
    };
    let mut always_idx = 0usize;
    for item in &m.items {
        match item {
            Item::Net(n) => {
                for (id, init) in &n.names {
                    if let Some(e) = init {
                        cx.expr(e);
                        writers.entry(id.name.clone()).or_default().push((None, true, id.span));
                    }
                }
            }
            Item::Param(p) => cx.expr(&p.value),
            Item::Assign(a) => {
                cx.expr(&a.rhs);
                cx.lvalue(&a.lhs, true);
                if !matches!(a.lhs, LValue::Ident(_) | LValue::Concat(..))
                    || matches!(&a.lhs, LValue::Concat(parts, _) if parts.iter().any(|p| !matches!(p, LValue::Ident(_))))
                {
                    cx.out.push(Diagnostic::new(
                        "partial-continuous-assign",
                        "continuous assignment to a bit- or part-select is not in the subset",
                        a.lhs.span(),
                    ));
                }
                for t in a.lhs.targets() {
                    writers.entry(t.name.clone()).or_default().push((None, true, t.span));
                }
            }
            Item::Always(a) => {
                if let Sensitivity::List(items) = &a.sensitivity {
                    let edges = items.iter().filter(|i| i.edge.is_some()).count();
                    if edges != 0 && edges != items.len() {
                        cx.out.push(Diagnostic::new(
                            "mixed-sensitivity",
                            "edge and level events cannot be mixed in one event control",
                            a.span,
                        ));
                    }
                    for it in items {
                        cx.ident_ref(&it.signal);
                    }
                }
                let mut ws = Vec::new();
                cx.stmt(&a.body, &mut ws);
                for (name, blocking, span) in ws {
                    writers
                        .entry(name)
                        .or_default()
                        .push((Some(always_idx), blocking, span));
                }
                always_idx += 1;
            }
            Item::Initial(s, span) => {
                cx.out.push(Diagnostic::new(
                    "no-initial",
                    "initial blocks are not in the supported subset; drive values from the stimulus file",
                    *span,
                ));
                let mut ws = Vec::new();
                cx.stmt(s, &mut ws);
            }
            Item::Instance(inst) => {
                for (_, e) in &inst.params {
                    cx.expr(e);
                }
                let Some(child_ports) = ports_of.get(inst.module.name.as_str()) else {
                    cx.out.push(Diagnostic::new(
                        "unknown-module",
                        format!("module '{}' is not defined", inst.module),
                        inst.module.span,
                    ));
                    continue;
                };
                match &inst.conns {
                    Connections::Named(c) => {
                        for (p, e) in c {
                            if !child_ports.contains(&p.name) {
                                cx.out.push(Diagnostic::new(
                                    "unknown-port",
                                    format!("module '{}' has no port '{}'", inst.module, p),
                                    p.span,
                                ));
                            }
                            if let Some(e) = e {
                                cx.expr(e);
                            }
                        }
                    }
                    Connections::Ordered(c) => {
                        if c.len() > child_ports.len() {
                            cx.out.push(Diagnostic::new(
                                "unknown-port",
                                format!(
                                    "too many connections for module '{}' ({} > {})",
                                    inst.module,
                                    c.len(),
                                    child_ports.len()
                                ),
                                inst.span,
                            ));
                        }
                        for e in c {
                            cx.expr(e);
                        }
                    }
                }
            }
            Item::Port(_) | Item::Integer(..) => {}
        }
    }

    for (name, ws) in &writers {
        let Some((kind, _)) = scope.decls.get(name.as_str()).copied() else {
            continue;
        };
        let is_reg = matches!(
            kind,
            DeclKind::Net(NetKind::Reg) | DeclKind::Port(_, Some(NetKind::Reg))
        );
        if let DeclKind::Port(Direction::Input, _) = kind {
            cx.out.push(Diagnostic::new(
                "assign-to-input",
                format!("input port '{name}' cannot be assigned"),
                ws[0].2,
            ));
            continue;
        }
        if matches!(kind, DeclKind::Param | DeclKind::Integer) {
            continue;
        }
        let owners: HashSet<Option<usize>> = ws.iter().map(|w| w.0).collect();
        if owners.len() > 1 || ws.iter().filter(|w| w.0.is_none()).count() > 1 {
            cx.out.push(Diagnostic::new(
                "multiple-drivers",
                format!("'{name}' is driven from more than one place"),
                ws[1].2,
            ));
        }
        for w in ws {
            match w.0 {
                None if is_reg => cx.out.push(Diagnostic::new(
                    "reg-continuous-assign",
                    format!("reg '{name}' cannot be continuously assigned"),
                    w.2,
                )),
                Some(_) if !is_reg => cx.out.push(Diagnostic::new(
                    "wire-procedural-assign",
                    format!("wire '{name}' cannot be assigned in an always block"),
                    w.2,
                )),
                _ => {}
            }
        }
        let procedural: Vec<_> = ws.iter().filter(|w| w.0.is_some()).collect();
        if procedural.iter().any(|w| w.1) && procedural.iter().any(|w| !w.1) {
            cx.out.push(Diagnostic::new(
                "mixed-assignment",
                format!("'{name}' is assigned with both blocking and nonblocking assignments"),
                procedural[0].2,
            ));
        }
    }
}

fn check_range(r: &Option<Range>, scope: &ModScope<'_>, out: &mut Vec<Diagnostic>) {
    let Some(r) = r else { return };
    let lookup = |n: &str| param_value(scope, n, 0);
    match (const_eval(&r.msb, &lookup), const_eval(&r.lsb, &lookup)) {
        (Ok(msb), Ok(lsb)) => {
            if msb < lsb {
                out.push(Diagnostic::new(
                    "ascending-range",
                    "ranges must be declared [msb:lsb] with msb >= lsb",
                    r.span,
                ));
            } else if msb - lsb + 1 > MAX_WIDTH as u64 {
                out.push(Diagnostic::new(
                    "width-limit",
                    format!("vectors wider than {MAX_WIDTH} bits are not supported"),
                    r.span,
                ));
            }
        }
        (Err(d), _) | (_, Err(d)) => out.push(Diagnostic::new("not-constant", d.message, d.span)),
    }
}

fn param_value(scope: &ModScope<'_>, name: &str, depth: usize) -> Option<u64> {
    if depth > 32 {
        return None;
    }
    let e = scope.params.get(name)?;
    const_eval(e, &|n| param_value(scope, n, depth + 1)).ok()
}

struct Ctx<'s, 'a> {
    scope: &'s ModScope<'a>,
    out: &'s mut Vec<Diagnostic>,
    loop_vars: Vec<String>,
}

impl Ctx<'_, '_> {
    fn ident_ref(&mut self, id: &Ident) {
        if self.loop_vars.contains(&id.name) {
            return;
        }
        if !self.scope.decls.contains_key(id.name.as_str()) {
            self.out.push(Diagnostic::new(
                "undeclared-signal",
                format!("'{}' is not declared", id.name),
                id.span,
            ));
        }
    }

    fn expr(&mut self, e: &Expr) {
        let mut ids = Vec::new();
        e.for_each_ident(&mut |i| ids.push(i.clone()));
        for i in &ids {
            self.ident_ref(i);
        }
        self.numbers(e);
    }

    fn numbers(&mut self, e: &Expr) {
        match e {
            Expr::Number(n) => {
                if let Some(size) = n.size {
                    if size == 0 || size > MAX_WIDTH as u32 {
                        self.out.push(Diagnostic::new(
                            "width-limit",
                            format!("literal size {size} is outside 1..={MAX_WIDTH}"),
                            n.span,
                        ));
                    } else if size < 64 && n.value >> size != 0 {
                        self.out.push(Diagnostic::new(
                            "literal-overflow",
                            format!("value {} does not fit in {size} bits", n.value),
                            n.span,
                        ));
                    }
                }
            }
            Expr::Ident(_) => {}
            Expr::Select { msb, lsb, .. } => {
                self.numbers(msb);
                if let Some(l) = lsb {
                    self.numbers(l);
                }
            }
            Expr::Unary { arg, .. } => self.numbers(arg),
            Expr::Binary { lhs, rhs, .. } => {
                self.numbers(lhs);
                self.numbers(rhs);
            }
            Expr::Ternary { cond, then, els, .. } => {
                self.numbers(cond);
                self.numbers(then);
                self.numbers(els);
            }
            Expr::Concat(items, _) => items.iter().for_each(|i| self.numbers(i)),
            Expr::Replicate { count, items, .. } => {
                self.numbers(count);
                items.iter().for_each(|i| self.numbers(i));
            }
        }
    }

    fn is_constant(&self, e: &Expr) -> bool {
        let mut ok = true;
        e.for_each_ident(&mut |i| {
            let is_param = matches!(self.scope.decls.get(i.name.as_str()), Some((DeclKind::Param, _)));
            if !is_param && !self.loop_vars.contains(&i.name) {
                ok = false;
            }
        });
        ok
    }

    fn lvalue(&mut self, l: &LValue, _continuous: bool) {
        match l {
            LValue::Ident(i) => self.ident_ref(i),
            LValue::Select { base, msb, lsb, .. } => {
                self.ident_ref(base);
                self.expr(msb);
                if let Some(l) = lsb {
                    self.expr(l);
                    if !self.is_constant(msb) || !self.is_constant(l) {
                        self.out.push(Diagnostic::new(
                            "not-constant",
                            "part-select bounds must be constant",
                            l.span(),
                        ));
                    }
                }
            }
            LValue::Concat(parts, _) => parts.iter().for_each(|p| self.lvalue(p, _continuous)),
        }
    }

    fn stmt(&mut self, s: &Stmt, writes: &mut Vec<(String, bool, Span)>) {
        match s {
            Stmt::Block { stmts, .. } => stmts.iter().for_each(|st| self.stmt(st, writes)),
            Stmt::If { cond, then, els, .. } => {
                self.expr(cond);
                self.stmt(then, writes);
                if let Some(e) = els {
                    self.stmt(e, writes);
                }
            }
            Stmt::Case {
                subject,
                items,
                default,
                ..
            } => {
                self.expr(subject);
                for it in items {
                    for l in &it.labels {
                        self.expr(l);
                        if !self.is_constant(l) {
                            self.out.push(Diagnostic::new(
                                "case-label-not-constant",
                                "case labels must be constant expressions",
                                l.span(),
                            ));
                        }
                    }
                    self.stmt(&it.body, writes);
                }
                if let Some(d) = default {
                    self.stmt(d, writes);
                }
            }
            Stmt::For {
                var,
                init,
                cond,
                step,
                body,
                span,
            } => {
                if !matches!(self.scope.decls.get(var.name.as_str()), Some((DeclKind::Integer, _))) {
                    self.out.push(Diagnostic::new(
                        "loop-variable",
                        format!("loop variable '{}' must be declared as integer", var),
                        var.span,
                    ));
                }
                self.loop_vars.push(var.name.clone());
                for e in [init, cond, step] {
                    self.expr(e);
                    if !self.is_constant(e) {
                        self.out.push(Diagnostic::new(
                            "nonconst-loop-bound",
                            "for-loop bounds must be compile-time constants",
                            *span,
                        ));
                        break;
                    }
                }
                self.stmt(body, writes);
                self.loop_vars.pop();
            }
            Stmt::While { cond, body, span } => {
                self.out.push(Diagnostic::new(
                    "no-unbounded-loop",
                    "while loops are not in the supported subset",
                    *span,
                ));
                self.expr(cond);
                self.stmt(body, writes);
            }
            Stmt::Assign { lhs, rhs, blocking, .. } => {
                self.expr(rhs);
                self.lvalue(lhs, false);
                for t in lhs.targets() {
                    if self.loop_vars.contains(&t.name) {
                        self.out.push(Diagnostic::new(
                            "loop-variable",
                            "loop variables cannot be assigned in the loop body",
                            t.span,
                        ));
                    }
                    writes.push((t.name.clone(), *blocking, t.span));
                }
            }
            Stmt::SystemTask { span, name, .. } => self.out.push(Diagnostic::new(
                "no-system-task",
                format!("system task ${} is not in the supported subset", name),
                *span,
            )),
            Stmt::Null(_) => {}
        }
    }
}
