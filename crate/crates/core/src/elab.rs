//! Elaboration: parameter substitution, loop unrolling, width inference and
//! hierarchy flattening into an RTL graph of operator, signal and
//! behavioral nodes.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use serde_json::{json, Value};

use crate::frontend::ast::{self, Direction, Edge, Item, ModuleDecl, NetKind, PortList};
use crate::frontend::{const_eval, lint_units, Diagnostic, LineMap, SourceUnit, Span};
use crate::logic::{eval_op, LogicVec, OpKind, MAX_WIDTH};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignalId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub u32);

impl SignalId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}
impl NodeId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}
impl BlockId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Driver {
    Undriven,
    /// Top-level input, driven by the stimulus.
    Stimulus,
    /// Continuous assignment or port connection.
    Node(NodeId),
    Block(BlockId),
}

#[derive(Clone, Debug)]
pub struct Signal {
    pub name: String,
    pub width: u8,
    /// Declared index of bit 0 (`[8:1]` has `lsb == 1`).
    pub lsb: u32,
    pub is_reg: bool,
    /// Set only for ports of the top module.
    pub port: Option<Direction>,
    pub driver: Driver,
    pub node: NodeId,
    pub unit: usize,
    pub span: Span,
}

impl Signal {
    /// Name of bit `bit` (0-based) using the declared index.
    pub fn bit_name(&self, bit: u8) -> String {
        format!("{}[{}]", self.name, self.lsb + bit as u32)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Const(LogicVec),
    Signal { id: SignalId, width: u8 },
    Op { op: OpKind, width: u8, args: Vec<Expr> },
}

impl Expr {
    pub fn width(&self) -> u8 {
        match self {
            Expr::Const(v) => v.width(),
            Expr::Signal { width, .. } | Expr::Op { width, .. } => *width,
        }
    }

    pub fn for_each_signal(&self, f: &mut dyn FnMut(SignalId)) {
        match self {
            Expr::Const(_) => {}
            Expr::Signal { id, .. } => f(*id),
            Expr::Op { args, .. } => args.iter().for_each(|a| a.for_each_signal(f)),
        }
    }

    pub fn signals(&self) -> BTreeSet<SignalId> {
        let mut s = BTreeSet::new();
        self.for_each_signal(&mut |id| {
            s.insert(id);
        });
        s
    }

    /// Evaluate with `value` supplying signal values.
    pub fn eval(&self, value: &mut dyn FnMut(SignalId) -> LogicVec) -> LogicVec {
        match self {
            Expr::Const(v) => *v,
            Expr::Signal { id, .. } => value(*id),
            Expr::Op { op, width, args } => {
                let vals: Vec<LogicVec> = args.iter().map(|a| a.eval(value)).collect();
                eval_op(*op, *width, &vals)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sel {
    Full,
    Static {
        lo: u8,
    },
    /// Single bit at a runtime index (already offset by the declared lsb).
    Dynamic {
        index: Expr,
    },
}

/// One piece of an assignment target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LPart {
    pub signal: SignalId,
    pub sel: Sel,
    pub width: u8,
}

impl LPart {
    pub fn is_partial(&self, sig_width: u8) -> bool {
        !matches!(self.sel, Sel::Full) || self.width != sig_width
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseArm {
    pub labels: Vec<LogicVec>,
    pub body: Vec<Stmt>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    Assign {
        /// Index in pre-order among the block's assignments.
        id: u32,
        /// MSB first, like a concatenation.
        lhs: Vec<LPart>,
        rhs: Expr,
        blocking: bool,
    },
    If {
        cond: Expr,
        then: Vec<Stmt>,
        els: Vec<Stmt>,
    },
    Case {
        subject: Expr,
        arms: Vec<CaseArm>,
        default: Vec<Stmt>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Trigger {
    Comb,
    Edge(Vec<(Edge, SignalId)>),
}

#[derive(Clone, Debug)]
pub struct Block {
    pub name: String,
    pub trigger: Trigger,
    pub body: Vec<Stmt>,
    /// Every signal the body may read.
    pub reads: BTreeSet<SignalId>,
    pub writes: BTreeSet<SignalId>,
    /// Signals whose change wakes the block.
    pub sensitivity: Vec<SignalId>,
    pub node: NodeId,
    pub unit: usize,
    pub span: Span,
    pub assign_count: u32,
}

impl Block {
    pub fn is_comb(&self) -> bool {
        self.trigger == Trigger::Comb
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Const(LogicVec),
    Op { op: OpKind, width: u8 },
    Signal(SignalId),
    Behavioral(BlockId),
}

#[derive(Clone, Debug)]
pub struct Node {
    pub kind: NodeKind,
    /// Data inputs; the position is the operand index.
    pub fanin: Vec<NodeId>,
    pub fanout: Vec<NodeId>,
    /// Topological rank among combinational nodes.
    pub rank: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignalRow {
    pub id: SignalId,
    pub name: String,
    pub width: u8,
    pub net: NetKind,
}

#[derive(Clone, Debug)]
pub struct RtlGraph {
    pub top: String,
    pub signals: Vec<Signal>,
    pub blocks: Vec<Block>,
    pub nodes: Vec<Node>,
    pub inputs: Vec<SignalId>,
    pub outputs: Vec<SignalId>,
    /// Combinational nodes in evaluation order.
    pub comb_order: Vec<NodeId>,
    pub warnings: Vec<(usize, Diagnostic)>,
    pub files: Vec<(String, LineMap)>,
}

#[derive(Debug, Clone)]
pub struct ElabError {
    /// Unit index and diagnostic; lint failures produce several.
    pub diags: Vec<(usize, Diagnostic)>,
}

impl ElabError {
    fn new(unit: usize, rule: &str, msg: impl Into<String>, span: Span) -> Self {
        ElabError {
            diags: vec![(unit, Diagnostic::new(rule, msg, span))],
        }
    }

    pub fn rule(&self) -> &str {
        &self.diags[0].1.rule
    }

    pub fn render(&self, units: &[SourceUnit]) -> Vec<String> {
        self.diags
            .iter()
            .map(|(u, d)| match units.get(*u) {
                Some(unit) => d.render(&unit.file, &unit.lines),
                None => d.to_string(),
            })
            .collect()
    }
}

impl fmt::Display for ElabError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.diags[0].1)?;
        if self.diags.len() > 1 {
            write!(f, " (and {} more)", self.diags.len() - 1)?;
        }
        Ok(())
    }
}

impl std::error::Error for ElabError {}

type EResult<T> = Result<T, ElabError>;

const MAX_UNROLL: u64 = 65_536;
const MAX_DEPTH: usize = 64;

/// Lint, then elaborate `top` (or the unique uninstantiated module).
pub fn elaborate(units: &[SourceUnit], top: Option<&str>) -> EResult<RtlGraph> {
    let lint = lint_units(units);
    if !lint.is_empty() {
        return Err(ElabError { diags: lint });
    }
    let mut modules = HashMap::new();
    for (ui, u) in units.iter().enumerate() {
        for m in &u.modules {
            modules.insert(m.name.name.as_str(), (ui, m));
        }
    }
    let top_name = match top {
        Some(t) => {
            if !modules.contains_key(t) {
                return Err(ElabError::new(
                    0,
                    "top-not-found",
                    format!("top module '{t}' not found"),
                    Span::default(),
                ));
            }
            t.to_string()
        }
        None => infer_top(units)?,
    };
    let mut el = Elab {
        modules,
        g: RtlGraph {
            top: top_name.clone(),
            signals: Vec::new(),
            blocks: Vec::new(),
            nodes: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            comb_order: Vec::new(),
            warnings: Vec::new(),
            files: units.iter().map(|u| (u.file.clone(), u.lines.clone())).collect(),
        },
        depth: 0,
    };
    let (ui, m) = el.modules[top_name.as_str()];
    el.module(ui, m, &top_name, HashMap::new(), true)?;
    el.finish()
}

fn infer_top(units: &[SourceUnit]) -> EResult<String> {
    let mut instantiated = HashSet::new();
    for u in units {
        for m in &u.modules {
            for it in &m.items {
                if let Item::Instance(i) = it {
                    instantiated.insert(i.module.name.as_str());
                }
            }
        }
    }
    let roots: Vec<&str> = units
        .iter()
        .flat_map(|u| &u.modules)
        .map(|m| m.name.name.as_str())
        .filter(|n| !instantiated.contains(n))
        .collect();
    match roots.as_slice() {
        [one] => Ok(one.to_string()),
        [] => Err(ElabError::new(
            0,
            "top-not-found",
            "no top module found",
            Span::default(),
        )),
        many => Err(ElabError::new(
            0,
            "ambiguous-top",
            format!("several candidate top modules ({}); use --top", many.join(", ")),
            Span::default(),
        )),
    }
}

#[derive(Clone, Copy, Debug)]
enum Sym {
    Sig(SignalId),
    Const(u64, u8),
    /// Declared `integer` outside any loop using it.
    Integer,
}

struct Scope {
    unit: usize,
    prefix: String,
    syms: HashMap<String, Sym>,
}

impl Scope {
    fn const_lookup(&self) -> impl Fn(&str) -> Option<u64> + '_ {
        move |n| match self.syms.get(n) {
            Some(Sym::Const(v, _)) => Some(*v),
            _ => None,
        }
    }

    fn eval_const(&self, e: &ast::Expr) -> EResult<u64> {
        const_eval(e, &self.const_lookup()).map_err(|d| ElabError {
            diags: vec![(self.unit, d)],
        })
    }
}

struct PortInfo {
    name: String,
    dir: Direction,
    signal: SignalId,
}

struct Elab<'a> {
    modules: HashMap<&'a str, (usize, &'a ModuleDecl)>,
    g: RtlGraph,
    depth: usize,
}

fn bits_needed(v: u64) -> u8 {
    (64 - v.leading_zeros()).max(1) as u8
}

impl<'a> Elab<'a> {
    fn add_node(&mut self, kind: NodeKind, fanin: Vec<NodeId>) -> NodeId {
        let id = NodeId(self.g.nodes.len() as u32);
        self.g.nodes.push(Node {
            kind,
            fanin,
            fanout: Vec::new(),
            rank: 0,
        });
        id
    }

    fn module(
        &mut self,
        unit: usize,
        m: &'a ModuleDecl,
        prefix: &str,
        overrides: HashMap<String, (u64, u8)>,
        is_top: bool,
    ) -> EResult<Vec<PortInfo>> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(ElabError::new(
                unit,
                "recursive-instance",
                format!("instance hierarchy deeper than {MAX_DEPTH} (recursive instantiation?)"),
                m.name.span,
            ));
        }
        let mut scope = Scope {
            unit,
            prefix: prefix.to_string(),
            syms: HashMap::new(),
        };

        let body_params = m.items.iter().filter_map(|i| match i {
            Item::Param(p) => Some(p),
            _ => None,
        });
        for p in m.params.iter().chain(body_params) {
            let (v, w) = match overrides.get(&p.name.name) {
                Some(ov) if !p.local => *ov,
                _ => {
                    let v = scope.eval_const(&p.value)?;
                    (v, const_width(&p.value, v))
                }
            };
            scope.syms.insert(p.name.name.clone(), Sym::Const(v, w));
        }
        for k in overrides.keys() {
            let declared = m
                .params
                .iter()
                .chain(m.items.iter().filter_map(|i| match i {
                    Item::Param(p) => Some(p),
                    _ => None,
                }))
                .any(|p| &p.name.name == k && !p.local);
            if !declared {
                return Err(ElabError::new(
                    unit,
                    "unknown-parameter",
                    format!("module '{}' has no overridable parameter '{k}'", m.name),
                    m.name.span,
                ));
            }
        }

        // Declarations. Non-ANSI ports merge a direction with a net kind.
        struct Decl<'d> {
            dir: Option<Direction>,
            reg: bool,
            range: Option<&'d ast::Range>,
            span: Span,
        }
        let mut decls: Vec<(String, Decl)> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut add =
            |name: &ast::Ident, dir: Option<Direction>, kind: Option<NetKind>, range: Option<&'a ast::Range>| {
                match index.get(&name.name) {
                    Some(&i) => {
                        let d: &mut Decl = &mut decls[i].1;
                        d.dir = d.dir.or(dir);
                        d.reg |= kind == Some(NetKind::Reg);
                        d.range = d.range.or(range);
                    }
                    None => {
                        index.insert(name.name.clone(), decls.len());
                        decls.push((
                            name.name.clone(),
                            Decl {
                                dir,
                                reg: kind == Some(NetKind::Reg),
                                range,
                                span: name.span,
                            },
                        ));
                    }
                }
            };
        let mut port_order: Vec<String> = Vec::new();
        match &m.ports {
            PortList::Ansi(ds) => {
                for d in ds {
                    for n in &d.names {
                        add(n, Some(d.dir), d.kind, d.range.as_ref());
                        port_order.push(n.name.clone());
                    }
                }
            }
            PortList::Names(ns) => port_order.extend(ns.iter().map(|n| n.name.clone())),
        }
        for item in &m.items {
            match item {
                Item::Port(d) => {
                    for n in &d.names {
                        add(n, Some(d.dir), d.kind, d.range.as_ref());
                    }
                }
                Item::Net(n) => {
                    for (id, _) in &n.names {
                        add(id, None, Some(n.kind), n.range.as_ref());
                    }
                }
                Item::Integer(names, _) => {
                    for n in names {
                        scope.syms.insert(n.name.clone(), Sym::Integer);
                    }
                }
                _ => {}
            }
        }
        for (name, d) in &decls {
            let (width, lsb) = match d.range {
                None => (1u8, 0u32),
                Some(r) => {
                    let msb = scope.eval_const(&r.msb)?;
                    let lsb = scope.eval_const(&r.lsb)?;
                    if msb < lsb || msb - lsb >= MAX_WIDTH as u64 {
                        return Err(ElabError::new(
                            unit,
                            "width-limit",
                            format!("range [{msb}:{lsb}] is not a descending range of 1..={MAX_WIDTH} bits"),
                            r.span,
                        ));
                    }
                    ((msb - lsb + 1) as u8, lsb as u32)
                }
            };
            let id = SignalId(self.g.signals.len() as u32);
            let node = self.add_node(NodeKind::Signal(id), Vec::new());
            let port = if is_top { d.dir } else { None };
            self.g.signals.push(Signal {
                name: format!("{prefix}.{name}"),
                width,
                lsb,
                is_reg: d.reg,
                port,
                driver: if port == Some(Direction::Input) {
                    Driver::Stimulus
                } else {
                    Driver::Undriven
                },
                node,
                unit,
                span: d.span,
            });
            match port {
                Some(Direction::Input) => self.g.inputs.push(id),
                Some(Direction::Output) => self.g.outputs.push(id),
                None => {}
            }
            scope.syms.insert(name.clone(), Sym::Sig(id));
        }
        let ports: Vec<PortInfo> = port_order
            .iter()
            .map(|n| {
                let d = &decls[index[n]].1;
                let Some(Sym::Sig(signal)) = scope.syms.get(n) else {
                    unreachable!("ports are declared signals")
                };
                PortInfo {
                    name: n.clone(),
                    dir: d.dir.unwrap_or(Direction::Input),
                    signal: *signal,
                }
            })
            .collect();

        let mut always_idx = 0;
        for item in &m.items {
            match item {
                Item::Net(n) => {
                    for (id, init) in &n.names {
                        if let Some(e) = init {
                            let lv = ast::LValue::Ident(id.clone());
                            self.cont_assign(&scope, &lv, e, id.span)?;
                        }
                    }
                }
                Item::Assign(a) => self.cont_assign(&scope, &a.lhs, &a.rhs, a.span)?,
                Item::Always(a) => {
                    self.always(&mut scope, a, always_idx)?;
                    always_idx += 1;
                }
                Item::Instance(inst) => self.instance(&scope, inst)?,
                Item::Initial(_, span) => {
                    return Err(ElabError::new(
                        unit,
                        "no-initial",
                        "initial blocks are not supported",
                        *span,
                    ))
                }
                Item::Port(_) | Item::Param(_) | Item::Integer(..) => {}
            }
        }
        self.depth -= 1;
        Ok(ports)
    }

    fn drive(&mut self, scope: &Scope, sig: SignalId, driver: Driver, span: Span) -> EResult<()> {
        let s = &mut self.g.signals[sig.idx()];
        if s.driver != Driver::Undriven {
            return Err(ElabError::new(
                scope.unit,
                "multiple-drivers",
                format!("'{}' has more than one driver", s.name),
                span,
            ));
        }
        s.driver = driver.clone();
        let node = s.node;
        let src = match driver {
            Driver::Node(n) => n,
            Driver::Block(b) => self.g.blocks[b.idx()].node,
            _ => return Ok(()),
        };
        self.g.nodes[node.idx()].fanin = vec![src];
        Ok(())
    }

    fn expr_node(&mut self, e: &Expr) -> NodeId {
        match e {
            Expr::Const(v) => self.add_node(NodeKind::Const(*v), Vec::new()),
            Expr::Signal { id, .. } => self.g.signals[id.idx()].node,
            Expr::Op { op, width, args } => {
                let fanin = args.iter().map(|a| self.expr_node(a)).collect();
                self.add_node(NodeKind::Op { op: *op, width: *width }, fanin)
            }
        }
    }

    fn cont_assign(&mut self, scope: &Scope, lhs: &ast::LValue, rhs: &ast::Expr, span: Span) -> EResult<()> {
        let parts = self.lvalue(scope, lhs)?;
        for p in &parts {
            if p.is_partial(self.g.signals[p.signal.idx()].width) {
                return Err(ElabError::new(
                    scope.unit,
                    "partial-continuous-assign",
                    "continuous assignment to a part-select is not supported",
                    lhs.span(),
                ));
            }
        }
        let total: u32 = parts.iter().map(|p| p.width as u32).sum();
        if total > MAX_WIDTH as u32 {
            return Err(ElabError::new(
                scope.unit,
                "width-limit",
                format!("assignment target is {total} bits wide"),
                lhs.span(),
            ));
        }
        let rhs = self.lower_assign_rhs(scope, rhs, total as u8)?;
        self.connect(scope, &parts, &rhs, span)
    }

    /// Drive `parts` (MSB first) from `rhs` whose width is their total.
    fn connect(&mut self, scope: &Scope, parts: &[LPart], rhs: &Expr, span: Span) -> EResult<()> {
        if let [p] = parts {
            let n = self.expr_node(rhs);
            return self.drive(scope, p.signal, Driver::Node(n), span);
        }
        let src = self.expr_node(rhs);
        let mut lo: u32 = parts.iter().map(|p| p.width as u32).sum();
        for p in parts {
            lo -= p.width as u32;
            let n = self.add_node(
                NodeKind::Op {
                    op: OpKind::Slice { lo: lo as u8 },
                    width: p.width,
                },
                vec![src],
            );
            self.drive(scope, p.signal, Driver::Node(n), span)?;
        }
        Ok(())
    }

    fn instance(&mut self, scope: &Scope, inst: &'a ast::Instance) -> EResult<()> {
        let (cu, child) = self.modules[inst.module.name.as_str()];
        let overridable: Vec<&ast::ParamDecl> = child
            .params
            .iter()
            .chain(child.items.iter().filter_map(|i| match i {
                Item::Param(p) => Some(p),
                _ => None,
            }))
            .filter(|p| !p.local)
            .collect();
        let mut overrides = HashMap::new();
        for (i, (name, e)) in inst.params.iter().enumerate() {
            let v = scope.eval_const(e)?;
            let key = match name {
                Some(n) => n.name.clone(),
                None => match overridable.get(i) {
                    Some(p) => p.name.name.clone(),
                    None => {
                        return Err(ElabError::new(
                            scope.unit,
                            "unknown-parameter",
                            format!("too many parameter overrides for '{}'", inst.module),
                            e.span(),
                        ))
                    }
                },
            };
            overrides.insert(key, (v, const_width(e, v)));
        }
        let prefix = format!("{}.{}", scope.prefix, inst.name);
        let ports = self.module(cu, child, &prefix, overrides, false)?;
        let conns: Vec<(&PortInfo, Option<&ast::Expr>)> = match &inst.conns {
            ast::Connections::Named(c) => {
                let mut out = Vec::new();
                for (pn, e) in c {
                    let Some(p) = ports.iter().find(|p| p.name == pn.name) else {
                        return Err(ElabError::new(
                            scope.unit,
                            "unknown-port",
                            format!("module '{}' has no port '{}'", inst.module, pn),
                            pn.span,
                        ));
                    };
                    out.push((p, e.as_ref()));
                }
                out
            }
            ast::Connections::Ordered(c) => ports.iter().zip(c.iter().map(Some)).collect(),
        };
        for (p, e) in conns {
            let Some(e) = e else { continue };
            let pw = self.g.signals[p.signal.idx()].width;
            let unsized_lit = matches!(e, ast::Expr::Number(n) if n.size.is_none());
            match p.dir {
                Direction::Input => {
                    let ew = self.self_width(scope, e)?;
                    if ew != pw && !unsized_lit {
                        return Err(ElabError::new(
                            scope.unit,
                            "width-mismatch",
                            format!(
                                "width mismatch on port '{}' of '{}': port is {pw} bits, connection is {ew}",
                                p.name, inst.name
                            ),
                            e.span(),
                        ));
                    }
                    let rhs = self.lower_assign_rhs(scope, e, pw)?;
                    self.connect(scope, &[self.full_part(p.signal)], &rhs, e.span())?;
                }
                Direction::Output => {
                    let lv = expr_to_lvalue(e).ok_or_else(|| {
                        ElabError::new(
                            scope.unit,
                            "output-connection",
                            "an output port must connect to a signal or a concatenation of signals",
                            e.span(),
                        )
                    })?;
                    let parts = self.lvalue(scope, &lv)?;
                    let total: u32 = parts.iter().map(|p| p.width as u32).sum();
                    if total != pw as u32 || parts.iter().any(|q| q.is_partial(self.g.signals[q.signal.idx()].width)) {
                        return Err(ElabError::new(
                            scope.unit,
                            "width-mismatch",
                            format!(
                                "width mismatch on port '{}' of '{}': port is {pw} bits, connection is {total}",
                                p.name, inst.name
                            ),
                            e.span(),
                        ));
                    }
                    let src = Expr::Signal {
                        id: p.signal,
                        width: pw,
                    };
                    self.connect(scope, &parts, &src, e.span())?;
                }
            }
        }
        Ok(())
    }

    fn full_part(&self, s: SignalId) -> LPart {
        LPart {
            signal: s,
            sel: Sel::Full,
            width: self.g.signals[s.idx()].width,
        }
    }

    fn always(&mut self, scope: &mut Scope, a: &ast::AlwaysBlock, idx: usize) -> EResult<()> {
        let unit = scope.unit;
        let trigger = match &a.sensitivity {
            ast::Sensitivity::List(items) if items.iter().all(|i| i.edge.is_some()) => {
                let mut v = Vec::new();
                for it in items {
                    let s = self.signal(scope, &it.signal)?;
                    v.push((it.edge.unwrap(), s));
                }
                Trigger::Edge(v)
            }
            _ => Trigger::Comb,
        };
        let mut counter = 0u32;
        let body = self.stmts(scope, &a.body, &mut counter)?;
        let mut reads = BTreeSet::new();
        let mut writes = BTreeSet::new();
        collect_rw(&body, &self.g.signals, &mut reads, &mut writes);
        let label = match &a.body {
            ast::Stmt::Block { label: Some(l), .. } => l.name.clone(),
            _ => format!("always{idx}"),
        };
        let name = format!("{}.{label}", scope.prefix);
        let sensitivity: Vec<SignalId> = match &trigger {
            Trigger::Comb => {
                let exposed = upward_exposed(&body, &self.g.signals);
                if let Some(s) = exposed.intersection(&writes).next() {
                    return Err(ElabError::new(
                        unit,
                        "comb-self-read",
                        format!(
                            "combinational block reads '{}' before assigning it on some path; \
                             assign a default value at the top of the block",
                            self.g.signals[s.idx()].name
                        ),
                        a.span,
                    ));
                }
                reads.difference(&writes).copied().collect()
            }
            Trigger::Edge(v) => {
                let mut s: Vec<SignalId> = v.iter().map(|(_, s)| *s).collect();
                s.dedup();
                s
            }
        };
        let bid = BlockId(self.g.blocks.len() as u32);
        let fanin_sigs: BTreeSet<SignalId> = match trigger {
            Trigger::Comb => sensitivity.iter().copied().collect(),
            Trigger::Edge(_) => reads.iter().chain(&sensitivity).copied().collect(),
        };
        let fanin = fanin_sigs.iter().map(|s| self.g.signals[s.idx()].node).collect();
        let node = self.add_node(NodeKind::Behavioral(bid), fanin);
        self.g.blocks.push(Block {
            name,
            trigger,
            body,
            reads,
            writes: writes.clone(),
            sensitivity,
            node,
            unit,
            span: a.span,
            assign_count: counter,
        });
        for w in writes {
            if !self.g.signals[w.idx()].is_reg {
                return Err(ElabError::new(
                    unit,
                    "wire-procedural-assign",
                    format!("'{}' is not a reg", self.g.signals[w.idx()].name),
                    a.span,
                ));
            }
            self.drive(scope, w, Driver::Block(bid), a.span)?;
        }
        Ok(())
    }

    fn stmts(&mut self, scope: &mut Scope, s: &ast::Stmt, counter: &mut u32) -> EResult<Vec<Stmt>> {
        let mut out = Vec::new();
        self.stmt(scope, s, counter, &mut out)?;
        Ok(out)
    }

    fn stmt(&mut self, scope: &mut Scope, s: &ast::Stmt, counter: &mut u32, out: &mut Vec<Stmt>) -> EResult<()> {
        match s {
            ast::Stmt::Block { stmts, .. } => {
                for st in stmts {
                    self.stmt(scope, st, counter, out)?;
                }
            }
            ast::Stmt::If { cond, then, els, .. } => {
                let cond = self.lower_self(scope, cond)?;
                let then = self.stmts(scope, then, counter)?;
                let els = match els {
                    Some(e) => self.stmts(scope, e, counter)?,
                    None => Vec::new(),
                };
                out.push(Stmt::If { cond, then, els });
            }
            ast::Stmt::Case {
                subject,
                items,
                default,
                ..
            } => {
                let mut w = self.self_width(scope, subject)?;
                let mut labels = Vec::new();
                for it in items {
                    let mut ls = Vec::new();
                    for l in &it.labels {
                        let v = scope.eval_const(l)?;
                        w = w.max(const_width(l, v)).max(self.self_width(scope, l)?);
                        ls.push(v);
                    }
                    labels.push(ls);
                }
                let subject = self.lower_at(scope, subject, w)?;
                let mut arms = Vec::new();
                for (it, ls) in items.iter().zip(labels) {
                    arms.push(CaseArm {
                        labels: ls.into_iter().map(|v| LogicVec::from_u64(w, v)).collect(),
                        body: self.stmts(scope, &it.body, counter)?,
                    });
                }
                let default = match default {
                    Some(d) => self.stmts(scope, d, counter)?,
                    None => Vec::new(),
                };
                out.push(Stmt::Case { subject, arms, default });
            }
            ast::Stmt::For {
                var,
                init,
                cond,
                step,
                body,
                span,
            } => {
                let saved = scope.syms.get(&var.name).copied();
                if !matches!(saved, Some(Sym::Integer) | Some(Sym::Const(..))) {
                    return Err(ElabError::new(
                        scope.unit,
                        "loop-variable",
                        format!("loop variable '{var}' must be declared as integer"),
                        var.span,
                    ));
                }
                let mut v = scope.eval_const(init)?;
                let mut n = 0;
                loop {
                    scope.syms.insert(var.name.clone(), Sym::Const(v, 32));
                    if scope.eval_const(cond)? == 0 {
                        break;
                    }
                    n += 1;
                    if n > MAX_UNROLL {
                        return Err(ElabError::new(
                            scope.unit,
                            "loop-limit",
                            format!("for-loop runs more than {MAX_UNROLL} iterations"),
                            *span,
                        ));
                    }
                    self.stmt(scope, body, counter, out)?;
                    v = scope.eval_const(step)? & 0xffff_ffff;
                }
                match saved {
                    Some(s) => scope.syms.insert(var.name.clone(), s),
                    None => scope.syms.remove(&var.name),
                };
            }
            ast::Stmt::Assign { lhs, rhs, blocking, .. } => {
                let parts = self.lvalue(scope, lhs)?;
                let total: u32 = parts.iter().map(|p| p.width as u32).sum();
                if total > MAX_WIDTH as u32 {
                    return Err(ElabError::new(
                        scope.unit,
                        "width-limit",
                        format!("assignment target is {total} bits wide"),
                        lhs.span(),
                    ));
                }
                let rhs = self.lower_assign_rhs(scope, rhs, total as u8)?;
                out.push(Stmt::Assign {
                    id: *counter,
                    lhs: parts,
                    rhs,
                    blocking: *blocking,
                });
                *counter += 1;
            }
            ast::Stmt::Null(_) => {}
            ast::Stmt::While { span, .. } => {
                return Err(ElabError::new(
                    scope.unit,
                    "no-unbounded-loop",
                    "while loops are not supported",
                    *span,
                ))
            }
            ast::Stmt::SystemTask { span, .. } => {
                return Err(ElabError::new(
                    scope.unit,
                    "no-system-task",
                    "system tasks are not supported",
                    *span,
                ))
            }
        }
        Ok(())
    }

    fn signal(&self, scope: &Scope, id: &ast::Ident) -> EResult<SignalId> {
        match scope.syms.get(&id.name) {
            Some(Sym::Sig(s)) => Ok(*s),
            _ => Err(ElabError::new(
                scope.unit,
                "undeclared-signal",
                format!("'{id}' is not a signal"),
                id.span,
            )),
        }
    }

    fn lvalue(&mut self, scope: &Scope, lv: &ast::LValue) -> EResult<Vec<LPart>> {
        match lv {
            ast::LValue::Ident(id) => {
                let s = self.signal(scope, id)?;
                Ok(vec![self.full_part(s)])
            }
            ast::LValue::Select { base, msb, lsb, span } => {
                let s = self.signal(scope, base)?;
                let sig = &self.g.signals[s.idx()];
                let (sw, slsb) = (sig.width, sig.lsb as u64);
                match lsb {
                    Some(l) => {
                        let (m, l) = (scope.eval_const(msb)?, scope.eval_const(l)?);
                        if m < l || l < slsb || m >= slsb + sw as u64 {
                            return Err(ElabError::new(
                                scope.unit,
                                "index-out-of-range",
                                format!("part-select [{m}:{l}] is outside the declared range"),
                                *span,
                            ));
                        }
                        Ok(vec![LPart {
                            signal: s,
                            sel: Sel::Static { lo: (l - slsb) as u8 },
                            width: (m - l + 1) as u8,
                        }])
                    }
                    None => match self.try_const(scope, msb)? {
                        Some(i) => {
                            if i < slsb || i >= slsb + sw as u64 {
                                return Err(ElabError::new(
                                    scope.unit,
                                    "index-out-of-range",
                                    format!("bit-select [{i}] is outside the declared range"),
                                    *span,
                                ));
                            }
                            Ok(vec![LPart {
                                signal: s,
                                sel: Sel::Static { lo: (i - slsb) as u8 },
                                width: 1,
                            }])
                        }
                        None => {
                            let index = self.dynamic_index(scope, msb, slsb)?;
                            Ok(vec![LPart {
                                signal: s,
                                sel: Sel::Dynamic { index },
                                width: 1,
                            }])
                        }
                    },
                }
            }
            ast::LValue::Concat(parts, _) => {
                let mut out = Vec::new();
                for p in parts {
                    out.extend(self.lvalue(scope, p)?);
                }
                Ok(out)
            }
        }
    }

    fn dynamic_index(&mut self, scope: &Scope, e: &ast::Expr, lsb: u64) -> EResult<Expr> {
        let idx = self.lower_self(scope, e)?;
        if lsb == 0 {
            return Ok(idx);
        }
        let w = idx.width().max(bits_needed(lsb) + 1);
        Ok(mk_op(
            OpKind::Sub,
            w,
            vec![fit(idx, w), Expr::Const(LogicVec::from_u64(w, lsb))],
        ))
    }

    fn try_const(&self, scope: &Scope, e: &ast::Expr) -> EResult<Option<u64>> {
        let mut all_const = true;
        e.for_each_ident(&mut |i| {
            if !matches!(scope.syms.get(&i.name), Some(Sym::Const(..))) {
                all_const = false;
            }
        });
        if all_const {
            scope.eval_const(e).map(Some)
        } else {
            Ok(None)
        }
    }

    fn self_width(&self, scope: &Scope, e: &ast::Expr) -> EResult<u8> {
        use ast::{BinaryOp as B, Expr as E, UnaryOp as U};
        let w: u32 = match e {
            E::Number(n) => match n.size {
                Some(s) => s,
                None => 32.max(bits_needed(n.value) as u32),
            },
            E::Ident(i) => match scope.syms.get(&i.name) {
                Some(Sym::Sig(s)) => self.g.signals[s.idx()].width as u32,
                Some(Sym::Const(_, w)) => *w as u32,
                _ => return Err(self.not_signal(scope, i)),
            },
            E::Select { msb, lsb, .. } => match lsb {
                None => 1,
                Some(l) => {
                    let (m, l) = (scope.eval_const(msb)?, scope.eval_const(l)?);
                    (m.saturating_sub(l) + 1).min(65) as u32
                }
            },
            E::Unary { op, arg, .. } => match op {
                U::Not | U::Neg | U::Plus => self.self_width(scope, arg)? as u32,
                _ => 1,
            },
            E::Binary { op, lhs, rhs, .. } => match op {
                B::Add | B::Sub | B::Mul | B::And | B::Or | B::Xor | B::Xnor => {
                    self.self_width(scope, lhs)?.max(self.self_width(scope, rhs)?) as u32
                }
                B::Shl | B::Shr => self.self_width(scope, lhs)? as u32,
                _ => 1,
            },
            E::Ternary { then, els, .. } => self.self_width(scope, then)?.max(self.self_width(scope, els)?) as u32,
            E::Concat(items, _) => {
                let mut t = 0u32;
                for i in items {
                    t += self.self_width(scope, i)? as u32;
                }
                t
            }
            E::Replicate { count, items, .. } => {
                let n = scope.eval_const(count)?;
                let mut t = 0u32;
                for i in items {
                    t += self.self_width(scope, i)? as u32;
                }
                (n.min(65) as u32).saturating_mul(t)
            }
        };
        if w == 0 || w > MAX_WIDTH as u32 {
            return Err(ElabError::new(
                scope.unit,
                "width-limit",
                format!("expression is {w} bits wide; the limit is {MAX_WIDTH}"),
                e.span(),
            ));
        }
        Ok(w as u8)
    }

    fn not_signal(&self, scope: &Scope, i: &ast::Ident) -> ElabError {
        let msg = match scope.syms.get(&i.name) {
            Some(Sym::Integer) => format!("integer '{i}' may only be used as a loop variable"),
            _ => format!("'{i}' is not declared"),
        };
        ElabError::new(scope.unit, "undeclared-signal", msg, i.span)
    }

    fn lower_self(&mut self, scope: &Scope, e: &ast::Expr) -> EResult<Expr> {
        let w = self.self_width(scope, e)?;
        self.lower_at(scope, e, w)
    }

    fn lower_assign_rhs(&mut self, scope: &Scope, e: &ast::Expr, target: u8) -> EResult<Expr> {
        let w = self.self_width(scope, e)?.max(target);
        let x = self.lower_at(scope, e, w)?;
        Ok(fit(x, target))
    }

    /// Lower `e` in a context of width `w` (never narrower than its own
    /// width for context-determined operators).
    fn lower_at(&mut self, scope: &Scope, e: &ast::Expr, w: u8) -> EResult<Expr> {
        use ast::{BinaryOp as B, Expr as E, UnaryOp as U};
        Ok(match e {
            E::Number(n) => {
                let v = match n.size {
                    Some(s) if s < 64 => n.value & ((1u64 << s) - 1),
                    _ => n.value,
                };
                Expr::Const(LogicVec::from_u64(w, v))
            }
            E::Ident(i) => match scope.syms.get(&i.name) {
                Some(Sym::Sig(s)) => fit(
                    Expr::Signal {
                        id: *s,
                        width: self.g.signals[s.idx()].width,
                    },
                    w,
                ),
                Some(Sym::Const(v, _)) => Expr::Const(LogicVec::from_u64(w, *v)),
                _ => return Err(self.not_signal(scope, i)),
            },
            E::Select { base, msb, lsb, span } => {
                let (basex, bw, blsb) = match scope.syms.get(&base.name) {
                    Some(Sym::Sig(s)) => {
                        let sig = &self.g.signals[s.idx()];
                        (
                            Expr::Signal {
                                id: *s,
                                width: sig.width,
                            },
                            sig.width,
                            sig.lsb as u64,
                        )
                    }
                    Some(Sym::Const(v, cw)) => (Expr::Const(LogicVec::from_u64(*cw, *v)), *cw, 0),
                    _ => return Err(self.not_signal(scope, base)),
                };
                let sel = match lsb {
                    Some(l) => {
                        let (m, l) = (scope.eval_const(msb)?, scope.eval_const(l)?);
                        if m < l || l < blsb || m >= blsb + bw as u64 {
                            return Err(ElabError::new(
                                scope.unit,
                                "index-out-of-range",
                                format!("part-select [{m}:{l}] is outside the declared range"),
                                *span,
                            ));
                        }
                        mk_op(OpKind::Slice { lo: (l - blsb) as u8 }, (m - l + 1) as u8, vec![basex])
                    }
                    None => match self.try_const(scope, msb)? {
                        Some(i) => {
                            if i < blsb || i >= blsb + bw as u64 {
                                return Err(ElabError::new(
                                    scope.unit,
                                    "index-out-of-range",
                                    format!("bit-select [{i}] is outside the declared range"),
                                    *span,
                                ));
                            }
                            mk_op(OpKind::Slice { lo: (i - blsb) as u8 }, 1, vec![basex])
                        }
                        None => {
                            let idx = self.dynamic_index(scope, msb, blsb)?;
                            mk_op(OpKind::Index, 1, vec![basex, idx])
                        }
                    },
                };
                fit(sel, w)
            }
            E::Unary { op, arg, .. } => match op {
                U::Plus => self.lower_at(scope, arg, w)?,
                U::Not => mk_op(OpKind::Not, w, vec![self.lower_at(scope, arg, w)?]),
                U::Neg => mk_op(OpKind::Neg, w, vec![self.lower_at(scope, arg, w)?]),
                U::LogNot | U::RedAnd | U::RedOr | U::RedXor => {
                    let k = match op {
                        U::LogNot => OpKind::LogNot,
                        U::RedAnd => OpKind::RedAnd,
                        U::RedOr => OpKind::RedOr,
                        _ => OpKind::RedXor,
                    };
                    let a = self.lower_self(scope, arg)?;
                    fit(mk_op(k, 1, vec![a]), w)
                }
            },
            E::Binary { op, lhs, rhs, .. } => {
                let k = match op {
                    B::Add => OpKind::Add,
                    B::Sub => OpKind::Sub,
                    B::Mul => OpKind::Mul,
                    B::And => OpKind::And,
                    B::Or => OpKind::Or,
                    B::Xor => OpKind::Xor,
                    B::Xnor => OpKind::Xnor,
                    B::LogAnd => OpKind::LogAnd,
                    B::LogOr => OpKind::LogOr,
                    B::Eq => OpKind::Eq,
                    B::Ne => OpKind::Ne,
                    B::Lt => OpKind::Lt,
                    B::Le => OpKind::Le,
                    B::Gt => OpKind::Gt,
                    B::Ge => OpKind::Ge,
                    B::Shl => OpKind::Shl,
                    B::Shr => OpKind::Shr,
                };
                match op {
                    B::Add | B::Sub | B::Mul | B::And | B::Or | B::Xor | B::Xnor => {
                        let a = self.lower_at(scope, lhs, w)?;
                        let b = self.lower_at(scope, rhs, w)?;
                        mk_op(k, w, vec![a, b])
                    }
                    B::Shl | B::Shr => {
                        let a = self.lower_at(scope, lhs, w)?;
                        let b = self.lower_self(scope, rhs)?;
                        mk_op(k, w, vec![a, b])
                    }
                    B::LogAnd | B::LogOr => {
                        let a = self.lower_self(scope, lhs)?;
                        let b = self.lower_self(scope, rhs)?;
                        fit(mk_op(k, 1, vec![a, b]), w)
                    }
                    _ => {
                        let m = self.self_width(scope, lhs)?.max(self.self_width(scope, rhs)?);
                        let a = self.lower_at(scope, lhs, m)?;
                        let b = self.lower_at(scope, rhs, m)?;
                        fit(mk_op(k, 1, vec![a, b]), w)
                    }
                }
            }
            E::Ternary { cond, then, els, .. } => {
                let c = self.lower_self(scope, cond)?;
                let t = self.lower_at(scope, then, w)?;
                let f = self.lower_at(scope, els, w)?;
                mk_op(OpKind::Mux, w, vec![c, t, f])
            }
            E::Concat(items, _) => {
                let total = self.self_width(scope, e)?;
                let mut args = Vec::new();
                for i in items {
                    args.push(self.lower_self(scope, i)?);
                }
                fit(concat(total, args), w)
            }
            E::Replicate { count, items, .. } => {
                let total = self.self_width(scope, e)?;
                let n = scope.eval_const(count)?;
                let mut one = Vec::new();
                for i in items {
                    one.push(self.lower_self(scope, i)?);
                }
                let mut args = Vec::new();
                for _ in 0..n {
                    args.extend(one.iter().cloned());
                }
                fit(concat(total, args), w)
            }
        })
    }

    fn finish(mut self) -> EResult<RtlGraph> {
        let g = &mut self.g;
        for s in &g.signals {
            if s.driver == Driver::Undriven {
                g.warnings.push((
                    s.unit,
                    Diagnostic::new("undriven", format!("'{}' has no driver and stays X", s.name), s.span),
                ));
            }
        }
        let n = g.nodes.len();
        for i in 0..n {
            let fanin = g.nodes[i].fanin.clone();
            for f in fanin {
                g.nodes[f.idx()].fanout.push(NodeId(i as u32));
            }
        }
        for node in &mut g.nodes {
            node.fanout.sort();
            node.fanout.dedup();
        }
        // Kahn's algorithm over combinational edges. Outputs of edge-triggered
        // blocks are state, so the edge block -> signal arcs are cut.
        let is_seq = |g: &RtlGraph, id: usize| match g.nodes[id].kind {
            NodeKind::Behavioral(b) => !g.blocks[b.idx()].is_comb(),
            _ => false,
        };
        let comb_edge = |g: &RtlGraph, from: usize| !is_seq(g, from);
        let mut indeg = vec![0u32; n];
        for (i, node) in g.nodes.iter().enumerate() {
            let distinct: BTreeSet<NodeId> = node.fanin.iter().copied().collect();
            indeg[i] = distinct.iter().filter(|f| comb_edge(g, f.idx())).count() as u32;
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|i| indeg[*i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = queue.pop_front() {
            order.push(i);
            if !comb_edge(g, i) {
                continue;
            }
            let fo = g.nodes[i].fanout.clone();
            for f in fo {
                indeg[f.idx()] -= 1;
                if indeg[f.idx()] == 0 {
                    queue.push_back(f.idx());
                }
            }
        }
        if order.len() != n {
            let stuck: Vec<String> = (0..n)
                .filter(|i| indeg[*i] > 0)
                .filter_map(|i| match &g.nodes[i].kind {
                    NodeKind::Signal(s) => Some(g.signals[s.idx()].name.clone()),
                    NodeKind::Behavioral(b) => Some(g.blocks[b.idx()].name.clone()),
                    _ => None,
                })
                .take(6)
                .collect();
            let (unit, span) = (0..n)
                .filter(|i| indeg[*i] > 0)
                .find_map(|i| match g.nodes[i].kind {
                    NodeKind::Signal(s) => Some((g.signals[s.idx()].unit, g.signals[s.idx()].span)),
                    _ => None,
                })
                .unwrap_or((0, Span::default()));
            return Err(ElabError::new(
                unit,
                "combinational-loop",
                format!("combinational loop through {}", stuck.join(", ")),
                span,
            ));
        }
        for (rank, i) in order.iter().enumerate() {
            g.nodes[*i].rank = rank as u32;
        }
        g.comb_order = order
            .into_iter()
            .filter(|i| !is_seq(g, *i))
            .map(|i| NodeId(i as u32))
            .collect();
        Ok(self.g)
    }
}

fn expr_to_lvalue(e: &ast::Expr) -> Option<ast::LValue> {
    match e {
        ast::Expr::Ident(i) => Some(ast::LValue::Ident(i.clone())),
        ast::Expr::Select { base, msb, lsb, span } => Some(ast::LValue::Select {
            base: base.clone(),
            msb: msb.clone(),
            lsb: lsb.clone(),
            span: *span,
        }),
        ast::Expr::Concat(items, span) => Some(ast::LValue::Concat(
            items.iter().map(expr_to_lvalue).collect::<Option<_>>()?,
            *span,
        )),
        _ => None,
    }
}

fn const_width(e: &ast::Expr, v: u64) -> u8 {
    match e {
        ast::Expr::Number(n) if n.size.is_some() => n.size.unwrap().min(64) as u8,
        _ => 32.max(bits_needed(v)),
    }
}

/// Build an operator, folding it when every operand is constant.
pub fn mk_op(op: OpKind, width: u8, args: Vec<Expr>) -> Expr {
    if args.iter().all(|a| matches!(a, Expr::Const(_))) {
        let vals: Vec<LogicVec> = args
            .iter()
            .map(|a| match a {
                Expr::Const(v) => *v,
                _ => unreachable!(),
            })
            .collect();
        return Expr::Const(eval_op(op, width, &vals));
    }
    Expr::Op { op, width, args }
}

fn concat(width: u8, args: Vec<Expr>) -> Expr {
    if args.len() == 1 {
        return args.into_iter().next().unwrap();
    }
    mk_op(OpKind::Concat, width, args)
}

fn fit(e: Expr, w: u8) -> Expr {
    if e.width() == w {
        e
    } else {
        mk_op(OpKind::Resize, w, vec![e])
    }
}

fn collect_rw(body: &[Stmt], sigs: &[Signal], reads: &mut BTreeSet<SignalId>, writes: &mut BTreeSet<SignalId>) {
    for s in body {
        match s {
            Stmt::Assign { lhs, rhs, .. } => {
                rhs.for_each_signal(&mut |id| {
                    reads.insert(id);
                });
                for p in lhs {
                    writes.insert(p.signal);
                    if p.is_partial(sigs[p.signal.idx()].width) {
                        reads.insert(p.signal);
                    }
                    if let Sel::Dynamic { index } = &p.sel {
                        index.for_each_signal(&mut |id| {
                            reads.insert(id);
                        });
                    }
                }
            }
            Stmt::If { cond, then, els } => {
                cond.for_each_signal(&mut |id| {
                    reads.insert(id);
                });
                collect_rw(then, sigs, reads, writes);
                collect_rw(els, sigs, reads, writes);
            }
            Stmt::Case { subject, arms, default } => {
                subject.for_each_signal(&mut |id| {
                    reads.insert(id);
                });
                for a in arms {
                    collect_rw(&a.body, sigs, reads, writes);
                }
                collect_rw(default, sigs, reads, writes);
            }
        }
    }
}

/// Signals a statement list may read before writing them on some path.
/// A blocking write defines its whole target; a partial write also reads
/// it first. Nonblocking writes never define anything locally.
pub fn upward_exposed(body: &[Stmt], sigs: &[Signal]) -> BTreeSet<SignalId> {
    let mut exposed = BTreeSet::new();
    let mut defined = BTreeSet::new();
    exposed_walk(body, sigs, &mut defined, &mut exposed);
    exposed
}

fn exposed_walk(body: &[Stmt], sigs: &[Signal], defined: &mut BTreeSet<SignalId>, exposed: &mut BTreeSet<SignalId>) {
    let read = |e: &Expr, defined: &BTreeSet<SignalId>, exposed: &mut BTreeSet<SignalId>| {
        e.for_each_signal(&mut |id| {
            if !defined.contains(&id) {
                exposed.insert(id);
            }
        })
    };
    for s in body {
        match s {
            Stmt::Assign { lhs, rhs, blocking, .. } => {
                read(rhs, defined, exposed);
                for p in lhs {
                    if let Sel::Dynamic { index } = &p.sel {
                        read(index, defined, exposed);
                    }
                    if p.is_partial(sigs[p.signal.idx()].width) && !defined.contains(&p.signal) {
                        exposed.insert(p.signal);
                    }
                }
                if *blocking {
                    defined.extend(lhs.iter().map(|p| p.signal));
                }
            }
            Stmt::If { cond, then, els } => {
                read(cond, defined, exposed);
                let mut d1 = defined.clone();
                exposed_walk(then, sigs, &mut d1, exposed);
                let mut d2 = defined.clone();
                exposed_walk(els, sigs, &mut d2, exposed);
                *defined = d1.intersection(&d2).copied().collect();
            }
            Stmt::Case { subject, arms, default } => {
                read(subject, defined, exposed);
                let mut acc: Option<BTreeSet<SignalId>> = None;
                for body in arms.iter().map(|a| &a.body).chain(std::iter::once(default)) {
                    let mut d = defined.clone();
                    exposed_walk(body, sigs, &mut d, exposed);
                    acc = Some(match acc {
                        None => d,
                        Some(a) => a.intersection(&d).copied().collect(),
                    });
                }
                *defined = acc.unwrap_or_default();
            }
        }
    }
}

impl RtlGraph {
    pub fn signal_by_name(&self, name: &str) -> Option<SignalId> {
        self.signals
            .iter()
            .position(|s| s.name == name)
            .map(|i| SignalId(i as u32))
    }

    pub fn signal(&self, id: SignalId) -> &Signal {
        &self.signals[id.idx()]
    }

    pub fn block(&self, id: BlockId) -> &Block {
        &self.blocks[id.idx()]
    }

    /// `(name, width)` of every signal in declaration order.
    /// Every signal sorted by hierarchical name.
    pub fn list_signals(&self) -> Vec<SignalRow> {
        let mut rows: Vec<SignalRow> = self
            .signals
            .iter()
            .enumerate()
            .map(|(i, s)| SignalRow {
                id: SignalId(i as u32),
                name: s.name.clone(),
                width: s.width,
                net: if s.is_reg { NetKind::Reg } else { NetKind::Wire },
            })
            .collect();
        rows.sort_by(|a, b| a.name.cmp(&b.name));
        rows
    }

    pub fn location(&self, unit: usize, span: Span) -> String {
        match self.files.get(unit) {
            Some((f, lines)) => {
                let (l, c) = lines.line_col(span.start);
                format!("{f}:{l}:{c}")
            }
            None => String::from("?"),
        }
    }

    pub fn expr_string(&self, e: &Expr) -> String {
        match e {
            Expr::Const(v) => {
                if v.is_known() {
                    format!("{}'d{}", v.width(), v.bits())
                } else {
                    format!("{}'b{v}", v.width())
                }
            }
            Expr::Signal { id, .. } => self.signals[id.idx()].name.clone(),
            Expr::Op { op, width, args } => {
                let a: Vec<String> = args.iter().map(|x| self.expr_string(x)).collect();
                match (op, a.as_slice()) {
                    (OpKind::Mux, [c, t, f]) => format!("({c} ? {t} : {f})"),
                    (OpKind::Concat, _) => format!("{{{}}}", a.join(", ")),
                    (OpKind::Slice { lo }, [x]) => {
                        if *width == 1 {
                            format!("{x}[{lo}]")
                        } else {
                            format!("{x}[{}:{lo}]", *lo as u32 + *width as u32 - 1)
                        }
                    }
                    (OpKind::Index, [x, i]) => format!("{x}[{i}]"),
                    (OpKind::Resize, [x]) => format!("{width}'({x})"),
                    (_, [x]) => format!("{}{x}", op.symbol()),
                    (_, [x, y]) => format!("({x} {} {y})", op.symbol()),
                    _ => format!("{}({})", op.symbol(), a.join(", ")),
                }
            }
        }
    }

    pub fn node_label(&self, id: NodeId) -> String {
        match &self.nodes[id.idx()].kind {
            NodeKind::Const(v) => format!("const {v}"),
            NodeKind::Op { op, width } => format!("{op:?}/{width}"),
            NodeKind::Signal(s) => self.signals[s.idx()].name.clone(),
            NodeKind::Behavioral(b) => self.blocks[b.idx()].name.clone(),
        }
    }

    pub fn to_json(&self) -> Value {
        let signals: Vec<Value> = self
            .signals
            .iter()
            .enumerate()
            .map(|(i, s)| {
                json!({
                    "id": i,
                    "name": s.name,
                    "width": s.width,
                    "reg": s.is_reg,
                    "port": s.port.map(|d| match d {
                        Direction::Input => "input",
                        Direction::Output => "output",
                    }),
                    "node": s.node.0,
                })
            })
            .collect();
        let nodes: Vec<Value> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let mut v = json!({
                    "id": i,
                    "fanin": n.fanin.iter().map(|f| f.0).collect::<Vec<_>>(),
                    "rank": n.rank,
                });
                let o = v.as_object_mut().unwrap();
                match &n.kind {
                    NodeKind::Const(c) => {
                        o.insert("kind".into(), json!("const"));
                        o.insert("value".into(), json!(c.to_string()));
                        o.insert("width".into(), json!(c.width()));
                    }
                    NodeKind::Op { op, width } => {
                        o.insert("kind".into(), json!("op"));
                        o.insert("op".into(), serde_json::to_value(op).unwrap());
                        o.insert("width".into(), json!(width));
                    }
                    NodeKind::Signal(s) => {
                        o.insert("kind".into(), json!("signal"));
                        o.insert("signal".into(), json!(s.0));
                    }
                    NodeKind::Behavioral(b) => {
                        o.insert("kind".into(), json!("behavioral"));
                        o.insert("block".into(), json!(b.0));
                    }
                }
                v
            })
            .collect();
        let names = |set: &mut dyn Iterator<Item = &SignalId>| -> Vec<String> {
            set.map(|s| self.signals[s.idx()].name.clone()).collect()
        };
        let blocks: Vec<Value> = self
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| {
                json!({
                    "id": i,
                    "name": b.name,
                    "trigger": match &b.trigger {
                        Trigger::Comb => json!("comb"),
                        Trigger::Edge(es) => json!(es.iter().map(|(e, s)| format!(
                            "{} {}",
                            match e { Edge::Posedge => "posedge", Edge::Negedge => "negedge" },
                            self.signals[s.idx()].name
                        )).collect::<Vec<_>>()),
                    },
                    "reads": names(&mut b.reads.iter()),
                    "writes": names(&mut b.writes.iter()),
                    "sensitivity": names(&mut b.sensitivity.iter()),
                    "node": b.node.0,
                    "location": self.location(b.unit, b.span),
                })
            })
            .collect();
        json!({
            "top": self.top,
            "signals": signals,
            "nodes": nodes,
            "blocks": blocks,
            "inputs": names(&mut self.inputs.iter()),
            "outputs": names(&mut self.outputs.iter()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_design;

    pub(crate) fn elab(src: &str) -> RtlGraph {
        let u = parse_design(src).unwrap();
        elaborate(&[u], None).unwrap_or_else(|e| panic!("{e}"))
    }

    #[test]
    fn list_signals_is_sorted_by_name() {
        let g = elab(
            "module top(input clk, input s, input a, input b, output reg q);
               always @(posedge clk) if (s) q <= a; else q <= b;
             endmodule",
        );
        let names: Vec<String> = g.list_signals().into_iter().map(|r| r.name).collect();
        assert_eq!(names, ["top.a", "top.b", "top.clk", "top.q", "top.s"]);
        let q = g.list_signals().into_iter().find(|r| r.name == "top.q").unwrap();
        assert_eq!((q.net, q.width), (NetKind::Reg, 1));
    }

    #[test]
    fn list_signals_matches_declarations() {
        let src = "module top(input clk, input [1:0] sel, input [3:0] a, input [3:0] b, output [3:0] y);
                     wire [3:0] m = sel[0] ? a : b;
                     wire [3:0] n;
                     reg [3:0] r;
                     assign n = m ^ a;
                     always @(posedge clk) if (sel[1]) r <= n; else r <= m;
                     assign y = r;
                   endmodule";
        let unit = parse_design(src).unwrap();
        let mut declared = BTreeSet::new();
        let m = &unit.modules[0];
        if let ast::PortList::Ansi(ports) = &m.ports {
            for p in ports {
                declared.extend(p.names.iter().map(|n| format!("top.{}", n.name)));
            }
        }
        for item in &m.items {
            if let Item::Net(n) = item {
                declared.extend(n.names.iter().map(|(n, _)| format!("top.{}", n.name)));
            }
        }
        let g = elaborate(&[unit], None).unwrap();
        let listed: BTreeSet<String> = g.list_signals().into_iter().map(|r| r.name).collect();
        assert_eq!(listed, declared);
    }

    #[test]
    fn flattened_names_carry_instance_prefixes() {
        let g = elab(
            "module leaf(input i, output o); wire t = ~i; assign o = t; endmodule
             module top(input a, output y, output z);
               leaf u0(.i(a), .o(y));
               leaf u1(.i(a), .o(z));
             endmodule",
        );
        let names: Vec<String> = g.list_signals().into_iter().map(|r| r.name).collect();
        assert!(names.contains(&"top.u0.t".to_string()));
        assert!(names.contains(&"top.u1.i".to_string()));
    }

    fn elab_err(src: &str) -> String {
        let u = parse_design(src).unwrap();
        elaborate(&[u], None).unwrap_err().rule().to_string()
    }

    #[test]
    fn mux_ff() {
        let g = elab(
            "module mux_ff(input clk, input s, input a, input b, output reg q);
               always @(posedge clk) q <= s ? a : b;
             endmodule",
        );
        assert_eq!(g.signals.len(), 5);
        assert_eq!(g.signals[0].name, "mux_ff.clk");
        assert_eq!(g.blocks.len(), 1);
        let b = &g.blocks[0];
        assert_eq!(b.sensitivity, vec![SignalId(0)]);
        assert_eq!(b.reads.len(), 3);
        assert!(matches!(b.trigger, Trigger::Edge(_)));
        assert_eq!(g.inputs.len(), 4);
        assert_eq!(g.outputs, vec![SignalId(4)]);
    }

    #[test]
    fn widths_follow_context() {
        let g = elab(
            "module t(input [3:0] a, input [3:0] b, output [4:0] s, output c);
               assign s = a + b;
               assign c = a < b;
             endmodule",
        );
        // the add is evaluated at 5 bits so the carry survives
        let add = g
            .nodes
            .iter()
            .find(|n| matches!(n.kind, NodeKind::Op { op: OpKind::Add, .. }))
            .unwrap();
        assert_eq!(
            add.kind,
            NodeKind::Op {
                op: OpKind::Add,
                width: 5
            }
        );
        let lt = g
            .nodes
            .iter()
            .find(|n| matches!(n.kind, NodeKind::Op { op: OpKind::Lt, .. }))
            .unwrap();
        assert_eq!(
            lt.kind,
            NodeKind::Op {
                op: OpKind::Lt,
                width: 1
            }
        );
    }

    #[test]
    fn hierarchy_and_params() {
        let g = elab(
            "module inc #(parameter W = 4)(input [W-1:0] x, output [W-1:0] y);
               assign y = x + 1;
             endmodule
             module top(input [7:0] a, output [7:0] b);
               inc #(.W(8)) u1(.x(a), .y(b));
             endmodule",
        );
        assert!(g.signal_by_name("top.u1.x").is_some());
        assert_eq!(g.signal(g.signal_by_name("top.u1.y").unwrap()).width, 8);
    }

    #[test]
    fn port_width_mismatch() {
        let r = elab_err(
            "module c(input [3:0] x, output y); assign y = ^x; endmodule
             module top(input [7:0] a, output b); c u(.x(a), .y(b)); endmodule",
        );
        assert_eq!(r, "width-mismatch");
    }

    #[test]
    fn comb_loops_rejected() {
        let r = elab_err("module t(input a, output w); wire v; assign w = v & a; assign v = ~w; endmodule");
        assert_eq!(r, "combinational-loop");
        let r = elab_err(
            "module t(input a, output reg w, output reg v);
               always @(*) w = v & a;
               always @(*) v = ~w;
             endmodule",
        );
        assert_eq!(r, "combinational-loop");
    }

    #[test]
    fn repeated_operand_is_not_a_loop() {
        let g = elab("module t(input [1:0] a, output [3:0] y); assign y = {a, a}; endmodule");
        let y = g.signal(g.signal_by_name("t.y").unwrap()).node;
        assert!(g.comb_order.contains(&y));
    }

    #[test]
    fn registers_break_loops() {
        let g = elab(
            "module t(input clk, output reg [7:0] c);
               always @(posedge clk) c <= c + 1;
             endmodule",
        );
        let c = g.signal_by_name("t.c").unwrap();
        assert_eq!(g.blocks[0].reads.iter().copied().collect::<Vec<_>>(), vec![c]);
        assert!(g
            .comb_order
            .iter()
            .all(|n| g.nodes[n.idx()].kind != NodeKind::Behavioral(BlockId(0))));
    }

    #[test]
    fn comb_self_read() {
        let r = elab_err(
            "module t(input [1:0] a, output reg [1:0] q);
               always @(*) q[0] = a[0];
             endmodule",
        );
        assert_eq!(r, "comb-self-read");
        elab(
            "module t(input [1:0] a, output reg [1:0] q);
               always @(*) begin q = 2'b00; q[0] = a[0]; end
             endmodule",
        );
    }

    #[test]
    fn loops_unroll() {
        let g = elab(
            "module t(input [3:0] a, output reg [3:0] q);
               integer i;
               always @(*) begin
                 q = 4'd0;
                 for (i = 0; i < 4; i = i + 1) q[i] = a[3 - i];
               end
             endmodule",
        );
        assert_eq!(g.blocks[0].assign_count, 5);
    }

    #[test]
    fn undriven_warns() {
        let g = elab("module t(input a, output w); wire v; assign w = a; endmodule");
        assert_eq!(g.warnings.len(), 1);
        assert_eq!(g.warnings[0].1.rule, "undriven");
    }

    #[test]
    fn top_errors() {
        let u = parse_design("module a; endmodule module b; endmodule").unwrap();
        let e = elaborate(std::slice::from_ref(&u), None).unwrap_err();
        assert_eq!(e.rule(), "ambiguous-top");
        let e = elaborate(&[u], Some("c")).unwrap_err();
        assert_eq!(e.rule(), "top-not-found");
    }

    #[test]
    fn upward_exposed_uses_must_defined() {
        let g = elab(
            "module t(input s, input a, input b, output reg q, output reg r);
               always @(*) begin
                 if (s) r = a; else r = b;
                 q = r;
               end
             endmodule",
        );
        let ex = upward_exposed(&g.blocks[0].body, &g.signals);
        let names: Vec<&str> = ex.iter().map(|s| g.signal(*s).name.as_str()).collect();
        assert_eq!(names, vec!["t.s", "t.a", "t.b"]);
    }
}
