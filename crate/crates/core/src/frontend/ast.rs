//! Syntax tree of the supported HDL subset. Every node carries a byte
//! [`Span`] into the original source.

use std::fmt;

use serde::Serialize;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Span {
    pub start: u32,
    pub end: u32,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span {
            start: start as u32,
            end: end as u32,
        }
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start as usize..self.end as usize
    }
}

/// Byte offset to 1-based (line, column) mapping.
#[derive(Clone, Debug, Default)]
pub struct LineMap {
    starts: Vec<u32>,
}

impl LineMap {
    pub fn new(src: &str) -> Self {
        let mut starts = vec![0];
        starts.extend(
            src.bytes()
                .enumerate()
                .filter(|(_, b)| *b == b'\n')
                .map(|(i, _)| i as u32 + 1),
        );
        LineMap { starts }
    }

    pub fn line_col(&self, offset: u32) -> (usize, usize) {
        let line = match self.starts.binary_search(&offset) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        (line + 1, (offset - self.starts[line]) as usize + 1)
    }
}

#[derive(Clone, Debug)]
pub struct SourceUnit {
    pub file: String,
    pub modules: Vec<ModuleDecl>,
    pub lines: LineMap,
}

/// Two units are structurally equal when their modules are; file names and
/// line maps are presentation details.
impl PartialEq for SourceUnit {
    fn eq(&self, other: &Self) -> bool {
        self.modules == other.modules
    }
}

impl SourceUnit {
    pub fn module(&self, name: &str) -> Option<&ModuleDecl> {
        self.modules.iter().find(|m| m.name.name == name)
    }

    /// Merge several parsed files into one unit (used for multi-file designs).
    pub fn merge(units: Vec<SourceUnit>) -> SourceUnit {
        let mut it = units.into_iter();
        let mut first = it.next().unwrap_or_else(|| SourceUnit {
            file: String::new(),
            modules: Vec::new(),
            lines: LineMap::default(),
        });
        for u in it {
            first.modules.extend(u.modules);
        }
        first
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Input,
    Output,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NetKind {
    Wire,
    Reg,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Range {
    pub msb: Expr,
    pub lsb: Expr,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModuleDecl {
    pub name: Ident,
    pub params: Vec<ParamDecl>,
    pub ports: PortList,
    pub items: Vec<Item>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PortList {
    /// `module m(input a, output reg [3:0] q);`
    Ansi(Vec<PortDecl>),
    /// `module m(a, q);` with directions declared in the body.
    Names(Vec<Ident>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PortDecl {
    pub dir: Direction,
    pub kind: Option<NetKind>,
    pub range: Option<Range>,
    pub names: Vec<Ident>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetDecl {
    pub kind: NetKind,
    pub range: Option<Range>,
    /// Name and optional net initializer (`wire w = a & b;`).
    pub names: Vec<(Ident, Option<Expr>)>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamDecl {
    pub local: bool,
    pub name: Ident,
    pub value: Expr,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Item {
    Port(PortDecl),
    Net(NetDecl),
    Integer(Vec<Ident>, Span),
    Param(ParamDecl),
    Assign(ContAssign),
    Always(AlwaysBlock),
    Initial(Stmt, Span),
    Instance(Instance),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContAssign {
    pub lhs: LValue,
    pub rhs: Expr,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Posedge,
    Negedge,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventItem {
    pub edge: Option<Edge>,
    pub signal: Ident,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sensitivity {
    /// `@(*)` or `@*`
    Star,
    List(Vec<EventItem>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlwaysBlock {
    pub sensitivity: Sensitivity,
    pub body: Stmt,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub module: Ident,
    pub params: Vec<(Option<Ident>, Expr)>,
    pub name: Ident,
    pub conns: Connections,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Connections {
    Named(Vec<(Ident, Option<Expr>)>),
    Ordered(Vec<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseItem {
    pub labels: Vec<Expr>,
    pub body: Stmt,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    Block {
        label: Option<Ident>,
        stmts: Vec<Stmt>,
        span: Span,
    },
    If {
        cond: Expr,
        then: Box<Stmt>,
        els: Option<Box<Stmt>>,
        span: Span,
    },
    Case {
        subject: Expr,
        items: Vec<CaseItem>,
        default: Option<Box<Stmt>>,
        span: Span,
    },
    /// `for (var = init; cond; var = step) body`
    For {
        var: Ident,
        init: Expr,
        cond: Expr,
        step: Expr,
        body: Box<Stmt>,
        span: Span,
    },
    While {
        cond: Expr,
        body: Box<Stmt>,
        span: Span,
    },
    Assign {
        lhs: LValue,
        rhs: Expr,
        blocking: bool,
        span: Span,
    },
    SystemTask {
        name: Ident,
        args: Vec<Expr>,
        span: Span,
    },
    Null(Span),
}

impl Stmt {
    pub fn span(&self) -> Span {
        match self {
            Stmt::Block { span, .. }
            | Stmt::If { span, .. }
            | Stmt::Case { span, .. }
            | Stmt::For { span, .. }
            | Stmt::While { span, .. }
            | Stmt::Assign { span, .. }
            | Stmt::SystemTask { span, .. }
            | Stmt::Null(span) => *span,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LValue {
    Ident(Ident),
    /// `base[msb]` or `base[msb:lsb]`
    Select {
        base: Ident,
        msb: Box<Expr>,
        lsb: Option<Box<Expr>>,
        span: Span,
    },
    Concat(Vec<LValue>, Span),
}

impl LValue {
    pub fn span(&self) -> Span {
        match self {
            LValue::Ident(i) => i.span,
            LValue::Select { span, .. } | LValue::Concat(_, span) => *span,
        }
    }

    /// Every base identifier written by this lvalue, left to right.
    pub fn targets(&self) -> Vec<&Ident> {
        match self {
            LValue::Ident(i) => vec![i],
            LValue::Select { base, .. } => vec![base],
            LValue::Concat(parts, _) => parts.iter().flat_map(|p| p.targets()).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NumBase {
    Dec,
    Bin,
    Oct,
    Hex,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Number {
    /// Explicit bit width (`8'hff`), `None` for unsized literals.
    pub size: Option<u32>,
    /// `None` for plain decimal literals without a base specifier.
    pub base: Option<NumBase>,
    pub value: u64,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Not,
    LogNot,
    Neg,
    Plus,
    RedAnd,
    RedOr,
    RedXor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    And,
    Or,
    Xor,
    Xnor,
    LogAnd,
    LogOr,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Shl,
    Shr,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        use BinaryOp::*;
        match self {
            Add => "+",
            Sub => "-",
            Mul => "*",
            And => "&",
            Or => "|",
            Xor => "^",
            Xnor => "~^",
            LogAnd => "&&",
            LogOr => "||",
            Eq => "==",
            Ne => "!=",
            Lt => "<",
            Le => "<=",
            Gt => ">",
            Ge => ">=",
            Shl => "<<",
            Shr => ">>",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        use BinaryOp::*;
        match self {
            LogOr => 1,
            LogAnd => 2,
            Or => 3,
            Xor | Xnor => 4,
            And => 5,
            Eq | Ne => 6,
            Lt | Le | Gt | Ge => 7,
            Shl | Shr => 8,
            Add | Sub => 9,
            Mul => 10,
        }
    }
}

impl UnaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Not => "~",
            UnaryOp::LogNot => "!",
            UnaryOp::Neg => "-",
            UnaryOp::Plus => "+",
            UnaryOp::RedAnd => "&",
            UnaryOp::RedOr => "|",
            UnaryOp::RedXor => "^",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Number(Number),
    Ident(Ident),
    Select {
        base: Ident,
        msb: Box<Expr>,
        lsb: Option<Box<Expr>>,
        span: Span,
    },
    Unary {
        op: UnaryOp,
        arg: Box<Expr>,
        span: Span,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        span: Span,
    },
    Ternary {
        cond: Box<Expr>,
        then: Box<Expr>,
        els: Box<Expr>,
        span: Span,
    },
    Concat(Vec<Expr>, Span),
    Replicate {
        count: Box<Expr>,
        items: Vec<Expr>,
        span: Span,
    },
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Expr::Number(n) => n.span,
            Expr::Ident(i) => i.span,
            Expr::Select { span, .. }
            | Expr::Unary { span, .. }
            | Expr::Binary { span, .. }
            | Expr::Ternary { span, .. }
            | Expr::Concat(_, span)
            | Expr::Replicate { span, .. } => *span,
        }
    }

    /// Visit every identifier referenced by this expression.
    pub fn for_each_ident<'a>(&'a self, f: &mut dyn FnMut(&'a Ident)) {
        match self {
            Expr::Number(_) => {}
            Expr::Ident(i) => f(i),
            Expr::Select { base, msb, lsb, .. } => {
                f(base);
                msb.for_each_ident(f);
                if let Some(l) = lsb {
                    l.for_each_ident(f);
                }
            }
            Expr::Unary { arg, .. } => arg.for_each_ident(f),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.for_each_ident(f);
                rhs.for_each_ident(f);
            }
            Expr::Ternary { cond, then, els, .. } => {
                cond.for_each_ident(f);
                then.for_each_ident(f);
                els.for_each_ident(f);
            }
            Expr::Concat(items, _) => items.iter().for_each(|e| e.for_each_ident(f)),
            Expr::Replicate { count, items, .. } => {
                count.for_each_ident(f);
                items.iter().for_each(|e| e.for_each_ident(f));
            }
        }
    }
}
