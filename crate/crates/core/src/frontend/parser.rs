use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;

const RESERVED: &[&str] = &[
    "module",
    "endmodule",
    "input",
    "output",
    "inout",
    "wire",
    "reg",
    "integer",
    "parameter",
    "localparam",
    "assign",
    "always",
    "initial",
    "begin",
    "end",
    "if",
    "else",
    "case",
    "casez",
    "casex",
    "endcase",
    "default",
    "for",
    "while",
    "posedge",
    "negedge",
    "or",
    "forever",
    "repeat",
    "function",
    "endfunction",
    "task",
    "endtask",
    "generate",
    "endgenerate",
    "genvar",
    "signed",
];

const UNSUPPORTED_ITEMS: &[&str] = &[
    "function",
    "task",
    "generate",
    "genvar",
    "specify",
    "primitive",
    "tri",
    "supply0",
    "supply1",
    "real",
    "time",
    "event",
    "defparam",
];

pub(super) struct Parser {
    toks: Vec<Token>,
    pos: usize,
    keep_spans: bool,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    pub(super) fn new(src: &str, keep_spans: bool) -> PResult<Self> {
        Ok(Parser {
            toks: tokenize(src)?,
            pos: 0,
            keep_spans,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn cur_span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn start(&self) -> u32 {
        self.toks[self.pos].span.start
    }

    fn span_from(&self, start: u32) -> Span {
        if !self.keep_spans {
            return Span::default();
        }
        let end = if self.pos == 0 {
            start
        } else {
            self.toks[self.pos - 1].span.end
        };
        Span { start, end }
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn err<T>(&self, rule: &'static str, msg: impl Into<String>) -> PResult<T> {
        Err(ParseError::new(rule, msg, self.cur_span()))
    }

    fn unexpected<T>(&self, what: &str) -> PResult<T> {
        if *self.peek() == Tok::Eof {
            return self.err("unterminated", format!("unexpected end of input, expected {what}"));
        }
        self.err("syntax", format!("expected {what}, found {}", describe(self.peek())))
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.unexpected(&format!("'{p}'"))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.unexpected(&format!("'{kw}'"))
        }
    }

    fn ident(&mut self) -> PResult<Ident> {
        match self.peek().clone() {
            Tok::Ident(name) if !RESERVED.contains(&name.as_str()) => {
                let start = self.start();
                self.bump();
                Ok(Ident {
                    name,
                    span: self.span_from(start),
                })
            }
            _ => self.unexpected("identifier"),
        }
    }

    fn reject_delay(&self) -> PResult<()> {
        if self.is_punct("#") {
            return self.err("delay-not-in-subset", "delays are not in the supported subset");
        }
        Ok(())
    }

    pub(super) fn source_unit(&mut self) -> PResult<Vec<ModuleDecl>> {
        let mut modules = Vec::new();
        while *self.peek() != Tok::Eof {
            if self.is_kw("macromodule") || self.is_kw("module") {
                modules.push(self.module()?);
            } else {
                return self.unexpected("'module'");
            }
        }
        Ok(modules)
    }

    fn module(&mut self) -> PResult<ModuleDecl> {
        let start = self.start();
        self.expect_kw("module")?;
        let name = self.ident()?;
        let mut params = Vec::new();
        if self.eat_punct("#") {
            self.expect_punct("(")?;
            if !self.is_punct(")") {
                loop {
                    let pstart = self.start();
                    let local = self.eat_kw("localparam");
                    if !local {
                        self.eat_kw("parameter");
                    }
                    self.reject_signed()?;
                    if self.is_punct("[") {
                        self.range()?;
                    }
                    let pname = self.ident()?;
                    self.expect_punct("=")?;
                    let value = self.expr()?;
                    params.push(ParamDecl {
                        local,
                        name: pname,
                        value,
                        span: self.span_from(pstart),
                    });
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
        }
        let ports = if self.eat_punct("(") {
            let p = self.port_list()?;
            self.expect_punct(")")?;
            p
        } else {
            PortList::Names(Vec::new())
        };
        self.expect_punct(";")?;
        let mut items = Vec::new();
        loop {
            if self.eat_kw("endmodule") {
                break;
            }
            if *self.peek() == Tok::Eof {
                return self.err("unterminated", format!("module '{}' is missing 'endmodule'", name.name));
            }
            items.extend(self.item()?);
        }
        Ok(ModuleDecl {
            name,
            params,
            ports,
            items,
            span: self.span_from(start),
        })
    }

    fn reject_signed(&self) -> PResult<()> {
        if self.is_kw("signed") {
            return self.err("syntax", "signed types are not in the supported subset");
        }
        Ok(())
    }

    fn direction(&mut self) -> PResult<Option<Direction>> {
        if self.eat_kw("input") {
            Ok(Some(Direction::Input))
        } else if self.eat_kw("output") {
            Ok(Some(Direction::Output))
        } else if self.is_kw("inout") {
            self.err("syntax", "inout ports are not in the supported subset")
        } else {
            Ok(None)
        }
    }

    fn net_kind(&mut self) -> Option<NetKind> {
        if self.eat_kw("wire") {
            Some(NetKind::Wire)
        } else if self.eat_kw("reg") {
            Some(NetKind::Reg)
        } else {
            None
        }
    }

    fn is_direction(&self) -> bool {
        self.is_kw("input") || self.is_kw("output") || self.is_kw("inout")
    }

    fn port_list(&mut self) -> PResult<PortList> {
        if self.is_punct(")") {
            return Ok(PortList::Names(Vec::new()));
        }
        if !self.is_direction() {
            let mut names = vec![self.ident()?];
            while self.eat_punct(",") {
                names.push(self.ident()?);
            }
            return Ok(PortList::Names(names));
        }
        let mut decls = Vec::new();
        loop {
            let start = self.start();
            let dir = match self.direction()? {
                Some(d) => d,
                None => return self.unexpected("port direction"),
            };
            let kind = self.net_kind();
            self.reject_signed()?;
            let range = if self.is_punct("[") { Some(self.range()?) } else { None };
            let mut names = vec![self.ident()?];
            let mut more = false;
            while self.is_punct(",") {
                if self.is_direction_at(1) {
                    self.bump();
                    more = true;
                    break;
                }
                self.bump();
                names.push(self.ident()?);
            }
            decls.push(PortDecl {
                dir,
                kind,
                range,
                names,
                span: self.span_from(start),
            });
            if !more {
                break;
            }
        }
        Ok(PortList::Ansi(decls))
    }

    fn is_direction_at(&self, n: usize) -> bool {
        matches!(self.peek_at(n), Tok::Ident(s) if s == "input" || s == "output" || s == "inout")
    }

    fn range(&mut self) -> PResult<Range> {
        let start = self.start();
        self.expect_punct("[")?;
        let msb = self.expr()?;
        self.expect_punct(":")?;
        let lsb = self.expr()?;
        self.expect_punct("]")?;
        Ok(Range {
            msb,
            lsb,
            span: self.span_from(start),
        })
    }

    fn item(&mut self) -> PResult<Vec<Item>> {
        let start = self.start();
        if self.is_direction() {
            let dir = self.direction()?.expect("checked");
            let kind = self.net_kind();
            self.reject_signed()?;
            let range = if self.is_punct("[") { Some(self.range()?) } else { None };
            let mut names = vec![self.ident()?];
            while self.eat_punct(",") {
                names.push(self.ident()?);
            }
            self.expect_punct(";")?;
            return Ok(vec![Item::Port(PortDecl {
                dir,
                kind,
                range,
                names,
                span: self.span_from(start),
            })]);
        }
        if let Some(kind) = self.net_kind() {
            self.reject_signed()?;
            let range = if self.is_punct("[") { Some(self.range()?) } else { None };
            let mut names = Vec::new();
            loop {
                let n = self.ident()?;
                if self.is_punct("[") {
                    return self.err("syntax", "memories (arrays) are not in the supported subset");
                }
                let init = if self.eat_punct("=") {
                    if kind == NetKind::Reg {
                        return self.err("syntax", "reg initializers are not in the supported subset");
                    }
                    Some(self.expr()?)
                } else {
                    None
                };
                names.push((n, init));
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct(";")?;
            return Ok(vec![Item::Net(NetDecl {
                kind,
                range,
                names,
                span: self.span_from(start),
            })]);
        }
        if self.eat_kw("integer") {
            let mut names = vec![self.ident()?];
            while self.eat_punct(",") {
                names.push(self.ident()?);
            }
            self.expect_punct(";")?;
            return Ok(vec![Item::Integer(names, self.span_from(start))]);
        }
        if self.is_kw("parameter") || self.is_kw("localparam") {
            let local = self.is_kw("localparam");
            self.bump();
            self.reject_signed()?;
            if self.is_punct("[") {
                self.range()?;
            }
            let mut out = Vec::new();
            loop {
                let pstart = self.start();
                let name = self.ident()?;
                self.expect_punct("=")?;
                let value = self.expr()?;
                out.push(Item::Param(ParamDecl {
                    local,
                    name,
                    value,
                    span: self.span_from(pstart),
                }));
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct(";")?;
            return Ok(out);
        }
        if self.eat_kw("assign") {
            self.reject_delay()?;
            let mut out = Vec::new();
            loop {
                let astart = self.start();
                let lhs = self.lvalue()?;
                self.expect_punct("=")?;
                let rhs = self.expr()?;
                out.push(Item::Assign(ContAssign {
                    lhs,
                    rhs,
                    span: self.span_from(astart),
                }));
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct(";")?;
            return Ok(out);
        }
        if self.eat_kw("always") {
            self.reject_delay()?;
            if !self.eat_punct("@") {
                return self.unexpected("'@' event control after 'always'");
            }
            let sensitivity = self.sensitivity()?;
            let body = self.stmt()?;
            return Ok(vec![Item::Always(AlwaysBlock {
                sensitivity,
                body,
                span: self.span_from(start),
            })]);
        }
        if self.eat_kw("initial") {
            let body = self.stmt()?;
            return Ok(vec![Item::Initial(body, self.span_from(start))]);
        }
        if let Tok::Ident(kw) = self.peek() {
            if UNSUPPORTED_ITEMS.contains(&kw.as_str()) {
                let kw = kw.clone();
                return self.err("syntax", format!("'{kw}' is not in the supported subset"));
            }
        }
        if matches!(self.peek(), Tok::Ident(_)) {
            return Ok(vec![Item::Instance(self.instance()?)]);
        }
        self.unexpected("module item")
    }

    fn sensitivity(&mut self) -> PResult<Sensitivity> {
        if self.eat_punct("*") {
            return Ok(Sensitivity::Star);
        }
        self.expect_punct("(")?;
        if self.eat_punct("*") {
            self.expect_punct(")")?;
            return Ok(Sensitivity::Star);
        }
        let mut items = Vec::new();
        loop {
            let start = self.start();
            let edge = if self.eat_kw("posedge") {
                Some(Edge::Posedge)
            } else if self.eat_kw("negedge") {
                Some(Edge::Negedge)
            } else {
                None
            };
            let signal = self.ident()?;
            if self.is_punct("[") {
                return self.err("syntax", "bit-selects in event controls are not supported");
            }
            items.push(EventItem {
                edge,
                signal,
                span: self.span_from(start),
            });
            if !(self.eat_kw("or") || self.eat_punct(",")) {
                break;
            }
        }
        self.expect_punct(")")?;
        Ok(Sensitivity::List(items))
    }

    fn instance(&mut self) -> PResult<Instance> {
        let start = self.start();
        let module = self.ident()?;
        let mut params = Vec::new();
        if self.eat_punct("#") {
            self.expect_punct("(")?;
            if !self.is_punct(")") {
                loop {
                    if self.eat_punct(".") {
                        let name = self.ident()?;
                        self.expect_punct("(")?;
                        let value = self.expr()?;
                        self.expect_punct(")")?;
                        params.push((Some(name), value));
                    } else {
                        params.push((None, self.expr()?));
                    }
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
        }
        let name = self.ident()?;
        if self.is_punct("[") {
            return self.err("syntax", "instance arrays are not in the supported subset");
        }
        self.expect_punct("(")?;
        let conns = if self.is_punct(".") {
            let mut named = Vec::new();
            loop {
                self.expect_punct(".")?;
                let port = self.ident()?;
                self.expect_punct("(")?;
                let e = if self.is_punct(")") { None } else { Some(self.expr()?) };
                self.expect_punct(")")?;
                named.push((port, e));
                if !self.eat_punct(",") {
                    break;
                }
            }
            Connections::Named(named)
        } else {
            let mut ordered = Vec::new();
            if !self.is_punct(")") {
                loop {
                    ordered.push(self.expr()?);
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            Connections::Ordered(ordered)
        };
        self.expect_punct(")")?;
        self.expect_punct(";")?;
        Ok(Instance {
            module,
            params,
            name,
            conns,
            span: self.span_from(start),
        })
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let start = self.start();
        self.reject_delay()?;
        if self.is_punct("@") {
            return self.err(
                "syntax",
                "event controls inside statements are not in the supported subset",
            );
        }
        if self.eat_punct(";") {
            return Ok(Stmt::Null(self.span_from(start)));
        }
        if self.eat_kw("begin") {
            let label = if self.eat_punct(":") { Some(self.ident()?) } else { None };
            let mut stmts = Vec::new();
            loop {
                if self.eat_kw("end") {
                    break;
                }
                if *self.peek() == Tok::Eof || self.is_kw("endmodule") {
                    return self.err("unterminated", "'begin' without matching 'end'");
                }
                stmts.push(self.stmt()?);
            }
            return Ok(Stmt::Block {
                label,
                stmts,
                span: self.span_from(start),
            });
        }
        if self.eat_kw("if") {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let then = Box::new(self.stmt()?);
            let els = if self.eat_kw("else") {
                Some(Box::new(self.stmt()?))
            } else {
                None
            };
            return Ok(Stmt::If {
                cond,
                then,
                els,
                span: self.span_from(start),
            });
        }
        if self.is_kw("casez") || self.is_kw("casex") {
            return self.err("syntax", "casez/casex are not in the supported subset");
        }
        if self.eat_kw("case") {
            self.expect_punct("(")?;
            let subject = self.expr()?;
            self.expect_punct(")")?;
            let mut items = Vec::new();
            let mut default = None;
            loop {
                if self.eat_kw("endcase") {
                    break;
                }
                if *self.peek() == Tok::Eof {
                    return self.err("unterminated", "'case' without matching 'endcase'");
                }
                let istart = self.start();
                if self.eat_kw("default") {
                    self.eat_punct(":");
                    if default.is_some() {
                        return self.err("syntax", "duplicate default in case");
                    }
                    default = Some(Box::new(self.stmt()?));
                    continue;
                }
                let mut labels = vec![self.expr()?];
                while self.eat_punct(",") {
                    labels.push(self.expr()?);
                }
                self.expect_punct(":")?;
                let body = self.stmt()?;
                items.push(CaseItem {
                    labels,
                    body,
                    span: self.span_from(istart),
                });
            }
            return Ok(Stmt::Case {
                subject,
                items,
                default,
                span: self.span_from(start),
            });
        }
        if self.eat_kw("for") {
            self.expect_punct("(")?;
            let var = self.ident()?;
            self.expect_punct("=")?;
            let init = self.expr()?;
            self.expect_punct(";")?;
            let cond = self.expr()?;
            self.expect_punct(";")?;
            let step_var = self.ident()?;
            if step_var.name != var.name {
                return Err(ParseError::new(
                    "syntax",
                    format!("for-loop step must assign the loop variable '{}'", var.name),
                    step_var.span,
                ));
            }
            self.expect_punct("=")?;
            let step = self.expr()?;
            self.expect_punct(")")?;
            let body = Box::new(self.stmt()?);
            return Ok(Stmt::For {
                var,
                init,
                cond,
                step,
                body,
                span: self.span_from(start),
            });
        }
        if self.eat_kw("while") {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let body = Box::new(self.stmt()?);
            return Ok(Stmt::While {
                cond,
                body,
                span: self.span_from(start),
            });
        }
        for kw in ["forever", "repeat", "wait", "fork", "disable", "force", "release"] {
            if self.is_kw(kw) {
                return self.err("syntax", format!("'{kw}' is not in the supported subset"));
            }
        }
        if let Tok::SysIdent(name) = self.peek().clone() {
            let nstart = self.start();
            self.bump();
            let name = Ident {
                name,
                span: self.span_from(nstart),
            };
            let mut args = Vec::new();
            if self.eat_punct("(") {
                if !self.is_punct(")") {
                    loop {
                        args.push(self.expr()?);
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
                self.expect_punct(")")?;
            }
            self.expect_punct(";")?;
            return Ok(Stmt::SystemTask {
                name,
                args,
                span: self.span_from(start),
            });
        }
        let lhs = self.lvalue()?;
        let blocking = if self.eat_punct("=") {
            true
        } else if self.eat_punct("<=") {
            false
        } else {
            return self.unexpected("'=' or '<='");
        };
        self.reject_delay()?;
        let rhs = self.expr()?;
        self.expect_punct(";")?;
        Ok(Stmt::Assign {
            lhs,
            rhs,
            blocking,
            span: self.span_from(start),
        })
    }

    fn lvalue(&mut self) -> PResult<LValue> {
        let start = self.start();
        if self.eat_punct("{") {
            let mut parts = vec![self.lvalue()?];
            while self.eat_punct(",") {
                parts.push(self.lvalue()?);
            }
            self.expect_punct("}")?;
            return Ok(LValue::Concat(parts, self.span_from(start)));
        }
        let base = self.ident()?;
        if self.eat_punct("[") {
            let msb = Box::new(self.expr()?);
            let lsb = if self.eat_punct(":") {
                Some(Box::new(self.expr()?))
            } else {
                None
            };
            self.expect_punct("]")?;
            return Ok(LValue::Select {
                base,
                msb,
                lsb,
                span: self.span_from(start),
            });
        }
        Ok(LValue::Ident(base))
    }

    pub(super) fn expr(&mut self) -> PResult<Expr> {
        let start = self.start();
        let cond = self.binary(1)?;
        if self.eat_punct("?") {
            let then = self.expr()?;
            self.expect_punct(":")?;
            let els = self.expr()?;
            return Ok(Expr::Ternary {
                cond: Box::new(cond),
                then: Box::new(then),
                els: Box::new(els),
                span: self.span_from(start),
            });
        }
        Ok(cond)
    }

    fn binary_op(&self) -> PResult<Option<BinaryOp>> {
        let Tok::Punct(p) = self.peek() else {
            return Ok(None);
        };
        use BinaryOp::*;
        Ok(Some(match *p {
            "+" => Add,
            "-" => Sub,
            "*" => Mul,
            "&" => And,
            "|" => Or,
            "^" => Xor,
            "~^" | "^~" => Xnor,
            "&&" => LogAnd,
            "||" => LogOr,
            "==" => Eq,
            "!=" => Ne,
            "<" => Lt,
            "<=" => Le,
            ">" => Gt,
            ">=" => Ge,
            "<<" => Shl,
            ">>" => Shr,
            "/" | "%" => return self.err("syntax", "division and modulo are not in the supported subset"),
            "===" | "!==" | "<<<" | ">>>" => {
                return self.err("syntax", format!("operator '{p}' is not in the supported subset"))
            }
            _ => return Ok(None),
        }))
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let start = self.start();
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op()? {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                span: self.span_from(start),
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let start = self.start();
        let op = match self.peek() {
            Tok::Punct("~") => Some(UnaryOp::Not),
            Tok::Punct("!") => Some(UnaryOp::LogNot),
            Tok::Punct("-") => Some(UnaryOp::Neg),
            Tok::Punct("+") => Some(UnaryOp::Plus),
            Tok::Punct("&") => Some(UnaryOp::RedAnd),
            Tok::Punct("|") => Some(UnaryOp::RedOr),
            Tok::Punct("^") => Some(UnaryOp::RedXor),
            Tok::Punct("~&") | Tok::Punct("~|") => {
                // ~&x and ~|x are sugar for ~(&x) and ~(|x)
                let red = if self.is_punct("~&") {
                    UnaryOp::RedAnd
                } else {
                    UnaryOp::RedOr
                };
                self.bump();
                let arg = self.unary()?;
                let span = self.span_from(start);
                return Ok(Expr::Unary {
                    op: UnaryOp::Not,
                    arg: Box::new(Expr::Unary {
                        op: red,
                        arg: Box::new(arg),
                        span,
                    }),
                    span,
                });
            }
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let arg = self.unary()?;
            return Ok(Expr::Unary {
                op,
                arg: Box::new(arg),
                span: self.span_from(start),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.start();
        match self.peek().clone() {
            Tok::Number { size, base, digits } => {
                let span = self.cur_span();
                self.bump();
                let radix = match base {
                    None | Some(NumBase::Dec) => 10,
                    Some(NumBase::Bin) => 2,
                    Some(NumBase::Oct) => 8,
                    Some(NumBase::Hex) => 16,
                };
                let value = u64::from_str_radix(&digits, radix).map_err(|_| {
                    ParseError::new(
                        "syntax",
                        format!("invalid or too large literal digits '{digits}'"),
                        span,
                    )
                })?;
                Ok(Expr::Number(Number {
                    size,
                    base,
                    value,
                    span: self.span_from(start),
                }))
            }
            Tok::Ident(name) if !RESERVED.contains(&name.as_str()) => {
                let base = self.ident()?;
                if self.eat_punct("[") {
                    let msb = Box::new(self.expr()?);
                    let lsb = if self.eat_punct(":") {
                        Some(Box::new(self.expr()?))
                    } else {
                        None
                    };
                    self.expect_punct("]")?;
                    return Ok(Expr::Select {
                        base,
                        msb,
                        lsb,
                        span: self.span_from(start),
                    });
                }
                Ok(Expr::Ident(base))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Punct("{") => {
                self.bump();
                let first = self.expr()?;
                if self.eat_punct("{") {
                    let mut items = vec![self.expr()?];
                    while self.eat_punct(",") {
                        items.push(self.expr()?);
                    }
                    self.expect_punct("}")?;
                    self.expect_punct("}")?;
                    return Ok(Expr::Replicate {
                        count: Box::new(first),
                        items,
                        span: self.span_from(start),
                    });
                }
                let mut items = vec![first];
                while self.eat_punct(",") {
                    items.push(self.expr()?);
                }
                self.expect_punct("}")?;
                Ok(Expr::Concat(items, self.span_from(start)))
            }
            Tok::SysIdent(name) => self.err(
                "syntax",
                format!("system function ${name} is not in the supported subset"),
            ),
            _ => self.unexpected("expression"),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("'{s}'"),
        Tok::SysIdent(s) => format!("'${s}'"),
        Tok::Number { .. } => "number".to_string(),
        Tok::Punct(p) => format!("'{p}'"),
        Tok::Eof => "end of input".to_string(),
    }
}
