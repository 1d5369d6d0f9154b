//! Expressions for integrands and maps.
//!
//! Grammar, loosest first: `+ -`, then `* /`, then unary `-`, then `^`
//! (right-associative, exponent may carry a sign). Atoms are numbers, the
//! variable `x` or `y`, the constants `pi` and `e`, calls
//! `sin cos exp log sqrt abs cantor`, and parenthesised expressions.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::cantor::{cantor, DEFAULT_STAGE};
use crate::integrand::RealFn;

/// Byte range in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Cantor,
}

impl Func {
    pub const ALL: [Func; 7] = [Func::Sin, Func::Cos, Func::Exp, Func::Log, Func::Sqrt, Func::Abs, Func::Cantor];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Cantor => "cantor",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Constant {
    Pi,
    E,
}

impl Constant {
    fn value(self) -> f64 {
        match self {
            Constant::Pi => std::f64::consts::PI,
            Constant::E => std::f64::consts::E,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Constant::Pi => "pi",
            Constant::E => "e",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ExprKind {
    /// Nonnegative and finite when produced by the parser.
    Num(f64),
    Var(char),
    Const(Constant),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Expression tree with source spans. Equality ignores spans.
#[derive(Debug, Clone, Serialize)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Self {
            kind,
            span: Span::default(),
        }
    }

    pub fn num(v: f64) -> Self {
        Self::new(ExprKind::Num(v))
    }

    pub fn var() -> Self {
        Self::new(ExprKind::Var('x'))
    }

    pub fn neg(e: Expr) -> Self {
        Self::new(ExprKind::Neg(Box::new(e)))
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Self {
        Self::new(ExprKind::Bin(op, Box::new(a), Box::new(b)))
    }

    pub fn call(f: Func, a: Expr) -> Self {
        Self::new(ExprKind::Call(f, Box::new(a)))
    }
}

/// Fully parenthesised; numbers print in shortest round-trip form.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Num(v) => write!(f, "{v:?}"),
            ExprKind::Var(c) => write!(f, "{c}"),
            ExprKind::Const(c) => write!(f, "{}", c.name()),
            ExprKind::Neg(a) => write!(f, "(-{a})"),
            ExprKind::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            ExprKind::Call(g, a) => write!(f, "{}({a})", g.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at offset {offset}: expected {}, found {found}", expected.join(" or "))]
pub struct ParseError {
    pub offset: usize,
    pub expected: Vec<String>,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{func} of {arg} is undefined")]
    Domain { func: &'static str, arg: f64 },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "'{s}'"),
            Tok::Op(c) => write!(f, "'{c}'"),
            Tok::LParen => write!(f, "'('"),
            Tok::RParen => write!(f, "')'"),
            Tok::End => write!(f, "end of input"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, Span)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let tok = if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            Tok::Num(text.parse().map_err(|_| ParseError {
                offset: start,
                expected: vec!["number".into()],
                found: format!("'{text}'"),
            })?)
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            Tok::Ident(src[start..i].to_string())
        } else {
            i += 1;
            match c {
                b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                _ => {
                    let ch = src[start..].chars().next().expect("in bounds");
                    return Err(ParseError {
                        offset: start,
                        expected: vec!["expression".into()],
                        found: format!("'{ch}'"),
                    });
                }
            }
        };
        out.push((tok, Span { start, end: i }));
    }
    out.push((
        Tok::End,
        Span {
            start: src.len(),
            end: src.len(),
        },
    ));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

const OPERAND: [&str; 5] = ["number", "variable", "constant", "function", "'('"];

impl Parser {
    fn peek(&self) -> &(Tok, Span) {
        &self.toks[self.pos]
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let (tok, span) = self.peek();
        ParseError {
            offset: span.start,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: tok.to_string(),
        }
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        self.pos += 1;
        t
    }

    fn binary(&mut self, ops: &[char], next: fn(&mut Self) -> Result<Expr, ParseError>) -> Result<Expr, ParseError> {
        let mut lhs = next(self)?;
        while let Tok::Op(c) = self.peek().0 {
            if !ops.contains(&c) {
                break;
            }
            self.bump();
            let rhs = next(self)?;
            let op = match c {
                '+' => BinOp::Add,
                '-' => BinOp::Sub,
                '*' => BinOp::Mul,
                _ => BinOp::Div,
            };
            let span = Span {
                start: lhs.span.start,
                end: rhs.span.end,
            };
            lhs = Expr {
                kind: ExprKind::Bin(op, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        self.binary(&['+', '-'], Self::product)
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        self.binary(&['*', '/'], Self::unary)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek().0 == Tok::Op('-') {
            let (_, s) = self.bump();
            let inner = self.unary()?;
            let span = Span {
                start: s.start,
                end: inner.span.end,
            };
            return Ok(Expr {
                kind: ExprKind::Neg(Box::new(inner)),
                span,
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek().0 == Tok::Op('^') {
            self.bump();
            let exp = self.unary()?;
            let span = Span {
                start: base.span.start,
                end: exp.span.end,
            };
            return Ok(Expr {
                kind: ExprKind::Bin(BinOp::Pow, Box::new(base), Box::new(exp)),
                span,
            });
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let (tok, span) = self.peek().clone();
        let kind = match tok {
            Tok::Num(v) => {
                self.bump();
                ExprKind::Num(v)
            }
            Tok::LParen => {
                self.bump();
                let inner = self.sum()?;
                let (_, close) = self.expect_rparen()?;
                return Ok(Expr {
                    kind: inner.kind,
                    span: Span {
                        start: span.start,
                        end: close.end,
                    },
                });
            }
            Tok::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "x" | "y" => ExprKind::Var(name.chars().next().expect("nonempty")),
                    "pi" => ExprKind::Const(Constant::Pi),
                    "e" => ExprKind::Const(Constant::E),
                    _ => {
                        let Some(f) = Func::from_name(&name) else {
                            self.pos -= 1;
                            let mut known = vec!["x", "y", "pi", "e"];
                            known.extend(Func::ALL.iter().map(|f| f.name()));
                            return Err(self.error(&known));
                        };
                        if self.peek().0 != Tok::LParen {
                            return Err(self.error(&["'('"]));
                        }
                        self.bump();
                        let arg = self.sum()?;
                        let (_, close) = self.expect_rparen()?;
                        return Ok(Expr {
                            kind: ExprKind::Call(f, Box::new(arg)),
                            span: Span {
                                start: span.start,
                                end: close.end,
                            },
                        });
                    }
                }
            }
            _ => return Err(self.error(&OPERAND)),
        };
        Ok(Expr { kind, span })
    }

    fn expect_rparen(&mut self) -> Result<(Tok, Span), ParseError> {
        if self.peek().0 == Tok::RParen {
            Ok(self.bump())
        } else {
            Err(self.error(&["operator", "')'"]))
        }
    }
}

pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let e = p.sum()?;
    if p.peek().0 != Tok::End {
        return Err(p.error(&["operator", "end of input"]));
    }
    Ok(e)
}

impl Expr {
    /// Evaluates at `x` with the default Cantor stage.
    pub fn eval(&self, x: f64) -> Result<f64, EvalError> {
        self.eval_with(x, DEFAULT_STAGE)
    }

    pub fn eval_with(&self, x: f64, stage: u32) -> Result<f64, EvalError> {
        Ok(match &self.kind {
            ExprKind::Num(v) => *v,
            ExprKind::Var(_) => x,
            ExprKind::Const(c) => c.value(),
            ExprKind::Neg(a) => -a.eval_with(x, stage)?,
            ExprKind::Bin(op, a, b) => {
                let (a, b) = (a.eval_with(x, stage)?, b.eval_with(x, stage)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => {
                        if a < 0.0 && b.fract() != 0.0 {
                            return Err(EvalError::Domain { func: "power", arg: a });
                        }
                        a.powf(b)
                    }
                }
            }
            ExprKind::Call(f, a) => {
                let v = a.eval_with(x, stage)?;
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Abs => v.abs(),
                    Func::Cantor => cantor(v, stage),
                    Func::Log => {
                        if v < 0.0 {
                            return Err(EvalError::Domain { func: "log", arg: v });
                        }
                        v.ln()
                    }
                    Func::Sqrt => {
                        if v < 0.0 {
                            return Err(EvalError::Domain { func: "sqrt", arg: v });
                        }
                        v.sqrt()
                    }
                }
            }
        })
    }

    /// A closure for the hot path. Domain violations become NaN, which the
    /// integrand layer reports as non-finite samples.
    pub fn compile(&self, stage: u32) -> RealFn {
        Arc::from(self.build(stage))
    }

    fn build(&self, stage: u32) -> Box<dyn Fn(f64) -> f64 + Send + Sync> {
        match &self.kind {
            ExprKind::Num(v) => {
                let v = *v;
                Box::new(move |_| v)
            }
            ExprKind::Var(_) => Box::new(|x| x),
            ExprKind::Const(c) => {
                let v = c.value();
                Box::new(move |_| v)
            }
            ExprKind::Neg(a) => {
                let a = a.build(stage);
                Box::new(move |x| -a(x))
            }
            ExprKind::Bin(BinOp::Pow, a, b) => {
                let base = a.build(stage);
                match b.kind {
                    ExprKind::Num(n) if n.fract() == 0.0 && n.abs() <= 64.0 => match n as i32 {
                        2 => Box::new(move |x| {
                            let v = base(x);
                            v * v
                        }),
                        k => Box::new(move |x| base(x).powi(k)),
                    },
                    _ => {
                        let exp = b.build(stage);
                        Box::new(move |x| {
                            let (a, b) = (base(x), exp(x));
                            if a < 0.0 && b.fract() != 0.0 {
                                f64::NAN
                            } else {
                                a.powf(b)
                            }
                        })
                    }
                }
            }
            ExprKind::Bin(op, a, b) => {
                let (a, b) = (a.build(stage), b.build(stage));
                match op {
                    BinOp::Add => Box::new(move |x| a(x) + b(x)),
                    BinOp::Sub => Box::new(move |x| a(x) - b(x)),
                    BinOp::Mul => Box::new(move |x| a(x) * b(x)),
                    _ => Box::new(move |x| a(x) / b(x)),
                }
            }
            ExprKind::Call(f, a) => {
                let a = a.build(stage);
                match f {
                    Func::Sin => Box::new(move |x| a(x).sin()),
                    Func::Cos => Box::new(move |x| a(x).cos()),
                    Func::Exp => Box::new(move |x| a(x).exp()),
                    Func::Abs => Box::new(move |x| a(x).abs()),
                    Func::Cantor => Box::new(move |x| cantor(a(x), stage)),
                    Func::Log => Box::new(move |x| {
                        let v = a(x);
                        if v < 0.0 {
                            f64::NAN
                        } else {
                            v.ln()
                        }
                    }),
                    Func::Sqrt => Box::new(move |x| a(x).sqrt()),
                }
            }
        }
    }

    /// Whether the tree mentions the Cantor function.
    pub fn uses_cantor(&self) -> bool {
        match &self.kind {
            ExprKind::Call(Func::Cantor, _) => true,
            ExprKind::Num(_) | ExprKind::Var(_) | ExprKind::Const(_) => false,
            ExprKind::Neg(a) | ExprKind::Call(_, a) => a.uses_cantor(),
            ExprKind::Bin(_, a, b) => a.uses_cantor() || b.uses_cantor(),
        }
    }
}
