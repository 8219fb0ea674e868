//! Arithmetic expressions over rational literals and named symbols.
//!
//! Grammar: integer and decimal literals, identifiers, `+ - * /`, unary minus,
//! integer powers `^k` (k may be negative) and parentheses. Operations whose
//! operands are all literals are folded at construction, so `3/4` is stored as
//! the rational literal 3/4 and printing followed by parsing is the identity.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::scalar::{parse_rational, render_rational, Rational, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Lit(Rational),
    Sym(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("parse error at offset {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("division by zero")]
    DivisionByZero,
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("non-finite value")]
    NonFinite,
}

#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn lit(r: Rational) -> Expr {
        Expr::Lit(r)
    }

    pub fn sym(name: &str) -> Expr {
        Expr::Sym(name.to_string())
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Lit(r) => Expr::Lit(-r),
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Lit(x), Expr::Lit(y)) => Expr::Lit(x + y),
            (a, b) => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Lit(x), Expr::Lit(y)) => Expr::Lit(x - y),
            (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Lit(x), Expr::Lit(y)) => Expr::Lit(x * y),
            (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Result<Expr, ExprError> {
        match (a, b) {
            (_, Expr::Lit(y)) if y.is_zero() => Err(ExprError::DivisionByZero),
            (Expr::Lit(x), Expr::Lit(y)) => Ok(Expr::Lit(x / y)),
            (a, b) => Ok(Expr::Div(Box::new(a), Box::new(b))),
        }
    }

    pub fn pow(a: Expr, k: i32) -> Result<Expr, ExprError> {
        match a {
            Expr::Lit(x) => {
                if x.is_zero() && k < 0 {
                    return Err(ExprError::DivisionByZero);
                }
                Ok(Expr::Lit(rational_pow(&x, k)))
            }
            other => Ok(Expr::Pow(Box::new(other), k)),
        }
    }

    pub fn parse(text: &str) -> Result<Expr, ExprError> {
        let tokens = tokenize(text)?;
        let mut parser = Parser { tokens, pos: 0 };
        let expr = parser.expr()?;
        if parser.pos < parser.tokens.len() {
            return Err(parser.error("unexpected trailing input"));
        }
        Ok(expr)
    }

    pub fn symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Lit(_) => {}
            Expr::Sym(s) => {
                out.insert(s.clone());
            }
            Expr::Neg(a) | Expr::Pow(a, _) => a.collect_symbols(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_symbols(out);
                b.collect_symbols(out);
            }
        }
    }

    pub fn as_literal(&self) -> Option<&Rational> {
        match self {
            Expr::Lit(r) => Some(r),
            _ => None,
        }
    }

    /// Evaluates with `lookup` resolving symbols.
    pub fn eval<S: Scalar>(&self, lookup: &dyn Fn(&str) -> Option<S>) -> Result<S, ExprError> {
        let v = match self {
            Expr::Lit(r) => S::from_rational(r),
            Expr::Sym(s) => lookup(s).ok_or_else(|| ExprError::UnknownSymbol(s.clone()))?,
            Expr::Neg(a) => -a.eval(lookup)?,
            Expr::Add(a, b) => a.eval(lookup)? + b.eval(lookup)?,
            Expr::Sub(a, b) => a.eval(lookup)? - b.eval(lookup)?,
            Expr::Mul(a, b) => a.eval(lookup)? * b.eval(lookup)?,
            Expr::Div(a, b) => {
                let d = b.eval(lookup)?;
                if d.is_zero() {
                    return Err(ExprError::DivisionByZero);
                }
                a.eval(lookup)? / d
            }
            Expr::Pow(a, k) => {
                let base = a.eval(lookup)?;
                if base.is_zero() && *k < 0 {
                    return Err(ExprError::DivisionByZero);
                }
                scalar_pow(base, *k)
            }
        };
        if !S::EXACT && !v.to_f64().is_finite() {
            return Err(ExprError::NonFinite);
        }
        Ok(v)
    }

    /// Evaluates an expression in one symbol.
    pub fn eval_at<S: Scalar>(&self, symbol: &str, value: &S) -> Result<S, ExprError> {
        self.eval(&|name: &str| if name == symbol { Some(value.clone()) } else { None })
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Lit(r) if r.is_integer() && !r.is_negative() => 5,
            Expr::Lit(r) if r.is_integer() => 3,
            Expr::Lit(_) => 2,
            Expr::Sym(_) => 5,
            Expr::Pow(..) => 4,
            Expr::Neg(_) => 3,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Add(..) | Expr::Sub(..) => 1,
        }
    }
}

fn rational_pow(x: &Rational, k: i32) -> Rational {
    let mut acc = Rational::one();
    for _ in 0..k.unsigned_abs() {
        acc *= x;
    }
    if k < 0 {
        acc.recip()
    } else {
        acc
    }
}

fn scalar_pow<S: Scalar>(base: S, k: i32) -> S {
    let mut acc = S::one();
    let mut b = base;
    let mut e = k.unsigned_abs();
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b.clone();
        }
        b = b.clone() * b;
        e >>= 1;
    }
    if k < 0 {
        S::one() / acc
    } else {
        acc
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Expr, min_prec: u8) -> fmt::Result {
    if child.precedence() < min_prec {
        write!(f, "({})", child)
    } else {
        write!(f, "{}", child)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(r) => f.write_str(&render_rational(r)),
            Expr::Sym(s) => f.write_str(s),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_child(f, a, 4)
            }
            Expr::Pow(a, k) => {
                write_child(f, a, 5)?;
                write!(f, "^{}", k)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                write_child(f, a, 1)?;
                f.write_str(if matches!(self, Expr::Add(..)) { " + " } else { " - " })?;
                write_child(f, b, 2)
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                write_child(f, a, 2)?;
                f.write_str(if matches!(self, Expr::Mul(..)) { "*" } else { "/" })?;
                write_child(f, b, 3)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    Op(char),
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                i += 1;
            }
            let lexeme: String = chars[start..i].iter().map(|p| p.1).collect();
            let value = parse_rational(&lexeme).ok_or(ExprError::Parse {
                pos,
                msg: format!("bad number `{}`", lexeme),
            })?;
            out.push((pos, Tok::Num(value)));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            out.push((pos, Tok::Ident(chars[start..i].iter().map(|p| p.1).collect())));
        } else if "+-*/^()".contains(c) {
            out.push((pos, Tok::Op(c)));
            i += 1;
        } else {
            return Err(ExprError::Parse { pos, msg: format!("unexpected character `{}`", c) });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.1)
    }

    fn error(&self, msg: &str) -> ExprError {
        let pos = self.tokens.get(self.pos).map(|t| t.0).unwrap_or(usize::MAX);
        ExprError::Parse { pos, msg: msg.to_string() }
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::add(lhs, self.term()?);
            } else if self.eat('-') {
                lhs = Expr::sub(lhs, self.term()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::mul(lhs, self.unary()?);
            } else if self.eat('/') {
                lhs = Expr::div(lhs, self.unary()?)?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat('-') {
            return Ok(Expr::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let negative = self.eat('-');
        match self.peek().cloned() {
            Some(Tok::Num(r)) if r.is_integer() => {
                self.pos += 1;
                let k: i32 = r
                    .to_integer()
                    .try_into()
                    .map_err(|_| self.error("exponent out of range"))?;
                Expr::pow(base, if negative { -k } else { k })
            }
            _ => Err(self.error("expected integer exponent")),
        }
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        match self.peek().cloned() {
            Some(Tok::Num(r)) => {
                self.pos += 1;
                Ok(Expr::Lit(r))
            }
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok(Expr::Sym(s))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(inner)
            }
            _ => Err(self.error("expected a number, symbol or `(`")),
        }
    }
}
