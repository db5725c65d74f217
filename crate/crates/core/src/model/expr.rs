//! Arithmetic expressions for non mass-action hazards.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (("+" | "-") product)*
//! product := unary (("*" | "/") unary)*
//! unary   := "-" unary | power
//! power   := atom ("^" unary)?
//! atom    := number | ident | func "(" sum ")" | "(" sum ")"
//! ```
//!
//! Identifiers resolve to species counts, parameters, or the time `t`.

use std::fmt;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        match name {
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    Species(usize),
    Param(usize),
    Time,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var { name: String, var: Var },
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Symbol tables used while parsing.
pub struct Scope<'a> {
    pub species: &'a [String],
    pub params: &'a [String],
}

impl Scope<'_> {
    fn resolve(&self, name: &str) -> Option<Var> {
        if name == "t" {
            return Some(Var::Time);
        }
        if let Some(i) = self.species.iter().position(|s| s == name) {
            return Some(Var::Species(i));
        }
        self.params.iter().position(|p| p == name).map(Var::Param)
    }
}

impl Expr {
    pub fn eval(&self, state: &[i64], params: &[f64], t: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var { var, .. } => match *var {
                Var::Species(i) => state[i] as f64,
                Var::Param(i) => params[i],
                Var::Time => t,
            },
            Expr::Neg(e) => -e.eval(state, params, t),
            Expr::Bin(op, l, r) => {
                let (a, b) = (l.eval(state, params, t), r.eval(state, params, t));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call(f, e) => {
                let a = e.eval(state, params, t);
                match f {
                    Func::Exp => a.exp(),
                    Func::Log => a.ln(),
                    Func::Sqrt => a.sqrt(),
                }
            }
        }
    }

    /// Parameter indices referenced anywhere in the expression.
    pub fn params(&self, out: &mut Vec<usize>) {
        match self {
            Expr::Var {
                var: Var::Param(i), ..
            } => out.push(*i),
            Expr::Num(_) | Expr::Var { .. } => {}
            Expr::Neg(e) | Expr::Call(_, e) => e.params(out),
            Expr::Bin(_, l, r) => {
                l.params(out);
                r.params(out);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Bin(BinOp::Pow, ..) => 4,
            Expr::Num(_) | Expr::Var { .. } | Expr::Call(..) => 5,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "(")?;
            self.write_at(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var { name, .. } => write!(f, "{name}"),
            Expr::Neg(e) => {
                write!(f, "-")?;
                e.write_at(f, 3)
            }
            Expr::Bin(op, l, r) => {
                let (sym, lmin, rmin) = match op {
                    BinOp::Add => ("+", 1, 2),
                    BinOp::Sub => ("-", 1, 2),
                    BinOp::Mul => ("*", 2, 3),
                    BinOp::Div => ("/", 2, 3),
                    BinOp::Pow => ("^", 5, 3),
                };
                l.write_at(f, lmin)?;
                write!(f, "{sym}")?;
                r.write_at(f, rmin)
            }
            Expr::Call(func, e) => {
                write!(f, "{}(", func.name())?;
                e.write_at(f, 0)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

fn lex(src: &str) -> std::result::Result<Vec<(Tok, usize)>, (usize, String)> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| (start, format!("bad number `{text}`")))?;
            out.push((Tok::Num(v), start));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), start));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Sym(c), i));
            i += 1;
        } else {
            return Err((i, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

/// Parses an expression. Errors carry a 0-based character offset into `src`.
pub fn parse_expr(src: &str, scope: &Scope<'_>) -> std::result::Result<Expr, ExprError> {
    let toks = lex(src).map_err(|(offset, message)| ExprError::Syntax { offset, message })?;
    let end = src.chars().count();
    let mut lx = Lexer { toks, pos: 0, end };
    let e = lx.sum(scope)?;
    if lx.pos < lx.toks.len() {
        return Err(lx.unexpected());
    }
    Ok(e)
}

#[derive(Debug)]
pub enum ExprError {
    Syntax { offset: usize, message: String },
    Undeclared(String),
}

impl ExprError {
    pub(crate) fn into_error(self, line: usize, column0: usize) -> Error {
        match self {
            ExprError::Syntax { offset, message } => Error::Syntax {
                line,
                column: column0 + offset + 1,
                message,
            },
            ExprError::Undeclared(name) => Error::UndeclaredParameter(name),
        }
    }
}

impl Lexer {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|&(_, o)| o).unwrap_or(self.end)
    }

    fn unexpected(&self) -> ExprError {
        let message = match self.peek() {
            Some(t) => format!("unexpected token {t:?}"),
            None => "unexpected end of expression".to_string(),
        };
        ExprError::Syntax {
            offset: self.offset(),
            message,
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self, scope: &Scope<'_>) -> std::result::Result<Expr, ExprError> {
        let mut lhs = self.product(scope)?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.product(scope)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self, scope: &Scope<'_>) -> std::result::Result<Expr, ExprError> {
        let mut lhs = self.unary(scope)?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary(scope)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self, scope: &Scope<'_>) -> std::result::Result<Expr, ExprError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary(scope)?)));
        }
        let base = self.atom(scope)?;
        if self.eat('^') {
            let exponent = self.unary(scope)?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self, scope: &Scope<'_>) -> std::result::Result<Expr, ExprError> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.sum(scope)?;
                if !self.eat(')') {
                    return Err(self.unexpected());
                }
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.peek() == Some(&Tok::Sym('(')) {
                    let func = Func::from_name(&name).ok_or_else(|| ExprError::Syntax {
                        offset: self.toks[self.pos - 1].1,
                        message: format!("unknown function `{name}`"),
                    })?;
                    self.pos += 1;
                    let arg = self.sum(scope)?;
                    if !self.eat(')') {
                        return Err(self.unexpected());
                    }
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                let var = scope
                    .resolve(&name)
                    .ok_or_else(|| ExprError::Undeclared(name.clone()))?;
                Ok(Expr::Var { name, var })
            }
            _ => Err(self.unexpected()),
        }
    }
}
