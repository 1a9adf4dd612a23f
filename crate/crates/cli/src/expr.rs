//! Complex arithmetic expressions over a few named variables.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('+' | '-') unary | power
//! power  := atom ('^' unary)?
//! atom   := number | name | name '(' expr ')' | '(' expr ')'
//! ```
//!
//! Constants are `i` and `pi`; functions are `sin`, `cos` and `exp`.

use gidx_core::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("unexpected character {ch:?} at offset {pos}")]
    UnexpectedChar { ch: char, pos: usize },
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("unexpected token {found} at offset {pos}")]
    UnexpectedToken { found: String, pos: usize },
    #[error("unknown name {0:?}")]
    UnknownName(String),
    #[error("unknown function {0:?}")]
    UnknownFunction(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    I,
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, vars: &[f64]) -> Complex64 {
        match self {
            Expr::Num(v) => Complex64::new(*v, 0.0),
            Expr::I => Complex64::new(0.0, 1.0),
            Expr::Var(k) => Complex64::new(vars[*k], 0.0),
            Expr::Neg(a) => -a.eval(vars),
            Expr::Add(a, b) => a.eval(vars) + b.eval(vars),
            Expr::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Expr::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Expr::Div(a, b) => a.eval(vars) / b.eval(vars),
            Expr::Pow(a, b) => {
                let (base, e) = (a.eval(vars), b.eval(vars));
                if e.im == 0.0 && e.re.fract() == 0.0 && e.re.abs() < 1e6 {
                    base.powi(e.re as i32)
                } else {
                    base.powc(e)
                }
            }
            Expr::Call(f, a) => {
                let v = a.eval(vars);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Op(char),
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, ch) = chars[i];
        if ch.is_whitespace() {
            i += 1;
        } else if ch.is_ascii_digit() || ch == '.' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                i += 1;
            }
            // Exponent part, e.g. 1e-3.
            if i + 1 < chars.len() && matches!(chars[i].1, 'e' | 'E') {
                let mut j = i + 1;
                if matches!(chars[j].1, '+' | '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].1.is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].1.is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().map(|(_, c)| c).collect();
            let v = text.parse().map_err(|_| ParseError::UnexpectedChar { ch, pos })?;
            out.push((Tok::Num(v), pos));
        } else if ch.is_ascii_alphabetic() || ch == '_' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            out.push((Tok::Name(chars[start..i].iter().map(|(_, c)| c).collect()), pos));
        } else if "+-*/^()".contains(ch) {
            out.push((Tok::Op(ch), pos));
            i += 1;
        } else {
            return Err(ParseError::UnexpectedChar { ch, pos });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    vars: &'a [&'a str],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        let t = self.toks.get(self.at).cloned().ok_or(ParseError::UnexpectedEnd)?;
        self.at += 1;
        Ok(t)
    }

    fn expect(&mut self, op: char) -> Result<(), ParseError> {
        match self.next()? {
            (Tok::Op(c), _) if c == op => Ok(()),
            (t, pos) => Err(ParseError::UnexpectedToken { found: format!("{t:?}"), pos }),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let c = *c;
            self.at += 1;
            let rhs = self.term()?;
            lhs = if c == '+' { Expr::Add(lhs.into(), rhs.into()) } else { Expr::Sub(lhs.into(), rhs.into()) };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let c = *c;
            self.at += 1;
            let rhs = self.unary()?;
            lhs = if c == '*' { Expr::Mul(lhs.into(), rhs.into()) } else { Expr::Div(lhs.into(), rhs.into()) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.at += 1;
                Ok(Expr::Neg(self.unary()?.into()))
            }
            Some(Tok::Op('+')) => {
                self.at += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.at += 1;
            return Ok(Expr::Pow(base.into(), self.unary()?.into()));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.next()? {
            (Tok::Num(v), _) => Ok(Expr::Num(v)),
            (Tok::Op('('), _) => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            (Tok::Name(name), _) => {
                if let Some(Tok::Op('(')) = self.peek() {
                    let f = match name.as_str() {
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        "exp" => Func::Exp,
                        _ => return Err(ParseError::UnknownFunction(name)),
                    };
                    self.at += 1;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::Call(f, arg.into()));
                }
                match name.as_str() {
                    "i" => Ok(Expr::I),
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    _ => self.vars.iter().position(|v| *v == name).map(Expr::Var).ok_or(ParseError::UnknownName(name)),
                }
            }
            (t, pos) => Err(ParseError::UnexpectedToken { found: format!("{t:?}"), pos }),
        }
    }
}

/// Parses `src` with the given variable names (bound by position in
/// [`Expr::eval`]).
pub fn parse(src: &str, vars: &[&str]) -> Result<Expr, ParseError> {
    let mut p = Parser { toks: lex(src)?, at: 0, vars };
    let e = p.expr()?;
    match p.toks.get(p.at) {
        None => Ok(e),
        Some((t, pos)) => Err(ParseError::UnexpectedToken { found: format!("{t:?}"), pos: *pos }),
    }
}
