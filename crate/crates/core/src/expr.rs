//! Minimal arithmetic expressions in one variable: `+ - * / ^`, `ln`, `exp`,
//! numeric literals and parentheses.

use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Ln(Box<Expr>),
    Exp(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    /// Byte offset into the source.
    pub pos: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at position {}: {}", self.pos, self.msg)
    }
}

impl std::error::Error for ParseError {}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    var: &'a str,
}

type PResult = std::result::Result<Expr, ParseError>;

impl<'a> Parser<'a> {
    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError { pos: self.pos, msg: msg.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> PResult {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> PResult {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> PResult {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> PResult {
        let base = self.atom()?;
        if self.eat(b'^') {
            let e = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(e)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> PResult {
        match self.peek() {
            None => Err(self.err("unexpected end of expression")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                match name {
                    "ln" | "exp" => {
                        if !self.eat(b'(') {
                            return Err(self.err(format!("expected '(' after {name}")));
                        }
                        let arg = self.expr()?;
                        if !self.eat(b')') {
                            return Err(self.err("expected ')'"));
                        }
                        Ok(if name == "ln" { Expr::Ln(Box::new(arg)) } else { Expr::Exp(Box::new(arg)) })
                    }
                    n if n == self.var => Ok(Expr::Var),
                    _ => Err(ParseError { pos: start, msg: format!("unknown identifier '{name}'") }),
                }
            }
            Some(c) => Err(self.err(format!("unexpected character '{}'", c as char))),
        }
    }

    fn number(&mut self) -> PResult {
        let start = self.pos;
        let s = self.src;
        while self.pos < s.len() && (s[self.pos].is_ascii_digit() || s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            if self.pos < s.len() && s[self.pos].is_ascii_digit() {
                while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).unwrap_or("");
        text.parse::<f64>().map(Expr::Num).map_err(|_| ParseError { pos: start, msg: format!("bad number '{text}'") })
    }
}

/// Parses `src` with `var` as the only variable name.
pub fn parse(src: &str, var: &str) -> std::result::Result<Expr, ParseError> {
    let mut p = Parser { src: src.as_bytes(), pos: 0, var };
    let e = p.expr()?;
    if p.peek().is_some() {
        return Err(p.err("trailing input"));
    }
    Ok(e)
}

fn b(e: Expr) -> Box<Expr> {
    Box::new(e)
}

impl Expr {
    pub fn eval(&self, x: f64) -> f64 {
        use Expr::*;
        match self {
            Num(c) => *c,
            Var => x,
            Neg(a) => -a.eval(x),
            Add(a, c) => a.eval(x) + c.eval(x),
            Sub(a, c) => a.eval(x) - c.eval(x),
            Mul(a, c) => a.eval(x) * c.eval(x),
            Div(a, c) => a.eval(x) / c.eval(x),
            Pow(a, c) => match **c {
                Num(n) if n == n.trunc() && n.abs() < 64.0 => a.eval(x).powi(n as i32),
                _ => a.eval(x).powf(c.eval(x)),
            },
            Ln(a) => a.eval(x).ln(),
            Exp(a) => a.eval(x).exp(),
        }
    }

    fn has_var(&self) -> bool {
        use Expr::*;
        match self {
            Num(_) => false,
            Var => true,
            Neg(a) | Ln(a) | Exp(a) => a.has_var(),
            Add(a, c) | Sub(a, c) | Mul(a, c) | Div(a, c) | Pow(a, c) => a.has_var() || c.has_var(),
        }
    }

    /// Symbolic derivative with respect to the variable.
    pub fn derivative(&self) -> Expr {
        use Expr::*;
        match self {
            Num(_) => Num(0.0),
            Var => Num(1.0),
            Neg(a) => simplify(Neg(b(a.derivative()))),
            Add(a, c) => simplify(Add(b(a.derivative()), b(c.derivative()))),
            Sub(a, c) => simplify(Sub(b(a.derivative()), b(c.derivative()))),
            Mul(a, c) => simplify(Add(b(simplify(Mul(b(a.derivative()), c.clone()))), b(simplify(Mul(a.clone(), b(c.derivative())))))),
            Div(a, c) => simplify(Div(
                b(simplify(Sub(b(simplify(Mul(b(a.derivative()), c.clone()))), b(simplify(Mul(a.clone(), b(c.derivative()))))))),
                b(Pow(c.clone(), b(Num(2.0)))),
            )),
            Pow(a, c) if !c.has_var() => {
                // (a^n)' = n a^{n-1} a'
                simplify(Mul(b(simplify(Mul(c.clone(), b(Pow(a.clone(), b(simplify(Sub(c.clone(), b(Num(1.0)))))))))), b(a.derivative())))
            }
            Pow(a, c) => {
                // (a^c)' = a^c (c' ln a + c a'/a)
                simplify(Mul(
                    b(self.clone()),
                    b(simplify(Add(
                        b(simplify(Mul(b(c.derivative()), b(Ln(a.clone()))))),
                        b(simplify(Div(b(simplify(Mul(c.clone(), b(a.derivative())))), a.clone()))),
                    ))),
                ))
            }
            Ln(a) => simplify(Div(b(a.derivative()), a.clone())),
            Exp(a) => simplify(Mul(b(self.clone()), b(a.derivative()))),
        }
    }

    /// The same function written in `s = ln x`: every occurrence of the
    /// variable becomes `exp(s)`, and `ln(exp(·))`, `exp(·)^c` are folded so
    /// that large `s` does not overflow.
    pub fn in_log_variable(&self) -> Expr {
        use Expr::*;
        match self {
            Num(c) => Num(*c),
            Var => Exp(b(Var)),
            Neg(a) => Neg(b(a.in_log_variable())),
            Add(a, c) => Add(b(a.in_log_variable()), b(c.in_log_variable())),
            Sub(a, c) => Sub(b(a.in_log_variable()), b(c.in_log_variable())),
            Mul(a, c) => Mul(b(a.in_log_variable()), b(c.in_log_variable())),
            Div(a, c) => Div(b(a.in_log_variable()), b(c.in_log_variable())),
            Pow(a, c) => match (a.in_log_variable(), c.in_log_variable()) {
                (Exp(x), e) => Exp(b(simplify(Mul(b(e), x)))),
                (x, e) => Pow(b(x), b(e)),
            },
            Ln(a) => a.in_log_variable().ln_of(),
            Exp(a) => Exp(b(a.in_log_variable())),
        }
    }

    /// An expression for `ln(self)` that avoids forming `self` where the
    /// structure allows it (so `exp(-1/t)` stays finite for tiny `t`).
    /// Assumes the factors involved are positive.
    pub fn ln_of(&self) -> Expr {
        use Expr::*;
        match self {
            Num(c) => Num(c.ln()),
            Exp(a) => (**a).clone(),
            Mul(a, c) => simplify(Add(b(a.ln_of()), b(c.ln_of()))),
            Div(a, c) => simplify(Sub(b(a.ln_of()), b(c.ln_of()))),
            Pow(a, c) => simplify(Mul(c.clone(), b(a.ln_of()))),
            other => Ln(b(other.clone())),
        }
    }
}

fn simplify(e: Expr) -> Expr {
    use Expr::*;
    match e {
        Add(a, c) => match (*a, *c) {
            (Num(x), Num(y)) => Num(x + y),
            (Num(z), o) | (o, Num(z)) if z == 0.0 => o,
            (x, y) => Add(b(x), b(y)),
        },
        Sub(a, c) => match (*a, *c) {
            (Num(x), Num(y)) => Num(x - y),
            (o, Num(z)) if z == 0.0 => o,
            (Num(z), o) if z == 0.0 => Neg(b(o)),
            (x, y) => Sub(b(x), b(y)),
        },
        Mul(a, c) => match (*a, *c) {
            (Num(x), Num(y)) => Num(x * y),
            (Num(z), _) | (_, Num(z)) if z == 0.0 => Num(0.0),
            (Num(o), x) | (x, Num(o)) if o == 1.0 => x,
            (x, y) => Mul(b(x), b(y)),
        },
        Div(a, c) => match (*a, *c) {
            (Num(z), _) if z == 0.0 => Num(0.0),
            (x, Num(o)) if o == 1.0 => x,
            (x, y) => Div(b(x), b(y)),
        },
        Neg(a) => match *a {
            Num(x) => Num(-x),
            Neg(x) => *x,
            x => Neg(b(x)),
        },
        other => other,
    }
}

/// A parsed expression together with its source text.
#[derive(Clone)]
pub struct Compiled {
    pub source: String,
    pub expr: Arc<Expr>,
}

impl Compiled {
    pub fn new(src: &str, var: &str) -> std::result::Result<Self, ParseError> {
        Ok(Compiled { source: src.to_string(), expr: Arc::new(parse(src, var)?) })
    }
    pub fn eval(&self, x: f64) -> f64 {
        self.expr.eval(x)
    }
}

impl fmt::Debug for Compiled {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.source)
    }
}

pub type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Fourth-order central difference.
pub fn central_diff<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// A real function of one variable with its derivative.
#[derive(Clone)]
pub struct ScalarFn {
    f: Fn1,
    df: Fn1,
    pub label: String,
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarFn({:?})", self.label)
    }
}

impl ScalarFn {
    pub fn new<F, D>(label: &str, f: F, df: D) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        ScalarFn { f: Arc::new(f), df: Arc::new(df), label: label.to_string() }
    }

    /// Derivative by central differences with a step proportional to `|x|`.
    pub fn numeric<F: Fn(f64) -> f64 + Send + Sync + 'static>(label: &str, f: F) -> Self {
        let f: Fn1 = Arc::new(f);
        let g = f.clone();
        let df = move |x: f64| {
            let h = 1e-3 * x.abs().max(1e-300);
            central_diff(|y| g(y), x, h)
        };
        ScalarFn { f, df: Arc::new(df), label: label.to_string() }
    }

    pub fn parse(src: &str, var: &str) -> std::result::Result<Self, ParseError> {
        let e = parse(src, var)?;
        let d = e.derivative();
        Ok(ScalarFn { f: Arc::new(move |x| e.eval(x)), df: Arc::new(move |x| d.eval(x)), label: src.to_string() })
    }

    pub fn constant(c: f64) -> Self {
        ScalarFn::new(&format!("{c}"), move |_| c, |_| 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        (self.df)(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_power() {
        let e = parse("2*t^2 - 3/t + 1", "t").unwrap();
        assert!((e.eval(2.0) - (8.0 - 1.5 + 1.0)).abs() < 1e-15);
        let e = parse("-t^2", "t").unwrap();
        assert_eq!(e.eval(3.0), -9.0);
        let e = parse("2^-1", "t").unwrap();
        assert_eq!(e.eval(0.0), 0.5);
        let e = parse("exp(-1/t)", "t").unwrap();
        assert!((e.eval(0.5) - (-2.0f64).exp()).abs() < 1e-16);
        let e = parse("1.5e-3 * ln(u)", "u").unwrap();
        assert!((e.eval(std::f64::consts::E) - 1.5e-3).abs() < 1e-18);
    }

    #[test]
    fn dangling_power_reports_position() {
        let err = parse("t^", "t").unwrap_err();
        assert_eq!(err.pos, 2);
        let err = parse("t + y", "t").unwrap_err();
        assert_eq!(err.pos, 4);
        assert!(parse("(t", "t").is_err());
        assert!(parse("t t", "t").is_err());
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        for src in ["t^3", "exp(-1/t)", "t^2/3", "1/(-ln(t))", "t*ln(t) - t", "t^t", "(1+t)^(1/2)"] {
            let e = parse(src, "t").unwrap();
            let d = e.derivative();
            let x = 0.3;
            let h = 1e-5;
            let fd = (e.eval(x + h) - e.eval(x - h)) / (2.0 * h);
            assert!((d.eval(x) - fd).abs() < 1e-6 * (1.0 + fd.abs()), "{src}: {} vs {fd}", d.eval(x));
        }
    }

    #[test]
    fn scalar_fn_derivatives() {
        let a = ScalarFn::parse("1/(-ln(u))", "u").unwrap();
        let b = ScalarFn::numeric("n", |u: f64| 1.0 / (-u.ln()));
        for x in [1e-8, 0.01, 0.5] {
            assert!((a.deriv(x) - b.deriv(x)).abs() < 1e-9 * a.deriv(x).abs());
        }
    }

    #[test]
    fn log_variable_avoids_overflow() {
        let e = parse("1/ln(u) + u^(-1)", "u").unwrap().in_log_variable();
        assert!((e.eval(1000.0) - 1e-3).abs() < 1e-18);
        let e = parse("(ln(u))^(-2)", "u").unwrap().in_log_variable();
        assert!((e.eval(2.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn log_transform_survives_underflow() {
        let e = parse("t^2*exp(-1/t)", "t").unwrap();
        let l = e.ln_of();
        let t = 1e-4;
        assert!(e.eval(t) == 0.0);
        assert!((l.eval(t) - (2.0 * t.ln() - 1.0 / t)).abs() < 1e-9);
    }
}
