//! Custom component densities from a small text format:
//!
//! ```text
//! name = quartic
//! log_density = -x^2/2 - 0.1*x^4
//! support = -10, 10
//! ```
//!
//! The expression grammar has `+ - * / ^`, unary minus, parentheses,
//! `exp`, `log`, `abs`, numeric literals, the constants `pi` and `e`, and
//! the variable `x`. The score is obtained by forward-mode differentiation,
//! so it is exact rather than a finite difference. The density need not be
//! normalised.

use std::fmt;

use mcmclab_core::target::{LogDensity1D, TargetModel1D};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    X,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Exp(Box<Node>),
    Log(Box<Node>),
    Abs(Box<Node>),
}

/// Value and derivative with respect to `x`.
#[derive(Debug, Clone, Copy)]
struct Dual {
    v: f64,
    d: f64,
}

impl Node {
    fn eval(&self, x: f64) -> Dual {
        match self {
            Node::Num(c) => Dual { v: *c, d: 0.0 },
            Node::X => Dual { v: x, d: 1.0 },
            Node::Neg(a) => {
                let a = a.eval(x);
                Dual { v: -a.v, d: -a.d }
            }
            Node::Add(a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                Dual { v: a.v + b.v, d: a.d + b.d }
            }
            Node::Sub(a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                Dual { v: a.v - b.v, d: a.d - b.d }
            }
            Node::Mul(a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                Dual {
                    v: a.v * b.v,
                    d: a.d * b.v + a.v * b.d,
                }
            }
            Node::Div(a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                Dual {
                    v: a.v / b.v,
                    d: (a.d * b.v - a.v * b.d) / (b.v * b.v),
                }
            }
            Node::Pow(a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                if b.d == 0.0 {
                    // constant exponent: valid for negative bases with integer powers
                    let v = a.v.powf(b.v);
                    let d = if a.d == 0.0 { 0.0 } else { b.v * a.v.powf(b.v - 1.0) * a.d };
                    Dual { v, d }
                } else {
                    let v = a.v.powf(b.v);
                    Dual {
                        v,
                        d: v * (b.d * a.v.ln() + b.v * a.d / a.v),
                    }
                }
            }
            Node::Exp(a) => {
                let a = a.eval(x);
                let v = a.v.exp();
                Dual { v, d: v * a.d }
            }
            Node::Log(a) => {
                let a = a.eval(x);
                Dual {
                    v: a.v.ln(),
                    d: a.d / a.v,
                }
            }
            Node::Abs(a) => {
                let a = a.eval(x);
                Dual {
                    v: a.v.abs(),
                    d: if a.v < 0.0 { -a.d } else { a.d },
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
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
            // exponent part, e.g. 1e-3
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
                .map_err(|_| Error::usage(format!("malformed number {text:?} in expression")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            return Err(Error::usage(format!("unexpected character {c:?} in expression")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat_op(&mut self, op: char) -> bool {
        if self.peek() == Some(&Token::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_op('+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_op('-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_op('*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_op('/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    // unary minus binds looser than ^, so -x^2 is -(x^2)
    fn unary(&mut self) -> Result<Node> {
        if self.eat_op('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat_op('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat_op('^') {
            let exponent = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let tok = self
            .peek()
            .cloned()
            .ok_or_else(|| Error::usage("expression ends unexpectedly"))?;
        self.pos += 1;
        match tok {
            Token::Num(v) => Ok(Node::Num(v)),
            Token::Op('(') => {
                let inner = self.expr()?;
                if !self.eat_op(')') {
                    return Err(Error::usage("missing ')' in expression"));
                }
                Ok(inner)
            }
            Token::Ident(name) => match name.as_str() {
                "x" => Ok(Node::X),
                "pi" => Ok(Node::Num(std::f64::consts::PI)),
                "e" => Ok(Node::Num(std::f64::consts::E)),
                "exp" | "log" | "abs" => {
                    if !self.eat_op('(') {
                        return Err(Error::usage(format!("expected '(' after {name}")));
                    }
                    let arg = Box::new(self.expr()?);
                    if !self.eat_op(')') {
                        return Err(Error::usage(format!("missing ')' after {name}(...")));
                    }
                    Ok(match name.as_str() {
                        "exp" => Node::Exp(arg),
                        "log" => Node::Log(arg),
                        _ => Node::Abs(arg),
                    })
                }
                other => Err(Error::usage(format!("unknown identifier {other:?} in expression"))),
            },
            Token::Op(c) => Err(Error::usage(format!("unexpected {c:?} in expression"))),
        }
    }
}

/// A parsed log-density expression in `x`.
#[derive(Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let tokens = tokenize(src)?;
        if tokens.is_empty() {
            return Err(Error::usage("empty expression"));
        }
        let mut p = Parser { tokens, pos: 0 };
        let root = p.expr()?;
        if let Some(t) = p.peek() {
            return Err(Error::usage(format!("unexpected trailing {t:?} in expression")));
        }
        Ok(Expr {
            source: src.to_string(),
            root,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.root.eval(x).v
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.root.eval(x).d
    }
}

impl LogDensity1D for Expr {
    fn log_density(&self, x: f64) -> f64 {
        self.eval(x)
    }

    fn dlog_density(&self, x: f64) -> f64 {
        self.derivative(x)
    }
}

/// Contents of a density spec file.
#[derive(Debug, Clone)]
pub struct DensitySpec {
    pub name: String,
    pub log_density: Expr,
    pub support: (f64, f64),
}

impl DensitySpec {
    pub fn parse(text: &str) -> Result<Self> {
        let (mut name, mut expr, mut support) = (None, None, None);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::usage(format!("line {}: expected key = value, got {line:?}", lineno + 1)))?;
            let value = value.trim();
            match key.trim() {
                "name" => name = Some(value.to_string()),
                "log_density" => expr = Some(Expr::parse(value)?),
                "support" => {
                    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                    let nums = parts
                        .iter()
                        .map(|p| p.parse::<f64>().map_err(|_| Error::usage(format!("malformed support bound {p:?}"))))
                        .collect::<Result<Vec<f64>>>()?;
                    if nums.len() != 2 || !(nums[0] < nums[1]) || !nums.iter().all(|v| v.is_finite()) {
                        return Err(Error::usage(format!("support must be 'lo, hi' with lo < hi, got {value:?}")));
                    }
                    support = Some((nums[0], nums[1]));
                }
                other => return Err(Error::usage(format!("unknown density spec key {other:?}"))),
            }
        }
        Ok(DensitySpec {
            name: name.ok_or_else(|| Error::usage("density spec needs a name"))?,
            log_density: expr.ok_or_else(|| Error::usage("density spec needs log_density"))?,
            support: support.ok_or_else(|| Error::usage("density spec needs support"))?,
        })
    }

    /// Normalises the density on its support and tabulates a sampler.
    pub fn build(&self) -> Result<TargetModel1D> {
        Ok(TargetModel1D::builder(self.name.clone(), self.log_density.clone())
            .support(self.support.0, self.support.1)
            .build()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let e = Expr::parse("-x^2/2 + 3*x - 1").unwrap();
        assert_eq!(e.eval(2.0), -2.0 + 6.0 - 1.0);
        assert_eq!(e.derivative(2.0), -2.0 + 3.0);
        assert_eq!(Expr::parse("2^3^2").unwrap().eval(0.0), 512.0);
        assert_eq!(Expr::parse("(1+2)*3").unwrap().eval(0.0), 9.0);
    }

    #[test]
    fn functions_and_constants() {
        let e = Expr::parse("log(exp(x)) + abs(-x) * pi - e").unwrap();
        let x = 0.7;
        assert!((e.eval(x) - (x + x * std::f64::consts::PI - std::f64::consts::E)).abs() < 1e-14);
        assert!((e.derivative(x) - (1.0 + std::f64::consts::PI)).abs() < 1e-14);
        assert_eq!(Expr::parse("1.5e-1").unwrap().eval(0.0), 0.15);
    }

    #[test]
    fn negative_base_integer_power() {
        let e = Expr::parse("x^3").unwrap();
        assert_eq!(e.eval(-2.0), -8.0);
        assert_eq!(e.derivative(-2.0), 12.0);
    }

    #[test]
    fn malformed_expressions() {
        for bad in ["", "x +", "sin(x)", "(x", "x $ 2", "exp x", "2 3"] {
            assert!(Expr::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn spec_file() {
        let s = DensitySpec::parse("# comment\nname = q\nlog_density = -x^4\nsupport = -4, 4\n").unwrap();
        assert_eq!(s.name, "q");
        assert_eq!(s.support, (-4.0, 4.0));
        assert!(DensitySpec::parse("name = q\nsupport = 1, -1\nlog_density = x").is_err());
        assert!(DensitySpec::parse("name = q\ncolour = red").is_err());
    }
}
