//! Small closed grammar for potentials in configuration files.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | var | const | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! Variables are `x` (same as `x1`), `x1`, `x2`, `x3`; constants `pi`, `e`;
//! functions `exp ln sqrt sin cos tanh sech cosh sinh`. Expressions can be
//! differentiated symbolically, which is how `grad V` is obtained.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Sqrt,
    Sin,
    Cos,
    Tanh,
    Sech,
    Cosh,
    Sinh,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tanh" => Func::Tanh,
            "sech" => Func::Sech,
            "cosh" => Func::Cosh,
            "sinh" => Func::Sinh,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
            Func::Sech => "sech",
            Func::Cosh => "cosh",
            Func::Sinh => "sinh",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Exp => x.exp(),
            Func::Ln => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tanh => x.tanh(),
            Func::Sech => 1.0 / x.cosh(),
            Func::Cosh => x.cosh(),
            Func::Sinh => x.sinh(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

use Node::*;

fn num(x: f64) -> Node {
    Num(x)
}

fn add(a: Node, b: Node) -> Node {
    match (&a, &b) {
        (Num(x), _) if *x == 0.0 => b,
        (_, Num(y)) if *y == 0.0 => a,
        (Num(x), Num(y)) => Num(x + y),
        _ => Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Node, b: Node) -> Node {
    match (&a, &b) {
        (_, Num(y)) if *y == 0.0 => a,
        (Num(x), _) if *x == 0.0 => neg(b),
        (Num(x), Num(y)) => Num(x - y),
        _ => Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Node, b: Node) -> Node {
    match (&a, &b) {
        (Num(x), _) | (_, Num(x)) if *x == 0.0 => Num(0.0),
        (Num(x), _) if *x == 1.0 => b,
        (_, Num(y)) if *y == 1.0 => a,
        (Num(x), Num(y)) => Num(x * y),
        _ => Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Node, b: Node) -> Node {
    match (&a, &b) {
        (Num(x), _) if *x == 0.0 => Num(0.0),
        (_, Num(y)) if *y == 1.0 => a,
        _ => Div(Box::new(a), Box::new(b)),
    }
}

fn neg(a: Node) -> Node {
    match a {
        Num(x) => Num(-x),
        Neg(inner) => *inner,
        other => Neg(Box::new(other)),
    }
}

fn pow(a: Node, b: Node) -> Node {
    match (&a, &b) {
        (_, Num(y)) if *y == 1.0 => a,
        (_, Num(y)) if *y == 0.0 => Num(1.0),
        _ => Pow(Box::new(a), Box::new(b)),
    }
}

fn call(f: Func, a: Node) -> Node {
    Call(f, Box::new(a))
}

impl Node {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Num(v) => *v,
            Var(i) => x.get(*i).copied().unwrap_or(0.0),
            Neg(a) => -a.eval(x),
            Add(a, b) => a.eval(x) + b.eval(x),
            Sub(a, b) => a.eval(x) - b.eval(x),
            Mul(a, b) => a.eval(x) * b.eval(x),
            Div(a, b) => a.eval(x) / b.eval(x),
            Pow(a, b) => {
                let base = a.eval(x);
                match **b {
                    Num(e) if e.fract() == 0.0 && e.abs() < 64.0 => base.powi(e as i32),
                    _ => base.powf(b.eval(x)),
                }
            }
            Call(f, a) => f.apply(a.eval(x)),
        }
    }

    fn max_var(&self) -> Option<usize> {
        match self {
            Num(_) => None,
            Var(i) => Some(*i),
            Neg(a) | Call(_, a) => a.max_var(),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Pow(a, b) => a.max_var().max(b.max_var()),
        }
    }

    fn is_constant(&self) -> bool {
        self.max_var().is_none()
    }

    pub fn derivative(&self, i: usize) -> Node {
        match self {
            Num(_) => num(0.0),
            Var(j) => num(if *j == i { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.derivative(i)),
            Add(a, b) => add(a.derivative(i), b.derivative(i)),
            Sub(a, b) => sub(a.derivative(i), b.derivative(i)),
            Mul(a, b) => add(mul(a.derivative(i), (**b).clone()), mul((**a).clone(), b.derivative(i))),
            Div(a, b) => div(
                sub(mul(a.derivative(i), (**b).clone()), mul((**a).clone(), b.derivative(i))),
                pow((**b).clone(), num(2.0)),
            ),
            Pow(a, b) if b.is_constant() => {
                let e = b.eval(&[]);
                mul(mul(num(e), pow((**a).clone(), num(e - 1.0))), a.derivative(i))
            }
            Pow(a, b) => {
                // d(a^b) = a^b (b' ln a + b a' / a)
                let term = add(
                    mul(b.derivative(i), call(Func::Ln, (**a).clone())),
                    div(mul((**b).clone(), a.derivative(i)), (**a).clone()),
                );
                mul(self.clone(), term)
            }
            Call(f, a) => {
                let u = (**a).clone();
                let outer = match f {
                    Func::Exp => call(Func::Exp, u),
                    Func::Ln => div(num(1.0), u),
                    Func::Sqrt => div(num(0.5), call(Func::Sqrt, u)),
                    Func::Sin => call(Func::Cos, u),
                    Func::Cos => neg(call(Func::Sin, u)),
                    Func::Tanh => pow(call(Func::Sech, u), num(2.0)),
                    Func::Sech => neg(mul(call(Func::Sech, u.clone()), call(Func::Tanh, u))),
                    Func::Cosh => call(Func::Sinh, u),
                    Func::Sinh => call(Func::Cosh, u),
                };
                mul(outer, a.derivative(i))
            }
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num(v) => write!(f, "{v}"),
            Var(i) => write!(f, "x{}", i + 1),
            Neg(a) => write!(f, "(-{a})"),
            Add(a, b) => write!(f, "({a} + {b})"),
            Sub(a, b) => write!(f, "({a} - {b})"),
            Mul(a, b) => write!(f, "({a} * {b})"),
            Div(a, b) => write!(f, "({a} / {b})"),
            Pow(a, b) => write!(f, "({a}^{b})"),
            Call(g, a) => write!(f, "{}({a})", g.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    source: String,
    root: Node,
}

impl Expression {
    pub fn parse(source: &str) -> Result<Self> {
        let tokens = tokenize(source)?;
        let mut parser = Parser { tokens, pos: 0 };
        let root = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(Error::Expression(format!("unexpected trailing input in '{source}'")));
        }
        Ok(Self {
            source: source.to_string(),
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.root.eval(x)
    }

    pub fn eval1(&self, x: f64) -> f64 {
        self.root.eval(&[x])
    }

    /// Number of coordinates referenced (at least 1).
    pub fn dim(&self) -> usize {
        self.root.max_var().map_or(1, |i| i + 1)
    }

    /// No coordinate appears.
    pub fn is_constant(&self) -> bool {
        self.root.max_var().is_none()
    }

    pub fn derivative(&self, i: usize) -> Expression {
        let root = self.root.derivative(i);
        Self {
            source: root.to_string(),
            root,
        }
    }

    pub fn gradient(&self, dim: usize) -> Vec<Expression> {
        (0..dim).map(|i| self.derivative(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(s: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = s.chars().collect();
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
                .map_err(|_| Error::Expression(format!("bad number '{text}'")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else if c == '(' {
            out.push(Token::LParen);
            i += 1;
        } else if c == ')' {
            out.push(Token::RParen);
            i += 1;
        } else {
            return Err(Error::Expression(format!("unexpected character '{c}'")));
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

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == '+' {
                Add(Box::new(lhs), Box::new(rhs))
            } else {
                Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == '*' {
                Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        if let Some(Token::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(Neg(Box::new(self.unary()?)));
        }
        if let Some(Token::Op('+')) = self.peek() {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Num(v)),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                match self.next() {
                    Some(Token::RParen) => Ok(inner),
                    _ => Err(Error::Expression("missing ')'".into())),
                }
            }
            Some(Token::Ident(name)) => {
                if let Some(f) = Func::from_name(&name) {
                    match self.next() {
                        Some(Token::LParen) => {}
                        _ => return Err(Error::Expression(format!("'{name}' must be followed by '('"))),
                    }
                    let arg = self.expr()?;
                    match self.next() {
                        Some(Token::RParen) => Ok(Call(f, Box::new(arg))),
                        _ => Err(Error::Expression("missing ')'".into())),
                    }
                } else {
                    match name.as_str() {
                        "x" | "x1" => Ok(Var(0)),
                        "x2" => Ok(Var(1)),
                        "x3" => Ok(Var(2)),
                        "pi" => Ok(Num(std::f64::consts::PI)),
                        "e" => Ok(Num(std::f64::consts::E)),
                        _ => Err(Error::Expression(format!("unknown identifier '{name}'"))),
                    }
                }
            }
            Some(t) => Err(Error::Expression(format!("unexpected token {t:?}"))),
            None => Err(Error::Expression("unexpected end of expression".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let e = Expression::parse("1 + 2*x^2 - -x").unwrap();
        assert_eq!(e.eval1(3.0), 1.0 + 18.0 + 3.0);
        assert_eq!(Expression::parse("-x^2").unwrap().eval1(2.0), -4.0);
        assert_eq!(Expression::parse("2^3^2").unwrap().eval(&[]), 512.0);
        assert_eq!(Expression::parse("1.5e-1*x2").unwrap().eval(&[0.0, 2.0]), 0.3);
        assert_eq!(Expression::parse("x1 + x3").unwrap().dim(), 3);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let srcs = [
            "1 + (x^2 - 1)^2",
            "exp(-x^2) * sech(x) + tanh(x)/(2 + x^2)",
            "sqrt(1 + x^2) + sin(x)*cos(x) + x^x",
            "1 + x1^2 + x2^4 + x1*x2",
        ];
        for s in srcs {
            let e = Expression::parse(s).unwrap();
            let x = [0.7, -0.4];
            for i in 0..e.dim() {
                let d = e.derivative(i);
                let h = 1e-6;
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                let fd = (e.eval(&xp) - e.eval(&xm)) / (2.0 * h);
                assert!((d.eval(&x) - fd).abs() < 1e-7, "{s} d{i}: {} vs {fd}", d.eval(&x));
            }
        }
    }

    #[test]
    fn errors() {
        assert!(Expression::parse("1 + ").is_err());
        assert!(Expression::parse("foo(x)").is_err());
        assert!(Expression::parse("(x").is_err());
        assert!(Expression::parse("x $ 2").is_err());
    }
}
