//! Complex-valued scalar expressions over chart coordinates, used for the matrix entries of
//! custom gauge maps in config files.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, numbers, the constants `i`, `pi`, `e`,
//! named variables, and the functions `exp ln sqrt sin cos conj re im abs`.

use std::fmt;

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct ExprError {
    pub source: String,
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at offset {} in {:?}", self.message, self.position, self.source)
    }
}

impl std::error::Error for ExprError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Exp,
    Ln,
    Sqrt,
    Sin,
    Cos,
    Conj,
    Re,
    Im,
    Abs,
}

impl Func {
    fn lookup(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "conj" => Func::Conj,
            "re" => Func::Re,
            "im" => Func::Im,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn apply(self, z: Complex64) -> Complex64 {
        match self {
            Func::Exp => z.exp(),
            Func::Ln => z.ln(),
            Func::Sqrt => z.sqrt(),
            Func::Sin => z.sin(),
            Func::Cos => z.cos(),
            Func::Conj => z.conj(),
            Func::Re => Complex64::new(z.re, 0.0),
            Func::Im => Complex64::new(z.im, 0.0),
            Func::Abs => Complex64::new(z.norm(), 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(Complex64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression bound to an ordered list of variable names.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    arity: usize,
}

impl Expr {
    /// Parses `source`; `variables[j]` is bound to the `j`-th evaluation argument.
    pub fn parse(source: &str, variables: &[&str]) -> Result<Self, ExprError> {
        let mut p = Parser { src: source, bytes: source.as_bytes(), pos: 0, vars: variables };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.bytes.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Self { root, arity: variables.len() })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn eval(&self, vars: &[f64]) -> Complex64 {
        eval(&self.root, vars)
    }
}

fn eval(node: &Node, vars: &[f64]) -> Complex64 {
    match node {
        Node::Const(z) => *z,
        Node::Var(j) => Complex64::new(vars[*j], 0.0),
        Node::Neg(a) => -eval(a, vars),
        Node::Add(a, b) => eval(a, vars) + eval(b, vars),
        Node::Sub(a, b) => eval(a, vars) - eval(b, vars),
        Node::Mul(a, b) => eval(a, vars) * eval(b, vars),
        Node::Div(a, b) => eval(a, vars) / eval(b, vars),
        Node::Pow(a, b) => {
            let (base, exp) = (eval(a, vars), eval(b, vars));
            if exp.im == 0.0 && exp.re.fract() == 0.0 && exp.re.abs() <= 64.0 {
                base.powi(exp.re as i32)
            } else {
                base.powc(exp)
            }
        }
        Node::Call(f, a) => f.apply(eval(a, vars)),
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    vars: &'a [&'a str],
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ExprError {
        ExprError { source: self.src.to_string(), position: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        let base = self.atom()?;
        if self.eat(b'^') {
            return Ok(Node::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(_) => Err(self.error("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while self.pos < self.bytes.len() && (self.bytes[self.pos].is_ascii_digit() || self.bytes[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < self.bytes.len() && matches!(self.bytes[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.bytes.len() && matches!(self.bytes[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == digits {
                self.pos = save;
            }
        }
        self.src[start..self.pos]
            .parse::<f64>()
            .map(|v| Node::Const(Complex64::new(v, 0.0)))
            .map_err(|_| ExprError { source: self.src.to_string(), position: start, message: "malformed number".into() })
    }

    fn ident(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while self.pos < self.bytes.len() && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        if let Some(j) = self.vars.iter().position(|v| *v == name) {
            return Ok(Node::Var(j));
        }
        if let Some(f) = Func::lookup(name) {
            if !self.eat(b'(') {
                return Err(self.error("expected '(' after function name"));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.error("expected ')'"));
            }
            return Ok(Node::Call(f, Box::new(arg)));
        }
        match name {
            "i" => Ok(Node::Const(Complex64::new(0.0, 1.0))),
            "pi" => Ok(Node::Const(Complex64::new(std::f64::consts::PI, 0.0))),
            "e" => Ok(Node::Const(Complex64::new(std::f64::consts::E, 0.0))),
            _ => Err(ExprError { source: self.src.to_string(), position: start, message: format!("unknown name {name:?}") }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn val(s: &str, vars: &[&str], at: &[f64]) -> Complex64 {
        Expr::parse(s, vars).unwrap().eval(at)
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(val("1 + 2*3", &[], &[]), Complex64::new(7.0, 0.0));
        assert_eq!(val("-2^2", &[], &[]), Complex64::new(-4.0, 0.0));
        assert_eq!(val("(1+i)*(1-i)", &[], &[]), Complex64::new(2.0, 0.0));
        assert_eq!(val("2^3^2", &[], &[]), Complex64::new(512.0, 0.0));
        assert_eq!(val("1.5e-1 * 2", &[], &[]), Complex64::new(0.3, 0.0));
    }

    #[test]
    fn variables_and_functions() {
        let z = val("exp(i*theta)", &["theta"], &[std::f64::consts::FRAC_PI_2]);
        assert!((z - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        let w = val("conj(cos(eta)*exp(i*xi1))", &["eta", "xi1"], &[0.3, 1.1]);
        assert!((w - (Complex64::new(0.0, -1.1).exp() * 0.3f64.cos())).norm() < 1e-15);
        assert_eq!(val("abs(3 + 4*i) + re(i) + im(2*i)", &[], &[]), Complex64::new(7.0, 0.0));
    }

    #[test]
    fn errors_carry_positions() {
        let e = Expr::parse("1 + foo", &["x"]).unwrap_err();
        assert_eq!(e.position, 4);
        assert!(Expr::parse("(1 + 2", &[]).is_err());
        assert!(Expr::parse("1 2", &[]).is_err());
        assert!(Expr::parse("sin 2", &[]).is_err());
    }
}
