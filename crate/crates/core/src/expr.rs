//! Small analytic expressions in `x1`, `x2`, evaluated on jets.
//!
//! Grammar: numbers, `x1`/`x2` (aliases `x`/`y`), constants `pi` and `e`,
//! `+ - * / ^`, unary minus and the functions `sin cos tan exp ln log sqrt
//! sinh cosh abs`. `^` is right associative and binds tighter than unary
//! minus, so `-x^2` is `-(x^2)`.

use crate::error::{Error, Result};
use crate::jet::Jet;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Sinh,
    Cosh,
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
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

/// A parsed expression together with its source text.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
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
                let save = i;
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| Error::Expression(format!("bad number `{text}`")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Expression(format!("unexpected character `{c}` in `{src}`")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, c: char) -> Result<()> {
        match self.next() {
            Some(Tok::Op(o)) if o == c => Ok(()),
            other => Err(Error::Expression(format!("expected `{c}`, found {other:?}"))),
        }
    }

    fn expr(&mut self, min_bp: u8) -> Result<Node> {
        let mut lhs = match self.next() {
            Some(Tok::Num(v)) => Node::Num(v),
            Some(Tok::Op('(')) => {
                let e = self.expr(0)?;
                self.expect(')')?;
                e
            }
            Some(Tok::Op('-')) => Node::Neg(Box::new(self.expr(5)?)),
            Some(Tok::Op('+')) => self.expr(5)?,
            Some(Tok::Ident(name)) => self.ident(&name)?,
            other => return Err(Error::Expression(format!("unexpected token {other:?}"))),
        };
        loop {
            let op = match self.peek() {
                Some(Tok::Op(c)) if "+-*/^".contains(*c) => *c,
                Some(Tok::Op(')')) | None => break,
                Some(t) => return Err(Error::Expression(format!("unexpected token {t:?}"))),
            };
            let (lbp, rbp) = match op {
                '+' | '-' => (1, 2),
                '*' | '/' => (3, 4),
                _ => (8, 7),
            };
            if lbp < min_bp {
                break;
            }
            self.pos += 1;
            let rhs = Box::new(self.expr(rbp)?);
            let l = Box::new(lhs);
            lhs = match op {
                '+' => Node::Add(l, rhs),
                '-' => Node::Sub(l, rhs),
                '*' => Node::Mul(l, rhs),
                '/' => Node::Div(l, rhs),
                _ => Node::Pow(l, rhs),
            };
        }
        Ok(lhs)
    }

    fn ident(&mut self, name: &str) -> Result<Node> {
        let func = match name {
            "x1" | "x" => return Ok(Node::Var(0)),
            "x2" | "y" => return Ok(Node::Var(1)),
            "pi" => return Ok(Node::Num(std::f64::consts::PI)),
            "e" => return Ok(Node::Num(std::f64::consts::E)),
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            _ => return Err(Error::Expression(format!("unknown identifier `{name}`"))),
        };
        self.expect('(')?;
        let arg = self.expr(0)?;
        self.expect(')')?;
        Ok(Node::Call(func, Box::new(arg)))
    }
}

fn eval(node: &Node, vars: &[Jet; 2], order: usize) -> Jet {
    match node {
        Node::Num(v) => Jet::constant(*v, order),
        Node::Var(i) => vars[*i],
        Node::Neg(a) => -eval(a, vars, order),
        Node::Add(a, b) => eval(a, vars, order) + eval(b, vars, order),
        Node::Sub(a, b) => eval(a, vars, order) - eval(b, vars, order),
        Node::Mul(a, b) => eval(a, vars, order) * eval(b, vars, order),
        Node::Div(a, b) => eval(a, vars, order) / eval(b, vars, order),
        Node::Pow(a, b) => {
            let base = eval(a, vars, order);
            match constant_value(b) {
                Some(p) => base.powf(p),
                None => (base.ln() * eval(b, vars, order)).exp(),
            }
        }
        Node::Call(f, a) => {
            let x = eval(a, vars, order);
            match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Tan => x.sin() / x.cos(),
                Func::Exp => x.exp(),
                Func::Ln => x.ln(),
                Func::Sqrt => x.sqrt(),
                Func::Sinh => x.sinh(),
                Func::Cosh => x.cosh(),
            }
        }
    }
}

fn constant_value(node: &Node) -> Option<f64> {
    match node {
        Node::Num(v) => Some(*v),
        Node::Neg(a) => constant_value(a).map(|v| -v),
        Node::Add(a, b) => Some(constant_value(a)? + constant_value(b)?),
        Node::Sub(a, b) => Some(constant_value(a)? - constant_value(b)?),
        Node::Mul(a, b) => Some(constant_value(a)? * constant_value(b)?),
        Node::Div(a, b) => Some(constant_value(a)? / constant_value(b)?),
        Node::Pow(a, b) => Some(constant_value(a)?.powf(constant_value(b)?)),
        _ => None,
    }
}

fn depends_on_vars(node: &Node) -> bool {
    match node {
        Node::Num(_) => false,
        Node::Var(_) => true,
        Node::Neg(a) | Node::Call(_, a) => depends_on_vars(a),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
            depends_on_vars(a) || depends_on_vars(b)
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let toks = tokenize(src)?;
        if toks.is_empty() {
            return Err(Error::Expression("empty expression".into()));
        }
        let mut p = Parser { toks, pos: 0 };
        let root = p.expr(0)?;
        if p.pos != p.toks.len() {
            return Err(Error::Expression(format!("trailing input in `{src}`")));
        }
        Ok(Expr { source: src.to_string(), root })
    }

    pub fn constant(v: f64) -> Self {
        Expr { source: format!("{v}"), root: Node::Num(v) }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// `Some(v)` when the expression does not depend on `x1`, `x2`.
    pub fn as_constant(&self) -> Option<f64> {
        if depends_on_vars(&self.root) {
            None
        } else {
            constant_value(&self.root)
        }
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.jet(x, 0).value()
    }

    /// Taylor jet of the expression at `x`.
    pub fn jet(&self, x: [f64; 2], order: usize) -> Jet {
        eval(&self.root, &Jet::coordinates(x, order), order)
    }

    /// Evaluates with arbitrary jets substituted for `x1`, `x2`.
    pub fn jet_of(&self, vars: &[Jet; 2]) -> Jet {
        eval(&self.root, vars, vars[0].order().min(vars[1].order()))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl std::str::FromStr for Expr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Expr::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn precedence_and_associativity() {
        let at = [2.0, 3.0];
        assert_relative_eq!(Expr::parse("1 + 2*3").unwrap().value(at), 7.0);
        assert_relative_eq!(Expr::parse("2^3^2").unwrap().value(at), 512.0);
        assert_relative_eq!(Expr::parse("-x^2").unwrap().value(at), -4.0);
        assert_relative_eq!(Expr::parse("(x1 - x2)/2").unwrap().value(at), -0.5);
        assert_relative_eq!(Expr::parse("1.5e1 + y").unwrap().value(at), 18.0);
        assert_relative_eq!(Expr::parse("sin(pi/2)*e").unwrap().value(at), std::f64::consts::E);
    }

    #[test]
    fn derivatives_through_functions() {
        let ex = Expr::parse("exp(x1)*cos(x2) + x1^3*x2").unwrap();
        let at = [0.4, -0.3];
        let j = ex.jet(at, 4);
        let (x, y) = (0.4f64, -0.3f64);
        assert_relative_eq!(j.deriv(2, 1), -x.exp() * y.sin() + 6.0 * x, epsilon = 1e-12);
        assert_relative_eq!(j.deriv(3, 1), -x.exp() * y.sin() + 6.0, epsilon = 1e-12);
        // exp(x)cos(y) is harmonic, so only x^3 y contributes to the Laplacian
        assert_relative_eq!(j.laplacian().value(), 6.0 * x * y, epsilon = 1e-12);
    }

    #[test]
    fn constants_are_detected() {
        assert_eq!(Expr::parse("2*pi").unwrap().as_constant(), Some(2.0 * std::f64::consts::PI));
        assert_eq!(Expr::parse("2*x").unwrap().as_constant(), None);
    }

    #[test]
    fn errors_are_reported() {
        assert!(Expr::parse("").is_err());
        assert!(Expr::parse("foo(x)").is_err());
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("(1").is_err());
        assert!(Expr::parse("1 $ 2").is_err());
    }
}
