//! Restricted arithmetic expressions used by configuration files.
//!
//! Grammar: `+ - * /`, `^` (right associative), parentheses, numeric literals,
//! named variables and constants, and the functions `sqrt abs exp ln sin cos tan
//! asin acos atan min max pow`. Variables are resolved against a [`Scope`] at
//! compile time, so evaluation never looks names up.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sets::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Abs,
    Exp,
    Ln,
    Sin,
    Cos,
    Tan,
    Asin,
    Acos,
    Atan,
    Min,
    Max,
    Pow,
}

impl Func {
    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "asin" => Func::Asin,
            "acos" => Func::Acos,
            "atan" => Func::Atan,
            "min" => Func::Min,
            "max" => Func::Max,
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    fn arity_ok(self, n: usize) -> bool {
        match self {
            Func::Min | Func::Max => n >= 1,
            Func::Pow => n == 2,
            _ => n == 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// Name resolution for compilation: variables map to slots of the evaluation
/// vector, constants are folded in.
#[derive(Debug, Clone, Default)]
pub struct Scope {
    vars: HashMap<String, usize>,
    consts: HashMap<String, f64>,
    len: usize,
}

impl Scope {
    pub fn new() -> Self {
        let mut s = Scope::default();
        s.consts.insert("pi".into(), std::f64::consts::PI);
        s
    }

    /// Appends a block of variables `prefix1..prefixN`. When `alias` is given and
    /// the block has one entry, `alias` also refers to it.
    pub fn push_block(&mut self, prefix: &str, count: usize, alias: Option<&str>) -> &mut Self {
        for i in 0..count {
            self.vars.insert(format!("{}{}", prefix, i + 1), self.len + i);
        }
        if let (Some(a), 1) = (alias, count) {
            self.vars.insert(a.to_string(), self.len);
        }
        self.len += count;
        self
    }

    pub fn constant(&mut self, name: &str, value: f64) -> &mut Self {
        self.consts.insert(name.to_string(), value);
        self
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn slot(&self, name: &str) -> Option<usize> {
        self.vars.get(name).copied()
    }
}

/// A compiled expression over a fixed-length evaluation vector.
#[derive(Debug, Clone)]
pub struct Expr {
    pub source: String,
    pub root: Node,
    pub arity: usize,
}

impl Expr {
    pub fn parse(src: &str, scope: &Scope) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { toks: &tokens, pos: 0, scope };
        let root = p.expr()?;
        if p.pos != tokens.len() {
            return Err(Error::Expr(format!("unexpected `{:?}` in `{}`", tokens[p.pos], src)));
        }
        Ok(Expr { source: src.to_string(), root, arity: scope.len() })
    }

    pub fn eval<T: Real>(&self, z: &[T]) -> T {
        eval(&self.root, z)
    }

    /// Value and gradient by forward-mode differentiation. Kinks (`abs`, `min`,
    /// `max`) take the derivative of the branch selected at `z`.
    pub fn eval_grad<T: Real>(&self, z: &[T]) -> (T, Vec<T>) {
        let d = dual(&self.root, z);
        (d.0, d.1)
    }

    /// True when the expression reads any of the given slots.
    pub fn depends_on(&self, slots: &[usize]) -> bool {
        reads(&self.root, slots)
    }

    /// True when the expression is affine in the given slots (others held fixed).
    pub fn is_affine_in(&self, slots: &[usize]) -> bool {
        degree(&self.root, slots).is_some()
    }
}

impl<T: Real> ScalarField<T> for Expr {
    fn value(&self, z: &[T]) -> T {
        self.eval(z)
    }

    fn gradient(&self, z: &[T]) -> Vec<T> {
        self.eval_grad(z).1
    }
}

// ---------------------------------------------------------------- lexing

#[derive(Debug, Clone, PartialEq)]
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
                let mut k = i + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    i = k;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<f64>().map_err(|_| Error::Expr(format!("bad number `{}`", s)))?;
            out.push(Tok::Num(v));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Expr(format!("unexpected character `{}` in `{}`", c, src)));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- parsing

struct Parser<'a> {
    toks: &'a [Tok],
    pos: usize,
    scope: &'a Scope,
}

impl Parser<'_> {
    fn peek_op(&self) -> Option<char> {
        match self.toks.get(self.pos) {
            Some(Tok::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek_op() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Expr(format!("expected `{}`", c)))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == '+' {
                Node::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == '*' {
                Node::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.toks.get(self.pos).cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Node::Const(v))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.peek_op() == Some('(') {
                    let f = Func::from_name(&name)
                        .ok_or_else(|| Error::Expr(format!("unknown function `{}`", name)))?;
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while self.peek_op() == Some(',') {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    if !f.arity_ok(args.len()) {
                        return Err(Error::Expr(format!("wrong number of arguments to `{}`", name)));
                    }
                    return Ok(Node::Call(f, args));
                }
                if let Some(slot) = self.scope.vars.get(&name) {
                    Ok(Node::Var(*slot))
                } else if let Some(v) = self.scope.consts.get(&name) {
                    Ok(Node::Const(*v))
                } else {
                    Err(Error::Expr(format!("unknown name `{}`", name)))
                }
            }
            other => Err(Error::Expr(format!("unexpected token {:?}", other))),
        }
    }
}

// ---------------------------------------------------------------- evaluation

fn eval<T: Real>(n: &Node, z: &[T]) -> T {
    match n {
        Node::Const(v) => T::lit(*v),
        Node::Var(i) => z[*i],
        Node::Neg(a) => -eval(a, z),
        Node::Add(a, b) => eval(a, z) + eval(b, z),
        Node::Sub(a, b) => eval(a, z) - eval(b, z),
        Node::Mul(a, b) => eval(a, z) * eval(b, z),
        Node::Div(a, b) => eval(a, z) / eval(b, z),
        Node::Pow(a, b) => pow_val(eval(a, z), b, z),
        Node::Call(f, args) => {
            let a = eval(&args[0], z);
            match f {
                Func::Sqrt => a.sqrt(),
                Func::Abs => a.abs(),
                Func::Exp => a.exp(),
                Func::Ln => a.ln(),
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Tan => a.tan(),
                Func::Asin => a.asin(),
                Func::Acos => a.acos(),
                Func::Atan => a.atan(),
                Func::Min => args[1..].iter().fold(a, |m, e| m.min(eval(e, z))),
                Func::Max => args[1..].iter().fold(a, |m, e| m.max(eval(e, z))),
                Func::Pow => pow_val(a, &args[1], z),
            }
        }
    }
}

fn pow_val<T: Real>(a: T, exp: &Node, z: &[T]) -> T {
    match exp {
        Node::Const(v) if v.fract() == 0.0 && v.abs() < 64.0 => a.powi(*v as i32),
        _ => a.powf(eval(exp, z)),
    }
}

type Dual<T> = (T, Vec<T>);

fn dual<T: Real>(n: &Node, z: &[T]) -> Dual<T> {
    let k = z.len();
    match n {
        Node::Const(v) => (T::lit(*v), vec![T::zero(); k]),
        Node::Var(i) => {
            let mut g = vec![T::zero(); k];
            g[*i] = T::one();
            (z[*i], g)
        }
        Node::Neg(a) => {
            let (v, g) = dual(a, z);
            (-v, g.into_iter().map(|x| -x).collect())
        }
        Node::Add(a, b) => lin(dual(a, z), dual(b, z), T::one()),
        Node::Sub(a, b) => lin(dual(a, z), dual(b, z), -T::one()),
        Node::Mul(a, b) => {
            let (va, ga) = dual(a, z);
            let (vb, gb) = dual(b, z);
            (va * vb, ga.iter().zip(&gb).map(|(x, y)| *x * vb + va * *y).collect())
        }
        Node::Div(a, b) => {
            let (va, ga) = dual(a, z);
            let (vb, gb) = dual(b, z);
            let q = va / vb;
            (q, ga.iter().zip(&gb).map(|(x, y)| (*x - q * *y) / vb).collect())
        }
        Node::Pow(a, b) => dual_pow(dual(a, z), b, z),
        Node::Call(f, args) => {
            let (v, g) = dual(&args[0], z);
            let chain = |val: T, d: T| (val, g.iter().map(|x| *x * d).collect::<Vec<T>>());
            let two = T::lit(2.0);
            match f {
                Func::Sqrt => {
                    let s = v.sqrt();
                    chain(s, T::one() / (two * s))
                }
                Func::Abs => chain(v.abs(), if v > T::zero() { T::one() } else if v < T::zero() { -T::one() } else { T::zero() }),
                Func::Exp => chain(v.exp(), v.exp()),
                Func::Ln => chain(v.ln(), T::one() / v),
                Func::Sin => chain(v.sin(), v.cos()),
                Func::Cos => chain(v.cos(), -v.sin()),
                Func::Tan => chain(v.tan(), T::one() + v.tan() * v.tan()),
                Func::Asin => chain(v.asin(), T::one() / (T::one() - v * v).sqrt()),
                Func::Acos => chain(v.acos(), -T::one() / (T::one() - v * v).sqrt()),
                Func::Atan => chain(v.atan(), T::one() / (T::one() + v * v)),
                Func::Min | Func::Max => {
                    let mut best = (v, g);
                    for e in &args[1..] {
                        let cand = dual(e, z);
                        let better = if *f == Func::Min { cand.0 < best.0 } else { cand.0 > best.0 };
                        if better {
                            best = cand;
                        }
                    }
                    best
                }
                Func::Pow => dual_pow((v, g), &args[1], z),
            }
        }
    }
}

fn lin<T: Real>(a: Dual<T>, b: Dual<T>, s: T) -> Dual<T> {
    (a.0 + s * b.0, a.1.iter().zip(&b.1).map(|(x, y)| *x + s * *y).collect())
}

fn dual_pow<T: Real>(a: Dual<T>, exp: &Node, z: &[T]) -> Dual<T> {
    let (va, ga) = a;
    if let Node::Const(c) = exp {
        let val = pow_val(va, exp, z);
        let d = if *c == 0.0 {
            T::zero()
        } else {
            T::lit(*c) * pow_val(va, &Node::Const(c - 1.0), z)
        };
        return (val, ga.iter().map(|x| *x * d).collect());
    }
    let (vb, gb) = dual(exp, z);
    let val = va.powf(vb);
    let ln = va.ln();
    (
        val,
        ga.iter()
            .zip(&gb)
            .map(|(x, y)| val * (*y * ln + vb * *x / va))
            .collect(),
    )
}

fn reads(n: &Node, slots: &[usize]) -> bool {
    match n {
        Node::Const(_) => false,
        Node::Var(i) => slots.contains(i),
        Node::Neg(a) => reads(a, slots),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
            reads(a, slots) || reads(b, slots)
        }
        Node::Call(_, args) => args.iter().any(|a| reads(a, slots)),
    }
}

/// Polynomial degree in `slots` when it is 0 or 1, `None` otherwise.
fn degree(n: &Node, slots: &[usize]) -> Option<u8> {
    match n {
        Node::Const(_) => Some(0),
        Node::Var(i) => Some(u8::from(slots.contains(i))),
        Node::Neg(a) => degree(a, slots),
        Node::Add(a, b) | Node::Sub(a, b) => Some(degree(a, slots)?.max(degree(b, slots)?)),
        Node::Mul(a, b) => {
            let d = degree(a, slots)? + degree(b, slots)?;
            (d <= 1).then_some(d)
        }
        Node::Div(a, b) => (degree(b, slots)? == 0).then_some(degree(a, slots)?),
        Node::Pow(a, b) => {
            let (da, db) = (degree(a, slots)?, degree(b, slots)?);
            match (da, db, b.as_ref()) {
                (0, 0, _) => Some(0),
                (1, 0, Node::Const(c)) if *c == 1.0 => Some(1),
                (1, 0, Node::Const(c)) if *c == 0.0 => Some(0),
                _ => None,
            }
        }
        Node::Call(_, args) => {
            if args.iter().all(|a| degree(a, slots) == Some(0)) {
                Some(0)
            } else {
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scope2() -> Scope {
        let mut s = Scope::new();
        s.push_block("x", 2, None).push_block("u", 1, Some("u"));
        s
    }

    #[test]
    fn precedence_and_power() {
        let s = scope2();
        let e = Expr::parse("-x1^2 + 2*x2/4 - (1-3)", &s).unwrap();
        assert_eq!(e.eval(&[3.0, 2.0, 0.0]), -9.0 + 1.0 + 2.0);
        let e = Expr::parse("2^3^2", &s).unwrap();
        assert_eq!(e.eval::<f64>(&[0.0, 0.0, 0.0]), 512.0);
        let e = Expr::parse("1.5e-1 + pi", &s).unwrap();
        assert!((e.eval::<f64>(&[0.0; 3]) - (0.15 + std::f64::consts::PI)).abs() < 1e-15);
    }

    #[test]
    fn functions_and_gradients() {
        let s = scope2();
        let e = Expr::parse("sqrt(x1^2 + x2^2) + max(x1, u) * sin(x2)", &s).unwrap();
        let z = [0.6, 0.8, 2.0];
        let (v, g) = e.eval_grad(&z);
        assert!((v - (1.0 + 2.0 * 0.8f64.sin())).abs() < 1e-14);
        let h = 1e-6;
        for i in 0..3 {
            let mut zp = z;
            let mut zm = z;
            zp[i] += h;
            zm[i] -= h;
            let fd = (e.eval(&zp) - e.eval(&zm)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-7, "slot {} fd {} ad {}", i, fd, g[i]);
        }
    }

    #[test]
    fn affinity_detection() {
        let s = scope2();
        let u = [s.slot("u").unwrap()];
        assert!(Expr::parse("x1^2*u - x2", &s).unwrap().is_affine_in(&u));
        assert!(Expr::parse("(u - x1)/x2", &s).unwrap().is_affine_in(&u));
        assert!(!Expr::parse("u*u", &s).unwrap().is_affine_in(&u));
        assert!(!Expr::parse("abs(u)", &s).unwrap().is_affine_in(&u));
        assert!(!Expr::parse("x1/u", &s).unwrap().is_affine_in(&u));
        assert!(!Expr::parse("x1^2", &s).unwrap().depends_on(&u));
    }

    #[test]
    fn errors_are_reported() {
        let s = scope2();
        assert!(Expr::parse("x3", &s).is_err());
        assert!(Expr::parse("foo(x1)", &s).is_err());
        assert!(Expr::parse("min()", &s).is_err());
        assert!(Expr::parse("x1 +", &s).is_err());
        assert!(Expr::parse("x1 $ 2", &s).is_err());
        assert!(Expr::parse("(x1", &s).is_err());
    }
}
