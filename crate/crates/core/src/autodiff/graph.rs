//! Scalar loss expressions over derivative-bundle entries.
//!
//! Every node evaluates either to a scalar or to one value per point; binary
//! operations broadcast scalars over the batch. The textual form is
//! function-call syntax, e.g. `mean(square(add(hess[0,0,0], hess[0,1,1])))`.

use std::ops;

use crate::autodiff::Entry;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Entry(Entry),
    Const(f64),
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Square(Box<Expr>),
    Mean(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
}

impl Expr {
    pub fn value(out: usize) -> Self {
        Expr::Entry(Entry::Value(out))
    }

    pub fn grad(out: usize, i: usize) -> Self {
        Expr::Entry(Entry::Grad(out, i))
    }

    pub fn hess(out: usize, i: usize, j: usize) -> Self {
        Expr::Entry(Entry::Hess(out, i, j).normalized())
    }

    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn square(self) -> Self {
        Expr::Square(Box::new(self))
    }

    pub fn mean(self) -> Self {
        Expr::Mean(Box::new(self))
    }

    pub fn sin(self) -> Self {
        Expr::Sin(Box::new(self))
    }

    pub fn cos(self) -> Self {
        Expr::Cos(Box::new(self))
    }

    /// Builds a node from an operation name.
    pub fn apply(op: &str, mut args: Vec<Expr>) -> Result<Self> {
        let arity = match op {
            "add" | "mul" => 2,
            "square" | "mean" | "sin" | "cos" => 1,
            _ => return Err(Error::UnsupportedOp(op.to_string())),
        };
        if args.len() != arity {
            return Err(Error::contract(format!(
                "`{op}` takes {arity} argument(s), got {}",
                args.len()
            )));
        }
        let a = Box::new(args.remove(0));
        Ok(match op {
            "add" => Expr::Add(a, Box::new(args.remove(0))),
            "mul" => Expr::Mul(a, Box::new(args.remove(0))),
            "square" => Expr::Square(a),
            "mean" => Expr::Mean(a),
            "sin" => Expr::Sin(a),
            _ => Expr::Cos(a),
        })
    }

    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser { s: src.as_bytes(), pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.s.len() {
            return Err(p.error("trailing input"));
        }
        Ok(e)
    }

    /// Distinct bundle entries referenced by the expression.
    pub fn entries(&self) -> Vec<Entry> {
        let mut out = Vec::new();
        self.visit_entries(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn visit_entries(&self, out: &mut Vec<Entry>) {
        match self {
            Expr::Entry(e) => out.push(e.normalized()),
            Expr::Const(_) => {}
            Expr::Add(a, b) | Expr::Mul(a, b) => {
                a.visit_entries(out);
                b.visit_entries(out);
            }
            Expr::Square(a) | Expr::Mean(a) | Expr::Sin(a) | Expr::Cos(a) => a.visit_entries(out),
        }
    }

    /// Forward evaluation; `lookup` returns the per-point values of an entry.
    pub fn evaluate(&self, batch: usize, lookup: &dyn Fn(Entry) -> Vec<f64>) -> Result<Evaluated> {
        let (val, kids) = match self {
            Expr::Entry(e) => {
                let v = lookup(e.normalized());
                if v.len() != batch {
                    return Err(Error::contract("entry lookup returned the wrong batch size"));
                }
                (Val::Batch(v), Vec::new())
            }
            Expr::Const(c) => (Val::Scalar(*c), Vec::new()),
            Expr::Add(a, b) | Expr::Mul(a, b) => {
                let ea = a.evaluate(batch, lookup)?;
                let eb = b.evaluate(batch, lookup)?;
                let v = if matches!(self, Expr::Add(..)) {
                    ea.val.zip(&eb.val, |x, y| x + y)
                } else {
                    ea.val.zip(&eb.val, |x, y| x * y)
                };
                (v, vec![ea, eb])
            }
            Expr::Square(a) | Expr::Sin(a) | Expr::Cos(a) => {
                let ea = a.evaluate(batch, lookup)?;
                let f: fn(f64) -> f64 = match self {
                    Expr::Square(_) => |x| x * x,
                    Expr::Sin(_) => f64::sin,
                    _ => f64::cos,
                };
                (ea.val.map(f), vec![ea])
            }
            Expr::Mean(a) => {
                let ea = a.evaluate(batch, lookup)?;
                let v = match &ea.val {
                    Val::Scalar(x) => Val::Scalar(*x),
                    Val::Batch(xs) => Val::Scalar(sequential_mean(xs)),
                };
                (v, vec![ea])
            }
        };
        Ok(Evaluated { val, kids })
    }

    /// Reverse sweep from a scalar root; `sink` receives the cotangent of
    /// every entry leaf (one value per point).
    pub fn backward(&self, ev: &Evaluated, sink: &mut dyn FnMut(Entry, &[f64])) {
        self.back(ev, Val::Scalar(1.0), sink);
    }

    fn back(&self, ev: &Evaluated, bar: Val, sink: &mut dyn FnMut(Entry, &[f64])) {
        match self {
            Expr::Entry(e) => {
                let n = ev.val.len();
                sink(e.normalized(), &bar.broadcast(n));
            }
            Expr::Const(_) => {}
            Expr::Add(a, b) => {
                a.back(&ev.kids[0], bar.clone().reduce_like(&ev.kids[0].val), sink);
                b.back(&ev.kids[1], bar.reduce_like(&ev.kids[1].val), sink);
            }
            Expr::Mul(a, b) => {
                let (va, vb) = (&ev.kids[0].val, &ev.kids[1].val);
                let ga = bar.zip(vb, |g, y| g * y).reduce_like(va);
                let gb = bar.zip(va, |g, x| g * x).reduce_like(vb);
                a.back(&ev.kids[0], ga, sink);
                b.back(&ev.kids[1], gb, sink);
            }
            Expr::Square(a) => {
                let g = bar.zip(&ev.kids[0].val, |g, x| 2.0 * g * x);
                a.back(&ev.kids[0], g, sink);
            }
            Expr::Sin(a) => {
                let g = bar.zip(&ev.kids[0].val, |g, x| g * x.cos());
                a.back(&ev.kids[0], g, sink);
            }
            Expr::Cos(a) => {
                let g = bar.zip(&ev.kids[0].val, |g, x| -g * x.sin());
                a.back(&ev.kids[0], g, sink);
            }
            Expr::Mean(a) => {
                let g = match (&ev.kids[0].val, bar) {
                    (Val::Batch(xs), Val::Scalar(g)) => Val::Batch(vec![g / xs.len() as f64; xs.len()]),
                    (_, g) => g,
                };
                a.back(&ev.kids[0], g, sink);
            }
        }
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }
}

fn sequential_mean(xs: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in xs {
        s += x;
    }
    s / xs.len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub enum Val {
    Scalar(f64),
    Batch(Vec<f64>),
}

impl Val {
    fn len(&self) -> usize {
        match self {
            Val::Scalar(_) => 1,
            Val::Batch(v) => v.len(),
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Val {
        match self {
            Val::Scalar(x) => Val::Scalar(f(*x)),
            Val::Batch(v) => Val::Batch(v.iter().map(|x| f(*x)).collect()),
        }
    }

    fn zip(&self, other: &Val, f: impl Fn(f64, f64) -> f64) -> Val {
        match (self, other) {
            (Val::Scalar(a), Val::Scalar(b)) => Val::Scalar(f(*a, *b)),
            (Val::Scalar(a), Val::Batch(b)) => Val::Batch(b.iter().map(|y| f(*a, *y)).collect()),
            (Val::Batch(a), Val::Scalar(b)) => Val::Batch(a.iter().map(|x| f(*x, *b)).collect()),
            (Val::Batch(a), Val::Batch(b)) => {
                Val::Batch(a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect())
            }
        }
    }

    /// Sums a broadcast cotangent back down to the shape of `like`.
    fn reduce_like(self, like: &Val) -> Val {
        match (self, like) {
            (Val::Batch(v), Val::Scalar(_)) => Val::Scalar(v.iter().sum()),
            (v, _) => v,
        }
    }

    fn broadcast(&self, n: usize) -> Vec<f64> {
        match self {
            Val::Scalar(x) => vec![*x; n],
            Val::Batch(v) => v.clone(),
        }
    }
}

/// Forward values of every node, mirroring the expression tree.
#[derive(Clone, Debug)]
pub struct Evaluated {
    val: Val,
    kids: Vec<Evaluated>,
}

impl Evaluated {
    pub fn value(&self) -> &Val {
        &self.val
    }

    pub fn scalar(&self) -> Result<f64> {
        match self.val {
            Val::Scalar(x) => Ok(x),
            Val::Batch(_) => Err(Error::contract("loss expression must reduce to a scalar")),
        }
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::contract(format!("loss expression, byte {}: {msg}", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        match self.s.get(self.pos) {
            Some(c) if c.is_ascii_digit() || *c == b'-' || *c == b'.' => {
                while self.pos < self.s.len()
                    && matches!(self.s[self.pos], b'0'..=b'9' | b'.' | b'-' | b'+' | b'e' | b'E')
                {
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                text.parse()
                    .map(Expr::Const)
                    .map_err(|_| self.error(&format!("bad number `{text}`")))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                while self.pos < self.s.len()
                    && (self.s[self.pos].is_ascii_alphanumeric() || self.s[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.s[start..self.pos]).unwrap().to_string();
                if self.eat(b'[') {
                    let idx = self.indices()?;
                    let entry = match (name.as_str(), idx.as_slice()) {
                        ("value", [o]) => Entry::Value(*o),
                        ("grad", [o, i]) => Entry::Grad(*o, *i),
                        ("hess", [o, i, j]) => Entry::Hess(*o, *i, *j).normalized(),
                        ("value" | "grad" | "hess", _) => {
                            return Err(self.error(&format!("wrong index count for `{name}`")))
                        }
                        _ => return Err(Error::UnsupportedOp(name)),
                    };
                    Ok(Expr::Entry(entry))
                } else {
                    self.expect(b'(')?;
                    let mut args = vec![self.expr()?];
                    while self.eat(b',') {
                        args.push(self.expr()?);
                    }
                    self.expect(b')')?;
                    Expr::apply(&name, args)
                }
            }
            _ => Err(self.error("expected a number, entry or function")),
        }
    }

    fn indices(&mut self) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        loop {
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
            out.push(text.parse().map_err(|_| self.error("expected an index"))?);
            if self.eat(b']') {
                return Ok(out);
            }
            self.expect(b',')?;
        }
    }
}
