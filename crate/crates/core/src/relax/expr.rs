use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::funcspace::FuncId;

/// Univariate nonlinear node kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Unary {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Cube,
}

impl Unary {
    pub const ALL: [Unary; 6] = [Unary::Sin, Unary::Cos, Unary::Exp, Unary::Ln, Unary::Sqrt, Unary::Cube];

    pub fn name(self) -> &'static str {
        match self {
            Unary::Sin => "sin",
            Unary::Cos => "cos",
            Unary::Exp => "exp",
            Unary::Ln => "ln",
            Unary::Sqrt => "sqrt",
            Unary::Cube => "cube",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Unary::ALL.into_iter().find(|u| u.name() == s)
    }

    pub fn func_id(self) -> FuncId {
        match self {
            Unary::Sin => FuncId::Sin,
            Unary::Cos => FuncId::Cos,
            Unary::Exp => FuncId::Exp,
            Unary::Ln => FuncId::Ln,
            Unary::Sqrt => FuncId::Sqrt,
            Unary::Cube => FuncId::Cube,
        }
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Unary::Sin => x.sin(),
            Unary::Cos => x.cos(),
            Unary::Exp => x.exp(),
            Unary::Ln => x.ln(),
            Unary::Sqrt => x.sqrt(),
            Unary::Cube => x * x * x,
        }
    }
}

/// Expression node; variables are indices into the instance's variable list.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var(usize),
    Const(f64),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Neg(Box<Expr>),
    /// `base^exponent` with a constant exponent.
    Pow(Box<Expr>, f64),
    Unary(Unary, Box<Expr>),
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    fn add(self, o: Self) -> Self {
        Self::new(self.lo + o.lo, self.hi + o.hi)
    }

    fn mul(self, o: Self) -> Self {
        let c = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        Self::new(c.iter().copied().fold(f64::INFINITY, f64::min), c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Slightly enlarged, to absorb rounding in library functions.
    fn widened(self) -> Self {
        let pad = |v: f64| 1e-15 * (1.0 + v.abs());
        Self::new(self.lo - pad(self.lo), self.hi + pad(self.hi))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Whether some `c + 2πk` lies in `[lo, hi]`.
fn hits(c: f64, lo: f64, hi: f64) -> bool {
    let k = ((lo - c) / (2.0 * PI)).ceil();
    c + 2.0 * PI * k <= hi
}

fn sin_range(x: Interval, shift: f64) -> Interval {
    // sin(x + shift); cos is sin shifted by π/2
    let (lo, hi) = (x.lo + shift, x.hi + shift);
    if hi - lo >= 2.0 * PI {
        return Interval::new(-1.0, 1.0);
    }
    let (a, b) = ((x.lo).sin(), (x.hi).sin());
    let (a, b) = if shift == 0.0 { (a, b) } else { (x.lo.cos(), x.hi.cos()) };
    let top = if hits(PI / 2.0, lo, hi) { 1.0 } else { a.max(b) };
    let bottom = if hits(-PI / 2.0, lo, hi) { -1.0 } else { a.min(b) };
    let r = Interval::new(bottom, top).widened();
    Interval::new(r.lo.max(-1.0), r.hi.min(1.0))
}

impl Expr {
    pub fn var(i: usize) -> Self {
        Expr::Var(i)
    }

    pub fn unary(u: Unary, e: Expr) -> Self {
        Expr::Unary(u, Box::new(e))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Var(i) => x[*i],
            Expr::Const(c) => *c,
            Expr::Add(v) => v.iter().map(|e| e.eval(x)).sum(),
            Expr::Mul(v) => v.iter().map(|e| e.eval(x)).product(),
            Expr::Neg(e) => -e.eval(x),
            Expr::Pow(e, p) => pow(e.eval(x), *p),
            Expr::Unary(u, e) => u.apply(e.eval(x)),
        }
    }

    /// Forward interval evaluation.
    pub fn interval(&self, bounds: &[Interval]) -> Result<Interval> {
        Ok(match self {
            Expr::Var(i) => bounds[*i],
            Expr::Const(c) => Interval::point(*c),
            Expr::Add(v) => {
                let mut acc = Interval::point(0.0);
                for e in v {
                    acc = acc.add(e.interval(bounds)?);
                }
                acc
            }
            Expr::Mul(v) => {
                let mut acc = Interval::point(1.0);
                for e in v {
                    acc = acc.mul(e.interval(bounds)?);
                }
                acc
            }
            Expr::Neg(e) => {
                let r = e.interval(bounds)?;
                Interval::new(-r.hi, -r.lo)
            }
            Expr::Pow(e, p) => pow_range(e.interval(bounds)?, *p)?,
            Expr::Unary(u, e) => unary_range(*u, e.interval(bounds)?)?,
        })
    }

    /// `(coefficients, constant)` when the expression is affine.
    pub fn affine(&self) -> Option<(BTreeMap<usize, f64>, f64)> {
        match self {
            Expr::Var(i) => Some((BTreeMap::from([(*i, 1.0)]), 0.0)),
            Expr::Const(c) => Some((BTreeMap::new(), *c)),
            Expr::Add(v) => {
                let mut coef = BTreeMap::new();
                let mut c0 = 0.0;
                for e in v {
                    let (m, c) = e.affine()?;
                    for (k, a) in m {
                        *coef.entry(k).or_insert(0.0) += a;
                    }
                    c0 += c;
                }
                coef.retain(|_, a| *a != 0.0);
                Some((coef, c0))
            }
            Expr::Mul(v) => {
                // at most one non-constant factor
                let mut scale = 1.0;
                let mut inner: Option<(BTreeMap<usize, f64>, f64)> = None;
                for e in v {
                    let (m, c) = e.affine()?;
                    if m.is_empty() {
                        scale *= c;
                    } else if inner.is_none() {
                        inner = Some((m, c));
                    } else {
                        return None;
                    }
                }
                Some(match inner {
                    None => (BTreeMap::new(), scale),
                    Some((m, c)) => {
                        let mut m: BTreeMap<usize, f64> = m.into_iter().map(|(k, a)| (k, a * scale)).collect();
                        m.retain(|_, a| *a != 0.0);
                        (m, c * scale)
                    }
                })
            }
            Expr::Neg(e) => {
                let (m, c) = e.affine()?;
                Some((m.into_iter().map(|(k, a)| (k, -a)).collect(), -c))
            }
            Expr::Pow(e, p) if *p == 1.0 => e.affine(),
            Expr::Pow(_, p) if *p == 0.0 => Some((BTreeMap::new(), 1.0)),
            _ => None,
        }
    }

    /// Visits every node in pre-order with its path.
    pub fn walk<'a>(&'a self, path: &mut Vec<usize>, f: &mut dyn FnMut(&'a Expr, &[usize])) {
        f(self, path);
        match self {
            Expr::Add(v) | Expr::Mul(v) => {
                for (i, e) in v.iter().enumerate() {
                    path.push(i);
                    e.walk(path, f);
                    path.pop();
                }
            }
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Unary(_, e) => {
                path.push(0);
                e.walk(path, f);
                path.pop();
            }
            Expr::Var(_) | Expr::Const(_) => {}
        }
    }

    /// Number of operator levels; leaves count zero.
    pub fn depth(&self) -> usize {
        match self {
            Expr::Var(_) | Expr::Const(_) => 0,
            Expr::Add(v) | Expr::Mul(v) => 1 + v.iter().map(Expr::depth).max().unwrap_or(0),
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Unary(_, e) => 1 + e.depth(),
        }
    }

    /// Bottom-up rewrite; `f` sees each node after its children were rewritten.
    pub fn rewrite(self, f: &mut dyn FnMut(Expr) -> Expr) -> Expr {
        let e = match self {
            Expr::Add(v) => Expr::Add(v.into_iter().map(|e| e.rewrite(f)).collect()),
            Expr::Mul(v) => Expr::Mul(v.into_iter().map(|e| e.rewrite(f)).collect()),
            Expr::Neg(e) => Expr::Neg(Box::new(e.rewrite(f))),
            Expr::Pow(e, p) => Expr::Pow(Box::new(e.rewrite(f)), p),
            Expr::Unary(u, e) => Expr::Unary(u, Box::new(e.rewrite(f))),
            leaf => leaf,
        };
        f(e)
    }

    /// Flattens nested sums and products and sorts their operands by their
    /// JSON text.
    pub fn canonical(self) -> Expr {
        self.rewrite(&mut |e| match e {
            Expr::Add(v) => Expr::Add(sorted(flatten(v, true))),
            Expr::Mul(v) => Expr::Mul(sorted(flatten(v, false))),
            other => other,
        })
    }

    pub fn to_json(&self, names: &[String]) -> Value {
        match self {
            Expr::Var(i) => json!({ "var": names[*i] }),
            Expr::Const(c) => json!(c),
            Expr::Add(v) => json!({ "add": v.iter().map(|e| e.to_json(names)).collect::<Vec<_>>() }),
            Expr::Mul(v) => json!({ "mul": v.iter().map(|e| e.to_json(names)).collect::<Vec<_>>() }),
            Expr::Neg(e) => json!({ "neg": e.to_json(names) }),
            Expr::Pow(e, p) => json!({ "pow": [e.to_json(names), p] }),
            Expr::Unary(u, e) => {
                let mut m = serde_json::Map::new();
                m.insert(u.name().into(), e.to_json(names));
                Value::Object(m)
            }
        }
    }

    /// Parses a node; `loc` names it in error messages.
    pub fn from_json(v: &Value, names: &[String], loc: &str) -> Result<Expr> {
        if let Some(c) = v.as_f64() {
            return finite(c, loc).map(Expr::Const);
        }
        let obj = v
            .as_object()
            .ok_or_else(|| Error::schema(loc, "expected a number or a single-key object"))?;
        if obj.len() != 1 {
            return Err(Error::schema(loc, format!("node must have exactly one key, found {}", obj.len())));
        }
        let (kind, arg) = obj.iter().next().unwrap();
        let child = |a: &Value, i: Option<usize>| {
            let sub = match i {
                Some(i) => format!("{loc}.{kind}[{i}]"),
                None => format!("{loc}.{kind}"),
            };
            Expr::from_json(a, names, &sub)
        };
        let list = |a: &Value| -> Result<Vec<Expr>> {
            let items = a
                .as_array()
                .ok_or_else(|| Error::schema(format!("{loc}.{kind}"), "expected an array of operands"))?;
            if items.is_empty() {
                return Err(Error::schema(format!("{loc}.{kind}"), "needs at least one operand"));
            }
            items.iter().enumerate().map(|(i, a)| child(a, Some(i))).collect()
        };
        Ok(match kind.as_str() {
            "var" => {
                let name = arg
                    .as_str()
                    .ok_or_else(|| Error::schema(format!("{loc}.var"), "variable name must be a string"))?;
                let i = names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| Error::schema(format!("{loc}.var"), format!("undeclared variable '{name}'")))?;
                Expr::Var(i)
            }
            "const" => Expr::Const(finite(
                arg.as_f64().ok_or_else(|| Error::schema(format!("{loc}.const"), "expected a number"))?,
                loc,
            )?),
            "add" => Expr::Add(list(arg)?),
            "mul" => Expr::Mul(list(arg)?),
            "neg" => Expr::Neg(Box::new(child(arg, None)?)),
            "pow" => {
                let pair = arg.as_array().filter(|a| a.len() == 2).ok_or_else(|| {
                    Error::schema(format!("{loc}.pow"), "expected [base, exponent]")
                })?;
                let p = pair[1]
                    .as_f64()
                    .ok_or_else(|| Error::schema(format!("{loc}.pow[1]"), "exponent must be a constant"))?;
                Expr::Pow(Box::new(child(&pair[0], Some(0))?), finite(p, loc)?)
            }
            other => match Unary::from_name(other) {
                Some(u) => Expr::Unary(u, Box::new(child(arg, None)?)),
                None => return Err(Error::schema(loc, format!("unknown node kind '{other}'"))),
            },
        })
    }

    /// Compact infix rendering.
    pub fn render(&self, names: &[String]) -> String {
        match self {
            Expr::Var(i) => names[*i].clone(),
            Expr::Const(c) => format!("{c}"),
            Expr::Add(v) => format!("({})", v.iter().map(|e| e.render(names)).collect::<Vec<_>>().join(" + ")),
            Expr::Mul(v) => v.iter().map(|e| e.render(names)).collect::<Vec<_>>().join("*"),
            Expr::Neg(e) => format!("-{}", e.render(names)),
            Expr::Pow(e, p) => format!("{}^{p}", e.render(names)),
            Expr::Unary(u, e) => format!("{}({})", u.name(), e.render(names)),
        }
    }
}

fn finite(c: f64, loc: &str) -> Result<f64> {
    if c.is_finite() {
        Ok(c)
    } else {
        Err(Error::schema(loc, "constants must be finite"))
    }
}

fn flatten(v: Vec<Expr>, add: bool) -> Vec<Expr> {
    let mut out = Vec::with_capacity(v.len());
    for e in v {
        match e {
            Expr::Add(w) if add => out.extend(w),
            Expr::Mul(w) if !add => out.extend(w),
            other => out.push(other),
        }
    }
    out
}

fn sorted(mut v: Vec<Expr>) -> Vec<Expr> {
    // indices stand in for names; only the relative order matters
    let names: Vec<String> = (0..max_var(&v) + 1).map(|i| format!("#{i:08}")).collect();
    v.sort_by_cached_key(|e| e.to_json(&names).to_string());
    v
}

fn max_var(v: &[Expr]) -> usize {
    let mut m = 0;
    for e in v {
        e.walk(&mut Vec::new(), &mut |n, _| {
            if let Expr::Var(i) = n {
                m = m.max(*i);
            }
        });
    }
    m
}

fn pow(x: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
        x.powi(p as i32)
    } else {
        x.powf(p)
    }
}

fn pow_range(x: Interval, p: f64) -> Result<Interval> {
    if p == 0.0 {
        return Ok(Interval::point(1.0));
    }
    let integer = p.fract() == 0.0;
    if !integer && x.lo < 0.0 {
        return Err(Error::Domain(format!("fractional power {p} over {x}")));
    }
    if p < 0.0 && x.lo <= 0.0 && x.hi >= 0.0 {
        return Err(Error::Domain(format!("negative power {p} over {x}, which contains 0")));
    }
    let (a, b) = (pow(x.lo, p), pow(x.hi, p));
    let even = integer && (p as i64) % 2 == 0;
    // negative powers over 0 were rejected above
    let r = if even && x.lo < 0.0 && x.hi > 0.0 {
        Interval::new(0.0, a.max(b))
    } else {
        Interval::new(a.min(b), a.max(b))
    };
    Ok(if integer && p.abs() <= 3.0 { r } else { r.widened() })
}

fn unary_range(u: Unary, x: Interval) -> Result<Interval> {
    Ok(match u {
        Unary::Sin => sin_range(x, 0.0),
        Unary::Cos => sin_range(x, PI / 2.0),
        Unary::Exp => Interval::new(x.lo.exp(), x.hi.exp()).widened(),
        Unary::Ln | Unary::Sqrt => {
            if x.lo <= 0.0 {
                return Err(Error::Domain(format!("{} over {x}, which touches the nonpositive axis", u.name())));
            }
            Interval::new(u.apply(x.lo), u.apply(x.hi)).widened()
        }
        Unary::Cube => Interval::new(x.lo * x.lo * x.lo, x.hi * x.hi * x.hi),
    })
}
