use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::expr::{Expr, Interval, Unary};
use super::instance::{ConSense, Constraint, MinlpInstance, Variable};
use crate::error::{Error, Result};
use crate::funcspace::BoxDomain;
use crate::lookup::{LookupTable, TableEntry};
use crate::paraboloid::{ParaboloidSet, Side};
use crate::verify::CERT_TOL;

/// Interval of every node, keyed by constraint index and child path.
pub type NodeBounds = BTreeMap<(usize, Vec<usize>), Interval>;

/// Forward interval propagation from the variable bounds.
pub fn propagate_bounds(inst: &MinlpInstance) -> Result<NodeBounds> {
    let bounds = inst.bounds();
    let mut out = NodeBounds::new();
    for (ci, c) in inst.constraints.iter().enumerate() {
        let mut nodes = Vec::new();
        c.body.walk(&mut Vec::new(), &mut |e, path| nodes.push((e, path.to_vec())));
        for (e, path) in nodes {
            let r = e.interval(&bounds).map_err(|err| match err {
                Error::Domain(m) => Error::Domain(format!("constraint '{}': {m}", c.name)),
                other => other,
            })?;
            out.insert((ci, path), r);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Orig,
    Para,
    Both,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orig" => Ok(Variant::Orig),
            "para" => Ok(Variant::Para),
            "both" => Ok(Variant::Both),
            _ => Err(Error::Input(format!("variant must be orig, para or both, got '{s}'"))),
        }
    }
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Orig => "orig",
            Variant::Para => "para",
            Variant::Both => "both",
        }
    }
}

/// A nonlinear node `u(a·x + b)` chosen for substitution.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedNode {
    pub text: String,
    pub unary: Unary,
    pub var: usize,
    pub scale: f64,
    pub offset: f64,
    /// Propagated interval of the argument.
    pub arg: Interval,
    /// Propagated interval of the node.
    pub value: Interval,
    pub below: TableEntry,
    pub above: TableEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedNode {
    pub text: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SubstitutionPlan {
    pub epsilon: f64,
    pub selected: Vec<PlannedNode>,
    pub skipped: Vec<SkippedNode>,
}

fn node_key(u: Unary, var: usize, scale: f64, offset: f64) -> (Unary, usize, u64, u64) {
    (u, var, scale.to_bits(), offset.to_bits())
}

/// The node as `(unary, variable, a, b)` when its argument is affine in one variable.
fn affine_unary(e: &Expr) -> Option<(Unary, usize, f64, f64)> {
    let Expr::Unary(u, arg) = e else { return None };
    let (m, c) = arg.affine()?;
    if m.len() != 1 {
        return None;
    }
    let (&var, &a) = m.iter().next()?;
    Some((*u, var, a, c))
}

/// Univariate nodes over an affine argument whose argument range has positive
/// width and is covered from both sides at `epsilon`; others are listed as
/// skipped. Missing cosine entries are derived from sine entries.
pub fn find_substitutable(inst: &MinlpInstance, table: &mut LookupTable, epsilon: f64) -> Result<SubstitutionPlan> {
    let bounds = inst.bounds();
    let names = inst.names();
    let mut plan = SubstitutionPlan {
        epsilon,
        ..Default::default()
    };
    let mut seen = std::collections::BTreeSet::new();
    for c in &inst.constraints {
        let mut nodes = Vec::new();
        c.body.walk(&mut Vec::new(), &mut |e, _| {
            if matches!(e, Expr::Unary(..)) {
                nodes.push(e);
            }
        });
        for e in nodes {
            let text = e.render(&names);
            let Some((u, var, a, b)) = affine_unary(e) else {
                plan.skipped.push(SkippedNode {
                    text,
                    reason: "argument is not affine in a single variable".into(),
                });
                continue;
            };
            if !seen.insert(node_key(u, var, a, b)) {
                continue;
            }
            let Expr::Unary(_, arg_expr) = e else { unreachable!() };
            let arg = arg_expr.interval(&bounds)?;
            if !(arg.width() > 0.0) {
                plan.skipped.push(SkippedNode {
                    text,
                    reason: "argument range has zero width".into(),
                });
                continue;
            }
            let value = e.interval(&bounds)?;
            let dom = BoxDomain::interval(arg.lo, arg.hi)?;
            let id = u.func_id();
            let below = table.get_or_derive(&id, &dom, epsilon, Side::Below, CERT_TOL)?;
            let above = table.get_or_derive(&id, &dom, epsilon, Side::Above, CERT_TOL)?;
            match (below, above) {
                (Some(below), Some(above)) => plan.selected.push(PlannedNode {
                    text,
                    unary: u,
                    var,
                    scale: a,
                    offset: b,
                    arg,
                    value,
                    below,
                    above,
                }),
                (below, _) => plan.skipped.push(SkippedNode {
                    text,
                    reason: format!(
                        "no {} table entry for {id} on {dom} at eps {epsilon}",
                        if below.is_none() { "below" } else { "above" }
                    ),
                }),
            }
        }
    }
    Ok(plan)
}

/// One auxiliary variable and its paraboloid rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Substitution {
    pub node: String,
    pub aux: String,
    #[serde(skip)]
    pub aux_index: usize,
    #[serde(skip)]
    pub unary: Unary,
    #[serde(skip)]
    pub var: usize,
    pub scale: f64,
    pub offset: f64,
    pub arg_domain: [f64; 2],
    pub below_entry: EntryRef,
    pub above_entry: EntryRef,
    /// Paraboloids in the argument `w = a·x + b`.
    #[serde(skip)]
    pub below: ParaboloidSet,
    #[serde(skip)]
    pub above: ParaboloidSet,
    /// Whether `aux = u(w)` is kept as a constraint.
    pub tied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryRef {
    pub domain: [f64; 2],
    pub eps: f64,
    pub paraboloids: usize,
}

impl From<&TableEntry> for EntryRef {
    fn from(e: &TableEntry) -> Self {
        Self {
            domain: e.domain,
            eps: e.eps,
            paraboloids: e.coeffs.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedInstance {
    pub variant: Variant,
    pub instance: MinlpInstance,
    pub substitutions: Vec<Substitution>,
    pub warnings: Vec<String>,
}

/// `p(a·x + b)` expanded as `(A, B, C)` with `A x² + B x + C`.
fn compose(alpha: f64, beta: f64, gamma: f64, a: f64, b: f64) -> (f64, f64, f64) {
    (alpha * a * a, 2.0 * alpha * a * b + beta * a, alpha * b * b + beta * b + gamma)
}

fn quad_row(name: String, z: usize, x: usize, coeffs: (f64, f64, f64), sense: ConSense) -> Constraint {
    // z − A x² − B x  (sense)  C
    let (qa, qb, qc) = coeffs;
    Constraint {
        name,
        body: Expr::Add(vec![
            Expr::Var(z),
            Expr::Mul(vec![Expr::Const(-qa), Expr::Pow(Box::new(Expr::Var(x)), 2.0)]),
            Expr::Mul(vec![Expr::Const(-qb), Expr::Var(x)]),
        ]),
        sense,
        rhs: qc,
    }
}

fn fresh_name(taken: &[Variable], base: &str) -> String {
    let mut name = base.to_string();
    let mut k = 0;
    while taken.iter().any(|v| v.name == name) {
        k += 1;
        name = format!("{base}_{k}");
    }
    name
}

/// Builds the `orig`, `para` or `both` instance for `plan`.
pub fn build_relaxation(inst: &MinlpInstance, plan: &SubstitutionPlan, variant: Variant) -> Result<RelaxedInstance> {
    let mut warnings = Vec::new();
    if variant == Variant::Orig || plan.selected.is_empty() {
        if variant != Variant::Orig {
            warnings.push(format!("no substitutable node; {} falls back to orig", variant.as_str()));
        }
        return Ok(RelaxedInstance {
            variant: Variant::Orig,
            instance: inst.clone(),
            substitutions: Vec::new(),
            warnings,
        });
    }
    let mut out = inst.clone();
    let mut subs = Vec::with_capacity(plan.selected.len());
    let mut index = BTreeMap::new();
    for (j, node) in plan.selected.iter().enumerate() {
        let below = node.below.paraboloids()?;
        let above = node.above.paraboloids()?;
        let pad = |eps: f64| eps * (1.0 + 1e-9) + 1e-12;
        let name = fresh_name(&out.variables, &format!("z{j}"));
        out.variables.push(Variable {
            name: name.clone(),
            lb: node.value.lo - pad(node.below.eps),
            ub: node.value.hi + pad(node.above.eps),
            integer: false,
        });
        let z = out.variables.len() - 1;
        index.insert(node_key(node.unary, node.var, node.scale, node.offset), z);
        for (l, p) in below.members.iter().enumerate() {
            let c = compose(p.alpha[0], p.beta[0], p.gamma, node.scale, node.offset);
            out.constraints.push(quad_row(format!("{name}_below_{l}"), z, node.var, c, ConSense::Ge));
        }
        for (m, q) in above.members.iter().enumerate() {
            let c = compose(q.alpha[0], q.beta[0], q.gamma, node.scale, node.offset);
            out.constraints.push(quad_row(format!("{name}_above_{m}"), z, node.var, c, ConSense::Le));
        }
        if variant == Variant::Both {
            let f = Expr::unary(
                node.unary,
                Expr::Add(vec![Expr::Mul(vec![Expr::Const(node.scale), Expr::Var(node.var)]), Expr::Const(node.offset)]),
            );
            out.constraints.push(Constraint {
                name: format!("{name}_tie"),
                body: Expr::Add(vec![Expr::Var(z), Expr::Neg(Box::new(f))]),
                sense: ConSense::Eq,
                rhs: 0.0,
            });
        }
        subs.push(Substitution {
            node: node.text.clone(),
            aux: name,
            aux_index: z,
            unary: node.unary,
            var: node.var,
            scale: node.scale,
            offset: node.offset,
            arg_domain: [node.arg.lo, node.arg.hi],
            below_entry: (&node.below).into(),
            above_entry: (&node.above).into(),
            below,
            above,
            tied: variant == Variant::Both,
        });
    }
    if variant == Variant::Para {
        let n_orig = inst.constraints.len();
        for c in out.constraints.iter_mut().take(n_orig) {
            let body = std::mem::replace(&mut c.body, Expr::Const(0.0));
            c.body = body.rewrite(&mut |e| match affine_unary(&e) {
                Some((u, var, a, b)) => match index.get(&node_key(u, var, a, b)) {
                    Some(&z) => Expr::Var(z),
                    None => e,
                },
                None => e,
            });
        }
    }
    Ok(RelaxedInstance {
        variant,
        instance: out,
        substitutions: subs,
        warnings,
    })
}

impl RelaxedInstance {
    /// `[max_l p^l(w), min_m q^m(w)]` for substitution `j` at the original point `x`.
    pub fn bracket(&self, j: usize, x: &[f64]) -> (f64, f64) {
        let s = &self.substitutions[j];
        let w = [s.scale * x[s.var] + s.offset];
        (s.below.max_eval(&w), s.above.min_eval(&w))
    }

    /// Extends an assignment of the original variables with `z = u(w)`.
    pub fn lift_point(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        y.resize(self.instance.variables.len(), 0.0);
        for s in &self.substitutions {
            y[s.aux_index] = s.unary.apply(s.scale * x[s.var] + s.offset);
        }
        y
    }
}

/// Degree-two polynomial keyed by sorted variable tuples.
type Poly = BTreeMap<Vec<usize>, f64>;

fn poly_mul(p: &Poly, q: &Poly) -> Option<Poly> {
    let mut out = Poly::new();
    for (m1, c1) in p {
        for (m2, c2) in q {
            let mut m = m1.clone();
            m.extend(m2);
            if m.len() > 2 {
                return None;
            }
            m.sort_unstable();
            *out.entry(m).or_insert(0.0) += c1 * c2;
        }
    }
    Some(out)
}

fn quadratic(e: &Expr) -> Option<Poly> {
    Some(match e {
        Expr::Var(i) => Poly::from([(vec![*i], 1.0)]),
        Expr::Const(c) => Poly::from([(vec![], *c)]),
        Expr::Add(v) => {
            let mut out = Poly::new();
            for t in v {
                for (m, c) in quadratic(t)? {
                    *out.entry(m).or_insert(0.0) += c;
                }
            }
            out
        }
        Expr::Mul(v) => {
            let mut out = Poly::from([(vec![], 1.0)]);
            for t in v {
                out = poly_mul(&out, &quadratic(t)?)?;
            }
            out
        }
        Expr::Neg(t) => quadratic(t)?.into_iter().map(|(m, c)| (m, -c)).collect(),
        Expr::Pow(_, p) if *p == 0.0 => Poly::from([(vec![], 1.0)]),
        Expr::Pow(t, p) if *p == 1.0 => quadratic(t)?,
        Expr::Pow(t, p) if *p == 2.0 => {
            let q = quadratic(t)?;
            poly_mul(&q, &q)?
        }
        _ => return None,
    })
}

fn term(out: &mut String, c: f64, body: &str, first: &mut bool) {
    if c == 0.0 {
        return;
    }
    let sign = if c < 0.0 { "-" } else { "+" };
    if *first && c > 0.0 {
        let _ = write!(out, "{} {body}", c);
    } else {
        let _ = write!(out, " {sign} {} {body}", c.abs());
    }
    *first = false;
}

/// CPLEX LP text with quadratic constraint terms; fails on nodes that are not
/// polynomial of degree two.
pub fn to_lp_quadratic(inst: &MinlpInstance) -> Result<String> {
    let names = inst.names();
    let mut s = String::new();
    let _ = writeln!(s, "\\ {}", inst.name);
    s.push_str("Minimize\n obj:");
    let mut first = true;
    let mut obj = String::new();
    for (i, c) in &inst.objective {
        term(&mut obj, *c, &names[*i], &mut first);
    }
    if first {
        obj.push_str(" 0");
    }
    let _ = writeln!(s, " {}", obj.trim_start());
    s.push_str("Subject To\n");
    for c in &inst.constraints {
        let p = quadratic(&c.body).ok_or_else(|| {
            Error::Input(format!("constraint '{}' is not quadratic: {}", c.name, c.body.render(&names)))
        })?;
        let constant = p.get(&vec![]).copied().unwrap_or(0.0);
        let mut line = String::new();
        let mut first = true;
        for (m, coef) in p.iter().filter(|(m, _)| m.len() == 1) {
            term(&mut line, *coef, &names[m[0]], &mut first);
        }
        let quads: Vec<(&Vec<usize>, &f64)> = p.iter().filter(|(m, c)| m.len() == 2 && **c != 0.0).collect();
        if !quads.is_empty() {
            line.push_str(if first { "[" } else { " + [" });
            let mut inner = String::new();
            let mut qfirst = true;
            for (m, coef) in quads {
                let body = if m[0] == m[1] {
                    format!("{} ^2", names[m[0]])
                } else {
                    format!("{} * {}", names[m[0]], names[m[1]])
                };
                term(&mut inner, *coef, &body, &mut qfirst);
            }
            let _ = write!(line, " {} ]", inner.trim_start());
            first = false;
        }
        if first {
            line.push_str("0 ");
            line.push_str(&names[0]);
        }
        let _ = writeln!(s, " {}: {} {} {}", c.name, line.trim_start(), c.sense.token(), c.rhs - constant);
    }
    s.push_str("Bounds\n");
    for v in &inst.variables {
        let _ = writeln!(s, " {} <= {} <= {}", v.lb, v.name, v.ub);
    }
    let ints: Vec<&str> = inst.variables.iter().filter(|v| v.integer).map(|v| v.name.as_str()).collect();
    if !ints.is_empty() {
        let _ = writeln!(s, "Generals\n {}", ints.join(" "));
    }
    s.push_str("End\n");
    Ok(s)
}
