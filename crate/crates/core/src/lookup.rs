//! Persistent store of certified approximations keyed by
//! `(function, domain, ε, side)`.
//!
//! An approximation valid on a domain is valid on every subdomain and for every
//! looser `ε`, so a lookup falls back to the smallest stored superset. Entries
//! for different domains are never stitched together.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::{BoxDomain, FuncDef, FuncId};
use crate::paraboloid::{Paraboloid, ParaboloidSet, Side};
use crate::parafit::{FitReport, Method};
use crate::verify::{check_conditions, ConditionReport};

/// Relative tolerance for matching floating-point keys.
pub const KEY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryMethod {
    Exact,
    Practical,
    Constructive,
    External,
}

impl From<Method> for EntryMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Exact => EntryMethod::Exact,
            Method::Practical => EntryMethod::Practical,
        }
    }
}

/// One paraboloid as `[[α…], [β…], γ]`.
pub type Coeffs = (Vec<f64>, Vec<f64>, f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub func: FuncId,
    /// `[a, b]`
    pub domain: [f64; 2],
    pub eps: f64,
    pub side: Side,
    pub coeffs: Vec<Coeffs>,
    pub certified: bool,
    /// All quadratic coefficients of the below form are `≤ 0`.
    pub nonpos_quad: bool,
    pub method: EntryMethod,
    /// Parameter snapshot of the run that produced the entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<serde_json::Value>,
}

impl TableEntry {
    pub fn new(func: FuncId, dom: &BoxDomain, eps: f64, side: Side, set: &ParaboloidSet, method: EntryMethod, certified: bool) -> Result<Self> {
        if dom.dim() != 1 {
            return Err(Error::Input("table entries are univariate".into()));
        }
        let coeffs = set
            .members
            .iter()
            .map(|p| (p.alpha.clone(), p.beta.clone(), p.gamma))
            .collect();
        let mut e = Self {
            func,
            domain: [dom.lower()[0], dom.upper()[0]],
            eps,
            side,
            coeffs,
            certified,
            nonpos_quad: false,
            method,
            params: None,
        };
        e.nonpos_quad = e.below_alphas_nonpositive();
        Ok(e)
    }

    /// Entry for a finished search; uncertified when the search failed.
    pub fn from_report(report: &FitReport) -> Result<Self> {
        let set = report
            .paraboloids
            .as_ref()
            .ok_or_else(|| Error::Input(format!("fit of {} produced no paraboloids", report.func)))?;
        let mut e = Self::new(
            report.func.parse()?,
            &report.domain,
            report.epsilon,
            report.side,
            set,
            report.method.into(),
            report.certified(),
        )?;
        e.params = Some(serde_json::to_value(&report.params)?);
        Ok(e)
    }

    pub fn box_domain(&self) -> Result<BoxDomain> {
        BoxDomain::interval(self.domain[0], self.domain[1])
    }

    pub fn paraboloids(&self) -> Result<ParaboloidSet> {
        let members = self
            .coeffs
            .iter()
            .map(|(a, b, g)| Paraboloid::new(a.clone(), b.clone(), *g))
            .collect::<Result<_>>()?;
        Ok(ParaboloidSet::new(members))
    }

    fn below_alphas_nonpositive(&self) -> bool {
        let sign = match self.side {
            Side::Below => 1.0,
            Side::Above => -1.0,
        };
        self.coeffs.iter().all(|(a, _, _)| a.iter().all(|v| sign * v <= 0.0))
    }

    /// Schema checks; `location` prefixes error messages.
    pub fn validate(&self, location: &str) -> Result<()> {
        let err = |m: String| Error::schema(location, m);
        if !(self.domain[0] < self.domain[1]) || self.domain.iter().any(|v| !v.is_finite()) {
            return Err(err(format!("domain [{}, {}] is not a proper interval", self.domain[0], self.domain[1])));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(err(format!("eps must be positive, got {}", self.eps)));
        }
        if self.coeffs.is_empty() {
            return Err(err("no paraboloids".into()));
        }
        for (l, (a, b, g)) in self.coeffs.iter().enumerate() {
            if a.len() != 1 || b.len() != 1 {
                return Err(err(format!("paraboloid {l} must have one α and one β")));
            }
            if !a[0].is_finite() || !b[0].is_finite() || !g.is_finite() {
                return Err(err(format!("paraboloid {l} has a non-finite coefficient")));
            }
        }
        if self.nonpos_quad && !self.below_alphas_nonpositive() {
            return Err(err("nonpos_quad is set but a quadratic coefficient has the wrong sign".into()));
        }
        Ok(())
    }

    /// Certifies the entry on `dom`, which should lie inside its domain.
    pub fn certify_on(&self, dom: &BoxDomain, tol: f64) -> Result<ConditionReport> {
        let f = FuncDef::registered(self.func.clone())?;
        check_conditions(&self.paraboloids()?, &f, dom, self.eps, self.side, tol)
    }

    pub fn certify(&self, tol: f64) -> Result<ConditionReport> {
        self.certify_on(&self.box_domain()?, tol)
    }

    fn same_key(&self, func: &FuncId, dom: &BoxDomain, eps: f64, side: Side) -> bool {
        self.func == *func
            && self.side == side
            && close(self.eps, eps)
            && self.box_domain().is_ok_and(|d| d.approx_eq(dom, KEY_TOL))
    }
}

fn close(x: f64, y: f64) -> bool {
    (x - y).abs() <= KEY_TOL * x.abs().max(y.abs())
}

/// Table document `{"entries": [...]}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LookupTable {
    pub entries: Vec<TableEntry>,
}

impl LookupTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: LookupTable = serde_json::from_str(text)?;
        for (i, e) in t.entries.iter().enumerate() {
            e.validate(&format!("entries[{i}]"))?;
        }
        Ok(t)
    }

    /// Loads `path`; a missing file is an empty table.
    pub fn load(path: &Path) -> Result<Self> {
        match fs::read_to_string(path) {
            Ok(text) => Self::from_json(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(e.into()),
        }
    }

    /// Entries sorted by key, pretty-printed.
    pub fn to_json(&self) -> Result<String> {
        let mut t = self.clone();
        t.entries.sort_by(|x, y| {
            x.func
                .cmp(&y.func)
                .then(x.side.as_str().cmp(y.side.as_str()))
                .then(x.domain[0].total_cmp(&y.domain[0]))
                .then(x.domain[1].total_cmp(&y.domain[1]))
                .then(x.eps.total_cmp(&y.eps))
        });
        Ok(serde_json::to_string_pretty(&t)? + "\n")
    }

    /// Writes a sibling temporary file and renames it over `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = self.to_json()?;
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        fs::write(&tmp, text)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Inserts `entry`, replacing one with the same key.
    pub fn put(&mut self, entry: TableEntry) -> Result<()> {
        entry.validate("entry")?;
        let dom = entry.box_domain()?;
        match self
            .entries
            .iter_mut()
            .find(|e| e.same_key(&entry.func, &dom, entry.eps, entry.side))
        {
            Some(slot) => *slot = entry,
            None => self.entries.push(entry),
        }
        Ok(())
    }

    /// Exact key match if certified, else the certified entry on the smallest
    /// superset of `dom` with `ε′ ≤ ε`.
    pub fn get(&self, func: &FuncId, dom: &BoxDomain, eps: f64, side: Side) -> Option<&TableEntry> {
        let usable = || self.entries.iter().filter(|e| e.certified && e.func == *func && e.side == side);
        if let Some(e) = usable().find(|e| e.same_key(func, dom, eps, side)) {
            return Some(e);
        }
        usable()
            .filter(|e| e.eps <= eps * (1.0 + KEY_TOL))
            .filter_map(|e| e.box_domain().ok().map(|d| (e, d)))
            .filter(|(_, d)| dom.is_subset_of(d, KEY_TOL))
            .min_by(|(x, dx), (y, dy)| dx.volume().total_cmp(&dy.volume()).then(y.eps.total_cmp(&x.eps)))
            .map(|(e, _)| e)
    }

    /// Like [`LookupTable::get`], but derives a missing cosine entry from a
    /// stored sine entry and stores it once it certifies.
    pub fn get_or_derive(&mut self, func: &FuncId, dom: &BoxDomain, eps: f64, side: Side, tol: f64) -> Result<Option<TableEntry>> {
        if let Some(e) = self.get(func, dom, eps, side) {
            return Ok(Some(e.clone()));
        }
        if *func != FuncId::Cos {
            return Ok(None);
        }
        let sin_dom = BoxDomain::interval(dom.lower()[0] + PI / 2.0, dom.upper()[0] + PI / 2.0)?;
        let Some(base) = self.get(&FuncId::Sin, &sin_dom, eps, side).cloned() else {
            return Ok(None);
        };
        let derived = cosine_from_sine(&base, tol)?;
        if derived.certified {
            self.put(derived.clone())?;
            Ok(Some(derived))
        } else {
            Ok(None)
        }
    }
}

/// `cos(x) = sin(x + π/2)`: each `p` becomes `x ↦ p(x + π/2)` on the domain
/// shifted by `−π/2`, then re-certified against cosine.
pub fn cosine_from_sine(base: &TableEntry, tol: f64) -> Result<TableEntry> {
    if base.func != FuncId::Sin {
        return Err(Error::Precondition(format!("cosine is derived from a sine entry, got {}", base.func)));
    }
    let set = base.paraboloids()?.shifted(&[-PI / 2.0]);
    let dom = BoxDomain::interval(base.domain[0] - PI / 2.0, base.domain[1] - PI / 2.0)?;
    let mut e = TableEntry::new(FuncId::Cos, &dom, base.eps, base.side, &set, base.method, false)?;
    e.params = base.params.clone();
    e.certified = e.certify(tol)?.pass;
    Ok(e)
}

/// Copies `p(x − 2πk)` of a one-period sine entry for every period that meets
/// `target`, certified on `target`.
pub fn sine_periodic_extend(base: &TableEntry, target: &BoxDomain, tol: f64) -> Result<(ParaboloidSet, ConditionReport)> {
    if base.func != FuncId::Sin {
        return Err(Error::Precondition(format!("periodic extension needs a sine entry, got {}", base.func)));
    }
    if !base.nonpos_quad || !base.below_alphas_nonpositive() {
        return Err(Error::Precondition("periodic extension needs non-positive quadratic coefficients".into()));
    }
    if !base.certified {
        return Err(Error::Precondition("periodic extension needs a certified base entry".into()));
    }
    let period = 2.0 * PI;
    let [a, b] = base.domain;
    if !close(b - a, period) {
        return Err(Error::Precondition(format!("base domain [{a}, {b}] is not one period long")));
    }
    if target.dim() != 1 {
        return Err(Error::Input("periodic extension is univariate".into()));
    }
    let (lo, hi) = (target.lower()[0], target.upper()[0]);
    // periods [a + 2πk, b + 2πk] with positive overlap
    let k_min = ((lo - b) / period).floor() as i64;
    let k_max = ((hi - a) / period).ceil() as i64;
    let base_set = base.paraboloids()?;
    let slack = KEY_TOL * period;
    let mut members = Vec::new();
    for k in k_min..=k_max {
        let s = period * k as f64;
        if a + s < hi - slack && b + s > lo + slack {
            members.extend(base_set.shifted(&[s]).members);
        }
    }
    let set = ParaboloidSet::new(members);
    let report = check_conditions(&set, &FuncDef::registered(FuncId::Sin)?, target, base.eps, base.side, tol)?;
    Ok((set, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sin_entry(a: f64, b: f64, eps: f64) -> TableEntry {
        // −0.21837x² + 0.68602x − 0.08222 lies under sin on one period within 1
        let p = Paraboloid::univariate(-0.21837, 0.68602, -0.08222);
        let dom = BoxDomain::interval(a, b).unwrap();
        TableEntry::new(FuncId::Sin, &dom, eps, Side::Below, &ParaboloidSet::new(vec![p]), EntryMethod::External, true).unwrap()
    }

    #[test]
    fn subdomain_and_looser_eps_reuse() {
        let mut t = LookupTable::new();
        t.put(sin_entry(-PI / 2.0, 1.5 * PI, 0.1)).unwrap();
        let sub = BoxDomain::interval(0.0, 1.0).unwrap();
        assert!(t.get(&FuncId::Sin, &sub, 0.1, Side::Below).is_some());
        assert!(t.get(&FuncId::Sin, &sub, 0.5, Side::Below).is_some());
        assert!(t.get(&FuncId::Sin, &sub, 0.05, Side::Below).is_none());
        assert!(t.get(&FuncId::Sin, &sub, 0.1, Side::Above).is_none());
        let wide = BoxDomain::interval(-PI, 3.0 * PI).unwrap();
        assert!(t.get(&FuncId::Sin, &wide, 0.1, Side::Below).is_none());
    }

    #[test]
    fn smallest_superset_wins() {
        let mut t = LookupTable::new();
        t.put(sin_entry(-PI / 2.0, 1.5 * PI, 0.1)).unwrap();
        t.put(sin_entry(-1.0, 2.0, 0.1)).unwrap();
        let sub = BoxDomain::interval(0.0, 1.0).unwrap();
        assert_eq!(t.get(&FuncId::Sin, &sub, 0.1, Side::Below).unwrap().domain, [-1.0, 2.0]);
    }

    #[test]
    fn put_replaces_same_key() {
        let mut t = LookupTable::new();
        t.put(sin_entry(0.0, 1.0, 0.1)).unwrap();
        let mut e = sin_entry(0.0, 1.0 + 1e-12, 0.1);
        e.method = EntryMethod::Exact;
        t.put(e).unwrap();
        assert_eq!(t.entries.len(), 1);
        assert_eq!(t.entries[0].method, EntryMethod::Exact);
    }

    #[test]
    fn uncertified_entries_are_not_served() {
        let mut t = LookupTable::new();
        let mut e = sin_entry(0.0, 1.0, 0.1);
        e.certified = false;
        t.put(e).unwrap();
        assert!(t.get(&FuncId::Sin, &BoxDomain::interval(0.0, 1.0).unwrap(), 0.1, Side::Below).is_none());
    }

    #[test]
    fn malformed_coefficients_rejected() {
        let mut e = sin_entry(0.0, 1.0, 0.1);
        e.coeffs[0].0.push(1.0);
        assert!(matches!(LookupTable::new().put(e), Err(Error::Schema { .. })));
        let text = r#"{"entries":[{"func":"sin","domain":[0,1],"eps":0.1,"side":"below",
            "coeffs":[[[-1.0],[0.0],1e400]],"certified":true,"nonpos_quad":true,"method":"exact"}]}"#;
        assert!(LookupTable::from_json(text).is_err());
        let text = r#"{"entries":[{"func":"sin","domain":[0,1],"eps":0.1,"side":"below",
            "coeffs":[[[1.0],[0.0],0.0]],"certified":true,"nonpos_quad":true,"method":"exact"}]}"#;
        let err = LookupTable::from_json(text).unwrap_err().to_string();
        assert!(err.contains("entries[0]"), "{err}");
    }

    #[test]
    fn json_shape() {
        let e = sin_entry(0.0, 1.0, 0.1);
        let v: serde_json::Value = serde_json::to_value(&e).unwrap();
        assert_eq!(v["coeffs"][0][0][0], -0.21837);
        assert_eq!(v["coeffs"][0][2], -0.08222);
        assert_eq!(v["side"], "below");
        assert_eq!(v["method"], "external");
        assert_eq!(v["nonpos_quad"], true);
    }

    #[test]
    fn shift_coefficients() {
        let p = Paraboloid::univariate(-2.0, 3.0, 1.0);
        let q = p.shifted(&[0.5]);
        assert_eq!(q.alpha, vec![-2.0]);
        assert_eq!(q.beta, vec![3.0 + 2.0]);
        assert_eq!(q.gamma, 1.0 - 0.5 - 1.5);
    }

    #[test]
    fn periodic_extension_needs_nonpositive_alpha() {
        let mut e = sin_entry(-PI / 2.0, 1.5 * PI, 1.0);
        e.coeffs[0].0[0] = 0.1;
        e.nonpos_quad = false;
        let target = BoxDomain::interval(-PI / 2.0, 3.5 * PI).unwrap();
        assert!(matches!(sine_periodic_extend(&e, &target, 1e-6), Err(Error::Precondition(_))));
    }

    #[test]
    fn periodic_extension_counts_periods() {
        let e = sin_entry(-PI / 2.0, 1.5 * PI, 1.0);
        let same = BoxDomain::interval(-PI / 2.0, 1.5 * PI).unwrap();
        let (set, _) = sine_periodic_extend(&e, &same, 5e-3).unwrap();
        assert_eq!(set.len(), 1);
        let two = BoxDomain::interval(-PI / 2.0, 3.5 * PI).unwrap();
        let (set, rep) = sine_periodic_extend(&e, &two, 5e-3).unwrap();
        assert_eq!(set.len(), 2);
        assert!(rep.pass, "{:?}", rep.reasons);
    }
}
