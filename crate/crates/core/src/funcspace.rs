//! Registry of approximable functions.
//!
//! Every function carries three rules next to its evaluator: a 1-norm Lipschitz
//! constant on a box, and the exact Lebesgue integral over a sub-box. The
//! registry is univariate; higher-dimensional functions can be supplied by
//! implementing [`Approximable`] directly.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned, full-dimensional box `[a, b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxRepr", into = "BoxRepr")]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BoxRepr {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<BoxRepr> for BoxDomain {
    type Error = Error;
    fn try_from(r: BoxRepr) -> Result<Self> {
        BoxDomain::new(r.lower, r.upper)
    }
}

impl From<BoxDomain> for BoxRepr {
    fn from(b: BoxDomain) -> Self {
        BoxRepr {
            lower: b.lower,
            upper: b.upper,
        }
    }
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::Input("box needs at least one dimension".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::Input(format!(
                "box bounds differ in length ({} vs {})",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (a, b)) in lower.iter().zip(&upper).enumerate() {
            if !a.is_finite() || !b.is_finite() || a >= b {
                return Err(Error::Input(format!(
                    "box is not full dimensional on axis {i}: [{a}, {b}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a], vec![b])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).product()
    }

    /// `‖b − a‖₁`
    pub fn l1_width(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).sum()
    }

    /// `‖b − a‖∞`
    pub fn max_width(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).fold(0.0, f64::max)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    /// Whether `self ⊆ other`, with a relative slack on each bound.
    pub fn is_subset_of(&self, other: &BoxDomain, rel_tol: f64) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|i| {
                let tol_a = rel_tol * other.lower[i].abs().max(1.0);
                let tol_b = rel_tol * other.upper[i].abs().max(1.0);
                self.lower[i] >= other.lower[i] - tol_a && self.upper[i] <= other.upper[i] + tol_b
            })
    }

    /// Relative-tolerance equality of the bounds.
    pub fn approx_eq(&self, other: &BoxDomain, rel_tol: f64) -> bool {
        self.dim() == other.dim()
            && self
                .lower
                .iter()
                .chain(&self.upper)
                .zip(other.lower.iter().chain(&other.upper))
                .all(|(x, y)| (x - y).abs() <= rel_tol * x.abs().max(y.abs()).max(1.0))
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }
}

impl fmt::Display for BoxDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| format!("[{a}, {b}]"))
            .collect();
        write!(f, "{}", parts.join("x"))
    }
}

/// A function that can be approximated: evaluator plus Lipschitz and integral rules.
pub trait Approximable: Send + Sync {
    fn dim(&self) -> usize;

    /// Evaluates without domain checks.
    fn value(&self, x: &[f64]) -> f64;

    /// A valid 1-norm Lipschitz constant on `dom`.
    fn lipschitz(&self, dom: &BoxDomain) -> Result<f64>;

    /// Lebesgue integral over the (possibly degenerate) box `[lower, upper]`.
    fn integral(&self, lower: &[f64], upper: &[f64]) -> Result<f64>;

    /// Fails when `dom` leaves the admissible domain.
    fn check_domain(&self, dom: &BoxDomain) -> Result<()>;

    fn label(&self) -> String;
}

/// Strictly increasing breakpoints with values, interpolated linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZigzagData {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl ZigzagData {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 || breakpoints.len() != values.len() {
            return Err(Error::Input(format!(
                "piecewise-linear table needs >= 2 matching points, got {} breakpoints and {} values",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("breakpoints must be strictly increasing".into()));
        }
        if breakpoints.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::Input("table contains non-finite entries".into()));
        }
        Ok(Self {
            breakpoints,
            values,
        })
    }

    pub fn first(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn last(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn slopes(&self) -> impl Iterator<Item = f64> + '_ {
        self.breakpoints
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
    }

    /// Index `k` of the segment `[x_k, x_{k+1}]` containing `x` (clamped).
    fn segment(&self, x: f64) -> usize {
        let n = self.breakpoints.len();
        match self.breakpoints.binary_search_by(|b| b.total_cmp(&x)) {
            Ok(k) => k.min(n - 2),
            Err(0) => 0,
            Err(k) => (k - 1).min(n - 2),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.segment(x);
        let (x0, x1) = (self.breakpoints[k], self.breakpoints[k + 1]);
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        if x == x0 {
            return y0;
        }
        if x == x1 {
            return y1;
        }
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Largest absolute slope among segments meeting `[a, b]`.
    pub fn max_slope_on(&self, a: f64, b: f64) -> f64 {
        self.breakpoints
            .windows(2)
            .zip(self.slopes())
            .filter(|(x, _)| x[1] > a && x[0] < b)
            .map(|(_, s)| s.abs())
            .fold(0.0, f64::max)
    }

    /// Exact integral of the interpolant over `[a, b]` (signed, `a > b` allowed).
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if a > b {
            return -self.integral(b, a);
        }
        if a == b {
            return 0.0;
        }
        let mut total = 0.0;
        for k in 0..self.breakpoints.len() - 1 {
            let lo = self.breakpoints[k].max(a);
            let hi = self.breakpoints[k + 1].min(b);
            if hi > lo {
                total += 0.5 * (hi - lo) * (self.eval_on(k, lo) + self.eval_on(k, hi));
            }
        }
        total
    }

    fn eval_on(&self, k: usize, x: f64) -> f64 {
        let (x0, x1) = (self.breakpoints[k], self.breakpoints[k + 1]);
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// Symbolic identity of a registered function.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FuncId {
    Exp,
    Sin,
    Cos,
    Ln,
    Sqrt,
    Cube,
    Zigzag,
    Table(String),
}

impl FuncId {
    pub fn as_str(&self) -> &str {
        match self {
            FuncId::Exp => "exp",
            FuncId::Sin => "sin",
            FuncId::Cos => "cos",
            FuncId::Ln => "ln",
            FuncId::Sqrt => "sqrt",
            FuncId::Cube => "cube",
            FuncId::Zigzag => "zigzag",
            FuncId::Table(name) => name,
        }
    }
}

impl fmt::Display for FuncId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FuncId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "exp" => FuncId::Exp,
            "sin" => FuncId::Sin,
            "cos" => FuncId::Cos,
            "ln" | "log" => FuncId::Ln,
            "sqrt" => FuncId::Sqrt,
            "cube" | "x3" => FuncId::Cube,
            "zigzag" => FuncId::Zigzag,
            other if !other.is_empty() => FuncId::Table(other.to_string()),
            _ => return Err(Error::Input("empty function id".into())),
        })
    }
}

impl Serialize for FuncId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for FuncId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A registered univariate function, optionally negated (used to fit from above).
#[derive(Debug, Clone, PartialEq)]
pub struct FuncDef {
    id: FuncId,
    table: Option<ZigzagData>,
    negated: bool,
}

impl FuncDef {
    /// Looks up a closed-form function or the canonical zigzag.
    pub fn registered(id: FuncId) -> Result<Self> {
        let table = match &id {
            FuncId::Zigzag => Some(canonical_zigzag()),
            FuncId::Table(name) => {
                return Err(Error::Input(format!(
                    "'{name}' is not a registered function; load it from a table file"
                )))
            }
            _ => None,
        };
        Ok(Self {
            id,
            table,
            negated: false,
        })
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Self::registered(name.parse()?)
    }

    /// A user-supplied piecewise-linear function.
    pub fn from_table(name: impl Into<String>, table: ZigzagData) -> Self {
        let name = name.into();
        let id = if name == "zigzag" {
            FuncId::Zigzag
        } else {
            FuncId::Table(name)
        };
        Self {
            id,
            table: Some(table),
            negated: false,
        }
    }

    /// Parses `{"id", "domain": [a, b], "breakpoints", "values"}`.
    pub fn from_table_json(text: &str) -> Result<(Self, BoxDomain)> {
        #[derive(Deserialize)]
        struct UserTable {
            id: String,
            domain: [f64; 2],
            breakpoints: Vec<f64>,
            values: Vec<f64>,
        }
        let t: UserTable = serde_json::from_str(text)?;
        let data = ZigzagData::new(t.breakpoints, t.values)?;
        let dom = BoxDomain::interval(t.domain[0], t.domain[1])?;
        if dom.lower()[0] < data.first() || dom.upper()[0] > data.last() {
            return Err(Error::Domain(format!(
                "declared domain {dom} exceeds breakpoint range [{}, {}]",
                data.first(),
                data.last()
            )));
        }
        Ok((Self::from_table(t.id, data), dom))
    }

    pub fn id(&self) -> &FuncId {
        &self.id
    }

    pub fn table(&self) -> Option<&ZigzagData> {
        self.table.as_ref()
    }

    pub fn is_negated(&self) -> bool {
        self.negated
    }

    /// `−f`, used to turn an approximation from above into one from below.
    pub fn negated(&self) -> Self {
        Self {
            negated: !self.negated,
            ..self.clone()
        }
    }

    fn sign(&self) -> f64 {
        if self.negated {
            -1.0
        } else {
            1.0
        }
    }

    fn raw(&self, x: f64) -> f64 {
        match self.id {
            FuncId::Exp => x.exp(),
            FuncId::Sin => x.sin(),
            FuncId::Cos => x.cos(),
            FuncId::Ln => x.ln(),
            FuncId::Sqrt => x.sqrt(),
            FuncId::Cube => x * x * x,
            FuncId::Zigzag | FuncId::Table(_) => self.table.as_ref().unwrap().eval(x),
        }
    }

    /// Checked evaluation at a scalar point.
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.sign() * self.raw(x))
    }

    fn check_point(&self, x: f64) -> Result<()> {
        let ok = x.is_finite()
            && match self.id {
                FuncId::Ln => x > 0.0,
                FuncId::Sqrt => x >= 0.0,
                FuncId::Zigzag | FuncId::Table(_) => {
                    let t = self.table.as_ref().unwrap();
                    x >= t.first() && x <= t.last()
                }
                _ => true,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("{} is undefined at {x}", self.id)))
        }
    }

    fn antiderivative(&self, x: f64) -> f64 {
        match self.id {
            FuncId::Exp => x.exp(),
            FuncId::Sin => -x.cos(),
            FuncId::Cos => x.sin(),
            FuncId::Ln => {
                if x == 0.0 {
                    0.0
                } else {
                    x * x.ln() - x
                }
            }
            FuncId::Sqrt => 2.0 / 3.0 * x.powf(1.5),
            FuncId::Cube => x.powi(4) / 4.0,
            FuncId::Zigzag | FuncId::Table(_) => unreachable!("tables integrate piecewise"),
        }
    }

    /// Integral over `[a, b]` in one dimension.
    pub fn integral_1d(&self, a: f64, b: f64) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        self.check_point(a)?;
        self.check_point(b)?;
        let v = match &self.table {
            Some(t) => t.integral(a, b),
            None => self.antiderivative(b) - self.antiderivative(a),
        };
        Ok(self.sign() * v)
    }

    /// Integral over a cell.
    pub fn integral_measure(&self, cell: &BoxDomain) -> Result<f64> {
        self.integral(cell.lower(), cell.upper())
    }

    pub fn lipschitz_bound(&self, dom: &BoxDomain) -> Result<f64> {
        self.lipschitz(dom)
    }
}

impl Approximable for FuncDef {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.sign() * self.raw(x[0])
    }

    fn lipschitz(&self, dom: &BoxDomain) -> Result<f64> {
        self.check_domain(dom)?;
        let (a, b) = (dom.lower()[0], dom.upper()[0]);
        Ok(match &self.id {
            FuncId::Exp => b.exp(),
            FuncId::Sin | FuncId::Cos => 1.0,
            FuncId::Cube => 3.0 * (a * a).max(b * b),
            FuncId::Ln => 1.0 / a,
            FuncId::Sqrt => 0.5 / a.sqrt(),
            FuncId::Zigzag | FuncId::Table(_) => self.table.as_ref().unwrap().max_slope_on(a, b),
        })
    }

    fn integral(&self, lower: &[f64], upper: &[f64]) -> Result<f64> {
        if lower.len() != 1 || upper.len() != 1 {
            return Err(Error::Input(format!(
                "{} is univariate, got a {}-dimensional cell",
                self.id,
                lower.len()
            )));
        }
        self.integral_1d(lower[0], upper[0])
    }

    fn check_domain(&self, dom: &BoxDomain) -> Result<()> {
        if dom.dim() != 1 {
            return Err(Error::Domain(format!(
                "{} is univariate, got a {}-dimensional domain",
                self.id,
                dom.dim()
            )));
        }
        let (a, b) = (dom.lower()[0], dom.upper()[0]);
        match &self.id {
            FuncId::Ln | FuncId::Sqrt if a <= 0.0 => Err(Error::Domain(format!(
                "{} needs a strictly positive lower bound for a finite Lipschitz constant, got {a}",
                self.id
            ))),
            FuncId::Zigzag | FuncId::Table(_) => {
                let t = self.table.as_ref().unwrap();
                if a < t.first() || b > t.last() {
                    Err(Error::Domain(format!(
                        "{dom} leaves the table range [{}, {}]",
                        t.first(),
                        t.last()
                    )))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    fn label(&self) -> String {
        if self.negated {
            format!("-{}", self.id)
        } else {
            self.id.to_string()
        }
    }
}

/// Breakpoints of the canonical zigzag test function on `[-5, 5]`.
const ZIGZAG_X: [f64; 26] = [
    -5.0,
    -4.964333030490388,
    -4.523363861798294,
    -4.186332389004458,
    -3.563254132317301,
    -3.289095129965463,
    -2.7552444566311944,
    -2.2368021165781053,
    -1.4493203202395986,
    -0.9500258512314901,
    -0.8611768289925197,
    -0.7865431896495103,
    -0.6809775831455038,
    -0.080199727256694,
    0.035676500210189144,
    0.3920045223634554,
    0.601730316365771,
    1.0899694535620053,
    1.482993178169379,
    2.0671973152584076,
    2.770942138399492,
    3.2759504159580066,
    3.6241479321024053,
    4.0574184357655545,
    4.8362120289126835,
    5.0,
];

const ZIGZAG_Y: [f64; 26] = [
    -0.12801019571599248,
    -0.12446757554744907,
    -0.1946982637766576,
    -0.3937836755004518,
    -0.6434453088250474,
    -0.5770254473388788,
    -0.9671849317937837,
    -1.2943844007567447,
    -0.7368862021423581,
    -0.3908137365219214,
    -0.38988151656613956,
    -0.4006105011239624,
    -0.4793286685566136,
    -0.808540514189117,
    -0.8733602373302513,
    -0.8963166811449923,
    -0.8374228572870663,
    -0.832309313959877,
    -0.6014963419021636,
    -0.9960694536135861,
    -0.34221861821876076,
    0.05120309491708941,
    0.09796193184439114,
    0.043150841431488146,
    0.09860744585003525,
    0.11308897556235686,
];

/// The fixed 26-point zigzag table.
pub fn canonical_zigzag() -> ZigzagData {
    ZigzagData {
        breakpoints: ZIGZAG_X.to_vec(),
        values: ZIGZAG_Y.to_vec(),
    }
}

/// Samples a random zigzag: gaps uniform in `(0, 1]`, first value uniform in
/// `[-1, 1]`, each next value uniform within slope one of the previous.
pub fn zigzag_generate(seed: u64, lo: f64, hi: f64) -> Result<ZigzagData> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Input(format!("degenerate range [{lo}, {hi}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = vec![lo];
    let mut ys = vec![rng.gen_range(-1.0..=1.0)];
    loop {
        let prev_x = *xs.last().unwrap();
        // gen::<f64>() lies in [0, 1); 1 - u lies in (0, 1].
        let gap = 1.0 - rng.gen::<f64>();
        let x = (prev_x + gap).min(hi);
        let step = x - prev_x;
        let prev_y = *ys.last().unwrap();
        let y = prev_y + step * rng.gen_range(-1.0..=1.0);
        xs.push(x);
        ys.push(y);
        if x >= hi {
            break;
        }
    }
    ZigzagData::new(xs, ys)
}
