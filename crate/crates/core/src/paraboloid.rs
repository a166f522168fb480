use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::BoxDomain;

/// Which side of `f` an approximation lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Below,
    Above,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Below => "below",
            Side::Above => "above",
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "below" => Ok(Side::Below),
            "above" => Ok(Side::Above),
            _ => Err(Error::Input(format!("side must be 'below' or 'above', got '{s}'"))),
        }
    }
}

/// `p(x) = Σ αᵢxᵢ² + Σ βᵢxᵢ + γ`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paraboloid {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: f64,
}

impl Paraboloid {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>, gamma: f64) -> Result<Self> {
        if alpha.is_empty() || alpha.len() != beta.len() {
            return Err(Error::Input(format!(
                "paraboloid needs matching nonempty α and β, got {} and {}",
                alpha.len(),
                beta.len()
            )));
        }
        if alpha.iter().chain(&beta).any(|v| !v.is_finite()) || !gamma.is_finite() {
            return Err(Error::Input("paraboloid coefficients must be finite".into()));
        }
        Ok(Self { alpha, beta, gamma })
    }

    pub fn univariate(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self {
            alpha: vec![alpha],
            beta: vec![beta],
            gamma,
        }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.alpha
            .iter()
            .zip(&self.beta)
            .zip(x)
            .map(|((a, b), x)| (a * x + b) * x)
            .sum::<f64>()
            + self.gamma
    }

    /// `∂p/∂xᵢ = 2αᵢxᵢ + βᵢ`
    pub fn partial(&self, i: usize, xi: f64) -> f64 {
        2.0 * self.alpha[i] * xi + self.beta[i]
    }

    /// Exact integral over `[lower, upper]`; zero on degenerate boxes.
    pub fn integral(&self, lower: &[f64], upper: &[f64]) -> f64 {
        let vol: f64 = lower.iter().zip(upper).map(|(l, u)| u - l).product();
        if vol == 0.0 {
            return 0.0;
        }
        let mean: f64 = (0..self.dim())
            .map(|i| {
                let (l, u) = (lower[i], upper[i]);
                self.alpha[i] * (u * u + u * l + l * l) / 3.0 + self.beta[i] * (u + l) / 2.0
            })
            .sum::<f64>()
            + self.gamma;
        vol * mean
    }

    pub fn negated(&self) -> Self {
        Self {
            alpha: self.alpha.iter().map(|v| -v).collect(),
            beta: self.beta.iter().map(|v| -v).collect(),
            gamma: -self.gamma,
        }
    }

    /// `q(x) = p(x − s)`: coefficients `(α, β − 2αs, γ + Σ(αs² − βs))`.
    pub fn shifted(&self, s: &[f64]) -> Self {
        let mut gamma = self.gamma;
        let mut beta = self.beta.clone();
        for i in 0..self.dim() {
            let (a, b) = (self.alpha[i], self.beta[i]);
            beta[i] = b - 2.0 * a * s[i];
            gamma += a * s[i] * s[i] - b * s[i];
        }
        Self {
            alpha: self.alpha.clone(),
            beta,
            gamma,
        }
    }

    /// Adds a constant.
    pub fn lifted(&self, c: f64) -> Self {
        Self {
            gamma: self.gamma + c,
            ..self.clone()
        }
    }

    /// `C_p = maxᵢ max(|2αᵢaᵢ + βᵢ|, |2αᵢbᵢ + βᵢ|)`, a 1-norm Lipschitz constant of `p` on `dom`.
    pub fn slope_bound(&self, dom: &BoxDomain) -> f64 {
        (0..self.dim())
            .map(|i| {
                self.partial(i, dom.lower()[i])
                    .abs()
                    .max(self.partial(i, dom.upper()[i]).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// A finite family of paraboloids, evaluated through its pointwise max (below)
/// or min (above).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParaboloidSet {
    pub members: Vec<Paraboloid>,
}

impl ParaboloidSet {
    pub fn new(members: Vec<Paraboloid>) -> Self {
        Self { members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn max_eval(&self, x: &[f64]) -> f64 {
        self.members.iter().map(|p| p.eval(x)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_eval(&self, x: &[f64]) -> f64 {
        self.members.iter().map(|p| p.eval(x)).fold(f64::INFINITY, f64::min)
    }

    /// Negates every coefficient: a below-set of `−f` becomes an above-set of `f`.
    pub fn flip(&self) -> Self {
        Self {
            members: self.members.iter().map(Paraboloid::negated).collect(),
        }
    }

    pub fn shifted(&self, s: &[f64]) -> Self {
        Self {
            members: self.members.iter().map(|p| p.shifted(s)).collect(),
        }
    }

    pub fn nonpositive_quadratic(&self) -> bool {
        self.members.iter().all(|p| p.alpha.iter().all(|a| *a <= 0.0))
    }

    pub fn slope_bound(&self, dom: &BoxDomain) -> f64 {
        self.members.iter().map(|p| p.slope_bound(dom)).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flip_is_sign_change_and_involution() {
        let p = Paraboloid::univariate(1.0, 0.0, -1.0);
        assert_eq!(p.negated(), Paraboloid::univariate(-1.0, 0.0, 1.0));
        let s = ParaboloidSet::new(vec![p, Paraboloid::univariate(-0.5, 2.0, 3.0)]);
        assert_eq!(s.flip().flip(), s);
    }

    #[test]
    fn shift_matches_substitution() {
        let p = Paraboloid::univariate(-0.3, 1.2, 0.7);
        let s = 2.0 * std::f64::consts::PI;
        let q = p.shifted(&[s]);
        for x in [-3.0, 0.0, 1.5, 9.0] {
            assert!((q.eval(&[x]) - p.eval(&[x - s])).abs() < 1e-12);
        }
        assert_eq!(q.alpha[0], -0.3);
        assert!((q.beta[0] - (1.2 + 0.6 * s)).abs() < 1e-12);
    }

    #[test]
    fn integral_of_shifted_line() {
        // ∫₀^¼ (x + 0.25) dx
        let p = Paraboloid::univariate(0.0, 1.0, 0.25);
        assert!((p.integral(&[0.0], &[0.25]) - 0.09375).abs() < 1e-15);
        assert_eq!(p.integral(&[1.0], &[1.0]), 0.0);
    }

    #[test]
    fn slope_bound_examples() {
        let dom = BoxDomain::interval(0.0, 2.0).unwrap();
        assert_eq!(Paraboloid::univariate(-1.0, 2.0, 0.0).slope_bound(&dom), 2.0);
        assert_eq!(Paraboloid::univariate(0.0, 0.0, 5.0).slope_bound(&dom), 0.0);
    }
}
