use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        })
    }
}

/// `Σ coef·x sense rhs`. Lazy rows are kept out of the LP until violated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    #[serde(default)]
    pub lazy: bool,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Signed slack: nonnegative when satisfied. Equalities report `-|residual|`.
    pub fn slack(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            Sense::Le => self.rhs - act,
            Sense::Ge => act - self.rhs,
            Sense::Eq => -(act - self.rhs).abs(),
        }
    }
}

/// Minimization model with boxed variables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MilpModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Sparse objective; summed when an index repeats.
    pub objective: Vec<(usize, f64)>,
    #[serde(default)]
    pub objective_offset: f64,
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> usize {
        self.variables.push(Variable {
            name: name.into(),
            kind,
            lower,
            upper,
        });
        self.variables.len() - 1
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> usize {
        self.add_var(name, VarKind::Continuous, lower, upper)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> usize {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        self.push_row(name.into(), terms, sense, rhs, false)
    }

    /// Adds a row that the built-in solver only loads once it is violated.
    pub fn add_lazy_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        self.push_row(name.into(), terms, sense, rhs, true)
    }

    fn push_row(&mut self, name: String, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64, lazy: bool) -> usize {
        self.constraints.push(Constraint {
            name,
            terms,
            sense,
            rhs,
            lazy,
        });
        self.constraints.len() - 1
    }

    pub fn set_objective(&mut self, terms: Vec<(usize, f64)>) {
        self.objective = terms;
    }

    pub fn num_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn num_continuous(&self) -> usize {
        self.variables.len() - self.num_binaries()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Dense objective vector.
    pub fn objective_dense(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.variables.len()];
        for &(j, v) in &self.objective {
            c[j] += v;
        }
        c
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.objective.iter().map(|&(j, c)| c * x[j]).sum::<f64>()
    }

    /// Checks the model invariants: finite boxes, binaries within `[0, 1]`,
    /// and every row referencing declared variables.
    pub fn validate(&self) -> Result<()> {
        for (j, v) in self.variables.iter().enumerate() {
            if !v.lower.is_finite() || !v.upper.is_finite() {
                return Err(Error::Model(format!("variable {} ({j}) has an infinite bound", v.name)));
            }
            if v.lower > v.upper {
                return Err(Error::Model(format!(
                    "variable {} has empty box [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(Error::Model(format!("binary {} has bounds outside [0, 1]", v.name)));
            }
        }
        let n = self.variables.len();
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(Error::Model(format!("row {} ({i}) has non-finite rhs", c.name)));
            }
            for &(j, a) in &c.terms {
                if j >= n {
                    return Err(Error::Model(format!("row {} references undeclared variable {j}", c.name)));
                }
                if !a.is_finite() {
                    return Err(Error::Model(format!("row {} has a non-finite coefficient", c.name)));
                }
            }
        }
        for &(j, a) in &self.objective {
            if j >= n || !a.is_finite() {
                return Err(Error::Model("objective references an undeclared variable".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub constraint: usize,
    pub name: String,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// Signed slack of every row, in model order.
    pub slacks: Vec<f64>,
    pub violated: Vec<Violation>,
    /// Variables outside their box or binaries away from `{0, 1}`.
    pub bad_variables: Vec<(String, f64)>,
}

/// Evaluates every row at `point` and reports slacks and violations.
pub fn check_point_feasible(model: &MilpModel, point: &HashMap<String, f64>, tol: f64) -> Result<FeasibilityReport> {
    let mut x = Vec::with_capacity(model.variables.len());
    for v in &model.variables {
        match point.get(&v.name) {
            Some(val) => x.push(*val),
            None => return Err(Error::Input(format!("assignment misses variable {}", v.name))),
        }
    }
    Ok(check_dense(model, &x, tol))
}

/// As [`check_point_feasible`] for a dense assignment in declaration order.
pub fn check_dense(model: &MilpModel, x: &[f64], tol: f64) -> FeasibilityReport {
    let slacks: Vec<f64> = model.constraints.iter().map(|c| c.slack(x)).collect();
    let violated: Vec<Violation> = slacks
        .iter()
        .enumerate()
        .filter(|(_, s)| **s < -tol)
        .map(|(i, s)| Violation {
            constraint: i,
            name: model.constraints[i].name.clone(),
            slack: *s,
        })
        .collect();
    let bad_variables: Vec<(String, f64)> = model
        .variables
        .iter()
        .zip(x)
        .filter(|(v, val)| {
            **val < v.lower - tol
                || **val > v.upper + tol
                || (v.kind == VarKind::Binary && (**val - val.round()).abs() > tol)
        })
        .map(|(v, val)| (v.name.clone(), *val))
        .collect();
    FeasibilityReport {
        feasible: violated.is_empty() && bad_variables.is_empty(),
        slacks,
        violated,
        bad_variables,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single() -> MilpModel {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 10.0);
        m.add_constraint("c", vec![(x, 1.0)], Sense::Ge, 3.0);
        m.set_objective(vec![(x, 1.0)]);
        m
    }

    #[test]
    fn feasible_point_has_zero_slack() {
        let m = single();
        let pt = HashMap::from([("x".to_string(), 3.0)]);
        let r = check_point_feasible(&m, &pt, 1e-9).unwrap();
        assert!(r.feasible);
        assert_eq!(r.slacks, vec![0.0]);
    }

    #[test]
    fn infeasible_point_reports_violation() {
        let m = single();
        let pt = HashMap::from([("x".to_string(), 2.5)]);
        let r = check_point_feasible(&m, &pt, 1e-9).unwrap();
        assert!(!r.feasible);
        assert_eq!(r.violated.len(), 1);
        assert!((r.violated[0].slack + 0.5).abs() < 1e-15);
    }

    #[test]
    fn missing_variable_is_an_input_error() {
        let m = single();
        assert!(matches!(
            check_point_feasible(&m, &HashMap::new(), 1e-9),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn validate_rejects_bad_models() {
        let mut m = single();
        m.variables[0].upper = f64::INFINITY;
        assert!(m.validate().is_err());
        let mut m = single();
        m.constraints[0].terms.push((5, 1.0));
        assert!(m.validate().is_err());
        let mut m = single();
        m.add_var("b", VarKind::Binary, 0.0, 2.0);
        assert!(m.validate().is_err());
    }
}
