use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use super::expr::{Expr, Interval};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConSense {
    Le,
    Ge,
    Eq,
}

impl ConSense {
    pub fn token(self) -> &'static str {
        match self {
            ConSense::Le => "<=",
            ConSense::Ge => ">=",
            ConSense::Eq => "=",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "<=" | "le" => Some(ConSense::Le),
            ">=" | "ge" => Some(ConSense::Ge),
            "=" | "==" | "eq" => Some(ConSense::Eq),
            _ => None,
        }
    }

    /// Amount by which `lhs sense rhs` is violated.
    pub fn violation(self, lhs: f64, rhs: f64) -> f64 {
        match self {
            ConSense::Le => (lhs - rhs).max(0.0),
            ConSense::Ge => (rhs - lhs).max(0.0),
            ConSense::Eq => (lhs - rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lb: f64,
    pub ub: f64,
    pub integer: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub body: Expr,
    pub sense: ConSense,
    pub rhs: f64,
}

/// Minimization of a linear objective over expression-tree constraints and a
/// box.
#[derive(Debug, Clone, PartialEq)]
pub struct MinlpInstance {
    pub name: String,
    pub variables: Vec<Variable>,
    /// Objective coefficients by variable index.
    pub objective: BTreeMap<usize, f64>,
    pub objective_constant: f64,
    pub constraints: Vec<Constraint>,
}

impl MinlpInstance {
    pub fn names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn bounds(&self) -> Vec<Interval> {
        self.variables.iter().map(|v| Interval::new(v.lb, v.ub)).collect()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().map(|(i, c)| c * x[*i]).sum::<f64>()
    }

    /// Largest constraint violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.sense.violation(c.body.eval(x), c.rhs))
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Value {
        let names = self.names();
        let vars: Vec<Value> = self
            .variables
            .iter()
            .map(|v| json!({ "name": v.name, "lb": v.lb, "ub": v.ub, "integer": v.integer }))
            .collect();
        let mut terms: Vec<Expr> = self
            .objective
            .iter()
            .map(|(i, c)| Expr::Mul(vec![Expr::Const(*c), Expr::Var(*i)]))
            .collect();
        if self.objective_constant != 0.0 || terms.is_empty() {
            terms.push(Expr::Const(self.objective_constant));
        }
        let cons: Vec<Value> = self
            .constraints
            .iter()
            .map(|c| json!({ "name": c.name, "body": c.body.to_json(&names), "sense": c.sense.token(), "rhs": c.rhs }))
            .collect();
        let mut m = Map::new();
        m.insert("name".into(), json!(self.name));
        m.insert("variables".into(), Value::Array(vars));
        m.insert("objective".into(), Expr::Add(terms).to_json(&names));
        m.insert("constraints".into(), Value::Array(cons));
        Value::Object(m)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("instance JSON") + "\n"
    }
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, loc: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| Error::schema(loc, format!("missing field '{key}'")))
}

fn number(v: &Value, loc: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| Error::schema(loc, "expected a number"))
}

/// Parses and validates an instance document and canonicalizes its trees.
pub fn parse_instance(text: &str) -> Result<MinlpInstance> {
    let doc: Value = serde_json::from_str(text)?;
    let root = doc.as_object().ok_or_else(|| Error::schema("$", "expected an object"))?;
    let name = root.get("name").and_then(Value::as_str).unwrap_or("instance").to_string();

    let vars_v = field(root, "variables", "$")?
        .as_array()
        .ok_or_else(|| Error::schema("variables", "expected an array"))?;
    let mut variables = Vec::with_capacity(vars_v.len());
    for (i, v) in vars_v.iter().enumerate() {
        let loc = format!("variables[{i}]");
        let o = v.as_object().ok_or_else(|| Error::schema(&loc, "expected an object"))?;
        let name = field(o, "name", &loc)?
            .as_str()
            .ok_or_else(|| Error::schema(format!("{loc}.name"), "expected a string"))?
            .to_string();
        if variables.iter().any(|w: &Variable| w.name == name) {
            return Err(Error::schema(&loc, format!("duplicate variable '{name}'")));
        }
        let lb = number(field(o, "lb", &loc)?, &format!("{loc}.lb"))?;
        let ub = number(field(o, "ub", &loc)?, &format!("{loc}.ub"))?;
        if !lb.is_finite() || !ub.is_finite() {
            return Err(Error::schema(&loc, format!("variable '{name}' must have finite bounds")));
        }
        if lb > ub {
            return Err(Error::schema(&loc, format!("empty bounds [{lb}, {ub}]")));
        }
        let integer = match o.get("integer") {
            None => false,
            Some(b) => b
                .as_bool()
                .ok_or_else(|| Error::schema(format!("{loc}.integer"), "expected a boolean"))?,
        };
        variables.push(Variable { name, lb, ub, integer });
    }
    let names: Vec<String> = variables.iter().map(|v| v.name.clone()).collect();

    let obj_expr = Expr::from_json(field(root, "objective", "$")?, &names, "objective")?;
    let (objective, objective_constant) = obj_expr
        .affine()
        .ok_or_else(|| Error::schema("objective", "objective must be linear"))?;

    let cons_v = match root.get("constraints") {
        None => &[][..],
        Some(c) => c
            .as_array()
            .ok_or_else(|| Error::schema("constraints", "expected an array"))?
            .as_slice(),
    };
    let mut constraints = Vec::with_capacity(cons_v.len());
    for (i, c) in cons_v.iter().enumerate() {
        let loc = format!("constraints[{i}]");
        let o = c.as_object().ok_or_else(|| Error::schema(&loc, "expected an object"))?;
        let cname = o.get("name").and_then(Value::as_str).map(str::to_string).unwrap_or_else(|| format!("c{i}"));
        let body = Expr::from_json(field(o, "body", &loc)?, &names, &format!("{loc}.body"))?.canonical();
        let token = field(o, "sense", &loc)?
            .as_str()
            .ok_or_else(|| Error::schema(format!("{loc}.sense"), "expected a string"))?;
        let sense = ConSense::parse(token)
            .ok_or_else(|| Error::schema(format!("{loc}.sense"), format!("unknown sense '{token}' in constraint {i}")))?;
        let rhs = match o.get("rhs") {
            None => 0.0,
            Some(r) => number(r, &format!("{loc}.rhs"))?,
        };
        constraints.push(Constraint {
            name: cname,
            body,
            sense,
            rhs,
        });
    }
    Ok(MinlpInstance {
        name,
        variables,
        objective,
        objective_constant,
        constraints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_instance() {
        let inst = parse_instance(r#"{"variables":[{"name":"x","lb":0,"ub":1}],"objective":{"var":"x"}}"#).unwrap();
        assert_eq!(inst.variables.len(), 1);
        assert!(inst.constraints.is_empty());
        assert_eq!(inst.objective[&0], 1.0);
    }

    #[test]
    fn sine_constraint_depth() {
        let text = r#"{"variables":[{"name":"x","lb":0,"ub":1},{"name":"y","lb":-1,"ub":1}],
            "objective":{"var":"y"},
            "constraints":[{"body":{"add":[{"sin":{"add":[{"mul":[2,{"var":"x"}]},1]}},{"neg":{"var":"y"}}]},"sense":"<=","rhs":0}]}"#;
        let inst = parse_instance(text).unwrap();
        let c = &inst.constraints[0];
        let Expr::Add(terms) = &c.body else { panic!() };
        let sin = terms.iter().find(|t| matches!(t, Expr::Unary(..))).unwrap();
        assert_eq!(sin.depth(), 3);
    }

    #[test]
    fn malformed_sense_names_constraint() {
        let text = r#"{"variables":[{"name":"x","lb":0,"ub":1}],"objective":{"var":"x"},
            "constraints":[{"body":{"var":"x"},"sense":"<=","rhs":1},{"body":{"var":"x"},"sense":"<>","rhs":0}]}"#;
        let err = parse_instance(text).unwrap_err().to_string();
        assert!(err.contains("constraints[1]"), "{err}");
    }

    #[test]
    fn schema_errors() {
        let unbounded = r#"{"variables":[{"name":"x","lb":0,"ub":1e999}],"objective":{"var":"x"}}"#;
        assert!(parse_instance(unbounded).is_err());
        let nonlinear = r#"{"variables":[{"name":"x","lb":0,"ub":1}],"objective":{"exp":{"var":"x"}}}"#;
        let err = parse_instance(nonlinear).unwrap_err().to_string();
        assert!(err.contains("objective"), "{err}");
        let undeclared = r#"{"variables":[{"name":"x","lb":0,"ub":1}],"objective":{"var":"z"}}"#;
        assert!(parse_instance(undeclared).is_err());
    }

    #[test]
    fn json_round_trip_is_stable() {
        let text = r#"{"name":"t","variables":[{"name":"x","lb":0,"ub":3},{"name":"y","lb":-1,"ub":1,"integer":true}],
            "objective":{"add":[{"var":"y"},{"mul":[-1,{"var":"x"}]}]},
            "constraints":[{"name":"s","body":{"add":[{"neg":{"var":"y"}},{"sin":{"var":"x"}}]},"sense":">=","rhs":-0.5}]}"#;
        let a = parse_instance(text).unwrap();
        let b = parse_instance(&a.to_json_string()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json_string(), b.to_json_string());
    }
}
