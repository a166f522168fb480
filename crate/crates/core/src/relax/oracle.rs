//! Desk-scale enumeration oracle for tiny instances.

use serde::Serialize;

use super::instance::MinlpInstance;
use super::relaxation::RelaxedInstance;
use crate::error::{Error, Result};

pub const MAX_CONTINUOUS: usize = 3;
pub const MAX_INTEGER_COMBINATIONS: usize = 8;
pub const MAX_GRID: usize = 10_000;
const MAX_POINTS: f64 = 5e7;
const REFINE_STEPS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    /// Best feasible objective found; `None` when no grid point is feasible.
    pub value: Option<f64>,
    pub point: Vec<f64>,
    /// `Σ |cᵢ|·hᵢ` over the coarse grid spacings.
    pub resolution: f64,
    pub evaluations: u64,
}

/// How to fill an auxiliary variable from the others.
#[derive(Debug, Clone)]
enum AuxFill<'a> {
    /// Endpoints and midpoint of the paraboloid bracket.
    Bracket(&'a RelaxedInstance, usize),
    /// The tied value `u(w)`.
    Tied(&'a RelaxedInstance, usize),
}

struct Search<'a> {
    inst: &'a MinlpInstance,
    aux: Vec<(usize, AuxFill<'a>)>,
    free: Vec<usize>,
    feas_tol: f64,
    evaluations: u64,
    best: Option<(f64, Vec<f64>)>,
}

impl Search<'_> {
    fn visit(&mut self, x: &mut Vec<f64>) {
        self.fill(x, 0);
    }

    fn fill(&mut self, x: &mut Vec<f64>, k: usize) {
        if k == self.aux.len() {
            self.evaluations += 1;
            if self.inst.max_violation(x) <= self.feas_tol {
                let v = self.inst.objective_value(x);
                if self.best.as_ref().is_none_or(|(b, _)| v < *b) {
                    self.best = Some((v, x.clone()));
                }
            }
            return;
        }
        let (idx, fill) = self.aux[k].clone();
        let candidates: Vec<f64> = match fill {
            AuxFill::Tied(rel, j) => {
                let s = &rel.substitutions[j];
                vec![s.unary.apply(s.scale * x[s.var] + s.offset)]
            }
            AuxFill::Bracket(rel, j) => {
                let (lo, hi) = rel.bracket(j, x);
                if lo > hi + self.feas_tol {
                    return;
                }
                let hi = hi.max(lo);
                vec![lo, 0.5 * (lo + hi), hi]
            }
        };
        for c in candidates {
            x[idx] = c;
            self.fill(x, k + 1);
        }
    }

    /// Uniform grid over `boxes` for the free variables, with `x` holding the
    /// fixed integer values.
    fn grid(&mut self, x: &mut Vec<f64>, boxes: &[(f64, f64)], steps: usize) {
        let n = self.free.len();
        let mut idx = vec![0usize; n];
        loop {
            for (d, &v) in self.free.iter().enumerate() {
                let (lo, hi) = boxes[d];
                x[v] = if steps == 0 { lo } else { lo + (hi - lo) * idx[d] as f64 / steps as f64 };
            }
            self.visit(x);
            let mut d = 0;
            while d < n {
                idx[d] += 1;
                if idx[d] <= steps {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == n {
                break;
            }
        }
    }
}

fn integer_assignments(inst: &MinlpInstance, skip: &[usize]) -> Result<Vec<Vec<(usize, f64)>>> {
    let mut combos: Vec<Vec<(usize, f64)>> = vec![Vec::new()];
    for (i, v) in inst.variables.iter().enumerate() {
        if !v.integer || skip.contains(&i) {
            continue;
        }
        let (lo, hi) = (v.lb.ceil() as i64, v.ub.floor() as i64);
        if lo > hi {
            return Ok(Vec::new());
        }
        let count = (hi - lo + 1) as usize;
        if combos.len().saturating_mul(count) > MAX_INTEGER_COMBINATIONS {
            return Err(Error::Scale(format!(
                "more than {MAX_INTEGER_COMBINATIONS} integer combinations"
            )));
        }
        combos = combos
            .into_iter()
            .flat_map(|c| {
                (lo..=hi).map(move |k| {
                    let mut c = c.clone();
                    c.push((i, k as f64));
                    c
                })
            })
            .collect();
    }
    Ok(combos)
}

fn run(inst: &MinlpInstance, aux: Vec<(usize, AuxFill<'_>)>, grid_n: usize, feas_tol: f64) -> Result<OracleResult> {
    if grid_n == 0 || grid_n > MAX_GRID {
        return Err(Error::Scale(format!("grid_n must lie in 1..={MAX_GRID}, got {grid_n}")));
    }
    let aux_idx: Vec<usize> = aux.iter().map(|(i, _)| *i).collect();
    let free: Vec<usize> = (0..inst.variables.len())
        .filter(|i| !inst.variables[*i].integer && !aux_idx.contains(i))
        .collect();
    if free.len() > MAX_CONTINUOUS {
        return Err(Error::Scale(format!(
            "{} continuous variables exceed the oracle limit of {MAX_CONTINUOUS}",
            free.len()
        )));
    }
    let combos = integer_assignments(inst, &aux_idx)?;
    let per_combo = ((grid_n + 1) as f64).powi(free.len() as i32) * 3f64.powi(aux.len() as i32);
    if per_combo * combos.len() as f64 > MAX_POINTS {
        return Err(Error::Scale(format!("{:.0} grid points exceed the oracle budget", per_combo * combos.len() as f64)));
    }
    let spacing: Vec<f64> = free
        .iter()
        .map(|&v| (inst.variables[v].ub - inst.variables[v].lb) / grid_n as f64)
        .collect();
    let resolution = free
        .iter()
        .zip(&spacing)
        .map(|(v, h)| inst.objective.get(v).copied().unwrap_or(0.0).abs() * h)
        .sum();
    let mut s = Search {
        inst,
        aux,
        free: free.clone(),
        feas_tol,
        evaluations: 0,
        best: None,
    };
    let mut x = vec![0.0; inst.variables.len()];
    let full: Vec<(f64, f64)> = free.iter().map(|&v| (inst.variables[v].lb, inst.variables[v].ub)).collect();
    for combo in &combos {
        for &(i, val) in combo {
            x[i] = val;
        }
        s.grid(&mut x, &full, grid_n);
    }
    // two rounds of refinement around the incumbent
    let mut radius = spacing.clone();
    for _ in 0..2 {
        let Some((_, best)) = s.best.clone() else { break };
        let mut y = best.clone();
        let boxes: Vec<(f64, f64)> = free
            .iter()
            .zip(&radius)
            .map(|(&v, r)| {
                let var = &inst.variables[v];
                ((best[v] - r).max(var.lb), (best[v] + r).min(var.ub))
            })
            .collect();
        s.grid(&mut y, &boxes, REFINE_STEPS);
        radius = radius.iter().map(|r| 2.0 * r / REFINE_STEPS as f64).collect();
    }
    let (value, point) = match s.best {
        Some((v, p)) => (Some(v), p),
        None => (None, Vec::new()),
    };
    Ok(OracleResult {
        value,
        point,
        resolution,
        evaluations: s.evaluations,
    })
}

/// Enumerates integer assignments times a uniform grid of `grid_n` steps per
/// continuous axis, then refines twice around the incumbent.
pub fn brute_force_minlp(inst: &MinlpInstance, grid_n: usize) -> Result<OracleResult> {
    run(inst, Vec::new(), grid_n, 1e-9)
}

impl RelaxedInstance {
    /// Oracle over the original variables; each auxiliary variable is set to
    /// its tied value, or to the ends and midpoint of its paraboloid bracket.
    pub fn oracle(&self, grid_n: usize) -> Result<OracleResult> {
        let aux = self
            .substitutions
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let fill = if s.tied {
                    AuxFill::Tied(self, j)
                } else {
                    AuxFill::Bracket(self, j)
                };
                (s.aux_index, fill)
            })
            .collect();
        run(&self.instance, aux, grid_n, 1e-9)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relax::instance::parse_instance;
    use std::f64::consts::PI;

    #[test]
    fn sine_nonpositive() {
        let inst = parse_instance(&format!(
            r#"{{"variables":[{{"name":"x","lb":0,"ub":{}}}],"objective":{{"var":"x"}},
            "constraints":[{{"body":{{"sin":{{"var":"x"}}}},"sense":"<=","rhs":0}}]}}"#,
            2.0 * PI
        ))
        .unwrap();
        let r = brute_force_minlp(&inst, 1000).unwrap();
        assert_eq!(r.value, Some(0.0));
    }

    #[test]
    fn largest_x_under_half() {
        let inst = parse_instance(&format!(
            r#"{{"variables":[{{"name":"x","lb":0,"ub":{}}}],"objective":{{"neg":{{"var":"x"}}}},
            "constraints":[{{"body":{{"sin":{{"var":"x"}}}},"sense":"<=","rhs":0.5}}]}}"#,
            PI / 2.0
        ))
        .unwrap();
        let r = brute_force_minlp(&inst, 1000).unwrap();
        let v = r.value.unwrap();
        assert!(v >= -PI / 6.0 - 1e-12 && v <= -PI / 6.0 + r.resolution, "{v}");
        assert!((v + PI / 6.0).abs() < 1e-5, "{v}");
    }

    #[test]
    fn integer_enumeration_and_limits() {
        let inst = parse_instance(
            r#"{"variables":[{"name":"k","lb":0,"ub":3,"integer":true},{"name":"x","lb":0,"ub":1}],
            "objective":{"add":[{"var":"x"},{"neg":{"var":"k"}}]},
            "constraints":[{"body":{"add":[{"var":"k"},{"neg":{"var":"x"}}]},"sense":"<=","rhs":1.5}]}"#,
        )
        .unwrap();
        let r = brute_force_minlp(&inst, 100).unwrap();
        // k = 2 needs x ≥ 0.5; k = 3 infeasible
        assert!((r.value.unwrap() + 1.5).abs() < 1e-9);
        let big = parse_instance(
            r#"{"variables":[{"name":"k","lb":0,"ub":9,"integer":true}],"objective":{"var":"k"}}"#,
        )
        .unwrap();
        assert!(matches!(brute_force_minlp(&big, 10), Err(Error::Scale(_))));
        assert!(matches!(brute_force_minlp(&inst, 20_000), Err(Error::Scale(_))));
    }
}
