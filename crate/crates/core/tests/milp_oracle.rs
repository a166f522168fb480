use parabolic::milp::{
    check_dense, export_lp, parse_lp, solve_lp_relaxation, solve_milp, MilpModel, MilpStatus, Sense, SolveOptions,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_model(rng: &mut ChaCha8Rng) -> MilpModel {
    let nb = rng.gen_range(1..=12);
    let nc = rng.gen_range(0..=3);
    let mut m = MilpModel::new();
    for i in 0..nb {
        m.add_binary(format!("b{i}"));
    }
    for i in 0..nc {
        let lo = rng.gen_range(-3..=0) as f64;
        let hi = lo + rng.gen_range(1..=4) as f64;
        m.add_continuous(format!("x{i}"), lo, hi);
    }
    let n = nb + nc;
    // a random point keeps most instances feasible
    let anchor: Vec<f64> = m
        .variables
        .iter()
        .map(|v| {
            if v.upper == 1.0 && v.lower == 0.0 && v.name.starts_with('b') {
                rng.gen_range(0..=1) as f64
            } else {
                rng.gen_range(v.lower..=v.upper)
            }
        })
        .collect();
    let rows = rng.gen_range(1..=6);
    for r in 0..rows {
        let mut terms = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.6) {
                let a = rng.gen_range(-5..=5) as f64;
                if a != 0.0 {
                    terms.push((j, a));
                }
            }
        }
        if terms.is_empty() {
            terms.push((rng.gen_range(0..n), 1.0));
        }
        let act: f64 = terms.iter().map(|&(j, a)| a * anchor[j]).sum();
        let slack = if rng.gen_bool(0.1) { -3.0 } else { rng.gen_range(0.0..2.0) };
        let (sense, rhs) = match rng.gen_range(0..5) {
            0 => (Sense::Ge, (act - slack).floor()),
            1 if nc > 0 => (Sense::Eq, act),
            _ => (Sense::Le, (act + slack).ceil()),
        };
        if rng.gen_bool(0.3) {
            m.add_lazy_constraint(format!("r{r}"), terms, sense, rhs);
        } else {
            m.add_constraint(format!("r{r}"), terms, sense, rhs);
        }
    }
    let obj: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.gen_range(-4..=4) as f64)).collect();
    m.set_objective(obj);
    m
}

/// Solves a tiny dense linear system by Gaussian elimination.
fn solve_system(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(n: usize, k: usize, from: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in from..n {
        cur.push(i);
        combinations(n, k, i + 1, cur, out);
        cur.pop();
    }
}

/// Brute force: every binary assignment times every vertex of the continuous polytope.
fn oracle(m: &MilpModel) -> Option<f64> {
    let bins: Vec<usize> = (0..m.variables.len()).filter(|&j| m.variables[j].name.starts_with('b')).collect();
    let conts: Vec<usize> = (0..m.variables.len()).filter(|&j| m.variables[j].name.starts_with('x')).collect();
    let nc = conts.len();
    let c = m.objective_dense();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << bins.len()) {
        let mut x = vec![0.0; m.variables.len()];
        for (k, &j) in bins.iter().enumerate() {
            x[j] = ((mask >> k) & 1) as f64;
        }
        // hyperplanes in continuous space: a·x_c = rhs - a·x_b
        let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
        for row in &m.constraints {
            let mut a = vec![0.0; nc];
            let mut rhs = row.rhs;
            for &(j, coef) in &row.terms {
                match conts.iter().position(|&cj| cj == j) {
                    Some(p) => a[p] += coef,
                    None => rhs -= coef * x[j],
                }
            }
            planes.push((a, rhs));
        }
        for (p, &j) in conts.iter().enumerate() {
            let mut e = vec![0.0; nc];
            e[p] = 1.0;
            planes.push((e.clone(), m.variables[j].lower));
            planes.push((e, m.variables[j].upper));
        }
        let mut candidates: Vec<Vec<f64>> = Vec::new();
        let mut combos = Vec::new();
        combinations(planes.len(), nc, 0, &mut Vec::new(), &mut combos);
        for idx in combos {
            let a: Vec<Vec<f64>> = idx.iter().map(|&i| planes[i].0.clone()).collect();
            let b: Vec<f64> = idx.iter().map(|&i| planes[i].1).collect();
            if let Some(v) = solve_system(a, b) {
                candidates.push(v);
            }
        }
        for v in candidates {
            for (p, &j) in conts.iter().enumerate() {
                x[j] = v[p];
            }
            if check_dense(m, &x, 1e-9).feasible {
                let obj: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();
                if best.map_or(true, |bv| obj < bv) {
                    best = Some(obj);
                }
            }
        }
    }
    best
}

#[test]
fn agrees_with_enumeration_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let mut infeasible = 0;
    for case in 0..200 {
        let m = random_model(&mut rng);
        let sol = solve_milp(&m, &SolveOptions::default()).unwrap();
        let expect = oracle(&m);
        match expect {
            None => {
                infeasible += 1;
                assert_eq!(sol.status, MilpStatus::Infeasible, "case {case}: {}", export_lp(&m));
            }
            Some(v) => {
                assert_eq!(sol.status, MilpStatus::Optimal, "case {case}: {}", export_lp(&m));
                let got = sol.objective.unwrap();
                assert!((got - v).abs() <= 1e-6, "case {case}: got {got}, expected {v}\n{}", export_lp(&m));
                let x = sol.values.unwrap();
                assert!(check_dense(&m, &x, 1e-6).feasible, "case {case}");
                let lp = solve_lp_relaxation(&m).unwrap();
                assert!(lp.objective.unwrap() <= got + 1e-7, "case {case}");
            }
        }
    }
    assert!(infeasible > 0 && infeasible < 100, "{infeasible} infeasible cases");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relaxation_bounds_milp_and_respects_boxes(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng);
        let milp = solve_milp(&m, &SolveOptions::default()).unwrap();
        let lp = solve_lp_relaxation(&m).unwrap();
        if let Some(x) = &lp.values {
            for (v, val) in m.variables.iter().zip(x) {
                prop_assert!(*val >= v.lower - 1e-9 && *val <= v.upper + 1e-9);
            }
        }
        if let (Some(a), Some(b)) = (lp.objective, milp.objective) {
            prop_assert!(a <= b + 1e-7);
        }
        if lp.status == MilpStatus::Infeasible {
            prop_assert_eq!(milp.status, MilpStatus::Infeasible);
        }
    }

    #[test]
    fn lp_text_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng);
        let back = parse_lp(&export_lp(&m)).unwrap();
        prop_assert_eq!(back.variables.len(), m.variables.len());
        prop_assert_eq!(back.constraints.len(), m.constraints.len());
        for (a, b) in m.constraints.iter().zip(&back.constraints) {
            let mut ta = a.terms.clone();
            let mut tb = b.terms.clone();
            ta.sort_by_key(|t| t.0);
            tb.sort_by_key(|t| t.0);
            prop_assert_eq!(ta, tb);
            prop_assert_eq!(a.sense, b.sense);
            prop_assert_eq!(a.rhs, b.rhs);
        }
    }
}
