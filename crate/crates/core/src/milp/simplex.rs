//! Dense bounded-variable dual simplex.
//!
//! Every structural variable is boxed, and each row `y = a·x` gets a logical
//! variable whose box is the row range intersected with the activity range
//! implied by the structural boxes. With every variable boxed, any basis is
//! dual feasible once nonbasic variables sit at the bound matching the sign of
//! their reduced cost, so no phase one is needed and a node can start from
//! whatever basis the previous node left behind.
//!
//! The tableau is kept in condensed form: one row per basic variable, one
//! column per nonbasic variable, `x_B[r] = Σ_k tab[r][k]·x_N[k]`.

use std::time::Instant;

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    /// The dual bound exceeded the cutoff before optimality.
    Cutoff,
    IterLimit,
    TimeLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pos {
    Basic(usize),
    Nonbasic(usize),
}

pub(crate) struct LpCore {
    n: usize,
    /// Loaded rows over structural indices, scaled to unit max coefficient.
    rows: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    basic: Vec<usize>,
    nonbasic: Vec<usize>,
    pos: Vec<Pos>,
    at_upper: Vec<bool>,
    tab: Vec<f64>,
    d: Vec<f64>,
    x: Vec<f64>,
    since_refactor: usize,
    /// Set when a row with an empty range was loaded.
    empty_row: bool,
    pub(crate) iterations: u64,
}

impl LpCore {
    pub(crate) fn new(cost: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        let n = cost.len();
        let mut core = LpCore {
            n,
            rows: Vec::new(),
            lower,
            upper,
            cost: cost.clone(),
            basic: Vec::new(),
            nonbasic: (0..n).collect(),
            pos: (0..n).map(Pos::Nonbasic).collect(),
            at_upper: vec![false; n],
            tab: Vec::new(),
            d: cost,
            x: vec![0.0; n],
            since_refactor: 0,
            empty_row: false,
            iterations: 0,
        };
        core.place_nonbasics();
        core
    }

    pub(crate) fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub(crate) fn structural_values(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub(crate) fn objective(&self) -> f64 {
        self.cost.iter().zip(&self.x).map(|(c, v)| c * v).sum()
    }

    /// Appends `lo ≤ a·x ≤ hi`; its logical enters the basis.
    /// `implied` is the activity range over the root boxes.
    pub(crate) fn add_row(&mut self, terms: &[(usize, f64)], lo: f64, hi: f64, implied: (f64, f64)) {
        let scale = terms.iter().map(|(_, a)| a.abs()).fold(0.0, f64::max);
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let scaled: Vec<(usize, f64)> = terms.iter().map(|&(j, a)| (j, a / scale)).collect();
        let lo = lo.max(implied.0) / scale;
        let hi = hi.min(implied.1) / scale;
        if lo > hi + PRIMAL_TOL * lo.abs().max(1.0) {
            self.empty_row = true;
        }
        let (lo, hi) = if lo > hi { (lo, lo) } else { (lo, hi) };

        let n = self.n;
        let mut row = vec![0.0; n];
        for &(j, a) in &scaled {
            match self.pos[j] {
                Pos::Nonbasic(k) => row[k] += a,
                Pos::Basic(r) => {
                    let src = &self.tab[r * n..(r + 1) * n];
                    for (dst, s) in row.iter_mut().zip(src) {
                        *dst += a * s;
                    }
                }
            }
        }
        let var = self.lower.len();
        let r = self.basic.len();
        self.lower.push(lo);
        self.upper.push(hi);
        self.at_upper.push(false);
        self.pos.push(Pos::Basic(r));
        self.basic.push(var);
        let value: f64 = row
            .iter()
            .zip(&self.nonbasic)
            .map(|(t, &j)| t * self.x[j])
            .sum();
        self.x.push(value);
        self.tab.extend_from_slice(&row);
        self.rows.push(scaled);
    }

    /// Changes the box of a structural variable.
    pub(crate) fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lower[j] = lo;
        self.upper[j] = hi;
        if let Pos::Nonbasic(_) = self.pos[j] {
            self.x[j] = if self.at_upper[j] { hi } else { lo };
        }
    }

    fn place_nonbasics(&mut self) {
        for k in 0..self.n {
            let j = self.nonbasic[k];
            let up = self.d[k] < 0.0 && self.lower[j] < self.upper[j];
            self.at_upper[j] = up;
            self.x[j] = if up { self.upper[j] } else { self.lower[j] };
        }
    }

    /// Flips nonbasic variables whose reduced cost has the wrong sign.
    fn restore_dual_feasibility(&mut self) {
        for k in 0..self.n {
            let j = self.nonbasic[k];
            if self.lower[j] == self.upper[j] {
                self.at_upper[j] = false;
                self.x[j] = self.lower[j];
                continue;
            }
            if self.d[k] < -DUAL_TOL && !self.at_upper[j] {
                self.at_upper[j] = true;
            } else if self.d[k] > DUAL_TOL && self.at_upper[j] {
                self.at_upper[j] = false;
            }
            self.x[j] = if self.at_upper[j] { self.upper[j] } else { self.lower[j] };
        }
    }

    fn compute_basics(&mut self) {
        let n = self.n;
        let xn: Vec<f64> = self.nonbasic.iter().map(|&j| self.x[j]).collect();
        for r in 0..self.basic.len() {
            let row = &self.tab[r * n..(r + 1) * n];
            let v: f64 = row.iter().zip(&xn).map(|(t, x)| t * x).sum();
            self.x[self.basic[r]] = v;
        }
    }

    fn recompute_reduced_costs(&mut self) {
        let n = self.n;
        let mut d: Vec<f64> = self
            .nonbasic
            .iter()
            .map(|&j| if j < n { self.cost[j] } else { 0.0 })
            .collect();
        for (r, &b) in self.basic.iter().enumerate() {
            if b < n && self.cost[b] != 0.0 {
                let c = self.cost[b];
                for (dk, t) in d.iter_mut().zip(&self.tab[r * n..(r + 1) * n]) {
                    *dk += c * t;
                }
            }
        }
        self.d = d;
    }

    /// Rebuilds the tableau from the current basis. Falls back to the slack
    /// basis when the basis matrix is numerically singular.
    pub(crate) fn refactor(&mut self) {
        if !self.try_refactor() {
            self.reset_to_slack_basis();
        }
        self.since_refactor = 0;
        self.recompute_reduced_costs();
        self.restore_dual_feasibility();
        self.compute_basics();
    }

    fn reset_to_slack_basis(&mut self) {
        let n = self.n;
        let m = self.rows.len();
        self.nonbasic = (0..n).collect();
        self.basic = (n..n + m).collect();
        for j in 0..n {
            self.pos[j] = Pos::Nonbasic(j);
        }
        for i in 0..m {
            self.pos[n + i] = Pos::Basic(i);
        }
        self.tab = vec![0.0; m * n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                self.tab[i * n + j] += a;
            }
        }
    }

    fn try_refactor(&mut self) -> bool {
        let n = self.n;
        let m = self.rows.len();
        let bs: Vec<usize> = self.basic.iter().copied().filter(|&j| j < n).collect();
        // rows whose logical is nonbasic
        let r1: Vec<usize> = (0..m).filter(|&i| matches!(self.pos[n + i], Pos::Nonbasic(_))).collect();
        if bs.len() != r1.len() {
            return false;
        }
        let s = bs.len();
        let mut col_of_bs = vec![usize::MAX; n];
        for (c, &j) in bs.iter().enumerate() {
            col_of_bs[j] = c;
        }
        // S·x_Bs = W·x_N, augmented as [S | W]
        let width = s + n;
        let mut aug = vec![0.0; s * width];
        for (ri, &i) in r1.iter().enumerate() {
            for &(j, a) in &self.rows[i] {
                match self.pos[j] {
                    Pos::Basic(_) => aug[ri * width + col_of_bs[j]] += a,
                    Pos::Nonbasic(k) => aug[ri * width + s + k] -= a,
                }
            }
            if let Pos::Nonbasic(k) = self.pos[n + i] {
                aug[ri * width + s + k] += 1.0;
            }
        }
        // Gauss-Jordan with partial pivoting on the S block.
        let mut perm: Vec<usize> = (0..s).collect();
        for c in 0..s {
            let (mut best, mut best_val) = (usize::MAX, 0.0);
            for (ri, &pr) in perm.iter().enumerate().skip(c) {
                let v = aug[pr * width + c].abs();
                if v > best_val {
                    best_val = v;
                    best = ri;
                }
            }
            if best_val < 1e-11 {
                return false;
            }
            perm.swap(c, best);
            let pr = perm[c];
            let piv = aug[pr * width + c];
            for v in &mut aug[pr * width..(pr + 1) * width] {
                *v /= piv;
            }
            let prow: Vec<f64> = aug[pr * width..(pr + 1) * width].to_vec();
            for (ri, &other) in perm.iter().enumerate() {
                if ri == c {
                    continue;
                }
                let f = aug[other * width + c];
                if f != 0.0 {
                    let dst = &mut aug[other * width..(other + 1) * width];
                    for (d, p) in dst.iter_mut().zip(&prow) {
                        *d -= f * p;
                    }
                }
            }
        }
        // Row c of the solved system (at perm[c]) gives x_{bs[c]}.
        let mut tab = vec![0.0; m * n];
        let mut sol: Vec<&[f64]> = vec![&[]; s];
        for c in 0..s {
            let pr = perm[c];
            sol[c] = &aug[pr * width + s..(pr + 1) * width];
        }
        for (r, &b) in self.basic.iter().enumerate() {
            let dst = &mut tab[r * n..(r + 1) * n];
            if b < n {
                dst.copy_from_slice(sol[col_of_bs[b]]);
            } else {
                for &(j, a) in &self.rows[b - n] {
                    match self.pos[j] {
                        Pos::Basic(_) => {
                            for (d, v) in dst.iter_mut().zip(sol[col_of_bs[j]]) {
                                *d += a * v;
                            }
                        }
                        Pos::Nonbasic(k) => dst[k] += a,
                    }
                }
            }
        }
        self.tab = tab;
        true
    }

    fn pivot(&mut self, r: usize, k: usize) {
        let n = self.n;
        let p = self.tab[r * n + k];
        let mut nr: Vec<f64> = self.tab[r * n..(r + 1) * n].iter().map(|t| -t / p).collect();
        nr[k] = 1.0 / p;
        for i in 0..self.basic.len() {
            if i == r {
                continue;
            }
            let tik = self.tab[i * n + k];
            if tik == 0.0 {
                continue;
            }
            let row = &mut self.tab[i * n..(i + 1) * n];
            for (t, v) in row.iter_mut().zip(&nr) {
                *t += tik * v;
            }
            row[k] = tik * nr[k];
        }
        let dk = self.d[k];
        if dk != 0.0 {
            for (t, v) in self.d.iter_mut().zip(&nr) {
                *t += dk * v;
            }
            self.d[k] = dk * nr[k];
        }
        self.tab[r * n..(r + 1) * n].copy_from_slice(&nr);

        let leaving = self.basic[r];
        let entering = self.nonbasic[k];
        self.basic[r] = entering;
        self.nonbasic[k] = leaving;
        self.pos[entering] = Pos::Basic(r);
        self.pos[leaving] = Pos::Nonbasic(k);
        self.since_refactor += 1;
    }

    fn infeasibility(&self, var: usize) -> f64 {
        let v = self.x[var];
        let lo = self.lower[var];
        let hi = self.upper[var];
        if v < lo - PRIMAL_TOL * lo.abs().max(1.0) {
            lo - v
        } else if v > hi + PRIMAL_TOL * hi.abs().max(1.0) {
            v - hi
        } else {
            0.0
        }
    }

    /// Runs dual simplex pivots until primal feasibility, proven
    /// infeasibility, or the dual bound exceeding `cutoff`.
    pub(crate) fn solve(&mut self, cutoff: f64, deadline: Option<Instant>, max_iter: u64) -> LpStatus {
        if self.empty_row {
            return LpStatus::Infeasible;
        }
        self.restore_dual_feasibility();
        self.compute_basics();
        let n = self.n;
        let bland_after = 10 * (n + self.basic.len()) as u64;
        let mut degenerate = 0u64;
        let mut iters = 0u64;
        let mut retried = false;
        loop {
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
            let bland = degenerate > bland_after;
            let mut leave: Option<(usize, f64)> = None;
            for (r, &b) in self.basic.iter().enumerate() {
                let inf = self.infeasibility(b);
                if inf > 0.0 {
                    let better = match leave {
                        None => true,
                        Some((lr, li)) => {
                            if bland {
                                b < self.basic[lr]
                            } else {
                                inf > li
                            }
                        }
                    };
                    if better {
                        leave = Some((r, inf));
                    }
                }
            }
            let Some((r, _)) = leave else {
                if !retried && self.since_refactor > 0 && !self.residuals_ok() {
                    retried = true;
                    self.refactor();
                    continue;
                }
                return LpStatus::Optimal;
            };
            if self.objective() > cutoff {
                return LpStatus::Cutoff;
            }
            if iters >= max_iter {
                return LpStatus::IterLimit;
            }
            if iters % 64 == 0 {
                if let Some(dl) = deadline {
                    if Instant::now() >= dl {
                        return LpStatus::TimeLimit;
                    }
                }
            }
            iters += 1;
            self.iterations += 1;

            let b = self.basic[r];
            let increase = self.x[b] < self.lower[b];
            let row = &self.tab[r * n..(r + 1) * n];
            // eligible: moving x_N away from its bound pushes x_B toward its box
            let eligible = |k: usize| -> Option<f64> {
                let j = self.nonbasic[k];
                if self.lower[j] == self.upper[j] {
                    return None;
                }
                let t = row[k];
                if t.abs() <= PIVOT_TOL {
                    return None;
                }
                let up = self.at_upper[j];
                let ok = if increase { (t > 0.0) != up } else { (t < 0.0) != up };
                if ok {
                    Some(t)
                } else {
                    None
                }
            };
            let mut theta_max = f64::INFINITY;
            for k in 0..n {
                if let Some(t) = eligible(k) {
                    let ratio = (self.d[k].abs() + DUAL_TOL) / t.abs();
                    if ratio < theta_max {
                        theta_max = ratio;
                    }
                }
            }
            if theta_max.is_infinite() {
                if !retried && self.since_refactor > 0 {
                    retried = true;
                    self.refactor();
                    continue;
                }
                return LpStatus::Infeasible;
            }
            let mut enter: Option<(usize, f64, f64)> = None;
            for k in 0..n {
                if let Some(t) = eligible(k) {
                    let ratio = self.d[k].abs() / t.abs();
                    if ratio > theta_max {
                        continue;
                    }
                    let better = match enter {
                        None => true,
                        Some((ek, et, er)) => {
                            if bland {
                                ratio < er - 1e-12 || (ratio <= er + 1e-12 && self.nonbasic[k] < self.nonbasic[ek])
                            } else {
                                t.abs() > et.abs()
                            }
                        }
                    };
                    if better {
                        enter = Some((k, t, ratio));
                    }
                }
            }
            let (k, _, ratio) = enter.unwrap();
            if ratio <= DUAL_TOL {
                degenerate += 1;
            }
            self.pivot(r, k);
            // The leaving variable rests on the bound it violated.
            self.at_upper[b] = !increase;
            self.restore_dual_feasibility();
            self.compute_basics();
        }
    }

    /// Row activities agree with their logicals.
    fn residuals_ok(&self) -> bool {
        let n = self.n;
        self.rows.iter().enumerate().all(|(i, row)| {
            let act: f64 = row.iter().map(|&(j, a)| a * self.x[j]).sum();
            (act - self.x[n + i]).abs() <= 1e-8 * (1.0 + act.abs())
        })
    }
}
