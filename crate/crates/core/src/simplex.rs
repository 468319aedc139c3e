//! Dense two-phase simplex with Bland's rule.
//!
//! Solves `max cᵀx` subject to `A_ub x ≤ b_ub`, `A_eq x = b_eq`, `x ≥ 0`.

use crate::error::{Error, Result};

/// Pivot elements smaller than this are treated as zero.
pub const PIVOT_TOL: f64 = 1e-11;
/// Phase-one objective above this means the program is infeasible.
const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub ub_rows: Vec<Vec<f64>>,
    pub ub_rhs: Vec<f64>,
    pub eq_rows: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn maximize(objective: Vec<f64>) -> Self {
        Self { objective, ..Self::default() }
    }

    pub fn less_eq(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.ub_rows.push(row);
        self.ub_rhs.push(rhs);
        self
    }

    pub fn equal(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if n == 0 {
            return Err(Error::DimensionMismatch("LP without variables".into()));
        }
        let rows_ok = self.ub_rows.iter().chain(&self.eq_rows).all(|r| r.len() == n);
        if !rows_ok || self.ub_rows.len() != self.ub_rhs.len() || self.eq_rows.len() != self.eq_rhs.len() {
            return Err(Error::DimensionMismatch("LP constraint shapes".into()));
        }
        let finite = self
            .objective
            .iter()
            .chain(self.ub_rows.iter().flatten())
            .chain(self.eq_rows.iter().flatten())
            .chain(&self.ub_rhs)
            .chain(&self.eq_rhs)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

struct Tableau {
    /// `m` constraint rows followed by the objective row, each `cols + 1` wide
    /// (last entry is the right-hand side).
    t: Vec<f64>,
    m: usize,
    cols: usize,
    basis: Vec<usize>,
    iterations: usize,
    cap: usize,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.width() + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width();
        let p = self.at(row, col);
        for c in 0..w {
            self.t[row * w + c] /= p;
        }
        self.t[row * w + col] = 1.0;
        for r in 0..=self.m {
            if r == row {
                continue;
            }
            let f = self.at(r, col);
            if f == 0.0 {
                continue;
            }
            for c in 0..w {
                self.t[r * w + c] -= f * self.t[row * w + c];
            }
            self.t[r * w + col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Runs simplex iterations on the objective row over the first `active`
    /// columns. The objective row holds reduced costs; a positive entry can
    /// still increase the objective.
    fn optimize(&mut self, active: usize) -> Result<()> {
        loop {
            let entering = (0..active).find(|&c| self.at(self.m, c) > PIVOT_TOL);
            let Some(col) = entering else { return Ok(()) };
            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let a = self.at(r, col);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r) / a;
                    leaving = match leaving {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            let tie = (ratio - lratio).abs() <= 1e-12 * (1.0 + lratio.abs());
                            if ratio < lratio && !tie || tie && self.basis[r] < self.basis[lr] {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leaving else { return Err(Error::Unbounded) };
            self.iterations += 1;
            if self.iterations > self.cap {
                return Err(Error::NumericalFailure(format!(
                    "simplex exceeded {} iterations",
                    self.cap
                )));
            }
            self.pivot(row, col);
        }
    }

    fn set_objective(&mut self, costs: &[f64]) {
        let w = self.width();
        let base = self.m * w;
        for c in 0..w {
            self.t[base + c] = if c < costs.len() { costs[c] } else { 0.0 };
        }
        for r in 0..self.m {
            let cb = costs.get(self.basis[r]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for c in 0..w {
                    self.t[base + c] -= cb * self.t[r * w + c];
                }
            }
        }
    }

    fn remove_row(&mut self, row: usize) {
        let w = self.width();
        self.t.drain(row * w..(row + 1) * w);
        self.basis.remove(row);
        self.m -= 1;
    }
}

/// Solves the program; the returned objective is `cᵀx`.
pub fn simplex_solve(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.num_vars();
    let n_ub = lp.ub_rows.len();
    let m = n_ub + lp.eq_rows.len();

    // column layout: originals | one slack per ub row | one artificial per row
    let n_slack = n_ub;
    let art0 = n + n_slack;
    let cols = art0 + m;
    let w = cols + 1;
    let mut t = vec![0.0; (m + 1) * w];
    let mut basis = vec![0; m];
    let rows = lp.ub_rows.iter().zip(&lp.ub_rhs).chain(lp.eq_rows.iter().zip(&lp.eq_rhs));
    for (r, (row, &rhs)) in rows.enumerate() {
        let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
        for (c, &v) in row.iter().enumerate() {
            t[r * w + c] = sign * v;
        }
        if r < n_ub {
            t[r * w + n + r] = sign;
        }
        t[r * w + cols] = sign * rhs;
        t[r * w + art0 + r] = 1.0;
        basis[r] = art0 + r;
    }
    let cap = 10 * (m + cols);
    let mut tab = Tableau { t, m, cols, basis, iterations: 0, cap };

    // a slack with coefficient +1 can start in the basis instead of its artificial
    for r in 0..n_ub {
        if tab.at(r, n + r) > 0.0 {
            tab.basis[r] = n + r;
            tab.t[r * w + art0 + r] = 0.0;
        }
    }

    // phase one: maximise −Σ artificials
    let mut phase1 = vec![0.0; cols];
    for c in phase1.iter_mut().skip(art0) {
        *c = -1.0;
    }
    tab.set_objective(&phase1);
    tab.optimize(cols)?;
    let infeasibility: f64 = (0..tab.m)
        .filter(|&r| tab.basis[r] >= art0)
        .map(|r| tab.rhs(r).abs())
        .sum();
    if infeasibility > FEASIBILITY_TOL {
        return Err(Error::Infeasible);
    }

    // drive remaining artificials out of the basis; rows with no usable pivot are redundant
    let mut r = 0;
    while r < tab.m {
        if tab.basis[r] >= art0 {
            let col = (0..art0)
                .filter(|&c| tab.at(r, c).abs() > PIVOT_TOL)
                .max_by(|&a, &b| tab.at(r, a).abs().total_cmp(&tab.at(r, b).abs()));
            match col {
                Some(c) => tab.pivot(r, c),
                None => {
                    tab.remove_row(r);
                    continue;
                }
            }
        }
        r += 1;
    }

    // phase two on the original objective, artificial columns frozen
    let mut costs = lp.objective.clone();
    costs.resize(cols, 0.0);
    tab.set_objective(&costs);
    tab.optimize(art0)?;

    let mut x = vec![0.0; n];
    for r in 0..tab.m {
        if tab.basis[r] < n {
            x[tab.basis[r]] = tab.rhs(r).max(0.0);
        }
    }
    let objective = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
    Ok(LpSolution { x, objective, iterations: tab.iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_variable() {
        let lp = LinearProgram::maximize(vec![1.0]).less_eq(vec![1.0], 3.0);
        let s = simplex_solve(&lp).unwrap();
        assert!((s.objective - 3.0).abs() < 1e-12);
    }

    #[test]
    fn two_variables() {
        let lp = LinearProgram::maximize(vec![1.0, 1.0]).less_eq(vec![1.0, 1.0], 1.0);
        assert!((simplex_solve(&lp).unwrap().objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equality_and_negative_rhs() {
        // max x − y, x + y = 2, −x ≤ −0.5, y ≥ 0.25 (as −y ≤ −0.25)
        let lp = LinearProgram::maximize(vec![1.0, -1.0])
            .equal(vec![1.0, 1.0], 2.0)
            .less_eq(vec![-1.0, 0.0], -0.5)
            .less_eq(vec![0.0, -1.0], -0.25);
        let s = simplex_solve(&lp).unwrap();
        assert!((s.objective - 1.5).abs() < 1e-12);
        assert!((s.x[0] - 1.75).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let lp = LinearProgram::maximize(vec![1.0]).less_eq(vec![1.0], 1.0).equal(vec![1.0], 2.0);
        assert_eq!(simplex_solve(&lp), Err(Error::Infeasible));
        let lp = LinearProgram::maximize(vec![1.0, 0.0]).less_eq(vec![0.0, 1.0], 1.0);
        assert_eq!(simplex_solve(&lp), Err(Error::Unbounded));
    }

    #[test]
    fn redundant_equalities() {
        let lp = LinearProgram::maximize(vec![1.0, 2.0])
            .equal(vec![1.0, 1.0], 1.0)
            .equal(vec![2.0, 2.0], 2.0)
            .less_eq(vec![0.0, 1.0], 0.75);
        let s = simplex_solve(&lp).unwrap();
        assert!((s.objective - 1.75).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under the textbook rule
        let lp = LinearProgram::maximize(vec![0.75, -150.0, 0.02, -6.0])
            .less_eq(vec![0.25, -60.0, -0.04, 9.0], 0.0)
            .less_eq(vec![0.5, -90.0, -0.02, 3.0], 0.0)
            .less_eq(vec![0.0, 0.0, 1.0, 0.0], 1.0);
        let s = simplex_solve(&lp).unwrap();
        assert!((s.objective - 0.05).abs() < 1e-10);
    }

    /// Brute force: every vertex of `{x ≥ 0, Ax ≤ b}` in `n` dimensions is
    /// the solution of `n` tight constraints.
    fn vertex_enumeration(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> f64 {
        let n = c.len();
        let mut rows: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().copied()).collect();
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = -1.0;
            rows.push((e, 0.0));
        }
        let total = rows.len();
        let mut best = f64::NEG_INFINITY;
        let mut idx: Vec<usize> = (0..n).collect();
        loop {
            let mut mat: Vec<Vec<f64>> = idx
                .iter()
                .map(|&i| {
                    let mut r = rows[i].0.clone();
                    r.push(rows[i].1);
                    r
                })
                .collect();
            if let Some(x) = gauss(&mut mat) {
                let feasible = rows
                    .iter()
                    .all(|(r, rhs)| r.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= rhs + 1e-9);
                if feasible {
                    best = best.max(c.iter().zip(&x).map(|(p, q)| p * q).sum());
                }
            }
            // next combination
            let mut k = n;
            loop {
                if k == 0 {
                    return best;
                }
                k -= 1;
                if idx[k] != k + total - n {
                    break;
                }
                if k == 0 {
                    return best;
                }
            }
            idx[k] += 1;
            for j in k + 1..n {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }

    fn gauss(m: &mut [Vec<f64>]) -> Option<Vec<f64>> {
        let n = m.len();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
            if m[piv][col].abs() < 1e-10 {
                return None;
            }
            m.swap(col, piv);
            for r in 0..n {
                if r != col {
                    let f = m[r][col] / m[col][col];
                    for c in col..=n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
        Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
    }

    #[test]
    fn matches_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..40 {
            let n = rng.gen_range(2..=4);
            let m = rng.gen_range(2..=6);
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut a: Vec<Vec<f64>> =
                (0..m).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let mut b: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..2.0)).collect();
            // a box keeps the program bounded
            a.push(vec![1.0; n]);
            b.push(5.0);
            let mut lp = LinearProgram::maximize(c.clone());
            for (r, &v) in a.iter().zip(&b) {
                lp = lp.less_eq(r.clone(), v);
            }
            let got = simplex_solve(&lp).unwrap().objective;
            let want = vertex_enumeration(&c, &a, &b);
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
    }

    #[test]
    fn twenty_variable_programs() {
        // a 20-variable program is too large to enumerate primal vertices, so the
        // oracle is the dual: min bᵀy, Aᵀy ≥ c, y ≥ 0, enumerated over its
        // 6-dimensional vertex set.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let n = 20;
            let m = 6;
            let a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(0.1..1.0)).collect()).collect();
            let b: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..2.0)).collect();
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..1.0)).collect();
            let mut lp = LinearProgram::maximize(c.clone());
            for (r, &v) in a.iter().zip(&b) {
                lp = lp.less_eq(r.clone(), v);
            }
            let primal = simplex_solve(&lp).unwrap().objective;
            // dual in ≤ form: max −bᵀy, −Aᵀy ≤ −c
            let neg_b: Vec<f64> = b.iter().map(|v| -v).collect();
            let at: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| -a[i][j]).collect()).collect();
            let neg_c: Vec<f64> = c.iter().map(|v| -v).collect();
            let dual = -vertex_enumeration(&neg_b, &at, &neg_c);
            assert!((primal - dual).abs() < 1e-8, "{primal} vs {dual}");
        }
    }
}
