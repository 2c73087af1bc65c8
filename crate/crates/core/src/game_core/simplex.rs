//! Dense two-phase simplex with Bland's rule.
//!
//! Minimizes `c·x` subject to rows `a·x (≤ | = | ≥) b` and `x ≥ 0`.
//! Free variables are handled by callers (split into two nonnegative parts).

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;
const MAX_PIVOTS: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<(Vec<f64>, f64)> {
        match self {
            LpOutcome::Optimal { x, value } => Some((x, value)),
            _ => None,
        }
    }
}

impl LinearProgram {
    /// A program over `vars` nonnegative variables minimizing `objective`.
    pub fn minimize(objective: Vec<f64>) -> Self {
        Self {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn vars(&self) -> usize {
        self.objective.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.objective.len(), "constraint width mismatch");
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        Tableau::build(self).run(&self.objective)
    }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_struct: usize,
    n_cols: usize,
    first_artificial: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.vars();
        let m = lp.constraints.len();
        let n_slack = lp
            .constraints
            .iter()
            .filter(|c| c.relation != Relation::Eq)
            .count();
        let normalized: Vec<(Vec<f64>, Relation, f64)> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < 0.0 {
                    let rel = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (c.coeffs.iter().map(|a| -a).collect(), rel, -c.rhs)
                } else {
                    (c.coeffs.clone(), c.relation, c.rhs)
                }
            })
            .collect();
        let n_art = normalized.iter().filter(|c| c.1 != Relation::Le).count();
        let n_cols = n + n_slack + n_art;
        let first_artificial = n + n_slack;
        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let (mut slack, mut art) = (n, first_artificial);
        for (coeffs, rel, rhs) in normalized {
            let mut row = vec![0.0; n_cols + 1];
            row[..n].copy_from_slice(&coeffs);
            row[n_cols] = rhs;
            match rel {
                Relation::Le => {
                    row[slack] = 1.0;
                    basis.push(slack);
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                    row[art] = 1.0;
                    basis.push(art);
                    art += 1;
                }
                Relation::Eq => {
                    row[art] = 1.0;
                    basis.push(art);
                    art += 1;
                }
            }
            rows.push(row);
        }
        Self {
            rows,
            basis,
            n_struct: n,
            n_cols,
            first_artificial,
        }
    }

    fn rhs(&self, r: usize) -> f64 {
        self.rows[r][self.n_cols]
    }

    /// Reduced-cost row for cost vector `cost` (length n_cols) under the current basis.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut z = cost.to_vec();
        z.push(0.0);
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for (zj, aj) in z.iter_mut().zip(&self.rows[r]) {
                    *zj -= cb * aj;
                }
            }
        }
        z
    }

    fn pivot(&mut self, r: usize, c: usize, z: &mut [f64]) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        let f = z[c];
        if f != 0.0 {
            for (v, pv) in z.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            z[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Bland's-rule iterations on columns `< col_limit`. Returns false when unbounded.
    fn optimize(&mut self, z: &mut [f64], col_limit: usize) -> Result<bool> {
        for _ in 0..MAX_PIVOTS {
            let Some(enter) = (0..col_limit).find(|&j| z[j] < -1e-10) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows.len() {
                let a = self.rows[r][enter];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-12
                                || (ratio <= lratio + 1e-12 && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Ok(false);
            };
            self.pivot(r, enter, z);
        }
        Err(Error::Solver(format!("simplex exceeded {MAX_PIVOTS} pivots")))
    }

    fn run(mut self, objective: &[f64]) -> Result<LpOutcome> {
        // phase 1
        if self.first_artificial < self.n_cols {
            let mut cost = vec![0.0; self.n_cols];
            for c in cost.iter_mut().skip(self.first_artificial) {
                *c = 1.0;
            }
            let mut z = self.reduced_costs(&cost);
            self.optimize(&mut z, self.n_cols)?;
            let infeasibility = -z[self.n_cols];
            let scale = 1.0
                + self
                    .rows
                    .iter()
                    .map(|r| r[self.n_cols].abs())
                    .fold(0.0, f64::max);
            if infeasibility > 1e-8 * scale {
                return Ok(LpOutcome::Infeasible);
            }
            self.drive_out_artificials();
        }
        // phase 2
        let mut cost = vec![0.0; self.n_cols];
        cost[..self.n_struct].copy_from_slice(objective);
        let mut z = self.reduced_costs(&cost);
        if !self.optimize(&mut z, self.first_artificial)? {
            return Ok(LpOutcome::Unbounded);
        }
        let mut x = vec![0.0; self.n_struct];
        for (r, &b) in self.basis.iter().enumerate() {
            if b < self.n_struct {
                x[b] = self.rhs(r).max(0.0);
            }
        }
        let value = x.iter().zip(objective).map(|(a, b)| a * b).sum();
        Ok(LpOutcome::Optimal { x, value })
    }

    fn drive_out_artificials(&mut self) {
        let mut r = 0;
        let mut dummy = vec![0.0; self.n_cols + 1];
        while r < self.rows.len() {
            if self.basis[r] >= self.first_artificial {
                let col = (0..self.first_artificial).find(|&j| self.rows[r][j].abs() > 1e-9);
                match col {
                    Some(c) => {
                        self.pivot(r, c, &mut dummy);
                        r += 1;
                    }
                    None => {
                        // redundant row
                        self.rows.remove(r);
                        self.basis.remove(r);
                    }
                }
            } else {
                r += 1;
            }
        }
        for row in &mut self.rows {
            for v in row.iter_mut().take(self.n_cols).skip(self.first_artificial) {
                *v = 0.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18  → (2, 6), 36
        let mut lp = LinearProgram::minimize(vec![-3.0, -5.0]);
        lp.add(vec![1.0, 0.0], Relation::Le, 4.0)
            .add(vec![0.0, 2.0], Relation::Le, 12.0)
            .add(vec![3.0, 2.0], Relation::Le, 18.0);
        let (x, v) = lp.solve().unwrap().optimal().unwrap();
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
        assert!((v + 36.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + y s.t. x + y = 2, x ≥ 0.5, y ≥ 0.25
        let mut lp = LinearProgram::minimize(vec![1.0, 2.0]);
        lp.add(vec![1.0, 1.0], Relation::Eq, 2.0)
            .add(vec![1.0, 0.0], Relation::Ge, 0.5)
            .add(vec![0.0, 1.0], Relation::Ge, 0.25);
        let (x, v) = lp.solve().unwrap().optimal().unwrap();
        assert!((x[0] - 1.75).abs() < 1e-9);
        assert!((v - 2.25).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::minimize(vec![1.0]);
        lp.add(vec![1.0], Relation::Le, 1.0).add(vec![1.0], Relation::Ge, 2.0);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Infeasible);

        let mut lp = LinearProgram::minimize(vec![-1.0, 0.0]);
        lp.add(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn negative_rhs_and_redundant_equalities() {
        // -x ≥ -3 (x ≤ 3), x + y = 1, 2x + 2y = 2 ; max x
        let mut lp = LinearProgram::minimize(vec![-1.0, 0.0]);
        lp.add(vec![-1.0, 0.0], Relation::Ge, -3.0)
            .add(vec![1.0, 1.0], Relation::Eq, 1.0)
            .add(vec![2.0, 2.0], Relation::Eq, 2.0);
        let (x, _) = lp.solve().unwrap().optimal().unwrap();
        assert!((x[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_program_terminates() {
        // classic cycling example (Beale) under Dantzig's rule
        let mut lp = LinearProgram::minimize(vec![-0.75, 150.0, -0.02, 6.0]);
        lp.add(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0)
            .add(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0)
            .add(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let (_, v) = lp.solve().unwrap().optimal().unwrap();
        assert!((v + 0.05).abs() < 1e-9);
    }
}
