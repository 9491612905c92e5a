//! Dense two-phase simplex over exact rationals.
//!
//! Pivoting follows Bland's rule (lowest-index entering column, lowest-index
//! leaving basic variable on ratio ties), so the solver terminates and is
//! deterministic. Intended for the small covering/packing programs that come
//! out of query hypergraphs.

use num_traits::{One, Signed, Zero};

use super::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub coeffs: Vec<Rational>,
    pub cmp: Cmp,
    pub rhs: Rational,
}

/// `sense  objective · x  subject to constraints, x >= 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<Rational>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { value: Rational, solution: Vec<Rational> },
    Infeasible,
    Unbounded,
}

impl LinearProgram {
    pub fn new(sense: Sense, objective: Vec<Rational>) -> Self {
        LinearProgram { sense, objective, constraints: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn constrain(&mut self, coeffs: Vec<Rational>, cmp: Cmp, rhs: Rational) {
        assert_eq!(coeffs.len(), self.num_vars(), "constraint width");
        self.constraints.push(Constraint { coeffs, cmp, rhs });
    }

    pub fn solve(&self) -> LpOutcome {
        Tableau::build(self).solve(self)
    }
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    num_structural: usize,
    first_artificial: usize,
    num_cols: usize,
}

struct Unbounded;

impl Tableau {
    fn build(lp: &LinearProgram) -> Tableau {
        let n = lp.num_vars();
        let m = lp.constraints.len();
        // Normalize to non-negative right-hand sides.
        let normalized: Vec<(Vec<Rational>, Cmp, Rational)> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs.is_negative() {
                    let flipped = match c.cmp {
                        Cmp::Le => Cmp::Ge,
                        Cmp::Ge => Cmp::Le,
                        Cmp::Eq => Cmp::Eq,
                    };
                    (c.coeffs.iter().map(|a| -a).collect(), flipped, -&c.rhs)
                } else {
                    (c.coeffs.clone(), c.cmp, c.rhs.clone())
                }
            })
            .collect();
        let num_slack = normalized.iter().filter(|(_, cmp, _)| *cmp != Cmp::Eq).count();
        let num_artificial = normalized.iter().filter(|(_, cmp, _)| *cmp != Cmp::Le).count();
        let first_artificial = n + num_slack;
        let num_cols = first_artificial + num_artificial;

        let mut rows = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let (mut slack, mut artificial) = (n, first_artificial);
        for (coeffs, cmp, b) in normalized {
            let mut row = coeffs;
            row.resize(num_cols, Rational::zero());
            match cmp {
                Cmp::Le => {
                    row[slack] = Rational::one();
                    basis.push(slack);
                    slack += 1;
                }
                Cmp::Ge => {
                    row[slack] = -Rational::one();
                    slack += 1;
                    row[artificial] = Rational::one();
                    basis.push(artificial);
                    artificial += 1;
                }
                Cmp::Eq => {
                    row[artificial] = Rational::one();
                    basis.push(artificial);
                    artificial += 1;
                }
            }
            rows.push(row);
            rhs.push(b);
        }
        Tableau { rows, rhs, basis, num_structural: n, first_artificial, num_cols }
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col].clone();
        for a in self.rows[r].iter_mut() {
            *a /= &p;
        }
        self.rhs[r] /= &p;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r].clone();
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][col].is_zero() {
                continue;
            }
            let factor = self.rows[i][col].clone();
            for (a, b) in self.rows[i].iter_mut().zip(&pivot_row) {
                if !b.is_zero() {
                    *a -= &factor * b;
                }
            }
            self.rhs[i] -= &factor * &pivot_rhs;
        }
        self.basis[r] = col;
    }

    /// Maximizes `cost · x` over the columns flagged in `allowed`.
    fn optimize(&mut self, cost: &[Rational], allowed: &[bool]) -> Result<(), Unbounded> {
        loop {
            let entering = (0..self.num_cols).find(|&j| {
                if !allowed[j] {
                    return false;
                }
                let mut reduced = cost[j].clone();
                for (i, &b) in self.basis.iter().enumerate() {
                    if !cost[b].is_zero() && !self.rows[i][j].is_zero() {
                        reduced -= &cost[b] * &self.rows[i][j];
                    }
                }
                reduced.is_positive()
            });
            let Some(col) = entering else { return Ok(()) };

            let mut leaving: Option<(usize, Rational)> = None;
            for i in 0..self.rows.len() {
                if !self.rows[i][col].is_positive() {
                    continue;
                }
                let ratio = &self.rhs[i] / &self.rows[i][col];
                let better = match &leaving {
                    None => true,
                    Some((r, best)) => ratio < *best || (ratio == *best && self.basis[i] < self.basis[*r]),
                };
                if better {
                    leaving = Some((i, ratio));
                }
            }
            let Some((row, _)) = leaving else { return Err(Unbounded) };
            self.pivot(row, col);
        }
    }

    fn objective_value(&self, cost: &[Rational]) -> Rational {
        self.basis.iter().zip(&self.rhs).map(|(&b, v)| &cost[b] * v).sum()
    }

    fn solve(mut self, lp: &LinearProgram) -> LpOutcome {
        let all = vec![true; self.num_cols];
        if self.first_artificial < self.num_cols {
            let mut phase_one = vec![Rational::zero(); self.num_cols];
            for c in phase_one.iter_mut().skip(self.first_artificial) {
                *c = -Rational::one();
            }
            if self.optimize(&phase_one, &all).is_err() {
                unreachable!("phase one objective is bounded by zero");
            }
            if self.objective_value(&phase_one).is_negative() {
                return LpOutcome::Infeasible;
            }
            // Drive zero-level artificials out of the basis, dropping
            // redundant rows.
            let mut r = 0;
            while r < self.rows.len() {
                if self.basis[r] >= self.first_artificial {
                    match (0..self.first_artificial).find(|&j| !self.rows[r][j].is_zero()) {
                        Some(j) => self.pivot(r, j),
                        None => {
                            self.rows.remove(r);
                            self.rhs.remove(r);
                            self.basis.remove(r);
                            continue;
                        }
                    }
                }
                r += 1;
            }
        }

        let mut cost = vec![Rational::zero(); self.num_cols];
        for (c, o) in cost.iter_mut().zip(&lp.objective) {
            *c = match lp.sense {
                Sense::Maximize => o.clone(),
                Sense::Minimize => -o,
            };
        }
        let allowed: Vec<bool> = (0..self.num_cols).map(|j| j < self.first_artificial).collect();
        if self.optimize(&cost, &allowed).is_err() {
            return LpOutcome::Unbounded;
        }
        let mut solution = vec![Rational::zero(); self.num_structural];
        for (&b, v) in self.basis.iter().zip(&self.rhs) {
            if b < self.num_structural {
                solution[b] = v.clone();
            }
        }
        let value = lp.objective.iter().zip(&solution).map(|(c, x)| c * x).sum();
        LpOutcome::Optimal { value, solution }
    }
}
