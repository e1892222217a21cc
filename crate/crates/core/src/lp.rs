//! Dense two-phase simplex solver.
//!
//! Small dense programs are all this crate needs: support queries over a few
//! hundred halfspaces, the rationalizability programs of the counterfactual
//! module and the least-absolute-deviation fits. Pivoting is deterministic
//! (largest reduced cost with lowest-index ties, falling back to Bland's rule
//! on degenerate stalls), so repeated solves return identical certificates.
//!
//! An unbounded program is a regular outcome: the solver returns a feasible
//! point together with a recession direction along which the objective grows
//! without bound.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
const DEGENERATE_STALL: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

/// Sign restriction on a decision variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarDomain {
    Free,
    NonNegative,
    NonPositive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Outcome of a solve. `Unbounded` carries a feasible point and a ray `d`
/// such that `point + t * d` stays feasible for all `t >= 0` while the
/// objective improves at a constant positive rate.
#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Unbounded { point: Vec<f64>, ray: Vec<f64> },
    Infeasible,
}

impl LpOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, LpOutcome::Infeasible)
    }
}

#[derive(Clone, Debug)]
pub struct LinearProgram {
    sense: Sense,
    objective: Vec<f64>,
    domains: Vec<VarDomain>,
    constraints: Vec<Constraint>,
}

impl LinearProgram {
    /// A program in `num_vars` free variables with a zero objective.
    pub fn new(num_vars: usize, sense: Sense) -> Self {
        Self {
            sense,
            objective: vec![0.0; num_vars],
            domains: vec![VarDomain::Free; num_vars],
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn set_objective(&mut self, coeffs: &[f64]) {
        assert_eq!(coeffs.len(), self.objective.len(), "objective length");
        self.objective.copy_from_slice(coeffs);
    }

    pub fn set_objective_coeff(&mut self, var: usize, coeff: f64) {
        self.objective[var] = coeff;
    }

    pub fn set_domain(&mut self, var: usize, domain: VarDomain) {
        self.domains[var] = domain;
    }

    /// Adds a sparse constraint `sum coeff * x[var] (rel) rhs`.
    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        debug_assert!(coeffs.iter().all(|&(v, _)| v < self.objective.len()));
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    /// Adds a dense constraint over the leading variables.
    pub fn add_dense(&mut self, coeffs: &[f64], relation: Relation, rhs: f64) {
        self.add_dense_at(0, coeffs, relation, rhs);
    }

    /// Adds a dense constraint whose coefficients apply to variables
    /// `offset..offset + coeffs.len()`.
    pub fn add_dense_at(&mut self, offset: usize, coeffs: &[f64], relation: Relation, rhs: f64) {
        let sparse = coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| (offset + i, *c))
            .collect();
        self.add_constraint(sparse, relation, rhs);
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        Tableau::build(self).run(self)
    }

    /// Maximum violation of the constraints and sign restrictions at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().map(|&(v, a)| a * x[v]).sum();
            let viol = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        for (v, d) in self.domains.iter().enumerate() {
            let viol = match d {
                VarDomain::Free => 0.0,
                VarDomain::NonNegative => -x[v],
                VarDomain::NonPositive => x[v],
            };
            worst = worst.max(viol);
        }
        worst
    }
}

/// Standard-form column: which original variable it feeds, and with what sign.
#[derive(Clone, Copy)]
enum Column {
    Structural { var: usize, sign: f64 },
    Slack,
    Artificial,
}

struct Tableau {
    rows: usize,
    width: usize,
    data: Vec<f64>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    columns: Vec<Column>,
    active_rows: Vec<bool>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let mut columns = Vec::new();
        let mut var_cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(lp.num_vars());
        for (var, dom) in lp.domains.iter().enumerate() {
            let mut cols = Vec::new();
            match dom {
                VarDomain::Free => {
                    cols.push((columns.len(), 1.0));
                    columns.push(Column::Structural { var, sign: 1.0 });
                    cols.push((columns.len(), -1.0));
                    columns.push(Column::Structural { var, sign: -1.0 });
                }
                VarDomain::NonNegative => {
                    cols.push((columns.len(), 1.0));
                    columns.push(Column::Structural { var, sign: 1.0 });
                }
                VarDomain::NonPositive => {
                    cols.push((columns.len(), -1.0));
                    columns.push(Column::Structural { var, sign: -1.0 });
                }
            }
            var_cols.push(cols);
        }

        let rows = lp.constraints.len();
        // slack and artificial columns are appended after structural ones
        let mut slack_of_row = vec![None; rows];
        for (i, c) in lp.constraints.iter().enumerate() {
            if c.relation != Relation::Eq {
                slack_of_row[i] = Some(columns.len());
                columns.push(Column::Slack);
            }
        }
        let mut needs_artificial = vec![false; rows];
        for (i, c) in lp.constraints.iter().enumerate() {
            let flip = c.rhs < 0.0;
            let slack_sign = match c.relation {
                Relation::Le => 1.0,
                Relation::Ge => -1.0,
                Relation::Eq => 0.0,
            } * if flip { -1.0 } else { 1.0 };
            needs_artificial[i] = slack_sign <= 0.0;
        }
        let mut art_of_row = vec![None; rows];
        for i in 0..rows {
            if needs_artificial[i] {
                art_of_row[i] = Some(columns.len());
                columns.push(Column::Artificial);
            }
        }

        let ncols = columns.len();
        let width = ncols + 1;
        let mut data = vec![0.0; rows * width];
        let mut basis = vec![0; rows];
        for (i, c) in lp.constraints.iter().enumerate() {
            let flip = if c.rhs < 0.0 { -1.0 } else { 1.0 };
            let row = &mut data[i * width..(i + 1) * width];
            for &(var, a) in &c.coeffs {
                for &(col, sign) in &var_cols[var] {
                    row[col] += flip * a * sign;
                }
            }
            if let Some(s) = slack_of_row[i] {
                let base = if c.relation == Relation::Le { 1.0 } else { -1.0 };
                row[s] = flip * base;
            }
            row[ncols] = flip * c.rhs;
            if let Some(a) = art_of_row[i] {
                row[a] = 1.0;
                basis[i] = a;
            } else {
                basis[i] = slack_of_row[i].expect("row without artificial has a slack");
            }
        }

        Tableau {
            rows,
            width,
            data,
            obj: vec![0.0; width],
            basis,
            columns,
            active_rows: vec![true; rows],
        }
    }

    fn ncols(&self) -> usize {
        self.width - 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.data[i * self.width + self.width - 1]
    }

    /// Resets the reduced-cost row for maximizing `cost · x_std`.
    fn price_out(&mut self, cost: &[f64]) {
        self.obj[..cost.len()].copy_from_slice(cost);
        self.obj[cost.len()] = 0.0;
        for i in 0..self.rows {
            if !self.active_rows[i] {
                continue;
            }
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.data[i * self.width..(i + 1) * self.width];
                for (o, r) in self.obj.iter_mut().zip(row) {
                    *o -= cb * r;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.width;
        let p = self.data[r * w + q];
        {
            let row = &mut self.data[r * w..(r + 1) * w];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[q] = 1.0;
        }
        let pivot_row: Vec<f64> = self.data[r * w..(r + 1) * w].to_vec();
        for i in 0..self.rows {
            if i == r || !self.active_rows[i] {
                continue;
            }
            let f = self.data[i * w + q];
            if f != 0.0 {
                let row = &mut self.data[i * w..(i + 1) * w];
                for (v, pr) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pr;
                }
                row[q] = 0.0;
            }
        }
        let f = self.obj[q];
        if f != 0.0 {
            for (v, pr) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * pr;
            }
            self.obj[q] = 0.0;
        }
        self.basis[r] = q;
    }

    /// Runs simplex iterations on the current reduced-cost row. Returns the
    /// entering column of an unbounded direction, if one is found.
    fn iterate(&mut self, allow: &dyn Fn(usize) -> bool) -> Result<Option<usize>> {
        let max_iter = 50_000 + 50 * (self.rows + self.ncols());
        let mut stall = 0usize;
        for _ in 0..max_iter {
            let bland = stall >= DEGENERATE_STALL;
            let mut entering = None;
            let mut best = PIVOT_TOL;
            for j in 0..self.ncols() {
                if !allow(j) {
                    continue;
                }
                let c = self.obj[j];
                if c > PIVOT_TOL {
                    if bland {
                        entering = Some(j);
                        break;
                    }
                    if c > best {
                        best = c;
                        entering = Some(j);
                    }
                }
            }
            let Some(q) = entering else {
                return Ok(None);
            };

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                if !self.active_rows[i] {
                    continue;
                }
                let a = self.at(i, q);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i).max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12
                                || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li])
                            {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else {
                return Ok(Some(q));
            };
            if ratio <= 1e-12 {
                stall += 1;
            } else {
                stall = 0;
            }
            self.pivot(r, q);
        }
        Err(Error::numeric("simplex iteration limit reached"))
    }

    fn standard_point(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.ncols()];
        for i in 0..self.rows {
            if self.active_rows[i] {
                x[self.basis[i]] = self.rhs(i);
            }
        }
        x
    }

    fn to_original(&self, std: &[f64], nvars: usize) -> Vec<f64> {
        let mut x = vec![0.0; nvars];
        for (col, c) in self.columns.iter().enumerate() {
            if let Column::Structural { var, sign } = c {
                x[*var] += sign * std[col];
            }
        }
        x
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpOutcome> {
        let ncols = self.ncols();
        let is_art: Vec<bool> = self
            .columns
            .iter()
            .map(|c| matches!(c, Column::Artificial))
            .collect();

        if is_art.iter().any(|&a| a) {
            let phase1: Vec<f64> = is_art.iter().map(|&a| if a { -1.0 } else { 0.0 }).collect();
            self.price_out(&phase1);
            if self.iterate(&|_| true)?.is_some() {
                return Err(Error::numeric("phase one reported an unbounded direction"));
            }
            let infeas = self.obj[ncols];
            let scale = 1.0
                + lp
                    .constraints
                    .iter()
                    .map(|c| c.rhs.abs())
                    .fold(0.0, f64::max);
            if infeas > FEAS_TOL * scale {
                return Ok(LpOutcome::Infeasible);
            }
            // drive remaining artificials out of the basis
            for i in 0..self.rows {
                if !is_art[self.basis[i]] {
                    continue;
                }
                let mut col = None;
                let mut best = PIVOT_TOL;
                for (j, art) in is_art.iter().enumerate() {
                    if !art && self.at(i, j).abs() > best {
                        best = self.at(i, j).abs();
                        col = Some(j);
                    }
                }
                match col {
                    Some(j) => self.pivot(i, j),
                    None => self.active_rows[i] = false,
                }
            }
        }

        let sign = match lp.sense {
            Sense::Maximize => 1.0,
            Sense::Minimize => -1.0,
        };
        let mut cost = vec![0.0; ncols];
        for (col, c) in self.columns.iter().enumerate() {
            if let Column::Structural { var, sign: s } = c {
                cost[col] = sign * s * lp.objective[*var];
            }
        }
        self.price_out(&cost);
        let unbounded = self.iterate(&|j| !is_art[j])?;
        let point_std = self.standard_point();
        let point = self.to_original(&point_std, lp.num_vars());
        if let Some(q) = unbounded {
            let mut dir = vec![0.0; ncols];
            dir[q] = 1.0;
            for i in 0..self.rows {
                if self.active_rows[i] {
                    dir[self.basis[i]] = -self.at(i, q);
                }
            }
            let ray = self.to_original(&dir, lp.num_vars());
            return Ok(LpOutcome::Unbounded { point, ray });
        }
        let value: f64 = lp
            .objective
            .iter()
            .zip(&point)
            .map(|(c, x)| c * x)
            .sum();
        Ok(LpOutcome::Optimal { x: point, value })
    }
}
