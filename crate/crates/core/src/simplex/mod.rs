//! Bounded revised simplex.
//!
//! Every row `a_i x (sense) b_i` is turned into `a_i x - s_i = 0` with a
//! logical variable `s_i` whose bounds encode the sense, so the whole problem
//! is "equalities plus boxes". The all-logical basis is the starting point;
//! phase 1 minimizes the sum of bound violations of the basic variables and
//! phase 2 the true objective. Dantzig pricing switches to Bland's rule after
//! `2 * (rows + cols)` consecutive non-improving pivots.
//!
//! Row duals follow the sensitivity convention: `duals[i]` is the rate of
//! change of the optimal objective with respect to `rhs[i]`.

mod lu;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use lu::BasisFactor;

/// Absolute primal feasibility tolerance reported to callers.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Relative optimality tolerance reported to callers.
pub const OPTIMALITY_TOL: f64 = 1e-7;

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const MAX_RECOVERIES: usize = 8;

/// Row sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Ge,
    Le,
    Eq,
}

/// Role of a row inside a stage subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowTag {
    /// Non-anticipativity row `z_r = x_hat_r`.
    Copy,
    Structural,
    Cut,
}

/// A minimization LP with a column-major sparse constraint matrix.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    col_lower: Vec<f64>,
    col_upper: Vec<f64>,
    columns: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    senses: Vec<Sense>,
    tags: Vec<RowTag>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a column with objective coefficient `cost` and bounds `[lower, upper]`.
    pub fn add_column(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.col_lower.push(lower);
        self.col_upper.push(upper);
        self.columns.push(Vec::new());
        self.columns.len() - 1
    }

    /// Adds the row `sum coeffs (sense) rhs`. Repeated columns are summed.
    pub fn add_row(&mut self, coeffs: &[(usize, f64)], sense: Sense, rhs: f64, tag: RowTag) -> usize {
        let row = self.rhs.len();
        for &(col, value) in coeffs {
            if value == 0.0 {
                continue;
            }
            let column = &mut self.columns[col];
            match column.last_mut() {
                Some(last) if last.0 == row => last.1 += value,
                _ => column.push((row, value)),
            }
        }
        self.rhs.push(rhs);
        self.senses.push(sense);
        self.tags.push(tag);
        row
    }

    pub fn num_cols(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn set_cost(&mut self, col: usize, cost: f64) {
        self.objective[col] = cost;
    }

    pub fn col_lower(&self) -> &[f64] {
        &self.col_lower
    }

    pub fn col_upper(&self) -> &[f64] {
        &self.col_upper
    }

    pub fn set_bounds(&mut self, col: usize, lower: f64, upper: f64) {
        self.col_lower[col] = lower;
        self.col_upper[col] = upper;
    }

    pub fn column(&self, col: usize) -> &[(usize, f64)] {
        &self.columns[col]
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn set_rhs(&mut self, row: usize, value: f64) {
        self.rhs[row] = value;
    }

    pub fn senses(&self) -> &[Sense] {
        &self.senses
    }

    pub fn tags(&self) -> &[RowTag] {
        &self.tags
    }

    /// `A x` for every row.
    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        let mut act = vec![0.0; self.num_rows()];
        for (j, col) in self.columns.iter().enumerate() {
            let xj = x[j];
            if xj != 0.0 {
                for &(i, a) in col {
                    act[i] += a * xj;
                }
            }
        }
        act
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of a row or a column bound by `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, act) in self.row_activity(x).into_iter().enumerate() {
            let b = self.rhs[i];
            let v = match self.senses[i] {
                Sense::Ge => b - act,
                Sense::Le => act - b,
                Sense::Eq => (act - b).abs(),
            };
            worst = worst.max(v);
        }
        for j in 0..self.num_cols() {
            worst = worst.max(self.col_lower[j] - x[j]).max(x[j] - self.col_upper[j]);
        }
        worst
    }

    /// Checks finiteness and bound consistency.
    pub fn validate(&self) -> Result<()> {
        for (j, col) in self.columns.iter().enumerate() {
            if !self.objective[j].is_finite() {
                return Err(Error::Model(format!("column {j}: non-finite objective coefficient")));
            }
            let (lo, hi) = (self.col_lower[j], self.col_upper[j]);
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::Model(format!("column {j}: invalid bounds [{lo}, {hi}]")));
            }
            if col.iter().any(|(_, a)| !a.is_finite()) {
                return Err(Error::Model(format!("column {j}: non-finite coefficient")));
            }
        }
        if let Some(i) = self.rhs.iter().position(|b| !b.is_finite()) {
            return Err(Error::Model(format!("row {i}: non-finite rhs")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of [`solve_lp`]. Vectors are empty unless the status is optimal.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub primal: Vec<f64>,
    /// One entry per row, `d objective / d rhs`.
    pub duals: Vec<f64>,
    /// `c - A^T duals` for every column.
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    fn without_point(status: LpStatus, iterations: usize) -> Self {
        let objective = match status {
            LpStatus::Infeasible => f64::INFINITY,
            LpStatus::Unbounded => f64::NEG_INFINITY,
            LpStatus::Optimal => f64::NAN,
        };
        Self { status, objective, primal: Vec::new(), duals: Vec::new(), reduced_costs: Vec::new(), iterations }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solves `lp` with its own column bounds.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    solve_lp_with_bounds(lp, &lp.col_lower, &lp.col_upper)
}

/// Solves `lp` with the column bounds replaced by `lower`/`upper`.
pub fn solve_lp_with_bounds(lp: &LinearProgram, lower: &[f64], upper: &[f64]) -> Result<LpSolution> {
    lp.validate()?;
    if lower.len() != lp.num_cols() || upper.len() != lp.num_cols() {
        return Err(Error::Contract("bound vectors do not match the column count".into()));
    }
    if (0..lp.num_cols()).any(|j| lower[j] > upper[j]) {
        return Ok(LpSolution::without_point(LpStatus::Infeasible, 0));
    }
    Simplex::new(lp, lower, upper).run()
}

/// Duals of the rows tagged [`RowTag::Copy`], in row order.
pub fn extract_copy_duals(sol: &LpSolution, lp: &LinearProgram) -> Result<Vec<f64>> {
    if !sol.is_optimal() {
        return Err(Error::Contract("copy duals requested from a non-optimal LP solution".into()));
    }
    Ok(lp
        .tags()
        .iter()
        .zip(&sol.duals)
        .filter(|(tag, _)| **tag == RowTag::Copy)
        .map(|(_, &d)| d)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NonBasic {
    Lower,
    Upper,
    Free,
    Basic,
}

struct Step {
    ratio: f64,
    // basis position of the leaving variable, None for a bound flip
    leaving: Option<usize>,
    leaving_at_upper: bool,
}

struct Simplex<'a> {
    lp: &'a LinearProgram,
    m: usize,
    n: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    state: Vec<NonBasic>,
    basis: Vec<usize>,
    factor: BasisFactor,
    bland: bool,
    stalled: usize,
    iterations: usize,
    // factorization and basic values were rebuilt since the last pivot
    fresh: bool,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LinearProgram, col_lower: &[f64], col_upper: &[f64]) -> Self {
        let m = lp.num_rows();
        let n = lp.num_cols();
        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        lower.extend_from_slice(col_lower);
        upper.extend_from_slice(col_upper);
        for (i, sense) in lp.senses().iter().enumerate() {
            let b = lp.rhs()[i];
            let (lo, hi) = match sense {
                Sense::Ge => (b, f64::INFINITY),
                Sense::Le => (f64::NEG_INFINITY, b),
                Sense::Eq => (b, b),
            };
            lower.push(lo);
            upper.push(hi);
        }
        let mut cost = lp.objective().to_vec();
        cost.resize(n + m, 0.0);
        let mut x = vec![0.0; n + m];
        let mut state = vec![NonBasic::Basic; n + m];
        for j in 0..n {
            let (s, v) = resting_place(lower[j], upper[j]);
            state[j] = s;
            x[j] = v;
        }
        let basis: Vec<usize> = (n..n + m).collect();
        let identity: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut col = vec![0.0; m];
                col[i] = -1.0;
                col
            })
            .collect();
        let factor = BasisFactor::factor(&identity).expect("logical basis is nonsingular");
        let mut simplex = Self {
            lp,
            m,
            n,
            lower,
            upper,
            cost,
            x,
            state,
            basis,
            factor,
            bland: false,
            stalled: 0,
            iterations: 0,
            fresh: true,
        };
        simplex.recompute_basics();
        simplex
    }

    fn dense_column(&self, j: usize) -> Vec<f64> {
        let mut col = vec![0.0; self.m];
        if j < self.n {
            for &(i, a) in self.lp.column(j) {
                col[i] = a;
            }
        } else {
            col[j - self.n] = -1.0;
        }
        col
    }

    fn column_dot(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            self.lp.column(j).iter().map(|&(i, a)| a * y[i]).sum()
        } else {
            -y[j - self.n]
        }
    }

    fn recompute_basics(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            if self.state[j] == NonBasic::Basic || self.x[j] == 0.0 {
                continue;
            }
            let v = self.x[j];
            if j < self.n {
                for &(i, a) in self.lp.column(j) {
                    rhs[i] -= a * v;
                }
            } else {
                rhs[j - self.n] += v;
            }
        }
        self.factor.ftran(&mut rhs);
        for (k, &j) in self.basis.iter().enumerate() {
            self.x[j] = rhs[k];
        }
    }

    /// Fresh LU of the current basis. Singular columns are swapped for
    /// logicals of uncovered rows.
    fn refactor(&mut self) -> Result<()> {
        for _ in 0..=self.m {
            let cols: Vec<Vec<f64>> = self.basis.iter().map(|&j| self.dense_column(j)).collect();
            match BasisFactor::factor(&cols) {
                Ok(f) => {
                    self.factor = f;
                    self.recompute_basics();
                    self.fresh = true;
                    return Ok(());
                }
                Err(singular) => {
                    for (&pos, &row) in singular.positions.iter().zip(&singular.rows) {
                        let out = self.basis[pos];
                        let (s, v) = resting_place_near(self.lower[out], self.upper[out], self.x[out]);
                        self.state[out] = s;
                        self.x[out] = v;
                        let logical = self.n + row;
                        self.state[logical] = NonBasic::Basic;
                        self.basis[pos] = logical;
                    }
                }
            }
        }
        Err(Error::SolverFailure("basis repair did not converge".into()))
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lower[j] - PRIMAL_TOL {
            v - self.lower[j]
        } else if v > self.upper[j] + PRIMAL_TOL {
            v - self.upper[j]
        } else {
            0.0
        }
    }

    fn run(mut self) -> Result<LpSolution> {
        let max_iterations = 20_000usize.max(50 * (self.m + self.n));
        let mut recoveries = 0usize;
        loop {
            if self.iterations > max_iterations {
                return Err(Error::SolverFailure(format!("iteration limit {max_iterations} exceeded")));
            }
            if self.factor.eta_count() >= REFACTOR_EVERY {
                self.refactor()?;
            }
            // phase selection
            let mut phase_one = false;
            let mut cb = vec![0.0; self.m];
            for (k, &j) in self.basis.iter().enumerate() {
                let inf = self.infeasibility(j);
                if inf != 0.0 {
                    phase_one = true;
                    cb[k] = if inf < 0.0 { -1.0 } else { 1.0 };
                }
            }
            if !phase_one {
                for (k, &j) in self.basis.iter().enumerate() {
                    cb[k] = self.cost[j];
                }
            }
            let mut y = cb;
            self.factor.btran(&mut y);

            let Some((q, dq)) = self.price(&y, phase_one) else {
                // no improving column; only trust that on a fresh factorization
                if !self.fresh {
                    self.refactor()?;
                    continue;
                }
                if phase_one {
                    return Ok(LpSolution::without_point(LpStatus::Infeasible, self.iterations));
                }
                if let Some(sol) = self.finish() {
                    return Ok(sol);
                }
                recoveries += 1;
                if recoveries > MAX_RECOVERIES {
                    return Err(Error::SolverFailure("primal residual persists after refactorization".into()));
                }
                self.refactor()?;
                continue;
            };

            let dir = if dq < 0.0 { 1.0 } else { -1.0 };
            let mut alpha = self.dense_column(q);
            self.factor.ftran(&mut alpha);
            let Some(step) = self.ratio_test(q, dir, &alpha, phase_one) else {
                if phase_one || !self.fresh {
                    // the phase-1 objective is bounded below, so this is drift
                    recoveries += 1;
                    if recoveries > MAX_RECOVERIES {
                        return Err(Error::SolverFailure("unbounded phase-1 ray".into()));
                    }
                    self.refactor()?;
                    continue;
                }
                return Ok(LpSolution::without_point(LpStatus::Unbounded, self.iterations));
            };
            self.iterations += 1;
            self.fresh = false;

            if step.ratio * dq.abs() <= 1e-12 {
                self.stalled += 1;
                if !self.bland && self.stalled > 2 * (self.m + self.n) {
                    self.bland = true;
                }
            } else {
                self.stalled = 0;
            }

            let theta = step.ratio;
            if theta != 0.0 {
                for (k, &j) in self.basis.iter().enumerate() {
                    if alpha[k] != 0.0 {
                        self.x[j] -= dir * theta * alpha[k];
                    }
                }
                self.x[q] += dir * theta;
            }
            match step.leaving {
                None => {
                    // bound flip
                    if dir > 0.0 {
                        self.x[q] = self.upper[q];
                        self.state[q] = NonBasic::Upper;
                    } else {
                        self.x[q] = self.lower[q];
                        self.state[q] = NonBasic::Lower;
                    }
                }
                Some(r) => {
                    let out = self.basis[r];
                    if step.leaving_at_upper {
                        self.x[out] = self.upper[out];
                        self.state[out] = NonBasic::Upper;
                    } else {
                        self.x[out] = self.lower[out];
                        self.state[out] = NonBasic::Lower;
                    }
                    self.basis[r] = q;
                    self.state[q] = NonBasic::Basic;
                    self.factor.push_eta(r, &alpha);
                }
            }
        }
    }

    fn reduced_cost(&self, j: usize, y: &[f64], phase_one: bool) -> f64 {
        let c = if phase_one { 0.0 } else { self.cost[j] };
        c - self.column_dot(j, y)
    }

    /// Entering column and its reduced cost.
    fn price(&self, y: &[f64], phase_one: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.n + self.m {
            let eligible_dir = match self.state[j] {
                NonBasic::Basic => continue,
                NonBasic::Lower if self.upper[j] > self.lower[j] => 1,
                NonBasic::Upper if self.upper[j] > self.lower[j] => -1,
                NonBasic::Free => 0,
                _ => continue,
            };
            let d = self.reduced_cost(j, y, phase_one);
            let ok = match eligible_dir {
                1 => d < -DUAL_TOL,
                -1 => d > DUAL_TOL,
                _ => d.abs() > DUAL_TOL,
            };
            if !ok {
                continue;
            }
            if self.bland {
                return Some((j, d));
            }
            if d.abs() > best_score {
                best_score = d.abs();
                best = Some((j, d));
            }
        }
        best
    }

    /// Harris two-pass ratio test (plain minimum ratio under Bland's rule).
    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64], phase_one: bool) -> Option<Step> {
        // (position, delta per unit step, distance to blocking bound, leaves at upper)
        let mut candidates: Vec<(usize, f64, f64, bool)> = Vec::new();
        for (k, &j) in self.basis.iter().enumerate() {
            let delta = -dir * alpha[k];
            if delta.abs() <= PIVOT_TOL {
                continue;
            }
            let v = self.x[j];
            let (lo, hi) = (self.lower[j], self.upper[j]);
            let below = v < lo - PRIMAL_TOL;
            let above = v > hi + PRIMAL_TOL;
            if phase_one && below {
                if delta > 0.0 {
                    candidates.push((k, delta, lo - v, false));
                }
                continue;
            }
            if phase_one && above {
                if delta < 0.0 {
                    candidates.push((k, delta, v - hi, true));
                }
                continue;
            }
            if delta < 0.0 && lo.is_finite() {
                candidates.push((k, delta, (v - lo).max(0.0), false));
            } else if delta > 0.0 && hi.is_finite() {
                candidates.push((k, delta, (hi - v).max(0.0), true));
            }
        }
        let flip = self.upper[q] - self.lower[q];

        let chosen = if self.bland {
            let mut best: Option<(f64, usize, usize)> = None;
            for &(k, delta, dist, _) in &candidates {
                let ratio = dist / delta.abs();
                let var = self.basis[k];
                best = match best {
                    None => Some((ratio, var, k)),
                    Some((r, v, _)) if ratio < r - 1e-12 || (ratio <= r + 1e-12 && var < v) => Some((ratio, var, k)),
                    keep => keep,
                };
            }
            best.map(|(_, _, k)| k)
        } else {
            let bound = candidates
                .iter()
                .map(|&(_, delta, dist, _)| (dist + PRIMAL_TOL) / delta.abs())
                .fold(f64::INFINITY, f64::min);
            let mut pick: Option<(usize, f64)> = None;
            for &(k, delta, dist, _) in &candidates {
                if dist / delta.abs() <= bound && pick.map_or(true, |(_, a)| delta.abs() > a) {
                    pick = Some((k, delta.abs()));
                }
            }
            pick.map(|(k, _)| k)
        };

        match chosen {
            None if flip.is_finite() => Some(Step { ratio: flip, leaving: None, leaving_at_upper: false }),
            None => None,
            Some(k) => {
                let &(_, delta, dist, at_upper) = candidates.iter().find(|c| c.0 == k).unwrap();
                let ratio = dist / delta.abs();
                if flip.is_finite() && flip <= ratio {
                    Some(Step { ratio: flip, leaving: None, leaving_at_upper: false })
                } else {
                    Some(Step { ratio, leaving: Some(k), leaving_at_upper: at_upper })
                }
            }
        }
    }

    fn finish(&self) -> Option<LpSolution> {
        let primal: Vec<f64> = self.x[..self.n].to_vec();
        if self.lp_violation(&primal) > FEASIBILITY_TOL {
            return None;
        }
        let mut duals: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        self.factor.btran(&mut duals);
        let reduced_costs = (0..self.n).map(|j| self.cost[j] - self.column_dot(j, &duals)).collect();
        let objective = self.lp.objective_value(&primal);
        Some(LpSolution { status: LpStatus::Optimal, objective, primal, duals, reduced_costs, iterations: self.iterations })
    }

    fn lp_violation(&self, primal: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, act) in self.lp.row_activity(primal).into_iter().enumerate() {
            let j = self.n + i;
            worst = worst.max(self.lower[j] - act).max(act - self.upper[j]);
        }
        for j in 0..self.n {
            worst = worst.max(self.lower[j] - primal[j]).max(primal[j] - self.upper[j]);
        }
        worst
    }
}

fn resting_place(lower: f64, upper: f64) -> (NonBasic, f64) {
    if lower.is_finite() {
        (NonBasic::Lower, lower)
    } else if upper.is_finite() {
        (NonBasic::Upper, upper)
    } else {
        (NonBasic::Free, 0.0)
    }
}

fn resting_place_near(lower: f64, upper: f64, value: f64) -> (NonBasic, f64) {
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) => {
            if (value - lower).abs() <= (upper - value).abs() {
                (NonBasic::Lower, lower)
            } else {
                (NonBasic::Upper, upper)
            }
        }
        _ => resting_place(lower, upper),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_optimum() {
        let mut lp = LinearProgram::new();
        lp.add_column(-1.0, 0.0, 1.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.objective, -1.0);
        assert_eq!(sol.primal, vec![1.0]);
    }

    #[test]
    fn empty_feasible_set() {
        let mut lp = LinearProgram::new();
        let x = lp.add_column(1.0, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_row(&[(x, 1.0)], Sense::Ge, 1.0, RowTag::Structural);
        lp.add_row(&[(x, 1.0)], Sense::Le, 0.0, RowTag::Structural);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LinearProgram::new();
        let x = lp.add_column(-1.0, 0.0, f64::INFINITY);
        let y = lp.add_column(0.0, 0.0, f64::INFINITY);
        lp.add_row(&[(x, 1.0), (y, -1.0)], Sense::Le, 1.0, RowTag::Structural);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    // min 4y  s.t.  y + 0.25 z1 + 0.5 z2 >= 2.6,  z = (0, 0),  0 <= y <= 4
    fn example_relaxation(z: [f64; 2]) -> LinearProgram {
        let mut lp = LinearProgram::new();
        let z1 = lp.add_column(0.0, 0.0, 1.0);
        let z2 = lp.add_column(0.0, 0.0, 1.0);
        let y = lp.add_column(4.0, 0.0, 4.0);
        lp.add_row(&[(z1, 1.0)], Sense::Eq, z[0], RowTag::Copy);
        lp.add_row(&[(z2, 1.0)], Sense::Eq, z[1], RowTag::Copy);
        lp.add_row(&[(y, 1.0), (z1, 0.25), (z2, 0.5)], Sense::Ge, 2.6, RowTag::Structural);
        lp
    }

    #[test]
    fn example_relaxation_value_and_copy_duals() {
        let lp = example_relaxation([0.0, 0.0]);
        let sol = solve_lp(&lp).unwrap();
        assert!((sol.objective - 10.4).abs() < 1e-9);
        let duals = extract_copy_duals(&sol, &lp).unwrap();
        assert!((duals[0] + 1.0).abs() < 1e-9);
        assert!((duals[1] + 2.0).abs() < 1e-9);
    }

    #[test]
    fn copy_duals_match_finite_differences() {
        let base = solve_lp(&example_relaxation([0.3, 0.4])).unwrap();
        let duals = extract_copy_duals(&base, &example_relaxation([0.3, 0.4])).unwrap();
        let eps = 1e-4;
        for r in 0..2 {
            let mut z = [0.3, 0.4];
            z[r] += eps;
            let bumped = solve_lp(&example_relaxation(z)).unwrap();
            let fd = (bumped.objective - base.objective) / eps;
            assert!((fd - duals[r]).abs() < 1e-6, "component {r}: {fd} vs {}", duals[r]);
        }
    }

    #[test]
    fn insensitive_copy_rows_have_zero_duals() {
        let mut lp = LinearProgram::new();
        let z = lp.add_column(0.0, 0.0, 1.0);
        let y = lp.add_column(1.0, 0.0, 10.0);
        lp.add_row(&[(z, 1.0)], Sense::Eq, 1.0, RowTag::Copy);
        lp.add_row(&[(y, 1.0)], Sense::Ge, 2.0, RowTag::Structural);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(extract_copy_duals(&sol, &lp).unwrap(), vec![0.0]);
    }

    #[test]
    fn copy_duals_need_an_optimal_solution() {
        let lp = example_relaxation([0.0, 0.0]);
        let sol = LpSolution::without_point(LpStatus::Infeasible, 0);
        assert!(matches!(extract_copy_duals(&sol, &lp), Err(Error::Contract(_))));
    }

    #[test]
    fn free_variables_and_equalities() {
        // min x + y  s.t. x - y = 1, x + y >= 3, x, y free
        let mut lp = LinearProgram::new();
        let x = lp.add_column(1.0, f64::NEG_INFINITY, f64::INFINITY);
        let y = lp.add_column(1.0, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_row(&[(x, 1.0), (y, -1.0)], Sense::Eq, 1.0, RowTag::Structural);
        lp.add_row(&[(x, 1.0), (y, 1.0)], Sense::Ge, 3.0, RowTag::Structural);
        let sol = solve_lp(&lp).unwrap();
        assert!((sol.objective - 3.0).abs() < 1e-9);
        assert!((sol.primal[0] - 2.0).abs() < 1e-9);
        assert!((sol.primal[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_nan_coefficients() {
        let mut lp = LinearProgram::new();
        let x = lp.add_column(1.0, 0.0, 1.0);
        lp.add_row(&[(x, f64::NAN)], Sense::Ge, 0.0, RowTag::Structural);
        assert!(matches!(solve_lp(&lp), Err(Error::Model(_))));
    }
}
