//! Cut families for the expected cost-to-go, their aggregation over
//! realizations and the per-stage cut pool.
//!
//! A cut generated from the subproblems of stage `t` bounds `theta_{t-1}`:
//! `theta_{t-1} >= intercept + gradient . x_{t-1}`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mip::{solve_milp, MipLimits, MipSolution, MipStatus};
use crate::model::{instantiate_lagrangian, instantiate_subproblem, MsipModel};
use crate::simplex::{extract_copy_duals, solve_lp, LpStatus};

/// Two cuts whose coefficients all differ by at most this are the same cut.
pub const DUPLICATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CutKind {
    Benders,
    Strengthened,
    IntegerL,
    Lagrangian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    /// Stage whose `theta` the cut bounds.
    pub stage: usize,
    pub intercept: f64,
    pub gradient: Vec<f64>,
    pub kind: CutKind,
    pub iteration: usize,
}

impl Cut {
    pub fn value_at(&self, x: &[f64]) -> f64 {
        self.intercept + self.gradient.iter().zip(x).map(|(g, v)| g * v).sum::<f64>()
    }

    fn same_as(&self, other: &Cut) -> bool {
        (self.intercept - other.intercept).abs() <= DUPLICATE_TOL
            && self.gradient.len() == other.gradient.len()
            && self.gradient.iter().zip(&other.gradient).all(|(a, b)| (a - b).abs() <= DUPLICATE_TOL)
    }
}

/// The outer approximation `max(L, max_cuts v + pi x)` of one stage's
/// expected cost-to-go.
#[derive(Debug, Clone, PartialEq)]
pub struct CutPool {
    pub stage: usize,
    pub lower_bound: f64,
    pub cuts: Vec<Cut>,
}

impl CutPool {
    pub fn new(stage: usize, lower_bound: f64) -> Self {
        Self { stage, lower_bound, cuts: Vec::new() }
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.cuts.iter().map(|c| c.value_at(x)).fold(self.lower_bound, f64::max)
    }

    /// Adds `cut` unless an equal one is already present. Returns whether it
    /// was added.
    pub fn insert(&mut self, cut: Cut) -> bool {
        if self.cuts.iter().any(|c| c.same_as(&cut)) {
            return false;
        }
        self.cuts.push(cut);
        true
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }
}

/// Empty pools for every stage that has a `theta`, floored at the stage
/// lower bounds.
pub fn initial_pools(model: &MsipModel) -> Vec<CutPool> {
    let t_count = model.num_stages();
    (0..t_count.saturating_sub(1)).map(|t| CutPool::new(t, model.templates[t].lower_bound)).collect()
}

/// Free function form of [`CutPool::evaluate`].
pub fn evaluate_pool(pool: &CutPool, x: &[f64]) -> f64 {
    pool.evaluate(x)
}

/// One realization's share of an aggregated cut.
#[derive(Debug, Clone, PartialEq)]
pub struct CutPart {
    pub probability: f64,
    pub intercept: f64,
    pub gradient: Vec<f64>,
}

/// Probability-weighted sum of cut parts.
pub fn aggregate_cuts(parts: &[CutPart], stage: usize, kind: CutKind, iteration: usize) -> Result<Cut> {
    let total: f64 = parts.iter().map(|p| p.probability).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Contract(format!("cut part probabilities sum to {total}")));
    }
    let dim = parts.first().map_or(0, |p| p.gradient.len());
    if parts.iter().any(|p| p.gradient.len() != dim) {
        return Err(Error::Contract("cut parts have different dimensions".into()));
    }
    let mut gradient = vec![0.0; dim];
    let mut intercept = 0.0;
    for p in parts {
        intercept += p.probability * p.intercept;
        for (g, v) in gradient.iter_mut().zip(&p.gradient) {
            *g += p.probability * v;
        }
    }
    Ok(Cut { stage, intercept, gradient, kind, iteration })
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Dot product evaluated as if in twice the working precision.
pub fn dot2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let p = x * y;
        let pe = libm::fma(x, y, -p);
        let (t, e) = two_sum(s, p);
        s = t;
        c += e + pe;
    }
    s + c
}

fn is_binary(x: &[f64]) -> bool {
    x.iter().all(|&v| v == 0.0 || v == 1.0)
}

/// Lagrangian multipliers that are optimal for a binary incumbent:
/// `Q_hat - L` on components at one and `L - Q_hat` on components at zero.
pub fn intl_multipliers(q_hat: f64, lower: f64, x_hat: &[f64]) -> Result<Vec<f64>> {
    if !is_binary(x_hat) {
        return Err(Error::Contract("integer L-shaped multipliers need a binary incumbent".into()));
    }
    let d = q_hat - lower;
    Ok(x_hat.iter().map(|&v| if v == 1.0 { d } else { -d }).collect())
}

/// Integer L-shaped cut for expected value `q_hat` at binary `x_hat` and
/// lower bound `lower`: `theta >= q_hat - (q_hat - L) |S| + pi x` where `S`
/// holds the components at one.
pub fn integer_lshaped_coefficients(q_hat: f64, lower: f64, x_hat: &[f64]) -> Result<(f64, Vec<f64>)> {
    let gradient = intl_multipliers(q_hat, lower, x_hat)?;
    let ones = x_hat.iter().filter(|&&v| v == 1.0).count() as f64;
    Ok((q_hat - (q_hat - lower) * ones, gradient))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagrangianConfig {
    pub max_iters: usize,
    /// Relative gap `(Q_hat - g) / (1 + |Q_hat|)` at which ascent stops.
    pub tol: f64,
    /// Initial Polyak step factor.
    pub step: f64,
    /// Non-improving steps tolerated before the step factor is halved.
    pub patience: usize,
}

impl Default for LagrangianConfig {
    fn default() -> Self {
        Self { max_iters: 100, tol: 1e-4, step: 1.0, patience: 5 }
    }
}

/// Numbers of subproblem solves, by type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveCounts {
    pub lp: usize,
    pub milp: usize,
    pub lagrangian: usize,
}

impl core::ops::AddAssign for SolveCounts {
    fn add_assign(&mut self, o: Self) {
        self.lp += o.lp;
        self.milp += o.milp;
        self.lagrangian += o.lagrangian;
    }
}

/// LP relaxation value and copy duals for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct LpPart {
    pub value: f64,
    pub duals: Vec<f64>,
}

/// Lagrangian function value and a minimizing copy vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianValue {
    pub value: f64,
    /// `None` when the node limit stopped the solve before any incumbent.
    pub z: Option<Vec<f64>>,
}

/// Result of subgradient ascent for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct AscentResult {
    pub pi: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// A generated Lagrangian cut and whether every realization reached the
/// tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianCut {
    pub cut: Cut,
    pub tight: bool,
}

/// Solves stage subproblems and turns them into cuts. Counts its solves.
#[derive(Debug, Clone, Default)]
pub struct CutGenerator {
    pub limits: MipLimits,
    pub lagrangian: LagrangianConfig,
    pub counts: SolveCounts,
    /// Stamped on generated cuts.
    pub iteration: usize,
}

fn check_cut_stage(model: &MsipModel, t: usize) -> Result<()> {
    if t == 0 || t >= model.num_stages() {
        return Err(Error::Model(format!("cuts come from stages 1..{}, got {t}", model.num_stages())));
    }
    Ok(())
}

/// Value usable as a lower bound of the MILP optimum.
fn milp_lower_value(sol: &MipSolution) -> f64 {
    match sol.status {
        MipStatus::Optimal => sol.objective,
        _ => sol.bound,
    }
}

impl CutGenerator {
    pub fn new(limits: MipLimits, lagrangian: LagrangianConfig) -> Self {
        Self { limits, lagrangian, counts: SolveCounts::default(), iteration: 0 }
    }

    /// LP relaxation of stage `t`, realization `j`, at `x_hat`.
    pub fn relaxation(
        &mut self,
        model: &MsipModel,
        t: usize,
        j: usize,
        x_hat: &[f64],
        pools: &[crate::cuts::CutPool],
    ) -> Result<LpPart> {
        let sp = instantiate_subproblem(model, t, j, x_hat, pools.get(t))?;
        self.counts.lp += 1;
        let sol = solve_lp(&sp.milp.lp)?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(Error::RecourseViolation { stage: t, realization: j }),
            LpStatus::Unbounded => {
                return Err(Error::SolverFailure(format!("stage {t} relaxation is unbounded")))
            }
        }
        Ok(LpPart { value: sol.objective, duals: extract_copy_duals(&sol, &sp.milp.lp)? })
    }

    /// Exact value of stage `t`, realization `j`, at `x_hat`. A solve cut
    /// short by the node limit reports its proven bound.
    pub fn exact(&mut self, model: &MsipModel, t: usize, j: usize, x_hat: &[f64], pools: &[CutPool]) -> Result<f64> {
        let sp = instantiate_subproblem(model, t, j, x_hat, pools.get(t))?;
        self.counts.milp += 1;
        let sol = solve_milp(&sp.milp, &self.limits)?;
        if sol.status == MipStatus::Infeasible {
            return Err(Error::RecourseViolation { stage: t, realization: j });
        }
        Ok(milp_lower_value(&sol))
    }

    /// Lagrangian function `min f(x, y) + theta - pi z` with the copy rows
    /// relaxed.
    pub fn evaluate_lagrangian(
        &mut self,
        model: &MsipModel,
        t: usize,
        j: usize,
        pi: &[f64],
        pools: &[CutPool],
    ) -> Result<LagrangianValue> {
        let sp = instantiate_lagrangian(model, t, j, pi, pools.get(t))?;
        self.counts.lagrangian += 1;
        let sol = solve_milp(&sp.milp, &self.limits)?;
        if sol.status == MipStatus::Infeasible {
            return Err(Error::RecourseViolation { stage: t, realization: j });
        }
        let z = sol.has_incumbent().then(|| sp.copy(&sol.primal).iter().map(|v| libm::round(*v)).collect());
        Ok(LagrangianValue { value: milp_lower_value(&sol), z })
    }

    fn relaxations(&mut self, model: &MsipModel, t: usize, x_hat: &[f64], pools: &[CutPool]) -> Result<Vec<LpPart>> {
        check_cut_stage(model, t)?;
        (0..model.num_realizations(t)).map(|j| self.relaxation(model, t, j, x_hat, pools)).collect()
    }

    /// Exact values of every realization of stage `t`.
    pub fn exact_values(&mut self, model: &MsipModel, t: usize, x_hat: &[f64], pools: &[CutPool]) -> Result<Vec<f64>> {
        check_cut_stage(model, t)?;
        (0..model.num_realizations(t)).map(|j| self.exact(model, t, j, x_hat, pools)).collect()
    }

    /// LP relaxations of every realization of stage `t`.
    pub fn relaxation_parts(
        &mut self,
        model: &MsipModel,
        t: usize,
        x_hat: &[f64],
        pools: &[CutPool],
    ) -> Result<Vec<LpPart>> {
        self.relaxations(model, t, x_hat, pools)
    }

    /// Benders cut from already solved relaxations.
    pub fn benders_from(&self, model: &MsipModel, t: usize, x_hat: &[f64], parts: &[LpPart]) -> Result<Cut> {
        let cut_parts: Vec<CutPart> = parts
            .iter()
            .enumerate()
            .map(|(j, p)| CutPart {
                probability: model.probability(t, j),
                intercept: p.value - dot2(&p.duals, x_hat),
                gradient: p.duals.clone(),
            })
            .collect();
        aggregate_cuts(&cut_parts, t - 1, CutKind::Benders, self.iteration)
    }

    /// Cut from LP relaxation duals: `Q_LP - pi x_hat + pi x`.
    pub fn benders_cut(&mut self, model: &MsipModel, t: usize, x_hat: &[f64], pools: &[CutPool]) -> Result<Cut> {
        let parts = self.relaxations(model, t, x_hat, pools)?;
        self.benders_from(model, t, x_hat, &parts)
    }

    /// LP relaxation duals with the exact Lagrangian value as intercept.
    pub fn strengthened_benders_cut(
        &mut self,
        model: &MsipModel,
        t: usize,
        x_hat: &[f64],
        pools: &[CutPool],
    ) -> Result<Cut> {
        let parts = self.relaxations(model, t, x_hat, pools)?;
        let mut cut_parts = Vec::with_capacity(parts.len());
        for (j, p) in parts.into_iter().enumerate() {
            let lag = self.evaluate_lagrangian(model, t, j, &p.duals, pools)?;
            cut_parts.push(CutPart { probability: model.probability(t, j), intercept: lag.value, gradient: p.duals });
        }
        aggregate_cuts(&cut_parts, t - 1, CutKind::Strengthened, self.iteration)
    }

    /// Integer L-shaped cut from already computed exact values.
    pub fn integer_lshaped_from(&self, model: &MsipModel, t: usize, x_hat: &[f64], values: &[f64]) -> Result<Cut> {
        let expected: f64 = values.iter().enumerate().map(|(j, v)| model.probability(t, j) * v).sum();
        let lower = model.templates[t - 1].lower_bound;
        if expected < lower - 1e-6 * (1.0 + lower.abs()) {
            return Err(Error::Model(format!(
                "stage {} lower bound {lower} exceeds the expected cost-to-go {expected}",
                t - 1
            )));
        }
        let (intercept, gradient) = integer_lshaped_coefficients(expected.max(lower), lower, x_hat)?;
        Ok(Cut { stage: t - 1, intercept, gradient, kind: CutKind::IntegerL, iteration: self.iteration })
    }

    /// Exact-evaluation cut for a binary incumbent, tight at `x_hat`.
    pub fn integer_lshaped_cut(
        &mut self,
        model: &MsipModel,
        t: usize,
        x_hat: &[f64],
        pools: &[CutPool],
    ) -> Result<Cut> {
        if !is_binary(x_hat) {
            return Err(Error::Contract("integer L-shaped cuts need a binary incumbent".into()));
        }
        let values = self.exact_values(model, t, x_hat, pools)?;
        self.integer_lshaped_from(model, t, x_hat, &values)
    }

    /// Polyak subgradient ascent on `g(pi) = L(pi) + pi x_hat` from `start`
    /// towards `target`.
    pub fn ascend(
        &mut self,
        model: &MsipModel,
        t: usize,
        j: usize,
        x_hat: &[f64],
        pools: &[CutPool],
        start: &[f64],
        target: f64,
    ) -> Result<AscentResult> {
        let cfg = self.lagrangian;
        let close = |g: f64| target - g <= cfg.tol * (1.0 + target.abs());
        let mut pi = start.to_vec();
        let mut best: Option<AscentResult> = None;
        let mut eta = cfg.step;
        let mut stalled = 0;
        for k in 0..cfg.max_iters.max(1) {
            let lag = self.evaluate_lagrangian(model, t, j, &pi, pools)?;
            let g = lag.value + dot2(&pi, x_hat);
            let improved = best.as_ref().map_or(true, |b| g > b.value + dot2(&b.pi, x_hat));
            if improved {
                best = Some(AscentResult { pi: pi.clone(), value: lag.value, iterations: k, converged: close(g) });
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= cfg.patience {
                    eta *= 0.5;
                    stalled = 0;
                }
            }
            if close(g) {
                break;
            }
            let Some(z) = lag.z else { break };
            let s: Vec<f64> = x_hat.iter().zip(&z).map(|(a, b)| a - b).collect();
            let norm2: f64 = s.iter().map(|v| v * v).sum();
            if norm2 == 0.0 {
                break;
            }
            let step = eta * (target - g) / norm2;
            for (p, sv) in pi.iter_mut().zip(&s) {
                *p += step * sv;
            }
        }
        let mut out = best.expect("at least one evaluation");
        out.iterations += 1;
        Ok(out)
    }

    /// Lagrangian cut from already solved relaxations and exact values.
    pub fn lagrangian_from(
        &mut self,
        model: &MsipModel,
        t: usize,
        x_hat: &[f64],
        pools: &[CutPool],
        relaxed: &[LpPart],
        values: &[f64],
    ) -> Result<LagrangianCut> {
        let mut parts = Vec::with_capacity(relaxed.len());
        let mut tight = true;
        for (j, (p, &q_hat)) in relaxed.iter().zip(values).enumerate() {
            let res = self.ascend(model, t, j, x_hat, pools, &p.duals, q_hat)?;
            tight &= res.converged;
            parts.push(CutPart { probability: model.probability(t, j), intercept: res.value, gradient: res.pi });
        }
        let cut = aggregate_cuts(&parts, t - 1, CutKind::Lagrangian, self.iteration)?;
        Ok(LagrangianCut { cut, tight })
    }

    /// Cut from near-optimal Lagrangian multipliers, started at the LP
    /// duals.
    pub fn lagrangian_cut(
        &mut self,
        model: &MsipModel,
        t: usize,
        x_hat: &[f64],
        pools: &[CutPool],
    ) -> Result<LagrangianCut> {
        let relaxed = self.relaxations(model, t, x_hat, pools)?;
        let values = self.exact_values(model, t, x_hat, pools)?;
        self.lagrangian_from(model, t, x_hat, pools, &relaxed, &values)
    }
}
