//! Nested Benders: the forward/backward cutting-plane loop over the whole
//! scenario tree, with a deterministic upper bound.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::clock::Clock;
use crate::cuts::{initial_pools, CutGenerator, CutPool, LagrangianConfig, SolveCounts};
use crate::error::{Error, Result};
use crate::mip::{solve_milp, MipLimits, MipStatus};
use crate::model::{instantiate_subproblem, MsipModel};
use crate::sddip::{backward_sweep, lower_bound, BackwardMode, CutCounts, CutFamily, Termination, ALTERNATING_EPS};

#[derive(Debug, Clone, PartialEq)]
pub struct NestedConfig {
    pub cut_family: CutFamily,
    pub backward: BackwardMode,
    /// Relative gap `(UB - LB) / UB` at which the loop stops.
    pub gap_threshold: f64,
    pub time_limit: f64,
    pub iteration_limit: usize,
    /// Largest scenario count the tree walk accepts.
    pub path_cap: u64,
    pub mip_limits: MipLimits,
    pub lagrangian: LagrangianConfig,
    pub eps: f64,
}

impl Default for NestedConfig {
    fn default() -> Self {
        Self {
            cut_family: CutFamily::IntegerL,
            backward: BackwardMode::Alternating,
            gap_threshold: 0.01,
            time_limit: f64::INFINITY,
            iteration_limit: 100_000,
            path_cap: 5_000,
            mip_limits: MipLimits::default(),
            lagrangian: LagrangianConfig::default(),
            eps: ALTERNATING_EPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NestedRecord {
    /// 1-based.
    pub iteration: usize,
    pub lb: f64,
    /// Expected cost of this iteration's policy.
    pub ub: f64,
    /// Smallest `ub` so far.
    pub best_ub: f64,
    pub gap: f64,
    pub cuts: Vec<CutCounts>,
    pub elapsed: f64,
    /// Cumulative backward-pass solves.
    pub solves: SolveCounts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NestedResult {
    pub pools: Vec<CutPool>,
    pub records: Vec<NestedRecord>,
    pub termination: Termination,
    pub solves: SolveCounts,
}

impl NestedResult {
    pub fn lower_bound(&self) -> f64 {
        self.records.last().map_or(f64::NEG_INFINITY, |r| r.lb)
    }

    pub fn upper_bound(&self) -> f64 {
        self.records.last().map_or(f64::INFINITY, |r| r.best_ub)
    }

    pub fn gap(&self) -> f64 {
        self.records.last().map_or(f64::INFINITY, |r| r.gap)
    }
}

fn key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

/// Walks the whole tree under the policy of `pools`. Returns the expected
/// cost and the distinct states entering every stage `t >= 1`.
pub fn tree_forward(
    model: &MsipModel,
    pools: &[CutPool],
    limits: &MipLimits,
) -> Result<(f64, Vec<Vec<Vec<f64>>>)> {
    let t_count = model.num_stages();
    let mut memo: BTreeMap<(usize, usize, Vec<u64>), (Vec<f64>, f64)> = BTreeMap::new();
    let mut incumbents: Vec<Vec<Vec<f64>>> = vec![Vec::new(); t_count.saturating_sub(1)];
    let mut expected = 0.0;
    // (stage, realization, incoming state, path probability)
    let mut stack = vec![(0usize, 0usize, model.x0.clone(), 1.0f64)];
    while let Some((t, j, x_in, prob)) = stack.pop() {
        let k = (t, j, key(&x_in));
        let (x_out, cost) = match memo.get(&k) {
            Some(v) => v.clone(),
            None => {
                let sp = instantiate_subproblem(model, t, j, &x_in, pools.get(t))?;
                let sol = solve_milp(&sp.milp, limits)?;
                match sol.status {
                    MipStatus::Infeasible => return Err(Error::RecourseViolation { stage: t, realization: j }),
                    MipStatus::HitLimit if !sol.has_incumbent() => {
                        return Err(Error::SolverFailure(format!(
                            "stage {t}: node limit reached without a feasible point"
                        )))
                    }
                    _ => {}
                }
                let v = (sp.state(&sol.primal), sp.stage_cost(&sol.primal));
                memo.insert(k, v.clone());
                v
            }
        };
        let p = prob * model.probability(t, j);
        expected += p * cost;
        if t + 1 < t_count {
            if !incumbents[t].contains(&x_out) {
                incumbents[t].push(x_out.clone());
            }
            for jj in (0..model.num_realizations(t + 1)).rev() {
                stack.push((t + 1, jj, x_out.clone(), p));
            }
        }
    }
    Ok((expected, incumbents))
}

/// Runs Nested Benders until the deterministic gap closes or a limit is hit.
pub fn run_nested_benders(model: &MsipModel, config: &NestedConfig, clock: &dyn Clock) -> Result<NestedResult> {
    model.check()?;
    if !(config.gap_threshold > 0.0 && config.gap_threshold < 1.0) {
        return Err(Error::Config("gap threshold must lie in (0, 1)".into()));
    }
    let n = model.num_scenarios();
    if n > config.path_cap {
        return Err(Error::Config(format!("{n} scenario paths exceed the cap of {}", config.path_cap)));
    }
    let mut pools = initial_pools(model);
    let mut gen = CutGenerator::new(config.mip_limits, config.lagrangian);
    let mut records: Vec<NestedRecord> = Vec::new();
    let mut best_ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;

    let termination = loop {
        if records.len() >= config.iteration_limit {
            break Termination::IterationLimit;
        }
        let i = records.len() + 1;
        gen.iteration = i;
        let (ub, incumbents) = tree_forward(model, &pools, &config.mip_limits)?;
        best_ub = best_ub.min(ub);
        let cuts = backward_sweep(model, &mut pools, &incumbents, config.cut_family, config.backward, config.eps, &mut gen)?;
        lb = lb.max(lower_bound(model, &pools, &config.mip_limits)?);
        let gap = (best_ub - lb) / best_ub.abs().max(1e-9);
        records.push(NestedRecord {
            iteration: i,
            lb,
            ub,
            best_ub,
            gap,
            cuts,
            elapsed: clock.elapsed(),
            solves: gen.counts,
        });
        if gap <= config.gap_threshold {
            break Termination::Converged;
        }
        if clock.elapsed() >= config.time_limit {
            break Termination::TimeLimit;
        }
    };
    Ok(NestedResult { pools, records, termination, solves: gen.counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::FrozenClock;
    use crate::model::tests::toy_model;

    #[test]
    fn example_closes_the_gap() {
        for mode in [BackwardMode::Default, BackwardMode::Alternating] {
            let cfg = NestedConfig { backward: mode, gap_threshold: 1e-6, ..NestedConfig::default() };
            let res = run_nested_benders(&toy_model(), &cfg, &FrozenClock).unwrap();
            assert_eq!(res.termination, Termination::Converged);
            assert!((res.lower_bound() - 10.0).abs() < 1e-6);
            assert!((res.upper_bound() - 10.0).abs() < 1e-6);
        }
    }

    #[test]
    fn best_gap_never_grows() {
        let cfg = NestedConfig { gap_threshold: 1e-6, ..NestedConfig::default() };
        let res = run_nested_benders(&toy_model(), &cfg, &FrozenClock).unwrap();
        for w in res.records.windows(2) {
            assert!(w[1].gap <= w[0].gap + 1e-12);
        }
    }

    #[test]
    fn rejects_large_trees() {
        let cfg = NestedConfig { path_cap: 0, ..NestedConfig::default() };
        assert!(matches!(run_nested_benders(&toy_model(), &cfg, &FrozenClock), Err(Error::Config(_))));
    }
}
