//! Stochastic dual dynamic integer programming.
//!
//! Each iteration samples `M` scenario paths, simulates the current policy
//! along them (forward pass), forms a statistical upper bound from the path
//! costs, adds one cut per distinct incumbent state and stage (backward pass)
//! and re-solves the first stage for a lower bound.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::clock::Clock;
use crate::cuts::{initial_pools, CutGenerator, CutKind, CutPool, LagrangianConfig, SolveCounts};
use crate::error::{Error, Result};
use crate::mip::{solve_milp, MipLimits, MipStatus};
use crate::model::{for_each_path, instantiate_subproblem, sample_paths_with, MsipModel, ScenarioPath, VarKind};
use crate::stats::{mean, normal_quantile, sample_variance};

/// Relative margin in the test that decides between a Benders cut and an
/// exact cut in the alternating backward step.
pub const ALTERNATING_EPS: f64 = 1e-6;
/// Scenario count above which the gap estimate samples instead of
/// enumerating.
pub const EXHAUSTIVE_PATHS: u64 = 200;
/// Cap on the scenario count used to size the gap-estimate sample.
pub const GAP_PATH_CAP: u64 = 10_000;

/// Family of the exact (tight) cuts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CutFamily {
    IntegerL,
    Lagrangian,
}

impl CutFamily {
    pub fn kind(self) -> CutKind {
        match self {
            CutFamily::IntegerL => CutKind::IntegerL,
            CutFamily::Lagrangian => CutKind::Lagrangian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BackwardMode {
    /// A tight cut at every incumbent.
    Default,
    /// A Benders cut whenever it already cuts off the incumbent, else a
    /// tight cut.
    Alternating,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SddipConfig {
    /// Sampled paths per iteration.
    pub m: usize,
    pub alpha: f64,
    pub gamma: f64,
    /// Pseudo-gap of the stopping test.
    pub delta: f64,
    pub cut_family: CutFamily,
    pub backward: BackwardMode,
    pub seed: u64,
    pub iteration_limit: usize,
    /// Seconds; checked between iterations.
    pub time_limit: f64,
    pub lagrangian: LagrangianConfig,
    /// Share of the scenario paths replayed by [`estimate_gap`].
    pub eval_fraction: f64,
    pub mip_limits: MipLimits,
    pub eps: f64,
}

impl Default for SddipConfig {
    fn default() -> Self {
        Self {
            m: 2,
            alpha: 0.1,
            gamma: 0.1,
            delta: 0.01,
            cut_family: CutFamily::IntegerL,
            backward: BackwardMode::Alternating,
            seed: 0,
            iteration_limit: 100_000,
            time_limit: f64::INFINITY,
            lagrangian: LagrangianConfig::default(),
            eval_fraction: 0.05,
            mip_limits: MipLimits::default(),
            eps: ALTERNATING_EPS,
        }
    }
}

impl SddipConfig {
    pub fn validate(&self) -> Result<()> {
        let open = |v: f64| v > 0.0 && v < 1.0;
        if self.m < 2 {
            return Err(Error::Config(format!("M must be at least 2, got {}", self.m)));
        }
        if !open(self.alpha) || !open(self.gamma) {
            return Err(Error::Config("alpha and gamma must lie in (0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::Config("delta must lie in [0, 1]".into()));
        }
        if !(self.eval_fraction > 0.0 && self.eval_fraction <= 1.0) {
            return Err(Error::Config("eval_fraction must lie in (0, 1]".into()));
        }
        if self.time_limit.is_nan() || self.time_limit < 0.0 {
            return Err(Error::Config("time limit must be non-negative".into()));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::Config("eps must be non-negative".into()));
        }
        Ok(())
    }
}

/// Cuts added to one stage's pool, by kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CutCounts {
    pub benders: usize,
    pub strengthened: usize,
    pub integer_l: usize,
    pub lagrangian: usize,
    /// Lagrangian cuts whose ascent stopped short of the tolerance.
    pub unconverged: usize,
}

impl CutCounts {
    pub fn record(&mut self, kind: CutKind) {
        match kind {
            CutKind::Benders => self.benders += 1,
            CutKind::Strengthened => self.strengthened += 1,
            CutKind::IntegerL => self.integer_l += 1,
            CutKind::Lagrangian => self.lagrangian += 1,
        }
    }

    pub fn tight(&self) -> usize {
        self.integer_l + self.lagrangian
    }

    pub fn total(&self) -> usize {
        self.benders + self.strengthened + self.integer_l + self.lagrangian
    }
}

impl core::ops::AddAssign for CutCounts {
    fn add_assign(&mut self, o: Self) {
        self.benders += o.benders;
        self.strengthened += o.strengthened;
        self.integer_l += o.integer_l;
        self.lagrangian += o.lagrangian;
        self.unconverged += o.unconverged;
    }
}

/// Sum over stages.
pub fn total_counts(per_stage: &[CutCounts]) -> CutCounts {
    let mut c = CutCounts::default();
    for s in per_stage {
        c += *s;
    }
    c
}

/// Telemetry of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    pub lb: f64,
    pub ub: f64,
    pub mean: f64,
    pub std_dev: f64,
    /// Forward cost of every sampled path.
    pub costs: Vec<f64>,
    /// Cuts added this iteration, per stage whose pool received them.
    pub cuts: Vec<CutCounts>,
    /// Seconds since the start of the run.
    pub elapsed: f64,
    /// Whether `M` meets the sample size the stopping test needs for power
    /// `1 - gamma`.
    pub power_ok: bool,
}

impl IterationRecord {
    pub fn totals(&self) -> CutCounts {
        total_counts(&self.cuts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    Converged,
    IterationLimit,
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SddipResult {
    pub pools: Vec<CutPool>,
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    /// Backward-pass subproblem solves.
    pub solves: SolveCounts,
}

impl SddipResult {
    pub fn lower_bound(&self) -> f64 {
        self.records.last().map_or(f64::NEG_INFINITY, |r| r.lb)
    }

    pub fn upper_bound(&self) -> f64 {
        self.records.last().map_or(f64::INFINITY, |r| r.ub)
    }

    pub fn cut_totals(&self) -> CutCounts {
        let mut c = CutCounts::default();
        for r in &self.records {
            c += r.totals();
        }
        c
    }

    /// Share of tight cuts among all cuts added; zero when there are none.
    pub fn tight_proportion(&self) -> f64 {
        let c = self.cut_totals();
        if c.total() == 0 {
            0.0
        } else {
            c.tight() as f64 / c.total() as f64
        }
    }
}

/// Policy simulation along one path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Outgoing state of every stage.
    pub states: Vec<Vec<f64>>,
    /// Pool value at the outgoing state of every stage but the last.
    pub thetas: Vec<f64>,
    /// Sum of stage costs, excluding `theta`.
    pub cost: f64,
}

/// Solves stage `t` and returns its outgoing state and stage cost.
fn policy_step(
    model: &MsipModel,
    pools: &[CutPool],
    t: usize,
    j: usize,
    x_in: &[f64],
    limits: &MipLimits,
) -> Result<(Vec<f64>, f64)> {
    let sp = instantiate_subproblem(model, t, j, x_in, pools.get(t))?;
    let sol = solve_milp(&sp.milp, limits)?;
    match sol.status {
        MipStatus::Infeasible => return Err(Error::RecourseViolation { stage: t, realization: j }),
        MipStatus::HitLimit if !sol.has_incumbent() => {
            return Err(Error::SolverFailure(format!("stage {t}: node limit reached without a feasible point")))
        }
        _ => {}
    }
    Ok((sp.state(&sol.primal), sp.stage_cost(&sol.primal)))
}

/// Simulates the policy defined by `pools` along each path.
pub fn forward_pass(
    model: &MsipModel,
    pools: &[CutPool],
    paths: &[ScenarioPath],
    limits: &MipLimits,
) -> Result<Vec<Trajectory>> {
    paths
        .iter()
        .map(|path| {
            let mut x = model.x0.clone();
            let mut tr = Trajectory { states: Vec::new(), thetas: Vec::new(), cost: 0.0 };
            for (t, &j) in path.indices.iter().enumerate() {
                let (next, cost) = policy_step(model, pools, t, j, &x, limits)?;
                tr.cost += cost;
                if let Some(pool) = pools.get(t) {
                    tr.thetas.push(pool.evaluate(&next));
                }
                tr.states.push(next.clone());
                x = next;
            }
            Ok(tr)
        })
        .collect()
}

/// `mean + z_{1 - alpha/2} sd / sqrt(M)` over the path costs.
pub fn statistical_upper_bound(costs: &[f64], alpha: f64) -> Result<f64> {
    if costs.len() < 2 {
        return Err(Error::Config("an upper bound needs at least 2 path costs".into()));
    }
    let sd = libm::sqrt(sample_variance(costs));
    Ok(mean(costs) + normal_quantile(1.0 - alpha / 2.0) * sd / libm::sqrt(costs.len() as f64))
}

fn normalizer(lb: f64) -> f64 {
    lb.abs().max(1e-9)
}

/// Stop iff the one-sided `1 - alpha` upper confidence limit of the policy
/// cost is within `delta` of the lower bound.
pub fn stopping_test(lb: f64, mean: f64, std_dev: f64, m: usize, config: &SddipConfig) -> bool {
    let upper = mean + normal_quantile(1.0 - config.alpha) * std_dev / libm::sqrt(m as f64);
    upper - lb <= config.delta * normalizer(lb)
}

/// Whether `m` samples give the stopping test power `1 - gamma` against a
/// gap of `delta`.
pub fn power_condition(lb: f64, std_dev: f64, m: usize, config: &SddipConfig) -> bool {
    if std_dev == 0.0 {
        return true;
    }
    let z = normal_quantile(1.0 - config.alpha) + normal_quantile(1.0 - config.gamma);
    let denom = config.delta * lb.max(1e-9);
    if denom <= 0.0 {
        return false;
    }
    let need = z * std_dev / denom;
    m as f64 >= need * need
}

/// Objective of the first stage with the cuts of `pools`. A solve stopped by
/// the node limit reports its proven bound.
pub fn lower_bound(model: &MsipModel, pools: &[CutPool], limits: &MipLimits) -> Result<f64> {
    let sp = instantiate_subproblem(model, 0, 0, &model.x0, pools.first())?;
    let sol = solve_milp(&sp.milp, limits)?;
    match sol.status {
        MipStatus::Optimal => Ok(sol.objective),
        MipStatus::HitLimit => Ok(sol.bound),
        MipStatus::Infeasible => Err(Error::RecourseViolation { stage: 0, realization: 0 }),
    }
}

/// Distinct incumbents entering each stage `t >= 1`, in order of first
/// appearance; entry `t - 1` of the result belongs to stage `t`.
fn distinct_incumbents(t_count: usize, trajectories: &[Trajectory]) -> Vec<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<Vec<f64>>> = vec![Vec::new(); t_count.saturating_sub(1)];
    for tr in trajectories {
        for t in 1..t_count {
            let x = &tr.states[t - 1];
            if !out[t - 1].contains(x) {
                out[t - 1].push(x.clone());
            }
        }
    }
    out
}

fn check_family(model: &MsipModel, family: CutFamily) -> Result<()> {
    if family == CutFamily::IntegerL {
        let last = model.num_stages().saturating_sub(1);
        if model.templates[..last].iter().any(|tpl| tpl.state.iter().any(|k| *k != VarKind::Binary)) {
            return Err(Error::Config("integer L-shaped cuts need binary state; binarize the model first".into()));
        }
    }
    Ok(())
}

fn tight_cut(
    model: &MsipModel,
    pools: &mut [CutPool],
    t: usize,
    x_hat: &[f64],
    family: CutFamily,
    gen: &mut CutGenerator,
    relaxed: Option<Vec<crate::cuts::LpPart>>,
    counts: &mut CutCounts,
) -> Result<()> {
    let cut = match family {
        CutFamily::IntegerL => {
            let values = gen.exact_values(model, t, x_hat, pools)?;
            gen.integer_lshaped_from(model, t, x_hat, &values)?
        }
        CutFamily::Lagrangian => {
            let relaxed = match relaxed {
                Some(r) => r,
                None => gen.relaxation_parts(model, t, x_hat, pools)?,
            };
            let values = gen.exact_values(model, t, x_hat, pools)?;
            let lc = gen.lagrangian_from(model, t, x_hat, pools, &relaxed, &values)?;
            if !lc.tight {
                counts.unconverged += 1;
            }
            lc.cut
        }
    };
    let kind = cut.kind;
    if pools[t - 1].insert(cut) {
        counts.record(kind);
    }
    Ok(())
}

/// Backward sweep over explicit incumbents: `incumbents[t - 1]` holds the
/// states entering stage `t`. Pools are updated in place, so stage `t - 1`
/// cuts see every cut added to stage `t` earlier in the sweep.
pub fn backward_sweep(
    model: &MsipModel,
    pools: &mut [CutPool],
    incumbents: &[Vec<Vec<f64>>],
    family: CutFamily,
    mode: BackwardMode,
    eps: f64,
    gen: &mut CutGenerator,
) -> Result<Vec<CutCounts>> {
    check_family(model, family)?;
    let t_count = model.num_stages();
    let mut counts = vec![CutCounts::default(); pools.len()];
    for t in (1..t_count).rev() {
        for x_hat in &incumbents[t - 1] {
            match mode {
                BackwardMode::Default => {
                    tight_cut(model, pools, t, x_hat, family, gen, None, &mut counts[t - 1])?;
                }
                BackwardMode::Alternating => {
                    let relaxed = gen.relaxation_parts(model, t, x_hat, pools)?;
                    let expected: f64 =
                        relaxed.iter().enumerate().map(|(j, p)| model.probability(t, j) * p.value).sum();
                    let theta = pools[t - 1].evaluate(x_hat);
                    if theta < expected - eps * (1.0 + expected.abs()) {
                        let cut = gen.benders_from(model, t, x_hat, &relaxed)?;
                        if pools[t - 1].insert(cut) {
                            counts[t - 1].record(CutKind::Benders);
                        }
                    } else {
                        tight_cut(model, pools, t, x_hat, family, gen, Some(relaxed), &mut counts[t - 1])?;
                    }
                }
            }
        }
    }
    Ok(counts)
}

/// One tight cut of `family` per distinct incumbent and stage.
pub fn backward_pass_default(
    model: &MsipModel,
    pools: &mut [CutPool],
    trajectories: &[Trajectory],
    family: CutFamily,
    gen: &mut CutGenerator,
) -> Result<Vec<CutCounts>> {
    let inc = distinct_incumbents(model.num_stages(), trajectories);
    backward_sweep(model, pools, &inc, family, BackwardMode::Default, 0.0, gen)
}

/// A Benders cut where the relaxation already lifts `theta` above its
/// current value at the incumbent, a tight cut of `family` elsewhere.
pub fn backward_pass_alternating(
    model: &MsipModel,
    pools: &mut [CutPool],
    trajectories: &[Trajectory],
    family: CutFamily,
    eps: f64,
    gen: &mut CutGenerator,
) -> Result<Vec<CutCounts>> {
    let inc = distinct_incumbents(model.num_stages(), trajectories);
    backward_sweep(model, pools, &inc, family, BackwardMode::Alternating, eps, gen)
}

/// Runs the algorithm until the stopping test passes or a limit is hit.
pub fn run(model: &MsipModel, config: &SddipConfig, clock: &dyn Clock) -> Result<SddipResult> {
    model.check()?;
    config.validate()?;
    check_family(model, config.cut_family)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pools = initial_pools(model);
    let mut gen = CutGenerator::new(config.mip_limits, config.lagrangian);
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut lb = f64::NEG_INFINITY;

    let termination = loop {
        if records.len() >= config.iteration_limit {
            break Termination::IterationLimit;
        }
        let i = records.len() + 1;
        gen.iteration = i;
        let paths = sample_paths_with(model, config.m, &mut rng)?;
        let trajectories = forward_pass(model, &pools, &paths, &config.mip_limits)?;
        let costs: Vec<f64> = trajectories.iter().map(|tr| tr.cost).collect();
        let mu = mean(&costs);
        let sd = libm::sqrt(sample_variance(&costs));
        let ub = statistical_upper_bound(&costs, config.alpha)?;

        let cuts = match config.backward {
            BackwardMode::Default => backward_pass_default(model, &mut pools, &trajectories, config.cut_family, &mut gen)?,
            BackwardMode::Alternating => {
                backward_pass_alternating(model, &mut pools, &trajectories, config.cut_family, config.eps, &mut gen)?
            }
        };
        // both are valid bounds; keep the better one so that solver
        // tolerances never show up as a decrease
        lb = lb.max(lower_bound(model, &pools, &config.mip_limits)?);
        let stop = stopping_test(lb, mu, sd, config.m, config);
        records.push(IterationRecord {
            iteration: i,
            lb,
            ub,
            mean: mu,
            std_dev: sd,
            costs,
            cuts,
            elapsed: clock.elapsed(),
            power_ok: power_condition(lb, sd, config.m, config),
        });
        if stop {
            break Termination::Converged;
        }
        if clock.elapsed() >= config.time_limit {
            break Termination::TimeLimit;
        }
    };
    Ok(SddipResult { pools, records, termination, solves: gen.counts })
}

/// Confidence interval on the cost of the final policy and the resulting
/// optimality gap.
#[derive(Debug, Clone, PartialEq)]
pub struct GapEstimate {
    /// `100 (right_end - LB) / right_end`.
    pub gap_pct: f64,
    pub mean: f64,
    pub std_dev: f64,
    pub right_end: f64,
    pub paths: usize,
    /// Every path was evaluated with its probability.
    pub exhaustive: bool,
}

/// Replays the policy of `pools` on fresh paths. With at most
/// [`EXHAUSTIVE_PATHS`] scenarios all of them are evaluated and the interval
/// has zero width.
pub fn estimate_gap(model: &MsipModel, pools: &[CutPool], lb: f64, config: &SddipConfig) -> Result<GapEstimate> {
    let n = model.num_scenarios();
    let (mu, sd, right, count, exhaustive) = if n <= EXHAUSTIVE_PATHS {
        let mut paths = Vec::new();
        let mut probs = Vec::new();
        for_each_path(model, |p, q| {
            paths.push(p.clone());
            probs.push(q);
        });
        let trs = forward_pass(model, pools, &paths, &config.mip_limits)?;
        let mu: f64 = trs.iter().zip(&probs).map(|(tr, q)| q * tr.cost).sum();
        let var: f64 = trs.iter().zip(&probs).map(|(tr, q)| q * (tr.cost - mu) * (tr.cost - mu)).sum();
        (mu, libm::sqrt(var), mu, paths.len(), true)
    } else {
        let capped = n.min(GAP_PATH_CAP) as f64;
        let m = (libm::ceil(config.eval_fraction * capped) as usize).max(2);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_9a9e_57ea_7e00);
        let paths = sample_paths_with(model, m, &mut rng)?;
        let trs = forward_pass(model, pools, &paths, &config.mip_limits)?;
        let costs: Vec<f64> = trs.iter().map(|tr| tr.cost).collect();
        let mu = mean(&costs);
        let sd = libm::sqrt(sample_variance(&costs));
        (mu, sd, statistical_upper_bound(&costs, config.alpha)?, m, false)
    };
    Ok(GapEstimate {
        gap_pct: 100.0 * (right - lb) / right.abs().max(1e-9),
        mean: mu,
        std_dev: sd,
        right_end: right,
        paths: count,
        exhaustive,
    })
}
