//! One solver run from a loaded model to a [`Report`].

use std::time::Instant;

use sddip_core::clock::{Clock, FrozenClock};
use sddip_core::cuts::LagrangianConfig;
use sddip_core::extform::{solve_extensive_form, DEFAULT_NODE_CAP};
use sddip_core::mip::MipLimits;
use sddip_core::model::{binarize_state, MsipModel};
use sddip_core::nested::{run_nested_benders, NestedConfig};
use sddip_core::sddip::{estimate_gap, run, BackwardMode, CutFamily, SddipConfig};

use crate::report::Report;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Sddip,
    Nested,
    Extform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveSpec {
    pub algo: Algo,
    pub cut: CutFamily,
    pub backward: BackwardMode,
    pub m: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub delta: f64,
    pub seed: u64,
    pub time_limit: f64,
    pub iteration_limit: usize,
    pub gap_threshold: f64,
    /// Replace integer states by their binary expansion before solving.
    pub binarize: bool,
    /// Wall-clock timing. Off means a frozen clock: time limits never
    /// trigger and every time column is 0, so output is reproducible.
    pub timing: bool,
    pub node_limit: usize,
    pub node_cap: usize,
    pub eval_fraction: f64,
    pub lagrangian: LagrangianConfig,
}

impl Default for SolveSpec {
    fn default() -> Self {
        let s = SddipConfig::default();
        Self {
            algo: Algo::Sddip,
            cut: s.cut_family,
            backward: s.backward,
            m: s.m,
            alpha: s.alpha,
            gamma: s.gamma,
            delta: s.delta,
            seed: s.seed,
            time_limit: f64::INFINITY,
            iteration_limit: s.iteration_limit,
            gap_threshold: NestedConfig::default().gap_threshold,
            binarize: false,
            timing: true,
            node_limit: MipLimits::default().node_limit,
            node_cap: DEFAULT_NODE_CAP,
            eval_fraction: s.eval_fraction,
            lagrangian: s.lagrangian,
        }
    }
}

impl SolveSpec {
    pub fn sddip_config(&self) -> SddipConfig {
        SddipConfig {
            m: self.m,
            alpha: self.alpha,
            gamma: self.gamma,
            delta: self.delta,
            cut_family: self.cut,
            backward: self.backward,
            seed: self.seed,
            iteration_limit: self.iteration_limit,
            time_limit: self.time_limit,
            lagrangian: self.lagrangian,
            eval_fraction: self.eval_fraction,
            mip_limits: MipLimits { node_limit: self.node_limit },
            ..SddipConfig::default()
        }
    }

    pub fn nested_config(&self) -> NestedConfig {
        NestedConfig {
            cut_family: self.cut,
            backward: self.backward,
            gap_threshold: self.gap_threshold,
            time_limit: self.time_limit,
            iteration_limit: self.iteration_limit,
            mip_limits: MipLimits { node_limit: self.node_limit },
            lagrangian: self.lagrangian,
            ..NestedConfig::default()
        }
    }
}

struct WallClock(Instant);

impl Clock for WallClock {
    fn elapsed(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

pub fn solve(model: &MsipModel, spec: &SolveSpec) -> sddip_core::Result<Report> {
    let wall = WallClock(Instant::now());
    let clock: &dyn Clock = if spec.timing { &wall } else { &FrozenClock };
    let binarized;
    let model = if spec.binarize {
        binarized = binarize_state(model)?;
        &binarized
    } else {
        model
    };
    match spec.algo {
        Algo::Sddip => {
            let cfg = spec.sddip_config();
            let res = run(model, &cfg, clock)?;
            let gap = estimate_gap(model, &res.pools, res.lower_bound(), &cfg)?;
            Ok(Report::from_sddip(&res, &gap, clock.elapsed()))
        }
        Algo::Nested => {
            let res = run_nested_benders(model, &spec.nested_config(), clock)?;
            Ok(Report::from_nested(&res, clock.elapsed()))
        }
        Algo::Extform => {
            let sol = solve_extensive_form(model, spec.node_cap, &MipLimits { node_limit: spec.node_limit })?;
            if !sol.has_incumbent() {
                return Err(sddip_core::Error::SolverFailure("extensive form has no feasible solution".into()));
            }
            Ok(Report::from_extform(&sol, clock.elapsed()))
        }
    }
}
