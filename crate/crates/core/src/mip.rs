//! Mixed-integer solves by best-bound branch-and-bound over the simplex.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::simplex::{solve_lp, solve_lp_with_bounds, LinearProgram, LpSolution, LpStatus};

/// Distance from the nearest integer below which a value counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Relative gap at which a node is pruned against the incumbent.
pub const MIP_GAP_TOL: f64 = 1e-6;

/// An LP plus integrality marks.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpInstance {
    pub lp: LinearProgram,
    pub integer: Vec<bool>,
}

impl MilpInstance {
    pub fn new(lp: LinearProgram, integer: Vec<bool>) -> Self {
        Self { lp, integer }
    }

    /// An instance without integer variables.
    pub fn continuous(lp: LinearProgram) -> Self {
        let n = lp.num_cols();
        Self { lp, integer: alloc::vec![false; n] }
    }

    pub fn validate(&self) -> Result<()> {
        self.lp.validate()?;
        if self.integer.len() != self.lp.num_cols() {
            return Err(Error::Model(format!(
                "{} integrality marks for {} columns",
                self.integer.len(),
                self.lp.num_cols()
            )));
        }
        for (j, &int) in self.integer.iter().enumerate() {
            if int && !(self.lp.col_lower()[j].is_finite() && self.lp.col_upper()[j].is_finite()) {
                return Err(Error::Model(format!("integer column {j} is unbounded")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MipStatus {
    Optimal,
    Infeasible,
    HitLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MipSolution {
    pub status: MipStatus,
    /// Incumbent value; `+inf` when there is none.
    pub objective: f64,
    /// Incumbent point; empty when there is none.
    pub primal: Vec<f64>,
    /// Proven lower bound on the optimum.
    pub bound: f64,
    /// Nodes solved after the root.
    pub node_count: usize,
}

impl MipSolution {
    pub fn has_incumbent(&self) -> bool {
        !self.primal.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MipLimits {
    pub node_limit: usize,
}

impl Default for MipLimits {
    fn default() -> Self {
        Self { node_limit: 200_000 }
    }
}

struct Node {
    bound: f64,
    depth: usize,
    id: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: the "greatest" node is the one with the
    // smallest bound, then the deepest, then the oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

fn gap_tol(value: f64) -> f64 {
    MIP_GAP_TOL * (1.0 + value.abs())
}

/// Most fractional integer column; ties go to the lowest index.
fn branching_column(inst: &MilpInstance, x: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &int) in inst.integer.iter().enumerate() {
        if !int {
            continue;
        }
        let frac = x[j] - libm::floor(x[j]);
        let dist = frac.min(1.0 - frac);
        if dist <= INTEGRALITY_TOL {
            continue;
        }
        if best.map_or(true, |(_, d)| dist > d) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

/// Snaps integer columns onto integers.
fn snap(inst: &MilpInstance, x: &mut [f64]) {
    for (j, &int) in inst.integer.iter().enumerate() {
        if int {
            x[j] = libm::round(x[j]);
        }
    }
}

/// Best-bound branch-and-bound on the most fractional variable.
pub fn solve_milp(inst: &MilpInstance, limits: &MipLimits) -> Result<MipSolution> {
    inst.validate()?;
    let lp = &inst.lp;
    let root = solve_lp(lp)?;
    match root.status {
        LpStatus::Infeasible => {
            return Ok(MipSolution {
                status: MipStatus::Infeasible,
                objective: f64::INFINITY,
                primal: Vec::new(),
                bound: f64::INFINITY,
                node_count: 0,
            })
        }
        LpStatus::Unbounded => return Err(Error::SolverFailure("LP relaxation is unbounded".into())),
        LpStatus::Optimal => {}
    }

    let mut incumbent_value = f64::INFINITY;
    let mut incumbent: Vec<f64> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut next_id = 0usize;
    let mut node_count = 0usize;

    // (node bounds, relaxation) pairs waiting to be branched on
    let mut process = |lower: Vec<f64>,
                       upper: Vec<f64>,
                       sol: LpSolution,
                       depth: usize,
                       heap: &mut BinaryHeap<Node>,
                       incumbent_value: &mut f64,
                       incumbent: &mut Vec<f64>| {
        if sol.status != LpStatus::Optimal {
            return;
        }
        if sol.objective >= *incumbent_value - gap_tol(*incumbent_value) {
            return;
        }
        match branching_column(inst, &sol.primal) {
            None => {
                let mut x = sol.primal;
                snap(inst, &mut x);
                *incumbent_value = lp.objective_value(&x);
                *incumbent = x;
            }
            Some(j) => {
                let v = sol.primal[j];
                let mut down_upper = upper.clone();
                down_upper[j] = libm::floor(v);
                let mut up_lower = lower.clone();
                up_lower[j] = libm::ceil(v);
                heap.push(Node { bound: sol.objective, depth: depth + 1, id: next_id, lower: lower.clone(), upper: down_upper });
                heap.push(Node { bound: sol.objective, depth: depth + 1, id: next_id + 1, lower: up_lower, upper });
                next_id += 2;
            }
        }
    };

    process(
        lp.col_lower().to_vec(),
        lp.col_upper().to_vec(),
        root,
        0,
        &mut heap,
        &mut incumbent_value,
        &mut incumbent,
    );

    while let Some(node) = heap.pop() {
        if node.bound >= incumbent_value - gap_tol(incumbent_value) {
            // every remaining node is at least as bad
            heap.clear();
            break;
        }
        if node_count >= limits.node_limit {
            let bound = node.bound.min(incumbent_value);
            return Ok(MipSolution {
                status: MipStatus::HitLimit,
                objective: incumbent_value,
                primal: incumbent,
                bound,
                node_count,
            });
        }
        node_count += 1;
        let sol = solve_lp_with_bounds(lp, &node.lower, &node.upper)?;
        if sol.status == LpStatus::Unbounded {
            return Err(Error::SolverFailure("node relaxation is unbounded".into()));
        }
        process(node.lower, node.upper, sol, node.depth, &mut heap, &mut incumbent_value, &mut incumbent);
    }

    if incumbent.is_empty() {
        return Ok(MipSolution {
            status: MipStatus::Infeasible,
            objective: f64::INFINITY,
            primal: Vec::new(),
            bound: f64::INFINITY,
            node_count,
        });
    }
    Ok(MipSolution { status: MipStatus::Optimal, objective: incumbent_value, primal: incumbent, bound: incumbent_value, node_count })
}

/// Solves the instance with integrality marks dropped.
pub fn solve_lp_relaxation(inst: &MilpInstance) -> Result<LpSolution> {
    inst.validate()?;
    solve_lp(&inst.lp)
}
