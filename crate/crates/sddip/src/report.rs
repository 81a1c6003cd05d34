//! Result CSV: one row per iteration, then a summary block.
//!
//! ```text
//! i,LB,UB,cuts_benders,cuts_tight,elapsed_s
//! 1,2604.43,2849,2,0,0.61
//! ...
//! status,LB,UB,gap_pct,tight_prop,iterations,total_s,ub_kind
//! converged,2713.91,2771.5,2.08,0.167,14,25.0,exhaustive
//! ```
//!
//! `UB` in the iteration rows is the statistical bound for SDDiP and the
//! policy's expected cost for Nested Benders. The summary `UB` is the right
//! end of the final policy's confidence interval (`ub_kind` `sampled`), its
//! exact expectation (`exhaustive`), the best full-tree bound
//! (`deterministic`) or the extensive-form incumbent (`incumbent`).

use std::io::Write;

use sddip_core::mip::{MipSolution, MipStatus};
use sddip_core::nested::NestedResult;
use sddip_core::sddip::{GapEstimate, SddipResult, Termination};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    TimeLimit,
    IterationLimit,
    NodeLimit,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::TimeLimit => "time_limit",
            Status::IterationLimit => "iteration_limit",
            Status::NodeLimit => "node_limit",
        }
    }

    /// 0 for a clean finish, 2 for any limit.
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Converged => 0,
            _ => 2,
        }
    }
}

impl From<Termination> for Status {
    fn from(t: Termination) -> Self {
        match t {
            Termination::Converged => Status::Converged,
            Termination::TimeLimit => Status::TimeLimit,
            Termination::IterationLimit => Status::IterationLimit,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRow {
    pub i: usize,
    pub lb: f64,
    pub ub: f64,
    pub cuts_benders: usize,
    pub cuts_tight: usize,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub status: Status,
    pub lb: f64,
    pub ub: f64,
    pub gap_pct: f64,
    pub tight_prop: f64,
    pub iterations: usize,
    pub total_s: f64,
    pub ub_kind: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<IterationRow>,
    pub summary: Summary,
}

impl Report {
    pub fn from_sddip(res: &SddipResult, gap: &GapEstimate, total_s: f64) -> Self {
        let rows = res
            .records
            .iter()
            .map(|r| {
                let c = r.totals();
                IterationRow { i: r.iteration, lb: r.lb, ub: r.ub, cuts_benders: c.benders, cuts_tight: c.tight(), elapsed_s: r.elapsed }
            })
            .collect();
        Report {
            rows,
            summary: Summary {
                status: res.termination.into(),
                lb: res.lower_bound(),
                ub: gap.right_end,
                gap_pct: gap.gap_pct,
                tight_prop: res.tight_proportion(),
                iterations: res.records.len(),
                total_s,
                ub_kind: if gap.exhaustive { "exhaustive" } else { "sampled" },
            },
        }
    }

    pub fn from_nested(res: &NestedResult, total_s: f64) -> Self {
        let mut benders = 0;
        let mut tight = 0;
        let rows = res
            .records
            .iter()
            .map(|r| {
                let c = sddip_core::sddip::total_counts(&r.cuts);
                benders += c.benders;
                tight += c.tight();
                IterationRow { i: r.iteration, lb: r.lb, ub: r.ub, cuts_benders: c.benders, cuts_tight: c.tight(), elapsed_s: r.elapsed }
            })
            .collect();
        let total = benders + tight;
        Report {
            rows,
            summary: Summary {
                status: res.termination.into(),
                lb: res.lower_bound(),
                ub: res.upper_bound(),
                gap_pct: 100.0 * res.gap(),
                tight_prop: if total == 0 { 0.0 } else { tight as f64 / total as f64 },
                iterations: res.records.len(),
                total_s,
                ub_kind: "deterministic",
            },
        }
    }

    pub fn from_extform(sol: &MipSolution, total_s: f64) -> Self {
        let status = match sol.status {
            MipStatus::HitLimit => Status::NodeLimit,
            _ => Status::Converged,
        };
        let gap = if sol.objective.is_finite() {
            100.0 * (sol.objective - sol.bound) / sol.objective.abs().max(1e-9)
        } else {
            f64::INFINITY
        };
        Report {
            rows: Vec::new(),
            summary: Summary {
                status,
                lb: sol.bound,
                ub: sol.objective,
                gap_pct: gap,
                tight_prop: 0.0,
                iterations: 0,
                total_s,
                ub_kind: "incumbent",
            },
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        w.write_record(["i", "LB", "UB", "cuts_benders", "cuts_tight", "elapsed_s"])?;
        for r in &self.rows {
            w.write_record([
                r.i.to_string(),
                r.lb.to_string(),
                r.ub.to_string(),
                r.cuts_benders.to_string(),
                r.cuts_tight.to_string(),
                r.elapsed_s.to_string(),
            ])?;
        }
        w.write_record(["status", "LB", "UB", "gap_pct", "tight_prop", "iterations", "total_s", "ub_kind"])?;
        let s = &self.summary;
        w.write_record([
            s.status.as_str().to_string(),
            s.lb.to_string(),
            s.ub.to_string(),
            s.gap_pct.to_string(),
            s.tight_prop.to_string(),
            s.iterations.to_string(),
            s.total_s.to_string(),
            s.ub_kind.to_string(),
        ])?;
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}
