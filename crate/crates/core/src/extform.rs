//! The extensive form: every node of the scenario tree as one block of a
//! single MILP.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::mip::{solve_milp, MilpInstance, MipLimits, MipSolution};
use crate::model::MsipModel;
use crate::simplex::{LinearProgram, RowTag};

/// Default cap on the number of tree nodes.
pub const DEFAULT_NODE_CAP: usize = 5_000;

/// One tree node and its columns.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub stage: usize,
    /// Realization indices from the root down to this node.
    pub path: Vec<usize>,
    pub parent: Option<usize>,
    pub probability: f64,
    pub x: Range<usize>,
    pub y: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtensiveForm {
    pub milp: MilpInstance,
    /// Nodes in depth-first order; node 0 is the root.
    pub nodes: Vec<TreeNode>,
}

/// Number of nodes in the scenario tree, saturating.
pub fn tree_size(model: &MsipModel) -> usize {
    let mut level = 1usize;
    let mut total = 0usize;
    for reals in &model.realizations {
        level = level.saturating_mul(reals.len());
        total = total.saturating_add(level);
    }
    total
}

/// Flattens the scenario tree. Fails if it has more than `cap` nodes.
pub fn build_extensive_form(model: &MsipModel, cap: usize) -> Result<ExtensiveForm> {
    model.check()?;
    let size = tree_size(model);
    if size > cap {
        return Err(Error::Config(format!("scenario tree has {size} nodes, more than the cap of {cap}")));
    }
    let mut lp = LinearProgram::new();
    let mut integer = Vec::new();
    let mut nodes: Vec<TreeNode> = Vec::with_capacity(size);
    // (stage, parent, path, probability)
    let mut stack = vec![(0usize, None::<usize>, vec![0usize], model.probability(0, 0))];
    while let Some((t, parent, path, prob)) = stack.pop() {
        let tpl = &model.templates[t];
        let j = *path.last().unwrap();
        let data = model.stage_data(t, j);
        let x0 = lp.num_cols();
        for (i, kind) in tpl.state.iter().enumerate() {
            let (lo, hi) = kind.bounds();
            lp.add_column(prob * data.c_x[i], lo, hi);
            integer.push(kind.is_integer());
        }
        let y0 = lp.num_cols();
        for (i, kind) in tpl.locals.iter().enumerate() {
            let (lo, hi) = kind.bounds();
            lp.add_column(prob * data.c_y[i], lo, hi);
            integer.push(kind.is_integer());
        }
        let y1 = lp.num_cols();

        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); tpl.num_rows()];
        let mut rhs = data.rhs.clone();
        for e in &tpl.b.entries {
            match parent {
                Some(p) => rows[e.row].push((nodes[p].x.start + e.col, e.value)),
                None => rhs[e.row] -= e.value * model.x0[e.col],
            }
        }
        for e in &tpl.a.entries {
            rows[e.row].push((x0 + e.col, e.value));
        }
        for e in &tpl.c.entries {
            rows[e.row].push((y0 + e.col, e.value));
        }
        for (i, coeffs) in rows.iter().enumerate() {
            lp.add_row(coeffs, tpl.senses[i], rhs[i], RowTag::Structural);
        }

        let id = nodes.len();
        nodes.push(TreeNode { stage: t, path: path.clone(), parent, probability: prob, x: x0..y0, y: y0..y1 });
        if t + 1 < model.num_stages() {
            for k in (0..model.num_realizations(t + 1)).rev() {
                let mut child = path.clone();
                child.push(k);
                stack.push((t + 1, Some(id), child, prob * model.probability(t + 1, k)));
            }
        }
    }
    Ok(ExtensiveForm { milp: MilpInstance::new(lp, integer), nodes })
}

/// Builds and solves the extensive form.
pub fn solve_extensive_form(model: &MsipModel, cap: usize, limits: &MipLimits) -> Result<MipSolution> {
    let ef = build_extensive_form(model, cap)?;
    solve_milp(&ef.milp, limits)
}
