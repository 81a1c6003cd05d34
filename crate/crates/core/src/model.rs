//! Multi-stage models under stage-wise independence and their stage
//! subproblems.
//!
//! Stage `t` (0-based) has the constraint system
//!
//! ```text
//! B_t z + A_t x_t + C_t y_t (sense) b_t,    z = x_{t-1}
//! ```
//!
//! with objective `c_x x_t + c_y y_t + theta_t`. The copy variable `z` is
//! pinned to the incoming state by tagged copy rows so that their duals can
//! be read back. The last stage has no `theta`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cuts::CutPool;
use crate::error::{Error, Result};
use crate::mip::MilpInstance;
use crate::simplex::{LinearProgram, RowTag, Sense};

/// Probability sums must be within this of one.
pub const PROBABILITY_TOL: f64 = 1e-12;

/// Domain of a single variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarKind {
    Binary,
    Integer { lo: f64, hi: f64 },
    Continuous { lo: f64, hi: f64 },
}

impl VarKind {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            VarKind::Binary => (0.0, 1.0),
            VarKind::Integer { lo, hi } | VarKind::Continuous { lo, hi } => (lo, hi),
        }
    }

    pub fn is_integer(&self) -> bool {
        !matches!(self, VarKind::Continuous { .. })
    }

    fn check(&self) -> Option<&'static str> {
        let (lo, hi) = self.bounds();
        if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Some("bounds must satisfy lo <= hi");
        }
        if let VarKind::Integer { lo, hi } = *self {
            if !lo.is_finite() || !hi.is_finite() {
                return Some("integer bounds must be finite");
            }
            if libm::trunc(lo) != lo || libm::trunc(hi) != hi {
                return Some("integer bounds must be integral");
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Coordinate-format matrix with declared dimensions. Repeated entries add up.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Triplet>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: Vec::new() }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        self.entries.push(Triplet { row, col, value });
    }

    fn check(&self, rows: usize, cols: usize) -> Option<String> {
        if self.rows != rows || self.cols != cols {
            return Some(format!(
                "declared {}x{} but the stage needs {}x{}",
                self.rows, self.cols, rows, cols
            ));
        }
        for e in &self.entries {
            if e.row >= rows || e.col >= cols {
                return Some(format!("entry ({}, {}) out of range", e.row, e.col));
            }
            if !e.value.is_finite() {
                return Some(format!("entry ({}, {}) is not finite", e.row, e.col));
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageTemplate {
    /// Kinds of the state components `x_t`.
    pub state: Vec<VarKind>,
    /// Kinds of the local components `y_t`.
    pub locals: Vec<VarKind>,
    pub c_x: Vec<f64>,
    pub c_y: Vec<f64>,
    /// Coefficients on the copy of the incoming state.
    pub b: SparseMatrix,
    pub a: SparseMatrix,
    pub c: SparseMatrix,
    pub rhs: Vec<f64>,
    pub senses: Vec<Sense>,
    /// Floor for `theta_t`, i.e. a lower bound on the expected cost-to-go
    /// from stage `t + 1` on.
    pub lower_bound: f64,
}

impl StageTemplate {
    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OverrideTarget {
    ObjectiveState,
    ObjectiveLocal,
    Rhs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Override {
    pub target: OverrideTarget,
    pub position: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub probability: f64,
    pub overrides: Vec<Override>,
}

impl Realization {
    /// The template itself, with probability one.
    pub fn certain() -> Self {
        Self { probability: 1.0, overrides: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsipModel {
    pub x0: Vec<f64>,
    pub templates: Vec<StageTemplate>,
    /// `realizations[t]` lists the outcomes of stage `t`.
    pub realizations: Vec<Vec<Realization>>,
}

/// Objective and rhs of one stage under one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct StageData {
    pub c_x: Vec<f64>,
    pub c_y: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl MsipModel {
    pub fn num_stages(&self) -> usize {
        self.templates.len()
    }

    /// Dimension of the state entering stage `t`.
    pub fn incoming_dim(&self, t: usize) -> usize {
        if t == 0 {
            self.x0.len()
        } else {
            self.templates[t - 1].state.len()
        }
    }

    pub fn num_realizations(&self, t: usize) -> usize {
        self.realizations[t].len()
    }

    pub fn probability(&self, t: usize, j: usize) -> f64 {
        self.realizations[t][j].probability
    }

    /// Number of scenario paths, saturating at `u64::MAX`.
    pub fn num_scenarios(&self) -> u64 {
        self.realizations.iter().fold(1u64, |n, r| n.saturating_mul(r.len() as u64))
    }

    /// Template data with the overrides of realization `j` applied.
    pub fn stage_data(&self, t: usize, j: usize) -> StageData {
        let tpl = &self.templates[t];
        let mut data = StageData { c_x: tpl.c_x.clone(), c_y: tpl.c_y.clone(), rhs: tpl.rhs.clone() };
        for o in &self.realizations[t][j].overrides {
            let slot = match o.target {
                OverrideTarget::ObjectiveState => &mut data.c_x,
                OverrideTarget::ObjectiveLocal => &mut data.c_y,
                OverrideTarget::Rhs => &mut data.rhs,
            };
            slot[o.position] = o.value;
        }
        data
    }

    /// `Ok` iff [`validate_model`] finds nothing.
    pub fn check(&self) -> Result<()> {
        let violations = validate_model(self);
        if violations.is_empty() {
            return Ok(());
        }
        let text: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        Err(Error::Model(text.join("; ")))
    }
}

/// A broken model invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// 0-based stage, or `None` for model-level fields.
    pub stage: Option<usize>,
    pub field: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.stage {
            Some(t) => write!(f, "stage {t}: {}: {}", self.field, self.rule),
            None => write!(f, "{}: {}", self.field, self.rule),
        }
    }
}

/// Lists every broken invariant of `model`.
pub fn validate_model(model: &MsipModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |stage: Option<usize>, field: &str, rule: String| {
        out.push(Violation { stage, field: field.to_string(), rule })
    };

    if model.templates.is_empty() {
        push(None, "templates", "at least one stage is required".into());
    }
    if model.realizations.len() != model.templates.len() {
        push(
            None,
            "realizations",
            format!("{} realization lists for {} stages", model.realizations.len(), model.templates.len()),
        );
    }
    if model.x0.iter().any(|v| !v.is_finite()) {
        push(None, "x0", "entries must be finite".into());
    }

    for (t, tpl) in model.templates.iter().enumerate() {
        let s = Some(t);
        let h_in = model.incoming_dim(t);
        let h = tpl.state.len();
        let n_loc = tpl.locals.len();
        let rows = tpl.rhs.len();
        for (name, kinds) in [("state", &tpl.state), ("locals", &tpl.locals)] {
            for (i, k) in kinds.iter().enumerate() {
                if let Some(rule) = k.check() {
                    push(s, name, format!("component {i}: {rule}"));
                }
            }
        }
        if tpl.c_x.len() != h {
            push(s, "c_x", format!("length {} but state dimension {h}", tpl.c_x.len()));
        }
        if tpl.c_y.len() != n_loc {
            push(s, "c_y", format!("length {} but {n_loc} locals", tpl.c_y.len()));
        }
        if tpl.c_x.iter().chain(&tpl.c_y).any(|c| !c.is_finite()) {
            push(s, "objective", "coefficients must be finite".into());
        }
        if tpl.senses.len() != rows {
            push(s, "sense", format!("{} senses for {rows} rows", tpl.senses.len()));
        }
        if tpl.rhs.iter().any(|b| !b.is_finite()) {
            push(s, "b", "entries must be finite".into());
        }
        for (name, m, cols) in [("B", &tpl.b, h_in), ("A", &tpl.a, h), ("C", &tpl.c, n_loc)] {
            if let Some(rule) = m.check(rows, cols) {
                push(s, name, rule);
            }
        }
        if !tpl.lower_bound.is_finite() {
            push(s, "L", "stage lower bound must be finite".into());
        }

        let Some(reals) = model.realizations.get(t) else { continue };
        if reals.is_empty() {
            push(s, "realizations", "at least one realization is required".into());
            continue;
        }
        if t == 0 && reals.len() != 1 {
            push(s, "realizations", format!("first stage has {} realizations, needs exactly 1", reals.len()));
        }
        let mut sum = 0.0;
        for (j, r) in reals.iter().enumerate() {
            if !(0.0..=1.0).contains(&r.probability) {
                push(s, "q", format!("realization {j}: probability {} outside [0, 1]", r.probability));
            }
            sum += r.probability;
            for o in &r.overrides {
                let len = match o.target {
                    OverrideTarget::ObjectiveState => h,
                    OverrideTarget::ObjectiveLocal => n_loc,
                    OverrideTarget::Rhs => rows,
                };
                if o.position >= len {
                    push(s, "overrides", format!("realization {j}: position {} out of range", o.position));
                }
                if !o.value.is_finite() {
                    push(s, "overrides", format!("realization {j}: value must be finite"));
                }
            }
        }
        if (sum - 1.0).abs() > PROBABILITY_TOL {
            push(s, "q", format!("probabilities sum {sum} != 1"));
        }
    }
    out
}

/// Where each block of a stage subproblem lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub z: Range<usize>,
    pub x: Range<usize>,
    pub y: Range<usize>,
    pub theta: Option<usize>,
    pub copy_rows: Range<usize>,
    pub structural_rows: Range<usize>,
    pub cut_rows: Range<usize>,
}

/// A materialized stage subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct Subproblem {
    pub milp: MilpInstance,
    pub layout: Layout,
    state_kinds: Vec<VarKind>,
}

impl Subproblem {
    /// Outgoing state read from `primal`, integer components rounded.
    pub fn state(&self, primal: &[f64]) -> Vec<f64> {
        primal[self.layout.x.clone()]
            .iter()
            .zip(&self.state_kinds)
            .map(|(&v, k)| if k.is_integer() { libm::round(v) } else { v })
            .collect()
    }

    pub fn copy(&self, primal: &[f64]) -> Vec<f64> {
        primal[self.layout.z.clone()].to_vec()
    }

    pub fn theta(&self, primal: &[f64]) -> Option<f64> {
        self.layout.theta.map(|i| primal[i])
    }

    /// `c_x x + c_y y` at `primal`.
    pub fn stage_cost(&self, primal: &[f64]) -> f64 {
        let c = self.milp.lp.objective();
        let l = &self.layout;
        l.x.clone().chain(l.y.clone()).map(|i| c[i] * primal[i]).sum()
    }
}

fn check_stage(model: &MsipModel, t: usize, j: usize) -> Result<()> {
    if t >= model.num_stages() {
        return Err(Error::Model(format!("stage {t} does not exist")));
    }
    if j >= model.num_realizations(t) {
        return Err(Error::Model(format!("stage {t} has no realization {j}")));
    }
    Ok(())
}

struct Builder {
    lp: LinearProgram,
    integer: Vec<bool>,
}

impl Builder {
    fn column(&mut self, cost: f64, kind: VarKind) -> usize {
        let (lo, hi) = kind.bounds();
        self.integer.push(kind.is_integer());
        self.lp.add_column(cost, lo, hi)
    }
}

/// Builds the stage subproblem. `copy` selects between copy rows pinned at
/// `x_hat` (ordinary subproblem) and a free copy variable in its own domain
/// with objective term `-pi z` (Lagrangian relaxation).
fn build(
    model: &MsipModel,
    t: usize,
    j: usize,
    copy: CopyMode<'_>,
    pool: Option<&CutPool>,
) -> Result<Subproblem> {
    check_stage(model, t, j)?;
    let tpl = &model.templates[t];
    let h_in = model.incoming_dim(t);
    let data = model.stage_data(t, j);
    let leaf = t + 1 == model.num_stages();
    if let Some(pool) = pool {
        if pool.cuts.iter().any(|c| c.gradient.len() != tpl.state.len()) {
            return Err(Error::Model(format!("cut pool does not match the state dimension of stage {t}")));
        }
    }

    let mut b = Builder { lp: LinearProgram::new(), integer: Vec::new() };
    let z0 = b.lp.num_cols();
    match copy {
        CopyMode::Pinned(x_hat) => {
            if x_hat.len() != h_in {
                return Err(Error::Model(format!(
                    "incoming state has dimension {} but stage {t} expects {h_in}",
                    x_hat.len()
                )));
            }
            for _ in 0..h_in {
                b.column(0.0, VarKind::Continuous { lo: f64::NEG_INFINITY, hi: f64::INFINITY });
            }
        }
        CopyMode::Relaxed(pi) => {
            if t == 0 {
                return Err(Error::Model("the first stage has no incoming state to relax".into()));
            }
            if pi.len() != h_in {
                return Err(Error::Model(format!(
                    "multiplier has dimension {} but stage {t} expects {h_in}",
                    pi.len()
                )));
            }
            for (r, kind) in model.templates[t - 1].state.iter().enumerate() {
                b.column(-pi[r], *kind);
            }
        }
    }
    let x0 = b.lp.num_cols();
    for (i, kind) in tpl.state.iter().enumerate() {
        b.column(data.c_x[i], *kind);
    }
    let y0 = b.lp.num_cols();
    for (i, kind) in tpl.locals.iter().enumerate() {
        b.column(data.c_y[i], *kind);
    }
    let y1 = b.lp.num_cols();
    let theta = if leaf {
        None
    } else {
        let floor = pool.map_or(tpl.lower_bound, |p| p.lower_bound);
        Some(b.column(1.0, VarKind::Continuous { lo: floor, hi: f64::INFINITY }))
    };

    let r0 = b.lp.num_rows();
    if let CopyMode::Pinned(x_hat) = copy {
        for (r, &v) in x_hat.iter().enumerate() {
            b.lp.add_row(&[(z0 + r, 1.0)], Sense::Eq, v, RowTag::Copy);
        }
    }
    let r1 = b.lp.num_rows();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); tpl.num_rows()];
    for (m, off) in [(&tpl.b, z0), (&tpl.a, x0), (&tpl.c, y0)] {
        for e in &m.entries {
            rows[e.row].push((off + e.col, e.value));
        }
    }
    for (i, coeffs) in rows.iter().enumerate() {
        b.lp.add_row(coeffs, tpl.senses[i], data.rhs[i], RowTag::Structural);
    }
    let r2 = b.lp.num_rows();
    if let (Some(th), Some(pool)) = (theta, pool) {
        let mut coeffs = Vec::with_capacity(tpl.state.len() + 1);
        for cut in &pool.cuts {
            coeffs.clear();
            coeffs.push((th, 1.0));
            coeffs.extend(cut.gradient.iter().enumerate().map(|(i, &g)| (x0 + i, -g)));
            b.lp.add_row(&coeffs, Sense::Ge, cut.intercept, RowTag::Cut);
        }
    }
    let r3 = b.lp.num_rows();

    Ok(Subproblem {
        milp: MilpInstance::new(b.lp, b.integer),
        layout: Layout {
            z: z0..x0,
            x: x0..y0,
            y: y0..y1,
            theta,
            copy_rows: r0..r1,
            structural_rows: r1..r2,
            cut_rows: r2..r3,
        },
        state_kinds: tpl.state.clone(),
    })
}

#[derive(Clone, Copy)]
enum CopyMode<'a> {
    Pinned(&'a [f64]),
    Relaxed(&'a [f64]),
}

/// The subproblem of stage `t` under realization `j` with incoming state
/// `x_hat` and the cuts of `pool` on `theta_t`. Pass `None` as the pool for
/// the last stage, or to get `theta_t` with only its floor.
pub fn instantiate_subproblem(
    model: &MsipModel,
    t: usize,
    j: usize,
    x_hat: &[f64],
    pool: Option<&CutPool>,
) -> Result<Subproblem> {
    build(model, t, j, CopyMode::Pinned(x_hat), pool)
}

/// The Lagrangian relaxation of the copy rows of stage `t >= 1`: the copy
/// variable ranges over the domain of the previous state and the objective
/// gains `-pi z`.
pub fn instantiate_lagrangian(
    model: &MsipModel,
    t: usize,
    j: usize,
    pi: &[f64],
    pool: Option<&CutPool>,
) -> Result<Subproblem> {
    build(model, t, j, CopyMode::Relaxed(pi), pool)
}

/// Realization indices, one per stage.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScenarioPath {
    pub indices: Vec<usize>,
}

fn draw<R: Rng + ?Sized>(reals: &[Realization], rng: &mut R) -> usize {
    if reals.len() == 1 {
        return 0;
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, r) in reals.iter().enumerate() {
        acc += r.probability;
        if u < acc {
            return j;
        }
    }
    reals.len() - 1
}

/// Draws `m` paths with replacement from `rng`.
pub fn sample_paths_with<R: Rng + ?Sized>(model: &MsipModel, m: usize, rng: &mut R) -> Result<Vec<ScenarioPath>> {
    if m < 2 {
        return Err(Error::Config(format!("at least 2 sampled paths are needed, got {m}")));
    }
    Ok((0..m)
        .map(|_| ScenarioPath { indices: model.realizations.iter().map(|r| draw(r, rng)).collect() })
        .collect())
}

/// Draws `m` paths with replacement from a generator seeded with `seed`.
pub fn sample_scenario_paths(model: &MsipModel, m: usize, seed: u64) -> Result<Vec<ScenarioPath>> {
    sample_paths_with(model, m, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Calls `visit` on every scenario path with its probability, in
/// lexicographic order.
pub fn for_each_path(model: &MsipModel, mut visit: impl FnMut(&ScenarioPath, f64)) {
    let t_count = model.num_stages();
    let mut path = ScenarioPath { indices: vec![0; t_count] };
    if model.realizations.iter().any(|r| r.is_empty()) {
        return;
    }
    loop {
        let p = path.indices.iter().enumerate().map(|(t, &j)| model.probability(t, j)).product();
        visit(&path, p);
        let mut t = t_count;
        loop {
            if t == 0 {
                return;
            }
            t -= 1;
            path.indices[t] += 1;
            if path.indices[t] < model.num_realizations(t) {
                break;
            }
            path.indices[t] = 0;
        }
    }
}

/// Offset and base-2 weights that encode an integer range.
///
/// Values `lo..=hi` are written `lo + sum_k 2^k b_k` with
/// `ceil(log2(hi - lo + 1))` binaries.
pub fn binary_expansion(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo) as u64;
    let bits = 64 - span.leading_zeros();
    (0..bits).map(|k| (1u64 << k) as f64).collect()
}

/// Replaces every bounded-integer state component by its base-2 expansion.
///
/// A component `x in [lo, hi]` becomes binaries `b_k` with `x = lo + sum
/// 2^k b_k`. Its stage gains the linking row `sum 2^k b_k <= hi - lo`.
/// Constants `lo` are carried by an extra local fixed at one, added only to
/// stages that need it. Binary components are left alone.
pub fn binarize_state(model: &MsipModel) -> Result<MsipModel> {
    model.check()?;
    let t_count = model.num_stages();
    // (lo, weights) per state component, or None if it stays as is
    let mut maps: Vec<Vec<Option<(f64, Vec<f64>)>>> = Vec::with_capacity(t_count);
    for (t, tpl) in model.templates.iter().enumerate() {
        let mut m = Vec::with_capacity(tpl.state.len());
        for (r, kind) in tpl.state.iter().enumerate() {
            m.push(match *kind {
                VarKind::Binary => None,
                VarKind::Integer { lo, hi } => Some((lo, binary_expansion(lo, hi))),
                VarKind::Continuous { .. } => {
                    return Err(Error::Unsupported(format!(
                        "stage {t}: state component {r} is continuous and cannot be binarized"
                    )))
                }
            });
        }
        maps.push(m);
    }
    if maps.iter().all(|m| m.iter().all(Option::is_none)) {
        return Ok(model.clone());
    }

    // new column index of each old component's first binary
    let starts: Vec<Vec<usize>> = maps
        .iter()
        .map(|m| {
            let mut next = 0;
            m.iter()
                .map(|e| {
                    let s = next;
                    next += e.as_ref().map_or(1, |(_, w)| w.len());
                    s
                })
                .collect()
        })
        .collect();

    let mut templates = Vec::with_capacity(t_count);
    let mut realizations = Vec::with_capacity(t_count);
    for t in 0..t_count {
        let tpl = &model.templates[t];
        let own = &maps[t];
        let incoming: Option<&Vec<Option<(f64, Vec<f64>)>>> = if t > 0 { Some(&maps[t - 1]) } else { None };
        let needs_one = own.iter().chain(incoming.into_iter().flatten()).flatten().any(|(lo, _)| *lo != 0.0);

        let mut state = Vec::new();
        let mut c_x = Vec::new();
        for (r, e) in own.iter().enumerate() {
            match e {
                None => {
                    state.push(tpl.state[r]);
                    c_x.push(tpl.c_x[r]);
                }
                Some((_, w)) => {
                    for &wk in w {
                        state.push(VarKind::Binary);
                        c_x.push(tpl.c_x[r] * wk);
                    }
                }
            }
        }
        let h_new = state.len();
        let mut locals = tpl.locals.clone();
        let mut c_y = tpl.c_y.clone();
        let one = if needs_one {
            locals.push(VarKind::Continuous { lo: 1.0, hi: 1.0 });
            c_y.push(constant_cost(own, &tpl.c_x));
            Some(locals.len() - 1)
        } else {
            None
        };

        let rows = tpl.num_rows();
        let links: Vec<usize> = (0..own.len()).filter(|&r| own[r].as_ref().is_some_and(|(_, w)| !w.is_empty())).collect();
        let new_rows = rows + links.len();
        let mut a = SparseMatrix::zeros(new_rows, h_new);
        let mut c = SparseMatrix::zeros(new_rows, locals.len());
        c.entries.extend(tpl.c.entries.iter().copied());
        for e in &tpl.a.entries {
            match &own[e.col] {
                None => a.push(e.row, starts[t][e.col], e.value),
                Some((lo, w)) => {
                    for (k, &wk) in w.iter().enumerate() {
                        a.push(e.row, starts[t][e.col] + k, e.value * wk);
                    }
                    if *lo != 0.0 {
                        c.push(e.row, one.unwrap(), e.value * lo);
                    }
                }
            }
        }
        let mut rhs = tpl.rhs.clone();
        let mut senses = tpl.senses.clone();
        for (i, &r) in links.iter().enumerate() {
            let Some((lo, w)) = &own[r] else { unreachable!() };
            for (k, &wk) in w.iter().enumerate() {
                a.push(rows + i, starts[t][r] + k, wk);
            }
            let VarKind::Integer { hi, .. } = tpl.state[r] else { unreachable!() };
            rhs.push(hi - lo);
            senses.push(Sense::Le);
        }

        let h_in_new = if t == 0 { model.x0.len() } else { templates_state_len(&maps[t - 1]) };
        let mut bm = SparseMatrix::zeros(new_rows, h_in_new);
        for e in &tpl.b.entries {
            match incoming.map(|m| &m[e.col]) {
                None | Some(None) => {
                    let col = if t == 0 { e.col } else { starts[t - 1][e.col] };
                    bm.push(e.row, col, e.value);
                }
                Some(Some((lo, w))) => {
                    for (k, &wk) in w.iter().enumerate() {
                        bm.push(e.row, starts[t - 1][e.col] + k, e.value * wk);
                    }
                    if *lo != 0.0 {
                        c.push(e.row, one.unwrap(), e.value * lo);
                    }
                }
            }
        }

        let reals = model.realizations[t]
            .iter()
            .enumerate()
            .map(|(j, real)| {
                let mut overrides = Vec::new();
                let mut touched_cost = false;
                for o in &real.overrides {
                    match o.target {
                        OverrideTarget::ObjectiveState => {
                            touched_cost = true;
                            match &own[o.position] {
                                None => overrides.push(Override { position: starts[t][o.position], ..*o }),
                                Some((_, w)) => {
                                    for (k, &wk) in w.iter().enumerate() {
                                        overrides.push(Override {
                                            target: OverrideTarget::ObjectiveState,
                                            position: starts[t][o.position] + k,
                                            value: o.value * wk,
                                        });
                                    }
                                }
                            }
                        }
                        OverrideTarget::ObjectiveLocal | OverrideTarget::Rhs => overrides.push(*o),
                    }
                }
                if let (Some(one), true) = (one, touched_cost) {
                    let realized = model.stage_data(t, j);
                    overrides.push(Override {
                        target: OverrideTarget::ObjectiveLocal,
                        position: one,
                        value: constant_cost(own, &realized.c_x),
                    });
                }
                Realization { probability: real.probability, overrides }
            })
            .collect();

        templates.push(StageTemplate {
            state,
            locals,
            c_x,
            c_y,
            b: bm,
            a,
            c,
            rhs,
            senses,
            lower_bound: tpl.lower_bound,
        });
        realizations.push(reals);
    }
    Ok(MsipModel { x0: model.x0.clone(), templates, realizations })
}

fn templates_state_len(map: &[Option<(f64, Vec<f64>)>]) -> usize {
    map.iter().map(|e| e.as_ref().map_or(1, |(_, w)| w.len())).sum()
}

fn constant_cost(map: &[Option<(f64, Vec<f64>)>], c_x: &[f64]) -> f64 {
    map.iter().zip(c_x).map(|(e, &c)| e.as_ref().map_or(0.0, |(lo, _)| c * lo)).sum()
}

/// Maps a binarized state back onto the original integer components.
pub fn collapse_state(original: &StageTemplate, binary: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(original.state.len());
    let mut pos = 0;
    for kind in &original.state {
        match *kind {
            VarKind::Integer { lo, hi } => {
                let w = binary_expansion(lo, hi);
                out.push(lo + w.iter().enumerate().map(|(k, wk)| wk * binary[pos + k]).sum::<f64>());
                pos += w.len();
            }
            _ => {
                out.push(binary[pos]);
                pos += 1;
            }
        }
    }
    out
}
