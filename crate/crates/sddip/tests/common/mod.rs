#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sddip_core::mip::MilpInstance;
use sddip_core::model::{MsipModel, Override, OverrideTarget, Realization, SparseMatrix, StageTemplate, VarKind};
use sddip_core::simplex::{LinearProgram, RowTag, Sense};

/// Two stages, `x` in {0,1}^2 with cost `x1 + x2`, then
/// `min 4y : y >= 2.6 - x1/4 - x2/2, y in {0..4}`. The first stage's
/// cost-to-go is bounded below by 8.
pub const TOY_MODEL: &str = r#"{
  "T": 2,
  "x0": [],
  "stages": [
    {
      "t": 1,
      "state": [{"kind": "binary"}, {"kind": "binary"}],
      "locals": [],
      "c_x": [1, 1],
      "c_y": [],
      "triplets": {"B": [], "A": [], "C": []},
      "b": [],
      "sense": [],
      "L": 8,
      "realizations": [{"q": 1, "overrides": []}]
    },
    {
      "t": 2,
      "state": [],
      "locals": [{"kind": "integer", "lo": 0, "hi": 4}],
      "c_x": [],
      "c_y": [4],
      "triplets": {"B": [[0, 0, 0.25], [0, 1, 0.5]], "A": [], "C": [[0, 0, 1]]},
      "b": [2.6],
      "sense": [">="],
      "L": 0,
      "realizations": [{"q": 1, "overrides": []}]
    }
  ]
}
"#;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_binary_state(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| if r.random_bool(0.5) { 1.0 } else { 0.0 }).collect()
}

fn bits(mask: usize, n: usize) -> Vec<f64> {
    (0..n).map(|k| ((mask >> k) & 1) as f64).collect()
}

fn mat_vec(m: &SparseMatrix, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.rows];
    for e in &m.entries {
        out[e.row] += e.value * x[e.col];
    }
    out
}

/// Optimum of a multi-knapsack instance by dynamic programming over every
/// binary state. Each row's slack is priced in closed form, so no LP is
/// solved.
pub fn smkp_brute_force(m: &MsipModel) -> f64 {
    let stages = m.num_stages();
    let n = m.templates[0].state.len();
    let states = 1usize << n;
    let xs: Vec<Vec<f64>> = (0..states).map(|k| bits(k, n)).collect();
    // future[x] = expected optimal cost from stage t on, entering with x
    let mut future = vec![0.0; states];
    for t in (0..stages).rev() {
        let tpl = &m.templates[t];
        let ax: Vec<Vec<f64>> = xs.iter().map(|x| mat_vec(&tpl.a, x)).collect();
        let incoming: Vec<Vec<f64>> =
            if t == 0 { vec![m.x0.clone()] } else { xs.clone() };
        let bx: Vec<Vec<f64>> = incoming.iter().map(|x| mat_vec(&tpl.b, x)).collect();
        let mut next = vec![0.0; incoming.len()];
        for j in 0..m.num_realizations(t) {
            let d = m.stage_data(t, j);
            let p = m.probability(t, j);
            for (ip, bxp) in bx.iter().enumerate() {
                let mut best = f64::INFINITY;
                for (k, x) in xs.iter().enumerate() {
                    let mut cost: f64 = d.c_x.iter().zip(x).map(|(c, v)| c * v).sum();
                    for i in 0..tpl.num_rows() {
                        let short = d.rhs[i] - ax[k][i] - bxp[i];
                        if short > 0.0 {
                            cost += d.c_y[i] * short;
                        }
                    }
                    best = best.min(cost + future[k]);
                }
                next[ip] += p * best;
            }
        }
        future = next;
    }
    future[0]
}

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub stages: usize,
    pub bits: usize,
    pub rows: usize,
    pub scens: usize,
    pub int_locals: usize,
}

/// Covering model with binary states, a priced slack per row and a few
/// integer locals in `[0, 3]`. All costs are non-negative.
pub fn covering_model(r: &mut ChaCha8Rng, s: Shape) -> MsipModel {
    let mut templates = Vec::new();
    let mut realizations = Vec::new();
    for t in 0..s.stages {
        let prev = if t == 0 { 0 } else { s.bits };
        let mut a = SparseMatrix::zeros(s.rows, s.bits);
        let mut b = SparseMatrix::zeros(s.rows, prev);
        let mut c = SparseMatrix::zeros(s.rows, s.rows + s.int_locals);
        let mut rhs = vec![0.0; s.rows];
        for i in 0..s.rows {
            for k in 0..s.bits {
                let v = r.random_range(1..=30) as f64;
                a.push(i, k, v);
                rhs[i] += v;
            }
            for k in 0..prev {
                let v = r.random_range(0..=20) as f64;
                b.push(i, k, v);
                rhs[i] += v;
            }
            c.push(i, i, 1.0);
            for k in 0..s.int_locals {
                let v = r.random_range(0..=15) as f64;
                c.push(i, s.rows + k, v);
                rhs[i] += 3.0 * v;
            }
            rhs[i] = (rhs[i] * r.random_range(0.3..0.7)).round();
        }
        let mut locals = vec![VarKind::Continuous { lo: 0.0, hi: f64::INFINITY }; s.rows];
        locals.extend(vec![VarKind::Integer { lo: 0.0, hi: 3.0 }; s.int_locals]);
        let mut c_y = vec![60.0; s.rows];
        c_y.extend((0..s.int_locals).map(|_| r.random_range(1..=40) as f64));
        let c_x: Vec<f64> = (0..s.bits).map(|_| r.random_range(1..=50) as f64).collect();
        let n = if t == 0 { 1 } else { s.scens };
        let reals = (0..n)
            .map(|_| {
                if n == 1 {
                    return Realization::certain();
                }
                let mut overrides: Vec<Override> = (0..s.bits)
                    .map(|k| Override {
                        target: OverrideTarget::ObjectiveState,
                        position: k,
                        value: r.random_range(1..=50) as f64,
                    })
                    .collect();
                for (i, h) in rhs.iter().enumerate() {
                    overrides.push(Override {
                        target: OverrideTarget::Rhs,
                        position: i,
                        value: (h * r.random_range(0.8..1.2)).round(),
                    });
                }
                Realization { probability: 1.0 / n as f64, overrides }
            })
            .collect();
        templates.push(StageTemplate {
            state: vec![VarKind::Binary; s.bits],
            locals,
            c_x,
            c_y,
            b,
            a,
            c,
            rhs,
            senses: vec![Sense::Ge; s.rows],
            lower_bound: 0.0,
        });
        realizations.push(reals);
    }
    let m = MsipModel { x0: vec![], templates, realizations };
    m.check().expect("generated model is valid");
    m
}

/// Every cell of a result CSV is a decimal number or a known word.
pub fn csv_cells_parse(text: &str) -> bool {
    let words = ["i", "LB", "UB", "cuts_benders", "cuts_tight", "elapsed_s", "status", "gap_pct", "tight_prop",
        "iterations", "total_s", "ub_kind", "converged", "time_limit", "iteration_limit", "node_limit",
        "sampled", "exhaustive", "deterministic", "incumbent"];
    text.lines()
        .flat_map(|l| l.split(','))
        .all(|c| words.contains(&c) || c.parse::<f64>().is_ok())
}

/// Parses the summary row of a result CSV into `column -> cell`.
pub fn summary(text: &str) -> HashMap<String, String> {
    let lines: Vec<&str> = text.lines().collect();
    let at = lines.iter().position(|l| l.starts_with("status,")).expect("summary header");
    lines[at].split(',').map(String::from).zip(lines[at + 1].split(',').map(String::from)).collect()
}

fn sense(r: &mut ChaCha8Rng) -> Sense {
    match r.random_range(0..3) {
        0 => Sense::Ge,
        1 => Sense::Le,
        _ => Sense::Eq,
    }
}

/// Feasible and bounded LP: rows are built around a known point and every
/// column has a finite bound on the side its cost pushes towards.
pub fn random_lp(r: &mut ChaCha8Rng) -> LinearProgram {
    let n = r.random_range(1..=12);
    let m = r.random_range(1..=10);
    let mut lp = LinearProgram::new();
    let mut point = Vec::with_capacity(n);
    for _ in 0..n {
        let cost = r.random_range(-10.0..10.0);
        let lo = r.random_range(-5.0..0.0);
        let hi = lo + r.random_range(0.5..8.0);
        let (lo, hi) = match r.random_range(0..4) {
            0 if cost > 0.0 => (lo, f64::INFINITY),
            1 if cost < 0.0 => (f64::NEG_INFINITY, hi),
            _ => (lo, hi),
        };
        let lo_f = if lo.is_finite() { lo } else { hi - 3.0 };
        let hi_f = if hi.is_finite() { hi } else { lo + 3.0 };
        point.push(r.random_range(lo_f..=hi_f));
        lp.add_column(cost, lo, hi);
    }
    for _ in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if r.random_bool(0.6) {
                coeffs.push((j, r.random_range(-5.0..5.0)));
            }
        }
        let act: f64 = coeffs.iter().map(|&(j, v)| v * point[j]).sum();
        let s = sense(r);
        let rhs = match s {
            Sense::Ge => act - r.random_range(0.0..2.0),
            Sense::Le => act + r.random_range(0.0..2.0),
            Sense::Eq => act,
        };
        lp.add_row(&coeffs, s, rhs, RowTag::Structural);
    }
    lp
}

/// Pure binary program with integer data.
pub fn random_binary_ip(r: &mut ChaCha8Rng, n: usize) -> MilpInstance {
    let mut lp = LinearProgram::new();
    for _ in 0..n {
        lp.add_column(r.random_range(-20..=20) as f64, 0.0, 1.0);
    }
    let m = r.random_range(1..=6);
    for _ in 0..m {
        let coeffs: Vec<(usize, f64)> = (0..n).map(|j| (j, r.random_range(-9..=9) as f64)).collect();
        let total: f64 = coeffs.iter().map(|c| c.1.abs()).sum();
        let s = sense(r);
        let rhs = match s {
            Sense::Eq => r.random_range(-2..=2) as f64,
            _ => (r.random_range(-0.5..0.5) * total).round(),
        };
        lp.add_row(&coeffs, s, rhs, RowTag::Structural);
    }
    MilpInstance::new(lp, vec![true; n])
}

/// Optimum of a pure binary program by enumeration.
pub fn enumerate_binary(inst: &MilpInstance) -> Option<f64> {
    let n = inst.lp.num_cols();
    let mut best: Option<f64> = None;
    let mut x = vec![0.0; n];
    for mask in 0u64..(1u64 << n) {
        for (j, v) in x.iter_mut().enumerate() {
            *v = ((mask >> j) & 1) as f64;
        }
        if inst.lp.max_violation(&x) <= 1e-9 {
            let obj = inst.lp.objective_value(&x);
            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
        }
    }
    best
}
