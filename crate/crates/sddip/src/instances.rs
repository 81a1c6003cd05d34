//! Instance generators and the JSON instance format.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sddip_core::model::{
    MsipModel, Override, OverrideTarget, Realization, SparseMatrix, StageTemplate, Triplet, VarKind,
};
use sddip_core::simplex::Sense;

/// Penalty on knapsack shortfall.
pub const SMKP_PENALTY: f64 = 200.0;
/// Probability sums in files may be off by this much; they are rescaled on
/// load.
pub const FILE_PROBABILITY_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum InstanceError {
    #[error("invalid generator parameters: {0}")]
    Params(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("{path}: {msg}")]
    Invalid { path: String, msg: String },
    #[error(transparent)]
    Core(#[from] sddip_core::Error),
}

fn uniform_1_100(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(1..=100) as f64
}

/// Multi-stage stochastic multi-knapsack instance.
///
/// Stage `t` picks binary items `x_t` and shortfalls `y_t >= 0` with
/// `W x_{t-1} + A x_t + y_t >= h`, `h = 0.75 (W 1 + A 1)`, at cost
/// `q x_t + 200 1 y_t`. `A`, `W` and every realization's `q` are uniform on
/// `{1..100}`; the first stage has `W = 0` and one realization.
pub fn generate_smkp(
    stages: usize,
    rows: usize,
    cols: usize,
    scens: usize,
    seed: u64,
) -> Result<MsipModel, InstanceError> {
    if stages < 2 || rows == 0 || cols == 0 || scens == 0 {
        return Err(InstanceError::Params(format!(
            "need T >= 2 and rows, cols, scens >= 1 (got T={stages}, rows={rows}, cols={cols}, scens={scens})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut templates = Vec::with_capacity(stages);
    let mut realizations = Vec::with_capacity(stages);
    for t in 0..stages {
        let prev = if t == 0 { 0 } else { cols };
        let mut a = SparseMatrix::zeros(rows, cols);
        let mut b = SparseMatrix::zeros(rows, prev);
        let mut c = SparseMatrix::zeros(rows, rows);
        let mut rhs = vec![0.0; rows];
        for i in 0..rows {
            for k in 0..cols {
                let v = uniform_1_100(&mut rng);
                a.push(i, k, v);
                rhs[i] += v;
            }
        }
        for i in 0..rows {
            for k in 0..prev {
                let v = uniform_1_100(&mut rng);
                b.push(i, k, v);
                rhs[i] += v;
            }
            c.push(i, i, 1.0);
        }
        for h in &mut rhs {
            *h *= 0.75;
        }
        let n = if t == 0 { 1 } else { scens };
        let costs: Vec<Vec<f64>> = (0..n).map(|_| (0..cols).map(|_| uniform_1_100(&mut rng)).collect()).collect();
        let reals = costs
            .iter()
            .map(|q| Realization {
                probability: 1.0 / n as f64,
                overrides: if n == 1 {
                    Vec::new()
                } else {
                    q.iter()
                        .enumerate()
                        .map(|(k, &v)| Override { target: OverrideTarget::ObjectiveState, position: k, value: v })
                        .collect()
                },
            })
            .collect();
        templates.push(StageTemplate {
            state: vec![VarKind::Binary; cols],
            locals: vec![VarKind::Continuous { lo: 0.0, hi: f64::INFINITY }; rows],
            c_x: costs[0].clone(),
            c_y: vec![SMKP_PENALTY; rows],
            b,
            a,
            c,
            rhs,
            senses: vec![Sense::Ge; rows],
            lower_bound: 0.0,
        });
        realizations.push(reals);
    }
    let model = MsipModel { x0: Vec::new(), templates, realizations };
    model.check()?;
    Ok(model)
}

#[derive(Debug, Clone, Deserialize)]
pub struct GepType {
    pub name: String,
    pub build_cost: f64,
    pub capacity_mw: f64,
    pub availability: f64,
    pub fuel_cost: f64,
    pub cap: u32,
}

#[derive(Debug, Clone, Deserialize)]
pub struct GepSubperiod {
    pub name: String,
    pub hours: f64,
    pub load_gw: f64,
}

/// Technology and demand data for [`generate_gep`].
#[derive(Debug, Clone, Deserialize)]
pub struct GepData {
    pub types: Vec<GepType>,
    pub subperiods: Vec<GepSubperiod>,
    pub demand_growth: f64,
    pub build_cost_decline: f64,
    pub penalty: f64,
    pub fuel_spread: f64,
    pub demand_spread: f64,
}

const GEP_DATA: &str = include_str!("../data/gep.json");

/// The bundled synthetic dataset.
pub fn gep_data() -> GepData {
    serde_json::from_str(GEP_DATA).expect("bundled GEP data parses")
}

/// Generation expansion planning instance.
///
/// State `x_t` counts the generators of each type built so far
/// (`0 <= x_t <= G`). Each stage builds `g_t = x_t - x_{t-1} >= 0`, produces
/// `y_ts <= rating_ts x_t` in every sub-period and leaves `u_ts` unmet with
/// `1 y_ts + u_ts = d_ts`. The cost is `a_t g_t + sum_s q_s y_ts + rho sum_s
/// u_ts`. Realizations rescale fuel costs and demands; the first stage uses
/// the base data. `caps` defaults to the dataset caps.
pub fn generate_gep(
    stages: usize,
    n_types: usize,
    scens: usize,
    caps: Option<&[u32]>,
    seed: u64,
) -> Result<MsipModel, InstanceError> {
    let data = gep_data();
    if stages < 2 || scens == 0 || n_types == 0 || n_types > data.types.len() {
        return Err(InstanceError::Params(format!(
            "need T >= 2, scens >= 1 and 1 <= types <= {} (got T={stages}, types={n_types}, scens={scens})",
            data.types.len()
        )));
    }
    let types = &data.types[..n_types];
    let caps: Vec<f64> = match caps {
        Some(c) if c.len() != n_types => {
            return Err(InstanceError::Params(format!("{} caps for {n_types} generator types", c.len())))
        }
        Some(c) => c.iter().map(|&v| v as f64).collect(),
        None => types.iter().map(|ty| ty.cap as f64).collect(),
    };
    let subs = &data.subperiods;
    let (n, s) = (n_types, subs.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // locals: g (n), y (s blocks of n), u (s)
    let g_col = |i: usize| i;
    let y_col = |sp: usize, i: usize| n + sp * n + i;
    let u_col = |sp: usize| n + s * n + sp;
    let n_loc = n + s * n + s;
    // rows: connect (n), capacity (s * n), demand (s)
    let cap_row = |sp: usize, i: usize| n + sp * n + i;
    let dem_row = |sp: usize| n + s * n + sp;
    let n_rows = n + s * n + s;

    let mut templates = Vec::with_capacity(stages);
    let mut realizations = Vec::with_capacity(stages);
    for t in 0..stages {
        let mut b = SparseMatrix::zeros(n_rows, n);
        let mut a = SparseMatrix::zeros(n_rows, n);
        let mut c = SparseMatrix::zeros(n_rows, n_loc);
        let mut rhs = vec![0.0; n_rows];
        let mut senses = vec![Sense::Eq; n_rows];
        for i in 0..n {
            // x - z - g = 0
            a.push(i, i, 1.0);
            b.push(i, i, -1.0);
            c.push(i, g_col(i), -1.0);
        }
        for (sp, sub) in subs.iter().enumerate() {
            for (i, ty) in types.iter().enumerate() {
                // y - rating x <= 0
                let r = cap_row(sp, i);
                c.push(r, y_col(sp, i), 1.0);
                a.push(r, i, -ty.capacity_mw * ty.availability * sub.hours / 1000.0);
                senses[r] = Sense::Le;
            }
            let r = dem_row(sp);
            for i in 0..n {
                c.push(r, y_col(sp, i), 1.0);
            }
            c.push(r, u_col(sp), 1.0);
            rhs[r] = sub.load_gw * sub.hours * (1.0 + data.demand_growth).powi(t as i32);
        }

        let decline = (1.0 - data.build_cost_decline).powi(t as i32);
        let mut c_y = vec![0.0; n_loc];
        for (i, ty) in types.iter().enumerate() {
            c_y[g_col(i)] = ty.build_cost * decline;
            for sp in 0..s {
                c_y[y_col(sp, i)] = ty.fuel_cost;
            }
        }
        for sp in 0..s {
            c_y[u_col(sp)] = data.penalty;
        }

        let count = if t == 0 { 1 } else { scens };
        let mut reals = Vec::with_capacity(count);
        for _ in 0..count {
            let mut overrides = Vec::new();
            if t > 0 {
                for (i, ty) in types.iter().enumerate() {
                    let f = 1.0 + data.fuel_spread * (2.0 * rng.random::<f64>() - 1.0);
                    for sp in 0..s {
                        overrides.push(Override {
                            target: OverrideTarget::ObjectiveLocal,
                            position: y_col(sp, i),
                            value: ty.fuel_cost * f,
                        });
                    }
                }
                for sp in 0..s {
                    let f = 1.0 + data.demand_spread * (2.0 * rng.random::<f64>() - 1.0);
                    overrides.push(Override {
                        target: OverrideTarget::Rhs,
                        position: dem_row(sp),
                        value: rhs[dem_row(sp)] * f,
                    });
                }
            }
            reals.push(Realization { probability: 1.0 / count as f64, overrides });
        }

        let mut locals = Vec::with_capacity(n_loc);
        locals.extend(caps.iter().map(|&g| VarKind::Integer { lo: 0.0, hi: g }));
        locals.extend(std::iter::repeat(VarKind::Continuous { lo: 0.0, hi: f64::INFINITY }).take(s * n + s));
        templates.push(StageTemplate {
            state: caps.iter().map(|&g| VarKind::Integer { lo: 0.0, hi: g }).collect(),
            locals,
            c_x: vec![0.0; n],
            c_y,
            b,
            a,
            c,
            rhs,
            senses,
            lower_bound: 0.0,
        });
        realizations.push(reals);
    }
    let model = MsipModel { x0: vec![0.0; n], templates, realizations };
    model.check()?;
    Ok(model)
}

// JSON document

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KindDoc {
    kind: String,
    #[serde(default)]
    lo: Option<f64>,
    #[serde(default)]
    hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TripletsDoc {
    #[serde(rename = "B")]
    b: Vec<(usize, usize, f64)>,
    #[serde(rename = "A")]
    a: Vec<(usize, usize, f64)>,
    #[serde(rename = "C")]
    c: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OverrideDoc {
    target: String,
    position: usize,
    value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RealizationDoc {
    q: f64,
    #[serde(default)]
    overrides: Vec<OverrideDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageDoc {
    t: usize,
    state: Vec<KindDoc>,
    locals: Vec<KindDoc>,
    c_x: Vec<f64>,
    c_y: Vec<f64>,
    triplets: TripletsDoc,
    b: Vec<f64>,
    sense: Vec<String>,
    #[serde(rename = "L")]
    lower_bound: f64,
    realizations: Vec<RealizationDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    #[serde(rename = "T")]
    count: usize,
    x0: Vec<f64>,
    stages: Vec<StageDoc>,
}

fn kind_doc(k: &VarKind) -> KindDoc {
    let finite = |v: f64| v.is_finite().then_some(v);
    match *k {
        VarKind::Binary => KindDoc { kind: "binary".into(), lo: None, hi: None },
        VarKind::Integer { lo, hi } => KindDoc { kind: "integer".into(), lo: Some(lo), hi: Some(hi) },
        VarKind::Continuous { lo, hi } => KindDoc { kind: "continuous".into(), lo: finite(lo), hi: finite(hi) },
    }
}

fn kind_from(d: &KindDoc) -> Result<VarKind, String> {
    match d.kind.as_str() {
        "binary" => Ok(VarKind::Binary),
        "integer" => match (d.lo, d.hi) {
            (Some(lo), Some(hi)) => Ok(VarKind::Integer { lo, hi }),
            _ => Err("integer variables need finite lo and hi".into()),
        },
        "continuous" => Ok(VarKind::Continuous {
            lo: d.lo.unwrap_or(f64::NEG_INFINITY),
            hi: d.hi.unwrap_or(f64::INFINITY),
        }),
        other => Err(format!("unknown variable kind {other:?}")),
    }
}

fn sense_str(s: Sense) -> &'static str {
    match s {
        Sense::Ge => ">=",
        Sense::Le => "<=",
        Sense::Eq => "=",
    }
}

fn sense_from(s: &str) -> Result<Sense, String> {
    match s {
        ">=" => Ok(Sense::Ge),
        "<=" => Ok(Sense::Le),
        "=" | "==" => Ok(Sense::Eq),
        other => Err(format!("unknown sense {other:?}")),
    }
}

fn target_str(t: OverrideTarget) -> &'static str {
    match t {
        OverrideTarget::ObjectiveState => "objective-x",
        OverrideTarget::ObjectiveLocal => "objective-y",
        OverrideTarget::Rhs => "rhs",
    }
}

fn target_from(s: &str) -> Result<OverrideTarget, String> {
    match s {
        "objective-x" => Ok(OverrideTarget::ObjectiveState),
        "objective-y" => Ok(OverrideTarget::ObjectiveLocal),
        "rhs" => Ok(OverrideTarget::Rhs),
        other => Err(format!("unknown override target {other:?}")),
    }
}

fn triplets(m: &SparseMatrix) -> Vec<(usize, usize, f64)> {
    m.entries.iter().map(|e| (e.row, e.col, e.value)).collect()
}

/// Serializes `model` as a JSON instance document.
pub fn model_to_json(model: &MsipModel) -> String {
    let stages = model
        .templates
        .iter()
        .zip(&model.realizations)
        .enumerate()
        .map(|(t, (tpl, reals))| StageDoc {
            t: t + 1,
            state: tpl.state.iter().map(kind_doc).collect(),
            locals: tpl.locals.iter().map(kind_doc).collect(),
            c_x: tpl.c_x.clone(),
            c_y: tpl.c_y.clone(),
            triplets: TripletsDoc { b: triplets(&tpl.b), a: triplets(&tpl.a), c: triplets(&tpl.c) },
            b: tpl.rhs.clone(),
            sense: tpl.senses.iter().map(|s| sense_str(*s).to_string()).collect(),
            lower_bound: tpl.lower_bound,
            realizations: reals
                .iter()
                .map(|r| RealizationDoc {
                    q: r.probability,
                    overrides: r
                        .overrides
                        .iter()
                        .map(|o| OverrideDoc { target: target_str(o.target).into(), position: o.position, value: o.value })
                        .collect(),
                })
                .collect(),
        })
        .collect();
    let file = ModelFile { count: model.num_stages(), x0: model.x0.clone(), stages };
    let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
    s.push('\n');
    s
}

/// Parses a JSON instance document. `origin` names the source in errors.
pub fn model_from_json(text: &str, origin: &str) -> Result<MsipModel, InstanceError> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|source| InstanceError::Parse { path: origin.into(), source })?;
    let bad = |msg: String| InstanceError::Invalid { path: origin.into(), msg };
    if file.count != file.stages.len() {
        return Err(bad(format!("T is {} but {} stages are listed", file.count, file.stages.len())));
    }
    let mut templates = Vec::with_capacity(file.count);
    let mut realizations = Vec::with_capacity(file.count);
    for (idx, st) in file.stages.iter().enumerate() {
        let at = |msg: String| bad(format!("stage t={}: {msg}", st.t));
        if st.t != idx + 1 {
            return Err(bad(format!("stage {} has t={}", idx + 1, st.t)));
        }
        let state = st.state.iter().map(kind_from).collect::<Result<Vec<_>, _>>().map_err(at)?;
        let locals = st.locals.iter().map(kind_from).collect::<Result<Vec<_>, _>>().map_err(at)?;
        let senses = st.sense.iter().map(|s| sense_from(s)).collect::<Result<Vec<_>, _>>().map_err(at)?;
        let rows = st.b.len();
        let prev = if idx == 0 { file.x0.len() } else { file.stages[idx - 1].state.len() };
        let matrix = |list: &[(usize, usize, f64)], cols: usize| SparseMatrix {
            rows,
            cols,
            entries: list.iter().map(|&(row, col, value)| Triplet { row, col, value }).collect(),
        };
        let sum: f64 = st.realizations.iter().map(|r| r.q).sum();
        if (sum - 1.0).abs() > FILE_PROBABILITY_TOL {
            return Err(at(format!("realization probabilities sum to {sum}, not 1")));
        }
        let mut reals = Vec::with_capacity(st.realizations.len());
        for r in &st.realizations {
            let overrides = r
                .overrides
                .iter()
                .map(|o| Ok(Override { target: target_from(&o.target)?, position: o.position, value: o.value }))
                .collect::<Result<Vec<_>, String>>()
                .map_err(at)?;
            reals.push(Realization { probability: r.q / sum, overrides });
        }
        templates.push(StageTemplate {
            b: matrix(&st.triplets.b, prev),
            a: matrix(&st.triplets.a, state.len()),
            c: matrix(&st.triplets.c, locals.len()),
            state,
            locals,
            c_x: st.c_x.clone(),
            c_y: st.c_y.clone(),
            rhs: st.b.clone(),
            senses,
            lower_bound: st.lower_bound,
        });
        realizations.push(reals);
    }
    let model = MsipModel { x0: file.x0, templates, realizations };
    let violations = sddip_core::model::validate_model(&model);
    if !violations.is_empty() {
        let text: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(bad(text.join("; ")));
    }
    Ok(model)
}

pub fn write_model(model: &MsipModel, path: &Path) -> Result<(), InstanceError> {
    fs::write(path, model_to_json(model))
        .map_err(|source| InstanceError::Io { path: path.display().to_string(), source })
}

pub fn read_model(path: &Path) -> Result<MsipModel, InstanceError> {
    let text = fs::read_to_string(path)
        .map_err(|source| InstanceError::Io { path: path.display().to_string(), source })?;
    model_from_json(&text, &path.display().to_string())
}
