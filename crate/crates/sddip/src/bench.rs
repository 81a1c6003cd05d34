//! Experiment grids: every configuration on every instance of every class,
//! averaged into one CSV row per class.
//!
//! Grid file:
//!
//! ```json
//! {
//!   "classes": [{"problem": "smkp", "T": 3, "rows": 10, "cols": 30, "scens": 3}],
//!   "instance_seeds": [1, 2, 3],
//!   "run_seeds": [1],
//!   "time_limit": 600,
//!   "configs": [
//!     {"name": "IA", "algo": "sddip", "cut": "I", "backward": "alternating", "M": 2},
//!     {"name": "ID", "algo": "sddip", "cut": "I", "backward": "default", "M": 2}
//!   ]
//! }
//! ```
//!
//! Output columns are `class,T,scens` followed by `<name>-t`, `<name>-iter`,
//! `<name>-gap`, `<name>-eprop` and `<name>-fail` per configuration. Times,
//! iterations, gaps (percent) and tight-cut proportions are means over the
//! runs that finished. A time cell reads `>limit` when any run stopped on a
//! limit. A cell with no finished run reads `NaN`; `-fail` counts the runs
//! that returned an error.

use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Deserialize;
use sddip_core::model::MsipModel;
use sddip_core::sddip::{BackwardMode, CutFamily};

use crate::instances::{generate_gep, generate_smkp, InstanceError};
use crate::report::{Status, Summary};
use crate::solve::{solve, Algo, SolveSpec};

pub const LIMIT_SENTINEL: &str = ">limit";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "problem", rename_all = "lowercase", deny_unknown_fields)]
pub enum ClassSpec {
    Smkp {
        #[serde(rename = "T")]
        t: usize,
        rows: usize,
        cols: usize,
        scens: usize,
    },
    Gep {
        #[serde(rename = "T")]
        t: usize,
        scens: usize,
        #[serde(default = "default_types")]
        types: usize,
    },
}

fn default_types() -> usize {
    6
}

impl ClassSpec {
    pub fn label(&self) -> String {
        match self {
            ClassSpec::Smkp { t, rows, cols, scens } => format!("smkp-{t}-{rows}-{cols}-{scens}"),
            ClassSpec::Gep { t, scens, types } => format!("gep-{t}-{types}-{scens}"),
        }
    }

    pub fn stages(&self) -> usize {
        match self {
            ClassSpec::Smkp { t, .. } | ClassSpec::Gep { t, .. } => *t,
        }
    }

    pub fn scens(&self) -> usize {
        match self {
            ClassSpec::Smkp { scens, .. } | ClassSpec::Gep { scens, .. } => *scens,
        }
    }

    pub fn generate(&self, seed: u64) -> Result<MsipModel, InstanceError> {
        match *self {
            ClassSpec::Smkp { t, rows, cols, scens } => generate_smkp(t, rows, cols, scens, seed),
            ClassSpec::Gep { t, scens, types } => generate_gep(t, types, scens, None, seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgoName {
    Sddip,
    Nested,
    Extform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum CutName {
    I,
    L,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackwardName {
    Default,
    Alternating,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigSpec {
    pub name: String,
    pub algo: AlgoName,
    #[serde(default)]
    pub cut: Option<CutName>,
    #[serde(default)]
    pub backward: Option<BackwardName>,
    #[serde(rename = "M", default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub gap_threshold: Option<f64>,
    #[serde(default)]
    pub iteration_limit: Option<usize>,
    #[serde(default)]
    pub binarize: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub classes: Vec<ClassSpec>,
    pub instance_seeds: Vec<u64>,
    #[serde(default = "default_run_seeds")]
    pub run_seeds: Vec<u64>,
    /// Seconds per run.
    #[serde(default)]
    pub time_limit: Option<f64>,
    pub configs: Vec<ConfigSpec>,
}

fn default_run_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, thiserror::Error)]
pub enum GridError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("invalid grid: {0}")]
    Invalid(String),
}

impl Grid {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, GridError> {
        let g: Grid =
            serde_json::from_str(text).map_err(|source| GridError::Parse { path: origin.to_string(), source })?;
        g.check()?;
        Ok(g)
    }

    pub fn read(path: &Path) -> Result<Self, GridError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| GridError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text, &path.display().to_string())
    }

    fn check(&self) -> Result<(), GridError> {
        let bad = |m: &str| Err(GridError::Invalid(m.to_string()));
        if self.classes.is_empty() || self.configs.is_empty() {
            return bad("classes and configs must be non-empty");
        }
        if self.instance_seeds.is_empty() || self.run_seeds.is_empty() {
            return bad("instance_seeds and run_seeds must be non-empty");
        }
        if let Some(tl) = self.time_limit {
            if !(tl >= 0.0) {
                return bad("time_limit must be non-negative");
            }
        }
        for (i, c) in self.configs.iter().enumerate() {
            if c.name.is_empty() || c.name.contains(',') {
                return bad("config names must be non-empty and comma-free");
            }
            if self.configs[..i].iter().any(|o| o.name == c.name) {
                return Err(GridError::Invalid(format!("duplicate config name {}", c.name)));
            }
        }
        Ok(())
    }
}

impl ConfigSpec {
    pub fn spec(&self, seed: u64, time_limit: Option<f64>, timing: bool) -> SolveSpec {
        let d = SolveSpec::default();
        SolveSpec {
            algo: match self.algo {
                AlgoName::Sddip => Algo::Sddip,
                AlgoName::Nested => Algo::Nested,
                AlgoName::Extform => Algo::Extform,
            },
            cut: match self.cut {
                Some(CutName::L) => CutFamily::Lagrangian,
                Some(CutName::I) => CutFamily::IntegerL,
                None => d.cut,
            },
            backward: match self.backward {
                Some(BackwardName::Default) => BackwardMode::Default,
                Some(BackwardName::Alternating) => BackwardMode::Alternating,
                None => d.backward,
            },
            m: self.m.unwrap_or(d.m),
            alpha: self.alpha.unwrap_or(d.alpha),
            gamma: self.gamma.unwrap_or(d.gamma),
            delta: self.delta.unwrap_or(d.delta),
            gap_threshold: self.gap_threshold.unwrap_or(d.gap_threshold),
            iteration_limit: self.iteration_limit.unwrap_or(d.iteration_limit),
            binarize: self.binarize,
            seed,
            time_limit: time_limit.unwrap_or(f64::INFINITY),
            timing,
            ..d
        }
    }
}

/// Outcome of one (class, config, instance seed, run seed) run.
pub type Cell = Result<Summary, String>;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// `label: message` for every run that returned an error.
    pub errors: Vec<String>,
}

struct Job {
    class: usize,
    config: usize,
    instance_seed: u64,
    run_seed: u64,
}

/// Runs the grid on `jobs` threads. Results do not depend on `jobs`.
pub fn run_grid(grid: &Grid, jobs: usize, timing: bool) -> Table {
    let mut list = Vec::new();
    for class in 0..grid.classes.len() {
        for config in 0..grid.configs.len() {
            for &instance_seed in &grid.instance_seeds {
                for &run_seed in &grid.run_seeds {
                    list.push(Job { class, config, instance_seed, run_seed });
                }
            }
        }
    }
    let cells: Vec<Mutex<Option<Cell>>> = list.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let worker = || loop {
        let k = next.fetch_add(1, Ordering::Relaxed);
        let Some(job) = list.get(k) else { break };
        let out = run_job(grid, job, timing);
        *cells[k].lock().unwrap() = Some(out);
    };
    std::thread::scope(|s| {
        for _ in 0..jobs.max(1) {
            s.spawn(worker);
        }
    });
    let cells: Vec<Cell> = cells.into_iter().map(|c| c.into_inner().unwrap().unwrap()).collect();
    aggregate(grid, &list, &cells)
}

fn run_job(grid: &Grid, job: &Job, timing: bool) -> Cell {
    let model = grid.classes[job.class].generate(job.instance_seed).map_err(|e| e.to_string())?;
    let spec = grid.configs[job.config].spec(job.run_seed, grid.time_limit, timing);
    solve(&model, &spec).map(|r| r.summary).map_err(|e| e.to_string())
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn aggregate(grid: &Grid, list: &[Job], cells: &[Cell]) -> Table {
    let mut header = vec!["class".to_string(), "T".to_string(), "scens".to_string()];
    for c in &grid.configs {
        for col in ["t", "iter", "gap", "eprop", "fail"] {
            header.push(format!("{}-{col}", c.name));
        }
    }
    let mut errors = Vec::new();
    let mut rows = Vec::new();
    for (ci, class) in grid.classes.iter().enumerate() {
        let mut row = vec![class.label(), class.stages().to_string(), class.scens().to_string()];
        for k in 0..grid.configs.len() {
            let mut done: Vec<&Summary> = Vec::new();
            let mut failed = 0;
            for (job, cell) in list.iter().zip(cells) {
                if job.class != ci || job.config != k {
                    continue;
                }
                match cell {
                    Ok(s) => done.push(s),
                    Err(e) => {
                        failed += 1;
                        errors.push(format!(
                            "{} {} instance {} run {}: {e}",
                            class.label(),
                            grid.configs[k].name,
                            job.instance_seed,
                            job.run_seed
                        ));
                    }
                }
            }
            let avg = |f: &dyn Fn(&Summary) -> f64| mean(&done.iter().map(|s| f(s)).collect::<Vec<_>>());
            let limited = done.iter().any(|s| s.status != Status::Converged);
            row.push(if limited { LIMIT_SENTINEL.to_string() } else { avg(&|s| s.total_s).to_string() });
            row.push(avg(&|s| s.iterations as f64).to_string());
            row.push(avg(&|s| s.gap_pct).to_string());
            row.push(avg(&|s| s.tight_prop).to_string());
            row.push(failed.to_string());
        }
        rows.push(row);
    }
    Table { header, rows, errors }
}

impl Table {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}
