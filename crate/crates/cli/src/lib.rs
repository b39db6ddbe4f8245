//! Experiment runner behind the `bdglab` binary.
//!
//! A run expands a configuration into `(task, seed)` jobs, evaluates them on
//! a worker pool and writes one JSON record per job, one CSV file per
//! tabulated curve and a summary table. Results are ordered by job, not by
//! completion, so reruns produce identical files apart from wall times.

pub mod config;
pub mod tasks;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use config::{Axis, ConfigError, ExperimentConfig, Format, Task};
use tasks::{num, Check, Table};

/// Identifies the code that produced a record.
pub const BUILD_ID: &str = concat!("bdglab-", env!("CARGO_PKG_VERSION"), "+", env!("BDGLAB_GIT_REV"));

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ResultRecord {
    pub config_hash: String,
    pub build: String,
    pub task: String,
    pub seed: Option<u64>,
    pub parameters: BTreeMap<String, Value>,
    pub module: String,
    pub method: String,
    pub status: String,
    pub error: Option<String>,
    pub outputs: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub pass: Option<bool>,
    pub tables: Vec<String>,
    pub wall_time_s: f64,
    #[serde(skip)]
    pub table_data: Vec<Table>,
}

impl ResultRecord {
    pub fn failed(&self) -> bool {
        self.status != "ok"
    }

    fn stem(&self) -> String {
        match self.seed {
            Some(s) => format!("{}-seed{s}", self.task),
            None => self.task.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub seed_base: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            workers: 1,
            out: None,
            seed_base: 0,
        }
    }
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Io(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "configuration error: {e}"),
            RunError::Io(e) => write!(f, "output error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> RunError {
    RunError::Io(format!("{}: {e}", path.display()))
}

/// SHA-256 of the canonical JSON form of the configuration.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let text = serde_json::to_string(cfg).expect("configuration serializes");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn parameters(cfg: &ExperimentConfig) -> BTreeMap<String, Value> {
    let mut p = BTreeMap::new();
    p.insert("preset".into(), Value::from(cfg.model.preset.clone()));
    p.insert("mu".into(), num(cfg.model.mu));
    p.insert("amplitude".into(), num(cfg.model.amplitude));
    p.insert("n1".into(), Value::from(cfg.lattice.n1));
    p.insert("n2".into(), Value::from(cfg.lattice.n2));
    p.insert("w".into(), num(cfg.disorder.w));
    if let Some(f) = &cfg.model.flux {
        p.insert("flux".into(), Value::from(f.clone()));
    }
    if let Some(w) = cfg.lattice.width {
        p.insert("width".into(), Value::from(w));
        p.insert("twists".into(), Value::from(cfg.lattice.twists));
    }
    p
}

/// Evaluates every `(task, seed)` job of a configuration.
pub fn evaluate(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<ResultRecord>, RunError> {
    cfg.validate()?;
    let hash = config_hash(cfg);
    let params = parameters(cfg);
    let jobs: Vec<(Task, Option<u64>)> = cfg
        .tasks
        .iter()
        .flat_map(|t| cfg.seeds(opts.seed_base).into_iter().map(move |s| (*t, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| RunError::Io(e.to_string()))?;
    let records = pool.install(|| {
        jobs.par_iter()
            .map(|&(task, seed)| {
                let start = Instant::now();
                let result = tasks::run_task(task, cfg, seed);
                let wall_time_s = start.elapsed().as_secs_f64();
                let mut rec = ResultRecord {
                    config_hash: hash.clone(),
                    build: BUILD_ID.to_string(),
                    task: task.name().to_string(),
                    seed,
                    parameters: params.clone(),
                    module: String::new(),
                    method: String::new(),
                    status: "ok".into(),
                    error: None,
                    outputs: BTreeMap::new(),
                    checks: Vec::new(),
                    pass: None,
                    tables: Vec::new(),
                    wall_time_s,
                    table_data: Vec::new(),
                };
                match result {
                    Ok(o) => {
                        rec.module = o.module.to_string();
                        rec.method = o.method;
                        rec.outputs = o.outputs;
                        rec.pass = (!o.checks.is_empty()).then(|| o.checks.iter().all(|c| c.pass));
                        rec.checks = o.checks;
                        rec.tables = o.tables.iter().map(|t| format!("{}-{}.csv", rec.stem(), t.name)).collect();
                        rec.table_data = o.tables;
                    }
                    Err(e) => {
                        rec.status = "error".into();
                        rec.error = Some(e.to_string());
                    }
                }
                rec
            })
            .collect::<Vec<_>>()
    });
    Ok(records)
}

fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn cell(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(v) => v.to_string(),
    }
}

/// Columns of the summary table, looked up among the outputs of each seed.
const SUMMARY: [(&str, &str, &str); 9] = [
    ("caz_class", "symmetry_report", "caz_class"),
    ("chern", "chern_realspace", "chern"),
    ("chern_snap", "chern_realspace", "snap"),
    ("index", "chern_index", "index"),
    ("edge_4pi_j", "edge_current", "four_pi_edge_current"),
    ("winding", "winding", "winding_snap"),
    ("sigma_kubo", "kubo_sweep", "sigma"),
    ("sigma_s3", "spin_hall", "sigma_s3"),
    ("gap", "chern_realspace", "gap"),
];

/// Writes records, curve tables and the summary into `dir`.
pub fn write_outputs(cfg: &ExperimentConfig, records: &[ResultRecord], dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let json = cfg.output.formats.contains(&Format::Json);
    let csv_out = cfg.output.formats.contains(&Format::Csv);
    for r in records {
        if json {
            let path = dir.join(format!("{}.json", r.stem()));
            let text = serde_json::to_string_pretty(r).map_err(|e| io_err(&path, e))?;
            fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
        }
        if csv_out {
            for (t, name) in r.table_data.iter().zip(&r.tables) {
                let rows = t.rows.iter().map(|row| row.iter().map(|x| format!("{x:e}")).collect());
                write_csv(&dir.join(name), &t.columns, rows)?;
            }
        }
    }
    if csv_out {
        let mut seeds: Vec<Option<u64>> = Vec::new();
        for r in records {
            if !seeds.contains(&r.seed) {
                seeds.push(r.seed);
            }
        }
        let mut header: Vec<String> = ["preset", "mu", "w", "seed"].iter().map(|s| s.to_string()).collect();
        header.extend(SUMMARY.iter().map(|c| c.0.to_string()));
        header.push("all_pass".into());
        let rows = seeds.iter().map(|seed| {
            let of_seed: Vec<&ResultRecord> = records.iter().filter(|r| r.seed == *seed).collect();
            let mut row = vec![
                cfg.model.preset.clone(),
                cfg.model.mu.to_string(),
                cfg.disorder.w.to_string(),
                seed.map(|s| s.to_string()).unwrap_or_default(),
            ];
            for (_, task, key) in SUMMARY {
                let v = of_seed
                    .iter()
                    .find(|r| r.task == task)
                    .and_then(|r| r.outputs.get(key))
                    .or_else(|| of_seed.iter().find_map(|r| if key == "caz_class" { r.outputs.get(key) } else { None }));
                row.push(cell(v));
            }
            let pass = of_seed.iter().all(|r| !r.failed() && r.pass != Some(false));
            row.push(pass.to_string());
            row
        });
        write_csv(&dir.join("summary.csv"), &header, rows)?;
    }
    Ok(())
}

pub fn output_dir(cfg: &ExperimentConfig, opts: &RunOptions) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| cfg.output.directory.clone())
        .unwrap_or_else(|| PathBuf::from("bdglab-out"))
}

/// `run`: evaluates and writes; returns the records.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<ResultRecord>, RunError> {
    let records = evaluate(cfg, opts)?;
    write_outputs(cfg, &records, &output_dir(cfg, opts))?;
    Ok(records)
}

/// `sweep`: one run per value in `<out>/<axis>=<value>/` and a combined
/// long-format curve `<out>/sweep-<axis>.csv`.
pub fn sweep(cfg: &ExperimentConfig, axis: Axis, values: &[f64], opts: &RunOptions) -> Result<Vec<ResultRecord>, RunError> {
    if values.is_empty() {
        return Err(ConfigError("the sweep has no values".into()).into());
    }
    let configs = values
        .iter()
        .map(|&v| cfg.with_axis(axis, v))
        .collect::<Result<Vec<_>, _>>()?;
    let root = output_dir(cfg, opts);
    let mut all = Vec::new();
    let mut rows = Vec::new();
    for (c, v) in configs.iter().zip(values) {
        let mut records = evaluate(c, opts)?;
        for r in &mut records {
            r.parameters.insert(format!("sweep_{}", axis.name()), num(*v));
        }
        write_outputs(c, &records, &root.join(format!("{}={v}", axis.name())))?;
        for r in &records {
            for (k, x) in &r.outputs {
                if x.is_number() || x.is_boolean() {
                    rows.push(vec![
                        v.to_string(),
                        r.task.clone(),
                        r.seed.map(|s| s.to_string()).unwrap_or_default(),
                        k.clone(),
                        x.to_string(),
                    ]);
                }
            }
        }
        all.extend(records);
    }
    let header: Vec<String> = [axis.name(), "task", "seed", "quantity", "value"].iter().map(|s| s.to_string()).collect();
    write_csv(&root.join(format!("sweep-{}.csv", axis.name())), &header, rows)?;
    Ok(all)
}

/// Process exit status for a finished run: 0 when every task ran, 3 when
/// any task hit a numerical or precondition failure.
pub fn exit_status(records: &[ResultRecord]) -> i32 {
    if records.iter().any(ResultRecord::failed) {
        3
    } else {
        0
    }
}
