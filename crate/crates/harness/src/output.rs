//! Run directories: one CSV of records per repeat plus `run.toml`.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::runner::{RepeatOutcome, RunRecord};

/// Column holding the per-round wall clock; excluded from replay checks.
pub const WALL_CLOCK_COLUMN: &str = "wall_clock_s";

pub fn repeat_csv_path(dir: &Path, repeat: usize) -> PathBuf {
    dir.join(format!("repeat_{repeat:03}.csv"))
}

fn header(dim: usize) -> Vec<String> {
    let mut h: Vec<String> = ["repeat", "round", "eval"].iter().map(|s| s.to_string()).collect();
    h.extend((0..dim).map(|i| format!("x{i}")));
    h.extend(["value", "best", "accept_rate", WALL_CLOCK_COLUMN].iter().map(|s| s.to_string()));
    h
}

pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    let dim = records.first().map_or(0, |r| r.point.len());
    let csv_err = |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header(dim)).map_err(csv_err)?;
    for r in records {
        let mut row = vec![r.repeat.to_string(), r.round.to_string(), r.eval_index.to_string()];
        row.extend(r.point.iter().map(|v| v.to_string()));
        row.push(r.value.to_string());
        row.push(r.best_so_far.to_string());
        row.push(r.accept_rate.map(|a| a.to_string()).unwrap_or_default());
        row.push(format!("{:.6}", r.wall_clock));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let csv_err = |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let parse_err = |message: String| HarnessError::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?.clone();
    let dim = headers.iter().filter(|h| h.starts_with('x')).count();
    if headers.len() != dim + 7 {
        return Err(parse_err("unexpected column layout".into()));
    }
    let mut out = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let bad = |what: &str| parse_err(format!("row {}: bad {what}", line + 2));
        let int = |i: usize, what: &str| row[i].parse::<usize>().map_err(|_| bad(what));
        let num = |i: usize, what: &str| row[i].parse::<f64>().map_err(|_| bad(what));
        let point = (0..dim).map(|j| num(3 + j, "coordinate")).collect::<Result<Vec<_>>>()?;
        let accept = &row[dim + 5];
        out.push(RunRecord {
            repeat: int(0, "repeat")?,
            round: int(1, "round")?,
            eval_index: int(2, "eval")?,
            point,
            value: num(dim + 3, "value")?,
            best_so_far: num(dim + 4, "best")?,
            accept_rate: if accept.is_empty() { None } else { Some(accept.parse().map_err(|_| bad("accept_rate"))?) },
            wall_clock: num(dim + 6, "wall clock")?,
        });
    }
    Ok(out)
}

/// All `repeat_*.csv` files in `dir`, sorted by name.
pub fn repeat_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| HarnessError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("repeat_") && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    Ok(files)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RepeatMeta {
    pub index: usize,
    pub seed: u64,
    pub status: String,
    pub evaluations: usize,
    pub best_value: Option<f64>,
    pub rounds: usize,
    pub restarts: usize,
    pub transitions: u64,
    pub lengthscales: Vec<f64>,
    pub outputscale: Option<f64>,
    pub noise_variance: Option<f64>,
    pub error: Option<String>,
}

impl RepeatMeta {
    pub fn ok(o: &RepeatOutcome) -> Self {
        Self {
            index: o.repeat,
            seed: o.seed,
            status: "ok".into(),
            evaluations: o.records.len(),
            best_value: Some(o.best_value()),
            rounds: o.rounds,
            restarts: o.restarts,
            transitions: o.transitions_run,
            lengthscales: o.kernel.lengthscales.clone(),
            outputscale: Some(o.kernel.outputscale),
            noise_variance: Some(o.noise_variance),
            error: None,
        }
    }

    pub fn failed(index: usize, seed: u64, err: &HarnessError) -> Self {
        Self {
            index,
            seed,
            status: "failed".into(),
            evaluations: 0,
            best_value: None,
            rounds: 0,
            restarts: 0,
            transitions: 0,
            lengthscales: Vec::new(),
            outputscale: None,
            noise_variance: None,
            error: Some(err.to_string()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub created_unix: u64,
    pub config: RunConfig,
    pub repeats: Vec<RepeatMeta>,
}

impl RunMetadata {
    pub fn new(config: &RunConfig, repeats: Vec<RepeatMeta>) -> Self {
        Self {
            tool: "mcbo".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            core_version: mcbo::VERSION.into(),
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            config: config.clone(),
            repeats,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("run.toml");
        let text = toml::to_string(self).map_err(|e| HarnessError::Parse {
            path: path.clone(),
            message: e.to_string(),
        })?;
        std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("run.toml");
        let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        toml::from_str(&text).map_err(|e| HarnessError::Parse {
            path,
            message: e.to_string().lines().next().unwrap_or("").to_string(),
        })
    }
}

/// CSV text with the wall-clock column removed, for replay comparisons.
pub fn strip_wall_clock(csv_text: &str) -> String {
    let mut out = String::with_capacity(csv_text.len());
    for line in csv_text.lines() {
        match line.rfind(',') {
            Some(i) => out.push_str(&line[..i]),
            None => out.push_str(line),
        }
        out.push('\n');
    }
    out
}
