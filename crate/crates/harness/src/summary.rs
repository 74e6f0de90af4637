//! Across-repeat statistics of best-so-far traces.

use std::path::Path;

use crate::error::{HarnessError, Result};
use crate::output::{read_records, repeat_files};

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub eval_index: usize,
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub q20: f64,
    pub q50: f64,
    pub q80: f64,
}

/// Quantile of sorted data with linear interpolation between order
/// statistics (position `q·(n − 1)`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Per-evaluation statistics over repeats. Traces may differ in length;
/// each index uses the repeats that reached it.
pub fn summarize(traces: &[Vec<f64>]) -> Vec<SummaryRow> {
    let len = traces.iter().map(Vec::len).max().unwrap_or(0);
    (0..len)
        .map(|i| {
            let mut vals: Vec<f64> = traces.iter().filter_map(|t| t.get(i).copied()).collect();
            vals.sort_by(f64::total_cmp);
            let n = vals.len();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let stderr = if n > 1 {
                (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt() / (n as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                eval_index: i,
                n,
                mean,
                stderr,
                q20: quantile_sorted(&vals, 0.2),
                q50: quantile_sorted(&vals, 0.5),
                q80: quantile_sorted(&vals, 0.8),
            }
        })
        .collect()
}

/// Best-so-far trace of every repeat CSV in `dir`.
pub fn load_traces(dir: &Path) -> Result<Vec<Vec<f64>>> {
    let files = repeat_files(dir)?;
    if files.is_empty() {
        return Err(HarnessError::NoData(dir.to_path_buf()));
    }
    files
        .iter()
        .map(|f| Ok(read_records(f)?.into_iter().map(|r| r.best_so_far).collect()))
        .collect()
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let csv_err = |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["eval", "n", "mean", "stderr", "q20", "q50", "q80"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.eval_index.to_string(),
            r.n.to_string(),
            r.mean.to_string(),
            r.stderr.to_string(),
            r.q20.to_string(),
            r.q50.to_string(),
            r.q80.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_repeat_quantiles_equal_trace() {
        let rows = summarize(&[vec![-3.0, -2.0, -1.0]]);
        for (r, v) in rows.iter().zip([-3.0, -2.0, -1.0]) {
            assert_eq!((r.mean, r.stderr, r.q20, r.q50, r.q80), (v, 0.0, v, v, v));
        }
    }

    #[test]
    fn constant_repeats() {
        let rows = summarize(&vec![vec![2.5; 4]; 6]);
        assert!(rows.iter().all(|r| r.mean == 2.5 && r.stderr == 0.0 && r.n == 6));
    }

    #[test]
    fn quantiles_match_order_statistics() {
        // values 1..=10: positions 1.8, 4.5, 7.2 (zero-based)
        let traces: Vec<Vec<f64>> = [7.0, 3.0, 10.0, 1.0, 5.0, 9.0, 2.0, 8.0, 4.0, 6.0].iter().map(|&v| vec![v]).collect();
        let r = &summarize(&traces)[0];
        assert!((r.q20 - 2.8).abs() < 1e-12);
        assert!((r.q50 - 5.5).abs() < 1e-12);
        assert!((r.q80 - 8.2).abs() < 1e-12);
        assert!((r.mean - 5.5).abs() < 1e-12);
        // sample sd of 1..=10 is √(55/6)
        assert!((r.stderr - (55.0f64 / 6.0).sqrt() / 10f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ragged_traces_use_available_repeats() {
        let rows = summarize(&[vec![1.0, 2.0], vec![3.0]]);
        assert_eq!(rows[0].n, 2);
        assert_eq!(rows[1].n, 1);
        assert_eq!(rows[1].mean, 2.0);
    }
}
