//! Run-directory files: `convergence.csv`, `timing.csv` and `summary.json`.

use std::path::Path;

use gosurr_core::driver::{AdaptiveState, IterationRecord, StopReason};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::format::{f17, write_atomic};

pub const CONVERGENCE: &str = "convergence.csv";
pub const TIMING: &str = "timing.csv";
pub const SUMMARY: &str = "summary.json";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const CONFIG: &str = "config.json";

fn csv_bytes(header: Vec<String>, rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

/// One row per iteration; the error column appears when a reference value
/// is known.
pub fn convergence_csv(records: &[IterationRecord], levels: usize, reference: Option<f64>) -> Vec<u8> {
    let mut header = vec!["iteration".to_string()];
    header.extend((1..=levels).map(|l| format!("evals_level_{l}")));
    header.extend(["integral_plain", "integral_enhanced", "error_estimate"].map(String::from));
    if reference.is_some() {
        header.push("abs_error".into());
    }
    header.extend(
        ["global_indicator", "gamma", "cells", "p_refined", "level_refined", "h_refined"].map(String::from),
    );
    let rows = records
        .iter()
        .map(|r| {
            let mut row = vec![r.k.to_string()];
            row.extend(r.evaluations.iter().map(|e| e.to_string()));
            row.extend([f17(r.integral_plain), f17(r.integral_enhanced), f17(r.error_estimate)]);
            if let Some(v) = reference {
                row.push(f17((r.integral_enhanced - v).abs()));
            }
            row.extend([f17(r.global_indicator), f17(r.gamma)]);
            row.extend([r.cells, r.p_refined, r.level_refined, r.h_refined].map(|c| c.to_string()));
            row
        })
        .collect();
    csv_bytes(header, rows)
}

pub fn write_convergence(dir: &Path, records: &[IterationRecord], levels: usize, reference: Option<f64>) -> CliResult<()> {
    write_atomic(&dir.join(CONVERGENCE), &convergence_csv(records, levels, reference))
}

/// Appends `k,seconds` to the timing file, creating it with a header.
pub fn append_timing(dir: &Path, k: usize, seconds: f64) -> CliResult<()> {
    use std::io::Write;
    let path = dir.join(TIMING);
    let fresh = !path.exists();
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| CliError::io(&path, e))?;
    let mut line = String::new();
    if fresh {
        line.push_str("iteration,wall_seconds\n");
    }
    line.push_str(&format!("{k},{}\n", f17(seconds)));
    f.write_all(line.as_bytes()).map_err(|e| CliError::io(&path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub problem: String,
    pub model: String,
    pub target: String,
    pub seed: u64,
    pub iterations: usize,
    pub stop_reason: Option<StopReason>,
    pub integral_enhanced: f64,
    pub integral_plain: f64,
    pub error_estimate: f64,
    pub cells: usize,
    pub evaluations: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_error: Option<f64>,
}

impl Summary {
    pub fn of(state: &AdaptiveState, problem: &str, model: &str, target: &str, seed: u64, reference: Option<f64>) -> Option<Self> {
        let last = state.last()?;
        Some(Summary {
            problem: problem.into(),
            model: model.into(),
            target: target.into(),
            seed,
            iterations: last.k,
            stop_reason: state.stopped,
            integral_enhanced: last.integral_enhanced,
            integral_plain: last.integral_plain,
            error_estimate: last.error_estimate,
            cells: last.cells,
            evaluations: last.evaluations.clone(),
            reference,
            abs_error: reference.map(|r| (last.integral_enhanced - r).abs()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(k: usize) -> IterationRecord {
        IterationRecord {
            k,
            evaluations: vec![50, k],
            integral_plain: -0.5,
            integral_enhanced: -0.6,
            error_estimate: -0.1,
            global_indicator: 0.25,
            gamma: 1.0,
            cells: 50,
            p_refined: 1,
            level_refined: 2,
            h_refined: 3,
            acceptance_plain: 0.3,
            acceptance_enhanced: 0.3,
        }
    }

    #[test]
    fn layout() {
        let text = String::from_utf8(convergence_csv(&[rec(0), rec(1)], 2, Some(-0.60178))).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[0],
            "iteration,evals_level_1,evals_level_2,integral_plain,integral_enhanced,error_estimate,abs_error,global_indicator,gamma,cells,p_refined,level_refined,h_refined"
        );
        assert!(lines[2].starts_with("1,50,1,-5.0000000000000000e-1,-5.9999999999999998e-1,"));
        let no_ref = String::from_utf8(convergence_csv(&[rec(0)], 2, None)).unwrap();
        assert!(!no_ref.contains("abs_error"));
    }
}
