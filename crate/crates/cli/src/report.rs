//! Machine-readable output: JSON documents for single runs, CSV tables for
//! benchmark sweeps.

use std::io::Write;

use causal_order::{DataMatrix, MiEstimate, OrderResult, TrialOutcome, TrialRecord};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct OrderReport {
    pub order: Vec<String>,
    pub total_cost: f64,
    pub edges: Vec<EdgeReport>,
    pub mi_evaluations: u64,
    pub nodes_expanded: u64,
    pub method: String,
    pub elapsed_ms: f64,
}

#[derive(Debug, Serialize)]
pub struct EdgeReport {
    pub chosen: String,
    pub remaining: Vec<String>,
    pub mi: f64,
    pub mi_raw: f64,
    pub clamped: bool,
}

impl OrderReport {
    pub fn new(data: &DataMatrix, result: &OrderResult, elapsed_ms: f64) -> Self {
        let name = |i: usize| data.name(i).to_string();
        Self {
            order: result.order.iter().map(|&i| name(i)).collect(),
            total_cost: result.total_cost,
            edges: result
                .edge_weights
                .iter()
                .map(|e| EdgeReport {
                    chosen: name(e.chosen),
                    remaining: causal_order::mask_indices(e.remaining).map(name).collect(),
                    mi: e.mi.value,
                    mi_raw: e.mi.raw,
                    clamped: e.mi.clamped,
                })
                .collect(),
            mi_evaluations: result.mi_evaluations,
            nodes_expanded: result.nodes_expanded,
            method: result.method.to_string(),
            elapsed_ms,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct MiReport {
    pub value: f64,
    pub raw: f64,
    pub clamped: bool,
}

impl From<MiEstimate> for MiReport {
    fn from(e: MiEstimate) -> Self {
        Self { value: e.value, raw: e.raw, clamped: e.clamped }
    }
}

/// 17 significant digits: enough to reproduce any f64 bit-exactly.
pub fn float_field(v: f64) -> String {
    format!("{v:.16e}")
}

pub const BENCH_HEADER: &str = "p,n,preset,trial,method,criterion_a,criterion_b,mi_evals,seconds,status";

pub fn write_bench_csv(out: &mut impl Write, records: &[TrialRecord]) -> std::io::Result<()> {
    writeln!(out, "{BENCH_HEADER}")?;
    for r in records {
        match &r.outcome {
            TrialOutcome::Ok { criterion_a, criterion_b, mi_evaluations, seconds } => writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},ok",
                r.p,
                r.n,
                r.preset,
                r.trial,
                r.method,
                criterion_a,
                float_field(*criterion_b),
                mi_evaluations,
                float_field(*seconds),
            )?,
            TrialOutcome::Failed { seconds, .. } => writeln!(
                out,
                "{},{},{},{},{},,,,{},failed",
                r.p,
                r.n,
                r.preset,
                r.trial,
                r.method,
                float_field(*seconds),
            )?,
        }
    }
    Ok(())
}

/// Per-(cell, method) arithmetic means over the successful trials.
pub fn write_bench_summary(out: &mut impl Write, records: &[TrialRecord]) -> std::io::Result<()> {
    let mut keys: Vec<(usize, usize, String, String)> = Vec::new();
    for r in records {
        let key = (r.p, r.n, r.preset.to_string(), r.method.to_string());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    for (p, n, preset, method) in keys {
        let group: Vec<&TrialRecord> = records
            .iter()
            .filter(|r| {
                r.p == p && r.n == n && r.preset.to_string() == preset && r.method.to_string() == method
            })
            .collect();
        let ok: Vec<(f64, f64)> = group
            .iter()
            .filter_map(|r| match &r.outcome {
                TrialOutcome::Ok { criterion_a, criterion_b, .. } => {
                    Some((*criterion_a as f64, *criterion_b))
                }
                _ => None,
            })
            .collect();
        let failed = group.len() - ok.len();
        if ok.is_empty() {
            writeln!(out, "p={p} n={n} preset={preset} method={method}: all {failed} trials failed")?;
        } else {
            let mean_a = ok.iter().map(|s| s.0).sum::<f64>() / ok.len() as f64;
            let mean_b = ok.iter().map(|s| s.1).sum::<f64>() / ok.len() as f64;
            writeln!(
                out,
                "p={p} n={n} preset={preset} method={method}: mean_criterion_a={mean_a:.4} mean_criterion_b={mean_b:.4} trials={} failed={failed}",
                group.len(),
            )?;
        }
    }
    Ok(())
}
