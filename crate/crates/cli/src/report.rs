//! The `stats` subcommand: pairwise Mann-Whitney tests per cell and a
//! Friedman/Nemenyi comparison across cells.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use streamal::experiment::RunRow;
use streamal::stats::{friedman_nemenyi, mann_whitney_u};

/// Position of each factor inside a run id.
const FACTORS: [&str; 7] = ["stream", "budget", "delay", "strategy", "estimator", "detector", "schedule"];

pub fn factor_index(name: &str) -> Result<usize, String> {
    FACTORS
        .iter()
        .position(|f| *f == name)
        .ok_or_else(|| format!("unknown factor '{name}' (expected one of {FACTORS:?})"))
}

pub fn metric(row: &RunRow, name: &str) -> Result<f64, String> {
    match name {
        "accuracy" => Ok(row.accuracy),
        "query_rate" => Ok(row.query_rate),
        "h_score" => Ok(row.h_score.unwrap_or(0.0)),
        other => Err(format!("unknown metric '{other}' (expected accuracy, query_rate or h_score)")),
    }
}

/// `cell -> level -> values`, where the cell is the run id without the factor.
type Groups = BTreeMap<String, BTreeMap<String, Vec<f64>>>;

fn group(rows: &[RunRow], factor: usize, metric_name: &str) -> Result<Groups, String> {
    let mut groups = Groups::new();
    for row in rows {
        let mut parts: Vec<&str> = row.run_id.split('|').collect();
        if parts.len() != FACTORS.len() {
            return Err(format!("malformed run id '{}'", row.run_id));
        }
        let level = parts.remove(factor).to_string();
        groups
            .entry(parts.join("|"))
            .or_default()
            .entry(level)
            .or_default()
            .push(metric(row, metric_name)?);
    }
    Ok(groups)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn render(rows: &[RunRow], by: &str, metric_name: &str) -> Result<String, String> {
    let factor = factor_index(by)?;
    let groups = group(rows, factor, metric_name)?;
    let mut out = String::new();
    let _ = writeln!(out, "{} runs, factor {by}, metric {metric_name}", rows.len());
    let _ = writeln!(out, "\nMann-Whitney U per cell (two-sided)");
    let _ = writeln!(out, "cell\tlevel_a\tmean_a\tlevel_b\tmean_b\tU\tp");
    for (cell, levels) in &groups {
        let names: Vec<&String> = levels.keys().collect();
        for i in 0..names.len() {
            for j in i + 1..names.len() {
                let (a, b) = (&levels[names[i]], &levels[names[j]]);
                let mw = mann_whitney_u(a, b).map_err(|e| e.to_string())?;
                let _ = writeln!(
                    out,
                    "{cell}\t{}\t{:.4}\t{}\t{:.4}\t{}\t{:.4}",
                    names[i],
                    mean(a),
                    names[j],
                    mean(b),
                    mw.u,
                    mw.p
                );
            }
        }
    }

    // Friedman needs every level in every cell.
    let levels: Vec<String> = {
        let mut all: Vec<String> = groups.values().flat_map(|l| l.keys().cloned()).collect();
        all.sort();
        all.dedup();
        all
    };
    let complete: Vec<&BTreeMap<String, Vec<f64>>> = groups
        .values()
        .filter(|l| levels.iter().all(|name| l.contains_key(name)))
        .collect();
    let _ = writeln!(out, "\nFriedman/Nemenyi over {} complete cells", complete.len());
    if levels.len() < 2 || complete.len() < 2 {
        let _ = writeln!(out, "skipped: needs at least two levels and two complete cells");
        return Ok(out);
    }
    let scores: Vec<Vec<f64>> = levels
        .iter()
        .map(|name| complete.iter().map(|l| mean(&l[name])).collect())
        .collect();
    let f = friedman_nemenyi(&scores).map_err(|e| e.to_string())?;
    let _ = writeln!(out, "chi2={:.4} p={:.4} CD={:.4}", f.chi2, f.p, f.critical_difference);
    for (name, rank) in levels.iter().zip(&f.mean_ranks) {
        let _ = writeln!(out, "{name}\tmean rank {rank:.3}");
    }
    Ok(out)
}
