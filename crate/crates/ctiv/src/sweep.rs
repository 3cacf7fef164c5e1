//! Parallel benchmark sweeps over designs, sample sizes and seeds.

use std::fmt::Write as _;
use std::path::Path;

use ctiv_core::bench::{run_cell, summarize, BenchResult, CellSummary};
use ctiv_core::synth::Design;
use ctiv_core::GrowthConfig;
use rayon::prelude::*;

use crate::error::{CliError, Result};

/// A cell that failed, kept out of the aggregates.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CellFailure {
    /// Design or scenario.
    pub design: Design,
    /// Sample size.
    pub n: usize,
    /// Seed.
    pub seed: u64,
    /// Error text.
    pub error: String,
}

/// All cells of a sweep plus their aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    /// Successful cells, ordered by design, size, seed.
    pub results: Vec<BenchResult>,
    /// Failed cells.
    pub failures: Vec<CellFailure>,
    /// Per `(design, n)` aggregates.
    pub summary: Vec<CellSummary>,
}

/// Runs every `(design, n, seed)` cell in parallel.
pub fn run_sweep(
    designs: &[Design],
    sizes: &[usize],
    seeds: &[u64],
    growth: &GrowthConfig,
) -> Sweep {
    let cells: Vec<(Design, usize, u64)> = designs
        .iter()
        .flat_map(|&d| {
            sizes
                .iter()
                .flat_map(move |&n| seeds.iter().map(move |&s| (d, n, s)))
        })
        .collect();
    let outcomes: Vec<_> = cells
        .par_iter()
        .map(|&(d, n, s)| (d, n, s, run_cell(d, n, s, growth)))
        .collect();
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (design, n, seed, outcome) in outcomes {
        match outcome {
            Ok(r) => results.push(r),
            Err(e) => failures.push(CellFailure {
                design,
                n,
                seed,
                error: e.to_string(),
            }),
        }
    }
    let summary = summarize(&results);
    Sweep {
        results,
        failures,
        summary,
    }
}

/// Writes one CSV row per successful cell.
pub fn write_results_csv(path: &Path, results: &[BenchResult]) -> Result<()> {
    let mut out = csv::Writer::from_path(path)?;
    out.write_record([
        "design",
        "n",
        "seed",
        "mse_ct",
        "mse_ctiv",
        "relative_gap_pct",
        "weak_leaves",
        "ct_leaves",
        "ctiv_leaves",
        "excluded",
    ])?;
    for r in results {
        out.write_record([
            r.design.label().to_string(),
            r.n.to_string(),
            r.seed.to_string(),
            r.mse_ct.to_string(),
            r.mse_ctiv.to_string(),
            r.relative_gap_pct.to_string(),
            r.weak_leaves.to_string(),
            r.ct_leaves.to_string(),
            r.ctiv_leaves.to_string(),
            r.excluded.to_string(),
        ])?;
    }
    out.flush().map_err(|e| CliError::io(path, e))
}

fn design_name(d: Design) -> String {
    match d {
        Design::WeakInstrument => "Scenario 1".into(),
        Design::ExclusionViolation => "Scenario 2".into(),
        other => format!("Design {}", other.label()),
    }
}

/// Design × size table with three rows per design: mean CT-IV MSE, mean CT
/// MSE and the mean relative gap (± standard deviation across seeds).
pub fn summary_table(summary: &[CellSummary]) -> String {
    let mut sizes: Vec<usize> = summary.iter().map(|c| c.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut designs: Vec<Design> = summary.iter().map(|c| c.design).collect();
    designs.sort();
    designs.dedup();
    let find = |d: Design, n: usize| summary.iter().find(|c| c.design == d && c.n == n);

    let mut rows: Vec<[String; 2]> = Vec::new();
    let mut cells: Vec<Vec<String>> = Vec::new();
    for &d in &designs {
        let name = design_name(d);
        let line = |f: &dyn Fn(&CellSummary) -> String| -> Vec<String> {
            sizes
                .iter()
                .map(|&n| find(d, n).map_or("-".into(), f))
                .collect()
        };
        rows.push([name.clone(), "MSE (CT-IV)".into()]);
        cells.push(line(&|c| {
            format!("{:.3} ± {:.3}", c.mse_ctiv_mean, c.mse_ctiv_sd)
        }));
        rows.push([String::new(), "MSE (CT)".into()]);
        cells.push(line(&|c| {
            format!("{:.3} ± {:.3}", c.mse_ct_mean, c.mse_ct_sd)
        }));
        rows.push([String::new(), "Relative Gap".into()]);
        cells.push(line(&|c| format!("{:.1}% ± {:.1}", c.gap_mean, c.gap_sd)));
    }
    let header: Vec<String> = sizes.iter().map(|n| format!("N = {n}")).collect();
    let w0 = rows
        .iter()
        .map(|r| r[0].len())
        .chain(["Design".len()])
        .max()
        .unwrap_or(0);
    let w1 = rows
        .iter()
        .map(|r| r[1].len())
        .chain(["Approach".len()])
        .max()
        .unwrap_or(0);
    let widths: Vec<usize> = (0..sizes.len())
        .map(|j| {
            cells
                .iter()
                .map(|c| c[j].chars().count())
                .chain([header[j].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();

    let mut s = String::new();
    let _ = write!(s, "{:<w0$}  {:<w1$}", "Design", "Approach");
    for (h, w) in header.iter().zip(&widths) {
        let _ = write!(s, "  {h:>w$}");
    }
    s.push('\n');
    let rule = w0 + 2 + w1 + widths.iter().map(|w| w + 2).sum::<usize>();
    let _ = writeln!(s, "{}", "-".repeat(rule));
    for (r, c) in rows.iter().zip(&cells) {
        let _ = write!(s, "{:<w0$}  {:<w1$}", r[0], r[1]);
        for (v, w) in c.iter().zip(&widths) {
            let pad = w.saturating_sub(v.chars().count());
            let _ = write!(s, "  {}{v}", " ".repeat(pad));
        }
        s.push('\n');
    }
    s
}
