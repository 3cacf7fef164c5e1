//! Per-leaf effect reports: a CSV with one row per leaf and a transposed
//! text table with one column per leaf.

use std::fmt::Write as _;
use std::path::Path;

use ctiv_core::CausalTree;

use crate::error::{CliError, Result};

/// Columns of the leaf CSV.
pub const LEAF_COLUMNS: [&str; 12] = [
    "node_id",
    "n",
    "share_pct",
    "itt_hat",
    "pi_c_hat",
    "cace_hat",
    "cace_se",
    "tsls_cace",
    "first_stage_f",
    "weak_instrument",
    "compliers_ok",
    "covariate_adjusted",
];

/// Writes the leaf CSV.
pub fn write_leaf_csv(path: &Path, tree: &CausalTree) -> Result<()> {
    let mut out = csv::Writer::from_path(path)?;
    out.write_record(LEAF_COLUMNS)?;
    let total = tree.root.payload.n.max(1) as f64;
    for l in tree.leaves() {
        out.write_record([
            l.leaf_id.to_string(),
            l.n.to_string(),
            (100.0 * l.n as f64 / total).to_string(),
            l.itt_hat.to_string(),
            l.pi_c_hat.to_string(),
            l.cace_hat.to_string(),
            l.cace_se.to_string(),
            l.tsls_cace.to_string(),
            l.first_stage_f.to_string(),
            u8::from(l.weak_instrument()).to_string(),
            u8::from(l.compliers_ok).to_string(),
            u8::from(l.covariate_adjusted).to_string(),
        ])?;
    }
    out.flush().map_err(|e| CliError::io(path, e))
}

fn cell(v: f64, digits: usize) -> String {
    if v.is_finite() {
        format!("{v:.digits$}")
    } else {
        "-".into()
    }
}

/// Aligned text table, leaves as columns.
pub fn leaf_table(tree: &CausalTree) -> String {
    let leaves = tree.leaves();
    let total = tree.root.payload.n.max(1) as f64;
    let iv = tree.regime.uses_instrument();
    let mut rows: Vec<(&str, Vec<String>)> = vec![
        (
            "Node #j",
            leaves.iter().map(|l| format!("#{}", l.leaf_id)).collect(),
        ),
        (
            "Share %",
            leaves
                .iter()
                .map(|l| cell(100.0 * l.n as f64 / total, 1))
                .collect(),
        ),
        ("ITT", leaves.iter().map(|l| cell(l.itt_hat, 3)).collect()),
    ];
    if iv {
        rows.push(("pi_C", leaves.iter().map(|l| cell(l.pi_c_hat, 3)).collect()));
        rows.push(("CACE", leaves.iter().map(|l| cell(l.cace_hat, 3)).collect()));
        rows.push((
            "S.E. CACE",
            leaves.iter().map(|l| cell(l.cace_se, 3)).collect(),
        ));
        rows.push((
            "First-stage F",
            leaves.iter().map(|l| cell(l.first_stage_f, 1)).collect(),
        ));
        rows.push((
            "Weak",
            leaves
                .iter()
                .map(|l| if l.weak_instrument() { "yes" } else { "no" }.to_string())
                .collect(),
        ));
    }
    let label_width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    let widths: Vec<usize> = (0..leaves.len())
        .map(|j| rows.iter().map(|r| r.1[j].len()).max().unwrap_or(0))
        .collect();
    let mut s = String::new();
    for (label, cells) in &rows {
        let _ = write!(s, "{label:<label_width$}");
        for (c, w) in cells.iter().zip(&widths) {
            let _ = write!(s, "  {c:>w$}");
        }
        s.push('\n');
    }
    s
}
