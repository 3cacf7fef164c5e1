//! Graphviz and JSON renderings of a fitted tree.

use std::fmt::Write;

use ctiv_core::CausalTree;

use crate::error::Result;

fn fill(itt: f64, scale: f64) -> String {
    if !itt.is_finite() || scale <= 0.0 {
        return "#f0f0f0".into();
    }
    // white at zero, saturating toward green (positive) or red (negative)
    let t = (itt.abs() / scale).min(1.0);
    let fade = |full: u8| (255.0 - t * (255.0 - f64::from(full))).round() as u8;
    let (r, g, b) = if itt >= 0.0 {
        (fade(116), fade(196), fade(118))
    } else {
        (fade(251), fade(106), fade(74))
    };
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Graphviz DOT text: every node shows its number, ITT estimate and share of
/// estimation units; internal nodes also name their split variable and edges
/// carry the threshold.
pub fn to_dot(tree: &CausalTree) -> String {
    let total = tree.root.payload.n.max(1) as f64;
    let nodes = tree.root.nodes();
    let scale = nodes
        .iter()
        .map(|n| n.payload.itt_hat.abs())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let mut s = String::from("digraph ctiv {\n");
    s.push_str("  node [shape=box, style=\"rounded,filled\", fontname=\"Helvetica\"];\n");
    s.push_str("  edge [fontname=\"Helvetica\"];\n");
    for node in &nodes {
        let p = &node.payload;
        let mut label = format!(
            "#{}\\nITT = {:.3}\\n{:.1}%",
            node.id,
            p.itt_hat,
            100.0 * p.n as f64 / total
        );
        if let Some(split) = &node.split {
            let _ = write!(label, "\\n{}", feature_name(tree, split.feature));
        }
        let _ = writeln!(
            s,
            "  {} [label=\"{}\", fillcolor=\"{}\"];",
            node.id,
            label,
            fill(p.itt_hat, scale)
        );
    }
    for node in &nodes {
        if let Some(split) = &node.split {
            let _ = writeln!(
                s,
                "  {} -> {} [label=\"<= {}\"];",
                node.id, split.left.id, split.threshold
            );
            let _ = writeln!(
                s,
                "  {} -> {} [label=\"> {}\"];",
                node.id, split.right.id, split.threshold
            );
        }
    }
    s.push_str("}\n");
    s
}

fn feature_name(tree: &CausalTree, j: usize) -> String {
    tree.feature_names
        .get(j)
        .cloned()
        .unwrap_or_else(|| format!("x{}", j + 1))
}

/// Pretty-printed JSON of the whole fit. Floats are written in shortest
/// round-trip form, so import followed by export reproduces the bytes.
pub fn to_json(tree: &CausalTree) -> Result<String> {
    let mut s = serde_json::to_string_pretty(tree)?;
    s.push('\n');
    Ok(s)
}

/// Parses [`to_json`] output.
pub fn from_json(text: &str) -> Result<CausalTree> {
    Ok(serde_json::from_str(text)?)
}
