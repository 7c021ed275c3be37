//! Consolidates finished runs into one table per bound family plus log-log
//! plot-data files.

use crate::emit::{read_manifest, Csv};
use crate::runner::RunError;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

fn get<'a>(entries: &'a [(String, String)], key: &str) -> Option<&'a str> {
    entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

/// Merges manifests into `theorem_table.csv` (grouped and sorted) and emits
/// one `plot-<hash>.csv` of `(log2(1/epsilon), log2 average)` pairs per run
/// that carries a summary.
pub fn report(dirs: &[PathBuf], out: &Path) -> Result<(), RunError> {
    fs::create_dir_all(out)?;
    let mut rows: BTreeMap<(String, String, String), Vec<String>> = BTreeMap::new();
    let mut plots = Vec::new();
    for dir in dirs {
        let manifest_path = dir.join("manifest.txt");
        if !manifest_path.exists() {
            return Err(RunError::Io(format!("missing manifest in {}", dir.display())));
        }
        let entries = read_manifest(&manifest_path)?;
        let theorem = get(&entries, "theorem").unwrap_or("estimator").to_string();
        let label = get(&entries, "label").unwrap_or("?").to_string();
        let hash = get(&entries, "config_hash").unwrap_or("?").to_string();
        let predicted = get(&entries, "predicted").unwrap_or("").to_string();
        let fitted = get(&entries, "fitted_slope")
            .or_else(|| get(&entries, "slope"))
            .unwrap_or("")
            .to_string();
        let residual = get(&entries, "residual").unwrap_or("").to_string();
        let verdict = get(&entries, "verdict").unwrap_or("informational").to_string();
        rows.insert(
            (theorem.clone(), label.clone(), hash.clone()),
            vec![theorem, label, predicted, fitted, residual, verdict],
        );
        let summary = dir.join("summary.csv");
        if summary.exists() {
            if let Some(plot) = plot_points(&summary)? {
                let name = format!("plot-{hash}.csv");
                fs::write(out.join(&name), plot)?;
                plots.push(name);
            }
        }
    }
    let mut table = Csv::new(
        "theorem_table.csv",
        "theorem,construction,predicted_exponent,fitted_slope,residual,verdict",
    );
    for (_, row) in rows {
        table.row(&row);
    }
    table.write_to(out)?;
    println!("wrote {}", out.join("theorem_table.csv").display());
    Ok(())
}

/// Extracts `(x, y) = (j, log2 average)` pairs from an experiment summary;
/// returns `None` for summaries without an average column.
fn plot_points(summary: &Path) -> Result<Option<String>, RunError> {
    let text = fs::read_to_string(summary)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let j_col = header.iter().position(|&h| h == "j");
    let avg_col = header.iter().position(|&h| h == "average");
    let (Some(j_col), Some(avg_col)) = (j_col, avg_col) else {
        return Ok(None);
    };
    let mut out = String::from("x,y\n");
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() <= j_col.max(avg_col) {
            continue;
        }
        let x: f64 = fields[j_col].parse().unwrap_or(f64::NAN);
        let y: f64 = fields[avg_col].parse().unwrap_or(f64::NAN);
        if y > 0.0 {
            out.push_str(&format!("{x},{}\n", y.log2()));
        }
    }
    Ok(Some(out))
}
