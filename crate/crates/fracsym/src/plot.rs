//! Gnuplot script emission for run directories.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

pub const PLOT_FILE: &str = "plot.gp";

/// Snapshot steps `k` of the `t_<k>.csv` files in `dir`.
fn snapshot_steps(dir: &Path) -> Result<Vec<usize>> {
    let mut steps = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(k) = name.strip_prefix("t_").and_then(|s| s.strip_suffix(".csv")).and_then(|s| s.parse().ok()) {
            steps.push(k);
        }
    }
    steps.sort_unstable();
    Ok(steps)
}

/// Subdirectories holding snapshots, or `run_dir` itself.
fn series(run_dir: &Path) -> Result<Vec<(String, Vec<usize>)>> {
    let mut found = Vec::new();
    let mut subdirs: Vec<PathBuf> = std::fs::read_dir(run_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    for dir in subdirs {
        let steps = snapshot_steps(&dir)?;
        if !steps.is_empty() {
            let name = dir.file_name().expect("entry has a name").to_string_lossy().into_owned();
            found.push((name, steps));
        }
    }
    if found.is_empty() {
        let steps = snapshot_steps(run_dir)?;
        if !steps.is_empty() {
            found.push((".".to_string(), steps));
        }
    }
    Ok(found)
}

/// Up to four evenly spread entries of `available`, ending at the last one.
fn spread_four(available: &[usize]) -> Vec<usize> {
    if available.len() <= 4 {
        return available.to_vec();
    }
    let last = available.len() - 1;
    let mut picked: Vec<usize> = (1..=4).map(|j| available[(j * last).div_ceil(4)]).collect();
    picked.dedup();
    picked
}

/// Writes `plot.gp` into `run_dir`. One panel per selected snapshot overlays
/// the first two series; cumulative mass curves `cumulative_<k>.csv`, when
/// present, fill a second row. `steps` selects snapshots, an empty slice picks
/// up to four.
pub fn emit_plot_script(run_dir: &Path, steps: &[usize]) -> Result<PathBuf> {
    let all = series(run_dir)?;
    if all.is_empty() {
        return Err(CliError::Usage(format!("no snapshot CSVs under {}", run_dir.display())));
    }
    let shown = &all[..all.len().min(2)];
    let common: Vec<usize> = shown[0].1.iter().copied().filter(|k| shown.iter().all(|s| s.1.contains(k))).collect();
    let mut chosen: Vec<usize> = steps.iter().copied().filter(|k| common.contains(k)).collect();
    if chosen.is_empty() {
        chosen = spread_four(&common);
    }
    chosen.truncate(4);
    let cumulative: Vec<bool> = chosen.iter().map(|k| run_dir.join(format!("cumulative_{k}.csv")).is_file()).collect();
    let rows = if cumulative.iter().any(|c| *c) { 2 } else { 1 };

    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set terminal pngcairo size {},{}", 400 * chosen.len(), 360 * rows);
    let _ = writeln!(s, "set output 'plot.png'");
    let _ = writeln!(s, "set multiplot layout {rows},{}", chosen.len());
    for k in &chosen {
        let _ = writeln!(s, "set title 'step {k}'");
        let curves: Vec<String> = shown
            .iter()
            .map(|(name, _)| format!("'{name}/t_{k}.csv' every ::1 using 1:2 with lines title '{name}'"))
            .collect();
        let _ = writeln!(s, "plot {}", curves.join(", "));
    }
    if rows == 2 {
        for (k, has) in chosen.iter().zip(&cumulative) {
            let _ = writeln!(s, "set title 'cumulative mass, step {k}'");
            if *has {
                let (a, b) = (&shown[0].0, &shown[shown.len() - 1].0);
                let _ = writeln!(
                    s,
                    "plot 'cumulative_{k}.csv' every ::1 using 1:2 with lines title '{a}', 'cumulative_{k}.csv' every ::1 using 1:3 with lines title '{b}'"
                );
            } else {
                let _ = writeln!(s, "set multiplot next");
            }
        }
    }
    let _ = writeln!(s, "unset multiplot");
    let path = run_dir.join(PLOT_FILE);
    std::fs::write(&path, s)?;
    Ok(path)
}
