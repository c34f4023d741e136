//! Experiment dispatch.

mod elliptic;
mod operator;
mod parabolic;
mod rearrange;

use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use fracsym_core::grid::fmt17;
use fracsym_core::{assemble, Grid64, NewtonControls, Operator64, OperatorSpec};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::Result;
use crate::manifest::{Check, RunManifest};

/// Summary and checks of one experiment.
pub(crate) struct Outcome {
    pub summary: serde_json::Value,
    pub checks: Vec<Check>,
}

/// Runs the configured experiment, writes its outputs and the manifest into
/// `out`, and returns the manifest.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    config.validate()?;
    std::fs::create_dir_all(out)?;
    let start = Instant::now();
    let outcome = match config.experiment {
        Experiment::Rearrange => rearrange::rearrange(config, out),
        Experiment::ApplyOp => operator::apply_op(config, out),
        Experiment::OracleCheck => operator::oracle_check(config, out),
        Experiment::SolveElliptic => elliptic::solve_elliptic(config, out),
        Experiment::EllipticSymmetrize => elliptic::elliptic_symmetrize(config, out),
        Experiment::EllipticCounterexample => elliptic::elliptic_counterexample(config, out),
        Experiment::Evolve => parabolic::evolve(config, out),
        Experiment::ParabolicSymmetrize => parabolic::parabolic_symmetrize(config, out),
        Experiment::FpmeCounterexample => parabolic::fpme_counterexample(config, out),
        Experiment::Barenblatt => parabolic::barenblatt(config, out),
    }?;
    let manifest = RunManifest::new(config, start.elapsed().as_secs_f64(), outcome.summary, outcome.checks);
    manifest.write(out)?;
    Ok(manifest)
}

pub(crate) fn grid(cfg: &ExperimentConfig) -> Result<Grid64> {
    Ok(Grid64::new(cfg.half_width, cfg.n_cells)?)
}

pub(crate) fn operator_on(cfg: &ExperimentConfig, sigma: f64, grid: Grid64) -> Result<Operator64> {
    Ok(assemble(OperatorSpec::new(sigma, cfg.method, grid)?)?)
}

pub(crate) fn operator(cfg: &ExperimentConfig) -> Result<Operator64> {
    operator_on(cfg, cfg.sigma, grid(cfg)?)
}

pub(crate) fn controls(cfg: &ExperimentConfig) -> NewtonControls<f64> {
    NewtonControls { newton_tol: cfg.newton_tol, ..NewtonControls::default() }
}

/// Writes equally long columns as CSV with 17 significant digits.
pub(crate) fn write_columns(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    let rows = columns.first().map_or(0, |c| c.len());
    for i in 0..rows {
        let row: Vec<String> = columns.iter().map(|c| fmt17(c[i])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Relative difference `|a - b| / max(|a|, |b|)`.
pub(crate) fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
