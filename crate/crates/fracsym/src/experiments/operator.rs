use std::io::BufWriter;
use std::path::Path;

use fracsym_core::fractional_laplacian::{getoor_constant, getoor_profile, poisson_kernel, poisson_kernel_half_laplacian};
use fracsym_core::{Grid64, GridFunction, Method};
use serde::Serialize;
use serde_json::json;

use super::{grid, operator, operator_on, write_columns, write_json, Outcome};
use crate::config::{DataKind, ExperimentConfig};
use crate::data::initial_data;
use crate::error::Result;
use crate::manifest::Check;

/// Half-width of the grid used for the Getoor profile.
const GETOOR_HALF_WIDTH: f64 = 4.0;
const GETOOR_COARSEST: usize = 512;

fn poisson_applies(cfg: &ExperimentConfig) -> bool {
    cfg.sigma == 1.0 && cfg.method == Method::SingularIntegralTruncated
}

/// `L∞` distance to the closed form of `(-Δ)^{1/2} P₁` on `|x| ≤ L/2`, with
/// the computed and exact columns.
fn poisson_error(cfg: &ExperimentConfig) -> Result<(f64, GridFunction<f64>, GridFunction<f64>)> {
    let op = operator(cfg)?;
    let g = *op.grid();
    let lp = op.apply(&poisson_kernel(1.0, g)?)?;
    let exact = poisson_kernel_half_laplacian(1.0, g)?;
    let err = (0..g.n_cells())
        .filter(|&i| g.node(i).abs() <= 0.5 * g.half_width())
        .map(|i| (lp.values()[i] - exact.values()[i]).abs())
        .fold(0.0, f64::max);
    Ok((err, lp, exact))
}

pub(crate) fn apply_op(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let op = operator(cfg)?;
    let f = initial_data(cfg, *op.grid())?;
    let lf = op.apply(&f)?;
    op.write_dump_csv(BufWriter::new(std::fs::File::create(out.join("operator.csv"))?))?;
    let x = op.grid().nodes();
    write_columns(&out.join("applied.csv"), &["x", "f", "Lf"], &[&x, f.values(), lf.values()])?;
    let mut checks = Vec::new();
    if cfg.data == DataKind::Poisson && poisson_applies(cfg) {
        let (err, _, _) = poisson_error(cfg)?;
        checks.push(Check::new("poisson_oracle", err < 1e-3, format!("L∞ error {err:e} on |x| <= L/2")));
    }
    let summary = json!({
        "sigma": cfg.sigma,
        "n": op.n(),
        "normalization": op.normalization(),
        "max_abs_output": lf.max_abs(),
    });
    Ok(Outcome { summary, checks })
}

#[derive(Serialize)]
struct GetoorRow {
    sigma: f64,
    n: usize,
    spread: f64,
    mean: f64,
    c0: f64,
}

/// Relative spread and mean of `L g` on `|x| ≤ 0.9`.
fn getoor_spread(cfg: &ExperimentConfig, sigma: f64, n: usize) -> Result<(f64, f64)> {
    let g = Grid64::new(GETOOR_HALF_WIDTH, n)?;
    let op = operator_on(cfg, sigma, g)?;
    let lg = op.apply(&getoor_profile(sigma, g)?)?;
    let inner: Vec<f64> = (0..n).filter(|&i| g.node(i).abs() <= 0.9).map(|i| lg.values()[i]).collect();
    let mean = inner.iter().sum::<f64>() / inner.len() as f64;
    let hi = inner.iter().copied().fold(f64::MIN, f64::max);
    let lo = inner.iter().copied().fold(f64::MAX, f64::min);
    Ok(((hi - lo) / mean, mean))
}

pub(crate) fn oracle_check(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let mut checks = Vec::new();
    let mut poisson = None;
    if poisson_applies(cfg) {
        let (err, lp, exact) = poisson_error(cfg)?;
        let x = grid(cfg)?.nodes();
        write_columns(&out.join("poisson.csv"), &["x", "computed", "exact"], &[&x, lp.values(), exact.values()])?;
        checks.push(Check::new("poisson_oracle", err < 1e-3, format!("L∞ error {err:e} on |x| <= L/2")));
        poisson = Some(err);
    }

    let mut sizes = vec![cfg.n_cells.min(GETOOR_COARSEST)];
    while sizes[sizes.len() - 1] * 2 <= cfg.n_cells {
        sizes.push(sizes[sizes.len() - 1] * 2);
    }
    let mut rows = Vec::new();
    let (mut spread_ok, mut refine_ok, mut mean_ok) = (true, true, true);
    let mut details = Vec::new();
    for &sigma in &cfg.sigmas {
        let c0 = getoor_constant(sigma)?;
        let mut last = f64::INFINITY;
        for &n in &sizes {
            let (spread, mean) = getoor_spread(cfg, sigma, n)?;
            refine_ok &= spread < last;
            last = spread;
            rows.push(GetoorRow { sigma, n, spread, mean, c0 });
        }
        let (spread, mean) = (last, rows[rows.len() - 1].mean);
        spread_ok &= spread < 0.01;
        mean_ok &= (mean - c0).abs() < 0.01 * c0;
        details.push(format!("sigma={sigma}: spread {spread:e}, mean {mean} vs c0 {c0}"));
    }
    let detail = details.join("; ");
    checks.push(Check::new("getoor_spread", spread_ok, detail.clone()));
    checks.push(Check::new("getoor_refinement", refine_ok, format!("spread decreases over n = {sizes:?}")));
    checks.push(Check::new("getoor_constant", mean_ok, detail));
    write_json(&out.join("getoor.json"), &rows)?;
    let summary = json!({
        "poisson_linf_error": poisson,
        "getoor": rows,
    });
    Ok(Outcome { summary, checks })
}
