use std::path::Path;

use fracsym_core::rearrange::{
    compare_concentration, convex_order_check, decreasing_rearrangement, distribution_function,
    hardy_littlewood_check, spherical_rearrangement, write_cumulative_csv,
};
use fracsym_core::Norm;
use rand::Rng;
use serde_json::json;

use super::{rel_diff, write_columns, Outcome};
use crate::config::ExperimentConfig;
use crate::data::{random_ordered_pair, random_signed, random_signed_on, rng};
use crate::error::Result;
use crate::manifest::Check;

/// Offset separating the pair streams from the single-function streams.
const PAIR_STREAM: u64 = 1 << 32;
const LEVELS: usize = 50;

pub(crate) fn rearrange(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let mut worst_norm = 0.0f64;
    let mut level_mismatches = 0usize;
    for case in 0..cfg.cases {
        let mut r = rng(cfg.seed, case as u64);
        let f = random_signed(&mut r)?;
        let star = decreasing_rearrangement(&f);
        let sharp = spherical_rearrangement(&f, 1)?;
        for p in [Norm::L(1.0), Norm::L(2.0), Norm::Inf] {
            let a = f.lp_norm(p);
            worst_norm = worst_norm.max(rel_diff(a, star.lp_norm(p))).max(rel_diff(a, sharp.lp_norm(p)));
        }
        let top = f.max_abs();
        for _ in 0..LEVELS {
            let level = if top > 0.0 { r.random_range(0.0..top) } else { 0.0 };
            if distribution_function(&f, level)? != distribution_function(&sharp, level)? {
                level_mismatches += 1;
            }
        }
        if case == 0 {
            let x = f.grid().nodes();
            write_columns(&out.join("sample.csv"), &["x", "f", "f_sharp"], &[&x, f.values(), sharp.values()])?;
        }
    }

    let mut hl_violations = 0usize;
    let mut order_violations = 0usize;
    let mut phi_checks = 0usize;
    for pair in 0..cfg.pairs {
        let mut r = rng(cfg.seed, PAIR_STREAM + pair as u64);
        let f = random_signed(&mut r)?;
        let g = random_signed_on(&mut r, *f.grid())?;
        if !hardy_littlewood_check(&f, &g)?.holds {
            hl_violations += 1;
        }
        let (a, b) = random_ordered_pair(&mut r)?;
        let (a, b) = (spherical_rearrangement(&a, 1)?, spherical_rearrangement(&b, 1)?);
        if !compare_concentration(&a, &b, None)?.relation.is_first_less_or_equal() {
            order_violations += 1;
        }
        let top = b.max_abs();
        let mut phis: Vec<Box<dyn Fn(f64) -> f64>> = vec![Box::new(|t| t), Box::new(|t| t * t)];
        for j in 0..10 {
            let c = top * j as f64 / 10.0;
            phis.push(Box::new(move |t: f64| (t - c).max(0.0)));
        }
        for phi in &phis {
            phi_checks += 1;
            if !convex_order_check(&a, &b, phi)? {
                order_violations += 1;
            }
        }
        if pair == 0 {
            let file = std::fs::File::create(out.join("cumulative.csv"))?;
            write_cumulative_csv(&decreasing_rearrangement(&a), &decreasing_rearrangement(&b), file)?;
        }
    }

    let mut checks = Vec::new();
    if cfg.cases > 0 {
        checks.push(Check::new(
            "rearrangement_exactness",
            worst_norm <= 1e-13 && level_mismatches == 0,
            format!("{} functions: worst relative norm error {worst_norm:e}, {level_mismatches} distribution mismatches", cfg.cases),
        ));
    }
    if cfg.pairs > 0 {
        checks.push(Check::new("hardy_littlewood", hl_violations == 0, format!("{hl_violations} of {} pairs violate", cfg.pairs)));
        checks.push(Check::new(
            "convex_order",
            order_violations == 0,
            format!("{order_violations} violations over {} pairs and {phi_checks} convex functions", cfg.pairs),
        ));
    }
    let summary = json!({
        "functions": cfg.cases,
        "pairs": cfg.pairs,
        "worst_norm_error": worst_norm,
        "distribution_mismatches": level_mismatches,
        "hardy_littlewood_violations": hl_violations,
        "convex_order_violations": order_violations,
    });
    Ok(Outcome { summary, checks })
}
