use std::io::Write;
use std::path::Path;

use fracsym_core::elliptic::{contraction_gap, counterexample_h_guard, mass_balance};
use fracsym_core::nonlinearity::Curvature;
use fracsym_core::rearrange::{is_rearranged, spherical_rearrangement};
use fracsym_core::{
    elliptic, solve_resolvent, Grid64, GridFunction, Norm, Nonlinearity, Operator64, ResolventProblem,
    ResolventSolution,
};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::{controls, operator, operator_on, write_columns, Outcome};
use crate::config::{DataKind, ExperimentConfig};
use crate::data::{initial_data, random_compact, rng};
use crate::error::{CliError, Result};
use crate::manifest::Check;

fn solve(cfg: &ExperimentConfig, op: &Operator64, nl: &Nonlinearity<f64>, f: GridFunction<f64>) -> Result<ResolventSolution<f64>> {
    let p = ResolventProblem::new(op, nl, cfg.h, f)?.with_controls(controls(cfg));
    Ok(solve_resolvent(&p)?)
}

/// Largest `|u - x|` against a dense LU solve of `(h M + I) x = f`.
fn direct_solve_error(cfg: &ExperimentConfig) -> Result<f64> {
    let n = cfg.direct_n;
    let op = operator_on(cfg, cfg.sigma, Grid64::new(cfg.half_width, n)?)?;
    let f = random_compact(&mut rng(cfg.seed, u64::MAX), *op.grid())?;
    let u = solve(cfg, &op, &Nonlinearity::linear(), f.clone())?.u;
    let a = DMatrix::from_row_slice(n, n, &op.dense_matrix()) * cfg.h + DMatrix::identity(n, n);
    let x = a
        .lu()
        .solve(&DVector::from_column_slice(f.values()))
        .ok_or_else(|| CliError::Usage("dense reference matrix is singular".into()))?;
    let err = u.values().iter().zip(x.iter()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    Ok(err / f.max_abs())
}

pub(crate) fn solve_elliptic(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let op = operator(cfg)?;
    let grid = *op.grid();
    let nl = Nonlinearity::power(cfg.m)?;
    let f = initial_data(cfg, grid)?;
    let sol = solve(cfg, &op, &nl, f.clone())?;
    let x = grid.nodes();
    write_columns(&out.join("solution.csv"), &["x", "f", "u", "v"], &[&x, f.values(), sol.u.values(), sol.v.values()])?;
    let steps: Vec<f64> = (0..sol.residual_history.len()).map(|k| k as f64).collect();
    write_columns(&out.join("residuals.csv"), &["iteration", "residual"], &[&steps, &sol.residual_history])?;

    let mut checks = Vec::new();
    let balance = mass_balance(&sol, &f)?;
    if cfg.data != DataKind::Poisson {
        checks.push(Check::new("mass_balance", balance.abs() < 1e-2, format!("relative mass change {balance:e}")));
    }

    let gaps: Vec<(f64, f64)> = (0..cfg.cases)
        .into_par_iter()
        .map(|case| {
            let mut r = rng(cfg.seed, case as u64);
            let f1 = random_compact(&mut r, grid)?;
            let f2 = random_compact(&mut r, grid)?;
            let (s1, s2) = rayon::join(|| solve(cfg, &op, &nl, f1.clone()), || solve(cfg, &op, &nl, f2.clone()));
            let gap = contraction_gap(&s1?, &s2?, &f1, &f2)?;
            let df = f1.axpby(1.0, &f2, -1.0)?.lp_norm(Norm::L(1.0));
            Ok((gap, df))
        })
        .collect::<Result<_>>()?;
    let worst = gaps.iter().map(|(g, df)| g / df).fold(f64::NEG_INFINITY, f64::max);
    let failures = gaps.iter().filter(|(g, df)| *g > 1e-6 * df).count();
    checks.push(Check::new(
        "l1_contraction",
        failures == 0,
        format!("{failures} of {} pairs exceed 1e-6 relative; worst gap/|f1-f2| = {worst:e}", cfg.cases),
    ));

    let mut direct = None;
    if cfg.m == 1.0 {
        let err = direct_solve_error(cfg)?;
        checks.push(Check::new("linear_direct", err < 1e-10, format!("max error {err:e} relative to max f")));
        direct = Some(err);
    }
    let summary = json!({
        "m": cfg.m,
        "sigma": cfg.sigma,
        "h": cfg.h,
        "mass_balance": balance,
        "iterations": sol.iterations,
        "clamps": sol.clamps,
        "residual": sol.residual_norm,
        "worst_contraction_ratio": worst,
        "direct_solve_error": direct,
    });
    Ok(Outcome { summary, checks })
}

#[derive(Serialize)]
struct CaseReport {
    case: usize,
    mass: f64,
    #[serde(flatten)]
    report: elliptic::SymmetrizationReport<f64>,
}

pub(crate) fn elliptic_symmetrize(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let op = operator(cfg)?;
    let grid = *op.grid();
    let nl = Nonlinearity::power(cfg.m)?;
    let cases: Vec<CaseReport> = (0..cfg.cases)
        .into_par_iter()
        .map(|case| {
            let mut r = rng(cfg.seed, case as u64);
            let f = loop {
                let f = random_compact(&mut r, grid)?;
                if !is_rearranged(&f) {
                    break f;
                }
            };
            let mass = f.integrate();
            let report = elliptic::elliptic_symmetrization_experiment(&op, &f, &nl, cfg.h, Some(cfg.tol * mass))?;
            if case == 0 {
                let fs = spherical_rearrangement(&f, 1)?;
                write_columns(&out.join("case_0.csv"), &["x", "f", "f_sharp"], &[&grid.nodes(), f.values(), fs.values()])?;
            }
            Ok(CaseReport { case, mass, report })
        })
        .collect::<Result<_>>()?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(out.join("reports.jsonl"))?);
    for c in &cases {
        serde_json::to_writer(&mut w, c)?;
        writeln!(w)?;
    }
    w.flush()?;

    let v_fail: Vec<usize> = cases.iter().filter(|c| !c.report.v.relation.is_first_less_or_equal()).map(|c| c.case).collect();
    let u_fail: Vec<usize> = cases
        .iter()
        .filter(|c| c.report.u.as_ref().is_some_and(|u| !u.relation.is_first_less_or_equal()))
        .map(|c| c.case)
        .collect();
    let mut checks = vec![Check::new(
        "v_concentration",
        v_fail.is_empty(),
        format!("v# ≺ V fails in {} of {} cases {v_fail:?}", v_fail.len(), cfg.cases),
    )];
    if nl.b_curvature() != Curvature::Concave {
        checks.push(Check::new(
            "u_concentration",
            u_fail.is_empty(),
            format!("B(v#) ≺ B(V) fails in {} of {} cases {u_fail:?}", u_fail.len(), cfg.cases),
        ));
    }
    let worst_v = cases.iter().map(|c| c.report.v.min_gap).fold(0.0, f64::min);
    let summary = json!({
        "m": cfg.m,
        "b_curvature": nl.b_curvature(),
        "cases": cfg.cases,
        "v_failures": v_fail,
        "u_failures": u_fail,
        "most_negative_v_gap": worst_v,
    });
    Ok(Outcome { summary, checks })
}

pub(crate) fn elliptic_counterexample(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let op = operator(cfg)?;
    let (report, sols) = elliptic::elliptic_counterexample(&op, cfg.m, cfg.radius, cfg.h, None)?;
    std::fs::write(out.join("report.json"), report.to_json()? + "\n")?;
    let x = op.grid().nodes();
    write_columns(&out.join("solutions.csv"), &["x", "u", "u_R"], &[&x, sols[0].u.values(), sols[1].u.values()])?;
    let mut checks = Vec::new();
    if cfg.m > 1.0 {
        let target = -(1.0 + cfg.sigma);
        let slopes_ok = report.tail_slopes.iter().all(|s| (s - target).abs() <= 0.15);
        checks.push(Check::new("tail_slopes", slopes_ok, format!("slopes {:?}, expected {target} ± 0.15", report.tail_slopes)));
        let mass_gap = (report.masses[0] - report.masses[1]).abs() / report.masses[0];
        checks.push(Check::new("masses_agree", mass_gap < 1e-2, format!("relative mass difference {mass_gap:e}")));
        checks.push(Check::new(
            "order_violated",
            !report.relation.is_first_less_or_equal(),
            format!("relation of u_R to u: {:?}", report.relation),
        ));
    } else {
        checks.push(Check::new(
            "order_preserved",
            report.relation.is_first_less_or_equal(),
            format!("relation of u_R to u: {:?}", report.relation),
        ));
    }
    let summary = json!({
        "m": cfg.m,
        "R": cfg.radius,
        "h": cfg.h,
        "h_guard": counterexample_h_guard(cfg.m, cfg.radius, cfg.sigma),
        "relation": report.relation,
        "violation": report.violation,
        "masses": report.masses,
        "tail_slopes": report.tail_slopes,
        "tail_ratio": report.tail_ratio,
        "predicted_ratio": cfg.radius.powf(1.0 - cfg.m),
    });
    Ok(Outcome { summary, checks })
}
