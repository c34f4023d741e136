use std::io::BufWriter;
use std::path::Path;

use fracsym_core::fractional_laplacian::poisson_kernel;
use fracsym_core::parabolic::{
    barenblatt_exponents, barenblatt_similarity_check, concentration_timeline, evolve_itd, evolve_pair_symmetrized,
    fpme_counterexample_scenario, tail_fit, write_timeline_jsonl, ItdSchedule, SourceTerm, TailFit,
};
use fracsym_core::rearrange::{decreasing_rearrangement, write_cumulative_csv};
use fracsym_core::{GridFunction, Method, Nonlinearity, Norm, Trajectory};
use serde_json::json;

use super::{controls, operator, write_json, Outcome};
use crate::config::{DataKind, ExperimentConfig, SourceKind};
use crate::data::{initial_data, source};
use crate::error::Result;
use crate::manifest::Check;
use crate::plot::emit_plot_script;

/// Steps of the configured plot times.
fn plot_steps(cfg: &ExperimentConfig) -> Vec<usize> {
    let mut steps: Vec<usize> = cfg.plot_times.iter().map(|t| cfg.step_of(*t)).collect();
    steps.dedup();
    steps
}

/// Snapshots every `snapshot_every` steps plus `extra`.
fn schedule(cfg: &ExperimentConfig, extra: &[usize]) -> Result<ItdSchedule<f64>> {
    let mut steps: Vec<usize> = (0..=cfg.n_steps).step_by(cfg.snapshot_every).collect();
    steps.push(cfg.n_steps);
    steps.extend_from_slice(extra);
    steps.extend(plot_steps(cfg));
    Ok(ItdSchedule::new(cfg.final_time, cfg.n_steps, steps)?)
}

/// Mass never increases by more than `1e-10` of the initial mass.
fn mass_monotone(traj: &Trajectory<f64>) -> (bool, f64) {
    let m0 = traj.diagnostics[0].mass;
    let ok = traj.diagnostics.windows(2).all(|w| w[1].mass <= w[0].mass + 1e-10 * m0);
    let loss = (m0 - traj.diagnostics.last().map_or(m0, |d| d.mass)) / m0;
    (ok, loss)
}

/// Cumulative mass curves `s, F_cum, G_cum` of two states.
fn write_cumulative(path: &Path, a: &GridFunction<f64>, b: &GridFunction<f64>) -> Result<()> {
    let file = BufWriter::new(std::fs::File::create(path)?);
    write_cumulative_csv(&decreasing_rearrangement(a), &decreasing_rearrangement(b), file)?;
    Ok(())
}

fn write_pair(out: &Path, names: [&str; 2], a: &Trajectory<f64>, b: &Trajectory<f64>, steps: &[usize]) -> Result<()> {
    a.write_dir(out.join(names[0]))?;
    b.write_dir(out.join(names[1]))?;
    for &k in steps {
        if let (Some(x), Some(y)) = (a.snapshot(k), b.snapshot(k)) {
            write_cumulative(&out.join(format!("cumulative_{k}.csv")), x, y)?;
        }
    }
    emit_plot_script(out, steps)?;
    Ok(())
}

fn l1_error(u: &GridFunction<f64>, exact: &GridFunction<f64>) -> Result<f64> {
    Ok(u.axpby(1.0, exact, -1.0)?.lp_norm(Norm::L(1.0)))
}

pub(crate) fn evolve(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let op = operator(cfg)?;
    let grid = *op.grid();
    let nl = Nonlinearity::power(cfg.m)?;
    let u0 = initial_data(cfg, grid)?;
    let src = source(cfg);
    let sched = schedule(cfg, &[])?;
    let oracle = cfg.data == DataKind::Poisson
        && cfg.m == 1.0
        && cfg.sigma == 1.0
        && cfg.source == SourceKind::None
        && cfg.method == Method::SingularIntegralTruncated;
    let (traj, fine) = rayon::join(
        || evolve_itd(&u0, &src, &nl, &op, &sched, controls(cfg)),
        || -> Result<Option<Trajectory<f64>>> {
            if !oracle {
                return Ok(None);
            }
            let s = ItdSchedule::new(cfg.final_time, 2 * cfg.n_steps, vec![2 * cfg.n_steps])?;
            Ok(Some(evolve_itd(&u0, &src, &nl, &op, &s, controls(cfg))?))
        },
    );
    let (traj, fine) = (traj?, fine?);
    traj.write_dir(out.join("trajectory"))?;
    emit_plot_script(out, &plot_steps(cfg))?;

    let mut checks = Vec::new();
    let (monotone, loss) = mass_monotone(&traj);
    if src.is_zero() {
        checks.push(Check::new("mass_monotone", monotone, format!("relative mass loss {loss:e}")));
    }
    let mut oracle_summary = serde_json::Value::Null;
    if let Some(fine) = fine {
        let exact = poisson_kernel(1.0 + cfg.final_time, grid)?;
        let coarse_err = l1_error(traj.snapshot(cfg.n_steps).expect("final snapshot"), &exact)?;
        let fine_err = l1_error(&fine.snapshots[0].1, &exact)?;
        let ratio = fine_err / coarse_err;
        checks.push(Check::new("poisson_oracle", coarse_err < 1e-2, format!("L1 error {coarse_err:e} at n_steps = {}", cfg.n_steps)));
        checks.push(Check::new(
            "time_refinement",
            (0.35..=0.65).contains(&ratio),
            format!("error ratio {ratio} between {} and {} steps", cfg.n_steps, 2 * cfg.n_steps),
        ));
        oracle_summary = json!({ "l1_error": coarse_err, "l1_error_refined": fine_err, "ratio": ratio });
        write_json(&out.join("oracle.json"), &oracle_summary)?;
    }
    let last = traj.diagnostics.last().expect("diagnostics");
    let summary = json!({
        "m": cfg.m,
        "sigma": cfg.sigma,
        "final_mass": last.mass,
        "mass_loss": loss,
        "newton_iterations": traj.diagnostics.iter().map(|d| d.newton_iters).sum::<usize>(),
        "clamps": traj.diagnostics.iter().map(|d| d.clamps).sum::<usize>(),
        "oracle": oracle_summary,
    });
    Ok(Outcome { summary, checks })
}

pub(crate) fn parabolic_symmetrize(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let op = operator(cfg)?;
    let nl = Nonlinearity::power(cfg.m)?;
    let u0 = initial_data(cfg, *op.grid())?;
    let sched = schedule(cfg, &[])?;
    let (a, b) = evolve_pair_symmetrized(&u0, &source(cfg), &nl, &op, &sched, controls(cfg))?;
    let mass = a.diagnostics.iter().chain(&b.diagnostics).map(|d| d.mass).fold(0.0, f64::max);
    let timeline = concentration_timeline(&a, &b, Some(cfg.tol * mass))?;
    write_timeline_jsonl(&timeline, BufWriter::new(std::fs::File::create(out.join("timeline.jsonl"))?))?;
    write_pair(out, ["first", "second"], &a, &b, &plot_steps(cfg))?;
    let bad: Vec<f64> = timeline.iter().filter(|e| !e.report.relation.is_first_less_or_equal()).map(|e| e.t).collect();
    let norms_bad = timeline
        .iter()
        .filter(|e| e.norms.iter().any(|[x, y]| *x > *y * (1.0 + 1e-9)))
        .count();
    let checks = vec![
        Check::new(
            "timeline_ordered",
            bad.is_empty(),
            format!("{} of {} snapshots not FirstLess/Equal {bad:?}", bad.len(), timeline.len()),
        ),
        Check::new("norms_ordered", norms_bad == 0, format!("{norms_bad} snapshots with a larger Lp norm for the first state")),
    ];
    let summary = json!({
        "m": cfg.m,
        "source": cfg.source,
        "snapshots": timeline.len(),
        "relations": timeline.iter().map(|e| e.report.relation).collect::<Vec<_>>(),
        "violations": bad,
    });
    Ok(Outcome { summary, checks })
}

pub(crate) fn fpme_counterexample(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let op = operator(cfg)?;
    let tail_steps = [cfg.step_of(cfg.tail_t), cfg.step_of(2.0 * cfg.tail_t)];
    let sched = schedule(cfg, &tail_steps)?;
    let (report, narrow, wide) = fpme_counterexample_scenario(cfg.m, &op, &sched, controls(cfg))?;
    std::fs::write(out.join("report.json"), report.to_json()? + "\n")?;
    let mut w = BufWriter::new(std::fs::File::create(out.join("timeline.jsonl"))?);
    for s in &report.timeline {
        serde_json::to_writer(&mut w, s)?;
        std::io::Write::write_all(&mut w, b"\n")?;
    }
    std::io::Write::flush(&mut w)?;
    write_pair(out, ["narrow", "wide"], &narrow, &wide, &plot_steps(cfg))?;

    let l = cfg.half_width;
    let window = [0.2 * l, 0.8 * l];
    let fits: Vec<TailFit> = tail_steps
        .iter()
        .map(|k| tail_fit(narrow.snapshot(*k).expect("tail snapshot"), window))
        .collect::<fracsym_core::Result<_>>()?;
    let ratio = fits[1].prefactor / fits[0].prefactor;
    let (beta, _) = barenblatt_exponents(cfg.m, cfg.sigma);

    let mut checks = Vec::new();
    if cfg.m > 1.0 {
        let at_violation = report.timeline.iter().find(|s| Some(s.t) == report.first_violation_time);
        let detected = at_violation.is_some_and(|s| (s.masses[0] - s.masses[1]).abs() <= 0.01 * s.masses[0]);
        checks.push(Check::new(
            "violation_detected",
            detected,
            format!(
                "first violation at t = {:?}, masses {:?}",
                report.first_violation_time,
                at_violation.map(|s| s.masses)
            ),
        ));
        let target = -(1.0 + cfg.sigma);
        let slopes: Vec<f64> = fits.iter().map(|f| f.slope).collect();
        checks.push(Check::new(
            "tail_slope",
            slopes.iter().all(|s| (s - target).abs() <= 0.15),
            format!("slopes {slopes:?} on [{}, {}], expected {target} ± 0.15", window[0], window[1]),
        ));
        checks.push(Check::new(
            "tail_linear_in_t",
            (1.7..=2.3).contains(&ratio),
            format!("prefactor ratio {ratio} between t = {} and {}", cfg.tail_t, 2.0 * cfg.tail_t),
        ));
    } else {
        checks.push(Check::new(
            "order_preserved",
            report.first_violation_time.is_none(),
            format!("largest gap below zero {:e}", report.max_observed_violation),
        ));
    }
    let summary = json!({
        "m": cfg.m,
        "sigma": cfg.sigma,
        "first_violation_time": report.first_violation_time,
        "max_observed_violation": report.max_observed_violation,
        "threshold": report.threshold,
        "inconclusive": report.inconclusive,
        "tail_fits": fits,
        "tail_prefactor_ratio": ratio,
        "similarity_lambda": beta * cfg.sigma,
    });
    Ok(Outcome { summary, checks })
}

/// `n` log-spaced times in `[a, b]`.
fn log_times(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a * (b / a).powf(k as f64 / (n - 1) as f64)).collect()
}

pub(crate) fn barenblatt(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let op = operator(cfg)?;
    let w = 0.5 * cfg.width;
    let u0 = GridFunction::indicator(*op.grid(), -w, w, 1.0 / cfg.width)?;
    let nl = Nonlinearity::power(cfg.m)?;
    let sched = ItdSchedule::at_times(cfg.final_time, cfg.n_steps, &log_times(cfg.t_min, cfg.final_time, 5))?;
    let traj = evolve_itd(&u0, &SourceTerm::Zero, &nl, &op, &sched, controls(cfg))?;
    traj.write_dir(out.join("trajectory"))?;
    let fit = barenblatt_similarity_check(&traj, cfg.m, cfg.sigma, cfg.t_min)?;
    write_json(&out.join("fit.json"), &fit)?;
    let rel = |a: f64, b: f64| (a / b - 1.0).abs();
    let checks = vec![
        Check::new(
            "alpha",
            rel(fit.alpha_fit, fit.alpha_predicted) <= cfg.fit_tol,
            format!("fitted {} vs predicted {}", fit.alpha_fit, fit.alpha_predicted),
        ),
        Check::new(
            "beta",
            rel(fit.beta_fit, fit.beta_predicted) <= cfg.fit_tol,
            format!("fitted {} vs predicted {}", fit.beta_fit, fit.beta_predicted),
        ),
    ];
    let summary = json!({
        "m": cfg.m,
        "sigma": cfg.sigma,
        "fit": fit,
        "lambda": fit.beta_predicted * cfg.sigma,
    });
    Ok(Outcome { summary, checks })
}
