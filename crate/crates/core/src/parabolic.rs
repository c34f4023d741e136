//! Implicit time discretization of `∂ₜu + (-Δ)^{σ/2} A(u) = f`:
//! `h L A(u_k) + u_k = u_{k-1} + h f_k`, one resolvent per step, with
//! `u_h(t) = u_k` on `((k-1)h, kh]`.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::elliptic::{solve_resolvent, NewtonControls, ResolventProblem};
use crate::error::{Error, Result};
use crate::fractional_laplacian::DiscreteOperator;
use crate::grid::{fmt17, Grid1D, GridFunction, Norm};
use crate::nonlinearity::Nonlinearity;
use crate::rearrange::{
    compare_concentration, decreasing_rearrangement, spherical_rearrangement, ConcentrationReport, Relation,
};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ItdSchedule<T: Real = f64> {
    final_time: T,
    n_steps: usize,
    /// Step indices `k` (0 is the initial state) kept as snapshots.
    snapshot_steps: Vec<usize>,
}

impl<T: Real> ItdSchedule<T> {
    pub fn new(final_time: T, n_steps: usize, mut snapshot_steps: Vec<usize>) -> Result<Self> {
        if !(final_time > T::zero()) || !final_time.is_finite() {
            return Err(Error::param("T", format!("must be positive, got {final_time}")));
        }
        if n_steps == 0 {
            return Err(Error::param("n_steps", "must be positive"));
        }
        if let Some(k) = snapshot_steps.iter().find(|k| **k > n_steps) {
            return Err(Error::param("snapshots", format!("step {k} is beyond n_steps = {n_steps}")));
        }
        snapshot_steps.sort_unstable();
        snapshot_steps.dedup();
        Ok(Self { final_time, n_steps, snapshot_steps })
    }

    /// Snapshots every `stride` steps, plus the initial and final states.
    pub fn every(final_time: T, n_steps: usize, stride: usize) -> Result<Self> {
        let stride = stride.max(1);
        let mut steps: Vec<usize> = (0..=n_steps).step_by(stride).collect();
        steps.push(n_steps);
        Self::new(final_time, n_steps, steps)
    }

    /// Snapshots nearest to the requested times.
    pub fn at_times(final_time: T, n_steps: usize, times: &[T]) -> Result<Self> {
        let h = final_time / T::from_count(n_steps);
        let steps = times
            .iter()
            .map(|t| (*t / h).round().to_usize().unwrap_or(usize::MAX))
            .collect();
        Self::new(final_time, n_steps, steps)
    }

    pub fn final_time(&self) -> T {
        self.final_time
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn h(&self) -> T {
        self.final_time / T::from_count(self.n_steps)
    }

    pub fn time(&self, k: usize) -> T {
        self.final_time * T::from_count(k) / T::from_count(self.n_steps)
    }

    pub fn snapshot_steps(&self) -> &[usize] {
        &self.snapshot_steps
    }
}

type SourceFn<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

#[derive(Clone, Default)]
pub enum SourceTerm<T: Real = f64> {
    #[default]
    Zero,
    /// `f(x, t)`, nonnegative.
    Field(SourceFn<T>),
}

impl<T: Real> SourceTerm<T> {
    pub fn field(f: impl Fn(T, T) -> T + Send + Sync + 'static) -> Self {
        SourceTerm::Field(Arc::new(f))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, SourceTerm::Zero)
    }

    /// `f_k`: average of `f(x, ·)` over `(t₀, t₁]` by three-point Gauss.
    pub fn step_average(&self, grid: Grid1D<T>, t0: T, t1: T) -> Result<Option<GridFunction<T>>> {
        let f = match self {
            SourceTerm::Zero => return Ok(None),
            SourceTerm::Field(f) => f,
        };
        let mid = T::lit(0.5) * (t0 + t1);
        let half = T::lit(0.5) * (t1 - t0);
        let off = half * T::lit(0.6f64.sqrt());
        let (we, wm) = (T::lit(5.0 / 18.0), T::lit(8.0 / 18.0));
        let avg = GridFunction::from_fn(grid, |x| we * f(x, mid - off) + wm * f(x, mid) + we * f(x, mid + off))?;
        if let Some(i) = avg.values().iter().position(|v| *v < T::zero()) {
            return Err(Error::NegativeState { index: i, value: avg.values()[i].as_f64() });
        }
        Ok(Some(avg))
    }
}

impl<T: Real> std::fmt::Debug for SourceTerm<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SourceTerm::Zero => f.write_str("Zero"),
            SourceTerm::Field(_) => f.write_str("Field(..)"),
        }
    }
}

/// `[f_1, ..., f_n]` for the schedule.
pub fn discretize_source<T: Real>(
    source: &SourceTerm<T>,
    grid: Grid1D<T>,
    schedule: &ItdSchedule<T>,
) -> Result<Vec<GridFunction<T>>> {
    (1..=schedule.n_steps())
        .map(|k| {
            Ok(source
                .step_average(grid, schedule.time(k - 1), schedule.time(k))?
                .unwrap_or_else(|| GridFunction::zeros(grid)))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub k: usize,
    pub t: f64,
    pub mass: f64,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub newton_iters: usize,
    pub clamps: usize,
}

impl StepDiagnostics {
    fn of<T: Real>(k: usize, t: T, u: &GridFunction<T>, newton_iters: usize, clamps: usize) -> Self {
        Self {
            k,
            t: t.as_f64(),
            mass: u.integrate().as_f64(),
            l1: u.lp_norm(Norm::L(T::one())).as_f64(),
            l2: u.lp_norm(Norm::L(T::lit(2.0))).as_f64(),
            linf: u.lp_norm(Norm::Inf).as_f64(),
            newton_iters,
            clamps,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory<T: Real = f64> {
    pub schedule: ItdSchedule<T>,
    /// `(k, u_k)` for each scheduled snapshot.
    pub snapshots: Vec<(usize, GridFunction<T>)>,
    /// One entry per step, `k = 0..=n_steps`.
    pub diagnostics: Vec<StepDiagnostics>,
}

impl<T: Real> Trajectory<T> {
    pub fn snapshot(&self, k: usize) -> Option<&GridFunction<T>> {
        self.snapshots.iter().find(|(j, _)| *j == k).map(|(_, u)| u)
    }

    /// Writes `t_<k>.csv` per snapshot and `diagnostics.csv`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (k, u) in &self.snapshots {
            u.save_csv(dir.join(format!("t_{k}.csv")))?;
        }
        let mut w = csv::Writer::from_path(dir.join("diagnostics.csv"))?;
        w.write_record(["k", "t", "mass", "l1", "l2", "linf", "newton_iters", "clamps"])?;
        for d in &self.diagnostics {
            w.write_record([
                d.k.to_string(),
                fmt17(d.t),
                fmt17(d.mass),
                fmt17(d.l1),
                fmt17(d.l2),
                fmt17(d.linf),
                d.newton_iters.to_string(),
                d.clamps.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn evolve_itd<T: Real>(
    u0: &GridFunction<T>,
    source: &SourceTerm<T>,
    nonlinearity: &Nonlinearity<T>,
    op: &DiscreteOperator<T>,
    schedule: &ItdSchedule<T>,
    controls: NewtonControls<T>,
) -> Result<Trajectory<T>> {
    evolve_with(u0, |k| source.step_average(*u0.grid(), schedule.time(k - 1), schedule.time(k)), nonlinearity, op, schedule, controls)
}

fn evolve_with<T: Real>(
    u0: &GridFunction<T>,
    source_at: impl Fn(usize) -> Result<Option<GridFunction<T>>>,
    nonlinearity: &Nonlinearity<T>,
    op: &DiscreteOperator<T>,
    schedule: &ItdSchedule<T>,
    controls: NewtonControls<T>,
) -> Result<Trajectory<T>> {
    op.grid().check_same(u0.grid(), "initial state")?;
    if let Some(i) = u0.values().iter().position(|v| *v < T::zero()) {
        return Err(Error::NegativeState { index: i, value: u0.values()[i].as_f64() });
    }
    let h = schedule.h();
    let wanted = schedule.snapshot_steps();
    let mut snapshots = Vec::with_capacity(wanted.len());
    let mut diagnostics = Vec::with_capacity(schedule.n_steps() + 1);
    let mut u = u0.clone();
    if wanted.first() == Some(&0) {
        snapshots.push((0, u.clone()));
    }
    diagnostics.push(StepDiagnostics::of(0, T::zero(), &u, 0, 0));
    for k in 1..=schedule.n_steps() {
        let step = |e: Error| Error::Step { step: k, source: Box::new(e) };
        let rhs = match source_at(k).map_err(step)? {
            None => u,
            Some(f) => u.axpby(T::one(), &f, h).map_err(step)?,
        };
        let problem = ResolventProblem::new(op, nonlinearity, h, rhs).map_err(step)?.with_controls(controls);
        let sol = solve_resolvent(&problem).map_err(step)?;
        u = sol.u;
        diagnostics.push(StepDiagnostics::of(k, schedule.time(k), &u, sol.iterations, sol.clamps));
        if wanted.binary_search(&k).is_ok() {
            snapshots.push((k, u.clone()));
        }
    }
    Ok(Trajectory { schedule: schedule.clone(), snapshots, diagnostics })
}

/// Runs `(u0, f)` and `(u0#, f#)` concurrently, `f#` being the per-step
/// rearrangement of `f_k`.
pub fn evolve_pair_symmetrized<T: Real>(
    u0: &GridFunction<T>,
    source: &SourceTerm<T>,
    nonlinearity: &Nonlinearity<T>,
    op: &DiscreteOperator<T>,
    schedule: &ItdSchedule<T>,
    controls: NewtonControls<T>,
) -> Result<(Trajectory<T>, Trajectory<T>)> {
    let u0s = spherical_rearrangement(u0, 1)?;
    let grid = *u0.grid();
    let (a, b) = rayon::join(
        || evolve_itd(u0, source, nonlinearity, op, schedule, controls),
        || {
            evolve_with(
                &u0s,
                |k| {
                    source
                        .step_average(grid, schedule.time(k - 1), schedule.time(k))?
                        .map(|f| spherical_rearrangement(&f, 1))
                        .transpose()
                },
                nonlinearity,
                op,
                schedule,
                controls,
            )
        },
    );
    Ok((a?, b?))
}

#[derive(Clone, Debug, Serialize)]
pub struct TimelineEntry<T: Real = f64> {
    pub k: usize,
    pub t: T,
    pub report: ConcentrationReport<T>,
    /// `[‖u₁‖_p, ‖u₂‖_p]` for `p = 1, 2, ∞`.
    pub norms: [[T; 2]; 3],
}

/// Per-snapshot `u₁ ≺ u₂` with both states symmetrized.
pub fn concentration_timeline<T: Real>(
    first: &Trajectory<T>,
    second: &Trajectory<T>,
    tol: Option<T>,
) -> Result<Vec<TimelineEntry<T>>> {
    if first.schedule != second.schedule || first.snapshots.len() != second.snapshots.len() {
        return Err(Error::GridMismatch("trajectories have different schedules".into()));
    }
    first
        .snapshots
        .iter()
        .zip(&second.snapshots)
        .map(|((k, a), (_, b))| {
            let report = compare_concentration(a, b, tol)?;
            let norm = |p: Norm<T>| [a.lp_norm(p), b.lp_norm(p)];
            Ok(TimelineEntry {
                k: *k,
                t: first.schedule.time(*k),
                report,
                norms: [norm(Norm::L(T::one())), norm(Norm::L(T::lit(2.0))), norm(Norm::Inf)],
            })
        })
        .collect()
}

/// One JSON object per line.
pub fn write_timeline_jsonl<T: Real + Serialize, W: Write>(timeline: &[TimelineEntry<T>], mut writer: W) -> Result<()> {
    for entry in timeline {
        serde_json::to_writer(&mut writer, entry)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailFit {
    pub slope: f64,
    pub prefactor: f64,
    pub r2: f64,
}

/// Least-squares fit `u ≈ C |x|^p` on `r_lo ≤ |x| ≤ r_hi`, using the average
/// of `u(x)` and `u(-x)` at 48 log-spaced radii.
pub fn tail_fit<T: Real>(snapshot: &GridFunction<T>, window: [f64; 2]) -> Result<TailFit> {
    let grid = snapshot.grid();
    let l = grid.half_width().as_f64();
    let [lo, hi] = window;
    if !(lo > 0.0 && hi > lo && hi < l) {
        return Err(Error::param("window", format!("[{lo}, {hi}] must satisfy 0 < r_lo < r_hi < {l}")));
    }
    let n = grid.n_cells();
    let dx = grid.spacing().as_f64();
    let samples = 48;
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(samples);
    let mut last = usize::MAX;
    for j in 0..samples {
        let r = lo * (hi / lo).powf(j as f64 / (samples - 1) as f64);
        // right-half cell whose centre is nearest r
        let i = ((r + l) / dx - 0.5).round() as usize;
        let i = i.clamp(n / 2, n - 1);
        if i == last {
            continue;
        }
        last = i;
        let x = grid.node(i).as_f64();
        let u = 0.5 * (snapshot.values()[i] + snapshot.values()[n - 1 - i]).as_f64();
        if !(u > 0.0) {
            return Err(Error::param("snapshot", format!("non-positive value {u:e} at |x| = {x}")));
        }
        pts.push((x.ln(), u.ln()));
    }
    if pts.len() < 3 {
        return Err(Error::param("window", "resolves fewer than three cells"));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(TailFit { slope, prefactor: intercept.exp(), r2 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BarenblattFit {
    pub alpha_fit: f64,
    pub beta_fit: f64,
    pub alpha_predicted: f64,
    pub beta_predicted: f64,
}

/// `β = 1/(m - 1 + σ)`, `α = β` in one dimension.
pub fn barenblatt_exponents(m: f64, sigma: f64) -> (f64, f64) {
    let beta = 1.0 / (m - 1.0 + sigma);
    (beta, beta)
}

/// Radius `r` with `∫_{|x|<r} u# = mass`, read off the decreasing rearrangement.
pub fn mass_radius<T: Real>(u: &GridFunction<T>, mass: f64) -> Option<f64> {
    let r = decreasing_rearrangement(u);
    let total = r.total_measure().as_f64();
    if r.cumulative(r.total_measure()).as_f64() < mass {
        return None;
    }
    let (mut lo, mut hi) = (0.0, total);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if r.cumulative(T::lit(mid)).as_f64() < mass {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.25 * (lo + hi))
}

/// Fits `‖u(t)‖_∞ ~ t^{-α}` and the half-mass radius `~ t^β` over the
/// snapshots with `t ≥ t_min`.
pub fn barenblatt_similarity_check<T: Real>(traj: &Trajectory<T>, m: f64, sigma: f64, t_min: f64) -> Result<BarenblattFit> {
    let first = traj.snapshots.first().ok_or_else(|| Error::param("trajectory", "has no snapshots"))?;
    let half_mass = 0.5 * traj.diagnostics[first.0].mass;
    let mut sup = Vec::new();
    let mut rad = Vec::new();
    for (k, u) in &traj.snapshots {
        let t = traj.schedule.time(*k).as_f64();
        if t < t_min || t <= 0.0 {
            continue;
        }
        sup.push((t.ln(), u.lp_norm(Norm::Inf).as_f64().ln()));
        let r = mass_radius(u, half_mass)
            .ok_or_else(|| Error::Inconclusive(format!("less than half the initial mass left at t = {t}")))?;
        rad.push((t.ln(), r.ln()));
    }
    if sup.len() < 3 {
        return Err(Error::param("trajectory", format!("needs at least 3 snapshots with t ≥ {t_min}, has {}", sup.len())));
    }
    let (beta_p, alpha_p) = barenblatt_exponents(m, sigma);
    Ok(BarenblattFit {
        alpha_fit: -ls_slope(&sup),
        beta_fit: ls_slope(&rad),
        alpha_predicted: alpha_p,
        beta_predicted: beta_p,
    })
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, Serialize)]
pub struct FpmeSnapshot {
    pub k: usize,
    pub t: f64,
    pub relation: Relation,
    pub min_gap: f64,
    pub max_gap: f64,
    pub masses: [f64; 2],
    /// On violating snapshots, the radii `r` where the narrow-data tail mass
    /// `∫_{|x|>r}` exceeds the wide one.
    pub tail_window: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FpmeReport {
    pub m: f64,
    pub sigma: f64,
    pub half_width: f64,
    pub n_cells: usize,
    pub final_time: f64,
    pub n_steps: usize,
    pub threshold: f64,
    pub timeline: Vec<FpmeSnapshot>,
    pub first_violation_time: Option<f64>,
    /// Most negative gap seen, reported also when no violation occurs.
    pub max_observed_violation: f64,
    pub inconclusive: bool,
}

impl FpmeReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Detection threshold `max(1e-6 M, 5 n_steps newton_tol M)`.
pub fn detection_threshold(mass: f64, n_steps: usize, newton_tol: f64) -> f64 {
    (1e-6 * mass).max(5.0 * n_steps as f64 * newton_tol * mass)
}

/// Evolves the narrow `χ(-1/2, 1/2)` and the wide `χ(-4, 4)/8` (same mass,
/// wide ≺ narrow) and records when `wide ≺ narrow` first fails.
pub fn fpme_counterexample_scenario(
    m: f64,
    op: &DiscreteOperator<f64>,
    schedule: &ItdSchedule<f64>,
    controls: NewtonControls<f64>,
) -> Result<(FpmeReport, Trajectory<f64>, Trajectory<f64>)> {
    if !(m > 0.0) {
        return Err(Error::param("m", format!("must be positive, got {m}")));
    }
    let grid = *op.grid();
    if grid.half_width() <= 8.0 {
        return Err(Error::param("L", "must exceed 8 to hold the wide data"));
    }
    let narrow = GridFunction::indicator(grid, -0.5, 0.5, 1.0)?;
    let wide = GridFunction::indicator(grid, -4.0, 4.0, 0.125)?;
    let nl = Nonlinearity::power(m)?;
    let mass = narrow.integrate().max(wide.integrate());
    let threshold = detection_threshold(mass, schedule.n_steps(), controls.newton_tol);
    let (a, b) = rayon::join(
        || evolve_itd(&narrow, &SourceTerm::Zero, &nl, op, schedule, controls),
        || evolve_itd(&wide, &SourceTerm::Zero, &nl, op, schedule, controls),
    );
    let (tn, tw) = (a?, b?);
    let timeline = concentration_timeline(&tw, &tn, Some(threshold))?;
    let mut snaps = Vec::with_capacity(timeline.len());
    let mut first = None;
    let mut worst = 0.0f64;
    for (entry, ((_, un), (_, uw))) in timeline.iter().zip(tn.snapshots.iter().zip(&tw.snapshots)) {
        let rep = &entry.report;
        worst = worst.min(rep.min_gap);
        let violated = !rep.relation.is_first_less_or_equal();
        if violated && first.is_none() {
            first = Some(entry.t);
        }
        snaps.push(FpmeSnapshot {
            k: entry.k,
            t: entry.t,
            relation: rep.relation,
            min_gap: rep.min_gap,
            max_gap: rep.max_gap,
            masses: [un.integrate(), uw.integrate()],
            tail_window: if violated { tail_excess_window(un, uw, threshold) } else { None },
        });
    }
    let report = FpmeReport {
        m,
        sigma: op.sigma(),
        half_width: grid.half_width(),
        n_cells: grid.n_cells(),
        final_time: schedule.final_time(),
        n_steps: schedule.n_steps(),
        threshold,
        timeline: snaps,
        first_violation_time: first,
        max_observed_violation: -worst,
        inconclusive: first.is_none(),
    };
    Ok((report, tn, tw))
}

/// Range of radii where `∫_{|x|>r} a` exceeds `∫_{|x|>r} b` by more than `tol`.
fn tail_excess_window(a: &GridFunction<f64>, b: &GridFunction<f64>, tol: f64) -> Option<[f64; 2]> {
    let grid = a.grid();
    let n = grid.n_cells();
    let dx = grid.spacing();
    let (mut ta, mut tb) = (0.0, 0.0);
    let mut window: Option<[f64; 2]> = None;
    // walk inwards from the boundary over symmetric cell pairs
    for i in (n / 2..n).rev() {
        let j = n - 1 - i;
        ta += (a.values()[i] + if j != i { a.values()[j] } else { 0.0 }) * dx;
        tb += (b.values()[i] + if j != i { b.values()[j] } else { 0.0 }) * dx;
        let r = grid.node(i) - 0.5 * dx;
        if ta - tb > tol {
            window = Some(match window {
                None => [r, r + dx],
                Some([_, hi]) => [r, hi],
            });
        }
    }
    window
}
