//! The nonlinear resolvent `h L A(u) + u = f`, solved as `h L v + B(v) = f`
//! with `v = A(u)`, and the elliptic comparison experiments built on it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fractional_laplacian::DiscreteOperator;
use crate::grid::{GridFunction, Norm};
use crate::linalg::{norm2, preconditioned_cg};
use crate::nonlinearity::{Curvature, Nonlinearity};
use crate::parabolic::{tail_fit, TailFit};
use crate::rearrange::{compare_concentration, spherical_rearrangement, ConcentrationReport, Relation};
use crate::scalar::Real;

/// Damped Newton settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NewtonControls<T: Real = f64> {
    /// Stop when `‖R(v)‖₂ ≤ newton_tol · ‖f‖₂`.
    pub newton_tol: T,
    pub max_iters: usize,
    /// Step halvings allowed per iteration.
    pub max_halvings: usize,
    /// Floor (and reciprocal ceiling) for `B'` in the Jacobian only.
    pub jacobian_floor: T,
    pub cg_max_iters: usize,
}

impl<T: Real> Default for NewtonControls<T> {
    fn default() -> Self {
        let eps = T::epsilon().as_f64();
        Self {
            newton_tol: T::lit(1e-10f64.max(100.0 * eps)),
            max_iters: 60,
            max_halvings: 20,
            jacobian_floor: T::lit(1e-12),
            cg_max_iters: 2000,
        }
    }
}

pub struct ResolventProblem<'a, T: Real = f64> {
    op: &'a DiscreteOperator<T>,
    nonlinearity: &'a Nonlinearity<T>,
    h: T,
    f: GridFunction<T>,
    controls: NewtonControls<T>,
}

impl<'a, T: Real> ResolventProblem<'a, T> {
    pub fn new(op: &'a DiscreteOperator<T>, nonlinearity: &'a Nonlinearity<T>, h: T, f: GridFunction<T>) -> Result<Self> {
        if !(h > T::zero()) || !h.is_finite() {
            return Err(Error::param("h", format!("must be positive, got {h}")));
        }
        op.grid().check_same(f.grid(), "resolvent data")?;
        if let Some(i) = f.values().iter().position(|v| *v < T::zero()) {
            return Err(Error::NegativeState { index: i, value: f.values()[i].as_f64() });
        }
        Ok(Self { op, nonlinearity, h, f, controls: NewtonControls::default() })
    }

    pub fn with_controls(mut self, controls: NewtonControls<T>) -> Self {
        self.controls = controls;
        self
    }

    pub fn data(&self) -> &GridFunction<T> {
        &self.f
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn controls(&self) -> &NewtonControls<T> {
        &self.controls
    }
}

#[derive(Clone, Debug)]
pub struct ResolventSolution<T: Real = f64> {
    pub u: GridFunction<T>,
    pub v: GridFunction<T>,
    /// Discrete `L²` norm of `h L v + B(v) - f`.
    pub residual_norm: T,
    pub iterations: usize,
    /// Cells clamped at zero over all trial steps.
    pub clamps: usize,
    /// `‖R‖₂` at the start and after every accepted step.
    pub residual_history: Vec<T>,
}

fn residual<T: Real>(p: &ResolventProblem<'_, T>, v: &[T]) -> Vec<T> {
    let lv = p.op.apply_slice(v);
    lv.iter()
        .zip(v)
        .zip(p.f.values())
        .map(|((l, vi), fi)| p.h * *l + p.nonlinearity.b(*vi) - *fi)
        .collect()
}

pub fn solve_resolvent<T: Real>(problem: &ResolventProblem<'_, T>) -> Result<ResolventSolution<T>> {
    let p = problem;
    let c = &p.controls;
    let grid = *p.f.grid();
    let dx_root = grid.spacing().sqrt();
    let fnorm = norm2(p.f.values());
    if fnorm == T::zero() {
        let zero = GridFunction::zeros(grid);
        return Ok(ResolventSolution {
            u: zero.clone(),
            v: zero,
            residual_norm: T::zero(),
            iterations: 1,
            clamps: 0,
            residual_history: vec![T::zero()],
        });
    }
    let target = c.newton_tol * fnorm;
    let mut clamps = 0;
    let mut v: Vec<T> = p.f.values().iter().map(|fi| p.nonlinearity.a(*fi).max(T::zero())).collect();
    let mut r = residual(p, &v);
    let mut rnorm = norm2(&r);
    let mut history = vec![rnorm * dx_root];
    let diag_l = p.op.diagonal();
    let (floor, ceiling) = (c.jacobian_floor, c.jacobian_floor.recip());
    for iter in 1..=c.max_iters {
        if rnorm <= target {
            return finish(p, v, history, iter, clamps);
        }
        if let Some(i) = v.iter().position(|x| *x < T::zero()) {
            return Err(Error::NegativeState { index: i, value: v[i].as_f64() });
        }
        let jb: Vec<T> = v.iter().map(|x| p.nonlinearity.db(*x).max(floor).min(ceiling)).collect();
        let jdiag: Vec<T> = diag_l.iter().zip(&jb).map(|(d, b)| p.h * *d + *b).collect();
        let rhs: Vec<T> = r.iter().map(|x| -*x).collect();
        let mut delta = vec![T::zero(); v.len()];
        // inexact Newton: the linear solve only needs to beat the current residual
        let cg_tol = (T::lit(0.1) * target / rnorm).max(T::epsilon() * T::lit(16.0)).min(T::lit(1e-6));
        let apply = |x: &[T]| {
            let lx = p.op.apply_slice(x);
            lx.iter().zip(x).zip(&jb).map(|((l, xi), b)| p.h * *l + *b * *xi).collect()
        };
        preconditioned_cg(apply, &jdiag, &rhs, &mut delta, cg_tol, c.cg_max_iters)
            .or_else(|e| match e {
                // a loose direction is still usable by the line search
                Error::LinearSolver { residual, .. } if residual < 0.5 => Ok(Default::default()),
                e => Err(e),
            })?;
        let mut step = T::one();
        let mut accepted = false;
        for _ in 0..=c.max_halvings {
            let mut trial_clamps = 0;
            let trial: Vec<T> = v
                .iter()
                .zip(&delta)
                .map(|(vi, di)| {
                    let x = *vi + step * *di;
                    if x < T::zero() {
                        trial_clamps += 1;
                        T::zero()
                    } else {
                        x
                    }
                })
                .collect();
            let tr = residual(p, &trial);
            let tn = norm2(&tr);
            clamps += trial_clamps;
            if tn < rnorm {
                v = trial;
                r = tr;
                rnorm = tn;
                history.push(rnorm * dx_root);
                accepted = true;
                break;
            }
            step = step * T::lit(0.5);
        }
        if !accepted {
            return Err(Error::NoConvergence { iterations: iter, residual: (rnorm / fnorm).as_f64() });
        }
    }
    if rnorm <= target {
        return finish(p, v, history, c.max_iters, clamps);
    }
    Err(Error::NoConvergence { iterations: c.max_iters, residual: (rnorm / fnorm).as_f64() })
}

fn finish<T: Real>(
    p: &ResolventProblem<'_, T>,
    v: Vec<T>,
    residual_history: Vec<T>,
    iterations: usize,
    clamps: usize,
) -> Result<ResolventSolution<T>> {
    let grid = *p.f.grid();
    let u = v.iter().map(|x| p.nonlinearity.b(*x)).collect();
    Ok(ResolventSolution {
        u: GridFunction::new(grid, u)?,
        v: GridFunction::new(grid, v)?,
        residual_norm: *residual_history.last().expect("history starts non-empty"),
        iterations,
        clamps,
        residual_history,
    })
}

/// `‖u₁ - u₂‖₁ - ‖f₁ - f₂‖₁`; non-positive for an `L¹` contraction.
pub fn contraction_gap<T: Real>(
    sol1: &ResolventSolution<T>,
    sol2: &ResolventSolution<T>,
    f1: &GridFunction<T>,
    f2: &GridFunction<T>,
) -> Result<T> {
    let du = sol1.u.axpby(T::one(), &sol2.u, -T::one())?.lp_norm(Norm::L(T::one()));
    let df = f1.axpby(T::one(), f2, -T::one())?.lp_norm(Norm::L(T::one()));
    Ok(du - df)
}

/// `(∫u - ∫f) / ∫f`.
pub fn mass_balance<T: Real>(sol: &ResolventSolution<T>, f: &GridFunction<T>) -> Result<T> {
    sol.u.grid().check_same(f.grid(), "mass balance")?;
    let mf = f.integrate();
    if mf == T::zero() {
        return Err(Error::param("f", "has zero mass"));
    }
    Ok((sol.u.integrate() - mf) / mf)
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetrizationReport<T: Real = f64> {
    /// `v#` against the solution `V` with symmetrized data.
    pub v: ConcentrationReport<T>,
    /// `B(v#) = u#` against `B(V)`; present unless `B` is concave.
    pub u: Option<ConcentrationReport<T>>,
    pub iterations: [usize; 2],
}

impl<T: Real> SymmetrizationReport<T> {
    pub fn holds(&self) -> bool {
        self.v.relation.is_first_less_or_equal() && self.u.as_ref().is_none_or(|r| r.relation.is_first_less_or_equal())
    }
}

/// Solves with data `f` and with `f#` and compares `v#` with `V`.
pub fn elliptic_symmetrization_experiment<T: Real>(
    op: &DiscreteOperator<T>,
    f: &GridFunction<T>,
    nonlinearity: &Nonlinearity<T>,
    h: T,
    tolerance: Option<T>,
) -> Result<SymmetrizationReport<T>> {
    let fs = spherical_rearrangement(f, 1)?;
    let (a, b) = rayon::join(
        || solve_resolvent(&ResolventProblem::new(op, nonlinearity, h, f.clone())?),
        || solve_resolvent(&ResolventProblem::new(op, nonlinearity, h, fs)?),
    );
    let (sol, sym) = (a?, b?);
    let v = compare_concentration(&sol.v, &sym.v, tolerance)?;
    let u = match nonlinearity.b_curvature() {
        Curvature::Concave => None,
        _ => Some(compare_concentration(&sol.u, &sym.u, tolerance)?),
    };
    Ok(SymmetrizationReport { v, u, iterations: [sol.iterations, sym.iterations] })
}

#[derive(Clone, Debug, Serialize)]
pub struct CounterexampleParams {
    pub m: f64,
    pub radius: f64,
    pub sigma: f64,
    pub h: f64,
    pub half_width: f64,
    pub n_cells: usize,
    /// Largest admissible `h` for this `R`, `m` and `σ`.
    pub h_guard: f64,
    pub window: [f64; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct EllipticCounterexampleReport {
    pub params: CounterexampleParams,
    /// `[∫u, ∫u_R]` for the data `χ(-1,1)` and `R⁻¹χ(-R,R)`.
    pub masses: [f64; 2],
    /// Relation of `u_R` to `u`.
    pub relation: Relation,
    pub tail_slopes: [f64; 2],
    pub tail_prefactors: [f64; 2],
    /// `u_R / u` prefactor ratio on the window.
    pub tail_ratio: f64,
    pub violation: bool,
    pub concentration: ConcentrationReport<f64>,
    pub iterations: [usize; 2],
}

impl EllipticCounterexampleReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Maximal `h` for the counterexample: `0.1 R^σ R^{-(m-1)}` in one dimension.
pub fn counterexample_h_guard(m: f64, radius: f64, sigma: f64) -> f64 {
    0.1 * radius.powf(sigma) * radius.powf(-(m - 1.0))
}

/// Solves with `f = χ(-1,1)` and the same-mass, less concentrated
/// `f_R = R⁻¹χ(-R,R)`, fits both tails on `[L/4, 3L/4]` and reports whether
/// `u_R ≺ u` fails.
pub fn elliptic_counterexample(
    op: &DiscreteOperator<f64>,
    m: f64,
    radius: f64,
    h: f64,
    tolerance: Option<f64>,
) -> Result<(EllipticCounterexampleReport, [ResolventSolution<f64>; 2])> {
    if !(m >= 1.0) {
        return Err(Error::param("m", format!("must be at least 1, got {m}")));
    }
    if !(radius >= 1.0) {
        return Err(Error::param("R", format!("must be at least 1, got {radius}")));
    }
    let sigma = op.sigma();
    let grid = *op.grid();
    let l = grid.half_width();
    let guard = counterexample_h_guard(m, radius, sigma);
    if !(h > 0.0 && h <= guard) {
        return Err(Error::param("h", format!("must lie in (0, {guard:e}] for R={radius}, m={m}")));
    }
    let window = [0.25 * l, 0.75 * l];
    if window[0] <= 2.0 * radius {
        return Err(Error::Inconclusive(format!(
            "tail window starts at {} inside the data support; increase L above {}",
            window[0],
            8.0 * radius
        )));
    }
    let narrow = GridFunction::indicator(grid, -1.0, 1.0, 1.0)?;
    let wide = GridFunction::indicator(grid, -radius, radius, 1.0 / radius)?;
    let nl = Nonlinearity::power(m)?;
    let (a, b) = rayon::join(
        || solve_resolvent(&ResolventProblem::new(op, &nl, h, narrow)?),
        || solve_resolvent(&ResolventProblem::new(op, &nl, h, wide)?),
    );
    let (sol, sol_r) = (a?, b?);
    let fit = tail_fit(&sol.u, window)?;
    let fit_r = tail_fit(&sol_r.u, window)?;
    let concentration = compare_concentration(&sol_r.u, &sol.u, tolerance)?;
    let relation = concentration.relation;
    let violation = !relation.is_first_less_or_equal();
    let report = EllipticCounterexampleReport {
        params: CounterexampleParams {
            m,
            radius,
            sigma,
            h,
            half_width: l,
            n_cells: grid.n_cells(),
            h_guard: guard,
            window,
        },
        masses: [sol.u.integrate(), sol_r.u.integrate()],
        relation,
        tail_slopes: [fit.slope, fit_r.slope],
        tail_prefactors: [fit.prefactor, fit_r.prefactor],
        tail_ratio: fit_r.prefactor / fit.prefactor,
        violation,
        concentration,
        iterations: [sol.iterations, sol_r.iterations],
    };
    Ok((report, [sol, sol_r]))
}

/// Tail fits of both solutions, exposed for reporting.
pub fn counterexample_tails(sols: &[ResolventSolution<f64>; 2], window: [f64; 2]) -> Result<[TailFit; 2]> {
    Ok([tail_fit(&sols[0].u, window)?, tail_fit(&sols[1].u, window)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractional_laplacian::{assemble, OperatorSpec};
    use crate::grid::Grid1D;

    fn operator(l: f64, n: usize, sigma: f64) -> DiscreteOperator<f64> {
        assemble(OperatorSpec::singular_integral(sigma, Grid1D::new(l, n).unwrap()).unwrap()).unwrap()
    }

    fn bump(grid: Grid1D<f64>, centre: f64, width: f64) -> GridFunction<f64> {
        GridFunction::from_fn(grid, |x| ((1.0 - ((x - centre) / width).powi(2)).max(0.0)).powi(2)).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let op = operator(10.0, 64, 1.0);
        let nl = Nonlinearity::power(2.0).unwrap();
        let p = ResolventProblem::new(&op, &nl, 0.1, GridFunction::zeros(*op.grid())).unwrap();
        let s = solve_resolvent(&p).unwrap();
        assert_eq!(s.iterations, 1);
        assert_eq!(s.u.max_abs(), 0.0);
    }

    #[test]
    fn periodic_constant_is_fixed() {
        let g = Grid1D::new(5.0, 64).unwrap();
        let op = assemble(OperatorSpec::spectral(1.0, g).unwrap()).unwrap();
        let nl = Nonlinearity::linear();
        let f = GridFunction::from_fn(g, |_| 0.7).unwrap();
        let s = solve_resolvent(&ResolventProblem::new(&op, &nl, 1.0, f).unwrap()).unwrap();
        assert!(s.u.values().iter().all(|u: &f64| (u - 0.7).abs() < 1e-12));
    }

    #[test]
    fn rejects_bad_problems() {
        let op = operator(10.0, 64, 1.0);
        let nl = Nonlinearity::linear();
        let g = *op.grid();
        assert!(ResolventProblem::new(&op, &nl, 0.0, GridFunction::zeros(g)).is_err());
        let neg = GridFunction::from_fn(g, |x| x).unwrap();
        assert!(matches!(
            ResolventProblem::new(&op, &nl, 1.0, neg),
            Err(Error::NegativeState { .. })
        ));
        let other = GridFunction::zeros(Grid1D::new(10.0, 65).unwrap());
        assert!(ResolventProblem::new(&op, &nl, 1.0, other).is_err());
    }

    #[test]
    fn nonlinear_solves_converge() {
        let op = operator(20.0, 512, 1.0);
        let f = bump(*op.grid(), 1.0, 2.0);
        for m in [0.5, 1.0, 2.0, 3.0] {
            let nl = Nonlinearity::power(m).unwrap();
            for h in [1e-3, 0.1, 1.0] {
                let p = ResolventProblem::new(&op, &nl, h, f.clone()).unwrap();
                let s = solve_resolvent(&p).unwrap();
                let r = residual(&p, s.v.values());
                assert!(norm2(&r) <= 1e-10 * norm2(f.values()), "m={m} h={h}");
                assert!(s.u.values().iter().all(|u| *u >= 0.0));
            }
        }
    }

    #[test]
    fn mass_balance_and_errors() {
        let op = operator(40.0, 2048, 1.0);
        let g = *op.grid();
        let f = GridFunction::from_fn(g, |x| if x.abs() < 1.0 { 1.0 } else { 0.0 }).unwrap();
        let nl = Nonlinearity::linear();
        let s = solve_resolvent(&ResolventProblem::new(&op, &nl, 0.01, f.clone()).unwrap()).unwrap();
        assert!(mass_balance(&s, &f).unwrap().abs() < 1e-3);
        assert!(mass_balance(&s, &GridFunction::zeros(g)).is_err());
        assert!(contraction_gap(&s, &s, &f, &f).unwrap().abs() < 1e-12);
    }

    #[test]
    fn rearranged_data_give_equal_report() {
        let op = operator(10.0, 256, 1.0);
        let f = bump(*op.grid(), 0.0, 2.0);
        let nl = Nonlinearity::power(2.0).unwrap();
        let rep = elliptic_symmetrization_experiment(&op, &f, &nl, 0.1, None).unwrap();
        assert_eq!(rep.v.relation, Relation::Equal);
        assert!(rep.u.is_none());
    }

    #[test]
    fn counterexample_guards() {
        let op = operator(20.0, 256, 1.0);
        assert!(elliptic_counterexample(&op, 2.0, 4.0, 1.0, None).is_err());
        assert!(matches!(
            elliptic_counterexample(&op, 2.0, 4.0, 1e-3, None),
            Err(Error::Inconclusive(_))
        ));
        assert!((counterexample_h_guard(2.0, 4.0, 1.0) - 0.1).abs() < 1e-15);
    }
}
