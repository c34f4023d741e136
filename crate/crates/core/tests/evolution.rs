use fracsym_core::fractional_laplacian::poisson_kernel;
use fracsym_core::parabolic::{
    barenblatt_exponents, barenblatt_similarity_check, concentration_timeline, evolve_itd, evolve_pair_symmetrized,
    tail_fit, write_timeline_jsonl, ItdSchedule, SourceTerm,
};
use fracsym_core::rearrange::spherical_rearrangement;
use fracsym_core::{assemble, Grid64, GridFunction, NewtonControls, Nonlinearity, Norm, Operator64, OperatorSpec, Relation};
use proptest::prelude::*;

fn operator(l: f64, n: usize, sigma: f64) -> Operator64 {
    assemble(OperatorSpec::singular_integral(sigma, Grid64::new(l, n).unwrap()).unwrap()).unwrap()
}

fn l1_diff(a: &GridFunction<f64>, b: &GridFunction<f64>) -> f64 {
    a.axpby(1.0, b, -1.0).unwrap().lp_norm(Norm::L(1.0))
}

fn off_centre(grid: Grid64, centre: f64, width: f64, height: f64) -> GridFunction<f64> {
    GridFunction::from_fn(grid, |x| height * (1.0 - ((x - centre) / width).powi(2)).max(0.0)).unwrap()
}

#[test]
fn zero_data_stay_zero() {
    let op = operator(10.0, 128, 1.0);
    let s = ItdSchedule::every(1.0, 10, 5).unwrap();
    let nl = Nonlinearity::power(2.0).unwrap();
    let t = evolve_itd(&GridFunction::zeros(*op.grid()), &SourceTerm::Zero, &nl, &op, &s, NewtonControls::default()).unwrap();
    assert!(t.snapshots.iter().all(|(_, u)| u.max_abs() == 0.0));
    assert_eq!(t.diagnostics.len(), 11);
}

#[test]
fn heat_flow_reproduces_poisson_kernel() {
    let op = operator(60.0, 4096, 1.0);
    let g = *op.grid();
    let u0 = poisson_kernel(1.0, g).unwrap();
    let exact = poisson_kernel(2.0, g).unwrap();
    let nl = Nonlinearity::linear();
    let mut errs = Vec::new();
    for steps in [200, 400] {
        let s = ItdSchedule::new(1.0, steps, vec![steps]).unwrap();
        let t = evolve_itd(&u0, &SourceTerm::Zero, &nl, &op, &s, NewtonControls::default()).unwrap();
        errs.push(l1_diff(t.snapshot(steps).unwrap(), &exact));
    }
    assert!(errs[0] < 1e-2, "{errs:?}");
    assert!(errs[1] < errs[0], "{errs:?}");
}

#[test]
fn refinement_in_time_is_first_order() {
    let op = operator(20.0, 512, 1.0);
    let g = *op.grid();
    let u0 = off_centre(g, 0.5, 2.0, 1.0);
    let nl = Nonlinearity::power(2.0).unwrap();
    let run = |steps: usize| {
        let s = ItdSchedule::new(1.0, steps, vec![steps]).unwrap();
        evolve_itd(&u0, &SourceTerm::Zero, &nl, &op, &s, NewtonControls::default()).unwrap().snapshots[0].1.clone()
    };
    let (a, b, c) = (run(20), run(40), run(80));
    let ratio = l1_diff(&b, &c) / l1_diff(&a, &b);
    assert!((0.35..=0.65).contains(&ratio), "ratio {ratio}");
}

fn mass_loss(l: f64, n: usize, m: f64) -> f64 {
    let op = operator(l, n, 1.0);
    let u0 = GridFunction::indicator(*op.grid(), -1.0, 1.0, 1.0).unwrap();
    let nl = Nonlinearity::power(m).unwrap();
    let s = ItdSchedule::every(1.0, 40, 40).unwrap();
    let t = evolve_itd(&u0, &SourceTerm::Zero, &nl, &op, &s, NewtonControls::default()).unwrap();
    let m0 = t.diagnostics[0].mass;
    for w in t.diagnostics.windows(2) {
        assert!(w[1].mass <= w[0].mass + 1e-10 * m0, "m={m} step {}", w[1].k);
    }
    (m0 - t.diagnostics.last().unwrap().mass) / m0
}

#[test]
fn mass_is_non_increasing_and_nearly_conserved() {
    // the Cauchy tail outside [-L, L] carries about 2t/(pi L) of the mass
    for m in [1.0, 2.0] {
        let loss = mass_loss(100.0, 2048, m);
        assert!(loss < 1e-2, "m={m} lost {loss}");
    }
    // v = u^2 has slowly decaying tails, so the absorbing exterior drains more
    let losses = [mass_loss(60.0, 1024, 0.5), mass_loss(480.0, 8192, 0.5)];
    assert!(losses[1] < 0.5 * losses[0] && losses[1] < 1e-2, "{losses:?}");
}

#[test]
fn rearranged_data_with_radial_source_give_identical_twins() {
    let op = operator(15.0, 256, 0.8);
    let g = *op.grid();
    let u0 = off_centre(g, 0.0, 3.0, 1.0);
    assert_eq!(spherical_rearrangement(&u0, 1).unwrap().values(), u0.values());
    let source = SourceTerm::field(|x: f64, t: f64| (1.0 + t) * (-x * x).exp());
    let nl = Nonlinearity::power(0.5).unwrap();
    let s = ItdSchedule::every(0.5, 10, 5).unwrap();
    let (a, b) = evolve_pair_symmetrized(&u0, &source, &nl, &op, &s, NewtonControls::default()).unwrap();
    for ((_, x), (_, y)) in a.snapshots.iter().zip(&b.snapshots) {
        assert!(l1_diff(x, y) < 1e-12);
    }
    let timeline = concentration_timeline(&a, &a, None).unwrap();
    assert!(timeline.iter().all(|e| e.report.relation == Relation::Equal));
}

fn assert_timeline_ordered(m: f64, source: SourceTerm<f64>) {
    let op = operator(30.0, 1024, 1.0);
    let g = *op.grid();
    let u0 = off_centre(g, 3.0, 1.5, 1.0).axpby(1.0, &off_centre(g, -4.0, 0.7, 2.0), 1.0).unwrap();
    let nl = Nonlinearity::power(m).unwrap();
    let s = ItdSchedule::every(1.0, 50, 10).unwrap();
    let (a, b) = evolve_pair_symmetrized(&u0, &source, &nl, &op, &s, NewtonControls::default()).unwrap();
    let tol = 1e-6 * a.diagnostics.iter().map(|d| d.mass).fold(0.0, f64::max);
    let timeline = concentration_timeline(&a, &b, Some(tol)).unwrap();
    for e in &timeline {
        assert!(e.report.relation.is_first_less_or_equal(), "m={m} t={} {:?}", e.t, e.report);
        for [x, y] in e.norms {
            assert!(x <= y * (1.0 + 1e-9), "m={m} t={} norms {x} > {y}", e.t);
        }
    }
    assert!(timeline.iter().skip(1).any(|e| e.report.relation == Relation::FirstLess));
}

#[test]
fn fast_diffusion_twins_stay_ordered() {
    assert_timeline_ordered(0.5, SourceTerm::Zero);
}

#[test]
fn heat_twins_with_source_stay_ordered() {
    assert_timeline_ordered(1.0, SourceTerm::field(|x: f64, t: f64| (-(x - 2.0 * t).powi(2)).exp()));
}

#[test]
fn ordered_rearranged_data_and_sources_stay_ordered() {
    let op = operator(30.0, 1024, 1.0);
    let g = *op.grid();
    let u1 = GridFunction::indicator(g, -3.0, 3.0, 1.0 / 3.0).unwrap();
    let u2 = GridFunction::indicator(g, -1.0, 1.0, 1.0).unwrap();
    let f1 = SourceTerm::field(|x: f64, _| 0.25 * (-(x * x) / 4.0).exp());
    let f2 = SourceTerm::field(|x: f64, _| 0.5 * (-(x * x)).exp());
    let nl = Nonlinearity::power(0.5).unwrap();
    let s = ItdSchedule::every(1.0, 40, 10).unwrap();
    let c = NewtonControls::default();
    let a = evolve_itd(&u1, &f1, &nl, &op, &s, c).unwrap();
    let b = evolve_itd(&u2, &f2, &nl, &op, &s, c).unwrap();
    let timeline = concentration_timeline(&a, &b, Some(1e-6 * 4.0)).unwrap();
    for e in &timeline {
        assert!(e.report.relation.is_first_less_or_equal(), "t={} {:?}", e.t, e.report);
    }
}

#[test]
fn porous_medium_twins_report_through_timeline() {
    let op = operator(30.0, 512, 1.0);
    let g = *op.grid();
    let u0 = off_centre(g, 2.0, 1.0, 1.0);
    let nl = Nonlinearity::power(2.0).unwrap();
    let s = ItdSchedule::every(0.5, 10, 5).unwrap();
    let (a, b) = evolve_pair_symmetrized(&u0, &SourceTerm::Zero, &nl, &op, &s, NewtonControls::default()).unwrap();
    let timeline = concentration_timeline(&a, &b, None).unwrap();
    assert_eq!(timeline.len(), 3);
    let mut buf = Vec::new();
    write_timeline_jsonl(&timeline, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    let other = ItdSchedule::every(0.5, 10, 10).unwrap();
    let c = evolve_itd(&u0, &SourceTerm::Zero, &nl, &op, &other, NewtonControls::default()).unwrap();
    assert!(concentration_timeline(&a, &c, None).is_err());
}

#[test]
fn heat_tail_follows_poisson_decay() {
    let op = operator(100.0, 4096, 1.0);
    let u0 = GridFunction::indicator(*op.grid(), -0.5, 0.5, 1.0).unwrap();
    let s = ItdSchedule::new(1.0, 100, vec![100]).unwrap();
    let t = evolve_itd(&u0, &SourceTerm::Zero, &Nonlinearity::linear(), &op, &s, NewtonControls::default()).unwrap();
    let fit = tail_fit(t.snapshot(100).unwrap(), [20.0, 80.0]).unwrap();
    assert!((fit.slope + 2.0).abs() < 0.1, "{fit:?}");
}

#[test]
fn heat_flow_has_unit_similarity_exponents() {
    let op = operator(2000.0, 8192, 1.0);
    let g = *op.grid();
    let dx = g.spacing();
    let u0 = GridFunction::indicator(g, -0.5 * dx, 0.5 * dx, 1.0 / dx).unwrap();
    let s = ItdSchedule::at_times(50.0, 500, &[5.0, 10.0, 20.0, 35.0, 50.0]).unwrap();
    let t = evolve_itd(&u0, &SourceTerm::Zero, &Nonlinearity::linear(), &op, &s, NewtonControls::default()).unwrap();
    let fit = barenblatt_similarity_check(&t, 1.0, 1.0, 5.0).unwrap();
    assert_eq!(barenblatt_exponents(1.0, 1.0), (1.0, 1.0));
    assert!((fit.alpha_fit - 1.0).abs() < 0.05, "{fit:?}");
    assert!((fit.beta_fit - 1.0).abs() < 0.05, "{fit:?}");
}

#[test]
fn porous_medium_matches_barenblatt_exponents() {
    let op = operator(400.0, 8192, 1.0);
    let g = *op.grid();
    let u0 = GridFunction::indicator(g, -0.5, 0.5, 1.0).unwrap();
    let s = ItdSchedule::at_times(50.0, 500, &[5.0, 10.0, 20.0, 35.0, 50.0]).unwrap();
    let nl = Nonlinearity::power(2.0).unwrap();
    let t = evolve_itd(&u0, &SourceTerm::Zero, &nl, &op, &s, NewtonControls::default()).unwrap();
    let fit = barenblatt_similarity_check(&t, 2.0, 1.0, 5.0).unwrap();
    assert!((fit.alpha_predicted - 0.5).abs() < 1e-15);
    // the exponent lambda = beta * sigma stays below one
    assert!(fit.beta_predicted * 1.0 < 1.0);
    assert!((fit.alpha_fit / 0.5 - 1.0).abs() < 0.1, "{fit:?}");
    assert!((fit.beta_fit / 0.5 - 1.0).abs() < 0.1, "{fit:?}");
}

fn nonneg_data(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..2.0], n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn l1_contraction_in_time(a in nonneg_data(128), b in nonneg_data(128), m in prop::sample::select(vec![0.5, 1.0, 2.0])) {
        let op = operator(8.0, 128, 1.0);
        let g = *op.grid();
        let (ua, ub) = (GridFunction::new(g, a).unwrap(), GridFunction::new(g, b).unwrap());
        let nl = Nonlinearity::power(m).unwrap();
        let s = ItdSchedule::every(0.5, 10, 1).unwrap();
        let ta = evolve_itd(&ua, &SourceTerm::Zero, &nl, &op, &s, NewtonControls::default()).unwrap();
        let tb = evolve_itd(&ub, &SourceTerm::Zero, &nl, &op, &s, NewtonControls::default()).unwrap();
        let d: Vec<f64> = ta.snapshots.iter().zip(&tb.snapshots).map(|((_, x), (_, y))| l1_diff(x, y)).collect();
        for w in d.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-8 * d[0].max(1e-300), "{d:?}");
        }
    }

    #[test]
    fn comparison_in_time(a in nonneg_data(128), extra in nonneg_data(128), m in prop::sample::select(vec![0.5, 1.0, 2.0])) {
        let op = operator(8.0, 128, 0.6);
        let g = *op.grid();
        let lo = GridFunction::new(g, a).unwrap();
        let hi = lo.axpby(1.0, &GridFunction::new(g, extra).unwrap(), 1.0).unwrap();
        let nl = Nonlinearity::power(m).unwrap();
        let s = ItdSchedule::every(0.5, 10, 1).unwrap();
        let tl = evolve_itd(&lo, &SourceTerm::Zero, &nl, &op, &s, NewtonControls::default()).unwrap();
        let th = evolve_itd(&hi, &SourceTerm::Zero, &nl, &op, &s, NewtonControls::default()).unwrap();
        for ((_, x), (_, y)) in tl.snapshots.iter().zip(&th.snapshots) {
            for (p, q) in x.values().iter().zip(y.values()) {
                prop_assert!(*p <= *q + 1e-8);
            }
        }
    }
}
