use fracsym_core::elliptic::{
    contraction_gap, elliptic_counterexample, elliptic_symmetrization_experiment, mass_balance,
};
use fracsym_core::rearrange::{compare_concentration, spherical_rearrangement};
use fracsym_core::{
    assemble, solve_resolvent, Grid1D, Grid64, GridFunction, Nonlinearity, Operator64, OperatorSpec, Relation,
    ResolventProblem,
};
use proptest::prelude::*;

fn singular(sigma: f64, l: f64, n: usize) -> Operator64 {
    assemble(OperatorSpec::singular_integral(sigma, Grid64::new(l, n).unwrap()).unwrap()).unwrap()
}

fn solve(op: &Operator64, m: f64, h: f64, f: &GridFunction<f64>) -> fracsym_core::ResolventSolution<f64> {
    let nl = Nonlinearity::power(m).unwrap();
    solve_resolvent(&ResolventProblem::new(op, &nl, h, f.clone()).unwrap()).unwrap()
}

/// Gaussian elimination with partial pivoting on a dense copy.
fn dense_solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs())).unwrap();
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        for row in col + 1..n {
            let factor = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row * n + row];
    }
    x
}

fn data(grid: Grid1D<f64>, seeds: &[f64]) -> GridFunction<f64> {
    let n = grid.n_cells();
    let v = (0..n).map(|i| seeds[i % seeds.len()] * (i as f64 / n as f64 * std::f64::consts::PI).sin().powi(2)).collect();
    GridFunction::new(grid, v).unwrap()
}

#[test]
fn linear_case_matches_direct_solve() {
    let op = singular(1.0, 8.0, 256);
    let f = data(*op.grid(), &[0.3, 1.0, 0.0, 0.7, 0.2]);
    let s = solve(&op, 1.0, 1.0, &f);
    let n = 256;
    let mut a = op.dense_matrix();
    for i in 0..n {
        a[i * n + i] += 1.0;
    }
    let x = dense_solve(a, f.values().to_vec());
    let err = s.u.values().iter().zip(&x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    assert!(err < 1e-10 * f.max_abs(), "{err:e}");
}

#[test]
fn residual_decreases_along_accepted_steps() {
    let op = singular(1.0, 20.0, 512);
    let f = GridFunction::indicator(*op.grid(), -1.0, 2.0, 1.0).unwrap();
    for m in [0.5, 2.0, 4.0] {
        let s = solve(&op, m, 0.05, &f);
        assert!(s.residual_history.windows(2).all(|w| w[1] < w[0]), "m={m}");
        assert_eq!(s.residual_norm, *s.residual_history.last().unwrap());
    }
}

#[test]
fn mass_is_conserved_up_to_truncation() {
    let op = singular(1.0, 40.0, 4096);
    let f = GridFunction::indicator(*op.grid(), -1.0, 1.0, 1.0).unwrap();
    assert!(mass_balance(&solve(&op, 1.0, 0.01, &f), &f).unwrap().abs() < 1e-3);
    assert!(mass_balance(&solve(&op, 2.0, 0.01, &f), &f).unwrap().abs() < 1e-2);
}

#[test]
fn perturbation_keeps_contraction() {
    let op = singular(0.8, 10.0, 512);
    let g = *op.grid();
    let f1 = data(g, &[1.0, 0.5]);
    let spike = GridFunction::indicator(g, 2.0, 2.1, 5.0).unwrap();
    let f2 = f1.axpby(1.0, &spike, 1.0).unwrap();
    for m in [0.5, 1.0, 2.0] {
        let (s1, s2) = (solve(&op, m, 0.1, &f1), solve(&op, m, 0.1, &f2));
        let df = spike.integrate();
        assert!(contraction_gap(&s1, &s2, &f1, &f2).unwrap() <= 1e-6 * df);
    }
}

#[test]
fn symmetrization_with_linear_b() {
    let op = singular(1.0, 20.0, 1024);
    let bump = GridFunction::from_fn(*op.grid(), |x: f64| (1.0 - (x - 3.0).powi(2)).max(0.0)).unwrap();
    let rep = elliptic_symmetrization_experiment(&op, &bump, &Nonlinearity::linear(), 0.5, None).unwrap();
    assert!(rep.holds(), "{rep:?}");
}

#[test]
fn convex_b_orders_u_but_not_v() {
    // With u = B(v) ≺ U of (nearly) equal mass and B⁻¹ strictly concave,
    // ∫v > ∫V, so v# ≺ V cannot hold on the whole line.
    let op = singular(0.5, 20.0, 1024);
    let two = GridFunction::from_fn(*op.grid(), |x: f64| {
        (1.0 - (x + 4.0).powi(2)).max(0.0) + 0.4 * (1.0 - ((x - 5.0) / 2.0).powi(2)).max(0.0)
    })
    .unwrap();
    let rep = elliptic_symmetrization_experiment(&op, &two, &Nonlinearity::power(0.5).unwrap(), 0.5, None).unwrap();
    let u = rep.u.as_ref().unwrap();
    assert!(u.relation.is_first_less_or_equal(), "{u:?}");
    assert_eq!(rep.v.relation, Relation::Incomparable);
    assert!(!rep.holds());
}

#[test]
fn counterexample_unit_radius_is_equal() {
    let op = singular(1.0, 40.0, 1024);
    let (rep, _) = elliptic_counterexample(&op, 2.0, 1.0, 1e-3, None).unwrap();
    assert_eq!(rep.relation, Relation::Equal);
    assert!(!rep.violation);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn l1_contraction(
        m in prop_oneof![Just(0.5), Just(1.0), Just(2.0)],
        a in prop::collection::vec(0.0f64..1.0, 64),
        b in prop::collection::vec(0.0f64..1.0, 64),
        h in 0.01f64..1.0,
    ) {
        let op = singular(1.0, 8.0, 64);
        let g = *op.grid();
        let (f1, f2) = (GridFunction::new(g, a).unwrap(), GridFunction::new(g, b).unwrap());
        let (s1, s2) = (solve(&op, m, h, &f1), solve(&op, m, h, &f2));
        let df = f1.axpby(1.0, &f2, -1.0).unwrap().lp_norm(fracsym_core::Norm::L(1.0));
        prop_assert!(contraction_gap(&s1, &s2, &f1, &f2).unwrap() <= 1e-6 * df);
    }

    #[test]
    fn comparison_principle(
        m in prop_oneof![Just(0.5), Just(1.0), Just(3.0)],
        a in prop::collection::vec(0.0f64..1.0, 64),
        extra in prop::collection::vec(0.0f64..0.5, 64),
    ) {
        let op = singular(1.3, 8.0, 64);
        let g = *op.grid();
        let f1 = GridFunction::new(g, a.clone()).unwrap();
        let f2 = GridFunction::new(g, a.iter().zip(&extra).map(|(x, y)| x + y).collect()).unwrap();
        let (s1, s2) = (solve(&op, m, 0.2, &f1), solve(&op, m, 0.2, &f2));
        for (u1, u2) in s1.u.values().iter().zip(s2.u.values()) {
            prop_assert!(*u1 <= u2 + 1e-8);
        }
    }

    #[test]
    fn radial_data_give_radial_solutions(
        m in prop_oneof![Just(0.5), Just(1.0), Just(2.0)],
        a in prop::collection::vec(0.0f64..1.0, 64),
    ) {
        let op = singular(0.9, 8.0, 64);
        let g = *op.grid();
        let f = spherical_rearrangement(&GridFunction::new(g, a).unwrap(), 1).unwrap();
        let s = solve(&op, m, 0.3, &f);
        let sharp = spherical_rearrangement(&s.u, 1).unwrap();
        for (p, q) in s.u.values().iter().zip(sharp.values()) {
            prop_assert!((p - q).abs() <= 1e-8);
        }
    }

    #[test]
    fn rearranged_pairs_keep_their_order(
        m in prop_oneof![Just(0.5), Just(1.0), Just(2.0)],
        a in prop::collection::vec(0.0f64..1.0, 64),
        weight in 0.0f64..1.0,
    ) {
        let op = singular(1.0, 8.0, 64);
        let g = *op.grid();
        let f2 = spherical_rearrangement(&GridFunction::new(g, a.clone()).unwrap(), 1).unwrap();
        let n = a.len();
        let mixed: Vec<f64> = (0..n).map(|i| weight * a[i] + (1.0 - weight) * a[(i + 17) % n]).collect();
        let f1 = spherical_rearrangement(&GridFunction::new(g, mixed).unwrap(), 1).unwrap();
        let (s1, s2) = (solve(&op, m, 0.3, &f1), solve(&op, m, 0.3, &f2));
        let tol = 1e-8 * f2.integrate();
        // concave or linear B orders v; convex B orders u = B(v)
        let (x1, x2) = if m >= 1.0 { (&s1.v, &s2.v) } else { (&s1.u, &s2.u) };
        let rep = compare_concentration(x1, x2, Some(tol)).unwrap();
        prop_assert!(rep.relation.is_first_less_or_equal(), "{rep:?}");
    }
}
