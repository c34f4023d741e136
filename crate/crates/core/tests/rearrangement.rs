use fracsym_core::rearrange::{
    compare_concentration, convex_order_check, decreasing_rearrangement, distribution_function,
    hardy_littlewood_check, is_rearranged, spherical_rearrangement,
};
use fracsym_core::{Grid64, GridFunction, Norm, Relation};
use proptest::prelude::*;

fn grid_function(max_cells: usize) -> impl Strategy<Value = GridFunction<f64>> {
    (8usize..max_cells, 0.5f64..20.0).prop_flat_map(|(n, l)| {
        prop::collection::vec(prop_oneof![Just(0.0), -3.0f64..3.0, 0.0f64..1e-3], n)
            .prop_map(move |v| GridFunction::new(Grid64::new(l, v.len()).unwrap(), v).unwrap())
    })
}

fn pair(max_cells: usize) -> impl Strategy<Value = (GridFunction<f64>, GridFunction<f64>)> {
    (8usize..max_cells, 0.5f64..20.0).prop_flat_map(|(n, l)| {
        let v = prop::collection::vec(0.0f64..2.0, n);
        (v.clone(), v).prop_map(move |(a, b)| {
            let g = Grid64::new(l, n).unwrap();
            (GridFunction::new(g, a).unwrap(), GridFunction::new(g, b).unwrap())
        })
    })
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #[test]
    fn norms_are_preserved(f in grid_function(200)) {
        let star = decreasing_rearrangement(&f);
        let sharp = spherical_rearrangement(&f, 1).unwrap();
        for p in [Norm::L(1.0), Norm::L(2.0), Norm::L(3.5), Norm::Inf] {
            let a = f.lp_norm(p);
            prop_assert!(rel_close(a, star.lp_norm(p), 1e-13));
            prop_assert!(rel_close(a, sharp.lp_norm(p), 1e-13));
        }
    }

    #[test]
    fn distribution_functions_agree(f in grid_function(200), level in 0.0f64..3.0) {
        let sharp = spherical_rearrangement(&f, 1).unwrap();
        prop_assert_eq!(distribution_function(&f, level).unwrap(), distribution_function(&sharp, level).unwrap());
        let star = decreasing_rearrangement(&f).distribution(level);
        prop_assert!((distribution_function(&f, level).unwrap() - star).abs() <= 1e-14 * f.grid().half_width());
    }

    #[test]
    fn rearrangement_is_idempotent_and_symmetric(f in grid_function(200)) {
        let sharp = spherical_rearrangement(&f, 1).unwrap();
        prop_assert!(is_rearranged(&sharp));
        let again = spherical_rearrangement(&sharp, 1).unwrap();
        prop_assert_eq!(again.values(), sharp.values());
        // mirror cells differ by at most one sorted step
        let v = sharp.values();
        let n = v.len();
        let star = decreasing_rearrangement(&f);
        let steps = star.values();
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let rank = steps.iter().position(|s| *s == v[i]).unwrap();
            let next = steps.get(rank + 1).copied().unwrap_or(0.0);
            prop_assert!(v[j] <= v[i] && v[j] >= next.min(v[i]));
        }
    }

    #[test]
    fn hardy_littlewood_holds((f, g) in pair(200)) {
        let hl = hardy_littlewood_check(&f, &g).unwrap();
        prop_assert!(hl.holds, "{} > {}", hl.lhs, hl.rhs);
    }

    #[test]
    fn self_comparison_is_equal(f in grid_function(100)) {
        let sharp = spherical_rearrangement(&f, 1).unwrap();
        prop_assert_eq!(compare_concentration(&f, &sharp, None).unwrap().relation, Relation::Equal);
    }

    #[test]
    fn averaging_lowers_concentration(g in pair(120).prop_map(|p| p.1), shift in 1usize..100, weight in 0.0f64..1.0, shrink in 0.5f64..1.0) {
        // a convex combination of permutations of g, scaled down, is ≺ g
        let gv = g.values();
        let n = gv.len();
        let mixed: Vec<f64> = (0..n)
            .map(|i| shrink * (weight * gv[i] + (1.0 - weight) * gv[(i + shift) % n]))
            .collect();
        let lo = spherical_rearrangement(&GridFunction::new(*g.grid(), mixed).unwrap(), 1).unwrap();
        let hi = spherical_rearrangement(&g, 1).unwrap();
        let rep = compare_concentration(&lo, &hi, Some(1e-12 * hi.lp_norm(Norm::L(1.0)))).unwrap();
        prop_assert!(rep.relation.is_first_less_or_equal(), "{rep:?}");
        let top = hi.max_abs();
        prop_assert!(convex_order_check(&lo, &hi, |t| t).unwrap());
        prop_assert!(convex_order_check(&lo, &hi, |t| t * t).unwrap());
        for k in 0..8 {
            let c = top * k as f64 / 8.0;
            prop_assert!(convex_order_check(&lo, &hi, move |t: f64| (t - c).max(0.0) - (-c).max(0.0)).unwrap());
        }
    }
}

#[test]
fn convex_order_rejects_unrearranged_inputs() {
    let g = Grid64::new(1.0, 8).unwrap();
    let f = GridFunction::from_fn(g, |x| x + 2.0).unwrap();
    assert!(convex_order_check(&f, &f, |t| t).is_err());
}
