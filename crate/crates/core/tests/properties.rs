//! Property tests for invariants that hold for every admissible input.

use kirchhoff::expr::Expression;
use kirchhoff::family::{GradientMap, ScalingMap};
use kirchhoff::kirchhoff_map::{big_g, find_g_roots, g_epsilon, solve_delta_epsilon, DeltaOptions, KirchhoffFunction, RootScan};
use kirchhoff::numerics::log_space;
use kirchhoff::output::{validate_csv, Table};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn g_positive_below_lower_bound(a in 0.1f64..5.0, b in 0.0f64..3.0, big_a in 0.1f64..10.0, dim in 1usize..4, eps in 1e-3f64..0.5, frac in 0.01f64..0.99) {
        let m = KirchhoffFunction::affine(a, b);
        let map = ScalingMap::new(dim, big_a);
        let delta = frac * a.sqrt() * eps;
        prop_assert!(g_epsilon(&m, &map, eps, delta).unwrap() > 0.0);
    }

    #[test]
    fn delta_eps_respects_bounds(a in 0.1f64..5.0, b in 0.0f64..3.0, big_a in 0.1f64..10.0, dim in 1usize..4, eps in 1e-3f64..0.5) {
        let m = KirchhoffFunction::affine(a, b);
        let map = ScalingMap::new(dim, big_a);
        let c = solve_delta_epsilon(&m, &map, eps, &DeltaOptions::default()).unwrap();
        prop_assert!(c.within_bounds());
        prop_assert!(c.g_at_delta.abs() <= 1e-9 * c.delta * c.delta);
        // scaling law: the ratio is the smallest root of G
        let root = c.c_star.unwrap();
        prop_assert!((c.ratio - root).abs() <= 1e-9 * root);
    }

    #[test]
    fn ratio_is_eps_independent_for_pure_scaling(a in 0.1f64..5.0, b in 0.0f64..3.0, big_a in 0.1f64..10.0, e1 in 1e-3f64..0.5, e2 in 1e-3f64..0.5) {
        let m = KirchhoffFunction::affine(a, b);
        let map = ScalingMap::new(3, big_a);
        let r1 = solve_delta_epsilon(&m, &map, e1, &DeltaOptions::default()).unwrap().ratio;
        let r2 = solve_delta_epsilon(&m, &map, e2, &DeltaOptions::default()).unwrap().ratio;
        prop_assert!((r1 - r2).abs() <= 1e-9 * r1);
    }

    #[test]
    fn g_roots_are_sorted_zeros(a in 0.01f64..2.0, b in 0.1f64..3.0, big_a in 0.1f64..5.0, dim in 1usize..6) {
        let m = KirchhoffFunction::affine(a, b);
        if let Ok(r) = find_g_roots(&m, big_a, dim, (1e-3, 1e3), &RootScan::default()) {
            prop_assert!(r.roots.windows(2).all(|w| w[0] < w[1]));
            prop_assert_eq!(r.c_star, r.roots[0]);
            for t in &r.roots {
                prop_assert!(big_g(&m, big_a, dim, *t).unwrap().abs() <= 1e-9 * (1.0 + t * t));
            }
        }
    }

    #[test]
    fn scaling_map_is_homogeneous(dim in 1usize..6, big_a in 0.1f64..10.0, d in 1e-3f64..10.0) {
        let map = ScalingMap::new(dim, big_a);
        let g = map.grad_norm_sq(d).unwrap();
        prop_assert!((g - d.powi(dim as i32 - 2) * big_a).abs() <= 1e-14 * g.abs());
    }

    #[test]
    fn polynomial_derivative_matches_difference(c0 in -3.0f64..3.0, c1 in -3.0f64..3.0, c2 in -3.0f64..3.0, x in -2.0f64..2.0) {
        let src = format!("{c0} + {c1}*x + {c2}*x^3 + sin(x)");
        let e = Expression::parse(&src).unwrap();
        let d = e.derivative(0);
        let h = 1e-5;
        let fd = (e.eval1(x + h) - e.eval1(x - h)) / (2.0 * h);
        prop_assert!((d.eval1(x) - fd).abs() < 1e-6 * (1.0 + fd.abs()));
        // the printed derivative parses back to the same function
        let again = Expression::parse(d.source()).unwrap();
        prop_assert!((again.eval1(x) - d.eval1(x)).abs() <= 1e-12 * (1.0 + d.eval1(x).abs()));
    }

    #[test]
    fn log_space_is_increasing_with_exact_ends(lo in 1e-6f64..1.0, span in 1.5f64..1e6, n in 2usize..500) {
        let hi = lo * span;
        let v = log_space(lo, hi, n);
        prop_assert_eq!(v.len(), n);
        prop_assert_eq!(v[0], lo);
        prop_assert_eq!(v[n - 1], hi);
        prop_assert!(v.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn csv_floats_round_trip(values in prop::collection::vec(-1e300f64..1e300, 1..20)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::floats(&["x"]);
        for v in &values {
            t.push(vec![(*v).into()]);
        }
        t.write(&path).unwrap();
        prop_assert_eq!(validate_csv(&path, &t.columns).unwrap(), values.len());
        let back: Vec<f64> = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(&path)
            .unwrap()
            .records()
            .map(|r| r.unwrap()[0].parse().unwrap())
            .collect();
        prop_assert_eq!(back, values);
    }
}
