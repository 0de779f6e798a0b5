mod common;

use std::sync::Arc;

use proptest::prelude::*;
use qha::group::{
    build_grid, convolve_functions, correlate_functions, right_haar_measure, scale_set, GroupFunction, HaarGrid,
    WindowSpec,
};
use qha::{GroupModel, GroupPoint, LocallyCompactGroup, QhaError, C64};

fn affine_point() -> impl Strategy<Value = GroupPoint> {
    (-5.0f64..5.0, -2.0f64..2.0).prop_map(|(x, l)| GroupPoint::new(x, l.exp()))
}

fn cyclic_point(n: usize) -> impl Strategy<Value = GroupPoint> {
    (0..n, 0..n).prop_map(|(j, k)| GroupPoint::new(j as f64, k as f64))
}

fn close(g: &GroupPoint, h: &GroupPoint) -> bool {
    (g.c0 - h.c0).abs() <= 1e-12 * (1.0 + g.c0.abs()) && (g.c1 - h.c1).abs() <= 1e-12 * g.c1.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn affine_group_laws(a in affine_point(), b in affine_point(), c in affine_point()) {
        let g = GroupModel::Affine;
        let lhs = g.compose(&g.compose(&a, &b).unwrap(), &c).unwrap();
        let rhs = g.compose(&a, &g.compose(&b, &c).unwrap()).unwrap();
        prop_assert!(close(&lhs, &rhs));
        prop_assert!(close(&g.compose(&a, &g.inverse(&a).unwrap()).unwrap(), &g.identity()));
        prop_assert!(close(&g.compose(&g.inverse(&a).unwrap(), &a).unwrap(), &g.identity()));
        let m = g.modular(&g.compose(&a, &b).unwrap()).unwrap();
        prop_assert!((m - g.modular(&a).unwrap() * g.modular(&b).unwrap()).abs() <= 1e-12 * m);
    }

    #[test]
    fn cyclic_group_laws(a in cyclic_point(7), b in cyclic_point(7), c in cyclic_point(7)) {
        let g = GroupModel::cyclic(7).unwrap();
        let lhs = g.compose(&g.compose(&a, &b).unwrap(), &c).unwrap();
        prop_assert_eq!(lhs, g.compose(&a, &g.compose(&b, &c).unwrap()).unwrap());
        prop_assert_eq!(g.compose(&a, &b).unwrap(), g.compose(&b, &a).unwrap());
        prop_assert_eq!(g.compose(&a, &g.inverse(&a).unwrap()).unwrap(), g.identity());
        prop_assert_eq!(g.modular(&a).unwrap(), 1.0);
    }

    #[test]
    fn haar_densities_differ_by_modular(a in affine_point()) {
        let g = GroupModel::Affine;
        let ratio = g.left_haar_density(&a).unwrap() / g.right_haar_density(&a).unwrap();
        prop_assert!((ratio - g.modular(&a).unwrap()).abs() <= 1e-12 * ratio);
    }

    #[test]
    fn metric_axioms(a in affine_point(), b in affine_point(), c in affine_point()) {
        let g = GroupModel::Affine;
        let d = |p: &GroupPoint, q: &GroupPoint| g.distance(p, q).unwrap();
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert!((d(&a, &b) - d(&b, &a)).abs() <= 1e-12 * (1.0 + d(&a, &b)));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
    }

    #[test]
    fn scaled_window_measure(x0 in -2.0f64..0.0, w in 0.1f64..2.0, l0 in -1.0f64..0.5, h in 0.1f64..1.0, r in 0.2f64..6.0) {
        let g = GroupModel::Affine;
        let omega = WindowSpec::affine(x0, x0 + w, l0.exp(), (l0 + h).exp());
        let base = right_haar_measure(&omega, &g).unwrap();
        prop_assert!((base - w * h).abs() <= 1e-12 * base);
        let scaled = right_haar_measure(&scale_set(r, &omega, &g).unwrap(), &g).unwrap();
        prop_assert!((scaled - r * r * base).abs() <= 1e-10 * scaled);
    }

    #[test]
    fn cyclic_quadrature_is_invariant(seed in any::<u64>(), y in cyclic_point(6)) {
        let grid = Arc::new(HaarGrid::cyclic_full(6).unwrap());
        let g = *grid.group();
        let mut r = common::seeded(seed);
        let f = common::cyclic(6).function(&mut r);
        let total = f.integral_r();
        let right = GroupFunction::from_fn(grid.clone(), |x| f.evaluate(&g.compose(x, &y).unwrap()));
        let left = GroupFunction::from_fn(grid.clone(), |x| f.evaluate(&g.compose(&y, x).unwrap()));
        prop_assert!(common::rel(right.integral_r(), total) <= 1e-13);
        prop_assert!(common::rel(left.integral_l(), f.integral_l()) <= 1e-13);
    }

    #[test]
    fn cyclic_convolution_matches_sum(seed in any::<u64>()) {
        let fx = common::cyclic(5);
        let mut r = common::seeded(seed);
        let (f, h) = (fx.function(&mut r), fx.function(&mut r));
        let grid = &fx.grid;
        let g = *grid.group();
        let conv = convolve_functions(&f, &h).unwrap();
        let corr = correlate_functions(&f, &h).unwrap();
        for i in 0..grid.len() {
            let x = grid.node(i);
            let (mut a, mut b) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
            for j in 0..grid.len() {
                let y = grid.node(j);
                let w = grid.weights_r()[j];
                a += f.values()[j] * h.evaluate(&g.compose(&x, &g.inverse(&y).unwrap()).unwrap()) * w;
                b += f.values()[j] * h.evaluate(&g.compose(&y, &x).unwrap()) * w;
            }
            prop_assert!((conv.values()[i] - a).norm() <= 1e-13);
            prop_assert!((corr.values()[i] - b).norm() <= 1e-13);
        }
    }
}

#[test]
fn lattice_grid_measures_boxes() {
    let step = 0.05;
    let grid = HaarGrid::affine_lattice(-2.0, 2.0, 80, step, -20, 20).unwrap();
    // Box edges on cell boundaries: exact up to rounding.
    let omega = WindowSpec::affine(-1.0, 1.0, (-10.5f64 * step).exp(), (9.5f64 * step).exp());
    let exact = right_haar_measure(&omega, &GroupModel::Affine).unwrap();
    assert!((grid.window_measure(&omega) - exact).abs() <= 1e-12);
    assert!((grid.total_r() - 4.0 * 41.0 * step).abs() <= 1e-12);
}

#[test]
fn grid_columns_round_trip() {
    let grid = build_grid(&WindowSpec::affine(-1.0, 1.0, 0.5, 2.0), [4, 3], &GroupModel::Affine).unwrap();
    let mut out = Vec::new();
    grid.write_columns(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x a weight_r weight_l"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(' ').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), grid.len());
    for (i, row) in rows.iter().enumerate() {
        let g = grid.node(i);
        assert_eq!(row, &vec![g.x(), g.a(), grid.weights_r()[i], grid.weights_l()[i]]);
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    let g = GroupModel::Affine;
    assert!(matches!(g.point(0.0, -1.0), Err(QhaError::InvalidPoint(..))));
    assert!(matches!(GroupModel::cyclic(1), Err(QhaError::InvalidParameter(_))));
    assert!(HaarGrid::affine_lattice(0.0, 1.0, 1, 0.1, 0, 3).is_err());
    assert!(scale_set(-1.0, &WindowSpec::affine(0.0, 1.0, 1.0, 2.0), &g).is_err());
    let c = GroupModel::cyclic(4).unwrap();
    assert!(c.distance(&c.identity(), &c.identity()).is_err());
}
