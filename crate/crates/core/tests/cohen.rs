mod common;

use proptest::prelude::*;
use qha::cohen::{cohen_map, positive_expansion, scalogram, uncertainty_check};
use qha::convolution::func_op_convolve;
use qha::group::{correlate_functions, WindowSpec};
use qha::operator::{inner, OperatorRep};
use qha::signals::{cyclic_gaussian, log_gaussian, normalized};
use qha::{GroupPoint, LocallyCompactGroup, C64};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn matches_definition_and_is_covariant(seed in any::<u64>()) {
        for fx in [common::cyclic(6), common::affine()] {
            let mut r = common::seeded(seed);
            let m = &fx.model;
            let s = fx.operator(&mut r, 2);
            let (psi, phi) = (fx.vector(&mut r), fx.vector(&mut r));
            let q = cohen_map(m, &s, &psi, &phi, &fx.grid).unwrap();
            let scale = q.values.sup_norm();
            let at = |g: &GroupPoint| inner(&s.apply(&m.apply(g, &psi).unwrap()).unwrap(), &m.apply(g, &phi).unwrap());
            // y on the grid's lattice so σ(y)ψ stays exact.
            let y = fx.grid.node(fx.grid.len() / 2 + 3);
            let moved = cohen_map(m, &s, &m.apply(&y, &psi).unwrap(), &m.apply(&y, &phi).unwrap(), &fx.grid).unwrap();
            for i in (0..fx.grid.len()).step_by(fx.grid.len() / 29 + 1) {
                let x = fx.grid.node(i);
                prop_assert!((q.values.values()[i] - at(&x)).norm() <= 1e-12 * scale);
                let xy = m.group().compose(&x, &y).unwrap();
                prop_assert!((moved.values.values()[i] - at(&xy)).norm() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn positive_operators_give_nonnegative_maps(seed in any::<u64>()) {
        for fx in [common::cyclic(6), common::affine()] {
            let mut r = common::seeded(seed);
            let s = fx.density(&mut r, 3);
            let psi = fx.vector(&mut r);
            let q = cohen_map(&fx.model, &s, &psi, &psi, &fx.grid).unwrap();
            let scale = q.values.sup_norm();
            prop_assert!(q.values.values().iter().all(|v| v.re >= -1e-13 * scale && v.im.abs() <= 1e-13 * scale));
            let (sum, terms) = positive_expansion(&fx.model, &s, &psi, &fx.grid).unwrap();
            prop_assert!(terms.len() <= 3);
            for (a, b) in sum.values.values().iter().zip(q.values.values()) {
                prop_assert!((a - b).norm() <= 1e-11 * scale);
            }
        }
    }

    #[test]
    fn linear_in_the_operator(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let fx = common::cyclic(5);
        let mut r = common::seeded(seed);
        let (s, t) = (fx.operator(&mut r, 2), fx.operator(&mut r, 1));
        let (psi, phi) = (fx.vector(&mut r), fx.vector(&mut r));
        let (ca, cb) = (C64::new(a, 0.3), C64::new(b, -1.0));
        let combo = s.scale(ca).add(&t.scale(cb)).unwrap();
        let lhs = cohen_map(&fx.model, &combo, &psi, &phi, &fx.grid).unwrap().values;
        let qs = cohen_map(&fx.model, &s, &psi, &phi, &fx.grid).unwrap().values;
        let qt = cohen_map(&fx.model, &t, &psi, &phi, &fx.grid).unwrap().values;
        let rhs = qs.scaled(ca).add(&qt.scaled(cb)).unwrap();
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            prop_assert!((x - y).norm() <= 1e-12 * (1.0 + rhs.sup_norm()));
        }
    }

    #[test]
    fn convolved_operator_gives_correlated_map(seed in any::<u64>()) {
        let fx = common::cyclic(6);
        let mut r = common::seeded(seed);
        let f = fx.function(&mut r);
        let s = fx.operator(&mut r, 2);
        let (psi, phi) = (fx.vector(&mut r), fx.vector(&mut r));
        let lhs = cohen_map(&fx.model, &func_op_convolve(&fx.model, &f, &s).unwrap(), &psi, &phi, &fx.grid).unwrap();
        let rhs = correlate_functions(&f, &cohen_map(&fx.model, &s, &psi, &phi, &fx.grid).unwrap().values).unwrap();
        for (x, y) in lhs.values.values().iter().zip(rhs.values()) {
            prop_assert!((x - y).norm() <= 1e-12 * rhs.sup_norm());
        }
    }
}

#[test]
fn scalogram_is_rank_one_map() {
    let fx = common::affine();
    let mut r = common::seeded(8);
    let (xi, psi) = (fx.vector(&mut r), fx.vector(&mut r));
    let sc = scalogram(&fx.model, &xi, &psi, &fx.grid).unwrap();
    let q = cohen_map(&fx.model, &OperatorRep::rank_one(fx.basis().clone(), &xi, &xi).unwrap(), &psi, &psi, &fx.grid)
        .unwrap();
    for (a, b) in sc.values.values().iter().zip(q.values.values()) {
        assert!((a - b).norm() <= 1e-12 * q.values.sup_norm());
    }
}

#[test]
fn uncertainty_bound_holds_on_shrinking_boxes() {
    let fx = common::affine();
    let s = fx.density(&mut common::seeded(9), 1);
    let psi = normalized(&log_gaussian(fx.basis(), 1.5, 0.25, 0.0).unwrap()).unwrap();
    for k in 0..6 {
        let l = 1.4 - 0.2 * k as f64;
        let omega = WindowSpec::affine(-2.0 * l, 2.0 * l, (-l).exp(), l.exp());
        assert!(uncertainty_check(&fx.model, &s, &psi, &omega, &fx.grid).unwrap().bound_holds);
    }
    let fx = common::cyclic(16);
    let s = fx.density(&mut common::seeded(10), 1);
    let psi = normalized(&cyclic_gaussian(16, 3.0, 1.5, 2.0)).unwrap();
    for h in [16, 12, 8, 4, 1] {
        let rep = uncertainty_check(&fx.model, &s, &psi, &WindowSpec::cyclic(0, h, 0, h), &fx.grid).unwrap();
        assert!(rep.bound_holds, "{rep:?}");
        assert!((rep.mu_r - rep.mu_r_exact).abs() <= 1e-12);
    }
}

#[test]
fn probe_finds_negative_values_for_indefinite_operators() {
    use qha::cohen::positivity_probe;
    let fx = common::cyclic(6);
    let pos = fx.density(&mut common::seeded(12), 2);
    let probe = positivity_probe(&fx.model, &pos, &fx.grid, 8, 1).unwrap();
    assert!(!probe.found_negative(&pos, 1e-12));
    let mut d = vec![1.0; 6];
    d[2] = -5.0;
    let indefinite = OperatorRep::diagonal(fx.basis().clone(), &d).unwrap();
    let probe = positivity_probe(&fx.model, &indefinite, &fx.grid, 8, 1).unwrap();
    assert!(probe.found_negative(&indefinite, 1e-12), "{probe:?}");
}
