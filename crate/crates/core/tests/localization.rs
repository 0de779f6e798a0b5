mod common;

use proptest::prelude::*;
use qha::group::{GroupFunction, WindowSpec};
use qha::localization::{
    berezin_lieb_function_side, berezin_lieb_operator_side, lemma_constant, localization_operator,
    localization_report, minimax_check, s_tilde, scaling_experiment, ConvexFn, ScalingConfig,
};
use qha::operator::OperatorRep;
use qha::{QhaError, C64};

const PHIS: [ConvexFn; 3] = [ConvexFn::Identity, ConvexFn::Square, ConvexFn::ShiftedRelu(0.3)];

fn window(n: usize) -> impl Strategy<Value = WindowSpec> {
    (0..n, 1..=n, 0..n, 1..=n).prop_map(move |(j, h, k, w)| WindowSpec::cyclic(j, (j + h).min(n), k, (k + w).min(n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn spectrum_in_unit_interval_and_lemma(seed in any::<u64>(), omega in window(8), delta in 0.05f64..0.95) {
        let fx = common::cyclic(8);
        let s = fx.density(&mut common::seeded(seed), 2);
        let st = s_tilde(&fx.model, &s, &fx.grid).unwrap();
        let rep = localization_report(&fx.model, &omega, &s, delta, &fx.grid, &st, 1.0).unwrap();
        prop_assert!(rep.eig_min >= -1e-12 && rep.eig_max <= 1.0 + 1e-12);
        prop_assert!((rep.mu_r - rep.mu_r_exact).abs() <= 1e-12);
        prop_assert!((rep.trace - rep.trace_s * rep.mu_r).abs() <= 1e-12);
        prop_assert!(rep.lemma_holds, "{:?}", rep);
        prop_assert!((rep.second_moment - rep.hs_norm_sq).abs() <= 1e-10 * (1.0 + rep.hs_norm_sq));
    }

    #[test]
    fn minimax_top_eigenvalue(seed in any::<u64>()) {
        for fx in [common::cyclic(6), common::affine()] {
            let mut r = common::seeded(seed);
            let f = fx.function(&mut r);
            let s = fx.density(&mut r, 2);
            let m = minimax_check(&fx.model, &f, &s, 4, 3, seed).unwrap();
            let tol = if fx.affine { 1e-9 } else { 1e-12 };
            prop_assert!(m.max_excess <= tol * m.lambda_max);
            prop_assert!(!fx.affine || m.best_random <= m.lambda_max * (1.0 + tol));
            if !fx.affine {
                prop_assert!((m.at_eigenvector - m.lambda_max).abs() <= 1e-12 * m.lambda_max);
            }
        }
    }

    #[test]
    fn berezin_lieb_on_cyclic(seed in any::<u64>()) {
        let fx = common::cyclic(6);
        let mut r = common::seeded(seed);
        let f = fx.function(&mut r);
        let (t, s) = (fx.density(&mut r, 3), fx.density(&mut r, 2));
        for phi in PHIS {
            prop_assert!(berezin_lieb_operator_side(&fx.model, &t, &s, phi, &fx.grid).unwrap().holds);
            prop_assert!(berezin_lieb_function_side(&fx.model, &f, &s, phi).unwrap().holds);
        }
    }
}

#[test]
fn identity_is_tight_in_berezin_lieb() {
    let fx = common::cyclic(5);
    let mut r = common::seeded(2);
    let (t, s) = (fx.density(&mut r, 2), fx.density(&mut r, 1));
    let rep = berezin_lieb_operator_side(&fx.model, &t, &s, ConvexFn::Identity, &fx.grid).unwrap();
    assert!((rep.lhs - rep.rhs).abs() <= 1e-12 * rep.rhs);
}

#[test]
fn full_window_gives_trace_multiple_of_identity() {
    let fx = common::cyclic(6);
    let s = fx.density(&mut common::seeded(4), 2);
    let a = localization_operator(&fx.model, &WindowSpec::cyclic_full(6), &s, &fx.grid).unwrap();
    let want = OperatorRep::identity(fx.basis().clone()).scale(s.trace());
    assert!(common::op_gap(&a, &want) <= 1e-12);
}

#[test]
fn convex_fn_names_round_trip() {
    for phi in PHIS {
        assert_eq!(ConvexFn::parse(&phi.name()), Some(phi));
    }
    assert_eq!(ConvexFn::parse("cube"), None);
    assert_eq!(ConvexFn::Identity.eval(-0.5), None);
    assert_eq!(lemma_constant(0.25), 4.0);
    assert_eq!(lemma_constant(0.5), 2.0);
}

#[test]
fn invalid_requests_are_rejected() {
    let fx = common::cyclic(6);
    let s = fx.density(&mut common::seeded(5), 1);
    let st = s_tilde(&fx.model, &s, &fx.grid).unwrap();
    let omega = WindowSpec::cyclic(0, 3, 0, 3);
    for delta in [0.0, 1.0, -0.2, 1.5] {
        let res = localization_report(&fx.model, &omega, &s, delta, &fx.grid, &st, 1.0);
        assert!(matches!(res, Err(QhaError::InvalidParameter(_))));
    }
    let res = scaling_experiment(&fx.model, &omega, &s, 0.5, &[1.0], &ScalingConfig::default());
    assert!(matches!(res, Err(QhaError::Unsupported { .. })));
    let neg = s.scale(C64::new(-1.0, 0.0));
    assert!(s_tilde(&fx.model, &neg, &fx.grid).is_err());
    let mut vals = vec![C64::new(1.0, 0.0); fx.grid.len()];
    vals[0] = C64::new(-1.0, 0.0);
    let f = GroupFunction::new(fx.grid.clone(), vals).unwrap();
    assert!(berezin_lieb_function_side(&fx.model, &f, &s, ConvexFn::Square).is_err());

    let fx = common::affine();
    let s = fx.density(&mut common::seeded(6), 1);
    let big = WindowSpec::affine(-10.0, 10.0, 0.5, 2.0);
    assert!(matches!(
        localization_operator(&fx.model, &big, &s, &fx.grid),
        Err(QhaError::WindowExceedsGrid(_))
    ));
    // Not normalized as a density: rejected before any grid is built.
    let raw = s.scale(C64::new(3.0, 0.0));
    let omega = WindowSpec::affine(-0.5, 0.5, 0.8, 1.25);
    assert!(scaling_experiment(&fx.model, &omega, &raw, 0.5, &[1.0], &ScalingConfig::default()).is_err());
}
