mod common;

use proptest::prelude::*;
use qha::convolution::{
    admissibility_report, func_op_convolve, func_op_convolve_reference, make_density_operator, op_op_convolve,
    quantize,
};
use qha::group::{convolve_functions, GroupFunction};
use qha::operator::{OperatorRep, Vector};
use qha::representation::apply_duflo_inv;
use qha::{DufloMoore, QhaError, C64};

use common::{op_gap, rel, Fixture};

/// `tr(T σ(x)* S σ(x))` through dense matrices.
fn op_op_dense(fx: &Fixture, t: &OperatorRep, s: &OperatorRep, i: usize) -> C64 {
    let u = fx.model.rep_matrix(&fx.grid.node(i)).unwrap();
    (t.matrix() * u.adjoint() * s.matrix() * &*u).trace()
}

fn lp(f: &GroupFunction, p: f64) -> f64 {
    if p.is_infinite() {
        f.sup_norm()
    } else {
        f.lp_norm_r(p).unwrap()
    }
}

fn sp(a: &OperatorRep, p: f64) -> f64 {
    if p.is_infinite() {
        a.operator_norm()
    } else {
        a.schatten_norm(p).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn kernels_match_dense_reference(seed in any::<u64>()) {
        for fx in [common::cyclic(6), common::affine()] {
            let mut r = common::seeded(seed);
            let f = fx.function(&mut r);
            let (s, t) = (fx.operator(&mut r, 2), fx.operator(&mut r, 2));
            let fast = func_op_convolve(&fx.model, &f, &s).unwrap();
            prop_assert!(op_gap(&fast, &func_op_convolve_reference(&fx.model, &f, &s).unwrap()) <= 1e-12);
            let ts = op_op_convolve(&fx.model, &t, &s, &fx.grid).unwrap();
            let scale = ts.sup_norm();
            for i in (0..fx.grid.len()).step_by(fx.grid.len() / 23 + 1) {
                prop_assert!((ts.values()[i] - op_op_dense(&fx, &t, &s, i)).norm() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn trace_identity_and_adjointness(seed in any::<u64>()) {
        for fx in [common::cyclic(7), common::affine()] {
            let mut r = common::seeded(seed);
            let f = fx.function(&mut r);
            let (s, t) = (fx.operator(&mut r, 3), fx.operator(&mut r, 2));
            let fs = func_op_convolve(&fx.model, &f, &s).unwrap();
            prop_assert!(rel(fs.trace(), s.trace() * f.integral_r()) <= 1e-10);
            let lhs = t.compose(&fs).unwrap().trace();
            let rhs = f.mul(&op_op_convolve(&fx.model, &t, &s, &fx.grid).unwrap()).unwrap().integral_r();
            prop_assert!(rel(lhs, rhs) <= 1e-10);
        }
    }

    #[test]
    fn cyclic_compatibility(seed in any::<u64>()) {
        let fx = common::cyclic(6);
        let mut r = common::seeded(seed);
        let (f, g) = (fx.function(&mut r), fx.function(&mut r));
        let (t, s) = (fx.operator(&mut r, 2), fx.operator(&mut r, 2));
        let m = &fx.model;
        let lhs = op_op_convolve(m, &func_op_convolve(m, &f, &t).unwrap(), &s, &fx.grid).unwrap();
        let rhs = convolve_functions(&f, &op_op_convolve(m, &t, &s, &fx.grid).unwrap()).unwrap();
        for (a, b) in lhs.values().iter().zip(rhs.values()) {
            prop_assert!((a - b).norm() <= 1e-12 * rhs.sup_norm());
        }
        let a = func_op_convolve(m, &f, &func_op_convolve(m, &g, &t).unwrap()).unwrap();
        let b = func_op_convolve(m, &convolve_functions(&f, &g).unwrap(), &t).unwrap();
        prop_assert!(op_gap(&a, &b) <= 1e-12);
    }

    #[test]
    fn cyclic_integrals_and_identity(seed in any::<u64>()) {
        let fx = common::cyclic(6);
        let mut r = common::seeded(seed);
        let (t, s) = (fx.operator(&mut r, 2), fx.operator(&mut r, 3));
        let ts = op_op_convolve(&fx.model, &t, &s, &fx.grid).unwrap();
        let adm = admissibility_report(&s);
        prop_assert!(rel(ts.integral_r(), t.trace() * C64::new(adm.constant, adm.constant_imag)) <= 1e-12);
        prop_assert!(rel(ts.integral_l(), s.trace() * apply_duflo_inv(&t).trace()) <= 1e-12);
        let one = GroupFunction::constant(fx.grid.clone(), C64::new(1.0, 0.0));
        let q = quantize(&fx.model, &one, &t).unwrap();
        prop_assert!(op_gap(&q, &OperatorRep::identity(fx.basis().clone()).scale(t.trace())) <= 1e-12);
    }

    #[test]
    fn interpolation_bounds(seed in any::<u64>()) {
        for fx in [common::cyclic(6), common::affine()] {
            let slack = if fx.affine { 1e-2 } else { 1e-12 };
            let mut r = common::seeded(seed);
            let f = fx.function(&mut r);
            let (t, s) = (fx.operator(&mut r, 2), fx.operator(&mut r, 2));
            let (s1, d1) = (s.schatten_norm(1.0).unwrap(), apply_duflo_inv(&s).schatten_norm(1.0).unwrap());
            let fs = func_op_convolve(&fx.model, &f, &s).unwrap();
            let ts = op_op_convolve(&fx.model, &t, &s, &fx.grid).unwrap();
            for (p, q) in [(1.0, f64::INFINITY), (1.5, 3.0), (2.0, 2.0), (f64::INFINITY, 1.0)] {
                let bound = lp(&f, p) * s1.powf(1.0 / p) * d1.powf(1.0 / q);
                prop_assert!(sp(&fs, p) <= bound * (1.0 + slack));
                let bound = sp(&t, p) * s1.powf(1.0 / q) * d1.powf(1.0 / p);
                prop_assert!(lp(&ts, p) <= bound * (1.0 + slack));
            }
        }
    }

    #[test]
    fn density_construction(seed in any::<u64>()) {
        for fx in [common::cyclic(5), common::affine()] {
            let mut r = common::seeded(seed);
            let vs: Vec<Vector> = (0..3).map(|_| fx.vector(&mut r)).collect();
            let d = make_density_operator(fx.basis().clone(), &vs, &[0.2, 0.0, 0.7]).unwrap();
            prop_assert!((apply_duflo_inv(&d.operator).trace().re - 1.0).abs() <= 1e-12);
            prop_assert!((d.operator.trace().re - d.trace).abs() <= 1e-12 * d.trace);
            prop_assert!(d.operator.require_positive(1e-12).is_ok());
        }
    }
}

#[test]
fn affine_right_integral_by_quadrature() {
    let fx = common::affine();
    let mut r = common::seeded(5);
    let (t, s) = (fx.density(&mut r, 2), fx.operator(&mut r, 3));
    let lhs = op_op_convolve(&fx.model, &t, &s, &fx.grid).unwrap().integral_r();
    let adm = admissibility_report(&s);
    let err = rel(lhs, t.trace() * C64::new(adm.constant, adm.constant_imag));
    assert!(err <= 2e-2, "{err}");
    assert!(adm.converged);
}

#[test]
fn admissibility_probe_flags_low_frequency_mass() {
    let fx = common::affine();
    let n = fx.model.dim();
    let mut d = vec![0.0; n];
    d[0] = 1.0;
    let low = OperatorRep::diagonal(fx.basis().clone(), &d).unwrap();
    assert!(!admissibility_report(&low).converged);
    let dm = DufloMoore::new(fx.basis().clone());
    assert!((admissibility_report(&low).constant - dm.inverse_diagonal()[0].powi(2)).abs() <= 1e-12);
}

#[test]
fn rejects_mismatched_inputs() {
    let fx = common::cyclic(4);
    let other = common::cyclic(5);
    let f = fx.function(&mut common::seeded(1));
    let s = other.operator(&mut common::seeded(2), 1);
    assert!(func_op_convolve(&fx.model, &f, &s).is_err());
    let vs = vec![fx.vector(&mut common::seeded(3))];
    assert!(matches!(make_density_operator(fx.basis().clone(), &vs, &[-1.0]), Err(QhaError::InvalidWeights)));
    assert!(make_density_operator(fx.basis().clone(), &vs, &[]).is_err());
    let g = other.function(&mut common::seeded(4));
    assert!(matches!(convolve_functions(&f, &g), Err(QhaError::GridMismatch)));
}
