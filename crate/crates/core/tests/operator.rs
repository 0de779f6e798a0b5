mod common;

use std::sync::Arc;

use proptest::prelude::*;
use qha::operator::{inner, OperatorRep};
use qha::signals::random_vector;
use qha::{HilbertBasis, QhaError, C64};

fn basis(n: usize) -> Arc<HilbertBasis> {
    Arc::new(HilbertBasis::cyclic(n).unwrap())
}

fn random_op(seed: u64, n: usize) -> OperatorRep {
    common::cyclic(n).operator(&mut common::seeded(seed), 3)
}

fn schatten(a: &OperatorRep, p: f64) -> f64 {
    if p.is_infinite() {
        a.operator_norm()
    } else {
        a.schatten_norm(p).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trace_is_cyclic(s1 in any::<u64>(), s2 in any::<u64>()) {
        let (a, b) = (random_op(s1, 9), random_op(s2, 9));
        prop_assert!(common::rel(a.compose(&b).unwrap().trace(), b.compose(&a).unwrap().trace()) <= 1e-12);
    }

    #[test]
    fn hoelder_duality(s1 in any::<u64>(), s2 in any::<u64>(), p in 1.0f64..6.0) {
        let (a, b) = (random_op(s1, 8), random_op(s2, 8));
        let q = p / (p - 1.0);
        let t = a.compose(&b).unwrap().trace().norm();
        let q = if q.is_finite() { q } else { f64::INFINITY };
        prop_assert!(t <= schatten(&a, p) * schatten(&b, q) * (1.0 + 1e-12));
    }

    #[test]
    fn schatten_norms_decrease_in_p(seed in any::<u64>(), p in 1.0f64..4.0, dp in 0.1f64..4.0) {
        let a = random_op(seed, 8);
        prop_assert!(a.schatten_norm(p + dp).unwrap() <= a.schatten_norm(p).unwrap() * (1.0 + 1e-12));
        prop_assert!(a.operator_norm() <= a.schatten_norm(p).unwrap() * (1.0 + 1e-12));
        prop_assert!((a.schatten_norm(2.0).unwrap() - a.frobenius_norm()).abs() <= 1e-12 * a.frobenius_norm());
    }

    #[test]
    fn functional_calculus_agrees_with_products(seed in any::<u64>()) {
        let a = random_op(seed, 7).hermitian_part();
        let sq = a.functional_calculus(|t| Some(t * t)).unwrap();
        prop_assert!(common::op_gap(&sq, &a.compose(&a).unwrap()) <= 1e-11);
        let p = a.compose(&a).unwrap();
        let root = p.functional_calculus(|t| Some(t.max(0.0).sqrt())).unwrap();
        prop_assert!(common::op_gap(&root.compose(&root).unwrap(), &p) <= 1e-10);
    }

    #[test]
    fn spectrum_reconstructs(seed in any::<u64>()) {
        let a = random_op(seed, 6).hermitian_part();
        let spec = a.spectral_decomposition().unwrap();
        prop_assert!(spec.values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(common::op_gap(&spec.reconstruct(a.basis().clone()), &a) <= 1e-12);
        let v = spec.vector(0);
        let av = a.apply(&v).unwrap();
        prop_assert!((inner(&av, &v).re - spec.values[0]).abs() <= 1e-12 * a.operator_norm());
    }

    #[test]
    fn binary_round_trip(seed in any::<u64>()) {
        let a = random_op(seed, 5);
        let mut buf = Vec::new();
        a.write_binary(&mut buf).unwrap();
        prop_assert_eq!(buf.len(), 8 + 16 + 25 * 16);
        let b = OperatorRep::read_binary(a.basis().clone(), buf.as_slice()).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn binary_rejects_wrong_shape_and_magic() {
    let a = OperatorRep::identity(basis(4));
    let mut buf = Vec::new();
    a.write_binary(&mut buf).unwrap();
    assert!(matches!(OperatorRep::read_binary(basis(5), buf.as_slice()), Err(QhaError::Dimension { .. })));
    buf[0] ^= 1;
    assert!(OperatorRep::read_binary(basis(4), buf.as_slice()).is_err());
    assert!(OperatorRep::read_binary(basis(4), &buf[..10]).is_err());
}

#[test]
fn positivity_and_domain_errors() {
    let b = basis(3);
    let d = OperatorRep::diagonal(b.clone(), &[1.0, -0.5, 0.0]).unwrap();
    assert!(matches!(d.require_positive(1e-12), Err(QhaError::NotPositive(_))));
    assert!(matches!(d.functional_calculus(|t| (t >= 0.0).then(|| t.sqrt())), Err(QhaError::FunctionDomain(_))));
    assert!(matches!(d.schatten_norm(0.5), Err(QhaError::InvalidExponent(_))));
    let mut r = common::seeded(3);
    let u = random_vector(&mut r, 3, 0..3);
    let v = random_vector(&mut r, 3, 0..3);
    let a = OperatorRep::rank_one(b, &u, &v).unwrap();
    assert!(a.asymmetry() > 1e-3);
    assert!(a.eigenvalues().is_err());
    assert!(common::rel(a.trace(), inner(&u, &v)) <= 1e-14);
    assert!(a.scale(C64::new(0.0, 0.0)).is_zero());
}
