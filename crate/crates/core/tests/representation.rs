mod common;

use proptest::prelude::*;
use qha::numeric::ComplexSum;
use qha::operator::{inner, norm};
use qha::{DufloMoore, GroupPoint, LocallyCompactGroup, QhaError, C64};

fn lattice_point(step: f64) -> impl Strategy<Value = GroupPoint> {
    (-3.0f64..3.0, -6i64..=6).prop_map(move |(x, m)| GroupPoint::new(x, (m as f64 * step).exp()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn affine_projective_and_unitary(
        seed in any::<u64>(),
        x in lattice_point(std::f64::consts::LN_2 / 8.0),
        y in lattice_point(std::f64::consts::LN_2 / 8.0),
    ) {
        let fx = common::affine();
        let (m, g) = (&fx.model, fx.model.group());
        let psi = fx.vector(&mut common::seeded(seed));
        let u = m.apply(&x, &m.apply(&y, &psi).unwrap()).unwrap();
        let v = m.apply(&g.compose(&x, &y).unwrap(), &psi).unwrap();
        let c = inner(&u, &v) / inner(&v, &v);
        prop_assert!((c.norm() - 1.0).abs() <= 1e-12);
        prop_assert!(norm(&(&u - &v * c)) <= 1e-12 * norm(&v));
        prop_assert!((norm(&m.apply(&x, &psi).unwrap()) - norm(&psi)).abs() <= 1e-12 * norm(&psi));
        let back = m.apply_adjoint(&x, &m.apply(&x, &psi).unwrap()).unwrap();
        prop_assert!(norm(&(back - &psi)) <= 1e-12 * norm(&psi));
    }

    #[test]
    fn cyclic_projective_phase(seed in any::<u64>(), j1 in 0usize..7, k1 in 0usize..7, j2 in 0usize..7, k2 in 0usize..7) {
        let fx = common::cyclic(7);
        let (m, g) = (&fx.model, fx.model.group());
        let (x, y) = (GroupPoint::new(j1 as f64, k1 as f64), GroupPoint::new(j2 as f64, k2 as f64));
        let psi = fx.vector(&mut common::seeded(seed));
        let u = m.apply(&x, &m.apply(&y, &psi).unwrap()).unwrap();
        let v = m.apply(&g.compose(&x, &y).unwrap(), &psi).unwrap();
        // T_j M_k T_j' M_k' = e^{2πi k j'/N} T_{j+j'} M_{k+k'}
        let phase = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (k1 * j2) as f64 / 7.0);
        prop_assert!(norm(&(u - v * phase)) <= 1e-12 * norm(&psi));
        let dense = m.rep_matrix(&x).unwrap();
        prop_assert!(norm(&(&*dense * &psi - m.apply(&x, &psi).unwrap())) <= 1e-13 * norm(&psi));
    }

    #[test]
    fn duflo_moore_covariance(seed in any::<u64>(), x in lattice_point(std::f64::consts::LN_2 / 8.0)) {
        let fx = common::affine();
        let m = &fx.model;
        let dm = DufloMoore::new(fx.basis().clone());
        let psi = fx.vector(&mut common::seeded(seed));
        let lhs = m.apply(&x, &dm.apply(&m.apply_adjoint(&x, &psi).unwrap())).unwrap();
        let rhs = dm.apply(&psi) * C64::new(m.group().modular(&x).unwrap().powf(-0.5), 0.0);
        prop_assert!(norm(&(lhs - &rhs)) <= 1e-12 * norm(&rhs));
    }

    #[test]
    fn cyclic_orthogonality_is_exact(seed in any::<u64>()) {
        let fx = common::cyclic(6);
        let mut r = common::seeded(seed);
        let v: Vec<_> = (0..4).map(|_| fx.vector(&mut r)).collect();
        let mut acc = ComplexSum::new();
        for i in 0..fx.grid.len() {
            let g = fx.grid.node(i);
            let a = inner(&v[0], &fx.model.apply_adjoint(&g, &v[2]).unwrap());
            let b = inner(&v[1], &fx.model.apply_adjoint(&g, &v[3]).unwrap());
            acc.add(a * b.conj() * fx.grid.weights_r()[i]);
        }
        let rhs = inner(&v[0], &v[1]) * inner(&v[2], &v[3]).conj();
        prop_assert!(common::rel(acc.value(), rhs) <= 1e-12);
    }
}

#[test]
fn affine_orthogonality_by_quadrature() {
    let fx = common::affine();
    let dm = DufloMoore::new(fx.basis().clone());
    let mut r = common::seeded(11);
    let v: Vec<_> = (0..4).map(|_| fx.vector(&mut r)).collect();
    let mut acc = ComplexSum::new();
    for i in 0..fx.grid.len() {
        let g = fx.grid.node(i);
        let a = inner(&v[0], &fx.model.apply_adjoint(&g, &v[2]).unwrap());
        let b = inner(&v[1], &fx.model.apply_adjoint(&g, &v[3]).unwrap());
        acc.add(a * b.conj() * fx.grid.weights_r()[i]);
    }
    let rhs = inner(&v[0], &v[1]) * inner(&dm.apply_inv(&v[2]), &dm.apply_inv(&v[3])).conj();
    assert!(common::rel(acc.value(), rhs) <= 2e-2, "{}", common::rel(acc.value(), rhs));
}

#[test]
fn off_lattice_dilation_rejected() {
    let fx = common::affine();
    let psi = fx.vector(&mut common::seeded(1));
    let g = GroupPoint::new(0.0, 1.05);
    assert!(matches!(fx.model.apply(&g, &psi), Err(QhaError::OffLattice(_))));
}
