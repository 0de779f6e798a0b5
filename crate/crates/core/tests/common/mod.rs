#![allow(dead_code)]

use std::f64::consts::LN_2;
use std::sync::Arc;

use qha::convolution::make_density_operator;
use qha::group::{GroupFunction, HaarGrid};
use qha::operator::{OperatorRep, Vector};
use qha::signals::{random_atom, random_vector, rng};
use qha::{HilbertBasis, RepresentationModel, C64};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct Fixture {
    pub model: RepresentationModel,
    pub grid: Arc<HaarGrid>,
    pub affine: bool,
}

/// Small affine setup: 96 frequencies from 1/40 with Δ = ln 2 / 8.
pub fn affine() -> Fixture {
    let step = LN_2 / 8.0;
    Fixture {
        model: RepresentationModel::affine(96, 0.025, step).unwrap(),
        grid: Arc::new(HaarGrid::affine_lattice(-4.0, 4.0, 64, step, -12, 12).unwrap()),
        affine: true,
    }
}

pub fn cyclic(n: usize) -> Fixture {
    Fixture {
        model: RepresentationModel::cyclic(n).unwrap(),
        grid: Arc::new(HaarGrid::cyclic_full(n).unwrap()),
        affine: false,
    }
}

impl Fixture {
    pub fn basis(&self) -> &Arc<HilbertBasis> {
        self.model.basis()
    }

    pub fn vector(&self, r: &mut ChaCha8Rng) -> Vector {
        if self.affine {
            random_atom(r, self.basis(), (1.2, 2.0), (0.2, 0.3)).unwrap()
        } else {
            random_vector(r, self.model.dim(), 0..self.model.dim())
        }
    }

    pub fn operator(&self, r: &mut ChaCha8Rng, rank: usize) -> OperatorRep {
        let b = self.basis().clone();
        (0..rank).fold(OperatorRep::zeros(b.clone()), |acc, _| {
            acc.add(&OperatorRep::rank_one(b.clone(), &self.vector(r), &self.vector(r)).unwrap()).unwrap()
        })
    }

    pub fn density(&self, r: &mut ChaCha8Rng, rank: usize) -> OperatorRep {
        let vs: Vec<Vector> = (0..rank).map(|_| self.vector(r)).collect();
        let ws: Vec<f64> = (0..rank).map(|_| r.gen_range(0.2..1.0)).collect();
        make_density_operator(self.basis().clone(), &vs, &ws).unwrap().operator
    }

    /// Cut-off bump near the identity (affine) or random nonnegative table (cyclic).
    pub fn function(&self, r: &mut ChaCha8Rng) -> GroupFunction {
        if self.affine {
            let (x0, l0) = (r.gen_range(-0.3..0.3), r.gen_range(-0.2..0.2));
            GroupFunction::from_real(self.grid.clone(), move |g| {
                let (u, v) = ((g.x() - x0) / 0.4, (g.a().ln() - l0) / 0.3);
                let q = u * u + v * v;
                if q > 16.0 {
                    0.0
                } else {
                    (-q / 2.0).exp()
                }
            })
        } else {
            let vals: Vec<C64> = (0..self.grid.len()).map(|_| C64::new(r.gen_range(0.0..1.0), 0.0)).collect();
            GroupFunction::new(self.grid.clone(), vals).unwrap()
        }
    }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    rng(seed)
}

pub fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

pub fn op_gap(a: &OperatorRep, b: &OperatorRep) -> f64 {
    a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm().max(1e-300)
}
