//! Wavelet transforms with an operator window: `𝔚_S ψ(x) = S σ(x) ψ` and
//! `𝔚_S T(x) = S σ(x) T`.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::convolution::{admissibility_report, check_grid, AdmissibilityReport};
use crate::error::Result;
use crate::group::{GroupModel, HaarGrid};
use crate::numeric::{kahan_sum, par_sum_c, ComplexSum};
use crate::operator::{OperatorRep, Vector};
use crate::representation::{cyclic_phase, RepresentationModel};

/// Admissibility of `S*S`, with a warning when the growth probe fails.
fn window_check(s: &OperatorRep) -> Result<(AdmissibilityReport, Option<String>)> {
    let sts = s.adjoint().compose(s)?;
    let rep = admissibility_report(&sts);
    let warning = (!rep.converged).then(|| {
        format!("S*S fails the admissibility probe (ratio {:.4}); Moyal relations may not hold", rep.probe_ratio)
    });
    Ok((rep, warning))
}

/// One Hilbert-space vector per grid node, stored on a common index range.
#[derive(Clone, Debug)]
pub struct VectorField {
    grid: Arc<HaarGrid>,
    dim: usize,
    rows: Range<usize>,
    samples: Vec<Vec<Complex64>>,
    pub warning: Option<String>,
}

impl VectorField {
    pub fn grid(&self) -> &Arc<HaarGrid> {
        &self.grid
    }

    pub fn sample(&self, i: usize) -> Vector {
        let mut v = Vector::zeros(self.dim);
        for (k, r) in self.rows.clone().enumerate() {
            v[r] = self.samples[i][k];
        }
        v
    }

    pub fn norms(&self) -> Vec<f64> {
        self.samples.iter().map(|s| kahan_sum(s.iter().map(|z| z.norm_sqr())).sqrt()).collect()
    }

    /// `Σ w_r ⟨F(x), G(x)⟩`.
    pub fn inner(&self, other: &VectorField) -> Result<Complex64> {
        if !(Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid) {
            return Err(crate::QhaError::GridMismatch);
        }
        let lo = self.rows.start.max(other.rows.start);
        let hi = self.rows.end.min(other.rows.end);
        let w = self.grid.weights_r();
        Ok(par_sum_c(self.grid.len(), |i| {
            let mut acc = ComplexSum::new();
            for r in lo..hi.max(lo) {
                acc.add(self.samples[i][r - self.rows.start] * other.samples[i][r - other.rows.start].conj());
            }
            acc.value() * w[i]
        }))
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self).expect("same grid").re
    }
}

/// `𝔚_S ψ` on every node.
pub fn op_window_transform(
    model: &RepresentationModel,
    s: &OperatorRep,
    psi: &Vector,
    grid: &Arc<HaarGrid>,
) -> Result<VectorField> {
    check_grid(model, grid)?;
    model.check_operator(s)?;
    model.check_vector(psi)?;
    let (_, warning) = window_check(s)?;
    let (rows, cols) = s.support();
    let sm = s.matrix();
    let samples = (0..grid.len())
        .into_par_iter()
        .map(|i| -> Result<Vec<Complex64>> {
            let u = model.apply_on(&grid.node(i), psi, cols.clone())?;
            Ok(rows
                .clone()
                .map(|r| {
                    let mut acc = ComplexSum::new();
                    for (kk, k) in cols.clone().enumerate() {
                        acc.add(sm[(r, k)] * u[kk]);
                    }
                    acc.value()
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VectorField { grid: grid.clone(), dim: model.dim(), rows, samples, warning })
}

/// `x ↦ S σ(x) T`, materialized one node at a time.
#[derive(Clone, Debug)]
pub struct OperatorField {
    model: RepresentationModel,
    s: OperatorRep,
    t: OperatorRep,
    grid: Arc<HaarGrid>,
    pub warning: Option<String>,
}

/// Dense block of an operator with its row and column offsets.
struct Block {
    r0: usize,
    c0: usize,
    m: DMatrix<Complex64>,
}

impl Block {
    fn hs_inner(&self, other: &Block) -> Complex64 {
        let r_lo = self.r0.max(other.r0);
        let r_hi = (self.r0 + self.m.nrows()).min(other.r0 + other.m.nrows());
        let c_lo = self.c0.max(other.c0);
        let c_hi = (self.c0 + self.m.ncols()).min(other.c0 + other.m.ncols());
        let mut acc = ComplexSum::new();
        for c in c_lo..c_hi.max(c_lo) {
            for r in r_lo..r_hi.max(r_lo) {
                acc.add(self.m[(r - self.r0, c - self.c0)] * other.m[(r - other.r0, c - other.c0)].conj());
            }
        }
        acc.value()
    }
}

impl OperatorField {
    pub fn grid(&self) -> &Arc<HaarGrid> {
        &self.grid
    }

    fn block(&self, i: usize) -> Result<Block> {
        let g = self.grid.node(i);
        let (srows, scols) = self.s.support();
        let (trows, tcols) = self.t.support();
        let n = self.model.dim();
        let sm = self.s.matrix();
        let tm = self.t.matrix();
        match *self.model.group() {
            GroupModel::Affine => {
                let m = self.model.dilation_index(g.a())?;
                // (SσT)_{ir} = Σ_j S_{ij} e^{-2πixω_j} T_{j+m, r}
                let lo = (scols.start as i64).max(trows.start as i64 - m);
                let hi = (scols.end as i64).min(trows.end as i64 - m);
                let mut out = DMatrix::zeros(srows.len(), tcols.len());
                if hi > lo {
                    let js = lo as usize..hi as usize;
                    let a = DMatrix::from_fn(srows.len(), js.len(), |r, k| {
                        let j = js.start + k;
                        sm[(srows.start + r, j)] * self.model.phase(g.x(), j).conj()
                    });
                    let b = DMatrix::from_fn(js.len(), tcols.len(), |k, c| {
                        tm[(((js.start + k) as i64 + m) as usize, tcols.start + c)]
                    });
                    out = a * b;
                }
                Ok(Block { r0: srows.start, c0: tcols.start, m: out })
            }
            GroupModel::Cyclic { n: ng } => {
                let (j, k) = (g.c0 as usize, g.c1 as usize);
                // (σT)_{q r} = e^{2πik(q-j)/N} T_{q-j, r}
                let st = DMatrix::from_fn(n, n, |q, r| {
                    let l = (q + ng - j) % ng;
                    cyclic_phase(k * l, ng) * tm[(l, r)]
                });
                Ok(Block { r0: 0, c0: 0, m: sm * st })
            }
        }
    }

    /// `S σ(x_i) T` as a full operator.
    pub fn sample(&self, i: usize) -> Result<OperatorRep> {
        let b = self.block(i)?;
        let n = self.model.dim();
        let mut m = DMatrix::zeros(n, n);
        m.view_mut((b.r0, b.c0), (b.m.nrows(), b.m.ncols())).copy_from(&b.m);
        OperatorRep::new(self.model.basis().clone(), m)
    }

    /// `Σ w_r ⟨A(x), B(x)⟩_HS`, streaming over nodes.
    pub fn inner(&self, other: &OperatorField) -> Result<Complex64> {
        if !(Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid) {
            return Err(crate::QhaError::GridMismatch);
        }
        let n = self.grid.len();
        let chunk = crate::numeric::REDUCE_CHUNK;
        let parts = (0..n.div_ceil(chunk))
            .into_par_iter()
            .map(|c| -> Result<ComplexSum> {
                let mut acc = ComplexSum::new();
                for i in c * chunk..n.min((c + 1) * chunk) {
                    let a = self.block(i)?;
                    let b = other.block(i)?;
                    acc.add(a.hs_inner(&b) * self.grid.weights_r()[i]);
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = ComplexSum::new();
        for p in &parts {
            total.merge(p);
        }
        Ok(total.value())
    }

    pub fn norm_sq(&self) -> Result<f64> {
        Ok(self.inner(self)?.re)
    }
}

/// `𝔚_S T`.
pub fn op_wavelet_transform(
    model: &RepresentationModel,
    s: &OperatorRep,
    t: &OperatorRep,
    grid: &Arc<HaarGrid>,
) -> Result<OperatorField> {
    check_grid(model, grid)?;
    model.check_operator(s)?;
    model.check_operator(t)?;
    let (_, warning) = window_check(s)?;
    Ok(OperatorField { model: model.clone(), s: s.clone(), t: t.clone(), grid: grid.clone(), warning })
}

/// `⟨ψ₁, ψ₂⟩ ⟨S₁D⁻¹, S₂D⁻¹⟩_HS`.
pub fn vector_moyal_rhs(s1: &OperatorRep, s2: &OperatorRep, psi1: &Vector, psi2: &Vector) -> Result<Complex64> {
    let dinv = crate::representation::DufloMoore::new(s1.basis().clone()).inverse_operator();
    let a = s1.compose(&dinv)?;
    let b = s2.compose(&dinv)?;
    Ok(crate::operator::inner(psi1, psi2) * a.hs_inner(&b)?)
}

/// `⟨T, R⟩_HS ⟨S₁D⁻¹, S₂D⁻¹⟩_HS`.
pub fn operator_moyal_rhs(s1: &OperatorRep, s2: &OperatorRep, t: &OperatorRep, r: &OperatorRep) -> Result<Complex64> {
    let dinv = crate::representation::DufloMoore::new(s1.basis().clone()).inverse_operator();
    let a = s1.compose(&dinv)?;
    let b = s2.compose(&dinv)?;
    Ok(t.hs_inner(r)? * a.hs_inner(&b)?)
}
