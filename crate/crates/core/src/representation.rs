//! Hilbert bases, the unitary representations, and the Duflo-Moore operator.
//!
//! Affine: the basis samples the positive frequency axis on a geometric
//! lattice `ω_j = ω_min e^{jΔ}` with weights `ω_j Δ`, so it is a quadrature
//! for `L²(ℝ₊, dω)`. Coefficients are `c_j = √(ω_j Δ) ψ(ω_j)`, which makes the
//! frame orthonormal. The representation
//! `σ(x, a)ψ(ω) = √a e^{-2πixω} ψ(aω)` then acts exactly as
//! `(σc)_j = e^{-2πixω_j} c_{j+m}` for `a = e^{mΔ}`, with zero fill where
//! `j + m` leaves the lattice. Dilations off the lattice are rejected.
//!
//! Cyclic: `π(j, k) = T_j M_k` on `ℂ^N`, with `(T_j ψ)(n) = ψ(n - j)` and
//! `(M_k ψ)(n) = e^{2πikn/N} ψ(n)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::Range;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::c64;
use crate::error::{QhaError, Result};
use crate::group::{unsupported, Backend, GroupModel, GroupPoint, LocallyCompactGroup, COORD_TOL};
use crate::operator::{OperatorRep, Vector};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum HilbertBasis {
    Affine { n: usize, omega_min: f64, log_step: f64 },
    Cyclic { n: usize },
}

impl HilbertBasis {
    pub fn affine(n: usize, omega_min: f64, log_step: f64) -> Result<Self> {
        if n < 2 {
            return Err(QhaError::InvalidParameter(format!("basis size must be >= 2, got {n}")));
        }
        if !(omega_min.is_finite() && omega_min > 0.0) {
            return Err(QhaError::InvalidParameter(format!("omega_min must be positive, got {omega_min}")));
        }
        if !(log_step.is_finite() && log_step > 0.0) {
            return Err(QhaError::InvalidParameter(format!("log step must be positive, got {log_step}")));
        }
        Ok(HilbertBasis::Affine { n, omega_min, log_step })
    }

    pub fn cyclic(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(QhaError::InvalidParameter(format!("cyclic dimension must be >= 2, got {n}")));
        }
        Ok(HilbertBasis::Cyclic { n })
    }

    pub fn dim(&self) -> usize {
        match *self {
            HilbertBasis::Affine { n, .. } | HilbertBasis::Cyclic { n } => n,
        }
    }

    pub fn backend(&self) -> Backend {
        match self {
            HilbertBasis::Affine { .. } => Backend::Affine,
            HilbertBasis::Cyclic { .. } => Backend::Cyclic,
        }
    }

    /// Frequency of basis index `j` (the index itself for the cyclic basis).
    pub fn frequency(&self, j: usize) -> f64 {
        match *self {
            HilbertBasis::Affine { omega_min, log_step, .. } => omega_min * (j as f64 * log_step).exp(),
            HilbertBasis::Cyclic { .. } => j as f64,
        }
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.frequency(j)).collect()
    }

    /// Quadrature weight of index `j`.
    pub fn weight(&self, j: usize) -> f64 {
        match *self {
            HilbertBasis::Affine { log_step, .. } => self.frequency(j) * log_step,
            HilbertBasis::Cyclic { .. } => 1.0,
        }
    }

    pub fn log_step(&self) -> Option<f64> {
        match *self {
            HilbertBasis::Affine { log_step, .. } => Some(log_step),
            HilbertBasis::Cyclic { .. } => None,
        }
    }

    /// Coefficient vector of `ψ`, sampled at the basis frequencies (or indices).
    pub fn sample(&self, psi: impl Fn(f64) -> Complex64) -> Vector {
        Vector::from_iterator(self.dim(), (0..self.dim()).map(|j| psi(self.frequency(j)) * self.weight(j).sqrt()))
    }

    /// Point values `ψ(ω_j)` from coefficients.
    pub fn values(&self, v: &Vector) -> Vec<Complex64> {
        (0..self.dim()).map(|j| v[j] / self.weight(j).sqrt()).collect()
    }

    /// Indices excluding the outer 10% at each end of the lattice.
    pub fn interior_band(&self) -> Range<usize> {
        let n = self.dim();
        let cut = n / 10;
        cut..n - cut
    }
}

/// Representation of a group model on a matching Hilbert basis.
#[derive(Debug)]
pub struct RepresentationModel {
    group: GroupModel,
    basis: Arc<HilbertBasis>,
    cache: RwLock<HashMap<(u64, u64), Arc<DMatrix<Complex64>>>>,
}

impl Clone for RepresentationModel {
    fn clone(&self) -> Self {
        Self { group: self.group, basis: self.basis.clone(), cache: RwLock::new(HashMap::new()) }
    }
}

/// Action of one group element in index form.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Shift {
    /// `(σc)_j = e^{-2πixω_j} c_{j+m}`.
    Affine { x: f64, m: i64 },
    /// `T_j M_k`.
    Cyclic { j: usize, k: usize, n: usize },
}

impl RepresentationModel {
    pub fn new(group: GroupModel, basis: Arc<HilbertBasis>) -> Result<Self> {
        match (&group, &*basis) {
            (GroupModel::Affine, HilbertBasis::Affine { .. }) => {}
            (GroupModel::Cyclic { n }, HilbertBasis::Cyclic { n: m }) if n == m => {}
            _ => {
                return Err(QhaError::BackendMismatch(format!(
                    "group {:?} cannot act on basis {:?}",
                    group, basis
                )))
            }
        }
        Ok(Self { group, basis, cache: RwLock::new(HashMap::new()) })
    }

    pub fn affine(n: usize, omega_min: f64, log_step: f64) -> Result<Self> {
        Self::new(GroupModel::Affine, Arc::new(HilbertBasis::affine(n, omega_min, log_step)?))
    }

    pub fn cyclic(n: usize) -> Result<Self> {
        Self::new(GroupModel::cyclic(n)?, Arc::new(HilbertBasis::cyclic(n)?))
    }

    pub fn group(&self) -> &GroupModel {
        &self.group
    }

    pub fn basis(&self) -> &Arc<HilbertBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn check_operator(&self, s: &OperatorRep) -> Result<()> {
        if Arc::ptr_eq(s.basis(), &self.basis) || **s.basis() == *self.basis {
            Ok(())
        } else {
            Err(QhaError::BasisMismatch)
        }
    }

    pub fn check_vector(&self, v: &Vector) -> Result<()> {
        if v.len() == self.dim() {
            Ok(())
        } else {
            Err(QhaError::Dimension { expected: self.dim(), found: v.len() })
        }
    }

    /// Lattice index `m` with `a = e^{mΔ}`.
    pub fn dilation_index(&self, a: f64) -> Result<i64> {
        let step = self.basis.log_step().ok_or_else(|| unsupported("dilation index", Backend::Cyclic))?;
        if !(a.is_finite() && a > 0.0) {
            return Err(QhaError::InvalidPoint(0.0, a, "dilation must be positive".into()));
        }
        let t = a.ln() / step;
        let m = t.round();
        if (t - m).abs() > COORD_TOL.max(1e-7 * m.abs()) {
            return Err(QhaError::OffLattice(a));
        }
        Ok(m as i64)
    }

    pub(crate) fn shift(&self, g: &GroupPoint) -> Result<Shift> {
        self.group.validate(g)?;
        Ok(match self.group {
            GroupModel::Affine => Shift::Affine { x: g.c0, m: self.dilation_index(g.c1)? },
            GroupModel::Cyclic { n } => Shift::Cyclic { j: g.c0 as usize, k: g.c1 as usize, n },
        })
    }

    /// `e^{2πixω_j}` for the affine basis.
    pub(crate) fn phase(&self, x: f64, j: usize) -> Complex64 {
        Complex64::from_polar(1.0, 2.0 * PI * x * self.basis.frequency(j))
    }

    /// `σ(g) ψ`.
    pub fn apply(&self, g: &GroupPoint, psi: &Vector) -> Result<Vector> {
        self.check_vector(psi)?;
        let n = self.dim();
        let mut out = Vector::zeros(n);
        match self.shift(g)? {
            Shift::Affine { x, m } => {
                for j in 0..n {
                    let src = j as i64 + m;
                    if src >= 0 && (src as usize) < n {
                        out[j] = self.phase(x, j).conj() * psi[src as usize];
                    }
                }
            }
            Shift::Cyclic { j, k, n } => {
                for (t, o) in out.iter_mut().enumerate() {
                    let l = (t + n - j) % n;
                    *o = cyclic_phase(k * l, n) * psi[l];
                }
            }
        }
        Ok(out)
    }

    /// `σ(g)* ψ`.
    pub fn apply_adjoint(&self, g: &GroupPoint, psi: &Vector) -> Result<Vector> {
        self.check_vector(psi)?;
        let n = self.dim();
        let mut out = Vector::zeros(n);
        match self.shift(g)? {
            Shift::Affine { x, m } => {
                for j in 0..n {
                    let dst = j as i64 + m;
                    if dst >= 0 && (dst as usize) < n {
                        out[dst as usize] = self.phase(x, j) * psi[j];
                    }
                }
            }
            Shift::Cyclic { j, k, n } => {
                for (l, o) in out.iter_mut().enumerate() {
                    *o = cyclic_phase(k * l, n).conj() * psi[(l + j) % n];
                }
            }
        }
        Ok(out)
    }

    /// Entries `(σ(g)ψ)_j` for `j` in `range` only.
    pub fn apply_on(&self, g: &GroupPoint, psi: &Vector, range: Range<usize>) -> Result<Vec<Complex64>> {
        self.check_vector(psi)?;
        let n = self.dim();
        Ok(match self.shift(g)? {
            Shift::Affine { x, m } => range
                .map(|j| {
                    let src = j as i64 + m;
                    if src >= 0 && (src as usize) < n {
                        self.phase(x, j).conj() * psi[src as usize]
                    } else {
                        c64(0.0, 0.0)
                    }
                })
                .collect(),
            Shift::Cyclic { j, k, n } => range
                .map(|t| {
                    let l = (t + n - j) % n;
                    cyclic_phase(k * l, n) * psi[l]
                })
                .collect(),
        })
    }

    /// Dilation range `|ln a| ≤ (N/10) Δ` on which `σ` maps interior-band
    /// vectors into the lattice, hence acts isometrically on them. `None` for
    /// the cyclic model, where `σ` is unitary everywhere.
    pub fn unitarity_domain(&self) -> Option<(f64, f64)> {
        let step = self.basis.log_step()?;
        let m = (self.dim() / 10) as f64;
        Some(((-m * step).exp(), (m * step).exp()))
    }

    /// Dense matrix of `σ(g)`, cached per group element.
    pub fn rep_matrix(&self, g: &GroupPoint) -> Result<Arc<DMatrix<Complex64>>> {
        let key = (g.c0.to_bits(), g.c1.to_bits());
        if let Some(m) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(m.clone());
        }
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for col in 0..n {
            let mut e = Vector::zeros(n);
            e[col] = c64(1.0, 0.0);
            m.set_column(col, &self.apply(g, &e)?);
        }
        let m = Arc::new(m);
        self.cache.write().expect("cache lock").insert(key, m.clone());
        Ok(m)
    }

    /// `σ(g)* S σ(g)` through the index form of `σ`.
    pub fn conjugate(&self, s: &OperatorRep, g: &GroupPoint) -> Result<OperatorRep> {
        self.check_operator(s)?;
        let n = self.dim();
        let src = s.matrix();
        let mut out = DMatrix::zeros(n, n);
        match self.shift(g)? {
            Shift::Affine { x, m } => {
                let (rows, cols) = s.support();
                let ph: Vec<Complex64> = (0..n).map(|j| self.phase(x, j)).collect();
                for q in cols {
                    let qq = q as i64 + m;
                    if qq < 0 || qq >= n as i64 {
                        continue;
                    }
                    for p in rows.clone() {
                        let pp = p as i64 + m;
                        if pp < 0 || pp >= n as i64 {
                            continue;
                        }
                        out[(pp as usize, qq as usize)] = ph[p] * ph[q].conj() * src[(p, q)];
                    }
                }
            }
            Shift::Cyclic { j, k, n } => {
                for q in 0..n {
                    for p in 0..n {
                        out[(p, q)] = cyclic_phase(k * ((q + n - p) % n), n) * src[((p + j) % n, (q + j) % n)];
                    }
                }
            }
        }
        Ok(OperatorRep::from_parts(self.basis.clone(), out))
    }

    /// Reference conjugation through dense representation matrices.
    pub fn conjugate_dense(&self, s: &OperatorRep, g: &GroupPoint) -> Result<OperatorRep> {
        self.check_operator(s)?;
        let u = self.rep_matrix(g)?;
        Ok(OperatorRep::from_parts(self.basis.clone(), u.adjoint() * s.matrix() * &*u))
    }

    /// `σ(g) S σ(g)*`.
    pub fn conjugate_inverse(&self, s: &OperatorRep, g: &GroupPoint) -> Result<OperatorRep> {
        let ginv = self.group.inverse(g)?;
        match self.group {
            GroupModel::Affine => self.conjugate(s, &ginv),
            GroupModel::Cyclic { .. } => {
                let u = self.rep_matrix(g)?;
                Ok(OperatorRep::from_parts(self.basis.clone(), &*u * s.matrix() * u.adjoint()))
            }
        }
    }
}

/// `e^{2πi r/N}` with the integer product reduced first.
pub(crate) fn cyclic_phase(r: usize, n: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * (r % n) as f64 / n as f64)
}

/// The Duflo-Moore operator `D` and its inverse, both diagonal in the basis.
///
/// Affine: `D⁻¹ψ(ω) = ω^{-1/2} ψ(ω)`. Cyclic: `D = I`.
#[derive(Clone, Debug, PartialEq)]
pub struct DufloMoore {
    basis: Arc<HilbertBasis>,
    inv: Vec<f64>,
    fwd: Vec<f64>,
}

impl DufloMoore {
    pub fn new(basis: Arc<HilbertBasis>) -> Self {
        let n = basis.dim();
        let inv: Vec<f64> = match *basis {
            HilbertBasis::Affine { .. } => (0..n).map(|j| basis.frequency(j).sqrt().recip()).collect(),
            HilbertBasis::Cyclic { .. } => vec![1.0; n],
        };
        let fwd = inv.iter().map(|v| v.recip()).collect();
        Self { basis, inv, fwd }
    }

    pub fn inverse_diagonal(&self) -> &[f64] {
        &self.inv
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.fwd
    }

    pub fn apply_inv(&self, v: &Vector) -> Vector {
        Vector::from_iterator(v.len(), v.iter().zip(&self.inv).map(|(z, d)| z * *d))
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        Vector::from_iterator(v.len(), v.iter().zip(&self.fwd).map(|(z, d)| z * *d))
    }

    fn sandwich_with(&self, s: &OperatorRep, d: &[f64]) -> OperatorRep {
        let m = DMatrix::from_fn(s.dim(), s.dim(), |i, j| s.matrix()[(i, j)] * (d[i] * d[j]));
        OperatorRep::from_parts(self.basis.clone(), m)
    }

    /// `D⁻¹ S D⁻¹`.
    pub fn sandwich_inv(&self, s: &OperatorRep) -> OperatorRep {
        self.sandwich_with(s, &self.inv)
    }

    /// `D S D`.
    pub fn sandwich(&self, s: &OperatorRep) -> OperatorRep {
        self.sandwich_with(s, &self.fwd)
    }

    pub fn as_operator(&self) -> OperatorRep {
        OperatorRep::diagonal(self.basis.clone(), &self.fwd).expect("diagonal matches basis")
    }

    pub fn inverse_operator(&self) -> OperatorRep {
        OperatorRep::diagonal(self.basis.clone(), &self.inv).expect("diagonal matches basis")
    }
}

/// `D⁻¹ S D⁻¹` for the basis of `S`.
pub fn apply_duflo_inv(s: &OperatorRep) -> OperatorRep {
    DufloMoore::new(s.basis().clone()).sandwich_inv(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::inner;

    fn gaussian(basis: &HilbertBasis, c: f64, s: f64) -> Vector {
        basis.sample(|w| c64((-(w / c).ln().powi(2) / (2.0 * s * s)).exp(), 0.0))
    }

    #[test]
    fn affine_action_matches_continuum_formula() {
        let model = RepresentationModel::affine(64, 0.25, 0.05).unwrap();
        let b = model.basis().clone();
        let psi = |w: f64| c64((-(w - 1.0f64).powi(2)).exp(), w.sin());
        let v = b.sample(psi);
        let (x, m) = (0.37, 3);
        let a = (m as f64 * 0.05).exp();
        let out = model.apply(&GroupPoint::new(x, a), &v).unwrap();
        let vals = b.values(&out);
        for j in 0..60 {
            let w = b.frequency(j);
            let expect = Complex64::from_polar(a.sqrt(), -2.0 * PI * x * w) * psi(a * w);
            assert!((vals[j] - expect).norm() < 1e-12 * (1.0 + expect.norm()), "j={j}");
        }
    }

    #[test]
    fn off_lattice_dilation_rejected() {
        let model = RepresentationModel::affine(16, 1.0, 0.1).unwrap();
        let v = Vector::zeros(16);
        assert!(matches!(model.apply(&GroupPoint::new(0.0, 1.07), &v), Err(QhaError::OffLattice(_))));
    }

    #[test]
    fn cyclic_is_projective_homomorphism() {
        let model = RepresentationModel::cyclic(8).unwrap();
        let g = GroupPoint::new(3.0, 5.0);
        let h = GroupPoint::new(6.0, 2.0);
        let gh = model.group().compose(&g, &h).unwrap();
        let ug = model.rep_matrix(&g).unwrap();
        let uh = model.rep_matrix(&h).unwrap();
        let ugh = model.rep_matrix(&gh).unwrap();
        // T_j M_k T_j' M_k' = e^{2πi k j'/N} T_{j+j'} M_{k+k'}
        let c = cyclic_phase(5 * 6, 8);
        let diff = &*ug * &*uh - &*ugh * c;
        assert!(diff.norm() < 1e-12);
    }

    #[test]
    fn fast_conjugation_matches_dense() {
        let model = RepresentationModel::affine(48, 0.5, 0.06).unwrap();
        let b = model.basis().clone();
        let u = gaussian(&b, 1.5, 0.3);
        let w = gaussian(&b, 1.2, 0.2);
        let s = OperatorRep::rank_one(b.clone(), &u, &w).unwrap();
        let g = GroupPoint::new(-0.41, (-4.0 * 0.06f64).exp());
        let fast = model.conjugate(&s, &g).unwrap();
        let dense = model.conjugate_dense(&s, &g).unwrap();
        assert!(fast.sub(&dense).unwrap().frobenius_norm() < 1e-12);

        let cm = RepresentationModel::cyclic(6).unwrap();
        let cb = cm.basis().clone();
        let cu = Vector::from_fn(6, |i, _| c64(i as f64, 1.0 - i as f64));
        let cs = OperatorRep::rank_one(cb, &cu, &cu).unwrap();
        let g = GroupPoint::new(4.0, 1.0);
        let fast = cm.conjugate(&cs, &g).unwrap();
        let dense = cm.conjugate_dense(&cs, &g).unwrap();
        assert!(fast.sub(&dense).unwrap().frobenius_norm() < 1e-12);
    }

    #[test]
    fn unitary_on_interior_vectors() {
        let model = RepresentationModel::affine(128, 0.2, 0.04).unwrap();
        let v = gaussian(model.basis(), 1.4, 0.2);
        let g = GroupPoint::new(1.3, (7.0 * 0.04f64).exp());
        let sv = model.apply(&g, &v).unwrap();
        assert!((inner(&sv, &sv) - inner(&v, &v)).norm() < 1e-12);
        let back = model.apply_adjoint(&g, &sv).unwrap();
        assert!((&back - &v).norm() < 1e-12);
    }
}
