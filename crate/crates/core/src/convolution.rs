//! Function-operator and operator-operator convolutions, admissibility,
//! density operators and the quantization map.
//!
//! `f ⋆ S = Σ_j w_j f(x_j) α_{x_j}(S)` with `α_x(S) = σ(x)* S σ(x)`, and
//! `(T ⋆ S)(x) = tr(T α_x(S))`, both over the nodes of one Haar grid.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::c64;
use crate::error::{QhaError, Result};
use crate::group::{GroupFunction, GroupModel, HaarGrid};
use crate::numeric::ComplexSum;
use crate::operator::{OperatorRep, Vector};
use crate::representation::{cyclic_phase, DufloMoore, HilbertBasis, RepresentationModel};

/// Dilation rows processed per parallel batch in the affine kernel.
const ROW_BATCH: usize = 32;

/// Probe threshold: `‖D⁻¹SD⁻¹‖₁` on the full basis over the same norm with
/// the lowest-frequency band removed.
pub const PROBE_THRESHOLD: f64 = 1.05;

pub(crate) fn check_grid(model: &RepresentationModel, grid: &HaarGrid) -> Result<()> {
    if grid.group() == model.group() {
        Ok(())
    } else {
        Err(QhaError::BackendMismatch(format!(
            "grid over {:?} used with representation of {:?}",
            grid.group(),
            model.group()
        )))
    }
}

/// Entry-wise compensated accumulation of matrix blocks.
struct MatrixAccumulator {
    sum: DMatrix<Complex64>,
    comp: DMatrix<Complex64>,
}

impl MatrixAccumulator {
    fn new(n: usize) -> Self {
        Self { sum: DMatrix::zeros(n, n), comp: DMatrix::zeros(n, n) }
    }

    #[inline]
    fn add(&mut self, i: usize, j: usize, v: Complex64) {
        let s = &mut self.sum[(i, j)];
        let c = &mut self.comp[(i, j)];
        let t_re = s.re + v.re;
        c.re += if s.re.abs() >= v.re.abs() { (s.re - t_re) + v.re } else { (v.re - t_re) + s.re };
        let t_im = s.im + v.im;
        c.im += if s.im.abs() >= v.im.abs() { (s.im - t_im) + v.im } else { (v.im - t_im) + s.im };
        *s = c64(t_re, t_im);
    }

    fn finish(self) -> DMatrix<Complex64> {
        self.sum + self.comp
    }
}

/// `f ⋆ S`.
pub fn func_op_convolve(model: &RepresentationModel, f: &GroupFunction, s: &OperatorRep) -> Result<OperatorRep> {
    check_grid(model, f.grid())?;
    model.check_operator(s)?;
    let n = model.dim();
    if s.is_zero() {
        return Ok(OperatorRep::zeros(model.basis().clone()));
    }
    let m = match model.group() {
        GroupModel::Affine => affine_func_op(model, f, s)?,
        GroupModel::Cyclic { n: ng } => cyclic_func_op(*ng, f, s),
    };
    debug_assert_eq!(m.nrows(), n);
    OperatorRep::new(model.basis().clone(), m)
}

fn affine_func_op(model: &RepresentationModel, f: &GroupFunction, s: &OperatorRep) -> Result<DMatrix<Complex64>> {
    let grid = f.grid();
    let axes = grid.axes();
    let n = model.dim();
    let (rows, cols) = s.support();
    let sm = s.matrix();
    let zero = c64(0.0, 0.0);
    let mut acc = MatrixAccumulator::new(n);
    let row_ids: Vec<usize> = (0..axes[1].len).collect();
    for batch in row_ids.chunks(ROW_BATCH) {
        let blocks: Vec<Option<(i64, DMatrix<Complex64>)>> = batch
            .par_iter()
            .map(|&i1| -> Result<Option<(i64, DMatrix<Complex64>)>> {
                let terms: Vec<(f64, Complex64)> = (0..axes[0].len)
                    .filter_map(|i0| {
                        let idx = grid.index(i0, i1);
                        let v = f.values()[idx];
                        (v != zero).then(|| (axes[0].coord(i0), v * grid.weights_r()[idx]))
                    })
                    .collect();
                if terms.is_empty() {
                    return Ok(None);
                }
                let m = model.dilation_index(axes[1].coord(i1).exp())?;
                let mut b = DMatrix::<Complex64>::zeros(rows.len(), cols.len());
                let mut er = vec![zero; rows.len()];
                for (x, c) in terms {
                    for (e, i) in er.iter_mut().zip(rows.clone()) {
                        *e = model.phase(x, i) * c;
                    }
                    for (kk, k) in cols.clone().enumerate() {
                        let t = model.phase(x, k).conj();
                        let mut col = b.column_mut(kk);
                        for (ii, e) in er.iter().enumerate() {
                            col[ii] += e * t;
                        }
                    }
                }
                for (kk, k) in cols.clone().enumerate() {
                    for (ii, i) in rows.clone().enumerate() {
                        b[(ii, kk)] *= sm[(i, k)];
                    }
                }
                Ok(Some((m, b)))
            })
            .collect::<Result<Vec<_>>>()?;
        for (m, b) in blocks.into_iter().flatten() {
            for (kk, k) in cols.clone().enumerate() {
                let q = k as i64 + m;
                if q < 0 || q >= n as i64 {
                    continue;
                }
                for (ii, i) in rows.clone().enumerate() {
                    let p = i as i64 + m;
                    if p < 0 || p >= n as i64 {
                        continue;
                    }
                    acc.add(p as usize, q as usize, b[(ii, kk)]);
                }
            }
        }
    }
    Ok(acc.finish())
}

fn cyclic_func_op(ng: usize, f: &GroupFunction, s: &OperatorRep) -> DMatrix<Complex64> {
    let grid = f.grid();
    let zero = c64(0.0, 0.0);
    let terms: Vec<(usize, usize, Complex64)> = (0..grid.len())
        .filter(|&i| f.values()[i] != zero)
        .map(|i| {
            let u = grid.chart(i);
            (u[0] as usize, u[1] as usize, f.values()[i] * grid.weights_r()[i])
        })
        .collect();
    let sm = s.matrix();
    let rows: Vec<Vec<Complex64>> = (0..ng)
        .into_par_iter()
        .map(|p| {
            let mut acc = vec![ComplexSum::new(); ng];
            for &(j, k, c) in &terms {
                for (q, a) in acc.iter_mut().enumerate() {
                    let ph = cyclic_phase(k * ((q + ng - p) % ng), ng);
                    a.add(c * ph * sm[((p + j) % ng, (q + j) % ng)]);
                }
            }
            acc.iter().map(|a| a.value()).collect()
        })
        .collect();
    DMatrix::from_fn(ng, ng, |p, q| rows[p][q])
}

/// Reference `f ⋆ S` through dense conjugations, summed sequentially.
pub fn func_op_convolve_reference(
    model: &RepresentationModel,
    f: &GroupFunction,
    s: &OperatorRep,
) -> Result<OperatorRep> {
    check_grid(model, f.grid())?;
    model.check_operator(s)?;
    let grid = f.grid();
    let mut acc = DMatrix::<Complex64>::zeros(model.dim(), model.dim());
    for i in 0..grid.len() {
        let v = f.values()[i];
        if v == c64(0.0, 0.0) {
            continue;
        }
        let a = model.conjugate_dense(s, &grid.node(i))?;
        acc += a.matrix() * (v * grid.weights_r()[i]);
    }
    OperatorRep::new(model.basis().clone(), acc)
}

/// `(T ⋆ S)(x) = tr(T σ(x)* S σ(x))` sampled on the grid.
pub fn op_op_convolve(
    model: &RepresentationModel,
    t: &OperatorRep,
    s: &OperatorRep,
    grid: &Arc<HaarGrid>,
) -> Result<GroupFunction> {
    check_grid(model, grid)?;
    model.check_operator(t)?;
    model.check_operator(s)?;
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| op_op_at(model, t, s, grid, i))
        .collect::<Result<Vec<_>>>()?;
    GroupFunction::new(grid.clone(), values)
}

fn op_op_at(model: &RepresentationModel, t: &OperatorRep, s: &OperatorRep, grid: &HaarGrid, i: usize) -> Result<Complex64> {
    let g = grid.node(i);
    let tm = t.matrix();
    let sm = s.matrix();
    let mut acc = ComplexSum::new();
    match *model.group() {
        GroupModel::Affine => {
            let m = model.dilation_index(g.a())?;
            let (srows, scols) = s.support();
            let (trows, tcols) = t.support();
            // i ranges over rows of S with i + m a column of T; k over columns of S with k + m a row of T.
            let clip = |r: std::ops::Range<usize>, tr: std::ops::Range<usize>| {
                let lo = (r.start as i64).max(tr.start as i64 - m);
                let hi = (r.end as i64).min(tr.end as i64 - m);
                if hi > lo {
                    lo as usize..hi as usize
                } else {
                    0..0
                }
            };
            let ri = clip(srows, tcols);
            let rk = clip(scols, trows);
            if ri.is_empty() || rk.is_empty() {
                return Ok(c64(0.0, 0.0));
            }
            let ek: Vec<Complex64> = rk.clone().map(|k| model.phase(g.x(), k).conj()).collect();
            for ii in ri {
                let ei = model.phase(g.x(), ii);
                let p = (ii as i64 + m) as usize;
                let mut inner = ComplexSum::new();
                for (kk, k) in rk.clone().enumerate() {
                    let q = (k as i64 + m) as usize;
                    inner.add(tm[(q, p)] * ek[kk] * sm[(ii, k)]);
                }
                acc.add(ei * inner.value());
            }
        }
        GroupModel::Cyclic { n: ng } => {
            let (j, k) = (g.c0 as usize, g.c1 as usize);
            for p in 0..ng {
                for q in 0..ng {
                    let ph = cyclic_phase(k * ((q + ng - p) % ng), ng);
                    acc.add(tm[(q, p)] * ph * sm[((p + j) % ng, (q + j) % ng)]);
                }
            }
        }
    }
    Ok(acc.value())
}

#[derive(Clone, Debug, Serialize)]
pub struct AdmissibilityReport {
    /// `tr(D⁻¹SD⁻¹)` (real part).
    pub constant: f64,
    /// Imaginary part of `tr(D⁻¹SD⁻¹)`, nonzero for non-self-adjoint `S`.
    pub constant_imag: f64,
    /// `‖D⁻¹SD⁻¹‖_{S¹}`.
    pub trace_norm_dsd: f64,
    /// Full-basis trace norm over the trace norm with the lowest 10% of
    /// frequencies removed (1 for the cyclic model).
    pub probe_ratio: f64,
    pub converged: bool,
}

/// Admissibility constant and the low-frequency growth probe.
pub fn admissibility_report(s: &OperatorRep) -> AdmissibilityReport {
    let dm = DufloMoore::new(s.basis().clone());
    let dsd = dm.sandwich_inv(s);
    let tr = dsd.trace();
    let full = dsd.schatten_norm(1.0).expect("p = 1 is valid");
    let probe_ratio = match **s.basis() {
        HilbertBasis::Cyclic { .. } => 1.0,
        HilbertBasis::Affine { n, .. } => {
            let cut = n / 10;
            let mut m = dsd.matrix().clone();
            m.rows_mut(0, cut).fill(c64(0.0, 0.0));
            m.columns_mut(0, cut).fill(c64(0.0, 0.0));
            let restricted = OperatorRep::new(s.basis().clone(), m)
                .expect("same shape")
                .schatten_norm(1.0)
                .expect("p = 1 is valid");
            if full == 0.0 {
                1.0
            } else if restricted == 0.0 {
                f64::INFINITY
            } else {
                full / restricted
            }
        }
    };
    AdmissibilityReport {
        constant: tr.re,
        constant_imag: tr.im,
        trace_norm_dsd: full,
        probe_ratio,
        converged: probe_ratio <= PROBE_THRESHOLD,
    }
}

#[derive(Clone, Debug)]
pub struct DensityOperator {
    pub operator: OperatorRep,
    /// Normalization `c` in `S = c Σ s_n ξ_n ⊗ ξ_n`.
    pub scale: f64,
    /// `tr(S)`.
    pub trace: f64,
}

/// `S = c Σ s_n ξ_n ⊗ ξ_n` with `c` chosen so that `tr(D⁻¹SD⁻¹) = 1`.
pub fn make_density_operator(basis: Arc<HilbertBasis>, vectors: &[Vector], weights: &[f64]) -> Result<DensityOperator> {
    if vectors.is_empty() || vectors.len() != weights.len() {
        return Err(QhaError::InvalidParameter(format!(
            "need matching non-empty vector and weight lists, got {} and {}",
            vectors.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || weights.iter().all(|w| *w == 0.0) {
        return Err(QhaError::InvalidWeights);
    }
    let n = basis.dim();
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for (v, w) in vectors.iter().zip(weights) {
        if v.len() != n {
            return Err(QhaError::Dimension { expected: n, found: v.len() });
        }
        if *w > 0.0 {
            m += (v * v.adjoint()) * c64(*w, 0.0);
        }
    }
    let s0 = OperatorRep::new(basis.clone(), m)?;
    let c0 = DufloMoore::new(basis).sandwich_inv(&s0).trace().re;
    if !(c0 > 0.0) {
        return Err(QhaError::InvalidParameter("mixture has zero admissibility constant".into()));
    }
    let operator = s0.scale(c64(1.0 / c0, 0.0));
    let trace = operator.trace().re;
    Ok(DensityOperator { operator, scale: 1.0 / c0, trace })
}

/// Quantization `Γ_{DTD}(f) = f ⋆ (D T D)`.
pub fn quantize(model: &RepresentationModel, f: &GroupFunction, t: &OperatorRep) -> Result<OperatorRep> {
    model.check_operator(t)?;
    let dtd = DufloMoore::new(model.basis().clone()).sandwich(t);
    func_op_convolve(model, f, &dtd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::HaarGrid;
    use crate::signals::{cyclic_gaussian, log_gaussian};

    #[test]
    fn affine_kernel_matches_reference() {
        let model = RepresentationModel::affine(40, 0.5, 0.08).unwrap();
        let b = model.basis().clone();
        let u = log_gaussian(&b, 1.6, 0.25, 1.0).unwrap();
        let v = log_gaussian(&b, 1.4, 0.3, -0.5).unwrap();
        let s = OperatorRep::rank_one(b, &u, &v).unwrap();
        let grid = Arc::new(HaarGrid::affine_lattice(-1.0, 1.0, 6, 0.08, -3, 3).unwrap());
        let f = GroupFunction::from_fn(grid.clone(), |g| c64(g.x().cos() + g.a(), g.x()));
        let fast = func_op_convolve(&model, &f, &s).unwrap();
        let slow = func_op_convolve_reference(&model, &f, &s).unwrap();
        assert!(fast.sub(&slow).unwrap().frobenius_norm() < 1e-12 * (1.0 + slow.frobenius_norm()));
    }

    #[test]
    fn cyclic_kernel_matches_reference() {
        let model = RepresentationModel::cyclic(6).unwrap();
        let b = model.basis().clone();
        let u = cyclic_gaussian(6, 1.0, 1.2, 2.0);
        let v = cyclic_gaussian(6, 3.0, 0.8, -1.0);
        let s = OperatorRep::rank_one(b, &u, &v).unwrap();
        let grid = Arc::new(HaarGrid::cyclic_full(6).unwrap());
        let f = GroupFunction::from_fn(grid.clone(), |g| c64(g.c0 - g.c1 * 0.5, 1.0));
        let fast = func_op_convolve(&model, &f, &s).unwrap();
        let slow = func_op_convolve_reference(&model, &f, &s).unwrap();
        assert!(fast.sub(&slow).unwrap().frobenius_norm() < 1e-12);
    }

    #[test]
    fn op_op_matches_direct_trace() {
        let model = RepresentationModel::affine(40, 0.5, 0.08).unwrap();
        let b = model.basis().clone();
        let u = log_gaussian(&b, 1.6, 0.25, 1.0).unwrap();
        let v = log_gaussian(&b, 1.4, 0.3, -0.5).unwrap();
        let s = OperatorRep::rank_one(b.clone(), &u, &v).unwrap();
        let t = OperatorRep::rank_one(b, &v, &v).unwrap();
        let grid = Arc::new(HaarGrid::affine_lattice(-1.0, 1.0, 5, 0.08, -3, 3).unwrap());
        let ts = op_op_convolve(&model, &t, &s, &grid).unwrap();
        for i in 0..grid.len() {
            let a = model.conjugate_dense(&s, &grid.node(i)).unwrap();
            let direct = t.compose(&a).unwrap().trace();
            assert!((ts.values()[i] - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn density_operator_rejects_zero_weights() {
        let b = Arc::new(HilbertBasis::cyclic(4).unwrap());
        let v = vec![Vector::from_element(4, c64(1.0, 0.0))];
        assert_eq!(make_density_operator(b.clone(), &v, &[0.0]).unwrap_err(), QhaError::InvalidWeights);
        let d = make_density_operator(b, &v, &[2.0]).unwrap();
        assert!((d.trace - 1.0).abs() < 1e-14);
    }
}
