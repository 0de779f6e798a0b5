//! Operators on the finite-dimensional representation space.
//!
//! Matrices are stored in the orthonormal coefficient frame of the basis, so
//! adjoints, traces and Schatten norms are the plain matrix ones.

use std::io::{Read, Write};
use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::c64;
use crate::error::{QhaError, Result};
use crate::numeric::{kahan_sum, ComplexSum};
use crate::representation::HilbertBasis;

pub type Vector = DVector<Complex64>;

/// Relative asymmetry accepted before an operator is treated as self-adjoint.
pub const SELF_ADJOINT_TOL: f64 = 1e-10;

/// Relative tolerance under which eigenvalues count as tied.
pub const EIGEN_TIE_TOL: f64 = 1e-12;

const BINARY_MAGIC: &[u8; 8] = b"QHAOP\x00\x01\x00";

/// `⟨u, v⟩ = Σ u_i conj(v_i)`, linear in the first slot.
pub fn inner(u: &Vector, v: &Vector) -> Complex64 {
    let mut acc = ComplexSum::new();
    for (a, b) in u.iter().zip(v.iter()) {
        acc.add(a * b.conj());
    }
    acc.value()
}

pub fn norm(u: &Vector) -> f64 {
    kahan_sum(u.iter().map(|z| z.norm_sqr())).sqrt()
}

/// Index range of the nonzero entries of a vector.
pub fn vector_support(v: &Vector) -> Range<usize> {
    let zero = c64(0.0, 0.0);
    match v.iter().position(|z| *z != zero) {
        None => 0..0,
        Some(s) => s..v.len() - v.iter().rev().position(|z| *z != zero).unwrap(),
    }
}

#[derive(Clone, Debug)]
pub struct OperatorRep {
    basis: Arc<HilbertBasis>,
    matrix: DMatrix<Complex64>,
    rows: Range<usize>,
    cols: Range<usize>,
}

impl PartialEq for OperatorRep {
    fn eq(&self, other: &Self) -> bool {
        self.basis == other.basis && self.matrix == other.matrix
    }
}

impl OperatorRep {
    pub fn new(basis: Arc<HilbertBasis>, matrix: DMatrix<Complex64>) -> Result<Self> {
        let n = basis.dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(QhaError::Dimension { expected: n, found: matrix.nrows().max(matrix.ncols()) });
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QhaError::InvalidParameter("operator has non-finite entries".into()));
        }
        Ok(Self::from_parts(basis, matrix))
    }

    pub(crate) fn from_parts(basis: Arc<HilbertBasis>, matrix: DMatrix<Complex64>) -> Self {
        let (rows, cols) = support_of(&matrix);
        Self { basis, matrix, rows, cols }
    }

    pub fn zeros(basis: Arc<HilbertBasis>) -> Self {
        let n = basis.dim();
        Self::from_parts(basis, DMatrix::zeros(n, n))
    }

    pub fn identity(basis: Arc<HilbertBasis>) -> Self {
        let n = basis.dim();
        Self::from_parts(basis, DMatrix::identity(n, n))
    }

    pub fn diagonal(basis: Arc<HilbertBasis>, d: &[f64]) -> Result<Self> {
        let n = basis.dim();
        if d.len() != n {
            return Err(QhaError::Dimension { expected: n, found: d.len() });
        }
        let m = DMatrix::from_fn(n, n, |i, j| if i == j { c64(d[i], 0.0) } else { c64(0.0, 0.0) });
        Ok(Self::from_parts(basis, m))
    }

    /// `ψ ⊗ φ : ξ ↦ ⟨ξ, φ⟩ ψ`.
    pub fn rank_one(basis: Arc<HilbertBasis>, psi: &Vector, phi: &Vector) -> Result<Self> {
        let n = basis.dim();
        for v in [psi, phi] {
            if v.len() != n {
                return Err(QhaError::Dimension { expected: n, found: v.len() });
            }
        }
        Ok(Self::from_parts(basis, psi * phi.adjoint()))
    }

    pub fn basis(&self) -> &Arc<HilbertBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Row and column index ranges outside of which the matrix vanishes.
    pub fn support(&self) -> (Range<usize>, Range<usize>) {
        (self.rows.clone(), self.cols.clone())
    }

    pub fn is_zero(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn check_basis(&self, other: &OperatorRep) -> Result<()> {
        if Arc::ptr_eq(&self.basis, &other.basis) || self.basis == other.basis {
            Ok(())
        } else {
            Err(QhaError::BasisMismatch)
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            basis: self.basis.clone(),
            matrix: self.matrix.adjoint(),
            rows: self.cols.clone(),
            cols: self.rows.clone(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        let mut acc = ComplexSum::new();
        let lo = self.rows.start.max(self.cols.start);
        let hi = self.rows.end.min(self.cols.end);
        for i in lo..hi.max(lo) {
            acc.add(self.matrix[(i, i)]);
        }
        acc.value()
    }

    pub fn add(&self, other: &OperatorRep) -> Result<Self> {
        self.check_basis(other)?;
        Ok(Self::from_parts(self.basis.clone(), &self.matrix + &other.matrix))
    }

    pub fn sub(&self, other: &OperatorRep) -> Result<Self> {
        self.check_basis(other)?;
        Ok(Self::from_parts(self.basis.clone(), &self.matrix - &other.matrix))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::from_parts(self.basis.clone(), &self.matrix * c)
    }

    pub fn compose(&self, other: &OperatorRep) -> Result<Self> {
        self.check_basis(other)?;
        Ok(Self::from_parts(self.basis.clone(), &self.matrix * &other.matrix))
    }

    pub fn apply(&self, v: &Vector) -> Result<Vector> {
        if v.len() != self.dim() {
            return Err(QhaError::Dimension { expected: self.dim(), found: v.len() });
        }
        Ok(&self.matrix * v)
    }

    /// `⟨A v, v⟩`.
    pub fn quadratic_form(&self, v: &Vector) -> Result<Complex64> {
        let av = self.apply(v)?;
        Ok(inner(&av, v))
    }

    /// Hilbert-Schmidt inner product `tr(A B*)`.
    pub fn hs_inner(&self, other: &OperatorRep) -> Result<Complex64> {
        self.check_basis(other)?;
        let r = self.rows.start.max(other.rows.start)..self.rows.end.min(other.rows.end);
        let c = self.cols.start.max(other.cols.start)..self.cols.end.min(other.cols.end);
        let mut acc = ComplexSum::new();
        for j in c.clone() {
            for i in r.clone() {
                acc.add(self.matrix[(i, j)] * other.matrix[(i, j)].conj());
            }
        }
        Ok(acc.value())
    }

    pub fn frobenius_norm(&self) -> f64 {
        kahan_sum(self.matrix.iter().map(|z| z.norm_sqr())).sqrt()
    }

    /// `‖A - A*‖_F / ‖A‖_F` (zero for the zero operator).
    pub fn asymmetry(&self) -> f64 {
        let f = self.frobenius_norm();
        if f == 0.0 {
            return 0.0;
        }
        let d = &self.matrix - self.matrix.adjoint();
        kahan_sum(d.iter().map(|z| z.norm_sqr())).sqrt() / f
    }

    pub fn hermitian_part(&self) -> Self {
        let m = (&self.matrix + self.matrix.adjoint()) * c64(0.5, 0.0);
        Self::from_parts(self.basis.clone(), m)
    }

    fn active_block(&self) -> Range<usize> {
        if self.is_zero() {
            return 0..0;
        }
        self.rows.start.min(self.cols.start)..self.rows.end.max(self.cols.end)
    }

    /// Singular values in descending order (zeros outside the support omitted).
    pub fn singular_values(&self) -> Vec<f64> {
        if self.is_zero() {
            return Vec::new();
        }
        let block = self
            .matrix
            .view((self.rows.start, self.cols.start), (self.rows.len(), self.cols.len()))
            .into_owned();
        let mut s: Vec<f64> = block.singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// Schatten p-norm for `p ≥ 1` or `p = ∞`.
    pub fn schatten_norm(&self, p: f64) -> Result<f64> {
        if p.is_nan() || p < 1.0 {
            return Err(QhaError::InvalidExponent(p));
        }
        let s = self.singular_values();
        let max = s.first().copied().unwrap_or(0.0);
        if p.is_infinite() || max == 0.0 {
            return Ok(max);
        }
        let sum = kahan_sum(s.iter().map(|v| (v / max).powf(p)));
        Ok(max * sum.powf(1.0 / p))
    }

    pub fn operator_norm(&self) -> f64 {
        self.singular_values().first().copied().unwrap_or(0.0)
    }

    fn checked_hermitian(&self) -> Result<Self> {
        let asym = self.asymmetry();
        if asym > SELF_ADJOINT_TOL {
            return Err(QhaError::NotSelfAdjoint(asym));
        }
        Ok(self.hermitian_part())
    }

    /// Eigen-decomposition of a self-adjoint operator, eigenvalues descending.
    ///
    /// Ties (relative `1e-12`) are ordered by the index of the eigenvector's
    /// largest component; each eigenvector's largest component is made real
    /// and positive.
    pub fn spectral_decomposition(&self) -> Result<Spectrum> {
        let h = self.checked_hermitian()?;
        let n = self.dim();
        let block = h.active_block();
        let mut pairs: Vec<(f64, Vector)> = Vec::with_capacity(n);
        if !block.is_empty() {
            let sub = h.matrix.view((block.start, block.start), (block.len(), block.len())).into_owned();
            let eig = nalgebra::SymmetricEigen::new(sub);
            for (k, &lam) in eig.eigenvalues.iter().enumerate() {
                let mut v = Vector::zeros(n);
                v.rows_mut(block.start, block.len()).copy_from(&eig.eigenvectors.column(k));
                pairs.push((lam, v));
            }
        }
        for i in (0..block.start).chain(block.end..n) {
            let mut v = Vector::zeros(n);
            v[i] = c64(1.0, 0.0);
            pairs.push((0.0, v));
        }
        for (_, v) in pairs.iter_mut() {
            normalize_phase(v);
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let scale = pairs.iter().map(|p| p.0.abs()).fold(1.0, f64::max);
        let mut start = 0;
        while start < pairs.len() {
            let mut end = start + 1;
            while end < pairs.len() && (pairs[end - 1].0 - pairs[end].0).abs() <= EIGEN_TIE_TOL * scale {
                end += 1;
            }
            pairs[start..end].sort_by_key(|p| leading_index(&p.1));
            start = end;
        }
        let values = pairs.iter().map(|p| p.0).collect();
        let vectors = DMatrix::from_columns(&pairs.iter().map(|p| p.1.clone()).collect::<Vec<_>>());
        Ok(Spectrum { values, vectors })
    }

    /// Eigenvalues of a self-adjoint operator, descending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let h = self.checked_hermitian()?;
        let block = h.active_block();
        let mut vals: Vec<f64> = vec![0.0; self.dim() - block.len()];
        if !block.is_empty() {
            let sub = h.matrix.view((block.start, block.start), (block.len(), block.len())).into_owned();
            vals.extend(sub.symmetric_eigenvalues().iter().copied());
        }
        vals.sort_by(|a, b| b.total_cmp(a));
        Ok(vals)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.last().copied().unwrap_or(0.0))
    }

    /// Errors with the smallest eigenvalue when it is below `-tol · max(1, ‖S‖)`.
    pub fn require_positive(&self, tol: f64) -> Result<()> {
        let vals = self.eigenvalues()?;
        let lmin = vals.last().copied().unwrap_or(0.0);
        let scale = vals.first().map(|v| v.abs()).unwrap_or(0.0).max(lmin.abs()).max(1.0);
        if lmin < -tol * scale {
            Err(QhaError::NotPositive(lmin))
        } else {
            Ok(())
        }
    }

    /// `Φ(S)` for self-adjoint `S`. `phi` returns `None` where it is undefined.
    pub fn functional_calculus(&self, phi: impl Fn(f64) -> Option<f64>) -> Result<Self> {
        let h = self.checked_hermitian()?;
        let n = self.dim();
        let block = h.active_block();
        let mut out = DMatrix::<Complex64>::zeros(n, n);
        if block.len() < n {
            let phi0 = phi(0.0).ok_or(QhaError::FunctionDomain(0.0))?;
            for i in (0..block.start).chain(block.end..n) {
                out[(i, i)] = c64(phi0, 0.0);
            }
        }
        if !block.is_empty() {
            let sub = h.matrix.view((block.start, block.start), (block.len(), block.len())).into_owned();
            let eig = nalgebra::SymmetricEigen::new(sub);
            let mut mapped = Vec::with_capacity(block.len());
            for &lam in eig.eigenvalues.iter() {
                let v = phi(lam).filter(|v| v.is_finite()).ok_or(QhaError::FunctionDomain(lam))?;
                mapped.push(c64(v, 0.0));
            }
            let d = DMatrix::from_diagonal(&DVector::from_vec(mapped));
            let q = &eig.eigenvectors;
            let b = q * d * q.adjoint();
            out.view_mut((block.start, block.start), (block.len(), block.len())).copy_from(&b);
        }
        Ok(Self::from_parts(self.basis.clone(), out))
    }

    /// Serialize as a little-endian dense matrix: magic, `u64` rows, `u64`
    /// cols, then row-major `(re, im)` pairs of `f64`.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(self.matrix.nrows() as u64).to_le_bytes())?;
        w.write_all(&(self.matrix.ncols() as u64).to_le_bytes())?;
        for i in 0..self.matrix.nrows() {
            for j in 0..self.matrix.ncols() {
                let z = self.matrix[(i, j)];
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary(basis: Arc<HilbertBasis>, mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(QhaError::Io("not a qha operator file".into()));
        }
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let rows = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let cols = u64::from_le_bytes(word) as usize;
        if rows != basis.dim() || cols != basis.dim() {
            return Err(QhaError::Dimension { expected: basis.dim(), found: rows.max(cols) });
        }
        let mut m = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                r.read_exact(&mut word)?;
                let re = f64::from_le_bytes(word);
                r.read_exact(&mut word)?;
                let im = f64::from_le_bytes(word);
                m[(i, j)] = c64(re, im);
            }
        }
        Self::new(basis, m)
    }
}

fn support_of(m: &DMatrix<Complex64>) -> (Range<usize>, Range<usize>) {
    let zero = c64(0.0, 0.0);
    let (mut r0, mut r1, mut c0, mut c1) = (usize::MAX, 0, usize::MAX, 0);
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)] != zero {
                r0 = r0.min(i);
                r1 = r1.max(i + 1);
                c0 = c0.min(j);
                c1 = c1.max(j + 1);
            }
        }
    }
    if r0 == usize::MAX {
        (0..0, 0..0)
    } else {
        (r0..r1, c0..c1)
    }
}

fn leading_index(v: &Vector) -> usize {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    v.iter().position(|z| z.norm() >= max * (1.0 - 1e-12)).unwrap_or(0)
}

fn normalize_phase(v: &mut Vector) {
    let k = leading_index(v);
    let z = v[k];
    if z.norm() > 0.0 {
        let phase = z.conj() / z.norm();
        for e in v.iter_mut() {
            *e *= phase;
        }
    }
}

/// Eigenvalues (descending) and matching unit eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

impl Spectrum {
    pub fn count_above(&self, delta: f64) -> usize {
        self.values.iter().filter(|&&v| v > delta).count()
    }

    pub fn vector(&self, k: usize) -> Vector {
        self.vectors.column(k).into_owned()
    }

    /// `Σ λ_k v_k v_k*`.
    pub fn reconstruct(&self, basis: Arc<HilbertBasis>) -> OperatorRep {
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            self.values.len(),
            self.values.iter().map(|&v| c64(v, 0.0)),
        ));
        OperatorRep::from_parts(basis, &self.vectors * d * self.vectors.adjoint())
    }
}
