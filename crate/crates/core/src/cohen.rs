//! Cohen's class distributions `Q_S(ψ, φ)(x) = ⟨S σ(x)ψ, σ(x)φ⟩`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::c64;
use crate::convolution::check_grid;
use crate::error::{QhaError, Result};
use crate::group::{GroupFunction, HaarGrid, WindowSpec};
use crate::numeric::{kahan_sum, ComplexSum};
use crate::operator::{norm, OperatorRep, Vector};
use crate::representation::RepresentationModel;

/// Samples of a Cohen's class distribution on a Haar grid.
#[derive(Clone, Debug)]
pub struct CohenMap {
    pub values: GroupFunction,
    /// Short description of the operator and vectors it was built from.
    pub label: String,
}

impl CohenMap {
    pub fn grid(&self) -> &Arc<HaarGrid> {
        self.values.grid()
    }

    /// `Σ w_r Q` over the grid.
    pub fn total(&self) -> Complex64 {
        self.values.integral_r()
    }

    /// Rows `(x, a, re, im)` for export.
    pub fn rows(&self) -> Vec<[f64; 4]> {
        let grid = self.grid();
        (0..grid.len())
            .map(|i| {
                let g = grid.node(i);
                let v = self.values.values()[i];
                [g.c0, g.c1, v.re, v.im]
            })
            .collect()
    }
}

/// `Q_S(ψ, φ)` on every node of the grid.
pub fn cohen_map(
    model: &RepresentationModel,
    s: &OperatorRep,
    psi: &Vector,
    phi: &Vector,
    grid: &Arc<HaarGrid>,
) -> Result<CohenMap> {
    check_grid(model, grid)?;
    model.check_operator(s)?;
    model.check_vector(psi)?;
    model.check_vector(phi)?;
    let (rows, cols) = s.support();
    let sm = s.matrix();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| -> Result<Complex64> {
            if rows.is_empty() {
                return Ok(c64(0.0, 0.0));
            }
            let g = grid.node(i);
            let u = model.apply_on(&g, psi, cols.clone())?;
            let v = model.apply_on(&g, phi, rows.clone())?;
            let mut acc = ComplexSum::new();
            for (ii, r) in rows.clone().enumerate() {
                if v[ii] == c64(0.0, 0.0) {
                    continue;
                }
                let mut su = ComplexSum::new();
                for (kk, k) in cols.clone().enumerate() {
                    su.add(sm[(r, k)] * u[kk]);
                }
                acc.add(su.value() * v[ii].conj());
            }
            Ok(acc.value())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CohenMap {
        values: GroupFunction::new(grid.clone(), values)?,
        label: "Q_S(psi, phi)".into(),
    })
}

/// `|⟨ξ, σ(x)ψ⟩|²`, the Cohen map of `ξ ⊗ ξ`.
pub fn scalogram(model: &RepresentationModel, xi: &Vector, psi: &Vector, grid: &Arc<HaarGrid>) -> Result<CohenMap> {
    check_grid(model, grid)?;
    model.check_vector(xi)?;
    model.check_vector(psi)?;
    if norm(xi) == 0.0 {
        return Err(QhaError::InvalidParameter("scalogram window is the zero vector".into()));
    }
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| -> Result<Complex64> {
            let g = grid.node(i);
            let sp = model.apply(&g, psi)?;
            Ok(c64(crate::operator::inner(xi, &sp).norm_sqr(), 0.0))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CohenMap { values: GroupFunction::new(grid.clone(), values)?, label: "scalogram".into() })
}

/// One term `λ_n |⟨σ(x)ψ, φ_n⟩|²` of the eigen-expansion.
#[derive(Clone, Debug)]
pub struct ExpansionTerm {
    pub eigenvalue: f64,
    pub values: GroupFunction,
}

/// Below this relative size eigenvalues are treated as the numerical kernel.
pub const EXPANSION_RANK_TOL: f64 = 1e-13;

/// `Q_S(ψ) = Σ λ_n |⟨σ(x)ψ, φ_n⟩|²` for positive `S`.
pub fn positive_expansion(
    model: &RepresentationModel,
    s: &OperatorRep,
    psi: &Vector,
    grid: &Arc<HaarGrid>,
) -> Result<(CohenMap, Vec<ExpansionTerm>)> {
    check_grid(model, grid)?;
    model.check_operator(s)?;
    model.check_vector(psi)?;
    s.require_positive(1e-10)?;
    let spec = s.spectral_decomposition()?;
    let top = spec.values.first().copied().unwrap_or(0.0);
    let mut terms = Vec::new();
    for (k, &lam) in spec.values.iter().enumerate() {
        if lam <= EXPANSION_RANK_TOL * top {
            continue;
        }
        let phi = spec.vector(k);
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| -> Result<Complex64> {
                let sp = model.apply(&grid.node(i), psi)?;
                Ok(c64(lam * crate::operator::inner(&sp, &phi).norm_sqr(), 0.0))
            })
            .collect::<Result<Vec<_>>>()?;
        terms.push(ExpansionTerm { eigenvalue: lam, values: GroupFunction::new(grid.clone(), values)? });
    }
    let sum: Vec<Complex64> = (0..grid.len())
        .map(|i| {
            let mut acc = ComplexSum::new();
            for t in &terms {
                acc.add(t.values.values()[i]);
            }
            acc.value()
        })
        .collect();
    let map = CohenMap { values: GroupFunction::new(grid.clone(), sum)?, label: "positive expansion".into() };
    Ok((map, terms))
}

#[derive(Clone, Debug, Serialize)]
pub struct UncertaintyReport {
    /// `∫_Ω |Q_S(ψ)| dμ_r`.
    pub mass: f64,
    /// `ε` with `mass = (1 - ε) ‖S‖`.
    pub epsilon: f64,
    /// Quadrature measure of `Ω` (summed weights of the nodes it contains).
    pub mu_r: f64,
    /// Closed-form measure of `Ω`.
    pub mu_r_exact: f64,
    pub bound_holds: bool,
}

/// Slack allowed in `μ_r(Ω) ≥ 1 - ε`.
pub const UNCERTAINTY_SLACK: f64 = 1e-6;

/// Concentration of `Q_S(ψ)` on `Ω` against `μ_r(Ω) ≥ 1 - ε`.
pub fn uncertainty_check(
    model: &RepresentationModel,
    s: &OperatorRep,
    psi: &Vector,
    omega: &WindowSpec,
    grid: &Arc<HaarGrid>,
) -> Result<UncertaintyReport> {
    let q = cohen_map(model, s, psi, psi, grid)?;
    let group = *grid.group();
    let mass = kahan_sum((0..grid.len()).filter(|&i| omega.contains(&group, &grid.node(i))).map(|i| {
        grid.weights_r()[i] * q.values.values()[i].norm()
    }));
    let op_norm = s.operator_norm();
    let epsilon = if op_norm > 0.0 { 1.0 - mass / op_norm } else { 1.0 };
    let mu_r = grid.window_measure(omega);
    Ok(UncertaintyReport {
        mass,
        epsilon,
        mu_r,
        mu_r_exact: crate::group::right_haar_measure(omega, &group)?,
        bound_holds: mu_r >= 1.0 - epsilon - UNCERTAINTY_SLACK,
    })
}

/// Random-vector search for a point where `Q_S(ψ)` goes negative.
#[derive(Clone, Debug, Serialize)]
pub struct PositivityProbe {
    pub trials: usize,
    /// Smallest `Re Q_S(ψ)(x) / ‖ψ‖²` seen over all trials and nodes.
    pub min_value: f64,
    /// Trial index and node of `min_value`.
    pub at: Option<(usize, usize)>,
}

impl PositivityProbe {
    /// True once some sample fell below `-tol · ‖S‖`.
    pub fn found_negative(&self, s: &OperatorRep, tol: f64) -> bool {
        self.min_value < -tol * s.operator_norm()
    }
}

/// Samples `Q_S(ψ)` for `trials` random `ψ` supported on the interior band.
/// Only ever finds evidence against positivity; a clean run proves nothing.
pub fn positivity_probe(
    model: &RepresentationModel,
    s: &OperatorRep,
    grid: &Arc<HaarGrid>,
    trials: usize,
    seed: u64,
) -> Result<PositivityProbe> {
    let mut r = crate::signals::rng(seed);
    let band = model.basis().interior_band();
    let mut out = PositivityProbe { trials, min_value: f64::INFINITY, at: None };
    for t in 0..trials {
        let psi = crate::signals::random_vector(&mut r, model.dim(), band.clone());
        let n2 = norm(&psi).powi(2);
        let q = cohen_map(model, s, &psi, &psi, grid)?;
        for (i, v) in q.values.values().iter().enumerate() {
            if v.re / n2 < out.min_value {
                out.min_value = v.re / n2;
                out.at = Some((t, i));
            }
        }
    }
    Ok(out)
}
