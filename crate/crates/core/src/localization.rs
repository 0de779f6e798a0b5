//! Mixed-state localization operators `χ_Ω ⋆ S`, their spectra, the
//! eigenvalue-counting experiment on the affine group, and Berezin-Lieb
//! inequalities.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::c64;
use crate::cohen::cohen_map;
use crate::convolution::{admissibility_report, check_grid, func_op_convolve, op_op_convolve};
use crate::error::{QhaError, Result};
use crate::group::{
    indicator, right_haar_measure, scale_set, GroupFunction, GroupModel, GroupPoint, HaarGrid,
    LocallyCompactGroup, WindowSpec,
};
use crate::numeric::{kahan_sum, NeumaierSum};
use crate::operator::{norm, OperatorRep, Vector};
use crate::representation::RepresentationModel;
use crate::signals::{random_vector, rng};

/// Eigenvalues below this are dropped from counts (numerical rank).
pub const RANK_FLOOR: f64 = 1e-12;

/// Positivity tolerance (relative to the operator norm) for inputs that must be positive.
pub const POSITIVITY_TOL: f64 = 1e-10;

/// `χ_Ω ⋆ S`; `Ω` must lie inside the grid window.
pub fn localization_operator(
    model: &RepresentationModel,
    omega: &WindowSpec,
    s: &OperatorRep,
    grid: &Arc<HaarGrid>,
) -> Result<OperatorRep> {
    check_grid(model, grid)?;
    omega.validate(grid.group())?;
    if omega.is_empty() {
        return Ok(OperatorRep::zeros(model.basis().clone()));
    }
    if !grid.covers(omega) {
        return Err(QhaError::WindowExceedsGrid(format!("{omega:?} not inside {:?}", grid.window())));
    }
    func_op_convolve(model, &indicator(omega, grid.clone())?, s)
}

/// `S̃ = S ⋆ S` for positive `S`.
pub fn s_tilde(model: &RepresentationModel, s: &OperatorRep, grid: &Arc<HaarGrid>) -> Result<GroupFunction> {
    s.require_positive(POSITIVITY_TOL)?;
    op_op_convolve(model, s, s, grid)
}

fn nodes_in(grid: &HaarGrid, omega: &WindowSpec) -> Vec<usize> {
    (0..grid.len()).filter(|&i| omega.contains(grid.group(), &grid.node(i))).collect()
}

/// `∫_Ω ∫_Ω S̃(x y⁻¹) dμ_r(x) dμ_r(y)` as a double sum over the nodes of `grid`
/// inside `Ω`, with `S̃` read (interpolated) from `s_tilde`.
pub fn second_moment(omega: &WindowSpec, grid: &Arc<HaarGrid>, s_tilde: &GroupFunction) -> Result<f64> {
    if s_tilde.grid().group() != grid.group() {
        return Err(QhaError::BackendMismatch("S̃ and grid come from different groups".into()));
    }
    omega.validate(grid.group())?;
    if omega.is_empty() {
        return Ok(0.0);
    }
    if !grid.covers(omega) {
        return Err(QhaError::WindowExceedsGrid(format!("{omega:?} not inside {:?}", grid.window())));
    }
    let group = *grid.group();
    let inside = nodes_in(grid, omega);
    let inv: Vec<GroupPoint> = inside.iter().map(|&j| group.inverse(&grid.node(j)).expect("valid node")).collect();
    let parts: Vec<NeumaierSum> = inside
        .par_iter()
        .map(|&i| {
            let x = grid.node(i);
            let mut acc = NeumaierSum::new();
            for (yinv, &j) in inv.iter().zip(&inside) {
                let z = group.compose(&x, yinv).expect("valid node");
                acc.add(grid.weights_r()[j] * s_tilde.evaluate(&z).re);
            }
            let mut out = NeumaierSum::new();
            out.add(grid.weights_r()[i] * acc.value());
            out
        })
        .collect();
    let mut total = NeumaierSum::new();
    for p in &parts {
        total.merge(p);
    }
    Ok(total.value())
}

/// The same double sum for an affine lattice grid, grouped by dilation
/// difference: `Σ_d (|M| - |d|) Σ_{x, y} w² S̃(x - e^{dΔ} y, e^{dΔ})`.
pub fn second_moment_lattice(omega: &WindowSpec, grid: &Arc<HaarGrid>, s_tilde: &GroupFunction) -> Result<f64> {
    if *grid.group() != GroupModel::Affine || *s_tilde.grid().group() != GroupModel::Affine {
        return Err(QhaError::Unsupported { op: "lattice second moment", backend: "cyclic" });
    }
    omega.validate(grid.group())?;
    if omega.is_empty() {
        return Ok(0.0);
    }
    if !grid.covers(omega) {
        return Err(QhaError::WindowExceedsGrid(format!("{omega:?} not inside {:?}", grid.window())));
    }
    let inside = nodes_in(grid, omega);
    if inside.is_empty() {
        return Ok(0.0);
    }
    let axes = grid.axes();
    let (mut i0s, mut i1s) = (Vec::new(), Vec::new());
    for &i in &inside {
        let (a, b) = grid.split(i);
        i0s.push(a);
        i1s.push(b);
    }
    let (x_lo, x_hi) = (*i0s.iter().min().unwrap(), *i0s.iter().max().unwrap());
    let (m_lo, m_hi) = (*i1s.iter().min().unwrap(), *i1s.iter().max().unwrap());
    let nx = x_hi - x_lo + 1;
    let nm = m_hi - m_lo + 1;
    debug_assert_eq!(nx * nm, inside.len());
    let w = grid.weights_r()[inside[0]];
    let step = axes[1].step;
    let xs: Vec<f64> = (x_lo..=x_hi).map(|i| axes[0].coord(i)).collect();
    let ds: Vec<i64> = (-(nm as i64 - 1)..=(nm as i64 - 1)).collect();
    let parts: Vec<NeumaierSum> = ds
        .par_iter()
        .map(|&d| {
            let a = (d as f64 * step).exp();
            let mut acc = NeumaierSum::new();
            for &x in &xs {
                for &y in &xs {
                    acc.add(s_tilde.evaluate(&GroupPoint::new(x - a * y, a)).re);
                }
            }
            let mut out = NeumaierSum::new();
            out.add((nm as i64 - d.abs()) as f64 * w * w * acc.value());
            out
        })
        .collect();
    let mut total = NeumaierSum::new();
    for p in &parts {
        total.merge(p);
    }
    Ok(total.value())
}

/// Parameters of the eigenvalue-counting experiment.
#[derive(Clone, Debug, Serialize)]
pub struct ScalingConfig {
    /// Spacing of the x axis of the per-R grids.
    pub x_step: f64,
    /// Margin added around `RΩ` on both axes, in metric units.
    pub margin: f64,
    /// Cap on nodes per grid axis.
    pub resolution_cap: usize,
    /// Half-width of the `S̃` table along x.
    pub s_tilde_x_half_width: f64,
    /// x spacing of the `S̃` table.
    pub s_tilde_x_step: f64,
    /// Largest |dilation index| tabulated for `S̃`.
    pub s_tilde_m_max: i64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            x_step: 1.0 / 32.0,
            margin: 2.0,
            resolution_cap: 512,
            s_tilde_x_half_width: 4.0,
            s_tilde_x_step: 1.0 / 64.0,
            s_tilde_m_max: 80,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalizationReport {
    pub r: f64,
    pub window: WindowSpec,
    /// Descending eigenvalues of `χ_{RΩ} ⋆ S` above the numerical rank floor.
    pub spectrum: Vec<f64>,
    pub eig_min: f64,
    pub eig_max: f64,
    /// Quadrature measure of `RΩ`.
    pub mu_r: f64,
    /// Closed-form measure of `RΩ`.
    pub mu_r_exact: f64,
    pub trace: f64,
    pub trace_s: f64,
    pub count_above: usize,
    pub ratio: f64,
    /// `∫∫ S̃` over `RΩ × RΩ`.
    pub second_moment: f64,
    /// `tr((χ_{RΩ} ⋆ S)²)` from the assembled operator.
    pub hs_norm_sq: f64,
    pub deviation: f64,
    pub lemma_bound: f64,
    /// The same bound with the operator-side second moment.
    pub lemma_bound_operator: f64,
    pub lemma_holds: bool,
    /// `∫_{RΩ} φ(z w⁻¹) dμ_r(z)`, `φ = S̃ / tr(S)`, `w = Γ_R(centre of Ω)`.
    pub approx_identity: f64,
}

/// `max{1/δ, 1/(1-δ)}`.
pub fn lemma_constant(delta: f64) -> f64 {
    (1.0 / delta).max(1.0 / (1.0 - delta))
}

/// Slack on the counting lemma.
pub const LEMMA_SLACK: f64 = 1e-6;

/// Spectrum and counting statistics of `χ_Ω ⋆ S` on a given grid.
pub fn localization_report(
    model: &RepresentationModel,
    omega: &WindowSpec,
    s: &OperatorRep,
    delta: f64,
    grid: &Arc<HaarGrid>,
    s_tilde: &GroupFunction,
    r: f64,
) -> Result<LocalizationReport> {
    check_delta(delta)?;
    let a = localization_operator(model, omega, s, grid)?;
    let mut eig = a.eigenvalues()?;
    let eig_min = eig.last().copied().unwrap_or(0.0);
    let eig_max = eig.first().copied().unwrap_or(0.0);
    eig.retain(|v| *v > RANK_FLOOR);
    let mu_r = grid.window_measure(omega);
    let mu_r_exact = right_haar_measure(omega, grid.group())?;
    let trace = a.trace().re;
    let trace_s = s.trace().re;
    let count_above = eig.iter().filter(|&&v| v > 1.0 - delta).count();
    let expected = trace_s * mu_r;
    let second = match grid.group() {
        GroupModel::Affine => second_moment_lattice(omega, grid, s_tilde)?,
        GroupModel::Cyclic { .. } => second_moment(omega, grid, s_tilde)?,
    };
    let hs = a.frobenius_norm().powi(2);
    let c = lemma_constant(delta);
    let deviation = (count_above as f64 - expected).abs();
    let lemma_bound = c * (second - expected).abs();
    let lemma_bound_operator = c * (hs - expected).abs();
    let approx_identity = match grid.group() {
        GroupModel::Affine => {
            let centre = GroupPoint::new(
                0.5 * (omega.lo[0] + omega.hi[0]),
                (0.5 * (omega.lo[1].ln() + omega.hi[1].ln())).exp(),
            );
            approximate_identity(grid, omega, s_tilde, trace_s, &centre)?
        }
        GroupModel::Cyclic { .. } => f64::NAN,
    };
    Ok(LocalizationReport {
        r,
        window: *omega,
        spectrum: eig,
        eig_min,
        eig_max,
        mu_r,
        mu_r_exact,
        trace,
        trace_s,
        count_above,
        ratio: if expected > 0.0 { count_above as f64 / expected } else { f64::NAN },
        second_moment: second,
        hs_norm_sq: hs,
        deviation,
        lemma_bound,
        lemma_bound_operator,
        lemma_holds: deviation <= lemma_bound + LEMMA_SLACK && deviation <= lemma_bound_operator + LEMMA_SLACK,
        approx_identity,
    })
}

/// `∫_Ω φ(z w⁻¹) dμ_r(z)` with `φ = S̃ / tr(S)` by quadrature over the nodes in `Ω`.
pub fn approximate_identity(
    grid: &Arc<HaarGrid>,
    omega: &WindowSpec,
    s_tilde: &GroupFunction,
    trace_s: f64,
    w: &GroupPoint,
) -> Result<f64> {
    let group = *grid.group();
    let winv = group.inverse(w)?;
    let s = kahan_sum(nodes_in(grid, omega).into_iter().map(|i| {
        let z = group.compose(&grid.node(i), &winv).expect("valid node");
        grid.weights_r()[i] * s_tilde.evaluate(&z).re
    }));
    Ok(s / trace_s)
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(QhaError::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// Tabulate `S̃` on an affine lattice grid for the counting experiment.
pub fn s_tilde_table(model: &RepresentationModel, s: &OperatorRep, cfg: &ScalingConfig) -> Result<GroupFunction> {
    let step = model
        .basis()
        .log_step()
        .ok_or(QhaError::Unsupported { op: "scaling experiment", backend: "cyclic" })?;
    let h = cfg.s_tilde_x_half_width;
    let nx = (2.0 * h / cfg.s_tilde_x_step).round() as usize;
    let grid = Arc::new(HaarGrid::affine_lattice(-h, h, nx, step, -cfg.s_tilde_m_max, cfg.s_tilde_m_max)?);
    s_tilde(model, s, &grid)
}

/// Grid covering `RΩ` plus the configured margin, with `ln a` nodes on the basis lattice.
pub fn scaling_grid(model: &RepresentationModel, window: &WindowSpec, cfg: &ScalingConfig) -> Result<HaarGrid> {
    let step = model
        .basis()
        .log_step()
        .ok_or(QhaError::Unsupported { op: "scaling experiment", backend: "cyclic" })?;
    let x0 = window.lo[0] - cfg.margin;
    let x1 = window.hi[0] + cfg.margin;
    let nx = ((x1 - x0) / cfg.x_step).round() as usize;
    let m0 = ((window.lo[1].ln() - cfg.margin) / step).floor() as i64;
    let m1 = ((window.hi[1].ln() + cfg.margin) / step).ceil() as i64;
    let na = (m1 - m0 + 1) as usize;
    for needed in [nx, na] {
        if needed > cfg.resolution_cap {
            return Err(QhaError::ResolutionCap { needed, cap: cfg.resolution_cap });
        }
    }
    HaarGrid::affine_lattice(x0, x1, nx, step, m0, m1)
}

/// Eigenvalue counting for `χ_{RΩ} ⋆ S` over a list of scales.
pub fn scaling_experiment(
    model: &RepresentationModel,
    omega: &WindowSpec,
    s: &OperatorRep,
    delta: f64,
    r_list: &[f64],
    cfg: &ScalingConfig,
) -> Result<Vec<LocalizationReport>> {
    if *model.group() != GroupModel::Affine {
        return Err(QhaError::Unsupported { op: "scaling experiment", backend: "cyclic" });
    }
    check_delta(delta)?;
    let adm = admissibility_report(s);
    if (adm.constant - 1.0).abs() > 1e-8 {
        return Err(QhaError::InvalidParameter(format!(
            "S is not a density operator: tr(D⁻¹SD⁻¹) = {}",
            adm.constant
        )));
    }
    s.require_positive(POSITIVITY_TOL)?;
    let table = s_tilde_table(model, s, cfg)?;
    r_list
        .iter()
        .map(|&r| {
            let window = scale_set(r, omega, &GroupModel::Affine)?;
            let grid = Arc::new(scaling_grid(model, &window, cfg)?);
            localization_report(model, &window, s, delta, &grid, &table, r)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct MinimaxReport {
    pub lambda_max: f64,
    /// Largest `Σ w f Q_S(ψ)` over the refined random starts.
    pub best_random: f64,
    /// `Σ w f Q_S(v)` at the top eigenvector.
    pub at_eigenvector: f64,
    /// Largest excess of any evaluated quotient over `λ_max`.
    pub max_excess: f64,
}

/// Top eigenvalue of `f ⋆ S` against `Σ w f Q_S(ψ)` over random unit vectors,
/// each refined by `power_steps` power iterations with `f ⋆ S`.
pub fn minimax_check(
    model: &RepresentationModel,
    f: &GroupFunction,
    s: &OperatorRep,
    starts: usize,
    power_steps: usize,
    seed: u64,
) -> Result<MinimaxReport> {
    let a = func_op_convolve(model, f, s)?;
    let spec = a.spectral_decomposition()?;
    let lambda_max = spec.values[0];
    let grid = f.grid();
    let quotient = |v: &Vector| -> Result<f64> {
        let q = cohen_map(model, s, v, v, grid)?;
        Ok(f.mul(&q.values)?.integral_r().re)
    };
    let at_eigenvector = quotient(&spec.vector(0))?;
    let mut r = rng(seed);
    let band = model.basis().interior_band();
    let mut best = f64::NEG_INFINITY;
    let mut max_excess = at_eigenvector - lambda_max;
    for _ in 0..starts {
        let mut v = random_vector(&mut r, model.dim(), band.clone());
        for _ in 0..power_steps {
            let w = a.apply(&v)?;
            let nw = norm(&w);
            if nw == 0.0 {
                break;
            }
            v = w / c64(nw, 0.0);
        }
        let nv = norm(&v);
        if nv == 0.0 {
            continue;
        }
        v /= c64(nv, 0.0);
        let q = quotient(&v)?;
        best = best.max(q);
        max_excess = max_excess.max(q - lambda_max);
    }
    Ok(MinimaxReport { lambda_max, best_random: best, at_eigenvector, max_excess })
}

/// Convex, nonnegative scalar functions used in Berezin-Lieb checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum ConvexFn {
    Identity,
    Square,
    /// `max(t - c, 0)`.
    ShiftedRelu(f64),
}

impl ConvexFn {
    pub fn eval(&self, t: f64) -> Option<f64> {
        match *self {
            // Nonnegative only on [0, ∞); allow rounding noise below zero.
            ConvexFn::Identity => (t >= -1e-9).then_some(t),
            ConvexFn::Square => Some(t * t),
            ConvexFn::ShiftedRelu(c) => Some((t - c).max(0.0)),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "identity" | "t" => Some(ConvexFn::Identity),
            "square" | "t2" => Some(ConvexFn::Square),
            other => other.strip_prefix("relu:").and_then(|c| c.parse().ok()).map(ConvexFn::ShiftedRelu),
        }
    }

    pub fn name(&self) -> String {
        match self {
            ConvexFn::Identity => "identity".into(),
            ConvexFn::Square => "t2".into(),
            ConvexFn::ShiftedRelu(c) => format!("relu:{c}"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BerezinLiebReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Relative slack on Berezin-Lieb comparisons.
pub const BEREZIN_LIEB_SLACK: f64 = 1e-8;

fn report(lhs: f64, rhs: f64) -> BerezinLiebReport {
    BerezinLiebReport { lhs, rhs, holds: lhs <= rhs + BEREZIN_LIEB_SLACK * rhs.abs() }
}

fn phi_checked(phi: ConvexFn, t: f64) -> Result<f64> {
    phi.eval(t).ok_or(QhaError::FunctionDomain(t))
}

/// `∫ Φ(T ⋆ S) dμ_r` against `tr(Φ(tr(S) T)) tr(D⁻¹SD⁻¹) / tr(S)`.
pub fn berezin_lieb_operator_side(
    model: &RepresentationModel,
    t: &OperatorRep,
    s: &OperatorRep,
    phi: ConvexFn,
    grid: &Arc<HaarGrid>,
) -> Result<BerezinLiebReport> {
    t.require_positive(POSITIVITY_TOL)?;
    let ts = op_op_convolve(model, t, s, grid)?;
    let mut lhs = NeumaierSum::new();
    for (v, w) in ts.values().iter().zip(grid.weights_r()) {
        lhs.add(w * phi_checked(phi, v.re)?);
    }
    let tr_s = s.trace().re;
    let c = admissibility_report(s).constant;
    let mapped = t.scale(c64(tr_s, 0.0)).functional_calculus(|x| phi.eval(x))?;
    Ok(report(lhs.value(), mapped.trace().re * c / tr_s))
}

/// `tr(Φ(f ⋆ S))` against `(tr S / tr(D⁻¹SD⁻¹)) ∫ Φ(tr(D⁻¹SD⁻¹) f) dμ_r`.
pub fn berezin_lieb_function_side(
    model: &RepresentationModel,
    f: &GroupFunction,
    s: &OperatorRep,
    phi: ConvexFn,
) -> Result<BerezinLiebReport> {
    if f.values().iter().any(|v| v.im != 0.0 || v.re < 0.0) {
        return Err(QhaError::InvalidParameter("f must be real and nonnegative".into()));
    }
    s.require_positive(POSITIVITY_TOL)?;
    let a = func_op_convolve(model, f, s)?;
    let lhs = a.functional_calculus(|x| phi.eval(x))?.trace().re;
    let tr_s = s.trace().re;
    let c = admissibility_report(s).constant;
    let mut acc = NeumaierSum::new();
    for (v, w) in f.values().iter().zip(f.grid().weights_r()) {
        acc.add(w * phi_checked(phi, c * v.re)?);
    }
    Ok(report(lhs, tr_s / c * acc.value()))
}
