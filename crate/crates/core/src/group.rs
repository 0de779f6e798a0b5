//! Group models, Haar measures, quadrature grids and functions on the group.
//!
//! Two backends share one interface:
//!
//! * `Affine`: the affine group `(x, a)`, `x ∈ ℝ`, `a > 0`, with product
//!   `(x, a)(y, b) = (x + a y, a b)`. The chart used by grids is `(x, ln a)`;
//!   right Haar measure is `dx d(ln a)` and the left Haar measure is
//!   `dx d(ln a) / a`, so the modular function is `Δ(x, a) = 1 / a`.
//! * `Cyclic`: the phase space `ℤ_N × ℤ_N` of the finite Weyl-Heisenberg model.
//!   It is abelian, `Δ ≡ 1`, and each lattice point carries Haar weight `1/N`.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{QhaError, Result};
use crate::numeric::{kahan_sum, kahan_sum_c, ComplexSum};

/// Relative tolerance for deciding whether a chart coordinate sits on a node or on a window edge.
pub const COORD_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Backend {
    Affine,
    Cyclic,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Affine => "affine",
            Backend::Cyclic => "cyclic",
        }
    }
}

/// A point of the group in natural coordinates: `(x, a)` for the affine group,
/// `(j, k)` (time shift, frequency shift) for the cyclic model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GroupPoint {
    pub c0: f64,
    pub c1: f64,
}

impl GroupPoint {
    pub const fn new(c0: f64, c1: f64) -> Self {
        Self { c0, c1 }
    }

    pub fn x(&self) -> f64 {
        self.c0
    }

    pub fn a(&self) -> f64 {
        self.c1
    }
}

/// Minimal interface a group model must provide to plug into the rest of the library.
pub trait LocallyCompactGroup {
    fn identity(&self) -> GroupPoint;
    fn compose(&self, g: &GroupPoint, h: &GroupPoint) -> Result<GroupPoint>;
    fn inverse(&self, g: &GroupPoint) -> Result<GroupPoint>;
    /// Modular function, `dμ_ℓ = Δ dμ_r`.
    fn modular(&self, g: &GroupPoint) -> Result<f64>;
    fn validate(&self, g: &GroupPoint) -> Result<()>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum GroupModel {
    Affine,
    Cyclic { n: usize },
}

impl GroupModel {
    pub fn cyclic(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(QhaError::InvalidParameter(format!("cyclic order must be >= 2, got {n}")));
        }
        Ok(GroupModel::Cyclic { n })
    }

    pub fn backend(&self) -> Backend {
        match self {
            GroupModel::Affine => Backend::Affine,
            GroupModel::Cyclic { .. } => Backend::Cyclic,
        }
    }

    /// Build a validated point; cyclic coordinates are reduced modulo `N`.
    pub fn point(&self, c0: f64, c1: f64) -> Result<GroupPoint> {
        match *self {
            GroupModel::Affine => {
                let p = GroupPoint::new(c0, c1);
                self.validate(&p)?;
                Ok(p)
            }
            GroupModel::Cyclic { n } => {
                let j = cyclic_index(c0, n).ok_or_else(|| {
                    QhaError::InvalidPoint(c0, c1, "cyclic coordinates must be integers".into())
                })?;
                let k = cyclic_index(c1, n).ok_or_else(|| {
                    QhaError::InvalidPoint(c0, c1, "cyclic coordinates must be integers".into())
                })?;
                Ok(GroupPoint::new(j as f64, k as f64))
            }
        }
    }

    /// Chart coordinates: `(x, ln a)` or `(j, k)`.
    pub fn chart(&self, g: &GroupPoint) -> [f64; 2] {
        match self {
            GroupModel::Affine => [g.c0, g.c1.ln()],
            GroupModel::Cyclic { .. } => [g.c0, g.c1],
        }
    }

    pub fn from_chart(&self, u: [f64; 2]) -> GroupPoint {
        match self {
            GroupModel::Affine => GroupPoint::new(u[0], u[1].exp()),
            GroupModel::Cyclic { .. } => GroupPoint::new(u[0], u[1]),
        }
    }

    /// Density of the right Haar measure with respect to `dx da` (affine) or
    /// counting measure (cyclic).
    pub fn right_haar_density(&self, g: &GroupPoint) -> Result<f64> {
        self.validate(g)?;
        Ok(match *self {
            GroupModel::Affine => 1.0 / g.c1,
            GroupModel::Cyclic { n } => 1.0 / n as f64,
        })
    }

    pub fn left_haar_density(&self, g: &GroupPoint) -> Result<f64> {
        self.validate(g)?;
        Ok(match *self {
            GroupModel::Affine => 1.0 / (g.c1 * g.c1),
            GroupModel::Cyclic { n } => 1.0 / n as f64,
        })
    }

    /// Scale map `Γ_R(x, a) = (R x, a^R)`.
    pub fn scale(&self, r: f64, g: &GroupPoint) -> Result<GroupPoint> {
        match self {
            GroupModel::Affine => {
                check_scale(r)?;
                self.validate(g)?;
                Ok(GroupPoint::new(r * g.c0, g.c1.powf(r)))
            }
            GroupModel::Cyclic { .. } => Err(unsupported("scale map", self.backend())),
        }
    }

    /// Metric `d((x, a), (y, b)) = |x - y| + |ln(a / b)|`.
    pub fn distance(&self, g: &GroupPoint, h: &GroupPoint) -> Result<f64> {
        match self {
            GroupModel::Affine => {
                self.validate(g)?;
                self.validate(h)?;
                Ok((g.c0 - h.c0).abs() + (g.c1 / h.c1).ln().abs())
            }
            GroupModel::Cyclic { .. } => Err(unsupported("metric", self.backend())),
        }
    }
}

impl LocallyCompactGroup for GroupModel {
    fn identity(&self) -> GroupPoint {
        match self {
            GroupModel::Affine => GroupPoint::new(0.0, 1.0),
            GroupModel::Cyclic { .. } => GroupPoint::new(0.0, 0.0),
        }
    }

    fn compose(&self, g: &GroupPoint, h: &GroupPoint) -> Result<GroupPoint> {
        self.validate(g)?;
        self.validate(h)?;
        Ok(match *self {
            GroupModel::Affine => GroupPoint::new(g.c0 + g.c1 * h.c0, g.c1 * h.c1),
            GroupModel::Cyclic { n } => GroupPoint::new(
                ((g.c0 as usize + h.c0 as usize) % n) as f64,
                ((g.c1 as usize + h.c1 as usize) % n) as f64,
            ),
        })
    }

    fn inverse(&self, g: &GroupPoint) -> Result<GroupPoint> {
        self.validate(g)?;
        Ok(match *self {
            GroupModel::Affine => GroupPoint::new(-g.c0 / g.c1, 1.0 / g.c1),
            GroupModel::Cyclic { n } => GroupPoint::new(
                ((n - g.c0 as usize) % n) as f64,
                ((n - g.c1 as usize) % n) as f64,
            ),
        })
    }

    fn modular(&self, g: &GroupPoint) -> Result<f64> {
        self.validate(g)?;
        Ok(match self {
            GroupModel::Affine => 1.0 / g.c1,
            GroupModel::Cyclic { .. } => 1.0,
        })
    }

    fn validate(&self, g: &GroupPoint) -> Result<()> {
        match *self {
            GroupModel::Affine => {
                if !g.c0.is_finite() || !g.c1.is_finite() {
                    return Err(QhaError::InvalidPoint(g.c0, g.c1, "non-finite coordinate".into()));
                }
                if g.c1 <= 0.0 {
                    return Err(QhaError::InvalidPoint(g.c0, g.c1, "dilation must be positive".into()));
                }
                Ok(())
            }
            GroupModel::Cyclic { n } => {
                let ok = |c: f64| c.fract() == 0.0 && c >= 0.0 && c < n as f64;
                if ok(g.c0) && ok(g.c1) {
                    Ok(())
                } else {
                    Err(QhaError::InvalidPoint(g.c0, g.c1, format!("not a reduced point of Z_{n} x Z_{n}")))
                }
            }
        }
    }
}

fn cyclic_index(c: f64, n: usize) -> Option<usize> {
    if !c.is_finite() {
        return None;
    }
    let r = c.round();
    if (c - r).abs() > COORD_TOL * r.abs().max(1.0) {
        return None;
    }
    Some((r as i64).rem_euclid(n as i64) as usize)
}

fn check_scale(r: f64) -> Result<()> {
    if r.is_finite() && r > 0.0 {
        Ok(())
    } else {
        Err(QhaError::InvalidParameter(format!("scale factor must be positive, got {r}")))
    }
}

pub(crate) fn unsupported(op: &'static str, backend: Backend) -> QhaError {
    QhaError::Unsupported { op, backend: backend.name() }
}

/// Axis-aligned box in natural coordinates: `[x0, x1) × [a0, a1)` for the
/// affine group, `[j0, j1) × [k0, k1)` of lattice indices for the cyclic model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WindowSpec {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl WindowSpec {
    pub fn affine(x0: f64, x1: f64, a0: f64, a1: f64) -> Self {
        Self { lo: [x0, a0], hi: [x1, a1] }
    }

    pub fn cyclic(j0: usize, j1: usize, k0: usize, k1: usize) -> Self {
        Self { lo: [j0 as f64, k0 as f64], hi: [j1 as f64, k1 as f64] }
    }

    pub fn cyclic_full(n: usize) -> Self {
        Self::cyclic(0, n, 0, n)
    }

    pub fn is_empty(&self) -> bool {
        self.hi[0] <= self.lo[0] || self.hi[1] <= self.lo[1]
    }

    pub fn validate(&self, group: &GroupModel) -> Result<()> {
        let all = [self.lo[0], self.lo[1], self.hi[0], self.hi[1]];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(QhaError::InvalidWindow("non-finite bound".into()));
        }
        match *group {
            GroupModel::Affine => {
                if self.lo[1] <= 0.0 || self.hi[1] <= 0.0 {
                    return Err(QhaError::InvalidWindow(format!(
                        "dilation bounds must be positive, got [{}, {})",
                        self.lo[1], self.hi[1]
                    )));
                }
            }
            GroupModel::Cyclic { n } => {
                for v in all {
                    if v.fract() != 0.0 || v < 0.0 || v > n as f64 {
                        return Err(QhaError::InvalidWindow(format!(
                            "cyclic bounds must be integers in [0, {n}], got {v}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Chart bounds (`ln a` for the dilation axis).
    pub fn chart_bounds(&self, group: &GroupModel) -> ([f64; 2], [f64; 2]) {
        match group {
            GroupModel::Affine => ([self.lo[0], self.lo[1].ln()], [self.hi[0], self.hi[1].ln()]),
            GroupModel::Cyclic { .. } => (self.lo, self.hi),
        }
    }

    /// Half-open membership test in chart coordinates, tolerant to rounding at the edges.
    pub fn contains(&self, group: &GroupModel, g: &GroupPoint) -> bool {
        let (lo, hi) = self.chart_bounds(group);
        let u = group.chart(g);
        (0..2).all(|d| {
            let tol = COORD_TOL * (hi[d] - lo[d]).abs().max(1.0);
            u[d] >= lo[d] - tol && u[d] < hi[d] - tol
        })
    }
}

/// Right Haar measure of a box.
pub fn right_haar_measure(window: &WindowSpec, group: &GroupModel) -> Result<f64> {
    window.validate(group)?;
    if window.is_empty() {
        return Ok(0.0);
    }
    Ok(match *group {
        GroupModel::Affine => (window.hi[0] - window.lo[0]) * (window.hi[1] / window.lo[1]).ln(),
        GroupModel::Cyclic { n } => {
            (window.hi[0] - window.lo[0]) * (window.hi[1] - window.lo[1]) / n as f64
        }
    })
}

/// Image of a box under the scale map `Γ_R`.
pub fn scale_set(r: f64, window: &WindowSpec, group: &GroupModel) -> Result<WindowSpec> {
    match group {
        GroupModel::Affine => {
            check_scale(r)?;
            window.validate(group)?;
            Ok(WindowSpec::affine(
                r * window.lo[0],
                r * window.hi[0],
                window.lo[1].powf(r),
                window.hi[1].powf(r),
            ))
        }
        GroupModel::Cyclic { .. } => Err(unsupported("scale map", group.backend())),
    }
}

/// Uniform axis in chart coordinates: nodes at `start + i * step`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl Axis {
    pub fn coord(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    /// Fractional node index of a chart coordinate.
    pub fn locate(&self, c: f64) -> f64 {
        (c - self.start) / self.step
    }
}

/// Quadrature grid for the right Haar measure.
///
/// Node `i` sits at axis indices `(i % len0, i / len0)`, so the first (x or j)
/// axis varies fastest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HaarGrid {
    group: GroupModel,
    window: WindowSpec,
    axes: [Axis; 2],
    weights_r: Vec<f64>,
    weights_l: Vec<f64>,
}

/// Midpoint grid over a box with the given number of cells per axis.
///
/// For the cyclic model the resolution must equal the number of lattice
/// points in the window.
pub fn build_grid(window: &WindowSpec, resolution: [usize; 2], group: &GroupModel) -> Result<HaarGrid> {
    window.validate(group)?;
    if window.is_empty() {
        return Err(QhaError::DegenerateGrid("window has zero extent".into()));
    }
    if resolution.iter().any(|&r| r < 2) {
        return Err(QhaError::DegenerateGrid(format!(
            "resolution must be at least 2 per axis, got {resolution:?}"
        )));
    }
    let (lo, hi) = window.chart_bounds(group);
    let axes = match group {
        GroupModel::Affine => {
            let mk = |d: usize| {
                let step = (hi[d] - lo[d]) / resolution[d] as f64;
                Axis { start: lo[d] + 0.5 * step, step, len: resolution[d] }
            };
            [mk(0), mk(1)]
        }
        GroupModel::Cyclic { .. } => {
            for d in 0..2 {
                let count = (hi[d] - lo[d]) as usize;
                if count != resolution[d] {
                    return Err(QhaError::DegenerateGrid(format!(
                        "cyclic window has {count} points on axis {d}, resolution {} requested",
                        resolution[d]
                    )));
                }
            }
            [
                Axis { start: lo[0], step: 1.0, len: resolution[0] },
                Axis { start: lo[1], step: 1.0, len: resolution[1] },
            ]
        }
    };
    HaarGrid::from_axes(*group, *window, axes)
}

impl HaarGrid {
    fn from_axes(group: GroupModel, window: WindowSpec, axes: [Axis; 2]) -> Result<Self> {
        let n = axes[0].len * axes[1].len;
        let cell = match group {
            GroupModel::Affine => axes[0].step * axes[1].step,
            GroupModel::Cyclic { n } => 1.0 / n as f64,
        };
        let weights_r = vec![cell; n];
        let weights_l = (0..n)
            .map(|i| {
                let i1 = i / axes[0].len;
                match group {
                    GroupModel::Affine => cell * (-axes[1].coord(i1)).exp(),
                    GroupModel::Cyclic { .. } => cell,
                }
            })
            .collect();
        Ok(Self { group, window, axes, weights_r, weights_l })
    }

    /// The full cyclic lattice `ℤ_N × ℤ_N`.
    pub fn cyclic_full(n: usize) -> Result<Self> {
        let g = GroupModel::cyclic(n)?;
        build_grid(&WindowSpec::cyclic_full(n), [n, n], &g)
    }

    /// Affine grid whose `ln a` nodes are the integer multiples `m · log_step`,
    /// `m0 <= m <= m1`, so every node dilation lies on a frequency lattice with
    /// that log spacing. The x axis is a midpoint grid on `[x0, x1]`.
    pub fn affine_lattice(x0: f64, x1: f64, x_res: usize, log_step: f64, m0: i64, m1: i64) -> Result<Self> {
        if !(log_step.is_finite() && log_step > 0.0) {
            return Err(QhaError::DegenerateGrid(format!("log step must be positive, got {log_step}")));
        }
        if x_res < 2 || m1 <= m0 {
            return Err(QhaError::DegenerateGrid(format!(
                "need at least two nodes per axis (x_res = {x_res}, m range {m0}..={m1})"
            )));
        }
        if !(x0.is_finite() && x1.is_finite() && x1 > x0) {
            return Err(QhaError::DegenerateGrid(format!("bad x range [{x0}, {x1}]")));
        }
        let window = WindowSpec::affine(
            x0,
            x1,
            ((m0 as f64 - 0.5) * log_step).exp(),
            ((m1 as f64 + 0.5) * log_step).exp(),
        );
        let hx = (x1 - x0) / x_res as f64;
        let axes = [
            Axis { start: x0 + 0.5 * hx, step: hx, len: x_res },
            Axis { start: m0 as f64 * log_step, step: log_step, len: (m1 - m0 + 1) as usize },
        ];
        Self::from_axes(GroupModel::Affine, window, axes)
    }

    /// Lattice grid covering a window: the dilation nodes are the lattice points
    /// nearest to the window edges.
    pub fn affine_lattice_covering(window: &WindowSpec, x_res: usize, log_step: f64) -> Result<Self> {
        window.validate(&GroupModel::Affine)?;
        if window.is_empty() {
            return Err(QhaError::DegenerateGrid("window has zero extent".into()));
        }
        let m0 = (window.lo[1].ln() / log_step).round() as i64;
        let m1 = (window.hi[1].ln() / log_step).round() as i64;
        Self::affine_lattice(window.lo[0], window.hi[0], x_res, log_step, m0, m1)
    }

    pub fn group(&self) -> &GroupModel {
        &self.group
    }

    pub fn window(&self) -> &WindowSpec {
        &self.window
    }

    pub fn axes(&self) -> &[Axis; 2] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.weights_r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights_r.is_empty()
    }

    pub fn split(&self, i: usize) -> (usize, usize) {
        (i % self.axes[0].len, i / self.axes[0].len)
    }

    pub fn index(&self, i0: usize, i1: usize) -> usize {
        i1 * self.axes[0].len + i0
    }

    pub fn chart(&self, i: usize) -> [f64; 2] {
        let (i0, i1) = self.split(i);
        [self.axes[0].coord(i0), self.axes[1].coord(i1)]
    }

    pub fn node(&self, i: usize) -> GroupPoint {
        self.group.from_chart(self.chart(i))
    }

    pub fn nodes(&self) -> impl Iterator<Item = GroupPoint> + '_ {
        (0..self.len()).map(|i| self.node(i))
    }

    pub fn weights_r(&self) -> &[f64] {
        &self.weights_r
    }

    pub fn weights_l(&self) -> &[f64] {
        &self.weights_l
    }

    pub fn total_r(&self) -> f64 {
        kahan_sum(self.weights_r.iter().copied())
    }

    /// Index of the node equal to `g`, if any.
    pub fn find_node(&self, g: &GroupPoint) -> Option<usize> {
        let u = self.group.chart(g);
        let mut idx = [0usize; 2];
        for d in 0..2 {
            let t = self.axes[d].locate(u[d]);
            let r = t.round();
            if (t - r).abs() > 1e-7 || r < 0.0 || r >= self.axes[d].len as f64 {
                return None;
            }
            idx[d] = r as usize;
        }
        Some(self.index(idx[0], idx[1]))
    }

    /// Quadrature measure of a window: summed right weights of the nodes it contains.
    pub fn window_measure(&self, window: &WindowSpec) -> f64 {
        kahan_sum(
            (0..self.len())
                .filter(|&i| window.contains(&self.group, &self.node(i)))
                .map(|i| self.weights_r[i]),
        )
    }

    /// True when `window` lies inside the grid's own window (up to rounding).
    pub fn covers(&self, window: &WindowSpec) -> bool {
        let (glo, ghi) = self.window.chart_bounds(&self.group);
        let (lo, hi) = window.chart_bounds(&self.group);
        (0..2).all(|d| {
            let tol = COORD_TOL * (ghi[d] - glo[d]).abs().max(1.0);
            lo[d] >= glo[d] - tol && hi[d] <= ghi[d] + tol
        })
    }

    /// Columnar text: a header line, then `c0 c1 weight_r weight_l` per node.
    /// Affine rows carry `x a`, cyclic rows `j k`.
    pub fn write_columns(&self, mut w: impl Write) -> Result<()> {
        let names = match self.group {
            GroupModel::Affine => "x a",
            GroupModel::Cyclic { .. } => "j k",
        };
        writeln!(w, "{names} weight_r weight_l")?;
        for i in 0..self.len() {
            let g = self.node(i);
            writeln!(w, "{:e} {:e} {:e} {:e}", g.c0, g.c1, self.weights_r[i], self.weights_l[i])?;
        }
        Ok(())
    }
}

/// Complex-valued function sampled on the nodes of a Haar grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupFunction {
    grid: Arc<HaarGrid>,
    values: Vec<Complex64>,
}

impl GroupFunction {
    pub fn new(grid: Arc<HaarGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(QhaError::Dimension { expected: grid.len(), found: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<HaarGrid>, f: impl Fn(&GroupPoint) -> Complex64 + Sync) -> Self {
        let values = (0..grid.len()).into_par_iter().map(|i| f(&grid.node(i))).collect();
        Self { grid, values }
    }

    pub fn from_real(grid: Arc<HaarGrid>, f: impl Fn(&GroupPoint) -> f64 + Sync) -> Self {
        Self::from_fn(grid, |g| Complex64::new(f(g), 0.0))
    }

    pub fn constant(grid: Arc<HaarGrid>, c: Complex64) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values }
    }

    /// Discrete point mass at the identity: value `1 / w` on the identity node.
    pub fn point_mass(grid: Arc<HaarGrid>) -> Result<Self> {
        let e = grid.group().identity();
        let i = grid.find_node(&e).ok_or_else(|| {
            QhaError::DegenerateGrid("identity is not a node of the grid".into())
        })?;
        let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
        values[i] = Complex64::new(1.0 / grid.weights_r()[i], 0.0);
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Arc<HaarGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn same_grid(&self, other: &GroupFunction) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    /// `∫ f dμ_r` by quadrature.
    pub fn integral_r(&self) -> Complex64 {
        kahan_sum_c(self.values.iter().zip(self.grid.weights_r()).map(|(v, w)| v * *w))
    }

    /// `∫ f dμ_ℓ` by quadrature.
    pub fn integral_l(&self) -> Complex64 {
        kahan_sum_c(self.values.iter().zip(self.grid.weights_l()).map(|(v, w)| v * *w))
    }

    /// `L^p(μ_r)` norm; `p = ∞` gives the sup norm.
    pub fn lp_norm_r(&self, p: f64) -> Result<f64> {
        if p.is_infinite() && p > 0.0 {
            return Ok(self.sup_norm());
        }
        if !(p >= 1.0) {
            return Err(QhaError::InvalidExponent(p));
        }
        let s = kahan_sum(self.values.iter().zip(self.grid.weights_r()).map(|(v, w)| w * v.norm().powf(p)));
        Ok(s.powf(1.0 / p))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| f(*v)).collect() }
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        self.map(|v| v * c)
    }

    pub fn add(&self, other: &GroupFunction) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(QhaError::GridMismatch);
        }
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn mul(&self, other: &GroupFunction) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(QhaError::GridMismatch);
        }
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        })
    }

    /// Value at an arbitrary group point.
    ///
    /// Affine: bilinear interpolation in `(x, ln a)`, treating nodes beyond the
    /// grid as zeros; this is exact at nodes. Cyclic: exact lattice lookup.
    pub fn evaluate(&self, g: &GroupPoint) -> Complex64 {
        let grid = &*self.grid;
        let u = grid.group.chart(g);
        match grid.group {
            GroupModel::Cyclic { n } => {
                let lookup = |d: usize| -> Option<usize> {
                    let c = cyclic_index(u[d], n)? as f64;
                    let t = grid.axes[d].locate(c);
                    let r = t.round();
                    (r >= 0.0 && r < grid.axes[d].len as f64).then_some(r as usize)
                };
                match (lookup(0), lookup(1)) {
                    (Some(i0), Some(i1)) => self.values[grid.index(i0, i1)],
                    _ => Complex64::new(0.0, 0.0),
                }
            }
            GroupModel::Affine => {
                let mut base = [0i64; 2];
                let mut frac = [0f64; 2];
                for d in 0..2 {
                    let t = grid.axes[d].locate(u[d]);
                    if !t.is_finite() {
                        return Complex64::new(0.0, 0.0);
                    }
                    let r = t.round();
                    let (b, f) = if (t - r).abs() <= 1e-9 { (r, 0.0) } else { (t.floor(), t - t.floor()) };
                    base[d] = b as i64;
                    frac[d] = f;
                }
                let at = |i0: i64, i1: i64| -> Complex64 {
                    if i0 < 0 || i1 < 0 || i0 >= grid.axes[0].len as i64 || i1 >= grid.axes[1].len as i64 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        self.values[grid.index(i0 as usize, i1 as usize)]
                    }
                };
                let mut acc = Complex64::new(0.0, 0.0);
                for (d0, w0) in [(0, 1.0 - frac[0]), (1, frac[0])] {
                    if w0 == 0.0 {
                        continue;
                    }
                    for (d1, w1) in [(0, 1.0 - frac[1]), (1, frac[1])] {
                        if w1 == 0.0 {
                            continue;
                        }
                        acc += at(base[0] + d0, base[1] + d1) * (w0 * w1);
                    }
                }
                acc
            }
        }
    }
}

/// Group convolution `(f * g)(x) = ∫ f(y) g(x y⁻¹) dμ_r(y)` evaluated on the nodes.
pub fn convolve_functions(f: &GroupFunction, g: &GroupFunction) -> Result<GroupFunction> {
    if !f.same_grid(g) {
        return Err(QhaError::GridMismatch);
    }
    let grid = f.grid.clone();
    let group = *grid.group();
    let support: Vec<(GroupPoint, Complex64)> = (0..grid.len())
        .filter(|&j| f.values[j] != Complex64::new(0.0, 0.0))
        .map(|j| {
            let y = grid.node(j);
            (group.inverse(&y).expect("grid nodes are valid"), f.values[j] * grid.weights_r()[j])
        })
        .collect();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.node(i);
            let mut acc = ComplexSum::new();
            for (yinv, fw) in &support {
                let z = group.compose(&x, yinv).expect("grid nodes are valid");
                acc.add(fw * g.evaluate(&z));
            }
            acc.value()
        })
        .collect();
    GroupFunction::new(grid, values)
}

/// `x ↦ ∫ f(y) g(y x) dμ_r(y)` evaluated on the nodes.
pub fn correlate_functions(f: &GroupFunction, g: &GroupFunction) -> Result<GroupFunction> {
    if !f.same_grid(g) {
        return Err(QhaError::GridMismatch);
    }
    let grid = f.grid.clone();
    let group = *grid.group();
    let support: Vec<(GroupPoint, Complex64)> = (0..grid.len())
        .filter(|&j| f.values[j] != Complex64::new(0.0, 0.0))
        .map(|j| (grid.node(j), f.values[j] * grid.weights_r()[j]))
        .collect();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.node(i);
            let mut acc = ComplexSum::new();
            for (y, fw) in &support {
                let z = group.compose(y, &x).expect("grid nodes are valid");
                acc.add(fw * g.evaluate(&z));
            }
            acc.value()
        })
        .collect();
    GroupFunction::new(grid, values)
}

/// Indicator of a box sampled on the grid (half-open membership).
pub fn indicator(window: &WindowSpec, grid: Arc<HaarGrid>) -> Result<GroupFunction> {
    window.validate(grid.group())?;
    let group = *grid.group();
    Ok(GroupFunction::from_real(grid, move |g| if window.contains(&group, g) { 1.0 } else { 0.0 }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_group_laws() {
        let g = GroupModel::Affine;
        let p = g.point(0.3, 2.0).unwrap();
        let q = g.point(-1.2, 0.5).unwrap();
        let pq = g.compose(&p, &q).unwrap();
        assert_eq!(pq, GroupPoint::new(0.3 + 2.0 * -1.2, 1.0));
        let e = g.compose(&p, &g.inverse(&p).unwrap()).unwrap();
        assert!((e.c0).abs() < 1e-15 && (e.c1 - 1.0).abs() < 1e-15);
        assert_eq!(g.modular(&p).unwrap(), 0.5);
        assert!(g.point(1.0, 0.0).is_err());
        assert!(g.point(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn cyclic_reduction() {
        let g = GroupModel::cyclic(8).unwrap();
        let p = g.point(-1.0, 9.0).unwrap();
        assert_eq!(p, GroupPoint::new(7.0, 1.0));
        assert!(g.point(0.5, 1.0).is_err());
        assert_eq!(g.inverse(&p).unwrap(), GroupPoint::new(1.0, 7.0));
    }

    #[test]
    fn unit_window_quadrature_is_exact() {
        let w = WindowSpec::affine(0.0, 1.0, 1.0, std::f64::consts::E);
        let grid = build_grid(&w, [64, 64], &GroupModel::Affine).unwrap();
        assert!((grid.total_r() - 1.0).abs() < 1e-12);
        assert!((right_haar_measure(&w, &GroupModel::Affine).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_inputs_error() {
        let g = GroupModel::Affine;
        let w = WindowSpec::affine(0.0, 1.0, 1.0, 2.0);
        assert!(matches!(build_grid(&w, [1, 4], &g), Err(QhaError::DegenerateGrid(_))));
        let bad = WindowSpec::affine(0.0, 1.0, -1.0, 2.0);
        assert!(matches!(build_grid(&bad, [4, 4], &g), Err(QhaError::InvalidWindow(_))));
        assert!(matches!(scale_set(2.0, &w, &GroupModel::cyclic(4).unwrap()), Err(QhaError::Unsupported { .. })));
        assert_eq!(right_haar_measure(&WindowSpec::affine(1.0, 1.0, 1.0, 2.0), &g).unwrap(), 0.0);
    }

    #[test]
    fn lattice_grid_contains_identity() {
        let grid = HaarGrid::affine_lattice(-1.0, 1.0, 16, 0.1, -5, 5).unwrap();
        let i = grid.find_node(&GroupPoint::new(0.0625, 1.0)).unwrap();
        assert_eq!(grid.node(i).a(), 1.0);
    }

    #[test]
    fn interpolation_is_exact_at_nodes() {
        let grid = Arc::new(HaarGrid::affine_lattice(-1.0, 1.0, 8, 0.1, -3, 3).unwrap());
        let f = GroupFunction::from_real(grid.clone(), |g| g.x() * g.x() + g.a());
        for i in 0..grid.len() {
            let v = f.evaluate(&grid.node(i));
            assert!((v - f.values()[i]).norm() < 1e-12);
        }
        assert_eq!(f.evaluate(&GroupPoint::new(5.0, 1.0)), Complex64::new(0.0, 0.0));
    }
}
