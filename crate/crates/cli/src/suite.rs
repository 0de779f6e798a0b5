//! The invariant checklist run by `qha suite`.
//!
//! Every check draws from its own random stream, so skipping one leaves the
//! others unchanged. Tolerances are per backend and multiplied by
//! `suite.tolerance_scale`.

use qha::cohen::{cohen_map, positive_expansion, uncertainty_check};
use qha::convolution::{
    admissibility_report, func_op_convolve, make_density_operator, op_op_convolve, quantize,
};
use qha::group::{convolve_functions, correlate_functions, right_haar_measure, scale_set, GroupFunction, WindowSpec};
use qha::localization::{
    berezin_lieb_function_side, berezin_lieb_operator_side, localization_operator, localization_report,
    minimax_check, s_tilde, ConvexFn,
};
use qha::numeric::ComplexSum;
use qha::operator::{inner, norm, OperatorRep, Vector};
use qha::representation::apply_duflo_inv;
use qha::signals::{cyclic_gaussian, log_gaussian, normalized};
use qha::wavelet::{op_wavelet_transform, op_window_transform, operator_moyal_rhs, vector_moyal_rhs};
use qha::{Backend, DufloMoore, GroupModel, GroupPoint, LocallyCompactGroup, C64};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::commands::{rel, Outcome};
use crate::config::{Config, ConfigError};
use crate::output::{num, Table};
use crate::setup::Setup;
use crate::CliError;

type Res = Result<Option<(f64, f64)>, CliError>;

struct Ctx {
    s: Setup,
}

impl Ctx {
    fn affine(&self) -> bool {
        self.s.backend == Backend::Affine
    }

    fn tol(&self, affine: f64, cyclic: f64) -> f64 {
        if self.affine() {
            affine
        } else {
            cyclic
        }
    }

    fn group(&self) -> GroupModel {
        *self.s.model.group()
    }

    /// Random group element: `x ∈ [-1, 1]` and a lattice dilation with `|m| ≤ 8`, or any cyclic point.
    fn point(&self, r: &mut ChaCha8Rng) -> GroupPoint {
        match self.group() {
            GroupModel::Affine => {
                let step = self.s.basis().log_step().expect("affine");
                GroupPoint::new(r.gen_range(-1.0..1.0), (r.gen_range(-8i64..=8) as f64 * step).exp())
            }
            GroupModel::Cyclic { n } => GroupPoint::new(r.gen_range(0..n) as f64, r.gen_range(0..n) as f64),
        }
    }

    fn gap(&self, g: &GroupPoint, h: &GroupPoint) -> f64 {
        let (a, b) = (self.group().chart(g), self.group().chart(h));
        (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
    }

    /// Window well inside the grid.
    fn omega(&self, k: usize) -> WindowSpec {
        match self.group() {
            GroupModel::Affine => {
                let h = 0.6 + 0.3 * k as f64;
                WindowSpec::affine(-h, h, (-0.5 * h).exp(), (0.5 * h).exp())
            }
            GroupModel::Cyclic { n } => WindowSpec::cyclic(0, n / 4 + 3 * k, 0, n / 3 + 2 * k),
        }
    }

    /// Nodes used for sup-norm comparisons; the affine edge loses mass to truncation.
    fn interior(&self, i: usize) -> bool {
        match self.group() {
            GroupModel::Affine => {
                let g = self.s.grid.node(i);
                g.x().abs() < 2.0 && g.a().ln().abs() < 1.0
            }
            GroupModel::Cyclic { .. } => true,
        }
    }

    fn sup_gap(&self, lhs: &GroupFunction, rhs: &GroupFunction) -> f64 {
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for i in (0..lhs.values().len()).filter(|&i| self.interior(i)) {
            num = num.max((lhs.values()[i] - rhs.values()[i]).norm());
            den = den.max(lhs.values()[i].norm());
        }
        num / den.max(1e-300)
    }
}

fn op_gap(a: &OperatorRep, b: &OperatorRep) -> f64 {
    a.sub(b).expect("same basis").frobenius_norm() / b.frobenius_norm().max(1e-300)
}

fn vec_gap(a: &Vector, b: &Vector) -> f64 {
    norm(&(a - b)) / norm(b).max(1e-300)
}

/// Smooth test function evaluated anywhere on the group (affine) or a fixed table (cyclic).
fn analytic(ctx: &Ctx, r: &mut ChaCha8Rng) -> impl Fn(&GroupPoint) -> f64 {
    let (x0, l0) = (r.gen_range(-0.3..0.3), r.gen_range(-0.2..0.2));
    let table: Vec<f64> = match ctx.group() {
        GroupModel::Cyclic { n } => (0..n * n).map(|_| r.gen_range(0.0..1.0)).collect(),
        GroupModel::Affine => Vec::new(),
    };
    let group = ctx.group();
    move |g: &GroupPoint| match group {
        GroupModel::Affine => {
            let (u, v) = ((g.x() - x0) / 0.4, (g.a().ln() - l0) / 0.25);
            (-(u * u + v * v) / 2.0).exp()
        }
        GroupModel::Cyclic { n } => table[g.c0 as usize * n + g.c1 as usize],
    }
}

fn associativity(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let g = ctx.group();
    let mut worst = 0.0f64;
    for _ in 0..32 {
        let (a, b, c) = (ctx.point(r), ctx.point(r), ctx.point(r));
        let lhs = g.compose(&g.compose(&a, &b)?, &c)?;
        let rhs = g.compose(&a, &g.compose(&b, &c)?)?;
        worst = worst.max(ctx.gap(&lhs, &rhs));
        worst = worst.max(ctx.gap(&g.compose(&a, &g.inverse(&a)?)?, &g.identity()));
        worst = worst.max(ctx.gap(&g.compose(&g.identity(), &a)?, &a));
    }
    Ok(Some((worst, ctx.tol(1e-12, 0.0))))
}

fn right_invariance(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let f = analytic(ctx, r);
    let grid = &ctx.s.grid;
    let g = ctx.group();
    let base: f64 = (0..grid.len()).map(|i| grid.weights_r()[i] * f(&grid.node(i))).sum();
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let y = ctx.point(r);
        let moved: f64 = (0..grid.len())
            .map(|i| grid.weights_r()[i] * f(&g.compose(&grid.node(i), &y).expect("valid")))
            .sum();
        worst = worst.max((moved - base).abs() / base);
    }
    Ok(Some((worst, ctx.tol(1e-6, 1e-13))))
}

fn left_invariance(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let f = analytic(ctx, r);
    let grid = &ctx.s.grid;
    let g = ctx.group();
    let base: f64 = (0..grid.len()).map(|i| grid.weights_l()[i] * f(&grid.node(i))).sum();
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let y = ctx.point(r);
        let moved: f64 = (0..grid.len())
            .map(|i| grid.weights_l()[i] * f(&g.compose(&y, &grid.node(i)).expect("valid")))
            .sum();
        worst = worst.max((moved - base).abs() / base);
    }
    Ok(Some((worst, ctx.tol(1e-6, 1e-13))))
}

fn modular(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let g = ctx.group();
    let mut worst = 0.0f64;
    for _ in 0..32 {
        let (a, b) = (ctx.point(r), ctx.point(r));
        let hom = g.modular(&g.compose(&a, &b)?)? - g.modular(&a)? * g.modular(&b)?;
        let ratio = g.left_haar_density(&a)? / g.right_haar_density(&a)? - g.modular(&a)?;
        worst = worst.max(hom.abs()).max(ratio.abs() / g.modular(&a)?);
    }
    Ok(Some((worst, ctx.tol(1e-12, 0.0))))
}

fn metric(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    if !ctx.affine() {
        return Ok(None);
    }
    let g = ctx.group();
    let mut worst = 0.0f64;
    for _ in 0..32 {
        let (a, b, c) = (ctx.point(r), ctx.point(r), ctx.point(r));
        let (ab, bc, ac) = (g.distance(&a, &b)?, g.distance(&b, &c)?, g.distance(&a, &c)?);
        worst = worst.max(ac - ab - bc).max((ab - g.distance(&b, &a)?).abs()).max(g.distance(&a, &a)?);
    }
    Ok(Some((worst, 1e-12)))
}

fn scale_measure(ctx: &Ctx, _: &mut ChaCha8Rng) -> Res {
    if !ctx.affine() {
        return Ok(None);
    }
    let g = ctx.group();
    let omega = ctx.omega(0);
    let base = right_haar_measure(&omega, &g)?;
    let mut worst = 0.0f64;
    for rr in [0.5, 2.0, 3.0, 8.0] {
        let scaled = right_haar_measure(&scale_set(rr, &omega, &g)?, &g)?;
        worst = worst.max((scaled - rr * rr * base).abs() / (rr * rr * base));
    }
    Ok(Some((worst, 1e-12)))
}

fn projective(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let (m, g) = (&ctx.s.model, ctx.group());
    let mut worst = 0.0f64;
    for _ in 0..8 {
        let (x, y, psi) = (ctx.point(r), ctx.point(r), ctx.s.vector(r));
        let u = m.apply(&x, &m.apply(&y, &psi)?)?;
        let v = m.apply(&g.compose(&x, &y)?, &psi)?;
        let lambda = inner(&u, &v) / inner(&v, &v);
        let resid = norm(&(&u - &v * lambda)) / norm(&v);
        worst = worst.max(resid).max((lambda.norm() - 1.0).abs());
    }
    Ok(Some((worst, 1e-12)))
}

fn unitarity(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let m = &ctx.s.model;
    let mut worst = 0.0f64;
    for _ in 0..8 {
        let (x, psi) = (ctx.point(r), ctx.s.vector(r));
        let n0 = norm(&psi);
        worst = worst.max((norm(&m.apply(&x, &psi)?) - n0).abs() / n0);
        worst = worst.max(vec_gap(&m.apply_adjoint(&x, &m.apply(&x, &psi)?)?, &psi));
    }
    Ok(Some((worst, 1e-12)))
}

fn dm_covariance(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let (m, g) = (&ctx.s.model, ctx.group());
    let dm = DufloMoore::new(ctx.s.basis().clone());
    let mut worst = 0.0f64;
    for _ in 0..8 {
        let (x, psi) = (ctx.point(r), ctx.s.vector(r));
        let lhs = m.apply(&x, &dm.apply(&m.apply_adjoint(&x, &psi)?))?;
        let rhs = dm.apply(&psi) * C64::new(g.modular(&x)?.powf(-0.5), 0.0);
        worst = worst.max(vec_gap(&lhs, &rhs));
    }
    Ok(Some((worst, 1e-12)))
}

fn orthogonality(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let (m, grid) = (&ctx.s.model, &ctx.s.grid);
    let dm = DufloMoore::new(ctx.s.basis().clone());
    let mut worst = 0.0f64;
    for _ in 0..2 {
        let v: Vec<Vector> = (0..4).map(|_| ctx.s.vector(r)).collect();
        let mut acc = ComplexSum::new();
        for i in 0..grid.len() {
            let g = grid.node(i);
            let a = inner(&v[0], &m.apply_adjoint(&g, &v[2])?);
            let b = inner(&v[1], &m.apply_adjoint(&g, &v[3])?);
            acc.add(a * b.conj() * grid.weights_r()[i]);
        }
        let rhs = inner(&v[0], &v[1]) * inner(&dm.apply_inv(&v[2]), &dm.apply_inv(&v[3])).conj();
        worst = worst.max(rel(acc.value(), rhs));
    }
    Ok(Some((worst, ctx.tol(2e-2, 1e-9))))
}

fn trace_cyclicity(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let mut worst = 0.0f64;
    for _ in 0..4 {
        let (a, b) = (ctx.s.operator(r, 3), ctx.s.operator(r, 3));
        worst = worst.max(rel(a.compose(&b)?.trace(), b.compose(&a)?.trace()));
    }
    Ok(Some((worst, 1e-12)))
}

fn duality(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let mut worst = 0.0f64;
    for _ in 0..4 {
        let (a, b) = (ctx.s.operator(r, 3), ctx.s.operator(r, 2));
        let t = a.compose(&b)?.trace().norm();
        for (p, q) in [(1.0, f64::INFINITY), (2.0, 2.0), (f64::INFINITY, 1.0), (1.5, 3.0)] {
            let np = if p.is_infinite() { a.operator_norm() } else { a.schatten_norm(p)? };
            let nq = if q.is_infinite() { b.operator_norm() } else { b.schatten_norm(q)? };
            worst = worst.max(t / (np * nq));
        }
        let (n1, n2, ni) = (a.schatten_norm(1.0)?, a.schatten_norm(2.0)?, a.operator_norm());
        worst = worst.max(n2 / n1).max(ni / n2);
    }
    Ok(Some((worst, 1.0 + 1e-12)))
}

fn functional_calculus(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let a = ctx.s.operator(r, 3).hermitian_part();
        let sq = a.functional_calculus(|t| Some(t * t))?;
        worst = worst.max(op_gap(&sq, &a.compose(&a)?));
        let id = a.functional_calculus(Some)?;
        worst = worst.max(op_gap(&id, &a));
    }
    Ok(Some((worst, 1e-10)))
}

fn binary_roundtrip(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let a = ctx.s.operator(r, 2);
    let mut buf = Vec::new();
    a.write_binary(&mut buf)?;
    let b = OperatorRep::read_binary(ctx.s.basis().clone(), buf.as_slice())?;
    Ok(Some((a.sub(&b)?.matrix().camax(), 0.0)))
}

fn trace_identity(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let mut worst = 0.0f64;
    for _ in 0..2 {
        let f = ctx.s.function(r);
        let s = ctx.s.operator(r, 3);
        let lhs = func_op_convolve(&ctx.s.model, &f, &s)?.trace();
        worst = worst.max(rel(lhs, s.trace() * f.integral_r()));
    }
    Ok(Some((worst, ctx.tol(1e-6, 1e-12))))
}

fn compat_operator(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let (m, grid) = (&ctx.s.model, &ctx.s.grid);
    let f = ctx.s.function(r);
    let (t, s) = (ctx.s.density(r, 2), ctx.s.operator(r, 2));
    let lhs = op_op_convolve(m, &func_op_convolve(m, &f, &t)?, &s, grid)?;
    let rhs = convolve_functions(&f, &op_op_convolve(m, &t, &s, grid)?)?;
    Ok(Some((ctx.sup_gap(&lhs, &rhs), ctx.tol(2e-2, 1e-10))))
}

fn compat_function(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let m = &ctx.s.model;
    let (f, g) = (ctx.s.function(r), ctx.s.function(r));
    let t = ctx.s.density(r, 2);
    let a = func_op_convolve(m, &f, &func_op_convolve(m, &g, &t)?)?;
    let b = func_op_convolve(m, &convolve_functions(&f, &g)?, &t)?;
    Ok(Some((op_gap(&b, &a), ctx.tol(2e-2, 1e-10))))
}

fn adjointness(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let (m, grid) = (&ctx.s.model, &ctx.s.grid);
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let f = ctx.s.function(r);
        let (s, t) = (ctx.s.operator(r, 2), ctx.s.operator(r, 2));
        let lhs = t.compose(&func_op_convolve(m, &f, &s)?)?.trace();
        let rhs = f.mul(&op_op_convolve(m, &t, &s, grid)?)?.integral_r();
        worst = worst.max(rel(lhs, rhs));
    }
    Ok(Some((worst, 1e-9)))
}

fn lp_norm(f: &GroupFunction, p: f64) -> Result<f64, CliError> {
    Ok(if p.is_infinite() { f.sup_norm() } else { f.lp_norm_r(p)? })
}

fn schatten(a: &OperatorRep, p: f64) -> Result<f64, CliError> {
    Ok(if p.is_infinite() { a.operator_norm() } else { a.schatten_norm(p)? })
}

const EXPONENTS: [(f64, f64); 3] = [(1.0, f64::INFINITY), (2.0, 2.0), (f64::INFINITY, 1.0)];

fn young_function_operator(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let m = &ctx.s.model;
    let mut worst = 0.0f64;
    for _ in 0..2 {
        let f = ctx.s.function(r);
        let s = ctx.s.operator(r, 2);
        let a = func_op_convolve(m, &f, &s)?;
        let (s1, d1) = (s.schatten_norm(1.0)?, apply_duflo_inv(&s).schatten_norm(1.0)?);
        for (p, q) in EXPONENTS {
            let bound = lp_norm(&f, p)? * s1.powf(1.0 / p) * d1.powf(1.0 / q);
            worst = worst.max(schatten(&a, p)? / bound);
        }
    }
    Ok(Some((worst, ctx.tol(1.0 + 1e-2, 1.0 + 1e-12))))
}

fn young_operator_operator(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let (m, grid) = (&ctx.s.model, &ctx.s.grid);
    let mut worst = 0.0f64;
    for _ in 0..2 {
        let (t, s) = (ctx.s.operator(r, 2), ctx.s.operator(r, 2));
        let f = op_op_convolve(m, &t, &s, grid)?;
        let (s1, d1) = (s.schatten_norm(1.0)?, apply_duflo_inv(&s).schatten_norm(1.0)?);
        for (p, q) in EXPONENTS {
            let bound = schatten(&t, p)? * s1.powf(1.0 / q) * d1.powf(1.0 / p);
            worst = worst.max(lp_norm(&f, p)? / bound);
        }
    }
    Ok(Some((worst, ctx.tol(1.0 + 1e-2, 1.0 + 1e-12))))
}

fn right_integral(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let mut worst = 0.0f64;
    for _ in 0..2 {
        let (t, s) = (ctx.s.operator(r, 2), ctx.s.operator(r, 3));
        let lhs = op_op_convolve(&ctx.s.model, &t, &s, &ctx.s.grid)?.integral_r();
        let adm = admissibility_report(&s);
        worst = worst.max(rel(lhs, t.trace() * C64::new(adm.constant, adm.constant_imag)));
    }
    Ok(Some((worst, ctx.tol(2e-2, 1e-10))))
}

fn left_integral(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let mut worst = 0.0f64;
    for _ in 0..2 {
        let (t, s) = (ctx.s.operator(r, 2), ctx.s.operator(r, 3));
        let lhs = op_op_convolve(&ctx.s.model, &t, &s, &ctx.s.grid)?.integral_l();
        worst = worst.max(rel(lhs, s.trace() * apply_duflo_inv(&t).trace()));
    }
    Ok(Some((worst, ctx.tol(2e-2, 1e-10))))
}

fn resolution_identity(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let (m, grid) = (&ctx.s.model, &ctx.s.grid);
    let one = GroupFunction::constant(grid.clone(), C64::new(1.0, 0.0));
    if !ctx.affine() {
        let t = ctx.s.operator(r, 3);
        let want = OperatorRep::identity(ctx.s.basis().clone()).scale(t.trace());
        let q = quantize(m, &one, &t)?;
        return Ok(Some((q.sub(&want)?.matrix().camax() / t.trace().norm(), 1e-10)));
    }
    let t = ctx.s.density(r, 3);
    let q = quantize(m, &one, &t)?;
    let atoms: Vec<Vector> = (0..8).map(|_| ctx.s.vector(r)).collect();
    let (mut num, mut den) = (0.0, 0.0);
    for u in &atoms {
        let qu = q.apply(u)?;
        for v in &atoms {
            let want = t.trace() * inner(u, v);
            num += (inner(&qu, v) - want).norm_sqr();
            den += want.norm_sqr();
        }
    }
    Ok(Some(((num / den).sqrt(), 5e-2)))
}

/// `Q_S(ψ, φ)(g)` at an arbitrary group element.
fn q_at(ctx: &Ctx, s: &OperatorRep, psi: &Vector, phi: &Vector, g: &GroupPoint) -> Result<C64, CliError> {
    let m = &ctx.s.model;
    Ok(inner(&s.apply(&m.apply(g, psi)?)?, &m.apply(g, phi)?))
}

fn interior_nodes(ctx: &Ctx, r: &mut ChaCha8Rng, k: usize) -> Vec<usize> {
    let n = ctx.s.grid.len();
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let i = r.gen_range(0..n);
        if ctx.interior(i) {
            out.push(i);
        }
    }
    out
}

fn cohen_covariance(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let (m, grid, g) = (&ctx.s.model, &ctx.s.grid, ctx.group());
    let s = ctx.s.operator(r, 2);
    let (psi, phi) = (ctx.s.vector(r), ctx.s.vector(r));
    let y = ctx.point(r);
    let moved = cohen_map(m, &s, &m.apply(&y, &psi)?, &m.apply(&y, &phi)?, grid)?;
    let mut worst = 0.0f64;
    for i in interior_nodes(ctx, r, 48) {
        let want = q_at(ctx, &s, &psi, &phi, &g.compose(&grid.node(i), &y)?)?;
        worst = worst.max((moved.values.values()[i] - want).norm() / want.norm().max(1e-12));
    }
    Ok(Some((worst, 1e-10)))
}

fn cohen_reality_positivity(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let s = ctx.s.density(r, 3);
    let psi = ctx.s.vector(r);
    let q = cohen_map(&ctx.s.model, &s, &psi, &psi, &ctx.s.grid)?;
    let top = q.values.sup_norm();
    let worst = q.values.values().iter().map(|v| v.im.abs().max(-v.re)).fold(0.0, f64::max);
    Ok(Some((worst / top, 1e-12)))
}

fn cohen_linearity(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let (m, grid) = (&ctx.s.model, &ctx.s.grid);
    let (s, t) = (ctx.s.operator(r, 2), ctx.s.operator(r, 2));
    let (a, b) = (C64::new(r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)), C64::new(r.gen_range(-2.0..2.0), 0.5));
    let (psi, phi) = (ctx.s.vector(r), ctx.s.vector(r));
    let lhs = cohen_map(m, &s.scale(a).add(&t.scale(b))?, &psi, &phi, grid)?.values;
    let rhs = cohen_map(m, &s, &psi, &phi, grid)?.values.scaled(a).add(&cohen_map(m, &t, &psi, &phi, grid)?.values.scaled(b))?;
    let gap = lhs.values().iter().zip(rhs.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    Ok(Some((gap / rhs.sup_norm(), 1e-12)))
}

fn cohen_expansion(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let s = ctx.s.density(r, 3);
    let psi = ctx.s.vector(r);
    let (sum, _) = positive_expansion(&ctx.s.model, &s, &psi, &ctx.s.grid)?;
    let q = cohen_map(&ctx.s.model, &s, &psi, &psi, &ctx.s.grid)?;
    let gap = sum.values.values().iter().zip(q.values.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    Ok(Some((gap / q.values.sup_norm(), 1e-10)))
}

fn cohen_of_convolution(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let (m, grid) = (&ctx.s.model, &ctx.s.grid);
    let f = ctx.s.function(r);
    let s = ctx.s.operator(r, 2);
    let (psi, phi) = (ctx.s.vector(r), ctx.s.vector(r));
    let lhs = cohen_map(m, &func_op_convolve(m, &f, &s)?, &psi, &phi, grid)?.values;
    let rhs = correlate_functions(&f, &cohen_map(m, &s, &psi, &phi, grid)?.values)?;
    Ok(Some((ctx.sup_gap(&lhs, &rhs), ctx.tol(5e-2, 1e-10))))
}

fn uncertainty(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let s = ctx.s.density(r, 1);
    let psi = match ctx.group() {
        GroupModel::Affine => normalized(&log_gaussian(ctx.s.basis(), 1.3, 0.25, 0.0)?)?,
        GroupModel::Cyclic { n } => normalized(&cyclic_gaussian(n, 5.0, 2.0, 3.0))?,
    };
    let mut worst = f64::NEG_INFINITY;
    for k in 0..4 {
        let rep = uncertainty_check(&ctx.s.model, &s, &psi, &ctx.omega(k), &ctx.s.grid)?;
        worst = worst.max(1.0 - rep.epsilon - rep.mu_r);
    }
    Ok(Some((worst, 1e-6)))
}

fn eigen_bounds(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let mut worst = f64::NEG_INFINITY;
    for k in 0..2 {
        let s = ctx.s.density(r, 2);
        let ev = localization_operator(&ctx.s.model, &ctx.omega(k), &s, &ctx.s.grid)?.eigenvalues()?;
        worst = worst.max(-ev[ev.len() - 1]).max(ev[0] - 1.0);
    }
    Ok(Some((worst, 1e-8)))
}

fn minimax(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let f = ctx.s.function(r);
    let s = ctx.s.density(r, 2);
    let seed = r.gen();
    let rep = minimax_check(&ctx.s.model, &f, &s, 3, 4, seed)?;
    let scale = rep.lambda_max.abs().max(1e-300);
    let worst = (rep.max_excess / scale).max((rep.at_eigenvector - rep.lambda_max).abs() / scale);
    Ok(Some((worst, 1e-9)))
}

fn counting_lemma(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let s = ctx.s.density(r, 2);
    let table = s_tilde(&ctx.s.model, &s, &ctx.s.grid)?;
    let mut worst = f64::NEG_INFINITY;
    for delta in [0.25, 0.5, 0.75] {
        let rep = localization_report(&ctx.s.model, &ctx.omega(1), &s, delta, &ctx.s.grid, &table, 1.0)?;
        worst = worst.max(rep.deviation - rep.lemma_bound.min(rep.lemma_bound_operator));
    }
    Ok(Some((worst, 1e-6)))
}

fn density_construction(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let vs: Vec<Vector> = (0..3).map(|_| ctx.s.vector(r)).collect();
    let ws = [0.5, 0.3, 0.2];
    let d = make_density_operator(ctx.s.basis().clone(), &vs, &ws)?;
    let adm = admissibility_report(&d.operator);
    let want: f64 = vs.iter().zip(ws).map(|(v, w)| w * norm(v).powi(2)).sum::<f64>() * d.scale;
    let low = d.operator.min_eigenvalue()? / d.operator.operator_norm();
    let worst = (adm.constant - 1.0).abs().max((d.trace - want).abs() / want).max(-low);
    Ok(Some((worst, 1e-12)))
}

fn berezin_lieb(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let s = ctx.s.density(r, 2);
    let t = ctx.s.density(r, 3);
    let top = t.eigenvalues()?[0];
    let t = t.scale(C64::new(r.gen_range(0.8..2.5) / (top * s.trace().re), 0.0));
    let f = ctx.s.function(r).scaled(C64::new(r.gen_range(0.5..2.0), 0.0));
    let mut worst = f64::NEG_INFINITY;
    for phi in [ConvexFn::Square, ConvexFn::ShiftedRelu(0.5)] {
        for rep in [
            berezin_lieb_operator_side(&ctx.s.model, &t, &s, phi, &ctx.s.grid)?,
            berezin_lieb_function_side(&ctx.s.model, &f, &s, phi)?,
        ] {
            worst = worst.max((rep.lhs - rep.rhs) / rep.rhs.abs().max(1e-300));
        }
    }
    Ok(Some((worst, 1e-8)))
}

fn wavelet_nodewise(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let (m, grid) = (&ctx.s.model, &ctx.s.grid);
    let (s, t) = (ctx.s.operator(r, 2), ctx.s.operator(r, 2));
    let psi = ctx.s.vector(r);
    let vf = op_window_transform(m, &s, &psi, grid)?;
    let of = op_wavelet_transform(m, &s, &t, grid)?;
    let mut worst = 0.0f64;
    for i in interior_nodes(ctx, r, 8) {
        let g = grid.node(i);
        worst = worst.max(vec_gap(&vf.sample(i), &s.apply(&m.apply(&g, &psi)?)?));
        let sigma = OperatorRep::new(ctx.s.basis().clone(), (*m.rep_matrix(&g)?).clone())?;
        worst = worst.max(op_gap(&of.sample(i)?, &s.compose(&sigma)?.compose(&t)?));
    }
    Ok(Some((worst, 1e-12)))
}

fn wavelet_rank_one(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let (m, grid) = (&ctx.s.model, &ctx.s.grid);
    let (xi, eta, psi) = (ctx.s.vector(r), ctx.s.vector(r), ctx.s.vector(r));
    let s = OperatorRep::rank_one(ctx.s.basis().clone(), &xi, &eta)?;
    let vf = op_window_transform(m, &s, &psi, grid)?;
    let mut worst = 0.0f64;
    for i in interior_nodes(ctx, r, 16) {
        let coeff = inner(&m.apply(&grid.node(i), &psi)?, &eta);
        worst = worst.max(norm(&(vf.sample(i) - &xi * coeff)) / (norm(&xi) * norm(&psi) * norm(&eta)));
    }
    Ok(Some((worst, 1e-12)))
}

fn wavelet_moyal_vector(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let (m, grid) = (&ctx.s.model, &ctx.s.grid);
    let (s1, s2) = (ctx.s.operator(r, 2), ctx.s.operator(r, 2));
    let (p1, p2) = (ctx.s.vector(r), ctx.s.vector(r));
    let lhs = op_window_transform(m, &s1, &p1, grid)?.inner(&op_window_transform(m, &s2, &p2, grid)?)?;
    Ok(Some((rel(lhs, vector_moyal_rhs(&s1, &s2, &p1, &p2)?), ctx.tol(2e-2, 1e-9))))
}

fn wavelet_moyal_operator(ctx: &Ctx, r: &mut ChaCha8Rng) -> Res {
    let (m, grid) = (&ctx.s.model, &ctx.s.grid);
    let (s1, s2) = (ctx.s.operator(r, 2), ctx.s.operator(r, 2));
    let (t, q) = (ctx.s.operator(r, 2), ctx.s.operator(r, 2));
    let lhs = op_wavelet_transform(m, &s1, &t, grid)?.inner(&op_wavelet_transform(m, &s2, &q, grid)?)?;
    Ok(Some((rel(lhs, operator_moyal_rhs(&s1, &s2, &t, &q)?), ctx.tol(2e-2, 1e-9))))
}

type CheckFn = fn(&Ctx, &mut ChaCha8Rng) -> Res;

/// `(id, module, property, check)`.
const CHECKS: &[(&str, &str, &str, CheckFn)] = &[
    ("G1", "group", "associativity, inverse and identity", associativity),
    ("G2", "group", "right Haar quadrature is right invariant", right_invariance),
    ("G3", "group", "left Haar quadrature is left invariant", left_invariance),
    ("G4", "group", "modular function is a homomorphism and the Haar density ratio", modular),
    ("G5", "group", "metric axioms", metric),
    ("G6", "group", "scaled windows have measure R^2 mu_r", scale_measure),
    ("R1", "representation", "projective composition law", projective),
    ("R2", "representation", "unitarity on interior vectors", unitarity),
    ("R3", "representation", "sigma D sigma* = Delta^(-1/2) D", dm_covariance),
    ("R4", "representation", "orthogonality relation", orthogonality),
    ("O1", "operator", "trace cyclicity", trace_cyclicity),
    ("O2", "operator", "Hoelder duality and Schatten ordering", duality),
    ("O3", "operator", "functional calculus", functional_calculus),
    ("O4", "operator", "binary round trip", binary_roundtrip),
    ("C1", "convolution", "tr(f * S) = tr(S) integral of f", trace_identity),
    ("C2", "convolution", "(f * T) * S = f * (T * S)", compat_operator),
    ("C3", "convolution", "f * (g * S) = (f * g) * S", compat_function),
    ("C4", "convolution", "adjointness in bilinear form", adjointness),
    ("C5", "convolution", "function-operator interpolation bound", young_function_operator),
    ("C6", "convolution", "operator-operator interpolation bound", young_operator_operator),
    ("C7", "convolution", "right integral of T * S", right_integral),
    ("C8", "convolution", "left integral of T * S", left_integral),
    ("C9", "convolution", "resolution of the identity", resolution_identity),
    ("Q1", "cohen", "covariance", cohen_covariance),
    ("Q2", "cohen", "real and nonnegative for positive S", cohen_reality_positivity),
    ("Q3", "cohen", "linearity in S", cohen_linearity),
    ("Q4", "cohen", "eigen-expansion for positive S", cohen_expansion),
    ("Q5", "cohen", "Q of f * S as a correlation with f", cohen_of_convolution),
    ("Q6", "cohen", "uncertainty bound", uncertainty),
    ("L1", "localization", "eigenvalues in [0, 1]", eigen_bounds),
    ("L2", "localization", "minimax characterization", minimax),
    ("L3", "localization", "counting lemma", counting_lemma),
    ("L4", "localization", "density operator construction", density_construction),
    ("L5", "localization", "Berezin-Lieb inequalities", berezin_lieb),
    ("W1", "wavelet", "nodewise samples", wavelet_nodewise),
    ("W2", "wavelet", "rank-one window reduces to a scalar transform", wavelet_rank_one),
    ("W3", "wavelet", "vector Moyal identity", wavelet_moyal_vector),
    ("W4", "wavelet", "operator Moyal identity", wavelet_moyal_operator),
];

pub fn check_ids() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.0).collect()
}

pub fn suite(c: &Config) -> Result<Outcome, CliError> {
    let s = Setup::from_config(c)?;
    let skip = c.list::<String>("suite.skip", &[])?;
    if let Some(bad) = skip.iter().find(|id| !CHECKS.iter().any(|ch| ch.0 == id.as_str())) {
        return Err(ConfigError::new("suite.skip", format!("unknown check id `{bad}`")).into());
    }
    let scale = c.positive("suite.tolerance_scale", 1.0)?;
    let backend = s.backend.name();
    let ctx = Ctx { s };
    let mut out = Outcome {
        table: Table::new(&["id", "module", "property", "backend", "measured", "tolerance", "status"]),
        ..Default::default()
    };
    let (mut passed, mut skipped, mut na) = (0usize, 0usize, 0usize);
    for (k, (id, module, property, check)) in CHECKS.iter().enumerate() {
        let row = |m: String, t: String, st: &str| {
            vec![id.to_string(), module.to_string(), property.to_string(), backend.to_string(), m, t, st.to_string()]
        };
        if skip.iter().any(|s| s == id) {
            skipped += 1;
            out.table.push(row(String::new(), String::new(), "skipped"));
            continue;
        }
        let mut r = ctx.s.rng(1000 + k as u64);
        match check(&ctx, &mut r)? {
            None => {
                na += 1;
                out.table.push(row(String::new(), String::new(), "n/a"));
            }
            Some((measured, tol)) => {
                let tol = tol * scale;
                let ok = measured <= tol;
                if ok {
                    passed += 1;
                } else {
                    out.failures.push(format!("{id} {property}: {measured:e} > {tol:e}"));
                }
                out.table.push(row(num(measured), num(tol), if ok { "pass" } else { "fail" }));
            }
        }
    }
    out.summary.insert("passed".into(), json!(passed));
    out.summary.insert("failed".into(), json!(out.failures.len()));
    out.summary.insert("skipped".into(), json!(skipped));
    out.summary.insert("not_applicable".into(), json!(na));
    Ok(out)
}
