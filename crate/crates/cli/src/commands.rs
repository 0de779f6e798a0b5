//! Runners for the single-experiment subcommands.

use std::f64::consts::E;

use qha::cohen::cohen_map;
use qha::convolution::{admissibility_report, make_density_operator, op_op_convolve};
use qha::group::WindowSpec;
use qha::localization::{
    berezin_lieb_function_side, berezin_lieb_operator_side, scaling_experiment, ConvexFn, ScalingConfig,
};
use qha::numeric::ComplexSum;
use qha::operator::inner;
use qha::signals::{cyclic_gaussian, log_gaussian, normalized};
use qha::wavelet::{op_wavelet_transform, op_window_transform, operator_moyal_rhs, vector_moyal_rhs};
use qha::{Backend, DufloMoore, C64};
use rand::Rng;
use serde_json::{json, Map, Value};

use crate::config::{Config, ConfigError};
use crate::output::{num, Table};
use crate::setup::{affine_model, backend, AffineDefaults, Setup};
use crate::CliError;

/// Result of one subcommand before rendering.
#[derive(Debug, Default)]
pub struct Outcome {
    pub table: Table,
    pub failures: Vec<String>,
    pub summary: Map<String, Value>,
}

pub fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn tolerance(c: &Config, b: Backend, affine: f64, cyclic: f64) -> Result<f64, ConfigError> {
    c.positive("tolerance", if b == Backend::Affine { affine } else { cyclic })
}

fn flag(ok: bool) -> String {
    if ok { "true" } else { "false" }.into()
}

/// `∫⟨φ₁, σ(x)*ψ₁⟩ conj⟨φ₂, σ(x)*ψ₂⟩ dμ_r` against `⟨φ₁, φ₂⟩ conj⟨D⁻¹ψ₁, D⁻¹ψ₂⟩`.
pub fn moyal(c: &Config) -> Result<Outcome, CliError> {
    let s = Setup::from_config(c)?;
    let pairs = c.count("moyal.pairs", 6, 1)?;
    let tol = tolerance(c, s.backend, 2e-2, 1e-9)?;
    let dm = DufloMoore::new(s.basis().clone());
    let mut r = s.rng(1);
    let mut out = Outcome {
        table: Table::new(&["instance", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "rel_err", "pass"]),
        ..Default::default()
    };
    let mut worst = 0.0f64;
    for k in 0..pairs {
        let (p1, p2, w1, w2) = (s.vector(&mut r), s.vector(&mut r), s.vector(&mut r), s.vector(&mut r));
        let mut acc = ComplexSum::new();
        for i in 0..s.grid.len() {
            let g = s.grid.node(i);
            let a = inner(&p1, &s.model.apply_adjoint(&g, &w1)?);
            let b = inner(&p2, &s.model.apply_adjoint(&g, &w2)?);
            acc.add(a * b.conj() * s.grid.weights_r()[i]);
        }
        let lhs = acc.value();
        let rhs = inner(&p1, &p2) * inner(&dm.apply_inv(&w1), &dm.apply_inv(&w2)).conj();
        let e = rel(lhs, rhs);
        worst = worst.max(e);
        if e > tol {
            out.failures.push(format!("pair {k}: relative error {e:e} > {tol:e}"));
        }
        out.table.push(vec![k.to_string(), num(lhs.re), num(lhs.im), num(rhs.re), num(rhs.im), num(e), flag(e <= tol)]);
    }
    out.summary.insert("max_rel_err".into(), json!(worst));
    out.summary.insert("tolerance".into(), json!(tol));
    Ok(out)
}

/// Vector and operator Moyal identities for operator windows.
pub fn wavelet_moyal(c: &Config) -> Result<Outcome, CliError> {
    let s = Setup::from_config(c)?;
    let instances = c.count("wavelet.instances", 2, 1)?;
    let rank = c.count("wavelet.rank", 2, 1)?;
    let tol = tolerance(c, s.backend, 2e-2, 1e-9)?;
    let mut r = s.rng(2);
    let mut out = Outcome {
        table: Table::new(&["instance", "kind", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "rel_err", "pass"]),
        ..Default::default()
    };
    let mut worst = 0.0f64;
    for k in 0..instances {
        let (s1, s2) = (s.operator(&mut r, rank), s.operator(&mut r, rank));
        let (t, q) = (s.operator(&mut r, rank), s.operator(&mut r, rank));
        let (p1, p2) = (s.vector(&mut r), s.vector(&mut r));
        let a = op_wavelet_transform(&s.model, &s1, &t, &s.grid)?;
        let b = op_wavelet_transform(&s.model, &s2, &q, &s.grid)?;
        let op = (a.inner(&b)?, operator_moyal_rhs(&s1, &s2, &t, &q)?);
        let a = op_window_transform(&s.model, &s1, &p1, &s.grid)?;
        let b = op_window_transform(&s.model, &s2, &p2, &s.grid)?;
        let vec = (a.inner(&b)?, vector_moyal_rhs(&s1, &s2, &p1, &p2)?);
        for (kind, (lhs, rhs)) in [("operator", op), ("vector", vec)] {
            let e = rel(lhs, rhs);
            worst = worst.max(e);
            if e > tol {
                out.failures.push(format!("instance {k} {kind}: relative error {e:e} > {tol:e}"));
            }
            out.table.push(vec![
                k.to_string(),
                kind.into(),
                num(lhs.re),
                num(lhs.im),
                num(rhs.re),
                num(rhs.im),
                num(e),
                flag(e <= tol),
            ]);
        }
    }
    out.summary.insert("max_rel_err".into(), json!(worst));
    out.summary.insert("tolerance".into(), json!(tol));
    Ok(out)
}

/// Admissibility constant directly and as `∫ T ⋆ S dμ_r / tr(T)`.
pub fn admissibility(c: &Config) -> Result<Outcome, CliError> {
    let s = Setup::from_config(c)?;
    let tol = tolerance(c, s.backend, 2e-2, 1e-10)?;
    let instances = if c.has("operator.file") { 1 } else { c.count("admissibility.instances", 3, 1)? };
    let mut r = s.rng(3);
    let mut out = Outcome {
        table: Table::new(&[
            "instance",
            "constant_re",
            "constant_im",
            "integral_re",
            "integral_im",
            "rel_err",
            "trace_norm_dsd",
            "probe_ratio",
            "converged",
            "pass",
        ]),
        ..Default::default()
    };
    for k in 0..instances {
        let op = s.configured_operator(c, &mut r)?;
        let t = s.density(&mut r, 2);
        let integral = op_op_convolve(&s.model, &t, &op, &s.grid)?.integral_r() / t.trace();
        let adm = admissibility_report(&op);
        let e = rel(integral, C64::new(adm.constant, adm.constant_imag));
        if e > tol {
            out.failures.push(format!("instance {k}: relative error {e:e} > {tol:e}"));
        }
        if !adm.converged {
            out.summary.insert(format!("warning_{k}"), json!(format!("probe ratio {} above threshold", adm.probe_ratio)));
        }
        out.table.push(vec![
            k.to_string(),
            num(adm.constant),
            num(adm.constant_imag),
            num(integral.re),
            num(integral.im),
            num(e),
            num(adm.trace_norm_dsd),
            num(adm.probe_ratio),
            flag(adm.converged),
            flag(e <= tol),
        ]);
    }
    out.summary.insert("tolerance".into(), json!(tol));
    Ok(out)
}

/// `Q_S(ψ)` on every grid node.
pub fn cohen_map_cmd(c: &Config) -> Result<Outcome, CliError> {
    let s = Setup::from_config(c)?;
    let mut r = s.rng(4);
    let op = s.configured_operator(c, &mut r)?;
    let psi = match s.backend {
        Backend::Affine => {
            let center = c.positive("cohen.psi_center", 1.3)?;
            let width = c.positive("cohen.psi_width", 0.25)?;
            let chirp: f64 = c.get("cohen.psi_chirp", 0.0)?;
            log_gaussian(s.basis(), center, width, chirp)?
        }
        Backend::Cyclic => {
            let n = s.model.dim();
            let center: f64 = c.get("cohen.psi_center", n as f64 / 4.0)?;
            let width = c.positive("cohen.psi_width", 2.0)?;
            let freq: f64 = c.get("cohen.psi_freq", 3.0)?;
            cyclic_gaussian(n, center, width, freq)
        }
    };
    let psi = normalized(&psi)?;
    let tol = c.positive("tolerance", 1e-12)?;
    let q = cohen_map(&s.model, &op, &psi, &psi, &s.grid)?;
    let mut out = Outcome { table: Table::new(&["c0", "c1", "re", "im"]), ..Default::default() };
    for row in q.rows() {
        out.table.push(row.iter().map(|v| num(*v)).collect());
    }
    let scale = op.operator_norm().max(1e-300);
    let self_adjoint = op.asymmetry() <= 1e-12;
    let positive = self_adjoint && op.min_eigenvalue()? >= -1e-12 * scale;
    let min_re = q.values.values().iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
    let max_im = q.values.values().iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    if self_adjoint && max_im > tol * scale {
        out.failures.push(format!("self-adjoint S but max |Im Q| = {max_im:e}"));
    }
    if positive && min_re < -tol * scale {
        out.failures.push(format!("positive S but min Q = {min_re:e}"));
    }
    let total = q.total();
    out.summary.insert("integral_re".into(), json!(total.re));
    out.summary.insert("integral_im".into(), json!(total.im));
    out.summary.insert("min_re".into(), json!(min_re));
    out.summary.insert("max_abs_im".into(), json!(max_im));
    out.summary.insert("operator_positive".into(), json!(positive));
    Ok(out)
}

/// Both Berezin-Lieb inequalities for random positive data and each configured `Φ`.
pub fn berezin_lieb(c: &Config) -> Result<Outcome, CliError> {
    let s = Setup::from_config(c)?;
    let instances = c.count("bl.instances", 4, 1)?;
    let phis = c
        .list::<String>("bl.phi", &["t2".into(), "relu:0.5".into()])?
        .into_iter()
        .map(|p| {
            let f = ConvexFn::parse(&p).ok_or_else(|| ConfigError::new("bl.phi", format!("unknown function `{p}`")))?;
            if f.eval(0.0) != Some(0.0) {
                return Err(ConfigError::new("bl.phi", format!("`{p}` must vanish at 0")));
            }
            Ok(f)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut r = s.rng(5);
    let mut out = Outcome {
        table: Table::new(&["instance", "side", "phi", "lhs", "rhs", "rel_gap", "holds"]),
        ..Default::default()
    };
    let mut worst = f64::NEG_INFINITY;
    for k in 0..instances {
        let sd = s.density(&mut r, 2);
        let t = s.density(&mut r, 3);
        let top = t.eigenvalues()?[0];
        let t = t.scale(C64::new(r.gen_range(0.8..2.5) / (top * sd.trace().re), 0.0));
        let f = s.function(&mut r).scaled(C64::new(r.gen_range(0.5..2.0), 0.0));
        for phi in &phis {
            let reps = [
                ("operator", berezin_lieb_operator_side(&s.model, &t, &sd, *phi, &s.grid)?),
                ("function", berezin_lieb_function_side(&s.model, &f, &sd, *phi)?),
            ];
            for (side, rep) in reps {
                let gap = (rep.lhs - rep.rhs) / rep.rhs.abs().max(1e-300);
                worst = worst.max(gap);
                if !rep.holds {
                    out.failures.push(format!("instance {k} {side} {}: {} > {}", phi.name(), rep.lhs, rep.rhs));
                }
                out.table.push(vec![
                    k.to_string(),
                    side.into(),
                    phi.name(),
                    num(rep.lhs),
                    num(rep.rhs),
                    num(gap),
                    flag(rep.holds),
                ]);
            }
        }
    }
    out.summary.insert("max_rel_gap".into(), json!(worst));
    Ok(out)
}

/// Frequencies `ω_min e^{jΔ}` with ω = 1 at index 120 and Δ = 1/32.
pub fn scaling_basis() -> AffineDefaults {
    AffineDefaults { n: 420, omega_min: (-120.0f64 / 32.0).exp(), log_step: 1.0 / 32.0 }
}

/// Eigenvalue counting for `χ_{RΩ} ⋆ S` over a list of `R`.
pub fn localization_scaling(c: &Config) -> Result<Outcome, CliError> {
    if backend(c)? != Backend::Affine {
        return Err(ConfigError::new("backend", "localization-scaling needs the affine backend").into());
    }
    let model = affine_model(c, scaling_basis())?;
    let omega = c.list::<f64>("scaling.omega", &[0.0, 1.0, 1.0, E])?;
    if omega.len() != 4 {
        return Err(ConfigError::new("scaling.omega", "expected x0, x1, a0, a1").into());
    }
    let window = WindowSpec::affine(omega[0], omega[1], omega[2], omega[3]);
    window.validate(model.group()).map_err(|e| ConfigError::new("scaling.omega", e.to_string()))?;
    let delta: f64 = c.get("scaling.delta", 0.5)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ConfigError::new("scaling.delta", format!("must lie in (0, 1), got {delta}")).into());
    }
    let r_list = c.list::<f64>("scaling.r", &[1.0, 2.0, 4.0, 8.0])?;
    if r_list.is_empty() || r_list.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(ConfigError::new("scaling.r", "needs one or more positive scale factors").into());
    }
    let ratio_tol = c.positive("scaling.ratio_tolerance", 0.2)?;
    let eig_slack = c.positive("scaling.eigen_slack", 1e-8)?;
    let d = ScalingConfig::default();
    let cfg = ScalingConfig {
        x_step: c.positive("scaling.x_step", d.x_step)?,
        margin: c.positive("scaling.margin", d.margin)?,
        resolution_cap: c.count("scaling.resolution_cap", d.resolution_cap, 2)?,
        s_tilde_x_half_width: c.positive("scaling.s_tilde_x_half_width", d.s_tilde_x_half_width)?,
        s_tilde_x_step: c.positive("scaling.s_tilde_x_step", d.s_tilde_x_step)?,
        s_tilde_m_max: c.get("scaling.s_tilde_m_max", d.s_tilde_m_max)?,
    };
    let center = c.positive("density.center", 1.0)?;
    let width = c.positive("density.width", 0.25)?;
    let chirps = c.list::<f64>("density.chirps", &[0.0, 2.0])?;
    let weights = c.list::<f64>("density.weights", &[0.6, 0.4])?;
    if chirps.len() != weights.len() || chirps.is_empty() {
        return Err(ConfigError::new("density.weights", "needs one weight per chirp").into());
    }
    let vectors = chirps
        .iter()
        .map(|&ch| normalized(&log_gaussian(model.basis(), center, width, ch)?))
        .collect::<qha::Result<Vec<_>>>()?;
    let s = make_density_operator(model.basis().clone(), &vectors, &weights)
        .map_err(|e| ConfigError::new("density.weights", e.to_string()))?
        .operator;
    let reports = scaling_experiment(&model, &window, &s, delta, &r_list, &cfg)?;
    let mut out = Outcome {
        table: Table::new(&[
            "r",
            "mu_r",
            "mu_r_exact",
            "trace_s",
            "expected",
            "count_above",
            "ratio",
            "eig_min",
            "eig_max",
            "deviation",
            "lemma_bound",
            "lemma_bound_operator",
            "lemma_holds",
            "approx_identity",
        ]),
        ..Default::default()
    };
    for rep in &reports {
        if !rep.lemma_holds {
            out.failures.push(format!("R = {}: deviation {} exceeds lemma bound", rep.r, rep.deviation));
        }
        if rep.eig_min < -eig_slack || rep.eig_max > 1.0 + eig_slack {
            out.failures.push(format!("R = {}: eigenvalues [{}, {}] leave [0, 1]", rep.r, rep.eig_min, rep.eig_max));
        }
        out.table.push(vec![
            num(rep.r),
            num(rep.mu_r),
            num(rep.mu_r_exact),
            num(rep.trace_s),
            num(rep.trace_s * rep.mu_r),
            rep.count_above.to_string(),
            num(rep.ratio),
            num(rep.eig_min),
            num(rep.eig_max),
            num(rep.deviation),
            num(rep.lemma_bound),
            num(rep.lemma_bound_operator),
            flag(rep.lemma_holds),
            num(rep.approx_identity),
        ]);
    }
    let last = reports.last().expect("nonempty R list");
    let gap = (last.ratio - 1.0).abs();
    if gap > ratio_tol {
        out.failures.push(format!("|ratio - 1| = {gap} at R = {} exceeds {ratio_tol}", last.r));
    }
    out.summary.insert("final_ratio".into(), json!(last.ratio));
    out.summary.insert("ratio_tolerance".into(), json!(ratio_tol));
    Ok(out)
}
