//! Models, grids and random test objects built from a configuration.

use std::f64::consts::LN_2;
use std::sync::Arc;

use qha::convolution::make_density_operator;
use qha::group::{GroupFunction, HaarGrid};
use qha::operator::{OperatorRep, Vector};
use qha::signals::{random_atom, random_vector, rng};
use qha::{Backend, HilbertBasis, RepresentationModel, C64};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Config, ConfigError};
use crate::CliError;

/// Affine basis parameters a subcommand starts from before the config overrides them.
#[derive(Clone, Copy, Debug)]
pub struct AffineDefaults {
    pub n: usize,
    pub omega_min: f64,
    pub log_step: f64,
}

pub const DEFAULT_AFFINE: AffineDefaults = AffineDefaults { n: 256, omega_min: 1.0 / 16.0, log_step: LN_2 / 16.0 };

pub fn backend(c: &Config) -> Result<Backend, ConfigError> {
    match c.get::<String>("backend", "affine".into())?.as_str() {
        "affine" => Ok(Backend::Affine),
        "cyclic" => Ok(Backend::Cyclic),
        other => Err(ConfigError::new("backend", format!("expected `affine` or `cyclic`, got `{other}`"))),
    }
}

pub fn affine_model(c: &Config, d: AffineDefaults) -> Result<RepresentationModel, CliError> {
    let n = c.count("affine.n", d.n, 2)?;
    let omega_min = c.positive("affine.omega_min", d.omega_min)?;
    let log_step = c.positive("affine.log_step", d.log_step)?;
    Ok(RepresentationModel::affine(n, omega_min, log_step)?)
}

/// Everything the non-scaling subcommands share.
pub struct Setup {
    pub backend: Backend,
    pub model: RepresentationModel,
    pub grid: Arc<HaarGrid>,
    pub seed: u64,
    pub center: (f64, f64),
    pub width: (f64, f64),
}

fn range(c: &Config, key: &str, lo: f64, hi: f64) -> Result<(f64, f64), ConfigError> {
    let lo = c.positive(&format!("{key}_min"), lo)?;
    let hi = c.positive(&format!("{key}_max"), hi)?;
    if lo >= hi {
        return Err(ConfigError::new(format!("{key}_max"), format!("must exceed {key}_min ({lo})")));
    }
    Ok((lo, hi))
}

impl Setup {
    pub fn from_config(c: &Config) -> Result<Self, CliError> {
        let backend = backend(c)?;
        let seed = c.get("seed", 1u64)?;
        let (model, grid, center, width) = match backend {
            Backend::Affine => {
                let model = affine_model(c, DEFAULT_AFFINE)?;
                let step = model.basis().log_step().expect("affine basis");
                let x0: f64 = c.get("grid.x_min", -4.0)?;
                let x1: f64 = c.get("grid.x_max", 4.0)?;
                if !(x0.is_finite() && x1.is_finite() && x0 < x1) {
                    return Err(ConfigError::new("grid.x_max", format!("must exceed grid.x_min ({x0})")).into());
                }
                let nx = c.count("grid.x_res", 128, 1)?;
                let l0: f64 = c.get("grid.log_a_min", -2.0)?;
                let l1: f64 = c.get("grid.log_a_max", 2.0)?;
                let m0 = (l0 / step - 1e-9).ceil() as i64;
                let m1 = (l1 / step + 1e-9).floor() as i64;
                if m0 > m1 {
                    return Err(ConfigError::new("grid.log_a_max", "no lattice dilation inside [log_a_min, log_a_max]").into());
                }
                let grid = HaarGrid::affine_lattice(x0, x1, nx, step, m0, m1)?;
                let center = range(c, "atoms.center", 1.0, 1.6)?;
                let width = range(c, "atoms.width", 0.2, 0.3)?;
                (model, grid, center, width)
            }
            Backend::Cyclic => {
                let n = c.count("cyclic.n", 32, 2)?;
                (RepresentationModel::cyclic(n)?, HaarGrid::cyclic_full(n)?, (0.0, 0.0), (0.0, 0.0))
            }
        };
        Ok(Self { backend, model, grid: Arc::new(grid), seed, center, width })
    }

    pub fn basis(&self) -> &Arc<HilbertBasis> {
        self.model.basis()
    }

    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        rng(self.seed.wrapping_mul(1_000_003).wrapping_add(stream))
    }

    /// Smooth compactly supported atom (affine) or a Gaussian random vector (cyclic).
    pub fn vector(&self, r: &mut ChaCha8Rng) -> Vector {
        match self.backend {
            Backend::Affine => random_atom(r, self.basis(), self.center, self.width).expect("validated ranges"),
            Backend::Cyclic => random_vector(r, self.model.dim(), 0..self.model.dim()),
        }
    }

    /// Sum of `rank` random rank-one operators.
    pub fn operator(&self, r: &mut ChaCha8Rng, rank: usize) -> OperatorRep {
        let b = self.basis().clone();
        (0..rank).fold(OperatorRep::zeros(b.clone()), |acc, _| {
            let (u, v) = (self.vector(r), self.vector(r));
            acc.add(&OperatorRep::rank_one(b.clone(), &u, &v).expect("same basis")).expect("same basis")
        })
    }

    /// Random mixture normalized so that `tr(D⁻¹SD⁻¹) = 1`.
    pub fn density(&self, r: &mut ChaCha8Rng, rank: usize) -> OperatorRep {
        let vs: Vec<Vector> = (0..rank).map(|_| self.vector(r)).collect();
        let ws: Vec<f64> = (0..rank).map(|_| r.gen_range(0.2..1.0)).collect();
        make_density_operator(self.basis().clone(), &vs, &ws).expect("nonzero mixture").operator
    }

    /// Nonnegative test function: a cut-off Gaussian bump in `(x, ln a)` near
    /// the identity, or uniform random values on the cyclic grid.
    pub fn function(&self, r: &mut ChaCha8Rng) -> GroupFunction {
        match self.backend {
            Backend::Affine => {
                let (x0, l0) = (r.gen_range(-0.4..0.4), r.gen_range(-0.2..0.2));
                let (sx, sl) = (r.gen_range(0.25..0.4), r.gen_range(0.15..0.25));
                GroupFunction::from_real(self.grid.clone(), move |g| {
                    let (u, v) = ((g.x() - x0) / sx, (g.a().ln() - l0) / sl);
                    let q = u * u + v * v;
                    if q > 16.0 {
                        0.0
                    } else {
                        (-q / 2.0).exp()
                    }
                })
            }
            Backend::Cyclic => {
                let vals: Vec<C64> = (0..self.grid.len()).map(|_| C64::new(r.gen_range(0.0..1.0), 0.0)).collect();
                GroupFunction::new(self.grid.clone(), vals).expect("grid length")
            }
        }
    }

    /// Operator read from `operator.file` if given, otherwise a random one of `operator.kind`.
    pub fn configured_operator(&self, c: &Config, r: &mut ChaCha8Rng) -> Result<OperatorRep, CliError> {
        let kind = c.get::<String>("operator.kind", "density".into())?;
        let rank = c.count("operator.rank", 2, 1)?;
        if let Some(path) = c.optional("operator.file") {
            let f = std::fs::File::open(&path).map_err(|e| ConfigError::new("operator.file", format!("{path}: {e}")))?;
            let s = OperatorRep::read_binary(self.basis().clone(), std::io::BufReader::new(f))
                .map_err(|e| ConfigError::new("operator.file", format!("{path}: {e}")))?;
            return Ok(s);
        }
        match kind.as_str() {
            "density" => Ok(self.density(r, rank)),
            "general" => Ok(self.operator(r, rank)),
            other => Err(ConfigError::new("operator.kind", format!("expected `density` or `general`, got `{other}`")).into()),
        }
    }
}
