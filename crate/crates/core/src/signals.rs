//! Test vectors: compactly supported log-Gaussian atoms on the affine
//! lattice, periodic Gaussians on `ℤ_N`, and seeded random vectors.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::c64;
use crate::error::{QhaError, Result};
use crate::operator::{norm, Vector};
use crate::representation::HilbertBasis;

/// Support of a log-Gaussian atom, in standard deviations.
pub const ATOM_CUTOFF: f64 = 3.5;

/// `ψ(ω) = exp(-t²/2s²) e^{iβt}` with `t = ln(ω/c)`, cut to zero for
/// `|t| > 3.5 s` so the atom has exact compact support on the lattice.
pub fn log_gaussian(basis: &HilbertBasis, center: f64, width: f64, chirp: f64) -> Result<Vector> {
    if !matches!(basis, HilbertBasis::Affine { .. }) {
        return Err(QhaError::BackendMismatch("log-Gaussian atoms need the affine basis".into()));
    }
    if !(center > 0.0 && width > 0.0) {
        return Err(QhaError::InvalidParameter(format!("atom centre {center} and width {width} must be positive")));
    }
    Ok(basis.sample(|w| {
        let t = (w / center).ln();
        if t.abs() > ATOM_CUTOFF * width {
            c64(0.0, 0.0)
        } else {
            Complex64::from_polar((-t * t / (2.0 * width * width)).exp(), chirp * t)
        }
    }))
}

/// Periodic Gaussian on `ℤ_N` centred at `center` with modulation `freq`.
pub fn cyclic_gaussian(n: usize, center: f64, width: f64, freq: f64) -> Vector {
    Vector::from_iterator(
        n,
        (0..n).map(|t| {
            let mut acc = c64(0.0, 0.0);
            for wrap in -2i64..=2 {
                let d = t as f64 - center + (wrap * n as i64) as f64;
                acc += c64((-d * d / (2.0 * width * width)).exp(), 0.0);
            }
            acc * Complex64::from_polar(1.0, 2.0 * PI * freq * t as f64 / n as f64)
        }),
    )
}

pub fn normalized(v: &Vector) -> Result<Vector> {
    let n = norm(v);
    if n == 0.0 {
        return Err(QhaError::InvalidParameter("cannot normalize the zero vector".into()));
    }
    Ok(v / c64(n, 0.0))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Complex vector with independent standard normal entries on `support`, zero elsewhere.
pub fn random_vector(rng: &mut impl Rng, n: usize, support: std::ops::Range<usize>) -> Vector {
    let mut v = Vector::zeros(n);
    for i in support {
        v[i] = c64(gauss(rng), gauss(rng));
    }
    v
}

/// Standard normal deviate (Box-Muller).
pub fn gauss(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Random smooth atom on the affine lattice: a log-Gaussian whose centre,
/// width and chirp are drawn from the given ranges.
pub fn random_atom(
    rng: &mut impl Rng,
    basis: &HilbertBasis,
    center: (f64, f64),
    width: (f64, f64),
) -> Result<Vector> {
    let c = rng.gen_range(center.0..center.1);
    let s = rng.gen_range(width.0..width.1);
    let chirp = rng.gen_range(-3.0..3.0);
    let v = log_gaussian(basis, c, s, chirp)?;
    let phase = Complex64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI));
    Ok(v * phase)
}
