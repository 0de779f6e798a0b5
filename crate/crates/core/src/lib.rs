//! Quantum harmonic analysis on the affine group and on a finite
//! Weyl-Heisenberg phase space.
//!
//! Functions on the group and operators on the representation space are
//! combined through convolutions. The same API runs over two backends:
//!
//! * an affine backend on a geometric frequency lattice, where identities
//!   hold up to quadrature error for smooth, interior-supported data;
//! * a cyclic backend on `ℤ_N × ℤ_N`, where they hold to machine precision.

pub mod cohen;
pub mod convolution;
pub mod error;
pub mod group;
pub mod localization;
pub mod numeric;
pub mod operator;
pub mod representation;
pub mod signals;
pub mod wavelet;

pub use error::{QhaError, Result};
pub use group::{
    build_grid, convolve_functions, indicator, right_haar_measure, scale_set, Backend, GroupFunction,
    GroupModel, GroupPoint, HaarGrid, LocallyCompactGroup, WindowSpec,
};
pub use num_complex::Complex64;
pub use operator::{OperatorRep, Spectrum, Vector};
pub use representation::{DufloMoore, HilbertBasis, RepresentationModel};

pub type C64 = Complex64;

pub(crate) const fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
