//! Multiscale geometry on finite weighted atom clouds: dyadic lattices,
//! beta numbers, densities, Wolff energies, Riesz transforms and
//! stopping-time decompositions.

pub mod coeffs;
pub mod error;
pub mod lattice;
pub mod measure;
pub mod riesz;
pub mod spatial;
pub mod stopping;
pub mod verify;

pub use error::{Error, Result};
pub use lattice::{Cube, Lattice, LatticeParams};
pub use measure::{ball_mass, generate, growth_constant, load_measure, Ball, DiscreteMeasure, Generator};

/// Fixed 17-significant-digit scientific formatting used by every CSV writer.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
