//! Exact and Monte-Carlo laboratory for the mixing of Glauber dynamics on
//! mean-field spin models: Curie-Weiss-Potts, its generalized power-law
//! variant and the mean-field Blume-Capel model.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: model families, simplex points, configurations and the
//!   generating functions (energy, its gradient and curvature, log-MGF,
//!   Blume-Capel cumulant function, numerical Legendre transforms).
//! - [`equilibrium`]: free energies, rate functions, equilibrium macrostates
//!   and critical parameter values.
//! - [`glauber`]: exact heat-bath update laws, simulation and the lumped
//!   chain on spin counts.
//! - [`coupling`]: couplings, path metrics, coupling-time Monte Carlo and
//!   path-coupling bound calculators.
//! - [`apc`]: aggregate variation of the update-law map along paths and the
//!   three contraction conditions evaluated on simplex grids.
//! - [`mixing`]: total variation, exact mixing profiles, spectral gaps,
//!   bottleneck scans and scaling fits.

pub mod apc;
pub mod coupling;
pub mod equilibrium;
pub mod error;
pub mod glauber;
pub mod mixing;
pub mod model;
pub mod optimize;
pub mod rng;
pub mod sparse;

pub use error::{Error, Result};
pub use model::{Configuration, CountsVector, Family, ModelSpec, SimplexPoint};
