//! Coupled-dipole simulation and optimization toolkit for chaotic-cavity-backed
//! dynamic metasurface antennas (DMAs).
//!
//! The antenna is modeled as a collection of point dipoles in a quasi-2D
//! cavity: one continuously tunable dipole per meta-atom plus a fence of
//! fixed vias that bounds the cavity and sets its reverberation strength.
//! Multiple scattering between all dipoles is solved self-consistently
//! through a dense interaction matrix; the radiated field is a linear
//! projection of the meta-atom dipole moments onto a region of interest.
//! Everything downstream of the solve (pattern sensitivities, objective
//! gradients) is differentiated analytically through the factorization.
//!
//! Module map:
//! - [`geometry`]: seeded random cavity topologies and via-fence presets
//! - [`physics`]: Green's kernels and tunable Lorentzian polarizabilities
//! - [`solver`]: interaction-matrix assembly, direct / Born / Woodbury solves
//! - [`radiation`]: projection to ROI grids, normalization, beam metrics
//! - [`analysis`]: sensitivity statistics, linear surrogates, trade-off sweeps
//! - [`synthesis`]: gradient-based radiation-pattern synthesis

pub mod analysis;
pub mod canonical;
pub mod error;
pub mod geometry;
pub mod physics;
pub mod radiation;
pub mod solver;
pub mod synthesis;
pub mod tuning;

pub use error::{Error, Result};
