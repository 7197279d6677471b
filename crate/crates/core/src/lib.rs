//! Numerical laboratory for thin (Signorini) obstacle problems on the unit disk.
//!
//! The obstacle is imposed on an arbitrary node set `F` of a uniform grid over
//! `[-1, 1]^2`. The crate solves the discrete problem with projected SOR,
//! measures relative capacities, frequency functions and Hölder exponents, and
//! classifies blowup profiles at the origin.
//!
//! Module map:
//!
//! * [`domain`]: grids, node masks, obstacle regions and scalar fields.
//! * [`solver`]: obstacle, Dirichlet and mixed Dirichlet/Neumann solves.
//! * [`capacity`]: relative 0-capacity and the capacity density profile.
//! * [`diagnostics`]: radial integrals, frequencies, identities, exponent fits.
//! * [`blowup`]: normalised rescalings and homogeneity classification.
//! * [`exact`]: closed-form references and barriers.
//! * [`experiments`], [`config`], [`report`]: the named experiments and their
//!   output (driven by the `signorini` binary).

pub mod blowup;
pub mod capacity;
pub mod config;
pub mod diagnostics;
pub mod domain;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod report;
pub mod solver;
pub mod svg;

pub use error::{Error, Result};
