//! Pseudo-spectral laboratory for the 2D α-Euler and Euler equations on the
//! flat torus `[0, 2π)²` in vorticity form.
//!
//! The crate is organized bottom-up:
//!
//! - [`spectral`]: grid, transforms, spectral derivatives, dealiasing
//! - [`vorticity`]: Biot–Savart, Helmholtz filter, norms, scaling monitors
//! - [`solver`]: RK4 transport of the vorticity with conservation monitors
//! - [`checkpoint`]: binary state snapshots
//! - [`lagrangian`]: particle flow maps, measure preservation, flow distances
//! - [`bounds`]: closed-form convergence-rate bounds and Besov diagnostics
//! - [`initial_data`]: smooth, patch and fractal-patch initial vorticities
//! - [`fit`]: least-squares helpers shared by the diagnostics

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod checkpoint;
pub mod error;
pub mod fit;
pub mod initial_data;
mod interp;
pub mod lagrangian;
pub mod solver;
pub mod spectral;
pub mod vorticity;

pub use error::{Error, Result};
pub use spectral::{dealias, spectral_derivative, to_physical, to_spectral, Axis, Grid, PhysicalField, SpectralField, PERIOD};
pub use vorticity::{
    alpha_norm, biot_savart, helmholtz_filter, helmholtz_unfilter, lp_norm, scaling_monitor, torus_distance,
    AlphaParam, PhysicalVelocity, VelocityField,
};
