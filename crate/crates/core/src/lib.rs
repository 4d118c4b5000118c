//! Joint recovery of a multi-bang attenuation map `a` and a source density `f`
//! from attenuated Radon transform (AtRT) data.
//!
//! The crate is `no_std` and only needs `alloc`. It contains:
//!
//! - [`grid`]: pixel grids, oriented rays and exact ray/grid traversal.
//! - [`forward`]: the discrete AtRT, its sparse system matrix and the
//!   gradient of the data misfit with respect to the attenuation.
//! - [`phantom`]: synthetic multi-bang phantoms, projection geometries and
//!   noise.
//! - [`regularizer`]: the weakly convex multi-bang penalty and its proximal
//!   map, finite differences and smoothed total variation.
//! - [`solver`]: the ADMM attenuation update, the ADMM source update and the
//!   alternating outer loop.
//! - [`singularity`]: a grid-free AtRT oracle for nested convex phantoms and
//!   the machinery that measures sinogram singularities and recovers the
//!   nested boundaries from them.
//!
//! File formats and the command-line driver live in the `atrt-cli` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod error;
pub mod geometry;
mod math;
pub mod grid;
pub mod forward;
pub mod source;
pub mod phantom;
pub mod regularizer;
pub mod solver;
pub mod singularity;

pub use error::{Error, Result};
pub use geometry::Point2;
pub use grid::{pixel_index, trace_ray, Image, PixelGrid, Ray, RayTrace};
pub use forward::{
    assemble_system_matrix, atrt_ray, attenuation_suffix, fidelity_gradient_a, forward, sinhc,
    ProjectionGeometry, Projector, Sinogram, SystemMatrix,
};
pub use regularizer::{AdmissibleSet, GradientField};
pub use source::{Bump, SmoothSource};
