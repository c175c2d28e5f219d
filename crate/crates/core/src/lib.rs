//! Relative equilibria of Hamiltonian PDEs with multi-dimensional symmetry
//! groups and numerical certification of their orbital stability.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod grid;
pub mod hessian;
pub mod linalg;
pub mod model;
mod newton;
pub mod planewave;
pub mod profiles;
pub mod scalar;
pub mod slope;
pub mod so3;

pub use certify::{certify, Certificate, CertifyOptions, Verdict};
pub use dynamics::{evolve, Trajectory};
pub use error::{Error, Result};
pub use field::{gradient, inner, laplacian, Field};
pub use grid::{make_grid, Grid, GridKind};
pub use hessian::{HessOp, SpectralReport};
pub use model::{invariants_of, CoupledParams, Generator, Invariants, ModelParams};
pub use profiles::{Family, Profile, ProfileKind};
pub use scalar::Real;
pub use slope::SlopeReport;

pub type Grid64 = Grid<f64>;
pub type Grid32 = Grid<f32>;
pub type Field64 = Field<f64>;
pub type Field32 = Field<f32>;
pub type ModelParams64 = ModelParams<f64>;
pub type Profile64 = Profile<f64>;
pub type Family64 = Family<f64>;
