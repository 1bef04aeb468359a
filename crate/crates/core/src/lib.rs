//! Distance-only formation control of multi-agent systems by sinusoidal
//! extremum seeking.
//!
//! Agents measure nothing but their own local potential
//! `psi_i = 1/4 sum_j (|p_i - p_j|^2 - d_ij^2)^2` and move along body-fixed
//! directions modulated by `sqrt(w) cos(w t) h1(psi_i) + sqrt(w) sin(w t) h2(psi_i)`.
//! On average this follows the Lie-bracket system `p_i' = 1/2 [h1,h2](psi_i) grad_i psi`,
//! which drives infinitesimally rigid formations to their target shape.
//!
//! The math is generic over [`Scalar`] (`f32` or `f64`); the `*64` / `*32`
//! aliases below fix the precision.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dither;
pub mod dynamics;
pub mod error;
pub mod esc;
pub mod potential;
pub mod rigidity;
pub mod scalar;
pub mod scenarios;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Framework64 = rigidity::Framework<f64>;
pub type Framework32 = rigidity::Framework<f32>;
pub type FormationSpec64 = potential::FormationSpec<f64>;
pub type FormationSpec32 = potential::FormationSpec<f32>;
pub type BodyFrames64 = potential::BodyFrames<f64>;
pub type BodyFrames32 = potential::BodyFrames<f32>;
pub type DitherShape64 = dither::DitherShape<f64>;
pub type DitherShape32 = dither::DitherShape<f32>;
pub type Schedule64 = dither::SinusoidSchedule<f64>;
pub type Schedule32 = dither::SinusoidSchedule<f32>;
pub type System64 = dynamics::SystemDef<f64>;
pub type System32 = dynamics::SystemDef<f32>;
pub type Trajectory64 = dynamics::Trajectory<f64>;
pub type Trajectory32 = dynamics::Trajectory<f32>;
