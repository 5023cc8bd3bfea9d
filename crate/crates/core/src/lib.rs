//! Depth from defocus with exact discrete blur measures.
//!
//! A Gaussian-blurred step edge sampled on the pixel grid has closed-form
//! sample differences, so blur measures built from those samples can be
//! inverted without any differential approximation. The crate is organized
//! bottom-up:
//!
//! 1. [`blur_math`] – the closed-form measures `R_G`, `R_Gd`, `M_Gd`, their
//!    inverses and the discretization error of the continuous ratio.
//! 2. [`image`] – rasters, exact pixel-integrated Gaussian kernels, uniform and
//!    space-variant convolution, gradients and bilinear sampling.
//! 3. [`edge`] – Canny edges, measurement-circle validation, edge normals and
//!    the `M_Gd` measurement at a validated point.
//! 4. [`pipeline`] – depth/blur calibration, defocus simulation, two-image
//!    relative blur, depth recovery and superpixel aggregation.
//! 5. [`experiment`] – file formats, synthetic scenes, metrics, curve tables
//!    and batch evaluation.
//! 6. [`cli`] – configuration and the subcommands behind the `dfd` binary.

pub mod blur_math;
pub mod cli;
pub mod edge;
mod error;
pub mod experiment;
pub mod image;
pub mod pipeline;

pub use error::{Error, Result};
