//! Ensemble super-resolution with a reference-dataset weight prior.
//!
//! Several component super-resolvers each produce an HR estimate of an LR
//! image. Their per-image combination weights balance two things: the
//! degraded combination should reproduce the LR input, and the weights
//! should stay close to a prior learned from how well each resolver did on
//! a reference dataset.
//!
//! - [`image`], [`io`]: rasters and PGM/PPM/PNG files
//! - [`resample`]: the degradation operator and kernel upsamplers
//! - [`metrics`]: PSNR and SSIM
//! - [`resolvers`]: component super-resolvers
//! - [`prior`]: reference scores and prior weights
//! - [`ensemble`]: the constrained least-squares combination

pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod image;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod prior;
pub mod resample;
pub mod resolvers;

pub use error::{Error, Result};
pub use image::Image;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
