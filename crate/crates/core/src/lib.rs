//! Simulation and analysis of latent metric space models.
//!
//! Data are generated as `Y_ij = X_j(Z_i) + σE_ij` from latent points `Z_i`
//! and random fields `X_j`, embedded by principal components, and analysed
//! with optimal transport, graph geodesics and Rips persistence.

pub mod dimsel;
pub mod embed;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod io;
pub mod kernels;
pub mod knn;
pub mod latent;
pub mod linalg;
pub mod rng;
pub mod sim;
pub mod tda;
pub mod transport;

pub use error::{LmsError, Result};
pub use linalg::Matrix;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
