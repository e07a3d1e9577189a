//! Dirichlet-grid Gaussian free field sampling and multiplicative chaos gates.
//!
//! The library is organized around the pipeline
//!
//! ```text
//! GridSpec ──▶ SpectralPlan ──▶ ψ (latent log-field) ──▶ ξ (positive gate) ──▶ ξ ⊙ F
//! ```
//!
//! * [`grid`] — Dirichlet/intrinsic Laplacians, energies, Green kernel, spectrum.
//! * [`sampler`] — spectral (DST) and dense (Cholesky) samplers for
//!   ψ ~ N(0, (β(L_U+μI))⁻¹), with a seedable stream contract.
//! * [`gates`] — exact Wick-normalized and sample-wise mean-one gates, theoretical
//!   gate kernels, and injection operators for feature maps.
//! * [`baselines`] — inverted dropout, block masking, and additive Gaussian
//!   comparison perturbations.
//! * [`metrics`] — log-ratio deformations, ranking laws, intrinsic roughness,
//!   coherence scores, superlevel sets, and cycle topology.
//! * [`verify`] — the Monte Carlo certification harness pairing each empirical
//!   statistic with its closed-form target.

pub mod baselines;
pub mod error;
pub mod field;
pub mod gates;
pub mod grid;
pub mod metrics;
pub mod sampler;
pub mod verify;

pub use error::{Error, Result};
pub use field::{FeatureMap, LatentField};
pub use grid::{DenseOperator, GridSpec, Site};
pub use sampler::{RandomStream, SpectralPlan};
