//! Long-term hourly scenario generation for correlated wind and solar
//! power.
//!
//! The pipeline trains a variational autoencoder on weekly-aggregated
//! per-unit generation data (optionally fronted by a fixed radial basis
//! function kernel feature layer), then samples weekly scenarios from the
//! latent prior and disaggregates each week to hourly values by reapplying
//! the historical hourly profile of the most similar training observation
//! (Mahalanobis distance in latent space). A statistical validation suite
//! compares generated scenarios against history per plant
//! (Kolmogorov-Smirnov) and per plant pair (correlation error), including
//! side-by-side comparison with the plain-VAE baseline.
//!
//! Modules, in pipeline order:
//!
//! * [`dataset`]: ingestion, normalization, weekly aggregation, profile
//!   extraction, train/test split, and the synthetic data generator.
//! * [`nn`]: the dense-network engine with Adam and gradient checking.
//! * [`rbf`]: the kernel feature layer, its precomputation, and the
//!   learned inverse mapping.
//! * [`vae`]: model assembly, training, and gamma/model selection.
//! * [`latent`]: posterior store and Mahalanobis profile selection.
//! * [`scenario`]: weekly sampling and hourly disaggregation.
//! * [`stats`]: KS tests, correlation comparison, density summaries.
//! * [`artifact`] / [`report`]: on-disk formats.

pub mod artifact;
pub mod dataset;
pub mod error;
pub mod latent;
pub mod linalg;
pub mod nn;
pub mod rbf;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod stats;
pub mod vae;

pub use error::{Error, Result};
