//! Disentangled causal-effect variational autoencoder (DCEVAE) for tabular
//! counterfactual fairness, with CEVAE, mCEVAE and CVAE baselines, causal
//! effect metrics and the linear-model covariance theory.

pub mod baselines;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod counterfactual;
pub mod data;
pub mod dcevae;
pub mod error;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod theory;

pub use error::{Error, Result};
