//! Dense matrices, MLPs with reverse-mode gradients, Adam, seeded sampling
//! and kernel two-sample statistics.

mod adam;
mod kernel;
mod matrix;
mod mlp;
mod rng;

pub use adam::{AdamConfig, AdamState};
pub use kernel::{mmd2_with_grad, rbf_mmd, MmdEstimate};
pub use matrix::{nested, Matrix};
pub(crate) use mlp::{log_sigmoid, sigmoid};
pub use mlp::{Dense, Mlp, OutputActivation, Params, Tape};
pub use rng::Rng;

/// `n` standard normal draws from `rng`.
pub fn gaussian_sample(rng: &mut Rng, n: usize) -> crate::Result<Vec<f64>> {
    rng.gaussian_vec(n)
}
