//! CEVAE, mCEVAE and CVAE behind the same encode/decode/train contract as
//! DCEVAE. Their latent width is `latent_d + latent_r` and they reuse the
//! same hidden widths.

mod cevae;
mod conditional;
mod cvae;
mod mcevae;
mod shared;

pub use cevae::{train_cevae, CevaeParams};
pub use conditional::ConditionalNets;
pub use cvae::{train_cvae, CvaeParams};
pub use mcevae::{train_mcevae, McevaeNoise, McevaeParams};
pub(crate) use shared::split_features;
