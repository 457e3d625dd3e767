//! Training configuration and its content hash.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::AdamConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Dcevae,
    Cevae,
    Mcevae,
    Cvae,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Dcevae,
        Variant::Cevae,
        Variant::Mcevae,
        Variant::Cvae,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Dcevae => "dcevae",
            Variant::Cevae => "cevae",
            Variant::Mcevae => "mcevae",
            Variant::Cvae => "cvae",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Where the training data came from. Informational only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Adult { path: String },
    Scm { spec: String },
}

/// Everything that affects a training run's result.
///
/// `latent_d` and `latent_r` are the widths of `u_d` and `u_r`; the
/// single-latent baselines use `latent_d + latent_r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub variant: Variant,
    pub latent_d: usize,
    pub latent_r: usize,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta_tc: f64,
    pub beta_f: f64,
    /// Discriminator ascent steps per minibatch (DCEVAE).
    pub disc_steps: usize,
    /// Discriminator step size; `None` uses `learning_rate`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disc_learning_rate: Option<f64>,
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub lambda_1: f64,
    pub lambda_2: f64,
    /// RBF bandwidths for the MMD penalties; `None` uses `√L · {0.5, 1, 2}`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mmd_bandwidths: Option<Vec<f64>>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<DataSource>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::Dcevae,
            latent_d: 5,
            latent_r: 5,
            hidden: vec![64],
            epochs: 20,
            batch_size: 128,
            learning_rate: 1e-3,
            beta_tc: 1.0,
            beta_f: 0.0,
            disc_steps: 5,
            disc_learning_rate: None,
            lambda_x: 1.0,
            lambda_y: 1.0,
            lambda_1: 1.0,
            lambda_2: 1.0,
            mmd_bandwidths: None,
            seed: 0,
            source: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::invalid(format!("train config: {m}")));
        if self.latent_d == 0 || self.latent_r == 0 {
            return fail("latent dims must be >= 1");
        }
        if self.hidden.contains(&0) {
            return fail("hidden widths must be >= 1");
        }
        if self.epochs == 0 {
            return fail("epochs must be >= 1");
        }
        if self.batch_size < 2 {
            return fail("batch_size must be >= 2");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if self.disc_steps == 0 {
            return fail("disc_steps must be >= 1");
        }
        if self
            .disc_learning_rate
            .is_some_and(|lr| !(lr > 0.0 && lr.is_finite()))
        {
            return fail("disc_learning_rate must be positive");
        }
        let weights = [
            ("beta_tc", self.beta_tc),
            ("beta_f", self.beta_f),
            ("lambda_x", self.lambda_x),
            ("lambda_y", self.lambda_y),
            ("lambda_1", self.lambda_1),
            ("lambda_2", self.lambda_2),
        ];
        for (name, w) in weights {
            if !(w >= 0.0 && w.is_finite()) {
                return fail(&format!("{name} must be finite and >= 0"));
            }
        }
        if let Some(bw) = &self.mmd_bandwidths {
            if bw.is_empty() || bw.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
                return fail("mmd_bandwidths must be non-empty and positive");
            }
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.learning_rate,
            ..AdamConfig::default()
        }
    }

    pub fn disc_adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.disc_learning_rate.unwrap_or(self.learning_rate),
            ..AdamConfig::default()
        }
    }

    pub fn bandwidths(&self) -> Vec<f64> {
        match &self.mmd_bandwidths {
            Some(b) => b.clone(),
            None => {
                let s = ((self.latent_d + self.latent_r) as f64).sqrt();
                vec![0.5 * s, s, 2.0 * s]
            }
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        short_hash(
            serde_json::to_string(self)
                .expect("config serializes")
                .as_bytes(),
        )
    }
}

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn short_hash(bytes: &[u8]) -> String {
    sha256_hex(bytes)[..16].to_string()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
