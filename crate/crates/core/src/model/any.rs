use serde::{Deserialize, Serialize};

use crate::baselines::{
    split_features, train_cevae, train_cvae, train_mcevae, CevaeParams, CvaeParams, McevaeParams,
};
use crate::config::{TrainConfig, Variant};
use crate::data::{Batch, FeatureLayout, TabularDataset};
use crate::dcevae::{self, DcevaeNoise, DcevaeParams};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

use super::heads::{feature_point, feature_sample};
use super::{LatentPosterior, LossBreakdown};

/// Any trained model variant. Serialized with a `variant` tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "params", rename_all = "lowercase")]
pub enum AnyModel {
    Dcevae(DcevaeParams),
    Cevae(CevaeParams),
    Mcevae(McevaeParams),
    Cvae(CvaeParams),
}

/// How decoder distributions become feature values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generation {
    /// Gaussian mean, Bernoulli thresholded at 0.5, categorical argmax.
    Point,
    /// One draw from each decoder distribution.
    Sample,
}

impl AnyModel {
    /// Freshly initialized parameters for `cfg.variant`.
    pub fn init(ds: &TabularDataset, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(match cfg.variant {
            Variant::Dcevae => AnyModel::Dcevae(DcevaeParams::for_dataset(ds, cfg)?),
            Variant::Cevae => AnyModel::Cevae(CevaeParams::for_dataset(ds, cfg)?),
            Variant::Mcevae => AnyModel::Mcevae(McevaeParams::for_dataset(ds, cfg)?),
            Variant::Cvae => AnyModel::Cvae(CvaeParams::for_dataset(ds, cfg)?),
        })
    }

    pub fn train(&mut self, ds: &TabularDataset, cfg: &TrainConfig) -> Result<Vec<LossBreakdown>> {
        if cfg.variant != self.variant() {
            return Err(Error::invalid(format!(
                "config is for {} but the model is {}",
                cfg.variant,
                self.variant()
            )));
        }
        match self {
            AnyModel::Dcevae(p) => dcevae::train(p, ds, cfg),
            AnyModel::Cevae(p) => train_cevae(p, ds, cfg),
            AnyModel::Mcevae(p) => train_mcevae(p, ds, cfg),
            AnyModel::Cvae(p) => train_cvae(p, ds, cfg),
        }
    }

    pub fn variant(&self) -> Variant {
        match self {
            AnyModel::Dcevae(_) => Variant::Dcevae,
            AnyModel::Cevae(_) => Variant::Cevae,
            AnyModel::Mcevae(_) => Variant::Mcevae,
            AnyModel::Cvae(_) => Variant::Cvae,
        }
    }

    pub fn layouts(&self) -> (&FeatureLayout, &FeatureLayout) {
        match self {
            AnyModel::Dcevae(p) => (&p.xd_layout, &p.xr_layout),
            AnyModel::Cevae(p) => (&p.xd_layout, &p.xr_layout),
            AnyModel::Mcevae(p) => (&p.nets.xd_layout, &p.nets.xr_layout),
            AnyModel::Cvae(p) => (&p.nets.xd_layout, &p.nets.xr_layout),
        }
    }

    /// Total latent width.
    pub fn latent_dim(&self) -> usize {
        match self {
            AnyModel::Dcevae(p) => p.latent_d + p.latent_r,
            AnyModel::Cevae(p) => p.latent,
            AnyModel::Mcevae(p) => p.nets.latent,
            AnyModel::Cvae(p) => p.nets.latent,
        }
    }

    /// True when counterfactuals keep the factual `x_r` verbatim.
    pub fn preserves_remainder(&self) -> bool {
        matches!(self, AnyModel::Dcevae(_))
    }

    pub fn check_dataset(&self, ds: &TabularDataset) -> Result<()> {
        let (d, r) = self.layouts();
        if &ds.xd_layout() != d || &ds.xr_layout() != r {
            return Err(Error::invalid(
                "dataset partition or encodings do not match the model checkpoint",
            ));
        }
        Ok(())
    }

    /// Posterior over the latent; `eps` (`records x latent_dim`) gives the
    /// reparameterization noise, `None` the mean.
    pub fn encode(&self, batch: &Batch, eps: Option<&Matrix>) -> Result<LatentPosterior> {
        match self {
            AnyModel::Dcevae(p) => {
                let noise = eps.map(|e| DcevaeNoise {
                    eps_d: e.column_range(0, p.latent_d),
                    eps_r: e.column_range(p.latent_d, e.cols()),
                });
                if let Some(e) = eps {
                    if e.shape() != (batch.len(), self.latent_dim()) {
                        return Err(Error::shape(
                            "AnyModel::encode noise",
                            self.latent_dim(),
                            e.cols(),
                        ));
                    }
                }
                p.encode(batch, noise.as_ref())
            }
            AnyModel::Cevae(p) => p.encode(batch, eps),
            AnyModel::Mcevae(p) => p.nets.encode(batch, eps),
            AnyModel::Cvae(p) => p.nets.encode(batch, eps),
        }
    }

    /// `p(y = 1 | do(a), u)` at the posterior draw `post.u`.
    pub fn y_prob(&self, a: &[f64], post: &LatentPosterior) -> Result<Vec<f64>> {
        match self {
            AnyModel::Dcevae(p) => p.y_prob(a, &post.u_d(), &post.u_r()),
            AnyModel::Cevae(p) => p.y_prob(a, &post.u),
            AnyModel::Mcevae(p) => p.nets.y_prob(a, &post.u),
            AnyModel::Cvae(p) => p.nets.y_prob(a, &post.u),
        }
    }

    /// Decoded `(x_d, x_r)` under `do(a)`. Draws in [`Generation::Sample`]
    /// mode consume `rng` in an order that does not depend on `a`, so two
    /// calls from equal generator states share their noise.
    pub fn generate(
        &self,
        a: &[f64],
        post: &LatentPosterior,
        mode: Generation,
        rng: &mut Rng,
    ) -> Result<(Matrix, Matrix)> {
        let emit = |layout: &FeatureLayout, head: &Matrix, rng: &mut Rng| match mode {
            Generation::Point => feature_point(layout, head),
            Generation::Sample => feature_sample(layout, head, rng),
        };
        match self {
            AnyModel::Dcevae(p) => {
                let dec = p.decode(a, &post.u_d(), &post.u_r())?;
                let xd = emit(&p.xd_layout, &dec.xd_head, rng)?;
                let xr = emit(&p.xr_layout, &dec.xr_head, rng)?;
                Ok((xd, xr))
            }
            AnyModel::Cevae(p) => {
                let x = emit(&p.x_layout(), &p.x_head(a, &post.u)?, rng)?;
                Ok(split_features(&x, p.xd_layout.width))
            }
            AnyModel::Mcevae(McevaeParams { nets, .. }) | AnyModel::Cvae(CvaeParams { nets }) => {
                let x = emit(&nets.x_layout(), &nets.x_head(a, &post.u)?, rng)?;
                Ok(split_features(&x, nets.xd_layout.width))
            }
        }
    }
}
