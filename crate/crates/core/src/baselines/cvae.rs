//! Conditional VAE with condition `a`: `q(u | a, x, y)`, `p(x | a, u)`,
//! `p(y | a, u)`, standard ELBO.

use serde::{Deserialize, Serialize};

use super::conditional::{ConditionalNets, Terms};
use crate::config::TrainConfig;
use crate::data::{Batch, TabularDataset};
use crate::error::{Error, Result};
use crate::model::{gaussian_matrix, run_epochs, LossBreakdown};
use crate::numerics::{AdamState, Matrix, Params, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CvaeParams {
    pub nets: ConditionalNets,
}

impl Params for CvaeParams {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.nets.visit(f)
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.nets.visit_mut(f)
    }
}

const TERMS: Terms<'static> = Terms {
    lambda_x: 1.0,
    lambda_y: 1.0,
    kl: true,
    penalty: None,
};

impl CvaeParams {
    pub fn for_dataset(ds: &TabularDataset, cfg: &TrainConfig) -> Result<Self> {
        let mut rng = Rng::new(cfg.seed).fork(0);
        let nets = ConditionalNets::new(
            ds.xd_layout(),
            ds.xr_layout(),
            cfg.latent_d + cfg.latent_r,
            cfg.latent_d,
            true,
            &cfg.hidden,
            &mut rng,
        )?;
        Ok(CvaeParams { nets })
    }

    pub fn zeros_like(&self) -> Self {
        CvaeParams {
            nets: self.nets.zeros_like(),
        }
    }

    pub fn loss(&self, batch: &Batch, eps: &Matrix) -> Result<LossBreakdown> {
        self.nets.forward_backward(batch, eps, &TERMS, None)
    }

    pub fn loss_and_grad(
        &self,
        batch: &Batch,
        eps: &Matrix,
        grad: &mut CvaeParams,
    ) -> Result<LossBreakdown> {
        self.nets
            .forward_backward(batch, eps, &TERMS, Some(&mut grad.nets))
    }
}

pub fn train_cvae(
    params: &mut CvaeParams,
    ds: &TabularDataset,
    cfg: &TrainConfig,
) -> Result<Vec<LossBreakdown>> {
    cfg.validate()?;
    if ds.xd_layout() != params.nets.xd_layout || ds.xr_layout() != params.nets.xr_layout {
        return Err(Error::invalid("dataset encodings do not match the model"));
    }
    let mut noise_rng = Rng::new(cfg.seed).fork(2);
    let mut opt = AdamState::for_params(cfg.adam(), params);
    let l = params.nets.latent;
    run_epochs(ds, cfg, |batch| {
        let eps = gaussian_matrix(&mut noise_rng, batch.len(), l);
        let mut g = params.zeros_like();
        let lb = params.loss_and_grad(batch, &eps, &mut g)?;
        lb.check_finite(None)?;
        opt.step(params, &g)?;
        Ok(lb)
    })
}
