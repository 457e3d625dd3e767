//! mCEVAE: `q(u | a, x)`, `p(x | a, u)`, `p(y | a, u)` with weighted
//! likelihoods and MMD penalties pulling `q(u)` and each `q(u | a = k)`
//! toward the `N(0, I)` prior. There is no KL term.

use serde::{Deserialize, Serialize};

use super::conditional::{ConditionalNets, Terms};
use crate::config::TrainConfig;
use crate::data::{Batch, TabularDataset};
use crate::error::{Error, Result};
use crate::model::{gaussian_matrix, run_epochs, LossBreakdown};
use crate::numerics::{mmd2_with_grad, AdamState, Matrix, Params, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McevaeParams {
    pub nets: ConditionalNets,
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub lambda_1: f64,
    pub lambda_2: f64,
    pub bandwidths: Vec<f64>,
}

/// Reparameterization noise plus one batch of prior draws.
#[derive(Clone, Debug, PartialEq)]
pub struct McevaeNoise {
    pub eps: Matrix,
    pub prior: Matrix,
}

impl McevaeNoise {
    pub fn draw(rng: &mut Rng, records: usize, latent: usize) -> Self {
        McevaeNoise {
            eps: gaussian_matrix(rng, records, latent),
            prior: gaussian_matrix(rng, records, latent),
        }
    }
}

impl Params for McevaeParams {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.nets.visit(f)
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.nets.visit_mut(f)
    }
}

impl McevaeParams {
    pub fn for_dataset(ds: &TabularDataset, cfg: &TrainConfig) -> Result<Self> {
        let mut rng = Rng::new(cfg.seed).fork(0);
        let nets = ConditionalNets::new(
            ds.xd_layout(),
            ds.xr_layout(),
            cfg.latent_d + cfg.latent_r,
            cfg.latent_d,
            false,
            &cfg.hidden,
            &mut rng,
        )?;
        Ok(McevaeParams {
            nets,
            lambda_x: cfg.lambda_x,
            lambda_y: cfg.lambda_y,
            lambda_1: cfg.lambda_1,
            lambda_2: cfg.lambda_2,
            bandwidths: cfg.bandwidths(),
        })
    }

    pub fn zeros_like(&self) -> Self {
        McevaeParams {
            nets: self.nets.zeros_like(),
            ..self.clone()
        }
    }

    /// `λ₁·MMD²(u, z) + λ₂·Σ_k MMD²(u | a = k, z)` and its adjoint on `u`.
    /// Groups with fewer than two records are skipped.
    pub fn mmd_penalty(&self, u: &Matrix, a: &[f64], prior: &Matrix) -> Result<(f64, Matrix)> {
        let mut value = 0.0;
        let mut du = Matrix::zeros(u.rows(), u.cols());
        if self.lambda_1 != 0.0 {
            let est = mmd2_with_grad(u, prior, &self.bandwidths)?;
            value += self.lambda_1 * est.value;
            for (d, g) in du.as_mut_slice().iter_mut().zip(est.grad_xs.as_slice()) {
                *d += self.lambda_1 * g;
            }
        }
        if self.lambda_2 != 0.0 {
            for k in [0.0, 1.0] {
                let idx: Vec<usize> = (0..a.len()).filter(|&i| a[i] == k).collect();
                if idx.len() < 2 {
                    continue;
                }
                let est = mmd2_with_grad(&u.select_rows(&idx), prior, &self.bandwidths)?;
                value += self.lambda_2 * est.value;
                for (r, &i) in idx.iter().enumerate() {
                    for (d, g) in du.row_mut(i).iter_mut().zip(est.grad_xs.row(r)) {
                        *d += self.lambda_2 * g;
                    }
                }
            }
        }
        Ok((value, du))
    }

    fn run(
        &self,
        batch: &Batch,
        noise: &McevaeNoise,
        grad: Option<&mut ConditionalNets>,
    ) -> Result<LossBreakdown> {
        if noise.prior.shape() != noise.eps.shape() {
            return Err(Error::shape(
                "mCEVAE noise",
                format!("{:?}", noise.eps.shape()),
                format!("{:?}", noise.prior.shape()),
            ));
        }
        let penalty = |u: &Matrix, a: &[f64]| self.mmd_penalty(u, a, &noise.prior);
        let use_mmd = self.lambda_1 != 0.0 || self.lambda_2 != 0.0;
        let terms = Terms {
            lambda_x: self.lambda_x,
            lambda_y: self.lambda_y,
            kl: false,
            penalty: if use_mmd { Some(&penalty) } else { None },
        };
        self.nets.forward_backward(batch, &noise.eps, &terms, grad)
    }

    /// Weighted objective; `mmd` in the breakdown is the weighted penalty.
    pub fn loss(&self, batch: &Batch, noise: &McevaeNoise) -> Result<LossBreakdown> {
        self.run(batch, noise, None)
    }

    pub fn loss_and_grad(
        &self,
        batch: &Batch,
        noise: &McevaeNoise,
        grad: &mut McevaeParams,
    ) -> Result<LossBreakdown> {
        self.run(batch, noise, Some(&mut grad.nets))
    }
}

pub fn train_mcevae(
    params: &mut McevaeParams,
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
        let noise = McevaeNoise::draw(&mut noise_rng, batch.len(), l);
        let mut g = params.zeros_like();
        let lb = params.loss_and_grad(batch, &noise, &mut g)?;
        lb.check_finite(None)?;
        opt.step(params, &g)?;
        Ok(lb)
    })
}
