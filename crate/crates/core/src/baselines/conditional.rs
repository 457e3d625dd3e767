use serde::{Deserialize, Serialize};

use super::shared::{check_widths, features, split_nll};
use crate::data::{Batch, FeatureLayout};
use crate::error::{Error, Result};
use crate::model::heads::bernoulli_nll;
use crate::model::{add_cols, dims, reparam_backward, GaussianOut, LatentPosterior, LossBreakdown};
use crate::numerics::{Matrix, Mlp, OutputActivation, Params, Rng};

/// Single-latent conditional VAE networks: an encoder over `(a, x[, y])`
/// and decoders `p(x | a, u)`, `p(y | a, u)`. Shared by CVAE (encoder sees
/// `y`) and mCEVAE (it does not).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalNets {
    pub latent: usize,
    /// Leading latent columns reported as the `u_d` block.
    pub d_split: usize,
    pub xd_layout: FeatureLayout,
    pub xr_layout: FeatureLayout,
    pub outcome_in_encoder: bool,
    pub enc: Mlp,
    pub dec_x: Mlp,
    pub dec_y: Mlp,
}

/// A differentiable penalty on the latent draws: `(value, adjoint on u)`.
pub(crate) type LatentPenalty<'a> = &'a dyn Fn(&Matrix, &[f64]) -> Result<(f64, Matrix)>;

pub(crate) struct Terms<'a> {
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub kl: bool,
    pub penalty: Option<LatentPenalty<'a>>,
}

impl Params for ConditionalNets {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        for n in [&self.enc, &self.dec_x, &self.dec_y] {
            n.visit(f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        for n in [&mut self.enc, &mut self.dec_x, &mut self.dec_y] {
            n.visit_mut(f);
        }
    }
}

impl ConditionalNets {
    pub fn new(
        xd_layout: FeatureLayout,
        xr_layout: FeatureLayout,
        latent: usize,
        d_split: usize,
        outcome_in_encoder: bool,
        hidden: &[usize],
        rng: &mut Rng,
    ) -> Result<Self> {
        if latent == 0 || d_split > latent {
            return Err(Error::invalid(
                "latent dim must be >= 1 and cover the u_d block",
            ));
        }
        let x_layout = xd_layout.concat(&xr_layout);
        let enc_in = 1 + x_layout.width + usize::from(outcome_in_encoder);
        Ok(ConditionalNets {
            enc: Mlp::new(
                &dims(enc_in, hidden, 2 * latent),
                OutputActivation::Linear,
                rng,
            )?,
            dec_x: Mlp::new(
                &dims(1 + latent, hidden, x_layout.head_width()),
                OutputActivation::Linear,
                rng,
            )?,
            dec_y: Mlp::new(&dims(1 + latent, hidden, 1), OutputActivation::Sigmoid, rng)?,
            latent,
            d_split,
            xd_layout,
            xr_layout,
            outcome_in_encoder,
        })
    }

    pub fn zeros_like(&self) -> Self {
        ConditionalNets {
            enc: self.enc.zeros_like(),
            dec_x: self.dec_x.zeros_like(),
            dec_y: self.dec_y.zeros_like(),
            ..self.clone()
        }
    }

    pub fn x_layout(&self) -> FeatureLayout {
        self.xd_layout.concat(&self.xr_layout)
    }

    fn encoder_input(&self, batch: &Batch) -> Result<Matrix> {
        check_widths(
            "conditional VAE batch",
            &self.xd_layout,
            &self.xr_layout,
            batch,
        )?;
        let a = batch.a_column();
        if self.outcome_in_encoder {
            Matrix::hstack(&[&a, &batch.xd, &batch.xr, &batch.y_column()])
        } else {
            Matrix::hstack(&[&a, &batch.xd, &batch.xr])
        }
    }

    pub fn encode(&self, batch: &Batch, eps: Option<&Matrix>) -> Result<LatentPosterior> {
        let out = self.enc.forward(&self.encoder_input(batch)?)?;
        GaussianOut::from_encoder(&out, self.latent)?.posterior(eps, self.d_split)
    }

    fn decoder_input(&self, a: &[f64], u: &Matrix) -> Result<Matrix> {
        if u.shape() != (a.len(), self.latent) {
            return Err(Error::shape(
                "conditional VAE latents",
                format!("{}x{}", a.len(), self.latent),
                format!("{:?}", u.shape()),
            ));
        }
        Matrix::hstack(&[&Matrix::column_vector(a), u])
    }

    /// Joint feature head of `p(x | a, u)`.
    pub fn x_head(&self, a: &[f64], u: &Matrix) -> Result<Matrix> {
        self.dec_x.forward(&self.decoder_input(a, u)?)
    }

    pub fn y_prob(&self, a: &[f64], u: &Matrix) -> Result<Vec<f64>> {
        Ok(self.dec_y.forward(&self.decoder_input(a, u)?)?.column(0))
    }

    pub(crate) fn forward_backward(
        &self,
        batch: &Batch,
        eps: &Matrix,
        terms: &Terms<'_>,
        grad: Option<&mut ConditionalNets>,
    ) -> Result<LossBreakdown> {
        let b = batch.len();
        let t_enc = self.enc.apply(&self.encoder_input(batch)?)?;
        let g = GaussianOut::from_encoder(t_enc.output(), self.latent)?;
        let u = g.posterior(Some(eps), self.d_split)?.u;
        let dec_in = self.decoder_input(&batch.a, &u)?;
        let t_x = self.dec_x.apply(&dec_in)?;
        let (nll_xd, nll_xr, mut dh_x) = split_nll(
            &self.x_layout(),
            self.xd_layout.blocks.len(),
            t_x.output(),
            &features(batch)?,
        )?;
        let t_y = self.dec_y.apply(&dec_in)?;
        let (nll_y, d_ly) = bernoulli_nll(&t_y.logits().column(0), &batch.y);
        let (kl, mut d_mu, mut d_sigma) = if terms.kl {
            g.kl_standard()
        } else {
            (
                0.0,
                Matrix::zeros(b, self.latent),
                Matrix::zeros(b, self.latent),
            )
        };
        let (penalty, du_pen) = match terms.penalty {
            Some(p) => {
                let (v, d) = p(&u, &batch.a)?;
                (v, Some(d))
            }
            None => (0.0, None),
        };
        let lb = LossBreakdown {
            recon_xd: nll_xd,
            recon_xr: nll_xr,
            recon_y: nll_y,
            kl_d: kl,
            mmd: penalty,
            total: terms.lambda_x * (nll_xd + nll_xr) + terms.lambda_y * nll_y + kl + penalty,
            ..Default::default()
        };
        let Some(gr) = grad else {
            return Ok(lb);
        };
        dh_x.as_mut_slice()
            .iter_mut()
            .for_each(|v| *v *= terms.lambda_x);
        let d_ly: Vec<f64> = d_ly.iter().map(|v| v * terms.lambda_y).collect();
        let mut du = du_pen.unwrap_or_else(|| Matrix::zeros(b, self.latent));
        let d_in = self.dec_x.backward(&t_x, &dh_x, &mut gr.dec_x)?;
        add_cols(&mut du, &d_in, 1);
        let d_in =
            self.dec_y
                .backward_logits(&t_y, &Matrix::column_vector(&d_ly), &mut gr.dec_y)?;
        add_cols(&mut du, &d_in, 1);
        reparam_backward(&du, eps, &mut d_mu, &mut d_sigma);
        self.enc
            .backward(&t_enc, &g.backward(&d_mu, &d_sigma), &mut gr.enc)?;
        Ok(lb)
    }
}
