//! The disentangled causal-effect VAE.
//!
//! Two latents: `u_d` explains the descendants of `a` and `u_r` the
//! remaining features. Encoders see `(a, x_d, y)` and `(a, x_r, y)`;
//! decoders are `p(x_d | a, u_d)`, `p(x_r | u_r)` and `p(y | a, u_d, u_r)`.
//! A discriminator on `(a, u_d, u_r)` estimates the total correlation
//! between `u_d` and `(a, u_r)` by the density-ratio trick.

use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::data::{Batch, FeatureLayout, TabularDataset};
use crate::error::{Error, Result};
use crate::model::heads::{bernoulli_nll, feature_nll};
use crate::model::{
    add_cols, dims, gaussian_matrix, negated, reparam_backward, run_epochs, GaussianOut,
    LatentPosterior, LossBreakdown, NetsMut,
};
use crate::numerics::{log_sigmoid, AdamState, Matrix, Mlp, OutputActivation, Params, Rng, Tape};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcevaeParams {
    pub latent_d: usize,
    pub latent_r: usize,
    pub xd_layout: FeatureLayout,
    pub xr_layout: FeatureLayout,
    /// `(a, x_d, y) -> (μ_d, log σ_d)`
    pub enc_d: Mlp,
    /// `(a, x_r, y) -> (μ_r, log σ_r)`
    pub enc_r: Mlp,
    /// `(a, u_d) -> x_d` head
    pub dec_xd: Mlp,
    /// `u_r -> x_r` head
    pub dec_xr: Mlp,
    /// `(a, u_d, u_r) -> p(y = 1)`
    pub dec_y: Mlp,
    /// `(a, u_d, u_r) -> D`
    pub disc: Mlp,
}

/// Objective weights for one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub beta_tc: f64,
    pub beta_f: f64,
}

/// Reparameterization noise for one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct DcevaeNoise {
    pub eps_d: Matrix,
    pub eps_r: Matrix,
}

impl DcevaeNoise {
    pub fn draw(rng: &mut Rng, records: usize, latent_d: usize, latent_r: usize) -> Self {
        DcevaeNoise {
            eps_d: gaussian_matrix(rng, records, latent_d),
            eps_r: gaussian_matrix(rng, records, latent_r),
        }
    }
}

/// Decoder outputs for one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    /// `x_d` head (see [`FeatureLayout::head_width`]).
    pub xd_head: Matrix,
    pub xr_head: Matrix,
    pub y_prob: Vec<f64>,
}

impl Params for DcevaeParams {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        for n in [
            &self.enc_d,
            &self.enc_r,
            &self.dec_xd,
            &self.dec_xr,
            &self.dec_y,
            &self.disc,
        ] {
            n.visit(f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        for n in [
            &mut self.enc_d,
            &mut self.enc_r,
            &mut self.dec_xd,
            &mut self.dec_xr,
            &mut self.dec_y,
            &mut self.disc,
        ] {
            n.visit_mut(f);
        }
    }
}

fn column(t: &Tape) -> Vec<f64> {
    t.output().column(0)
}

impl DcevaeParams {
    pub fn new(
        xd_layout: FeatureLayout,
        xr_layout: FeatureLayout,
        latent_d: usize,
        latent_r: usize,
        hidden: &[usize],
        rng: &mut Rng,
    ) -> Result<Self> {
        if latent_d == 0 || latent_r == 0 {
            return Err(Error::invalid("latent dims must be >= 1"));
        }
        let (m, n) = (latent_d, latent_r);
        let lin = OutputActivation::Linear;
        let sig = OutputActivation::Sigmoid;
        Ok(DcevaeParams {
            enc_d: Mlp::new(&dims(xd_layout.width + 2, hidden, 2 * m), lin, rng)?,
            enc_r: Mlp::new(&dims(xr_layout.width + 2, hidden, 2 * n), lin, rng)?,
            dec_xd: Mlp::new(&dims(1 + m, hidden, xd_layout.head_width()), lin, rng)?,
            dec_xr: Mlp::new(&dims(n, hidden, xr_layout.head_width()), lin, rng)?,
            dec_y: Mlp::new(&dims(1 + m + n, hidden, 1), sig, rng)?,
            disc: Mlp::new(&dims(1 + m + n, hidden, 1), sig, rng)?,
            latent_d,
            latent_r,
            xd_layout,
            xr_layout,
        })
    }

    pub fn for_dataset(ds: &TabularDataset, cfg: &TrainConfig) -> Result<Self> {
        let mut rng = Rng::new(cfg.seed).fork(0);
        Self::new(
            ds.xd_layout(),
            ds.xr_layout(),
            cfg.latent_d,
            cfg.latent_r,
            &cfg.hidden,
            &mut rng,
        )
    }

    /// Same architecture with every parameter zero (gradient buffer).
    pub fn zeros_like(&self) -> Self {
        DcevaeParams {
            enc_d: self.enc_d.zeros_like(),
            enc_r: self.enc_r.zeros_like(),
            dec_xd: self.dec_xd.zeros_like(),
            dec_xr: self.dec_xr.zeros_like(),
            dec_y: self.dec_y.zeros_like(),
            disc: self.disc.zeros_like(),
            ..self.clone()
        }
    }

    /// Encoders and decoders, in the order used by the model optimizer.
    pub(crate) fn model_nets(&mut self) -> NetsMut<'_> {
        NetsMut(vec![
            &mut self.enc_d,
            &mut self.enc_r,
            &mut self.dec_xd,
            &mut self.dec_xr,
            &mut self.dec_y,
        ])
    }

    pub fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.xd.cols() != self.xd_layout.width || batch.xr.cols() != self.xr_layout.width {
            return Err(Error::shape(
                "DCEVAE batch",
                format!(
                    "x_d width {}, x_r width {}",
                    self.xd_layout.width, self.xr_layout.width
                ),
                format!(
                    "x_d width {}, x_r width {}",
                    batch.xd.cols(),
                    batch.xr.cols()
                ),
            ));
        }
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        Ok(())
    }

    fn encoder_inputs(batch: &Batch) -> Result<(Matrix, Matrix)> {
        let a = batch.a_column();
        let y = batch.y_column();
        Ok((
            Matrix::hstack(&[&a, &batch.xd, &y])?,
            Matrix::hstack(&[&a, &batch.xr, &y])?,
        ))
    }

    /// `q(u_d | a, x_d, y) q(u_r | a, x_r, y)`. Without noise `u` is the mean.
    pub fn encode(&self, batch: &Batch, noise: Option<&DcevaeNoise>) -> Result<LatentPosterior> {
        self.check_batch(batch)?;
        let (in_d, in_r) = Self::encoder_inputs(batch)?;
        let g_d = GaussianOut::from_encoder(&self.enc_d.forward(&in_d)?, self.latent_d)?;
        let g_r = GaussianOut::from_encoder(&self.enc_r.forward(&in_r)?, self.latent_r)?;
        let p_d = g_d.posterior(noise.map(|n| &n.eps_d), self.latent_d)?;
        let p_r = g_r.posterior(noise.map(|n| &n.eps_r), self.latent_r)?;
        p_d.join(&p_r)
    }

    fn check_latents(&self, a: &[f64], u_d: &Matrix, u_r: &Matrix) -> Result<()> {
        if u_d.shape() != (a.len(), self.latent_d) || u_r.shape() != (a.len(), self.latent_r) {
            return Err(Error::shape(
                "DCEVAE latents",
                format!(
                    "{} records, u_d {}, u_r {}",
                    a.len(),
                    self.latent_d,
                    self.latent_r
                ),
                format!("u_d {:?}, u_r {:?}", u_d.shape(), u_r.shape()),
            ));
        }
        Ok(())
    }

    pub fn decode(&self, a: &[f64], u_d: &Matrix, u_r: &Matrix) -> Result<Decoded> {
        self.check_latents(a, u_d, u_r)?;
        let a_col = Matrix::column_vector(a);
        Ok(Decoded {
            xd_head: self.dec_xd.forward(&Matrix::hstack(&[&a_col, u_d])?)?,
            xr_head: self.dec_xr.forward(u_r)?,
            y_prob: self.y_prob(a, u_d, u_r)?,
        })
    }

    /// `p(y = 1 | a, u_d, u_r)`.
    pub fn y_prob(&self, a: &[f64], u_d: &Matrix, u_r: &Matrix) -> Result<Vec<f64>> {
        self.check_latents(a, u_d, u_r)?;
        let input = Matrix::hstack(&[&Matrix::column_vector(a), u_d, u_r])?;
        Ok(self.dec_y.forward(&input)?.column(0))
    }

    /// Reconstruction and KL terms for `post` (which must come from
    /// [`DcevaeParams::encode`] on the same batch).
    pub fn elbo(&self, batch: &Batch, post: &LatentPosterior) -> Result<LossBreakdown> {
        self.check_batch(batch)?;
        let (u_d, u_r) = (post.u_d(), post.u_r());
        let dec = self.decode(&batch.a, &u_d, &u_r)?;
        let (nll_xd, _) = feature_nll(&self.xd_layout, &dec.xd_head, &batch.xd)?;
        let (nll_xr, _) = feature_nll(&self.xr_layout, &dec.xr_head, &batch.xr)?;
        let logits: Vec<f64> = dec.y_prob.iter().map(|p| (p / (1.0 - p)).ln()).collect();
        let (nll_y, _) = bernoulli_nll(&logits, &batch.y);
        let kl = |mu: &Matrix, sigma: &Matrix| {
            let n = mu.rows() as f64;
            mu.as_slice()
                .iter()
                .zip(sigma.as_slice())
                .map(|(m, s)| 0.5 * (m * m + s * s - 1.0) - s.ln())
                .sum::<f64>()
                / n
        };
        let mut lb = LossBreakdown {
            recon_xd: nll_xd.iter().sum(),
            recon_xr: nll_xr.iter().sum(),
            recon_y: nll_y,
            kl_d: kl(&post.mu_d(), &post.sigma_d()),
            kl_r: kl(&post.mu_r(), &post.sigma_r()),
            ..Default::default()
        };
        lb.total = lb.recon_xd + lb.recon_xr + lb.recon_y + lb.kl_d + lb.kl_r;
        Ok(lb)
    }

    fn disc_inputs(
        &self,
        post: &LatentPosterior,
        a: &[f64],
        perm: &[usize],
    ) -> Result<(Matrix, Matrix)> {
        if a.len() < 2 {
            return Err(Error::invalid(
                "the total-correlation estimate needs a batch of at least two records",
            ));
        }
        if perm.len() != a.len() || post.len() != a.len() {
            return Err(Error::shape(
                "tc_loss",
                a.len(),
                format!("perm {}, posterior {}", perm.len(), post.len()),
            ));
        }
        let a_col = Matrix::column_vector(a);
        let (u_d, u_r) = (post.u_d(), post.u_r());
        let joint = Matrix::hstack(&[&a_col, &u_d, &u_r])?;
        let permuted = Matrix::hstack(&[&a_col, &u_d.select_rows(perm), &u_r])?;
        Ok((joint, permuted))
    }

    /// `(tc, disc_objective)`: the mean discriminator logit on joint samples,
    /// and `mean log D(joint) + mean log(1 − D(permuted))`, where permuted
    /// samples pair `(a, u_r)` with `u_d` of record `perm[i]`.
    pub fn tc_loss(&self, post: &LatentPosterior, a: &[f64], perm: &[usize]) -> Result<(f64, f64)> {
        let (joint, permuted) = self.disc_inputs(post, a, perm)?;
        let lj = self.disc.apply(&joint)?.logits().column(0);
        let lp = self.disc.apply(&permuted)?.logits().column(0);
        let b = a.len() as f64;
        let tc = lj.iter().sum::<f64>() / b;
        let obj = lj.iter().map(|l| log_sigmoid(*l)).sum::<f64>() / b
            + lp.iter().map(|l| log_sigmoid(-l)).sum::<f64>() / b;
        Ok((tc, obj))
    }

    /// Discriminator objective and its gradient (ascent direction) with
    /// respect to the discriminator, accumulated into `grad`.
    pub fn disc_objective_and_grad(
        &self,
        post: &LatentPosterior,
        a: &[f64],
        perm: &[usize],
        grad: &mut Mlp,
    ) -> Result<f64> {
        let (joint, permuted) = self.disc_inputs(post, a, perm)?;
        let tj = self.disc.apply(&joint)?;
        let tp = self.disc.apply(&permuted)?;
        let b = a.len() as f64;
        let mut obj = 0.0;
        let mut dj = Matrix::zeros(a.len(), 1);
        let mut dp = Matrix::zeros(a.len(), 1);
        for i in 0..a.len() {
            let (l, pj) = (tj.logits()[(i, 0)], tj.output()[(i, 0)]);
            let (lq, pp) = (tp.logits()[(i, 0)], tp.output()[(i, 0)]);
            obj += (log_sigmoid(l) + log_sigmoid(-lq)) / b;
            dj[(i, 0)] = (1.0 - pj) / b;
            dp[(i, 0)] = -pp / b;
        }
        self.disc.backward_logits(&tj, &dj, grad)?;
        self.disc.backward_logits(&tp, &dp, grad)?;
        Ok(obj)
    }

    /// Mean over records of `|p(y | a, u) − p(y | ¬a, u)|` at the sampled `u`.
    pub fn fairness_loss(&self, post: &LatentPosterior, a: &[f64]) -> Result<f64> {
        let (u_d, u_r) = (post.u_d(), post.u_r());
        let p = self.y_prob(a, &u_d, &u_r)?;
        let q = self.y_prob(&negated(a), &u_d, &u_r)?;
        Ok(p.iter().zip(&q).map(|(p, q)| (p - q).abs()).sum::<f64>() / a.len() as f64)
    }

    /// Assembled objective `NLL + KL + β_tc·tc + β_f·fair` at fixed noise.
    pub fn loss(
        &self,
        batch: &Batch,
        noise: &DcevaeNoise,
        w: LossWeights,
    ) -> Result<LossBreakdown> {
        self.forward_backward(batch, noise, w, None)
    }

    /// Like [`DcevaeParams::loss`], also accumulating the gradient of
    /// `total` into `grad`. The discriminator slot of `grad` receives the
    /// gradient of the tc term, which the trainer discards.
    pub fn loss_and_grad(
        &self,
        batch: &Batch,
        noise: &DcevaeNoise,
        w: LossWeights,
        grad: &mut DcevaeParams,
    ) -> Result<LossBreakdown> {
        self.forward_backward(batch, noise, w, Some(grad))
    }

    fn forward_backward(
        &self,
        batch: &Batch,
        noise: &DcevaeNoise,
        w: LossWeights,
        grad: Option<&mut DcevaeParams>,
    ) -> Result<LossBreakdown> {
        self.check_batch(batch)?;
        let b = batch.len();
        let (m, n) = (self.latent_d, self.latent_r);
        if noise.eps_d.shape() != (b, m) || noise.eps_r.shape() != (b, n) {
            return Err(Error::shape(
                "DCEVAE noise",
                format!("{b}x{m} and {b}x{n}"),
                format!("{:?} and {:?}", noise.eps_d.shape(), noise.eps_r.shape()),
            ));
        }
        let (in_d, in_r) = Self::encoder_inputs(batch)?;
        let t_ed = self.enc_d.apply(&in_d)?;
        let t_er = self.enc_r.apply(&in_r)?;
        let g_d = GaussianOut::from_encoder(t_ed.output(), m)?;
        let g_r = GaussianOut::from_encoder(t_er.output(), n)?;
        let u_d = g_d.posterior(Some(&noise.eps_d), m)?.u;
        let u_r = g_r.posterior(Some(&noise.eps_r), n)?.u;
        let a_col = batch.a_column();

        let t_xd = self.dec_xd.apply(&Matrix::hstack(&[&a_col, &u_d])?)?;
        let (nll_xd, dh_xd) = feature_nll(&self.xd_layout, t_xd.output(), &batch.xd)?;
        let t_xr = self.dec_xr.apply(&u_r)?;
        let (nll_xr, dh_xr) = feature_nll(&self.xr_layout, t_xr.output(), &batch.xr)?;
        let t_y = self.dec_y.apply(&Matrix::hstack(&[&a_col, &u_d, &u_r])?)?;
        let (nll_y, d_ly) = bernoulli_nll(&t_y.logits().column(0), &batch.y);
        let (kl_d, mut dmu_d, mut dsig_d) = g_d.kl_standard();
        let (kl_r, mut dmu_r, mut dsig_r) = g_r.kl_standard();

        let t_disc = if w.beta_tc != 0.0 {
            Some(self.disc.apply(&Matrix::hstack(&[&a_col, &u_d, &u_r])?)?)
        } else {
            None
        };
        let tc = t_disc.as_ref().map_or(0.0, |t| {
            t.logits().as_slice().iter().sum::<f64>() / b as f64
        });

        let t_ycf = if w.beta_f != 0.0 {
            let a_cf = Matrix::column_vector(&negated(&batch.a));
            Some(self.dec_y.apply(&Matrix::hstack(&[&a_cf, &u_d, &u_r])?)?)
        } else {
            None
        };
        let fair = t_ycf.as_ref().map_or(0.0, |t| {
            column(&t_y)
                .iter()
                .zip(column(t))
                .map(|(p, q)| (p - q).abs())
                .sum::<f64>()
                / b as f64
        });

        let mut lb = LossBreakdown {
            recon_xd: nll_xd.iter().sum(),
            recon_xr: nll_xr.iter().sum(),
            recon_y: nll_y,
            kl_d,
            kl_r,
            tc,
            fair,
            ..Default::default()
        };
        lb.total = lb.recon_xd
            + lb.recon_xr
            + lb.recon_y
            + lb.kl_d
            + lb.kl_r
            + w.beta_tc * tc
            + w.beta_f * fair;

        let Some(g) = grad else {
            return Ok(lb);
        };
        let mut du_d = Matrix::zeros(b, m);
        let mut du_r = Matrix::zeros(b, n);

        let d_in = self.dec_xd.backward(&t_xd, &dh_xd, &mut g.dec_xd)?;
        add_cols(&mut du_d, &d_in, 1);
        let d_in = self.dec_xr.backward(&t_xr, &dh_xr, &mut g.dec_xr)?;
        add_cols(&mut du_r, &d_in, 0);

        let mut d_logit_y = Matrix::column_vector(&d_ly);
        if let Some(t_cf) = &t_ycf {
            let mut d_logit_cf = Matrix::zeros(b, 1);
            for i in 0..b {
                let p = t_y.output()[(i, 0)];
                let q = t_cf.output()[(i, 0)];
                let s = w.beta_f * (p - q).signum() * f64::from(u8::from(p != q)) / b as f64;
                d_logit_y[(i, 0)] += s * p * (1.0 - p);
                d_logit_cf[(i, 0)] = -s * q * (1.0 - q);
            }
            let d_in = self
                .dec_y
                .backward_logits(t_cf, &d_logit_cf, &mut g.dec_y)?;
            add_cols(&mut du_d, &d_in, 1);
            add_cols(&mut du_r, &d_in, 1 + m);
        }
        let d_in = self.dec_y.backward_logits(&t_y, &d_logit_y, &mut g.dec_y)?;
        add_cols(&mut du_d, &d_in, 1);
        add_cols(&mut du_r, &d_in, 1 + m);

        if let Some(t) = &t_disc {
            let d_logit = Matrix::filled(b, 1, w.beta_tc / b as f64);
            let d_in = self.disc.backward_logits(t, &d_logit, &mut g.disc)?;
            add_cols(&mut du_d, &d_in, 1);
            add_cols(&mut du_r, &d_in, 1 + m);
        }

        reparam_backward(&du_d, &noise.eps_d, &mut dmu_d, &mut dsig_d);
        reparam_backward(&du_r, &noise.eps_r, &mut dmu_r, &mut dsig_r);
        self.enc_d
            .backward(&t_ed, &g_d.backward(&dmu_d, &dsig_d), &mut g.enc_d)?;
        self.enc_r
            .backward(&t_er, &g_r.backward(&dmu_r, &dsig_r), &mut g.enc_r)?;
        Ok(lb)
    }
}

/// Alternating min-max training. Per minibatch the same noise and
/// permutation feed one discriminator ascent step, then one encoder/decoder
/// descent step with the discriminator frozen. With `β_tc = 0` the
/// discriminator is never evaluated.
pub fn train(
    params: &mut DcevaeParams,
    ds: &TabularDataset,
    cfg: &TrainConfig,
) -> Result<Vec<LossBreakdown>> {
    cfg.validate()?;
    if ds.xd_layout() != params.xd_layout || ds.xr_layout() != params.xr_layout {
        return Err(Error::invalid("dataset encodings do not match the model"));
    }
    let w = LossWeights {
        beta_tc: cfg.beta_tc,
        beta_f: cfg.beta_f,
    };
    let mut noise_rng = Rng::new(cfg.seed).fork(2);
    let mut opt_model = AdamState::for_params(cfg.adam(), &params.model_nets());
    let mut opt_disc = AdamState::for_params(cfg.disc_adam(), &params.disc);
    let (m, n) = (params.latent_d, params.latent_r);
    run_epochs(ds, cfg, |batch| {
        let noise = DcevaeNoise::draw(&mut noise_rng, batch.len(), m, n);
        let perm = noise_rng.permutation(batch.len());
        let mut disc_obj = 0.0;
        if w.beta_tc != 0.0 {
            let post = params.encode(batch, Some(&noise))?;
            for _ in 0..cfg.disc_steps {
                let mut g = params.disc.zeros_like();
                disc_obj = params.disc_objective_and_grad(&post, &batch.a, &perm, &mut g)?;
                if !disc_obj.is_finite() {
                    return Err(Error::NonFinite {
                        component: "disc".into(),
                        epoch: None,
                    });
                }
                g.scale(-1.0);
                opt_disc.step(&mut params.disc, &g)?;
            }
        }
        let mut g = params.zeros_like();
        let mut lb = params.loss_and_grad(batch, &noise, w, &mut g)?;
        lb.disc = disc_obj;
        lb.check_finite(None)?;
        opt_model.step(&mut params.model_nets(), &g.model_nets())?;
        Ok(lb)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::toy;

    fn model(seed: u64) -> (DcevaeParams, Batch) {
        let ds = toy(6);
        let mut rng = Rng::new(seed);
        let p = DcevaeParams::new(ds.xd_layout(), ds.xr_layout(), 2, 3, &[4], &mut rng).unwrap();
        (p, ds.full_batch())
    }

    #[test]
    fn encoder_factorization() {
        let (p, batch) = model(1);
        let base = p.encode(&batch, None).unwrap();
        let mut b2 = batch.clone();
        b2.xr[(0, 0)] += 1.0;
        let pert = p.encode(&b2, None).unwrap();
        assert_eq!(base.mu_d(), pert.mu_d());
        assert_eq!(base.sigma_d(), pert.sigma_d());
        assert_ne!(base.mu_r(), pert.mu_r());
        let mut b3 = batch.clone();
        b3.xd[(0, 0)] += 1.0;
        let pert = p.encode(&b3, None).unwrap();
        assert_eq!(base.mu_r(), pert.mu_r());
        assert_eq!(base.sigma_r(), pert.sigma_r());
    }

    #[test]
    fn decoder_factorization() {
        let (p, batch) = model(2);
        let post = p.encode(&batch, None).unwrap();
        let (u_d, u_r) = (post.u_d(), post.u_r());
        let d0 = p.decode(&batch.a, &u_d, &u_r).unwrap();
        let d1 = p.decode(&negated(&batch.a), &u_d, &u_r).unwrap();
        assert_eq!(d0.xr_head, d1.xr_head);
        assert_ne!(d0.xd_head, d1.xd_head);
        let d2 = p.decode(&batch.a, &u_d, &u_r.map(|v| v + 0.5)).unwrap();
        assert_eq!(d0.xd_head, d2.xd_head);
    }

    #[test]
    fn zero_weight_encoders_give_bias() {
        let (mut p, batch) = model(3);
        p.enc_d.visit_mut(&mut |s| s.fill(0.0));
        let last = p.enc_d.layers_mut().last_mut().unwrap();
        last.bias = vec![0.1, 0.2, -0.3, 0.4];
        let post = p.encode(&batch, None).unwrap();
        assert_eq!(post.mu_d().row(0), &[0.1, 0.2]);
        assert!((post.sigma_d()[(0, 0)] - (-0.3f64).exp()).abs() < 1e-15);
        assert!((post.sigma_d()[(0, 1)] - 0.4f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn blank_outcome_decoder_is_one_half() {
        let (mut p, batch) = model(4);
        p.dec_y.visit_mut(&mut |s| s.fill(0.0));
        let post = p.encode(&batch, None).unwrap();
        let y = p.y_prob(&batch.a, &post.u_d(), &post.u_r()).unwrap();
        assert!(y.iter().all(|v| *v == 0.5));
        assert_eq!(p.fairness_loss(&post, &batch.a).unwrap(), 0.0);
    }

    #[test]
    fn constant_discriminator() {
        let (mut p, batch) = model(5);
        p.disc.visit_mut(&mut |s| s.fill(0.0));
        let post = p.encode(&batch, None).unwrap();
        let perm: Vec<usize> = (0..batch.len()).rev().collect();
        let (tc, obj) = p.tc_loss(&post, &batch.a, &perm).unwrap();
        assert_eq!(tc, 0.0);
        assert!((obj - 0.25f64.ln()).abs() < 1e-12);
        assert!(p.tc_loss(&post, &batch.a[..1], &[0]).is_err());
    }

    #[test]
    fn loss_matches_elbo_plus_terms() {
        let (p, batch) = model(6);
        let noise = DcevaeNoise::draw(&mut Rng::new(9), batch.len(), 2, 3);
        let w = LossWeights {
            beta_tc: 0.7,
            beta_f: 1.3,
        };
        let lb = p.loss(&batch, &noise, w).unwrap();
        let post = p.encode(&batch, Some(&noise)).unwrap();
        let e = p.elbo(&batch, &post).unwrap();
        for (x, y) in [
            (lb.recon_xd, e.recon_xd),
            (lb.recon_xr, e.recon_xr),
            (lb.recon_y, e.recon_y),
            (lb.kl_d, e.kl_d),
            (lb.kl_r, e.kl_r),
        ] {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
        let perm: Vec<usize> = (0..batch.len()).collect();
        let (tc, _) = p.tc_loss(&post, &batch.a, &perm).unwrap();
        assert!((lb.tc - tc).abs() < 1e-12);
        assert!((lb.fair - p.fairness_loss(&post, &batch.a).unwrap()).abs() < 1e-12);
        let sum = e.total + 0.7 * lb.tc + 1.3 * lb.fair;
        assert!((lb.total - sum).abs() < 1e-9);
    }
}
