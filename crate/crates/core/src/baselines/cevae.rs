//! CEVAE: one latent `u` inferred from `(a, x, y)`, a pair of decoders
//! `f_{a=0}`, `f_{a=1}` for `(x, y)` selected by the record's `a`, a head
//! `p(a | u)`, and auxiliary heads `q(a | x)`, `q(y | x, a)` fitted on the
//! observed data. A counterfactual sends `u` through the other decoder.

use serde::{Deserialize, Serialize};

use super::shared::{check_widths, features, split_nll};
use crate::config::TrainConfig;
use crate::data::{Batch, FeatureLayout, TabularDataset};
use crate::error::{Error, Result};
use crate::model::heads::bernoulli_nll;
use crate::model::{
    dims, gaussian_matrix, reparam_backward, run_epochs, GaussianOut, LatentPosterior,
    LossBreakdown,
};
use crate::numerics::{AdamState, Matrix, Mlp, OutputActivation, Params, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CevaeParams {
    pub latent: usize,
    pub d_split: usize,
    pub xd_layout: FeatureLayout,
    pub xr_layout: FeatureLayout,
    /// `(a, x, y) -> (μ, log σ)`
    pub enc: Mlp,
    /// `f_{a=k}` feature heads, `u -> x`
    pub dec_x: [Mlp; 2],
    /// `f_{a=k}` outcome heads, `u -> p(y = 1)`
    pub dec_y: [Mlp; 2],
    /// `u -> p(a = 1)`
    pub dec_a: Mlp,
    /// `x -> q(a = 1)`
    pub aux_a: Mlp,
    /// `(x, a) -> q(y = 1)`
    pub aux_y: Mlp,
    /// Records routed through each decoder during training.
    pub routed: [u64; 2],
}

impl Params for CevaeParams {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        for n in self.nets() {
            n.visit(f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        let [x0, x1] = &mut self.dec_x;
        let [y0, y1] = &mut self.dec_y;
        for n in [
            &mut self.enc,
            x0,
            x1,
            y0,
            y1,
            &mut self.dec_a,
            &mut self.aux_a,
            &mut self.aux_y,
        ] {
            n.visit_mut(f);
        }
    }
}

fn group(a: &[f64], k: usize) -> Vec<usize> {
    (0..a.len()).filter(|&i| a[i] == k as f64).collect()
}

impl CevaeParams {
    pub fn new(
        xd_layout: FeatureLayout,
        xr_layout: FeatureLayout,
        latent: usize,
        d_split: usize,
        hidden: &[usize],
        rng: &mut Rng,
    ) -> Result<Self> {
        if latent == 0 || d_split > latent {
            return Err(Error::invalid(
                "latent dim must be >= 1 and cover the u_d block",
            ));
        }
        let x = xd_layout.concat(&xr_layout);
        let lin = OutputActivation::Linear;
        let sig = OutputActivation::Sigmoid;
        let enc = Mlp::new(&dims(x.width + 2, hidden, 2 * latent), lin, rng)?;
        let dec_x = [
            Mlp::new(&dims(latent, hidden, x.head_width()), lin, rng)?,
            Mlp::new(&dims(latent, hidden, x.head_width()), lin, rng)?,
        ];
        let dec_y = [
            Mlp::new(&dims(latent, hidden, 1), sig, rng)?,
            Mlp::new(&dims(latent, hidden, 1), sig, rng)?,
        ];
        Ok(CevaeParams {
            dec_a: Mlp::new(&dims(latent, hidden, 1), sig, rng)?,
            aux_a: Mlp::new(&dims(x.width, hidden, 1), sig, rng)?,
            aux_y: Mlp::new(&dims(x.width + 1, hidden, 1), sig, rng)?,
            enc,
            dec_x,
            dec_y,
            latent,
            d_split,
            xd_layout,
            xr_layout,
            routed: [0, 0],
        })
    }

    pub fn for_dataset(ds: &TabularDataset, cfg: &TrainConfig) -> Result<Self> {
        let mut rng = Rng::new(cfg.seed).fork(0);
        Self::new(
            ds.xd_layout(),
            ds.xr_layout(),
            cfg.latent_d + cfg.latent_r,
            cfg.latent_d,
            &cfg.hidden,
            &mut rng,
        )
    }

    fn nets(&self) -> [&Mlp; 8] {
        [
            &self.enc,
            &self.dec_x[0],
            &self.dec_x[1],
            &self.dec_y[0],
            &self.dec_y[1],
            &self.dec_a,
            &self.aux_a,
            &self.aux_y,
        ]
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.visit_mut(&mut |s| s.fill(0.0));
        z.routed = [0, 0];
        z
    }

    pub fn x_layout(&self) -> FeatureLayout {
        self.xd_layout.concat(&self.xr_layout)
    }

    fn encoder_input(&self, batch: &Batch) -> Result<Matrix> {
        check_widths("CEVAE batch", &self.xd_layout, &self.xr_layout, batch)?;
        Matrix::hstack(&[&batch.a_column(), &batch.xd, &batch.xr, &batch.y_column()])
    }

    pub fn encode(&self, batch: &Batch, eps: Option<&Matrix>) -> Result<LatentPosterior> {
        let out = self.enc.forward(&self.encoder_input(batch)?)?;
        GaussianOut::from_encoder(&out, self.latent)?.posterior(eps, self.d_split)
    }

    fn check_latents(&self, a: &[f64], u: &Matrix) -> Result<()> {
        if u.shape() != (a.len(), self.latent) {
            return Err(Error::shape(
                "CEVAE latents",
                format!("{}x{}", a.len(), self.latent),
                format!("{:?}", u.shape()),
            ));
        }
        Ok(())
    }

    /// Evaluates `nets[a_i]` on row `i` of `u`.
    fn routed_forward(&self, nets: &[Mlp; 2], a: &[f64], u: &Matrix) -> Result<Matrix> {
        self.check_latents(a, u)?;
        let width = nets[0].output_dim();
        let mut out = Matrix::zeros(a.len(), width);
        for (k, net) in nets.iter().enumerate() {
            let idx = group(a, k);
            if idx.is_empty() {
                continue;
            }
            let part = net.forward(&u.select_rows(&idx))?;
            for (r, &i) in idx.iter().enumerate() {
                out.row_mut(i).copy_from_slice(part.row(r));
            }
        }
        Ok(out)
    }

    /// Joint feature head from decoder `f_{a_i}` for each record.
    pub fn x_head(&self, a: &[f64], u: &Matrix) -> Result<Matrix> {
        self.routed_forward(&self.dec_x, a, u)
    }

    /// `p(y = 1 | u)` from decoder `f_{a_i}` for each record.
    pub fn y_prob(&self, a: &[f64], u: &Matrix) -> Result<Vec<f64>> {
        Ok(self.routed_forward(&self.dec_y, a, u)?.column(0))
    }

    pub fn loss(&self, batch: &Batch, eps: &Matrix) -> Result<LossBreakdown> {
        self.forward_backward(batch, eps, None)
    }

    pub fn loss_and_grad(
        &self,
        batch: &Batch,
        eps: &Matrix,
        grad: &mut CevaeParams,
    ) -> Result<LossBreakdown> {
        self.forward_backward(batch, eps, Some(grad))
    }

    fn forward_backward(
        &self,
        batch: &Batch,
        eps: &Matrix,
        mut grad: Option<&mut CevaeParams>,
    ) -> Result<LossBreakdown> {
        let b = batch.len();
        let t_enc = self.enc.apply(&self.encoder_input(batch)?)?;
        let g = GaussianOut::from_encoder(t_enc.output(), self.latent)?;
        let u = g.posterior(Some(eps), self.d_split)?.u;
        let x = features(batch)?;
        let layout = self.x_layout();
        let n_d_blocks = self.xd_layout.blocks.len();
        let mut du = Matrix::zeros(b, self.latent);
        let mut lb = LossBreakdown::default();

        for k in 0..2 {
            let idx = group(&batch.a, k);
            if idx.is_empty() {
                continue;
            }
            let share = idx.len() as f64 / b as f64;
            let u_k = u.select_rows(&idx);
            let t_x = self.dec_x[k].apply(&u_k)?;
            let (nd, nr, mut dh) =
                split_nll(&layout, n_d_blocks, t_x.output(), &x.select_rows(&idx))?;
            let t_y = self.dec_y[k].apply(&u_k)?;
            let y_k: Vec<f64> = idx.iter().map(|&i| batch.y[i]).collect();
            let (ny, d_ly) = bernoulli_nll(&t_y.logits().column(0), &y_k);
            lb.recon_xd += share * nd;
            lb.recon_xr += share * nr;
            lb.recon_y += share * ny;
            if let Some(gr) = grad.as_deref_mut() {
                dh.as_mut_slice().iter_mut().for_each(|v| *v *= share);
                let d_ly: Vec<f64> = d_ly.iter().map(|v| v * share).collect();
                let mut du_k = self.dec_x[k].backward(&t_x, &dh, &mut gr.dec_x[k])?;
                let d2 = self.dec_y[k].backward_logits(
                    &t_y,
                    &Matrix::column_vector(&d_ly),
                    &mut gr.dec_y[k],
                )?;
                for (v, w) in du_k.as_mut_slice().iter_mut().zip(d2.as_slice()) {
                    *v += w;
                }
                for (r, &i) in idx.iter().enumerate() {
                    for (d, v) in du.row_mut(i).iter_mut().zip(du_k.row(r)) {
                        *d += v;
                    }
                }
            }
        }

        let t_a = self.dec_a.apply(&u)?;
        let (na, d_la) = bernoulli_nll(&t_a.logits().column(0), &batch.a);
        let t_qa = self.aux_a.apply(&x)?;
        let (nqa, d_qa) = bernoulli_nll(&t_qa.logits().column(0), &batch.a);
        let t_qy = self
            .aux_y
            .apply(&Matrix::hstack(&[&x, &batch.a_column()])?)?;
        let (nqy, d_qy) = bernoulli_nll(&t_qy.logits().column(0), &batch.y);
        let (kl, mut d_mu, mut d_sigma) = g.kl_standard();
        lb.aux = na + nqa + nqy;
        lb.kl_d = kl;
        lb.total = lb.recon_xd + lb.recon_xr + lb.recon_y + lb.aux + lb.kl_d;

        let Some(gr) = grad else {
            return Ok(lb);
        };
        let d_in =
            self.dec_a
                .backward_logits(&t_a, &Matrix::column_vector(&d_la), &mut gr.dec_a)?;
        for (d, v) in du.as_mut_slice().iter_mut().zip(d_in.as_slice()) {
            *d += v;
        }
        self.aux_a
            .backward_logits(&t_qa, &Matrix::column_vector(&d_qa), &mut gr.aux_a)?;
        self.aux_y
            .backward_logits(&t_qy, &Matrix::column_vector(&d_qy), &mut gr.aux_y)?;
        reparam_backward(&du, eps, &mut d_mu, &mut d_sigma);
        self.enc
            .backward(&t_enc, &g.backward(&d_mu, &d_sigma), &mut gr.enc)?;
        Ok(lb)
    }
}

/// Each record's likelihood terms touch only the decoder of its own `a`;
/// `params.routed` counts the records each decoder has seen.
pub fn train_cevae(
    params: &mut CevaeParams,
    ds: &TabularDataset,
    cfg: &TrainConfig,
) -> Result<Vec<LossBreakdown>> {
    cfg.validate()?;
    if ds.xd_layout() != params.xd_layout || ds.xr_layout() != params.xr_layout {
        return Err(Error::invalid("dataset encodings do not match the model"));
    }
    let mut noise_rng = Rng::new(cfg.seed).fork(2);
    let mut opt = AdamState::for_params(cfg.adam(), params);
    let l = params.latent;
    run_epochs(ds, cfg, |batch| {
        let eps = gaussian_matrix(&mut noise_rng, batch.len(), l);
        let mut g = params.zeros_like();
        let lb = params.loss_and_grad(batch, &eps, &mut g)?;
        lb.check_finite(None)?;
        opt.step(params, &g)?;
        for k in 0..2 {
            params.routed[k] += group(&batch.a, k).len() as u64;
        }
        Ok(lb)
    })
}
