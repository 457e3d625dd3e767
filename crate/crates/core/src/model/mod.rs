//! Pieces shared by DCEVAE and the baselines: likelihood heads, Gaussian
//! posteriors, loss bookkeeping and the minibatch loop.

mod any;
mod breakdown;
pub(crate) mod heads;
mod latent;

pub use any::{AnyModel, Generation};
pub use breakdown::{history_csv, LossBreakdown};
pub use heads::SIGMA_FLOOR;
pub use latent::LatentPosterior;
pub(crate) use latent::{reparam_backward, GaussianOut};

use crate::config::TrainConfig;
use crate::data::{Batch, TabularDataset};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Mlp, Params, Rng};

/// A borrowed group of networks updated by one optimizer.
pub(crate) struct NetsMut<'a>(pub Vec<&'a mut Mlp>);

impl Params for NetsMut<'_> {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        for n in &self.0 {
            n.visit(f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        for n in &mut self.0 {
            n.visit_mut(f);
        }
    }
}

/// `[input, hidden..., output]`.
pub(crate) fn dims(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut d = vec![input];
    d.extend_from_slice(hidden);
    d.push(output);
    d
}

/// Adds `src` into the columns of `dst` starting at `start`.
pub(crate) fn add_cols(dst: &mut Matrix, src: &Matrix, start: usize) {
    for i in 0..dst.rows() {
        let s = src.row(i);
        for (d, v) in dst.row_mut(i).iter_mut().zip(&s[start..]) {
            *d += v;
        }
    }
}

pub(crate) fn negated(a: &[f64]) -> Vec<f64> {
    a.iter().map(|v| 1.0 - v).collect()
}

/// Shuffled minibatch indices. A trailing batch of one record is merged into
/// the previous batch so every batch has at least two records.
pub(crate) fn minibatches(n: usize, batch_size: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let perm = rng.permutation(n);
    let mut out: Vec<Vec<usize>> = perm.chunks(batch_size).map(<[usize]>::to_vec).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() < 2) {
        let tail = out.pop().unwrap();
        out.last_mut().unwrap().extend(tail);
    }
    out
}

/// Runs `cfg.epochs` shuffled passes over `ds`, calling `step` per
/// minibatch, and returns the record-weighted mean breakdown per epoch.
/// Non-finite values abort with the component and epoch named.
pub(crate) fn run_epochs(
    ds: &TabularDataset,
    cfg: &TrainConfig,
    mut step: impl FnMut(&Batch) -> Result<LossBreakdown>,
) -> Result<Vec<LossBreakdown>> {
    if ds.len() < 2 {
        return Err(Error::invalid("training needs at least two records"));
    }
    let mut shuffle = Rng::new(cfg.seed).fork(1);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let mut acc = LossBreakdown::default();
        for idx in minibatches(ds.len(), cfg.batch_size, &mut shuffle) {
            let batch = ds.batch(&idx);
            let lb = step(&batch).map_err(|e| match e {
                Error::NonFinite {
                    component,
                    epoch: None,
                } => Error::NonFinite {
                    component,
                    epoch: Some(epoch),
                },
                other => other,
            })?;
            acc.add_scaled(&lb, idx.len() as f64 / ds.len() as f64);
        }
        acc.check_finite(Some(epoch))?;
        history.push(acc);
    }
    Ok(history)
}

/// `n x d` standard normal draws.
pub fn gaussian_matrix(rng: &mut Rng, n: usize, d: usize) -> Matrix {
    let mut m = Matrix::zeros(n, d);
    m.as_mut_slice()
        .iter_mut()
        .for_each(|v| *v = rng.gaussian());
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minibatches_cover_every_record_once() {
        let mut rng = Rng::new(0);
        let b = minibatches(11, 5, &mut rng);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![5, 6]);
        let mut all: Vec<usize> = b.concat();
        all.sort();
        assert_eq!(all, (0..11).collect::<Vec<_>>());
    }
}
