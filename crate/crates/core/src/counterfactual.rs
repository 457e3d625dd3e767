//! Abduction, action and prediction: infer the latent state of each record,
//! negate `a`, and decode again. Also builds the generated training set
//! used by the causal-fair classifier.

use std::path::{Path, PathBuf};

use crate::data::{Batch, TabularDataset};
use crate::error::{Error, Result};
use crate::model::{gaussian_matrix, negated, AnyModel, Generation, LatentPosterior};
use crate::numerics::{Matrix, Rng};

/// How latents are inferred from evidence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Abduction {
    /// Posterior mean.
    Mean,
    /// `draws` reparameterized samples per record.
    Sample { draws: usize },
}

pub const DEFAULT_DRAWS: usize = 32;

/// One posterior per draw (a single one in mean mode).
pub fn abduct(
    model: &AnyModel,
    batch: &Batch,
    mode: Abduction,
    rng: &mut Rng,
) -> Result<Vec<LatentPosterior>> {
    match mode {
        Abduction::Mean => Ok(vec![model.encode(batch, None)?]),
        Abduction::Sample { draws } => {
            if draws == 0 {
                return Err(Error::invalid("sample abduction needs at least one draw"));
            }
            (0..draws)
                .map(|_| {
                    let eps = gaussian_matrix(rng, batch.len(), model.latent_dim());
                    model.encode(batch, Some(&eps))
                })
                .collect()
        }
    }
}

/// Factual records with their counterfactual under `a' = 1 − a`.
#[derive(Clone, Debug, PartialEq)]
pub struct CounterfactualBatch {
    pub factual: Batch,
    pub a_cf: Vec<f64>,
    /// Posterior used for `x'` (the first draw in sample mode).
    pub posterior: LatentPosterior,
    /// `p(y = 1 | a, u)` and `p(y = 1 | ¬a, u)`, averaged over draws.
    pub y_prob: Vec<f64>,
    pub y_prob_cf: Vec<f64>,
    /// Point-decoded counterfactual features. For DCEVAE `xr_cf` is the
    /// factual `x_r`; the baselines regenerate every feature.
    pub xd_cf: Matrix,
    pub xr_cf: Matrix,
}

impl CounterfactualBatch {
    /// Mean absolute change of the encoded `x_r` columns.
    pub fn remainder_change(&self) -> f64 {
        let diff = self.xr_cf.sub(&self.factual.xr).expect("same shape");
        diff.as_slice().iter().map(|v| v.abs()).sum::<f64>() / diff.as_slice().len().max(1) as f64
    }
}

/// `p(y = 1 | do(a), u)` averaged over posterior draws.
pub fn intervene(model: &AnyModel, posteriors: &[LatentPosterior], a: &[f64]) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; a.len()];
    for post in posteriors {
        for (s, p) in acc.iter_mut().zip(model.y_prob(a, post)?) {
            *s += p;
        }
    }
    let k = posteriors.len() as f64;
    Ok(acc.into_iter().map(|s| s / k).collect())
}

pub fn counterfactual_predict(
    model: &AnyModel,
    batch: &Batch,
    mode: Abduction,
    rng: &mut Rng,
) -> Result<CounterfactualBatch> {
    let posts = abduct(model, batch, mode, rng)?;
    let a_cf = negated(&batch.a);
    let y_prob = intervene(model, &posts, &batch.a)?;
    let y_prob_cf = intervene(model, &posts, &a_cf)?;
    let posterior = posts.into_iter().next().expect("at least one draw");
    let (xd_cf, xr_gen) = model.generate(&a_cf, &posterior, Generation::Point, rng)?;
    let xr_cf = if model.preserves_remainder() {
        batch.xr.clone()
    } else {
        xr_gen
    };
    Ok(CounterfactualBatch {
        factual: batch.clone(),
        a_cf,
        posterior,
        y_prob,
        y_prob_cf,
        xd_cf,
        xr_cf,
    })
}

/// Mean `|p(y | a, u) − p(y | ¬a, u)|` over `ds` at the posterior mean.
pub fn fairness_gap(model: &AnyModel, ds: &TabularDataset) -> Result<f64> {
    model.check_dataset(ds)?;
    let batch = ds.full_batch();
    let post = model.encode(&batch, None)?;
    let p = model.y_prob(&batch.a, &post)?;
    let q = model.y_prob(&negated(&batch.a), &post)?;
    Ok(p.iter().zip(&q).map(|(p, q)| (p - q).abs()).sum::<f64>() / ds.len() as f64)
}

/// Decoder samples under `a` and `¬a` for every source record.
#[derive(Clone, Debug, PartialEq)]
pub struct FairGenSet {
    /// Rows `2i` (factual `a`) and `2i + 1` (negated `a`) come from record `i`.
    pub dataset: TabularDataset,
    pub source: Vec<usize>,
}

/// For each record draws `u` from the posterior, then decodes `(x̂, ŷ)`
/// under `a` and under `¬a` with shared decoder noise.
pub fn build_fair_training_set(
    model: &AnyModel,
    ds: &TabularDataset,
    rng: &mut Rng,
) -> Result<FairGenSet> {
    model.check_dataset(ds)?;
    let batch = ds.full_batch();
    let n = ds.len();
    let eps = gaussian_matrix(rng, n, model.latent_dim());
    let post = model.encode(&batch, Some(&eps))?;
    let a_cf = negated(&batch.a);
    let state = rng.clone();
    let (xd0, xr0) = model.generate(&batch.a, &post, Generation::Sample, rng)?;
    let mut rng_cf = state;
    let (xd1, xr1) = model.generate(&a_cf, &post, Generation::Sample, &mut rng_cf)?;
    *rng = rng_cf;
    let p0 = model.y_prob(&batch.a, &post)?;
    let p1 = model.y_prob(&a_cf, &post)?;

    let mut xd = Matrix::zeros(2 * n, xd0.cols());
    let mut xr = Matrix::zeros(2 * n, xr0.cols());
    let mut a = Vec::with_capacity(2 * n);
    let mut y = Vec::with_capacity(2 * n);
    let mut source = Vec::with_capacity(2 * n);
    for i in 0..n {
        let t = rng.uniform();
        xd.row_mut(2 * i).copy_from_slice(xd0.row(i));
        xr.row_mut(2 * i).copy_from_slice(xr0.row(i));
        xd.row_mut(2 * i + 1).copy_from_slice(xd1.row(i));
        xr.row_mut(2 * i + 1).copy_from_slice(xr1.row(i));
        a.extend([batch.a[i], a_cf[i]]);
        y.extend([
            f64::from(u8::from(t < p0[i])),
            f64::from(u8::from(t < p1[i])),
        ]);
        source.extend([i, i]);
    }
    Ok(FairGenSet {
        dataset: ds.with_features(xd, xr, a, y)?,
        source,
    })
}

/// Decoder samples under the factual `a` for every record (one generated
/// record per source record).
pub fn generate_dataset(
    model: &AnyModel,
    ds: &TabularDataset,
    rng: &mut Rng,
) -> Result<TabularDataset> {
    model.check_dataset(ds)?;
    let batch = ds.full_batch();
    let eps = gaussian_matrix(rng, ds.len(), model.latent_dim());
    let post = model.encode(&batch, Some(&eps))?;
    let (xd, xr) = model.generate(&batch.a, &post, Generation::Sample, rng)?;
    let p = model.y_prob(&batch.a, &post)?;
    let y = p
        .iter()
        .map(|p| f64::from(u8::from(rng.uniform() < *p)))
        .collect();
    ds.with_features(xd, xr, batch.a.clone(), y)
}

/// Writes counterfactual records (with `y` thresholded from `y_prob_cf`)
/// in the dataset CSV format plus `counterfactual_of` and `y_prob_cf`
/// columns.
pub fn export_counterfactuals(
    cf: &CounterfactualBatch,
    schema: &TabularDataset,
    dir: &Path,
    stem: &str,
) -> Result<Vec<PathBuf>> {
    let y: Vec<f64> = cf
        .y_prob_cf
        .iter()
        .map(|p| f64::from(u8::from(*p >= 0.5)))
        .collect();
    let ds = schema.with_features(cf.xd_cf.clone(), cf.xr_cf.clone(), cf.a_cf.clone(), y)?;
    let provenance: Vec<f64> = (0..ds.len()).map(|i| i as f64).collect();
    ds.write_csv(
        dir,
        stem,
        &[
            ("counterfactual_of", provenance),
            ("y_prob_cf", cf.y_prob_cf.clone()),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{TrainConfig, Variant};
    use crate::data::toy;

    fn model(variant: Variant) -> (AnyModel, TabularDataset) {
        let ds = toy(12);
        let cfg = TrainConfig {
            variant,
            latent_d: 2,
            latent_r: 2,
            hidden: vec![6],
            ..TrainConfig::default()
        };
        (AnyModel::init(&ds, &cfg).unwrap(), ds)
    }

    #[test]
    fn dcevae_keeps_remainder_and_baselines_do_not() {
        for v in Variant::ALL {
            let (m, ds) = model(v);
            let cf =
                counterfactual_predict(&m, &ds.full_batch(), Abduction::Mean, &mut Rng::new(0))
                    .unwrap();
            assert_eq!(cf.a_cf, negated(&ds.a));
            if v == Variant::Dcevae {
                assert_eq!(cf.xr_cf, ds.xr);
                assert_eq!(cf.remainder_change(), 0.0);
            } else {
                assert!(cf.remainder_change() > 0.0, "{v}");
            }
        }
    }

    #[test]
    fn double_negation_recovers_factual() {
        for v in Variant::ALL {
            let (m, ds) = model(v);
            let batch = ds.full_batch();
            let posts = abduct(&m, &batch, Abduction::Mean, &mut Rng::new(0)).unwrap();
            let twice = intervene(&m, &posts, &negated(&negated(&batch.a))).unwrap();
            assert_eq!(twice, intervene(&m, &posts, &batch.a).unwrap());
        }
    }

    #[test]
    fn mean_abduction_is_deterministic() {
        let (m, ds) = model(Variant::Dcevae);
        let b = ds.full_batch();
        let x = abduct(&m, &b, Abduction::Mean, &mut Rng::new(1)).unwrap();
        let y = abduct(&m, &b, Abduction::Mean, &mut Rng::new(2)).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn floored_sigma_draws_sit_on_the_mean() {
        let (mut m, ds) = model(Variant::Dcevae);
        let AnyModel::Dcevae(p) = &mut m else {
            unreachable!()
        };
        for enc in [&mut p.enc_d, &mut p.enc_r] {
            let last = enc.layers_mut().last_mut().unwrap();
            let half = last.bias.len() / 2;
            let cols = last.weights.cols();
            last.weights.as_mut_slice()[half * cols..].fill(0.0);
            last.bias[half..].fill(-40.0);
        }
        let b = ds.full_batch();
        let draws = abduct(&m, &b, Abduction::Sample { draws: 3 }, &mut Rng::new(3)).unwrap();
        for d in draws {
            let diff = d.u.sub(&d.mu).unwrap();
            assert!(diff.as_slice().iter().all(|v| v.abs() < 1e-3));
        }
    }

    #[test]
    fn blind_outcome_decoder_has_zero_gap() {
        let (mut m, ds) = model(Variant::Cvae);
        let AnyModel::Cvae(p) = &mut m else {
            unreachable!()
        };
        let first = &mut p.nets.dec_y.layers_mut()[0];
        for r in 0..first.weights.rows() {
            first.weights[(r, 0)] = 0.0;
        }
        assert_eq!(fairness_gap(&m, &ds).unwrap(), 0.0);
        let cf = counterfactual_predict(&m, &ds.full_batch(), Abduction::Mean, &mut Rng::new(0))
            .unwrap();
        assert_eq!(cf.y_prob, cf.y_prob_cf);
    }

    #[test]
    fn fair_set_pairs() {
        let (m, ds) = model(Variant::Dcevae);
        let set = build_fair_training_set(&m, &ds, &mut Rng::new(4)).unwrap();
        assert_eq!(set.dataset.len(), 2 * ds.len());
        for i in 0..ds.len() {
            assert_eq!(set.dataset.xr.row(2 * i), set.dataset.xr.row(2 * i + 1));
            assert_eq!(set.dataset.a[2 * i], 1.0 - set.dataset.a[2 * i + 1]);
        }
    }

    #[test]
    fn export_round_trips() {
        let (m, ds) = model(Variant::Dcevae);
        let cf = counterfactual_predict(&m, &ds.full_batch(), Abduction::Mean, &mut Rng::new(0))
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_counterfactuals(&cf, &ds, dir.path(), "cf").unwrap();
        let (back, extra) = TabularDataset::read_csv(dir.path(), "cf").unwrap();
        assert_eq!(back.xr, ds.xr);
        assert_eq!(extra[0].0, "counterfactual_of");
        assert_eq!(extra[0].1[5], 5.0);
    }
}
