use serde::{Deserialize, Serialize};

use super::{
    block_score, frobenius_distance, sigma_numeric, sigma_star, LinearModelSpec, NUMERIC_TOLERANCE,
};
use crate::data::TabularDataset;
use crate::error::{Error, Result};
use crate::model::{gaussian_matrix, AnyModel};
use crate::numerics::{Matrix, Rng};

/// Sample covariance of posterior draws `[u_r, u_d]` over one group of
/// records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCovariance {
    /// `all`, `a=0` or `a=1`. The per-`a` groups are the records each
    /// CEVAE decoder sees.
    pub group: String,
    pub records: usize,
    pub sigma: Vec<Vec<f64>>,
    pub block_score: f64,
    /// `|corr(a, u_d,j)|` per `u_d` dimension (`all` group only).
    pub a_ud_abs_corr: Option<Vec<f64>>,
}

impl EmpiricalCovariance {
    pub fn mean_a_ud_abs_corr(&self) -> Option<f64> {
        self.a_ud_abs_corr
            .as_ref()
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    /// `|u_r|`
    pub n: usize,
    /// `|u_d|`
    pub m: usize,
    pub sigma_star: Option<Vec<Vec<f64>>>,
    pub sigma_numeric: Option<Vec<Vec<f64>>>,
    pub frobenius_gap: Option<f64>,
    /// Closed form and descent agree within `agreement_tolerance`.
    pub agreement: Option<bool>,
    pub agreement_tolerance: Option<f64>,
    pub empirical: Vec<EmpiricalCovariance>,
    /// Of `sigma_star` in spec mode, of the `all` group otherwise.
    pub block_score: f64,
    pub provenance: String,
    pub config_hash: Option<String>,
}

impl CovarianceReport {
    /// Closed form against the descent oracle.
    pub fn from_spec(spec: &LinearModelSpec, tolerance: f64) -> Result<Self> {
        let star = sigma_star(spec)?;
        let numeric = sigma_numeric(spec)?;
        let gap = frobenius_distance(&star, &numeric)?;
        Ok(CovarianceReport {
            n: spec.n,
            m: spec.m,
            block_score: block_score(&star, spec.n)?,
            sigma_star: Some(star.to_rows()),
            sigma_numeric: Some(numeric.to_rows()),
            frobenius_gap: Some(gap),
            agreement: Some(gap < tolerance),
            agreement_tolerance: Some(tolerance),
            empirical: Vec::new(),
            provenance: "linear".into(),
            config_hash: None,
        })
    }

    pub fn from_model(model: &AnyModel, ds: &TabularDataset, rng: &mut Rng) -> Result<Self> {
        let groups = empirical_covariance(model, ds, rng)?;
        let all = groups
            .iter()
            .find(|g| g.group == "all")
            .expect("always present");
        let d = model.latent_dim();
        let m = model_d_dim(model);
        Ok(CovarianceReport {
            n: d - m,
            m,
            block_score: all.block_score,
            empirical: groups,
            provenance: model.variant().name().into(),
            ..Default::default()
        })
    }

    /// Default tolerance for spec mode.
    pub fn default_tolerance() -> f64 {
        1e3 * NUMERIC_TOLERANCE
    }
}

fn model_d_dim(model: &AnyModel) -> usize {
    match model {
        AnyModel::Dcevae(p) => p.latent_d,
        AnyModel::Cevae(p) => p.d_split,
        AnyModel::Mcevae(p) => p.nets.d_split,
        AnyModel::Cvae(p) => p.nets.d_split,
    }
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// One posterior draw per record, reordered to `[u_r, u_d]`; covariance
/// over all records and over each value of `a`.
pub fn empirical_covariance(
    model: &AnyModel,
    ds: &TabularDataset,
    rng: &mut Rng,
) -> Result<Vec<EmpiricalCovariance>> {
    model.check_dataset(ds)?;
    let d = model.latent_dim();
    if ds.len() < d + 1 {
        return Err(Error::invalid(format!(
            "latent covariance needs at least {} records, got {}",
            d + 1,
            ds.len()
        )));
    }
    let batch = ds.full_batch();
    let eps = gaussian_matrix(rng, ds.len(), d);
    let post = model.encode(&batch, Some(&eps))?;
    let u_d = post.u_d();
    let u = Matrix::hstack(&[&post.u_r(), &u_d])?;
    let n = d - u_d.cols();

    let cov = |rows: &Matrix, group: &str| -> Result<EmpiricalCovariance> {
        let sigma = rows.covariance()?;
        Ok(EmpiricalCovariance {
            group: group.into(),
            records: rows.rows(),
            block_score: block_score(&sigma, n)?,
            sigma: sigma.to_rows(),
            a_ud_abs_corr: None,
        })
    };
    let mut all = cov(&u, "all")?;
    all.a_ud_abs_corr = Some(
        (0..u_d.cols())
            .map(|j| pearson(&ds.a, &u_d.column(j)).abs())
            .collect(),
    );
    let mut out = vec![all];
    for k in 0..2 {
        let idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.a[i] == k as f64).collect();
        if idx.len() > d {
            out.push(cov(&u.select_rows(&idx), &format!("a={k}"))?);
        }
    }
    Ok(out)
}
