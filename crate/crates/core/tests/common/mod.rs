#![allow(dead_code)]

pub mod grad;

use dcevae::data::{generate_scm, ScmSpec, TabularDataset};
use dcevae::numerics::Params;

pub const FD_STEP: f64 = 1e-4;

/// Largest `|analytic − numeric| / max(|analytic|, |numeric|, 1e-3)` over
/// every parameter, with central differences of `loss`.
pub fn max_rel_error<P: Params + Clone>(
    params: &P,
    analytic: &[f64],
    loss: impl Fn(&P) -> f64,
) -> f64 {
    let base = params.flatten();
    assert_eq!(base.len(), analytic.len());
    let mut q = params.clone();
    let mut worst: f64 = 0.0;
    for k in 0..base.len() {
        let mut v = base.clone();
        v[k] = base[k] + FD_STEP;
        q.assign(&v).unwrap();
        let fp = loss(&q);
        v[k] = base[k] - FD_STEP;
        q.assign(&v).unwrap();
        let fm = loss(&q);
        let numeric = (fp - fm) / (2.0 * FD_STEP);
        let a = analytic[k];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
        worst = worst.max(rel);
    }
    worst
}

pub fn scm_dataset(n: usize, seed: u64) -> TabularDataset {
    let spec = ScmSpec {
        seed,
        ..ScmSpec::default()
    };
    generate_scm(&spec, n).unwrap().dataset
}
