//! Analytic gradients of every assembled loss against central finite
//! differences on randomized 4-record instances. Each check returns the
//! worst relative error over three seeds.

use super::{max_rel_error, scm_dataset};
use dcevae::baselines::{CevaeParams, CvaeParams, McevaeNoise, McevaeParams};
use dcevae::config::{TrainConfig, Variant};
use dcevae::data::Batch;
use dcevae::dcevae::{DcevaeNoise, DcevaeParams, LossWeights};
use dcevae::model::AnyModel;
use dcevae::numerics::{Matrix, Mlp, Params, Rng};

const SEEDS: [u64; 3] = [0, 1, 2];

fn small_config(variant: Variant, seed: u64) -> TrainConfig {
    TrainConfig {
        variant,
        latent_d: 2,
        latent_r: 3,
        hidden: vec![5],
        seed,
        ..TrainConfig::default()
    }
}

/// Four records with both values of `a` present.
fn batch(seed: u64) -> Batch {
    let ds = scm_dataset(40, seed);
    let ones: Vec<usize> = (0..ds.len()).filter(|&i| ds.a[i] == 1.0).take(2).collect();
    let zeros: Vec<usize> = (0..ds.len()).filter(|&i| ds.a[i] == 0.0).take(2).collect();
    ds.batch(&[ones[0], zeros[0], ones[1], zeros[1]])
}

fn noise(seed: u64, cols: usize) -> Matrix {
    let mut rng = Rng::new(seed + 1000);
    Matrix::from_vec(4, cols, rng.gaussian_vec(4 * cols).unwrap()).unwrap()
}

fn dcevae_instance(seed: u64) -> (DcevaeParams, Batch, DcevaeNoise) {
    let ds = scm_dataset(40, seed);
    let AnyModel::Dcevae(p) = AnyModel::init(&ds, &small_config(Variant::Dcevae, seed)).unwrap()
    else {
        unreachable!()
    };
    let n = DcevaeNoise::draw(&mut Rng::new(seed + 7), 4, 2, 3);
    (p, batch(seed), n)
}

pub fn dcevae_total_loss() -> f64 {
    let mut worst: f64 = 0.0;
    for seed in SEEDS {
        let (p, batch, noise) = dcevae_instance(seed);
        let w = LossWeights {
            beta_tc: 1.7,
            beta_f: 2.3,
        };
        let mut g = p.zeros_like();
        p.loss_and_grad(&batch, &noise, w, &mut g).unwrap();
        let err = max_rel_error(&p, &g.flatten(), |q: &DcevaeParams| {
            q.loss(&batch, &noise, w).unwrap().total
        });
        worst = worst.max(err);
    }
    worst
}

pub fn dcevae_plain_elbo() -> f64 {
    let mut worst: f64 = 0.0;
    for seed in SEEDS {
        let (p, batch, noise) = dcevae_instance(seed);
        let w = LossWeights {
            beta_tc: 0.0,
            beta_f: 0.0,
        };
        let mut g = p.zeros_like();
        p.loss_and_grad(&batch, &noise, w, &mut g).unwrap();
        let err = max_rel_error(&p, &g.flatten(), |q: &DcevaeParams| {
            q.loss(&batch, &noise, w).unwrap().total
        });
        worst = worst.max(err);
    }
    worst
}

pub fn fairness_term() -> f64 {
    let mut worst: f64 = 0.0;
    for seed in SEEDS {
        let (p, batch, noise) = dcevae_instance(seed);
        let w = LossWeights {
            beta_tc: 0.0,
            beta_f: 1.0,
        };
        let base = LossWeights {
            beta_tc: 0.0,
            beta_f: 0.0,
        };
        let mut g1 = p.zeros_like();
        let mut g0 = p.zeros_like();
        p.loss_and_grad(&batch, &noise, w, &mut g1).unwrap();
        p.loss_and_grad(&batch, &noise, base, &mut g0).unwrap();
        let diff: Vec<f64> = g1
            .flatten()
            .iter()
            .zip(g0.flatten())
            .map(|(a, b)| a - b)
            .collect();
        let err = max_rel_error(&p, &diff, |q: &DcevaeParams| {
            q.loss(&batch, &noise, w).unwrap().fair
        });
        worst = worst.max(err);
    }
    worst
}

pub fn discriminator_objective() -> f64 {
    let mut worst: f64 = 0.0;
    for seed in SEEDS {
        let (p, batch, noise) = dcevae_instance(seed);
        let post = p.encode(&batch, Some(&noise)).unwrap();
        let perm = vec![2, 0, 3, 1];
        let mut g = p.disc.zeros_like();
        p.disc_objective_and_grad(&post, &batch.a, &perm, &mut g)
            .unwrap();
        let err = max_rel_error(&p.disc, &g.flatten(), |d: &Mlp| {
            let mut q = p.clone();
            q.disc = d.clone();
            q.tc_loss(&post, &batch.a, &perm).unwrap().1
        });
        worst = worst.max(err);
    }
    worst
}

pub fn cevae_loss() -> f64 {
    let mut worst: f64 = 0.0;
    for seed in SEEDS {
        let ds = scm_dataset(40, seed);
        let p = CevaeParams::for_dataset(&ds, &small_config(Variant::Cevae, seed)).unwrap();
        let (b, eps) = (batch(seed), noise(seed, 5));
        let mut g = p.zeros_like();
        p.loss_and_grad(&b, &eps, &mut g).unwrap();
        let err = max_rel_error(&p, &g.flatten(), |q: &CevaeParams| {
            q.loss(&b, &eps).unwrap().total
        });
        worst = worst.max(err);
    }
    worst
}

pub fn mcevae_loss() -> f64 {
    let mut worst: f64 = 0.0;
    for seed in SEEDS {
        let ds = scm_dataset(40, seed);
        let cfg = TrainConfig {
            lambda_x: 0.8,
            lambda_y: 1.4,
            lambda_1: 2.0,
            lambda_2: 3.0,
            ..small_config(Variant::Mcevae, seed)
        };
        let p = McevaeParams::for_dataset(&ds, &cfg).unwrap();
        let b = batch(seed);
        let n = McevaeNoise {
            eps: noise(seed, 5),
            prior: noise(seed + 50, 5),
        };
        let mut g = p.zeros_like();
        p.loss_and_grad(&b, &n, &mut g).unwrap();
        let err = max_rel_error(&p, &g.flatten(), |q: &McevaeParams| {
            q.loss(&b, &n).unwrap().total
        });
        worst = worst.max(err);
    }
    worst
}

pub fn cvae_loss() -> f64 {
    let mut worst: f64 = 0.0;
    for seed in SEEDS {
        let ds = scm_dataset(40, seed);
        let p = CvaeParams::for_dataset(&ds, &small_config(Variant::Cvae, seed)).unwrap();
        let (b, eps) = (batch(seed), noise(seed, 5));
        let mut g = p.zeros_like();
        p.loss_and_grad(&b, &eps, &mut g).unwrap();
        let err = max_rel_error(&p, &g.flatten(), |q: &CvaeParams| {
            q.loss(&b, &eps).unwrap().total
        });
        worst = worst.max(err);
    }
    worst
}

/// A named check returning its worst relative error.
pub type GradCheck = (&'static str, fn() -> f64);

pub const CHECKS: [GradCheck; 7] = [
    ("dcevae_total_loss", dcevae_total_loss),
    ("dcevae_plain_elbo", dcevae_plain_elbo),
    ("fairness_term", fairness_term),
    ("discriminator_objective", discriminator_objective),
    ("cevae_loss", cevae_loss),
    ("mcevae_loss", mcevae_loss),
    ("cvae_loss", cvae_loss),
];
