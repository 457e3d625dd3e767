mod common;

use common::scm_dataset;
use dcevae::config::{TrainConfig, Variant};
use dcevae::counterfactual::{counterfactual_predict, Abduction};
use dcevae::data::SCM_CONDITIONERS;
use dcevae::metrics::{
    ce_table_model, ce_table_real, chi_square, chi_square_distance, total_effect_model,
    total_effect_real,
};
use dcevae::model::AnyModel;
use dcevae::numerics::Rng;
use dcevae::theory::{
    block_score, frobenius_distance, min_eigenvalue, sigma_numeric, sigma_star, LinearModelSpec,
};
use proptest::prelude::*;

fn small_config(variant: Variant, seed: u64) -> TrainConfig {
    TrainConfig {
        variant,
        latent_d: 2,
        latent_r: 2,
        hidden: vec![8],
        seed,
        ..TrainConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn real_metrics_ignore_record_order(data_seed in 0u64..1000, perm_seed in 0u64..1000) {
        let ds = scm_dataset(300, data_seed);
        let shuffled = ds.subset(&Rng::new(perm_seed).permutation(ds.len()));
        let te = total_effect_real(&ds).unwrap();
        let te_s = total_effect_real(&shuffled).unwrap();
        prop_assert!((te - te_s).abs() < 1e-12);
        let ce = ce_table_real(&ds, SCM_CONDITIONERS).unwrap();
        let ce_s = ce_table_real(&shuffled, SCM_CONDITIONERS).unwrap();
        prop_assert_eq!(ce.counts, ce_s.counts);
        for i in 0..2 {
            for j in 0..2 {
                match (ce.cells[i][j], ce_s.cells[i][j]) {
                    (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
                    (x, y) => prop_assert_eq!(x, y),
                }
            }
        }
        prop_assert!(chi_square_distance(&shuffled, &ds).unwrap().abs() < 1e-12);
    }

    #[test]
    fn chi_square_is_symmetric_and_zero_on_itself(
        raw in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..20),
    ) {
        let norm = |v: Vec<f64>| {
            let s: f64 = v.iter().sum();
            if s == 0.0 { v } else { v.into_iter().map(|x| x / s).collect::<Vec<_>>() }
        };
        let p = norm(raw.iter().map(|r| r.0).collect());
        let q = norm(raw.iter().map(|r| r.1).collect());
        prop_assert!((chi_square(&p, &q) - chi_square(&q, &p)).abs() < 1e-12);
        prop_assert_eq!(chi_square(&p, &p), 0.0);
        prop_assert!(chi_square(&p, &q) >= 0.0);
        prop_assert!(chi_square(&p, &q) <= 2.0 + 1e-12);
    }

    #[test]
    fn closed_form_covariance_is_spd_and_matches_the_oracle(
        n in 1usize..=5,
        m in 1usize..=5,
        beta in prop_oneof![Just(0.0), 0.0f64..10.0, Just(1e6)],
        seed in 0u64..10_000,
    ) {
        let spec = LinearModelSpec::random(n, m, beta, &mut Rng::new(seed)).unwrap();
        let s = sigma_star(&spec).unwrap();
        let d = n + m;
        for i in 0..d {
            for j in 0..d {
                prop_assert!((s[(i, j)] - s[(j, i)]).abs() <= 1e-12 * s[(i, i)].abs().max(1.0));
            }
        }
        prop_assert!(min_eigenvalue(&s).unwrap() > 0.0);
        let numeric = sigma_numeric(&spec).unwrap();
        prop_assert!(frobenius_distance(&s, &numeric).unwrap() <= 1e-6);
        let score = block_score(&s, n).unwrap();
        prop_assert!((0.0..=1.0).contains(&score));
    }

    #[test]
    fn dcevae_counterfactual_keeps_remainder_exactly(seed in 0u64..1000) {
        let ds = scm_dataset(64, seed);
        let model = AnyModel::init(&ds, &small_config(Variant::Dcevae, seed)).unwrap();
        let mut rng = Rng::new(seed);
        let batch = ds.full_batch();
        for mode in [Abduction::Mean, Abduction::Sample { draws: 3 }] {
            let cf = counterfactual_predict(&model, &batch, mode, &mut rng).unwrap();
            prop_assert_eq!(cf.remainder_change(), 0.0);
            prop_assert_eq!(cf.xr_cf.as_slice(), batch.xr.as_slice());
        }
    }

    #[test]
    fn model_total_effect_is_the_count_weighted_ce(seed in 0u64..1000, v in 0usize..4) {
        let ds = scm_dataset(120, seed);
        let model = AnyModel::init(&ds, &small_config(Variant::ALL[v], seed)).unwrap();
        let te = total_effect_model(&model, &ds).unwrap();
        let ce = ce_table_model(&model, &ds, SCM_CONDITIONERS).unwrap();
        let mut weighted = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                if let Some(c) = ce.cells[i][j] {
                    weighted += c * ce.counts[i][j] as f64;
                }
            }
        }
        prop_assert!((te - weighted / ds.len() as f64).abs() < 1e-12);
    }
}

#[test]
fn baselines_change_the_remainder() {
    let ds = scm_dataset(64, 5);
    for variant in [Variant::Cevae, Variant::Mcevae, Variant::Cvae] {
        let model = AnyModel::init(&ds, &small_config(variant, 5)).unwrap();
        let cf =
            counterfactual_predict(&model, &ds.full_batch(), Abduction::Mean, &mut Rng::new(1))
                .unwrap();
        assert!(cf.remainder_change() > 0.0, "{variant:?}");
    }
}
