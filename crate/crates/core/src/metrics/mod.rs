//! Total and counterfactual effects, χ² distance between datasets and the
//! downstream linear classifiers.

mod chi2;
mod classifier;
mod effects;
mod report;

pub use chi2::{chi_square, chi_square_columns, chi_square_distance};
pub use classifier::{
    classifier_features, train_eval_classifier, ClassifierConfig, ClassifierKind, LinearClassifier,
};
pub use effects::{
    ce_table_model, ce_table_real, conditioning_cells, mean, model_effects, total_effect_model,
    total_effect_real, CeTable,
};
pub use report::EffectReport;
