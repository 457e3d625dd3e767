use serde::{Deserialize, Serialize};

use super::chi2::chi_square_distance;
use super::classifier::{train_eval_classifier, ClassifierKind};
use super::effects::{
    ce_table_model, ce_table_real, total_effect_model, total_effect_real, CeTable,
};
use crate::counterfactual::generate_dataset;
use crate::data::TabularDataset;
use crate::error::Result;
use crate::model::AnyModel;
use crate::numerics::Rng;

/// One row of the effect table. `ce[i][j]` is indexed by the values of the
/// two conditioning columns; an empty cell is `null` and listed in
/// `empty_cells`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectReport {
    pub te: f64,
    pub ce: [[Option<f64>; 2]; 2],
    pub ce_error: Option<f64>,
    pub chi2: Option<f64>,
    pub lr_acc: f64,
    pub svm_acc: f64,
    /// `real` or the model variant.
    pub provenance: String,
    pub config_hash: Option<String>,
    pub conditioners: (String, String),
    pub ce_counts: [[usize; 2]; 2],
    pub empty_cells: Vec<(usize, usize)>,
}

impl EffectReport {
    fn assemble(
        table: CeTable,
        te: f64,
        reference: Option<&CeTable>,
        chi2: Option<f64>,
        accs: (f64, f64),
        provenance: String,
        config_hash: Option<String>,
    ) -> Result<Self> {
        let (ce_error, empty_cells) = match reference {
            Some(r) => (Some(table.error_against(r)?), table.empty_cells(r)),
            None => (None, table.empty_cells(&table)),
        };
        Ok(EffectReport {
            te,
            ce: table.cells,
            ce_error,
            chi2,
            lr_acc: accs.0,
            svm_acc: accs.1,
            provenance,
            config_hash,
            conditioners: table.conditioners,
            ce_counts: table.counts,
            empty_cells,
        })
    }

    /// Observational effects on `train ∪ test` (`all`), classifiers fitted
    /// on `train` and scored on `test`.
    pub fn real(
        all: &TabularDataset,
        train: &TabularDataset,
        test: &TabularDataset,
        conditioners: (&str, &str),
        reference: Option<&CeTable>,
    ) -> Result<Self> {
        let te = total_effect_real(all)?;
        let table = ce_table_real(all, conditioners)?;
        let accs = (
            train_eval_classifier(ClassifierKind::Logistic, train, test)?,
            train_eval_classifier(ClassifierKind::Svm, train, test)?,
        );
        Self::assemble(table, te, reference, None, accs, "real".into(), None)
    }

    /// Model effects on `test`; χ² between data generated from `test` and
    /// `test`; classifiers fitted on data generated from `train` and scored
    /// on the real `test`.
    #[allow(clippy::too_many_arguments)]
    pub fn model(
        model: &AnyModel,
        train: &TabularDataset,
        test: &TabularDataset,
        conditioners: (&str, &str),
        reference: &CeTable,
        config_hash: Option<String>,
        rng: &mut Rng,
    ) -> Result<Self> {
        let te = total_effect_model(model, test)?;
        let table = ce_table_model(model, test, conditioners)?;
        let generated_test = generate_dataset(model, test, rng)?;
        let chi2 = chi_square_distance(&generated_test, test)?;
        let generated_train = generate_dataset(model, train, rng)?;
        let accs = (
            train_eval_classifier(ClassifierKind::Logistic, &generated_train, test)?,
            train_eval_classifier(ClassifierKind::Svm, &generated_train, test)?,
        );
        Self::assemble(
            table,
            te,
            Some(reference),
            Some(chi2),
            accs,
            model.variant().name().into(),
            config_hash,
        )
    }
}
