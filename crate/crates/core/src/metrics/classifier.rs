use serde::{Deserialize, Serialize};

use crate::data::TabularDataset;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    /// Logistic regression.
    Logistic,
    /// Linear SVM on the L2-regularized hinge loss.
    Svm,
}

/// Full-batch gradient descent settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    /// L2 weight; only the SVM objective uses it.
    pub l2: f64,
}

impl ClassifierConfig {
    pub fn default_for(kind: ClassifierKind) -> Self {
        match kind {
            ClassifierKind::Logistic => ClassifierConfig {
                iterations: 2000,
                learning_rate: 0.5,
                l2: 0.0,
            },
            ClassifierKind::Svm => ClassifierConfig {
                iterations: 2000,
                learning_rate: 0.1,
                l2: 1e-4,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub kind: ClassifierKind,
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// `[a, x_d, x_r]` per record.
pub fn classifier_features(ds: &TabularDataset) -> Result<Matrix> {
    Matrix::hstack(&[&Matrix::column_vector(&ds.a), &ds.xd, &ds.xr])
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LinearClassifier {
    pub fn fit(
        kind: ClassifierKind,
        cfg: &ClassifierConfig,
        x: &Matrix,
        y: &[f64],
    ) -> Result<Self> {
        if x.rows() != y.len() || y.is_empty() {
            return Err(Error::shape(
                "classifier fit",
                format!("{} labels", x.rows()),
                format!("{}", y.len()),
            ));
        }
        if y.iter().any(|v| *v != 0.0 && *v != 1.0) {
            return Err(Error::invalid("classifier labels must be 0 or 1"));
        }
        let ones = y.iter().filter(|v| **v == 1.0).count();
        if ones == 0 || ones == y.len() {
            return Err(Error::invalid("classifier training set has a single class"));
        }
        let (n, d) = x.shape();
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut gw = vec![0.0; d];
        for _ in 0..cfg.iterations {
            gw.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0;
            for (i, &yi) in y.iter().enumerate() {
                let row = x.row(i);
                let z = b + row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
                let r = match kind {
                    ClassifierKind::Logistic => sigmoid(z) - yi,
                    ClassifierKind::Svm => {
                        let t = 2.0 * yi - 1.0;
                        if t * z < 1.0 {
                            -t
                        } else {
                            0.0
                        }
                    }
                };
                if r != 0.0 {
                    for (g, v) in gw.iter_mut().zip(row) {
                        *g += r * v;
                    }
                    gb += r;
                }
            }
            for (wj, g) in w.iter_mut().zip(&gw) {
                *wj -= cfg.learning_rate * (g / n as f64 + cfg.l2 * *wj);
            }
            b -= cfg.learning_rate * gb / n as f64;
        }
        if w.iter().any(|v| !v.is_finite()) || !b.is_finite() {
            return Err(Error::NonFinite {
                component: "classifier weights".into(),
                epoch: None,
            });
        }
        Ok(LinearClassifier {
            kind,
            weights: w,
            bias: b,
        })
    }

    pub fn decision(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.weights.len() {
            return Err(Error::shape(
                "classifier input",
                format!("{} columns", self.weights.len()),
                format!("{}", x.cols()),
            ));
        }
        Ok((0..x.rows())
            .map(|i| {
                self.bias
                    + x.row(i)
                        .iter()
                        .zip(&self.weights)
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
            })
            .collect())
    }

    pub fn accuracy(&self, x: &Matrix, y: &[f64]) -> Result<f64> {
        let z = self.decision(x)?;
        if z.is_empty() || z.len() != y.len() {
            return Err(Error::invalid("accuracy needs one label per non-empty row"));
        }
        let hits = z
            .iter()
            .zip(y)
            .filter(|(z, y)| (**z >= 0.0) == (**y == 1.0))
            .count();
        Ok(hits as f64 / y.len() as f64)
    }
}

/// Fits on `train`, returns accuracy on `test`.
pub fn train_eval_classifier(
    kind: ClassifierKind,
    train: &TabularDataset,
    test: &TabularDataset,
) -> Result<f64> {
    let clf = LinearClassifier::fit(
        kind,
        &ClassifierConfig::default_for(kind),
        &classifier_features(train)?,
        &train.y,
    )?;
    clf.accuracy(&classifier_features(test)?, &test.y)
}
