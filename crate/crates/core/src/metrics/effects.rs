use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Effect restricted to the four cells of two binary conditioning columns.
/// `cells[i][j]` is `None` when no record falls in cell `(i, j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CeTable {
    pub conditioners: (String, String),
    pub cells: [[Option<f64>; 2]; 2],
    pub counts: [[usize; 2]; 2],
}

impl CeTable {
    /// Per-cell mean of `effects`; `cells[k]` is the cell of record `k`.
    pub fn from_effects(conditioners: (&str, &str), effects: &[f64], cells: &[(u8, u8)]) -> Self {
        let mut sum = [[0.0; 2]; 2];
        let mut counts = [[0usize; 2]; 2];
        for (e, &(i, j)) in effects.iter().zip(cells) {
            sum[i as usize][j as usize] += e;
            counts[i as usize][j as usize] += 1;
        }
        let mut out = [[None; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                if counts[i][j] > 0 {
                    out[i][j] = Some(sum[i][j] / counts[i][j] as f64);
                }
            }
        }
        CeTable {
            conditioners: (conditioners.0.into(), conditioners.1.into()),
            cells: out,
            counts,
        }
    }

    /// `Σ |o_ij − o*_ij| / 4` over cells present in both tables.
    pub fn error_against(&self, reference: &CeTable) -> Result<f64> {
        let mut total = 0.0;
        let mut used = 0;
        for i in 0..2 {
            for j in 0..2 {
                if let (Some(o), Some(r)) = (self.cells[i][j], reference.cells[i][j]) {
                    total += (o - r).abs();
                    used += 1;
                }
            }
        }
        if used == 0 {
            return Err(Error::invalid("no CE cell is populated in both tables"));
        }
        Ok(total / 4.0)
    }

    /// Cells that are empty in either table.
    pub fn empty_cells(&self, reference: &CeTable) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                if self.cells[i][j].is_none() || reference.cells[i][j].is_none() {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Largest per-cell absolute difference over cells present in both.
    pub fn max_cell_error(&self, reference: &CeTable) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                if let (Some(o), Some(r)) = (self.cells[i][j], reference.cells[i][j]) {
                    m = m.max((o - r).abs());
                }
            }
        }
        m
    }
}

use crate::data::TabularDataset;
use crate::model::AnyModel;

fn check_both_groups(a: &[f64]) -> Result<()> {
    let ones = a.iter().filter(|v| **v == 1.0).count();
    if ones == 0 || ones == a.len() {
        return Err(Error::invalid(
            "a takes a single value; the effect is undefined",
        ));
    }
    Ok(())
}

/// `P̂(y = 1 | a = 1) − P̂(y = 1 | a = 0)` over the given records.
fn conditional_difference(a: &[f64], y: &[f64], idx: impl Iterator<Item = usize>) -> Option<f64> {
    let (mut n1, mut s1, mut n0, mut s0) = (0usize, 0.0, 0usize, 0.0);
    for i in idx {
        if a[i] == 1.0 {
            n1 += 1;
            s1 += y[i];
        } else {
            n0 += 1;
            s0 += y[i];
        }
    }
    (n1 > 0 && n0 > 0).then(|| s1 / n1 as f64 - s0 / n0 as f64)
}

/// Observational total effect of a dataset.
pub fn total_effect_real(ds: &TabularDataset) -> Result<f64> {
    check_both_groups(&ds.a)?;
    Ok(conditional_difference(&ds.a, &ds.y, 0..ds.len()).expect("both groups present"))
}

/// Cell of every record for two binary conditioning columns.
pub fn conditioning_cells(
    ds: &TabularDataset,
    conditioners: (&str, &str),
) -> Result<Vec<(u8, u8)>> {
    let c0 = ds.binary_column(conditioners.0)?;
    let c1 = ds.binary_column(conditioners.1)?;
    Ok(c0.into_iter().zip(c1).collect())
}

/// Observational total effect within each conditioning cell. A cell
/// lacking either value of `a` is left empty.
pub fn ce_table_real(ds: &TabularDataset, conditioners: (&str, &str)) -> Result<CeTable> {
    check_both_groups(&ds.a)?;
    let cells = conditioning_cells(ds, conditioners)?;
    let mut table = CeTable {
        conditioners: (conditioners.0.into(), conditioners.1.into()),
        cells: [[None; 2]; 2],
        counts: [[0; 2]; 2],
    };
    for i in 0..2u8 {
        for j in 0..2u8 {
            let idx: Vec<usize> = (0..ds.len()).filter(|&k| cells[k] == (i, j)).collect();
            table.counts[i as usize][j as usize] = idx.len();
            table.cells[i as usize][j as usize] =
                conditional_difference(&ds.a, &ds.y, idx.into_iter());
        }
    }
    Ok(table)
}

/// Per-record `p(y | do(a = 1), û) − p(y | do(a = 0), û)` at the posterior
/// mean.
pub fn model_effects(model: &AnyModel, ds: &TabularDataset) -> Result<Vec<f64>> {
    model.check_dataset(ds)?;
    let batch = ds.full_batch();
    let post = model.encode(&batch, None)?;
    let p1 = model.y_prob(&vec![1.0; ds.len()], &post)?;
    let p0 = model.y_prob(&vec![0.0; ds.len()], &post)?;
    Ok(p1.iter().zip(&p0).map(|(a, b)| a - b).collect())
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn total_effect_model(model: &AnyModel, ds: &TabularDataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::invalid("empty evaluation set"));
    }
    Ok(mean(&model_effects(model, ds)?))
}

pub fn ce_table_model(
    model: &AnyModel,
    ds: &TabularDataset,
    conditioners: (&str, &str),
) -> Result<CeTable> {
    let effects = model_effects(model, ds)?;
    let cells = conditioning_cells(ds, conditioners)?;
    Ok(CeTable::from_effects(conditioners, &effects, &cells))
}
