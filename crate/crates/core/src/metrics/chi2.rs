use crate::data::{ColumnKind, TabularDataset};
use crate::error::{Error, Result};

const QUANTILE_BINS: usize = 10;

/// Bin index of every record for one column.
enum Binning {
    Categories(usize),
    /// Inner edges; bin `k` holds values with exactly `k` edges `<= v`.
    Edges(Vec<f64>),
}

fn quantile_edges(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    (1..QUANTILE_BINS)
        .map(|k| sorted[((k * n) / QUANTILE_BINS).min(n - 1)])
        .collect()
}

fn histogram(values: &[usize], bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    for &v in values {
        h[v] += 1.0;
    }
    let n = values.len() as f64;
    h.iter_mut().for_each(|c| *c /= n);
    h
}

/// `Σ (p − q)² / (p + q)` over bins that are non-empty in either histogram.
pub fn chi_square(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, b)| *a + *b > 0.0)
        .map(|(a, b)| (a - b) * (a - b) / (a + b))
        .sum()
}

/// Per-column χ² between a generated and a real dataset, in the order
/// `a`, `y`, x_d columns, x_r columns. Continuous columns use ten
/// equal-frequency bins fitted on `real`; categorical columns use the
/// argmax category and binary columns a 0.5 threshold.
pub fn chi_square_columns(
    generated: &TabularDataset,
    real: &TabularDataset,
) -> Result<Vec<(String, f64)>> {
    if generated.partition != real.partition
        || generated.xd_layout() != real.xd_layout()
        || generated.xr_layout() != real.xr_layout()
    {
        return Err(Error::invalid("χ² needs datasets with the same schema"));
    }
    if generated.is_empty() || real.is_empty() {
        return Err(Error::invalid("χ² needs non-empty datasets"));
    }
    let binary = |v: &[f64]| v.iter().map(|x| usize::from(*x >= 0.5)).collect::<Vec<_>>();
    let mut out = vec![
        (
            real.partition.sensitive.clone(),
            chi_square(
                &histogram(&binary(&generated.a), 2),
                &histogram(&binary(&real.a), 2),
            ),
        ),
        (
            real.partition.outcome.clone(),
            chi_square(
                &histogram(&binary(&generated.y), 2),
                &histogram(&binary(&real.y), 2),
            ),
        ),
    ];
    let names: Vec<String> = real
        .partition
        .descendants
        .iter()
        .chain(&real.partition.remainder)
        .cloned()
        .collect();
    for name in names {
        let (enc, real_vals) = real.column(&name)?;
        let (_, gen_vals) = generated.column(&name)?;
        let binning = match &enc.kind {
            ColumnKind::Binary => Binning::Categories(2),
            ColumnKind::Categorical { categories } => Binning::Categories(categories.len()),
            ColumnKind::Continuous { .. } => Binning::Edges(quantile_edges(
                &real_vals.iter().map(|v| v[0]).collect::<Vec<_>>(),
            )),
        };
        let assign = |vals: &[&[f64]]| -> Vec<usize> {
            vals.iter()
                .map(|v| match (&binning, &enc.kind) {
                    (Binning::Categories(_), ColumnKind::Binary) => usize::from(v[0] >= 0.5),
                    (Binning::Categories(_), _) => crate::data::argmax(v),
                    (Binning::Edges(e), _) => e.iter().filter(|x| **x <= v[0]).count(),
                })
                .collect()
        };
        let bins = match &binning {
            Binning::Categories(k) => *k,
            Binning::Edges(e) => e.len() + 1,
        };
        let p = histogram(&assign(&gen_vals), bins);
        let q = histogram(&assign(&real_vals), bins);
        out.push((name, chi_square(&p, &q)));
    }
    Ok(out)
}

/// Mean per-column χ².
pub fn chi_square_distance(generated: &TabularDataset, real: &TabularDataset) -> Result<f64> {
    let cols = chi_square_columns(generated, real)?;
    Ok(cols.iter().map(|(_, v)| v).sum::<f64>() / cols.len() as f64)
}
