//! UCI Adult ingestion.
//!
//! Rows with a `?` anywhere are dropped. `fnlwgt` and the string
//! `education` column are not used (`education-num` carries the same
//! information). Race and native country are binarized (White /
//! United-States = 1), sex is Male = 1, income is `>50K` = 1, the five
//! numeric columns are standardized and the remaining categoricals are
//! one-hot encoded.

use std::fs;
use std::path::Path;

use super::dataset::TabularDataset;
use super::schema::{AttributePartition, ColumnEncoding, RawValue};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Binary columns that index the CE table on Adult.
pub const ADULT_CONDITIONERS: (&str, &str) = ("race", "native-country");

pub const ADULT_COLUMNS: [&str; 15] = [
    "age",
    "workclass",
    "fnlwgt",
    "education",
    "education-num",
    "marital-status",
    "occupation",
    "relationship",
    "race",
    "sex",
    "capital-gain",
    "capital-loss",
    "hours-per-week",
    "native-country",
    "income",
];

const WORKCLASS: &[&str] = &[
    "Private",
    "Self-emp-not-inc",
    "Self-emp-inc",
    "Federal-gov",
    "Local-gov",
    "State-gov",
    "Without-pay",
    "Never-worked",
];
const MARITAL: &[&str] = &[
    "Married-civ-spouse",
    "Divorced",
    "Never-married",
    "Separated",
    "Widowed",
    "Married-spouse-absent",
    "Married-AF-spouse",
];
const OCCUPATION: &[&str] = &[
    "Tech-support",
    "Craft-repair",
    "Other-service",
    "Sales",
    "Exec-managerial",
    "Prof-specialty",
    "Handlers-cleaners",
    "Machine-op-inspct",
    "Adm-clerical",
    "Farming-fishing",
    "Transport-moving",
    "Priv-house-serv",
    "Protective-serv",
    "Armed-Forces",
];
const RELATIONSHIP: &[&str] = &[
    "Wife",
    "Own-child",
    "Husband",
    "Not-in-family",
    "Other-relative",
    "Unmarried",
];
const RACE: &[&str] = &[
    "White",
    "Asian-Pac-Islander",
    "Amer-Indian-Eskimo",
    "Other",
    "Black",
];

#[derive(Clone, Copy)]
enum Field {
    Continuous,
    Categorical(&'static [&'static str]),
    /// `positive` maps to 1; `valid` (if given) lists every accepted value.
    Binary {
        positive: &'static str,
        valid: Option<&'static [&'static str]>,
    },
    Unused,
}

fn field(name: &str) -> Field {
    match name {
        "age" | "education-num" | "capital-gain" | "capital-loss" | "hours-per-week" => {
            Field::Continuous
        }
        "workclass" => Field::Categorical(WORKCLASS),
        "marital-status" => Field::Categorical(MARITAL),
        "occupation" => Field::Categorical(OCCUPATION),
        "relationship" => Field::Categorical(RELATIONSHIP),
        "race" => Field::Binary {
            positive: "White",
            valid: Some(RACE),
        },
        "sex" => Field::Binary {
            positive: "Male",
            valid: Some(&["Male", "Female"]),
        },
        "income" => Field::Binary {
            positive: ">50K",
            valid: Some(&[">50K", "<=50K"]),
        },
        "native-country" => Field::Binary {
            positive: "United-States",
            valid: None,
        },
        _ => Field::Unused,
    }
}

fn column_index(name: &str) -> Result<usize> {
    ADULT_COLUMNS
        .iter()
        .position(|c| *c == name)
        .ok_or_else(|| Error::invalid(format!("`{name}` is not an Adult column")))
}

fn parse_value(path: &Path, line: usize, name: &str, text: &str) -> Result<RawValue> {
    let err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        column: name.to_string(),
        message,
    };
    match field(name) {
        Field::Continuous => text
            .parse::<f64>()
            .map(RawValue::Number)
            .map_err(|e| err(format!("`{text}`: {e}"))),
        Field::Categorical(cats) => {
            if cats.contains(&text) {
                Ok(RawValue::Text(text.to_string()))
            } else {
                Err(err(format!("unknown category `{text}`")))
            }
        }
        Field::Binary { positive, valid } => {
            if let Some(v) = valid {
                if !v.contains(&text) {
                    return Err(err(format!("unknown category `{text}`")));
                }
            }
            Ok(RawValue::Number(if text == positive { 1.0 } else { 0.0 }))
        }
        Field::Unused => Err(err("column is not used by the encoder".into())),
    }
}

fn encoding_for(name: &str, values: &[RawValue]) -> Result<ColumnEncoding> {
    match field(name) {
        Field::Continuous => {
            let nums: Vec<f64> = values
                .iter()
                .map(|v| match v {
                    RawValue::Number(x) => *x,
                    RawValue::Text(_) => unreachable!("parsed as number"),
                })
                .collect();
            Ok(ColumnEncoding::continuous(name, &nums))
        }
        Field::Categorical(cats) => {
            ColumnEncoding::categorical(name, cats.iter().map(|s| s.to_string()).collect())
        }
        Field::Binary { .. } => Ok(ColumnEncoding::binary(name)),
        Field::Unused => Err(Error::invalid(format!("column `{name}` is not used"))),
    }
}

/// Reads a comma-separated Adult file (the training file or the test file,
/// whose labels carry a trailing `.`).
pub fn ingest_adult(path: &Path, partition: &AttributePartition) -> Result<TabularDataset> {
    partition.validate()?;
    for name in [&partition.sensitive, &partition.outcome] {
        if !matches!(field(name), Field::Binary { .. }) {
            return Err(Error::invalid(format!(
                "`{name}` is not a binary Adult column"
            )));
        }
    }
    let features: Vec<&String> = partition
        .descendants
        .iter()
        .chain(&partition.remainder)
        .collect();
    for name in &features {
        column_index(name)?;
        if matches!(field(name), Field::Unused) {
            return Err(Error::invalid(format!(
                "column `{name}` is not used by the encoder"
            )));
        }
    }

    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let a_idx = column_index(&partition.sensitive)?;
    let y_idx = column_index(&partition.outcome)?;
    let f_idx: Vec<usize> = features
        .iter()
        .map(|n| column_index(n))
        .collect::<Result<_>>()?;

    let mut a = Vec::new();
    let mut y = Vec::new();
    let mut cols: Vec<Vec<RawValue>> = vec![Vec::new(); features.len()];
    for (ln, raw_line) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('|') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(',')
            .map(|f| f.trim().trim_end_matches('.'))
            .collect();
        if fields.len() != ADULT_COLUMNS.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                column: "*".into(),
                message: format!(
                    "expected {} fields, found {}",
                    ADULT_COLUMNS.len(),
                    fields.len()
                ),
            });
        }
        if fields.contains(&"?") {
            continue;
        }
        let num = |idx: usize, name: &str| -> Result<f64> {
            match parse_value(path, line_no, name, fields[idx])? {
                RawValue::Number(v) => Ok(v),
                RawValue::Text(_) => unreachable!("binary columns parse to numbers"),
            }
        };
        a.push(num(a_idx, &partition.sensitive)?);
        y.push(num(y_idx, &partition.outcome)?);
        for (k, (&idx, name)) in f_idx.iter().zip(&features).enumerate() {
            cols[k].push(parse_value(path, line_no, name, fields[idx])?);
        }
    }
    if a.is_empty() {
        return Err(Error::invalid(format!(
            "{}: no complete records",
            path.display()
        )));
    }

    let n = a.len();
    let n_d = partition.descendants.len();
    let encodings: Vec<ColumnEncoding> = features
        .iter()
        .zip(&cols)
        .map(|(name, vals)| encoding_for(name, vals))
        .collect::<Result<_>>()?;
    let (enc_d, enc_r) = encodings.split_at(n_d);
    let encode_group = |encs: &[ColumnEncoding], cols: &[Vec<RawValue>]| -> Result<Matrix> {
        let width: usize = encs.iter().map(ColumnEncoding::width).sum();
        let mut m = Matrix::zeros(n, width);
        for i in 0..n {
            let row = m.row_mut(i);
            let mut off = 0;
            for (e, c) in encs.iter().zip(cols) {
                e.encode(&c[i], &mut row[off..off + e.width()])?;
                off += e.width();
            }
        }
        Ok(m)
    };
    let xd = encode_group(enc_d, &cols[..n_d])?;
    let xr = encode_group(enc_r, &cols[n_d..])?;
    TabularDataset::new(
        partition.clone(),
        enc_d.to_vec(),
        enc_r.to_vec(),
        xd,
        xr,
        a,
        y,
    )
}
