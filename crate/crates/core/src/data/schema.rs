use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Assignment of columns to the roles of the causal graph: the sensitive
/// attribute `a`, the outcome `y`, descendants of `a` (`x_d`) and the
/// remaining features (`x_r`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributePartition {
    pub sensitive: String,
    pub outcome: String,
    pub descendants: Vec<String>,
    pub remainder: Vec<String>,
}

impl AttributePartition {
    /// gender → a, income → y, {race, age, native-country} → x_r, the other
    /// retained columns → x_d.
    pub fn adult_default() -> Self {
        AttributePartition {
            sensitive: "sex".into(),
            outcome: "income".into(),
            descendants: [
                "workclass",
                "education-num",
                "marital-status",
                "occupation",
                "relationship",
                "capital-gain",
                "capital-loss",
                "hours-per-week",
            ]
            .map(String::from)
            .to_vec(),
            remainder: ["race", "age", "native-country"].map(String::from).to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        let all = [&self.sensitive, &self.outcome]
            .into_iter()
            .chain(&self.descendants)
            .chain(&self.remainder);
        for name in all {
            if !seen.insert(name.as_str()) {
                return Err(Error::invalid(format!(
                    "column `{name}` assigned to more than one partition group"
                )));
            }
        }
        if self.descendants.is_empty() || self.remainder.is_empty() {
            return Err(Error::invalid(
                "x_d and x_r must each have at least one column",
            ));
        }
        Ok(())
    }

    /// Group (`"x_d"` or `"x_r"`) and position of a feature column.
    pub fn locate(&self, name: &str) -> Option<(FeatureGroup, usize)> {
        if let Some(i) = self.descendants.iter().position(|c| c == name) {
            return Some((FeatureGroup::Descendant, i));
        }
        self.remainder
            .iter()
            .position(|c| c == name)
            .map(|i| (FeatureGroup::Remainder, i))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureGroup {
    Descendant,
    Remainder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    /// Stored as 0/1.
    Binary,
    /// One-hot over the listed categories.
    Categorical { categories: Vec<String> },
    /// `(raw - mean) / std`.
    Continuous { mean: f64, std: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnEncoding {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RawValue {
    Number(f64),
    Text(String),
}

impl ColumnEncoding {
    pub fn binary(name: &str) -> Self {
        ColumnEncoding {
            name: name.into(),
            kind: ColumnKind::Binary,
        }
    }

    pub fn categorical(name: &str, categories: Vec<String>) -> Result<Self> {
        if categories.len() < 2 {
            return Err(Error::invalid(format!(
                "categorical column `{name}` needs at least two categories"
            )));
        }
        Ok(ColumnEncoding {
            name: name.into(),
            kind: ColumnKind::Categorical { categories },
        })
    }

    /// Standardization fitted on `values`. A constant column keeps std 1.
    pub fn continuous(name: &str, values: &[f64]) -> Self {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = if var > 0.0 { var.sqrt() } else { 1.0 };
        ColumnEncoding {
            name: name.into(),
            kind: ColumnKind::Continuous { mean, std },
        }
    }

    pub fn width(&self) -> usize {
        match &self.kind {
            ColumnKind::Categorical { categories } => categories.len(),
            _ => 1,
        }
    }

    pub fn encode(&self, value: &RawValue, out: &mut [f64]) -> Result<()> {
        match (&self.kind, value) {
            (ColumnKind::Binary, RawValue::Number(v)) if *v == 0.0 || *v == 1.0 => out[0] = *v,
            (ColumnKind::Continuous { mean, std }, RawValue::Number(v)) => {
                out[0] = (v - mean) / std
            }
            (ColumnKind::Categorical { categories }, RawValue::Text(s)) => {
                let k = categories.iter().position(|c| c == s).ok_or_else(|| {
                    Error::invalid(format!("unknown category `{s}` in column `{}`", self.name))
                })?;
                out.fill(0.0);
                out[k] = 1.0;
            }
            (_, v) => {
                return Err(Error::invalid(format!(
                    "value {v:?} does not fit column `{}` ({:?})",
                    self.name, self.kind
                )))
            }
        }
        Ok(())
    }

    /// Inverse of [`ColumnEncoding::encode`]; one-hot groups decode by argmax
    /// and binary columns by thresholding at 0.5.
    pub fn decode(&self, encoded: &[f64]) -> RawValue {
        match &self.kind {
            ColumnKind::Binary => RawValue::Number(if encoded[0] >= 0.5 { 1.0 } else { 0.0 }),
            ColumnKind::Continuous { mean, std } => RawValue::Number(encoded[0] * std + mean),
            ColumnKind::Categorical { categories } => {
                RawValue::Text(categories[argmax(encoded)].clone())
            }
        }
    }

    /// Encoded column headers (`name` or `name=category`).
    pub fn headers(&self) -> Vec<String> {
        match &self.kind {
            ColumnKind::Categorical { categories } => categories
                .iter()
                .map(|c| format!("{}={c}", self.name))
                .collect(),
            _ => vec![self.name.clone()],
        }
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Continuous,
    Binary,
    Categorical,
}

/// Position of one raw column inside an encoded feature group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub offset: usize,
    pub width: usize,
    pub kind: BlockKind,
}

/// Encoded layout of one feature group, as seen by decoder heads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub blocks: Vec<Block>,
    pub width: usize,
    pub n_continuous: usize,
}

impl FeatureLayout {
    pub fn from_encodings(encodings: &[ColumnEncoding]) -> Self {
        let mut offset = 0;
        let mut n_continuous = 0;
        let blocks = encodings
            .iter()
            .map(|e| {
                let kind = match e.kind {
                    ColumnKind::Binary => BlockKind::Binary,
                    ColumnKind::Categorical { .. } => BlockKind::Categorical,
                    ColumnKind::Continuous { .. } => {
                        n_continuous += 1;
                        BlockKind::Continuous
                    }
                };
                let b = Block {
                    name: e.name.clone(),
                    offset,
                    width: e.width(),
                    kind,
                };
                offset += b.width;
                b
            })
            .collect();
        FeatureLayout {
            blocks,
            width: offset,
            n_continuous,
        }
    }

    /// Decoder head width: one location output per encoded position plus
    /// one log-scale output per continuous column.
    pub fn head_width(&self) -> usize {
        self.width + self.n_continuous
    }

    /// Concatenation of two layouts (`self` first).
    pub fn concat(&self, other: &FeatureLayout) -> FeatureLayout {
        let mut blocks = self.blocks.clone();
        blocks.extend(other.blocks.iter().map(|b| Block {
            offset: b.offset + self.width,
            ..b.clone()
        }));
        FeatureLayout {
            blocks,
            width: self.width + other.width,
            n_continuous: self.n_continuous + other.n_continuous,
        }
    }
}
