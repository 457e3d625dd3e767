use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::schema::{
    AttributePartition, ColumnEncoding, ColumnKind, FeatureGroup, FeatureLayout, RawValue,
};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// Named numeric columns stored next to a dataset (e.g. SCM ground truth).
pub type ExtraColumns = Vec<(String, Vec<f64>)>;

/// Encoded records split by partition role. `a` and `y` are 0/1.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularDataset {
    pub partition: AttributePartition,
    pub xd_encodings: Vec<ColumnEncoding>,
    pub xr_encodings: Vec<ColumnEncoding>,
    pub xd: Matrix,
    pub xr: Matrix,
    pub a: Vec<f64>,
    pub y: Vec<f64>,
}

/// A minibatch gathered from a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub a: Vec<f64>,
    pub y: Vec<f64>,
    pub xd: Matrix,
    pub xr: Matrix,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn a_column(&self) -> Matrix {
        Matrix::column_vector(&self.a)
    }

    pub fn y_column(&self) -> Matrix {
        Matrix::column_vector(&self.y)
    }

    /// Same records with `a` replaced.
    pub fn with_a(&self, a: Vec<f64>) -> Batch {
        Batch { a, ..self.clone() }
    }
}

/// On-disk description of an encoded CSV file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub partition: AttributePartition,
    pub xd_encodings: Vec<ColumnEncoding>,
    pub xr_encodings: Vec<ColumnEncoding>,
    pub records: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_columns: Vec<String>,
}

impl TabularDataset {
    pub fn new(
        partition: AttributePartition,
        xd_encodings: Vec<ColumnEncoding>,
        xr_encodings: Vec<ColumnEncoding>,
        xd: Matrix,
        xr: Matrix,
        a: Vec<f64>,
        y: Vec<f64>,
    ) -> Result<Self> {
        partition.validate()?;
        let n = a.len();
        let wd: usize = xd_encodings.iter().map(ColumnEncoding::width).sum();
        let wr: usize = xr_encodings.iter().map(ColumnEncoding::width).sum();
        if xd.shape() != (n, wd) || xr.shape() != (n, wr) || y.len() != n {
            return Err(Error::shape(
                "TabularDataset::new",
                format!("{n} records, x_d width {wd}, x_r width {wr}"),
                format!("x_d {:?}, x_r {:?}, y {}", xd.shape(), xr.shape(), y.len()),
            ));
        }
        let names_d: Vec<&str> = xd_encodings.iter().map(|e| e.name.as_str()).collect();
        let names_r: Vec<&str> = xr_encodings.iter().map(|e| e.name.as_str()).collect();
        if names_d
            != partition
                .descendants
                .iter()
                .map(String::as_str)
                .collect::<Vec<_>>()
            || names_r
                != partition
                    .remainder
                    .iter()
                    .map(String::as_str)
                    .collect::<Vec<_>>()
        {
            return Err(Error::invalid(
                "encodings do not follow the partition column order",
            ));
        }
        if a.iter().chain(&y).any(|v| *v != 0.0 && *v != 1.0) {
            return Err(Error::invalid("a and y must be 0/1"));
        }
        if !xd.is_finite() || !xr.is_finite() {
            return Err(Error::invalid("encoded features contain non-finite values"));
        }
        Ok(TabularDataset {
            partition,
            xd_encodings,
            xr_encodings,
            xd,
            xr,
            a,
            y,
        })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn xd_layout(&self) -> FeatureLayout {
        FeatureLayout::from_encodings(&self.xd_encodings)
    }

    pub fn xr_layout(&self) -> FeatureLayout {
        FeatureLayout::from_encodings(&self.xr_encodings)
    }

    pub fn batch(&self, idx: &[usize]) -> Batch {
        Batch {
            a: idx.iter().map(|&i| self.a[i]).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            xd: self.xd.select_rows(idx),
            xr: self.xr.select_rows(idx),
        }
    }

    pub fn full_batch(&self) -> Batch {
        Batch {
            a: self.a.clone(),
            y: self.y.clone(),
            xd: self.xd.clone(),
            xr: self.xr.clone(),
        }
    }

    pub fn subset(&self, idx: &[usize]) -> TabularDataset {
        let b = self.batch(idx);
        TabularDataset {
            partition: self.partition.clone(),
            xd_encodings: self.xd_encodings.clone(),
            xr_encodings: self.xr_encodings.clone(),
            xd: b.xd,
            xr: b.xr,
            a: b.a,
            y: b.y,
        }
    }

    /// Replaces the features of every record, keeping schema and labels.
    pub fn with_features(
        &self,
        xd: Matrix,
        xr: Matrix,
        a: Vec<f64>,
        y: Vec<f64>,
    ) -> Result<TabularDataset> {
        TabularDataset::new(
            self.partition.clone(),
            self.xd_encodings.clone(),
            self.xr_encodings.clone(),
            xd,
            xr,
            a,
            y,
        )
    }

    /// Encoded values of a named feature column, one slice per record.
    pub fn column(&self, name: &str) -> Result<(&ColumnEncoding, Vec<&[f64]>)> {
        let (group, pos) = self
            .partition
            .locate(name)
            .ok_or_else(|| Error::invalid(format!("no feature column named `{name}`")))?;
        let (encs, m) = match group {
            FeatureGroup::Descendant => (&self.xd_encodings, &self.xd),
            FeatureGroup::Remainder => (&self.xr_encodings, &self.xr),
        };
        let off: usize = encs[..pos].iter().map(ColumnEncoding::width).sum();
        let w = encs[pos].width();
        Ok((
            &encs[pos],
            (0..self.len()).map(|i| &m.row(i)[off..off + w]).collect(),
        ))
    }

    /// 0/1 values of a binary feature column.
    pub fn binary_column(&self, name: &str) -> Result<Vec<u8>> {
        let (enc, vals) = self.column(name)?;
        if enc.kind != ColumnKind::Binary {
            return Err(Error::invalid(format!("column `{name}` is not binary")));
        }
        Ok(vals.iter().map(|v| u8::from(v[0] >= 0.5)).collect())
    }

    /// Decoded raw values of every feature column, in partition order
    /// (x_d columns then x_r columns).
    pub fn decode_record(&self, i: usize) -> Vec<RawValue> {
        let mut out = Vec::new();
        for (encs, m) in [
            (&self.xd_encodings, &self.xd),
            (&self.xr_encodings, &self.xr),
        ] {
            let mut off = 0;
            for e in encs {
                out.push(e.decode(&m.row(i)[off..off + e.width()]));
                off += e.width();
            }
        }
        out
    }

    /// Continuous encodings refitted on this dataset's raw values.
    fn refit_continuous(&self) -> Vec<(FeatureGroup, usize, ColumnEncoding)> {
        let mut out = Vec::new();
        for (group, encs, m) in [
            (FeatureGroup::Descendant, &self.xd_encodings, &self.xd),
            (FeatureGroup::Remainder, &self.xr_encodings, &self.xr),
        ] {
            let mut off = 0;
            for (pos, e) in encs.iter().enumerate() {
                if let ColumnKind::Continuous { mean, std } = e.kind {
                    let raw: Vec<f64> = (0..m.rows()).map(|i| m[(i, off)] * std + mean).collect();
                    out.push((group, pos, ColumnEncoding::continuous(&e.name, &raw)));
                }
                off += e.width();
            }
        }
        out
    }

    fn reencode(&self, fitted: &[(FeatureGroup, usize, ColumnEncoding)]) -> TabularDataset {
        let mut ds = self.clone();
        for (group, pos, new) in fitted {
            let (encs, m) = match group {
                FeatureGroup::Descendant => (&mut ds.xd_encodings, &mut ds.xd),
                FeatureGroup::Remainder => (&mut ds.xr_encodings, &mut ds.xr),
            };
            let off: usize = encs[..*pos].iter().map(ColumnEncoding::width).sum();
            let (
                ColumnKind::Continuous { mean: m0, std: s0 },
                ColumnKind::Continuous { mean: m1, std: s1 },
            ) = (&encs[*pos].kind, &new.kind)
            else {
                unreachable!("refit only touches continuous columns")
            };
            for i in 0..m.rows() {
                let raw = m[(i, off)] * s0 + m0;
                m[(i, off)] = (raw - m1) / s1;
            }
            encs[*pos] = new.clone();
        }
        ds
    }

    /// Seeded shuffle into disjoint train/test sets. Continuous encodings are
    /// refitted on the training records and reused for the test records.
    pub fn split(
        &self,
        test_fraction: f64,
        rng: &mut Rng,
    ) -> Result<(TabularDataset, TabularDataset)> {
        let (train_idx, test_idx) = split_indices(self.len(), test_fraction, rng)?;
        Ok(self.split_at(&train_idx, &test_idx))
    }

    /// Records of `self` followed by those of `other`; both must share the
    /// partition and encodings.
    pub fn concat(&self, other: &TabularDataset) -> Result<TabularDataset> {
        if self.partition != other.partition
            || self.xd_encodings != other.xd_encodings
            || self.xr_encodings != other.xr_encodings
        {
            return Err(Error::invalid(
                "cannot concatenate datasets with different schemas",
            ));
        }
        let mut a = self.a.clone();
        a.extend(&other.a);
        let mut y = self.y.clone();
        y.extend(&other.y);
        Ok(TabularDataset {
            partition: self.partition.clone(),
            xd_encodings: self.xd_encodings.clone(),
            xr_encodings: self.xr_encodings.clone(),
            xd: Matrix::vstack(&[&self.xd, &other.xd])?,
            xr: Matrix::vstack(&[&self.xr, &other.xr])?,
            a,
            y,
        })
    }

    /// Subsets for the given index sets, with continuous encodings refitted
    /// on the first.
    pub fn split_at(
        &self,
        train_idx: &[usize],
        test_idx: &[usize],
    ) -> (TabularDataset, TabularDataset) {
        let train = self.subset(train_idx);
        let test = self.subset(test_idx);
        let fitted = train.refit_continuous();
        (train.reencode(&fitted), test.reencode(&fitted))
    }

    /// Swaps two x_r columns (encodings and values).
    pub fn swap_remainder_columns(&self, i: usize, j: usize) -> TabularDataset {
        let mut ds = self.clone();
        let widths: Vec<usize> = ds.xr_encodings.iter().map(ColumnEncoding::width).collect();
        let offsets: Vec<usize> = widths
            .iter()
            .scan(0, |acc, w| {
                let o = *acc;
                *acc += w;
                Some(o)
            })
            .collect();
        let mut order: Vec<usize> = (0..widths.len()).collect();
        order.swap(i, j);
        let mut cols = Vec::new();
        for &c in &order {
            cols.extend(offsets[c]..offsets[c] + widths[c]);
        }
        let mut xr = Matrix::zeros(ds.len(), ds.xr.cols());
        for r in 0..ds.len() {
            for (k, &c) in cols.iter().enumerate() {
                xr[(r, k)] = self.xr[(r, c)];
            }
        }
        ds.xr = xr;
        ds.xr_encodings.swap(i, j);
        ds.partition.remainder.swap(i, j);
        ds
    }

    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            partition: self.partition.clone(),
            xd_encodings: self.xd_encodings.clone(),
            xr_encodings: self.xr_encodings.clone(),
            records: self.len(),
            extra_columns: Vec::new(),
        }
    }

    pub fn headers(&self) -> Vec<String> {
        let mut h = vec![
            self.partition.sensitive.clone(),
            self.partition.outcome.clone(),
        ];
        for e in self.xd_encodings.iter().chain(&self.xr_encodings) {
            h.extend(e.headers());
        }
        h
    }

    /// Writes `<stem>.csv` and `<stem>.schema.json` into `dir`. Extra columns
    /// are appended after the encoded features.
    pub fn write_csv(
        &self,
        dir: &Path,
        stem: &str,
        extra: &[(&str, Vec<f64>)],
    ) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut headers = self.headers();
        headers.extend(extra.iter().map(|(n, _)| n.to_string()));
        let mut s = headers.join(",");
        s.push('\n');
        for i in 0..self.len() {
            write!(s, "{},{}", self.a[i], self.y[i]).unwrap();
            for v in self.xd.row(i).iter().chain(self.xr.row(i)) {
                write!(s, ",{v}").unwrap();
            }
            for (_, col) in extra {
                write!(s, ",{}", col[i]).unwrap();
            }
            s.push('\n');
        }
        let csv = dir.join(format!("{stem}.csv"));
        fs::write(&csv, s).map_err(|e| Error::io(&csv, e))?;
        let mut side = self.sidecar();
        side.extra_columns = extra.iter().map(|(n, _)| n.to_string()).collect();
        let json = dir.join(format!("{stem}.schema.json"));
        fs::write(&json, serde_json::to_string_pretty(&side)?).map_err(|e| Error::io(&json, e))?;
        Ok(vec![csv, json])
    }

    /// Reads a dataset written by [`TabularDataset::write_csv`]. Extra
    /// columns are returned by name.
    pub fn read_csv(dir: &Path, stem: &str) -> Result<(TabularDataset, ExtraColumns)> {
        let json = dir.join(format!("{stem}.schema.json"));
        let side: Sidecar =
            serde_json::from_str(&fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?)?;
        let csv = dir.join(format!("{stem}.csv"));
        let text = fs::read_to_string(&csv).map_err(|e| Error::io(&csv, e))?;
        let wd: usize = side.xd_encodings.iter().map(ColumnEncoding::width).sum();
        let wr: usize = side.xr_encodings.iter().map(ColumnEncoding::width).sum();
        let n_extra = side.extra_columns.len();
        let width = 2 + wd + wr + n_extra;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::invalid(format!("{}: empty file", csv.display())))?;
        if header.split(',').count() != width {
            return Err(Error::Parse {
                path: csv,
                line: 1,
                column: "header".into(),
                message: format!("expected {width} columns"),
            });
        }
        let (mut a, mut y) = (Vec::new(), Vec::new());
        let (mut xd, mut xr) = (Vec::new(), Vec::new());
        let mut extra = vec![Vec::new(); n_extra];
        for (ln, line) in lines.enumerate() {
            let vals: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    path: csv.clone(),
                    line: ln + 2,
                    column: "*".into(),
                    message: e.to_string(),
                })?;
            if vals.len() != width {
                return Err(Error::Parse {
                    path: csv,
                    line: ln + 2,
                    column: "*".into(),
                    message: format!("expected {width} fields, found {}", vals.len()),
                });
            }
            a.push(vals[0]);
            y.push(vals[1]);
            xd.extend_from_slice(&vals[2..2 + wd]);
            xr.extend_from_slice(&vals[2 + wd..2 + wd + wr]);
            for (k, e) in extra.iter_mut().enumerate() {
                e.push(vals[2 + wd + wr + k]);
            }
        }
        let n = a.len();
        let ds = TabularDataset::new(
            side.partition,
            side.xd_encodings,
            side.xr_encodings,
            Matrix::from_vec(n, wd, xd)?,
            Matrix::from_vec(n, wr, xr)?,
            a,
            y,
        )?;
        Ok((ds, side.extra_columns.into_iter().zip(extra).collect()))
    }
}

/// `(train, test)` record indices of a seeded shuffle.
pub fn split_indices(
    n: usize,
    test_fraction: f64,
    rng: &mut Rng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n_test = ((n as f64) * test_fraction).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::invalid(format!(
            "test fraction {test_fraction} leaves an empty side for {n} records"
        )));
    }
    let perm = rng.permutation(n);
    let (test_idx, train_idx) = perm.split_at(n_test);
    Ok((train_idx.to_vec(), test_idx.to_vec()))
}
