//! Linear-logistic structural causal model with known counterfactuals.
//!
//! ```text
//! u_r ~ N(0, I_k)            u_d ~ N(0, I_m)
//! a   ~ Bernoulli(sigmoid(c_a·u_r + c_0))
//! x_r = B_r u_r + noise      o_j = 1[(B_o u_r)_j + noise > 0]   (both in x_r)
//! x_d = B_d u_d + B_dr u_r + w_a a + noise      (B_dr optional)
//! y   ~ Bernoulli(sigmoid(v_a a + v_d·u_d + v_r·u_r))
//! ```
//!
//! The two binary `o` columns are the conditioning variables of the
//! counterfactual-effect table.

use serde::{Deserialize, Serialize};

use super::dataset::TabularDataset;
use super::schema::{AttributePartition, ColumnEncoding, RawValue};
use crate::error::{Error, Result};
use crate::metrics::CeTable;
use crate::numerics::{sigmoid, Matrix, Rng};

pub const SCM_CONDITIONERS: (&str, &str) = ("o0", "o1");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScmSpec {
    pub seed: u64,
    pub c_a: Vec<f64>,
    pub c_0: f64,
    /// `p_r x k`
    pub b_r: Matrix,
    /// `2 x k`
    pub b_o: Matrix,
    /// `p_d x m`
    pub b_d: Matrix,
    /// Optional `p_d x k` loading of x_d on u_r (descendants that also
    /// carry remainder information).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_dr: Option<Matrix>,
    pub w_a: Vec<f64>,
    pub v_a: f64,
    pub v_d: Vec<f64>,
    pub v_r: Vec<f64>,
    pub noise_std: f64,
}

impl Default for ScmSpec {
    fn default() -> Self {
        let m = |rows: &[&[f64]]| {
            Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
        };
        ScmSpec {
            seed: 0,
            c_a: vec![1.2, -0.8],
            c_0: 0.0,
            b_r: m(&[&[1.0, 0.3], &[0.2, 1.0], &[0.7, -0.7]]),
            b_o: m(&[&[1.0, 0.5], &[-0.4, 1.0]]),
            b_d: m(&[&[1.0, 0.2], &[0.3, 1.0], &[0.8, -0.5], &[-0.2, 0.9]]),
            b_dr: None,
            w_a: vec![1.0, -0.8, 0.6, 0.4],
            v_a: 1.0,
            v_d: vec![0.8, -0.6],
            v_r: vec![0.6, 0.5],
            noise_std: 0.3,
        }
    }
}

impl ScmSpec {
    pub fn dim_ur(&self) -> usize {
        self.c_a.len()
    }

    pub fn dim_ud(&self) -> usize {
        self.v_d.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (k, m) = (self.dim_ur(), self.dim_ud());
        let bad = |what: &str| Err(Error::invalid(format!("inconsistent SCM spec: {what}")));
        if k == 0 || m == 0 {
            return bad("latent dimensions must be positive");
        }
        if self.b_r.cols() != k || self.b_r.rows() == 0 || self.v_r.len() != k {
            return bad("B_r / v_r do not match dim(u_r)");
        }
        if self.b_o.shape() != (2, k) {
            return bad("B_o must be 2 x dim(u_r)");
        }
        if self.b_d.cols() != m || self.b_d.rows() != self.w_a.len() || self.w_a.is_empty() {
            return bad("B_d / w_a do not match dim(u_d) and dim(x_d)");
        }
        if self
            .b_dr
            .as_ref()
            .is_some_and(|b| b.shape() != (self.b_d.rows(), k))
        {
            return bad("B_dr must be dim(x_d) x dim(u_r)");
        }
        if self.noise_std.is_nan() || self.noise_std <= 0.0 {
            return bad("noise std must be positive");
        }
        Ok(())
    }

    /// `P(y = 1 | do(a), u_d, u_r)`.
    pub fn outcome_prob(&self, a: f64, u_d: &[f64], u_r: &[f64]) -> f64 {
        sigmoid(self.v_a * a + dot(&self.v_d, u_d) + dot(&self.v_r, u_r))
    }

    pub fn partition(&self) -> AttributePartition {
        AttributePartition {
            sensitive: "a".into(),
            outcome: "y".into(),
            descendants: (0..self.w_a.len()).map(|j| format!("xd{j}")).collect(),
            remainder: (0..self.b_r.rows())
                .map(|j| format!("xr{j}"))
                .chain([
                    SCM_CONDITIONERS.0.to_string(),
                    SCM_CONDITIONERS.1.to_string(),
                ])
                .collect(),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Draws from the SCM with the matching counterfactual world.
#[derive(Clone, Debug)]
pub struct ScmSample {
    pub dataset: TabularDataset,
    pub u_d: Matrix,
    pub u_r: Matrix,
    /// Unstandardized x_d under the factual and the negated `a`.
    pub xd_factual_raw: Matrix,
    pub xd_counterfactual_raw: Matrix,
    /// `P(y = 1)` under the observed and the negated `a`.
    pub p_factual: Vec<f64>,
    pub p_counterfactual: Vec<f64>,
    /// Outcome draws sharing the factual uniform noise.
    pub y_counterfactual: Vec<f64>,
    /// `P(y | do(a=1), u) - P(y | do(a=0), u)` per record.
    pub individual_effect: Vec<f64>,
    pub true_te: f64,
    pub true_ce: CeTable,
}

pub fn generate_scm(spec: &ScmSpec, n: usize) -> Result<ScmSample> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::invalid("generate_scm needs n >= 1"));
    }
    let mut rng = Rng::new(spec.seed);
    let (k, m) = (spec.dim_ur(), spec.dim_ud());
    let (p_r, p_d) = (spec.b_r.rows(), spec.b_d.rows());
    let s = spec.noise_std;

    let mut u_r = Matrix::zeros(n, k);
    let mut u_d = Matrix::zeros(n, m);
    let mut a = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut y_cf = vec![0.0; n];
    let mut xr_raw = Matrix::zeros(n, p_r);
    let mut o = Matrix::zeros(n, 2);
    let mut xd_raw = Matrix::zeros(n, p_d);
    let mut xd_cf = Matrix::zeros(n, p_d);
    let mut p_f = vec![0.0; n];
    let mut p_cf = vec![0.0; n];
    let mut effect = vec![0.0; n];

    for i in 0..n {
        for v in u_r.row_mut(i) {
            *v = rng.gaussian();
        }
        for v in u_d.row_mut(i) {
            *v = rng.gaussian();
        }
        let ur = u_r.row(i).to_vec();
        let ud = u_d.row(i).to_vec();
        a[i] = if rng.bernoulli(sigmoid(dot(&spec.c_a, &ur) + spec.c_0)) {
            1.0
        } else {
            0.0
        };
        for j in 0..p_r {
            xr_raw[(i, j)] = dot(spec.b_r.row(j), &ur) + s * rng.gaussian();
        }
        for j in 0..2 {
            o[(i, j)] = if dot(spec.b_o.row(j), &ur) + s * rng.gaussian() > 0.0 {
                1.0
            } else {
                0.0
            };
        }
        for j in 0..p_d {
            let cross = spec.b_dr.as_ref().map_or(0.0, |b| dot(b.row(j), &ur));
            let base = dot(spec.b_d.row(j), &ud) + cross + s * rng.gaussian();
            xd_raw[(i, j)] = base + spec.w_a[j] * a[i];
            xd_cf[(i, j)] = base + spec.w_a[j] * (1.0 - a[i]);
        }
        let noise_y = rng.uniform();
        p_f[i] = spec.outcome_prob(a[i], &ud, &ur);
        p_cf[i] = spec.outcome_prob(1.0 - a[i], &ud, &ur);
        y[i] = if noise_y < p_f[i] { 1.0 } else { 0.0 };
        y_cf[i] = if noise_y < p_cf[i] { 1.0 } else { 0.0 };
        effect[i] = spec.outcome_prob(1.0, &ud, &ur) - spec.outcome_prob(0.0, &ud, &ur);
    }

    let partition = spec.partition();
    let xd_enc: Vec<ColumnEncoding> = (0..p_d)
        .map(|j| ColumnEncoding::continuous(&partition.descendants[j], &xd_raw.column(j)))
        .collect();
    let mut xr_enc: Vec<ColumnEncoding> = (0..p_r)
        .map(|j| ColumnEncoding::continuous(&partition.remainder[j], &xr_raw.column(j)))
        .collect();
    xr_enc.push(ColumnEncoding::binary(SCM_CONDITIONERS.0));
    xr_enc.push(ColumnEncoding::binary(SCM_CONDITIONERS.1));

    let mut xd = Matrix::zeros(n, p_d);
    let mut xr = Matrix::zeros(n, p_r + 2);
    for i in 0..n {
        for j in 0..p_d {
            xd_enc[j].encode(
                &RawValue::Number(xd_raw[(i, j)]),
                &mut xd.row_mut(i)[j..j + 1],
            )?;
        }
        for j in 0..p_r {
            xr_enc[j].encode(
                &RawValue::Number(xr_raw[(i, j)]),
                &mut xr.row_mut(i)[j..j + 1],
            )?;
        }
        xr[(i, p_r)] = o[(i, 0)];
        xr[(i, p_r + 1)] = o[(i, 1)];
    }
    let dataset = TabularDataset::new(partition, xd_enc, xr_enc, xd, xr, a, y)?;
    let cells: Vec<(u8, u8)> = (0..n).map(|i| (o[(i, 0)] as u8, o[(i, 1)] as u8)).collect();
    let true_te = effect.iter().sum::<f64>() / n as f64;
    let true_ce = CeTable::from_effects(SCM_CONDITIONERS, &effect, &cells);
    Ok(ScmSample {
        dataset,
        u_d,
        u_r,
        xd_factual_raw: xd_raw,
        xd_counterfactual_raw: xd_cf,
        p_factual: p_f,
        p_counterfactual: p_cf,
        y_counterfactual: y_cf,
        individual_effect: effect,
        true_te,
        true_ce,
    })
}
