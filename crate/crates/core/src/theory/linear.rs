use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{from_na, to_na};
use crate::error::{Error, Result};
use crate::numerics::{nested, Matrix, Rng};

/// Stopping threshold of [`sigma_numeric`] on the relative gradient.
pub const NUMERIC_TOLERANCE: f64 = 1e-9;
const NUMERIC_MAX_ITERS: usize = 500;
const CONDITION_LIMIT: f64 = 1e14;

/// How the outcome decoder enters the precision.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeTerm {
    /// Only the diagonal of `W_yᵀ W_y / σ²`.
    #[default]
    Diagonal,
    /// The full `W_yᵀ W_y / σ²`.
    Dense,
}

/// Linear decoders `x_r = W_r u`, `x_d = W_d u`, `y = W_y u` with
/// isotropic noise `σ²`, TC weight `β`, and the covariance `Σ̄` of the
/// permuted latent. `W_r` and `W_d` are `(n+m) x (n+m)`: the masks pick
/// their output rows belonging to the matching latent block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearModelSpec {
    /// `|u_r|`
    pub n: usize,
    /// `|u_d|`
    pub m: usize,
    #[serde(with = "nested")]
    pub w_r: Matrix,
    #[serde(with = "nested")]
    pub w_d: Matrix,
    #[serde(with = "nested")]
    pub w_y: Matrix,
    pub sigma2: f64,
    pub beta: f64,
    #[serde(with = "nested")]
    pub sigma_bar: Matrix,
    #[serde(default)]
    pub outcome_term: OutcomeTerm,
}

fn random_matrix(rng: &mut Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| scale * rng.gaussian()).collect();
    Matrix::from_vec(rows, cols, data).expect("sized above")
}

/// `G Gᵀ / k + I/2` for a random square `G`.
fn random_spd(rng: &mut Rng, k: usize) -> DMatrix<f64> {
    let g = to_na(&random_matrix(rng, k, k, 1.0));
    &g * g.transpose() / k as f64 + DMatrix::identity(k, k) * 0.5
}

impl LinearModelSpec {
    pub fn dim(&self) -> usize {
        self.n + self.m
    }

    /// Random weights, `σ² ∈ [0.5, 2)`, and a block-diagonal `Σ̄`.
    pub fn random(n: usize, m: usize, beta: f64, rng: &mut Rng) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::invalid(
                "both latent blocks need at least one dimension",
            ));
        }
        let k = n + m;
        let scale = 1.0 / (k as f64).sqrt();
        let w_r = random_matrix(rng, k, k, scale);
        let w_d = random_matrix(rng, k, k, scale);
        let w_y = random_matrix(rng, 1, k, scale);
        let sigma2 = 0.5 + 1.5 * rng.uniform();
        let mut bar = DMatrix::zeros(k, k);
        bar.view_mut((0, 0), (n, n)).copy_from(&random_spd(rng, n));
        bar.view_mut((n, n), (m, m)).copy_from(&random_spd(rng, m));
        Ok(LinearModelSpec {
            n,
            m,
            w_r,
            w_d,
            w_y,
            sigma2,
            beta,
            sigma_bar: from_na(&bar),
            outcome_term: OutcomeTerm::Diagonal,
        })
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        LinearModelSpec {
            beta,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.dim();
        let bad = |what: String| Err(Error::invalid(format!("linear model spec: {what}")));
        if self.n == 0 || self.m == 0 {
            return bad("n and m must be positive".into());
        }
        for (name, w) in [("W_r", &self.w_r), ("W_d", &self.w_d)] {
            if w.shape() != (k, k) {
                return bad(format!("{name} must be {k}x{k}, got {:?}", w.shape()));
            }
        }
        if self.w_y.cols() != k || self.w_y.rows() == 0 {
            return bad(format!(
                "W_y must have {k} columns, got {:?}",
                self.w_y.shape()
            ));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return bad("σ² must be positive".into());
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("β must be finite and non-negative".into());
        }
        if self.sigma_bar.shape() != (k, k) {
            return bad(format!("Σ̄ must be {k}x{k}"));
        }
        let bar = &self.sigma_bar;
        for i in 0..k {
            for j in 0..k {
                if (bar[(i, j)] - bar[(j, i)]).abs() > 1e-12 * (1.0 + bar[(i, j)].abs()) {
                    return bad("Σ̄ is not symmetric".into());
                }
                if (i < self.n) != (j < self.n) && bar[(i, j)] != 0.0 {
                    return bad("Σ̄ has a non-zero u_r/u_d cross block".into());
                }
            }
        }
        if to_na(bar).cholesky().is_none() {
            return bad("Σ̄ is not positive definite".into());
        }
        Ok(())
    }

    /// `A = W_rᵀM_rW_r/σ² + W_dᵀM_dW_d/σ² + D_y + I + βΣ̄⁻¹`, so that the
    /// stationary covariance is `(1 + β) A⁻¹`.
    fn precision(&self) -> Result<DMatrix<f64>> {
        self.validate()?;
        let k = self.dim();
        let inv_s2 = 1.0 / self.sigma2;
        let mask = |lo: usize, hi: usize| {
            DMatrix::from_fn(k, k, |i, j| {
                if i == j && i >= lo && i < hi {
                    1.0
                } else {
                    0.0
                }
            })
        };
        let (w_r, w_d, w_y) = (to_na(&self.w_r), to_na(&self.w_d), to_na(&self.w_y));
        let mut a = (w_r.transpose() * mask(0, self.n) * &w_r
            + w_d.transpose() * mask(self.n, k) * &w_d)
            * inv_s2;
        let wy = w_y.transpose() * &w_y * inv_s2;
        match self.outcome_term {
            OutcomeTerm::Diagonal => {
                for i in 0..k {
                    a[(i, i)] += wy[(i, i)];
                }
            }
            OutcomeTerm::Dense => a += wy,
        }
        a += DMatrix::identity(k, k);
        if self.beta > 0.0 {
            let bar_inv = to_na(&self.sigma_bar)
                .cholesky()
                .ok_or_else(|| Error::invalid("Σ̄ is not positive definite"))?
                .inverse();
            a += bar_inv * self.beta;
        }
        Ok(symmetrize(a))
    }
}

fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    (&a + a.transpose()) * 0.5
}

fn condition_number(a: &DMatrix<f64>) -> f64 {
    let e = a.clone().symmetric_eigen();
    let (lo, hi) = e
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
            (lo.min(v.abs()), hi.max(v.abs()))
        });
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Closed-form stationary covariance `Σ* = (1 + β) A⁻¹`.
pub fn sigma_star(spec: &LinearModelSpec) -> Result<Matrix> {
    let a = spec.precision()?;
    let condition = condition_number(&a);
    if condition > CONDITION_LIMIT {
        return Err(Error::Singular { condition });
    }
    let inv = a.cholesky().ok_or(Error::Singular { condition })?.inverse();
    Ok(from_na(&symmetrize(inv * (1.0 + spec.beta))))
}

/// Minimizes `f(Σ) = tr(BΣ) − log det Σ` with `B = A / (1 + β)`, the
/// objective whose stationarity condition is the closed form. Each step is
/// a natural-gradient step of unit length, `Σ ← Σ − Σ ∇f(Σ) Σ`, started
/// from `I / ‖B‖_F`; iteration stops once `‖Σ ∇f(Σ)‖_F = ‖I − ΣB‖_F`
/// drops below [`NUMERIC_TOLERANCE`].
pub fn sigma_numeric(spec: &LinearModelSpec) -> Result<Matrix> {
    let b = spec.precision()? / (1.0 + spec.beta);
    let k = b.nrows();
    let eye = DMatrix::<f64>::identity(k, k);
    let mut sigma = &eye / b.norm();
    for _ in 0..NUMERIC_MAX_ITERS {
        let residual = (&eye - &sigma * &b).norm();
        if !residual.is_finite() {
            break;
        }
        if residual < NUMERIC_TOLERANCE {
            return Ok(from_na(&sigma));
        }
        // Σ − Σ(B − Σ⁻¹)Σ = 2Σ − ΣBΣ
        sigma = symmetrize(&sigma * 2.0 - &sigma * &b * &sigma);
    }
    Err(Error::Convergence(format!(
        "covariance descent did not reach a relative gradient below {NUMERIC_TOLERANCE:e} in {NUMERIC_MAX_ITERS} steps"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::frobenius_distance;

    fn zero_spec(n: usize, m: usize, beta: f64) -> LinearModelSpec {
        let k = n + m;
        LinearModelSpec {
            n,
            m,
            w_r: Matrix::zeros(k, k),
            w_d: Matrix::zeros(k, k),
            w_y: Matrix::zeros(1, k),
            sigma2: 1.0,
            beta,
            sigma_bar: Matrix::identity(k),
            outcome_term: OutcomeTerm::Diagonal,
        }
    }

    #[test]
    fn zero_weights_no_tc_gives_identity() {
        let s = zero_spec(2, 3, 0.0);
        assert!(
            frobenius_distance(&sigma_star(&s).unwrap(), &Matrix::identity(5)).unwrap() < 1e-14
        );
        assert!(
            frobenius_distance(&sigma_numeric(&s).unwrap(), &Matrix::identity(5)).unwrap() < 1e-12
        );
    }

    #[test]
    fn hand_computed_scalar_blocks() {
        // n = m = 1, W_r = W_d = I, W_y = 0, σ² = 1, β = 1, Σ̄ = diag(2, 4):
        // A = diag(1, 0) + diag(0, 1) + I + diag(1/2, 1/4) = diag(2.5, 2.25)
        let mut s = zero_spec(1, 1, 1.0);
        s.w_r = Matrix::identity(2);
        s.w_d = Matrix::identity(2);
        s.sigma_bar = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let got = sigma_star(&s).unwrap();
        assert!((got[(0, 0)] - 2.0 / 2.5).abs() < 1e-14);
        assert!((got[(1, 1)] - 2.0 / 2.25).abs() < 1e-14);
        assert_eq!(got[(0, 1)], 0.0);
    }

    #[test]
    fn masks_select_block_rows() {
        // W_r's u_d output row must not enter A
        let mut s = zero_spec(1, 1, 0.0);
        s.w_r = Matrix::from_rows(&[vec![0.0, 0.0], vec![3.0, 3.0]]).unwrap();
        assert!(
            frobenius_distance(&sigma_star(&s).unwrap(), &Matrix::identity(2)).unwrap() < 1e-14
        );
    }

    #[test]
    fn diagonal_and_dense_outcome_terms_differ_only_off_diagonal_in_precision() {
        let mut s = zero_spec(1, 1, 0.0);
        s.w_y = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let diag = sigma_star(&s).unwrap();
        assert!(diag[(0, 1)].abs() < 1e-15);
        s.outcome_term = OutcomeTerm::Dense;
        let dense = sigma_star(&s).unwrap();
        // A = [[2, 1], [1, 2]] -> A⁻¹ = [[2, -1], [-1, 2]] / 3
        assert!((dense[(0, 1)] + 1.0 / 3.0).abs() < 1e-14);
        assert!(frobenius_distance(&sigma_numeric(&s).unwrap(), &dense).unwrap() < 1e-9);
    }

    #[test]
    fn diagonal_weights_without_tc_stay_diagonal_numerically() {
        let mut s = zero_spec(2, 2, 0.0);
        let d = Matrix::from_rows(&[
            vec![1.5, 0.0, 0.0, 0.0],
            vec![0.0, 0.7, 0.0, 0.0],
            vec![0.0, 0.0, 2.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.3],
        ])
        .unwrap();
        s.w_r = d.clone();
        s.w_d = d;
        let got = sigma_numeric(&s).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(got[(i, j)].abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn validation() {
        let mut s = zero_spec(1, 2, 0.0);
        s.sigma_bar[(0, 1)] = 0.1;
        s.sigma_bar[(1, 0)] = 0.1;
        assert!(s.validate().is_err());
        let mut s = zero_spec(1, 2, 0.0);
        s.sigma2 = 0.0;
        assert!(s.validate().is_err());
        let mut s = zero_spec(1, 2, 0.0);
        s.w_r = Matrix::zeros(2, 3);
        assert!(s.validate().is_err());
        let mut s = zero_spec(1, 2, 0.0);
        s.sigma_bar[(2, 2)] = -1.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn json_uses_nested_arrays() {
        let s = zero_spec(1, 1, 2.0);
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        assert_eq!(v["w_r"], serde_json::json!([[0.0, 0.0], [0.0, 0.0]]));
        let back: LinearModelSpec = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
    }
}
