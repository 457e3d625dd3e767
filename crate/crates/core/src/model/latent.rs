use crate::error::{Error, Result};
use crate::numerics::Matrix;

use super::heads::sigma_of;

/// Per-record Gaussian posterior and the reparameterized draw
/// `u = μ + σ ⊙ ε`.
///
/// For the two-latent model the leading `d_dim` columns are `u_d` and the
/// rest `u_r`. Single-latent baselines split their latent the same way so
/// covariance reports can be compared block for block.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentPosterior {
    pub mu: Matrix,
    pub sigma: Matrix,
    pub eps: Matrix,
    pub u: Matrix,
    pub d_dim: usize,
}

impl LatentPosterior {
    pub fn len(&self) -> usize {
        self.mu.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.mu.cols()
    }

    pub fn mu_d(&self) -> Matrix {
        self.mu.column_range(0, self.d_dim)
    }

    pub fn mu_r(&self) -> Matrix {
        self.mu.column_range(self.d_dim, self.dim())
    }

    pub fn sigma_d(&self) -> Matrix {
        self.sigma.column_range(0, self.d_dim)
    }

    pub fn sigma_r(&self) -> Matrix {
        self.sigma.column_range(self.d_dim, self.dim())
    }

    pub fn u_d(&self) -> Matrix {
        self.u.column_range(0, self.d_dim)
    }

    pub fn u_r(&self) -> Matrix {
        self.u.column_range(self.d_dim, self.dim())
    }

    /// The same posterior with `u` set to the mean.
    pub fn at_mean(&self) -> LatentPosterior {
        LatentPosterior {
            eps: Matrix::zeros(self.len(), self.dim()),
            u: self.mu.clone(),
            ..self.clone()
        }
    }

    /// Joins the posteriors of two latent blocks (`self` is `u_d`).
    pub fn join(&self, r: &LatentPosterior) -> Result<LatentPosterior> {
        Ok(LatentPosterior {
            mu: Matrix::hstack(&[&self.mu, &r.mu])?,
            sigma: Matrix::hstack(&[&self.sigma, &r.sigma])?,
            eps: Matrix::hstack(&[&self.eps, &r.eps])?,
            u: Matrix::hstack(&[&self.u, &r.u])?,
            d_dim: self.dim(),
        })
    }
}

/// Encoder output split into `(μ, log σ)` halves.
#[derive(Clone, Debug)]
pub(crate) struct GaussianOut {
    pub mu: Matrix,
    pub sigma: Matrix,
    pub floored: Vec<bool>,
}

impl GaussianOut {
    pub fn from_encoder(out: &Matrix, dim: usize) -> Result<Self> {
        if out.cols() != 2 * dim {
            return Err(Error::shape(
                "GaussianOut::from_encoder",
                2 * dim,
                out.cols(),
            ));
        }
        let b = out.rows();
        let mu = out.column_range(0, dim);
        let mut sigma = Matrix::zeros(b, dim);
        let mut floored = vec![false; b * dim];
        for i in 0..b {
            for j in 0..dim {
                let (s, f) = sigma_of(out[(i, dim + j)]);
                sigma[(i, j)] = s;
                floored[i * dim + j] = f;
            }
        }
        Ok(GaussianOut { mu, sigma, floored })
    }

    pub fn dim(&self) -> usize {
        self.mu.cols()
    }

    /// `u = μ + σ ⊙ ε`; `eps = None` uses the mean.
    pub fn posterior(&self, eps: Option<&Matrix>, d_dim: usize) -> Result<LatentPosterior> {
        let eps = match eps {
            Some(e) if e.shape() != self.mu.shape() => {
                return Err(Error::shape(
                    "GaussianOut::posterior",
                    format!("{:?}", self.mu.shape()),
                    format!("{:?}", e.shape()),
                ))
            }
            Some(e) => e.clone(),
            None => Matrix::zeros(self.mu.rows(), self.dim()),
        };
        let mut u = self.mu.clone();
        for ((uv, s), e) in u
            .as_mut_slice()
            .iter_mut()
            .zip(self.sigma.as_slice())
            .zip(eps.as_slice())
        {
            *uv += s * e;
        }
        Ok(LatentPosterior {
            mu: self.mu.clone(),
            sigma: self.sigma.clone(),
            eps,
            u,
            d_dim,
        })
    }

    /// Mean over records of `KL(N(μ, σ²) ‖ N(0, I))`, with adjoints on μ and σ.
    pub fn kl_standard(&self) -> (f64, Matrix, Matrix) {
        let b = self.mu.rows();
        let inv_b = 1.0 / b as f64;
        let mut kl = 0.0;
        let mut d_mu = Matrix::zeros(b, self.dim());
        let mut d_sigma = Matrix::zeros(b, self.dim());
        for k in 0..self.mu.as_slice().len() {
            let m = self.mu.as_slice()[k];
            let s = self.sigma.as_slice()[k];
            kl += 0.5 * (m * m + s * s - 1.0) - s.ln();
            d_mu.as_mut_slice()[k] = m * inv_b;
            d_sigma.as_mut_slice()[k] = (s - 1.0 / s) * inv_b;
        }
        (kl * inv_b, d_mu, d_sigma)
    }

    /// Adjoint on the raw encoder output given adjoints on μ and σ.
    pub fn backward(&self, d_mu: &Matrix, d_sigma: &Matrix) -> Matrix {
        let (b, dim) = self.mu.shape();
        let mut d = Matrix::zeros(b, 2 * dim);
        for i in 0..b {
            for j in 0..dim {
                d[(i, j)] = d_mu[(i, j)];
                if !self.floored[i * dim + j] {
                    d[(i, dim + j)] = d_sigma[(i, j)] * self.sigma[(i, j)];
                }
            }
        }
        d
    }
}

/// Folds an adjoint on `u = μ + σ ⊙ ε` into adjoints on μ and σ.
pub(crate) fn reparam_backward(
    d_u: &Matrix,
    eps: &Matrix,
    d_mu: &mut Matrix,
    d_sigma: &mut Matrix,
) {
    for k in 0..d_u.as_slice().len() {
        let g = d_u.as_slice()[k];
        d_mu.as_mut_slice()[k] += g;
        d_sigma.as_mut_slice()[k] += g * eps.as_slice()[k];
    }
}
