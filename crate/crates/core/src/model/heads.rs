//! Likelihood heads shared by every model variant.
//!
//! A feature decoder emits `layout.head_width()` columns: one location or
//! logit per encoded position, followed by one log-scale per continuous
//! column. Continuous columns are Gaussian, binary columns Bernoulli and
//! one-hot groups categorical.

use crate::data::{BlockKind, FeatureLayout};
use crate::error::{Error, Result};
use crate::numerics::{log_sigmoid, sigmoid, Matrix, Rng};

/// Lower bound applied to every standard deviation.
pub const SIGMA_FLOOR: f64 = 1e-4;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `(σ, floored)` for a raw log-scale output.
pub(crate) fn sigma_of(log_sigma: f64) -> (f64, bool) {
    let s = log_sigma.exp();
    if s < SIGMA_FLOOR {
        (SIGMA_FLOOR, true)
    } else {
        (s, false)
    }
}

fn check_head(
    op: &'static str,
    layout: &FeatureLayout,
    head: &Matrix,
    x: Option<&Matrix>,
) -> Result<()> {
    if head.cols() != layout.head_width() {
        return Err(Error::shape(
            op,
            format!("head width {}", layout.head_width()),
            head.cols(),
        ));
    }
    if let Some(x) = x {
        if x.shape() != (head.rows(), layout.width) {
            return Err(Error::shape(
                op,
                format!("targets {}x{}", head.rows(), layout.width),
                format!("{:?}", x.shape()),
            ));
        }
    }
    Ok(())
}

/// Negative log-likelihood of `x` under `head`, averaged over records.
/// Returns one value per block and the adjoint of the mean total with
/// respect to `head`.
pub(crate) fn feature_nll(
    layout: &FeatureLayout,
    head: &Matrix,
    x: &Matrix,
) -> Result<(Vec<f64>, Matrix)> {
    check_head("feature_nll", layout, head, Some(x))?;
    let b = head.rows();
    let inv_b = 1.0 / b as f64;
    let mut per_block = vec![0.0; layout.blocks.len()];
    let mut d = Matrix::zeros(b, head.cols());
    for i in 0..b {
        let h = head.row(i);
        let xi = x.row(i);
        let mut grad = vec![0.0; head.cols()];
        let mut cont = 0;
        for (k, block) in layout.blocks.iter().enumerate() {
            let o = block.offset;
            let nll = match block.kind {
                BlockKind::Continuous => {
                    let ls = layout.width + cont;
                    cont += 1;
                    let (sigma, floored) = sigma_of(h[ls]);
                    let r = xi[o] - h[o];
                    let z2 = r * r / (sigma * sigma);
                    grad[o] = -r / (sigma * sigma);
                    grad[ls] = if floored { 0.0 } else { 1.0 - z2 };
                    HALF_LN_2PI + sigma.ln() + 0.5 * z2
                }
                BlockKind::Binary => {
                    let l = h[o];
                    grad[o] = sigmoid(l) - xi[o];
                    -log_sigmoid(-l) - xi[o] * l
                }
                BlockKind::Categorical => {
                    let logits = &h[o..o + block.width];
                    let t = &xi[o..o + block.width];
                    let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let z: f64 = logits.iter().map(|l| (l - mx).exp()).sum();
                    let lse = mx + z.ln();
                    let mass: f64 = t.iter().sum();
                    for j in 0..block.width {
                        grad[o + j] = ((logits[j] - lse).exp()) * mass - t[j];
                    }
                    lse * mass - logits.iter().zip(t).map(|(l, t)| l * t).sum::<f64>()
                }
            };
            per_block[k] += nll * inv_b;
        }
        for (dv, g) in d.row_mut(i).iter_mut().zip(grad) {
            *dv = g * inv_b;
        }
    }
    Ok((per_block, d))
}

/// Point prediction in encoded space: Gaussian mean, Bernoulli thresholded
/// at 0.5, categorical argmax as one-hot.
pub(crate) fn feature_point(layout: &FeatureLayout, head: &Matrix) -> Result<Matrix> {
    check_head("feature_point", layout, head, None)?;
    let mut out = Matrix::zeros(head.rows(), layout.width);
    for i in 0..head.rows() {
        let h = head.row(i);
        let row = out.row_mut(i);
        for block in &layout.blocks {
            let o = block.offset;
            match block.kind {
                BlockKind::Continuous => row[o] = h[o],
                BlockKind::Binary => row[o] = if h[o] >= 0.0 { 1.0 } else { 0.0 },
                BlockKind::Categorical => {
                    row[o + crate::data::argmax(&h[o..o + block.width])] = 1.0
                }
            }
        }
    }
    Ok(out)
}

/// One draw per record from the head's distribution.
pub(crate) fn feature_sample(
    layout: &FeatureLayout,
    head: &Matrix,
    rng: &mut Rng,
) -> Result<Matrix> {
    check_head("feature_sample", layout, head, None)?;
    let mut out = Matrix::zeros(head.rows(), layout.width);
    for i in 0..head.rows() {
        let h = head.row(i);
        let row = out.row_mut(i);
        let mut cont = 0;
        for block in &layout.blocks {
            let o = block.offset;
            match block.kind {
                BlockKind::Continuous => {
                    let (sigma, _) = sigma_of(h[layout.width + cont]);
                    cont += 1;
                    row[o] = h[o] + sigma * rng.gaussian();
                }
                BlockKind::Binary => {
                    row[o] = if rng.bernoulli(sigmoid(h[o])) {
                        1.0
                    } else {
                        0.0
                    }
                }
                BlockKind::Categorical => {
                    let logits = &h[o..o + block.width];
                    let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let w: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
                    let mut t = rng.uniform() * w.iter().sum::<f64>();
                    let mut pick = block.width - 1;
                    for (j, wj) in w.iter().enumerate() {
                        if t < *wj {
                            pick = j;
                            break;
                        }
                        t -= wj;
                    }
                    row[o + pick] = 1.0;
                }
            }
        }
    }
    Ok(out)
}

/// Mean Bernoulli negative log-likelihood of `y` given logits, and its
/// adjoint with respect to the logits.
pub(crate) fn bernoulli_nll(logits: &[f64], y: &[f64]) -> (f64, Vec<f64>) {
    let inv_b = 1.0 / logits.len() as f64;
    let mut total = 0.0;
    let mut d = Vec::with_capacity(logits.len());
    for (l, t) in logits.iter().zip(y) {
        total += -log_sigmoid(-l) - t * l;
        d.push((sigmoid(*l) - t) * inv_b);
    }
    (total * inv_b, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ColumnEncoding;

    fn layout() -> FeatureLayout {
        FeatureLayout::from_encodings(&[
            ColumnEncoding::continuous("c", &[0.0, 1.0]),
            ColumnEncoding::binary("b"),
            ColumnEncoding::categorical("k", vec!["p".into(), "q".into(), "r".into()]).unwrap(),
        ])
    }

    #[test]
    fn gaussian_at_its_mean_with_unit_scale() {
        let l = FeatureLayout::from_encodings(&[
            ColumnEncoding::continuous("u", &[0.0, 1.0]),
            ColumnEncoding::continuous("v", &[0.0, 1.0]),
        ]);
        let head = Matrix::from_rows(&[vec![0.3, -1.0, 0.0, 0.0]]).unwrap();
        let x = Matrix::from_rows(&[vec![0.3, -1.0]]).unwrap();
        let (nll, _) = feature_nll(&l, &head, &x).unwrap();
        let expect = 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((nll[0] - expect).abs() < 1e-12);
        assert!((nll[1] - expect).abs() < 1e-12);
    }

    #[test]
    fn nll_gradient_matches_finite_differences() {
        let l = layout();
        let mut rng = Rng::new(5);
        let head = Matrix::from_vec(
            3,
            l.head_width(),
            rng.gaussian_vec(3 * l.head_width()).unwrap(),
        )
        .unwrap();
        let x = Matrix::from_rows(&[
            vec![0.4, 1.0, 0.0, 1.0, 0.0],
            vec![-1.2, 0.0, 1.0, 0.0, 0.0],
            vec![2.0, 1.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        let (_, d) = feature_nll(&l, &head, &x).unwrap();
        let f = |h: &Matrix| feature_nll(&l, h, &x).unwrap().0.iter().sum::<f64>();
        for k in 0..head.as_slice().len() {
            let mut hp = head.clone();
            let mut hm = head.clone();
            hp.as_mut_slice()[k] += 1e-5;
            hm.as_mut_slice()[k] -= 1e-5;
            let fd = (f(&hp) - f(&hm)) / 2e-5;
            assert!(
                (fd - d.as_slice()[k]).abs() < 1e-7,
                "{k}: {fd} vs {}",
                d.as_slice()[k]
            );
        }
    }

    #[test]
    fn point_prediction_discretizes() {
        let l = layout();
        let head = Matrix::from_rows(&[vec![0.7, -0.1, 0.2, 3.0, 1.0, 0.0]]).unwrap();
        let p = feature_point(&l, &head).unwrap();
        assert_eq!(p.row(0), &[0.7, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn floored_scale() {
        assert_eq!(sigma_of(-50.0), (SIGMA_FLOOR, true));
        assert_eq!(sigma_of(0.0), (1.0, false));
    }

    #[test]
    fn bernoulli_at_zero_logit() {
        let (v, d) = bernoulli_nll(&[0.0, 0.0], &[1.0, 0.0]);
        assert!((v - 2f64.ln()).abs() < 1e-12);
        assert_eq!(d, vec![-0.25, 0.25]);
    }
}
