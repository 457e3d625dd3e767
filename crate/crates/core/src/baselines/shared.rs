use crate::data::{Batch, FeatureLayout};
use crate::error::{Error, Result};
use crate::model::heads::feature_nll;
use crate::numerics::Matrix;

/// `[x_d, x_r]` for decoders that reconstruct all features at once.
pub(crate) fn features(batch: &Batch) -> Result<Matrix> {
    Matrix::hstack(&[&batch.xd, &batch.xr])
}

pub(crate) fn check_widths(
    op: &'static str,
    xd: &FeatureLayout,
    xr: &FeatureLayout,
    batch: &Batch,
) -> Result<()> {
    if batch.xd.cols() != xd.width || batch.xr.cols() != xr.width {
        return Err(Error::shape(
            op,
            format!("x_d width {}, x_r width {}", xd.width, xr.width),
            format!(
                "x_d width {}, x_r width {}",
                batch.xd.cols(),
                batch.xr.cols()
            ),
        ));
    }
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    Ok(())
}

/// NLL of all features under a joint head, split into the `x_d` and `x_r`
/// parts (the first `n_d_blocks` blocks belong to `x_d`).
pub(crate) fn split_nll(
    layout: &FeatureLayout,
    n_d_blocks: usize,
    head: &Matrix,
    x: &Matrix,
) -> Result<(f64, f64, Matrix)> {
    let (per_block, d) = feature_nll(layout, head, x)?;
    let (xd, xr) = per_block.split_at(n_d_blocks);
    Ok((xd.iter().sum(), xr.iter().sum(), d))
}

/// Splits a point or sample in joint feature space into `(x_d, x_r)`.
pub(crate) fn split_features(x: &Matrix, xd_width: usize) -> (Matrix, Matrix) {
    (
        x.column_range(0, xd_width),
        x.column_range(xd_width, x.cols()),
    )
}
