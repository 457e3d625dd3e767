use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Loss components of one step or one epoch, all averaged over records.
///
/// `recon_*` are negative log-likelihoods. Single-latent baselines report
/// their whole KL under `kl_d`. `disc` is the discriminator objective that
/// the discriminator maximizes; it is not part of `total`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub recon_xd: f64,
    pub recon_xr: f64,
    pub recon_y: f64,
    pub kl_d: f64,
    pub kl_r: f64,
    pub tc: f64,
    pub disc: f64,
    pub fair: f64,
    pub mmd: f64,
    pub aux: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub const COLUMNS: [&'static str; 11] = [
        "recon_xd", "recon_xr", "recon_y", "kl_d", "kl_r", "tc", "disc", "fair", "mmd", "aux",
        "total",
    ];

    pub fn values(&self) -> [f64; 11] {
        [
            self.recon_xd,
            self.recon_xr,
            self.recon_y,
            self.kl_d,
            self.kl_r,
            self.tc,
            self.disc,
            self.fair,
            self.mmd,
            self.aux,
            self.total,
        ]
    }

    fn values_mut(&mut self) -> [&mut f64; 11] {
        [
            &mut self.recon_xd,
            &mut self.recon_xr,
            &mut self.recon_y,
            &mut self.kl_d,
            &mut self.kl_r,
            &mut self.tc,
            &mut self.disc,
            &mut self.fair,
            &mut self.mmd,
            &mut self.aux,
            &mut self.total,
        ]
    }

    /// Fails on the first non-finite component, naming it.
    pub fn check_finite(&self, epoch: Option<usize>) -> Result<()> {
        for (name, v) in Self::COLUMNS.iter().zip(self.values()) {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    component: (*name).to_string(),
                    epoch,
                });
            }
        }
        Ok(())
    }

    pub(crate) fn add_scaled(&mut self, other: &LossBreakdown, k: f64) {
        for (a, b) in self.values_mut().into_iter().zip(other.values()) {
            *a += k * b;
        }
    }
}

/// Per-epoch history as CSV with an `epoch` column (1-based).
pub fn history_csv(history: &[LossBreakdown]) -> String {
    let mut s = String::from("epoch,");
    s.push_str(&LossBreakdown::COLUMNS.join(","));
    s.push('\n');
    for (e, row) in history.iter().enumerate() {
        write!(s, "{}", e + 1).unwrap();
        for v in row.values() {
            write!(s, ",{v}").unwrap();
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_the_bad_component() {
        let l = LossBreakdown {
            kl_r: f64::NAN,
            ..Default::default()
        };
        let msg = l.check_finite(Some(3)).unwrap_err().to_string();
        assert!(msg.contains("kl_r") && msg.contains("epoch 3"), "{msg}");
    }

    #[test]
    fn csv_has_one_row_per_epoch() {
        let csv = history_csv(&[LossBreakdown::default(), LossBreakdown::default()]);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("epoch,recon_xd"));
    }
}
