use serde::{Deserialize, Serialize};

use super::mlp::Params;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment accumulators for one parameter group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(config: AdamConfig, num_params: usize) -> Self {
        AdamState {
            config,
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }

    pub fn for_params(config: AdamConfig, params: &impl Params) -> Self {
        Self::new(config, params.num_params())
    }

    /// One bias-corrected Adam update. A non-finite gradient aborts the
    /// update before any parameter is touched.
    pub fn step(&mut self, params: &mut impl Params, grads: &impl Params) -> Result<()> {
        let g = grads.flatten();
        if g.len() != self.m.len() || params.num_params() != self.m.len() {
            return Err(Error::shape(
                "adam_step",
                self.m.len(),
                format!("params {}, grads {}", params.num_params(), g.len()),
            ));
        }
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                component: format!("gradient entry {i}"),
                epoch: None,
            });
        }
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let bc1 = 1.0 - beta1.powf(self.step as f64);
        let bc2 = 1.0 - beta2.powf(self.step as f64);
        for ((m, v), &gi) in self.m.iter_mut().zip(&mut self.v).zip(&g) {
            *m = beta1 * *m + (1.0 - beta1) * gi;
            *v = beta2 * *v + (1.0 - beta2) * gi * gi;
        }
        let (m, v) = (&self.m, &self.v);
        let mut off = 0;
        params.visit_mut(&mut |s| {
            for (k, p) in s.iter_mut().enumerate() {
                let mhat = m[off + k] / bc1;
                let vhat = v[off + k] / bc2;
                *p -= lr * mhat / (vhat.sqrt() + eps);
            }
            off += s.len();
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Scalar(Vec<f64>);

    impl Params for Scalar {
        fn visit(&self, f: &mut dyn FnMut(&[f64])) {
            f(&self.0)
        }
        fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
            f(&mut self.0)
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Scalar(vec![1.0, -2.0]);
        let mut s = AdamState::for_params(AdamConfig::default(), &p);
        s.step(&mut p, &Scalar(vec![0.0, 0.0])).unwrap();
        assert_eq!(p.0, vec![1.0, -2.0]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let cfg = AdamConfig::default();
        let mut p = Scalar(vec![0.0, 0.0]);
        let mut s = AdamState::for_params(cfg, &p);
        let g = [0.3, -5.0];
        s.step(&mut p, &Scalar(g.to_vec())).unwrap();
        for (pi, gi) in p.0.iter().zip(g) {
            let expect = -cfg.lr * gi / (gi.abs() + cfg.eps);
            assert!((pi - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn scalar_quadratic_converges() {
        let cfg = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        let mut w = Scalar(vec![0.0]);
        let mut s = AdamState::for_params(cfg, &w);
        for _ in 0..100 {
            let g = 2.0 * (w.0[0] - 3.0);
            s.step(&mut w, &Scalar(vec![g])).unwrap();
        }
        assert!((w.0[0] - 3.0).abs() < 0.5, "w = {}", w.0[0]);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut p = Scalar(vec![1.0]);
        let mut s = AdamState::for_params(AdamConfig::default(), &p);
        let err = s.step(&mut p, &Scalar(vec![f64::NAN])).unwrap_err();
        assert!(err.is_numerical());
        assert_eq!(p.0, vec![1.0]);
        assert_eq!(s.step, 0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = Scalar(vec![1.0]);
        let mut s = AdamState::for_params(AdamConfig::default(), &p);
        assert!(s.step(&mut p, &Scalar(vec![1.0, 2.0])).is_err());
    }
}
