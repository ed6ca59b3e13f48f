use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::rng;
use crate::router::{argmax, check_training};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    /// Hinge-loss weight against the L2 penalty.
    pub c: f64,
    pub epochs: usize,
    /// Initial step size; decays as `1 / (1 + epoch)`.
    pub learning_rate: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            epochs: 50,
            learning_rate: 0.01,
        }
    }
}

/// One-vs-rest linear machines on standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub n_features: usize,
    pub n_classes: usize,
    pub c: f64,
    pub mean: Vec<f64>,
    /// Per-feature standard deviation (1 for constant features).
    pub scale: Vec<f64>,
    /// Row-major `n_classes x n_features`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl SvmModel {
    /// Subgradient descent on `0.5 |w|^2 + C * sum hinge`, one sample at a
    /// time, separately per class. The weight vector is kept as a scalar
    /// times a vector so the shrinkage step costs O(1), and margins are
    /// computed from the sparse row plus a cached centering term.
    pub fn fit(
        x: &FeatureMatrix,
        y: &[usize],
        n_classes: usize,
        params: &SvmParams,
        seed: u64,
    ) -> Result<SvmModel> {
        check_training(x, y, n_classes)?;
        if !(params.c >= 0.0 && params.c.is_finite()) {
            return Err(Error::config("router.c must be non-negative"));
        }
        if !(params.learning_rate > 0.0 && params.learning_rate.is_finite()) {
            return Err(Error::config("router.learning_rate must be positive"));
        }
        let n = y.len();
        let f = x.n_features();
        let mut mean = vec![0.0; f];
        for r in 0..n {
            let (idx, val) = x.row(r);
            for (&j, &v) in idx.iter().zip(val) {
                mean[j as usize] += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var: Vec<f64> = mean.iter().map(|m| m * m * n as f64).collect();
        for r in 0..n {
            let (idx, val) = x.row(r);
            for (&j, &v) in idx.iter().zip(val) {
                let j = j as usize;
                var[j] += (v - mean[j]).powi(2) - mean[j] * mean[j];
            }
        }
        let scale: Vec<f64> = var
            .iter()
            .map(|v| {
                let sd = (v.max(0.0) / n as f64).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        // Standardized value of a zero entry, and mean/scale per feature.
        let shift: Vec<f64> = mean.iter().zip(&scale).map(|(m, s)| m / s).collect();

        // w_k = a_k * v_k; center_k = sum_j v_j * shift_j.
        let mut v = vec![0.0; n_classes * f];
        let mut a = vec![1.0; n_classes];
        let mut center = vec![0.0; n_classes];
        let mut bias = vec![0.0; n_classes];
        let mut order: Vec<usize> = (0..n).collect();
        let mut r = rng::seeded(seed);
        let mut dense = vec![0.0; f];
        for epoch in 0..params.epochs {
            let eta = params.learning_rate / (1.0 + epoch as f64);
            rng::shuffle(&mut r, &mut order);
            for &i in &order {
                let (idx, val) = x.row(i);
                let mut dense_ready = false;
                for k in 0..n_classes {
                    let target = if y[i] == k { 1.0 } else { -1.0 };
                    let vk = &mut v[k * f..(k + 1) * f];
                    let mut dot = 0.0;
                    for (&j, &xv) in idx.iter().zip(val) {
                        dot += vk[j as usize] * xv / scale[j as usize];
                    }
                    let margin = a[k] * (dot - center[k]) + bias[k];
                    a[k] *= 1.0 - eta / n as f64;
                    if params.c > 0.0 && target * margin < 1.0 {
                        if !dense_ready {
                            for (d, s) in dense.iter_mut().zip(&shift) {
                                *d = -s;
                            }
                            for (&j, &xv) in idx.iter().zip(val) {
                                dense[j as usize] += xv / scale[j as usize];
                            }
                            dense_ready = true;
                        }
                        let g = eta * params.c * target / a[k];
                        let mut dc = 0.0;
                        for ((w, d), s) in vk.iter_mut().zip(&dense).zip(&shift) {
                            *w += g * d;
                            dc += g * d * s;
                        }
                        center[k] += dc;
                        bias[k] += eta * params.c * target;
                    }
                    if a[k] < 1e-6 {
                        for w in vk.iter_mut() {
                            *w *= a[k];
                        }
                        center[k] *= a[k];
                        a[k] = 1.0;
                    }
                }
            }
        }
        let mut weights = vec![0.0; n_classes * f];
        for k in 0..n_classes {
            for j in 0..f {
                weights[k * f + j] = a[k] * v[k * f + j];
            }
        }
        if weights.iter().chain(&bias).any(|w| !w.is_finite()) {
            return Err(Error::Numeric(
                "SVM weights diverged; lower router.learning_rate".into(),
            ));
        }
        Ok(SvmModel {
            n_features: f,
            n_classes,
            c: params.c,
            mean,
            scale,
            weights,
            bias,
        })
    }

    pub fn margins(&self, value: impl Fn(usize) -> f64) -> Vec<f64> {
        let xs: Vec<f64> = (0..self.n_features)
            .map(|j| (value(j) - self.mean[j]) / self.scale[j])
            .collect();
        (0..self.n_classes)
            .map(|k| {
                let w = &self.weights[k * self.n_features..(k + 1) * self.n_features];
                w.iter().zip(&xs).map(|(a, b)| a * b).sum::<f64>() + self.bias[k]
            })
            .collect()
    }

    /// Softmax over margins; class = largest margin, lowest index on ties.
    pub fn predict_scores(&self, value: impl Fn(usize) -> f64) -> (usize, Vec<f64>) {
        let margins = self.margins(value);
        let class = argmax(&margins);
        let m = margins.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = margins.iter().map(|z| (z - m).exp()).collect();
        let sum: f64 = exps.iter().sum();
        (class, exps.iter().map(|e| e / sum).collect())
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let (f, k) = (self.n_features, self.n_classes);
        if self.mean.len() != f
            || self.scale.len() != f
            || self.weights.len() != f * k
            || self.bias.len() != k
        {
            return Err(Error::input("SVM parameter shapes are inconsistent"));
        }
        Ok(())
    }
}
