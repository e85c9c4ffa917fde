//! BCE loss, global-norm clipping, cosine schedule and AdamW.

use crate::error::{Error, Result};

pub const BCE_EPS: f64 = 1e-12;

/// Binary cross-entropy with the probability clamped to `[1e-12, 1 - 1e-12]`.
pub fn bce_loss(p: f64, label: bool) -> f64 {
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Scales every gradient by `clip_norm / g` when the global L2 norm `g`
/// exceeds `clip_norm`. Returns the norm before clipping.
pub fn clip_gradients(grads: &mut [&mut [f64]], clip_norm: f64) -> Result<f64> {
    let mut sq = 0.0;
    for g in grads.iter() {
        for v in g.iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite("gradient".into()));
            }
            sq += v * v;
        }
    }
    let norm = sq.sqrt();
    if norm > clip_norm {
        let scale = clip_norm / norm;
        for g in grads.iter_mut() {
            g.iter_mut().for_each(|v| *v *= scale);
        }
    }
    Ok(norm)
}

/// `lr_min + (lr - lr_min) * (1 + cos(pi * step / total)) / 2`.
pub fn cosine_lr(step: usize, total_steps: usize, lr: f64, lr_min: f64) -> Result<f64> {
    if total_steps == 0 || step > total_steps {
        return Err(Error::invalid(format!(
            "step {step} outside schedule of {total_steps} steps"
        )));
    }
    let progress = step as f64 / total_steps as f64;
    Ok(lr_min + 0.5 * (lr - lr_min) * (1.0 + (std::f64::consts::PI * progress).cos()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

/// AdamW state: first and second moments per tensor plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub config: AdamWConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl AdamW {
    pub fn new(config: AdamWConfig, tensor_lens: &[usize]) -> Self {
        Self {
            config,
            first: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
            second: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update at learning rate `lr`:
    ///
    /// ```text
    /// θ ← θ - lr·wd·θ
    /// m ← β1·m + (1-β1)·g,  v ← β2·v + (1-β2)·g²
    /// θ ← θ - lr·m̂ / (√v̂ + ε)
    /// ```
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], lr: f64) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} tensors, got {} parameters and {} gradients",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.first[i].len() || g.len() != self.first[i].len() {
                return Err(Error::Shape(format!(
                    "tensor {i}: state {} vs parameter {} vs gradient {}",
                    self.first[i].len(),
                    p.len(),
                    g.len()
                )));
            }
        }
        self.step += 1;
        let AdamWConfig {
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.first[i];
            let v = &mut self.second[i];
            for j in 0..p.len() {
                let gj = g[j];
                m[j] = beta1 * m[j] + (1.0 - beta1) * gj;
                v[j] = beta2 * v[j] + (1.0 - beta2) * gj * gj;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] -= lr * weight_decay * p[j];
                p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bce_examples() {
        assert!((bce_loss(0.5, true) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(bce_loss(1.0, true), -(1.0 - 1e-12f64).ln());
        assert!(bce_loss(1.0, true) < 1e-11);
        assert!((bce_loss(0.25, false) - 0.287_682_072_451_780_9).abs() < 1e-15);
        assert!(bce_loss(0.0, true).is_finite());
    }

    proptest! {
        #[test]
        fn bce_non_negative(p in 0.0f64..=1.0, label in any::<bool>()) {
            prop_assert!(bce_loss(p, label) >= 0.0);
        }

        #[test]
        fn clipping_idempotent_and_bounded(a in prop::collection::vec(-20.0f64..20.0, 1..20), b in prop::collection::vec(-20.0f64..20.0, 1..20), clip in 0.1f64..10.0) {
            let (mut x, mut y) = (a.clone(), b.clone());
            let g = clip_gradients(&mut [&mut x, &mut y], clip).unwrap();
            let after = x.iter().chain(&y).map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((after - g.min(clip)).abs() < 1e-12 * (1.0 + g));
            let (x1, y1) = (x.clone(), y.clone());
            clip_gradients(&mut [&mut x, &mut y], clip).unwrap();
            for (u, v) in x.iter().chain(&y).zip(x1.iter().chain(&y1)) {
                prop_assert!((u - v).abs() <= 1e-12 * v.abs().max(1.0));
            }
        }

        #[test]
        fn cosine_monotone(total in 1usize..500, lr in 1e-6f64..1.0, frac in 0.0f64..1.0) {
            let lr_min = lr * frac;
            let mut prev = f64::INFINITY;
            for s in 0..=total {
                let v = cosine_lr(s, total, lr, lr_min).unwrap();
                prop_assert!(v <= prev + 1e-15);
                prev = v;
            }
        }
    }

    #[test]
    fn clipping_examples() {
        // norm 10 -> halved
        let mut g = vec![6.0, 8.0];
        let n = clip_gradients(&mut [&mut g], 5.0).unwrap();
        assert_eq!(n, 10.0);
        assert_eq!(g, [3.0, 4.0]);
        let mut g = vec![0.0, 3.0];
        clip_gradients(&mut [&mut g], 5.0).unwrap();
        assert_eq!(g, [0.0, 3.0]);
        let mut bad = vec![f64::NAN];
        assert!(clip_gradients(&mut [&mut bad], 5.0).is_err());
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_lr(0, 100, 1e-3, 0.0).unwrap(), 1e-3);
        assert!(cosine_lr(100, 100, 1e-3, 1e-5).unwrap() - 1e-5 < 1e-18);
        assert!((cosine_lr(50, 100, 1e-3, 1e-5).unwrap() - (1e-3 + 1e-5) / 2.0).abs() < 1e-15);
        assert!(cosine_lr(101, 100, 1e-3, 0.0).is_err());
        assert!(cosine_lr(0, 0, 1e-3, 0.0).is_err());
    }

    fn cfg(wd: f64) -> AdamWConfig {
        AdamWConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: wd,
        }
    }

    #[test]
    fn decoupled_weight_decay() {
        let mut opt = AdamW::new(cfg(0.0), &[3]);
        let mut p = vec![1.0, -2.0, 3.0];
        opt.step(&mut [&mut p], &[&[0.0; 3]], 1.0).unwrap();
        assert_eq!(p, [1.0, -2.0, 3.0]);

        let mut opt = AdamW::new(cfg(0.1), &[3]);
        let mut p = vec![1.0, -2.0, 3.0];
        opt.step(&mut [&mut p], &[&[0.0; 3]], 1.0).unwrap();
        for (a, b) in p.iter().zip([0.9, -1.8, 2.7]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn scalar_recurrence_oracle() {
        // Hand-unrolled update equations for one scalar over three steps.
        let (b1, b2, eps, wd) = (0.9f64, 0.999f64, 1e-8, 0.01);
        let grads = [0.5, -1.0, 2.0];
        let lrs = [0.1, 0.05, 0.01];
        let (mut theta, mut m, mut v) = (1.5f64, 0.0f64, 0.0f64);
        for (t, (&g, &lr)) in grads.iter().zip(&lrs).enumerate() {
            let t = (t + 1) as i32;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(t));
            let v_hat = v / (1.0 - b2.powi(t));
            theta = theta * (1.0 - lr * wd) - lr * m_hat / (v_hat.sqrt() + eps);
        }
        let mut opt = AdamW::new(cfg(wd), &[1]);
        let mut p = vec![1.5];
        for (&g, &lr) in grads.iter().zip(&lrs) {
            opt.step(&mut [&mut p], &[&[g]], lr).unwrap();
        }
        assert!((p[0] - theta).abs() < 1e-14, "{} vs {theta}", p[0]);
        assert_eq!(opt.steps_taken(), 3);
    }

    #[test]
    fn shape_mismatch() {
        let mut opt = AdamW::new(cfg(0.0), &[2]);
        let mut p = vec![0.0; 3];
        assert!(opt.step(&mut [&mut p], &[&[0.0; 3]], 0.1).is_err());
    }
}
