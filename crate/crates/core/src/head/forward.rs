use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use super::activation::{gelu, gelu_grad, sigmoid};
use super::params::{Affine, HeadParams, LayerNorm, ProbeParams};
use crate::error::{Error, Result};

/// Row-wise softmax with the row maximum subtracted first.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

fn check_input(x: ArrayView2<f64>, patch_dim: usize) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::Shape("clip has no patches".into()));
    }
    if x.ncols() != patch_dim {
        return Err(Error::Shape(format!(
            "clip has {} features per patch, head expects {patch_dim}",
            x.ncols()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("clip features".into()));
    }
    Ok(())
}

struct ProbeCache {
    attention: Array2<f64>,
    projected: Array2<f64>,
}

fn probe_forward(x: ArrayView2<f64>, probe: &ProbeParams) -> (Array1<f64>, ProbeCache) {
    let scale = 1.0 / (probe.patch_dim() as f64).sqrt();
    let logits = probe.queries.dot(&x.t()) * scale;
    let attention = softmax_rows(&logits);
    let projected = x.dot(&probe.projection);
    let pooled = attention.dot(&projected);
    let len = pooled.len();
    let features = pooled.into_shape_with_order(len).expect("contiguous");
    (
        features,
        ProbeCache {
            attention,
            projected,
        },
    )
}

/// Attentive pooling of one clip: rows of `softmax(Q Xᵀ/√D) X W`, concatenated.
pub fn attentive_pool(x: ArrayView2<f64>, probe: &ProbeParams) -> Result<Array1<f64>> {
    if probe.projection.nrows() != probe.patch_dim() {
        return Err(Error::Shape(format!(
            "projection has {} rows, queries have width {}",
            probe.projection.nrows(),
            probe.patch_dim()
        )));
    }
    check_input(x, probe.patch_dim())?;
    Ok(probe_forward(x, probe).0)
}

/// Inverted-dropout scale factors (0 or 1/(1-p)) for the two hidden layers.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub layer1: Vec<f64>,
    pub layer2: Vec<f64>,
}

/// How dropout behaves during a forward pass.
pub enum Dropout<'r, R: Rng> {
    /// Evaluation: identity.
    Off,
    /// Training: masks drawn from the generator.
    Sample(&'r mut R),
    /// Training with previously recorded masks.
    Replay(&'r DropoutMasks),
}

impl Dropout<'static, rand_chacha::ChaCha8Rng> {
    pub fn off() -> Self {
        Dropout::Off
    }
}

struct HiddenCache {
    input: Array1<f64>,
    normalized: Array1<f64>,
    inv_std: f64,
    pre_activation: Array1<f64>,
    mask: Option<Vec<f64>>,
}

fn hidden_forward(
    input: Array1<f64>,
    fc: &Affine,
    norm: &LayerNorm,
    eps: f64,
    mask: Option<Vec<f64>>,
) -> (Array1<f64>, HiddenCache) {
    let z = input.dot(&fc.weight) + &fc.bias;
    let n = z.len() as f64;
    let mean = z.sum() / n;
    let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / (var + eps).sqrt();
    let normalized = z.mapv(|v| (v - mean) * inv_std);
    let pre_activation = &normalized * &norm.gain + &norm.bias;
    let mut out = pre_activation.mapv(gelu);
    if let Some(m) = &mask {
        out.iter_mut().zip(m).for_each(|(o, s)| *o *= s);
    }
    (
        out,
        HiddenCache {
            input,
            normalized,
            inv_std,
            pre_activation,
            mask,
        },
    )
}

/// Adds this layer's gradients into `fc_grad` and `norm_grad`; returns the grad wrt its input.
fn hidden_backward(
    upstream: Array1<f64>,
    cache: &HiddenCache,
    fc: &Affine,
    norm: &LayerNorm,
    fc_grad: &mut Affine,
    norm_grad: &mut LayerNorm,
) -> Array1<f64> {
    let mut d_out = upstream;
    if let Some(m) = &cache.mask {
        d_out.iter_mut().zip(m).for_each(|(g, s)| *g *= s);
    }
    let d_pre = &d_out * &cache.pre_activation.mapv(gelu_grad);
    norm_grad
        .gain
        .scaled_add(1.0, &(&d_pre * &cache.normalized));
    norm_grad.bias.scaled_add(1.0, &d_pre);
    let d_normalized = &d_pre * &norm.gain;
    let n = d_normalized.len() as f64;
    let mean_d = d_normalized.sum() / n;
    let mean_dn = d_normalized.dot(&cache.normalized) / n;
    let d_z = (&d_normalized - mean_d - &cache.normalized * mean_dn) * cache.inv_std;
    add_outer(&mut fc_grad.weight, cache.input.view(), d_z.view());
    let d_input = fc.weight.dot(&d_z);
    fc_grad.bias.scaled_add(1.0, &d_z);
    d_input
}

/// `acc += a bᵀ`.
fn add_outer(acc: &mut Array2<f64>, a: ArrayView1<f64>, b: ArrayView1<f64>) {
    for (mut row, &ai) in acc.rows_mut().into_iter().zip(a.iter()) {
        if ai != 0.0 {
            row.scaled_add(ai, &b);
        }
    }
}

/// Everything recorded by one forward pass that the backward pass needs.
pub struct ForwardPass<'a> {
    params: &'a HeadParams,
    x: ArrayView2<'a, f64>,
    probe: Option<ProbeCache>,
    hidden: Option<(HiddenCache, HiddenCache)>,
    last_hidden: Array1<f64>,
    pub logit: f64,
    pub probability: f64,
}

impl<'a> ForwardPass<'a> {
    pub fn run<R: Rng>(
        x: ArrayView2<'a, f64>,
        params: &'a HeadParams,
        dropout: Dropout<'_, R>,
    ) -> Result<Self> {
        let cfg = &params.config;
        check_input(x, cfg.patch_dim)?;

        let (features, probe) = match &params.probe {
            Some(p) => {
                let (f, cache) = probe_forward(x, p);
                (f, Some(cache))
            }
            None => (x.mean_axis(Axis(0)).expect("non-empty"), None),
        };

        let (last_hidden, hidden) = match &params.hidden {
            Some(layers) => {
                let width = cfg.hidden_dim;
                let p = cfg.dropout;
                let (m1, m2) = match dropout {
                    Dropout::Off => (None, None),
                    Dropout::Sample(rng) => {
                        let keep = 1.0 / (1.0 - p);
                        let mut draw = || -> Vec<f64> {
                            (0..width)
                                .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
                                .collect()
                        };
                        let a = draw();
                        let b = draw();
                        (Some(a), Some(b))
                    }
                    Dropout::Replay(masks) => {
                        if masks.layer1.len() != width || masks.layer2.len() != width {
                            return Err(Error::Shape(format!(
                                "recorded dropout masks ({}, {}) do not match hidden width {width}",
                                masks.layer1.len(),
                                masks.layer2.len()
                            )));
                        }
                        (Some(masks.layer1.clone()), Some(masks.layer2.clone()))
                    }
                };
                let eps = cfg.layer_norm_eps;
                let (h1, c1) = hidden_forward(features, &layers.fc1, &layers.norm1, eps, m1);
                let (h2, c2) = hidden_forward(h1, &layers.fc2, &layers.norm2, eps, m2);
                (h2, Some((c1, c2)))
            }
            None => (features, None),
        };

        if last_hidden.len() != params.output.weight.nrows() {
            return Err(Error::Shape(format!(
                "classifier expects {} inputs, got {}",
                params.output.weight.nrows(),
                last_hidden.len()
            )));
        }
        let logit = last_hidden.dot(&params.output.weight.column(0)) + params.output.bias[0];
        Ok(Self {
            params,
            x,
            probe,
            hidden,
            last_hidden,
            logit,
            probability: sigmoid(logit),
        })
    }

    /// The dropout masks used by this pass, if any were applied.
    pub fn masks(&self) -> Option<DropoutMasks> {
        let (c1, c2) = self.hidden.as_ref()?;
        Some(DropoutMasks {
            layer1: c1.mask.clone()?,
            layer2: c2.mask.clone()?,
        })
    }

    /// Gradients of `loss_scale * BCE(p, label)` for every enabled parameter.
    ///
    /// Uses `dL/dlogit = p - y`, the exact derivative wherever the loss clamp
    /// (|p - {0,1}| < 1e-12) is inactive.
    pub fn backward(&self, label: bool, loss_scale: f64) -> HeadParams {
        self.backward_target(if label { 1.0 } else { 0.0 }, loss_scale)
    }

    /// As [`ForwardPass::backward`] for a soft target in `[0, 1]`.
    pub fn backward_target(&self, target: f64, loss_scale: f64) -> HeadParams {
        self.backward_from_logit((self.probability - target) * loss_scale)
    }

    pub fn backward_from_logit(&self, d_logit: f64) -> HeadParams {
        let mut grads = self.params.zeros_like();
        self.accumulate_gradients(d_logit, &mut grads);
        grads
    }

    /// Adds the gradients for an upstream `dL/dlogit` into `grads`, which must
    /// share this pass's parameter layout.
    pub fn accumulate_gradients(&self, d_logit: f64, grads: &mut HeadParams) {
        let params = self.params;

        grads
            .output
            .weight
            .column_mut(0)
            .scaled_add(d_logit, &self.last_hidden);
        grads.output.bias[0] += d_logit;
        let mut d_features = params.output.weight.column(0).to_owned() * d_logit;

        if let (Some(layers), Some((c1, c2))) = (&params.hidden, &self.hidden) {
            let g = grads.hidden.as_mut().expect("mode has hidden layers");
            let d_h1 = hidden_backward(
                d_features,
                c2,
                &layers.fc2,
                &layers.norm2,
                &mut g.fc2,
                &mut g.norm2,
            );
            d_features = hidden_backward(
                d_h1,
                c1,
                &layers.fc1,
                &layers.norm1,
                &mut g.fc1,
                &mut g.norm1,
            );
        }

        if let (Some(probe), Some(cache)) = (&params.probe, &self.probe) {
            let m = probe.num_queries();
            let d = probe.proj_dim();
            let d_pooled = d_features
                .into_shape_with_order((m, d))
                .expect("feature length is M*d");
            let d_attention = d_pooled.dot(&cache.projected.t());
            let d_projected = cache.attention.t().dot(&d_pooled);
            let mut d_logits = cache.attention.clone();
            for (mut row, d_row) in d_logits.rows_mut().into_iter().zip(d_attention.rows()) {
                let inner: f64 = row.iter().zip(d_row.iter()).map(|(a, g)| a * g).sum();
                row.iter_mut()
                    .zip(d_row.iter())
                    .for_each(|(a, g)| *a *= g - inner);
            }
            let scale = 1.0 / (probe.patch_dim() as f64).sqrt();
            let g = grads.probe.as_mut().expect("mode has probe");
            g.queries.scaled_add(scale, &d_logits.dot(&self.x));
            g.projection.scaled_add(1.0, &self.x.t().dot(&d_projected));
        }
    }
}

/// Collision probability for one clip.
pub fn head_forward<R: Rng>(
    x: ArrayView2<f64>,
    params: &HeadParams,
    dropout: Dropout<'_, R>,
) -> Result<f64> {
    Ok(ForwardPass::run(x, params, dropout)?.probability)
}

/// Train-mode forward with masks drawn from `rng`, then the BCE gradient.
/// Returns (probability, gradients).
pub fn head_backward<R: Rng>(
    x: ArrayView2<f64>,
    params: &HeadParams,
    label: bool,
    rng: &mut R,
) -> Result<(f64, HeadParams)> {
    let pass = ForwardPass::run(x, params, Dropout::Sample(rng))?;
    Ok((pass.probability, pass.backward(label, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::super::params::{HeadConfig, HeadMode};
    use super::*;
    use crate::trainer::bce_loss;
    use ndarray::{array, Array};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array::from_shape_simple_fn((rows, cols), || rng.random_range(-1.5..1.5))
    }

    fn config(mode: HeadMode) -> HeadConfig {
        HeadConfig {
            mode,
            patch_dim: 8,
            num_queries: 2,
            proj_dim: 3,
            hidden_dim: 7,
            dropout: 0.1,
            layer_norm_eps: 1e-5,
        }
    }

    /// Scalar-loop evaluation of the probe, written without matrix products.
    fn pool_oracle(x: &Array2<f64>, q: &Array2<f64>, w: &Array2<f64>) -> Vec<f64> {
        let (p, dim) = x.dim();
        let m = q.nrows();
        let d = w.ncols();
        let mut out = Vec::new();
        for i in 0..m {
            let mut scores = vec![0.0; p];
            for j in 0..p {
                let mut s = 0.0;
                for k in 0..dim {
                    s += q[[i, k]] * x[[j, k]];
                }
                scores[j] = s / (dim as f64).sqrt();
            }
            let denom: f64 = scores.iter().map(|s| s.exp()).sum();
            let weights: Vec<f64> = scores.iter().map(|s| s.exp() / denom).collect();
            for c in 0..d {
                let mut acc = 0.0;
                for j in 0..p {
                    let mut xw = 0.0;
                    for k in 0..dim {
                        xw += x[[j, k]] * w[[k, c]];
                    }
                    acc += weights[j] * xw;
                }
                out.push(acc);
            }
        }
        out
    }

    #[test]
    fn pool_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = random_matrix(3, 4, &mut rng);
            let probe = ProbeParams {
                queries: random_matrix(2, 4, &mut rng),
                projection: random_matrix(4, 2, &mut rng),
            };
            let got = attentive_pool(x.view(), &probe).unwrap();
            let want = pool_oracle(&x, &probe.queries, &probe.projection);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_patch_and_identical_patches() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let probe = ProbeParams {
            queries: random_matrix(3, 4, &mut rng) * 5.0,
            projection: random_matrix(4, 2, &mut rng),
        };
        let x1 = random_matrix(1, 4, &mut rng);
        let xw = x1.row(0).dot(&probe.projection);
        let out = attentive_pool(x1.view(), &probe).unwrap();
        for m in 0..3 {
            assert!((out[2 * m] - xw[0]).abs() < 1e-12 && (out[2 * m + 1] - xw[1]).abs() < 1e-12);
        }
        let same = Array2::from_shape_fn((6, 4), |(_, k)| x1[[0, k]]);
        let out = attentive_pool(same.view(), &probe).unwrap();
        for m in 0..3 {
            assert!((out[2 * m] - xw[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn pool_errors() {
        let probe = ProbeParams {
            queries: Array2::zeros((2, 4)),
            projection: Array2::zeros((4, 2)),
        };
        assert!(attentive_pool(Array2::zeros((3, 5)).view(), &probe).is_err());
        let mut x = Array2::zeros((3, 4));
        x[[1, 1]] = f64::NAN;
        assert!(matches!(
            attentive_pool(x.view(), &probe),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn softmax_rows_sum_to_one_and_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let logits = random_matrix(4, 9, &mut rng) * 300.0;
        let a = softmax_rows(&logits);
        for row in a.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        let mut shifted = logits.clone();
        for (i, mut row) in shifted.rows_mut().into_iter().enumerate() {
            row += 17.0 * i as f64 - 40.0;
        }
        let b = softmax_rows(&shifted);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn pool_invariant_under_patch_permutation(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_matrix(5, 4, &mut rng);
            let probe = ProbeParams {
                queries: random_matrix(2, 4, &mut rng),
                projection: random_matrix(4, 3, &mut rng),
            };
            let mut order: Vec<usize> = (0..5).collect();
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
            let permuted = x.select(Axis(0), &order);
            let a = attentive_pool(x.view(), &probe).unwrap();
            let b = attentive_pool(permuted.view(), &probe).unwrap();
            for (u, v) in a.iter().zip(b.iter()) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_output_layer_gives_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for mode in HeadMode::ALL {
            let mut params = HeadParams::init(config(mode), &mut rng).unwrap();
            params.output.weight.fill(0.0);
            params.output.bias.fill(0.0);
            let x = random_matrix(5, 8, &mut rng);
            assert_eq!(
                head_forward(x.view(), &params, Dropout::off()).unwrap(),
                0.5
            );
        }
    }

    #[test]
    fn eval_is_deterministic_and_train_replays() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = HeadParams::init(config(HeadMode::ProbeMlp), &mut rng).unwrap();
        let x = random_matrix(5, 8, &mut rng);
        let a = head_forward(x.view(), &params, Dropout::off()).unwrap();
        let b = head_forward(x.view(), &params, Dropout::off()).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());

        let mut r1 = ChaCha8Rng::seed_from_u64(99);
        let pass = ForwardPass::run(x.view(), &params, Dropout::Sample(&mut r1)).unwrap();
        let masks = pass.masks().unwrap();
        let mut r2 = ChaCha8Rng::seed_from_u64(99);
        let again = head_forward(x.view(), &params, Dropout::Sample(&mut r2)).unwrap();
        let replay =
            head_forward(x.view(), &params, Dropout::<ChaCha8Rng>::Replay(&masks)).unwrap();
        assert_eq!(pass.probability.to_bits(), again.to_bits());
        assert_eq!(pass.probability.to_bits(), replay.to_bits());
        assert!(masks
            .layer1
            .iter()
            .all(|&s| s == 0.0 || (s - 1.0 / 0.9).abs() < 1e-15));

        let short = DropoutMasks {
            layer1: vec![1.0; 3],
            layer2: vec![1.0; 7],
        };
        assert!(
            ForwardPass::run(x.view(), &params, Dropout::<ChaCha8Rng>::Replay(&short)).is_err()
        );
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let params = HeadParams::init(config(HeadMode::ProbeMlp), &mut rng).unwrap();
        let x = random_matrix(5, 9, &mut rng);
        assert!(head_forward(x.view(), &params, Dropout::off()).is_err());
    }

    #[test]
    fn linear_single_patch_is_logistic_regression() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let params = HeadParams::init(config(HeadMode::Linear), &mut rng).unwrap();
        let x = random_matrix(1, 8, &mut rng);
        let z: f64 = (0..8)
            .map(|k| x[[0, k]] * params.output.weight[[k, 0]])
            .sum::<f64>()
            + params.output.bias[0];
        let closed = 1.0 / (1.0 + (-z).exp());
        let got = head_forward(x.view(), &params, Dropout::off()).unwrap();
        assert!((got - closed).abs() < 1e-14);
    }

    fn loss_with_masks(
        x: &Array2<f64>,
        params: &HeadParams,
        label: bool,
        masks: Option<&DropoutMasks>,
    ) -> f64 {
        let p = match masks {
            Some(m) => head_forward(x.view(), params, Dropout::<ChaCha8Rng>::Replay(m)),
            None => head_forward(x.view(), params, Dropout::off()),
        }
        .unwrap();
        bce_loss(p, label)
    }

    /// Central differences over every parameter entry.
    fn finite_difference(
        x: &Array2<f64>,
        params: &HeadParams,
        label: bool,
        masks: Option<&DropoutMasks>,
    ) -> Vec<Vec<f64>> {
        let h = 1e-5;
        let n_tensors = params.tensors().len();
        let mut out = Vec::new();
        for t in 0..n_tensors {
            let len = params.tensors()[t].1.len();
            let mut g = Vec::with_capacity(len);
            for i in 0..len {
                let mut plus = params.clone();
                plus.tensors_mut()[t].1[i] += h;
                let mut minus = params.clone();
                minus.tensors_mut()[t].1[i] -= h;
                g.push(
                    (loss_with_masks(x, &plus, label, masks)
                        - loss_with_masks(x, &minus, label, masks))
                        / (2.0 * h),
                );
            }
            out.push(g);
        }
        out
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for mode in HeadMode::ALL {
            for trial in 0..3 {
                let params = HeadParams::init(config(mode), &mut rng).unwrap();
                let x = random_matrix(5, 8, &mut rng) * 2.0;
                let label = trial % 2 == 0;
                let mut drop_rng = ChaCha8Rng::seed_from_u64(trial);
                let pass =
                    ForwardPass::run(x.view(), &params, Dropout::Sample(&mut drop_rng)).unwrap();
                let masks = pass.masks();
                let grads = pass.backward(label, 1.0);
                let fd = finite_difference(&x, &params, label, masks.as_ref());
                for ((name, g), f) in grads.tensors().iter().zip(&fd) {
                    for (a, b) in g.iter().zip(f) {
                        assert!(rel_err(*a, *b) < 1e-4, "{mode} {name}: {a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn disabled_components_have_no_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = HeadParams::init(config(HeadMode::Linear), &mut rng).unwrap();
        let x = random_matrix(5, 8, &mut rng);
        let (_, g) = head_backward(x.view(), &params, true, &mut rng).unwrap();
        assert!(g.probe.is_none() && g.hidden.is_none());
    }

    #[test]
    fn stationary_point_and_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = random_matrix(5, 8, &mut rng);
        let params = HeadParams::init(config(HeadMode::ProbeMlp), &mut rng).unwrap();
        let pass = ForwardPass::run(x.view(), &params, Dropout::off()).unwrap();
        assert_eq!(
            pass.backward_target(pass.probability, 1.0).squared_norm(),
            0.0
        );

        let params = HeadParams::init(config(HeadMode::ProbeMlp), &mut rng).unwrap();
        let pass = ForwardPass::run(x.view(), &params, Dropout::off()).unwrap();
        let g1 = pass.backward(true, 1.0);
        let g2 = pass.backward(true, 2.0);
        for ((_, a), (_, b)) in g1.tensors().iter().zip(g2.tensors().iter()) {
            for (u, v) in a.iter().zip(b.iter()) {
                assert!((2.0 * u - v).abs() <= 1e-15 * v.abs().max(1.0));
            }
        }
    }

    #[test]
    fn attention_weights_example() {
        // Two patches, one query aligned with the first patch.
        let x = array![[2.0, 0.0], [0.0, 2.0]];
        let probe = ProbeParams {
            queries: array![[2.0f64.sqrt() * 3.0_f64.ln() / 2.0, 0.0]],
            projection: array![[1.0], [0.0]],
        };
        // logits: [ln 3, 0] -> weights [3/4, 1/4]; xW = [2, 0]
        let out = attentive_pool(x.view(), &probe).unwrap();
        assert!((out[0] - 1.5).abs() < 1e-12);
    }
}
