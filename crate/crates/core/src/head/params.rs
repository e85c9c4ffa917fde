use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Head configurations compared in the architecture ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadMode {
    /// Mean over patches, then one affine layer.
    Linear,
    /// Attentive probe, then one affine layer.
    ProbeLinear,
    /// Attentive probe, then the three-layer MLP.
    ProbeMlp,
}

impl HeadMode {
    pub const ALL: [HeadMode; 3] = [HeadMode::Linear, HeadMode::ProbeLinear, HeadMode::ProbeMlp];

    pub fn probe_enabled(self) -> bool {
        !matches!(self, HeadMode::Linear)
    }

    pub fn mlp_enabled(self) -> bool {
        matches!(self, HeadMode::ProbeMlp)
    }

    pub fn from_flags(probe_enabled: bool, mlp_enabled: bool) -> Result<Self> {
        match (probe_enabled, mlp_enabled) {
            (false, false) => Ok(HeadMode::Linear),
            (true, false) => Ok(HeadMode::ProbeLinear),
            (true, true) => Ok(HeadMode::ProbeMlp),
            (false, true) => Err(Error::invalid(
                "an MLP head without the probe is not a supported configuration",
            )),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HeadMode::Linear => "linear",
            HeadMode::ProbeLinear => "probe-linear",
            HeadMode::ProbeMlp => "probe-mlp",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            HeadMode::Linear => "frozen base",
            HeadMode::ProbeLinear => "frozen base + probe",
            HeadMode::ProbeMlp => "frozen base + probe + MLP",
        }
    }
}

impl std::str::FromStr for HeadMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "linear" => Ok(HeadMode::Linear),
            "probe-linear" | "probe" => Ok(HeadMode::ProbeLinear),
            "probe-mlp" | "mlp" => Ok(HeadMode::ProbeMlp),
            other => Err(format!("unknown head mode `{other}`")),
        }
    }
}

impl std::fmt::Display for HeadMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub mode: HeadMode,
    /// D, the per-patch feature width.
    pub patch_dim: usize,
    /// M, number of learned queries.
    pub num_queries: usize,
    /// d, projection width per query.
    pub proj_dim: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
    pub layer_norm_eps: f64,
}

impl HeadConfig {
    /// 12 queries, 64-wide projection, 768 hidden units, 0.1 dropout over 1024-d patches.
    pub fn reference() -> Self {
        Self {
            mode: HeadMode::ProbeMlp,
            patch_dim: 1024,
            num_queries: 12,
            proj_dim: 64,
            hidden_dim: 768,
            dropout: 0.1,
            layer_norm_eps: 1e-5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_dim == 0 {
            return Err(Error::invalid("patch dimension must be positive"));
        }
        if self.mode.probe_enabled() && (self.num_queries == 0 || self.proj_dim == 0) {
            return Err(Error::invalid(
                "probe needs at least one query and projection width",
            ));
        }
        if self.mode.mlp_enabled() && self.hidden_dim == 0 {
            return Err(Error::invalid("hidden width must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if !(self.layer_norm_eps > 0.0) {
            return Err(Error::invalid("layer-norm epsilon must be positive"));
        }
        Ok(())
    }

    /// Width of the aggregated clip feature fed to the classifier layers.
    pub fn feature_dim(&self) -> usize {
        if self.mode.probe_enabled() {
            self.num_queries * self.proj_dim
        } else {
            self.patch_dim
        }
    }
}

/// Affine map `y = x W + b` with `weight` stored input×output.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Affine {
    fn init(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        Self {
            weight: uniform_fan_in((inputs, outputs), inputs, rng),
            bias: Array1::zeros(outputs),
        }
    }

    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: Array1<f64>,
    pub bias: Array1<f64>,
}

impl LayerNorm {
    fn identity(width: usize) -> Self {
        Self {
            gain: Array1::ones(width),
            bias: Array1::zeros(width),
        }
    }

    fn zeros(width: usize) -> Self {
        Self {
            gain: Array1::zeros(width),
            bias: Array1::zeros(width),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeParams {
    /// M×D learned queries.
    pub queries: Array2<f64>,
    /// D×d projection.
    pub projection: Array2<f64>,
}

impl ProbeParams {
    pub fn num_queries(&self) -> usize {
        self.queries.nrows()
    }

    pub fn patch_dim(&self) -> usize {
        self.queries.ncols()
    }

    pub fn proj_dim(&self) -> usize {
        self.projection.ncols()
    }
}

/// The two hidden layers of the MLP; the output layer lives in [`HeadParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenLayers {
    pub fc1: Affine,
    pub norm1: LayerNorm,
    pub fc2: Affine,
    pub norm2: LayerNorm,
}

/// Trainable head. The same type carries gradients, with disabled components `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub config: HeadConfig,
    pub probe: Option<ProbeParams>,
    pub hidden: Option<HiddenLayers>,
    pub output: Affine,
}

fn uniform_fan_in(shape: (usize, usize), fan_in: usize, rng: &mut impl Rng) -> Array2<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Array2::from_shape_simple_fn(shape, || rng.random_range(-bound..=bound))
}

impl HeadParams {
    /// Fan-in scaled uniform weights, zero biases, unit layer-norm gains.
    pub fn init(config: HeadConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let dim = config.patch_dim;
        let probe = config.mode.probe_enabled().then(|| ProbeParams {
            queries: uniform_fan_in((config.num_queries, dim), dim, rng),
            projection: uniform_fan_in((dim, config.proj_dim), dim, rng),
        });
        let features = config.feature_dim();
        let hidden = config.mode.mlp_enabled().then(|| {
            let h = config.hidden_dim;
            HiddenLayers {
                fc1: Affine::init(features, h, rng),
                norm1: LayerNorm::identity(h),
                fc2: Affine::init(h, h, rng),
                norm2: LayerNorm::identity(h),
            }
        });
        let last_in = if config.mode.mlp_enabled() {
            config.hidden_dim
        } else {
            features
        };
        let output = Affine::init(last_in, 1, rng);
        Ok(Self {
            config,
            probe,
            hidden,
            output,
        })
    }

    pub fn zeros(config: HeadConfig) -> Result<Self> {
        config.validate()?;
        let features = config.feature_dim();
        let h = config.hidden_dim;
        Ok(Self {
            probe: config.mode.probe_enabled().then(|| ProbeParams {
                queries: Array2::zeros((config.num_queries, config.patch_dim)),
                projection: Array2::zeros((config.patch_dim, config.proj_dim)),
            }),
            hidden: config.mode.mlp_enabled().then(|| HiddenLayers {
                fc1: Affine::zeros(features, h),
                norm1: LayerNorm::zeros(h),
                fc2: Affine::zeros(h, h),
                norm2: LayerNorm::zeros(h),
            }),
            output: Affine::zeros(
                if config.mode.mlp_enabled() {
                    h
                } else {
                    features
                },
                1,
            ),
            config,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.config.clone()).expect("config already validated")
    }

    /// Named tensors in declaration order, each as a flat row-major slice.
    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        let mut out: Vec<(&'static str, &[f64])> = Vec::with_capacity(12);
        if let Some(p) = &self.probe {
            out.push((
                "probe.queries",
                p.queries.as_slice().expect("standard layout"),
            ));
            out.push((
                "probe.projection",
                p.projection.as_slice().expect("standard layout"),
            ));
        }
        if let Some(h) = &self.hidden {
            out.push((
                "mlp.fc1.weight",
                h.fc1.weight.as_slice().expect("standard layout"),
            ));
            out.push((
                "mlp.fc1.bias",
                h.fc1.bias.as_slice().expect("standard layout"),
            ));
            out.push((
                "mlp.norm1.gain",
                h.norm1.gain.as_slice().expect("standard layout"),
            ));
            out.push((
                "mlp.norm1.bias",
                h.norm1.bias.as_slice().expect("standard layout"),
            ));
            out.push((
                "mlp.fc2.weight",
                h.fc2.weight.as_slice().expect("standard layout"),
            ));
            out.push((
                "mlp.fc2.bias",
                h.fc2.bias.as_slice().expect("standard layout"),
            ));
            out.push((
                "mlp.norm2.gain",
                h.norm2.gain.as_slice().expect("standard layout"),
            ));
            out.push((
                "mlp.norm2.bias",
                h.norm2.bias.as_slice().expect("standard layout"),
            ));
        }
        out.push((
            "output.weight",
            self.output.weight.as_slice().expect("standard layout"),
        ));
        out.push((
            "output.bias",
            self.output.bias.as_slice().expect("standard layout"),
        ));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let mut out: Vec<(&'static str, &mut [f64])> = Vec::with_capacity(12);
        if let Some(p) = &mut self.probe {
            out.push((
                "probe.queries",
                p.queries.as_slice_mut().expect("standard layout"),
            ));
            out.push((
                "probe.projection",
                p.projection.as_slice_mut().expect("standard layout"),
            ));
        }
        if let Some(h) = &mut self.hidden {
            out.push((
                "mlp.fc1.weight",
                h.fc1.weight.as_slice_mut().expect("standard layout"),
            ));
            out.push((
                "mlp.fc1.bias",
                h.fc1.bias.as_slice_mut().expect("standard layout"),
            ));
            out.push((
                "mlp.norm1.gain",
                h.norm1.gain.as_slice_mut().expect("standard layout"),
            ));
            out.push((
                "mlp.norm1.bias",
                h.norm1.bias.as_slice_mut().expect("standard layout"),
            ));
            out.push((
                "mlp.fc2.weight",
                h.fc2.weight.as_slice_mut().expect("standard layout"),
            ));
            out.push((
                "mlp.fc2.bias",
                h.fc2.bias.as_slice_mut().expect("standard layout"),
            ));
            out.push((
                "mlp.norm2.gain",
                h.norm2.gain.as_slice_mut().expect("standard layout"),
            ));
            out.push((
                "mlp.norm2.bias",
                h.norm2.bias.as_slice_mut().expect("standard layout"),
            ));
        }
        out.push((
            "output.weight",
            self.output.weight.as_slice_mut().expect("standard layout"),
        ));
        out.push((
            "output.bias",
            self.output.bias.as_slice_mut().expect("standard layout"),
        ));
        out
    }

    /// Tensor shapes in declaration order.
    pub fn shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let mut out = Vec::new();
        if let Some(p) = &self.probe {
            out.push(("probe.queries", p.queries.shape().to_vec()));
            out.push(("probe.projection", p.projection.shape().to_vec()));
        }
        if let Some(h) = &self.hidden {
            out.push(("mlp.fc1.weight", h.fc1.weight.shape().to_vec()));
            out.push(("mlp.fc1.bias", h.fc1.bias.shape().to_vec()));
            out.push(("mlp.norm1.gain", h.norm1.gain.shape().to_vec()));
            out.push(("mlp.norm1.bias", h.norm1.bias.shape().to_vec()));
            out.push(("mlp.fc2.weight", h.fc2.weight.shape().to_vec()));
            out.push(("mlp.fc2.bias", h.fc2.bias.shape().to_vec()));
            out.push(("mlp.norm2.gain", h.norm2.gain.shape().to_vec()));
            out.push(("mlp.norm2.bias", h.norm2.bias.shape().to_vec()));
        }
        out.push(("output.weight", self.output.weight.shape().to_vec()));
        out.push(("output.bias", self.output.bias.shape().to_vec()));
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Checks that every tensor matches the shape implied by `config`.
    pub fn check_shapes(&self) -> Result<()> {
        let expected = Self::zeros(self.config.clone())?.shapes();
        let actual = self.shapes();
        if expected != actual {
            return Err(Error::Shape(format!(
                "parameters {actual:?} do not match config shapes {expected:?}"
            )));
        }
        if self
            .tensors()
            .iter()
            .any(|(_, t)| t.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::NonFinite("head parameters".into()));
        }
        Ok(())
    }

    /// Sum of squared entries over every tensor.
    pub fn squared_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .map(|v| v * v)
            .sum()
    }

    /// `self += other * scale`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &HeadParams, scale: f64) -> Result<()> {
        let theirs = other.tensors();
        let mut mine = self.tensors_mut();
        if mine.len() != theirs.len() {
            return Err(Error::Shape("gradient layouts differ".into()));
        }
        for ((name_a, a), (name_b, b)) in mine.iter_mut().zip(theirs.iter()) {
            if name_a != name_b || a.len() != b.len() {
                return Err(Error::Shape(format!("{name_a} vs {name_b}")));
            }
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x += y * scale;
            }
        }
        Ok(())
    }
}
