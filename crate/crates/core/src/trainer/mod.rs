//! Supervised training of the prediction head on precomputed embeddings.

mod optim;

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use optim::{bce_loss, clip_gradients, cosine_lr, AdamW, AdamWConfig, BCE_EPS};

use crate::data::EmbeddingClip;
use crate::error::{Error, Result};
use crate::head::{Dropout, ForwardPass, HeadConfig, HeadParams};
use crate::metrics::average_precision;

/// Clips per parallel work unit; gradients are summed in clip order inside a
/// unit and then unit by unit, so results do not depend on the thread count.
const GRAD_CHUNK: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub clip_norm: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub seed: u64,
    pub lr_min: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-5,
            weight_decay: 1e-4,
            clip_norm: 5.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: 50,
            batch_size: 32,
            patience: 5,
            seed: 0,
            lr_min: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.lr) {
            return Err(Error::invalid(format!("lr must be > 0, got {}", self.lr)));
        }
        if !positive(self.clip_norm) {
            return Err(Error::invalid(format!(
                "clip_norm must be > 0, got {}",
                self.clip_norm
            )));
        }
        if self.patience == 0 {
            return Err(Error::invalid("patience must be at least 1"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch_size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("betas must lie in [0, 1)"));
        }
        if !positive(self.eps) || !(self.weight_decay >= 0.0) {
            return Err(Error::invalid("eps must be > 0 and weight_decay >= 0"));
        }
        if !(self.lr_min >= 0.0 && self.lr_min <= self.lr) {
            return Err(Error::invalid(format!(
                "lr_min must lie in [0, lr], got {}",
                self.lr_min
            )));
        }
        Ok(())
    }

    /// Sets one field from its textual form. `betas` takes `b1,b2`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad value `{v}` for `{key}`")))
        }
        match key {
            "lr" => self.lr = num(key, value)?,
            "weight_decay" => self.weight_decay = num(key, value)?,
            "clip_norm" => self.clip_norm = num(key, value)?,
            "beta1" => self.beta1 = num(key, value)?,
            "beta2" => self.beta2 = num(key, value)?,
            "betas" => {
                let (a, b) = value
                    .trim()
                    .trim_start_matches('(')
                    .trim_end_matches(')')
                    .split_once(',')
                    .ok_or_else(|| {
                        Error::invalid(format!("betas expects `b1,b2`, got `{value}`"))
                    })?;
                self.beta1 = num(key, a)?;
                self.beta2 = num(key, b)?;
            }
            "eps" => self.eps = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "patience" => self.patience = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "lr_min" => self.lr_min = num(key, value)?,
            other => return Err(Error::invalid(format!("unknown training key `{other}`"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(k.trim(), v)
                .map_err(|e| Error::invalid(format!("line {}: {e}", n + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut text = String::new();
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(|e| Error::io(path, e))?;
        Self::from_kv_str(&text)
    }

    pub fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_ap: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters after the epoch with the highest validation AP.
    pub params: HeadParams,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_ap: f64,
    pub stopped_early: bool,
}

/// SplitMix64 folding of several words into one seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut state = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        state ^= p;
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        state = z ^ (z >> 31);
    }
    state
}

const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_DROPOUT: u64 = 2;

/// Eval-mode probabilities for each clip, in input order.
pub fn predict(params: &HeadParams, clips: &[EmbeddingClip]) -> Result<Vec<f64>> {
    clips
        .par_iter()
        .map(|c| Ok(ForwardPass::run(c.patches.view(), params, Dropout::off())?.probability))
        .collect()
}

/// Clip-level validation AP of `params`.
pub fn validation_ap(params: &HeadParams, val: &[EmbeddingClip]) -> Result<f64> {
    let scores = predict(params, val)?;
    let scored: Vec<(f64, bool)> = scores
        .into_iter()
        .zip(val.iter().map(|c| c.label))
        .collect();
    average_precision(&scored)
}

/// Trains a freshly initialized head and early-stops on validation AP.
pub fn train(
    train_set: &[EmbeddingClip],
    val_set: &[EmbeddingClip],
    head: &HeadConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let positives = val_set.iter().filter(|c| c.label).count();
    if val_set.is_empty() || positives == 0 || positives == val_set.len() {
        return Err(Error::SingleClass("validation set"));
    }
    train_with(train_set, head, config, |p| validation_ap(p, val_set))
}

/// As [`train`], with a caller-supplied validation score (higher is better).
pub fn train_with(
    train_set: &[EmbeddingClip],
    head: &HeadConfig,
    config: &TrainConfig,
    mut validate: impl FnMut(&HeadParams) -> Result<f64>,
) -> Result<TrainOutcome> {
    config.validate()?;
    head.validate()?;
    if train_set.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(&[config.seed, STREAM_INIT]));
    let mut params = HeadParams::init(head.clone(), &mut init_rng)?;
    let mut optimizer = AdamW::new(
        config.adamw(),
        &params
            .tensors()
            .iter()
            .map(|(_, t)| t.len())
            .collect::<Vec<_>>(),
    );

    let n = train_set.len();
    let batches_per_epoch = n.div_ceil(config.batch_size);
    let total_steps = config.epochs * batches_per_epoch;
    let mut step = 0usize;
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, HeadParams)> = None;
    let mut since_best = 0usize;
    let mut stopped_early = false;

    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        let mut shuffle_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(&[config.seed, STREAM_SHUFFLE, epoch as u64]));
        order.shuffle(&mut shuffle_rng);

        let epoch_lr = cosine_lr(step, total_steps, config.lr, config.lr_min)?;
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            let partials: Vec<(f64, HeadParams)> = batch
                .par_chunks(GRAD_CHUNK)
                .map(|chunk| -> Result<(f64, HeadParams)> {
                    let mut acc = params.zeros_like();
                    let mut loss = 0.0;
                    for &idx in chunk {
                        let clip = &train_set[idx];
                        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[
                            config.seed,
                            STREAM_DROPOUT,
                            epoch as u64,
                            idx as u64,
                        ]));
                        let pass = ForwardPass::run(
                            clip.patches.view(),
                            &params,
                            Dropout::Sample(&mut rng),
                        )?;
                        loss += bce_loss(pass.probability, clip.label);
                        let target = if clip.label { 1.0 } else { 0.0 };
                        pass.accumulate_gradients((pass.probability - target) * scale, &mut acc);
                    }
                    Ok((loss, acc))
                })
                .collect::<Result<_>>()?;

            let mut grads = params.zeros_like();
            for (loss, g) in &partials {
                loss_sum += loss;
                grads.add_scaled(g, 1.0)?;
            }
            {
                let mut views: Vec<&mut [f64]> =
                    grads.tensors_mut().into_iter().map(|(_, t)| t).collect();
                clip_gradients(&mut views, config.clip_norm)?;
            }
            let lr = cosine_lr(step, total_steps, config.lr, config.lr_min)?;
            let grad_views: Vec<&[f64]> = grads.tensors().into_iter().map(|(_, t)| t).collect();
            let mut param_views: Vec<&mut [f64]> =
                params.tensors_mut().into_iter().map(|(_, t)| t).collect();
            optimizer.step(&mut param_views, &grad_views, lr)?;
            step += 1;
        }

        let train_loss = loss_sum / n as f64;
        if !train_loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
        }
        let val_ap = validate(&params)?;
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_ap,
            lr: epoch_lr,
        });
        log::debug!("epoch {epoch}: loss {train_loss:.6} val_ap {val_ap:.6}");

        let improved = best.as_ref().is_none_or(|(b, _, _)| val_ap > *b);
        if improved {
            best = Some((val_ap, epoch, params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                stopped_early = epoch < config.epochs;
                break;
            }
        }
    }

    let (best_val_ap, best_epoch, params) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        params,
        history,
        best_epoch,
        best_val_ap,
        stopped_early,
    })
}

pub const HISTORY_COLUMNS: [&str; 4] = ["epoch", "train_loss", "val_ap", "lr"];

pub fn write_history(path: impl AsRef<Path>, history: &[EpochRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_history_to(file, history)
}

pub fn write_history_to(writer: impl Write, history: &[EpochRecord]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(HISTORY_COLUMNS)?;
    for r in history {
        csv.write_record([
            r.epoch.to_string(),
            r.train_loss.to_string(),
            r.val_ap.to_string(),
            r.lr.to_string(),
        ])?;
    }
    csv.flush().map_err(|e| Error::io("<history>", e))
}

pub fn read_history(reader: impl Read) -> Result<Vec<EpochRecord>> {
    let mut csv = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in csv.records() {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let get = |i: usize| row.get(i).unwrap_or("");
        out.push(EpochRecord {
            epoch: crate::data::parse_field(get(0), line, "epoch")?,
            train_loss: crate::data::parse_field(get(1), line, "train_loss")?,
            val_ap: crate::data::parse_field(get(2), line, "val_ap")?,
            lr: crate::data::parse_field(get(3), line, "lr")?,
        });
    }
    Ok(out)
}
