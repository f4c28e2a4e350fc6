//! Learning-rate and unfreezing schedules as pure functions of the step.
//!
//! The layer stack, in forward order, is
//! `[added_embeddings, existing_embeddings, block_1 .. block_12, lm_head]`.
//! Each layer gets a depth: `added_embeddings` is 0, and the others count
//! back from the output, so `lm_head` is 1, `block_12` is 2, ...,
//! `block_1` is 13 and `existing_embeddings` is 14. A layer's discriminative
//! rate is `lr / decay^depth`, and it is trainable once
//! `step / unfreeze_interval >= depth`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ADDED_EMBEDDINGS: &str = "added_embeddings";
pub const EXISTING_EMBEDDINGS: &str = "existing_embeddings";
pub const LM_HEAD: &str = "lm_head";
pub const LAYER_COUNT: usize = 15;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("unknown layer {0:?}")]
    UnknownLayer(String),
    #[error("layer stack must have {LAYER_COUNT} unique names, got {0}")]
    BadStack(String),
    #[error("invalid schedule config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerStack {
    layers: Vec<String>,
}

impl Default for LayerStack {
    fn default() -> Self {
        let mut layers = vec![ADDED_EMBEDDINGS.to_string(), EXISTING_EMBEDDINGS.to_string()];
        layers.extend((1..=12).map(|k| format!("block_{k}")));
        layers.push(LM_HEAD.to_string());
        Self { layers }
    }
}

impl LayerStack {
    /// Names in forward order; the first is the added-vocabulary embeddings,
    /// the second the existing-vocabulary embeddings.
    pub fn from_names(layers: Vec<String>) -> Result<Self, ScheduleError> {
        let unique: std::collections::HashSet<&String> = layers.iter().collect();
        if layers.len() != LAYER_COUNT || unique.len() != LAYER_COUNT {
            return Err(ScheduleError::BadStack(format!(
                "{} names, {} unique",
                layers.len(),
                unique.len()
            )));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[String] {
        &self.layers
    }

    /// Distance from the output used for both the rate exponent and the
    /// unfreeze order.
    pub fn depth(&self, layer: &str) -> Result<u32, ScheduleError> {
        let idx = self
            .layers
            .iter()
            .position(|l| l == layer)
            .ok_or_else(|| ScheduleError::UnknownLayer(layer.to_string()))?;
        Ok(if idx == 0 {
            0
        } else {
            (self.layers.len() - idx) as u32
        })
    }

    /// Layers in the order they are unfrozen (excluding the always-trainable
    /// added embeddings).
    pub fn unfreeze_order(&self) -> Vec<&str> {
        let mut rest: Vec<&str> = self.layers[1..].iter().map(String::as_str).collect();
        rest.reverse();
        rest
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub peak_lr: f64,
    pub decay_factor: f64,
    pub warmup_steps: u64,
    pub max_steps: u64,
    pub unfreeze_interval: u64,
    /// Steps at which the warmup/decay ramp restarts from zero.
    pub resets: Vec<u64>,
    pub discriminative_enabled: bool,
    /// Scheduler steps consumed per optimizer update.
    pub scheduler_steps_per_update: u64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            peak_lr: 3e-4,
            decay_factor: 2.6,
            warmup_steps: 24_000,
            max_steps: 500_000,
            unfreeze_interval: 1_000,
            resets: Vec::new(),
            discriminative_enabled: true,
            scheduler_steps_per_update: 1,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<(), ScheduleError> {
        let fail = |m: &str| Err(ScheduleError::Config(m.to_string()));
        if !(self.decay_factor > 1.0) || !self.decay_factor.is_finite() {
            return fail("decay_factor must be > 1");
        }
        if !(self.peak_lr >= 0.0) || !self.peak_lr.is_finite() {
            return fail("peak_lr must be finite and non-negative");
        }
        if self.warmup_steps >= self.max_steps {
            return fail("warmup_steps must be < max_steps");
        }
        if self.unfreeze_interval == 0 {
            return fail("unfreeze_interval must be positive");
        }
        if self.scheduler_steps_per_update == 0 {
            return fail("scheduler_steps_per_update must be positive");
        }
        if self.resets.windows(2).any(|w| w[0] >= w[1]) {
            return fail("resets must be strictly increasing");
        }
        Ok(())
    }

    fn steps_since_reset(&self, step: u64) -> u64 {
        let last = self
            .resets
            .iter()
            .rev()
            .find(|&&r| r <= step)
            .copied()
            .unwrap_or(0);
        (step - last).saturating_mul(self.scheduler_steps_per_update)
    }
}

/// Linear warmup then linear decay to zero, restarted at each reset.
pub fn lr_at(cfg: &ScheduleConfig, step: u64) -> f64 {
    let s = cfg.steps_since_reset(step);
    if s < cfg.warmup_steps {
        cfg.peak_lr * (s as f64 / cfg.warmup_steps as f64)
    } else {
        let remaining = cfg.max_steps.saturating_sub(s) as f64;
        cfg.peak_lr * (remaining / (cfg.max_steps - cfg.warmup_steps) as f64)
    }
}

pub fn layer_lr(
    cfg: &ScheduleConfig,
    stack: &LayerStack,
    layer: &str,
    step: u64,
) -> Result<f64, ScheduleError> {
    let depth = stack.depth(layer)?;
    let base = lr_at(cfg, step);
    if !cfg.discriminative_enabled {
        return Ok(base);
    }
    Ok(base / cfg.decay_factor.powi(depth as i32))
}

/// `true` means frozen. Unfreezing events at step `s` apply to the update at
/// step `s`.
pub fn frozen_mask(cfg: &ScheduleConfig, stack: &LayerStack, step: u64) -> BTreeMap<String, bool> {
    let events = step / cfg.unfreeze_interval;
    stack
        .layers()
        .iter()
        .map(|l| {
            let depth = stack.depth(l).expect("layer from the stack") as u64;
            (l.clone(), depth > events)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleRow {
    pub step: u64,
    pub layer: String,
    pub lr: f64,
    pub frozen: bool,
}

/// Rows for every `every`-th step in `0..=until`, layers in forward order.
pub fn dump(cfg: &ScheduleConfig, stack: &LayerStack, until: u64, every: u64) -> Vec<ScheduleRow> {
    let every = every.max(1);
    let mut rows = Vec::new();
    let mut step = 0;
    while step <= until {
        let frozen = frozen_mask(cfg, stack, step);
        for layer in stack.layers() {
            rows.push(ScheduleRow {
                step,
                layer: layer.clone(),
                lr: layer_lr(cfg, stack, layer, step).expect("layer from the stack"),
                frozen: frozen[layer],
            });
        }
        step += every;
    }
    rows
}
