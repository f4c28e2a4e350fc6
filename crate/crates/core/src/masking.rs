//! Dynamic masked-language-model corruption.
//!
//! Each call is keyed by `(seed, epoch, sequence_index)`: the same key always
//! yields the same batch, and a new epoch yields a fresh mask. Probabilities
//! are exact rationals, so the three branch probabilities sum to one exactly
//! and the number of selected positions is computed without floating point.

use std::collections::HashSet;

use num_rational::Ratio;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::model::{PieceKind, TokenId, TokenizerModel};

/// Label value at positions the model is not asked to predict.
pub const IGNORE_LABEL: i64 = -100;

pub type Prob = Ratio<u64>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MaskingError {
    #[error("branch probabilities sum to {0}, expected exactly 1")]
    BranchSum(Prob),
    #[error("mask ratio {0} outside (0, 1]")]
    Ratio(Prob),
    #[error("sequence has no selectable positions")]
    NothingSelectable,
    #[error("replacement pool is empty")]
    EmptyPool,
    #[error("no batches to summarize")]
    EmptyStream,
    #[error("cannot parse probability {0:?}")]
    ParseProb(String),
}

/// Parses `"0.15"`, `"3/20"` or `"1"` into an exact rational.
pub fn parse_prob(s: &str) -> Result<Prob, MaskingError> {
    let err = || MaskingError::ParseProb(s.to_string());
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: u64 = n.trim().parse().map_err(|_| err())?;
        let d: u64 = d.trim().parse().map_err(|_| err())?;
        if d == 0 {
            return Err(err());
        }
        return Ok(Ratio::new(n, d));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if frac.len() > 18 || (int.is_empty() && frac.is_empty()) {
        return Err(err());
    }
    let int: u64 = if int.is_empty() {
        0
    } else {
        int.parse().map_err(|_| err())?
    };
    let den = 10u64.pow(frac.len() as u32);
    let num: u64 = if frac.is_empty() {
        0
    } else {
        frac.parse().map_err(|_| err())?
    };
    let whole = int.checked_mul(den).and_then(|w| w.checked_add(num)).ok_or_else(err)?;
    Ok(Ratio::new(whole, den))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Replacement {
    /// Half-open id range `lo..hi`, minus any special ids.
    Range { lo: TokenId, hi: TokenId },
    /// Explicit pool.
    Ids(Vec<TokenId>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskingConfig {
    pub mask_ratio: Prob,
    pub p_mask: Prob,
    pub p_random: Prob,
    pub p_keep: Prob,
    pub mask_id: TokenId,
    pub unk_id: TokenId,
    /// Ids never selected for masking (bos, eos, pad, ...).
    pub special_ids: Vec<TokenId>,
    pub replacement: Replacement,
    pub seed: u64,
}

impl MaskingConfig {
    /// Defaults (15%, 80/10/10) with ids and replacement pool taken from the
    /// model: random replacements draw from its normal and unscored pieces.
    pub fn for_model(model: &TokenizerModel, mask_id: TokenId, seed: u64) -> Self {
        let specials = model.specials();
        let pool = model
            .pieces()
            .iter()
            .enumerate()
            .filter(|(_, p)| matches!(p.kind, PieceKind::Normal | PieceKind::Unscored))
            .map(|(i, _)| i as TokenId)
            .filter(|id| !specials.ids().contains(id))
            .collect();
        let special_ids = [specials.bos, specials.eos, specials.pad]
            .into_iter()
            .flatten()
            .collect();
        Self {
            special_ids,
            replacement: Replacement::Ids(pool),
            ..Self::with_range(mask_id, specials.unk, 0, model.len() as TokenId, seed)
        }
    }

    pub fn with_range(mask_id: TokenId, unk_id: TokenId, lo: TokenId, hi: TokenId, seed: u64) -> Self {
        Self {
            mask_ratio: Ratio::new(15, 100),
            p_mask: Ratio::new(80, 100),
            p_random: Ratio::new(10, 100),
            p_keep: Ratio::new(10, 100),
            mask_id,
            unk_id,
            special_ids: Vec::new(),
            replacement: Replacement::Range { lo, hi },
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), MaskingError> {
        let sum = self.p_mask + self.p_random + self.p_keep;
        if sum != Ratio::from_integer(1) {
            return Err(MaskingError::BranchSum(sum));
        }
        if self.mask_ratio == Ratio::from_integer(0) || self.mask_ratio > Ratio::from_integer(1) {
            return Err(MaskingError::Ratio(self.mask_ratio));
        }
        Ok(())
    }

    /// `max(1, round_half_away(mask_ratio * n))` for `n >= 1`.
    pub fn selection_count(&self, n: usize) -> usize {
        let (num, den) = (*self.mask_ratio.numer() as u128, *self.mask_ratio.denom() as u128);
        let k = (2 * num * n as u128 + den) / (2 * den);
        (k as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Mask,
    Random,
    Keep,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedBatch {
    pub input_ids: Vec<TokenId>,
    pub labels: Vec<i64>,
    pub selected: Vec<bool>,
    /// Branch taken at each selected position, `None` elsewhere.
    pub branches: Vec<Option<Branch>>,
}

/// RNG for one `(seed, epoch, sequence)` key.
fn keyed_rng(seed: u64, epoch: u64, sequence_index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&epoch.to_le_bytes());
    key[16..24].copy_from_slice(&sequence_index.to_le_bytes());
    key[24..].copy_from_slice(b"mlm-mask");
    ChaCha8Rng::from_seed(key)
}

/// Prepared sampler; builds the replacement pool once.
pub struct Masker {
    cfg: MaskingConfig,
    pool: Vec<TokenId>,
    specials: HashSet<TokenId>,
    // branch thresholds over a common denominator
    denom: u64,
    mask_below: u64,
    random_below: u64,
}

impl Masker {
    pub fn new(cfg: MaskingConfig) -> Result<Self, MaskingError> {
        cfg.validate()?;
        let specials: HashSet<TokenId> = cfg.special_ids.iter().copied().collect();
        let mut excluded = specials.clone();
        excluded.insert(cfg.mask_id);
        excluded.insert(cfg.unk_id);
        let pool: Vec<TokenId> = match &cfg.replacement {
            Replacement::Range { lo, hi } => (*lo..*hi).filter(|id| !excluded.contains(id)).collect(),
            Replacement::Ids(ids) => ids.iter().copied().filter(|id| !excluded.contains(id)).collect(),
        };
        if pool.is_empty() && cfg.p_random != Ratio::from_integer(0) {
            return Err(MaskingError::EmptyPool);
        }
        let denom = lcm(
            lcm(*cfg.p_mask.denom(), *cfg.p_random.denom()),
            *cfg.p_keep.denom(),
        );
        let scale = |p: &Prob| p.numer() * (denom / p.denom());
        let mask_below = scale(&cfg.p_mask);
        let random_below = mask_below + scale(&cfg.p_random);
        Ok(Self {
            cfg,
            pool,
            specials,
            denom,
            mask_below,
            random_below,
        })
    }

    pub fn config(&self) -> &MaskingConfig {
        &self.cfg
    }

    pub fn mask_sequence(
        &self,
        ids: &[TokenId],
        epoch: u64,
        sequence_index: u64,
    ) -> Result<MaskedBatch, MaskingError> {
        let selectable: Vec<usize> = ids
            .iter()
            .enumerate()
            .filter(|(_, id)| !self.specials.contains(id))
            .map(|(i, _)| i)
            .collect();
        if selectable.is_empty() {
            return Err(MaskingError::NothingSelectable);
        }
        let k = self.cfg.selection_count(selectable.len());
        let mut rng = keyed_rng(self.cfg.seed, epoch, sequence_index);
        let mut picked: Vec<usize> = index::sample(&mut rng, selectable.len(), k)
            .into_iter()
            .map(|i| selectable[i])
            .collect();
        picked.sort_unstable();

        let mut batch = MaskedBatch {
            input_ids: ids.to_vec(),
            labels: vec![IGNORE_LABEL; ids.len()],
            selected: vec![false; ids.len()],
            branches: vec![None; ids.len()],
        };
        for pos in picked {
            batch.selected[pos] = true;
            batch.labels[pos] = i64::from(ids[pos]);
            let u = rng.random_range(0..self.denom);
            let branch = if u < self.mask_below {
                batch.input_ids[pos] = self.cfg.mask_id;
                Branch::Mask
            } else if u < self.random_below {
                batch.input_ids[pos] = self.pool[rng.random_range(0..self.pool.len())];
                Branch::Random
            } else {
                Branch::Keep
            };
            batch.branches[pos] = Some(branch);
        }
        Ok(batch)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    fn gcd(mut a: u64, mut b: u64) -> u64 {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    }
    a / gcd(a, b) * b
}

pub fn mask_sequence(
    ids: &[TokenId],
    cfg: &MaskingConfig,
    epoch: u64,
    sequence_index: u64,
) -> Result<MaskedBatch, MaskingError> {
    Masker::new(cfg.clone())?.mask_sequence(ids, epoch, sequence_index)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MaskingStats {
    pub tokens: u64,
    pub selected: u64,
    pub masked: u64,
    pub random: u64,
    pub kept: u64,
    pub observed_ratio: f64,
    pub observed_p_mask: f64,
    pub observed_p_random: f64,
    pub observed_p_keep: f64,
}

impl MaskingStats {
    pub fn add(&mut self, batch: &MaskedBatch) {
        self.tokens += batch.input_ids.len() as u64;
        for b in batch.branches.iter().flatten() {
            self.selected += 1;
            match b {
                Branch::Mask => self.masked += 1,
                Branch::Random => self.random += 1,
                Branch::Keep => self.kept += 1,
            }
        }
    }

    fn finish(mut self) -> Self {
        let sel = self.selected.max(1) as f64;
        self.observed_ratio = self.selected as f64 / self.tokens.max(1) as f64;
        self.observed_p_mask = self.masked as f64 / sel;
        self.observed_p_random = self.random as f64 / sel;
        self.observed_p_keep = self.kept as f64 / sel;
        self
    }
}

pub fn masking_stats<'a>(
    batches: impl IntoIterator<Item = &'a MaskedBatch>,
) -> Result<MaskingStats, MaskingError> {
    let mut stats = MaskingStats::default();
    let mut any = false;
    for b in batches {
        any = true;
        stats.add(b);
    }
    if !any {
        return Err(MaskingError::EmptyStream);
    }
    Ok(stats.finish())
}
