//! Minibatch momentum-SGD training with global-norm clipping, the
//! hold-then-decay learning-rate schedule and heldout tracking.

mod schedule;

use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use schedule::LrSchedule;

use crate::corpus::{ApplicationId, Query};
use crate::error::{Error, Result};
use crate::eval::corpus_logprob;
use crate::exec::Execution;
use crate::fofe::{Architecture, ExampleSet, FofeModel, NceHead, Objective, DESK_NOISE_SAMPLES, FULL_NOISE_SAMPLES};
use crate::nn::{accumulate, clip_global_norm, Grads, Scalar};

/// Examples per gradient shard. Fixed so that the reduction order, and so
/// the result, does not depend on the number of workers.
pub const SHARD: usize = 64;

/// Named hyper-parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Application-specific base model.
    AsFofe,
    /// Application-agnostic base model on balanced data.
    AaFofe,
    AaMixture,
    AdFofe,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::AsFofe, Preset::AaFofe, Preset::AaMixture, Preset::AdFofe];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::AsFofe => "as-fofe",
            Preset::AaFofe => "aa-fofe",
            Preset::AaMixture => "aa-mixture",
            Preset::AdFofe => "ad-fofe",
        }
    }

    pub fn architecture(self) -> Architecture {
        match self {
            Preset::AsFofe | Preset::AaFofe => Architecture::Base,
            Preset::AaMixture => Architecture::Mixture { experts: 2 },
            Preset::AdFofe => Architecture::AppDependent,
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub lr_hold_epochs: usize,
    pub decay_factor: f64,
    pub patience: usize,
    pub clip_norm: f64,
    pub max_epochs: usize,
    /// Noise samples per target; `None` trains with the full softmax.
    pub nce_k: Option<usize>,
    pub batch_size: usize,
    pub momentum: f64,
    pub seed: u64,
    /// Words of history kept per position, as at decode time.
    pub context_limit: Option<usize>,
}

impl TrainConfig {
    /// Full-scale settings for corpora of billions of words.
    pub fn full(preset: Preset) -> Self {
        let (lr, hold, epochs) = match preset {
            Preset::AsFofe => (0.256, 16, 64),
            Preset::AaFofe | Preset::AdFofe => (0.256, 64, 128),
            Preset::AaMixture => (1.024, 64, 128),
        };
        TrainConfig {
            initial_lr: lr,
            lr_hold_epochs: hold,
            decay_factor: 0.7,
            patience: 4,
            clip_norm: 6.0,
            max_epochs: epochs,
            nce_k: Some(FULL_NOISE_SAMPLES),
            batch_size: 256,
            momentum: 0.9,
            seed: 0,
            context_limit: Some(8),
        }
    }

    /// Settings for corpora of ~10⁵ tokens: fewer epochs, a shorter hold
    /// and a patience of one, since a handful of noisy heldout increases
    /// would otherwise arrive after training has ended.
    pub fn desk(preset: Preset) -> Self {
        let (lr, epochs) = match preset {
            Preset::AsFofe => (0.1, 30),
            Preset::AaFofe | Preset::AdFofe => (0.1, 40),
            Preset::AaMixture => (0.2, 40),
        };
        TrainConfig {
            initial_lr: lr,
            lr_hold_epochs: 4,
            patience: 1,
            max_epochs: epochs,
            nce_k: Some(DESK_NOISE_SAMPLES),
            batch_size: 128,
            ..Self::full(preset)
        }
    }

    pub fn validate(&self) -> Result<()> {
        LrSchedule::new(self.initial_lr, self.lr_hold_epochs, self.decay_factor, self.patience)?;
        if !(self.clip_norm > 0.0) {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch_size and max_epochs must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if self.nce_k == Some(0) {
            return Err(Error::Config("nce_k must be >= 1".into()));
        }
        if self.context_limit == Some(0) {
            return Err(Error::Config("context_limit must be >= 1".into()));
        }
        Ok(())
    }
}

/// One completed epoch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub heldout_ppl: f64,
    pub train_loss: f64,
    pub lr: f64,
    pub clip_events: usize,
    pub decayed: bool,
    pub wall_ms: f64,
}

/// Equality ignores wall time.
impl PartialEq for EpochRecord {
    fn eq(&self, o: &Self) -> bool {
        self.epoch == o.epoch
            && self.heldout_ppl.to_bits() == o.heldout_ppl.to_bits()
            && self.train_loss.to_bits() == o.train_loss.to_bits()
            && self.lr.to_bits() == o.lr.to_bits()
            && self.clip_events == o.clip_events
            && self.decayed == o.decayed
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_heldout_ppl: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<F> {
    /// Parameters after the epoch with the lowest heldout perplexity.
    pub best: FofeModel<F>,
    pub last: FofeModel<F>,
    pub history: TrainHistory,
}

/// Deterministic per-(seed, epoch, batch, shard) stream.
fn rng_for(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        h = (h ^ p).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// Unigram target counts over `queries` (each word plus `</s>`).
pub fn target_counts(queries: &[Query], vocab_size: usize) -> Vec<u64> {
    let mut counts = vec![0u64; vocab_size];
    for q in queries {
        for &t in &q.tokens {
            counts[t as usize] += 1;
        }
        counts[crate::corpus::EOS as usize] += 1;
    }
    counts
}

/// Minibatches of example indices for one epoch. Application-dependent
/// models get single-application batches in a shuffled interleaving.
fn epoch_batches(set: &ExampleSet, arch: Architecture, batch: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    if arch != Architecture::AppDependent {
        let mut order: Vec<usize> = (0..set.len()).collect();
        order.shuffle(rng);
        return order.chunks(batch).map(<[usize]>::to_vec).collect();
    }
    let mut batches = Vec::new();
    for app in ApplicationId::ALL {
        let mut order: Vec<usize> = (0..set.len()).filter(|&i| set.app(i) == app).collect();
        order.shuffle(rng);
        batches.extend(order.chunks(batch).map(<[usize]>::to_vec));
    }
    batches.shuffle(rng);
    batches
}

/// Heldout perplexity with the full softmax under `context_limit`.
pub fn heldout_perplexity<F: Scalar>(
    model: &FofeModel<F>,
    heldout: &[Query],
    context_limit: Option<usize>,
    exec: Execution,
) -> Result<f64> {
    let (lp, n) = corpus_logprob(model, heldout, context_limit, exec)?;
    if n == 0 {
        return Err(Error::EmptyDev);
    }
    Ok((-lp / n as f64).exp())
}

/// Batch-mean loss and gradient over `batch`, computed in [`SHARD`]-sized
/// shards and summed in shard order. With a noise head, each shard draws
/// its noise from a stream derived from `noise_seed` and the shard index.
pub fn minibatch_gradient<F: Scalar>(
    model: &FofeModel<F>,
    set: &ExampleSet,
    batch: &[usize],
    head: Option<&NceHead>,
    noise_seed: u64,
    exec: Execution,
) -> Result<(f64, Grads<F>)> {
    if batch.is_empty() {
        return Err(Error::Config("empty minibatch".into()));
    }
    let parts = exec.map_chunks(batch, SHARD, |s, idx| {
        let noise;
        let objective = match head {
            Some(head) => {
                noise = head.draw_matrix(idx.len(), &mut rng_for(noise_seed, &[s as u64]));
                Objective::Nce { head, noise: &noise }
            }
            None => Objective::Softmax,
        };
        model.loss_and_grad(set, idx, objective, batch.len())
    });
    let mut total = 0.0;
    let mut grads: Option<Grads<F>> = None;
    for part in parts {
        let (l, g) = part?;
        total += l;
        match &mut grads {
            None => grads = Some(g),
            Some(acc) => accumulate(acc, &g),
        }
    }
    Ok((total, grads.expect("non-empty batch")))
}

/// Trains `model` in place and returns the best-heldout and final models.
///
/// Works for every architecture; application-dependent models are trained
/// on single-application batches.
pub fn train<F: Scalar>(
    mut model: FofeModel<F>,
    train: &[Query],
    heldout: &[Query],
    config: &TrainConfig,
    exec: Execution,
) -> Result<TrainOutcome<F>> {
    config.validate()?;
    let v = model.config().vocab_size;
    if let Some(bad) = train.iter().flat_map(|q| &q.tokens).find(|&&t| t as usize >= v) {
        return Err(Error::Shape {
            op: "train",
            detail: format!("token id {bad} >= vocab size {v}"),
        });
    }
    let set = ExampleSet::from_queries(train, config.context_limit);
    if set.is_empty() {
        return Err(Error::NoTokens);
    }
    let head = match config.nce_k {
        Some(k) => Some(NceHead::from_counts(&target_counts(train, v), k)?),
        None => None,
    };
    let arch = model.architecture();
    let mut schedule = LrSchedule::new(config.initial_lr, config.lr_hold_epochs, config.decay_factor, config.patience)?;
    let mut history = TrainHistory {
        best_heldout_ppl: f64::INFINITY,
        ..Default::default()
    };
    let mut best = model.clone();

    for epoch in 1..=config.max_epochs {
        let started = Instant::now();
        let lr = schedule.lr();
        let mut rng = rng_for(config.seed, &[epoch as u64]);
        let batches = epoch_batches(&set, arch, config.batch_size, &mut rng);
        let (mut loss_sum, mut clip_events) = (0.0, 0);
        for (b, batch) in batches.iter().enumerate() {
            let noise_seed = rng_for(config.seed, &[epoch as u64, b as u64]).next_u64();
            let (total, grads) = minibatch_gradient(&model, &set, batch, head.as_ref(), noise_seed, exec)
                .map_err(|e| match e {
                    Error::NonFinite { .. } => Error::Diverged { epoch, batch: b },
                    e => e,
                })?;
            if !total.is_finite() {
                return Err(Error::Diverged { epoch, batch: b });
            }
            loss_sum += total;
            let params = model.params_mut();
            params.set_grads(grads);
            if clip_global_norm(params, config.clip_norm) < 1.0 {
                clip_events += 1;
            }
            params.sgd_momentum_step(lr, config.momentum);
        }
        let ppl = heldout_perplexity(&model, heldout, config.context_limit, exec)?;
        if !ppl.is_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: batches.len(),
            });
        }
        let decayed = schedule.observe(ppl);
        if ppl < history.best_heldout_ppl {
            history.best_heldout_ppl = ppl;
            history.best_epoch = epoch;
            best = model.clone();
        }
        history.epochs.push(EpochRecord {
            epoch,
            heldout_ppl: ppl,
            train_loss: loss_sum / batches.len() as f64,
            lr,
            clip_events,
            decayed,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    }
    // keep gradient buffers out of the returned models
    model.params_mut().zero_grads();
    best.params_mut().zero_grads();
    Ok(TrainOutcome {
        best,
        last: model,
        history,
    })
}

/// [`train`] restricted to application-dependent models.
pub fn train_ad<F: Scalar>(
    model: FofeModel<F>,
    train_queries: &[Query],
    heldout: &[Query],
    config: &TrainConfig,
    exec: Execution,
) -> Result<TrainOutcome<F>> {
    if model.architecture() != Architecture::AppDependent {
        return Err(Error::Config("train_ad needs an application-dependent model".into()));
    }
    train(model, train_queries, heldout, config, exec)
}
