//! Alternating adversarial optimization of the combined objective:
//! maximize over the discriminator groups, minimize over the generators
//! and classifier heads, with cycle-only warmup epochs, a linear
//! learning-rate schedule, and full per-step loss logging.

mod config;
mod state;
mod step;

pub use config::{ablation_rows, AblationRow, EnabledTerms, GammaMode, TrainConfig};
pub use state::TrainState;
pub use step::{objective_breakdown, pseudo_label, train_step, PseudoLabels};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::losses::LossBreakdown;
use crate::nn::DataKind;
use crate::synthdata::{BatchSampler, DomainPair};
use crate::util::derive_seed;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("aborting: term {term} failed: {message}")]
    Term { term: &'static str, message: String },
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error(transparent)]
    Data(#[from] crate::synthdata::DataError),
    #[error(transparent)]
    Autodiff(#[from] crate::autodiff::AdError),
}

impl TrainError {
    pub(crate) fn in_term<E: std::fmt::Display>(term: &'static str) -> impl Fn(E) -> TrainError {
        move |e| TrainError::Term { term, message: e.to_string() }
    }
}

pub type TrainResult<T> = Result<T, TrainError>;

/// One logged optimization step.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub lr: f64,
    pub breakdown: LossBreakdown,
}

/// Per-epoch evaluation snapshot.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub target_accuracy: f64,
}

/// Everything a run leaves behind besides the trained state.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunHistory {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
}

/// Network input kind implied by a dataset's sample shape.
pub fn data_kind_of(pair: &DomainPair) -> TrainResult<DataKind> {
    let shape = pair.sample_shape();
    match shape.as_slice() {
        [1, h, w] if h == w && h % 4 == 0 => Ok(DataKind::Image { side: *h }),
        [d] => Ok(DataKind::Vector { dim: *d }),
        other => Err(TrainError::Config(format!("unsupported sample shape {other:?}"))),
    }
}

/// Train from scratch on one dataset pair. Fully deterministic in
/// `cfg.seed`: initialization, batch order, and every update follow
/// derived seeded streams. During the first `warmup_epochs` only the
/// marginal adversarial and cycle terms are active (the cycle-consistent
/// initialization of the generators); the remaining terms switch on
/// afterwards. The learning rate decays linearly over
/// `epochs * batches_per_epoch` steps, fixed up front.
pub fn run_training(pair: &DomainPair, cfg: &TrainConfig) -> TrainResult<(TrainState, RunHistory)> {
    cfg.validate()?;
    let kind = data_kind_of(pair)?;
    let mut state = TrainState::new(kind, pair.classes, cfg);
    let mut sampler = BatchSampler::new(pair, cfg.batch, derive_seed(cfg.seed, "sampler"))?;
    let per_epoch = sampler.batches_per_epoch();
    let total_steps = cfg.epochs * per_epoch;

    let mut history = RunHistory::default();
    let mut global = 0usize;
    for epoch in 0..cfg.epochs {
        let active = if epoch < cfg.warmup_epochs { cfg.enabled.warmup_restricted() } else { cfg.enabled };
        for _ in 0..per_epoch {
            let lr = lr_at(global, total_steps, cfg);
            let batch = sampler.next_batch(pair);
            let breakdown = train_step(&mut state, &batch, cfg, active, lr)?;
            history.steps.push(StepRecord { step: global, lr, breakdown });
            global += 1;
        }
        if cfg.epoch_eval {
            let accuracy = crate::eval::target_accuracy(&state, pair)?;
            history.epochs.push(EpochRecord { epoch, target_accuracy: accuracy });
        }
    }
    Ok((state, history))
}

fn lr_at(step: usize, total: usize, cfg: &TrainConfig) -> f64 {
    let f = step as f64 / total.max(1) as f64;
    cfg.lr_start * (1.0 - f) + cfg.lr_end * f
}
