use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Tensor};
use crate::losses::LossBreakdown;
use crate::nn::{
    load_checkpoint, save_checkpoint, AdamState, CheckpointError, CheckpointMeta, DataKind,
    Discriminate, TriHeadDiscriminator, Generator,
};
use crate::util::derive_seed;

use super::config::TrainConfig;
use super::{TrainError, TrainResult};

/// Everything that evolves during training: the two generators, the two
/// tri-head discriminators, and one Adam state per update group (G_s,
/// G_t, the two classifier heads, and the two adversarial trunk+D+J
/// groups), plus the step counter and loss history.
pub struct TrainState {
    pub classes: usize,
    pub kind: DataKind,
    pub g_s: Generator,
    pub g_t: Generator,
    pub disc_s: TriHeadDiscriminator,
    pub disc_t: TriHeadDiscriminator,
    pub(super) adam_g_s: AdamState,
    pub(super) adam_g_t: AdamState,
    pub(super) adam_c_s: AdamState,
    pub(super) adam_c_t: AdamState,
    pub(super) adam_d_s: AdamState,
    pub(super) adam_d_t: AdamState,
    pub step: usize,
    pub history: Vec<LossBreakdown>,
}

impl TrainState {
    pub fn new(kind: DataKind, classes: usize, cfg: &TrainConfig) -> Self {
        let rng = |tag: &str| ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, tag));
        let g_s = Generator::new(kind, cfg.net, &mut rng("init/g_s"));
        let g_t = Generator::new(kind, cfg.net, &mut rng("init/g_t"));
        let disc_s = TriHeadDiscriminator::new(kind, classes, cfg.net, &mut rng("init/disc_s"));
        let disc_t = TriHeadDiscriminator::new(kind, classes, cfg.net, &mut rng("init/disc_t"));
        let eps = 1e-8;
        TrainState {
            classes,
            kind,
            adam_g_s: AdamState::new(g_s.params(), cfg.beta1, cfg.beta2, eps),
            adam_g_t: AdamState::new(g_t.params(), cfg.beta1, cfg.beta2, eps),
            adam_c_s: AdamState::new(disc_s.cls_params(), cfg.beta1, cfg.beta2, eps),
            adam_c_t: AdamState::new(disc_t.cls_params(), cfg.beta1, cfg.beta2, eps),
            adam_d_s: AdamState::new(disc_s.adv_params(), cfg.beta1, cfg.beta2, eps),
            adam_d_t: AdamState::new(disc_t.adv_params(), cfg.beta1, cfg.beta2, eps),
            g_s,
            g_t,
            disc_s,
            disc_t,
            step: 0,
            history: Vec::new(),
        }
    }

    /// Translate a batch into the target domain (no gradients kept).
    pub fn translate_to_target(&self, batch: &Tensor) -> TrainResult<Tensor> {
        let tape = Tape::new();
        let x = tape.constant(batch.clone());
        let y = self.g_t.bind(&tape, false).forward(x).map_err(TrainError::in_term("g_t"))?;
        Ok(y.value())
    }

    /// Translate a batch into the source domain (no gradients kept).
    pub fn translate_to_source(&self, batch: &Tensor) -> TrainResult<Tensor> {
        let tape = Tape::new();
        let x = tape.constant(batch.clone());
        let y = self.g_s.bind(&tape, false).forward(x).map_err(TrainError::in_term("g_s"))?;
        Ok(y.value())
    }

    /// Target-domain classifier logits C_t (no gradients kept).
    pub fn classify_target(&self, batch: &Tensor) -> TrainResult<Tensor> {
        let tape = Tape::new();
        let x = tape.constant(batch.clone());
        let bound = self.disc_t.bind(&tape, Discriminate::Frozen);
        let feat = bound.trunk(x).map_err(TrainError::in_term("disc_t.trunk"))?;
        let logits = bound.c_logits(feat).map_err(TrainError::in_term("disc_t.c"))?;
        Ok(logits.value())
    }

    /// Source-domain classifier logits C_s (no gradients kept).
    pub fn classify_source(&self, batch: &Tensor) -> TrainResult<Tensor> {
        let tape = Tape::new();
        let x = tape.constant(batch.clone());
        let bound = self.disc_s.bind(&tape, Discriminate::Frozen);
        let feat = bound.trunk(x).map_err(TrainError::in_term("disc_s.trunk"))?;
        let logits = bound.c_logits(feat).map_err(TrainError::in_term("disc_s.c"))?;
        Ok(logits.value())
    }

    /// Target-discriminator trunk features (no gradients kept).
    pub fn trunk_features_target(&self, batch: &Tensor) -> TrainResult<Tensor> {
        let tape = Tape::new();
        let x = tape.constant(batch.clone());
        let bound = self.disc_t.bind(&tape, Discriminate::Frozen);
        let feat = bound.trunk(x).map_err(TrainError::in_term("disc_t.trunk"))?;
        Ok(feat.value())
    }

    pub fn named_params(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for (prefix, params) in [
            ("g_s", self.g_s.named_params()),
            ("g_t", self.g_t.named_params()),
            ("disc_s", self.disc_s.named_params()),
            ("disc_t", self.disc_t.named_params()),
        ] {
            out.extend(params.into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)));
        }
        out
    }

    /// Write all network parameters to a checkpoint file.
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let side = match self.kind {
            DataKind::Image { side } => side as u32,
            DataKind::Vector { .. } => 0,
        };
        let meta = CheckpointMeta { classes: self.classes as u32, image_side: side };
        save_checkpoint(path, meta, &self.named_params())
    }

    /// Restore network parameters from a checkpoint produced by
    /// [`TrainState::save`] on a state with identical architecture.
    pub fn load(&mut self, path: &Path) -> TrainResult<()> {
        let (meta, blocks) = load_checkpoint(path).map_err(|e| TrainError::Config(e.to_string()))?;
        if meta.classes as usize != self.classes {
            return Err(TrainError::Config(format!(
                "checkpoint has {} classes, state has {}",
                meta.classes, self.classes
            )));
        }
        let take = |prefix: &str| -> Vec<Tensor> {
            blocks
                .iter()
                .filter(|(n, _)| n.starts_with(prefix))
                .map(|(_, t)| t.clone())
                .collect()
        };
        self.g_s.set_params(take("g_s.")).map_err(|e| TrainError::Config(e.to_string()))?;
        self.g_t.set_params(take("g_t.")).map_err(|e| TrainError::Config(e.to_string()))?;
        self.disc_s.set_params(take("disc_s.")).map_err(|e| TrainError::Config(e.to_string()))?;
        self.disc_t.set_params(take("disc_t.")).map_err(|e| TrainError::Config(e.to_string()))?;
        Ok(())
    }
}
