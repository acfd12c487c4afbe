use serde::{Deserialize, Serialize};

use crate::losses::{AdvMode, DspMode, DspSpace};
use crate::nn::NetConfig;

use super::{TrainError, TrainResult};

/// How the pseudo-label confidence weight is produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaMode {
    /// Entropy confidence weight, gamma <= 1.
    Entropy,
    /// Every gamma is exactly 1 (the unweighted ablation column).
    ConstantOne,
}

/// Which of the seven objective terms participate. The joint adversarial
/// terms of both domains switch together.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnabledTerms {
    pub dgan_t: bool,
    pub dgan_s: bool,
    pub cyc: bool,
    pub clc: bool,
    pub jgan: bool,
    pub dsp: bool,
}

impl EnabledTerms {
    pub fn all() -> Self {
        EnabledTerms { dgan_t: true, dgan_s: true, cyc: true, clc: true, jgan: true, dsp: true }
    }

    pub fn none() -> Self {
        EnabledTerms { dgan_t: false, dgan_s: false, cyc: false, clc: false, jgan: false, dsp: false }
    }

    pub fn is_empty(&self) -> bool {
        !(self.dgan_t || self.dgan_s || self.cyc || self.clc || self.jgan || self.dsp)
    }

    /// Warmup keeps only the plain adversarial and cycle terms.
    pub fn warmup_restricted(&self) -> Self {
        EnabledTerms { dgan_t: self.dgan_t, dgan_s: self.dgan_s, cyc: self.cyc, clc: false, jgan: false, dsp: false }
    }
}

/// Every knob of one training run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub epochs: usize,
    pub batch: usize,
    pub warmup_epochs: usize,
    pub adv_mode: AdvMode,
    pub dsp_mode: DspMode,
    pub dsp_margin: f64,
    pub dsp_space: DspSpace,
    pub gamma_mode: GammaMode,
    /// Feed soft probability vectors (not one-hot argmax) as pseudo-labels
    /// into the joint discriminators.
    pub jag_soft_labels: bool,
    pub lr_start: f64,
    pub lr_end: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub seed: u64,
    pub enabled: EnabledTerms,
    #[serde(skip)]
    pub net: NetConfig,
    /// Record target accuracy after every epoch (through the audited
    /// eval accessor).
    pub epoch_eval: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda1: 5.0,
            lambda2: 0.1,
            lambda3: 1e-4,
            epochs: 30,
            batch: 64,
            warmup_epochs: 5,
            adv_mode: AdvMode::Mse,
            dsp_mode: DspMode::Literal,
            dsp_margin: 1.0,
            dsp_space: DspSpace::Raw,
            gamma_mode: GammaMode::Entropy,
            jag_soft_labels: true,
            lr_start: crate::nn::LR_START,
            lr_end: crate::nn::LR_END,
            beta1: crate::nn::ADAM_BETA1,
            beta2: crate::nn::ADAM_BETA2,
            seed: 0,
            enabled: EnabledTerms::all(),
            net: NetConfig::default(),
            epoch_eval: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> TrainResult<()> {
        if self.lambda1 < 0.0 || self.lambda2 < 0.0 || self.lambda3 < 0.0 {
            return Err(TrainError::Config("negative lambda".into()));
        }
        if self.epochs == 0 || self.batch == 0 {
            return Err(TrainError::Config("epochs and batch must be positive".into()));
        }
        if self.warmup_epochs > self.epochs {
            return Err(TrainError::Config(format!(
                "warmup_epochs {} exceeds epochs {}",
                self.warmup_epochs, self.epochs
            )));
        }
        if self.enabled.is_empty() {
            return Err(TrainError::Config("enabled_terms is empty".into()));
        }
        if self.lr_start <= 0.0 || self.lr_end <= 0.0 {
            return Err(TrainError::Config("learning rates must be positive".into()));
        }
        Ok(())
    }
}

/// One row of the nine-configuration ablation grid.
#[derive(Clone, Copy, Debug)]
pub struct AblationRow {
    /// 1-based row number.
    pub index: usize,
    pub name: &'static str,
    pub terms: EnabledTerms,
    pub gamma: GammaMode,
}

/// The canonical nine rows: single-direction GANs, the cycle pair, then
/// consistence, joint alignment (unweighted and entropy-weighted), and
/// structure preservation, culminating in the full objective.
pub fn ablation_rows() -> [AblationRow; 9] {
    let base = EnabledTerms::none();
    let row3 = EnabledTerms { dgan_t: true, dgan_s: true, cyc: true, ..base };
    let row4 = EnabledTerms { clc: true, ..row3 };
    [
        AblationRow {
            index: 1,
            name: "dgan_t",
            terms: EnabledTerms { dgan_t: true, ..base },
            gamma: GammaMode::ConstantOne,
        },
        AblationRow {
            index: 2,
            name: "dgan_s",
            terms: EnabledTerms { dgan_s: true, ..base },
            gamma: GammaMode::ConstantOne,
        },
        AblationRow { index: 3, name: "cycle", terms: row3, gamma: GammaMode::ConstantOne },
        AblationRow { index: 4, name: "cycle+clc", terms: row4, gamma: GammaMode::ConstantOne },
        AblationRow {
            index: 5,
            name: "cycle+jag(g1)",
            terms: EnabledTerms { jgan: true, ..row3 },
            gamma: GammaMode::ConstantOne,
        },
        AblationRow {
            index: 6,
            name: "cycle+clc+jag(g1)",
            terms: EnabledTerms { jgan: true, ..row4 },
            gamma: GammaMode::ConstantOne,
        },
        AblationRow {
            index: 7,
            name: "cycle+clc+jag(ent)",
            terms: EnabledTerms { jgan: true, ..row4 },
            gamma: GammaMode::Entropy,
        },
        AblationRow {
            index: 8,
            name: "cycle+clc+jag(g1)+dsp",
            terms: EnabledTerms { jgan: true, dsp: true, ..row4 },
            gamma: GammaMode::ConstantOne,
        },
        AblationRow {
            index: 9,
            name: "full",
            terms: EnabledTerms { jgan: true, dsp: true, ..row4 },
            gamma: GammaMode::Entropy,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_with_digits_lambdas() {
        let cfg = TrainConfig::default();
        cfg.validate().unwrap();
        assert_eq!((cfg.lambda1, cfg.lambda2, cfg.lambda3), (5.0, 0.1, 1e-4));
        assert_eq!(cfg.batch, 64);
        assert_eq!((cfg.beta1, cfg.beta2), (0.5, 0.999));
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut cfg = TrainConfig::default();
        cfg.warmup_epochs = cfg.epochs + 1;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::default();
        cfg.enabled = EnabledTerms::none();
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::default();
        cfg.lambda2 = -0.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn row_grid_matches_the_table() {
        let rows = ablation_rows();
        assert_eq!(rows.len(), 9);
        // Row 1/2: single-direction adversarial terms only.
        assert!(rows[0].terms.dgan_t && !rows[0].terms.dgan_s && !rows[0].terms.cyc);
        assert!(rows[1].terms.dgan_s && !rows[1].terms.dgan_t);
        // Row 9 enables every term with the entropy weight.
        assert_eq!(rows[8].terms, EnabledTerms::all());
        assert_eq!(rows[8].gamma, GammaMode::Entropy);
        // Rows 7 vs 6 and 9 vs 8 differ only in the gamma mode.
        assert_eq!(rows[6].terms, rows[5].terms);
        assert_ne!(rows[6].gamma, rows[5].gamma);
        assert_eq!(rows[8].terms, rows[7].terms);
        assert_ne!(rows[8].gamma, rows[7].gamma);
    }

    #[test]
    fn warmup_restriction_gates_higher_terms() {
        let w = EnabledTerms::all().warmup_restricted();
        assert!(w.dgan_t && w.dgan_s && w.cyc);
        assert!(!w.clc && !w.jgan && !w.dsp);
    }
}
