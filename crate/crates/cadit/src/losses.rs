//! The seven loss terms of the objective, the entropy confidence weight,
//! and the combined total. Every function is pure: values in, a tape
//! expression (or plain number) out.
//!
//! All losses are returned in "minimize" convention. The discriminators'
//! maximization is realized by minimizing the negated (log mode) or
//! target-flipped (least-squares mode) form, so a single optimizer code
//! path serves both sides of the game.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AdError, Tape, Tensor, Var};

#[derive(Debug, Error)]
pub enum LossError {
    #[error(transparent)]
    Autodiff(#[from] AdError),
    #[error("{0}")]
    BadInput(String),
}

pub type LossResult<T> = Result<T, LossError>;

/// Functional form of the adversarial terms. Least-squares is the
/// training default; the log form follows the original saturating
/// cross-entropy formulation (with the usual non-saturating generator).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdvMode {
    Log,
    Mse,
}

/// Which player's update a loss expression is built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Discriminator,
    Generator,
}

/// Which domain's joint discriminator a JAG expression belongs to. The
/// entropy weight attaches to the pseudo-labeled pair: the real pair
/// (x_t, C_t(x_t)) in the target domain, the translated pair
/// (x_ts, C_s(x_ts)) in the source domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Target,
    Source,
}

/// Different-class handling in the structure-preserving loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DspMode {
    /// Signed distances exactly as written: +d same class, -d different.
    Literal,
    /// Different-class repulsion saturates at `margin`: -min(d, margin).
    Margin,
}

/// Feature space the structure-preserving distances are measured in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DspSpace {
    /// Flattened generator output.
    Raw,
    /// Discriminator trunk features, trunk parameters held constant.
    Trunk,
}

/// Guard against exact-zero softmax probabilities reaching `log`.
const PROB_FLOOR: f64 = 1e-300;

fn check_scores(name: &'static str, v: Var<'_>) -> LossResult<usize> {
    let s = v.shape();
    if s.len() != 2 || s[1] != 1 {
        return Err(LossError::BadInput(format!("{name}: want scores of shape (n, 1), got {s:?}")));
    }
    if s[0] == 0 {
        return Err(LossError::BadInput(format!("{name}: empty batch")));
    }
    Ok(s[0])
}

/// `mean(log sigma(x))` as a tape expression.
fn mean_log_sigmoid<'t>(x: Var<'t>) -> LossResult<Var<'t>> {
    Ok(x.sigmoid()?.sadd(PROB_FLOOR)?.log()?.mean()?)
}

/// `mean(log(1 - sigma(x)))` via the identity `1 - sigma(x) = sigma(-x)`.
fn mean_log_one_minus_sigmoid<'t>(x: Var<'t>) -> LossResult<Var<'t>> {
    mean_log_sigmoid(x.smul(-1.0)?)
}

/// Marginal adversarial loss over D scores.
///
/// Discriminator side (to minimize): log mode
/// `-(mean log sigma(real) + mean log(1 - sigma(fake)))`; least squares
/// `mean (real-1)^2 + mean fake^2`. Generator side: log mode
/// non-saturating `-mean log sigma(fake)`; least squares `mean (fake-1)^2`.
pub fn adv_loss<'t>(real: Var<'t>, fake: Var<'t>, mode: AdvMode, side: Side) -> LossResult<Var<'t>> {
    check_scores("adv_loss real", real)?;
    check_scores("adv_loss fake", fake)?;
    let v = match (mode, side) {
        (AdvMode::Mse, Side::Discriminator) => {
            real.sadd(-1.0)?.square()?.mean()?.add(fake.square()?.mean()?)?
        }
        (AdvMode::Mse, Side::Generator) => fake.sadd(-1.0)?.square()?.mean()?,
        (AdvMode::Log, Side::Discriminator) => {
            let r = mean_log_sigmoid(real)?;
            let f = mean_log_one_minus_sigmoid(fake)?;
            r.add(f)?.smul(-1.0)?
        }
        (AdvMode::Log, Side::Generator) => mean_log_sigmoid(fake)?.smul(-1.0)?,
    };
    Ok(v)
}

/// Mean cross-entropy of class logits against index labels.
pub fn classifier_ce<'t>(tape: &'t Tape, logits: Var<'t>, labels: &[usize]) -> LossResult<Var<'t>> {
    let s = logits.shape();
    if s.len() != 2 {
        return Err(LossError::BadInput(format!("classifier_ce: want (n, C) logits, got {s:?}")));
    }
    let (n, c) = (s[0], s[1]);
    if labels.len() != n {
        return Err(LossError::BadInput(format!("classifier_ce: {n} rows but {} labels", labels.len())));
    }
    if n == 0 {
        return Err(LossError::BadInput("classifier_ce: empty batch".into()));
    }
    let mut mask = Tensor::zeros(&[n, c]);
    for (i, &l) in labels.iter().enumerate() {
        if l >= c {
            return Err(LossError::BadInput(format!("classifier_ce: label {l} out of range [0, {c})")));
        }
        mask.data_mut()[i * c + l] = 1.0;
    }
    let mask = tape.constant(mask);
    let picked = logits.softmax()?.sadd(PROB_FLOOR)?.log()?.mul(mask)?.sum()?;
    Ok(picked.smul(-1.0 / n as f64)?)
}

/// Mean absolute difference over all elements; one direction of the
/// cycle penalty (callers sum both directions).
pub fn cycle_loss<'t>(x: Var<'t>, x_roundtrip: Var<'t>) -> LossResult<Var<'t>> {
    Ok(x.sub(x_roundtrip)?.abs()?.mean()?)
}

/// Structure-preserving pair loss over translated samples.
///
/// Features are flattened to (n, d); for ordered pairs i != j the
/// Euclidean distance enters with weight +1 when the source labels agree
/// and -1 otherwise, normalized to a mean over the n(n-1) ordered pairs.
/// Margin mode replaces the different-class term by `-min(d, margin)`.
pub fn dsp_loss<'t>(
    tape: &'t Tape,
    features: Var<'t>,
    labels: &[usize],
    mode: DspMode,
    margin: f64,
) -> LossResult<Var<'t>> {
    let s = features.shape();
    let n = s[0];
    if n < 2 {
        return Err(LossError::BadInput(format!("dsp_loss: need at least 2 samples, got {n}")));
    }
    if labels.len() != n {
        return Err(LossError::BadInput(format!("dsp_loss: {n} rows but {} labels", labels.len())));
    }
    if matches!(mode, DspMode::Margin) && margin <= 0.0 {
        return Err(LossError::BadInput(format!("dsp_loss: margin must be positive, got {margin}")));
    }
    let d: usize = s[1..].iter().product();
    let flat = features.reshape(&[n, d])?;
    let dist = flat.pairwise_sq_dist()?.sqrt()?;

    let scale = 1.0 / (n * (n - 1)) as f64;
    let mut same = Tensor::zeros(&[n, n]);
    let mut diff = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if labels[i] == labels[j] {
                same.data_mut()[i * n + j] = scale;
            } else {
                diff.data_mut()[i * n + j] = scale;
            }
        }
    }
    let same = tape.constant(same);
    let diff = tape.constant(diff);

    let attract = dist.mul(same)?.sum()?;
    let repel = match mode {
        DspMode::Literal => dist.mul(diff)?.sum()?,
        DspMode::Margin => {
            // min(d, m) = m - relu(m - d)
            let clipped = dist.smul(-1.0)?.sadd(margin)?.relu()?.smul(-1.0)?.sadd(margin)?;
            clipped.mul(diff)?.sum()?
        }
    };
    Ok(attract.sub(repel)?)
}

/// Classification consistence: mean over samples of the L1 distance
/// between two per-sample probability vectors.
pub fn clc_loss<'t>(pred_t: Var<'t>, pred_s: Var<'t>) -> LossResult<Var<'t>> {
    let (a, b) = (pred_t.shape(), pred_s.shape());
    if a != b || a.len() != 2 {
        return Err(LossError::BadInput(format!("clc_loss: want equal (n, C) shapes, got {a:?} and {b:?}")));
    }
    let n = a[0];
    if n == 0 {
        return Err(LossError::BadInput("clc_loss: empty batch".into()));
    }
    for (name, v) in [("pred_t", pred_t), ("pred_s", pred_s)] {
        let t = v.value();
        for i in 0..n {
            let row = t.row(i);
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-6 {
                return Err(LossError::BadInput(format!("clc_loss: {name} row {i} is not a probability vector")));
            }
        }
    }
    Ok(pred_t.sub(pred_s)?.abs()?.sum()?.smul(1.0 / n as f64)?)
}

/// Entropy confidence weight `gamma = 1 - H(p) / ln C`, with
/// `0 ln 0 := 0`; 1 for a one-hot vector, 0 for the uniform one.
pub fn confidence_weight(probs: &[f64], classes: usize) -> LossResult<f64> {
    if classes < 2 || probs.len() != classes {
        return Err(LossError::BadInput(format!(
            "confidence_weight: want len == C >= 2, got len {} and C {classes}",
            probs.len()
        )));
    }
    let sum: f64 = probs.iter().sum();
    if probs.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-6 {
        return Err(LossError::BadInput("confidence_weight: not a probability vector".into()));
    }
    let h: f64 = probs.iter().map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 }).sum();
    Ok((1.0 - h / (classes as f64).ln()).clamp(0.0, 1.0))
}

/// Joint adversarial loss over J scores of (sample, label) pairs.
///
/// `gammas` weight the pseudo-labeled side per sample (real pairs in the
/// target domain, translated pairs in the source domain) and divide by n,
/// not by the weight sum, so low-confidence samples simply contribute
/// less. Functional forms mirror [`adv_loss`].
pub fn jag_loss<'t>(
    tape: &'t Tape,
    j_real: Var<'t>,
    j_fake: Var<'t>,
    gammas: &[f64],
    domain: Domain,
    mode: AdvMode,
    side: Side,
) -> LossResult<Var<'t>> {
    let n_real = check_scores("jag_loss real", j_real)?;
    let n_fake = check_scores("jag_loss fake", j_fake)?;
    if gammas.iter().any(|&g| !(0.0..=1.0).contains(&g)) {
        return Err(LossError::BadInput("jag_loss: gamma outside [0, 1]".into()));
    }
    let weighted_n = match domain {
        Domain::Target => n_real,
        Domain::Source => n_fake,
    };
    if gammas.len() != weighted_n {
        return Err(LossError::BadInput(format!(
            "jag_loss: {} gammas for a pseudo side of {weighted_n} samples",
            gammas.len()
        )));
    }
    let gv = || {
        tape.constant(Tensor::from_vec(&[weighted_n, 1], gammas.to_vec()).unwrap())
    };
    // Weighted mean with denominator n.
    let wmean = |v: Var<'t>| -> LossResult<Var<'t>> {
        Ok(v.mul(gv())?.sum()?.smul(1.0 / weighted_n as f64)?)
    };

    let v = match (domain, side, mode) {
        (Domain::Target, Side::Discriminator, AdvMode::Mse) => {
            let r = wmean(j_real.sadd(-1.0)?.square()?)?;
            r.add(j_fake.square()?.mean()?)?
        }
        (Domain::Target, Side::Discriminator, AdvMode::Log) => {
            let r = wmean(j_real.sigmoid()?.sadd(PROB_FLOOR)?.log()?)?;
            let f = mean_log_one_minus_sigmoid(j_fake)?;
            r.add(f)?.smul(-1.0)?
        }
        (Domain::Target, Side::Generator, AdvMode::Mse) => j_fake.sadd(-1.0)?.square()?.mean()?,
        (Domain::Target, Side::Generator, AdvMode::Log) => mean_log_sigmoid(j_fake)?.smul(-1.0)?,
        (Domain::Source, Side::Discriminator, AdvMode::Mse) => {
            let r = j_real.sadd(-1.0)?.square()?.mean()?;
            r.add(wmean(j_fake.square()?)?)?
        }
        (Domain::Source, Side::Discriminator, AdvMode::Log) => {
            let r = mean_log_sigmoid(j_real)?;
            let f = wmean(j_fake.smul(-1.0)?.sigmoid()?.sadd(PROB_FLOOR)?.log()?)?;
            r.add(f)?.smul(-1.0)?
        }
        (Domain::Source, Side::Generator, AdvMode::Mse) => wmean(j_fake.sadd(-1.0)?.square()?)?,
        (Domain::Source, Side::Generator, AdvMode::Log) => {
            wmean(j_fake.sigmoid()?.sadd(PROB_FLOOR)?.log()?)?.smul(-1.0)?
        }
    };
    Ok(v)
}

/// The seven per-term values of one objective evaluation plus the
/// weighted total.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub dgan_t: f64,
    pub dgan_s: f64,
    pub jgan_t: f64,
    pub jgan_s: f64,
    pub cyc: f64,
    pub clc: f64,
    pub dsp: f64,
    pub total: f64,
    pub lambdas: (f64, f64, f64),
}

/// Per-term inputs to [`total_objective`].
#[derive(Clone, Copy, Debug, Default)]
pub struct LossParts {
    pub dgan_t: f64,
    pub dgan_s: f64,
    pub jgan_t: f64,
    pub jgan_s: f64,
    pub cyc: f64,
    pub clc: f64,
    pub dsp: f64,
}

/// Combine the seven terms: adversarial terms enter unweighted, cycle,
/// consistence, and structure terms are scaled by lambda1..3.
pub fn total_objective(parts: LossParts, lambda1: f64, lambda2: f64, lambda3: f64) -> LossResult<LossBreakdown> {
    if lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0 {
        return Err(LossError::BadInput(format!(
            "total_objective: negative lambda ({lambda1}, {lambda2}, {lambda3})"
        )));
    }
    let total = parts.dgan_t
        + parts.dgan_s
        + parts.jgan_t
        + parts.jgan_s
        + lambda1 * parts.cyc
        + lambda2 * parts.clc
        + lambda3 * parts.dsp;
    Ok(LossBreakdown {
        dgan_t: parts.dgan_t,
        dgan_s: parts.dgan_s,
        jgan_t: parts.jgan_t,
        jgan_s: parts.jgan_s,
        cyc: parts.cyc,
        clc: parts.clc,
        dsp: parts.dsp,
        total,
        lambdas: (lambda1, lambda2, lambda3),
    })
}
