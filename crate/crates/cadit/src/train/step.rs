use crate::autodiff::{Tape, Tensor, Var};
use crate::losses::{
    adv_loss, classifier_ce, clc_loss, confidence_weight, cycle_loss, dsp_loss, jag_loss,
    total_objective, Domain, DspSpace, LossBreakdown, LossParts, Side,
};
use crate::nn::Discriminate;
use crate::synthdata::BatchPair;

use super::config::{EnabledTerms, GammaMode, TrainConfig};
use super::state::TrainState;
use super::{TrainError, TrainResult};

/// Detached pseudo-labels of one batch: softmax probabilities, entropy
/// confidence weights, and hard argmax labels (lowest index wins ties).
#[derive(Clone, Debug)]
pub struct PseudoLabels {
    pub probs: Tensor,
    pub gammas: Vec<f64>,
    pub hard: Vec<usize>,
}

/// Turn classifier logits into pseudo-labels. The result is plain data,
/// deliberately off the tape: pseudo-labels and their weights enter the
/// joint losses as constants, so no gradient reaches the classifiers
/// through them.
pub fn pseudo_label(c_logits: &Tensor) -> TrainResult<PseudoLabels> {
    let s = c_logits.shape();
    if s.len() != 2 || s[1] < 2 {
        return Err(TrainError::Config(format!("pseudo_label: want (n, C >= 2) logits, got {s:?}")));
    }
    let (n, c) = (s[0], s[1]);
    let mut probs = Tensor::zeros(&[n, c]);
    crate::autodiff::softmax_into(c_logits.data(), c, probs.data_mut());
    let mut gammas = Vec::with_capacity(n);
    for i in 0..n {
        gammas.push(confidence_weight(probs.row(i), c).map_err(TrainError::in_term("pseudo_label"))?);
    }
    let hard = probs.argmax_rows();
    Ok(PseudoLabels { probs, gammas, hard })
}

/// Accumulate enabled terms into one scalar loss expression.
fn push<'t>(slot: &mut Option<Var<'t>>, v: Var<'t>) -> TrainResult<()> {
    *slot = Some(match slot.take() {
        Some(acc) => acc.add(v).map_err(TrainError::in_term("loss sum"))?,
        None => v,
    });
    Ok(())
}

fn onehot(labels: &[usize], classes: usize) -> Tensor {
    let mut t = Tensor::zeros(&[labels.len(), classes]);
    for (i, &l) in labels.iter().enumerate() {
        t.data_mut()[i * classes + l] = 1.0;
    }
    t
}

/// Pseudo-label vector + gammas as the joint discriminators consume them.
fn jag_inputs(
    logits_value: &Tensor,
    classes: usize,
    cfg: &TrainConfig,
    gamma_mode: GammaMode,
) -> TrainResult<(Tensor, Vec<f64>)> {
    let pl = pseudo_label(logits_value)?;
    let label_vec = if cfg.jag_soft_labels { pl.probs } else { onehot(&pl.hard, classes) };
    let gammas = match gamma_mode {
        GammaMode::Entropy => pl.gammas,
        GammaMode::ConstantOne => vec![1.0; logits_value.shape()[0]],
    };
    Ok((label_vec, gammas))
}

/// Evaluate the full objective at the current parameters without touching
/// them: the seven term values (disabled terms are exactly zero) and the
/// weighted total. This is both the per-step log record and the reference
/// the training invariants are checked against.
pub fn objective_breakdown(
    state: &TrainState,
    batch: &BatchPair,
    cfg: &TrainConfig,
    active: EnabledTerms,
) -> TrainResult<LossBreakdown> {
    let tape = Tape::new();
    let mode = cfg.adv_mode;
    let x_s = tape.constant(batch.source.clone());
    let x_t = tape.constant(batch.target.clone());
    let g_s = state.g_s.bind(&tape, false);
    let g_t = state.g_t.bind(&tape, false);
    let d_s = state.disc_s.bind(&tape, Discriminate::Frozen);
    let d_t = state.disc_t.bind(&tape, Discriminate::Frozen);

    let need_xst = active.dgan_t || active.jgan || active.cyc || active.dsp;
    let need_xts = active.dgan_s || active.jgan || active.cyc || active.clc;
    let xst = if need_xst { Some(g_t.forward(x_s).map_err(TrainError::in_term("translate s->t"))?) } else { None };
    let xts = if need_xts { Some(g_s.forward(x_t).map_err(TrainError::in_term("translate t->s"))?) } else { None };

    let feat_t_real = if active.dgan_t || active.jgan || active.clc {
        Some(d_t.trunk(x_t).map_err(TrainError::in_term("disc_t trunk"))?)
    } else {
        None
    };
    let feat_t_fake = if active.dgan_t || active.jgan || (active.dsp && cfg.dsp_space == DspSpace::Trunk) {
        Some(d_t.trunk(xst.unwrap()).map_err(TrainError::in_term("disc_t trunk"))?)
    } else {
        None
    };
    let feat_s_real = if active.dgan_s || active.jgan {
        Some(d_s.trunk(x_s).map_err(TrainError::in_term("disc_s trunk"))?)
    } else {
        None
    };
    let feat_s_fake = if active.dgan_s || active.jgan || active.clc {
        Some(d_s.trunk(xts.unwrap()).map_err(TrainError::in_term("disc_s trunk"))?)
    } else {
        None
    };

    let mut parts = LossParts::default();

    if active.dgan_t {
        let real = d_t.d_score(feat_t_real.unwrap()).map_err(TrainError::in_term("dgan_t"))?;
        let fake = d_t.d_score(feat_t_fake.unwrap()).map_err(TrainError::in_term("dgan_t"))?;
        let adv = adv_loss(real, fake, mode, Side::Discriminator).map_err(TrainError::in_term("dgan_t"))?;
        let logits = d_t.c_logits(feat_t_fake.unwrap()).map_err(TrainError::in_term("dgan_t ce"))?;
        let ce = classifier_ce(&tape, logits, &batch.source_labels).map_err(TrainError::in_term("dgan_t ce"))?;
        parts.dgan_t = adv.item()? + ce.item()?;
    }
    if active.dgan_s {
        let real = d_s.d_score(feat_s_real.unwrap()).map_err(TrainError::in_term("dgan_s"))?;
        let fake = d_s.d_score(feat_s_fake.unwrap()).map_err(TrainError::in_term("dgan_s"))?;
        let adv = adv_loss(real, fake, mode, Side::Discriminator).map_err(TrainError::in_term("dgan_s"))?;
        let logits = d_s.c_logits(feat_s_real.unwrap()).map_err(TrainError::in_term("dgan_s ce"))?;
        let ce = classifier_ce(&tape, logits, &batch.source_labels).map_err(TrainError::in_term("dgan_s ce"))?;
        parts.dgan_s = adv.item()? + ce.item()?;
    }
    if active.jgan {
        let y_vec = tape.constant(onehot(&batch.source_labels, state.classes));
        let logits_t = d_t.c_logits(feat_t_real.unwrap()).map_err(TrainError::in_term("jgan_t"))?;
        let (pl_t, gamma_t) = jag_inputs(&logits_t.value(), state.classes, cfg, cfg.gamma_mode)?;
        let j_real_t = d_t.j_score(feat_t_real.unwrap(), tape.constant(pl_t)).map_err(TrainError::in_term("jgan_t"))?;
        let j_fake_t = d_t.j_score(feat_t_fake.unwrap(), y_vec).map_err(TrainError::in_term("jgan_t"))?;
        let jt = jag_loss(&tape, j_real_t, j_fake_t, &gamma_t, Domain::Target, mode, Side::Discriminator)
            .map_err(TrainError::in_term("jgan_t"))?;
        parts.jgan_t = jt.item()?;

        let logits_s = d_s.c_logits(feat_s_fake.unwrap()).map_err(TrainError::in_term("jgan_s"))?;
        let (pl_s, gamma_s) = jag_inputs(&logits_s.value(), state.classes, cfg, cfg.gamma_mode)?;
        let j_real_s = d_s.j_score(feat_s_real.unwrap(), y_vec).map_err(TrainError::in_term("jgan_s"))?;
        let j_fake_s = d_s.j_score(feat_s_fake.unwrap(), tape.constant(pl_s)).map_err(TrainError::in_term("jgan_s"))?;
        let js = jag_loss(&tape, j_real_s, j_fake_s, &gamma_s, Domain::Source, mode, Side::Discriminator)
            .map_err(TrainError::in_term("jgan_s"))?;
        parts.jgan_s = js.item()?;
    }
    if active.cyc {
        let cyc_s = g_s.forward(xst.unwrap()).map_err(TrainError::in_term("cycle s->t->s"))?;
        let cyc_t = g_t.forward(xts.unwrap()).map_err(TrainError::in_term("cycle t->s->t"))?;
        let a = cycle_loss(x_s, cyc_s).map_err(TrainError::in_term("cyc"))?;
        let b = cycle_loss(x_t, cyc_t).map_err(TrainError::in_term("cyc"))?;
        parts.cyc = a.item()? + b.item()?;
    }
    if active.clc {
        let pred_t = d_t.c_logits(feat_t_real.unwrap()).map_err(TrainError::in_term("clc"))?.softmax()?;
        let pred_s = d_s.c_logits(feat_s_fake.unwrap()).map_err(TrainError::in_term("clc"))?.softmax()?;
        parts.clc = clc_loss(pred_t, pred_s).map_err(TrainError::in_term("clc"))?.item()?;
    }
    if active.dsp {
        let feats = match cfg.dsp_space {
            DspSpace::Raw => xst.unwrap(),
            DspSpace::Trunk => feat_t_fake.unwrap(),
        };
        let v = dsp_loss(&tape, feats, &batch.source_labels, cfg.dsp_mode, cfg.dsp_margin).map_err(TrainError::in_term("dsp"))?;
        parts.dsp = v.item()?;
    }

    total_objective(parts, cfg.lambda1, cfg.lambda2, cfg.lambda3).map_err(TrainError::in_term("total"))
}

/// One alternating optimization step on one unpaired batch.
///
/// Phase 1 updates the adversarial groups (trunk, D head, J head of both
/// discriminators) on the discriminator-side losses with generators and
/// classifier heads frozen. Phase 2 updates G_s, G_t and the two
/// classifier heads on the generator-side adversarial terms plus
/// cross-entropy, cycle, consistence, and structure terms, with the
/// adversarial groups frozen. Returns the objective evaluated at the
/// pre-step parameters.
pub fn train_step(
    state: &mut TrainState,
    batch: &BatchPair,
    cfg: &TrainConfig,
    active: EnabledTerms,
    lr: f64,
) -> TrainResult<LossBreakdown> {
    if batch.source_labels.is_empty() || batch.target.shape()[0] == 0 {
        return Err(TrainError::Config("train_step: empty batch".into()));
    }
    // Phase 1 evaluates every term except the cycle penalty at the
    // pre-step parameters; the cycle value comes out of phase 2, where it
    // is identical because phase 1 never touches generator parameters.
    let mut parts = phase1_discriminators(state, batch, cfg, active, lr)?;
    parts.cyc = phase2_generators_classifiers(state, batch, cfg, active, lr)?;
    let breakdown = total_objective(parts, cfg.lambda1, cfg.lambda2, cfg.lambda3)
        .map_err(TrainError::in_term("total"))?;

    state.step += 1;
    state.history.push(breakdown);
    Ok(breakdown)
}

fn phase1_discriminators(
    state: &mut TrainState,
    batch: &BatchPair,
    cfg: &TrainConfig,
    active: EnabledTerms,
    lr: f64,
) -> TrainResult<LossParts> {
    let mut parts = LossParts::default();
    let update = active.dgan_t || active.dgan_s || active.jgan;
    let (grads_t, grads_s) = {
        let tape = Tape::new();
        let mode = cfg.adv_mode;
        let x_s = tape.constant(batch.source.clone());
        let x_t = tape.constant(batch.target.clone());
        let g_s = state.g_s.bind(&tape, false);
        let g_t = state.g_t.bind(&tape, false);
        let d_s = state.disc_s.bind(&tape, Discriminate::Adversary);
        let d_t = state.disc_t.bind(&tape, Discriminate::Adversary);

        let mut loss: Option<Var<'_>> = None;

        let need_xst = active.dgan_t || active.jgan || active.dsp;
        let need_xts = active.dgan_s || active.jgan || active.clc;
        let xst = if need_xst { Some(g_t.forward(x_s).map_err(TrainError::in_term("translate s->t"))?) } else { None };
        let xts = if need_xts { Some(g_s.forward(x_t).map_err(TrainError::in_term("translate t->s"))?) } else { None };
        let feat_t_real = if active.dgan_t || active.jgan || active.clc {
            Some(d_t.trunk(x_t).map_err(TrainError::in_term("disc_t trunk"))?)
        } else {
            None
        };
        let feat_t_fake = if active.dgan_t || active.jgan || (active.dsp && cfg.dsp_space == DspSpace::Trunk) {
            Some(d_t.trunk(xst.unwrap()).map_err(TrainError::in_term("disc_t trunk"))?)
        } else {
            None
        };
        let feat_s_real = if active.dgan_s || active.jgan {
            Some(d_s.trunk(x_s).map_err(TrainError::in_term("disc_s trunk"))?)
        } else {
            None
        };
        let feat_s_fake = if active.dgan_s || active.jgan || active.clc {
            Some(d_s.trunk(xts.unwrap()).map_err(TrainError::in_term("disc_s trunk"))?)
        } else {
            None
        };

        if active.dgan_t {
            let real = d_t.d_score(feat_t_real.unwrap()).map_err(TrainError::in_term("dgan_t"))?;
            let fake = d_t.d_score(feat_t_fake.unwrap()).map_err(TrainError::in_term("dgan_t"))?;
            let adv = adv_loss(real, fake, mode, Side::Discriminator).map_err(TrainError::in_term("dgan_t"))?;
            let logits = d_t.c_logits(feat_t_fake.unwrap()).map_err(TrainError::in_term("dgan_t ce"))?;
            let ce = classifier_ce(&tape, logits, &batch.source_labels).map_err(TrainError::in_term("dgan_t ce"))?;
            parts.dgan_t = adv.item()? + ce.item()?;
            push(&mut loss, adv)?;
            // The cross-entropy part of this term also belongs to the
            // phase-1 loss: the classifier head is frozen here, so it
            // shapes only the shared trunk, which C_t reads.
            push(&mut loss, ce)?;
        }
        if active.dgan_s {
            let real = d_s.d_score(feat_s_real.unwrap()).map_err(TrainError::in_term("dgan_s"))?;
            let fake = d_s.d_score(feat_s_fake.unwrap()).map_err(TrainError::in_term("dgan_s"))?;
            let adv = adv_loss(real, fake, mode, Side::Discriminator).map_err(TrainError::in_term("dgan_s"))?;
            let logits = d_s.c_logits(feat_s_real.unwrap()).map_err(TrainError::in_term("dgan_s ce"))?;
            let ce = classifier_ce(&tape, logits, &batch.source_labels).map_err(TrainError::in_term("dgan_s ce"))?;
            parts.dgan_s = adv.item()? + ce.item()?;
            push(&mut loss, adv)?;
            push(&mut loss, ce)?;
        }
        if active.jgan {
            let y_vec = tape.constant(onehot(&batch.source_labels, state.classes));
            let logits_t = d_t.c_logits(feat_t_real.unwrap()).map_err(TrainError::in_term("jgan_t"))?;
            let (pl_t, gamma_t) = jag_inputs(&logits_t.value(), state.classes, cfg, cfg.gamma_mode)?;
            let j_real_t = d_t.j_score(feat_t_real.unwrap(), tape.constant(pl_t)).map_err(TrainError::in_term("jgan_t"))?;
            let j_fake_t = d_t.j_score(feat_t_fake.unwrap(), y_vec).map_err(TrainError::in_term("jgan_t"))?;
            let jt = jag_loss(&tape, j_real_t, j_fake_t, &gamma_t, Domain::Target, mode, Side::Discriminator)
                .map_err(TrainError::in_term("jgan_t"))?;
            parts.jgan_t = jt.item()?;
            push(&mut loss, jt)?;

            let logits_s = d_s.c_logits(feat_s_fake.unwrap()).map_err(TrainError::in_term("jgan_s"))?;
            let (pl_s, gamma_s) = jag_inputs(&logits_s.value(), state.classes, cfg, cfg.gamma_mode)?;
            let j_real_s = d_s.j_score(feat_s_real.unwrap(), y_vec).map_err(TrainError::in_term("jgan_s"))?;
            let j_fake_s = d_s.j_score(feat_s_fake.unwrap(), tape.constant(pl_s)).map_err(TrainError::in_term("jgan_s"))?;
            let js = jag_loss(&tape, j_real_s, j_fake_s, &gamma_s, Domain::Source, mode, Side::Discriminator)
                .map_err(TrainError::in_term("jgan_s"))?;
            parts.jgan_s = js.item()?;
            push(&mut loss, js)?;
        }
        if active.clc {
            let pred_t = d_t.c_logits(feat_t_real.unwrap()).map_err(TrainError::in_term("clc"))?.softmax()?;
            let pred_s = d_s.c_logits(feat_s_fake.unwrap()).map_err(TrainError::in_term("clc"))?.softmax()?;
            parts.clc = clc_loss(pred_t, pred_s).map_err(TrainError::in_term("clc"))?.item()?;
        }
        if active.dsp {
            let feats = match cfg.dsp_space {
                DspSpace::Raw => xst.unwrap(),
                DspSpace::Trunk => feat_t_fake.unwrap(),
            };
            let v = dsp_loss(&tape, feats, &batch.source_labels, cfg.dsp_mode, cfg.dsp_margin)
                .map_err(TrainError::in_term("dsp"))?;
            parts.dsp = v.item()?;
        }

        if !update {
            return Ok(parts);
        }
        let loss = loss.expect("phase 1 has at least one term");
        tape.backward(loss).map_err(TrainError::in_term("phase1 backward"))?;
        (d_t.adv_grads(), d_s.adv_grads())
    };
    state.adam_d_t.step(state.disc_t.adv_params_mut(), &grads_t, lr)?;
    state.adam_d_s.step(state.disc_s.adv_params_mut(), &grads_s, lr)?;
    Ok(parts)
}

fn phase2_generators_classifiers(
    state: &mut TrainState,
    batch: &BatchPair,
    cfg: &TrainConfig,
    active: EnabledTerms,
    lr: f64,
) -> TrainResult<f64> {
    let mut cyc_value = 0.0;
    let (g_grads_s, g_grads_t, c_grads_s, c_grads_t) = {
        let tape = Tape::new();
        let mode = cfg.adv_mode;
        let x_s = tape.constant(batch.source.clone());
        let x_t = tape.constant(batch.target.clone());
        let g_s = state.g_s.bind(&tape, true);
        let g_t = state.g_t.bind(&tape, true);
        let d_s = state.disc_s.bind(&tape, Discriminate::ClassifierHead);
        let d_t = state.disc_t.bind(&tape, Discriminate::ClassifierHead);

        let mut loss: Option<Var<'_>> = None;

        let need_xst = active.dgan_t || active.jgan || active.cyc || active.dsp;
        let need_xts = active.dgan_s || active.jgan || active.cyc || active.clc;
        let xst = if need_xst { Some(g_t.forward(x_s).map_err(TrainError::in_term("translate s->t"))?) } else { None };
        let xts = if need_xts { Some(g_s.forward(x_t).map_err(TrainError::in_term("translate t->s"))?) } else { None };

        let feat_t_real = if active.jgan || active.clc {
            Some(d_t.trunk(x_t).map_err(TrainError::in_term("disc_t trunk"))?)
        } else {
            None
        };
        let feat_t_fake = if active.dgan_t || active.jgan || (active.dsp && cfg.dsp_space == DspSpace::Trunk) {
            Some(d_t.trunk(xst.unwrap()).map_err(TrainError::in_term("disc_t trunk"))?)
        } else {
            None
        };
        let feat_s_real = if active.dgan_s || active.jgan {
            Some(d_s.trunk(x_s).map_err(TrainError::in_term("disc_s trunk"))?)
        } else {
            None
        };
        let feat_s_fake = if active.dgan_s || active.jgan || active.clc {
            Some(d_s.trunk(xts.unwrap()).map_err(TrainError::in_term("disc_s trunk"))?)
        } else {
            None
        };

        if active.dgan_t {
            // Generator-side adversarial forms only read the fake scores.
            let fake = d_t.d_score(feat_t_fake.unwrap()).map_err(TrainError::in_term("dgan_t"))?;
            push(&mut loss, adv_loss(fake, fake, mode, Side::Generator).map_err(TrainError::in_term("dgan_t"))?)?;
            let logits = d_t.c_logits(feat_t_fake.unwrap()).map_err(TrainError::in_term("dgan_t ce"))?;
            push(&mut loss, classifier_ce(&tape, logits, &batch.source_labels).map_err(TrainError::in_term("dgan_t ce"))?)?;
        }
        if active.dgan_s {
            let fake = d_s.d_score(feat_s_fake.unwrap()).map_err(TrainError::in_term("dgan_s"))?;
            push(&mut loss, adv_loss(fake, fake, mode, Side::Generator).map_err(TrainError::in_term("dgan_s"))?)?;
            let logits = d_s.c_logits(feat_s_real.unwrap()).map_err(TrainError::in_term("dgan_s ce"))?;
            push(&mut loss, classifier_ce(&tape, logits, &batch.source_labels).map_err(TrainError::in_term("dgan_s ce"))?)?;
        }
        if active.cyc {
            let cyc_s = g_s.forward(xst.unwrap()).map_err(TrainError::in_term("cycle s->t->s"))?;
            let cyc_t = g_t.forward(xts.unwrap()).map_err(TrainError::in_term("cycle t->s->t"))?;
            let a = cycle_loss(x_s, cyc_s).map_err(TrainError::in_term("cyc"))?;
            let b = cycle_loss(x_t, cyc_t).map_err(TrainError::in_term("cyc"))?;
            cyc_value = a.item()? + b.item()?;
            push(&mut loss, a.add(b).map_err(TrainError::in_term("cyc"))?.smul(cfg.lambda1).map_err(TrainError::in_term("cyc"))?)?;
        }
        if active.clc {
            let pred_t = d_t.c_logits(feat_t_real.unwrap()).map_err(TrainError::in_term("clc"))?.softmax()?;
            let pred_s = d_s.c_logits(feat_s_fake.unwrap()).map_err(TrainError::in_term("clc"))?.softmax()?;
            let v = clc_loss(pred_t, pred_s).map_err(TrainError::in_term("clc"))?;
            push(&mut loss, v.smul(cfg.lambda2).map_err(TrainError::in_term("clc"))?)?;
        }
        if active.jgan {
            let y_vec = tape.constant(onehot(&batch.source_labels, state.classes));
            let logits_t = d_t.c_logits(feat_t_real.unwrap()).map_err(TrainError::in_term("jgan_t"))?;
            let (pl_t, gamma_t) = jag_inputs(&logits_t.value(), state.classes, cfg, cfg.gamma_mode)?;
            let j_real_t = d_t.j_score(feat_t_real.unwrap(), tape.constant(pl_t)).map_err(TrainError::in_term("jgan_t"))?;
            let j_fake_t = d_t.j_score(feat_t_fake.unwrap(), y_vec).map_err(TrainError::in_term("jgan_t"))?;
            push(&mut loss,
                jag_loss(&tape, j_real_t, j_fake_t, &gamma_t, Domain::Target, mode, Side::Generator)
                    .map_err(TrainError::in_term("jgan_t"))?,
            )?;

            let logits_s = d_s.c_logits(feat_s_fake.unwrap()).map_err(TrainError::in_term("jgan_s"))?;
            let (pl_s, gamma_s) = jag_inputs(&logits_s.value(), state.classes, cfg, cfg.gamma_mode)?;
            let j_real_s = d_s.j_score(feat_s_real.unwrap(), y_vec).map_err(TrainError::in_term("jgan_s"))?;
            let j_fake_s = d_s.j_score(feat_s_fake.unwrap(), tape.constant(pl_s)).map_err(TrainError::in_term("jgan_s"))?;
            push(&mut loss,
                jag_loss(&tape, j_real_s, j_fake_s, &gamma_s, Domain::Source, mode, Side::Generator)
                    .map_err(TrainError::in_term("jgan_s"))?,
            )?;
        }
        if active.dsp {
            let feats = match cfg.dsp_space {
                DspSpace::Raw => xst.unwrap(),
                DspSpace::Trunk => feat_t_fake.unwrap(),
            };
            let v = dsp_loss(&tape, feats, &batch.source_labels, cfg.dsp_mode, cfg.dsp_margin).map_err(TrainError::in_term("dsp"))?;
            push(&mut loss, v.smul(cfg.lambda3).map_err(TrainError::in_term("dsp"))?)?;
        }

        if let Some(loss) = loss {
            tape.backward(loss).map_err(TrainError::in_term("phase2 backward"))?;
        }
        (g_s.grads(), g_t.grads(), d_s.cls_grads(), d_t.cls_grads())
    };
    state.adam_g_s.step(state.g_s.params_mut(), &g_grads_s, lr)?;
    state.adam_g_t.step(state.g_t.params_mut(), &g_grads_t, lr)?;
    state.adam_c_s.step(state.disc_s.cls_params_mut(), &c_grads_s, lr)?;
    state.adam_c_t.step(state.disc_t.cls_params_mut(), &c_grads_t, lr)?;
    Ok(cyc_value)
}
