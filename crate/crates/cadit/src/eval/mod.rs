//! Quantitative evaluation: target accuracy, proxy A-distance, oracle
//! label-flip rate, and 2-D embedding export. This is the only module
//! that reads hidden target labels, always through the audited accessor.

mod pca;

pub use pca::{pca_embed, pca_embed_export, EmbedGroup, PcaEmbedding};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Tape, Tensor};
use crate::losses::classifier_ce;
use crate::nn::{xavier_uniform, AdamState, Classifier, DataKind, NetConfig};
use crate::synthdata::DomainPair;
use crate::train::{TrainError, TrainState};
use crate::util::derive_seed;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("oracle classifier unusable: accuracy {accuracy:.3} on clean target (need >= 0.9)")]
    OracleUnusable { accuracy: f64 },
    #[error("{0}")]
    BadInput(String),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type EvalResult<T> = Result<T, EvalError>;

/// The quantitative summary of one trained run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Metrics {
    pub target_accuracy: f64,
    pub a_distance_before: f64,
    pub a_distance_after: f64,
    pub label_flip_rate: f64,
    pub per_class_accuracy: Vec<f64>,
}

/// Fraction of target samples whose C_t argmax matches the hidden label.
pub fn target_accuracy(state: &TrainState, pair: &DomainPair) -> Result<f64, TrainError> {
    Ok(target_accuracy_detailed(state, pair)?.0)
}

/// Target accuracy plus the per-class breakdown.
pub fn target_accuracy_detailed(state: &TrainState, pair: &DomainPair) -> Result<(f64, Vec<f64>), TrainError> {
    let logits = state.classify_target(&pair.target.samples)?;
    let pred = logits.argmax_rows();
    let truth = pair.target.reveal_for_eval();
    let mut hit = vec![0usize; pair.classes];
    let mut count = vec![0usize; pair.classes];
    let mut correct = 0usize;
    for (p, &t) in pred.iter().zip(truth) {
        count[t as usize] += 1;
        if *p == t as usize {
            hit[t as usize] += 1;
            correct += 1;
        }
    }
    let per_class = hit
        .iter()
        .zip(&count)
        .map(|(&h, &c)| if c == 0 { 0.0 } else { h as f64 / c as f64 })
        .collect();
    Ok((correct as f64 / truth.len().max(1) as f64, per_class))
}

/// Cap on per-side samples used by the proxy A-distance classifier.
const A_DIST_CAP: usize = 512;
/// Hidden width and step count of the proxy domain classifier.
const A_DIST_HIDDEN: usize = 32;
const A_DIST_STEPS: usize = 200;

/// Proxy A-distance `2 (1 - 2 eps)` where `eps` is the held-out error of
/// a small domain classifier trained on a 50/50 split, clamped to [0, 2].
///
/// The two feature sets are internally put in a canonical order before
/// any seeded work, so swapping the arguments returns the exact same
/// value.
pub fn proxy_a_distance(features_a: &Tensor, features_b: &Tensor, seed: u64) -> EvalResult<f64> {
    let (na, nb) = (features_a.shape()[0], features_b.shape()[0]);
    if na < 20 || nb < 20 {
        return Err(EvalError::TooFewSamples { need: 20, got: na.min(nb) });
    }
    let (a, b) = if content_key(features_b) < content_key(features_a) {
        (features_b, features_a)
    } else {
        (features_a, features_b)
    };

    let dim: usize = a.shape()[1..].iter().product();
    if dim != b.shape()[1..].iter().product::<usize>() {
        return Err(EvalError::BadInput("proxy_a_distance: feature sizes differ".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "a-distance"));

    // Seeded 50/50 split per side, capped.
    let split = |t: &Tensor, rng: &mut ChaCha8Rng| -> (Vec<usize>, Vec<usize>) {
        let n = t.shape()[0];
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(rng);
        idx.truncate(A_DIST_CAP.min(n));
        let half = idx.len() / 2;
        (idx[..half].to_vec(), idx[half..].to_vec())
    };
    let (train_a, test_a) = split(a, &mut rng);
    let (train_b, test_b) = split(b, &mut rng);

    let flat = |t: &Tensor, idx: &[usize]| -> Tensor {
        t.gather_rows(idx).reshaped(&[idx.len(), dim]).unwrap()
    };
    let x_train = concat_rows(&flat(a, &train_a), &flat(b, &train_b));
    let y_train: Vec<f64> = std::iter::repeat_n(0.0, train_a.len())
        .chain(std::iter::repeat_n(1.0, train_b.len()))
        .collect();
    let x_test = concat_rows(&flat(a, &test_a), &flat(b, &test_b));
    let y_test: Vec<f64> = std::iter::repeat_n(0.0, test_a.len())
        .chain(std::iter::repeat_n(1.0, test_b.len()))
        .collect();

    // One hidden layer, width 32, full-batch Adam.
    let mut w1 = xavier_uniform(&[dim, A_DIST_HIDDEN], dim, A_DIST_HIDDEN, &mut rng);
    let mut b1 = Tensor::zeros(&[A_DIST_HIDDEN]);
    let mut w2 = xavier_uniform(&[A_DIST_HIDDEN, 1], A_DIST_HIDDEN, 1, &mut rng);
    let mut b2 = Tensor::zeros(&[1]);
    let targets = Tensor::from_vec(&[y_train.len(), 1], y_train.clone()).unwrap();
    let mut adam = AdamState::with_defaults(&[w1.clone(), b1.clone(), w2.clone(), b2.clone()]);
    for _ in 0..A_DIST_STEPS {
        let tape = Tape::new();
        let x = tape.constant(x_train.clone());
        let (vw1, vb1, vw2, vb2) = (tape.leaf(w1.clone()), tape.leaf(b1.clone()), tape.leaf(w2.clone()), tape.leaf(b2.clone()));
        let t = tape.constant(targets.clone());
        let out = x
            .linear(vw1, vb1)
            .and_then(|h| h.leaky_relu(0.2))
            .and_then(|h| h.linear(vw2, vb2))
            .and_then(|o| o.sigmoid())
            .map_err(TrainError::in_term("a-distance"))?;
        let loss = out
            .sub(t)
            .and_then(|d| d.square())
            .and_then(|d| d.mean())
            .map_err(TrainError::in_term("a-distance"))?;
        tape.backward(loss).map_err(TrainError::in_term("a-distance"))?;
        let grads: Vec<Tensor> = [vw1, vb1, vw2, vb2]
            .iter()
            .map(|v| v.grad().expect("trained leaf has a gradient"))
            .collect();
        let mut params = [&mut w1, &mut b1, &mut w2, &mut b2];
        let mut owned: Vec<Tensor> = params.iter().map(|p| (**p).clone()).collect();
        adam.step(&mut owned, &grads, 0.01).map_err(TrainError::from)?;
        for (p, o) in params.iter_mut().zip(owned) {
            **p = o;
        }
    }

    // Held-out error.
    let tape = Tape::new();
    let x = tape.constant(x_test.clone());
    let (vw1, vb1, vw2, vb2) = (tape.constant(w1), tape.constant(b1), tape.constant(w2), tape.constant(b2));
    let out = x
        .linear(vw1, vb1)
        .and_then(|h| h.leaky_relu(0.2))
        .and_then(|h| h.linear(vw2, vb2))
        .and_then(|o| o.sigmoid())
        .map_err(TrainError::in_term("a-distance"))?
        .value();
    let errors = out
        .data()
        .iter()
        .zip(&y_test)
        .filter(|(&p, &y)| (p > 0.5) != (y > 0.5))
        .count();
    let eps = errors as f64 / y_test.len() as f64;
    Ok((2.0 * (1.0 - 2.0 * eps)).clamp(0.0, 2.0))
}

/// Proxy A-distance computed from `eps` directly (the trivial cases).
pub fn a_distance_from_error(eps: f64) -> f64 {
    (2.0 * (1.0 - 2.0 * eps)).clamp(0.0, 2.0)
}

fn content_key(t: &Tensor) -> (usize, u64) {
    // Deterministic total order on tensor contents.
    let mut h: u64 = 0xcbf29ce484222325;
    for v in t.data() {
        h ^= v.to_bits();
        h = h.wrapping_mul(0x100000001b3);
    }
    (t.numel(), h)
}

fn concat_rows(a: &Tensor, b: &Tensor) -> Tensor {
    let dim = a.shape()[1];
    let mut data = Vec::with_capacity((a.shape()[0] + b.shape()[0]) * dim);
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    Tensor::from_vec(&[a.shape()[0] + b.shape()[0], dim], data).unwrap()
}

/// Train a stand-alone classifier on labeled samples (plain supervised
/// cross-entropy, Adam, seeded shuffling). Used for source-only
/// baselines and the target-domain flip oracle.
#[allow(clippy::too_many_arguments)]
pub fn train_classifier(
    samples: &Tensor,
    labels: &[usize],
    classes: usize,
    kind: DataKind,
    net: NetConfig,
    epochs: usize,
    batch: usize,
    seed: u64,
) -> EvalResult<Classifier> {
    let n = samples.shape()[0];
    if n == 0 || labels.len() != n {
        return Err(EvalError::BadInput("train_classifier: bad inputs".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "classifier/init"));
    let mut clf = Classifier::new(kind, classes, net, &mut rng);
    let mut adam = AdamState::with_defaults(clf.params());
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "classifier/shuffle"));
    let batch = batch.clamp(1, n);
    for _ in 0..epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(batch) {
            let x = samples.gather_rows(chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let grads = {
                let tape = Tape::new();
                let xv = tape.constant(x);
                let bound = clf.bind(&tape, true);
                let logits = bound.forward(xv).map_err(TrainError::in_term("classifier"))?;
                let loss = classifier_ce(&tape, logits, &y).map_err(TrainError::in_term("classifier"))?;
                tape.backward(loss).map_err(TrainError::in_term("classifier"))?;
                bound.grads()
            };
            adam.step(clf.params_mut(), &grads, 1e-3).map_err(TrainError::from)?;
        }
    }
    Ok(clf)
}

/// Fraction of `samples` whose classifier argmax matches `labels`.
pub fn classifier_accuracy(clf: &Classifier, samples: &Tensor, labels: &[usize]) -> EvalResult<f64> {
    let pred = clf.predict(samples).map_err(TrainError::in_term("classifier"))?;
    let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len().max(1) as f64)
}

/// Train the evaluation-only oracle: a classifier fitted on the target
/// domain with its true labels (outside the adaptation protocol).
pub fn train_target_oracle(pair: &DomainPair, net: NetConfig, seed: u64) -> EvalResult<Classifier> {
    let kind = crate::train::data_kind_of(pair)?;
    let labels: Vec<usize> = pair.target.reveal_for_eval().iter().map(|&l| l as usize).collect();
    train_classifier(&pair.target.samples, &labels, pair.classes, kind, net, 20, 64, derive_seed(seed, "oracle"))
}

/// Fraction of source samples whose translation G_t(x_s) lands in a
/// different oracle class than the source label. The oracle must score
/// at least 0.9 on clean target data, otherwise it is rejected.
pub fn label_flip_rate(state: &TrainState, pair: &DomainPair, oracle: &Classifier) -> EvalResult<f64> {
    let target_labels: Vec<usize> = pair.target.reveal_for_eval().iter().map(|&l| l as usize).collect();
    let oracle_acc = classifier_accuracy(oracle, &pair.target.samples, &target_labels)?;
    if oracle_acc < 0.9 {
        return Err(EvalError::OracleUnusable { accuracy: oracle_acc });
    }
    let translated = state.translate_to_target(&pair.source.samples)?;
    let pred = oracle.predict(&translated).map_err(TrainError::in_term("label_flip"))?;
    let flips = pred
        .iter()
        .zip(&pair.source.labels)
        .filter(|(p, &l)| **p != l as usize)
        .count();
    Ok(flips as f64 / pair.source.labels.len().max(1) as f64)
}

fn flatten(t: &Tensor) -> Tensor {
    let n = t.shape()[0];
    let d: usize = t.shape()[1..].iter().product();
    t.reshaped(&[n, d]).unwrap()
}

/// The full metric set for one trained state: target accuracy (overall
/// and per class), proxy A-distance before adaptation (raw source vs
/// target) and after (translated source vs target), and the oracle
/// label-flip rate.
pub fn compute_metrics(state: &TrainState, pair: &DomainPair, seed: u64) -> EvalResult<Metrics> {
    let (target_acc, per_class) = target_accuracy_detailed(state, pair)?;
    let src = flatten(&pair.source.samples);
    let tgt = flatten(&pair.target.samples);
    let translated = flatten(&state.translate_to_target(&pair.source.samples)?);
    let a_before = proxy_a_distance(&src, &tgt, derive_seed(seed, "adist/before"))?;
    let a_after = proxy_a_distance(&translated, &tgt, derive_seed(seed, "adist/after"))?;
    let oracle = train_target_oracle(pair, state.g_s.cfg, seed)?;
    let flip = label_flip_rate(state, pair, &oracle)?;
    Ok(Metrics {
        target_accuracy: target_acc,
        a_distance_before: a_before,
        a_distance_after: a_after,
        label_flip_rate: flip,
        per_class_accuracy: per_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a_distance_endpoint_values() {
        assert_eq!(a_distance_from_error(0.5), 0.0);
        assert_eq!(a_distance_from_error(0.0), 2.0);
        // Worse-than-chance classifiers clamp to 0.
        assert_eq!(a_distance_from_error(0.9), 0.0);
    }

    #[test]
    fn a_distance_rejects_small_sides() {
        let a = Tensor::zeros(&[10, 4]);
        let b = Tensor::zeros(&[30, 4]);
        assert!(matches!(proxy_a_distance(&a, &b, 0), Err(EvalError::TooFewSamples { .. })));
    }

    #[test]
    fn a_distance_is_symmetric_exactly() {
        let mut a = Tensor::zeros(&[24, 3]);
        let mut b = Tensor::zeros(&[24, 3]);
        for (i, v) in a.data_mut().iter_mut().enumerate() {
            *v = (i as f64 * 0.37).sin();
        }
        for (i, v) in b.data_mut().iter_mut().enumerate() {
            *v = (i as f64 * 0.11).cos() + 1.5;
        }
        let ab = proxy_a_distance(&a, &b, 7).unwrap();
        let ba = proxy_a_distance(&b, &a, 7).unwrap();
        assert_eq!(ab.to_bits(), ba.to_bits());
    }

    #[test]
    fn identical_feature_sets_have_low_self_distance() {
        let mut a = Tensor::zeros(&[60, 5]);
        for (i, v) in a.data_mut().iter_mut().enumerate() {
            *v = ((i * 31 + 7) % 23) as f64 / 23.0;
        }
        // Same underlying distribution, disjoint shuffled halves.
        let idx_a: Vec<usize> = (0..60).step_by(2).collect();
        let idx_b: Vec<usize> = (1..60).step_by(2).collect();
        let fa = a.gather_rows(&idx_a);
        let fb = a.gather_rows(&idx_b);
        let mut worst = f64::NEG_INFINITY;
        for seed in 0..5 {
            worst = worst.max(proxy_a_distance(&fa, &fb, seed).unwrap());
        }
        assert!(worst <= 0.6, "self distance {worst}");
    }
}
