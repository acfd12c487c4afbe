//! Deterministic synthetic cross-domain datasets: a labeled source domain
//! and a target domain whose true labels are hidden from training and
//! reserved for evaluation (audited access only).

mod glyph;
mod io;

pub use glyph::GlyphStyle;
pub use io::{load_dataset, save_dataset, DatasetIoError};

use std::sync::atomic::{AtomicU64, Ordering};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Tensor;
use crate::util::derive_seed;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{0}")]
    BadInput(String),
}

pub type DataResult<T> = Result<T, DataError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Gaussian,
    Glyph,
}

/// The labeled half of a pair.
#[derive(Clone, Debug)]
pub struct LabeledDomain {
    pub samples: Tensor,
    pub labels: Vec<u16>,
}

/// The unlabeled half. True labels exist for evaluation only; every read
/// goes through [`HiddenDomain::reveal_for_eval`] and bumps an audit
/// counter, so tests can assert that no training-path operation ever
/// touched them.
#[derive(Debug)]
pub struct HiddenDomain {
    pub samples: Tensor,
    hidden_labels: Vec<u16>,
    audit: AtomicU64,
}

impl HiddenDomain {
    pub(crate) fn new(samples: Tensor, hidden_labels: Vec<u16>) -> Self {
        HiddenDomain { samples, hidden_labels, audit: AtomicU64::new(0) }
    }

    /// Audited accessor; callable only from inside this crate (the eval
    /// module). Each call increments [`HiddenDomain::audit_count`].
    pub(crate) fn reveal_for_eval(&self) -> &[u16] {
        self.audit.fetch_add(1, Ordering::Relaxed);
        &self.hidden_labels
    }

    /// How many times the hidden labels have been revealed.
    pub fn audit_count(&self) -> u64 {
        self.audit.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.hidden_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hidden_labels.is_empty()
    }
}

/// A source/target dataset pair drawn from one synthetic generator.
#[derive(Debug)]
pub struct DomainPair {
    pub kind: DatasetKind,
    pub classes: usize,
    pub seed: u64,
    pub source: LabeledDomain,
    pub target: HiddenDomain,
}

impl DomainPair {
    /// Sample tensor shape shared by both domains, without the batch axis.
    pub fn sample_shape(&self) -> Vec<usize> {
        self.source.samples.shape()[1..].to_vec()
    }
}

/// Rigid-plus-scale map applied to the target domain's class layout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainShift {
    pub rotation: f64,
    pub translation: (f64, f64),
    pub scale: f64,
}

impl DomainShift {
    pub fn identity() -> Self {
        DomainShift { rotation: 0.0, translation: (0.0, 0.0), scale: 1.0 }
    }
}

/// Radius of the circle the class means sit on.
const BLOB_RADIUS: f64 = 0.55;

/// Per-class noise scale: class k gets `noise_sd * (0.5 + k / (C - 1))`,
/// a shape fingerprint that survives any rigid transform and keeps the
/// class-to-blob assignment identifiable from unlabeled data.
fn class_sd(noise_sd: f64, class: usize, classes: usize) -> f64 {
    noise_sd * (0.5 + class as f64 / (classes - 1) as f64)
}

/// 2-D Gaussian blobs on a circle; the target domain is the source layout
/// mapped by `shift` with fresh per-class noise. Class geometry is
/// preserved: target class i is the image of source class i.
pub fn gen_gaussian_pair(
    classes: usize,
    n_per_class: usize,
    shift: DomainShift,
    noise_sd: f64,
    seed: u64,
) -> DataResult<DomainPair> {
    if classes < 2 {
        return Err(DataError::BadInput(format!("gen_gaussian_pair: need >= 2 classes, got {classes}")));
    }
    if n_per_class < 4 {
        return Err(DataError::BadInput(format!("gen_gaussian_pair: need >= 4 per class, got {n_per_class}")));
    }
    if shift.scale <= 0.0 {
        return Err(DataError::BadInput(format!("gen_gaussian_pair: degenerate scale {}", shift.scale)));
    }
    if noise_sd < 0.0 {
        return Err(DataError::BadInput("gen_gaussian_pair: negative noise_sd".into()));
    }

    let means: Vec<(f64, f64)> = (0..classes)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / classes as f64;
            (BLOB_RADIUS * a.cos(), BLOB_RADIUS * a.sin())
        })
        .collect();
    let (sin_r, cos_r) = shift.rotation.sin_cos();
    let mapped: Vec<(f64, f64)> = means
        .iter()
        .map(|&(x, y)| {
            let (rx, ry) = (cos_r * x - sin_r * y, sin_r * x + cos_r * y);
            (shift.scale * rx + shift.translation.0, shift.scale * ry + shift.translation.1)
        })
        .collect();

    let n = classes * n_per_class;
    let draw = |centers: &[(f64, f64)], rng: &mut ChaCha8Rng| -> (Tensor, Vec<u16>) {
        let mut data = Vec::with_capacity(n * 2);
        let mut labels = Vec::with_capacity(n);
        for (k, &(cx, cy)) in centers.iter().enumerate() {
            let normal = Normal::new(0.0, class_sd(noise_sd, k, classes).max(f64::MIN_POSITIVE)).unwrap();
            for _ in 0..n_per_class {
                let dx: f64 = if noise_sd > 0.0 { normal.sample(rng) } else { 0.0 };
                let dy: f64 = if noise_sd > 0.0 { normal.sample(rng) } else { 0.0 };
                data.push((cx + dx).clamp(-1.0, 1.0));
                data.push((cy + dy).clamp(-1.0, 1.0));
                labels.push(k as u16);
            }
        }
        (Tensor::from_vec(&[n, 2], data).unwrap(), labels)
    };

    let mut rng_s = ChaCha8Rng::seed_from_u64(derive_seed(seed, "gaussian/source"));
    let (src_samples, src_labels) = draw(&means, &mut rng_s);
    let mut rng_t = ChaCha8Rng::seed_from_u64(derive_seed(seed, "gaussian/target"));
    let (tgt_samples, tgt_labels) = draw(&mapped, &mut rng_t);

    Ok(DomainPair {
        kind: DatasetKind::Gaussian,
        classes,
        seed,
        source: LabeledDomain { samples: src_samples, labels: src_labels },
        target: HiddenDomain::new(tgt_samples, tgt_labels),
    })
}

/// Procedural 16x16 digit glyphs under two rendering styles.
pub fn gen_glyph_pair(
    classes: usize,
    n_per_class: usize,
    style_s: &GlyphStyle,
    style_t: &GlyphStyle,
    seed: u64,
) -> DataResult<DomainPair> {
    if !(2..=10).contains(&classes) {
        return Err(DataError::BadInput(format!("gen_glyph_pair: classes must be in [2, 10], got {classes}")));
    }
    if n_per_class == 0 {
        return Err(DataError::BadInput("gen_glyph_pair: empty classes".into()));
    }
    style_s.validate()?;
    style_t.validate()?;

    let n = classes * n_per_class;
    let draw = |style: &GlyphStyle, rng: &mut ChaCha8Rng| -> (Tensor, Vec<u16>) {
        let mut data = Vec::with_capacity(n * 256);
        let mut labels = Vec::with_capacity(n);
        for digit in 0..classes {
            for _ in 0..n_per_class {
                data.extend_from_slice(&glyph::render(digit, style, rng));
                labels.push(digit as u16);
            }
        }
        (Tensor::from_vec(&[n, 1, 16, 16], data).unwrap(), labels)
    };

    let mut rng_s = ChaCha8Rng::seed_from_u64(derive_seed(seed, "glyph/source"));
    let (src_samples, src_labels) = draw(style_s, &mut rng_s);
    let mut rng_t = ChaCha8Rng::seed_from_u64(derive_seed(seed, "glyph/target"));
    let (tgt_samples, tgt_labels) = draw(style_t, &mut rng_t);

    Ok(DomainPair {
        kind: DatasetKind::Glyph,
        classes,
        seed,
        source: LabeledDomain { samples: src_samples, labels: src_labels },
        target: HiddenDomain::new(tgt_samples, tgt_labels),
    })
}

/// Unpaired batch stream. An epoch is one shuffled pass over the source
/// domain (every source sample exactly once; the final batch may be
/// short); target batches of matching size are drawn from an independent
/// shuffled stream that reshuffles whenever it runs out.
pub struct BatchSampler {
    batch: usize,
    rng: ChaCha8Rng,
    order_s: Vec<usize>,
    order_t: Vec<usize>,
    cursor_s: usize,
    cursor_t: usize,
}

/// One unpaired step: a labeled source batch and an unlabeled target batch.
pub struct BatchPair {
    pub source: Tensor,
    pub source_labels: Vec<usize>,
    pub target: Tensor,
}

impl BatchSampler {
    pub fn new(pair: &DomainPair, batch: usize, seed: u64) -> DataResult<Self> {
        let ns = pair.source.labels.len();
        let nt = pair.target.len();
        if batch == 0 || batch > ns.min(nt) {
            return Err(DataError::BadInput(format!(
                "batch_sampler: batch {batch} outside [1, min({ns}, {nt})]"
            )));
        }
        let mut s = BatchSampler {
            batch,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, "sampler")),
            order_s: (0..ns).collect(),
            order_t: (0..nt).collect(),
            cursor_s: 0,
            cursor_t: 0,
        };
        s.order_s.shuffle(&mut s.rng);
        s.order_t.shuffle(&mut s.rng);
        Ok(s)
    }

    /// Batches in one epoch: `ceil(n_source / batch)`.
    pub fn batches_per_epoch(&self) -> usize {
        self.order_s.len().div_ceil(self.batch)
    }

    pub fn next_batch(&mut self, pair: &DomainPair) -> BatchPair {
        if self.cursor_s >= self.order_s.len() {
            self.order_s.shuffle(&mut self.rng);
            self.cursor_s = 0;
        }
        let take = self.batch.min(self.order_s.len() - self.cursor_s);
        let idx_s = &self.order_s[self.cursor_s..self.cursor_s + take];
        self.cursor_s += take;

        if self.cursor_t + take > self.order_t.len() {
            self.order_t.shuffle(&mut self.rng);
            self.cursor_t = 0;
        }
        let idx_t = &self.order_t[self.cursor_t..self.cursor_t + take];
        self.cursor_t += take;

        BatchPair {
            source: pair.source.samples.gather_rows(idx_s),
            source_labels: idx_s.iter().map(|&i| pair.source.labels[i] as usize).collect(),
            target: pair.target.samples.gather_rows(idx_t),
        }
    }
}

/// Uniform jitter helper shared by the generators.
pub(crate) fn jitter_px(rng: &mut ChaCha8Rng) -> i32 {
    rng.random_range(-1..=1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_identity_shift_zero_noise_coincides_classwise() {
        let pair = gen_gaussian_pair(3, 4, DomainShift::identity(), 0.0, 9).unwrap();
        assert_eq!(pair.source.samples.data(), pair.target.samples.data());
        assert_eq!(pair.source.labels, pair.target.reveal_for_eval());
    }

    #[test]
    fn gaussian_rotation_pi_two_classes_swaps_blob_positions() {
        let pair = gen_gaussian_pair(
            2,
            8,
            DomainShift { rotation: std::f64::consts::PI, translation: (0.0, 0.0), scale: 1.0 },
            0.0,
            3,
        )
        .unwrap();
        // Noise-free: target class 0 sits exactly where source class 1 does.
        let s = pair.source.samples.data();
        let t = pair.target.samples.data();
        let n_half = 8 * 2;
        for i in 0..n_half {
            assert!((t[i] - s[n_half + i]).abs() < 1e-12);
            assert!((t[n_half + i] - s[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_is_pure_in_seed() {
        let mk = || gen_gaussian_pair(4, 5, DomainShift::identity(), 0.1, 42).unwrap();
        let (a, b) = (mk(), mk());
        assert_eq!(a.source.samples.data(), b.source.samples.data());
        assert_eq!(a.target.samples.data(), b.target.samples.data());
    }

    #[test]
    fn gaussian_rejects_degenerate_inputs() {
        let shift = DomainShift { scale: 0.0, ..DomainShift::identity() };
        assert!(gen_gaussian_pair(2, 4, shift, 0.1, 0).is_err());
        assert!(gen_gaussian_pair(1, 4, DomainShift::identity(), 0.1, 0).is_err());
        assert!(gen_gaussian_pair(2, 3, DomainShift::identity(), 0.1, 0).is_err());
    }

    #[test]
    fn glyph_shapes_and_range() {
        let st = GlyphStyle::default();
        let pair = gen_glyph_pair(10, 3, &st, &st.clone().with_invert(true), 5).unwrap();
        assert_eq!(pair.source.samples.shape(), &[30, 1, 16, 16]);
        assert_eq!(pair.target.samples.shape(), &[30, 1, 16, 16]);
        assert!(pair.source.samples.data().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn glyph_invert_flips_pixel_mean() {
        let st = GlyphStyle { noise_sd: 0.05, ..GlyphStyle::default() };
        let pair = gen_glyph_pair(10, 20, &st, &st.clone().with_invert(true), 11).unwrap();
        let mean = |t: &Tensor| t.data().iter().sum::<f64>() / t.numel() as f64;
        let (ms, mt) = (mean(&pair.source.samples), mean(&pair.target.samples));
        assert!((ms + mt).abs() < 0.1, "{ms} vs {mt}");
    }

    #[test]
    fn glyph_rejects_too_many_classes() {
        let st = GlyphStyle::default();
        assert!(gen_glyph_pair(11, 2, &st, &st, 0).is_err());
    }

    #[test]
    fn class_priors_equal_within_domains() {
        let pair = gen_gaussian_pair(5, 7, DomainShift::identity(), 0.1, 1).unwrap();
        for k in 0..5u16 {
            assert_eq!(pair.source.labels.iter().filter(|&&l| l == k).count(), 7);
            assert_eq!(pair.target.reveal_for_eval().iter().filter(|&&l| l == k).count(), 7);
        }
    }

    #[test]
    fn sampler_epoch_covers_source_exactly_once() {
        let pair = gen_gaussian_pair(2, 10, DomainShift::identity(), 0.1, 2).unwrap();
        let mut sampler = BatchSampler::new(&pair, 6, 0).unwrap();
        assert_eq!(sampler.batches_per_epoch(), 4); // 20 = 6 + 6 + 6 + 2
        let mut seen = vec![0usize; 20];
        for _ in 0..sampler.batches_per_epoch() {
            let b = sampler.next_batch(&pair);
            for i in 0..b.source_labels.len() {
                let row = b.source.row(i);
                let idx = pair.source.samples.data().chunks(2).position(|c| c == row).unwrap();
                seen[idx] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1), "{seen:?}");
    }

    #[test]
    fn sampler_is_reproducible() {
        let pair = gen_gaussian_pair(2, 10, DomainShift::identity(), 0.1, 2).unwrap();
        let run = || {
            let mut s = BatchSampler::new(&pair, 4, 7).unwrap();
            (0..6).map(|_| s.next_batch(&pair).source_labels).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn sampler_rejects_oversized_batch() {
        let pair = gen_gaussian_pair(2, 4, DomainShift::identity(), 0.1, 2).unwrap();
        assert!(BatchSampler::new(&pair, 9, 0).is_err());
    }

    #[test]
    fn audit_counter_counts_reveals() {
        let pair = gen_gaussian_pair(2, 4, DomainShift::identity(), 0.1, 2).unwrap();
        assert_eq!(pair.target.audit_count(), 0);
        let _ = pair.target.reveal_for_eval();
        let _ = pair.target.reveal_for_eval();
        assert_eq!(pair.target.audit_count(), 2);
    }
}
