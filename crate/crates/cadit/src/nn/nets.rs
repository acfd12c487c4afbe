use rand_chacha::ChaCha8Rng;

use crate::autodiff::{AdResult, Tape, Tensor, Var};

use super::init::xavier_uniform;
use super::{NnError, NnResult};

/// LeakyReLU slope used by every hidden activation.
pub const LEAKY_SLOPE: f64 = 0.2;

/// Kernel size of the stride-2 convolutions (padding 1, halving).
pub(crate) const K_CONV: usize = 3;
/// Kernel size of the stride-2 transposed convolutions (padding 0, doubling).
pub(crate) const K_DECONV: usize = 2;

/// Whether a network operates on NCHW images or flat feature vectors.
/// The vector path replaces each convolution with a fully-connected layer
/// of the same depth.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataKind {
    /// Single-channel square images with sides divisible by 4.
    Image { side: usize },
    /// Rank-2 batches of `dim`-dimensional vectors.
    Vector { dim: usize },
}

/// Widths shared by all networks of one experiment.
#[derive(Clone, Copy, Debug)]
pub struct NetConfig {
    /// Channels after the first and second stride-2 convolutions.
    pub channels: (usize, usize),
    /// Trunk fully-connected width (the discriminator feature size).
    pub trunk_fc: usize,
    /// Hidden width of the vector-data path.
    pub vec_hidden: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig { channels: (4, 8), trunk_fc: 64, vec_hidden: 32 }
    }
}

fn named(params: &[Tensor], names: &[&'static str]) -> Vec<(String, Tensor)> {
    names.iter().zip(params).map(|(n, p)| (n.to_string(), p.clone())).collect()
}

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

const GEN_CONV_NAMES: [&str; 8] = [
    "enc1_w", "enc1_b", "enc2_w", "enc2_b", "dec1_w", "dec1_b", "dec2_w", "dec2_b",
];
const GEN_VEC_NAMES: [&str; 8] = ["fc1_w", "fc1_b", "fc2_w", "fc2_b", "fc3_w", "fc3_b", "fc4_w", "fc4_b"];

/// Translation network: two stride-2 convolutions down, two stride-2
/// transposed convolutions back up, LeakyReLU hidden activations and a
/// tanh output, so outputs keep the input shape and live in (-1, 1).
#[derive(Clone, Debug)]
pub struct Generator {
    pub kind: DataKind,
    pub cfg: NetConfig,
    params: Vec<Tensor>,
}

impl Generator {
    pub fn new(kind: DataKind, cfg: NetConfig, rng: &mut ChaCha8Rng) -> Self {
        let (c1, c2) = cfg.channels;
        let (k, kd) = (K_CONV, K_DECONV);
        let params = match kind {
            DataKind::Image { .. } => {
                let conv = |oc: usize, ic: usize, rng: &mut ChaCha8Rng| {
                    xavier_uniform(&[oc, ic, k, k], ic * k * k, oc * k * k, rng)
                };
                let deconv = |ic: usize, oc: usize, rng: &mut ChaCha8Rng| {
                    xavier_uniform(&[ic, oc, kd, kd], ic * kd * kd, oc * kd * kd, rng)
                };
                vec![
                    conv(c1, 1, rng),
                    Tensor::zeros(&[c1]),
                    conv(c2, c1, rng),
                    Tensor::zeros(&[c2]),
                    deconv(c2, c1, rng),
                    Tensor::zeros(&[c1]),
                    deconv(c1, 1, rng),
                    Tensor::zeros(&[1]),
                ]
            }
            DataKind::Vector { dim } => {
                let h = cfg.vec_hidden;
                let fc = |i: usize, o: usize, rng: &mut ChaCha8Rng| xavier_uniform(&[i, o], i, o, rng);
                vec![
                    fc(dim, h, rng),
                    Tensor::zeros(&[h]),
                    fc(h, h, rng),
                    Tensor::zeros(&[h]),
                    fc(h, h, rng),
                    Tensor::zeros(&[h]),
                    fc(h, dim, rng),
                    Tensor::zeros(&[dim]),
                ]
            }
        };
        Generator { kind, cfg, params }
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn named_params(&self) -> Vec<(String, Tensor)> {
        match self.kind {
            DataKind::Image { .. } => named(&self.params, &GEN_CONV_NAMES),
            DataKind::Vector { .. } => named(&self.params, &GEN_VEC_NAMES),
        }
    }

    pub fn set_params(&mut self, params: Vec<Tensor>) -> NnResult<()> {
        if params.len() != self.params.len()
            || params.iter().zip(&self.params).any(|(a, b)| a.shape() != b.shape())
        {
            return Err(NnError::BadInput("generator: checkpoint shapes do not match".into()));
        }
        self.params = params;
        Ok(())
    }

    /// Put the parameters on a tape. A trainable binding registers leaves
    /// (so one backward pass yields [`BoundGenerator::grads`]); a frozen
    /// binding registers constants.
    pub fn bind<'t>(&self, tape: &'t Tape, trainable: bool) -> BoundGenerator<'t> {
        let vars = self
            .params
            .iter()
            .map(|p| if trainable { tape.leaf(p.clone()) } else { tape.constant(p.clone()) })
            .collect();
        BoundGenerator { kind: self.kind, shapes: self.params.iter().map(|p| p.shape().to_vec()).collect(), vars }
    }
}

pub struct BoundGenerator<'t> {
    kind: DataKind,
    shapes: Vec<Vec<usize>>,
    vars: Vec<Var<'t>>,
}

impl<'t> BoundGenerator<'t> {
    pub fn forward(&self, x: Var<'t>) -> AdResult<Var<'t>> {
        let v = |i: usize| self.vars[i];
        match self.kind {
            DataKind::Image { .. } => {
                let shape = x.shape();
                if shape.len() != 4 || !shape[2].is_multiple_of(4) || !shape[3].is_multiple_of(4) {
                    return Err(crate::autodiff::AdError::BadShape {
                        op: "generator_forward",
                        shape,
                        reason: "want (n, c, h, w) with h, w divisible by 4".into(),
                    });
                }
                let h = x.conv2d(v(0), Some(v(1)), 2, 1)?.leaky_relu(LEAKY_SLOPE)?;
                let h = h.conv2d(v(2), Some(v(3)), 2, 1)?.leaky_relu(LEAKY_SLOPE)?;
                let h = h.conv2d_transpose(v(4), Some(v(5)), 2, 0)?.leaky_relu(LEAKY_SLOPE)?;
                h.conv2d_transpose(v(6), Some(v(7)), 2, 0)?.tanh()
            }
            DataKind::Vector { .. } => {
                let h = x.linear(v(0), v(1))?.leaky_relu(LEAKY_SLOPE)?;
                let h = h.linear(v(2), v(3))?.leaky_relu(LEAKY_SLOPE)?;
                let h = h.linear(v(4), v(5))?.leaky_relu(LEAKY_SLOPE)?;
                h.linear(v(6), v(7))?.tanh()
            }
        }
    }

    /// Gradients in parameter order, zeros where nothing flowed.
    pub fn grads(&self) -> Vec<Tensor> {
        self.vars
            .iter()
            .zip(&self.shapes)
            .map(|(v, s)| v.grad().unwrap_or_else(|| Tensor::zeros(s)))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Tri-head discriminator
// ---------------------------------------------------------------------------

const DISC_CONV_NAMES: [&str; 12] = [
    "t1_w", "t1_b", "t2_w", "t2_b", "fc_w", "fc_b", "d_w", "d_b", "j_w", "j_b", "c_w", "c_b",
];
const DISC_VEC_NAMES: [&str; 12] = [
    "t1_w", "t1_b", "t2_w", "t2_b", "fc_w", "fc_b", "d_w", "d_b", "j_w", "j_b", "c_w", "c_b",
];

/// Parameter slice boundary: everything before this index belongs to the
/// adversarial update group (trunk, D head, J head); the classifier head
/// C sits after it.
const CLS_SPLIT: usize = 10;

/// How a discriminator participates in the current tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Discriminate {
    /// Trunk + D + J trainable, classifier head frozen (discriminator phase).
    Adversary,
    /// Classifier head trainable, everything else frozen (generator phase).
    ClassifierHead,
    /// All parameters constant.
    Frozen,
}

/// Shared trunk (two stride-2 convolutions and one fully-connected layer,
/// LeakyReLU throughout) with three heads: D (real/fake score), C (class
/// logits), and J (joint authenticity of a sample and a label vector,
/// conditioned by concatenating the label to the trunk features).
#[derive(Clone, Debug)]
pub struct TriHeadDiscriminator {
    pub kind: DataKind,
    pub cfg: NetConfig,
    pub classes: usize,
    params: Vec<Tensor>,
}

impl TriHeadDiscriminator {
    pub fn new(kind: DataKind, classes: usize, cfg: NetConfig, rng: &mut ChaCha8Rng) -> Self {
        let (c1, c2) = cfg.channels;
        let f = cfg.trunk_fc;
        let k = K_CONV;
        let mut params = match kind {
            DataKind::Image { side } => {
                let flat = c2 * (side / 4) * (side / 4);
                vec![
                    xavier_uniform(&[c1, 1, k, k], k * k, c1 * k * k, rng),
                    Tensor::zeros(&[c1]),
                    xavier_uniform(&[c2, c1, k, k], c1 * k * k, c2 * k * k, rng),
                    Tensor::zeros(&[c2]),
                    xavier_uniform(&[flat, f], flat, f, rng),
                    Tensor::zeros(&[f]),
                ]
            }
            DataKind::Vector { dim } => {
                let h = cfg.vec_hidden;
                vec![
                    xavier_uniform(&[dim, h], dim, h, rng),
                    Tensor::zeros(&[h]),
                    xavier_uniform(&[h, h], h, h, rng),
                    Tensor::zeros(&[h]),
                    xavier_uniform(&[h, f], h, f, rng),
                    Tensor::zeros(&[f]),
                ]
            }
        };
        params.push(xavier_uniform(&[f, 1], f, 1, rng)); // d head
        params.push(Tensor::zeros(&[1]));
        params.push(xavier_uniform(&[f + classes, 1], f + classes, 1, rng)); // j head
        params.push(Tensor::zeros(&[1]));
        params.push(xavier_uniform(&[f, classes], f, classes, rng)); // c head
        params.push(Tensor::zeros(&[classes]));
        TriHeadDiscriminator { kind, cfg, classes, params }
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn named_params(&self) -> Vec<(String, Tensor)> {
        match self.kind {
            DataKind::Image { .. } => named(&self.params, &DISC_CONV_NAMES),
            DataKind::Vector { .. } => named(&self.params, &DISC_VEC_NAMES),
        }
    }

    pub fn set_params(&mut self, params: Vec<Tensor>) -> NnResult<()> {
        if params.len() != self.params.len()
            || params.iter().zip(&self.params).any(|(a, b)| a.shape() != b.shape())
        {
            return Err(NnError::BadInput("discriminator: checkpoint shapes do not match".into()));
        }
        self.params = params;
        Ok(())
    }

    /// Trunk + D + J parameters (the adversarial update group).
    pub fn adv_params(&self) -> &[Tensor] {
        &self.params[..CLS_SPLIT]
    }

    pub fn adv_params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params[..CLS_SPLIT]
    }

    /// Classifier-head parameters (updated in the generator phase).
    pub fn cls_params(&self) -> &[Tensor] {
        &self.params[CLS_SPLIT..]
    }

    pub fn cls_params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params[CLS_SPLIT..]
    }

    pub fn bind<'t>(&self, tape: &'t Tape, mode: Discriminate) -> BoundDiscriminator<'t> {
        let vars = self
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let trainable = match mode {
                    Discriminate::Adversary => i < CLS_SPLIT,
                    Discriminate::ClassifierHead => i >= CLS_SPLIT,
                    Discriminate::Frozen => false,
                };
                if trainable {
                    tape.leaf(p.clone())
                } else {
                    tape.constant(p.clone())
                }
            })
            .collect();
        BoundDiscriminator {
            kind: self.kind,
            classes: self.classes,
            shapes: self.params.iter().map(|p| p.shape().to_vec()).collect(),
            vars,
        }
    }
}

pub struct BoundDiscriminator<'t> {
    kind: DataKind,
    classes: usize,
    shapes: Vec<Vec<usize>>,
    vars: Vec<Var<'t>>,
}

impl<'t> BoundDiscriminator<'t> {
    /// Shared features, shape (n, trunk_fc).
    pub fn trunk(&self, x: Var<'t>) -> AdResult<Var<'t>> {
        let v = |i: usize| self.vars[i];
        match self.kind {
            DataKind::Image { .. } => {
                let s = x.shape();
                let h = x.conv2d(v(0), Some(v(1)), 2, 1)?.leaky_relu(LEAKY_SLOPE)?;
                let h = h.conv2d(v(2), Some(v(3)), 2, 1)?.leaky_relu(LEAKY_SLOPE)?;
                let hs = h.shape();
                let flat = hs[1] * hs[2] * hs[3];
                let h = h.reshape(&[s[0], flat])?;
                h.linear(v(4), v(5))?.leaky_relu(LEAKY_SLOPE)
            }
            DataKind::Vector { .. } => {
                let h = x.linear(v(0), v(1))?.leaky_relu(LEAKY_SLOPE)?;
                let h = h.linear(v(2), v(3))?.leaky_relu(LEAKY_SLOPE)?;
                h.linear(v(4), v(5))?.leaky_relu(LEAKY_SLOPE)
            }
        }
    }

    /// Real/fake score, shape (n, 1).
    pub fn d_score(&self, feat: Var<'t>) -> AdResult<Var<'t>> {
        feat.linear(self.vars[6], self.vars[7])
    }

    /// Class logits, shape (n, classes).
    pub fn c_logits(&self, feat: Var<'t>) -> AdResult<Var<'t>> {
        feat.linear(self.vars[10], self.vars[11])
    }

    /// Joint score of (sample, label) pairs; `label` rows are probability
    /// vectors of length `classes`, shape (n, 1) out.
    pub fn j_score(&self, feat: Var<'t>, label: Var<'t>) -> AdResult<Var<'t>> {
        feat.concat(label, 1)?.linear(self.vars[8], self.vars[9])
    }

    /// One trunk pass feeding all requested heads. `label` rows must be
    /// probability vectors (non-negative, summing to 1 within 1e-6); the
    /// joint score is present iff a label is supplied.
    pub fn discriminate(
        &self,
        x: Var<'t>,
        label: Option<Var<'t>>,
    ) -> NnResult<(Var<'t>, Var<'t>, Option<Var<'t>>)> {
        if let Some(l) = label {
            let t = l.value();
            if t.rank() != 2 || t.shape()[1] != self.classes {
                return Err(NnError::BadInput(format!(
                    "discriminate: label shape {:?}, want (n, {})",
                    t.shape(),
                    self.classes
                )));
            }
            for i in 0..t.shape()[0] {
                let row = t.row(i);
                let sum: f64 = row.iter().sum();
                if row.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-6 {
                    return Err(NnError::BadInput(format!(
                        "discriminate: label row {i} is not a probability vector (sum {sum})"
                    )));
                }
            }
        }
        let feat = self.trunk(x)?;
        let d = self.d_score(feat)?;
        let c = self.c_logits(feat)?;
        let j = label.map(|l| self.j_score(feat, l)).transpose()?;
        Ok((d, c, j))
    }

    pub fn adv_grads(&self) -> Vec<Tensor> {
        grads_by_shape(&self.vars[..CLS_SPLIT], &self.shapes[..CLS_SPLIT])
    }

    pub fn cls_grads(&self) -> Vec<Tensor> {
        grads_by_shape(&self.vars[CLS_SPLIT..], &self.shapes[CLS_SPLIT..])
    }
}

fn grads_by_shape(vars: &[Var<'_>], shapes: &[Vec<usize>]) -> Vec<Tensor> {
    vars.iter()
        .zip(shapes)
        .map(|(v, s)| v.grad().unwrap_or_else(|| Tensor::zeros(s)))
        .collect()
}

// ---------------------------------------------------------------------------
// Plain classifier (baselines, oracles)
// ---------------------------------------------------------------------------

const CLS_NAMES: [&str; 8] = ["l1_w", "l1_b", "l2_w", "l2_b", "fc_w", "fc_b", "out_w", "out_b"];

/// Stand-alone classifier with the same trunk shape as the discriminators,
/// used for source-only baselines and evaluation oracles. Not part of the
/// adversarial game.
#[derive(Clone, Debug)]
pub struct Classifier {
    pub kind: DataKind,
    pub cfg: NetConfig,
    pub classes: usize,
    params: Vec<Tensor>,
}

impl Classifier {
    pub fn new(kind: DataKind, classes: usize, cfg: NetConfig, rng: &mut ChaCha8Rng) -> Self {
        let (c1, c2) = cfg.channels;
        let f = cfg.trunk_fc;
        let k = K_CONV;
        let mut params = match kind {
            DataKind::Image { side } => {
                let flat = c2 * (side / 4) * (side / 4);
                vec![
                    xavier_uniform(&[c1, 1, k, k], k * k, c1 * k * k, rng),
                    Tensor::zeros(&[c1]),
                    xavier_uniform(&[c2, c1, k, k], c1 * k * k, c2 * k * k, rng),
                    Tensor::zeros(&[c2]),
                    xavier_uniform(&[flat, f], flat, f, rng),
                    Tensor::zeros(&[f]),
                ]
            }
            DataKind::Vector { dim } => {
                let h = cfg.vec_hidden;
                vec![
                    xavier_uniform(&[dim, h], dim, h, rng),
                    Tensor::zeros(&[h]),
                    xavier_uniform(&[h, h], h, h, rng),
                    Tensor::zeros(&[h]),
                    xavier_uniform(&[h, f], h, f, rng),
                    Tensor::zeros(&[f]),
                ]
            }
        };
        params.push(xavier_uniform(&[f, classes], f, classes, rng));
        params.push(Tensor::zeros(&[classes]));
        Classifier { kind, cfg, classes, params }
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn named_params(&self) -> Vec<(String, Tensor)> {
        named(&self.params, &CLS_NAMES)
    }

    pub fn bind<'t>(&self, tape: &'t Tape, trainable: bool) -> BoundClassifier<'t> {
        let vars = self
            .params
            .iter()
            .map(|p| if trainable { tape.leaf(p.clone()) } else { tape.constant(p.clone()) })
            .collect();
        BoundClassifier {
            kind: self.kind,
            shapes: self.params.iter().map(|p| p.shape().to_vec()).collect(),
            vars,
        }
    }

    /// Hard predictions on a plain batch (no tape kept).
    pub fn predict(&self, batch: &Tensor) -> AdResult<Vec<usize>> {
        let tape = Tape::new();
        let x = tape.constant(batch.clone());
        let logits = self.bind(&tape, false).forward(x)?;
        Ok(logits.value().argmax_rows())
    }
}

pub struct BoundClassifier<'t> {
    kind: DataKind,
    shapes: Vec<Vec<usize>>,
    vars: Vec<Var<'t>>,
}

impl<'t> BoundClassifier<'t> {
    /// Class logits, shape (n, classes).
    pub fn forward(&self, x: Var<'t>) -> AdResult<Var<'t>> {
        let v = |i: usize| self.vars[i];
        let feat = match self.kind {
            DataKind::Image { .. } => {
                let s = x.shape();
                let h = x.conv2d(v(0), Some(v(1)), 2, 1)?.leaky_relu(LEAKY_SLOPE)?;
                let h = h.conv2d(v(2), Some(v(3)), 2, 1)?.leaky_relu(LEAKY_SLOPE)?;
                let hs = h.shape();
                let h = h.reshape(&[s[0], hs[1] * hs[2] * hs[3]])?;
                h.linear(v(4), v(5))?.leaky_relu(LEAKY_SLOPE)?
            }
            DataKind::Vector { .. } => {
                let h = x.linear(v(0), v(1))?.leaky_relu(LEAKY_SLOPE)?;
                let h = h.linear(v(2), v(3))?.leaky_relu(LEAKY_SLOPE)?;
                h.linear(v(4), v(5))?.leaky_relu(LEAKY_SLOPE)?
            }
        };
        feat.linear(v(6), v(7))
    }

    pub fn grads(&self) -> Vec<Tensor> {
        self.vars
            .iter()
            .zip(&self.shapes)
            .map(|(v, s)| v.grad().unwrap_or_else(|| Tensor::zeros(s)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    /// Closed-form parameter counts with 3x3 stride-2 convolutions and
    /// 2x2 stride-2 transposed convolutions:
    /// generator (image): (9*c1 + c1) + (9*c1*c2 + c2) + (4*c2*c1 + c1)
    ///   + (4*c1 + 1)
    /// discriminator (image, side s, fc F): trunk (9*c1 + c1)
    ///   + (9*c1*c2 + c2) + (c2*(s/4)^2*F + F), heads (F + 1)
    ///   + ((F + C) + 1) + (F*C + C).
    #[test]
    fn parameter_counts_match_closed_form() {
        let cfg = NetConfig { channels: (4, 8), trunk_fc: 64, vec_hidden: 32 };
        let g = Generator::new(DataKind::Image { side: 16 }, cfg, &mut rng());
        let (c1, c2) = (4usize, 8usize);
        let expect_g = (c1 * 9 + c1) + (c2 * c1 * 9 + c2) + (c2 * c1 * 4 + c1) + (c1 * 4 + 1);
        assert_eq!(g.param_count(), expect_g);

        let d = TriHeadDiscriminator::new(DataKind::Image { side: 16 }, 10, cfg, &mut rng());
        let (f, c) = (64usize, 10usize);
        let flat = c2 * 4 * 4;
        let expect_d = (c1 * 9 + c1)
            + (c2 * c1 * 9 + c2)
            + (flat * f + f)
            + (f + 1)
            + ((f + c) + 1)
            + (f * c + c);
        assert_eq!(d.param_count(), expect_d);
    }

    #[test]
    fn generator_preserves_shape_and_range() {
        let g = Generator::new(DataKind::Image { side: 16 }, NetConfig::default(), &mut rng());
        let tape = Tape::new();
        let x = tape.constant(Tensor::filled(&[3, 1, 16, 16], 0.5));
        let y = g.bind(&tape, false).forward(x).unwrap();
        assert_eq!(y.shape(), vec![3, 1, 16, 16]);
        assert!(y.value().data().iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn generator_rejects_indivisible_sides() {
        let g = Generator::new(DataKind::Image { side: 16 }, NetConfig::default(), &mut rng());
        let tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[1, 1, 15, 15]));
        assert!(g.bind(&tape, false).forward(x).is_err());
    }

    #[test]
    fn zeroed_output_layer_maps_everything_to_zero() {
        let mut g = Generator::new(DataKind::Image { side: 16 }, NetConfig::default(), &mut rng());
        let n = g.params().len();
        g.params_mut()[n - 2] = Tensor::zeros(&[4, 1, 2, 2]);
        g.params_mut()[n - 1] = Tensor::zeros(&[1]);
        let tape = Tape::new();
        let x = tape.constant(Tensor::filled(&[2, 1, 16, 16], 0.3));
        let y = g.bind(&tape, false).forward(x).unwrap();
        assert!(y.value().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn discriminate_shapes_and_optional_joint_head() {
        let d = TriHeadDiscriminator::new(DataKind::Image { side: 16 }, 10, NetConfig::default(), &mut rng());
        let tape = Tape::new();
        let x = tape.constant(Tensor::filled(&[5, 1, 16, 16], 0.1));
        let (ds, cl, js) = d.bind(&tape, Discriminate::Frozen).discriminate(x, None).unwrap();
        assert_eq!(ds.shape(), vec![5, 1]);
        assert_eq!(cl.shape(), vec![5, 10]);
        assert!(js.is_none());

        // One-hot labels are valid probability vectors.
        let mut onehot = Tensor::zeros(&[5, 10]);
        for i in 0..5 {
            onehot.data_mut()[i * 10 + i] = 1.0;
        }
        let l = tape.constant(onehot);
        let (_, _, js) = d.bind(&tape, Discriminate::Frozen).discriminate(x, Some(l)).unwrap();
        assert_eq!(js.unwrap().shape(), vec![5, 1]);
    }

    #[test]
    fn discriminate_rejects_non_probability_labels() {
        let d = TriHeadDiscriminator::new(DataKind::Image { side: 16 }, 3, NetConfig::default(), &mut rng());
        let tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[1, 1, 16, 16]));
        let l = tape.constant(Tensor::from_vec(&[1, 3], vec![0.5, 0.2, 0.1]).unwrap());
        assert!(d.bind(&tape, Discriminate::Frozen).discriminate(x, Some(l)).is_err());
    }

    #[test]
    fn forwards_are_deterministic() {
        let g = Generator::new(DataKind::Vector { dim: 2 }, NetConfig::default(), &mut rng());
        let x0 = Tensor::from_vec(&[4, 2], vec![0.1, -0.2, 0.3, 0.9, -0.5, 0.0, 0.7, 0.7]).unwrap();
        let run = || {
            let tape = Tape::new();
            let x = tape.constant(x0.clone());
            g.bind(&tape, false).forward(x).unwrap().value()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn phase_binding_controls_which_grads_flow() {
        let d = TriHeadDiscriminator::new(DataKind::Vector { dim: 2 }, 3, NetConfig::default(), &mut rng());
        let tape = Tape::new();
        let bound = d.bind(&tape, Discriminate::Adversary);
        let x = tape.constant(Tensor::from_vec(&[2, 2], vec![0.5, -0.5, 0.1, 0.9]).unwrap());
        let feat = bound.trunk(x).unwrap();
        let loss = bound.d_score(feat).unwrap().square().unwrap().mean().unwrap();
        tape.backward(loss).unwrap();
        assert!(bound.adv_grads()[0].data().iter().any(|&g| g != 0.0));
        assert!(bound.cls_grads().iter().all(|g| g.data().iter().all(|&v| v == 0.0)));
    }
}
