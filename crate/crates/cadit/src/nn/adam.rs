use crate::autodiff::Tensor;

use super::{NnError, NnResult};

/// Adam with bias correction. One state owns the moments of one update
/// group; the step counter advances on every call, including zero-lr calls.
#[derive(Clone, Debug)]
pub struct AdamState {
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

/// First-moment decay used throughout training.
pub const ADAM_BETA1: f64 = 0.5;
/// Second-moment decay used throughout training.
pub const ADAM_BETA2: f64 = 0.999;

impl AdamState {
    pub fn new(params: &[Tensor], beta1: f64, beta2: f64, eps: f64) -> Self {
        AdamState {
            beta1,
            beta2,
            eps,
            t: 0,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }

    /// Defaults from the training recipe: beta1 = 0.5, beta2 = 0.999.
    pub fn with_defaults(params: &[Tensor]) -> Self {
        Self::new(params, ADAM_BETA1, ADAM_BETA2, 1e-8)
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// In-place update `p -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor], lr: f64) -> NnResult<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NnError::AdamShape { index: usize::MAX });
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.m[i].shape() {
                return Err(NnError::AdamShape { index: i });
            }
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i].data();
            let m = self.m[i].data_mut();
            for (mj, gj) in m.iter_mut().zip(g) {
                *mj = self.beta1 * *mj + (1.0 - self.beta1) * gj;
            }
            let v = self.v[i].data_mut();
            for (vj, gj) in v.iter_mut().zip(g) {
                *vj = self.beta2 * *vj + (1.0 - self.beta2) * gj * gj;
            }
            let p = params[i].data_mut();
            #[allow(clippy::needless_range_loop)]
            for j in 0..p.len() {
                let m_hat = self.m[i].data()[j] / c1;
                let v_hat = self.v[i].data()[j] / c2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
