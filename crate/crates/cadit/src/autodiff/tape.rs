use std::cell::RefCell;

use super::kernels::{self, ConvGeom};
use super::tensor::{AdError, AdResult, Tensor};

/// One recorded primitive. Inputs are node ids; attributes ride along.
#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    SMul(usize, f64),
    SAdd(usize),
    MatMul(usize, usize),
    Linear { x: usize, w: usize, b: usize },
    Conv2d { x: usize, w: usize, b: Option<usize>, stride: usize, pad: usize },
    ConvT2d { x: usize, w: usize, b: Option<usize>, stride: usize, pad: usize },
    Relu(usize),
    LeakyRelu(usize, f64),
    Tanh(usize),
    Sigmoid(usize),
    Softmax(usize),
    Log(usize),
    Exp(usize),
    Abs(usize),
    Square(usize),
    Sqrt(usize),
    ReduceSum(usize),
    ReduceMean(usize),
    Concat { a: usize, b: usize, axis: usize },
    Reshape(usize),
    PairwiseSqDist(usize),
}

struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

struct Inner {
    nodes: Vec<Node>,
    armed: bool,
}

/// Wengert tape: records primitives in execution order during the forward
/// pass and replays them in reverse to accumulate gradients.
///
/// A tape is confined to a single thread (it is deliberately `!Sync`); one
/// training step owns one tape.
pub struct Tape {
    inner: RefCell<Inner>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Handle to a tensor recorded on a tape. Copyable; all arithmetic goes
/// through methods that record onto the owning tape.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var").field("id", &self.id).field("shape", &self.shape()).finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { inner: RefCell::new(Inner { nodes: Vec::new(), armed: true }) }
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Register a differentiable leaf (a parameter or input to optimize).
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(Op::Leaf, value, true)
    }

    /// Register a constant; no gradient ever flows into it.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(Op::Leaf, value, false)
    }

    pub fn scalar(&self, v: f64) -> Var<'_> {
        self.constant(Tensor::scalar(v))
    }

    fn push(&self, op: Op, value: Tensor, requires_grad: bool) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        inner.nodes.push(Node { op, value, requires_grad, grad: None });
        Var { tape: self, id: inner.nodes.len() - 1 }
    }

    fn record(&self, name: &'static str, op: Op, value: Tensor, requires_grad: bool) -> AdResult<Var<'_>> {
        if !value.is_finite() {
            return Err(AdError::NonFinite { op: name });
        }
        Ok(self.push(op, value, requires_grad))
    }

    /// Reverse sweep from a scalar loss; fills `grad` on every
    /// requires-grad node reachable from it. Gradients of a leaf used along
    /// several paths accumulate additively.
    pub fn backward(&self, loss: Var<'_>) -> AdResult<()> {
        {
            let inner = self.inner.borrow();
            if inner.nodes.is_empty() {
                return Err(AdError::EmptyTape);
            }
            if !inner.armed {
                return Err(AdError::BackwardTwice);
            }
            let lt = &inner.nodes[loss.id].value;
            if lt.numel() != 1 {
                return Err(AdError::NonScalarLoss { shape: lt.shape().to_vec() });
            }
        }

        let inner = self.inner.borrow();
        let n = inner.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = (0..n).map(|_| None).collect();
        grads[loss.id] = Some(vec![1.0]);

        let add_into = |slot: &mut Option<Vec<f64>>, len: usize, f: &mut dyn FnMut(&mut [f64])| {
            let buf = slot.get_or_insert_with(|| vec![0.0; len]);
            f(buf);
        };

        for id in (0..n).rev() {
            let node = &inner.nodes[id];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                // Leaf grads stay in place for the write-back below.
                continue;
            }
            let g = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            let val = |i: usize| -> &Tensor { &inner.nodes[i].value };
            let rg = |i: usize| -> bool { inner.nodes[i].requires_grad };
            // Split-borrow helper: takes a target id, its numel, and an
            // accumulation closure over the target grad buffer.
            macro_rules! acc {
                ($tid:expr, $f:expr) => {
                    if rg($tid) {
                        let len = inner.nodes[$tid].value.numel();
                        let mut f = $f;
                        add_into(&mut grads[$tid], len, &mut f);
                    }
                };
            }

            match node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    acc!(a, |buf: &mut [f64]| for (o, gi) in buf.iter_mut().zip(&g) { *o += gi });
                    acc!(b, |buf: &mut [f64]| for (o, gi) in buf.iter_mut().zip(&g) { *o += gi });
                }
                Op::Sub(a, b) => {
                    acc!(a, |buf: &mut [f64]| for (o, gi) in buf.iter_mut().zip(&g) { *o += gi });
                    acc!(b, |buf: &mut [f64]| for (o, gi) in buf.iter_mut().zip(&g) { *o -= gi });
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (val(a).data(), val(b).data());
                    acc!(a, |buf: &mut [f64]| for i in 0..buf.len() { buf[i] += g[i] * vb[i] });
                    acc!(b, |buf: &mut [f64]| for i in 0..buf.len() { buf[i] += g[i] * va[i] });
                }
                Op::SMul(a, c) => {
                    acc!(a, |buf: &mut [f64]| for (o, gi) in buf.iter_mut().zip(&g) { *o += c * gi });
                }
                Op::SAdd(a) => {
                    acc!(a, |buf: &mut [f64]| for (o, gi) in buf.iter_mut().zip(&g) { *o += gi });
                }
                Op::MatMul(a, b) => {
                    let (m, k) = (val(a).shape()[0], val(a).shape()[1]);
                    let nn = val(b).shape()[1];
                    let (va, vb) = (val(a).data(), val(b).data());
                    acc!(a, |buf: &mut [f64]| kernels::gemm(m, nn, k, &g, kernels::rm(nn), vb, kernels::tr(nn), 1.0, buf));
                    acc!(b, |buf: &mut [f64]| kernels::gemm(k, m, nn, va, kernels::tr(k), &g, kernels::rm(nn), 1.0, buf));
                }
                Op::Linear { x, w, b } => {
                    let (m, i) = (val(x).shape()[0], val(x).shape()[1]);
                    let o = val(w).shape()[1];
                    let (vx, vw) = (val(x).data(), val(w).data());
                    acc!(x, |buf: &mut [f64]| kernels::gemm(m, o, i, &g, kernels::rm(o), vw, kernels::tr(o), 1.0, buf));
                    acc!(w, |buf: &mut [f64]| kernels::gemm(i, m, o, vx, kernels::tr(i), &g, kernels::rm(o), 1.0, buf));
                    acc!(b, |buf: &mut [f64]| {
                        for r in 0..m {
                            for c in 0..o {
                                buf[c] += g[r * o + c];
                            }
                        }
                    });
                }
                Op::Conv2d { x, w, b, stride, pad } => {
                    let xs = val(x).shape().to_vec();
                    let ws = val(w).shape().to_vec();
                    let geom = ConvGeom::new(xs[0], xs[1], xs[2], xs[3], ws[2], ws[3], stride, pad).unwrap();
                    let oc = ws[0];
                    let (vx, vw) = (val(x).data(), val(w).data());
                    acc!(x, |buf: &mut [f64]| {
                        let dx = kernels::conv2d_backward_input(&g, vw, oc, &geom);
                        for (o, d) in buf.iter_mut().zip(&dx) { *o += d }
                    });
                    acc!(w, |buf: &mut [f64]| kernels::conv2d_backward_weight(&g, vx, oc, &geom, buf));
                    if let Some(bid) = b {
                        acc!(bid, |buf: &mut [f64]| kernels::bias_backward(&g, geom.n, oc, geom.oh * geom.ow, buf));
                    }
                }
                Op::ConvT2d { x, w, b, stride, pad } => {
                    let xs = val(x).shape().to_vec();
                    let ws = val(w).shape().to_vec();
                    let (ic, oc, kh, kw) = (ws[0], ws[1], ws[2], ws[3]);
                    let (oh, ow) = (node.value.shape()[2], node.value.shape()[3]);
                    // Geometry of the *conv* whose adjoint this op is.
                    let geom = ConvGeom::new(xs[0], oc, oh, ow, kh, kw, stride, pad).unwrap();
                    let (vx, vw) = (val(x).data(), val(w).data());
                    acc!(x, |buf: &mut [f64]| {
                        let dx = kernels::conv2d_forward(&g, vw, None, ic, &geom);
                        for (o, d) in buf.iter_mut().zip(&dx) { *o += d }
                    });
                    acc!(w, |buf: &mut [f64]| kernels::conv2d_backward_weight(vx, &g, ic, &geom, buf));
                    if let Some(bid) = b {
                        acc!(bid, |buf: &mut [f64]| kernels::bias_backward(&g, geom.n, oc, oh * ow, buf));
                    }
                }
                Op::Relu(a) => {
                    let vin = val(a).data();
                    acc!(a, |buf: &mut [f64]| for i in 0..buf.len() { if vin[i] > 0.0 { buf[i] += g[i] } });
                }
                Op::LeakyRelu(a, slope) => {
                    let vin = val(a).data();
                    acc!(a, |buf: &mut [f64]| for i in 0..buf.len() {
                        buf[i] += if vin[i] > 0.0 { g[i] } else { slope * g[i] };
                    });
                }
                Op::Tanh(a) => {
                    let y = node.value.data();
                    acc!(a, |buf: &mut [f64]| for i in 0..buf.len() { buf[i] += g[i] * (1.0 - y[i] * y[i]) });
                }
                Op::Sigmoid(a) => {
                    let y = node.value.data();
                    acc!(a, |buf: &mut [f64]| for i in 0..buf.len() { buf[i] += g[i] * y[i] * (1.0 - y[i]) });
                }
                Op::Softmax(a) => {
                    let y = node.value.data();
                    let row = *node.value.shape().last().unwrap();
                    acc!(a, |buf: &mut [f64]| {
                        for r in 0..y.len() / row {
                            let (ys, gs) = (&y[r * row..(r + 1) * row], &g[r * row..(r + 1) * row]);
                            let dot: f64 = ys.iter().zip(gs).map(|(yi, gi)| yi * gi).sum();
                            for c in 0..row {
                                buf[r * row + c] += ys[c] * (gs[c] - dot);
                            }
                        }
                    });
                }
                Op::Log(a) => {
                    let vin = val(a).data();
                    acc!(a, |buf: &mut [f64]| for i in 0..buf.len() { buf[i] += g[i] / vin[i] });
                }
                Op::Exp(a) => {
                    let y = node.value.data();
                    acc!(a, |buf: &mut [f64]| for i in 0..buf.len() { buf[i] += g[i] * y[i] });
                }
                Op::Abs(a) => {
                    // Subgradient 0 at exactly 0.
                    let vin = val(a).data();
                    acc!(a, |buf: &mut [f64]| for i in 0..buf.len() {
                        buf[i] += g[i] * if vin[i] > 0.0 { 1.0 } else if vin[i] < 0.0 { -1.0 } else { 0.0 };
                    });
                }
                Op::Square(a) => {
                    let vin = val(a).data();
                    acc!(a, |buf: &mut [f64]| for i in 0..buf.len() { buf[i] += 2.0 * vin[i] * g[i] });
                }
                Op::Sqrt(a) => {
                    // Subgradient 0 at 0 (paired with the pairwise-distance op
                    // so coincident points contribute nothing).
                    let y = node.value.data();
                    acc!(a, |buf: &mut [f64]| for i in 0..buf.len() {
                        if y[i] > 0.0 { buf[i] += g[i] / (2.0 * y[i]) }
                    });
                }
                Op::ReduceSum(a) => {
                    acc!(a, |buf: &mut [f64]| for o in buf.iter_mut() { *o += g[0] });
                }
                Op::ReduceMean(a) => {
                    let inv = 1.0 / val(a).numel() as f64;
                    acc!(a, |buf: &mut [f64]| for o in buf.iter_mut() { *o += g[0] * inv });
                }
                Op::Concat { a, b, axis } => {
                    let sa = val(a).shape();
                    let inner_a: usize = sa[axis..].iter().product();
                    let outer: usize = sa[..axis].iter().product();
                    let sb = val(b).shape();
                    let inner_b: usize = sb[axis..].iter().product();
                    let block = inner_a + inner_b;
                    acc!(a, |buf: &mut [f64]| for r in 0..outer {
                        for c in 0..inner_a {
                            buf[r * inner_a + c] += g[r * block + c];
                        }
                    });
                    acc!(b, |buf: &mut [f64]| for r in 0..outer {
                        for c in 0..inner_b {
                            buf[r * inner_b + c] += g[r * block + inner_a + c];
                        }
                    });
                }
                Op::Reshape(a) => {
                    acc!(a, |buf: &mut [f64]| for (o, gi) in buf.iter_mut().zip(&g) { *o += gi });
                }
                Op::PairwiseSqDist(a) => {
                    let x = val(a).data();
                    let (nrows, d) = (val(a).shape()[0], val(a).shape()[1]);
                    acc!(a, |buf: &mut [f64]| {
                        for i in 0..nrows {
                            for j in 0..nrows {
                                let w = g[i * nrows + j] + g[j * nrows + i];
                                if w == 0.0 {
                                    continue;
                                }
                                for c in 0..d {
                                    buf[i * d + c] += 2.0 * w * (x[i * d + c] - x[j * d + c]);
                                }
                            }
                        }
                    });
                }
            }
            drop(g);
        }
        drop(inner);

        let mut inner = self.inner.borrow_mut();
        inner.armed = false;
        for (node, g) in inner.nodes.iter_mut().zip(grads) {
            if node.requires_grad {
                node.grad = g;
            }
        }
        Ok(())
    }

    /// Drop accumulated gradients and allow another backward pass.
    pub fn zero_grads(&self) {
        let mut inner = self.inner.borrow_mut();
        inner.armed = true;
        for node in inner.nodes.iter_mut() {
            node.grad = None;
        }
    }
}

impl<'t> Var<'t> {
    pub fn shape(&self) -> Vec<usize> {
        self.tape.inner.borrow().nodes[self.id].value.shape().to_vec()
    }

    pub fn numel(&self) -> usize {
        self.tape.inner.borrow().nodes[self.id].value.numel()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.inner.borrow().nodes[self.id].requires_grad
    }

    /// Clone out the forward value.
    pub fn value(&self) -> Tensor {
        self.tape.inner.borrow().nodes[self.id].value.clone()
    }

    /// Borrow the forward value without cloning.
    pub fn with_value<R>(&self, f: impl FnOnce(&Tensor) -> R) -> R {
        f(&self.tape.inner.borrow().nodes[self.id].value)
    }

    pub fn item(&self) -> AdResult<f64> {
        self.tape.inner.borrow().nodes[self.id].value.item()
    }

    /// Gradient accumulated by the last backward pass, if any.
    pub fn grad(&self) -> Option<Tensor> {
        let inner = self.tape.inner.borrow();
        let node = &inner.nodes[self.id];
        node.grad.as_ref().map(|g| Tensor::from_vec(node.value.shape(), g.clone()).unwrap())
    }

    fn same_shape(&self, other: Var<'t>, op: &'static str) -> AdResult<()> {
        let (a, b) = (self.shape(), other.shape());
        if a != b {
            return Err(AdError::ShapeMismatch { op, lhs: a, rhs: b });
        }
        Ok(())
    }

    fn rg2(&self, other: Var<'t>) -> bool {
        self.requires_grad() || other.requires_grad()
    }

    fn unary(
        &self,
        name: &'static str,
        op: impl FnOnce(usize) -> Op,
        f: impl Fn(f64) -> f64,
    ) -> AdResult<Var<'t>> {
        let value = self.with_value(|v| {
            Tensor::from_vec(v.shape(), v.data().iter().map(|&x| f(x)).collect()).unwrap()
        });
        self.tape.record(name, op(self.id), value, self.requires_grad())
    }

    pub fn add(&self, other: Var<'t>) -> AdResult<Var<'t>> {
        self.same_shape(other, "add")?;
        let value = self.with_value(|a| {
            other.with_value(|b| {
                Tensor::from_vec(a.shape(), a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect()).unwrap()
            })
        });
        self.tape.record("add", Op::Add(self.id, other.id), value, self.rg2(other))
    }

    pub fn sub(&self, other: Var<'t>) -> AdResult<Var<'t>> {
        self.same_shape(other, "sub")?;
        let value = self.with_value(|a| {
            other.with_value(|b| {
                Tensor::from_vec(a.shape(), a.data().iter().zip(b.data()).map(|(x, y)| x - y).collect()).unwrap()
            })
        });
        self.tape.record("sub", Op::Sub(self.id, other.id), value, self.rg2(other))
    }

    pub fn mul(&self, other: Var<'t>) -> AdResult<Var<'t>> {
        self.same_shape(other, "mul")?;
        let value = self.with_value(|a| {
            other.with_value(|b| {
                Tensor::from_vec(a.shape(), a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect()).unwrap()
            })
        });
        self.tape.record("mul", Op::Mul(self.id, other.id), value, self.rg2(other))
    }

    /// Scalar-with-tensor product (the one permitted broadcast).
    pub fn smul(&self, c: f64) -> AdResult<Var<'t>> {
        self.unary("smul", |a| Op::SMul(a, c), |x| c * x)
    }

    /// Scalar-with-tensor addition.
    pub fn sadd(&self, c: f64) -> AdResult<Var<'t>> {
        self.unary("sadd", Op::SAdd, |x| c + x)
    }

    pub fn matmul(&self, other: Var<'t>) -> AdResult<Var<'t>> {
        let (a, b) = (self.shape(), other.shape());
        if a.len() != 2 || b.len() != 2 || a[1] != b[0] {
            return Err(AdError::ShapeMismatch { op: "matmul", lhs: a, rhs: b });
        }
        let (m, k, n) = (a[0], a[1], b[1]);
        let mut out = vec![0.0; m * n];
        self.with_value(|va| {
            other.with_value(|vb| {
                kernels::gemm(m, k, n, va.data(), kernels::rm(k), vb.data(), kernels::rm(n), 0.0, &mut out);
            })
        });
        let value = Tensor::from_vec(&[m, n], out)?;
        self.tape.record("matmul", Op::MatMul(self.id, other.id), value, self.rg2(other))
    }

    /// Fully-connected layer: `x (m,i) . w (i,o) + b (o)` broadcast over rows.
    pub fn linear(&self, w: Var<'t>, b: Var<'t>) -> AdResult<Var<'t>> {
        let (xs, ws, bs) = (self.shape(), w.shape(), b.shape());
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[0] {
            return Err(AdError::ShapeMismatch { op: "linear", lhs: xs, rhs: ws });
        }
        if bs != vec![ws[1]] {
            return Err(AdError::ShapeMismatch { op: "linear bias", lhs: bs, rhs: vec![ws[1]] });
        }
        let (m, i, o) = (xs[0], xs[1], ws[1]);
        let mut out = vec![0.0; m * o];
        self.with_value(|vx| {
            w.with_value(|vw| {
                kernels::gemm(m, i, o, vx.data(), kernels::rm(i), vw.data(), kernels::rm(o), 0.0, &mut out);
            })
        });
        b.with_value(|vb| {
            for r in 0..m {
                for c in 0..o {
                    out[r * o + c] += vb.data()[c];
                }
            }
        });
        let value = Tensor::from_vec(&[m, o], out)?;
        let rg = self.requires_grad() || w.requires_grad() || b.requires_grad();
        self.tape.record("linear", Op::Linear { x: self.id, w: w.id, b: b.id }, value, rg)
    }

    /// 2-D convolution, NCHW, weight (oc, c, kh, kw).
    pub fn conv2d(&self, w: Var<'t>, bias: Option<Var<'t>>, stride: usize, pad: usize) -> AdResult<Var<'t>> {
        let (xs, ws) = (self.shape(), w.shape());
        if xs.len() != 4 || ws.len() != 4 || xs[1] != ws[1] {
            return Err(AdError::ShapeMismatch { op: "conv2d", lhs: xs, rhs: ws });
        }
        let geom = ConvGeom::new(xs[0], xs[1], xs[2], xs[3], ws[2], ws[3], stride, pad).ok_or_else(|| {
            AdError::BadShape { op: "conv2d", shape: xs.clone(), reason: "kernel larger than padded input".into() }
        })?;
        let oc = ws[0];
        if let Some(b) = bias {
            if b.shape() != vec![oc] {
                return Err(AdError::ShapeMismatch { op: "conv2d bias", lhs: b.shape(), rhs: vec![oc] });
            }
        }
        let bv = bias.map(|b| b.value());
        let out = self.with_value(|vx| {
            w.with_value(|vw| kernels::conv2d_forward(vx.data(), vw.data(), bv.as_ref().map(|t| t.data()), oc, &geom))
        });
        let value = Tensor::from_vec(&[geom.n, oc, geom.oh, geom.ow], out)?;
        let rg = self.requires_grad() || w.requires_grad() || bias.map(|b| b.requires_grad()).unwrap_or(false);
        self.tape.record(
            "conv2d",
            Op::Conv2d { x: self.id, w: w.id, b: bias.map(|b| b.id), stride, pad },
            value,
            rg,
        )
    }

    /// Transposed 2-D convolution (exact adjoint of [`Var::conv2d`] with the
    /// same stride/pad), NCHW, weight (ic, oc, kh, kw).
    /// Output spatial size: `(in - 1) * stride - 2 * pad + k`.
    pub fn conv2d_transpose(&self, w: Var<'t>, bias: Option<Var<'t>>, stride: usize, pad: usize) -> AdResult<Var<'t>> {
        let (xs, ws) = (self.shape(), w.shape());
        if xs.len() != 4 || ws.len() != 4 || xs[1] != ws[0] {
            return Err(AdError::ShapeMismatch { op: "conv2d_transpose", lhs: xs, rhs: ws });
        }
        let (n, ic, h, wd) = (xs[0], xs[1], xs[2], xs[3]);
        let (oc, kh, kw) = (ws[1], ws[2], ws[3]);
        let oh = (h - 1) * stride + kh;
        let ow = (wd - 1) * stride + kw;
        if oh < 2 * pad || ow < 2 * pad {
            return Err(AdError::BadShape { op: "conv2d_transpose", shape: xs, reason: "padding exceeds output".into() });
        }
        let (oh, ow) = (oh - 2 * pad, ow - 2 * pad);
        if let Some(b) = bias {
            if b.shape() != vec![oc] {
                return Err(AdError::ShapeMismatch { op: "conv2d_transpose bias", lhs: b.shape(), rhs: vec![oc] });
            }
        }
        // Adjoint of the conv mapping (n,oc,oh,ow) -> (n,ic,h,w).
        let geom = ConvGeom::new(n, oc, oh, ow, kh, kw, stride, pad).ok_or_else(|| {
            AdError::BadShape { op: "conv2d_transpose", shape: xs.clone(), reason: "bad geometry".into() }
        })?;
        debug_assert_eq!((geom.oh, geom.ow), (h, wd));
        let out = self.with_value(|vx| {
            w.with_value(|vw| {
                let dx = kernels::conv2d_backward_input(vx.data(), vw.data(), ic, &geom);
                dx
            })
        });
        let mut out = out;
        if let Some(b) = bias {
            b.with_value(|vb| {
                let hw = oh * ow;
                for bi in 0..n {
                    for ch in 0..oc {
                        let off = vb.data()[ch];
                        for v in &mut out[(bi * oc + ch) * hw..(bi * oc + ch + 1) * hw] {
                            *v += off;
                        }
                    }
                }
            });
        }
        let value = Tensor::from_vec(&[n, oc, oh, ow], out)?;
        let rg = self.requires_grad() || w.requires_grad() || bias.map(|b| b.requires_grad()).unwrap_or(false);
        self.tape.record(
            "conv2d_transpose",
            Op::ConvT2d { x: self.id, w: w.id, b: bias.map(|b| b.id), stride, pad },
            value,
            rg,
        )
    }

    /// Subgradient at 0 is the negative-side slope (0 here).
    pub fn relu(&self) -> AdResult<Var<'t>> {
        self.unary("relu", Op::Relu, |x| if x > 0.0 { x } else { 0.0 })
    }

    /// Subgradient at 0 is the negative-side slope (`slope` here).
    pub fn leaky_relu(&self, slope: f64) -> AdResult<Var<'t>> {
        self.unary("leaky_relu", |a| Op::LeakyRelu(a, slope), |x| if x > 0.0 { x } else { slope * x })
    }

    pub fn tanh(&self) -> AdResult<Var<'t>> {
        self.unary("tanh", Op::Tanh, f64::tanh)
    }

    pub fn sigmoid(&self) -> AdResult<Var<'t>> {
        self.unary("sigmoid", Op::Sigmoid, |x| 1.0 / (1.0 + (-x).exp()))
    }

    pub fn log(&self) -> AdResult<Var<'t>> {
        self.unary("log", Op::Log, f64::ln)
    }

    pub fn exp(&self) -> AdResult<Var<'t>> {
        self.unary("exp", Op::Exp, f64::exp)
    }

    pub fn abs(&self) -> AdResult<Var<'t>> {
        self.unary("abs", Op::Abs, f64::abs)
    }

    pub fn square(&self) -> AdResult<Var<'t>> {
        self.unary("square", Op::Square, |x| x * x)
    }

    pub fn sqrt(&self) -> AdResult<Var<'t>> {
        self.unary("sqrt", Op::Sqrt, f64::sqrt)
    }

    /// Softmax over the last axis; rows are non-negative and sum to one.
    pub fn softmax(&self) -> AdResult<Var<'t>> {
        let shape = self.shape();
        let row = *shape.last().ok_or(AdError::BadShape {
            op: "softmax",
            shape: shape.clone(),
            reason: "rank 0".into(),
        })?;
        if row == 0 {
            return Err(AdError::BadShape { op: "softmax", shape, reason: "empty last axis".into() });
        }
        let value = self.with_value(|v| {
            let mut out = vec![0.0; v.numel()];
            kernels::softmax_rows(v.data(), row, &mut out);
            Tensor::from_vec(v.shape(), out).unwrap()
        });
        self.tape.record("softmax", Op::Softmax(self.id), value, self.requires_grad())
    }

    pub fn sum(&self) -> AdResult<Var<'t>> {
        let value = self.with_value(|v| Tensor::scalar(v.data().iter().sum()));
        self.tape.record("reduce_sum", Op::ReduceSum(self.id), value, self.requires_grad())
    }

    pub fn mean(&self) -> AdResult<Var<'t>> {
        if self.numel() == 0 {
            return Err(AdError::BadShape { op: "reduce_mean", shape: self.shape(), reason: "empty tensor".into() });
        }
        let value = self.with_value(|v| Tensor::scalar(v.data().iter().sum::<f64>() / v.numel() as f64));
        self.tape.record("reduce_mean", Op::ReduceMean(self.id), value, self.requires_grad())
    }

    pub fn concat(&self, other: Var<'t>, axis: usize) -> AdResult<Var<'t>> {
        let (a, b) = (self.shape(), other.shape());
        let compatible = a.len() == b.len()
            && axis < a.len()
            && a.iter().zip(&b).enumerate().all(|(i, (x, y))| i == axis || x == y);
        if !compatible {
            return Err(AdError::ShapeMismatch { op: "concat", lhs: a, rhs: b });
        }
        let outer: usize = a[..axis].iter().product();
        let inner_a: usize = a[axis..].iter().product();
        let inner_b: usize = b[axis..].iter().product();
        let mut out = Vec::with_capacity(outer * (inner_a + inner_b));
        self.with_value(|va| {
            other.with_value(|vb| {
                for r in 0..outer {
                    out.extend_from_slice(&va.data()[r * inner_a..(r + 1) * inner_a]);
                    out.extend_from_slice(&vb.data()[r * inner_b..(r + 1) * inner_b]);
                }
            })
        });
        let mut shape = a.clone();
        shape[axis] += b[axis];
        let value = Tensor::from_vec(&shape, out)?;
        self.tape.record("concat", Op::Concat { a: self.id, b: other.id, axis }, value, self.rg2(other))
    }

    pub fn reshape(&self, shape: &[usize]) -> AdResult<Var<'t>> {
        let value = self.with_value(|v| v.reshaped(shape))?;
        self.tape.record("reshape", Op::Reshape(self.id), value, self.requires_grad())
    }

    /// Matrix of squared Euclidean distances between the rows of a (n,d)
    /// tensor; output (n,n), clamped at 0 against roundoff.
    pub fn pairwise_sq_dist(&self) -> AdResult<Var<'t>> {
        let s = self.shape();
        if s.len() != 2 {
            return Err(AdError::BadShape { op: "pairwise_sq_dist", shape: s, reason: "want rank 2".into() });
        }
        let (n, d) = (s[0], s[1]);
        let value = self.with_value(|v| {
            let x = v.data();
            let mut gram = vec![0.0; n * n];
            kernels::gemm(n, d, n, x, kernels::rm(d), x, kernels::tr(d), 0.0, &mut gram);
            let mut out = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    let sq = gram[i * n + i] + gram[j * n + j] - 2.0 * gram[i * n + j];
                    out[i * n + j] = sq.max(0.0);
                }
            }
            Tensor::from_vec(&[n, n], out).unwrap()
        });
        self.tape.record("pairwise_sq_dist", Op::PairwiseSqDist(self.id), value, self.requires_grad())
    }
}
