//! Raw numeric kernels behind the tape ops. All layouts are row-major.
//!
//! Convolution and transposed convolution share one im2col/col2im pair, so
//! the transposed op is the exact linear adjoint of the forward op.

/// C (m,n) = A (m,k) . B (k,n) + beta * C, with explicit strides for A and B
/// so transposed operands need no copy.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if beta == 0.0 {
            c[..m * n].fill(0.0);
        }
        return;
    }
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Row-major (rows, cols) strides.
pub fn rm(cols: usize) -> (isize, isize) {
    (cols as isize, 1)
}

/// Transposed view of a row-major (rows, cols) buffer.
pub fn tr(cols: usize) -> (isize, isize) {
    (1, cols as isize)
}

/// Spatial geometry of a stride/pad convolution.
#[derive(Clone, Copy, Debug)]
pub struct ConvGeom {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    #[allow(clippy::too_many_arguments)]
    pub fn new(n: usize, c: usize, h: usize, w: usize, kh: usize, kw: usize, stride: usize, pad: usize) -> Option<Self> {
        let oh = (h + 2 * pad).checked_sub(kh)? / stride + 1;
        let ow = (w + 2 * pad).checked_sub(kw)? / stride + 1;
        Some(ConvGeom { n, c, h, w, kh, kw, stride, pad, oh, ow })
    }
}

/// Unfold `src` (n,c,h,w) into patch rows: out (n*oh*ow, c*kh*kw).
pub fn im2col(src: &[f64], g: &ConvGeom, cols: &mut [f64]) {
    let ckk = g.c * g.kh * g.kw;
    debug_assert_eq!(cols.len(), g.n * g.oh * g.ow * ckk);
    cols.fill(0.0);
    let plane = g.h * g.w;
    for b in 0..g.n {
        let src_b = &src[b * g.c * plane..(b + 1) * g.c * plane];
        let row0 = b * g.oh * g.ow;
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let row = (row0 + oy * g.ow + ox) * ckk;
                let iy0 = (oy * g.stride) as isize - g.pad as isize;
                let ix0 = (ox * g.stride) as isize - g.pad as isize;
                for ch in 0..g.c {
                    let sp = &src_b[ch * plane..(ch + 1) * plane];
                    let dst = &mut cols[row + ch * g.kh * g.kw..row + (ch + 1) * g.kh * g.kw];
                    for ky in 0..g.kh {
                        let iy = iy0 + ky as isize;
                        if iy < 0 || iy >= g.h as isize {
                            continue;
                        }
                        let srow = iy as usize * g.w;
                        for kx in 0..g.kw {
                            let ix = ix0 + kx as isize;
                            if ix < 0 || ix >= g.w as isize {
                                continue;
                            }
                            dst[ky * g.kw + kx] = sp[srow + ix as usize];
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add patch rows back into (n,c,h,w).
pub fn col2im_add(cols: &[f64], g: &ConvGeom, dst: &mut [f64]) {
    let ckk = g.c * g.kh * g.kw;
    debug_assert_eq!(cols.len(), g.n * g.oh * g.ow * ckk);
    let plane = g.h * g.w;
    for b in 0..g.n {
        let dst_b = &mut dst[b * g.c * plane..(b + 1) * g.c * plane];
        let row0 = b * g.oh * g.ow;
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let row = (row0 + oy * g.ow + ox) * ckk;
                let iy0 = (oy * g.stride) as isize - g.pad as isize;
                let ix0 = (ox * g.stride) as isize - g.pad as isize;
                for ch in 0..g.c {
                    let dp = &mut dst_b[ch * plane..(ch + 1) * plane];
                    let src = &cols[row + ch * g.kh * g.kw..row + (ch + 1) * g.kh * g.kw];
                    for ky in 0..g.kh {
                        let iy = iy0 + ky as isize;
                        if iy < 0 || iy >= g.h as isize {
                            continue;
                        }
                        let drow = iy as usize * g.w;
                        for kx in 0..g.kw {
                            let ix = ix0 + kx as isize;
                            if ix < 0 || ix >= g.w as isize {
                                continue;
                            }
                            dp[drow + ix as usize] += src[ky * g.kw + kx];
                        }
                    }
                }
            }
        }
    }
}

/// (n,c,oh,ow) -> (n*oh*ow, c) channel-last staging used around gemm.
pub fn to_channel_last(src: &[f64], n: usize, c: usize, hw: usize, dst: &mut [f64]) {
    debug_assert_eq!(src.len(), n * c * hw);
    for b in 0..n {
        for ch in 0..c {
            let sp = &src[(b * c + ch) * hw..(b * c + ch + 1) * hw];
            for (pos, &v) in sp.iter().enumerate() {
                dst[(b * hw + pos) * c + ch] = v;
            }
        }
    }
}

/// (n*oh*ow, c) -> (n,c,oh,ow), optionally adding a per-channel bias.
pub fn from_channel_last(src: &[f64], n: usize, c: usize, hw: usize, bias: Option<&[f64]>, dst: &mut [f64]) {
    debug_assert_eq!(dst.len(), n * c * hw);
    for b in 0..n {
        for ch in 0..c {
            let off = bias.map_or(0.0, |bv| bv[ch]);
            let dp = &mut dst[(b * c + ch) * hw..(b * c + ch + 1) * hw];
            for (pos, slot) in dp.iter_mut().enumerate() {
                *slot = src[(b * hw + pos) * c + ch] + off;
            }
        }
    }
}

/// Forward convolution: x (n,c,h,w) * w (oc,c,kh,kw) -> y (n,oc,oh,ow).
pub fn conv2d_forward(x: &[f64], weight: &[f64], bias: Option<&[f64]>, oc: usize, g: &ConvGeom) -> Vec<f64> {
    let ckk = g.c * g.kh * g.kw;
    let rows = g.n * g.oh * g.ow;
    let mut cols = vec![0.0; rows * ckk];
    im2col(x, g, &mut cols);
    // tmp (rows, oc) = cols (rows, ckk) . W^T (ckk, oc)
    let mut tmp = vec![0.0; rows * oc];
    gemm(rows, ckk, oc, &cols, rm(ckk), weight, tr(ckk), 0.0, &mut tmp);
    let mut y = vec![0.0; g.n * oc * g.oh * g.ow];
    from_channel_last(&tmp, g.n, oc, g.oh * g.ow, bias, &mut y);
    y
}

/// Gradient of the convolution input: dy (n,oc,oh,ow) -> dx (n,c,h,w).
pub fn conv2d_backward_input(dy: &[f64], weight: &[f64], oc: usize, g: &ConvGeom) -> Vec<f64> {
    let ckk = g.c * g.kh * g.kw;
    let rows = g.n * g.oh * g.ow;
    let mut dtmp = vec![0.0; rows * oc];
    to_channel_last(dy, g.n, oc, g.oh * g.ow, &mut dtmp);
    // dcols (rows, ckk) = dtmp (rows, oc) . W (oc, ckk)
    let mut dcols = vec![0.0; rows * ckk];
    gemm(rows, oc, ckk, &dtmp, rm(oc), weight, rm(ckk), 0.0, &mut dcols);
    let mut dx = vec![0.0; g.n * g.c * g.h * g.w];
    col2im_add(&dcols, g, &mut dx);
    dx
}

/// Gradient of the convolution weight: accumulates into dw (oc,c,kh,kw).
pub fn conv2d_backward_weight(dy: &[f64], x: &[f64], oc: usize, g: &ConvGeom, dw: &mut [f64]) {
    let ckk = g.c * g.kh * g.kw;
    let rows = g.n * g.oh * g.ow;
    let mut cols = vec![0.0; rows * ckk];
    im2col(x, g, &mut cols);
    let mut dtmp = vec![0.0; rows * oc];
    to_channel_last(dy, g.n, oc, g.oh * g.ow, &mut dtmp);
    // dW (oc, ckk) += dtmp^T (oc, rows) . cols (rows, ckk)
    gemm(oc, rows, ckk, &dtmp, tr(oc), &cols, rm(ckk), 1.0, dw);
}

/// Per-channel reduction of dy (n,oc,oh,ow), accumulated into db (oc).
pub fn bias_backward(dy: &[f64], n: usize, oc: usize, hw: usize, db: &mut [f64]) {
    for b in 0..n {
        for ch in 0..oc {
            let sp = &dy[(b * oc + ch) * hw..(b * oc + ch + 1) * hw];
            db[ch] += sp.iter().sum::<f64>();
        }
    }
}

/// Row-wise stable softmax over the last axis.
pub fn softmax_rows(src: &[f64], row: usize, out: &mut [f64]) {
    debug_assert_eq!(src.len() % row, 0);
    for (s, o) in src.chunks_exact(row).zip(out.chunks_exact_mut(row)) {
        let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for (oi, &si) in o.iter_mut().zip(s) {
            let e = (si - m).exp();
            *oi = e;
            z += e;
        }
        for oi in o.iter_mut() {
            *oi /= z;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(x: &[f64], w: &[f64], oc: usize, g: &ConvGeom) -> Vec<f64> {
        let mut y = vec![0.0; g.n * oc * g.oh * g.ow];
        for b in 0..g.n {
            for o in 0..oc {
                for oy in 0..g.oh {
                    for ox in 0..g.ow {
                        let mut acc = 0.0;
                        for ch in 0..g.c {
                            for ky in 0..g.kh {
                                for kx in 0..g.kw {
                                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                                    let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                                    if iy < 0 || ix < 0 || iy >= g.h as isize || ix >= g.w as isize {
                                        continue;
                                    }
                                    let xi = ((b * g.c + ch) * g.h + iy as usize) * g.w + ix as usize;
                                    let wi = ((o * g.c + ch) * g.kh + ky) * g.kw + kx;
                                    acc += x[xi] * w[wi];
                                }
                            }
                        }
                        y[((b * oc + o) * g.oh + oy) * g.ow + ox] = acc;
                    }
                }
            }
        }
        y
    }

    #[test]
    fn gemm_conv_matches_naive() {
        let g = ConvGeom::new(2, 3, 6, 5, 3, 3, 2, 1).unwrap();
        let x: Vec<f64> = (0..2 * 3 * 6 * 5).map(|i| (i as f64 * 0.7).sin()).collect();
        let w: Vec<f64> = (0..4 * 3 * 3 * 3).map(|i| (i as f64 * 0.3).cos()).collect();
        let fast = conv2d_forward(&x, &w, None, 4, &g);
        let slow = naive_conv(&x, &w, 4, &g);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let src = vec![1.0, 2.0, 3.0, -5.0, 0.0, 5.0];
        let mut out = vec![0.0; 6];
        softmax_rows(&src, 3, &mut out);
        for r in out.chunks(3) {
            let s: f64 = r.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
