//! Two-component PCA with a deterministic sign convention, plus CSV
//! export of tagged 2-D embeddings.

use std::io::Write;
use std::path::Path;

use crate::autodiff::{gemm, Tensor};

use super::{EvalError, EvalResult};

/// One group of samples sharing a domain tag.
pub struct EmbedGroup {
    pub samples: Tensor,
    pub domain: String,
    pub labels: Vec<u16>,
}

/// Projection of pooled samples onto their top-2 principal components.
pub struct PcaEmbedding {
    /// (x, y, domain index, class) per input row, group order preserved.
    pub coords: Vec<(f64, f64)>,
    pub domains: Vec<String>,
    pub classes: Vec<u16>,
    /// Mean squared residual norm after rank-2 reconstruction.
    pub reconstruction_error: f64,
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// (eigenvalues, row-major eigenvectors as rows).
fn jacobi_eigen(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = (frob * 1e-14).max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| a[p * n + q] * a[p * n + q])
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let evals: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    // v columns are eigenvectors; emit as rows.
    let mut rows = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            rows[j * n + i] = v[i * n + j];
        }
    }
    (evals, rows)
}

/// Project the pooled samples of all groups onto their top-2 principal
/// components. The sign of each component is fixed by making its
/// largest-magnitude entry positive.
pub fn pca_embed(groups: &[EmbedGroup]) -> EvalResult<PcaEmbedding> {
    let total: usize = groups.iter().map(|g| g.samples.shape()[0]).sum();
    if total < 2 {
        return Err(EvalError::TooFewSamples { need: 2, got: total });
    }
    let dim: usize = groups[0].samples.shape()[1..].iter().product();
    for g in groups {
        let d: usize = g.samples.shape()[1..].iter().product();
        if d != dim {
            return Err(EvalError::BadInput("pca_embed: groups have mismatched feature sizes".into()));
        }
        if g.labels.len() != g.samples.shape()[0] {
            return Err(EvalError::BadInput("pca_embed: label count mismatch".into()));
        }
    }

    // Pool and center.
    let mut x = Vec::with_capacity(total * dim);
    for g in groups {
        x.extend_from_slice(g.samples.data());
    }
    let mut mean = vec![0.0; dim];
    for row in x.chunks_exact(dim) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= total as f64;
    }
    for row in x.chunks_exact_mut(dim) {
        for (v, m) in row.iter_mut().zip(&mean) {
            *v -= m;
        }
    }

    // Covariance (dim x dim), then its top-2 eigenvectors.
    let mut cov = vec![0.0; dim * dim];
    gemm(dim, total, dim, &x, (1, dim as isize), &x, (dim as isize, 1), 0.0, &mut cov);
    for c in cov.iter_mut() {
        *c /= total as f64;
    }
    let (evals, evecs) = jacobi_eigen(cov, dim);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| evals[j].partial_cmp(&evals[i]).unwrap());
    let mut components = [vec![0.0; dim], vec![0.0; dim]];
    for (slot, &idx) in components.iter_mut().zip(order.iter().take(2)) {
        slot.copy_from_slice(&evecs[idx * dim..(idx + 1) * dim]);
        let peak = slot
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.abs().partial_cmp(&b.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        if slot[peak] < 0.0 {
            for v in slot.iter_mut() {
                *v = -*v;
            }
        }
    }

    let mut coords = Vec::with_capacity(total);
    let mut sq_total = 0.0;
    let mut sq_proj = 0.0;
    for row in x.chunks_exact(dim) {
        let px: f64 = row.iter().zip(&components[0]).map(|(a, b)| a * b).sum();
        let py: f64 = row.iter().zip(&components[1]).map(|(a, b)| a * b).sum();
        coords.push((px, py));
        sq_total += row.iter().map(|v| v * v).sum::<f64>();
        sq_proj += px * px + py * py;
    }
    let reconstruction_error = (sq_total - sq_proj).max(0.0) / total as f64;

    let mut domains = Vec::with_capacity(total);
    let mut classes = Vec::with_capacity(total);
    for g in groups {
        domains.extend(std::iter::repeat_n(g.domain.clone(), g.samples.shape()[0]));
        classes.extend_from_slice(&g.labels);
    }
    Ok(PcaEmbedding { coords, domains, classes, reconstruction_error })
}

/// Project and write a CSV with columns x, y, domain, class.
pub fn pca_embed_export(groups: &[EmbedGroup], path: &Path) -> EvalResult<PcaEmbedding> {
    let emb = pca_embed(groups)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "x,y,domain,class")?;
    for (i, (x, y)) in emb.coords.iter().enumerate() {
        writeln!(f, "{x},{y},{},{}", emb.domains[i], emb.classes[i])?;
    }
    Ok(emb)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(data: Vec<f64>, n: usize, d: usize) -> EmbedGroup {
        EmbedGroup {
            samples: Tensor::from_vec(&[n, d], data).unwrap(),
            domain: "a".into(),
            labels: vec![0; n],
        }
    }

    #[test]
    fn rank_one_data_has_flat_second_coordinate() {
        let dir = [3.0, 4.0, 0.0];
        let data: Vec<f64> = (0..12).flat_map(|i| dir.iter().map(move |&v| v * i as f64)).collect();
        let emb = pca_embed(&[group(data, 12, 3)]).unwrap();
        for &(_, y) in &emb.coords {
            assert!(y.abs() < 1e-8, "{y}");
        }
        assert!(emb.reconstruction_error < 1e-16);
    }

    #[test]
    fn row_count_preserved_and_sign_fixed() {
        let data = vec![1.0, 0.0, -1.0, 0.0, 2.0, 0.5, -2.0, -0.5];
        let emb = pca_embed(&[group(data, 4, 2)]).unwrap();
        assert_eq!(emb.coords.len(), 4);
        // With the largest-entry-positive convention the dominant
        // direction points along +x, so the largest projection is on the
        // sample with the largest +x value.
        let max = emb.coords.iter().cloned().fold(f64::NEG_INFINITY, |m, (x, _)| m.max(x));
        assert!(max > 0.0);
    }
}
