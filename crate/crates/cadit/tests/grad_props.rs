//! Finite-difference verification of every primitive and of the composite
//! network/loss expressions, plus the structural tape properties.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cadit::autodiff::{grad_check, grad_check_report, Tape, Tensor, Var};

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
    Tensor::from_vec(shape, data).unwrap()
}

/// Positive-valued tensor for log/sqrt domains.
fn positive_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
    Tensor::from_vec(shape, data).unwrap()
}

/// Keep kink-prone inputs away from 0 so nothing needs excluding.
fn away_from_zero(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n)
        .map(|_| {
            let v: f64 = rng.random_range(0.05..1.5);
            if rng.random_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    Tensor::from_vec(shape, data).unwrap()
}

fn check_many<F>(name: &str, seeds: std::ops::Range<u64>, mk_point: impl Fn(&mut ChaCha8Rng) -> Tensor, f: F)
where
    F: for<'t> Fn(&'t Tape, Var<'t>, &mut ChaCha8Rng) -> Result<Var<'t>, cadit::autodiff::AdError>,
{
    for seed in seeds {
        let mut r = rng(seed);
        let point = mk_point(&mut r);
        let mut r2 = rng(seed.wrapping_add(10_000));
        let err = grad_check(
            |tape, x| {
                let mut r3 = r2.clone();
                f(tape, x, &mut r3)
            },
            &point,
            STEP,
        )
        .unwrap();
        let _ = &mut r2;
        assert!(err <= TOL, "{name} seed {seed}: rel err {err}");
    }
}

#[test]
fn elementwise_primitives_pass_grad_check() {
    check_many("add", 0..100, |r| random_tensor(&[3, 4], r), |t, x, r| {
        let o = t.constant(random_tensor(&[3, 4], r));
        x.add(o)?.mul(x)?.sum()
    });
    check_many("sub", 0..100, |r| random_tensor(&[3, 4], r), |t, x, r| {
        let o = t.constant(random_tensor(&[3, 4], r));
        x.sub(o)?.square()?.sum()
    });
    check_many("mul", 0..100, |r| random_tensor(&[3, 4], r), |t, x, r| {
        let o = t.constant(random_tensor(&[3, 4], r));
        x.mul(o)?.sum()
    });
    check_many("smul_sadd", 0..100, |r| random_tensor(&[5], r), |_, x, _| {
        x.smul(3.5)?.sadd(-0.75)?.square()?.sum()
    });
}

#[test]
fn activation_primitives_pass_grad_check() {
    check_many("relu", 0..100, |r| away_from_zero(&[4, 3], r), |_, x, _| x.relu()?.sum());
    check_many("leaky_relu", 0..100, |r| away_from_zero(&[4, 3], r), |_, x, _| {
        x.leaky_relu(0.2)?.sum()
    });
    check_many("abs", 0..100, |r| away_from_zero(&[7], r), |_, x, _| x.abs()?.sum());
    check_many("tanh", 0..100, |r| random_tensor(&[6], r), |_, x, _| x.tanh()?.square()?.sum());
    check_many("sigmoid", 0..100, |r| random_tensor(&[6], r), |_, x, _| x.sigmoid()?.square()?.sum());
    check_many("exp", 0..100, |r| random_tensor(&[6], r), |_, x, _| x.exp()?.sum());
    check_many("log", 0..100, |r| positive_tensor(&[6], r), |_, x, _| x.log()?.sum());
    check_many("sqrt", 0..100, |r| positive_tensor(&[6], r), |_, x, _| x.sqrt()?.sum());
    check_many("square", 0..100, |r| random_tensor(&[6], r), |_, x, _| x.square()?.sum());
    check_many("softmax", 0..100, |r| random_tensor(&[4, 5], r), |t, x, r| {
        let w = t.constant(random_tensor(&[4, 5], r));
        x.softmax()?.mul(w)?.sum()
    });
}

#[test]
fn matrix_primitives_pass_grad_check() {
    check_many("matmul_lhs", 0..50, |r| random_tensor(&[3, 4], r), |t, x, r| {
        let o = t.constant(random_tensor(&[4, 2], r));
        x.matmul(o)?.square()?.sum()
    });
    check_many("matmul_rhs", 0..50, |r| random_tensor(&[4, 2], r), |t, x, r| {
        let o = t.constant(random_tensor(&[3, 4], r));
        o.matmul(x)?.square()?.sum()
    });
    check_many("linear_x", 0..34, |r| random_tensor(&[3, 4], r), |t, x, r| {
        let w = t.constant(random_tensor(&[4, 2], r));
        let b = t.constant(random_tensor(&[2], r));
        x.linear(w, b)?.square()?.sum()
    });
    check_many("linear_w", 0..33, |r| random_tensor(&[4, 2], r), |t, x, r| {
        let xin = t.constant(random_tensor(&[3, 4], r));
        let b = t.constant(random_tensor(&[2], r));
        xin.linear(x, b)?.square()?.sum()
    });
    check_many("linear_b", 0..33, |r| random_tensor(&[2], r), |t, x, r| {
        let xin = t.constant(random_tensor(&[3, 4], r));
        let w = t.constant(random_tensor(&[4, 2], r));
        xin.linear(w, x)?.square()?.sum()
    });
}

#[test]
fn reduction_shape_primitives_pass_grad_check() {
    check_many("reduce_sum", 0..100, |r| random_tensor(&[3, 5], r), |_, x, _| {
        x.square()?.sum()
    });
    check_many("reduce_mean", 0..100, |r| random_tensor(&[3, 5], r), |_, x, _| {
        x.square()?.mean()
    });
    check_many("reshape", 0..100, |r| random_tensor(&[2, 6], r), |_, x, _| {
        x.reshape(&[3, 4])?.square()?.sum()
    });
    check_many("concat_a", 0..50, |r| random_tensor(&[3, 2], r), |t, x, r| {
        let o = t.constant(random_tensor(&[3, 4], r));
        x.concat(o, 1)?.square()?.sum()
    });
    check_many("concat_b", 0..50, |r| random_tensor(&[3, 4], r), |t, x, r| {
        let o = t.constant(random_tensor(&[3, 2], r));
        o.concat(x, 1)?.square()?.sum()
    });
    check_many("pairwise_sq_dist", 0..100, |r| random_tensor(&[5, 3], r), |t, x, r| {
        let w = t.constant(random_tensor(&[5, 5], r));
        x.pairwise_sq_dist()?.mul(w)?.sum()
    });
}

#[test]
fn conv_primitives_pass_grad_check() {
    // conv2d wrt input, weight, bias; stride 1 (same) and stride 2.
    for stride in [1usize, 2] {
        let pad = 1usize;
        check_many("conv2d_x", 0..25, |r| random_tensor(&[2, 2, 6, 6], r), move |t, x, r| {
            let w = t.constant(random_tensor(&[3, 2, 3, 3], r));
            let b = t.constant(random_tensor(&[3], r));
            x.conv2d(w, Some(b), stride, pad)?.square()?.sum()
        });
        check_many("conv2d_w", 0..25, |r| random_tensor(&[3, 2, 3, 3], r), move |t, x, r| {
            let xin = t.constant(random_tensor(&[2, 2, 6, 6], r));
            let b = t.constant(random_tensor(&[3], r));
            xin.conv2d(x, Some(b), stride, pad)?.square()?.sum()
        });
        check_many("conv2d_b", 0..25, |r| random_tensor(&[3], r), move |t, x, r| {
            let xin = t.constant(random_tensor(&[2, 2, 6, 6], r));
            let w = t.constant(random_tensor(&[3, 2, 3, 3], r));
            xin.conv2d(w, Some(x), stride, pad)?.square()?.sum()
        });
    }
}

#[test]
fn conv_transpose_primitives_pass_grad_check() {
    for (k, pad) in [(2usize, 0usize), (4, 1)] {
        check_many("convT_x", 0..25, |r| random_tensor(&[2, 3, 4, 4], r), move |t, x, r| {
            let w = t.constant(random_tensor(&[3, 2, k, k], r));
            let b = t.constant(random_tensor(&[2], r));
            x.conv2d_transpose(w, Some(b), 2, pad)?.square()?.sum()
        });
        check_many("convT_w", 0..25, |r| random_tensor(&[3, 2, k, k], r), move |t, x, r| {
            let xin = t.constant(random_tensor(&[2, 3, 4, 4], r));
            let b = t.constant(random_tensor(&[2], r));
            xin.conv2d_transpose(x, Some(b), 2, pad)?.square()?.sum()
        });
        check_many("convT_b", 0..25, |r| random_tensor(&[2], r), move |t, x, r| {
            let xin = t.constant(random_tensor(&[2, 3, 4, 4], r));
            let w = t.constant(random_tensor(&[3, 2, k, k], r));
            xin.conv2d_transpose(w, Some(x), 2, pad)?.square()?.sum()
        });
    }
}

#[test]
fn conv_transpose_is_adjoint_of_conv() {
    // <conv(x), y> == <x, convT(y)> for random x, y. Geometries are
    // stride-compatible: (h + 2 pad - k) divisible by the stride, so the
    // conv reads every input pixel and the transpose restores the size.
    for seed in 0..20u64 {
        let mut r = rng(seed);
        for (stride, pad, k, h, w) in [
            (1usize, 1usize, 3usize, 6usize, 6usize),
            (2, 1, 3, 7, 7),
            (2, 0, 2, 6, 6),
            (2, 1, 4, 6, 6),
        ] {
            let oh = (h + 2 * pad - k) / stride + 1;
            let ow = (w + 2 * pad - k) / stride + 1;
            let x = random_tensor(&[2, 3, h, w], &mut r);
            let wt = random_tensor(&[4, 3, k, k], &mut r);
            let y = random_tensor(&[2, 4, oh, ow], &mut r);

            let tape = Tape::new();
            let xv = tape.constant(x.clone());
            let wv = tape.constant(wt.clone());
            let conv_x = xv.conv2d(wv, None, stride, pad).unwrap().value();

            // convT uses the same weight viewed as (ic=4, oc=3, k, k):
            // transpose the first two axes of wt.
            let mut wt_t = Tensor::zeros(&[4, 3, k, k]);
            wt_t.data_mut().copy_from_slice(wt.data());
            let yv = tape.constant(y.clone());
            let wv_t = tape.constant(wt_t);
            let convt_y = yv.conv2d_transpose(wv_t, None, stride, pad).unwrap().value();
            assert_eq!(convt_y.shape(), x.shape());

            let lhs: f64 = conv_x.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.data().iter().zip(convt_y.data()).map(|(a, b)| a * b).sum();
            assert!(
                (lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()),
                "stride {stride} pad {pad} k {k} seed {seed}: {lhs} vs {rhs}"
            );
        }
    }
}

#[test]
fn softmax_rows_are_distributions() {
    for seed in 0..100u64 {
        let mut r = rng(seed);
        let x = random_tensor(&[6, 7], &mut r);
        let tape = Tape::new();
        let y = tape.constant(x).softmax().unwrap().value();
        for row in y.data().chunks(7) {
            assert!(row.iter().all(|&p| p >= 0.0));
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() <= 1e-12, "row sum {s}");
        }
    }
}

#[test]
fn relu_family_kink_exclusion_engages() {
    // A coordinate whose probe interval straddles the relu kink gets
    // excluded; well-separated coordinates still pass the check.
    let point = Tensor::from_vec(&[4], vec![-1.0, 4e-6, -3e-6, 1.0]).unwrap();
    let report = grad_check_report(|_, x| x.relu()?.sum(), &point, STEP).unwrap();
    assert!(report.excluded.contains(&1) && report.excluded.contains(&2), "{:?}", report.excluded);
    assert!(report.max_rel_err <= TOL);
}
