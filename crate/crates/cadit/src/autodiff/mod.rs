//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! The op set is exactly what the translation networks and losses need:
//! elementwise arithmetic, matmul / fully-connected, strided conv and its
//! transpose, the usual activations, softmax, full reductions, concat,
//! reshape, and pairwise squared distances.
//!
//! Design notes, fixed across the crate:
//! - double precision everywhere;
//! - no broadcasting except scalar-with-tensor ([`Var::smul`] /
//!   [`Var::sadd`]); shape mismatches are loud errors;
//! - `relu`/`leaky_relu` take the negative-side slope at 0, `abs` takes 0;
//! - convolutions pad with zeros; "same" padding for stride 1 and
//!   floor-division output sizes for stride 2;
//! - a [`Tape`] belongs to one thread and one training step; plain
//!   [`Tensor`] values are immutable and freely shareable.

mod grad_check;
mod kernels;
mod tape;
mod tensor;

pub use grad_check::{grad_check, grad_check_report, GradCheckReport};
pub use kernels::{gemm, softmax_rows as softmax_into, ConvGeom};
pub use tape::{Tape, Var};
pub use tensor::{AdError, AdResult, Tensor};

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::from_vec(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let tape = Tape::new();
        let i2 = tape.constant(t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]));
        let a = tape.constant(t(&[2, 2], &[3.0, -1.5, 2.0, 0.25]));
        let y = i2.matmul(a).unwrap();
        assert_eq!(y.value().data(), a.value().data());
    }

    #[test]
    fn conv2d_delta_kernel_is_identity() {
        let tape = Tape::new();
        let x = tape.constant(t(&[1, 1, 4, 4], &(0..16).map(|i| i as f64).collect::<Vec<_>>()));
        // 3x3 kernel with a 1 in the center, stride 1, same padding.
        let w = tape.constant(t(&[1, 1, 3, 3], &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]));
        let y = x.conv2d(w, None, 1, 1).unwrap();
        assert_eq!(y.value().data(), x.value().data());
    }

    #[test]
    fn softmax_uniform() {
        let tape = Tape::new();
        let x = tape.constant(t(&[1, 4], &[0.0, 0.0, 0.0, 0.0]));
        let y = x.softmax().unwrap();
        for &v in y.value().data() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn backward_of_sum_of_squares() {
        let tape = Tape::new();
        let x = tape.leaf(t(&[1], &[3.0]));
        let loss = x.mul(x).unwrap().sum().unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(x.grad().unwrap().data(), &[6.0]);
    }

    #[test]
    fn l1_subgradient_signs() {
        let tape = Tape::new();
        let x = tape.leaf(t(&[4], &[1.0, -2.0, 5.0, 5.0]));
        let y = tape.constant(t(&[4], &[0.0, 0.0, 6.0, 5.0]));
        let loss = x.sub(y).unwrap().abs().unwrap().mean().unwrap();
        tape.backward(loss).unwrap();
        // mean(|x-y|): +-1/n by sign, 0 at ties.
        assert_eq!(x.grad().unwrap().data(), &[0.25, -0.25, -0.25, 0.0]);
    }

    #[test]
    fn gradient_accumulates_across_leaf_reuse() {
        let tape = Tape::new();
        let x = tape.leaf(t(&[2], &[1.0, 2.0]));
        let a = x.smul(3.0).unwrap().sum().unwrap();
        let b = x.mul(x).unwrap().sum().unwrap();
        let loss = a.add(b).unwrap();
        tape.backward(loss).unwrap();
        // d/dx (3x + x^2) = 3 + 2x
        assert_eq!(x.grad().unwrap().data(), &[5.0, 7.0]);
    }

    #[test]
    fn backward_twice_errors_until_reset() {
        let tape = Tape::new();
        let x = tape.leaf(t(&[1], &[2.0]));
        let loss = x.square().unwrap().sum().unwrap();
        tape.backward(loss).unwrap();
        assert!(matches!(tape.backward(loss), Err(AdError::BackwardTwice)));
        tape.zero_grads();
        assert!(tape.backward(loss).is_ok());
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let tape = Tape::new();
        let x = tape.leaf(t(&[2], &[1.0, 2.0]));
        assert!(matches!(tape.backward(x), Err(AdError::NonScalarLoss { .. })));
    }

    #[test]
    fn shape_mismatch_names_op_and_shapes() {
        let tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[3, 3]));
        let err = a.add(b).unwrap_err().to_string();
        assert!(err.contains("add") && err.contains("[2, 3]") && err.contains("[3, 3]"), "{err}");
    }

    #[test]
    fn non_finite_forward_is_an_error() {
        let tape = Tape::new();
        let x = tape.constant(t(&[1], &[0.0]));
        assert!(matches!(x.log(), Err(AdError::NonFinite { .. })));
    }

    #[test]
    fn composite_conv_chain_matches_finite_differences() {
        let point = t(
            &[1, 1, 4, 4],
            &(0..16).map(|i| ((i * 7 + 3) % 11) as f64 / 5.0 - 1.0).collect::<Vec<_>>(),
        );
        let kernel = t(&[2, 1, 3, 3], &(0..18).map(|i| ((i * 5 + 1) % 13) as f64 / 6.0 - 1.0).collect::<Vec<_>>());
        let err = grad_check(
            move |tape, x| {
                let w = tape.constant(kernel.clone());
                x.conv2d(w, None, 1, 1)?.leaky_relu(0.2)?.mean()
            },
            &point,
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-4, "rel err {err}");
    }

    #[test]
    fn concat_splits_gradient() {
        let tape = Tape::new();
        let a = tape.leaf(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let b = tape.leaf(t(&[2, 1], &[10.0, 20.0]));
        let y = a.concat(b, 1).unwrap();
        assert_eq!(y.shape(), vec![2, 3]);
        assert_eq!(y.value().data(), &[1.0, 2.0, 10.0, 3.0, 4.0, 20.0]);
        let loss = y.mul(y).unwrap().sum().unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(a.grad().unwrap().data(), &[2.0, 4.0, 6.0, 8.0]);
        assert_eq!(b.grad().unwrap().data(), &[20.0, 40.0]);
    }

    #[test]
    fn pairwise_sq_dist_values() {
        let tape = Tape::new();
        let x = tape.constant(t(&[3, 2], &[0.0, 0.0, 3.0, 4.0, 0.0, 1.0]));
        let d = x.pairwise_sq_dist().unwrap().value();
        assert_eq!(d.shape(), &[3, 3]);
        assert_eq!(d.data()[0 * 3 + 1], 25.0);
        assert_eq!(d.data()[1 * 3 + 0], 25.0);
        assert_eq!(d.data()[0 * 3 + 2], 1.0);
        assert_eq!(d.data()[0], 0.0);
    }
}
