//! Network definitions (generators and tri-head discriminators), parameter
//! initialization, the Adam optimizer, and the learning-rate schedule.

mod adam;
mod checkpoint;
mod init;
mod nets;

pub use adam::{AdamState, ADAM_BETA1, ADAM_BETA2};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError, CheckpointMeta};
pub use init::xavier_uniform;
pub use nets::{
    BoundClassifier, BoundDiscriminator, BoundGenerator, Classifier, DataKind, Discriminate,
    NetConfig, TriHeadDiscriminator, Generator, LEAKY_SLOPE,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error(transparent)]
    Autodiff(#[from] crate::autodiff::AdError),
    #[error("adam: parameter/gradient count or shape mismatch at index {index}")]
    AdamShape { index: usize },
    #[error("lr_schedule: step {step} outside [0, {total}]")]
    ScheduleRange { step: usize, total: usize },
    #[error("lr_schedule: total_steps must be positive")]
    ScheduleEmpty,
    #[error("{0}")]
    BadInput(String),
}

pub type NnResult<T> = Result<T, NnError>;

/// Base learning rate at step 0.
pub const LR_START: f64 = 0.002;
/// Learning rate at the final step.
pub const LR_END: f64 = 0.0002;

/// Linear decay from [`LR_START`] at step 0 to [`LR_END`] at `total_steps`.
pub fn lr_schedule(step: usize, total_steps: usize) -> NnResult<f64> {
    if total_steps == 0 {
        return Err(NnError::ScheduleEmpty);
    }
    if step > total_steps {
        return Err(NnError::ScheduleRange { step, total: total_steps });
    }
    let f = step as f64 / total_steps as f64;
    // Convex form so both endpoints are exact.
    Ok(LR_START * (1.0 - f) + LR_END * f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints_and_midpoint() {
        assert_eq!(lr_schedule(0, 100).unwrap(), 0.002);
        assert_eq!(lr_schedule(100, 100).unwrap(), 0.0002);
        assert!((lr_schedule(50, 100).unwrap() - 0.0011).abs() < 1e-15);
    }

    #[test]
    fn schedule_rejects_out_of_range() {
        assert!(lr_schedule(101, 100).is_err());
        assert!(lr_schedule(0, 0).is_err());
    }
}
