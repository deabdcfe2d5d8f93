//! Structured loss, the margin QP and cutting-plane training.

pub mod loss;
pub mod qp;
pub mod trainer;

pub use loss::{hamming_projected, loss, LossValue};
pub use qp::{project_concave, solve_qp, Cone, QpReport, QpState, SparseRow};
pub use trainer::{find_mvc, joint_train_multi, train, IterationLog, Mvc, TrainConfig, TrainerState, TrainingSample};
