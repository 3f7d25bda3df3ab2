//! Neural network primitives with hand-written backward passes, the Adam
//! optimiser, a finite-difference gradient checker and parameter checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod loss;
pub mod ops;
pub mod param;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, manifest_path, save_checkpoint, Checkpoint};
pub use gradcheck::grad_check;
pub use loss::{argmax_rows, cross_entropy, mse, softmax_rows};
pub use ops::*;
pub use param::{Dense, Param};
