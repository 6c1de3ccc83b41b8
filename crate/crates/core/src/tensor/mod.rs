//! Dense linear algebra, differentiable layers, optimizers, initialisation
//! and checkpoint files.

pub mod checkpoint;
pub mod init;
pub mod layers;
pub mod matrix;
pub mod optim;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, NamedTensor};
pub use init::{he_init, he_normal};
pub use layers::{relu, relu_backward, LinearLayer, Mlp};
pub use matrix::Matrix;
pub use optim::{cosine_lr, decayed_lr, OptimizerKind, OptimizerState, ParamMut};
