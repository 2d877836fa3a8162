//! Dense tensors and a tape-based reverse-mode autodiff engine.
//!
//! The op set is deliberately small: it covers dense layers, GRU cells,
//! hyper-network heads and the losses used by the learner crate. Broadcasting
//! is limited to repeating the right-hand operand over leading batch axes.

mod checkpoint;
pub mod gradcheck;
mod error;
mod graph;
pub mod ops;
mod params;
mod sparse;
mod tensor;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use error::TensorError;
pub use graph::{Gradients, Graph, NodeId};
pub use params::{uniform_init, ParamId, ParamStore};
pub use sparse::SparseRows;
pub use tensor::{Scalar, Tensor};
