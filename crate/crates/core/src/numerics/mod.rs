//! Dense tensors, reverse-mode differentiation, and the optimizer.

pub mod functional;
pub mod optim;
pub mod tape;
pub mod tensor;

pub use functional::{bce, clamp_prob, entropy_binary, sigmoid, PROB_CLAMP};
pub use optim::{AdagradConfig, AdagradState};
pub use tape::{cosine, Graph, NodeId};
pub use tensor::Tensor;
