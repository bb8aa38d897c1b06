//! Reverse-mode differentiation over dense `f64` matrices, plus Adam.

mod adam;
mod gradcheck;
mod tape;

pub use adam::Adam;
pub use gradcheck::grad_check;
pub use tape::{sparse_matmul, Gradients, Tape, Var};
