//! Reverse-mode differentiation over dense `f64` matrices, flat parameter
//! vectors with a layer registry, and gradient-difference Hessian products.

mod check;
mod matrix;
mod params;
mod tape;

pub use check::{finite_diff_grad, hvp, hvp_step, FnObjective, Objective};
pub use matrix::Matrix;
pub use params::{ParamEntry, ParamLayout, ParamVector};
pub use tape::{Gradients, Tape, Var};
