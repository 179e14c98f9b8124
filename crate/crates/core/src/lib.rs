//! Physics-informed neural networks for PDEs driven by point sources.
//!
//! The delta forcing is replaced by a narrow probability density, the
//! residual loss is split between the region around the source and the rest
//! of the domain, loss terms are balanced by trainable variances with a lower
//! bound, and the solution is represented by a multi-scale sine network.
//! Analytic series and an FDTD solver provide the reference fields.

pub mod autodiff;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod loss;
pub mod net;
pub mod problems;
pub mod reference;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use net::{Activation, MsSirenNet, NetConfig};
pub use tensor::Tensor;
