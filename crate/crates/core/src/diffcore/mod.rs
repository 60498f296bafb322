//! Deterministic differentiable core: networks, Gaussian likelihoods,
//! reverse-mode gradients and exact meta-gradients through inner steps on
//! the context vector.

pub mod gaussian;
pub mod meta;
pub mod network;
pub mod optim;
pub mod real;

pub use gaussian::{gaussian_nll, GaussianOutput, LogStdBounds};
pub use meta::{
    central_difference, context_grad, context_hvp, grad, grad_at, meta_grad, relative_error, DiffLoss, LossGrad,
    MetaGradMode, MetaGradOutput, QuadraticLoss,
};
pub use network::{
    backward, forward, forward_batch, forward_tape, Activation, ContextVector, Gradient, NetworkShape, ParamVector,
    Tape,
};
pub use optim::Adam;
pub use real::{Dual, Real};
