//! A self-contained differentiable language for finite element variational
//! forms, extended with *external operators* — foreign functions such as
//! neural networks that compose with symbolic differentiation — plus a small
//! P1 finite element kernel and discrete-adjoint machinery for
//! PDE-constrained inversion.
//!
//! The crate is organised as:
//!
//! - [`symbolic`]: immutable expression trees and multilinear forms;
//! - [`extop`]: the external-operator node, the implementation protocol it
//!   delegates to, and a pointwise MLP implementation with backpropagation;
//! - [`autodiff`]: Gateaux differentiation of forms (including the external
//!   operator chain rule), `adjoint` and `action`;
//! - [`fem`]: meshes, P1 assembly of 0/1/2-forms, quadrature, and linear /
//!   nonlinear solvers;
//! - [`inverse`]: the wave-equation forward model, a purpose-built tape for
//!   discrete-adjoint gradients, reduced functionals, a Taylor-test
//!   verification harness, and an L-BFGS minimiser.

pub mod autodiff;
pub mod error;
pub mod extop;
pub mod fem;
pub mod inverse;
pub mod symbolic;

pub use error::{Error, Result};
