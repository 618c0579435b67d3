//! External operators: foreign functions embedded in the form language.
//!
//! The symbolic side is [`ExternalOperatorNode`]; the numerical side is the
//! [`OperatorImpl`] protocol plus the registry that connects the two. A
//! multilayer perceptron applied pointwise at dofs
//! ([`PointwiseNeuralOperator`]) is the concrete implementation shipped with
//! the crate.

mod eval;
mod mlp;
mod node;
mod pointwise;
mod registry;

pub use eval::{
    evaluate, evaluate_adjoint_derivative, evaluate_derivative, CoefficientValues,
};
pub(crate) use eval::{nodal_eval, operand_values, NodalVal};
pub use mlp::{param_count, pretrain, MlpModel, WEIGHTS_MAGIC};
pub use node::{external_derivative, ExternalOperatorNode, ImplId};
pub(crate) use node::operand_index_of;
pub use pointwise::{range_penalty, PointwiseNeuralOperator};
pub use registry::{register_impl, lookup_impl, IdentityOperator, LinearMap, OperatorImpl};
