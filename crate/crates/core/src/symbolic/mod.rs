//! Symbolic representation of finite element expressions and forms.

pub mod expr;
pub mod form;
pub mod printer;
pub mod space;

pub use expr::{constant, coordinate, grad, inner, negate, product, sum, Expr, Shape};
pub(crate) use expr::nodal_scale;
pub use form::{dx, CoargSlot, Form, FormTerm, Integral, Measure, OperatorTerm};
pub use printer::{expr_to_string, form_to_string};
pub use space::{Argument, Coefficient, DomainId, ElementFamily, FunctionSpace};
