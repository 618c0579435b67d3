//! Numerical evaluation of external operator nodes.
//!
//! Operand expressions are evaluated *at dof nodes* (a coefficient
//! contributes its dof values; sums and products act pointwise per node)
//! and the resulting value slices are handed to the registered
//! implementation. Derivative nodes route to the implementation's Jacobian
//! or vjp entry points.

use crate::error::{Error, Result};
use crate::extop::node::ExternalOperatorNode;
use crate::extop::registry::lookup_impl;
use crate::symbolic::expr::Expr;
use crate::symbolic::space::Coefficient;

/// Source of dof values for coefficients; implemented by `fem::Bindings`.
pub trait CoefficientValues {
    fn values(&self, c: &Coefficient) -> Option<&[f64]>;
}

impl CoefficientValues for std::collections::BTreeMap<u64, Vec<f64>> {
    fn values(&self, c: &Coefficient) -> Option<&[f64]> {
        self.get(&c.id()).map(|v| v.as_slice())
    }
}

/// Nodal value of an expression: either uniform over all nodes or one value
/// per node.
#[derive(Debug, Clone)]
pub(crate) enum NodalVal {
    Uniform(f64),
    PerNode(Vec<f64>),
}

impl NodalVal {
    pub(crate) fn materialize(self, len: usize) -> Result<Vec<f64>> {
        match self {
            NodalVal::Uniform(v) => Ok(vec![v; len]),
            NodalVal::PerNode(v) => {
                if v.len() != len {
                    return Err(Error::LengthMismatch(format!(
                        "nodal vector has length {}, expected {len}",
                        v.len()
                    )));
                }
                Ok(v)
            }
        }
    }

    pub(crate) fn len(&self) -> Option<usize> {
        match self {
            NodalVal::Uniform(_) => None,
            NodalVal::PerNode(v) => Some(v.len()),
        }
    }

    fn zip(self, other: NodalVal, f: impl Fn(f64, f64) -> f64) -> Result<NodalVal> {
        Ok(match (self, other) {
            (NodalVal::Uniform(a), NodalVal::Uniform(b)) => NodalVal::Uniform(f(a, b)),
            (NodalVal::Uniform(a), NodalVal::PerNode(b)) => {
                NodalVal::PerNode(b.into_iter().map(|b| f(a, b)).collect())
            }
            (NodalVal::PerNode(a), NodalVal::Uniform(b)) => {
                NodalVal::PerNode(a.into_iter().map(|a| f(a, b)).collect())
            }
            (NodalVal::PerNode(a), NodalVal::PerNode(b)) => {
                if a.len() != b.len() {
                    return Err(Error::LengthMismatch(format!(
                        "nodal vectors of length {} and {}",
                        a.len(),
                        b.len()
                    )));
                }
                NodalVal::PerNode(a.into_iter().zip(b).map(|(a, b)| f(a, b)).collect())
            }
        })
    }
}

/// Evaluate an expression pointwise at dof nodes. Supports the operand
/// sublanguage: coefficients, constants, sums, products, inner products of
/// scalars, negation, and nested (underived) external operators. An
/// optional `(argument number, value)` pair substitutes a uniform value for
/// an argument, which is how directions linear in an argument are
/// decomposed for assembly.
pub(crate) fn nodal_eval(
    expr: &Expr,
    values: &impl CoefficientValues,
    arg_subst: Option<(u32, f64)>,
) -> Result<NodalVal> {
    match expr {
        Expr::Constant(c) => Ok(NodalVal::Uniform(c.value())),
        Expr::Coefficient(c) => match values.values(c) {
            Some(v) => Ok(NodalVal::PerNode(v.to_vec())),
            None => Err(Error::UnboundCoefficient(c.display_name())),
        },
        Expr::Argument(a) => match arg_subst {
            Some((number, v)) if a.number == number => Ok(NodalVal::Uniform(v)),
            _ => Err(Error::UnsupportedOperand(format!(
                "argument {} inside an operand cannot be evaluated at nodes",
                a.number
            ))),
        },
        Expr::Sum(a, b) => nodal_eval(a, values, arg_subst)?
            .zip(nodal_eval(b, values, arg_subst)?, |a, b| a + b),
        Expr::Product(a, b) | Expr::Inner(a, b) => nodal_eval(a, values, arg_subst)?
            .zip(nodal_eval(b, values, arg_subst)?, |a, b| a * b),
        Expr::Negate(a) => nodal_eval(a, values, arg_subst)?.zip(NodalVal::Uniform(-1.0), |a, s| a * s),
        Expr::External(node) if node.total_derivative_order() == 0 => {
            Ok(NodalVal::PerNode(evaluate(node, values)?))
        }
        other => Err(Error::UnsupportedOperand(format!(
            "{other:?} cannot be evaluated at dof nodes"
        ))),
    }
}

/// Materialised operand values for a node, with uniform operands broadcast
/// to the length of their neighbours.
pub(crate) fn operand_values(
    node: &ExternalOperatorNode,
    values: &impl CoefficientValues,
) -> Result<Vec<Vec<f64>>> {
    let raw: Vec<NodalVal> = node
        .operands()
        .map(|op| nodal_eval(op, values, None))
        .collect::<Result<_>>()?;
    let len = raw.iter().find_map(|v| v.len());
    raw.into_iter()
        .map(|v| match (&v, len) {
            (NodalVal::Uniform(_), Some(n)) => v.materialize(n),
            (NodalVal::Uniform(_), None) => Err(Error::UnsupportedOperand(
                "all operands are constants; operand length is undetermined".into(),
            )),
            (NodalVal::PerNode(p), _) => {
                let n = p.len();
                v.materialize(n)
            }
        })
        .collect()
}

/// Evaluate an underived node (`derivative_multi_index = 0`) into dof values
/// on the result space.
pub fn evaluate(
    node: &ExternalOperatorNode,
    values: &impl CoefficientValues,
) -> Result<Vec<f64>> {
    if node.total_derivative_order() != 0 {
        return Err(Error::HigherDerivativeUnsupported(
            node.total_derivative_order(),
        ));
    }
    let implementation = lookup_impl(node.impl_id)?;
    let ops = operand_values(node, values)?;
    let slices: Vec<&[f64]> = ops.iter().map(|v| v.as_slice()).collect();
    implementation.eval(&slices)
}

fn single_derivative_index(node: &ExternalOperatorNode) -> Result<usize> {
    let order = node.total_derivative_order();
    if order != 1 {
        return Err(Error::HigherDerivativeUnsupported(order));
    }
    Ok(node
        .multi_index()
        .iter()
        .position(|&m| m == 1)
        .expect("order 1 implies one unit entry"))
}

/// Forward derivative action: `J_i · direction` for a node with multi-index
/// `e_i`, where `direction` holds dof values in operand `i`'s space.
pub fn evaluate_derivative(
    node: &ExternalOperatorNode,
    values: &impl CoefficientValues,
    direction: &[f64],
) -> Result<Vec<f64>> {
    let index = single_derivative_index(node)?;
    let implementation = lookup_impl(node.impl_id)?;
    let ops = operand_values(node, values)?;
    let slices: Vec<&[f64]> = ops.iter().map(|v| v.as_slice()).collect();
    implementation.jac_operand(index, &slices)?.apply(direction)
}

/// Adjoint derivative action: `J_iᵀ · cotangent`, living in operand `i`'s
/// (dual) space. For network parameters this is backpropagation.
pub fn evaluate_adjoint_derivative(
    node: &ExternalOperatorNode,
    values: &impl CoefficientValues,
    cotangent: &[f64],
) -> Result<Vec<f64>> {
    let index = single_derivative_index(node)?;
    let implementation = lookup_impl(node.impl_id)?;
    let ops = operand_values(node, values)?;
    let slices: Vec<&[f64]> = ops.iter().map(|v| v.as_slice()).collect();
    implementation.vjp(index, &slices, cotangent)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::sync::Arc;

    use super::*;
    use crate::extop::node::external_derivative;
    use crate::extop::registry::{register_impl, IdentityOperator};
    use crate::symbolic::expr::product;
    use crate::symbolic::space::{Argument, DomainId, FunctionSpace};

    fn bindings(pairs: &[(&Coefficient, Vec<f64>)]) -> BTreeMap<u64, Vec<f64>> {
        pairs.iter().map(|(c, v)| (c.id(), v.clone())).collect()
    }

    #[test]
    fn identity_evaluation_copies_values() {
        let dom = DomainId::fresh(1);
        let v = FunctionSpace::lagrange(dom, 1);
        let c = Coefficient::labeled(v, "c");
        let id = register_impl(Arc::new(IdentityOperator));
        let node = ExternalOperatorNode::new(vec![Expr::from(&c)], v, id).unwrap();
        let vals = bindings(&[(&c, vec![1.0, 2.0, 3.0])]);
        assert_eq!(evaluate(&node, &vals).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn unbound_coefficient_is_reported() {
        let dom = DomainId::fresh(1);
        let v = FunctionSpace::lagrange(dom, 1);
        let c = Coefficient::labeled(v, "c");
        let id = register_impl(Arc::new(IdentityOperator));
        let node = ExternalOperatorNode::new(vec![Expr::from(&c)], v, id).unwrap();
        let vals: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        assert!(matches!(
            evaluate(&node, &vals),
            Err(Error::UnboundCoefficient(_))
        ));
    }

    #[test]
    fn unknown_implementation_is_reported() {
        let dom = DomainId::fresh(1);
        let v = FunctionSpace::lagrange(dom, 1);
        let c = Coefficient::labeled(v, "c");
        let node = ExternalOperatorNode::new(
            vec![Expr::from(&c)],
            v,
            crate::extop::node::ImplId::from_raw(u64::MAX - 1),
        )
        .unwrap();
        let vals = bindings(&[(&c, vec![1.0])]);
        assert!(matches!(
            evaluate(&node, &vals),
            Err(Error::UnknownImplementation(_))
        ));
    }

    #[test]
    fn identity_adjoint_derivative_returns_cotangent() {
        let dom = DomainId::fresh(1);
        let v = FunctionSpace::lagrange(dom, 1);
        let c = Coefficient::labeled(v, "c");
        let id = register_impl(Arc::new(IdentityOperator));
        let node = ExternalOperatorNode::new(vec![Expr::from(&c)], v, id).unwrap();
        let dn = external_derivative(&node, 0, &Argument::new(v, 1)).unwrap();
        let vals = bindings(&[(&c, vec![1.0, 2.0])]);
        let y = vec![5.0, -3.0];
        assert_eq!(evaluate_adjoint_derivative(&dn, &vals, &y).unwrap(), y);
    }

    #[test]
    fn higher_derivatives_are_rejected() {
        let dom = DomainId::fresh(1);
        let v = FunctionSpace::lagrange(dom, 1);
        let c = Coefficient::labeled(v, "c");
        let id = register_impl(Arc::new(IdentityOperator));
        let node = ExternalOperatorNode::new(vec![Expr::from(&c)], v, id).unwrap();
        let d1 = external_derivative(&node, 0, &Argument::new(v, 1)).unwrap();
        let d2 = external_derivative(&d1, 0, &Argument::new(v, 2)).unwrap();
        let vals = bindings(&[(&c, vec![1.0])]);
        assert!(matches!(
            evaluate_derivative(&d2, &vals, &[1.0]),
            Err(Error::HigherDerivativeUnsupported(2))
        ));
    }

    #[test]
    fn compound_operands_evaluate_pointwise() {
        let dom = DomainId::fresh(1);
        let v = FunctionSpace::lagrange(dom, 1);
        let c = Coefficient::labeled(v, "c");
        let id = register_impl(Arc::new(IdentityOperator));
        // N(2 * c): operand is a compound expression evaluated per node.
        let operand = product(2.0, &c).unwrap();
        let node = ExternalOperatorNode::new(vec![operand], v, id).unwrap();
        let vals = bindings(&[(&c, vec![1.0, -2.0, 0.5])]);
        assert_eq!(evaluate(&node, &vals).unwrap(), vec![2.0, -4.0, 1.0]);
    }
}
