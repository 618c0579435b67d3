//! The symbolic external-operator node.
//!
//! An `ExternalOperatorNode` stands for a foreign operator `N(u_1, ..., u_k)`
//! mapping operand fields to a result space `X`. The node records how many
//! times it has been differentiated with respect to each operand (the
//! derivative multi-index) together with the direction of each derivative.
//! Numerical behaviour is delegated to a registered implementation.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::symbolic::expr::{Expr, Shape};
use crate::symbolic::space::{Argument, Coefficient, FunctionSpace};

/// Handle into the operator implementation registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ImplId(u64);

impl ImplId {
    pub fn from_raw(raw: u64) -> Self {
        ImplId(raw)
    }

    pub fn raw(&self) -> u64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExternalOperatorNode {
    operands: Vec<Arc<Expr>>,
    pub result_space: FunctionSpace,
    derivative_multi_index: Vec<u32>,
    /// One entry per derivative taken: the operand index and the direction.
    /// Directions are arguments in the common case, but chain rule through a
    /// compound operand can make them general expressions.
    directions: Vec<(usize, Arc<Expr>)>,
    pub impl_id: ImplId,
}

impl ExternalOperatorNode {
    /// A fresh, underived operator node `N(operands)` with values in
    /// `result_space`.
    pub fn new(
        operands: Vec<Expr>,
        result_space: FunctionSpace,
        impl_id: ImplId,
    ) -> Result<Self> {
        if operands.is_empty() {
            return Err(Error::ShapeMismatch(
                "an external operator needs at least one operand".into(),
            ));
        }
        for op in &operands {
            if let Some(dom) = op.domain() {
                if dom != result_space.domain {
                    return Err(Error::DomainMismatch);
                }
            }
        }
        let count = operands.len();
        Ok(ExternalOperatorNode {
            operands: operands.into_iter().map(Arc::new).collect(),
            result_space,
            derivative_multi_index: vec![0; count],
            directions: Vec::new(),
            impl_id,
        })
    }

    pub fn operand_count(&self) -> usize {
        self.operands.len()
    }

    pub fn operand(&self, index: usize) -> Result<&Expr> {
        self.operands
            .get(index)
            .map(|e| e.as_ref())
            .ok_or(Error::IndexOutOfRange {
                index,
                count: self.operands.len(),
            })
    }

    pub fn operands(&self) -> impl Iterator<Item = &Expr> {
        self.operands.iter().map(|e| e.as_ref())
    }

    pub fn multi_index(&self) -> &[u32] {
        &self.derivative_multi_index
    }

    pub fn total_derivative_order(&self) -> u32 {
        self.derivative_multi_index.iter().sum()
    }

    /// Differentiation events in the order they were taken.
    pub fn direction_pairs(&self) -> impl Iterator<Item = (usize, &Expr)> {
        self.directions.iter().map(|(i, d)| (*i, d.as_ref()))
    }

    /// The accumulated directions, most recent last.
    pub fn extra_arguments(&self) -> Vec<&Expr> {
        self.directions.iter().map(|(_, d)| d.as_ref()).collect()
    }

    pub fn as_expr(&self) -> Expr {
        Expr::External(self.clone())
    }

    /// Internal derivative constructor used by the chain rule: increments
    /// `derivative_multi_index[index]` and records `direction`, which may be
    /// an arbitrary expression (the inner derivative of a compound operand).
    pub(crate) fn with_derivative_expr(&self, index: usize, direction: Expr) -> Result<Self> {
        if index >= self.operands.len() {
            return Err(Error::IndexOutOfRange {
                index,
                count: self.operands.len(),
            });
        }
        let operand = self.operands[index].as_ref();
        if direction.shape() != operand.shape() {
            return Err(Error::SpaceMismatch(format!(
                "derivative direction has shape {:?} but operand {} has shape {:?}",
                direction.shape(),
                index,
                operand.shape()
            )));
        }
        let mut node = self.clone();
        node.derivative_multi_index[index] += 1;
        node.directions.push((index, Arc::new(direction)));
        Ok(node)
    }

    /// Replace the direction in slot `slot` (differentiation-event order)
    /// by another expression of the same shape; used when a direction is
    /// itself differentiated.
    pub(crate) fn replace_direction_slot(&mut self, slot: usize, direction: Expr) -> Result<()> {
        let (_, old) = self.directions.get(slot).ok_or(Error::IndexOutOfRange {
            index: slot,
            count: self.directions.len(),
        })?;
        if direction.shape() != old.shape() {
            return Err(Error::SpaceMismatch(
                "replacement direction has a different shape".into(),
            ));
        }
        self.directions[slot].1 = Arc::new(direction);
        Ok(())
    }

    /// Substitute the stored operand and direction expressions through `f`.
    /// Used by form transformations (`action`, `replace`).
    pub(crate) fn map_subexpressions(
        &self,
        f: &mut impl FnMut(&Expr) -> Result<Expr>,
    ) -> Result<Self> {
        let mut node = self.clone();
        node.operands = self
            .operands
            .iter()
            .map(|e| f(e).map(Arc::new))
            .collect::<Result<_>>()?;
        node.directions = self
            .directions
            .iter()
            .map(|(i, d)| f(d).map(|d| (*i, Arc::new(d))))
            .collect::<Result<_>>()?;
        Ok(node)
    }
}

/// The Gateaux derivative of `node` with respect to operand `index` in the
/// direction of a fresh argument: the multi-index entry is incremented and
/// the direction appended. Evaluation routes through the implementation's
/// derivative entry points.
pub fn external_derivative(
    node: &ExternalOperatorNode,
    index: usize,
    direction: &Argument,
) -> Result<ExternalOperatorNode> {
    if index >= node.operand_count() {
        return Err(Error::IndexOutOfRange {
            index,
            count: node.operand_count(),
        });
    }
    let operand = node.operand(index)?;
    if let Expr::Coefficient(c) = operand {
        if direction.space != c.space {
            return Err(Error::SpaceMismatch(format!(
                "direction space differs from the space of operand {index}"
            )));
        }
    } else if direction_shape(direction) != operand.shape() {
        return Err(Error::SpaceMismatch(format!(
            "direction shape differs from the shape of operand {index}"
        )));
    }
    node.with_derivative_expr(index, Expr::Argument(direction.clone()))
}

fn direction_shape(a: &Argument) -> Shape {
    if a.space.value_size == 1 {
        Shape::Scalar
    } else {
        Shape::Vector(a.space.value_size as usize)
    }
}

/// Derivative of `node` with respect to a coefficient that may or may not be
/// one of its operands; returns `None` (a symbolic zero) when the node does
/// not depend on it.
pub(crate) fn operand_index_of(node: &ExternalOperatorNode, c: &Coefficient) -> Option<usize> {
    node.operands()
        .position(|op| matches!(op, Expr::Coefficient(oc) if oc == c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::space::DomainId;

    fn setup() -> (FunctionSpace, Coefficient, Coefficient, ImplId) {
        let dom = DomainId::fresh(1);
        let v = FunctionSpace::lagrange(dom, 1);
        let u = Coefficient::labeled(v, "u");
        let m = Coefficient::labeled(v, "m");
        (v, u, m, ImplId::from_raw(u64::MAX))
    }

    #[test]
    fn derivative_bookkeeping() {
        let (v, u, m, id) = setup();
        let node =
            ExternalOperatorNode::new(vec![Expr::from(&u), Expr::from(&m)], v, id).unwrap();
        assert_eq!(node.multi_index(), &[0, 0]);

        let uhat = Argument::new(v, 2);
        let dn_du = external_derivative(&node, 0, &uhat).unwrap();
        assert_eq!(dn_du.multi_index(), &[1, 0]);
        assert_eq!(dn_du.extra_arguments().len(), 1);

        let mhat = Argument::new(v, 3);
        let mixed = external_derivative(&dn_du, 1, &mhat).unwrap();
        assert_eq!(mixed.multi_index(), &[1, 1]);
        assert_eq!(mixed.extra_arguments().len(), 2);
        assert_eq!(mixed.total_derivative_order(), 2);
    }

    #[test]
    fn out_of_range_operand() {
        let (v, u, _, id) = setup();
        let node = ExternalOperatorNode::new(vec![Expr::from(&u)], v, id).unwrap();
        let dir = Argument::new(v, 2);
        assert!(matches!(
            external_derivative(&node, 1, &dir),
            Err(Error::IndexOutOfRange { index: 1, count: 1 })
        ));
    }

    #[test]
    fn direction_space_must_match() {
        let (v, u, m, id) = setup();
        let node =
            ExternalOperatorNode::new(vec![Expr::from(&u), Expr::from(&m)], v, id).unwrap();
        let wrong = Argument::new(FunctionSpace::real(v.domain, 3), 2);
        assert!(matches!(
            external_derivative(&node, 0, &wrong),
            Err(Error::SpaceMismatch(_))
        ));
    }
}
