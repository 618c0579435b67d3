//! Variational forms: sums of cell integrals, plus operator terms.
//!
//! A form is usually a sum of integrals over one domain. An external
//! operator may also stand as a whole form term by itself: viewed as a form
//! it owns an implicit coargument in the dual of its result space, which is
//! what makes `action(adjoint(dN/dm), y)` expressible. The canonical zero
//! form has no terms at all.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::extop::ExternalOperatorNode;
use crate::symbolic::expr::{product, Expr, Shape};
use crate::symbolic::space::{Argument, Coefficient, DomainId, FunctionSpace};

/// Integration measure; only cell integrals are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    Cell,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Integral {
    pub integrand: Arc<Expr>,
    pub measure: Measure,
    pub domain: DomainId,
}

/// The slot for a terminal operator's implicit coargument `v* ∈ X*`:
/// unbound it is an argument with a number like any other; `action` can
/// bind it to a concrete cotangent coefficient.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CoargSlot {
    Unbound { number: u32, space: FunctionSpace },
    Bound { cotangent: Coefficient },
}

/// An external operator used as a whole form term (the scalar-valued view).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OperatorTerm {
    pub node: ExternalOperatorNode,
    pub coargument: CoargSlot,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FormTerm {
    Integral(Integral),
    Operator(OperatorTerm),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Form {
    terms: Vec<FormTerm>,
}

impl Form {
    /// The canonical zero form: no terms.
    pub fn zero() -> Self {
        Form { terms: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// A single cell integral of a scalar integrand over `domain`.
    pub fn integral(integrand: Expr, domain: DomainId) -> Result<Self> {
        if integrand.shape() != Shape::Scalar {
            return Err(Error::ShapeMismatch(format!(
                "integrand must be scalar, got {:?}",
                integrand.shape()
            )));
        }
        if let Some(dom) = integrand.domain() {
            if dom != domain {
                return Err(Error::DomainMismatch);
            }
        }
        // Validate argument consistency once at the boundary.
        let mut args = BTreeMap::new();
        integrand.collect_arguments(&mut args)?;
        Ok(Form {
            terms: vec![FormTerm::Integral(Integral {
                integrand: Arc::new(integrand),
                measure: Measure::Cell,
                domain,
            })],
        })
    }

    /// An external operator as a whole form term, with an unbound coargument
    /// numbered 0 (or above any direction arguments the node carries).
    pub fn from_external(node: ExternalOperatorNode) -> Self {
        let space = node.result_space;
        let number = 0;
        Form {
            terms: vec![FormTerm::Operator(OperatorTerm {
                node,
                coargument: CoargSlot::Unbound { number, space },
            })],
        }
    }

    pub(crate) fn from_terms(terms: Vec<FormTerm>) -> Self {
        Form { terms }
    }

    pub fn terms(&self) -> &[FormTerm] {
        &self.terms
    }

    pub fn integrals(&self) -> impl Iterator<Item = &Integral> {
        self.terms.iter().filter_map(|t| match t {
            FormTerm::Integral(i) => Some(i),
            FormTerm::Operator(_) => None,
        })
    }

    pub fn operator_terms(&self) -> impl Iterator<Item = &OperatorTerm> {
        self.terms.iter().filter_map(|t| match t {
            FormTerm::Operator(o) => Some(o),
            FormTerm::Integral(_) => None,
        })
    }

    pub fn domain(&self) -> Option<DomainId> {
        self.terms.iter().find_map(|t| match t {
            FormTerm::Integral(i) => Some(i.domain),
            FormTerm::Operator(o) => Some(o.node.result_space.domain),
        })
    }

    /// Arguments of the form by number, including operator directions and
    /// unbound coarguments.
    pub fn arguments(&self) -> Result<BTreeMap<u32, Argument>> {
        let mut out = BTreeMap::new();
        for term in &self.terms {
            match term {
                FormTerm::Integral(i) => i.integrand.collect_arguments(&mut out)?,
                FormTerm::Operator(o) => {
                    for op in o.node.operands() {
                        op.collect_arguments(&mut out)?;
                    }
                    for (_, dir) in o.node.direction_pairs() {
                        dir.collect_arguments(&mut out)?;
                    }
                    if let CoargSlot::Unbound { number, space } = &o.coargument {
                        let arg = Argument::new(*space, *number);
                        match out.get(number) {
                            Some(existing) if *existing != arg => {
                                return Err(Error::DuplicateArgumentNumber { number: *number })
                            }
                            _ => {
                                out.insert(*number, arg);
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// The number of distinct argument numbers: 0 for a functional, 1 for a
    /// linear form, 2 for a bilinear form.
    pub fn arity(&self) -> usize {
        self.arguments()
            .expect("argument consistency is validated at construction")
            .len()
    }

    /// Coefficients in ascending id order, deduplicated; operator operands
    /// and bound coarguments are included.
    pub fn coefficients(&self) -> Vec<Coefficient> {
        let mut map = BTreeMap::new();
        for term in &self.terms {
            match term {
                FormTerm::Integral(i) => i.integrand.collect_coefficients(&mut map),
                FormTerm::Operator(o) => {
                    for op in o.node.operands() {
                        op.collect_coefficients(&mut map);
                    }
                    for (_, dir) in o.node.direction_pairs() {
                        dir.collect_coefficients(&mut map);
                    }
                    if let CoargSlot::Bound { cotangent } = &o.coargument {
                        map.entry(cotangent.id()).or_insert_with(|| cotangent.clone());
                    }
                }
            }
        }
        map.into_values().collect()
    }

    /// Sum of two forms on the same domain with the same argument numbers.
    pub fn add(&self, other: &Form) -> Result<Form> {
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        if let (Some(a), Some(b)) = (self.domain(), other.domain()) {
            if a != b {
                return Err(Error::DomainMismatch);
            }
        }
        let left: Vec<u32> = self.arguments()?.into_keys().collect();
        let right: Vec<u32> = other.arguments()?.into_keys().collect();
        if left != right {
            return Err(Error::ArgumentSetMismatch { left, right });
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(Form { terms })
    }

    pub fn sub(&self, other: &Form) -> Result<Form> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Form {
        self.scale(-1.0)
    }

    /// Multiply every integrand by a constant. Scaling by zero yields the
    /// canonical zero form.
    pub fn scale(&self, factor: f64) -> Form {
        if factor == 0.0 {
            return Form::zero();
        }
        if factor == 1.0 {
            return self.clone();
        }
        let terms = self
            .terms
            .iter()
            .map(|t| match t {
                FormTerm::Integral(i) => {
                    let integrand = if factor == -1.0 {
                        Expr::Negate(i.integrand.clone())
                    } else {
                        product(factor, i.integrand.as_ref().clone())
                            .expect("scaling a scalar integrand cannot fail")
                    };
                    FormTerm::Integral(Integral {
                        integrand: Arc::new(integrand),
                        measure: i.measure,
                        domain: i.domain,
                    })
                }
                // Operator terms are linear in the implicit coargument; a
                // scalar multiple is not representable without an integrand,
                // so scaling them is rejected at the type level by panicking
                // loudly rather than silently corrupting semantics.
                FormTerm::Operator(_) => {
                    panic!("scaling a terminal operator term is not supported")
                }
            })
            .collect();
        Form { terms }
    }
}

/// Integrate a scalar expression over the cells of `domain` — the `* dx`
/// of the surface language.
pub fn dx(integrand: Expr, domain: DomainId) -> Result<Form> {
    Form::integral(integrand, domain)
}
