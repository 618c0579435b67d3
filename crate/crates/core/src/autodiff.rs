//! Source-to-source differentiation and linear transformations of forms.
//!
//! `gateaux_derivative` rewrites a form into its derivative with respect to
//! a coefficient, raising the arity by one. Dependence through an external
//! operator's operands produces a derivative operator node carrying the
//! direction, so the derivative of `u * N(u, m) * v * dx` has exactly the
//! two-term structure `uhat * N * v * dx + u * (dN/du . uhat) * v * dx`.
//! Zero branches are pruned; a derivative that vanishes identically is the
//! canonical zero form.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::extop::{operand_index_of, ExternalOperatorNode};
use crate::symbolic::expr::{grad, inner, negate, product, sum, Expr};
use crate::symbolic::form::{CoargSlot, Form, FormTerm, Integral, OperatorTerm};
use crate::symbolic::space::{Argument, Coefficient};

/// Direction of a Gateaux derivative: a fresh argument (raising arity) or a
/// concrete coefficient (a directional derivative at fixed arity).
#[derive(Debug, Clone)]
pub enum DerivativeDirection {
    Argument(Argument),
    Coefficient(Coefficient),
}

impl DerivativeDirection {
    fn as_expr(&self) -> Expr {
        match self {
            DerivativeDirection::Argument(a) => Expr::Argument(a.clone()),
            DerivativeDirection::Coefficient(c) => Expr::Coefficient(c.clone()),
        }
    }

    fn space(&self) -> crate::symbolic::space::FunctionSpace {
        match self {
            DerivativeDirection::Argument(a) => a.space,
            DerivativeDirection::Coefficient(c) => c.space,
        }
    }
}

/// Gateaux derivative of `form` with respect to `variable` in the direction
/// of the fresh argument `direction`; the result has arity one higher.
pub fn gateaux_derivative(
    form: &Form,
    variable: &Coefficient,
    direction: &Argument,
) -> Result<Form> {
    if direction.space != variable.space {
        return Err(Error::SpaceMismatch(
            "derivative direction must live in the variable's space".into(),
        ));
    }
    if form.arguments()?.contains_key(&direction.number) {
        return Err(Error::DirectionNotFresh(direction.number));
    }
    derive_form(form, variable, &DerivativeDirection::Argument(direction.clone()))
}

/// Directional derivative of `form` with respect to `variable` in the
/// direction of a concrete coefficient; arity is unchanged.
pub fn gateaux_directional(
    form: &Form,
    variable: &Coefficient,
    direction: &Coefficient,
) -> Result<Form> {
    if direction.space != variable.space {
        return Err(Error::SpaceMismatch(
            "derivative direction must live in the variable's space".into(),
        ));
    }
    derive_form(
        form,
        variable,
        &DerivativeDirection::Coefficient(direction.clone()),
    )
}

fn derive_form(
    form: &Form,
    variable: &Coefficient,
    direction: &DerivativeDirection,
) -> Result<Form> {
    let mut terms = Vec::new();
    for term in form.terms() {
        match term {
            FormTerm::Integral(integral) => {
                if let Some(derived) = diff(&integral.integrand, variable, direction)? {
                    // Split top-level sums into separate integral terms so the
                    // derivative exposes its chain-rule structure.
                    for part in flatten_sums(derived) {
                        terms.push(FormTerm::Integral(Integral {
                            integrand: Arc::new(part),
                            measure: integral.measure,
                            domain: integral.domain,
                        }));
                    }
                }
            }
            FormTerm::Operator(op_term) => {
                if let Some(derived) = diff_node(&op_term.node, variable, direction)? {
                    for part in flatten_sums(derived) {
                        match part {
                            Expr::External(node) => terms.push(FormTerm::Operator(OperatorTerm {
                                node,
                                coargument: op_term.coargument.clone(),
                            })),
                            other => {
                                return Err(Error::UnsupportedOperand(format!(
                                    "derivative of a terminal operator term produced a non-operator expression: {other:?}"
                                )))
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(Form::from_terms(terms))
}

fn flatten_sums(expr: Expr) -> Vec<Expr> {
    match expr {
        Expr::Sum(a, b) => {
            let mut out = flatten_sums(a.as_ref().clone());
            out.extend(flatten_sums(b.as_ref().clone()));
            out
        }
        other => vec![other],
    }
}

/// Recursive derivative; `None` is the symbolic zero.
fn diff(
    expr: &Expr,
    variable: &Coefficient,
    direction: &DerivativeDirection,
) -> Result<Option<Expr>> {
    match expr {
        Expr::Coefficient(c) if c == variable => Ok(Some(direction.as_expr())),
        Expr::Coefficient(_)
        | Expr::Constant(_)
        | Expr::SpatialCoordinate(_)
        | Expr::Argument(_) => Ok(None),
        Expr::Sum(a, b) => combine(
            diff(a, variable, direction)?,
            diff(b, variable, direction)?,
        ),
        Expr::Product(a, b) => {
            let da = diff(a, variable, direction)?
                .map(|da| product(da, b.as_ref().clone()))
                .transpose()?;
            let db = diff(b, variable, direction)?
                .map(|db| product(a.as_ref().clone(), db))
                .transpose()?;
            combine(da, db)
        }
        Expr::Inner(a, b) => {
            let da = diff(a, variable, direction)?
                .map(|da| inner(da, b.as_ref().clone()))
                .transpose()?;
            let db = diff(b, variable, direction)?
                .map(|db| inner(a.as_ref().clone(), db))
                .transpose()?;
            combine(da, db)
        }
        Expr::Grad(a) => Ok(diff(a, variable, direction)?
            .map(grad)
            .transpose()?),
        Expr::Negate(a) => Ok(diff(a, variable, direction)?.map(negate)),
        Expr::External(node) => Ok(diff_node(node, variable, direction)?),
        Expr::NodalScale(_) | Expr::JacColumns(_) => Err(Error::UnsupportedOperand(
            "assembly-internal nodes cannot be differentiated".into(),
        )),
    }
}

/// Chain rule through an external operator: one derivative term per operand
/// that depends on the variable. When the operand *is* the variable the
/// direction is carried as-is; a compound operand contributes its inner
/// derivative as the direction. Dependence through already-recorded
/// directions is differentiated by linearity of the direction slots.
fn diff_node(
    node: &ExternalOperatorNode,
    variable: &Coefficient,
    direction: &DerivativeDirection,
) -> Result<Option<Expr>> {
    let mut acc: Option<Expr> = None;

    // Fast path: the variable is a plain operand.
    if node.total_derivative_order() == 0 {
        if let Some(index) = operand_index_of(node, variable) {
            let derived = node.with_derivative_expr(index, direction.as_expr())?;
            return Ok(Some(Expr::External(derived)));
        }
    }

    for (index, operand) in node.operands().enumerate() {
        if let Some(inner_derivative) = diff(operand, variable, direction)? {
            let derived = node.with_derivative_expr(index, inner_derivative)?;
            acc = combine(acc, Some(Expr::External(derived)))?;
        }
    }

    // Direction slots are linear: d/du N'(...; dir) includes N'(...; d dir).
    let direction_derivatives: Vec<(usize, Expr)> = node
        .direction_pairs()
        .enumerate()
        .filter_map(|(slot, (_, dir_expr))| {
            diff(dir_expr, variable, direction)
                .map(|d| d.map(|d| (slot, d)))
                .transpose()
        })
        .collect::<Result<_>>()?;
    for (slot, ddir) in direction_derivatives {
        let mut replaced = node.clone();
        replaced.replace_direction_slot(slot, ddir)?;
        acc = combine(acc, Some(Expr::External(replaced)))?;
    }

    Ok(acc)
}

fn combine(a: Option<Expr>, b: Option<Expr>) -> Result<Option<Expr>> {
    Ok(match (a, b) {
        (None, None) => None,
        (Some(a), None) => Some(a),
        (None, Some(b)) => Some(b),
        (Some(a), Some(b)) => Some(sum(a, b)?),
    })
}

// ---------------------------------------------------------------------------
// adjoint / action / replace
// ---------------------------------------------------------------------------

/// Swap the two argument numbers of a bilinear form; assembling the result
/// yields the transpose of the original matrix.
pub fn adjoint(form: &Form) -> Result<Form> {
    let args = form.arguments()?;
    if args.len() != 2 {
        return Err(Error::ArityError {
            expected: 2,
            found: args.len(),
        });
    }
    let numbers: Vec<u32> = args.keys().copied().collect();
    let (lo, hi) = (numbers[0], numbers[1]);
    map_form(form, &mut |e| match e {
        Expr::Argument(a) if a.number == lo => {
            Some(Expr::Argument(Argument::new(a.space, hi)))
        }
        Expr::Argument(a) if a.number == hi => {
            Some(Expr::Argument(Argument::new(a.space, lo)))
        }
        _ => None,
    })
    .map(|f| swap_coargument_numbers(f, lo, hi))
}

fn swap_coargument_numbers(form: Form, lo: u32, hi: u32) -> Form {
    let terms = form
        .terms()
        .iter()
        .cloned()
        .map(|t| match t {
            FormTerm::Operator(mut o) => {
                if let CoargSlot::Unbound { number, space } = o.coargument {
                    let number = if number == lo {
                        hi
                    } else if number == hi {
                        lo
                    } else {
                        number
                    };
                    o.coargument = CoargSlot::Unbound { number, space };
                }
                FormTerm::Operator(o)
            }
            other => other,
        })
        .collect();
    Form::from_terms(terms)
}

/// Replace the highest-numbered argument by the coefficient `w` everywhere,
/// including inside external-operator direction lists and unbound
/// coarguments; the arity drops by one.
pub fn action(form: &Form, w: &Coefficient) -> Result<Form> {
    let args = form.arguments()?;
    let (&hi, target) = args.iter().next_back().ok_or(Error::ArityError {
        expected: 1,
        found: 0,
    })?;
    if w.space != target.space {
        return Err(Error::SpaceMismatch(
            "action coefficient must live in the space of the highest-numbered argument".into(),
        ));
    }
    let substituted = map_form(form, &mut |e| match e {
        Expr::Argument(a) if a.number == hi => Some(Expr::Coefficient(w.clone())),
        _ => None,
    })?;
    // Bind matching coarguments.
    let terms = substituted
        .terms()
        .iter()
        .cloned()
        .map(|t| match t {
            FormTerm::Operator(mut o) => {
                if matches!(o.coargument, CoargSlot::Unbound { number, .. } if number == hi) {
                    o.coargument = CoargSlot::Bound {
                        cotangent: w.clone(),
                    };
                }
                FormTerm::Operator(o)
            }
            other => other,
        })
        .collect();
    Ok(Form::from_terms(terms))
}

/// Simultaneous substitution of coefficients by expressions of the same
/// space and shape.
pub fn replace(form: &Form, mapping: &BTreeMap<Coefficient, Expr>) -> Result<Form> {
    for (c, e) in mapping {
        let expected = Expr::Coefficient(c.clone()).shape();
        if e.shape() != expected {
            return Err(Error::SpaceMismatch(format!(
                "replacement for `{}` has shape {:?}, expected {:?}",
                c.display_name(),
                e.shape(),
                expected
            )));
        }
        if let Some(dom) = e.domain() {
            if dom != c.space.domain {
                return Err(Error::SpaceMismatch(format!(
                    "replacement for `{}` lives on a different domain",
                    c.display_name()
                )));
            }
        }
    }
    map_form(form, &mut |e| match e {
        Expr::Coefficient(c) => mapping.get(c).cloned(),
        _ => None,
    })
}

/// Structural map over every expression in a form. The mapper is applied
/// top-down; when it fires, the replacement is taken verbatim (simultaneous
/// substitution, no re-walk of the replacement).
fn map_form(form: &Form, f: &mut impl FnMut(&Expr) -> Option<Expr>) -> Result<Form> {
    let terms = form
        .terms()
        .iter()
        .map(|t| {
            Ok(match t {
                FormTerm::Integral(i) => FormTerm::Integral(Integral {
                    integrand: Arc::new(map_expr(&i.integrand, f)?),
                    measure: i.measure,
                    domain: i.domain,
                }),
                FormTerm::Operator(o) => FormTerm::Operator(OperatorTerm {
                    node: o.node.map_subexpressions(&mut |e| map_expr(e, f))?,
                    coargument: o.coargument.clone(),
                }),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Form::from_terms(terms))
}

pub(crate) fn map_expr(
    expr: &Expr,
    f: &mut impl FnMut(&Expr) -> Option<Expr>,
) -> Result<Expr> {
    if let Some(replacement) = f(expr) {
        return Ok(replacement);
    }
    Ok(match expr {
        Expr::Constant(_)
        | Expr::SpatialCoordinate(_)
        | Expr::Argument(_)
        | Expr::Coefficient(_) => expr.clone(),
        Expr::External(node) => Expr::External(node.map_subexpressions(&mut |e| map_expr(e, f))?),
        Expr::Sum(a, b) => sum(map_expr(a, f)?, map_expr(b, f)?)?,
        Expr::Product(a, b) => product(map_expr(a, f)?, map_expr(b, f)?)?,
        Expr::Inner(a, b) => inner(map_expr(a, f)?, map_expr(b, f)?)?,
        Expr::Grad(a) => grad(map_expr(a, f)?)?,
        Expr::Negate(a) => negate(map_expr(a, f)?),
        Expr::NodalScale(ns) => crate::symbolic::nodal_scale(
            ns.scale.clone(),
            map_expr(&ns.inner, f)?,
        ),
        Expr::JacColumns(_) => expr.clone(),
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc as StdArc;

    use super::*;
    use crate::extop::{register_impl, IdentityOperator};
    use crate::symbolic::form::dx;
    use crate::symbolic::printer::form_to_string;
    use crate::symbolic::space::{DomainId, FunctionSpace};

    fn wave_pieces() -> (
        DomainId,
        FunctionSpace,
        Argument,
        Coefficient,
        Coefficient,
    ) {
        let dom = DomainId::fresh(1);
        let v_space = FunctionSpace::lagrange(dom, 1);
        let v = Argument::test(v_space);
        let u = Coefficient::labeled(v_space, "u");
        let f = Coefficient::labeled(v_space, "f");
        (dom, v_space, v, u, f)
    }

    #[test]
    fn derivative_of_independent_form_is_zero() {
        let (dom, v_space, v, u, f) = wave_pieces();
        let l = dx(product(&f, &v).unwrap(), dom).unwrap();
        let uhat = Argument::new(v_space, 1);
        let d = gateaux_derivative(&l, &u, &uhat).unwrap();
        assert!(d.is_zero());
    }

    #[test]
    fn derivative_of_linear_term() {
        let (dom, v_space, v, u, _) = wave_pieces();
        let form = dx(product(&u, &v).unwrap(), dom).unwrap();
        let uhat = Argument::new(v_space, 1);
        let d = gateaux_derivative(&form, &u, &uhat).unwrap();
        assert_eq!(d.arity(), 2);
        assert_eq!(form_to_string(&d), "(v1 * v0) * dx");
    }

    #[test]
    fn chain_rule_through_external_operator_has_two_terms() {
        let (dom, v_space, v, u, _) = wave_pieces();
        let m = Coefficient::labeled(v_space, "m");
        let id = register_impl(StdArc::new(IdentityOperator));
        let node = ExternalOperatorNode::new(
            vec![Expr::from(&u), Expr::from(&m)],
            v_space,
            id,
        )
        .unwrap();
        let form = dx(
            product(product(&u, &node).unwrap(), &v).unwrap(),
            dom,
        )
        .unwrap();
        let uhat = Argument::new(v_space, 1);
        let d = gateaux_derivative(&form, &u, &uhat).unwrap();
        assert_eq!(d.terms().len(), 2, "expected exactly two integral terms");
        assert_eq!(
            form_to_string(&d),
            "((v1 * Id(u, m)) * v0) * dx  +  ((u * Id'[1,0](u, m; v1)) * v0) * dx"
        );
        assert_eq!(d.arity(), 2);
    }

    #[test]
    fn derivative_wrt_non_operand_coefficient_is_zero() {
        let (dom, v_space, v, u, f) = wave_pieces();
        let id = register_impl(StdArc::new(IdentityOperator));
        let node = ExternalOperatorNode::new(vec![Expr::from(&u)], v_space, id).unwrap();
        let form = dx(product(&node, &v).unwrap(), dom).unwrap();
        let fhat = Argument::new(v_space, 1);
        let d = gateaux_derivative(&form, &f, &fhat).unwrap();
        assert!(d.is_zero());
    }

    #[test]
    fn mixed_second_derivative_multi_index() {
        let (dom, v_space, _, u, _) = wave_pieces();
        let m = Coefficient::labeled(v_space, "m");
        let id = register_impl(StdArc::new(IdentityOperator));
        let node = ExternalOperatorNode::new(
            vec![Expr::from(&u), Expr::from(&m)],
            v_space,
            id,
        )
        .unwrap();
        let n_form = Form::from_external(node);
        let uhat = Argument::new(v_space, 1);
        let dn_du = gateaux_derivative(&n_form, &u, &uhat).unwrap();
        let mhat = Argument::new(v_space, 2);
        let mixed = gateaux_derivative(&dn_du, &m, &mhat).unwrap();
        let term = mixed.operator_terms().next().unwrap();
        assert_eq!(term.node.multi_index(), &[1, 1]);
        assert_eq!(term.node.extra_arguments().len(), 2);
    }

    #[test]
    fn adjoint_swaps_arguments_and_is_an_involution() {
        let (dom, v_space, v, _, f) = wave_pieces();
        let u = Argument::trial(v_space);
        let a = dx(
            sum(
                product(product(&f, &u).unwrap(), &v).unwrap(),
                inner(grad(&u).unwrap(), grad(&v).unwrap()).unwrap(),
            )
            .unwrap(),
            dom,
        )
        .unwrap();
        let adj = adjoint(&a).unwrap();
        assert_eq!(
            form_to_string(&adj),
            "(((f * v0) * v1) + inner(grad(v0), grad(v1))) * dx"
        );
        assert_eq!(adjoint(&adj).unwrap(), a);
    }

    #[test]
    fn adjoint_requires_arity_two() {
        let (dom, _, v, _, f) = wave_pieces();
        let l = dx(product(&f, &v).unwrap(), dom).unwrap();
        assert!(matches!(
            adjoint(&l),
            Err(Error::ArityError { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn action_substitutes_the_trial_argument() {
        let (dom, v_space, v, _, f) = wave_pieces();
        let u = Argument::trial(v_space);
        let a = dx(product(&u, &v).unwrap(), dom).unwrap();
        let acted = action(&a, &f).unwrap();
        assert_eq!(form_to_string(&acted), "(f * v0) * dx");
        assert_eq!(acted.arity(), 1);
    }

    #[test]
    fn action_substitutes_inside_operator_directions() {
        let (dom, v_space, v, u, f) = wave_pieces();
        let id = register_impl(StdArc::new(IdentityOperator));
        let node = ExternalOperatorNode::new(vec![Expr::from(&u)], v_space, id).unwrap();
        let form = dx(product(&node, &v).unwrap(), dom).unwrap();
        let uhat = Argument::new(v_space, 1);
        let jac = gateaux_derivative(&form, &u, &uhat).unwrap();
        let acted = action(&jac, &f).unwrap();
        assert_eq!(form_to_string(&acted), "(Id'[1](u; f) * v0) * dx");
        assert_eq!(acted.arity(), 1);
    }

    #[test]
    fn replace_walks_operator_operands() {
        let (dom, v_space, v, u, _) = wave_pieces();
        let w = Coefficient::labeled(v_space, "w");
        let id = register_impl(StdArc::new(IdentityOperator));
        let node = ExternalOperatorNode::new(vec![Expr::from(&u)], v_space, id).unwrap();
        let form = dx(
            product(product(&u, &node).unwrap(), &v).unwrap(),
            dom,
        )
        .unwrap();
        let mut mapping = BTreeMap::new();
        mapping.insert(u.clone(), Expr::from(&w));
        let replaced = replace(&form, &mapping).unwrap();
        assert_eq!(form_to_string(&replaced), "((w * Id(w)) * v0) * dx");
    }

    #[test]
    fn replace_with_empty_mapping_is_identity() {
        let (dom, _, v, u, _) = wave_pieces();
        let form = dx(product(&u, &v).unwrap(), dom).unwrap();
        let replaced = replace(&form, &BTreeMap::new()).unwrap();
        assert_eq!(replaced, form);
    }

    #[test]
    fn direction_must_be_fresh_and_of_matching_space() {
        let (dom, v_space, v, u, _) = wave_pieces();
        let form = dx(product(&u, &v).unwrap(), dom).unwrap();
        assert!(matches!(
            gateaux_derivative(&form, &u, &Argument::test(v_space)),
            Err(Error::DirectionNotFresh(0))
        ));
        let other = FunctionSpace::real(dom, 4);
        assert!(matches!(
            gateaux_derivative(&form, &u, &Argument::new(other, 1)),
            Err(Error::SpaceMismatch(_))
        ));
    }

    #[test]
    fn directional_derivative_keeps_arity() {
        let (dom, v_space, v, u, _) = wave_pieces();
        let delta = Coefficient::labeled(v_space, "delta");
        let form = dx(
            product(product(&u, &u).unwrap(), &v).unwrap(),
            dom,
        )
        .unwrap();
        let d = gateaux_directional(&form, &u, &delta).unwrap();
        assert_eq!(d.arity(), 1);
        assert_eq!(
            form_to_string(&d),
            "((delta * u) * v0) * dx  +  ((u * delta) * v0) * dx"
        );
    }
}
