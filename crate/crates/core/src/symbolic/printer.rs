//! Deterministic, fully parenthesised pretty-printer for expressions and
//! forms; used in error messages and golden tests. There is no parser.

use crate::extop::{lookup_impl, ExternalOperatorNode};
use crate::symbolic::expr::Expr;
use crate::symbolic::form::{CoargSlot, Form, FormTerm};

pub fn expr_to_string(expr: &Expr) -> String {
    match expr {
        Expr::Constant(c) => format!("{}", c.value()),
        Expr::SpatialCoordinate(_) => "x".into(),
        Expr::Argument(a) => format!("v{}", a.number),
        Expr::Coefficient(c) => c.display_name(),
        Expr::External(node) => node_to_string(node, None),
        Expr::Sum(a, b) => format!("({} + {})", expr_to_string(a), expr_to_string(b)),
        Expr::Product(a, b) => format!("({} * {})", expr_to_string(a), expr_to_string(b)),
        Expr::Inner(a, b) => format!("inner({}, {})", expr_to_string(a), expr_to_string(b)),
        Expr::Grad(a) => format!("grad({})", expr_to_string(a)),
        Expr::Negate(a) => format!("(-{})", expr_to_string(a)),
        Expr::NodalScale(ns) => format!(
            "nodal_scale({}, {})",
            ns.scale.display_name(),
            expr_to_string(&ns.inner)
        ),
        Expr::JacColumns(jc) => format!("jac_cols(v{})", jc.argument.number),
    }
}

fn node_to_string(node: &ExternalOperatorNode, coarg: Option<&CoargSlot>) -> String {
    let name = lookup_impl(node.impl_id)
        .map(|imp| imp.name().to_string())
        .unwrap_or_else(|_| "N".into());
    let operands: Vec<String> = node.operands().map(expr_to_string).collect();
    let mut tail: Vec<String> = node
        .direction_pairs()
        .map(|(_, d)| expr_to_string(d))
        .collect();
    if let Some(slot) = coarg {
        tail.push(match slot {
            CoargSlot::Unbound { number, .. } => format!("v{number}*"),
            CoargSlot::Bound { cotangent } => format!("{}*", cotangent.display_name()),
        });
    }
    let order = node.total_derivative_order();
    let head = if order > 0 {
        let mi: Vec<String> = node.multi_index().iter().map(|m| m.to_string()).collect();
        format!("{name}'[{}]", mi.join(","))
    } else {
        name;
    };
    if tail.is_empty() {
        format!("{head}({})", operands.join(", "))
    } else {
        format!("{head}({}; {})", operands.join(", "), tail.join(", "))
    }
}

pub fn form_to_string(form: &Form) -> String {
    if form.is_zero() {
        return "0".into();
    }
    let terms: Vec<String> = form
        .terms()
        .iter()
        .map(|t| match t {
            FormTerm::Integral(i) => format!("{} * dx", expr_to_string(&i.integrand)),
            FormTerm::Operator(o) => node_to_string(&o.node, Some(&o.coargument)),
        })
        .collect();
    terms.join("  +  ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::expr::{grad, inner, product, sum};
    use crate::symbolic::form::dx;
    use crate::symbolic::space::{Argument, Coefficient, DomainId, FunctionSpace};

    #[test]
    fn golden_helmholtz_left_hand_side() {
        let dom = DomainId::fresh(2);
        let v_space = FunctionSpace::lagrange(dom, 1);
        let u = Argument::trial(v_space);
        let v = Argument::test(v_space);
        let a = dx(
            sum(
                product(&u, &v).unwrap(),
                inner(grad(&u).unwrap(), grad(&v).unwrap()).unwrap(),
            )
            .unwrap(),
            dom,
        )
        .unwrap();
        assert_eq!(
            form_to_string(&a),
            "((v1 * v0) + inner(grad(v1), grad(v0))) * dx"
        );
    }

    #[test]
    fn golden_right_hand_side_with_coefficient() {
        let dom = DomainId::fresh(2);
        let v_space = FunctionSpace::lagrange(dom, 1);
        let v = Argument::test(v_space);
        let f = Coefficient::labeled(v_space, "f");
        let l = dx(product(&f, &v).unwrap(), dom).unwrap();
        assert_eq!(form_to_string(&l), "(f * v0) * dx");
    }

    #[test]
    fn printing_is_deterministic() {
        let dom = DomainId::fresh(1);
        let v_space = FunctionSpace::lagrange(dom, 1);
        let f = Coefficient::labeled(v_space, "f");
        let e = sum(product(&f, &f).unwrap(), product(2.0, &f).unwrap()).unwrap();
        let once = expr_to_string(&e);
        let twice = expr_to_string(&e);
        assert_eq!(once, "((f * f) + (2 * f))");
        assert_eq!(once, twice);
    }
}
