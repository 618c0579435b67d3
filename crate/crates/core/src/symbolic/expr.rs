//! Immutable expression trees for integrands.
//!
//! Expressions are built through fallible smart constructors that enforce the
//! shape and linearity rules at construction time; no invalid tree can be
//! assembled. Trees are persistent (`Arc` children) and structurally
//! comparable; constants compare and hash by their bit pattern so hashing
//! stays consistent with equality.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::extop::ExternalOperatorNode;
use crate::symbolic::space::{Argument, Coefficient, DomainId};

/// Scalar literal with bitwise equality and hashing.
#[derive(Debug, Clone, Copy)]
pub struct ScalarLit(pub f64);

impl ScalarLit {
    pub fn value(&self) -> f64 {
        self.0
    }
}

impl PartialEq for ScalarLit {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Eq for ScalarLit {}

impl std::hash::Hash for ScalarLit {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}

/// Value shape of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Scalar,
    Vector(usize),
}

/// Nodal scaling produced when lowering operator derivative nodes for
/// assembly: the P1 interpolant of `scale ⊙ nodal(inner)`. Never appears in
/// user-built forms.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodalScale {
    pub scale: Coefficient,
    pub inner: Arc<Expr>,
}

/// Dense Jacobian columns contracted against an argument, produced when
/// lowering operator derivative nodes whose Jacobian couples all dofs of the
/// direction space (e.g. derivatives with respect to R^M parameters).
/// `columns` is row-major with `rows` output dofs and one column per
/// argument dof. Never appears in user-built forms.
#[derive(Debug, Clone)]
pub struct JacColumns {
    pub columns: Arc<Vec<f64>>,
    pub rows: usize,
    pub argument: Argument,
}

impl PartialEq for JacColumns {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.columns, &other.columns) && self.argument == other.argument
    }
}

impl Eq for JacColumns {}

impl std::hash::Hash for JacColumns {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        (Arc::as_ptr(&self.columns) as usize).hash(state);
        self.argument.hash(state);
    }
}

/// An integrand expression.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Constant(ScalarLit),
    SpatialCoordinate(DomainId),
    Argument(Argument),
    Coefficient(Coefficient),
    External(ExternalOperatorNode),
    Sum(Arc<Expr>, Arc<Expr>),
    Product(Arc<Expr>, Arc<Expr>),
    Inner(Arc<Expr>, Arc<Expr>),
    Grad(Arc<Expr>),
    Negate(Arc<Expr>),
    #[doc(hidden)]
    NodalScale(NodalScale),
    #[doc(hidden)]
    JacColumns(JacColumns),
}

impl Expr {
    pub fn shape(&self) -> Shape {
        match self {
            Expr::Constant(_) => Shape::Scalar,
            Expr::SpatialCoordinate(dom) => Shape::Vector(dom.dim()),
            Expr::Argument(a) => value_shape(a.space.value_size),
            Expr::Coefficient(c) => value_shape(c.space.value_size),
            Expr::External(node) => value_shape(node.result_space.value_size),
            Expr::Sum(a, _) => a.shape(),
            Expr::Product(a, b) => match (a.shape(), b.shape()) {
                (Shape::Scalar, s) | (s, Shape::Scalar) => s,
                _ => unreachable!("validated at construction"),
            },
            Expr::Inner(_, _) => Shape::Scalar,
            Expr::Grad(a) => match self.domain() {
                Some(dom) => Shape::Vector(dom.dim()),
                None => unreachable!("grad requires a domain; checked at construction: {a:?}"),
            },
            Expr::Negate(a) => a.shape(),
            Expr::NodalScale(_) => Shape::Scalar,
            Expr::JacColumns(_) => Shape::Scalar,
        }
    }

    /// The domain this expression lives on, if any of its leaves carry one.
    pub fn domain(&self) -> Option<DomainId> {
        match self {
            Expr::Constant(_) => None,
            Expr::SpatialCoordinate(dom) => Some(*dom),
            Expr::Argument(a) => Some(a.space.domain),
            Expr::Coefficient(c) => Some(c.space.domain),
            Expr::External(node) => Some(node.result_space.domain),
            Expr::Sum(a, b) | Expr::Product(a, b) | Expr::Inner(a, b) => {
                a.domain().or_else(|| b.domain())
            }
            Expr::Grad(a) | Expr::Negate(a) => a.domain(),
            Expr::NodalScale(ns) => Some(ns.scale.space.domain),
            Expr::JacColumns(jc) => Some(jc.argument.space.domain),
        }
    }

    /// Collect arguments by number, erroring if one number appears with two
    /// different spaces. Includes directions stored inside external
    /// operator nodes.
    pub fn collect_arguments(&self, out: &mut BTreeMap<u32, Argument>) -> Result<()> {
        match self {
            Expr::Argument(a) => insert_argument(out, a),
            Expr::Constant(_) | Expr::SpatialCoordinate(_) | Expr::Coefficient(_) => Ok(()),
            Expr::External(node) => {
                for op in node.operands() {
                    op.collect_arguments(out)?;
                }
                for (_, dir) in node.direction_pairs() {
                    dir.collect_arguments(out)?;
                }
                Ok(())
            }
            Expr::Sum(a, b) | Expr::Product(a, b) | Expr::Inner(a, b) => {
                a.collect_arguments(out)?;
                b.collect_arguments(out)
            }
            Expr::Grad(a) | Expr::Negate(a) => a.collect_arguments(out),
            Expr::NodalScale(ns) => ns.inner.collect_arguments(out),
            Expr::JacColumns(jc) => insert_argument(out, &jc.argument),
        }
    }

    pub fn arguments(&self) -> BTreeMap<u32, Argument> {
        let mut out = BTreeMap::new();
        self.collect_arguments(&mut out)
            .expect("argument consistency is validated at construction");
        out
    }

    pub fn argument_numbers(&self) -> Vec<u32> {
        self.arguments().into_keys().collect()
    }

    /// Collect coefficients (deduplicated, ascending id), including external
    /// operator operands and directions.
    pub fn collect_coefficients(&self, out: &mut BTreeMap<u64, Coefficient>) {
        match self {
            Expr::Coefficient(c) => {
                out.entry(c.id()).or_insert_with(|| c.clone());
            }
            Expr::Constant(_) | Expr::SpatialCoordinate(_) | Expr::Argument(_) => {}
            Expr::External(node) => {
                for op in node.operands() {
                    op.collect_coefficients(out);
                }
                for (_, dir) in node.direction_pairs() {
                    dir.collect_coefficients(out);
                }
            }
            Expr::Sum(a, b) | Expr::Product(a, b) | Expr::Inner(a, b) => {
                a.collect_coefficients(out);
                b.collect_coefficients(out);
            }
            Expr::Grad(a) | Expr::Negate(a) => a.collect_coefficients(out),
            Expr::NodalScale(ns) => ns.inner.collect_coefficients(out),
            Expr::JacColumns(_) => {}
        }
    }

    pub fn contains_coefficient(&self, c: &Coefficient) -> bool {
        let mut map = BTreeMap::new();
        self.collect_coefficients(&mut map);
        map.contains_key(&c.id())
    }

    pub(crate) fn check_domain(&self, other: &Expr) -> Result<()> {
        if let (Some(a), Some(b)) = (self.domain(), other.domain()) {
            if a != b {
                return Err(Error::DomainMismatch);
            }
        }
        Ok(())
    }
}

fn value_shape(value_size: u32) -> Shape {
    if value_size == 1 {
        Shape::Scalar
    } else {
        Shape::Vector(value_size as usize)
    }
}

fn insert_argument(out: &mut BTreeMap<u32, Argument>, a: &Argument) -> Result<()> {
    match out.get(&a.number) {
        Some(existing) if existing != a => Err(Error::DuplicateArgumentNumber { number: a.number }),
        Some(_) => Ok(()),
        None => {
            out.insert(a.number, a.clone());
            Ok(())
        }
    }
}

fn disjoint_arguments(a: &Expr, b: &Expr) -> Result<()> {
    let left = a.arguments();
    if left.is_empty() {
        return Ok(());
    }
    let right = b.arguments();
    for number in left.keys() {
        if right.contains_key(number) {
            return Err(Error::NonlinearArgumentUse { number: *number });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Smart constructors
// ---------------------------------------------------------------------------

impl From<f64> for Expr {
    fn from(v: f64) -> Self {
        Expr::Constant(ScalarLit(v))
    }
}

impl From<&Coefficient> for Expr {
    fn from(c: &Coefficient) -> Self {
        Expr::Coefficient(c.clone())
    }
}

impl From<&Argument> for Expr {
    fn from(a: &Argument) -> Self {
        Expr::Argument(a.clone())
    }
}

impl From<&ExternalOperatorNode> for Expr {
    fn from(n: &ExternalOperatorNode) -> Self {
        Expr::External(n.clone())
    }
}

pub fn constant(v: f64) -> Expr {
    Expr::from(v)
}

pub fn coordinate(domain: DomainId) -> Expr {
    Expr::SpatialCoordinate(domain)
}

/// `a + b`. Both sides must have the same shape and the same argument set,
/// so that every term of an integrand is multilinear in the same arguments.
pub fn sum(a: impl Into<Expr>, b: impl Into<Expr>) -> Result<Expr> {
    let (a, b) = (a.into(), b.into());
    a.check_domain(&b)?;
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "cannot add {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut merged = BTreeMap::new();
    a.collect_arguments(&mut merged)?;
    b.collect_arguments(&mut merged)?;
    let left: Vec<u32> = a.arguments().into_keys().collect();
    let right: Vec<u32> = b.arguments().into_keys().collect();
    if left != right {
        return Err(Error::ArgumentSetMismatch { left, right });
    }
    Ok(Expr::Sum(Arc::new(a), Arc::new(b)))
}

/// `a * b` with at least one scalar factor; the two sides must not share an
/// argument number (forms are linear in each argument).
pub fn product(a: impl Into<Expr>, b: impl Into<Expr>) -> Result<Expr> {
    let (a, b) = (a.into(), b.into());
    a.check_domain(&b)?;
    if a.shape() != Shape::Scalar && b.shape() != Shape::Scalar {
        return Err(Error::ShapeMismatch(format!(
            "product needs at least one scalar factor, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    disjoint_arguments(&a, &b)?;
    let mut merged = BTreeMap::new();
    a.collect_arguments(&mut merged)?;
    b.collect_arguments(&mut merged)?;
    Ok(Expr::Product(Arc::new(a), Arc::new(b)))
}

/// `inner(a, b)`: componentwise contraction of equal shapes to a scalar.
pub fn inner(a: impl Into<Expr>, b: impl Into<Expr>) -> Result<Expr> {
    let (a, b) = (a.into(), b.into());
    a.check_domain(&b)?;
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "inner requires equal shapes, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    disjoint_arguments(&a, &b)?;
    let mut merged = BTreeMap::new();
    a.collect_arguments(&mut merged)?;
    b.collect_arguments(&mut merged)?;
    Ok(Expr::Inner(Arc::new(a), Arc::new(b)))
}

/// Gradient of a scalar field; yields a d-vector on a d-dimensional domain.
pub fn grad(a: impl Into<Expr>) -> Result<Expr> {
    let a = a.into();
    if a.shape() != Shape::Scalar {
        return Err(Error::ShapeMismatch(format!(
            "grad expects a scalar expression, got {:?}",
            a.shape()
        )));
    }
    if a.domain().is_none() {
        return Err(Error::ShapeMismatch(
            "grad of a domain-free expression (e.g. a bare constant)".into(),
        ));
    }
    Ok(Expr::Grad(Arc::new(a)))
}

pub fn negate(a: impl Into<Expr>) -> Expr {
    Expr::Negate(Arc::new(a.into()))
}

pub(crate) fn nodal_scale(scale: Coefficient, inner: Expr) -> Expr {
    Expr::NodalScale(NodalScale {
        scale,
        inner: Arc::new(inner),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::space::{ElementFamily, FunctionSpace};

    fn space2d() -> FunctionSpace {
        FunctionSpace::lagrange(DomainId::fresh(2), 1)
    }

    #[test]
    fn listing_style_integrand_builds() {
        let v_space = space2d();
        let u = Argument::trial(v_space);
        let v = Argument::test(v_space);
        let e = sum(
            product(&u, &v).unwrap(),
            inner(grad(&u).unwrap(), grad(&v).unwrap()).unwrap(),
        )
        .unwrap();
        assert_eq!(e.shape(), Shape::Scalar);
        assert_eq!(e.argument_numbers(), vec![0, 1]);
    }

    #[test]
    fn inner_shape_mismatch_fails() {
        let v_space = space2d();
        let u = Argument::trial(v_space);
        let err = inner(grad(&u).unwrap(), &u).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch(_)));
    }

    #[test]
    fn product_of_same_argument_fails() {
        let v_space = space2d();
        let u = Argument::trial(v_space);
        let err = product(&u, &u).unwrap_err();
        assert!(matches!(err, Error::NonlinearArgumentUse { number: 1 }));
    }

    #[test]
    fn inner_of_gradients_of_same_argument_fails() {
        let v_space = space2d();
        let u = Argument::trial(v_space);
        let err = inner(grad(&u).unwrap(), grad(&u).unwrap()).unwrap_err();
        assert!(matches!(err, Error::NonlinearArgumentUse { .. }));
    }

    #[test]
    fn sum_requires_matching_argument_sets() {
        let v_space = space2d();
        let u = Argument::trial(v_space);
        let v = Argument::test(v_space);
        let f = Coefficient::labeled(v_space, "f");
        let err = sum(product(&u, &v).unwrap(), product(&f, &v).unwrap()).unwrap_err();
        assert!(matches!(err, Error::ArgumentSetMismatch { .. }));
    }

    #[test]
    fn grad_of_constant_fails() {
        assert!(grad(1.0).is_err());
    }

    #[test]
    fn domains_must_agree() {
        let a = FunctionSpace::lagrange(DomainId::fresh(1), 1);
        let b = FunctionSpace::lagrange(DomainId::fresh(1), 1);
        let f = Coefficient::new(a);
        let g = Coefficient::new(b);
        assert!(matches!(product(&f, &g), Err(Error::DomainMismatch)));
    }

    #[test]
    fn argument_number_with_two_spaces_rejected() {
        let dom = DomainId::fresh(1);
        let v1 = FunctionSpace::lagrange(dom, 1);
        let v2 = FunctionSpace {
            degree: 2,
            ..v1
        };
        assert_eq!(v2.family, ElementFamily::Lagrange);
        let a = Argument::test(v1);
        let b = Argument::test(v2);
        let err = product(&a, &b).unwrap_err();
        // Caught as either duplicate-number or nonlinear use depending on walk order;
        // duplicate-number is the accurate one.
        assert!(matches!(
            err,
            Error::DuplicateArgumentNumber { number: 0 } | Error::NonlinearArgumentUse { number: 0 }
        ));
    }

    #[test]
    fn constants_hash_by_bits() {
        use std::collections::hash_map::DefaultHasher;
        use std::hash::{Hash, Hasher};
        let a = constant(0.5);
        let b = constant(0.5);
        assert_eq!(a, b);
        let mut ha = DefaultHasher::new();
        let mut hb = DefaultHasher::new();
        a.hash(&mut ha);
        b.hash(&mut hb);
        assert_eq!(ha.finish(), hb.finish());
    }
}
