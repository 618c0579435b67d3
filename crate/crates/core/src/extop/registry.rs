//! Operator implementation protocol and the process-wide registry.
//!
//! The language fixes only the symbolic behaviour of an external operator;
//! what `N` *does* is supplied by an [`OperatorImpl`]: plain evaluation, the
//! Jacobian with respect to each operand, and the vector-Jacobian product
//! (the backpropagation primitive). Implementations are registered once and
//! referenced from nodes by [`ImplId`].

use std::sync::{Arc, OnceLock, RwLock};

use crate::error::{Error, Result};
use crate::extop::node::ImplId;

/// A linear map from operand dofs to result dofs, either diagonal
/// (pointwise operators acting on their own space) or dense row-major.
#[derive(Debug, Clone)]
pub enum LinearMap {
    Diagonal(Vec<f64>),
    Dense {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    },
}

impl LinearMap {
    pub fn rows(&self) -> usize {
        match self {
            LinearMap::Diagonal(d) => d.len(),
            LinearMap::Dense { rows, .. } => *rows,
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            LinearMap::Diagonal(d) => d.len(),
            LinearMap::Dense { cols, .. } => *cols,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols() {
            return Err(Error::LengthMismatch(format!(
                "linear map has {} columns, input has length {}",
                self.cols(),
                x.len()
            )));
        }
        match self {
            LinearMap::Diagonal(d) => Ok(d.iter().zip(x).map(|(d, x)| d * x).collect()),
            LinearMap::Dense { rows, cols, data } => {
                let mut out = vec![0.0; *rows];
                for (i, out_i) in out.iter_mut().enumerate() {
                    let row = &data[i * cols..(i + 1) * cols];
                    *out_i = row.iter().zip(x).map(|(a, x)| a * x).sum();
                }
                Ok(out)
            }
        }
    }

    pub fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows() {
            return Err(Error::LengthMismatch(format!(
                "linear map has {} rows, cotangent has length {}",
                self.rows(),
                y.len()
            )));
        }
        match self {
            LinearMap::Diagonal(d) => Ok(d.iter().zip(y).map(|(d, y)| d * y).collect()),
            LinearMap::Dense { rows, cols, data } => {
                let mut out = vec![0.0; *cols];
                for i in 0..*rows {
                    let row = &data[i * cols..(i + 1) * cols];
                    for (out_j, a) in out.iter_mut().zip(row) {
                        *out_j += a * y[i];
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Numerical behaviour of an external operator. `operands` is one slice of
/// dof values per symbolic operand, in operand order.
///
/// Implementations must be reentrant: evaluation takes `&self` and may be
/// called concurrently.
pub trait OperatorImpl: Send + Sync {
    /// Short name used by the pretty-printer.
    fn name(&self) -> &str {
        "N"
    }

    /// Evaluate the operator on operand dof values; returns dof values in
    /// the result space.
    fn eval(&self, operands: &[&[f64]]) -> Result<Vec<f64>>;

    /// The Jacobian of the output with respect to operand `index`, at the
    /// given operand values.
    fn jac_operand(&self, index: usize, operands: &[&[f64]]) -> Result<LinearMap>;

    /// Vector-Jacobian product: `J_indexᵀ · cotangent`. The default routes
    /// through `jac_operand`; implementations with a cheaper reverse mode
    /// (backpropagation) override it.
    fn vjp(&self, index: usize, operands: &[&[f64]], cotangent: &[f64]) -> Result<Vec<f64>> {
        self.jac_operand(index, operands)?.apply_transpose(cotangent)
    }
}

fn registry() -> &'static RwLock<Vec<Arc<dyn OperatorImpl>>> {
    static REGISTRY: OnceLock<RwLock<Vec<Arc<dyn OperatorImpl>>>> = OnceLock::new();
    REGISTRY.get_or_init(|| RwLock::new(Vec::new()))
}

/// Register an implementation and get its handle. Registering the same
/// object (same allocation) again returns the existing handle; distinct
/// objects always get distinct ids.
pub fn register_impl(implementation: Arc<dyn OperatorImpl>) -> ImplId {
    let mut reg = registry().write().expect("operator registry poisoned");
    for (i, existing) in reg.iter().enumerate() {
        if Arc::ptr_eq(existing, &implementation) {
            return ImplId::from_raw(i as u64);
        }
    }
    reg.push(implementation);
    ImplId::from_raw((reg.len() - 1) as u64)
}

pub fn lookup_impl(id: ImplId) -> Result<Arc<dyn OperatorImpl>> {
    let reg = registry().read().expect("operator registry poisoned");
    reg.get(id.raw() as usize)
        .cloned()
        .ok_or(Error::UnknownImplementation(id.raw()))
}

/// The identity operator `N(c) = c`; useful as a reference implementation
/// and in equivalence tests.
#[derive(Debug, Default)]
pub struct IdentityOperator;

impl OperatorImpl for IdentityOperator {
    fn name(&self) -> &str {
        "Id"
    }

    fn eval(&self, operands: &[&[f64]]) -> Result<Vec<f64>> {
        expect_operands(operands, 1)?;
        Ok(operands[0].to_vec())
    }

    fn jac_operand(&self, index: usize, operands: &[&[f64]]) -> Result<LinearMap> {
        expect_operands(operands, 1)?;
        if index != 0 {
            return Err(Error::IndexOutOfRange { index, count: 1 });
        }
        Ok(LinearMap::Diagonal(vec![1.0; operands[0].len()]))
    }

    fn vjp(&self, index: usize, operands: &[&[f64]], cotangent: &[f64]) -> Result<Vec<f64>> {
        expect_operands(operands, 1)?;
        if index != 0 {
            return Err(Error::IndexOutOfRange { index, count: 1 });
        }
        Ok(cotangent.to_vec())
    }
}

pub(crate) fn expect_operands(operands: &[&[f64]], count: usize) -> Result<()> {
    if operands.len() != count {
        return Err(Error::ShapeMismatch(format!(
            "operator expects {count} operand(s), got {}",
            operands.len()
        )));
    }
    Ok(())
}
