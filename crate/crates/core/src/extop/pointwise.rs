//! Pointwise neural operator: the network applied independently at each dof.
//!
//! `N(c)(x_j) = f_theta(c(x_j))`. The operator takes the field `c` as
//! operand 0 and optionally the flat parameter vector as operand 1 (an R^M
//! coefficient); when the parameter operand is present its bound values
//! override the weights baked into the model, which is what makes the
//! parameters differentiable like any other operand.

use crate::error::{Error, Result};
use crate::extop::mlp::MlpModel;
use crate::extop::registry::{LinearMap, OperatorImpl};

#[derive(Debug, Clone)]
pub struct PointwiseNeuralOperator {
    model: MlpModel,
}

impl PointwiseNeuralOperator {
    pub fn new(model: MlpModel) -> Self {
        PointwiseNeuralOperator { model }
    }

    pub fn model(&self) -> &MlpModel {
        &self.model
    }

    fn params<'a>(&'a self, operands: &[&'a [f64]]) -> Result<&'a [f64]> {
        match operands.len() {
            1 => Ok(self.model.params()),
            2 => {
                if operands[1].len() != self.model.param_count() {
                    return Err(Error::ShapeMismatch(format!(
                        "parameter operand has length {}, model expects {}",
                        operands[1].len(),
                        self.model.param_count()
                    )));
                }
                Ok(operands[1])
            }
            n => Err(Error::ShapeMismatch(format!(
                "pointwise neural operator expects 1 or 2 operands, got {n}"
            ))),
        }
    }
}

impl OperatorImpl for PointwiseNeuralOperator {
    fn name(&self) -> &str {
        "N"
    }

    fn eval(&self, operands: &[&[f64]]) -> Result<Vec<f64>> {
        let params = self.params(operands)?;
        let model = self.model.with_params(params.to_vec())?;
        Ok(operands[0].iter().map(|&c| model.forward(c)).collect())
    }

    fn jac_operand(&self, index: usize, operands: &[&[f64]]) -> Result<LinearMap> {
        let params = self.params(operands)?;
        let model = self.model.with_params(params.to_vec())?;
        let field = operands[0];
        match index {
            // d out_j / d c_j: diagonal, one scalar derivative per node.
            0 => Ok(LinearMap::Diagonal(
                field.iter().map(|&c| model.vjp(c, 1.0).0).collect(),
            )),
            // d out_j / d m: one dense row block per node.
            1 if operands.len() == 2 => {
                let m = self.model.param_count();
                let mut data = vec![0.0; field.len() * m];
                for (j, &c) in field.iter().enumerate() {
                    let (_, m_bar) = model.vjp(c, 1.0);
                    data[j * m..(j + 1) * m].copy_from_slice(&m_bar);
                }
                Ok(LinearMap::Dense {
                    rows: field.len(),
                    cols: m,
                    data,
                })
            }
            _ => Err(Error::IndexOutOfRange {
                index,
                count: operands.len(),
            }),
        }
    }

    fn vjp(&self, index: usize, operands: &[&[f64]], cotangent: &[f64]) -> Result<Vec<f64>> {
        let params = self.params(operands)?;
        let model = self.model.with_params(params.to_vec())?;
        let field = operands[0];
        if cotangent.len() != field.len() {
            return Err(Error::LengthMismatch(format!(
                "cotangent has length {}, field has {}",
                cotangent.len(),
                field.len()
            )));
        }
        match index {
            0 => Ok(field
                .iter()
                .zip(cotangent)
                .map(|(&c, &y)| model.vjp(c, y).0)
                .collect()),
            1 if operands.len() == 2 => {
                let mut out = vec![0.0; self.model.param_count()];
                for (&c, &y) in field.iter().zip(cotangent) {
                    if y == 0.0 {
                        continue;
                    }
                    let (_, m_bar) = model.vjp(c, y);
                    for (o, g) in out.iter_mut().zip(&m_bar) {
                        *o += g;
                    }
                }
                Ok(out)
            }
            _ => Err(Error::IndexOutOfRange {
                index,
                count: operands.len(),
            }),
        }
    }
}

/// The default pretraining target: a soft out-of-range penalty
/// `psi(c) = c - clamp(c, lo, hi)`, zero inside the physical band and linear
/// outside, so that `1/2 ||N(c)||^2` penalises unphysical wave speeds.
pub fn range_penalty(lo: f64, hi: f64) -> impl Fn(f64) -> f64 {
    move |c| c - c.clamp(lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn linear_single_layer_vjp_is_weight_times_cotangent() {
        // N(c) = w*c + b per node; vjp wrt the input is w * y per node.
        let model = MlpModel::zeros(&[1, 1]).with_params(vec![3.0, 0.5]).unwrap();
        let op = PointwiseNeuralOperator::new(model);
        let field = [1.0, 2.0, -1.0];
        let y = [1.0, -2.0, 0.25];
        let x_bar = op.vjp(0, &[&field], &y).unwrap();
        assert_eq!(x_bar, vec![3.0, -6.0, 0.75]);
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let model = MlpModel::seeded(&[1, 6, 6, 1], 9);
        let m = model.param_count();
        let op = PointwiseNeuralOperator::new(model.clone());
        let field: Vec<f64> = vec![0.1, 0.8, 1.7, 2.4];
        let params = model.params().to_vec();
        let ops: Vec<&[f64]> = vec![&field, &params];
        let y: Vec<f64> = (0..field.len()).map(|i| 0.3 + 0.1 * i as f64).collect();
        let h = 1e-6;

        // J^T y wrt the field against central differences.
        let vjp_c = op.vjp(0, &ops, &y).unwrap();
        for j in 0..field.len() {
            let mut plus = field.clone();
            plus[j] += h;
            let mut minus = field.clone();
            minus[j] -= h;
            let fp = op.eval(&[&plus, &params]).unwrap();
            let fm = op.eval(&[&minus, &params]).unwrap();
            let fd: f64 = fp
                .iter()
                .zip(&fm)
                .zip(&y)
                .map(|((p, m_), yy)| (p - m_) / (2.0 * h) * yy)
                .sum();
            assert_relative_eq!(vjp_c[j], fd, max_relative = 1e-5, epsilon = 1e-9);
        }

        // J^T y wrt the parameters against central differences, relative
        // error below 1e-5 overall.
        let vjp_m = op.vjp(1, &ops, &y).unwrap();
        let mut fd_m = vec![0.0; m];
        for (k, slot) in fd_m.iter_mut().enumerate() {
            let mut plus = params.clone();
            plus[k] += h;
            let mut minus = params.clone();
            minus[k] -= h;
            let fp = op.eval(&[&field, &plus]).unwrap();
            let fm = op.eval(&[&field, &minus]).unwrap();
            *slot = fp
                .iter()
                .zip(&fm)
                .zip(&y)
                .map(|((p, m_), yy)| (p - m_) / (2.0 * h) * yy)
                .sum();
        }
        let num: f64 = vjp_m
            .iter()
            .zip(&fd_m)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den: f64 = vjp_m.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(num / den < 1e-5, "relative error {}", num / den);
    }

    #[test]
    fn pointwise_commutes_with_dof_permutation() {
        let model = MlpModel::seeded(&[1, 5, 1], 21);
        let op = PointwiseNeuralOperator::new(model);
        let field = [0.3, 1.1, -0.4, 2.0, 0.9];
        let out = op.eval(&[&field]).unwrap();
        let perm = [4, 2, 0, 1, 3];
        let permuted: Vec<f64> = perm.iter().map(|&i| field[i]).collect();
        let out_perm = op.eval(&[&permuted]).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(out_perm[k].to_bits(), out[i].to_bits());
        }
    }

    #[test]
    fn range_penalty_is_zero_inside_band() {
        let psi = range_penalty(1.0, 2.0);
        assert_eq!(psi(1.5), 0.0);
        assert_relative_eq!(psi(2.5), 0.5);
        assert_relative_eq!(psi(0.25), -0.75);
    }
}
