//! A small dense multilayer perceptron with hand-rolled backpropagation.
//!
//! The network maps a scalar to a scalar (general layer widths are allowed
//! internally), uses tanh on hidden layers and identity on the output layer,
//! and stores its parameters as one flat vector: layer-major, weights
//! (row-major) before biases. The flat layout is what lets network
//! parameters live in an R^M coefficient space.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const WEIGHTS_MAGIC: &str = "formwork mlp 1";

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Total parameter count for a layer-size list: sum of n_out*n_in + n_out.
pub fn param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes
        .windows(2)
        .map(|w| w[1] * w[0] + w[1])
        .sum()
}

impl MlpModel {
    pub fn zeros(layer_sizes: &[usize]) -> Self {
        assert!(
            layer_sizes.len() >= 2 && layer_sizes.iter().all(|&n| n >= 1),
            "need at least an input and an output layer"
        );
        MlpModel {
            layer_sizes: layer_sizes.to_vec(),
            params: vec![0.0; param_count(layer_sizes)],
        }
    }

    /// Seeded initialisation, uniform in [-sqrt(1/n_in), sqrt(1/n_in)] per
    /// layer for both weights and biases.
    pub fn seeded(layer_sizes: &[usize], seed: u64) -> Self {
        let mut model = Self::zeros(layer_sizes);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut offset = 0;
        for w in model.layer_sizes.clone().windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let bound = (1.0 / n_in as f64).sqrt();
            for p in &mut model.params[offset..offset + n_out * n_in + n_out] {
                *p = rng.random_range(-bound..bound);
            }
            offset += n_out * n_in + n_out;
        }
        model
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn with_params(&self, params: Vec<f64>) -> Result<Self> {
        if params.len() != self.params.len() {
            return Err(Error::LengthMismatch(format!(
                "model has {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        Ok(MlpModel {
            layer_sizes: self.layer_sizes.clone(),
            params,
        })
    }

    pub fn forward(&self, x: f64) -> f64 {
        forward_with(&self.layer_sizes, &self.params, x)
    }

    /// Reverse-mode sweep: returns the cotangent of the input and of the
    /// flat parameter vector for output cotangent `y_bar`.
    pub fn vjp(&self, x: f64, y_bar: f64) -> (f64, Vec<f64>) {
        vjp_with(&self.layer_sizes, &self.params, x, y_bar)
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "{WEIGHTS_MAGIC}")?;
        write!(w, "layers")?;
        for n in &self.layer_sizes {
            write!(w, " {n}")?;
        }
        writeln!(w)?;
        for p in &self.params {
            writeln!(w, "{p}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut file)
    }

    pub fn read_from(r: &mut impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let magic = lines
            .next()
            .ok_or_else(|| Error::InvalidWeightsFile("empty file".into()))??;
        if magic.trim_end() != WEIGHTS_MAGIC {
            return Err(Error::InvalidWeightsFile(format!(
                "bad magic line {magic:?}, expected {WEIGHTS_MAGIC:?}"
            )));
        }
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidWeightsFile("missing layer line".into()))??;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("layers") {
            return Err(Error::InvalidWeightsFile(
                "second line must start with `layers`".into(),
            ));
        }
        let layer_sizes: Vec<usize> = parts
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| Error::InvalidWeightsFile(format!("bad layer size {t:?}")))
            })
            .collect::<Result<_>>()?;
        if layer_sizes.len() < 2 || layer_sizes.iter().any(|&n| n == 0) {
            return Err(Error::InvalidWeightsFile("invalid layer sizes".into()));
        }
        let expected = param_count(&layer_sizes);
        let mut params = Vec::with_capacity(expected);
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let v: f64 = t
                .parse()
                .map_err(|_| Error::InvalidWeightsFile(format!("bad parameter {t:?}")))?;
            params.push(v);
        }
        if params.len() != expected {
            return Err(Error::InvalidWeightsFile(format!(
                "expected {expected} parameters, found {}",
                params.len()
            )));
        }
        Ok(MlpModel {
            layer_sizes,
            params,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut file)
    }
}

pub(crate) fn forward_with(layer_sizes: &[usize], params: &[f64], x: f64) -> f64 {
    let mut activation = vec![x];
    let mut offset = 0;
    let depth = layer_sizes.len() - 1;
    for (l, w) in layer_sizes.windows(2).enumerate() {
        let (n_in, n_out) = (w[0], w[1]);
        let weights = &params[offset..offset + n_out * n_in];
        let biases = &params[offset + n_out * n_in..offset + n_out * n_in + n_out];
        let mut next = vec![0.0; n_out];
        for (j, next_j) in next.iter_mut().enumerate() {
            let row = &weights[j * n_in..(j + 1) * n_in];
            let z: f64 = row
                .iter()
                .zip(&activation)
                .map(|(w, a)| w * a)
                .sum::<f64>()
                + biases[j];
            *next_j = if l + 1 < depth { z.tanh() } else { z };
        }
        activation = next;
        offset += n_out * n_in + n_out;
    }
    activation[0]
}

pub(crate) fn vjp_with(
    layer_sizes: &[usize],
    params: &[f64],
    x: f64,
    y_bar: f64,
) -> (f64, Vec<f64>) {
    let depth = layer_sizes.len() - 1;
    // Forward pass, storing the input activation of every layer.
    let mut activations: Vec<Vec<f64>> = vec![vec![x]];
    let mut offset = 0;
    for (l, w) in layer_sizes.windows(2).enumerate() {
        let (n_in, n_out) = (w[0], w[1]);
        let weights = &params[offset..offset + n_out * n_in];
        let biases = &params[offset + n_out * n_in..offset + n_out * n_in + n_out];
        let prev = activations.last().unwrap();
        let mut next = vec![0.0; n_out];
        for (j, next_j) in next.iter_mut().enumerate() {
            let row = &weights[j * n_in..(j + 1) * n_in];
            let z: f64 = row.iter().zip(prev).map(|(w, a)| w * a).sum::<f64>() + biases[j];
            *next_j = if l + 1 < depth { z.tanh() } else { z };
        }
        activations.push(next);
        offset += n_out * n_in + n_out;
    }

    // Reverse pass. delta holds the cotangent of the current layer's output
    // activation; tanh' is recovered from the stored activation (1 - a^2).
    let mut param_bar = vec![0.0; params.len()];
    let mut delta = vec![y_bar];
    let mut offsets: Vec<usize> = Vec::with_capacity(depth);
    let mut acc = 0;
    for w in layer_sizes.windows(2) {
        offsets.push(acc);
        acc += w[1] * w[0] + w[1];
    }
    for l in (0..depth).rev() {
        let (n_in, n_out) = (layer_sizes[l], layer_sizes[l + 1]);
        let offset = offsets[l];
        let prev = &activations[l];
        // Cotangent of the pre-activation z of layer l.
        let z_bar: Vec<f64> = if l + 1 < depth {
            activations[l + 1]
                .iter()
                .zip(&delta)
                .map(|(a, d)| d * (1.0 - a * a))
                .collect()
        } else {
            delta.clone()
        };
        let weights = &params[offset..offset + n_out * n_in];
        let mut prev_bar = vec![0.0; n_in];
        for j in 0..n_out {
            for i in 0..n_in {
                param_bar[offset + j * n_in + i] += z_bar[j] * prev[i];
                prev_bar[i] += weights[j * n_in + i] * z_bar[j];
            }
            param_bar[offset + n_out * n_in + j] += z_bar[j];
        }
        delta = prev_bar;
    }
    (delta[0], param_bar)
}

/// Full-batch gradient descent on mean squared error against `target` over
/// uniformly spaced samples in `range`. Returns the trained model and the
/// loss curve (one entry per epoch plus the final loss).
pub fn pretrain(
    model: &MlpModel,
    target: impl Fn(f64) -> f64,
    range: (f64, f64),
    samples: usize,
    epochs: usize,
    learning_rate: f64,
) -> Result<(MlpModel, Vec<f64>)> {
    assert!(samples >= 2, "need at least two samples");
    let xs: Vec<f64> = (0..samples)
        .map(|i| range.0 + (range.1 - range.0) * i as f64 / (samples - 1) as f64)
        .collect();
    let ys: Vec<f64> = xs.iter().map(|&x| target(x)).collect();

    let mut params = model.params.to_vec();
    let mut losses = Vec::with_capacity(epochs + 1);
    let inv = 1.0 / samples as f64;
    for epoch in 0..epochs {
        let mut loss = 0.0;
        let mut grad = vec![0.0; params.len()];
        for (&x, &y) in xs.iter().zip(&ys) {
            let out = forward_with(&model.layer_sizes, &params, x);
            let err = out - y;
            loss += err * err * inv;
            let (_, param_bar) = vjp_with(&model.layer_sizes, &params, x, 2.0 * err * inv);
            for (g, p) in grad.iter_mut().zip(&param_bar) {
                *g += p;
            }
        }
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        losses.push(loss);
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= learning_rate * g;
        }
    }
    let trained = MlpModel {
        layer_sizes: model.layer_sizes.clone(),
        params,
    };
    let final_loss = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| {
            let e = trained.forward(x) - y;
            e * e * inv
        })
        .sum::<f64>();
    if !final_loss.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: epochs });
    }
    losses.push(final_loss);
    Ok((trained, losses))
}
