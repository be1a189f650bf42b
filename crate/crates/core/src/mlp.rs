//! Single-hidden-layer perceptron trained by full-batch backpropagation with
//! momentum. Hidden units are logistic, the output unit is linear.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Training settings of the baseline network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: usize,
    pub rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    /// Half-width of the uniform weight initialisation.
    pub init_scale: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self { hidden: 12, rate: 0.05, momentum: 0.2, epochs: 10_000, init_scale: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    n_inputs: usize,
    n_hidden: usize,
    /// Input-to-hidden weights, row-major `[hidden][input]`.
    w_hidden: Vec<f64>,
    b_hidden: Vec<f64>,
    w_out: Vec<f64>,
    b_out: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Mlp {
    pub fn zeros(n_inputs: usize, n_hidden: usize) -> Self {
        Self {
            n_inputs,
            n_hidden,
            w_hidden: vec![0.0; n_inputs * n_hidden],
            b_hidden: vec![0.0; n_hidden],
            w_out: vec![0.0; n_hidden],
            b_out: 0.0,
        }
    }

    /// Weights and biases uniform in `[-scale, scale]`.
    pub fn random(n_inputs: usize, n_hidden: usize, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Self::zeros(n_inputs, n_hidden);
        let mut theta = net.params();
        theta.iter_mut().for_each(|w| *w = rng.gen_range(-scale..=scale));
        net.set_params_unchecked(&theta);
        net
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn n_params(&self) -> usize {
        self.n_hidden * (self.n_inputs + 2) + 1
    }

    /// Flat parameters: hidden weights, hidden biases, output weights,
    /// output bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        out.extend_from_slice(&self.w_hidden);
        out.extend_from_slice(&self.b_hidden);
        out.extend_from_slice(&self.w_out);
        out.push(self.b_out);
        out
    }

    pub fn set_params(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(Error::DimensionMismatch { expected: self.n_params(), actual: theta.len() });
        }
        self.set_params_unchecked(theta);
        Ok(())
    }

    fn set_params_unchecked(&mut self, theta: &[f64]) {
        let (wh, rest) = theta.split_at(self.w_hidden.len());
        let (bh, rest) = rest.split_at(self.n_hidden);
        let (wo, rest) = rest.split_at(self.n_hidden);
        self.w_hidden.copy_from_slice(wh);
        self.b_hidden.copy_from_slice(bh);
        self.w_out.copy_from_slice(wo);
        self.b_out = rest[0];
    }

    fn hidden(&self, x: &[f64], h: &mut [f64]) {
        for (j, hj) in h.iter_mut().enumerate() {
            let row = &self.w_hidden[j * self.n_inputs..(j + 1) * self.n_inputs];
            let z = row.iter().zip(x).fold(self.b_hidden[j], |acc, (w, xi)| acc + w * xi);
            *hj = sigmoid(z);
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_inputs {
            return Err(Error::DimensionMismatch { expected: self.n_inputs, actual: x.len() });
        }
        let mut h = vec![0.0; self.n_hidden];
        self.hidden(x, &mut h);
        Ok(h.iter().zip(&self.w_out).fold(self.b_out, |acc, (h, w)| acc + h * w))
    }

    pub fn rmse(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::DatasetEmpty);
        }
        let mut sse = 0.0;
        for (x, t) in data.rows() {
            let e = self.forward(x)? - t;
            sse += e * e;
        }
        Ok((sse / data.len() as f64).sqrt())
    }

    /// Gradient of the mean squared error over `data`, in [`Mlp::params`]
    /// order, together with that error.
    pub fn gradient(&self, data: &Dataset) -> Result<(Vec<f64>, f64)> {
        if data.is_empty() {
            return Err(Error::DatasetEmpty);
        }
        if data.n_inputs() != self.n_inputs {
            return Err(Error::DimensionMismatch { expected: self.n_inputs, actual: data.n_inputs() });
        }
        let ni = self.n_inputs;
        let nh = self.n_hidden;
        let off_bh = ni * nh;
        let off_wo = off_bh + nh;
        let off_bo = off_wo + nh;
        let mut grad = vec![0.0; self.n_params()];
        let mut h = vec![0.0; nh];
        let scale = 2.0 / data.len() as f64;
        let mut sse = 0.0;
        for (x, t) in data.rows() {
            self.hidden(x, &mut h);
            let y = h.iter().zip(&self.w_out).fold(self.b_out, |acc, (h, w)| acc + h * w);
            let e = y - t;
            sse += e * e;
            let dy = scale * e;
            grad[off_bo] += dy;
            for j in 0..nh {
                grad[off_wo + j] += dy * h[j];
                let dz = dy * self.w_out[j] * h[j] * (1.0 - h[j]);
                grad[off_bh + j] += dz;
                for (g, xi) in grad[j * ni..(j + 1) * ni].iter_mut().zip(x) {
                    *g += dz * xi;
                }
            }
        }
        Ok((grad, sse / data.len() as f64))
    }
}

/// Trains `net` in place for `epochs` full-batch momentum steps and returns
/// the training RMSE after every epoch.
pub fn mlp_train(net: &mut Mlp, train: &Dataset, rate: f64, momentum: f64, epochs: usize) -> Result<Vec<f64>> {
    if train.is_empty() {
        return Err(Error::DatasetEmpty);
    }
    let mut theta = net.params();
    let mut velocity = vec![0.0; theta.len()];
    let mut curve = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let (grad, _) = net.gradient(train)?;
        for ((th, v), g) in theta.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
            *v = momentum * *v - rate * g;
            *th += *v;
        }
        net.set_params(&theta)?;
        let rmse = net.rmse(train)?;
        if !rmse.is_finite() {
            return Err(Error::Divergence { epoch: epoch + 1 });
        }
        curve.push(rmse);
    }
    Ok(curve)
}

pub const LOSS_CURVE_HEADER: &str = "epoch,train_rmse";

pub fn write_loss_curve_csv<W: Write>(curve: &[f64], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{LOSS_CURVE_HEADER}")?;
    for (i, r) in curve.iter().enumerate() {
        writeln!(w, "{},{}", i + 1, r)?;
    }
    Ok(())
}
