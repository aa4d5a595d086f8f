use std::borrow::Borrow;
use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NetError;

/// Lower bound of the soft-clamped log-variance.
pub const LOG_VAR_MIN: f64 = -6.0;
/// Upper bound of the soft-clamped log-variance.
pub const LOG_VAR_MAX: f64 = 2.0;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// How the output layer is interpreted by the loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    /// Raw outputs, trained with squared error.
    Linear,
    /// Output layer holds `d` means followed by `d` raw log-variances,
    /// trained with the Gaussian negative log-likelihood.
    Gaussian,
}

/// One training example. `weight` has one entry per target component.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    pub weight: Vec<f64>,
}

impl Sample {
    pub fn unweighted(input: Vec<f64>, target: Vec<f64>) -> Self {
        let weight = vec![1.0; target.len()];
        Self {
            input,
            target,
            weight,
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Smoothly squashes a raw network output into `[LOG_VAR_MIN, LOG_VAR_MAX]`.
#[inline]
pub fn soft_clamp_log_var(raw: f64) -> f64 {
    LOG_VAR_MIN + (LOG_VAR_MAX - LOG_VAR_MIN) * sigmoid(raw)
}

/// Derivative of [`soft_clamp_log_var`] with respect to its input.
#[inline]
pub fn soft_clamp_log_var_grad(raw: f64) -> f64 {
    let s = sigmoid(raw);
    (LOG_VAR_MAX - LOG_VAR_MIN) * s * (1.0 - s)
}

/// Fully connected network: tanh on hidden layers, identity on the output.
///
/// All parameters live in one flat vector. Layer `l` stores its weights as an
/// `inputs x outputs` row-major block followed by its `outputs` biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkRecord", into = "NetworkRecord")]
pub struct Network {
    layer_sizes: Vec<usize>,
    output: OutputKind,
    params: Vec<f64>,
    offsets: Vec<usize>,
}

/// Reusable activation storage for batched forward passes.
#[derive(Clone, Debug, Default)]
pub struct ForwardScratch {
    bufs: [Vec<f64>; 2],
}

fn layout(layer_sizes: &[usize]) -> (Vec<usize>, usize) {
    let mut offsets = Vec::with_capacity(layer_sizes.len() - 1);
    let mut total = 0;
    for w in layer_sizes.windows(2) {
        offsets.push(total);
        total += w[0] * w[1] + w[1];
    }
    (offsets, total)
}

/// `out[r, :] = bias + x[r, :] · W` for every row, then optionally tanh.
/// `tanh` through one `exp`; the library call is kept near zero where the
/// quotient loses precision.
#[inline]
fn tanh(x: f64) -> f64 {
    if x.abs() < 0.125 {
        return x.tanh();
    }
    let e = (2.0 * x.clamp(-20.0, 20.0)).exp();
    (e - 1.0) / (e + 1.0)
}

fn dense_forward(
    x: &[f64],
    rows: usize,
    n_in: usize,
    n_out: usize,
    w: &[f64],
    b: &[f64],
    hidden: bool,
    out: &mut Vec<f64>,
) {
    out.clear();
    out.resize(rows * n_out, 0.0);
    for r in 0..rows {
        let xr = &x[r * n_in..(r + 1) * n_in];
        let yr = &mut out[r * n_out..(r + 1) * n_out];
        yr.copy_from_slice(b);
        for (i, &xi) in xr.iter().enumerate() {
            let wi = &w[i * n_out..(i + 1) * n_out];
            for (y, &wv) in yr.iter_mut().zip(wi) {
                *y += xi * wv;
            }
        }
        if hidden {
            for y in yr.iter_mut() {
                *y = tanh(*y);
            }
        }
    }
}

impl Network {
    fn validate_sizes(layer_sizes: &[usize], output: OutputKind) -> Result<(), NetError> {
        if layer_sizes.len() < 2 || layer_sizes.iter().any(|&s| s == 0) {
            return Err(NetError::InvalidLayout(layer_sizes.to_vec()));
        }
        if output == OutputKind::Gaussian && layer_sizes[layer_sizes.len() - 1] % 2 != 0 {
            return Err(NetError::InvalidLayout(layer_sizes.to_vec()));
        }
        Ok(())
    }

    /// Network with every weight and bias set to zero.
    pub fn zeros(layer_sizes: &[usize], output: OutputKind) -> Result<Self, NetError> {
        Self::validate_sizes(layer_sizes, output)?;
        let (offsets, total) = layout(layer_sizes);
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            output,
            params: vec![0.0; total],
            offsets,
        })
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn new<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        output: OutputKind,
        rng: &mut R,
    ) -> Result<Self, NetError> {
        let mut net = Self::zeros(layer_sizes, output)?;
        for l in 0..net.num_layers() {
            let (n_in, n_out) = (net.layer_sizes[l], net.layer_sizes[l + 1]);
            let bound = (6.0 / (n_in + n_out) as f64).sqrt();
            let off = net.offsets[l];
            for p in &mut net.params[off..off + n_in * n_out] {
                *p = rng.gen_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn output_kind(&self) -> OutputKind {
        self.output
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        self.layer_sizes[self.layer_sizes.len() - 1]
    }

    /// Length of the training target (half the output for Gaussian heads).
    pub fn target_dim(&self) -> usize {
        match self.output {
            OutputKind::Linear => self.output_dim(),
            OutputKind::Gaussian => self.output_dim() / 2,
        }
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Replaces all parameters. Rejects wrong lengths and non-finite values.
    pub fn set_params(&mut self, params: &[f64]) -> Result<(), NetError> {
        if params.len() != self.params.len() {
            return Err(NetError::Shape {
                what: "parameter vector",
                expected: self.params.len(),
                got: params.len(),
            });
        }
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(NetError::NonFiniteParameter(i));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        let off = self.offsets[l];
        let w = &self.params[off..off + n_in * n_out];
        let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
        (w, b)
    }

    /// Single-input forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NetError> {
        let mut scratch = ForwardScratch::default();
        Ok(self.forward_batch(input, 1, &mut scratch)?.to_vec())
    }

    /// Forward pass over `rows` inputs stored row-major in `inputs`.
    ///
    /// Each output row depends only on its own input row, so results do not
    /// change with the batch composition.
    pub fn forward_batch<'s>(
        &self,
        inputs: &[f64],
        rows: usize,
        scratch: &'s mut ForwardScratch,
    ) -> Result<&'s [f64], NetError> {
        let n_in = self.input_dim();
        if inputs.len() != rows * n_in {
            return Err(NetError::Shape {
                what: "input",
                expected: rows * n_in,
                got: inputs.len(),
            });
        }
        let last = self.num_layers() - 1;
        let [a, b] = &mut scratch.bufs;
        let (mut cur, mut next) = (a, b);
        for l in 0..self.num_layers() {
            let (w, bias) = self.layer(l);
            let src: &[f64] = if l == 0 { inputs } else { cur.as_slice() };
            dense_forward(
                src,
                rows,
                self.layer_sizes[l],
                self.layer_sizes[l + 1],
                w,
                bias,
                l != last,
                next,
            );
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur.as_slice())
    }

    fn check_sample(&self, idx: usize, s: &Sample) -> Result<(), NetError> {
        let shape_err = |what, expected, got| NetError::SampleShape {
            index: idx,
            what,
            expected,
            got,
        };
        if s.input.len() != self.input_dim() {
            return Err(shape_err("input", self.input_dim(), s.input.len()));
        }
        if s.target.len() != self.target_dim() {
            return Err(shape_err("target", self.target_dim(), s.target.len()));
        }
        if s.weight.len() != self.target_dim() {
            return Err(shape_err("weight", self.target_dim(), s.weight.len()));
        }
        Ok(())
    }

    /// Mean weighted loss over `batch` and its gradient with respect to every
    /// parameter.
    pub fn loss_and_gradient<S: Borrow<Sample>>(
        &self,
        batch: &[S],
    ) -> Result<(f64, Vec<f64>), NetError> {
        if batch.is_empty() {
            return Err(NetError::EmptyBatch);
        }
        for (i, s) in batch.iter().enumerate() {
            self.check_sample(i, s.borrow())?;
        }
        let rows = batch.len();
        let nl = self.num_layers();
        let n_in = self.input_dim();

        // acts[l] holds the input to layer l (acts[0] = inputs).
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(nl + 1);
        let mut x0 = Vec::with_capacity(rows * n_in);
        for s in batch {
            x0.extend_from_slice(&s.borrow().input);
        }
        acts.push(x0);
        for l in 0..nl {
            let (w, b) = self.layer(l);
            let mut out = Vec::new();
            dense_forward(
                &acts[l],
                rows,
                self.layer_sizes[l],
                self.layer_sizes[l + 1],
                w,
                b,
                l != nl - 1,
                &mut out,
            );
            acts.push(out);
        }

        let n_out = self.output_dim();
        let td = self.target_dim();
        let inv_rows = 1.0 / rows as f64;
        let mut delta = vec![0.0; rows * n_out];
        let mut total = 0.0;
        for (r, s) in batch.iter().enumerate() {
            let s = s.borrow();
            let y = &acts[nl][r * n_out..(r + 1) * n_out];
            let d = &mut delta[r * n_out..(r + 1) * n_out];
            let mut loss = 0.0;
            match self.output {
                OutputKind::Linear => {
                    for o in 0..td {
                        let e = y[o] - s.target[o];
                        loss += s.weight[o] * e * e;
                        d[o] = 2.0 * s.weight[o] * e * inv_rows;
                    }
                }
                OutputKind::Gaussian => {
                    for o in 0..td {
                        let mu = y[o];
                        let raw = y[td + o];
                        let lv = soft_clamp_log_var(raw);
                        let inv_var = (-lv).exp();
                        let e = mu - s.target[o];
                        let wgt = s.weight[o];
                        loss += wgt * 0.5 * (lv + e * e * inv_var + LN_2PI);
                        d[o] = wgt * e * inv_var * inv_rows;
                        let dl_dlv = wgt * 0.5 * (1.0 - e * e * inv_var);
                        d[td + o] = dl_dlv * soft_clamp_log_var_grad(raw) * inv_rows;
                    }
                }
            }
            if !loss.is_finite() || d.iter().any(|v| !v.is_finite()) {
                return Err(NetError::NonFiniteLoss { index: r });
            }
            total += loss;
        }

        let mut grad = vec![0.0; self.params.len()];
        for l in (0..nl).rev() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let off = self.offsets[l];
            let x = &acts[l];
            {
                let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for r in 0..rows {
                    let dr = &delta[r * n_out..(r + 1) * n_out];
                    let xr = &x[r * n_in..(r + 1) * n_in];
                    for (i, &xi) in xr.iter().enumerate() {
                        let gwi = &mut gw[i * n_out..(i + 1) * n_out];
                        for (g, &dv) in gwi.iter_mut().zip(dr) {
                            *g += xi * dv;
                        }
                    }
                    for (g, &dv) in gb.iter_mut().zip(dr) {
                        *g += dv;
                    }
                }
            }
            if l > 0 {
                let (w, _) = self.layer(l);
                let mut prev = vec![0.0; rows * n_in];
                for r in 0..rows {
                    let dr = &delta[r * n_out..(r + 1) * n_out];
                    let xr = &x[r * n_in..(r + 1) * n_in];
                    let pr = &mut prev[r * n_in..(r + 1) * n_in];
                    for i in 0..n_in {
                        let wi = &w[i * n_out..(i + 1) * n_out];
                        let s: f64 = wi.iter().zip(dr).map(|(a, b)| a * b).sum();
                        pr[i] = s * (1.0 - xr[i] * xr[i]);
                    }
                    if pr.iter().any(|v| !v.is_finite()) {
                        return Err(NetError::NonFiniteGradient { index: r });
                    }
                }
                delta = prev;
            }
        }
        Ok((total * inv_rows, grad))
    }

    /// Mean weighted loss without computing gradients.
    pub fn loss<S: Borrow<Sample>>(&self, batch: &[S]) -> Result<f64, NetError> {
        if batch.is_empty() {
            return Err(NetError::EmptyBatch);
        }
        let mut scratch = ForwardScratch::default();
        let td = self.target_dim();
        let mut total = 0.0;
        for (i, s) in batch.iter().enumerate() {
            let s = s.borrow();
            self.check_sample(i, s)?;
            let y = self.forward_batch(&s.input, 1, &mut scratch)?;
            let mut loss = 0.0;
            for o in 0..td {
                let e = y[o] - s.target[o];
                loss += match self.output {
                    OutputKind::Linear => s.weight[o] * e * e,
                    OutputKind::Gaussian => {
                        let lv = soft_clamp_log_var(y[td + o]);
                        s.weight[o] * 0.5 * (lv + e * e * (-lv).exp() + LN_2PI)
                    }
                };
            }
            total += loss;
        }
        Ok(total / batch.len() as f64)
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }
}

/// Named tensor with its shape, as stored in checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Serialized form of a [`Network`]: `layers.<l>.weight` (`[inputs, outputs]`)
/// and `layers.<l>.bias` (`[outputs]`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkRecord {
    pub layer_sizes: Vec<usize>,
    pub output: OutputKind,
    pub tensors: BTreeMap<String, TensorRecord>,
}

impl From<Network> for NetworkRecord {
    fn from(net: Network) -> Self {
        let mut tensors = BTreeMap::new();
        for l in 0..net.num_layers() {
            let (w, b) = net.layer(l);
            tensors.insert(
                format!("layers.{l}.weight"),
                TensorRecord {
                    shape: vec![net.layer_sizes[l], net.layer_sizes[l + 1]],
                    data: w.to_vec(),
                },
            );
            tensors.insert(
                format!("layers.{l}.bias"),
                TensorRecord {
                    shape: vec![net.layer_sizes[l + 1]],
                    data: b.to_vec(),
                },
            );
        }
        NetworkRecord {
            layer_sizes: net.layer_sizes,
            output: net.output,
            tensors,
        }
    }
}

impl TryFrom<NetworkRecord> for Network {
    type Error = NetError;

    fn try_from(rec: NetworkRecord) -> Result<Self, NetError> {
        let mut net = Network::zeros(&rec.layer_sizes, rec.output)?;
        for l in 0..net.num_layers() {
            let (n_in, n_out) = (net.layer_sizes[l], net.layer_sizes[l + 1]);
            let off = net.offsets[l];
            for (suffix, shape, start) in [
                ("weight", vec![n_in, n_out], off),
                ("bias", vec![n_out], off + n_in * n_out),
            ] {
                let name = format!("layers.{l}.{suffix}");
                let t = rec
                    .tensors
                    .get(&name)
                    .ok_or_else(|| NetError::MissingTensor(name.clone()))?;
                if t.shape != shape || t.data.len() != shape.iter().product::<usize>() {
                    return Err(NetError::TensorShape {
                        name,
                        expected: shape,
                        got: t.shape.clone(),
                    });
                }
                net.params[start..start + t.data.len()].copy_from_slice(&t.data);
            }
        }
        if let Some(i) = net.params.iter().position(|p| !p.is_finite()) {
            return Err(NetError::NonFiniteParameter(i));
        }
        Ok(net)
    }
}
