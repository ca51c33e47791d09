//! Bias-optional leaky-ReLU multilayer perceptron with exact reverse-mode
//! gradients, and the mirrored autoencoder used for pretraining.
//!
//! Weights are stored `in_dim x out_dim` so a batch `X` (rows are samples)
//! maps to `X W`. Every layer but the last applies leaky-ReLU; the last layer
//! is linear.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

use crate::error::{Result, SvddError};
use crate::rng::SeededRng;

pub const DEFAULT_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderNetwork {
    weights: Vec<Array2<f64>>,
    biases: Option<Vec<Array1<f64>>>,
    slope: f64,
    constrained: bool,
}

/// Parameter gradients with the same shapes as an [`EncoderNetwork`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub weights: Vec<Array2<f64>>,
    pub biases: Option<Vec<Array1<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkOptions {
    pub constrained: bool,
    pub use_bias: bool,
    pub slope: f64,
}

impl Default for NetworkOptions {
    fn default() -> Self {
        Self {
            constrained: false,
            use_bias: false,
            slope: DEFAULT_SLOPE,
        }
    }
}

fn leaky(z: f64, slope: f64) -> f64 {
    if z >= 0.0 {
        z
    } else {
        slope * z
    }
}

fn leaky_grad(z: f64, slope: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else {
        slope
    }
}

pub fn frobenius_norm(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl EncoderNetwork {
    pub fn from_weights(weights: Vec<Array2<f64>>, slope: f64, constrained: bool) -> Result<Self> {
        if weights.is_empty() {
            return Err(SvddError::InvalidConfig("network needs at least one layer".into()));
        }
        for (l, w) in weights.iter().enumerate() {
            if w.nrows() == 0 || w.ncols() == 0 {
                return Err(SvddError::InvalidConfig(format!("layer {l} has an empty dimension")));
            }
        }
        for (l, pair) in weights.windows(2).enumerate() {
            if pair[0].ncols() != pair[1].nrows() {
                return Err(SvddError::DimensionMismatch(format!(
                    "layer {l} outputs {} but layer {} takes {}",
                    pair[0].ncols(),
                    l + 1,
                    pair[1].nrows()
                )));
            }
        }
        if !slope.is_finite() {
            return Err(SvddError::InvalidConfig("activation slope must be finite".into()));
        }
        Ok(Self {
            weights,
            biases: None,
            slope,
            constrained,
        })
    }

    pub fn with_biases(mut self, biases: Vec<Array1<f64>>) -> Result<Self> {
        if biases.len() != self.weights.len()
            || biases.iter().zip(&self.weights).any(|(b, w)| b.len() != w.ncols())
        {
            return Err(SvddError::DimensionMismatch("bias shapes do not match layers".into()));
        }
        self.biases = Some(biases);
        Ok(self)
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights[self.weights.len() - 1].ncols()
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    /// `[in, hidden..., out]`.
    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.weights.iter().map(|w| w.ncols()));
        s
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> Option<&[Array1<f64>]> {
        self.biases.as_deref()
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn is_constrained(&self) -> bool {
        self.constrained
    }

    pub fn layer_norms(&self) -> Vec<f64> {
        self.weights.iter().map(frobenius_norm).collect()
    }

    /// Sum of squared Frobenius norms over all weight matrices.
    pub fn weight_sq_norm(&self) -> f64 {
        self.weights.iter().map(|w| w.iter().map(|v| v * v).sum::<f64>()).sum()
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub(crate) fn biases_mut(&mut self) -> Option<&mut Vec<Array1<f64>>> {
        self.biases.as_mut()
    }

    pub(crate) fn set_constrained(&mut self, constrained: bool) {
        self.constrained = constrained;
    }

    fn check_input(&self, batch: &ArrayView2<'_, f64>) -> Result<()> {
        if batch.ncols() != self.input_dim() {
            return Err(SvddError::DimensionMismatch(format!(
                "batch has {} columns, network expects {}",
                batch.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn affine(&self, l: usize, input: &ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = input.dot(&self.weights[l]);
        if let Some(b) = &self.biases {
            z += &b[l];
        }
        z
    }

    /// `phi(x; W)` for every row of `batch`.
    pub fn forward(&self, batch: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(&batch)?;
        let last = self.weights.len() - 1;
        let mut h = self.affine(0, &batch);
        for l in 1..=last {
            h.mapv_inplace(|z| leaky(z, self.slope));
            h = self.affine(l, &h.view());
        }
        Ok(h)
    }

    /// Gradient of `<upstream, forward(batch)>` with respect to every parameter.
    pub fn backward(&self, batch: ArrayView2<'_, f64>, upstream: ArrayView2<'_, f64>) -> Result<GradientSet> {
        self.backward_with_input(batch, upstream).map(|(g, _)| g)
    }

    /// As [`backward`](Self::backward), also returning the gradient with respect to the batch.
    pub fn backward_with_input(
        &self,
        batch: ArrayView2<'_, f64>,
        upstream: ArrayView2<'_, f64>,
    ) -> Result<(GradientSet, Array2<f64>)> {
        self.check_input(&batch)?;
        if upstream.dim() != (batch.nrows(), self.output_dim()) {
            return Err(SvddError::DimensionMismatch(format!(
                "upstream is {:?}, forward output is {:?}",
                upstream.dim(),
                (batch.nrows(), self.output_dim())
            )));
        }
        let layers = self.weights.len();
        // inputs[l] feeds layer l; pre[l] is layer l's affine output.
        let mut inputs: Vec<Array2<f64>> = Vec::with_capacity(layers);
        let mut pre: Vec<Array2<f64>> = Vec::with_capacity(layers);
        inputs.push(batch.to_owned());
        for l in 0..layers {
            let z = self.affine(l, &inputs[l].view());
            if l + 1 < layers {
                inputs.push(z.mapv(|v| leaky(v, self.slope)));
            }
            pre.push(z);
        }

        let mut grad_w: Vec<Array2<f64>> = Vec::with_capacity(layers);
        let mut grad_b: Vec<Array1<f64>> = Vec::with_capacity(layers);
        let mut delta = upstream.to_owned();
        for l in (0..layers).rev() {
            grad_w.push(inputs[l].t().dot(&delta));
            if self.biases.is_some() {
                grad_b.push(delta.sum_axis(Axis(0)));
            }
            let mut back = delta.dot(&self.weights[l].t());
            if l > 0 {
                Zip::from(&mut back)
                    .and(&pre[l - 1])
                    .for_each(|g, &z| *g *= leaky_grad(z, self.slope));
            }
            delta = back;
        }
        grad_w.reverse();
        grad_b.reverse();
        let grads = GradientSet {
            weights: grad_w,
            biases: self.biases.as_ref().map(|_| grad_b),
        };
        Ok((grads, delta))
    }

    /// Parameters as one vector: weights layer by layer (row-major), then biases.
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.weights.iter().flat_map(|w| w.iter().copied()).collect();
        if let Some(bs) = &self.biases {
            out.extend(bs.iter().flat_map(|b| b.iter().copied()));
        }
        out
    }

    /// A copy with parameters taken from `flat` in [`flatten_params`](Self::flatten_params) order.
    pub fn with_flat_params(&self, flat: &[f64]) -> Result<Self> {
        let mut net = self.clone();
        let mut it = flat.iter().copied();
        for w in &mut net.weights {
            for v in w.iter_mut() {
                *v = it.next().ok_or_else(|| too_short(flat.len()))?;
            }
        }
        if let Some(bs) = &mut net.biases {
            for b in bs {
                for v in b.iter_mut() {
                    *v = it.next().ok_or_else(|| too_short(flat.len()))?;
                }
            }
        }
        if it.next().is_some() {
            return Err(SvddError::DimensionMismatch("too many parameters".into()));
        }
        Ok(net)
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.as_ref().map_or(0, |bs| bs.iter().map(|b| b.len()).sum())
    }
}

fn too_short(len: usize) -> SvddError {
    SvddError::DimensionMismatch(format!("parameter vector of length {len} is too short"))
}

impl GradientSet {
    pub fn zeros_like(net: &EncoderNetwork) -> Self {
        Self {
            weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: net
                .biases
                .as_ref()
                .map(|bs| bs.iter().map(|b| Array1::zeros(b.len())).collect()),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.weights.iter().flat_map(|w| w.iter().copied()).collect();
        if let Some(bs) = &self.biases {
            out.extend(bs.iter().flat_map(|b| b.iter().copied()));
        }
        out
    }

    /// Adds `scale * W^l` to each weight gradient (the derivative of `scale/2 * sum ||W^l||^2`).
    pub fn add_weight_decay(&mut self, net: &EncoderNetwork, scale: f64) {
        for (g, w) in self.weights.iter_mut().zip(&net.weights) {
            g.scaled_add(scale, w);
        }
    }

    pub fn matches(&self, net: &EncoderNetwork) -> bool {
        let weights_ok = self.weights.len() == net.weights.len()
            && self.weights.iter().zip(&net.weights).all(|(g, w)| g.dim() == w.dim());
        let biases_ok = match (&self.biases, &net.biases) {
            (None, None) => true,
            (Some(g), Some(b)) => g.len() == b.len() && g.iter().zip(b).all(|(x, y)| x.len() == y.len()),
            _ => false,
        };
        weights_ok && biases_ok
    }
}

/// Glorot-uniform weights `U(-a, a)`, `a = sqrt(6 / (in + out))`, drawn layer by
/// layer in row-major order. Constrained networks are rescaled to unit
/// Frobenius norm per layer. Biases, when enabled, start at zero.
pub fn init_network(shape: &[usize], seed: u64, constrained: bool) -> Result<EncoderNetwork> {
    init_network_with(
        shape,
        seed,
        NetworkOptions {
            constrained,
            ..NetworkOptions::default()
        },
    )
}

pub fn init_network_with(shape: &[usize], seed: u64, opts: NetworkOptions) -> Result<EncoderNetwork> {
    if shape.len() < 2 {
        return Err(SvddError::InvalidConfig(
            "shape needs an input and at least one output dimension".into(),
        ));
    }
    if let Some(pos) = shape.iter().position(|&d| d == 0) {
        return Err(SvddError::InvalidConfig(format!("dimension {pos} of the shape is zero")));
    }
    let mut rng = SeededRng::new(seed);
    let weights: Vec<Array2<f64>> = shape
        .windows(2)
        .map(|io| {
            let (fan_in, fan_out) = (io[0], io[1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut w = Array2::from_shape_simple_fn((fan_in, fan_out), || rng.uniform_range(-a, a));
            if opts.constrained {
                let norm = frobenius_norm(&w);
                w /= norm;
            }
            w
        })
        .collect();
    let mut net = EncoderNetwork::from_weights(weights, opts.slope, opts.constrained)?;
    if opts.use_bias {
        let biases = shape[1..].iter().map(|&d| Array1::zeros(d)).collect();
        net = net.with_biases(biases)?;
    }
    Ok(net)
}

/// Encoder plus a decoder of mirrored shape; only the encoder is kept after pretraining.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderNetwork {
    pub encoder: EncoderNetwork,
    pub decoder: EncoderNetwork,
}

impl AutoencoderNetwork {
    pub fn new(encoder: EncoderNetwork, decoder: EncoderNetwork) -> Result<Self> {
        if decoder.output_dim() != encoder.input_dim() || decoder.input_dim() != encoder.output_dim() {
            return Err(SvddError::DimensionMismatch(format!(
                "decoder {:?} does not mirror encoder {:?}",
                decoder.shape(),
                encoder.shape()
            )));
        }
        Ok(Self { encoder, decoder })
    }

    /// Unconstrained encoder of `shape` and decoder of the reversed shape.
    pub fn init(shape: &[usize], seed: u64, opts: NetworkOptions) -> Result<Self> {
        let opts = NetworkOptions {
            constrained: false,
            ..opts
        };
        let encoder = init_network_with(shape, crate::rng::derive_seed(seed, 0), opts)?;
        let reversed: Vec<usize> = shape.iter().rev().copied().collect();
        let decoder = init_network_with(&reversed, crate::rng::derive_seed(seed, 1), opts)?;
        Self::new(encoder, decoder)
    }

    pub fn reconstruct(&self, batch: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let latent = self.encoder.forward(batch)?;
        self.decoder.forward(latent.view())
    }

    /// Reconstruction MSE and its gradients for encoder and decoder.
    pub fn loss_and_grad(&self, batch: ArrayView2<'_, f64>) -> Result<(f64, GradientSet, GradientSet)> {
        let latent = self.encoder.forward(batch)?;
        let recon = self.decoder.forward(latent.view())?;
        let count = batch.len() as f64;
        let diff = &recon - &batch;
        let loss = diff.iter().map(|v| v * v).sum::<f64>() / count;
        let upstream = diff * (2.0 / count);
        let (dec_grad, latent_grad) = self.decoder.backward_with_input(latent.view(), upstream.view())?;
        let enc_grad = self.encoder.backward(batch, latent_grad.view())?;
        Ok((loss, enc_grad, dec_grad))
    }
}

/// Mean squared reconstruction error over samples and coordinates.
pub fn ae_loss(ae: &AutoencoderNetwork, batch: ArrayView2<'_, f64>) -> Result<f64> {
    let recon = ae.reconstruct(batch)?;
    let diff = &recon - &batch;
    Ok(diff.iter().map(|v| v * v).sum::<f64>() / batch.len() as f64)
}
