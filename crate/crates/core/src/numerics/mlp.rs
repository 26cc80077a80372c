use super::tensor::affine;
use super::RandomSource;
use crate::{Error, Result};

/// Hidden-layer nonlinearity. The output layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Linear,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Linear => 1.0,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Linear => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Linear),
            _ => None,
        }
    }
}

/// Feed-forward network with all parameters in one flat vector.
///
/// Layer `l` maps `sizes[l]` inputs to `sizes[l + 1]` outputs; its block in
/// `values` is the row-major `sizes[l+1] x sizes[l]` weight matrix followed by
/// the `sizes[l+1]` bias entries.
///
/// A network built with a skip gain carries one extra trailing parameter
/// `s` and adds `s * input[..n_out]` to its output (a residual path for
/// inputs that the output has to reproduce).
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    sizes: Vec<usize>,
    activation: Activation,
    skip: bool,
    values: Vec<f64>,
}

/// Post-activation values of every layer from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache holds at least the input")
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl NetParams {
    pub fn zeros(sizes: &[usize], activation: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::Shape(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            activation,
            skip: false,
            values: vec![0.0; param_count(sizes)],
        })
    }

    /// Same network with a skip gain parameter appended, set to `gain`.
    pub fn with_skip(mut self, gain: f64) -> Result<Self> {
        if self.skip {
            return Err(Error::InvalidArgument("network already has a skip gain".into()));
        }
        if self.input_width() < self.output_width() {
            return Err(Error::Shape(format!(
                "skip needs input width {} >= output width {}",
                self.input_width(),
                self.output_width()
            )));
        }
        self.skip = true;
        self.values.push(gain);
        Ok(self)
    }

    pub fn has_skip(&self) -> bool {
        self.skip
    }

    /// The skip gain, 0 without one.
    pub fn skip_gain(&self) -> f64 {
        if self.skip {
            *self.values.last().unwrap()
        } else {
            0.0
        }
    }

    /// Scaled-normal initialization (std `1/sqrt(fan_in)`, zero biases); the
    /// output layer is additionally scaled by `output_gain`.
    pub fn init(
        sizes: &[usize],
        activation: Activation,
        output_gain: f64,
        rng: &mut RandomSource,
    ) -> Result<Self> {
        let mut net = Self::zeros(sizes, activation)?;
        let n_layers = net.n_layers();
        let mut offset = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let gain = if l + 1 == n_layers { output_gain } else { 1.0 };
            let scale = gain / (n_in as f64).sqrt();
            for w in &mut net.values[offset..offset + n_in * n_out] {
                *w = rng.normal() * scale;
            }
            offset += n_in * n_out + n_out;
        }
        Ok(net)
    }

    pub fn from_values(sizes: &[usize], activation: Activation, values: Vec<f64>) -> Result<Self> {
        Self::from_values_with_skip(sizes, activation, false, values)
    }

    pub fn from_values_with_skip(sizes: &[usize], activation: Activation, skip: bool, values: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(sizes, activation)?;
        if skip {
            net = net.with_skip(0.0)?;
        }
        if values.len() != net.values.len() {
            return Err(Error::Shape(format!(
                "layer sizes {sizes:?} need {} parameters, got {}",
                net.values.len(),
                values.len()
            )));
        }
        net.values = values;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_width(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn same_architecture(&self, other: &NetParams) -> bool {
        self.sizes == other.sizes && self.activation == other.activation && self.skip == other.skip
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.n_layers());
        let mut offset = 0;
        for w in self.sizes.windows(2) {
            offsets.push(offset);
            offset += w[0] * w[1] + w[1];
        }
        offsets
    }

    /// Weight block (row-major `out x in`) and bias of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let offset = self.layer_offsets()[l];
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let w = &self.values[offset..offset + n_in * n_out];
        let b = &self.values[offset + n_in * n_out..offset + n_in * n_out + n_out];
        (w, b)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(input)?.activations.pop().unwrap())
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache> {
        if input.len() != self.input_width() {
            return Err(Error::Shape(format!(
                "network expects input width {}, got {}",
                self.input_width(),
                input.len()
            )));
        }
        let n_layers = self.n_layers();
        let mut activations = Vec::with_capacity(n_layers + 1);
        activations.push(input.to_vec());
        for l in 0..n_layers {
            let (w, b) = self.layer(l);
            let mut y = vec![0.0; self.sizes[l + 1]];
            affine(w, b, &activations[l], &mut y);
            if l + 1 < n_layers {
                for v in &mut y {
                    *v = self.activation.apply(*v);
                }
            }
            activations.push(y);
        }
        if self.skip {
            let gain = self.skip_gain();
            let (head, tail) = activations.split_at_mut(n_layers);
            for (y, x) in tail[0].iter_mut().zip(&head[0]) {
                *y += gain * x;
            }
        }
        Ok(ForwardCache { activations })
    }

    /// Exact reverse-mode gradients: returns `(d params, d input)`.
    pub fn backward(&self, input: &[f64], out_grad: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let cache = self.forward_cached(input)?;
        let mut grads = vec![0.0; self.len()];
        let input_grad = self.backward_into(&cache, out_grad, 1.0, &mut grads)?;
        Ok((grads, input_grad))
    }

    /// Accumulates `scale * d(out_grad . output)/d params` into `grads` and
    /// returns the (unscaled) input gradient.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        out_grad: &[f64],
        scale: f64,
        grads: &mut [f64],
    ) -> Result<Vec<f64>> {
        if out_grad.len() != self.output_width() {
            return Err(Error::Shape(format!(
                "output gradient width {} does not match network output {}",
                out_grad.len(),
                self.output_width()
            )));
        }
        if grads.len() != self.len() {
            return Err(Error::Shape("gradient buffer size".into()));
        }
        let offsets = self.layer_offsets();
        let n_layers = self.n_layers();
        let input = &cache.activations[0];
        let skip_input_grad: Option<Vec<f64>> = if self.skip {
            let n = grads.len();
            grads[n - 1] += scale * out_grad.iter().zip(input).map(|(g, x)| g * x).sum::<f64>();
            Some(out_grad.iter().map(|g| self.skip_gain() * g).collect())
        } else {
            None
        };
        let mut delta = out_grad.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            if l + 1 < n_layers {
                for (d, y) in delta.iter_mut().zip(&cache.activations[l + 1]) {
                    *d *= self.activation.derivative_from_output(*y);
                }
            }
            let x = &cache.activations[l];
            let offset = offsets[l];
            {
                let (gw, gb) = grads[offset..offset + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for o in 0..n_out {
                    let d = delta[o] * scale;
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    for (g, xi) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
                        *g += d * xi;
                    }
                }
            }
            let w = &self.values[offset..offset + n_in * n_out];
            let mut next = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for (nx, wi) in next.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *nx += d * wi;
                }
            }
            delta = next;
        }
        if let Some(extra) = skip_input_grad {
            for (d, e) in delta.iter_mut().zip(extra) {
                *d += e;
            }
        }
        Ok(delta)
    }
}
