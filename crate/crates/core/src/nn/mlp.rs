use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{gemm_a_b, gemm_a_bt, gemm_at_b, Matrix};
use super::NnError;

pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    LeakyRelu,
    Identity,
}

pub fn leaky_relu(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu => leaky_relu(x),
            Activation::Identity => x,
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::LeakyRelu if pre < 0.0 => LEAKY_SLOPE,
            _ => 1.0,
        }
    }
}

/// Fully connected layer `y = act(W x + b)`, `W` stored `out x in` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    /// Uniform fan-in initialization in `[-1/sqrt(in), 1/sqrt(in)]`.
    pub fn init<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        let bias = (0..out_dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Self {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Parameter gradients, laid out like the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    /// Flattened in parameter order: per layer, weights then bias.
    pub fn flatten(&self) -> Vec<f64> {
        self.slices().flat_map(|s| s.iter().copied()).collect()
    }

    pub fn slices(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
    }

    pub fn is_zero(&self) -> bool {
        self.slices().all(|s| s.iter().all(|&g| g == 0.0))
    }
}

/// Values saved by [`Mlp::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Input to each layer.
    inputs: Vec<Matrix>,
    /// Pre-activation of each layer.
    pre: Vec<Matrix>,
}

impl ForwardCache {
    pub fn batch(&self) -> usize {
        self.inputs.first().map_or(0, Matrix::rows)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

impl Mlp {
    /// `sizes = [in, h1, ..., out]`; hidden layers use LeakyReLU, the output is linear.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last {
                    Activation::Identity
                } else {
                    Activation::LeakyRelu
                };
                Layer::init(w[0], w[1], act, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::Empty);
        }
        for (index, l) in layers.iter().enumerate() {
            if l.weights.len() != l.in_dim * l.out_dim {
                return Err(NnError::ParamLength {
                    index,
                    expected: l.in_dim * l.out_dim,
                    got: l.weights.len(),
                });
            }
            if l.bias.len() != l.out_dim {
                return Err(NnError::ParamLength {
                    index,
                    expected: l.out_dim,
                    got: l.bias.len(),
                });
            }
            if index > 0 && layers[index - 1].out_dim != l.in_dim {
                return Err(NnError::BrokenChain {
                    index,
                    expected: l.in_dim,
                    got: layers[index - 1].out_dim,
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Direct parameter access; shapes must not be changed.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    fn check_input(&self, x: &Matrix) -> Result<(), NnError> {
        if x.cols() != self.input_dim() {
            return Err(NnError::InputDim {
                expected: self.input_dim(),
                got: x.cols(),
            });
        }
        if let Some(pos) = x.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(NnError::NonFiniteInput {
                row: pos / x.cols(),
                col: pos % x.cols(),
            });
        }
        Ok(())
    }

    fn affine(layer: &Layer, x: &Matrix) -> Matrix {
        let batch = x.rows();
        let mut z = Matrix::zeros(batch, layer.out_dim);
        gemm_a_bt(
            x.as_slice(),
            &layer.weights,
            z.as_mut_slice(),
            batch,
            layer.in_dim,
            layer.out_dim,
        );
        for r in 0..batch {
            for (zi, bi) in z.row_mut(r).iter_mut().zip(&layer.bias) {
                *zi += bi;
            }
        }
        z
    }

    /// Batched forward pass without keeping intermediates.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix, NnError> {
        self.check_input(x)?;
        let mut h = Self::affine(&self.layers[0], x);
        for v in h.as_mut_slice() {
            *v = self.layers[0].activation.apply(*v);
        }
        for layer in &self.layers[1..] {
            h = Self::affine(layer, &h);
            for v in h.as_mut_slice() {
                *v = layer.activation.apply(*v);
            }
        }
        Ok(h)
    }

    /// Batched forward pass that records what [`Mlp::backward`] needs.
    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ForwardCache), NnError> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &self.layers {
            let z = Self::affine(layer, &h);
            let mut out = z.clone();
            for v in out.as_mut_slice() {
                *v = layer.activation.apply(*v);
            }
            inputs.push(h);
            pre.push(z);
            h = out;
        }
        Ok((h, ForwardCache { inputs, pre }))
    }

    fn check_cache(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<(), NnError> {
        let ok = cache.inputs.len() == self.layers.len()
            && cache.pre.len() == self.layers.len()
            && upstream.cols() == self.output_dim()
            && cache
                .pre
                .iter()
                .zip(&self.layers)
                .all(|(p, l)| p.cols() == l.out_dim && p.rows() == upstream.rows());
        if ok {
            Ok(())
        } else {
            Err(NnError::CacheMismatch)
        }
    }

    /// Reverse pass: parameter gradients and the gradient w.r.t. the input.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: &Matrix,
    ) -> Result<(Gradients, Matrix), NnError> {
        self.backward_impl(cache, upstream, true)
            .map(|(g, dx)| (g.expect("requested"), dx))
    }

    /// Reverse pass computing only the input gradient.
    pub fn backward_input(
        &self,
        cache: &ForwardCache,
        upstream: &Matrix,
    ) -> Result<Matrix, NnError> {
        self.backward_impl(cache, upstream, false).map(|(_, dx)| dx)
    }

    fn backward_impl(
        &self,
        cache: &ForwardCache,
        upstream: &Matrix,
        want_params: bool,
    ) -> Result<(Option<Gradients>, Matrix), NnError> {
        self.check_cache(cache, upstream)?;
        let batch = upstream.rows();
        let mut grads = Vec::with_capacity(if want_params { self.layers.len() } else { 0 });
        let mut delta = upstream.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            // through the activation
            for (d, &z) in delta
                .as_mut_slice()
                .iter_mut()
                .zip(cache.pre[idx].as_slice())
            {
                *d *= layer.activation.derivative(z);
            }
            if want_params {
                let mut gw = vec![0.0; layer.out_dim * layer.in_dim];
                gemm_at_b(
                    delta.as_slice(),
                    cache.inputs[idx].as_slice(),
                    &mut gw,
                    layer.out_dim,
                    batch,
                    layer.in_dim,
                );
                let mut gb = vec![0.0; layer.out_dim];
                for r in 0..batch {
                    for (g, d) in gb.iter_mut().zip(delta.row(r)) {
                        *g += d;
                    }
                }
                grads.push(LayerGrad {
                    weights: gw,
                    bias: gb,
                });
            }
            let mut dx = Matrix::zeros(batch, layer.in_dim);
            gemm_a_b(
                delta.as_slice(),
                &layer.weights,
                dx.as_mut_slice(),
                batch,
                layer.out_dim,
                layer.in_dim,
            );
            delta = dx;
        }
        let grads = want_params.then(|| {
            grads.reverse();
            Gradients { layers: grads }
        });
        Ok((grads, delta))
    }

    /// Mutable parameter slices in canonical order (per layer: weights, bias).
    pub fn param_slices_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
    }

    pub fn param_slices(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.param_slices()
            .flat_map(|s| s.iter().copied())
            .collect()
    }

    /// Panics if `params.len() != self.param_count()`.
    pub fn set_flat_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count(), "parameter count");
        let mut offset = 0;
        for s in self.param_slices_mut() {
            s.copy_from_slice(&params[offset..offset + s.len()]);
            offset += s.len();
        }
    }

    /// `self <- tau * source + (1 - tau) * self`, element-wise.
    ///
    /// `tau == 1` copies `source` exactly.
    pub fn soft_update_from(&mut self, source: &Mlp, tau: f64) {
        assert_eq!(
            self.param_count(),
            source.param_count(),
            "architectures differ"
        );
        for (dst, src) in self.param_slices_mut().zip(source.param_slices()) {
            if tau == 1.0 {
                dst.copy_from_slice(src);
            } else {
                for (d, s) in dst.iter_mut().zip(src) {
                    *d = tau * s + (1.0 - tau) * *d;
                }
            }
        }
    }

    pub fn to_doc(&self) -> NetworkDoc {
        NetworkDoc {
            layer_shapes: self.layers.iter().map(|l| [l.out_dim, l.in_dim]).collect(),
            activations: self.layers.iter().map(|l| l.activation).collect(),
            weights: self.layers.iter().map(|l| l.weights.clone()).collect(),
            biases: self.layers.iter().map(|l| l.bias.clone()).collect(),
        }
    }

    pub fn from_doc(doc: &NetworkDoc) -> Result<Self, NnError> {
        let n = doc.layer_shapes.len();
        if doc.activations.len() != n || doc.weights.len() != n || doc.biases.len() != n {
            return Err(NnError::ParamLength {
                index: 0,
                expected: n,
                got: doc
                    .weights
                    .len()
                    .min(doc.biases.len())
                    .min(doc.activations.len()),
            });
        }
        let layers = (0..n)
            .map(|i| Layer {
                out_dim: doc.layer_shapes[i][0],
                in_dim: doc.layer_shapes[i][1],
                weights: doc.weights[i].clone(),
                bias: doc.biases[i].clone(),
                activation: doc.activations[i],
            })
            .collect();
        Self::from_layers(layers)
    }
}

/// Serialized network: shapes as `[out, in]`, row-major weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDoc {
    pub layer_shapes: Vec<[usize; 2]>,
    pub activations: Vec<Activation>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}
