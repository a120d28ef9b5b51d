//! Declarative architecture specs, instantiated networks, and checkpoints.
//!
//! A [`NetworkSpec`] names one of the six architecture families and its
//! hyperparameters; [`NetworkSpec::build`] instantiates the parameter state.
//! Forward passes record a [`Tape`] of per-layer caches; `backward` consumes
//! exactly one matching tape in reverse and returns per-layer gradients for
//! the trainable arrays only.

use crate::error::{KanError, Result};
use crate::layers::{
    Activation, ActivationLayer, ActivationTape, BatchNormLayer, BatchNormTape, ConvLayer,
    ConvTape, DenseLayer, DenseTape, KanConvConfig, KanConvLayer, KanConvTape, KanLinearConfig,
    KanLinearLayer, KanLinearTape, LayerGrads, MaxPoolLayer, MaxPoolTape,
};
use crate::tensor::{Rng, Tensor};
use serde::{Deserialize, Serialize};

/// Architecture families from the experiments: linear KAN and MLP baselines
/// plus the four convolutional stacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlp,
    Kan,
    Convnet,
    Kanv,
    Convkan,
    Kkan,
}

impl ModelKind {
    pub fn is_convolutional(&self) -> bool {
        matches!(
            self,
            ModelKind::Convnet | ModelKind::Kanv | ModelKind::Convkan | ModelKind::Kkan
        )
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Kan => "kan",
            ModelKind::Convnet => "convnet",
            ModelKind::Kanv => "kanv",
            ModelKind::Convkan => "convkan",
            ModelKind::Kkan => "kkan",
        };
        f.write_str(s)
    }
}

/// Declarative architecture: model family, widths, spline grid, and the
/// trainability toggles for the KAN scale/bias terms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub model: ModelKind,
    /// Layer widths for the linear families, e.g. `[784, 128, 10]`.
    /// Ignored by the convolutional families (their shapes are fixed).
    pub widths: Vec<usize>,
    pub grid_size: usize,
    pub order: usize,
    /// Spline input domain for first-layer inputs.
    pub lo: f64,
    pub hi: f64,
    pub train_ws: bool,
    pub train_wb: bool,
    pub train_beta: bool,
    /// Whether KAN linear layers carry the output bias term at all.
    pub with_beta: bool,
    /// Batch normalization after each convolution (conv families only).
    pub batch_norm: bool,
}

impl NetworkSpec {
    /// EffKAN-style linear KAN over `widths`.
    pub fn kan(widths: Vec<usize>, grid_size: usize, order: usize) -> NetworkSpec {
        NetworkSpec {
            model: ModelKind::Kan,
            widths,
            grid_size,
            order,
            lo: -1.0,
            hi: 1.0,
            train_ws: true,
            train_wb: true,
            train_beta: false,
            with_beta: false,
            batch_norm: false,
        }
    }

    /// MLP over `widths` with ReLU hidden activations.
    pub fn mlp(widths: Vec<usize>) -> NetworkSpec {
        NetworkSpec {
            model: ModelKind::Mlp,
            widths,
            grid_size: 0,
            order: 0,
            lo: -1.0,
            hi: 1.0,
            train_ws: false,
            train_wb: false,
            train_beta: false,
            with_beta: false,
            batch_norm: false,
        }
    }

    /// Convolutional family with the fixed shapes from the appendix study.
    pub fn conv(model: ModelKind, grid_size: usize, order: usize, batch_norm: bool) -> NetworkSpec {
        NetworkSpec {
            model,
            widths: Vec::new(),
            grid_size,
            order,
            lo: -1.0,
            hi: 1.0,
            train_ws: true,
            train_wb: true,
            train_beta: false,
            with_beta: false,
            batch_norm,
        }
    }

    /// Continual-learning trainability: freeze residual scale and bias,
    /// choose whether the spline scale trains.
    pub fn cl_mode(mut self, ws_trainable: bool) -> NetworkSpec {
        self.train_ws = ws_trainable;
        self.train_wb = false;
        self.train_beta = false;
        self
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> NetworkSpec {
        self.lo = lo;
        self.hi = hi;
        self
    }

    /// Full-formulation flavor: KAN layers carry a bias term.
    pub fn with_beta_term(mut self) -> NetworkSpec {
        self.with_beta = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.model {
            ModelKind::Mlp => {
                if self.widths.len() < 2 {
                    return Err(KanError::InvalidConfig(
                        "widths: an MLP needs at least input and output widths".into(),
                    ));
                }
                if self.widths.iter().any(|&w| w == 0) {
                    return Err(KanError::InvalidConfig("widths: zero width".into()));
                }
            }
            ModelKind::Kan => {
                if self.widths.len() < 2 {
                    return Err(KanError::InvalidConfig(
                        "widths: a KAN needs at least input and output widths".into(),
                    ));
                }
                if self.widths.iter().any(|&w| w == 0) {
                    return Err(KanError::InvalidConfig("widths: zero width".into()));
                }
                if self.grid_size < 1 {
                    return Err(KanError::InvalidConfig("grid_size: must be >= 1".into()));
                }
                if self.train_beta && !self.with_beta {
                    return Err(KanError::InvalidConfig(
                        "train_beta: layer has no beta term".into(),
                    ));
                }
            }
            _ => {
                if !self.widths.is_empty() {
                    return Err(KanError::InvalidConfig(
                        "widths: convolutional families have fixed shapes".into(),
                    ));
                }
                if matches!(
                    self.model,
                    ModelKind::Kanv | ModelKind::Convkan | ModelKind::Kkan
                ) && self.grid_size < 1
                {
                    return Err(KanError::InvalidConfig("grid_size: must be >= 1".into()));
                }
            }
        }
        if !(self.lo < self.hi) {
            return Err(KanError::InvalidConfig("lo/hi: empty spline domain".into()));
        }
        Ok(())
    }

    fn kan_linear_cfg(&self, d_in: usize, d_out: usize, squash: bool) -> KanLinearConfig {
        KanLinearConfig {
            d_in,
            d_out,
            grid_size: self.grid_size,
            order: self.order,
            lo: self.lo,
            hi: self.hi,
            with_beta: self.with_beta,
            train_ws: self.train_ws,
            train_wb: self.train_wb,
            train_beta: self.train_beta,
            squash_input: squash,
        }
    }

    fn kan_conv_cfg(&self, c_in: usize, n_f: usize, squash: bool) -> KanConvConfig {
        KanConvConfig {
            c_in,
            n_f,
            k_s: 3,
            grid_size: self.grid_size,
            order: self.order,
            lo: self.lo,
            hi: self.hi,
            train_ws: self.train_ws,
            train_wb: self.train_wb,
            squash_input: squash,
        }
    }

    /// Instantiates the parameter state.
    pub fn build(&self, rng: &mut Rng) -> Result<Network> {
        self.validate()?;
        let mut layers = Vec::new();
        match self.model {
            ModelKind::Mlp => {
                let n = self.widths.len() - 1;
                for i in 0..n {
                    let act = if i + 1 < n {
                        Activation::Relu
                    } else {
                        Activation::None
                    };
                    layers.push(Layer::Dense(DenseLayer::new(
                        self.widths[i],
                        self.widths[i + 1],
                        act,
                        rng,
                    )));
                }
            }
            ModelKind::Kan => {
                let n = self.widths.len() - 1;
                for i in 0..n {
                    let cfg = self.kan_linear_cfg(self.widths[i], self.widths[i + 1], i > 0);
                    layers.push(Layer::KanLinear(KanLinearLayer::new(cfg, rng)?));
                }
            }
            ModelKind::Convnet => {
                layers.push(Layer::Conv(ConvLayer::new(1, 5, 3, rng)));
                if self.batch_norm {
                    layers.push(Layer::BatchNorm(BatchNormLayer::new(5)));
                }
                layers.push(Layer::Activation(ActivationLayer::new(Activation::Relu)));
                layers.push(Layer::Conv(ConvLayer::new(5, 5, 3, rng)));
                if self.batch_norm {
                    layers.push(Layer::BatchNorm(BatchNormLayer::new(5)));
                }
                layers.push(Layer::Activation(ActivationLayer::new(Activation::Relu)));
                layers.push(Layer::MaxPool(MaxPoolLayer::new(2)));
                layers.push(Layer::Flatten);
                layers.push(Layer::Dense(DenseLayer::new(
                    980,
                    161,
                    Activation::Relu,
                    rng,
                )));
                layers.push(Layer::Dense(DenseLayer::new(
                    161,
                    10,
                    Activation::None,
                    rng,
                )));
            }
            ModelKind::Kanv => {
                layers.push(Layer::KanConv(KanConvLayer::new(
                    self.kan_conv_cfg(1, 5, false),
                    rng,
                )?));
                if self.batch_norm {
                    layers.push(Layer::BatchNorm(BatchNormLayer::new(5)));
                }
                layers.push(Layer::KanConv(KanConvLayer::new(
                    self.kan_conv_cfg(5, 5, true),
                    rng,
                )?));
                if self.batch_norm {
                    layers.push(Layer::BatchNorm(BatchNormLayer::new(5)));
                }
                layers.push(Layer::MaxPool(MaxPoolLayer::new(2)));
                layers.push(Layer::Flatten);
                layers.push(Layer::Dense(DenseLayer::new(
                    980,
                    161,
                    Activation::Relu,
                    rng,
                )));
                layers.push(Layer::Dense(DenseLayer::new(
                    161,
                    10,
                    Activation::None,
                    rng,
                )));
            }
            ModelKind::Convkan => {
                layers.push(Layer::Conv(ConvLayer::new(1, 5, 3, rng)));
                if self.batch_norm {
                    layers.push(Layer::BatchNorm(BatchNormLayer::new(5)));
                }
                layers.push(Layer::Activation(ActivationLayer::new(Activation::Relu)));
                layers.push(Layer::Conv(ConvLayer::new(5, 5, 3, rng)));
                if self.batch_norm {
                    layers.push(Layer::BatchNorm(BatchNormLayer::new(5)));
                }
                layers.push(Layer::Activation(ActivationLayer::new(Activation::Relu)));
                layers.push(Layer::MaxPool(MaxPoolLayer::new(2)));
                layers.push(Layer::Flatten);
                layers.push(Layer::KanLinear(KanLinearLayer::new(
                    self.kan_linear_cfg(980, 20, true),
                    rng,
                )?));
                layers.push(Layer::KanLinear(KanLinearLayer::new(
                    self.kan_linear_cfg(20, 10, true),
                    rng,
                )?));
            }
            ModelKind::Kkan => {
                layers.push(Layer::KanConv(KanConvLayer::new(
                    self.kan_conv_cfg(1, 5, false),
                    rng,
                )?));
                if self.batch_norm {
                    layers.push(Layer::BatchNorm(BatchNormLayer::new(5)));
                }
                layers.push(Layer::KanConv(KanConvLayer::new(
                    self.kan_conv_cfg(5, 5, true),
                    rng,
                )?));
                if self.batch_norm {
                    layers.push(Layer::BatchNorm(BatchNormLayer::new(5)));
                }
                layers.push(Layer::MaxPool(MaxPoolLayer::new(2)));
                layers.push(Layer::Flatten);
                layers.push(Layer::KanLinear(KanLinearLayer::new(
                    self.kan_linear_cfg(980, 31, true),
                    rng,
                )?));
                layers.push(Layer::KanLinear(KanLinearLayer::new(
                    self.kan_linear_cfg(31, 10, true),
                    rng,
                )?));
            }
        }
        Ok(Network {
            spec: self.clone(),
            layers,
        })
    }
}

/// One layer of an instantiated network.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Layer {
    KanLinear(KanLinearLayer),
    Dense(DenseLayer),
    Conv(ConvLayer),
    KanConv(KanConvLayer),
    MaxPool(MaxPoolLayer),
    BatchNorm(BatchNormLayer),
    Activation(ActivationLayer),
    Flatten,
}

/// Cached forward intermediates for one layer.
pub enum TapeEntry {
    KanLinear(KanLinearTape),
    Dense(DenseTape),
    Conv(ConvTape),
    KanConv(KanConvTape),
    MaxPool(MaxPoolTape),
    BatchNorm(BatchNormTape),
    Activation(ActivationTape),
    Flatten { input_shape: Vec<usize> },
}

/// Per-layer caches from exactly one forward pass; consumed by `backward`.
pub struct Tape {
    entries: Vec<TapeEntry>,
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::KanLinear(_) => "kan_linear",
            Layer::Dense(_) => "dense",
            Layer::Conv(_) => "conv",
            Layer::KanConv(_) => "kan_conv",
            Layer::MaxPool(_) => "maxpool",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::Activation(_) => "activation",
            Layer::Flatten => "flatten",
        }
    }

    pub fn trainable_arrays_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        match self {
            Layer::KanLinear(l) => l.trainable_arrays_mut(),
            Layer::Dense(l) => l.trainable_arrays_mut(),
            Layer::Conv(l) => l.trainable_arrays_mut(),
            Layer::KanConv(l) => l.trainable_arrays_mut(),
            Layer::BatchNorm(l) => l.trainable_arrays_mut(),
            _ => Vec::new(),
        }
    }

    /// Every parameter array including frozen ones and running statistics.
    pub fn state_arrays_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        match self {
            Layer::KanLinear(l) => l.state_arrays_mut(),
            Layer::Dense(l) => l.state_arrays_mut(),
            Layer::Conv(l) => l.state_arrays_mut(),
            Layer::KanConv(l) => l.state_arrays_mut(),
            Layer::BatchNorm(l) => l.state_arrays_mut(),
            _ => Vec::new(),
        }
    }

    pub fn trainable_param_count(&self) -> usize {
        match self {
            Layer::KanLinear(l) => l.trainable_param_count(),
            Layer::Dense(l) => l.trainable_param_count(),
            Layer::Conv(l) => l.trainable_param_count(),
            Layer::KanConv(l) => l.trainable_param_count(),
            Layer::BatchNorm(l) => l.trainable_param_count(),
            _ => 0,
        }
    }

    fn forward(&mut self, x: &Tensor, training: bool) -> Result<(Tensor, TapeEntry)> {
        match self {
            Layer::KanLinear(l) => {
                let (out, tape) = l.forward(x, training)?;
                Ok((out, TapeEntry::KanLinear(tape)))
            }
            Layer::Dense(l) => {
                let (out, tape) = l.forward(x)?;
                Ok((out, TapeEntry::Dense(tape)))
            }
            Layer::Conv(l) => {
                let (out, tape) = l.forward(x)?;
                Ok((out, TapeEntry::Conv(tape)))
            }
            Layer::KanConv(l) => {
                let (out, tape) = l.forward(x, training)?;
                Ok((out, TapeEntry::KanConv(tape)))
            }
            Layer::MaxPool(l) => {
                let (out, tape) = l.forward(x)?;
                Ok((out, TapeEntry::MaxPool(tape)))
            }
            Layer::BatchNorm(l) => {
                let (out, tape) = l.forward(x, training)?;
                Ok((out, TapeEntry::BatchNorm(tape)))
            }
            Layer::Activation(l) => {
                let (out, tape) = l.forward(x);
                Ok((out, TapeEntry::Activation(tape)))
            }
            Layer::Flatten => {
                let shape = x.shape().to_vec();
                let batch = shape[0];
                let rest: usize = shape[1..].iter().product();
                let out = x.clone().reshape(&[batch, rest])?;
                Ok((out, TapeEntry::Flatten { input_shape: shape }))
            }
        }
    }

    fn backward(
        &self,
        grad_out: &Tensor,
        tape: TapeEntry,
        needs_input_grad: bool,
    ) -> Result<(Option<Tensor>, LayerGrads)> {
        match (self, tape) {
            (Layer::KanLinear(l), TapeEntry::KanLinear(t)) => {
                l.backward(grad_out, &t, needs_input_grad)
            }
            (Layer::Dense(l), TapeEntry::Dense(t)) => l.backward(grad_out, &t, needs_input_grad),
            (Layer::Conv(l), TapeEntry::Conv(t)) => l.backward(grad_out, &t, needs_input_grad),
            (Layer::KanConv(l), TapeEntry::KanConv(t)) => {
                l.backward(grad_out, &t, needs_input_grad)
            }
            (Layer::MaxPool(l), TapeEntry::MaxPool(t)) => {
                let gx = if needs_input_grad {
                    Some(l.backward(grad_out, &t)?)
                } else {
                    None
                };
                Ok((gx, Vec::new()))
            }
            (Layer::BatchNorm(l), TapeEntry::BatchNorm(t)) => {
                l.backward(grad_out, &t, needs_input_grad)
            }
            (Layer::Activation(l), TapeEntry::Activation(t)) => {
                let gx = l.backward(grad_out, t)?;
                Ok((needs_input_grad.then_some(gx), Vec::new()))
            }
            (Layer::Flatten, TapeEntry::Flatten { input_shape }) => {
                let gx = grad_out.clone().reshape(&input_shape)?;
                Ok((Some(gx), Vec::new()))
            }
            _ => Err(KanError::InvalidConfig(
                "tape does not match layer sequence".into(),
            )),
        }
    }
}

/// An instantiated architecture: spec plus parameter state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    pub spec: NetworkSpec,
    pub layers: Vec<Layer>,
}

impl Network {
    /// Forward through all layers, recording one tape entry per layer.
    pub fn forward(&mut self, x: &Tensor, training: bool) -> Result<(Tensor, Tape)> {
        let mut entries = Vec::with_capacity(self.layers.len());
        let mut current = x.clone();
        for layer in &mut self.layers {
            let (next, entry) = layer.forward(&current, training)?;
            entries.push(entry);
            current = next;
        }
        Ok((current, Tape { entries }))
    }

    /// Backward through all layers in reverse, consuming the tape. Returns
    /// per-layer gradients aligned with `layers` (trainable arrays only;
    /// layers without parameters get an empty entry).
    pub fn backward(&self, grad_loss: &Tensor, tape: Tape) -> Result<Vec<LayerGrads>> {
        if tape.entries.len() != self.layers.len() {
            return Err(KanError::InvalidConfig(
                "tape does not match layer sequence".into(),
            ));
        }
        let mut grads: Vec<LayerGrads> = vec![Vec::new(); self.layers.len()];
        let mut entries = tape.entries;
        let mut grad = grad_loss.clone();
        for idx in (0..self.layers.len()).rev() {
            let entry = entries.pop().expect("length checked");
            let needs_input = idx > 0;
            let (gx, layer_grads) = self.layers[idx].backward(&grad, entry, needs_input)?;
            grads[idx] = layer_grads;
            if let Some(gx) = gx {
                grad = gx;
            }
        }
        Ok(grads)
    }

    pub fn trainable_param_count(&self) -> usize {
        self.layers.iter().map(Layer::trainable_param_count).sum()
    }

    /// Flat snapshot of every parameter array (used by the freeze-contract
    /// tests to assert bitwise stability).
    pub fn state_snapshot(&self) -> Vec<Vec<f64>> {
        let mut copy = self.clone();
        copy.layers
            .iter_mut()
            .flat_map(|l| {
                l.state_arrays_mut()
                    .into_iter()
                    .map(|(_, a)| a.to_vec())
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    /// Serializes spec and all parameter arrays to a versioned JSON document.
    /// The `f64` round-trip is bit-exact.
    pub fn save_checkpoint(&self, path: &std::path::Path) -> Result<()> {
        let doc = CheckpointDoc {
            version: CHECKPOINT_VERSION,
            network: self.clone(),
        };
        let json = serde_json::to_string(&doc)
            .map_err(|e| KanError::Checkpoint(format!("serialize: {e}")))?;
        std::fs::write(path, json).map_err(|e| KanError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn load_checkpoint(path: &std::path::Path) -> Result<Network> {
        let json = std::fs::read_to_string(path).map_err(|e| KanError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let doc: CheckpointDoc = serde_json::from_str(&json)
            .map_err(|e| KanError::Checkpoint(format!("parse: {e}")))?;
        if doc.version != CHECKPOINT_VERSION {
            return Err(KanError::Checkpoint(format!(
                "unsupported checkpoint version {}",
                doc.version
            )));
        }
        Ok(doc.network)
    }
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointDoc {
    version: u32,
    network: Network,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::softmax_cross_entropy;

    #[test]
    fn mlp_spec_builds_expected_shapes() {
        let spec = NetworkSpec::mlp(vec![784, 784, 256, 10]);
        let net = spec.build(&mut Rng::new(1)).unwrap();
        assert_eq!(net.layers.len(), 3);
        assert_eq!(net.trainable_param_count(), 818_970);
    }

    #[test]
    fn kan_spec_builds_expected_counts() {
        let spec = NetworkSpec::kan(vec![784, 128, 10], 5, 3).cl_mode(true);
        let net = spec.build(&mut Rng::new(2)).unwrap();
        assert_eq!(net.trainable_param_count(), 914_688);
        let spec = NetworkSpec::kan(vec![784, 128, 10], 5, 3).cl_mode(false);
        let net = spec.build(&mut Rng::new(2)).unwrap();
        assert_eq!(net.trainable_param_count(), 813_056);
    }

    #[test]
    fn conv_families_forward_mnist_shapes() {
        for model in [
            ModelKind::Convnet,
            ModelKind::Kanv,
            ModelKind::Convkan,
            ModelKind::Kkan,
        ] {
            let spec = NetworkSpec::conv(model, 5, 3, true);
            let mut net = spec.build(&mut Rng::new(3)).unwrap();
            let x = Rng::new(4).uniform_tensor(&[2, 1, 28, 28], -1.0, 1.0);
            let (out, tape) = net.forward(&x, true).unwrap();
            assert_eq!(out.shape(), &[2, 10], "{model:?}");
            let (_, grad) = softmax_cross_entropy(&out, &[3, 7]).unwrap();
            let grads = net.backward(&grad, tape).unwrap();
            assert_eq!(grads.len(), net.layers.len());
        }
    }

    #[test]
    fn whole_network_gradient_matches_finite_differences() {
        // small end-to-end KAN through the softmax loss
        let spec = NetworkSpec::kan(vec![4, 3, 3], 4, 3);
        let mut net = spec.build(&mut Rng::new(5)).unwrap();
        let x = Rng::new(6).uniform_tensor(&[2, 4], -0.9, 0.9);
        let labels = [0u8, 2];

        let loss_of = |net: &mut Network, x: &Tensor| -> f64 {
            let (out, _) = net.forward(x, true).unwrap();
            softmax_cross_entropy(&out, &labels).unwrap().0
        };

        let (out, tape) = net.forward(&x, true).unwrap();
        let (_, grad_logits) = softmax_cross_entropy(&out, &labels).unwrap();
        let grads = net.backward(&grad_logits, tape).unwrap();

        let eps = 1e-5;
        for layer_idx in 0..net.layers.len() {
            for slot in 0..grads[layer_idx].len() {
                let len = grads[layer_idx][slot].len();
                for idx in (0..len).step_by(1 + len / 25) {
                    let orig = {
                        let mut arrays = net.layers[layer_idx].trainable_arrays_mut();
                        let v = arrays[slot].1[idx];
                        arrays[slot].1[idx] = v + eps;
                        v
                    };
                    let up = loss_of(&mut net, &x);
                    {
                        let mut arrays = net.layers[layer_idx].trainable_arrays_mut();
                        arrays[slot].1[idx] = orig - eps;
                    }
                    let down = loss_of(&mut net, &x);
                    {
                        let mut arrays = net.layers[layer_idx].trainable_arrays_mut();
                        arrays[slot].1[idx] = orig;
                    }
                    let fd = (up - down) / (2.0 * eps);
                    let got = grads[layer_idx][slot][idx];
                    let denom = fd.abs().max(got.abs()).max(1e-6);
                    assert!(
                        ((got - fd) / denom).abs() < 1e-4,
                        "layer {layer_idx} slot {slot} idx {idx}: {got} vs {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        let spec = NetworkSpec::kan(vec![6, 4, 3], 5, 3).cl_mode(true);
        let mut net = spec.build(&mut Rng::new(7)).unwrap();
        let x = Rng::new(8).uniform_tensor(&[3, 6], -1.0, 1.0);
        net.forward(&x, true).unwrap();
        net.save_checkpoint(&path).unwrap();
        let loaded = Network::load_checkpoint(&path).unwrap();
        assert_eq!(net.state_snapshot(), loaded.state_snapshot());
        // and outputs agree bitwise
        let (a, _) = net.forward(&x, false).unwrap();
        let (b, _) = loaded.clone().forward(&x, false).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(NetworkSpec::mlp(vec![784]).validate().is_err());
        assert!(NetworkSpec::kan(vec![784, 0, 10], 5, 3).validate().is_err());
        let mut bad = NetworkSpec::kan(vec![4, 2], 5, 3);
        bad.grid_size = 0;
        assert!(bad.validate().is_err());
        let mut bad = NetworkSpec::conv(ModelKind::Convnet, 5, 3, true);
        bad.widths = vec![1, 2];
        assert!(bad.validate().is_err());
    }

    #[test]
    fn tape_mismatch_is_detected() {
        let spec = NetworkSpec::mlp(vec![4, 3]);
        let net = spec.build(&mut Rng::new(9)).unwrap();
        let other_spec = NetworkSpec::kan(vec![4, 3], 5, 3);
        let mut other = other_spec.build(&mut Rng::new(10)).unwrap();
        let x = Rng::new(11).uniform_tensor(&[2, 4], -1.0, 1.0);
        let (_, tape) = other.forward(&x, true).unwrap();
        let grad = Tensor::zeros(&[2, 3]);
        assert!(net.backward(&grad, tape).is_err());
    }
}
