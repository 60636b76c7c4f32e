//! Differentiable classifiers: affine models and ReLU MLPs.
//!
//! Every attack and analysis in the crate touches models only through
//! `forward`, `predict`, and the input-gradient methods, so the rest of
//! the toolkit is architecture-agnostic.

mod io;
mod train;

pub use io::{load_model, save_model};
pub use train::{mean_cross_entropy, train, TrainConfig, TrainReport};

use crate::error::{Error, Result};
use crate::numerics::{RngStream, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::Parse(format!(
                "unknown activation {other:?} (expected \"identity\" or \"relu\")"
            ))),
        }
    }

    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative at pre-activation `z`; the ReLU subgradient at 0 is 0.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// One dense layer: `activation(W x + b)` with `W` of shape out x in.
#[derive(Debug, Clone)]
pub struct Layer {
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weight: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        if weight.rank() != 2 || bias.rank() != 1 {
            return Err(Error::Shape(
                "layer needs a rank-2 weight and rank-1 bias".into(),
            ));
        }
        if weight.rows() != bias.len() {
            return Err(Error::Shape(format!(
                "layer weight has {} rows but bias has {} entries",
                weight.rows(),
                bias.len()
            )));
        }
        Ok(Layer {
            weight,
            bias,
            activation,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }
}

/// A parameterized classifier mapping `R^d` to `C` logits.
#[derive(Debug, Clone)]
pub struct Model {
    layers: Vec<Layer>,
    input_dim: usize,
    num_classes: usize,
}

impl Model {
    /// Assembles a model, checking that consecutive layer dimensions chain
    /// and the final layer emits one logit per class.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("model needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::Shape(format!(
                    "layer dimensions do not chain: {} -> {}",
                    pair[0].output_dim(),
                    pair[1].input_dim()
                )));
            }
        }
        let input_dim = layers[0].input_dim();
        let num_classes = layers.last().unwrap().output_dim();
        Ok(Model {
            layers,
            input_dim,
            num_classes,
        })
    }

    /// Single affine layer `W x + b`, Glorot-uniform initialized.
    pub fn affine(input_dim: usize, num_classes: usize, rng: &mut RngStream) -> Model {
        let layer = init_layer(input_dim, num_classes, Activation::Identity, rng);
        Model::new(vec![layer]).expect("affine construction is well-formed")
    }

    /// ReLU MLP with the given hidden widths and an identity output layer.
    pub fn mlp(
        input_dim: usize,
        hidden: &[usize],
        num_classes: usize,
        rng: &mut RngStream,
    ) -> Model {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = input_dim;
        for &width in hidden {
            layers.push(init_layer(fan_in, width, Activation::Relu, rng));
            fan_in = width;
        }
        layers.push(init_layer(fan_in, num_classes, Activation::Identity, rng));
        Model::new(layers).expect("mlp construction is well-formed")
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::Shape(format!(
                "input has dimension {} but model expects {}",
                x.len(),
                self.input_dim
            )));
        }
        Ok(())
    }

    /// Logits for a single input.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut cur = x.data().to_vec();
        for layer in &self.layers {
            cur = affine_forward(layer, &cur);
            for z in &mut cur {
                *z = layer.activation.apply(*z);
            }
        }
        if !cur.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("forward produced non-finite logits".into()));
        }
        Tensor::vector(cur)
    }

    /// Predicted class: argmax of the logits, ties broken toward the
    /// lowest class index.
    pub fn predict(&self, x: &Tensor) -> Result<usize> {
        let logits = self.forward(x)?;
        Ok(argmax(logits.data()))
    }

    /// Gradient of logit `class` with respect to the input, by
    /// reverse-mode accumulation through the layers.
    pub fn input_gradient(&self, x: &Tensor, class: usize) -> Result<Tensor> {
        if class >= self.num_classes {
            return Err(Error::Domain(format!(
                "class {class} out of range (num_classes {})",
                self.num_classes
            )));
        }
        let trace = self.forward_trace(x)?;
        let mut seed = vec![0.0; self.num_classes];
        seed[class] = 1.0;
        self.backprop_to_input(&trace, seed)
    }

    /// Gradient of the softmax cross-entropy loss at `label` with respect
    /// to the input.
    pub fn loss_input_gradient(&self, x: &Tensor, label: usize) -> Result<Tensor> {
        if label >= self.num_classes {
            return Err(Error::Domain(format!(
                "label {label} out of range (num_classes {})",
                self.num_classes
            )));
        }
        let trace = self.forward_trace(x)?;
        let logits = trace.output();
        let mut seed = softmax(logits);
        seed[label] -= 1.0;
        self.backprop_to_input(&trace, seed)
    }

    fn forward_trace(&self, x: &Tensor) -> Result<ForwardTrace> {
        self.check_input(x)?;
        let mut activations = vec![x.data().to_vec()];
        let mut preacts = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let z = affine_forward(layer, activations.last().unwrap());
            let a = z
                .iter()
                .map(|&v| layer.activation.apply(v))
                .collect::<Vec<_>>();
            preacts.push(z);
            activations.push(a);
        }
        if !activations.last().unwrap().iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("forward produced non-finite logits".into()));
        }
        Ok(ForwardTrace {
            activations,
            preacts,
        })
    }

    /// Propagates an output-side gradient back to the input.
    fn backprop_to_input(&self, trace: &ForwardTrace, output_grad: Vec<f64>) -> Result<Tensor> {
        let mut grad = output_grad;
        for (layer, preact) in self.layers.iter().zip(&trace.preacts).rev() {
            for (g, &z) in grad.iter_mut().zip(preact) {
                *g *= layer.activation.derivative(z);
            }
            // grad <- W^T grad
            let cols = layer.weight.cols();
            let mut next = vec![0.0; cols];
            for (i, g) in grad.iter().enumerate() {
                if *g == 0.0 {
                    continue;
                }
                for (n, w) in next.iter_mut().zip(layer.weight.row(i)) {
                    *n += g * w;
                }
            }
            grad = next;
        }
        if !grad.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("non-finite input gradient".into()));
        }
        Tensor::vector(grad)
    }
}

struct ForwardTrace {
    /// Input followed by each layer's post-activation output.
    activations: Vec<Vec<f64>>,
    preacts: Vec<Vec<f64>>,
}

impl ForwardTrace {
    fn output(&self) -> &[f64] {
        self.activations.last().unwrap()
    }
}

fn affine_forward(layer: &Layer, input: &[f64]) -> Vec<f64> {
    let out_dim = layer.output_dim();
    let mut out = Vec::with_capacity(out_dim);
    for i in 0..out_dim {
        out.push(crate::numerics::dot(layer.weight.row(i), input) + layer.bias.data()[i]);
    }
    out
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Glorot-uniform layer initialization: +-sqrt(6 / (fan_in + fan_out)).
fn init_layer(fan_in: usize, fan_out: usize, activation: Activation, rng: &mut RngStream) -> Layer {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let weights: Vec<f64> = (0..fan_in * fan_out)
        .map(|_| (2.0 * rng.next_f64() - 1.0) * bound)
        .collect();
    Layer {
        weight: Tensor::matrix(fan_out, fan_in, weights).unwrap(),
        bias: Tensor::zeros(vec![fan_out]),
        activation,
    }
}

/// Ordered collection of labeled inputs, the empirical stand-in for the
/// data distribution.
#[derive(Debug, Clone)]
pub struct SampleSet {
    inputs: Vec<Tensor>,
    labels: Vec<usize>,
    name: String,
}

impl SampleSet {
    pub fn new(inputs: Vec<Tensor>, labels: Vec<usize>, name: impl Into<String>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::Domain("sample set must be nonempty".into()));
        }
        if inputs.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        let dim = inputs[0].len();
        if inputs.iter().any(|x| x.len() != dim) {
            return Err(Error::Shape("sample inputs have mixed dimensions".into()));
        }
        Ok(SampleSet {
            inputs,
            labels,
            name: name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input(&self, i: usize) -> &Tensor {
        &self.inputs[i]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn inputs(&self) -> &[Tensor] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// New set holding the samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize], name: impl Into<String>) -> Result<SampleSet> {
        let inputs = indices.iter().map(|&i| self.inputs[i].clone()).collect();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        SampleSet::new(inputs, labels, name)
    }
}

/// Fraction of samples whose prediction matches the reference label.
pub fn accuracy(model: &Model, data: &SampleSet) -> Result<f64> {
    let mut correct = 0usize;
    for i in 0..data.len() {
        if model.predict(data.input(i))? == data.label(i) {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}
