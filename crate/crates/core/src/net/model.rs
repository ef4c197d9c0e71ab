use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::conv::{conv2d_same, conv2d_same_backward, Shape3};
use crate::error::{Error, Result};
use crate::reshape::WeightTensor4D;

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub weight: WeightTensor4D,
    pub bias: Vec<f64>,
}

impl Conv2d {
    pub fn new(weight: WeightTensor4D, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.out_channels() {
            return Err(Error::Shape(format!(
                "conv bias has {} entries for {} filters",
                bias.len(),
                weight.out_channels()
            )));
        }
        Ok(Self { weight, bias })
    }
}

/// Fully connected layer, `weight` is `outputs x inputs` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub outputs: usize,
    pub inputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn new(outputs: usize, inputs: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weight.len() != outputs * inputs || bias.len() != outputs {
            return Err(Error::Shape(format!(
                "dense {outputs}x{inputs} got {} weights and {} biases",
                weight.len(),
                bias.len()
            )));
        }
        Ok(Self {
            outputs,
            inputs,
            weight,
            bias,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut weight = vec![0.0; n * n];
        for i in 0..n {
            weight[i * n + i] = 1.0;
        }
        Self {
            outputs: n,
            inputs: n,
            weight,
            bias: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv2d(Conv2d),
    Relu,
    AvgPool2x2,
    Dense(Dense),
    SoftmaxCrossEntropy,
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv2d(_) => "conv2d",
            Layer::Relu => "relu",
            Layer::AvgPool2x2 => "avgpool2x2",
            Layer::Dense(_) => "dense",
            Layer::SoftmaxCrossEntropy => "softmax_ce",
        }
    }

    /// `(weights, biases)` for parameterized layers.
    pub fn params(&self) -> Option<(&[f64], &[f64])> {
        match self {
            Layer::Conv2d(c) => Some((c.weight.as_slice(), &c.bias)),
            Layer::Dense(d) => Some((&d.weight, &d.bias)),
            _ => None,
        }
    }

    pub fn params_mut(&mut self) -> Option<(&mut [f64], &mut [f64])> {
        match self {
            Layer::Conv2d(c) => Some((c.weight.as_mut_slice(), &mut c.bias)),
            Layer::Dense(d) => Some((&mut d.weight, &mut d.bias)),
            _ => None,
        }
    }

    fn output_shape(&self, input: Shape3) -> Result<Shape3> {
        let (c, h, w) = input;
        match self {
            Layer::Conv2d(conv) => {
                if conv.weight.in_channels() != c {
                    return Err(Error::Shape(format!(
                        "conv expects {} input channels, got {c}",
                        conv.weight.in_channels()
                    )));
                }
                Ok((conv.weight.out_channels(), h, w))
            }
            Layer::Relu | Layer::SoftmaxCrossEntropy => Ok(input),
            Layer::AvgPool2x2 => {
                if h < 2 || w < 2 {
                    return Err(Error::Shape(format!("cannot pool a {h}x{w} map")));
                }
                Ok((c, h / 2, w / 2))
            }
            Layer::Dense(d) => {
                if d.inputs != c * h * w {
                    return Err(Error::Shape(format!(
                        "dense expects {} inputs, got {}",
                        d.inputs,
                        c * h * w
                    )));
                }
                Ok((d.outputs, 1, 1))
            }
        }
    }
}

/// Per-layer parameter gradients; `None` for parameter-free layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<Option<ParamGrad>>,
}

impl GradientSet {
    pub fn zeros_like(model: &NetworkModel) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| {
                    l.params().map(|(w, b)| ParamGrad {
                        weight: vec![0.0; w.len()],
                        bias: vec![0.0; b.len()],
                    })
                })
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .flatten()
            .all(|g| g.weight.iter().chain(&g.bias).all(|x| x.is_finite()))
    }
}

/// A labelled mini-batch, samples stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub sample_shape: Shape3,
    pub inputs: Vec<f64>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(sample_shape: Shape3, inputs: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        let len = sample_shape.0 * sample_shape.1 * sample_shape.2;
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if inputs.len() != len * labels.len() {
            return Err(Error::Shape(format!(
                "batch of {} samples of {sample_shape:?} needs {} values, got {}",
                labels.len(),
                len * labels.len(),
                inputs.len()
            )));
        }
        Ok(Self {
            sample_shape,
            inputs,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let len = self.sample_shape.0 * self.sample_shape.1 * self.sample_shape.2;
        &self.inputs[i * len..(i + 1) * len]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// Mean softmax cross-entropy.
    pub loss: f64,
    /// Pre-softmax scores, one vector per sample.
    pub logits: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub mean_loss: f64,
    pub correct: usize,
    pub total: usize,
}

/// Feed-forward conv net ending in a softmax cross-entropy loss.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub input_shape: Shape3,
    pub layers: Vec<Layer>,
    pub rng_seed: u64,
}

impl NetworkModel {
    pub fn new(input_shape: Shape3, layers: Vec<Layer>, rng_seed: u64) -> Result<Self> {
        let model = Self {
            input_shape,
            layers,
            rng_seed,
        };
        model.validate()?;
        Ok(model)
    }

    /// Conv(8,3x3) -> ReLU -> AvgPool -> Conv(16,3x3) -> ReLU -> AvgPool -> Dense -> softmax CE.
    pub fn tiny_conv_net(input_shape: Shape3, classes: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, h, w) = input_shape;
        let conv1 = init_conv(&mut rng, (8, c, 3, 3));
        let conv2 = init_conv(&mut rng, (16, 8, 3, 3));
        let flat = 16 * (h / 2 / 2) * (w / 2 / 2);
        let dense = init_dense(&mut rng, classes, flat);
        Self::new(
            input_shape,
            vec![
                Layer::Conv2d(conv1),
                Layer::Relu,
                Layer::AvgPool2x2,
                Layer::Conv2d(conv2),
                Layer::Relu,
                Layer::AvgPool2x2,
                Layer::Dense(dense),
                Layer::SoftmaxCrossEntropy,
            ],
            seed,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let (c, h, w) = self.input_shape;
        if c == 0 || h == 0 || w == 0 {
            return Err(Error::Shape(format!("input shape {:?}", self.input_shape)));
        }
        match self.layers.last() {
            Some(Layer::SoftmaxCrossEntropy) => {}
            _ => return Err(Error::Config("model must end with a softmax cross-entropy layer".into())),
        }
        let losses = self
            .layers
            .iter()
            .filter(|l| matches!(l, Layer::SoftmaxCrossEntropy))
            .count();
        if losses != 1 {
            return Err(Error::Config(format!("model has {losses} loss layers")));
        }
        if !self.layers.iter().any(|l| matches!(l, Layer::Conv2d(_))) {
            return Err(Error::Config("model has no convolution layer".into()));
        }
        self.layer_shapes().map(|_| ())
    }

    /// Input shape of every layer, plus the final output shape.
    pub fn layer_shapes(&self) -> Result<Vec<Shape3>> {
        let mut shapes = vec![self.input_shape];
        let mut cur = self.input_shape;
        for layer in &self.layers {
            cur = layer.output_shape(cur)?;
            shapes.push(cur);
        }
        Ok(shapes)
    }

    pub fn class_count(&self) -> usize {
        let s = self.layer_shapes().expect("validated model");
        let (c, h, w) = s[s.len() - 1];
        c * h * w
    }

    /// Indices of the convolution layers.
    pub fn conv_indices(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l, Layer::Conv2d(_)))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .filter_map(|l| l.params())
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.sample_shape != self.input_shape {
            return Err(Error::Shape(format!(
                "batch samples are {:?}, model expects {:?}",
                batch.sample_shape, self.input_shape
            )));
        }
        let classes = self.class_count();
        if let Some(&bad) = batch.labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Shape(format!("label {bad} out of range for {classes} classes")));
        }
        Ok(())
    }

    /// Activations entering each layer; the last entry is the logits.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        let mut shape = self.input_shape;
        for layer in &self.layers {
            let next = match layer {
                Layer::Conv2d(conv) => conv2d_same(&cur, shape, &conv.weight, &conv.bias),
                Layer::Relu => cur.iter().map(|&v| v.max(0.0)).collect(),
                Layer::AvgPool2x2 => avg_pool(&cur, shape),
                Layer::Dense(d) => dense_forward(d, &cur),
                Layer::SoftmaxCrossEntropy => break,
            };
            shape = layer.output_shape(shape).expect("validated model");
            acts.push(std::mem::replace(&mut cur, next));
        }
        acts.push(cur);
        acts
    }

    pub fn forward(&self, batch: &Batch) -> Result<ForwardOutput> {
        self.check_batch(batch)?;
        let mut loss = 0.0;
        let mut logits = Vec::with_capacity(batch.len());
        for (i, &label) in batch.labels.iter().enumerate() {
            let mut acts = self.activations(batch.sample(i));
            let z = acts.pop().expect("logits");
            loss += cross_entropy(&z, label);
            logits.push(z);
        }
        Ok(ForwardOutput {
            loss: loss / batch.len() as f64,
            logits,
        })
    }

    /// Mean loss and its exact gradient with respect to every parameter.
    pub fn value_and_grad(&self, batch: &Batch) -> Result<(f64, GradientSet)> {
        self.check_batch(batch)?;
        let shapes = self.layer_shapes()?;
        let mut grads = GradientSet::zeros_like(self);
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for (s, &label) in batch.labels.iter().enumerate() {
            let acts = self.activations(batch.sample(s));
            let z = &acts[acts.len() - 1];
            loss += cross_entropy(z, label);
            let mut delta = softmax(z);
            delta[label] -= 1.0;
            delta.iter_mut().for_each(|d| *d *= scale);

            let last_param = self.layers.len() - 1;
            for li in (0..last_param).rev() {
                let input = &acts[li];
                let shape = shapes[li];
                let need_input_grad = li > 0;
                delta = match &self.layers[li] {
                    Layer::Conv2d(conv) => {
                        let g = grads.layers[li].as_mut().expect("conv grad");
                        let mut din = vec![0.0; input.len()];
                        conv2d_same_backward(
                            input,
                            shape,
                            &conv.weight,
                            &delta,
                            &mut g.weight,
                            &mut g.bias,
                            need_input_grad.then_some(din.as_mut_slice()),
                        );
                        din
                    }
                    Layer::Relu => delta
                        .iter()
                        .zip(input)
                        .map(|(&d, &x)| if x > 0.0 { d } else { 0.0 })
                        .collect(),
                    Layer::AvgPool2x2 => avg_pool_backward(&delta, shape),
                    Layer::Dense(d) => {
                        let g = grads.layers[li].as_mut().expect("dense grad");
                        let mut din = vec![0.0; d.inputs];
                        for (o, &dv) in delta.iter().enumerate().take(d.outputs) {
                            g.bias[o] += dv;
                            let row = &d.weight[o * d.inputs..(o + 1) * d.inputs];
                            let grow = &mut g.weight[o * d.inputs..(o + 1) * d.inputs];
                            for j in 0..d.inputs {
                                grow[j] += dv * input[j];
                                din[j] += dv * row[j];
                            }
                        }
                        din
                    }
                    Layer::SoftmaxCrossEntropy => unreachable!("loss layer is last"),
                };
            }
        }
        Ok((loss * scale, grads))
    }

    pub fn backward(&self, batch: &Batch) -> Result<GradientSet> {
        self.value_and_grad(batch).map(|(_, g)| g)
    }

    /// Top-1 accuracy (ties go to the lowest class index) and mean loss.
    pub fn evaluate(&self, batch: &Batch) -> Result<EvalMetrics> {
        if batch.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let out = self.forward(batch)?;
        let correct = out
            .logits
            .iter()
            .zip(&batch.labels)
            .filter(|(z, &l)| argmax(z) == l)
            .count();
        Ok(EvalMetrics {
            accuracy: correct as f64 / batch.len() as f64,
            mean_loss: out.loss,
            correct,
            total: batch.len(),
        })
    }
}

/// Index of the largest entry, first one on ties.
pub fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in z.iter().enumerate().skip(1) {
        if v > z[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn cross_entropy(z: &[f64], label: usize) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    lse - z[label]
}

fn avg_pool(x: &[f64], shape: Shape3) -> Vec<f64> {
    let (c, h, w) = shape;
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0; c * oh * ow];
    for ch in 0..c {
        for y in 0..oh {
            for xx in 0..ow {
                let base = ch * h * w;
                let s = x[base + 2 * y * w + 2 * xx]
                    + x[base + 2 * y * w + 2 * xx + 1]
                    + x[base + (2 * y + 1) * w + 2 * xx]
                    + x[base + (2 * y + 1) * w + 2 * xx + 1];
                out[ch * oh * ow + y * ow + xx] = 0.25 * s;
            }
        }
    }
    out
}

fn avg_pool_backward(delta: &[f64], shape: Shape3) -> Vec<f64> {
    let (c, h, w) = shape;
    let (oh, ow) = (h / 2, w / 2);
    let mut din = vec![0.0; c * h * w];
    for ch in 0..c {
        for y in 0..oh {
            for xx in 0..ow {
                let g = 0.25 * delta[ch * oh * ow + y * ow + xx];
                let base = ch * h * w;
                din[base + 2 * y * w + 2 * xx] += g;
                din[base + 2 * y * w + 2 * xx + 1] += g;
                din[base + (2 * y + 1) * w + 2 * xx] += g;
                din[base + (2 * y + 1) * w + 2 * xx + 1] += g;
            }
        }
    }
    din
}

fn dense_forward(d: &Dense, x: &[f64]) -> Vec<f64> {
    (0..d.outputs)
        .map(|o| {
            d.bias[o]
                + d.weight[o * d.inputs..(o + 1) * d.inputs]
                    .iter()
                    .zip(x)
                    .map(|(w, v)| w * v)
                    .sum::<f64>()
        })
        .collect()
}

/// Fan-in scaled uniform init, `U(-b, b)` with `b = sqrt(6 / fan_in)`, zero bias.
fn init_conv(rng: &mut ChaCha8Rng, dims: (usize, usize, usize, usize)) -> Conv2d {
    let (n, c, kh, kw) = dims;
    let bound = (6.0 / (c * kh * kw) as f64).sqrt();
    let data = (0..n * c * kh * kw)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    Conv2d {
        weight: WeightTensor4D::new(dims, data).expect("finite init"),
        bias: vec![0.0; n],
    }
}

fn init_dense(rng: &mut ChaCha8Rng, outputs: usize, inputs: usize) -> Dense {
    let bound = (6.0 / inputs as f64).sqrt();
    Dense {
        outputs,
        inputs,
        weight: (0..outputs * inputs)
            .map(|_| rng.random_range(-bound..bound))
            .collect(),
        bias: vec![0.0; outputs],
    }
}
