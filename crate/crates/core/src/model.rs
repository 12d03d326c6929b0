//! Feed-forward softmax classifiers with exact, sample-weighted backpropagation.
//!
//! Checkpoint layout (UTF-8 text, one record per line):
//!
//! ```text
//! paretofair-model v1
//! activation relu
//! seed 7
//! layer_dims 1 64 64 2
//! W 0 <in*out values, row-major, input index major>
//! b 0 <out values>
//! W 1 ...
//! ```
//!
//! Values are written in shortest round-trip form, so load(save(m)) == m bit for bit.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::risk::{Loss, CE_CLAMP};

const MAGIC: &str = "paretofair-model v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and the output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::input(format!("unknown activation '{other}'"))),
        }
    }
}

/// Dense layer computing `x · weights + bias`; `weights` is `fan_in × fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weights: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }
}

/// Per-layer inputs and hidden pre-activations from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    pub probs: Array2<f64>,
}

/// Gradient with the same shape as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    layer_dims: Vec<usize>,
    activation: Activation,
    layers: Vec<Dense>,
    seed: u64,
}

fn check_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::input("layer_dims needs at least an input and an output size"));
    }
    if layer_dims.contains(&0) {
        return Err(Error::input("layer sizes must be positive"));
    }
    if *layer_dims.last().unwrap() < 2 {
        return Err(Error::input("need at least two output classes"));
    }
    Ok(())
}

fn flatten_layers(layers: &[Dense]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend(l.weights.iter());
        out.extend(l.bias.iter());
    }
    out
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

impl Model {
    /// Weights uniform in ±1/√fan_in, biases zero. Same seed, same parameters.
    pub fn new(layer_dims: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        check_dims(layer_dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_dims
            .windows(2)
            .map(|w| {
                let scale = 1.0 / (w[0] as f64).sqrt();
                let mut layer = Dense::zeros(w[0], w[1]);
                layer
                    .weights
                    .mapv_inplace(|_| rng.gen_range(-scale..scale));
                layer
            })
            .collect();
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            activation,
            layers,
            seed,
        })
    }

    /// All parameters zero; predicts the uniform distribution everywhere.
    pub fn zeros(layer_dims: &[usize], activation: Activation) -> Result<Self> {
        check_dims(layer_dims)?;
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            activation,
            layers: layer_dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            seed: 0,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::Dimension {
                expected: self.num_params(),
                got: params.len(),
            });
        }
        let mut it = params.iter();
        for l in &mut self.layers {
            for w in l.weights.iter_mut() {
                *w = *it.next().unwrap();
            }
            for b in l.bias.iter_mut() {
                *b = *it.next().unwrap();
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        Ok(())
    }

    /// Class probabilities, one simplex row per input row.
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let last = self.layers.len() - 1;
        let mut a = x.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = a.dot(&l.weights);
            z += &l.bias;
            if i < last {
                let act = self.activation;
                z.mapv_inplace(|v| act.apply(v));
            } else {
                softmax_rows(&mut z);
            }
            a = z;
        }
        Ok(a)
    }

    /// Gradient of `Σ wᵢ ℓ(yᵢ, h(xᵢ)) / Σ wᵢ` with respect to every parameter.
    pub fn weighted_grad(
        &self,
        x: ArrayView2<'_, f64>,
        targets: &[usize],
        weights: &[f64],
        loss: Loss,
    ) -> Result<Gradients> {
        let cache = self.forward_cached(x)?;
        self.backward(&cache, targets, weights, loss)
    }

    /// Forward and backward pass in one go. Returns the output probabilities and the gradient.
    pub fn weighted_loss_and_grad(
        &self,
        x: ArrayView2<'_, f64>,
        targets: &[usize],
        weights: &[f64],
        loss: Loss,
    ) -> Result<(Array2<f64>, Gradients)> {
        let cache = self.forward_cached(x)?;
        let grads = self.backward(&cache, targets, weights, loss)?;
        Ok((cache.probs, grads))
    }

    /// Forward pass that keeps what the backward pass needs.
    pub fn forward_cached(&self, x: ArrayView2<'_, f64>) -> Result<ForwardCache> {
        self.check_input(&x)?;
        let last = self.layers.len() - 1;
        let mut inputs: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        let mut pre: Vec<Array2<f64>> = Vec::with_capacity(last);
        let mut a = x.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = a.dot(&l.weights);
            z += &l.bias;
            inputs.push(a);
            if i < last {
                let act = self.activation;
                pre.push(z.clone());
                z.mapv_inplace(|v| act.apply(v));
            } else {
                softmax_rows(&mut z);
            }
            a = z;
        }
        Ok(ForwardCache {
            inputs,
            pre,
            probs: a,
        })
    }

    /// Gradient of `Σ wᵢ ℓᵢ / Σ wᵢ` from a cached forward pass.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        targets: &[usize],
        weights: &[f64],
        loss: Loss,
    ) -> Result<Gradients> {
        let probs = &cache.probs;
        let m = probs.nrows();
        if targets.len() != m || weights.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: targets.len().min(weights.len()),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::input("sample weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::input("sample weights are all zero"));
        }
        let c = self.num_classes();
        if let Some(&t) = targets.iter().find(|&&t| t >= c) {
            return Err(Error::input(format!("target {t} out of range")));
        }

        // dφ/dz at the softmax input, already scaled by wᵢ / Σw.
        let mut delta = Array2::<f64>::zeros((m, c));
        let mut g = vec![0.0; c];
        for i in 0..m {
            let p = probs.row(i);
            let y = targets[i];
            let s = weights[i] / total;
            match loss {
                Loss::Brier => {
                    for k in 0..c {
                        g[k] = 2.0 * (p[k] - if k == y { 1.0 } else { 0.0 });
                    }
                    let pg: f64 = (0..c).map(|k| p[k] * g[k]).sum();
                    for k in 0..c {
                        delta[[i, k]] = s * p[k] * (g[k] - pg);
                    }
                }
                Loss::CrossEntropy => {
                    let py = p[y];
                    if py > CE_CLAMP && py < 1.0 - CE_CLAMP {
                        for k in 0..c {
                            delta[[i, k]] = s * (p[k] - if k == y { 1.0 } else { 0.0 });
                        }
                    }
                }
            }
        }

        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        for li in (0..self.layers.len()).rev() {
            let gw = cache.inputs[li].t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            if li > 0 {
                let mut back = delta.dot(&self.layers[li].weights.t());
                let act = self.activation;
                Zip::from(&mut back)
                    .and(&cache.pre[li - 1])
                    .and(&cache.inputs[li])
                    .for_each(|d, &z, &out| *d *= act.derivative(z, out));
                delta = back;
            }
            grads.push(Dense {
                weights: gw,
                bias: gb,
            });
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    /// Plain SGD step `θ ← θ − lr·∇`.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            l.weights.scaled_add(-lr, &g.weights);
            l.bias.scaled_add(-lr, &g.bias);
        }
    }

    pub fn to_checkpoint(&self) -> String {
        let mut s = String::new();
        let dims: Vec<String> = self.layer_dims.iter().map(|d| d.to_string()).collect();
        writeln!(s, "{MAGIC}").unwrap();
        writeln!(s, "activation {}", self.activation).unwrap();
        writeln!(s, "seed {}", self.seed).unwrap();
        writeln!(s, "layer_dims {}", dims.join(" ")).unwrap();
        for (i, l) in self.layers.iter().enumerate() {
            write!(s, "W {i}").unwrap();
            for v in l.weights.iter() {
                write!(s, " {v:e}").unwrap();
            }
            s.push('\n');
            write!(s, "b {i}").unwrap();
            for v in l.bias.iter() {
                write!(s, " {v:e}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn from_checkpoint(text: &str, origin: &Path) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line: line as u64,
            msg,
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut field = |key: &str| -> Result<(usize, String)> {
            let (no, line) = lines
                .next()
                .ok_or_else(|| perr(0, format!("missing '{key}' record")))?;
            let rest = line
                .strip_prefix(key)
                .ok_or_else(|| perr(no, format!("expected '{key}'")))?;
            Ok((no, rest.trim().to_string()))
        };
        let (no, magic) = field("paretofair-model")?;
        if magic != "v1" {
            return Err(perr(no, format!("unsupported checkpoint version '{magic}'")));
        }
        let (no, act) = field("activation")?;
        let activation = act.parse().map_err(|e: Error| perr(no, e.to_string()))?;
        let (no, seed) = field("seed")?;
        let seed = seed
            .parse()
            .map_err(|_| perr(no, format!("bad seed '{seed}'")))?;
        let (no, dims) = field("layer_dims")?;
        let layer_dims = dims
            .split_whitespace()
            .map(|d| d.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| perr(no, "bad layer_dims".into()))?;
        check_dims(&layer_dims).map_err(|e| perr(no, e.to_string()))?;
        let mut model = Model::zeros(&layer_dims, activation)?;
        model.seed = seed;
        for i in 0..model.layers.len() {
            for key in ["W", "b"] {
                let (no, rest) = field(key)?;
                let mut parts = rest.split_whitespace();
                let idx: usize = parts
                    .next()
                    .and_then(|p| p.parse().ok())
                    .ok_or_else(|| perr(no, "missing layer index".into()))?;
                if idx != i {
                    return Err(perr(no, format!("expected layer {i}, found {idx}")));
                }
                let values = parts
                    .map(|p| p.parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| perr(no, "non-numeric parameter".into()))?;
                let target: &mut [f64] = if key == "W" {
                    model.layers[i].weights.as_slice_mut().unwrap()
                } else {
                    model.layers[i].bias.as_slice_mut().unwrap()
                };
                if values.len() != target.len() {
                    return Err(perr(
                        no,
                        format!("expected {} values, found {}", target.len(), values.len()),
                    ));
                }
                target.copy_from_slice(&values);
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_checkpoint()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint(&text, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = Model::new(&[3, 5, 2], Activation::Relu, 9).unwrap();
        let b = Model::new(&[3, 5, 2], Activation::Relu, 9).unwrap();
        let c = Model::new(&[3, 5, 2], Activation::Relu, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.params_flat(), c.params_flat());
        assert!(a.layers().iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
        let bound = 1.0 / 3f64.sqrt();
        assert!(a.layers()[0].weights.iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(Model::new(&[], Activation::Relu, 0).is_err());
        assert!(Model::new(&[3], Activation::Relu, 0).is_err());
        assert!(Model::new(&[3, 0, 2], Activation::Relu, 0).is_err());
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = Model::zeros(&[2, 4, 3], Activation::Tanh).unwrap();
        let p = m.forward(array![[1.0, -2.0], [0.3, 7.0]].view()).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        let m = Model::zeros(&[1, 2], Activation::Relu).unwrap();
        let p = m.forward(array![[5.0]].view()).unwrap();
        assert_eq!(p.row(0).to_vec(), vec![0.5, 0.5]);
    }

    #[test]
    fn linear_model_is_monotone_in_the_logit() {
        let mut m = Model::zeros(&[1, 2], Activation::Relu).unwrap();
        m.layers_mut()[0].weights[[0, 1]] = 2.0;
        let p = m.forward(array![[0.5], [2.0], [-1.0]].view()).unwrap();
        assert!(p[[0, 1]] > 0.5);
        assert!(p[[1, 1]] > p[[0, 1]]);
        assert!(p[[2, 1]] < 0.5);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let m = Model::zeros(&[2, 2], Activation::Relu).unwrap();
        assert!(matches!(
            m.forward(array![[1.0, 2.0, 3.0]].view()),
            Err(Error::Dimension { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn all_zero_weights_are_an_error() {
        let m = Model::zeros(&[1, 2], Activation::Relu).unwrap();
        let err = m
            .weighted_grad(array![[1.0]].view(), &[0], &[0.0], Loss::Brier)
            .unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let m = Model::new(&[2, 3, 3, 2], Activation::Tanh, 4).unwrap();
        let text = m.to_checkpoint();
        let back = Model::from_checkpoint(&text, Path::new("mem")).unwrap();
        assert_eq!(back, m);
        assert!(text.starts_with("paretofair-model v1\n"));
    }

    #[test]
    fn checkpoint_errors_carry_line_numbers() {
        let m = Model::new(&[1, 2], Activation::Relu, 1).unwrap();
        let text = m.to_checkpoint().replace("b 0 0e0 0e0", "b 0 0e0");
        match Model::from_checkpoint(&text, Path::new("ck")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
    }
}
