#![allow(dead_code)]

use ndarray::Array2;
use paretofair::{Activation, Loss, Model};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plain scalar forward pass over `model.layers()`, independent of the library's matrix code.
pub fn scalar_forward(model: &Model, x: &[f64]) -> Vec<f64> {
    let layers = model.layers();
    let mut h = x.to_vec();
    for (l, layer) in layers.iter().enumerate() {
        let (fan_in, fan_out) = layer.weights.dim();
        assert_eq!(h.len(), fan_in);
        let mut z = vec![0.0; fan_out];
        for (j, zj) in z.iter_mut().enumerate() {
            let mut s = layer.bias[j];
            for (i, hi) in h.iter().enumerate() {
                s += hi * layer.weights[[i, j]];
            }
            *zj = s;
        }
        if l + 1 < layers.len() {
            h = z
                .iter()
                .map(|&v| match model.activation() {
                    Activation::Relu => v.max(0.0),
                    Activation::Tanh => v.tanh(),
                })
                .collect();
        } else {
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            h = e.iter().map(|v| v / s).collect();
        }
    }
    h
}

pub fn scalar_loss(p: &[f64], y: usize, loss: Loss) -> f64 {
    match loss {
        Loss::Brier => p
            .iter()
            .enumerate()
            .map(|(k, &pk)| {
                let t = if k == y { 1.0 } else { 0.0 };
                (pk - t) * (pk - t)
            })
            .sum(),
        Loss::CrossEntropy => -p[y].max(1e-12).ln(),
    }
}

pub fn weighted_objective(model: &Model, x: &Array2<f64>, t: &[usize], w: &[f64], loss: Loss) -> f64 {
    let mut num = 0.0;
    for (i, row) in x.rows().into_iter().enumerate() {
        num += w[i] * scalar_loss(&scalar_forward(model, &row.to_vec()), t[i], loss);
    }
    num / w.iter().sum::<f64>()
}

/// Central differences of the weighted objective, one parameter at a time.
pub fn finite_difference(model: &Model, x: &Array2<f64>, t: &[usize], w: &[f64], loss: Loss, step: f64) -> Vec<f64> {
    let base = model.params_flat();
    let mut probe = model.clone();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + step;
        probe.set_params_flat(&p).unwrap();
        let up = weighted_objective(&probe, x, t, w, loss);
        p[i] = base[i] - step;
        probe.set_params_flat(&p).unwrap();
        let down = weighted_objective(&probe, x, t, w, loss);
        out.push((up - down) / (2.0 * step));
    }
    out
}

/// Largest relative error; components where both values are below `floor` compare absolutely.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Fresh models have zero biases, which puts dead-input units exactly on the relu kink.
pub fn with_random_biases(mut model: Model, seed: u64) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for layer in model.layers_mut() {
        layer.bias.mapv_inplace(|_| rng.gen_range(-0.2..0.2));
    }
    model
}

/// Smallest |pre-activation| over hidden units and samples.
pub fn min_abs_preactivation(model: &Model, x: &Array2<f64>) -> f64 {
    let layers = model.layers();
    let mut best = f64::INFINITY;
    for row in x.rows() {
        let mut h = row.to_vec();
        for layer in &layers[..layers.len() - 1] {
            let z: Vec<f64> = (0..layer.bias.len())
                .map(|j| layer.bias[j] + h.iter().enumerate().map(|(i, v)| v * layer.weights[[i, j]]).sum::<f64>())
                .collect();
            best = z.iter().fold(best, |m, v| m.min(v.abs()));
            h = z
                .iter()
                .map(|&v| match model.activation() {
                    Activation::Relu => v.max(0.0),
                    Activation::Tanh => v.tanh(),
                })
                .collect();
        }
    }
    best
}

pub struct GradCase {
    pub name: String,
    pub model: Model,
    pub x: Array2<f64>,
    pub targets: Vec<usize>,
    pub weights: Vec<f64>,
    pub loss: Loss,
}

/// Ten seeded (model, batch) pairs: linear and two-hidden-layer nets, both
/// activations, both losses, binary and three-class outputs.
pub fn gradient_cases() -> Vec<GradCase> {
    let specs: [(&[usize], Activation, Loss); 10] = [
        (&[3, 2], Activation::Relu, Loss::Brier),
        (&[3, 2], Activation::Tanh, Loss::CrossEntropy),
        (&[4, 3], Activation::Relu, Loss::CrossEntropy),
        (&[3, 5, 4, 2], Activation::Relu, Loss::Brier),
        (&[3, 5, 4, 2], Activation::Relu, Loss::CrossEntropy),
        (&[3, 5, 4, 2], Activation::Tanh, Loss::Brier),
        (&[3, 5, 4, 2], Activation::Tanh, Loss::CrossEntropy),
        (&[4, 6, 6, 3], Activation::Relu, Loss::Brier),
        (&[4, 6, 6, 3], Activation::Tanh, Loss::CrossEntropy),
        (&[2, 8, 8, 2], Activation::Tanh, Loss::Brier),
    ];
    specs
        .iter()
        .enumerate()
        .map(|(i, (dims, act, loss))| {
            let seed = 100 + i as u64;
            let model = with_random_biases(Model::new(dims, *act, seed).unwrap(), seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = 8;
            let d = dims[0];
            let c = *dims.last().unwrap();
            let x = Array2::from_shape_fn((m, d), |_| rng.gen_range(-2.0..2.0));
            let targets = (0..m).map(|_| rng.gen_range(0..c)).collect();
            let weights = (0..m).map(|_| rng.gen_range(0.5..3.0)).collect();
            GradCase {
                name: format!("{dims:?}/{}/{loss:?}", act.name()),
                model,
                x,
                targets,
                weights,
                loss: *loss,
            }
        })
        .collect()
}

/// Gradient check for one case: (analytic, numeric) flattened.
pub fn check_case(case: &GradCase) -> (Vec<f64>, Vec<f64>) {
    let g = case
        .model
        .weighted_grad(case.x.view(), &case.targets, &case.weights, case.loss)
        .unwrap()
        .flatten();
    let n = finite_difference(&case.model, &case.x, &case.targets, &case.weights, case.loss, 1e-5);
    (g, n)
}

/// O(n²) non-dominated filter; equal vectors do not dominate each other, so copies stay.
pub fn brute_force_front(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dom = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y);
    let mut out: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if !points.iter().any(|q| dom(q, p)) {
            out.push(p.clone());
        }
    }
    out
}
