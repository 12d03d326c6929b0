//! Minibatch SGD with per-group sample weights and validation early stopping.

use ndarray::Axis;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::GroupedDataset;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::risk::{group_risks, Loss, RiskVector};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping; 0 stops after the first epoch.
    pub patience: usize,
    pub seed: u64,
    /// Draw ⌈batch_size / G⌉ samples from every group in each minibatch.
    pub stratified: bool,
    pub loss: Loss,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.1,
            batch_size: 64,
            max_epochs: 60,
            patience: 8,
            seed: 0,
            stratified: true,
            loss: Loss::Brier,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::input(format!("lr must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::input("batch_size must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::input("max_epochs must be positive"));
        }
        if self.patience > self.max_epochs {
            return Err(Error::input("patience cannot exceed max_epochs"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch.
    pub model: Model,
    pub best_objective: f64,
    pub epochs_run: usize,
    /// Validation objective after each epoch.
    pub history: Vec<f64>,
}

/// Per-group index pools, each reshuffled whenever it is exhausted.
struct GroupCycle {
    idx: Vec<usize>,
    pos: usize,
}

impl GroupCycle {
    fn take(&mut self, k: usize, rng: &mut ChaCha8Rng, out: &mut Vec<usize>) {
        for _ in 0..k {
            if self.pos == self.idx.len() {
                self.idx.shuffle(rng);
                self.pos = 0;
            }
            out.push(self.idx[self.pos]);
            self.pos += 1;
        }
    }
}

enum Batcher {
    Shuffled { order: Vec<usize> },
    Stratified { pools: Vec<GroupCycle>, per_group: usize },
}

impl Batcher {
    fn new(train: &GroupedDataset, config: &TrainConfig, rng: &mut ChaCha8Rng) -> Self {
        let g = train.num_groups();
        // With one group, stratification is plain shuffling.
        if config.stratified && g > 1 {
            let pools = train
                .group_indices()
                .into_iter()
                .map(|mut idx| {
                    idx.shuffle(rng);
                    GroupCycle { idx, pos: 0 }
                })
                .collect();
            Batcher::Stratified {
                pools,
                per_group: config.batch_size.div_ceil(g),
            }
        } else {
            Batcher::Shuffled {
                order: (0..train.len()).collect(),
            }
        }
    }

    fn epoch(&mut self, n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
        match self {
            Batcher::Shuffled { order } => {
                order.shuffle(rng);
                order.chunks(batch_size).map(<[usize]>::to_vec).collect()
            }
            Batcher::Stratified { pools, per_group } => (0..n.div_ceil(batch_size))
                .map(|_| {
                    let mut batch = Vec::with_capacity(*per_group * pools.len());
                    for pool in pools.iter_mut() {
                        pool.take(*per_group, rng, &mut batch);
                    }
                    batch
                })
                .collect(),
        }
    }
}

/// Validation risks of `model` under `loss`.
pub fn evaluate_risk(model: &Model, data: &GroupedDataset, loss: Loss) -> Result<RiskVector> {
    let probs = model.forward(data.features.view())?;
    group_risks(
        probs.view(),
        &data.targets,
        &data.groups,
        data.num_groups(),
        loss,
    )
}

/// Trains `model` with minibatch SGD.
///
/// Each step evaluates the minibatch's per-group risks, turns them into group
/// weights via `weight_rule`, and descends on the weighted mean loss. After every
/// epoch, `objective` is evaluated on the validation group risks; the best epoch's
/// parameters are returned. Training stops after `patience` epochs without
/// improvement or at `max_epochs`.
///
/// When `stratified` is off and a group is missing from a minibatch, that batch is
/// trained with unit weights.
pub fn sgd_early_stop<O, W>(
    model: Model,
    train: &GroupedDataset,
    val: &GroupedDataset,
    objective: O,
    weight_rule: W,
    config: &TrainConfig,
) -> Result<TrainOutcome>
where
    O: Fn(&RiskVector) -> f64,
    W: Fn(&RiskVector) -> Vec<f64>,
{
    config.validate()?;
    if train.num_groups() != val.num_groups() {
        return Err(Error::input("train and validation group sets differ"));
    }
    let g = train.num_groups();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut batcher = Batcher::new(train, config, &mut rng);

    let mut model = model;
    let mut best_model = model.clone();
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;
    let mut history = Vec::new();

    let mut sums = vec![0.0; g];
    let mut counts = vec![0usize; g];
    for _epoch in 0..config.max_epochs {
        for batch in batcher.epoch(train.len(), config.batch_size, &mut rng) {
            let x = train.features.select(Axis(0), &batch);
            let targets: Vec<usize> = batch.iter().map(|&i| train.targets[i]).collect();
            let cache = model.forward_cached(x.view())?;

            sums.iter_mut().for_each(|s| *s = 0.0);
            counts.iter_mut().for_each(|c| *c = 0);
            for (row, &i) in batch.iter().enumerate() {
                let a = train.groups[i];
                let p = cache.probs.row(row);
                let l = config
                    .loss
                    .eval_unchecked(p.as_slice().expect("standard layout"), targets[row]);
                sums[a] += l;
                counts[a] += 1;
            }
            let weights: Vec<f64> = if counts.contains(&0) {
                vec![1.0; batch.len()]
            } else {
                let r_hat = RiskVector {
                    risks: sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect(),
                    counts: counts.clone(),
                };
                let w = weight_rule(&r_hat);
                if w.len() != g {
                    return Err(Error::Dimension {
                        expected: g,
                        got: w.len(),
                    });
                }
                batch.iter().map(|&i| w[train.groups[i]]).collect()
            };
            let grads = model.backward(&cache, &targets, &weights, config.loss)?;
            model.sgd_step(&grads, config.lr);
        }

        let r_val = evaluate_risk(&model, val, config.loss)?;
        let obj = objective(&r_val);
        history.push(obj);
        if obj < best {
            best = obj;
            best_model = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
        }
        if since_best >= config.patience {
            break;
        }
    }

    Ok(TrainOutcome {
        model: best_model,
        best_objective: best,
        epochs_run: history.len(),
        history,
    })
}

/// Uniform weights for every group.
pub fn unit_weights(r: &RiskVector) -> Vec<f64> {
    vec![1.0; r.len()]
}
