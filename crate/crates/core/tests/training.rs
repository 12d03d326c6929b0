use paretofair::baselines::{train_naive, train_rebalanced};
use paretofair::oracle::{make_figure1_scenario, sample, ScenarioParams};
use paretofair::pareto::{pareto_fair_optimize, PfHyperparams};
use paretofair::train::evaluate_risk;
use paretofair::{Activation, GroupedDataset, Loss, Model, TrainConfig};

fn splits(params: &ScenarioParams, n: usize, seed: u64) -> (GroupedDataset, GroupedDataset) {
    let ds = sample(&make_figure1_scenario(params).unwrap(), n, seed).unwrap();
    let mut parts = ds.stratified_split(&[0.7, 0.3], seed).unwrap().into_iter();
    (parts.next().unwrap(), parts.next().unwrap())
}

fn net(seed: u64) -> Model {
    Model::new(&[1, 16, 16, 2], Activation::Relu, seed).unwrap()
}

fn cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        max_epochs: 40,
        ..TrainConfig::default()
    }
}

fn imbalanced() -> ScenarioParams {
    ScenarioParams {
        priors: vec![0.9, 0.1],
        ..ScenarioParams::asymmetric()
    }
}

#[test]
fn naive_neglects_the_minority_and_rebalancing_helps() {
    let (tr, va) = splits(&imbalanced(), 8000, 1);
    let naive = train_naive(&tr, &va, net(1), &cfg(1)).unwrap();
    let rebal = train_rebalanced(&tr, &va, net(1), &cfg(1)).unwrap();
    let rn = evaluate_risk(&naive.model, &va, Loss::Brier).unwrap();
    let rr = evaluate_risk(&rebal.model, &va, Loss::Brier).unwrap();
    assert!(rn.risks[1] > rn.risks[0], "{rn:?}");
    assert!(rr.risks[1] < rn.risks[1], "rebalanced {rr:?} vs naive {rn:?}");
}

#[test]
fn balanced_groups_make_rebalancing_a_no_op() {
    let params = ScenarioParams {
        priors: vec![0.5, 0.5],
        ..ScenarioParams::symmetric()
    };
    let (tr, va) = splits(&params, 6000, 2);
    let naive = train_naive(&tr, &va, net(2), &cfg(2)).unwrap();
    let rebal = train_rebalanced(&tr, &va, net(2), &cfg(2)).unwrap();
    let rn = evaluate_risk(&naive.model, &va, Loss::Brier).unwrap();
    let rr = evaluate_risk(&rebal.model, &va, Loss::Brier).unwrap();
    for a in 0..2 {
        assert!((rn.risks[a] - rr.risks[a]).abs() < 0.01, "{rn:?} vs {rr:?}");
    }
}

#[test]
fn baselines_are_deterministic() {
    let (tr, va) = splits(&imbalanced(), 2000, 3);
    let c = TrainConfig { max_epochs: 5, patience: 2, ..cfg(3) };
    assert_eq!(
        train_naive(&tr, &va, net(3), &c).unwrap().model,
        train_naive(&tr, &va, net(3), &c).unwrap().model
    );
    assert_eq!(
        train_rebalanced(&tr, &va, net(3), &c).unwrap().model,
        train_rebalanced(&tr, &va, net(3), &c).unwrap().model
    );
}

#[test]
fn single_group_reduces_to_naive() {
    let params = ScenarioParams {
        priors: vec![1.0],
        means: vec![0.5],
        widths: vec![0.15],
        rho_low: vec![0.2],
        rho_high: vec![0.8],
        delta: vec![0.0],
        ..ScenarioParams::asymmetric()
    };
    let (tr, va) = splits(&params, 3000, 4);
    let naive = train_naive(&tr, &va, net(4), &cfg(4)).unwrap();
    let hp = PfHyperparams {
        inner: cfg(4),
        max_outer_iters: 5,
        ..PfHyperparams::default()
    };
    let pf = pareto_fair_optimize(&tr, &va, net(4), &hp).unwrap();
    let rn = evaluate_risk(&naive.model, &va, Loss::Brier).unwrap();
    let rp = evaluate_risk(&pf.model, &va, Loss::Brier).unwrap();
    assert!((rn.risks[0] - rp.risks[0]).abs() < 1e-3, "{rn:?} vs {rp:?}");
}

#[test]
fn symmetric_scenario_ends_nearly_fair() {
    let (tr, va) = splits(&ScenarioParams::symmetric(), 6000, 5);
    let hp = PfHyperparams {
        inner: cfg(5),
        max_outer_iters: 10,
        ..PfHyperparams::default()
    };
    let out = pareto_fair_optimize(&tr, &va, net(5), &hp).unwrap();
    let r = evaluate_risk(&out.model, &va, Loss::Brier).unwrap();
    assert!(r.max_gap() <= 0.02, "{r:?}");
    assert!(out.state.archive.contains(&r.risks));
}

#[test]
fn missing_validation_group_is_an_error() {
    let (tr, _) = splits(&ScenarioParams::asymmetric(), 1000, 6);
    let only0: Vec<usize> = (0..tr.len()).filter(|&i| tr.groups[i] == 0).take(50).collect();
    let va = GroupedDataset::new(
        tr.features.select(ndarray::Axis(0), &only0),
        only0.iter().map(|&i| tr.targets[i]).collect(),
        vec![0; only0.len()],
        vec!["0".into()],
        2,
    )
    .unwrap();
    assert!(pareto_fair_optimize(&tr, &va, net(6), &PfHyperparams::default()).is_err());
}
