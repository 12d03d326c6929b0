use paretofair::oracle::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn asym() -> ScenarioSpec {
    make_figure1_scenario(&ScenarioParams::asymmetric()).unwrap()
}

fn sym() -> ScenarioSpec {
    make_figure1_scenario(&ScenarioParams::symmetric()).unwrap()
}

/// Per-group mean and standard error of `2 (y − g(x))²` over a sample.
fn monte_carlo(spec: &ScenarioSpec, table: &PredictorTable, n: usize, seed: u64) -> Vec<(f64, f64)> {
    let ds = sample(spec, n, seed).unwrap();
    let mut acc = vec![(0.0, 0.0, 0usize); spec.num_groups()];
    for i in 0..ds.len() {
        let g = table.predict(spec, ds.features[[i, 0]]);
        let y = ds.targets[i] as f64;
        let l = 2.0 * (y - g) * (y - g);
        let e = &mut acc[ds.groups[i]];
        e.0 += l;
        e.1 += l * l;
        e.2 += 1;
    }
    acc.iter()
        .map(|&(s, s2, m)| {
            let mean = s / m as f64;
            let var = s2 / m as f64 - mean * mean;
            (mean, (var / m as f64).sqrt())
        })
        .collect()
}

#[test]
fn sampled_frequencies_follow_the_tables() {
    let spec = asym();
    let ds = sample(&spec, 100_000, 4).unwrap();
    for (a, r) in ds.group_ratios().iter().enumerate() {
        assert!((r - spec.priors[a]).abs() < 0.01);
    }
    let b = spec.num_bins();
    let mut cnt = vec![vec![(0usize, 0usize); b]; 2];
    for i in 0..ds.len() {
        let c = &mut cnt[ds.groups[i]][spec.bin_of(ds.features[[i, 0]])];
        c.0 += 1;
        c.1 += ds.targets[i];
    }
    let mut checked = 0;
    for (a, bins) in cnt.iter().enumerate() {
        for (i, &(n, ones)) in bins.iter().enumerate() {
            if n >= 400 {
                checked += 1;
                assert!((ones as f64 / n as f64 - spec.eta[[a, i]]).abs() < 0.05);
            }
        }
    }
    assert!(checked > 20);
}

#[test]
fn random_tables_match_monte_carlo() {
    let spec = asym();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let table = PredictorTable::new((0..spec.num_bins()).map(|_| rng.gen()).collect()).unwrap();
    let exact = exact_group_risks(&spec, &table).unwrap();
    for (a, (mean, _)) in monte_carlo(&spec, &table, 200_000, 10).into_iter().enumerate() {
        assert!((mean - exact.risks[a]).abs() < 0.01);
    }
}

#[test]
fn no_table_beats_bayes_noise() {
    let spec = asym();
    let noise = bayes_noise(&spec);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..1000 {
        let g: Vec<f64> = if trial % 2 == 0 {
            (0..spec.num_bins()).map(|_| rng.gen()).collect()
        } else {
            // Coordinate perturbation of group `a`'s Bayes table.
            let a = trial % 4 / 2;
            let mut g = spec.eta.row(a).to_vec();
            let i = rng.gen_range(0..g.len());
            g[i] = (g[i] + rng.gen_range(-0.2..0.2)).clamp(0.0, 1.0);
            g
        };
        let r = exact_group_risks(&spec, &PredictorTable::new(g).unwrap()).unwrap();
        for a in 0..2 {
            assert!(r.risks[a] >= noise.risks[a] - 1e-12);
        }
    }
}

#[test]
fn scalarized_predictor_is_pointwise_optimal() {
    let spec = asym();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let t: f64 = rng.gen();
        let lambda = [t, 1.0 - t];
        let best = scalarized_bayes_predictor(&spec, &lambda).unwrap();
        let weighted = |tab: &PredictorTable| {
            let r = exact_group_risks(&spec, tab).unwrap();
            lambda[0] * r.risks[0] + lambda[1] * r.risks[1]
        };
        let base = weighted(&best);
        for _ in 0..50 {
            let mut g = best.g.clone();
            let i = rng.gen_range(0..g.len());
            let step = if rng.gen() { 0.05 } else { -0.05 };
            g[i] = (g[i] + step).clamp(0.0, 1.0);
            assert!(weighted(&PredictorTable::new(g).unwrap()) >= base - 1e-15);
        }
    }
}

#[test]
fn symmetric_front_reflects_onto_itself() {
    let spec = sym();
    let front = trace_front(&spec, 201).unwrap();
    for p in &front {
        let mirrored = front.iter().any(|q| {
            (q.risks.risks[0] - p.risks.risks[1]).abs() < 1e-9 && (q.risks.risks[1] - p.risks.risks[0]).abs() < 1e-9
        });
        assert!(mirrored, "{:?} has no reflection", p.risks.risks);
    }
    let pf = pareto_fair_point(&front).unwrap();
    assert!(pf.max_gap <= 1e-6);
    // Identical groups make every λ equivalent; compare against uniform weights.
    let half = exact_group_risks(&spec, &scalarized_bayes_predictor(&spec, &[0.5, 0.5]).unwrap()).unwrap();
    for a in 0..2 {
        assert!((pf.risks.risks[a] - half.risks[a]).abs() < 1e-12);
    }
    let curve = disparity_tradeoff(&front);
    let min_mean = curve.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    assert!((curve[0].0 - min_mean).abs() < 1e-12 && curve[0].1 <= 1e-6);
}

#[test]
fn asymmetric_fair_point_is_the_grid_minimum() {
    let spec = asym();
    let front = trace_front(&spec, 1001).unwrap();
    let pf = pareto_fair_point(&front).unwrap();
    let mut scan_min = f64::INFINITY;
    for i in 0..=1000 {
        let t = i as f64 / 1000.0;
        let r = exact_group_risks(&spec, &scalarized_bayes_predictor(&spec, &[t, 1.0 - t]).unwrap()).unwrap();
        scan_min = scan_min.min(r.max_gap());
    }
    assert!((pf.max_gap - scan_min).abs() < 1e-12);
    assert!(pf.max_gap > 0.0);
}

#[test]
fn asymmetric_tradeoff_falls_to_the_rebalanced_optimum() {
    let spec = asym();
    let front = trace_front(&spec, 1001).unwrap();
    let env = tradeoff_envelope(&disparity_tradeoff(&front));
    assert!(env.windows(2).all(|w| w[1].0 <= w[0].0 && w[1].1 >= w[0].1));
    let refs = reference_points(&spec, &front).unwrap();
    // The unweighted mean is minimised at uniform λ.
    assert!((env.last().unwrap().0 - refs.rebalanced.mean()).abs() < 1e-12);
}

#[test]
fn grid_refinement_is_stable() {
    let coarse = asym();
    let fine = make_figure1_scenario(&ScenarioParams {
        grid_size: 801,
        ..ScenarioParams::asymmetric()
    })
    .unwrap();
    for i in 0..=100 {
        let t = i as f64 / 100.0;
        let l = [t, 1.0 - t];
        let rc = exact_group_risks(&coarse, &scalarized_bayes_predictor(&coarse, &l).unwrap()).unwrap();
        let rf = exact_group_risks(&fine, &scalarized_bayes_predictor(&fine, &l).unwrap()).unwrap();
        for a in 0..2 {
            assert!((rc.risks[a] - rf.risks[a]).abs() < 1e-3, "λ0 = {t}");
        }
    }
    let pc = pareto_fair_point(&trace_front(&coarse, 1001).unwrap()).unwrap();
    let pf = pareto_fair_point(&trace_front(&fine, 1001).unwrap()).unwrap();
    for a in 0..2 {
        assert!((pc.risks.risks[a] - pf.risks.risks[a]).abs() < 1e-3);
    }
}

#[test]
fn noise_is_independent_of_transition_for_symmetric_levels() {
    for transition in [0.2, 0.5, 0.8] {
        let spec = make_figure1_scenario(&ScenarioParams {
            rho_low: vec![0.3, 0.3],
            rho_high: vec![0.7, 0.7],
            transition,
            ..ScenarioParams::asymmetric()
        })
        .unwrap();
        for v in bayes_noise(&spec).risks {
            assert!((v - 0.42).abs() < 1e-12);
        }
    }
}

#[test]
fn reference_points_relationships() {
    let spec = asym();
    let front = trace_front(&spec, 501).unwrap();
    let refs = reference_points(&spec, &front).unwrap();
    assert_eq!(refs.equality_of_risk.max_gap(), 0.0);
    let pf = &refs.pareto_fair.risks.risks;
    assert!(refs.equality_of_risk.risks.iter().zip(pf).all(|(e, p)| e >= p));
    // Neither baseline attains the fair point's worst-group risk.
    assert!(refs.naive.max() > refs.pareto_fair.risks.max());
    assert!(refs.rebalanced.max() > refs.pareto_fair.risks.max());
}
