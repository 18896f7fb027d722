use dplp_core::accountant::{Method, ZcdpLedger};
use dplp_core::loss::Loss;
use dplp_core::sanitize::ClipConfig;
use dplp_core::solvers::stats::clipped_gradient_sum;
use dplp_core::solvers::{evaluate_top1, train, SolverConfig};
use dplp_core::synth::{generate_synthetic, SyntheticSpec};
use dplp_core::{FeatureDataset, TrainReport};

fn run(data: &FeatureDataset, cfg: &SolverConfig) -> TrainReport {
    train(data, cfg, &mut ZcdpLedger::new()).unwrap()
}

fn private_config(method: Method, sigma: f64, seed: u64) -> SolverConfig {
    let mut cfg = SolverConfig::new(method);
    cfg.sigma = sigma;
    cfg.seed = seed;
    cfg.clip = Some(ClipConfig::uniform(1.0).unwrap());
    match method {
        // with bias −10 and a small step, Adam inflates the tiny negative-class
        // gradients and noise then acts as a regularizer; keep it well tuned
        Method::FirstOrder => {
            cfg.iterations = 10;
            cfg.eta = 0.3;
        }
        Method::FeatureCovariance => {
            cfg.iterations = 10;
            cfg.eta = 3.0;
            cfg.lambda = 0.3;
            cfg.bias_init = Some(-10.0);
        }
        Method::Newton => cfg.lambda = 100.0,
        Method::LeastSquares => {
            cfg.lambda = 100.0;
            cfg.loss = Loss::WeightedQuadratic { alpha: 0.1 };
            cfg.alpha = 0.1;
        }
    }
    cfg
}

#[test]
fn accuracy_degrades_monotonically_with_noise() {
    let (train_set, test_set) = generate_synthetic(&SyntheticSpec::new(1000, 8, 5, 3.0, 1.0, 17)).unwrap();
    for method in Method::ALL {
        let means: Vec<f64> = [0.0, 4.0, 16.0, 64.0]
            .iter()
            .map(|&sigma| {
                let accs: Vec<f64> = (0..20)
                    .map(|seed| {
                        let r = run(&train_set, &private_config(method, sigma, seed));
                        evaluate_top1(&r.weights, &test_set).unwrap()
                    })
                    .collect();
                accs.iter().sum::<f64>() / accs.len() as f64
            })
            .collect();
        let rises: Vec<f64> = means.windows(2).map(|w| w[1] - w[0]).filter(|&d| d > 0.0).collect();
        assert!(
            rises.len() <= 1 && rises.iter().all(|&d| d <= 0.005),
            "{method}: accuracy over sigma 0, 4, 16, 64 = {means:?}"
        );
        assert!(means[0] > means[3], "{method}: {means:?}");
    }
}

#[test]
fn newton_converges_on_logistic() {
    // overlapping classes keep the logistic optimum finite
    let (data, _) = generate_synthetic(&SyntheticSpec::new(600, 5, 3, 1.0, 1.0, 2)).unwrap();
    let mut cfg = SolverConfig::new(Method::Newton);
    cfg.iterations = 12;
    cfg.lambda = 1e-6;
    let r = run(&data, &cfg);
    let obj = &r.objective;
    for w in obj.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "objective rose: {obj:?}");
    }
    let grad = clipped_gradient_sum(&data, &r.weights, &Loss::Logistic, None).unwrap();
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt() / data.len() as f64;
    assert!(norm < 1e-8, "gradient norm {norm}");
}

#[test]
fn wide_margins_are_learned_exactly() {
    let (train_set, test_set) = generate_synthetic(&SyntheticSpec::new(1000, 6, 4, 10.0, 0.1, 8)).unwrap();
    let mut cfg = SolverConfig::new(Method::Newton);
    cfg.iterations = 3;
    cfg.lambda = 1.0;
    let r = run(&train_set, &cfg);
    assert!(evaluate_top1(&r.weights, &test_set).unwrap() >= 0.99);
}

#[test]
fn collapsed_clusters_give_chance_accuracy() {
    let (train_set, test_set) = generate_synthetic(&SyntheticSpec::new(20_000, 6, 10, 0.0, 1.0, 9)).unwrap();
    let mut cfg = SolverConfig::new(Method::LeastSquares);
    cfg.lambda = 1.0;
    cfg.alpha = 0.1;
    cfg.loss = Loss::WeightedQuadratic { alpha: 0.1 };
    let acc = evaluate_top1(&run(&train_set, &cfg).weights, &test_set).unwrap();
    assert!((acc - 0.1).abs() < 0.03, "accuracy {acc}");
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let (data, _) = generate_synthetic(&SyntheticSpec::new(1500, 6, 4, 2.0, 1.0, 4)).unwrap();
    for method in Method::ALL {
        let cfg = private_config(method, 2.0, 7);
        let on = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run(&data, &cfg))
        };
        let (one, many) = (on(1), on(4));
        assert_eq!(one.weights, many.weights, "{method}");
        assert_eq!(one.objective, many.objective, "{method}");
    }
}

#[test]
fn non_private_runs_charge_nothing() {
    let (data, _) = generate_synthetic(&SyntheticSpec::new(200, 4, 3, 3.0, 1.0, 1)).unwrap();
    for method in Method::ALL {
        let mut cfg = private_config(method, 0.0, 0);
        cfg.clip = None;
        let mut ledger = ZcdpLedger::new();
        let mut r = train(&data, &cfg, &mut ledger).unwrap();
        r.set_reporting_delta(1e-5).unwrap();
        assert_eq!(ledger.total_rho(), 0.0, "{method}");
        assert_eq!(r.epsilon, None);
    }
}

#[test]
fn sigma_without_clipping_is_rejected() {
    let (data, _) = generate_synthetic(&SyntheticSpec::new(50, 3, 2, 3.0, 1.0, 1)).unwrap();
    let mut cfg = SolverConfig::new(Method::FirstOrder);
    cfg.sigma = 1.0;
    assert!(train(&data, &cfg, &mut ZcdpLedger::new()).is_err());
}

#[test]
fn constant_feature_acts_as_bias_for_least_squares() {
    let (train_set, test_set) = generate_synthetic(&SyntheticSpec::new(800, 5, 4, 3.0, 1.0, 12)).unwrap();
    let mut cfg = SolverConfig::new(Method::LeastSquares);
    cfg.lambda = 1.0;
    cfg.alpha = 1.0;
    cfg.loss = Loss::WeightedQuadratic { alpha: 1.0 };
    let plain = evaluate_top1(&run(&train_set, &cfg).weights, &test_set).unwrap();
    let with_bias = evaluate_top1(
        &run(&train_set.with_constant_feature(1.0).unwrap(), &cfg).weights,
        &test_set.with_constant_feature(1.0).unwrap(),
    )
    .unwrap();
    assert!(with_bias >= plain - 0.02, "{with_bias} vs {plain}");
}

#[test]
fn empty_class_in_least_squares_is_noise_but_finite() {
    let (data, _) = generate_synthetic(&SyntheticSpec::new(100, 4, 3, 3.0, 1.0, 5)).unwrap();
    // widen to 5 classes; classes 3 and 4 never occur
    let positives: Vec<Vec<u32>> = (0..data.len()).map(|i| data.positives(i).to_vec()).collect();
    let wide = FeatureDataset::new(data.features().clone(), &positives, 5, 1).unwrap();
    let mut cfg = private_config(Method::LeastSquares, 1.0, 3);
    cfg.lambda = 10.0;
    let r = run(&wide, &cfg);
    assert!(r.weights.is_finite());
    assert!(r.weights.theta.row(4).iter().any(|&v| v != 0.0));
}
