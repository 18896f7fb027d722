#![allow(clippy::needless_range_loop)]

//! End-to-end acceptance checks. Runs as a plain binary so that every
//! criterion prints its verdict line, e.g.
//!
//! ```text
//! criterion 1 [accountant exactness]: PASS (0.01 s, limit 1 s) ...
//! ```
//!
//! The process exits nonzero if any criterion fails.

use std::process::Command;
use std::time::Instant;

use dplp_core::accountant::{epsilon_from_rho, rho_from_epsilon_delta, Method, PrivacyBudget, ZcdpLedger};
use dplp_core::harness::{grid_on, holdout, sweep_on, DataSource, GridSpec, RunConfig, Splits};
use dplp_core::linalg::Matrix;
use dplp_core::loss::{batch_objective, Loss, QuadraticStats};
use dplp_core::sanitize::{sanitize_sum, ClipConfig, NoiseKey, Release, Statistic};
use dplp_core::solvers::stats::{clip_features, clipped_gradient_sum, gram, newton_class_stats};
use dplp_core::solvers::{train, Optimizer, SolverConfig};
use dplp_core::synth::{generate_synthetic, SyntheticSpec};
use dplp_core::{FeatureDataset, WeightMatrix};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

struct Verdict {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

impl Verdict {
    fn new(pass: bool, summary: impl Into<String>) -> Self {
        Verdict {
            pass,
            summary: summary.into(),
            details: Vec::new(),
        }
    }
}

// ---------------------------------------------------------------- helpers

/// Gaussian elimination with partial pivoting; deliberately independent of
/// the library's factorization.
fn oracle_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, &v)| r.iter().copied().chain([v]).collect()).collect();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, p);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..=n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    x
}

/// Naive Σ xxᵀ over the rows of `x`, weighted per row.
fn weighted_gram(x: &Matrix, w: impl Fn(usize) -> f64) -> Vec<Vec<f64>> {
    let d = x.cols();
    let mut g = vec![vec![0.0; d]; d];
    for i in 0..x.rows() {
        let wi = w(i);
        for a in 0..d {
            for b in 0..d {
                g[a][b] += wi * x[(i, a)] * x[(i, b)];
            }
        }
    }
    g
}

/// Rows θⱼ of the ridge solution `(XᵀX + ΛI)θⱼ = Xᵀyⱼ`.
fn ridge_oracle(data: &FeatureDataset, big_lambda: f64) -> Vec<Vec<f64>> {
    let x = data.features();
    let d = x.cols();
    let mut g = weighted_gram(x, |_| 1.0);
    for (a, row) in g.iter_mut().enumerate() {
        row[a] += big_lambda;
    }
    (0..data.classes())
        .map(|j| {
            let rhs: Vec<f64> = (0..d).map(|a| (0..x.rows()).map(|i| data.label(i, j) * x[(i, a)]).sum()).collect();
            oracle_solve(&g, &rhs)
        })
        .collect()
}

/// Rows θⱼ solving `(Aⱼ + αG + λI)θⱼ = bⱼ` for the weighted quadratic.
fn weighted_ls_oracle(data: &FeatureDataset, alpha: f64, lambda: f64) -> Vec<Vec<f64>> {
    let x = data.features();
    let d = x.cols();
    let g = weighted_gram(x, |_| 1.0);
    (0..data.classes())
        .map(|j| {
            let mut a = weighted_gram(x, |i| data.label(i, j));
            for r in 0..d {
                for c in 0..d {
                    a[r][c] += alpha * g[r][c];
                }
                a[r][r] += lambda;
            }
            let rhs: Vec<f64> = (0..d).map(|k| (0..x.rows()).map(|i| data.label(i, j) * x[(i, k)]).sum()).collect();
            oracle_solve(&a, &rhs)
        })
        .collect()
}

fn max_abs_diff(theta: &Matrix, oracle: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for (j, row) in oracle.iter().enumerate() {
        for (a, v) in row.iter().enumerate() {
            worst = worst.max((theta[(j, a)] - v).abs());
        }
    }
    worst
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn gaussian(rng: &mut StdRng) -> f64 {
    rng.sample(StandardNormal)
}

/// Replaces the features by √n·Q from a QR factorization, so `XᵀX/n = I`.
fn whiten(data: &FeatureDataset) -> FeatureDataset {
    let x = data.features();
    let (n, d) = x.shape();
    let mut cols: Vec<Vec<f64>> = (0..d).map(|a| (0..n).map(|i| x[(i, a)]).collect()).collect();
    for a in 0..d {
        for b in 0..a {
            let proj: f64 = cols[a].iter().zip(&cols[b]).map(|(u, v)| u * v).sum();
            let (head, tail) = cols.split_at_mut(a);
            for (u, v) in tail[0].iter_mut().zip(&head[b]) {
                *u -= proj * v;
            }
        }
        let s = norm(&cols[a]);
        cols[a].iter_mut().for_each(|u| *u /= s);
    }
    let scale = (n as f64).sqrt();
    let w = Matrix::from_fn(n, d, |i, a| cols[a][i] * scale);
    let positives: Vec<Vec<u32>> = (0..n).map(|i| data.positives(i).to_vec()).collect();
    FeatureDataset::new(w, &positives, data.classes(), data.max_positives()).unwrap()
}

// ------------------------------------------------------------- criteria

fn accountant_exactness() -> Verdict {
    let mut worst = 0.0f64;
    let mut points = 0;
    for i in 0..32 {
        let eps = 10f64.powf(-3.0 + 5.0 * i as f64 / 31.0);
        for k in 0..32 {
            let delta = 10f64.powf(-12.0 + 11.7 * k as f64 / 31.0);
            let b = PrivacyBudget::new(eps, delta).unwrap();
            let rho = rho_from_epsilon_delta(&b);
            let back = epsilon_from_rho(rho, delta).unwrap();
            worst = worst.max((back - eps).abs() / eps);
            let rho_back = rho_from_epsilon_delta(&PrivacyBudget::new(back, delta).unwrap());
            worst = worst.max((rho_back - rho).abs() / rho);
            points += 1;
        }
    }
    // ρ + 2√(ρ ln(1/δ)) = ε solved by bisection
    let (eps, delta) = (1.0f64, 1e-5f64);
    let f = |r: f64| r + 2.0 * (r * (1.0 / delta).ln()).sqrt() - eps;
    let (mut lo, mut hi) = (0.0f64, eps);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let bisect = 0.5 * (lo + hi);
    let rho = PrivacyBudget::new(eps, delta).unwrap().rho();
    let gap = (rho - bisect).abs();
    Verdict::new(
        worst <= 1e-10 && gap <= 1e-8 && points >= 1000,
        format!(
            "{points} grid points, worst round-trip rel. error {worst:.2e}; rho(1, 1e-5) = {rho:.15} vs bisection {bisect:.15} (gap {gap:.1e})"
        ),
    )
}

fn ledger_exactness() -> Verdict {
    let (train_set, _) = generate_synthetic(&SyntheticSpec::new(625, 8, 5, 3.0, 1.0, 11)).unwrap();
    let mut worst = 0.0f64;
    let mut runs = 0;
    let mut failures = Vec::new();
    for method in Method::ALL {
        for t in [1usize, 10] {
            for sigma in [1.0f64, 4.0] {
                let mut cfg = SolverConfig::new(method);
                cfg.iterations = t;
                cfg.sigma = sigma;
                cfg.lambda = 50.0;
                cfg.eta = 0.1;
                cfg.clip = Some(ClipConfig::uniform(1.0).unwrap());
                if method == Method::FeatureCovariance {
                    cfg.lambda = 1.0;
                }
                let s2 = sigma * sigma;
                let want = match method {
                    Method::FirstOrder => t as f64 / (2.0 * s2),
                    Method::Newton => t as f64 / s2,
                    Method::LeastSquares => 3.0 / (2.0 * s2),
                    Method::FeatureCovariance => (t as f64 + 1.0) / (2.0 * s2),
                };
                let mut ledger = ZcdpLedger::new();
                match train(&train_set, &cfg, &mut ledger) {
                    Ok(_) => worst = worst.max((ledger.total_rho() - want).abs()),
                    Err(e) => failures.push(format!("{method} T={t} sigma={sigma}: {e}")),
                }
                runs += 1;
            }
        }
    }
    let mut v = Verdict::new(
        worst <= 1e-12 && failures.is_empty(),
        format!("{runs} runs (n = {}), worst |total - expected| = {worst:.1e}", train_set.len()),
    );
    v.details = failures;
    v
}

fn oracle_equivalence() -> Verdict {
    let (data, _) = generate_synthetic(&SyntheticSpec::new(500, 10, 3, 3.0, 1.0, 21)).unwrap();
    let n = data.len() as f64;
    let big_lambda = 1.0;
    let generous = Some(ClipConfig::uniform(1e6).unwrap());

    let mut ls = SolverConfig::new(Method::LeastSquares);
    ls.alpha = 0.5;
    ls.lambda = big_lambda;
    ls.clip = generous;
    let ls_err = max_abs_diff(
        &train(&data, &ls, &mut ZcdpLedger::new()).unwrap().weights.theta,
        &weighted_ls_oracle(&data, 0.5, big_lambda),
    );

    let ridge = ridge_oracle(&data, big_lambda);
    let mut newton = SolverConfig::new(Method::Newton);
    newton.loss = Loss::Squared;
    newton.lambda = big_lambda;
    newton.clip = generous;
    let newton_err = max_abs_diff(&train(&data, &newton, &mut ZcdpLedger::new()).unwrap().weights.theta, &ridge);

    let white = whiten(&data);
    let mut fc = SolverConfig::new(Method::FeatureCovariance);
    fc.loss = Loss::Squared;
    fc.lambda = big_lambda / n;
    fc.clip = generous;
    let fc_err = max_abs_diff(
        &train(&white, &fc, &mut ZcdpLedger::new()).unwrap().weights.theta,
        &ridge_oracle(&white, big_lambda),
    );

    let mut adam = SolverConfig::new(Method::FirstOrder);
    adam.loss = Loss::Squared;
    adam.optimizer = Optimizer::Adam;
    adam.iterations = 2000;
    adam.eta = 0.01;
    adam.lambda = big_lambda / n;
    adam.clip = generous;
    let adam_err = max_abs_diff(&train(&data, &adam, &mut ZcdpLedger::new()).unwrap().weights.theta, &ridge);

    Verdict::new(
        ls_err <= 1e-8 && newton_err <= 1e-8 && fc_err <= 1e-8 && adam_err <= 1e-4,
        format!(
            "max entrywise error: DP-LS {ls_err:.1e}, DP-Newton(1 step) {newton_err:.1e}, DP-FC(1 step, whitened) {fc_err:.1e}, DP-Adam(2000 steps) {adam_err:.1e}"
        ),
    )
}

fn random_dataset(rng: &mut StdRng) -> FeatureDataset {
    let n = rng.gen_range(5..40);
    let d = rng.gen_range(2..7);
    let m = rng.gen_range(2..6);
    let k = rng.gen_range(1..=3.min(m));
    let scale = rng.gen_range(0.1..4.0);
    let f = Matrix::from_fn(n, d, |_, _| scale * gaussian(rng));
    let positives: Vec<Vec<u32>> = (0..n)
        .map(|_| {
            let count = rng.gen_range(0..=k);
            let mut idx: Vec<u32> = rand::seq::index::sample(rng, m, count).into_iter().map(|v| v as u32).collect();
            idx.sort_unstable();
            idx
        })
        .collect();
    FeatureDataset::new(f, &positives, m, k).unwrap()
}

/// The dataset and a neighbor with one example removed.
fn neighbors(rng: &mut StdRng) -> (FeatureDataset, FeatureDataset) {
    let big = random_dataset(rng);
    let drop = rng.gen_range(0..big.len());
    let keep: Vec<usize> = (0..big.len()).filter(|&i| i != drop).collect();
    let small = big.select(&keep).unwrap();
    (big, small)
}

fn sensitivity_bounds() -> Verdict {
    let mut rng = StdRng::seed_from_u64(4);
    let pairs = 100;
    let mut rows = Vec::new();
    let mut all_ok = true;
    let mut check = |name: &str, f: &mut dyn FnMut(&mut StdRng) -> (f64, f64)| {
        let mut violations = 0;
        let mut tightest = 0.0f64;
        for _ in 0..pairs {
            let (diff, bound) = f(&mut rng);
            tightest = tightest.max(diff / bound);
            if diff > bound * (1.0 + 1e-12) {
                violations += 1;
            }
        }
        all_ok &= violations == 0;
        rows.push(format!("{name}: {violations} violations, max diff/bound {tightest:.4}"));
    };
    let random_theta = |rng: &mut StdRng, d: usize| -> Vec<f64> { (0..d).map(|_| 2.0 * gaussian(rng)).collect() };

    check("Newton gradient (C)", &mut |rng| {
        let (a, b) = neighbors(rng);
        let c = rng.gen_range(0.2..3.0);
        let loss = if rng.gen_bool(0.5) { Loss::Logistic } else { Loss::Squared };
        let theta = random_theta(rng, a.dim());
        let j = rng.gen_range(0..a.classes());
        let clamp = matches!(loss, Loss::Squared);
        let ga = newton_class_stats(&clip_features(a.features(), Some(c)), &a, &theta, j, &loss, 0.0, clamp).unwrap().0;
        let gb = newton_class_stats(&clip_features(b.features(), Some(c)), &b, &theta, j, &loss, 0.0, clamp).unwrap().0;
        (diff_norm(&ga, &gb), c)
    });
    check("Newton Hessian (beta_H C^2)", &mut |rng| {
        let (a, b) = neighbors(rng);
        let c = rng.gen_range(0.2..3.0);
        let loss = if rng.gen_bool(0.5) { Loss::Logistic } else { Loss::Squared };
        let theta = random_theta(rng, a.dim());
        let j = rng.gen_range(0..a.classes());
        let ha = newton_class_stats(&clip_features(a.features(), Some(c)), &a, &theta, j, &loss, 0.0, false).unwrap().1;
        let hb = newton_class_stats(&clip_features(b.features(), Some(c)), &b, &theta, j, &loss, 0.0, false).unwrap().1;
        (diff_norm(ha.as_slice(), hb.as_slice()), loss.curvature_bound() * c * c)
    });
    check("feature covariance G (C^2)", &mut |rng| {
        let (a, b) = neighbors(rng);
        let c = rng.gen_range(0.2..3.0);
        let ga = gram(&clip_features(a.features(), Some(c)));
        let gb = gram(&clip_features(b.features(), Some(c)));
        (diff_norm(ga.as_slice(), gb.as_slice()), c * c)
    });
    check("class Gram A_j, jointly (sqrt(k) C^2)", &mut |rng| {
        let (a, b) = neighbors(rng);
        let c = rng.gen_range(0.2..3.0);
        let sa = QuadraticStats::from_rows(&clip_features(a.features(), Some(c)), &a);
        let sb = QuadraticStats::from_rows(&clip_features(b.features(), Some(c)), &b);
        let flat = |s: &QuadraticStats| s.class_gram.iter().flat_map(|m| m.as_slice().to_vec()).collect::<Vec<_>>();
        (diff_norm(&flat(&sa), &flat(&sb)), (a.max_positives() as f64).sqrt() * c * c)
    });
    check("class rhs b_j, jointly (sqrt(k) C)", &mut |rng| {
        let (a, b) = neighbors(rng);
        let c = rng.gen_range(0.2..3.0);
        let sa = QuadraticStats::from_rows(&clip_features(a.features(), Some(c)), &a);
        let sb = QuadraticStats::from_rows(&clip_features(b.features(), Some(c)), &b);
        let flat = |s: &QuadraticStats| s.class_rhs.concat();
        (diff_norm(&flat(&sa), &flat(&sb)), (a.max_positives() as f64).sqrt() * c)
    });
    check("first-order gradient (C_g)", &mut |rng| {
        let (a, b) = neighbors(rng);
        let cg = rng.gen_range(0.2..3.0);
        let loss = if rng.gen_bool(0.5) { Loss::Logistic } else { Loss::Squared };
        let mut w = WeightMatrix::zeros(a.classes(), a.dim());
        for v in w.theta.as_mut_slice() {
            *v = gaussian(rng);
        }
        if rng.gen_bool(0.5) {
            w.bias = Some((0..a.classes()).map(|_| gaussian(rng)).collect());
        }
        let ga = clipped_gradient_sum(&a, &w, &loss, Some(cg)).unwrap();
        let gb = clipped_gradient_sum(&b, &w, &loss, Some(cg)).unwrap();
        (diff_norm(&ga, &gb), cg)
    });
    let mut v = Verdict::new(all_ok, format!("{pairs} neighboring pairs per statistic, 6 statistics"));
    v.details = rows;
    v
}

fn derivative_certification() -> Verdict {
    let mut rng = StdRng::seed_from_u64(5);
    let logistic = Loss::Logistic;
    let (mut max_grad, mut max_curv) = (0.0f64, 0.0f64);
    for i in 0..1_000_000 {
        // mostly moderate logits, with a tail out to ±800
        let z: f64 = if i % 10 == 0 { rng.gen_range(-800.0..800.0) } else { 8.0 * gaussian(&mut rng) };
        let y: f64 = if i % 3 == 0 { rng.gen_range(0.0..=1.0) } else { f64::from(rng.gen_range(0..2u8)) };
        max_grad = max_grad.max(logistic.grad(z, y).unwrap().abs());
        max_curv = max_curv.max(logistic.curv(z, y).unwrap());
    }

    let (data, _) = generate_synthetic(&SyntheticSpec::new(80, 5, 4, 2.0, 1.0, 6)).unwrap();
    let (m, d, n) = (data.classes(), data.dim(), data.len() as f64);
    let mut w = WeightMatrix::zeros(m, d).with_bias(0.0);
    for v in w.theta.as_mut_slice() {
        *v = 0.3 * gaussian(&mut rng);
    }
    for b in w.bias.as_mut().unwrap() {
        *b = 0.3 * gaussian(&mut rng);
    }
    let h = 1e-5;
    let mut worst_grad = 0.0f64;
    for loss in [Loss::Logistic, Loss::Squared, Loss::WeightedQuadratic { alpha: 0.7 }] {
        let analytic: Vec<f64> = clipped_gradient_sum(&data, &w, &loss, None).unwrap().iter().map(|g| g / n).collect();
        let mut fd = Vec::with_capacity(analytic.len());
        for p in 0..analytic.len() {
            let bump = |delta: f64| {
                let mut w2 = w.clone();
                if p < m * d {
                    w2.theta.as_mut_slice()[p] += delta;
                } else {
                    w2.bias.as_mut().unwrap()[p - m * d] += delta;
                }
                batch_objective(&loss, &w2, &data).unwrap()
            };
            fd.push((bump(h) - bump(-h)) / (2.0 * h));
        }
        worst_grad = worst_grad.max(diff_norm(&fd, &analytic) / norm(&analytic));
    }
    let mut worst_hess = 0.0f64;
    for loss in [Loss::Logistic, Loss::Squared] {
        for j in 0..m {
            let theta = w.theta.row(j).to_vec();
            let (_, hess) = newton_class_stats(data.features(), &data, &theta, j, &loss, 0.0, false).unwrap();
            let grad_at = |t: &[f64]| newton_class_stats(data.features(), &data, t, j, &loss, 0.0, false).unwrap().0;
            let mut fd = vec![0.0; d * d];
            for b in 0..d {
                let (mut up, mut down) = (theta.clone(), theta.clone());
                up[b] += h;
                down[b] -= h;
                let (gu, gd) = (grad_at(&up), grad_at(&down));
                for a in 0..d {
                    fd[a * d + b] = (gu[a] - gd[a]) / (2.0 * h);
                }
            }
            worst_hess = worst_hess.max(diff_norm(&fd, hess.as_slice()) / norm(hess.as_slice()));
        }
    }
    Verdict::new(
        max_grad <= 1.0 && max_curv <= 0.25 && worst_grad <= 1e-5 && worst_hess <= 1e-5,
        format!(
            "10^6 points: max |l'| = {max_grad:.6}, max l'' = {max_curv:.6}; finite differences: gradient rel. error {worst_grad:.1e}, Hessian rel. error {worst_hess:.1e}"
        ),
    )
}

const EPSILONS: [f64; 4] = [0.1, 0.5, 1.0, 8.0];

struct MethodGrid {
    method: Method,
    iters: usize,
    clips: &'static [f64],
    grid: fn() -> GridSpec,
}

/// Per-(method, ε) hyperparameters are chosen by grid search on a
/// validation split carved out of the training data (tuning seeds disjoint
/// from evaluation seeds); the chosen setting is then scored on the test
/// split over 20 noise seeds.
fn qualitative_trends() -> Verdict {
    let spec = SyntheticSpec::new(2000, 16, 100, 4.0, 1.0, 0);
    let mut base = RunConfig::new(Method::LeastSquares, DataSource::Synthetic(spec));
    base.delta = 1e-5;
    let splits = base.data.load().unwrap();
    let validation: Splits = holdout(&splits, 0.2).unwrap();

    let mut non_private = base.clone();
    non_private.epsilon = Some(f64::INFINITY);
    non_private.lambda = 1.0;
    non_private.alpha = 0.1;
    let reference = dplp_core::harness::run_on(&non_private, &splits).unwrap().test_accuracy.unwrap();

    let grids = [
        MethodGrid {
            method: Method::LeastSquares,
            iters: 1,
            clips: &[1.0],
            grid: || GridSpec {
                etas: vec![1.0],
                lambdas: vec![10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0, 10000.0],
                alphas: vec![0.01, 0.1, 1.0],
            },
        },
        MethodGrid {
            method: Method::Newton,
            iters: 1,
            clips: &[1.0],
            grid: || GridSpec {
                etas: vec![1.0],
                lambdas: vec![10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0, 10000.0],
                alphas: vec![0.0],
            },
        },
        MethodGrid {
            method: Method::FirstOrder,
            iters: 10,
            clips: &[1.0],
            grid: || GridSpec {
                etas: vec![0.01, 0.03, 0.05, 0.1, 0.2, 0.3],
                lambdas: vec![0.0, 0.001, 0.01],
                alphas: vec![0.0],
            },
        },
        MethodGrid {
            method: Method::FeatureCovariance,
            iters: 10,
            clips: &[1.0, 3.0],
            grid: || GridSpec {
                etas: vec![1.0, 2.0, 3.0, 5.0, 10.0, 20.0, 30.0],
                lambdas: vec![0.03, 0.1, 0.3, 1.0],
                alphas: vec![0.0],
            },
        },
    ];
    let tune_seeds: Vec<u64> = (1001..=1005).collect();
    let eval_seeds: Vec<u64> = (1..=20).collect();

    let mut means = std::collections::BTreeMap::new();
    let mut details = vec![format!("non-private DP-LS reference test accuracy {reference:.4}")];
    for g in &grids {
        let mut line = format!("{:<9}", g.method.label());
        for &eps in &EPSILONS {
            let mut best: Option<(f64, RunConfig)> = None;
            for &c in g.clips {
                let mut cfg = base.for_method(g.method);
                cfg.iters = g.iters;
                cfg.epsilon = Some(eps);
                cfg.feature_clip = c;
                cfg.gradient_clip = c;
                let r = grid_on(&cfg, &(g.grid)(), &tune_seeds, &validation).unwrap();
                let acc = r.best.accuracy.unwrap_or(f64::NEG_INFINITY);
                if best.as_ref().is_none_or(|(a, _)| acc > *a) {
                    cfg.eta = r.best.eta;
                    cfg.lambda = r.best.lambda;
                    cfg.alpha = r.best.alpha;
                    best = Some((acc, cfg));
                }
            }
            let cfg = best.unwrap().1;
            let row = &sweep_on(&cfg, &splits, &[eps], &eval_seeds, &[g.method]).unwrap().rows[0];
            let mean = row.mean_accuracy.unwrap_or(0.0);
            means.insert((g.method, eps.to_bits()), mean);
            line.push_str(&format!(
                "  eps {eps}: {mean:.4} (eta {}, lambda {}, alpha {}, C {}, failures {})",
                cfg.eta,
                cfg.lambda,
                cfg.alpha,
                cfg.gradient_clip,
                row.failures.len()
            ));
        }
        details.push(line);
    }
    let mean = |m: Method, e: f64| means[&(m, e.to_bits())];

    let mut monotone = true;
    for g in &grids {
        let seq: Vec<f64> = EPSILONS.iter().map(|&e| mean(g.method, e)).collect();
        let drops: Vec<f64> = seq.windows(2).map(|w| w[0] - w[1]).filter(|&d| d > 0.0).collect();
        let ok = drops.len() <= 1 && drops.iter().all(|&d| d <= 0.005);
        monotone &= ok;
        details.push(format!(
            "(a) {}: {} inversion(s){}",
            g.method.label(),
            drops.len(),
            if ok { "" } else { " — violates trend" }
        ));
    }
    let low = mean(Method::LeastSquares, 0.1) >= mean(Method::Newton, 0.1);
    details.push(format!(
        "(b) eps 0.1: DP-LS {:.4} vs DP-Newton {:.4}",
        mean(Method::LeastSquares, 0.1),
        mean(Method::Newton, 0.1)
    ));
    let mut fc_wins = true;
    for eps in [1.0, 8.0] {
        let (fc, adam) = (mean(Method::FeatureCovariance, eps), mean(Method::FirstOrder, eps));
        fc_wins &= fc >= adam;
        details.push(format!("(c) eps {eps}: DP-FC {fc:.4} vs DP-Adam {adam:.4}"));
    }
    let mut v = Verdict::new(
        monotone && low && fc_wins,
        format!("(a) monotone in eps: {monotone}, (b) LS >= Newton at eps 0.1: {low}, (c) FC >= Adam at eps 1, 8: {fc_wins}"),
    );
    v.details = details;
    v
}

fn sweep_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.json");
    std::fs::write(
        &config,
        r#"{"method":"dp-ls","data":{"synthetic":{"n":600,"d":8,"m":10,"margin":4,"noise":1,"seed":3}},
            "epsilon":1,"iters":5,"eta":0.1,"lambda":100,"alpha":0.1}"#,
    )
    .unwrap();
    let run = |out: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_dplp"))
            .args(["sweep", "--config"])
            .arg(&config)
            .args(["--epsilons", "0.5,8,inf", "--seeds", "1,2,3,4", "--methods", "dp-ls,dp-newton,dp-adam,dp-fc"])
            .arg("--out")
            .arg(dir.path().join(out))
            .arg("--json")
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (o.stdout, std::fs::read(dir.path().join(out)).unwrap())
    };
    let (a_out, a_file) = run("a.json");
    let (b_out, b_file) = run("b.json");
    Verdict::new(
        a_out == b_out && a_file == b_file && a_out == a_file,
        format!("two sweep executions (12 cells x 4 seeds): {} bytes, identical: {}", a_out.len(), a_out == b_out && a_file == b_file),
    )
}

fn noise_statistics() -> Verdict {
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for (i, &(sigma, sens, n)) in [(1.0, 1.0, 1.0), (4.0, 0.5, 100.0), (0.3, 2.0, 7.0)].iter().enumerate() {
        let draws = 10_000;
        let rel = Release::new(sens, sigma, n, NoiseKey::new(99, i, 0, Statistic::Gradient));
        let z = sanitize_sum(vec![0.0; draws], &rel, &mut ZcdpLedger::new()).unwrap();
        let mean = z.iter().sum::<f64>() / draws as f64;
        let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws - 1) as f64).sqrt();
        let want = sigma * sens / n;
        let err = (sd / want - 1.0).abs();
        worst = worst.max(err);
        lines.push(format!("sigma {sigma}, sensitivity {sens}, n {n}: std {sd:.6} vs {want:.6}"));
    }
    let mut v = Verdict::new(worst <= 0.02, format!("10^4 draws each, worst relative std error {:.2}%", 100.0 * worst));
    v.details = lines;
    v
}

/// Number, title, check and time limit in seconds.
type Criterion = (u8, &'static str, fn() -> Verdict, f64);

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "accountant exactness", accountant_exactness, 1.0),
        (2, "ledger exactness", ledger_exactness, 10.0),
        (3, "non-private oracle equivalence", oracle_equivalence, 30.0),
        (4, "sensitivity bounds", sensitivity_bounds, 60.0),
        (5, "derivative certification", derivative_certification, 30.0),
        (6, "qualitative trends", qualitative_trends, 900.0),
        (7, "sweep determinism", sweep_determinism, 900.0),
        (8, "noise statistics", noise_statistics, 5.0),
    ];
    let mut failed = Vec::new();
    for (id, name, run, limit) in criteria {
        let started = Instant::now();
        let v = run();
        let secs = started.elapsed().as_secs_f64();
        let pass = v.pass && secs < limit;
        println!(
            "criterion {id} [{name}]: {} ({secs:.2} s, limit {limit} s) {}",
            if pass { "PASS" } else { "FAIL" },
            v.summary
        );
        for d in &v.details {
            println!("    {d}");
        }
        if !pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 8 criteria pass");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
