mod common;

use common::random_dataset;
use tslpm::map_fit::{fit_map, MapOptions};
use tslpm::optim::{minimize, LbfgsOptions};
use tslpm::posterior::{BlockKind, LogDensity, Posterior, PriorOnly};
use tslpm::synthesis::{generate_stable, simulate_panel, DEFAULT_LATENT_VARIANCE};
use tslpm::{Dataset, ModelConfig, ParameterSet};

fn negated<T: LogDensity>(target: &T) -> impl FnMut(&[f64]) -> (f64, Vec<f64>) + '_ {
    |x| {
        let (f, g) = target.log_density_and_grad(x);
        (-f, g.into_iter().map(|v| -v).collect())
    }
}

#[test]
fn prior_only_mode_found_quickly() {
    let target = PriorOnly { dim: 7, sd: 100.0 };
    let x0 = [3.0, -1.0, 0.5, 10.0, -7.0, 0.1, 2.0];
    let r = minimize(negated(&target), &x0, &LbfgsOptions::default()).unwrap();
    assert!(r.converged());
    assert!(r.iterations <= 5, "{} iterations", r.iterations);
    assert!(r.x.iter().all(|v| v.abs() < 1e-8), "{:?}", r.x);
}

#[test]
fn single_node_autoregression_recovered() {
    let config = ModelConfig::default();
    let truth = ParameterSet {
        alpha: vec![1.0],
        beta: vec![0.5],
        latent: Some(vec![[0.0, 0.0]]),
        eta: vec![],
        delta: vec![],
        full_b: None,
    };
    for seed in 0..5 {
        let panel = simulate_panel(&truth, &config, 1000, seed, None).unwrap();
        let data = Dataset::new(panel, None).unwrap();
        let fit = fit_map(&data, &config, None, &MapOptions::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.params.beta[0] - 0.5).abs() < 0.1, "seed {seed}: {}", fit.params.beta[0]);
    }
}

#[test]
fn optimum_is_a_fixed_point() {
    let config = ModelConfig::default();
    let (_, sim) = generate_stable(5, 200, 3, &config, DEFAULT_LATENT_VARIANCE, 1.05, 100).unwrap();
    let data = Dataset::new(sim.panel, None).unwrap();
    let fit = fit_map(&data, &config, None, &MapOptions::default()).unwrap();
    assert!(fit.converged);
    assert!(fit.gradient_norm <= 1e-6 * fit.log_posterior.abs().max(1.0));
    let again = fit_map(&data, &config, Some(&fit.flat), &MapOptions::default()).unwrap();
    assert!((again.log_posterior - fit.log_posterior).abs() < 1e-8);
    let trace_monotone = fit.trace.windows(2).all(|w| w[1] >= w[0]);
    assert!(trace_monotone);
}

#[test]
fn objective_decreases_along_descent_directions() {
    for (k, config) in common::all_configs().iter().enumerate().step_by(5) {
        let data = random_dataset(4, 60, 4.0, k as u64);
        let post = Posterior::new(config, &data).unwrap();
        let mut x0 = vec![0.0; post.dim()];
        for (j, i) in post.layout().range(BlockKind::Latent).enumerate() {
            x0[i] = 0.1 * ((j as f64) + 1.0).sin();
        }
        let r = minimize(negated(&post), &x0, &LbfgsOptions::default()).unwrap();
        assert!(r.f_history.windows(2).all(|w| w[1] <= w[0]), "config {k}");
        assert!(r.slopes.iter().all(|s| *s < 0.0), "config {k}");
        assert_eq!(r.slopes.len() + 1, r.f_history.len());
        if r.converged() {
            assert!(r.grad_max_abs() <= 1e-6 * r.f.abs().max(1.0));
        }
    }
}

#[test]
fn multistart_keeps_best_and_is_deterministic() {
    let config = ModelConfig::default();
    let data = random_dataset(4, 80, 5.0, 2);
    let opts = MapOptions {
        seed: 4,
        ..MapOptions::default()
    };
    let best = fit_map(&data, &config, None, &opts).unwrap();
    for start in 0..opts.n_starts {
        let single = MapOptions { n_starts: 1, ..opts };
        let init = tslpm::map_fit::default_init(
            Posterior::new(&config, &data).unwrap().layout(),
            opts.seed,
            start,
            opts.init_latent_sd,
        );
        let f = fit_map(&data, &config, Some(&init), &single).unwrap();
        assert!(f.log_posterior <= best.log_posterior + 1e-9);
    }
    assert_eq!(best, fit_map(&data, &config, None, &opts).unwrap());
}
