mod common;

use common::{random_dataset, random_theta};
use statrs::distribution::{ContinuousCDF, Normal};
use tslpm::hmc::{
    diagnostics, effective_sample_size, hmc_sample, leapfrog, sample, split_rhat, Chain, HmcOptions,
};
use tslpm::posterior::{LogDensity, Posterior, PriorOnly};
use tslpm::rng;
use tslpm::{Error, ModelConfig};

fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn leapfrog_is_reversible_on_a_posterior() {
    let data = random_dataset(3, 30, 3.0, 1);
    let post = Posterior::new(&ModelConfig::default(), &data).unwrap();
    let q0 = random_theta(post.layout(), 2);
    let mut r = rng::seeded(3);
    let p0: Vec<f64> = (0..q0.len()).map(|_| rng::standard_normal(&mut r)).collect();
    let f = |x: &[f64]| post.log_density_and_grad(x);
    let fwd = leapfrog(&q0, &p0, 0.002, 20, f).unwrap();
    let flipped: Vec<f64> = fwd.momentum.iter().map(|v| -v).collect();
    let back = leapfrog(&fwd.position, &flipped, 0.002, 20, f).unwrap();
    for (a, b) in back.position.iter().zip(&q0) {
        assert!((a - b).abs() < 1e-8);
    }
    for (a, b) in back.momentum.iter().zip(&p0) {
        assert!((-a - b).abs() < 1e-8);
    }
}

#[test]
fn harmonic_oscillator_energy_and_flow() {
    // Standard normal target: exact flow is a rotation in phase space.
    let target = PriorOnly { dim: 1, sd: 1.0 };
    let (q0, p0) = (0.7, -0.4);
    let s = leapfrog(&[q0], &[p0], 0.01, 100, |x| target.log_density_and_grad(x)).unwrap();
    let energy = |q: f64, p: f64| 0.5 * q * q + 0.5 * p * p;
    assert!((energy(s.position[0], s.momentum[0]) - energy(q0, p0)).abs() < 1e-4);
    let t = 1.0f64;
    assert!((s.position[0] - (q0 * t.cos() + p0 * t.sin())).abs() < 1e-4);
    assert!((s.momentum[0] - (p0 * t.cos() - q0 * t.sin())).abs() < 1e-4);
}

#[test]
fn leapfrog_preserves_volume() {
    let grad = |x: &[f64]| {
        let (a, b) = (x[0], x[1]);
        (
            -a.powi(4) / 4.0 - b * b / 2.0 - a * b / 2.0,
            vec![-a.powi(3) - b / 2.0, -b - a / 2.0],
        )
    };
    let z0 = [0.3, -0.5, 0.8, 0.1];
    let map = |z: &[f64]| {
        let s = leapfrog(&z[..2], &z[2..], 0.1, 10, grad).unwrap();
        [s.position[0], s.position[1], s.momentum[0], s.momentum[1]]
    };
    let h = 1e-6;
    let mut jac = nalgebra::Matrix4::<f64>::zeros();
    for c in 0..4 {
        let (mut up, mut down) = (z0, z0);
        up[c] += h;
        down[c] -= h;
        let (fu, fd) = (map(&up), map(&down));
        for r in 0..4 {
            jac[(r, c)] = (fu[r] - fd[r]) / (2.0 * h);
        }
    }
    assert!((jac.determinant().abs() - 1.0).abs() < 1e-4, "{}", jac.determinant());
}

#[test]
fn prior_only_target_is_recovered() {
    let target = PriorOnly { dim: 10, sd: 100.0 };
    let opts = HmcOptions {
        seed: 11,
        ..HmcOptions::default()
    };
    let d = sample(&target, &opts, 0).unwrap();
    assert_eq!(d.samples.len(), 1000);
    assert!((d.mean_accept_prob - 0.8).abs() < 0.1, "{}", d.mean_accept_prob);
    for k in 0..10 {
        let x: Vec<f64> = d.samples.iter().map(|s| s[k]).collect();
        let ess = effective_sample_size(&[&x]);
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt();
        assert!(mean.abs() < 4.0 * 100.0 / ess.sqrt(), "coordinate {k}: mean {mean}, ess {ess}");
        assert!((sd - 100.0).abs() < 10.0, "coordinate {k}: sd {sd}");
    }
}

#[test]
fn two_dimensional_ks_smoke_test() {
    let target = PriorOnly { dim: 2, sd: 100.0 };
    let opts = HmcOptions {
        iters: 25_000,
        burnin: 5_000,
        seed: 5,
        ..HmcOptions::default()
    };
    let d = sample(&target, &opts, 0).unwrap();
    let normal = Normal::new(0.0, 100.0).unwrap();
    for k in 0..2 {
        let x: Vec<f64> = d.samples.iter().map(|s| s[k]).collect();
        assert!(effective_sample_size(&[&x]) >= 1000.0);
        let ks = ks_distance(&x, |v| normal.cdf(v));
        assert!(ks < 0.05, "coordinate {k}: KS {ks}");
    }
}

#[test]
fn tiny_steps_are_almost_always_accepted() {
    let data = random_dataset(3, 40, 3.0, 4);
    let post = Posterior::new(&ModelConfig::default(), &data).unwrap();
    let opts = HmcOptions {
        iters: 2000,
        burnin: 0,
        thin: 1,
        n_leapfrog: 1,
        leapfrog_jitter: 0.0,
        initial_step: Some(1e-6),
        init: Some(random_theta(post.layout(), 1)),
        seed: 2,
        ..HmcOptions::default()
    };
    let d = sample(&post, &opts, 0).unwrap();
    assert!(d.accept_rate > 0.999, "{}", d.accept_rate);
}

fn short_options(seed: u64) -> HmcOptions {
    HmcOptions {
        iters: 600,
        burnin: 300,
        thin: 3,
        seed,
        ..HmcOptions::default()
    }
}

#[test]
fn stored_log_posteriors_match_reevaluation() {
    let data = random_dataset(3, 60, 4.0, 9);
    let config = ModelConfig::default();
    let chain = hmc_sample(&data, &config, &short_options(3), 0).unwrap();
    let post = Posterior::new(&config, &data).unwrap();
    assert_eq!(chain.samples.len(), chain.log_posteriors.len());
    assert!((0.0..=1.0).contains(&chain.accept_rate));
    for (s, lp) in chain.samples.iter().zip(&chain.log_posteriors) {
        assert!((post.log_posterior(s) - lp).abs() < 1e-8);
    }
}

#[test]
fn chains_are_seed_deterministic() {
    let data = random_dataset(2, 40, 3.0, 10);
    let config = ModelConfig::default();
    let a = hmc_sample(&data, &config, &short_options(21), 0).unwrap();
    let b = hmc_sample(&data, &config, &short_options(21), 0).unwrap();
    let c = hmc_sample(&data, &config, &short_options(21), 1).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.samples, c.samples);
}

struct Cliff;

impl LogDensity for Cliff {
    fn dim(&self) -> usize {
        1
    }
    fn log_density(&self, theta: &[f64]) -> f64 {
        if theta[0] == 0.0 {
            0.0
        } else {
            f64::NAN
        }
    }
    fn log_density_and_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        (self.log_density(theta), vec![1.0])
    }
}

#[test]
fn all_divergent_warmup_aborts() {
    let opts = HmcOptions {
        iters: 200,
        burnin: 100,
        initial_step: Some(0.5),
        ..HmcOptions::default()
    };
    assert!(matches!(sample(&Cliff, &opts, 0), Err(Error::Numeric(_))));
}

fn iid_normal(n: usize, seed: u64, shift: f64, scale: f64) -> Vec<f64> {
    let mut r = rng::seeded(seed);
    (0..n).map(|_| shift + scale * rng::standard_normal(&mut r)).collect()
}

#[test]
fn rhat_and_ess_oracles() {
    let a = iid_normal(1000, 1, 0.0, 1.0);
    let b = iid_normal(1000, 2, 0.0, 1.0);
    assert!(split_rhat(&[&a, &b]) < 1.05);
    let ess = effective_sample_size(&[&a]);
    assert!((ess - 1000.0).abs() <= 250.0, "{ess}");
    assert!(effective_sample_size(&[&a, &b]) <= 2000.0);

    let hi = iid_normal(500, 3, 10.0, 0.01);
    let lo = iid_normal(500, 4, -10.0, 0.01);
    assert!(split_rhat(&[&hi, &lo]) > 2.0);
}

#[test]
fn diagnostics_flag_constant_coordinates() {
    let data = random_dataset(2, 30, 3.0, 12);
    let config = ModelConfig::default();
    let p = tslpm::ParameterSet::zeros(&config, 2);
    let mut chain = Chain::from_point(&p, &config, &data, 100).unwrap();
    // Vary only the intercept.
    for (k, s) in chain.samples.iter_mut().enumerate() {
        s[0] = (k as f64 * 0.37).sin();
    }
    let d = diagnostics(&[chain.clone(), chain]).unwrap();
    assert!(d.rhat[0].is_finite());
    assert_eq!(d.rhat_undefined.len(), d.names.len() - 1);
    assert!(d.ess.iter().all(|e| e.is_nan() || *e <= d.total_draws as f64));
}
