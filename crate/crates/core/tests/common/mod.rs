#![allow(dead_code)]

use ndarray::Array2;
use rand::Rng;
use statrs::function::gamma::ln_gamma;
use tslpm::model::{InteractionMode, SeasonalMode, Sharing};
use tslpm::posterior::{BlockKind, FlatLayout};
use tslpm::rng;
use tslpm::{CountPanel, CovariateMatrix, Dataset, ModelConfig};

/// Every combination of sharing modes, seasonality, covariates and
/// interaction structure.
pub fn all_configs() -> Vec<ModelConfig> {
    let mut out = Vec::new();
    for alpha_mode in [Sharing::Shared, Sharing::PerNode] {
        for beta_mode in [Sharing::Shared, Sharing::PerNode] {
            for (eta_mode, seasonal_lag) in [
                (SeasonalMode::None, 0),
                (SeasonalMode::Shared, 2),
                (SeasonalMode::PerNode, 3),
            ] {
                for covariate_names in [vec![], vec!["x1".to_string(), "x2".to_string()]] {
                    for interaction_mode in [InteractionMode::LatentProjection, InteractionMode::FullMatrix] {
                        if interaction_mode == InteractionMode::FullMatrix && beta_mode == Sharing::Shared {
                            continue;
                        }
                        out.push(ModelConfig {
                            alpha_mode,
                            beta_mode,
                            eta_mode,
                            seasonal_lag,
                            covariate_names: covariate_names.clone(),
                            interaction_mode,
                            ..ModelConfig::default()
                        });
                    }
                }
            }
        }
    }
    out
}

/// Independent Poisson counts, with two standardised covariates.
pub fn random_dataset(n: usize, t: usize, mean: f64, seed: u64) -> Dataset {
    let mut r = rng::seeded(seed);
    let counts = Array2::from_shape_fn((n, t), |_| rng::poisson(&mut r, mean));
    let raw = Array2::from_shape_fn((n, 2), |_| r.random_range(-1.0..1.0));
    let cov = CovariateMatrix::standardized(raw, vec!["x1".into(), "x2".into()]).unwrap();
    Dataset::new(CountPanel::new(counts, CountPanel::default_labels(n)).unwrap(), Some(cov)).unwrap()
}

/// A point with moderate intensities: intercepts near 0.5, everything else
/// small.
pub fn random_theta(layout: &FlatLayout, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, 99);
    let mut theta = vec![0.0; layout.dim()];
    for b in &layout.blocks {
        for k in b.offset..b.offset + b.len {
            theta[k] = match b.kind {
                BlockKind::Alpha => r.random_range(0.0..1.0),
                BlockKind::Latent => 0.3 * rng::standard_normal(&mut r),
                _ => 0.1 * rng::standard_normal(&mut r),
            };
        }
    }
    theta
}

pub fn random_orthogonal(seed: u64) -> [[f64; 2]; 2] {
    let mut r = rng::seeded(seed);
    let a: f64 = r.random_range(0.0..std::f64::consts::TAU);
    let (s, c) = a.sin_cos();
    if r.random::<bool>() {
        [[c, -s], [s, c]]
    } else {
        [[c, s], [s, -c]]
    }
}

/// Applies `z ↦ O z` to every latent position in `theta`.
pub fn rotate_latent(theta: &[f64], layout: &FlatLayout, o: &[[f64; 2]; 2]) -> Vec<f64> {
    let mut out = theta.to_vec();
    for k in layout.range(BlockKind::Latent).step_by(2) {
        let (a, b) = (theta[k], theta[k + 1]);
        out[k] = o[0][0] * a + o[0][1] * b;
        out[k + 1] = o[1][0] * a + o[1][1] * b;
    }
    out
}

/// Log-likelihood written directly from the model definition, decoding the
/// flat vector by hand.
pub fn naive_log_lik(theta: &[f64], layout: &FlatLayout, config: &ModelConfig, data: &Dataset) -> f64 {
    let n = data.n_nodes();
    let block = |kind| &theta[layout.range(kind)];
    let pick = |v: &[f64], i: usize| if v.len() == 1 { v[0] } else { v[i] };
    let (alpha, beta, z, full, eta, delta) = (
        block(BlockKind::Alpha),
        block(BlockKind::Beta),
        block(BlockKind::Latent),
        block(BlockKind::Interaction),
        block(BlockKind::Eta),
        block(BlockKind::Delta),
    );
    let coef = |i: usize, j: usize| match config.interaction_mode {
        InteractionMode::FullMatrix => full[i * n + j],
        InteractionMode::LatentProjection if i == j => pick(beta, i),
        InteractionMode::LatentProjection => z[2 * i] * z[2 * j] + z[2 * i + 1] * z[2 * j + 1],
    };
    let x = data.selected_covariates(config).unwrap();
    let y = |i: usize, t: usize| data.panel.count(i, t) as f64;
    let mut total = 0.0;
    for t in config.seasonal_lag.max(1)..data.panel.n_times() {
        for i in 0..n {
            let mut eta_it = pick(alpha, i);
            for j in 0..n {
                eta_it += coef(i, j) * (y(j, t - 1) + 1.0).ln();
            }
            if !eta.is_empty() {
                eta_it += pick(eta, i) * (y(i, t - config.seasonal_lag) + 1.0).ln();
            }
            for (k, d) in delta.iter().enumerate() {
                eta_it += d * x[[i, k]];
            }
            total += y(i, t) * eta_it - eta_it.exp() - ln_gamma(y(i, t) + 1.0);
        }
    }
    total
}
