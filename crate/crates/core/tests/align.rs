mod common;

use common::{random_dataset, random_orthogonal, random_theta, rotate_latent};
use proptest::prelude::*;
use tslpm::align::{align_chain, apply, latent_summary, procrustes_rotation, AlignReference};
use tslpm::hmc::Chain;
use tslpm::model::{build_interaction_matrix, InteractionMode};
use tslpm::posterior::{BlockKind, Posterior};
use tslpm::rng;
use tslpm::{Dataset, Error, ModelConfig};

fn points(n: usize, seed: u64, scale: f64) -> Vec<[f64; 2]> {
    let mut r = rng::seeded(seed);
    (0..n)
        .map(|_| [scale * rng::standard_normal(&mut r), scale * rng::standard_normal(&mut r)])
        .collect()
}

fn r2(x: &[[f64; 2]], y: &[[f64; 2]]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))
        .sum()
}

/// Minimum of the Procrustes objective over a 1e-4 rad grid of rotations
/// and reflections.
fn grid_minimum(x: &[[f64; 2]], y: &[[f64; 2]]) -> f64 {
    let steps = (std::f64::consts::TAU / 1e-4).ceil() as usize;
    let mut best = f64::INFINITY;
    for k in 0..steps {
        let (s, c) = (k as f64 * 1e-4).sin_cos();
        best = best.min(r2(&apply(x, &[[c, -s], [s, c]]), y));
        best = best.min(r2(&apply(x, &[[c, s], [s, -c]]), y));
    }
    best
}

#[test]
fn matches_grid_search_oracle() {
    for seed in 0..10 {
        let x = points(8, seed, 1.0);
        let noise = points(8, seed + 100, 0.2);
        let o = random_orthogonal(seed + 7);
        let y: Vec<[f64; 2]> = apply(&x, &o)
            .iter()
            .zip(&noise)
            .map(|(a, e)| [a[0] + e[0], a[1] + e[1]])
            .collect();
        let fit = procrustes_rotation(&x, &y).unwrap();
        let grid = grid_minimum(&x, &y);
        assert!(fit.r2 <= grid + 1e-12);
        assert!((fit.r2 - grid).abs() < 1e-6, "seed {seed}: {} vs {grid}", fit.r2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn solution_is_orthogonal_and_never_worse_than_identity(seed in any::<u64>(), n in 1usize..12) {
        let x = points(n, seed, 1.0);
        let y = points(n, seed ^ 0xABCD, 1.0);
        let fit = procrustes_rotation(&x, &y).unwrap();
        let o = fit.rotation;
        for i in 0..2 {
            for j in 0..2 {
                let dot = o[0][i] * o[0][j] + o[1][i] * o[1][j];
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() < 1e-12);
            }
        }
        prop_assert!(fit.r2 <= r2(&x, &y) + 1e-12);
    }

    #[test]
    fn exact_transforms_recovered(seed in any::<u64>()) {
        let x = points(6, seed, 1.0);
        let y = apply(&x, &random_orthogonal(seed));
        prop_assert!(procrustes_rotation(&x, &y).unwrap().r2 < 1e-20);
    }
}

fn latent_chain(seed: u64) -> (Chain, Dataset, ModelConfig) {
    let data = random_dataset(5, 30, 3.0, seed);
    let config = ModelConfig::default();
    let post = Posterior::new(&config, &data).unwrap();
    let base = random_theta(post.layout(), seed);
    let p = post.unpack(&base).unwrap();
    let mut chain = Chain::from_point(&p, &config, &data, 40).unwrap();
    for (k, s) in chain.samples.iter_mut().enumerate() {
        *s = rotate_latent(&base, post.layout(), &random_orthogonal(seed * 1000 + k as u64));
        chain.log_posteriors[k] = post.log_posterior(s);
    }
    (chain, data, config)
}

fn latent_block(chain: &Chain, k: usize) -> Vec<f64> {
    chain.samples[k][chain.layout.range(BlockKind::Latent)].to_vec()
}

#[test]
fn rotated_copies_collapse_after_alignment() {
    let (chain, data, config) = latent_chain(3);
    let aligned = align_chain(&chain, &AlignReference::Sample(0)).unwrap();
    assert!(aligned.aligned);
    let first = latent_block(&aligned, 0);
    assert_eq!(first, latent_block(&chain, 0));
    for k in 1..aligned.len() {
        let d = latent_block(&aligned, k)
            .iter()
            .zip(&first)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(d < 1e-8, "sample {k}: {d}");
    }
    let post = Posterior::new(&config, &data).unwrap();
    for k in 0..chain.len() {
        let before = build_interaction_matrix(&chain.params(k).unwrap(), &config).unwrap();
        let after = build_interaction_matrix(&aligned.params(k).unwrap(), &config).unwrap();
        assert!((&before - &after).iter().all(|v| v.abs() < 1e-12));
        let lp = post.log_posterior(&aligned.samples[k]);
        assert!((lp - chain.log_posteriors[k]).abs() <= 1e-10 * lp.abs());
        assert_eq!(aligned.log_posteriors[k], chain.log_posteriors[k]);
        // Non-latent blocks are untouched.
        let z = chain.layout.range(BlockKind::Latent);
        assert_eq!(aligned.samples[k][..z.start], chain.samples[k][..z.start]);
    }
}

#[test]
fn alignment_is_idempotent() {
    let (chain, _, _) = latent_chain(4);
    let reference = AlignReference::Positions(chain.params(5).unwrap().latent.unwrap());
    let once = align_chain(&chain, &reference).unwrap();
    let twice = align_chain(&once, &reference).unwrap();
    for (a, b) in once.samples.iter().zip(&twice.samples) {
        assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12));
    }
}

#[test]
fn alignment_reduces_dispersion() {
    let (mut chain, _, _) = latent_chain(5);
    // Add jitter so the chain is not a set of exact copies.
    let mut r = rng::seeded(9);
    let z = chain.layout.range(BlockKind::Latent);
    for s in chain.samples.iter_mut() {
        for v in &mut s[z.clone()] {
            *v += 0.02 * rng::standard_normal(&mut r);
        }
    }
    let dispersion = |c: &Chain| {
        let mean: Vec<f64> = (z.clone())
            .map(|i| c.samples.iter().map(|s| s[i]).sum::<f64>() / c.len() as f64)
            .collect();
        c.samples
            .iter()
            .map(|s| s[z.clone()].iter().zip(&mean).map(|(a, m)| (a - m).powi(2)).sum::<f64>())
            .sum::<f64>()
    };
    let aligned = align_chain(&chain, &AlignReference::Sample(0)).unwrap();
    assert!(dispersion(&aligned) < dispersion(&chain));
}

#[test]
fn summaries_require_alignment() {
    let (chain, _, _) = latent_chain(6);
    assert!(matches!(latent_summary(&chain, 0.95), Err(Error::Refused(_))));
    let aligned = align_chain(&chain, &AlignReference::Sample(0)).unwrap();
    let s = latent_summary(&aligned, 0.95).unwrap();
    assert_eq!(s.mean.len(), 5);
    for i in 0..5 {
        for d in 0..2 {
            assert!(s.lower[i][d] <= s.mean[i][d] + 1e-12 && s.mean[i][d] <= s.upper[i][d] + 1e-12);
        }
    }
}

#[test]
fn bad_references_rejected() {
    let (chain, data, _) = latent_chain(7);
    assert!(matches!(
        align_chain(&chain, &AlignReference::Positions(vec![[0.0, 1.0]; 3])),
        Err(Error::Shape(_))
    ));
    assert!(matches!(align_chain(&chain, &AlignReference::Sample(999)), Err(Error::Index(_))));
    let full = ModelConfig {
        interaction_mode: InteractionMode::FullMatrix,
        ..ModelConfig::default()
    };
    let p = tslpm::ParameterSet::zeros(&full, 5);
    let c = Chain::from_point(&p, &full, &data, 3).unwrap();
    assert!(align_chain(&c, &AlignReference::Sample(0)).is_err());
}
