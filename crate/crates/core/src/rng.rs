//! Random number generation.
//!
//! Every random operation takes an explicit `u64` seed. Streams come from
//! ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`), a counter-based
//! generator; independent sub-streams (chains, replications) select a
//! different ChaCha stream id with [`stream`].
//!
//! Poisson variates use sequential inversion for `λ < 10` and Hörmann's
//! PTRS transformed rejection for `λ >= 10`, each consuming uniforms from the
//! stream in a fixed order so that runs are reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;

pub type SimRng = ChaCha8Rng;

/// Generator for `seed`, stream 0.
pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for `seed` on an independent stream `id`.
pub fn stream(seed: u64, id: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Generator for stream `id` of a seed derived from `seed` and `key`, for
/// two-level indexing such as (trajectory, node).
pub fn substream(seed: u64, key: u64, id: u64) -> SimRng {
    stream(seed ^ key.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15), id)
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

const INVERSION_LIMIT: f64 = 10.0;

/// Draws from Poisson(`lambda`). `lambda` must be finite and non-negative.
pub fn poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    debug_assert!(lambda.is_finite() && lambda >= 0.0, "bad rate {lambda}");
    if lambda <= 0.0 {
        return 0;
    }
    if lambda < INVERSION_LIMIT {
        poisson_inversion(rng, lambda)
    } else {
        poisson_ptrs(rng, lambda)
    }
}

fn poisson_inversion<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = (-lambda).exp();
    let mut cdf = p;
    // The tail beyond k = 200 has probability far below 2^-53 for lambda < 10.
    while u > cdf && k < 200 {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
    }
    k
}

fn poisson_ptrs<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    let slam = lambda.sqrt();
    let loglam = lambda.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= v_r {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln()
            <= -lambda + k * loglam - ln_gamma(k + 1.0)
        {
            return k as u64;
        }
    }
}

/// Smallest `k` with `P(Y <= k) >= q` for `Y ~ Poisson(lambda)`.
pub fn poisson_quantile(lambda: f64, q: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    // Sum the pmf in log space around the mode to stay stable for large rates.
    let log_pmf = |k: u64| k as f64 * lambda.ln() - lambda - ln_gamma(k as f64 + 1.0);
    let mut cdf = 0.0;
    let start = if lambda > 50.0 {
        // Mass below mean - 12 sd is negligible.
        (lambda - 12.0 * lambda.sqrt()).floor().max(0.0) as u64
    } else {
        0
    };
    let mut k = start;
    loop {
        cdf += log_pmf(k).exp();
        if cdf >= q || k > (lambda + 40.0 * lambda.sqrt() + 100.0) as u64 {
            return k;
        }
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(lambda: f64, n: usize, seed: u64) -> (f64, f64) {
        let mut rng = seeded(seed);
        let xs: Vec<f64> = (0..n).map(|_| poisson(&mut rng, lambda) as f64).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (mean, var)
    }

    #[test]
    fn poisson_moments_both_regimes() {
        for &lambda in &[0.3, 2.0, 9.5, 10.0, 37.0, 1.0e4] {
            let n = 100_000;
            let (mean, var) = moments(lambda, n, 11);
            let se = (lambda / n as f64).sqrt();
            assert!((mean - lambda).abs() < 5.0 * se, "lambda {lambda}: mean {mean}");
            assert!((var / lambda - 1.0).abs() < 0.03, "lambda {lambda}: var {var}");
        }
    }

    #[test]
    fn poisson_pmf_small_rate() {
        let mut rng = seeded(5);
        let n = 200_000;
        let zeros = (0..n).filter(|_| poisson(&mut rng, 1.0) == 0).count() as f64 / n as f64;
        assert!((zeros - (-1.0f64).exp()).abs() < 0.005);
    }

    #[test]
    fn streams_differ_and_repeat() {
        let a: Vec<u64> = (0..5).map({ let mut r = stream(3, 0); move |_| poisson(&mut r, 4.0) }).collect();
        let b: Vec<u64> = (0..5).map({ let mut r = stream(3, 0); move |_| poisson(&mut r, 4.0) }).collect();
        let mut r1 = stream(3, 1);
        let mut r0 = stream(3, 0);
        assert_eq!(a, b);
        let x0: Vec<u64> = (0..32).map(|_| r0.random()).collect();
        let x1: Vec<u64> = (0..32).map(|_| r1.random()).collect();
        assert_ne!(x0, x1);
    }

    #[test]
    fn quantiles() {
        assert_eq!(poisson_quantile(1.0, 0.025), 0);
        assert_eq!(poisson_quantile(1.0, 0.975), 3);
        assert_eq!(poisson_quantile(10.0, 0.025), 4);
        assert_eq!(poisson_quantile(10.0, 0.975), 17);
        assert_eq!(poisson_quantile(0.0, 0.5), 0);
    }
}
