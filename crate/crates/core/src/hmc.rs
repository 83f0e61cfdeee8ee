//! Hamiltonian Monte Carlo with an identity mass matrix, a fixed (jittered)
//! number of leapfrog steps, dual-averaging step-size adaptation during
//! burn-in, and split-R̂ / ESS diagnostics.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map_fit::default_init;
use crate::model::{Dataset, ModelConfig, ParameterSet};
use crate::posterior::{FlatLayout, LogDensity, Posterior};
use crate::rng::{self, SimRng};

/// Energy error beyond which a trajectory counts as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmcOptions {
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub target_accept: f64,
    pub seed: u64,
    /// Nominal number of leapfrog steps.
    pub n_leapfrog: usize,
    /// Per-iteration relative jitter of the number of steps (0.2 = ±20%).
    pub leapfrog_jitter: f64,
    /// Initial step size; found by a doubling/halving search when `None`.
    pub initial_step: Option<f64>,
    /// Starting point; default is zeros with small random latent positions.
    pub init: Option<Vec<f64>>,
}

impl Default for HmcOptions {
    fn default() -> Self {
        HmcOptions {
            iters: 10_000,
            burnin: 5_000,
            thin: 5,
            target_accept: 0.8,
            seed: 0,
            n_leapfrog: 20,
            leapfrog_jitter: 0.2,
            initial_step: None,
            init: None,
        }
    }
}

impl HmcOptions {
    fn validate(&self) -> Result<()> {
        if self.iters <= self.burnin {
            return Err(Error::Precondition(format!(
                "iters ({}) must exceed burnin ({})",
                self.iters, self.burnin
            )));
        }
        if self.thin == 0 || self.n_leapfrog == 0 {
            return Err(Error::Precondition("thin and n_leapfrog must be >= 1".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Precondition(format!(
                "target_accept must lie in (0, 1), got {}",
                self.target_accept
            )));
        }
        if !(0.0..1.0).contains(&self.leapfrog_jitter) {
            return Err(Error::Precondition("leapfrog_jitter must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Raw output of the sampler over any [`LogDensity`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draws {
    pub samples: Vec<Vec<f64>>,
    pub log_densities: Vec<f64>,
    /// Fraction of accepted proposals after burn-in.
    pub accept_rate: f64,
    /// Mean Metropolis acceptance probability after burn-in.
    pub mean_accept_prob: f64,
    /// Step size used after burn-in.
    pub step_size: f64,
    pub divergences: usize,
    pub warmup_divergences: usize,
}

/// Posterior draws of one chain for a model configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub config: ModelConfig,
    pub layout: FlatLayout,
    /// Stored states, post burn-in and thinning, in the flat layout.
    pub samples: Vec<Vec<f64>>,
    pub log_posteriors: Vec<f64>,
    pub accept_rate: f64,
    pub mean_accept_prob: f64,
    pub step_size: f64,
    pub n_leapfrog: usize,
    pub seed: u64,
    pub chain_id: u64,
    pub divergences: usize,
    pub warmup_divergences: usize,
    /// Set once latent positions have been Procrustes-aligned.
    pub aligned: bool,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn params(&self, index: usize) -> Result<ParameterSet> {
        let theta = self.samples.get(index).ok_or_else(|| {
            Error::Index(format!("sample {index} of a chain with {} samples", self.len()))
        })?;
        crate::posterior::unpack(theta, &self.layout, &self.config)
    }

    pub fn parameter_sets(&self) -> Result<Vec<ParameterSet>> {
        (0..self.len()).map(|k| self.params(k)).collect()
    }

    /// Coordinate-wise mean of the samples.
    pub fn mean(&self) -> Result<Vec<f64>> {
        if self.is_empty() {
            return Err(Error::Precondition("chain has no samples".into()));
        }
        let mut m = vec![0.0; self.layout.dim()];
        for s in &self.samples {
            for (a, b) in m.iter_mut().zip(s) {
                *a += b;
            }
        }
        let k = self.len() as f64;
        m.iter_mut().for_each(|v| *v /= k);
        Ok(m)
    }

    /// A chain holding a single parameter set repeated `copies` times, with
    /// log-posteriors evaluated on `data`.
    pub fn from_point(
        params: &ParameterSet,
        config: &ModelConfig,
        data: &Dataset,
        copies: usize,
    ) -> Result<Chain> {
        let posterior = Posterior::new(config, data)?;
        let theta = posterior.pack(params)?;
        let lp = posterior.log_posterior(&theta);
        Ok(Chain {
            config: config.clone(),
            layout: posterior.layout().clone(),
            samples: vec![theta; copies],
            log_posteriors: vec![lp; copies],
            accept_rate: 0.0,
            mean_accept_prob: 0.0,
            step_size: 0.0,
            n_leapfrog: 0,
            seed: 0,
            chain_id: 0,
            divergences: 0,
            warmup_divergences: 0,
            aligned: false,
        })
    }
}

/// State at the end of a leapfrog trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct LeapfrogState {
    pub position: Vec<f64>,
    pub momentum: Vec<f64>,
    pub log_density: f64,
    pub grad: Vec<f64>,
}

/// A trajectory hit a non-finite log density or gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Divergence {
    pub step: usize,
}

/// `n_steps` leapfrog steps of size `step` for the potential `-log p`:
/// half-step momentum, full-step position, half-step momentum.
/// `density` returns the log density and its gradient.
pub fn leapfrog<F>(
    position: &[f64],
    momentum: &[f64],
    step: f64,
    n_steps: usize,
    mut density: F,
) -> std::result::Result<LeapfrogState, Divergence>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (lp, grad) = density(position);
    if !lp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Divergence { step: 0 });
    }
    leapfrog_from(position, momentum, &grad, step, n_steps, density)
}

fn leapfrog_from<F>(
    position: &[f64],
    momentum: &[f64],
    grad0: &[f64],
    step: f64,
    n_steps: usize,
    mut density: F,
) -> std::result::Result<LeapfrogState, Divergence>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut q = position.to_vec();
    let mut p = momentum.to_vec();
    let mut grad = grad0.to_vec();
    let mut lp = f64::NAN;
    for s in 0..n_steps {
        for (pi, gi) in p.iter_mut().zip(&grad) {
            *pi += 0.5 * step * gi;
        }
        for (qi, pi) in q.iter_mut().zip(&p) {
            *qi += step * pi;
        }
        let (l, g) = density(&q);
        if !l.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Divergence { step: s + 1 });
        }
        lp = l;
        grad = g;
        for (pi, gi) in p.iter_mut().zip(&grad) {
            *pi += 0.5 * step * gi;
        }
    }
    Ok(LeapfrogState {
        position: q,
        momentum: p,
        log_density: lp,
        grad,
    })
}

/// Nesterov dual averaging of `log ε` towards a target acceptance
/// probability (γ = 0.05, t0 = 10, κ = 0.75, μ = log(10 ε0)).
#[derive(Debug, Clone, PartialEq)]
pub struct DualAveraging {
    mu: f64,
    target: f64,
    gamma: f64,
    t0: f64,
    kappa: f64,
    iteration: usize,
    h_bar: f64,
    log_step: f64,
    log_step_bar: f64,
}

impl DualAveraging {
    pub fn new(initial_step: f64, target: f64) -> Self {
        DualAveraging {
            mu: (10.0 * initial_step).ln(),
            target,
            gamma: 0.05,
            t0: 10.0,
            kappa: 0.75,
            iteration: 0,
            h_bar: 0.0,
            log_step: initial_step.ln(),
            log_step_bar: 0.0,
        }
    }

    /// Feeds one acceptance probability and returns the next step size.
    pub fn update(&mut self, accept_prob: f64) -> f64 {
        self.iteration += 1;
        let m = self.iteration as f64;
        let w = 1.0 / (m + self.t0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept_prob);
        self.log_step = self.mu - m.sqrt() / self.gamma * self.h_bar;
        let eta = m.powf(-self.kappa);
        self.log_step_bar = eta * self.log_step + (1.0 - eta) * self.log_step_bar;
        self.log_step.exp()
    }

    pub fn current_step(&self) -> f64 {
        self.log_step.exp()
    }

    /// Averaged step size, used once adaptation stops.
    pub fn final_step(&self) -> f64 {
        if self.iteration == 0 {
            self.current_step()
        } else {
            self.log_step_bar.exp()
        }
    }
}

/// Step size after adapting over a history of acceptance probabilities.
pub fn adapt_step_size(initial_step: f64, target: f64, history: &[f64]) -> f64 {
    let mut da = DualAveraging::new(initial_step, target);
    for &a in history {
        da.update(a);
    }
    da.current_step()
}

fn kinetic(p: &[f64]) -> f64 {
    0.5 * p.iter().map(|v| v * v).sum::<f64>()
}

fn draw_momentum(rng: &mut SimRng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng::standard_normal(rng)).collect()
}

/// Doubles or halves a unit step until the one-step acceptance probability
/// crosses 1/2.
fn initial_step_size<T: LogDensity + ?Sized>(
    target: &T,
    q: &[f64],
    lp: f64,
    grad: &[f64],
    rng: &mut SimRng,
) -> f64 {
    let p = draw_momentum(rng, q.len());
    let h0 = lp - kinetic(&p);
    let log_accept = |eps: f64| match leapfrog_from(q, &p, grad, eps, 1, |x| target.log_density_and_grad(x)) {
        Ok(s) => {
            let d = s.log_density - kinetic(&s.momentum) - h0;
            if d.is_finite() {
                d
            } else {
                f64::NEG_INFINITY
            }
        }
        Err(_) => f64::NEG_INFINITY,
    };
    let mut eps = 1.0;
    let mut la = log_accept(eps);
    let direction: f64 = if la > 0.5f64.ln() { 1.0 } else { -1.0 };
    for _ in 0..100 {
        if direction * la <= -direction * 2f64.ln() {
            break;
        }
        eps *= 2f64.powf(direction);
        la = log_accept(eps);
    }
    eps
}

/// Runs one HMC chain on `target`, using ChaCha stream `chain_id` of
/// `options.seed`.
pub fn sample<T: LogDensity + ?Sized>(target: &T, options: &HmcOptions, chain_id: u64) -> Result<Draws> {
    options.validate()?;
    let dim = target.dim();
    let mut rng = rng::stream(options.seed, chain_id);
    let mut q = match &options.init {
        Some(init) if init.len() != dim => {
            return Err(Error::shape(format!(
                "initial point has {} entries, target has {dim}",
                init.len()
            )))
        }
        Some(init) => init.clone(),
        None => vec![0.0; dim],
    };
    let (mut lp, mut grad) = target.log_density_and_grad(&q);
    if !lp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::numeric(format!(
            "log density is not finite at the initial point ({lp})"
        )));
    }
    let mut step = match options.initial_step {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => return Err(Error::Precondition(format!("initial step must be positive, got {s}"))),
        None => initial_step_size(target, &q, lp, &grad, &mut rng),
    };
    let mut adapt = DualAveraging::new(step, options.target_accept);

    let n_keep = (options.iters - options.burnin) / options.thin;
    let mut samples = Vec::with_capacity(n_keep);
    let mut log_densities = Vec::with_capacity(n_keep);
    let (mut accepted, mut accept_sum, mut post) = (0usize, 0.0, 0usize);
    let (mut divergences, mut warmup_divergences) = (0usize, 0usize);

    for it in 0..options.iters {
        let n_steps = if options.leapfrog_jitter > 0.0 {
            let u: f64 = rng.random_range(-1.0..1.0);
            ((options.n_leapfrog as f64) * (1.0 + options.leapfrog_jitter * u))
                .round()
                .max(1.0) as usize
        } else {
            options.n_leapfrog
        };
        let p0 = draw_momentum(&mut rng, dim);
        let h0 = lp - kinetic(&p0);
        let proposal = leapfrog_from(&q, &p0, &grad, step, n_steps, |x| {
            target.log_density_and_grad(x)
        });
        let u: f64 = rng.random();
        let (accept_prob, divergent) = match &proposal {
            Ok(s) => {
                let dh = s.log_density - kinetic(&s.momentum) - h0;
                if !dh.is_finite() || dh.abs() > DIVERGENCE_THRESHOLD {
                    (0.0, true)
                } else {
                    (dh.exp().min(1.0), false)
                }
            }
            Err(_) => (0.0, true),
        };
        let accept = !divergent && u < accept_prob;
        if accept {
            let s = proposal.expect("accepted proposals are finite");
            q = s.position;
            lp = s.log_density;
            grad = s.grad;
        }
        if it < options.burnin {
            if divergent {
                warmup_divergences += 1;
            }
            step = adapt.update(accept_prob);
            if it + 1 == options.burnin {
                step = adapt.final_step();
            }
        } else {
            post += 1;
            accept_sum += accept_prob;
            if accept {
                accepted += 1;
            }
            if divergent {
                divergences += 1;
            }
            if (it - options.burnin + 1) % options.thin == 0 {
                samples.push(q.clone());
                log_densities.push(lp);
            }
        }
    }
    if options.burnin > 0 && warmup_divergences == options.burnin {
        return Err(Error::numeric(format!(
            "every one of the {} warm-up trajectories diverged (final step size {step:.3e})",
            options.burnin
        )));
    }
    Ok(Draws {
        samples,
        log_densities,
        accept_rate: accepted as f64 / post as f64,
        mean_accept_prob: accept_sum / post as f64,
        step_size: step,
        divergences,
        warmup_divergences,
    })
}

/// One HMC chain on the posterior of `config` given `data`. Without an
/// explicit start, the chain begins at zeros with N(0, 0.1²) latent
/// coordinates drawn from stream `chain_id`.
pub fn hmc_sample(
    data: &Dataset,
    config: &ModelConfig,
    options: &HmcOptions,
    chain_id: u64,
) -> Result<Chain> {
    let posterior = Posterior::new(config, data)?;
    sample_posterior(&posterior, options, chain_id)
}

pub fn sample_posterior(posterior: &Posterior, options: &HmcOptions, chain_id: u64) -> Result<Chain> {
    let mut opts = options.clone();
    if opts.init.is_none() {
        opts.init = Some(default_init(posterior.layout(), options.seed ^ 0xC4A1_0000, chain_id as usize, 0.1));
    }
    let draws = sample(posterior, &opts, chain_id)?;
    Ok(Chain {
        config: posterior.config().clone(),
        layout: posterior.layout().clone(),
        samples: draws.samples,
        log_posteriors: draws.log_densities,
        accept_rate: draws.accept_rate,
        mean_accept_prob: draws.mean_accept_prob,
        step_size: draws.step_size,
        n_leapfrog: options.n_leapfrog,
        seed: options.seed,
        chain_id,
        divergences: draws.divergences,
        warmup_divergences: draws.warmup_divergences,
        aligned: false,
    })
}

/// Runs `n_chains` chains in parallel on independent streams.
pub fn run_chains(posterior: &Posterior, options: &HmcOptions, n_chains: usize) -> Result<Vec<Chain>> {
    (0..n_chains as u64)
        .into_par_iter()
        .map(|id| sample_posterior(posterior, options, id))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub names: Vec<String>,
    /// Split R̂ per coordinate; NaN where undefined (constant draws).
    pub rhat: Vec<f64>,
    /// Coordinates whose R̂ is undefined.
    pub rhat_undefined: Vec<String>,
    pub ess: Vec<f64>,
    pub divergence_count: usize,
    pub accept_rates: Vec<f64>,
    pub total_draws: usize,
}

/// Split R̂ and ESS for every coordinate plus divergence totals.
pub fn diagnostics(chains: &[Chain]) -> Result<ChainDiagnostics> {
    let first = chains
        .first()
        .ok_or_else(|| Error::Precondition("no chains to diagnose".into()))?;
    if chains.iter().any(|c| c.layout != first.layout) {
        return Err(Error::shape("chains have different parameter layouts"));
    }
    let len = first.len();
    if len < 4 || chains.iter().any(|c| c.len() != len) {
        return Err(Error::Precondition(
            "chains must have equal lengths of at least 4 draws".into(),
        ));
    }
    let dim = first.layout.dim();
    let names = first.layout.coordinate_names();
    let mut rhat = Vec::with_capacity(dim);
    let mut ess = Vec::with_capacity(dim);
    for k in 0..dim {
        let series: Vec<Vec<f64>> = chains
            .iter()
            .map(|c| c.samples.iter().map(|s| s[k]).collect())
            .collect();
        let refs: Vec<&[f64]> = series.iter().map(|s| s.as_slice()).collect();
        rhat.push(split_rhat(&refs));
        ess.push(effective_sample_size(&refs));
    }
    let rhat_undefined = names
        .iter()
        .zip(&rhat)
        .filter(|(_, r)| r.is_nan())
        .map(|(n, _)| n.clone())
        .collect();
    Ok(ChainDiagnostics {
        names,
        rhat,
        rhat_undefined,
        ess,
        divergence_count: chains.iter().map(|c| c.divergences).sum(),
        accept_rates: chains.iter().map(|c| c.accept_rate).collect(),
        total_draws: len * chains.len(),
    })
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Potential scale reduction over the halves of every chain.
/// NaN when the within-chain variance vanishes.
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    let half = chains.iter().map(|c| c.len() / 2).min().unwrap_or(0);
    if half < 2 {
        return f64::NAN;
    }
    let mut parts: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        parts.push(&c[..half]);
        parts.push(&c[c.len() - half..]);
    }
    let n = half as f64;
    let means: Vec<f64> = parts.iter().map(|p| mean(p)).collect();
    let w = parts.iter().map(|p| sample_var(p)).sum::<f64>() / parts.len() as f64;
    let b = n * sample_var(&means);
    if !(w > 0.0) {
        return f64::NAN;
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

fn autocovariance(x: &[f64], m: f64, lag: usize) -> f64 {
    let n = x.len();
    x[..n - lag]
        .iter()
        .zip(&x[lag..])
        .map(|(a, b)| (a - m) * (b - m))
        .sum::<f64>()
        / n as f64
}

/// Multi-chain effective sample size with Geyer's initial monotone sequence
/// estimator, capped at the total number of draws. NaN for constant draws.
pub fn effective_sample_size(chains: &[&[f64]]) -> f64 {
    let m_chains = chains.len();
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    if m_chains == 0 || n < 4 {
        return f64::NAN;
    }
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = chains.iter().map(|c| sample_var(c)).sum::<f64>() / m_chains as f64;
    let nf = n as f64;
    let b_over_n = if m_chains > 1 { sample_var(&means) } else { 0.0 };
    let var_plus = (nf - 1.0) / nf * w + b_over_n;
    if !(var_plus > 0.0) {
        return f64::NAN;
    }
    let rho = |lag: usize| -> f64 {
        let mean_acov = chains
            .iter()
            .zip(&means)
            .map(|(c, m)| autocovariance(c, *m, lag))
            .sum::<f64>()
            / m_chains as f64;
        1.0 - (w - mean_acov) / var_plus
    };
    let mut rho_hat = vec![1.0, rho(1)];
    let mut t = 0;
    let mut even = 1.0;
    let mut odd = rho_hat[1];
    while t + 5 < n && even + odd > 0.0 {
        t += 2;
        even = rho(t);
        odd = rho(t + 1);
        if even + odd >= 0.0 {
            rho_hat.push(even);
            rho_hat.push(odd);
        }
    }
    // Enforce a monotone sequence of pair sums.
    let mut k = 2;
    while k + 1 < rho_hat.len() {
        let prev = rho_hat[k - 2] + rho_hat[k - 1];
        if rho_hat[k] + rho_hat[k + 1] > prev {
            rho_hat[k] = prev / 2.0;
            rho_hat[k + 1] = prev / 2.0;
        }
        k += 2;
    }
    let tau = -1.0 + 2.0 * rho_hat.iter().sum::<f64>();
    let total = (m_chains * n) as f64;
    (total / tau.max(1.0 / total.log10())).min(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::PriorOnly;

    #[test]
    fn flat_target_moves_linearly() {
        let q0 = [1.0, -2.0];
        let m0 = [0.5, 0.25];
        let s = leapfrog(&q0, &m0, 0.1, 7, |x| (0.0, vec![0.0; x.len()])).unwrap();
        assert!((s.position[0] - (1.0 + 7.0 * 0.1 * 0.5)).abs() < 1e-14);
        assert!((s.position[1] - (-2.0 + 7.0 * 0.1 * 0.25)).abs() < 1e-14);
        assert_eq!(s.momentum, m0.to_vec());
    }

    #[test]
    fn non_finite_gradient_is_a_divergence() {
        let r = leapfrog(&[0.0], &[1.0], 0.5, 5, |x| {
            if x[0] > 1.0 {
                (f64::NAN, vec![f64::NAN])
            } else {
                (0.0, vec![0.0])
            }
        });
        assert_eq!(r, Err(Divergence { step: 3 }));
    }

    #[test]
    fn dual_averaging_direction() {
        let mut up = DualAveraging::new(0.1, 0.8);
        let mut down = DualAveraging::new(0.1, 0.8);
        let ups: Vec<f64> = (0..50).map(|_| up.update(1.0)).collect();
        let downs: Vec<f64> = (0..50).map(|_| down.update(0.0)).collect();
        assert!(ups.windows(2).all(|w| w[1] > w[0]));
        assert!(downs.windows(2).all(|w| w[1] < w[0]));
        assert!(adapt_step_size(0.1, 0.8, &[1.0; 20]) > adapt_step_size(0.1, 0.8, &[1.0; 10]));
    }

    #[test]
    fn options_are_validated() {
        let target = PriorOnly { dim: 2, sd: 1.0 };
        let bad = HmcOptions {
            iters: 10,
            burnin: 10,
            ..HmcOptions::default()
        };
        assert!(sample(&target, &bad, 0).is_err());
    }

    #[test]
    fn stores_the_requested_number_of_draws() {
        let target = PriorOnly { dim: 3, sd: 1.0 };
        let opts = HmcOptions {
            iters: 300,
            burnin: 100,
            thin: 5,
            n_leapfrog: 5,
            ..HmcOptions::default()
        };
        let d = sample(&target, &opts, 0).unwrap();
        assert_eq!(d.samples.len(), 40);
        assert!((0.0..=1.0).contains(&d.accept_rate));
        for (s, lp) in d.samples.iter().zip(&d.log_densities) {
            assert_eq!(target.log_density(s), *lp);
        }
    }

    #[test]
    fn rhat_of_constant_chains_is_nan() {
        let c = vec![1.0; 100];
        assert!(split_rhat(&[&c, &c]).is_nan());
        assert!(effective_sample_size(&[&c]).is_nan());
    }
}
