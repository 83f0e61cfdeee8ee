//! Ground-truth parameters and simulated panels.
//!
//! Parameters follow the simulation-study generator: `α ~ U(0, 3)`,
//! `β_i ~ U(-1, 1)`, `z_ik ~ N(0, σ²)` with `σ² = 0.01`. Latent positions
//! are then pushed outwards by repeated multiplication until the next
//! multiplication would make the interaction matrix non-stationary.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    baseline, build_interaction_matrix, CountPanel, CovariateMatrix, Dataset, InteractionMode,
    ModelConfig, ParameterSet,
};
use crate::rng;
use crate::stability::spectral_radius;

/// Variance of the initial latent coordinates.
pub const DEFAULT_LATENT_VARIANCE: f64 = 0.01;
pub const DEFAULT_EXPANSION_FACTOR: f64 = 1.05;
pub const MAX_EXPANSIONS: usize = 500;
/// Simulated intensities above `exp(MAX_LOG_INTENSITY)` (about 4.3e15, where
/// counts stop being exactly representable as f64) are treated as overflow.
pub const MAX_LOG_INTENSITY: f64 = 36.0;

/// Draws ground-truth parameters for `n_nodes` nodes.
///
/// Intercepts (shared or per node) are U(0, 3), autoregressive coefficients
/// U(-1, 1), latent coordinates N(0, `latent_variance`). Seasonal and
/// covariate coefficients are set to zero. Draw order: α, β, Z row-major.
pub fn draw_parameters(
    n_nodes: usize,
    seed: u64,
    config: &ModelConfig,
    latent_variance: f64,
) -> Result<ParameterSet> {
    if n_nodes == 0 {
        return Err(Error::Precondition("n_nodes must be at least 1".into()));
    }
    if config.interaction_mode != InteractionMode::LatentProjection {
        return Err(Error::config(
            "ground-truth generation is defined for latent-projection models",
        ));
    }
    if !(latent_variance >= 0.0 && latent_variance.is_finite()) {
        return Err(Error::Precondition(format!(
            "latent variance must be non-negative, got {latent_variance}"
        )));
    }
    config.validate()?;
    let mut rng = rng::seeded(seed);
    let alpha = (0..config.alpha_len(n_nodes))
        .map(|_| rng.random_range(0.0..3.0))
        .collect();
    let beta = (0..config.beta_len(n_nodes))
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let sd = latent_variance.sqrt();
    let latent = (0..n_nodes)
        .map(|_| {
            let a = sd * rng::standard_normal(&mut rng);
            let b = sd * rng::standard_normal(&mut rng);
            [a, b]
        })
        .collect();
    Ok(ParameterSet {
        alpha,
        beta,
        latent: Some(latent),
        eta: vec![0.0; config.eta_len(n_nodes)],
        delta: vec![0.0; config.covariate_names.len()],
        full_b: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub params: ParameterSet,
    /// Number of multiplications applied to the input positions.
    pub multiplications: usize,
    /// True when no expansion within [`MAX_EXPANSIONS`] destabilised the
    /// matrix; the input is then returned unchanged.
    pub saturated: bool,
    pub spectral_radius: f64,
}

/// Multiplies the latent positions by `factor` until the interaction matrix
/// would lose `ρ(B) < 1`, and returns the last stationary configuration.
pub fn expand_latent_space(
    params: &ParameterSet,
    factor: f64,
    config: &ModelConfig,
) -> Result<Expansion> {
    if !(factor > 1.0 && factor.is_finite()) {
        return Err(Error::Precondition(format!(
            "expansion factor must be > 1, got {factor}"
        )));
    }
    let rho0 = spectral_radius(&build_interaction_matrix(params, config)?)?;
    if rho0 >= 1.0 {
        return Err(Error::Precondition(format!(
            "initial interaction matrix is not stationary (spectral radius {rho0})"
        )));
    }
    let mut current = params.clone();
    let mut rho = rho0;
    for m in 1..=MAX_EXPANSIONS {
        let mut candidate = current.clone();
        for z in candidate.latent.as_mut().expect("latent model").iter_mut() {
            z[0] *= factor;
            z[1] *= factor;
        }
        let next_rho = spectral_radius(&build_interaction_matrix(&candidate, config)?)?;
        if next_rho >= 1.0 {
            return Ok(Expansion {
                params: current,
                multiplications: m - 1,
                saturated: false,
                spectral_radius: rho,
            });
        }
        current = candidate;
        rho = next_rho;
    }
    Ok(Expansion {
        params: params.clone(),
        multiplications: 0,
        saturated: true,
        spectral_radius: rho0,
    })
}

/// Simulates `n_times` observations.
///
/// The first `max(1, seasonal_lag)` observations are seeds drawn as
/// Poisson(exp(α_i + Σ_k δ_k x_ik)), the no-history intensity; later ones follow
/// the model recursion. Node labels default to `node_1 .. node_N`.
pub fn simulate_panel(
    params: &ParameterSet,
    config: &ModelConfig,
    n_times: usize,
    seed: u64,
    covariates: Option<&CovariateMatrix>,
) -> Result<CountPanel> {
    let n = params.n_nodes();
    params.validate(config, n)?;
    if n_times < 2 {
        return Err(Error::Precondition(format!("need T >= 2, got {n_times}")));
    }
    let b = build_interaction_matrix(params, config)?;
    let rho = spectral_radius(&b)?;
    if rho >= 1.0 {
        log::warn!("simulating from a non-stationary interaction matrix (spectral radius {rho})");
    }
    let empty = CovariateMatrix::empty(n);
    let cov = covariates.unwrap_or(&empty);
    let probe = Dataset::new(
        CountPanel::new(Array2::zeros((n, 2)), CountPanel::default_labels(n))?,
        Some(cov.clone()),
    )?;
    let x = probe.selected_covariates(config)?;
    let base = baseline(params, &x);

    let mut rng = rng::seeded(seed);
    let mut counts = Array2::<u64>::zeros((n, n_times));
    let mut logs = Array2::<f64>::zeros((n, n_times));
    let t0 = config.first_index().min(n_times);
    for t in 0..t0 {
        for i in 0..n {
            let y = draw(&mut rng, base[i], i, t)?;
            counts[[i, t]] = y;
            logs[[i, t]] = (y as f64).ln_1p();
        }
    }
    let lag = config.seasonal_lag;
    for t in t0..n_times {
        for i in 0..n {
            let mut v = base[i];
            for j in 0..n {
                v += b[[i, j]] * logs[[j, t - 1]];
            }
            if config.is_seasonal() {
                v += params.eta_at(i) * logs[[i, t - lag]];
            }
            let y = draw(&mut rng, v, i, t)?;
            counts[[i, t]] = y;
            logs[[i, t]] = (y as f64).ln_1p();
        }
    }
    CountPanel::new(counts, CountPanel::default_labels(n))
}

fn draw<R: Rng>(rng: &mut R, log_lambda: f64, node: usize, t: usize) -> Result<u64> {
    if !(log_lambda <= MAX_LOG_INTENSITY) {
        return Err(Error::numeric(format!(
            "intensity overflow at t = {t} (node {node}, log intensity {log_lambda:.3})"
        )));
    }
    Ok(rng::poisson(rng, log_lambda.exp()))
}

/// Output of [`generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub params: ParameterSet,
    pub panel: CountPanel,
    pub expansion: Expansion,
}

/// Full generator: draw parameters, expand the latent space, simulate.
/// Parameters use `seed`, the panel a seed derived from it.
pub fn generate(
    n_nodes: usize,
    n_times: usize,
    seed: u64,
    config: &ModelConfig,
    latent_variance: f64,
    factor: f64,
) -> Result<Synthetic> {
    let drawn = draw_parameters(n_nodes, seed, config, latent_variance)?;
    generate_from(drawn, n_times, seed, config, factor)
}

fn generate_from(
    drawn: ParameterSet,
    n_times: usize,
    seed: u64,
    config: &ModelConfig,
    factor: f64,
) -> Result<Synthetic> {
    let expansion = expand_latent_space(&drawn, factor, config)?;
    let panel = simulate_panel(&expansion.params, config, n_times, seed.wrapping_add(0x9E37_79B9_7F4A_7C15), None)?;
    Ok(Synthetic {
        params: expansion.params.clone(),
        panel,
        expansion,
    })
}

/// Like [`generate`], but retries with derived seeds when the drawn
/// parameters are already non-stationary (possible when some |β_i| is close
/// to 1) or the simulated intensities overflow. Returns the seed that
/// succeeded.
pub fn generate_stable(
    n_nodes: usize,
    n_times: usize,
    seed: u64,
    config: &ModelConfig,
    latent_variance: f64,
    factor: f64,
    max_attempts: usize,
) -> Result<(u64, Synthetic)> {
    let mut last = None;
    for attempt in 0..max_attempts.max(1) as u64 {
        let s = if attempt == 0 {
            seed
        } else {
            seed.wrapping_mul(1_000_003).wrapping_add(attempt)
        };
        let drawn = draw_parameters(n_nodes, s, config, latent_variance)?;
        let rho = spectral_radius(&build_interaction_matrix(&drawn, config)?)?;
        if rho >= 1.0 {
            last = Some(Error::numeric(format!(
                "drawn parameters are not stationary (spectral radius {rho})"
            )));
            continue;
        }
        match generate_from(drawn, n_times, s, config, factor) {
            Ok(sim) => return Ok((s, sim)),
            Err(e @ Error::Numeric(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}
