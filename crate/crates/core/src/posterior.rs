//! Flat parameter layout, Gaussian priors and the unnormalised log-posterior
//! with its analytic gradient.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::model::{Dataset, InteractionMode, ModelConfig, ParameterSet, LATENT_DIM};

/// Standard deviation of the independent Normal(0, sd²) prior placed on
/// every scalar parameter.
pub const PRIOR_SD: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Alpha,
    Beta,
    /// Latent positions, row-major N×2.
    Latent,
    /// Full interaction matrix, row-major N×N.
    Interaction,
    Eta,
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub kind: BlockKind,
    pub offset: usize,
    pub len: usize,
}

/// Where each parameter block lives in the flat coordinate vector.
/// Order: α, β, Z (row-major), η, δ; full-matrix models put the row-major
/// N×N matrix where β and Z would be.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlatLayout {
    pub n_nodes: usize,
    pub blocks: Vec<Block>,
}

impl FlatLayout {
    pub fn new(config: &ModelConfig, n_nodes: usize) -> Self {
        let mut sizes = vec![(BlockKind::Alpha, config.alpha_len(n_nodes))];
        match config.interaction_mode {
            InteractionMode::LatentProjection => {
                sizes.push((BlockKind::Beta, config.beta_len(n_nodes)));
                sizes.push((BlockKind::Latent, n_nodes * LATENT_DIM));
            }
            InteractionMode::FullMatrix => {
                sizes.push((BlockKind::Interaction, n_nodes * n_nodes));
            }
        }
        sizes.push((BlockKind::Eta, config.eta_len(n_nodes)));
        sizes.push((BlockKind::Delta, config.covariate_names.len()));
        let mut offset = 0;
        let blocks = sizes
            .into_iter()
            .map(|(kind, len)| {
                let b = Block { kind, offset, len };
                offset += len;
                b
            })
            .collect();
        FlatLayout { n_nodes, blocks }
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.len).sum()
    }

    pub fn block(&self, kind: BlockKind) -> Option<&Block> {
        self.blocks.iter().find(|b| b.kind == kind)
    }

    /// Index range of a block; empty when the block is absent.
    pub fn range(&self, kind: BlockKind) -> std::ops::Range<usize> {
        self.block(kind)
            .map(|b| b.offset..b.offset + b.len)
            .unwrap_or(0..0)
    }

    /// Human-readable name of every coordinate, e.g. `beta[3]`, `z[2,1]`.
    pub fn coordinate_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.dim());
        for b in &self.blocks {
            for k in 0..b.len {
                names.push(match b.kind {
                    BlockKind::Alpha if b.len == 1 => "alpha".to_string(),
                    BlockKind::Alpha => format!("alpha[{}]", k + 1),
                    BlockKind::Beta if b.len == 1 => "beta".to_string(),
                    BlockKind::Beta => format!("beta[{}]", k + 1),
                    BlockKind::Latent => format!("z[{},{}]", k / LATENT_DIM + 1, k % LATENT_DIM + 1),
                    BlockKind::Interaction => {
                        format!("b[{},{}]", k / self.n_nodes + 1, k % self.n_nodes + 1)
                    }
                    BlockKind::Eta if b.len == 1 => "eta".to_string(),
                    BlockKind::Eta => format!("eta[{}]", k + 1),
                    BlockKind::Delta => format!("delta[{}]", k + 1),
                });
            }
        }
        names
    }
}

/// A point in the flat coordinate space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatParams {
    pub values: Vec<f64>,
    pub layout: FlatLayout,
}

pub fn pack(params: &ParameterSet, config: &ModelConfig) -> Result<FlatParams> {
    let n = params.n_nodes();
    params.validate(config, n)?;
    let layout = FlatLayout::new(config, n);
    let mut values = Vec::with_capacity(layout.dim());
    values.extend_from_slice(&params.alpha);
    match config.interaction_mode {
        InteractionMode::LatentProjection => {
            values.extend_from_slice(&params.beta);
            values.extend(params.latent.iter().flatten().flatten());
        }
        InteractionMode::FullMatrix => {
            values.extend(params.full_b.iter().flat_map(|b| b.iter()));
        }
    }
    values.extend_from_slice(&params.eta);
    values.extend_from_slice(&params.delta);
    debug_assert_eq!(values.len(), layout.dim());
    Ok(FlatParams { values, layout })
}

pub fn unpack(values: &[f64], layout: &FlatLayout, config: &ModelConfig) -> Result<ParameterSet> {
    let expected = FlatLayout::new(config, layout.n_nodes);
    if &expected != layout {
        return Err(Error::shape("flat layout does not match the model configuration"));
    }
    if values.len() != layout.dim() {
        return Err(Error::shape(format!(
            "flat vector has {} entries, layout requires {}",
            values.len(),
            layout.dim()
        )));
    }
    let n = layout.n_nodes;
    let get = |kind| values[layout.range(kind)].to_vec();
    let (latent, full_b) = match config.interaction_mode {
        InteractionMode::LatentProjection => (
            Some(
                values[layout.range(BlockKind::Latent)]
                    .chunks_exact(LATENT_DIM)
                    .map(|c| [c[0], c[1]])
                    .collect(),
            ),
            None,
        ),
        InteractionMode::FullMatrix => (
            None,
            Some(
                Array2::from_shape_vec((n, n), get(BlockKind::Interaction))
                    .expect("block length checked"),
            ),
        ),
    };
    Ok(ParameterSet {
        alpha: get(BlockKind::Alpha),
        beta: get(BlockKind::Beta),
        latent,
        eta: get(BlockKind::Eta),
        delta: get(BlockKind::Delta),
        full_b,
    })
}

/// `Σ_k log N(θ_k; 0, sd²)`.
pub fn log_prior_flat(theta: &[f64], sd: f64) -> f64 {
    let norm = -sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
    let inv_var = 1.0 / (sd * sd);
    theta
        .iter()
        .map(|t| norm - 0.5 * t * t * inv_var)
        .sum()
}

/// Log prior of a parameter set under the default Normal(0, 100²) priors.
pub fn log_prior(params: &ParameterSet, config: &ModelConfig) -> Result<f64> {
    Ok(log_prior_flat(&pack(params, config)?.values, PRIOR_SD))
}

/// A differentiable log density over a flat coordinate space.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, theta: &[f64]) -> f64;

    /// Value and gradient. The value may be `-inf` or NaN far from the bulk;
    /// callers treat non-finite values as rejections.
    fn log_density_and_grad(&self, theta: &[f64]) -> (f64, Vec<f64>);
}

/// Independent Normal(0, sd²) density on every coordinate: the posterior of a
/// model with no data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorOnly {
    pub dim: usize,
    pub sd: f64,
}

impl LogDensity for PriorOnly {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        log_prior_flat(theta, self.sd)
    }

    fn log_density_and_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let inv_var = 1.0 / (self.sd * self.sd);
        (
            log_prior_flat(theta, self.sd),
            theta.iter().map(|t| -t * inv_var).collect(),
        )
    }
}

/// Unnormalised log-posterior of a model configuration given a dataset.
#[derive(Debug, Clone)]
pub struct Posterior {
    config: ModelConfig,
    layout: FlatLayout,
    n: usize,
    n_times: usize,
    t0: usize,
    /// `ln(y+1)`, time-major: index `t * n + i`.
    log_hist: Vec<f64>,
    /// Counts as reals, time-major.
    counts: Vec<f64>,
    /// Selected covariates, N×K'.
    covariates: Array2<f64>,
    /// `Σ log(y_it!)` over modelled cells.
    log_factorial: f64,
    prior_sd: f64,
}

impl Posterior {
    pub fn new(config: &ModelConfig, data: &Dataset) -> Result<Self> {
        config.validate_for(data)?;
        let n = data.n_nodes();
        let n_times = data.panel.n_times();
        let t0 = config.first_index();
        let mut log_hist = vec![0.0; n * n_times];
        let mut counts = vec![0.0; n * n_times];
        let mut log_factorial = 0.0;
        for t in 0..n_times {
            for i in 0..n {
                let y = data.panel.count(i, t) as f64;
                counts[t * n + i] = y;
                log_hist[t * n + i] = data.panel.log_counts()[[i, t]];
                if t >= t0 {
                    log_factorial += ln_factorial(data.panel.count(i, t));
                }
            }
        }
        Ok(Posterior {
            config: config.clone(),
            layout: FlatLayout::new(config, n),
            n,
            n_times,
            t0,
            log_hist,
            counts,
            covariates: data.selected_covariates(config)?,
            log_factorial,
            prior_sd: PRIOR_SD,
        })
    }

    /// Replaces the prior standard deviation (default [`PRIOR_SD`]).
    pub fn with_prior_sd(mut self, sd: f64) -> Self {
        self.prior_sd = sd;
        self
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &FlatLayout {
        &self.layout
    }

    pub fn prior_sd(&self) -> f64 {
        self.prior_sd
    }

    pub fn unpack(&self, theta: &[f64]) -> Result<ParameterSet> {
        unpack(theta, &self.layout, &self.config)
    }

    pub fn pack(&self, params: &ParameterSet) -> Result<Vec<f64>> {
        let flat = pack(params, &self.config)?;
        if flat.layout != self.layout {
            return Err(Error::shape("parameter set does not match the posterior layout"));
        }
        Ok(flat.values)
    }

    pub fn log_prior(&self, theta: &[f64]) -> f64 {
        log_prior_flat(theta, self.prior_sd)
    }

    pub fn log_likelihood(&self, theta: &[f64]) -> f64 {
        self.evaluate(theta, None)
    }

    pub fn log_posterior(&self, theta: &[f64]) -> f64 {
        self.log_likelihood(theta) + self.log_prior(theta)
    }

    /// Log-posterior and its gradient.
    pub fn log_posterior_and_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.layout.dim()];
        let ll = self.evaluate(theta, Some(&mut grad));
        let inv_var = 1.0 / (self.prior_sd * self.prior_sd);
        for (g, t) in grad.iter_mut().zip(theta) {
            *g -= t * inv_var;
        }
        (ll + self.log_prior(theta), grad)
    }

    /// Log-likelihood; when `grad` is given, the likelihood gradient is
    /// written into it.
    fn evaluate(&self, theta: &[f64], grad: Option<&mut [f64]>) -> f64 {
        assert_eq!(theta.len(), self.layout.dim(), "flat vector length");
        let n = self.n;
        let lay = &self.layout;
        let bcast = |kind: BlockKind, i: usize| -> f64 {
            let r = lay.range(kind);
            match r.len() {
                0 => 0.0,
                1 => theta[r.start],
                _ => theta[r.start + i],
            }
        };

        // Interaction matrix, row-major.
        let mut b = vec![0.0; n * n];
        match self.config.interaction_mode {
            InteractionMode::LatentProjection => {
                let z = &theta[lay.range(BlockKind::Latent)];
                for i in 0..n {
                    for j in 0..n {
                        b[i * n + j] = if i == j {
                            bcast(BlockKind::Beta, i)
                        } else {
                            z[2 * i] * z[2 * j] + z[2 * i + 1] * z[2 * j + 1]
                        };
                    }
                }
            }
            InteractionMode::FullMatrix => {
                b.copy_from_slice(&theta[lay.range(BlockKind::Interaction)]);
            }
        }
        let delta = &theta[lay.range(BlockKind::Delta)];
        let base: Vec<f64> = (0..n)
            .map(|i| {
                bcast(BlockKind::Alpha, i)
                    + self
                        .covariates
                        .row(i)
                        .iter()
                        .zip(delta)
                        .map(|(x, d)| x * d)
                        .sum::<f64>()
            })
            .collect();
        let seasonal = self.config.is_seasonal();
        let lag = self.config.seasonal_lag;
        let eta: Vec<f64> = (0..n).map(|i| bcast(BlockKind::Eta, i)).collect();

        let want_grad = grad.is_some();
        // g_mat[i][j] = Σ_t r_it u_j,t-1 ; r_sum[i] = Σ_t r_it ; r_seas[i] = Σ_t r_it s_i,t-lag
        let mut g_mat = if want_grad { vec![0.0; n * n] } else { Vec::new() };
        let mut r_sum = vec![0.0; n];
        let mut r_seas = vec![0.0; n];

        let mut ll = 0.0;
        for t in self.t0..self.n_times {
            let prev = &self.log_hist[(t - 1) * n..t * n];
            let y_t = &self.counts[t * n..(t + 1) * n];
            for i in 0..n {
                let row = &b[i * n..(i + 1) * n];
                let mut v = base[i];
                for j in 0..n {
                    v += row[j] * prev[j];
                }
                let s = if seasonal {
                    self.log_hist[(t - lag) * n + i]
                } else {
                    0.0
                };
                v += eta[i] * s;
                let lambda = v.exp();
                ll += y_t[i] * v - lambda;
                if want_grad {
                    let r = y_t[i] - lambda;
                    r_sum[i] += r;
                    r_seas[i] += r * s;
                    let g_row = &mut g_mat[i * n..(i + 1) * n];
                    for j in 0..n {
                        g_row[j] += r * prev[j];
                    }
                }
            }
        }
        ll -= self.log_factorial;

        if let Some(grad) = grad {
            let put = |grad: &mut [f64], kind: BlockKind, per_node: &dyn Fn(usize) -> f64| {
                let r = lay.range(kind);
                if r.len() == 1 {
                    grad[r.start] += (0..n).map(per_node).sum::<f64>();
                } else {
                    for (k, idx) in r.enumerate() {
                        grad[idx] += per_node(k);
                    }
                }
            };
            put(grad, BlockKind::Alpha, &|i| r_sum[i]);
            match self.config.interaction_mode {
                InteractionMode::LatentProjection => {
                    put(grad, BlockKind::Beta, &|i| g_mat[i * n + i]);
                    let zr = lay.range(BlockKind::Latent);
                    let z = &theta[zr.clone()];
                    for i in 0..n {
                        for j in 0..n {
                            if i == j {
                                continue;
                            }
                            let w = g_mat[i * n + j] + g_mat[j * n + i];
                            grad[zr.start + 2 * i] += w * z[2 * j];
                            grad[zr.start + 2 * i + 1] += w * z[2 * j + 1];
                        }
                    }
                }
                InteractionMode::FullMatrix => {
                    let r = lay.range(BlockKind::Interaction);
                    for (g, v) in grad[r].iter_mut().zip(&g_mat) {
                        *g += v;
                    }
                }
            }
            if seasonal {
                put(grad, BlockKind::Eta, &|i| r_seas[i]);
            }
            let dr = lay.range(BlockKind::Delta);
            for (k, idx) in dr.enumerate() {
                grad[idx] += (0..n).map(|i| r_sum[i] * self.covariates[[i, k]]).sum::<f64>();
            }
        }
        ll
    }
}

impl LogDensity for Posterior {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        self.log_posterior(theta)
    }

    fn log_density_and_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        self.log_posterior_and_grad(theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SeasonalMode, Sharing};
    use approx::assert_abs_diff_eq;

    #[test]
    fn parameter_counts() {
        assert_eq!(FlatLayout::new(&ModelConfig::default(), 5).dim(), 16);
        let crime = ModelConfig {
            alpha_mode: Sharing::Shared,
            beta_mode: Sharing::PerNode,
            eta_mode: SeasonalMode::PerNode,
            seasonal_lag: 12,
            covariate_names: vec!["pop".into(), "unemp".into()],
            ..ModelConfig::default()
        };
        assert_eq!(FlatLayout::new(&crime, 5).dim(), 23);
    }

    #[test]
    fn layout_order() {
        let cfg = ModelConfig {
            eta_mode: SeasonalMode::Shared,
            seasonal_lag: 12,
            covariate_names: vec!["a".into()],
            ..ModelConfig::default()
        };
        let lay = FlatLayout::new(&cfg, 3);
        let kinds: Vec<_> = lay.blocks.iter().map(|b| (b.kind, b.offset, b.len)).collect();
        assert_eq!(
            kinds,
            vec![
                (BlockKind::Alpha, 0, 1),
                (BlockKind::Beta, 1, 3),
                (BlockKind::Latent, 4, 6),
                (BlockKind::Eta, 10, 1),
                (BlockKind::Delta, 11, 1)
            ]
        );
        assert_eq!(lay.coordinate_names()[5], "z[1,2]");
    }

    #[test]
    fn unpack_rejects_wrong_length() {
        let cfg = ModelConfig::default();
        let lay = FlatLayout::new(&cfg, 2);
        assert!(matches!(unpack(&[0.0; 3], &lay, &cfg), Err(Error::Shape(_))));
    }

    #[test]
    fn prior_at_zero() {
        let expected = -(100f64).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert_abs_diff_eq!(log_prior_flat(&[0.0], 100.0), expected, epsilon = 1e-15);
        let theta = [3.0, -40.0, 0.5];
        let diff = log_prior_flat(&theta, 100.0) - log_prior_flat(&[0.0; 3], 100.0);
        let want = -theta.iter().map(|t| t * t).sum::<f64>() / (2.0 * 100.0 * 100.0);
        assert_abs_diff_eq!(diff, want, epsilon = 1e-12);
    }

    #[test]
    fn prior_gradient() {
        let p = PriorOnly { dim: 3, sd: 100.0 };
        let (_, g) = p.log_density_and_grad(&[1.0, -2.0, 50.0]);
        assert_eq!(g, vec![-1e-4, 2e-4, -50.0 / 1e4]);
    }
}
