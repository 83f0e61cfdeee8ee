//! Maximum-a-posteriori estimation with L-BFGS on the negative log-posterior.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, ModelConfig, ParameterSet};
use crate::optim::{self, LbfgsOptions, Termination};
use crate::posterior::{BlockKind, FlatLayout, Posterior};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapOptions {
    pub lbfgs: LbfgsOptions,
    /// Independent random starts when no initial point is given; the best
    /// optimum is kept.
    pub n_starts: usize,
    pub seed: u64,
    /// Standard deviation of the random initial latent coordinates.
    pub init_latent_sd: f64,
}

impl Default for MapOptions {
    fn default() -> Self {
        MapOptions {
            lbfgs: LbfgsOptions::default(),
            n_starts: 5,
            seed: 0,
            init_latent_sd: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapFit {
    pub params: ParameterSet,
    /// The optimum as a flat vector (posterior layout).
    pub flat: Vec<f64>,
    pub log_posterior: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `max |∂ log p / ∂θ|` at the optimum.
    pub gradient_norm: f64,
    pub termination: Termination,
    /// Which start produced the returned optimum.
    pub start: usize,
    /// Log-posterior after every accepted step of the winning start.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

/// Default starting point: zeros everywhere except the latent coordinates,
/// which are drawn Normal(0, sd²). Exact zeros are a saddle in Z.
pub fn default_init(layout: &FlatLayout, seed: u64, start: usize, latent_sd: f64) -> Vec<f64> {
    let mut theta = vec![0.0; layout.dim()];
    let mut rng = rng::stream(seed, start as u64);
    for idx in layout.range(BlockKind::Latent) {
        theta[idx] = latent_sd * rng::standard_normal(&mut rng);
    }
    theta
}

/// MAP fit of `config` to `data`. With `init`, a single run starts there;
/// otherwise `options.n_starts` random starts run and the best is kept.
pub fn fit_map(
    data: &Dataset,
    config: &ModelConfig,
    init: Option<&[f64]>,
    options: &MapOptions,
) -> Result<MapFit> {
    let posterior = Posterior::new(config, data)?;
    fit_posterior(&posterior, init, options)
}

pub fn fit_posterior(
    posterior: &Posterior,
    init: Option<&[f64]>,
    options: &MapOptions,
) -> Result<MapFit> {
    let layout = posterior.layout();
    let starts: Vec<Vec<f64>> = match init {
        Some(theta) => {
            if theta.len() != layout.dim() {
                return Err(Error::shape(format!(
                    "initial point has {} entries, model has {}",
                    theta.len(),
                    layout.dim()
                )));
            }
            vec![theta.to_vec()]
        }
        None => {
            // Random starts only differ in Z; models without Z need one.
            let n = if layout.range(BlockKind::Latent).is_empty() {
                1
            } else {
                options.n_starts.max(1)
            };
            (0..n)
                .map(|s| default_init(layout, options.seed, s, options.init_latent_sd))
                .collect()
        }
    };
    let runs: Vec<Result<optim::LbfgsResult>> = starts
        .par_iter()
        .map(|x0| {
            optim::minimize(
                |theta| {
                    let (f, g) = posterior.log_posterior_and_grad(theta);
                    (-f, g.into_iter().map(|v| -v).collect())
                },
                x0,
                &options.lbfgs,
            )
        })
        .collect();

    let mut best: Option<(usize, optim::LbfgsResult)> = None;
    let mut first_err = None;
    for (i, run) in runs.into_iter().enumerate() {
        match run {
            Ok(r) => {
                let better = best.as_ref().is_none_or(|(_, b)| r.f < b.f);
                if better {
                    best = Some((i, r));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let (start, r) = match best {
        Some(b) => b,
        None => return Err(first_err.expect("at least one start")),
    };
    if !r.converged() {
        log::warn!(
            "MAP optimisation stopped without converging ({:?}, max|g| = {:.3e})",
            r.termination,
            r.grad_max_abs()
        );
    }
    Ok(MapFit {
        params: posterior.unpack(&r.x)?,
        log_posterior: -r.f,
        iterations: r.iterations,
        converged: r.converged(),
        gradient_norm: r.grad_max_abs(),
        termination: r.termination.clone(),
        start,
        trace: r.f_history.iter().map(|f| -f).collect(),
        flat: r.x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CountPanel;

    #[test]
    fn default_init_only_touches_latent_block() {
        let layout = FlatLayout::new(&ModelConfig::default(), 4);
        let theta = default_init(&layout, 9, 0, 0.1);
        let z = layout.range(BlockKind::Latent);
        assert!(theta[..z.start].iter().all(|v| *v == 0.0));
        assert!(theta[z].iter().all(|v| *v != 0.0));
        assert_eq!(theta, default_init(&layout, 9, 0, 0.1));
        assert_ne!(theta, default_init(&layout, 9, 1, 0.1));
    }

    #[test]
    fn wrong_init_length() {
        let data = Dataset::new(
            CountPanel::from_time_rows(&[vec![1], vec![2], vec![3]], vec!["a".into()]).unwrap(),
            None,
        )
        .unwrap();
        let r = fit_map(&data, &ModelConfig::default(), Some(&[0.0]), &MapOptions::default());
        assert!(matches!(r, Err(Error::Shape(_))));
    }
}
