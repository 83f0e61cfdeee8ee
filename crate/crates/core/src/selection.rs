//! Deviance and the deviance information criterion.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmc::Chain;
use crate::model::{build_interaction_matrix, log_likelihood, Dataset, InteractionMode, ModelConfig, ParameterSet};
use crate::posterior::{BlockKind, Posterior};

/// `D(θ) = −2 log p(y | θ)`, including the `log y!` terms.
pub fn deviance(params: &ParameterSet, config: &ModelConfig, data: &Dataset) -> Result<f64> {
    Ok(-2.0 * log_likelihood(params, config, data)?)
}

/// Plug-in point `θ̄` at which `D(θ̄)` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlugIn {
    /// Coordinate-wise mean of the (aligned) samples.
    #[default]
    MeanParams,
    /// Mean interaction matrix together with the means of the other blocks.
    /// Needs no alignment.
    MeanInteraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DicResult {
    pub dic: f64,
    pub p_d: f64,
    pub d_bar: f64,
    pub d_at_mean: f64,
    pub plug_in: PlugIn,
    pub samples: usize,
    /// `p_D < 0`, usually a sign of poor mixing or a skewed posterior.
    pub negative_p_d: bool,
}

/// `DIC = 2 D̄ − D(θ̄)` with `p_D = D̄ − D(θ̄)`.
///
/// With [`PlugIn::MeanParams`], chains carrying latent positions must be
/// aligned first, since averaging unaligned positions mixes rotated copies.
pub fn dic(chain: &Chain, data: &Dataset, plug_in: PlugIn) -> Result<DicResult> {
    if chain.is_empty() {
        return Err(Error::Precondition("DIC needs at least one sample".into()));
    }
    let has_latent = !chain.layout.range(BlockKind::Latent).is_empty();
    if plug_in == PlugIn::MeanParams && has_latent && !chain.aligned {
        return Err(Error::Refused(
            "the DIC plug-in point averages latent positions, which is only meaningful \
             after Procrustes alignment; align the chain first"
                .into(),
        ));
    }
    let posterior = Posterior::new(&chain.config, data)?;
    if posterior.layout() != &chain.layout {
        return Err(Error::shape("chain layout does not match the model for this dataset"));
    }
    let deviances: Vec<f64> = chain
        .samples
        .par_iter()
        .map(|theta| -2.0 * posterior.log_likelihood(theta))
        .collect();
    if let Some(k) = deviances.iter().position(|d| !d.is_finite()) {
        return Err(Error::numeric(format!("deviance of sample {k} is not finite")));
    }
    let d_bar = deviances.iter().sum::<f64>() / deviances.len() as f64;
    let identical = chain.samples.iter().all(|s| s == &chain.samples[0]);
    let d_at_mean = if identical {
        deviances[0]
    } else {
        match plug_in {
            PlugIn::MeanParams => -2.0 * posterior.log_likelihood(&chain.mean()?),
            PlugIn::MeanInteraction => {
                let (params, config) = mean_interaction_point(chain)?;
                deviance(&params, &config, data)?
            }
        }
    };
    let (d_bar, p_d) = if identical { (d_at_mean, 0.0) } else { (d_bar, d_bar - d_at_mean) };
    if p_d < 0.0 {
        log::warn!("negative effective number of parameters (p_D = {p_d:.3})");
    }
    Ok(DicResult {
        dic: d_at_mean + 2.0 * p_d,
        p_d,
        d_bar,
        d_at_mean,
        plug_in,
        samples: chain.len(),
        negative_p_d: p_d < 0.0,
    })
}

/// Full-matrix parameter set holding the mean interaction matrix and the
/// mean scalar blocks.
fn mean_interaction_point(chain: &Chain) -> Result<(ParameterSet, ModelConfig)> {
    let sets = chain.parameter_sets()?;
    let n = chain.layout.n_nodes;
    let k = sets.len() as f64;
    let mut b = Array2::<f64>::zeros((n, n));
    for p in &sets {
        b += &build_interaction_matrix(p, &chain.config)?;
    }
    b /= k;
    let mean_of = |f: fn(&ParameterSet) -> &Vec<f64>| -> Vec<f64> {
        let len = f(&sets[0]).len();
        (0..len)
            .map(|i| sets.iter().map(|p| f(p)[i]).sum::<f64>() / k)
            .collect()
    };
    let params = ParameterSet {
        alpha: mean_of(|p| &p.alpha),
        beta: Vec::new(),
        latent: None,
        eta: mean_of(|p| &p.eta),
        delta: mean_of(|p| &p.delta),
        full_b: Some(b),
    };
    let config = ModelConfig {
        interaction_mode: InteractionMode::FullMatrix,
        ..chain.config.clone()
    };
    Ok((params, config))
}
