//! Time series latent position models (TSLPM) for multivariate count data.
//!
//! A TSLPM is a Poisson log-linear VAR(1) whose off-diagonal autoregressive
//! coefficients are dot products of two-dimensional latent positions:
//!
//! ```text
//! y_it | past ~ Poisson(λ_it)
//! log λ_it = α_i + Σ_j B_ij log(y_j,t-1 + 1) + η_i log(y_i,t-lag + 1) + Σ_k δ_k x_ik
//! B_ii = β_i,  B_ij = z_i · z_j  (i ≠ j)
//! ```
//!
//! The crate covers simulation, stationarity checks, MAP estimation with
//! L-BFGS, Hamiltonian Monte Carlo, Procrustes alignment of latent
//! positions, forecasting and DIC-based model selection.

pub mod align;
pub mod error;
pub mod forecast;
pub mod hmc;
pub mod map_fit;
pub mod model;
pub mod optim;
pub mod posterior;
pub mod rng;
pub mod selection;
pub mod stability;
pub mod synthesis;

pub use error::{Error, Result};
pub use model::{
    CountPanel, CovariateMatrix, Dataset, InteractionMode, ModelConfig, ParameterSet,
    SeasonalMode, Sharing, LATENT_DIM,
};
