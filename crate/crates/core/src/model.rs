//! Data types, interaction matrices, intensities and the Poisson
//! log-likelihood.

use std::collections::HashSet;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};

/// Dimension of the latent space. Fixed.
pub const LATENT_DIM: usize = 2;

/// Whether a parameter block is one scalar shared by all nodes or one value
/// per node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sharing {
    Shared,
    PerNode,
}

impl Sharing {
    pub fn block_len(self, n_nodes: usize) -> usize {
        match self {
            Sharing::Shared => 1,
            Sharing::PerNode => n_nodes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeasonalMode {
    None,
    Shared,
    PerNode,
}

impl SeasonalMode {
    pub fn block_len(self, n_nodes: usize) -> usize {
        match self {
            SeasonalMode::None => 0,
            SeasonalMode::Shared => 1,
            SeasonalMode::PerNode => n_nodes,
        }
    }
}

/// How the off-diagonal part of the interaction matrix is parameterised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionMode {
    /// `B_ij = z_i · z_j` for `i != j`.
    LatentProjection,
    /// Every entry of `B` is a free parameter (unconstrained log-linear VAR).
    FullMatrix,
}

fn default_latent_dim() -> usize {
    LATENT_DIM
}

fn default_eta_mode() -> SeasonalMode {
    SeasonalMode::None
}

fn default_interaction() -> InteractionMode {
    InteractionMode::LatentProjection
}

/// Structural switches selecting one member of the model family.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelConfig {
    pub alpha_mode: Sharing,
    /// Ignored in [`InteractionMode::FullMatrix`], where the diagonal lives in
    /// the full matrix.
    pub beta_mode: Sharing,
    #[serde(default = "default_eta_mode")]
    pub eta_mode: SeasonalMode,
    #[serde(default)]
    pub seasonal_lag: usize,
    #[serde(default)]
    pub covariate_names: Vec<String>,
    #[serde(default = "default_interaction")]
    pub interaction_mode: InteractionMode,
    #[serde(default = "default_latent_dim")]
    pub latent_dim: usize,
}

impl Default for ModelConfig {
    /// Shared intercept, per-node autoregression, latent interactions, no
    /// seasonality or covariates: the simulation-study model.
    fn default() -> Self {
        ModelConfig {
            alpha_mode: Sharing::Shared,
            beta_mode: Sharing::PerNode,
            eta_mode: SeasonalMode::None,
            seasonal_lag: 0,
            covariate_names: Vec::new(),
            interaction_mode: InteractionMode::LatentProjection,
            latent_dim: LATENT_DIM,
        }
    }
}

impl ModelConfig {
    /// Checks the internal consistency of the switches.
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim != LATENT_DIM {
            return Err(Error::config(format!(
                "latent_dim must be {LATENT_DIM}, got {}",
                self.latent_dim
            )));
        }
        match (self.eta_mode, self.seasonal_lag) {
            (SeasonalMode::None, 0) => {}
            (SeasonalMode::None, lag) => {
                return Err(Error::config(format!(
                    "seasonal_lag = {lag} requires a seasonal eta_mode"
                )))
            }
            (_, 0) => {
                return Err(Error::config(
                    "a seasonal eta_mode requires seasonal_lag > 0",
                ))
            }
            _ => {}
        }
        let mut seen = HashSet::new();
        for name in &self.covariate_names {
            if !seen.insert(name) {
                return Err(Error::config(format!("covariate {name:?} selected twice")));
            }
        }
        Ok(())
    }

    /// Checks the configuration against a dataset.
    pub fn validate_for(&self, data: &Dataset) -> Result<()> {
        self.validate()?;
        for name in &self.covariate_names {
            if data.covariates.column_index(name).is_none() {
                return Err(Error::config(format!(
                    "covariate {name:?} is not among the available covariates {:?}",
                    data.covariates.names
                )));
            }
        }
        let t0 = self.first_index();
        if data.panel.n_times() <= t0 {
            return Err(Error::config(format!(
                "panel has {} time points but the first modelled index is {t0}",
                data.panel.n_times()
            )));
        }
        Ok(())
    }

    /// First time index entering the likelihood. Earlier observations are
    /// conditioned on as regressors only.
    pub fn first_index(&self) -> usize {
        self.seasonal_lag.max(1)
    }

    pub fn is_seasonal(&self) -> bool {
        self.eta_mode != SeasonalMode::None
    }

    pub fn alpha_len(&self, n_nodes: usize) -> usize {
        self.alpha_mode.block_len(n_nodes)
    }

    pub fn beta_len(&self, n_nodes: usize) -> usize {
        match self.interaction_mode {
            InteractionMode::LatentProjection => self.beta_mode.block_len(n_nodes),
            InteractionMode::FullMatrix => 0,
        }
    }

    pub fn eta_len(&self, n_nodes: usize) -> usize {
        self.eta_mode.block_len(n_nodes)
    }
}

/// Observed counts `y_it`, stored node-major (N×T), with node labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CountPanel {
    counts: Array2<u64>,
    labels: Vec<String>,
    log_counts: Array2<f64>,
}

impl CountPanel {
    /// `counts` is N×T (one row per node).
    pub fn new(counts: Array2<u64>, labels: Vec<String>) -> Result<Self> {
        let (n, t) = counts.dim();
        if n == 0 {
            return Err(Error::Data("panel needs at least one node".into()));
        }
        if t < 2 {
            return Err(Error::Data(format!(
                "panel needs at least two time points, got {t}"
            )));
        }
        if labels.len() != n {
            return Err(Error::shape(format!(
                "{} labels for {n} nodes",
                labels.len()
            )));
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::Data(format!("duplicate node label {label:?}")));
            }
        }
        let log_counts = counts.mapv(|y| (y as f64).ln_1p());
        Ok(CountPanel {
            counts,
            labels,
            log_counts,
        })
    }

    /// Builds a panel from time-major rows (one row per time point), as read
    /// from a CSV file.
    pub fn from_time_rows(rows: &[Vec<u64>], labels: Vec<String>) -> Result<Self> {
        let n = labels.len();
        let mut counts = Array2::zeros((n, rows.len()));
        for (t, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::shape(format!(
                    "time row {t} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (i, &y) in row.iter().enumerate() {
                counts[[i, t]] = y;
            }
        }
        CountPanel::new(counts, labels)
    }

    /// Default labels `node_1 .. node_N`.
    pub fn default_labels(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("node_{i}")).collect()
    }

    pub fn n_nodes(&self) -> usize {
        self.counts.nrows()
    }

    pub fn n_times(&self) -> usize {
        self.counts.ncols()
    }

    pub fn counts(&self) -> &Array2<u64> {
        &self.counts
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn count(&self, node: usize, t: usize) -> u64 {
        self.counts[[node, t]]
    }

    /// `ln(y + 1)` for every cell.
    pub fn log_counts(&self) -> &Array2<f64> {
        &self.log_counts
    }

    /// Counts of all nodes at time `t`.
    pub fn at(&self, t: usize) -> ArrayView1<'_, u64> {
        self.counts.column(t)
    }

    /// Sub-panel of the first `len` time points.
    pub fn head(&self, len: usize) -> Result<Self> {
        if len > self.n_times() {
            return Err(Error::Index(format!(
                "head({len}) of a panel with {} time points",
                self.n_times()
            )));
        }
        CountPanel::new(
            self.counts.slice(ndarray::s![.., ..len]).to_owned(),
            self.labels.clone(),
        )
    }
}

/// Node-level covariates `x_ik` (N×K), standardised per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateMatrix {
    pub values: Array2<f64>,
    pub names: Vec<String>,
}

impl CovariateMatrix {
    /// Wraps already-standardised values.
    pub fn new(values: Array2<f64>, names: Vec<String>) -> Result<Self> {
        if values.ncols() != names.len() {
            return Err(Error::shape(format!(
                "{} covariate names for {} columns",
                names.len(),
                values.ncols()
            )));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Data(format!("duplicate covariate name {name:?}")));
            }
        }
        if let Some(((i, k), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Data(format!(
                "covariate {:?} of node {i} is not finite ({v})",
                names[k]
            )));
        }
        Ok(CovariateMatrix { values, names })
    }

    /// Centres each column to zero mean and scales it to unit (population)
    /// variance across nodes.
    pub fn standardized(raw: Array2<f64>, names: Vec<String>) -> Result<Self> {
        let checked = CovariateMatrix::new(raw, names)?;
        let mut values = checked.values;
        let n = values.nrows() as f64;
        for (k, mut col) in values.columns_mut().into_iter().enumerate() {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            if !(var > 0.0) {
                return Err(Error::Data(format!(
                    "covariate {:?} is constant across nodes and cannot be standardised",
                    checked.names[k]
                )));
            }
            let sd = var.sqrt();
            col.mapv_inplace(|v| (v - mean) / sd);
        }
        Ok(CovariateMatrix {
            values,
            names: checked.names,
        })
    }

    /// No covariates for `n_nodes` nodes.
    pub fn empty(n_nodes: usize) -> Self {
        CovariateMatrix {
            values: Array2::zeros((n_nodes, 0)),
            names: Vec::new(),
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Counts plus covariates: everything a fit conditions on.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub panel: CountPanel,
    pub covariates: CovariateMatrix,
}

impl Dataset {
    pub fn new(panel: CountPanel, covariates: Option<CovariateMatrix>) -> Result<Self> {
        let covariates = covariates.unwrap_or_else(|| CovariateMatrix::empty(panel.n_nodes()));
        if covariates.values.nrows() != panel.n_nodes() {
            return Err(Error::shape(format!(
                "covariates have {} rows for {} nodes",
                covariates.values.nrows(),
                panel.n_nodes()
            )));
        }
        Ok(Dataset { panel, covariates })
    }

    pub fn n_nodes(&self) -> usize {
        self.panel.n_nodes()
    }

    /// Columns of the covariate matrix selected by `config`, N×K'.
    pub fn selected_covariates(&self, config: &ModelConfig) -> Result<Array2<f64>> {
        let n = self.n_nodes();
        let mut out = Array2::zeros((n, config.covariate_names.len()));
        for (k, name) in config.covariate_names.iter().enumerate() {
            let col = self.covariates.column_index(name).ok_or_else(|| {
                Error::config(format!("covariate {name:?} is not available"))
            })?;
            out.column_mut(k).assign(&self.covariates.values.column(col));
        }
        Ok(out)
    }

    /// Replaces the panel, keeping covariates.
    pub fn with_panel(&self, panel: CountPanel) -> Result<Self> {
        Dataset::new(panel, Some(self.covariates.clone()))
    }
}

/// Model parameters. Block shapes follow a [`ModelConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    /// Length 1 (shared) or N.
    pub alpha: Vec<f64>,
    /// Length 1 or N; empty in full-matrix mode.
    pub beta: Vec<f64>,
    /// Latent positions, one row per node; `None` in full-matrix mode.
    pub latent: Option<Vec<[f64; LATENT_DIM]>>,
    /// Empty, length 1 or N.
    #[serde(default)]
    pub eta: Vec<f64>,
    /// One coefficient per selected covariate.
    #[serde(default)]
    pub delta: Vec<f64>,
    /// Complete N×N interaction matrix; only in full-matrix mode.
    #[serde(default)]
    pub full_b: Option<Array2<f64>>,
}

impl ParameterSet {
    /// All-zero parameters shaped for `config` with `n_nodes` nodes.
    pub fn zeros(config: &ModelConfig, n_nodes: usize) -> Self {
        let (latent, full_b) = match config.interaction_mode {
            InteractionMode::LatentProjection => (Some(vec![[0.0; LATENT_DIM]; n_nodes]), None),
            InteractionMode::FullMatrix => (None, Some(Array2::zeros((n_nodes, n_nodes)))),
        };
        ParameterSet {
            alpha: vec![0.0; config.alpha_len(n_nodes)],
            beta: vec![0.0; config.beta_len(n_nodes)],
            latent,
            eta: vec![0.0; config.eta_len(n_nodes)],
            delta: vec![0.0; config.covariate_names.len()],
            full_b,
        }
    }

    /// Number of nodes implied by the interaction block.
    pub fn n_nodes(&self) -> usize {
        match (&self.latent, &self.full_b) {
            (Some(z), _) => z.len(),
            (None, Some(b)) => b.nrows(),
            (None, None) => 0,
        }
    }

    /// Checks block shapes against `config` and that every entry is finite.
    pub fn validate(&self, config: &ModelConfig, n_nodes: usize) -> Result<()> {
        config.validate()?;
        let check = |name: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(Error::config(format!(
                    "{name} block has length {got}, configuration requires {want}"
                )))
            }
        };
        check("alpha", self.alpha.len(), config.alpha_len(n_nodes))?;
        check("beta", self.beta.len(), config.beta_len(n_nodes))?;
        check("eta", self.eta.len(), config.eta_len(n_nodes))?;
        check("delta", self.delta.len(), config.covariate_names.len())?;
        match (config.interaction_mode, &self.latent, &self.full_b) {
            (InteractionMode::LatentProjection, Some(z), None) => {
                check("latent", z.len(), n_nodes)?
            }
            (InteractionMode::FullMatrix, None, Some(b)) => {
                if b.dim() != (n_nodes, n_nodes) {
                    return Err(Error::config(format!(
                        "full interaction matrix is {:?}, expected {n_nodes}x{n_nodes}",
                        b.dim()
                    )));
                }
            }
            (mode, _, _) => {
                return Err(Error::config(format!(
                    "{mode:?} mode requires exactly one of latent positions / full matrix"
                )))
            }
        }
        let all_finite = self
            .alpha
            .iter()
            .chain(&self.beta)
            .chain(&self.eta)
            .chain(&self.delta)
            .chain(self.latent.iter().flatten().flatten())
            .chain(self.full_b.iter().flatten())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::numeric("parameter set contains non-finite entries"));
        }
        Ok(())
    }

    pub fn alpha_at(&self, node: usize) -> f64 {
        broadcast(&self.alpha, node)
    }

    pub fn beta_at(&self, node: usize) -> f64 {
        broadcast(&self.beta, node)
    }

    /// Seasonal coefficient of `node`; zero when the model has no seasonality.
    pub fn eta_at(&self, node: usize) -> f64 {
        if self.eta.is_empty() {
            0.0
        } else {
            broadcast(&self.eta, node)
        }
    }
}

fn broadcast(block: &[f64], node: usize) -> f64 {
    if block.len() == 1 {
        block[0]
    } else {
        block[node]
    }
}

/// Interaction matrix `B`: diagonal `β`, off-diagonal `z_i · z_j` (or the free
/// matrix in full-matrix mode).
pub fn build_interaction_matrix(params: &ParameterSet, config: &ModelConfig) -> Result<Array2<f64>> {
    let n = params.n_nodes();
    params.validate(config, n)?;
    match config.interaction_mode {
        InteractionMode::FullMatrix => Ok(params.full_b.clone().expect("validated")),
        InteractionMode::LatentProjection => {
            let z = params.latent.as_ref().expect("validated");
            Ok(Array2::from_shape_fn((n, n), |(i, j)| {
                if i == j {
                    params.beta_at(i)
                } else {
                    dot(&z[i], &z[j])
                }
            }))
        }
    }
}

pub(crate) fn dot(a: &[f64; LATENT_DIM], b: &[f64; LATENT_DIM]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Per-node baseline `α_i + Σ_k δ_k x_ik`.
pub(crate) fn baseline(params: &ParameterSet, covariates: &Array2<f64>) -> Vec<f64> {
    (0..covariates.nrows())
        .map(|i| {
            params.alpha_at(i)
                + covariates
                    .row(i)
                    .iter()
                    .zip(&params.delta)
                    .map(|(x, d)| x * d)
                    .sum::<f64>()
        })
        .collect()
}

/// Log intensities of all nodes at time index `t`, conditioning on the
/// observed history of `data`.
pub fn log_intensity(
    params: &ParameterSet,
    config: &ModelConfig,
    data: &Dataset,
    t: usize,
) -> Result<Vec<f64>> {
    config.validate_for(data)?;
    let n = data.n_nodes();
    params.validate(config, n)?;
    let lag = config.seasonal_lag;
    if t < config.first_index() || t >= data.panel.n_times() {
        return Err(Error::Index(format!(
            "time index {t} outside [{}, {})",
            config.first_index(),
            data.panel.n_times()
        )));
    }
    let b = build_interaction_matrix(params, config)?;
    let x = data.selected_covariates(config)?;
    let base = baseline(params, &x);
    let hist = data.panel.log_counts();
    let out: Vec<f64> = (0..n)
        .map(|i| {
            let mut v = base[i];
            for j in 0..n {
                v += b[[i, j]] * hist[[j, t - 1]];
            }
            if config.is_seasonal() {
                v += params.eta_at(i) * hist[[i, t - lag]];
            }
            v
        })
        .collect();
    if let Some(i) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::numeric(format!(
            "log intensity of node {i} at t = {t} is not finite"
        )));
    }
    Ok(out)
}

/// Intensities `λ_it` for every modelled time point, N×(T−t0). Column `c`
/// corresponds to time index `t0 + c`.
pub fn intensity_path(
    params: &ParameterSet,
    config: &ModelConfig,
    data: &Dataset,
) -> Result<Array2<f64>> {
    let t0 = config.first_index();
    let n_t = data.panel.n_times();
    if n_t <= t0 {
        return Err(Error::Index(format!(
            "panel of length {n_t} has nothing to model after t0 = {t0}"
        )));
    }
    let mut out = Array2::zeros((data.n_nodes(), n_t - t0));
    for t in t0..n_t {
        let eta = log_intensity(params, config, data, t)?;
        for (i, v) in eta.into_iter().enumerate() {
            let lambda = v.exp();
            if !lambda.is_finite() {
                return Err(Error::numeric(format!(
                    "intensity overflow at node {i}, t = {t} (log intensity {v})"
                )));
            }
            out[[i, t - t0]] = lambda;
        }
    }
    Ok(out)
}

/// Conditional Poisson log-likelihood over `t >= t0`, including the
/// `-log(y!)` terms.
pub fn log_likelihood(params: &ParameterSet, config: &ModelConfig, data: &Dataset) -> Result<f64> {
    let t0 = config.first_index();
    let lambda = intensity_path(params, config, data)?;
    let mut total = 0.0;
    for ((i, c), &l) in lambda.indexed_iter() {
        if !(l > 0.0) {
            return Err(Error::numeric(format!(
                "internal invariant violated: intensity {l} at node {i}, t = {}",
                t0 + c
            )));
        }
        let y = data.panel.count(i, t0 + c) as f64;
        total += y * l.ln() - l - ln_factorial(data.panel.count(i, t0 + c));
    }
    Ok(total)
}
