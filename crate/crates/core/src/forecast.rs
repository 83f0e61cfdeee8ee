//! One-step and multi-step forecasts, predictive intervals, RMSE, posterior
//! predictive coverage and the latent distance-ratio diagnostic.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::empirical_quantile;
use crate::error::{Error, Result};
use crate::model::{baseline, build_interaction_matrix, intensity_path, Dataset, ModelConfig, ParameterSet};
use crate::rng;
use crate::stability::spectral_radius;
use crate::synthesis::MAX_LOG_INTENSITY;

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;
pub const DEFAULT_HORIZON: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastMode {
    /// Every step conditions on the observed series.
    OneStep,
    /// Recursive simulation from the forecast origin.
    MultiStep,
    /// Recursion with `log(λ̂ + 1)` substituted for the unobserved counts.
    PlugIn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastOptions {
    /// Predictive samples (one-step) or simulated trajectories (multi-step).
    pub draws: usize,
    pub seed: u64,
    /// Central predictive interval level.
    pub level: f64,
}

impl Default for ForecastOptions {
    fn default() -> Self {
        ForecastOptions {
            draws: 1000,
            seed: 0,
            level: 0.95,
        }
    }
}

impl ForecastOptions {
    fn validate(&self) -> Result<()> {
        if self.draws == 0 {
            return Err(Error::Precondition("need at least one draw".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Precondition(format!(
                "interval level must lie in (0, 1), got {}",
                self.level
            )));
        }
        Ok(())
    }

    fn tails(&self) -> (f64, f64) {
        let a = (1.0 - self.level) / 2.0;
        (a, 1.0 - a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub mode: ForecastMode,
    /// Time index of the first forecast (`h = 1`).
    pub origin: usize,
    pub labels: Vec<String>,
    /// Conditional-mean forecasts, N×H.
    pub point: Array2<f64>,
    pub lower: Array2<f64>,
    pub upper: Array2<f64>,
    /// Mean of the predictive samples behind the interval, N×H.
    pub sample_mean: Array2<f64>,
    pub draws_used: usize,
}

impl ForecastResult {
    pub fn horizon(&self) -> usize {
        self.point.ncols()
    }
}

/// Per-parameter quantities reused across time steps.
struct Prepared {
    b: Array2<f64>,
    base: Vec<f64>,
    eta: Vec<f64>,
}

fn prepare(params: &[ParameterSet], config: &ModelConfig, data: &Dataset) -> Result<Vec<Prepared>> {
    if params.is_empty() {
        return Err(Error::Precondition("no parameter draws to forecast from".into()));
    }
    config.validate_for(data)?;
    let x = data.selected_covariates(config)?;
    let n = data.n_nodes();
    params
        .iter()
        .map(|p| {
            p.validate(config, n)?;
            Ok(Prepared {
                b: build_interaction_matrix(p, config)?,
                base: baseline(p, &x),
                eta: (0..n)
                    .map(|i| if config.is_seasonal() { p.eta_at(i) } else { 0.0 })
                    .collect(),
            })
        })
        .collect()
}

/// Log intensity of node `i` given a window of log-count columns whose last
/// entry is time `t − 1`.
fn window_log_intensity(p: &Prepared, window: &[Vec<f64>], lag: usize, i: usize) -> f64 {
    let prev = &window[window.len() - 1];
    let mut v = p.base[i];
    for (j, y) in prev.iter().enumerate() {
        v += p.b[[i, j]] * y;
    }
    if lag > 0 {
        v += p.eta[i] * window[window.len() - lag][i];
    }
    v
}

fn check_origin(config: &ModelConfig, data: &Dataset, origin: usize) -> Result<()> {
    let t0 = config.first_index();
    if origin < t0 || origin > data.panel.n_times() {
        return Err(Error::Index(format!(
            "forecast origin {origin} outside [{t0}, {}]",
            data.panel.n_times()
        )));
    }
    Ok(())
}

/// One-step intensities for `t = origin + h − 1`, `h = 1..=horizon`, averaged
/// over the parameter draws.
fn one_step_means(
    prepared: &[Prepared],
    config: &ModelConfig,
    data: &Dataset,
    origin: usize,
    horizon: usize,
) -> Result<Vec<Array2<f64>>> {
    check_origin(config, data, origin)?;
    let n_t = data.panel.n_times();
    if let Some(h) = (1..=horizon).find(|h| origin + h > n_t + 1) {
        return Err(Error::Data(format!(
            "one-step forecast at h = {h} needs observations through t = {}, panel ends at t = {}",
            origin + h - 2,
            n_t - 1
        )));
    }
    let lag = if config.is_seasonal() { config.seasonal_lag } else { 0 };
    let logs = data.panel.log_counts();
    let n = data.n_nodes();
    let depth = config.first_index();
    let mut per_draw = Vec::with_capacity(prepared.len());
    for p in prepared {
        let mut lambda = Array2::zeros((n, horizon));
        for h in 0..horizon {
            let t = origin + h;
            let window: Vec<Vec<f64>> = (t - depth..t).map(|s| logs.column(s).to_vec()).collect();
            for i in 0..n {
                let v = window_log_intensity(p, &window, lag, i);
                lambda[[i, h]] = v.min(MAX_LOG_INTENSITY).exp();
            }
        }
        per_draw.push(lambda);
    }
    Ok(per_draw)
}

fn average(arrays: &[Array2<f64>]) -> Array2<f64> {
    let mut out = arrays[0].clone();
    for a in &arrays[1..] {
        out += a;
    }
    out / arrays.len() as f64
}

/// Interval bounds and means of per-sample predictive draws, each N×H.
fn summarise_samples(
    samples: &[Array2<u64>],
    options: &ForecastOptions,
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let (n, h) = samples[0].dim();
    let (lo, hi) = options.tails();
    let mut lower = Array2::zeros((n, h));
    let mut upper = Array2::zeros((n, h));
    let mut mean = Array2::zeros((n, h));
    let mut column = Vec::with_capacity(samples.len());
    for i in 0..n {
        for k in 0..h {
            column.clear();
            column.extend(samples.iter().map(|s| s[[i, k]]));
            mean[[i, k]] = column.iter().map(|&y| y as f64).sum::<f64>() / column.len() as f64;
            column.sort_unstable();
            lower[[i, k]] = empirical_quantile(&column, lo) as f64;
            upper[[i, k]] = empirical_quantile(&column, hi) as f64;
        }
    }
    (lower, upper, mean)
}

/// Forecasts `t = origin, …, origin + horizon − 1`, each from the observed
/// history up to `t − 1`. With several parameter draws, the point forecast
/// is the posterior mean intensity and predictive samples cycle through the
/// draws.
pub fn forecast_one_step(
    params: &[ParameterSet],
    config: &ModelConfig,
    data: &Dataset,
    origin: usize,
    horizon: usize,
    options: &ForecastOptions,
) -> Result<ForecastResult> {
    options.validate()?;
    if horizon == 0 {
        return Err(Error::Precondition("horizon must be at least 1".into()));
    }
    let prepared = prepare(params, config, data)?;
    let per_draw = one_step_means(&prepared, config, data, origin, horizon)?;
    let samples: Vec<Array2<u64>> = (0..options.draws)
        .into_par_iter()
        .map(|s| {
            let mut rng = rng::stream(options.seed, s as u64);
            per_draw[s % per_draw.len()].mapv(|l| rng::poisson(&mut rng, l))
        })
        .collect();
    let (lower, upper, sample_mean) = summarise_samples(&samples, options);
    Ok(ForecastResult {
        mode: ForecastMode::OneStep,
        origin,
        labels: data.panel.labels().to_vec(),
        point: average(&per_draw),
        lower,
        upper,
        sample_mean,
        draws_used: options.draws,
    })
}

struct Trajectory {
    lambda: Array2<f64>,
    counts: Array2<u64>,
    clamped: bool,
}

fn initial_window(config: &ModelConfig, data: &Dataset, origin: usize) -> Vec<Vec<f64>> {
    let depth = config.first_index();
    let logs = data.panel.log_counts();
    (origin - depth..origin).map(|s| logs.column(s).to_vec()).collect()
}

/// One simulated path. Node `i` draws from its own stream so that nodes
/// which do not interact also do not share random numbers.
fn simulate_trajectory(
    p: &Prepared,
    start: &[Vec<f64>],
    lag: usize,
    horizon: usize,
    seed: u64,
    key: u64,
) -> Trajectory {
    let n = p.base.len();
    let mut rngs: Vec<rng::SimRng> = (0..n).map(|i| rng::substream(seed, key, i as u64)).collect();
    let mut window = start.to_vec();
    let mut lambda = Array2::zeros((n, horizon));
    let mut counts = Array2::zeros((n, horizon));
    let mut clamped = false;
    for h in 0..horizon {
        let mut next = vec![0.0; n];
        for i in 0..n {
            let mut v = window_log_intensity(p, &window, lag, i);
            if v > MAX_LOG_INTENSITY {
                v = MAX_LOG_INTENSITY;
                clamped = true;
            }
            let l = v.exp();
            let y = rng::poisson(&mut rngs[i], l);
            lambda[[i, h]] = l;
            counts[[i, h]] = y;
            next[i] = (y as f64).ln_1p();
        }
        window.remove(0);
        window.push(next);
    }
    Trajectory {
        lambda,
        counts,
        clamped,
    }
}

fn plug_in_path(p: &Prepared, start: &[Vec<f64>], lag: usize, horizon: usize) -> Array2<f64> {
    let n = p.base.len();
    let mut window = start.to_vec();
    let mut lambda = Array2::zeros((n, horizon));
    for h in 0..horizon {
        let mut next = vec![0.0; n];
        for i in 0..n {
            let l = window_log_intensity(p, &window, lag, i).min(MAX_LOG_INTENSITY).exp();
            lambda[[i, h]] = l;
            next[i] = l.ln_1p();
        }
        window.remove(0);
        window.push(next);
    }
    lambda
}

fn warn_if_unstable(prepared: &[Prepared]) {
    let unstable = prepared
        .iter()
        .filter(|p| spectral_radius(&p.b).is_ok_and(|r| r >= 1.0))
        .count();
    if unstable > 0 {
        log::warn!(
            "{unstable} of {} parameter draws have a non-stationary interaction matrix",
            prepared.len()
        );
    }
}

/// Forecasts `horizon` steps from the observations before `origin`.
///
/// `MultiStep` simulates `options.draws` trajectories, cycling through the
/// parameter draws; the point forecast averages the conditional intensities
/// along the trajectories (an unbiased, lower-variance estimate of the
/// trajectory mean) and intervals are empirical quantiles of the simulated
/// counts. `PlugIn` replaces unobserved counts by their intensities and
/// takes intervals from the Poisson distribution at the point forecast.
pub fn forecast_multi_step(
    params: &[ParameterSet],
    config: &ModelConfig,
    data: &Dataset,
    origin: usize,
    horizon: usize,
    options: &ForecastOptions,
    mode: ForecastMode,
) -> Result<ForecastResult> {
    options.validate()?;
    if horizon == 0 {
        return Err(Error::Precondition("horizon must be at least 1".into()));
    }
    check_origin(config, data, origin)?;
    let prepared = prepare(params, config, data)?;
    warn_if_unstable(&prepared);
    let lag = if config.is_seasonal() { config.seasonal_lag } else { 0 };
    let start = initial_window(config, data, origin);
    let labels = data.panel.labels().to_vec();
    match mode {
        ForecastMode::MultiStep => {
            let paths: Vec<Trajectory> = (0..options.draws)
                .into_par_iter()
                .map(|s| {
                    simulate_trajectory(&prepared[s % prepared.len()], &start, lag, horizon, options.seed, s as u64)
                })
                .collect();
            if paths.iter().any(|p| p.clamped) {
                log::warn!("simulated intensities exceeded exp({MAX_LOG_INTENSITY}) and were capped");
            }
            let lambdas: Vec<Array2<f64>> = paths.iter().map(|p| p.lambda.clone()).collect();
            let counts: Vec<Array2<u64>> = paths.into_iter().map(|p| p.counts).collect();
            let (lower, upper, sample_mean) = summarise_samples(&counts, options);
            Ok(ForecastResult {
                mode,
                origin,
                labels,
                point: average(&lambdas),
                lower,
                upper,
                sample_mean,
                draws_used: options.draws,
            })
        }
        ForecastMode::PlugIn => {
            let paths: Vec<Array2<f64>> = prepared
                .iter()
                .map(|p| plug_in_path(p, &start, lag, horizon))
                .collect();
            let point = average(&paths);
            let (lo, hi) = options.tails();
            Ok(ForecastResult {
                mode,
                origin,
                labels,
                lower: point.mapv(|l| rng::poisson_quantile(l, lo) as f64),
                upper: point.mapv(|l| rng::poisson_quantile(l, hi) as f64),
                sample_mean: point.clone(),
                point,
                draws_used: prepared.len(),
            })
        }
        ForecastMode::OneStep => Err(Error::Precondition(
            "use forecast_one_step for one-step forecasts".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RmseScope {
    /// N·H values, node-major.
    PerNodePerH,
    /// H values, pooled over nodes.
    PerH,
    Total,
}

/// Root mean squared error of `pred` against `actual` (both N×H).
pub fn rmse(pred: &Array2<f64>, actual: &Array2<f64>, scope: RmseScope) -> Result<Vec<f64>> {
    if pred.dim() != actual.dim() {
        return Err(Error::shape(format!(
            "prediction is {:?}, actual is {:?}",
            pred.dim(),
            actual.dim()
        )));
    }
    if pred.is_empty() {
        return Err(Error::shape("empty forecast matrix"));
    }
    let sq = (pred - actual).mapv(|e| e * e);
    Ok(match scope {
        RmseScope::PerNodePerH => sq.iter().map(|v| v.sqrt()).collect(),
        RmseScope::PerH => sq
            .columns()
            .into_iter()
            .map(|c| c.mean().unwrap_or(f64::NAN).sqrt())
            .collect(),
        RmseScope::Total => vec![sq.mean().unwrap_or(f64::NAN).sqrt()],
    })
}

/// Observed counts at `origin .. origin + horizon` as reals, N×H.
pub fn actuals(data: &Dataset, origin: usize, horizon: usize) -> Result<Array2<f64>> {
    let n_t = data.panel.n_times();
    if origin + horizon > n_t {
        return Err(Error::Index(format!(
            "actuals for t = {origin}..{} but the panel ends at t = {}",
            origin + horizon - 1,
            n_t - 1
        )));
    }
    Ok(data
        .panel
        .counts()
        .slice(ndarray::s![.., origin..origin + horizon])
        .mapv(|y| y as f64))
}

/// Length of the training segment for a train/test split.
pub fn train_length(n_times: usize, fraction: f64, config: &ModelConfig) -> Result<usize> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Precondition(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let len = (fraction * n_times as f64).floor() as usize;
    if len < config.first_index() + 2 || len >= n_times {
        return Err(Error::Precondition(format!(
            "a {fraction} split of {n_times} observations leaves {len} for training"
        )));
    }
    Ok(len)
}

/// RMSE by horizon over rolling forecast origins in a test segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingEvaluation {
    pub horizon: usize,
    pub origins: usize,
    pub one_step: Vec<f64>,
    pub multi_step: Vec<f64>,
}

/// Forecasts from every origin in `train_len ..= T − horizon` with both
/// algorithms and pools squared errors by horizon. Multi-step points use
/// `options.draws` trajectories per origin.
pub fn rolling_evaluation(
    params: &[ParameterSet],
    config: &ModelConfig,
    data: &Dataset,
    train_len: usize,
    horizon: usize,
    options: &ForecastOptions,
) -> Result<RollingEvaluation> {
    options.validate()?;
    if horizon == 0 {
        return Err(Error::Precondition("horizon must be at least 1".into()));
    }
    let n_t = data.panel.n_times();
    if train_len < config.first_index() || train_len + horizon > n_t {
        return Err(Error::Precondition(format!(
            "no forecast origin with {horizon} observed steps after t = {train_len} (T = {n_t})"
        )));
    }
    let prepared = prepare(params, config, data)?;
    warn_if_unstable(&prepared);
    let lag = if config.is_seasonal() { config.seasonal_lag } else { 0 };
    let origins: Vec<usize> = (train_len..=n_t - horizon).collect();
    let per_origin: Vec<(Array2<f64>, Array2<f64>)> = origins
        .par_iter()
        .map(|&origin| {
            let actual = actuals(data, origin, horizon)?;
            let one = average(&one_step_means(&prepared, config, data, origin, horizon)?);
            let start = initial_window(config, data, origin);
            let mut sum = Array2::zeros((data.n_nodes(), horizon));
            let seed = options.seed.wrapping_add(origin as u64);
            for s in 0..options.draws {
                let p = &prepared[s % prepared.len()];
                sum += &simulate_trajectory(p, &start, lag, horizon, seed, s as u64).lambda;
            }
            let multi = sum / options.draws as f64;
            Ok(((&one - &actual).mapv(|e| e * e), (&multi - &actual).mapv(|e| e * e)))
        })
        .collect::<Result<_>>()?;
    let pooled = |pick: fn(&(Array2<f64>, Array2<f64>)) -> &Array2<f64>| -> Vec<f64> {
        (0..horizon)
            .map(|h| {
                let total: f64 = per_origin.iter().map(|e| pick(e).column(h).sum()).sum();
                (total / (per_origin.len() * data.n_nodes()) as f64).sqrt()
            })
            .collect()
    };
    Ok(RollingEvaluation {
        horizon,
        origins: origins.len(),
        one_step: pooled(|e| &e.0),
        multi_step: pooled(|e| &e.1),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageOptions {
    pub level: f64,
    /// Replicated observations per parameter draw and time point.
    pub reps_per_draw: usize,
    pub seed: u64,
}

impl Default for CoverageOptions {
    fn default() -> Self {
        CoverageOptions {
            level: 0.95,
            reps_per_draw: 1,
            seed: 0,
        }
    }
}

/// Fraction of in-sample observations of each node inside the central
/// `level` band of its one-step posterior predictive distribution. The band
/// is formed from replicated counts `y_rep ~ Poisson(λ_t(θ))` over the
/// parameter draws.
pub fn posterior_predictive_coverage(
    params: &[ParameterSet],
    config: &ModelConfig,
    data: &Dataset,
    options: &CoverageOptions,
) -> Result<Vec<f64>> {
    if params.is_empty() {
        return Err(Error::Precondition("coverage needs at least one parameter draw".into()));
    }
    if !(options.level > 0.0 && options.level < 1.0) || options.reps_per_draw == 0 {
        return Err(Error::Precondition(format!(
            "invalid coverage options: level {}, reps {}",
            options.level, options.reps_per_draw
        )));
    }
    let paths: Vec<Array2<f64>> = params
        .par_iter()
        .map(|p| intensity_path(p, config, data))
        .collect::<Result<_>>()?;
    let t0 = config.first_index();
    let tail = (1.0 - options.level) / 2.0;
    let n = data.n_nodes();
    let cover = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(options.seed, i as u64);
            let steps = paths[0].ncols();
            let mut reps = Vec::with_capacity(paths.len() * options.reps_per_draw);
            let mut inside = 0usize;
            for c in 0..steps {
                reps.clear();
                for path in &paths {
                    for _ in 0..options.reps_per_draw {
                        reps.push(rng::poisson(&mut rng, path[[i, c]]));
                    }
                }
                reps.sort_unstable();
                let y = data.panel.count(i, t0 + c);
                if empirical_quantile(&reps, tail) <= y && y <= empirical_quantile(&reps, 1.0 - tail) {
                    inside += 1;
                }
            }
            inside as f64 / steps as f64
        })
        .collect();
    Ok(cover)
}

/// Ratios `‖ẑ_i − ẑ_j‖ / ‖z_i − z_j‖` over all pairs `i < j`.
pub fn distance_ratio_distribution(z_hat: &[[f64; 2]], z_true: &[[f64; 2]]) -> Result<Vec<f64>> {
    if z_hat.len() != z_true.len() {
        return Err(Error::shape(format!(
            "{} estimated and {} true positions",
            z_hat.len(),
            z_true.len()
        )));
    }
    if z_true.len() < 2 {
        return Err(Error::Precondition("need at least two nodes".into()));
    }
    let dist = |a: &[f64; 2], b: &[f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    let mut out = Vec::with_capacity(z_true.len() * (z_true.len() - 1) / 2);
    for i in 0..z_true.len() {
        for j in i + 1..z_true.len() {
            let d = dist(&z_true[i], &z_true[j]);
            if d == 0.0 {
                return Err(Error::Data(format!(
                    "true positions of nodes {i} and {j} coincide"
                )));
            }
            out.push(dist(&z_hat[i], &z_hat[j]) / d);
        }
    }
    Ok(out)
}
