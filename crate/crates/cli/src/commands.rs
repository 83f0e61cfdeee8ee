use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use tslpm::align::{align_chain, AlignReference};
use tslpm::forecast::{
    forecast_multi_step, forecast_one_step, posterior_predictive_coverage, rolling_evaluation,
    train_length, CoverageOptions, ForecastMode, ForecastOptions,
};
use tslpm::hmc::{diagnostics, run_chains, Chain, ChainDiagnostics, HmcOptions};
use tslpm::map_fit::{fit_map, MapOptions};
use tslpm::model::build_interaction_matrix;
use tslpm::posterior::Posterior;
use tslpm::selection::{dic, PlugIn};
use tslpm::stability::check_stationarity;
use tslpm::synthesis::generate_stable;
use tslpm::{Dataset, ModelConfig, ParameterSet};

use crate::io::{self, ChainRecord, MapRecord, TruthRecord};
use crate::{
    AlignArgs, Command, DataArgs, DataError, DicArgs, EvaluateArgs, FitCommand, ForecastArgs, HmcArgs,
    MapArgs, ModeArg, PlugInArg, PpcArgs, SimulateArgs, SourceArgs, UsageError,
};

/// Redraws allowed when a simulated panel overflows.
const SIMULATION_ATTEMPTS: usize = 100;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(FitCommand::Map(a)) => fit_map_cmd(a),
        Command::Fit(FitCommand::Hmc(a)) => fit_hmc(a),
        Command::Align(a) => align(a),
        Command::Forecast(a) => forecast(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Dic(a) => dic_cmd(a),
        Command::Ppc(a) => ppc(a),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        // A closed pipe (e.g. `| head`) is not an error.
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn load(args: &DataArgs) -> Result<(Dataset, ModelConfig)> {
    let config = io::read_config(&args.config)?;
    let data = io::load_dataset(&args.data, args.covariates.as_deref(), args.standardize)?;
    config.validate_for(&data)?;
    Ok((data, config))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let config = match &a.config {
        Some(p) => io::read_config(p)?,
        None => ModelConfig::default(),
    };
    let (seed_used, sim) = generate_stable(
        a.nodes,
        a.timesteps,
        a.seed,
        &config,
        a.sigma0,
        a.expand_factor,
        SIMULATION_ATTEMPTS,
    )?;
    if seed_used != a.seed {
        eprintln!("note: seed {} gave unusable parameters; used derived seed {seed_used}", a.seed);
    }
    let report = check_stationarity(&build_interaction_matrix(&sim.params, &config)?)?;
    io::write_panel(&a.out, &sim.panel)?;
    io::write_json(
        &a.params_out,
        &TruthRecord {
            config,
            labels: sim.panel.labels().to_vec(),
            params: sim.params,
            seed: a.seed,
            seed_used,
            latent_variance: a.sigma0,
            expansion_factor: a.expand_factor,
            expansions: sim.expansion.multiplications,
            saturated: sim.expansion.saturated,
            spectral_radius: sim.expansion.spectral_radius,
        },
    )?;
    print_json(&report)
}

fn fit_map_cmd(a: MapArgs) -> Result<()> {
    let (data, config) = load(&a.data)?;
    let options = MapOptions {
        n_starts: a.starts,
        seed: a.seed,
        ..MapOptions::default()
    };
    let fit = fit_map(&data, &config, None, &options)?;
    eprintln!(
        "log posterior {:.6}, {} iterations, converged = {}",
        fit.log_posterior, fit.iterations, fit.converged
    );
    io::write_json(
        &a.out,
        &MapRecord {
            config,
            labels: data.panel.labels().to_vec(),
            fit,
        },
    )
}

fn read_map(path: &Path, data: &Dataset, config: &ModelConfig) -> Result<MapRecord> {
    let record: MapRecord = io::read_json(path)?;
    io::check_labels(&record.labels, data, "MAP fit")?;
    if &record.config != config {
        return Err(DataError(format!(
            "{} was fitted with a different model configuration",
            path.display()
        ))
        .into());
    }
    Ok(record)
}

#[derive(Serialize)]
struct DiagnosticsRecord {
    chains: usize,
    draws_per_chain: usize,
    step_sizes: Vec<f64>,
    #[serde(flatten)]
    diagnostics: ChainDiagnostics,
}

fn fit_hmc(a: HmcArgs) -> Result<()> {
    let (data, config) = load(&a.data)?;
    if a.chains == 0 {
        return Err(UsageError("--chains must be at least 1".into()).into());
    }
    let posterior = Posterior::new(&config, &data)?;
    let init = a
        .init_map
        .as_ref()
        .map(|p| read_map(p, &data, &config).map(|r| r.fit.flat))
        .transpose()?;
    let options = HmcOptions {
        iters: a.iters,
        burnin: a.burnin,
        thin: a.thin,
        target_accept: a.target_accept,
        seed: a.seed,
        n_leapfrog: a.leapfrog,
        init,
        ..HmcOptions::default()
    };
    let chains = run_chains(&posterior, &options, a.chains)?;
    for c in &chains {
        io::write_json(
            &a.out_dir.join(format!("chain_{}.json", c.chain_id)),
            &ChainRecord {
                labels: data.panel.labels().to_vec(),
                chain: c.clone(),
            },
        )?;
        eprintln!(
            "chain {}: {} draws, acceptance {:.3}, step {:.4e}, {} divergences",
            c.chain_id,
            c.len(),
            c.accept_rate,
            c.step_size,
            c.divergences
        );
    }
    let diag = diagnostics(&chains)?;
    io::write_json(
        &a.out_dir.join("diagnostics.json"),
        &DiagnosticsRecord {
            chains: chains.len(),
            draws_per_chain: chains[0].len(),
            step_sizes: chains.iter().map(|c| c.step_size).collect(),
            diagnostics: diag,
        },
    )
}

fn read_chains(paths: &[PathBuf]) -> Result<Vec<ChainRecord>> {
    let records: Vec<ChainRecord> = paths.iter().map(|p| io::read_json(p)).collect::<Result<_>>()?;
    if let Some(first) = records.first() {
        for (r, p) in records.iter().zip(paths) {
            if r.chain.layout != first.chain.layout || r.chain.config != first.chain.config {
                return Err(DataError(format!("{} is from a different model", p.display())).into());
            }
        }
    }
    Ok(records)
}

fn align(a: AlignArgs) -> Result<()> {
    let records = read_chains(&a.chains)?;
    let reference = if let Some(p) = &a.reference_map {
        let r: MapRecord = io::read_json(p)?;
        AlignReference::Positions(
            r.fit
                .params
                .latent
                .ok_or_else(|| DataError(format!("{} has no latent positions", p.display())))?,
        )
    } else if let Some(p) = &a.reference_truth {
        let r: TruthRecord = io::read_json(p)?;
        AlignReference::Positions(
            r.params
                .latent
                .ok_or_else(|| DataError(format!("{} has no latent positions", p.display())))?,
        )
    } else {
        let idx = a.reference_sample.expect("clap enforces one reference");
        let chain = &records[0].chain;
        let params = chain.params(idx)?;
        AlignReference::Positions(params.latent.ok_or_else(|| {
            DataError("chain has no latent positions (full-matrix model)".into())
        })?)
    };
    for (record, path) in records.into_iter().zip(&a.chains) {
        let aligned = align_chain(&record.chain, &reference)?;
        let name = path
            .file_name()
            .with_context(|| format!("{} is not a file path", path.display()))?;
        io::write_json(
            &a.out_dir.join(name),
            &ChainRecord {
                labels: record.labels,
                chain: aligned,
            },
        )?;
    }
    Ok(())
}

/// Parameter draws from a MAP fit (one draw) or pooled chains.
fn load_source(src: &SourceArgs, data: &Dataset, config: &ModelConfig) -> Result<Vec<ParameterSet>> {
    if let Some(p) = &src.fit {
        return Ok(vec![read_map(p, data, config)?.fit.params]);
    }
    let records = read_chains(&src.chain)?;
    let mut draws = Vec::new();
    for r in &records {
        io::check_labels(&r.labels, data, "chain")?;
        if &r.chain.config != config {
            return Err(DataError("chain was sampled under a different model configuration".into()).into());
        }
        draws.extend(r.chain.parameter_sets()?);
    }
    Ok(draws)
}

#[derive(Serialize)]
struct ForecastRow<'a> {
    node: &'a str,
    h: usize,
    point: f64,
    lower: f64,
    upper: f64,
}

fn forecast(a: ForecastArgs) -> Result<()> {
    let (data, config) = load(&a.data)?;
    let draws = load_source(&a.source, &data, &config)?;
    let options = ForecastOptions {
        draws: a.draws,
        seed: a.seed,
        level: a.level,
    };
    let n_t = data.panel.n_times();
    let result = match a.mode {
        ModeArg::OneStep => {
            let origin = a.origin.unwrap_or((n_t + 1).saturating_sub(a.horizon));
            forecast_one_step(&draws, &config, &data, origin, a.horizon, &options)?
        }
        ModeArg::MultiStep | ModeArg::PlugIn => {
            let mode = if a.mode == ModeArg::PlugIn {
                ForecastMode::PlugIn
            } else {
                ForecastMode::MultiStep
            };
            let origin = a.origin.unwrap_or(n_t);
            forecast_multi_step(&draws, &config, &data, origin, a.horizon, &options, mode)?
        }
    };
    io::write_json(&a.out, &result)?;
    let mut w = io::csv_writer(&a.csv)?;
    for (i, label) in result.labels.iter().enumerate() {
        for h in 0..result.horizon() {
            w.serialize(ForecastRow {
                node: label,
                h: h + 1,
                point: result.point[[i, h]],
                lower: result.lower[[i, h]],
                upper: result.upper[[i, h]],
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RmseRow {
    h: usize,
    one_step_rmse: f64,
    multi_step_rmse: f64,
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let (data, config) = load(&a.data)?;
    let train_len = train_length(data.panel.n_times(), a.split, &config)?;
    let train = data.with_panel(data.panel.head(train_len)?)?;
    let fit = fit_map(
        &train,
        &config,
        None,
        &MapOptions {
            seed: a.seed,
            ..MapOptions::default()
        },
    )?;
    let options = ForecastOptions {
        draws: a.draws,
        seed: a.seed,
        ..ForecastOptions::default()
    };
    let eval = rolling_evaluation(
        std::slice::from_ref(&fit.params),
        &config,
        &data,
        train_len,
        a.horizon,
        &options,
    )?;
    eprintln!(
        "{} training steps, {} forecast origins, MAP converged = {}",
        train_len, eval.origins, fit.converged
    );
    let mut w = io::csv_writer(&a.out)?;
    for h in 0..eval.horizon {
        w.serialize(RmseRow {
            h: h + 1,
            one_step_rmse: eval.one_step[h],
            multi_step_rmse: eval.multi_step[h],
        })?;
    }
    w.flush()?;
    if let Some(p) = &a.fit_out {
        io::write_json(
            p,
            &MapRecord {
                config,
                labels: data.panel.labels().to_vec(),
                fit,
            },
        )?;
    }
    Ok(())
}

/// Concatenates chains of the same model into one.
fn pool(records: Vec<ChainRecord>) -> Result<Chain> {
    let mut iter = records.into_iter();
    let mut pooled = iter
        .next()
        .ok_or_else(|| UsageError("no chains given".into()))?
        .chain;
    for r in iter {
        pooled.aligned &= r.chain.aligned;
        pooled.samples.extend(r.chain.samples);
        pooled.log_posteriors.extend(r.chain.log_posteriors);
    }
    Ok(pooled)
}

fn dic_cmd(a: DicArgs) -> Result<()> {
    let (data, config) = load(&a.data)?;
    let records = read_chains(&a.chain)?;
    for r in &records {
        io::check_labels(&r.labels, &data, "chain")?;
    }
    let chain = pool(records)?;
    if chain.config != config {
        return Err(DataError("chain was sampled under a different model configuration".into()).into());
    }
    let plug_in = match a.plug_in {
        PlugInArg::MeanParams => PlugIn::MeanParams,
        PlugInArg::MeanInteraction => PlugIn::MeanInteraction,
    };
    let result = dic(&chain, &data, plug_in)?;
    io::write_json(&a.out, &result)?;
    print_json(&result)
}

#[derive(Serialize)]
struct CoverageRow<'a> {
    node: &'a str,
    coverage: f64,
}

fn ppc(a: PpcArgs) -> Result<()> {
    let (data, config) = load(&a.data)?;
    let draws = load_source(&a.source, &data, &config)?;
    let coverage = posterior_predictive_coverage(
        &draws,
        &config,
        &data,
        &CoverageOptions {
            level: a.level,
            reps_per_draw: a.reps,
            seed: a.seed,
        },
    )?;
    let mut w = io::csv_writer(&a.out)?;
    for (label, c) in data.panel.labels().iter().zip(&coverage) {
        w.serialize(CoverageRow { node: label, coverage: *c })?;
    }
    w.flush()?;
    Ok(())
}
