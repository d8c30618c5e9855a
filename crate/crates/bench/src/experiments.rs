//! The three experiments.

use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use chaosamp::design::{alphabetic_design, DesignOptions};
use chaosamp::models::{duffing_trajectory, BatteryModel, BatteryState, ManufacturedModel};
use chaosamp::orthopoly::BasisSpec;
use chaosamp::sampling::{sample_standard, sample_with, McmcConfig, SampleSet};
use chaosamp::solver::{fit, fit_multi, validation_error};
use chaosamp::Strategy;

use crate::config::{DuffingMode, ExperimentConfig, ExperimentKind};
use crate::table::{ResultRow, ResultTable};
use crate::{ks_distance, replicate_seed, stream_seed, BenchError, SEED_RULE};

/// Table plus the optional battery density comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub table: ResultTable,
    pub pdf: Option<PdfReport>,
}

/// Dispatches on the configured experiment.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput, BenchError> {
    match cfg.experiment {
        ExperimentKind::Recovery => Ok(RunOutput {
            table: run_recovery(cfg)?,
            pdf: None,
        }),
        ExperimentKind::Duffing => Ok(RunOutput {
            table: run_duffing(cfg)?,
            pdf: None,
        }),
        ExperimentKind::Battery => {
            let table = run_battery(cfg)?;
            let pdf = if cfg.pdf { Some(battery_pdf(cfg)?) } else { None };
            Ok(RunOutput { table, pdf })
        }
    }
}

fn header(cfg: &ExperimentConfig) -> Vec<String> {
    let mut h = vec![format!("chaosamp-bench v{}", env!("CARGO_PKG_VERSION"))];
    h.extend(cfg.echo().into_iter().map(|(k, v)| format!("{k} = {v}")));
    h.push(SEED_RULE.to_string());
    h
}

fn with_pool<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R, BenchError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| BenchError::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

fn mcmc(cfg: &ExperimentConfig) -> McmcConfig {
    McmcConfig {
        burn_in: cfg.burn_in,
        ..McmcConfig::default()
    }
}

/// Training points for one replicate.
pub fn draw_design(
    cfg: &ExperimentConfig,
    spec: &BasisSpec<f64>,
    strategy: Strategy,
    n: usize,
    seed: u64,
) -> chaosamp::Result<SampleSet<f64>> {
    match strategy {
        Strategy::Alphabetic { criterion, pool } => {
            let opts = DesignOptions {
                candidates: Some(cfg.candidates.count(n, spec.len())),
                restarts: cfg.restarts,
                exchange: None,
                mcmc: mcmc(cfg),
            };
            alphabetic_design(spec, n, criterion, pool, seed, &opts).map(|(s, _)| s)
        }
        s => sample_with(spec, s, n, seed, &mcmc(cfg)),
    }
}

fn failed_row(strategy: Strategy, order: usize, n: usize, time: Option<f64>, rep: usize, seed: u64, msg: String) -> ResultRow {
    ResultRow {
        strategy: strategy.name(),
        order,
        n,
        time,
        replicate: rep,
        seed,
        relative_error: None,
        recovered: None,
        delta: None,
        cond: None,
        failure: Some(msg),
        wall_time: 0.0,
    }
}

/// Manufactured-expansion recovery probabilities.
pub fn run_recovery(cfg: &ExperimentConfig) -> Result<ResultTable, BenchError> {
    cfg.validate()?;
    let exp = ExperimentKind::Recovery.name();
    let spec = BasisSpec::isotropic(cfg.family.family(), cfg.dim, cfg.order)?;
    let p = spec.len();
    let validation = sample_standard(&spec, cfg.validation, stream_seed(cfg.seed, exp, "validation", 0));
    let psi_v = spec.measurement_matrix(&validation.points)?;

    let mut tasks = Vec::new();
    for &strategy in &cfg.strategies {
        for n in cfg.sample_counts(p) {
            for rep in 0..cfg.replications {
                tasks.push((strategy, n, rep));
            }
        }
    }
    let rows = with_pool(cfg.workers, || {
        tasks
            .par_iter()
            .map(|&(strategy, n, rep)| {
                let start = Instant::now();
                let seed = replicate_seed(cfg.seed, exp, &strategy.name(), n, rep);
                let model = ManufacturedModel::random(p, cfg.noise_rel, stream_seed(cfg.seed, exp, "coefficients", rep as u64));
                let outcome = (|| -> chaosamp::Result<(f64, f64, f64)> {
                    let samples = draw_design(cfg, &spec, strategy, n, seed)?;
                    let psi = spec.measurement_matrix(&samples.points)?;
                    let u = model.eval_rows(&psi, stream_seed(seed, exp, "noise", 0));
                    let f = fit(&psi, Some(&samples.weights), &u)?;
                    let u_v = model.exact_rows(&psi_v);
                    let err = validation_error(&f.coefficients, &psi_v, &u_v)?;
                    Ok((err, f.stability.dist_identity, f.stability.cond))
                })();
                let mut row = match outcome {
                    Ok((err, delta, cond)) => ResultRow {
                        strategy: strategy.name(),
                        order: cfg.order,
                        n,
                        time: None,
                        replicate: rep,
                        seed,
                        relative_error: Some(err),
                        recovered: Some(err <= cfg.threshold),
                        delta: Some(delta),
                        cond: Some(cond),
                        failure: None,
                        wall_time: 0.0,
                    },
                    Err(e) => failed_row(strategy, cfg.order, n, None, rep, seed, e.to_string()),
                };
                row.wall_time = start.elapsed().as_secs_f64();
                row
            })
            .collect::<Vec<_>>()
    })?;
    Ok(ResultTable {
        header: header(cfg),
        rows,
    })
}

type Oracle<'a> = dyn Fn(&[f64]) -> chaosamp::Result<Vec<f64>> + Sync + 'a;

/// Evaluates `oracle` at every row of `points`, in parallel.
fn evaluate_points(points: &DMatrix<f64>, n_out: usize, oracle: &Oracle<'_>) -> chaosamp::Result<DMatrix<f64>> {
    let values: Vec<chaosamp::Result<Vec<f64>>> = (0..points.nrows())
        .into_par_iter()
        .map(|i| {
            let xi: Vec<f64> = points.row(i).iter().copied().collect();
            oracle(&xi)
        })
        .collect();
    let mut out = DMatrix::zeros(points.nrows(), n_out);
    for (i, v) in values.into_iter().enumerate() {
        let v = v?;
        for (k, x) in v.into_iter().enumerate() {
            out[(i, k)] = x;
        }
    }
    Ok(out)
}

/// Shared driver for models observed at several times.
fn run_timed(
    cfg: &ExperimentConfig,
    exp: &str,
    specs: &[BasisSpec<f64>],
    oracle: &Oracle<'_>,
) -> Result<ResultTable, BenchError> {
    let times = &cfg.times;
    let validation = sample_standard(&specs[0], cfg.validation, stream_seed(cfg.seed, exp, "validation", 0));
    let (u_v, psi_vs) = with_pool(cfg.workers, || -> chaosamp::Result<_> {
        let u_v = evaluate_points(&validation.points, times.len(), oracle)?;
        let psi_vs = specs
            .iter()
            .map(|s| s.measurement_matrix(&validation.points))
            .collect::<chaosamp::Result<Vec<_>>>()?;
        Ok((u_v, psi_vs))
    })??;

    let mut tasks = Vec::new();
    for (k, spec) in specs.iter().enumerate() {
        let counts = match cfg.mode {
            DuffingMode::OrderSweep if cfg.experiment == ExperimentKind::Duffing => {
                vec![(cfg.sweep_factor * spec.len() as f64).ceil() as usize]
            }
            _ => cfg.sample_counts(spec.len()),
        };
        for &strategy in &cfg.strategies {
            for &n in &counts {
                for rep in 0..cfg.replications {
                    tasks.push((k, strategy, n, rep));
                }
            }
        }
    }

    let rows = with_pool(cfg.workers, || {
        tasks
            .par_iter()
            .flat_map_iter(|&(k, strategy, n, rep)| {
                let spec = &specs[k];
                let order = spec.order();
                let start = Instant::now();
                let seed = replicate_seed(cfg.seed, exp, &format!("{}/p{}", strategy.name(), order), n, rep);
                let outcome = (|| -> chaosamp::Result<Vec<(f64, f64, f64)>> {
                    let samples = draw_design(cfg, spec, strategy, n, seed)?;
                    let psi = spec.measurement_matrix(&samples.points)?;
                    let mut u = DMatrix::zeros(n, times.len());
                    for i in 0..n {
                        let xi: Vec<f64> = samples.points.row(i).iter().copied().collect();
                        for (t, v) in oracle(&xi)?.into_iter().enumerate() {
                            u[(i, t)] = v;
                        }
                    }
                    let fits = fit_multi(&psi, Some(&samples.weights), &u)?;
                    fits.iter()
                        .enumerate()
                        .map(|(t, f)| {
                            let uv: DVector<f64> = u_v.column(t).into_owned();
                            let err = validation_error(&f.coefficients, &psi_vs[k], &uv)?;
                            Ok((err, f.stability.dist_identity, f.stability.cond))
                        })
                        .collect()
                })();
                let wall = start.elapsed().as_secs_f64();
                let rows: Vec<ResultRow> = match outcome {
                    Ok(per_time) => per_time
                        .into_iter()
                        .zip(times)
                        .map(|((err, delta, cond), &t)| ResultRow {
                            strategy: strategy.name(),
                            order,
                            n,
                            time: Some(t),
                            replicate: rep,
                            seed,
                            relative_error: Some(err),
                            recovered: None,
                            delta: Some(delta),
                            cond: Some(cond),
                            failure: None,
                            wall_time: wall,
                        })
                        .collect(),
                    Err(e) => times
                        .iter()
                        .map(|&t| {
                            let mut r = failed_row(strategy, order, n, Some(t), rep, seed, e.to_string());
                            r.wall_time = wall;
                            r
                        })
                        .collect(),
                };
                rows
            })
            .collect::<Vec<_>>()
    })?;
    Ok(ResultTable {
        header: header(cfg),
        rows,
    })
}

/// Duffing displacement errors per strategy, sample size and instant.
pub fn run_duffing(cfg: &ExperimentConfig) -> Result<ResultTable, BenchError> {
    cfg.validate()?;
    let orders = match cfg.mode {
        DuffingMode::Design => vec![cfg.order],
        DuffingMode::OrderSweep => cfg.sweep_orders.clone(),
    };
    let specs = orders
        .iter()
        .map(|&p| BasisSpec::isotropic(chaosamp::PolyFamily::Legendre, 3, p))
        .collect::<chaosamp::Result<Vec<_>>>()?;
    let times = cfg.times.clone();
    let dt = cfg.dt;
    let oracle = move |xi: &[f64]| duffing_trajectory(xi, &times, dt);
    run_timed(cfg, ExperimentKind::Duffing.name(), &specs, &oracle)
}

/// Battery model configured from the experiment settings.
pub fn battery_model(cfg: &ExperimentConfig) -> BatteryModel {
    BatteryModel {
        dt: cfg.dt,
        horizon: cfg.horizon,
        current_low: cfg.current_low,
        current_high: cfg.current_high,
        state_cov: cfg.state_cov,
        zero_state_sd: cfg.zero_state_sd,
        noise_sd: cfg.noise_sd,
        ..BatteryModel::default()
    }
}

fn battery_spec(cfg: &ExperimentConfig, model: &BatteryModel) -> chaosamp::Result<BasisSpec<f64>> {
    BasisSpec::new(model.families()?, cfg.order)
}

/// Remaining-useful-life errors per strategy and prediction time.
pub fn run_battery(cfg: &ExperimentConfig) -> Result<ResultTable, BenchError> {
    cfg.validate()?;
    let model = battery_model(cfg);
    let spec = battery_spec(cfg, &model)?;
    let nominal: Vec<BatteryState> = cfg.times.iter().map(|&t| model.nominal_state(t)).collect();
    let times = cfg.times.clone();
    let oracle = |xi: &[f64]| -> chaosamp::Result<Vec<f64>> {
        times
            .iter()
            .zip(&nominal)
            .map(|(&t, nom)| model.rul_with_nominal(xi, t, nom).map(|r| r.rul))
            .collect()
    };
    run_timed(cfg, ExperimentKind::Battery.name(), &[spec], &oracle)
}

/// Surrogate against direct simulation for the battery RUL distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct PdfReport {
    pub strategy: String,
    pub n_train: usize,
    pub time: f64,
    pub ks: f64,
    /// `(bin centre, surrogate density, direct density)`.
    pub bins: Vec<(f64, f64, f64)>,
    pub surrogate_samples: usize,
    pub direct_samples: usize,
}

impl PdfReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "# strategy = {} n = {} t = {} ks = {} surrogate_samples = {} direct_samples = {}",
            self.strategy, self.n_train, self.time, self.ks, self.surrogate_samples, self.direct_samples
        )?;
        writeln!(w, "rul,surrogate_density,direct_density")?;
        for (c, s, m) in &self.bins {
            writeln!(w, "{c},{s},{m}")?;
        }
        Ok(())
    }
}

/// Trains one surrogate at the first prediction time and compares its RUL
/// distribution with direct simulation on independent draws.
pub fn battery_pdf(cfg: &ExperimentConfig) -> Result<PdfReport, BenchError> {
    cfg.validate()?;
    let exp = ExperimentKind::Battery.name();
    let model = battery_model(cfg);
    let spec = battery_spec(cfg, &model)?;
    let t_p = cfg.times[0];
    let nominal = model.nominal_state(t_p);
    let n = cfg.sample_counts(spec.len())[0];
    let strategy = cfg.pdf_strategy;
    let seed = replicate_seed(cfg.seed, exp, &format!("pdf/{}", strategy.name()), n, 0);
    let rul = |xi: &[f64]| model.rul_with_nominal(xi, t_p, &nominal).map(|r| r.rul);

    let (surrogate, direct) = with_pool(cfg.workers, || -> chaosamp::Result<(Vec<f64>, Vec<f64>)> {
        let samples = draw_design(cfg, &spec, strategy, n, seed)?;
        let psi = spec.measurement_matrix(&samples.points)?;
        let u = evaluate_points(&samples.points, 1, &|xi| Ok(vec![rul(xi)?]))?;
        let c = fit(&psi, Some(&samples.weights), &u.column(0).into_owned())?.coefficients;

        let pts = sample_standard(&spec, cfg.pdf_samples, stream_seed(cfg.seed, exp, "pdf-surrogate", 0));
        let surrogate: Vec<f64> = (0..pts.len())
            .into_par_iter()
            .map(|i| {
                let xi: Vec<f64> = pts.points.row(i).iter().copied().collect();
                spec.eval_basis_row(&xi).dot(&c)
            })
            .collect();
        let direct_pts = sample_standard(&spec, cfg.pdf_samples, stream_seed(cfg.seed, exp, "pdf-direct", 0));
        let direct = evaluate_points(&direct_pts.points, 1, &|xi| Ok(vec![rul(xi)?]))?;
        Ok((surrogate, direct.column(0).iter().copied().collect()))
    })??;

    let ks = ks_distance(&surrogate, &direct);
    let lo = direct.iter().chain(&surrogate).copied().fold(f64::INFINITY, f64::min);
    let hi = direct.iter().chain(&surrogate).copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = histogram_pair(&surrogate, &direct, lo, hi, cfg.pdf_bins);
    Ok(PdfReport {
        strategy: strategy.name(),
        n_train: n,
        time: t_p,
        ks,
        bins,
        surrogate_samples: surrogate.len(),
        direct_samples: direct.len(),
    })
}

fn histogram_pair(a: &[f64], b: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<(f64, f64, f64)> {
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let count = |xs: &[f64]| {
        let mut h = vec![0usize; bins];
        for &x in xs {
            let k = (((x - lo) / width) as usize).min(bins - 1);
            h[k] += 1;
        }
        h
    };
    let (ha, hb) = (count(a), count(b));
    let (na, nb) = (a.len().max(1) as f64, b.len().max(1) as f64);
    (0..bins)
        .map(|k| {
            (
                lo + (k as f64 + 0.5) * width,
                ha[k] as f64 / (na * width),
                hb[k] as f64 / (nb * width),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_densities_integrate_to_one() {
        let a: Vec<f64> = (0..100).map(|i| i as f64 / 10.0).collect();
        let bins = histogram_pair(&a, &a, 0.0, 9.9, 7);
        let width = 9.9 / 7.0;
        let total: f64 = bins.iter().map(|b| b.1 * width).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
