use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use bregest::bregman::SPair;
use bregest::estimators::{boosting_fit, noise_sample_size, BoostingConfig};
use bregest::experiments::{
    estimate_boltzmann, format_float, param_error_boltzmann, poe_alignment, run_fig1, run_fig2, write_fig1,
    write_fig2, BoltzmannMethod, Fig1Config, Fig2Config, KeyValues,
};
use bregest::models::{gaussian_noise_from_sample, BoltzmannParams, NoiseModel, DEFAULT_SMOOTHING};
use bregest::optimize::OptimConfig;
use bregest::sampling::{sample_binary_states, sample_ica, RngStream};
use bregest::validation;
use bregest::Sample;

/// Bregman-divergence estimation of unnormalized models.
#[derive(Parser, Debug)]
#[command(name = "bregest", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Master seed for every random stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// File with `key = value` lines; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Record wall-clock times (otherwise written as 0).
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Boltzmann machine error against sample size.
    Fig1 {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        /// Comma-separated sample sizes.
        #[arg(long)]
        sample_sizes: Option<String>,
        #[arg(long)]
        nu: Option<f64>,
        /// Comma-separated subset of nce_bernoulli, nce_mixture, pseudolikelihood, ratio_matching.
        #[arg(long)]
        methods: Option<String>,
        #[arg(long)]
        param_std: Option<f64>,
    },
    /// Boosted ICA error per number of experts learned per stage.
    Fig2 {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        sample_size: Option<usize>,
        #[arg(long)]
        total_experts: Option<usize>,
        /// Comma-separated group sizes.
        #[arg(long)]
        group_sizes: Option<String>,
        #[arg(long)]
        nu: Option<f64>,
    },
    /// Draw a data set and its true parameters as CSV.
    Sample {
        #[arg(long, value_enum)]
        model: ModelKind,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 5000)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Standard deviation of Boltzmann parameters.
        #[arg(long, default_value_t = 0.5)]
        param_std: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Fit a model to a CSV data file.
    Fit {
        #[arg(long, value_enum)]
        model: ModelKind,
        /// Boltzmann: nce, nce_mixture, pseudolikelihood, ratio_matching. ICA: nce.
        #[arg(long, default_value = "nce")]
        estimator: String,
        #[arg(long)]
        data: PathBuf,
        /// True parameters written by `sample`; reports the estimation error.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Fail when the error against `--truth` exceeds this value.
        #[arg(long)]
        max_error: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10.0)]
        nu: f64,
        /// ICA: total number of experts.
        #[arg(long)]
        experts: Option<usize>,
        /// ICA: experts learned per stage (defaults to all at once).
        #[arg(long)]
        group_size: Option<usize>,
        /// Where to write the estimated parameters.
        #[arg(long, default_value = "out/estimate.csv")]
        out: PathBuf,
    },
    /// Run the invariant and oracle suites and print a pass/fail table.
    Validate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Boltzmann,
    Ica,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn settings(common: &Common, overrides: &[(&str, Option<String>)]) -> Result<KeyValues> {
    let mut kv = match &common.config {
        Some(path) => KeyValues::load(path)?,
        None => KeyValues::default(),
    };
    if let Some(seed) = common.seed {
        kv.insert("seed", seed);
    }
    for (key, value) in overrides {
        if let Some(v) = value {
            kv.insert(key, v);
        }
    }
    Ok(kv)
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Fig1 {
            common,
            trials,
            n,
            sample_sizes,
            nu,
            methods,
            param_std,
        } => {
            let mut kv = settings(
                &common,
                &[
                    ("trials", trials.map(|v| v.to_string())),
                    ("n", n.map(|v| v.to_string())),
                    ("sample_sizes", sample_sizes),
                    ("nu", nu.map(|v| v.to_string())),
                    ("methods", methods),
                    ("param_std", param_std.map(|v| v.to_string())),
                ],
            )?;
            let mut config = Fig1Config::default();
            config.apply(&mut kv)?;
            kv.finish()?;
            let result = run_fig1(&config, common.timing)?;
            for s in &result.summary {
                println!(
                    "{:<17} T_d={:<6} ok={:<3} mean_error={}",
                    s.method,
                    s.sample_size,
                    s.n_ok,
                    format_float(s.mean_error)
                );
            }
            report(&write_fig1(&result, &common.out)?);
        }
        Command::Fig2 {
            common,
            trials,
            n,
            sample_size,
            total_experts,
            group_sizes,
            nu,
        } => {
            let mut kv = settings(
                &common,
                &[
                    ("trials", trials.map(|v| v.to_string())),
                    ("n", n.map(|v| v.to_string())),
                    ("sample_size", sample_size.map(|v| v.to_string())),
                    ("total_experts", total_experts.map(|v| v.to_string())),
                    ("group_sizes", group_sizes),
                    ("nu", nu.map(|v| v.to_string())),
                ],
            )?;
            let mut config = Fig2Config::default();
            config.apply(&mut kv)?;
            kv.finish()?;
            let result = run_fig2(&config, common.timing)?;
            for s in &result.summary {
                println!(
                    "m={:<2} ok={:<3} median_error={} spurious_ratio={}",
                    s.group_size,
                    s.n_ok,
                    format_float(s.median_error),
                    format_float(s.median_spurious_ratio)
                );
            }
            report(&write_fig2(&result, &common.out)?);
        }
        Command::Sample {
            model,
            n,
            count,
            seed,
            param_std,
            out,
        } => {
            let mut rng = RngStream::derive(seed, &[3]);
            let (data, truth) = match model {
                ModelKind::Boltzmann => {
                    let params = BoltzmannParams::random(n, param_std, &mut rng).normalized()?;
                    let x = sample_binary_states(n, |s| params.energy(s), &mut rng, count)?;
                    (x, params.to_vec())
                }
                ModelKind::Ica => {
                    let mixing = DMatrix::from_fn(n, n, |_, _| rng.standard_normal());
                    let x = sample_ica(&mixing, &mut rng, count)?;
                    (x, mixing.iter().copied().collect())
                }
            };
            std::fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
            let data_path = out.join("data.csv");
            let truth_path = out.join("truth.csv");
            write_rows(&data_path, data.dim(), &data.rows())?;
            write_rows(&truth_path, truth.len(), &[truth])?;
            report(&[data_path, truth_path]);
        }
        Command::Fit {
            model,
            estimator,
            data,
            truth,
            max_error,
            seed,
            nu,
            experts,
            group_size,
            out,
        } => {
            let x = Sample::from_rows(&read_rows(&data)?)?;
            let mut rng = RngStream::derive(seed, &[4]);
            let optim = OptimConfig::default();
            let (theta, status, error) = match model {
                ModelKind::Boltzmann => {
                    let method = match estimator.as_str() {
                        "nce" => BoltzmannMethod::NceBernoulli,
                        other => other.parse()?,
                    };
                    let est = estimate_boltzmann(method, &x.compress(), nu, 4, &optim, &mut rng)?;
                    if !method.identifies_c() {
                        println!("c not identified by {method}; filled with -ln Z");
                    }
                    let error = match &truth {
                        Some(path) => {
                            let t = read_rows(path)?.concat();
                            Some(param_error_boltzmann(&est.params, &BoltzmannParams::from_vec(x.dim(), &t)?)?)
                        }
                        None => None,
                    };
                    (est.params.to_vec(), est.optim.status, error)
                }
                ModelKind::Ica => {
                    if estimator != "nce" {
                        bail!("the ICA model is fitted with `nce` only");
                    }
                    let n = x.dim();
                    let total = experts.unwrap_or(n);
                    let noise = gaussian_noise_from_sample(&x)?;
                    let y = noise.sample(&mut rng, noise_sample_size(nu, x.len()));
                    let config = BoostingConfig {
                        total_experts: total,
                        group_size: group_size.unwrap_or(total),
                        nu,
                        smoothing_eps: DEFAULT_SMOOTHING,
                        optim,
                    };
                    let fit = boosting_fit(&x, &noise, &y, &SPair::noise_contrastive(), &config, &mut rng)?;
                    let error = match &truth {
                        Some(path) => {
                            let t = read_rows(path)?.concat();
                            if t.len() != n * n {
                                bail!("truth file must hold an {n}×{n} mixing matrix");
                            }
                            Some(poe_alignment(&fit.params.experts, &DMatrix::from_column_slice(n, n, &t))?.error)
                        }
                        None => None,
                    };
                    let mut theta = fit.params.experts.concat();
                    theta.push(fit.params.c);
                    (theta, fit.status(), error)
                }
            };
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            }
            write_rows(&out, theta.len(), &[theta])?;
            println!("status {status}");
            println!("wrote {}", out.display());
            if let Some(e) = error {
                println!("error {}", format_float(e));
                if let Some(limit) = max_error {
                    if e.is_nan() || e > limit {
                        bail!("estimation error {e} exceeds {limit}");
                    }
                }
            }
        }
        Command::Validate => {
            let rows = validation::run_all();
            let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
            let mut failed = 0;
            for r in &rows {
                let verdict = if r.passed { "PASS" } else { "FAIL" };
                println!("{verdict}  {:<width$}  {}", r.name, r.detail);
                failed += usize::from(!r.passed);
            }
            println!("{} checks, {failed} failed", rows.len());
            if failed > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn write_rows(path: &Path, width: usize, rows: &[Vec<f64>]) -> Result<()> {
    let mut text = String::new();
    for row in rows {
        debug_assert_eq!(row.len(), width);
        let fields: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
        text.push_str(&fields.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Numeric CSV rows; a non-numeric first line is treated as a header.
fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue,
            Err(e) => bail!("{}:{}: {e}", path.display(), i + 1),
        }
    }
    if rows.is_empty() {
        bail!("{} holds no data rows", path.display());
    }
    Ok(rows)
}
