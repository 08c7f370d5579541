//! Reproducible estimation studies with CSV output.
//!
//! Both studies derive every random stream from a master seed and the trial
//! coordinates, run sequentially, and format floats with 12 significant
//! digits, so a fixed seed yields byte-identical files. Wall-clock times are
//! written as 0 unless timing is requested.

mod config;
mod fig1;
mod fig2;
mod metrics;

pub use config::KeyValues;
pub use fig1::{estimate_boltzmann, run_fig1, BoltzmannEstimate, BoltzmannMethod, Fig1Config, Fig1Result, Fig1Summary};
pub use fig2::{draw_mixing, run_fig2, Fig2Config, Fig2Result, Fig2Summary, Fig2Trial};
pub use metrics::{param_error_boltzmann, poe_alignment, poe_alignment_error, spurious_norm_ratio, Alignment};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{invalid, Result};
use crate::optimize::{OptimConfig, OptimStatus};

pub const FIG1_HEADER: &str = "method,sample_size,trial,error,status,wall_ms";
pub const FIG1_SUMMARY_HEADER: &str = "method,sample_size,n_ok,mean_error,log10_mean_error,mean_log10_error";
pub const FIG2_HEADER: &str = "group_size,trial,error,status,wall_ms";
pub const FIG2_SUMMARY_HEADER: &str = "group_size,n_ok,median_error,q1_error,q3_error,median_spurious_ratio";

/// One fitted trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    /// Method name, or the group size for the boosting study.
    pub label: String,
    pub sample_size: Option<usize>,
    pub trial: usize,
    pub error: f64,
    /// Optimizer status, or `error: ...` if the fit could not run.
    pub status: String,
    pub wall_ms: u64,
}

impl TrialRecord {
    /// Converged with a finite error; only such trials enter summaries.
    pub fn is_ok(&self) -> bool {
        self.status == OptimStatus::Converged.as_str() && self.error.is_finite()
    }
}

pub(crate) fn apply_optim(kv: &mut KeyValues, optim: &mut OptimConfig) -> Result<()> {
    config::set(kv, "max_iterations", &mut optim.max_iterations)?;
    config::set(kv, "gradient_tolerance", &mut optim.gradient_tolerance)?;
    config::set(kv, "memory", &mut optim.memory)?;
    config::set(kv, "restarts", &mut optim.restarts)?;
    config::set(kv, "init_scale", &mut optim.init_scale)?;
    Ok(())
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Linearly interpolated quantile of the sorted values.
pub(crate) fn quantile(v: &[f64], q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (pos - lo as f64) * (s[hi] - s[lo])
}

pub(crate) fn median(v: &[f64]) -> f64 {
    quantile(v, 0.5)
}

/// 12 significant digits in scientific notation; `nan` for NaN.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.11e}")
    }
}

fn csv_field(s: &str) -> String {
    s.replace([',', '\n'], ";")
}

pub fn fig1_csv(result: &Fig1Result) -> String {
    let mut out = format!("{FIG1_HEADER}\n");
    for r in &result.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.label,
            r.sample_size.unwrap_or(0),
            r.trial,
            format_float(r.error),
            csv_field(&r.status),
            r.wall_ms
        );
    }
    out
}

pub fn fig1_summary_csv(result: &Fig1Result) -> String {
    let mut out = format!("{FIG1_SUMMARY_HEADER}\n");
    for s in &result.summary {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.method,
            s.sample_size,
            s.n_ok,
            format_float(s.mean_error),
            format_float(s.log10_mean_error),
            format_float(s.mean_log10_error)
        );
    }
    out
}

pub fn fig2_csv(result: &Fig2Result) -> String {
    let mut out = format!("{FIG2_HEADER}\n");
    for t in &result.trials {
        let r = &t.record;
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            t.group_size,
            r.trial,
            format_float(r.error),
            csv_field(&r.status),
            r.wall_ms
        );
    }
    out
}

pub fn fig2_summary_csv(result: &Fig2Result) -> String {
    let mut out = format!("{FIG2_SUMMARY_HEADER}\n");
    for s in &result.summary {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.group_size,
            s.n_ok,
            format_float(s.median_error),
            format_float(s.q1_error),
            format_float(s.q3_error),
            format_float(s.median_spurious_ratio)
        );
    }
    out
}

/// Per-trial expert norms: `group_size,trial,expert,norm,matched`.
pub fn fig2_norms_csv(result: &Fig2Result) -> String {
    let mut out = String::from("group_size,trial,expert,norm,spurious_ratio\n");
    for t in &result.trials {
        for (k, b) in t.experts.iter().enumerate() {
            let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                t.group_size,
                t.record.trial,
                k,
                format_float(norm),
                format_float(t.spurious_ratio)
            );
        }
    }
    out
}

pub fn fig1_plot_script(result: &Fig1Result) -> String {
    let methods: Vec<&str> = result.config.methods.iter().map(|m| m.as_str()).collect();
    format!(
        "# gnuplot: mean log10 squared parameter error against log10 sample size
set datafile separator ','
set key top right
set xlabel 'log10 T_d'
set ylabel 'mean log10 squared error'
plot for [m in \"{}\"] 'fig1_summary.csv' skip 1 using (log10($2)):(strcol(1) eq m ? $6 : 1/0) with linespoints title m
",
        methods.join(" ")
    )
}

pub fn fig2_plot_script() -> String {
    "# gnuplot: alignment error per number of experts learned per stage
set datafile separator ','
set style data boxplot
set style boxplot outliers pointtype 7
set xlabel 'experts per stage'
set ylabel 'alignment error'
plot 'fig2.csv' skip 1 using (1):3:(0.5):1 notitle
"
    .to_string()
}

fn write_files(dir: &Path, files: &[(&str, String)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| invalid(format!("cannot create {}: {e}", dir.display())))?;
    files
        .iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| invalid(format!("cannot write {}: {e}", path.display())))?;
            Ok(path)
        })
        .collect()
}

/// Writes `fig1.csv`, `fig1_summary.csv` and `fig1.gp` into `dir`.
pub fn write_fig1(result: &Fig1Result, dir: &Path) -> Result<Vec<PathBuf>> {
    write_files(
        dir,
        &[
            ("fig1.csv", fig1_csv(result)),
            ("fig1_summary.csv", fig1_summary_csv(result)),
            ("fig1.gp", fig1_plot_script(result)),
        ],
    )
}

/// Writes `fig2.csv`, `fig2_summary.csv`, `fig2_norms.csv` and `fig2.gp` into `dir`.
pub fn write_fig2(result: &Fig2Result, dir: &Path) -> Result<Vec<PathBuf>> {
    write_files(
        dir,
        &[
            ("fig2.csv", fig2_csv(result)),
            ("fig2_summary.csv", fig2_summary_csv(result)),
            ("fig2_norms.csv", fig2_norms_csv(result)),
            ("fig2.gp", fig2_plot_script()),
        ],
    )
}
