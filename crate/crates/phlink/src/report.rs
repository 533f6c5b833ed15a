//! Plot-ready output files and the error-rate table.
//!
//! Everything is comma-separated text with a header row; floats carry
//! 17 significant digits so downstream tooling sees exactly what the
//! run computed.

use std::fmt::Write as _;
use std::path::Path;

use phlink_core::link::{BerCount, LinkReport, SymbolDetail};
use phlink_core::params::SECONDS_PER_MINUTE;
use phlink_core::{ChannelParams, Trace};

use crate::config::{DetectorName, SchemeName};
use crate::error::CliError;

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn f(x: f64) -> String {
    format!("{x:.16e}")
}

fn bit(b: bool) -> char {
    if b { '1' } else { '0' }
}

/// Per-symbol diagnostics: decisions next to the quantity that made
/// them (both maximum-likelihood costs, or the slope metric and the
/// threshold in force).
pub fn write_symbols_csv(path: &Path, report: &LinkReport) -> Result<(), CliError> {
    let mut out =
        String::from("index,truth,decision,pilot,kind,cost_dark,cost_lit,metric,threshold\n");
    for s in &report.symbols {
        let (kind, c0, c1, q, eta) = match s.detail {
            SymbolDetail::Pilot => ("pilot", None, None, None, None),
            SymbolDetail::Ml { cost_dark, cost_lit } => {
                ("ml", Some(cost_dark), Some(cost_lit), None, None)
            }
            SymbolDetail::Threshold { metric, threshold } => {
                ("threshold", None, None, Some(metric), Some(threshold))
            }
        };
        let opt = |v: Option<f64>| v.map(f).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{kind},{},{},{},{}",
            s.index,
            bit(s.truth),
            bit(s.decision),
            bit(s.pilot),
            opt(c0),
            opt(c1),
            opt(q),
            opt(eta),
        )
        .unwrap();
    }
    write_file(path, &out)
}

fn params_row(p: &ChannelParams) -> String {
    [
        p.tau_dark() / SECONDS_PER_MINUTE,
        p.tau_light() / SECONDS_PER_MINUTE,
        p.eq_dark(),
        p.eq_light(),
        p.drift_slope() * SECONDS_PER_MINUTE,
        p.noise_var().sqrt(),
        p.initial_conc(),
    ]
    .map(f)
    .join(",")
}

/// Parameter-update trajectory of a maximum-likelihood run. Times in
/// minutes, matching the configuration surface.
pub fn write_params_csv(path: &Path, report: &LinkReport) -> Result<(), CliError> {
    let mut out = String::from(
        "effective_from,tau0_min,tau1_min,c0_inf,c1_inf,drift_per_min,sigma,c_init,objective,fallback\n",
    );
    for u in &report.param_history {
        writeln!(
            out,
            "{},{},{},{}",
            u.effective_from,
            params_row(&u.params),
            f(u.objective),
            bit(u.fallback),
        )
        .unwrap();
    }
    write_file(path, &out)
}

/// Threshold trajectory of a threshold-detector run.
pub fn write_thresholds_csv(path: &Path, report: &LinkReport) -> Result<(), CliError> {
    let mut out = String::from("effective_from,threshold,fallback\n");
    for u in &report.threshold_history {
        writeln!(out, "{},{},{}", u.effective_from, f(u.threshold), bit(u.fallback)).unwrap();
    }
    write_file(path, &out)
}

/// One row of the scheme-by-detector error table.
#[derive(Debug, Clone, Copy)]
pub struct BerRow {
    pub scheme: SchemeName,
    pub detector: DetectorName,
    pub count: BerCount,
}

pub fn write_ber_csv(path: &Path, rows: &[BerRow]) -> Result<(), CliError> {
    let mut out = String::from("scheme,detector,errors,total,ber\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.scheme,
            r.detector,
            r.count.errors,
            r.count.total,
            f(r.count.rate()),
        )
        .unwrap();
    }
    write_file(path, &out)
}

/// Aligned error table for the terminal.
pub fn ber_table(rows: &[BerRow]) -> String {
    let mut out = String::from("scheme       detector    errors/payload   BER\n");
    for r in rows {
        writeln!(
            out,
            "{:<12} {:<11} {:>7}/{:<8} {:.3e}",
            r.scheme.to_string(),
            r.detector.to_string(),
            r.count.errors,
            r.count.total,
            r.count.rate(),
        )
        .unwrap();
    }
    out
}

/// Residuals against the trace clock, for scatter plots.
pub fn write_residuals_csv(
    path: &Path,
    trace: &Trace,
    window_start: usize,
    residuals: &[f64],
) -> Result<(), CliError> {
    let mut out = String::from("t_seconds,residual\n");
    for (i, &r) in residuals.iter().enumerate() {
        writeln!(out, "{},{}", f(trace.time_at(window_start + i)), f(r)).unwrap();
    }
    write_file(path, &out)
}

pub const HIST_BINS: usize = 41;
pub const OVERLAY_POINTS: usize = 201;

fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Residual histogram as a two-column density file over mean ± 4 sd.
/// Constant residuals (a perfect fit) give a header-only file.
pub fn write_histogram_csv(path: &Path, residuals: &[f64]) -> Result<(), CliError> {
    let (mean, sd) = moments(residuals);
    if !(sd > 0.0) {
        return write_file(path, "value,density\n");
    }
    let lo = mean - 4.0 * sd;
    let width = 8.0 * sd / HIST_BINS as f64;
    let mut counts = [0usize; HIST_BINS];
    for &r in residuals {
        let k = ((r - lo) / width).floor();
        if (0.0..HIST_BINS as f64).contains(&k) {
            counts[k as usize] += 1;
        }
    }
    let norm = residuals.len() as f64 * width;
    let mut out = String::from("value,density\n");
    for (k, &c) in counts.iter().enumerate() {
        let center = lo + (k as f64 + 0.5) * width;
        writeln!(out, "{},{}", f(center), f(c as f64 / norm)).unwrap();
    }
    write_file(path, &out)
}

/// Normal density fitted to the residual moments, same span as the
/// histogram, for overlay plotting.
pub fn write_normal_csv(path: &Path, residuals: &[f64]) -> Result<(), CliError> {
    let (mean, sd) = moments(residuals);
    if !(sd > 0.0) {
        return write_file(path, "value,density\n");
    }
    let lo = mean - 4.0 * sd;
    let step = 8.0 * sd / (OVERLAY_POINTS - 1) as f64;
    let scale = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
    let mut out = String::from("value,density\n");
    for k in 0..OVERLAY_POINTS {
        let x = lo + k as f64 * step;
        let z = (x - mean) / sd;
        writeln!(out, "{},{}", f(x), f(scale * (-0.5 * z * z).exp())).unwrap();
    }
    write_file(path, &out)
}

/// One sweep observation.
#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub sigma: f64,
    pub seed: u64,
    pub scheme: SchemeName,
    pub detector: DetectorName,
    pub count: BerCount,
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<(), CliError> {
    let mut out = String::from("sigma,seed,scheme,detector,errors,total\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            f(r.sigma),
            r.seed,
            r.scheme,
            r.detector,
            r.count.errors,
            r.count.total,
        )
        .unwrap();
    }
    write_file(path, &out)
}

struct SummaryCell {
    sigma: f64,
    scheme: SchemeName,
    detector: DetectorName,
    runs: usize,
    mean: f64,
    /// 1.96 standard errors of the mean.
    ci95_half: f64,
}

fn summarize(rows: &[SweepRow]) -> Vec<SummaryCell> {
    let mut cells: Vec<((u64, SchemeName, DetectorName), Vec<f64>)> = Vec::new();
    for r in rows {
        let key = (r.sigma.to_bits(), r.scheme, r.detector);
        match cells.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r.count.rate()),
            None => cells.push((key, vec![r.count.rate()])),
        }
    }
    cells
        .into_iter()
        .map(|((sigma_bits, scheme, detector), rates)| {
            let n = rates.len() as f64;
            let mean = rates.iter().sum::<f64>() / n;
            let ci95_half = if rates.len() > 1 {
                let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
                1.96 * (var / n).sqrt()
            } else {
                0.0
            };
            SummaryCell {
                sigma: f64::from_bits(sigma_bits),
                scheme,
                detector,
                runs: rates.len(),
                mean,
                ci95_half,
            }
        })
        .collect()
}

/// Mean error rate with a 95% normal confidence half-width per
/// (noise level, scheme, detector) cell, aggregated over seeds in
/// seed order.
pub fn write_sweep_summary_csv(path: &Path, rows: &[SweepRow]) -> Result<(), CliError> {
    let mut out = String::from("sigma,scheme,detector,runs,mean_ber,ci95_half\n");
    for c in summarize(rows) {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            f(c.sigma),
            c.scheme,
            c.detector,
            c.runs,
            f(c.mean),
            f(c.ci95_half),
        )
        .unwrap();
    }
    write_file(path, &out)
}

/// Aligned sweep summary for the terminal.
pub fn sweep_summary_table(rows: &[SweepRow]) -> String {
    let mut out = String::from("sigma      scheme       detector    runs   mean BER    +/-95% CI\n");
    for c in summarize(rows) {
        writeln!(
            out,
            "{:<10.4e} {:<12} {:<11} {:<6} {:<11.3e} {:.3e}",
            c.sigma,
            c.scheme.to_string(),
            c.detector.to_string(),
            c.runs,
            c.mean,
            c.ci95_half,
        )
        .unwrap();
    }
    out
}

#[derive(serde::Serialize)]
struct EstimateSection {
    tau0_min: f64,
    tau1_min: f64,
    c0_inf: f64,
    c1_inf: f64,
    drift_per_min: f64,
    c_init: f64,
    sigma: f64,
}

#[derive(serde::Serialize)]
struct QualitySection {
    objective_msd: f64,
    samples: usize,
    iterations: usize,
    converged: bool,
}

#[derive(serde::Serialize)]
struct FitSummary {
    estimate: EstimateSection,
    quality: QualitySection,
}

/// Fitted parameters and fit quality, in the units of the
/// configuration surface (minutes, standard deviation).
pub fn write_fit_toml(path: &Path, fit: &phlink_core::estimation::FitResult) -> Result<(), CliError> {
    let p = &fit.params;
    let summary = FitSummary {
        estimate: EstimateSection {
            tau0_min: p.tau_dark() / SECONDS_PER_MINUTE,
            tau1_min: p.tau_light() / SECONDS_PER_MINUTE,
            c0_inf: p.eq_dark(),
            c1_inf: p.eq_light(),
            drift_per_min: p.drift_slope() * SECONDS_PER_MINUTE,
            c_init: p.initial_conc(),
            sigma: fit.objective.sqrt(),
        },
        quality: QualitySection {
            objective_msd: fit.objective,
            samples: fit.residuals.len(),
            iterations: fit.iterations,
            converged: fit.converged,
        },
    };
    let text = toml::to_string_pretty(&summary)
        .map_err(|e| CliError::Config(format!("cannot serialize fit report: {e}")))?;
    write_file(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_integrates_to_one() {
        let residuals: Vec<f64> = (0..500).map(|i| ((i * 37) % 101) as f64 / 101.0 - 0.5).collect();
        let dir = std::env::temp_dir();
        let path = dir.join(format!("phlink-hist-{}.csv", std::process::id()));
        write_histogram_csv(&path, &residuals).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let rows: Vec<(f64, f64)> = text
            .lines()
            .skip(1)
            .map(|l| {
                let mut it = l.split(',');
                (
                    it.next().unwrap().parse().unwrap(),
                    it.next().unwrap().parse().unwrap(),
                )
            })
            .collect();
        assert_eq!(rows.len(), HIST_BINS);
        let width = rows[1].0 - rows[0].0;
        let mass: f64 = rows.iter().map(|(_, d)| d * width).sum();
        // every residual lies within ±4 sd here, so the mass is complete
        assert!((mass - 1.0).abs() < 1e-9, "mass {mass}");
        std::fs::remove_file(path).unwrap();
    }

    #[test]
    fn overlay_peaks_at_the_mean() {
        let residuals: Vec<f64> = (0..200).map(|i| (i as f64 / 40.0).sin() * 0.01).collect();
        let dir = std::env::temp_dir();
        let path = dir.join(format!("phlink-norm-{}.csv", std::process::id()));
        write_normal_csv(&path, &residuals).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), OVERLAY_POINTS + 1);
        std::fs::remove_file(path).unwrap();
    }
}
