//! Subcommand implementations.
//!
//! Each command reads a configuration (or the metadata record of an
//! earlier run, which parses as one), writes its outputs under a
//! single directory, and drops a metadata record there so the run can
//! be reproduced exactly.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::sync::atomic::{AtomicUsize, Ordering};

use phlink_core::Trace;
use phlink_core::estimation::{FitRequest, fit};
use phlink_core::link::run_link;
use phlink_core::ph::{conc_to_ph, ph_to_conc};
use phlink_core::signal::{simulate, simulate_ramp};

use crate::config::{
    DetectorName, ExperimentConfig, Resolved, SchemeName, load_config, resolve,
    resolve_with_scheme,
};
use crate::error::CliError;
use crate::io::{TraceKind, load_trace, save_trace};
use crate::metadata::{resolved_config, write_metadata};
use crate::report::{
    BerRow, SweepRow, ber_table, sweep_summary_table, write_ber_csv, write_fit_toml,
    write_histogram_csv, write_normal_csv, write_params_csv, write_residuals_csv,
    write_sweep_csv, write_sweep_summary_csv, write_symbols_csv, write_thresholds_csv,
};

fn output_dir(flag: Option<&Path>, config: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let dir = flag
        .map(Path::to_path_buf)
        .or_else(|| config.run.output_dir.clone())
        .ok_or_else(|| {
            CliError::Config("no output directory: pass --out or set run.output_dir".into())
        })?;
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn synthesize(r: &Resolved) -> Result<Trace, CliError> {
    let sched = r.schedule()?;
    let grid = r.grid()?;
    Ok(match &r.ramp {
        None => simulate(&sched, &r.start, grid, r.noise_seed)?,
        Some(ramp) => simulate_ramp(&sched, ramp, grid, r.noise_seed)?,
    })
}

/// Cuts the dark-adaptation margin off a full-run trace, leaving
/// exactly the symbol span.
fn symbol_span(trace: &Trace, r: &Resolved) -> Result<Trace, CliError> {
    let start = r.symbol_start();
    let end = start + r.truth.len() * r.cfg.samples_per_symbol();
    Ok(trace.slice(start, end)?)
}

pub fn cmd_simulate(
    config_path: &Path,
    out: Option<&Path>,
    kind: TraceKind,
    seed: Option<u64>,
    argv: &[String],
) -> Result<PathBuf, CliError> {
    let mut config = load_config(config_path)?;
    if let Some(s) = seed {
        config.run.seed = s;
    }
    let r = resolve(&config)?;
    let dir = output_dir(out, &config)?;
    let trace = synthesize(&r)?;
    let trace_path = dir.join("trace.csv");
    save_trace(&trace, &trace_path, kind)?;
    write_metadata(
        &resolved_config(&config, &r),
        "simulate",
        argv,
        &dir.join("metadata.toml"),
    )?;
    println!(
        "{}: {} samples at {} s spacing ({} margin + {} symbol samples, {} symbols)",
        trace_path.display(),
        trace.len(),
        trace.dt(),
        r.margin_samples,
        r.truth.len() * r.cfg.samples_per_symbol(),
        r.truth.len(),
    );
    Ok(trace_path)
}

pub fn cmd_fit(
    trace_path: &Path,
    config_path: &Path,
    out: Option<&Path>,
    kind: TraceKind,
    window_start: Option<usize>,
    window_len: Option<usize>,
    argv: &[String],
) -> Result<(), CliError> {
    let config = load_config(config_path)?;
    let r = resolve(&config)?;
    let dir = output_dir(out, &config)?;
    let trace = load_trace(trace_path, kind)?;

    let n = r.truth.len();
    let s = window_start.unwrap_or(0);
    let l = window_len.unwrap_or_else(|| n.saturating_sub(s));
    if l == 0 || s + l > n {
        return Err(CliError::Config(format!(
            "fit window [{s}, {}) exceeds the {n}-symbol sequence",
            s + l
        )));
    }
    let bits = &r.truth[s..s + l];
    let wstart = r.symbol_start() + s * r.cfg.samples_per_symbol();

    let req = FitRequest::new(&trace, bits, wstart, &r.cfg)?;
    let result = fit(&req)?;

    write_fit_toml(&dir.join("fit.toml"), &result)?;
    write_residuals_csv(&dir.join("residuals.csv"), &trace, wstart, &result.residuals)?;
    write_histogram_csv(&dir.join("residual_hist.csv"), &result.residuals)?;
    write_normal_csv(&dir.join("residual_normal.csv"), &result.residuals)?;
    write_metadata(
        &resolved_config(&config, &r),
        "fit",
        argv,
        &dir.join("metadata.toml"),
    )?;

    let p = &result.params;
    println!(
        "tau0 = {:.4} min  tau1 = {:.4} min  c0_inf = {:.4}  c1_inf = {:.4}  drift = {:.3e}/min",
        p.tau_dark() / 60.0,
        p.tau_light() / 60.0,
        p.eq_dark(),
        p.eq_light(),
        p.drift_slope() * 60.0,
    );
    println!(
        "c_init = {:.4}  sigma = {:.3e}  objective = {:.6e} over {} samples ({})",
        p.initial_conc(),
        result.objective.sqrt(),
        result.objective,
        result.residuals.len(),
        if result.converged { "converged" } else { "iteration limit" },
    );
    Ok(())
}

const MATRIX_SCHEMES: [SchemeName; 3] = [
    SchemeName::Fixed,
    SchemeName::PilotBased,
    SchemeName::DataAided,
];
const MATRIX_DETECTORS: [DetectorName; 3] = [
    DetectorName::Threshold,
    DetectorName::Ml,
    DetectorName::MlGenie,
];

pub struct MatrixRun {
    pub scheme: SchemeName,
    pub detector: DetectorName,
    pub report: phlink_core::link::LinkReport,
}

/// Runs every scheme-detector pair from one configuration. Each pilot
/// arrangement transmits its own sequence, but all arrangements share
/// the noise stream, so the comparison uses common random numbers.
pub fn detection_matrix(
    config: &ExperimentConfig,
) -> Result<(Vec<MatrixRun>, Vec<(SchemeName, Trace)>), CliError> {
    let r_pilot = resolve_with_scheme(config, SchemeName::PilotBased)?;
    let r_preamble = resolve_with_scheme(config, SchemeName::DataAided)?;
    let t_pilot = synthesize(&r_pilot)?;
    let t_preamble = synthesize(&r_preamble)?;
    let mut runs = Vec::new();
    for scheme in MATRIX_SCHEMES {
        let (r, full) = match scheme {
            SchemeName::PilotBased => (resolve_with_scheme(config, scheme)?, &t_pilot),
            // fixed transmits the same preamble arrangement
            _ => (resolve_with_scheme(config, scheme)?, &t_preamble),
        };
        let span = symbol_span(full, &r)?;
        for detector in MATRIX_DETECTORS {
            let report = run_link(&span, &r.truth, &r.cfg, &r.plan, detector.to_core())?;
            runs.push(MatrixRun {
                scheme,
                detector,
                report,
            });
        }
    }
    Ok((
        runs,
        vec![
            (SchemeName::PilotBased, t_pilot),
            (SchemeName::DataAided, t_preamble),
        ],
    ))
}

fn write_run_files(dir: &Path, run: &MatrixRun) -> Result<(), CliError> {
    let tag = format!("{}_{}", run.scheme, run.detector);
    write_symbols_csv(&dir.join(format!("symbols_{tag}.csv")), &run.report)?;
    if run.report.param_history.is_empty() {
        write_thresholds_csv(&dir.join(format!("thresholds_{tag}.csv")), &run.report)?;
    } else {
        write_params_csv(&dir.join(format!("params_{tag}.csv")), &run.report)?;
    }
    Ok(())
}

pub fn cmd_detect(
    trace_path: Option<&Path>,
    config_path: &Path,
    out: Option<&Path>,
    kind: TraceKind,
    detector: Option<DetectorName>,
    all: bool,
    argv: &[String],
) -> Result<Vec<BerRow>, CliError> {
    let config = load_config(config_path)?;
    let dir = output_dir(out, &config)?;

    let rows = if all {
        if trace_path.is_some() {
            return Err(CliError::Config(
                "--all simulates its own traces; drop --trace".into(),
            ));
        }
        let (runs, traces) = detection_matrix(&config)?;
        for (scheme, trace) in &traces {
            let name = match scheme {
                SchemeName::PilotBased => "trace_pilot.csv",
                _ => "trace_preamble.csv",
            };
            save_trace(trace, &dir.join(name), kind)?;
        }
        let mut rows = Vec::with_capacity(runs.len());
        for run in &runs {
            write_run_files(&dir, run)?;
            rows.push(BerRow {
                scheme: run.scheme,
                detector: run.detector,
                count: run.report.ber,
            });
        }
        // each arrangement materializes its own sequence, so the bits
        // section stays as given; re-running re-derives them identically
        write_metadata(&config, "detect", argv, &dir.join("metadata.toml"))?;
        rows
    } else {
        let trace_path = trace_path.ok_or_else(|| {
            CliError::Config("pass --trace, or --all to simulate internally".into())
        })?;
        let r = resolve(&config)?;
        let detector = detector.unwrap_or(config.link.detector);
        let full = load_trace(trace_path, kind)?;
        let span = symbol_span(&full, &r)?;
        let report = run_link(&span, &r.truth, &r.cfg, &r.plan, detector.to_core())?;
        let run = MatrixRun {
            scheme: config.link.scheme,
            detector,
            report,
        };
        write_run_files(&dir, &run)?;
        write_metadata(
            &resolved_config(&config, &r),
            "detect",
            argv,
            &dir.join("metadata.toml"),
        )?;
        vec![BerRow {
            scheme: run.scheme,
            detector,
            count: run.report.ber,
        }]
    };

    write_ber_csv(&dir.join("ber.csv"), &rows)?;
    print!("{}", ber_table(&rows));
    Ok(rows)
}

pub fn cmd_convert(
    input: Option<&Path>,
    output: Option<&Path>,
    from: TraceKind,
    to: TraceKind,
    value: Option<f64>,
) -> Result<(), CliError> {
    if let Some(v) = value {
        let conc = match from {
            TraceKind::Conc => {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(CliError::Data(format!(
                        "concentration must be positive and finite, got {v}"
                    )));
                }
                v
            }
            TraceKind::Ph => ph_to_conc(v).map_err(|e| CliError::Data(e.to_string()))?,
        };
        let out = match to {
            TraceKind::Conc => conc,
            TraceKind::Ph => conc_to_ph(conc).map_err(|e| CliError::Data(e.to_string()))?,
        };
        println!("{out:.16e}");
        return Ok(());
    }
    let (input, output) = match (input, output) {
        (Some(i), Some(o)) => (i, o),
        _ => {
            return Err(CliError::Config(
                "file conversion needs --input and --output (or use --value)".into(),
            ));
        }
    };
    let trace = load_trace(input, from)?;
    save_trace(&trace, output, to)?;
    println!(
        "{}: {} samples as {}",
        output.display(),
        trace.len(),
        to.column()
    );
    Ok(())
}

pub fn cmd_sweep(
    config_path: &Path,
    out: Option<&Path>,
    seeds: u64,
    sigmas: Option<&[f64]>,
    jobs: Option<usize>,
    argv: &[String],
) -> Result<(), CliError> {
    let base = load_config(config_path)?;
    resolve(&base)?;
    let dir = output_dir(out, &base)?;
    if seeds == 0 {
        return Err(CliError::Config("--seeds must be at least 1".into()));
    }
    let sigma_list: Vec<f64> = match sigmas {
        Some(list) => {
            for &s in list {
                if !(s >= 0.0) {
                    return Err(CliError::Config(format!("sigma must be non-negative, got {s}")));
                }
            }
            list.to_vec()
        }
        None => vec![base.channel.sigma],
    };

    let tasks: Vec<(f64, u64)> = sigma_list
        .iter()
        .flat_map(|&sigma| (0..seeds).map(move |seed| (sigma, seed)))
        .collect();

    let workers = jobs
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
        .clamp(1, tasks.len());

    // workers pull task indices; results land in task order, so the
    // aggregation is deterministic regardless of scheduling
    let cursor = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Vec<SweepRow>>>> = Mutex::new(vec![None; tasks.len()]);
    let failure: Mutex<Option<CliError>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                loop {
                    let idx = cursor.fetch_add(1, Ordering::Relaxed);
                    if idx >= tasks.len() || failure.lock().unwrap().is_some() {
                        return;
                    }
                    let (sigma, seed) = tasks[idx];
                    let mut config = base.clone();
                    config.channel.sigma = sigma;
                    if let Some(end) = &mut config.channel_end {
                        end.sigma = sigma;
                    }
                    config.run.seed = seed;
                    match detection_matrix(&config) {
                        Ok((runs, _)) => {
                            let rows = runs
                                .iter()
                                .map(|r| SweepRow {
                                    sigma,
                                    seed,
                                    scheme: r.scheme,
                                    detector: r.detector,
                                    count: r.report.ber,
                                })
                                .collect();
                            results.lock().unwrap()[idx] = Some(rows);
                        }
                        Err(e) => {
                            let mut slot = failure.lock().unwrap();
                            if slot.is_none() {
                                *slot = Some(e);
                            }
                        }
                    }
                }
            });
        }
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }

    let rows: Vec<SweepRow> = results
        .into_inner()
        .unwrap()
        .into_iter()
        .flat_map(|r| r.expect("every task ran"))
        .collect();

    write_sweep_csv(&dir.join("sweep.csv"), &rows)?;
    write_sweep_summary_csv(&dir.join("sweep_summary.csv"), &rows)?;
    write_metadata(&base, "sweep", argv, &dir.join("metadata.toml"))?;
    print!("{}", sweep_summary_table(&rows));
    Ok(())
}
