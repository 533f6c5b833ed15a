//! End-to-end runs of the compiled binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn phlink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phlink"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = phlink(args);
    assert!(
        out.status.success(),
        "phlink {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

const FIG5_BITS: &str = "10011000101101110101";

fn fig5_channel(sigma: f64) -> String {
    format!(
        "[channel]\ntau0_min = 6.41\ntau1_min = 8.40\nc0_inf = 2.83\nc1_inf = 5.77\ndrift_per_min = -0.0039\nsigma = {sigma}\n"
    )
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn simulate_writes_the_expected_sample_count() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!("{}\n[bits]\npattern = \"{FIG5_BITS}\"\n", fig5_channel(0.0038)),
    );
    let out_dir = tmp.path().join("run");
    ok(&["simulate", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    let text = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    // 20 symbols of 60 s at 1 Hz, plus the header row
    assert_eq!(text.lines().count(), 1201);
    assert!(text.starts_with("t_seconds,conc_umol_per_L\n"));
    assert!(out_dir.join("metadata.toml").exists());
}

#[test]
fn same_seed_reproduces_the_trace_byte_for_byte() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!("{}\n[bits]\nlength = 40\n\n[run]\nseed = 9\n", fig5_channel(0.0071)),
    );
    let d1 = tmp.path().join("a");
    let d2 = tmp.path().join("b");
    ok(&["simulate", "--config", &cfg, "--out", d1.to_str().unwrap()]);
    ok(&["simulate", "--config", &cfg, "--out", d2.to_str().unwrap()]);
    assert_eq!(
        fs::read(d1.join("trace.csv")).unwrap(),
        fs::read(d2.join("trace.csv")).unwrap()
    );
}

#[test]
fn rerun_from_metadata_reproduces_the_trace() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!("{}\n[bits]\nlength = 60\nseed = 3\n\n[run]\nseed = 5\n", fig5_channel(0.0038)),
    );
    let d1 = tmp.path().join("a");
    ok(&["simulate", "--config", &cfg, "--out", d1.to_str().unwrap()]);
    let d2 = tmp.path().join("b");
    ok(&[
        "simulate",
        "--config",
        d1.join("metadata.toml").to_str().unwrap(),
        "--out",
        d2.to_str().unwrap(),
    ]);
    assert_eq!(
        fs::read(d1.join("trace.csv")).unwrap(),
        fs::read(d2.join("trace.csv")).unwrap()
    );
}

#[test]
fn noise_free_trace_equals_the_mean_signal() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!("{}\n[bits]\npattern = \"{FIG5_BITS}\"\n", fig5_channel(0.0)),
    );
    let out_dir = tmp.path().join("run");
    ok(&["simulate", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    let trace =
        phlink::io::load_trace(&out_dir.join("trace.csv"), phlink::io::TraceKind::Conc).unwrap();

    let link = phlink_core::LinkConfig::builder().build().unwrap();
    let params =
        phlink_core::ChannelParams::from_minutes(6.41, 8.40, 2.83, 5.77, -0.0039, 0.0, 2.83)
            .unwrap();
    let bits: Vec<bool> = FIG5_BITS.chars().map(|c| c == '1').collect();
    let sched = phlink_core::IlluminationSchedule::from_bits(&bits, &link).unwrap();
    let grid = phlink_core::SampleGrid::new(0.0, 1.0, 1200).unwrap();
    let mean = phlink_core::signal::mean_signal(&sched, &params, grid).unwrap();
    assert_eq!(trace.samples(), mean.samples());
}

#[test]
fn fit_on_a_noise_free_trace_reports_a_vanishing_objective() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!("{}\n[bits]\npattern = \"{FIG5_BITS}\"\n", fig5_channel(0.0)),
    );
    let sim_dir = tmp.path().join("sim");
    ok(&["simulate", "--config", &cfg, "--out", sim_dir.to_str().unwrap()]);
    let fit_dir = tmp.path().join("fit");
    let out = ok(&[
        "fit",
        "--trace",
        sim_dir.join("trace.csv").to_str().unwrap(),
        "--config",
        &cfg,
        "--out",
        fit_dir.to_str().unwrap(),
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("tau0"));

    let report: toml::Value =
        toml::from_str(&fs::read_to_string(fit_dir.join("fit.toml")).unwrap()).unwrap();
    let objective = report["quality"]["objective_msd"].as_float().unwrap();
    assert!(objective < 1e-8, "objective {objective:e}");
    let tau0 = report["estimate"]["tau0_min"].as_float().unwrap();
    assert!((tau0 - 6.41).abs() < 1e-3, "tau0 {tau0}");
    for name in ["residuals.csv", "residual_hist.csv", "residual_normal.csv"] {
        assert!(fit_dir.join(name).exists(), "{name} missing");
    }
}

fn read_ber_rows(path: &Path) -> Vec<(String, String, usize, usize)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (
                f[0].to_string(),
                f[1].to_string(),
                f[2].parse().unwrap(),
                f[3].parse().unwrap(),
            )
        })
        .collect()
}

#[test]
fn detect_matrix_reports_the_reference_payload_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!("{}\n[bits]\nlength = 120\n\n[run]\nseed = 1\n", fig5_channel(0.0038)),
    );
    let out_dir = tmp.path().join("run");
    let out = ok(&["detect", "--config", &cfg, "--all", "--out", out_dir.to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("pilot-based"), "table missing: {stdout}");

    let rows = read_ber_rows(&out_dir.join("ber.csv"));
    assert_eq!(rows.len(), 9);
    for (scheme, _, _, total) in &rows {
        let expect = match scheme.as_str() {
            // three frames of 40 carry 10 pilots each
            "pilot-based" => 90,
            // one 10-symbol preamble ahead of the payload
            "fixed" | "data-aided" => 110,
            other => panic!("unexpected scheme {other}"),
        };
        assert_eq!(*total, expect, "{scheme}");
    }
    assert!(out_dir.join("trace_pilot.csv").exists());
    assert!(out_dir.join("trace_preamble.csv").exists());
    assert!(out_dir.join("symbols_data-aided_ml.csv").exists());
    assert!(out_dir.join("params_data-aided_ml.csv").exists());
    assert!(out_dir.join("thresholds_pilot-based_threshold.csv").exists());
}

#[test]
fn detect_single_run_decodes_a_saved_trace() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!(
            "{}\n[link]\nscheme = \"data-aided\"\n\n[bits]\nlength = 80\n\n[run]\nseed = 2\n",
            fig5_channel(0.0038)
        ),
    );
    let sim_dir = tmp.path().join("sim");
    ok(&["simulate", "--config", &cfg, "--out", sim_dir.to_str().unwrap()]);
    let det_dir = tmp.path().join("det");
    ok(&[
        "detect",
        "--trace",
        sim_dir.join("trace.csv").to_str().unwrap(),
        "--config",
        sim_dir.join("metadata.toml").to_str().unwrap(),
        "--out",
        det_dir.to_str().unwrap(),
    ]);
    let rows = read_ber_rows(&det_dir.join("ber.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].0, "data-aided");
    assert_eq!(rows[0].1, "ml");
    assert_eq!(rows[0].3, 70);
    // clean channel at this noise level decodes error-free
    assert_eq!(rows[0].2, 0);
}

#[test]
fn convert_turns_ph_six_into_one_micromolar() {
    let out = ok(&["convert", "--from", "ph", "--to", "conc", "--value", "6.0"]);
    let v: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!((v - 1.0).abs() < 1e-12);
}

#[test]
fn convert_round_trips_a_file_through_ph() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!("{}\n[bits]\nlength = 4\n", fig5_channel(0.0038)),
    );
    let sim_dir = tmp.path().join("sim");
    ok(&["simulate", "--config", &cfg, "--out", sim_dir.to_str().unwrap()]);
    let trace_csv = sim_dir.join("trace.csv");
    let as_ph = tmp.path().join("trace_ph.csv");
    let back = tmp.path().join("trace_back.csv");
    ok(&[
        "convert",
        "--input",
        trace_csv.to_str().unwrap(),
        "--output",
        as_ph.to_str().unwrap(),
        "--from",
        "conc",
        "--to",
        "ph",
    ]);
    assert!(fs::read_to_string(&as_ph).unwrap().starts_with("t_seconds,ph\n"));
    ok(&[
        "convert",
        "--input",
        as_ph.to_str().unwrap(),
        "--output",
        back.to_str().unwrap(),
        "--from",
        "ph",
        "--to",
        "conc",
    ]);
    let a = phlink::io::load_trace(&trace_csv, phlink::io::TraceKind::Conc).unwrap();
    let b = phlink::io::load_trace(&back, phlink::io::TraceKind::Conc).unwrap();
    for (x, y) in a.samples().iter().zip(b.samples()) {
        assert!((x - y).abs() <= 1e-12 * x);
    }
}

#[test]
fn sweep_aggregates_over_seeds() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!("{}\n[bits]\nlength = 60\n", fig5_channel(0.0071)),
    );
    let out_dir = tmp.path().join("run");
    let out = ok(&[
        "sweep",
        "--config",
        &cfg,
        "--seeds",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("mean BER"));
    let sweep = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    // 2 seeds, 3 schemes, 3 detectors
    assert_eq!(sweep.lines().count(), 1 + 18);
    let summary = fs::read_to_string(out_dir.join("sweep_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 9);
}

#[test]
fn error_classes_map_to_exit_codes() {
    let tmp = TempDir::new().unwrap();

    // unknown key -> config, exit 2
    let bad_cfg = write_config(
        tmp.path(),
        &format!("{}\n[bits]\nlength = 20\n\n[link]\nsymbol_perod_s = 60.0\n", fig5_channel(0.0)),
    );
    let out = phlink(&["simulate", "--config", &bad_cfg, "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[config]:"));

    // missing file -> io, exit 3
    let out = phlink(&["simulate", "--config", "/nonexistent/config.toml", "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[io]:"));

    // malformed trace -> data, exit 4
    let cfg = write_config(tmp.path(), &format!("{}\n[bits]\nlength = 20\n", fig5_channel(0.0)));
    let junk = tmp.path().join("junk.csv");
    fs::write(&junk, "t_seconds,conc_umol_per_L\n0.0,1.0\n1.0,nope\n").unwrap();
    let out = phlink(&[
        "detect",
        "--trace",
        junk.to_str().unwrap(),
        "--config",
        &cfg,
        "--out",
        tmp.path().join("y").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[data]:"));

    // all-dark pilots leave the lit state untrained -> estimation, exit 5
    let dark_cfg = write_config(
        tmp.path(),
        &format!(
            "{}\n[link]\npilot_pattern = \"0000000000\"\n\n[bits]\nlength = 40\n",
            fig5_channel(0.0038)
        ),
    );
    let sim_dir = tmp.path().join("dark");
    ok(&["simulate", "--config", &dark_cfg, "--out", sim_dir.to_str().unwrap()]);
    let out = phlink(&[
        "detect",
        "--trace",
        sim_dir.join("trace.csv").to_str().unwrap(),
        "--config",
        &dark_cfg,
        "--out",
        tmp.path().join("z").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[estimation]:"));
}

#[test]
fn margin_is_cut_before_detection() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!(
            "{}\n[bits]\nlength = 40\n\n[run]\nseed = 4\nmargin_min = 5.0\n",
            fig5_channel(0.0038)
        ),
    );
    let sim_dir = tmp.path().join("sim");
    ok(&["simulate", "--config", &cfg, "--out", sim_dir.to_str().unwrap()]);
    let text = fs::read_to_string(sim_dir.join("trace.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 300 + 2400);
    let det_dir = tmp.path().join("det");
    ok(&[
        "detect",
        "--trace",
        sim_dir.join("trace.csv").to_str().unwrap(),
        "--config",
        sim_dir.join("metadata.toml").to_str().unwrap(),
        "--out",
        det_dir.to_str().unwrap(),
    ]);
    let rows = read_ber_rows(&det_dir.join("ber.csv"));
    // one frame of 40 with 10 pilots
    assert_eq!(rows[0].3, 30);
    assert_eq!(rows[0].2, 0);
}
