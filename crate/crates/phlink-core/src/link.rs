//! Framed transmission runs: who estimates when, which bits train the
//! estimator, and how bit errors are counted.
//!
//! Three schemes share the machinery:
//!
//! - `Fixed`: one estimate from a leading pilot preamble, never updated.
//!   The baseline that exposes how fast a drifting channel outruns a
//!   stale model.
//! - `PilotBased`: every frame of `frame_len` symbols starts with
//!   `pilot_len` pilots and gets a fresh estimate from them.
//! - `DataAided`: a single preamble, then periodic re-estimation from
//!   the most recently detected symbols, treating decisions as if they
//!   were pilots.
//!
//! Bit-error rates count payload symbols only; pilots are known at the
//! receiver and excluded.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::config::LinkConfig;
use crate::detection::{
    DetectorState, detection_metric, differentiate, estimate_threshold, ml_detect, smooth,
    symbol_windows, threshold_detect,
};
use crate::error::{Error, Result};
use crate::estimation::{FitRequest, fit};
use crate::params::ChannelParams;
use crate::trace::Trace;

/// Estimation cadence of a link run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Preamble estimate only, never refreshed.
    Fixed,
    /// Fresh estimate from the pilots of every frame.
    PilotBased,
    /// Preamble estimate, then decision-directed re-estimation.
    DataAided,
}

/// Detector run on the payload symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorChoice {
    /// Maximum likelihood, model advanced through decided bits.
    MlDecisionDirected,
    /// Maximum likelihood, model advanced through the true bits; the
    /// genie variant that isolates estimation quality from error
    /// propagation. Under `PilotBased` the per-frame estimate also
    /// trains on the whole frame's true bits.
    MlGenie,
    /// Smoothed-slope threshold detector.
    Threshold,
}

impl DetectorChoice {
    fn genie(&self) -> bool {
        matches!(self, DetectorChoice::MlGenie)
    }
}

/// Framing parameters of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FramePlan {
    pub scheme: Scheme,
    pub frame_len: usize,
    pub pilot_len: usize,
    pub reest_period: usize,
    pub reest_window: usize,
}

impl FramePlan {
    pub fn from_config(cfg: &LinkConfig, scheme: Scheme) -> Self {
        FramePlan {
            scheme,
            frame_len: cfg.frame_len(),
            pilot_len: cfg.pilot_len(),
            reest_period: cfg.reest_period(),
            reest_window: cfg.reest_window(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.pilot_len == 0 {
            return Err(Error::InvalidConfig("a link run needs at least one pilot symbol".into()));
        }
        if self.scheme == Scheme::PilotBased && self.pilot_len >= self.frame_len {
            return Err(Error::InvalidConfig(format!(
                "pilot count {} must be smaller than the frame length {}",
                self.pilot_len, self.frame_len
            )));
        }
        if self.scheme == Scheme::DataAided {
            if self.reest_period == 0 || self.reest_window == 0 {
                return Err(Error::InvalidConfig(
                    "re-estimation period and window must be at least 1 symbol".into(),
                ));
            }
            if self.reest_window > self.pilot_len + self.reest_period {
                return Err(Error::InvalidConfig(format!(
                    "re-estimation window of {} symbols exceeds the {} symbols elapsed at the first re-estimation",
                    self.reest_window,
                    self.pilot_len + self.reest_period
                )));
            }
        }
        Ok(())
    }
}

/// Pilot positions of `n_symbols` under a plan: every frame start for
/// the pilot-based scheme, a single preamble otherwise.
pub fn pilot_mask(plan: &FramePlan, n_symbols: usize) -> Vec<bool> {
    let mut mask = vec![false; n_symbols];
    match plan.scheme {
        Scheme::PilotBased => {
            let mut f0 = 0;
            while f0 < n_symbols {
                let f1 = (f0 + plan.frame_len).min(n_symbols);
                for m in mask.iter_mut().take((f0 + plan.pilot_len).min(f1)).skip(f0) {
                    *m = true;
                }
                f0 = f1;
            }
        }
        Scheme::Fixed | Scheme::DataAided => {
            for m in mask.iter_mut().take(plan.pilot_len.min(n_symbols)) {
                *m = true;
            }
        }
    }
    mask
}

/// Error count over the unmasked (payload) positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BerCount {
    pub errors: usize,
    pub total: usize,
}

impl BerCount {
    /// Error rate; 0 when there are no payload symbols.
    pub fn rate(&self) -> f64 {
        if self.total == 0 { 0.0 } else { self.errors as f64 / self.total as f64 }
    }
}

/// Compares decisions against the truth on the positions not excluded
/// by `pilot`.
pub fn ber(decisions: &[bool], truth: &[bool], pilot: &[bool]) -> Result<BerCount> {
    if decisions.len() != truth.len() {
        return Err(Error::LengthMismatch { left: decisions.len(), right: truth.len() });
    }
    if decisions.len() != pilot.len() {
        return Err(Error::LengthMismatch { left: decisions.len(), right: pilot.len() });
    }
    let mut count = BerCount { errors: 0, total: 0 };
    for i in 0..decisions.len() {
        if pilot[i] {
            continue;
        }
        count.total += 1;
        if decisions[i] != truth[i] {
            count.errors += 1;
        }
    }
    Ok(count)
}

/// Per-symbol diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub enum SymbolDetail {
    /// Known pilot; no detection ran.
    Pilot,
    Ml { cost_dark: f64, cost_lit: f64 },
    Threshold { metric: f64, threshold: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolRecord {
    /// 1-based symbol index.
    pub index: usize,
    pub truth: bool,
    pub decision: bool,
    pub pilot: bool,
    pub detail: SymbolDetail,
}

/// One (re-)estimation event of a model-based run.
#[derive(Debug, Clone)]
pub struct ParamUpdate {
    /// 1-based symbol from which this estimate is in force.
    pub effective_from: usize,
    pub params: ChannelParams,
    /// Training objective (mean squared deviation); carries over when
    /// `fallback` is set.
    pub objective: f64,
    /// True when estimation failed and the previous estimate was kept.
    pub fallback: bool,
}

/// One (re-)estimation event of a threshold run.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdUpdate {
    pub effective_from: usize,
    pub threshold: f64,
    pub fallback: bool,
}

/// Everything a link run produced.
#[derive(Debug, Clone)]
pub struct LinkReport {
    /// Per-symbol decisions; pilot positions carry the known bit.
    pub decisions: Vec<bool>,
    pub symbols: Vec<SymbolRecord>,
    /// Estimates of model-based runs, in order.
    pub param_history: Vec<ParamUpdate>,
    /// Thresholds of threshold runs, in order.
    pub threshold_history: Vec<ThresholdUpdate>,
    /// Payload-only error count.
    pub ber: BerCount,
}

/// Runs one transmission under a frame plan and detector choice.
///
/// `trace` must start at the first symbol's first sample and cover all
/// of `truth`. The run is deterministic: the same inputs reproduce the
/// same report.
pub fn run_link(
    trace: &Trace,
    truth: &[bool],
    cfg: &LinkConfig,
    plan: &FramePlan,
    detector: DetectorChoice,
) -> Result<LinkReport> {
    plan.validate()?;
    if truth.is_empty() {
        return Err(Error::WindowMismatch("no symbols to run".into()));
    }
    let needed = truth.len() * cfg.samples_per_symbol();
    if trace.len() < needed {
        return Err(Error::TraceTooShort { needed, len: trace.len() });
    }
    let dt = cfg.sample_interval();
    if (trace.dt() - dt).abs() > 1e-9 * dt {
        return Err(Error::WindowMismatch(format!(
            "trace sample interval {} does not match the configured {}",
            trace.dt(),
            dt
        )));
    }
    match detector {
        DetectorChoice::Threshold => run_threshold(trace, truth, cfg, plan),
        _ => run_ml(trace, truth, cfg, plan, detector.genie()),
    }
}

/// Pilot-based run with the configured framing.
pub fn run_pilot_based(
    trace: &Trace,
    truth: &[bool],
    cfg: &LinkConfig,
    detector: DetectorChoice,
) -> Result<LinkReport> {
    run_link(trace, truth, cfg, &FramePlan::from_config(cfg, Scheme::PilotBased), detector)
}

/// Data-aided run with the configured preamble and re-estimation
/// cadence.
pub fn run_data_aided(
    trace: &Trace,
    truth: &[bool],
    cfg: &LinkConfig,
    detector: DetectorChoice,
) -> Result<LinkReport> {
    run_link(trace, truth, cfg, &FramePlan::from_config(cfg, Scheme::DataAided), detector)
}

fn run_ml(
    trace: &Trace,
    truth: &[bool],
    cfg: &LinkConfig,
    plan: &FramePlan,
    genie: bool,
) -> Result<LinkReport> {
    let n = truth.len();
    let spsym = cfg.samples_per_symbol();
    let windows = symbol_windows(cfg, n);
    let mut decisions = vec![false; n];
    let mut symbols = Vec::with_capacity(n);
    let mut param_history: Vec<ParamUpdate> = Vec::new();

    let estimate = |train_bits: &[bool],
                        window_start: usize,
                        effective_from: usize,
                        init: Option<ChannelParams>,
                        param_history: &mut Vec<ParamUpdate>|
     -> Result<ChannelParams> {
        let mut req = FitRequest::new(trace, train_bits, window_start, cfg)?;
        if let Some(p) = init {
            req = req.with_init(p);
        }
        match fit(&req) {
            Ok(done) => {
                param_history.push(ParamUpdate {
                    effective_from,
                    params: done.params,
                    objective: done.objective,
                    fallback: false,
                });
                Ok(done.params)
            }
            Err(err) => match init {
                Some(prev) => {
                    // keep the previous dynamics but restart the level
                    // recursion from the measured sample at the window
                    // start; the old starting level belongs to an older
                    // window and would misplace every continuation
                    let anchored = prev
                        .with_initial_conc(trace.samples()[window_start])
                        .unwrap_or(prev);
                    param_history.push(ParamUpdate {
                        effective_from,
                        params: anchored,
                        objective: prev.noise_var(),
                        fallback: true,
                    });
                    Ok(anchored)
                }
                None => Err(Error::EstimationFailed(format!(
                    "no parameter estimate before symbol {effective_from}: {err}"
                ))),
            },
        }
    };

    match plan.scheme {
        Scheme::PilotBased => {
            let mut current: Option<ChannelParams> = None;
            let mut f0 = 0;
            while f0 < n {
                let f1 = (f0 + plan.frame_len).min(n);
                let np = plan.pilot_len.min(f1 - f0);
                let train: &[bool] =
                    if genie { &truth[f0..f1] } else { &truth[f0..f0 + np] };
                let params =
                    estimate(train, f0 * spsym, f0 + 1, current, &mut param_history)?;
                current = Some(params);
                let mut state = DetectorState::new(params);
                for k in f0..f1 {
                    if k < f0 + np {
                        state.advance(truth[k], cfg);
                        decisions[k] = truth[k];
                        symbols.push(SymbolRecord {
                            index: k + 1,
                            truth: truth[k],
                            decision: truth[k],
                            pilot: true,
                            detail: SymbolDetail::Pilot,
                        });
                    } else {
                        let d = ml_detect(
                            &mut state,
                            trace,
                            &windows[k],
                            cfg,
                            genie.then(|| truth[k]),
                        )?;
                        decisions[k] = d.bit;
                        symbols.push(SymbolRecord {
                            index: k + 1,
                            truth: truth[k],
                            decision: d.bit,
                            pilot: false,
                            detail: SymbolDetail::Ml {
                                cost_dark: d.cost_dark,
                                cost_lit: d.cost_lit,
                            },
                        });
                    }
                }
                f0 = f1;
            }
        }
        Scheme::Fixed | Scheme::DataAided => {
            let np = plan.pilot_len.min(n);
            let mut params =
                estimate(&truth[0..np], 0, 1, None, &mut param_history)?;
            let mut state = DetectorState::new(params);
            for k in 0..np {
                state.advance(truth[k], cfg);
                decisions[k] = truth[k];
                symbols.push(SymbolRecord {
                    index: k + 1,
                    truth: truth[k],
                    decision: truth[k],
                    pilot: true,
                    detail: SymbolDetail::Pilot,
                });
            }
            for k in np..n {
                if plan.scheme == Scheme::DataAided {
                    let payload_done = k - np;
                    if payload_done > 0 && payload_done % plan.reest_period == 0 {
                        let wstart = k - plan.reest_window;
                        let train: &[bool] = if genie {
                            &truth[wstart..k]
                        } else {
                            &decisions[wstart..k]
                        };
                        if train.contains(&true) && train.contains(&false) {
                            let train = train.to_vec();
                            params = estimate(
                                &train,
                                wstart * spsym,
                                k + 1,
                                Some(params),
                                &mut param_history,
                            )?;
                            state = DetectorState::new(params);
                            state.advance_through(&train, cfg);
                        }
                        // single-class window: keep the current estimate
                    }
                }
                let d =
                    ml_detect(&mut state, trace, &windows[k], cfg, genie.then(|| truth[k]))?;
                decisions[k] = d.bit;
                symbols.push(SymbolRecord {
                    index: k + 1,
                    truth: truth[k],
                    decision: d.bit,
                    pilot: false,
                    detail: SymbolDetail::Ml { cost_dark: d.cost_dark, cost_lit: d.cost_lit },
                });
            }
        }
    }

    let mask = pilot_mask(plan, n);
    let ber = ber(&decisions, truth, &mask)?;
    Ok(LinkReport { decisions, symbols, param_history, threshold_history: Vec::new(), ber })
}

fn run_threshold(
    trace: &Trace,
    truth: &[bool],
    cfg: &LinkConfig,
    plan: &FramePlan,
) -> Result<LinkReport> {
    let n = truth.len();
    let gamma = cfg.threshold_weight();
    let smoothed = smooth(trace, cfg.smooth_window())?;
    let diff = differentiate(&smoothed, cfg.diff_window())?;
    let windows = symbol_windows(cfg, n);
    let mut metrics = Vec::with_capacity(n);
    for w in &windows {
        metrics.push(detection_metric(&diff, w)?);
    }

    let mut decisions = vec![false; n];
    let mut symbols = Vec::with_capacity(n);
    let mut threshold_history: Vec<ThresholdUpdate> = Vec::new();

    let learn = |metrics_slice: &[f64],
                     bits: &[bool],
                     effective_from: usize,
                     prev: Option<f64>,
                     threshold_history: &mut Vec<ThresholdUpdate>|
     -> Result<f64> {
        match estimate_threshold(metrics_slice, bits, gamma) {
            Ok(eta) => {
                threshold_history.push(ThresholdUpdate {
                    effective_from,
                    threshold: eta,
                    fallback: false,
                });
                Ok(eta)
            }
            Err(err) => match prev {
                Some(eta) => {
                    threshold_history.push(ThresholdUpdate {
                        effective_from,
                        threshold: eta,
                        fallback: true,
                    });
                    Ok(eta)
                }
                None => Err(Error::EstimationFailed(format!(
                    "no threshold before symbol {effective_from}: {err}"
                ))),
            },
        }
    };

    let record_pilot = |k: usize, symbols: &mut Vec<SymbolRecord>, decisions: &mut Vec<bool>| {
        decisions[k] = truth[k];
        symbols.push(SymbolRecord {
            index: k + 1,
            truth: truth[k],
            decision: truth[k],
            pilot: true,
            detail: SymbolDetail::Pilot,
        });
    };

    match plan.scheme {
        Scheme::PilotBased => {
            let mut current: Option<f64> = None;
            let mut f0 = 0;
            while f0 < n {
                let f1 = (f0 + plan.frame_len).min(n);
                let np = plan.pilot_len.min(f1 - f0);
                let eta = learn(
                    &metrics[f0..f0 + np],
                    &truth[f0..f0 + np],
                    f0 + 1,
                    current,
                    &mut threshold_history,
                )?;
                current = Some(eta);
                for k in f0..f1 {
                    if k < f0 + np {
                        record_pilot(k, &mut symbols, &mut decisions);
                    } else {
                        let bit = threshold_detect(metrics[k], eta);
                        decisions[k] = bit;
                        symbols.push(SymbolRecord {
                            index: k + 1,
                            truth: truth[k],
                            decision: bit,
                            pilot: false,
                            detail: SymbolDetail::Threshold { metric: metrics[k], threshold: eta },
                        });
                    }
                }
                f0 = f1;
            }
        }
        Scheme::Fixed | Scheme::DataAided => {
            let np = plan.pilot_len.min(n);
            let mut eta =
                learn(&metrics[0..np], &truth[0..np], 1, None, &mut threshold_history)?;
            for k in 0..np {
                record_pilot(k, &mut symbols, &mut decisions);
            }
            for k in np..n {
                if plan.scheme == Scheme::DataAided {
                    let payload_done = k - np;
                    if payload_done > 0 && payload_done % plan.reest_period == 0 {
                        let wstart = k - plan.reest_window;
                        // single-class windows fail inside and keep the
                        // previous threshold via the fallback path
                        if decisions[wstart..k].contains(&true)
                            && decisions[wstart..k].contains(&false)
                        {
                            eta = learn(
                                &metrics[wstart..k],
                                &decisions[wstart..k].to_vec(),
                                k + 1,
                                Some(eta),
                                &mut threshold_history,
                            )?;
                        }
                    }
                }
                let bit = threshold_detect(metrics[k], eta);
                decisions[k] = bit;
                symbols.push(SymbolRecord {
                    index: k + 1,
                    truth: truth[k],
                    decision: bit,
                    pilot: false,
                    detail: SymbolDetail::Threshold { metric: metrics[k], threshold: eta },
                });
            }
        }
    }

    let mask = pilot_mask(plan, n);
    let ber = ber(&decisions, truth, &mask)?;
    Ok(LinkReport { decisions, symbols, param_history: Vec::new(), threshold_history, ber })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::LightState;
    use crate::schedule::IlluminationSchedule;
    use crate::signal::{mean_signal, simulate};
    use crate::trace::SampleGrid;

    fn cfg() -> LinkConfig {
        LinkConfig::builder().build().unwrap()
    }

    fn strong_params(noise_var: f64) -> ChannelParams {
        ChannelParams::from_minutes(6.41, 8.40, 2.83, 5.77, -0.0039, noise_var, 2.83).unwrap()
    }

    fn bits_of(pattern: &str) -> Vec<bool> {
        pattern.chars().map(|c| c == '1').collect()
    }

    fn clean_trace(bits: &[bool], params: &ChannelParams) -> Trace {
        let config = cfg();
        let sched = IlluminationSchedule::from_bits(bits, &config).unwrap();
        let grid = SampleGrid::new(0.0, 1.0, bits.len() * 60).unwrap();
        mean_signal(&sched, params, grid).unwrap()
    }

    #[test]
    fn pilot_mask_marks_every_frame_start() {
        let plan = FramePlan {
            scheme: Scheme::PilotBased,
            frame_len: 40,
            pilot_len: 10,
            reest_period: 10,
            reest_window: 20,
        };
        let mask = pilot_mask(&plan, 100);
        let pilots = mask.iter().filter(|&&m| m).count();
        // frames of 40, 40, 20: ten pilots each
        assert_eq!(pilots, 30);
        assert!(mask[0] && mask[9] && !mask[10]);
        assert!(mask[40] && mask[49] && !mask[50]);
        assert!(mask[80] && mask[89] && !mask[90]);
    }

    #[test]
    fn pilot_mask_single_preamble_for_data_aided() {
        let plan = FramePlan {
            scheme: Scheme::DataAided,
            frame_len: 40,
            pilot_len: 10,
            reest_period: 10,
            reest_window: 20,
        };
        let mask = pilot_mask(&plan, 100);
        assert_eq!(mask.iter().filter(|&&m| m).count(), 10);
        assert!(mask[9] && !mask[10]);
    }

    #[test]
    fn payload_accounting_matches_frame_arithmetic() {
        for (n, frame, pilots) in [(600, 40, 10), (100, 40, 10), (85, 40, 10), (17, 12, 3)] {
            let plan = FramePlan {
                scheme: Scheme::PilotBased,
                frame_len: frame,
                pilot_len: pilots,
                reest_period: 10,
                reest_window: 13,
            };
            let mask = pilot_mask(&plan, n);
            let payload = mask.iter().filter(|&&m| !m).count();
            let mut expect = 0;
            let mut f0 = 0;
            while f0 < n {
                let flen = frame.min(n - f0);
                expect += flen - pilots.min(flen);
                f0 += flen;
            }
            assert_eq!(payload, expect, "n={n}");
        }
    }

    #[test]
    fn ber_counts_payload_only() {
        let truth = [true, false, true, true];
        let decisions = [true, true, false, true];
        let mask = [true, false, false, false];
        let count = ber(&decisions, &truth, &mask).unwrap();
        assert_eq!(count, BerCount { errors: 2, total: 3 });
        assert!((count.rate() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ber_rejects_mismatched_lengths() {
        assert!(matches!(
            ber(&[true], &[true, false], &[false, false]).unwrap_err(),
            Error::LengthMismatch { .. }
        ));
    }

    #[test]
    fn genie_recovers_everything_on_a_clean_trace() {
        let config = cfg();
        let params = strong_params(0.0);
        let bits = bits_of("1001100010101110110110010011");
        let trace = clean_trace(&bits, &params);
        let report = run_pilot_based(&trace, &bits, &config, DetectorChoice::MlGenie).unwrap();
        assert_eq!(report.decisions, bits);
        assert_eq!(report.ber.errors, 0);
        // one frame of 28 symbols: 10 pilots, 18 payload
        assert_eq!(report.ber.total, 18);
        assert_eq!(report.param_history.len(), 1);
        assert!(!report.param_history[0].fallback);
    }

    #[test]
    fn decision_directed_matches_genie_without_noise() {
        let config = cfg();
        let params = strong_params(0.0);
        let bits = bits_of("11001010001101100101");
        let trace = clean_trace(&bits, &params);
        let dd =
            run_data_aided(&trace, &bits, &config, DetectorChoice::MlDecisionDirected).unwrap();
        assert_eq!(dd.decisions, bits);
        assert_eq!(dd.ber.errors, 0);
        assert_eq!(dd.ber.total, 10);
    }

    #[test]
    fn fixed_scheme_estimates_once() {
        let config = cfg();
        let params = strong_params(0.0);
        let bits = bits_of("110010100011011001011100");
        let trace = clean_trace(&bits, &params);
        let plan = FramePlan::from_config(&config, Scheme::Fixed);
        let report =
            run_link(&trace, &bits, &config, &plan, DetectorChoice::MlDecisionDirected).unwrap();
        assert_eq!(report.param_history.len(), 1);
        assert_eq!(report.ber.errors, 0);
        assert_eq!(report.ber.total, bits.len() - 10);
    }

    #[test]
    fn data_aided_reestimates_on_schedule() {
        let config = cfg();
        let sigma = 0.0038f64;
        let params = strong_params(sigma * sigma);
        let bits =
            bits_of("1100101000110110010111001001101011001010001101100101110010011010");
        let sched = IlluminationSchedule::from_bits(&bits, &config).unwrap();
        let grid = SampleGrid::new(0.0, 1.0, bits.len() * 60).unwrap();
        let trace = simulate(&sched, &params, grid, 17).unwrap();
        let report =
            run_data_aided(&trace, &bits, &config, DetectorChoice::MlDecisionDirected).unwrap();
        // preamble + re-estimations after payload symbols 10, 20, 30, 40, 50
        // (the cadence stops once fewer than a period of payload symbols
        // remains: 64 symbols = 10 pilots + 54 payload)
        let periods = (bits.len() - 10 - 1) / config.reest_period();
        assert_eq!(report.param_history.len(), 1 + periods);
        assert_eq!(report.param_history[0].effective_from, 1);
        assert_eq!(report.param_history[1].effective_from, 21);
        assert_eq!(report.param_history[2].effective_from, 31);
    }

    #[test]
    fn threshold_detector_runs_clean() {
        let config = cfg();
        let params = strong_params(0.0);
        let bits = bits_of("1100101000011011001011100100");
        let trace = clean_trace(&bits, &params);
        let report = run_pilot_based(&trace, &bits, &config, DetectorChoice::Threshold).unwrap();
        assert_eq!(report.ber.errors, 0, "decisions {:?}", report.decisions);
        assert_eq!(report.threshold_history.len(), 1);
        assert!(report.param_history.is_empty());
    }

    #[test]
    fn single_class_first_frame_fails() {
        let config = cfg();
        let params = strong_params(0.0);
        let bits = bits_of("0000000000110110010111001001");
        let trace = clean_trace(&bits, &params);
        let err =
            run_pilot_based(&trace, &bits, &config, DetectorChoice::MlDecisionDirected).unwrap_err();
        assert!(matches!(err, Error::EstimationFailed(_)));
        let err = run_pilot_based(&trace, &bits, &config, DetectorChoice::Threshold).unwrap_err();
        assert!(matches!(err, Error::EstimationFailed(_)));
    }

    #[test]
    fn single_class_later_frame_falls_back() {
        let config = LinkConfig::builder().frame_len(14).pilot_len(4).build().unwrap();
        let params = strong_params(0.0);
        // frame 1 pilots 1100 (both classes), frame 2 pilots 0000
        let bits = bits_of("1100101001011100000101100101");
        let trace = clean_trace(&bits, &params);
        let report =
            run_pilot_based(&trace, &bits, &config, DetectorChoice::MlDecisionDirected).unwrap();
        assert_eq!(report.param_history.len(), 2);
        assert!(!report.param_history[0].fallback);
        assert!(report.param_history[1].fallback);
        // fallback keeps frame 1's dynamics but restarts the level at
        // the measured frame boundary
        let kept = &report.param_history[1].params;
        let prev = &report.param_history[0].params;
        assert_eq!(kept.tau(LightState::Dark), prev.tau(LightState::Dark));
        assert_eq!(kept.equilibrium(LightState::Lit), prev.equilibrium(LightState::Lit));
        assert_eq!(kept.drift_slope(), prev.drift_slope());
        assert_eq!(kept.initial_conc(), trace.samples()[14 * 60]);
        assert_eq!(report.ber.errors, 0);
    }

    #[test]
    fn plan_validation_catches_window_overrun() {
        let config = cfg();
        let plan = FramePlan {
            scheme: Scheme::DataAided,
            frame_len: 40,
            pilot_len: 10,
            reest_period: 10,
            reest_window: 21,
        };
        let params = strong_params(0.0);
        let bits = bits_of("110010100011011001011");
        let trace = clean_trace(&bits, &params);
        let err = run_link(&trace, &bits, &config, &plan, DetectorChoice::MlDecisionDirected)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn trace_must_cover_all_symbols() {
        let config = cfg();
        let params = strong_params(0.0);
        let bits = bits_of("1100101000");
        let trace = clean_trace(&bits, &params);
        let short = trace.slice(0, 599).unwrap();
        let more = bits_of("11001010001");
        assert!(matches!(
            run_pilot_based(&short, &bits, &config, DetectorChoice::MlGenie).unwrap_err(),
            Error::TraceTooShort { .. }
        ));
        assert!(matches!(
            run_pilot_based(&trace, &more, &config, DetectorChoice::MlGenie).unwrap_err(),
            Error::TraceTooShort { .. }
        ));
    }
}
