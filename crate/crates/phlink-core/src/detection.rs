//! Symbol detectors.
//!
//! Two detectors share the symbol-window bookkeeping:
//!
//! - A maximum-likelihood detector that continues the deterministic mean
//!   response under each bit hypothesis from the level reached at the
//!   symbol boundary and picks the hypothesis with the smaller mean
//!   squared deviation. With white Gaussian noise that deviation is the
//!   log-likelihood up to scale.
//! - A low-complexity threshold detector that smooths the trace with a
//!   trailing moving average, differences the smoothed signal over a
//!   trailing span, and compares each symbol's peak slope against a
//!   threshold learned from pilots. Both stages are causal: every
//!   output is stamped at the end of the samples it consumed, so a
//!   pulse's slope peak lands inside the window of the symbol that
//!   produced it.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use crate::config::{LinkConfig, exact_steps};
use crate::error::{Error, Result};
use crate::params::{ChannelParams, LightState};
use crate::signal::segment_mean;
use crate::trace::Trace;

/// Sample-index range of one symbol interval, 1-based symbol `index`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolWindow {
    pub index: usize,
    pub range: Range<usize>,
}

/// Windows of `n_symbols` consecutive symbols, symbol 1 starting at
/// sample 0.
pub fn symbol_windows(cfg: &LinkConfig, n_symbols: usize) -> Vec<SymbolWindow> {
    let spsym = cfg.samples_per_symbol();
    (1..=n_symbols)
        .map(|k| SymbolWindow { index: k, range: (k - 1) * spsym..k * spsym })
        .collect()
}

/// Smoothed trace plus the count of leading input samples that have no
/// smoothed value under the trailing-window convention.
#[derive(Debug, Clone, PartialEq)]
pub struct Smoothed {
    trace: Trace,
    head: usize,
}

impl Smoothed {
    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    /// Leading input samples consumed before the first output.
    pub fn head_samples(&self) -> usize {
        self.head
    }
}

/// Moving-average smoother: the output at time `t` averages the input
/// over the trailing window `[t - t_smooth, t]`, `W + 1` samples with
/// `W = t_smooth / dt`. The output is `W` samples shorter than the
/// input and starts at the first fully covered timestamp.
pub fn smooth(trace: &Trace, t_smooth: f64) -> Result<Smoothed> {
    let w = exact_steps(t_smooth, trace.dt()).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "smoothing span {t_smooth} s is not an integer multiple of the sample interval"
        ))
    })?;
    let x = trace.samples();
    if x.len() <= w {
        return Err(Error::TraceTooShort { needed: w + 1, len: x.len() });
    }
    let mut out = Vec::with_capacity(x.len() - w);
    for n in 0..x.len() - w {
        let sum: f64 = x[n..=n + w].iter().sum();
        out.push(sum / (w + 1) as f64);
    }
    let t0 = trace.t_start() + w as f64 * trace.dt();
    Ok(Smoothed { trace: Trace::new(t0, trace.dt(), out)?, head: w })
}

/// Slope signal produced by [`differentiate`], stamped at the end of
/// each differencing span; `head_samples` original samples precede its
/// first value.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffSignal {
    t_start: f64,
    dt: f64,
    head: usize,
    values: Vec<f64>,
}

impl DiffSignal {
    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Slopes in µmol/L per second.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index in the original trace of the sample `values[0]` is stamped
    /// at; earlier samples produce no slope value.
    pub fn head_samples(&self) -> usize {
        self.head
    }

    pub fn time_at(&self, i: usize) -> f64 {
        self.t_start + i as f64 * self.dt
    }
}

/// Trailing difference over `t_diff` seconds: the output at time `t` is
/// `(x(t) - x(t - t_diff)) / t_diff` in µmol/L per second, `D = t_diff
/// / dt` samples shorter than its input. Together with the smoother the
/// first `head_samples = (t_smooth + t_diff) / dt` trace samples carry
/// no slope value, so the earliest symbol windows are only partially
/// covered.
pub fn differentiate(smoothed: &Smoothed, t_diff: f64) -> Result<DiffSignal> {
    let dt = smoothed.trace.dt();
    let d = exact_steps(t_diff, dt).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "differencing span {t_diff} s is not an integer multiple of the sample interval"
        ))
    })?;
    if d == 0 {
        return Err(Error::InvalidConfig("differencing span must be positive".into()));
    }
    let x = smoothed.trace.samples();
    if x.len() <= d {
        return Err(Error::TraceTooShort { needed: d + 1, len: x.len() });
    }
    let values: Vec<f64> = (0..x.len() - d).map(|n| (x[n + d] - x[n]) / t_diff).collect();
    Ok(DiffSignal {
        t_start: smoothed.trace.t_start() + d as f64 * dt,
        dt,
        head: smoothed.head + d,
        values,
    })
}

/// Decision metric of one symbol: the maximum slope inside the symbol
/// window, restricted to the part of the window the head-shortened
/// slope signal covers. Fails only if no slope sample falls inside the
/// window at all.
pub fn detection_metric(diff: &DiffSignal, window: &SymbolWindow) -> Result<f64> {
    let lo = window.range.start.max(diff.head);
    let hi = window.range.end.min(diff.head + diff.values.len());
    if lo >= hi {
        return Err(Error::EmptyMetricWindow { symbol: window.index });
    }
    Ok(diff.values[lo - diff.head..hi - diff.head].iter().cloned().fold(f64::MIN, f64::max))
}

/// Threshold between the two metric classes:
/// `gamma * mean(metrics of 0-pilots) + (1 - gamma) * mean(metrics of 1-
/// pilots)`. Needs at least one pilot of each class.
pub fn estimate_threshold(metrics: &[f64], pilot_bits: &[bool], gamma: f64) -> Result<f64> {
    if metrics.len() != pilot_bits.len() {
        return Err(Error::LengthMismatch { left: metrics.len(), right: pilot_bits.len() });
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidConfig(format!("threshold weight must lie in (0, 1), got {gamma}")));
    }
    let (mut sum0, mut n0, mut sum1, mut n1) = (0.0f64, 0usize, 0.0f64, 0usize);
    for (&q, &b) in metrics.iter().zip(pilot_bits) {
        if b {
            sum1 += q;
            n1 += 1;
        } else {
            sum0 += q;
            n0 += 1;
        }
    }
    if n0 == 0 || n1 == 0 {
        return Err(Error::ThresholdUndefined);
    }
    Ok(gamma * sum0 / n0 as f64 + (1.0 - gamma) * sum1 / n1 as f64)
}

/// Threshold rule: decide 1 when the metric reaches the threshold.
pub fn threshold_detect(metric: f64, threshold: f64) -> bool {
    metric >= threshold
}

/// Position inside the current constant-illumination segment of the
/// model recursion: the level at the segment start and the whole
/// samples elapsed since. Tracking the segment rather than just the
/// boundary value keeps runs of equal bits relaxing as one segment,
/// exactly like the canonicalized schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SegCursor {
    level: f64,
    state: LightState,
    elapsed: usize,
}

impl SegCursor {
    /// Model value `samples` steps after the segment start, drift
    /// included.
    fn value_at(&self, samples: usize, dt: f64, params: &ChannelParams) -> f64 {
        let e = samples as f64 * dt;
        segment_mean(self.level, self.state, e, params) + params.drift_slope() * e
    }
}

/// Walks the cursor through one symbol of the hypothesis `bit`,
/// reporting the model value of every sample in the symbol through
/// `emit(offset_in_symbol, value)`. Returns the cursor at the next
/// symbol boundary.
fn advance_symbol<F>(
    mut cur: SegCursor,
    bit: bool,
    cfg: &LinkConfig,
    params: &ChannelParams,
    mut emit: F,
) -> SegCursor
where
    F: FnMut(usize, f64),
{
    let dt = cfg.sample_interval();
    let spsym = cfg.samples_per_symbol();
    let lit = cfg.lit_samples();
    let open = |cur: &SegCursor, state: LightState| -> SegCursor {
        SegCursor { level: cur.value_at(cur.elapsed, dt, params), state, elapsed: 0 }
    };
    if bit {
        if cur.state != LightState::Lit {
            cur = open(&cur, LightState::Lit);
        }
        for j in 0..lit {
            emit(j, cur.value_at(cur.elapsed + j, dt, params));
        }
        cur.elapsed += lit;
        cur = open(&cur, LightState::Dark);
        for j in lit..spsym {
            emit(j, cur.value_at(cur.elapsed + (j - lit), dt, params));
        }
        cur.elapsed += spsym - lit;
    } else {
        if cur.state != LightState::Dark {
            cur = open(&cur, LightState::Dark);
        }
        for j in 0..spsym {
            emit(j, cur.value_at(cur.elapsed + j, dt, params));
        }
        cur.elapsed += spsym;
    }
    cur
}

/// Decision-feedback state of the maximum-likelihood detector: the
/// parameter set in force, the bit history it has been advanced
/// through, and the model's position at the current symbol boundary.
#[derive(Debug, Clone)]
pub struct DetectorState {
    params: ChannelParams,
    history: Vec<bool>,
    cursor: SegCursor,
}

impl DetectorState {
    /// Fresh state at the start of the modeled span; the boundary level
    /// is the parameter set's initial concentration.
    pub fn new(params: ChannelParams) -> Self {
        DetectorState {
            cursor: SegCursor {
                level: params.initial_conc(),
                state: LightState::Dark,
                elapsed: 0,
            },
            history: Vec::new(),
            params,
        }
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    /// Bits the model has been advanced through so far.
    pub fn history(&self) -> &[bool] {
        &self.history
    }

    /// Deterministic model level at the current symbol boundary; equals
    /// the mean signal of the history bits evaluated at the boundary.
    pub fn boundary_level(&self, cfg: &LinkConfig) -> f64 {
        self.cursor.value_at(self.cursor.elapsed, cfg.sample_interval(), &self.params)
    }

    /// Advances the model through one known or decided bit.
    pub fn advance(&mut self, bit: bool, cfg: &LinkConfig) {
        self.cursor = advance_symbol(self.cursor, bit, cfg, &self.params, |_, _| {});
        self.history.push(bit);
    }

    pub fn advance_through(&mut self, bits: &[bool], cfg: &LinkConfig) {
        for &bit in bits {
            self.advance(bit, cfg);
        }
    }
}

/// Outcome of one maximum-likelihood symbol decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlDecision {
    pub bit: bool,
    /// Mean squared deviation under the all-dark hypothesis.
    pub cost_dark: f64,
    /// Mean squared deviation under the pulse hypothesis.
    pub cost_lit: f64,
}

/// Mean squared deviation over one symbol window between the trace and
/// the mean response continued from the detector state under the given
/// bit hypothesis. The state is not modified.
pub fn ml_cost(
    hypothesis: bool,
    state: &DetectorState,
    trace: &Trace,
    window: &SymbolWindow,
    cfg: &LinkConfig,
) -> Result<f64> {
    let spsym = cfg.samples_per_symbol();
    if window.range.len() != spsym {
        return Err(Error::WindowMismatch(format!(
            "symbol window of {} samples, expected {spsym}",
            window.range.len()
        )));
    }
    if window.range.end > trace.len() {
        return Err(Error::WindowMismatch(format!(
            "symbol {} window {}..{} outside trace of {} samples",
            window.index,
            window.range.start,
            window.range.end,
            trace.len()
        )));
    }
    let y = &trace.samples()[window.range.clone()];
    let mut acc = 0.0f64;
    advance_symbol(state.cursor, hypothesis, cfg, &state.params, |j, v| {
        let r = y[j] - v;
        acc += r * r;
    });
    Ok(acc / spsym as f64)
}

/// Decides one symbol by smaller hypothesis cost (ties go to 0) and
/// advances the state through the decided bit, or through `truth` when
/// the true bit is supplied (genie-aided operation).
pub fn ml_detect(
    state: &mut DetectorState,
    trace: &Trace,
    window: &SymbolWindow,
    cfg: &LinkConfig,
    truth: Option<bool>,
) -> Result<MlDecision> {
    let cost_dark = ml_cost(false, state, trace, window, cfg)?;
    let cost_lit = ml_cost(true, state, trace, window, cfg)?;
    let bit = cost_lit < cost_dark;
    state.advance(truth.unwrap_or(bit), cfg);
    Ok(MlDecision { bit, cost_dark, cost_lit })
}
