//! Link-layer configuration: symbol timing, sampling, framing, and
//! detector settings shared by the whole processing chain.

use alloc::format;

use crate::error::{Error, Result};
use crate::math;

/// Relative tolerance when checking that a time span is an integer
/// multiple of the sample interval.
const STEP_TOL: f64 = 1e-9;

/// Validated link-layer settings.
///
/// Time spans are seconds. Construction via [`LinkConfig::builder`]
/// enforces that the symbol period, the lit portion of a 1-symbol, and
/// the smoothing/differencing spans are integer multiples of the sample
/// interval, so sample counts derived from them are exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    symbol_period: f64,
    duty: f64,
    sample_interval: f64,
    pilot_len: usize,
    frame_len: usize,
    smooth_window: f64,
    diff_window: f64,
    threshold_weight: f64,
    reest_period: usize,
    reest_window: usize,
    // derived at build time
    samples_per_symbol: usize,
    lit_samples: usize,
    smooth_steps: usize,
    diff_steps: usize,
}

/// Builder for [`LinkConfig`]. Defaults mirror the wet-lab link this
/// model was developed against: 60 s symbols at 25% duty, 1 Hz sampling,
/// 10 pilots per 40-symbol frame, 30 s smoothing, 20 s differencing,
/// balanced threshold weight, re-estimation every 10 symbols over the
/// last 20.
#[derive(Debug, Clone, Copy)]
pub struct LinkConfigBuilder {
    symbol_period: f64,
    duty: f64,
    sample_interval: f64,
    pilot_len: usize,
    frame_len: usize,
    smooth_window: f64,
    diff_window: f64,
    threshold_weight: f64,
    reest_period: usize,
    reest_window: usize,
}

impl Default for LinkConfigBuilder {
    fn default() -> Self {
        LinkConfigBuilder {
            symbol_period: 60.0,
            duty: 0.25,
            sample_interval: 1.0,
            pilot_len: 10,
            frame_len: 40,
            smooth_window: 30.0,
            diff_window: 20.0,
            threshold_weight: 0.5,
            reest_period: 10,
            reest_window: 20,
        }
    }
}

impl LinkConfigBuilder {
    /// Symbol period in seconds.
    pub fn symbol_period(mut self, seconds: f64) -> Self {
        self.symbol_period = seconds;
        self
    }

    /// Fraction of a 1-symbol during which the LED is on, in (0, 1).
    pub fn duty(mut self, duty: f64) -> Self {
        self.duty = duty;
        self
    }

    /// Sample interval in seconds.
    pub fn sample_interval(mut self, seconds: f64) -> Self {
        self.sample_interval = seconds;
        self
    }

    /// Pilot symbols at the start of a frame (or of the transmission,
    /// for preamble-only schemes).
    pub fn pilot_len(mut self, n: usize) -> Self {
        self.pilot_len = n;
        self
    }

    /// Symbols per frame, pilots included.
    pub fn frame_len(mut self, k: usize) -> Self {
        self.frame_len = k;
        self
    }

    /// Moving-average span of the threshold detector's smoother, seconds.
    pub fn smooth_window(mut self, seconds: f64) -> Self {
        self.smooth_window = seconds;
        self
    }

    /// Forward-difference span of the threshold detector, seconds.
    pub fn diff_window(mut self, seconds: f64) -> Self {
        self.diff_window = seconds;
        self
    }

    /// Weight of the zero-class metric mean in the decision threshold,
    /// in (0, 1).
    pub fn threshold_weight(mut self, gamma: f64) -> Self {
        self.threshold_weight = gamma;
        self
    }

    /// Symbols between re-estimations in the decision-directed scheme.
    pub fn reest_period(mut self, symbols: usize) -> Self {
        self.reest_period = symbols;
        self
    }

    /// Look-back window, in symbols, of each re-estimation.
    pub fn reest_window(mut self, symbols: usize) -> Self {
        self.reest_window = symbols;
        self
    }

    pub fn build(self) -> Result<LinkConfig> {
        let b = self;
        for (name, value) in [
            ("symbol period", b.symbol_period),
            ("sample interval", b.sample_interval),
            ("differencing window", b.diff_window),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if !(b.smooth_window.is_finite() && b.smooth_window >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "smoothing window must be non-negative, got {}",
                b.smooth_window
            )));
        }
        if !(b.duty > 0.0 && b.duty < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "duty cycle must lie in (0, 1), got {}",
                b.duty
            )));
        }
        if !(b.threshold_weight > 0.0 && b.threshold_weight < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "threshold weight must lie in (0, 1), got {}",
                b.threshold_weight
            )));
        }
        if b.frame_len == 0 {
            return Err(Error::InvalidConfig("frame length must be at least 1".into()));
        }
        if b.pilot_len >= b.frame_len {
            return Err(Error::InvalidConfig(format!(
                "pilot count {} must be smaller than the frame length {}",
                b.pilot_len, b.frame_len
            )));
        }
        if b.reest_period == 0 || b.reest_window == 0 {
            return Err(Error::InvalidConfig(
                "re-estimation period and window must be at least 1 symbol".into(),
            ));
        }

        let samples_per_symbol = exact_steps(b.symbol_period, b.sample_interval).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "symbol period {} s is not an integer multiple of the sample interval {} s",
                b.symbol_period, b.sample_interval
            ))
        })?;
        let lit_samples =
            exact_steps(b.duty * b.symbol_period, b.sample_interval).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "lit span {} s is not an integer multiple of the sample interval {} s",
                    b.duty * b.symbol_period,
                    b.sample_interval
                ))
            })?;
        if lit_samples == 0 || lit_samples >= samples_per_symbol {
            return Err(Error::InvalidConfig(format!(
                "lit span must cover between 1 and {} samples, got {}",
                samples_per_symbol - 1,
                lit_samples
            )));
        }
        let smooth_steps = exact_steps(b.smooth_window, b.sample_interval).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "smoothing window {} s is not an integer multiple of the sample interval {} s",
                b.smooth_window, b.sample_interval
            ))
        })?;
        let diff_steps = exact_steps(b.diff_window, b.sample_interval).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "differencing window {} s is not an integer multiple of the sample interval {} s",
                b.diff_window, b.sample_interval
            ))
        })?;
        if diff_steps == 0 {
            return Err(Error::InvalidConfig(
                "differencing window must span at least one sample interval".into(),
            ));
        }

        Ok(LinkConfig {
            symbol_period: b.symbol_period,
            duty: b.duty,
            sample_interval: b.sample_interval,
            pilot_len: b.pilot_len,
            frame_len: b.frame_len,
            smooth_window: b.smooth_window,
            diff_window: b.diff_window,
            threshold_weight: b.threshold_weight,
            reest_period: b.reest_period,
            reest_window: b.reest_window,
            samples_per_symbol,
            lit_samples,
            smooth_steps,
            diff_steps,
        })
    }
}

impl LinkConfig {
    pub fn builder() -> LinkConfigBuilder {
        LinkConfigBuilder::default()
    }

    /// Symbol period, seconds.
    pub fn symbol_period(&self) -> f64 {
        self.symbol_period
    }

    /// Lit fraction of a 1-symbol.
    pub fn duty(&self) -> f64 {
        self.duty
    }

    /// Sample interval, seconds.
    pub fn sample_interval(&self) -> f64 {
        self.sample_interval
    }

    pub fn pilot_len(&self) -> usize {
        self.pilot_len
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    /// Smoothing span, seconds.
    pub fn smooth_window(&self) -> f64 {
        self.smooth_window
    }

    /// Differencing span, seconds.
    pub fn diff_window(&self) -> f64 {
        self.diff_window
    }

    /// Zero-class weight of the threshold rule.
    pub fn threshold_weight(&self) -> f64 {
        self.threshold_weight
    }

    pub fn reest_period(&self) -> usize {
        self.reest_period
    }

    pub fn reest_window(&self) -> usize {
        self.reest_window
    }

    /// Samples per symbol interval (exact).
    pub fn samples_per_symbol(&self) -> usize {
        self.samples_per_symbol
    }

    /// Samples in the lit portion of a 1-symbol (exact, ≥ 1).
    pub fn lit_samples(&self) -> usize {
        self.lit_samples
    }

    /// Duration of the lit portion of a 1-symbol, seconds.
    pub fn lit_span(&self) -> f64 {
        self.lit_samples as f64 * self.sample_interval
    }

    /// Moving-average length of the smoother minus one; the smoother
    /// averages `smooth_steps() + 1` consecutive samples.
    pub fn smooth_steps(&self) -> usize {
        self.smooth_steps
    }

    /// Forward-difference offset in samples.
    pub fn diff_steps(&self) -> usize {
        self.diff_steps
    }

    /// Samples per full frame.
    pub fn samples_per_frame(&self) -> usize {
        self.samples_per_symbol * self.frame_len
    }
}

/// Number of sample steps spanned by `span`, if `span` is an integer
/// multiple of `dt` within a small relative tolerance.
pub(crate) fn exact_steps(span: f64, dt: f64) -> Option<usize> {
    if !(span.is_finite() && dt.is_finite() && dt > 0.0 && span >= 0.0) {
        return None;
    }
    let steps = math::round(span / dt);
    if steps < 0.0 || steps > (1u64 << 52) as f64 {
        return None;
    }
    let tol = STEP_TOL * if span.abs() > dt { span.abs() } else { dt };
    if (span - steps * dt).abs() <= tol {
        Some(steps as usize)
    } else {
        None
    }
}
