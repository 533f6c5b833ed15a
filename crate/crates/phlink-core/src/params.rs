//! Channel parameters of the first-order light-to-concentration response.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Seconds per minute; parameter surfaces quote minutes, internals run on
/// seconds.
pub const SECONDS_PER_MINUTE: f64 = 60.0;

/// Illumination state of the transmitter LED.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LightState {
    Dark,
    Lit,
}

impl LightState {
    /// OOK mapping: bit 1 drives the LED, bit 0 leaves it off.
    pub fn from_bit(bit: bool) -> Self {
        if bit { LightState::Lit } else { LightState::Dark }
    }
}

/// Non-fatal oddities detected in an otherwise valid parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamWarning {
    /// The lit equilibrium does not exceed the dark one; the proton pumps
    /// would remove rather than add protons under illumination. Legal,
    /// but usually a sign of a mislabeled data set.
    EquilibriumOrdering,
}

impl core::fmt::Display for ParamWarning {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ParamWarning::EquilibriumOrdering => {
                write!(f, "lit equilibrium concentration does not exceed the dark one")
            }
        }
    }
}

/// Parameters of the piecewise first-order channel response.
///
/// In a constant-illumination segment the mean concentration relaxes
/// exponentially toward the state's equilibrium level with the state's
/// time constant; a linear drift and white Gaussian noise are added on
/// top. All fields are validated at construction, so holders of a value
/// can rely on positive time constants and concentrations.
///
/// Internal units: seconds, µmol/L, and µmol/L per second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    tau_dark: f64,
    tau_light: f64,
    eq_dark: f64,
    eq_light: f64,
    drift_slope: f64,
    noise_var: f64,
    initial_conc: f64,
}

impl ChannelParams {
    /// Builds a parameter set from second-based units.
    ///
    /// `tau_dark_s`/`tau_light_s` are the relaxation time constants in
    /// seconds, `eq_dark`/`eq_light` the equilibrium concentrations in
    /// µmol/L, `drift_per_s` the drift slope in µmol/L per second,
    /// `noise_var` the noise variance in (µmol/L)², and `initial_conc`
    /// the concentration at the start of the modeled span.
    pub fn new(
        tau_dark_s: f64,
        tau_light_s: f64,
        eq_dark: f64,
        eq_light: f64,
        drift_per_s: f64,
        noise_var: f64,
        initial_conc: f64,
    ) -> Result<Self> {
        require_positive("dark time constant", tau_dark_s)?;
        require_positive("lit time constant", tau_light_s)?;
        require_positive("dark equilibrium concentration", eq_dark)?;
        require_positive("lit equilibrium concentration", eq_light)?;
        require_finite("drift slope", drift_per_s)?;
        require_finite("noise variance", noise_var)?;
        if noise_var < 0.0 {
            return Err(Error::InvalidParams(format!(
                "noise variance must be non-negative, got {noise_var}"
            )));
        }
        require_positive("initial concentration", initial_conc)?;
        Ok(ChannelParams {
            tau_dark: tau_dark_s,
            tau_light: tau_light_s,
            eq_dark,
            eq_light,
            drift_slope: drift_per_s,
            noise_var,
            initial_conc,
        })
    }

    /// Same as [`ChannelParams::new`] but with time constants in minutes
    /// and the drift slope in µmol/L per minute, the units used in
    /// configuration files and reports.
    pub fn from_minutes(
        tau_dark_min: f64,
        tau_light_min: f64,
        eq_dark: f64,
        eq_light: f64,
        drift_per_min: f64,
        noise_var: f64,
        initial_conc: f64,
    ) -> Result<Self> {
        ChannelParams::new(
            tau_dark_min * SECONDS_PER_MINUTE,
            tau_light_min * SECONDS_PER_MINUTE,
            eq_dark,
            eq_light,
            drift_per_min / SECONDS_PER_MINUTE,
            noise_var,
            initial_conc,
        )
    }

    pub(crate) fn new_unchecked(
        tau_dark: f64,
        tau_light: f64,
        eq_dark: f64,
        eq_light: f64,
        drift_slope: f64,
        noise_var: f64,
        initial_conc: f64,
    ) -> Self {
        ChannelParams {
            tau_dark,
            tau_light,
            eq_dark,
            eq_light,
            drift_slope,
            noise_var,
            initial_conc,
        }
    }

    /// Relaxation time constant of `state`, seconds.
    pub fn tau(&self, state: LightState) -> f64 {
        match state {
            LightState::Dark => self.tau_dark,
            LightState::Lit => self.tau_light,
        }
    }

    /// Equilibrium concentration of `state`, µmol/L.
    pub fn equilibrium(&self, state: LightState) -> f64 {
        match state {
            LightState::Dark => self.eq_dark,
            LightState::Lit => self.eq_light,
        }
    }

    pub fn tau_dark(&self) -> f64 {
        self.tau_dark
    }

    pub fn tau_light(&self) -> f64 {
        self.tau_light
    }

    pub fn eq_dark(&self) -> f64 {
        self.eq_dark
    }

    pub fn eq_light(&self) -> f64 {
        self.eq_light
    }

    /// Drift slope, µmol/L per second.
    pub fn drift_slope(&self) -> f64 {
        self.drift_slope
    }

    /// Measurement-noise variance, (µmol/L)².
    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Measurement-noise standard deviation, µmol/L.
    pub fn noise_sigma(&self) -> f64 {
        math::sqrt(self.noise_var)
    }

    /// Concentration at the start of the modeled span, µmol/L.
    pub fn initial_conc(&self) -> f64 {
        self.initial_conc
    }

    /// Returns a copy with the noise variance replaced.
    pub fn with_noise_var(mut self, noise_var: f64) -> Result<Self> {
        require_finite("noise variance", noise_var)?;
        if noise_var < 0.0 {
            return Err(Error::InvalidParams(format!(
                "noise variance must be non-negative, got {noise_var}"
            )));
        }
        self.noise_var = noise_var;
        Ok(self)
    }

    /// Returns a copy with the initial concentration replaced.
    pub fn with_initial_conc(mut self, initial_conc: f64) -> Result<Self> {
        require_positive("initial concentration", initial_conc)?;
        self.initial_conc = initial_conc;
        Ok(self)
    }

    /// Physically legal but suspicious configurations.
    pub fn warnings(&self) -> Vec<ParamWarning> {
        let mut warnings = Vec::new();
        if self.eq_light <= self.eq_dark {
            warnings.push(ParamWarning::EquilibriumOrdering);
        }
        warnings
    }
}

fn require_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must be finite, got {value}")))
    }
}

fn require_positive(name: &str, value: f64) -> Result<()> {
    require_finite(name, value)?;
    if value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must be positive, got {value}")))
    }
}
