//! Deterministic mean response and noisy trace synthesis.
//!
//! Within one constant-illumination segment starting at `t_s` with
//! boundary value `c(t_s)`, the mean concentration is
//!
//! ```text
//! c(t) = c(t_s) + (c∞ - c(t_s)) · (1 - exp(-(t - t_s)/τ)) + m · (t - t_s)
//! ```
//!
//! where `c∞` and `τ` belong to the segment's illumination state and `m`
//! is the drift slope. Segment boundaries chain these solutions: the
//! value reached at the end of a segment becomes the start level of the
//! next, so the response is continuous across the whole schedule. The
//! exponential restarts only where the illumination state actually
//! changes; runs of equal state relax as one segment (schedules are
//! canonicalized that way).

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::math;
use crate::params::{ChannelParams, LightState};
use crate::schedule::IlluminationSchedule;
use crate::trace::{SampleGrid, Trace};

/// Positivity floor applied to noisy samples, µmol/L.
pub const CONC_FLOOR: f64 = 1e-6;

/// Mean concentration reached `elapsed` seconds into a segment of the
/// given illumination state, starting from `level`. Drift is not
/// included; callers add `drift_slope * elapsed` on top.
pub fn segment_mean(level: f64, state: LightState, elapsed: f64, params: &ChannelParams) -> f64 {
    debug_assert!(elapsed >= -1e-9);
    let eq = params.equilibrium(state);
    let tau = params.tau(state);
    level + (eq - level) * (1.0 - math::exp(-elapsed / tau))
}

/// Evaluates the mean response on `grid`, walking `schedule` segment by
/// segment. `initial` is the concentration at the schedule start;
/// `params_at` supplies the parameter set in force for a segment given
/// the segment's start time (constant for a stationary channel).
///
/// Returns raw values without the positivity check, so the fitter can
/// evaluate candidate parameter sets that transiently drive the model
/// negative.
pub(crate) fn mean_samples_with<F>(
    schedule: &IlluminationSchedule,
    grid: SampleGrid,
    initial: f64,
    params_at: F,
) -> Result<Vec<f64>>
where
    F: Fn(f64) -> ChannelParams,
{
    // the schedule span is half-open: its end time belongs to no segment
    let tol = 1e-9 * grid.dt;
    if grid.t_start < schedule.start() - tol || grid.t_last() >= schedule.end() - tol {
        return Err(Error::GridOutsideSchedule);
    }
    let segs = schedule.segments();
    let mut out = Vec::with_capacity(grid.len);
    let mut idx = 0;
    let mut level = initial;
    let mut params = params_at(segs[0].start);
    for n in 0..grid.len {
        let t = grid.time_at(n);
        while idx + 1 < segs.len() && t >= segs[idx].end {
            let seg = &segs[idx];
            let dur = seg.duration();
            level = segment_mean(level, seg.state, dur, &params) + params.drift_slope() * dur;
            idx += 1;
            params = params_at(segs[idx].start);
        }
        let seg = &segs[idx];
        let elapsed = t - seg.start;
        out.push(segment_mean(level, seg.state, elapsed, &params) + params.drift_slope() * elapsed);
    }
    Ok(out)
}

/// Deterministic mean concentration of a stationary channel on `grid`.
///
/// Fails if the grid leaves the schedule span or the parameters drive
/// the mean non-positive (the mean is reported unclamped).
pub fn mean_signal(
    schedule: &IlluminationSchedule,
    params: &ChannelParams,
    grid: SampleGrid,
) -> Result<Trace> {
    let values = mean_samples_with(schedule, grid, params.initial_conc(), |_| *params)?;
    Trace::from_grid(grid, values)
}

/// Noisy trace of a stationary channel: mean response plus white
/// Gaussian noise of the parameter set's variance, clamped to
/// [`CONC_FLOOR`]. A given `seed` reproduces the trace bit for bit;
/// zero noise variance returns exactly the mean signal.
pub fn simulate(
    schedule: &IlluminationSchedule,
    params: &ChannelParams,
    grid: SampleGrid,
    seed: u64,
) -> Result<Trace> {
    let mut values = mean_samples_with(schedule, grid, params.initial_conc(), |_| *params)?;
    if params.noise_var() > 0.0 {
        let sigma = params.noise_sigma();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in &mut values {
            let z: f64 = rng.sample(StandardNormal);
            *v += sigma * z;
            if *v < CONC_FLOOR {
                *v = CONC_FLOOR;
            }
        }
    }
    Trace::from_grid(grid, values)
}

/// Linear drift of the full parameter set between two endpoint sets,
/// used to emulate a slowly aging culture. At time `t` (seconds from
/// the ramp start) every parameter is interpolated linearly; beyond the
/// ramp span the endpoints hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRamp {
    start: ChannelParams,
    end: ChannelParams,
    duration: f64,
}

impl ParamRamp {
    pub fn new(start: ChannelParams, end: ChannelParams, duration_s: f64) -> Result<Self> {
        if !(duration_s.is_finite() && duration_s > 0.0) {
            return Err(Error::InvalidParams(alloc::format!(
                "ramp duration must be positive, got {duration_s}"
            )));
        }
        Ok(ParamRamp { start, end, duration: duration_s })
    }

    pub fn start_params(&self) -> &ChannelParams {
        &self.start
    }

    pub fn end_params(&self) -> &ChannelParams {
        &self.end
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Parameter set in force at `t` seconds after the ramp start.
    /// Interpolates every field; convex combinations of valid sets are
    /// valid, so no re-validation is needed.
    pub fn params_at(&self, t: f64) -> ChannelParams {
        let u = (t / self.duration).clamp(0.0, 1.0);
        let lerp = |a: f64, b: f64| a + (b - a) * u;
        ChannelParams::new_unchecked(
            lerp(self.start.tau_dark(), self.end.tau_dark()),
            lerp(self.start.tau_light(), self.end.tau_light()),
            lerp(self.start.eq_dark(), self.end.eq_dark()),
            lerp(self.start.eq_light(), self.end.eq_light()),
            lerp(self.start.drift_slope(), self.end.drift_slope()),
            lerp(self.start.noise_var(), self.end.noise_var()),
            lerp(self.start.initial_conc(), self.end.initial_conc()),
        )
    }
}

/// Mean response of a slowly varying channel. Parameters are frozen per
/// segment at the segment's start time, measured from the schedule
/// start.
pub fn mean_signal_ramp(
    schedule: &IlluminationSchedule,
    ramp: &ParamRamp,
    grid: SampleGrid,
) -> Result<Trace> {
    let t0 = schedule.start();
    let initial = ramp.start_params().initial_conc();
    let values = mean_samples_with(schedule, grid, initial, |t| ramp.params_at(t - t0))?;
    Trace::from_grid(grid, values)
}

/// Noisy trace of a slowly varying channel; the noise standard
/// deviation follows the interpolated variance sample by sample.
pub fn simulate_ramp(
    schedule: &IlluminationSchedule,
    ramp: &ParamRamp,
    grid: SampleGrid,
    seed: u64,
) -> Result<Trace> {
    let t0 = schedule.start();
    let initial = ramp.start_params().initial_conc();
    let mut values = mean_samples_with(schedule, grid, initial, |t| ramp.params_at(t - t0))?;
    if ramp.start_params().noise_var() > 0.0 || ramp.end_params().noise_var() > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (n, v) in values.iter_mut().enumerate() {
            let sigma = ramp.params_at(grid.time_at(n) - t0).noise_sigma();
            let z: f64 = rng.sample(StandardNormal);
            *v += sigma * z;
            if *v < CONC_FLOOR {
                *v = CONC_FLOOR;
            }
        }
    }
    Trace::from_grid(grid, values)
}
