//! Direct numerical integration of the receiver's rate equation,
//!
//! ```text
//! dc/dt = i(t) · ρ - β(t) · (c - c_eq)
//! ```
//!
//! with `i(t)` the 0/1 illumination drive, `ρ` the lit proton-pump rate,
//! and `β(t)` the state-dependent uptake rate. This is the model the
//! closed-form recursion in [`crate::signal`] solves analytically (with
//! `τ = 1/β` and per-state equilibria `c_eq` and `c_eq + ρ/β`); keeping
//! an independent integrator around lets tests confirm the two agree
//! instead of trusting the algebra.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::params::LightState;
use crate::schedule::IlluminationSchedule;
use crate::trace::{SampleGrid, Trace};

/// Substeps per sample interval; the integrator subdivides further at
/// segment boundaries so illumination never changes inside a step.
const SUBSTEPS: usize = 10;

/// Integrates the rate equation over `schedule` with classic
/// fourth-order Runge-Kutta and returns the solution on `grid`.
///
/// Rates are per second: `pump_rate` in µmol/L/s, `uptake_dark` and
/// `uptake_lit` in 1/s. `c_init` is the concentration at the schedule
/// start. The drive is `1` in lit segments and `0` in dark ones.
pub fn ode_oracle(
    schedule: &IlluminationSchedule,
    pump_rate: f64,
    uptake_dark: f64,
    uptake_lit: f64,
    eq_conc: f64,
    c_init: f64,
    grid: SampleGrid,
) -> Result<Trace> {
    if !(pump_rate.is_finite() && pump_rate >= 0.0) {
        return Err(Error::InvalidParams(alloc::format!(
            "pump rate must be non-negative, got {pump_rate}"
        )));
    }
    for (name, v) in [("dark uptake rate", uptake_dark), ("lit uptake rate", uptake_lit)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParams(alloc::format!("{name} must be positive, got {v}")));
        }
    }
    if !(eq_conc.is_finite() && eq_conc > 0.0) {
        return Err(Error::InvalidParams(alloc::format!(
            "equilibrium concentration must be positive, got {eq_conc}"
        )));
    }
    if !(c_init.is_finite() && c_init > 0.0) {
        return Err(Error::InvalidParams(alloc::format!(
            "initial concentration must be positive, got {c_init}"
        )));
    }
    let tol = 1e-9 * grid.dt;
    if grid.t_start < schedule.start() - tol || grid.t_last() >= schedule.end() + tol {
        return Err(Error::GridOutsideSchedule);
    }

    let h_max = grid.dt / SUBSTEPS as f64;
    let mut out = Vec::with_capacity(grid.len);
    let mut c = c_init;
    let mut t = schedule.start();
    for n in 0..grid.len {
        let target = grid.time_at(n);
        c = integrate_to(schedule, pump_rate, uptake_dark, uptake_lit, eq_conc, c, t, target, h_max)?;
        t = target;
        out.push(c);
    }
    Trace::from_grid(grid, out)
}

/// Advances the solution from `t0` to `t1`, splitting at segment
/// boundaries and then into steps of at most `h_max`.
#[allow(clippy::too_many_arguments)]
fn integrate_to(
    schedule: &IlluminationSchedule,
    pump_rate: f64,
    uptake_dark: f64,
    uptake_lit: f64,
    eq_conc: f64,
    mut c: f64,
    t0: f64,
    t1: f64,
    h_max: f64,
) -> Result<f64> {
    if t1 <= t0 {
        return Ok(c);
    }
    for seg in schedule.segments() {
        let lo = if seg.start > t0 { seg.start } else { t0 };
        let hi = if seg.end < t1 { seg.end } else { t1 };
        if hi <= lo {
            continue;
        }
        let uptake = match seg.state {
            LightState::Dark => uptake_dark,
            LightState::Lit => uptake_lit,
        };
        let drive = match seg.state {
            LightState::Dark => 0.0,
            LightState::Lit => pump_rate,
        };
        let span = hi - lo;
        let steps = crate::math::ceil(span / h_max) as usize;
        let steps = steps.max(1);
        let h = span / steps as f64;
        let f = |c: f64| drive - uptake * (c - eq_conc);
        for _ in 0..steps {
            let k1 = f(c);
            let k2 = f(c + 0.5 * h * k1);
            let k3 = f(c + 0.5 * h * k2);
            let k4 = f(c + h * k3);
            c += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if !c.is_finite() {
                return Err(Error::NonFinite("ODE state diverged".into()));
            }
        }
    }
    Ok(c)
}
