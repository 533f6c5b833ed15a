//! Least-squares channel estimation over a training window.
//!
//! The estimate minimizes the mean squared deviation between a measured
//! trace window and the deterministic mean response for known training
//! bits; the minimized objective doubles as the noise-variance estimate.
//! The search runs a damped Gauss-Newton iteration (Levenberg-style
//! diagonal scaling, step rejection on objective increase) with
//! finite-difference Jacobians, projected onto box bounds, from a small
//! deterministic grid of data-driven starting points.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::config::LinkConfig;
use crate::error::{Error, Result};
use crate::math;
use crate::params::{ChannelParams, LightState};
use crate::trace::Trace;

const P_TAU_DARK: usize = 0;
const P_TAU_LIT: usize = 1;
const P_EQ_DARK: usize = 2;
const P_EQ_LIT: usize = 3;
const P_DRIFT: usize = 4;
const P_INIT: usize = 5;
const NPAR: usize = 6;

const MAX_ITER: usize = 150;
/// Stop when the relative objective decrease of an accepted step falls
/// below this.
const REL_TOL: f64 = 1e-9;
/// Absolute objective floor; below it the data is explained to roundoff.
const ABS_TOL: f64 = 1e-20;
/// Relative finite-difference step and its absolute floor.
const FD_REL: f64 = 1e-6;
const FD_ABS: f64 = 1e-9;

/// Box bounds of the parameter search, in internal units (seconds,
/// µmol/L, µmol/L per second).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitBounds {
    pub tau_min: f64,
    pub tau_max: f64,
    pub conc_min: f64,
    pub conc_max: f64,
    pub drift_min: f64,
    pub drift_max: f64,
}

impl Default for FitBounds {
    /// Covers time constants from 3 s to an hour, concentrations from
    /// 0.01 to 100 µmol/L (pH 8 to 4), and drift up to ±1 µmol/L per
    /// minute; generous relative to anything the receiver produces.
    fn default() -> Self {
        FitBounds {
            tau_min: 3.0,
            tau_max: 3600.0,
            conc_min: 0.01,
            conc_max: 100.0,
            drift_min: -1.0 / 60.0,
            drift_max: 1.0 / 60.0,
        }
    }
}

impl FitBounds {
    fn validate(&self) -> Result<()> {
        let ordered = self.tau_min > 0.0
            && self.tau_min < self.tau_max
            && self.conc_min > 0.0
            && self.conc_min < self.conc_max
            && self.drift_min < self.drift_max;
        let finite = [
            self.tau_min,
            self.tau_max,
            self.conc_min,
            self.conc_max,
            self.drift_min,
            self.drift_max,
        ]
        .iter()
        .all(|v| v.is_finite());
        if ordered && finite {
            Ok(())
        } else {
            Err(Error::InvalidParams("fit bounds must be finite, ordered, and positive".into()))
        }
    }

    fn lower(&self) -> [f64; NPAR] {
        [self.tau_min, self.tau_min, self.conc_min, self.conc_min, self.drift_min, self.conc_min]
    }

    fn upper(&self) -> [f64; NPAR] {
        [self.tau_max, self.tau_max, self.conc_max, self.conc_max, self.drift_max, self.conc_max]
    }
}

/// One estimation task: a trace window, the training bits that cover
/// it, and the search setup.
#[derive(Debug, Clone)]
pub struct FitRequest<'a> {
    pub trace: &'a Trace,
    pub bits: &'a [bool],
    /// Sample-index range of the window inside the trace; must equal
    /// `bits.len() * cfg.samples_per_symbol()` samples.
    pub window: Range<usize>,
    pub cfg: &'a LinkConfig,
    /// Optional warm start, included as an extra candidate alongside
    /// the built-in grid.
    pub init: Option<ChannelParams>,
    pub bounds: FitBounds,
}

impl<'a> FitRequest<'a> {
    /// Window starting at sample `window_start`, spanning exactly
    /// `bits.len()` symbol intervals.
    pub fn new(
        trace: &'a Trace,
        bits: &'a [bool],
        window_start: usize,
        cfg: &'a LinkConfig,
    ) -> Result<Self> {
        let req = FitRequest {
            trace,
            bits,
            window: window_start..window_start + bits.len() * cfg.samples_per_symbol(),
            cfg,
            init: None,
            bounds: FitBounds::default(),
        };
        req.validate()?;
        Ok(req)
    }

    pub fn with_init(mut self, init: ChannelParams) -> Self {
        self.init = Some(init);
        self
    }

    pub fn with_bounds(mut self, bounds: FitBounds) -> Self {
        self.bounds = bounds;
        self
    }

    fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if self.bits.is_empty() {
            return Err(Error::WindowMismatch("no training bits".into()));
        }
        let expected = self.bits.len() * self.cfg.samples_per_symbol();
        if self.window.end.saturating_sub(self.window.start) != expected {
            return Err(Error::WindowMismatch(format!(
                "window of {} samples does not cover {} symbols of {} samples",
                self.window.end.saturating_sub(self.window.start),
                self.bits.len(),
                self.cfg.samples_per_symbol()
            )));
        }
        if self.window.end > self.trace.len() {
            return Err(Error::WindowMismatch(format!(
                "window {}..{} outside trace of {} samples",
                self.window.start,
                self.window.end,
                self.trace.len()
            )));
        }
        let dt = self.cfg.sample_interval();
        if (self.trace.dt() - dt).abs() > 1e-9 * dt {
            return Err(Error::WindowMismatch(format!(
                "trace sample interval {} does not match the configured {}",
                self.trace.dt(),
                dt
            )));
        }
        Ok(())
    }
}

/// Outcome of a fit: the estimate (noise variance filled in from the
/// objective), diagnostics, and the residuals at the optimum.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: ChannelParams,
    /// Mean squared deviation at the estimate, (µmol/L)².
    pub objective: f64,
    /// Accepted Gauss-Newton steps of the winning start.
    pub iterations: usize,
    pub converged: bool,
    /// `measured - model` over the window at the estimate.
    pub residuals: Vec<f64>,
}

/// Noise-variance estimate of a fit: the minimized mean squared
/// deviation.
pub fn noise_variance(fit: &FitResult) -> f64 {
    fit.objective
}

/// Mean squared deviation between the window and the mean response of
/// `candidate` (its noise variance is ignored).
pub fn objective(candidate: &ChannelParams, req: &FitRequest<'_>) -> Result<f64> {
    req.validate()?;
    let problem = Problem::new(req);
    let mut scratch = vec![0.0; problem.y.len()];
    Ok(problem.mse(&pack(candidate), &mut scratch))
}

/// Least-squares estimate of the channel parameters on a training
/// window. The training bits must exercise both illumination states.
///
/// Ties between starting points that reach bit-equal objectives go to
/// the smaller parameter vector (Euclidean norm of the internal
/// representation), keeping the result deterministic.
pub fn fit(req: &FitRequest<'_>) -> Result<FitResult> {
    req.validate()?;
    if !req.bits.contains(&true) || !req.bits.contains(&false) {
        return Err(Error::Unidentifiable(
            "training bits must contain both a 0 and a 1 to excite both states".into(),
        ));
    }
    let problem = Problem::new(req);
    let lo = req.bounds.lower();
    let hi = req.bounds.upper();

    let mut starts = Vec::new();
    if let Some(init) = &req.init {
        starts.push(pack(init));
    }
    starts.extend(grid_starts(&problem, &req.bounds));

    let mut solver = Solver::new(problem.y.len());
    let mut best: Option<(SolveOut, f64)> = None;
    for start in starts {
        let out = solver.run(&problem, clamp(start, &lo, &hi), &lo, &hi);
        let n = norm(&out.p);
        let better = match &best {
            None => true,
            Some((b, bn)) => out.f < b.f || (out.f == b.f && n < *bn),
        };
        if better {
            best = Some((out, n));
        }
    }
    let (out, _) = best.expect("at least one start");

    let mut residuals = vec![0.0; problem.y.len()];
    problem.residuals_into(&out.p, &mut residuals);
    let params = ChannelParams::new(
        out.p[P_TAU_DARK],
        out.p[P_TAU_LIT],
        out.p[P_EQ_DARK],
        out.p[P_EQ_LIT],
        out.p[P_DRIFT],
        out.f,
        out.p[P_INIT],
    )?;
    Ok(FitResult {
        params,
        objective: out.f,
        iterations: out.iters,
        converged: out.converged,
        residuals,
    })
}

fn pack(p: &ChannelParams) -> [f64; NPAR] {
    [p.tau_dark(), p.tau_light(), p.eq_dark(), p.eq_light(), p.drift_slope(), p.initial_conc()]
}

fn clamp(mut p: [f64; NPAR], lo: &[f64; NPAR], hi: &[f64; NPAR]) -> [f64; NPAR] {
    for j in 0..NPAR {
        p[j] = p[j].clamp(lo[j], hi[j]);
    }
    p
}

fn norm(p: &[f64; NPAR]) -> f64 {
    math::sqrt(p.iter().map(|v| v * v).sum())
}

/// The window data with its bits expanded into merged constant-state
/// sample runs, mirroring schedule canonicalization.
struct Problem<'a> {
    y: &'a [f64],
    runs: Vec<Run>,
    dt: f64,
}

#[derive(Clone, Copy)]
struct Run {
    start: usize,
    len: usize,
    state: LightState,
}

impl<'a> Problem<'a> {
    fn new(req: &FitRequest<'a>) -> Self {
        let spsym = req.cfg.samples_per_symbol();
        let lit = req.cfg.lit_samples();
        let mut runs: Vec<Run> = Vec::with_capacity(2 * req.bits.len());
        let push = |runs: &mut Vec<Run>, start: usize, len: usize, state: LightState| {
            match runs.last_mut() {
                Some(last) if last.state == state => last.len += len,
                _ => runs.push(Run { start, len, state }),
            }
        };
        for (k, &bit) in req.bits.iter().enumerate() {
            let s0 = k * spsym;
            if bit {
                push(&mut runs, s0, lit, LightState::Lit);
                push(&mut runs, s0 + lit, spsym - lit, LightState::Dark);
            } else {
                push(&mut runs, s0, spsym, LightState::Dark);
            }
        }
        Problem {
            y: &req.trace.samples()[req.window.clone()],
            runs,
            dt: req.cfg.sample_interval(),
        }
    }

    fn model_into(&self, p: &[f64; NPAR], out: &mut [f64]) {
        let mut level = p[P_INIT];
        let drift = p[P_DRIFT];
        for run in &self.runs {
            let (eq, tau) = match run.state {
                LightState::Dark => (p[P_EQ_DARK], p[P_TAU_DARK]),
                LightState::Lit => (p[P_EQ_LIT], p[P_TAU_LIT]),
            };
            for j in 0..run.len {
                let e = j as f64 * self.dt;
                out[run.start + j] = level + (eq - level) * (1.0 - math::exp(-e / tau)) + drift * e;
            }
            let dur = run.len as f64 * self.dt;
            level = level + (eq - level) * (1.0 - math::exp(-dur / tau)) + drift * dur;
        }
    }

    fn residuals_into(&self, p: &[f64; NPAR], out: &mut [f64]) {
        self.model_into(p, out);
        for (r, &y) in out.iter_mut().zip(self.y) {
            *r = y - *r;
        }
    }

    fn mse(&self, p: &[f64; NPAR], scratch: &mut [f64]) -> f64 {
        self.residuals_into(p, scratch);
        scratch.iter().map(|r| r * r).sum::<f64>() / scratch.len() as f64
    }

    fn dark_runs(&self) -> impl Iterator<Item = &Run> {
        self.runs.iter().filter(|r| r.state == LightState::Dark)
    }
}

/// Data-driven starting points: time constants of 1 and 5 minutes
/// crossed with zero and a robust (Theil-Sen) drift estimate from the
/// dark samples; level starts from the first/last dark-run means and
/// the window maximum.
fn grid_starts(problem: &Problem<'_>, bounds: &FitBounds) -> Vec<[f64; NPAR]> {
    let mean_of = |run: &Run| {
        let s = &problem.y[run.start..run.start + run.len];
        s.iter().sum::<f64>() / s.len() as f64
    };
    let first_dark = problem.dark_runs().next().map(|r| mean_of(r)).unwrap_or(problem.y[0]);
    let last_dark =
        problem.dark_runs().last().map(|r| mean_of(r)).unwrap_or(problem.y[problem.y.len() - 1]);
    let wmax = problem.y.iter().cloned().fold(f64::MIN, f64::max);
    let ts = theil_sen_dark(problem);

    let lo = bounds.lower();
    let hi = bounds.upper();
    let mut starts = Vec::with_capacity(8);
    for tau_dark in [60.0, 300.0] {
        for tau_lit in [60.0, 300.0] {
            for drift in [0.0, ts] {
                starts.push(clamp(
                    [tau_dark, tau_lit, last_dark, wmax, drift, first_dark],
                    &lo,
                    &hi,
                ));
            }
        }
    }
    starts
}

/// Median pairwise slope of the dark-run samples; robust against the
/// exponential transients that contaminate an ordinary regression.
fn theil_sen_dark(problem: &Problem<'_>) -> f64 {
    let mut pts: Vec<(usize, f64)> = Vec::new();
    for run in problem.dark_runs() {
        for j in 0..run.len {
            pts.push((run.start + j, problem.y[run.start + j]));
        }
    }
    if pts.len() < 2 {
        return 0.0;
    }
    // cap the O(n^2) pair count
    let stride = pts.len().div_ceil(200);
    let pts: Vec<(usize, f64)> = pts.into_iter().step_by(stride).collect();
    let mut slopes = Vec::with_capacity(pts.len() * (pts.len() - 1) / 2);
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let dt_ij = (pts[j].0 - pts[i].0) as f64 * problem.dt;
            if dt_ij > 0.0 {
                slopes.push((pts[j].1 - pts[i].1) / dt_ij);
            }
        }
    }
    if slopes.is_empty() {
        return 0.0;
    }
    slopes.sort_unstable_by(f64::total_cmp);
    slopes[slopes.len() / 2]
}

struct SolveOut {
    p: [f64; NPAR],
    f: f64,
    iters: usize,
    converged: bool,
}

/// Reusable buffers for one window size.
struct Solver {
    resid: Vec<f64>,
    resid_h: Vec<f64>,
    jac: Vec<f64>, // column-major m x NPAR
}

impl Solver {
    fn new(m: usize) -> Self {
        Solver { resid: vec![0.0; m], resid_h: vec![0.0; m], jac: vec![0.0; m * NPAR] }
    }

    fn run(&mut self, problem: &Problem<'_>, p0: [f64; NPAR], lo: &[f64; NPAR], hi: &[f64; NPAR]) -> SolveOut {
        let m = problem.y.len();
        let mut p = p0;
        problem.residuals_into(&p, &mut self.resid);
        let mut f = sum_sq(&self.resid) / m as f64;
        let mut lambda = 1e-3;
        let mut iters = 0;
        let mut converged = false;

        for _ in 0..MAX_ITER {
            if f < ABS_TOL {
                converged = true;
                break;
            }
            self.jacobian(problem, &p, lo, hi);
            // normal equations on the residual Jacobian: J^T J delta = -J^T r
            let mut a = [[0.0f64; NPAR]; NPAR];
            let mut g = [0.0f64; NPAR];
            for j in 0..NPAR {
                let col_j = &self.jac[j * m..(j + 1) * m];
                for k in j..NPAR {
                    let col_k = &self.jac[k * m..(k + 1) * m];
                    let dot: f64 = col_j.iter().zip(col_k).map(|(x, y)| x * y).sum();
                    a[j][k] = dot;
                    a[k][j] = dot;
                }
                g[j] = col_j.iter().zip(&self.resid).map(|(x, r)| x * r).sum();
            }

            let mut accepted = false;
            while lambda <= 1e12 {
                let mut damped = a;
                for j in 0..NPAR {
                    let d = a[j][j].max(1e-30);
                    damped[j][j] += lambda * d;
                }
                let mut rhs = [0.0f64; NPAR];
                for j in 0..NPAR {
                    rhs[j] = -g[j];
                }
                let Some(delta) = solve_sym(&mut damped, &rhs) else {
                    lambda *= 4.0;
                    continue;
                };
                let mut p_new = p;
                for j in 0..NPAR {
                    p_new[j] = (p[j] + delta[j]).clamp(lo[j], hi[j]);
                }
                problem.residuals_into(&p_new, &mut self.resid_h);
                let f_new = sum_sq(&self.resid_h) / m as f64;
                if f_new.is_finite() && f_new < f {
                    let rel_drop = (f - f_new) / f.max(1e-300);
                    p = p_new;
                    core::mem::swap(&mut self.resid, &mut self.resid_h);
                    f = f_new;
                    lambda = (lambda / 3.0).max(1e-12);
                    iters += 1;
                    accepted = true;
                    if rel_drop < REL_TOL {
                        converged = true;
                    }
                    break;
                }
                lambda *= 4.0;
            }
            if !accepted {
                // no downhill step at any damping: stationary to working
                // precision
                converged = true;
                break;
            }
            if converged {
                break;
            }
        }

        SolveOut { p, f, iters, converged }
    }

    /// Forward differences on the residuals; steps back off the upper
    /// bound so candidates stay inside the box.
    fn jacobian(&mut self, problem: &Problem<'_>, p: &[f64; NPAR], lo: &[f64; NPAR], hi: &[f64; NPAR]) {
        let m = problem.y.len();
        for j in 0..NPAR {
            let mut h = (FD_REL * p[j].abs()).max(FD_ABS);
            if p[j] + h > hi[j] && p[j] - h >= lo[j] {
                h = -h;
            }
            let mut p_h = *p;
            p_h[j] += h;
            problem.residuals_into(&p_h, &mut self.resid_h);
            let col = &mut self.jac[j * m..(j + 1) * m];
            for i in 0..m {
                col[i] = (self.resid_h[i] - self.resid[i]) / h;
            }
        }
    }
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Gaussian elimination with partial pivoting on a 6x6 system.
fn solve_sym(a: &mut [[f64; NPAR]; NPAR], b: &[f64; NPAR]) -> Option<[f64; NPAR]> {
    let mut x = *b;
    for col in 0..NPAR {
        let mut pivot = col;
        for row in col + 1..NPAR {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            a.swap(pivot, col);
            x.swap(pivot, col);
        }
        let inv = 1.0 / a[col][col];
        for row in col + 1..NPAR {
            let factor = a[row][col] * inv;
            if factor == 0.0 {
                continue;
            }
            for k in col..NPAR {
                a[row][k] -= factor * a[col][k];
            }
            x[row] -= factor * x[col];
        }
    }
    for col in (0..NPAR).rev() {
        let mut sum = x[col];
        for k in col + 1..NPAR {
            sum -= a[col][k] * x[k];
        }
        x[col] = sum / a[col][col];
    }
    if x.iter().all(|v| v.is_finite()) { Some(x) } else { None }
}
