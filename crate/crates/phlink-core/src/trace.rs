//! Uniformly sampled concentration traces.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Uniform sampling grid: `len` samples at `t_start + i * dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleGrid {
    pub t_start: f64,
    pub dt: f64,
    pub len: usize,
}

impl SampleGrid {
    pub fn new(t_start: f64, dt: f64, len: usize) -> Result<Self> {
        if !t_start.is_finite() {
            return Err(Error::InvalidTrace(format!("non-finite grid start {t_start}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidTrace(format!("sample interval must be positive, got {dt}")));
        }
        if len == 0 {
            return Err(Error::InvalidTrace("grid has no samples".into()));
        }
        Ok(SampleGrid { t_start, dt, len })
    }

    /// Timestamp of sample `i`.
    pub fn time_at(&self, i: usize) -> f64 {
        self.t_start + i as f64 * self.dt
    }

    /// Timestamp of the last sample.
    pub fn t_last(&self) -> f64 {
        self.time_at(self.len - 1)
    }
}

/// Uniformly sampled proton-concentration trace, µmol/L.
///
/// Invariant: every sample is finite and strictly positive (it is a
/// concentration), and the grid has a positive sample interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    t_start: f64,
    dt: f64,
    samples: Vec<f64>,
}

impl Trace {
    pub fn new(t_start: f64, dt: f64, samples: Vec<f64>) -> Result<Self> {
        let grid = SampleGrid::new(t_start, dt, samples.len().max(1))?;
        if samples.is_empty() {
            return Err(Error::InvalidTrace("trace has no samples".into()));
        }
        for (i, &v) in samples.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidTrace(format!(
                    "sample {i} is not a positive finite concentration: {v}"
                )));
            }
        }
        Ok(Trace { t_start: grid.t_start, dt: grid.dt, samples })
    }

    pub fn from_grid(grid: SampleGrid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len {
            return Err(Error::LengthMismatch { left: grid.len, right: samples.len() });
        }
        Trace::new(grid.t_start, grid.dt, samples)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn grid(&self) -> SampleGrid {
        SampleGrid { t_start: self.t_start, dt: self.dt, len: self.samples.len() }
    }

    /// Timestamp of sample `i`.
    pub fn time_at(&self, i: usize) -> f64 {
        self.t_start + i as f64 * self.dt
    }

    /// Copies out the sample range `[from, to)` as a trace of its own;
    /// timestamps are preserved.
    pub fn slice(&self, from: usize, to: usize) -> Result<Trace> {
        if from >= to || to > self.samples.len() {
            return Err(Error::WindowMismatch(format!(
                "slice {from}..{to} outside trace of {} samples",
                self.samples.len()
            )));
        }
        Ok(Trace {
            t_start: self.time_at(from),
            dt: self.dt,
            samples: self.samples[from..to].to_vec(),
        })
    }
}
