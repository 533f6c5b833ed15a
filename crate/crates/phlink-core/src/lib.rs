//! Channel model, parameter estimation, and symbol detection for a
//! molecular communication link in which an optical transmitter drives
//! light-gated proton pumps in a bacterial receiver and information is
//! read back out of the medium's proton concentration.
//!
//! The deterministic channel response is piecewise first-order: in each
//! interval of constant illumination the concentration relaxes
//! exponentially toward the state's equilibrium level, on top of a slow
//! linear drift and white Gaussian measurement noise. On-off keying maps
//! bit 1 to a light pulse at the start of the symbol interval and bit 0
//! to darkness.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the `std` feature
//! only switches the math backend. File I/O, configuration files, and the
//! command-line front end live in the companion `phlink` crate.
//!
//! Modules follow the processing chain:
//!
//! - [`params`], [`config`]: channel parameters and link-layer settings
//! - [`schedule`]: bit sequences to illumination timelines
//! - [`signal`]: deterministic mean response and noisy trace synthesis
//! - [`oracle`]: direct ODE integration used to cross-check [`signal`]
//! - [`estimation`]: least-squares parameter fits on training windows
//! - [`detection`]: maximum-likelihood and threshold symbol detectors
//! - [`link`]: framed transmission schemes and error accounting
//! - [`ph`]: pH to proton-concentration conversion

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod config;
pub mod detection;
pub mod estimation;
mod error;
pub mod link;
mod math;
pub mod oracle;
pub mod params;
pub mod ph;
pub mod schedule;
pub mod signal;
pub mod trace;

pub use config::LinkConfig;
pub use error::{Error, Result};
pub use params::{ChannelParams, LightState};
pub use schedule::IlluminationSchedule;
pub use trace::{SampleGrid, Trace};
