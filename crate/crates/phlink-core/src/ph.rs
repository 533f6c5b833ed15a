//! pH to proton-concentration conversion.
//!
//! pH is the negative base-10 logarithm of the proton concentration in
//! mol/L; traces carry µmol/L, hence the offset of 6 decades.

use alloc::format;

use crate::error::{Error, Result};
use crate::math;

/// Converts a pH value to a proton concentration in µmol/L.
///
/// The accepted domain is the open interval (0, 14).
pub fn ph_to_conc(ph: f64) -> Result<f64> {
    if !(ph.is_finite() && ph > 0.0 && ph < 14.0) {
        return Err(Error::InvalidTrace(format!("pH {ph} outside the open interval (0, 14)")));
    }
    Ok(math::pow10(6.0 - ph))
}

/// Converts a proton concentration in µmol/L to pH.
pub fn conc_to_ph(conc: f64) -> Result<f64> {
    if !(conc.is_finite() && conc > 0.0) {
        return Err(Error::InvalidTrace(format!(
            "concentration must be positive to have a pH, got {conc}"
        )));
    }
    Ok(6.0 - math::log10(conc))
}
