//! Trace files.
//!
//! Plain comma-separated text with a single header row, decimal
//! points, no locale variance:
//!
//! ```text
//! t_seconds,conc_umol_per_L        (or t_seconds,ph)
//! 0.0000000000000000e0,2.8300000000000001e0
//! 1.0000000000000000e0,2.8267154296875000e0
//! ```
//!
//! Time is in seconds, concentrations in µmol/L; these units are part
//! of the file contract. Values are written with 17 significant
//! digits, which round-trips every f64 bit for bit. pH files hold
//! −log10 of the molar concentration and are converted on load, so the
//! in-memory trace is always a concentration trace.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use phlink_core::Trace;
use phlink_core::ph::{conc_to_ph, ph_to_conc};

/// Timestamps may deviate from the uniform grid by this much, seconds.
pub const UNIFORM_TOL: f64 = 1e-6;

/// Which quantity the value column holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TraceKind {
    /// Dimensionless pH.
    Ph,
    /// Proton concentration, µmol/L.
    Conc,
}

impl TraceKind {
    pub fn column(self) -> &'static str {
        match self {
            TraceKind::Ph => "ph",
            TraceKind::Conc => "conc_umol_per_L",
        }
    }

    fn header(self) -> String {
        format!("t_seconds,{}", self.column())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TraceFileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: expected header `{expected}`, found `{found}`")]
    BadHeader {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{path}: no data rows")]
    Empty { path: PathBuf },
    #[error("{path}: a single row leaves the sample interval undefined")]
    SingleRow { path: PathBuf },
    #[error("{path} line {line}: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error(
        "{path} line {line}: timestamp off the uniform grid by {deviation:e} s (tolerance {UNIFORM_TOL:e})"
    )]
    NonUniform {
        path: PathBuf,
        line: usize,
        deviation: f64,
    },
    #[error("{path} line {line}: {reason}")]
    BadValue {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}: {reason}")]
    Invalid { path: PathBuf, reason: String },
    #[error("refusing to write an empty trace to {path}")]
    EmptyWrite { path: PathBuf },
}

fn parse_field(
    field: &str,
    what: &str,
    path: &Path,
    line: usize,
) -> Result<f64, TraceFileError> {
    let v: f64 = field.trim().parse().map_err(|_| TraceFileError::Malformed {
        path: path.to_path_buf(),
        line,
        reason: format!("cannot parse {what} `{field}`"),
    })?;
    if !v.is_finite() {
        return Err(TraceFileError::Malformed {
            path: path.to_path_buf(),
            line,
            reason: format!("non-finite {what} `{field}`"),
        });
    }
    Ok(v)
}

/// Reads a trace file, inferring the sample interval from the
/// timestamps and converting pH files to concentration.
pub fn load_trace(path: &Path, kind: TraceKind) -> Result<Trace, TraceFileError> {
    let text = fs::read_to_string(path).map_err(|source| TraceFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, h)) => h.trim_end_matches('\r'),
        None => {
            return Err(TraceFileError::Empty {
                path: path.to_path_buf(),
            });
        }
    };
    let expected = kind.header();
    if header != expected {
        return Err(TraceFileError::BadHeader {
            path: path.to_path_buf(),
            expected,
            found: header.to_string(),
        });
    }

    let mut times = Vec::new();
    let mut values = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let row = raw.trim_end_matches('\r');
        let mut fields = row.split(',');
        let (t_field, v_field) = match (fields.next(), fields.next(), fields.next()) {
            (Some(t), Some(v), None) => (t, v),
            _ => {
                return Err(TraceFileError::Malformed {
                    path: path.to_path_buf(),
                    line,
                    reason: format!("expected two comma-separated fields, got `{row}`"),
                });
            }
        };
        let t = parse_field(t_field, "timestamp", path, line)?;
        let v = parse_field(v_field, kind.column(), path, line)?;
        let conc = match kind {
            TraceKind::Conc => v,
            TraceKind::Ph => ph_to_conc(v).map_err(|e| TraceFileError::BadValue {
                path: path.to_path_buf(),
                line,
                reason: e.to_string(),
            })?,
        };
        times.push(t);
        values.push(conc);
    }

    match times.len() {
        0 => {
            return Err(TraceFileError::Empty {
                path: path.to_path_buf(),
            });
        }
        1 => {
            return Err(TraceFileError::SingleRow {
                path: path.to_path_buf(),
            });
        }
        _ => {}
    }

    let t0 = times[0];
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(TraceFileError::NonUniform {
            path: path.to_path_buf(),
            line: 2,
            deviation: dt,
        });
    }
    for (i, &t) in times.iter().enumerate() {
        let deviation = (t - (t0 + i as f64 * dt)).abs();
        if deviation > UNIFORM_TOL {
            return Err(TraceFileError::NonUniform {
                path: path.to_path_buf(),
                line: i + 2,
                deviation,
            });
        }
    }

    Trace::new(t0, dt, values).map_err(|e| TraceFileError::Invalid {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Writes a trace file; pH files pass every value through the
/// concentration-to-pH conversion.
pub fn save_trace(trace: &Trace, path: &Path, kind: TraceKind) -> Result<(), TraceFileError> {
    if trace.is_empty() {
        return Err(TraceFileError::EmptyWrite {
            path: path.to_path_buf(),
        });
    }
    let mut buf = String::with_capacity(64 * (trace.len() + 1));
    buf.push_str(&kind.header());
    buf.push('\n');
    for (i, &conc) in trace.samples().iter().enumerate() {
        let v = match kind {
            TraceKind::Conc => conc,
            TraceKind::Ph => conc_to_ph(conc).map_err(|e| TraceFileError::BadValue {
                path: path.to_path_buf(),
                line: i + 2,
                reason: e.to_string(),
            })?,
        };
        buf.push_str(&format!("{:.16e},{:.16e}\n", trace.time_at(i), v));
    }
    let mut file = fs::File::create(path).map_err(|source| TraceFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(buf.as_bytes())
        .map_err(|source| TraceFileError::Io {
            path: path.to_path_buf(),
            source,
        })
}
