//! Run metadata.
//!
//! Every command drops a `metadata.toml` next to its outputs: the
//! fully resolved configuration plus a `[provenance]` section naming
//! the command, its arguments, the seed, the RNG family, and a hash of
//! the configuration itself. The record deliberately contains no
//! timestamps or host details, so re-running a command from its
//! metadata reproduces the primary outputs byte for byte.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::{BitsSection, ExperimentConfig, Provenance, Resolved, bits_to_string};
use crate::error::CliError;

/// Hex SHA-256 of the configuration serialized without provenance.
pub fn config_digest(config: &ExperimentConfig) -> Result<String, CliError> {
    let mut stripped = config.clone();
    stripped.provenance = None;
    let text = toml::to_string_pretty(&stripped)
        .map_err(|e| CliError::Config(format!("cannot serialize configuration: {e}")))?;
    let digest = Sha256::digest(text.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// The configuration as the run actually used it: the transmitted
/// sequence written out in full, so the record stands on its own.
pub fn resolved_config(config: &ExperimentConfig, resolved: &Resolved) -> ExperimentConfig {
    let mut out = config.clone();
    out.bits = BitsSection {
        pattern: Some(bits_to_string(&resolved.truth)),
        length: None,
        seed: None,
    };
    out.provenance = None;
    out
}

pub fn write_metadata(
    config: &ExperimentConfig,
    command: &str,
    args: &[String],
    path: &Path,
) -> Result<(), CliError> {
    let mut record = config.clone();
    record.provenance = Some(Provenance {
        command: command.to_string(),
        args: args.to_vec(),
        seed: record.run.seed,
        rng: "chacha8".to_string(),
        config_sha256: config_digest(&record)?,
    });
    let text = toml::to_string_pretty(&record)
        .map_err(|e| CliError::Config(format!("cannot serialize metadata: {e}")))?;
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}
