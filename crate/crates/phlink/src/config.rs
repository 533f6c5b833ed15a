//! Experiment configuration.
//!
//! TOML with strict unknown-key rejection (a silently ignored typo
//! would corrupt an experiment). Time constants, drift, and margins
//! are given in minutes and noise as a standard deviation, the units
//! used in reports; they are converted once, here, when the file is
//! resolved into core types.
//!
//! ```toml
//! [channel]
//! tau0_min = 6.41         # dark relaxation time constant, minutes
//! tau1_min = 8.40         # lit relaxation time constant, minutes
//! c0_inf = 2.83           # dark equilibrium, µmol/L
//! c1_inf = 5.77           # lit equilibrium, µmol/L
//! drift_per_min = -0.0039 # slow decay slope, µmol/L per minute
//! sigma = 0.0038          # measurement noise std dev, µmol/L
//! # c_init defaults to c0_inf
//!
//! [scenario]
//! kind = "stationary"     # or "ramp" with [channel_end] + duration_min
//!
//! [link]
//! # defaults: 60 s symbols, 25% duty, 1 Hz sampling, frames of 40
//! # with pilot pattern "1100101000", 30 s smoothing, 20 s slope span,
//! # threshold weight 0.5, re-estimation every 10 over the last 20
//! scheme = "pilot-based"  # or "fixed", "data-aided"
//! detector = "ml"         # or "threshold", "ml-genie"
//!
//! [bits]
//! length = 120            # total transmitted symbols; payload drawn
//! # from the run seed, pilots stamped per the scheme. Alternatively
//! # pattern = "1001..." gives the full sequence verbatim.
//!
//! [run]
//! seed = 0
//! margin_min = 0.0        # dark-adaptation lead before symbol 1
//! ```

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use phlink_core::link::{DetectorChoice, FramePlan, Scheme};
use phlink_core::schedule::Segment;
use phlink_core::{
    ChannelParams, IlluminationSchedule, LightState, LinkConfig, SampleGrid,
    signal::ParamRamp,
};

use crate::error::CliError;
use crate::seed::subseed;

fn cfg_err(section: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{section}: {msg}"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub channel: ChannelSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_end: Option<ChannelSection>,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub link: LinkSection,
    pub bits: BitsSection,
    #[serde(default)]
    pub run: RunSection,
    /// Present only in metadata records written by a command.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub tau0_min: f64,
    pub tau1_min: f64,
    pub c0_inf: f64,
    pub c1_inf: f64,
    #[serde(default)]
    pub drift_per_min: f64,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_init: Option<f64>,
}

impl ChannelSection {
    pub fn to_params(&self, section: &str) -> Result<ChannelParams, CliError> {
        if !(self.sigma >= 0.0) {
            return Err(cfg_err(section, "sigma must be non-negative"));
        }
        ChannelParams::from_minutes(
            self.tau0_min,
            self.tau1_min,
            self.c0_inf,
            self.c1_inf,
            self.drift_per_min,
            self.sigma * self.sigma,
            self.c_init.unwrap_or(self.c0_inf),
        )
        .map_err(|e| cfg_err(section, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    #[default]
    Stationary,
    Ramp,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    #[serde(default)]
    pub kind: ScenarioKind,
    /// Ramp span, minutes; the parameter sets interpolate linearly
    /// over it and hold at the endpoint beyond.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_min: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    Fixed,
    #[default]
    PilotBased,
    DataAided,
}

impl SchemeName {
    pub fn to_core(self) -> Scheme {
        match self {
            SchemeName::Fixed => Scheme::Fixed,
            SchemeName::PilotBased => Scheme::PilotBased,
            SchemeName::DataAided => Scheme::DataAided,
        }
    }
}

impl std::fmt::Display for SchemeName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SchemeName::Fixed => "fixed",
            SchemeName::PilotBased => "pilot-based",
            SchemeName::DataAided => "data-aided",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorName {
    #[default]
    Ml,
    MlGenie,
    Threshold,
}

impl DetectorName {
    pub fn to_core(self) -> DetectorChoice {
        match self {
            DetectorName::Ml => DetectorChoice::MlDecisionDirected,
            DetectorName::MlGenie => DetectorChoice::MlGenie,
            DetectorName::Threshold => DetectorChoice::Threshold,
        }
    }
}

impl std::fmt::Display for DetectorName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DetectorName::Ml => "ml",
            DetectorName::MlGenie => "ml-genie",
            DetectorName::Threshold => "threshold",
        })
    }
}

fn d_symbol_period() -> f64 {
    60.0
}
fn d_duty() -> f64 {
    0.25
}
fn d_sample_interval() -> f64 {
    1.0
}
fn d_frame_len() -> usize {
    40
}
fn d_pilot_pattern() -> String {
    "1100101000".into()
}
fn d_smooth() -> f64 {
    30.0
}
fn d_diff() -> f64 {
    20.0
}
fn d_gamma() -> f64 {
    0.5
}
fn d_reest_period() -> usize {
    10
}
fn d_reest_window() -> usize {
    20
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    #[serde(default = "d_symbol_period")]
    pub symbol_period_s: f64,
    #[serde(default = "d_duty")]
    pub duty: f64,
    #[serde(default = "d_sample_interval")]
    pub sample_interval_s: f64,
    #[serde(default = "d_frame_len")]
    pub frame_len: usize,
    /// Known symbols stamped at the head of each frame (or once, as a
    /// preamble); its length is the pilot count.
    #[serde(default = "d_pilot_pattern")]
    pub pilot_pattern: String,
    #[serde(default = "d_smooth")]
    pub smooth_window_s: f64,
    #[serde(default = "d_diff")]
    pub diff_window_s: f64,
    #[serde(default = "d_gamma")]
    pub threshold_weight: f64,
    #[serde(default = "d_reest_period")]
    pub reest_period: usize,
    #[serde(default = "d_reest_window")]
    pub reest_window: usize,
    #[serde(default)]
    pub scheme: SchemeName,
    #[serde(default)]
    pub detector: DetectorName,
}

impl Default for LinkSection {
    fn default() -> Self {
        LinkSection {
            symbol_period_s: d_symbol_period(),
            duty: d_duty(),
            sample_interval_s: d_sample_interval(),
            frame_len: d_frame_len(),
            pilot_pattern: d_pilot_pattern(),
            smooth_window_s: d_smooth(),
            diff_window_s: d_diff(),
            threshold_weight: d_gamma(),
            reest_period: d_reest_period(),
            reest_window: d_reest_window(),
            scheme: SchemeName::default(),
            detector: DetectorName::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BitsSection {
    /// Full transmitted sequence, most significant symbol first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    /// Total transmitted symbols; payload positions are drawn from the
    /// bit stream seed, pilot positions carry the pilot pattern.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    /// Seed of the payload stream; defaults to the run seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub seed: u64,
    /// Dark-adaptation lead before the first symbol, minutes.
    #[serde(default)]
    pub margin_min: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 0,
            margin_min: 0.0,
            output_dir: None,
        }
    }
}

/// Where a metadata record came from; carried verbatim, ignored on
/// execution so a metadata file doubles as a runnable configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub command: String,
    pub args: Vec<String>,
    pub seed: u64,
    pub rng: String,
    /// Hex SHA-256 of this record serialized without `[provenance]`.
    pub config_sha256: String,
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn parse_bit_string(s: &str, what: &str) -> Result<Vec<bool>, CliError> {
    if s.is_empty() {
        return Err(CliError::Config(format!("{what} must not be empty")));
    }
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(CliError::Config(format!(
                "{what}: expected only 0 and 1, found `{other}`"
            ))),
        })
        .collect()
}

pub fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// A configuration lowered into core types, with the transmitted
/// sequence fully materialized.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub cfg: LinkConfig,
    pub start: ChannelParams,
    pub ramp: Option<ParamRamp>,
    pub plan: FramePlan,
    pub detector: DetectorChoice,
    pub pilot_pattern: Vec<bool>,
    pub truth: Vec<bool>,
    pub margin_samples: usize,
    pub noise_seed: u64,
}

impl Resolved {
    /// Illumination over `[0, margin + symbols)`: a dark lead, then
    /// the on-off keyed sequence.
    pub fn schedule(&self) -> Result<IlluminationSchedule, CliError> {
        let sched = IlluminationSchedule::from_bits(&self.truth, &self.cfg)?;
        if self.margin_samples == 0 {
            return Ok(sched);
        }
        let lead = self.margin_samples as f64 * self.cfg.sample_interval();
        let mut segments = vec![Segment {
            start: 0.0,
            end: lead,
            state: LightState::Dark,
        }];
        segments.extend_from_slice(sched.shifted(lead)?.segments());
        Ok(IlluminationSchedule::from_segments(segments)?)
    }

    /// Sample grid covering the margin and every symbol at the
    /// configured rate.
    pub fn grid(&self) -> Result<SampleGrid, CliError> {
        let len = self.margin_samples + self.truth.len() * self.cfg.samples_per_symbol();
        Ok(SampleGrid::new(0.0, self.cfg.sample_interval(), len)?)
    }

    /// Sample index of the first symbol inside a full-run trace.
    pub fn symbol_start(&self) -> usize {
        self.margin_samples
    }
}

/// Fills the transmitted sequence: pilot positions carry the pattern,
/// payload positions consume the seeded bit stream.
fn assemble_truth(
    total: usize,
    pattern: &[bool],
    scheme: SchemeName,
    frame_len: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<bool> {
    let mut truth = Vec::with_capacity(total);
    match scheme {
        SchemeName::PilotBased => {
            while truth.len() < total {
                let flen = frame_len.min(total - truth.len());
                let np = pattern.len().min(flen);
                truth.extend_from_slice(&pattern[..np]);
                for _ in np..flen {
                    truth.push(rng.random());
                }
            }
        }
        SchemeName::Fixed | SchemeName::DataAided => {
            let np = pattern.len().min(total);
            truth.extend_from_slice(&pattern[..np]);
            for _ in np..total {
                truth.push(rng.random());
            }
        }
    }
    truth
}

/// Validates a configuration and lowers it into core types. `scheme`
/// overrides the configured scheme (the detection matrix runs every
/// scheme from one file).
pub fn resolve_with_scheme(
    config: &ExperimentConfig,
    scheme: SchemeName,
) -> Result<Resolved, CliError> {
    let pilot_pattern = parse_bit_string(&config.link.pilot_pattern, "link.pilot_pattern")?;
    let l = &config.link;
    let cfg = LinkConfig::builder()
        .symbol_period(l.symbol_period_s)
        .duty(l.duty)
        .sample_interval(l.sample_interval_s)
        .frame_len(l.frame_len)
        .pilot_len(pilot_pattern.len())
        .smooth_window(l.smooth_window_s)
        .diff_window(l.diff_window_s)
        .threshold_weight(l.threshold_weight)
        .reest_period(l.reest_period)
        .reest_window(l.reest_window)
        .build()
        .map_err(|e| cfg_err("link", e))?;

    let start = config.channel.to_params("channel")?;

    let ramp = match config.scenario.kind {
        ScenarioKind::Stationary => {
            if config.channel_end.is_some() {
                return Err(cfg_err(
                    "channel_end",
                    "only meaningful with scenario.kind = \"ramp\"",
                ));
            }
            if config.scenario.duration_min.is_some() {
                return Err(cfg_err(
                    "scenario.duration_min",
                    "only meaningful with scenario.kind = \"ramp\"",
                ));
            }
            None
        }
        ScenarioKind::Ramp => {
            let end_section = config
                .channel_end
                .as_ref()
                .ok_or_else(|| cfg_err("scenario", "ramp needs a [channel_end] section"))?;
            let duration_min = config
                .scenario
                .duration_min
                .ok_or_else(|| cfg_err("scenario", "ramp needs duration_min"))?;
            let end = end_section.to_params("channel_end")?;
            Some(ParamRamp::new(start, end, duration_min * 60.0).map_err(|e| cfg_err("scenario", e))?)
        }
    };

    let b = &config.bits;
    let truth = match (&b.pattern, b.length) {
        (Some(_), Some(_)) => {
            return Err(cfg_err("bits", "give either pattern or length, not both"));
        }
        (None, None) => {
            return Err(cfg_err("bits", "give either pattern or length"));
        }
        (Some(pattern), None) => {
            if b.seed.is_some() {
                return Err(cfg_err("bits", "seed is only meaningful with length"));
            }
            parse_bit_string(pattern, "bits.pattern")?
        }
        (None, Some(total)) => {
            if total == 0 {
                return Err(cfg_err("bits", "length must be at least 1"));
            }
            let master = b.seed.unwrap_or(config.run.seed);
            let mut rng = ChaCha8Rng::seed_from_u64(subseed(master, "bits"));
            assemble_truth(total, &pilot_pattern, scheme, cfg.frame_len(), &mut rng)
        }
    };

    if let Some(ramp) = &ramp {
        let needed = truth.len() as f64 * cfg.symbol_period();
        if ramp.duration() < needed - 1e-9 {
            return Err(cfg_err(
                "scenario.duration_min",
                format!(
                    "ramp spans {} s but the sequence needs {} s",
                    ramp.duration(),
                    needed
                ),
            ));
        }
    }

    if !(config.run.margin_min >= 0.0) {
        return Err(cfg_err("run.margin_min", "must be non-negative"));
    }
    let margin_s = config.run.margin_min * 60.0;
    let dt = cfg.sample_interval();
    let margin_samples = (margin_s / dt).round() as usize;
    if (margin_samples as f64 * dt - margin_s).abs() > 1e-6 {
        return Err(cfg_err(
            "run.margin_min",
            "margin must be a whole number of sample intervals",
        ));
    }

    let plan = FramePlan::from_config(&cfg, scheme.to_core());
    Ok(Resolved {
        cfg,
        start,
        ramp,
        plan,
        detector: config.link.detector.to_core(),
        pilot_pattern,
        truth,
        margin_samples,
        noise_seed: subseed(config.run.seed, "noise"),
    })
}

pub fn resolve(config: &ExperimentConfig) -> Result<Resolved, CliError> {
    resolve_with_scheme(config, config.link.scheme)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(extra: &str) -> String {
        format!(
            "[channel]\ntau0_min = 6.41\ntau1_min = 8.40\nc0_inf = 2.83\nc1_inf = 5.77\n\n[bits]\nlength = 120\n{extra}"
        )
    }

    #[test]
    fn defaults_mirror_the_reference_link() {
        let config: ExperimentConfig = toml::from_str(&minimal("")).unwrap();
        let r = resolve(&config).unwrap();
        assert_eq!(r.cfg.symbol_period(), 60.0);
        assert_eq!(r.cfg.frame_len(), 40);
        assert_eq!(r.cfg.pilot_len(), 10);
        assert_eq!(r.pilot_pattern, parse_bit_string("1100101000", "p").unwrap());
        assert_eq!(r.truth.len(), 120);
        assert_eq!(&r.truth[..10], &r.pilot_pattern[..]);
        // frames of 40: pilots repeat at both later frame heads
        assert_eq!(&r.truth[40..50], &r.pilot_pattern[..]);
        assert_eq!(&r.truth[80..90], &r.pilot_pattern[..]);
    }

    #[test]
    fn preamble_schemes_stamp_pilots_once() {
        let config: ExperimentConfig =
            toml::from_str(&minimal("\n[link]\nscheme = \"data-aided\"\n")).unwrap();
        let r = resolve(&config).unwrap();
        assert_eq!(&r.truth[..10], &r.pilot_pattern[..]);
        assert_ne!(&r.truth[40..50], &r.pilot_pattern[..]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = minimal("") + "\n[link]\nsymbol_perod_s = 60.0\n";
        assert!(toml::from_str::<ExperimentConfig>(&text).is_err());
    }

    #[test]
    fn pattern_and_length_conflict() {
        let text = minimal("").replace("length = 120", "length = 120\npattern = \"101\"");
        let config: ExperimentConfig = toml::from_str(&text).unwrap();
        assert!(matches!(resolve(&config), Err(CliError::Config(_))));
    }

    #[test]
    fn ramp_needs_end_params_and_duration() {
        let text = minimal("\n[scenario]\nkind = \"ramp\"\n");
        let config: ExperimentConfig = toml::from_str(&text).unwrap();
        let err = resolve(&config).unwrap_err();
        assert!(err.to_string().contains("channel_end"), "{err}");
    }

    #[test]
    fn short_ramp_is_rejected() {
        let text = minimal(
            "\n[scenario]\nkind = \"ramp\"\nduration_min = 10.0\n\n[channel_end]\ntau0_min = 3.19\ntau1_min = 1.85\nc0_inf = 1.53\nc1_inf = 1.65\n",
        );
        let config: ExperimentConfig = toml::from_str(&text).unwrap();
        let err = resolve(&config).unwrap_err();
        assert!(err.to_string().contains("ramp spans"), "{err}");
    }

    #[test]
    fn margin_resolves_to_samples() {
        let text = minimal("\n[run]\nmargin_min = 30.0\n");
        let config: ExperimentConfig = toml::from_str(&text).unwrap();
        let r = resolve(&config).unwrap();
        assert_eq!(r.margin_samples, 1800);
        let sched = r.schedule().unwrap();
        assert_eq!(sched.start(), 0.0);
        assert_eq!(sched.end(), 1800.0 + 120.0 * 60.0);
        assert_eq!(sched.segments()[0].state, LightState::Dark);
        let grid = r.grid().unwrap();
        assert_eq!(grid.len, 1800 + 120 * 60);
    }

    #[test]
    fn bit_seed_decouples_from_noise_seed() {
        let a: ExperimentConfig = toml::from_str(&minimal("\n[run]\nseed = 1\n")).unwrap();
        let b: ExperimentConfig =
            toml::from_str(&(minimal("\n[run]\nseed = 2\n").replace("length = 120", "length = 120\nseed = 1"))).unwrap();
        let ra = resolve(&a).unwrap();
        let rb = resolve(&b).unwrap();
        assert_eq!(ra.truth, rb.truth);
        assert_ne!(ra.noise_seed, rb.noise_seed);
    }

    #[test]
    fn explicit_pattern_is_taken_verbatim() {
        let text = minimal("").replace("length = 120", "pattern = \"10011000101101110101\"");
        let config: ExperimentConfig = toml::from_str(&text).unwrap();
        let r = resolve(&config).unwrap();
        assert_eq!(bits_to_string(&r.truth), "10011000101101110101");
    }
}
