//! Illumination schedules: bit sequences mapped onto a timeline of
//! constant-illumination segments.

use alloc::vec::Vec;

use crate::config::LinkConfig;
use crate::error::{Error, Result};
use crate::params::LightState;

/// Half-open span `[start, end)` of constant illumination, seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub state: LightState,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Gap-free, time-ordered sequence of illumination segments.
///
/// Canonical form: adjacent segments always differ in state; equal-state
/// neighbors are merged at construction. Merging matters because the
/// mean response restarts its exponential at segment boundaries, so a
/// run of consecutive 0-symbols must relax as one uninterrupted dark
/// segment.
#[derive(Debug, Clone, PartialEq)]
pub struct IlluminationSchedule {
    segments: Vec<Segment>,
}

impl IlluminationSchedule {
    /// Validates and canonicalizes a raw segment list. Segments must be
    /// non-empty, have positive duration, and tile a contiguous span:
    /// each segment's `end` must equal the next segment's `start`
    /// exactly.
    pub fn from_segments(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidSchedule("no segments".into()));
        }
        for (i, seg) in segments.iter().enumerate() {
            if !(seg.start.is_finite() && seg.end.is_finite()) {
                return Err(Error::InvalidSchedule(alloc::format!(
                    "segment {i} has a non-finite boundary"
                )));
            }
            if seg.end <= seg.start {
                return Err(Error::InvalidSchedule(alloc::format!(
                    "segment {i} has non-positive duration"
                )));
            }
        }
        for i in 1..segments.len() {
            if segments[i].start != segments[i - 1].end {
                return Err(Error::InvalidSchedule(alloc::format!(
                    "gap or overlap between segments {} and {}",
                    i - 1,
                    i
                )));
            }
        }
        let mut merged: Vec<Segment> = Vec::with_capacity(segments.len());
        for seg in segments {
            match merged.last_mut() {
                Some(last) if last.state == seg.state => last.end = seg.end,
                _ => merged.push(seg),
            }
        }
        Ok(IlluminationSchedule { segments: merged })
    }

    /// Builds the OOK schedule of a bit sequence starting at t = 0.
    ///
    /// Bit 1 lights the LED for the first `duty` fraction of its symbol
    /// interval and is dark for the rest; bit 0 is dark throughout.
    /// Segment boundaries are computed from integer sample counts, so
    /// consecutive segments join exactly.
    pub fn from_bits(bits: &[bool], cfg: &LinkConfig) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::InvalidSchedule("empty bit sequence".into()));
        }
        let dt = cfg.sample_interval();
        let spsym = cfg.samples_per_symbol();
        let lit = cfg.lit_samples();
        let mut segments = Vec::with_capacity(2 * bits.len());
        for (k, &bit) in bits.iter().enumerate() {
            let s0 = k * spsym;
            let s1 = s0 + spsym;
            if bit {
                segments.push(Segment {
                    start: s0 as f64 * dt,
                    end: (s0 + lit) as f64 * dt,
                    state: LightState::Lit,
                });
                segments.push(Segment {
                    start: (s0 + lit) as f64 * dt,
                    end: s1 as f64 * dt,
                    state: LightState::Dark,
                });
            } else {
                segments.push(Segment {
                    start: s0 as f64 * dt,
                    end: s1 as f64 * dt,
                    state: LightState::Dark,
                });
            }
        }
        IlluminationSchedule::from_segments(segments)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Start of the schedule span, seconds.
    pub fn start(&self) -> f64 {
        self.segments[0].start
    }

    /// End of the schedule span, seconds.
    pub fn end(&self) -> f64 {
        self.segments[self.segments.len() - 1].end
    }

    /// Returns a copy with every boundary shifted by `offset` seconds.
    pub fn shifted(&self, offset: f64) -> Result<Self> {
        if !offset.is_finite() {
            return Err(Error::InvalidSchedule("non-finite shift offset".into()));
        }
        let segments = self
            .segments
            .iter()
            .map(|s| Segment { start: s.start + offset, end: s.end + offset, state: s.state })
            .collect();
        IlluminationSchedule::from_segments(segments)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> LinkConfig {
        LinkConfig::builder().build().unwrap()
    }

    #[test]
    fn one_bit_splits_into_lit_and_dark() {
        let sched = IlluminationSchedule::from_bits(&[true], &cfg()).unwrap();
        let segs = sched.segments();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0], Segment { start: 0.0, end: 15.0, state: LightState::Lit });
        assert_eq!(segs[1], Segment { start: 15.0, end: 60.0, state: LightState::Dark });
    }

    #[test]
    fn zero_run_merges_into_one_dark_segment() {
        let sched = IlluminationSchedule::from_bits(&[false, false, false], &cfg()).unwrap();
        assert_eq!(
            sched.segments(),
            [Segment { start: 0.0, end: 180.0, state: LightState::Dark }]
        );
    }

    #[test]
    fn dark_tail_merges_with_following_zero() {
        let sched = IlluminationSchedule::from_bits(&[true, false, true], &cfg()).unwrap();
        let segs = sched.segments();
        assert_eq!(segs.len(), 4);
        // dark tail of symbol 1 plus the whole 0-symbol
        assert_eq!(segs[1], Segment { start: 15.0, end: 120.0, state: LightState::Dark });
        assert_eq!(segs[2].state, LightState::Lit);
        assert_eq!(segs[2].start, 120.0);
    }

    #[test]
    fn rejects_gapped_segments() {
        let err = IlluminationSchedule::from_segments(alloc::vec![
            Segment { start: 0.0, end: 1.0, state: LightState::Dark },
            Segment { start: 1.5, end: 2.0, state: LightState::Lit },
        ])
        .unwrap_err();
        assert!(matches!(err, Error::InvalidSchedule(_)));
    }

    #[test]
    fn rejects_empty_and_zero_duration() {
        assert!(IlluminationSchedule::from_segments(Vec::new()).is_err());
        assert!(
            IlluminationSchedule::from_segments(alloc::vec![Segment {
                start: 0.0,
                end: 0.0,
                state: LightState::Dark
            }])
            .is_err()
        );
    }

    #[test]
    fn span_covers_all_symbols() {
        let bits = [true, false, true, true, false];
        let sched = IlluminationSchedule::from_bits(&bits, &cfg()).unwrap();
        assert_eq!(sched.start(), 0.0);
        assert_eq!(sched.end(), 300.0);
    }

    #[test]
    fn shift_preserves_durations() {
        let sched = IlluminationSchedule::from_bits(&[true, false], &cfg()).unwrap();
        let shifted = sched.shifted(1800.0).unwrap();
        assert_eq!(shifted.start(), 1800.0);
        assert_eq!(shifted.end(), 1920.0);
        assert_eq!(shifted.segments().len(), sched.segments().len());
    }
}
