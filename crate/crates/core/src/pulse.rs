//! Piecewise-constant σx control pulses and the composite NOT sequences.
//!
//! A pulse of amplitude `a` applied for time `t` under `H = a σx / 2`
//! rotates the qubit by angle `a t` about x. Negative amplitudes encode
//! rotations about −x.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on the amplitude bound.
pub const BOUND_SLACK: f64 = 1e-12;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    pub amplitude: f64,
}

/// Piecewise-constant control amplitude `a(t)` bounded by `a_max`.
///
/// An empty pulse is allowed and acts as the identity operation.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlPulse {
    segments: Vec<Segment>,
    a_max: f64,
}

impl ControlPulse {
    pub fn new(segments: Vec<Segment>, a_max: f64) -> Result<Self> {
        if !(a_max > 0.0 && a_max.is_finite()) {
            return Err(Error::InvalidPulse(format!("a_max must be positive, got {a_max}")));
        }
        for (k, s) in segments.iter().enumerate() {
            if !(s.duration > 0.0 && s.duration.is_finite()) {
                return Err(Error::InvalidPulse(format!("segment {k} has duration {}", s.duration)));
            }
            if !s.amplitude.is_finite() || s.amplitude.abs() > a_max + BOUND_SLACK {
                return Err(Error::InvalidPulse(format!(
                    "segment {k} amplitude {} exceeds bound {a_max}",
                    s.amplitude
                )));
            }
        }
        Ok(ControlPulse { segments, a_max })
    }

    /// Equal-length segments spanning `total_time`.
    pub fn uniform(amplitudes: &[f64], total_time: f64, a_max: f64) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidPulse("no segments".into()));
        }
        let dt = total_time / amplitudes.len() as f64;
        Self::new(amplitudes.iter().map(|&a| Segment { duration: dt, amplitude: a }).collect(), a_max)
    }

    pub fn empty(a_max: f64) -> Self {
        ControlPulse { segments: Vec::new(), a_max }
    }

    /// Sequence of x-rotations; negative angles rotate about −x at `-a_max`.
    pub fn from_rotations(angles: &[f64], a_max: f64) -> Result<Self> {
        let segs = angles
            .iter()
            .map(|&theta| Segment { duration: theta.abs() / a_max, amplitude: a_max * theta.signum() })
            .collect();
        Self::new(segs, a_max)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.amplitude).collect()
    }

    /// Net rotation angle `∫ a dt`.
    pub fn area(&self) -> f64 {
        self.segments.iter().map(|s| s.duration * s.amplitude).sum()
    }

    /// Start time of each segment.
    pub fn start_times(&self) -> Vec<f64> {
        let mut t = 0.0;
        self.segments
            .iter()
            .map(|s| {
                let start = t;
                t += s.duration;
                start
            })
            .collect()
    }

    pub fn with_amplitudes(&self, amplitudes: &[f64]) -> Result<Self> {
        if amplitudes.len() != self.segments.len() {
            return Err(Error::DimensionMismatch(self.segments.len(), amplitudes.len()));
        }
        let segs = self
            .segments
            .iter()
            .zip(amplitudes)
            .map(|(s, &a)| Segment { duration: s.duration, amplitude: a })
            .collect();
        Self::new(segs, self.a_max)
    }

    pub fn reversed(&self) -> Self {
        let mut segs = self.segments.clone();
        segs.reverse();
        ControlPulse { segments: segs, a_max: self.a_max }
    }

    /// Resample onto `n` equal segments over the same duration. Each new
    /// amplitude is the time average of the old pulse over its window, which
    /// is exact whenever the old breakpoints fall on the new grid.
    pub fn resample(&self, n: usize) -> Result<Self> {
        let total = self.duration();
        if n == 0 || total <= 0.0 {
            return Err(Error::InvalidPulse("cannot resample an empty pulse".into()));
        }
        let dt = total / n as f64;
        let starts = self.start_times();
        let mut amps = Vec::with_capacity(n);
        for k in 0..n {
            let (lo, hi) = (k as f64 * dt, (k + 1) as f64 * dt);
            let mut acc = 0.0;
            for (s, &t0) in self.segments.iter().zip(&starts) {
                let overlap = (hi.min(t0 + s.duration) - lo.max(t0)).max(0.0);
                acc += overlap * s.amplitude;
            }
            amps.push((acc / dt).clamp(-self.a_max, self.a_max));
        }
        Self::uniform(&amps, total, self.a_max)
    }

    /// Number of sign changes between consecutive lobes, ignoring segments
    /// with `|a| <= threshold`.
    pub fn sign_changes(&self, threshold: f64) -> usize {
        let signs: Vec<f64> =
            self.segments.iter().filter(|s| s.amplitude.abs() > threshold).map(|s| s.amplitude.signum()).collect();
        signs.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

/// Single rotation by π about x at full amplitude.
pub fn pi_pulse(a_max: f64) -> Result<ControlPulse> {
    ControlPulse::from_rotations(&[PI], a_max)
}

/// CORPSE NOT gate: rotations 7π/3 (x), 5π/3 (−x), π/3 (x).
pub fn corpse_not(a_max: f64) -> Result<ControlPulse> {
    ControlPulse::from_rotations(&[7.0 * PI / 3.0, -5.0 * PI / 3.0, PI / 3.0], a_max)
}

/// Short CORPSE NOT gate: rotations π/3 (x), 5π/3 (−x), π/3 (x).
pub fn short_corpse_not(a_max: f64) -> Result<ControlPulse> {
    ControlPulse::from_rotations(&[PI / 3.0, -5.0 * PI / 3.0, PI / 3.0], a_max)
}

/// The three composite sequences compared in the fidelity sweeps.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompositePulse {
    Pi,
    Corpse,
    ShortCorpse,
}

impl CompositePulse {
    pub const ALL: [CompositePulse; 3] = [CompositePulse::Pi, CompositePulse::Corpse, CompositePulse::ShortCorpse];

    pub fn build(self, a_max: f64) -> Result<ControlPulse> {
        match self {
            CompositePulse::Pi => pi_pulse(a_max),
            CompositePulse::Corpse => corpse_not(a_max),
            CompositePulse::ShortCorpse => short_corpse_not(a_max),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CompositePulse::Pi => "pi",
            CompositePulse::Corpse => "corpse",
            CompositePulse::ShortCorpse => "short_corpse",
        }
    }

    /// Rotation angles in units of π/3.
    pub fn thirds(self) -> &'static [i32] {
        match self {
            CompositePulse::Pi => &[3],
            CompositePulse::Corpse => &[7, -5, 1],
            CompositePulse::ShortCorpse => &[1, -5, 1],
        }
    }

    /// Segment count close to `target` on which the sequence is exactly representable.
    pub fn aligned_segments(self, target: usize) -> usize {
        let units: i32 = self.thirds().iter().map(|t| t.abs()).sum();
        let units = units as usize;
        let k = ((target as f64 / units as f64).round() as usize).max(1);
        k * units
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "pi" => Some(CompositePulse::Pi),
            "corpse" => Some(CompositePulse::Corpse),
            "short_corpse" => Some(CompositePulse::ShortCorpse),
            _ => None,
        }
    }
}
