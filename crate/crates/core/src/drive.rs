//! Piecewise-constant system Hamiltonians `H_s(t)`.

use crate::error::{Error, Result};
use crate::operators::{pauli, Hermitian, Pauli};
use crate::pulse::ControlPulse;

/// A constant piece of a drive clipped to a query window.
#[derive(Clone, Copy, Debug)]
pub struct Piece<'a> {
    pub start: f64,
    pub duration: f64,
    pub hamiltonian: &'a Hermitian,
    /// Index of the drive segment; `segments().len()` for the trailing value.
    pub index: usize,
}

/// `H_s(t)` as a list of constant segments followed by a constant `rest`
/// that holds for all later times.
#[derive(Clone, Debug, PartialEq)]
pub struct Drive {
    segments: Vec<(f64, Hermitian)>,
    rest: Hermitian,
}

impl Drive {
    pub fn constant(h: Hermitian) -> Self {
        Drive { segments: Vec::new(), rest: h }
    }

    pub fn new(segments: Vec<(f64, Hermitian)>, rest: Hermitian) -> Result<Self> {
        for (dt, h) in &segments {
            if !(*dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidPulse(format!("drive segment duration {dt}")));
            }
            if h.dim() != rest.dim() {
                return Err(Error::DimensionMismatch(rest.dim(), h.dim()));
            }
        }
        Ok(Drive { segments, rest })
    }

    /// `H_s(t) = drift + a(t) * control`, with `drift` after the pulse ends.
    pub fn from_pulse(pulse: &ControlPulse, drift: &Hermitian, control: &Hermitian) -> Result<Self> {
        let segments = pulse
            .segments()
            .iter()
            .map(|s| Ok((s.duration, drift.add_scaled(control, s.amplitude)?)))
            .collect::<Result<Vec<_>>>()?;
        Drive::new(segments, drift.clone())
    }

    /// Qubit drive `a(t) σx / 2` with no drift.
    pub fn qubit_x(pulse: &ControlPulse) -> Self {
        let control = pauli(Pauli::X).scale(0.5);
        Drive::from_pulse(pulse, &Hermitian::zeros(2), &control).expect("qubit dimensions agree")
    }

    pub fn dim(&self) -> usize {
        self.rest.dim()
    }

    pub fn segments(&self) -> &[(f64, Hermitian)] {
        &self.segments
    }

    pub fn rest(&self) -> &Hermitian {
        &self.rest
    }

    /// Time at which the last explicit segment ends.
    pub fn end(&self) -> f64 {
        self.segments.iter().map(|(dt, _)| dt).sum()
    }

    pub fn at(&self, t: f64) -> &Hermitian {
        let mut start = 0.0;
        for (dt, h) in &self.segments {
            if t < start + dt {
                return h;
            }
            start += dt;
        }
        &self.rest
    }

    /// Constant pieces covering `[t0, t1]`, in order.
    pub fn pieces(&self, t0: f64, t1: f64) -> Vec<Piece<'_>> {
        let mut out = Vec::new();
        if t1 <= t0 {
            return out;
        }
        let mut start = 0.0;
        for (k, (dt, h)) in self.segments.iter().enumerate() {
            let end = start + dt;
            let lo = t0.max(start);
            let hi = t1.min(end);
            if hi > lo {
                out.push(Piece { start: lo, duration: hi - lo, hamiltonian: h, index: k });
            }
            start = end;
            if start >= t1 {
                return out;
            }
        }
        let lo = t0.max(start);
        if t1 > lo {
            out.push(Piece { start: lo, duration: t1 - lo, hamiltonian: &self.rest, index: self.segments.len() });
        }
        out
    }

    /// All breakpoints in `(t0, t1)`.
    pub fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let mut t = 0.0;
        for (dt, _) in &self.segments {
            t += dt;
            if t > t0 && t < t1 {
                out.push(t);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::Segment;

    #[test]
    fn pieces_cover_window() {
        let p = ControlPulse::new(
            vec![Segment { duration: 1.0, amplitude: 1.0 }, Segment { duration: 2.0, amplitude: -1.0 }],
            1.0,
        )
        .unwrap();
        let d = Drive::qubit_x(&p);
        let pcs = d.pieces(0.5, 4.0);
        let durs: Vec<f64> = pcs.iter().map(|p| p.duration).collect();
        assert_eq!(durs, vec![0.5, 2.0, 1.0]);
        assert_eq!(pcs.iter().map(|p| p.index).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(d.breakpoints(0.0, 10.0), vec![1.0, 3.0]);
        assert_eq!(d.at(2.0), &d.segments()[1].1);
        assert_eq!(d.at(5.0), d.rest());
        assert!(d.pieces(1.0, 1.0).is_empty());
    }
}
