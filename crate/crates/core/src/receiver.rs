//! Bob's passive-basis receiver.
//!
//! Each arm is an unbalanced interferometer whose delay equals the pulse
//! separation of the basis it decodes (one bin for Z, two bins for X in four
//! dimensions). The output field at bin `t` on the detector of parity `a` is
//! `(E(t) + (-1)^a e^{i phi} E(t - delay)) / 2`, so the output frame is
//! extended by `delay` satellite bins. Only bins where both pulses of a state
//! overlap are conclusive.

use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::states::{Basis, Dimension, StateVector, Symbol};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Detector {
    D0,
    D1,
    D2,
    D3,
}

impl Detector {
    pub fn for_arm(arm: Basis, parity: u8) -> Detector {
        match (arm, parity & 1) {
            (Basis::Z, 0) => Detector::D0,
            (Basis::Z, _) => Detector::D1,
            (Basis::X, 0) => Detector::D2,
            (Basis::X, _) => Detector::D3,
        }
    }

    pub fn arm(self) -> Basis {
        match self {
            Detector::D0 | Detector::D1 => Basis::Z,
            Detector::D2 | Detector::D3 => Basis::X,
        }
    }

    /// 0 for the constructive-at-zero-phase port, 1 for the other.
    pub fn parity(self) -> u8 {
        match self {
            Detector::D0 | Detector::D2 => 0,
            Detector::D1 | Detector::D3 => 1,
        }
    }
}

/// A click in one bin of the extended output frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClickOutcome {
    pub detector: Detector,
    pub bin: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferometerSpec {
    pub arm: Basis,
    /// Path difference in bin pitches.
    pub delay: u8,
    /// Phase of the long arm relative to the reference setting, radians.
    pub phase_offset: f64,
    /// Power transmission of the short and long arm.
    pub arm_transmission: [f64; 2],
}

impl InterferometerSpec {
    pub fn new(arm: Basis, delay: u8, phase_offset: f64) -> Result<Self> {
        let spec = InterferometerSpec {
            arm,
            delay,
            phase_offset,
            arm_transmission: [1.0, 1.0],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.delay) {
            return Err(Error::invalid("interferometer delay must be 1 or 2 bins"));
        }
        if !self.phase_offset.is_finite() {
            return Err(Error::invalid("interferometer phase offset must be finite"));
        }
        if self
            .arm_transmission
            .iter()
            .any(|t| !(*t > 0.0 && *t <= 1.0))
        {
            return Err(Error::invalid("arm transmissions must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Adds a phase drift on top of this arm's reference phase.
    pub fn with_drift(mut self, radians: f64) -> Self {
        self.phase_offset += radians;
        self
    }
}

/// Outcome probabilities of one arm, ordered by bin and then detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementDistribution {
    pub probabilities: Vec<(ClickOutcome, f64)>,
}

impl MeasurementDistribution {
    pub fn total(&self) -> f64 {
        self.probabilities.iter().map(|(_, p)| p).sum()
    }

    pub fn get(&self, detector: Detector, bin: u8) -> f64 {
        self.probabilities
            .iter()
            .find(|(o, _)| o.detector == detector && o.bin == bin)
            .map_or(0.0, |(_, p)| *p)
    }
}

/// Both arms of the receiver for one protocol dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Receiver {
    pub dimension: Dimension,
    pub z_arm: InterferometerSpec,
    pub x_arm: InterferometerSpec,
}

impl Receiver {
    /// Ideal, drift-free receiver. In two dimensions both arms use the
    /// one-bin interferometer, the X arm at a reference phase of pi/2.
    pub fn ideal(dimension: Dimension) -> Self {
        let (x_delay, x_phase) = match dimension {
            Dimension::Four => (2, 0.0),
            Dimension::Two => (1, FRAC_PI_2),
        };
        Receiver {
            dimension,
            z_arm: InterferometerSpec {
                arm: Basis::Z,
                delay: 1,
                phase_offset: 0.0,
                arm_transmission: [1.0, 1.0],
            },
            x_arm: InterferometerSpec {
                arm: Basis::X,
                delay: x_delay,
                phase_offset: x_phase,
                arm_transmission: [1.0, 1.0],
            },
        }
    }

    pub fn arm(&self, basis: Basis) -> &InterferometerSpec {
        match basis {
            Basis::Z => &self.z_arm,
            Basis::X => &self.x_arm,
        }
    }
}

/// Propagates a normalized state through one interferometer arm.
pub fn propagate(state: &StateVector, ifm: &InterferometerSpec) -> MeasurementDistribution {
    let e = state.amplitudes();
    let delay = ifm.delay as usize;
    let short = libm::sqrt(ifm.arm_transmission[0]);
    let long = libm::sqrt(ifm.arm_transmission[1]);
    let phase = Complex64::from_polar(1.0, ifm.phase_offset);
    let out_bins = e.len() + delay;
    let mut probabilities = Vec::with_capacity(2 * out_bins);
    for t in 0..out_bins {
        let early = if t < e.len() {
            e[t] * short
        } else {
            Complex64::new(0.0, 0.0)
        };
        let late = if t >= delay && t - delay < e.len() {
            e[t - delay] * long * phase
        } else {
            Complex64::new(0.0, 0.0)
        };
        for parity in 0..2u8 {
            let sign = if parity == 0 { 1.0 } else { -1.0 };
            let amp = (early + late * sign) * 0.5;
            probabilities.push((
                ClickOutcome {
                    detector: Detector::for_arm(ifm.arm, parity),
                    bin: t as u8,
                },
                amp.norm_sqr(),
            ));
        }
    }
    MeasurementDistribution { probabilities }
}

/// Output bins in which the two pulses of a matched-basis state interfere.
pub fn conclusive_bins(dim: Dimension, basis: Basis) -> &'static [u8] {
    match (dim, basis) {
        (Dimension::Four, Basis::Z) => &[1, 3],
        (Dimension::Four, Basis::X) => &[2, 3],
        (Dimension::Two, _) => &[1],
    }
}

/// Number of (bin, detector) slots that can produce a sifted event in one arm.
pub fn conclusive_slots(dim: Dimension) -> usize {
    2 * conclusive_bins(dim, Basis::Z).len()
}

/// Maps a click to the symbol it announces. `Ok(None)` means inconclusive.
pub fn outcome_to_symbol(
    dim: Dimension,
    basis: Basis,
    outcome: ClickOutcome,
) -> Result<Option<Symbol>> {
    if outcome.detector.arm() != basis {
        return Err(Error::invalid(alloc::format!(
            "detector {:?} does not belong to the {basis} arm",
            outcome.detector
        )));
    }
    let bins = conclusive_bins(dim, basis);
    Ok(bins
        .iter()
        .position(|&b| b == outcome.bin)
        .map(|pair| Symbol::raw(2 * pair as u8 + outcome.detector.parity())))
}

/// Distribution over decoded symbols for a state entering the `basis` arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolDistribution {
    /// Indexed by symbol value.
    pub symbols: Vec<f64>,
    pub inconclusive: f64,
}

impl SymbolDistribution {
    pub fn conclusive(&self) -> f64 {
        self.symbols.iter().sum()
    }
}

pub fn measure(
    state: &StateVector,
    dim: Dimension,
    basis: Basis,
    ifm: &InterferometerSpec,
) -> Result<SymbolDistribution> {
    if ifm.arm != basis {
        return Err(Error::invalid(
            "interferometer arm does not match measurement basis",
        ));
    }
    let dist = propagate(state, ifm);
    let mut symbols = alloc::vec![0.0; dim.d()];
    let mut inconclusive = 0.0;
    for (outcome, p) in &dist.probabilities {
        match outcome_to_symbol(dim, basis, *outcome)? {
            Some(s) => symbols[s.value() as usize] += p,
            None => inconclusive += p,
        }
    }
    Ok(SymbolDistribution {
        symbols,
        inconclusive,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sifted {
    Keep(Symbol),
    Discard,
}

/// Basis reconciliation: keep only conclusive outcomes with matching bases.
pub fn sift(dim: Dimension, alice: Basis, bob: Basis, outcome: ClickOutcome) -> Sifted {
    if alice != bob || outcome.detector.arm() != bob {
        return Sifted::Discard;
    }
    match outcome_to_symbol(dim, bob, outcome) {
        Ok(Some(s)) => Sifted::Keep(s),
        _ => Sifted::Discard,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{encode, EXACT_TOL};
    use core::f64::consts::PI;

    const D4: Dimension = Dimension::Four;

    fn st(b: Basis, s: u8) -> StateVector {
        encode(b, Symbol::new(s, D4).unwrap(), D4).unwrap()
    }

    #[test]
    fn z0_through_short_interferometer() {
        let rx = Receiver::ideal(D4);
        let d = propagate(&st(Basis::Z, 0), &rx.z_arm);
        assert!((d.get(Detector::D0, 1) - 0.5).abs() < EXACT_TOL);
        assert!(d.get(Detector::D1, 1).abs() < EXACT_TOL);
        for bin in [0, 2] {
            for det in [Detector::D0, Detector::D1] {
                assert!((d.get(det, bin) - 0.125).abs() < EXACT_TOL);
            }
        }
        assert!((d.total() - 1.0).abs() < EXACT_TOL);
        let d1 = propagate(&st(Basis::Z, 1), &rx.z_arm);
        assert!((d1.get(Detector::D1, 1) - 0.5).abs() < EXACT_TOL);
        assert!(d1.get(Detector::D0, 1).abs() < EXACT_TOL);
    }

    #[test]
    fn a_state_through_long_interferometer() {
        let rx = Receiver::ideal(D4);
        let d = propagate(&st(Basis::X, 0), &rx.x_arm);
        assert!((d.get(Detector::D2, 2) - 0.5).abs() < EXACT_TOL);
        assert!(d.get(Detector::D3, 2).abs() < EXACT_TOL);
        assert!((d.get(Detector::D2, 0) - 0.125).abs() < EXACT_TOL);
        assert!((d.get(Detector::D3, 4) - 0.125).abs() < EXACT_TOL);
        assert_eq!(d.probabilities.len(), 12);
    }

    #[test]
    fn decode_map() {
        let z = |det, bin| ClickOutcome { detector: det, bin };
        assert_eq!(
            outcome_to_symbol(D4, Basis::Z, z(Detector::D0, 1)).unwrap(),
            Some(Symbol::raw(0))
        );
        assert_eq!(
            outcome_to_symbol(D4, Basis::X, z(Detector::D3, 3)).unwrap(),
            Some(Symbol::raw(3))
        );
        assert_eq!(
            outcome_to_symbol(D4, Basis::Z, z(Detector::D0, 0)).unwrap(),
            None
        );
        assert!(outcome_to_symbol(D4, Basis::Z, z(Detector::D2, 1)).is_err());
        assert_eq!(conclusive_bins(D4, Basis::Z), &[1, 3]);
        assert_eq!(conclusive_bins(D4, Basis::X), &[2, 3]);
    }

    #[test]
    fn measure_matched_and_mismatched() {
        let rx = Receiver::ideal(D4);
        let m = measure(&st(Basis::Z, 2), D4, Basis::Z, &rx.z_arm).unwrap();
        assert!((m.symbols[2] - 0.5).abs() < EXACT_TOL);
        assert!((m.inconclusive - 0.5).abs() < EXACT_TOL);
        let m = measure(&st(Basis::X, 0), D4, Basis::Z, &rx.z_arm).unwrap();
        for p in &m.symbols {
            assert!((p - 0.125).abs() < EXACT_TOL);
        }
        assert!((m.inconclusive - 0.5).abs() < EXACT_TOL);
        assert!(measure(&st(Basis::X, 0), D4, Basis::Z, &rx.x_arm).is_err());
    }

    #[test]
    fn pi_drift_swaps_detectors() {
        let rx = Receiver::ideal(D4);
        let arm = rx.z_arm.with_drift(PI);
        let m = measure(&st(Basis::Z, 0), D4, Basis::Z, &arm).unwrap();
        assert!((m.symbols[1] - 0.5).abs() < EXACT_TOL);
        assert!(m.symbols[0].abs() < EXACT_TOL);
    }

    #[test]
    fn sifting() {
        let o = |det, bin| ClickOutcome { detector: det, bin };
        assert_eq!(
            sift(D4, Basis::Z, Basis::Z, o(Detector::D1, 1)),
            Sifted::Keep(Symbol::raw(1))
        );
        assert_eq!(
            sift(D4, Basis::Z, Basis::X, o(Detector::D2, 2)),
            Sifted::Discard
        );
        assert_eq!(
            sift(D4, Basis::X, Basis::X, o(Detector::D2, 1)),
            Sifted::Discard
        );
    }

    #[test]
    fn two_dimensional_receiver_discriminates() {
        let d2 = Dimension::Two;
        let rx = Receiver::ideal(d2);
        for b in Basis::ALL {
            for s in 0..2 {
                let v = encode(b, Symbol::new(s, d2).unwrap(), d2).unwrap();
                let m = measure(&v, d2, b, rx.arm(b)).unwrap();
                assert!((m.symbols[s as usize] - 0.5).abs() < EXACT_TOL);
                let other = Basis::ALL[1 - b.index()];
                let m = measure(&v, d2, other, rx.arm(other)).unwrap();
                assert!((m.symbols[0] - 0.25).abs() < EXACT_TOL);
            }
        }
    }

    #[test]
    fn invalid_spec() {
        assert!(InterferometerSpec::new(Basis::Z, 3, 0.0).is_err());
        assert!(InterferometerSpec::new(Basis::Z, 1, f64::NAN).is_err());
        let mut s = InterferometerSpec::new(Basis::Z, 1, 0.0).unwrap();
        s.arm_transmission = [0.0, 1.0];
        assert!(s.validate().is_err());
    }
}
