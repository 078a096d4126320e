//! Protocol states of the two mutually unbiased bases.
//!
//! In four dimensions every state is a two-pulse wavepacket. Z states occupy
//! adjacent bins (t1 t2 or t3 t4), X states occupy bins one slot apart
//! (t1 t3 or t2 t4); the second symbol of each pair carries a relative phase
//! of pi. The two-dimensional comparison protocol lives on a two-bin frame:
//! Z = (t1 +/- t2)/sqrt2 and X = (t1 +/- i t2)/sqrt2.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;
use core::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance used for all exactness checks on amplitudes.
pub const EXACT_TOL: f64 = 1e-12;

/// Time-bin pitch in picoseconds. Equals the short interferometer delay.
pub const BIN_PITCH_PS: u64 = 800;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    pub const ALL: [Basis; 2] = [Basis::Z, Basis::X];

    pub fn index(self) -> usize {
        match self {
            Basis::Z => 0,
            Basis::X => 1,
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Z => f.write_str("Z"),
            Basis::X => f.write_str("X"),
        }
    }
}

/// Hilbert-space dimension of the protocol. Only 2 and 4 are modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Dimension {
    Two,
    Four,
}

impl Dimension {
    pub fn new(d: u32) -> Result<Self> {
        match d {
            2 => Ok(Dimension::Two),
            4 => Ok(Dimension::Four),
            other => Err(Error::invalid(alloc::format!(
                "dimension must be 2 or 4, got {other}"
            ))),
        }
    }

    pub fn d(self) -> usize {
        match self {
            Dimension::Two => 2,
            Dimension::Four => 4,
        }
    }

    /// Number of time bins in one frame.
    pub fn bins(self) -> usize {
        self.d()
    }

    /// Probability that a uniformly random outcome is wrong: (d - 1) / d.
    pub fn random_error(self) -> f64 {
        let d = self.d() as f64;
        (d - 1.0) / d
    }
}

impl TryFrom<u8> for Dimension {
    type Error = Error;

    fn try_from(d: u8) -> Result<Self> {
        Dimension::new(d as u32)
    }
}

impl From<Dimension> for u8 {
    fn from(d: Dimension) -> u8 {
        d.d() as u8
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.d())
    }
}

/// A time bin t1..t4, stored zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TimeBin(u8);

impl TimeBin {
    pub fn new(index: u8) -> Result<Self> {
        if index < 4 {
            Ok(TimeBin(index))
        } else {
            Err(Error::invalid(alloc::format!(
                "time bin index {index} out of range 0..4"
            )))
        }
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn duration_ps(self) -> u64 {
        BIN_PITCH_PS
    }

    /// Center of the bin relative to the frame start.
    pub fn center_ps(self) -> u64 {
        self.0 as u64 * BIN_PITCH_PS + BIN_PITCH_PS / 2
    }
}

/// A symbol value `0..d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Symbol(u8);

impl Symbol {
    pub fn new(value: u8, dim: Dimension) -> Result<Self> {
        if (value as usize) < dim.d() {
            Ok(Symbol(value))
        } else {
            Err(Error::invalid(alloc::format!(
                "symbol {value} out of range for dimension {dim}"
            )))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// True for the second state of a pair, which carries the pi (or -pi/2) phase.
    pub fn is_odd(self) -> bool {
        self.0 & 1 == 1
    }

    pub(crate) fn raw(value: u8) -> Self {
        Symbol(value)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Pure-state amplitudes over the time bins of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Self {
        StateVector { amplitudes }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= EXACT_TOL
    }

    /// Indices of bins with non-negligible amplitude.
    pub fn occupied_bins(&self) -> Vec<usize> {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > EXACT_TOL)
            .map(|(i, _)| i)
            .collect()
    }
}

/// The two bins occupied by `(basis, symbol)` in a frame of `dim` bins.
pub fn occupied_pair(basis: Basis, symbol: Symbol, dim: Dimension) -> (usize, usize) {
    match dim {
        Dimension::Two => (0, 1),
        Dimension::Four => {
            let pair = (symbol.value() / 2) as usize;
            match basis {
                Basis::Z => (2 * pair, 2 * pair + 1),
                Basis::X => (pair, pair + 2),
            }
        }
    }
}

/// Amplitude vector of a protocol state.
pub fn encode(basis: Basis, symbol: Symbol, dim: Dimension) -> Result<StateVector> {
    if symbol.value() as usize >= dim.d() {
        return Err(Error::invalid(alloc::format!(
            "symbol {symbol} out of range for dimension {dim}"
        )));
    }
    let (first, second) = occupied_pair(basis, symbol, dim);
    let mut amps = vec![Complex64::new(0.0, 0.0); dim.bins()];
    amps[first] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let sign = if symbol.is_odd() { -1.0 } else { 1.0 };
    amps[second] = match (dim, basis) {
        (Dimension::Two, Basis::X) => Complex64::new(0.0, sign * FRAC_1_SQRT_2),
        _ => Complex64::new(sign * FRAC_1_SQRT_2, 0.0),
    };
    Ok(StateVector::from_amplitudes(amps))
}

/// All `d` states of one basis, ordered by symbol.
pub fn basis_states(basis: Basis, dim: Dimension) -> Vec<StateVector> {
    (0..dim.d() as u8)
        .map(|s| encode(basis, Symbol::raw(s), dim).expect("symbol in range"))
        .collect()
}

/// Conjugate-linear inner product `<a|b>`.
pub fn overlap(a: &StateVector, b: &StateVector) -> Result<Complex64> {
    if a.len() != b.len() {
        return Err(Error::invalid(alloc::format!(
            "overlap of vectors with lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| x.conj() * y)
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MubReport {
    pub passed: bool,
    /// `|<z_n|x_m>|` indexed `[n][m]`.
    pub cross_magnitudes: Vec<Vec<f64>>,
    /// Largest deviation of either intra-basis Gram matrix from the identity.
    pub max_gram_deviation: f64,
    /// Largest deviation of a cross-basis squared overlap from `1/d`.
    pub max_cross_deviation: f64,
}

/// Checks that `z` and `x` are orthonormal sets that are mutually unbiased.
pub fn mub_report(z: &[StateVector], x: &[StateVector]) -> Result<MubReport> {
    let d = z.len();
    if x.len() != d || d == 0 {
        return Err(Error::invalid(
            "basis sets must be nonempty and of equal size",
        ));
    }
    let mut gram_dev: f64 = 0.0;
    for set in [z, x] {
        for (n, a) in set.iter().enumerate() {
            for (m, b) in set.iter().enumerate() {
                let target = if n == m { 1.0 } else { 0.0 };
                gram_dev = gram_dev.max((overlap(a, b)? - Complex64::new(target, 0.0)).norm());
            }
        }
    }
    let inv_d = 1.0 / d as f64;
    let mut cross_dev: f64 = 0.0;
    let mut table = Vec::with_capacity(d);
    for a in z {
        let mut row = Vec::with_capacity(d);
        for b in x {
            let ov = overlap(a, b)?;
            cross_dev = cross_dev.max((ov.norm_sqr() - inv_d).abs());
            row.push(ov.norm());
        }
        table.push(row);
    }
    Ok(MubReport {
        passed: gram_dev <= EXACT_TOL && cross_dev <= EXACT_TOL,
        cross_magnitudes: table,
        max_gram_deviation: gram_dev,
        max_cross_deviation: cross_dev,
    })
}

/// MUB check of the protocol states for `dim`.
pub fn verify_mub(dim: Dimension) -> MubReport {
    mub_report(&basis_states(Basis::Z, dim), &basis_states(Basis::X, dim))
        .expect("protocol bases have equal size")
}
