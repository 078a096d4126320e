//! Master/slave drive timelines for the injection-locked transmitter.
//!
//! Per frame the master laser is on for one contiguous window and off for a
//! short gap, so every frame is seeded with a fresh random phase. The slave
//! laser fires a short pulse in each of the two bins occupied by the state.
//! A pi phase between the two slave pulses is written by a short additive
//! perturbation on the master drive, centred at the midpoint between the two
//! occupied bins. A separate intensity-modulator channel holds one level per
//! frame for signal or decoy.
//!
//! All timing is integer picoseconds. A sample rate is accepted only if every
//! edge falls on an integer sample index, which keeps pulse centres exact.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::channel::Intensity;
use crate::states::{occupied_pair, Basis, Dimension, Symbol};
use crate::{Error, Result};

const PS_PER_S: u128 = 1_000_000_000_000;

/// Minimum sample rate: at least two samples across the perturbation.
pub const MIN_SAMPLE_RATE_HZ: u64 = 10_000_000_000;

pub const DEFAULT_SAMPLE_RATE_HZ: u64 = 80_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserTimingParams {
    pub bin_pitch_ps: u64,
    pub state_period_ps: u64,
    pub master_on_ps: u64,
    /// Start of the master on-window relative to the frame start.
    pub master_on_start_ps: u64,
    pub slave_on_ps: u64,
    pub perturbation_width_ps: u64,
}

impl Default for LaserTimingParams {
    fn default() -> Self {
        LaserTimingParams {
            bin_pitch_ps: 800,
            state_period_ps: 3200,
            master_on_ps: 3000,
            master_on_start_ps: 100,
            slave_on_ps: 400,
            perturbation_width_ps: 200,
        }
    }
}

impl LaserTimingParams {
    pub fn master_clock_hz(&self) -> f64 {
        1e12 / self.state_period_ps as f64
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |what: String| Err(Error::invalid(format!("timing: {what}")));
        if self.bin_pitch_ps == 0 {
            return fail("bin pitch must be > 0".into());
        }
        if self.state_period_ps != 4 * self.bin_pitch_ps {
            return fail("state period must equal four bin pitches".into());
        }
        if !(self.master_on_ps < self.state_period_ps) {
            return fail("master on-time must be shorter than the state period".into());
        }
        if self.master_on_start_ps + self.master_on_ps > self.state_period_ps {
            return fail("master on-window must fit inside one frame".into());
        }
        if !(self.slave_on_ps > 0 && self.slave_on_ps < self.bin_pitch_ps) {
            return fail("slave on-time must lie in (0, bin pitch)".into());
        }
        if !(self.perturbation_width_ps > 0 && self.perturbation_width_ps < self.bin_pitch_ps) {
            return fail("perturbation width must lie in (0, bin pitch)".into());
        }
        Ok(())
    }

    pub fn master_off_ps(&self) -> u64 {
        self.state_period_ps - self.master_on_ps
    }

    pub fn bin_center_ps(&self, bin: usize) -> u64 {
        bin as u64 * self.bin_pitch_ps + self.bin_pitch_ps / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    /// Drive-unit delta that produces a pi phase shift.
    pub amplitude_pi: f32,
    /// Offset of the perturbation centre from the pair midpoint.
    pub placement_offset_ps: i64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec {
            amplitude_pi: 0.25,
            placement_offset_ps: 0,
        }
    }
}

/// One state of a transmit sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub basis: Basis,
    pub symbol: u8,
    pub intensity: Intensity,
}

impl FrameSpec {
    pub fn new(basis: Basis, symbol: u8, intensity: Intensity) -> Self {
        FrameSpec {
            basis,
            symbol,
            intensity,
        }
    }
}

/// Sampled drive signals for consecutive frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveTimeline {
    pub sample_rate_hz: u64,
    pub samples_per_frame: usize,
    pub master_samples: Vec<f32>,
    pub slave_samples: Vec<f32>,
    pub im_samples: Vec<f32>,
}

impl DriveTimeline {
    pub fn frame_count(&self) -> usize {
        self.master_samples
            .len()
            .checked_div(self.samples_per_frame)
            .unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.master_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.master_samples.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.master_samples.len();
        if self.slave_samples.len() != n || self.im_samples.len() != n {
            return Err(Error::invalid("drive channels have different lengths"));
        }
        if self.samples_per_frame == 0 || !n.is_multiple_of(self.samples_per_frame) {
            return Err(Error::invalid(
                "timeline length is not a whole number of frames",
            ));
        }
        Ok(())
    }

    fn append(&mut self, other: DriveTimeline) {
        self.master_samples.extend(other.master_samples);
        self.slave_samples.extend(other.slave_samples);
        self.im_samples.extend(other.im_samples);
    }
}

/// Compiles and decodes drive timelines for fixed timing and sample rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxCompiler {
    pub timing: LaserTimingParams,
    pub perturbation: PerturbationSpec,
    pub sample_rate_hz: u64,
    /// Intensity-modulator level for decoy frames; signal frames are 1.0.
    pub decoy_level: f32,
}

impl Default for TxCompiler {
    fn default() -> Self {
        TxCompiler {
            timing: LaserTimingParams::default(),
            perturbation: PerturbationSpec::default(),
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            decoy_level: 0.36,
        }
    }
}

impl TxCompiler {
    pub fn new(timing: LaserTimingParams, sample_rate_hz: u64) -> Result<Self> {
        let c = TxCompiler {
            timing,
            sample_rate_hz,
            ..TxCompiler::default()
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.timing.validate()?;
        if self.sample_rate_hz < MIN_SAMPLE_RATE_HZ {
            return Err(Error::invalid(format!(
                "sample rate {} Sa/s below the minimum {} Sa/s",
                self.sample_rate_hz, MIN_SAMPLE_RATE_HZ
            )));
        }
        if !(self.perturbation.amplitude_pi > 0.0) {
            return Err(Error::invalid("perturbation amplitude must be > 0"));
        }
        if !(self.decoy_level > 0.0 && self.decoy_level < 1.0) {
            return Err(Error::invalid("decoy level must lie in (0, 1)"));
        }
        let t = &self.timing;
        let half_pulse = t.slave_on_ps / 2;
        let half_pert = t.perturbation_width_ps / 2;
        let edges = [
            t.state_period_ps,
            t.bin_pitch_ps,
            t.master_on_start_ps,
            t.master_on_ps,
            t.slave_on_ps,
            t.perturbation_width_ps,
            t.bin_pitch_ps / 2 - half_pulse,
            t.bin_pitch_ps / 2 - half_pert,
            self.perturbation.placement_offset_ps.unsigned_abs(),
        ];
        for e in edges {
            self.samples_exact(e)?;
        }
        if !t.slave_on_ps.is_multiple_of(2) || !t.perturbation_width_ps.is_multiple_of(2) {
            return Err(Error::invalid(
                "pulse widths must be an even number of picoseconds",
            ));
        }
        Ok(())
    }

    fn samples_exact(&self, ps: u64) -> Result<usize> {
        let num = ps as u128 * self.sample_rate_hz as u128;
        if !num.is_multiple_of(PS_PER_S) {
            return Err(Error::invalid(format!(
                "{ps} ps is not an integer number of samples at {} Sa/s",
                self.sample_rate_hz
            )));
        }
        Ok((num / PS_PER_S) as usize)
    }

    fn samples(&self, ps: u64) -> usize {
        (ps as u128 * self.sample_rate_hz as u128 / PS_PER_S) as usize
    }

    pub fn samples_per_frame(&self) -> usize {
        self.samples(self.timing.state_period_ps)
    }

    fn fill(buf: &mut [f32], start: usize, len: usize, value: f32, add: bool) {
        for s in &mut buf[start..start + len] {
            if add {
                *s += value;
            } else {
                *s = value;
            }
        }
    }

    /// Centre of the perturbation for a pi-phase state, relative to frame start.
    pub fn perturbation_center_ps(&self, basis: Basis, symbol: Symbol) -> i64 {
        let (a, b) = occupied_pair(basis, symbol, Dimension::Four);
        let mid = (self.timing.bin_center_ps(a) + self.timing.bin_center_ps(b)) / 2;
        mid as i64 + self.perturbation.placement_offset_ps
    }

    pub fn compile_state(&self, frame: FrameSpec) -> Result<DriveTimeline> {
        self.validate()?;
        let symbol = Symbol::new(frame.symbol, Dimension::Four)?;
        let t = &self.timing;
        let n = self.samples_per_frame();
        let mut master = vec![0.0f32; n];
        let mut slave = vec![0.0f32; n];
        let level = match frame.intensity {
            Intensity::Signal => 1.0,
            Intensity::Decoy => self.decoy_level,
        };
        let im = vec![level; n];

        Self::fill(
            &mut master,
            self.samples(t.master_on_start_ps),
            self.samples(t.master_on_ps),
            1.0,
            false,
        );
        let (a, b) = occupied_pair(frame.basis, symbol, Dimension::Four);
        for bin in [a, b] {
            let start = t.bin_center_ps(bin) - t.slave_on_ps / 2;
            Self::fill(
                &mut slave,
                self.samples(start),
                self.samples(t.slave_on_ps),
                1.0,
                false,
            );
        }
        if symbol.is_odd() {
            let center = self.perturbation_center_ps(frame.basis, symbol);
            let start = center - (t.perturbation_width_ps / 2) as i64;
            if start < 0 || start as u64 + t.perturbation_width_ps > t.state_period_ps {
                return Err(Error::invalid("perturbation falls outside the frame"));
            }
            Self::fill(
                &mut master,
                self.samples(start as u64),
                self.samples(t.perturbation_width_ps),
                self.perturbation.amplitude_pi,
                true,
            );
        }
        Ok(DriveTimeline {
            sample_rate_hz: self.sample_rate_hz,
            samples_per_frame: n,
            master_samples: master,
            slave_samples: slave,
            im_samples: im,
        })
    }

    pub fn compile_sequence(&self, items: &[FrameSpec]) -> Result<DriveTimeline> {
        let (first, rest) = items
            .split_first()
            .ok_or_else(|| Error::invalid("empty transmit sequence"))?;
        let mut out = self.compile_state(*first)?;
        let n = out.samples_per_frame;
        out.master_samples.reserve(n * rest.len());
        out.slave_samples.reserve(n * rest.len());
        out.im_samples.reserve(n * rest.len());
        for item in rest {
            out.append(self.compile_state(*item)?);
        }
        Ok(out)
    }

    pub fn decode_timeline(&self, tl: &DriveTimeline) -> Result<Vec<FrameSpec>> {
        self.validate()?;
        tl.validate()?;
        if tl.sample_rate_hz != self.sample_rate_hz
            || tl.samples_per_frame != self.samples_per_frame()
        {
            return Err(Error::invalid(
                "timeline was compiled with different timing",
            ));
        }
        let n = tl.samples_per_frame;
        (0..tl.frame_count())
            .map(|f| {
                let r = f * n..(f + 1) * n;
                self.decode_frame(
                    &tl.master_samples[r.clone()],
                    &tl.slave_samples[r.clone()],
                    &tl.im_samples[r],
                )
                .map_err(|reason| Error::DecodeFailure { frame: f, reason })
            })
            .collect()
    }

    /// Half-open sample ranges where `samples` exceeds `threshold`.
    fn runs(samples: &[f32], threshold: f32) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = None;
        for (i, &v) in samples.iter().enumerate() {
            match (v > threshold, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    out.push((s, i));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push((s, samples.len()));
        }
        out
    }

    /// Run centre in picoseconds times two, from sample indices.
    fn twice_center_ps(&self, run: (usize, usize)) -> u128 {
        (run.0 + run.1) as u128 * PS_PER_S / self.sample_rate_hz as u128
    }

    fn decode_frame(
        &self,
        master: &[f32],
        slave: &[f32],
        im: &[f32],
    ) -> core::result::Result<FrameSpec, String> {
        let t = &self.timing;
        let pulses = Self::runs(slave, 0.5);
        if pulses.len() != 2 {
            return Err(format!("expected 2 slave pulses, found {}", pulses.len()));
        }
        let mut bins = [0usize; 2];
        for (slot, run) in pulses.iter().enumerate() {
            let twice_c = self.twice_center_ps(*run);
            let pitch = t.bin_pitch_ps as u128;
            let bin = (twice_c / (2 * pitch)) as usize;
            let expected = 2 * t.bin_center_ps(bin) as u128;
            if bin >= 4 || twice_c.abs_diff(expected) > t.slave_on_ps as u128 {
                return Err(format!(
                    "slave pulse at {} ps is not centred in a bin",
                    twice_c / 2
                ));
            }
            bins[slot] = bin;
        }
        let (a, b) = (bins[0], bins[1]);
        let (basis, pair) = match (a, b) {
            (0, 1) => (Basis::Z, 0),
            (2, 3) => (Basis::Z, 1),
            (0, 2) => (Basis::X, 0),
            (1, 3) => (Basis::X, 1),
            _ => {
                return Err(format!(
                    "bins t{} and t{} do not form a protocol state",
                    a + 1,
                    b + 1
                ))
            }
        };

        let on = Self::runs(master, 0.5);
        if on.len() != 1 {
            return Err(format!("expected one master on-window, found {}", on.len()));
        }
        let bump = 1.0 + 0.5 * self.perturbation.amplitude_pi;
        let perturbations = Self::runs(master, bump);
        let odd = match perturbations.as_slice() {
            [] => false,
            [run] => {
                let twice_c = self.twice_center_ps(*run);
                let mid = t.bin_center_ps(a) + t.bin_center_ps(b);
                let tol = t.perturbation_width_ps as u128;
                if twice_c.abs_diff(mid as u128) > tol {
                    return Err(format!(
                        "perturbation at {} ps is more than {} ps from the pair midpoint",
                        twice_c / 2,
                        tol / 2
                    ));
                }
                true
            }
            more => {
                return Err(format!(
                    "expected at most one perturbation, found {}",
                    more.len()
                ))
            }
        };

        let level = im.first().copied().unwrap_or(0.0);
        if im.iter().any(|v| (v - level).abs() > 1e-6) {
            return Err("intensity level changes within the frame".into());
        }
        let intensity = if level > 0.5 * (1.0 + self.decoy_level) {
            Intensity::Signal
        } else {
            Intensity::Decoy
        };
        Ok(FrameSpec {
            basis,
            symbol: 2 * pair + odd as u8,
            intensity,
        })
    }
}

/// The eight states in basis/symbol order, alternating intensities.
pub fn demo_sequence() -> Vec<FrameSpec> {
    let mut v = Vec::with_capacity(8);
    for basis in Basis::ALL {
        for symbol in 0..4u8 {
            let intensity = Intensity::ALL[(symbol & 1) as usize];
            v.push(FrameSpec::new(basis, symbol, intensity));
        }
    }
    v
}
