//! Analytic link model for weak coherent pulses over fiber.
//!
//! Gains and error rates are per encoded state (the two-pulse wavepacket)
//! and conditional on the state reaching the interferometer arm that matches
//! Alice's basis. The passive 50:50 basis splitter enters through
//! [`BOB_BASIS_PROB`] when tallies are formed.

use core::fmt;

use serde::{Deserialize, Serialize};

use crate::receiver::conclusive_slots;
use crate::states::{Basis, Dimension};
use crate::{Error, Result};

/// Bob's passive basis choice.
pub const BOB_BASIS_PROB: f64 = 0.5;

/// Fraction of a matched-basis state that lands in a conclusive bin.
pub const POST_SELECTION_EFFICIENCY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkParams {
    pub length_km: f64,
    pub attenuation_db_per_km: f64,
    /// Receiver insertion loss not reported by the hardware description.
    pub rx_excess_loss_db: f64,
    pub detector_efficiency: f64,
    pub dark_rate_hz: f64,
    pub bin_width_s: f64,
    pub repetition_rate_hz: f64,
    /// Intrinsic symbol-error probability of a signal detection (Z basis).
    pub misalignment: f64,
    /// X-basis misalignment; falls back to `misalignment`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub misalignment_x: Option<f64>,
}

impl LinkParams {
    /// Laboratory hardware: 0.17 dB/km fiber, 75 % efficient SNSPDs with
    /// 5 Hz dark counts, 800 ps bins and one frame of `dim` bins per clock.
    pub fn lab(dim: Dimension, length_km: f64) -> Self {
        let bin_width_s = 800e-12;
        LinkParams {
            length_km,
            attenuation_db_per_km: 0.17,
            rx_excess_loss_db: 3.0,
            detector_efficiency: 0.75,
            dark_rate_hz: 5.0,
            bin_width_s,
            repetition_rate_hz: frame_rate(dim, bin_width_s),
            misalignment: 0.025,
            misalignment_x: None,
        }
    }

    pub fn misalignment_for(&self, basis: Basis) -> f64 {
        match basis {
            Basis::Z => self.misalignment,
            Basis::X => self.misalignment_x.unwrap_or(self.misalignment),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail =
            |field: &str, what: &str| Err(Error::invalid(alloc::format!("link.{field}: {what}")));
        if !(self.length_km >= 0.0 && self.length_km.is_finite()) {
            return fail("length_km", "must be finite and >= 0");
        }
        if !(self.attenuation_db_per_km >= 0.0 && self.attenuation_db_per_km.is_finite()) {
            return fail("attenuation_db_per_km", "must be finite and >= 0");
        }
        if !(self.rx_excess_loss_db >= 0.0 && self.rx_excess_loss_db.is_finite()) {
            return fail("rx_excess_loss_db", "must be finite and >= 0");
        }
        if !(self.detector_efficiency > 0.0 && self.detector_efficiency <= 1.0) {
            return fail("detector_efficiency", "must lie in (0, 1]");
        }
        if !(self.dark_rate_hz >= 0.0 && self.dark_rate_hz.is_finite()) {
            return fail("dark_rate_hz", "must be finite and >= 0");
        }
        if !(self.bin_width_s > 0.0 && self.bin_width_s.is_finite()) {
            return fail("bin_width_s", "must be > 0");
        }
        if !(self.repetition_rate_hz > 0.0 && self.repetition_rate_hz.is_finite()) {
            return fail("repetition_rate_hz", "must be > 0");
        }
        if !(0.0..=1.0).contains(&self.misalignment) {
            return fail("misalignment", "must lie in [0, 1]");
        }
        if let Some(mx) = self.misalignment_x {
            if !(0.0..=1.0).contains(&mx) {
                return fail("misalignment_x", "must lie in [0, 1]");
            }
        }
        if self.dark_rate_hz * self.bin_width_s > 1.0 {
            return fail("dark_rate_hz", "dark probability per bin exceeds 1");
        }
        Ok(())
    }
}

/// One frame of `dim` bins per clock period.
pub fn frame_rate(dim: Dimension, bin_width_s: f64) -> f64 {
    1.0 / (dim.bins() as f64 * bin_width_s)
}

/// Which emitted intensity a state carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Intensity {
    Signal,
    Decoy,
}

impl Intensity {
    pub const ALL: [Intensity; 2] = [Intensity::Signal, Intensity::Decoy];

    pub fn index(self) -> usize {
        match self {
            Intensity::Signal => 0,
            Intensity::Decoy => 1,
        }
    }
}

impl fmt::Display for Intensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Intensity::Signal => f.write_str("signal"),
            Intensity::Decoy => f.write_str("decoy"),
        }
    }
}

/// Alice's source settings. Bob's basis probabilities are fixed at 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensitySettings {
    pub mu: f64,
    pub nu: f64,
    pub p_mu: f64,
    pub p_x_alice: f64,
}

impl IntensitySettings {
    pub fn validate(&self) -> Result<()> {
        let fail = |what: &str| Err(Error::invalid(alloc::format!("settings: {what}")));
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return fail("nu must be > 0");
        }
        if !(self.mu.is_finite() && self.nu < self.mu) {
            return fail("constraint 0 < nu < mu violated");
        }
        if !(self.p_mu > 0.0 && self.p_mu < 1.0) {
            return fail("p_mu must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.p_x_alice) {
            return fail("p_x_alice must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn mean(&self, k: Intensity) -> f64 {
        match k {
            Intensity::Signal => self.mu,
            Intensity::Decoy => self.nu,
        }
    }

    pub fn prob(&self, k: Intensity) -> f64 {
        match k {
            Intensity::Signal => self.p_mu,
            Intensity::Decoy => 1.0 - self.p_mu,
        }
    }

    pub fn p_nu(&self) -> f64 {
        1.0 - self.p_mu
    }

    pub fn alice_basis_prob(&self, b: Basis) -> f64 {
        match b {
            Basis::Z => 1.0 - self.p_x_alice,
            Basis::X => self.p_x_alice,
        }
    }
}

/// Sifted detections `n` and errors `m` of one basis/intensity cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub n: f64,
    pub m: f64,
}

/// Per-basis, per-intensity sifted counts plus states sent per intensity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TallySet {
    /// Indexed `[basis][intensity]`.
    pub cells: [[Tally; 2]; 2],
    /// States emitted with each intensity.
    pub sent: [f64; 2],
}

impl TallySet {
    pub fn get(&self, b: Basis, k: Intensity) -> Tally {
        self.cells[b.index()][k.index()]
    }

    pub fn get_mut(&mut self, b: Basis, k: Intensity) -> &mut Tally {
        &mut self.cells[b.index()][k.index()]
    }

    pub fn basis_total(&self, b: Basis) -> Tally {
        let [s, d] = self.cells[b.index()];
        Tally {
            n: s.n + d.n,
            m: s.m + d.m,
        }
    }

    pub fn qber(&self, b: Basis) -> f64 {
        let t = self.basis_total(b);
        if t.n > 0.0 {
            t.m / t.n
        } else {
            0.0
        }
    }

    pub fn total_sent(&self) -> f64 {
        self.sent[0] + self.sent[1]
    }

    pub fn scaled(&self, factor: f64) -> TallySet {
        let mut out = *self;
        for row in &mut out.cells {
            for cell in row {
                cell.n *= factor;
                cell.m *= factor;
            }
        }
        out.sent[0] *= factor;
        out.sent[1] *= factor;
        out
    }

    pub fn validate(&self) -> Result<()> {
        for row in &self.cells {
            for c in row {
                if !(c.n >= 0.0 && c.m >= 0.0 && c.m <= c.n * (1.0 + 1e-12)) {
                    return Err(Error::Inconsistent(alloc::format!(
                        "tally requires 0 <= m <= n, got n = {}, m = {}",
                        c.n,
                        c.m
                    )));
                }
            }
        }
        if self.sent.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Inconsistent("negative number of states sent".into()));
        }
        Ok(())
    }
}

/// Fiber transmittance `10^(-alpha L / 10)`.
pub fn transmittance(link: &LinkParams) -> f64 {
    libm::pow(10.0, -link.attenuation_db_per_km * link.length_km / 10.0)
}

/// Probability that one photon survives fiber, receiver loss and detector.
pub fn photon_survival(link: &LinkParams) -> f64 {
    transmittance(link) * libm::pow(10.0, -link.rx_excess_loss_db / 10.0) * link.detector_efficiency
}

/// End-to-end single-photon efficiency into a conclusive slot of the matched arm.
pub fn total_efficiency(link: &LinkParams) -> f64 {
    photon_survival(link) * POST_SELECTION_EFFICIENCY
}

/// Dark-count probability of one (bin, detector) slot.
pub fn dark_prob_per_slot(link: &LinkParams) -> f64 {
    link.dark_rate_hz * link.bin_width_s
}

/// Dark-count probability over all conclusive slots of one arm and frame.
pub fn dark_prob_per_frame(link: &LinkParams, dim: Dimension) -> f64 {
    dark_prob_per_slot(link) * conclusive_slots(dim) as f64
}

/// Gain `Q_k`: probability that a state of mean photon number `k` entering
/// the matched arm yields a conclusive click.
pub fn detection_prob(k: f64, link: &LinkParams, dim: Dimension) -> f64 {
    let p_dark = dark_prob_per_frame(link, dim);
    -libm::expm1(libm::log1p(-p_dark) - k * total_efficiency(link))
}

/// Error rate `E_k` among conclusive matched-arm clicks.
pub fn error_prob(k: f64, link: &LinkParams, dim: Dimension, basis: Basis) -> f64 {
    let q = detection_prob(k, link, dim);
    if q <= 0.0 {
        return dim.random_error();
    }
    let signal = -libm::expm1(-k * total_efficiency(link));
    (dim.random_error() * dark_prob_per_frame(link, dim) + link.misalignment_for(basis) * signal)
        / q
}

/// Expected sifted tallies after `states_sent` emitted states.
pub fn expected_tallies(
    settings: &IntensitySettings,
    link: &LinkParams,
    dim: Dimension,
    states_sent: f64,
) -> Result<TallySet> {
    if !(states_sent > 0.0) {
        return Err(Error::invalid("states_sent must be > 0"));
    }
    let mut t = TallySet::default();
    for k in Intensity::ALL {
        let sent_k = states_sent * settings.prob(k);
        t.sent[k.index()] = sent_k;
        let q = detection_prob(settings.mean(k), link, dim);
        for b in Basis::ALL {
            let n = sent_k * settings.alice_basis_prob(b) * BOB_BASIS_PROB * q;
            let e = error_prob(settings.mean(k), link, dim, b);
            *t.get_mut(b, k) = Tally { n, m: n * e };
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use proptest::prelude::*;

    const D4: Dimension = Dimension::Four;

    fn settings() -> IntensitySettings {
        IntensitySettings {
            mu: 0.5,
            nu: 0.18,
            p_mu: 0.78,
            p_x_alice: 0.1,
        }
    }

    #[test]
    fn transmittance_values() {
        let mut l = LinkParams::lab(D4, 0.0);
        assert_eq!(transmittance(&l), 1.0);
        l.length_km = 250.0;
        assert!((transmittance(&l) / 5.623_413_251_903_491e-5 - 1.0).abs() < 1e-12);
        l.length_km = 200.0;
        assert!((transmittance(&l) / 3.981_071_705_534_972e-4 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn repetition_rates() {
        assert!((LinkParams::lab(D4, 0.0).repetition_rate_hz - 312.5e6).abs() < 1e-3);
        assert!((LinkParams::lab(Dimension::Two, 0.0).repetition_rate_hz - 625e6).abs() < 1e-3);
    }

    #[test]
    fn dark_only_and_saturation() {
        let l = LinkParams::lab(D4, 100.0);
        assert!((dark_prob_per_slot(&l) - 4e-9).abs() < 1e-24);
        assert!((detection_prob(0.0, &l, D4) / dark_prob_per_frame(&l, D4) - 1.0).abs() < 1e-12);
        let mut ideal = l;
        ideal.dark_rate_hz = 0.0;
        ideal.length_km = 0.0;
        ideal.rx_excess_loss_db = 0.0;
        ideal.detector_efficiency = 1.0;
        assert!((detection_prob(100.0, &ideal, D4) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn error_limits() {
        let l = LinkParams::lab(D4, 100.0);
        assert!((error_prob(0.0, &l, D4, Basis::Z) - 0.75).abs() < 1e-15);
        let l2 = LinkParams::lab(Dimension::Two, 100.0);
        assert!((error_prob(0.0, &l2, Dimension::Two, Basis::Z) - 0.5).abs() < 1e-15);
        let mut clean = LinkParams::lab(D4, 0.0);
        clean.dark_rate_hz = 0.0;
        assert!((error_prob(5.0, &clean, D4, Basis::Z) - 0.025).abs() < 1e-15);
    }

    #[test]
    fn tallies_scale_and_vanish() {
        let l = LinkParams::lab(D4, 50.0);
        let a = expected_tallies(&settings(), &l, D4, 1e9).unwrap();
        let b = expected_tallies(&settings(), &l, D4, 2e9).unwrap();
        for bs in Basis::ALL {
            for k in Intensity::ALL {
                assert!((b.get(bs, k).n / a.get(bs, k).n - 2.0).abs() < 1e-12);
            }
        }
        let mut s = settings();
        s.p_x_alice = 0.0;
        let z = expected_tallies(&s, &l, D4, 1e9).unwrap();
        assert_eq!(z.basis_total(Basis::X).n, 0.0);
        assert!(expected_tallies(&s, &l, D4, 0.0).is_err());
    }

    #[test]
    fn table_point_qber_lands_near_measurement() {
        let l = LinkParams::lab(D4, 200.0);
        let t = expected_tallies(&settings(), &l, D4, 1e12).unwrap();
        let q = t.qber(Basis::Z);
        assert!((0.020..=0.030).contains(&q), "{q}");
    }

    #[test]
    fn validation() {
        let mut s = settings();
        s.nu = 0.6;
        assert!(s.validate().unwrap_err().to_string().contains("nu < mu"));
        let mut l = LinkParams::lab(D4, 1.0);
        l.detector_efficiency = 1.5;
        assert!(l.validate().is_err());
    }

    proptest! {
        #[test]
        fn gain_monotone_and_error_bounded(k in 0.0f64..2.0, dk in 1e-3f64..1.0, len in 0.0f64..300.0) {
            let l = LinkParams::lab(D4, len);
            prop_assert!(detection_prob(k + dk, &l, D4) > detection_prob(k, &l, D4));
            let mut shorter = l;
            shorter.length_km = len * 0.5;
            if len > 1.0 {
                prop_assert!(detection_prob(k + dk, &shorter, D4) > detection_prob(k + dk, &l, D4));
            }
            let e = error_prob(k, &l, D4, Basis::Z);
            prop_assert!((0.0..=0.75).contains(&e));
        }
    }
}
