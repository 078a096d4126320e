//! One-decoy finite-key analysis.
//!
//! Tallies are turned into Hoeffding intervals on the intensity-rescaled
//! counts `n*_k = e^k / p_k * n_k`, from which lower bounds on vacuum and
//! single-photon events and an upper bound on single-photon errors follow in
//! closed form. The phase error of the Z key is estimated from the X basis
//! with a random-sampling correction, and the key length is
//!
//! ```text
//! l_4D = 2 D0 + D1 (2 - H(phi)) - lambda_EC - 6 log2(19/eps_sec) - log2(2/eps_cor)
//! ```
//!
//! with `H(x) = -x log2(x/3) - (1-x) log2(1-x)`. The two-dimensional
//! comparison uses the binary entropy and one bit per event.

use core::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::channel::{
    detection_prob, expected_tallies, Intensity, IntensitySettings, LinkParams, TallySet,
    BOB_BASIS_PROB,
};
use crate::states::{Basis, Dimension};
use crate::{Error, Result};

/// Number of intervals sharing the secrecy budget.
const EPS_SPLIT: f64 = 19.0;

/// Relative separation below which `mu` and `nu` are treated as equal.
const MIN_INTENSITY_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockSemantics {
    /// `block_size` counts sifted Z-basis detections.
    SiftedDetections,
    /// `block_size` counts emitted states.
    PulsesSent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecurityParams {
    pub eps_sec: f64,
    pub eps_cor: f64,
    pub block_size: f64,
    /// Error-correction inefficiency.
    pub f_ec: f64,
    pub block_semantics: BlockSemantics,
}

impl Default for SecurityParams {
    fn default() -> Self {
        SecurityParams {
            eps_sec: 1e-9,
            eps_cor: 1e-10,
            block_size: 1e11,
            f_ec: 1.16,
            block_semantics: BlockSemantics::SiftedDetections,
        }
    }
}

impl SecurityParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |what: &str| Err(Error::invalid(alloc::format!("security.{what}")));
        if !(self.eps_sec > 0.0 && self.eps_sec < 1.0) {
            return fail("eps_sec: must lie in (0, 1)");
        }
        if !(self.eps_cor > 0.0 && self.eps_cor < 1.0) {
            return fail("eps_cor: must lie in (0, 1)");
        }
        if !(self.block_size > 0.0 && self.block_size.is_finite()) {
            return fail("block_size: must be > 0");
        }
        if !(self.f_ec >= 1.0 && self.f_ec.is_finite()) {
            return fail("f_ec: must be >= 1");
        }
        Ok(())
    }

    /// Failure probability assigned to each concentration bound.
    pub fn eps_interval(&self) -> f64 {
        self.eps_sec / EPS_SPLIT
    }

    /// `6 log2(19/eps_sec) + log2(2/eps_cor)`.
    pub fn overhead_bits(&self) -> f64 {
        6.0 * libm::log2(EPS_SPLIT / self.eps_sec) + libm::log2(2.0 / self.eps_cor)
    }
}

/// Largest meaningful error rate: `(d - 1) / d`.
pub fn max_error(dim: Dimension) -> f64 {
    dim.random_error()
}

fn xlog2(x: f64, arg: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * libm::log2(arg)
    }
}

/// `H(x) = -x log2(x/3) - (1-x) log2(1-x)` on `[0, 3/4]`.
pub fn entropy_4d(x: f64) -> Result<f64> {
    if !(0.0..=0.75).contains(&x) {
        return Err(Error::invalid(alloc::format!(
            "entropy_4d argument {x} outside [0, 3/4]"
        )));
    }
    Ok(-xlog2(x, x / 3.0) - xlog2(1.0 - x, 1.0 - x))
}

/// Binary entropy on `[0, 1/2]`.
pub fn entropy_2d(x: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&x) {
        return Err(Error::invalid(alloc::format!(
            "entropy_2d argument {x} outside [0, 1/2]"
        )));
    }
    Ok(-xlog2(x, x) - xlog2(1.0 - x, 1.0 - x))
}

pub fn entropy(dim: Dimension, x: f64) -> Result<f64> {
    match dim {
        Dimension::Four => entropy_4d(x),
        Dimension::Two => entropy_2d(x),
    }
}

/// Hoeffding deviation `sqrt(n/2 ln(1/eps))`.
pub fn fluctuation_bound(n: f64, eps: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    libm::sqrt(n / 2.0 * libm::log(1.0 / eps))
}

/// Poisson mixture weight `tau_n = sum_k p_k e^{-k} k^n / n!`.
pub fn tau(settings: &IntensitySettings, n: u32) -> f64 {
    Intensity::ALL
        .iter()
        .map(|&k| settings.prob(k) * poisson_pmf(settings.mean(k), n))
        .sum()
}

pub fn poisson_pmf(mean: f64, n: u32) -> f64 {
    let mut p = libm::exp(-mean);
    for i in 1..=n {
        p *= mean / i as f64;
    }
    p
}

/// Hoeffding intervals on the rescaled detection and error counts of one basis.
///
/// Both the closed-form bounds and the linear-programming oracle consume this,
/// so the two routes share identical statistical constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisIntervals {
    pub basis: Basis,
    /// Indexed by [`Intensity::index`].
    pub n_lo: [f64; 2],
    pub n_hi: [f64; 2],
    pub m_lo: [f64; 2],
    pub m_hi: [f64; 2],
    pub n_total: f64,
    pub m_total: f64,
    pub mu: f64,
    pub nu: f64,
    pub tau0: f64,
    pub tau1: f64,
}

pub fn basis_intervals(
    t: &TallySet,
    settings: &IntensitySettings,
    sec: &SecurityParams,
    basis: Basis,
) -> Result<BasisIntervals> {
    settings.validate()?;
    t.validate()?;
    let total = t.basis_total(basis);
    let eps = sec.eps_interval();
    let dn = fluctuation_bound(total.n, eps);
    let dm = fluctuation_bound(total.m, eps);
    let mut out = BasisIntervals {
        basis,
        n_lo: [0.0; 2],
        n_hi: [0.0; 2],
        m_lo: [0.0; 2],
        m_hi: [0.0; 2],
        n_total: total.n,
        m_total: total.m,
        mu: settings.mu,
        nu: settings.nu,
        tau0: tau(settings, 0),
        tau1: tau(settings, 1),
    };
    for k in Intensity::ALL {
        let i = k.index();
        let scale = libm::exp(settings.mean(k)) / settings.prob(k);
        let c = t.get(basis, k);
        out.n_lo[i] = scale * (c.n - dn).max(0.0);
        out.n_hi[i] = scale * (c.n + dn);
        out.m_lo[i] = scale * (c.m - dm).max(0.0);
        out.m_hi[i] = scale * (c.m + dm);
    }
    Ok(out)
}

/// Vacuum and single-photon bounds of one basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonBounds {
    pub s0_low: f64,
    pub s0_up: f64,
    pub s1_low: f64,
    pub v1_up: f64,
}

const S: usize = 0;
const D: usize = 1;

/// Closed-form one-decoy bounds from the rescaled intervals.
pub fn photon_bounds(iv: &BasisIntervals, dim: Dimension) -> Result<PhotonBounds> {
    let (mu, nu) = (iv.mu, iv.nu);
    if !(mu - nu > MIN_INTENSITY_GAP * mu) {
        return Err(Error::IllConditioned { mu, nu });
    }
    if iv.n_total <= 0.0 {
        return Ok(PhotonBounds {
            s0_low: 0.0,
            s0_up: 0.0,
            s1_low: 0.0,
            v1_up: 0.0,
        });
    }
    let s0_low = (iv.tau0 / (mu - nu) * (mu * iv.n_lo[D] - nu * iv.n_hi[S])).max(0.0);
    let y0_up = (iv.m_hi[D] / dim.random_error())
        .min(iv.n_hi[D])
        .min(iv.n_hi[S]);
    let s0_up = iv.tau0 * y0_up;
    let mu2 = mu * mu;
    let nu2 = nu * nu;
    let s1_low = (mu * iv.tau1 / (mu * nu - nu2)
        * (iv.n_lo[D] - nu2 / mu2 * iv.n_hi[S] - (mu2 - nu2) / mu2 * y0_up))
        .max(0.0);
    let v1_up = (iv.tau1 * (iv.m_hi[S] - iv.m_lo[D]) / (mu - nu)).max(0.0);
    Ok(PhotonBounds {
        s0_low,
        s0_up,
        s1_low,
        v1_up,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyBounds {
    pub d0_z_low: f64,
    pub d1_z_low: f64,
    pub s_x1_low: f64,
    pub v_x1_up: f64,
    pub phi_z_up: f64,
    pub dimension: Dimension,
}

impl DecoyBounds {
    /// Assembles bounds and fills in the phase-error estimate.
    pub fn from_photon_bounds(
        z: &PhotonBounds,
        x: &PhotonBounds,
        sec: &SecurityParams,
        dim: Dimension,
    ) -> DecoyBounds {
        let mut b = DecoyBounds {
            d0_z_low: z.s0_low,
            d1_z_low: z.s1_low,
            s_x1_low: x.s1_low,
            v_x1_up: x.v1_up,
            phi_z_up: 0.0,
            dimension: dim,
        };
        b.phi_z_up = phase_error_upper(&b, sec);
        b
    }
}

pub fn decoy_bounds_closed_form(
    t: &TallySet,
    settings: &IntensitySettings,
    sec: &SecurityParams,
    dim: Dimension,
) -> Result<DecoyBounds> {
    let z = photon_bounds(&basis_intervals(t, settings, sec, Basis::Z)?, dim)?;
    let x = photon_bounds(&basis_intervals(t, settings, sec, Basis::X)?, dim)?;
    Ok(DecoyBounds::from_photon_bounds(&z, &x, sec, dim))
}

/// Random-sampling correction for estimating the error rate of `c` events
/// from `d` test events with observed rate `b`, failure probability `a`.
pub fn sampling_correction(a: f64, b: f64, c: f64, d: f64) -> f64 {
    if !(b > 0.0 && b < 1.0) || !(c > 0.0) || !(d > 0.0) {
        return 0.0;
    }
    let arg = (c + d) / (c * d * (1.0 - b) * b * a * a);
    if arg <= 1.0 {
        return 0.0;
    }
    libm::sqrt((c + d) * (1.0 - b) * b / (c * d * LN_2) * libm::log2(arg))
}

/// Upper bound on the single-photon phase error rate of the Z key.
pub fn phase_error_upper(b: &DecoyBounds, sec: &SecurityParams) -> f64 {
    let cap = max_error(b.dimension);
    if !(b.s_x1_low > 0.0) || !(b.d1_z_low > 0.0) {
        return cap;
    }
    let ratio = (b.v_x1_up / b.s_x1_low).min(1.0);
    let gamma = sampling_correction(sec.eps_sec, ratio, b.d1_z_low, b.s_x1_low);
    (ratio + gamma).min(cap)
}

fn floor_bits(raw: f64) -> u64 {
    if raw.is_nan() || raw <= 0.0 {
        0
    } else {
        libm::floor(raw) as u64
    }
}

pub fn key_length_raw(b: &DecoyBounds, lambda_ec: f64, sec: &SecurityParams) -> f64 {
    let cap = max_error(b.dimension);
    let phi = b.phi_z_up.clamp(0.0, cap);
    let h = entropy(b.dimension, phi).expect("clamped into domain");
    let bits = b.dimension.d().trailing_zeros() as f64;
    bits * b.d0_z_low + b.d1_z_low * (bits - h) - lambda_ec - sec.overhead_bits()
}

/// Four-dimensional key length in bits, clamped at zero.
pub fn key_length_4d(b: &DecoyBounds, lambda_ec: f64, sec: &SecurityParams) -> u64 {
    debug_assert_eq!(b.dimension, Dimension::Four);
    floor_bits(key_length_raw(b, lambda_ec, sec))
}

/// Two-dimensional analog: `D0 + D1 (1 - h(phi)) - lambda_EC - overheads`.
pub fn key_length_2d(b: &DecoyBounds, lambda_ec: f64, sec: &SecurityParams) -> u64 {
    debug_assert_eq!(b.dimension, Dimension::Two);
    floor_bits(key_length_raw(b, lambda_ec, sec))
}

pub fn key_length(b: &DecoyBounds, lambda_ec: f64, sec: &SecurityParams) -> u64 {
    floor_bits(key_length_raw(b, lambda_ec, sec))
}

/// Bits disclosed by error correction: `f_ec * n_Z * H_d(qber)`.
pub fn lambda_ec(n_z: f64, qber_z: f64, dim: Dimension, sec: &SecurityParams) -> Result<f64> {
    if n_z < 0.0 {
        return Err(Error::invalid("n_z must be >= 0"));
    }
    Ok(sec.f_ec * n_z * entropy(dim, qber_z)?)
}

/// Asymptotic error threshold: root of `log2 d - 2 H_d(e)`.
pub fn asymptotic_threshold(dim: Dimension) -> f64 {
    let bits = dim.d().trailing_zeros() as f64;
    let rate = |e: f64| bits - 2.0 * entropy(dim, e).expect("inside bracket");
    let (mut lo, mut hi) = (0.0, max_error(dim));
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Every intermediate quantity of a key-rate evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyDiagnostics {
    pub states_sent: f64,
    pub block_time_s: f64,
    pub n_z: f64,
    pub m_z: f64,
    pub n_x: f64,
    pub m_x: f64,
    pub qber_z: f64,
    pub qber_x: f64,
    pub d0_z_low: f64,
    pub d1_z_low: f64,
    pub s_z0_up: f64,
    pub s_x1_low: f64,
    pub v_x1_up: f64,
    pub phi_z_up: f64,
    pub gamma: f64,
    pub lambda_ec: f64,
    pub overhead_bits: f64,
    pub raw_key_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyResult {
    pub ell_bits: u64,
    pub skr_bps: f64,
    pub dimension: Dimension,
    pub diagnostics: KeyDiagnostics,
}

/// Key length and rate for measured (or expected) tallies collected over
/// `block_time_s` seconds.
pub fn secret_key(
    t: &TallySet,
    settings: &IntensitySettings,
    sec: &SecurityParams,
    dim: Dimension,
    block_time_s: f64,
) -> Result<KeyResult> {
    sec.validate()?;
    let ivz = basis_intervals(t, settings, sec, Basis::Z)?;
    let ivx = basis_intervals(t, settings, sec, Basis::X)?;
    let z = photon_bounds(&ivz, dim)?;
    let x = photon_bounds(&ivx, dim)?;
    let bounds = DecoyBounds::from_photon_bounds(&z, &x, sec, dim);
    let tz = t.basis_total(Basis::Z);
    let tx = t.basis_total(Basis::X);
    let qber_z = t.qber(Basis::Z).min(max_error(dim));
    let lambda = lambda_ec(tz.n, qber_z, dim, sec)?;
    let raw = key_length_raw(&bounds, lambda, sec);
    let ell = floor_bits(raw);
    let ratio = if x.s1_low > 0.0 {
        (x.v1_up / x.s1_low).min(1.0)
    } else {
        0.0
    };
    let gamma = sampling_correction(sec.eps_sec, ratio, z.s1_low, x.s1_low);
    let skr = if block_time_s > 0.0 {
        ell as f64 / block_time_s
    } else {
        0.0
    };
    Ok(KeyResult {
        ell_bits: ell,
        skr_bps: skr,
        dimension: dim,
        diagnostics: KeyDiagnostics {
            states_sent: t.total_sent(),
            block_time_s,
            n_z: tz.n,
            m_z: tz.m,
            n_x: tx.n,
            m_x: tx.m,
            qber_z: t.qber(Basis::Z),
            qber_x: t.qber(Basis::X),
            d0_z_low: bounds.d0_z_low,
            d1_z_low: bounds.d1_z_low,
            s_z0_up: z.s0_up,
            s_x1_low: bounds.s_x1_low,
            v_x1_up: bounds.v_x1_up,
            phi_z_up: bounds.phi_z_up,
            gamma,
            lambda_ec: lambda,
            overhead_bits: sec.overhead_bits(),
            raw_key_length: raw,
        },
    })
}

/// Number of emitted states in one privacy-amplification block.
pub fn states_per_block(
    settings: &IntensitySettings,
    link: &LinkParams,
    sec: &SecurityParams,
    dim: Dimension,
) -> f64 {
    match sec.block_semantics {
        BlockSemantics::PulsesSent => sec.block_size,
        BlockSemantics::SiftedDetections => {
            let per_state: f64 = Intensity::ALL
                .iter()
                .map(|&k| {
                    settings.prob(k)
                        * settings.alice_basis_prob(Basis::Z)
                        * BOB_BASIS_PROB
                        * detection_prob(settings.mean(k), link, dim)
                })
                .sum();
            if per_state > 0.0 {
                sec.block_size / per_state
            } else {
                f64::INFINITY
            }
        }
    }
}

/// Analytic pipeline: expected tallies for one block, then [`secret_key`].
pub fn analytic_key_rate(
    settings: &IntensitySettings,
    link: &LinkParams,
    sec: &SecurityParams,
    dim: Dimension,
) -> Result<KeyResult> {
    settings.validate()?;
    link.validate()?;
    sec.validate()?;
    let sent = states_per_block(settings, link, sec, dim);
    if !sent.is_finite() {
        let t = TallySet::default();
        return secret_key(&t, settings, sec, dim, f64::INFINITY);
    }
    let t = expected_tallies(settings, link, dim, sent)?;
    secret_key(&t, settings, sec, dim, sent / link.repetition_rate_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const D4: Dimension = Dimension::Four;

    #[test]
    fn entropy_values() {
        assert_eq!(entropy_4d(0.0).unwrap(), 0.0);
        assert!((entropy_4d(0.75).unwrap() - 2.0).abs() < 1e-14);
        assert!((entropy_4d(0.189).unwrap() - 0.998_932_756_600_394_5).abs() < 1e-12);
        assert!(entropy_4d(0.8).is_err());
        assert!(entropy_4d(-0.1).is_err());
        assert_eq!(entropy_2d(0.0).unwrap(), 0.0);
        assert!((entropy_2d(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((entropy_2d(0.11).unwrap() - 0.499_915_958_164_528).abs() < 1e-12);
        assert!(entropy_2d(0.6).is_err());
    }

    #[test]
    fn hoeffding_term() {
        assert_eq!(fluctuation_bound(0.0, 1e-9), 0.0);
        assert!((fluctuation_bound(1e6, 1e-9) - 3_218.949_039_434_02).abs() < 1e-6);
    }

    #[test]
    fn zero_tallies_give_zero_bounds() {
        let s = IntensitySettings {
            mu: 0.5,
            nu: 0.18,
            p_mu: 0.78,
            p_x_alice: 0.1,
        };
        let b = decoy_bounds_closed_form(&TallySet::default(), &s, &SecurityParams::default(), D4)
            .unwrap();
        assert_eq!(b.d0_z_low, 0.0);
        assert_eq!(b.d1_z_low, 0.0);
        assert_eq!(b.s_x1_low, 0.0);
        assert_eq!(b.v_x1_up, 0.0);
        assert_eq!(b.phi_z_up, 0.75);
    }

    #[test]
    fn equal_intensities_are_ill_conditioned() {
        let s = IntensitySettings {
            mu: 0.5,
            nu: 0.5 - 1e-9,
            p_mu: 0.5,
            p_x_alice: 0.5,
        };
        let link = LinkParams::lab(D4, 10.0);
        let t = expected_tallies(&s, &link, D4, 1e9).unwrap();
        assert!(matches!(
            decoy_bounds_closed_form(&t, &s, &SecurityParams::default(), D4),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn bounds_dominated_by_totals() {
        let s = IntensitySettings {
            mu: 0.5,
            nu: 0.18,
            p_mu: 0.78,
            p_x_alice: 0.2,
        };
        for len in [0.0, 50.0, 150.0, 250.0] {
            let link = LinkParams::lab(D4, len);
            let t = expected_tallies(&s, &link, D4, 1e11).unwrap();
            let b = decoy_bounds_closed_form(&t, &s, &SecurityParams::default(), D4).unwrap();
            let z = t.basis_total(Basis::Z);
            let x = t.basis_total(Basis::X);
            assert!(b.d0_z_low + b.d1_z_low <= z.n);
            assert!(b.s_x1_low <= x.n);
            assert!(b.d1_z_low > 0.0);
            assert!((0.0..=0.75).contains(&b.phi_z_up));
        }
    }

    #[test]
    fn structural_key_length() {
        let sec = SecurityParams::default();
        let b = DecoyBounds {
            d0_z_low: 0.0,
            d1_z_low: 1e6,
            s_x1_low: 1.0,
            v_x1_up: 0.0,
            phi_z_up: 0.0,
            dimension: D4,
        };
        // 6 log2(19e9) + log2(2e10) = 239.0910 bits
        assert_eq!(key_length_4d(&b, 0.0, &sec), 2_000_000 - 240);
        let b2 = DecoyBounds {
            dimension: Dimension::Two,
            ..b
        };
        assert_eq!(key_length_2d(&b2, 0.0, &sec), 1_000_000 - 240);
        let zero = DecoyBounds { d1_z_low: 0.0, ..b };
        assert_eq!(key_length_4d(&zero, 0.0, &sec), 0);
    }

    #[test]
    fn lambda_values() {
        let sec = SecurityParams {
            f_ec: 1.0,
            ..SecurityParams::default()
        };
        assert_eq!(lambda_ec(1e6, 0.0, D4, &sec).unwrap(), 0.0);
        let l = lambda_ec(1e6, 0.025, D4, &sec).unwrap();
        assert!((l - 208_284.994_014_699_16).abs() < 1e-4);
        assert!((lambda_ec(2e6, 0.025, D4, &sec).unwrap() / l - 2.0).abs() < 1e-14);
        assert!(lambda_ec(1e6, 0.9, D4, &sec).is_err());
    }

    #[test]
    fn thresholds() {
        assert!((asymptotic_threshold(D4) - 0.189_289_624_915_199_74).abs() < 1e-6);
        assert!((asymptotic_threshold(Dimension::Two) - 0.110_027_864_438_359_55).abs() < 1e-6);
        // rate at zero error is log2 d
        assert_eq!(2.0 - 2.0 * entropy_4d(0.0).unwrap(), 2.0);
    }

    #[test]
    fn phase_error_limits() {
        let sec = SecurityParams::default();
        let mut b = DecoyBounds {
            d0_z_low: 0.0,
            d1_z_low: 1e15,
            s_x1_low: 1e15,
            v_x1_up: 2e13,
            phi_z_up: 0.0,
            dimension: D4,
        };
        assert!((phase_error_upper(&b, &sec) - 0.02).abs() < 1e-5);
        b.d1_z_low = 1e5;
        b.s_x1_low = 1e5;
        b.v_x1_up = 2e3;
        let tight = phase_error_upper(&b, &sec);
        let loose = phase_error_upper(
            &b,
            &SecurityParams {
                eps_sec: 1e-3,
                ..sec
            },
        );
        assert!(tight > loose && loose > 0.02);
        b.s_x1_low = 0.0;
        assert_eq!(phase_error_upper(&b, &sec), 0.75);
    }

    #[test]
    fn table_point_gives_positive_rate() {
        let s = IntensitySettings {
            mu: 0.5,
            nu: 0.18,
            p_mu: 0.78,
            p_x_alice: 0.1,
        };
        let link = LinkParams::lab(D4, 200.0);
        let r = analytic_key_rate(&s, &link, &SecurityParams::default(), D4).unwrap();
        assert!(r.ell_bits > 0);
        assert!(r.skr_bps > 100.0, "{:?}", r);
    }

    proptest! {
        #[test]
        fn key_length_monotone(d0 in 0.0f64..1e7, d1 in 0.0f64..1e7, phi in 0.0f64..0.75,
                               lam in 0.0f64..1e6, dd in 0.0f64..1e5, dphi in 0.0f64..0.1, dl in 0.0f64..1e5) {
            let sec = SecurityParams::default();
            let b = DecoyBounds { d0_z_low: d0, d1_z_low: d1, s_x1_low: 1.0, v_x1_up: 0.0, phi_z_up: phi, dimension: D4 };
            let base = key_length_4d(&b, lam, &sec);
            let worse_phi = DecoyBounds { phi_z_up: (phi + dphi).min(0.75), ..b };
            prop_assert!(key_length_4d(&worse_phi, lam, &sec) <= base);
            prop_assert!(key_length_4d(&b, lam + dl, &sec) <= base);
            let more0 = DecoyBounds { d0_z_low: d0 + dd, ..b };
            let more1 = DecoyBounds { d1_z_low: d1 + dd, ..b };
            prop_assert!(key_length_4d(&more0, lam, &sec) >= base);
            prop_assert!(key_length_4d(&more1, lam, &sec) >= base);
        }

        #[test]
        fn entropy_4d_concave(a in 0.0f64..0.75, b in 0.0f64..0.75) {
            let mid = entropy_4d(0.5 * (a + b)).unwrap();
            let avg = 0.5 * (entropy_4d(a).unwrap() + entropy_4d(b).unwrap());
            prop_assert!(mid >= avg - 1e-12);
            prop_assert!(entropy_4d(a).unwrap() <= 2.0 + 1e-12);
        }
    }
}
