//! Linear-programming oracle for the vacuum and single-photon contributions.
//!
//! For one basis the unknowns are `S_n` (detections that would occur if every
//! state carried `n` photons) and `W_n` (errors among them), `n = 0..=n_max`.
//! With `n_k` rescaled by `e^k / p_k`, the statistics require
//!
//! ```text
//! n_lo[k] <= sum_n k^n / n! * S_n <= n_hi[k]
//! m_lo[k] <= sum_n k^n / n! * W_n <= m_hi[k]
//! W_0 = e_rand * S_0,  0 <= W_n <= S_n <= cap
//! ```
//!
//! Photon numbers above `n_max` are set to zero, which restricts the
//! feasible set: every valid analytic bound must lie outside the LP range.

use hdqkd_core::channel::{Intensity, IntensitySettings, TallySet, BOB_BASIS_PROB};
use hdqkd_core::finite_key::{
    basis_intervals, photon_bounds, BasisIntervals, PhotonBounds, SecurityParams,
};
use hdqkd_core::{Basis, Dimension};
use minilp::{ComparisonOp, OptimizationDirection, Problem, Variable};
use serde::{Deserialize, Serialize};

use crate::AppError;

pub const DEFAULT_MAX_PHOTONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpIntervals {
    pub s0_min: f64,
    pub s0_max: f64,
    pub s1_min: f64,
    pub s1_max: f64,
    pub v1_max: f64,
}

#[derive(Clone, Copy)]
enum Target {
    S(usize),
    W(usize),
}

fn solve(
    iv: &BasisIntervals,
    dim: Dimension,
    cap: f64,
    n_max: usize,
    target: Target,
    dir: OptimizationDirection,
) -> Result<f64, AppError> {
    // keep LP coefficients near unity
    let scale = iv.n_hi.iter().copied().fold(1.0, f64::max);
    let mut p = Problem::new(dir);
    let weight = |t: Target, n: usize| match t {
        Target::S(i) | Target::W(i) if i == n => 1.0,
        _ => 0.0,
    };
    let is_s = matches!(target, Target::S(_));
    let is_w = !is_s;
    let s: Vec<Variable> = (0..=n_max)
        .map(|n| {
            p.add_var(
                if is_s { weight(target, n) } else { 0.0 },
                (0.0, cap / scale),
            )
        })
        .collect();
    let w: Vec<Variable> = (0..=n_max)
        .map(|n| {
            p.add_var(
                if is_w { weight(target, n) } else { 0.0 },
                (0.0, cap / scale),
            )
        })
        .collect();
    for k in Intensity::ALL {
        let mean = if k == Intensity::Signal { iv.mu } else { iv.nu };
        let mut coef = Vec::with_capacity(n_max + 1);
        let mut c = 1.0;
        for n in 0..=n_max {
            if n > 0 {
                c *= mean / n as f64;
            }
            coef.push(c);
        }
        let i = k.index();
        let row_s: Vec<(Variable, f64)> = s.iter().copied().zip(coef.iter().copied()).collect();
        let row_w: Vec<(Variable, f64)> = w.iter().copied().zip(coef.iter().copied()).collect();
        p.add_constraint(row_s.as_slice(), ComparisonOp::Ge, iv.n_lo[i] / scale);
        p.add_constraint(row_s.as_slice(), ComparisonOp::Le, iv.n_hi[i] / scale);
        p.add_constraint(row_w.as_slice(), ComparisonOp::Ge, iv.m_lo[i] / scale);
        p.add_constraint(row_w.as_slice(), ComparisonOp::Le, iv.m_hi[i] / scale);
    }
    p.add_constraint(
        [(w[0], 1.0), (s[0], -dim.random_error())],
        ComparisonOp::Eq,
        0.0,
    );
    for n in 1..=n_max {
        p.add_constraint([(w[n], 1.0), (s[n], -1.0)], ComparisonOp::Le, 0.0);
    }
    let sol = p
        .solve()
        .map_err(|e| AppError::Computation(format!("decoy LP ({:?} basis): {e}", iv.basis)))?;
    Ok(sol.objective() * scale)
}

/// LP ranges of the basis quantities, in the same units as [`PhotonBounds`].
pub fn lp_intervals(
    iv: &BasisIntervals,
    dim: Dimension,
    cap: f64,
    n_max: usize,
) -> Result<LpIntervals, AppError> {
    use OptimizationDirection::{Maximize, Minimize};
    if n_max < 2 {
        return Err(AppError::Config(
            "decoy LP needs at least two photon-number terms".into(),
        ));
    }
    Ok(LpIntervals {
        s0_min: iv.tau0 * solve(iv, dim, cap, n_max, Target::S(0), Minimize)?,
        s0_max: iv.tau0 * solve(iv, dim, cap, n_max, Target::S(0), Maximize)?,
        s1_min: iv.tau1 * solve(iv, dim, cap, n_max, Target::S(1), Minimize)?,
        s1_max: iv.tau1 * solve(iv, dim, cap, n_max, Target::S(1), Maximize)?,
        v1_max: iv.tau1 * solve(iv, dim, cap, n_max, Target::W(1), Maximize)?,
    })
}

/// Upper limit on any `S_n`: the matched-arm states of the basis.
pub fn yield_cap(t: &TallySet, settings: &IntensitySettings, basis: Basis) -> f64 {
    t.total_sent() * settings.alice_basis_prob(basis) * BOB_BASIS_PROB
}

/// Closed-form and LP results side by side for one basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub basis: Basis,
    pub closed_form: PhotonBounds,
    pub lp: LpIntervals,
}

impl BoundCheck {
    /// Analytic bounds lie outside the LP ranges, up to `rel_tol`.
    pub fn contained(&self, rel_tol: f64) -> bool {
        let c = &self.closed_form;
        let l = &self.lp;
        let slack = |x: f64| rel_tol * x.abs().max(1e-9);
        c.s0_low <= l.s0_min + slack(l.s0_min)
            && c.s0_up >= l.s0_max - slack(l.s0_max)
            && c.s1_low <= l.s1_min + slack(l.s1_min)
            && c.v1_up >= l.v1_max - slack(l.v1_max)
    }
}

pub fn check_bounds(
    t: &TallySet,
    settings: &IntensitySettings,
    sec: &SecurityParams,
    dim: Dimension,
    basis: Basis,
    n_max: usize,
) -> Result<BoundCheck, AppError> {
    let iv = basis_intervals(t, settings, sec, basis)?;
    let closed_form = photon_bounds(&iv, dim)?;
    let lp = lp_intervals(&iv, dim, yield_cap(t, settings, basis), n_max)?;
    Ok(BoundCheck {
        basis,
        closed_form,
        lp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use hdqkd_core::channel::{expected_tallies, LinkParams};

    fn settings() -> IntensitySettings {
        IntensitySettings {
            mu: 0.5,
            nu: 0.18,
            p_mu: 0.78,
            p_x_alice: 0.3,
        }
    }

    #[test]
    fn closed_form_outside_lp_range() {
        let sec = SecurityParams::default();
        for l in [0.0, 100.0, 200.0] {
            let link = LinkParams::lab(Dimension::Four, l);
            let t = expected_tallies(&settings(), &link, Dimension::Four, 1e11).unwrap();
            for b in Basis::ALL {
                let c = check_bounds(&t, &settings(), &sec, Dimension::Four, b, 10).unwrap();
                assert!(c.contained(1e-6), "{l} km {b}: {c:?}");
                assert!(c.lp.s1_min <= c.lp.s1_max);
                assert!(c.lp.s1_min > 0.0, "{l} km {b}: {c:?}");
            }
        }
    }

    #[test]
    fn lp_tightens_with_more_statistics() {
        let sec = SecurityParams::default();
        let link = LinkParams::lab(Dimension::Four, 50.0);
        let width = |sent: f64| {
            let t = expected_tallies(&settings(), &link, Dimension::Four, sent).unwrap();
            let c = check_bounds(&t, &settings(), &sec, Dimension::Four, Basis::Z, 10).unwrap();
            (c.lp.s1_max - c.lp.s1_min) / c.lp.s1_max
        };
        assert!(width(1e11) < width(1e8));
    }

    #[test]
    fn too_few_terms_rejected() {
        let sec = SecurityParams::default();
        let link = LinkParams::lab(Dimension::Four, 50.0);
        let t = expected_tallies(&settings(), &link, Dimension::Four, 1e8).unwrap();
        assert!(check_bounds(&t, &settings(), &sec, Dimension::Four, Basis::Z, 1).is_err());
    }
}
