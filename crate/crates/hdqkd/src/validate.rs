//! Embedded invariant suite behind `hdqkd validate`.

use hdqkd_core::finite_key::asymptotic_threshold;
use hdqkd_core::receiver::{measure, propagate, Receiver};
use hdqkd_core::states::{basis_states, verify_mub};
use hdqkd_core::txpattern::{demo_sequence, DriveTimeline, TxCompiler};
use hdqkd_core::{Basis, Dimension};

const TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Check {
            name,
            passed,
            detail,
        }
    }

    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        format!("{tag} {}: {}", self.name, self.detail)
    }
}

fn mub(dim: Dimension) -> Check {
    let r = verify_mub(dim);
    Check::new(
        if dim == Dimension::Four {
            "mub_4d"
        } else {
            "mub_2d"
        },
        r.passed,
        format!(
            "max gram deviation {:.1e}, max cross deviation {:.1e}",
            r.max_gram_deviation, r.max_cross_deviation
        ),
    )
}

fn conservation(dim: Dimension) -> Check {
    let rx = Receiver::ideal(dim);
    let mut worst: f64 = 0.0;
    for b in Basis::ALL {
        for s in basis_states(b, dim) {
            for arm in Basis::ALL {
                worst = worst.max((propagate(&s, rx.arm(arm)).total() - 1.0).abs());
            }
        }
    }
    Check::new(
        if dim == Dimension::Four {
            "propagation_conservation_4d"
        } else {
            "propagation_conservation_2d"
        },
        worst <= TOL,
        format!("max |sum p - 1| = {worst:.1e}"),
    )
}

fn matched_basis(dim: Dimension) -> Check {
    let rx = Receiver::ideal(dim);
    let mut worst_err: f64 = 0.0;
    let mut worst_conc: f64 = 0.0;
    let mut failure = None;
    for b in Basis::ALL {
        for (i, s) in basis_states(b, dim).iter().enumerate() {
            match measure(s, dim, b, rx.arm(b)) {
                Ok(m) => {
                    let c = m.conclusive();
                    worst_conc = worst_conc.max((c - 0.5).abs());
                    worst_err = worst_err.max(c - m.symbols[i]);
                }
                Err(e) => failure = Some(e.to_string()),
            }
        }
    }
    let passed = failure.is_none() && worst_err <= TOL && worst_conc <= TOL;
    Check::new(
        if dim == Dimension::Four {
            "matched_basis_4d"
        } else {
            "matched_basis_2d"
        },
        passed,
        failure.unwrap_or_else(|| {
            format!(
                "max error probability {worst_err:.1e}, max |conclusive - 1/2| {worst_conc:.1e}"
            )
        }),
    )
}

fn threshold(dim: Dimension, expected: f64) -> Check {
    let root = asymptotic_threshold(dim);
    Check::new(
        if dim == Dimension::Four {
            "threshold_4d"
        } else {
            "threshold_2d"
        },
        (root - expected).abs() <= 1e-3,
        format!("root {root:.4}"),
    )
}

fn tx_round_trip() -> Check {
    let c = TxCompiler::default();
    let seq = demo_sequence();
    let ok = c
        .compile_sequence(&seq)
        .and_then(|tl| c.decode_timeline(&tl))
        .map(|back| back == seq);
    Check::new(
        "txpattern_round_trip",
        matches!(ok, Ok(true)),
        match ok {
            Ok(true) => "8 demo states decode to themselves".into(),
            Ok(false) => "decoded sequence differs".into(),
            Err(e) => e.to_string(),
        },
    )
}

/// Decodes an externally supplied timeline.
pub fn timeline_check(tl: &DriveTimeline) -> Check {
    let c = TxCompiler {
        sample_rate_hz: tl.sample_rate_hz,
        ..TxCompiler::default()
    };
    match c.decode_timeline(tl) {
        Ok(frames) => Check::new(
            "timeline_decode",
            true,
            format!("{} frames decoded", frames.len()),
        ),
        Err(e) => Check::new("timeline_decode", false, e.to_string()),
    }
}

pub fn run_all() -> Vec<Check> {
    vec![
        mub(Dimension::Four),
        mub(Dimension::Two),
        conservation(Dimension::Four),
        conservation(Dimension::Two),
        matched_basis(Dimension::Four),
        matched_basis(Dimension::Two),
        threshold(Dimension::Four, 0.1893),
        threshold(Dimension::Two, 0.1100),
        tx_round_trip(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for c in run_all() {
            assert!(c.passed, "{}", c.line());
        }
    }
}
