//! Brute-force receiver model used as a test oracle.
//!
//! States and interferometers are rebuilt here from scratch with plain
//! `(re, im)` pairs and every (input bin, path, port) amplitude is summed by
//! enumeration.

#![allow(dead_code)]

use std::collections::BTreeMap;

pub type C = (f64, f64);

fn add(a: C, b: C) -> C {
    (a.0 + b.0, a.1 + b.1)
}

fn mul(a: C, b: C) -> C {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

/// Amplitudes over the time bins. `x_basis` selects the second basis.
pub fn oracle_state(d: usize, x_basis: bool, symbol: usize) -> Vec<C> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    if d == 2 {
        let second = match (x_basis, symbol) {
            (false, 0) => (h, 0.0),
            (false, _) => (-h, 0.0),
            (true, 0) => (0.0, h),
            (true, _) => (0.0, -h),
        };
        return vec![(h, 0.0), second];
    }
    let pair = symbol / 2;
    let (a, b) = if x_basis {
        (pair, pair + 2)
    } else {
        (2 * pair, 2 * pair + 1)
    };
    let sign = if symbol % 2 == 1 { -1.0 } else { 1.0 };
    let mut v = vec![(0.0, 0.0); 4];
    v[a] = (h, 0.0);
    v[b] = (sign * h, 0.0);
    v
}

/// Path difference in bins and long-arm phase of each receiver arm.
pub fn oracle_arm(d: usize, x_arm: bool) -> (usize, f64) {
    match (d, x_arm) {
        (4, true) => (2, 0.0),
        (2, true) => (1, std::f64::consts::FRAC_PI_2),
        _ => (1, 0.0),
    }
}

/// Click probability for each `(port, output bin)`.
pub fn oracle_propagate(state: &[C], delay: usize, phase: f64) -> BTreeMap<(u8, usize), f64> {
    let mut amp: BTreeMap<(u8, usize), C> = BTreeMap::new();
    let long_phase = (phase.cos(), phase.sin());
    for (bin, &c) in state.iter().enumerate() {
        for long in [false, true] {
            for port in 0..2u8 {
                let mut a = mul(c, (0.5, 0.0));
                let mut out = bin;
                if long {
                    a = mul(a, long_phase);
                    if port == 1 {
                        a = (-a.0, -a.1);
                    }
                    out += delay;
                }
                let e = amp.entry((port, out)).or_insert((0.0, 0.0));
                *e = add(*e, a);
            }
        }
    }
    amp.into_iter()
        .map(|(k, a)| (k, a.0 * a.0 + a.1 * a.1))
        .collect()
}
