use hdqkd_core::channel::{
    detection_prob, expected_tallies, Intensity, IntensitySettings, LinkParams,
};
use hdqkd_core::montecarlo::{Simulator, TrialConfig};
use hdqkd_core::{Basis, Dimension};

fn z_scores(dim: Dimension, length: f64, seed: u64, states: u64) -> Vec<(String, f64)> {
    let s = IntensitySettings {
        mu: 0.5,
        nu: 0.18,
        p_mu: 0.6,
        p_x_alice: 0.5,
    };
    let link = LinkParams::lab(dim, length);
    let r = Simulator::new(TrialConfig::new(seed, states, s, link, dim).unwrap())
        .unwrap()
        .run();
    let mut out = Vec::new();
    for k in Intensity::ALL {
        let q = detection_prob(s.mean(k), &link, dim);
        let trials: u64 = r.counts.matched.iter().map(|b| b[k.index()]).sum();
        let se = (q * (1.0 - q) / trials as f64).sqrt();
        out.push((
            format!("{dim}D {length} km Q_{k}"),
            (r.gains[k.index()] - q) / se,
        ));
    }
    let expect = expected_tallies(&s, &link, dim, 1.0).unwrap();
    for (b, emp) in [(Basis::Z, r.qber_z), (Basis::X, r.qber_x)] {
        let e = expect.qber(b);
        let n = r.tallies.basis_total(b).n;
        out.push((
            format!("{dim}D {length} km QBER_{b}"),
            (emp - e) / (e * (1.0 - e) / n).sqrt(),
        ));
    }
    out
}

#[test]
fn gains_and_qbers_within_four_sigma() {
    let mut all = Vec::new();
    for dim in [Dimension::Four, Dimension::Two] {
        for (i, length) in [50.0, 100.0, 150.0].into_iter().enumerate() {
            all.extend(z_scores(dim, length, 100 + i as u64, 3_000_000));
        }
    }
    for (name, z) in &all {
        assert!(z.abs() <= 4.0, "{name}: z = {z:.2}");
    }
    // no systematic offset across the grid
    let mean = all.iter().map(|(_, z)| z).sum::<f64>() / all.len() as f64;
    assert!(
        mean.abs() * (all.len() as f64).sqrt() <= 4.0,
        "mean z {mean:.2}"
    );
}

#[test]
fn decoy_gain_unbiased_over_seeds() {
    let zs: Vec<f64> = (0..8)
        .map(|seed| {
            z_scores(Dimension::Four, 100.0, 500 + seed, 2_000_000)
                .into_iter()
                .find(|(n, _)| n.ends_with("Q_decoy"))
                .unwrap()
                .1
        })
        .collect();
    let mean = zs.iter().sum::<f64>() / zs.len() as f64;
    assert!(mean.abs() * (zs.len() as f64).sqrt() <= 4.0, "{zs:?}");
}
