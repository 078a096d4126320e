//! Distance sweeps and their CSV form.

use std::fmt::Write as _;

use hdqkd_core::channel::IntensitySettings;
use hdqkd_core::finite_key::analytic_key_rate;
use hdqkd_core::optimizer::optimize;
use hdqkd_core::Dimension;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::parallel::map_ordered;
use crate::AppError;

pub const CSV_VERSION_LINE: &str = "# hdqkd-sweep v1";
pub const CSV_COLUMNS: [&str; 11] = [
    "distance_km",
    "dimension",
    "rep_rate_hz",
    "mu",
    "nu",
    "p_mu",
    "p_x_alice",
    "qber_z",
    "phi_z",
    "ell_bits",
    "skr_bps",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub distance_km: f64,
    pub dimension: Dimension,
    pub rep_rate_hz: f64,
    pub settings: IntensitySettings,
    pub qber_z: f64,
    pub phi_z: f64,
    pub ell_bits: u64,
    pub skr_bps: f64,
}

/// `from, from + step, ...` up to and including `to`.
pub fn distances(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|i| from + i as f64 * step).collect()
}

/// Key rate at one distance, optionally with optimized parameters.
pub fn sweep_point(
    cfg: &RunConfig,
    dim: Dimension,
    distance_km: f64,
    optimized: bool,
) -> Result<SweepRow, AppError> {
    let link = cfg.link.params(dim, distance_km);
    let settings = if optimized {
        let o = &cfg.optimizer;
        optimize(&o.search, &link, &cfg.security, dim, o.budget, &o.options())?.best
    } else {
        cfg.settings
    };
    let r = analytic_key_rate(&settings, &link, &cfg.security, dim)?;
    Ok(SweepRow {
        distance_km,
        dimension: dim,
        rep_rate_hz: link.repetition_rate_hz,
        settings,
        qber_z: r.diagnostics.qber_z,
        phi_z: r.diagnostics.phi_z_up,
        ell_bits: r.ell_bits,
        skr_bps: r.skr_bps,
    })
}

/// Rows ordered by distance, then by dimension as listed in the config.
pub fn run_sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>, AppError> {
    let s = &cfg.sweep;
    let jobs: Vec<(f64, Dimension)> = distances(s.from_km, s.to_km, s.step_km)
        .into_iter()
        .flat_map(|d| cfg.sweep_dims().into_iter().map(move |dim| (d, dim)))
        .collect();
    map_ordered(&jobs, cfg.workers, |&(d, dim)| {
        sweep_point(cfg, dim, d, s.optimize)
    })
    .into_iter()
    .collect()
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(CSV_VERSION_LINE);
    out.push('\n');
    out.push_str(&CSV_COLUMNS.join(","));
    out.push('\n');
    for r in rows {
        let s = &r.settings;
        // `{}` on f64 prints the shortest round-trip form with '.'
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.distance_km,
            r.dimension.d(),
            r.rep_rate_hz,
            s.mu,
            s.nu,
            s.p_mu,
            s.p_x_alice,
            r.qber_z,
            r.phi_z,
            r.ell_bits,
            r.skr_bps
        )
        .expect("writing to a String");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_grid() {
        assert_eq!(distances(0.0, 250.0, 25.0).len(), 11);
        assert_eq!(distances(10.0, 20.0, 50.0), vec![10.0]);
        assert_eq!(distances(0.0, 0.3, 0.1).len(), 4);
    }

    #[test]
    fn csv_shape() {
        let mut cfg = RunConfig::default();
        cfg.sweep.from_km = 0.0;
        cfg.sweep.to_km = 100.0;
        cfg.sweep.step_km = 50.0;
        cfg.dims = Some(vec![Dimension::Two, Dimension::Four]);
        let rows = run_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 6);
        let csv = to_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_VERSION_LINE);
        assert_eq!(lines[1].split(',').count(), 11);
        assert!(lines[2].starts_with("0,2,625000000,"));
        assert!(!csv.contains('\r'));
        cfg.workers = 3;
        assert_eq!(to_csv(&run_sweep(&cfg).unwrap()), csv);
    }
}
