//! JSON run configuration with command-line overrides.

use std::path::Path;

use hdqkd_core::channel::{frame_rate, IntensitySettings, LinkParams};
use hdqkd_core::finite_key::SecurityParams;
use hdqkd_core::optimizer::{OptimOptions, SearchSpace};
use hdqkd_core::Dimension;
use serde::{Deserialize, Serialize};

use crate::AppError;

/// Hardware description shared by every distance and dimension of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkConfig {
    pub attenuation_db_per_km: f64,
    pub rx_excess_loss_db: f64,
    pub detector_efficiency: f64,
    pub dark_rate_hz: f64,
    pub bin_width_s: f64,
    /// Derived from the bin width and dimension when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repetition_rate_hz: Option<f64>,
    pub misalignment: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub misalignment_x: Option<f64>,
}

impl Default for LinkConfig {
    fn default() -> Self {
        let lab = LinkParams::lab(Dimension::Four, 0.0);
        LinkConfig {
            attenuation_db_per_km: lab.attenuation_db_per_km,
            rx_excess_loss_db: lab.rx_excess_loss_db,
            detector_efficiency: lab.detector_efficiency,
            dark_rate_hz: lab.dark_rate_hz,
            bin_width_s: lab.bin_width_s,
            repetition_rate_hz: None,
            misalignment: lab.misalignment,
            misalignment_x: None,
        }
    }
}

impl LinkConfig {
    pub fn params(&self, dim: Dimension, length_km: f64) -> LinkParams {
        LinkParams {
            length_km,
            attenuation_db_per_km: self.attenuation_db_per_km,
            rx_excess_loss_db: self.rx_excess_loss_db,
            detector_efficiency: self.detector_efficiency,
            dark_rate_hz: self.dark_rate_hz,
            bin_width_s: self.bin_width_s,
            repetition_rate_hz: self
                .repetition_rate_hz
                .unwrap_or_else(|| frame_rate(dim, self.bin_width_s)),
            misalignment: self.misalignment,
            misalignment_x: self.misalignment_x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub states: u64,
    pub bookkeeping: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            states: 1_000_000,
            bookkeeping: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub from_km: f64,
    pub to_km: f64,
    pub step_km: f64,
    pub optimize: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            from_km: 0.0,
            to_km: 250.0,
            step_km: 25.0,
            optimize: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub budget: usize,
    pub grid: usize,
    pub max_iterations: usize,
    pub rel_tol: f64,
    pub search: SearchSpace,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let o = OptimOptions::default();
        OptimizerConfig {
            budget: 5000,
            grid: o.grid,
            max_iterations: o.max_iterations,
            rel_tol: o.rel_tol,
            search: SearchSpace::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn options(&self) -> OptimOptions {
        OptimOptions {
            grid: self.grid,
            max_iterations: self.max_iterations,
            rel_tol: self.rel_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dimension: Dimension,
    /// Dimensions swept by `sweep`; defaults to `[dimension]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<Dimension>>,
    pub length_km: f64,
    pub seed: u64,
    pub workers: usize,
    pub link: LinkConfig,
    pub settings: IntensitySettings,
    pub security: SecurityParams,
    pub simulation: SimulationConfig,
    pub sweep: SweepConfig,
    pub optimizer: OptimizerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dimension: Dimension::Four,
            dims: None,
            length_km: 200.0,
            seed: 1,
            workers: 1,
            link: LinkConfig::default(),
            settings: IntensitySettings {
                mu: 0.50,
                nu: 0.18,
                p_mu: 0.78,
                p_x_alice: 0.1,
            },
            security: SecurityParams::default(),
            simulation: SimulationConfig::default(),
            sweep: SweepConfig::default(),
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, AppError> {
        serde_json::from_str(text).map_err(|e| AppError::Config(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn link_params(&self) -> LinkParams {
        self.link.params(self.dimension, self.length_km)
    }

    pub fn sweep_dims(&self) -> Vec<Dimension> {
        self.dims.clone().unwrap_or_else(|| vec![self.dimension])
    }

    /// Rejects the configuration with a message naming the offending field.
    pub fn validate(&self) -> Result<(), AppError> {
        let cfg = |e: hdqkd_core::Error| AppError::Config(e.to_string());
        for dim in self.sweep_dims().into_iter().chain([self.dimension]) {
            self.link
                .params(dim, self.length_km)
                .validate()
                .map_err(cfg)?;
        }
        self.settings.validate().map_err(cfg)?;
        self.security.validate().map_err(cfg)?;
        self.optimizer.search.validate().map_err(cfg)?;
        if self.workers == 0 {
            return Err(AppError::Config("workers: must be >= 1".into()));
        }
        if self.simulation.states == 0 {
            return Err(AppError::Config("simulation.states: must be > 0".into()));
        }
        let s = &self.sweep;
        if !(s.from_km >= 0.0 && s.from_km <= s.to_km && s.to_km.is_finite()) {
            return Err(AppError::Config("sweep: need 0 <= from_km <= to_km".into()));
        }
        if !(s.step_km > 0.0) {
            return Err(AppError::Config("sweep.step_km: must be > 0".into()));
        }
        if self.optimizer.grid == 0 {
            return Err(AppError::Config("optimizer.grid: must be >= 1".into()));
        }
        if self.optimizer.budget < self.optimizer.options().grid_size() {
            return Err(AppError::Config(format!(
                "optimizer.budget: must be at least grid^4 = {}",
                self.optimizer.options().grid_size()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut c = RunConfig::default();
        c.dims = Some(vec![Dimension::Two, Dimension::Four]);
        c.link.misalignment_x = Some(0.02);
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let c = RunConfig::from_json(r#"{"length_km": 50, "link": {"rx_excess_loss_db": 1.5}}"#)
            .unwrap();
        assert_eq!(c.length_km, 50.0);
        assert_eq!(c.link.rx_excess_loss_db, 1.5);
        assert_eq!(c.link.detector_efficiency, 0.75);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_key_rejected() {
        let e = RunConfig::from_json(r#"{"lenght_km": 50}"#).unwrap_err();
        assert!(e.to_string().contains("lenght_km"));
    }

    #[test]
    fn field_level_messages() {
        let mut c = RunConfig::default();
        c.link.detector_efficiency = 1.5;
        assert!(c
            .validate()
            .unwrap_err()
            .to_string()
            .contains("detector_efficiency"));
        let mut c = RunConfig::default();
        c.settings.nu = 0.6;
        assert!(c.validate().unwrap_err().to_string().contains("nu < mu"));
    }

    #[test]
    fn repetition_rate_follows_dimension() {
        let c = LinkConfig::default();
        assert!((c.params(Dimension::Two, 0.0).repetition_rate_hz - 625e6).abs() < 1e-3);
        assert!((c.params(Dimension::Four, 0.0).repetition_rate_hz - 312.5e6).abs() < 1e-3);
    }
}
