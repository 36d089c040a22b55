//! Scenario configuration: physical parameters, unit conversions, and the
//! on-disk config schema.
//!
//! All powers are held internally in watts. dB/dBm/dBW conversions happen
//! once, at config parsing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn dbw_to_watts(dbw: f64) -> f64 {
    10f64.powf(dbw / 10.0)
}

/// Path-loss exponents per link class.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct PathLossExponents {
    pub bs_ir: f64,
    pub bs_er: f64,
    pub bs_ris: f64,
    pub ris_ir: f64,
    pub ris_er: f64,
}

impl Default for PathLossExponents {
    fn default() -> Self {
        Self {
            bs_ir: 2.0,
            bs_er: 3.0,
            bs_ris: 3.0,
            ris_ir: 3.5,
            ris_er: 1.5,
        }
    }
}

/// A disk in the plane where receivers are dropped uniformly at random.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct DiskRegion {
    /// Center in meters.
    pub center: [f64; 2],
    /// Radius in meters.
    pub radius: f64,
}

/// How log2(1 + x) terms are handed to the conic backend.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum LogMode {
    /// Exponential-cone formulation, handled natively by the backend.
    #[default]
    Native,
    /// First-order linearization at the caller's SCA anchor.
    Minorant,
}

/// Iteration caps and solver settings, config-exposed.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct AlgorithmSettings {
    /// Outer (WSR) iteration cap for the beamforming algorithm.
    pub max_outer_wmmse: usize,
    /// Inner (WMMSE) iteration cap for the beamforming algorithm.
    pub max_inner_wmmse: usize,
    /// Iteration cap for the phase-optimization algorithm.
    pub max_phase_iters: usize,
    /// Outer iteration cap for the alternating-optimization loop.
    pub max_ao_iters: usize,
    /// Interior-point iteration cap per conic solve.
    pub solver_max_iters: u32,
    /// Primal feasibility tolerance for the conic solver.
    pub solver_feas_tol: f64,
    pub log_mode: LogMode,
    /// Power fraction shifted to energy precoders when the plain MRT
    /// initialization misses the energy constraint.
    pub energy_repair_fraction: f64,
}

impl Default for AlgorithmSettings {
    fn default() -> Self {
        Self {
            max_outer_wmmse: 100,
            max_inner_wmmse: 50,
            max_phase_iters: 50,
            max_ao_iters: 30,
            solver_max_iters: 200,
            solver_feas_tol: 1e-7,
            log_mode: LogMode::Native,
            energy_repair_fraction: 0.9,
        }
    }
}

/// Full scenario description. Construct via [`ScenarioConfig::default`],
/// [`ScenarioConfig::from_toml_str`], or field updates, then call
/// [`ScenarioConfig::validate`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Transmit antennas at the BS (N_t).
    pub num_tx_antennas: usize,
    /// Information receivers (K).
    pub num_irs: usize,
    /// Energy receivers (J).
    pub num_ers: usize,
    /// RIS reflecting elements (N).
    pub num_ris_elements: usize,
    /// Transmit power budget, watts.
    pub tx_power: f64,
    /// Sum harvested-energy threshold, watts.
    pub energy_threshold: f64,
    /// Energy conversion efficiency ζ in [0, 1].
    pub conversion_efficiency: f64,
    /// Noise power per IR, watts.
    pub noise_power: Vec<f64>,
    /// WSR weights per IR.
    pub ir_weights: Vec<f64>,
    /// BS position, meters.
    pub bs_position: [f64; 2],
    /// RIS position, meters.
    pub ris_position: [f64; 2],
    pub ir_region: DiskRegion,
    pub er_region: DiskRegion,
    /// Linear power gain at 1 m.
    pub path_loss_ref: f64,
    pub path_loss_exponents: PathLossExponents,
    /// Convergence tolerance ε for all iterative loops.
    pub convergence_tol: f64,
    /// Penalty constant C for the unit-modulus relaxation.
    pub penalty_constant: f64,
    pub rng_seed: u64,
    pub algorithm: AlgorithmSettings,
}

impl Default for ScenarioConfig {
    /// The default simulation scenario: N_t = 2, K = J = 2, N = 8,
    /// P_t = 10 dBW, σ² = −80 dBm, ζ = 0.5, L = −30 dB, ε = 10⁻³,
    /// exponents (2, 3, 3, 3.5, 1.5), ERs in a 0.1 m disk at (1, 0),
    /// IRs in a 1 m disk at (20, 0).
    fn default() -> Self {
        Self {
            num_tx_antennas: 2,
            num_irs: 2,
            num_ers: 2,
            num_ris_elements: 8,
            tx_power: dbw_to_watts(10.0),
            energy_threshold: 20e-6,
            conversion_efficiency: 0.5,
            noise_power: vec![dbm_to_watts(-80.0); 2],
            ir_weights: vec![1.0, 1.0],
            bs_position: [0.0, 0.0],
            ris_position: [1.0, 1.0],
            ir_region: DiskRegion {
                center: [20.0, 0.0],
                radius: 1.0,
            },
            er_region: DiskRegion {
                center: [1.0, 0.0],
                radius: 0.1,
            },
            path_loss_ref: db_to_linear(-30.0),
            path_loss_exponents: PathLossExponents::default(),
            convergence_tol: 1e-3,
            penalty_constant: 10.0,
            rng_seed: 1,
            algorithm: AlgorithmSettings::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_tx_antennas < 1 {
            return fail("num_tx_antennas must be >= 1".into());
        }
        if self.num_irs < 1 {
            return fail("num_irs must be >= 1".into());
        }
        if self.tx_power <= 0.0 {
            return fail(format!("tx_power must be > 0, got {}", self.tx_power));
        }
        if self.energy_threshold < 0.0 {
            return fail("energy_threshold must be >= 0".into());
        }
        if self.num_ers == 0 && self.energy_threshold > 0.0 {
            return fail("energy_threshold must be 0 when there are no ERs".into());
        }
        if !(0.0..=1.0).contains(&self.conversion_efficiency) {
            return fail("conversion_efficiency must lie in [0, 1]".into());
        }
        if self.noise_power.len() != self.num_irs {
            return fail(format!(
                "noise_power has {} entries for {} IRs",
                self.noise_power.len(),
                self.num_irs
            ));
        }
        if self.noise_power.iter().any(|&s| s <= 0.0) {
            return fail("all noise powers must be > 0".into());
        }
        if self.ir_weights.len() != self.num_irs {
            return fail(format!(
                "ir_weights has {} entries for {} IRs",
                self.ir_weights.len(),
                self.num_irs
            ));
        }
        if self.ir_weights.iter().any(|&u| u <= 0.0) {
            return fail("all IR weights must be > 0".into());
        }
        if self.path_loss_ref <= 0.0 {
            return fail("path_loss_ref must be > 0".into());
        }
        if self.ir_region.radius < 0.0 || self.er_region.radius < 0.0 {
            return fail("region radii must be >= 0".into());
        }
        if self.convergence_tol <= 0.0 {
            return fail("convergence_tol must be > 0".into());
        }
        if self.penalty_constant <= 0.0 {
            return fail("penalty_constant must be > 0".into());
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| Error::ConfigIo(e.to_string()))?;
        let cfg = file.into_config();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ConfigIo(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

/// On-disk schema. Every field is optional and defaults to the built-in
/// simulation scenario; powers are given in conventional units
/// (dBW / dBm / µW / dB) and converted to watts here.
///
/// ```toml
/// [system]
/// num_tx_antennas = 2      # N_t
/// num_irs = 2              # K
/// num_ers = 2              # J
/// num_ris_elements = 8     # N
///
/// [power]
/// tx_power_dbw = 10.0          # P_t, dBW
/// energy_threshold_uw = 20.0   # E_th, microwatts
/// conversion_efficiency = 0.5  # ζ
/// noise_dbm = -80.0            # σ_k², dBm (same for all IRs)
/// ir_weights = [1.0, 1.0]      # u_k
///
/// [geometry]
/// bs_position = [0.0, 0.0]     # meters
/// ris_position = [1.0, 1.0]
/// ir_center = [20.0, 0.0]
/// ir_radius = 1.0
/// er_center = [1.0, 0.0]
/// er_radius = 0.1
///
/// [path_loss]
/// ref_db = -30.0               # L at 1 m, dB
/// bs_ir = 2.0                  # exponents α per link class
/// bs_er = 3.0
/// bs_ris = 3.0
/// ris_ir = 3.5
/// ris_er = 1.5
///
/// [algorithm]
/// convergence_tol = 1e-3
/// penalty_constant = 10.0
/// rng_seed = 1
/// log_mode = "native"          # or "minorant"
/// ```
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    system: SystemSection,
    #[serde(default)]
    power: PowerSection,
    #[serde(default)]
    geometry: GeometrySection,
    #[serde(default)]
    path_loss: PathLossSection,
    #[serde(default)]
    algorithm: AlgorithmSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    num_tx_antennas: Option<usize>,
    num_irs: Option<usize>,
    num_ers: Option<usize>,
    num_ris_elements: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerSection {
    tx_power_dbw: Option<f64>,
    tx_power_watts: Option<f64>,
    energy_threshold_uw: Option<f64>,
    conversion_efficiency: Option<f64>,
    noise_dbm: Option<f64>,
    ir_weights: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometrySection {
    bs_position: Option<[f64; 2]>,
    ris_position: Option<[f64; 2]>,
    ir_center: Option<[f64; 2]>,
    ir_radius: Option<f64>,
    er_center: Option<[f64; 2]>,
    er_radius: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathLossSection {
    ref_db: Option<f64>,
    bs_ir: Option<f64>,
    bs_er: Option<f64>,
    bs_ris: Option<f64>,
    ris_ir: Option<f64>,
    ris_er: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlgorithmSection {
    convergence_tol: Option<f64>,
    penalty_constant: Option<f64>,
    rng_seed: Option<u64>,
    log_mode: Option<LogMode>,
    max_outer_wmmse: Option<usize>,
    max_inner_wmmse: Option<usize>,
    max_phase_iters: Option<usize>,
    max_ao_iters: Option<usize>,
    solver_max_iters: Option<u32>,
    solver_feas_tol: Option<f64>,
}

impl ConfigFile {
    fn into_config(self) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        let s = self.system;
        if let Some(v) = s.num_tx_antennas {
            cfg.num_tx_antennas = v;
        }
        if let Some(v) = s.num_irs {
            cfg.num_irs = v;
            cfg.noise_power = vec![cfg.noise_power[0]; v];
            cfg.ir_weights = vec![1.0; v];
        }
        if let Some(v) = s.num_ers {
            cfg.num_ers = v;
            if v == 0 {
                cfg.energy_threshold = 0.0;
            }
        }
        if let Some(v) = s.num_ris_elements {
            cfg.num_ris_elements = v;
        }
        let p = self.power;
        if let Some(v) = p.tx_power_dbw {
            cfg.tx_power = dbw_to_watts(v);
        }
        if let Some(v) = p.tx_power_watts {
            cfg.tx_power = v;
        }
        if let Some(v) = p.energy_threshold_uw {
            cfg.energy_threshold = v * 1e-6;
        }
        if let Some(v) = p.conversion_efficiency {
            cfg.conversion_efficiency = v;
        }
        if let Some(v) = p.noise_dbm {
            cfg.noise_power = vec![dbm_to_watts(v); cfg.num_irs];
        }
        if let Some(v) = p.ir_weights {
            cfg.ir_weights = v;
        }
        let g = self.geometry;
        if let Some(v) = g.bs_position {
            cfg.bs_position = v;
        }
        if let Some(v) = g.ris_position {
            cfg.ris_position = v;
        }
        if let Some(v) = g.ir_center {
            cfg.ir_region.center = v;
        }
        if let Some(v) = g.ir_radius {
            cfg.ir_region.radius = v;
        }
        if let Some(v) = g.er_center {
            cfg.er_region.center = v;
        }
        if let Some(v) = g.er_radius {
            cfg.er_region.radius = v;
        }
        let pl = self.path_loss;
        if let Some(v) = pl.ref_db {
            cfg.path_loss_ref = db_to_linear(v);
        }
        if let Some(v) = pl.bs_ir {
            cfg.path_loss_exponents.bs_ir = v;
        }
        if let Some(v) = pl.bs_er {
            cfg.path_loss_exponents.bs_er = v;
        }
        if let Some(v) = pl.bs_ris {
            cfg.path_loss_exponents.bs_ris = v;
        }
        if let Some(v) = pl.ris_ir {
            cfg.path_loss_exponents.ris_ir = v;
        }
        if let Some(v) = pl.ris_er {
            cfg.path_loss_exponents.ris_er = v;
        }
        let a = self.algorithm;
        if let Some(v) = a.convergence_tol {
            cfg.convergence_tol = v;
        }
        if let Some(v) = a.penalty_constant {
            cfg.penalty_constant = v;
        }
        if let Some(v) = a.rng_seed {
            cfg.rng_seed = v;
        }
        if let Some(v) = a.log_mode {
            cfg.algorithm.log_mode = v;
        }
        if let Some(v) = a.max_outer_wmmse {
            cfg.algorithm.max_outer_wmmse = v;
        }
        if let Some(v) = a.max_inner_wmmse {
            cfg.algorithm.max_inner_wmmse = v;
        }
        if let Some(v) = a.max_phase_iters {
            cfg.algorithm.max_phase_iters = v;
        }
        if let Some(v) = a.max_ao_iters {
            cfg.algorithm.max_ao_iters = v;
        }
        if let Some(v) = a.solver_max_iters {
            cfg.algorithm.solver_max_iters = v;
        }
        if let Some(v) = a.solver_feas_tol {
            cfg.algorithm.solver_feas_tol = v;
        }
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn unit_conversions() {
        assert!((dbm_to_watts(-80.0) - 1e-11).abs() < 1e-24);
        assert!((dbw_to_watts(10.0) - 10.0).abs() < 1e-12);
        assert!((db_to_linear(-30.0) - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn rejects_zero_noise() {
        let mut cfg = ScenarioConfig::default();
        cfg.noise_power[0] = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_energy_threshold_without_ers() {
        let mut cfg = ScenarioConfig::default();
        cfg.num_ers = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_roundtrip_with_overrides() {
        let cfg = ScenarioConfig::from_toml_str(
            r#"
            [system]
            num_irs = 3
            num_ris_elements = 4

            [power]
            tx_power_dbw = 0.0
            energy_threshold_uw = 5.0
            noise_dbm = -70.0

            [algorithm]
            rng_seed = 7
            log_mode = "minorant"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.num_irs, 3);
        assert_eq!(cfg.noise_power.len(), 3);
        assert_eq!(cfg.ir_weights.len(), 3);
        assert_eq!(cfg.num_ris_elements, 4);
        assert!((cfg.tx_power - 1.0).abs() < 1e-12);
        assert!((cfg.energy_threshold - 5e-6).abs() < 1e-18);
        assert_eq!(cfg.rng_seed, 7);
        assert_eq!(cfg.algorithm.log_mode, LogMode::Minorant);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ScenarioConfig::from_toml_str("[system]\nnum_antennas = 2\n").is_err());
    }
}
