//! JSON scenario configuration.
//!
//! Every section and field is optional and falls back to the documented
//! default; unknown keys are rejected so typos never pass silently. Lengths
//! are in metres, momenta in units of `ħk0`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use mirrorwave_core::emission::{EmissionConfig, QuadratureRule};
use mirrorwave_core::interferometer::{equispaced_phases, Acceptance, BeamAveraging, BraggSplitter, Detector, Scenario};
use mirrorwave_core::wavepacket::{MomentumTable, PhaseModel, Profile, WavepacketSpec};
use mirrorwave_core::{Complex64, ExperimentParams, MomentumGrid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub experiment: ExperimentSection,
    pub mirror: MirrorSection,
    pub grid: GridSection,
    pub packet: PacketSection,
    pub emission: EmissionSection,
    pub splitter: SplitterSection,
    pub detector: DetectorSection,
    pub phases: PhaseSection,
    /// Mean distances of `scan-distance` [m], strictly increasing.
    pub distances_m: Vec<f64>,
    pub averaging: AveragingSection,
    pub fit: FitSection,
    /// Replace model counts by Poisson draws before fitting.
    pub shot_noise: bool,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentSection::default(),
            mirror: MirrorSection::default(),
            grid: GridSection::default(),
            packet: PacketSection::default(),
            emission: EmissionSection::default(),
            splitter: SplitterSection::default(),
            detector: DetectorSection::default(),
            phases: PhaseSection::default(),
            distances_m: (1..=20).map(|i| i as f64 * 1e-6).collect(),
            averaging: AveragingSection::default(),
            fit: FitSection::default(),
            shot_noise: false,
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub wavelength_m: f64,
    pub mass_kg: f64,
    pub v_parallel_m_s: f64,
    /// Emission region to Bragg grating.
    pub l_grating_m: f64,
    /// Emission region to detector.
    pub l_detector_m: f64,
    pub beam_width_m: f64,
    pub mean_distance_m: f64,
    pub linewidth_rad_s: f64,
    pub speed_of_light_m_s: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let p = ExperimentParams::default();
        Self {
            wavelength_m: p.wavelength,
            mass_kg: p.mass,
            v_parallel_m_s: p.v_parallel,
            l_grating_m: p.l_grating,
            l_detector_m: p.l_detector,
            beam_width_m: p.beam_width,
            mean_distance_m: p.mean_distance,
            linewidth_rad_s: p.linewidth,
            speed_of_light_m_s: p.speed_of_light,
        }
    }
}

/// Fresnel coefficients as `[re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MirrorSection {
    pub r_s: [f64; 2],
    pub r_p: [f64; 2],
}

impl Default for MirrorSection {
    fn default() -> Self {
        Self { r_s: [-1.0, 0.0], r_p: [1.0, 0.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n_points: usize,
    pub p_max_hbar_k0: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n_points: 4096, p_max_hbar_k0: 8.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSection {
    Gaussian { sigma_p_hbar_k0: f64 },
    Measured { momenta_hbar_k0: Vec<f64>, density: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseSectionModel {
    Flat,
    /// `φf(p) = beta p²`.
    Quadratic { beta_rad: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacketSection {
    pub profile: ProfileSection,
    pub free_phase: PhaseSectionModel,
    pub center_momentum_hbar_k0: f64,
}

impl Default for PacketSection {
    fn default() -> Self {
        Self {
            profile: ProfileSection::Gaussian { sigma_p_hbar_k0: 0.2 },
            free_phase: PhaseSectionModel::Flat,
            center_momentum_hbar_k0: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleName {
    GaussLegendre,
    Resolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmissionSection {
    pub n_u: usize,
    pub rule: RuleName,
}

impl Default for EmissionSection {
    fn default() -> Self {
        Self { n_u: 64, rule: RuleName::Resolved }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceTable {
    /// Momentum of the upper state of a grating pair.
    pub momenta_hbar_k0: Vec<f64>,
    pub reflectivity: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitterSection {
    /// Grating wavevector in units of `k0`.
    pub k_b_over_k0: f64,
    /// `Ωτ`.
    pub pulse_area_rad: f64,
    /// FWHM of `|r(p)|²` used to fix `τ`.
    pub acceptance_fwhm_hbar_k0: f64,
    /// Overrides the Rabi splitting ratios when present.
    pub acceptance_table: Option<AcceptanceTable>,
}

impl Default for SplitterSection {
    fn default() -> Self {
        Self { k_b_over_k0: 1.0, pulse_area_rad: PI / 2.0, acceptance_fwhm_hbar_k0: 1.0, acceptance_table: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub bin_width_hbar_k0: f64,
    pub atoms_per_run: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        let d = Detector::default();
        Self { bin_width_hbar_k0: d.bin_width, atoms_per_run: d.atoms_per_run }
    }
}

/// Interferometer phases: an explicit list, or `count` equispaced values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseSection {
    pub count: usize,
    pub values_rad: Option<Vec<f64>>,
}

impl Default for PhaseSection {
    fn default() -> Self {
        Self { count: 12, values_rad: None }
    }
}

impl PhaseSection {
    pub fn list(&self) -> Vec<f64> {
        self.values_rad.clone().unwrap_or_else(|| equispaced_phases(self.count))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AveragingSection {
    pub samples: usize,
    /// `[momentum offset, weight]` pairs.
    pub momentum_classes: Vec<[f64; 2]>,
}

impl Default for AveragingSection {
    fn default() -> Self {
        Self { samples: BeamAveraging::default().samples, momentum_classes: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightingName {
    None,
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub weighting: WeightingName,
    /// Bins with a smaller mean count get no fit.
    pub count_floor: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        Self { weighting: WeightingName::None, count_floor: 1.0 }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// SHA-256 of the canonical JSON form. The output directory is left out:
    /// where files go does not change what they contain.
    pub fn hash(&self) -> String {
        let content = Self { output_dir: PathBuf::new(), ..self.clone() };
        let compact = serde_json::to_string(&content).expect("config serialises");
        hex::encode(Sha256::digest(compact.as_bytes()))
    }

    pub fn params(&self) -> ExperimentParams {
        let e = &self.experiment;
        ExperimentParams {
            wavelength: e.wavelength_m,
            mass: e.mass_kg,
            v_parallel: e.v_parallel_m_s,
            l_grating: e.l_grating_m,
            l_detector: e.l_detector_m,
            beam_width: e.beam_width_m,
            mean_distance: e.mean_distance_m,
            r_s: complex(self.mirror.r_s),
            r_p: complex(self.mirror.r_p),
            linewidth: e.linewidth_rad_s,
            speed_of_light: e.speed_of_light_m_s,
        }
    }

    pub fn weighting(&self) -> mirrorwave_core::analysis::Weighting {
        match self.fit.weighting {
            WeightingName::None => mirrorwave_core::analysis::Weighting::None,
            WeightingName::Poisson => mirrorwave_core::analysis::Weighting::Poisson,
        }
    }

    /// Builds and validates the full scenario.
    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let params = self.params();
        params.validate()?;
        let grid = MomentumGrid::new(self.grid.n_points, self.grid.p_max_hbar_k0, params.k0())?;
        let profile = match &self.packet.profile {
            ProfileSection::Gaussian { sigma_p_hbar_k0 } => Profile::Gaussian { sigma_p: *sigma_p_hbar_k0 },
            ProfileSection::Measured { momenta_hbar_k0, density } => {
                Profile::Measured(MomentumTable::new(momenta_hbar_k0.clone(), density.clone())?)
            }
        };
        let phase = match self.packet.free_phase {
            PhaseSectionModel::Flat => PhaseModel::Flat,
            PhaseSectionModel::Quadratic { beta_rad } => PhaseModel::Quadratic { beta: beta_rad },
        };
        let packet = WavepacketSpec {
            profile,
            distance: params.mean_distance,
            phase,
            center_momentum: self.packet.center_momentum_hbar_k0,
        };
        let emission = EmissionConfig {
            r_s: params.r_s,
            r_p: params.r_p,
            n_u: self.emission.n_u,
            rule: match self.emission.rule {
                RuleName::GaussLegendre => QuadratureRule::GaussLegendre,
                RuleName::Resolved => QuadratureRule::Resolved,
            },
        };
        let sp = &self.splitter;
        let mut splitter =
            BraggSplitter::calibrated(sp.k_b_over_k0 * params.k0(), sp.pulse_area_rad, sp.acceptance_fwhm_hbar_k0, &params)?;
        if let Some(table) = &sp.acceptance_table {
            splitter.acceptance =
                Acceptance::Tabulated { momenta: table.momenta_hbar_k0.clone(), reflectivity: table.reflectivity.clone() };
        }
        let detector = Detector { bin_width: self.detector.bin_width_hbar_k0, atoms_per_run: self.detector.atoms_per_run };
        let averaging = BeamAveraging {
            samples: self.averaging.samples,
            momentum_classes: self.averaging.momentum_classes.iter().map(|&[q, w]| (q, w)).collect(),
        };
        if self.fit.count_floor.is_nan() || self.fit.count_floor < 0.0 {
            return Err(CliError::Config(format!("fit.count_floor must be >= 0, got {}", self.fit.count_floor)));
        }
        let scenario =
            Scenario { params, grid, packet, emission, splitter, detector, phases: self.phases.list(), averaging };
        scenario.validate()?;
        Ok(scenario)
    }
}

fn complex([re, im]: [f64; 2]) -> Complex64 {
    Complex64::new(re, im)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ScenarioConfig::default();
        let back = ScenarioConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_eq!(ScenarioConfig::from_json("{}").unwrap(), c);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ScenarioConfig::from_json(r#"{"grid": {"n_pts": 10}}"#).unwrap_err();
        assert!(err.to_string().contains("n_pts"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn default_scenario_is_valid() {
        let s = ScenarioConfig::default().scenario().unwrap();
        assert_eq!(s.phases.len(), 12);
        assert!((s.splitter.tau - 27.4e-6).abs() < 0.1e-6);
    }

    #[test]
    fn hash_tracks_content() {
        let mut c = ScenarioConfig::default();
        let h = c.hash();
        c.output_dir = PathBuf::from("elsewhere");
        assert_eq!(c.hash(), h);
        c.seed = 1;
        assert_ne!(c.hash(), h);
    }
}
