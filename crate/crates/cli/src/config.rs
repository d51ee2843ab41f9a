//! Run configuration files.
//!
//! Configurations are TOML. Frequencies, rates and detunings are given
//! either as ν = ω/2π in Hz (`*_hz`) or as a multiple of ω_b
//! (`*_over_omega_b`); phases as multiples of π. Powers are in mW,
//! temperatures in K, fields in T and the sphere radius in μm.

use std::f64::consts::TAU;
use std::path::Path;

use magsqueeze::params::{DriveCalibration, Drive, MagnonDetuning, PhysicalConstants, PhysicalParams};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Physical parameters as written in a configuration file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub omega_b_hz: Option<f64>,
    pub omega_a_hz: Option<f64>,
    pub omega_m_hz: Option<f64>,

    pub kappa_a_hz: Option<f64>,
    pub kappa_a_over_omega_b: Option<f64>,
    pub kappa_1_hz: Option<f64>,
    pub kappa_1_over_omega_b: Option<f64>,
    pub kappa_2_hz: Option<f64>,
    pub kappa_2_over_omega_b: Option<f64>,
    pub kappa_m_hz: Option<f64>,
    pub kappa_m_over_omega_b: Option<f64>,
    pub gamma_hz: Option<f64>,
    pub gamma_over_omega_b: Option<f64>,
    pub g_hz: Option<f64>,
    pub g_over_omega_b: Option<f64>,
    pub g0_hz: Option<f64>,

    pub delta_a_hz: Option<f64>,
    pub delta_a_over_omega_b: Option<f64>,
    /// Effective magnon detuning Δ̃_m.
    pub delta_m_hz: Option<f64>,
    pub delta_m_over_omega_b: Option<f64>,
    /// Bare magnon detuning Δ_m; Δ̃_m is then solved self-consistently.
    pub delta_m_bare_hz: Option<f64>,
    pub delta_m_bare_over_omega_b: Option<f64>,
    pub bias_field_minus_demag_t: Option<f64>,

    pub drive_power_mw: Option<f64>,
    pub drive_field_t: Option<f64>,
    #[serde(rename = "G_direct_hz")]
    pub g_direct_hz: Option<f64>,
    #[serde(rename = "G_direct_over_omega_b")]
    pub g_direct_over_omega_b: Option<f64>,
    #[serde(rename = "G_direct_phase_over_pi")]
    pub g_direct_phase_over_pi: Option<f64>,

    pub temperature_k: Option<f64>,
    pub sphere_radius_um: Option<f64>,
    pub kerr_hz: Option<f64>,
    pub calibration_power_mw: Option<f64>,
    pub calibration_field_t: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub omega_min_over_omega_b: Option<f64>,
    pub omega_max_over_omega_b: Option<f64>,
    pub n_omega: Option<usize>,
    pub phi_min_over_pi: Option<f64>,
    pub phi_max_over_pi: Option<f64>,
    pub n_phi: Option<usize>,
    /// Phases of the `spectrum` command.
    pub phases_over_pi: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    OmegaPhi,
    Detuning,
    Kappa,
    Temperature,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub kind: Option<SweepKind>,
    /// Fixed phase of the detuning and κ_a sweeps.
    pub phi_over_pi: Option<f64>,
    pub delta_a_min_over_omega_b: Option<f64>,
    pub delta_a_max_over_omega_b: Option<f64>,
    pub n_delta_a: Option<usize>,
    pub kappa_a_over_omega_b: Option<Vec<f64>>,
    pub temperatures_k: Option<Vec<f64>>,
    pub global_phi: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    pub power_min_mw: Option<f64>,
    pub power_max_mw: Option<f64>,
    pub temperature_min_k: Option<f64>,
    pub temperature_max_k: Option<f64>,
    /// ω points of the squeezing search before refinement.
    pub n_omega: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub seed: Option<u64>,
    pub mc_runs: Option<usize>,
    pub mc_segments: Option<usize>,
    pub mc_segment_periods: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub threshold: ThresholdConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

/// Parses and validates configuration text, applying defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    if text.trim().is_empty() {
        return Err(config_error("parse error at line 1, column 1: empty configuration"));
    }
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let msg = e.message().trim().to_string();
        match e.span() {
            Some(span) => {
                let (line, col) = line_col(text, span.start);
                config_error(format!("parse error at line {line}, column {col}: {msg}"))
            }
            None => config_error(format!("parse error: {msg}")),
        }
    })?;
    cfg.apply_defaults();
    cfg.physical_params()?;
    cfg.check_options()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<(RunConfig, Vec<u8>), CliError> {
    let bytes = std::fs::read(path).map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| config_error(format!("{} is not valid UTF-8", path.display())))?;
    Ok((parse_config(text)?, bytes))
}

fn exclusive<'a>(items: &[(&'a str, bool)]) -> Result<Option<&'a str>, CliError> {
    let given: Vec<&str> = items.iter().filter(|(_, set)| *set).map(|(n, _)| *n).collect();
    match given.len() {
        0 => Ok(None),
        1 => Ok(Some(given[0])),
        _ => Err(config_error(format!("conflicting keys: {} (give exactly one)", given.join(", ")))),
    }
}

/// A rate given in Hz or as a multiple of ω_b, converted to rad/s.
fn rate(name: &str, hz: Option<f64>, rel: Option<f64>, omega_b: f64) -> Result<Option<f64>, CliError> {
    match (hz, rel) {
        (Some(_), Some(_)) => Err(config_error(format!(
            "conflicting keys: {name}_hz, {name}_over_omega_b (give exactly one)"
        ))),
        (Some(v), None) => Ok(Some(TAU * v)),
        (None, Some(v)) => Ok(Some(v * omega_b)),
        (None, None) => Ok(None),
    }
}

fn required(name: &str, v: Option<f64>) -> Result<f64, CliError> {
    v.ok_or_else(|| config_error(format!("missing key: {name}_hz or {name}_over_omega_b")))
}

impl RunConfig {
    fn apply_defaults(&mut self) {
        let s = &mut self.system;
        s.omega_a_hz.get_or_insert(10e9);
        s.sphere_radius_um.get_or_insert(125.0);
        s.kerr_hz.get_or_insert(0.0);
        s.calibration_power_mw.get_or_insert(100.0);
        s.calibration_field_t.get_or_insert(1.3e-4);
        let g = &mut self.grid;
        g.omega_min_over_omega_b.get_or_insert(0.5);
        g.omega_max_over_omega_b.get_or_insert(1.5);
        g.n_omega.get_or_insert(201);
        g.phi_min_over_pi.get_or_insert(0.0);
        g.phi_max_over_pi.get_or_insert(1.0);
        g.n_phi.get_or_insert(201);
        g.phases_over_pi.get_or_insert_with(|| vec![0.3, 0.6, 0.9]);
        let w = &mut self.sweep;
        w.kind.get_or_insert(SweepKind::OmegaPhi);
        w.phi_over_pi.get_or_insert(0.3);
        w.delta_a_min_over_omega_b.get_or_insert(-1.5);
        w.delta_a_max_over_omega_b.get_or_insert(1.5);
        w.n_delta_a.get_or_insert(121);
        w.kappa_a_over_omega_b.get_or_insert_with(|| vec![0.2, 0.5, 1.0]);
        w.temperatures_k.get_or_insert_with(|| vec![0.02, 0.2, 0.5]);
        w.global_phi.get_or_insert(false);
        let t = &mut self.threshold;
        t.power_min_mw.get_or_insert(10.0);
        t.power_max_mw.get_or_insert(2000.0);
        t.temperature_min_k.get_or_insert(0.02);
        t.temperature_max_k.get_or_insert(2.0);
        t.n_omega.get_or_insert(401);
        let v = &mut self.verify;
        v.seed.get_or_insert(1);
        v.mc_runs.get_or_insert(2);
        v.mc_segments.get_or_insert(96);
        v.mc_segment_periods.get_or_insert(2000.0);
    }

    fn check_options(&self) -> Result<(), CliError> {
        let g = &self.grid;
        for (name, n) in [("grid.n_omega", g.n_omega), ("grid.n_phi", g.n_phi), ("sweep.n_delta_a", self.sweep.n_delta_a)] {
            if n == Some(0) {
                return Err(config_error(format!("{name} must be at least 1")));
            }
        }
        if self.threshold.n_omega.is_some_and(|n| n < 3) {
            return Err(config_error("threshold.n_omega must be at least 3"));
        }
        let v = &self.verify;
        if v.mc_runs == Some(0) || v.mc_segments.is_some_and(|n| n < 2) {
            return Err(config_error("verify needs mc_runs >= 1 and mc_segments >= 2"));
        }
        Ok(())
    }

    /// Echo of the configuration with defaults applied. Parsing the echo
    /// gives back an equal configuration.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn omega_b(&self) -> Result<f64, CliError> {
        let hz = self
            .system
            .omega_b_hz
            .ok_or_else(|| config_error("missing key: omega_b_hz"))?;
        if !(hz > 0.0 && hz.is_finite()) {
            return Err(config_error(format!("omega_b_hz must be positive, got {hz}")));
        }
        Ok(TAU * hz)
    }

    /// Converts to library parameters (rad/s, W, m, K, T).
    pub fn physical_params(&self) -> Result<PhysicalParams<f64>, CliError> {
        let s = &self.system;
        let wb = self.omega_b()?;

        let kappa_a = rate("kappa_a", s.kappa_a_hz, s.kappa_a_over_omega_b, wb)?;
        let kappa_1 = rate("kappa_1", s.kappa_1_hz, s.kappa_1_over_omega_b, wb)?;
        let kappa_2 = rate("kappa_2", s.kappa_2_hz, s.kappa_2_over_omega_b, wb)?;
        let (kappa_1, kappa_2) = match (kappa_a, kappa_1, kappa_2) {
            (Some(a), Some(k1), Some(k2)) => {
                if (k1 + k2 - a).abs() > 1e-9 * a.abs().max(f64::MIN_POSITIVE) {
                    return Err(config_error(format!(
                        "kappa_1 + kappa_2 = {:.6} omega_b differs from kappa_a = {:.6} omega_b",
                        (k1 + k2) / wb,
                        a / wb
                    )));
                }
                (k1, k2)
            }
            (_, Some(k1), Some(k2)) => (k1, k2),
            (Some(a), Some(k1), None) => (k1, a - k1),
            (Some(a), None, Some(k2)) => (a - k2, k2),
            _ => return Err(config_error("cavity linewidth needs two of kappa_a, kappa_1, kappa_2")),
        };

        let magnon_keys = [
            ("delta_m", s.delta_m_hz.is_some() || s.delta_m_over_omega_b.is_some()),
            ("delta_m_bare", s.delta_m_bare_hz.is_some() || s.delta_m_bare_over_omega_b.is_some()),
            ("bias_field_minus_demag_t", s.bias_field_minus_demag_t.is_some()),
        ];
        let magnon_detuning = match exclusive(&magnon_keys)? {
            Some("delta_m") => MagnonDetuning::Effective(required(
                "delta_m",
                rate("delta_m", s.delta_m_hz, s.delta_m_over_omega_b, wb)?,
            )?),
            Some("delta_m_bare") => MagnonDetuning::Bare(required(
                "delta_m_bare",
                rate("delta_m_bare", s.delta_m_bare_hz, s.delta_m_bare_over_omega_b, wb)?,
            )?),
            Some(_) => MagnonDetuning::BiasField(s.bias_field_minus_demag_t.unwrap_or_default()),
            None => return Err(config_error("missing magnon detuning: delta_m, delta_m_bare or bias_field_minus_demag_t")),
        };

        let direct = s.g_direct_hz.is_some() || s.g_direct_over_omega_b.is_some();
        let drive_keys = [
            ("drive_power_mw", s.drive_power_mw.is_some()),
            ("drive_field_t", s.drive_field_t.is_some()),
            ("G_direct", direct),
        ];
        let drive = match exclusive(&drive_keys)? {
            Some("drive_power_mw") => Drive::Power(s.drive_power_mw.unwrap_or_default() * 1e-3),
            Some("drive_field_t") => Drive::Field(s.drive_field_t.unwrap_or_default()),
            Some(_) => {
                let magnitude = match (s.g_direct_hz, s.g_direct_over_omega_b) {
                    (Some(_), Some(_)) => {
                        return Err(config_error(
                            "conflicting keys: G_direct_hz, G_direct_over_omega_b (give exactly one)",
                        ))
                    }
                    (Some(v), None) => TAU * v,
                    (None, Some(v)) => v * wb,
                    (None, None) => unreachable!(),
                };
                let phase = s.g_direct_phase_over_pi.unwrap_or(0.0) * std::f64::consts::PI;
                Drive::Coupling(Complex::from_polar(magnitude, phase))
            }
            None => return Err(config_error("missing drive: drive_power_mw, drive_field_t or G_direct")),
        };
        if s.g_direct_phase_over_pi.is_some() && !direct {
            return Err(config_error("G_direct_phase_over_pi needs G_direct_hz or G_direct_over_omega_b"));
        }
        if !direct && s.g0_hz.is_none() {
            return Err(config_error("missing key: g0_hz (needed by the drive chain)"));
        }

        let params = PhysicalParams {
            omega_a: TAU * s.omega_a_hz.unwrap_or(10e9),
            omega_b: wb,
            omega_m: s.omega_m_hz.map(|v| TAU * v),
            kappa_1,
            kappa_2,
            kappa_m: required("kappa_m", rate("kappa_m", s.kappa_m_hz, s.kappa_m_over_omega_b, wb)?)?,
            gamma: required("gamma", rate("gamma", s.gamma_hz, s.gamma_over_omega_b, wb)?)?,
            g: required("g", rate("g", s.g_hz, s.g_over_omega_b, wb)?)?,
            g0: TAU * s.g0_hz.unwrap_or(0.0),
            sphere_radius: s.sphere_radius_um.unwrap_or(125.0) * 1e-6,
            drive,
            temperature: s
                .temperature_k
                .ok_or_else(|| config_error("missing key: temperature_k"))?,
            kerr: TAU * s.kerr_hz.unwrap_or(0.0),
            delta_a: required("delta_a", rate("delta_a", s.delta_a_hz, s.delta_a_over_omega_b, wb)?)?,
            magnon_detuning,
            calibration: DriveCalibration {
                power_ref: s.calibration_power_mw.unwrap_or(100.0) * 1e-3,
                field_ref: s.calibration_field_t.unwrap_or(1.3e-4),
            },
            constants: PhysicalConstants::yig(),
        };
        params.validate().map_err(|e| config_error(e.to_string()))?;
        Ok(params)
    }

    pub fn omega_grid(&self, n: Option<usize>) -> Result<Vec<f64>, CliError> {
        let wb = self.omega_b()?;
        let g = &self.grid;
        Ok(magsqueeze::spectra::linspace(
            g.omega_min_over_omega_b.unwrap_or(0.5) * wb,
            g.omega_max_over_omega_b.unwrap_or(1.5) * wb,
            n.or(g.n_omega).unwrap_or(201),
        ))
    }

    pub fn phi_grid(&self, n: Option<usize>) -> Vec<f64> {
        let g = &self.grid;
        let pi = std::f64::consts::PI;
        magsqueeze::spectra::linspace(
            g.phi_min_over_pi.unwrap_or(0.0) * pi,
            g.phi_max_over_pi.unwrap_or(1.0) * pi,
            n.or(g.n_phi).unwrap_or(201),
        )
    }
}
