//! Run reports.

use magsqueeze::dynamics::StabilityReport;
use magsqueeze::params::OperatingPoint;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::output::FileEntry;

pub fn config_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilitySummary {
    /// `stable`, `marginal` or `unstable`.
    pub verdict: String,
    pub max_real_part_over_omega_b: f64,
    pub margin_over_omega_b: f64,
    /// Drift eigenvalues as (re, im) pairs in units of ω_b.
    pub eigenvalues_over_omega_b: Vec<[f64; 2]>,
}

impl StabilitySummary {
    pub fn new(report: &StabilityReport<f64>, omega_b: f64) -> Self {
        let verdict = if report.marginal {
            "marginal"
        } else if report.stable {
            "stable"
        } else {
            "unstable"
        };
        Self {
            verdict: verdict.into(),
            max_real_part_over_omega_b: report.max_real_part / omega_b,
            margin_over_omega_b: report.margin / omega_b,
            eigenvalues_over_omega_b: report
                .eigenvalues
                .iter()
                .map(|e| [e.re / omega_b, e.im / omega_b])
                .collect(),
        }
    }
}

/// Location and depth of the strongest squeezing found by a command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Headline {
    pub min_s: f64,
    pub min_s_db: f64,
    pub omega_over_omega_b: f64,
    pub phi_over_pi: f64,
}

impl Headline {
    pub fn new(min_s: f64, omega_over_omega_b: f64, phi_over_pi: f64) -> Self {
        Self {
            min_s,
            min_s_db: -10.0 * (min_s / 0.5).log10(),
            omega_over_omega_b,
            phi_over_pi,
        }
    }
}

/// Validity ratios of the linearization; `None` when G is given directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Validity {
    pub kerr_ratio: Option<f64>,
    pub low_excitation_ratio: Option<f64>,
    pub cooperativity: Option<f64>,
    pub coupling_over_omega_b: f64,
}

impl Validity {
    pub fn new(op: &OperatingPoint<f64>, kerr: f64, spin_s: f64) -> Self {
        Self {
            kerr_ratio: op.kerr_ratio(kerr).and_then(Result::ok),
            low_excitation_ratio: op.low_excitation_ratio(spin_s).and_then(Result::ok),
            cooperativity: op.cooperativity().ok(),
            coupling_over_omega_b: op.coupling.norm() / op.modes.omega_b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    /// SHA-256 of the configuration file bytes.
    pub config_hash: String,
    pub stability: Option<StabilitySummary>,
    pub headline: Option<Headline>,
    pub validity: Option<Validity>,
    pub files: Vec<FileEntry>,
    /// Command-specific results.
    pub details: serde_json::Value,
    /// Configuration echo with defaults applied.
    pub config: String,
    /// Human-readable summary, also printed to stdout.
    pub summary: Vec<String>,
}
