//! Monte Carlo averages and the analysis block reported with them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    check_estimation_condition, closed_loop_matrix, spectral_norm_a, EstimationVerdict, ModeRoots,
};
use crate::controller::{check_control_condition, ControlCondition, SpacingPolicy};
use crate::error::Result;
use crate::harness::config::{Mode, RunConfig};
use crate::platoon::{build_topology, ground_laplacian, VehicleId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub spectral_radius: f64,
    pub eigenvalue_moduli: Vec<f64>,
    pub per_mode: Vec<ModeRoots>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub norm_a: f64,
    pub estimation: EstimationVerdict,
    pub control: ControlCondition,
    pub spectrum: SpectrumSummary,
}

pub fn analyze(cfg: &RunConfig) -> Result<AnalysisReport> {
    let t = cfg.platoon.sampling_time();
    let norm_a = spectral_norm_a(t);
    let l_g = ground_laplacian(&build_topology(cfg.platoon.vehicles())?);
    let spectrum = closed_loop_matrix(&l_g, &cfg.gains, t)?;
    Ok(AnalysisReport {
        norm_a,
        estimation: check_estimation_condition(&cfg.bounds, cfg.beta, norm_a),
        control: check_control_condition(&l_g, &cfg.gains, t),
        spectrum: SpectrumSummary {
            spectral_radius: spectrum.spectral_radius,
            eigenvalue_moduli: spectrum.eigenvalue_moduli,
            per_mode: spectrum.per_mode,
        },
    })
}

/// Per-vehicle series indexed by `t - 1`.
pub type Series = BTreeMap<VehicleId, Vec<f64>>;

/// Averages over every run of a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub schema_version: u32,
    pub mode: Mode,
    pub runs: u64,
    pub horizon: u64,
    pub sampling_time: f64,
    /// Mean `|ŝ_i - s_i|`.
    pub eta_s: Series,
    /// Mean `|v̂_i - v_i|`.
    pub eta_v: Series,
    /// Mean `s_i - s_1`.
    pub zeta_s: Series,
    /// Mean `v_i - v_1`.
    pub zeta_v: Series,
    /// Mean over runs of the per-run crash count.
    pub crash_count: f64,
    pub crash_counts: Vec<u64>,
    /// Per run, first step some vehicle holds an attacked vehicle in `gamma`.
    pub detection_time: Vec<Option<u64>>,
    /// Per run, first step every vehicle holds all attacked vehicles in `gamma`.
    pub all_informed_time: Vec<Option<u64>>,
    /// `(t, vehicle)` cells with `‖x̂_i(t) - x_i(t)‖ > ρ(t)`, over all runs.
    pub domination_violations: u64,
    /// Detector 2 firings on vehicles that are not attacked.
    pub detector2_false_alarms: u64,
    /// Steps at which some vehicle held an unattacked vehicle in `gamma`.
    pub false_isolations: u64,
    pub analysis: AnalysisReport,
}

impl Metrics {
    pub fn vehicles(&self) -> usize {
        self.eta_s.len()
    }

    /// Per vehicle, the largest `|ζ_s(i,t) - Δ_{i,1}|` over the last `window` steps.
    pub fn terminal_spacing_error(&self, spacing: &SpacingPolicy, window: usize) -> BTreeMap<VehicleId, f64> {
        self.zeta_s
            .iter()
            .map(|(&i, series)| {
                let target = spacing.delta(i, VehicleId::LEADER);
                let start = series.len().saturating_sub(window);
                (i, series[start..].iter().map(|z| (z - target).abs()).fold(0.0, f64::max))
            })
            .collect()
    }

    /// Per vehicle, the largest `|ζ_v(i,t)|` over the last `window` steps.
    pub fn terminal_velocity_error(&self, window: usize) -> BTreeMap<VehicleId, f64> {
        self.zeta_v
            .iter()
            .map(|(&i, series)| {
                let start = series.len().saturating_sub(window);
                (i, series[start..].iter().map(|z| z.abs()).fold(0.0, f64::max))
            })
            .collect()
    }
}
