//! Distributed acceleration law and its gain condition.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::platoon::{Topology, Vec2, VehicleId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlGains {
    /// Position gain, 1/s².
    pub g_s: f64,
    /// Velocity gain, 1/s.
    pub g_v: f64,
    /// Control start step per vehicle. Vehicles not listed start at 0.
    pub t_star: BTreeMap<VehicleId, u64>,
}

impl ControlGains {
    pub fn new(g_s: f64, g_v: f64) -> Result<Self> {
        let gains = ControlGains {
            g_s,
            g_v,
            t_star: BTreeMap::new(),
        };
        gains.validate()?;
        Ok(gains)
    }

    /// Same start step for every follower of an `vehicles`-long platoon.
    pub fn with_uniform_start(mut self, vehicles: usize, t_star: u64) -> Self {
        self.t_star = (2..=vehicles).map(|i| (VehicleId(i), t_star)).collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g_s.is_finite() && self.g_s > 0.0 && self.g_v.is_finite() && self.g_v > 0.0) {
            return Err(Error::validation(format!(
                "control gains must be positive, got g_s={} g_v={}",
                self.g_s, self.g_v
            )));
        }
        Ok(())
    }

    pub fn start_step(&self, i: VehicleId) -> u64 {
        self.t_star.get(&i).copied().unwrap_or(0)
    }
}

/// Desired offsets `Δ_{i,j}`, the target value of `s_i - s_j`.
///
/// Stored as the positive gaps between consecutive vehicles: `gaps[k]` is the
/// distance from vehicle `k+2` up to vehicle `k+1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacingPolicy {
    gaps: Vec<f64>,
}

impl SpacingPolicy {
    pub fn from_gaps(gaps: Vec<f64>) -> Result<Self> {
        if let Some(g) = gaps.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(Error::validation(format!("spacing gaps must be positive, got {g}")));
        }
        Ok(SpacingPolicy { gaps })
    }

    pub fn uniform(vehicles: usize, gap: f64) -> Result<Self> {
        Self::from_gaps(vec![gap; vehicles.saturating_sub(1)])
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    pub fn vehicles(&self) -> usize {
        self.gaps.len() + 1
    }

    /// `Δ_{i,j}`. Negative when `i` is behind `j`.
    pub fn delta(&self, i: VehicleId, j: VehicleId) -> f64 {
        let (lo, hi) = if i.0 <= j.0 { (i.0, j.0) } else { (j.0, i.0) };
        let span: f64 = self.gaps[lo - 1..hi - 1].iter().sum();
        if i.0 > j.0 {
            -span
        } else {
            span
        }
    }
}

/// `u_i = Σ_{j∈𝒩_i} g_s(s̄_j - ŝ_i + Δ_{i,j}) + g_v(v̄_j - v̂_i)`, zero before
/// the vehicle's start step.
pub fn control_input(
    i: VehicleId,
    x_hat_i: Vec2,
    x_bar_neighbors: &BTreeMap<VehicleId, Vec2>,
    gains: &ControlGains,
    spacing: &SpacingPolicy,
    t: u64,
    topology: &Topology,
) -> Result<f64> {
    if i.is_leader() {
        return Err(Error::validation("the leader has no control input"));
    }
    if t < gains.start_step(i) {
        return Ok(0.0);
    }
    let mut u = 0.0;
    for &j in topology.control_neighbors(i) {
        let x_bar_j = x_bar_neighbors.get(&j).ok_or_else(|| Error::Protocol {
            vehicle: i,
            what: format!("predicted estimate of vehicle {j}"),
        })?;
        u += gains.g_s * (x_bar_j[0] - x_hat_i[0] + spacing.delta(i, j)) + gains.g_v * (x_bar_j[1] - x_hat_i[1]);
    }
    Ok(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionVerdict {
    Satisfied,
    /// No inequality is violated but at least one holds with equality.
    Boundary,
    Violated,
}

/// Both inequalities as left-hand minus right-hand side; negative means the
/// strict inequality holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlCondition {
    pub lambda_max: f64,
    /// `λ_max(L_g) - 4 g_s / g_v²`.
    pub spectral_margin: f64,
    /// `T - g_v / g_s`.
    pub sampling_margin: f64,
    pub verdict: ConditionVerdict,
}

const BOUNDARY_TOL: f64 = 1e-12;

fn classify(margin: f64, scale: f64) -> ConditionVerdict {
    if margin.abs() <= BOUNDARY_TOL * scale.abs().max(1.0) {
        ConditionVerdict::Boundary
    } else if margin < 0.0 {
        ConditionVerdict::Satisfied
    } else {
        ConditionVerdict::Violated
    }
}

pub fn check_control_condition(l_g: &DMatrix<f64>, gains: &ControlGains, sampling_time: f64) -> ControlCondition {
    let lambda_max = l_g
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let spectral_rhs = 4.0 * gains.g_s / (gains.g_v * gains.g_v);
    let sampling_rhs = gains.g_v / gains.g_s;
    let spectral_margin = lambda_max - spectral_rhs;
    let sampling_margin = sampling_time - sampling_rhs;
    let verdict = match (classify(spectral_margin, spectral_rhs), classify(sampling_margin, sampling_rhs)) {
        (ConditionVerdict::Violated, _) | (_, ConditionVerdict::Violated) => ConditionVerdict::Violated,
        (ConditionVerdict::Satisfied, ConditionVerdict::Satisfied) => ConditionVerdict::Satisfied,
        _ => ConditionVerdict::Boundary,
    };
    ControlCondition {
        lambda_max,
        spectral_margin,
        sampling_margin,
        verdict,
    }
}
