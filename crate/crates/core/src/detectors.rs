//! Attack detectors and the detection-set protocol.
//!
//! * Detector 1 compares relative measurements with GPS differences between
//!   adjacent vehicles. For two attack-free vehicles the residual stays within
//!   `3μ`.
//! * Detector 2 compares a vehicle's own GPS reading with its one-step
//!   prediction against the envelope `‖A‖ρ(t-1) + ε + μ`.
//!
//! Confirmed attackers (`gamma`) and doubted pairs (`theta`) are merged with
//! the communication neighbors every step and never shrink.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::platoon::{Vec2, VehicleId};
use crate::sensing::{GpsMeasurement, NoiseBounds, RelativeMeasurement};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionState {
    /// Vehicles confirmed to be under attack.
    pub gamma: BTreeSet<VehicleId>,
    /// Vehicles detected with doubt.
    pub theta: BTreeSet<VehicleId>,
    /// Doubted pairs `(i-1, i)` behind the flat `theta` set.
    pub theta_history: BTreeSet<(VehicleId, VehicleId)>,
    /// Detector 1 test against the vehicle ahead has fired at some step.
    pub ahead_fired: bool,
    /// Detector 1 test against the vehicle behind has fired at some step.
    pub behind_fired: bool,
}

impl DetectionState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// `f_{i,i-1} = y_{i-1,i} + y_{i-1,i-1} - y_{i,i}`.
pub fn residual_f(rel: &RelativeMeasurement, gps_front: &GpsMeasurement, gps_rear: &GpsMeasurement) -> Result<Vec2> {
    if rel.front() != gps_front.owner || rel.rear() != gps_rear.owner {
        return Err(Error::validation(format!(
            "residual pairs relative ({}, {}) with GPS of {} and {}",
            rel.front(),
            rel.rear(),
            gps_front.owner,
            gps_rear.owner
        )));
    }
    Ok(rel.value + gps_front.value - gps_rear.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualTest {
    pub residual: f64,
    pub threshold: f64,
    pub fired: bool,
}

impl ResidualTest {
    fn strict(residual: f64, threshold: f64) -> Self {
        ResidualTest {
            residual,
            threshold,
            fired: residual > threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Detector1Outcome {
    /// Test on `f_{i,i-1}`.
    pub ahead: Option<ResidualTest>,
    /// Test on `f_{i+1,i}`.
    pub behind: Option<ResidualTest>,
    /// This step moved `i` into `gamma`.
    pub confirmed: bool,
}

impl Detector1Outcome {
    pub fn fired(&self) -> bool {
        self.ahead.is_some_and(|t| t.fired) || self.behind.is_some_and(|t| t.fired)
    }
}

/// Runs Detector 1 for vehicle `i`.
///
/// `pair_ahead` is `f_{i,i-1}` (absent for the leader) and `pair_behind` is
/// `f_{i+1,i}` (absent for the tail). Once both tests have fired, at the same
/// or different steps, `i` is confirmed.
pub fn detector1_step(
    i: VehicleId,
    pair_ahead: Option<Vec2>,
    pair_behind: Option<Vec2>,
    mu: f64,
    state: &mut DetectionState,
) -> Detector1Outcome {
    let threshold = 3.0 * mu;
    let ahead = pair_ahead.map(|f| ResidualTest::strict(f.norm(), threshold));
    let behind = pair_behind.map(|f| ResidualTest::strict(f.norm(), threshold));
    if ahead.is_some_and(|t| t.fired) {
        let front = VehicleId(i.0 - 1);
        state.theta.extend([front, i]);
        state.theta_history.insert((front, i));
        state.ahead_fired = true;
    }
    if behind.is_some_and(|t| t.fired) {
        let rear = VehicleId(i.0 + 1);
        state.theta.extend([i, rear]);
        state.theta_history.insert((i, rear));
        state.behind_fired = true;
    }
    let confirmed = state.ahead_fired && state.behind_fired && state.gamma.insert(i);
    Detector1Outcome {
        ahead,
        behind,
        confirmed,
    }
}

/// `ρ(t)` envelope on every vehicle's estimation error.
///
/// `ρ(t+1) = (1 - k(t+1)) ‖A‖ ρ(t) + Q` with
/// `k(t+1) = min{1, β / (‖A‖ρ(t) + ε + μ)}` and `Q = 3/2 (ε+μ) + √2/2 β`.
/// Values past `f64::MAX` are held at `f64::MAX`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoSequence {
    pub rho: f64,
    pub k_next: f64,
    pub q_const: f64,
    pub norm_a: f64,
    beta: f64,
    noise_sum: f64,
}

impl RhoSequence {
    pub fn new(bounds: &NoiseBounds, beta: f64, norm_a: f64) -> Self {
        let noise_sum = bounds.epsilon + bounds.mu;
        let rho = bounds.q;
        RhoSequence {
            rho,
            k_next: rho_gain(beta, norm_a, rho, noise_sum),
            q_const: 1.5 * noise_sum + std::f64::consts::FRAC_1_SQRT_2 * beta,
            norm_a,
            beta,
            noise_sum,
        }
    }

    /// Detector 2 threshold built on the current `ρ`: `‖A‖ρ + ε + μ`.
    pub fn envelope(&self) -> f64 {
        (self.norm_a * self.rho + self.noise_sum).min(f64::MAX)
    }
}

fn rho_gain(beta: f64, norm_a: f64, rho: f64, noise_sum: f64) -> f64 {
    if beta <= 0.0 {
        return 0.0;
    }
    (beta / (norm_a * rho + noise_sum)).min(1.0)
}

pub fn rho_next(seq: &RhoSequence) -> RhoSequence {
    let rho = ((1.0 - seq.k_next) * seq.norm_a * seq.rho + seq.q_const).min(f64::MAX);
    RhoSequence {
        rho,
        k_next: rho_gain(seq.beta, seq.norm_a, rho, seq.noise_sum),
        ..*seq
    }
}

/// Prediction Detector 2 compares the GPS reading against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Detector2Reference {
    /// `A x̂(t-1)`, ignoring the vehicle's own control input.
    #[default]
    Literal,
    /// `x̄(t) = A x̂(t-1) + [0, T u(t-1)]`.
    ControlCompensated,
}

/// Fires when `‖y_ii(t) - prediction‖ > ‖A‖ρ(t-1) + ε + μ`; `rho_prev`
/// carries `ρ(t-1)`. A firing puts `i` into `gamma`.
pub fn detector2_step(
    i: VehicleId,
    y_own: &GpsMeasurement,
    prediction: Vec2,
    rho_prev: &RhoSequence,
    state: &mut DetectionState,
) -> ResidualTest {
    let test = ResidualTest::strict((y_own.value - prediction).norm(), rho_prev.envelope());
    if test.fired {
        state.gamma.insert(i);
    }
    test
}

/// Union of the vehicle's own sets with those received from its neighbors.
/// The vehicle's own Detector 1 memory is kept as is.
pub fn merge_sets<'a>(own: &DetectionState, received: impl IntoIterator<Item = &'a DetectionState>) -> DetectionState {
    let mut out = own.clone();
    for other in received {
        out.gamma.extend(other.gamma.iter().copied());
        out.theta.extend(other.theta.iter().copied());
        out.theta_history.extend(other.theta_history.iter().copied());
    }
    out
}
