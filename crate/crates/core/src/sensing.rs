//! GPS and relative sensing, attack injection, and the six-dimensional
//! stacked measurement each vehicle builds from its own and its neighbors'
//! readings.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Vector6;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::platoon::{ensure_finite, Vec2, VehicleId, VehicleState};

pub type Vec6 = Vector6<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsMeasurement {
    pub owner: VehicleId,
    pub value: Vec2,
}

/// `y_{front,rear} = x_rear - x_front + d`, measured by the rear vehicle.
/// Relative sensing (radar/camera) is never attacked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeMeasurement {
    rear: VehicleId,
    front: VehicleId,
    pub value: Vec2,
}

impl RelativeMeasurement {
    pub fn new(rear: VehicleId, front: VehicleId, value: Vec2) -> Result<Self> {
        if rear.0 != front.0 + 1 {
            return Err(Error::validation(format!(
                "relative measurement must pair vehicle i with i-1, got rear {rear} front {front}"
            )));
        }
        ensure_finite("relative measurement", value.as_slice())?;
        Ok(RelativeMeasurement { rear, front, value })
    }

    pub fn rear(&self) -> VehicleId {
        self.rear
    }

    pub fn front(&self) -> VehicleId {
        self.front
    }
}

/// Attack signal shape applied to every targeted vehicle's GPS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AttackKind {
    None,
    /// `a = kappa * (clean GPS reading)`.
    MultiplicativeGain { kappa: f64 },
    AdditiveConstant { offset: [f64; 2] },
    /// `a(t) = rate * t`.
    AdditiveRamp { rate: [f64; 2] },
    /// `a(t) = values[t]`, zero past the end of the sequence.
    CustomSequence { values: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackModel {
    pub targets: BTreeSet<VehicleId>,
    pub kind: AttackKind,
}

impl AttackModel {
    pub fn none() -> Self {
        AttackModel {
            targets: BTreeSet::new(),
            kind: AttackKind::None,
        }
    }

    pub fn single(target: VehicleId, kind: AttackKind) -> Self {
        AttackModel {
            targets: [target].into_iter().collect(),
            kind,
        }
    }

    pub fn is_target(&self, vehicle: VehicleId) -> bool {
        !matches!(self.kind, AttackKind::None) && self.targets.contains(&vehicle)
    }
}

pub fn attack_signal(model: &AttackModel, step: u64, clean_measurement: Vec2, vehicle: VehicleId) -> Vec2 {
    if !model.is_target(vehicle) {
        return Vec2::zeros();
    }
    match &model.kind {
        AttackKind::None => Vec2::zeros(),
        AttackKind::MultiplicativeGain { kappa } => clean_measurement * *kappa,
        AttackKind::AdditiveConstant { offset } => Vec2::new(offset[0], offset[1]),
        AttackKind::AdditiveRamp { rate } => Vec2::new(rate[0], rate[1]) * step as f64,
        AttackKind::CustomSequence { values } => usize::try_from(step)
            .ok()
            .and_then(|k| values.get(k))
            .map_or_else(Vec2::zeros, |a| Vec2::new(a[0], a[1])),
    }
}

/// Bounds known to every vehicle: initial estimate error `q`, process noise
/// `epsilon`, measurement noise `mu` (all 2-norm bounds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseBounds {
    pub q: f64,
    pub epsilon: f64,
    pub mu: f64,
}

impl NoiseBounds {
    pub fn new(q: f64, epsilon: f64, mu: f64) -> Result<Self> {
        let b = NoiseBounds { q, epsilon, mu };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("q", self.q), ("epsilon", self.epsilon), ("mu", self.mu)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(format!("noise bound {name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// 2-norm bound of a 2-vector whose components are uniform on `[-b, b]`.
    pub fn norm_bound_of_uniform(half_width: f64) -> f64 {
        half_width * std::f64::consts::SQRT_2
    }
}

/// Which sensor a noise draw belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sensor {
    Process = 0,
    Gps = 1,
    Relative = 2,
}

const WORDS_PER_DRAW: u128 = 8;

/// Per-run noise generator.
///
/// Draws are addressed by `(vehicle, sensor, step)`: each address maps to its
/// own ChaCha8 stream and word offset, so the value of a draw never depends
/// on how many other draws were made before it.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: ChaCha8Rng,
    process_half_width: f64,
    measurement_half_width: f64,
}

impl NoiseSource {
    pub fn new(run_seed: u64, process_half_width: f64, measurement_half_width: f64) -> Self {
        NoiseSource {
            rng: ChaCha8Rng::seed_from_u64(run_seed),
            process_half_width,
            measurement_half_width,
        }
    }

    /// Per-run seed for run `run` of a batch with master seed `seed`.
    pub fn run_seed(seed: u64, run: u64) -> u64 {
        seed.wrapping_add(run)
    }

    pub fn draw(&mut self, vehicle: VehicleId, sensor: Sensor, step: u64) -> Vec2 {
        let half_width = match sensor {
            Sensor::Process => self.process_half_width,
            Sensor::Gps | Sensor::Relative => self.measurement_half_width,
        };
        self.rng.set_stream((vehicle.index() as u64) * 4 + sensor as u64);
        self.rng.set_word_pos(u128::from(step) * WORDS_PER_DRAW);
        let a: f64 = self.rng.random();
        let b: f64 = self.rng.random();
        Vec2::new(half_width * (2.0 * a - 1.0), half_width * (2.0 * b - 1.0))
    }
}

/// `y = x + a + d`.
pub fn gps_measure(owner: VehicleId, truth: VehicleState, clean_noise: Vec2, attack: Vec2) -> GpsMeasurement {
    GpsMeasurement {
        owner,
        value: truth.to_vector() + attack + clean_noise,
    }
}

pub fn relative_measure(
    rear: VehicleId,
    truth_rear: VehicleState,
    front: VehicleId,
    truth_front: VehicleState,
    noise: Vec2,
) -> Result<RelativeMeasurement> {
    RelativeMeasurement::new(rear, front, truth_rear.to_vector() - truth_front.to_vector() + noise)
}

/// Source vehicles of the three 2-blocks of vehicle `i`'s stacked
/// measurement, i.e. the vehicles whose GPS attack would contaminate each
/// block.
pub fn stacked_labels(i: VehicleId, vehicles: usize) -> [VehicleId; 3] {
    let n = vehicles;
    match i.0 {
        1 => [VehicleId(1), VehicleId(2), VehicleId(3)],
        k if k == n => [VehicleId(n - 2), VehicleId(n - 1), VehicleId(n)],
        k => [VehicleId(k - 1), VehicleId(k), VehicleId(k + 1)],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StackedMeasurement {
    pub owner: VehicleId,
    pub z: Vec6,
    pub labels: [VehicleId; 3],
}

impl StackedMeasurement {
    pub fn block(&self, m: usize) -> Vec2 {
        Vec2::new(self.z[2 * m], self.z[2 * m + 1])
    }
}

/// Builds `z_i` from the GPS readings and relative readings available to
/// vehicle `i`. Relative readings are keyed by their rear vehicle.
///
/// Block layout:
/// * `i = 1`: `[y_11, y_22 - y_12, y_33 - y_12 - y_23]`
/// * `1 < i < N`: `[y_{i-1,i} + y_{i-1,i-1}, y_ii, y_{i+1,i+1} - y_{i,i+1}]`
/// * `i = N`: `[y_{N-1,N} + y_{N-2,N-1} + y_{N-2,N-2}, y_{N-1,N} + y_{N-1,N-1}, y_NN]`
pub fn assemble_stacked(
    i: VehicleId,
    gps: &BTreeMap<VehicleId, GpsMeasurement>,
    relative: &BTreeMap<VehicleId, RelativeMeasurement>,
    vehicles: usize,
) -> Result<StackedMeasurement> {
    let n = vehicles;
    let y = |j: usize| -> Result<Vec2> {
        gps.get(&VehicleId(j)).map(|m| m.value).ok_or_else(|| Error::Protocol {
            vehicle: i,
            what: format!("GPS measurement y_{{{j},{j}}}"),
        })
    };
    // y_{j-1,j}: relative reading taken by vehicle j of vehicle j-1
    let r = |j: usize| -> Result<Vec2> {
        relative.get(&VehicleId(j)).map(|m| m.value).ok_or_else(|| Error::Protocol {
            vehicle: i,
            what: format!("relative measurement y_{{{},{j}}}", j - 1),
        })
    };
    if i.0 == 0 || i.0 > n {
        return Err(Error::validation(format!("vehicle {i} outside 1..={n}")));
    }
    let blocks = match i.0 {
        1 => [y(1)?, y(2)? - r(2)?, y(3)? - r(2)? - r(3)?],
        k if k == n => [
            r(n)? + r(n - 1)? + y(n - 2)?,
            r(n)? + y(n - 1)?,
            y(n)?,
        ],
        k => [r(k)? + y(k - 1)?, y(k)?, y(k + 1)? - r(k + 1)?],
    };
    let mut z = Vec6::zeros();
    for (m, b) in blocks.iter().enumerate() {
        z[2 * m] = b[0];
        z[2 * m + 1] = b[1];
    }
    Ok(StackedMeasurement {
        owner: i,
        z,
        labels: stacked_labels(i, n),
    })
}
