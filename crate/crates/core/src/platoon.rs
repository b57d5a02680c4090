//! Platoon dynamics and communication/control topology.
//!
//! Vehicles are labelled `1..=N` from the leader to the tail. Every vehicle
//! is a discrete-time double integrator with state `[s, v]` (position,
//! velocity); the leader is control-free.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{DMatrix, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;

/// One-based vehicle label, `1` being the leader.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub usize);

impl VehicleId {
    pub const LEADER: VehicleId = VehicleId(1);

    pub fn index(self) -> usize {
        self.0 - 1
    }

    pub fn from_index(index: usize) -> Self {
        VehicleId(index + 1)
    }

    pub fn is_leader(self) -> bool {
        self.0 == 1
    }
}

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Position (m) and velocity (m/s) of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub s: f64,
    pub v: f64,
}

impl VehicleState {
    pub fn new(s: f64, v: f64) -> Self {
        VehicleState { s, v }
    }

    pub fn from_vector(x: &Vec2) -> Self {
        VehicleState { s: x[0], v: x[1] }
    }

    pub fn to_vector(self) -> Vec2 {
        Vec2::new(self.s, self.v)
    }

    pub fn is_finite(&self) -> bool {
        self.s.is_finite() && self.v.is_finite()
    }
}

pub(crate) fn ensure_finite(label: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::validation(format!("{label} must be finite, got {values:?}")))
    }
}

/// Vehicle count and sampling time. The transition matrix is always derived
/// from the sampling time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlatoonParams {
    vehicles: usize,
    sampling_time: f64,
}

impl PlatoonParams {
    pub fn new(vehicles: usize, sampling_time: f64) -> Result<Self> {
        if vehicles < 3 {
            return Err(Error::Config(format!(
                "a platoon needs at least 3 vehicles, got {vehicles}"
            )));
        }
        if !(sampling_time.is_finite() && sampling_time > 0.0) {
            return Err(Error::Config(format!(
                "sampling time must be positive and finite, got {sampling_time}"
            )));
        }
        Ok(PlatoonParams {
            vehicles,
            sampling_time,
        })
    }

    pub fn vehicles(&self) -> usize {
        self.vehicles
    }

    pub fn sampling_time(&self) -> f64 {
        self.sampling_time
    }

    /// `[[1, T], [0, 1]]`.
    pub fn transition(&self) -> Matrix2<f64> {
        transition_matrix(self.sampling_time)
    }

    pub fn ids(&self) -> impl Iterator<Item = VehicleId> {
        (1..=self.vehicles).map(VehicleId)
    }
}

pub fn transition_matrix(sampling_time: f64) -> Matrix2<f64> {
    Matrix2::new(1.0, sampling_time, 0.0, 1.0)
}

/// `x' = A x + n` for the control-free leader.
pub fn step_leader(state: VehicleState, noise: Vec2, params: &PlatoonParams) -> Result<VehicleState> {
    step_follower(state, 0.0, noise, params)
}

/// `x' = A x + [0, T u] + n`.
pub fn step_follower(
    state: VehicleState,
    accel: f64,
    noise: Vec2,
    params: &PlatoonParams,
) -> Result<VehicleState> {
    ensure_finite("vehicle state", &[state.s, state.v])?;
    ensure_finite("acceleration input", &[accel])?;
    ensure_finite("process noise", noise.as_slice())?;
    let t = params.sampling_time;
    Ok(VehicleState {
        s: state.s + t * state.v + noise[0],
        v: state.v + t * accel + noise[1],
    })
}

/// Neighbor sets of every vehicle.
///
/// `comm` holds the vehicles whose measurements, detection sets and predicted
/// estimates vehicle `i` receives; `control` holds the vehicles it tracks in
/// the control law. Both are indexed by `VehicleId::index`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    comm: Vec<BTreeSet<VehicleId>>,
    control: Vec<BTreeSet<VehicleId>>,
}

impl Topology {
    pub fn vehicles(&self) -> usize {
        self.comm.len()
    }

    pub fn comm_neighbors(&self, i: VehicleId) -> &BTreeSet<VehicleId> {
        &self.comm[i.index()]
    }

    pub fn control_neighbors(&self, i: VehicleId) -> &BTreeSet<VehicleId> {
        &self.control[i.index()]
    }

    /// Communication neighbors plus the vehicle itself.
    pub fn extended_neighbors(&self, i: VehicleId) -> BTreeSet<VehicleId> {
        let mut set = self.comm[i.index()].clone();
        set.insert(i);
        set
    }
}

pub fn build_topology(vehicles: usize) -> Result<Topology> {
    if vehicles < 3 {
        return Err(Error::Config(format!(
            "a platoon needs at least 3 vehicles, got {vehicles}"
        )));
    }
    let n = vehicles;
    let mut comm = Vec::with_capacity(n);
    let mut control = Vec::with_capacity(n);
    for i in 1..=n {
        let (c, k): (Vec<usize>, Vec<usize>) = if i == 1 {
            (vec![2, 3], vec![2])
        } else if i == n {
            (vec![n - 2, n - 1], vec![n - 1])
        } else {
            (vec![i - 1, i + 1], vec![i - 1, i + 1])
        };
        comm.push(c.into_iter().map(VehicleId).collect());
        control.push(k.into_iter().map(VehicleId).collect());
    }
    Ok(Topology { comm, control })
}

/// Laplacian of the undirected control graph with the leader's row and
/// column removed. Row `k` corresponds to vehicle `k + 2`.
pub fn ground_laplacian(topology: &Topology) -> DMatrix<f64> {
    let n = topology.vehicles();
    let mut full = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in topology.control[i].iter().map(|id| id.index()) {
            // undirected: symmetric edge weights even if a set were one-sided
            full[(i, j)] = -1.0;
            full[(j, i)] = -1.0;
        }
    }
    for i in 0..n {
        let degree: f64 = (0..n).filter(|&j| j != i).map(|j| -full[(i, j)]).sum();
        full[(i, i)] = degree;
    }
    full.view((1, 1), (n - 1, n - 1)).into_owned()
}
