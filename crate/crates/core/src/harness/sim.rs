//! One synchronized platoon step and single-run simulation.
//!
//! Within a step every vehicle works only from its own readings, its own
//! previous estimate and the messages its communication neighbors broadcast
//! at the start of the step. Truth propagation, measurement, broadcast,
//! estimation and control happen in that order for all vehicles.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::analysis::spectral_norm_a;
use crate::controller::control_input;
use crate::detectors::{
    detector1_step, detector2_step, merge_sets, residual_f, rho_next, DetectionState, Detector2Reference, RhoSequence,
};
use crate::error::{Error, Result};
use crate::harness::config::{Mode, RunConfig};
use crate::observer::{
    adjust_gains, innovation, measurement_update, saturation_gains, time_update, GainCase, GainDiagonal,
};
use crate::platoon::{build_topology, step_follower, step_leader, Topology, Vec2, VehicleId, VehicleState};
use crate::sensing::{
    assemble_stacked, attack_signal, gps_measure, relative_measure, GpsMeasurement, NoiseSource, RelativeMeasurement,
    Sensor, Vec6,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    /// Detector 1 on the pair with the vehicle ahead.
    PairAhead,
    /// Detector 1 on the pair with the vehicle behind.
    PairBehind,
    /// Detector 2 on the vehicle's own GPS.
    OwnGps,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub t: u64,
    pub vehicle: VehicleId,
    pub detector: DetectorKind,
    pub residual: f64,
    pub threshold: f64,
}

/// Everything vehicle `i` computed at step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleRecord {
    pub t: u64,
    pub vehicle: VehicleId,
    pub truth: VehicleState,
    pub x_bar: Vec2,
    pub x_hat: Vec2,
    pub u: f64,
    pub eta: Vec6,
    pub gains: GainDiagonal,
    pub gain_case: GainCase,
    pub gamma: BTreeSet<VehicleId>,
    pub theta: BTreeSet<VehicleId>,
    pub det1_fired: bool,
    pub det2_fired: bool,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: u64,
    pub rows: Vec<VehicleRecord>,
    pub events: Vec<DetectionEvent>,
}

/// Rows ordered by step, then vehicle.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub vehicles: usize,
    pub rows: Vec<VehicleRecord>,
    pub events: Vec<DetectionEvent>,
}

impl Trace {
    pub fn steps(&self) -> impl Iterator<Item = &[VehicleRecord]> {
        self.rows.chunks(self.vehicles.max(1))
    }
}

/// What vehicle `j` sends its neighbors at the start of a step.
#[derive(Debug, Clone)]
struct Message {
    gps: GpsMeasurement,
    relative: Option<RelativeMeasurement>,
    sets: DetectionState,
    x_bar: Vec2,
}

pub struct World {
    t: u64,
    topology: Topology,
    truth: Vec<VehicleState>,
    x_hat: Vec<Vec2>,
    u: Vec<f64>,
    detection: Vec<DetectionState>,
    rho: RhoSequence,
    noise: NoiseSource,
}

impl World {
    /// Initial world of run `run`; its noise seed is derived from the master seed.
    pub fn new(cfg: &RunConfig, run: u64) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.platoon.vehicles();
        let norm_a = spectral_norm_a(cfg.platoon.sampling_time());
        Ok(World {
            t: 0,
            topology: build_topology(n)?,
            truth: cfg.initial_states.clone(),
            x_hat: cfg.initial_estimates.clone(),
            u: vec![0.0; n],
            detection: vec![DetectionState::new(); n],
            rho: RhoSequence::new(&cfg.bounds, cfg.beta, norm_a),
            noise: NoiseSource::new(
                NoiseSource::run_seed(cfg.seed, run),
                cfg.noise_policy.half_width(cfg.bounds.epsilon),
                cfg.noise_policy.half_width(cfg.bounds.mu),
            ),
        })
    }

    pub fn step_index(&self) -> u64 {
        self.t
    }

    pub fn truth(&self) -> &[VehicleState] {
        &self.truth
    }

    pub fn estimates(&self) -> &[Vec2] {
        &self.x_hat
    }

    pub fn rho(&self) -> &RhoSequence {
        &self.rho
    }
}

fn diverged(step: u64, vehicle: VehicleId) -> Error {
    Error::Diverged { step, vehicle }
}

/// Advances `world` from step `t-1` to `t`.
pub fn run_step(world: &mut World, cfg: &RunConfig) -> Result<StepRecord> {
    let t = world.t + 1;
    let n = cfg.platoon.vehicles();
    let params = &cfg.platoon;
    let ids: Vec<VehicleId> = params.ids().collect();
    let secure = cfg.mode == Mode::Secure;

    // truth
    let mut truth = Vec::with_capacity(n);
    for &i in &ids {
        let noise = world.noise.draw(i, Sensor::Process, t);
        let prev = world.truth[i.index()];
        let next = if i.is_leader() {
            step_leader(prev, noise, params)
        } else {
            step_follower(prev, world.u[i.index()], noise, params)
        }
        .map_err(|_| diverged(t, i))?;
        if !next.is_finite() {
            return Err(diverged(t, i));
        }
        truth.push(next);
    }

    // readings and broadcasts
    let mut messages = Vec::with_capacity(n);
    for &i in &ids {
        let x = truth[i.index()];
        let d = world.noise.draw(i, Sensor::Gps, t);
        let clean = x.to_vector() + d;
        let gps = gps_measure(i, x, d, attack_signal(&cfg.attack, t, clean, i));
        let relative = if i.is_leader() {
            None
        } else {
            let front = VehicleId(i.0 - 1);
            let d = world.noise.draw(i, Sensor::Relative, t);
            Some(relative_measure(i, x, front, truth[front.index()], d).map_err(|_| diverged(t, i))?)
        };
        let x_bar = time_update(world.x_hat[i.index()], world.u[i.index()], params);
        messages.push(Message {
            gps,
            relative,
            sets: world.detection[i.index()].clone(),
            x_bar,
        });
    }

    // estimation
    let mut x_hat = Vec::with_capacity(n);
    let mut detection = Vec::with_capacity(n);
    let mut partial = Vec::with_capacity(n);
    let mut events = Vec::new();
    for &i in &ids {
        let own = &messages[i.index()];
        let inbox: Vec<(VehicleId, &Message)> =
            world.topology.comm_neighbors(i).iter().map(|j| (*j, &messages[j.index()])).collect();
        let from = |j: VehicleId| -> Result<&Message> {
            if j == i {
                return Ok(own);
            }
            inbox.iter().find(|(k, _)| *k == j).map(|(_, m)| *m).ok_or_else(|| Error::Protocol {
                vehicle: i,
                what: format!("broadcast of vehicle {j}"),
            })
        };

        let mut gps = BTreeMap::new();
        let mut relative = BTreeMap::new();
        for (j, m) in std::iter::once((i, own)).chain(inbox.iter().copied()) {
            gps.insert(j, m.gps);
            if let Some(r) = m.relative {
                relative.insert(j, r);
            }
        }
        let z = assemble_stacked(i, &gps, &relative, n)?;
        let x_bar = own.x_bar;
        let eta = innovation(&z, x_bar);

        let mut state = DetectionState::new();
        let mut det1_fired = false;
        let mut det2_fired = false;
        let adjusted = if secure {
            state = merge_sets(&own.sets, inbox.iter().map(|(_, m)| &m.sets));
            let ahead = if i.is_leader() {
                None
            } else {
                let front = VehicleId(i.0 - 1);
                Some(residual_f(own.relative.as_ref().expect("follower reading"), &from(front)?.gps, &own.gps)?)
            };
            let behind = if i.0 == n {
                None
            } else {
                let rear = from(VehicleId(i.0 + 1))?;
                let rel = rear.relative.as_ref().ok_or_else(|| Error::Protocol {
                    vehicle: i,
                    what: format!("relative measurement of vehicle {}", i.0 + 1),
                })?;
                Some(residual_f(rel, &own.gps, &rear.gps)?)
            };
            let d1 = detector1_step(i, ahead, behind, cfg.bounds.mu, &mut state);
            det1_fired = d1.fired();
            for (test, detector) in [(d1.ahead, DetectorKind::PairAhead), (d1.behind, DetectorKind::PairBehind)] {
                if let Some(test) = test.filter(|t| t.fired) {
                    events.push(DetectionEvent {
                        t,
                        vehicle: i,
                        detector,
                        residual: test.residual,
                        threshold: test.threshold,
                    });
                }
            }

            let prediction = match cfg.detector2 {
                Detector2Reference::Literal => params.transition() * world.x_hat[i.index()],
                Detector2Reference::ControlCompensated => x_bar,
            };
            let d2 = detector2_step(i, &own.gps, prediction, &world.rho, &mut state);
            det2_fired = d2.fired;
            if d2.fired {
                events.push(DetectionEvent {
                    t,
                    vehicle: i,
                    detector: DetectorKind::OwnGps,
                    residual: d2.residual,
                    threshold: d2.threshold,
                });
            }
            adjust_gains(saturation_gains(&eta, cfg.beta), &state.gamma, &state.theta, &z.labels)
        } else {
            crate::observer::AdjustedGains {
                gains: GainDiagonal::ONES,
                case: GainCase::Unit,
                model_violation: false,
            }
        };
        let estimate = measurement_update(x_bar, &adjusted.gains, &eta);
        if !estimate.iter().all(|c| c.is_finite()) {
            return Err(diverged(t, i));
        }
        x_hat.push(estimate);
        partial.push((z, eta, adjusted, det1_fired, det2_fired));
        detection.push(state);
    }
    let rho = rho_next(&world.rho);

    // control
    let mut u = vec![0.0; n];
    for &i in ids.iter().filter(|i| !i.is_leader()) {
        let neighbors: BTreeMap<VehicleId, Vec2> = world
            .topology
            .control_neighbors(i)
            .iter()
            .filter(|j| world.topology.comm_neighbors(i).contains(j))
            .map(|j| (*j, messages[j.index()].x_bar))
            .collect();
        let ui = control_input(i, x_hat[i.index()], &neighbors, &cfg.gains, &cfg.spacing, t, &world.topology)?;
        if !ui.is_finite() {
            return Err(diverged(t, i));
        }
        u[i.index()] = ui;
    }

    let rows = ids
        .iter()
        .zip(partial)
        .map(|(&i, (_z, eta, adjusted, det1_fired, det2_fired))| VehicleRecord {
            t,
            vehicle: i,
            truth: truth[i.index()],
            x_bar: messages[i.index()].x_bar,
            x_hat: x_hat[i.index()],
            u: u[i.index()],
            eta,
            gains: adjusted.gains,
            gain_case: adjusted.case,
            gamma: detection[i.index()].gamma.clone(),
            theta: detection[i.index()].theta.clone(),
            det1_fired,
            det2_fired,
            rho: rho.rho,
        })
        .collect();

    world.t = t;
    world.truth = truth;
    world.x_hat = x_hat;
    world.u = u;
    world.detection = detection;
    world.rho = rho;
    Ok(StepRecord { t, rows, events })
}

/// True when positions are not strictly decreasing from leader to tail.
pub fn order_violated(states: &[VehicleState]) -> bool {
    states.windows(2).any(|w| !(w[0].s > w[1].s))
}

/// Steps at which the platoon order differs from 1, 2, ..., N.
pub fn crash_count(trace: &Trace) -> u64 {
    trace
        .steps()
        .filter(|rows| {
            let states: Vec<VehicleState> = rows.iter().map(|r| r.truth).collect();
            order_violated(&states)
        })
        .count() as u64
}

/// Runs one full horizon and keeps every row.
pub fn simulate(cfg: &RunConfig, run: u64) -> Result<Trace> {
    let mut world = World::new(cfg, run)?;
    let mut trace = Trace {
        vehicles: cfg.platoon.vehicles(),
        rows: Vec::with_capacity(cfg.platoon.vehicles() * cfg.horizon as usize),
        events: Vec::new(),
    };
    for _ in 0..cfg.horizon {
        let step = run_step(&mut world, cfg)?;
        trace.rows.extend(step.rows);
        trace.events.extend(step.events);
    }
    Ok(trace)
}
