//! Batches of independent runs.
//!
//! Each run only produces a [`RunSummary`]. Summaries are summed in run
//! order afterwards, so the floating-point result does not depend on whether
//! the runs were executed serially or on a thread pool.

use rayon::prelude::*;

use crate::error::Result;
use crate::harness::config::{RunConfig, SCHEMA_VERSION};
use crate::harness::metrics::{analyze, Metrics, Series};
use crate::harness::sim::{order_violated, run_step, DetectorKind, World};
use crate::platoon::VehicleId;

/// Per-run quantities, flat arrays indexed by `(t - 1) * N + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub abs_err_s: Vec<f64>,
    pub abs_err_v: Vec<f64>,
    pub rel_s: Vec<f64>,
    pub rel_v: Vec<f64>,
    pub crashes: u64,
    pub detection_time: Option<u64>,
    pub all_informed_time: Option<u64>,
    pub domination_violations: u64,
    /// Largest `‖x̂_i(t) - x_i(t)‖ / ρ(t)` seen.
    pub max_domination_ratio: f64,
    pub detector2_false_alarms: u64,
    pub false_isolations: u64,
}

pub fn run_summary(cfg: &RunConfig, run: u64) -> Result<RunSummary> {
    let n = cfg.platoon.vehicles();
    let cells = n * cfg.horizon as usize;
    let mut out = RunSummary {
        abs_err_s: Vec::with_capacity(cells),
        abs_err_v: Vec::with_capacity(cells),
        rel_s: Vec::with_capacity(cells),
        rel_v: Vec::with_capacity(cells),
        crashes: 0,
        detection_time: None,
        all_informed_time: None,
        domination_violations: 0,
        max_domination_ratio: 0.0,
        detector2_false_alarms: 0,
        false_isolations: 0,
    };
    let targets = &cfg.attack.targets;
    let attacked = |v: &VehicleId| cfg.attack.is_target(*v);
    let under_attack = targets.iter().any(attacked);
    let mut world = World::new(cfg, run)?;
    for _ in 0..cfg.horizon {
        let step = run_step(&mut world, cfg)?;
        let lead = step.rows[0].truth;
        for r in &step.rows {
            let e = r.x_hat - r.truth.to_vector();
            out.abs_err_s.push(e[0].abs());
            out.abs_err_v.push(e[1].abs());
            out.rel_s.push(r.truth.s - lead.s);
            out.rel_v.push(r.truth.v - lead.v);
            let err = e.norm();
            if err > r.rho {
                out.domination_violations += 1;
            }
            if r.rho > 0.0 {
                out.max_domination_ratio = out.max_domination_ratio.max(err / r.rho);
            }
        }
        let states: Vec<_> = step.rows.iter().map(|r| r.truth).collect();
        if order_violated(&states) {
            out.crashes += 1;
        }
        out.detector2_false_alarms += step
            .events
            .iter()
            .filter(|e| e.detector == DetectorKind::OwnGps && !attacked(&e.vehicle))
            .count() as u64;
        if step.rows.iter().any(|r| r.gamma.iter().any(|v| !attacked(v))) {
            out.false_isolations += 1;
        }
        if under_attack {
            if out.detection_time.is_none() && step.rows.iter().any(|r| r.gamma.iter().any(&attacked)) {
                out.detection_time = Some(step.t);
            }
            if out.all_informed_time.is_none() && step.rows.iter().all(|r| targets.is_subset(&r.gamma)) {
                out.all_informed_time = Some(step.t);
            }
        }
    }
    Ok(out)
}

/// Summaries of every run, in run order.
pub fn run_batch(cfg: &RunConfig, parallel: bool) -> Result<Vec<RunSummary>> {
    if parallel {
        (0..cfg.runs).into_par_iter().map(|r| run_summary(cfg, r)).collect()
    } else {
        (0..cfg.runs).map(|r| run_summary(cfg, r)).collect()
    }
}

/// Averages run summaries into [`Metrics`].
pub fn reduce(cfg: &RunConfig, summaries: &[RunSummary]) -> Result<Metrics> {
    let n = cfg.platoon.vehicles();
    let h = cfg.horizon as usize;
    let runs = summaries.len() as f64;
    let mean = |pick: fn(&RunSummary) -> &Vec<f64>| -> Series {
        let mut acc = vec![0.0; n * h];
        for s in summaries {
            for (a, v) in acc.iter_mut().zip(pick(s)) {
                *a += v;
            }
        }
        (0..n)
            .map(|i| (VehicleId::from_index(i), (0..h).map(|t| acc[t * n + i] / runs).collect()))
            .collect()
    };
    let crash_counts: Vec<u64> = summaries.iter().map(|s| s.crashes).collect();
    Ok(Metrics {
        schema_version: SCHEMA_VERSION,
        mode: cfg.mode,
        runs: summaries.len() as u64,
        horizon: cfg.horizon,
        sampling_time: cfg.platoon.sampling_time(),
        eta_s: mean(|s| &s.abs_err_s),
        eta_v: mean(|s| &s.abs_err_v),
        zeta_s: mean(|s| &s.rel_s),
        zeta_v: mean(|s| &s.rel_v),
        crash_count: crash_counts.iter().sum::<u64>() as f64 / runs,
        crash_counts,
        detection_time: summaries.iter().map(|s| s.detection_time).collect(),
        all_informed_time: summaries.iter().map(|s| s.all_informed_time).collect(),
        domination_violations: summaries.iter().map(|s| s.domination_violations).sum(),
        detector2_false_alarms: summaries.iter().map(|s| s.detector2_false_alarms).sum(),
        false_isolations: summaries.iter().map(|s| s.false_isolations).sum(),
        analysis: analyze(cfg)?,
    })
}

pub fn run_monte_carlo(cfg: &RunConfig, parallel: bool) -> Result<Metrics> {
    reduce(cfg, &run_batch(cfg, parallel)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::sim::simulate;

    #[test]
    fn single_run_matches_trace() {
        let mut cfg = RunConfig::reference();
        cfg.runs = 1;
        cfg.horizon = 60;
        let m = run_monte_carlo(&cfg, false).unwrap();
        let trace = simulate(&cfg, 0).unwrap();
        for r in &trace.rows {
            let k = r.t as usize - 1;
            assert_eq!(m.eta_s[&r.vehicle][k], (r.x_hat[0] - r.truth.s).abs());
            assert_eq!(m.zeta_v[&r.vehicle][k], r.truth.v - trace.rows[k * 5].truth.v);
        }
        assert_eq!(m.crash_counts, vec![crate::harness::sim::crash_count(&trace)]);
    }

    #[test]
    fn parallel_equals_serial() {
        let mut cfg = RunConfig::reference();
        cfg.runs = 6;
        cfg.horizon = 120;
        assert_eq!(run_monte_carlo(&cfg, false).unwrap(), run_monte_carlo(&cfg, true).unwrap());
    }
}
